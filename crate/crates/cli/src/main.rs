//! `mars-coloc`: labels in, viewsheds out.
//!
//! Exit codes: 0 everything succeeded, 2 some items failed, 1 nothing
//! succeeded or the run could not start, 64 bad command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mars_coloc::pipeline::{self, BatchReport, BatchStatus, ConfigOverrides, HttpTransport, PipelineConfig};
use mars_coloc::{Curvature, Fallback, Mission, RasterFormat, ViewshedMode};

const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "mars-coloc", version, about = "Co-locate rover mast-camera images with orbital maps")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

/// Flags override the config file, which overrides built-in defaults.
#[derive(Args)]
struct GlobalArgs {
    /// JSON run configuration; relative paths inside it resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Orbital DEM (ESRI ASCII grid or GeoTIFF).
    #[arg(long, global = true)]
    dem: Option<PathBuf>,
    /// Rover localization table.
    #[arg(long, global = true)]
    places_csv: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    mission: Option<MissionArg>,
    /// Camera height above ground in meters.
    #[arg(long, global = true)]
    observer_height: Option<f64>,
    /// Maximum viewing distance in meters.
    #[arg(long, global = true)]
    radius: Option<f64>,
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, global = true, value_enum)]
    curvature: Option<CurvatureArg>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Raster output format.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// What to do when a label's site/drive is missing from the table.
    #[arg(long, global = true, value_enum)]
    fallback: Option<FallbackArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Labels → viewpoints → viewsheds, rasters, GeoJSON and the viewpoint CSV.
    Colocate {
        #[arg(required = true)]
        labels: Vec<PathBuf>,
    },
    /// Labels → viewpoint CSV only.
    Viewpoint {
        #[arg(required = true)]
        labels: Vec<PathBuf>,
    },
    /// Viewsheds for every row of an existing viewpoint CSV.
    Viewshed {
        #[arg(long)]
        viewpoints: PathBuf,
    },
    /// Compare two visibility rasters.
    Overlap {
        a: PathBuf,
        b: PathBuf,
        /// Write the overlap raster and GeoJSON here (extension replaced).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Download image/label pairs into the cache.
    Fetch {
        #[arg(required = true)]
        product_ids: Vec<String>,
        /// Re-download even when cached.
        #[arg(long)]
        force_fetch: bool,
    },
}

macro_rules! value_enum {
    ($arg:ident => $target:ty { $($variant:ident => $value:expr),* $(,)? }) => {
        #[derive(Clone, Copy, ValueEnum)]
        enum $arg { $($variant),* }

        impl From<$arg> for $target {
            fn from(a: $arg) -> Self {
                match a { $($arg::$variant => $value),* }
            }
        }
    };
}

value_enum!(MissionArg => Mission { Curiosity => Mission::Curiosity, Perseverance => Mission::Perseverance });
value_enum!(ModeArg => ViewshedMode { Exact => ViewshedMode::Exact, Sweep => ViewshedMode::Sweep });
value_enum!(CurvatureArg => Curvature { Off => Curvature::Off, Mars => Curvature::Mars });
value_enum!(FormatArg => RasterFormat { Ascii => RasterFormat::Ascii, Geotiff => RasterFormat::Geotiff });
value_enum!(FallbackArg => Fallback { Exact => Fallback::Exact, NearestPreceding => Fallback::NearestPreceding });

impl GlobalArgs {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            mission: self.mission.map(Into::into),
            dem: self.dem.clone(),
            places_csv: self.places_csv.clone(),
            observer_height_m: self.observer_height,
            radius_m: self.radius,
            mode: self.mode.map(Into::into),
            curvature: self.curvature.map(Into::into),
            out_dir: self.out_dir.clone(),
            format: self.format.map(Into::into),
            fallback: self.fallback.map(Into::into),
        }
    }
}

fn report<T>(batch: &BatchReport<T>, describe: impl Fn(&T) -> String) -> u8 {
    for o in &batch.outcomes {
        match &o.result {
            Ok(v) => println!("ok     {}: {}", o.label.display(), describe(v)),
            Err(e) => eprintln!("error  {}: {e}", o.label.display()),
        }
    }
    if let Some(csv) = &batch.csv_path {
        println!("viewpoints: {}", csv.display());
    }
    batch.status().exit_code() as u8
}

fn warn_all(warnings: &[String], id: &str) {
    for w in warnings {
        eprintln!("warn   {id}: {w}");
    }
}

fn fetch(config: &PipelineConfig, ids: &[String], force: bool) -> u8 {
    let transport = HttpTransport::default();
    let base = config.fetch.base_url(config.mission);
    let mut ok = 0;
    for id in ids {
        match pipeline::fetch_product_with(&transport, id, config.mission, &config.cache_dir, base, force) {
            Ok(p) => {
                ok += 1;
                let how = if p.downloaded { "downloaded" } else { "cached" };
                println!("ok     {id}: {how} {} {}", p.label_path.display(), p.image_path.display());
            }
            Err(e) => eprintln!("error  {id}: {e}"),
        }
    }
    let status = if ok == ids.len() {
        BatchStatus::Success
    } else if ok == 0 {
        BatchStatus::Failed
    } else {
        BatchStatus::Partial
    };
    status.exit_code() as u8
}

fn run(cli: Cli) -> Result<u8, mars_coloc::Error> {
    let config = PipelineConfig::resolve(cli.global.config.as_deref(), &cli.global.overrides(), |k| std::env::var(k).ok())?;
    Ok(match cli.command {
        Command::Colocate { labels } => {
            let batch = pipeline::colocate(&config, &labels)?;
            for r in batch.succeeded() {
                warn_all(&r.warnings, &r.image_id);
            }
            report(&batch, |r| {
                format!("{} visible cells -> {}, {}", r.visible_cells, r.raster_path.display(), r.geojson_path.display())
            })
        }
        Command::Viewpoint { labels } => {
            let batch = pipeline::viewpoints(&config, &labels)?;
            for (_, vp) in batch.succeeded() {
                warn_all(&vp.warnings, &vp.image_id);
            }
            report(&batch, |(_, vp)| pipeline::viewpoint_csv_row(vp))
        }
        Command::Viewshed { viewpoints } => {
            let batch = pipeline::viewsheds_from_csv(&config, &viewpoints)?;
            report(&batch, |o| format!("{} visible cells -> {}", o.visible_cells, o.raster_path.display()))
        }
        Command::Overlap { a, b, out } => {
            let rep = pipeline::overlap_command(&a, &b, out.as_deref().map(|p: &Path| (p, config.format)))?;
            println!("area_a_m2: {}", rep.area_a_m2);
            println!("area_b_m2: {}", rep.area_b_m2);
            println!("area_overlap_m2: {}", rep.area_overlap_m2);
            println!("jaccard: {}", rep.jaccard);
            0
        }
        Command::Fetch { product_ids, force_fetch } => fetch(&config, &product_ids, force_fetch),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("mars-coloc: {e}");
            ExitCode::from(BatchStatus::Failed.exit_code() as u8)
        }
    }
}
