//! Run configuration and the label → viewshed batch driver.

mod fetch;
mod viewpoint_csv;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use fetch::{
    fetch_product, fetch_product_with, product_sol, product_urls, FetchConfig, FetchError, FetchedProduct, HttpTransport,
    Transport,
};
pub use viewpoint_csv::{export_viewpoint_csv, read_viewpoint_csv, viewpoint_csv_row, VIEWPOINT_CSV_HEADER};

use crate::labels::{
    detect_format, extract_pds3, extract_pds4, parse_pvl_with, DuplicatePolicy, ExtractionProfile, ImageMetadata, LabelFormat,
    Mission,
};
use crate::localization::{lookup_pose, CsvSchema, Fallback, LocalizationTable};
use crate::pointing::{build_viewpoint, Viewpoint, DEFAULT_RADIUS_M};
use crate::raster::{load_dem, load_visibility, polygonize, write_visibility, Dem, RasterFormat};
use crate::viewshed::{compute_viewshed, overlap, Curvature, Execution, OverlapReport, ViewshedMode, ViewshedParams, MARS_MEAN_RADIUS_M};
use crate::Error;

/// Env var that overrides `cache_dir`.
pub const CACHE_ENV: &str = "MARS_COLOC_CACHE";

/// File name of the batch viewpoint CSV inside `out_dir`.
pub const VIEWPOINTS_FILE: &str = "viewpoints.csv";

/// A shipped schema by name or a custom column mapping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemaChoice {
    Named(String),
    Custom(CsvSchema),
}

/// Every run-scoped knob. Missing JSON keys take the defaults shown by
/// [`PipelineConfig::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub mission: Mission,
    /// Replaces the built-in extraction profile for `mission`.
    pub profile: Option<ExtractionProfile>,
    pub dem: Option<PathBuf>,
    pub places_csv: Option<PathBuf>,
    /// Defaults to the mission's shipped schema.
    pub places_schema: Option<SchemaChoice>,
    pub cache_dir: PathBuf,
    /// Defaults to the extraction profile's value.
    pub observer_height_m: Option<f64>,
    pub radius_m: f64,
    pub target_height_m: f64,
    pub mode: ViewshedMode,
    pub curvature: Curvature,
    pub planet_radius_m: f64,
    pub fallback: Fallback,
    pub out_dir: PathBuf,
    pub format: RasterFormat,
    /// Process labels (and viewshed rays/cells) on the rayon pool.
    pub parallel: bool,
    pub fetch: FetchConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mission: Mission::Curiosity,
            profile: None,
            dem: None,
            places_csv: None,
            places_schema: None,
            cache_dir: PathBuf::from(".mars-coloc-cache"),
            observer_height_m: None,
            radius_m: DEFAULT_RADIUS_M,
            target_height_m: 0.0,
            mode: ViewshedMode::Sweep,
            curvature: Curvature::Off,
            planet_radius_m: MARS_MEAN_RADIUS_M,
            fallback: Fallback::Exact,
            out_dir: PathBuf::from("out"),
            format: RasterFormat::Ascii,
            parallel: true,
            fetch: FetchConfig::default(),
        }
    }
}

/// Values given on the command line; each `Some` beats the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub mission: Option<Mission>,
    pub dem: Option<PathBuf>,
    pub places_csv: Option<PathBuf>,
    pub observer_height_m: Option<f64>,
    pub radius_m: Option<f64>,
    pub mode: Option<ViewshedMode>,
    pub curvature: Option<Curvature>,
    pub out_dir: Option<PathBuf>,
    pub format: Option<RasterFormat>,
    pub fallback: Option<Fallback>,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, Error> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            config.rebase(base);
        }
        Ok(config)
    }

    /// Makes relative paths relative to `base` (the config file's directory).
    pub fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.dem, &mut self.places_csv].into_iter().flatten() {
            fix(p);
        }
        fix(&mut self.out_dir);
        fix(&mut self.cache_dir);
    }

    /// Defaults, then the optional file, then environment, then flags.
    pub fn resolve(file: Option<&Path>, overrides: &ConfigOverrides, env: impl Fn(&str) -> Option<String>) -> Result<Self, Error> {
        let mut config = match file {
            Some(path) => Self::from_json_file(path)?,
            None => Self::default(),
        };
        if let Some(dir) = env(CACHE_ENV).filter(|d| !d.is_empty()) {
            config.cache_dir = PathBuf::from(dir);
        }
        config.apply(overrides);
        config.validate()?;
        Ok(config)
    }

    pub fn apply(&mut self, o: &ConfigOverrides) {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = o.$field.clone() {
                    self.$field = v;
                }
            )*};
        }
        set!(mission, radius_m, mode, curvature, out_dir, format, fallback);
        if o.dem.is_some() {
            self.dem = o.dem.clone();
        }
        if o.places_csv.is_some() {
            self.places_csv = o.places_csv.clone();
        }
        if o.observer_height_m.is_some() {
            self.observer_height_m = o.observer_height_m;
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("radius_m", self.radius_m)?;
        positive("planet_radius_m", self.planet_radius_m)?;
        if let Some(h) = self.observer_height_m {
            if !(h.is_finite() && h >= 0.0) {
                return Err(Error::Config(format!("observer_height_m must be non-negative, got {h}")));
            }
        }
        if !(self.target_height_m.is_finite() && self.target_height_m >= 0.0) {
            return Err(Error::Config(format!(
                "target_height_m must be non-negative, got {}",
                self.target_height_m
            )));
        }
        let profile = self.extraction_profile();
        profile.validate()?;
        if profile.mission != self.mission {
            return Err(Error::Config(format!(
                "profile is for {} but the run is for {}",
                profile.mission, self.mission
            )));
        }
        if let Some(SchemaChoice::Named(name)) = &self.places_schema {
            CsvSchema::named(name).ok_or_else(|| Error::Config(format!("unknown places schema '{name}'")))?;
        }
        Ok(())
    }

    pub fn extraction_profile(&self) -> ExtractionProfile {
        self.profile.clone().unwrap_or_else(|| ExtractionProfile::builtin(self.mission))
    }

    pub fn csv_schema(&self) -> Result<CsvSchema, Error> {
        match &self.places_schema {
            Some(SchemaChoice::Custom(s)) => Ok(s.clone()),
            Some(SchemaChoice::Named(name)) => {
                CsvSchema::named(name).ok_or_else(|| Error::Config(format!("unknown places schema '{name}'")))
            }
            None => Ok(match self.mission {
                Mission::Curiosity => CsvSchema::msl_localized_interp(),
                Mission::Perseverance => CsvSchema::m2020_best_interp(),
            }),
        }
    }

    /// Flag or file value, else the profile's mast height.
    pub fn effective_observer_height(&self) -> f64 {
        self.observer_height_m
            .unwrap_or_else(|| self.extraction_profile().observer_height_m)
    }

    fn execution(&self) -> Execution {
        if self.parallel {
            Execution::Parallel
        } else {
            Execution::Serial
        }
    }

    pub fn viewshed_params(&self, viewpoint: Viewpoint) -> ViewshedParams {
        ViewshedParams {
            viewpoint,
            mode: self.mode,
            target_height_m: self.target_height_m,
            curvature: self.curvature,
            planet_radius_m: self.planet_radius_m,
            execution: self.execution(),
        }
    }

    fn require<'a>(&self, path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, Error> {
        let p = path
            .as_deref()
            .ok_or_else(|| Error::Config(format!("no {what} configured")))?;
        if !p.exists() {
            return Err(Error::Config(format!("{what} {} does not exist", p.display())));
        }
        Ok(p)
    }

    pub fn load_dem(&self) -> Result<Dem, Error> {
        Ok(load_dem(self.require(&self.dem, "DEM")?)?)
    }

    pub fn load_places(&self) -> Result<LocalizationTable, Error> {
        LocalizationTable::load_path(self.require(&self.places_csv, "PLACES CSV")?, &self.csv_schema()?)
    }
}

/// Reads a label and extracts its metadata with `profile`, plus any parser
/// warnings (e.g. repeated PDS3 keywords).
pub fn read_label(path: &Path, profile: &ExtractionProfile) -> Result<(ImageMetadata, Vec<String>), Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let format = detect_format(name, &bytes[..bytes.len().min(4096)])?;
    if format != profile.format {
        return Err(Error::Config(format!(
            "{} is a {format:?} label but the {} profile reads {:?}",
            path.display(),
            profile.mission,
            profile.format
        )));
    }
    let text = String::from_utf8_lossy(&bytes);
    Ok(match format {
        LabelFormat::Pds3Pvl => {
            let doc = parse_pvl_with(&text, DuplicatePolicy::LastWins).map_err(crate::labels::LabelError::from)?;
            let warnings = doc.warnings.iter().map(ToString::to_string).collect();
            (extract_pds3(&doc.tree, profile)?, warnings)
        }
        LabelFormat::Pds4Xml => (extract_pds4(&text, profile)?, Vec::new()),
    })
}

/// Label → pose → viewpoint, without touching the DEM.
pub fn prepare_viewpoint(path: &Path, config: &PipelineConfig, table: &LocalizationTable) -> Result<(ImageMetadata, Viewpoint), Error> {
    let (meta, mut warnings) = read_label(path, &config.extraction_profile())?;
    let pose = lookup_pose(table, meta.rmc, config.fallback)?;
    warnings.extend(pose.warnings.iter().cloned());
    let mut vp = build_viewpoint(
        pose,
        &meta.pointing,
        config.effective_observer_height(),
        config.radius_m,
        meta.product_id.clone(),
    )?;
    warnings.append(&mut vp.warnings);
    vp.warnings = warnings;
    Ok((meta, vp))
}

/// Files written for one viewshed.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewshedOutputs {
    pub raster_path: PathBuf,
    pub geojson_path: PathBuf,
    pub visible_cells: usize,
    pub visible_area_m2: f64,
}

/// Keeps ids usable as file names.
pub fn file_stem(image_id: &str) -> String {
    let s: String = image_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.') { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with('.') {
        format!("_{s}")
    } else {
        s
    }
}

/// Computes and writes the raster and GeoJSON for one viewpoint.
pub fn run_viewshed(dem: &Dem, viewpoint: &Viewpoint, config: &PipelineConfig) -> Result<ViewshedOutputs, Error> {
    let vs = compute_viewshed(dem, &config.viewshed_params(viewpoint.clone()))?;
    let stem = file_stem(&viewpoint.image_id);
    let raster_path = config
        .out_dir
        .join(format!("{stem}.viewshed.{}", config.format.extension()));
    let geojson_path = config.out_dir.join(format!("{stem}.viewshed.geojson"));
    write_visibility(&vs, &raster_path, config.format)?;
    let geojson = serde_json::to_string_pretty(&polygonize(&vs)).expect("GeoJSON serializes");
    std::fs::write(&geojson_path, geojson + "\n").map_err(|e| Error::io(&geojson_path, e))?;
    Ok(ViewshedOutputs {
        raster_path,
        geojson_path,
        visible_cells: vs.visible_count(),
        visible_area_m2: vs.visible_area_m2(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColocationResult {
    pub image_id: String,
    pub metadata: ImageMetadata,
    pub viewpoint: Viewpoint,
    pub raster_path: PathBuf,
    pub geojson_path: PathBuf,
    pub csv_row: String,
    pub visible_cells: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug)]
pub struct LabelOutcome<T> {
    pub label: PathBuf,
    pub result: Result<T, Error>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchStatus {
    Success,
    Partial,
    Failed,
}

impl BatchStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            BatchStatus::Success => 0,
            BatchStatus::Failed => 1,
            BatchStatus::Partial => 2,
        }
    }
}

#[derive(Debug)]
pub struct BatchReport<T> {
    pub outcomes: Vec<LabelOutcome<T>>,
    /// Written when at least one item succeeded.
    pub csv_path: Option<PathBuf>,
}

impl<T> BatchReport<T> {
    pub fn succeeded(&self) -> impl Iterator<Item = &T> {
        self.outcomes.iter().filter_map(|o| o.result.as_ref().ok())
    }

    pub fn status(&self) -> BatchStatus {
        let ok = self.outcomes.iter().filter(|o| o.result.is_ok()).count();
        if ok == self.outcomes.len() {
            BatchStatus::Success
        } else if ok == 0 {
            BatchStatus::Failed
        } else {
            BatchStatus::Partial
        }
    }
}

fn map_items<I: Sync, T: Send>(items: &[I], parallel: bool, f: impl Fn(&I) -> T + Sync + Send) -> Vec<T> {
    if parallel {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

/// Rejects every repeat of an image id so no two items write the same files.
fn reject_duplicates<T>(results: &mut [Result<T, Error>], id: impl Fn(&T) -> &str) {
    let mut seen = HashSet::new();
    for r in results.iter_mut() {
        if let Ok(v) = r {
            let key = file_stem(id(v));
            if !seen.insert(key.clone()) {
                *r = Err(Error::DuplicateImage(key));
            }
        }
    }
}

fn write_batch_csv(config: &PipelineConfig, viewpoints: &[Viewpoint]) -> Result<Option<PathBuf>, Error> {
    if viewpoints.is_empty() {
        return Ok(None);
    }
    let path = config.out_dir.join(VIEWPOINTS_FILE);
    export_viewpoint_csv(viewpoints, &path)?;
    Ok(Some(path))
}

fn create_out_dir(config: &PipelineConfig) -> Result<(), Error> {
    std::fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))
}

/// Labels → viewpoints → viewpoint CSV, stopping before any viewshed.
pub fn viewpoints(config: &PipelineConfig, labels: &[PathBuf]) -> Result<BatchReport<(ImageMetadata, Viewpoint)>, Error> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("label list"));
    }
    config.validate()?;
    let table = config.load_places()?;
    create_out_dir(config)?;
    let mut results = map_items(labels, config.parallel, |p| prepare_viewpoint(p, config, &table));
    reject_duplicates(&mut results, |(_, vp)| &vp.image_id);
    let vps: Vec<Viewpoint> = results.iter().filter_map(|r| r.as_ref().ok()).map(|(_, vp)| vp.clone()).collect();
    let csv_path = write_batch_csv(config, &vps)?;
    let outcomes = labels
        .iter()
        .cloned()
        .zip(results)
        .map(|(label, result)| LabelOutcome { label, result })
        .collect();
    Ok(BatchReport { outcomes, csv_path })
}

/// Full per-label pipeline. Configuration problems abort; anything that goes
/// wrong with one label is recorded in its outcome and the rest continue.
pub fn colocate(config: &PipelineConfig, labels: &[PathBuf]) -> Result<BatchReport<ColocationResult>, Error> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("label list"));
    }
    config.validate()?;
    let dem = config.load_dem()?;
    let table = config.load_places()?;
    create_out_dir(config)?;

    let mut prepared = map_items(labels, config.parallel, |p| prepare_viewpoint(p, config, &table));
    reject_duplicates(&mut prepared, |(_, vp)| &vp.image_id);
    let slots: Vec<_> = prepared.into_iter().collect();
    let computed: Vec<Option<Result<ColocationResult, Error>>> = map_items(&slots, config.parallel, |slot| {
        let (meta, vp) = slot.as_ref().ok()?;
        Some(run_viewshed(&dem, vp, config).map(|out| ColocationResult {
            image_id: vp.image_id.clone(),
            metadata: meta.clone(),
            viewpoint: vp.clone(),
            raster_path: out.raster_path,
            geojson_path: out.geojson_path,
            csv_row: viewpoint_csv_row(vp),
            visible_cells: out.visible_cells,
            warnings: vp.warnings.clone(),
        }))
    });
    let results: Vec<_> = slots
        .into_iter()
        .zip(computed)
        .map(|(slot, r)| match (slot, r) {
            (Err(e), _) => Err(e),
            (Ok(_), Some(r)) => r,
            (Ok(_), None) => unreachable!("every prepared label is computed"),
        })
        .collect();

    let vps: Vec<Viewpoint> = results
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .map(|r| r.viewpoint.clone())
        .collect();
    let csv_path = write_batch_csv(config, &vps)?;
    let outcomes = labels
        .iter()
        .cloned()
        .zip(results)
        .map(|(label, result)| LabelOutcome { label, result })
        .collect();
    Ok(BatchReport { outcomes, csv_path })
}

/// Viewsheds for every row of an existing viewpoint CSV.
pub fn viewsheds_from_csv(config: &PipelineConfig, csv: &Path) -> Result<BatchReport<ViewshedOutputs>, Error> {
    config.validate()?;
    let vps = read_viewpoint_csv(csv)?;
    if vps.is_empty() {
        return Err(Error::EmptyInput("viewpoint CSV"));
    }
    let dem = config.load_dem()?;
    create_out_dir(config)?;
    let mut checked: Vec<Result<&Viewpoint, Error>> = vps.iter().map(Ok).collect();
    reject_duplicates(&mut checked, |vp| &vp.image_id);
    let results = map_items(&checked, config.parallel, |slot| match slot {
        Ok(vp) => run_viewshed(&dem, vp, config),
        Err(e) => Err(Error::DuplicateImage(e.to_string())),
    });
    let outcomes = vps
        .iter()
        .zip(results)
        .map(|(vp, result)| LabelOutcome {
            label: PathBuf::from(&vp.image_id),
            result,
        })
        .collect();
    Ok(BatchReport {
        outcomes,
        csv_path: Some(csv.to_path_buf()),
    })
}

/// Loads two visibility rasters and compares them; with `out`, also writes
/// the overlap raster and its GeoJSON next to `out` (extension replaced).
pub fn overlap_command(raster_a: &Path, raster_b: &Path, out: Option<(&Path, RasterFormat)>) -> Result<OverlapReport, Error> {
    let a = load_visibility(raster_a)?;
    let b = load_visibility(raster_b)?;
    let report = overlap(&a, &b)?;
    if let Some((path, format)) = out {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        write_visibility(&report.overlap, path.with_extension(format.extension()), format)?;
        let geojson_path = path.with_extension("geojson");
        let text = serde_json::to_string_pretty(&polygonize(&report.overlap)).expect("GeoJSON serializes");
        std::fs::write(&geojson_path, text + "\n").map_err(|e| Error::io(&geojson_path, e))?;
    }
    Ok(report)
}
