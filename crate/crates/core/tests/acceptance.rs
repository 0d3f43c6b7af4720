//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs as a plain binary (`harness = false`) so timings are not
//! skewed by other tests running concurrently.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use mars_coloc::pipeline::{colocate, PipelineConfig};
use mars_coloc::raster::synth;
use mars_coloc::{
    compute_viewshed, extract_pds3, extract_pds4, fov_bounds, overlap, parse_pvl, CameraPointing, Dem, Execution,
    ExtractionProfile, FovSector, RasterFormat, RmcIndex, RoverPose, Viewpoint, ViewshedMode, ViewshedParams, Visibility,
    VisibilityRaster,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(label: &str, elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || {
        format!("{label} took {:.3} s, limit {limit_s} s", elapsed.as_secs_f64())
    })
}

fn sector(left: f64, right: f64) -> FovSector {
    FovSector {
        azimuth_left_deg: left,
        azimuth_right_deg: right,
        elevation_upper_deg: 90.0,
        elevation_lower_deg: -90.0,
        full_circle: false,
    }
}

fn viewpoint(e: f64, n: f64, sector: FovSector, height: f64, radius: f64) -> Viewpoint {
    Viewpoint {
        pose: RoverPose::at(e, n),
        sector,
        observer_height_m: height,
        radius_m: radius,
        image_id: "acceptance".into(),
        warnings: vec![],
    }
}

fn run(dem: &Dem, vp: Viewpoint, mode: ViewshedMode) -> VisibilityRaster {
    let mut p = ViewshedParams::new(vp, mode);
    p.execution = Execution::Serial;
    compute_viewshed(dem, &p).expect("viewshed")
}

/// Visibility of the DEM cell (row, col), hidden when outside the output window.
fn visible_at(vs: &VisibilityRaster, dem: &Dem, row: usize, col: usize) -> bool {
    let (e, n) = dem.transform.cell_center(row, col);
    vs.at_map(e, n) == Some(Visibility::Visible)
}

/// Clockwise-from-north azimuth of a map offset, in [0, 360).
fn azimuth(dx: f64, dy: f64) -> f64 {
    let a = dx.atan2(dy).to_degrees();
    if a < 0.0 {
        a + 360.0
    } else {
        a
    }
}

/// Bilinear elevation between cell centers, clamped at the edges.
fn bilinear(dem: &Dem, col: f64, row: f64) -> f64 {
    let (rows, cols) = (dem.rows(), dem.cols());
    let x = (col - 0.5).clamp(0.0, (cols - 1) as f64);
    let y = (row - 0.5).clamp(0.0, (rows - 1) as f64);
    let x0 = (x.floor() as usize).min(cols - 2);
    let y0 = (y.floor() as usize).min(rows - 2);
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let z = |r: usize, c: usize| dem.get(r, c).unwrap();
    z(y0, x0) * (1.0 - fx) * (1.0 - fy) + z(y0, x0 + 1) * fx * (1.0 - fy) + z(y0 + 1, x0) * (1.0 - fx) * fy + z(y0 + 1, x0 + 1) * fx * fy
}

/// Dense line-of-sight oracle in pixel space: 40 samples per pixel, every
/// sample strictly below the target's tangent.
fn dense_los(dem: &Dem, (oc, or): (f64, f64), eye_height: f64, (tc, tr): (f64, f64)) -> bool {
    let eye = bilinear(dem, oc, or) + eye_height;
    let d = ((tc - oc).powi(2) + (tr - or).powi(2)).sqrt();
    let target = (bilinear(dem, tc, tr) - eye) / d;
    let n = (d * 40.0) as usize;
    (1..n).all(|i| {
        let s = i as f64 / 40.0;
        let f = s / d;
        (bilinear(dem, oc + f * (tc - oc), or + f * (tr - or)) - eye) / s < target
    })
}

// ---------------------------------------------------------------------------

fn fov_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let (mut wraps, mut unclamped) = (0, 0);
    for i in 0..10_000 {
        // Every tenth draw straddles north.
        let az: f64 = if i % 10 == 0 {
            let near: f64 = rng.gen_range(0.0..1.0);
            if rng.gen_bool(0.5) {
                near
            } else {
                (360.0 - near).min(359.999_999)
            }
        } else {
            rng.gen_range(0.0..360.0)
        };
        let el: f64 = rng.gen_range(-90.0..=90.0);
        let hfov: f64 = rng.gen_range(0.01..359.99);
        let vfov: f64 = rng.gen_range(0.01..=180.0);
        let p = CameraPointing::new(az, el, hfov, vfov).map_err(|e| e.to_string())?;
        let s = fov_bounds(&p).map_err(|e| e.to_string())?.sector;
        let width = (s.azimuth_right_deg - s.azimuth_left_deg).rem_euclid(360.0);
        ensure((width - hfov).abs() <= 1e-9, || format!("width {width} vs hFOV {hfov} at az {az}"))?;
        if s.azimuth_left_deg > s.azimuth_right_deg {
            wraps += 1;
        }
        if el + vfov / 2.0 <= 90.0 && el - vfov / 2.0 >= -90.0 {
            unclamped += 1;
            let sum = s.elevation_upper_deg + s.elevation_lower_deg;
            ensure((sum - 2.0 * el).abs() <= 1e-9, || format!("elevation sum {sum} vs 2ε {}", 2.0 * el))?;
        }
    }
    let t = start.elapsed();
    within("10,000 draws", t, 1.0)?;
    ensure(wraps > 100, || format!("only {wraps} wraparound sectors drawn"))?;
    Ok(format!("10000 draws, {wraps} wrap north, {unclamped} unclamped, {:.3} s", t.as_secs_f64()))
}

const PDS3_EXCERPT: &str = r#"ROVER_MOTION_COUNTER_NAME = ("SITE", "DRIVE", "POSE",
                             "ARM", "CHIMRA", "DRILL",
                             "RSM", "HGA",
                             "DRT", "IC")
ROVER_MOTION_COUNTER      = (56, 1632,
                             8, 0,
                             0, 0,
                             142, 90,
                             0, 0 )
"#;

const PDS4_EXCERPT: &str = r#"<geom:coordinate_space_frame_type>
    ROVER_NAV_FRAME
</geom:coordinate_space_frame_type>
<geom:Coordinate_Space_Index>
    <geom:index_id>SITE</geom:index_id>
    <geom:index_value_number>4</geom:index_value_number>
</geom:Coordinate_Space_Index>
<geom:Coordinate_Space_Index>
    <geom:index_id>DRIVE</geom:index_id>
    <geom:index_value_number>48</geom:index_value_number>
</geom:Coordinate_Space_Index>
"#;

fn pds3_label(rmc_block: &str) -> String {
    format!(
        "PDS_VERSION_ID = PDS3\nPRODUCT_ID = \"1429MR0070680170702598E01_DRCL\"\n{rmc_block}\
         GROUP = INSTRUMENT_STATE_PARMS\n  AZIMUTH_FOV = 5.1 <deg>\n  ELEVATION_FOV = 3.8 <deg>\nEND_GROUP = INSTRUMENT_STATE_PARMS\n\
         GROUP = SITE_DERIVED_GEOMETRY_PARMS\n  FIXED_INSTRUMENT_AZIMUTH = 93.5 <deg>\n  FIXED_INSTRUMENT_ELEVATION = -14.2 <deg>\n\
         END_GROUP = SITE_DERIVED_GEOMETRY_PARMS\nEND\n"
    )
}

fn pds4_label(identification: &str) -> String {
    format!(
        r#"<?xml version="1.0" encoding="UTF-8"?>
<Product_Observational xmlns="http://pds.nasa.gov/pds4/pds/v1" xmlns:geom="http://pds.nasa.gov/pds4/geom/v1" xmlns:img="http://pds.nasa.gov/pds4/img/v1">
  <Identification_Area><logical_identifier>urn:nasa:pds:x:data:ZLF_0089_0679018450_265RAD_N0040048ZCAM08050_034085J03</logical_identifier></Identification_Area>
  <Observation_Area><Discipline_Area>
    <geom:Geometry_Lander>
      <geom:Coordinate_Space_Definition><geom:Coordinate_Space_Identification>
{identification}
      </geom:Coordinate_Space_Identification></geom:Coordinate_Space_Definition>
      <geom:Derived_Geometry>
        <geom:instrument_azimuth unit="deg">200.0</geom:instrument_azimuth>
        <geom:instrument_elevation unit="deg">-5.5</geom:instrument_elevation>
      </geom:Derived_Geometry>
    </geom:Geometry_Lander>
    <img:Optical_Properties>
      <img:horizontal_fov unit="deg">19.2</img:horizontal_fov>
      <img:vertical_fov unit="deg">14.4</img:vertical_fov>
    </img:Optical_Properties>
  </Discipline_Area></Observation_Area>
</Product_Observational>
"#
    )
}

fn parser_fixtures() -> Outcome {
    let md3 = extract_pds3(
        &parse_pvl(&pds3_label(PDS3_EXCERPT)).map_err(|e| e.to_string())?,
        &ExtractionProfile::curiosity(),
    )
    .map_err(|e| e.to_string())?;
    ensure(md3.rmc == RmcIndex::new(56, 1632), || format!("PDS3 excerpt gave {}", md3.rmc))?;

    let md4 = extract_pds4(&pds4_label(PDS4_EXCERPT), &ExtractionProfile::perseverance()).map_err(|e| e.to_string())?;
    ensure(md4.rmc == RmcIndex::new(4, 48), || format!("PDS4 excerpt gave {}", md4.rmc))?;

    // The fixture files embed the same excerpts.
    let text = std::fs::read_to_string(fixtures().join("1429MR0070680170702598E01_DRCL.LBL")).map_err(|e| e.to_string())?;
    let md = extract_pds3(&parse_pvl(&text).map_err(|e| e.to_string())?, &ExtractionProfile::curiosity())
        .map_err(|e| e.to_string())?;
    ensure(md.rmc == RmcIndex::new(56, 1632), || format!("PDS3 fixture gave {}", md.rmc))?;

    // Name-permutation alignment: shuffle names and values together.
    let names = ["SITE", "DRIVE", "POSE", "ARM", "CHIMRA", "DRILL", "RSM", "HGA", "DRT", "IC"];
    let values = [56, 1632, 8, 0, 0, 0, 142, 90, 0, 0];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut order: Vec<usize> = (0..names.len()).collect();
    for _ in 0..200 {
        order.shuffle(&mut rng);
        let n: Vec<String> = order.iter().map(|&i| format!("\"{}\"", names[i])).collect();
        let v: Vec<String> = order.iter().map(|&i| values[i].to_string()).collect();
        let block = format!(
            "ROVER_MOTION_COUNTER_NAME = ({})\nROVER_MOTION_COUNTER = ({})\n",
            n.join(", "),
            v.join(", ")
        );
        let md = extract_pds3(&parse_pvl(&pds3_label(&block)).map_err(|e| e.to_string())?, &ExtractionProfile::curiosity())
            .map_err(|e| e.to_string())?;
        ensure(md.rmc == RmcIndex::new(56, 1632), || format!("permutation {order:?} gave {}", md.rmc))?;
    }
    let (site, drive) = PDS4_EXCERPT.split_at(PDS4_EXCERPT.find("<geom:Coordinate_Space_Index>\n    <geom:index_id>DRIVE").unwrap());
    let swapped = format!("{drive}{site}");
    let md = extract_pds4(&pds4_label(&swapped), &ExtractionProfile::perseverance()).map_err(|e| e.to_string())?;
    ensure(md.rmc == RmcIndex::new(4, 48), || format!("reordered PDS4 gave {}", md.rmc))?;
    Ok("PDS3 (56, 1632), PDS4 (4, 48), 200 PDS3 permutations + PDS4 reorder".into())
}

fn exact_analytic() -> Outcome {
    let start = Instant::now();
    let t = synth::square(64, 1.0);
    let flat = synth::flat(t, 0.0);
    let (oe, on) = (32.5, 32.5);
    let r = 20.0;

    let disk = run(&flat, viewpoint(oe, on, FovSector::everything(), 2.0, r), ViewshedMode::Exact);
    let quarter = run(&flat, viewpoint(oe, on, sector(0.0, 90.0), 2.0, r), ViewshedMode::Exact);
    let mut disk_cells = 0;
    for row in 0..64 {
        for col in 0..64 {
            let (e, n) = t.cell_center(row, col);
            let (dx, dy) = (e - oe, n - on);
            let in_disk = dx * dx + dy * dy <= r * r;
            disk_cells += in_disk as usize;
            ensure(visible_at(&disk, &flat, row, col) == in_disk, || format!("disk cell ({row}, {col})"))?;
            let zero = dx == 0.0 && dy == 0.0;
            let in_quarter = in_disk && !zero && (0.0..=90.0).contains(&azimuth(dx, dy));
            ensure(visible_at(&quarter, &flat, row, col) == in_quarter, || format!("quarter cell ({row}, {col})"))?;
        }
    }

    let wall = synth::wall(t, 40, 10.0);
    let (oe, on, r) = (30.5, 32.5, 30.0);
    let vs = run(&wall, viewpoint(oe, on, FovSector::everything(), 2.0, r), ViewshedMode::Exact);
    let (mut shadow, mut checked) = (0, 0);
    for row in 0..64 {
        for col in 0..64 {
            let (e, n) = t.cell_center(row, col);
            let (dx, dy) = (e - oe, n - on);
            let expected = if dx * dx + dy * dy > r * r {
                false
            } else if dx == 0.0 && dy == 0.0 {
                true
            } else {
                checked += 1;
                // Pixel space: column = easting, row = 64 − northing.
                dense_los(&wall, (oe, 64.0 - on), 2.0, (e, 64.0 - n))
            };
            if !expected && dx * dx + dy * dy <= r * r {
                shadow += 1;
            }
            ensure(visible_at(&vs, &wall, row, col) == expected, || format!("wall cell ({row}, {col})"))?;
        }
    }
    ensure(shadow > 50, || format!("wall casts only {shadow} shadow cells"))?;
    let t = start.elapsed();
    within("analytic suite", t, 5.0)?;
    Ok(format!(
        "disk {disk_cells} cells, quarter exact, wall {checked} cells vs dense oracle ({shadow} hidden), {:.3} s",
        t.as_secs_f64()
    ))
}

/// Fraction of in-radius cells on which two same-window rasters agree.
fn agreement(a: &VisibilityRaster, b: &VisibilityRaster, oe: f64, on: f64, r: f64) -> f64 {
    assert_eq!(a.transform, b.transform);
    let t = a.transform;
    let (mut same, mut total) = (0usize, 0usize);
    for row in 0..t.rows {
        for col in 0..t.cols {
            let (e, n) = t.cell_center(row, col);
            if (e - oe).powi(2) + (n - on).powi(2) <= r * r {
                total += 1;
                same += (a.get(row, col) == b.get(row, col)) as usize;
            }
        }
    }
    same as f64 / total as f64
}

fn sweep_vs_exact() -> Outcome {
    let start = Instant::now();
    let t = synth::square(128, 1.0);
    let mut worst = 1.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for seed in 0..20u64 {
        let dem = synth::gaussian_hills(t, 30, 1000 + seed);
        let oe = rng.gen_range(32..96) as f64 + 0.5;
        let on = rng.gen_range(32..96) as f64 + 0.5;
        let vp = viewpoint(oe, on, FovSector::everything(), 2.0, 60.0);
        let exact = run(&dem, vp.clone(), ViewshedMode::Exact);
        let sweep = run(&dem, vp, ViewshedMode::Sweep);
        let a = agreement(&exact, &sweep, oe, on, 60.0);
        worst = worst.min(a);
        ensure(a >= 0.995, || format!("seed {seed}: agreement {:.4}%", a * 100.0))?;
    }
    let flat = synth::flat(t, 0.0);
    let wall = synth::wall(t, 80, 10.0);
    for (name, dem, oe, on) in [("flat", &flat, 64.5, 64.5), ("wall", &wall, 60.5, 64.5), ("wall off-axis", &wall, 50.3, 71.8)] {
        for s in [FovSector::everything(), sector(30.0, 150.0)] {
            let vp = viewpoint(oe, on, s, 2.0, 60.0);
            let exact = run(dem, vp.clone(), ViewshedMode::Exact);
            let sweep = run(dem, vp, ViewshedMode::Sweep);
            ensure(exact == sweep || agreement(&exact, &sweep, oe, on, 1e9) == 1.0, || {
                format!("{name}: agreement {:.4}%", agreement(&exact, &sweep, oe, on, 60.0) * 100.0)
            })?;
        }
    }
    let t = start.elapsed();
    within("sweep vs exact", t, 60.0)?;
    Ok(format!(
        "20 random DEMs, worst agreement {:.3}%, flat/wall 100%, {:.3} s",
        worst * 100.0,
        t.as_secs_f64()
    ))
}

fn subset(small: &VisibilityRaster, big: &VisibilityRaster, dem: &Dem) -> Result<usize, String> {
    let mut n = 0;
    for row in 0..dem.rows() {
        for col in 0..dem.cols() {
            if visible_at(small, dem, row, col) {
                n += 1;
                if !visible_at(big, dem, row, col) {
                    return Err(format!("cell ({row}, {col}) lost"));
                }
            }
        }
    }
    Ok(n)
}

fn monotonicity() -> Outcome {
    let start = Instant::now();
    let t = synth::square(96, 1.0);
    let mut checks = 0;
    for seed in 0..5u64 {
        let dem = synth::gaussian_hills(t, 20, 500 + seed);
        let (oe, on) = (40.5 + seed as f64 * 3.0, 50.5);
        let exact = |s: FovSector, h: f64, r: f64| run(&dem, viewpoint(oe, on, s, h, r), ViewshedMode::Exact);
        let everything = FovSector::everything();

        subset(&exact(everything, 2.0, 20.0), &exact(everything, 2.0, 40.0), &dem).map_err(|e| format!("radius, seed {seed}: {e}"))?;
        subset(&exact(sector(30.0, 120.0), 2.0, 40.0), &exact(sector(10.0, 200.0), 2.0, 40.0), &dem)
            .map_err(|e| format!("sector, seed {seed}: {e}"))?;
        subset(&exact(sector(350.0, 20.0), 2.0, 40.0), &exact(everything, 2.0, 40.0), &dem)
            .map_err(|e| format!("wrapping sector, seed {seed}: {e}"))?;
        subset(&exact(everything, 1.5, 40.0), &exact(everything, 3.0, 40.0), &dem)
            .map_err(|e| format!("height, seed {seed}: {e}"))?;
        checks += 4;
    }
    let t = start.elapsed();
    within("monotonicity", t, 30.0)?;
    Ok(format!("{checks} subset checks on 5 DEMs, {:.3} s", t.as_secs_f64()))
}

fn encode(vs: &VisibilityRaster) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.asc");
    mars_coloc::write_visibility(vs, &path, RasterFormat::Ascii).unwrap();
    std::fs::read(path).unwrap()
}

fn offset_invariance() -> Outcome {
    let mut cells = 0;
    for seed in 0..3u64 {
        let dem = synth::gaussian_hills(synth::square(64, 1.0), 15, 77 + seed);
        let raised = dem.offset(100.0);
        let vp = viewpoint(30.5, 33.5, sector(20.0, 300.0), 2.0, 28.0);
        let a = run(&dem, vp.clone(), ViewshedMode::Exact);
        let b = run(&raised, vp, ViewshedMode::Exact);
        ensure(a.transform == b.transform && a.cells() == b.cells(), || format!("seed {seed}: cells differ"))?;
        ensure(encode(&a) == encode(&b), || format!("seed {seed}: encoded rasters differ"))?;
        cells += a.visible_count();
    }
    Ok(format!("3 DEMs bit-identical after +100 m ({cells} visible cells)"))
}

fn overlap_validation() -> Outcome {
    let t = synth::square(64, 1.0);
    let flat = synth::flat(t, 0.0);
    let (oe, on, r) = (32.5, 32.5, 20.0);
    let vs = |s: FovSector| run(&flat, viewpoint(oe, on, s, 2.0, r), ViewshedMode::Exact);
    let a = vs(sector(0.0, 90.0));
    let b = vs(sector(60.0, 150.0));
    let rep = overlap(&a, &b).map_err(|e| e.to_string())?;
    let mut wedge = 0;
    for row in 0..64 {
        for col in 0..64 {
            let (e, n) = t.cell_center(row, col);
            let (dx, dy) = (e - oe, n - on);
            let expected = dx * dx + dy * dy <= r * r && (dx, dy) != (0.0, 0.0) && (60.0..=90.0).contains(&azimuth(dx, dy));
            wedge += expected as usize;
            ensure((rep.overlap.at_map(e, n) == Some(Visibility::Visible)) == expected, || {
                format!("wedge cell ({row}, {col})")
            })?;
        }
    }
    ensure(rep.area_overlap_m2 == wedge as f64, || format!("overlap area {}", rep.area_overlap_m2))?;
    let union = a.visible_count() + b.visible_count() - wedge;
    ensure((rep.jaccard - wedge as f64 / union as f64).abs() < 1e-12, || format!("jaccard {}", rep.jaccard))?;

    let same = overlap(&a, &a).map_err(|e| e.to_string())?;
    ensure(same.jaccard == 1.0 && same.overlap.cells() == a.cells(), || "overlap(x, x) != x".into())?;

    let disjoint = overlap(&a, &vs(sector(180.0, 270.0))).map_err(|e| e.to_string())?;
    ensure(disjoint.area_overlap_m2 == 0.0 && disjoint.jaccard == 0.0, || {
        format!("disjoint overlap {} m², jaccard {}", disjoint.area_overlap_m2, disjoint.jaccard)
    })?;
    Ok(format!("30° wedge {wedge} cells, jaccard {:.4}; self 1; disjoint 0", rep.jaccard))
}

fn performance() -> Outcome {
    let big = synth::gaussian_hills(synth::square(2048, 1.0), 60, 8);
    let vp = viewpoint(1024.5, 1024.5, sector(30.0, 150.0), 2.0, 800.0);
    let start = Instant::now();
    let sweep = run(&big, vp, ViewshedMode::Sweep);
    let t_sweep = start.elapsed();
    drop(big);

    let small = synth::gaussian_hills(synth::square(256, 1.0), 25, 9);
    let vp = viewpoint(128.5, 128.5, FovSector::everything(), 2.0, 100.0);
    let start = Instant::now();
    let exact = run(&small, vp, ViewshedMode::Exact);
    let t_exact = start.elapsed();

    within("sweep 2048², 120°, R 800 (single worker)", t_sweep, 5.0)?;
    within("exact 256², full circle, R 100", t_exact, 10.0)?;
    Ok(format!(
        "sweep {:.3} s ({} visible), exact {:.3} s ({} visible), single worker",
        t_sweep.as_secs_f64(),
        sweep.visible_count(),
        t_exact.as_secs_f64(),
        exact.visible_count()
    ))
}

fn fixture_config(out_dir: &Path) -> PipelineConfig {
    let mut c = PipelineConfig::from_json_file(fixtures().join("config.json")).expect("fixture config");
    c.out_dir = out_dir.to_path_buf();
    c
}

fn batch_labels() -> Vec<PathBuf> {
    ["1429MR0070680170702598E01_DRCL.LBL", "1429MR0070680180702599E01_DRCL.LBL"]
        .iter()
        .map(|f| fixtures().join(f))
        .collect()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for name in ["run1", "run2"] {
        let dir = tmp.path().join(name);
        let report = colocate(&fixture_config(&dir), &batch_labels()).map_err(|e| e.to_string())?;
        for o in &report.outcomes {
            if let Err(e) = &o.result {
                return Err(format!("{}: {e}", o.label.display()));
            }
        }
        runs.push(files(&dir));
    }
    let names: Vec<&str> = runs[0].iter().map(|(n, _)| n.as_str()).collect();
    ensure(names.iter().filter(|n| n.ends_with(".asc")).count() == 2, || format!("outputs {names:?}"))?;
    ensure(names.contains(&"viewpoints.csv"), || format!("outputs {names:?}"))?;
    ensure(runs[0] == runs[1], || "outputs differ between runs".into())?;
    Ok(format!("{} files byte-identical across two runs", names.len()))
}

/// Shoelace area of every ring of every polygon, exteriors positive.
fn geojson_area(fc: &serde_json::Value) -> f64 {
    let mut total = 0.0;
    for f in fc["features"].as_array().unwrap() {
        assert_eq!(f["geometry"]["type"], "Polygon");
        for ring in f["geometry"]["coordinates"].as_array().unwrap() {
            let pts: Vec<(f64, f64)> = ring
                .as_array()
                .unwrap()
                .iter()
                .map(|p| (p[0].as_f64().unwrap(), p[1].as_f64().unwrap()))
                .collect();
            total += pts.windows(2).map(|w| w[0].0 * w[1].1 - w[1].0 * w[0].1).sum::<f64>() / 2.0;
        }
    }
    total
}

fn end_to_end() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = fixture_config(tmp.path());
    let label = batch_labels().remove(0);
    let report = colocate(&config, &[label]).map_err(|e| e.to_string())?;
    let result = report.outcomes[0].result.as_ref().map_err(|e| e.to_string())?;

    let raster = mars_coloc::raster::load_visibility(&result.raster_path).map_err(|e| e.to_string())?;
    ensure(raster.visible_count() == result.visible_cells && result.visible_cells > 0, || {
        format!("raster has {} visible, reported {}", raster.visible_count(), result.visible_cells)
    })?;

    let csv_path = report.csv_path.clone().ok_or("no viewpoint CSV written")?;
    let csv = std::fs::read_to_string(&csv_path).map_err(|e| e.to_string())?;
    let lines: Vec<&str> = csv.lines().collect();
    ensure(lines.len() == 2 && lines[1] == result.csv_row, || format!("CSV contents {csv:?}"))?;
    ensure(result.csv_row.starts_with("1429MR0070680170702598E01_DRCL,64.500000,64.500000,"), || result.csv_row.clone())?;

    let text = std::fs::read_to_string(&result.geojson_path).map_err(|e| e.to_string())?;
    let fc: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let px = raster.transform.pixel_size;
    let expected = result.visible_cells as f64 * px * px;
    let area = geojson_area(&fc);
    let rel = (area - expected).abs() / expected;
    ensure(rel <= 1e-6, || format!("GeoJSON area {area} vs {expected}"))?;
    Ok(format!(
        "raster + GeoJSON + CSV row; {} cells, polygon area {area} m² (rel err {rel:.1e})",
        result.visible_cells
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("FOV bounds suite", fov_suite),
        ("label parser fixtures", parser_fixtures),
        ("exact viewshed analytic suite", exact_analytic),
        ("sweep vs exact agreement", sweep_vs_exact),
        ("monotonicity properties", monotonicity),
        ("terrain-offset invariance", offset_invariance),
        ("overlap validation", overlap_validation),
        ("performance targets", performance),
        ("colocate determinism", determinism),
        ("end-to-end colocate", end_to_end),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2}: PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2}: FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
