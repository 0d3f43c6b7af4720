//! Sector- and elevation-constrained viewsheds over a DEM.
//!
//! Two engines share one set of per-target rules:
//!
//! * [`ViewshedMode::Exact`] walks an independent sight line to every cell
//!   center (R3-style). It defines the semantics.
//! * [`ViewshedMode::Sweep`] casts radial rays densely enough that adjacent
//!   rays are at most half a pixel apart at the radius, keeps a running maximum
//!   of terrain tangents along each ray, and judges each cell center against
//!   the ray passing closest to it. The last couple of pixels before the
//!   center are sampled on the true sight line.
//!
//! Elevations are taken relative to the observer's own cell value, so adding a
//! constant to the whole DEM leaves the output unchanged.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pointing::{FovSector, PointingError, Viewpoint};
use crate::raster::{Dem, GeoTransform, RasterError, Visibility, VisibilityRaster};

/// Mars mean radius in meters.
pub const MARS_MEAN_RADIUS_M: f64 = 3_389_500.0;

/// Slack on inclusive azimuth bounds, in degrees.
const SECTOR_EPS_DEG: f64 = 1e-9;

/// Sweep mode re-samples this many pixels before each cell center along the
/// true sight line, where a ray's lateral offset matters most.
const SWEEP_TAIL_PX: f64 = 2.0;

#[derive(Debug, Error)]
pub enum ViewshedError {
    #[error("observer ({easting}, {northing}) lies outside the DEM")]
    ObserverOutOfBounds { easting: f64, northing: f64 },
    #[error("target ({easting}, {northing}) lies outside the DEM")]
    TargetOutOfBounds { easting: f64, northing: f64 },
    #[error("observer cell at ({easting}, {northing}) is nodata")]
    NodataObserver { easting: f64, northing: f64 },
    #[error("field-of-view sector is empty")]
    EmptySector,
    #[error("target height must be non-negative and finite, got {0}")]
    InvalidTargetHeight(f64),
    #[error("planet radius must be positive, got {0}")]
    InvalidPlanetRadius(f64),
    #[error("rasters do not overlap")]
    NoCommonExtent,
    #[error(transparent)]
    Pointing(#[from] PointingError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewshedMode {
    Exact,
    #[default]
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Curvature {
    #[default]
    Off,
    /// Drop distant terrain by d²/2R using `planet_radius_m`.
    Mars,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewshedParams {
    pub viewpoint: Viewpoint,
    pub mode: ViewshedMode,
    /// Height added to the terrain at each target.
    pub target_height_m: f64,
    pub curvature: Curvature,
    pub planet_radius_m: f64,
    pub execution: Execution,
}

impl ViewshedParams {
    pub fn new(viewpoint: Viewpoint, mode: ViewshedMode) -> Self {
        Self {
            viewpoint,
            mode,
            target_height_m: 0.0,
            curvature: Curvature::Off,
            planet_radius_m: MARS_MEAN_RADIUS_M,
            execution: Execution::Parallel,
        }
    }

    fn drop_coefficient(&self) -> Result<f64, ViewshedError> {
        match self.curvature {
            Curvature::Off => Ok(0.0),
            Curvature::Mars if self.planet_radius_m.is_finite() && self.planet_radius_m > 0.0 => {
                Ok(0.5 / self.planet_radius_m)
            }
            Curvature::Mars => Err(ViewshedError::InvalidPlanetRadius(self.planet_radius_m)),
        }
    }
}

/// True iff `azimuth_deg` is on the clockwise arc from the left to the right
/// bound, both inclusive. Always true for a full circle.
pub fn in_sector(sector: &FovSector, azimuth_deg: f64) -> bool {
    if sector.full_circle {
        return true;
    }
    let width = (sector.azimuth_right_deg - sector.azimuth_left_deg).rem_euclid(360.0);
    let offset = (azimuth_deg - sector.azimuth_left_deg).rem_euclid(360.0);
    offset <= width + SECTOR_EPS_DEG || offset >= 360.0 - SECTOR_EPS_DEG
}

/// Everything about the observer that every sight line shares.
struct Observer<'a> {
    dem: &'a Dem,
    col: f64,
    row: f64,
    reference: f64,
    eye: f64,
    pixel: f64,
    radius_px2: f64,
    sector: FovSector,
    target_height: f64,
    drop_k: f64,
}

/// What a target looks like from the eye, before occlusion.
struct Target {
    dist_px: f64,
    tangent: f64,
    in_view: bool,
}

impl<'a> Observer<'a> {
    fn new(dem: &'a Dem, params: &ViewshedParams) -> Result<Self, ViewshedError> {
        let vp = &params.viewpoint;
        vp.validate()?;
        let s = &vp.sector;
        let empty_arc = !s.full_circle && s.width_deg() == 0.0;
        if empty_arc || s.elevation_upper_deg.partial_cmp(&s.elevation_lower_deg).is_none_or(|o| o.is_lt()) {
            return Err(ViewshedError::EmptySector);
        }
        if !(params.target_height_m.is_finite() && params.target_height_m >= 0.0) {
            return Err(ViewshedError::InvalidTargetHeight(params.target_height_m));
        }
        let drop_k = params.drop_coefficient()?;

        let (easting, northing) = (vp.pose.easting, vp.pose.northing);
        let t = &dem.transform;
        let p = t.map_to_pixel(easting, northing);
        let (r, c) = t
            .cell_of(easting, northing)
            .filter(|_| p.in_bounds)
            .ok_or(ViewshedError::ObserverOutOfBounds { easting, northing })?;
        let reference = dem.get(r, c).ok_or(ViewshedError::NodataObserver { easting, northing })?;
        let ground = dem
            .sample_pixel(p.col, p.row, reference)
            .ok_or(ViewshedError::NodataObserver { easting, northing })?;
        let radius_px = vp.radius_m / t.pixel_size;
        Ok(Self {
            dem,
            col: p.col,
            row: p.row,
            reference,
            eye: ground + vp.observer_height_m,
            pixel: t.pixel_size,
            radius_px2: radius_px * radius_px,
            sector: vp.sector,
            target_height: params.target_height_m,
            drop_k,
        })
    }

    fn cell_is_nodata(&self, row: usize, col: usize) -> bool {
        self.dem.get(row, col).is_none()
    }

    /// Cell containing a pixel position, if inside the grid.
    #[inline]
    fn cell_at(&self, col: f64, row: f64) -> Option<(usize, usize)> {
        let t = &self.dem.transform;
        if col < 0.0 || row < 0.0 {
            return None;
        }
        let (c, r) = (col as usize, row as usize);
        (c < t.cols && r < t.rows).then_some((r, c))
    }

    /// Terrain tangent (rise over run, meters) at a pixel position `dist_px`
    /// from the observer; +∞ over nodata so it blocks.
    #[inline]
    fn terrain_tangent(&self, col: f64, row: f64, dist_px: f64) -> f64 {
        let blocked = match self.cell_at(col, row) {
            Some((r, c)) => self.cell_is_nodata(r, c),
            None => true,
        };
        if blocked {
            return f64::INFINITY;
        }
        let z = match self.dem.sample_pixel(col, row, self.reference) {
            Some(z) => z,
            None => return f64::INFINITY,
        };
        let d = dist_px * self.pixel;
        (z - self.drop_k * d * d - self.eye) / d
    }

    /// Radius, sector and elevation-band checks for a target point.
    fn target(&self, col: f64, row: f64) -> Option<Target> {
        let dc = col - self.col;
        let dr = row - self.row;
        let d2 = dc * dc + dr * dr;
        if d2 > self.radius_px2 {
            return Some(Target {
                dist_px: d2.sqrt(),
                tangent: 0.0,
                in_view: false,
            });
        }
        let z = self.dem.sample_pixel(col, row, self.reference)?;
        if d2 == 0.0 {
            // Angle defined as 0°. Azimuth is undefined here, so only a full
            // circle can claim to contain it.
            let angle = 0.0;
            let in_view = self.sector.full_circle
                && self.sector.elevation_lower_deg <= angle
                && angle <= self.sector.elevation_upper_deg;
            return Some(Target {
                dist_px: 0.0,
                tangent: 0.0,
                in_view,
            });
        }
        let dist_px = d2.sqrt();
        let d = dist_px * self.pixel;
        let rise = z + self.target_height - self.drop_k * d * d - self.eye;
        let azimuth = dc.atan2(-dr).to_degrees().rem_euclid(360.0);
        let angle = rise.atan2(d).to_degrees();
        let in_view = in_sector(&self.sector, azimuth)
            && self.sector.elevation_lower_deg <= angle
            && angle <= self.sector.elevation_upper_deg;
        Some(Target {
            dist_px,
            tangent: rise / d,
            in_view,
        })
    }

    /// Independent sight line to a pixel position with samples every half pixel.
    fn sight_line(&self, col: f64, row: f64) -> bool {
        match self.target(col, row) {
            Some(target) if target.in_view => self.clear_from(col, row, &target, 1),
            _ => false,
        }
    }

    /// True when every sight-line sample from index `k` up to the target is
    /// strictly below the target tangent.
    fn clear_from(&self, col: f64, row: f64, target: &Target, mut k: usize) -> bool {
        let (dc, dr) = ((col - self.col) / target.dist_px, (row - self.row) / target.dist_px);
        loop {
            let s = 0.5 * k as f64;
            if s >= target.dist_px {
                return true;
            }
            let tangent = self.terrain_tangent(self.col + s * dc, self.row + s * dr, s);
            // NaN blocks too.
            if tangent.partial_cmp(&target.tangent) != Some(std::cmp::Ordering::Less) {
                return false;
            }
            k += 1;
        }
    }
}

/// Line of sight from the viewpoint eye to a target point (curvature off).
///
/// Visible iff the target is within the radius, its azimuth lies in the
/// sector, its vertical angle lies in the elevation band, and every terrain
/// sample strictly between eye and target subtends a lower angle. Samples over
/// nodata cells block.
pub fn line_of_sight(
    dem: &Dem,
    viewpoint: &Viewpoint,
    target_easting: f64,
    target_northing: f64,
    target_height_m: f64,
) -> Result<bool, ViewshedError> {
    let mut params = ViewshedParams::new(viewpoint.clone(), ViewshedMode::Exact);
    params.target_height_m = target_height_m;
    line_of_sight_with(dem, &params, target_easting, target_northing)
}

/// [`line_of_sight`] honoring the curvature and target height in `params`.
pub fn line_of_sight_with(dem: &Dem, params: &ViewshedParams, target_easting: f64, target_northing: f64) -> Result<bool, ViewshedError> {
    let observer = Observer::new(dem, params)?;
    let p = dem.transform.map_to_pixel(target_easting, target_northing);
    if !p.in_bounds {
        return Err(ViewshedError::TargetOutOfBounds {
            easting: target_easting,
            northing: target_northing,
        });
    }
    Ok(observer.sight_line(p.col, p.row))
}

/// Cells of the DEM whose centers could fall within the radius.
fn window(observer: &Observer) -> (usize, usize, usize, usize) {
    let t = &observer.dem.transform;
    let r = observer.radius_px2.sqrt();
    let lo = |x: f64| (x - r).floor().max(0.0) as usize;
    let hi = |x: f64, n: usize| ((x + r).ceil().max(0.0) as usize).min(n);
    let (r0, c0) = (lo(observer.row).min(t.rows - 1), lo(observer.col).min(t.cols - 1));
    let (r1, c1) = (hi(observer.row, t.rows).max(r0 + 1), hi(observer.col, t.cols).max(c0 + 1));
    (r0, c0, r1 - r0, c1 - c0)
}

fn provenance(params: &ViewshedParams) -> String {
    let vp = &params.viewpoint;
    let s = &vp.sector;
    let arc = if s.full_circle {
        "full circle".to_string()
    } else {
        format!("az {}..{}", s.azimuth_left_deg, s.azimuth_right_deg)
    };
    format!(
        "{} from E {} N {}, eye {} m, radius {} m, {arc}, el {}..{}, {:?} mode",
        vp.image_id,
        vp.pose.easting,
        vp.pose.northing,
        vp.observer_height_m,
        vp.radius_m,
        s.elevation_lower_deg,
        s.elevation_upper_deg,
        params.mode
    )
}

/// Visibility of every cell within the viewpoint's radius.
///
/// The result covers the radius bounding box clipped to the DEM and is
/// aligned with it. Cells whose own value is nodata are `Nodata`; everything
/// else outside the sector, band or radius is `Hidden`. Serial and parallel
/// execution give identical rasters.
pub fn compute_viewshed(dem: &Dem, params: &ViewshedParams) -> Result<VisibilityRaster, ViewshedError> {
    let observer = Observer::new(dem, params)?;
    let (r0, c0, rows, cols) = window(&observer);
    let transform: GeoTransform = dem.transform.window(r0, c0, rows, cols);
    let parallel = params.execution == Execution::Parallel;

    let mut cells = match params.mode {
        ViewshedMode::Exact => exact(&observer, r0, c0, rows, cols, parallel),
        ViewshedMode::Sweep => sweep(&observer, r0, c0, rows, cols, parallel),
    };
    for r in 0..rows {
        for c in 0..cols {
            if observer.cell_is_nodata(r0 + r, c0 + c) {
                cells[r * cols + c] = Visibility::Nodata;
            }
        }
    }
    Ok(VisibilityRaster::new(transform, cells, provenance(params))?)
}

fn exact(observer: &Observer, r0: usize, c0: usize, rows: usize, cols: usize, parallel: bool) -> Vec<Visibility> {
    let row_job = |(r, out): (usize, &mut [Visibility])| {
        for (c, cell) in out.iter_mut().enumerate() {
            let (gr, gc) = (r0 + r, c0 + c);
            if observer.sight_line(gc as f64 + 0.5, gr as f64 + 0.5) {
                *cell = Visibility::Visible;
            }
        }
    };
    let mut cells = vec![Visibility::Hidden; rows * cols];
    if parallel {
        cells.par_chunks_mut(cols).enumerate().for_each(row_job);
    } else {
        cells.chunks_mut(cols).enumerate().for_each(row_job);
    }
    cells
}

/// One cell judgement from one ray.
struct Hit {
    cell: u32,
    lateral: f64,
    visible: bool,
}

fn ray_azimuths(sector: &FovSector, radius_px: f64) -> Vec<f64> {
    let step = (0.5 / radius_px.max(0.5)).atan();
    if sector.full_circle {
        // A multiple of 8 puts rays exactly on the cardinal and diagonal directions.
        let n = (std::f64::consts::TAU / step / 8.0).ceil() as usize * 8;
        (0..n).map(|i| std::f64::consts::TAU * i as f64 / n as f64).collect()
    } else {
        let left = sector.azimuth_left_deg.to_radians();
        let width = sector.width_deg().to_radians();
        let n = (width / step).ceil() as usize + 1;
        (0..n).map(|i| left + width * i as f64 / (n - 1) as f64).collect()
    }
}

fn sweep(observer: &Observer, r0: usize, c0: usize, rows: usize, cols: usize, parallel: bool) -> Vec<Visibility> {
    let radius_px = observer.radius_px2.sqrt();
    let azimuths = ray_azimuths(&observer.sector, radius_px);
    let max_k = ((radius_px + 1.0) * 2.0).ceil() as usize;

    let cast = |azimuth: &f64| -> Vec<Hit> {
        let (dc, dr) = (azimuth.sin(), -azimuth.cos());
        // prefix[k] = max terrain tangent over samples 1..=k.
        let mut prefix = Vec::with_capacity(max_k + 1);
        prefix.push(f64::NEG_INFINITY);
        let mut cells_on_ray: Vec<(usize, usize)> = Vec::with_capacity(max_k);
        let mut last = None;
        for k in 1..=max_k {
            let s = 0.5 * k as f64;
            let (col, row) = (observer.col + s * dc, observer.row + s * dr);
            let Some(cell) = observer.cell_at(col, row) else { break };
            let t = observer.terrain_tangent(col, row, s);
            let m = prefix[k - 1];
            prefix.push(if t > m { t } else { m });
            if last != Some(cell) {
                cells_on_ray.push(cell);
                last = Some(cell);
            }
        }
        let mut hits = Vec::with_capacity(cells_on_ray.len());
        for (gr, gc) in cells_on_ray {
            if gr < r0 || gc < c0 || gr >= r0 + rows || gc >= c0 + cols || observer.cell_is_nodata(gr, gc) {
                continue;
            }
            let (cc, cr) = (gc as f64 + 0.5, gr as f64 + 0.5);
            let (vc, vr) = (cc - observer.col, cr - observer.row);
            let lateral = (vc * dr - vr * dc).abs();
            let visible = match observer.target(cc, cr) {
                Some(target) if target.in_view => {
                    // Ray samples strictly nearer than the center, minus the tail.
                    let nearer = ((2.0 * target.dist_px).ceil() as usize).saturating_sub(1);
                    let cut = ((2.0 * (target.dist_px - SWEEP_TAIL_PX)).floor().max(0.0) as usize)
                        .min(nearer)
                        .min(prefix.len() - 1);
                    prefix[cut] < target.tangent && observer.clear_from(cc, cr, &target, cut + 1)
                }
                _ => false,
            };
            hits.push(Hit {
                cell: ((gr - r0) * cols + (gc - c0)) as u32,
                lateral,
                visible,
            });
        }
        hits
    };

    let per_ray: Vec<Vec<Hit>> = if parallel {
        azimuths.par_iter().map(cast).collect()
    } else {
        azimuths.iter().map(cast).collect()
    };

    // Closest ray wins; ties go to the lower ray index.
    let mut best = vec![f64::INFINITY; rows * cols];
    let mut cells = vec![Visibility::Hidden; rows * cols];
    for hits in &per_ray {
        for h in hits {
            let i = h.cell as usize;
            if h.lateral < best[i] {
                best[i] = h.lateral;
                cells[i] = if h.visible { Visibility::Visible } else { Visibility::Hidden };
            }
        }
    }

    // The observer's own cell is judged by the zero-distance rule, whatever rays hit it.
    if let Some((gr, gc)) = observer.cell_at(observer.col, observer.row) {
        if gr >= r0 && gc >= c0 && gr < r0 + rows && gc < c0 + cols && !observer.cell_is_nodata(gr, gc) {
            let visible = observer.sight_line(gc as f64 + 0.5, gr as f64 + 0.5);
            cells[(gr - r0) * cols + (gc - c0)] = if visible { Visibility::Visible } else { Visibility::Hidden };
        }
    }
    cells
}

/// Cells visible in both of two aligned viewsheds.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapReport {
    /// Covers the intersection of both extents.
    pub overlap: VisibilityRaster,
    pub area_a_m2: f64,
    pub area_b_m2: f64,
    pub area_overlap_m2: f64,
    /// Overlap over union; 1 when neither raster has a visible cell.
    pub jaccard: f64,
}

pub fn overlap(a: &VisibilityRaster, b: &VisibilityRaster) -> Result<OverlapReport, ViewshedError> {
    let (dr, dc) = a.transform.aligned_offset(&b.transform)?;
    let ta = &a.transform;
    let tb = &b.transform;
    // Intersection in a's grid coordinates.
    let r0 = dr.max(0);
    let c0 = dc.max(0);
    let r1 = (ta.rows as i64).min(dr + tb.rows as i64);
    let c1 = (ta.cols as i64).min(dc + tb.cols as i64);
    if r1 <= r0 || c1 <= c0 {
        return Err(ViewshedError::NoCommonExtent);
    }
    let (rows, cols) = ((r1 - r0) as usize, (c1 - c0) as usize);
    let transform = ta.window(r0 as usize, c0 as usize, rows, cols);
    let mut cells = Vec::with_capacity(rows * cols);
    for r in 0..rows as i64 {
        for c in 0..cols as i64 {
            let va = a.get((r0 + r) as usize, (c0 + c) as usize);
            let vb = b.get((r0 + r - dr) as usize, (c0 + c - dc) as usize);
            cells.push(match (va, vb) {
                (Visibility::Nodata, _) | (_, Visibility::Nodata) => Visibility::Nodata,
                (Visibility::Visible, Visibility::Visible) => Visibility::Visible,
                _ => Visibility::Hidden,
            });
        }
    }
    let overlap = VisibilityRaster::new(transform, cells, format!("overlap of [{}] and [{}]", a.provenance, b.provenance))?;
    let n_a = a.visible_count();
    let n_b = b.visible_count();
    let n_ab = overlap.visible_count();
    let union = n_a + n_b - n_ab;
    let px2 = ta.pixel_size * ta.pixel_size;
    Ok(OverlapReport {
        area_a_m2: n_a as f64 * px2,
        area_b_m2: n_b as f64 * px2,
        area_overlap_m2: n_ab as f64 * px2,
        jaccard: if union == 0 { 1.0 } else { n_ab as f64 / union as f64 },
        overlap,
    })
}
