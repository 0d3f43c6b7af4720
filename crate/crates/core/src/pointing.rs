//! Absolute field-of-view bounds and viewpoint assembly.
//!
//! Azimuths are compass degrees: 0 is grid north (decreasing row index), 90 is
//! east (increasing column). Convert to a math angle with `90° - azimuth`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labels::CameraPointing;
use crate::localization::RoverPose;

pub const DEFAULT_OBSERVER_HEIGHT_M: f64 = 2.0;
pub const DEFAULT_RADIUS_M: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PointingError {
    #[error("angle is not finite: {0}")]
    NonFinite(f64),
    #[error("{0}")]
    Invalid(String),
    #[error("radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("observer height must be non-negative, got {0}")]
    InvalidObserverHeight(f64),
}

/// Wraps an azimuth into `[0, 360)`.
pub fn normalize_azimuth(deg: f64) -> Result<f64, PointingError> {
    if !deg.is_finite() {
        return Err(PointingError::NonFinite(deg));
    }
    let r = deg.rem_euclid(360.0);
    // rem_euclid of a tiny negative number rounds up to exactly 360.
    Ok(if r >= 360.0 { 0.0 } else { r })
}

/// Absolute angular bounds of one image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FovSector {
    pub azimuth_left_deg: f64,
    pub azimuth_right_deg: f64,
    pub elevation_upper_deg: f64,
    pub elevation_lower_deg: f64,
    /// When set, consumers ignore the azimuth bounds.
    pub full_circle: bool,
}

impl FovSector {
    /// Every direction, every elevation.
    pub fn everything() -> Self {
        Self {
            azimuth_left_deg: 0.0,
            azimuth_right_deg: 0.0,
            elevation_upper_deg: 90.0,
            elevation_lower_deg: -90.0,
            full_circle: true,
        }
    }

    /// Clockwise width from left to right bound, 360 for a full circle.
    pub fn width_deg(&self) -> f64 {
        if self.full_circle {
            360.0
        } else {
            (self.azimuth_right_deg - self.azimuth_left_deg).rem_euclid(360.0)
        }
    }
}

/// A sector plus any warnings produced while building it.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorBounds {
    pub sector: FovSector,
    pub warnings: Vec<String>,
}

/// Left/right azimuth and upper/lower elevation from mast pointing and FOV.
///
/// Elevation bounds beyond ±90° are clamped with a warning rather than rejected.
pub fn fov_bounds(pointing: &CameraPointing) -> Result<SectorBounds, PointingError> {
    pointing.validate()?;
    let half_h = pointing.hfov_deg / 2.0;
    let half_v = pointing.vfov_deg / 2.0;
    let mut warnings = Vec::new();

    let mut upper = pointing.elevation_deg + half_v;
    let mut lower = pointing.elevation_deg - half_v;
    if upper > 90.0 {
        warnings.push(format!("upper elevation {upper:.6} clamped to 90"));
        upper = 90.0;
    }
    if lower < -90.0 {
        warnings.push(format!("lower elevation {lower:.6} clamped to -90"));
        lower = -90.0;
    }

    Ok(SectorBounds {
        sector: FovSector {
            azimuth_left_deg: normalize_azimuth(pointing.azimuth_deg - half_h)?,
            azimuth_right_deg: normalize_azimuth(pointing.azimuth_deg + half_h)?,
            elevation_upper_deg: upper,
            elevation_lower_deg: lower,
            full_circle: pointing.hfov_deg >= 360.0,
        },
        warnings,
    })
}

/// Everything the viewshed engine needs for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Viewpoint {
    pub pose: RoverPose,
    pub sector: FovSector,
    /// Eye height above the DEM surface.
    pub observer_height_m: f64,
    pub radius_m: f64,
    pub image_id: String,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Viewpoint {
    pub fn validate(&self) -> Result<(), PointingError> {
        if !(self.radius_m.is_finite() && self.radius_m > 0.0) {
            return Err(PointingError::InvalidRadius(self.radius_m));
        }
        if !(self.observer_height_m.is_finite() && self.observer_height_m >= 0.0) {
            return Err(PointingError::InvalidObserverHeight(self.observer_height_m));
        }
        Ok(())
    }
}

pub fn build_viewpoint(
    pose: RoverPose,
    pointing: &CameraPointing,
    observer_height_m: f64,
    radius_m: f64,
    image_id: impl Into<String>,
) -> Result<Viewpoint, PointingError> {
    let SectorBounds { sector, warnings } = fov_bounds(pointing)?;
    let vp = Viewpoint {
        pose,
        sector,
        observer_height_m,
        radius_m,
        image_id: image_id.into(),
        warnings,
    };
    vp.validate()?;
    Ok(vp)
}
