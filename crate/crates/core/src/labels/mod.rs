//! PDS label parsing and per-mission metadata extraction.
//!
//! PDS3 labels (Curiosity) go through the PVL reader in [`pvl`]; PDS4 XML
//! labels (Perseverance) are read with `roxmltree`. Both end up as an
//! [`ImageMetadata`] through an [`ExtractionProfile`].

mod detect;
mod pds3;
mod pds4;
pub mod profile;
pub mod pvl;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pointing::{normalize_azimuth, PointingError};

pub use detect::detect_format;
pub use pds3::extract_pds3;
pub use pds4::extract_pds4;
pub use profile::{ExtractionProfile, FieldRule, FieldRules, LogicalField};
pub use pvl::{parse_pvl, parse_pvl_with, DuplicatePolicy, LabelTree, PvlDocument, PvlError, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mission {
    Curiosity,
    Perseverance,
}

impl fmt::Display for Mission {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mission::Curiosity => "curiosity",
            Mission::Perseverance => "perseverance",
        })
    }
}

impl std::str::FromStr for Mission {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "curiosity" | "msl" => Ok(Mission::Curiosity),
            "perseverance" | "m2020" | "mars2020" => Ok(Mission::Perseverance),
            other => Err(format!("unknown mission '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelFormat {
    Pds3Pvl,
    Pds4Xml,
}

impl fmt::Display for LabelFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelFormat::Pds3Pvl => "PDS3 PVL",
            LabelFormat::Pds4Xml => "PDS4 XML",
        })
    }
}

/// Rover Motion Counter position: SITE frame plus DRIVE within it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RmcIndex {
    pub site: u32,
    pub drive: u32,
}

impl RmcIndex {
    pub fn new(site: u32, drive: u32) -> Self {
        Self { site, drive }
    }

    /// Even drive counts are captured while the rover is stationary.
    pub fn is_stationary(&self) -> bool {
        self.drive.is_multiple_of(2)
    }
}

impl fmt::Display for RmcIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.site, self.drive)
    }
}

/// Mast pointing and field of view, all in degrees.
///
/// Azimuth is clockwise from north and normalized to `[0, 360)`; elevation is
/// zero at the horizon and positive toward the sky.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPointing {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub hfov_deg: f64,
    pub vfov_deg: f64,
}

impl CameraPointing {
    pub fn new(azimuth_deg: f64, elevation_deg: f64, hfov_deg: f64, vfov_deg: f64) -> Result<Self, PointingError> {
        let p = Self {
            azimuth_deg: normalize_azimuth(azimuth_deg)?,
            elevation_deg,
            hfov_deg,
            vfov_deg,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PointingError> {
        let bad = |what: &str, v: f64| Err(PointingError::Invalid(format!("{what} = {v}")));
        if !(self.azimuth_deg.is_finite() && (0.0..360.0).contains(&self.azimuth_deg)) {
            return bad("azimuth_deg", self.azimuth_deg);
        }
        if !(self.elevation_deg.is_finite() && (-90.0..=90.0).contains(&self.elevation_deg)) {
            return bad("elevation_deg", self.elevation_deg);
        }
        if !(self.hfov_deg.is_finite() && self.hfov_deg > 0.0 && self.hfov_deg <= 360.0) {
            return bad("hfov_deg", self.hfov_deg);
        }
        if !(self.vfov_deg.is_finite() && self.vfov_deg > 0.0 && self.vfov_deg <= 180.0) {
            return bad("vfov_deg", self.vfov_deg);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMetadata {
    pub product_id: String,
    pub mission: Mission,
    pub rmc: RmcIndex,
    pub pointing: CameraPointing,
    /// Coordinate frame the RMC was read from, verbatim, when the label names one.
    pub frame: Option<String>,
}

#[derive(Debug, Error)]
pub enum LabelError {
    #[error(transparent)]
    Pvl(#[from] PvlError),
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("missing field {field} (looked for {path})")]
    MissingField { field: LogicalField, path: String },
    #[error("field {field} is ambiguous: {count} elements match {path}")]
    AmbiguousField {
        field: LogicalField,
        path: String,
        count: usize,
    },
    #[error("{names} has {name_count} entries but {values} has {value_count}")]
    LengthMismatch {
        names: String,
        values: String,
        name_count: usize,
        value_count: usize,
    },
    #[error("field {field} is not numeric: {found}")]
    NotNumeric { field: LogicalField, found: String },
    #[error("field {field} must be a non-negative integer, got {found}")]
    InvalidIndex { field: LogicalField, found: String },
    #[error("field {field} has unit <{found}>, expected <{expected}>")]
    UnitMismatch {
        field: LogicalField,
        expected: String,
        found: String,
    },
    #[error("invalid pointing: {0}")]
    Pointing(#[from] PointingError),
    #[error("invalid extraction profile: {0}")]
    Profile(String),
    #[error("unrecognized label format for {filename}")]
    UnrecognizedFormat { filename: String },
}

fn check_unit(profile: &ExtractionProfile, field: LogicalField, unit: Option<&str>) -> Result<(), LabelError> {
    match (profile.expected_unit(field), unit) {
        (Some(expected), Some(found)) if !found.eq_ignore_ascii_case(expected) => Err(LabelError::UnitMismatch {
            field,
            expected: expected.to_string(),
            found: found.to_string(),
        }),
        _ => Ok(()),
    }
}

fn index_from_i64(field: LogicalField, v: i64) -> Result<u32, LabelError> {
    u32::try_from(v).map_err(|_| LabelError::InvalidIndex {
        field,
        found: v.to_string(),
    })
}

/// Builds the metadata record once the raw fields are pulled out of a label.
fn assemble(
    profile: &ExtractionProfile,
    product_id: String,
    rmc: RmcIndex,
    angles: [f64; 4],
    frame: Option<String>,
) -> Result<ImageMetadata, LabelError> {
    if product_id.trim().is_empty() {
        return Err(LabelError::MissingField {
            field: LogicalField::ProductId,
            path: profile.rules.product_id.describe(),
        });
    }
    let [az, el, h, v] = angles;
    Ok(ImageMetadata {
        product_id: product_id.trim().to_string(),
        mission: profile.mission,
        rmc,
        pointing: CameraPointing::new(az, el, h, v)?,
        frame,
    })
}
