use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{LabelError, LabelFormat, Mission};

/// The logical fields every profile must map onto a label location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogicalField {
    ProductId,
    Site,
    Drive,
    AzimuthDeg,
    ElevationDeg,
    HfovDeg,
    VfovDeg,
}

impl LogicalField {
    pub fn name(self) -> &'static str {
        match self {
            LogicalField::ProductId => "product_id",
            LogicalField::Site => "site",
            LogicalField::Drive => "drive",
            LogicalField::AzimuthDeg => "azimuth_deg",
            LogicalField::ElevationDeg => "elevation_deg",
            LogicalField::HfovDeg => "hfov_deg",
            LogicalField::VfovDeg => "vfov_deg",
        }
    }
}

impl std::fmt::Display for LogicalField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Where one logical field lives in a label.
///
/// XML paths are `/`-separated qualified element names matched against the
/// tail of an element's ancestor chain (`a:B/a:C` finds every `a:C` whose
/// parent is `a:B`). A segment may be `*` and may carry one child predicate,
/// `a:B[a:kind=VALUE]`, which requires a child element `a:kind` whose trimmed
/// text is `VALUE`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldRule {
    /// Dotted PVL path to a scalar.
    Pvl { path: String },
    /// Element of the `values` sequence aligned with `name` in the `names` sequence.
    PvlIndexed {
        names: String,
        values: String,
        name: String,
    },
    /// Text of the unique element matching `path`.
    Xml { path: String },
    /// Among elements matching `path`, the one whose `id_child` text equals
    /// `id`; the value is the text of its `value_child`.
    XmlIndexed {
        path: String,
        id_child: String,
        value_child: String,
        id: String,
    },
}

impl FieldRule {
    fn is_pvl(&self) -> bool {
        matches!(self, FieldRule::Pvl { .. } | FieldRule::PvlIndexed { .. })
    }

    pub fn describe(&self) -> String {
        match self {
            FieldRule::Pvl { path } | FieldRule::Xml { path } => path.clone(),
            FieldRule::PvlIndexed { names, values, name } => format!("{values}[{names} = {name}]"),
            FieldRule::XmlIndexed { path, id_child, id, value_child } => {
                format!("{path}[{id_child}={id}]/{value_child}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldRules {
    pub product_id: FieldRule,
    pub site: FieldRule,
    pub drive: FieldRule,
    pub azimuth_deg: FieldRule,
    pub elevation_deg: FieldRule,
    pub hfov_deg: FieldRule,
    pub vfov_deg: FieldRule,
}

impl FieldRules {
    pub fn get(&self, field: LogicalField) -> &FieldRule {
        match field {
            LogicalField::ProductId => &self.product_id,
            LogicalField::Site => &self.site,
            LogicalField::Drive => &self.drive,
            LogicalField::AzimuthDeg => &self.azimuth_deg,
            LogicalField::ElevationDeg => &self.elevation_deg,
            LogicalField::HfovDeg => &self.hfov_deg,
            LogicalField::VfovDeg => &self.vfov_deg,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (LogicalField, &FieldRule)> {
        ALL_FIELDS.iter().map(move |f| (*f, self.get(*f)))
    }
}

const ALL_FIELDS: [LogicalField; 7] = [
    LogicalField::ProductId,
    LogicalField::Site,
    LogicalField::Drive,
    LogicalField::AzimuthDeg,
    LogicalField::ElevationDeg,
    LogicalField::HfovDeg,
    LogicalField::VfovDeg,
];

/// Per-mission recipe for turning a label into [`super::ImageMetadata`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionProfile {
    pub mission: Mission,
    pub format: LabelFormat,
    pub rules: FieldRules,
    /// Expected unit per field. A present annotation must match; an absent one is accepted.
    #[serde(default)]
    pub units: BTreeMap<LogicalField, String>,
    /// PDS4 only: child of the matched SITE index's parent whose text names the
    /// coordinate frame, recorded verbatim in the metadata.
    #[serde(default)]
    pub frame_child: Option<String>,
    /// Mast camera height above the DEM surface used when the run does not override it.
    #[serde(default = "default_observer_height")]
    pub observer_height_m: f64,
}

fn default_observer_height() -> f64 {
    2.0
}

fn angle_units() -> BTreeMap<LogicalField, String> {
    [
        LogicalField::AzimuthDeg,
        LogicalField::ElevationDeg,
        LogicalField::HfovDeg,
        LogicalField::VfovDeg,
    ]
    .into_iter()
    .map(|f| (f, "deg".to_string()))
    .collect()
}

impl ExtractionProfile {
    /// MSL Mastcam PDS3 labels.
    pub fn curiosity() -> Self {
        let pvl = |p: &str| FieldRule::Pvl { path: p.to_string() };
        let rmc = |name: &str| FieldRule::PvlIndexed {
            names: "ROVER_MOTION_COUNTER_NAME".into(),
            values: "ROVER_MOTION_COUNTER".into(),
            name: name.into(),
        };
        Self {
            mission: Mission::Curiosity,
            format: LabelFormat::Pds3Pvl,
            rules: FieldRules {
                product_id: pvl("PRODUCT_ID"),
                site: rmc("SITE"),
                drive: rmc("DRIVE"),
                azimuth_deg: pvl("SITE_DERIVED_GEOMETRY_PARMS.FIXED_INSTRUMENT_AZIMUTH"),
                elevation_deg: pvl("SITE_DERIVED_GEOMETRY_PARMS.FIXED_INSTRUMENT_ELEVATION"),
                hfov_deg: pvl("INSTRUMENT_STATE_PARMS.AZIMUTH_FOV"),
                vfov_deg: pvl("INSTRUMENT_STATE_PARMS.ELEVATION_FOV"),
            },
            units: angle_units(),
            frame_child: None,
            observer_height_m: default_observer_height(),
        }
    }

    /// Mars 2020 Mastcam-Z PDS4 labels. The pointing paths are best guesses
    /// at the geom/img dictionary layout and are meant to be overridden from
    /// the config file when a label differs.
    pub fn perseverance() -> Self {
        let xml = |p: &str| FieldRule::Xml { path: p.to_string() };
        let rmc = |id: &str| FieldRule::XmlIndexed {
            path: "*[geom:coordinate_space_frame_type=ROVER_NAV_FRAME]/geom:Coordinate_Space_Index".into(),
            id_child: "geom:index_id".into(),
            value_child: "geom:index_value_number".into(),
            id: id.into(),
        };
        Self {
            mission: Mission::Perseverance,
            format: LabelFormat::Pds4Xml,
            rules: FieldRules {
                product_id: xml("Identification_Area/logical_identifier"),
                site: rmc("SITE"),
                drive: rmc("DRIVE"),
                azimuth_deg: xml("geom:Derived_Geometry/geom:instrument_azimuth"),
                elevation_deg: xml("geom:Derived_Geometry/geom:instrument_elevation"),
                hfov_deg: xml("img:Optical_Properties/img:horizontal_fov"),
                vfov_deg: xml("img:Optical_Properties/img:vertical_fov"),
            },
            units: angle_units(),
            frame_child: Some("geom:coordinate_space_frame_type".into()),
            observer_height_m: default_observer_height(),
        }
    }

    pub fn builtin(mission: Mission) -> Self {
        match mission {
            Mission::Curiosity => Self::curiosity(),
            Mission::Perseverance => Self::perseverance(),
        }
    }

    /// Checks that every rule uses the lookup flavor of the profile's format.
    pub fn validate(&self) -> Result<(), LabelError> {
        let want_pvl = self.format == LabelFormat::Pds3Pvl;
        for (field, rule) in self.rules.iter() {
            if rule.is_pvl() != want_pvl {
                return Err(LabelError::Profile(format!(
                    "rule for {field} ({}) does not fit a {} profile",
                    rule.describe(),
                    self.format
                )));
            }
        }
        if !(self.observer_height_m.is_finite() && self.observer_height_m >= 0.0) {
            return Err(LabelError::Profile(format!(
                "observer_height_m must be a non-negative number, got {}",
                self.observer_height_m
            )));
        }
        Ok(())
    }

    pub fn expected_unit(&self, field: LogicalField) -> Option<&str> {
        self.units.get(&field).map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate() {
        ExtractionProfile::curiosity().validate().unwrap();
        ExtractionProfile::perseverance().validate().unwrap();
    }

    #[test]
    fn mixed_rules_rejected() {
        let mut p = ExtractionProfile::curiosity();
        p.rules.hfov_deg = FieldRule::Xml { path: "x".into() };
        assert!(matches!(p.validate(), Err(LabelError::Profile(_))));
    }

    #[test]
    fn profile_json_shape() {
        let json = r#"{
            "mission": "curiosity",
            "format": "pds3_pvl",
            "rules": {
                "product_id": {"kind": "pvl", "path": "PRODUCT_ID"},
                "site": {"kind": "pvl_indexed", "names": "N", "values": "V", "name": "SITE"},
                "drive": {"kind": "pvl_indexed", "names": "N", "values": "V", "name": "DRIVE"},
                "azimuth_deg": {"kind": "pvl", "path": "AZ"},
                "elevation_deg": {"kind": "pvl", "path": "EL"},
                "hfov_deg": {"kind": "pvl", "path": "H"},
                "vfov_deg": {"kind": "pvl", "path": "V2"}
            },
            "units": {"azimuth_deg": "deg"}
        }"#;
        let p: ExtractionProfile = serde_json::from_str(json).unwrap();
        p.validate().unwrap();
        assert_eq!(p.observer_height_m, 2.0);
        assert_eq!(p.expected_unit(LogicalField::AzimuthDeg), Some("deg"));
        assert_eq!(p.expected_unit(LogicalField::HfovDeg), None);
    }
}
