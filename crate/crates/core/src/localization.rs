//! PLACES localization tables: CSV ingestion and (SITE, DRIVE) → map position.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::labels::RmcIndex;

#[derive(Debug, Error)]
pub enum LocalizationError {
    #[error("CSV is missing mapped column '{column}' for {field}")]
    MissingColumn { field: &'static str, column: String },
    #[error("duplicate localization key {0}")]
    DuplicateKey(RmcIndex),
    #[error("localization table is empty")]
    EmptyTable,
    #[error("row {row}: column '{column}' has bad value '{value}'")]
    BadRow { row: usize, column: String, value: String },
    #[error("invalid CSV schema: {0}")]
    Schema(String),
    #[error("no localization for {rmc} ({mode:?} lookup)")]
    NotFound { rmc: RmcIndex, mode: Fallback },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Column names for the logical fields of a localization CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub site: String,
    pub drive: String,
    pub easting: String,
    pub northing: String,
    #[serde(default)]
    pub elevation: Option<String>,
    #[serde(default = "yes")]
    pub has_header: bool,
}

fn yes() -> bool {
    true
}

impl CsvSchema {
    /// Default mapping for the MSL `localized_interp.csv`.
    pub fn msl_localized_interp() -> Self {
        Self {
            site: "site".into(),
            drive: "drive".into(),
            easting: "easting".into(),
            northing: "northing".into(),
            elevation: Some("elevation".into()),
            has_header: true,
        }
    }

    /// Default mapping for the Mars 2020 `best_interp.csv`.
    pub fn m2020_best_interp() -> Self {
        Self::msl_localized_interp()
    }

    /// Looks up a shipped schema by name.
    pub fn named(name: &str) -> Option<Self> {
        match name {
            "msl_localized_interp" => Some(Self::msl_localized_interp()),
            "m2020_best_interp" => Some(Self::m2020_best_interp()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), LocalizationError> {
        let mut names: Vec<&str> = vec![&self.site, &self.drive, &self.easting, &self.northing];
        if let Some(e) = &self.elevation {
            names.push(e);
        }
        if names.iter().any(|n| n.trim().is_empty()) {
            return Err(LocalizationError::Schema("column names must be non-empty".into()));
        }
        let mut sorted = names.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != names.len() {
            return Err(LocalizationError::Schema("column names must be unique".into()));
        }
        if !self.has_header && names.iter().any(|n| n.parse::<usize>().is_err()) {
            return Err(LocalizationError::Schema(
                "without a header row, columns must be zero-based indices".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    #[default]
    Exact,
    NearestPreceding,
}

/// Rover ground position in the map frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoverPose {
    pub easting: f64,
    pub northing: f64,
    pub elevation: Option<f64>,
    /// The table key actually matched; `None` for poses not taken from a table.
    pub rmc: Option<RmcIndex>,
    /// Set when the pose came from a nearest-preceding fallback.
    #[serde(default)]
    pub approximate: bool,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl RoverPose {
    pub fn at(easting: f64, northing: f64) -> Self {
        Self {
            easting,
            northing,
            elevation: None,
            rmc: None,
            approximate: false,
            warnings: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Row {
    easting: f64,
    northing: f64,
    elevation: Option<f64>,
}

/// In-memory localization index.
#[derive(Debug, Clone)]
pub struct LocalizationTable {
    pub source_name: String,
    rows: HashMap<RmcIndex, Row>,
    // per site, drives in ascending order
    drives: BTreeMap<u32, Vec<u32>>,
}

impl LocalizationTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn contains(&self, rmc: RmcIndex) -> bool {
        self.rows.contains_key(&rmc)
    }

    pub fn load_path(path: &std::path::Path, schema: &CsvSchema) -> Result<Self, crate::Error> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
        let mut table = load_table(&text, schema)?;
        table.source_name = path.display().to_string();
        Ok(table)
    }
}

fn column_index(headers: Option<&csv::StringRecord>, name: &str, field: &'static str) -> Result<usize, LocalizationError> {
    let missing = || LocalizationError::MissingColumn {
        field,
        column: name.to_string(),
    };
    match headers {
        Some(h) => h.iter().position(|c| c.trim() == name).ok_or_else(missing),
        None => name.trim().parse().map_err(|_| missing()),
    }
}

/// Parses a localization CSV into a keyed table.
pub fn load_table(csv_text: &str, schema: &CsvSchema) -> Result<LocalizationTable, LocalizationError> {
    schema.validate()?;
    let text = csv_text.strip_prefix('\u{feff}').unwrap_or(csv_text);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = if schema.has_header {
        Some(reader.headers()?.clone())
    } else {
        None
    };
    let h = headers.as_ref();
    let site_col = column_index(h, &schema.site, "site")?;
    let drive_col = column_index(h, &schema.drive, "drive")?;
    let east_col = column_index(h, &schema.easting, "easting")?;
    let north_col = column_index(h, &schema.northing, "northing")?;
    // Elevation is optional: a header without the named column just has none.
    let elev_col = match schema.elevation.as_deref() {
        Some(name) if h.is_some() => column_index(h, name, "elevation").ok(),
        Some(name) => Some(column_index(h, name, "elevation")?),
        None => None,
    };

    let mut rows = HashMap::new();
    let mut drives: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        // 1-based file line, counting the header.
        let row = i + 1 + usize::from(schema.has_header);
        let cell = |col: usize, name: &str| -> Result<&str, LocalizationError> {
            record.get(col).ok_or_else(|| LocalizationError::BadRow {
                row,
                column: name.to_string(),
                value: String::new(),
            })
        };
        let bad = |col: usize, name: &str| LocalizationError::BadRow {
            row,
            column: name.to_string(),
            value: record.get(col).unwrap_or_default().to_string(),
        };
        let index = |col: usize, name: &str| -> Result<u32, LocalizationError> {
            let s = cell(col, name)?;
            s.parse::<u32>().or_else(|_| match s.parse::<f64>() {
                Ok(v) if v.fract() == 0.0 && (0.0..=u32::MAX as f64).contains(&v) => Ok(v as u32),
                _ => Err(bad(col, name)),
            })
        };
        let coord = |col: usize, name: &str| -> Result<f64, LocalizationError> {
            match cell(col, name)?.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(bad(col, name)),
            }
        };

        let key = RmcIndex::new(index(site_col, &schema.site)?, index(drive_col, &schema.drive)?);
        let elevation = match (elev_col, schema.elevation.as_deref()) {
            (Some(col), Some(name)) => match cell(col, name)? {
                "" => None,
                s => match s.parse::<f64>() {
                    Ok(v) if v.is_finite() => Some(v),
                    _ => return Err(bad(col, name)),
                },
            },
            _ => None,
        };
        let value = Row {
            easting: coord(east_col, &schema.easting)?,
            northing: coord(north_col, &schema.northing)?,
            elevation,
        };
        if rows.insert(key, value).is_some() {
            return Err(LocalizationError::DuplicateKey(key));
        }
        drives.entry(key.site).or_default().push(key.drive);
    }
    if rows.is_empty() {
        return Err(LocalizationError::EmptyTable);
    }
    for list in drives.values_mut() {
        list.sort_unstable();
    }
    Ok(LocalizationTable {
        source_name: String::from("<memory>"),
        rows,
        drives,
    })
}

/// Resolves an RMC to a rover pose.
///
/// `NearestPreceding` falls back to the greatest drive at or below the query
/// within the same site and marks the pose approximate.
pub fn lookup_pose(table: &LocalizationTable, rmc: RmcIndex, fallback: Fallback) -> Result<RoverPose, LocalizationError> {
    let not_found = || LocalizationError::NotFound { rmc, mode: fallback };
    let matched = match fallback {
        Fallback::Exact => table.rows.contains_key(&rmc).then_some(rmc),
        Fallback::NearestPreceding => table.drives.get(&rmc.site).and_then(|drives| {
            let n = drives.partition_point(|d| *d <= rmc.drive);
            (n > 0).then(|| RmcIndex::new(rmc.site, drives[n - 1]))
        }),
    }
    .ok_or_else(not_found)?;
    let row = table.rows[&matched];

    let mut warnings = Vec::new();
    let approximate = matched != rmc;
    if approximate {
        warnings.push(format!("no localization for {rmc}; using nearest preceding drive {matched}"));
    }
    if !rmc.is_stationary() {
        warnings.push(format!("drive {} is odd: image taken while the rover was moving", rmc.drive));
    }
    Ok(RoverPose {
        easting: row.easting,
        northing: row.northing,
        elevation: row.elevation,
        rmc: Some(matched),
        approximate,
        warnings,
    })
}
