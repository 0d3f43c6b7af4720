//! Co-locates Mars rover mast-camera images with orbital maps.
//!
//! The flow is: parse a PDS label ([`labels`]), resolve the rover position
//! from a PLACES table ([`localization`]), turn mast pointing into absolute
//! field-of-view bounds ([`pointing`]), and compute a terrain-occluded
//! viewshed over a DEM ([`viewshed`]). [`pipeline`] wires the stages together
//! for batches of labels.

pub mod labels;
pub mod localization;
pub mod pipeline;
pub mod pointing;
pub mod raster;
pub mod viewshed;

use std::path::Path;

use thiserror::Error;

pub use labels::{
    detect_format, extract_pds3, extract_pds4, parse_pvl, CameraPointing, ExtractionProfile, ImageMetadata, LabelError,
    LabelFormat, LabelTree, Mission, RmcIndex,
};
pub use localization::{load_table, lookup_pose, CsvSchema, Fallback, LocalizationError, LocalizationTable, RoverPose};
pub use pipeline::{
    colocate, export_viewpoint_csv, fetch_product, read_viewpoint_csv, BatchReport, BatchStatus, ColocationResult,
    ConfigOverrides, FetchError, PipelineConfig,
};
pub use pointing::{build_viewpoint, fov_bounds, normalize_azimuth, FovSector, PointingError, Viewpoint};
pub use raster::{
    load_dem, polygonize, sample_elevation, write_visibility, Dem, GeoTransform, RasterError, RasterFormat, Visibility,
    VisibilityRaster,
};
pub use viewshed::{
    compute_viewshed, in_sector, line_of_sight, overlap, Curvature, Execution, OverlapReport, ViewshedError, ViewshedMode,
    ViewshedParams,
};

/// Any failure surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Localization(#[from] LocalizationError),
    #[error(transparent)]
    Pointing(#[from] PointingError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Viewshed(#[from] ViewshedError),
    #[error(transparent)]
    Fetch(#[from] FetchError),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("{path}:{line}: {message}")]
    ViewpointCsv { path: String, line: usize, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("duplicate image id '{0}' in batch")]
    DuplicateImage(String),
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
