//! North-up georeferenced grids: DEMs, visibility rasters, file IO and
//! polygonization.

mod ascii;
mod geotiff;
mod polygon;
pub mod synth;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use polygon::{feature_collection_area, polygonize};

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("unsupported raster format: {0}")]
    UnsupportedFormat(String),
    #[error("pixels are not square ({x} x {y})")]
    NonSquarePixels { x: f64, y: f64 },
    #[error("raster is rotated or not north-up")]
    NotNorthUp,
    #[error("malformed raster: {0}")]
    Malformed(String),
    #[error("every cell is nodata")]
    AllNodata,
    #[error("point ({easting}, {northing}) lies outside the raster")]
    OutOfBounds { easting: f64, northing: f64 },
    #[error("no valid elevation around ({easting}, {northing})")]
    NodataNeighborhood { easting: f64, northing: f64 },
    #[error("rasters are not on a common grid: {0}")]
    GridMismatch(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Tiff {
        path: String,
        #[source]
        source: tiff::TiffError,
    },
}

impl RasterError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        RasterError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Affine pixel ↔ map mapping for a north-up, square-pixel grid.
///
/// The origin is the outer (north-west) corner of pixel (0, 0); northing
/// decreases as the row index increases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoTransform {
    pub origin_easting: f64,
    pub origin_northing: f64,
    pub pixel_size: f64,
    pub rows: usize,
    pub cols: usize,
}

/// Continuous pixel position; `in_bounds` covers the closed raster rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelCoord {
    pub col: f64,
    pub row: f64,
    pub in_bounds: bool,
}

impl GeoTransform {
    pub fn new(origin_easting: f64, origin_northing: f64, pixel_size: f64, rows: usize, cols: usize) -> Result<Self, RasterError> {
        if !(pixel_size.is_finite() && pixel_size > 0.0) {
            return Err(RasterError::Malformed(format!("pixel size must be positive, got {pixel_size}")));
        }
        if !(origin_easting.is_finite() && origin_northing.is_finite()) {
            return Err(RasterError::Malformed("non-finite origin".into()));
        }
        if rows == 0 || cols == 0 {
            return Err(RasterError::Malformed(format!("empty grid {rows}x{cols}")));
        }
        Ok(Self {
            origin_easting,
            origin_northing,
            pixel_size,
            rows,
            cols,
        })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn map_to_pixel(&self, easting: f64, northing: f64) -> PixelCoord {
        let col = (easting - self.origin_easting) / self.pixel_size;
        let row = (self.origin_northing - northing) / self.pixel_size;
        let in_bounds = (0.0..=self.cols as f64).contains(&col) && (0.0..=self.rows as f64).contains(&row);
        PixelCoord { col, row, in_bounds }
    }

    pub fn pixel_to_map(&self, col: f64, row: f64) -> (f64, f64) {
        (
            self.origin_easting + col * self.pixel_size,
            self.origin_northing - row * self.pixel_size,
        )
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        self.pixel_to_map(col as f64 + 0.5, row as f64 + 0.5)
    }

    /// Cell containing a map point; the east and south edges belong to the last cell.
    pub fn cell_of(&self, easting: f64, northing: f64) -> Option<(usize, usize)> {
        let p = self.map_to_pixel(easting, northing);
        if !p.in_bounds {
            return None;
        }
        let col = (p.col.floor() as usize).min(self.cols - 1);
        let row = (p.row.floor() as usize).min(self.rows - 1);
        Some((row, col))
    }

    /// Sub-grid starting at (row0, col0).
    pub fn window(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Self {
        let (e, n) = self.pixel_to_map(col0 as f64, row0 as f64);
        Self {
            origin_easting: e,
            origin_northing: n,
            pixel_size: self.pixel_size,
            rows,
            cols,
        }
    }

    /// Integer (row, col) offset of `other`'s origin in this grid, when both
    /// share pixel size and are aligned to within a millionth of a pixel.
    pub fn aligned_offset(&self, other: &GeoTransform) -> Result<(i64, i64), RasterError> {
        let rel = (self.pixel_size - other.pixel_size).abs() / self.pixel_size;
        if rel > 1e-9 {
            return Err(RasterError::GridMismatch(format!(
                "pixel sizes {} and {}",
                self.pixel_size, other.pixel_size
            )));
        }
        let dc = (other.origin_easting - self.origin_easting) / self.pixel_size;
        let dr = (self.origin_northing - other.origin_northing) / self.pixel_size;
        let (rc, rr) = (dc.round(), dr.round());
        if (dc - rc).abs() > 1e-6 || (dr - rr).abs() > 1e-6 {
            return Err(RasterError::GridMismatch(format!(
                "origins differ by a fractional pixel ({dc}, {dr})"
            )));
        }
        Ok((rr as i64, rc as i64))
    }
}

/// Elevation grid in meters, row-major from the north edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Dem {
    pub transform: GeoTransform,
    elevations: Vec<f64>,
    pub nodata: f64,
}

impl Dem {
    pub fn new(transform: GeoTransform, elevations: Vec<f64>, nodata: f64) -> Result<Self, RasterError> {
        if elevations.len() != transform.len() {
            return Err(RasterError::Malformed(format!(
                "{} values for a {}x{} grid",
                elevations.len(),
                transform.rows,
                transform.cols
            )));
        }
        let dem = Self {
            transform,
            elevations,
            nodata,
        };
        if dem.elevations.iter().all(|v| dem.is_nodata(*v)) {
            return Err(RasterError::AllNodata);
        }
        Ok(dem)
    }

    pub fn is_nodata(&self, v: f64) -> bool {
        v.is_nan() || v == self.nodata
    }

    pub fn rows(&self) -> usize {
        self.transform.rows
    }

    pub fn cols(&self) -> usize {
        self.transform.cols
    }

    pub fn elevations(&self) -> &[f64] {
        &self.elevations
    }

    /// Stored value, `None` when it is nodata.
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.elevations[row * self.transform.cols + col];
        (!self.is_nodata(v)).then_some(v)
    }

    /// Copy with `offset` added to every valid cell.
    pub fn offset(&self, offset: f64) -> Self {
        let elevations = self
            .elevations
            .iter()
            .map(|v| if self.is_nodata(*v) { *v } else { v + offset })
            .collect();
        Self {
            elevations,
            ..self.clone()
        }
    }

    pub fn with_cell(mut self, row: usize, col: usize, value: f64) -> Self {
        let cols = self.transform.cols;
        self.elevations[row * cols + col] = value;
        self
    }

    /// Bilinear elevation at a map point.
    pub fn sample(&self, easting: f64, northing: f64) -> Result<f64, RasterError> {
        let p = self.transform.map_to_pixel(easting, northing);
        if !p.in_bounds {
            return Err(RasterError::OutOfBounds { easting, northing });
        }
        self.sample_pixel(p.col, p.row, 0.0)
            .ok_or(RasterError::NodataNeighborhood { easting, northing })
    }

    /// Bilinear interpolation of `cell - reference` at a continuous pixel
    /// position, clamped to the grid.
    ///
    /// Each contributor is shifted by `reference` before weighting, so a
    /// constant added to the whole DEM and to `reference` leaves the result
    /// bit-identical. When a contributor is nodata the nearest valid one of the
    /// four is returned instead; `None` when all four are nodata.
    #[inline]
    pub fn sample_pixel(&self, col: f64, row: f64, reference: f64) -> Option<f64> {
        let cols = self.transform.cols;
        let rows = self.transform.rows;
        let (c0, c1, tx) = axis(col - 0.5, cols);
        let (r0, r1, ty) = axis(row - 0.5, rows);
        let e = &self.elevations;
        let v00 = e[r0 * cols + c0];
        let v01 = e[r0 * cols + c1];
        let v10 = e[r1 * cols + c0];
        let v11 = e[r1 * cols + c1];
        let nodata = |v: f64| v.is_nan() || v == self.nodata;
        if !(nodata(v00) || nodata(v01) || nodata(v10) || nodata(v11)) {
            let top = (1.0 - tx) * (v00 - reference) + tx * (v01 - reference);
            let bottom = (1.0 - tx) * (v10 - reference) + tx * (v11 - reference);
            return Some((1.0 - ty) * top + ty * bottom);
        }
        let candidates = [
            ((1.0 - tx) * (1.0 - ty), v00),
            (tx * (1.0 - ty), v01),
            ((1.0 - tx) * ty, v10),
            (tx * ty, v11),
        ];
        let mut best: Option<(f64, f64)> = None;
        for (w, v) in candidates {
            if !nodata(v) && best.is_none_or(|(bw, _)| w > bw) {
                best = Some((w, v));
            }
        }
        best.map(|(_, v)| v - reference)
    }
}

/// Lower/upper neighbor indices and the fractional weight along one axis,
/// where `x` is measured in cell-center units.
#[inline]
fn axis(x: f64, n: usize) -> (usize, usize, f64) {
    if n == 1 {
        return (0, 0, 0.0);
    }
    let x = x.clamp(0.0, (n - 1) as f64);
    let i0 = (x.floor() as usize).min(n - 2);
    (i0, i0 + 1, x - i0 as f64)
}

/// Bilinear elevation at a map point.
pub fn sample_elevation(dem: &Dem, easting: f64, northing: f64) -> Result<f64, RasterError> {
    dem.sample(easting, northing)
}

pub fn map_to_pixel(t: &GeoTransform, easting: f64, northing: f64) -> PixelCoord {
    t.map_to_pixel(easting, northing)
}

pub fn pixel_to_map(t: &GeoTransform, col: f64, row: f64) -> (f64, f64) {
    t.pixel_to_map(col, row)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Visibility {
    Hidden = 0,
    Visible = 1,
    Nodata = 255,
}

impl Visibility {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Visibility::Hidden),
            1 => Some(Visibility::Visible),
            255 => Some(Visibility::Nodata),
            _ => None,
        }
    }
}

/// Per-cell visibility on a grid aligned with the source DEM.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityRaster {
    pub transform: GeoTransform,
    cells: Vec<Visibility>,
    /// Image id and viewpoint summary.
    pub provenance: String,
}

impl VisibilityRaster {
    pub fn new(transform: GeoTransform, cells: Vec<Visibility>, provenance: impl Into<String>) -> Result<Self, RasterError> {
        if cells.len() != transform.len() {
            return Err(RasterError::Malformed(format!(
                "{} cells for a {}x{} grid",
                cells.len(),
                transform.rows,
                transform.cols
            )));
        }
        Ok(Self {
            transform,
            cells,
            provenance: provenance.into(),
        })
    }

    pub fn filled(transform: GeoTransform, value: Visibility) -> Self {
        Self {
            transform,
            cells: vec![value; transform.len()],
            provenance: String::new(),
        }
    }

    pub fn cells(&self) -> &[Visibility] {
        &self.cells
    }

    pub fn get(&self, row: usize, col: usize) -> Visibility {
        self.cells[row * self.transform.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: Visibility) {
        let cols = self.transform.cols;
        self.cells[row * cols + col] = v;
    }

    pub fn visible_count(&self) -> usize {
        self.cells.iter().filter(|c| **c == Visibility::Visible).count()
    }

    pub fn visible_area_m2(&self) -> f64 {
        self.visible_count() as f64 * self.transform.pixel_size * self.transform.pixel_size
    }

    /// Visibility of the cell containing a map point, if inside.
    pub fn at_map(&self, easting: f64, northing: f64) -> Option<Visibility> {
        self.transform.cell_of(easting, northing).map(|(r, c)| self.get(r, c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RasterFormat {
    #[default]
    Ascii,
    Geotiff,
}

impl RasterFormat {
    pub fn extension(self) -> &'static str {
        match self {
            RasterFormat::Ascii => "asc",
            RasterFormat::Geotiff => "tif",
        }
    }

    /// Guesses from the file extension, then from the TIFF magic bytes.
    fn sniff(path: &Path) -> Result<Self, RasterError> {
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        match ext.as_deref() {
            Some("asc") | Some("grd") | Some("txt") => return Ok(RasterFormat::Ascii),
            Some("tif") | Some("tiff") | Some("gtiff") => return Ok(RasterFormat::Geotiff),
            _ => {}
        }
        use std::io::Read;
        let mut head = [0u8; 4];
        let mut f = std::fs::File::open(path).map_err(|e| RasterError::io(path, e))?;
        let n = f.read(&mut head).map_err(|e| RasterError::io(path, e))?;
        match &head[..n] {
            b"II*\0" | b"MM\0*" | b"II+\0" | b"MM\0+" => Ok(RasterFormat::Geotiff),
            h if h.iter().all(|b| b.is_ascii()) && n > 0 => Ok(RasterFormat::Ascii),
            _ => Err(RasterError::UnsupportedFormat(path.display().to_string())),
        }
    }
}

impl fmt::Display for RasterFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RasterFormat::Ascii => "ascii",
            RasterFormat::Geotiff => "geotiff",
        })
    }
}

/// Raw decoded single-band grid.
#[derive(Debug, Clone)]
struct Grid {
    transform: GeoTransform,
    values: Vec<f64>,
    nodata: Option<f64>,
}

fn read_grid(path: &Path) -> Result<Grid, RasterError> {
    match RasterFormat::sniff(path)? {
        RasterFormat::Ascii => {
            let text = std::fs::read_to_string(path).map_err(|e| RasterError::io(path, e))?;
            ascii::parse(&text)
        }
        RasterFormat::Geotiff => geotiff::read(path),
    }
}

pub const DEFAULT_DEM_NODATA: f64 = -9999.0;

/// Loads an ESRI ASCII grid or single-band GeoTIFF as a DEM.
pub fn load_dem(path: impl AsRef<Path>) -> Result<Dem, RasterError> {
    let grid = read_grid(path.as_ref())?;
    Dem::new(grid.transform, grid.values, grid.nodata.unwrap_or(DEFAULT_DEM_NODATA))
}

/// Loads a raster written by [`write_visibility`].
pub fn load_visibility(path: impl AsRef<Path>) -> Result<VisibilityRaster, RasterError> {
    let path = path.as_ref();
    let grid = read_grid(path)?;
    let nodata = grid.nodata.unwrap_or(255.0);
    let cells = grid
        .values
        .iter()
        .map(|v| {
            if *v == nodata || v.is_nan() {
                Ok(Visibility::Nodata)
            } else if *v == 0.0 {
                Ok(Visibility::Hidden)
            } else if *v == 1.0 {
                Ok(Visibility::Visible)
            } else {
                Err(RasterError::Malformed(format!("visibility value {v} is not 0, 1 or nodata")))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    VisibilityRaster::new(grid.transform, cells, path.display().to_string())
}

/// Writes visible=1, hidden=0, nodata=255.
pub fn write_visibility(vs: &VisibilityRaster, path: impl AsRef<Path>, format: RasterFormat) -> Result<(), RasterError> {
    let path = path.as_ref();
    match format {
        RasterFormat::Ascii => {
            let text = ascii::encode_visibility(vs);
            std::fs::write(path, text).map_err(|e| RasterError::io(path, e))
        }
        RasterFormat::Geotiff => geotiff::write_visibility(vs, path),
    }
}

pub fn write_dem(dem: &Dem, path: impl AsRef<Path>, format: RasterFormat) -> Result<(), RasterError> {
    let path = path.as_ref();
    match format {
        RasterFormat::Ascii => {
            let text = ascii::encode_dem(dem);
            std::fs::write(path, text).map_err(|e| RasterError::io(path, e))
        }
        RasterFormat::Geotiff => geotiff::write_dem(dem, path),
    }
}
