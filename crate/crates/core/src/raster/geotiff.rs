//! Single-band GeoTIFF via the `tiff` crate, georeferenced with
//! ModelPixelScale + ModelTiepoint (or a north-up ModelTransformation).

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use tiff::decoder::{Decoder, DecodingResult, Limits};
use tiff::encoder::{colortype, TiffEncoder};
use tiff::tags::Tag;
use tiff::ColorType;

use super::{Dem, GeoTransform, Grid, RasterError, VisibilityRaster};

fn tiff_err(path: &Path) -> impl Fn(tiff::TiffError) -> RasterError + '_ {
    move |source| RasterError::Tiff {
        path: path.display().to_string(),
        source,
    }
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

pub(super) fn read(path: &Path) -> Result<Grid, RasterError> {
    let err = tiff_err(path);
    let file = File::open(path).map_err(|e| RasterError::io(path, e))?;
    let mut dec = Decoder::new(BufReader::new(file))
        .map_err(&err)?
        .with_limits(Limits::unlimited());
    let (width, height) = dec.dimensions().map_err(&err)?;
    match dec.colortype().map_err(&err)? {
        ColorType::Gray(_) => {}
        other => {
            return Err(RasterError::UnsupportedFormat(format!(
                "{}: expected one band, found {other:?}",
                path.display()
            )))
        }
    }
    let (rows, cols) = (height as usize, width as usize);

    let transform = if let Some(m) = f64_tag(&mut dec, Tag::ModelTransformationTag, path)? {
        if m.len() < 8 {
            return Err(RasterError::Malformed("short ModelTransformationTag".into()));
        }
        if m[1] != 0.0 || m[4] != 0.0 || m[0] <= 0.0 || m[5] >= 0.0 {
            return Err(RasterError::NotNorthUp);
        }
        if !same(m[0], -m[5]) {
            return Err(RasterError::NonSquarePixels { x: m[0], y: -m[5] });
        }
        GeoTransform::new(m[3], m[7], m[0], rows, cols)?
    } else {
        let scale = f64_tag(&mut dec, Tag::ModelPixelScaleTag, path)?
            .ok_or_else(|| RasterError::UnsupportedFormat(format!("{}: no georeferencing tags", path.display())))?;
        let tie = f64_tag(&mut dec, Tag::ModelTiepointTag, path)?
            .ok_or_else(|| RasterError::UnsupportedFormat(format!("{}: no tiepoint", path.display())))?;
        if scale.len() < 2 || tie.len() < 6 {
            return Err(RasterError::Malformed("short georeferencing tags".into()));
        }
        let (sx, sy) = (scale[0], scale[1]);
        if sx <= 0.0 || sy <= 0.0 {
            return Err(RasterError::NotNorthUp);
        }
        if !same(sx, sy) {
            return Err(RasterError::NonSquarePixels { x: sx, y: sy });
        }
        GeoTransform::new(tie[3] - tie[0] * sx, tie[4] + tie[1] * sx, sx, rows, cols)?
    };

    let nodata = match dec.find_tag(Tag::GdalNodata).map_err(&err)? {
        Some(v) => {
            let s = v.into_string().map_err(&err)?;
            let s = s.trim_matches(|c: char| c == '\0' || c.is_whitespace());
            Some(s.parse::<f64>().map_err(|_| RasterError::Malformed(format!("GDAL_NODATA '{s}'")))?)
        }
        None => None,
    };

    let values: Vec<f64> = match dec.read_image().map_err(&err)? {
        DecodingResult::U8(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::U16(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::U32(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::I8(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::I16(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::I32(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::F32(v) => v.into_iter().map(f64::from).collect(),
        DecodingResult::F64(v) => v,
        other => {
            return Err(RasterError::UnsupportedFormat(format!(
                "{}: sample type {:?}",
                path.display(),
                std::mem::discriminant(&other)
            )))
        }
    };
    if values.len() != rows * cols {
        return Err(RasterError::Malformed(format!(
            "{} samples for {rows}x{cols}",
            values.len()
        )));
    }
    Ok(Grid {
        transform,
        values,
        nodata,
    })
}

fn f64_tag<R: std::io::Read + std::io::Seek>(dec: &mut Decoder<R>, tag: Tag, path: &Path) -> Result<Option<Vec<f64>>, RasterError> {
    match dec.find_tag(tag).map_err(tiff_err(path))? {
        Some(v) => Ok(Some(v.into_f64_vec().map_err(tiff_err(path))?)),
        None => Ok(None),
    }
}

// GTModelType = projected, GTRasterType = PixelIsArea.
const GEO_KEYS: [u16; 12] = [1, 1, 0, 2, 1024, 0, 1, 1, 1025, 0, 1, 1];

macro_rules! write_image {
    ($path:expr, $ct:ty, $t:expr, $data:expr, $nodata:expr) => {{
        let path: &Path = $path;
        let err = tiff_err(path);
        let t: &GeoTransform = $t;
        let file = File::create(path).map_err(|e| RasterError::io(path, e))?;
        let mut enc = TiffEncoder::new(BufWriter::new(file)).map_err(&err)?;
        let mut img = enc.new_image::<$ct>(t.cols as u32, t.rows as u32).map_err(&err)?;
        let dir = img.encoder();
        dir.write_tag(Tag::ModelPixelScaleTag, &[t.pixel_size, t.pixel_size, 0.0][..])
            .map_err(&err)?;
        dir.write_tag(
            Tag::ModelTiepointTag,
            &[0.0, 0.0, 0.0, t.origin_easting, t.origin_northing, 0.0][..],
        )
        .map_err(&err)?;
        dir.write_tag(Tag::GeoKeyDirectoryTag, &GEO_KEYS[..]).map_err(&err)?;
        dir.write_tag(Tag::GdalNodata, $nodata).map_err(&err)?;
        img.write_data($data).map_err(&err)?;
        Ok(())
    }};
}

pub(super) fn write_visibility(vs: &VisibilityRaster, path: &Path) -> Result<(), RasterError> {
    let data: Vec<u8> = vs.cells().iter().map(|c| c.code()).collect();
    write_image!(path, colortype::Gray8, &vs.transform, &data, "255")
}

/// Float32 elevations; intended for fixtures and interchange.
pub(super) fn write_dem(dem: &Dem, path: &Path) -> Result<(), RasterError> {
    let data: Vec<f32> = dem
        .elevations()
        .iter()
        .map(|v| if dem.is_nodata(*v) { dem.nodata as f32 } else { *v as f32 })
        .collect();
    let nodata = dem.nodata.to_string();
    write_image!(path, colortype::Gray32Float, &dem.transform, &data, nodata.as_str())
}
