//! ESRI ASCII grid (`.asc`).

use std::fmt::Write;

use super::{Dem, GeoTransform, Grid, RasterError, VisibilityRaster};

pub(super) fn parse(text: &str) -> Result<Grid, RasterError> {
    let mut ncols = None;
    let mut nrows = None;
    let mut x = None;
    let mut y = None;
    let mut x_center = false;
    let mut y_center = false;
    let mut cellsize = None;
    let mut dx = None;
    let mut dy = None;
    let mut nodata = None;

    let bad = |msg: String| RasterError::Malformed(msg);
    let mut lines = text.lines().peekable();
    while let Some(line) = lines.peek() {
        let mut parts = line.split_whitespace();
        let Some(key) = parts.next() else {
            lines.next();
            continue;
        };
        if key.parse::<f64>().is_ok() {
            break;
        }
        let value = parts
            .next()
            .ok_or_else(|| bad(format!("header key {key} has no value")))?;
        let num = || value.parse::<f64>().map_err(|_| bad(format!("header {key} = {value} is not a number")));
        match key.to_ascii_lowercase().as_str() {
            "ncols" => ncols = Some(num()?),
            "nrows" => nrows = Some(num()?),
            "xllcorner" => x = Some(num()?),
            "yllcorner" => y = Some(num()?),
            "xllcenter" => {
                x = Some(num()?);
                x_center = true;
            }
            "yllcenter" => {
                y = Some(num()?);
                y_center = true;
            }
            "cellsize" => cellsize = Some(num()?),
            "dx" => dx = Some(num()?),
            "dy" => dy = Some(num()?),
            "nodata_value" => nodata = Some(num()?),
            other => return Err(bad(format!("unknown header key {other}"))),
        }
        lines.next();
    }

    let count = |v: Option<f64>, name: &str| -> Result<usize, RasterError> {
        match v {
            Some(v) if v >= 1.0 && v.fract() == 0.0 => Ok(v as usize),
            Some(v) => Err(bad(format!("{name} = {v} is not a positive integer"))),
            None => Err(bad(format!("missing {name}"))),
        }
    };
    let cols = count(ncols, "ncols")?;
    let rows = count(nrows, "nrows")?;
    let size = match (cellsize, dx, dy) {
        (Some(c), _, _) => c,
        (None, Some(dx), Some(dy)) if dx == dy => dx,
        (None, Some(dx), Some(dy)) => return Err(RasterError::NonSquarePixels { x: dx, y: dy }),
        _ => return Err(bad("missing cellsize".into())),
    };
    let x = x.ok_or_else(|| bad("missing xllcorner".into()))?;
    let y = y.ok_or_else(|| bad("missing yllcorner".into()))?;
    let west = if x_center { x - size / 2.0 } else { x };
    let south = if y_center { y - size / 2.0 } else { y };
    let transform = GeoTransform::new(west, south + rows as f64 * size, size, rows, cols)?;

    let mut values = Vec::with_capacity(rows * cols);
    for line in lines {
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| bad(format!("bad cell value '{tok}'")))?;
            values.push(v);
        }
    }
    if values.len() != rows * cols {
        return Err(bad(format!("expected {} cell values, found {}", rows * cols, values.len())));
    }
    Ok(Grid {
        transform,
        values,
        nodata,
    })
}

fn header(out: &mut String, t: &GeoTransform, nodata: &str) {
    let south = t.origin_northing - t.rows as f64 * t.pixel_size;
    // Display for f64 prints the shortest text that reads back to the same value.
    let _ = writeln!(out, "ncols {}", t.cols);
    let _ = writeln!(out, "nrows {}", t.rows);
    let _ = writeln!(out, "xllcorner {}", t.origin_easting);
    let _ = writeln!(out, "yllcorner {south}");
    let _ = writeln!(out, "cellsize {}", t.pixel_size);
    let _ = writeln!(out, "NODATA_value {nodata}");
}

pub(super) fn encode_visibility(vs: &VisibilityRaster) -> String {
    let t = &vs.transform;
    let mut out = String::with_capacity(t.len() * 2 + 128);
    header(&mut out, t, "255");
    for row in vs.cells().chunks(t.cols) {
        for (i, c) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{}", c.code());
        }
        out.push('\n');
    }
    out
}

pub(super) fn encode_dem(dem: &Dem) -> String {
    let t = &dem.transform;
    let mut out = String::new();
    header(&mut out, t, &dem.nodata.to_string());
    for row in dem.elevations().chunks(t.cols) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            if dem.is_nodata(*v) {
                let _ = write!(out, "{}", dem.nodata);
            } else {
                let _ = write!(out, "{v}");
            }
        }
        out.push('\n');
    }
    out
}
