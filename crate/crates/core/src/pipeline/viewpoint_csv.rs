//! The viewpoint CSV handed to external GIS tools and read back by the
//! `viewshed` stage.

use std::path::Path;

use crate::localization::RoverPose;
use crate::pointing::{FovSector, Viewpoint};
use crate::Error;

pub const VIEWPOINT_CSV_HEADER: &str = "image_id,easting_m,northing_m,observer_height_m,radius_m,azimuth_left_deg,azimuth_right_deg,elevation_lower_deg,elevation_upper_deg";

const COLUMNS: usize = 9;

fn record(vp: &Viewpoint) -> [String; COLUMNS] {
    let s = &vp.sector;
    [
        vp.image_id.clone(),
        format!("{:.6}", vp.pose.easting),
        format!("{:.6}", vp.pose.northing),
        format!("{:.6}", vp.observer_height_m),
        format!("{:.6}", vp.radius_m),
        format!("{:.6}", s.azimuth_left_deg),
        format!("{:.6}", s.azimuth_right_deg),
        format!("{:.6}", s.elevation_lower_deg),
        format!("{:.6}", s.elevation_upper_deg),
    ]
}

fn writer<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::ViewpointCsv {
            path: path.display().to_string(),
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

/// One data row (no trailing newline), formatted exactly as in the file.
pub fn viewpoint_csv_row(vp: &Viewpoint) -> String {
    let mut w = writer(Vec::new());
    w.write_record(record(vp)).expect("in-memory write");
    let bytes = w.into_inner().expect("in-memory flush");
    let mut row = String::from_utf8(bytes).expect("CSV of UTF-8 fields");
    row.pop();
    row
}

/// Writes the header plus one row per viewpoint; numbers use six decimals
/// and lines end in LF.
pub fn export_viewpoint_csv(viewpoints: &[Viewpoint], path: impl AsRef<Path>) -> Result<(), Error> {
    let path = path.as_ref();
    if viewpoints.is_empty() {
        return Err(Error::EmptyInput("viewpoint list"));
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = writer(std::io::BufWriter::new(file));
    w.write_record(VIEWPOINT_CSV_HEADER.split(',')).map_err(|e| csv_error(path, e))?;
    for vp in viewpoints {
        w.write_record(record(vp)).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Parses a viewpoint CSV. A row whose left and right azimuths coincide is a
/// full circle.
pub fn read_viewpoint_csv(path: impl AsRef<Path>) -> Result<Vec<Viewpoint>, Error> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_viewpoint_csv(&text).map_err(|(line, message)| Error::ViewpointCsv {
        path: path.display().to_string(),
        line,
        message,
    })
}

fn parse_viewpoint_csv(text: &str) -> Result<Vec<Viewpoint>, (usize, String)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| (1, e.to_string()))?;
    let found: Vec<&str> = header.iter().collect();
    if found.join(",") != VIEWPOINT_CSV_HEADER {
        return Err((1, format!("unexpected header '{}'", found.join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| (line, e.to_string()))?;
        let num = |k: usize| -> Result<f64, (usize, String)> {
            let s = rec.get(k).unwrap_or_default();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| (line, format!("column {} is not a number: '{s}'", k + 1)))
        };
        let (left, right) = (num(5)?, num(6)?);
        let vp = Viewpoint {
            pose: RoverPose::at(num(1)?, num(2)?),
            sector: FovSector {
                azimuth_left_deg: left,
                azimuth_right_deg: right,
                elevation_lower_deg: num(7)?,
                elevation_upper_deg: num(8)?,
                full_circle: left == right,
            },
            observer_height_m: num(3)?,
            radius_m: num(4)?,
            image_id: rec.get(0).unwrap_or_default().to_string(),
            warnings: Vec::new(),
        };
        vp.validate().map_err(|e| (line, e.to_string()))?;
        out.push(vp);
    }
    Ok(out)
}
