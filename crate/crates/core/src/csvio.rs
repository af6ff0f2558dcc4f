//! Plain-text CSV formats shared by the plant, the campaign and the CLI.
//!
//! All writers emit LF line endings, `.` decimals and Rust's shortest
//! round-trip float formatting, so write -> read -> write is byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::doe::{DesignMatrix, FactorSpace};
use crate::error::{Error, Result};
use crate::geometry::{ClosedContour, ContourProfile};
use crate::modal::ModalCoordinates;

pub const CONTOUR_HEADER: [&str; 2] = ["theta_rad", "value_mm"];
pub const POINT_CLOUD_HEADER: [&str; 3] = ["x_mm", "y_mm", "z_mm"];
pub const MODAL_HEADER: [&str; 2] = ["mode", "lambda_mm"];

fn contour_text(samples: impl Iterator<Item = (f64, f64)>) -> String {
    let mut out = String::from("theta_rad,value_mm\n");
    for (t, v) in samples {
        writeln!(out, "{t},{v}").unwrap();
    }
    out
}

pub fn profile_to_csv(profile: &ContourProfile) -> String {
    contour_text(profile.samples())
}

pub fn contour_to_csv(contour: &ClosedContour) -> String {
    contour_text(contour.samples())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Rows of a numeric CSV together with its (trimmed) header.
pub(crate) struct NumericTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub(crate) fn parse_numeric(text: &str, origin: &str) -> Result<NumericTable> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::InvalidInput(format!(
                "{origin}: row {} has {} fields, expected {}",
                i + 1,
                record.len(),
                header.len()
            )));
        }
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    Error::InvalidInput(format!("{origin}: row {}: bad number {f:?}", i + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(NumericTable { header, rows })
}

/// Reads `(theta, value)` pairs from a contour CSV file.
pub fn read_contour_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = read_text(path)?;
    let table = parse_numeric(&text, &path.display().to_string())?;
    if table.header != CONTOUR_HEADER {
        return Err(Error::InvalidInput(format!(
            "{}: expected header {:?}, found {:?}",
            path.display(),
            CONTOUR_HEADER.join(","),
            table.header.join(",")
        )));
    }
    Ok(table.rows.into_iter().map(|r| (r[0], r[1])).collect())
}

pub fn modal_to_csv(coords: &ModalCoordinates) -> String {
    let mut out = String::from("mode,lambda_mm\n");
    for (i, l) in coords.lambda.iter().enumerate() {
        writeln!(out, "{},{l}", i + 1).unwrap();
    }
    writeln!(out, "residue,{}", coords.residue).unwrap();
    out
}

pub fn design_to_csv(design: &DesignMatrix, space: &FactorSpace) -> String {
    let mut out = String::from("run,role");
    for f in &space.factors {
        write!(out, ",{}", f.name).unwrap();
    }
    out.push('\n');
    for (i, point) in design.points.iter().enumerate() {
        write!(out, "{},{}", i + 1, point.role).unwrap();
        for v in space.to_physical(&point.coords) {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modal::ModalCoordinates;

    #[test]
    fn modal_csv_layout() {
        let c = ModalCoordinates {
            lambda: vec![0.5, -1.0, 0.0, 0.25, 2.0],
            residue: 0.001,
        };
        assert_eq!(
            modal_to_csv(&c),
            "mode,lambda_mm\n1,0.5\n2,-1\n3,0\n4,0.25\n5,2\nresidue,0.001\n"
        );
    }

    #[test]
    fn contour_csv_round_trip_is_exact() {
        let p = ContourProfile::from_fn(16, |t| 35.0 + 0.3 * (4.0 * t).cos()).unwrap();
        let text = profile_to_csv(&p);
        assert!(text.starts_with("theta_rad,value_mm\n"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        write_text(&path, &text).unwrap();
        let rows = read_contour_csv(&path).unwrap();
        let (t, h): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
        let back = ContourProfile::new(t, h).unwrap();
        assert_eq!(back, p);
        assert_eq!(profile_to_csv(&back), text);
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        write_text(&path, "angle,h\n0,1\n").unwrap();
        assert!(read_contour_csv(&path).is_err());
    }
}
