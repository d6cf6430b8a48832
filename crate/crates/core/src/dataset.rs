//! Measurement tables: per-qubit SQUID geometry and extracted noise amplitudes.
//!
//! On-disk schema (one header line, comma separated, `-` for a missing value):
//!
//! ```text
//! sample,qubit,X_um,Y_um,W_um,f01_GHz,T1_us,sqrtA_left_uPhi0,sqrtA_right_uPhi0,capacitor
//! ```
//!
//! `sample`, `qubit`, `X_um`, `Y_um` and `W_um` are required; the remaining
//! columns may be omitted from the header entirely. Values are converted to SI
//! (m, Hz, s) and flux-quantum units on load and back on write.

use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::constants::FLUX_QUANTUM;
use crate::error::{Error, Result};
use crate::geometry::{FilmParams, SquidGeometry};

pub const COLUMNS: [&str; 10] = [
    "sample",
    "qubit",
    "X_um",
    "Y_um",
    "W_um",
    "f01_GHz",
    "T1_us",
    "sqrtA_left_uPhi0",
    "sqrtA_right_uPhi0",
    "capacitor",
];

const REQUIRED: [&str; 5] = ["sample", "qubit", "X_um", "Y_um", "W_um"];
const MISSING: &str = "-";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacitorShape {
    Floating,
    Grounded,
}

impl CapacitorShape {
    pub fn as_str(self) -> &'static str {
        match self {
            CapacitorShape::Floating => "floating",
            CapacitorShape::Grounded => "grounded",
        }
    }
}

/// One measured qubit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QubitRecord {
    pub sample: String,
    pub qubit: u32,
    /// Inner horizontal side (m).
    pub inner_x: f64,
    /// Inner vertical side (m).
    pub inner_y: f64,
    /// Nominal wire width (m).
    pub width: f64,
    /// Transition frequency at the sweet spot (Hz).
    pub f01: Option<f64>,
    /// Average relaxation time (s).
    pub t1: Option<f64>,
    /// Noise amplitude √A_Φ left of the sweet spot (Φ₀).
    pub sqrt_a_left: Option<f64>,
    /// Noise amplitude √A_Φ right of the sweet spot (Φ₀).
    pub sqrt_a_right: Option<f64>,
    pub capacitor: Option<CapacitorShape>,
}

impl QubitRecord {
    pub fn geometry(&self, film: FilmParams) -> Result<SquidGeometry> {
        SquidGeometry::new(self.inner_x, self.inner_y, self.width, film)
    }

    /// Has at least one measured amplitude.
    pub fn is_fit_eligible(&self) -> bool {
        self.sqrt_a_left.is_some() || self.sqrt_a_right.is_some()
    }

    /// Measured A_Φ (Wb²): mean of the available squared amplitudes.
    pub fn measured_power(&self) -> Option<f64> {
        let values: Vec<f64> = [self.sqrt_a_left, self.sqrt_a_right]
            .into_iter()
            .flatten()
            .map(|a| (a * FLUX_QUANTUM).powi(2))
            .collect();
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<QubitRecord>> {
    let file = std::fs::File::open(path)?;
    read_dataset(file)
}

pub fn read_dataset<R: Read>(reader: R) -> Result<Vec<QubitRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut rows = rdr.records();
    let header = match rows.next() {
        None => return Ok(Vec::new()),
        Some(h) => h?,
    };
    let mut index = [None; COLUMNS.len()];
    for (pos, name) in header.iter().enumerate() {
        let col = COLUMNS
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::Schema(format!("unknown column '{name}'")))?;
        if index[col].is_some() {
            return Err(Error::Schema(format!("duplicate column '{name}'")));
        }
        index[col] = Some(pos);
    }
    for req in REQUIRED {
        let col = COLUMNS.iter().position(|c| *c == req).unwrap();
        if index[col].is_none() {
            return Err(Error::Schema(format!("missing required column '{req}'")));
        }
    }

    let mut records = Vec::new();
    for (i, row) in rows.enumerate() {
        // header is row 1
        let row_no = i + 2;
        let row = row?;
        if row.iter().all(|c| c.is_empty()) {
            continue;
        }
        if row.len() != header.len() {
            return Err(Error::Parse {
                row: row_no,
                msg: format!("expected {} fields, found {}", header.len(), row.len()),
            });
        }
        let cell = |col: usize| index[col].map(|p| &row[p]);
        let err = |msg: String| Error::Parse { row: row_no, msg };

        let number = |col: usize| -> Result<Option<f64>> {
            match cell(col) {
                None | Some(MISSING) => Ok(None),
                Some(s) => s
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(Some)
                    .ok_or_else(|| err(format!("column {}: '{s}' is not a number", COLUMNS[col]))),
            }
        };
        let required = |col: usize| -> Result<f64> {
            number(col)?.ok_or_else(|| err(format!("column {} is required", COLUMNS[col])))
        };

        let sample = cell(0).unwrap_or_default().to_string();
        let qubit = cell(1).unwrap_or_default().parse::<u32>().map_err(|_| {
            err(format!(
                "qubit '{}' is not an integer",
                cell(1).unwrap_or_default()
            ))
        })?;
        let inner_x = required(2)? * 1e-6;
        let inner_y = required(3)? * 1e-6;
        let width = required(4)? * 1e-6;
        if inner_x <= 0.0 || inner_y <= 0.0 || width <= 0.0 {
            return Err(err("geometry values must be positive".into()));
        }
        let capacitor = match cell(9) {
            None | Some(MISSING) => None,
            Some("floating") => Some(CapacitorShape::Floating),
            Some("grounded") => Some(CapacitorShape::Grounded),
            Some(other) => return Err(err(format!("unknown capacitor shape '{other}'"))),
        };
        records.push(QubitRecord {
            sample,
            qubit,
            inner_x,
            inner_y,
            width,
            f01: number(5)?.map(|v| v * 1e9),
            t1: number(6)?.map(|v| v * 1e-6),
            sqrt_a_left: number(7)?.map(|v| v * 1e-6),
            sqrt_a_right: number(8)?.map(|v| v * 1e-6),
            capacitor,
        });
    }
    Ok(records)
}

/// Decimal text for a value in display units: at most nine decimals, no
/// trailing zeros.
pub fn format_number(v: f64) -> String {
    let s = format!("{v:.9}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn opt(v: Option<f64>, scale: f64) -> String {
    v.map_or_else(|| MISSING.to_string(), |v| format_number(v * scale))
}

/// Writes records in the full ten-column schema.
pub fn write_dataset<W: Write>(writer: W, records: &[QubitRecord]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().from_writer(writer);
    wtr.write_record(COLUMNS)?;
    for r in records {
        wtr.write_record([
            r.sample.clone(),
            r.qubit.to_string(),
            format_number(r.inner_x * 1e6),
            format_number(r.inner_y * 1e6),
            format_number(r.width * 1e6),
            opt(r.f01, 1e-9),
            opt(r.t1, 1e6),
            opt(r.sqrt_a_left, 1e6),
            opt(r.sqrt_a_right, 1e6),
            r.capacitor
                .map_or_else(|| MISSING.to_string(), |c| c.as_str().to_string()),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reference amplitudes reported as a single combined value per qubit.
///
/// Schema: `qubit,X_um,Y_um,W_um,sqrtA_uPhi0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceAmplitude {
    pub qubit: u32,
    pub inner_x: f64,
    pub inner_y: f64,
    pub width: f64,
    /// √A_Φ (Φ₀).
    pub sqrt_a: f64,
}

pub fn load_reference_amplitudes(path: impl AsRef<Path>) -> Result<Vec<ReferenceAmplitude>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let expected = ["qubit", "X_um", "Y_um", "W_um", "sqrtA_uPhi0"];
    let header = rdr.headers()?.clone();
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Schema(format!(
            "expected header {}, found {}",
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 2;
        let row = row?;
        let num = |k: usize| -> Result<f64> {
            row.get(k)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Parse {
                    row: row_no,
                    msg: format!("column {} is not a number", expected[k]),
                })
        };
        out.push(ReferenceAmplitude {
            qubit: num(0)? as u32,
            inner_x: num(1)? * 1e-6,
            inner_y: num(2)? * 1e-6,
            width: num(3)? * 1e-6,
            sqrt_a: num(4)? * 1e-6,
        });
    }
    Ok(out)
}
