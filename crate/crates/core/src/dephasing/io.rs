//! On-disk layout of a spectroscopy dataset:
//!
//! - `spectrum.csv`: `flux_phi0,omega_rad_per_s,sigma_rad_per_s`
//! - `traces.csv`: `trace,flux_phi0,t1_guess_s`
//! - `trace_<k>.csv` for each listed trace: `t_s,population,sigma`

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::fit::{DecayTrace, SpectrumPoint};
use super::synth::{SynthesizedDataset, TraceInput};
use crate::error::{Error, Result};

pub const SPECTRUM_HEADER: [&str; 3] = ["flux_phi0", "omega_rad_per_s", "sigma_rad_per_s"];
pub const INDEX_HEADER: [&str; 3] = ["trace", "flux_phi0", "t1_guess_s"];
pub const TRACE_HEADER: [&str; 3] = ["t_s", "population", "sigma"];

/// Rows of a headed CSV whose cells are all numbers. Rows are numbered with
/// the header as row 1.
fn read_numeric<R: Read, const N: usize>(
    reader: R,
    header: &[&str; N],
    name: &str,
) -> Result<Vec<[f64; N]>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut rows = rdr.records();
    let got = rows
        .next()
        .ok_or_else(|| Error::Schema(format!("{name}: empty file")))??;
    if got.iter().ne(header.iter().copied()) {
        return Err(Error::Schema(format!(
            "{name}: expected header '{}', found '{}'",
            header.join(","),
            got.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, row) in rows.enumerate() {
        let row_no = i + 2;
        let row = row?;
        if row.iter().all(|c| c.is_empty()) {
            continue;
        }
        if row.len() != N {
            return Err(Error::Parse {
                row: row_no,
                msg: format!("{name}: expected {N} fields, found {}", row.len()),
            });
        }
        let mut vals = [0.0; N];
        for (k, cell) in row.iter().enumerate() {
            vals[k] = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    row: row_no,
                    msg: format!("{name}: column {}: '{cell}' is not a number", header[k]),
                })?;
        }
        out.push(vals);
    }
    Ok(out)
}

fn open(dir: &Path, file: &str) -> Result<File> {
    File::open(dir.join(file)).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", dir.join(file).display()),
        ))
    })
}

pub fn read_spectrum<R: Read>(reader: R) -> Result<Vec<SpectrumPoint>> {
    Ok(read_numeric(reader, &SPECTRUM_HEADER, "spectrum.csv")?
        .into_iter()
        .map(|[flux, omega, sigma_omega]| SpectrumPoint {
            flux,
            omega,
            sigma_omega,
        })
        .collect())
}

pub fn read_trace<R: Read>(reader: R, flux: f64, name: &str) -> Result<DecayTrace> {
    let rows = read_numeric(reader, &TRACE_HEADER, name)?;
    Ok(DecayTrace {
        flux,
        times: rows.iter().map(|r| r[0]).collect(),
        populations: rows.iter().map(|r| r[1]).collect(),
        sigma: rows.iter().map(|r| r[2]).collect(),
    })
}

pub fn trace_file_name(k: usize) -> String {
    format!("trace_{k}.csv")
}

/// Loads the spectrum and all traces listed in `traces.csv` under `dir`.
pub fn read_dataset_dir(dir: &Path) -> Result<SynthesizedDataset> {
    let spectrum = read_spectrum(open(dir, "spectrum.csv")?)?;
    let index = read_numeric(open(dir, "traces.csv")?, &INDEX_HEADER, "traces.csv")?;
    let mut traces = Vec::with_capacity(index.len());
    for (i, [id, flux, t1_guess]) in index.into_iter().enumerate() {
        if id < 0.0 || id.fract() != 0.0 {
            return Err(Error::Parse {
                row: i + 2,
                msg: format!("traces.csv: trace id '{id}' is not a non-negative integer"),
            });
        }
        let name = trace_file_name(id as usize);
        let trace = read_trace(open(dir, &name)?, flux, &name)?;
        traces.push(TraceInput { trace, t1_guess });
    }
    Ok(SynthesizedDataset { spectrum, traces })
}

fn create(dir: &Path, file: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(file))?))
}

pub fn write_spectrum<W: Write>(mut w: W, spectrum: &[SpectrumPoint]) -> Result<()> {
    writeln!(w, "{}", SPECTRUM_HEADER.join(","))?;
    for p in spectrum {
        writeln!(w, "{:e},{:e},{:e}", p.flux, p.omega, p.sigma_omega)?;
    }
    Ok(())
}

pub fn write_trace<W: Write>(mut w: W, trace: &DecayTrace) -> Result<()> {
    writeln!(w, "{}", TRACE_HEADER.join(","))?;
    for ((t, p), s) in trace.times.iter().zip(&trace.populations).zip(&trace.sigma) {
        writeln!(w, "{t:e},{p:e},{s:e}")?;
    }
    Ok(())
}

/// Writes `data` in the directory layout read by [`read_dataset_dir`].
pub fn write_dataset_dir(dir: &Path, data: &SynthesizedDataset) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = create(dir, "spectrum.csv")?;
    write_spectrum(&mut w, &data.spectrum)?;
    w.flush()?;
    let mut index = create(dir, "traces.csv")?;
    writeln!(index, "{}", INDEX_HEADER.join(","))?;
    for (k, t) in data.traces.iter().enumerate() {
        writeln!(index, "{k},{:e},{:e}", t.trace.flux, t.t1_guess)?;
        let mut w = create(dir, &trace_file_name(k))?;
        write_trace(&mut w, &t.trace)?;
        w.flush()?;
    }
    index.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dephasing::{synthesize_qubit_dataset, SamplingPlan, SynthesisTruth};

    #[test]
    fn directory_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let data =
            synthesize_qubit_dataset(&SynthesisTruth::default(), &SamplingPlan::default(), 5)
                .unwrap();
        write_dataset_dir(dir.path(), &data).unwrap();
        let back = read_dataset_dir(dir.path()).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn malformed_trace_names_row() {
        let text = "t_s,population,sigma\n0,0.9,0.01\n1e-7,abc,0.01\n";
        match read_trace(text.as_bytes(), 0.5, "trace_0.csv") {
            Err(Error::Parse { row, msg }) => {
                assert_eq!(row, 3);
                assert!(msg.contains("trace_0.csv") && msg.contains("population"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_header_rejected() {
        let text = "flux,omega,sigma\n0.5,1,1\n";
        assert!(matches!(
            read_spectrum(text.as_bytes()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn missing_trace_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("spectrum.csv"),
            "flux_phi0,omega_rad_per_s,sigma_rad_per_s\n",
        )
        .unwrap();
        std::fs::write(
            dir.path().join("traces.csv"),
            "trace,flux_phi0,t1_guess_s\n0,0.51,2e-5\n",
        )
        .unwrap();
        assert!(matches!(read_dataset_dir(dir.path()), Err(Error::Io(_))));
    }
}
