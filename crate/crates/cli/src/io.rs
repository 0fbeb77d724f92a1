//! CSV and JSON artifacts. Floats are written with 17 significant digits so
//! that they read back bit-exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use eit_core::forward::SensitivityTensor;
use eit_core::inference::Chain;
use eit_core::statmodel::{Dataset, Observation};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::CliError;

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    Ok(csv::WriterBuilder::new().from_writer(create(path)?))
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(path, e))
}

/// `M` rows of `M` values, no header.
pub fn write_matrix(path: &Path, g: &DMatrix<f64>) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(create(path)?);
    for r in 0..g.nrows() {
        w.write_record(g.row(r).iter().map(|v| float(*v))).map_err(|e| CliError::io(path, e))?;
    }
    finish(w, path)
}

/// Columns `i,j,k,value`, indices 1-based.
pub fn write_sensitivity(path: &Path, s: &SensitivityTensor) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record(["i", "j", "k", "value"]).map_err(|e| CliError::io(path, e))?;
    for k in 0..s.regions() {
        for i in 0..s.electrodes() {
            for j in 0..s.electrodes() {
                let rec = [(i + 1).to_string(), (j + 1).to_string(), (k + 1).to_string(), float(s.get(i, j, k))];
                w.write_record(&rec).map_err(|e| CliError::io(path, e))?;
            }
        }
    }
    finish(w, path)
}

/// Columns `i,x,y_1..y_M`; `i` and `x` are 1-based.
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["i".to_string(), "x".to_string()];
    header.extend((1..=data.electrodes).map(|j| format!("y_{j}")));
    w.write_record(&header).map_err(|e| CliError::io(path, e))?;
    for (i, o) in data.observations.iter().enumerate() {
        let mut rec = vec![(i + 1).to_string(), (o.x + 1).to_string()];
        rec.extend(o.y.iter().map(|v| float(*v)));
        w.write_record(&rec).map_err(|e| CliError::io(path, e))?;
    }
    finish(w, path)
}

pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let bad = |message: String| CliError::Input { path: path.to_path_buf(), message };
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.len() < 3 || &header[0] != "i" || &header[1] != "x" {
        return Err(bad("expected header i,x,y_1..y_M".into()));
    }
    let m = header.len() - 2;
    let mut observations = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let row = line + 2;
        let x: usize = rec[1].parse().map_err(|e| bad(format!("row {row}: x: {e}")))?;
        if x == 0 {
            return Err(bad(format!("row {row}: electrode indices are 1-based")));
        }
        let y = (2..rec.len())
            .map(|c| rec[c].parse::<f64>().map_err(|e| bad(format!("row {row}: {}: {e}", &header[c]))))
            .collect::<Result<Vec<_>, _>>()?;
        observations.push(Observation { x: x - 1, y });
    }
    Dataset::new(m, observations).map_err(|e| bad(e.to_string()))
}

/// Columns `iter,theta_1..theta_D,log_post`.
pub fn write_chain(path: &Path, chain: &Chain) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["iter".to_string()];
    header.extend((1..=chain.dim()).map(|k| format!("theta_{k}")));
    header.push("log_post".into());
    w.write_record(&header).map_err(|e| CliError::io(path, e))?;
    for ((it, s), lp) in chain.iterations.iter().zip(&chain.samples).zip(&chain.log_posts) {
        let mut rec = vec![it.to_string()];
        rec.extend(s.iter().map(|v| float(*v)));
        rec.push(float(*lp));
        w.write_record(&rec).map_err(|e| CliError::io(path, e))?;
    }
    finish(w, path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, f64::MAX, 5e-324, 0.0] {
            assert_eq!(float(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.csv");
        let data = Dataset::new(
            3,
            vec![Observation { x: 2, y: vec![0.1, -1.0 / 3.0, 7.0] }, Observation { x: 0, y: vec![1e-17, 0.0, -2.0] }],
        )
        .unwrap();
        write_dataset(&path, &data).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("i,x,y_1,y_2,y_3\n1,3,"));
        assert_eq!(read_dataset(&path).unwrap(), data);
    }

    #[test]
    fn malformed_dataset_is_an_input_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.csv");
        std::fs::write(&path, "i,x,y_1\n1,0,0.5\n").unwrap();
        assert!(matches!(read_dataset(&path), Err(CliError::Input { .. })));
        std::fs::write(&path, "i,x,y_1\n1,1,abc\n").unwrap();
        assert!(matches!(read_dataset(&path), Err(CliError::Input { .. })));
    }
}
