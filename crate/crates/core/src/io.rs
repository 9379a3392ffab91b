//! Dense matrix I/O.
//!
//! Two formats are supported:
//!
//! * CSV, row-major, one matrix per file, optional header row of variable
//!   names (detected when the first record does not parse as numbers);
//! * a JSON container `{"p": int, "K": int, "matrices": [[[row], ...], ...]}`.
//!
//! Numbers are written as shortest round-trip decimals in both formats.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{JeekError, Result};
use crate::kw_norm::{KnowledgeWeights, PrecisionDecomposition};
use crate::simgen::{GroundTruth, TruthMetadata};
use crate::Matrix;

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(JeekError::Parse("ragged matrix rows".into()));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixContainer {
    pub p: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub matrices: Vec<Vec<Vec<f64>>>,
}

impl MatrixContainer {
    pub fn from_matrices(p: usize, k: usize, ms: &[Matrix]) -> Self {
        Self { p, k, matrices: ms.iter().map(matrix_to_rows).collect() }
    }

    pub fn to_matrices(&self) -> Result<Vec<Matrix>> {
        self.matrices
            .iter()
            .map(|rows| {
                let m = rows_to_matrix(rows)?;
                if m.ncols() != self.p {
                    return Err(JeekError::Shape(format!(
                        "container declares p = {} but a matrix has {} columns",
                        self.p,
                        m.ncols()
                    )));
                }
                Ok(m)
            })
            .collect()
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Reads a CSV matrix; returns the header names if the first row is not numeric.
pub fn read_csv_matrix(path: &Path) -> Result<(Matrix, Option<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(r) => rows.push(r),
            Err(_) if idx == 0 => header = Some(record.iter().map(String::from).collect()),
            Err(e) => {
                return Err(JeekError::Parse(format!("{}: line {}: {}", path.display(), idx + 1, e)));
            }
        }
    }
    let m = rows_to_matrix(&rows).map_err(|e| JeekError::Parse(format!("{}: {}", path.display(), e)))?;
    if let Some(h) = &header {
        if h.len() != m.ncols() && !rows.is_empty() {
            return Err(JeekError::Parse(format!(
                "{}: header has {} names for {} columns",
                path.display(),
                h.len(),
                m.ncols()
            )));
        }
    }
    Ok((m, header))
}

pub fn write_csv_matrix(path: &Path, m: &Matrix, header: Option<&[String]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if let Some(h) = header {
        w.write_record(h)?;
    }
    for row in m.row_iter() {
        w.write_record(row.iter().map(|x| format!("{:?}", x)))?;
    }
    w.flush()?;
    Ok(())
}

/// Weights as a container of K + 1 matrices: the K individual ones, then `W_S`.
pub fn weights_to_container(w: &KnowledgeWeights) -> MatrixContainer {
    let mut ms = w.individual().to_vec();
    ms.push(w.shared().clone());
    MatrixContainer::from_matrices(w.p(), w.k(), &ms)
}

pub fn weights_from_container(c: &MatrixContainer) -> Result<KnowledgeWeights> {
    let mut ms = c.to_matrices()?;
    if ms.len() != c.k + 1 {
        return Err(JeekError::Shape(format!(
            "weights container with K = {} must hold {} matrices, found {}",
            c.k,
            c.k + 1,
            ms.len()
        )));
    }
    let shared = ms.pop().expect("nonempty");
    KnowledgeWeights::new(ms, shared)
}

/// Serialized estimator output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateFile {
    pub p: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub lambda: f64,
    pub v_used: f64,
    pub omega_individual: Vec<Vec<Vec<f64>>>,
    pub omega_shared: Vec<Vec<f64>>,
    pub omega_total: Vec<Vec<Vec<f64>>>,
}

impl EstimateFile {
    pub fn new(decomp: &PrecisionDecomposition, lambda: f64, v_used: f64) -> Self {
        Self {
            p: decomp.p(),
            k: decomp.k(),
            lambda,
            v_used,
            omega_individual: decomp.omega_individual.iter().map(matrix_to_rows).collect(),
            omega_shared: matrix_to_rows(&decomp.omega_shared),
            omega_total: decomp.totals().iter().map(matrix_to_rows).collect(),
        }
    }

    pub fn decomposition(&self) -> Result<PrecisionDecomposition> {
        PrecisionDecomposition::new(
            self.omega_individual.iter().map(|r| rows_to_matrix(r)).collect::<Result<_>>()?,
            rows_to_matrix(&self.omega_shared)?,
        )
    }
}

/// Serialized ground truth: metadata plus the decomposition, with `δ`
/// already on the shared diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub metadata: TruthMetadata,
    pub omega_individual: Vec<Vec<Vec<f64>>>,
    pub omega_shared: Vec<Vec<f64>>,
}

impl TruthFile {
    pub fn new(truth: &GroundTruth) -> Self {
        Self {
            metadata: truth.metadata.clone(),
            omega_individual: truth.decomp.omega_individual.iter().map(matrix_to_rows).collect(),
            omega_shared: matrix_to_rows(&truth.decomp.omega_shared),
        }
    }

    pub fn ground_truth(&self) -> Result<GroundTruth> {
        let decomp = PrecisionDecomposition::new(
            self.omega_individual.iter().map(|r| rows_to_matrix(r)).collect::<Result<_>>()?,
            rows_to_matrix(&self.omega_shared)?,
        )?;
        GroundTruth::new(decomp, self.metadata.delta, self.metadata.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn csv_header_detection() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "a, b\n1,2\n3,4.5\n").unwrap();
        let (m, h) = read_csv_matrix(&path).unwrap();
        assert_eq!(h.unwrap(), vec!["a", "b"]);
        assert_eq!(m, Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.5]));

        std::fs::write(&path, "1,2\n3\n").unwrap();
        assert!(read_csv_matrix(&path).is_err());
        std::fs::write(&path, "1,2\nx,3\n").unwrap();
        assert!(read_csv_matrix(&path).is_err());
    }

    #[test]
    fn csv_uses_shortest_decimal() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = Matrix::from_row_slice(1, 3, &[0.1, 1.0 / 3.0, -2.5e-17]);
        write_csv_matrix(&path, &m, None).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "0.1,0.3333333333333333,-2.5e-17\n");
        assert_eq!(read_csv_matrix(&path).unwrap().0, m);
    }

    #[test]
    fn container_shape_checks() {
        let c = MatrixContainer { p: 3, k: 1, matrices: vec![vec![vec![1.0, 2.0]]] };
        assert!(c.to_matrices().is_err());
        let w = KnowledgeWeights::ones(2, 2);
        let mut c = weights_to_container(&w);
        assert_eq!(c.matrices.len(), 3);
        assert_eq!(weights_from_container(&c).unwrap(), w);
        c.matrices.pop();
        assert!(weights_from_container(&c).is_err());
    }

    #[test]
    fn container_json_keys() {
        let c = MatrixContainer::from_matrices(2, 1, &[Matrix::identity(2, 2)]);
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, r#"{"p":2,"K":1,"matrices":[[[1.0,0.0],[0.0,1.0]]]}"#);
    }

    #[test]
    fn truth_round_trip() {
        let t = crate::simgen::gen_perturbed(12, 2, 0.1, 5).unwrap();
        let text = serde_json::to_string(&TruthFile::new(&t)).unwrap();
        let back = serde_json::from_str::<TruthFile>(&text).unwrap().ground_truth().unwrap();
        assert_eq!(back.decomp, t.decomp);
        assert_eq!(back.metadata, t.metadata);
        assert_eq!(back.delta, t.delta);
    }

    proptest! {
        #[test]
        fn json_and_csv_round_trip(v in proptest::collection::vec(-1e6f64..1e6, 12)) {
            let m = Matrix::from_vec(3, 4, v);
            let c = MatrixContainer::from_matrices(4, 1, std::slice::from_ref(&m));
            let back: MatrixContainer = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
            prop_assert_eq!(&back.to_matrices().unwrap()[0], &m);

            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("m.csv");
            write_csv_matrix(&path, &m, None).unwrap();
            prop_assert_eq!(read_csv_matrix(&path).unwrap().0, m);
        }
    }
}
