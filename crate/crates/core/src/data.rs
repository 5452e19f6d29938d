//! Sample containers, summary statistics and CSV ingestion.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{ElError, Result};

/// Smallest/largest covariance eigenvalue ratio below which a sample is
/// treated as rank deficient.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Dense row-major matrix: one observation per row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMatrix {
    values: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl RowMatrix {
    pub fn new(values: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(ElError::DimensionMismatch(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                values.len()
            )));
        }
        Ok(Self { values, rows, cols })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(ElError::DimensionMismatch(format!(
                    "row {i} has {} columns, expected {cols}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Ok(Self { values, rows: rows.len(), cols })
    }

    /// Single-column matrix from scalar observations.
    pub fn column(values: &[f64]) -> Self {
        Self { values: values.to_vec(), rows: values.len(), cols: 1 }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.cols.max(1))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Applies `f` to every row, producing a matrix with `out_cols` columns.
    pub fn map_rows(&self, out_cols: usize, mut f: impl FnMut(&[f64], &mut [f64])) -> Self {
        let mut values = vec![0.0; self.rows * out_cols];
        for (src, dst) in self.iter_rows().zip(values.chunks_exact_mut(out_cols.max(1))) {
            f(src, dst);
        }
        Self { values, rows: self.rows, cols: out_cols }
    }

    /// Rows selected by index, with repetition allowed.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Self { values, rows: idx.len(), cols: self.cols }
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.cols];
        for row in self.iter_rows() {
            for (acc, v) in mean.iter_mut().zip(row) {
                *acc += v;
            }
        }
        let inv = 1.0 / self.rows as f64;
        mean.iter_mut().for_each(|v| *v *= inv);
        mean
    }

    /// Sample covariance with the `rows - 1` denominator.
    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.cols;
        let mean = self.column_means();
        let mut cov = DMatrix::zeros(d, d);
        for row in self.iter_rows() {
            for a in 0..d {
                let da = row[a] - mean[a];
                for b in 0..=a {
                    cov[(a, b)] += da * (row[b] - mean[b]);
                }
            }
        }
        let denom = (self.rows.max(2) - 1) as f64;
        for a in 0..d {
            for b in 0..=a {
                let v = cov[(a, b)] / denom;
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        cov
    }

    /// Reads a CSV file with one observation per row. A first row containing
    /// any non-numeric field is treated as a header and skipped.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| ElError::Io(format!("{}: {e}", path.display())))?;
        Self::parse_csv(file).map_err(|e| match e {
            ElError::InvalidData(msg) => ElError::InvalidData(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| ElError::InvalidData(e.to_string()))?;
            if record.iter().all(|f| f.is_empty()) {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> =
                record.iter().map(|f| f.parse::<f64>()).collect();
            match parsed {
                Ok(row) => rows.push(row),
                Err(_) if line == 0 => continue,
                Err(e) => {
                    return Err(ElError::InvalidData(format!("line {}: {e}", line + 1)));
                }
            }
        }
        if rows.is_empty() {
            return Err(ElError::InvalidData("no observations".into()));
        }
        Self::from_rows(&rows)
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for row in self.iter_rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Two independent samples of `d`-dimensional observations.
///
/// Holds `X` (m rows) and `Y` (n rows) together with the sample means and
/// mean-centred copies used by the solvers.
#[derive(Debug, Clone)]
pub struct TwoSampleData {
    x: RowMatrix,
    y: RowMatrix,
    mean_x: Vec<f64>,
    mean_y: Vec<f64>,
    pub(crate) xc: RowMatrix,
    pub(crate) yc: RowMatrix,
    pub(crate) scale: f64,
}

impl TwoSampleData {
    pub fn new(x: RowMatrix, y: RowMatrix) -> Result<Self> {
        let d = x.cols();
        if d == 0 {
            return Err(ElError::InvalidData("observations must have at least one column".into()));
        }
        if y.cols() != d {
            return Err(ElError::DimensionMismatch(format!(
                "X has {d} columns but Y has {}",
                y.cols()
            )));
        }
        if x.rows() <= d || y.rows() <= d {
            return Err(ElError::InvalidData(format!(
                "each sample needs more than d = {d} rows (m = {}, n = {})",
                x.rows(),
                y.rows()
            )));
        }
        if !x.as_slice().iter().chain(y.as_slice()).all(|v| v.is_finite()) {
            return Err(ElError::InvalidData("non-finite entry".into()));
        }
        let mean_x = x.column_means();
        let mean_y = y.column_means();
        let xc = x.map_rows(d, |r, out| {
            for k in 0..d {
                out[k] = r[k] - mean_x[k];
            }
        });
        let yc = y.map_rows(d, |r, out| {
            for k in 0..d {
                out[k] = r[k] - mean_y[k];
            }
        });
        let scale = xc
            .as_slice()
            .iter()
            .chain(yc.as_slice())
            .fold(0.0_f64, |acc, v| acc.max(v.abs()));
        Ok(Self { x, y, mean_x, mean_y, xc, yc, scale: if scale > 0.0 { scale } else { 1.0 } })
    }

    /// Convenience constructor for scalar observations.
    pub fn univariate(x: &[f64], y: &[f64]) -> Result<Self> {
        Self::new(RowMatrix::column(x), RowMatrix::column(y))
    }

    pub fn x(&self) -> &RowMatrix {
        &self.x
    }

    pub fn y(&self) -> &RowMatrix {
        &self.y
    }

    pub fn m(&self) -> usize {
        self.x.rows()
    }

    pub fn n(&self) -> usize {
        self.y.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    /// `N = m + n`.
    pub fn total(&self) -> usize {
        self.m() + self.n()
    }

    pub fn f_m(&self) -> f64 {
        self.total() as f64 / self.m() as f64
    }

    pub fn f_n(&self) -> f64 {
        self.total() as f64 / self.n() as f64
    }

    pub fn mean_x(&self) -> &[f64] {
        &self.mean_x
    }

    pub fn mean_y(&self) -> &[f64] {
        &self.mean_y
    }

    /// The maximum empirical likelihood estimate `Ȳ − X̄`.
    pub fn mele(&self) -> Vec<f64> {
        self.mean_y.iter().zip(&self.mean_x).map(|(y, x)| y - x).collect()
    }

    /// Largest absolute centred coordinate; the natural length unit of the data.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub(crate) fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.d() {
            return Err(ElError::DimensionMismatch(format!(
                "theta has length {} but data have d = {}",
                theta.len(),
                self.d()
            )));
        }
        if !theta.iter().all(|v| v.is_finite()) {
            return Err(ElError::Domain("theta must be finite".into()));
        }
        Ok(())
    }
}

/// Sample summaries and the full-rank check on both covariances.
#[derive(Debug, Clone)]
pub struct DataDiagnostics {
    pub mean_x: Vec<f64>,
    pub mean_y: Vec<f64>,
    pub mele: Vec<f64>,
    pub cov_x: DMatrix<f64>,
    pub cov_y: DMatrix<f64>,
    pub rank_ok: bool,
}

pub fn compute_diagnostics(data: &TwoSampleData) -> DataDiagnostics {
    compute_diagnostics_with_tol(data, DEFAULT_RANK_TOL)
}

pub fn compute_diagnostics_with_tol(data: &TwoSampleData, rank_tol: f64) -> DataDiagnostics {
    let cov_x = data.x().covariance();
    let cov_y = data.y().covariance();
    let rank_ok = full_rank(&cov_x, rank_tol) && full_rank(&cov_y, rank_tol);
    DataDiagnostics {
        mean_x: data.mean_x().to_vec(),
        mean_y: data.mean_y().to_vec(),
        mele: data.mele(),
        cov_x,
        cov_y,
        rank_ok,
    }
}

fn full_rank(cov: &DMatrix<f64>, rank_tol: f64) -> bool {
    let eig = SymmetricEigen::new(cov.clone());
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    max > 0.0 && min > rank_tol * max
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mele_of_triangles() {
        let x = RowMatrix::from_rows(&[[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]]).unwrap();
        let y = RowMatrix::from_rows(&[[4.0, 4.0], [6.0, 4.0], [4.0, 6.0]]).unwrap();
        let data = TwoSampleData::new(x, y).unwrap();
        let diag = compute_diagnostics(&data);
        assert!((diag.mele[0] - 4.0).abs() < 1e-15);
        assert!((diag.mele[1] - 4.0).abs() < 1e-15);
        assert!(diag.rank_ok);
    }

    #[test]
    fn identical_samples_have_zero_mele() {
        let rows = [[1.0, 2.0], [3.0, -1.0], [0.5, 0.25], [2.0, 2.0]];
        let x = RowMatrix::from_rows(&rows).unwrap();
        let data = TwoSampleData::new(x.clone(), x).unwrap();
        assert!(compute_diagnostics(&data).mele.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn constant_sample_is_rank_deficient() {
        let data = TwoSampleData::univariate(&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0]).unwrap();
        let diag = compute_diagnostics(&data);
        assert_eq!(diag.cov_x[(0, 0)], 0.0);
        assert!(!diag.rank_ok);
    }

    #[test]
    fn derived_constants() {
        let data = TwoSampleData::univariate(&[0.0, 1.0, 2.0, 5.0], &[2.0, 3.0]).unwrap();
        assert_eq!(data.total(), 6);
        assert_eq!(data.f_m(), 6.0 / 4.0);
        assert_eq!(data.f_n(), 3.0);
    }

    #[test]
    fn rejects_too_few_rows_and_mismatch() {
        assert!(matches!(
            TwoSampleData::univariate(&[1.0], &[1.0, 2.0]),
            Err(ElError::InvalidData(_))
        ));
        let x = RowMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]]).unwrap();
        let y = RowMatrix::from_rows(&[[0.0, 1.0, 2.0], [1.0, 0.0, 2.0], [2.0, 2.0, 2.0], [1.0, 1.0, 1.0]])
            .unwrap();
        assert!(matches!(TwoSampleData::new(x, y), Err(ElError::DimensionMismatch(_))));
        assert!(TwoSampleData::univariate(&[0.0, f64::NAN], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn csv_with_and_without_header() {
        let with = "a,b\n1,2\n3.5,4e-1\n";
        let m = RowMatrix::parse_csv(with.as_bytes()).unwrap();
        assert_eq!(m.rows(), 2);
        assert_eq!(m.row(1), &[3.5, 0.4]);
        let without = "1,2\n3,4\n5,6\n";
        assert_eq!(RowMatrix::parse_csv(without.as_bytes()).unwrap().rows(), 3);
        assert!(RowMatrix::parse_csv("1,2\nx,4\n".as_bytes()).is_err());
        assert!(RowMatrix::parse_csv("1,2\n3\n".as_bytes()).is_err());
    }
}
