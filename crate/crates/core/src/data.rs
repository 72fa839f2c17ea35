//! Row-major real-valued data matrix with a missingness mask.

use std::io::Read;
use std::path::Path;

use crate::error::{ClamrError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    p: usize,
    values: Vec<f64>,
    missing: Vec<bool>,
    feature_names: Vec<String>,
}

impl Dataset {
    /// `values` is row-major `n x p`; entries flagged in `missing` are ignored
    /// and stored as zero.
    pub fn new(
        n: usize,
        p: usize,
        mut values: Vec<f64>,
        missing: Vec<bool>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(ClamrError::Data("need at least one row and one column".into()));
        }
        if values.len() != n * p || missing.len() != n * p {
            return Err(ClamrError::Data(format!(
                "expected {} cells, got {} values and {} mask entries",
                n * p,
                values.len(),
                missing.len()
            )));
        }
        if feature_names.len() != p {
            return Err(ClamrError::Data(format!(
                "{} feature names for {p} columns",
                feature_names.len()
            )));
        }
        for (idx, (v, &m)) in values.iter_mut().zip(&missing).enumerate() {
            if m {
                *v = 0.0;
            } else if !v.is_finite() {
                return Err(ClamrError::Data(format!(
                    "non-finite value at row {}, column `{}`",
                    idx / p + 1,
                    feature_names[idx % p]
                )));
            }
        }
        for j in 0..p {
            if (0..n).all(|i| missing[i * p + j]) {
                return Err(ClamrError::Data(format!(
                    "feature `{}` is entirely missing",
                    feature_names[j]
                )));
            }
        }
        Ok(Self {
            n,
            p,
            values,
            missing,
            feature_names,
        })
    }

    /// Complete data from rows of equal length.
    pub fn from_rows(rows: &[Vec<f64>], feature_names: Vec<String>) -> Result<Self> {
        let n = rows.len();
        let p = feature_names.len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(ClamrError::Data("ragged rows".into()));
        }
        let values: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(n, p, values, vec![false; n * p], feature_names)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p + j]
    }

    #[inline]
    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.missing[i * self.p + j]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        (!self.is_missing(i, j)).then(|| self.value(i, j))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn missing_mask(&self) -> &[bool] {
        &self.missing
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }

    /// `(row, column)` of every missing cell in row-major order.
    pub fn missing_cells(&self) -> Vec<(usize, usize)> {
        self.missing
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(idx, _)| (idx / self.p, idx % self.p))
            .collect()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    /// Keeps only the listed columns, in the listed order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&bad) = cols.iter().find(|&&j| j >= self.p) {
            return Err(ClamrError::Data(format!("column index {bad} out of range")));
        }
        let q = cols.len();
        let mut values = Vec::with_capacity(self.n * q);
        let mut missing = Vec::with_capacity(self.n * q);
        for i in 0..self.n {
            for &j in cols {
                values.push(self.value(i, j));
                missing.push(self.is_missing(i, j));
            }
        }
        let names = cols.iter().map(|&j| self.feature_names[j].clone()).collect();
        Self::new(self.n, q, values, missing, names)
    }

    /// Per-feature mean and standard deviation over observed entries.
    pub fn column_moments(&self) -> Vec<(f64, f64)> {
        (0..self.p)
            .map(|j| {
                let obs: Vec<f64> = (0..self.n).filter_map(|i| self.get(i, j)).collect();
                let m = obs.len() as f64;
                let mean = obs.iter().sum::<f64>() / m;
                let var = if obs.len() > 1 {
                    obs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)
                } else {
                    0.0
                };
                (mean, var.sqrt())
            })
            .collect()
    }

    /// Centres and scales each feature to mean 0, sd 1 over observed entries.
    /// Returns the standardized data and the `(mean, sd)` pairs used.
    pub fn standardized(&self) -> (Self, Vec<(f64, f64)>) {
        let moments: Vec<(f64, f64)> = self
            .column_moments()
            .into_iter()
            .map(|(m, s)| (m, if s > 0.0 { s } else { 1.0 }))
            .collect();
        let mut out = self.clone();
        for i in 0..self.n {
            for (j, &(m, s)) in moments.iter().enumerate() {
                if !self.is_missing(i, j) {
                    out.values[i * self.p + j] = (self.value(i, j) - m) / s;
                }
            }
        }
        (out, moments)
    }

    /// Parses CSV with a header row of feature names; empty cells are missing.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let p = names.len();
        let mut values = Vec::new();
        let mut missing = Vec::new();
        let mut n = 0;
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != p {
                return Err(ClamrError::Data(format!(
                    "row {} has {} fields, header has {p}",
                    row + 1,
                    record.len()
                )));
            }
            for (j, field) in record.iter().enumerate() {
                let field = field.trim();
                if field.is_empty() {
                    values.push(0.0);
                    missing.push(true);
                } else {
                    let v: f64 = field.parse().map_err(|_| {
                        ClamrError::Data(format!(
                            "row {}, column `{}`: `{field}` is not a number",
                            row + 1,
                            names[j]
                        ))
                    })?;
                    values.push(v);
                    missing.push(false);
                }
            }
            n += 1;
        }
        Self::new(n, p, values, missing, names)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(std::io::BufReader::new(file))
    }

    /// Writes the data back as CSV, missing cells left empty.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.feature_names)?;
        let mut fields = Vec::with_capacity(self.p);
        for i in 0..self.n {
            fields.clear();
            for j in 0..self.p {
                fields.push(match self.get(i, j) {
                    Some(v) => v.to_string(),
                    None => String::new(),
                });
            }
            w.write_record(&fields)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_with_missing_cells() {
        let text = "a,b\n1.5,\n,2\n3,4\n";
        let d = Dataset::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!((d.n(), d.p()), (3, 2));
        assert_eq!(d.get(0, 1), None);
        assert_eq!(d.get(1, 0), None);
        assert_eq!(d.get(2, 1), Some(4.0));
        assert_eq!(d.missing_cells(), vec![(0, 1), (1, 0)]);

        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(Dataset::from_csv_reader(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Dataset::from_csv_reader("a,b\n1,x\n".as_bytes()).is_err());
        assert!(Dataset::from_csv_reader("a,b\n1,\n2,\n".as_bytes()).is_err());
        assert!(Dataset::from_csv_reader("a,b\n".as_bytes()).is_err());
        assert!(Dataset::from_rows(&[vec![f64::NAN]], vec!["a".into()]).is_err());
    }

    #[test]
    fn standardization_ignores_missing() {
        let d = Dataset::from_csv_reader("a,b\n1,0\n,0\n3,1\n".as_bytes()).unwrap();
        let (z, m) = d.standardized();
        assert_eq!(m[0].0, 2.0);
        assert!((m[0].1 - 2f64.sqrt()).abs() < 1e-15);
        assert!((z.value(0, 0) + 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!(z.is_missing(1, 0));
    }

    #[test]
    fn column_selection() {
        let d = Dataset::from_rows(&[vec![1.0, 2.0, 3.0]], vec!["a".into(), "b".into(), "c".into()])
            .unwrap();
        let s = d.select_columns(&[2, 0]).unwrap();
        assert_eq!(s.row(0), &[3.0, 1.0]);
        assert_eq!(s.feature_names(), &["c".to_string(), "a".to_string()]);
    }
}
