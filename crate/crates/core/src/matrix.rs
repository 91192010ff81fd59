//! Dense `2^n x 2^n` transition matrices. Rows index the measured state `x`,
//! columns the prepared state `x'`.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    n: usize,
    m: DMatrix<f64>,
}

impl TransitionMatrix {
    pub fn zeros(n: usize) -> Self {
        let d = 1 << n;
        Self {
            n,
            m: DMatrix::zeros(d, d),
        }
    }

    pub fn identity(n: usize) -> Self {
        let d = 1 << n;
        Self {
            n,
            m: DMatrix::identity(d, d),
        }
    }

    pub fn from_dmatrix(m: DMatrix<f64>) -> Result<Self> {
        let d = m.nrows();
        if d != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: m.ncols(),
            });
        }
        if d < 2 || !d.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "matrix dimension {d} is not 2^n with n >= 1"
            )));
        }
        Ok(Self {
            n: d.trailing_zeros() as usize,
            m,
        })
    }

    /// Build from rows, `rows[x][x']`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        Self::from_dmatrix(DMatrix::from_fn(d, d, |r, c| rows[r][c]))
    }

    /// Build from columns, one per prepared state in index order.
    pub fn from_columns(n: usize, columns: Vec<Vec<f64>>) -> Result<Self> {
        let d = 1 << n;
        if columns.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: columns.len(),
            });
        }
        let mut flat = Vec::with_capacity(d * d);
        for c in columns {
            if c.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: c.len(),
                });
            }
            flat.extend(c);
        }
        Ok(Self {
            n,
            m: DMatrix::from_vec(d, d, flat),
        })
    }

    /// 2x2 matrix from `[[T(0|0), T(0|1)], [T(1|0), T(1|1)]]`.
    pub fn single(rows: [[f64; 2]; 2]) -> Self {
        Self {
            n: 1,
            m: DMatrix::from_row_slice(2, 2, &[rows[0][0], rows[0][1], rows[1][0], rows[1][1]]),
        }
    }

    /// Symmetric single-qubit matrix with flip probability `eps`.
    pub fn symmetric(eps: f64) -> Self {
        Self::single([[1.0 - eps, eps], [eps, 1.0 - eps]])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, x: usize, xprime: usize) -> f64 {
        self.m[(x, xprime)]
    }

    pub fn set(&mut self, x: usize, xprime: usize, v: f64) {
        self.m[(x, xprime)] = v;
    }

    pub fn column(&self, xprime: usize) -> &[f64] {
        let d = self.dim();
        &self.m.as_slice()[xprime * d..(xprime + 1) * d]
    }

    pub fn column_mut(&mut self, xprime: usize) -> &mut [f64] {
        let d = self.dim();
        &mut self.m.as_mut_slice()[xprime * d..(xprime + 1) * d]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|r| (0..self.dim()).map(|c| self.m[(r, c)]).collect())
            .collect()
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self {
            n: self.n + other.n,
            m: self.m.kronecker(&other.m),
        }
    }

    /// `T_1 ⊗ T_2 ⊗ ... ⊗ T_n` in the given order.
    pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a TransitionMatrix>) -> Option<Self> {
        factors
            .into_iter()
            .fold(None, |acc: Option<Self>, f| Some(match acc {
                None => f.clone(),
                Some(a) => a.kron(f),
            }))
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            n: self.n,
            m: &self.m + &other.m,
        })
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            n: self.n,
            m: &self.m - &other.m,
        })
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.dim()).map(|c| self.column(c).iter().sum()).collect()
    }

    /// Entries in `[-tol, 1 + tol]` and columns summing to 1 within `tol`.
    pub fn check_column_stochastic(&self, tol: f64) -> Result<()> {
        for c in 0..self.dim() {
            let col = self.column(c);
            if let Some((r, v)) = col
                .iter()
                .enumerate()
                .find(|(_, v)| **v < -tol || **v > 1.0 + tol || !v.is_finite())
            {
                return Err(Error::NotStochastic(format!(
                    "entry ({}, {}) = {v}",
                    BitString::from_index(self.n, r),
                    BitString::from_index(self.n, c)
                )));
            }
            let s: f64 = col.iter().sum();
            if (s - 1.0).abs() > tol {
                return Err(Error::NotStochastic(format!(
                    "column {} sums to {s}",
                    BitString::from_index(self.n, c)
                )));
            }
        }
        Ok(())
    }

    /// Number of entries outside `[-tol, 1 + tol]`.
    pub fn count_outside_unit(&self, tol: f64) -> usize {
        self.m.iter().filter(|v| **v < -tol || **v > 1.0 + tol).count()
    }

    /// Clamp every entry into `[0, 1]`.
    pub fn clipped(&self) -> Self {
        Self {
            n: self.n,
            m: self.m.map(|v| v.clamp(0.0, 1.0)),
        }
    }

    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        for (c, &pc) in p.iter().enumerate().take(d) {
            if pc != 0.0 {
                for (o, t) in out.iter_mut().zip(self.column(c)) {
                    *o += t * pc;
                }
            }
        }
        out
    }

    pub fn apply_transpose(&self, r: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|c| self.column(c).iter().zip(r).map(|(t, v)| t * v).sum())
            .collect()
    }

    pub fn to_json(&self) -> MatrixJson {
        MatrixJson {
            n: self.n,
            order: ORDER_MSB_FIRST.to_string(),
            data: MatrixData::Rows(self.rows()),
        }
    }

    pub fn from_json(j: MatrixJson) -> Result<Self> {
        if j.order != ORDER_MSB_FIRST {
            return Err(Error::Schema {
                record: None,
                message: format!("unsupported bit order {:?}", j.order),
            });
        }
        let d = 1usize << j.n;
        let t = match j.data {
            MatrixData::Rows(rows) => Self::from_rows(&rows)?,
            MatrixData::Flat(flat) => {
                if flat.len() != d * d {
                    return Err(Error::DimensionMismatch {
                        expected: d * d,
                        found: flat.len(),
                    });
                }
                Self::from_dmatrix(DMatrix::from_row_slice(d, d, &flat))?
            }
        };
        if t.n != j.n {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: t.dim(),
            });
        }
        Ok(t)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string_pretty(&self.to_json())?;
        std::fs::write(path, s + "\n")?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_json(serde_json::from_str(&s)?)
    }

    /// Header row of prepared-state labels, then one row per measured state.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let labels: Vec<String> = BitString::all(self.n).map(|b| b.to_string()).collect();
        let mut header = vec!["x\\x'".to_string()];
        header.extend(labels.iter().cloned());
        out.write_record(&header).map_err(csv_err)?;
        for (r, label) in labels.iter().enumerate() {
            let mut row = vec![label.clone()];
            row.extend((0..self.dim()).map(|c| self.m[(r, c)].to_string()));
            out.write_record(&row).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("csv: {other:?}")),
    }
}

pub const ORDER_MSB_FIRST: &str = "msb-first";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub n: usize,
    pub order: String,
    pub data: MatrixData,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixData {
    Rows(Vec<Vec<f64>>),
    Flat(Vec<f64>),
}

/// `v[x] = Π_q factors[q][x_q]`, qubit 0 most significant.
pub fn kron_vec(factors: &[[f64; 2]]) -> Vec<f64> {
    let mut v = Vec::with_capacity(1 << factors.len());
    v.push(1.0);
    for f in factors {
        let prev = std::mem::take(&mut v);
        v.reserve(prev.len() * 2);
        for a in prev {
            v.push(a * f[0]);
            v.push(a * f[1]);
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_vec_matches_definition() {
        let f = [[0.9, 0.1], [0.8, 0.2], [0.7, 0.3]];
        let v = kron_vec(&f);
        for x in BitString::all(3) {
            let expect: f64 = (0..3).map(|q| f[q][x.bit(q) as usize]).product();
            assert!((v[x.index()] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn kron_puts_first_factor_on_msb() {
        let a = TransitionMatrix::single([[1.0, 0.0], [0.0, 1.0]]);
        let b = TransitionMatrix::symmetric(0.1);
        let t = a.kron(&b);
        // prepared 00 -> measured 01 flips only the second (least significant) qubit
        assert!((t.get(1, 0) - 0.1).abs() < 1e-15);
        assert_eq!(t.get(2, 0), 0.0);
    }

    #[test]
    fn stochastic_check() {
        assert!(TransitionMatrix::identity(3).check_column_stochastic(1e-12).is_ok());
        let bad = TransitionMatrix::single([[0.9, 0.0], [0.2, 1.0]]);
        assert!(bad.check_column_stochastic(1e-12).is_err());
    }

    #[test]
    fn json_and_csv_layout() {
        let t = TransitionMatrix::symmetric(0.25).kron(&TransitionMatrix::identity(1));
        let j = serde_json::to_value(t.to_json()).unwrap();
        assert_eq!(j["n"], 2);
        assert_eq!(j["order"], "msb-first");
        assert_eq!(j["data"][2][0], 0.25);
        let back = TransitionMatrix::from_json(serde_json::from_value(j).unwrap()).unwrap();
        assert_eq!(back, t);

        let flat = serde_json::json!({"n": 1, "order": "msb-first", "data": [0.9, 0.2, 0.1, 0.8]});
        let f = TransitionMatrix::from_json(serde_json::from_value(flat).unwrap()).unwrap();
        assert_eq!(f.get(0, 1), 0.2);

        let mut buf = Vec::new();
        TransitionMatrix::symmetric(0.5).write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x\\x',0,1\n0,0.5,0.5\n1,0.5,0.5\n");
    }

    #[test]
    fn apply_and_transpose() {
        let t = TransitionMatrix::single([[0.9, 0.2], [0.1, 0.8]]);
        assert_eq!(t.apply(&[1.0, 0.0]), vec![0.9, 0.1]);
        let tt = t.apply_transpose(&[1.0, 0.0]);
        assert_eq!(tt, vec![0.9, 0.2]);
    }
}
