//! Direct characterization: full `T` measurement, single-qubit matrices,
//! the `A`, `B`, `C` correlators and the product approximation.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::backend::Session;
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::geometry::{moore_neighborhood, RegisterGeometry};
use crate::matrix::{csv_err, TransitionMatrix};
use crate::norm::{norm_distance, MatrixNorm};

/// How spectators are prepared when measuring a single-qubit matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Every spectator prepared in the given bit.
    Uniform(u8),
    /// Average over all preparations of the size-`k` Moore neighborhood,
    /// spectators outside it in 0.
    Average(usize),
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Uniform(b) => write!(f, "spectators={b}"),
            Family::Average(k) => write!(f, "ave:k={k}"),
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    /// `uniform0`, `uniform1` or `ave:<k>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform0" => Ok(Family::Uniform(0)),
            "uniform1" => Ok(Family::Uniform(1)),
            _ => s
                .strip_prefix("ave:")
                .and_then(|k| k.parse().ok())
                .map(Family::Average)
                .ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "unknown family {s:?}; expected uniform0, uniform1 or ave:<k>"
                    ))
                }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingleQubitT {
    pub qubit: usize,
    pub family: Family,
    pub matrix: TransitionMatrix,
}

/// Measure all `2^n` columns directly.
pub fn measure_full_t(session: &mut Session<'_>, oracle_limit: usize) -> Result<TransitionMatrix> {
    let n = session.n();
    if n > oracle_limit {
        return Err(Error::OracleLimit {
            n,
            limit: oracle_limit,
        });
    }
    session.prefetch(BitString::all(n))?;
    let columns = BitString::all(n)
        .map(|x| session.measure(x).map(|d| d.probs().to_vec()))
        .collect::<Result<Vec<_>>>()?;
    TransitionMatrix::from_columns(n, columns)
}

/// Groups of preparations whose marginals on qubit `i` are averaged, one group
/// per prepared value of qubit `i`.
pub fn single_qubit_preparations(
    geometry: &RegisterGeometry,
    i: usize,
    family: Family,
) -> Result<[Vec<BitString>; 2]> {
    geometry.check_qubit(i)?;
    let n = geometry.n();
    let group = |xi: u8| -> Result<Vec<BitString>> {
        match family {
            Family::Uniform(b) => {
                if b > 1 {
                    return Err(Error::InvalidArgument(format!("uniform spectator bit {b}")));
                }
                let fill = if b == 1 { (1usize << n) - 1 } else { 0 };
                Ok(vec![BitString::from_index(n, fill).with_bit(i, xi)])
            }
            Family::Average(k) => {
                let nb = moore_neighborhood(geometry, i, k)?;
                let members: Vec<usize> = nb.members.iter().copied().collect();
                Ok((0..1usize << members.len())
                    .map(|y| {
                        members
                            .iter()
                            .enumerate()
                            .fold(BitString::zeros(n).with_bit(i, xi), |z, (t, &q)| {
                                z.with_bit(q, ((y >> t) & 1) as u8)
                            })
                    })
                    .collect())
            }
        }
    };
    Ok([group(0)?, group(1)?])
}

pub fn measure_single_qubit_t(
    session: &mut Session<'_>,
    geometry: &RegisterGeometry,
    i: usize,
    family: Family,
) -> Result<SingleQubitT> {
    let groups = single_qubit_preparations(geometry, i, family)?;
    session.prefetch(groups.iter().flatten().copied())?;
    let mut rows = [[0.0; 2]; 2];
    for (xi, group) in groups.iter().enumerate() {
        let mut acc = [0.0; 2];
        for &z in group {
            let m = session.measure(z)?.marginal(i);
            acc[0] += m[0];
            acc[1] += m[1];
        }
        let w = group.len() as f64;
        rows[0][xi] = acc[0] / w;
        rows[1][xi] = acc[1] / w;
    }
    Ok(SingleQubitT {
        qubit: i,
        family,
        matrix: TransitionMatrix::single(rows),
    })
}

pub fn measure_all_single_qubit_t(
    session: &mut Session<'_>,
    geometry: &RegisterGeometry,
    family: Family,
) -> Result<Vec<SingleQubitT>> {
    (0..geometry.n())
        .map(|i| measure_single_qubit_t(session, geometry, i, family))
        .collect()
}

fn check_index(n: usize, q: usize) -> Result<()> {
    if q >= n {
        Err(Error::UnknownQubit { index: q, n })
    } else {
        Ok(())
    }
}

fn check_distinct(n: usize, qs: &[usize]) -> Result<()> {
    for &q in qs {
        check_index(n, q)?;
    }
    for a in 0..qs.len() {
        if qs[a + 1..].contains(&qs[a]) {
            return Err(Error::IndexCollision(format!("{qs:?}")));
        }
    }
    Ok(())
}

/// `⟨E_0^(i)⟩_{0…0} - ⟨E_0^(i)⟩_{NOT_j(0…0)}`.
pub fn correlator_a(session: &mut Session<'_>, i: usize, j: usize) -> Result<f64> {
    let n = session.n();
    check_distinct(n, &[i, j])?;
    let zero = BitString::zeros(n);
    let base = session.measure(zero)?.marginal(i)[0];
    let flipped = session.measure(zero.flipped(j))?.marginal(i)[0];
    Ok(base - flipped)
}

/// Change of `P(x_i = 0, x_j = 0)` when spectator `l` is flipped from 0.
pub fn correlator_b(session: &mut Session<'_>, i: usize, j: usize, l: usize) -> Result<f64> {
    let n = session.n();
    check_distinct(n, &[i, j, l])?;
    let zero = BitString::zeros(n);
    let base = session.measure(zero)?.joint(i, j)[0][0];
    let flipped = session.measure(zero.flipped(l))?.joint(i, j)[0][0];
    Ok(base - flipped)
}

/// Covariance `⟨δE_0^(i) δE_0^(j)⟩_{x'}` from a single preparation.
pub fn correlator_c(session: &mut Session<'_>, i: usize, j: usize, xprime: BitString) -> Result<f64> {
    let n = session.n();
    check_distinct(n, &[i, j])?;
    let d = session.measure(xprime)?;
    Ok(d.joint(i, j)[0][0] - d.marginal(i)[0] * d.marginal(j)[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BEntry {
    pub i: usize,
    pub j: usize,
    pub l: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CEntry {
    pub i: usize,
    pub j: usize,
    pub xprime: BitString,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorReport {
    /// Dense `A[i][j]`, zero diagonal.
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    /// `B_ijl` for `i < j`, `l ∉ {i, j}`; `B` is symmetric in `i, j`.
    #[serde(rename = "B")]
    pub b: Vec<BEntry>,
    /// `C_ij(x')` for `i < j` at each requested `x'`.
    #[serde(rename = "C")]
    pub c: Vec<CEntry>,
    pub circuits_used: usize,
}

impl CorrelatorReport {
    /// Largest `|A_ij|` as `(i, j, value)`.
    pub fn max_a(&self) -> Option<(usize, usize, f64)> {
        let n = self.a.len();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| (i, j, self.a[i][j]))
            .max_by(|x, y| x.2.abs().total_cmp(&y.2.abs()))
    }

    pub fn max_b(&self) -> Option<&BEntry> {
        self.b.iter().max_by(|x, y| x.value.abs().total_cmp(&y.value.abs()))
    }

    pub fn max_c(&self) -> Option<&CEntry> {
        self.c.iter().max_by(|x, y| x.value.abs().total_cmp(&y.value.abs()))
    }

    /// Heat-map-ready `A` matrix with row `i` and column `j`.
    pub fn write_a_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let n = self.a.len();
        let mut header = vec!["i\\j".to_string()];
        header.extend((0..n).map(|j| j.to_string()));
        out.write_record(&header).map_err(csv_err)?;
        for (i, row) in self.a.iter().enumerate() {
            let mut r = vec![i.to_string()];
            r.extend(row.iter().map(|v| v.to_string()));
            out.write_record(&r).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `A` and `B` from the `n + 1` preparations `{0…0} ∪ {NOT_j(0…0)}`, and `C`
/// at each state in `c_states`.
pub fn correlator_report(session: &mut Session<'_>, c_states: &[BitString]) -> Result<CorrelatorReport> {
    let n = session.n();
    let zero = BitString::zeros(n);
    session.prefetch(std::iter::once(zero).chain((0..n).map(|j| zero.flipped(j))))?;
    session.prefetch(c_states.iter().copied())?;
    let mut a = vec![vec![0.0; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if i != j {
                *v = correlator_a(session, i, j)?;
            }
        }
    }
    let mut b = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for l in (0..n).filter(|&l| l != i && l != j) {
                b.push(BEntry {
                    i,
                    j,
                    l,
                    value: correlator_b(session, i, j, l)?,
                });
            }
        }
    }
    let mut c = Vec::new();
    for &xprime in c_states {
        for i in 0..n {
            for j in i + 1..n {
                c.push(CEntry {
                    i,
                    j,
                    xprime,
                    value: correlator_c(session, i, j, xprime)?,
                });
            }
        }
    }
    Ok(CorrelatorReport {
        a,
        b,
        c,
        circuits_used: session.circuits_used(),
    })
}

/// `T_1 ⊗ … ⊗ T_n` from one single-qubit matrix per qubit, all of one family.
pub fn t_prod(singles: &[SingleQubitT]) -> Result<TransitionMatrix> {
    let first = singles
        .first()
        .ok_or_else(|| Error::InvalidArgument("product of zero single-qubit matrices".into()))?;
    for (q, s) in singles.iter().enumerate() {
        if s.qubit != q {
            return Err(Error::InvalidArgument(format!(
                "single-qubit matrix {q} belongs to qubit {}; expected one per qubit in order",
                s.qubit
            )));
        }
        if s.family != first.family {
            return Err(Error::InvalidArgument(format!(
                "mixed families {} and {}",
                first.family, s.family
            )));
        }
        if s.matrix.n() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: s.matrix.dim(),
            });
        }
    }
    Ok(TransitionMatrix::kron_all(singles.iter().map(|s| &s.matrix)).expect("non-empty"))
}

/// `‖T_meas - I‖`.
pub fn total_spam_error(t_meas: &TransitionMatrix, norm: MatrixNorm) -> Result<f64> {
    norm_distance(t_meas, &TransitionMatrix::identity(t_meas.n()), norm)
}
