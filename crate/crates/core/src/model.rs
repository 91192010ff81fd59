//! Correlated readout noise model used as the ground-truth oracle.
//!
//! For a prepared state `x'` the model defines mean fields
//!
//! ```text
//! m_i(0|x') = τ_i(0|x'_i) - Σ_j a_ij x'_j,      m_i(1|x') = 1 - m_i(0|x')
//! c_ij(x')  = c_ij(x'_i, x'_j) + Σ_l b_ijl x'_l
//! ```
//!
//! and the outcome distribution
//!
//! ```text
//! p(x|x') = Π_i m_i(x_i|x')
//!         + Σ_{i<j}   (-1)^{x_i+x_j}     c_ij(x')  Π_{l≠i,j}   m_l(x_l|x')
//!         + Σ_{i<j<k} (-1)^{x_i+x_j+x_k} g_ijk     Π_{l≠i,j,k} m_l(x_l|x')
//! ```
//!
//! Every correction term sums to zero over outcomes, single-qubit marginals
//! are exactly `m_i`, and pair covariances are exactly `±c_ij`. `a_ij` is the
//! drop in qubit `i`'s probability of reading 0 when spectator `j` is
//! prepared in 1, so the `A_ij` correlator of the model equals `a_ij`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::geometry::RegisterGeometry;
use crate::matrix::{kron_vec, TransitionMatrix};

/// Registers up to this size are validated by full enumeration and may be
/// expanded into a dense transition matrix.
pub const DEFAULT_ORACLE_LIMIT: usize = 12;

/// Probability slack tolerated during validation for floating-point rounding.
pub const VALIDATION_TOL: f64 = 1e-12;

/// Unvalidated description of a noise model; also its JSON config form.
///
/// Sparse maps are keyed `"i,j"` / `"i,j,l"` with zero-based qubit indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModelSpec {
    pub geometry: RegisterGeometry,
    /// Per-qubit `[[τ(0|0), τ(0|1)], [τ(1|0), τ(1|1)]]`.
    pub base: Vec<[[f64; 2]; 2]>,
    #[serde(default)]
    pub spectator_shifts: BTreeMap<String, f64>,
    /// Declared Chebyshev range of the spectator shifts.
    #[serde(default)]
    pub range_a: Option<u64>,
    /// `c_ij(x'_i, x'_j)` tables for `i < j`.
    #[serde(default)]
    pub pair_cov: BTreeMap<String, [[f64; 2]; 2]>,
    /// `b_ijl`, shift of `c_ij` when spectator `l` is prepared in 1.
    #[serde(default)]
    pub pair_shifts: BTreeMap<String, f64>,
    /// Declared range of `b_ijl`, measured from the nearer of `i` and `j`.
    #[serde(default)]
    pub range_b: Option<u64>,
    #[serde(default)]
    pub triple_terms: BTreeMap<String, f64>,
}

impl NoiseModelSpec {
    /// Uncorrelated model with the given single-qubit matrices.
    pub fn product(geometry: RegisterGeometry, base: Vec<[[f64; 2]; 2]>) -> Self {
        Self {
            geometry,
            base,
            spectator_shifts: BTreeMap::new(),
            range_a: None,
            pair_cov: BTreeMap::new(),
            pair_shifts: BTreeMap::new(),
            range_b: None,
            triple_terms: BTreeMap::new(),
        }
    }

    pub fn with_shift(mut self, i: usize, j: usize, a: f64) -> Self {
        self.spectator_shifts.insert(format!("{i},{j}"), a);
        self
    }

    pub fn with_pair_cov(mut self, i: usize, j: usize, c: [[f64; 2]; 2]) -> Self {
        self.pair_cov.insert(format!("{i},{j}"), c);
        self
    }

    pub fn with_pair_shift(mut self, i: usize, j: usize, l: usize, b: f64) -> Self {
        self.pair_shifts.insert(format!("{i},{j},{l}"), b);
        self
    }

    pub fn with_triple(mut self, i: usize, j: usize, k: usize, g: f64) -> Self {
        self.triple_terms.insert(format!("{i},{j},{k}"), g);
        self
    }

    pub fn with_ranges(mut self, range_a: Option<u64>, range_b: Option<u64>) -> Self {
        self.range_a = range_a;
        self.range_b = range_b;
        self
    }

    pub fn build(self) -> Result<NoiseModel> {
        NoiseModel::from_spec(self)
    }
}

fn parse_key<const N: usize>(key: &str, n: usize) -> Result<[usize; N]> {
    let parts: Vec<&str> = key.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(Error::InvalidModel(format!(
            "key {key:?} should have {N} comma-separated indices"
        )));
    }
    let mut out = [0usize; N];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p
            .parse()
            .map_err(|_| Error::InvalidModel(format!("key {key:?} is not a list of indices")))?;
        if *o >= n {
            return Err(Error::UnknownQubit { index: *o, n });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
struct PairTerm {
    i: usize,
    j: usize,
    table: [[f64; 2]; 2],
    /// `(l, b_ijl)`
    shifts: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct NoiseModel {
    spec: NoiseModelSpec,
    n: usize,
    /// `shifts[i] = [(j, a_ij)]`
    shifts: Vec<Vec<(usize, f64)>>,
    pairs: Vec<PairTerm>,
    triples: Vec<([usize; 3], f64)>,
}

impl NoiseModel {
    pub fn from_spec(spec: NoiseModelSpec) -> Result<Self> {
        let n = spec.geometry.n();
        let geometry = &spec.geometry;
        if spec.base.len() != n {
            return Err(Error::InvalidModel(format!(
                "{} base matrices for {n} qubits",
                spec.base.len()
            )));
        }
        for (q, t) in spec.base.iter().enumerate() {
            for (&a, &b) in t[0].iter().zip(&t[1]) {
                if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || (a + b - 1.0).abs() > VALIDATION_TOL {
                    return Err(Error::InvalidModel(format!(
                        "base matrix of qubit {q} is not column-stochastic"
                    )));
                }
            }
        }

        let mut shifts = vec![Vec::new(); n];
        for (key, &a) in &spec.spectator_shifts {
            let [i, j] = parse_key::<2>(key, n)?;
            if i == j {
                return Err(Error::IndexCollision(format!("spectator shift {key:?}")));
            }
            if let Some(r) = spec.range_a {
                if a != 0.0 && geometry.chebyshev(i, j) > r {
                    return Err(Error::InvalidModel(format!(
                        "spectator shift {key:?} lies beyond declared range {r}"
                    )));
                }
            }
            shifts[i].push((j, a));
        }

        let mut pair_map: BTreeMap<(usize, usize), PairTerm> = BTreeMap::new();
        for (key, table) in &spec.pair_cov {
            let [i, j] = parse_key::<2>(key, n)?;
            if i >= j {
                return Err(Error::InvalidModel(format!("pair key {key:?} needs i < j")));
            }
            pair_map.insert(
                (i, j),
                PairTerm {
                    i,
                    j,
                    table: *table,
                    shifts: Vec::new(),
                },
            );
        }
        for (key, &b) in &spec.pair_shifts {
            let [i, j, l] = parse_key::<3>(key, n)?;
            if i >= j {
                return Err(Error::InvalidModel(format!("pair shift key {key:?} needs i < j")));
            }
            if l == i || l == j {
                return Err(Error::IndexCollision(format!("pair shift {key:?}")));
            }
            if let Some(r) = spec.range_b {
                let d = geometry.chebyshev(i, l).min(geometry.chebyshev(j, l));
                if b != 0.0 && d > r {
                    return Err(Error::InvalidModel(format!(
                        "pair shift {key:?} lies beyond declared range {r}"
                    )));
                }
            }
            pair_map
                .entry((i, j))
                .or_insert_with(|| PairTerm {
                    i,
                    j,
                    table: [[0.0; 2]; 2],
                    shifts: Vec::new(),
                })
                .shifts
                .push((l, b));
        }

        let mut triples = Vec::new();
        for (key, &g) in &spec.triple_terms {
            let [i, j, k] = parse_key::<3>(key, n)?;
            if !(i < j && j < k) {
                return Err(Error::InvalidModel(format!("triple key {key:?} needs i < j < k")));
            }
            triples.push(([i, j, k], g));
        }

        let model = Self {
            n,
            shifts,
            pairs: pair_map.into_values().collect(),
            triples,
            spec,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn spec(&self) -> &NoiseModelSpec {
        &self.spec
    }

    pub fn geometry(&self) -> &RegisterGeometry {
        &self.spec.geometry
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_triples(&self) -> bool {
        self.triples.iter().any(|(_, g)| *g != 0.0)
    }

    /// Copy of this model with pair covariances and triple terms removed.
    pub fn means_only(&self) -> Result<NoiseModel> {
        let mut spec = self.spec.clone();
        spec.pair_cov.clear();
        spec.pair_shifts.clear();
        spec.triple_terms.clear();
        spec.build()
    }

    /// `m_i(0|x')`.
    pub fn mean_zero(&self, i: usize, xprime: BitString) -> f64 {
        let base = self.spec.base[i][0][xprime.bit(i) as usize];
        self.shifts[i]
            .iter()
            .filter(|(j, _)| xprime.bit(*j) == 1)
            .fold(base, |m, (_, a)| m - a)
    }

    pub fn means(&self, xprime: BitString) -> Vec<[f64; 2]> {
        (0..self.n)
            .map(|i| {
                let m0 = self.mean_zero(i, xprime);
                [m0, 1.0 - m0]
            })
            .collect()
    }

    /// `c_ij(x')` for `i < j`; zero when the pair carries no covariance.
    pub fn pair_covariance(&self, i: usize, j: usize, xprime: BitString) -> f64 {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.pairs
            .iter()
            .find(|p| p.i == i && p.j == j)
            .map(|p| Self::pair_value(p, xprime))
            .unwrap_or(0.0)
    }

    fn pair_value(p: &PairTerm, xprime: BitString) -> f64 {
        let base = p.table[xprime.bit(p.i) as usize][xprime.bit(p.j) as usize];
        p.shifts
            .iter()
            .filter(|(l, _)| xprime.bit(*l) == 1)
            .fold(base, |c, (_, b)| c + b)
    }

    /// Exact outcome distribution for prepared state `xprime`, indexed by `x`.
    pub fn exact_column(&self, xprime: BitString) -> Vec<f64> {
        let n = self.n;
        let means = self.means(xprime);
        let mut col = kron_vec(&means);
        let mut scratch = means.clone();
        for p in &self.pairs {
            let c = Self::pair_value(p, xprime);
            if c != 0.0 {
                add_signed_term(&mut col, &means, &mut scratch, &[p.i, p.j], c, n);
            }
        }
        for (qs, g) in &self.triples {
            if *g != 0.0 {
                add_signed_term(&mut col, &means, &mut scratch, qs, *g, n);
            }
        }
        col
    }

    /// Exhaustive `2^n x 2^n` matrix; refuses registers above `oracle_limit`.
    pub fn exact_full_t(&self, oracle_limit: usize) -> Result<TransitionMatrix> {
        if self.n > oracle_limit {
            return Err(Error::OracleLimit {
                n: self.n,
                limit: oracle_limit,
            });
        }
        let columns: Vec<Vec<f64>> = (0..1usize << self.n)
            .into_par_iter()
            .map(|c| self.exact_column(BitString::from_index(self.n, c)))
            .collect();
        TransitionMatrix::from_columns(self.n, columns)
    }

    fn validate(&self) -> Result<()> {
        if self.n <= DEFAULT_ORACLE_LIMIT {
            self.validate_columns()?;
        }
        self.validate_mean_ranges()
    }

    /// Enumerate every column, reporting the first out-of-range `p(x|x')`.
    fn validate_columns(&self) -> Result<()> {
        let n = self.n;
        for xp in 0..1usize << n {
            let xprime = BitString::from_index(n, xp);
            let col = self.exact_column(xprime);
            if let Some((x, &v)) = col
                .iter()
                .enumerate()
                .find(|(_, v)| **v < -VALIDATION_TOL || **v > 1.0 + VALIDATION_TOL)
            {
                return Err(Error::NegativeProbability {
                    prepared: xprime,
                    outcome: BitString::from_index(n, x),
                    value: v,
                });
            }
            let s: f64 = col.iter().sum();
            if (s - 1.0).abs() > VALIDATION_TOL {
                return Err(Error::InvalidModel(format!("column {xprime} sums to {s}")));
            }
        }
        Ok(())
    }

    fn validate_mean_ranges(&self) -> Result<()> {
        for i in 0..self.n {
            // m_i(0|x') is linear in the spectator bits, so its extremes are attained
            // by switching on exactly the positive or exactly the negative shifts
            let up: f64 = self.shifts[i].iter().map(|(_, a)| a.max(0.0)).sum();
            let down: f64 = self.shifts[i].iter().map(|(_, a)| a.min(0.0)).sum();
            for b in 0..2 {
                let base = self.spec.base[i][0][b];
                let (lo, hi) = (base - up, base - down);
                if lo < -VALIDATION_TOL || hi > 1.0 + VALIDATION_TOL {
                    return Err(Error::InvalidModel(format!(
                        "mean field of qubit {i} with x'_{i}={b} ranges over [{lo}, {hi}], outside [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.spec)? + "\n")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: NoiseModelSpec = serde_json::from_str(s)?;
        spec.build()
    }
}

/// `col[x] += w (-1)^{Σ_{q∈qs} x_q} Π_{l∉qs} m_l(x_l)`.
fn add_signed_term(
    col: &mut [f64],
    means: &[[f64; 2]],
    scratch: &mut [[f64; 2]],
    qs: &[usize],
    w: f64,
    n: usize,
) {
    scratch.copy_from_slice(means);
    for &q in qs {
        scratch[q] = [1.0, 1.0];
    }
    let rest = kron_vec(scratch);
    let mask = qs.iter().fold(0usize, |m, &q| m | BitString::mask_of(n, q));
    for (x, (c, r)) in col.iter_mut().zip(rest).enumerate() {
        let sign = if (x & mask).count_ones() % 2 == 0 { w } else { -w };
        *c += sign * r;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> RegisterGeometry {
        RegisterGeometry::chain(n).unwrap()
    }

    const ID: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 1.0]];

    /// Direct per-entry evaluation of the generative formula.
    fn brute_entry(m: &NoiseModel, x: BitString, xp: BitString) -> f64 {
        let n = m.n();
        let mm = |l: usize| {
            let m0 = m.mean_zero(l, xp);
            if x.bit(l) == 0 { m0 } else { 1.0 - m0 }
        };
        let sign = |qs: &[usize]| {
            if qs.iter().map(|&q| x.bit(q) as u32).sum::<u32>() % 2 == 0 { 1.0 } else { -1.0 }
        };
        let mut p: f64 = (0..n).map(mm).product();
        for i in 0..n {
            for j in i + 1..n {
                let c = m.pair_covariance(i, j, xp);
                p += sign(&[i, j]) * c * (0..n).filter(|&l| l != i && l != j).map(mm).product::<f64>();
            }
        }
        for (key, g) in &m.spec().triple_terms {
            let [i, j, k] = parse_key::<3>(key, n).unwrap();
            p += sign(&[i, j, k]) * g
                * (0..n).filter(|&l| l != i && l != j && l != k).map(mm).product::<f64>();
        }
        p
    }

    #[test]
    fn identity_model_is_delta() {
        let m = NoiseModelSpec::product(chain(3), vec![ID; 3]).build().unwrap();
        let t = m.exact_full_t(DEFAULT_ORACLE_LIMIT).unwrap();
        assert_eq!(t, TransitionMatrix::identity(3));
    }

    #[test]
    fn two_qubit_covariance_by_enumeration() {
        let m = NoiseModelSpec::product(chain(2), vec![ID; 2])
            .with_pair_cov(0, 1, [[0.01; 2]; 2])
            .build();
        // identity means put all mass on 00; any covariance drives p(01) negative
        assert!(matches!(m, Err(Error::NegativeProbability { .. })));

        let tau = [[0.9, 0.1], [0.1, 0.9]];
        let m = NoiseModelSpec::product(chain(2), vec![tau; 2])
            .with_pair_cov(0, 1, [[0.01; 2]; 2])
            .build()
            .unwrap();
        let xp = BitString::zeros(2);
        let col = m.exact_column(xp);
        let product = [0.81, 0.09, 0.09, 0.01];
        let expect = [0.82, 0.08, 0.08, 0.02];
        for x in 0..4 {
            assert!((col[x] - expect[x]).abs() < 1e-15);
            assert!((brute_entry(&m, BitString::from_index(2, x), xp) - expect[x]).abs() < 1e-15);
        }
        assert!((col[0] - product[0] - 0.01).abs() < 1e-15);
        assert!((col.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_column_matches_brute_force() {
        let tau = [[0.8, 0.25], [0.2, 0.75]];
        let m = NoiseModelSpec::product(chain(4), vec![tau; 4])
            .with_shift(1, 0, 0.02)
            .with_shift(3, 2, -0.01)
            .with_pair_cov(0, 2, [[1e-3, -2e-4], [5e-4, 1e-3]])
            .with_pair_shift(0, 2, 3, 3e-4)
            .with_triple(0, 1, 3, 1e-3)
            .build()
            .unwrap();
        for xp in BitString::all(4) {
            let col = m.exact_column(xp);
            for x in BitString::all(4) {
                assert!((col[x.index()] - brute_entry(&m, x, xp)).abs() < 1e-15);
            }
            assert!((col.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn range_and_key_validation() {
        let tau = [[0.95, 0.05], [0.05, 0.95]];
        let spec = NoiseModelSpec::product(chain(4), vec![tau; 4]).with_ranges(Some(1), Some(1));
        assert!(spec.clone().with_shift(0, 1, 0.01).build().is_ok());
        assert!(spec.clone().with_shift(0, 2, 0.01).build().is_err());
        assert!(spec.clone().with_shift(0, 0, 0.01).build().is_err());
        assert!(spec.clone().with_pair_shift(0, 1, 2, 1e-4).build().is_ok());
        assert!(spec.clone().with_pair_shift(0, 1, 3, 1e-4).build().is_err());
        assert!(spec.clone().with_pair_shift(0, 1, 1, 1e-4).build().is_err());
        assert!(spec.clone().with_pair_cov(2, 1, [[0.0; 2]; 2]).build().is_err());
        assert!(spec.clone().with_shift(0, 7, 0.01).build().is_err());
        assert!(matches!(
            spec.clone().with_shift(0, 1, 0.9).build(),
            Err(Error::NegativeProbability { .. })
        ));
    }

    #[test]
    fn oracle_limit_enforced() {
        let m = NoiseModelSpec::product(chain(3), vec![ID; 3]).build().unwrap();
        assert!(matches!(m.exact_full_t(2), Err(Error::OracleLimit { n: 3, limit: 2 })));
    }

    #[test]
    fn json_round_trip() {
        let m = NoiseModelSpec::product(chain(2), vec![[[0.9, 0.2], [0.1, 0.8]]; 2])
            .with_shift(0, 1, 0.01)
            .build()
            .unwrap();
        let s = m.to_json_string().unwrap();
        assert!(s.contains("\"0,1\""));
        let back = NoiseModel::from_json_str(&s).unwrap();
        assert_eq!(back.spec(), m.spec());
    }
}
