//! Scalable estimation of the full transition matrix.
//!
//! 1. For every qubit `i`, measure `⟨E_{x_i}^(i)⟩` at each preparation that is
//!    zero outside `{i} ∪ N_i` (at most `2 n 2^k` circuits).
//! 2. For every pair `i < j`, measure `⟨δE_{x_i}^(i) δE_{x_j}^(j)⟩` at each
//!    preparation that is zero outside `{i, j} ∪ N_i ∪ N_j` (at most
//!    `2 n^2 4^k` circuits). Joint and single marginals come from the same
//!    distribution.
//! 3. Assemble, for every `x'`,
//!
//! ```text
//! T_mean(x|x') = Π_i ⟨E_{x_i}^(i)⟩_{f_i(x')}
//! T_pair(x|x') = Σ_{i<j} ⟨δE_{x_i}^(i) δE_{x_j}^(j)⟩_{f_ij(x')} Π_{l≠i,j} ⟨E_{x_l}^(l)⟩_{f_l(x')}
//! ```
//!
//! Identical preparations requested by different qubits or pairs are
//! measured once.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{BackendDescriptor, Session};
use crate::bits::BitString;
use crate::characterize::{correlator_a, correlator_b};
use crate::error::{Error, Result};
use crate::filter::{filter_single, pair_mask};
use crate::geometry::{all_neighborhoods, Neighborhood, RegisterGeometry};
use crate::matrix::{kron_vec, TransitionMatrix};

/// `(2 n 2^k, 2 n^2 4^k)`, saturating.
pub fn circuit_budget(n: usize, k: usize) -> (u128, u128) {
    let pow = |base: u128, e: usize| {
        u32::try_from(e)
            .ok()
            .and_then(|e| base.checked_pow(e))
            .unwrap_or(u128::MAX)
    };
    let n = n as u128;
    let step1 = (2 * n).saturating_mul(pow(2, k));
    let step2 = (2 * n * n).saturating_mul(pow(4, k));
    (step1, step2)
}

/// Every state supported on `mask`, including 0.
fn submasks(n: usize, mask: usize) -> impl Iterator<Item = BitString> {
    let mut next = Some(mask);
    std::iter::from_fn(move || {
        let s = next?;
        next = if s == 0 { None } else { Some((s - 1) & mask) };
        Some(BitString::from_index(n, s))
    })
}

pub fn mean_field_preparations(neighborhoods: &[Neighborhood], n: usize) -> BTreeSet<BitString> {
    neighborhoods
        .iter()
        .flat_map(|nb| submasks(n, nb.closure_mask()))
        .collect()
}

pub fn pair_preparations(neighborhoods: &[Neighborhood], n: usize) -> BTreeSet<BitString> {
    let mut out = BTreeSet::new();
    for i in 0..n {
        for j in i + 1..n {
            out.extend(submasks(n, pair_mask(&neighborhoods[i], &neighborhoods[j])));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct MeanKey {
    i: usize,
    xi: u8,
    state: BitString,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct PairKey {
    i: usize,
    j: usize,
    xi: u8,
    xj: u8,
    state: BitString,
}

/// Measured mean fields and pair fluctuations at filtered preparations.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTables {
    geometry: RegisterGeometry,
    k: usize,
    neighborhoods: Vec<Neighborhood>,
    mean_fields: BTreeMap<MeanKey, f64>,
    pair_fluct: BTreeMap<PairKey, f64>,
    mean_preparations: BTreeSet<BitString>,
    pair_preparations: BTreeSet<BitString>,
    pub backend: Option<BackendDescriptor>,
}

impl CalibrationTables {
    fn empty(geometry: &RegisterGeometry, k: usize) -> Result<Self> {
        Ok(Self {
            neighborhoods: all_neighborhoods(geometry, k)?,
            geometry: geometry.clone(),
            k,
            mean_fields: BTreeMap::new(),
            pair_fluct: BTreeMap::new(),
            mean_preparations: BTreeSet::new(),
            pair_preparations: BTreeSet::new(),
            backend: None,
        })
    }

    pub fn n(&self) -> usize {
        self.geometry.n()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn geometry(&self) -> &RegisterGeometry {
        &self.geometry
    }

    pub fn neighborhoods(&self) -> &[Neighborhood] {
        &self.neighborhoods
    }

    /// Distinct preparations behind the stored quantities.
    pub fn circuits_used(&self) -> usize {
        self.mean_preparations.union(&self.pair_preparations).count()
    }

    pub fn step1_circuits(&self) -> usize {
        self.mean_preparations.len()
    }

    pub fn step2_circuits(&self) -> usize {
        self.pair_preparations.len()
    }

    pub fn mean_field_count(&self) -> usize {
        self.mean_fields.len()
    }

    pub fn pair_fluct_count(&self) -> usize {
        self.pair_fluct.len()
    }

    /// Combine the step-1 and step-2 halves measured with the same `k`.
    pub fn merged(mut self, other: CalibrationTables) -> Result<Self> {
        if self.k != other.k || self.geometry != other.geometry {
            return Err(Error::InvalidArgument(
                "cannot merge tables measured with different geometry or k".into(),
            ));
        }
        self.mean_fields.extend(other.mean_fields);
        self.pair_fluct.extend(other.pair_fluct);
        self.mean_preparations.extend(other.mean_preparations);
        self.pair_preparations.extend(other.pair_preparations);
        self.backend = self.backend.or(other.backend);
        Ok(self)
    }

    /// `⟨E_{x_i}^(i)⟩_{f_i(x')}`.
    pub fn mean(&self, i: usize, xi: u8, xprime: BitString) -> Result<f64> {
        let state = filter_single(xprime, &self.neighborhoods[i]);
        self.mean_fields
            .get(&MeanKey { i, xi, state })
            .copied()
            .ok_or_else(|| Error::MissingTableEntry(format!("mean field (qubit {i}, x_{i}={xi}, state {state})")))
    }

    /// `⟨δE_{x_i}^(i) δE_{x_j}^(j)⟩_{f_ij(x')}` for `i < j`.
    pub fn fluctuation(&self, i: usize, j: usize, xi: u8, xj: u8, xprime: BitString) -> Result<f64> {
        let state = xprime.masked(pair_mask(&self.neighborhoods[i], &self.neighborhoods[j]));
        self.pair_fluct
            .get(&PairKey { i, j, xi, xj, state })
            .copied()
            .ok_or_else(|| {
                Error::MissingTableEntry(format!("pair fluctuation (qubits {i},{j}, x={xi}{xj}, state {state})"))
            })
    }

    fn column_means(&self, xprime: BitString) -> Result<Vec<[f64; 2]>> {
        (0..self.n())
            .map(|i| Ok([self.mean(i, 0, xprime)?, self.mean(i, 1, xprime)?]))
            .collect()
    }

    pub fn t_mean_column(&self, xprime: BitString) -> Result<Vec<f64>> {
        Ok(kron_vec(&self.column_means(xprime)?))
    }

    pub fn t_pair_column(&self, xprime: BitString) -> Result<Vec<f64>> {
        let means = self.column_means(xprime)?;
        self.pair_column_with(&means, xprime)
    }

    fn pair_column_with(&self, means: &[[f64; 2]], xprime: BitString) -> Result<Vec<f64>> {
        let n = self.n();
        let mut col = vec![0.0; 1 << n];
        let mut scratch = means.to_vec();
        for i in 0..n {
            for j in i + 1..n {
                let mut f = [[0.0; 2]; 2];
                for (a, row) in f.iter_mut().enumerate() {
                    for (b, v) in row.iter_mut().enumerate() {
                        *v = self.fluctuation(i, j, a as u8, b as u8, xprime)?;
                    }
                }
                if f.iter().flatten().all(|v| *v == 0.0) {
                    continue;
                }
                scratch.copy_from_slice(means);
                scratch[i] = [1.0, 1.0];
                scratch[j] = [1.0, 1.0];
                let rest = kron_vec(&scratch);
                let (mi, mj) = (BitString::mask_of(n, i), BitString::mask_of(n, j));
                for (x, (c, r)) in col.iter_mut().zip(rest).enumerate() {
                    *c += f[usize::from(x & mi != 0)][usize::from(x & mj != 0)] * r;
                }
            }
        }
        Ok(col)
    }

    /// One column of `T_est = T_mean + T_pair`, for streaming assembly.
    pub fn t_est_column(&self, xprime: BitString) -> Result<Vec<f64>> {
        let means = self.column_means(xprime)?;
        let mut col = kron_vec(&means);
        for (c, p) in col.iter_mut().zip(self.pair_column_with(&means, xprime)?) {
            *c += p;
        }
        Ok(col)
    }

    fn assemble(&self, column: impl Fn(BitString) -> Result<Vec<f64>> + Sync) -> Result<TransitionMatrix> {
        let n = self.n();
        let columns = (0..1usize << n)
            .into_par_iter()
            .map(|c| column(BitString::from_index(n, c)))
            .collect::<Result<Vec<_>>>()?;
        TransitionMatrix::from_columns(n, columns)
    }

    /// Largest violation of `E_0 + E_1 = I` and of the pair sign structure
    /// `F(x_i, x_j) = (-1)^{x_i+x_j} F(0, 0)`.
    pub fn invariant_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (key, v) in &self.mean_fields {
            if key.xi == 0 {
                if let Some(w) = self.mean_fields.get(&MeanKey { xi: 1, ..*key }) {
                    worst = worst.max((v + w - 1.0).abs());
                }
            }
        }
        for (key, v) in &self.pair_fluct {
            if key.xi == 0 && key.xj == 0 {
                for (a, b) in [(0u8, 1u8), (1, 0), (1, 1)] {
                    if let Some(w) = self.pair_fluct.get(&PairKey { xi: a, xj: b, ..*key }) {
                        let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                        worst = worst.max((w - sign * v).abs());
                    }
                }
            }
        }
        worst
    }

    pub fn to_json(&self) -> TablesJson {
        TablesJson {
            k: self.k,
            geometry: self.geometry.clone(),
            metadata: TablesMetadata {
                backend: self.backend.clone(),
                circuits_used: self.circuits_used(),
                step1_circuits: self.step1_circuits(),
                step2_circuits: self.step2_circuits(),
            },
            mean_fields: self
                .mean_fields
                .iter()
                .map(|(k, v)| (format!("{}|{}|{}", k.i, k.xi, k.state), *v))
                .collect(),
            pair_fluct: self
                .pair_fluct
                .iter()
                .map(|(k, v)| (format!("{},{}|{}{}|{}", k.i, k.j, k.xi, k.xj, k.state), *v))
                .collect(),
        }
    }

    pub fn from_json(j: TablesJson) -> Result<Self> {
        let mut t = Self::empty(&j.geometry, j.k)?;
        let n = t.n();
        let bad = |key: &str| Error::Schema {
            record: None,
            message: format!("malformed table key {key:?}"),
        };
        let state_of = |s: &str, key: &str| -> Result<BitString> {
            let b = BitString::parse(s).map_err(|_| bad(key))?;
            if b.n() != n {
                return Err(bad(key));
            }
            Ok(b)
        };
        let bit = |c: char, key: &str| -> Result<u8> {
            c.to_digit(2).map(|d| d as u8).ok_or_else(|| bad(key))
        };
        for (key, v) in &j.mean_fields {
            let parts: Vec<&str> = key.split('|').collect();
            let [i, xi, state] = parts[..] else { return Err(bad(key)) };
            let i: usize = i.parse().map_err(|_| bad(key))?;
            let xi = bit(xi.chars().next().ok_or_else(|| bad(key))?, key)?;
            let state = state_of(state, key)?;
            if i >= n {
                return Err(bad(key));
            }
            t.mean_fields.insert(MeanKey { i, xi, state }, *v);
            t.mean_preparations.insert(state);
        }
        for (key, v) in &j.pair_fluct {
            let parts: Vec<&str> = key.split('|').collect();
            let [ij, xs, state] = parts[..] else { return Err(bad(key)) };
            let (i, jj) = ij.split_once(',').ok_or_else(|| bad(key))?;
            let i: usize = i.parse().map_err(|_| bad(key))?;
            let jj: usize = jj.parse().map_err(|_| bad(key))?;
            let mut chars = xs.chars();
            let (Some(a), Some(b), None) = (chars.next(), chars.next(), chars.next()) else {
                return Err(bad(key));
            };
            let state = state_of(state, key)?;
            if i >= jj || jj >= n {
                return Err(bad(key));
            }
            t.pair_fluct.insert(
                PairKey {
                    i,
                    j: jj,
                    xi: bit(a, key)?,
                    xj: bit(b, key)?,
                    state,
                },
                *v,
            );
            t.pair_preparations.insert(state);
        }
        t.backend = j.metadata.backend;
        Ok(t)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_json())? + "\n")?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Self::from_json(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TablesMetadata {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendDescriptor>,
    pub circuits_used: usize,
    pub step1_circuits: usize,
    pub step2_circuits: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TablesJson {
    pub k: usize,
    pub geometry: RegisterGeometry,
    pub metadata: TablesMetadata,
    pub mean_fields: BTreeMap<String, f64>,
    pub pair_fluct: BTreeMap<String, f64>,
}

fn check_register(session: &Session<'_>, geometry: &RegisterGeometry) -> Result<()> {
    if session.n() != geometry.n() {
        return Err(Error::DimensionMismatch {
            expected: geometry.n(),
            found: session.n(),
        });
    }
    Ok(())
}

/// Step 1: single-qubit marginals at every `f_i`-filtered preparation.
pub fn measure_mean_fields(
    session: &mut Session<'_>,
    geometry: &RegisterGeometry,
    k: usize,
) -> Result<CalibrationTables> {
    check_register(session, geometry)?;
    let mut t = CalibrationTables::empty(geometry, k)?;
    let n = geometry.n();
    let preps = mean_field_preparations(&t.neighborhoods, n);
    session.prefetch(preps.iter().copied())?;
    for i in 0..n {
        for state in submasks(n, t.neighborhoods[i].closure_mask()) {
            let m = session.measure(state)?.marginal(i);
            for xi in 0..2u8 {
                t.mean_fields.insert(MeanKey { i, xi, state }, m[xi as usize]);
            }
        }
    }
    t.mean_preparations = preps;
    t.backend = Some(session.backend().descriptor());
    Ok(t)
}

/// Step 2: pair covariances at every `f_ij`-filtered preparation.
pub fn measure_pair_fluctuations(
    session: &mut Session<'_>,
    geometry: &RegisterGeometry,
    k: usize,
) -> Result<CalibrationTables> {
    check_register(session, geometry)?;
    let mut t = CalibrationTables::empty(geometry, k)?;
    let n = geometry.n();
    let preps = pair_preparations(&t.neighborhoods, n);
    session.prefetch(preps.iter().copied())?;
    for i in 0..n {
        for j in i + 1..n {
            for state in submasks(n, pair_mask(&t.neighborhoods[i], &t.neighborhoods[j])) {
                let d = session.measure(state)?;
                let (mi, mj, joint) = (d.marginal(i), d.marginal(j), d.joint(i, j));
                for xi in 0..2u8 {
                    for xj in 0..2u8 {
                        let (a, b) = (xi as usize, xj as usize);
                        t.pair_fluct
                            .insert(PairKey { i, j, xi, xj, state }, joint[a][b] - mi[a] * mj[b]);
                    }
                }
            }
        }
    }
    t.pair_preparations = preps;
    t.backend = Some(session.backend().descriptor());
    Ok(t)
}

pub fn assemble_t_mean(tables: &CalibrationTables) -> Result<TransitionMatrix> {
    tables.assemble(|x| tables.t_mean_column(x))
}

/// Additive pair correction; its columns sum to zero.
pub fn assemble_t_pair(tables: &CalibrationTables) -> Result<TransitionMatrix> {
    tables.assemble(|x| tables.t_pair_column(x))
}

pub fn assemble_t_est(tables: &CalibrationTables) -> Result<TransitionMatrix> {
    tables.assemble(|x| tables.t_est_column(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub n: usize,
    pub k: usize,
    pub step1_bound: u128,
    pub step2_bound: u128,
    pub step1_circuits: usize,
    pub step2_circuits: usize,
    /// Distinct preparations issued across both steps.
    pub circuits_used: usize,
}

impl BudgetReport {
    pub fn from_tables(t: &CalibrationTables) -> Self {
        let (step1_bound, step2_bound) = circuit_budget(t.n(), t.k());
        Self {
            n: t.n(),
            k: t.k(),
            step1_bound,
            step2_bound,
            step1_circuits: t.step1_circuits(),
            step2_circuits: t.step2_circuits(),
            circuits_used: t.circuits_used(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Estimate {
    pub t_est: TransitionMatrix,
    pub tables: CalibrationTables,
    pub budget: BudgetReport,
}

/// Run both measurement steps and assemble `T_est`.
pub fn estimate_t(session: &mut Session<'_>, geometry: &RegisterGeometry, k: usize) -> Result<Estimate> {
    let means = measure_mean_fields(session, geometry, k)?;
    let pairs = measure_pair_fluctuations(session, geometry, k)?;
    let tables = means.merged(pairs)?;
    let t_est = assemble_t_est(&tables)?;
    let budget = BudgetReport::from_tables(&tables);
    Ok(Estimate {
        t_est,
        tables,
        budget,
    })
}

/// Default `A`/`B` magnitude below which a spectator counts as outside the
/// correlation volume.
pub const AUTO_K_THRESHOLD: f64 = 1e-3;

/// Smallest admissible neighborhood size such that every measured `|A_ij|`
/// with `j ∉ N_i` and every `|B_ijl|` with `l ∉ {i, j} ∪ N_i ∪ N_j` is below
/// `threshold`.
pub fn select_k(session: &mut Session<'_>, geometry: &RegisterGeometry, threshold: f64) -> Result<usize> {
    check_register(session, geometry)?;
    let n = geometry.n();
    let zero = BitString::zeros(n);
    session.prefetch(std::iter::once(zero).chain((0..n).map(|j| zero.flipped(j))))?;
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
                b.push((i, j, l, correlator_b(session, i, j, l)?));
            }
        }
    }
    let sizes = geometry.admissible_sizes();
    for &k in &sizes {
        let nbs = all_neighborhoods(geometry, k)?;
        let a_ok = (0..n).all(|i| (0..n).all(|j| nbs[i].contains(j) || a[i][j].abs() < threshold));
        let b_ok = b
            .iter()
            .all(|&(i, j, l, v)| nbs[i].contains(l) || nbs[j].contains(l) || v.abs() < threshold);
        if a_ok && b_ok {
            return Ok(k);
        }
    }
    Ok(*sizes.last().expect("covering size is always admissible"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::Backend;
    use crate::characterize::{measure_all_single_qubit_t, t_prod, Family};
    use crate::model::NoiseModelSpec;
    use crate::norm::{norm_distance, MatrixNorm};
    use crate::presets;

    fn chain(n: usize) -> RegisterGeometry {
        RegisterGeometry::chain(n).unwrap()
    }

    #[test]
    fn budget_bounds() {
        assert_eq!(circuit_budget(8, 6), (1024, 524288));
        assert_eq!(circuit_budget(4, 2), (32, 512));
        assert_eq!(circuit_budget(5, 0), (10, 50));
        assert_eq!(circuit_budget(4, 1000).1, u128::MAX);
    }

    #[test]
    fn k0_preparations_are_single_flips() {
        let g = chain(4);
        let nbs = all_neighborhoods(&g, 0).unwrap();
        let labels: Vec<String> = mean_field_preparations(&nbs, 4).iter().map(|b| b.to_string()).collect();
        assert_eq!(labels, vec!["0000", "0001", "0010", "0100", "1000"]);
        assert_eq!(pair_preparations(&nbs, 4).len(), 11);
    }

    #[test]
    fn overlapping_neighborhoods_deduplicate() {
        let g = chain(8);
        let nbs = all_neighborhoods(&g, 2).unwrap();
        let s1 = mean_field_preparations(&nbs, 8);
        let s2 = pair_preparations(&nbs, 8);
        let union: BTreeSet<_> = s1.union(&s2).collect();
        let (b1, b2) = circuit_budget(8, 2);
        assert_eq!(s1.len(), 28);
        assert_eq!(union.len(), 176);
        assert!(s1.len() < b1 as usize && s2.len() < b2 as usize);
    }

    #[test]
    fn uncorrelated_model_means_ignore_spectators() {
        let m = presets::melbourne_c4_product().unwrap();
        let g = m.geometry().clone();
        let mut b = Backend::exact(m);
        let mut s = Session::new(&mut b);
        let t = measure_mean_fields(&mut s, &g, 2).unwrap();
        for i in 0..4 {
            for xp in BitString::all(4) {
                let xi = xp.bit(i) as usize;
                assert!((t.mean(i, 0, xp).unwrap() - presets::MELBOURNE_C4_BASE[i][0][xi]).abs() < 1e-12);
            }
        }
        // 2 outcomes per (qubit, filtered state), closures of 2, 3, 3, 2 qubits
        assert_eq!(t.mean_field_count(), 2 * (4 + 8 + 8 + 4));
    }

    #[test]
    fn t_mean_matches_means_only_model() {
        // shifts within range 1 are captured exactly by k = 2 filters
        let tau = [[0.97, 0.1], [0.03, 0.9]];
        let m = NoiseModelSpec::product(chain(5), vec![tau; 5])
            .with_shift(0, 1, 0.02)
            .with_shift(2, 1, -0.01)
            .with_shift(4, 3, 0.015)
            .with_pair_cov(0, 3, [[2e-4, 1e-4], [0.0, 3e-4]])
            .build()
            .unwrap();
        let g = m.geometry().clone();
        let reference = m.means_only().unwrap().exact_full_t(12).unwrap();
        let mut b = Backend::exact(m);
        let mut s = Session::new(&mut b);
        let t = measure_mean_fields(&mut s, &g, 2).unwrap();
        let tm = assemble_t_mean(&t).unwrap();
        assert!(norm_distance(&tm, &reference, MatrixNorm::Max).unwrap() < 1e-12);
        for c in tm.column_sums() {
            assert!((c - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_qubit_pair_term_is_signed_covariance() {
        let tau = [[0.9, 0.15], [0.1, 0.85]];
        let c = [[0.01, -0.005], [0.004, 0.002]];
        let m = NoiseModelSpec::product(chain(2), vec![tau; 2])
            .with_pair_cov(0, 1, c)
            .build()
            .unwrap();
        let g = m.geometry().clone();
        let mut b = Backend::exact(m);
        let mut s = Session::new(&mut b);
        let t = estimate_t(&mut s, &g, 0).unwrap();
        let tp = assemble_t_pair(&t.tables).unwrap();
        for xp in BitString::all(2) {
            let cov = c[xp.bit(0) as usize][xp.bit(1) as usize];
            for x in BitString::all(2) {
                let sign = if x.weight() % 2 == 0 { 1.0 } else { -1.0 };
                assert!((tp.get(x.index(), xp.index()) - sign * cov).abs() < 1e-15);
            }
        }
        assert!(t.tables.invariant_residual() < 1e-15);
    }

    #[test]
    fn zero_covariance_gives_zero_pair_matrix_and_k0_reduces_to_tprod() {
        let m = presets::melbourne_c4_product().unwrap();
        let g = m.geometry().clone();
        let mut b = Backend::exact(m);
        let mut s = Session::new(&mut b);
        let e = estimate_t(&mut s, &g, 0).unwrap();
        let tp = assemble_t_pair(&e.tables).unwrap();
        assert!(tp.as_dmatrix().iter().all(|v| v.abs() < 1e-15));
        let singles = measure_all_single_qubit_t(&mut s, &g, Family::Uniform(0)).unwrap();
        let prod = t_prod(&singles).unwrap();
        assert!(norm_distance(&e.t_est, &prod, MatrixNorm::Max).unwrap() < 1e-15);
    }

    #[test]
    fn missing_replay_entries_are_listed() {
        use crate::dist::{Counts, Dataset};
        let zero = BitString::zeros(3);
        let d = Dataset::new(
            3,
            vec![Counts {
                prepared: zero,
                shots: 1,
                histogram: [(zero, 1)].into_iter().collect(),
            }],
        )
        .unwrap();
        let mut b = Backend::replay(d);
        let mut s = Session::new(&mut b);
        match measure_mean_fields(&mut s, &chain(3), 0) {
            Err(Error::MissingPreparations(v)) => assert_eq!(v.len(), 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tables_json_round_trip() {
        let m = presets::melbourne_c4().unwrap();
        let g = m.geometry().clone();
        let mut b = Backend::exact(m);
        let mut s = Session::new(&mut b);
        let e = estimate_t(&mut s, &g, 2).unwrap();
        let j = serde_json::to_string(&e.tables.to_json()).unwrap();
        assert!(j.contains("\"0|1|1100\""));
        assert!(j.contains("\"0,1|01|"));
        let back = CalibrationTables::from_json(serde_json::from_str(&j).unwrap()).unwrap();
        assert_eq!(back.circuits_used(), e.tables.circuits_used());
        assert_eq!(assemble_t_est(&back).unwrap(), e.t_est);
        let mut bad: TablesJson = serde_json::from_str(&j).unwrap();
        bad.mean_fields.insert("9|0|0000".into(), 0.5);
        assert!(CalibrationTables::from_json(bad).is_err());
    }

    #[test]
    fn auto_k() {
        let mut b = Backend::exact(presets::melbourne_c4().unwrap());
        let mut s = Session::new(&mut b);
        // A_30 spans three sites, so only whole-register neighborhoods qualify
        assert_eq!(select_k(&mut s, &chain(4), AUTO_K_THRESHOLD).unwrap(), 6);
        let mut b = Backend::exact(presets::melbourne_c4_product().unwrap());
        let mut s = Session::new(&mut b);
        assert_eq!(select_k(&mut s, &chain(4), AUTO_K_THRESHOLD).unwrap(), 0);
    }

    #[test]
    fn missing_table_entry_named() {
        let m = presets::melbourne_c4().unwrap();
        let g = m.geometry().clone();
        let mut b = Backend::exact(m);
        let mut s = Session::new(&mut b);
        let t = measure_mean_fields(&mut s, &g, 0).unwrap();
        let e = assemble_t_pair(&t).unwrap_err();
        assert!(matches!(e, Error::MissingTableEntry(_)), "{e}");
    }
}
