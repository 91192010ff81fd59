//! SPAM correction of measured distributions.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dist::ProbDist;
use crate::error::{Error, Result};
use crate::matrix::TransitionMatrix;
use crate::norm::{norm_distance, MatrixNorm};

pub const DEFAULT_KKT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITERATIONS: usize = 100_000;
/// Direct inversion is refused below this reciprocal condition estimate.
pub const RCOND_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ConstrainedLs,
    DirectInverse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionResult {
    pub p_corr: Vec<f64>,
    /// `‖T p_corr − p_raw‖₂`.
    pub residual: f64,
    pub method: Method,
    pub iterations: usize,
    pub negative_mass_removed: f64,
}

impl CorrectionResult {
    /// Direct-inverse output may carry negative entries; they are kept.
    pub fn to_dist(&self, n: usize) -> Result<ProbDist> {
        ProbDist::new(n, self.p_corr.clone())
    }
}

/// Pluggable correction strategies. Maximum-likelihood or iterative Bayesian
/// unfolding would implement this.
pub trait Corrector {
    fn correct(&self, t: &TransitionMatrix, p_raw: &ProbDist) -> Result<CorrectionResult>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstrainedLs {
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for ConstrainedLs {
    fn default() -> Self {
        Self {
            tol: DEFAULT_KKT_TOL,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

impl Corrector for ConstrainedLs {
    fn correct(&self, t: &TransitionMatrix, p_raw: &ProbDist) -> Result<CorrectionResult> {
        solve_constrained(t, p_raw, self.tol, self.max_iterations)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DirectInverse;

impl Corrector for DirectInverse {
    fn correct(&self, t: &TransitionMatrix, p_raw: &ProbDist) -> Result<CorrectionResult> {
        correct_direct_inverse(t, p_raw)
    }
}

/// Euclidean projection onto `{p : p ≥ 0, Σ p = 1}`.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if v.iter().all(|x| *x >= 0.0) && (total - 1.0).abs() <= 4.0 * f64::EPSILON * v.len() as f64 {
        return v.to_vec();
    }
    let mut u = v.to_vec();
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (r, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let candidate = (cumsum - 1.0) / (r + 1) as f64;
        if ui - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

fn check_inputs(t: &TransitionMatrix, p_raw: &ProbDist) -> Result<()> {
    if t.n() != p_raw.n() {
        return Err(Error::DimensionMismatch {
            expected: t.dim(),
            found: p_raw.probs().len(),
        });
    }
    Ok(())
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Minimize `‖T p − p_raw‖₂²` over the probability simplex.
///
/// Projected gradient with Barzilai-Borwein trial steps, followed by an exact
/// line search on the segment towards the projected point, which keeps every
/// iterate feasible and the objective monotone. Stops when the KKT residual
/// `‖p − P(p − ∇f)‖∞` drops to `tol`.
pub fn correct_constrained(t: &TransitionMatrix, p_raw: &ProbDist, tol: f64) -> Result<CorrectionResult> {
    solve_constrained(t, p_raw, tol, DEFAULT_MAX_ITERATIONS)
}

pub fn solve_constrained(
    t: &TransitionMatrix,
    p_raw: &ProbDist,
    tol: f64,
    max_iterations: usize,
) -> Result<CorrectionResult> {
    check_inputs(t, p_raw)?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument(format!("KKT tolerance must be positive, got {tol}")));
    }
    if (p_raw.total() - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!(
            "raw distribution sums to {}, expected 1 within 1e-6",
            p_raw.total()
        )));
    }
    let a = t.as_dmatrix();
    let b = DVector::from_column_slice(p_raw.probs());
    let grad = |r: &DVector<f64>| a.tr_mul(r) * 2.0;

    let mut p = DVector::from_vec(project_simplex(p_raw.probs()));
    let mut r = a * &p - &b;
    let mut g = grad(&r);
    // 1 / L with L = 2 ‖T‖₁ ‖T‖∞ ≥ 2 σ_max²
    let norm1 = a.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max);
    let norm_inf = a.row_iter().map(|c| c.abs().sum()).fold(0.0, f64::max);
    let mut alpha = 1.0 / (2.0 * norm1 * norm_inf).max(f64::MIN_POSITIVE);

    let kkt = |p: &DVector<f64>, g: &DVector<f64>| {
        let stepped: Vec<f64> = p.iter().zip(g.iter()).map(|(x, d)| x - d).collect();
        sup_dist(p.as_slice(), &project_simplex(&stepped))
    };

    let mut residual = kkt(&p, &g);
    let mut iterations = 0;
    while residual > tol {
        if iterations == max_iterations {
            return Err(Error::NotConverged {
                best: p.as_slice().to_vec(),
                residual,
                iterations,
            });
        }
        iterations += 1;
        let trial: Vec<f64> = p.iter().zip(g.iter()).map(|(x, d)| x - alpha * d).collect();
        let d = DVector::from_vec(project_simplex(&trial)) - &p;
        let td = a * &d;
        let curvature = 2.0 * td.norm_squared();
        let slope = g.dot(&d);
        let step = if curvature > 0.0 {
            (-slope / curvature).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let s = &d * step;
        p += &s;
        // periodic refresh keeps the incremental residual from drifting
        if iterations % 64 == 0 {
            r = a * &p - &b;
        } else {
            r += td * step;
        }
        let g_new = grad(&r);
        let y = &g_new - &g;
        let sy = s.dot(&y);
        alpha = if sy > 0.0 {
            (s.norm_squared() / sy).clamp(1e-12, 1e12)
        } else {
            (alpha * 2.0).min(1e12)
        };
        g = g_new;
        residual = kkt(&p, &g);
    }
    let p_corr = p.as_slice().to_vec();
    let residual = (a * &p - &b).norm();
    Ok(CorrectionResult {
        p_corr,
        residual,
        method: Method::ConstrainedLs,
        iterations,
        negative_mass_removed: 0.0,
    })
}

/// `1 / (‖T‖₁ ‖T⁻¹‖₁)`, or 0 when `T` is exactly singular.
pub fn reciprocal_condition(t: &TransitionMatrix) -> f64 {
    let a = t.as_dmatrix();
    let norm1 = |m: &DMatrix<f64>| m.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max);
    match a.clone().lu().try_inverse() {
        Some(inv) if inv.iter().all(|v| v.is_finite()) => 1.0 / (norm1(a) * norm1(&inv)),
        _ => 0.0,
    }
}

/// `T⁻¹ p_raw`, unprojected.
pub fn correct_direct_inverse(t: &TransitionMatrix, p_raw: &ProbDist) -> Result<CorrectionResult> {
    check_inputs(t, p_raw)?;
    let rcond = reciprocal_condition(t);
    if rcond.is_nan() || rcond < RCOND_THRESHOLD {
        return Err(Error::IllConditioned { rcond });
    }
    let a = t.as_dmatrix();
    let b = DVector::from_column_slice(p_raw.probs());
    let p = a
        .clone()
        .lu()
        .solve(&b)
        .ok_or(Error::IllConditioned { rcond: 0.0 })?;
    let negative_mass_removed = p.iter().filter(|v| **v < 0.0).map(|v| -v).sum();
    let residual = (a * &p - &b).norm();
    Ok(CorrectionResult {
        p_corr: p.as_slice().to_vec(),
        residual,
        method: Method::DirectInverse,
        iterations: 0,
        negative_mass_removed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub scaled_frobenius: f64,
    pub max: f64,
    /// Entries outside `[−tol, 1 + tol]`.
    pub entries_outside_unit: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub reference: String,
    pub rows: Vec<ComparisonRow>,
}

pub const UNIT_INTERVAL_TOL: f64 = 1e-12;

/// Distance of each named candidate to `reference` in both norms.
pub fn compare_matrices(
    candidates: &[(String, TransitionMatrix)],
    reference_name: &str,
    reference: &TransitionMatrix,
) -> Result<ComparisonReport> {
    let rows = candidates
        .iter()
        .map(|(name, m)| {
            Ok(ComparisonRow {
                name: name.clone(),
                scaled_frobenius: norm_distance(m, reference, MatrixNorm::ScaledFrobenius)?,
                max: norm_distance(m, reference, MatrixNorm::Max)?,
                entries_outside_unit: m.count_outside_unit(UNIT_INTERVAL_TOL),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonReport {
        reference: reference_name.to_string(),
        rows,
    })
}

impl ComparisonReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["matrix", "reference", "scaled_frobenius", "max", "entries_outside_unit"])
            .map_err(crate::matrix::csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.name.clone(),
                self.reference.clone(),
                format!("{:?}", r.scaled_frobenius),
                format!("{:?}", r.max),
                r.entries_outside_unit.to_string(),
            ])
            .map_err(crate::matrix::csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Aligned table with one column per requested norm.
    pub fn to_text(&self, norms: &[MatrixNorm]) -> String {
        let mut header = vec!["T".to_string()];
        for norm in norms {
            let sub = match norm {
                MatrixNorm::ScaledFrobenius => "d",
                MatrixNorm::Max => "max",
            };
            header.push(format!("||T - {}||_{sub}", self.reference));
        }
        header.push("outside [0,1]".to_string());
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut row = vec![r.name.clone()];
                for norm in norms {
                    let v = match norm {
                        MatrixNorm::ScaledFrobenius => r.scaled_frobenius,
                        MatrixNorm::Max => r.max,
                    };
                    row.push(format!("{v:.1e}"));
                }
                row.push(r.entries_outside_unit.to_string());
                row
            })
            .collect();
        let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
        for row in &body {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        for row in std::iter::once(&header).chain(&body) {
            let cells: Vec<String> = row.iter().zip(&widths).map(|(c, &w)| format!("{c:>w$}")).collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)?.write_all(self.to_csv()?.as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::BitString;
    use crate::presets;
    use proptest::prelude::*;

    fn dist(n: usize, p: Vec<f64>) -> ProbDist {
        ProbDist::new(n, p).unwrap()
    }

    fn on_simplex(p: &[f64]) -> bool {
        p.iter().all(|v| (0.0..=1.0).contains(v)) && (p.iter().sum::<f64>() - 1.0).abs() < 1e-9
    }

    fn objective(t: &TransitionMatrix, p: &[f64], b: &[f64]) -> f64 {
        let tp = t.apply(p);
        tp.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_simplex(&[0.2, 0.8]), vec![0.2, 0.8]);
        assert_eq!(project_simplex(&[1.125, -0.125]), vec![1.0, 0.0]);
        let p = project_simplex(&[0.5, 0.5, 0.5]);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn identity_returns_input() {
        let t = TransitionMatrix::identity(2);
        let raw = dist(2, vec![0.1, 0.2, 0.3, 0.4]);
        let c = correct_constrained(&t, &raw, DEFAULT_KKT_TOL).unwrap();
        assert_eq!(c.p_corr, raw.probs());
        assert_eq!(c.residual, 0.0);
        let d = correct_direct_inverse(&t, &raw).unwrap();
        assert_eq!(d.p_corr, raw.probs());
    }

    #[test]
    fn round_trip_on_product_model() {
        let t = presets::melbourne_c4_product().unwrap().exact_full_t(12).unwrap();
        let p_true: Vec<f64> = (1..=16).map(|i| i as f64 / 136.0).collect();
        let raw = dist(4, t.apply(&p_true));
        let c = correct_constrained(&t, &raw, DEFAULT_KKT_TOL).unwrap();
        assert!(sup_dist(&c.p_corr, &p_true) <= 1e-8);
    }

    #[test]
    fn negative_inverse_component() {
        let t = TransitionMatrix::symmetric(0.1);
        let raw = dist(1, vec![1.0, 0.0]);
        let d = correct_direct_inverse(&t, &raw).unwrap();
        // ((1-ε)/(1-2ε), -ε/(1-2ε))
        assert!((d.p_corr[0] - 1.125).abs() < 1e-15);
        assert!((d.p_corr[1] + 0.125).abs() < 1e-15);
        assert!((d.negative_mass_removed - 0.125).abs() < 1e-15);
        let c = correct_constrained(&t, &raw, DEFAULT_KKT_TOL).unwrap();
        assert!(on_simplex(&c.p_corr));
        assert!((c.p_corr[0] - 1.0).abs() < 1e-12);
        // T (1,0) = (0.9, 0.1)
        assert!((c.residual - 0.1f64.hypot(0.1)).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_refused() {
        let t = TransitionMatrix::symmetric(0.5);
        let raw = dist(1, vec![0.5, 0.5]);
        match correct_direct_inverse(&t, &raw) {
            Err(Error::IllConditioned { rcond }) => assert!(rcond < RCOND_THRESHOLD),
            other => panic!("{other:?}"),
        }
        let t = TransitionMatrix::symmetric(0.5 - 1e-14);
        assert!(matches!(correct_direct_inverse(&t, &raw), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn unnormalized_input_rejected() {
        let t = TransitionMatrix::identity(1);
        let raw = dist(1, vec![0.6, 0.6]);
        assert!(correct_constrained(&t, &raw, DEFAULT_KKT_TOL).is_err());
    }

    #[test]
    fn iteration_cap_returns_best_iterate() {
        let t = presets::melbourne_c4_product().unwrap().exact_full_t(12).unwrap();
        let raw = dist(4, (1..=16).map(|i| i as f64 / 136.0).collect());
        match solve_constrained(&t, &raw, 1e-300, 3) {
            Err(Error::NotConverged { best, iterations, .. }) => {
                assert_eq!(iterations, 3);
                assert!(on_simplex(&best));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn comparison_report() {
        let t = TransitionMatrix::symmetric(0.1);
        let i = TransitionMatrix::identity(1);
        let r = compare_matrices(&[("I".into(), i.clone()), ("T".into(), t.clone())], "T_meas", &t).unwrap();
        assert_eq!(r.rows[1].scaled_frobenius, 0.0);
        assert_eq!(r.rows[1].max, 0.0);
        assert!((r.rows[0].scaled_frobenius - 0.1 * 2f64.sqrt()).abs() < 1e-15);
        let csv = r.to_csv().unwrap();
        assert!(csv.starts_with("matrix,reference,scaled_frobenius,max,entries_outside_unit\n"));
        let text = r.to_text(&MatrixNorm::ALL);
        assert_eq!(text.lines().count(), 3);
        let cells: Vec<&str> = text.lines().nth(1).unwrap().split_whitespace().collect();
        assert_eq!(cells, ["I", "1.4e-1", "1.0e-1", "0"]);
        let bad = TransitionMatrix::from_rows(&[vec![1.2, 0.0], vec![-0.2, 1.0]]).unwrap();
        let r = compare_matrices(&[("bad".into(), bad)], "I", &i).unwrap();
        assert_eq!(r.rows[0].entries_outside_unit, 2);
        assert!(compare_matrices(&[("x".into(), TransitionMatrix::identity(2))], "I", &i).is_err());
    }

    fn random_stochastic(n: usize, seed: &[f64]) -> TransitionMatrix {
        let dim = 1 << n;
        let cols = (0..dim)
            .map(|c| {
                let mut v: Vec<f64> = (0..dim).map(|r| seed[(r * 7 + c * 3) % seed.len()] + if r == c { 4.0 } else { 0.0 }).collect();
                let s: f64 = v.iter().sum();
                v.iter_mut().for_each(|x| *x /= s);
                v
            })
            .collect();
        TransitionMatrix::from_columns(n, cols).unwrap()
    }

    fn permute_qubits(n: usize, perm: &[usize], x: usize) -> usize {
        let b = BitString::from_index(n, x);
        let mut y = BitString::zeros(n);
        for (q, &to) in perm.iter().enumerate() {
            y = y.with_bit(to, b.bit(q));
        }
        y.index()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn constrained_is_feasible_and_beats_projected_inverse(
            seed in prop::collection::vec(0.0f64..1.0, 11),
            raw in prop::collection::vec(0.0f64..1.0, 8),
        ) {
            let t = random_stochastic(3, &seed);
            let s: f64 = raw.iter().sum::<f64>() + 1e-9;
            let raw = dist(3, raw.iter().map(|v| (v + 1e-9 / 8.0) / s).collect());
            let c = correct_constrained(&t, &raw, DEFAULT_KKT_TOL).unwrap();
            prop_assert!(on_simplex(&c.p_corr));
            prop_assert!(c.residual >= 0.0);
            let d = correct_direct_inverse(&t, &raw).unwrap();
            let projected = project_simplex(&d.p_corr);
            prop_assert!(objective(&t, &c.p_corr, raw.probs()) <= objective(&t, &projected, raw.probs()) + 1e-12);
        }

        #[test]
        fn permutation_equivariance(
            seed in prop::collection::vec(0.0f64..1.0, 13),
            raw in prop::collection::vec(0.01f64..1.0, 8),
            perm in Just(vec![0usize, 1, 2]).prop_shuffle(),
        ) {
            let n = 3;
            let t = random_stochastic(n, &seed);
            let s: f64 = raw.iter().sum();
            let raw: Vec<f64> = raw.iter().map(|v| v / s).collect();
            let map = |x| permute_qubits(n, &perm, x);
            let mut tp = TransitionMatrix::zeros(n);
            let mut rp = vec![0.0; 8];
            for x in 0..8 {
                rp[map(x)] = raw[x];
                for xp in 0..8 {
                    tp.set(map(x), map(xp), t.get(x, xp));
                }
            }
            let a = correct_constrained(&t, &dist(n, raw), DEFAULT_KKT_TOL).unwrap();
            let b = correct_constrained(&tp, &dist(n, rp), DEFAULT_KKT_TOL).unwrap();
            for x in 0..8 {
                prop_assert!((a.p_corr[x] - b.p_corr[map(x)]).abs() < 1e-7);
            }
        }
    }
}
