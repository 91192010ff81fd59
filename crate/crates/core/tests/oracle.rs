//! Estimator against the exhaustive oracle on random in-range models, plus
//! serialization round trips through files.

use approx::assert_relative_eq;
use proptest::prelude::*;
use tmest::estimate::{assemble_t_pair, estimate_t};
use tmest::norm::asymptotic_frobenius_error;
use tmest::{
    norm_distance, Backend, BitString, Dataset, MatrixNorm, NoiseModel, NoiseModelSpec, ProbDist, RegisterGeometry,
    Session,
};

/// Per-qubit readout errors plus small shifts and covariances that keep every
/// probability well inside [0, 1].
fn random_model(geometry: RegisterGeometry, params: &[f64]) -> Option<NoiseModel> {
    let n = geometry.n();
    let mut it = params.iter().cycle().copied();
    let base = (0..n)
        .map(|_| {
            let e0 = 0.05 + 0.1 * it.next().unwrap();
            let e1 = 0.05 + 0.1 * it.next().unwrap();
            [[1.0 - e0, e1], [e0, 1.0 - e1]]
        })
        .collect();
    let mut spec = NoiseModelSpec::product(geometry.clone(), base);
    for i in 0..n {
        for j in 0..n {
            if i != j && geometry.chebyshev(i, j) == 1 {
                spec = spec.with_shift(i, j, 0.008 * (it.next().unwrap() - 0.5));
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let c = [0; 4].map(|_| 8e-5 * (it.next().unwrap() - 0.5));
            spec = spec.with_pair_cov(i, j, [[c[0], c[1]], [c[2], c[3]]]);
            for l in (0..n).filter(|&l| l != i && l != j) {
                if geometry.chebyshev(i, l).min(geometry.chebyshev(j, l)) == 1 {
                    spec = spec.with_pair_shift(i, j, l, 1e-5 * (it.next().unwrap() - 0.5));
                }
            }
        }
    }
    spec.with_ranges(Some(1), Some(1)).build().ok()
}

fn check_exactness(model: NoiseModel, k: usize) -> Result<(), TestCaseError> {
    let exact = model.exact_full_t(12).unwrap();
    for s in exact.column_sums() {
        prop_assert!((s - 1.0).abs() < 1e-12);
    }
    let g = model.geometry().clone();
    let mut backend = Backend::exact(model);
    let mut session = Session::new(&mut backend);
    let est = estimate_t(&mut session, &g, k).unwrap();
    prop_assert!(norm_distance(&est.t_est, &exact, MatrixNorm::Max).unwrap() <= 1e-12);
    for s in assemble_t_pair(&est.tables).unwrap().column_sums() {
        prop_assert!(s.abs() <= 1e-12);
    }
    prop_assert!(est.tables.invariant_residual() <= 1e-12);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn chain_estimate_is_exact_within_range(n in 3usize..=6, params in prop::collection::vec(0.0f64..1.0, 17)) {
        let model = random_model(RegisterGeometry::chain(n).unwrap(), &params);
        prop_assume!(model.is_some());
        check_exactness(model.unwrap(), 2)?;
    }

    #[test]
    fn grid_estimate_is_exact_within_range(params in prop::collection::vec(0.0f64..1.0, 23)) {
        let model = random_model(RegisterGeometry::grid(2, 3).unwrap(), &params);
        prop_assume!(model.is_some());
        check_exactness(model.unwrap(), 8)?;
    }

    #[test]
    fn sampled_answers_survive_export_and_reingest(seed in any::<u64>(), shots in 1u64..5000) {
        let model = tmest::presets::melbourne_c4().unwrap();
        let mut sampled = Backend::sampled(model, shots, seed).unwrap();
        let records: Vec<_> = BitString::all(4).map(|x| sampled.sample_counts(x, shots).unwrap()).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dataset.json");
        Dataset::new(4, records.clone()).unwrap().write(&path).unwrap();
        let mut replay = Backend::ingest(&path).unwrap();
        for rec in &records {
            prop_assert_eq!(&replay.sample_counts(rec.prepared, 1).unwrap(), rec);
            prop_assert_eq!(replay.distribution(rec.prepared).unwrap(), ProbDist::from_counts(rec));
        }
    }
}

#[test]
fn model_file_round_trip_preserves_exact_matrix() {
    let model = tmest::presets::melbourne_c8().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    std::fs::write(&path, model.to_json_string().unwrap()).unwrap();
    let back = NoiseModel::from_json_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back.exact_full_t(12).unwrap(), model.exact_full_t(12).unwrap());
}

#[test]
fn asymptote_examples() {
    let a = asymptotic_frobenius_error(2, 1e-4).unwrap();
    assert_relative_eq!(a.frobenius, 4.8990e-4, max_relative = 1e-4);
    assert_eq!(asymptotic_frobenius_error(5, 0.0).unwrap().frobenius, 0.0);
    let b = asymptotic_frobenius_error(8, 1e-6).unwrap();
    assert_relative_eq!(b.scaled / (8.0 * 1e-6), 1.0607, max_relative = 1e-4);
    assert!(asymptotic_frobenius_error(1, 1e-3).is_err());
}
