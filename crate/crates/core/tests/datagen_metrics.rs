use bloc_core::benchfns::{BenchFunction, BenchmarkSpec};
use bloc_core::corrspace::*;
use bloc_core::datagen::*;
use bloc_core::estimate::{sample_moments, Denominator};
use bloc_core::linalg;
use bloc_core::metrics::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_support(d: usize, p: f64, rng: &mut ChaCha8Rng) -> Support {
    let mut pairs = Vec::new();
    for i in 0..d {
        for j in 0..i {
            if rng.random_bool(p) {
                pairs.push((i, j));
            }
        }
    }
    Support::from_edges(d, &pairs).unwrap()
}

/// Counts over the upper triangle of the 0/1 matrices.
fn brute_force(est: &Support, truth: &Support) -> (f64, f64, f64) {
    let (e, t) = (est.to_matrix(), truth.to_matrix());
    let d = e.nrows();
    let (mut tp, mut fp, mut tn, mut fneg) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..d {
        for j in i + 1..d {
            match (e[(i, j)] == 1.0, t[(i, j)] == 1.0) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fneg += 1.0,
                (false, false) => tn += 1.0,
            }
        }
    }
    let tpr = if tp + fneg > 0.0 { tp / (tp + fneg) } else { 0.0 };
    let fpr = if fp + tn > 0.0 { fp / (fp + tn) } else { 0.0 };
    let den: f64 = (tp + fp) * (tp + fneg) * (tn + fp) * (tn + fneg);
    let mcc = if den > 0.0 { (tp * tn - fp * fneg) / den.sqrt() } else { 0.0 };
    (tpr, fpr, mcc)
}

#[test]
fn metrics_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let eye = DMatrix::identity(10, 10);
    for _ in 0..100 {
        let (pe, pt) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        let est = random_support(10, pe, &mut rng);
        let truth = random_support(10, pt, &mut rng);
        let m = compute_metrics(&eye, &est, &eye, &truth).unwrap();
        assert_eq!((m.tpr, m.fpr, m.mcc), brute_force(&est, &truth));
    }
}

#[test]
fn three_by_three_by_hand() {
    let truth = Support::from_edges(3, &[(1, 0)]).unwrap();
    let est = Support::from_edges(3, &[(1, 0), (2, 0)]).unwrap();
    let eye = DMatrix::identity(3, 3);
    let m = compute_metrics(&eye, &est, &eye, &truth).unwrap();
    assert_eq!(m.tpr, 1.0);
    assert_eq!(m.fpr, 0.5);
    assert!((m.mcc - 0.5).abs() < 1e-15);
}

#[test]
fn error_norms_by_hand() {
    let truth = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
    let est = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]);
    let s = Support::empty(2);
    let m = compute_metrics(&est, &s, &truth, &s).unwrap();
    assert!((m.rmse - 0.3).abs() < 1e-15);
    assert!((m.mad - 0.3).abs() < 1e-15);
    assert!((m.frob - 0.18f64.sqrt()).abs() < 1e-15);
    assert!((m.spec - 0.3).abs() < 1e-12);
}

proptest! {
    #[test]
    fn mcc_is_symmetric_and_bounded(seed in any::<u64>(), d in 2usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_support(d, 0.4, &mut rng);
        let b = random_support(d, 0.4, &mut rng);
        let ab = Confusion::between(&a, &b).unwrap();
        let ba = Confusion::between(&b, &a).unwrap();
        prop_assert!((ab.mcc() - ba.mcc()).abs() < 1e-15);
        prop_assert!((-1.0..=1.0).contains(&ab.mcc()));
        prop_assert_eq!(ab.tp + ab.fp + ab.tn + ab.r#fn, d * (d - 1) / 2);
        let same = Confusion::between(&a, &a).unwrap();
        prop_assert_eq!(same.fp + same.r#fn, 0);
    }

    #[test]
    fn threshold_support_is_symmetric(seed in any::<u64>(), tol in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = phi_to_corr(&AngularVector::random(6, &mut rng));
        let s = Support::from_threshold(c.as_matrix(), tol).unwrap();
        for i in 0..6 {
            prop_assert!(!s.contains(i, i));
            for j in 0..6 {
                prop_assert_eq!(s.contains(i, j), s.contains(j, i));
                if i != j {
                    prop_assert_eq!(s.contains(i, j), c.get(i, j).abs() > tol);
                }
            }
        }
    }
}

#[test]
fn closed_form_generators_are_exact() {
    for d in [10, 20, 40] {
        let toe = gen_truth(&TruthSpec::new(TruthDesign::Toeplitz, d)).unwrap();
        let band = gen_truth(&TruthSpec::new(TruthDesign::Banded, d)).unwrap();
        let block = gen_truth(&TruthSpec::new(TruthDesign::BlockFixed, d)).unwrap();
        for i in 0..d {
            for j in 0..d {
                let k = i.abs_diff(j);
                assert_eq!(toe.matrix[(i, j)], 0.75f64.powi(k as i32));
                assert_eq!(band.matrix[(i, j)], if k <= 10 { 1.0 - k as f64 / 10.0 } else { 0.0 });
                let f = match (i == j, i / 10 == j / 10) {
                    (true, _) => 1.0,
                    (false, true) => 0.8,
                    (false, false) => 0.0,
                };
                assert_eq!(block.matrix[(i, j)], f);
            }
        }
        for t in [&toe, &band, &block] {
            assert!(linalg::is_positive_definite(&t.matrix));
        }
        // lag 10 is already zero
        assert_eq!(band.support.edge_count(), (1..10).map(|k| d.saturating_sub(k)).sum::<usize>());
    }
}

#[test]
fn random_generators_are_pd_with_exact_counts() {
    for seed in 0..20 {
        let t = gen_truth(&TruthSpec::new(TruthDesign::UniformSparse, 20).with_sparsity(0.9).with_seed(seed)).unwrap();
        assert_eq!(t.support.edge_count(), 19);
        assert!(linalg::is_positive_definite(&t.matrix));
        for i in 0..20 {
            assert_eq!(t.matrix[(i, i)], 1.0);
            for j in 0..i {
                let v = t.matrix[(i, j)];
                assert!(v == 0.0 || (0.3..=0.6).contains(&v));
            }
        }
        let b = gen_truth(&TruthSpec::new(TruthDesign::BlockRandom5, 15).with_seed(seed)).unwrap();
        assert!(linalg::is_positive_definite(&b.matrix));
        assert!(validate_corr(&b.matrix, 1e-12).is_ok());
    }
    let full = gen_truth(&TruthSpec::new(TruthDesign::UniformSparse, 6).with_sparsity(1.0)).unwrap();
    assert_eq!(full.support.edge_count(), 0);
}

#[test]
fn sample_covariance_converges() {
    let truth = gen_truth(&TruthSpec::new(TruthDesign::Toeplitz, 4)).unwrap();
    let sigma = truth.matrix.map(|v| 2.0 * v);
    let x = sample_mvn(&sigma, 100_000, 3).unwrap();
    let s = sample_moments(&x, Denominator::Unbiased).unwrap();
    // standard error of a covariance entry is at most sqrt(2) * 2 / sqrt(n)
    let err = linalg::max_abs_diff(&s.covariance, &sigma);
    assert!(err < 0.03, "{err}");
    let means = x.values().row_mean();
    assert!(means.amax() < 0.03);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn benchmarks_are_nonnegative(seed in any::<u64>(), d in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = phi_to_corr(&AngularVector::random(d, &mut rng));
        for f in BenchFunction::ALL {
            let v = BenchmarkSpec::new(f, d).unwrap().value(&c).unwrap();
            prop_assert!(v >= -1e-12, "{f:?} {v}");
        }
    }

    #[test]
    fn symmetric_functions_ignore_variable_order(seed in any::<u64>(), d in 3usize..7) {
        // relabeling variables permutes the off-diagonal entries
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = phi_to_corr(&AngularVector::random(d, &mut rng));
        let perm: Vec<usize> = (0..d).rev().collect();
        let p = DMatrix::from_fn(d, d, |i, j| c.get(perm[i], perm[j]));
        let p = validate_corr(&p, 1e-12).unwrap();
        for f in [BenchFunction::Ackley, BenchFunction::Rastrigin] {
            let spec = BenchmarkSpec::new(f, d).unwrap();
            let (a, b) = (spec.value(&c).unwrap(), spec.value(&p).unwrap());
            prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn scale_multiplies_the_argument(seed in any::<u64>(), s in 0.1f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = phi_to_corr(&AngularVector::random(4, &mut rng));
        for f in BenchFunction::ALL {
            let spec = BenchmarkSpec::new(f, 4).unwrap().with_scale(s);
            let raw: Vec<f64> = BenchmarkSpec::new(f, 4).unwrap().with_scale(1.0).vectorize(&c).iter().map(|v| s * v).collect();
            prop_assert_eq!(spec.value(&c).unwrap(), f.classical(&raw));
        }
    }
}

#[test]
fn benchmark_minimum_is_the_identity() {
    for f in BenchFunction::ALL {
        let v = BenchmarkSpec::new(f, 5).unwrap().value(&CorrelationMatrix::identity(5)).unwrap();
        if f == BenchFunction::Rosenbrock {
            // the unconstrained minimizer (all ones) is not a correlation
            assert!(v > 0.0);
        } else {
            assert!(v.abs() < 1e-12, "{f:?} {v}");
        }
    }
}
