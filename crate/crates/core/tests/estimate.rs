use bloc_core::corrspace::*;
use bloc_core::datagen::*;
use bloc_core::estimate::*;
use bloc_core::linalg;
use bloc_core::penalty::PenaltyFamily;
use bloc_core::rmps::SerialEvaluator;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn quick(loss: LossKind, family: PenaltyFamily, lambdas: Vec<f64>) -> EstimateConfig {
    let mut cfg = EstimateConfig::new(loss, family, lambdas);
    cfg.optimizer.max_iter = 300;
    cfg.optimizer.max_run = 3;
    cfg.optimizer.cache_current_value = true;
    cfg
}

#[test]
fn independent_data_gives_an_empty_support() {
    let x = sample_mvn(&DMatrix::identity(5, 5), 500, 1).unwrap();
    let fit = estimate(&x, &quick(LossKind::Gaussian, PenaltyFamily::scad(), vec![0.3]), &SerialEvaluator).unwrap();
    assert_eq!(fit.support.edge_count(), 0);
    assert!(linalg::max_abs_diff(fit.gamma_hat.as_matrix(), &DMatrix::identity(5, 5)) < 1e-3);
}

#[test]
fn unpenalized_frobenius_returns_the_sample_correlation() {
    let truth = gen_truth(&TruthSpec::new(TruthDesign::Toeplitz, 4)).unwrap();
    let x = sample_mvn(&truth.matrix, 200, 2).unwrap();
    let mut cfg = quick(LossKind::Frobenius, PenaltyFamily::None, vec![0.0]);
    cfg.init = Initialization::Identity;
    cfg.optimizer.restart_mode = bloc_core::rmps::RestartMode::GridRandom;
    cfg.optimizer.max_iter = 5000;
    cfg.optimizer.max_run = 10;
    cfg.optimizer.kappa = 1e-10;
    cfg.optimizer.tau1 = 1e-16;
    cfg.optimizer.tau2 = 0.0;
    let fit = estimate(&x, &cfg, &SerialEvaluator).unwrap();
    let s = sample_moments(&x, Denominator::Unbiased).unwrap();
    let err = linalg::max_abs_diff(fit.gamma_hat.as_matrix(), &s.correlation);
    assert!(err < 1e-4, "{err}");
}

#[test]
fn larger_lambda_selects_fewer_edges() {
    let truth = gen_truth(&TruthSpec::new(TruthDesign::BlockRandom5, 10).with_seed(3)).unwrap();
    let x = sample_mvn(&truth.matrix, 80, 4).unwrap();
    let lambdas = vec![0.0, 0.1, 0.3, 0.6, 1.0];
    let mut cfg = quick(LossKind::Gaussian, PenaltyFamily::L1, lambdas.clone());
    cfg.zero_tol = 0.02;
    let fit = estimate(&x, &cfg, &SerialEvaluator).unwrap();
    let sizes: Vec<f64> = fit.path.iter().map(|f| f.support_size as f64).collect();
    // Spearman correlation between lambda and support size
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|a| v.iter().filter(|b| *b < a).count() as f64 + 0.5 * (v.iter().filter(|b| *b == a).count() as f64 - 1.0))
            .collect()
    };
    let (rl, rs) = (rank(&lambdas), rank(&sizes));
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ml, ms) = (mean(&rl), mean(&rs));
    let cov: f64 = rl.iter().zip(&rs).map(|(a, b)| (a - ml) * (b - ms)).sum();
    let var = |v: &[f64], m: f64| v.iter().map(|a| (a - m) * (a - m)).sum::<f64>();
    let rho = cov / (var(&rl, ml) * var(&rs, ms)).sqrt();
    assert!(rho < -0.8, "{sizes:?}");
    assert!(sizes[0] > sizes[4]);
}

#[test]
fn selection_minimizes_the_score() {
    let truth = gen_truth(&TruthSpec::new(TruthDesign::BlockRandom5, 10).with_seed(5)).unwrap();
    let x = sample_mvn(&truth.matrix, 60, 6).unwrap();
    let fit = estimate(&x, &quick(LossKind::Gaussian, PenaltyFamily::mcp(), vec![0.05, 0.2, 0.5]), &SerialEvaluator).unwrap();
    let best = fit.path.iter().map(|f| f.score).fold(f64::INFINITY, f64::min);
    assert_eq!(fit.selected().score, best);
    let n = 60.0f64;
    for f in &fit.path {
        assert_eq!(f.score, n * f.loss + n.ln() * f.support_size as f64);
    }
    assert_eq!(fit.support.edge_count(), fit.selected().support_size);
}

#[test]
fn singular_sample_needs_frobenius() {
    let x = sample_mvn(&DMatrix::identity(6, 6), 4, 7).unwrap();
    let cfg = quick(LossKind::Gaussian, PenaltyFamily::L1, vec![0.1]);
    assert!(estimate(&x, &cfg, &SerialEvaluator).is_err());
    let cfg = quick(LossKind::Frobenius, PenaltyFamily::L1, vec![0.1]);
    let fit = estimate(&x, &cfg, &SerialEvaluator).unwrap();
    assert!(fit.gamma_hat.min_eigenvalue() > 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn estimate_invariants(seed in any::<u64>(), scale in 0.1f64..10.0) {
        let truth = gen_truth(&TruthSpec::new(TruthDesign::BlockRandom5, 5).with_seed(seed)).unwrap();
        let sigma = truth.matrix.map(|v| v * scale);
        let x = sample_mvn(&sigma, 40, seed ^ 9).unwrap();
        let mut cfg = quick(LossKind::Gaussian, PenaltyFamily::scad(), vec![0.2]);
        cfg.optimizer.max_iter = 100;
        let fit = estimate(&x, &cfg, &SerialEvaluator).unwrap();
        let g = fit.gamma_hat.as_matrix();
        prop_assert!(validate_corr(g, 0.0).is_ok());
        prop_assert!(linalg::is_positive_definite(&fit.sigma_hat));
        for i in 0..5 {
            prop_assert!((fit.sigma_hat[(i, i)] - fit.scale[i] * fit.scale[i]).abs() < 1e-12);
            for j in 0..5 {
                prop_assert_eq!(fit.sigma_hat[(i, j)], fit.sigma_hat[(j, i)]);
                if i != j {
                    prop_assert_eq!(fit.support.contains(i, j), g[(i, j)].abs() > cfg.zero_tol);
                }
            }
        }
        let back = recover_sigma(&fit.gamma_hat, &fit.scale).unwrap();
        prop_assert_eq!(back, fit.sigma_hat);
    }

    #[test]
    fn rescaling_columns_leaves_the_correlation_unchanged(seed in any::<u64>(), a in 0.2f64..5.0) {
        let truth = gen_truth(&TruthSpec::new(TruthDesign::Toeplitz, 4)).unwrap();
        let x = sample_mvn(&truth.matrix, 30, seed).unwrap();
        let scaled = DataMatrix::new(x.values().map(|v| v * a)).unwrap();
        let s1 = sample_moments(&x, Denominator::Unbiased).unwrap();
        let s2 = sample_moments(&scaled, Denominator::Unbiased).unwrap();
        prop_assert!(linalg::max_abs_diff(&s1.correlation, &s2.correlation) < 1e-12);
        for (w1, w2) in s1.scale.iter().zip(&s2.scale) {
            prop_assert!((w2 - a * w1).abs() < 1e-12 * w2.max(1.0));
        }
    }
}
