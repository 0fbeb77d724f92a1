//! Monte Carlo checks of the regression model; tolerances follow from the
//! standard errors of the simulated averages.

use eit_core::forward::ForwardModel;
use eit_core::statmodel::*;
use eit_core::{ProblemSetup, ProblemSpec};
use nalgebra::{DMatrix, SymmetricEigen};
use statrs::distribution::{ChiSquared, ContinuousCDF};

const THETA0: [f64; 2] = [2.0, 1.5];

fn model() -> impl ForwardModel {
    ProblemSetup::build(&ProblemSpec::reference()).unwrap().condensed_forward().unwrap()
}

fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone()).eigenvalues.amax()
}

#[test]
fn simulated_noise_and_design_have_the_right_law() {
    let model = model();
    let n = 100_000;
    let data = simulate(&model, &THETA0, n, 11).unwrap();
    let g = model.forward_matrix(&THETA0).unwrap().g;
    let m = g.nrows();
    let mut sum = vec![0.0; m];
    let mut sum_sq = vec![0.0; m];
    let mut counts = vec![0usize; m];
    for o in &data.observations {
        counts[o.x] += 1;
        for j in 0..m {
            let e = o.y[j] - g[(o.x, j)];
            sum[j] += e;
            sum_sq[j] += e * e;
        }
    }
    for j in 0..m {
        let mean = sum[j] / n as f64;
        let var = sum_sq[j] / n as f64 - mean * mean;
        assert!(mean.abs() <= 4.0 / (n as f64).sqrt(), "coordinate {j}: mean {mean}");
        assert!((var - 1.0).abs() <= 0.05, "coordinate {j}: variance {var}");
    }
    let expected = n as f64 / m as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((m - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(chi2 < critical, "chi2 {chi2} >= {critical}");
}

#[test]
fn score_has_mean_zero_and_covariance_equal_to_the_information() {
    let model = model();
    let n = 200_000;
    let data = simulate(&model, &THETA0, n, 12).unwrap();
    let (g, s) = model.forward_with_sensitivity(&THETA0).unwrap();
    let info = information_matrix(&model, &THETA0).unwrap();
    let mut mean = [0.0; 2];
    let mut outer = DMatrix::zeros(2, 2);
    for o in &data.observations {
        let sc = score_from(&g.g, &s, &o.y, o.x);
        for a in 0..2 {
            mean[a] += sc[a];
            for b in 0..2 {
                outer[(a, b)] += sc[a] * sc[b];
            }
        }
    }
    for a in 0..2 {
        let m = mean[a] / n as f64;
        assert!(m.abs() <= 4.0 * (info.n_mat[(a, a)] / n as f64).sqrt(), "score mean {a}: {m}");
    }
    outer /= n as f64;
    let gap = spectral_norm(&(&outer - &info.n_mat)) / spectral_norm(&info.n_mat);
    assert!(gap <= 0.05, "relative gap {gap}");
}

#[test]
fn information_is_positive_definite() {
    let model = model();
    let info = information_matrix(&model, &THETA0).unwrap();
    assert!(info.min_eigenvalue > 0.0);
    assert!((&info.n_mat - info.n_mat.transpose()).amax() == 0.0);
    assert!(information_matrix(&model, &[0.5, 1.0]).is_err());
}

#[test]
fn likelihood_gradient_is_the_total_score() {
    let model = model();
    let data = simulate(&model, &THETA0, 500, 13).unwrap();
    let theta = [2.3, 1.2];
    let (g, s) = model.forward_with_sensitivity(&theta).unwrap();
    let total = SufficientStats::new(&data).total_score(&g.g, &s);
    for k in 0..2 {
        let h = 1e-4;
        let mut p = theta.to_vec();
        let mut m = theta.to_vec();
        p[k] += h;
        m[k] -= h;
        let fd = (log_likelihood(&model, &p, &data).unwrap() - log_likelihood(&model, &m, &data).unwrap()) / (2.0 * h);
        assert!((fd - total[k]).abs() <= 1e-3 * total[k].abs(), "{k}: {fd} vs {}", total[k]);
    }
}

#[test]
fn recentering_statistic_has_the_efficient_covariance() {
    let model = model();
    let (n, replicates) = (4000, 200);
    let info = information_matrix(&model, &THETA0).unwrap();
    let target = info.inverse().unwrap();
    let mut cov = DMatrix::zeros(2, 2);
    for r in 0..replicates {
        let data = simulate(&model, &THETA0, n, 1000 + r).unwrap();
        let psi = recentering(&model, &THETA0, &data).unwrap();
        let z: Vec<f64> = psi.iter().zip(&THETA0).map(|(p, t)| (n as f64).sqrt() * (p - t)).collect();
        for a in 0..2 {
            for b in 0..2 {
                cov[(a, b)] += z[a] * z[b] / replicates as f64;
            }
        }
    }
    let gap = spectral_norm(&(&cov - &target)) / spectral_norm(&target);
    assert!(gap <= 0.2, "relative gap {gap}");
}
