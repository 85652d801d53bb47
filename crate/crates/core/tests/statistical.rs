//! Monte Carlo distributional checks: null calibration of the
//! likelihood-ratio test, standard normality of quantile residuals and of
//! the class residuals with parameters held at truth.

use compresid::dirichlet::{marginal_beta_params, sample, DirichletParams};
use compresid::regression::{
    fit_mle, linear_predictors, lr_test, CoefficientVector, FitOptions, ModelSpec, RegressionData,
    TermList,
};
use compresid::residuals::{quantile_residuals, ResidualKind};
use compresid::rng::RngStream;
use compresid::simstudy::{ad_statistic, fixed_param_pooled_s};
use compresid::Mat;

// Stephens' upper-tail points for the fully specified AD test.
const AD_CRIT_5PCT: f64 = 2.492;
const AD_CRIT_1PCT: f64 = 3.857;

#[test]
fn pooled_quantile_residuals_are_standard_normal() {
    // known parameters, no estimation: each component's q is exactly
    // standard normal, so the per-component pooled AD stays below the
    // 5% critical value
    let spec = ModelSpec::homogeneous(
        3,
        TermList::with_columns(true, vec![0]),
        TermList::intercept_only(),
    );
    let mut coef = CoefficientVector::zeros(&spec);
    coef.beta[0] = vec![0.1, 0.8];
    coef.beta[1] = vec![-0.2, 0.3];
    coef.gamma = vec![3.0];
    let n = 10_000;
    let mut rng = RngStream::new(314, 0);
    let mut cov = Mat::zeros(n, 1);
    for i in 0..n {
        cov[(i, 0)] = rng.next_f64();
    }
    let mut fitted_mu = Mat::zeros(n, 3);
    let mut fitted_phi = vec![0.0; n];
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let (mu, phi) = linear_predictors(&spec, &coef, cov.row(i)).unwrap();
        let params = DirichletParams::new(mu.clone(), phi).unwrap();
        y.push(sample(&params, &mut rng));
        fitted_mu.row_mut(i).copy_from_slice(&mu);
        fitted_phi[i] = phi;
    }
    let fit = compresid::regression::FittedModel {
        spec,
        coef,
        loglik: 0.0,
        fitted_mu,
        fitted_phi,
        std_errors: None,
        converged: true,
        iterations: 0,
    };
    let q = quantile_residuals(&fit, &y).unwrap();
    for j in 0..3 {
        let col: Vec<f64> = (0..n).map(|i| q.q[(i, j)]).collect();
        let a2 = ad_statistic(&col).unwrap();
        assert!(a2 < AD_CRIT_5PCT, "component {j}: AD = {a2}");
    }
}

#[test]
fn fixed_param_class_residuals_pass_ad_at_1pct() {
    // the empirical face of the limit law: parameters held at truth,
    // pooled s over repetitions is standard normal
    for kind in [ResidualKind::A1, ResidualKind::Q2] {
        let s = fixed_param_pooled_s(20, 99, 60, kind, 2025).unwrap();
        assert_eq!(s.len(), 20 * 60);
        let a2 = ad_statistic(&s).unwrap();
        assert!(a2 < AD_CRIT_1PCT, "kind {kind:?}: AD = {a2}");
    }
}

#[test]
fn sampled_component_matches_marginal_beta() {
    // KS check of a sampled marginal against reg_inc_beta, k = 4
    let p = DirichletParams::new(vec![0.15, 0.5, 0.15, 0.2], 35.0).unwrap();
    let (a, b) = marginal_beta_params(&p, 1).unwrap();
    let mut rng = RngStream::new(55, 0);
    let n = 50_000;
    let mut draws: Vec<f64> = (0..n).map(|_| sample(&p, &mut rng).values()[1]).collect();
    draws.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut ks = 0.0f64;
    for (i, &x) in draws.iter().enumerate() {
        let f = compresid::special::reg_inc_beta(x, a, b).unwrap();
        ks = ks.max((f - i as f64 / n as f64).abs());
        ks = ks.max((f - (i + 1) as f64 / n as f64).abs());
    }
    assert!(ks < 0.01, "KS = {ks}");
}

#[test]
fn lr_test_null_pvalues_are_uniform() {
    // fit full (precision depends on x) vs reduced (constant precision)
    // on data simulated under the reduced model; p-values ~ U(0,1)
    let full = ModelSpec::homogeneous(
        3,
        TermList::with_columns(true, vec![0, 1]),
        TermList::with_columns(true, vec![0, 1]),
    );
    let reduced = ModelSpec::homogeneous(
        3,
        TermList::with_columns(true, vec![0, 1]),
        TermList::intercept_only(),
    );
    let mut truth = CoefficientVector::zeros(&reduced);
    truth.beta[0] = vec![-0.3, 1.0, -0.5];
    truth.beta[1] = vec![-0.3, -0.5, 1.0];
    truth.gamma = vec![3.0];

    let datasets = 500;
    let n = 80;
    let mut pvals = Vec::with_capacity(datasets);
    for d in 0..datasets {
        let mut rng = RngStream::new(909, d as u64);
        let mut cov = Mat::zeros(n, 2);
        for i in 0..n {
            cov[(i, 0)] = rng.next_f64();
            cov[(i, 1)] = rng.next_f64();
        }
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let (mu, phi) = linear_predictors(&reduced, &truth, cov.row(i)).unwrap();
            y.push(sample(&DirichletParams::new(mu, phi).unwrap(), &mut rng));
        }
        let data = RegressionData::new(y, cov).unwrap();
        let fit_full = fit_mle(&full, &data, &FitOptions::default()).unwrap();
        let fit_reduced = fit_mle(&reduced, &data, &FitOptions::default()).unwrap();
        let lr = lr_test(&fit_full, &fit_reduced).unwrap();
        assert_eq!(lr.df, 2);
        pvals.push(lr.p);
    }
    pvals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut ks = 0.0f64;
    for (i, &p) in pvals.iter().enumerate() {
        ks = ks.max((p - i as f64 / datasets as f64).abs());
        ks = ks.max((p - (i + 1) as f64 / datasets as f64).abs());
    }
    assert!(ks <= 0.08, "KS = {ks}");
}
