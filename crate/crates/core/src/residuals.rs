//! The six residuals for Dirichlet regression.
//!
//! Univariate quantile residuals q_ij feed two families:
//!
//! * composite residuals (Pearson and quantile), nonnegative per
//!   observation and therefore not normally distributed;
//! * the bootstrap class residuals s^{a1}, s^{q1}, s^{a2}, s^{q2}, which
//!   are asymptotically standard normal. A class residual combines a
//!   multivariate function (sum of absolute values or of squares of the
//!   q_ij row) with a sign function (h1: sign of the worst-fitting
//!   component's q; h2: sign of q at the column with the largest average
//!   response), then calibrates the signed value l_i = h_i r_i against B
//!   parametric-bootstrap replicates: a_i counts replicate values strictly
//!   below l_i, u_i is drawn uniformly on (a_i/(B+1), (a_i+1)/(B+1)), and
//!   s_i = Phi^{-1}(u_i).

use crate::dirichlet::{sample, Composition, DirichletParams};
use crate::error::{Error, Result};
use crate::exec;
use crate::mat::Mat;
use crate::regression::{fit_mle_parts, FitOptions, FittedModel};
use crate::rng::RngStream;
use crate::special::{inc_beta_raw, norm_quantile_raw};

/// CDF values are clamped into [PROB_FLOOR, 1 - PROB_FLOOR] before the
/// normal quantile, capping residuals near +/-8 instead of producing
/// infinities for boundary-adjacent data.
const PROB_FLOOR: f64 = 1e-15;

/// Which residual to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ResidualKind {
    /// absolute-value multivariate function, worst-component sign
    A1,
    /// quadratic multivariate function, worst-component sign
    Q1,
    /// absolute-value multivariate function, dominant-column sign
    A2,
    /// quadratic multivariate function, dominant-column sign
    Q2,
    /// sum over components of ((y - mu) / sqrt(phi))^2
    CompositePearson,
    /// sum over components of q_ij^2
    CompositeQuantile,
}

impl ResidualKind {
    pub fn is_class(self) -> bool {
        matches!(self, Self::A1 | Self::Q1 | Self::A2 | Self::Q2)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::A1 => "a1",
            Self::Q1 => "q1",
            Self::A2 => "a2",
            Self::Q2 => "q2",
            Self::CompositePearson => "pearson",
            Self::CompositeQuantile => "compq",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "a1" => Ok(Self::A1),
            "q1" => Ok(Self::Q1),
            "a2" => Ok(Self::A2),
            "q2" => Ok(Self::Q2),
            "pearson" => Ok(Self::CompositePearson),
            "compq" => Ok(Self::CompositeQuantile),
            other => Err(Error::InvalidArgument(format!(
                "unknown residual kind '{other}' (expected a1|q1|a2|q2|pearson|compq)"
            ))),
        }
    }

    fn multivariate_fn(self) -> MultivariateFn {
        match self {
            Self::A1 | Self::A2 => MultivariateFn::Absolute,
            Self::Q1 | Self::Q2 | Self::CompositeQuantile | Self::CompositePearson => {
                MultivariateFn::Quadratic
            }
        }
    }

    fn uses_h2(self) -> bool {
        matches!(self, Self::A2 | Self::Q2)
    }
}

/// Aggregation applied to a row of univariate residuals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MultivariateFn {
    Absolute,
    Quadratic,
}

/// n x k matrix of univariate quantile residuals.
#[derive(Clone, Debug)]
pub struct QuantileResiduals {
    pub q: Mat,
}

/// Parametric bootstrap configuration for the class residuals.
#[derive(Clone, Debug)]
pub struct BootstrapConfig {
    /// Number of bootstrap replicates B.
    pub b: usize,
    pub seed: u64,
    /// Redraw budget per replicate when a refit fails.
    pub max_retries_per_replicate: usize,
    /// Retain the B x n matrix of replicate signed residuals in the result.
    pub keep_replicate_residuals: bool,
}

impl BootstrapConfig {
    pub fn new(b: usize, seed: u64) -> Self {
        Self {
            b,
            seed,
            max_retries_per_replicate: 20,
            keep_replicate_residuals: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.b < 1 {
            return Err(Error::InvalidArgument("B must be at least 1".into()));
        }
        Ok(())
    }
}

/// One class residual vector with its bootstrap bookkeeping.
#[derive(Clone, Debug)]
pub struct ClassResidualResult {
    /// The residuals s_i.
    pub s: Vec<f64>,
    /// Bootstrap ranks a_i in 0..=B.
    pub a: Vec<usize>,
    /// Observed signed multivariate residuals l_i.
    pub l: Vec<f64>,
    /// Number of replicate redraws forced by fit failures.
    pub replicate_failures: usize,
    /// B x n replicate signed residuals, kept on request.
    pub replicate_l: Option<Mat>,
}

/// q_ij = Phi^{-1}[ I_{y_ij}(phi_i mu_ij, phi_i (1 - mu_ij)) ], with the
/// CDF value clamped away from 0 and 1 before inversion.
pub fn quantile_residuals(fit: &FittedModel, y: &[Composition]) -> Result<QuantileResiduals> {
    let n = y.len();
    if n != fit.fitted_phi.len() {
        return Err(Error::Dimension(format!(
            "fit has {} observations, data has {n}",
            fit.fitted_phi.len()
        )));
    }
    let k = fit.fitted_mu.cols();
    for (i, c) in y.iter().enumerate() {
        if c.k() != k {
            return Err(Error::InvalidRow {
                row: i,
                msg: format!("expected {k} components, got {}", c.k()),
            });
        }
    }
    Ok(QuantileResiduals {
        q: quantile_matrix(&fit.fitted_mu, &fit.fitted_phi, y),
    })
}

pub(crate) fn quantile_matrix(mu: &Mat, phi: &[f64], y: &[Composition]) -> Mat {
    let n = y.len();
    let k = mu.cols();
    let mut q = Mat::zeros(n, k);
    for i in 0..n {
        let mrow = mu.row(i);
        let p = phi[i];
        let w = y[i].values();
        for j in 0..k {
            let cdf = inc_beta_raw(w[j], p * mrow[j], p * (1.0 - mrow[j]));
            let clamped = cdf.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
            q[(i, j)] = norm_quantile_raw(clamped);
        }
    }
    q
}

/// Sum of |q_j| or of q_j^2 over one residual row.
pub fn multivariate_residual(q_row: &[f64], function: MultivariateFn) -> f64 {
    match function {
        MultivariateFn::Absolute => q_row.iter().map(|v| v.abs()).sum(),
        MultivariateFn::Quadratic => q_row.iter().map(|v| v * v).sum(),
    }
}

/// Composite Pearson residual: sum over components of
/// ((y_ij - mu_ij) / sqrt(phi_i))^2.
pub fn composite_pearson(fit: &FittedModel, y: &[Composition]) -> Result<Vec<f64>> {
    let n = y.len();
    if n != fit.fitted_phi.len() {
        return Err(Error::Dimension(format!(
            "fit has {} observations, data has {n}",
            fit.fitted_phi.len()
        )));
    }
    Ok((0..n)
        .map(|i| {
            let mrow = fit.fitted_mu.row(i);
            let sp = fit.fitted_phi[i].sqrt();
            y[i].values()
                .iter()
                .zip(mrow)
                .map(|(&w, &m)| {
                    let z = (w - m) / sp;
                    z * z
                })
                .sum()
        })
        .collect())
}

/// Composite quantile residual: sum over components of q_ij^2.
pub fn composite_quantile(fit: &FittedModel, y: &[Composition]) -> Result<Vec<f64>> {
    let q = quantile_residuals(fit, y)?;
    Ok((0..y.len())
        .map(|i| multivariate_residual(q.q.row(i), MultivariateFn::Quadratic))
        .collect())
}

#[inline]
fn sign_of(v: f64) -> f64 {
    // sign(0) is +1 by convention
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Sign of q at the component with the largest |q| (ties: lowest index).
pub fn sign_h1(q_row: &[f64]) -> f64 {
    let mut best = 0;
    for (j, v) in q_row.iter().enumerate().skip(1) {
        if v.abs() > q_row[best].abs() {
            best = j;
        }
    }
    sign_of(q_row[best])
}

/// Column with the largest average response (ties: lowest index).
pub(crate) fn dominant_column(y: &[Composition]) -> usize {
    let k = y[0].k();
    let mut sums = vec![0.0; k];
    for c in y {
        for (j, &w) in c.values().iter().enumerate() {
            sums[j] += w;
        }
    }
    let mut best = 0;
    for (j, &s) in sums.iter().enumerate().skip(1) {
        if s > sums[best] {
            best = j;
        }
    }
    best
}

/// h2 signs: one dominant column m per dataset, h_i = sign(q_im).
pub fn sign_h2(q: &QuantileResiduals, y: &[Composition]) -> Vec<f64> {
    let m = dominant_column(y);
    (0..y.len()).map(|i| sign_of(q.q[(i, m)])).collect()
}

/// Signed multivariate residuals l_i = h_i r_i for one class kind.
fn class_l_values(kind: ResidualKind, q: &Mat, y: &[Composition]) -> Vec<f64> {
    let mv = kind.multivariate_fn();
    let n = y.len();
    if kind.uses_h2() {
        let m = dominant_column(y);
        (0..n)
            .map(|i| sign_of(q[(i, m)]) * multivariate_residual(q.row(i), mv))
            .collect()
    } else {
        (0..n)
            .map(|i| sign_h1(q.row(i)) * multivariate_residual(q.row(i), mv))
            .collect()
    }
}

fn simulate_responses(params: &[DirichletParams], rng: &mut RngStream) -> Vec<Composition> {
    params.iter().map(|p| sample(p, rng)).collect()
}

pub(crate) fn row_params(fit: &FittedModel) -> Result<Vec<DirichletParams>> {
    (0..fit.fitted_phi.len())
        .map(|i| DirichletParams::new(fit.fitted_mu.row(i).to_vec(), fit.fitted_phi[i]))
        .collect()
}

enum RefitMode<'a> {
    /// Step 3 of the algorithm: refit the same spec on each replicate.
    Refit {
        fit: &'a FittedModel,
        covariates: &'a Mat,
    },
    /// Parameters held fixed (no estimation) for limit-law studies.
    Fixed { mu: &'a Mat, phi: &'a [f64] },
}

fn class_residuals_engine(
    params: &[DirichletParams],
    mode: &RefitMode,
    y_obs: &[Composition],
    q_obs: &Mat,
    kinds: &[ResidualKind],
    cfg: &BootstrapConfig,
) -> Result<Vec<ClassResidualResult>> {
    cfg.validate()?;
    if kinds.is_empty() {
        return Err(Error::InvalidArgument("no residual kinds requested".into()));
    }
    if let Some(k) = kinds.iter().find(|k| !k.is_class()) {
        return Err(Error::InvalidArgument(format!(
            "'{}' is not a class residual",
            k.name()
        )));
    }
    let n = y_obs.len();
    let b_total = cfg.b;
    let l_obs: Vec<Vec<f64>> = kinds
        .iter()
        .map(|&k| class_l_values(k, q_obs, y_obs))
        .collect();

    // replicates are independent tasks keyed by their index; results merge
    // in index order, so the outcome is schedule-independent
    let replicate_out = exec::try_map_indexed(b_total, |idx| {
        let b = idx + 1;
        let mut retries = 0usize;
        loop {
            let base = RngStream::new(cfg.seed, b as u64);
            let mut stream = if retries == 0 {
                base
            } else {
                base.derive(retries as u64)
            };
            let y_b = simulate_responses(params, &mut stream);
            let q_b = match mode {
                RefitMode::Refit { fit, covariates } => {
                    match fit_mle_parts(&fit.spec, &y_b, covariates, &FitOptions::default()) {
                        Ok(fit_b) => quantile_matrix(&fit_b.fitted_mu, &fit_b.fitted_phi, &y_b),
                        Err(Error::FitFailure(msg)) => {
                            retries += 1;
                            if retries > cfg.max_retries_per_replicate {
                                return Err(Error::ReplicateFailure {
                                    replicate: b,
                                    retries: retries - 1,
                                    msg,
                                });
                            }
                            continue;
                        }
                        Err(other) => return Err(other),
                    }
                }
                RefitMode::Fixed { mu, phi } => quantile_matrix(mu, phi, &y_b),
            };
            let l_b: Vec<Vec<f64>> = kinds
                .iter()
                .map(|&k| class_l_values(k, &q_b, &y_b))
                .collect();
            return Ok((retries, l_b));
        }
    })?;

    let replicate_failures: usize = replicate_out.iter().map(|(r, _)| r).sum();
    let mut results = Vec::with_capacity(kinds.len());
    for (ki, l_o) in l_obs.iter().enumerate() {
        let mut a = vec![0usize; n];
        for (_, l_b) in &replicate_out {
            for (ai, (&lb, &lo)) in a.iter_mut().zip(l_b[ki].iter().zip(l_o)) {
                // strict inequality: ties count as not-less
                if lb < lo {
                    *ai += 1;
                }
            }
        }
        // u_i comes from its own stream (B + 1 + i), shared across kinds so
        // that multi-kind runs agree bit-for-bit with single-kind runs
        let denom = (b_total + 1) as f64;
        let mut s = Vec::with_capacity(n);
        for (i, &ai) in a.iter().enumerate() {
            let u01 = RngStream::new(cfg.seed, (b_total + 1 + i) as u64).next_f64();
            let u = ((ai as f64 + u01) / denom).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
            s.push(norm_quantile_raw(u));
        }
        let replicate_l = cfg.keep_replicate_residuals.then(|| {
            let mut m = Mat::zeros(b_total, n);
            for (bi, (_, l_b)) in replicate_out.iter().enumerate() {
                m.row_mut(bi).copy_from_slice(&l_b[ki]);
            }
            m
        });
        results.push(ClassResidualResult {
            s,
            a,
            l: l_o.clone(),
            replicate_failures,
            replicate_l,
        });
    }
    Ok(results)
}

/// Several class residual kinds from one shared set of bootstrap
/// replicates. The replicate simulations and refits depend only on the
/// seed, so each returned entry is identical to a single-kind call.
pub fn class_residuals_multi(
    fit: &FittedModel,
    data_y: &[Composition],
    covariates: &Mat,
    kinds: &[ResidualKind],
    cfg: &BootstrapConfig,
) -> Result<Vec<ClassResidualResult>> {
    if !fit.converged {
        return Err(Error::FitQuality(
            "class residuals require a converged fit".into(),
        ));
    }
    let q_obs = quantile_residuals(fit, data_y)?;
    let params = row_params(fit)?;
    class_residuals_engine(
        &params,
        &RefitMode::Refit { fit, covariates },
        data_y,
        &q_obs.q,
        kinds,
        cfg,
    )
}

/// One class residual via the full bootstrap algorithm.
pub fn class_residual(
    fit: &FittedModel,
    data_y: &[Composition],
    covariates: &Mat,
    kind: ResidualKind,
    cfg: &BootstrapConfig,
) -> Result<ClassResidualResult> {
    Ok(class_residuals_multi(fit, data_y, covariates, &[kind], cfg)?
        .pop()
        .expect("one kind in, one result out"))
}

/// Class residuals with the parameters held fixed: replicates are drawn
/// from `params` and no refitting happens. This is the no-estimation
/// setting of the limit-law studies.
pub fn class_residuals_fixed_params(
    params: &[DirichletParams],
    y_obs: &[Composition],
    kinds: &[ResidualKind],
    cfg: &BootstrapConfig,
) -> Result<Vec<ClassResidualResult>> {
    if params.len() != y_obs.len() {
        return Err(Error::Dimension(format!(
            "{} parameter rows vs {} observations",
            params.len(),
            y_obs.len()
        )));
    }
    let k = params[0].k();
    let n = y_obs.len();
    let mut mu = Mat::zeros(n, k);
    let mut phi = vec![0.0; n];
    for (i, p) in params.iter().enumerate() {
        mu.row_mut(i).copy_from_slice(p.mu());
        phi[i] = p.phi();
    }
    let q_obs = quantile_matrix(&mu, &phi, y_obs);
    class_residuals_engine(
        params,
        &RefitMode::Fixed { mu: &mu, phi: &phi },
        y_obs,
        &q_obs,
        kinds,
        cfg,
    )
}
