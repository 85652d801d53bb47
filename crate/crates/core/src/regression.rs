//! Dirichlet logistic regression: logit links on the component means
//! relative to a reference component, log link on the precision,
//! maximum-likelihood fitting by BFGS with backtracking line search,
//! finite-difference observed information, and likelihood-ratio tests.

use crate::dirichlet::Composition;
use crate::error::{Error, Result};
use crate::linalg;
use crate::mat::Mat;
use crate::special::{chi_square_cdf, digamma_raw, lgamma_raw};

/// Covariate columns entering one submodel, with an optional intercept.
#[derive(Clone, Debug, PartialEq)]
pub struct TermList {
    pub intercept: bool,
    pub columns: Vec<usize>,
}

impl TermList {
    pub fn intercept_only() -> Self {
        Self {
            intercept: true,
            columns: Vec::new(),
        }
    }

    pub fn with_columns(intercept: bool, columns: Vec<usize>) -> Self {
        Self { intercept, columns }
    }

    pub fn param_count(&self) -> usize {
        usize::from(self.intercept) + self.columns.len()
    }

    fn max_column(&self) -> Option<usize> {
        self.columns.iter().copied().max()
    }

    /// True when `other`'s terms are a subset of ours.
    fn contains(&self, other: &TermList) -> bool {
        (!other.intercept || self.intercept)
            && other.columns.iter().all(|c| self.columns.contains(c))
    }

    fn fill_row(&self, covariates: &[f64], out: &mut Vec<f64>) {
        if self.intercept {
            out.push(1.0);
        }
        for &c in &self.columns {
            out.push(covariates[c]);
        }
    }
}

/// Which covariates enter each submodel of the regression.
///
/// `mean_terms[s]` belongs to the s-th non-reference component in
/// ascending component order; the reference component's linear predictor
/// is identically zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub k: usize,
    pub mean_terms: Vec<TermList>,
    pub precision_terms: TermList,
    pub reference_component: usize,
}

impl ModelSpec {
    /// Spec with the same term list for every non-reference mean submodel,
    /// reference component 0.
    pub fn homogeneous(k: usize, mean: TermList, precision: TermList) -> Self {
        Self {
            k,
            mean_terms: vec![mean; k - 1],
            precision_terms: precision,
            reference_component: 0,
        }
    }

    pub fn validate(&self, covariate_cols: usize) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidArgument(format!("k must be >= 2, got {}", self.k)));
        }
        if self.reference_component >= self.k {
            return Err(Error::InvalidArgument(format!(
                "reference component {} out of range for k = {}",
                self.reference_component, self.k
            )));
        }
        if self.mean_terms.len() != self.k - 1 {
            return Err(Error::Dimension(format!(
                "expected {} mean term lists, got {}",
                self.k - 1,
                self.mean_terms.len()
            )));
        }
        let max_col = self
            .mean_terms
            .iter()
            .chain(std::iter::once(&self.precision_terms))
            .filter_map(TermList::max_column)
            .max();
        if let Some(c) = max_col {
            if c >= covariate_cols {
                return Err(Error::InvalidArgument(format!(
                    "covariate column {c} referenced but data has only {covariate_cols} columns"
                )));
            }
        }
        Ok(())
    }

    /// Component indices other than the reference, ascending.
    pub fn nonref_components(&self) -> Vec<usize> {
        (0..self.k).filter(|&j| j != self.reference_component).collect()
    }

    pub fn param_count(&self) -> usize {
        self.mean_terms.iter().map(TermList::param_count).sum::<usize>()
            + self.precision_terms.param_count()
    }

    /// True when `self` is nested in `full` (same k and reference, every
    /// submodel's terms contained in the corresponding full submodel).
    pub fn nested_in(&self, full: &ModelSpec) -> bool {
        self.k == full.k
            && self.reference_component == full.reference_component
            && self
                .mean_terms
                .iter()
                .zip(&full.mean_terms)
                .all(|(r, f)| f.contains(r))
            && full.precision_terms.contains(&self.precision_terms)
    }
}

/// Mean-submodel coefficients (one block per non-reference component,
/// ascending) and the precision coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientVector {
    pub beta: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
}

impl CoefficientVector {
    pub fn zeros(spec: &ModelSpec) -> Self {
        Self {
            beta: spec.mean_terms.iter().map(|t| vec![0.0; t.param_count()]).collect(),
            gamma: vec![0.0; spec.precision_terms.param_count()],
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for b in &self.beta {
            out.extend_from_slice(b);
        }
        out.extend_from_slice(&self.gamma);
        out
    }

    pub fn from_flat(spec: &ModelSpec, flat: &[f64]) -> Result<Self> {
        if flat.len() != spec.param_count() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                spec.param_count(),
                flat.len()
            )));
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("coefficients must be finite".into()));
        }
        let mut beta = Vec::with_capacity(spec.mean_terms.len());
        let mut pos = 0;
        for t in &spec.mean_terms {
            let p = t.param_count();
            beta.push(flat[pos..pos + p].to_vec());
            pos += p;
        }
        Ok(Self {
            beta,
            gamma: flat[pos..].to_vec(),
        })
    }
}

/// Response compositions plus the covariate matrix they share.
#[derive(Clone, Debug)]
pub struct RegressionData {
    pub y: Vec<Composition>,
    pub covariates: Mat,
}

impl RegressionData {
    pub fn new(y: Vec<Composition>, covariates: Mat) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::InvalidArgument("empty dataset".into()));
        }
        if y.len() != covariates.rows() {
            return Err(Error::Dimension(format!(
                "{} responses vs {} covariate rows",
                y.len(),
                covariates.rows()
            )));
        }
        let k = y[0].k();
        if let Some(i) = y.iter().position(|c| c.k() != k) {
            return Err(Error::InvalidRow {
                row: i,
                msg: format!("expected {k} components, got {}", y[i].k()),
            });
        }
        Ok(Self { y, covariates })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.y[0].k()
    }
}

/// A fitted Dirichlet regression model.
#[derive(Clone, Debug)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub coef: CoefficientVector,
    pub loglik: f64,
    pub fitted_mu: Mat,
    pub fitted_phi: Vec<f64>,
    pub std_errors: Option<CoefficientVector>,
    pub converged: bool,
    pub iterations: usize,
}

/// Options for [`fit_mle`].
#[derive(Clone, Debug)]
pub struct FitOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub init: Option<CoefficientVector>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-6,
            init: None,
        }
    }
}

/// Mean vector and precision implied by one covariate row.
///
/// The reference component's predictor is pinned to zero and the softmax
/// subtracts the maximum predictor before exponentiating.
pub fn linear_predictors(
    spec: &ModelSpec,
    coef: &CoefficientVector,
    covariate_row: &[f64],
) -> Result<(Vec<f64>, f64)> {
    if spec.mean_terms.len() != spec.k - 1 || coef.beta.len() != spec.mean_terms.len() {
        return Err(Error::Dimension(
            "coefficient blocks do not match the model spec".into(),
        ));
    }
    for (t, b) in spec.mean_terms.iter().zip(&coef.beta) {
        if t.param_count() != b.len() {
            return Err(Error::Dimension(
                "mean coefficient block length does not match its term list".into(),
            ));
        }
    }
    if spec.precision_terms.param_count() != coef.gamma.len() {
        return Err(Error::Dimension(
            "precision coefficient length does not match its term list".into(),
        ));
    }
    let max_col = spec
        .mean_terms
        .iter()
        .chain(std::iter::once(&spec.precision_terms))
        .filter_map(TermList::max_column)
        .max();
    if let Some(c) = max_col {
        if c >= covariate_row.len() {
            return Err(Error::InvalidArgument(format!(
                "covariate row has {} entries but column {c} is referenced",
                covariate_row.len()
            )));
        }
    }
    let mut eta = vec![0.0; spec.k];
    for (s, &comp) in spec.nonref_components().iter().enumerate() {
        let terms = &spec.mean_terms[s];
        let b = &coef.beta[s];
        let mut acc = 0.0;
        let mut idx = 0;
        if terms.intercept {
            acc += b[0];
            idx = 1;
        }
        for (&c, &bc) in terms.columns.iter().zip(&b[idx..]) {
            acc += covariate_row[c] * bc;
        }
        eta[comp] = acc;
    }
    let max_eta = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut mu: Vec<f64> = eta.iter().map(|&e| (e - max_eta).exp()).collect();
    let denom: f64 = mu.iter().sum();
    for m in &mut mu {
        *m /= denom;
    }
    let mut lp = 0.0;
    let mut idx = 0;
    if spec.precision_terms.intercept {
        lp += coef.gamma[0];
        idx = 1;
    }
    for (&c, &gc) in spec.precision_terms.columns.iter().zip(&coef.gamma[idx..]) {
        lp += covariate_row[c] * gc;
    }
    let phi = lp.exp();
    if !phi.is_finite() || mu.iter().any(|m| !m.is_finite()) {
        return Err(Error::FitQuality(
            "non-finite linear predictor result".into(),
        ));
    }
    Ok((mu, phi))
}

// ---------------------------------------------------------------------------
// Likelihood evaluator
// ---------------------------------------------------------------------------

/// Precomputed design matrices and log responses for fast repeated
/// likelihood and gradient evaluation over a flat coefficient vector.
pub(crate) struct Evaluator {
    n: usize,
    k: usize,
    ln_y: Mat,
    mean_design: Vec<Mat>,
    prec_design: Mat,
    nonref: Vec<usize>,
    block_offsets: Vec<usize>,
    gamma_offset: usize,
    p_total: usize,
}

impl Evaluator {
    pub(crate) fn new(spec: &ModelSpec, y: &[Composition], covariates: &Mat) -> Result<Self> {
        spec.validate(covariates.cols())?;
        let n = y.len();
        let k = spec.k;
        for (i, c) in y.iter().enumerate() {
            if c.k() != k {
                return Err(Error::InvalidRow {
                    row: i,
                    msg: format!("expected {k} components, got {}", c.k()),
                });
            }
        }
        let mut ln_y = Mat::zeros(n, k);
        for (i, c) in y.iter().enumerate() {
            for (j, &w) in c.values().iter().enumerate() {
                ln_y[(i, j)] = w.ln();
            }
        }
        let nonref = spec.nonref_components();
        let mut mean_design = Vec::with_capacity(nonref.len());
        for terms in &spec.mean_terms {
            let p = terms.param_count();
            let mut m = Mat::zeros(n, p);
            let mut row = Vec::with_capacity(p);
            for i in 0..n {
                row.clear();
                terms.fill_row(covariates.row(i), &mut row);
                m.row_mut(i).copy_from_slice(&row);
            }
            mean_design.push(m);
        }
        let pphi = spec.precision_terms.param_count();
        let mut prec_design = Mat::zeros(n, pphi);
        let mut row = Vec::with_capacity(pphi);
        for i in 0..n {
            row.clear();
            spec.precision_terms.fill_row(covariates.row(i), &mut row);
            prec_design.row_mut(i).copy_from_slice(&row);
        }
        let mut block_offsets = Vec::with_capacity(nonref.len());
        let mut pos = 0;
        for terms in &spec.mean_terms {
            block_offsets.push(pos);
            pos += terms.param_count();
        }
        let gamma_offset = pos;
        let p_total = pos + pphi;
        let _ = spec;
        Ok(Self {
            n,
            k,
            ln_y,
            mean_design,
            prec_design,
            nonref,
            block_offsets,
            gamma_offset,
            p_total,
        })
    }

    pub(crate) fn param_count(&self) -> usize {
        self.p_total
    }

    /// Negative log-likelihood; +inf when the parameters push any term
    /// out of the representable domain (line searches back off on it).
    pub(crate) fn neg_loglik(&self, theta: &[f64]) -> f64 {
        self.eval(theta, None)
    }

    /// Negative log-likelihood and its gradient.
    pub(crate) fn neg_loglik_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        self.eval(theta, Some(grad))
    }

    fn eval(&self, theta: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        debug_assert_eq!(theta.len(), self.p_total);
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let k = self.k;
        let mut eta = vec![0.0; k];
        let mut mu = vec![0.0; k];
        let mut cvals = vec![0.0; k];
        let mut ll = 0.0;
        for i in 0..self.n {
            eta.fill(0.0);
            for (s, &comp) in self.nonref.iter().enumerate() {
                let row = self.mean_design[s].row(i);
                let b = &theta[self.block_offsets[s]..self.block_offsets[s] + row.len()];
                eta[comp] = dot(row, b);
            }
            let max_eta = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for j in 0..k {
                mu[j] = (eta[j] - max_eta).exp();
                denom += mu[j];
            }
            for j in 0..k {
                mu[j] /= denom;
            }
            let drow = self.prec_design.row(i);
            let phi = dot(drow, &theta[self.gamma_offset..]).exp();
            if !phi.is_finite() || phi <= 0.0 {
                return f64::INFINITY;
            }
            let mut ll_i = lgamma_raw(phi);
            let ln_row = self.ln_y.row(i);
            for j in 0..k {
                let t = phi * mu[j];
                if t <= 0.0 || !t.is_finite() {
                    return f64::INFINITY;
                }
                ll_i += (t - 1.0) * ln_row[j] - lgamma_raw(t);
            }
            if !ll_i.is_finite() {
                return f64::INFINITY;
            }
            ll += ll_i;

            if let Some(g) = grad.as_deref_mut() {
                // c_j = d ll_i / d mu_j = phi (ln y_j - psi(phi mu_j))
                let mut c_dot_mu = 0.0;
                let mut psi_dot_mu = 0.0;
                let mut lny_dot_mu = 0.0;
                for j in 0..k {
                    let psi_t = digamma_raw(phi * mu[j]);
                    cvals[j] = phi * (ln_row[j] - psi_t);
                    c_dot_mu += cvals[j] * mu[j];
                    psi_dot_mu += psi_t * mu[j];
                    lny_dot_mu += ln_row[j] * mu[j];
                }
                for (s, &comp) in self.nonref.iter().enumerate() {
                    let scale = mu[comp] * (cvals[comp] - c_dot_mu);
                    let row = self.mean_design[s].row(i);
                    let gb = &mut g[self.block_offsets[s]..self.block_offsets[s] + row.len()];
                    for (gv, &x) in gb.iter_mut().zip(row) {
                        // gradient of the negative log-likelihood
                        *gv -= scale * x;
                    }
                }
                let dphi = digamma_raw(phi) - psi_dot_mu + lny_dot_mu;
                let scale = phi * dphi;
                let gg = &mut g[self.gamma_offset..];
                for (gv, &x) in gg.iter_mut().zip(drow) {
                    *gv -= scale * x;
                }
            }
        }
        if !ll.is_finite() {
            return f64::INFINITY;
        }
        -ll
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

/// Log-likelihood of the data under the given coefficients.
pub fn log_likelihood(
    spec: &ModelSpec,
    coef: &CoefficientVector,
    data: &RegressionData,
) -> Result<f64> {
    let eval = Evaluator::new(spec, &data.y, &data.covariates)?;
    let nll = eval.neg_loglik(&coef.to_flat());
    if !nll.is_finite() {
        return Err(Error::FitQuality("non-finite log-likelihood".into()));
    }
    Ok(-nll)
}

/// Analytic gradient of the log-likelihood, flattened in coefficient order
/// (beta blocks for the non-reference components in ascending order, then
/// gamma).
pub fn gradient(
    spec: &ModelSpec,
    coef: &CoefficientVector,
    data: &RegressionData,
) -> Result<Vec<f64>> {
    let eval = Evaluator::new(spec, &data.y, &data.covariates)?;
    let mut g = vec![0.0; eval.param_count()];
    let nll = eval.neg_loglik_grad(&coef.to_flat(), &mut g);
    if !nll.is_finite() {
        return Err(Error::FitQuality("non-finite log-likelihood".into()));
    }
    for v in &mut g {
        *v = -*v;
    }
    Ok(g)
}

struct MinimizeResult {
    x: Vec<f64>,
    nll: f64,
    iterations: usize,
    converged: bool,
}

/// BFGS with backtracking (Armijo) line search on the flat coefficient
/// vector. The links make the domain all of Euclidean space; overflow
/// shows up as an infinite objective and the line search backs off.
fn minimize(eval: &Evaluator, x0: Vec<f64>, max_iter: usize, tol: f64) -> Result<MinimizeResult> {
    let p = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; p];
    let mut f = eval.neg_loglik_grad(&x, &mut g);
    if !f.is_finite() {
        return Err(Error::FitFailure(
            "non-finite likelihood at the initial point".into(),
        ));
    }
    let mut hinv = Mat::zeros(p, p);
    for i in 0..p {
        hinv[(i, i)] = 1.0;
    }
    let mut first_update = true;
    let mut iterations = 0;
    let mut converged = inf_norm(&g) <= tol;
    let mut stagnant = 0;
    let mut d = vec![0.0; p];
    let mut xt = vec![0.0; p];
    let mut g_new = vec![0.0; p];

    while !converged && iterations < max_iter {
        iterations += 1;
        // d = -Hinv g
        for i in 0..p {
            d[i] = -dot(hinv.row(i), &g);
        }
        let mut gd = dot(&g, &d);
        if gd >= 0.0 {
            // not a descent direction: reset to steepest descent
            for i in 0..p {
                for j in 0..p {
                    hinv[(i, j)] = f64::from(u8::from(i == j));
                }
                d[i] = -g[i];
            }
            first_update = true;
            gd = dot(&g, &d);
        }
        // the smallest objective change distinguishable from rounding
        let eps_f = 1e-12 * (1.0 + f.abs());
        let g_inf = inf_norm(&g);
        let mut t = 1.0;
        let mut accepted = false;
        let mut saw_finite = false;
        let mut have_grad = false;
        let mut ft = f64::INFINITY;
        for trial in 0..60 {
            // decrease no longer distinguishable from rounding: fall
            // through to the gradient-progress step instead of taking
            // noise-driven micro-steps
            if t * (-gd) < eps_f {
                break;
            }
            for i in 0..p {
                xt[i] = x[i] + t * d[i];
            }
            // the unit step is accepted most of the time, so compute its
            // gradient in the same pass
            ft = if trial == 0 {
                eval.neg_loglik_grad(&xt, &mut g_new)
            } else {
                eval.neg_loglik(&xt)
            };
            if ft.is_finite() {
                saw_finite = true;
                if ft <= f + 1e-4 * t * gd {
                    accepted = true;
                    have_grad = trial == 0;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            // near the optimum the Armijo decrease falls below f's
            // resolution; accept the full quasi-Newton step whenever it
            // shrinks the gradient without making f measurably worse
            for i in 0..p {
                xt[i] = x[i] + d[i];
            }
            ft = eval.neg_loglik_grad(&xt, &mut g_new);
            if ft.is_finite() {
                saw_finite = true;
                if ft <= f + eps_f && inf_norm(&g_new) <= 0.9 * g_inf {
                    accepted = true;
                    have_grad = true;
                }
            }
            if !accepted {
                if !saw_finite {
                    return Err(Error::FitFailure(
                        "non-finite likelihood during line search".into(),
                    ));
                }
                // stalled on a finite objective: stop and report as-is
                break;
            }
        }
        if !have_grad {
            let fx = eval.neg_loglik_grad(&xt, &mut g_new);
            debug_assert!((fx - ft).abs() <= 1e-9 * (1.0 + ft.abs()));
        }
        let s: Vec<f64> = (0..p).map(|i| xt[i] - x[i]).collect();
        let yv: Vec<f64> = (0..p).map(|i| g_new[i] - g[i]).collect();
        let sy = dot(&s, &yv);
        let s_norm = dot(&s, &s).sqrt();
        let y_norm = dot(&yv, &yv).sqrt();
        let x_scale = 1.0 + x.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        if sy > 1e-12 * s_norm * y_norm && s_norm > 1e-12 * x_scale {
            if first_update {
                let scale = sy / dot(&yv, &yv);
                for i in 0..p {
                    for j in 0..p {
                        hinv[(i, j)] = if i == j { scale } else { 0.0 };
                    }
                }
                first_update = false;
            }
            bfgs_update(&mut hinv, &s, &yv, sy);
        }
        let g_new_inf = inf_norm(&g_new);
        if f - ft <= eps_f && g_new_inf >= 0.999 * g_inf {
            stagnant += 1;
        } else {
            stagnant = 0;
        }
        x.copy_from_slice(&xt);
        f = ft;
        g.copy_from_slice(&g_new);
        converged = g_new_inf <= tol;
        if stagnant >= 3 {
            break;
        }
    }
    Ok(MinimizeResult {
        x,
        nll: f,
        iterations,
        converged,
    })
}

/// Hinv <- (I - rho s y') Hinv (I - rho y s') + rho s s'
fn bfgs_update(hinv: &mut Mat, s: &[f64], y: &[f64], sy: f64) {
    let p = s.len();
    let rho = 1.0 / sy;
    // hy = Hinv y
    let hy: Vec<f64> = (0..p).map(|i| dot(hinv.row(i), y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..p {
        for j in 0..p {
            hinv[(i, j)] += -rho * (s[i] * hy[j] + hy[i] * s[j])
                + rho * rho * yhy * s[i] * s[j]
                + rho * s[i] * s[j];
        }
    }
}

/// Default initializer: mean-submodel intercepts from log ratios of the
/// component sample means, precision intercept from the method-of-moments
/// precision averaged over components, all slopes zero.
fn default_init(spec: &ModelSpec, y: &[Composition]) -> CoefficientVector {
    let n = y.len() as f64;
    let k = spec.k;
    let mut ybar = vec![0.0; k];
    for c in y {
        for (j, &w) in c.values().iter().enumerate() {
            ybar[j] += w;
        }
    }
    for v in &mut ybar {
        *v /= n;
    }
    let mut var = vec![0.0; k];
    for c in y {
        for (j, &w) in c.values().iter().enumerate() {
            let d = w - ybar[j];
            var[j] += d * d;
        }
    }
    for v in &mut var {
        *v /= (n - 1.0).max(1.0);
    }
    let mut coef = CoefficientVector::zeros(spec);
    let ref_mean = ybar[spec.reference_component].max(1e-12);
    for (s, &comp) in spec.nonref_components().iter().enumerate() {
        if spec.mean_terms[s].intercept {
            coef.beta[s][0] = (ybar[comp].max(1e-12) / ref_mean).ln();
        }
    }
    if spec.precision_terms.intercept {
        let mut acc = 0.0;
        let mut cnt = 0.0;
        for j in 0..k {
            if var[j] > 0.0 {
                let est = ybar[j] * (1.0 - ybar[j]) / var[j] - 1.0;
                if est.is_finite() && est > 0.0 {
                    acc += est;
                    cnt += 1.0;
                }
            }
        }
        let phi0 = if cnt > 0.0 { (acc / cnt).clamp(0.05, 1e6) } else { 1.0 };
        coef.gamma[0] = phi0.ln();
    }
    coef
}

pub(crate) fn fit_mle_parts(
    spec: &ModelSpec,
    y: &[Composition],
    covariates: &Mat,
    options: &FitOptions,
) -> Result<FittedModel> {
    let eval = Evaluator::new(spec, y, covariates)?;
    let p = eval.param_count();
    if y.len() <= p {
        return Err(Error::InvalidArgument(format!(
            "need more observations ({}) than parameters ({p})",
            y.len()
        )));
    }
    let x0 = match &options.init {
        Some(c) => {
            let flat = c.to_flat();
            if flat.len() != p {
                return Err(Error::Dimension(format!(
                    "init has {} parameters, spec needs {p}",
                    flat.len()
                )));
            }
            flat
        }
        None => default_init(spec, y).to_flat(),
    };
    let result = minimize(&eval, x0, options.max_iter, options.tol)?;
    let coef = CoefficientVector::from_flat(spec, &result.x)?;
    let n = y.len();
    let mut fitted_mu = Mat::zeros(n, spec.k);
    let mut fitted_phi = vec![0.0; n];
    for i in 0..n {
        let (mu, phi) = linear_predictors(spec, &coef, covariates.row(i))?;
        fitted_mu.row_mut(i).copy_from_slice(&mu);
        fitted_phi[i] = phi;
    }
    Ok(FittedModel {
        spec: spec.clone(),
        coef,
        loglik: -result.nll,
        fitted_mu,
        fitted_phi,
        std_errors: None,
        converged: result.converged,
        iterations: result.iterations,
    })
}

/// Maximum-likelihood fit. Returns [`Error::FitFailure`] when the line
/// search cannot find a finite likelihood; bootstrap callers treat that
/// error as retryable.
pub fn fit_mle(spec: &ModelSpec, data: &RegressionData, options: &FitOptions) -> Result<FittedModel> {
    fit_mle_parts(spec, &data.y, &data.covariates, options)
}

/// Standard errors from the observed information: central finite
/// differences of the log-likelihood gradient with per-coordinate step
/// `1e-5 * max(1, |theta|)`, inverted via Cholesky.
pub fn standard_errors(fit: &FittedModel, data: &RegressionData) -> Result<CoefficientVector> {
    if !fit.converged {
        return Err(Error::FitQuality(
            "standard errors require a converged fit".into(),
        ));
    }
    let eval = Evaluator::new(&fit.spec, &data.y, &data.covariates)?;
    let p = eval.param_count();
    let theta = fit.coef.to_flat();
    let mut info = Mat::zeros(p, p);
    let mut gp = vec![0.0; p];
    let mut gm = vec![0.0; p];
    let mut tp = theta.clone();
    for i in 0..p {
        let h = 1e-5 * theta[i].abs().max(1.0);
        tp[i] = theta[i] + h;
        let fp = eval.neg_loglik_grad(&tp, &mut gp);
        tp[i] = theta[i] - h;
        let fm = eval.neg_loglik_grad(&tp, &mut gm);
        tp[i] = theta[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::FitQuality(
                "non-finite likelihood while differencing the Hessian".into(),
            ));
        }
        for j in 0..p {
            // gradients above are of the negative log-likelihood, so this
            // column is already the observed information's
            info[(i, j)] = (gp[j] - gm[j]) / (2.0 * h);
        }
    }
    // symmetrize
    for i in 0..p {
        for j in 0..i {
            let m = 0.5 * (info[(i, j)] + info[(j, i)]);
            info[(i, j)] = m;
            info[(j, i)] = m;
        }
    }
    match linalg::spd_inverse(&info) {
        Ok(inv) => {
            let se: Vec<f64> = (0..p).map(|i| inv[(i, i)].max(0.0).sqrt()).collect();
            CoefficientVector::from_flat(&fit.spec, &se)
        }
        Err(pivot) => {
            let lambda_max = linalg::spectral_norm_estimate(&info);
            let cond = if pivot.abs() > 0.0 {
                lambda_max / pivot.abs()
            } else {
                f64::INFINITY
            };
            Err(Error::SingularInformation { cond })
        }
    }
}

/// Likelihood-ratio test result.
#[derive(Clone, Copy, Debug)]
pub struct LrTest {
    pub statistic: f64,
    pub df: usize,
    pub p: f64,
}

/// Likelihood-ratio test from already-extracted parts (spec + loglik + n).
pub fn lr_test_parts(
    full_spec: &ModelSpec,
    full_loglik: f64,
    full_n: usize,
    reduced_spec: &ModelSpec,
    reduced_loglik: f64,
    reduced_n: usize,
) -> Result<LrTest> {
    if !reduced_spec.nested_in(full_spec) {
        return Err(Error::NotNested(
            "reduced spec is not nested in the full spec".into(),
        ));
    }
    if full_n != reduced_n {
        return Err(Error::Dimension(format!(
            "models were fitted on different sample sizes ({full_n} vs {reduced_n})"
        )));
    }
    let mut statistic = 2.0 * (full_loglik - reduced_loglik);
    if statistic < -1e-6 {
        return Err(Error::FitQuality(format!(
            "negative likelihood-ratio statistic {statistic}: the full model fit is worse"
        )));
    }
    statistic = statistic.max(0.0);
    let df = full_spec.param_count() - reduced_spec.param_count();
    let p = if df == 0 {
        1.0
    } else {
        1.0 - chi_square_cdf(statistic, df as f64)?
    };
    Ok(LrTest { statistic, df, p })
}

/// Likelihood-ratio test of a reduced model against the full model that
/// nests it.
pub fn lr_test(full: &FittedModel, reduced: &FittedModel) -> Result<LrTest> {
    if !(full.converged && reduced.converged) {
        return Err(Error::FitQuality(
            "likelihood-ratio test requires two converged fits".into(),
        ));
    }
    lr_test_parts(
        &full.spec,
        full.loglik,
        full.fitted_phi.len(),
        &reduced.spec,
        reduced.loglik,
        reduced.fitted_phi.len(),
    )
}
