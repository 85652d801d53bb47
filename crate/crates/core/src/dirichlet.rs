//! Dirichlet distribution in the mean/precision parameterization:
//! a mean vector `mu` on the open simplex and a precision `phi > 0`, so
//! that component j has mean `mu_j` and variance `mu_j (1 - mu_j) / (1 + phi)`.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::special::{lgamma_raw, sample_gamma_raw};

/// Strict tolerance on the unit sum for in-memory compositions.
const SUM_TOL: f64 = 1e-9;
/// Looser tolerance for values read back from text files.
const SUM_TOL_EXTERNAL: f64 = 1e-6;
/// Sampled components are clamped into [FLOOR, 1 - FLOOR] so that
/// downstream log terms stay finite.
const COMPONENT_FLOOR: f64 = 1e-12;

/// A vector of strictly positive proportions summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct Composition {
    w: Vec<f64>,
}

impl Composition {
    /// Strict constructor: every component in (0, 1), unit sum within 1e-9.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        Self::validated(w, SUM_TOL, false)
    }

    /// Lenient constructor for file input: unit sum within 1e-6, after
    /// which the components are renormalized to sum exactly to one.
    pub fn from_external(w: Vec<f64>) -> Result<Self> {
        Self::validated(w, SUM_TOL_EXTERNAL, true)
    }

    fn validated(mut w: Vec<f64>, tol: f64, renormalize: bool) -> Result<Self> {
        if w.len() < 2 {
            return Err(Error::Dimension(format!(
                "a composition needs at least 2 components, got {}",
                w.len()
            )));
        }
        for (j, &v) in w.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 || v >= 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "component {j} must lie strictly inside (0,1), got {v}"
                )));
            }
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(Error::InvalidArgument(format!(
                "components must sum to 1 (tolerance {tol}), got {sum}"
            )));
        }
        if renormalize {
            for v in &mut w {
                *v /= sum;
            }
        }
        Ok(Self { w })
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    pub fn k(&self) -> usize {
        self.w.len()
    }
}

/// Dirichlet parameters: mean vector on the open simplex plus precision.
#[derive(Clone, Debug, PartialEq)]
pub struct DirichletParams {
    mu: Vec<f64>,
    phi: f64,
}

impl DirichletParams {
    pub fn new(mu: Vec<f64>, phi: f64) -> Result<Self> {
        if mu.len() < 2 {
            return Err(Error::Dimension(format!(
                "mean vector needs at least 2 components, got {}",
                mu.len()
            )));
        }
        for (j, &m) in mu.iter().enumerate() {
            if !m.is_finite() || m <= 0.0 || m >= 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "mu[{j}] must lie strictly inside (0,1), got {m}"
                )));
            }
        }
        let sum: f64 = mu.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidArgument(format!(
                "mean vector must sum to 1, got {sum}"
            )));
        }
        if !phi.is_finite() || phi <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "precision must be positive and finite, got {phi}"
            )));
        }
        Ok(Self { mu, phi })
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn k(&self) -> usize {
        self.mu.len()
    }
}

/// Log density: ln Gamma(phi) - sum_j ln Gamma(phi mu_j) + sum_j (phi mu_j - 1) ln w_j.
pub fn log_density(w: &Composition, p: &DirichletParams) -> Result<f64> {
    if w.k() != p.k() {
        return Err(Error::Dimension(format!(
            "composition has {} components, parameters have {}",
            w.k(),
            p.k()
        )));
    }
    let phi = p.phi();
    let mut ld = lgamma_raw(phi);
    for (&wj, &mj) in w.values().iter().zip(p.mu()) {
        let t = phi * mj;
        ld += (t - 1.0) * wj.ln() - lgamma_raw(t);
    }
    Ok(ld)
}

/// Draw one composition: G_j ~ Gamma(phi mu_j, 1) independently, then
/// w_j = G_j / sum(G). Components are clamped into [1e-12, 1 - 1e-12]
/// and renormalized if a gamma draw underflows.
pub fn sample(p: &DirichletParams, rng: &mut RngStream) -> Composition {
    let phi = p.phi();
    let mut w: Vec<f64> = p.mu().iter().map(|&m| sample_gamma_raw(phi * m, rng)).collect();
    let total: f64 = w.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        // all gamma draws underflowed; practically unreachable
        let k = w.len() as f64;
        for v in &mut w {
            *v = 1.0 / k;
        }
        return Composition { w };
    }
    for v in &mut w {
        *v /= total;
    }
    let needs_clamp = w
        .iter()
        .any(|&v| !(COMPONENT_FLOOR..=1.0 - COMPONENT_FLOOR).contains(&v));
    if needs_clamp {
        for v in &mut w {
            *v = v.clamp(COMPONENT_FLOOR, 1.0 - COMPONENT_FLOOR);
        }
        let s: f64 = w.iter().sum();
        for v in &mut w {
            *v /= s;
        }
    }
    Composition { w }
}

/// Marginal of component j is Beta(phi mu_j, phi (1 - mu_j)).
/// `component` is a zero-based index.
pub fn marginal_beta_params(p: &DirichletParams, component: usize) -> Result<(f64, f64)> {
    if component >= p.k() {
        return Err(Error::Dimension(format!(
            "component index {component} out of range for k = {}",
            p.k()
        )));
    }
    let m = p.mu()[component];
    Ok((p.phi() * m, p.phi() * (1.0 - m)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::inc_beta_raw;

    fn params(mu: &[f64], phi: f64) -> DirichletParams {
        DirichletParams::new(mu.to_vec(), phi).unwrap()
    }

    #[test]
    fn uniform_simplex_density_is_zero() {
        // mu = (1/2, 1/2), phi = 2 is Dirichlet(1, 1): flat on the simplex
        let p = params(&[0.5, 0.5], 2.0);
        for &x in &[0.1, 0.33, 0.5, 0.9] {
            let w = Composition::new(vec![x, 1.0 - x]).unwrap();
            assert!(log_density(&w, &p).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn two_components_reduce_to_beta() {
        let p = params(&[0.3, 0.7], 11.0);
        let (a, b) = (11.0 * 0.3, 11.0 * 0.7);
        for &x in &[0.05, 0.3, 0.62, 0.97] {
            let w = Composition::new(vec![x, 1.0 - x]).unwrap();
            let beta_logpdf = lgamma_raw(a + b) - lgamma_raw(a) - lgamma_raw(b)
                + (a - 1.0) * x.ln()
                + (b - 1.0) * (1.0 - x).ln();
            assert!((log_density(&w, &p).unwrap() - beta_logpdf).abs() < 1e-12);
        }
    }

    #[test]
    fn log_density_frozen_reference() {
        // term-by-term evaluation at 50-digit precision
        let p = params(&[0.2, 0.3, 0.5], 10.0);
        let w = Composition::new(vec![0.1, 0.3, 0.6]).unwrap();
        assert!((log_density(&w, &p).unwrap() - 2.176_793_272_463_698_3).abs() < 1e-12);
    }

    #[test]
    fn log_density_dimension_mismatch() {
        let p = params(&[0.2, 0.3, 0.5], 10.0);
        let w = Composition::new(vec![0.4, 0.6]).unwrap();
        assert!(log_density(&w, &p).is_err());
    }

    #[test]
    fn density_integrates_to_beta_on_grid() {
        // k = 2: exp(log_density) must match the Beta(phi mu1, phi mu2)
        // density of w1 on a grid
        let p = params(&[0.4, 0.6], 7.5);
        let (a, b) = (3.0, 4.5);
        let ln_norm = lgamma_raw(a + b) - lgamma_raw(a) - lgamma_raw(b);
        let mut max_diff: f64 = 0.0;
        for i in 1..200 {
            let x = i as f64 / 200.0;
            let w = Composition::new(vec![x, 1.0 - x]).unwrap();
            let ours = log_density(&w, &p).unwrap().exp();
            let beta = (ln_norm + (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln()).exp();
            max_diff = max_diff.max((ours - beta).abs());
        }
        assert!(max_diff < 1e-10, "max diff {max_diff}");
    }

    #[test]
    fn sample_moments_match() {
        let p = params(&[0.333, 0.333, 0.334], 20.0);
        let mut rng = RngStream::new(2024, 0);
        let n = 100_000;
        let mut mean = [0.0f64; 3];
        let mut m2 = [0.0f64; 3];
        for _ in 0..n {
            let w = sample(&p, &mut rng);
            let sum: f64 = w.values().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            for j in 0..3 {
                mean[j] += w.values()[j];
                m2[j] += w.values()[j] * w.values()[j];
            }
        }
        for j in 0..3 {
            mean[j] /= n as f64;
            let var = m2[j] / n as f64 - mean[j] * mean[j];
            let mu_j = p.mu()[j];
            assert!((mean[j] - mu_j).abs() < 0.01, "mean[{j}] = {}", mean[j]);
            let expect_var = mu_j * (1.0 - mu_j) / (1.0 + 20.0);
            assert!(
                (var - expect_var).abs() < 0.15 * expect_var,
                "var[{j}] = {var}, expected {expect_var}"
            );
        }
    }

    #[test]
    fn marginal_params() {
        let p = params(&[0.5, 0.5], 2.0);
        assert_eq!(marginal_beta_params(&p, 0).unwrap(), (1.0, 1.0));
        let p = params(&[0.333, 0.333, 0.334], 20.0);
        let (a, b) = marginal_beta_params(&p, 0).unwrap();
        assert!((a - 6.66).abs() < 1e-12 && (b - 13.34).abs() < 1e-12);
        // components sum to phi
        assert!((a + b - 20.0).abs() < 1e-12);
        assert!(marginal_beta_params(&p, 3).is_err());
    }

    #[test]
    fn sampled_marginal_matches_beta_cdf() {
        let p = params(&[0.333, 0.333, 0.334], 20.0);
        let (a, b) = marginal_beta_params(&p, 0).unwrap();
        let mut rng = RngStream::new(77, 0);
        let n = 100_000;
        let mut draws: Vec<f64> = (0..n).map(|_| sample(&p, &mut rng).values()[0]).collect();
        draws.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut ks: f64 = 0.0;
        for (i, &x) in draws.iter().enumerate() {
            let f = inc_beta_raw(x, a, b);
            let lo = i as f64 / n as f64;
            let hi = (i + 1) as f64 / n as f64;
            ks = ks.max((f - lo).abs()).max((f - hi).abs());
        }
        assert!(ks <= 0.01, "KS distance {ks}");
    }

    #[test]
    fn constructors_validate() {
        assert!(Composition::new(vec![0.5]).is_err());
        assert!(Composition::new(vec![0.0, 1.0]).is_err());
        assert!(Composition::new(vec![0.6, 0.6]).is_err());
        // lenient path renormalizes
        let c = Composition::from_external(vec![0.300000_2, 0.699_999_9]).unwrap();
        let s: f64 = c.values().iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
        assert!(DirichletParams::new(vec![0.5, 0.5], 0.0).is_err());
        assert!(DirichletParams::new(vec![0.9, 0.2], 1.0).is_err());
    }
}
