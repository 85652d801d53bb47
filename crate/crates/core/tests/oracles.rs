//! Independent numerical oracles for the special functions: composite
//! Gauss-Legendre quadrature for the incomplete beta/gamma integrals, a
//! Maclaurin series for erf, and bisection for the normal quantile. The
//! oracles share no code with the implementations they check.

use compresid::rng::RngStream;
use compresid::special::{
    log_gamma, reg_inc_beta, reg_inc_gamma, std_normal_cdf, std_normal_quantile,
};

/// tanh-sinh (double-exponential) quadrature on [a, b]; handles the
/// algebraic endpoint behavior of beta/gamma densities to ~1e-14.
fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let n: i64 = 180;
    let h = 4.0 / n as f64;
    let c = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut total = 0.0;
    for i in -n..=n {
        let u = i as f64 * h;
        let sh = std::f64::consts::FRAC_PI_2 * u.sinh();
        let t = mid + c * sh.tanh();
        let w = std::f64::consts::FRAC_PI_2 * u.cosh() / sh.cosh().powi(2);
        if !w.is_finite() || w == 0.0 {
            continue;
        }
        let ft = f(t);
        if ft != 0.0 && ft.is_finite() {
            total += ft * w;
        }
    }
    total * c * h
}

/// Regularized incomplete beta by quadrature alone (both numerator and
/// the normalizing constant are integrals, so nothing is shared with the
/// continued-fraction implementation).
fn inc_beta_quadrature(x: f64, a: f64, b: f64) -> f64 {
    let dens = move |t: f64| -> f64 {
        if t <= 0.0 || t >= 1.0 {
            0.0
        } else {
            t.powf(a - 1.0) * (1.0 - t).powf(b - 1.0)
        }
    };
    let norm = integrate(&dens, 0.0, 1.0);
    integrate(&dens, 0.0, x) / norm
}

/// Lower regularized gamma by quadrature with a far tail cutoff.
fn inc_gamma_quadrature(x: f64, s: f64) -> f64 {
    let dens = move |t: f64| -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            (-t + (s - 1.0) * t.ln()).exp()
        }
    };
    let cutoff = (s + 20.0 * s.sqrt() + 40.0).max(x + 10.0);
    let norm = integrate(&dens, 0.0, cutoff);
    integrate(&dens, 0.0, x) / norm
}

/// erf by Maclaurin series, accurate for |x| <= 3.
fn erf_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    for n in 1..200 {
        let nf = n as f64;
        term *= -x * x / nf;
        let contribution = term / (2.0 * nf + 1.0);
        sum += contribution;
        if contribution.abs() < 1e-18 {
            break;
        }
    }
    sum * 2.0 / std::f64::consts::PI.sqrt()
}

#[test]
fn inc_beta_matches_quadrature_at_200_random_points() {
    let mut rng = RngStream::new(20240501, 0);
    let mut max_err = 0.0f64;
    for _ in 0..200 {
        let a = 1.0 + 29.0 * rng.next_f64();
        let b = 1.0 + 29.0 * rng.next_f64();
        let x = 0.001 + 0.998 * rng.next_f64();
        let ours = reg_inc_beta(x, a, b).unwrap();
        let oracle = inc_beta_quadrature(x, a, b);
        max_err = max_err.max((ours - oracle).abs());
    }
    assert!(max_err <= 1e-10, "max abs err {max_err}");
}

#[test]
fn inc_beta_frozen_example_against_oracle() {
    let oracle = inc_beta_quadrature(0.25, 6.667, 13.333);
    assert!((oracle - 0.220_679_477_213_910_21).abs() < 1e-12);
    let ours = reg_inc_beta(0.25, 6.667, 13.333).unwrap();
    assert!((ours - oracle).abs() < 1e-12);
}

#[test]
fn inc_gamma_matches_quadrature() {
    let oracle = inc_gamma_quadrature(3.0, 2.5);
    assert!((oracle - 0.693_781_081_586_721_6).abs() < 1e-12);
    assert!((reg_inc_gamma(3.0, 2.5).unwrap() - oracle).abs() < 1e-12);

    let mut rng = RngStream::new(7, 7);
    for _ in 0..40 {
        let s = 0.3 + 10.0 * rng.next_f64();
        let x = 12.0 * rng.next_f64();
        let ours = reg_inc_gamma(x, s).unwrap();
        let oracle = inc_gamma_quadrature(x, s);
        assert!((ours - oracle).abs() < 1e-10, "s={s} x={x}");
    }
}

#[test]
fn normal_cdf_matches_erf_series() {
    // Phi(z) = (1 + erf(z / sqrt 2)) / 2 on |z| <= 3
    let mut z = -3.0;
    while z <= 3.0 {
        let oracle = 0.5 * (1.0 + erf_series(z / std::f64::consts::SQRT_2));
        assert!((std_normal_cdf(z) - oracle).abs() < 1e-14, "z = {z}");
        z += 0.01;
    }
    let oracle196 = 0.5 * (1.0 + erf_series(1.96 / std::f64::consts::SQRT_2));
    assert!((oracle196 - 0.975_002_104_851_779_6).abs() < 1e-14);
}

#[test]
fn normal_quantile_matches_bisection() {
    let bisect = |p: f64| -> f64 {
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if std_normal_cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    for &p in &[0.975, 0.5, 0.025, 0.1, 0.9, 1e-6, 1.0 - 1e-6] {
        let ours = std_normal_quantile(p).unwrap();
        assert!((ours - bisect(p)).abs() < 1e-9, "p = {p}");
    }
    assert!((std_normal_quantile(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-9);
}

#[test]
fn log_gamma_against_stirling_series() {
    // Stirling with Bernoulli corrections is ~1e-14-accurate above 20
    let stirling = |x: f64| -> f64 {
        let ln_sqrt_2pi = 0.918_938_533_204_672_7;
        let inv = 1.0 / x;
        let inv2 = inv * inv;
        (x - 0.5) * x.ln() - x
            + ln_sqrt_2pi
            + inv * (1.0 / 12.0
                - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0))))
    };
    let mut x = 20.0;
    while x <= 120.0 {
        let ours = log_gamma(x).unwrap();
        assert!((ours - stirling(x)).abs() < 1e-11, "x = {x}");
        x += 0.73;
    }
    assert!((log_gamma(20.5).unwrap() - stirling(20.5)).abs() < 1e-12);
}
