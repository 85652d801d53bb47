//! Normal probability plots with simulated envelopes and the
//! farthest-distance misspecification detector.
//!
//! An envelope is built by simulating R datasets from the fitted model,
//! refitting each, computing the chosen residual, and taking
//! per-order-statistic percentile bands across the R sorted residual
//! vectors. The summary `e` is the vertical distance from the residual
//! farthest outside the envelope to its nearest band (zero when all
//! residuals are inside). Across g correct-model datasets, the threshold
//! v is estimated as the average of the floor(0.95 g)-th and next order
//! statistics of e; a dataset is flagged when some residual falls outside
//! the envelope by at least v.

use crate::dirichlet::Composition;
use crate::error::{Error, Result};
use crate::exec;
use crate::mat::Mat;
use crate::regression::{fit_mle_parts, FitOptions, FittedModel};
use crate::residuals::{
    class_residuals_multi, composite_pearson, composite_quantile, row_params, BootstrapConfig,
    ResidualKind,
};
use crate::rng::{derive_seed, RngStream};
use crate::special::norm_quantile_raw;

const TAG_ENV_RESPONSES: u64 = 0xE1;
const TAG_ENV_BOOTSTRAP: u64 = 0xE2;

/// Envelope construction parameters.
#[derive(Clone, Debug)]
pub struct EnvelopeOptions {
    /// Number of simulated datasets R.
    pub simulations: usize,
    /// Bootstrap size for class residuals inside the envelope simulations;
    /// defaults to the observed-data B when unset.
    pub b_inner: Option<usize>,
    /// Band percentiles per order statistic.
    pub lower_pct: f64,
    pub upper_pct: f64,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        Self {
            simulations: 100,
            b_inner: None,
            lower_pct: 2.5,
            upper_pct: 97.5,
        }
    }
}

/// Envelope bands, the sorted observed residuals, and the exceedance
/// summary e.
#[derive(Clone, Debug)]
pub struct EnvelopeResult {
    pub kind: ResidualKind,
    pub sorted_residuals: Vec<f64>,
    pub theoretical_quantiles: Vec<f64>,
    pub lower_band: Vec<f64>,
    pub upper_band: Vec<f64>,
    pub outside_count: usize,
    /// Distance from the farthest outside residual to the nearest band.
    pub e: f64,
    /// Inner bootstrap size actually used for class residuals.
    pub b_inner: usize,
}

/// Flagging decision at threshold v.
#[derive(Clone, Copy, Debug)]
pub struct DetectionRule {
    pub v: f64,
    /// Residuals outside the envelope by at least v.
    pub flagged_points: usize,
}

impl DetectionRule {
    pub fn flagged(&self) -> bool {
        self.flagged_points > 0
    }
}

/// Blom plotting positions Phi^{-1}((i - 3/8) / (n + 1/4)), i = 1..n.
fn blom_quantiles(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| norm_quantile_raw((i as f64 - 0.375) / (n as f64 + 0.25)))
        .collect()
}

/// Linear-interpolated percentile of pre-sorted values.
fn percentile_sorted(sorted: &[f64], pct: f64) -> f64 {
    let m = sorted.len();
    let h = (m - 1) as f64 * pct / 100.0;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < m {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[m - 1]
    }
}

/// Outside count and farthest exceedance for sorted residuals vs bands.
pub(crate) fn band_excess(sorted: &[f64], lower: &[f64], upper: &[f64]) -> (usize, f64) {
    let mut outside = 0;
    let mut e = 0.0f64;
    for ((&s, &lo), &hi) in sorted.iter().zip(lower).zip(upper) {
        if s < lo {
            outside += 1;
            e = e.max(lo - s);
        } else if s > hi {
            outside += 1;
            e = e.max(s - hi);
        }
    }
    (outside, e)
}

fn residuals_for_kinds(
    fit: &FittedModel,
    y: &[Composition],
    covariates: &Mat,
    kinds: &[ResidualKind],
    cfg: &BootstrapConfig,
) -> Result<Vec<Vec<f64>>> {
    let class_kinds: Vec<ResidualKind> = kinds.iter().copied().filter(|k| k.is_class()).collect();
    let class_results = if class_kinds.is_empty() {
        Vec::new()
    } else {
        class_residuals_multi(fit, y, covariates, &class_kinds, cfg)?
    };
    let mut out = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let v = match kind {
            ResidualKind::CompositePearson => composite_pearson(fit, y)?,
            ResidualKind::CompositeQuantile => composite_quantile(fit, y)?,
            class => {
                let pos = class_kinds.iter().position(|&c| c == class).unwrap();
                class_results[pos].s.clone()
            }
        };
        out.push(v);
    }
    Ok(out)
}

/// Envelopes for several residual kinds from one shared set of R
/// simulated datasets (and, for the class kinds, one shared inner
/// bootstrap per simulation).
pub fn simulated_envelopes(
    fit: &FittedModel,
    y: &[Composition],
    covariates: &Mat,
    kinds: &[ResidualKind],
    opts: &EnvelopeOptions,
    cfg: &BootstrapConfig,
) -> Result<Vec<EnvelopeResult>> {
    if opts.simulations < 2 {
        return Err(Error::InvalidArgument(
            "an envelope needs at least 2 simulations".into(),
        ));
    }
    if kinds.is_empty() {
        return Err(Error::InvalidArgument("no residual kinds requested".into()));
    }
    if !(0.0..100.0).contains(&opts.lower_pct) || !(0.0..=100.0).contains(&opts.upper_pct) {
        return Err(Error::InvalidArgument("band percentiles out of range".into()));
    }
    let n = y.len();
    let b_inner = opts.b_inner.unwrap_or(cfg.b);

    // observed residuals per kind
    let observed = residuals_for_kinds(fit, y, covariates, kinds, cfg)?;
    let params = row_params(fit)?;

    // R simulations, each refit and measured with every kind
    let sims: Vec<Vec<Vec<f64>>> = exec::try_map_indexed(opts.simulations, |idx| {
        let r = idx as u64 + 1;
        let resp_seed = derive_seed(cfg.seed, TAG_ENV_RESPONSES, r);
        let mut retries = 0usize;
        loop {
            let mut stream = if retries == 0 {
                RngStream::new(resp_seed, 0)
            } else {
                RngStream::new(resp_seed, 0).derive(retries as u64)
            };
            let y_r: Vec<Composition> = params.iter().map(|p| crate::dirichlet::sample(p, &mut stream)).collect();
            let fit_r = match fit_mle_parts(&fit.spec, &y_r, covariates, &FitOptions::default()) {
                Ok(f) => f,
                Err(Error::FitFailure(msg)) => {
                    retries += 1;
                    if retries > cfg.max_retries_per_replicate {
                        return Err(Error::ReplicateFailure {
                            replicate: r as usize,
                            retries: retries - 1,
                            msg,
                        });
                    }
                    continue;
                }
                Err(other) => return Err(other),
            };
            let inner_cfg = BootstrapConfig {
                b: b_inner,
                seed: derive_seed(cfg.seed, TAG_ENV_BOOTSTRAP, r),
                max_retries_per_replicate: cfg.max_retries_per_replicate,
                keep_replicate_residuals: false,
            };
            let mut vectors = residuals_for_kinds(&fit_r, &y_r, covariates, kinds, &inner_cfg)?;
            for v in &mut vectors {
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            }
            return Ok(vectors);
        }
    })?;

    let theoretical = blom_quantiles(n);
    let mut results = Vec::with_capacity(kinds.len());
    for (ki, &kind) in kinds.iter().enumerate() {
        let mut sorted = observed[ki].clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut lower = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n);
        let mut column = vec![0.0; opts.simulations];
        for i in 0..n {
            for (r, sim) in sims.iter().enumerate() {
                column[r] = sim[ki][i];
            }
            column.sort_by(|a, b| a.partial_cmp(b).unwrap());
            lower.push(percentile_sorted(&column, opts.lower_pct));
            upper.push(percentile_sorted(&column, opts.upper_pct));
        }
        let (outside_count, e) = band_excess(&sorted, &lower, &upper);
        results.push(EnvelopeResult {
            kind,
            sorted_residuals: sorted,
            theoretical_quantiles: theoretical.clone(),
            lower_band: lower,
            upper_band: upper,
            outside_count,
            e,
            b_inner,
        });
    }
    Ok(results)
}

/// Envelope for a single residual kind.
pub fn simulated_envelope(
    fit: &FittedModel,
    y: &[Composition],
    covariates: &Mat,
    kind: ResidualKind,
    opts: &EnvelopeOptions,
    cfg: &BootstrapConfig,
) -> Result<EnvelopeResult> {
    Ok(simulated_envelopes(fit, y, covariates, &[kind], opts, cfg)?
        .pop()
        .expect("one kind in, one result out"))
}

/// (e_[floor(0.95 g)] + e_[floor(0.95 g) + 1]) / 2 over the sorted e values.
pub fn estimate_v(e_values: &[f64]) -> Result<f64> {
    let g = e_values.len();
    if g < 20 {
        return Err(Error::InvalidArgument(format!(
            "v estimation needs at least 20 e-values, got {g}"
        )));
    }
    if e_values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite e-value".into()));
    }
    let mut sorted = e_values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let j = (0.95 * g as f64).floor() as usize; // 1-based order statistic
    Ok(0.5 * (sorted[j - 1] + sorted[j]))
}

/// Count the residuals outside the envelope by at least v (a distance
/// exactly equal to v flags).
pub fn detect_misspecification(env: &EnvelopeResult, v: f64) -> DetectionRule {
    let mut flagged_points = 0;
    for ((&s, &lo), &hi) in env
        .sorted_residuals
        .iter()
        .zip(&env.lower_band)
        .zip(&env.upper_band)
    {
        let dist = if s < lo {
            lo - s
        } else if s > hi {
            s - hi
        } else {
            continue;
        };
        if dist >= v {
            flagged_points += 1;
        }
    }
    DetectionRule { v, flagged_points }
}

// ---------------------------------------------------------------------------
// Output: SVG plot and band CSV
// ---------------------------------------------------------------------------

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 480.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 20.0;
const MARGIN_B: f64 = 52.0;

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

/// Render the normal probability plot as a standalone SVG string:
/// band polylines, identity reference line, one circle per observation,
/// labeled axes. Byte-identical output for identical inputs.
pub fn envelope_svg(env: &EnvelopeResult) -> Result<String> {
    let n = env.sorted_residuals.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty envelope".into()));
    }
    let xs = &env.theoretical_quantiles;
    let x_min = xs[0];
    let x_max = xs[n - 1];
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for v in env
        .sorted_residuals
        .iter()
        .chain(&env.lower_band)
        .chain(&env.upper_band)
    {
        y_min = y_min.min(*v);
        y_max = y_max.max(*v);
    }
    let x_pad = 0.05 * (x_max - x_min).max(1e-9);
    let y_pad = 0.05 * (y_max - y_min).max(1e-9);
    let (x0, x1) = (x_min - x_pad, x_max + x_pad);
    let (y0, y1) = (y_min - y_pad, y_max + y_pad);
    let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * (SVG_W - MARGIN_L - MARGIN_R);
    let py = |y: f64| SVG_H - MARGIN_B - (y - y0) / (y1 - y0) * (SVG_H - MARGIN_T - MARGIN_B);

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" viewBox=\"0 0 {SVG_W} {SVG_H}\">\n"
    ));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // axes
    s.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fmt(MARGIN_L),
        fmt(SVG_H - MARGIN_B),
        fmt(SVG_W - MARGIN_R),
        fmt(SVG_H - MARGIN_B)
    ));
    s.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fmt(MARGIN_L),
        fmt(MARGIN_T),
        fmt(MARGIN_L),
        fmt(SVG_H - MARGIN_B)
    ));
    // ticks
    for t in 0..=4 {
        let fx = x0 + (x1 - x0) * t as f64 / 4.0;
        let fy = y0 + (y1 - y0) * t as f64 / 4.0;
        s.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n",
            fmt(px(fx)),
            fmt(SVG_H - MARGIN_B),
            fmt(SVG_H - MARGIN_B + 5.0)
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            fmt(px(fx)),
            fmt(SVG_H - MARGIN_B + 18.0),
            fmt(fx)
        ));
        s.push_str(&format!(
            "<line x1=\"{1}\" y1=\"{0}\" x2=\"{2}\" y2=\"{0}\" stroke=\"black\"/>\n",
            fmt(py(fy)),
            fmt(MARGIN_L - 5.0),
            fmt(MARGIN_L)
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            fmt(MARGIN_L - 8.0),
            fmt(py(fy) + 4.0),
            fmt(fy)
        ));
    }
    // axis labels
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">Standard normal quantiles</text>\n",
        fmt((MARGIN_L + SVG_W - MARGIN_R) / 2.0),
        fmt(SVG_H - 12.0)
    ));
    s.push_str(&format!(
        "<text x=\"16\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">Residual ({})</text>\n",
        fmt((MARGIN_T + SVG_H - MARGIN_B) / 2.0),
        fmt((MARGIN_T + SVG_H - MARGIN_B) / 2.0),
        env.kind.name()
    ));

    let polyline = |vals: &[f64], dash: &str| -> String {
        let pts: Vec<String> = xs
            .iter()
            .zip(vals)
            .map(|(&x, &y)| format!("{},{}", fmt(px(x)), fmt(py(y))))
            .collect();
        format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"gray\"{} />\n",
            pts.join(" "),
            dash
        )
    };
    s.push_str(&polyline(&env.lower_band, ""));
    s.push_str(&polyline(&env.upper_band, ""));

    // identity reference line clipped to the plot range
    let id_lo = x0.max(y0);
    let id_hi = x1.min(y1);
    if id_lo < id_hi {
        s.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"lightgray\" stroke-dasharray=\"4 3\"/>\n",
            fmt(px(id_lo)),
            fmt(py(id_lo)),
            fmt(px(id_hi)),
            fmt(py(id_hi))
        ));
    }

    for (&x, &y) in xs.iter().zip(&env.sorted_residuals) {
        s.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"black\"/>\n",
            fmt(px(x)),
            fmt(py(y))
        ));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Write the SVG plot to a file.
pub fn render_envelope_plot(env: &EnvelopeResult, path: &std::path::Path) -> Result<()> {
    let svg = envelope_svg(env)?;
    std::fs::write(path, svg)?;
    Ok(())
}

/// Band/point data as versioned CSV with columns
/// (order_index, theoretical_quantile, residual, lower, upper).
pub fn envelope_csv(env: &EnvelopeResult) -> String {
    let mut out = format!(
        "# compresid csv v1 envelope kind={} outside={} e={}\n",
        env.kind.name(),
        env.outside_count,
        env.e
    );
    out.push_str("order_index,theoretical_quantile,residual,lower,upper\n");
    for i in 0..env.sorted_residuals.len() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            i + 1,
            env.theoretical_quantiles[i],
            env.sorted_residuals[i],
            env.lower_band[i],
            env.upper_band[i]
        ));
    }
    out
}
