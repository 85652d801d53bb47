//! Implementations of the CLI subcommands.

use crate::artifact::{CoefBlock, ModelArtifact, SubmodelSpec, ZeroReplacement, ARTIFACT_VERSION};
use crate::io::{read_table, write_atomic, Table};
use crate::preprocess::preprocess_zeros;
use crate::{
    CliError, DataArgs, EnvelopeArgs, FitArgs, LrtestArgs, PowerArgs, ResidualsArgs, SimulateArgs,
};
use compresid::dirichlet::Composition;
use compresid::envelope::{
    detect_misspecification, envelope_csv, envelope_svg, simulated_envelope, EnvelopeOptions,
};
use compresid::regression::{
    fit_mle, linear_predictors, log_likelihood, lr_test_parts, standard_errors,
    FitOptions, FittedModel, ModelSpec, RegressionData, TermList,
};
use compresid::residuals::{
    class_residual, composite_pearson, composite_quantile, BootstrapConfig, ResidualKind,
};
use compresid::simstudy::{
    run_power_study, run_scenario_study, MixtureConfig, PowerOptions, PowerStudyResult,
    ScenarioConfig, ScenarioId, ALL_KINDS,
};
use compresid::Mat;

/// Loaded dataset: parsed table, validated compositions, the full-table
/// covariate matrix (term lists index table columns), and the zero
/// replacement outcome if any row needed it.
struct Dataset {
    table: Table,
    y: Vec<Composition>,
    covariates: Mat,
    component_indices: Vec<usize>,
    preprocessing: Option<ZeroReplacement>,
}

fn load_dataset(args: &DataArgs) -> Result<Dataset, CliError> {
    if args.components.len() < 2 {
        return Err(CliError::usage(
            "--components needs at least two column names",
        ));
    }
    let table = read_table(&args.data)?;
    let component_indices: Vec<usize> = args
        .components
        .iter()
        .map(|c| table.column_index(c))
        .collect::<Result<_, _>>()?;
    let mut component_rows: Vec<Vec<f64>> = table
        .rows
        .iter()
        .map(|row| component_indices.iter().map(|&j| row[j]).collect())
        .collect();
    let outcome = preprocess_zeros(&mut component_rows, args.zero_epsilon, args.max_zero_fraction)?;
    if outcome.rows_affected > 0 {
        log::info!(
            "replaced zeros in {} row(s) with epsilon = {}",
            outcome.rows_affected,
            args.zero_epsilon
        );
    }
    let y: Vec<Composition> = component_rows
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            Composition::from_external(row)
                .map_err(|e| CliError::data(format!("row {}: {e}", i + 1)))
        })
        .collect::<Result<_, _>>()?;
    let covariates = Mat::from_rows(&table.rows);
    let preprocessing = (outcome.rows_affected > 0).then_some(ZeroReplacement {
        epsilon: args.zero_epsilon,
        rows_affected: outcome.rows_affected,
    });
    Ok(Dataset {
        table,
        y,
        covariates,
        component_indices,
        preprocessing,
    })
}

fn nonempty(names: &[String]) -> Vec<String> {
    names.iter().filter(|s| !s.is_empty()).cloned().collect()
}

pub(crate) fn fit(args: &FitArgs) -> Result<(), CliError> {
    let ds = load_dataset(&args.data)?;
    let components = &args.data.components;
    let mean_cov = nonempty(&args.mean_cov);
    let prec_cov = nonempty(&args.prec_cov);
    for name in mean_cov.iter().chain(&prec_cov) {
        if components.contains(name) {
            return Err(CliError::usage(format!(
                "'{name}' is a component column and cannot be a covariate"
            )));
        }
    }
    let reference_name = args.reference.clone().unwrap_or_else(|| components[0].clone());
    let reference = components
        .iter()
        .position(|c| c == &reference_name)
        .ok_or_else(|| {
            CliError::usage(format!(
                "reference '{reference_name}' is not one of the component columns"
            ))
        })?;
    let mean_cols: Vec<usize> = mean_cov
        .iter()
        .map(|c| ds.table.column_index(c))
        .collect::<Result<_, _>>()?;
    let prec_cols: Vec<usize> = prec_cov
        .iter()
        .map(|c| ds.table.column_index(c))
        .collect::<Result<_, _>>()?;
    let spec = ModelSpec {
        k: components.len(),
        mean_terms: vec![TermList::with_columns(true, mean_cols); components.len() - 1],
        precision_terms: TermList::with_columns(true, prec_cols),
        reference_component: reference,
    };
    let data = RegressionData::new(ds.y.clone(), ds.covariates.clone())?;
    log::info!(
        "fitting: n = {}, k = {}, {} parameters",
        data.n(),
        spec.k,
        spec.param_count()
    );
    let options = FitOptions {
        max_iter: args.max_iter,
        tol: args.tol,
        init: None,
    };
    let mut fitted = fit_mle(&spec, &data, &options)?;
    if !fitted.converged {
        log::warn!(
            "fit did not reach the gradient tolerance after {} iterations",
            fitted.iterations
        );
    }
    match standard_errors(&fitted, &data) {
        Ok(se) => fitted.std_errors = Some(se),
        Err(e) => log::warn!("standard errors unavailable: {e}"),
    }

    let nonref: Vec<String> = components
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != reference)
        .map(|(_, name)| name.clone())
        .collect();
    let artifact = ModelArtifact {
        version: ARTIFACT_VERSION,
        components: components.clone(),
        reference_component: reference_name,
        mean_submodels: nonref
            .iter()
            .map(|name| SubmodelSpec {
                component: name.clone(),
                intercept: true,
                covariates: mean_cov.clone(),
            })
            .collect(),
        precision_intercept: true,
        precision_covariates: prec_cov.clone(),
        coefficients: CoefBlock {
            beta: fitted.coef.beta.clone(),
            gamma: fitted.coef.gamma.clone(),
        },
        std_errors: fitted.std_errors.as_ref().map(|se| CoefBlock {
            beta: se.beta.clone(),
            gamma: se.gamma.clone(),
        }),
        loglik: fitted.loglik,
        n: data.n(),
        converged: fitted.converged,
        iterations: fitted.iterations,
        preprocessing: ds.preprocessing.clone(),
    };
    artifact.save(&args.out)?;
    print_fit_table(&artifact, &nonref, &mean_cov, &prec_cov);
    Ok(())
}

fn print_fit_table(
    artifact: &ModelArtifact,
    nonref: &[String],
    mean_cov: &[String],
    prec_cov: &[String],
) {
    println!(
        "{:<14} {:<14} {:>12} {:>12} {:>12}",
        "Submodel", "Covariate", "Estimate", "Std. Error", "Exp(estim)"
    );
    let se = artifact.std_errors.as_ref();
    let line = |submodel: &str, covariate: &str, estimate: f64, se: Option<f64>| {
        let se_str = se.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        println!(
            "{:<14} {:<14} {:>12.4} {:>12} {:>12.3}",
            submodel,
            covariate,
            estimate,
            se_str,
            estimate.exp()
        );
    };
    for (s, name) in nonref.iter().enumerate() {
        let submodel = format!("mu_{name}");
        line(
            &submodel,
            "(Intercept)",
            artifact.coefficients.beta[s][0],
            se.map(|b| b.beta[s][0]),
        );
        for (c, cov) in mean_cov.iter().enumerate() {
            line(
                &submodel,
                cov,
                artifact.coefficients.beta[s][c + 1],
                se.map(|b| b.beta[s][c + 1]),
            );
        }
    }
    line(
        "phi",
        "(Intercept)",
        artifact.coefficients.gamma[0],
        se.map(|b| b.gamma[0]),
    );
    for (c, cov) in prec_cov.iter().enumerate() {
        line(
            "phi",
            cov,
            artifact.coefficients.gamma[c + 1],
            se.map(|b| b.gamma[c + 1]),
        );
    }
    println!(
        "loglik = {}  n = {}  converged = {}  iterations = {}",
        artifact.loglik, artifact.n, artifact.converged, artifact.iterations
    );
}

/// Rebuild a `FittedModel` from an artifact against a freshly loaded
/// dataset (fitted values are recomputed from the stored coefficients).
fn reconstruct_fit(artifact: &ModelArtifact, ds: &Dataset) -> Result<FittedModel, CliError> {
    if artifact.components.len() != ds.component_indices.len() {
        return Err(CliError::data(format!(
            "artifact has {} components, --components lists {}",
            artifact.components.len(),
            ds.component_indices.len()
        )));
    }
    if artifact.n != ds.y.len() {
        log::warn!(
            "artifact was fitted on n = {}, data file has n = {}",
            artifact.n,
            ds.y.len()
        );
    }
    let (spec, coef) = artifact.resolve(&ds.table)?;
    let n = ds.y.len();
    let mut fitted_mu = Mat::zeros(n, spec.k);
    let mut fitted_phi = vec![0.0; n];
    for i in 0..n {
        let (mu, phi) = linear_predictors(&spec, &coef, ds.covariates.row(i))?;
        fitted_mu.row_mut(i).copy_from_slice(&mu);
        fitted_phi[i] = phi;
    }
    let data = RegressionData::new(ds.y.clone(), ds.covariates.clone())?;
    let loglik = log_likelihood(&spec, &coef, &data)?;
    Ok(FittedModel {
        spec,
        coef,
        loglik,
        fitted_mu,
        fitted_phi,
        std_errors: None,
        converged: artifact.converged,
        iterations: artifact.iterations,
    })
}

pub(crate) fn residuals(args: &ResidualsArgs) -> Result<(), CliError> {
    let kind = ResidualKind::parse(&args.kind).map_err(|e| CliError::usage(e.to_string()))?;
    let artifact = ModelArtifact::load(&args.model)?;
    let ds = load_dataset(&args.data)?;
    let fit = reconstruct_fit(&artifact, &ds)?;
    let mut out = String::new();
    if kind.is_class() {
        let cfg = BootstrapConfig {
            b: args.b,
            seed: args.seed,
            max_retries_per_replicate: args.retries,
            keep_replicate_residuals: false,
        };
        log::info!("bootstrap: B = {}, seed = {}", cfg.b, cfg.seed);
        let res = class_residual(&fit, &ds.y, &ds.covariates, kind, &cfg)?;
        out.push_str(&format!(
            "# compresid csv v1 residuals kind={} B={} seed={} replicate_failures={}\n",
            kind.name(),
            args.b,
            args.seed,
            res.replicate_failures
        ));
        out.push_str("row,l,a,s\n");
        for i in 0..res.s.len() {
            out.push_str(&format!("{},{},{},{}\n", i + 1, res.l[i], res.a[i], res.s[i]));
        }
    } else {
        let values = match kind {
            ResidualKind::CompositePearson => composite_pearson(&fit, &ds.y)?,
            _ => composite_quantile(&fit, &ds.y)?,
        };
        out.push_str(&format!(
            "# compresid csv v1 residuals kind={}\n",
            kind.name()
        ));
        out.push_str("row,r\n");
        for (i, v) in values.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, v));
        }
    }
    write_atomic(&args.out, &out)
}

pub(crate) fn envelope(args: &EnvelopeArgs) -> Result<(), CliError> {
    let kind = ResidualKind::parse(&args.kind).map_err(|e| CliError::usage(e.to_string()))?;
    let artifact = ModelArtifact::load(&args.model)?;
    let ds = load_dataset(&args.data)?;
    let fit = reconstruct_fit(&artifact, &ds)?;
    let opts = EnvelopeOptions {
        simulations: args.r,
        b_inner: args.b_inner,
        ..EnvelopeOptions::default()
    };
    let cfg = BootstrapConfig {
        b: args.b,
        seed: args.seed,
        max_retries_per_replicate: 20,
        keep_replicate_residuals: false,
    };
    log::info!(
        "envelope: kind = {}, R = {}, B = {}, B_inner = {}",
        kind.name(),
        args.r,
        args.b,
        opts.b_inner.unwrap_or(args.b)
    );
    let env = simulated_envelope(&fit, &ds.y, &ds.covariates, kind, &opts, &cfg)?;
    write_atomic(&args.svg, &envelope_svg(&env).map_err(CliError::from)?)?;
    write_atomic(&args.csv, &envelope_csv(&env))?;
    match args.v {
        Some(v) => {
            let rule = detect_misspecification(&env, v);
            println!(
                "flagged={} flagged_points={} e={} v={}",
                rule.flagged(),
                rule.flagged_points,
                env.e,
                v
            );
        }
        None => println!("outside={} e={}", env.outside_count, env.e),
    }
    Ok(())
}

pub(crate) fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let id = ScenarioId::parse(&args.scenario).map_err(|e| CliError::usage(e.to_string()))?;
    let replicates = args
        .replicates
        .unwrap_or(if args.paper_scale { 2000 } else { 500 });
    let b = args.b.unwrap_or(if args.paper_scale { 1000 } else { 200 });
    let cfg = ScenarioConfig::standard(id, args.n);
    log::info!(
        "scenario {}: n = {}, {} replicates, B = {}",
        id,
        args.n,
        replicates,
        b
    );
    let table = run_scenario_study(&cfg, replicates, b, args.seed)?;
    write_atomic(&args.out, &table.to_csv())
}

pub(crate) fn power(args: &PowerArgs) -> Result<(), CliError> {
    let mix = MixtureConfig::standard();
    let opts = PowerOptions {
        envelope: EnvelopeOptions {
            simulations: args.r,
            b_inner: Some(args.b_inner),
            ..EnvelopeOptions::default()
        },
        b: args.b,
        max_retries: 20,
    };
    let result = run_power_study(args.g_correct, args.g_wrong, args.n, &mix, args.seed, &opts)?;
    write_atomic(&args.out, &result.to_csv(args.g_correct, args.g_wrong))?;
    println!(
        "v_class={} v_composite={}",
        result.v_class, result.v_composite
    );
    for (ki, kind) in ALL_KINDS.iter().enumerate() {
        println!(
            "kind={} correct_flag_rate={:.4} mixture_flag_rate={:.4}",
            kind.name(),
            PowerStudyResult::flag_rate(&result.correct_flags[ki]),
            PowerStudyResult::flag_rate(&result.mixture_flags[ki]),
        );
    }
    Ok(())
}

pub(crate) fn lrtest(args: &LrtestArgs) -> Result<(), CliError> {
    let full = ModelArtifact::load(&args.full)?;
    let reduced = ModelArtifact::load(&args.reduced)?;
    if full.components != reduced.components
        || full.reference_component != reduced.reference_component
    {
        return Err(CliError::numerical(
            "models are not nested: different components or reference".to_string(),
        ));
    }
    // resolve both specs against a shared synthetic name -> index map
    let mut names: Vec<String> = full
        .mean_submodels
        .iter()
        .flat_map(|s| s.covariates.clone())
        .chain(full.precision_covariates.clone())
        .chain(
            reduced
                .mean_submodels
                .iter()
                .flat_map(|s| s.covariates.clone()),
        )
        .chain(reduced.precision_covariates.clone())
        .collect();
    names.sort();
    names.dedup();
    let fake_table = Table {
        headers: names,
        rows: Vec::new(),
    };
    let (full_spec, _) = full.resolve(&fake_table)?;
    let (reduced_spec, _) = reduced.resolve(&fake_table)?;
    let lr = lr_test_parts(
        &full_spec,
        full.loglik,
        full.n,
        &reduced_spec,
        reduced.loglik,
        reduced.n,
    )?;
    println!("statistic={} df={} p={}", lr.statistic, lr.df, lr.p);
    Ok(())
}
