use compresid::dirichlet::{sample, DirichletParams};
use compresid::regression::*;
use compresid::rng::RngStream;
use compresid::Mat;
use std::time::Instant;

fn main() {
    // saturated power-study-like spec: k=3, mean intercept+3 cols, prec intercept
    let spec = ModelSpec::homogeneous(
        3,
        TermList::with_columns(true, vec![0, 1, 2]),
        TermList::intercept_only(),
    );
    let mut coef = CoefficientVector::zeros(&spec);
    coef.beta[0] = vec![-0.3, 1.0, -0.5, 0.4];
    coef.beta[1] = vec![-0.3, -0.5, 1.0, -0.6];
    coef.gamma = vec![4.6];
    let n = 50;
    let mut rng = RngStream::new(1, 0);
    let mut cov = Mat::zeros(n, 3);
    for i in 0..n {
        let x2 = f64::from(rng.next_f64() < 0.5);
        let x3 = f64::from(rng.next_f64() < 0.5);
        cov[(i, 0)] = x2;
        cov[(i, 1)] = x3;
        cov[(i, 2)] = x2 * x3;
    }
    let reps = 2000;
    let t0 = Instant::now();
    let mut iters = 0usize;
    let mut fails = 0usize;
    for r in 0..reps {
        let mut s = RngStream::new(2, r as u64);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let (mu, phi) = linear_predictors(&spec, &coef, cov.row(i)).unwrap();
            y.push(sample(&DirichletParams::new(mu, phi).unwrap(), &mut s));
        }
        let data = RegressionData::new(y, cov.clone()).unwrap();
        match fit_mle(&spec, &data, &FitOptions::default()) {
            Ok(f) => iters += f.iterations,
            Err(_) => fails += 1,
        }
    }
    let dt = t0.elapsed();
    println!(
        "{} fits in {:?} -> {:.3} ms/fit, avg iters {:.1}, fails {}",
        reps,
        dt,
        dt.as_secs_f64() * 1000.0 / reps as f64,
        iters as f64 / reps as f64,
        fails
    );
}
