//! Zero replacement for compositional rows: zeros become epsilon and the
//! affected row is renormalized to unit sum. Rows without zeros pass
//! through untouched. Applies only when the data has very few zeros;
//! beyond `max_zero_fraction` the caller should move to a zero-adjusted
//! model instead.

use crate::CliError;

pub(crate) struct PreprocessOutcome {
    pub rows_affected: usize,
}

pub(crate) fn preprocess_zeros(
    component_rows: &mut [Vec<f64>],
    epsilon: f64,
    max_zero_fraction: f64,
) -> Result<PreprocessOutcome, CliError> {
    let k = component_rows.first().map_or(0, Vec::len);
    if k < 2 {
        return Err(CliError::data("need at least 2 component columns"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0 / k as f64) {
        return Err(CliError::usage(format!(
            "zero-epsilon must lie in (0, 1/k) = (0, {}), got {epsilon}",
            1.0 / k as f64
        )));
    }
    for (i, row) in component_rows.iter().enumerate() {
        for &v in row {
            if !v.is_finite() || v < 0.0 || v > 1.0 {
                return Err(CliError::data(format!(
                    "row {}: component value {v} outside [0, 1]",
                    i + 1
                )));
            }
        }
    }
    let zero_rows: Vec<usize> = component_rows
        .iter()
        .enumerate()
        .filter(|(_, row)| row.iter().any(|&v| v == 0.0))
        .map(|(i, _)| i)
        .collect();
    let frac = zero_rows.len() as f64 / component_rows.len() as f64;
    if frac > max_zero_fraction {
        return Err(CliError::data(format!(
            "{} of {} rows contain zero components ({:.1}% > {:.1}%); \
             consider a zero-adjusted model instead of replacement",
            zero_rows.len(),
            component_rows.len(),
            100.0 * frac,
            100.0 * max_zero_fraction
        )));
    }
    for &i in &zero_rows {
        let row = &mut component_rows[i];
        for v in row.iter_mut() {
            if *v == 0.0 {
                *v = epsilon;
            }
        }
        let sum: f64 = row.iter().sum();
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok(PreprocessOutcome {
        rows_affected: zero_rows.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replaces_and_renormalizes_zero_rows() {
        let mut rows = vec![vec![0.0, 0.6, 0.4], vec![0.2, 0.3, 0.5]];
        let out = preprocess_zeros(&mut rows, 0.001, 0.5).unwrap();
        assert_eq!(out.rows_affected, 1);
        // (0.001, 0.6, 0.4) / 1.001
        assert!((rows[0][0] - 0.001 / 1.001).abs() < 1e-15);
        assert!((rows[0][1] - 0.6 / 1.001).abs() < 1e-15);
        assert!((rows[0][2] - 0.4 / 1.001).abs() < 1e-15);
        let s: f64 = rows[0].iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn untouched_rows_are_bit_identical() {
        let clean = vec![0.2, 0.3, 0.5];
        let mut rows = vec![vec![0.0, 0.6, 0.4], clean.clone()];
        preprocess_zeros(&mut rows, 0.001, 0.5).unwrap();
        assert_eq!(rows[1], clean);
    }

    #[test]
    fn sleep_shaped_data_passes_the_gate() {
        // 42 rows, 2 with zeros: 4.8% <= 10%
        let mut rows: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![0.134, 0.532, 0.152, 0.182])
            .collect();
        rows.push(vec![0.14, 0.54, 0.0, 0.32]);
        rows.push(vec![0.13, 0.55, 0.0, 0.32]);
        let out = preprocess_zeros(&mut rows, 0.001, 0.1).unwrap();
        assert_eq!(out.rows_affected, 2);
    }

    #[test]
    fn too_many_zero_rows_is_an_error() {
        let mut rows = vec![
            vec![0.0, 0.6, 0.4],
            vec![0.0, 0.5, 0.5],
            vec![0.2, 0.3, 0.5],
        ];
        let err = preprocess_zeros(&mut rows, 0.001, 0.1).unwrap_err();
        assert_eq!(err.code, 3);
        assert!(err.message.contains("zero-adjusted"));
    }

    #[test]
    fn component_out_of_range_reports_row() {
        let mut rows = vec![vec![0.2, 0.3, 0.5], vec![1.2, -0.1, -0.1]];
        let err = preprocess_zeros(&mut rows, 0.001, 0.5).unwrap_err();
        assert_eq!(err.code, 3);
        assert!(err.message.contains("row 2"));
    }

    #[test]
    fn epsilon_must_be_below_one_over_k() {
        let mut rows = vec![vec![0.0, 0.6, 0.4]];
        assert_eq!(preprocess_zeros(&mut rows, 0.4, 0.5).unwrap_err().code, 2);
    }
}
