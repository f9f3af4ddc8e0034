//! Masked error metrics and bootstrap intervals.

use rand::Rng;

use crate::error::{invalid, CompletionError, Result};
use crate::matrix::{Grid, Mask, MaskedMatrix};
use crate::seed::rng_for;

/// Per-column mean of the observed entries; `None` for empty columns.
pub fn column_means(matrix: &MaskedMatrix) -> Vec<Option<f64>> {
    (0..matrix.cols())
        .map(|j| {
            let (sum, n) = (0..matrix.rows())
                .filter_map(|i| matrix.get(i, j))
                .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            (n > 0).then(|| sum / n as f64)
        })
        .collect()
}

/// Squared errors at the selected cells (row-major order), each divided by
/// the squared column scale when `scales` is given.
pub fn squared_errors(
    truth: &Grid,
    estimate: &Grid,
    eval: &Mask,
    scales: Option<&[Option<f64>]>,
) -> Result<Vec<f64>> {
    if truth.shape() != estimate.shape() || truth.shape() != eval.shape() {
        return Err(invalid(format!(
            "shape mismatch: truth {:?}, estimate {:?}, eval {:?}",
            truth.shape(),
            estimate.shape(),
            eval.shape()
        )));
    }
    if eval.is_empty() {
        return Err(invalid("evaluation mask selects no cells"));
    }
    eval.positions()
        .map(|(i, j)| {
            let scale = match scales {
                None => 1.0,
                Some(s) => match s[j] {
                    Some(mu) if mu != 0.0 && mu.is_finite() => mu,
                    _ => return Err(CompletionError::DegenerateColumn(j)),
                },
            };
            let d = (estimate[(i, j)] - truth[(i, j)]) / scale;
            Ok(d * d)
        })
        .collect()
}

/// Mean squared error over `eval`. With `column_normalize`, both truth and
/// estimate are divided by the mean of the truth's observed entries in each
/// column first.
pub fn masked_mse(
    truth: &MaskedMatrix,
    estimate: &Grid,
    eval: &Mask,
    column_normalize: bool,
) -> Result<f64> {
    if let Some((i, j)) = eval.positions().find(|&(i, j)| !truth.is_observed(i, j)) {
        return Err(invalid(format!("evaluated cell ({i}, {j}) has no truth value")));
    }
    let means = column_normalize.then(|| column_means(truth));
    let errs = squared_errors(truth.zero_filled(), estimate, eval, means.as_deref())?;
    Ok(mean(&errs))
}

/// Dense-truth variant, used when the truth grid is complete.
pub fn grid_mse(truth: &Grid, estimate: &Grid, eval: &Mask) -> Result<f64> {
    Ok(mean(&squared_errors(truth, estimate, eval, None)?))
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// `(mean − 2σ, mean + 2σ)` of `iterations` bootstrap resample means.
pub fn bootstrap_ci(values: &[f64], iterations: usize, seed: u64) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(invalid("bootstrap over an empty list"));
    }
    if iterations == 0 {
        return Err(invalid("bootstrap needs at least one iteration"));
    }
    let n = values.len();
    let mut rng = rng_for(seed, &[0xB007]);
    let means: Vec<f64> = (0..iterations)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    let centre = mean(&means);
    let var = means.iter().map(|m| (m - centre).powi(2)).sum::<f64>() / iterations as f64;
    let half = 2.0 * var.sqrt();
    Ok((centre - half, centre + half))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn column(vals: &[f64]) -> MaskedMatrix {
        MaskedMatrix::fully_observed(Grid::from_column_slice(vals.len(), 1, vals)).unwrap()
    }

    #[test]
    fn identical_inputs_have_zero_error() {
        let t = MaskedMatrix::fully_observed(Grid::from_fn(3, 4, |i, j| (i * 4 + j) as f64 + 1.0))
            .unwrap();
        let eval = Mask::new(3, 4, true);
        assert_eq!(masked_mse(&t, t.zero_filled(), &eval, false).unwrap(), 0.0);
        assert_eq!(masked_mse(&t, t.zero_filled(), &eval, true).unwrap(), 0.0);
    }

    #[test]
    fn single_cell() {
        let t = column(&[2.0]);
        let e = Grid::from_element(1, 1, 3.0);
        assert_eq!(masked_mse(&t, &e, &Mask::new(1, 1, true), false).unwrap(), 1.0);
    }

    #[test]
    fn column_normalized() {
        let t = column(&[2.0, 4.0]);
        let e = Grid::from_column_slice(2, 1, &[2.0, 5.0]);
        let eval = Mask::from_fn(2, 1, |i, _| i == 1);
        let mse = masked_mse(&t, &e, &eval, true).unwrap();
        assert_relative_eq!(mse, 1.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn errors() {
        let t = column(&[0.0, 0.0]);
        let e = Grid::zeros(2, 1);
        assert!(matches!(
            masked_mse(&t, &e, &Mask::new(2, 1, false), false),
            Err(CompletionError::InvalidInput(_))
        ));
        assert!(matches!(
            masked_mse(&t, &e, &Mask::new(2, 1, true), true),
            Err(CompletionError::DegenerateColumn(0))
        ));
    }

    #[test]
    fn symmetric_without_normalization() {
        let a = column(&[1.0, 5.0, -2.0]);
        let b = column(&[0.5, 4.0, 3.0]);
        let eval = Mask::new(3, 1, true);
        assert_eq!(
            masked_mse(&a, b.zero_filled(), &eval, false).unwrap(),
            masked_mse(&b, a.zero_filled(), &eval, false).unwrap()
        );
    }

    #[test]
    fn bootstrap_constant_list() {
        let (lo, hi) = bootstrap_ci(&[0.25; 7], 100, 3).unwrap();
        assert_relative_eq!(lo, 0.25, epsilon = 1e-15);
        assert_relative_eq!(hi, 0.25, epsilon = 1e-15);
        assert_eq!(bootstrap_ci(&[1.0], 10, 0).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn bootstrap_two_point() {
        // Enumerated: resample means 0, 1, 2 with probabilities 1/4, 1/2, 1/4,
        // so σ = 1/√2 and the half-width 2σ = √2.
        let (lo, hi) = bootstrap_ci(&[0.0, 2.0], 10_000, 11).unwrap();
        let centre = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        assert!((centre - 1.0).abs() < 0.1, "centre {centre}");
        assert!((half / 2f64.sqrt() - 1.0).abs() < 0.1, "half-width {half}");
    }

    #[test]
    fn bootstrap_is_seeded() {
        let v = [0.1, 0.4, 0.2, 0.9];
        assert_eq!(bootstrap_ci(&v, 50, 5).unwrap(), bootstrap_ci(&v, 50, 5).unwrap());
        assert!(bootstrap_ci(&[], 5, 0).is_err());
        assert!(bootstrap_ci(&v, 0, 0).is_err());
    }

    #[test]
    fn bootstrap_width_shrinks_with_sqrt_n() {
        // Replicating the list 4x should halve the half-width.
        let base: Vec<f64> = (0..25).map(|k| ((k * 37) % 11) as f64 / 3.0).collect();
        let long: Vec<f64> = base.iter().cycle().take(base.len() * 4).copied().collect();
        let width = |v: &[f64]| {
            (0..50u64)
                .map(|s| {
                    let (lo, hi) = bootstrap_ci(v, 400, s).unwrap();
                    hi - lo
                })
                .sum::<f64>()
                / 50.0
        };
        let ratio = width(&long) / width(&base);
        assert!((ratio - 0.5).abs() < 0.1, "ratio {ratio}");
    }
}
