//! Comparison methods: nuclear-norm completion by singular value
//! thresholding with a cross-validated penalty, and the Riegel race-time
//! power law.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{singular_values, sorted_svd};
use crate::matrix::{Completion, Grid, Mask, MaskedMatrix};
use crate::metrics::grid_mse;
use crate::par;
use crate::seed::rng_for;

pub const RIEGEL_EXPONENT: f64 = 1.06;

/// Penalty values to try, either absolute or as multiples of the top
/// singular value of the zero-filled input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LambdaGrid {
    Absolute(Vec<f64>),
    RelativeToTop(Vec<f64>),
}

impl LambdaGrid {
    /// `count` log-spaced multiples spanning `[lo, hi]`.
    pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Self {
        let vals = if count == 1 {
            vec![hi]
        } else {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count).map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp()).collect()
        };
        LambdaGrid::RelativeToTop(vals)
    }

    fn values(&self) -> &[f64] {
        match self {
            LambdaGrid::Absolute(v) | LambdaGrid::RelativeToTop(v) => v,
        }
    }

    pub fn resolve(&self, zero_filled: &Grid) -> Vec<f64> {
        match self {
            LambdaGrid::Absolute(v) => v.clone(),
            LambdaGrid::RelativeToTop(v) => {
                let top = singular_values(zero_filled).first().copied().unwrap_or(0.0);
                v.iter().map(|f| f * top).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvtConfig {
    pub lambda_grid: LambdaGrid,
    pub holdout_fraction: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub step: f64,
}

impl Default for SvtConfig {
    fn default() -> Self {
        SvtConfig {
            lambda_grid: LambdaGrid::log_spaced(1e-3, 1.0, 8),
            holdout_fraction: 0.2,
            max_iters: 300,
            rel_tol: 1e-5,
            step: 1.0,
        }
    }
}

impl SvtConfig {
    pub fn validate(&self) -> Result<()> {
        let grid = self.lambda_grid.values();
        if grid.is_empty() {
            return Err(invalid("lambda grid is empty"));
        }
        if grid.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(invalid("lambda values must be positive"));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(invalid("holdout fraction must lie in (0, 1)"));
        }
        if self.max_iters == 0 || !(self.rel_tol > 0.0) || !(self.step > 0.0) {
            return Err(invalid("max_iters, rel_tol and step must be positive"));
        }
        Ok(())
    }
}

/// Soft-thresholds the singular values of `z` by `tau`. Returns the result
/// and its nuclear norm.
pub fn soft_threshold(z: &Grid, tau: f64) -> (Grid, f64) {
    let svd = sorted_svd(z);
    let kept = svd.s.iter().take_while(|&&s| s > tau).count();
    if kept == 0 {
        return (Grid::zeros(z.nrows(), z.ncols()), 0.0);
    }
    let mut left = svd.u.columns(0, kept).into_owned();
    let mut nuclear = 0.0;
    for k in 0..kept {
        let shrunk = svd.s[k] - tau;
        nuclear += shrunk;
        left.column_mut(k).scale_mut(shrunk);
    }
    (left * svd.v.columns(0, kept).transpose(), nuclear)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvtFit {
    pub values: Grid,
    /// `½‖P(X − A)‖² + λ‖X‖_*` after each iteration.
    pub objective: Vec<f64>,
}

/// Proximal gradient on `½‖P_Ω(X − A)‖² + λ‖X‖_*` from `X = 0`.
pub fn svt_fit(a: &MaskedMatrix, lambda: f64, step: f64, max_iters: usize, rel_tol: f64) -> SvtFit {
    let (m, n) = a.shape();
    let mut x = Grid::zeros(m, n);
    let mut history = Vec::with_capacity(max_iters);
    for _ in 0..max_iters {
        let mut z = x.clone();
        for (i, j, v) in a.observed_entries() {
            z[(i, j)] -= step * (x[(i, j)] - v);
        }
        let (next, nuclear) = soft_threshold(&z, lambda * step);
        let fit: f64 = a.observed_entries().map(|(i, j, v)| (next[(i, j)] - v).powi(2)).sum();
        history.push(0.5 * fit + lambda * nuclear);
        let change = (&next - &x).norm();
        let scale = x.norm();
        x = next;
        if change <= rel_tol * scale || change == 0.0 {
            break;
        }
    }
    SvtFit { values: x, objective: history }
}

/// Picks λ from the grid by holdout MSE, then refits on every observed
/// entry. Grid points run in parallel.
pub fn svt_complete(a: &MaskedMatrix, config: &SvtConfig, seed: u64) -> Result<Grid> {
    config.validate()?;
    let observed: Vec<(usize, usize)> = a.mask().positions().collect();
    if observed.len() < 2 {
        return Err(invalid("nuclear-norm completion needs at least two observed entries"));
    }
    let lambdas = config.lambda_grid.resolve(a.zero_filled());

    let n_hold = ((config.holdout_fraction * observed.len() as f64).round() as usize)
        .clamp(1, observed.len() - 1);
    let mut rng = rng_for(seed, &[0x5F7]);
    let mut holdout = Mask::new(a.rows(), a.cols(), false);
    for k in index::sample(&mut rng, observed.len(), n_hold) {
        let (i, j) = observed[k];
        holdout.set(i, j, true);
    }
    let train = a.hide(&holdout)?;

    let scores: Vec<f64> = par::map_slice(&lambdas, |&lambda| {
        let fit = svt_fit(&train, lambda, config.step, config.max_iters, config.rel_tol);
        grid_mse(a.zero_filled(), &fit.values, &holdout).unwrap_or(f64::INFINITY)
    });
    let best = scores
        .iter()
        .enumerate()
        .fold(0, |best, (k, &s)| if s < scores[best] { k } else { best });
    Ok(svt_fit(a, lambdas[best], config.step, config.max_iters, config.rel_tol).values)
}

/// `t1 · (d2/d1)^1.06`.
pub fn riegel_predict(t1: f64, d1: f64, d2: f64) -> Result<f64> {
    if !(t1 > 0.0 && d1 > 0.0 && d2 > 0.0) {
        return Err(invalid(format!(
            "riegel inputs must be positive (t1={t1}, d1={d1}, d2={d2})"
        )));
    }
    Ok(t1 * (d2 / d1).powf(RIEGEL_EXPONENT))
}

/// Fills each missing time from the row's observed time at the nearest
/// distance (ties go to the shorter distance). Rows without observations
/// get the column mean and are flagged.
pub fn riegel_complete(a: &MaskedMatrix, distances: &[f64]) -> Result<Completion> {
    let (m, n) = a.shape();
    if distances.len() != n {
        return Err(invalid(format!("{} distances for {n} columns", distances.len())));
    }
    if distances.iter().any(|&d| !(d > 0.0)) {
        return Err(invalid("distances must be positive"));
    }
    let col_means = crate::metrics::column_means(a);
    let overall = a.observed_mean().unwrap_or(0.0);

    let mut values = a.zero_filled().clone();
    let mut fallback = Mask::new(m, n, false);
    for i in 0..m {
        for j in 0..n {
            if a.is_observed(i, j) {
                continue;
            }
            let anchor = (0..n).filter(|&l| a.is_observed(i, l)).min_by(|&p, &q| {
                let dp = (distances[p] - distances[j]).abs();
                let dq = (distances[q] - distances[j]).abs();
                dp.total_cmp(&dq).then(distances[p].total_cmp(&distances[q]))
            });
            match anchor {
                Some(l) => values[(i, j)] = riegel_predict(a.observed(i, l), distances[l], distances[j])?,
                None => {
                    values[(i, j)] = col_means[j].unwrap_or(overall);
                    fallback.set(i, j, true);
                }
            }
        }
    }
    Ok(Completion { values, fallback })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn low_rank(m: usize, n: usize) -> Grid {
        let u = Grid::from_fn(m, 2, |i, k| 1.0 + ((i * 7 + k * 3) % 5) as f64);
        let v = Grid::from_fn(n, 2, |j, k| 0.5 + ((j * 5 + k * 2) % 7) as f64);
        &u * v.transpose()
    }

    #[test]
    fn soft_threshold_shifts_singular_values() {
        let g = low_rank(6, 5) + Grid::identity(6, 5) * 0.3;
        let before = singular_values(&g);
        let tau = 0.5;
        let (out, nuclear) = soft_threshold(&g, tau);
        let after = singular_values(&out);
        for (b, a) in before.iter().zip(&after) {
            assert_relative_eq!(b - a, b.min(tau), epsilon = 1e-9);
        }
        assert_relative_eq!(nuclear, after.iter().sum::<f64>(), epsilon = 1e-9);
    }

    #[test]
    fn tiny_lambda_recovers_full_matrix() {
        let g = low_rank(8, 7);
        let a = MaskedMatrix::fully_observed(g.clone()).unwrap();
        let fit = svt_fit(&a, 1e-9, 1.0, 50, 1e-12);
        assert_relative_eq!(fit.values, g, epsilon = 1e-6);
    }

    #[test]
    fn huge_lambda_gives_zero() {
        let g = low_rank(8, 7);
        let a = MaskedMatrix::fully_observed(g.clone()).unwrap();
        let top = singular_values(&g)[0];
        let fit = svt_fit(&a, 1.01 * top, 1.0, 50, 1e-12);
        assert!(fit.values.norm() < 1e-12);
    }

    #[test]
    fn objective_nonincreasing_with_unit_step() {
        let g = low_rank(12, 10);
        let mask = Mask::from_fn(12, 10, |i, j| (i * 3 + j * 7) % 5 != 0);
        let a = MaskedMatrix::new(g, mask).unwrap();
        for lambda in [0.1, 1.0, 5.0] {
            let fit = svt_fit(&a, lambda, 1.0, 100, 1e-12);
            for w in fit.objective.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn svt_config_errors() {
        let a = MaskedMatrix::fully_observed(low_rank(4, 4)).unwrap();
        let empty = SvtConfig { lambda_grid: LambdaGrid::Absolute(vec![]), ..SvtConfig::default() };
        assert!(svt_complete(&a, &empty, 0).is_err());
        let one = MaskedMatrix::from_rows(&[vec![Some(1.0), None]]).unwrap();
        assert!(svt_complete(&one, &SvtConfig::default(), 0).is_err());
    }

    #[test]
    fn riegel_closed_form() {
        assert_eq!(riegel_predict(1200.0, 5000.0, 5000.0).unwrap(), 1200.0);
        let t = riegel_predict(1200.0, 5000.0, 10000.0).unwrap();
        assert_relative_eq!(t, 1200.0 * 2f64.powf(1.06), max_relative = 1e-12);
        assert!((t - 2501.918).abs() < 1e-3, "{t}");
        assert!(riegel_predict(0.0, 1.0, 1.0).is_err());
        assert!(riegel_predict(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn riegel_composes() {
        let (t, d) = (731.0, 3000.0);
        let two = riegel_predict(riegel_predict(t, d, 2.0 * d).unwrap(), 2.0 * d, 4.0 * d).unwrap();
        let one = riegel_predict(t, d, 4.0 * d).unwrap();
        assert_relative_eq!(two, one, max_relative = 1e-9);
        // scale equivariance in time
        assert_relative_eq!(
            riegel_predict(3.0 * t, d, 1.7 * d).unwrap(),
            3.0 * riegel_predict(t, d, 1.7 * d).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn riegel_complete_cases() {
        let d: [f64; 4] = [800.0, 1500.0, 5000.0, 10000.0];
        let law: Vec<Option<f64>> = d.iter().map(|&x| Some(0.05 * x.powf(1.06))).collect();
        let mut sparse = law.clone();
        sparse[0] = None;
        sparse[3] = None;
        let a = MaskedMatrix::from_rows(&[law.clone(), sparse, vec![None; 4]]).unwrap();
        let done = riegel_complete(&a, &d).unwrap();
        for j in 0..4 {
            assert_eq!(done.values[(0, j)], law[j].unwrap());
            assert_relative_eq!(done.values[(1, j)], law[j].unwrap(), max_relative = 1e-9);
        }
        assert_eq!(done.fallback.row_count(2), 4);
        assert_eq!(done.fallback.count(), 4);

        let single = MaskedMatrix::from_rows(&[vec![Some(600.0), None]]).unwrap();
        let done = riegel_complete(&single, &[2000.0, 3000.0]).unwrap();
        assert_eq!(done.values[(0, 1)], riegel_predict(600.0, 2000.0, 3000.0).unwrap());

        assert!(riegel_complete(&single, &[1.0]).is_err());
    }

    #[test]
    fn riegel_tie_prefers_shorter() {
        let a = MaskedMatrix::from_rows(&[vec![Some(100.0), None, Some(400.0)]]).unwrap();
        let done = riegel_complete(&a, &[1000.0, 2000.0, 3000.0]).unwrap();
        assert_eq!(done.values[(0, 1)], riegel_predict(100.0, 1000.0, 2000.0).unwrap());
    }
}
