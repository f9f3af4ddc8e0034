//! Spectral meta-algorithms that start from a coarse completion:
//! row-wise projection onto its top right singular vectors ([`smcb`]) and
//! fixed-rank alternating least squares refinement ([`refine`]), plus
//! spectrum diagnostics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{lstsq, singular_values, sorted_svd, truncate_rank};
use crate::matrix::{Completion, Grid, Mask, MaskedMatrix};
use crate::par;

/// Top right singular vectors of a dense grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    pub rank: usize,
    /// n × rank, orthonormal columns.
    pub right_vectors: DMatrix<f64>,
    /// Nonincreasing.
    pub singular_values: Vec<f64>,
}

impl SpectralBasis {
    pub fn of(grid: &Grid, rank: usize) -> Result<Self> {
        let (m, n) = grid.shape();
        if rank == 0 || rank > m.min(n) {
            return Err(invalid(format!("rank {rank} outside 1..={}", m.min(n))));
        }
        let svd = sorted_svd(grid);
        Ok(SpectralBasis {
            rank,
            right_vectors: svd.v.columns(0, rank).into_owned(),
            singular_values: svd.s[..rank].to_vec(),
        })
    }
}

fn check_init(a: &MaskedMatrix, init: &Grid) -> Result<()> {
    if init.shape() != a.shape() {
        return Err(invalid(format!(
            "initial estimate is {:?} but matrix is {:?}",
            init.shape(),
            a.shape()
        )));
    }
    if init.iter().any(|v| !v.is_finite()) {
        return Err(invalid("initial estimate has non-finite entries"));
    }
    Ok(())
}

/// Re-solves every row on its observed entries in the span of the top-`rank`
/// right singular vectors of `init`.
///
/// For row `i` with observed columns `O` and missing columns `U`, the
/// coefficients `c` minimize `‖c·V_Oᵀ − A(i, O)‖` (pseudoinverse solution)
/// and the missing cells become `c·V_Uᵀ`. Observed cells are copied
/// verbatim. Rows without observations keep `init` and are flagged.
pub fn smcb(a: &MaskedMatrix, init: &Grid, rank: usize) -> Result<Completion> {
    check_init(a, init)?;
    let basis = SpectralBasis::of(init, rank)?;
    let v = &basis.right_vectors;
    let (m, n) = a.shape();

    let rows: Vec<(Vec<f64>, bool)> = par::map_range(m, |i| {
        let observed: Vec<usize> = (0..n).filter(|&j| a.is_observed(i, j)).collect();
        if observed.is_empty() {
            return ((0..n).map(|j| init[(i, j)]).collect(), true);
        }
        let design = DMatrix::from_fn(observed.len(), rank, |p, k| v[(observed[p], k)]);
        let target = DVector::from_iterator(observed.len(), observed.iter().map(|&j| a.observed(i, j)));
        let (coef, _) = lstsq(&design, &target);
        let row = (0..n)
            .map(|j| match a.get(i, j) {
                Some(x) => x,
                None => (0..rank).map(|k| coef[k] * v[(j, k)]).sum(),
            })
            .collect();
        (row, false)
    });

    let values = Grid::from_fn(m, n, |i, j| rows[i].0[j]);
    let fallback = Mask::from_fn(m, n, |i, j| rows[i].1 && !a.is_observed(i, j));
    Ok(Completion { values, fallback })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub rank: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub ridge: f64,
}

impl RefineConfig {
    pub fn new(rank: usize) -> Self {
        RefineConfig { rank, max_iters: 200, rel_tol: 1e-9, ridge: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(invalid("refine rank must be >= 1"));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be >= 1"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(invalid("rel_tol must be positive"));
        }
        if !(self.ridge >= 0.0) {
            return Err(invalid("ridge must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub values: Grid,
    /// Objective before the first sweep, then after every full sweep.
    pub objective: Vec<f64>,
    /// Rows whose subproblem had fewer than `rank` independent equations.
    pub deficient_rows: Vec<usize>,
    pub deficient_cols: Vec<usize>,
}

impl Refinement {
    pub fn iterations(&self) -> usize {
        self.objective.len() - 1
    }
}

/// Residual of one factor row against its observed targets, plus ridge.
fn row_loss(x: &[f64], others: &DMatrix<f64>, obs: &[(usize, f64)], ridge: f64) -> f64 {
    let fit: f64 = obs
        .iter()
        .map(|&(t, val)| {
            let pred: f64 = x.iter().enumerate().map(|(k, xk)| xk * others[(t, k)]).sum();
            (val - pred).powi(2)
        })
        .sum();
    fit + ridge * x.iter().map(|v| v * v).sum::<f64>()
}

/// Exact minimizer for one factor row. Keeps the current row if the solver
/// does not improve on it, so each half-sweep is nonincreasing.
fn solve_factor_row(
    current: &[f64],
    others: &DMatrix<f64>,
    obs: &[(usize, f64)],
    ridge: f64,
) -> (Vec<f64>, bool) {
    let r = current.len();
    let extra = if ridge > 0.0 { r } else { 0 };
    let rows = obs.len() + extra;
    let sr = ridge.sqrt();
    let design = DMatrix::from_fn(rows, r, |p, k| {
        if p < obs.len() {
            others[(obs[p].0, k)]
        } else if p - obs.len() == k {
            sr
        } else {
            0.0
        }
    });
    let target = DVector::from_fn(rows, |p, _| if p < obs.len() { obs[p].1 } else { 0.0 });
    let (sol, rank) = lstsq(&design, &target);
    let sol: Vec<f64> = sol.iter().copied().collect();
    let deficient = rank < r;
    if row_loss(&sol, others, obs, ridge) <= row_loss(current, others, obs, ridge) {
        (sol, deficient)
    } else {
        (current.to_vec(), deficient)
    }
}

fn objective(a: &MaskedMatrix, x: &DMatrix<f64>, y: &DMatrix<f64>, ridge: f64) -> f64 {
    let fit: f64 = a
        .observed_entries()
        .map(|(i, j, v)| (v - x.row(i).dot(&y.row(j))).powi(2))
        .sum();
    fit + ridge * (x.norm_squared() + y.norm_squared())
}

/// One half-sweep: re-solves every row of `target` with `fixed` held.
fn half_sweep(
    obs_by_row: &[Vec<(usize, f64)>],
    target: &DMatrix<f64>,
    fixed: &DMatrix<f64>,
    ridge: f64,
) -> (DMatrix<f64>, Vec<usize>) {
    let r = target.ncols();
    let solved: Vec<(Vec<f64>, bool)> = par::map_range(target.nrows(), |i| {
        let current: Vec<f64> = target.row(i).iter().copied().collect();
        solve_factor_row(&current, fixed, &obs_by_row[i], ridge)
    });
    let next = DMatrix::from_fn(target.nrows(), r, |i, k| solved[i].0[k]);
    let deficient = solved.iter().enumerate().filter(|(_, s)| s.1).map(|(i, _)| i).collect();
    (next, deficient)
}

/// Fixed-rank refinement of `init` by alternating least squares on the
/// observed entries.
///
/// `init` is truncated to `config.rank` and split as `U√S`, `V√S`; the two
/// factors are then re-solved in turn until the relative objective change
/// drops below `rel_tol` or `max_iters` sweeps are done. The objective
/// sequence is nonincreasing.
pub fn refine(a: &MaskedMatrix, init: &Grid, config: &RefineConfig) -> Result<Refinement> {
    config.validate()?;
    check_init(a, init)?;
    let (m, n) = a.shape();
    let r = config.rank;
    if r > m.min(n) {
        return Err(invalid(format!("rank {r} exceeds min dimension {}", m.min(n))));
    }
    let svd = sorted_svd(init);
    let mut x = DMatrix::from_fn(m, r, |i, k| svd.u[(i, k)] * svd.s[k].sqrt());
    let mut y = DMatrix::from_fn(n, r, |j, k| svd.v[(j, k)] * svd.s[k].sqrt());

    let by_row: Vec<Vec<(usize, f64)>> =
        (0..m).map(|i| (0..n).filter_map(|j| a.get(i, j).map(|v| (j, v))).collect()).collect();
    let by_col: Vec<Vec<(usize, f64)>> =
        (0..n).map(|j| (0..m).filter_map(|i| a.get(i, j).map(|v| (i, v))).collect()).collect();

    let mut history = vec![objective(a, &x, &y, config.ridge)];
    let mut deficient_rows = Vec::new();
    let mut deficient_cols = Vec::new();
    for _ in 0..config.max_iters {
        let (nx, dr) = half_sweep(&by_row, &x, &y, config.ridge);
        x = nx;
        let (ny, dc) = half_sweep(&by_col, &y, &x, config.ridge);
        y = ny;
        deficient_rows = dr;
        deficient_cols = dc;

        let prev = *history.last().unwrap();
        let cur = objective(a, &x, &y, config.ridge);
        history.push(cur);
        if prev <= f64::MIN_POSITIVE || (prev - cur).abs() / prev < config.rel_tol {
            break;
        }
    }
    Ok(Refinement { values: &x * y.transpose(), objective: history, deficient_rows, deficient_cols })
}

/// Rank with the largest relative spectral gap
/// `(σ_k − σ_{k+1}) / (σ_{k+1} + 1e-12·σ₁)` over `k ∈ 1..=max_rank`;
/// ties go to the smaller `k`.
pub fn estimate_rank(filled: &Grid, max_rank: usize) -> Result<usize> {
    let dim = filled.nrows().min(filled.ncols());
    if max_rank == 0 || max_rank >= dim {
        return Err(invalid(format!("max_rank {max_rank} must lie in 1..{dim}")));
    }
    let s = singular_values(filled);
    let tau = 1e-12 * s[0];
    let mut best = (1, f64::NEG_INFINITY);
    for k in 1..=max_rank {
        let ratio = (s[k - 1] - s[k]) / (s[k] + tau);
        // NaN only for the zero matrix; keep k = 1 there.
        if ratio > best.1 {
            best = (k, ratio);
        }
    }
    Ok(best.0)
}

/// `[σ₂−σ₃, σ₃−σ₄, …]`, `count` values.
pub fn spectral_gaps(filled: &Grid, count: usize) -> Result<Vec<f64>> {
    let dim = filled.nrows().min(filled.ncols());
    if count + 2 > dim {
        return Err(invalid(format!("{count} gaps need min dimension >= {}", count + 2)));
    }
    let s = singular_values(filled);
    Ok((1..=count).map(|k| s[k] - s[k + 1]).collect())
}

/// `|⟨v_k(estimate), v_k(truth)⟩|` for the k-th (1-based) right singular
/// vectors.
pub fn singular_vector_alignment(estimate: &Grid, truth: &Grid, k: usize) -> Result<f64> {
    if estimate.shape() != truth.shape() {
        return Err(invalid("alignment needs equal shapes"));
    }
    let dim = truth.nrows().min(truth.ncols());
    if k == 0 || k > dim {
        return Err(invalid(format!("singular vector index {k} outside 1..={dim}")));
    }
    let ve = sorted_svd(estimate).v;
    let vt = sorted_svd(truth).v;
    Ok(ve.column(k - 1).dot(&vt.column(k - 1)).abs().min(1.0))
}

/// Mean fill followed by rank-`rank` SVD truncation.
pub fn meanfill_svd(a: &MaskedMatrix, rank: usize) -> Result<Grid> {
    Ok(truncate_rank(&a.mean_filled()?, rank))
}

/// Zero fill rescaled by the inverse observed fraction, then rank-`rank`
/// SVD truncation.
pub fn zerofill_svd(a: &MaskedMatrix, rank: usize) -> Result<Grid> {
    let frac = a.observed_count() as f64 / (a.rows() * a.cols()) as f64;
    if frac == 0.0 {
        return Err(invalid("matrix has no observed entries"));
    }
    Ok(truncate_rank(&(a.zero_filled() / frac), rank))
}

/// Default search bound for rank estimation.
pub fn default_max_rank(a: &MaskedMatrix) -> usize {
    (a.rows().min(a.cols()) - 1).clamp(1, 10)
}

/// Mean fill, estimated rank, then [`refine`].
pub fn optspace_like(a: &MaskedMatrix, config: &RefineConfig) -> Result<Refinement> {
    let init = a.mean_filled()?;
    let rank = estimate_rank(&init, default_max_rank(a))?;
    refine(a, &init, &RefineConfig { rank, ..*config })
}
