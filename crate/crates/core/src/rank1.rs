//! Fast rank-1 completion in log space from 2×2 minors.
//!
//! For a target `(i, j)` and every column `l` with `A(i, l)` observed, the
//! rows `k` observing both `A(k, l)` and `A(k, j)` give a magnitude-weighted
//! log ratio `log b_l = Σ_k w_k (log A(k, j) − log A(k, l))`, with
//! `w_k ∝ A(k, l)`. Each such column yields the candidate `A(i, l)·b_l`, and
//! candidates are merged by a weighted geometric mean with weights
//! `∝ A(i, l)`. An observed target joins as one more candidate with weight
//! `A(i, j)`.

use crate::combine::EntryEstimate;
use crate::error::{invalid, CompletionError, Result};
use crate::matrix::{Completion, Grid, Mask, MaskedMatrix};
use crate::par;

/// One rank-1 candidate for a target entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rank1Candidate {
    pub pivot_col: usize,
    pub ratio: f64,
    pub weight: f64,
}

/// Weighted mean of `log A(k, j) − log A(k, l)` over rows observing both
/// columns, skipping `skip_row`. `None` when no row qualifies.
fn log_ratio(a: &MaskedMatrix, l: usize, j: usize, skip_row: Option<usize>) -> Option<f64> {
    let mut sw = 0.0;
    let mut swd = 0.0;
    for k in 0..a.rows() {
        if Some(k) == skip_row || !a.is_observed(k, l) || !a.is_observed(k, j) {
            continue;
        }
        let akl = a.observed(k, l);
        sw += akl;
        swd += akl * (a.observed(k, j).ln() - akl.ln());
    }
    (sw > 0.0).then(|| swd / sw)
}

/// All rank-1 candidates for `(i, j)` built from other columns.
pub fn rank1_candidates(a: &MaskedMatrix, i: usize, j: usize) -> Vec<Rank1Candidate> {
    (0..a.cols())
        .filter(|&l| l != j && a.is_observed(i, l))
        .filter_map(|l| {
            log_ratio(a, l, j, Some(i)).map(|lb| Rank1Candidate {
                pivot_col: l,
                ratio: lb.exp(),
                weight: a.observed(i, l),
            })
        })
        .collect()
}

/// Accumulates `(Σ w' log cand, Σ w', support)`.
#[derive(Default)]
struct LogAccumulator {
    num: f64,
    den: f64,
    support: usize,
}

impl LogAccumulator {
    fn push(&mut self, weight: f64, log_value: f64) {
        self.num += weight * log_value;
        self.den += weight;
        self.support += 1;
    }

    fn finish(self, row: usize, col: usize) -> Option<EntryEstimate> {
        (self.support > 0).then(|| EntryEstimate {
            row,
            col,
            value: (self.num / self.den).exp(),
            variance_proxy: 1.0 / self.support as f64,
            support: self.support,
        })
    }
}

/// Rank-1 estimate of a single entry. `variance_proxy` is the reciprocal
/// of the candidate count, an uncalibrated monotone proxy.
pub fn faccro_entry(a: &MaskedMatrix, i: usize, j: usize) -> Result<EntryEstimate> {
    if i >= a.rows() || j >= a.cols() {
        return Err(invalid(format!("target ({i}, {j}) outside {:?}", a.shape())));
    }
    a.require_positive()?;
    faccro_entry_unchecked(a, i, j).ok_or(CompletionError::Unestimable { row: i, col: j })
}

pub(crate) fn faccro_entry_unchecked(a: &MaskedMatrix, i: usize, j: usize) -> Option<EntryEstimate> {
    let mut acc = LogAccumulator::default();
    for l in 0..a.cols() {
        if l == j || !a.is_observed(i, l) {
            continue;
        }
        if let Some(lb) = log_ratio(a, l, j, Some(i)) {
            let ail = a.observed(i, l);
            acc.push(ail, ail.ln() + lb);
        }
    }
    if let Some(aij) = a.get(i, j) {
        acc.push(aij, aij.ln());
    }
    acc.finish(i, j)
}

/// Geometric mean of the observed entries.
pub fn observed_geometric_mean(a: &MaskedMatrix) -> Option<f64> {
    let n = a.observed_count();
    (n > 0).then(|| (a.observed_entries().map(|(_, _, v)| v.ln()).sum::<f64>() / n as f64).exp())
}

/// Rank-1 completion of every unobserved cell.
///
/// Column log-ratios are computed once per `(l, j)` pair and shared by all
/// target rows. Cells with no candidate receive the observed geometric mean
/// and are flagged in [`Completion::fallback`].
pub fn faccro_all(a: &MaskedMatrix) -> Result<Completion> {
    let (m, n) = a.shape();
    let geo = observed_geometric_mean(a).ok_or_else(|| invalid("matrix has no observed entries"))?;
    a.require_positive()?;

    // ratios[j][l] = log b_l for target column j; only columns with holes.
    let ratios: Vec<Option<Vec<Option<f64>>>> = par::map_range(n, |j| {
        let has_hole = (0..m).any(|i| !a.is_observed(i, j));
        has_hole.then(|| {
            (0..n)
                .map(|l| if l == j { None } else { log_ratio(a, l, j, None) })
                .collect()
        })
    });

    let rows: Vec<Vec<(f64, bool)>> = par::map_range(m, |i| {
        (0..n)
            .map(|j| {
                if let Some(v) = a.get(i, j) {
                    return (v, false);
                }
                let col_ratios = ratios[j].as_ref().expect("column with a hole");
                let mut acc = LogAccumulator::default();
                for (l, lb) in col_ratios.iter().enumerate() {
                    if let (Some(lb), true) = (lb, a.is_observed(i, l)) {
                        let ail = a.observed(i, l);
                        acc.push(ail, ail.ln() + lb);
                    }
                }
                match acc.finish(i, j) {
                    Some(est) => (est.value, false),
                    None => (geo, true),
                }
            })
            .collect()
    });

    let values = Grid::from_fn(m, n, |i, j| rows[i][j].0);
    let fallback = Mask::from_fn(m, n, |i, j| rows[i][j].1);
    Ok(Completion { values, fallback })
}
