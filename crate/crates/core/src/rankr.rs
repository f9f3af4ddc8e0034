//! General-rank local completion from almost-complete minors.
//!
//! A target `(i, j)` is estimated from `(r+1)×(r+1)` submatrices through it
//! whose other entries are all observed. The determinant of such a minor is
//! affine in the hole, `det(x) = a0 + x·(a1 − a0)`, so each minor yields the
//! root `x* = −a0/(a1 − a0)`. Roots are merged with weights `∝ 1/δ²`, where
//! `δ` is a first-order deviation proxy computed from `a0` and `a1`.

use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::combine::{combine_min_variance, combined_proxy, Candidate, EntryEstimate};
use crate::error::{invalid, CompletionError, Result};
use crate::linalg::determinant;
use crate::matrix::{Completion, Grid, Mask, MaskedMatrix};
use crate::seed::rng_for;
use crate::{par, rank1};

/// Default relative degeneracy tolerance for `|a1 − a0|`.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-12;
/// Sampling gives up after this many rejections per requested minor.
pub const REJECTIONS_PER_MINOR: usize = 50;
/// Exhaustive search is allowed when the candidate space is at most this big.
pub const EXHAUSTIVE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightingMode {
    /// `δ = 1/|a1−a0| + |a0|/(a1−a0)²`
    Additive,
    /// `δ log = 1/|a0| + 1/|a1−a0|`
    Multiplicative,
}

impl WeightingMode {
    /// Multiplicative for strictly positive data, additive otherwise.
    pub fn default_for(a: &MaskedMatrix) -> Self {
        if a.all_positive() {
            WeightingMode::Multiplicative
        } else {
            WeightingMode::Additive
        }
    }
}

impl std::str::FromStr for WeightingMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "add" | "additive" => Ok(WeightingMode::Additive),
            "mult" | "multiplicative" => Ok(WeightingMode::Multiplicative),
            other => Err(format!("unknown weighting `{other}` (expected add or mult)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosureConfig {
    pub target_rank: usize,
    /// Maximum number of minors sampled per entry.
    pub iterations: usize,
    pub degeneracy_tol: f64,
    pub weighting: WeightingMode,
    /// Retry at lower rank when no minor survives.
    pub rank_fallback: bool,
    pub seed: u64,
}

impl ClosureConfig {
    pub fn new(target_rank: usize, weighting: WeightingMode) -> Self {
        ClosureConfig {
            target_rank,
            iterations: 50,
            degeneracy_tol: DEFAULT_DEGENERACY_TOL,
            weighting,
            rank_fallback: true,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_rank == 0 {
            return Err(invalid("target rank must be >= 1"));
        }
        if self.iterations == 0 {
            return Err(invalid("iterations must be >= 1"));
        }
        if !(self.degeneracy_tol > 0.0) {
            return Err(invalid("degeneracy tolerance must be positive"));
        }
        Ok(())
    }
}

/// Row and column indices of a minor; the target is the last of each.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MinorIndices {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl MinorIndices {
    /// Dense minor with the hole (bottom-right) set to zero.
    pub fn extract(&self, a: &MaskedMatrix) -> Grid {
        let n = self.rows.len();
        Grid::from_fn(n, n, |p, q| {
            if p == n - 1 && q == n - 1 {
                0.0
            } else {
                a.observed(self.rows[p], self.cols[q])
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinorCandidate {
    pub row_ids: Vec<usize>,
    pub col_ids: Vec<usize>,
    pub a0: f64,
    pub a1: f64,
    pub solution: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinorSolution {
    pub a0: f64,
    pub a1: f64,
    pub solution: f64,
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, t| acc * (n - t) as f64 / (t + 1) as f64)
}

/// Calls `f` on every `k`-subset of `0..n` in lexicographic order.
fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(p) = (0..k).rev().find(|&p| idx[p] != p + n - k) else { return };
        idx[p] += 1;
        for q in p + 1..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

fn block_observed(a: &MaskedMatrix, rows: &[usize], cols: &[usize]) -> bool {
    rows.iter().all(|&k| cols.iter().all(|&l| a.is_observed(k, l)))
}

fn assemble(rows: &[usize], cols: &[usize], i: usize, j: usize) -> MinorIndices {
    let mut r = rows.to_vec();
    let mut c = cols.to_vec();
    r.push(i);
    c.push(j);
    MinorIndices { rows: r, cols: c }
}

/// Every valid minor through `(i, j)`, in lexicographic order of the
/// (row set, column set) drawn from the candidate pools.
fn enumerate_minors(
    a: &MaskedMatrix,
    pool_rows: &[usize],
    pool_cols: &[usize],
    rank: usize,
    i: usize,
    j: usize,
) -> Vec<MinorIndices> {
    let mut out = Vec::new();
    for_each_subset(pool_rows.len(), rank, |rsel| {
        let rows: Vec<usize> = rsel.iter().map(|&p| pool_rows[p]).collect();
        let cols_ok: Vec<usize> = pool_cols
            .iter()
            .copied()
            .filter(|&l| rows.iter().all(|&k| a.is_observed(k, l)))
            .collect();
        for_each_subset(cols_ok.len(), rank, |csel| {
            let cols: Vec<usize> = csel.iter().map(|&q| cols_ok[q]).collect();
            out.push(assemble(&rows, &cols, i, j));
        });
    });
    out
}

/// Finds up to `iterations` distinct `(rank+1)`-square minors through
/// `(i, j)` whose every other entry is observed.
///
/// Row and column subsets are drawn uniformly from the rows observing column
/// `j` and the columns observed in row `i`, rejecting incomplete or repeated
/// draws. Sampling stops after `REJECTIONS_PER_MINOR · iterations`
/// rejections; if the search space has at most `EXHAUSTIVE_LIMIT` elements
/// the remainder is then filled from a full enumeration.
pub fn find_minors(
    a: &MaskedMatrix,
    i: usize,
    j: usize,
    rank: usize,
    iterations: usize,
    seed: u64,
) -> Vec<MinorIndices> {
    if rank == 0 || rank + 1 > a.rows().min(a.cols()) || iterations == 0 {
        return Vec::new();
    }
    let pool_rows: Vec<usize> = (0..a.rows()).filter(|&k| k != i && a.is_observed(k, j)).collect();
    let pool_cols: Vec<usize> = (0..a.cols()).filter(|&l| l != j && a.is_observed(i, l)).collect();
    if pool_rows.len() < rank || pool_cols.len() < rank {
        return Vec::new();
    }
    let space = binomial(pool_rows.len(), rank) * binomial(pool_cols.len(), rank);
    let mut rng = rng_for(seed, &[i as u64, j as u64, rank as u64]);

    if space <= iterations as f64 {
        return enumerate_minors(a, &pool_rows, &pool_cols, rank, i, j);
    }

    let mut found: Vec<MinorIndices> = Vec::with_capacity(iterations);
    let mut seen: HashSet<MinorIndices> = HashSet::new();
    let mut rejections = 0;
    let max_rejections = REJECTIONS_PER_MINOR * iterations;
    while found.len() < iterations && rejections <= max_rejections {
        let mut rows: Vec<usize> =
            index::sample(&mut rng, pool_rows.len(), rank).iter().map(|p| pool_rows[p]).collect();
        let mut cols: Vec<usize> =
            index::sample(&mut rng, pool_cols.len(), rank).iter().map(|q| pool_cols[q]).collect();
        rows.sort_unstable();
        cols.sort_unstable();
        if !block_observed(a, &rows, &cols) {
            rejections += 1;
            continue;
        }
        let minor = assemble(&rows, &cols, i, j);
        if seen.insert(minor.clone()) {
            found.push(minor);
        } else {
            rejections += 1;
        }
    }

    if found.len() < iterations && space <= EXHAUSTIVE_LIMIT {
        let mut all = enumerate_minors(a, &pool_rows, &pool_cols, rank, i, j);
        all.shuffle(&mut rng);
        for minor in all {
            if found.len() == iterations {
                break;
            }
            if !seen.contains(&minor) {
                seen.insert(minor.clone());
                found.push(minor);
            }
        }
    }
    found
}

/// Largest absolute non-hole entry of a minor.
fn minor_scale(b: &Grid) -> f64 {
    let n = b.nrows();
    let mut s: f64 = 0.0;
    for p in 0..n {
        for q in 0..n {
            if p != n - 1 || q != n - 1 {
                s = s.max(b[(p, q)].abs());
            }
        }
    }
    s
}

/// Threshold `tol · (max |entry| + 1)^(r+1)` below which a determinant
/// quantity counts as zero.
pub fn degeneracy_threshold(b: &Grid, tol: f64) -> f64 {
    tol * (minor_scale(b) + 1.0).powi(b.nrows() as i32)
}

/// Solves the determinant of a square minor for its bottom-right hole.
///
/// `a0` is the determinant with the hole set to 0. The hole's cofactor
/// `a1 − a0` is the determinant of the leading block, evaluated directly
/// rather than as a difference of two determinants.
pub fn solve_minor(b: &Grid, tol: f64) -> Result<MinorSolution> {
    if !b.is_square() || b.nrows() < 2 {
        return Err(invalid(format!("minor must be square with side >= 2, got {:?}", b.shape())));
    }
    let n = b.nrows();
    let mut b0 = b.clone();
    b0[(n - 1, n - 1)] = 0.0;
    let a0 = determinant(&b0);
    let cofactor = determinant(&b0.view((0, 0), (n - 1, n - 1)).into_owned());
    let threshold = degeneracy_threshold(&b0, tol);
    if !(cofactor.abs() > threshold) || !a0.is_finite() {
        return Err(CompletionError::DegenerateMinor { gap: cofactor.abs(), tol: threshold });
    }
    Ok(MinorSolution { a0, a1: a0 + cofactor, solution: -a0 / cofactor })
}

/// First-order deviation proxy of a minor's solution.
pub fn minor_weight(a0: f64, a1: f64, mode: WeightingMode) -> Result<f64> {
    let gap = (a1 - a0).abs();
    if !(gap > 0.0) || !gap.is_finite() {
        return Err(CompletionError::DegenerateMinor { gap, tol: 0.0 });
    }
    let delta = match mode {
        WeightingMode::Additive => 1.0 / gap + a0.abs() / (gap * gap),
        WeightingMode::Multiplicative => {
            if !(a0.abs() > 0.0) {
                return Err(CompletionError::DegenerateMinor { gap: a0.abs(), tol: 0.0 });
            }
            1.0 / a0.abs() + 1.0 / gap
        }
    };
    if delta.is_finite() && delta > 0.0 {
        Ok(delta)
    } else {
        Err(CompletionError::DegenerateMinor { gap, tol: 0.0 })
    }
}

/// Solves and weights one minor; `None` when it is degenerate.
pub fn evaluate_minor(
    a: &MaskedMatrix,
    minor: &MinorIndices,
    mode: WeightingMode,
    tol: f64,
) -> Option<MinorCandidate> {
    let b = minor.extract(a);
    let sol = solve_minor(&b, tol).ok()?;
    if mode == WeightingMode::Multiplicative && !(sol.a0.abs() > degeneracy_threshold(&b, tol)) {
        return None;
    }
    let delta = minor_weight(sol.a0, sol.a1, mode).ok()?;
    Some(MinorCandidate {
        row_ids: minor.rows.clone(),
        col_ids: minor.cols.clone(),
        a0: sol.a0,
        a1: sol.a1,
        solution: sol.solution,
        delta,
    })
}

/// All surviving minor candidates for `(i, j)` at a fixed rank.
pub fn minor_candidates(
    a: &MaskedMatrix,
    i: usize,
    j: usize,
    rank: usize,
    config: &ClosureConfig,
) -> Vec<MinorCandidate> {
    find_minors(a, i, j, rank, config.iterations, config.seed)
        .iter()
        .filter_map(|m| evaluate_minor(a, m, config.weighting, config.degeneracy_tol))
        .collect()
}

fn entry_at_rank(
    a: &MaskedMatrix,
    i: usize,
    j: usize,
    rank: usize,
    config: &ClosureConfig,
) -> Option<EntryEstimate> {
    let cands: Vec<Candidate> = minor_candidates(a, i, j, rank, config)
        .iter()
        .map(|c| Candidate::new(c.solution, c.delta))
        .collect();
    let value = combine_min_variance(&cands).ok()?;
    let variance_proxy = combined_proxy(&cands).ok()?;
    Some(EntryEstimate { row: i, col: j, value, variance_proxy, support: cands.len() })
}

fn entry_inner(
    a: &MaskedMatrix,
    i: usize,
    j: usize,
    config: &ClosureConfig,
    positive: bool,
) -> Option<EntryEstimate> {
    let mut rank = config.target_rank;
    loop {
        if let Some(est) = entry_at_rank(a, i, j, rank, config) {
            return Some(est);
        }
        if !config.rank_fallback || rank <= 1 {
            return None;
        }
        rank -= 1;
        if rank == 1 && positive {
            return rank1::faccro_entry_unchecked(a, i, j);
        }
    }
}

/// Estimates `(i, j)` from the minors through it.
///
/// `variance_proxy` is `(Σ 1/δ_k²)^(−1/2)` over the surviving minors. With
/// `rank_fallback`, an entry without usable minors is retried at lower
/// ranks; on positive data the rank-1 retry uses the log-space rank-1
/// estimator.
pub fn vmclosure_entry(
    a: &MaskedMatrix,
    i: usize,
    j: usize,
    config: &ClosureConfig,
) -> Result<EntryEstimate> {
    config.validate()?;
    if i >= a.rows() || j >= a.cols() {
        return Err(invalid(format!("target ({i}, {j}) outside {:?}", a.shape())));
    }
    if config.weighting == WeightingMode::Multiplicative {
        a.require_positive()?;
    }
    let positive = a.all_positive();
    entry_inner(a, i, j, config, positive).ok_or(CompletionError::Unestimable { row: i, col: j })
}

/// Completes every unobserved cell by [`vmclosure_entry`]. Cells with no
/// usable minor receive the observed mean and are flagged.
pub fn vmclosure_all(a: &MaskedMatrix, config: &ClosureConfig) -> Result<Completion> {
    config.validate()?;
    let mean = a.observed_mean().ok_or_else(|| invalid("matrix has no observed entries"))?;
    if config.weighting == WeightingMode::Multiplicative {
        a.require_positive()?;
    }
    let positive = a.all_positive();
    let holes: Vec<(usize, usize)> = a.mask().complement().positions().collect();
    let estimates = par::map_slice(&holes, |&(i, j)| entry_inner(a, i, j, config, positive));

    let mut values = a.zero_filled().clone();
    let mut fallback = Mask::new(a.rows(), a.cols(), false);
    for (&(i, j), est) in holes.iter().zip(estimates) {
        match est {
            Some(e) => values[(i, j)] = e.value,
            None => {
                values[(i, j)] = mean;
                fallback.set(i, j, true);
            }
        }
    }
    Ok(Completion { values, fallback })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn full(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> MaskedMatrix {
        MaskedMatrix::fully_observed(Grid::from_fn(rows, cols, f)).unwrap()
    }

    #[test]
    fn subset_enumeration() {
        let mut seen = Vec::new();
        for_each_subset(4, 2, |s| seen.push(s.to_vec()));
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[0], vec![0, 1]);
        assert_eq!(seen[5], vec![2, 3]);
        let mut count = 0;
        for_each_subset(3, 0, |_| count += 1);
        assert_eq!(count, 1);
        assert_eq!(binomial(5, 2), 10.0);
    }

    #[test]
    fn solve_two_by_two() {
        let b = Grid::from_row_slice(2, 2, &[2.0, 4.0, 3.0, 0.0]);
        let s = solve_minor(&b, DEFAULT_DEGENERACY_TOL).unwrap();
        assert_eq!((s.a0, s.a1, s.solution), (-12.0, -10.0, 6.0));

        let d = Grid::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let s = solve_minor(&d, DEFAULT_DEGENERACY_TOL).unwrap();
        assert_eq!((s.a0, s.a1), (0.0, 1.0));
        assert_eq!(s.solution, 0.0);
    }

    #[test]
    fn degenerate_minor_rejected() {
        let b = Grid::from_row_slice(2, 2, &[0.0, 4.0, 3.0, 0.0]);
        assert!(matches!(
            solve_minor(&b, DEFAULT_DEGENERACY_TOL),
            Err(CompletionError::DegenerateMinor { .. })
        ));
        assert!(solve_minor(&Grid::zeros(1, 1), 1e-12).is_err());
    }

    #[test]
    fn weight_spot_values() {
        assert_eq!(minor_weight(-12.0, -10.0, WeightingMode::Additive).unwrap(), 3.5);
        assert_relative_eq!(
            minor_weight(-12.0, -10.0, WeightingMode::Multiplicative).unwrap(),
            7.0 / 12.0,
            max_relative = 1e-15
        );
        assert_eq!(minor_weight(0.0, 1.0, WeightingMode::Additive).unwrap(), 1.0);
        assert!(minor_weight(3.0, 3.0, WeightingMode::Additive).is_err());
        assert!(minor_weight(0.0, 1.0, WeightingMode::Multiplicative).is_err());
    }

    #[test]
    fn additive_weight_increases_with_a0() {
        let gap = 0.7;
        let mut last = 0.0;
        for k in 0..20 {
            let a0 = k as f64 * 0.5;
            let w = minor_weight(a0, a0 + gap, WeightingMode::Additive).unwrap();
            assert!(w > last);
            last = w;
        }
    }

    #[test]
    fn all_nine_minors_of_a_full_4x4() {
        let a = full(4, 4, |i, j| 1.0 + i as f64 + (j * j) as f64);
        let minors = find_minors(&a, 3, 3, 2, 9, 1);
        assert_eq!(minors.len(), 9);
        let distinct: HashSet<_> = minors.iter().cloned().collect();
        assert_eq!(distinct.len(), 9);
        assert!(minors.iter().all(|m| m.rows[2] == 3 && m.cols[2] == 3));

        // Sampling path plus exhaustive fill still finds all nine.
        let more = find_minors(&a, 3, 3, 2, 20, 1);
        assert_eq!(more.len(), 9);
        assert_eq!(find_minors(&a, 3, 3, 2, 1, 1).len(), 1);
        assert_eq!(find_minors(&a, 3, 3, 2, 5, 7), find_minors(&a, 3, 3, 2, 5, 7));
    }

    #[test]
    fn isolated_row_has_no_minors() {
        let mut rows = vec![vec![Some(1.0); 4]; 4];
        rows[0] = vec![None, None, None, None];
        let a = MaskedMatrix::from_rows(&rows).unwrap();
        assert!(find_minors(&a, 0, 2, 1, 10, 0).is_empty());
        assert!(find_minors(&a, 0, 2, 4, 10, 0).is_empty());
    }

    #[test]
    fn single_minor_equals_its_solution() {
        let a = MaskedMatrix::from_rows(&[vec![Some(2.0), Some(4.0)], vec![Some(3.0), None]])
            .unwrap();
        let cfg = ClosureConfig { rank_fallback: false, ..ClosureConfig::new(1, WeightingMode::Additive) };
        let est = vmclosure_entry(&a, 1, 1, &cfg).unwrap();
        assert_eq!(est.support, 1);
        assert_relative_eq!(est.value, 6.0, max_relative = 1e-14);
        assert_relative_eq!(est.variance_proxy, 3.5, max_relative = 1e-14);
    }

    #[test]
    fn fallback_to_rank_one() {
        // Rank-2 minors need a 3x3 observed block; a 2x2 matrix has none.
        let a = MaskedMatrix::from_rows(&[vec![Some(3.0), Some(5.0)], vec![Some(6.0), None]])
            .unwrap();
        let strict = ClosureConfig { rank_fallback: false, ..ClosureConfig::new(2, WeightingMode::Multiplicative) };
        assert!(matches!(
            vmclosure_entry(&a, 1, 1, &strict),
            Err(CompletionError::Unestimable { row: 1, col: 1 })
        ));
        let loose = ClosureConfig::new(2, WeightingMode::Multiplicative);
        assert_relative_eq!(vmclosure_entry(&a, 1, 1, &loose).unwrap().value, 10.0, max_relative = 1e-12);
    }

    #[test]
    fn closure_all_passes_observed_through() {
        let a = full(5, 5, |i, j| 1.0 + (i + 2 * j) as f64);
        let cfg = ClosureConfig::new(2, WeightingMode::Additive);
        let done = vmclosure_all(&a, &cfg).unwrap();
        assert_eq!(&done.values, a.zero_filled());
        assert_eq!(done.fallback_count(), 0);

        let empty = MaskedMatrix::from_rows(&[vec![None, None]]).unwrap();
        assert!(vmclosure_all(&empty, &cfg).is_err());
        let bad = ClosureConfig { iterations: 0, ..cfg };
        assert!(vmclosure_all(&a, &bad).is_err());
    }
}
