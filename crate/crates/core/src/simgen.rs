//! Synthetic positive low-rank matrices with multiplicative or additive
//! noise and Bernoulli observation masks.
//!
//! Values come from one ChaCha8 stream keyed by the config seed, drawn
//! sequentially: `U` row-major, then `V` row-major, then one noise variate
//! per cell (row-major). The mask uses a second stream keyed by the same
//! seed, one Bernoulli variate per cell (row-major). Changing `m`, `n` or
//! `r` therefore changes every later variate.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::matrix::{Grid, Mask, MaskedMatrix};
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// `A = (U Vᵀ) ∘ exp(ε Z)`
    Multiplicative,
    /// `A = U Vᵀ + ε |Z|`
    Additive,
}

impl std::str::FromStr for NoiseKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "multiplicative" | "mult" => Ok(NoiseKind::Multiplicative),
            "additive" | "add" => Ok(NoiseKind::Additive),
            other => Err(format!("unknown noise kind `{other}`")),
        }
    }
}

impl std::fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NoiseKind::Multiplicative => "multiplicative",
            NoiseKind::Additive => "additive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub observe_prob: f64,
    pub noise_level: f64,
    pub noise_kind: NoiseKind,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(invalid("matrix dimensions must be positive"));
        }
        if self.rank == 0 || self.rank > self.rows.min(self.cols) {
            return Err(invalid(format!(
                "rank {} must lie in 1..={}",
                self.rank,
                self.rows.min(self.cols)
            )));
        }
        if !(self.observe_prob > 0.0 && self.observe_prob <= 1.0) {
            return Err(invalid(format!("observe_prob {} not in (0, 1]", self.observe_prob)));
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return Err(invalid(format!("noise level {} must be >= 0", self.noise_level)));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        SimConfig { seed, ..self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimDraw {
    /// Noise-free `U Vᵀ`.
    pub truth: Grid,
    pub observed: MaskedMatrix,
    pub config: SimConfig,
}

impl SimDraw {
    /// Cells hidden by the mask: the usual evaluation set.
    pub fn missing(&self) -> Mask {
        self.observed.mask().complement()
    }
}

pub fn draw(config: &SimConfig) -> Result<SimDraw> {
    config.validate()?;
    let SimConfig { rows: m, cols: n, rank: r, observe_prob: p, noise_level: eps, .. } = *config;
    let mut rng = rng_for(config.seed, &[]);
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };

    let u = Grid::from_row_iterator(m, r, (0..m * r).map(|_| gauss().abs()).collect::<Vec<_>>());
    let v = Grid::from_row_iterator(n, r, (0..n * r).map(|_| gauss().abs()).collect::<Vec<_>>());
    let truth = &u * v.transpose();

    let noise: Vec<f64> = (0..m * n).map(|_| gauss()).collect();
    let noisy = Grid::from_fn(m, n, |i, j| {
        let z = noise[i * n + j];
        match config.noise_kind {
            NoiseKind::Multiplicative => truth[(i, j)] * (eps * z).exp(),
            NoiseKind::Additive => truth[(i, j)] + eps * z.abs(),
        }
    });

    let mut rng = rng_for(config.seed, &[0x3A5C]);
    let bits: Vec<bool> = (0..m * n).map(|_| rng.random_bool(p)).collect();
    let mask = Mask::from_row_major(m, n, bits)?;
    let observed = MaskedMatrix::new(noisy, mask)?;
    Ok(SimDraw { truth, observed, config: *config })
}

/// Hides `count` observed cells chosen uniformly without replacement.
/// Returns the reduced matrix and the mask of hidden cells.
pub fn delete_entries(
    matrix: &MaskedMatrix,
    count: usize,
    seed: u64,
) -> Result<(MaskedMatrix, Mask)> {
    let observed: Vec<(usize, usize)> = matrix.mask().positions().collect();
    if count > observed.len() {
        return Err(invalid(format!(
            "cannot delete {count} entries; only {} are observed",
            observed.len()
        )));
    }
    let mut rng = rng_for(seed, &[0xDE1E7E]);
    let mut deleted = Mask::new(matrix.rows(), matrix.cols(), false);
    for k in index::sample(&mut rng, observed.len(), count) {
        let (i, j) = observed[k];
        deleted.set(i, j, true);
    }
    let reduced = matrix.hide(&deleted)?;
    Ok((reduced, deleted))
}
