#![allow(dead_code)]

use circuit_completion::simgen::{draw, NoiseKind, SimConfig, SimDraw};
use circuit_completion::{Grid, Mask, MaskedMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn config(n: usize, rank: usize, p: f64, eps: f64, kind: NoiseKind, seed: u64) -> SimConfig {
    SimConfig {
        rows: n,
        cols: n,
        rank,
        observe_prob: p,
        noise_level: eps,
        noise_kind: kind,
        seed,
    }
}

pub fn sim(n: usize, rank: usize, p: f64, eps: f64, kind: NoiseKind, seed: u64) -> SimDraw {
    draw(&config(n, rank, p, eps, kind, seed)).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// |z|-entried factors, product of rank `r`.
pub fn low_rank(rng: &mut ChaCha8Rng, m: usize, n: usize, r: usize) -> Grid {
    let u = Grid::from_fn(m, r, |_, _| gauss(rng).abs());
    let v = Grid::from_fn(n, r, |_, _| gauss(rng).abs());
    &u * v.transpose()
}

pub fn with_hole(g: &Grid, i: usize, j: usize) -> MaskedMatrix {
    let mask = Mask::from_fn(g.nrows(), g.ncols(), |a, b| (a, b) != (i, j));
    MaskedMatrix::new(g.clone(), mask).unwrap()
}

pub fn max_rel_err(truth: &Grid, est: &Grid, cells: impl Iterator<Item = (usize, usize)>) -> f64 {
    cells
        .map(|(i, j)| ((est[(i, j)] - truth[(i, j)]) / truth[(i, j)]).abs())
        .fold(0.0, f64::max)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut end = k;
        while end + 1 < idx.len() && v[idx[end + 1]] == v[idx[k]] {
            end += 1;
        }
        let avg = (k + end) as f64 / 2.0 + 1.0;
        for &p in &idx[k..=end] {
            out[p] = avg;
        }
        k = end + 1;
    }
    out
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

pub fn fraction(hits: usize, total: usize) -> f64 {
    hits as f64 / total as f64
}
