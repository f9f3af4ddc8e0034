//! Small dense linear-algebra helpers: LU determinants, truncated
//! pseudoinverses and SVD views. Decompositions come from `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::matrix::Grid;

/// Relative cutoff below which singular values are treated as zero.
pub const PINV_RTOL: f64 = 1e-10;

/// Determinant by LU factorization with partial pivoting.
pub fn determinant(a: &Grid) -> f64 {
    assert!(a.is_square(), "determinant of a non-square matrix");
    let n = a.nrows();
    let mut lu = a.clone();
    let mut det = 1.0;
    for k in 0..n {
        let (p, pivot) = (k..n)
            .map(|i| (i, lu[(i, k)].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot == 0.0 {
            return 0.0;
        }
        if p != k {
            lu.swap_rows(p, k);
            det = -det;
        }
        let d = lu[(k, k)];
        det *= d;
        for i in k + 1..n {
            let f = lu[(i, k)] / d;
            if f != 0.0 {
                for j in k + 1..n {
                    lu[(i, j)] -= f * lu[(k, j)];
                }
            }
        }
    }
    det
}

/// Moore-Penrose pseudoinverse via SVD; singular values below
/// `PINV_RTOL · σ₁` are dropped. Also returns the numerical rank.
pub fn pinv(a: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return (DMatrix::zeros(n, m), 0);
    }
    let svd = a.clone().svd(true, true);
    let (u, vt) = (svd.u.as_ref().unwrap(), svd.v_t.as_ref().unwrap());
    let s = &svd.singular_values;
    let cutoff = PINV_RTOL * s.max();
    let mut out = DMatrix::zeros(n, m);
    let mut rank = 0;
    for k in 0..s.len() {
        if s[k] > cutoff && s[k] > 0.0 {
            rank += 1;
            out += (vt.row(k).transpose() / s[k]) * u.column(k).transpose();
        }
    }
    (out, rank)
}

/// Minimum-norm least-squares solution of `a x ≈ b` with the same
/// truncation rule as [`pinv`]. Returns the solution and numerical rank.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, usize) {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return (DVector::zeros(n), 0);
    }
    let svd = a.clone().svd(true, true);
    let (u, vt) = (svd.u.as_ref().unwrap(), svd.v_t.as_ref().unwrap());
    let s = &svd.singular_values;
    let cutoff = PINV_RTOL * s.max();
    let mut x = DVector::zeros(n);
    let mut rank = 0;
    for k in 0..s.len() {
        if s[k] > cutoff && s[k] > 0.0 {
            rank += 1;
            let coef = u.column(k).dot(b) / s[k];
            x += vt.row(k).transpose() * coef;
        }
    }
    (x, rank)
}

/// Singular values in nonincreasing order.
pub fn singular_values(a: &Grid) -> Vec<f64> {
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Thin SVD with factors sorted by nonincreasing singular value.
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    /// Right singular vectors as columns (n × k).
    pub v: DMatrix<f64>,
}

pub fn sorted_svd(a: &Grid) -> SortedSvd {
    let svd = a.clone().svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&x, &y| s[y].total_cmp(&s[x]));
    let u = DMatrix::from_fn(u.nrows(), order.len(), |i, k| u[(i, order[k])]);
    let v = DMatrix::from_fn(vt.ncols(), order.len(), |j, k| vt[(order[k], j)]);
    let s = order.iter().map(|&k| s[k]).collect();
    SortedSvd { u, s, v }
}

/// Best rank-`r` approximation.
pub fn truncate_rank(a: &Grid, r: usize) -> Grid {
    let svd = sorted_svd(a);
    let r = r.min(svd.s.len());
    let mut out = Grid::zeros(a.nrows(), a.ncols());
    for k in 0..r {
        out += svd.u.column(k) * (svd.v.column(k).transpose() * svd.s[k]);
    }
    out
}
