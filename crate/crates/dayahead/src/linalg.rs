//! Small dense linear-algebra kernels used by the network and the baselines.
//!
//! Everything here is plain row-major `f64` with sequential inner loops so the
//! compiler can vectorize them. Matrices stay small (a few hundred rows), so a
//! full BLAS dependency would buy nothing.

use serde::{Deserialize, Serialize};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// `out = m * x` for a row-major matrix and a dense vector.
pub fn matvec(m: &Mat, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.cols, x.len());
    debug_assert_eq!(m.rows, out.len());
    for (o, row) in out.iter_mut().zip(m.data.chunks_exact(m.cols)) {
        *o = row.iter().zip(x).map(|(w, v)| w * v).sum();
    }
}

/// `out = mᵀ * v`, accumulated row-by-row so memory access stays sequential.
pub fn tmatvec(m: &Mat, v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.rows, v.len());
    debug_assert_eq!(m.cols, out.len());
    out.iter_mut().for_each(|o| *o = 0.0);
    for (vr, row) in v.iter().zip(m.data.chunks_exact(m.cols)) {
        if *vr == 0.0 {
            continue;
        }
        for (o, w) in out.iter_mut().zip(row) {
            *o += vr * w;
        }
    }
}

/// Rank-one update `m += u * vᵀ`.
pub fn outer_acc(m: &mut Mat, u: &[f64], v: &[f64]) {
    debug_assert_eq!(m.rows, u.len());
    debug_assert_eq!(m.cols, v.len());
    let cols = m.cols;
    for (ur, row) in u.iter().zip(m.data.chunks_exact_mut(cols)) {
        if *ur == 0.0 {
            continue;
        }
        for (w, vc) in row.iter_mut().zip(v) {
            *w += ur * vc;
        }
    }
}

/// Solve the symmetric positive-definite system `a x = b` by Cholesky
/// factorization. Returns `None` when the matrix is not (numerically) SPD.
pub fn cholesky_solve(a: &Mat, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows;
    assert_eq!(a.cols, n);
    assert_eq!(b.len(), n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    // forward then backward substitution
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

/// Ordinary least squares `min ‖y − X β‖²` via the normal equations with a
/// small ridge jitter retry when the Gram matrix is near-singular.
pub fn least_squares(x: &Mat, y: &[f64]) -> Option<Vec<f64>> {
    let n = x.rows;
    let p = x.cols;
    assert_eq!(y.len(), n);
    let mut gram = Mat::zeros(p, p);
    let mut xty = vec![0.0; p];
    for r in 0..n {
        let row = x.row(r);
        outer_acc(&mut gram, row, row);
        for (acc, v) in xty.iter_mut().zip(row) {
            *acc += v * y[r];
        }
    }
    if let Some(beta) = cholesky_solve(&gram, &xty) {
        return Some(beta);
    }
    // jitter the diagonal once; callers treat None as a hard failure
    let scale = (0..p).map(|i| gram.get(i, i)).fold(0.0_f64, f64::max);
    for i in 0..p {
        let v = gram.get(i, i) + scale.max(1.0) * 1e-10;
        gram.set(i, i, v);
    }
    cholesky_solve(&gram, &xty)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance (divisor n).
pub fn population_variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Empirical quantile with linear interpolation between order statistics
/// (the "type 7" rule). `sorted` must be ascending and nonempty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&q));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}
