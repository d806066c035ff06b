//! Dense kernels shared by the solvers.
//!
//! Matrix-vector products run row by row with a fixed summation order, so the
//! result is bitwise identical whether or not rows are spread over a rayon
//! pool. Parallelism only kicks in when the current pool has more than one
//! worker.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instrument;

const PAR_MIN_ROWS: usize = 256;

fn parallel_enabled(rows: usize) -> bool {
    rows >= PAR_MIN_ROWS && rayon::current_num_threads() > 1
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four independent accumulators; order is fixed so results are reproducible.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in 4 * chunks..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `out = m · v` for a row-major dense matrix.
pub fn matvec_into(m: ArrayView2<f64>, v: ArrayView1<f64>, out: &mut [f64]) {
    debug_assert_eq!(m.ncols(), v.len());
    debug_assert_eq!(m.nrows(), out.len());
    let vs = v.as_slice().map(std::borrow::Cow::Borrowed).unwrap_or_else(|| v.to_vec().into());
    match m.as_slice() {
        Some(data) => {
            let n = m.ncols();
            if parallel_enabled(out.len()) {
                out.par_iter_mut()
                    .zip(data.par_chunks(n.max(1)))
                    .for_each(|(o, row)| *o = dot(row, &vs));
            } else {
                for (o, row) in out.iter_mut().zip(data.chunks(n.max(1))) {
                    *o = dot(row, &vs);
                }
            }
        }
        None => {
            for (o, row) in out.iter_mut().zip(m.axis_iter(Axis(0))) {
                *o = row.iter().zip(vs.iter()).map(|(a, b)| a * b).sum();
            }
        }
    }
}

pub fn matvec(m: ArrayView2<f64>, v: ArrayView1<f64>) -> Array1<f64> {
    let mut out = vec![0.0; m.nrows()];
    matvec_into(m, v, &mut out);
    Array1::from(out)
}

/// `out += wᵀ · m`, i.e. `out[j] += Σ_i w[i] m[i, j]`. Rows with zero weight
/// are skipped.
pub fn add_vecmat(out: &mut [f64], w: ArrayView1<f64>, m: ArrayView2<f64>) {
    debug_assert_eq!(m.nrows(), w.len());
    debug_assert_eq!(m.ncols(), out.len());
    let n = m.ncols();
    let data = m.as_slice().expect("row-major matrix");
    if parallel_enabled(n) {
        let chunk = n.div_ceil(rayon::current_num_threads()).max(64);
        out.par_chunks_mut(chunk).enumerate().for_each(|(c, seg)| {
            let lo = c * chunk;
            for (i, &wi) in w.iter().enumerate() {
                if wi != 0.0 {
                    let row = &data[i * n + lo..i * n + lo + seg.len()];
                    for (o, &t) in seg.iter_mut().zip(row) {
                        *o += wi * t;
                    }
                }
            }
        });
    } else {
        for (i, &wi) in w.iter().enumerate() {
            if wi != 0.0 {
                let row = &data[i * n..(i + 1) * n];
                for (o, &t) in out.iter_mut().zip(row) {
                    *o += wi * t;
                }
            }
        }
    }
}

pub fn sup_norm(v: ArrayView1<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_abs_diff(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Max-shifted `log Σ exp(xs)`.
pub fn log_sum_exp<'a>(xs: impl IntoIterator<Item = &'a f64> + Clone) -> f64 {
    let m = xs.clone().into_iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.into_iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Row-major ndarray matrix into a column-major nalgebra matrix.
pub(crate) fn to_nalgebra(m: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]])
}

/// LU factorization with partial pivoting, computed once and reused for
/// many right-hand sides.
#[derive(Debug, Clone)]
pub struct LuFactors {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
}

impl LuFactors {
    pub fn factor(m: &Array2<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                what: "LU factorization (square matrix)",
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        instrument::record_factorization();
        let lu = to_nalgebra(m).lu();
        if !lu.is_invertible() {
            return Err(Error::SingularMatrix);
        }
        // Exact-zero pivots are caught above; near-singular ones show up as
        // non-finite or huge reciprocals.
        let u = lu.u();
        let max_pivot = u.diagonal().iter().fold(0.0f64, |m, p| m.max(p.abs()));
        let min_pivot = u.diagonal().iter().fold(f64::INFINITY, |m, p| m.min(p.abs()));
        if !(min_pivot > max_pivot * 1e-14) {
            return Err(Error::SingularMatrix);
        }
        Ok(Self { lu, n: m.nrows() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: ArrayView1<f64>) -> Result<Array1<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                what: "LU solve right-hand side",
                expected: self.n,
                found: b.len(),
            });
        }
        let rhs = DVector::from_iterator(self.n, b.iter().copied());
        let x = self.lu.solve(&rhs).ok_or(Error::SingularMatrix)?;
        Ok(Array1::from_iter(x.iter().copied()))
    }

    /// Materialized inverse.
    pub fn inverse(&self) -> Result<Array2<f64>> {
        let inv = self.lu.try_inverse().ok_or(Error::SingularMatrix)?;
        Ok(Array2::from_shape_fn((self.n, self.n), |(i, j)| inv[(i, j)]))
    }
}
