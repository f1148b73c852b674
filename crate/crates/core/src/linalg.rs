//! Dense matrices and the small linear-algebra kernels the codes need.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Row-major dense matrix; `data[r * cols + c]` is entry `(r, c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub layout: Layout,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    RowMajor,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, layout: Layout::RowMajor, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self { rows: rows.len(), cols, layout: Layout::RowMajor, data: rows.iter().flatten().copied().collect() }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_well_formed(&self) -> bool {
        self.data.len() == self.rows * self.cols && self.data.iter().all(|v| v.is_finite())
    }
}

/// Outcome of solving `c · M = 1` for a decoding row vector.
#[derive(Debug, Clone)]
pub struct DecodeSolution {
    pub coefficients: Vec<f64>,
    /// `|| c · M - 1 ||_inf`
    pub residual: f64,
}

/// Minimum-norm least-squares solution of `c · M = target` where `M` has the
/// given rows. Returns the residual alongside; the caller judges it.
pub fn solve_row_combination(rows: &[&[f64]], target: &[f64]) -> DecodeSolution {
    let f = rows.len();
    let q = target.len();
    // M^T c^T = target^T, M^T is q x f
    let mt = DMatrix::from_fn(q, f, |r, c| rows[c][r]);
    let b = DVector::from_column_slice(target);
    // thin QR first: SVD straight on tall rank-deficient inputs is unreliable
    let (qm, r) = if q >= f {
        let qr = mt.clone().qr();
        (qr.q(), qr.r())
    } else {
        (DMatrix::identity(q, q), mt.clone())
    };
    let rhs = qm.transpose() * &b;
    // min-norm solution of R c = rhs through the eigen-decomposition of RᵀR
    let eig = (r.transpose() * &r).symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let cutoff = lmax * 1e-20 * (q.max(f) as f64);
    let pinv_solve = |v: &DVector<f64>| -> DVector<f64> {
        let proj = eig.eigenvectors.transpose() * (r.transpose() * v);
        let scaled = DVector::from_fn(f, |i, _| {
            let l = eig.eigenvalues[i];
            if l > cutoff {
                proj[i] / l
            } else {
                0.0
            }
        });
        &eig.eigenvectors * scaled
    };
    let mut c = pinv_solve(&rhs);
    // one refinement step recovers the accuracy lost to squaring
    let correction = pinv_solve(&(&rhs - &r * &c));
    c += correction;
    let coefficients: Vec<f64> = c.iter().copied().collect();
    let c = DVector::from_column_slice(&coefficients);
    let residual = (&mt * c - b).amax();
    DecodeSolution { coefficients, residual }
}

/// Orthonormal basis (as columns) of the null space of `m`.
pub fn null_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let cols = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(cols, cols);
    }
    // pad to at least square so the SVD returns a full V
    let padded = if m.nrows() < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = smax.max(1.0) * 1e-10;
    let null_rows: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] <= tol).collect();
    let mut basis = DMatrix::zeros(cols, null_rows.len());
    for (out, &r) in null_rows.iter().enumerate() {
        for c in 0..cols {
            basis[(c, out)] = v_t[(r, c)];
        }
    }
    basis
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `||a - b|| / ||b||`, or the absolute distance when `b` is zero.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let nb = norm2(b);
    let nd = norm2(&diff);
    if nb == 0.0 {
        nd
    } else {
        nd / nb
    }
}
