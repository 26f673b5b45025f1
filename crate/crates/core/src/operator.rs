//! Linear operators used for Jacobians and semidiscrete PDE matrices.
//!
//! Operators are apply-oriented: Krylov backends only ever need
//! matrix-vector products, and only the dense fallback materializes the
//! full matrix.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("CSR structure invalid: {0}")]
    InvalidCsr(String),
    #[error("dimension mismatch: operator dim {op}, vector len {vec}")]
    DimensionMismatch { op: usize, vec: usize },
}

/// Square sparse matrix in compressed-sparse-row form with sorted
/// column indices.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(
        dim: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        vals: Vec<f64>,
    ) -> Result<Self, OperatorError> {
        if row_ptr.len() != dim + 1 {
            return Err(OperatorError::InvalidCsr(format!(
                "row_ptr length {} != dim + 1 = {}",
                row_ptr.len(),
                dim + 1
            )));
        }
        if row_ptr[0] != 0 || *row_ptr.last().unwrap() != vals.len() || col_idx.len() != vals.len()
        {
            return Err(OperatorError::InvalidCsr("row_ptr endpoints".into()));
        }
        for r in 0..dim {
            if row_ptr[r] > row_ptr[r + 1] {
                return Err(OperatorError::InvalidCsr(format!(
                    "row_ptr not monotone at row {r}"
                )));
            }
            let cols = &col_idx[row_ptr[r]..row_ptr[r + 1]];
            if !cols.windows(2).all(|w| w[0] < w[1]) {
                return Err(OperatorError::InvalidCsr(format!(
                    "columns not strictly sorted in row {r}"
                )));
            }
            if cols.iter().any(|&c| c >= dim) {
                return Err(OperatorError::InvalidCsr(format!(
                    "column index out of range in row {r}"
                )));
            }
        }
        Ok(Self {
            dim,
            row_ptr,
            col_idx,
            vals,
        })
    }

    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<_> = triplets.to_vec();
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(sorted.len());
        let mut vals: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &sorted {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            dim,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for r in 0..self.dim {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * v[self.col_idx[k]];
            }
            out[r] = acc;
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.col_idx[k])] = self.vals[k];
            }
        }
        m
    }

    /// Exact 1-norm (maximum absolute column sum).
    pub fn one_norm(&self) -> f64 {
        let mut col_sums = vec![0.0f64; self.dim];
        for (k, &c) in self.col_idx.iter().enumerate() {
            col_sums[c] += self.vals[k].abs();
        }
        col_sums.into_iter().fold(0.0, f64::max)
    }

    pub fn entry(&self, r: usize, c: usize) -> f64 {
        let cols = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        match cols.binary_search(&c) {
            Ok(k) => self.vals[self.row_ptr[r] + k],
            Err(_) => 0.0,
        }
    }

    pub fn scaled(&self, factor: f64) -> CsrMatrix {
        let mut out = self.clone();
        for v in &mut out.vals {
            *v *= factor;
        }
        out
    }
}

type ApplyFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Real linear map with an apply-to-vector interface.
#[derive(Clone)]
pub enum LinearOperator {
    Dense(DMatrix<f64>),
    Sparse(Arc<CsrMatrix>),
    /// `base + diag(d)`; the Jacobian of a semilinear system.
    DiagonalShifted {
        base: Box<LinearOperator>,
        diag: DVector<f64>,
    },
    /// Block Jacobian of an autonomized system acting on `[t; u]`:
    /// first row identically zero, first column `dt_coupling`.
    Augmented {
        dt_coupling: DVector<f64>,
        inner: Box<LinearOperator>,
    },
    MatrixFree {
        dim: usize,
        apply: ApplyFn,
    },
}

impl std::fmt::Debug for LinearOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Dense(m) => write!(f, "Dense({}x{})", m.nrows(), m.ncols()),
            Self::Sparse(m) => write!(f, "Sparse({})", m.dim()),
            Self::DiagonalShifted { base, .. } => write!(f, "DiagonalShifted({base:?})"),
            Self::Augmented { inner, .. } => write!(f, "Augmented({inner:?})"),
            Self::MatrixFree { dim, .. } => write!(f, "MatrixFree({dim})"),
        }
    }
}

impl LinearOperator {
    pub fn dense(m: DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "operator matrix must be square");
        Self::Dense(m)
    }

    pub fn sparse(m: CsrMatrix) -> Self {
        Self::Sparse(Arc::new(m))
    }

    pub fn matrix_free<F>(dim: usize, apply: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        Self::MatrixFree {
            dim,
            apply: Arc::new(apply),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Dense(m) => m.nrows(),
            Self::Sparse(m) => m.dim(),
            Self::DiagonalShifted { base, .. } => base.dim(),
            Self::Augmented { inner, .. } => inner.dim() + 1,
            Self::MatrixFree { dim, .. } => *dim,
        }
    }

    pub fn is_augmented(&self) -> bool {
        matches!(self, Self::Augmented { .. })
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(v.len(), self.dim());
        match self {
            Self::Dense(m) => m * v,
            Self::Sparse(m) => m.apply(v),
            Self::DiagonalShifted { base, diag } => {
                let mut out = base.apply(v);
                for i in 0..out.len() {
                    out[i] += diag[i] * v[i];
                }
                out
            }
            Self::Augmented { dt_coupling, inner } => {
                let u = DVector::from_iterator(inner.dim(), v.iter().skip(1).copied());
                let inner_part = inner.apply(&u);
                let t = v[0];
                let mut out = DVector::zeros(v.len());
                for i in 0..inner.dim() {
                    out[i + 1] = dt_coupling[i] * t + inner_part[i];
                }
                out
            }
            Self::MatrixFree { apply, .. } => apply(v),
        }
    }

    /// Upper estimate of the 1-norm; exact for dense and CSR, a cheap
    /// bound for composites, a two-pass power estimate for matrix-free.
    pub fn one_norm_est(&self) -> f64 {
        match self {
            Self::Dense(m) => (0..m.ncols())
                .map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>())
                .fold(0.0, f64::max),
            Self::Sparse(m) => m.one_norm(),
            Self::DiagonalShifted { base, diag } => {
                base.one_norm_est() + diag.iter().fold(0.0f64, |a, x| a.max(x.abs()))
            }
            Self::Augmented { dt_coupling, inner } => inner
                .one_norm_est()
                .max(dt_coupling.iter().map(|x| x.abs()).sum::<f64>()),
            Self::MatrixFree { dim, apply } => {
                // Higham-style estimate: one forward pass on the
                // uniform vector, one on the sign pattern of A^T-ish
                // information is unavailable, so settle for ||A v||_1
                // over two probes.
                let n = *dim;
                if n == 0 {
                    return 0.0;
                }
                let ones = DVector::from_element(n, 1.0 / n as f64);
                let w = apply(&ones);
                let est1 = w.iter().map(|x| x.abs()).sum::<f64>();
                let signs = DVector::from_fn(n, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
                let w2 = apply(&signs);
                let est2 = w2.iter().fold(0.0f64, |a, x| a.max(x.abs()));
                est1.max(est2)
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Self::Dense(m) => m.clone(),
            Self::Sparse(m) => m.to_dense(),
            Self::DiagonalShifted { base, diag } => {
                let mut m = base.to_dense();
                for i in 0..diag.len() {
                    m[(i, i)] += diag[i];
                }
                m
            }
            Self::Augmented { dt_coupling, inner } => {
                let n = inner.dim();
                let mut m = DMatrix::zeros(n + 1, n + 1);
                m.view_mut((1, 1), (n, n)).copy_from(&inner.to_dense());
                for i in 0..n {
                    m[(i + 1, 0)] = dt_coupling[i];
                }
                m
            }
            Self::MatrixFree { dim, apply } => {
                let n = *dim;
                let mut m = DMatrix::zeros(n, n);
                for j in 0..n {
                    let mut e = DVector::zeros(n);
                    e[j] = 1.0;
                    m.set_column(j, &apply(&e));
                }
                m
            }
        }
    }

    /// Operator scaled by a constant factor.
    pub fn scaled(&self, factor: f64) -> LinearOperator {
        match self {
            Self::Dense(m) => Self::Dense(m * factor),
            Self::Sparse(m) => Self::Sparse(Arc::new(m.scaled(factor))),
            Self::DiagonalShifted { base, diag } => Self::DiagonalShifted {
                base: Box::new(base.scaled(factor)),
                diag: diag * factor,
            },
            Self::Augmented { dt_coupling, inner } => Self::Augmented {
                dt_coupling: dt_coupling * factor,
                inner: Box::new(inner.scaled(factor)),
            },
            Self::MatrixFree { dim, apply } => {
                let inner = apply.clone();
                Self::MatrixFree {
                    dim: *dim,
                    apply: Arc::new(move |v| inner(v) * factor),
                }
            }
        }
    }
}
