//! Actions of φ-function combinations on vectors.
//!
//! The unit of work is the linear combination
//!
//! ```text
//!     sum_{k=0}^{q} h^k phi_k(h A) v_k
//! ```
//!
//! evaluated through a single exponential of the augmented matrix
//!
//! ```text
//!     At = [ hA  W ]      W = [w_q | ... | w_1],  w_k = h^k v_k,
//!          [  0  K ]      K = superdiagonal shift,
//! ```
//!
//! for which `exp(At) [v_0; e_q]` carries the combination in its top
//! block. Small operators go through the dense Padé oracle; large ones
//! through an Arnoldi exponential action with substepping, or a
//! truncated-Taylor action.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::dense::{self, DenseError};
use crate::operator::LinearOperator;

#[derive(Debug, Error)]
pub enum PhiError {
    #[error(transparent)]
    Dense(#[from] DenseError),
    #[error("dimension mismatch: operator dim {op}, vector len {vec}")]
    DimensionMismatch { op: usize, vec: usize },
    #[error("non-finite input vector")]
    NonFinite,
    #[error("step size must be non-negative, got {0}")]
    NegativeStep(f64),
    #[error(
        "Krylov action did not converge: achieved relative residual {achieved:e} \
         (target {target:e}) within dimension {max_dim} and {substeps} substeps"
    )]
    KrylovNonConvergence {
        achieved: f64,
        target: f64,
        max_dim: usize,
        substeps: usize,
    },
    #[error("Taylor action did not converge within {0} terms")]
    TaylorNonConvergence(usize),
}

/// Action backend selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    DensePade,
    KrylovArnoldi,
    TaylorAction,
}

impl std::str::FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dense" => Ok(Self::DensePade),
            "krylov" => Ok(Self::KrylovArnoldi),
            "taylor" => Ok(Self::TaylorAction),
            other => Err(format!(
                "unknown backend '{other}' (available: dense, krylov, taylor)"
            )),
        }
    }
}

/// Configured φ-action engine.
#[derive(Debug, Clone)]
pub struct PhiEvaluator {
    pub backend: Backend,
    /// Relative accuracy target for actions.
    pub tol: f64,
    pub max_krylov_dim: usize,
    /// Operators at or below this dimension always take the dense path.
    pub dense_threshold: usize,
}

impl Default for PhiEvaluator {
    fn default() -> Self {
        Self {
            backend: Backend::KrylovArnoldi,
            tol: 1e-12,
            max_krylov_dim: 64,
            dense_threshold: 512,
        }
    }
}

impl PhiEvaluator {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.tol > 0.0) {
            return Err("tol must be positive".into());
        }
        if self.max_krylov_dim < 2 {
            return Err("max_krylov_dim must be at least 2".into());
        }
        if self.dense_threshold < 1 {
            return Err("dense_threshold must be at least 1".into());
        }
        Ok(())
    }
}

/// A φ-linear combination `sum_k h^k phi_k(h op) v_k`.
pub struct PhiCombination<'a> {
    pub operator: &'a LinearOperator,
    pub h: f64,
    /// v_0, v_1, ..., v_q.
    pub vectors: Vec<DVector<f64>>,
}

/// Evaluate `sum_k h^k phi_k(h A) v_k`.
pub fn phi_combination_action(
    c: &PhiCombination,
    eval: &PhiEvaluator,
) -> Result<DVector<f64>, PhiError> {
    let n = c.operator.dim();
    if c.h < 0.0 {
        return Err(PhiError::NegativeStep(c.h));
    }
    let mut weighted = Vec::with_capacity(c.vectors.len());
    let mut hk = 1.0;
    for (k, v) in c.vectors.iter().enumerate() {
        if v.len() != n {
            return Err(PhiError::DimensionMismatch { op: n, vec: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(PhiError::NonFinite);
        }
        if k > 0 {
            hk *= c.h;
        }
        weighted.push((k, v * hk));
    }
    combo_action(c.operator, c.h, &weighted, eval)
}

/// Action of a single φ-function: `phi_p(h op) v`.
pub fn phi_action(
    op: &LinearOperator,
    h: f64,
    v: &DVector<f64>,
    p: usize,
    eval: &PhiEvaluator,
) -> Result<DVector<f64>, PhiError> {
    if v.len() != op.dim() {
        return Err(PhiError::DimensionMismatch {
            op: op.dim(),
            vec: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(PhiError::NonFinite);
    }
    combo_action(op, h, &[(p, v.clone())], eval)
}

/// Evaluate `sum phi_k(h op) w_k` for pre-weighted terms `(k, w_k)`.
///
/// This is the raw form used by the integrators: weights already carry
/// their powers of `h`, so no divisions by `h` appear anywhere.
pub(crate) fn combo_action(
    op: &LinearOperator,
    h: f64,
    terms: &[(usize, DVector<f64>)],
    eval: &PhiEvaluator,
) -> Result<DVector<f64>, PhiError> {
    let n = op.dim();
    if terms.iter().all(|(_, w)| w.iter().all(|&x| x == 0.0)) {
        return Ok(DVector::zeros(n));
    }
    let q = terms.iter().map(|&(k, _)| k).max().unwrap_or(0);

    let mut result = if eval.backend == Backend::DensePade || n <= eval.dense_threshold {
        dense_combo(op, h, terms, q)?
    } else {
        match eval.backend {
            Backend::KrylovArnoldi => iterative_combo(op, h, terms, q, eval, false)?,
            Backend::TaylorAction => iterative_combo(op, h, terms, q, eval, true)?,
            Backend::DensePade => unreachable!(),
        }
    };

    // The first row of an autonomized Jacobian is identically zero, so
    // e_1^T phi_k(hA) = e_1^T / k!. Enforcing that component exactly
    // keeps the time variable out of the iterative error budget.
    if op.is_augmented() {
        let mut t = 0.0;
        for &(k, ref w) in terms {
            t += w[0] / factorial(k);
        }
        result[0] = t;
    }
    Ok(result)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Build the augmented matrix dense and exponentiate once.
fn dense_combo(
    op: &LinearOperator,
    h: f64,
    terms: &[(usize, DVector<f64>)],
    q: usize,
) -> Result<DVector<f64>, PhiError> {
    let n = op.dim();
    if q == 0 {
        let e = dense::expm(&(op.to_dense() * h))?;
        let mut out = DVector::zeros(n);
        for &(_, ref w) in terms {
            out += &e * w;
        }
        return Ok(out);
    }
    let dim = n + q;
    let mut aug = DMatrix::<f64>::zeros(dim, dim);
    aug.view_mut((0, 0), (n, n)).copy_from(&(op.to_dense() * h));
    // column n + j holds w_{q-j}; superdiagonal shift in the tail.
    let mut w_cols = vec![DVector::zeros(n); q + 1];
    let mut v0 = DVector::zeros(n);
    for &(k, ref w) in terms {
        if k == 0 {
            v0 += w;
        } else {
            w_cols[k] += w;
        }
    }
    for j in 0..q {
        aug.view_mut((0, n + j), (n, 1)).copy_from(&w_cols[q - j]);
        if j + 1 < q {
            aug[(n + j, n + j + 1)] = 1.0;
        }
    }
    let e = dense::expm(&aug)?;
    let mut b = DVector::zeros(dim);
    b.rows_mut(0, n).copy_from(&v0);
    b[dim - 1] = 1.0;
    let full = &e * b;
    Ok(full.rows(0, n).into_owned())
}

/// Augmented-operator apply for the iterative paths.
struct AugmentedAction<'a> {
    op: &'a LinearOperator,
    h: f64,
    /// w_1..w_q by φ-index (index 0 unused).
    w_cols: Vec<DVector<f64>>,
    q: usize,
}

impl AugmentedAction<'_> {
    fn dim(&self) -> usize {
        self.op.dim() + self.q
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.op.dim();
        let top = x.rows(0, n).into_owned();
        let mut out = DVector::zeros(self.dim());
        let mut top_out = self.op.apply(&top) * self.h;
        // tail component j corresponds to φ-index q - j.
        for j in 0..self.q {
            let xj = x[n + j];
            if xj != 0.0 {
                top_out += &self.w_cols[self.q - j] * xj;
            }
            if j + 1 < self.q {
                out[n + j] = x[n + j + 1];
            }
        }
        out.rows_mut(0, n).copy_from(&top_out);
        out
    }

    fn one_norm_est(&self) -> f64 {
        let base = self.op.one_norm_est() * self.h.abs();
        let cols = self
            .w_cols
            .iter()
            .map(|w| w.iter().map(|x| x.abs()).sum::<f64>() + 1.0)
            .fold(0.0, f64::max);
        base.max(cols)
    }
}

fn iterative_combo(
    op: &LinearOperator,
    h: f64,
    terms: &[(usize, DVector<f64>)],
    q: usize,
    eval: &PhiEvaluator,
    taylor: bool,
) -> Result<DVector<f64>, PhiError> {
    let n = op.dim();
    let mut w_cols = vec![DVector::zeros(n); q + 1];
    let mut v0 = DVector::zeros(n);
    for &(k, ref w) in terms {
        if k == 0 {
            v0 += w;
        } else {
            w_cols[k] += w;
        }
    }
    let aug = AugmentedAction { op, h, w_cols, q };
    let mut b = DVector::zeros(aug.dim());
    b.rows_mut(0, n).copy_from(&v0);
    if q > 0 {
        b[aug.dim() - 1] = 1.0;
    }
    let anorm = aug.one_norm_est();
    let full = if taylor {
        taylor_exp_action(&aug, &b, anorm, eval)?
    } else {
        krylov_exp_action(&aug, &b, anorm, eval)?
    };
    Ok(full.rows(0, n).into_owned())
}

/// exp(At) b by Arnoldi projection with substepping: the step count
/// starts from the norm estimate and doubles on non-convergence.
fn krylov_exp_action(
    aug: &AugmentedAction,
    b: &DVector<f64>,
    anorm: f64,
    eval: &PhiEvaluator,
) -> Result<DVector<f64>, PhiError> {
    if b.norm() == 0.0 {
        return Ok(DVector::zeros(b.len()));
    }
    let mut substeps = ((anorm / 32.0).ceil() as usize).max(1);
    let mut last_residual = f64::INFINITY;
    loop {
        let tau = 1.0 / substeps as f64;
        let mut x = b.clone();
        let mut ok = true;
        for _ in 0..substeps {
            match arnoldi_exp_step(aug, &x, tau, eval) {
                Ok(y) => x = y,
                Err(res) => {
                    last_residual = res;
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Ok(x);
        }
        if substeps > (1 << 22) {
            return Err(PhiError::KrylovNonConvergence {
                achieved: last_residual,
                target: eval.tol,
                max_dim: eval.max_krylov_dim,
                substeps,
            });
        }
        substeps *= 2;
    }
}

/// One Arnoldi approximation of exp(tau * At) v. Returns the achieved
/// relative residual estimate on failure.
fn arnoldi_exp_step(
    aug: &AugmentedAction,
    v: &DVector<f64>,
    tau: f64,
    eval: &PhiEvaluator,
) -> Result<DVector<f64>, f64> {
    let n = aug.dim();
    let beta = v.norm();
    if beta == 0.0 {
        return Ok(DVector::zeros(n));
    }
    let max_m = eval.max_krylov_dim.min(n);
    let mut basis: Vec<DVector<f64>> = vec![v / beta];
    let mut hess = DMatrix::<f64>::zeros(max_m + 1, max_m);
    let mut best_res = f64::INFINITY;
    let breakdown_scale = aug.one_norm_est().max(1.0);

    for m in 1..=max_m {
        let mut w = aug.apply(&basis[m - 1]);
        // two-pass modified Gram-Schmidt
        for _ in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let c = q.dot(&w);
                hess[(i, m - 1)] += c;
                w -= q * c;
            }
        }
        let hnext = w.norm();
        hess[(m, m - 1)] = hnext;

        let happy = hnext <= 1e-14 * breakdown_scale;
        if happy || m == max_m || m >= 2 {
            let hm = hess.view((0, 0), (m, m)).into_owned() * tau;
            // exp of [hm e1; 0 0] yields exp(hm) and phi1(hm) e1 at once.
            let mut small = DMatrix::<f64>::zeros(m + 1, m + 1);
            small.view_mut((0, 0), (m, m)).copy_from(&hm);
            small[(0, m)] = tau;
            let es = dense::expm(&small).map_err(|_| f64::INFINITY)?;
            let ynorm = beta * es.view((0, 0), (m, 1)).norm();
            let residual = beta * hnext * es[(m - 1, m)].abs();
            best_res = residual / ynorm.max(f64::MIN_POSITIVE);
            if happy || best_res <= eval.tol {
                let mut y = DVector::zeros(n);
                for (i, q) in basis.iter().enumerate() {
                    y += q * (beta * es[(i, 0)]);
                }
                return Ok(y);
            }
        }
        if hnext == 0.0 {
            break;
        }
        basis.push(w / hnext);
    }
    Err(best_res)
}

/// exp(At) b by a scaled truncated Taylor series.
fn taylor_exp_action(
    aug: &AugmentedAction,
    b: &DVector<f64>,
    anorm: f64,
    eval: &PhiEvaluator,
) -> Result<DVector<f64>, PhiError> {
    if b.norm() == 0.0 {
        return Ok(DVector::zeros(b.len()));
    }
    let substeps = (anorm.ceil() as usize).max(1);
    let tau = 1.0 / substeps as f64;
    const MAX_TERMS: usize = 200;
    let mut x = b.clone();
    for _ in 0..substeps {
        let mut sum = x.clone();
        let mut term = x.clone();
        let mut converged = false;
        for k in 1..=MAX_TERMS {
            term = aug.apply(&term) * (tau / k as f64);
            sum += &term;
            if term.norm() <= 0.25 * eval.tol * sum.norm() {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(PhiError::TaylorNonConvergence(MAX_TERMS));
        }
        x = sum;
    }
    Ok(x)
}
