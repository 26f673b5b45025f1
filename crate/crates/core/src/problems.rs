//! Built-in test problems.
//!
//! The main benchmark is the 2D semilinear reaction-diffusion equation
//!
//! ```text
//!     u_t - Lap u = 1/(1 + u^2) + s(x, y, t)      on (0,1)^2,
//! ```
//!
//! with homogeneous Dirichlet boundaries, semidiscretized by 5-point
//! central finite differences. The source is manufactured so that
//! u(x, y, t) = x(1-x) y(1-y) e^t solves the PDE exactly. Small
//! analytic systems (scalar Riccati, diagonal decay) serve as oracles
//! for order measurements.

use std::sync::Arc;

use nalgebra::DVector;
use thiserror::Error;

use crate::model::{ModelError, NonlinearSystem, TimeSemilinearSplit, SemilinearSplit};
use crate::operator::{CsrMatrix, LinearOperator};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("grid must have at least 2 interior points per dimension, got {0}")]
    GridTooSmall(usize),
    #[error("spectrum entries must be negative, got {0}")]
    NonNegativeSpectrum(f64),
    #[error("unknown problem '{0}' (available: ho, riccati, linear-decay)")]
    UnknownProblem(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type ExactFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// A registered problem: the system, its initial state, and an exact
/// solution evaluator when one is known.
pub struct Problem {
    pub name: String,
    pub system: NonlinearSystem,
    pub u0: DVector<f64>,
    pub exact: Option<ExactFn>,
}

/// Unit-square interior grid with lexicographic ordering (x fastest).
#[derive(Debug, Clone, Copy)]
pub struct Grid2D {
    pub m: usize,
}

impl Grid2D {
    pub fn new(m: usize) -> Result<Self, ProblemError> {
        if m < 2 {
            return Err(ProblemError::GridTooSmall(m));
        }
        Ok(Self { m })
    }

    pub fn dx(&self) -> f64 {
        1.0 / (self.m + 1) as f64
    }

    pub fn unknowns(&self) -> usize {
        self.m * self.m
    }

    /// Node coordinates for the lexicographic index.
    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let i = idx % self.m + 1;
        let j = idx / self.m + 1;
        (i as f64 * self.dx(), j as f64 * self.dx())
    }
}

/// 5-point discrete Laplacian on the interior of the unit square with
/// homogeneous Dirichlet boundaries; symmetric negative definite.
pub fn laplacian_2d(m: usize) -> Result<CsrMatrix, ProblemError> {
    let grid = Grid2D::new(m)?;
    let scale = 1.0 / (grid.dx() * grid.dx());
    let mut triplets = Vec::with_capacity(5 * m * m);
    for j in 0..m {
        for i in 0..m {
            let idx = j * m + i;
            triplets.push((idx, idx, -4.0 * scale));
            if i > 0 {
                triplets.push((idx, idx - 1, scale));
            }
            if i + 1 < m {
                triplets.push((idx, idx + 1, scale));
            }
            if j > 0 {
                triplets.push((idx, idx - m, scale));
            }
            if j + 1 < m {
                triplets.push((idx, idx + m, scale));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(m * m, &triplets))
}

fn bubble(x: f64) -> f64 {
    x * (1.0 - x)
}

/// Closed-form manufactured solution at one node.
fn ho_exact_node(x: f64, y: f64, t: f64) -> f64 {
    bubble(x) * bubble(y) * t.exp()
}

/// Manufactured source: s = u_t - Lap u - 1/(1 + u^2) for the closed form.
fn ho_source_node(x: f64, y: f64, t: f64) -> f64 {
    let p = bubble(x) * bubble(y);
    let q = bubble(x) + bubble(y);
    let u = p * t.exp();
    p * t.exp() + 2.0 * t.exp() * q - 1.0 / (1.0 + u * u)
}

/// Time derivative of the source at one node.
fn ho_source_dt_node(x: f64, y: f64, t: f64) -> f64 {
    let p = bubble(x) * bubble(y);
    let q = bubble(x) + bubble(y);
    let e2 = (2.0 * t).exp();
    p * t.exp() + 2.0 * t.exp() * q + 2.0 * p * p * e2 / (1.0 + p * p * e2).powi(2)
}

/// Semidiscrete benchmark problem, autonomized over `[t; u]`.
pub fn build_ho_problem(m: usize) -> Result<Problem, ProblemError> {
    let grid = Grid2D::new(m)?;
    let n = grid.unknowns();
    let lap = Arc::new(laplacian_2d(m)?);
    let coords: Arc<Vec<(f64, f64)>> = Arc::new((0..n).map(|i| grid.coords(i)).collect());

    let nonlinearity = {
        let coords = coords.clone();
        move |t: f64, u: &DVector<f64>| {
            DVector::from_fn(u.len(), |i, _| {
                let (x, y) = coords[i];
                1.0 / (1.0 + u[i] * u[i]) + ho_source_node(x, y, t)
            })
        }
    };
    let f_prime = |_t: f64, u: &DVector<f64>| {
        DVector::from_fn(u.len(), |i, _| {
            let d = 1.0 + u[i] * u[i];
            -2.0 * u[i] / (d * d)
        })
    };
    let dfdt = {
        let coords = coords.clone();
        move |t: f64, u: &DVector<f64>| {
            DVector::from_fn(u.len(), |i, _| {
                let (x, y) = coords[i];
                ho_source_dt_node(x, y, t)
            })
        }
    };

    let rhs = {
        let lap = lap.clone();
        let nl = nonlinearity.clone();
        move |t: f64, u: &DVector<f64>| lap.apply(u) + nl(t, u)
    };

    let system = NonlinearSystem::non_autonomous(n, rhs)
        .with_time_semilinear(TimeSemilinearSplit {
            a: LinearOperator::Sparse(lap),
            f: Arc::new(nonlinearity),
            f_prime_diag: Arc::new(f_prime),
        })
        .with_dfdt(dfdt)
        .autonomize()?;

    let exact_field = {
        let coords = coords.clone();
        move |t: f64| {
            DVector::from_fn(coords.len() + 1, |i, _| {
                if i == 0 {
                    t
                } else {
                    let (x, y) = coords[i - 1];
                    ho_exact_node(x, y, t)
                }
            })
        }
    };
    let u0 = exact_field(0.0);

    Ok(Problem {
        name: format!("ho (grid {m})"),
        system,
        u0,
        exact: Some(Arc::new(exact_field)),
    })
}

/// Infinity norm of the semidiscrete defect at time `t`: the
/// manufactured exact solution plugged into the spatially discretized
/// right-hand side. The manufactured solution is quadratic in each
/// coordinate, so the 5-point stencil differentiates it exactly and the
/// defect sits at the round-off floor of the 1/dx^2-scaled stencil (it
/// grows like m^2 in machine epsilon units rather than decaying as the
/// generic O(dx^2) truncation bound).
pub fn ho_semidiscrete_residual(m: usize, t: f64) -> Result<f64, ProblemError> {
    let grid = Grid2D::new(m)?;
    let n = grid.unknowns();
    let lap = laplacian_2d(m)?;
    let u = DVector::from_fn(n, |i, _| {
        let (x, y) = grid.coords(i);
        ho_exact_node(x, y, t)
    });
    // du/dt = u for this manufactured solution
    let rhs = lap.apply(&u)
        + DVector::from_fn(n, |i, _| {
            let (x, y) = grid.coords(i);
            1.0 / (1.0 + u[i] * u[i]) + ho_source_node(x, y, t)
        });
    Ok((&u - rhs).amax())
}

/// Scalar Riccati oracle u' = u^2 with exact solution u0 / (1 - u0 t).
pub fn riccati_problem(u0: f64) -> Problem {
    let system = NonlinearSystem::autonomous(1, |u: &DVector<f64>| {
        DVector::from_element(1, u[0] * u[0])
    })
    .with_jac_apply(|u, v| DVector::from_element(1, 2.0 * u[0] * v[0]));
    Problem {
        name: "riccati".into(),
        system,
        u0: DVector::from_element(1, u0),
        exact: Some(Arc::new(move |t| {
            DVector::from_element(1, u0 / (1.0 - u0 * t))
        })),
    }
}

/// Diagonal linear decay u' = diag(spectrum) u, entrywise exponential
/// exact solution, u0 = 1.
pub fn linear_decay_system(spectrum: &[f64]) -> Result<Problem, ProblemError> {
    if let Some(&bad) = spectrum.iter().find(|&&s| s >= 0.0) {
        return Err(ProblemError::NonNegativeSpectrum(bad));
    }
    let n = spectrum.len();
    let diag = DVector::from_column_slice(spectrum);
    let a = LinearOperator::DiagonalShifted {
        base: Box::new(LinearOperator::dense(nalgebra::DMatrix::zeros(n, n))),
        diag: diag.clone(),
    };
    let system = NonlinearSystem::autonomous(n, {
        let diag = diag.clone();
        move |u: &DVector<f64>| u.component_mul(&diag)
    })
    .with_semilinear(SemilinearSplit {
        a,
        f: Arc::new(|u: &DVector<f64>| DVector::zeros(u.len())),
        f_prime_diag: Arc::new(|u: &DVector<f64>| DVector::zeros(u.len())),
    });
    let spec = diag.clone();
    Ok(Problem {
        name: "linear-decay".into(),
        system,
        u0: DVector::from_element(n, 1.0),
        exact: Some(Arc::new(move |t| {
            DVector::from_fn(spec.len(), |i, _| (spec[i] * t).exp())
        })),
    })
}

/// Look up a problem by its CLI name.
pub fn by_name(name: &str, grid_m: usize) -> Result<Problem, ProblemError> {
    match name {
        "ho" => build_ho_problem(grid_m),
        "riccati" => Ok(riccati_problem(1.0)),
        "linear-decay" => linear_decay_system(&[-1.0, -10.0, -100.0]),
        other => Err(ProblemError::UnknownProblem(other.into())),
    }
}

pub const PROBLEM_NAMES: [&str; 3] = ["ho", "riccati", "linear-decay"];
