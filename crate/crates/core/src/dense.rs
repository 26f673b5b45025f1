//! Dense matrix exponential and φ-functions.
//!
//! `expm` implements scaling-and-squaring with the degree-13 Padé
//! approximant (Higham 2005). φ_p(M) is obtained from a single
//! exponential of the block-augmented matrix
//!
//! ```text
//!     [ M  I        ]
//!     [    0  I     ]        exp -> block (0, p) is φ_p(M),
//!     [       ..  I ]               block (0, j) is φ_j(M).
//!     [           0 ]
//! ```
//!
//! which is recurrence-consistent by construction.

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DenseError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("linear solve failed in Pade evaluation")]
    SolveFailed,
}

/// Padé-13 coefficients for the exponential (Higham 2005, Table 10.4).
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

fn check_square(m: &DMatrix<f64>) -> Result<(), DenseError> {
    if m.nrows() != m.ncols() {
        return Err(DenseError::NonSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(DenseError::NonFinite);
    }
    Ok(())
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential e^M via scaling-and-squaring with Padé-13.
pub fn expm(m: &DMatrix<f64>) -> Result<DMatrix<f64>, DenseError> {
    check_square(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }

    let norm = one_norm(m);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = m / 2f64.powi(s);

    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let b = &PADE13;

    let u_inner = &a6 * (b[13] * &a6 + b[11] * &a4 + b[9] * &a2)
        + b[7] * &a6
        + b[5] * &a4
        + b[3] * &a2
        + b[1] * &id;
    let u = &a * u_inner;
    let v = &a6 * (b[12] * &a6 + b[10] * &a4 + b[8] * &a2)
        + b[6] * &a6
        + b[4] * &a4
        + b[2] * &a2
        + b[0] * &id;

    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut r = lhs.lu().solve(&rhs).ok_or(DenseError::SolveFailed)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// φ_p(M) for a square matrix, via one augmented-block exponential.
pub fn phi(p: usize, m: &DMatrix<f64>) -> Result<DMatrix<f64>, DenseError> {
    Ok(phi_all(p, m)?.pop().expect("phi_all returns p+1 blocks"))
}

/// All of φ_0(M), ..., φ_q(M) from a single augmented exponential.
pub fn phi_all(q: usize, m: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>, DenseError> {
    check_square(m)?;
    let n = m.nrows();
    if q == 0 {
        return Ok(vec![expm(m)?]);
    }
    let dim = n * (q + 1);
    let mut aug = DMatrix::<f64>::zeros(dim, dim);
    aug.view_mut((0, 0), (n, n)).copy_from(m);
    for j in 0..q {
        for i in 0..n {
            aug[(j * n + i, (j + 1) * n + i)] = 1.0;
        }
    }
    let e = expm(&aug)?;
    Ok((0..=q)
        .map(|j| e.view((0, j * n), (n, n)).into_owned())
        .collect())
}

/// Scalar φ_p(z), evaluated through the same augmented-matrix path.
pub fn phi_scalar(p: usize, z: f64) -> f64 {
    phi(p, &DMatrix::from_element(1, 1, z)).expect("1x1 phi cannot fail")[(0, 0)]
}
