//! Data-free latent dynamics for the uncertainty-aware recurrence.
//!
//! Substituting the endpoint prediction `B_Hᵀ c` for the signal turns the
//! HiPPO ODE into `dc/dt = (1/t)(A_Hᵀ − I) c`, which extends the current
//! reconstruction as the same polynomial and therefore diverges quickly past
//! the horizon. The regularized matrix `A_R` is the least-squares solution
//! that additionally keeps the endpoint slope constant while the horizon
//! grows:
//!
//! ```text
//! [ I  ]               [ A_Hᵀ − I ]
//! [ Bᵀ ] · t·dc/dt  ≈  [ 2Qᵀ      ] · c,     A_R = stack† · rhs
//! [ Qᵀ ]               [ Qᵀ       ]
//! ```
//!
//! with `Q_i = √(2i+1) · P_i'(1) = √(2i+1) · i(i+1)/2`.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::hippo::{HippoSystem, Scheme};
use crate::matfun::{expm, pinv, Lu, Matrix, PINV_REL_TOL};

/// `A_Hᵀ − I`, equal to `B_H B_Hᵀ − A_H`.
pub fn data_free_matrix(sys: &HippoSystem) -> Matrix {
    sys.a.transpose().add_identity(-1.0)
}

/// Endpoint-derivative vector `Q`.
pub fn make_q(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let i = i as f64;
            (2.0 * i + 1.0).sqrt() * i * (i + 1.0) / 2.0
        })
        .collect()
}

/// Regularized dynamics `dc/dt = (1/t) A_R c`.
#[derive(Clone, Debug)]
pub struct RegularizedSystem {
    pub n: usize,
    pub a_r: Matrix,
    pub q: Vec<f64>,
    pub b: Vec<f64>,
    /// Frobenius norm of the least-squares residual `stack·A_R − rhs`.
    pub residual: f64,
}

/// The `(n+2)×n` left-hand stack `[I; B_Hᵀ; Qᵀ]` and matching right-hand
/// blocks `[A_Hᵀ − I; 2Qᵀ; Qᵀ]`.
pub fn regularization_blocks(sys: &HippoSystem) -> (Matrix, Matrix) {
    let n = sys.n;
    let q = make_q(n);
    let free = data_free_matrix(sys);
    let stack = Matrix::from_fn(n + 2, n, |i, j| match i {
        i if i < n => (i == j) as u8 as f64,
        i if i == n => sys.b[j],
        _ => q[j],
    });
    let rhs = Matrix::from_fn(n + 2, n, |i, j| match i {
        i if i < n => free[(i, j)],
        i if i == n => 2.0 * q[j],
        _ => q[j],
    });
    (stack, rhs)
}

pub fn make_regularized(sys: &HippoSystem) -> Result<RegularizedSystem> {
    make_regularized_with_tol(sys, PINV_REL_TOL)
}

pub fn make_regularized_with_tol(sys: &HippoSystem, rel_tol: f64) -> Result<RegularizedSystem> {
    let (stack, rhs) = regularization_blocks(sys);
    let a_r = pinv(&stack, rel_tol)?.matmul(&rhs)?;
    if !a_r.is_finite() {
        return Err(Error::numeric("regularized matrix has non-finite entries"));
    }
    let residual = stack.matmul(&a_r)?.sub(&rhs)?.norm_fro();
    Ok(RegularizedSystem {
        n: sys.n,
        a_r,
        q: make_q(sys.n),
        b: sys.b.clone(),
        residual,
    })
}

/// Transition matrix of `dc/dt = (1/t) A c` from `t_from` to `t_to`.
///
/// `closed_form` is `exp(ln(t_to/t_from) · A)`; the other schemes take one
/// step of size `Δt = t_to − t_from`. Equal times give the identity exactly.
pub fn transition_for(a: &Matrix, t_from: f64, t_to: f64, scheme: Scheme) -> Result<Matrix> {
    if !(t_from > 0.0 && t_from.is_finite()) {
        return Err(Error::Domain(format!(
            "transition start time must be positive, got {t_from}"
        )));
    }
    if !(t_to >= t_from && t_to.is_finite()) {
        return Err(Error::Domain(format!(
            "transition end time {t_to} precedes start time {t_from}"
        )));
    }
    let n = a.rows();
    if t_to == t_from {
        return Ok(Matrix::identity(n));
    }
    let dt = t_to - t_from;
    match scheme {
        Scheme::ClosedForm => expm(&a.scale((t_to / t_from).ln())),
        Scheme::Forward => Ok(a.scale(dt / t_from).add_identity(1.0)),
        Scheme::Backward => {
            let m = a.scale(-dt / t_to).add_identity(1.0);
            Lu::factor(&m)?.solve(&Matrix::identity(n))
        }
        Scheme::Trapezoidal => {
            let m = a.scale(-dt / (2.0 * t_to)).add_identity(1.0);
            Lu::factor(&m)?.solve(&a.scale(dt / (2.0 * t_from)).add_identity(1.0))
        }
        Scheme::TrapezoidalLssl => Err(Error::input(
            "trapezoidal_lssl applies to HiPPO only; use trapezoidal for the latent dynamics",
        )),
    }
}

/// Transition of the regularized latent dynamics.
pub fn transition(sys_r: &RegularizedSystem, t_from: f64, t_to: f64, scheme: Scheme) -> Result<Matrix> {
    transition_for(&sys_r.a_r, t_from, t_to, scheme)
}

/// Median wall-clock milliseconds to build the transition `t_from → t_from + 1`
/// with each scheme, over `reps` repetitions.
pub fn time_transitions(sys_r: &RegularizedSystem, t_from: f64, schemes: &[Scheme], reps: usize) -> Result<Vec<(Scheme, f64)>> {
    let reps = reps.max(1);
    schemes
        .iter()
        .map(|&scheme| {
            let mut times = Vec::with_capacity(reps);
            for _ in 0..reps {
                let start = Instant::now();
                let m = transition(sys_r, t_from, t_from + 1.0, scheme)?;
                times.push(start.elapsed().as_secs_f64() * 1e3);
                std::hint::black_box(m);
            }
            times.sort_by(f64::total_cmp);
            Ok((scheme, times[reps / 2]))
        })
        .collect()
}
