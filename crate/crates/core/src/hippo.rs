//! The HiPPO (Legendre) matrix and vector, their continuous dynamics
//! `dc/dt = −(1/t) A c + (1/t) B f(t)`, and the discrete recurrences built
//! from forward Euler, backward Euler and the trapezoidal rule.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matfun::{dot, Lu, Matrix};

/// Discretization used to turn continuous dynamics into a one-step map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Forward,
    Backward,
    Trapezoidal,
    /// Trapezoidal rule with both evaluations taken at the step's end time,
    /// the variant used to initialize LSSL layers.
    TrapezoidalLssl,
    /// Exact matrix exponential; only available for the data-free dynamics.
    ClosedForm,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Forward,
        Scheme::Backward,
        Scheme::Trapezoidal,
        Scheme::TrapezoidalLssl,
        Scheme::ClosedForm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Forward => "forward",
            Scheme::Backward => "backward",
            Scheme::Trapezoidal => "trapezoidal",
            Scheme::TrapezoidalLssl => "trapezoidal_lssl",
            Scheme::ClosedForm => "closed_form",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == s || sc.name().replace('_', "-") == s)
            .ok_or_else(|| Error::input(format!("unknown scheme '{s}'")))
    }
}

/// HiPPO matrix `A_H` (lower triangular) and vector `B_H`.
#[derive(Clone, Debug, PartialEq)]
pub struct HippoSystem {
    pub n: usize,
    pub a: Matrix,
    pub b: Vec<f64>,
}

/// `A_H[i][j] = √(2i+1)√(2j+1)` below the diagonal, `i + 1` on it, zero
/// above; `B_H[i] = √(2i+1)`.
pub fn make_hippo(n: usize) -> Result<HippoSystem> {
    if n == 0 {
        return Err(Error::input("state size must be at least 1"));
    }
    let b: Vec<f64> = (0..n).map(|i| ((2 * i + 1) as f64).sqrt()).collect();
    let a = Matrix::from_fn(n, n, |i, j| {
        if j < i {
            b[i] * b[j]
        } else if j == i {
            (i + 1) as f64
        } else {
            0.0
        }
    });
    Ok(HippoSystem { n, a, b })
}

impl HippoSystem {
    /// Right-hand side of the continuous dynamics at time `t`.
    pub fn rhs(&self, t: f64, c: &[f64], f_t: f64) -> Result<Vec<f64>> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("HiPPO dynamics need t > 0, got {t}")));
        }
        let ac = self.a.matvec(c)?;
        Ok(ac
            .iter()
            .zip(&self.b)
            .map(|(ac_i, b_i)| (-ac_i + b_i * f_t) / t)
            .collect())
    }

    /// `B_H B_Hᵀ − A_H`, the drift obtained by feeding the endpoint
    /// prediction back in as the signal.
    pub fn feedback_matrix(&self) -> Matrix {
        Matrix::outer(&self.b, &self.b)
            .sub(&self.a)
            .expect("shapes agree by construction")
    }
}

/// Free-function form of [`HippoSystem::rhs`].
pub fn hippo_rhs(sys: &HippoSystem, t: f64, c: &[f64], f_t: f64) -> Result<Vec<f64>> {
    sys.rhs(t, c, f_t)
}

/// One discrete step `c_{k+1} = Ā c_k + B̄_prev f(t_k) + B̄ f(t_{k+1})`.
///
/// `b_bar_prev` is zero for the schemes that only read `f(t_{k+1})`
/// (backward, trapezoidal_lssl); `b_bar` is zero for forward Euler, which
/// only reads `f(t_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePair {
    pub a_bar: Matrix,
    pub b_bar: Vec<f64>,
    pub b_bar_prev: Vec<f64>,
    pub scheme: Scheme,
    pub t_k: f64,
    pub dt: f64,
}

impl DiscretePair {
    pub fn step(&self, c: &[f64], f_prev: f64, f_next: f64) -> Result<Vec<f64>> {
        let mut out = self.a_bar.matvec(c)?;
        for ((o, bp), bn) in out.iter_mut().zip(&self.b_bar_prev).zip(&self.b_bar) {
            *o += bp * f_prev + bn * f_next;
        }
        Ok(out)
    }

    /// Input vector for a time-invariant recurrence `c_k = Ā c_{k−1} + B u_k`
    /// that feeds one sample per step: both input coefficients summed.
    pub fn input_vector(&self) -> Vec<f64> {
        self.b_bar
            .iter()
            .zip(&self.b_bar_prev)
            .map(|(a, b)| a + b)
            .collect()
    }
}

/// Discretizes the HiPPO dynamics over the step `t_k → t_k + dt`.
///
/// Backward Euler and trapezoidal_lssl only evaluate the dynamics at the end
/// of the step, so they also accept `t_k = 0`; forward Euler and the full
/// trapezoidal rule need `t_k > 0`.
pub fn discretize_hippo(sys: &HippoSystem, scheme: Scheme, t_k: f64, dt: f64) -> Result<DiscretePair> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("step size must be positive, got {dt}")));
    }
    let needs_start = matches!(scheme, Scheme::Forward | Scheme::Trapezoidal);
    if !(t_k.is_finite() && (t_k > 0.0 || (t_k == 0.0 && !needs_start))) {
        return Err(Error::Domain(format!(
            "{scheme} discretization needs t_k > 0, got {t_k}"
        )));
    }
    let n = sys.n;
    let t_next = t_k + dt;
    let zeros = vec![0.0; n];
    let scaled_b = |s: f64| sys.b.iter().map(|b| b * s).collect::<Vec<f64>>();

    let (a_bar, b_bar, b_bar_prev) = match scheme {
        Scheme::Forward => {
            let r = dt / t_k;
            (sys.a.scale(-r).add_identity(1.0), zeros, scaled_b(r))
        }
        Scheme::Backward => {
            let r = dt / t_next;
            let lu = Lu::factor(&sys.a.scale(r).add_identity(1.0))?;
            let a_bar = lu.solve(&Matrix::identity(n))?;
            let b_bar = lu.solve_vec(&scaled_b(r))?;
            (a_bar, b_bar, zeros)
        }
        Scheme::Trapezoidal => {
            let (r0, r1) = (dt / (2.0 * t_k), dt / (2.0 * t_next));
            let lu = Lu::factor(&sys.a.scale(r1).add_identity(1.0))?;
            let a_bar = lu.solve(&sys.a.scale(-r0).add_identity(1.0))?;
            let b_bar = lu.solve_vec(&scaled_b(r1))?;
            let b_bar_prev = lu.solve_vec(&scaled_b(r0))?;
            (a_bar, b_bar, b_bar_prev)
        }
        Scheme::TrapezoidalLssl => {
            let r = dt / (2.0 * t_next);
            let lu = Lu::factor(&sys.a.scale(r).add_identity(1.0))?;
            let a_bar = lu.solve(&sys.a.scale(-r).add_identity(1.0))?;
            let b_bar = lu.solve_vec(&scaled_b(2.0 * r))?;
            (a_bar, b_bar, zeros)
        }
        Scheme::ClosedForm => {
            return Err(Error::input(
                "the closed-form transition exists only for the data-free dynamics, not HiPPO",
            ))
        }
    };
    if !a_bar.is_finite() || b_bar.iter().chain(&b_bar_prev).any(|v| !v.is_finite()) {
        return Err(Error::numeric(format!(
            "{scheme} discretization at t_k = {t_k} produced non-finite values"
        )));
    }
    Ok(DiscretePair {
        a_bar,
        b_bar,
        b_bar_prev,
        scheme,
        t_k,
        dt,
    })
}

/// Runs a HiPPO recurrence over samples `values[k]` observed at `times[k]`,
/// starting from `c = 0` at `times[0]` (which must be positive).
///
/// Returns the coefficient vector after every sample; entry 0 is the zero
/// start state.
pub fn run_recurrence(
    sys: &HippoSystem,
    scheme: Scheme,
    times: &[f64],
    values: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if times.len() != values.len() {
        return Err(Error::dim(format!(
            "{} times but {} values",
            times.len(),
            values.len()
        )));
    }
    if times.is_empty() {
        return Ok(vec![]);
    }
    if !(times[0] > 0.0) {
        return Err(Error::Domain("recurrence must start at t > 0".into()));
    }
    let mut states = Vec::with_capacity(times.len());
    let mut c = vec![0.0; sys.n];
    states.push(c.clone());
    for k in 1..times.len() {
        let pair = discretize_hippo(sys, scheme, times[k - 1], times[k] - times[k - 1])
            .map_err(|e| Error::at_step(k, e))?;
        c = pair.step(&c, values[k - 1], values[k])?;
        states.push(c.clone());
    }
    Ok(states)
}

/// Value of the reconstruction at the current horizon, `B_Hᵀ c`.
pub fn endpoint_value(sys: &HippoSystem, c: &[f64]) -> f64 {
    dot(&sys.b, c)
}
