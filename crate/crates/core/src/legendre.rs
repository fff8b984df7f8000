//! Legendre polynomials and the orthonormal basis they induce on `[0, t]`
//! under the inner product `⟨f, g⟩_t = (1/t) ∫₀ᵗ f g dτ`.
//!
//! Basis function `i` is `g_{t,i}(τ) = √(2i+1) · P_i(2τ/t − 1)`. Evaluation is
//! by the Bonnet recurrence; degrees up to 512 are covered by tests, higher
//! degrees work but carry no accuracy claim.

use crate::error::{Error, Result};

/// `P_i(x)` for any real `x`.
pub fn legendre_eval(i: usize, x: f64) -> f64 {
    match i {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for k in 1..i {
                let kf = k as f64;
                let next = ((2.0 * kf + 1.0) * x * cur - kf * prev) / (kf + 1.0);
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// `P_0(x), …, P_{n−1}(x)` in one sweep.
pub fn legendre_eval_all(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let v = match i {
            0 => 1.0,
            1 => x,
            _ => {
                let k = (i - 1) as f64;
                ((2.0 * k + 1.0) * x * out[i - 1] - k * out[i - 2]) / (k + 1.0)
            }
        };
        out.push(v);
    }
    out
}

/// Orthonormal shifted Legendre basis of `n` functions on `[0, t]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Basis {
    n: usize,
    t: f64,
}

impl Basis {
    pub fn new(n: usize, t: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("basis needs at least one function"));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("basis horizon must be positive, got {t}")));
        }
        Ok(Self { n, t })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Affine map taking `[0, t]` onto `[−1, 1]`.
    pub fn to_unit(&self, tau: f64) -> f64 {
        2.0 * tau / self.t - 1.0
    }

    /// `g_{t,i}(τ)`. `τ` outside `[0, t]` extrapolates the polynomial.
    pub fn eval(&self, i: usize, tau: f64) -> Result<f64> {
        if i >= self.n {
            return Err(Error::input(format!(
                "basis index {i} out of range for n = {}",
                self.n
            )));
        }
        Ok(((2 * i + 1) as f64).sqrt() * legendre_eval(i, self.to_unit(tau)))
    }

    /// All `n` basis functions at `τ`.
    pub fn eval_all(&self, tau: f64) -> Vec<f64> {
        legendre_eval_all(self.n, self.to_unit(tau))
            .into_iter()
            .enumerate()
            .map(|(i, p)| ((2 * i + 1) as f64).sqrt() * p)
            .collect()
    }
}

/// Coefficients of a signal history in the basis on `[0, t]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefVector {
    pub t: f64,
    pub c: Vec<f64>,
}

impl CoefVector {
    pub fn new(t: f64, c: Vec<f64>) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("horizon must be positive, got {t}")));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("coefficient vector has non-finite entries"));
        }
        Ok(Self { t, c })
    }

    pub fn zeros(b: &Basis) -> Self {
        Self {
            t: b.t,
            c: vec![0.0; b.n],
        }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }
}

/// Projects sampled `(τ, f(τ))` pairs onto the basis with the composite
/// trapezoidal rule over the caller's grid.
pub fn project(b: &Basis, samples: &[(f64, f64)]) -> Result<CoefVector> {
    if samples.len() < 2 {
        return Err(Error::input(format!(
            "projection needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    for (k, w) in samples.windows(2).enumerate() {
        if !(w[1].0 > w[0].0) {
            return Err(Error::input(format!(
                "sample times must be strictly increasing (index {})",
                k + 1
            )));
        }
    }
    if samples.iter().any(|&(tau, v)| !tau.is_finite() || !v.is_finite()) {
        return Err(Error::input("samples contain non-finite values"));
    }
    let (first, last) = (samples[0].0, samples[samples.len() - 1].0);
    let slack = 1e-12 * b.t;
    if first < -slack || last > b.t + slack {
        return Err(Error::input(format!(
            "samples span [{first}, {last}], outside the basis domain [0, {}]",
            b.t
        )));
    }

    let mut c = vec![0.0; b.n];
    let mut prev = weighted(b, samples[0]);
    for w in samples.windows(2) {
        let next = weighted(b, w[1]);
        let half_h = 0.5 * (w[1].0 - w[0].0);
        for ((ci, p), q) in c.iter_mut().zip(&prev).zip(&next) {
            *ci += half_h * (p + q);
        }
        prev = next;
    }
    for ci in c.iter_mut() {
        *ci /= b.t;
    }
    CoefVector::new(b.t, c)
}

fn weighted(b: &Basis, (tau, v): (f64, f64)) -> Vec<f64> {
    b.eval_all(tau).into_iter().map(|g| g * v).collect()
}

/// `f̂(τ) = Σ cᵢ g_{t,i}(τ)` for every requested `τ`.
pub fn reconstruct(b: &Basis, c: &CoefVector, taus: &[f64]) -> Result<Vec<f64>> {
    if c.len() != b.n {
        return Err(Error::dim(format!(
            "coefficient vector has length {}, basis has {}",
            c.len(),
            b.n
        )));
    }
    Ok(taus
        .iter()
        .map(|&tau| {
            b.eval_all(tau)
                .iter()
                .zip(&c.c)
                .map(|(g, ci)| g * ci)
                .sum()
        })
        .collect())
}

/// Evenly spaced grid of `num` points on `[lo, hi]` (both ends included).
pub fn linspace(lo: f64, hi: f64, num: usize) -> Vec<f64> {
    match num {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let h = (hi - lo) / (num - 1) as f64;
            (0..num)
                .map(|k| if k == num - 1 { hi } else { lo + h * k as f64 })
                .collect()
        }
    }
}
