//! Kalman filtering over the regularized latent model
//!
//! ```text
//! c_k = Ā_{R,k} c_{k−1} + q_k,   q_k ~ N(0, Σ)
//! y_k = B_Hᵀ c_k + ε_k,          ε_k ~ N(0, σ²)
//! ```
//!
//! observed at the integer times `t_k = k`. The posterior covariance never
//! depends on the observations, so the whole filter collapses to a
//! data-independent linear recurrence `m_k = Ā_{U,k} m_{k−1} + B̄_{U,k} y_k`
//! whose matrices are what an initialization bank stores.

use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hippo::{discretize_hippo, make_hippo, HippoSystem, Scheme};
use crate::matfun::{cholesky, dot, min_eigenvalue_symmetric, symmetrize, Matrix};
use crate::unhippo_dyn::{make_regularized, transition_for};

/// Eigenvalue floor below which a covariance is considered broken.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// Default observation-noise hyperparameter.
pub const DEFAULT_SIGMA2: f64 = 1e10;

/// Process-noise scales below this are refused.
pub const MIN_PROCESS_SCALE: f64 = 1e-6;

/// Observation and process noise of the latent model. `sigma2` is a
/// filtering-strength knob, not the variance of the data: it has to
/// outweigh `B_Hᵀ P⁻ B_H`, which is large.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub sigma2: f64,
    /// `Σ = process_scale · I`.
    pub process_scale: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma2: DEFAULT_SIGMA2,
            process_scale: 1.0,
        }
    }
}

impl NoiseConfig {
    pub fn new(sigma2: f64, process_scale: f64) -> Result<Self> {
        let cfg = Self {
            sigma2,
            process_scale,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::Domain(format!(
                "sigma2 must be positive and finite, got {}",
                self.sigma2
            )));
        }
        if !(self.process_scale.is_finite() && self.process_scale >= MIN_PROCESS_SCALE) {
            warn!(
                "process noise scale {} is below {MIN_PROCESS_SCALE:e}; the filter becomes unstable",
                self.process_scale
            );
            return Err(Error::Domain(format!(
                "process_scale must be at least {MIN_PROCESS_SCALE:e}, got {}",
                self.process_scale
            )));
        }
        Ok(())
    }

    pub fn sigma(&self, n: usize) -> Matrix {
        Matrix::identity(n).scale(self.process_scale)
    }
}

/// Posterior `N(m_k, P_k)` after `k` observations.
#[derive(Clone, Debug, PartialEq)]
pub struct KalmanState {
    pub k: usize,
    pub m: Vec<f64>,
    pub p: Matrix,
}

impl KalmanState {
    /// Standard normal prior `N(0, I)` at `k = 0`.
    pub fn prior(n: usize) -> Self {
        Self {
            k: 0,
            m: vec![0.0; n],
            p: Matrix::identity(n),
        }
    }
}

/// One-step-ahead prediction `N(m⁻, P⁻)` for step `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Predicted {
    pub k: usize,
    pub m: Vec<f64>,
    pub p: Matrix,
}

/// `m⁻ = Ā m`, `P⁻ = Ā P Āᵀ + Σ`.
pub fn kalman_predict(state: &KalmanState, a_bar: &Matrix, sigma: &Matrix) -> Result<Predicted> {
    let m = a_bar.matvec(&state.m)?;
    let p = a_bar
        .matmul(&state.p)?
        .matmul(&a_bar.transpose())?
        .add(sigma)?;
    Ok(Predicted {
        k: state.k + 1,
        m,
        p,
    })
}

/// Gain and covariance part of the scalar-observation update.
#[derive(Clone, Debug)]
pub struct CovarianceUpdate {
    /// Innovation variance `s = bᵀ P⁻ b + σ²`.
    pub s: f64,
    /// Kalman gain `K = P⁻ b / s`.
    pub gain: Vec<f64>,
    /// `symmetrize(P⁻ − s K Kᵀ)`.
    pub p: Matrix,
}

pub fn covariance_update(p_minus: &Matrix, b: &[f64], sigma2: f64) -> Result<CovarianceUpdate> {
    if !(sigma2 > 0.0) {
        return Err(Error::Domain(format!("sigma2 must be positive, got {sigma2}")));
    }
    let pb = p_minus.matvec(b)?;
    let s = dot(b, &pb) + sigma2;
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::numeric(format!("innovation variance is {s:e}")));
    }
    let gain: Vec<f64> = pb.iter().map(|v| v / s).collect();
    let n = gain.len();
    let mut p = p_minus.clone();
    {
        let data = p.as_mut_slice();
        for i in 0..n {
            let sk = s * gain[i];
            for j in 0..n {
                data[i * n + j] -= sk * gain[j];
            }
        }
    }
    Ok(CovarianceUpdate {
        s,
        gain,
        p: symmetrize(&p)?,
    })
}

/// Conditions the prediction on the scalar observation `y = bᵀ c + ε`.
pub fn kalman_update(pred: &Predicted, y: f64, b: &[f64], sigma2: f64) -> Result<KalmanState> {
    let cov = covariance_update(&pred.p, b, sigma2)?;
    let v = y - dot(b, &pred.m);
    let m = pred
        .m
        .iter()
        .zip(&cov.gain)
        .map(|(mi, ki)| mi + ki * v)
        .collect();
    Ok(KalmanState {
        k: pred.k,
        m,
        p: cov.p,
    })
}

/// The mean update of step `k` written as one linear map.
#[derive(Clone, Debug)]
pub struct UnhippoStep {
    /// `Ā_U = (I − K B_Hᵀ) Ā_R`.
    pub a_u: Matrix,
    /// `B̄_U = K`.
    pub b_u: Vec<f64>,
    /// Posterior covariance after the step.
    pub p: Matrix,
}

/// Runs the covariance half of predict + update and regroups the mean
/// update into `(Ā_U, B̄_U)`. Only `state_before.p` is read.
pub fn extract_unhippo_pair(
    state_before: &KalmanState,
    a_bar_k: &Matrix,
    b: &[f64],
    noise: &NoiseConfig,
) -> Result<UnhippoStep> {
    let n = b.len();
    let p_minus = a_bar_k
        .matmul(&state_before.p)?
        .matmul(&a_bar_k.transpose())?
        .add_identity(noise.process_scale);
    let cov = covariance_update(&p_minus, b, noise.sigma2)?;
    let bt_a = a_bar_k.tr_matvec(b)?;
    let mut a_u = a_bar_k.clone();
    {
        let data = a_u.as_mut_slice();
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] -= cov.gain[i] * bt_a[j];
            }
        }
    }
    Ok(UnhippoStep {
        a_u,
        b_u: cov.gain,
        p: cov.p,
    })
}

/// Whether a bank holds plain HiPPO discretizations or UnHiPPO pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankKind {
    Hippo,
    Unhippo,
}

impl BankKind {
    pub fn name(self) -> &'static str {
        match self {
            BankKind::Hippo => "hippo",
            BankKind::Unhippo => "unhippo",
        }
    }

    pub fn default_scheme(self) -> Scheme {
        match self {
            BankKind::Hippo => Scheme::TrapezoidalLssl,
            BankKind::Unhippo => Scheme::ClosedForm,
        }
    }
}

impl fmt::Display for BankKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BankKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hippo" => Ok(BankKind::Hippo),
            "unhippo" => Ok(BankKind::Unhippo),
            _ => Err(Error::input(format!("unknown bank kind '{s}'"))),
        }
    }
}

/// Discrete transition pair `(Ā, B̄)` for `c_k = Ā c_{k−1} + B̄ u_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionPair {
    pub a: Matrix,
    pub b: Vec<f64>,
}

impl TransitionPair {
    pub fn apply(&self, c: &[f64], u: f64) -> Vec<f64> {
        let mut out = self.a.matvec_unchecked(c);
        for (o, b) in out.iter_mut().zip(&self.b) {
            *o += b * u;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankMeta {
    pub sigma2: f64,
    pub process_scale: f64,
    pub scheme: Scheme,
    /// Tool name and version that produced the bank.
    pub created_by: String,
}

/// Transition pairs for steps `k = 1..=t_max` at times `t_k = k`.
#[derive(Clone, Debug)]
pub struct InitBank {
    pub n: usize,
    pub t_max: usize,
    pub kind: BankKind,
    pub pairs: Vec<TransitionPair>,
    pub meta: BankMeta,
}

impl InitBank {
    /// Pair for step `k` (1-based).
    pub fn pair(&self, k: usize) -> Result<&TransitionPair> {
        if k == 0 || k > self.t_max {
            return Err(Error::input(format!(
                "step {k} outside the bank range 1..={}",
                self.t_max
            )));
        }
        Ok(&self.pairs[k - 1])
    }

    /// Runs the time-varying recurrence `c_k = Ā_k c_{k−1} + B̄_k y_k` from
    /// `c_0 = 0` and returns `c_1, …, c_L`.
    pub fn run(&self, ys: &[f64]) -> Result<Vec<Vec<f64>>> {
        if ys.len() > self.t_max {
            return Err(Error::input(format!(
                "{} observations but the bank only covers {} steps",
                ys.len(),
                self.t_max
            )));
        }
        let mut c = vec![0.0; self.n];
        let mut out = Vec::with_capacity(ys.len());
        for (pair, &y) in self.pairs.iter().zip(ys) {
            c = pair.apply(&c, y);
            out.push(c.clone());
        }
        Ok(out)
    }
}

pub(crate) fn tool_version() -> String {
    format!("unhippo {}", env!("CARGO_PKG_VERSION"))
}

/// Kalman filter over the regularized latent model at times `t_k = k`.
///
/// Stepping it with observations reproduces what an UnHiPPO bank encodes;
/// it exists mainly as the two-step reference for the regrouped form.
pub struct LatentFilter {
    a_r: Matrix,
    b: Vec<f64>,
    noise: NoiseConfig,
    scheme: Scheme,
    state: KalmanState,
}

impl LatentFilter {
    pub fn new(n: usize, noise: NoiseConfig, scheme: Scheme) -> Result<Self> {
        noise.validate()?;
        check_latent_scheme(scheme)?;
        let sys = make_hippo(n)?;
        let reg = make_regularized(&sys)?;
        Ok(Self {
            a_r: reg.a_r,
            b: reg.b,
            noise,
            scheme,
            state: KalmanState::prior(n),
        })
    }

    pub fn state(&self) -> &KalmanState {
        &self.state
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Transition `Ā_{R,k}` from `t_{k−1}` to `t_k`, with `t_0 = t_1`.
    pub fn transition(&self, k: usize) -> Result<Matrix> {
        latent_transition(&self.a_r, k, self.scheme)
    }

    /// Predict to step `k + 1` and condition on `y`.
    pub fn step(&mut self, y: f64) -> Result<&KalmanState> {
        let k = self.state.k + 1;
        let a_bar = self.transition(k).map_err(|e| Error::at_step(k, e))?;
        let pred = kalman_predict(&self.state, &a_bar, &self.noise.sigma(self.b.len()))?;
        self.state = kalman_update(&pred, y, &self.b, self.noise.sigma2)
            .map_err(|e| Error::at_step(k, e))?;
        Ok(&self.state)
    }
}

fn check_latent_scheme(scheme: Scheme) -> Result<()> {
    if scheme == Scheme::TrapezoidalLssl {
        return Err(Error::input(
            "trapezoidal_lssl is a HiPPO discretization; the latent dynamics take closed_form, forward, backward or trapezoidal",
        ));
    }
    Ok(())
}

fn latent_transition(a_r: &Matrix, k: usize, scheme: Scheme) -> Result<Matrix> {
    if k <= 1 {
        return Ok(Matrix::identity(a_r.rows()));
    }
    transition_for(a_r, (k - 1) as f64, k as f64, scheme)
}

fn check_psd(p: &Matrix) -> Result<()> {
    if cholesky(&p.add_identity(PSD_TOLERANCE)).is_ok() {
        return Ok(());
    }
    let min = min_eigenvalue_symmetric(p)?;
    if min < -PSD_TOLERANCE {
        return Err(Error::numeric(format!(
            "posterior covariance lost positive semi-definiteness (min eigenvalue {min:e})"
        )));
    }
    Ok(())
}

enum StreamState {
    Hippo(HippoSystem),
    Unhippo { a_r: Matrix, b: Vec<f64>, p: Matrix },
}

/// Generates the transition pairs of a bank one step at a time, so long
/// sequences can be processed without holding every pair in memory.
///
/// UnHiPPO pairs come from the covariance recursion started at the `N(0, I)`
/// prior with `Ā_{R,k}` from `scheme` (the first step uses `Ā_{R,1} = I`).
/// HiPPO pairs are the discretization of the step `t_{k−1} → t_k` with
/// `Δt = 1`; for schemes that evaluate the dynamics at `t_0 = 0` the first
/// pair is `(I, 0)`.
pub struct PairStream {
    n: usize,
    k: usize,
    scheme: Scheme,
    noise: NoiseConfig,
    state: StreamState,
}

impl PairStream {
    pub fn new(n: usize, kind: BankKind, noise: NoiseConfig, scheme: Scheme) -> Result<Self> {
        noise.validate()?;
        let sys = make_hippo(n)?;
        let state = match kind {
            BankKind::Unhippo => {
                check_latent_scheme(scheme)?;
                let reg = make_regularized(&sys)?;
                StreamState::Unhippo {
                    a_r: reg.a_r,
                    b: reg.b,
                    p: Matrix::identity(n),
                }
            }
            BankKind::Hippo => {
                if scheme == Scheme::ClosedForm {
                    return Err(Error::input(
                        "closed_form is only available for UnHiPPO banks",
                    ));
                }
                StreamState::Hippo(sys)
            }
        };
        Ok(Self {
            n,
            k: 0,
            scheme,
            noise,
            state,
        })
    }

    /// Index of the most recently produced pair.
    pub fn step(&self) -> usize {
        self.k
    }

    /// Posterior covariance after the last UnHiPPO step.
    pub fn covariance(&self) -> Option<&Matrix> {
        match &self.state {
            StreamState::Unhippo { p, .. } => Some(p),
            StreamState::Hippo(_) => None,
        }
    }

    /// Pair for the next step.
    pub fn next_pair(&mut self) -> Result<TransitionPair> {
        let k = self.k + 1;
        let pair = match &mut self.state {
            StreamState::Unhippo { a_r, b, p } => {
                let prev = KalmanState {
                    k: k - 1,
                    m: Vec::new(),
                    p: std::mem::replace(p, Matrix::zeros(0, 0)),
                };
                let step = latent_transition(a_r, k, self.scheme)
                    .and_then(|a_bar| extract_unhippo_pair(&prev, &a_bar, b, &self.noise))
                    .and_then(|step| check_psd(&step.p).map(|_| step))
                    .map_err(|e| Error::at_step(k, e))?;
                if !step.a_u.is_finite() || step.b_u.iter().any(|v| !v.is_finite()) {
                    return Err(Error::at_step(k, Error::numeric("non-finite UnHiPPO pair")));
                }
                *p = step.p;
                TransitionPair {
                    a: step.a_u,
                    b: step.b_u,
                }
            }
            StreamState::Hippo(sys) => {
                let singular_start = k == 1 && matches!(self.scheme, Scheme::Forward | Scheme::Trapezoidal);
                if singular_start {
                    TransitionPair {
                        a: Matrix::identity(self.n),
                        b: vec![0.0; self.n],
                    }
                } else {
                    let d = discretize_hippo(sys, self.scheme, (k - 1) as f64, 1.0)
                        .map_err(|e| Error::at_step(k, e))?;
                    TransitionPair {
                        b: d.input_vector(),
                        a: d.a_bar,
                    }
                }
            }
        };
        self.k = k;
        Ok(pair)
    }
}

/// Builds the transition pairs for steps `1..=t_max`; see [`PairStream`].
pub fn build_init_bank(
    n: usize,
    t_max: usize,
    kind: BankKind,
    noise: NoiseConfig,
    scheme: Scheme,
) -> Result<InitBank> {
    build_init_bank_with(n, t_max, kind, noise, scheme, |_, _| {})
}

/// [`build_init_bank`] with a callback that sees every posterior covariance
/// of an UnHiPPO build (never called for HiPPO banks).
pub fn build_init_bank_with(
    n: usize,
    t_max: usize,
    kind: BankKind,
    noise: NoiseConfig,
    scheme: Scheme,
    mut on_covariance: impl FnMut(usize, &Matrix),
) -> Result<InitBank> {
    if t_max == 0 {
        return Err(Error::input("t_max must be at least 1"));
    }
    let mut stream = PairStream::new(n, kind, noise, scheme)?;
    let mut pairs = Vec::with_capacity(t_max);
    for k in 1..=t_max {
        pairs.push(stream.next_pair()?);
        if let Some(p) = stream.covariance() {
            on_covariance(k, p);
        }
    }
    Ok(InitBank {
        n,
        t_max,
        kind,
        pairs,
        meta: BankMeta {
            sigma2: noise.sigma2,
            process_scale: noise.process_scale,
            scheme,
            created_by: tool_version(),
        },
    })
}

/// Step indices `⌊t_i⌋` for `h` times spaced log-uniformly over
/// `[t_min, t_max]`.
pub fn timescale_indices(h: usize, t_min: f64, t_max: f64) -> Result<Vec<usize>> {
    if h == 0 {
        return Err(Error::input("need at least one timescale"));
    }
    if !(t_min >= 1.0 && t_max >= t_min && t_max.is_finite()) {
        return Err(Error::input(format!(
            "timescale range [{t_min}, {t_max}] must satisfy 1 <= t_min <= t_max"
        )));
    }
    if h == 1 {
        return Ok(vec![t_min.floor() as usize]);
    }
    let (lo, hi) = (t_min.ln(), t_max.ln());
    Ok((0..h)
        .map(|i| {
            let t = if i == h - 1 {
                t_max
            } else {
                (lo + (hi - lo) * i as f64 / (h - 1) as f64).exp()
            };
            // Grid points that land on an integer must not round down past it.
            (t * (1.0 + 1e-12)).floor() as usize
        })
        .collect())
}

/// Pairs at the log-uniform timescales, one per input feature.
pub fn select_timescales(bank: &InitBank, h: usize, t_min: f64, t_max: f64) -> Result<Vec<TransitionPair>> {
    if t_max > bank.t_max as f64 {
        return Err(Error::input(format!(
            "t_max {t_max} exceeds the bank's {} steps",
            bank.t_max
        )));
    }
    timescale_indices(h, t_min, t_max)?
        .into_iter()
        .map(|k| bank.pair(k).cloned())
        .collect()
}
