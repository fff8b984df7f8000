//! Online reconstruction of a sampled signal with a HiPPO or UnHiPPO bank.
//!
//! Samples are treated as arriving at `t_k = k`. After each step the
//! reconstruction is read off at the current horizon, `f̂(t_k) = B_Hᵀ c_k`.

use crate::error::Result;
use crate::hippo::{make_hippo, Scheme};
use crate::kalman::{BankKind, NoiseConfig, PairStream};
use crate::matfun::dot;
use crate::signals::{mse, SignalTrace};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DenoiseConfig {
    pub n: usize,
    pub kind: BankKind,
    pub noise: NoiseConfig,
    /// Defaults to the kind's usual scheme.
    pub scheme: Option<Scheme>,
}

impl DenoiseConfig {
    pub fn new(n: usize, kind: BankKind, sigma2: f64) -> Self {
        Self {
            n,
            kind,
            noise: NoiseConfig {
                sigma2,
                ..NoiseConfig::default()
            },
            scheme: None,
        }
    }
}

/// Horizon reconstruction after every sample.
pub fn reconstruct_online(values: &[f64], cfg: &DenoiseConfig) -> Result<Vec<f64>> {
    let scheme = cfg.scheme.unwrap_or(cfg.kind.default_scheme());
    let mut stream = PairStream::new(cfg.n, cfg.kind, cfg.noise, scheme)?;
    let b = make_hippo(cfg.n)?.b;
    let mut c = vec![0.0; cfg.n];
    let mut out = Vec::with_capacity(values.len());
    for &y in values {
        c = stream.next_pair()?.apply(&c, y);
        out.push(dot(&b, &c));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenoiseReport {
    pub recon: Vec<f64>,
    pub mse_clean: f64,
    pub mse_noisy: f64,
}

/// Reconstructs the noisy column and scores it against both columns.
pub fn denoise_trace(trace: &SignalTrace, cfg: &DenoiseConfig) -> Result<DenoiseReport> {
    let recon = reconstruct_online(&trace.noisy, cfg)?;
    Ok(DenoiseReport {
        mse_clean: mse(&recon, &trace.clean)?,
        mse_noisy: mse(&recon, &trace.noisy)?,
        recon,
    })
}
