//! Synthetic test signals, noise injection and reconstruction metrics.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::legendre::linspace;
use crate::matfun::{cholesky, Matrix};

/// Generator behind every seeded draw in this module.
pub const RNG_NAME: &str = "ChaCha8 (rand_chacha), standard normals via rand_distr";

pub const DEFAULT_POINTS: usize = 250;
pub const DEFAULT_T_END: f64 = 10.0;

const JITTER_START: f64 = 1e-9;
const JITTER_MAX: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct SignalTrace {
    pub taus: Vec<f64>,
    pub clean: Vec<f64>,
    pub noisy: Vec<f64>,
    /// Standard deviation of the added noise.
    pub rho: f64,
    /// Seed of the clean signal.
    pub seed: u64,
    /// Seed of the noise draw, if any was added.
    pub noise_seed: Option<u64>,
}

impl SignalTrace {
    pub fn new(taus: Vec<f64>, clean: Vec<f64>, noisy: Vec<f64>) -> Result<Self> {
        if taus.len() != clean.len() || taus.len() != noisy.len() {
            return Err(Error::input(format!(
                "trace columns have lengths {}, {}, {}",
                taus.len(),
                clean.len(),
                noisy.len()
            )));
        }
        if taus.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::input("trace times must be strictly increasing"));
        }
        Ok(Self {
            taus,
            clean,
            noisy,
            rho: 0.0,
            seed: 0,
            noise_seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }
}

/// Squared-exponential kernel `exp(−(τ−τ')² / (2ℓ²))`.
pub fn se_kernel(a: f64, b: f64, length_scale: f64) -> f64 {
    let d = (a - b) / length_scale;
    (-0.5 * d * d).exp()
}

/// Draws a zero-mean GP sample with the squared-exponential kernel on
/// `num_points` equispaced points of `[0, t_end]`.
pub fn sample_gp(num_points: usize, t_end: f64, length_scale: f64, seed: u64) -> Result<SignalTrace> {
    if num_points < 2 {
        return Err(Error::input("need at least two points"));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::input(format!("t_end must be positive, got {t_end}")));
    }
    if !(length_scale > 0.0 && length_scale.is_finite()) {
        return Err(Error::input(format!(
            "length scale must be positive, got {length_scale}"
        )));
    }
    let taus = linspace(0.0, t_end, num_points);
    let k = Matrix::from_fn(num_points, num_points, |i, j| se_kernel(taus[i], taus[j], length_scale));
    let mut jitter = JITTER_START;
    let l = loop {
        match cholesky(&k.add_identity(jitter)) {
            Ok(l) => break l,
            Err(_) if jitter < JITTER_MAX => jitter *= 10.0,
            Err(e) => {
                return Err(Error::numeric(format!(
                    "GP covariance not positive definite even with jitter {jitter:e}: {e}"
                )))
            }
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..num_points).map(|_| StandardNormal.sample(&mut rng)).collect();
    let clean = l.matvec(&z)?;
    Ok(SignalTrace {
        taus,
        noisy: clean.clone(),
        clean,
        rho: 0.0,
        seed,
        noise_seed: None,
    })
}

/// GP sample with the default grid and `ℓ = t_end / 10`.
pub fn sample_gp_default(seed: u64) -> Result<SignalTrace> {
    sample_gp(DEFAULT_POINTS, DEFAULT_T_END, DEFAULT_T_END / 10.0, seed)
}

/// Replaces the noisy column with `clean + N(0, ρ²)` draws.
pub fn add_noise(trace: &SignalTrace, rho: f64, seed: u64) -> Result<SignalTrace> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::input(format!("rho must be non-negative, got {rho}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy = trace
        .clean
        .iter()
        .map(|&c| {
            let z: f64 = StandardNormal.sample(&mut rng);
            c + rho * z
        })
        .collect();
    Ok(SignalTrace {
        noisy,
        rho,
        noise_seed: Some(seed),
        ..trace.clone()
    })
}

pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::input(format!(
            "mse of sequences with lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::input("mse of empty sequences"));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// Mean squared second difference, a simple measure of how wiggly a
/// sequence is.
pub fn roughness(values: &[f64]) -> f64 {
    if values.len() < 3 {
        return 0.0;
    }
    let sum: f64 = values
        .windows(3)
        .map(|w| {
            let d = w[2] - 2.0 * w[1] + w[0];
            d * d
        })
        .sum();
    sum / (values.len() - 2) as f64
}

pub(crate) fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_trace_csv(path: &Path, trace: &SignalTrace) -> Result<()> {
    let io = |e: csv::Error| Error::Io {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["tau", "clean", "noisy"]).map_err(io)?;
    for i in 0..trace.len() {
        w.write_record([
            fmt_float(trace.taus[i]),
            fmt_float(trace.clean[i]),
            fmt_float(trace.noisy[i]),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn read_trace_csv(path: &Path) -> Result<SignalTrace> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    let headers = r
        .headers()
        .map_err(|e| Error::format("header", e.to_string()))?
        .clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["tau", "clean", "noisy"] {
        return Err(Error::format(
            "header",
            format!("expected 'tau,clean,noisy', got '{}'", headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let (mut taus, mut clean, mut noisy) = (Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(format!("row {}", row + 1), e.to_string()))?;
        let mut vals = [0.0f64; 3];
        for (col, v) in vals.iter_mut().enumerate() {
            let field = rec.get(col).unwrap_or("").trim();
            *v = field.parse().map_err(|_| {
                Error::format(format!("row {} column {}", row + 1, headers[col].trim()), format!("'{field}' is not a number"))
            })?;
            if !v.is_finite() {
                return Err(Error::format(format!("row {} column {}", row + 1, headers[col].trim()), "value is not finite"));
            }
        }
        taus.push(vals[0]);
        clean.push(vals[1]);
        noisy.push(vals[2]);
    }
    if taus.is_empty() {
        return Err(Error::format("rows", "trace has no data rows"));
    }
    SignalTrace::new(taus, clean, noisy).map_err(|e| Error::format("tau", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_dev(v: &[f64]) -> f64 {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
    }

    #[test]
    fn gp_is_deterministic() {
        let a = sample_gp_default(3).unwrap();
        let b = sample_gp_default(3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.clean, sample_gp_default(4).unwrap().clean);
        assert_eq!(a.len(), 250);
        assert_eq!(a.taus[249], 10.0);
    }

    #[test]
    fn long_length_scale_is_flat() {
        let tr = sample_gp(100, 10.0, 1e7, 1).unwrap();
        let diffs: Vec<f64> = tr.clean.windows(2).map(|w| w[1] - w[0]).collect();
        let spread = std_dev(&diffs);
        let level = tr.clean.iter().map(|v| v * v).sum::<f64>().sqrt() / 10.0;
        assert!(spread < 1e-3 * level.max(std_dev(&tr.clean)));
    }

    #[test]
    fn gp_covariance_monte_carlo() {
        let (i, j) = (10, 14);
        let seeds = 2000;
        let mut acc = 0.0;
        let mut var = 0.0;
        for s in 0..seeds {
            let tr = sample_gp(30, 3.0, 0.5, s).unwrap();
            acc += tr.clean[i] * tr.clean[j];
            var += tr.clean[i] * tr.clean[i];
        }
        let taus = linspace(0.0, 3.0, 30);
        let want = se_kernel(taus[i], taus[j], 0.5);
        assert!((acc / seeds as f64 - want).abs() < 0.05 * want, "{} vs {want}", acc / seeds as f64);
        assert!((var / seeds as f64 - 1.0).abs() < 0.1);
    }

    #[test]
    fn gp_validation() {
        assert!(sample_gp(1, 1.0, 1.0, 0).is_err());
        assert!(sample_gp(10, 1.0, 0.0, 0).is_err());
        assert!(sample_gp(10, -1.0, 1.0, 0).is_err());
    }

    #[test]
    fn noise_statistics() {
        let tr = sample_gp_default(1).unwrap();
        assert_eq!(add_noise(&tr, 0.0, 9).unwrap().noisy, tr.clean);
        let a = add_noise(&tr, 0.1, 9).unwrap();
        let b = add_noise(&tr, 0.1, 10).unwrap();
        assert_ne!(a.noisy, b.noisy);
        assert_eq!(a.clean, b.clean);
        assert!(add_noise(&tr, -1.0, 0).is_err());

        let flat = SignalTrace::new(
            (0..100_000).map(|i| i as f64).collect(),
            vec![0.0; 100_000],
            vec![0.0; 100_000],
        )
        .unwrap();
        let noisy = add_noise(&flat, 0.3, 5).unwrap();
        assert!((std_dev(&noisy.noisy) - 0.3).abs() < 0.02 * 0.3);
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(mse(&[0.0, 2.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(mse(&[0.3, -2.0], &[4.0, 1.0]).unwrap(), mse(&[4.0, 1.0], &[0.3, -2.0]).unwrap());
        assert!(mse(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn roughness_examples() {
        assert_eq!(roughness(&[1.0, 2.0, 3.0, 4.0]), 0.0);
        assert_eq!(roughness(&[0.0, 1.0, 0.0]), 4.0);
        assert_eq!(roughness(&[5.0]), 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let tr = add_noise(&sample_gp_default(2).unwrap(), 0.1, 3).unwrap();
        write_trace_csv(&path, &tr).unwrap();
        let back = read_trace_csv(&path).unwrap();
        assert_eq!(back.taus, tr.taus);
        assert_eq!(back.clean, tr.clean);
        assert_eq!(back.noisy, tr.noisy);
    }

    #[test]
    fn csv_rejects_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        for body in [
            "t,clean,noisy\n0,1,1\n",
            "tau,clean,noisy\n0,1,x\n",
            "tau,clean,noisy\n0,1,1\n0,2,2\n",
            "tau,clean,noisy\n",
            "tau,clean,noisy\n0,1\n",
        ] {
            std::fs::write(&path, body).unwrap();
            assert!(matches!(read_trace_csv(&path), Err(Error::Format { .. })), "{body:?}");
        }
        assert!(matches!(read_trace_csv(&dir.path().join("missing.csv")), Err(Error::Io { .. })));
    }
}
