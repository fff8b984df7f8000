//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use unhippo::denoise::{denoise_trace, reconstruct_online, DenoiseConfig};
use unhippo::hippo::{discretize_hippo, make_hippo, Scheme};
use unhippo::kalman::{build_init_bank, BankKind, LatentFilter, NoiseConfig};
use unhippo::legendre::{linspace, reconstruct, Basis, CoefVector};
use unhippo::matfun::{norm2, solve, Matrix};
use unhippo::signals::{add_noise, roughness, sample_gp, sample_gp_default, DEFAULT_POINTS, DEFAULT_T_END};
use unhippo::ssm::{krylov_conv, krylov_kernel, ssm_recurrence, SsmCore};
use unhippo::unhippo_dyn::{make_regularized, time_transitions};

type Check = unhippo::Result<(bool, String)>;

fn main() -> ExitCode {
    let checks: [(&str, fn() -> Check); 12] = [
        ("hippo_identity", hippo_identity),
        ("basis_orthonormality", basis_orthonormality),
        ("kalman_oracle", kalman_oracle),
        ("regrouping", regrouping),
        ("covariance_data_independence", covariance_data_independence),
        ("time_invariant_compression", time_invariant_compression),
        ("discretization_stability", discretization_stability),
        ("denoising_paired", denoising_paired),
        ("sigma2_monotonicity", sigma2_monotonicity),
        ("recurrence_krylov", recurrence_krylov),
        ("scheme_timing_orderings", scheme_timing_orderings),
        ("polynomial_exactness", polynomial_exactness),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let (ok, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let secs = start.elapsed().as_secs_f64();
        println!("{} {name}: {detail} ({secs:.2}s)", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", checks.len() - failed, checks.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn hippo_identity() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for n in [2, 8, 64, 256] {
        let sys = make_hippo(n)?;
        let lhs = Matrix::outer(&sys.b, &sys.b).sub(&sys.a)?;
        let rhs = sys.a.transpose().add_identity(-1.0);
        worst = worst.max(lhs.max_abs_diff(&rhs));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((worst < 1e-10 && secs < 1.0, format!("max error {worst:.2e}, {secs:.3}s")))
}

fn basis_orthonormality() -> Check {
    // Composite Simpson on 10^4 + 1 nodes over [0, t].
    let (n, t, nodes) = (16, 2.5, 10_001);
    let basis = Basis::new(n, t)?;
    let h = t / (nodes - 1) as f64;
    let mut gram = Matrix::zeros(n, n);
    for (k, tau) in linspace(0.0, t, nodes).into_iter().enumerate() {
        let simpson = match k {
            0 => 1.0,
            k if k == nodes - 1 => 1.0,
            k if k % 2 == 1 => 4.0,
            _ => 2.0,
        };
        let w = simpson * h / (3.0 * t);
        let g = basis.eval_all(tau);
        for i in 0..n {
            for j in 0..n {
                gram[(i, j)] += w * g[i] * g[j];
            }
        }
    }
    let err = gram.max_abs_diff(&Matrix::identity(n));
    Ok((err < 1e-6, format!("max |G - I| = {err:.2e}")))
}

/// Posterior of every `x_k` given `y_1..y_k` by conditioning the joint
/// Gaussian of `z = (x_0, w_1, .., w_T)` and the observations.
fn kalman_oracle() -> Check {
    let (n, steps, sigma2, q) = (6, 8, 0.05, 0.3);
    let noise = NoiseConfig::new(sigma2, q)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let ys: Vec<f64> = (0..steps).map(|_| rng.random_range(-2.0..2.0)).collect();

    let mut filter = LatentFilter::new(n, noise, Scheme::ClosedForm)?;
    let b = filter.b().to_vec();
    let dim = n * (steps + 1);
    let z_cov = Matrix::from_fn(dim, dim, |i, j| match (i == j, i < n) {
        (true, true) => 1.0,
        (true, false) => q,
        _ => 0.0,
    });

    // x_k = M_k z, y_k = h_k z + v_k.
    let mut m = Matrix::from_fn(n, dim, |i, j| if i == j { 1.0 } else { 0.0 });
    let mut h_rows: Vec<Vec<f64>> = Vec::new();
    let mut worst = 0.0f64;
    for k in 1..=steps {
        let a = filter.transition(k)?;
        m = a.matmul(&m)?;
        for i in 0..n {
            m[(i, k * n + i)] += 1.0;
        }
        h_rows.push(m.tr_matvec(&b)?);
        let state = filter.step(ys[k - 1])?.clone();

        let h = Matrix::from_fn(k, dim, |r, c| h_rows[r][c]);
        let zh = z_cov.matmul(&h.transpose())?;
        let s = h.matmul(&zh)?.add_identity(sigma2);
        let mzh = m.matmul(&zh)?;
        let gain_t = solve(&s, &mzh.transpose())?;
        let mean = gain_t.tr_matvec(&ys[..k])?;
        let cov = m.matmul(&z_cov)?.matmul(&m.transpose())?.sub(&mzh.matmul(&gain_t)?)?;

        let mean_err = mean.iter().zip(&state.m).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(mean_err).max(cov.max_abs_diff(&state.p));
    }
    Ok((worst < 1e-8, format!("n = {n}, T = {steps}, max error {worst:.2e}")))
}

fn regrouping() -> Check {
    let (n, steps) = (128, 1000);
    let noise = NoiseConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let ys: Vec<f64> = (0..steps).map(|_| rng.random_range(-1.0..1.0)).collect();
    let bank = build_init_bank(n, steps, BankKind::Unhippo, noise, Scheme::ClosedForm)?;
    let regrouped = bank.run(&ys)?;
    let mut filter = LatentFilter::new(n, noise, Scheme::ClosedForm)?;
    let mut worst = 0.0f64;
    for (k, &y) in ys.iter().enumerate() {
        let m = &filter.step(y)?.m;
        let c = &regrouped[k];
        worst = worst.max(m.iter().zip(c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    Ok((worst < 1e-10, format!("n = {n}, {steps} steps, max error {worst:.2e}")))
}

fn covariance_data_independence() -> Check {
    let (n, steps) = (32, 200);
    let noise = NoiseConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut f1 = LatentFilter::new(n, noise, Scheme::ClosedForm)?;
    let mut f2 = LatentFilter::new(n, noise, Scheme::ClosedForm)?;
    let mut identical = true;
    for _ in 0..steps {
        let p1 = f1.step(rng.random_range(-1.0..1.0))?.p.clone();
        let p2 = &f2.step(rng.random_range(-5.0..5.0) + 100.0)?.p;
        identical &= p1.as_slice().iter().zip(p2.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits());
    }
    Ok((identical, format!("n = {n}, {steps} steps, bitwise identical = {identical}")))
}

/// Peak position of an encoded bump after 250 data-free applications of the
/// step-500 UnHiPPO matrix, against the predicted `(499/500)^250`.
fn time_invariant_compression() -> Check {
    let (n, k, steps, x0, width) = (64, 500, 250, 0.5, 0.04);
    let bank = build_init_bank(n, k, BankKind::Unhippo, NoiseConfig::default(), Scheme::ClosedForm)?;
    let a = &bank.pair(k)?.a;
    let basis = Basis::new(n, 1.0)?;
    let grid = linspace(0.0, 1.0, 20_001);
    let samples: Vec<(f64, f64)> = grid.iter().map(|&x| (x, (-0.5 * ((x - x0) / width).powi(2)).exp())).collect();
    let mut c = unhippo::legendre::project(&basis, &samples)?.c;
    for _ in 0..steps {
        c = a.matvec(&c)?;
    }
    let after = reconstruct(&basis, &CoefVector::new(1.0, c)?, &grid)?;
    let peak = after.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| grid[i]).unwrap_or(0.0);
    let measured = peak / x0;
    let predicted = ((k - 1) as f64 / k as f64).powi(steps as i32);
    let rel = (measured - predicted).abs() / predicted;
    Ok((rel < 0.02, format!("predicted {predicted:.4}, measured {measured:.4}, rel error {rel:.2e}")))
}

/// Repeated application of the step-10 UnHiPPO matrix to the state left by
/// filtering a smooth signal for ten steps.
fn discretization_stability() -> Check {
    let start = Instant::now();
    let (n, k, apps) = (64, 10, 250);
    let ys: Vec<f64> = (1..=k).map(|i| (0.3 * i as f64).sin()).collect();
    let closed = build_init_bank(n, k, BankKind::Unhippo, NoiseConfig::default(), Scheme::ClosedForm)?;
    let trap = build_init_bank(n, k, BankKind::Unhippo, NoiseConfig::default(), Scheme::Trapezoidal)?;
    let c0 = closed.run(&ys)?.pop().unwrap_or_default();
    let growth = |a: &Matrix| -> unhippo::Result<f64> {
        let mut c = c0.clone();
        let mut worst = 1.0f64;
        for _ in 0..apps {
            c = a.matvec(&c)?;
            let g = norm2(&c) / norm2(&c0);
            worst = if g.is_finite() { worst.max(g) } else { f64::INFINITY };
        }
        Ok(worst)
    };
    let g_closed = growth(&closed.pair(k)?.a)?;
    let g_trap = growth(&trap.pair(k)?.a)?;
    let secs = start.elapsed().as_secs_f64();
    Ok((
        g_closed <= 10.0 && g_trap >= 1e3 && secs < 10.0,
        format!("closed_form max growth {g_closed:.3}, trapezoidal {g_trap:.2e}, {secs:.2}s"),
    ))
}

fn denoising_paired() -> Check {
    let mut wins = 0;
    for s in 0..20u64 {
        let clean = sample_gp(DEFAULT_POINTS, DEFAULT_T_END, DEFAULT_T_END / 10.0, s)?;
        let trace = add_noise(&clean, 0.1, 1000 + s)?;
        let hippo = denoise_trace(&trace, &DenoiseConfig::new(64, BankKind::Hippo, 1e10))?;
        let unhippo = denoise_trace(&trace, &DenoiseConfig::new(64, BankKind::Unhippo, 1e10))?;
        if unhippo.mse_clean < hippo.mse_clean {
            wins += 1;
        }
    }
    Ok((wins >= 18, format!("UnHiPPO better on {wins}/20 traces")))
}

fn sigma2_monotonicity() -> Check {
    let trace = add_noise(&sample_gp_default(0)?, 0.1, 1)?;
    let mut rough = Vec::new();
    for s2 in [1e6, 1e8, 1e10, 1e12] {
        rough.push(roughness(&reconstruct_online(&trace.noisy, &DenoiseConfig::new(64, BankKind::Unhippo, s2))?));
    }
    let inversions = rough.windows(2).filter(|w| w[1] > w[0]).count();
    let shown: Vec<String> = rough.iter().map(|r| format!("{r:.3e}")).collect();
    Ok((inversions <= 1, format!("roughness [{}], {inversions} inversions", shown.join(", "))))
}

fn recurrence_krylov() -> Check {
    let (len, cores) = (1024, 50);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..cores {
        let n = rng.random_range(2..=16usize);
        let m = rng.random_range(1..=4usize);
        let raw = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        // Scale so the induced 1-norm is below one and powers stay bounded.
        let a = raw.scale(rng.random_range(0.5..0.98) / raw.norm_1());
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = Matrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let d: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let core = SsmCore::new(a, b, c, d)?;
        let u: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (rec, _) = ssm_recurrence(&core, &u, &vec![0.0; n])?;
        let conv = krylov_conv(&krylov_kernel(&core, len)?, &u, &core.d)?;
        worst = worst.max(rec.max_abs_diff(&conv));
    }
    Ok((worst < 1e-8, format!("{cores} cores, L = {len}, max error {worst:.2e}")))
}

fn scheme_timing_orderings() -> Check {
    let reg = make_regularized(&make_hippo(256)?)?;
    let schemes = [Scheme::ClosedForm, Scheme::Trapezoidal, Scheme::Forward, Scheme::Backward];
    let times = time_transitions(&reg, 499.0, &schemes, 5)?;
    let fastest = times.iter().min_by(|a, b| a.1.total_cmp(&b.1)).map(|t| t.0);
    let ratio = times[0].1 / times[1].1;
    let shown: Vec<String> = times.iter().map(|(s, ms)| format!("{s} {ms:.3}ms")).collect();
    Ok((
        fastest == Some(Scheme::Forward) && ratio < 10.0,
        format!("{}, closed_form/trapezoidal {ratio:.2}", shown.join(", ")),
    ))
}

/// Trapezoidal HiPPO over a dense grid on `[t_0, 1]`, started from the
/// exact coefficients at `t_0`, against the direct projection at `t = 1`.
fn polynomial_exactness() -> Check {
    let (n, len, t0) = (8, 20_000, 1e-3);
    let f = |x: f64| (0..n).fold(0.0, |acc, i| acc * x + (i as f64 + 1.0) * if i % 2 == 0 { 1.0 } else { -1.0 });
    let sys = make_hippo(n)?;
    let project_at = |t: f64| -> unhippo::Result<Vec<f64>> {
        let samples: Vec<(f64, f64)> = linspace(0.0, t, 200_001).into_iter().map(|x| (x, f(x))).collect();
        Ok(unhippo::legendre::project(&Basis::new(n, t)?, &samples)?.c)
    };
    let times = linspace(t0, 1.0, len);
    let mut c = project_at(t0)?;
    for w in times.windows(2) {
        let pair = discretize_hippo(&sys, Scheme::Trapezoidal, w[0], w[1] - w[0])?;
        c = pair.step(&c, f(w[0]), f(w[1]))?;
    }
    let direct = project_at(1.0)?;
    let err = c.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok((err < 1e-3, format!("degree {}, {len} samples, max coefficient error {err:.2e}", n - 1)))
}
