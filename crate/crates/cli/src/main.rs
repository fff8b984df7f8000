use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use unhippo::denoise::{denoise_trace, DenoiseConfig};
use unhippo::exchange::write_bank;
use unhippo::hippo::{make_hippo, Scheme};
use unhippo::kalman::{build_init_bank, BankKind, NoiseConfig};
use unhippo::signals::{add_noise, read_trace_csv, sample_gp, write_trace_csv, DEFAULT_POINTS, DEFAULT_T_END};
use unhippo::unhippo_dyn::{make_regularized, time_transitions};

mod figures;
mod plot;

#[derive(Parser)]
#[command(name = "unhippo", version, about = "HiPPO and UnHiPPO initializations for state space models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Hippo,
    Unhippo,
}

impl From<Kind> for BankKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Hippo => BankKind::Hippo,
            Kind::Unhippo => BankKind::Unhippo,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum SchemeArg {
    Forward,
    Backward,
    Trapezoidal,
    TrapezoidalLssl,
    ClosedForm,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Forward => Scheme::Forward,
            SchemeArg::Backward => Scheme::Backward,
            SchemeArg::Trapezoidal => Scheme::Trapezoidal,
            SchemeArg::TrapezoidalLssl => Scheme::TrapezoidalLssl,
            SchemeArg::ClosedForm => Scheme::ClosedForm,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build an initialization bank and write it as a container file.
    GenInit {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        t_max: u64,
        #[arg(long, default_value_t = 1e10)]
        sigma2: f64,
        #[arg(long, default_value_t = 1.0)]
        process_scale: f64,
        /// Defaults to closed_form for unhippo and trapezoidal_lssl for hippo.
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct the noisy column of a trace CSV online.
    Denoise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, default_value_t = 1e10)]
        sigma2: f64,
        #[arg(long, value_enum, default_value = "unhippo")]
        kind: Kind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the data and an SVG rendering for one figure.
    Figures {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(figures::SELECTORS))]
        which: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "UNHIPPO_SEED", default_value_t = 0)]
        seed: u64,
    },
    /// Time one transition-matrix construction per scheme.
    BenchDisc {
        #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, default_value_t = 7, value_parser = clap::value_parser!(u64).range(1..))]
        reps: u64,
        /// The timed step goes from t = k - 1 to t = k.
        #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(2..))]
        k: u64,
    },
    /// Sample a Gaussian-process trace with additive noise.
    GenTrace {
        #[arg(long, default_value_t = DEFAULT_POINTS as u64, value_parser = clap::value_parser!(u64).range(2..))]
        points: u64,
        #[arg(long, default_value_t = DEFAULT_T_END)]
        t_end: f64,
        /// Defaults to t_end / 10.
        #[arg(long)]
        length_scale: Option<f64>,
        #[arg(long, default_value_t = 0.1)]
        rho: f64,
        #[arg(long, env = "UNHIPPO_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Usage or validation problem, reported with exit code 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.is::<Usage>() {
        return 2;
    }
    match err.downcast_ref::<unhippo::Error>() {
        Some(e) if e.is_numeric() => 1,
        Some(unhippo::Error::Io { .. }) => 1,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::GenInit {
            kind,
            n,
            t_max,
            sigma2,
            process_scale,
            scheme,
            out,
        } => {
            let kind = BankKind::from(kind);
            let scheme = scheme.map(Scheme::from).unwrap_or(kind.default_scheme());
            if kind == BankKind::Hippo && scheme == Scheme::ClosedForm {
                bail!(usage("closed_form exists only for the UnHiPPO dynamics"));
            }
            if kind == BankKind::Unhippo && scheme == Scheme::TrapezoidalLssl {
                bail!(usage("trapezoidal_lssl applies to hippo banks only"));
            }
            let noise = NoiseConfig::new(sigma2, process_scale).map_err(|e| usage(e.to_string()))?;
            info!("building {kind} bank, n = {n}, t_max = {t_max}, scheme = {scheme}");
            let bank = build_init_bank(n as usize, t_max as usize, kind, noise, scheme)?;
            write_bank(&out, &bank)?;
            println!("kind={kind} n={n} t_max={t_max} scheme={scheme} tensors={}", 2 * t_max);
        }
        Command::Denoise {
            input,
            n,
            sigma2,
            kind,
            out,
        } => {
            let trace = read_trace_csv(&input).map_err(|e| usage(e.to_string()))?;
            let cfg = DenoiseConfig::new(n as usize, kind.into(), sigma2);
            cfg.noise.validate().map_err(|e| usage(e.to_string()))?;
            let rep = denoise_trace(&trace, &cfg)?;
            let mut csv = String::from("tau,recon\n");
            for (t, r) in trace.taus.iter().zip(&rep.recon) {
                csv.push_str(&format!("{t:.16e},{r:.16e}\n"));
            }
            fs::write(&out, csv).with_context(|| format!("writing {}", out.display()))?;
            println!("mse_clean={:e} mse_noisy={:e}", rep.mse_clean, rep.mse_noisy);
        }
        Command::Figures { which, out, seed } => {
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let fig = figures::build(&which, seed)?;
            for p in &fig.plots {
                for path in p.write(&out)? {
                    info!("wrote {}", path.display());
                }
            }
            println!("figure={which} seed={seed} plots={}", fig.plots.len());
            for (k, v) in fig.summary {
                println!("{k}={v}");
            }
        }
        Command::BenchDisc { n, reps, k } => {
            let reg = make_regularized(&make_hippo(n as usize)?)?;
            let schemes = [Scheme::ClosedForm, Scheme::Trapezoidal, Scheme::Forward, Scheme::Backward];
            let times = time_transitions(&reg, (k - 1) as f64, &schemes, reps as usize)?;
            println!("{:<14} {:>12}", "scheme", "median ms");
            for (s, ms) in &times {
                println!("{:<14} {:>12.3}", s.name(), ms);
            }
            for (s, ms) in &times {
                println!("median_ms_{}={ms:.6}", s.name());
            }
            let fastest = times.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
            println!("fastest={fastest}");
            println!("ratio_closed_form_trapezoidal={:.4}", times[0].1 / times[1].1);
        }
        Command::GenTrace {
            points,
            t_end,
            length_scale,
            rho,
            seed,
            out,
        } => {
            let ell = length_scale.unwrap_or(t_end / 10.0);
            let clean = sample_gp(points as usize, t_end, ell, seed)?;
            let trace = add_noise(&clean, rho, seed.wrapping_add(1))?;
            write_trace_csv(&out, &trace)?;
            println!("points={points} t_end={t_end} length_scale={ell} rho={rho} seed={seed}");
        }
    }
    Ok(())
}
