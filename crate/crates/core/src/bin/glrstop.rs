use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use glrstop::harness::{emit_boundary_csv, log_grid, Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "glrstop",
    version,
    about = "Sequential GLR stopping rules: experiments and checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the number of replications.
        #[arg(long)]
        reps: Option<u64>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Results CSV (default: the config's output, else stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit successfully even if some replications hit t_max.
        #[arg(long)]
        allow_censor: bool,
    },
    /// Write boundary values over a log-spaced stage grid.
    Boundary {
        #[arg(long, value_delimiter = ',', default_value = "0.05")]
        alpha: Vec<f64>,
        #[arg(long, default_value = "1e8")]
        tmax: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run calibration checks and print a pass/fail table.
    #[cfg(feature = "validation")]
    Oracle {
        #[arg(long, value_enum)]
        suite: Option<Suite>,
        #[arg(long)]
        reps: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    /// Time-uniform coverage of two Gaussian streams.
    #[value(name = "lemma1")]
    TwoStream,
    /// Time-uniform coverage of two linear regressions.
    #[value(name = "lemma3")]
    LinearTwoStream,
    Martingale,
    Ville,
    /// Closed-form quadratic form against direct constrained maximization.
    #[value(name = "lemma2")]
    ConstrainedMle,
}

fn output(path: Option<&PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn run(
    config: PathBuf,
    reps: Option<u64>,
    seed: Option<u64>,
    workers: Option<usize>,
    out: Option<PathBuf>,
    allow_censor: bool,
) -> glrstop::Result<ExitCode> {
    let mut config = ExperimentConfig::load(&config)?;
    if let Some(r) = reps {
        config.replications = r;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    let out = out.or_else(|| config.output.clone());
    let report = Experiment::new(config)?.run(workers)?;
    let mut w = output(out.as_ref())?;
    report.write_csv(&mut w)?;
    w.flush()?;
    eprintln!(
        "reps={} avg_ssize={:.2} std_ssize={:.2} p1={:.4} p2={:.4} censored={} wall={:.1}s",
        report.replications,
        report.avg_ssize,
        report.std_ssize,
        report.empirical_p1,
        report.empirical_p2,
        report.censor_count,
        report.wall_time_secs
    );
    if report.censor_count > 0 && !allow_censor {
        eprintln!(
            "error: {} replication(s) censored at t_max",
            report.censor_count
        );
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn boundary(
    alpha: Vec<f64>,
    tmax: f64,
    points: usize,
    out: Option<PathBuf>,
) -> glrstop::Result<ExitCode> {
    if !(tmax >= 1.0) || points == 0 {
        return Err(glrstop::Error::Config(
            "tmax must be at least 1 and points positive".into(),
        ));
    }
    let mut w = output(out.as_ref())?;
    emit_boundary_csv(&alpha, &log_grid(tmax as u64, points), &mut w)?;
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

#[cfg(feature = "validation")]
fn oracle(suite: Option<Suite>, reps: Option<u64>, seed: u64) -> glrstop::Result<ExitCode> {
    use glrstop::validation::*;

    let wanted = |s: Suite| suite.is_none_or(|x| x == s);
    let mut rows: Vec<(&str, bool, String)> = Vec::new();
    if wanted(Suite::TwoStream) {
        let r = two_stream_coverage(reps.unwrap_or(2000), 5000, 0.1, seed)?;
        rows.push((
            "two-stream",
            r.passed(),
            format!("rate {:.4} <= {:.4}", r.rate, r.bound),
        ));
    }
    if wanted(Suite::LinearTwoStream) {
        let r = linear_two_stream_coverage(reps.unwrap_or(2000), 5000, 0.1, 2, seed)?;
        rows.push((
            "linear-two-stream",
            r.passed(),
            format!("rate {:.4} <= {:.4}", r.rate, r.bound),
        ));
    }
    if wanted(Suite::Martingale) {
        let m = martingale_mean(50, reps.unwrap_or(100_000), seed);
        rows.push((
            "martingale",
            (0.98..=1.02).contains(&m.mean),
            format!("mean G_50 {:.4} (se {:.4})", m.mean, m.std_error),
        ));
        let q = martingale_mean_quadrature(50, 2_000_000);
        rows.push((
            "martingale-quadrature",
            (q - 1.0).abs() < 1e-6,
            format!("E[G_50] = {q:.10}"),
        ));
    }
    if wanted(Suite::Ville) {
        let n = reps.unwrap_or(10_000);
        let rate = ville_violation_rate(
            |r| {
                let mut rng = glrstop::env::replication_rng(seed, r);
                let ys: Vec<f64> = (0..1000)
                    .map(|_| rand::Rng::sample(&mut rng, rand_distr::StandardNormal))
                    .collect();
                gaussian_mixture_martingale(&ys, 0.0, 1.0).expect("nonempty")
            },
            20.0,
            n,
        );
        let bound = 0.05 + 3.0 * (0.05 * 0.95 / n as f64).sqrt();
        rows.push((
            "ville",
            rate <= bound,
            format!("rate {rate:.4} <= {bound:.4}"),
        ));
    }
    if wanted(Suite::ConstrainedMle) {
        let mut rng = glrstop::env::replication_rng(seed, 0);
        let mut worst: f64 = 0.0;
        for _ in 0..reps.unwrap_or(100) {
            let inst = random_oracle_instance(&mut rng, 2, 8);
            let closed = known_variance_signed_form(&inst)?;
            let direct = constrained_log_likelihood_ratio(
                &inst.a, &inst.b, &inst.f, inst.delta, inst.var_a, inst.var_b,
            )?;
            worst = worst.max((direct - closed).abs() / closed.abs().max(1e-300));
        }
        rows.push((
            "constrained-mle",
            worst <= 1e-6,
            format!("max relative error {worst:.2e}"),
        ));
    }
    let mut ok = true;
    for (name, pass, detail) in &rows {
        ok &= *pass;
        println!(
            "{:<24} {:<4} {}",
            name,
            if *pass { "PASS" } else { "FAIL" },
            detail
        );
    }
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            reps,
            seed,
            workers,
            out,
            allow_censor,
        } => run(config, reps, seed, workers, out, allow_censor),
        Command::Boundary {
            alpha,
            tmax,
            points,
            out,
        } => boundary(alpha, tmax, points, out),
        #[cfg(feature = "validation")]
        Command::Oracle { suite, reps, seed } => oracle(suite, reps, seed),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
