use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use giantwalk::exploration::{component_sizes, write_trajectory_csv, ComponentStats};
use giantwalk::harness::{run_experiment, validate, ExperimentConfig, MCReport, Mode, ValidationReport};
use giantwalk::sampler::ALGORITHM_ID;
use giantwalk::stats::{histogram, write_histogram_csv};
use giantwalk::theory::DiagnosticWindow;
use giantwalk::{
    martingale_series, run_walk, seed_stream, summarize_replica, Error, Params, TheoryValues,
    VERSION,
};
use serde::Serialize;

const EXIT_FAILED: u8 = 1;
const EXIT_DOMAIN: u8 = 2;
const EXIT_IO: u8 = 3;

const MAX_SIMULATE_N: usize = 10_000_000;

#[derive(Debug, Parser)]
#[command(name = "giantwalk", version, about = "Giant component of G(n, p) via the exploration walk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print survival probability, dual parameter and limiting variance.
    Theory {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        n: usize,
        /// Emit JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Run one walk and dump its trajectory as CSV.
    Simulate {
        #[arg(long, required_unless_present = "p")]
        lambda: Option<f64>,
        #[arg(long)]
        n: usize,
        #[arg(long, env = "GIANTWALK_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Override p = lambda / n (testing only, allows p = 0 or 1).
        #[arg(long, hide = true)]
        p: Option<f64>,
    },
    /// Monte Carlo experiment on the largest component.
    Mc {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        replicas: usize,
        #[arg(long, env = "GIANTWALK_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Write the JSON report here (`-` for standard output).
        #[arg(long, value_name = "OUT")]
        json: Option<PathBuf>,
        /// Write per-replica results as CSV.
        #[arg(long, value_name = "OUT")]
        replica_csv: Option<PathBuf>,
        /// Write a histogram of standardized L1 as CSV.
        #[arg(long, value_name = "OUT")]
        histogram: Option<PathBuf>,
        #[arg(long, default_value_t = 40)]
        bins: usize,
        /// Record full trajectories and check every path identity.
        #[arg(long)]
        keep_trajectories: bool,
    },
    /// Compare the walk with exhaustive enumeration or direct graph sampling.
    Validate {
        #[arg(long, value_enum)]
        mode: ValidateMode,
        #[arg(long)]
        n: usize,
        #[arg(long, conflicts_with = "lambda", required_unless_present = "lambda")]
        p: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        replicas: usize,
        #[arg(long, env = "GIANTWALK_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, value_name = "OUT")]
        json: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ValidateMode {
    Enum,
    Graph,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => EXIT_IO,
        Error::Domain(_) | Error::Contract(_) | Error::Size(_) => EXIT_DOMAIN,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    File::create(path).map(BufWriter::new).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    if path == Path::new("-") {
        println!("{text}");
        return Ok(());
    }
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TheoryOutput {
    version: &'static str,
    n: usize,
    lambda: f64,
    p: f64,
    rho: f64,
    lambda_star: f64,
    sigma2: f64,
    sigma: f64,
    t1: f64,
    a: f64,
    window: DiagnosticWindow,
}

fn cmd_theory(lambda: f64, n: usize, json: bool) -> Result<u8, Error> {
    let params = Params::new(n, lambda)?;
    let th = TheoryValues::new(&params)?;
    let out = TheoryOutput {
        version: VERSION,
        n,
        lambda,
        p: params.p,
        rho: th.rho,
        lambda_star: th.lambda_star,
        sigma2: th.sigma2,
        sigma: th.sigma(),
        t1: th.t1,
        a: th.a,
        window: DiagnosticWindow::new(&params, &th),
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        println!("n            {n}");
        println!("lambda       {lambda}");
        println!("rho          {:.10}", out.rho);
        println!("lambda_star  {:.10}", out.lambda_star);
        println!("sigma2       {:.6e}", out.sigma2);
        println!("sigma        {:.6}", out.sigma);
        println!("t1           {:.3}", out.t1);
        println!("a            {:.10}", out.a);
    }
    Ok(0)
}

fn cmd_simulate(
    lambda: Option<f64>,
    n: usize,
    seed: u64,
    out: &Path,
    p: Option<f64>,
) -> Result<u8, Error> {
    if n > MAX_SIMULATE_N {
        return Err(Error::Size(format!("simulate supports n <= {MAX_SIMULATE_N}")));
    }
    let params = match (p, lambda) {
        (Some(p), _) => Params::with_p(n, p)?,
        (None, Some(lambda)) => Params::new(n, lambda)?,
        (None, None) => return Err(Error::Domain("either --lambda or --p is required".into())),
    };
    let mut stream = seed_stream(seed, 0);
    let traj = run_walk(&params, &mut stream)?;
    let series = martingale_series(&traj);
    write_trajectory_csv(&traj, &series, create(out)?)?;

    let stats = ComponentStats::from_sorted_sizes(&component_sizes(&traj));
    let mut line = format!(
        "L1={} L2={} components={}",
        stats.l1, stats.l2, stats.component_count
    );
    match TheoryValues::new(&params) {
        Ok(th) => {
            let s = summarize_replica(&traj, &series, &th);
            line.push_str(&format!(" T0={} T1={} Z={}", s.time_t0, s.time_t1, s.z));
        }
        Err(_) => line.push_str(" T0=n/a T1=n/a Z=n/a"),
    }
    println!("{line} seed={seed} rng={ALGORITHM_ID}");
    Ok(0)
}

fn print_mc_table(r: &MCReport) {
    let f = &r.pass_flags;
    let mark = |ok: bool| if ok { "ok" } else { "FAIL" };
    println!(
        "giantwalk {} | n={} lambda={} replicas={} seed={} rng={}",
        r.version, r.config.n, r.config.lambda, r.config.replicas, r.config.master_seed, r.rng_algorithm
    );
    println!("rho n                 {:.3}", r.theory.t1);
    println!("sigma                 {:.3}", r.theory.sigma());
    println!("mean L1               {:.3}", r.l1_moments.mean);
    println!("mean offset           {:+.4}  {}", r.mean_offset, mark(f.mean_offset));
    println!("variance ratio        {:.4}  {}", r.variance_ratio, mark(f.variance_ratio));
    println!("standardized KS       {:.4}  {}", r.standardized_ks, mark(f.standardized_ks));
    println!("T1 containment        {:.4}  {}", r.t1_containment_fraction, mark(f.t1_containment));
    println!("Z bound fraction      {:.4}  {}", r.z_bound_fraction, mark(f.z_bound));
    println!("condvar ratio median  {:.4}  {}", r.condvar_ratio_median, mark(f.condvar_ratio));
    println!("local slope p90       {:.4}  {}", r.local_slope_p90, mark(f.local_slope));
    println!("L2 max                {}  {}", r.l2_max, mark(f.subcritical_remainder));
    println!("path identities       {}", mark(f.path_identities));
    println!("runtime               {:.2}s", r.runtime_seconds);
}

#[allow(clippy::too_many_arguments)]
fn cmd_mc(
    lambda: f64,
    n: usize,
    replicas: usize,
    seed: u64,
    workers: usize,
    json: Option<&Path>,
    replica_csv: Option<&Path>,
    hist: Option<&Path>,
    bins: usize,
    keep_trajectories: bool,
) -> Result<u8, Error> {
    let mut config =
        ExperimentConfig::mc(Params::new(n, lambda)?, replicas, seed).with_workers(workers);
    config.keep_trajectories = keep_trajectories;
    let report = run_experiment(&config)?;

    match json {
        Some(path) if path == Path::new("-") => println!("{}", report.to_json()?),
        Some(path) => {
            write_text(path, &report.to_json()?)?;
            print_mc_table(&report);
        }
        None => print_mc_table(&report),
    }
    if let Some(path) = replica_csv {
        report.write_replica_csv(create(path)?)?;
    }
    if let Some(path) = hist {
        write_histogram_csv(&histogram(&report.standardized_sample(), bins)?, create(path)?)?;
    }
    Ok(if report.passed() { 0 } else { EXIT_FAILED })
}

fn print_validation(r: &ValidationReport) {
    println!(
        "giantwalk {} | mode={:?} n={} p={} replicas={} seed={} rng={}",
        r.version, r.config.mode, r.config.n, r.config.p, r.config.replicas, r.config.master_seed, r.rng_algorithm
    );
    println!("walk mean L1          {:.4}", r.walk_l1.mean);
    if let (Some(exact), Some(walk)) = (&r.exact_pmf, &r.walk_pmf) {
        println!("size  exact         walk");
        for (k, q) in &exact.mass {
            println!("{k:<5} {q:<13.6} {:.6}", walk.get(k).copied().unwrap_or(0.0));
        }
    }
    if let Some(c) = &r.chi_square {
        println!("chi-square            {:.4} on {} dof, p-value {:.4}", c.statistic, c.dof, c.p_value);
    }
    if let (Some(d), Some(crit)) = (r.ks_statistic, r.ks_critical) {
        println!("graph mean L1         {:.4}", r.graph_l1.map_or(f64::NAN, |m| m.mean));
        println!("two-sample KS         {d:.4} (critical {crit:.4})");
    }
    println!("result                {}", if r.pass { "pass" } else { "FAIL" });
}

#[allow(clippy::too_many_arguments)]
fn cmd_validate(
    mode: ValidateMode,
    n: usize,
    p: Option<f64>,
    lambda: Option<f64>,
    replicas: usize,
    seed: u64,
    workers: usize,
    json: Option<&Path>,
) -> Result<u8, Error> {
    let p = match (p, lambda) {
        (Some(p), _) => p,
        (None, Some(lambda)) => lambda / n as f64,
        (None, None) => return Err(Error::Domain("either --p or --lambda is required".into())),
    };
    let mode = match mode {
        ValidateMode::Enum => Mode::ValidateEnum,
        ValidateMode::Graph => Mode::ValidateGraph,
    };
    let config = ExperimentConfig::mc(Params::with_p(n, p)?, replicas, seed)
        .with_mode(mode)
        .with_workers(workers);
    let report = validate(&config)?;
    match json {
        Some(path) if path == Path::new("-") => println!("{}", report.to_json()?),
        Some(path) => {
            write_text(path, &report.to_json()?)?;
            print_validation(&report);
        }
        None => print_validation(&report),
    }
    Ok(if report.pass { 0 } else { EXIT_FAILED })
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Theory { lambda, n, json } => cmd_theory(lambda, n, json),
        Command::Simulate {
            lambda,
            n,
            seed,
            out,
            p,
        } => cmd_simulate(lambda, n, seed, &out, p),
        Command::Mc {
            lambda,
            n,
            replicas,
            seed,
            workers,
            json,
            replica_csv,
            histogram,
            bins,
            keep_trajectories,
        } => cmd_mc(
            lambda,
            n,
            replicas,
            seed,
            workers,
            json.as_deref(),
            replica_csv.as_deref(),
            histogram.as_deref(),
            bins,
            keep_trajectories,
        ),
        Command::Validate {
            mode,
            n,
            p,
            lambda,
            replicas,
            seed,
            workers,
            json,
        } => cmd_validate(mode, n, p, lambda, replicas, seed, workers, json.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("giantwalk: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
