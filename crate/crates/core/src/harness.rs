//! Reproducible Monte Carlo experiments.
//!
//! Replica `i` always draws from `seed_stream(master_seed, i)`, replicas run
//! on a rayon pool of `worker_count` threads, and results are reduced in
//! replica-index order. Reports are therefore identical for any worker
//! count.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exploration::{
    check_path, martingale_series, run_walk, simulate_summary, summarize_replica, walk_components,
    PathCheck, ReplicaSummary, Trajectory,
};
use crate::oracle::{enumerate_pmf, sample_graph, ExactPmf, MAX_ENUM_N, MAX_SAMPLE_N};
use crate::sampler::{seed_stream, ALGORITHM_ID};
use crate::stats::{
    chi_square, ks_critical_two_sample, ks_one_sample, ks_two_sample, median, quantile,
    standardize, ChiSquare, MomentAccumulator,
};
use crate::theory::{DiagnosticWindow, Params, TheoryValues};
use crate::VERSION;

/// Significance level of every validation test.
pub const ALPHA: f64 = 0.001;

/// Bytes retained per step of a kept trajectory (η, A, C, U, X).
pub const TRAJECTORY_BYTES_PER_STEP: u64 = 40;
/// Upper bound on memory for kept trajectories.
pub const TRAJECTORY_MEMORY_LIMIT: u64 = 2 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Mc,
    ValidateEnum,
    ValidateGraph,
    SingleTrajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub params: Params,
    pub replicas: usize,
    pub master_seed: u64,
    pub mode: Mode,
    pub worker_count: usize,
    pub keep_trajectories: bool,
}

impl ExperimentConfig {
    pub fn mc(params: Params, replicas: usize, master_seed: u64) -> Self {
        ExperimentConfig {
            params,
            replicas,
            master_seed,
            mode: Mode::Mc,
            worker_count: 1,
            keep_trajectories: false,
        }
    }

    pub fn with_workers(mut self, worker_count: usize) -> Self {
        self.worker_count = worker_count;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn keeping_trajectories(mut self) -> Self {
        self.keep_trajectories = true;
        self
    }

    fn check(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::domain("replicas must be at least 1"));
        }
        if self.worker_count == 0 {
            return Err(Error::domain("worker_count must be at least 1"));
        }
        match self.mode {
            Mode::ValidateEnum if self.params.n > MAX_ENUM_N => Err(Error::Size(format!(
                "validate_enum requires n <= {MAX_ENUM_N}, got {}",
                self.params.n
            ))),
            Mode::ValidateGraph if self.params.n > MAX_SAMPLE_N => Err(Error::Size(format!(
                "validate_graph requires n <= {MAX_SAMPLE_N}, got {}",
                self.params.n
            ))),
            _ => Ok(()),
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.worker_count)
            .build()
            .map_err(|e| Error::Contract(format!("cannot start worker pool: {e}")))
    }
}

/// Configuration as echoed in reports. The worker count is left out: it
/// affects scheduling only, never results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub n: usize,
    pub lambda: f64,
    pub p: f64,
    pub replicas: usize,
    pub master_seed: u64,
    pub mode: Mode,
    pub keep_trajectories: bool,
}

impl From<&ExperimentConfig> for ConfigEcho {
    fn from(c: &ExperimentConfig) -> Self {
        ConfigEcho {
            n: c.params.n,
            lambda: c.params.lambda,
            p: c.params.p,
            replicas: c.replicas,
            master_seed: c.master_seed,
            mode: c.mode,
            keep_trajectories: c.keep_trajectories,
        }
    }
}

/// Acceptance thresholds. None of them is a proven constant: the limit
/// theorems are asymptotic, so each is calibrated for desk-scale `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// `|mean_offset| ≤ mean_offset_sigmas / √R + mean_offset_slack`
    pub mean_offset_sigmas: f64,
    pub mean_offset_slack: f64,
    pub variance_ratio: (f64, f64),
    /// Standardized KS distance must not exceed `ks_coefficient / √R`.
    pub ks_coefficient: f64,
    pub t1_containment_min: f64,
    pub z_bound_min: f64,
    pub condvar_ratio: (f64, f64),
    pub local_slope_p90_max: f64,
    /// Largest observed `L₂` relative to `ρ n`.
    pub l2_fraction_max: f64,
}

impl Thresholds {
    /// Defaults; the variance window widens to `[0.8, 1.2]` when `ε < 0.1`,
    /// where finite-size corrections decay slowly.
    pub fn for_params(params: &Params) -> Self {
        let variance_ratio = if params.epsilon() < 0.1 {
            (0.8, 1.2)
        } else {
            (0.9, 1.1)
        };
        Thresholds {
            mean_offset_sigmas: 4.0,
            mean_offset_slack: 0.02,
            variance_ratio,
            ks_coefficient: 1.95,
            t1_containment_min: 0.95,
            z_bound_min: 0.95,
            condvar_ratio: (0.95, 1.05),
            local_slope_p90_max: 0.5,
            l2_fraction_max: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassFlags {
    pub mean_offset: bool,
    pub variance_ratio: bool,
    pub standardized_ks: bool,
    pub t1_containment: bool,
    pub z_bound: bool,
    pub condvar_ratio: bool,
    pub local_slope: bool,
    pub subcritical_remainder: bool,
    pub path_identities: bool,
}

impl PassFlags {
    pub fn all(&self) -> bool {
        self.mean_offset
            && self.variance_ratio
            && self.standardized_ks
            && self.t1_containment
            && self.z_bound
            && self.condvar_ratio
            && self.local_slope
            && self.subcritical_remainder
            && self.path_identities
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub count: u64,
    pub mean: f64,
    /// Sample variance; 0 when undefined (fewer than two replicas).
    pub variance: f64,
    pub variance_defined: bool,
    pub min: f64,
    pub max: f64,
}

impl From<&MomentAccumulator> for MomentReport {
    fn from(acc: &MomentAccumulator) -> Self {
        MomentReport {
            count: acc.count,
            mean: acc.mean,
            variance: acc.variance().unwrap_or(0.0),
            variance_defined: acc.variance().is_some(),
            min: acc.min,
            max: acc.max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCReport {
    pub version: String,
    pub rng_algorithm: String,
    pub config: ConfigEcho,
    pub theory: TheoryValues,
    pub window: DiagnosticWindow,
    pub thresholds: Thresholds,
    #[serde(rename = "L1_moments")]
    pub l1_moments: MomentReport,
    /// `(mean(L₁) - ρn) / σ`
    pub mean_offset: f64,
    /// `var(L₁) / σ²`
    pub variance_ratio: f64,
    pub standardized_ks: f64,
    #[serde(rename = "T1_containment_fraction")]
    pub t1_containment_fraction: f64,
    /// Fraction of replicas with `Z ≤ σ₀/ω`.
    pub z_bound_fraction: f64,
    /// Replicas where `X` never reached `-Z-1`.
    pub t1_unreached: u64,
    pub condvar_ratio_median: f64,
    pub local_slope_p90: f64,
    #[serde(rename = "L2_max")]
    pub l2_max: u64,
    /// `L2_max / (ρ n)`
    #[serde(rename = "L2_max_fraction")]
    pub l2_max_fraction: f64,
    pub coupling_violations: u64,
    /// Exact identity checks, present when trajectories were kept.
    pub path_check: Option<PathCheck>,
    pub pass_flags: PassFlags,
    #[serde(skip)]
    pub runtime_seconds: f64,
    #[serde(skip)]
    pub summaries: Vec<ReplicaSummary>,
}

impl MCReport {
    pub fn passed(&self) -> bool {
        self.pass_flags.all()
    }

    /// Pretty JSON with fields in declaration order.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-replica CSV:
    /// `replica_index,L1,L2,T0,T1,Z,standardized_L1`.
    pub fn write_replica_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["replica_index", "L1", "L2", "T0", "T1", "Z", "standardized_L1"])?;
        for (i, s) in self.summaries.iter().enumerate() {
            w.write_record([
                i.to_string(),
                s.l1.to_string(),
                s.l2.to_string(),
                s.time_t0.to_string(),
                s.time_t1.to_string(),
                s.z.to_string(),
                format!("{:.16e}", standardize(s.l1 as f64, &self.theory)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Standardized `L₁` values in replica order.
    pub fn standardized_sample(&self) -> Vec<f64> {
        self.summaries
            .iter()
            .map(|s| standardize(s.l1 as f64, &self.theory))
            .collect()
    }
}

struct ReplicaOutcome {
    summary: ReplicaSummary,
    trajectory: Option<Trajectory>,
    check: Option<PathCheck>,
}

fn run_replica(
    config: &ExperimentConfig,
    theory: &TheoryValues,
    index: usize,
) -> Result<ReplicaOutcome> {
    let mut stream = seed_stream(config.master_seed, index as u64);
    if config.keep_trajectories {
        let traj = run_walk(&config.params, &mut stream)?;
        let series = martingale_series(&traj);
        let summary = summarize_replica(&traj, &series, theory);
        let check = check_path(&traj, &series);
        Ok(ReplicaOutcome {
            summary,
            trajectory: Some(traj),
            check: Some(check),
        })
    } else {
        Ok(ReplicaOutcome {
            summary: simulate_summary(&config.params, theory, &mut stream)?,
            trajectory: None,
            check: None,
        })
    }
}

/// Run a Monte Carlo experiment and aggregate it into a report.
pub fn run_experiment(config: &ExperimentConfig) -> Result<MCReport> {
    run_experiment_full(config).map(|(report, _)| report)
}

/// As [`run_experiment`], also returning the trajectories when
/// `keep_trajectories` is set.
pub fn run_experiment_full(config: &ExperimentConfig) -> Result<(MCReport, Vec<Trajectory>)> {
    config.check()?;
    if config.mode != Mode::Mc {
        return Err(Error::domain(format!(
            "run_experiment needs mode mc, got {:?}",
            config.mode
        )));
    }
    let theory = TheoryValues::new(&config.params)?;
    if config.keep_trajectories {
        let bytes = config.replicas as u64
            * (config.params.n as u64 + 1)
            * TRAJECTORY_BYTES_PER_STEP;
        if bytes > TRAJECTORY_MEMORY_LIMIT {
            return Err(Error::Size(format!(
                "keeping {} trajectories of n = {} needs about {:.1} GiB (limit {:.1} GiB)",
                config.replicas,
                config.params.n,
                bytes as f64 / (1u64 << 30) as f64,
                TRAJECTORY_MEMORY_LIMIT as f64 / (1u64 << 30) as f64
            )));
        }
    }

    let started = Instant::now();
    let outcomes: Vec<ReplicaOutcome> = config.pool()?.install(|| {
        (0..config.replicas)
            .into_par_iter()
            .map(|i| run_replica(config, &theory, i))
            .collect::<Result<Vec<_>>>()
    })?;
    let runtime_seconds = started.elapsed().as_secs_f64();

    let mut summaries = Vec::with_capacity(outcomes.len());
    let mut trajectories = Vec::new();
    let mut path_check: Option<PathCheck> = None;
    for o in outcomes {
        if let Some(c) = o.check {
            path_check.get_or_insert_with(PathCheck::default).merge(&c);
        }
        if let Some(t) = o.trajectory {
            trajectories.push(t);
        }
        summaries.push(o.summary);
    }

    let mut report = aggregate(config, theory, summaries, path_check);
    report.runtime_seconds = runtime_seconds;
    Ok((report, trajectories))
}

fn fraction(count: usize, total: usize) -> f64 {
    count as f64 / total as f64
}

fn sorted(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs
}

fn aggregate(
    config: &ExperimentConfig,
    theory: TheoryValues,
    summaries: Vec<ReplicaSummary>,
    path_check: Option<PathCheck>,
) -> MCReport {
    let params = &config.params;
    let window = DiagnosticWindow::new(params, &theory);
    let thresholds = Thresholds::for_params(params);
    let r = summaries.len();

    let mut moments = MomentAccumulator::new();
    for s in &summaries {
        moments.update(s.l1 as f64);
    }
    let sigma = theory.sigma();
    let mean_offset = (moments.mean - theory.t1) / sigma;
    let variance_ratio = moments.variance().map_or(f64::NAN, |v| v / theory.sigma2);
    let standardized = sorted(
        summaries
            .iter()
            .map(|s| standardize(s.l1 as f64, &theory))
            .collect(),
    );
    let standardized_ks = ks_one_sample(&standardized).unwrap_or(f64::NAN);

    let (lo, hi) = (
        window.t1.saturating_sub(window.t0) as u64,
        (window.t1 + window.t0) as u64,
    );
    let contained = summaries
        .iter()
        .filter(|s| s.t1_reached && (lo..=hi).contains(&s.time_t1))
        .count();
    let z_ok = summaries
        .iter()
        .filter(|s| s.z as f64 <= window.z_bound())
        .count();
    let condvar_ratio_median = median(&sorted(
        summaries.iter().map(|s| s.condvar_sum_ratio).collect(),
    ));
    let local_slope_p90 = quantile(
        &sorted(summaries.iter().map(|s| s.local_slope_dev).collect()),
        0.9,
    );
    let l2_max = summaries.iter().map(|s| s.l2).max().unwrap_or(0);
    let l2_max_fraction = l2_max as f64 / theory.t1;
    let coupling_violations = summaries.iter().map(|s| s.coupling_violations).sum();
    let t1_unreached = summaries.iter().filter(|s| !s.t1_reached).count() as u64;

    let t1_containment_fraction = fraction(contained, r);
    let z_bound_fraction = fraction(z_ok, r);
    let th = &thresholds;
    let pass_flags = PassFlags {
        mean_offset: mean_offset.abs()
            <= th.mean_offset_sigmas / (r as f64).sqrt() + th.mean_offset_slack,
        variance_ratio: variance_ratio >= th.variance_ratio.0
            && variance_ratio <= th.variance_ratio.1,
        standardized_ks: standardized_ks <= th.ks_coefficient / (r as f64).sqrt(),
        t1_containment: t1_containment_fraction >= th.t1_containment_min,
        z_bound: z_bound_fraction >= th.z_bound_min,
        condvar_ratio: condvar_ratio_median >= th.condvar_ratio.0
            && condvar_ratio_median <= th.condvar_ratio.1,
        local_slope: local_slope_p90 <= th.local_slope_p90_max,
        subcritical_remainder: l2_max_fraction <= th.l2_fraction_max,
        path_identities: coupling_violations == 0
            && path_check.is_none_or(|c| c.total() == 0),
    };

    MCReport {
        version: VERSION.to_string(),
        rng_algorithm: ALGORITHM_ID.to_string(),
        config: config.into(),
        theory,
        window,
        thresholds,
        l1_moments: (&moments).into(),
        mean_offset,
        variance_ratio,
        standardized_ks,
        t1_containment_fraction,
        z_bound_fraction,
        t1_unreached,
        condvar_ratio_median,
        local_slope_p90,
        l2_max,
        l2_max_fraction,
        coupling_violations,
        path_check,
        pass_flags,
        runtime_seconds: 0.0,
        summaries,
    }
}

/// Outcome of comparing the walk with an independent oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub version: String,
    pub rng_algorithm: String,
    pub config: ConfigEcho,
    pub alpha: f64,
    #[serde(rename = "walk_L1_moments")]
    pub walk_l1: MomentReport,
    /// Walk frequencies of `L₁` (enumeration mode).
    pub walk_pmf: Option<BTreeMap<usize, f64>>,
    pub exact_pmf: Option<ExactPmf>,
    pub chi_square: Option<ChiSquare>,
    /// Direct-graph `L₁` moments (graph mode).
    #[serde(rename = "graph_L1_moments")]
    pub graph_l1: Option<MomentReport>,
    pub ks_statistic: Option<f64>,
    pub ks_critical: Option<f64>,
    pub pass: bool,
}

impl ValidationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Compare walk `L₁` samples with exhaustive enumeration (chi-square) or
/// with directly sampled graphs (two-sample KS). Walk replica `i` uses
/// stream `i`; graph replica `i` uses stream `R + i`.
pub fn validate(config: &ExperimentConfig) -> Result<ValidationReport> {
    config.check()?;
    let params = config.params;
    let r = config.replicas;
    let pool = config.pool()?;
    let walk: Vec<u64> = pool.install(|| {
        (0..r)
            .into_par_iter()
            .map(|i| {
                walk_components(&params, &mut seed_stream(config.master_seed, i as u64))
                    .map(|c| c.l1)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let walk_acc = walk.iter().fold(MomentAccumulator::new(), |mut a, &x| {
        a.update(x as f64);
        a
    });
    let mut report = ValidationReport {
        version: VERSION.to_string(),
        rng_algorithm: ALGORITHM_ID.to_string(),
        config: config.into(),
        alpha: ALPHA,
        walk_l1: (&walk_acc).into(),
        walk_pmf: None,
        exact_pmf: None,
        chi_square: None,
        graph_l1: None,
        ks_statistic: None,
        ks_critical: None,
        pass: false,
    };

    match config.mode {
        Mode::ValidateEnum => {
            let exact = enumerate_pmf(params.n, params.p)?;
            let mut counts = vec![0u64; params.n];
            for &l1 in &walk {
                counts[l1 as usize - 1] += 1;
            }
            let test = chi_square(&counts, &exact.dense())?;
            report.pass = test.p_value > ALPHA;
            report.walk_pmf = Some(
                counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(k, &c)| (k + 1, c as f64 / r as f64))
                    .collect(),
            );
            report.exact_pmf = Some(exact);
            report.chi_square = Some(test);
        }
        Mode::ValidateGraph => {
            let graph: Vec<u64> = pool.install(|| {
                (0..r)
                    .into_par_iter()
                    .map(|i| {
                        let mut s = seed_stream(config.master_seed, (r + i) as u64);
                        sample_graph(params.n, params.p, &mut s).map(|c| c.l1)
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            let graph_acc = graph.iter().fold(MomentAccumulator::new(), |mut a, &x| {
                a.update(x as f64);
                a
            });
            let a = sorted(walk.iter().map(|&x| x as f64).collect());
            let b = sorted(graph.iter().map(|&x| x as f64).collect());
            let d = ks_two_sample(&a, &b)?;
            let critical = ks_critical_two_sample(ALPHA, a.len(), b.len());
            report.pass = d < critical;
            report.graph_l1 = Some((&graph_acc).into());
            report.ks_statistic = Some(d);
            report.ks_critical = Some(critical);
        }
        other => {
            return Err(Error::domain(format!(
                "validate needs mode validate_enum or validate_graph, got {other:?}"
            )))
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_replica_complete_graph() {
        let params = Params::with_p(3, 1.0).unwrap();
        let report = run_experiment(&ExperimentConfig::mc(params, 1, 0)).unwrap();
        assert_eq!(report.l1_moments.count, 1);
        assert_eq!(report.l1_moments.mean, 3.0);
        assert_eq!(report.l1_moments.variance, 0.0);
        assert!(!report.l1_moments.variance_defined);
        assert!(!report.pass_flags.variance_ratio);
    }

    #[test]
    fn deterministic_across_workers() {
        let params = Params::new(5_000, 1.5).unwrap();
        let base = ExperimentConfig::mc(params, 24, 3);
        let one = run_experiment(&base).unwrap().to_json().unwrap();
        let again = run_experiment(&base).unwrap().to_json().unwrap();
        let four = run_experiment(&base.with_workers(4)).unwrap().to_json().unwrap();
        assert_eq!(one, again);
        assert_eq!(one, four);
        assert!(!one.contains("runtime"));
    }

    #[test]
    fn kept_trajectories_agree_with_streaming() {
        let params = Params::new(3_000, 1.5).unwrap();
        let base = ExperimentConfig::mc(params, 6, 9);
        let streamed = run_experiment(&base).unwrap();
        let (kept, trajs) = run_experiment_full(&base.keeping_trajectories()).unwrap();
        assert_eq!(streamed.summaries, kept.summaries);
        assert_eq!(trajs.len(), 6);
        assert_eq!(kept.path_check, Some(PathCheck::default()));
        assert!(streamed.path_check.is_none());
        for (i, t) in trajs.iter().enumerate() {
            assert_eq!(t.replica_index, i as u64);
        }
    }

    #[test]
    fn refuses_bad_configs() {
        let params = Params::new(1_000_000, 1.5).unwrap();
        let big = ExperimentConfig::mc(params, 10_000, 0).keeping_trajectories();
        match run_experiment(&big) {
            Err(Error::Size(msg)) => assert!(msg.contains("GiB")),
            other => panic!("expected size error, got {other:?}"),
        }
        assert!(run_experiment(&ExperimentConfig::mc(params, 0, 0)).is_err());
        let enum_too_big = ExperimentConfig::mc(Params::with_p(9, 0.5).unwrap(), 10, 0)
            .with_mode(Mode::ValidateEnum);
        assert!(matches!(validate(&enum_too_big), Err(Error::Size(_))));
        let wrong = ExperimentConfig::mc(Params::new(100, 1.5).unwrap(), 10, 0);
        assert!(validate(&wrong).is_err());
        assert!(run_experiment(&wrong.with_mode(Mode::ValidateGraph)).is_err());
        let sub = ExperimentConfig::mc(Params::with_p(100, 0.005).unwrap(), 10, 0);
        assert!(matches!(run_experiment(&sub), Err(Error::Domain(_))));
    }

    #[test]
    fn validate_enum_degenerate() {
        let config = ExperimentConfig::mc(Params::with_p(2, 1.0).unwrap(), 500, 1)
            .with_mode(Mode::ValidateEnum);
        let report = validate(&config).unwrap();
        let exact = report.exact_pmf.as_ref().unwrap();
        assert_eq!(exact.mass, BTreeMap::from([(2, 1.0)]));
        assert_eq!(report.walk_pmf, Some(BTreeMap::from([(2, 1.0)])));
        assert!(report.pass);
    }

    #[test]
    fn replica_csv_shape() {
        let params = Params::new(2_000, 2.0).unwrap();
        let report = run_experiment(&ExperimentConfig::mc(params, 5, 2)).unwrap();
        let mut out = Vec::new();
        report.write_replica_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("replica_index,L1,L2,T0,T1,Z,standardized_L1")
        );
        assert_eq!(lines.count(), 5);
    }
}
