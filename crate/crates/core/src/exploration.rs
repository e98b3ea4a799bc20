//! The component-exploration walk.
//!
//! Vertices are active, explored or unseen. At each step the first active
//! vertex (or, if none, the first unseen one, which starts a new component)
//! is explored and its edges to unseen vertices are revealed. Only the
//! number `η_t` of such edges matters for the component structure, and
//! given the past it is `Bin(U'_{t-1}, p)` where `U'` is the number of
//! unseen vertices still eligible at that step. The walk therefore never
//! touches an edge list.
//!
//! With `A_t` active vertices and `C_t` components started, the walk
//! `X_t = A_t - C_t` equals `Σ_{i≤t} (η_i - 1)`, and the i-th component is
//! finished exactly when `X` first hits `-i`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::{BinomialSampler, RngStream};
use crate::theory::{DiagnosticWindow, Params, TheoryValues};

/// Absolute slack, per unit of `n`, when checking floating-point identities.
pub const FLOAT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkState {
    pub n: u64,
    pub t: u64,
    pub active: u64,
    pub unseen: u64,
    pub components: u64,
}

impl WalkState {
    pub fn initial(n: usize) -> Self {
        WalkState {
            n: n as u64,
            t: 0,
            active: 0,
            unseen: n as u64,
            components: 0,
        }
    }

    /// `X = A - C`.
    pub fn x(&self) -> i64 {
        self.active as i64 - self.components as i64
    }

    pub fn is_finished(&self) -> bool {
        self.t == self.n
    }

    /// Number of unseen vertices tested at the next step: all of them, or
    /// all but the one that starts a new component.
    #[inline]
    pub fn tested(&self) -> u64 {
        if self.active == 0 {
            self.unseen.saturating_sub(1)
        } else {
            self.unseen
        }
    }

    /// Apply one step that revealed `eta` new vertices.
    #[inline]
    fn advance(&self, eta: u64) -> WalkState {
        let (active, components) = if self.active == 0 {
            (eta, self.components + 1)
        } else {
            (self.active + eta - 1, self.components)
        };
        let t = self.t + 1;
        WalkState {
            n: self.n,
            t,
            active,
            unseen: self.n - t - active,
            components,
        }
    }
}

/// Take one exploration step.
pub fn step(
    state: &WalkState,
    params: &Params,
    stream: &mut RngStream,
) -> Result<(WalkState, u64)> {
    if state.n != params.n as u64 {
        return Err(Error::Contract(format!(
            "state has n = {} but params have n = {}",
            state.n, params.n
        )));
    }
    if state.is_finished() {
        return Err(Error::Contract(format!(
            "walk already finished at t = n = {}",
            state.n
        )));
    }
    let eta = BinomialSampler::new(params.p)?.sample(stream, state.tested());
    Ok((state.advance(eta), eta))
}

/// Step-by-step driver with the binomial constants hoisted out.
struct Walker<'a> {
    sampler: BinomialSampler,
    state: WalkState,
    stream: &'a mut RngStream,
}

impl<'a> Walker<'a> {
    fn new(params: &Params, stream: &'a mut RngStream) -> Result<Self> {
        Ok(Walker {
            sampler: BinomialSampler::new(params.p)?,
            state: WalkState::initial(params.n),
            stream,
        })
    }

    /// Returns `(η_t, U'_{t-1})`, or `None` once all `n` steps are done.
    #[inline]
    fn next_step(&mut self) -> Option<(u64, u64)> {
        if self.state.is_finished() {
            return None;
        }
        let tested = self.state.tested();
        let eta = self.sampler.sample(self.stream, tested);
        self.state = self.state.advance(eta);
        Some((eta, tested))
    }
}

/// A complete sample path. Per-time arrays have `n + 1` entries (time 0
/// included); `eta[i]` holds `η_{i+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: Params,
    pub eta: Vec<u64>,
    pub active: Vec<u64>,
    pub components: Vec<u64>,
    pub unseen: Vec<u64>,
    pub x: Vec<i64>,
    pub master_seed: u64,
    pub replica_index: u64,
}

impl Trajectory {
    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn state(&self, t: usize) -> WalkState {
        WalkState {
            n: self.params.n as u64,
            t: t as u64,
            active: self.active[t],
            unseen: self.unseen[t],
            components: self.components[t],
        }
    }

    /// `U'_t`, the number of vertices tested at step `t + 1`.
    pub fn tested(&self, t: usize) -> u64 {
        self.state(t).tested()
    }

    /// Number of components, `-X_n`.
    pub fn component_count(&self) -> u64 {
        (-self.x[self.params.n]) as u64
    }
}

/// Run all `n` steps, recording the full path.
pub fn run_walk(params: &Params, stream: &mut RngStream) -> Result<Trajectory> {
    let n = params.n;
    let (master_seed, replica_index) = (stream.master_seed(), stream.replica_index());
    let mut traj = Trajectory {
        params: *params,
        eta: Vec::with_capacity(n),
        active: Vec::with_capacity(n + 1),
        components: Vec::with_capacity(n + 1),
        unseen: Vec::with_capacity(n + 1),
        x: Vec::with_capacity(n + 1),
        master_seed,
        replica_index,
    };
    let mut walker = Walker::new(params, stream)?;
    let record = |s: &WalkState, traj: &mut Trajectory| {
        traj.active.push(s.active);
        traj.components.push(s.components);
        traj.unseen.push(s.unseen);
        traj.x.push(s.x());
    };
    record(&walker.state, &mut traj);
    while let Some((eta, _)) = walker.next_step() {
        traj.eta.push(eta);
        record(&walker.state, &mut traj);
    }
    Ok(traj)
}

/// Times `0 = t_0 < t_1 < … < t_k = n` at which no vertex is active.
pub fn completion_times(traj: &Trajectory) -> Vec<usize> {
    std::iter::once(0)
        .chain((1..=traj.n()).filter(|&t| traj.active[t] == 0))
        .collect()
}

/// Component sizes `t_i - t_{i-1}`, largest first.
pub fn component_sizes(traj: &Trajectory) -> Vec<u64> {
    let times = completion_times(traj);
    let mut sizes: Vec<u64> = times.windows(2).map(|w| (w[1] - w[0]) as u64).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

/// Largest, second largest and number of components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentStats {
    #[serde(rename = "L1")]
    pub l1: u64,
    #[serde(rename = "L2")]
    pub l2: u64,
    pub component_count: u64,
}

impl ComponentStats {
    /// From component sizes sorted largest first.
    pub fn from_sorted_sizes(sizes: &[u64]) -> Self {
        ComponentStats {
            l1: sizes.first().copied().unwrap_or(0),
            l2: sizes.get(1).copied().unwrap_or(0),
            component_count: sizes.len() as u64,
        }
    }
}

/// Run the walk tracking nothing but component sizes.
pub fn walk_components(params: &Params, stream: &mut RngStream) -> Result<ComponentStats> {
    let mut walker = Walker::new(params, stream)?;
    let (mut last_zero, mut l1, mut l2, mut count) = (0u64, 0u64, 0u64, 0u64);
    while walker.next_step().is_some() {
        let s = walker.state;
        if s.active == 0 {
            let size = s.t - last_zero;
            last_zero = s.t;
            count += 1;
            if size > l1 {
                l2 = l1;
                l1 = size;
            } else if size > l2 {
                l2 = size;
            }
        }
    }
    Ok(ComponentStats {
        l1,
        l2,
        component_count: count,
    })
}

/// Running computation of the martingale decomposition.
///
/// With `q = 1 - p`, the tracker maintains
/// `S_t = Σ q^{-i} Δ_i` (via the running factor `q^{-t}`),
/// `W_t = Σ q^{t-i} Δ_i = q W_{t-1} + Δ_t` so that `X̃_t = x_t + W_t`,
/// and `K_t = Σ q^{t-i} p C_i`, for which `X_t - X̃_t = -K_t` exactly.
/// Computing `X̃` through `W` rather than `q^t S_t` keeps it finite at `p = 1`.
#[derive(Debug, Clone)]
struct MartingaleTracker {
    n: f64,
    p: f64,
    q: f64,
    inv_q: f64,
    t: u64,
    growth: f64,
    decay: f64,
    s: f64,
    w: f64,
    k: f64,
}

#[derive(Debug, Clone, Copy)]
struct MartingaleStep {
    drift: f64,
    delta: f64,
    s: f64,
    xtilde: f64,
    condvar: f64,
    coupling: f64,
}

impl MartingaleTracker {
    fn new(params: &Params) -> Self {
        let q = 1.0 - params.p;
        MartingaleTracker {
            n: params.n as f64,
            p: params.p,
            q,
            inv_q: 1.0 / q,
            t: 0,
            growth: 1.0,
            decay: 1.0,
            s: 0.0,
            w: 0.0,
            k: 0.0,
        }
    }

    /// Feed `η_t`, `U'_{t-1}` and `C_t`.
    #[inline]
    fn update(&mut self, eta: u64, tested: u64, components: u64) -> MartingaleStep {
        self.t += 1;
        let drift = self.p * tested as f64 - 1.0;
        let delta = eta as f64 - 1.0 - drift;
        self.growth *= self.inv_q;
        self.decay *= self.q;
        if delta != 0.0 {
            self.s += self.growth * delta;
        }
        self.w = self.q * self.w + delta;
        self.k = self.q * self.k + self.p * components as f64;
        let x_det = self.n - self.t as f64 - self.n * self.decay;
        let pq = self.p * self.q;
        let condvar = if pq == 0.0 {
            0.0
        } else {
            self.growth * self.growth * tested as f64 * pq
        };
        MartingaleStep {
            drift,
            delta,
            s: self.s,
            xtilde: x_det + self.w,
            condvar,
            coupling: self.k,
        }
    }
}

/// Conditional means `D_t`, centered increments `Δ_t`, the martingale `S_t`,
/// the approximating process `X̃_t` and the per-step conditional variances
/// of `q^{-t} Δ_t`. Index 0 holds the empty-sum value (0 everywhere).
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleSeries {
    pub drift: Vec<f64>,
    pub delta: Vec<f64>,
    pub s: Vec<f64>,
    pub xtilde: Vec<f64>,
    pub condvar: Vec<f64>,
    /// `Σ q^{t-i} p C_i`, equal to `X̃_t - X_t`.
    pub coupling: Vec<f64>,
}

pub fn martingale_series(traj: &Trajectory) -> MartingaleSeries {
    let n = traj.n();
    let mut tracker = MartingaleTracker::new(&traj.params);
    let mut series = MartingaleSeries {
        drift: Vec::with_capacity(n + 1),
        delta: Vec::with_capacity(n + 1),
        s: Vec::with_capacity(n + 1),
        xtilde: Vec::with_capacity(n + 1),
        condvar: Vec::with_capacity(n + 1),
        coupling: Vec::with_capacity(n + 1),
    };
    for v in [
        &mut series.drift,
        &mut series.delta,
        &mut series.s,
        &mut series.xtilde,
        &mut series.condvar,
        &mut series.coupling,
    ] {
        v.push(0.0);
    }
    for t in 1..=n {
        let m = tracker.update(traj.eta[t - 1], traj.tested(t - 1), traj.components[t]);
        series.drift.push(m.drift);
        series.delta.push(m.delta);
        series.s.push(m.s);
        series.xtilde.push(m.xtilde);
        series.condvar.push(m.condvar);
        series.coupling.push(m.coupling);
    }
    series
}

/// Per-replica outcome and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaSummary {
    #[serde(rename = "L1")]
    pub l1: u64,
    #[serde(rename = "L2")]
    pub l2: u64,
    pub component_count: u64,
    /// Components completely explored by the diagnostic time `t₀`.
    #[serde(rename = "Z")]
    pub z: u64,
    /// First time `X` reaches `-Z`.
    #[serde(rename = "T0")]
    pub time_t0: u64,
    /// First time `X` reaches `-Z-1`, or `n` if it never does.
    #[serde(rename = "T1")]
    pub time_t1: u64,
    /// False when `X` never reached `-Z-1` (only possible for tiny `n`).
    pub t1_reached: bool,
    /// `sup_{t≤t₁} |X̃_t - f(t)|`
    pub sup_dev_xtilde_f: f64,
    /// `sup_t |X_t - X̃_t|`
    pub sup_coupling: f64,
    /// Steps where `|X_t - X̃_t| > p t C_t` beyond floating slack.
    pub coupling_violations: u64,
    /// `Σ_{t≤t₁} condvar_t / (nρ/(1-ρ))`
    pub condvar_sum_ratio: f64,
    pub xtilde_at_t1: f64,
    /// `sup_{|t-t₁|≤t₀} |X̃_t - X̃_{t₁} - a(t₁-t)| / σ₀`
    pub local_slope_dev: f64,
}

impl ReplicaSummary {
    /// Size of the component finished at `T1`.
    pub fn giant_size(&self) -> u64 {
        self.time_t1 - self.time_t0
    }
}

struct Observation {
    t: u64,
    x: i64,
    active: u64,
    components: u64,
    xtilde: f64,
    condvar: f64,
}

/// Consumes one observation per time `0..=n` and produces a [`ReplicaSummary`].
struct SummaryBuilder {
    params: Params,
    theory: TheoryValues,
    window: DiagnosticWindow,
    slack: f64,
    last_zero: u64,
    largest: u64,
    second: u64,
    count: u64,
    min_x: i64,
    time_t0: u64,
    time_t1: Option<u64>,
    sup_dev: f64,
    /// `e^{-pt}` as a running product, for `f(t) = n - t - n e^{-pt}`.
    f_decay: f64,
    f_step: f64,
    sup_coupling: f64,
    coupling_violations: u64,
    condvar_sum: f64,
    xtilde_at_t1: f64,
    window_start: u64,
    window_xtilde: Vec<f64>,
}

impl SummaryBuilder {
    fn new(params: &Params, theory: &TheoryValues) -> Self {
        let window = DiagnosticWindow::new(params, theory);
        SummaryBuilder {
            params: *params,
            theory: *theory,
            window,
            slack: FLOAT_SLACK * params.n as f64,
            last_zero: 0,
            largest: 0,
            second: 0,
            count: 0,
            min_x: 0,
            time_t0: 0,
            time_t1: None,
            sup_dev: 0.0,
            f_decay: 1.0,
            f_step: (-params.p).exp(),
            sup_coupling: 0.0,
            coupling_violations: 0,
            condvar_sum: 0.0,
            xtilde_at_t1: 0.0,
            window_start: window.t1.saturating_sub(window.t0) as u64,
            window_xtilde: Vec::with_capacity(2 * window.t0 + 1),
        }
    }

    #[inline]
    fn observe(&mut self, o: &Observation) {
        let t = o.t;
        let t0 = self.window.t0 as u64;
        let t1 = self.window.t1 as u64;

        if t > 0 && o.active == 0 {
            let size = t - self.last_zero;
            self.last_zero = t;
            self.count += 1;
            if size > self.largest {
                self.second = self.largest;
                self.largest = size;
            } else if size > self.second {
                self.second = size;
            }
        }

        if t <= t0 {
            if o.x < self.min_x {
                self.min_x = o.x;
                self.time_t0 = t;
            }
        } else if self.time_t1.is_none() && o.x < self.min_x {
            self.time_t1 = Some(t);
        }

        if t <= t1 {
            let n = self.params.n as f64;
            let f = n - t as f64 - n * self.f_decay;
            self.f_decay *= self.f_step;
            self.sup_dev = self.sup_dev.max((o.xtilde - f).abs());
            self.condvar_sum += o.condvar;
        }
        if t == t1 {
            self.xtilde_at_t1 = o.xtilde;
        }

        let gap = (o.x as f64 - o.xtilde).abs();
        self.sup_coupling = self.sup_coupling.max(gap);
        if gap > self.params.p * t as f64 * o.components as f64 + self.slack {
            self.coupling_violations += 1;
        }

        if t >= self.window_start && t <= t1 + t0 {
            self.window_xtilde.push(o.xtilde);
        }
    }

    fn finish(self) -> ReplicaSummary {
        let t1 = self.window.t1 as u64;
        let anchor = self.window_xtilde[(t1 - self.window_start) as usize];
        let local_slope_dev = self
            .window_xtilde
            .iter()
            .enumerate()
            .map(|(i, &xt)| {
                let t = self.window_start + i as u64;
                (xt - anchor - self.theory.a * (t1 as f64 - t as f64)).abs()
            })
            .fold(0.0, f64::max)
            / self.window.sigma0;
        ReplicaSummary {
            l1: self.largest,
            l2: self.second,
            component_count: self.count,
            z: (-self.min_x) as u64,
            time_t0: self.time_t0,
            time_t1: self.time_t1.unwrap_or(self.params.n as u64),
            t1_reached: self.time_t1.is_some(),
            sup_dev_xtilde_f: self.sup_dev,
            sup_coupling: self.sup_coupling,
            coupling_violations: self.coupling_violations,
            condvar_sum_ratio: self.condvar_sum / self.theory.condvar_limit(self.params.n),
            xtilde_at_t1: self.xtilde_at_t1,
            local_slope_dev,
        }
    }
}

fn initial_observation() -> Observation {
    Observation {
        t: 0,
        x: 0,
        active: 0,
        components: 0,
        xtilde: 0.0,
        condvar: 0.0,
    }
}

/// Summarize a recorded path and its martingale series.
pub fn summarize_replica(
    traj: &Trajectory,
    series: &MartingaleSeries,
    theory: &TheoryValues,
) -> ReplicaSummary {
    let mut builder = SummaryBuilder::new(&traj.params, theory);
    builder.observe(&initial_observation());
    for t in 1..=traj.n() {
        builder.observe(&Observation {
            t: t as u64,
            x: traj.x[t],
            active: traj.active[t],
            components: traj.components[t],
            xtilde: series.xtilde[t],
            condvar: series.condvar[t],
        });
    }
    builder.finish()
}

/// Run one replica keeping only running summaries (O(t₀) memory).
///
/// Produces exactly what [`run_walk`], [`martingale_series`] and
/// [`summarize_replica`] produce for the same stream.
pub fn simulate_summary(
    params: &Params,
    theory: &TheoryValues,
    stream: &mut RngStream,
) -> Result<ReplicaSummary> {
    let mut walker = Walker::new(params, stream)?;
    let mut tracker = MartingaleTracker::new(params);
    let mut builder = SummaryBuilder::new(params, theory);
    builder.observe(&initial_observation());
    while let Some((eta, tested)) = walker.next_step() {
        let s = walker.state;
        let m = tracker.update(eta, tested, s.components);
        builder.observe(&Observation {
            t: s.t,
            x: s.x(),
            active: s.active,
            components: s.components,
            xtilde: m.xtilde,
            condvar: m.condvar,
        });
    }
    Ok(builder.finish())
}

/// Counts of violated path identities; all zero for a valid run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathCheck {
    /// `X_t ≠ Σ_{i≤t} (η_i - 1)`
    pub claim: u64,
    /// `U_t + A_t + t ≠ n`
    pub conservation: u64,
    /// `η_t > U'_{t-1}`
    pub eta_support: u64,
    /// `X_n ≠ -(number of completion gaps)` or gaps not summing to `n`.
    pub components: u64,
    /// `|X_t - X̃_t| > p t C_t` beyond floating slack.
    pub coupling_bound: u64,
    /// `X_t - X̃_t ≠ -Σ q^{t-i} p C_i` beyond floating slack.
    pub coupling_identity: u64,
}

impl PathCheck {
    pub fn total(&self) -> u64 {
        self.claim
            + self.conservation
            + self.eta_support
            + self.components
            + self.coupling_bound
            + self.coupling_identity
    }

    pub fn merge(&mut self, other: &PathCheck) {
        self.claim += other.claim;
        self.conservation += other.conservation;
        self.eta_support += other.eta_support;
        self.components += other.components;
        self.coupling_bound += other.coupling_bound;
        self.coupling_identity += other.coupling_identity;
    }
}

/// Check every exact identity of a recorded path.
pub fn check_path(traj: &Trajectory, series: &MartingaleSeries) -> PathCheck {
    let n = traj.n();
    let p = traj.params.p;
    let slack = FLOAT_SLACK * n as f64;
    let mut check = PathCheck::default();
    let mut running: i64 = 0;
    for t in 0..=n {
        if t > 0 {
            let eta = traj.eta[t - 1];
            if eta > traj.tested(t - 1) {
                check.eta_support += 1;
            }
            running += eta as i64 - 1;
        }
        if traj.x[t] != running
            || traj.x[t] != traj.active[t] as i64 - traj.components[t] as i64
        {
            check.claim += 1;
        }
        if traj.unseen[t] + traj.active[t] + t as u64 != n as u64 {
            check.conservation += 1;
        }
        let gap = traj.x[t] as f64 - series.xtilde[t];
        if gap.abs() > p * t as f64 * traj.components[t] as f64 + slack {
            check.coupling_bound += 1;
        }
        if (gap + series.coupling[t]).abs() > slack {
            check.coupling_identity += 1;
        }
    }
    let times = completion_times(traj);
    let gaps = times.len() as u64 - 1;
    if traj.x[n] != -(gaps as i64)
        || times.last() != Some(&n)
        || traj.components[n] != gaps
    {
        check.components += 1;
    }
    check
}

/// One row of a trajectory dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpRow {
    pub t: u64,
    pub eta: u64,
    #[serde(rename = "A")]
    pub active: u64,
    #[serde(rename = "C")]
    pub components: u64,
    #[serde(rename = "U")]
    pub unseen: u64,
    #[serde(rename = "X")]
    pub x: i64,
    #[serde(rename = "Xtilde")]
    pub xtilde: f64,
}

/// Write `t,eta,A,C,U,X,Xtilde`, one row per step `t = 1..=n`; floats carry
/// 17 significant digits.
pub fn write_trajectory_csv<W: Write>(
    traj: &Trajectory,
    series: &MartingaleSeries,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "eta", "A", "C", "U", "X", "Xtilde"])?;
    for t in 1..=traj.n() {
        w.write_record([
            t.to_string(),
            traj.eta[t - 1].to_string(),
            traj.active[t].to_string(),
            traj.components[t].to_string(),
            traj.unseen[t].to_string(),
            traj.x[t].to_string(),
            format!("{:.16e}", series.xtilde[t]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Vec<DumpRow>> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<std::result::Result<Vec<DumpRow>, _>>()?;
    Ok(rows)
}

/// Recompute the integer identities of a dump: consecutive `t` from 1,
/// `X_t = Σ (η_i - 1)`, `X = A - C`, `U = n - t - A` and, on the last row,
/// `X_n = -C_n`. Returns the number of failing rows.
pub fn verify_dump(rows: &[DumpRow], n: u64) -> u64 {
    let mut bad = 0;
    let mut running = 0i64;
    for (i, row) in rows.iter().enumerate() {
        running += row.eta as i64 - 1;
        let ok = row.t == i as u64 + 1
            && row.x == running
            && row.x == row.active as i64 - row.components as i64
            && row.unseen + row.active + row.t == n;
        if !ok {
            bad += 1;
        }
    }
    match rows.last() {
        Some(last) if last.t == n && last.active == 0 && last.x == -(last.components as i64) => {}
        _ => bad += 1,
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::seed_stream;

    #[test]
    fn two_vertices_complete_graph() {
        let params = Params::with_p(2, 1.0).unwrap();
        let mut s = seed_stream(0, 0);
        let s0 = WalkState::initial(2);
        let (s1, eta1) = step(&s0, &params, &mut s).unwrap();
        assert_eq!(eta1, 1);
        assert_eq!((s1.active, s1.components, s1.x()), (1, 1, 0));
        let (s2, eta2) = step(&s1, &params, &mut s).unwrap();
        assert_eq!(s1.tested(), 0);
        assert_eq!(eta2, 0);
        assert_eq!((s2.active, s2.x()), (0, -1));
        assert!(matches!(
            step(&s2, &params, &mut s),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn empty_graph_steps() {
        let params = Params::with_p(50, 0.0).unwrap();
        let traj = run_walk(&params, &mut seed_stream(1, 0)).unwrap();
        for t in 0..=50 {
            assert_eq!(traj.x[t], -(t as i64));
        }
        assert_eq!(component_sizes(&traj), vec![1; 50]);
    }

    #[test]
    fn complete_graph_path() {
        let params = Params::with_p(3, 1.0).unwrap();
        let traj = run_walk(&params, &mut seed_stream(1, 0)).unwrap();
        assert_eq!(traj.x, vec![0, 1, 0, -1]);
        assert_eq!(component_sizes(&traj), vec![3]);
        assert_eq!(traj.component_count(), 1);
    }

    #[test]
    fn degenerate_martingale_series() {
        let params = Params::with_p(20, 0.0).unwrap();
        let traj = run_walk(&params, &mut seed_stream(1, 0)).unwrap();
        let m = martingale_series(&traj);
        assert_eq!(m.s[0], 0.0);
        assert_eq!(m.xtilde[0], 0.0);
        for t in 1..=20 {
            assert_eq!(m.drift[t], -1.0);
            assert_eq!(m.delta[t], 0.0);
            assert_eq!(m.s[t], 0.0);
            assert_eq!(m.xtilde[t], -(t as f64));
            assert_eq!(m.xtilde[t], traj.x[t] as f64);
        }

        let params = Params::with_p(5, 1.0).unwrap();
        let traj = run_walk(&params, &mut seed_stream(1, 0)).unwrap();
        let m = martingale_series(&traj);
        assert!(m.xtilde.iter().all(|v| v.is_finite()));
        assert_eq!(check_path(&traj, &m).total(), 0);
    }

    #[test]
    fn path_identities_hold() {
        let params = Params::new(10_000, 1.5).unwrap();
        for seed in 0..5 {
            let traj = run_walk(&params, &mut seed_stream(seed, 0)).unwrap();
            let m = martingale_series(&traj);
            assert_eq!(check_path(&traj, &m), PathCheck::default());
            let sizes = component_sizes(&traj);
            assert_eq!(sizes.iter().sum::<u64>(), 10_000);
            assert_eq!(sizes.len() as u64, traj.component_count());
        }
    }

    #[test]
    fn streaming_matches_recorded() {
        let params = Params::new(20_000, 1.5).unwrap();
        let theory = TheoryValues::new(&params).unwrap();
        for seed in 0..4 {
            let traj = run_walk(&params, &mut seed_stream(seed, 2)).unwrap();
            let series = martingale_series(&traj);
            let recorded = summarize_replica(&traj, &series, &theory);
            let streamed = simulate_summary(&params, &theory, &mut seed_stream(seed, 2)).unwrap();
            assert_eq!(recorded, streamed);
            let sizes = component_sizes(&traj);
            assert_eq!(recorded.l1, sizes[0]);
            assert_eq!(recorded.l2, sizes.get(1).copied().unwrap_or(0));
            assert_eq!(recorded.component_count, sizes.len() as u64);
            assert_eq!(recorded.coupling_violations, 0);
        }
    }

    #[test]
    fn complete_graph_summary() {
        for n in [3usize, 10, 1000] {
            let params = Params::with_p(n, 1.0).unwrap();
            let theory = TheoryValues::new(&params).unwrap();
            let s = simulate_summary(&params, &theory, &mut seed_stream(0, 0)).unwrap();
            assert_eq!((s.l1, s.l2, s.z, s.time_t0, s.time_t1), (n as u64, 0, 0, 0, n as u64));
            assert!(s.t1_reached);
        }

        // n = 2: t₀ rounds to n, so the only component finishes inside the
        // window and X never drops below -Z.
        let params = Params::with_p(2, 1.0).unwrap();
        let theory = TheoryValues::new(&params).unwrap();
        let s = simulate_summary(&params, &theory, &mut seed_stream(0, 0)).unwrap();
        assert_eq!((s.l1, s.z, s.time_t1), (2, 1, 2));
        assert!(!s.t1_reached);
    }

    #[test]
    fn csv_dump_roundtrip_verifies() {
        let params = Params::new(2_000, 1.5).unwrap();
        let traj = run_walk(&params, &mut seed_stream(11, 0)).unwrap();
        let series = martingale_series(&traj);
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, &series, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,eta,A,C,U,X,Xtilde\n"));
        let rows = read_trajectory_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 2_000);
        assert_eq!(verify_dump(&rows, 2_000), 0);
        for (t, row) in rows.iter().enumerate() {
            assert_eq!(row.xtilde, series.xtilde[t + 1]);
        }

        let mut broken = rows.clone();
        broken[10].eta += 1;
        assert!(verify_dump(&broken, 2_000) > 0);
    }
}
