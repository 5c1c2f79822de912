//! Scenario files, random initial data, and the files a run leaves behind.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flux_models::{Domain, FluxChoice, FluxSpec};
use crate::simulator::{run, EventKind, EventRecord, RunOptions, SimError, Trajectory, DEFAULT_EVENT_GUARD};
use crate::verifier::{verify, CheckLevel, CheckResult, CheckSummary, Report};
use crate::wavefield::{initial_enumeration, EnumerationError, StepFunction};

/// Left end of the support of generated data.
pub const SUPPORT_MIN: f64 = 0.0;
/// Right end of the support of generated data.
pub const SUPPORT_MAX: f64 = 10.0;
const MAX_DRAWS: usize = 10_000;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("eps must be positive and finite, got {0}")]
    BadEps(f64),
    #[error("value {value} is not a multiple of eps = {eps}")]
    OffGrid { value: f64, eps: f64 },
    #[error("value {0} lies outside the flux domain")]
    OutsideBox(f64),
    #[error("random datum needs at least one jump")]
    NoJumps,
    #[error("amplitude {amplitude} leaves no nonzero level on the grid inside the domain")]
    Infeasible { amplitude: f64 },
    #[error("no datum with at most {0} waves found")]
    WaveCap(usize),
    #[error("bad seed range `{0}`, expected A..B or A..=B")]
    SeedRange(String),
    #[error("config: {0}")]
    Config(#[from] serde_json::Error),
    #[error(transparent)]
    Enumeration(#[from] EnumerationError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// How an initial datum is given. Values are real numbers and must sit on
/// the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatumSpec {
    Explicit {
        #[serde(default)]
        left: f64,
        /// `(x, value from x on)`.
        #[serde(default)]
        steps: Vec<(f64, f64)>,
    },
    Random {
        jumps: usize,
        amplitude: f64,
        #[serde(default)]
        max_waves: Option<usize>,
    },
}

impl Default for DatumSpec {
    fn default() -> Self {
        DatumSpec::Explicit { left: 0.0, steps: Vec::new() }
    }
}

fn default_guard() -> usize {
    DEFAULT_EVENT_GUARD
}

fn default_eps() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub flux: FluxChoice,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub seed: u64,
    pub w0: DatumSpec,
    #[serde(default)]
    pub v0: DatumSpec,
    #[serde(default)]
    pub check_level: CheckLevel,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "default_guard")]
    pub event_guard: usize,
    #[serde(default)]
    pub keep_snapshots: bool,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        ScenarioConfig::from_json(&fs::read_to_string(path)?)
    }

    /// Random data with the default flux; the shape used by the ensembles.
    pub fn random(eps: f64, seed: u64, w_jumps: usize, max_waves: usize, v_jumps: usize) -> Self {
        ScenarioConfig {
            flux: FluxChoice::default(),
            eps,
            seed,
            w0: DatumSpec::Random { jumps: w_jumps, amplitude: 0.8, max_waves: Some(max_waves) },
            v0: if v_jumps == 0 {
                DatumSpec::default()
            } else {
                DatumSpec::Random { jumps: v_jumps, amplitude: 0.5, max_waves: None }
            },
            check_level: CheckLevel::Full,
            out_dir: None,
            event_guard: DEFAULT_EVENT_GUARD,
            keep_snapshots: false,
        }
    }

    fn run_options(&self) -> RunOptions {
        RunOptions {
            event_guard: self.event_guard,
            validate: self.check_level != CheckLevel::Fast,
            small_n: self.check_level == CheckLevel::SmallN,
            keep_states: self.keep_snapshots,
            ..RunOptions::default()
        }
    }
}

fn to_units(value: f64, eps: f64) -> Result<i64, ScenarioError> {
    let k = (value / eps).round();
    if (k * eps - value).abs() > 1e-9 * eps.max(value.abs()) {
        return Err(ScenarioError::OffGrid { value, eps });
    }
    Ok(k as i64)
}

fn explicit(left: f64, steps: &[(f64, f64)], eps: f64, inside: impl Fn(f64) -> bool) -> Result<StepFunction, ScenarioError> {
    let mut out = StepFunction { left: to_units(left, eps)?, steps: Vec::new() };
    for &(x, v) in std::iter::once(&(f64::NEG_INFINITY, left)).chain(steps) {
        if !inside(v) {
            return Err(ScenarioError::OutsideBox(v));
        }
        if x.is_finite() {
            out.steps.push((x, to_units(v, eps)?));
        }
    }
    Ok(out.normalized())
}

/// Grid levels `k` with `0 < |k| * eps <= amplitude` inside `[lo, hi]`.
fn level_range(amplitude: f64, lo: f64, hi: f64, eps: f64) -> (i64, i64) {
    let top = amplitude.min(hi);
    let bottom = (-amplitude).max(lo);
    ((bottom / eps + 1e-9).ceil() as i64, (top / eps - 1e-9).floor() as i64)
}

fn random_datum<R: Rng>(rng: &mut R, jumps: usize, amplitude: f64, lo: f64, hi: f64, eps: f64) -> Result<StepFunction, ScenarioError> {
    if jumps == 0 {
        return Err(ScenarioError::NoJumps);
    }
    let (kmin, kmax) = level_range(amplitude, lo, hi, eps);
    if kmin > kmax || (kmin == 0 && kmax == 0) {
        return Err(ScenarioError::Infeasible { amplitude });
    }
    let mut xs: Vec<f64> = Vec::with_capacity(jumps + 1);
    while xs.len() < jumps + 1 {
        // Dyadic positions keep the collision times exact for longer.
        let x = (rng.gen_range(SUPPORT_MIN..SUPPORT_MAX) * 1024.0).round() / 1024.0;
        if !xs.contains(&x) {
            xs.push(x);
        }
    }
    xs.sort_by(f64::total_cmp);
    let mut prev = 0;
    let mut steps = Vec::with_capacity(jumps + 1);
    for &x in &xs[..jumps] {
        let mut k = rng.gen_range(kmin..=kmax);
        if k == prev {
            k = if k == kmax { kmin } else { k + 1 };
        }
        steps.push((x, k));
        prev = k;
    }
    steps.push((xs[jumps], 0));
    Ok(StepFunction { left: 0, steps }.normalized())
}

fn datum<R: Rng>(rng: &mut R, spec: &DatumSpec, eps: f64, lo: f64, hi: f64) -> Result<StepFunction, ScenarioError> {
    match spec {
        DatumSpec::Explicit { left, steps } => explicit(*left, steps, eps, |v| v >= lo - 1e-12 && v <= hi + 1e-12),
        DatumSpec::Random { jumps, amplitude, max_waves } => {
            let cap = max_waves.unwrap_or(usize::MAX);
            for _ in 0..MAX_DRAWS {
                let d = random_datum(rng, *jumps, *amplitude, lo, hi, eps)?;
                if d.variation() as usize <= cap {
                    return Ok(d);
                }
            }
            Err(ScenarioError::WaveCap(cap))
        }
    }
}

/// `w0` and `v0` on the grid of `config.eps`, reproducible from `seed`.
pub fn generate_initial_data(config: &ScenarioConfig, seed: u64) -> Result<(StepFunction, StepFunction), ScenarioError> {
    let eps = config.eps;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(ScenarioError::BadEps(eps));
    }
    let domain: Domain = config.flux.build().domain;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w0 = datum(&mut rng, &config.w0, eps, domain.w_min, domain.w_max)?;
    let v0 = datum(&mut rng, &config.v0, eps, domain.v_min, domain.v_max)?;
    Ok((w0, v0))
}

/// Result of one scenario, kept in memory.
pub struct Outcome {
    pub seed: u64,
    pub spec: FluxSpec,
    pub trajectory: Trajectory,
    pub report: Report,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.report.passed()
    }
}

/// Generates the datum, runs it and checks it, without touching disk.
pub fn simulate(config: &ScenarioConfig) -> Result<Outcome, ScenarioError> {
    let spec = config.flux.build();
    let (w0, v0) = generate_initial_data(config, config.seed)?;
    let initial = initial_enumeration(&w0, &v0, &spec, config.eps)?;
    let trajectory = run(&spec, initial, &config.run_options())?;
    let report = verify(&trajectory, config.check_level);
    Ok(Outcome { seed: config.seed, spec, trajectory, report })
}

#[derive(Serialize)]
struct EventRow<'a> {
    j: usize,
    t_j: f64,
    x_j: f64,
    kind: &'a str,
    w_strength: f64,
    v_strength: f64,
    cancellation: f64,
}

pub fn events_csv(traj: &Trajectory) -> Result<String, ScenarioError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for rec in &traj.records {
        let e = &rec.event;
        w.serialize(EventRow {
            j: e.index,
            t_j: e.time,
            x_j: e.x,
            kind: e.kind.as_str(),
            w_strength: e.at_point_strength(traj.eps),
            v_strength: e.v_strength as f64 * traj.eps,
            cancellation: if e.kind == EventKind::Cancellation { e.cancellation_amount(traj.eps) } else { 0.0 },
        })?;
    }
    finish(w)
}

#[derive(Serialize)]
struct FunctionalRow {
    j: usize,
    t_j: f64,
    tv_w: f64,
    q_trans: f64,
    q_quadratic: f64,
    sum_abs_dsigma: f64,
}

pub fn functionals_csv(traj: &Trajectory) -> Result<String, ScenarioError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let rows = std::iter::once((0, &traj.initial_snapshot)).chain(traj.records.iter().map(|r| (r.event.index, &r.snapshot)));
    for (j, s) in rows {
        w.serialize(FunctionalRow {
            j,
            t_j: s.time,
            tv_w: s.tv_w,
            q_trans: s.q_trans,
            q_quadratic: s.q_quadratic,
            sum_abs_dsigma: s.sum_abs_dsigma,
        })?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, ScenarioError> {
    let bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Serialize)]
struct ReportFile<'a> {
    seed: u64,
    flux: &'a str,
    eps: f64,
    events: usize,
    passed: bool,
    summary: BTreeMap<String, CheckSummary>,
    results: &'a [CheckResult],
    /// Full records of the events with a failing check.
    failed_events: Vec<&'a EventRecord>,
}

pub fn report_json(outcome: &Outcome) -> Result<String, ScenarioError> {
    let traj = &outcome.trajectory;
    let failed: Vec<usize> = outcome.report.failures().filter_map(|r| r.event).collect();
    let file = ReportFile {
        seed: outcome.seed,
        flux: &traj.flux,
        eps: traj.eps,
        events: traj.event_count(),
        passed: outcome.passed(),
        summary: outcome.report.summary(),
        results: &outcome.report.results,
        failed_events: traj.records.iter().filter(|r| failed.contains(&r.event.index)).collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Writes every file into a staging directory next to `out` first, then
/// moves them in.
pub fn write_artifacts(outcome: &Outcome, out: &Path) -> Result<(), ScenarioError> {
    fs::create_dir_all(out)?;
    let staging = tempfile::Builder::new().prefix(".staging").tempdir_in(out)?;
    let mut files = vec![
        ("events.csv", events_csv(&outcome.trajectory)?),
        ("functionals.csv", functionals_csv(&outcome.trajectory)?),
        ("report.json", report_json(outcome)?),
    ];
    if !outcome.trajectory.states.is_empty() {
        files.push(("snapshots.json", serde_json::to_string(&outcome.trajectory.states)?));
    }
    for (name, body) in &files {
        fs::write(staging.path().join(name), body)?;
    }
    for (name, _) in &files {
        fs::rename(staging.path().join(name), out.join(name))?;
    }
    Ok(())
}

/// Runs one scenario and writes its files if it has an output directory.
pub fn run_scenario(config: &ScenarioConfig) -> Result<Outcome, ScenarioError> {
    let outcome = simulate(config)?;
    log::info!(
        "seed {}: {} events, {} checks, passed = {}",
        outcome.seed,
        outcome.trajectory.event_count(),
        outcome.report.results.len(),
        outcome.passed()
    );
    for f in outcome.report.failures() {
        log::warn!("check {} failed at event {:?}: lhs {} rhs {}", f.name, f.event, f.lhs, f.rhs);
    }
    if let Some(out) = &config.out_dir {
        write_artifacts(&outcome, out)?;
    }
    Ok(outcome)
}

/// Parses `A..B` (exclusive) or `A..=B`.
pub fn parse_seed_range(text: &str) -> Result<Vec<u64>, ScenarioError> {
    let bad = || ScenarioError::SeedRange(text.to_string());
    let (a, b, inclusive) = match text.split_once("..=") {
        Some((a, b)) => (a, b, true),
        None => {
            let (a, b) = text.split_once("..").ok_or_else(bad)?;
            (a, b, false)
        }
    };
    let a: u64 = a.trim().parse().map_err(|_| bad())?;
    let b: u64 = b.trim().parse().map_err(|_| bad())?;
    Ok(if inclusive { (a..=b).collect() } else { (a..b).collect() })
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub check_level: CheckLevel,
    pub events: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct BatchSummary {
    pub runs: Vec<RunSummary>,
    /// Per check level, per check name.
    pub by_level: BTreeMap<String, BTreeMap<String, CheckSummary>>,
    pub passed: bool,
}

fn level_name(level: CheckLevel) -> String {
    serde_json::to_value(level).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

fn merge(into: &mut BTreeMap<String, CheckSummary>, from: BTreeMap<String, CheckSummary>) {
    for (name, s) in from {
        let e = into.entry(name).or_insert(CheckSummary { count: 0, failures: 0, min_slack: f64::INFINITY });
        e.count += s.count;
        e.failures += s.failures;
        e.min_slack = e.min_slack.min(s.min_slack);
    }
}

/// Runs the configs in parallel. Each one with an output directory writes
/// there; the first error aborts the batch.
pub fn batch(configs: &[ScenarioConfig]) -> Result<BatchSummary, ScenarioError> {
    let results: Vec<(RunSummary, BTreeMap<String, CheckSummary>)> = configs
        .par_iter()
        .map(|c| {
            let o = run_scenario(c)?;
            let s = RunSummary {
                seed: c.seed,
                check_level: c.check_level,
                events: o.trajectory.event_count(),
                passed: o.passed(),
            };
            Ok((s, o.report.summary()))
        })
        .collect::<Result<_, ScenarioError>>()?;
    let mut out = BatchSummary { passed: true, ..BatchSummary::default() };
    for (run, summary) in results {
        out.passed &= run.passed;
        merge(out.by_level.entry(level_name(run.check_level)).or_default(), summary);
        out.runs.push(run);
    }
    Ok(out)
}

/// One config per seed; outputs go to `out/seed_<n>` when `out` is set.
pub fn seed_sweep(base: &ScenarioConfig, seeds: &[u64], out: Option<&Path>) -> Vec<ScenarioConfig> {
    seeds
        .iter()
        .map(|&seed| ScenarioConfig {
            seed,
            out_dir: out.map(|o| o.join(format!("seed_{seed}"))),
            ..base.clone()
        })
        .collect()
}
