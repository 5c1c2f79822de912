//! Event loop: find the next pair of adjacent fronts to meet, solve the
//! Riemann problem there and carry the wave ids through.

use serde::Serialize;
use thiserror::Error;

use crate::flux_models::{derivative_bounds, interpolate, DerivativeBounds, FluxError, FluxSpec};
use crate::pair_history::{DecreaseWitness, FunctionalSnapshot, LemmaReport, PairHistory, SMALL_N_LIMIT};
use crate::riemann::{solve_scalar, RiemannError};
use crate::wavefield::{FieldState, Front, FrontKind, Snapshot, WaveId, WaveStatus};

/// Candidates closer than this in time are one cluster.
pub const TIME_TOL: f64 = 1e-10;
pub const DEFAULT_EVENT_GUARD: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("event guard of {0} events exceeded")]
    Runaway(usize),
    #[error("collision at t = {at} is older than the state time {now}")]
    Stale { at: f64, now: f64 },
    #[error("fronts {0} and {1} cannot collide")]
    BadPair(usize, usize),
    #[error("small-N checks need at most {SMALL_N_LIMIT} waves, got {0}")]
    TooManyWaves(usize),
    #[error(transparent)]
    Riemann(#[from] RiemannError),
    #[error(transparent)]
    Flux(#[from] FluxError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    InteractionPositive,
    InteractionNegative,
    Cancellation,
    Transversal,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::InteractionPositive => "interaction_positive",
            EventKind::InteractionNegative => "interaction_negative",
            EventKind::Cancellation => "cancellation",
            EventKind::Transversal => "transversal",
        }
    }

    pub fn is_interaction(self) -> bool {
        matches!(self, EventKind::InteractionPositive | EventKind::InteractionNegative)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpeedChange {
    pub id: WaveId,
    pub before: f64,
    /// `None` if the wave was cancelled.
    pub after: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Event {
    pub index: usize,
    pub time: f64,
    pub x: f64,
    pub kind: EventKind,
    /// Waves of the left front (the `w` front for transversal events).
    pub left: Vec<WaveId>,
    /// Waves of the right front; empty for transversal events.
    pub right: Vec<WaveId>,
    /// Waves sitting at the event point right after it.
    pub at_point: Vec<WaveId>,
    /// `at_point` split into the fronts leaving the point.
    pub post_groups: Vec<Vec<WaveId>>,
    pub canceled: Vec<WaveId>,
    /// Index of the crossing `v` front, if any.
    pub v_front: Option<usize>,
    /// Its jump in grid units (0 if none).
    pub v_strength: i64,
    pub speed_changes: Vec<SpeedChange>,
}

impl Event {
    /// All waves that took part, in id order.
    pub fn all_waves(&self) -> Vec<WaveId> {
        self.left.iter().chain(&self.right).copied().collect()
    }

    /// Sum over surviving waves of `|speed change| * eps`.
    pub fn sum_abs_dsigma(&self, eps: f64) -> f64 {
        self.speed_changes.iter().filter_map(|c| c.after.map(|a| (a - c.before).abs() * eps)).sum()
    }

    /// Drop of total variation at a cancellation.
    pub fn cancellation_amount(&self, eps: f64) -> f64 {
        assert_eq!(self.kind, EventKind::Cancellation, "cancellation amount of a non-cancellation event");
        self.canceled.len() as f64 * eps
    }

    pub fn at_point_strength(&self, eps: f64) -> f64 {
        self.at_point.len() as f64 * eps
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Collision {
    /// Index of the left front of the pair.
    pub left: usize,
    pub time: f64,
}

fn meeting_time(now: f64, a: &Front, b: &Front) -> Option<f64> {
    if a.speed <= b.speed {
        return None;
    }
    let gap = (b.x - a.x).max(0.0);
    Some(now + gap / (a.speed - b.speed))
}

/// Earliest meeting among adjacent fronts; ties within [`TIME_TOL`] go to
/// the leftmost pair, reported at the earliest time of the cluster.
pub fn next_collision(state: &FieldState) -> Option<Collision> {
    let times: Vec<(usize, f64)> = state
        .fronts
        .windows(2)
        .enumerate()
        .filter_map(|(i, p)| meeting_time(state.time, &p[0], &p[1]).map(|t| (i, t)))
        .collect();
    let first = times.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    if !first.is_finite() {
        return None;
    }
    let (left, _) = times.into_iter().find(|c| c.1 <= first + TIME_TOL)?;
    Some(Collision { left, time: first })
}

/// Keeps front positions ordered after rounding.
fn clamp_order(fronts: &mut [Front]) {
    for i in 1..fronts.len() {
        if fronts[i].x < fronts[i - 1].x {
            fronts[i].x = fronts[i - 1].x;
        }
    }
}

/// Applies one collision to `state` and describes what happened.
pub fn resolve(state: &mut FieldState, hit: Collision, spec: &FluxSpec, index: usize) -> Result<Event, SimError> {
    if hit.time < state.time - TIME_TOL {
        return Err(SimError::Stale { at: hit.time, now: state.time });
    }
    state.advance(hit.time.max(state.time));
    clamp_order(&mut state.fronts);
    let i = hit.left;
    let v_states = state.front_v_states();
    let (a, b) = (&state.fronts[i], &state.fronts[i + 1]);
    let x = 0.5 * (a.x + b.x);
    let eps = state.eps;

    let (kind, left, right, w_a, w_c, v, crossing) = match (&a.kind, &b.kind) {
        (FrontKind::W { waves: l, w_left, w_right: mid }, FrontKind::W { waves: r, w_left: mid2, w_right }) => {
            debug_assert_eq!(mid, mid2);
            let (sl, sr) = (state.wave(l[0]).sign, state.wave(r[0]).sign);
            let kind = match (sl == sr, sl > 0) {
                (true, true) => EventKind::InteractionPositive,
                (true, false) => EventKind::InteractionNegative,
                (false, _) => EventKind::Cancellation,
            };
            (kind, l.clone(), r.clone(), *w_left, *w_right, v_states[i], None)
        }
        (FrontKind::W { waves, w_left, w_right }, FrontKind::V { h }) => {
            let v = state.v_fronts[*h].v_right;
            (EventKind::Transversal, waves.clone(), Vec::new(), *w_left, *w_right, v, Some(*h))
        }
        _ => return Err(SimError::BadPair(i, i + 1)),
    };

    let mut before = Vec::new();
    let mut survivors = Vec::new();
    let mut canceled = Vec::new();
    for &s in left.iter().chain(&right) {
        let w = state.wave(s);
        before.push((s, w.speed().unwrap_or(f64::NAN)));
        let sg = w.sign as i64;
        if sg * w_a <= sg * w.w_hat - 1 && sg * w.w_hat <= sg * w_c {
            survivors.push(s);
        } else {
            canceled.push(s);
        }
    }

    let mut new_fronts = Vec::new();
    if let Some(h) = crossing {
        new_fronts.push(Front { x, speed: -1.0, kind: FrontKind::V { h } });
    }
    let mut post_groups = Vec::new();
    if w_a != w_c {
        let g = interpolate(spec, v as f64 * eps, eps, w_a.min(w_c), w_a.max(w_c))?;
        let fan = solve_scalar(w_a, w_c, &g, v)?;
        let up = w_c > w_a;
        for f in fan.fronts {
            let mut waves: Vec<WaveId> = f
                .cells
                .iter()
                .map(|&c| {
                    let w_hat = if up { c + 1 } else { c };
                    *survivors
                        .iter()
                        .find(|&&s| state.wave(s).w_hat == w_hat && (state.wave(s).sign > 0) == up)
                        .expect("every cell of the new fan has a surviving wave")
                })
                .collect();
            waves.sort_unstable();
            post_groups.push(waves.clone());
            new_fronts.push(Front { x, speed: f.speed, kind: FrontKind::W { waves, w_left: f.w_left, w_right: f.w_right } });
        }
    }
    debug_assert_eq!(post_groups.iter().map(Vec::len).sum::<usize>(), survivors.len());

    for &s in &canceled {
        state.wave_mut(s).status = WaveStatus::Dead { at: state.time };
    }
    state.fronts.splice(i..=i + 1, new_fronts);
    clamp_order(&mut state.fronts);
    state.sync_waves();

    let speed_changes = before
        .into_iter()
        .map(|(id, b)| SpeedChange { id, before: b, after: state.wave(id).speed() })
        .collect();
    Ok(Event {
        index,
        time: state.time,
        x,
        kind,
        left,
        right,
        at_point: survivors,
        post_groups,
        canceled,
        v_front: crossing,
        v_strength: crossing.map_or(0, |h| state.v_fronts[h].strength()),
        speed_changes,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RunOptions {
    pub event_guard: usize,
    /// Validate the enumeration after every event.
    pub validate: bool,
    /// Keep the literal per-pair tables and check the lemmas on them.
    pub small_n: bool,
    /// Keep a snapshot of the state after every event.
    pub keep_states: bool,
    pub bounds_grid: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { event_guard: DEFAULT_EVENT_GUARD, validate: true, small_n: false, keep_states: false, bounds_grid: 256 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EventRecord {
    pub event: Event,
    pub snapshot: FunctionalSnapshot,
    pub witness: Option<DecreaseWitness>,
    pub enumeration_violations: Vec<String>,
    pub lemmas: Option<LemmaReport>,
    /// Quadratic functional recomputed by a double loop over pairs.
    pub q_quadratic_brute: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub flux: String,
    pub eps: f64,
    pub bounds: DerivativeBounds,
    pub tv_w0: f64,
    pub tv_v0: f64,
    pub initial: FieldState,
    pub final_state: FieldState,
    pub initial_snapshot: FunctionalSnapshot,
    pub initial_violations: Vec<String>,
    pub initial_lemmas: Option<LemmaReport>,
    pub records: Vec<EventRecord>,
    #[serde(skip)]
    pub states: Vec<Snapshot>,
}

impl Trajectory {
    pub fn event_count(&self) -> usize {
        self.records.len()
    }

    /// Snapshot in force just before event `k` (0-based record index).
    pub fn snapshot_before(&self, k: usize) -> &FunctionalSnapshot {
        if k == 0 {
            &self.initial_snapshot
        } else {
            &self.records[k - 1].snapshot
        }
    }

    pub fn has_v_fronts(&self) -> bool {
        !self.initial.v_fronts.is_empty()
    }
}

/// Runs from `initial` until no two fronts approach each other.
pub fn run(spec: &FluxSpec, initial: FieldState, opts: &RunOptions) -> Result<Trajectory, SimError> {
    if opts.small_n && initial.wave_count() > SMALL_N_LIMIT {
        return Err(SimError::TooManyWaves(initial.wave_count()));
    }
    let bounds = derivative_bounds(spec, opts.bounds_grid);
    let mut history = PairHistory::new(&initial, spec, bounds, opts.small_n);
    let mut state = initial.clone();
    let mut records = Vec::new();
    let mut states = Vec::new();
    if opts.keep_states {
        states.push(state.snapshot());
    }
    let initial_snapshot = history.snapshot(&state, 0.0);
    let initial_lemmas = history.lemma_report(&state);
    let initial_violations = if opts.validate { state.validate_enumeration() } else { Vec::new() };

    while let Some(hit) = next_collision(&state) {
        if records.len() >= opts.event_guard {
            return Err(SimError::Runaway(opts.event_guard));
        }
        let index = records.len() + 1;
        let witness = {
            let (a, b) = (&state.fronts[hit.left], &state.fronts[hit.left + 1]);
            let same_sign = !a.is_v()
                && !b.is_v()
                && state.wave(a.waves()[0]).sign == state.wave(b.waves()[0]).sign;
            if same_sign {
                let mut pre = state.clone();
                pre.advance(hit.time.max(pre.time));
                Some(history.decrease_witness(&pre, a.waves(), b.waves()))
            } else {
                None
            }
        };
        let event = resolve(&mut state, hit, spec, index)?;
        log::debug!("event {index} {} at t={} x={}", event.kind.as_str(), event.time, event.x);
        let snapshot = history.on_event(&event, &state);
        let enumeration_violations = if opts.validate { state.validate_enumeration() } else { Vec::new() };
        let lemmas = history.lemma_report(&state);
        let q_quadratic_brute = opts.validate.then(|| history.q_quadratic_brute());
        if opts.keep_states {
            states.push(state.snapshot());
        }
        records.push(EventRecord { event, snapshot, witness, enumeration_violations, lemmas, q_quadratic_brute });
    }

    Ok(Trajectory {
        flux: spec.name.clone(),
        eps: initial.eps,
        bounds,
        tv_w0: initial.tv_w(),
        tv_v0: initial.tv_v(),
        initial_snapshot,
        initial_violations,
        initial_lemmas,
        initial,
        final_state: state,
        records,
        states,
    })
}
