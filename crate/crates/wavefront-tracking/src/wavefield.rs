//! Waves, fronts and the field state they make up.
//!
//! Every unit jump of `w` at time zero becomes a wave with a permanent id.
//! A wave keeps its sign and right state for life; its position and speed
//! are those of the front carrying it, until it is cancelled.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envelopes::entropic_speed;
use crate::flux_models::{interpolate, FluxSpec};
use crate::riemann::{solve_triangular, Family, RiemannError};

pub type WaveId = u32;

#[derive(Debug, Error, PartialEq)]
pub enum EnumerationError {
    #[error("jump positions must be finite and strictly increasing")]
    UnsortedJumps,
    #[error("datum is not compactly supported (w must start and end at 0)")]
    NotCompact,
    #[error(transparent)]
    Riemann(#[from] RiemannError),
}

/// Right-continuous step function with integer values (multiples of eps).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    /// Value on `(-inf, first jump)`.
    pub left: i64,
    /// `(x, value from x on)`, with `x` strictly increasing.
    pub steps: Vec<(f64, i64)>,
}

impl StepFunction {
    pub fn value_at(&self, x: f64) -> i64 {
        self.steps.iter().take_while(|(p, _)| *p <= x).last().map_or(self.left, |s| s.1)
    }

    pub fn right(&self) -> i64 {
        self.steps.last().map_or(self.left, |s| s.1)
    }

    /// Total variation in units of eps.
    pub fn variation(&self) -> i64 {
        let mut prev = self.left;
        let mut tv = 0;
        for &(_, v) in &self.steps {
            tv += (v - prev).abs();
            prev = v;
        }
        tv
    }

    /// Drops steps that do not change the value.
    pub fn normalized(&self) -> StepFunction {
        let mut out = StepFunction { left: self.left, steps: Vec::new() };
        let mut prev = self.left;
        for &(x, v) in &self.steps {
            if v != prev {
                out.steps.push((x, v));
                prev = v;
            }
        }
        out
    }

    fn is_sorted(&self) -> bool {
        self.steps.iter().all(|s| s.0.is_finite()) && self.steps.windows(2).all(|p| p[0].0 < p[1].0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum WaveStatus {
    Alive { position: f64, speed: f64 },
    /// Position and speed are `+inf` from `at` on.
    Dead { at: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WaveRecord {
    pub id: WaveId,
    pub sign: i8,
    /// Right state, as a grid index.
    pub w_hat: i64,
    pub status: WaveStatus,
}

impl WaveRecord {
    /// Left index of the cell this wave occupies: `(w_hat - 1, w_hat)` for
    /// positive waves, `(w_hat, w_hat + 1)` for negative ones.
    pub fn cell(&self) -> i64 {
        if self.sign > 0 {
            self.w_hat - 1
        } else {
            self.w_hat
        }
    }

    pub fn is_alive(&self) -> bool {
        matches!(self.status, WaveStatus::Alive { .. })
    }

    pub fn position(&self) -> Option<f64> {
        match self.status {
            WaveStatus::Alive { position, .. } => Some(position),
            WaveStatus::Dead { .. } => None,
        }
    }

    pub fn speed(&self) -> Option<f64> {
        match self.status {
            WaveStatus::Alive { speed, .. } => Some(speed),
            WaveStatus::Dead { .. } => None,
        }
    }

    pub fn death_time(&self) -> Option<f64> {
        match self.status {
            WaveStatus::Dead { at } => Some(at),
            WaveStatus::Alive { .. } => None,
        }
    }
}

/// A jump of `v`, moving left at unit speed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VFront {
    pub id: usize,
    pub x0: f64,
    pub v_left: i64,
    pub v_right: i64,
}

impl VFront {
    pub fn position(&self, t: f64) -> f64 {
        self.x0 - t
    }

    /// Jump size in grid units.
    pub fn strength(&self) -> i64 {
        (self.v_right - self.v_left).abs()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum FrontKind {
    /// Waves of the `w` field sharing one position and speed, ids ascending.
    W { waves: Vec<WaveId>, w_left: i64, w_right: i64 },
    /// Index into `FieldState::v_fronts`.
    V { h: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Front {
    pub x: f64,
    pub speed: f64,
    pub kind: FrontKind,
}

impl Front {
    pub fn waves(&self) -> &[WaveId] {
        match &self.kind {
            FrontKind::W { waves, .. } => waves,
            FrontKind::V { .. } => &[],
        }
    }

    pub fn is_v(&self) -> bool {
        matches!(self.kind, FrontKind::V { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldState {
    pub time: f64,
    pub eps: f64,
    pub w_far_left: i64,
    pub w_far_right: i64,
    pub v_far_left: i64,
    pub waves: Vec<WaveRecord>,
    pub v_fronts: Vec<VFront>,
    /// All fronts, left to right.
    pub fronts: Vec<Front>,
}

impl FieldState {
    pub fn wave(&self, s: WaveId) -> &WaveRecord {
        &self.waves[s as usize - 1]
    }

    pub fn wave_mut(&mut self, s: WaveId) -> &mut WaveRecord {
        &mut self.waves[s as usize - 1]
    }

    pub fn wave_count(&self) -> usize {
        self.waves.len()
    }

    pub fn alive_ids(&self) -> Vec<WaveId> {
        self.waves.iter().filter(|w| w.is_alive()).map(|w| w.id).collect()
    }

    pub fn alive_count(&self) -> usize {
        self.waves.iter().filter(|w| w.is_alive()).count()
    }

    pub fn tv_w(&self) -> f64 {
        self.alive_count() as f64 * self.eps
    }

    pub fn tv_v(&self) -> f64 {
        self.v_fronts.iter().map(|h| h.strength()).sum::<i64>() as f64 * self.eps
    }

    /// `v` state in force at each front: the region value for `w` fronts,
    /// the left value for `v` fronts.
    pub fn front_v_states(&self) -> Vec<i64> {
        let mut v = self.v_far_left;
        self.fronts
            .iter()
            .map(|f| match f.kind {
                FrontKind::V { h } => {
                    let here = v;
                    v = self.v_fronts[h].v_right;
                    here
                }
                FrontKind::W { .. } => v,
            })
            .collect()
    }

    /// `v` at the front of each alive wave, indexed by wave id (slot 0 is
    /// unused).
    pub fn v_labels(&self) -> Vec<Option<i64>> {
        let mut out = vec![None; self.waves.len() + 1];
        for (f, v) in self.fronts.iter().zip(self.front_v_states()) {
            for &s in f.waves() {
                out[s as usize] = Some(v);
            }
        }
        out
    }

    /// Front index of each alive wave, indexed by wave id.
    pub fn front_of(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.waves.len() + 1];
        for (i, f) in self.fronts.iter().enumerate() {
            for &s in f.waves() {
                out[s as usize] = Some(i);
            }
        }
        out
    }

    /// Moves every front along its line to time `t`.
    pub fn advance(&mut self, t: f64) {
        let dt = t - self.time;
        if dt != 0.0 {
            for f in &mut self.fronts {
                f.x += f.speed * dt;
            }
        }
        self.time = t;
        self.sync_waves();
    }

    /// Copies front positions and speeds onto the alive waves.
    pub fn sync_waves(&mut self) {
        for i in 0..self.fronts.len() {
            let (x, speed) = (self.fronts[i].x, self.fronts[i].speed);
            if let FrontKind::W { waves, .. } = &self.fronts[i].kind {
                for &s in waves {
                    self.waves[s as usize - 1].status = WaveStatus::Alive { position: x, speed };
                }
            }
        }
    }

    /// Profile rebuilt from the waves alone: `w(-inf)` plus the signed
    /// count of alive waves at or left of `x`.
    pub fn reconstruct_profile(&self) -> StepFunction {
        let mut atoms: Vec<(f64, i64)> = self
            .waves
            .iter()
            .filter_map(|w| w.position().map(|x| (x, w.sign as i64)))
            .collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out = StepFunction { left: self.w_far_left, steps: Vec::new() };
        let mut value = self.w_far_left;
        let mut i = 0;
        while i < atoms.len() {
            let x = atoms[i].0;
            while i < atoms.len() && atoms[i].0 == x {
                value += atoms[i].1;
                i += 1;
            }
            out.steps.push((x, value));
        }
        out.normalized()
    }

    /// Profile rebuilt from the states stored on the fronts.
    pub fn front_profile(&self) -> StepFunction {
        let mut out = StepFunction { left: self.w_far_left, steps: Vec::new() };
        for f in &self.fronts {
            if let FrontKind::W { w_right, .. } = f.kind {
                match out.steps.last_mut() {
                    Some(last) if last.0 == f.x => last.1 = w_right,
                    _ => out.steps.push((f.x, w_right)),
                }
            }
        }
        out.normalized()
    }

    /// Speeds the Riemann problem of front `i` assigns to its waves, under
    /// the flux at the front's `v` state.
    pub fn assign_speeds(&self, i: usize, spec: &FluxSpec) -> Vec<(WaveId, f64)> {
        let FrontKind::W { waves, w_left, w_right } = &self.fronts[i].kind else {
            return Vec::new();
        };
        let v = self.front_v_states()[i];
        let sign = self.wave(waves[0]).sign;
        assert!(waves.iter().all(|&s| self.wave(s).sign == sign), "mixed-sign front");
        let (lo, hi) = (*w_left.min(w_right), *w_left.max(w_right));
        let g = interpolate(spec, v as f64 * self.eps, self.eps, lo, hi).expect("front states inside the box");
        waves.iter().map(|&s| (s, entropic_speed(&g, lo, hi, self.wave(s).cell(), sign))).collect()
    }

    /// Lists every way the state fails to be an enumeration of waves.
    pub fn validate_enumeration(&self) -> Vec<String> {
        let mut bad = Vec::new();
        for (i, w) in self.waves.iter().enumerate() {
            if w.id as usize != i + 1 {
                bad.push(format!("wave slot {i} holds id {}", w.id));
            }
            if w.sign != 1 && w.sign != -1 {
                bad.push(format!("wave {} has sign {}", w.id, w.sign));
            }
        }
        let mut seen = vec![0u32; self.waves.len() + 1];
        let mut last_id = 0;
        let mut w_run = self.w_far_left;
        let mut v_run = self.v_far_left;
        for (i, f) in self.fronts.iter().enumerate() {
            if i > 0 && self.fronts[i - 1].x > f.x {
                bad.push(format!("fronts {} and {i} are out of order", i - 1));
            }
            match &f.kind {
                FrontKind::V { h } => {
                    let vf = &self.v_fronts[*h];
                    if vf.v_left != v_run {
                        bad.push(format!("v front {h} starts from {} but v is {v_run}", vf.v_left));
                    }
                    v_run = vf.v_right;
                    if f.speed != -1.0 || (f.x - vf.position(self.time)).abs() > 1e-9 {
                        bad.push(format!("v front {h} is off its line"));
                    }
                }
                FrontKind::W { waves, w_left, w_right } => {
                    if waves.is_empty() {
                        bad.push(format!("front {i} carries no waves"));
                        continue;
                    }
                    if *w_left != w_run {
                        bad.push(format!("front {i} starts from {w_left} but w is {w_run}"));
                    }
                    w_run = *w_right;
                    let sign = self.wave(waves[0]).sign;
                    if (w_right - w_left) != sign as i64 * waves.len() as i64 {
                        bad.push(format!("front {i} jump {w_left}->{w_right} does not match {} waves", waves.len()));
                    }
                    for (k, &s) in waves.iter().enumerate() {
                        let w = self.wave(s);
                        seen[s as usize] += 1;
                        if s <= last_id {
                            bad.push(format!("wave {s} in front {i} breaks id order"));
                        }
                        last_id = s;
                        if w.sign != sign {
                            bad.push(format!("front {i} mixes signs"));
                        }
                        let expect = w_left + sign as i64 * (k as i64 + 1);
                        if w.w_hat != expect {
                            bad.push(format!("wave {s} has right state {} where {expect} is needed", w.w_hat));
                        }
                        match w.status {
                            WaveStatus::Alive { position, speed } => {
                                if position != f.x || speed != f.speed {
                                    bad.push(format!("wave {s} disagrees with its front"));
                                }
                            }
                            WaveStatus::Dead { .. } => bad.push(format!("dead wave {s} sits in front {i}")),
                        }
                    }
                }
            }
        }
        if w_run != self.w_far_right {
            bad.push(format!("w ends at {w_run}, expected {}", self.w_far_right));
        }
        for w in &self.waves {
            let n = seen[w.id as usize];
            if w.is_alive() && n != 1 {
                bad.push(format!("alive wave {} appears in {n} fronts", w.id));
            }
        }
        if self.reconstruct_profile() != self.front_profile() {
            bad.push("signed wave count does not reproduce the profile".to_string());
        }
        bad
    }

    /// JSON-friendly view of the state.
    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            time: self.time,
            eps: self.eps,
            waves: self
                .waves
                .iter()
                .map(|w| WaveSnapshot {
                    id: w.id,
                    sign: w.sign,
                    w_hat: w.w_hat,
                    position: w.position(),
                    speed: w.speed(),
                })
                .collect(),
            v_fronts: self
                .v_fronts
                .iter()
                .map(|h| VFrontSnapshot {
                    id: h.id,
                    position: h.position(self.time),
                    v_left: h.v_left,
                    v_right: h.v_right,
                    strength: h.strength() as f64 * self.eps,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WaveSnapshot {
    pub id: WaveId,
    pub sign: i8,
    pub w_hat: i64,
    /// `None` once the wave is cancelled.
    pub position: Option<f64>,
    pub speed: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VFrontSnapshot {
    pub id: usize,
    pub position: f64,
    pub v_left: i64,
    pub v_right: i64,
    pub strength: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Snapshot {
    pub time: f64,
    pub eps: f64,
    pub waves: Vec<WaveSnapshot>,
    pub v_fronts: Vec<VFrontSnapshot>,
}

/// Waves and fronts at time zero. Each `w` jump contributes its unit
/// steps as waves, numbered left to right; each jump location gets the
/// fan of its Riemann problem.
pub fn initial_enumeration(
    w0: &StepFunction,
    v0: &StepFunction,
    spec: &FluxSpec,
    eps: f64,
) -> Result<FieldState, EnumerationError> {
    if !w0.is_sorted() || !v0.is_sorted() {
        return Err(EnumerationError::UnsortedJumps);
    }
    if w0.left != 0 || w0.right() != 0 {
        return Err(EnumerationError::NotCompact);
    }
    let mut xs: Vec<f64> = w0.steps.iter().chain(&v0.steps).map(|s| s.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    let mut state = FieldState {
        time: 0.0,
        eps,
        w_far_left: w0.left,
        w_far_right: w0.right(),
        v_far_left: v0.left,
        waves: Vec::new(),
        v_fronts: Vec::new(),
        fronts: Vec::new(),
    };
    let (mut w, mut v) = (w0.left, v0.left);
    for x in xs {
        let w_next = w0.value_at(x);
        let v_next = v0.value_at(x);
        let fan = solve_triangular((w, v), (w_next, v_next), spec, eps)?;
        let sign: i8 = if w_next > w { 1 } else { -1 };
        let first = state.waves.len() as WaveId + 1;
        for i in 1..=(w_next - w).abs() {
            let id = first + i as WaveId - 1;
            state.waves.push(WaveRecord {
                id,
                sign,
                w_hat: w + sign as i64 * i,
                status: WaveStatus::Alive { position: x, speed: 0.0 },
            });
        }
        for f in fan.fronts {
            let kind = match f.family {
                Family::First => {
                    let h = state.v_fronts.len();
                    state.v_fronts.push(VFront { id: h + 1, x0: x, v_left: f.v_left, v_right: f.v_right });
                    FrontKind::V { h }
                }
                Family::Second => {
                    let mut waves: Vec<WaveId> = f
                        .cells
                        .iter()
                        .map(|&c| {
                            let w_hat = if sign > 0 { c + 1 } else { c };
                            first + ((w_hat - w) * sign as i64) as WaveId - 1
                        })
                        .collect();
                    waves.sort_unstable();
                    FrontKind::W { waves, w_left: f.w_left, w_right: f.w_right }
                }
            };
            state.fronts.push(Front { x, speed: f.speed, kind });
        }
        w = w_next;
        v = v_next;
    }
    state.sync_waves();
    Ok(state)
}
