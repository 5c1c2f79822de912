//! Pairwise interaction history and the functionals built on it.
//!
//! A pair of waves that has met at some point is either joined (same
//! front) or divided. Divided pairs carry a partition of the waves they met
//! with, refined as the effective flux changes, and an accumulated weight
//! `pi` that grows only when a `v` front crosses part of that partition.
//!
//! The quadratic functional sums `weight * eps^2` over alive pairs, where
//! the weight is zero for joined pairs, `pi / gap` for divided pairs and the
//! curvature bound for pairs that never met.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::envelopes::{envelope, group_equal, hull_for_sign};
use crate::flux_models::{DerivativeBounds, EffectiveFlux, FluxSpec};
use crate::simulator::{Event, EventKind};
use crate::wavefield::{FieldState, FrontKind, WaveId};

/// Where and when a group of waves last sat together.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum MeetKey {
    /// The jump with this index in the initial datum.
    Initial(usize),
    /// The event with this index.
    Event(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PairStatus {
    NeverInteracted,
    Joined,
    Divided,
}

/// Ordered partition shared by every divided pair that last met at `key`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionRecord {
    pub key: MeetKey,
    pub time: f64,
    pub x: f64,
    /// Contiguous id runs, left to right. Their union is the set of alive
    /// waves that were present at the meeting.
    pub classes: Vec<Vec<WaveId>>,
}

impl PartitionRecord {
    pub fn members(&self) -> Vec<WaveId> {
        self.classes.iter().flatten().copied().collect()
    }

    /// Index of the class holding `s`.
    pub fn class_of(&self, s: WaveId) -> Option<usize> {
        let i = self.classes.partition_point(|c| c[0] <= s);
        (i > 0 && self.classes[i - 1].contains(&s)).then(|| i - 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DividedPair {
    pub key: MeetKey,
    pub pi: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct FunctionalSnapshot {
    pub time: f64,
    pub tv_w: f64,
    pub q_trans: f64,
    pub q_quadratic: f64,
    pub sum_abs_dsigma: f64,
}

/// Both sides of the wavefront decrease inequality for one interaction,
/// evaluated just before it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecreaseWitness {
    pub lhs: f64,
    pub rhs_interacted: f64,
    pub rhs_never: f64,
    pub left_waves: usize,
    pub right_waves: usize,
    /// Divided pairs across the two fronts with no stored weight.
    pub missing_weights: usize,
}

impl DecreaseWitness {
    pub fn rhs(&self) -> f64 {
        self.rhs_interacted + self.rhs_never
    }
}

/// Cells of a homogeneous run of alive waves and the effective flux over
/// them.
pub struct RunFlux {
    pub sign: i8,
    pub flux: EffectiveFlux,
    /// Cell index of each wave, same order as the input ids.
    pub cells: Vec<i64>,
}

impl RunFlux {
    pub fn build(state: &FieldState, ids: &[WaveId], spec: &FluxSpec) -> RunFlux {
        assert!(!ids.is_empty(), "empty run of waves");
        let labels = state.v_labels();
        let sign = state.wave(ids[0]).sign;
        let mut cells: Vec<(i64, i64)> = ids
            .iter()
            .map(|&s| {
                let w = state.wave(s);
                assert_eq!(w.sign, sign, "run of waves is not homogeneous");
                (w.cell(), labels[s as usize].unwrap_or_else(|| panic!("wave {s} is not alive")))
            })
            .collect();
        let order: Vec<i64> = cells.iter().map(|c| c.0).collect();
        cells.sort_by_key(|c| c.0);
        let base = cells[0].0;
        assert!(
            cells.iter().enumerate().all(|(i, c)| c.0 == base + i as i64),
            "cells of the run are not contiguous"
        );
        let labels = cells.iter().map(|c| c.1 as f64 * state.eps).collect();
        RunFlux { sign, flux: EffectiveFlux::build(spec, state.eps, base, labels), cells: order }
    }

    /// Chord slope over the cells of `ids` (a contiguous sub-run).
    pub fn chord(&self, state: &FieldState, ids: &[WaveId]) -> f64 {
        let lo = ids.iter().map(|&s| state.wave(s).cell()).min().unwrap();
        let hi = ids.iter().map(|&s| state.wave(s).cell()).max().unwrap() + 1;
        let g = &self.flux.nodes;
        (g.value(hi) - g.value(lo)) / ((hi - lo) as f64 * g.eps)
    }

    /// Splits the run (ids ascending) into the classes its own Riemann
    /// problem produces.
    pub fn divide(&self, ids: &[WaveId]) -> Vec<Vec<WaveId>> {
        let g = &self.flux.nodes;
        let env = envelope(g, g.lo(), g.hi(), hull_for_sign(self.sign));
        let slopes: Vec<f64> = self.cells.iter().map(|&c| env.slope(c)).collect();
        group_equal(&slopes).into_iter().map(|(a, b)| ids[a..b].to_vec()).collect()
    }
}

/// Classes of a homogeneous run of alive waves under the current effective
/// flux.
pub fn divide_run(state: &FieldState, ids: &[WaveId], spec: &FluxSpec) -> Vec<Vec<WaveId>> {
    if ids.len() == 1 {
        return vec![ids.to_vec()];
    }
    RunFlux::build(state, ids, spec).divide(ids)
}

/// Transversal potential: every `v` front weighs the waves to its left,
/// in grid units squared.
pub fn q_trans_units(state: &FieldState) -> i64 {
    let mut passed = 0i64;
    let mut total = 0i64;
    for f in &state.fronts {
        match &f.kind {
            FrontKind::W { waves, .. } => passed += waves.len() as i64,
            FrontKind::V { h } => total += passed * state.v_fronts[*h].strength(),
        }
    }
    total
}

pub fn q_trans(state: &FieldState) -> f64 {
    q_trans_units(state) as f64 * state.eps * state.eps
}

/// Snapshot of the history for the small-N checks.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LemmaReport {
    pub class_speed_checks: usize,
    pub class_speed_min_slack: Option<f64>,
    pub restriction_checks: usize,
    pub separation_checks: usize,
    pub violations: Vec<String>,
}

impl LemmaReport {
    fn class_slack(&mut self, slack: f64) {
        self.class_speed_checks += 1;
        self.class_speed_min_slack = Some(self.class_speed_min_slack.map_or(slack, |m| m.min(slack)));
    }
}

#[derive(Clone, Debug)]
pub struct PairHistory {
    spec: FluxSpec,
    eps: f64,
    bounds: DerivativeBounds,
    sign: Vec<i8>,
    w_hat: Vec<i64>,
    alive: Vec<bool>,
    /// Largest id each wave has met (itself if none).
    reach: Vec<WaveId>,
    divided: BTreeMap<(WaveId, WaveId), DividedPair>,
    records: BTreeMap<MeetKey, PartitionRecord>,
    ledger: Option<PairLedger>,
}

/// Size guard for the full per-pair tables.
pub const SMALL_N_LIMIT: usize = 12;

impl PairHistory {
    /// History at time zero: waves of one jump have met, all others have
    /// not. `full_tables` keeps the literal per-pair recursion alongside
    /// (small data only).
    pub fn new(initial: &FieldState, spec: &FluxSpec, bounds: DerivativeBounds, full_tables: bool) -> Self {
        let n = initial.wave_count();
        assert!(!full_tables || n <= SMALL_N_LIMIT, "full tables need at most {SMALL_N_LIMIT} waves");
        let mut h = PairHistory {
            spec: spec.clone(),
            eps: initial.eps,
            bounds,
            sign: std::iter::once(0).chain(initial.waves.iter().map(|w| w.sign)).collect(),
            w_hat: std::iter::once(0).chain(initial.waves.iter().map(|w| w.w_hat)).collect(),
            alive: std::iter::once(false).chain(initial.waves.iter().map(|w| w.is_alive())).collect(),
            reach: (0..=n as WaveId).collect(),
            divided: BTreeMap::new(),
            records: BTreeMap::new(),
            ledger: full_tables.then(PairLedger::default),
        };
        for (k, (at, groups)) in initial_meetings(initial).into_iter().enumerate() {
            let key = MeetKey::Initial(k);
            h.meet(key, initial, &at, &groups);
            if let Some(ledger) = &mut h.ledger {
                ledger.meet(key, initial, &at, &h.spec);
            }
        }
        h
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    fn interacted(&self, s: WaveId, t: WaveId) -> bool {
        let (a, b) = (s.min(t), s.max(t));
        b <= self.reach[a as usize]
    }

    pub fn status(&self, s: WaveId, t: WaveId) -> PairStatus {
        let key = (s.min(t), s.max(t));
        if self.divided.contains_key(&key) {
            PairStatus::Divided
        } else if self.interacted(s, t) {
            PairStatus::Joined
        } else {
            PairStatus::NeverInteracted
        }
    }

    pub fn pi(&self, s: WaveId, t: WaveId) -> Option<f64> {
        self.divided.get(&(s.min(t), s.max(t))).map(|d| d.pi)
    }

    pub fn record_of(&self, s: WaveId, t: WaveId) -> Option<&PartitionRecord> {
        self.divided.get(&(s.min(t), s.max(t))).map(|d| &self.records[&d.key])
    }

    pub fn divided_pairs(&self) -> impl Iterator<Item = (&(WaveId, WaveId), &DividedPair)> {
        self.divided.iter()
    }

    pub fn record_count(&self) -> usize {
        self.records.len()
    }

    // |w_hat(t) - (w_hat(s) - sign(s))| in grid units
    fn gap(&self, s: WaveId, t: WaveId) -> i64 {
        (self.w_hat[t as usize] - self.w_hat[s as usize] + self.sign[s as usize] as i64).abs()
    }

    /// Weight of an alive pair.
    pub fn weight(&self, s: WaveId, t: WaveId) -> f64 {
        let (a, b) = (s.min(t), s.max(t));
        match self.status(a, b) {
            PairStatus::NeverInteracted => self.bounds.norm_d2_ww,
            PairStatus::Joined => 0.0,
            PairStatus::Divided => self.divided[&(a, b)].pi / (self.gap(a, b) as f64 * self.eps),
        }
    }

    /// Quadratic functional, using closed-form counts for pairs that
    /// never met.
    pub fn q_quadratic(&self) -> f64 {
        let n = self.alive.len() - 1;
        // prefix[i] = alive waves with id < i
        let mut prefix = vec![0usize; n + 2];
        for i in 1..=n {
            prefix[i + 1] = prefix[i] + self.alive[i] as usize;
        }
        let alive = prefix[n + 1];
        let mut met = 0usize;
        for s in 1..=n {
            if self.alive[s] {
                let r = self.reach[s] as usize;
                met += prefix[r + 1] - prefix[s + 1];
            }
        }
        let never = alive * alive.saturating_sub(1) / 2 - met;
        let divided: f64 = self.divided.iter().map(|(&(a, b), d)| d.pi / self.gap(a, b) as f64).sum();
        self.eps * self.eps * self.bounds.norm_d2_ww * never as f64 + self.eps * divided
    }

    /// Same functional by an explicit double loop.
    pub fn q_quadratic_brute(&self) -> f64 {
        let ids: Vec<WaveId> = (1..self.alive.len() as WaveId).filter(|&s| self.alive[s as usize]).collect();
        let mut q = 0.0;
        for (i, &s) in ids.iter().enumerate() {
            for &t in &ids[i + 1..] {
                q += self.weight(s, t) * self.eps * self.eps;
            }
        }
        q
    }

    pub fn snapshot(&self, state: &FieldState, sum_abs_dsigma: f64) -> FunctionalSnapshot {
        FunctionalSnapshot {
            time: state.time,
            tv_w: state.tv_w(),
            q_trans: q_trans(state),
            q_quadratic: self.q_quadratic(),
            sum_abs_dsigma,
        }
    }

    /// Evaluates the wavefront decrease inequality for fronts `left` and
    /// `right` about to interact in `pre`.
    pub fn decrease_witness(&self, pre: &FieldState, left: &[WaveId], right: &[WaveId]) -> DecreaseWitness {
        let all: Vec<WaveId> = left.iter().chain(right).copied().collect();
        let run = RunFlux::build(pre, &all, &self.spec);
        let eps = self.eps;
        let (nl, nr) = (left.len() as f64 * eps, right.len() as f64 * eps);
        let lhs = (run.chord(pre, left) - run.chord(pre, right)) * nl * nr;
        let (mut inter, mut never, mut missing) = (0.0, 0.0, 0);
        for &s in left {
            for &t in right {
                match self.status(s, t) {
                    PairStatus::NeverInteracted => never += self.bounds.norm_d2_ww * (nl + nr) * eps * eps,
                    PairStatus::Divided => inter += self.divided[&(s, t)].pi * eps * eps,
                    PairStatus::Joined => missing += 1,
                }
            }
        }
        DecreaseWitness {
            lhs,
            rhs_interacted: inter,
            rhs_never: never,
            left_waves: left.len(),
            right_waves: right.len(),
            missing_weights: missing,
        }
    }

    /// Brings the history from just before `event` to just after it.
    /// `post` is the state right after the event.
    pub fn on_event(&mut self, event: &Event, post: &FieldState) -> FunctionalSnapshot {
        for &s in &event.canceled {
            self.alive[s as usize] = false;
        }
        let alive = &self.alive;
        self.divided.retain(|&(a, b), _| alive[a as usize] && alive[b as usize]);

        if event.kind == EventKind::Transversal {
            self.transversal_increase(event);
        }
        let alive = &self.alive;

        // only classes touching the event can change: elsewhere neither the
        // member set nor the v labels moved
        let mut touched = vec![false; self.alive.len()];
        for s in event.all_waves() {
            touched[s as usize] = true;
        }
        let spec = &self.spec;
        for rec in self.records.values_mut() {
            let mut classes = Vec::with_capacity(rec.classes.len());
            for class in rec.classes.drain(..) {
                if !class.iter().any(|&s| touched[s as usize]) {
                    classes.push(class);
                    continue;
                }
                let kept: Vec<WaveId> = class.into_iter().filter(|&s| alive[s as usize]).collect();
                if !kept.is_empty() {
                    classes.extend(divide_run(post, &kept, spec));
                }
            }
            rec.classes = classes;
        }

        self.meet(MeetKey::Event(event.index), post, &event.at_point, &event.post_groups);

        let used: BTreeSet<MeetKey> = self.divided.values().map(|d| d.key).collect();
        self.records.retain(|k, _| used.contains(k));

        if let Some(mut ledger) = self.ledger.take() {
            ledger.on_event(event, post, &self.spec, &self.bounds);
            self.ledger = Some(ledger);
        }

        self.snapshot(post, event.sum_abs_dsigma(self.eps))
    }

    fn transversal_increase(&mut self, event: &Event) {
        let mut inside = vec![false; self.alive.len()];
        for &s in &event.at_point {
            inside[s as usize] = true;
        }
        let step = 2.0 * self.bounds.norm_d3_wwv * event.v_strength as f64 * self.eps * self.eps;
        // prefix[k] = waves in classes before k that sit wholly at the crossing
        let prefix: BTreeMap<MeetKey, Vec<usize>> = self
            .records
            .iter()
            .map(|(k, rec)| {
                let mut p = vec![0usize];
                for c in &rec.classes {
                    let add = if c.iter().all(|&s| inside[s as usize]) { c.len() } else { 0 };
                    p.push(p.last().unwrap() + add);
                }
                (*k, p)
            })
            .collect();
        for (&(a, b), d) in self.divided.iter_mut() {
            let rec = &self.records[&d.key];
            let (ca, cb) = (rec.class_of(a).unwrap(), rec.class_of(b).unwrap());
            let p = &prefix[&d.key];
            d.pi += step * (p[cb + 1] - p[ca]) as f64;
        }
    }

    /// Records that the waves in `at` are together at one point, split into
    /// the fronts `groups`.
    fn meet(&mut self, key: MeetKey, state: &FieldState, at: &[WaveId], groups: &[Vec<WaveId>]) {
        if at.is_empty() {
            return;
        }
        let top = *at.iter().max().unwrap();
        for &s in at {
            let r = &mut self.reach[s as usize];
            *r = (*r).max(top);
        }
        let mut group_of = BTreeMap::new();
        for (g, members) in groups.iter().enumerate() {
            for &s in members {
                group_of.insert(s, g);
            }
        }
        let mut any_divided = false;
        for (i, &s) in at.iter().enumerate() {
            for &t in &at[i + 1..] {
                let pair = (s.min(t), s.max(t));
                if group_of[&s] == group_of[&t] {
                    self.divided.remove(&pair);
                } else {
                    self.divided.insert(pair, DividedPair { key, pi: 0.0 });
                    any_divided = true;
                }
            }
        }
        if any_divided {
            let x = state.wave(at[0]).position().unwrap_or(f64::NAN);
            self.records.insert(
                key,
                PartitionRecord { key, time: state.time, x, classes: divide_run(state, at, &self.spec) },
            );
        }
    }

    /// Checks the literal recursion against the shared records and the
    /// lemmas that rest on it. Empty unless full tables are kept.
    pub fn lemma_report(&self, state: &FieldState) -> Option<LemmaReport> {
        let ledger = self.ledger.as_ref()?;
        let mut report = ledger.check(state, &self.spec);
        let fast: BTreeSet<_> = self.divided.keys().copied().collect();
        let slow: BTreeSet<_> = ledger.entries.keys().copied().collect();
        if fast != slow {
            report.violations.push(format!("divided pairs disagree: shared {fast:?}, literal {slow:?}"));
            return Some(report);
        }
        for (pair, d) in &self.divided {
            let e = &ledger.entries[pair];
            let rec = &self.records[&d.key];
            if rec.classes != e.partition {
                report.violations.push(format!("pair {pair:?}: partition {:?} vs {:?}", rec.classes, e.partition));
            }
            let lit = e.pi.get(pair).copied().unwrap_or(0.0);
            if (lit - d.pi).abs() > 1e-12 * lit.abs().max(1.0) {
                report.violations.push(format!("pair {pair:?}: weight {} vs {lit}", d.pi));
            }
        }
        Some(report)
    }

    /// Full table of a divided pair, when kept.
    pub fn pi_full_table(&self, s: WaveId, t: WaveId) -> Option<&BTreeMap<(WaveId, WaveId), f64>> {
        self.ledger.as_ref()?.entries.get(&(s.min(t), s.max(t))).map(|e| &e.pi)
    }
}

/// Groups of waves sharing a jump at time zero, with the fronts they form.
fn initial_meetings(state: &FieldState) -> Vec<(Vec<WaveId>, Vec<Vec<WaveId>>)> {
    let mut out: Vec<(f64, Vec<WaveId>, Vec<Vec<WaveId>>)> = Vec::new();
    for f in &state.fronts {
        if let FrontKind::W { waves, .. } = &f.kind {
            match out.last_mut() {
                Some(last) if last.0 == f.x => {
                    last.1.extend(waves);
                    last.2.push(waves.clone());
                }
                _ => out.push((f.x, waves.clone(), vec![waves.clone()])),
            }
        }
    }
    out.into_iter().map(|(_, a, g)| (a, g)).collect()
}

#[derive(Clone, Debug, PartialEq)]
struct LedgerEntry {
    interval: Vec<WaveId>,
    partition: Vec<Vec<WaveId>>,
    /// Weight for every ordered pair of the interval.
    pi: BTreeMap<(WaveId, WaveId), f64>,
}

/// Per-pair recursion kept verbatim: own interval, own partition and the
/// full weight table. Only for small data.
#[derive(Clone, Debug, Default)]
struct PairLedger {
    met: BTreeSet<(WaveId, WaveId)>,
    entries: BTreeMap<(WaveId, WaveId), LedgerEntry>,
}

fn same_place(state: &FieldState, s: WaveId, t: WaveId) -> bool {
    let (a, b) = (state.wave(s), state.wave(t));
    a.position() == b.position() && a.speed() == b.speed()
}

impl PairLedger {
    fn fresh(state: &FieldState, at: &[WaveId], spec: &FluxSpec) -> LedgerEntry {
        let mut pi = BTreeMap::new();
        for (i, &p) in at.iter().enumerate() {
            for &q in &at[i + 1..] {
                pi.insert((p, q), 0.0);
            }
        }
        LedgerEntry { interval: at.to_vec(), partition: divide_run(state, at, spec), pi }
    }

    fn meet(&mut self, _key: MeetKey, state: &FieldState, at: &[WaveId], spec: &FluxSpec) {
        for (i, &s) in at.iter().enumerate() {
            for &t in &at[i + 1..] {
                self.met.insert((s, t));
                if same_place(state, s, t) {
                    self.entries.remove(&(s, t));
                } else {
                    self.entries.insert((s, t), Self::fresh(state, at, spec));
                }
            }
        }
    }

    fn on_event(&mut self, event: &Event, post: &FieldState, spec: &FluxSpec, bounds: &DerivativeBounds) {
        let eps = post.eps;
        let alive = |s: WaveId| post.wave(s).is_alive();
        self.entries.retain(|&(a, b), _| alive(a) && alive(b));
        let now: BTreeSet<(WaveId, WaveId)> = event
            .at_point
            .iter()
            .flat_map(|&s| event.at_point.iter().filter(move |&&t| t > s).map(move |&t| (s, t)))
            .collect();
        for (&pair, entry) in self.entries.iter_mut() {
            if now.contains(&pair) {
                continue;
            }
            if event.kind == EventKind::Transversal {
                let old = &entry.partition;
                let cls = |s: WaveId| old.iter().position(|c| c.contains(&s)).unwrap();
                for (&(p, q), value) in entry.pi.iter_mut() {
                    let m: usize = old[cls(p)..=cls(q)]
                        .iter()
                        .filter(|c| c.iter().all(|s| event.at_point.contains(s)))
                        .map(|c| c.len())
                        .sum();
                    *value += 2.0 * bounds.norm_d3_wwv * (event.v_strength as f64 * eps) * (m as f64 * eps);
                }
            }
            entry.interval.retain(|&s| alive(s));
            entry.pi.retain(|&(p, q), _| alive(p) && alive(q));
            let mut refined = Vec::new();
            for class in &entry.partition {
                let kept: Vec<WaveId> = class.iter().copied().filter(|&s| alive(s)).collect();
                if !kept.is_empty() {
                    refined.extend(divide_run(post, &kept, spec));
                }
            }
            entry.partition = refined;
        }
        let at = &event.at_point;
        for (i, &s) in at.iter().enumerate() {
            for &t in &at[i + 1..] {
                self.met.insert((s, t));
                if same_place(post, s, t) {
                    self.entries.remove(&(s, t));
                } else {
                    self.entries.insert((s, t), Self::fresh(post, at, spec));
                }
            }
        }
    }

    fn check(&self, state: &FieldState, spec: &FluxSpec) -> LemmaReport {
        let mut report = LemmaReport::default();
        for (&(s, t), e) in &self.entries {
            if same_place(state, s, t) {
                report.violations.push(format!("pair ({s}, {t}) is listed as divided but shares a front"));
            }
            // classes never split a front that the real solution keeps whole
            for class in &e.partition {
                report.separation_checks += 1;
                if class.iter().any(|&p| !same_place(state, p, class[0])) {
                    report.violations.push(format!("pair ({s}, {t}): class {class:?} is split in the real solution"));
                }
            }
            let run = RunFlux::build(state, &e.interval, spec);
            let chords: Vec<f64> = e.partition.iter().map(|c| run.chord(state, c)).collect();
            for (a, ca) in e.partition.iter().enumerate() {
                for (b, cb) in e.partition.iter().enumerate().skip(a + 1) {
                    let gap = chords[a] - chords[b];
                    for &p in ca {
                        for &q in cb {
                            let bound = e.pi[&(p, q)];
                            let slack = bound - gap;
                            report.class_slack(slack);
                            if slack < -1e-9 * bound.abs().max(1.0) {
                                report.violations.push(format!(
                                    "pair ({s}, {t}): classes {a} < {b} differ by {gap} against weight {bound} at ({p}, {q})"
                                ));
                            }
                        }
                    }
                }
            }
        }
        for (&(p, q), outer) in &self.entries {
            for (&(s, t), inner) in &self.entries {
                if !(p <= s && t <= q) || (p, q) == (s, t) {
                    continue;
                }
                report.restriction_checks += 1;
                for class in &outer.partition {
                    let n = class.iter().filter(|r| inner.interval.contains(r)).count();
                    if n != 0 && n != class.len() {
                        report
                            .violations
                            .push(format!("class {class:?} of ({p}, {q}) straddles the interval of ({s}, {t})"));
                    }
                }
                if inner.interval.contains(&p) && inner.interval.contains(&q) {
                    if inner.interval != outer.interval || inner.partition != outer.partition {
                        report.violations.push(format!("({p}, {q}) inside the interval of ({s}, {t}) but partitions differ"));
                    }
                }
            }
        }
        for (a, ea) in &self.entries {
            for (b, eb) in self.entries.range(a..).skip(1) {
                if ea.interval == eb.interval {
                    let same = ea.pi.len() == eb.pi.len()
                        && ea.pi.iter().all(|(k, v)| eb.pi.get(k).is_some_and(|w| (v - w).abs() <= 1e-12 * v.abs().max(1.0)));
                    if !same {
                        report.violations.push(format!("pairs {a:?} and {b:?} share an interval but not their weights"));
                    }
                }
            }
        }
        report
    }
}
