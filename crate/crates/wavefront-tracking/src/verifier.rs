//! Runtime checks of the interaction estimates on a finished trajectory.
//!
//! Every check is an inequality `lhs <= rhs`; it passes when the slack
//! `rhs - lhs` is at least `-1e-9 * max(1, |rhs|)`.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::flux_models::gauss_legendre_16;
use crate::simulator::{EventKind, EventRecord, Trajectory};

pub const REL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    /// Event index, or `None` for whole-run checks.
    pub event: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

impl CheckResult {
    pub fn new(name: &str, event: Option<usize>, lhs: f64, rhs: f64) -> Self {
        let slack = rhs - lhs;
        let pass = slack >= -REL_TOL * rhs.abs().max(1.0);
        CheckResult { name: name.to_string(), event, lhs, rhs, slack, pass }
    }

    /// `actual == expected` up to the same tolerance, as `|diff| <= 0`.
    pub fn equal(name: &str, event: Option<usize>, actual: f64, expected: f64) -> Self {
        let diff = (actual - expected).abs();
        let pass = diff <= REL_TOL * expected.abs().max(1.0);
        CheckResult { name: name.to_string(), event, lhs: diff, rhs: 0.0, slack: -diff, pass }
    }

    /// Count of violations, which must be zero.
    pub fn count(name: &str, event: Option<usize>, violations: usize) -> Self {
        CheckResult::new(name, event, violations as f64, 0.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CheckLevel {
    /// Whole-run bounds and the transversal potential only.
    Fast,
    /// Adds every per-event bound and enumeration validation.
    #[default]
    Full,
    /// Adds the lemma suite on the full per-pair tables.
    SmallN,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub count: usize,
    pub failures: usize,
    pub min_slack: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub results: Vec<CheckResult>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.results.iter().filter(|r| !r.pass)
    }

    pub fn summary(&self) -> BTreeMap<String, CheckSummary> {
        let mut out: BTreeMap<String, CheckSummary> = BTreeMap::new();
        for r in &self.results {
            let e = out
                .entry(r.name.clone())
                .or_insert(CheckSummary { count: 0, failures: 0, min_slack: f64::INFINITY });
            e.count += 1;
            e.failures += (!r.pass) as usize;
            e.min_slack = e.min_slack.min(r.slack);
        }
        out
    }

    pub fn extend(&mut self, more: impl IntoIterator<Item = CheckResult>) {
        self.results.extend(more);
    }
}

fn before_after(traj: &Trajectory, k: usize) -> (f64, f64, f64, f64) {
    let pre = traj.snapshot_before(k);
    let post = &traj.records[k].snapshot;
    (pre.q_quadratic, post.q_quadratic, pre.q_trans, post.q_trans)
}

fn strength_of_crossing(traj: &Trajectory, rec: &EventRecord) -> f64 {
    rec.event.v_strength as f64 * traj.eps
}

pub fn check_transversal_speed(traj: &Trajectory, rec: &EventRecord) -> CheckResult {
    assert_eq!(rec.event.kind, EventKind::Transversal, "transversal check on another kind of event");
    let rhs = traj.bounds.norm_d2_wv * strength_of_crossing(traj, rec) * rec.event.at_point_strength(traj.eps);
    CheckResult::new("transversal_speed", Some(rec.event.index), rec.snapshot.sum_abs_dsigma, rhs)
}

pub fn check_cancellation(traj: &Trajectory, rec: &EventRecord) -> CheckResult {
    let amount = rec.event.cancellation_amount(traj.eps);
    let rhs = traj.bounds.norm_d2_ww * traj.tv_w0 * amount;
    CheckResult::new("cancellation_speed", Some(rec.event.index), rec.snapshot.sum_abs_dsigma, rhs)
}

pub fn check_interaction_decrease(traj: &Trajectory, k: usize) -> Vec<CheckResult> {
    let rec = &traj.records[k];
    assert!(rec.event.kind.is_interaction(), "interaction check on another kind of event");
    let (q0, q1, _, _) = before_after(traj, k);
    let j = Some(rec.event.index);
    vec![
        CheckResult::new("interaction_decrease", j, rec.snapshot.sum_abs_dsigma, 2.0 * (q0 - q1)),
        CheckResult::new("interaction_q_monotone", j, q1, q0),
    ]
}

pub fn check_transversal_increase(traj: &Trajectory, k: usize) -> CheckResult {
    let rec = &traj.records[k];
    assert_eq!(rec.event.kind, EventKind::Transversal, "transversal check on another kind of event");
    let (q0, q1, _, _) = before_after(traj, k);
    let rhs = 6.0
        * LN_2
        * traj.bounds.norm_d3_wwv
        * strength_of_crossing(traj, rec)
        * rec.event.at_point_strength(traj.eps)
        * traj.tv_w0;
    CheckResult::new("transversal_increase", Some(rec.event.index), q1 - q0, rhs)
}

pub fn check_wavefront_decrease(rec: &EventRecord) -> Vec<CheckResult> {
    let w = rec.witness.as_ref().expect("interaction events carry a decrease witness");
    let j = Some(rec.event.index);
    vec![
        CheckResult::new("wavefront_decrease", j, w.lhs, w.rhs()),
        CheckResult::count("wavefront_decrease_weights", j, w.missing_weights),
    ]
}

/// Right side of the main estimate.
pub fn main_bound(traj: &Trajectory) -> f64 {
    let b = &traj.bounds;
    (3.0 * b.norm_d2_ww + 12.0 * LN_2 * b.norm_d3_wwv * traj.tv_v0) * traj.tv_w0 * traj.tv_w0
        + b.norm_d2_wv * traj.tv_w0 * traj.tv_v0
}

pub fn total_speed_change(traj: &Trajectory) -> f64 {
    traj.records.iter().map(|r| r.snapshot.sum_abs_dsigma).sum()
}

pub fn check_main_theorem(traj: &Trajectory) -> Vec<CheckResult> {
    let lhs = total_speed_change(traj);
    let mut out = vec![CheckResult::new("main_theorem", None, lhs, main_bound(traj))];
    if !traj.has_v_fronts() {
        let rhs = 3.0 * traj.bounds.norm_d2_ww * traj.tv_w0 * traj.tv_w0;
        out.push(CheckResult::new("main_theorem_scalar", None, lhs, rhs));
    }
    out
}

/// Initial bound, exact drop at each crossing, no increase elsewhere.
pub fn check_qtrans(traj: &Trajectory) -> Vec<CheckResult> {
    let mut out = vec![CheckResult::new(
        "qtrans_initial",
        None,
        traj.initial_snapshot.q_trans,
        traj.tv_v0 * traj.tv_w0,
    )];
    for (k, rec) in traj.records.iter().enumerate() {
        let (_, _, p0, p1) = before_after(traj, k);
        let j = Some(rec.event.index);
        match rec.event.kind {
            EventKind::Transversal => {
                let drop = strength_of_crossing(traj, rec) * rec.event.at_point_strength(traj.eps);
                out.push(CheckResult::equal("qtrans_transversal_drop", j, p0 - p1, drop));
            }
            EventKind::Cancellation => out.push(CheckResult::new("qtrans_monotone", j, p1, p0)),
            _ => out.push(CheckResult::equal("qtrans_monotone", j, p1, p0)),
        }
    }
    out
}

/// `int_a^xi int_xi^b dw' dw / (w' - w)`, inner integral done exactly and
/// the outer one by quadrature after `u = (xi - a) s^4`.
pub fn log2_kernel_integral(a: f64, xi: f64, b: f64) -> f64 {
    let (l, r) = (xi - a, b - xi);
    let panels = 16;
    (0..panels)
        .map(|p| {
            let (s0, s1) = (p as f64 / panels as f64, (p + 1) as f64 / panels as f64);
            gauss_legendre_16(s0, s1, |s| {
                let u = l * s.powi(4);
                ((r + u).ln() - l.ln() - 4.0 * s.ln()) * 4.0 * l * s.powi(3)
            })
        })
        .sum()
}

/// Closed form `(b - a) H(p)` with `H` the entropy in nats of `p = (xi - a)/(b - a)`.
pub fn log2_kernel_exact(a: f64, xi: f64, b: f64) -> f64 {
    let d = b - a;
    let p = (xi - a) / d;
    let h = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    d * (h(p) + h(1.0 - p))
}

pub fn check_log2_kernel(seed: u64, cases: usize) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(cases + 1);
    let probe = |a: f64, xi: f64, b: f64, out: &mut Vec<CheckResult>| {
        let value = log2_kernel_integral(a, xi, b);
        out.push(CheckResult::new("log2_kernel", None, value, LN_2 * (b - a) + 1e-6));
        let exact = log2_kernel_exact(a, xi, b);
        out.push(CheckResult::new("log2_kernel_quadrature", None, (value - exact).abs(), 1e-6));
    };
    probe(0.0, 0.5, 1.0, &mut out);
    for _ in 0..cases {
        let a = rng.gen_range(-1.0..1.0);
        let b = a + rng.gen_range(0.01..2.0);
        let xi = a + (b - a) * rng.gen_range(0.001..0.999);
        probe(a, xi, b, &mut out);
    }
    out
}

pub fn check_small_n_lemmas(traj: &Trajectory) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let reports = std::iter::once((0, traj.initial_lemmas.as_ref()))
        .chain(traj.records.iter().map(|r| (r.event.index, r.lemmas.as_ref())));
    for (j, report) in reports {
        let Some(report) = report else {
            out.push(CheckResult::count("small_n_lemmas", Some(j), 1));
            continue;
        };
        out.push(CheckResult::count("small_n_lemmas", Some(j), report.violations.len()));
        if let Some(slack) = report.class_speed_min_slack {
            out.push(CheckResult::new("class_speed_gap", Some(j), -slack, 0.0));
        }
    }
    out
}

/// Every check the level asks for.
pub fn verify(traj: &Trajectory, level: CheckLevel) -> Report {
    let mut report = Report::default();
    report.extend(check_main_theorem(traj));
    report.extend(check_qtrans(traj));
    report.results.push(CheckResult::new(
        "q_initial",
        None,
        traj.initial_snapshot.q_quadratic,
        traj.bounds.norm_d2_ww * traj.tv_w0 * traj.tv_w0,
    ));
    let (mut trans_sum, mut canc_sum) = (0.0, 0.0);
    for rec in &traj.records {
        match rec.event.kind {
            EventKind::Transversal => trans_sum += rec.snapshot.sum_abs_dsigma,
            EventKind::Cancellation => canc_sum += rec.snapshot.sum_abs_dsigma,
            _ => {}
        }
    }
    report.results.push(CheckResult::new(
        "transversal_aggregate",
        None,
        trans_sum,
        traj.bounds.norm_d2_wv * traj.tv_w0 * traj.tv_v0,
    ));
    report.results.push(CheckResult::new(
        "cancellation_aggregate",
        None,
        canc_sum,
        traj.bounds.norm_d2_ww * traj.tv_w0 * traj.tv_w0,
    ));
    if level == CheckLevel::Fast {
        return report;
    }

    report.results.push(CheckResult::count("enumeration", Some(0), traj.initial_violations.len()));
    for (k, rec) in traj.records.iter().enumerate() {
        let j = Some(rec.event.index);
        let (q0, q1, _, _) = before_after(traj, k);
        report.results.push(CheckResult::count("enumeration", j, rec.enumeration_violations.len()));
        report.results.push(CheckResult::new("q_nonnegative", j, 0.0, q1));
        if let Some(brute) = rec.q_quadratic_brute {
            report.results.push(CheckResult::equal("q_double_loop", j, q1, brute));
        }
        match rec.event.kind {
            EventKind::Transversal => {
                report.results.push(check_transversal_speed(traj, rec));
                report.results.push(check_transversal_increase(traj, k));
            }
            EventKind::Cancellation => {
                report.results.push(check_cancellation(traj, rec));
                report.results.push(CheckResult::new("cancellation_q_monotone", j, q1, q0));
            }
            EventKind::InteractionPositive | EventKind::InteractionNegative => {
                report.extend(check_interaction_decrease(traj, k));
                report.extend(check_wavefront_decrease(rec));
            }
        }
    }
    report.extend(check_log2_kernel(0x1092, 50));
    if level == CheckLevel::SmallN {
        report.extend(check_small_n_lemmas(traj));
    }
    report
}
