//! One line per acceptance criterion; exits nonzero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavefront_tracking::flux_models::PiecewiseAffineFlux;
use wavefront_tracking::scenario::{events_csv, simulate, Outcome, ScenarioConfig};
use wavefront_tracking::verifier::{CheckLevel, CheckSummary};

struct Line {
    pass: bool,
    text: String,
}

fn line(pass: bool, text: String) -> Line {
    Line { pass, text }
}

fn secs(d: Duration) -> String {
    format!("{:.2} s", d.as_secs_f64())
}

/// Merged summary of the named checks over a set of runs.
fn tally(runs: &[Outcome], names: &[&str]) -> CheckSummary {
    let mut out = CheckSummary { count: 0, failures: 0, min_slack: f64::INFINITY };
    for o in runs {
        for r in o.report.results.iter().filter(|r| names.contains(&r.name.as_str())) {
            out.count += 1;
            out.failures += (!r.pass) as usize;
            out.min_slack = out.min_slack.min(r.slack);
        }
    }
    out
}

fn tally_line(runs: &[Outcome], names: &[&str], what: &str) -> (bool, String) {
    let s = tally(runs, names);
    let pass = s.failures == 0 && s.count > 0;
    (pass, format!("{what}: {} checks, {} failures, min slack {:.3e}", s.count, s.failures, s.min_slack))
}

fn envelope_oracle() -> Line {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        worst = worst.max(oracle_gap(&random_grid(&mut rng, 64)));
    }
    let took = start.elapsed();
    let pass = worst <= EXACT && took < Duration::from_secs(5);
    line(pass, format!("envelope oracle: 1000 cases, worst node gap {worst:.1e}, {}", secs(took)))
}

fn split_grid(rng: &mut ChaCha8Rng) -> (PiecewiseAffineFlux, i64, i64, i64) {
    loop {
        let g = random_grid(rng, 64);
        if let Some((a, u, b)) = split_interval(rng, &g) {
            return (g, a, u, b);
        }
    }
}

fn property_suite() -> Line {
    const CASES: usize = 500;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut counts = [0usize; 7];
    for _ in 0..CASES {
        let (g, a, u, b) = split_grid(&mut rng);
        counts[0] += restriction_raises_slopes(&g, a, u, b).len();
        counts[1] += restriction_widens_gaps(&g, a, u, b).len();
        counts[2] += shocks_persist(&g, a, u, b).len();
        let (h, u) = contact_instance(&g, a, u, b);
        counts[3] += contact_splits(&h, a, u, b).len();

        let f = random_smooth(&mut rng);
        let eps = [0.02, 0.05, 0.1][rng.gen_range(0..3)];
        let lo = rng.gen_range(-30..0);
        let hi = lo + rng.gen_range(3..60);
        let mid = rng.gen_range(lo + 1..hi);
        counts[4] += cancellation_slope_bound(&f, eps, lo, mid, hi).len();
        let mut g2 = f.clone();
        g2.terms.push((rng.gen_range(-0.2..0.2), rng.gen_range(0.5..6.0), rng.gen_range(0.0..6.3)));
        g2.q += rng.gen_range(-0.2..0.2);
        counts[5] += perturbation_is_stable(&f, &g2, eps, lo, hi).len();

        let (g, _, _, _) = split_grid(&mut rng);
        counts[6] += affine_equivariance(&g, rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), g.lo(), g.hi()).len();
    }
    let names = [
        "restriction raises slopes",
        "restriction widens gaps",
        "shocks persist",
        "contact splits",
        "cancellation slope bound",
        "perturbation stability",
        "affine equivariance",
    ];
    let detail: Vec<String> = names.iter().zip(counts).map(|(n, c)| format!("{n} {c}")).collect();
    line(counts.iter().all(|&c| c == 0), format!("envelope properties: {CASES} cases each, violations: {}", detail.join(", ")))
}

struct Ensemble {
    runs: Vec<Outcome>,
    slowest: Duration,
    max_waves: usize,
    max_v_fronts: usize,
    events: usize,
}

fn ensemble(seeds: std::ops::Range<u64>, shape: impl Fn(u64) -> ScenarioConfig) -> Ensemble {
    let mut e = Ensemble { runs: Vec::new(), slowest: Duration::ZERO, max_waves: 0, max_v_fronts: 0, events: 0 };
    for seed in seeds {
        let start = Instant::now();
        let o = simulate(&shape(seed)).unwrap_or_else(|err| panic!("seed {seed}: {err}"));
        e.slowest = e.slowest.max(start.elapsed());
        e.max_waves = e.max_waves.max(o.trajectory.initial.wave_count());
        e.max_v_fronts = e.max_v_fronts.max(o.trajectory.initial.v_fronts.len());
        e.events += o.trajectory.event_count();
        e.runs.push(o);
    }
    e
}

fn main() -> ExitCode {
    let mut lines = vec![envelope_oracle(), property_suite()];

    let coupled = |seed| ScenarioConfig::random(0.05, seed, 6, 40, 5);
    let main = ensemble(0..100, coupled);

    let (ok, text) = tally_line(&main.runs, &["enumeration"], "enumeration and push-forward");
    let shape_ok = main.max_waves <= 40 && main.max_v_fronts <= 6;
    lines.push(line(
        ok && shape_ok,
        format!("{text}; 100 seeds, {} events, at most {} waves and {} v fronts", main.events, main.max_waves, main.max_v_fronts),
    ));

    let (ok, text) = tally_line(&main.runs, &["qtrans_initial", "qtrans_transversal_drop", "qtrans_monotone"], "transversal potential");
    lines.push(line(ok, text));

    let per_event = [
        "transversal_speed",
        "cancellation_speed",
        "interaction_decrease",
        "interaction_q_monotone",
        "transversal_increase",
        "wavefront_decrease",
        "cancellation_q_monotone",
    ];
    let (ok, text) = tally_line(&main.runs, &per_event, "per-event bounds");
    let kinds_ok = per_event.iter().all(|n| tally(&main.runs, &[n]).count > 0);
    lines.push(line(ok && kinds_ok, text));

    let scalar = ensemble(0..100, |seed| ScenarioConfig::random(0.05, seed, 6, 40, 0));
    let (ok_main, text) = tally_line(&main.runs, &["main_theorem"], "global bound");
    let (ok_scalar, text_scalar) = tally_line(&scalar.runs, &["main_theorem", "main_theorem_scalar"], "scalar sub-ensemble");
    lines.push(line(ok_main && ok_scalar, format!("{text}; {text_scalar}")));

    let start = Instant::now();
    let small = ensemble(0..30, |seed| {
        let mut c = ScenarioConfig::random(0.1, seed, 4, 12, 3);
        c.check_level = CheckLevel::SmallN;
        c
    });
    let took = start.elapsed();
    let (ok, text) = tally_line(&small.runs, &["small_n_lemmas", "class_speed_gap"], "small-N lemmas");
    let size_ok = small.max_waves <= 12;
    let (mut separation, mut restriction) = (0, 0);
    for o in &small.runs {
        let t = &o.trajectory;
        for l in t.initial_lemmas.iter().chain(t.records.iter().filter_map(|r| r.lemmas.as_ref())) {
            separation += l.separation_checks;
            restriction += l.restriction_checks;
        }
    }
    lines.push(line(
        ok && size_ok && separation > 0 && restriction > 0 && took < Duration::from_secs(60),
        format!("{text}; {separation} separation and {restriction} restriction checks; 30 runs, {}", secs(took)),
    ));

    let again = ensemble(0..100, coupled);
    let identical = main
        .runs
        .iter()
        .zip(&again.runs)
        .all(|(a, b)| events_csv(&a.trajectory).unwrap() == events_csv(&b.trajectory).unwrap());
    let slowest = main.slowest.max(again.slowest).max(scalar.slowest).max(small.slowest);
    lines.push(line(
        identical && slowest < Duration::from_secs(10),
        format!("termination and determinism: 200 runs finished, events.csv identical on rerun: {identical}, slowest run {}", secs(slowest)),
    ));

    let mut all = true;
    for (i, l) in lines.iter().enumerate() {
        println!("{} {}. {}", if l.pass { "PASS" } else { "FAIL" }, i + 1, l.text);
        all &= l.pass;
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
