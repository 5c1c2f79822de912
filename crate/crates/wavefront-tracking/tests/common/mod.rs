#![allow(dead_code)]

use rand::Rng;
use wavefront_tracking::envelopes::{convex_envelope, envelope, group_equal, Hull, EnvelopeResult, SLOPE_TOL};
use wavefront_tracking::flux_models::PiecewiseAffineFlux;
use wavefront_tracking::simulator::TIME_TOL;
use wavefront_tracking::wavefield::FieldState;

pub const EXACT: f64 = 1e-12;

/// Grid function with random shape: noise, a smooth bump, or values on a
/// coarse lattice (lots of collinear nodes).
pub fn random_grid<R: Rng>(rng: &mut R, max_nodes: usize) -> PiecewiseAffineFlux {
    let n = rng.gen_range(2..=max_nodes);
    let eps = [0.05, 0.1, 0.125, 0.25, 0.5][rng.gen_range(0..5)];
    let base = rng.gen_range(-20..=20);
    let values = match rng.gen_range(0..3) {
        0 => (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        1 => {
            let s = random_smooth(rng);
            (0..n).map(|i| s.value((base + i as i64) as f64 * eps)).collect()
        }
        _ => (0..n).map(|_| rng.gen_range(-4i32..=4) as f64 * 0.125).collect(),
    };
    PiecewiseAffineFlux::new(eps, base, values)
}

/// `sum a_k sin(b_k w + c_k) + q w^2 + m w`, with known derivative bounds.
#[derive(Clone, Debug)]
pub struct Smooth {
    pub terms: Vec<(f64, f64, f64)>,
    pub q: f64,
    pub m: f64,
}

impl Smooth {
    pub fn value(&self, w: f64) -> f64 {
        self.terms.iter().map(|&(a, b, c)| a * (b * w + c).sin()).sum::<f64>() + self.q * w * w + self.m * w
    }

    pub fn slope(&self, w: f64) -> f64 {
        self.terms.iter().map(|&(a, b, c)| a * b * (b * w + c).cos()).sum::<f64>() + 2.0 * self.q * w + self.m
    }

    /// Upper bound on `|g''|`.
    pub fn lip_slope(&self) -> f64 {
        self.terms.iter().map(|&(a, b, _)| (a * b * b).abs()).sum::<f64>() + 2.0 * self.q.abs()
    }

    pub fn sample(&self, eps: f64, base: i64, n: usize) -> PiecewiseAffineFlux {
        PiecewiseAffineFlux::new(eps, base, (0..n).map(|i| self.value((base + i as i64) as f64 * eps)).collect())
    }
}

pub fn random_smooth<R: Rng>(rng: &mut R) -> Smooth {
    let k = rng.gen_range(1..=3);
    Smooth {
        terms: (0..k).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.5..6.0), rng.gen_range(0.0..6.3))).collect(),
        q: rng.gen_range(-1.0..1.0),
        m: rng.gen_range(-1.0..1.0),
    }
}

/// Lower hull by brute force: the value at each node is the least chord
/// value over all pairs of nodes around it.
pub fn brute_lower_hull(ys: &[f64]) -> Vec<f64> {
    let n = ys.len();
    (0..n)
        .map(|k| {
            let mut best = ys[k];
            for i in 0..=k {
                for j in k..n {
                    if i < j {
                        let t = (k - i) as f64 / (j - i) as f64;
                        best = best.min(ys[i] + t * (ys[j] - ys[i]));
                    }
                }
            }
            best
        })
        .collect()
}

/// Worst nodewise distance between the envelope and the brute-force hull,
/// on the full range of `g`.
pub fn oracle_gap(g: &PiecewiseAffineFlux) -> f64 {
    let conv = convex_envelope(g, g.lo(), g.hi());
    let brute = brute_lower_hull(&g.values);
    let mut gap = close(&conv.node_values, &brute);
    let neg: Vec<f64> = g.values.iter().map(|v| -v).collect();
    let conc = envelope(g, g.lo(), g.hi(), Hull::Concave);
    let brute: Vec<f64> = brute_lower_hull(&neg).iter().map(|v| -v).collect();
    gap = gap.max(close(&conc.node_values, &brute));
    gap
}

pub fn close(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Interval `[a, b]` with an interior node `u`, inside the range of `g`.
pub fn split_interval<R: Rng>(rng: &mut R, g: &PiecewiseAffineFlux) -> Option<(i64, i64, i64)> {
    if g.hi() - g.lo() < 2 {
        return None;
    }
    let a = rng.gen_range(g.lo()..=g.hi() - 2);
    let b = rng.gen_range(a + 2..=g.hi());
    let u = rng.gen_range(a + 1..b);
    Some((a, u, b))
}

/// Violations beyond the tolerance, as messages.
pub type Violations = Vec<String>;

fn push_if(out: &mut Violations, bad: bool, msg: impl FnOnce() -> String) {
    if bad {
        out.push(msg());
    }
}

/// Slopes on `[a, u]` are at least those on `[a, b]`, cell by cell.
pub fn restriction_raises_slopes(g: &PiecewiseAffineFlux, a: i64, u: i64, b: i64) -> Violations {
    let (part, full) = (convex_envelope(g, a, u), convex_envelope(g, a, b));
    let mut out = Vec::new();
    for c in a..u {
        push_if(&mut out, part.slope(c) < full.slope(c) - EXACT, || {
            format!("cell {c}: {} < {}", part.slope(c), full.slope(c))
        });
    }
    out
}

/// Slope differences on `[a, u]` are at least those on `[a, b]`.
pub fn restriction_widens_gaps(g: &PiecewiseAffineFlux, a: i64, u: i64, b: i64) -> Violations {
    let (part, full) = (convex_envelope(g, a, u), convex_envelope(g, a, b));
    let mut out = Vec::new();
    for c in a..u {
        for d in c + 1..u {
            let (dp, df) = (part.slope(d) - part.slope(c), full.slope(d) - full.slope(c));
            push_if(&mut out, dp < df - EXACT, || format!("cells {c}, {d}: {dp} < {df}"));
        }
    }
    out
}

/// Cells sharing a shock on `[a, u]` still share one on `[a, b]`.
pub fn shocks_persist(g: &PiecewiseAffineFlux, a: i64, u: i64, b: i64) -> Violations {
    let (part, full) = (convex_envelope(g, a, u), convex_envelope(g, a, b));
    let mut out = Vec::new();
    for (s, e) in group_equal(&part.cell_slopes) {
        for c in a + s as i64 + 1..a + e as i64 {
            push_if(&mut out, (full.slope(c) - full.slope(c - 1)).abs() > SLOPE_TOL, || {
                format!("cells {} and {c} split on the larger interval", c - 1)
            });
        }
    }
    out
}

/// Lowers `g` at `u` until the envelope on `[a, b]` must touch there.
pub fn force_contact(g: &PiecewiseAffineFlux, a: i64, u: i64, b: i64) -> PiecewiseAffineFlux {
    let mut h = g.clone();
    let spread = (a..=b).map(|k| g.value(k).abs()).fold(0.0, f64::max) + 1.0;
    let i = (u - h.lo()) as usize;
    h.values[i] -= 4.0 * spread * (b - a) as f64;
    h
}

/// Moves `u` to an interior contact node of the envelope on `[a, b]` if
/// there is one, otherwise forces contact at `u`.
pub fn contact_instance(g: &PiecewiseAffineFlux, a: i64, u: i64, b: i64) -> (PiecewiseAffineFlux, i64) {
    let env = convex_envelope(g, a, b);
    let inner: Vec<i64> = (a + 1..b).filter(|&k| env.contact[(k - a) as usize]).collect();
    match inner.iter().min_by_key(|&&k| (k - u).abs()) {
        Some(&k) => (g.clone(), k),
        None => (force_contact(g, a, u, b), u),
    }
}

/// With contact at `u`, the envelope on `[a, b]` is the two envelopes on
/// `[a, u]` and `[u, b]` side by side.
pub fn contact_splits(g: &PiecewiseAffineFlux, a: i64, u: i64, b: i64) -> Violations {
    let full = convex_envelope(g, a, b);
    let mut out = Vec::new();
    if !full.contact[(u - a) as usize] {
        out.push(format!("no contact at {u}"));
        return out;
    }
    let (left, right) = (convex_envelope(g, a, u), convex_envelope(g, u, b));
    let mut joined = left.node_values.clone();
    joined.extend_from_slice(&right.node_values[1..]);
    let gap = close(&full.node_values, &joined);
    push_if(&mut out, gap > EXACT, || format!("concatenation off by {gap}"));
    out
}

/// On samples of a smooth `g`, the last slope on `[a, u]` exceeds the one
/// on `[a, b]` by at most `Lip(g') (b - u)`.
pub fn cancellation_slope_bound(s: &Smooth, eps: f64, a: i64, u: i64, b: i64) -> Violations {
    let g = s.sample(eps, a, (b - a + 1) as usize);
    let (part, full) = (convex_envelope(&g, a, u), convex_envelope(&g, a, b));
    let diff = part.slope(u - 1) - full.slope(u - 1);
    let bound = s.lip_slope() * (b - u) as f64 * eps;
    let mut out = Vec::new();
    push_if(&mut out, diff > bound + EXACT, || format!("slope drop {diff} above {bound}"));
    out
}

/// Largest `|f' - g'|` over `[lo, hi]`, from dense samples plus the
/// Lipschitz slack between them.
pub fn sup_slope_gap(f: &Smooth, g: &Smooth, lo: f64, hi: f64) -> f64 {
    let n = 4000;
    let h = (hi - lo) / n as f64;
    let lip = f.lip_slope() + g.lip_slope();
    let sampled = (0..=n).map(|i| (f.slope(lo + i as f64 * h) - g.slope(lo + i as f64 * h)).abs()).fold(0.0, f64::max);
    sampled + lip * h / 2.0
}

/// Envelope slopes of two sampled fluxes differ by at most the sup of the
/// derivative gap.
pub fn perturbation_is_stable(f: &Smooth, g: &Smooth, eps: f64, a: i64, b: i64) -> Violations {
    let n = (b - a + 1) as usize;
    let (ef, eg) = (convex_envelope(&f.sample(eps, a, n), a, b), convex_envelope(&g.sample(eps, a, n), a, b));
    let worst = close(&ef.cell_slopes, &eg.cell_slopes);
    let bound = sup_slope_gap(f, g, a as f64 * eps, b as f64 * eps);
    let mut out = Vec::new();
    push_if(&mut out, worst > bound + EXACT, || format!("slopes differ by {worst}, derivative gap {bound}"));
    out
}

fn shifted(env: &EnvelopeResult, m: f64, q: f64) -> Vec<f64> {
    env.node_values.iter().enumerate().map(|(i, v)| v + m * (env.lo + i as i64) as f64 * env.eps + q).collect()
}

/// Adding an affine function to `g` adds it to both envelopes.
pub fn affine_equivariance(g: &PiecewiseAffineFlux, m: f64, q: f64, a: i64, b: i64) -> Violations {
    let h = PiecewiseAffineFlux::new(
        g.eps,
        g.lo(),
        g.values.iter().enumerate().map(|(i, v)| v + m * (g.lo() + i as i64) as f64 * g.eps + q).collect(),
    );
    let mut out = Vec::new();
    for hull in [Hull::Convex, Hull::Concave] {
        let (eg, eh) = (envelope(g, a, b, hull), envelope(&h, a, b, hull));
        let scale = eh.node_values.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        let gap = close(&shifted(&eg, m, q), &eh.node_values);
        push_if(&mut out, gap > EXACT * scale, || format!("{hull:?}: off by {gap}"));
    }
    out
}

/// Earliest meeting over all pairs of fronts, not only neighbours.
pub fn brute_next_time(state: &FieldState) -> Option<f64> {
    let f = &state.fronts;
    let mut best: Option<f64> = None;
    for i in 0..f.len() {
        for j in i + 1..f.len() {
            if f[i].speed > f[j].speed {
                let t = state.time + (f[j].x - f[i].x).max(0.0) / (f[i].speed - f[j].speed);
                best = Some(best.map_or(t, |b: f64| b.min(t)));
            }
        }
    }
    best
}

pub fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIME_TOL * a.abs().max(1.0)
}

use wavefront_tracking::flux_models::FluxSpec;
use wavefront_tracking::scenario::{generate_initial_data, ScenarioConfig};
use wavefront_tracking::wavefield::{initial_enumeration, StepFunction};

/// Step function from `(x, value in grid units)` pairs, starting at 0.
pub fn steps(points: &[(f64, i64)]) -> StepFunction {
    StepFunction { left: 0, steps: points.to_vec() }
}

pub fn state(w: &[(f64, i64)], v_left: i64, v: &[(f64, i64)], eps: f64) -> FieldState {
    let v0 = StepFunction { left: v_left, steps: v.to_vec() };
    initial_enumeration(&steps(w), &v0, &FluxSpec::default_quadratic(), eps).unwrap()
}

/// Ensemble-shaped random state: default flux, at most `max_waves` waves.
pub fn random_state(seed: u64, eps: f64, max_waves: usize, v_jumps: usize) -> (FluxSpec, FieldState) {
    let jumps = if max_waves <= 12 { 4 } else { 6 };
    let config = ScenarioConfig::random(eps, seed, jumps, max_waves, v_jumps);
    let (w0, v0) = generate_initial_data(&config, seed).unwrap();
    let spec = config.flux.build();
    let s = initial_enumeration(&w0, &v0, &spec, eps).unwrap();
    (spec, s)
}

/// Same values exactly, jump positions within the merge tolerance.
pub fn same_profile(a: &StepFunction, b: &StepFunction) -> bool {
    a.left == b.left
        && a.steps.len() == b.steps.len()
        && a.steps.iter().zip(&b.steps).all(|(p, q)| p.1 == q.1 && (p.0 - q.0).abs() <= 1e-9)
}
