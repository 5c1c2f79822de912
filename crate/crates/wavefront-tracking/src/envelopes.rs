//! Convex and concave envelopes of grid functions, with the speeds they
//! induce on single cells.
//!
//! Everything works in grid-index space: node `k` sits at `k * eps`, and
//! the cell `k` is the segment `(k, k + 1)`.

use serde::Serialize;

use crate::flux_models::PiecewiseAffineFlux;

/// Two slopes closer than this are the same speed.
pub const SLOPE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Hull {
    Convex,
    Concave,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeResult {
    pub hull: Hull,
    pub lo: i64,
    pub hi: i64,
    pub eps: f64,
    pub node_values: Vec<f64>,
    /// Slope on cell `lo + i`.
    pub cell_slopes: Vec<f64>,
    /// Whether the envelope touches the input at node `lo + i`.
    pub contact: Vec<bool>,
}

impl EnvelopeResult {
    pub fn slope(&self, cell: i64) -> f64 {
        assert!(cell >= self.lo && cell < self.hi, "cell {cell} outside [{}, {})", self.lo, self.hi);
        self.cell_slopes[(cell - self.lo) as usize]
    }

    pub fn value(&self, k: i64) -> f64 {
        self.node_values[(k - self.lo) as usize]
    }

    /// Maximal runs of consecutive cells sharing one slope, as half-open
    /// ranges of cell indices.
    pub fn shock_groups(&self) -> Vec<(i64, i64)> {
        group_equal(&self.cell_slopes).into_iter().map(|(a, b)| (self.lo + a as i64, self.lo + b as i64)).collect()
    }
}

/// Splits `slopes` into maximal runs whose neighbours agree within
/// [`SLOPE_TOL`].
pub fn group_equal(slopes: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=slopes.len() {
        if i == slopes.len() || (slopes[i] - slopes[i - 1]).abs() > SLOPE_TOL {
            if i > start {
                out.push((start, i));
            }
            start = i;
        }
    }
    out
}

/// Indices (into `ys`) of the lower hull of the points `(i, ys[i])`.
/// Collinear points stay on the hull.
pub fn lower_hull(ys: &[f64]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::with_capacity(ys.len());
    for (i, &y) in ys.iter().enumerate() {
        while hull.len() >= 2 {
            let o = hull[hull.len() - 2];
            let a = hull[hull.len() - 1];
            let cross = (a - o) as f64 * (y - ys[o]) - (ys[a] - ys[o]) * (i - o) as f64;
            if cross < 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

fn check_interval(g: &PiecewiseAffineFlux, lo: i64, hi: i64) {
    assert!(lo < hi, "degenerate interval [{lo}, {hi}]");
    assert!(lo >= g.lo() && hi <= g.hi(), "[{lo}, {hi}] is not inside the grid [{}, {}]", g.lo(), g.hi());
}

fn lower_envelope(ys: &[f64], lo: i64, eps: f64, hull: Hull) -> EnvelopeResult {
    let n = ys.len();
    let verts = lower_hull(ys);
    let mut node_values = vec![0.0; n];
    let mut cell_slopes = vec![0.0; n - 1];
    for pair in verts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (ya, yb) = (ys[a], ys[b]);
        let slope = (yb - ya) / ((b - a) as f64 * eps);
        node_values[a] = ya;
        for k in a + 1..b {
            node_values[k] = ya + (yb - ya) * (k - a) as f64 / (b - a) as f64;
        }
        for s in &mut cell_slopes[a..b] {
            *s = slope;
        }
    }
    node_values[n - 1] = ys[n - 1];
    let contact = node_values.iter().zip(ys).map(|(e, y)| e == y).collect();
    EnvelopeResult { hull, lo, hi: lo + n as i64 - 1, eps, node_values, cell_slopes, contact }
}

/// Largest convex function below `g` on `[lo, hi]`.
pub fn convex_envelope(g: &PiecewiseAffineFlux, lo: i64, hi: i64) -> EnvelopeResult {
    check_interval(g, lo, hi);
    let ys: Vec<f64> = (lo..=hi).map(|k| g.value(k)).collect();
    lower_envelope(&ys, lo, g.eps, Hull::Convex)
}

/// Smallest concave function above `g` on `[lo, hi]`, as the negated convex
/// envelope of `-g`.
pub fn concave_envelope(g: &PiecewiseAffineFlux, lo: i64, hi: i64) -> EnvelopeResult {
    check_interval(g, lo, hi);
    let ys: Vec<f64> = (lo..=hi).map(|k| -g.value(k)).collect();
    let mut env = lower_envelope(&ys, lo, g.eps, Hull::Concave);
    for v in &mut env.node_values {
        *v = -*v;
    }
    for s in &mut env.cell_slopes {
        *s = -*s;
    }
    env
}

pub fn envelope(g: &PiecewiseAffineFlux, lo: i64, hi: i64, hull: Hull) -> EnvelopeResult {
    match hull {
        Hull::Convex => convex_envelope(g, lo, hi),
        Hull::Concave => concave_envelope(g, lo, hi),
    }
}

/// Chord slope of `g` over `[lo, hi]`.
pub fn rh_speed(g: &PiecewiseAffineFlux, lo: i64, hi: i64) -> f64 {
    check_interval(g, lo, hi);
    (g.value(hi) - g.value(lo)) / ((hi - lo) as f64 * g.eps)
}

/// Hull used for cells of waves with this sign: convex for increasing
/// jumps, concave for decreasing ones.
pub fn hull_for_sign(sign: i8) -> Hull {
    if sign > 0 {
        Hull::Convex
    } else {
        Hull::Concave
    }
}

/// Speed the Riemann problem on `[lo, hi]` gives to the wave occupying
/// `cell`.
pub fn entropic_speed(g: &PiecewiseAffineFlux, lo: i64, hi: i64, cell: i64, sign: i8) -> f64 {
    assert!(cell >= lo && cell < hi, "cell {cell} outside [{lo}, {hi})");
    envelope(g, lo, hi, hull_for_sign(sign)).slope(cell)
}

/// Whether the Riemann problem on `[lo, hi]` sends the two cells apart.
pub fn divides(g: &PiecewiseAffineFlux, lo: i64, hi: i64, cell_a: i64, cell_b: i64, sign: i8) -> bool {
    let env = envelope(g, lo, hi, hull_for_sign(sign));
    (env.slope(cell_a) - env.slope(cell_b)).abs() > SLOPE_TOL
}
