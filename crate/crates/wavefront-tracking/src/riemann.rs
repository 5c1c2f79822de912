//! Approximate Riemann solver for the triangular system. The `v` jump
//! travels at speed -1; the `w` jump is resolved with the flux frozen at the
//! right `v` state.

use serde::Serialize;
use thiserror::Error;

use crate::envelopes::{concave_envelope, convex_envelope, group_equal};
use crate::flux_models::{interpolate, FluxError, FluxSpec, PiecewiseAffineFlux};

#[derive(Debug, Error, PartialEq)]
pub enum RiemannError {
    #[error(transparent)]
    Flux(#[from] FluxError),
    #[error("states {0:?} do not lie on the grid of g")]
    OffGrid((i64, i64)),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Family {
    /// The `v` field, always at speed -1.
    First,
    /// The `w` field.
    Second,
}

/// One front of a fan. States are grid indices (multiples of eps).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FanFront {
    pub family: Family,
    pub w_left: i64,
    pub w_right: i64,
    pub v_left: i64,
    pub v_right: i64,
    pub speed: f64,
    /// Cells `(k, k + 1)` carried by this front, in order of position
    /// inside the fan.
    pub cells: Vec<i64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RiemannFan {
    pub fronts: Vec<FanFront>,
}

impl RiemannFan {
    pub fn is_empty(&self) -> bool {
        self.fronts.is_empty()
    }

    pub fn second_family(&self) -> impl Iterator<Item = &FanFront> {
        self.fronts.iter().filter(|f| f.family == Family::Second)
    }
}

/// Scalar problem for `w_minus -> w_plus` with flux `g`; `v` only labels
/// the fronts.
pub fn solve_scalar(
    w_minus: i64,
    w_plus: i64,
    g: &PiecewiseAffineFlux,
    v: i64,
) -> Result<RiemannFan, RiemannError> {
    if w_minus == w_plus {
        return Ok(RiemannFan::default());
    }
    let (lo, hi) = (w_minus.min(w_plus), w_minus.max(w_plus));
    if lo < g.lo() || hi > g.hi() {
        return Err(RiemannError::OffGrid((w_minus, w_plus)));
    }
    // cells listed in the order they appear from left to right in x
    let (cells, slopes): (Vec<i64>, Vec<f64>) = if w_minus < w_plus {
        let env = convex_envelope(g, lo, hi);
        (lo..hi).map(|k| (k, env.slope(k))).unzip()
    } else {
        let env = concave_envelope(g, lo, hi);
        (lo..hi).rev().map(|k| (k, env.slope(k))).unzip()
    };
    let up = w_minus < w_plus;
    let mut fronts = Vec::new();
    let mut w = w_minus;
    for (a, b) in group_equal(&slopes) {
        let n = (b - a) as i64;
        let next = if up { w + n } else { w - n };
        fronts.push(FanFront {
            family: Family::Second,
            w_left: w,
            w_right: next,
            v_left: v,
            v_right: v,
            speed: slopes[a],
            cells: cells[a..b].to_vec(),
        });
        w = next;
    }
    Ok(RiemannFan { fronts })
}

/// Full fan for `(w_minus, v_minus) -> (w_plus, v_plus)` on the grid of
/// step `eps`.
pub fn solve_triangular(
    left: (i64, i64),
    right: (i64, i64),
    spec: &FluxSpec,
    eps: f64,
) -> Result<RiemannFan, RiemannError> {
    let ((w_minus, v_minus), (w_plus, v_plus)) = (left, right);
    for v in [v_minus, v_plus] {
        if !spec.domain.contains_v(v as f64 * eps) {
            return Err(FluxError::VOutsideBox(v as f64 * eps).into());
        }
    }
    let mut fronts = Vec::new();
    if v_minus != v_plus {
        fronts.push(FanFront {
            family: Family::First,
            w_left: w_minus,
            w_right: w_minus,
            v_left: v_minus,
            v_right: v_plus,
            speed: -1.0,
            cells: Vec::new(),
        });
    }
    if w_minus != w_plus {
        let g = interpolate(spec, v_plus as f64 * eps, eps, w_minus.min(w_plus), w_minus.max(w_plus))?;
        fronts.extend(solve_scalar(w_minus, w_plus, &g, v_plus)?.fronts);
    }
    Ok(RiemannFan { fronts })
}
