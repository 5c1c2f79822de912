//! Smooth fluxes `f(w, v)`, their grid interpolation in `w`, sampled
//! derivative bounds and the effective flux used to compare waves that sit
//! in different `v` regions.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wavefield::{FieldState, WaveId};

#[derive(Debug, Error, PartialEq)]
pub enum FluxError {
    #[error("range [{lo}, {hi}] (grid indices) leaves the box at eps = {eps}")]
    OutsideBox { lo: i64, hi: i64, eps: f64 },
    #[error("v = {0} is outside the box")]
    VOutsideBox(f64),
    #[error("empty or inverted range [{0}, {1}]")]
    EmptyRange(i64, i64),
    #[error("unknown flux `{0}`")]
    Unknown(String),
    #[error("block is not a homogeneous run of consecutive cells")]
    NotHomogeneous,
    #[error("wave {0} is not alive")]
    DeadWave(WaveId),
}

/// Smooth flux together with the partial derivatives the solver and the
/// verifier need.
pub trait Flux: Send + Sync {
    fn eval(&self, w: f64, v: f64) -> f64;
    fn d_w(&self, w: f64, v: f64) -> f64;
    fn d2_ww(&self, w: f64, v: f64) -> f64;
    fn d2_wv(&self, w: f64, v: f64) -> f64;
    fn d3_wwv(&self, w: f64, v: f64) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub w_min: f64,
    pub w_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl Default for Domain {
    fn default() -> Self {
        Domain { w_min: -0.8, w_max: 0.8, v_min: -0.5, v_max: 0.5 }
    }
}

impl Domain {
    pub fn contains_w(&self, w: f64) -> bool {
        w >= self.w_min - 1e-12 && w <= self.w_max + 1e-12
    }

    pub fn contains_v(&self, v: f64) -> bool {
        v >= self.v_min - 1e-12 && v <= self.v_max + 1e-12
    }
}

#[derive(Clone)]
pub struct FluxSpec {
    pub name: String,
    pub domain: Domain,
    flux: Arc<dyn Flux>,
}

impl fmt::Debug for FluxSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FluxSpec").field("name", &self.name).field("domain", &self.domain).finish()
    }
}

impl FluxSpec {
    pub fn new(name: impl Into<String>, domain: Domain, flux: impl Flux + 'static) -> Self {
        FluxSpec { name: name.into(), domain, flux: Arc::new(flux) }
    }

    /// `w^2/2 + c v w^2` on the default box.
    pub fn default_quadratic() -> Self {
        FluxSpec::new("quadratic_coupled", Domain::default(), QuadraticCoupled { c: 0.1 })
    }

    pub fn eval(&self, w: f64, v: f64) -> f64 {
        self.flux.eval(w, v)
    }
    pub fn d_w(&self, w: f64, v: f64) -> f64 {
        self.flux.d_w(w, v)
    }
    pub fn d2_ww(&self, w: f64, v: f64) -> f64 {
        self.flux.d2_ww(w, v)
    }
    pub fn d2_wv(&self, w: f64, v: f64) -> f64 {
        self.flux.d2_wv(w, v)
    }
    pub fn d3_wwv(&self, w: f64, v: f64) -> f64 {
        self.flux.d3_wwv(w, v)
    }

    fn grid(&self, n: usize) -> impl Iterator<Item = (f64, f64)> + '_ {
        let d = self.domain;
        (0..=n).flat_map(move |i| {
            let w = d.w_min + (d.w_max - d.w_min) * i as f64 / n as f64;
            (0..=n).map(move |j| (w, d.v_min + (d.v_max - d.v_min) * j as f64 / n as f64))
        })
    }

    /// Smallest `d_w` over the sample grid. Hyperbolicity needs it above -1.
    pub fn min_d_w(&self, grid_n: usize) -> f64 {
        self.grid(grid_n).map(|(w, v)| self.d_w(w, v)).fold(f64::INFINITY, f64::min)
    }

    /// Largest relative mismatch between the analytic derivatives and
    /// centered differences at `samples` random points of the box.
    pub fn derivative_mismatch<R: Rng>(&self, rng: &mut R, samples: usize) -> f64 {
        let d = self.domain;
        let h = 1e-4;
        let mut worst: f64 = 0.0;
        let mut rel = |exact: f64, approx: f64| {
            let r = (exact - approx).abs() / exact.abs().max(1.0);
            worst = worst.max(r);
        };
        for _ in 0..samples {
            let w = rng.gen_range(d.w_min + 2.0 * h..d.w_max - 2.0 * h);
            let v = rng.gen_range(d.v_min + 2.0 * h..d.v_max - 2.0 * h);
            let f = |w: f64, v: f64| self.eval(w, v);
            rel(self.d_w(w, v), (f(w + h, v) - f(w - h, v)) / (2.0 * h));
            let fw = |w: f64, v: f64| self.d_w(w, v);
            rel(self.d2_ww(w, v), (fw(w + h, v) - fw(w - h, v)) / (2.0 * h));
            rel(self.d2_wv(w, v), (fw(w, v + h) - fw(w, v - h)) / (2.0 * h));
            let fww = |w: f64, v: f64| self.d2_ww(w, v);
            rel(self.d3_wwv(w, v), (fww(w, v + h) - fww(w, v - h)) / (2.0 * h));
        }
        worst
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadraticCoupled {
    pub c: f64,
}

impl Flux for QuadraticCoupled {
    fn eval(&self, w: f64, v: f64) -> f64 {
        0.5 * w * w + self.c * v * w * w
    }
    fn d_w(&self, w: f64, v: f64) -> f64 {
        w + 2.0 * self.c * v * w
    }
    fn d2_ww(&self, _w: f64, v: f64) -> f64 {
        1.0 + 2.0 * self.c * v
    }
    fn d2_wv(&self, w: f64, _v: f64) -> f64 {
        2.0 * self.c * w
    }
    fn d3_wwv(&self, _w: f64, _v: f64) -> f64 {
        2.0 * self.c
    }
}

/// `w^4/4 - w^2/2 + c v w^2`, nonconvex in `w`.
#[derive(Clone, Copy, Debug)]
pub struct Quartic {
    pub c: f64,
}

impl Flux for Quartic {
    fn eval(&self, w: f64, v: f64) -> f64 {
        0.25 * w.powi(4) - 0.5 * w * w + self.c * v * w * w
    }
    fn d_w(&self, w: f64, v: f64) -> f64 {
        w.powi(3) - w + 2.0 * self.c * v * w
    }
    fn d2_ww(&self, w: f64, v: f64) -> f64 {
        3.0 * w * w - 1.0 + 2.0 * self.c * v
    }
    fn d2_wv(&self, w: f64, _v: f64) -> f64 {
        2.0 * self.c * w
    }
    fn d3_wwv(&self, _w: f64, _v: f64) -> f64 {
        2.0 * self.c
    }
}

/// Sum of `a * w^i * v^j` terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub i: u32,
    pub j: u32,
    pub a: f64,
}

#[derive(Clone, Debug)]
pub struct CustomPoly {
    pub terms: Vec<PolyTerm>,
}

// a * d^p/dw^p d^q/dv^q of w^i v^j
fn mono(t: &PolyTerm, p: u32, q: u32, w: f64, v: f64) -> f64 {
    if t.i < p || t.j < q {
        return 0.0;
    }
    let falling = |n: u32, k: u32| (0..k).map(|m| (n - m) as f64).product::<f64>();
    t.a * falling(t.i, p) * falling(t.j, q) * w.powi((t.i - p) as i32) * v.powi((t.j - q) as i32)
}

impl CustomPoly {
    fn sum(&self, p: u32, q: u32, w: f64, v: f64) -> f64 {
        self.terms.iter().map(|t| mono(t, p, q, w, v)).sum()
    }
}

impl Flux for CustomPoly {
    fn eval(&self, w: f64, v: f64) -> f64 {
        self.sum(0, 0, w, v)
    }
    fn d_w(&self, w: f64, v: f64) -> f64 {
        self.sum(1, 0, w, v)
    }
    fn d2_ww(&self, w: f64, v: f64) -> f64 {
        self.sum(2, 0, w, v)
    }
    fn d2_wv(&self, w: f64, v: f64) -> f64 {
        self.sum(1, 1, w, v)
    }
    fn d3_wwv(&self, w: f64, v: f64) -> f64 {
        self.sum(2, 1, w, v)
    }
}

fn default_c() -> f64 {
    0.1
}

/// Registry entry as it appears in a scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum FluxChoice {
    QuadraticCoupled {
        #[serde(default = "default_c")]
        c: f64,
        #[serde(default)]
        domain: Option<Domain>,
    },
    Quartic {
        #[serde(default = "default_c")]
        c: f64,
        #[serde(default)]
        domain: Option<Domain>,
    },
    CustomPoly {
        terms: Vec<PolyTerm>,
        #[serde(default)]
        domain: Option<Domain>,
    },
}

impl Default for FluxChoice {
    fn default() -> Self {
        FluxChoice::QuadraticCoupled { c: 0.1, domain: None }
    }
}

impl FluxChoice {
    pub fn build(&self) -> FluxSpec {
        match self {
            FluxChoice::QuadraticCoupled { c, domain } => FluxSpec::new(
                "quadratic_coupled",
                domain.unwrap_or_default(),
                QuadraticCoupled { c: *c },
            ),
            FluxChoice::Quartic { c, domain } => {
                FluxSpec::new("quartic", domain.unwrap_or_default(), Quartic { c: *c })
            }
            FluxChoice::CustomPoly { terms, domain } => FluxSpec::new(
                "custom_poly",
                domain.unwrap_or_default(),
                CustomPoly { terms: terms.clone() },
            ),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivativeBounds {
    pub norm_d2_ww: f64,
    pub norm_d2_wv: f64,
    pub norm_d3_wwv: f64,
}

pub const BOUND_INFLATION: f64 = 1.01;

/// Sup norms sampled on a `(grid_n + 1)^2` grid covering the box, edges
/// included, then inflated by [`BOUND_INFLATION`].
pub fn derivative_bounds(spec: &FluxSpec, grid_n: usize) -> DerivativeBounds {
    assert!(grid_n >= 64, "derivative_bounds needs grid_n >= 64");
    let mut b = DerivativeBounds { norm_d2_ww: 0.0, norm_d2_wv: 0.0, norm_d3_wwv: 0.0 };
    for (w, v) in spec.grid(grid_n) {
        b.norm_d2_ww = b.norm_d2_ww.max(spec.d2_ww(w, v).abs());
        b.norm_d2_wv = b.norm_d2_wv.max(spec.d2_wv(w, v).abs());
        b.norm_d3_wwv = b.norm_d3_wwv.max(spec.d3_wwv(w, v).abs());
    }
    b.norm_d2_ww *= BOUND_INFLATION;
    b.norm_d2_wv *= BOUND_INFLATION;
    b.norm_d3_wwv *= BOUND_INFLATION;
    b
}

/// Node values of a function on `eps * [base_index, base_index + len)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseAffineFlux {
    pub eps: f64,
    pub base_index: i64,
    pub values: Vec<f64>,
}

impl PiecewiseAffineFlux {
    pub fn new(eps: f64, base_index: i64, values: Vec<f64>) -> Self {
        assert!(eps > 0.0);
        assert!(values.len() >= 2, "a piecewise affine flux needs two nodes");
        PiecewiseAffineFlux { eps, base_index, values }
    }

    pub fn lo(&self) -> i64 {
        self.base_index
    }

    pub fn hi(&self) -> i64 {
        self.base_index + self.values.len() as i64 - 1
    }

    pub fn node(&self, k: i64) -> f64 {
        self.eps * k as f64
    }

    pub fn value(&self, k: i64) -> f64 {
        assert!(k >= self.lo() && k <= self.hi(), "node {k} outside [{}, {}]", self.lo(), self.hi());
        self.values[(k - self.base_index) as usize]
    }

    /// Slope of the interpolant on the cell `(k, k + 1)`.
    pub fn cell_slope(&self, k: i64) -> f64 {
        (self.value(k + 1) - self.value(k)) / self.eps
    }

    /// Affine interpolation at an arbitrary `w` inside the node range.
    pub fn at(&self, w: f64) -> f64 {
        let x = w / self.eps;
        let k = (x.floor() as i64).clamp(self.lo(), self.hi() - 1);
        let theta = x - k as f64;
        self.value(k) * (1.0 - theta) + self.value(k + 1) * theta
    }
}

/// Samples `f(., v)` on the grid nodes `lo..=hi` (indices into `eps * Z`).
pub fn interpolate(
    spec: &FluxSpec,
    v: f64,
    eps: f64,
    lo: i64,
    hi: i64,
) -> Result<PiecewiseAffineFlux, FluxError> {
    if lo >= hi {
        return Err(FluxError::EmptyRange(lo, hi));
    }
    if !spec.domain.contains_w(lo as f64 * eps) || !spec.domain.contains_w(hi as f64 * eps) {
        return Err(FluxError::OutsideBox { lo, hi, eps });
    }
    if !spec.domain.contains_v(v) {
        return Err(FluxError::VOutsideBox(v));
    }
    let values = (lo..=hi).map(|k| spec.eval(k as f64 * eps, v)).collect();
    Ok(PiecewiseAffineFlux::new(eps, lo, values))
}

// 16-point Gauss-Legendre on [-1, 1], positive half.
const GL_X: [f64; 8] = [
    0.095_012_509_837_637_44,
    0.281_603_550_779_258_9,
    0.458_016_777_657_227_4,
    0.617_876_244_402_643_7,
    0.755_404_408_355_003,
    0.865_631_202_387_831_7,
    0.944_575_023_073_232_6,
    0.989_400_934_991_649_9,
];
const GL_W: [f64; 8] = [
    0.189_450_610_455_068_5,
    0.182_603_415_044_923_6,
    0.169_156_519_395_002_5,
    0.149_595_988_816_576_7,
    0.124_628_971_255_533_9,
    0.095_158_511_682_492_78,
    0.062_253_523_938_647_89,
    0.027_152_459_411_754_09,
];

/// Integrates `g` over `[a, b]` with 16-point Gauss-Legendre.
pub fn gauss_legendre_16(a: f64, b: f64, g: impl Fn(f64) -> f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in GL_X.iter().zip(GL_W.iter()) {
        acc += w * (g(mid - half * x) + g(mid + half * x));
    }
    acc * half
}

/// Flux whose second `w` derivative on each cell is `d2_ww(., label)` for
/// that cell's own `v` label. Fixed up to an affine function; here the
/// value and slope vanish at the leftmost node.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveFlux {
    pub nodes: PiecewiseAffineFlux,
    /// First derivative at each node.
    pub slopes: Vec<f64>,
    /// `v` label of each cell, left to right.
    pub labels: Vec<f64>,
}

impl EffectiveFlux {
    /// Builds the flux over the consecutive cells starting at grid index
    /// `base_index`, one label per cell.
    pub fn build(spec: &FluxSpec, eps: f64, base_index: i64, labels: Vec<f64>) -> Self {
        assert!(!labels.is_empty(), "effective flux needs at least one cell");
        let mut values = Vec::with_capacity(labels.len() + 1);
        let mut slopes = Vec::with_capacity(labels.len() + 1);
        let (mut value, mut slope) = (0.0, 0.0);
        values.push(value);
        slopes.push(slope);
        for (c, &v) in labels.iter().enumerate() {
            let a = (base_index + c as i64) as f64 * eps;
            let b = a + eps;
            let curv = |t: f64| spec.d2_ww(t, v);
            let bend = gauss_legendre_16(a, b, |t| (b - t) * curv(t));
            value += slope * eps + bend;
            slope += gauss_legendre_16(a, b, curv);
            values.push(value);
            slopes.push(slope);
        }
        EffectiveFlux { nodes: PiecewiseAffineFlux::new(eps, base_index, values), slopes, labels }
    }
}

/// Effective flux at the current time over a homogeneous run of alive
/// waves, labelled by the `v` state at each wave's front.
pub fn effective_flux(
    state: &FieldState,
    block: &[WaveId],
    spec: &FluxSpec,
) -> Result<EffectiveFlux, FluxError> {
    let labels = state.v_labels();
    let mut cells = Vec::with_capacity(block.len());
    let sign = block.first().map(|&s| state.wave(s).sign);
    for &s in block {
        let wave = state.wave(s);
        if Some(wave.sign) != sign {
            return Err(FluxError::NotHomogeneous);
        }
        let v = labels[s as usize].ok_or(FluxError::DeadWave(s))?;
        cells.push((wave.cell(), v));
    }
    cells.sort_by_key(|c| c.0);
    let base = cells.first().map(|c| c.0).ok_or(FluxError::NotHomogeneous)?;
    if cells.iter().enumerate().any(|(i, c)| c.0 != base + i as i64) {
        return Err(FluxError::NotHomogeneous);
    }
    let labels = cells.iter().map(|&(_, v)| v as f64 * state.eps).collect();
    Ok(EffectiveFlux::build(spec, state.eps, base, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Sine;
    impl Flux for Sine {
        fn eval(&self, w: f64, _v: f64) -> f64 {
            w.sin()
        }
        fn d_w(&self, w: f64, _v: f64) -> f64 {
            w.cos()
        }
        fn d2_ww(&self, w: f64, _v: f64) -> f64 {
            -w.sin()
        }
        fn d2_wv(&self, _w: f64, _v: f64) -> f64 {
            0.0
        }
        fn d3_wwv(&self, _w: f64, _v: f64) -> f64 {
            0.0
        }
    }

    struct SineCoupled;
    impl Flux for SineCoupled {
        fn eval(&self, w: f64, v: f64) -> f64 {
            0.5 * w * w + 0.1 * v.sin() * w * w
        }
        fn d_w(&self, w: f64, v: f64) -> f64 {
            w + 0.2 * v.sin() * w
        }
        fn d2_ww(&self, _w: f64, v: f64) -> f64 {
            1.0 + 0.2 * v.sin()
        }
        fn d2_wv(&self, w: f64, v: f64) -> f64 {
            0.2 * v.cos() * w
        }
        fn d3_wwv(&self, _w: f64, v: f64) -> f64 {
            0.2 * v.cos()
        }
    }

    fn poly(terms: &[(u32, u32, f64)]) -> FluxSpec {
        let terms = terms.iter().map(|&(i, j, a)| PolyTerm { i, j, a }).collect();
        FluxSpec::new("custom_poly", Domain::default(), CustomPoly { terms })
    }

    #[test]
    fn gauss_legendre_weights_and_exactness() {
        let total: f64 = GL_W.iter().sum::<f64>() * 2.0;
        assert!((total - 2.0).abs() < 1e-14);
        let i30 = gauss_legendre_16(-1.0, 1.0, |x| x.powi(30));
        assert!((i30 - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn affine_flux_interpolates_exactly() {
        let spec = poly(&[(1, 0, 1.0)]);
        let g = interpolate(&spec, 0.2, 0.1, -5, 5).unwrap();
        for k in -5..=5 {
            assert_eq!(g.value(k), k as f64 * 0.1);
        }
        for m in 0..100 {
            let w = -0.5 + m as f64 * 0.01;
            assert!((g.at(w) - w).abs() <= 1e-15 * w.abs().max(1.0));
        }
    }

    #[test]
    fn square_on_unit_grid() {
        let spec = FluxSpec::new(
            "sq",
            Domain { w_min: -3.0, w_max: 3.0, v_min: -1.0, v_max: 1.0 },
            CustomPoly { terms: vec![PolyTerm { i: 2, j: 0, a: 1.0 }] },
        );
        let g = interpolate(&spec, 0.7, 1.0, 0, 2).unwrap();
        assert_eq!(g.values, vec![0.0, 1.0, 4.0]);
    }

    #[test]
    fn sine_interpolation_error_bound() {
        let spec = FluxSpec::new(
            "sin",
            Domain { w_min: 0.0, w_max: 1.0, v_min: -1.0, v_max: 1.0 },
            Sine,
        );
        let eps = 0.1;
        let g = interpolate(&spec, 0.0, eps, 0, 10).unwrap();
        let sup_f2 = 1.0f64.sin();
        let worst = (0..=10_000)
            .map(|i| {
                let w = i as f64 / 10_000.0;
                (g.at(w) - w.sin()).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst <= eps * eps / 8.0 * sup_f2 + 1e-15, "{worst}");
    }

    #[test]
    fn range_outside_box_is_rejected() {
        let spec = FluxSpec::default_quadratic();
        assert!(matches!(interpolate(&spec, 0.0, 0.1, 0, 9), Err(FluxError::OutsideBox { .. })));
        assert!(matches!(interpolate(&spec, 0.9, 0.1, 0, 2), Err(FluxError::VOutsideBox(_))));
        assert_eq!(interpolate(&spec, 0.0, 0.1, 2, 2), Err(FluxError::EmptyRange(2, 2)));
    }

    #[test]
    fn bounds_of_builtin_and_sampled_fluxes() {
        let half_square = poly(&[(2, 0, 0.5)]);
        let b = derivative_bounds(&half_square, 64);
        assert!((b.norm_d2_ww - 1.01).abs() < 1e-12);
        assert_eq!(b.norm_d3_wwv, 0.0);

        let b = derivative_bounds(&FluxSpec::default_quadratic(), 64);
        assert!((b.norm_d3_wwv - 0.202).abs() < 1e-12);

        let coupled = FluxSpec::new("sin-coupled", Domain::default(), SineCoupled);
        let b = derivative_bounds(&coupled, 64);
        let dense = (0..=4000)
            .map(|i| 0.2 * (-0.5 + i as f64 / 4000.0f64).cos())
            .fold(0.0, f64::max);
        assert!((b.norm_d3_wwv - 0.202).abs() < 1e-12);
        assert!(b.norm_d3_wwv >= dense);
    }

    #[test]
    fn registry_fluxes_are_hyperbolic_and_consistent() {
        let choices = [
            FluxChoice::default(),
            FluxChoice::Quartic { c: 0.1, domain: None },
            FluxChoice::CustomPoly {
                terms: vec![
                    PolyTerm { i: 2, j: 0, a: 0.5 },
                    PolyTerm { i: 3, j: 0, a: 0.2 },
                    PolyTerm { i: 2, j: 1, a: 0.1 },
                ],
                domain: None,
            },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for choice in choices {
            let spec = choice.build();
            assert!(spec.min_d_w(128) > -1.0, "{}", spec.name);
            assert!(spec.derivative_mismatch(&mut rng, 100) < 1e-5, "{}", spec.name);
        }
    }

    #[test]
    fn flux_choice_parses_from_json() {
        let c: FluxChoice = serde_json::from_str(r#"{"name": "quartic", "c": 0.05}"#).unwrap();
        assert_eq!(c, FluxChoice::Quartic { c: 0.05, domain: None });
        let c: FluxChoice = serde_json::from_str(r#"{"name": "quadratic_coupled"}"#).unwrap();
        assert_eq!(c, FluxChoice::default());
        assert!(serde_json::from_str::<FluxChoice>(r#"{"name": "cubic"}"#).is_err());
    }

    #[test]
    fn single_cell_effective_flux_is_anchored() {
        let spec = FluxSpec::default_quadratic();
        let e = EffectiveFlux::build(&spec, 0.1, 3, vec![0.2]);
        assert_eq!(e.nodes.values[0], 0.0);
        assert_eq!(e.slopes[0], 0.0);
        let k = 1.0 + 2.0 * 0.1 * 0.2;
        assert!((e.nodes.values[1] - 0.5 * k * 0.01).abs() < 1e-15);
        assert!((e.slopes[1] - k * 0.1).abs() < 1e-15);
    }

    #[test]
    fn two_label_effective_flux_second_differences() {
        let spec = FluxSpec::new("quartic", Domain::default(), Quartic { c: 0.1 });
        let eps = 0.05;
        let labels = vec![-0.3, -0.3, 0.4, 0.4, 0.4];
        let e = EffectiveFlux::build(&spec, eps, -2, labels.clone());
        // slope jump across a cell is the cell average of d2_ww times eps
        for (c, &v) in labels.iter().enumerate() {
            let a = (-2 + c as i64) as f64 * eps;
            let avg = gauss_legendre_16(a, a + eps, |t| spec.d2_ww(t, v)) / eps;
            let fd = (e.slopes[c + 1] - e.slopes[c]) / eps;
            assert!((fd - avg).abs() < 1e-8);
        }
        // inside a constant-label stretch the node second difference is the
        // doubled average of the curvature against the hat function
        for c in 1..labels.len() {
            if labels[c] != labels[c - 1] {
                continue;
            }
            let v = labels[c];
            let x = (-2 + c as i64) as f64 * eps;
            let second = e.nodes.values[c + 1] - 2.0 * e.nodes.values[c] + e.nodes.values[c - 1];
            let expect = spec.eval(x + eps, v) - 2.0 * spec.eval(x, v) + spec.eval(x - eps, v);
            assert!((second - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_label_matches_flux_up_to_affine() {
        let spec = FluxSpec::new("quartic", Domain::default(), Quartic { c: 0.1 });
        let eps = 0.05;
        let e = EffectiveFlux::build(&spec, eps, -10, vec![0.25; 20]);
        let g = interpolate(&spec, 0.25, eps, -10, 10).unwrap();
        let rh = |p: &PiecewiseAffineFlux, a: i64, b: i64| (p.value(b) - p.value(a)) / ((b - a) as f64 * eps);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let mut pts: Vec<i64> = (0..4).map(|_| rng.gen_range(-10..=10)).collect();
            pts.sort();
            if pts[0] == pts[1] || pts[2] == pts[3] {
                continue;
            }
            let d_eff = rh(&e.nodes, pts[0], pts[1]) - rh(&e.nodes, pts[2], pts[3]);
            let d_f = rh(&g, pts[0], pts[1]) - rh(&g, pts[2], pts[3]);
            assert!((d_eff - d_f).abs() < 1e-9);
        }
    }
}
