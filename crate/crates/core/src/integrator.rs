//! Adaptive Dormand–Prince 5(4) integration of the per-chart systems over
//! complex time, switching charts when the current one degenerates.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde_json::json;
use smallvec::SmallVec;
use thiserror::Error;

use crate::atlas::{Atlas, AtlasError};
use crate::kodaira_spencer::Coboundary;
use crate::painleve_db::ScalarODE;
use crate::ratfunc::{CompiledRatFunc, RatFunc};

/// Charts whose health drops below this are unusable.
pub const SWITCH_FLOOR: f64 = 1e-12;
/// Switch when the current chart scores below this fraction of the best alternative.
pub const HYSTERESIS: f64 = 0.1;
pub const DEFAULT_MAX_STEPS: usize = 1_000_000;
pub const DEFAULT_RTOL: f64 = 1e-9;
pub const DEFAULT_ATOL: f64 = 1e-12;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;
const PI_ALPHA: f64 = 0.17;
const PI_BETA: f64 = 0.04;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegratorError {
    #[error(transparent)]
    Atlas(#[from] AtlasError),
    #[error("no coboundary field for chart {0}")]
    MissingField(String),
    #[error("no numeric value for parameter `{0}`")]
    MissingParam(String),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("invalid path: {0}")]
    BadPath(String),
    #[error("invalid tolerances rtol={rtol}, atol={atol}")]
    BadTolerance { rtol: f64, atol: f64 },
    #[error("initial state lies on the polar locus of chart {chart} (|f| = {denom:.3e})")]
    PoleAtStart { chart: String, denom: f64 },
    #[error("pole of the vector field in chart {chart} near t = {t}")]
    Pole { chart: String, t: Complex64 },
    #[error(
        "base point or inaccessible state at t = {t}: chart {chart}, (x, y) = ({x}, {y}), chart scores {scores:?}"
    )]
    NoHealthyChart {
        t: Complex64,
        chart: String,
        x: Complex64,
        y: Complex64,
        scores: Vec<f64>,
    },
    #[error("step size underflow at t = {t}: h = {h:.3e} below {h_min:.3e}")]
    StepUnderflow { t: Complex64, h: f64, h_min: f64 },
    #[error("step budget of {0} exhausted")]
    MaxSteps(usize),
    #[error("too few usable samples for a residual check")]
    TooFewSamples,
}

/// A point of phase space in the coordinates of chart `chart` (an index into the atlas).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub chart: usize,
    pub x: Complex64,
    pub y: Complex64,
    pub t: Complex64,
}

/// Polyline contour in the complex `t` plane.
#[derive(Debug, Clone, PartialEq)]
pub struct TPath {
    waypoints: Vec<Complex64>,
}

impl TPath {
    pub fn new(waypoints: Vec<Complex64>) -> Result<TPath, IntegratorError> {
        if waypoints.len() < 2 {
            return Err(IntegratorError::BadPath("at least two waypoints are required".into()));
        }
        if waypoints.iter().any(|w| !w.is_finite()) {
            return Err(IntegratorError::BadPath("waypoints must be finite".into()));
        }
        if waypoints.windows(2).any(|w| w[0] == w[1]) {
            return Err(IntegratorError::BadPath("consecutive waypoints coincide".into()));
        }
        Ok(TPath { waypoints })
    }

    pub fn segment(a: Complex64, b: Complex64) -> Result<TPath, IntegratorError> {
        TPath::new(vec![a, b])
    }

    /// A degenerate path that stays at `t`; integrating along it returns the initial sample.
    pub fn stationary(t: Complex64) -> TPath {
        TPath { waypoints: vec![t] }
    }

    pub fn waypoints(&self) -> &[Complex64] {
        &self.waypoints
    }

    pub fn is_stationary(&self) -> bool {
        self.waypoints.len() == 1
    }

    pub fn start(&self) -> Complex64 {
        self.waypoints[0]
    }

    pub fn end(&self) -> Complex64 {
        *self.waypoints.last().expect("nonempty")
    }

    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    pub fn reversed(&self) -> TPath {
        let mut w = self.waypoints.clone();
        w.reverse();
        TPath { waypoints: w }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: Complex64,
    pub chart: usize,
    pub x: Complex64,
    pub y: Complex64,
    pub h: f64,
    pub err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchEvent {
    pub t: Complex64,
    pub from: usize,
    pub to: usize,
    /// Relative round-trip error of the coordinate change at the switch point.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub atlas: String,
    pub chart_ids: Vec<String>,
    pub params: BTreeMap<String, Complex64>,
    pub samples: Vec<Sample>,
    pub switches: Vec<SwitchEvent>,
    pub accepted: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Switching {
    /// Hysteresis rule on chart health.
    Auto,
    Disabled,
    /// Switch to the healthiest alternative after every `k` accepted steps.
    Every(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Defaults to `1e-13` times the path length.
    pub h_min: Option<f64>,
    /// Upper bound on the step length; defaults to a tenth of the path length.
    pub max_step: Option<f64>,
    pub switching: Switching,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            rtol: DEFAULT_RTOL,
            atol: DEFAULT_ATOL,
            max_steps: DEFAULT_MAX_STEPS,
            h_min: None,
            max_step: None,
            switching: Switching::Auto,
        }
    }
}

impl IntegrateOptions {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        IntegrateOptions {
            rtol,
            atol,
            ..Default::default()
        }
    }
}

struct ChartCode {
    x: usize,
    y: usize,
    dx: CompiledRatFunc,
    dy: CompiledRatFunc,
    denom: CompiledRatFunc,
}

/// Numeric evaluators for every chart field, density denominator and transition.
pub struct CompiledSystem {
    atlas: String,
    chart_ids: Vec<String>,
    nvars: usize,
    time: usize,
    params: Vec<(String, usize)>,
    charts: Vec<ChartCode>,
    transitions: BTreeMap<(usize, usize), (CompiledRatFunc, CompiledRatFunc)>,
}

type Point = SmallVec<[Complex64; 16]>;

/// `(dx/dt, dy/dt) = (−η_i, −ζ_i)` for each chart, lowered to floating point.
pub fn compile_rhs(atlas: &Atlas, b: &Coboundary) -> Result<CompiledSystem, IntegratorError> {
    let vars = atlas.vars();
    let mut charts = Vec::new();
    for (i, c) in atlas.charts().iter().enumerate() {
        let vf = b
            .fields
            .get(&c.id)
            .ok_or_else(|| IntegratorError::MissingField(c.id.clone()))?;
        let (x, y) = atlas.coords(i);
        let denom: RatFunc = c.denom.clone().into();
        charts.push(ChartCode {
            x,
            y,
            dx: CompiledRatFunc::new(&vf.eta.neg()),
            dy: CompiledRatFunc::new(&vf.zeta.neg()),
            denom: CompiledRatFunc::new(&denom),
        });
    }
    let transitions = atlas
        .transitions()
        .map(|tr| {
            (
                (tr.source, tr.target),
                (CompiledRatFunc::new(&tr.x_expr), CompiledRatFunc::new(&tr.y_expr)),
            )
        })
        .collect();
    Ok(CompiledSystem {
        atlas: atlas.name.clone(),
        chart_ids: atlas.charts().iter().map(|c| c.id.clone()).collect(),
        nvars: vars.len(),
        time: atlas.time_var(),
        params: atlas
            .params()
            .iter()
            .map(|&p| (vars.name(p).to_string(), p))
            .collect(),
        charts,
        transitions,
    })
}

/// The atlas coboundary compiled; errors if the atlas carries none.
pub fn compile_atlas(atlas: &Atlas) -> Result<CompiledSystem, IntegratorError> {
    let b = atlas
        .coboundary()
        .ok_or_else(|| IntegratorError::MissingField(atlas.charts()[0].id.clone()))?;
    compile_rhs(atlas, b)
}

impl CompiledSystem {
    pub fn chart_ids(&self) -> &[String] {
        &self.chart_ids
    }

    pub fn chart_index(&self, id: &str) -> Option<usize> {
        self.chart_ids.iter().position(|c| c == id)
    }

    pub fn param_names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|(n, _)| n.as_str())
    }

    /// Fixes numeric parameter values; every parameter must be assigned.
    pub fn bind(&self, params: &BTreeMap<String, Complex64>) -> Result<Bound<'_>, IntegratorError> {
        for name in params.keys() {
            if !self.params.iter().any(|(n, _)| n == name) {
                return Err(IntegratorError::UnknownParam(name.clone()));
            }
        }
        let mut base: Point = SmallVec::from_elem(Complex64::new(0.0, 0.0), self.nvars);
        for (name, idx) in &self.params {
            base[*idx] = *params
                .get(name)
                .ok_or_else(|| IntegratorError::MissingParam(name.clone()))?;
        }
        Ok(Bound {
            sys: self,
            base,
        })
    }
}

/// A compiled system with parameter values fixed.
pub struct Bound<'a> {
    sys: &'a CompiledSystem,
    base: Point,
}

impl Bound<'_> {
    pub fn system(&self) -> &CompiledSystem {
        self.sys
    }

    fn point(&self, chart: usize, x: Complex64, y: Complex64, t: Complex64) -> Point {
        let mut p = self.base.clone();
        let c = &self.sys.charts[chart];
        p[c.x] = x;
        p[c.y] = y;
        p[self.sys.time] = t;
        p
    }

    pub fn rhs(&self, s: &PhaseState) -> Result<(Complex64, Complex64), IntegratorError> {
        let p = self.point(s.chart, s.x, s.y, s.t);
        let c = &self.sys.charts[s.chart];
        let pole = || IntegratorError::Pole {
            chart: self.sys.chart_ids[s.chart].clone(),
            t: s.t,
        };
        let dx = c.dx.eval(&p).map_err(|_| pole())?;
        let dy = c.dy.eval(&p).map_err(|_| pole())?;
        Ok((dx, dy))
    }

    /// `|f_i|` at the state.
    pub fn denom_abs(&self, s: &PhaseState) -> f64 {
        let p = self.point(s.chart, s.x, s.y, s.t);
        match self.sys.charts[s.chart].denom.eval(&p) {
            Ok(v) => v.norm(),
            Err(_) => 0.0,
        }
    }

    /// Coordinates of `s` in chart `to`, if the transition is defined there.
    pub fn transform(&self, s: &PhaseState, to: usize) -> Option<PhaseState> {
        if to == s.chart {
            return Some(*s);
        }
        let (fx, fy) = self.sys.transitions.get(&(s.chart, to))?;
        let p = self.point(s.chart, s.x, s.y, s.t);
        // Composite transitions expand to high degree; keep the cancellation out of the result.
        let x = fx.eval_precise(&p).ok()?;
        let y = fy.eval_precise(&p).ok()?;
        Some(PhaseState { chart: to, x, y, t: s.t })
    }

    /// `|f_i| / (1 + |x|² + |y|²)` of an already transformed state.
    pub fn score(&self, s: &PhaseState) -> f64 {
        let v = self.denom_abs(s) / (1.0 + s.x.norm_sqr() + s.y.norm_sqr());
        if v.is_finite() {
            v
        } else {
            0.0
        }
    }

    /// Health score of every chart at `s`; unreachable charts score 0.
    pub fn chart_health(&self, s: &PhaseState) -> Vec<f64> {
        (0..self.sys.charts.len())
            .map(|j| self.transform(s, j).map_or(0.0, |u| self.score(&u)))
            .collect()
    }

    /// Moves `s` to chart `to` and measures the relative round-trip error.
    pub fn switch(&self, s: &PhaseState, to: usize) -> Option<(PhaseState, f64)> {
        let u = self.transform(s, to)?;
        let back = self.transform(&u, s.chart)?;
        let scale = 1.0f64.max(s.x.norm()).max(s.y.norm());
        let r = (back.x - s.x).norm().max((back.y - s.y).norm()) / scale;
        Some((u, r))
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One embedded step of complex size `h`.
///
/// Returns the new state and the max-norm of the embedded difference over `(x, y)`.
/// A pole met at any stage is reported as [`IntegratorError::Pole`].
pub fn step(b: &Bound<'_>, s: &PhaseState, h: Complex64) -> Result<(PhaseState, [Complex64; 2]), IntegratorError> {
    let mut k = [[Complex64::new(0.0, 0.0); 2]; 7];
    for i in 0..7 {
        let mut x = s.x;
        let mut y = s.y;
        for j in 0..i {
            x += h * A[i][j] * k[j][0];
            y += h * A[i][j] * k[j][1];
        }
        let stage = PhaseState {
            chart: s.chart,
            x,
            y,
            t: s.t + h * C[i],
        };
        let (dx, dy) = b.rhs(&stage)?;
        k[i] = [dx, dy];
        if i == 6 {
            let mut ex = Complex64::new(0.0, 0.0);
            let mut ey = Complex64::new(0.0, 0.0);
            for j in 0..7 {
                ex += h * E[j] * k[j][0];
                ey += h * E[j] * k[j][1];
            }
            // The last stage point is the fifth-order solution.
            let out = PhaseState { t: s.t + h, ..stage };
            return Ok((out, [ex, ey]));
        }
    }
    unreachable!()
}

/// Max-norm of an embedded difference.
pub fn error_norm(e: &[Complex64; 2]) -> f64 {
    e[0].norm().max(e[1].norm())
}

fn scaled_error(e: &[Complex64; 2], a: &PhaseState, b: &PhaseState, rtol: f64, atol: f64) -> f64 {
    let sx = atol + rtol * a.x.norm().max(b.x.norm());
    let sy = atol + rtol * a.y.norm().max(b.y.norm());
    let v = (e[0].norm() / sx).max(e[1].norm() / sy);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn initial_step(b: &Bound<'_>, s: &PhaseState, dir: Complex64, opts: &IntegrateOptions, hmax: f64) -> f64 {
    let Ok((dx, dy)) = b.rhs(s) else {
        return hmax * 1e-3;
    };
    let sc = |z: Complex64, f: Complex64| f.norm() / (opts.atol + opts.rtol * z.norm());
    let d0 = (s.x.norm() / (opts.atol + opts.rtol * s.x.norm())).max(s.y.norm() / (opts.atol + opts.rtol * s.y.norm()));
    let d1 = sc(s.x, dx).max(sc(s.y, dy));
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(hmax);
    // Second-derivative probe.
    let probe = PhaseState {
        x: s.x + dir * h0 * dx,
        y: s.y + dir * h0 * dy,
        t: s.t + dir * h0,
        ..*s
    };
    let h1 = match b.rhs(&probe) {
        Ok((px, py)) => {
            let d2 = (sc(s.x, px - dx).max(sc(s.y, py - dy))) / h0;
            if d1.max(d2) <= 1e-15 {
                (h0 * 1e-3).max(1e-6)
            } else {
                (0.01 / d1.max(d2)).powf(0.2)
            }
        }
        Err(_) => h0 * 1e-3,
    };
    (100.0 * h0).min(h1).min(hmax)
}

/// Integrates from `init` along `path` with adaptive steps and chart switching.
pub fn integrate(
    sys: &CompiledSystem,
    params: &BTreeMap<String, Complex64>,
    path: &TPath,
    init: PhaseState,
    opts: &IntegrateOptions,
) -> Result<Trajectory, IntegratorError> {
    if !(opts.rtol > 0.0 && opts.atol > 0.0 && opts.rtol.is_finite() && opts.atol.is_finite()) {
        return Err(IntegratorError::BadTolerance {
            rtol: opts.rtol,
            atol: opts.atol,
        });
    }
    if init.chart >= sys.charts.len() {
        return Err(IntegratorError::Atlas(AtlasError::UnknownChart(init.chart.to_string())));
    }
    if init.t != path.start() {
        return Err(IntegratorError::BadPath(format!(
            "initial time {} differs from the first waypoint {}",
            init.t,
            path.start()
        )));
    }
    let b = sys.bind(params)?;
    let id = |c: usize| sys.chart_ids[c].clone();
    let denom = b.denom_abs(&init);
    if !(denom > SWITCH_FLOOR) || b.rhs(&init).is_err() || !init.x.is_finite() || !init.y.is_finite() {
        return Err(IntegratorError::PoleAtStart { chart: id(init.chart), denom });
    }
    let mut traj = Trajectory {
        atlas: sys.atlas.clone(),
        chart_ids: sys.chart_ids.clone(),
        params: params.clone(),
        samples: vec![Sample {
            t: init.t,
            chart: init.chart,
            x: init.x,
            y: init.y,
            h: 0.0,
            err: 0.0,
        }],
        switches: Vec::new(),
        accepted: 0,
        rejected: 0,
    };
    if path.is_stationary() {
        return Ok(traj);
    }
    let w = path.waypoints();
    let length = path.length();
    let h_min = opts.h_min.unwrap_or(1e-13 * length);
    let hmax = opts.max_step.unwrap_or(0.1 * length).min(length);
    let mut state = init;
    let mut seg = 0usize;
    let mut u = 0.0f64;
    let dir0 = (w[1] - w[0]) / (w[1] - w[0]).norm();
    let mut h = initial_step(&b, &state, dir0, opts, hmax).max(h_min);
    let mut err_prev = 1e-4f64;
    let mut last_rejected = false;
    let mut since_switch = 0usize;
    let mut attempts = 0usize;
    while seg + 1 < w.len() {
        attempts += 1;
        if attempts > opts.max_steps {
            return Err(IntegratorError::MaxSteps(opts.max_steps));
        }
        let delta = w[seg + 1] - w[seg];
        let seg_len = delta.norm();
        let dir = delta / seg_len;
        let mut h_try = h.min(hmax);
        let remaining = seg_len - u;
        let land = h_try >= remaining * (1.0 - 1e-12);
        if land {
            h_try = remaining;
        }
        let result = step(&b, &state, dir * h_try);
        let (new, e) = match result {
            Ok(v) => v,
            Err(IntegratorError::Pole { .. }) => {
                traj.rejected += 1;
                last_rejected = true;
                if opts.switching == Switching::Auto {
                    if let Some(to) = better_chart(&b, &state, 1.0) {
                        do_switch(&b, &mut state, to, &mut traj);
                        continue;
                    }
                }
                h = h_try * 0.5;
                if h < h_min {
                    return Err(IntegratorError::StepUnderflow { t: state.t, h, h_min });
                }
                continue;
            }
            Err(other) => return Err(other),
        };
        let err = scaled_error(&e, &state, &new, opts.rtol, opts.atol);
        if err > 1.0 {
            traj.rejected += 1;
            last_rejected = true;
            h = h_try * FAC_MIN.max(SAFETY * err.powf(-0.2));
            if h < h_min {
                return Err(IntegratorError::StepUnderflow { t: state.t, h, h_min });
            }
            continue;
        }
        // Accepted.
        traj.accepted += 1;
        state = new;
        if land {
            state.t = w[seg + 1];
            seg += 1;
            u = 0.0;
        } else {
            u += h_try;
        }
        let mut fac = SAFETY * err.max(1e-10).powf(-PI_ALPHA) * err_prev.powf(PI_BETA);
        fac = fac.clamp(FAC_MIN, FAC_MAX);
        if last_rejected {
            fac = fac.min(1.0);
        }
        let proposal = h_try * fac;
        h = if land { proposal.max(h.min(hmax) * fac.min(1.0)) } else { proposal };
        err_prev = err.max(1e-4);
        last_rejected = false;
        since_switch += 1;
        match opts.switching {
            Switching::Disabled => {}
            Switching::Auto => {
                let scores = b.chart_health(&state);
                if scores.iter().all(|&s| s < SWITCH_FLOOR) {
                    return Err(IntegratorError::NoHealthyChart {
                        t: state.t,
                        chart: id(state.chart),
                        x: state.x,
                        y: state.y,
                        scores,
                    });
                }
                if let Some(to) = better_chart(&b, &state, HYSTERESIS) {
                    do_switch(&b, &mut state, to, &mut traj);
                }
            }
            Switching::Every(k) => {
                if k > 0 && since_switch >= k {
                    if let Some(to) = better_chart(&b, &state, f64::INFINITY) {
                        do_switch(&b, &mut state, to, &mut traj);
                    }
                    since_switch = 0;
                }
            }
        }
        traj.samples.push(Sample {
            t: state.t,
            chart: state.chart,
            x: state.x,
            y: state.y,
            h: h_try,
            err: error_norm(&e),
        });
    }
    Ok(traj)
}

/// The healthiest other chart if the current score is below `factor` times its score.
fn better_chart(b: &Bound<'_>, s: &PhaseState, factor: f64) -> Option<usize> {
    let scores = b.chart_health(s);
    let current = scores[s.chart];
    let (best, &score) = scores
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != s.chart)
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    (score >= SWITCH_FLOOR && (current < factor * score || factor.is_infinite())).then_some(best)
}

fn do_switch(b: &Bound<'_>, state: &mut PhaseState, to: usize, traj: &mut Trajectory) {
    if let Some((u, residual)) = b.switch(state, to) {
        traj.switches.push(SwitchEvent {
            t: state.t,
            from: state.chart,
            to,
            residual,
        });
        *state = u;
    }
}

impl Trajectory {
    pub fn chart_id(&self, chart: usize) -> &str {
        &self.chart_ids[chart]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectories start with the initial sample")
    }

    pub fn final_state(&self) -> PhaseState {
        let s = self.last();
        PhaseState {
            chart: s.chart,
            x: s.x,
            y: s.y,
            t: s.t,
        }
    }

    pub fn max_switch_residual(&self) -> f64 {
        self.switches.iter().map(|e| e.residual).fold(0.0, f64::max)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let c = |z: Complex64| json!([z.re, z.im]);
        json!({
            "atlas": self.atlas,
            "params": self.params.iter().map(|(k, v)| (k.clone(), c(*v))).collect::<serde_json::Map<_, _>>(),
            "samples": self.samples.iter().map(|s| json!({
                "t": c(s.t),
                "chart": self.chart_ids[s.chart],
                "x": c(s.x),
                "y": c(s.y),
                "h": s.h,
                "err": s.err,
            })).collect::<Vec<_>>(),
            "switches": self.switches.iter().map(|e| json!({
                "t": c(e.t),
                "from": self.chart_ids[e.from],
                "to": self.chart_ids[e.to],
                "residual": e.residual,
            })).collect::<Vec<_>>(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("plain JSON values")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_re,t_im,chart,x_re,x_im,y_re,y_im,h,err\n");
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{:e},{:e},{},{:e},{:e},{:e},{:e},{:e},{:e}",
                s.t.re, s.t.im, self.chart_ids[s.chart], s.x.re, s.x.im, s.y.re, s.y.im, s.h, s.err
            );
        }
        out
    }
}

/// Largest `|x'' − rhs(x, x', t)|` over interior sample triples in chart `chart`,
/// with derivatives taken from the interpolating quadratic in `t`.
///
/// Triples that straddle a chart switch are skipped. Every non-dynamical
/// variable of `ode` must be a trajectory parameter.
pub fn residual_check(traj: &Trajectory, ode: &ScalarODE, chart: &str) -> Result<f64, IntegratorError> {
    let chart = traj
        .chart_ids
        .iter()
        .position(|c| c == chart)
        .ok_or_else(|| IntegratorError::Atlas(AtlasError::UnknownChart(chart.to_string())))?;
    let f = CompiledRatFunc::new(&ode.rhs);
    let mut point = vec![Complex64::new(0.0, 0.0); ode.vars.len()];
    for (i, name) in ode.vars.names().iter().enumerate() {
        if i == ode.x || i == ode.p || i == ode.t || !ode.rhs.contains_var(i) {
            continue;
        }
        point[i] = *traj
            .params
            .get(name)
            .ok_or_else(|| IntegratorError::MissingParam(name.clone()))?;
    }
    let mut worst: Option<f64> = None;
    for w in traj.samples.windows(3) {
        if w.iter().any(|s| s.chart != chart) {
            continue;
        }
        let (t0, t1, t2) = (w[0].t, w[1].t, w[2].t);
        if t0 == t1 || t1 == t2 || t0 == t2 {
            continue;
        }
        let d01 = (w[1].x - w[0].x) / (t1 - t0);
        let d12 = (w[2].x - w[1].x) / (t2 - t1);
        let xpp = (d12 - d01) * 2.0 / (t2 - t0);
        let xp = d01 * ((t2 - t1) / (t2 - t0)) + d12 * ((t1 - t0) / (t2 - t0));
        point[ode.x] = w[1].x;
        point[ode.p] = xp;
        point[ode.t] = t1;
        let Ok(r) = f.eval(&point) else { continue };
        let res = (xpp - r).norm();
        worst = Some(worst.map_or(res, |m: f64| m.max(res)));
    }
    worst.ok_or(IntegratorError::TooFewSamples)
}
