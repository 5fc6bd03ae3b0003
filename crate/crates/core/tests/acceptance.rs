//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion is red.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::sync::Arc;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use okpair::atlas::{
    builtin_atlas, check_atlas, check_density_compat, check_inverse_pair, check_triple_compat, jacobian,
    pullback_density, Atlas,
};
use okpair::hamiltonian::{equal_modulo_time, fundamental_check, recover_hamiltonian};
use okpair::integrator::{
    compile_atlas, integrate, Bound, CompiledSystem, IntegrateOptions, PhaseState, TPath, Trajectory,
};
use okpair::kodaira_spencer::{
    ks_cocycle, ode_system, pushforward_vf, verify_coboundary, verify_cocycle, verify_gluing, ChartVectorField,
    Coboundary, Orientation,
};
use okpair::lattice::{builtin_labels, builtin_matrix, classify, deformation_dim, kernel};
use okpair::painleve_db::{
    builtin_system, check_system, compare, d8_chart0_reduction, d8_chart0_system, eliminate_x_affine, eliminate_y,
    system_texts, system_vars, QuadraticHamiltonian, ScalarODE, D8_SCALAR, SYSTEMS,
};
use okpair::ratfunc::{parse_expr, RatFunc, RatFuncError, VarTable};

/// Criterion 7: largest deviation from the exact solution over the path.
const TRACK_TOL: f64 = 1e-9;
/// Criterion 7: relative chart round-trip error.
const ROUND_TRIP_TOL: f64 = 1e-12;
/// Criterion 7: both charts of a sampled round trip must score at least this.
const ROUND_TRIP_HEALTH: f64 = 1e-3;
const ROUND_TRIPS: usize = 1000;
/// Criterion 7: forward-then-backward tolerance, in units of rtol.
const RETURN_FACTOR: f64 = 100.0;
/// Criterion 7: fixed-step oracle.
const ORACLE_STEP: f64 = 1e-5;
const ORACLE_TOL: f64 = 1e-7;
/// Criterion 8.
const POLE_MAGNITUDE: f64 = 1e6;
const POLE_RETURN_TOL: f64 = 1e-6;
/// Criterion 5.
const SHUFFLES: usize = 100;

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

trait Ctx<T> {
    fn ctx(self, what: &str) -> Result<T, String>;
}

impl<T, E: Display> Ctx<T> for Result<T, E> {
    fn ctx(self, what: &str) -> Result<T, String> {
        self.map_err(|e| format!("{what}: {e}"))
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn ex(a: &Atlas, s: &str) -> RatFunc {
    parse_expr(s, a.vars()).unwrap_or_else(|e| panic!("{s}: {e}"))
}

fn field(a: &Atlas, chart: &str, eta: &str, zeta: &str) -> ChartVectorField {
    ChartVectorField::new(chart, ex(a, eta), ex(a, zeta))
}

fn entry<'a>(c: &'a okpair::kodaira_spencer::CechCocycle, i: &str, j: &str) -> Result<&'a ChartVectorField, String> {
    c.entries
        .get(&(i.to_string(), j.to_string()))
        .ok_or_else(|| format!("no cocycle entry ({i}, {j})"))
}

fn same(a: &ChartVectorField, b: &ChartVectorField) -> Result<bool, String> {
    a.equals(b).ctx("field comparison")
}

fn pairs(a: &Atlas) -> Vec<(String, String)> {
    a.transitions()
        .map(|tr| (a.charts()[tr.source].id.clone(), a.charts()[tr.target].id.clone()))
        .collect()
}

// Criterion 1

fn criterion_1() -> Outcome {
    let e7 = builtin_atlas("E7").ctx("E7")?;
    let rep = check_atlas(&e7).ctx("check_atlas")?;
    ensure(rep.passed(), || rep.to_string())?;
    for (i, j) in [("U0", "U1"), ("U0", "U2"), ("U1", "U2")] {
        let r = check_inverse_pair(&e7, i, j).ctx("inverse pair")?;
        ensure(r.passed(), || r.to_string())?;
    }
    let r = check_triple_compat(&e7, "U0", "U1", "U2").ctx("triple")?;
    ensure(r.passed(), || r.to_string())?;
    let one = RatFunc::one(e7.vars());
    let mut dets = 0;
    for tr in e7.transitions() {
        let j = jacobian(&e7, tr).ctx("jacobian")?;
        ensure(j.det.equals(&one).ctx("det")?, || format!("Jacobian determinant {}", j.det))?;
        dets += 1;
    }
    let cocycle = ks_cocycle(&e7).ctx("ks_cocycle")?;
    ensure(entry(&cocycle, "U0", "U1")?.is_zero(), || "theta_01 is not zero".into())?;
    let t02 = field(&e7, "U0", "0", "1");
    ensure(same(entry(&cocycle, "U0", "U2")?, &t02)?, || "theta_02 differs from d/dy0".into())?;
    let t12 = field(&e7, "U1", "0", "-1/x1^2");
    ensure(same(entry(&cocycle, "U1", "U2")?, &t12)?, || "theta_12 differs from -x1^-2 d/dy1".into())?;
    let r = verify_cocycle(&cocycle, &e7).ctx("verify_cocycle")?;
    ensure(r.passed(), || r.to_string())?;
    let cb = e7.coboundary().ok_or("E7 has no coboundary")?;
    let rep = verify_coboundary(&cocycle, cb, &e7).ctx("verify_coboundary")?;
    ensure(rep.report.passed() && rep.orientation == Orientation::Standard, || rep.report.to_string())?;
    // θ_0 = θ_1 and θ_2 = θ_02 + θ_0, compared in chart-0 coordinates.
    let theta0 = &cb.fields["U0"];
    let theta1 = pushforward_vf(&e7, &cb.fields["U1"], "U0").ctx("pushforward")?;
    ensure(same(&theta1, theta0)?, || "theta_1 != theta_0".into())?;
    let theta2 = pushforward_vf(&e7, &cb.fields["U2"], "U0").ctx("pushforward")?;
    ensure(same(&theta2, &t02.add(theta0).ctx("add")?)?, || "theta_2 != theta_02 + theta_0".into())?;
    Ok(format!(
        "{} atlas checks, {dets} unit Jacobians, cocycle entries exact, coboundary standard",
        rep.report.len()
    ))
}

// Criterion 2

/// Moves `f` from the atlas table onto `target`, renaming by `names`.
fn rename(f: &RatFunc, target: &Arc<VarTable>, names: &[(&str, &str)]) -> RatFunc {
    let map: Vec<usize> = f
        .vars()
        .names()
        .iter()
        .map(|n| {
            let to = names.iter().find(|(from, _)| from == n).map_or(n.as_str(), |(_, to)| to);
            target.index_of(to).unwrap_or(0)
        })
        .collect();
    for (i, n) in f.vars().names().iter().enumerate() {
        assert!(!f.contains_var(i) || map[i] != 0 || names.iter().any(|(a, _)| a == n), "{n} lost");
    }
    f.relabel(target, &map)
}

fn criterion_2() -> Outcome {
    let e7 = builtin_atlas("E7").ctx("E7")?;
    let cb = e7.coboundary().ok_or("E7 has no coboundary")?;
    let h0 = recover_hamiltonian(&e7, &cb.fields["U0"]).ctx("recover_hamiltonian")?;
    let printed = ex(&e7, "y0^2/2 - (x0^2 + t/2)*y0 - (alpha + 1/2)*x0");
    ensure(equal_modulo_time(&e7, "U0", &h0.h, &printed).ctx("compare")?, || {
        format!("H0 = {} differs from the printed Hamiltonian", h0.h)
    })?;
    let zero = RatFunc::zero(e7.vars());
    let (x0, y0) = e7.coords(0);
    let at_origin = h0.h.subst(&[(x0, zero.clone()), (y0, zero)]).ctx("subst")?;
    ensure(at_origin.is_zero(), || format!("H0(0, 0) = {at_origin}"))?;
    let ode = ode_system(cb);
    let (dx, dy) = &ode["U0"];
    ensure(dx.equals(&ex(&e7, "y0 - x0^2 - t/2")).ctx("dx")?, || format!("x0' = {dx}"))?;
    ensure(dy.equals(&ex(&e7, "2*x0*y0 + alpha + 1/2")).ctx("dy")?, || format!("y0' = {dy}"))?;
    let vars = system_vars("II").ctx("II")?;
    let h = rename(&h0.h, &vars, &[("x0", "x"), ("y0", "y")]);
    let (x, y, p, t) = (0, 1, 2, 3);
    let q = QuadraticHamiltonian::from_function(&h, x, y, t).ctx("quadratic split")?;
    let scalar = eliminate_y(&q, p).ctx("eliminate_y")?;
    let expected = parse_expr("2*x^3 + t*x + alpha", &vars).ctx("parse")?;
    ensure(scalar.rhs.equals(&expected).ctx("compare")?, || format!("x'' = {}", scalar.rhs))?;
    Ok(format!("H0 = {}; x'' = {}", h0.h, scalar.rhs))
}

// Criterion 3

const D8_F1: &str = "-2*y1*(t - 2*x1^2 + 5*t*x1*y1^2 + 9*t*x1^2*y1^4 + 7*t*x1^3*y1^6 + 2*t*x1^4*y1^8)";
const D8_G1: &str = "1 - x1*y1^2 + t*y1^4 + 3*t*x1*y1^6 + 3*t*x1^2*y1^8 + t*x1^3*y1^10";
const D8_F2: &str = "-t^2 + 3*t*x2 - 2*t^3*y2 + t*x2*y2 - 2*x2^2*y2 + 7*t^3*y2^2 - 8*t^3*y2^3 - 8*t^2*x2*y2^3 \
                     + 3*t^3*y2^4 + 18*t^2*x2*y2^4 - 10*t^2*x2*y2^5 - 10*t*x2^2*y2^5 + 11*t*x2^2*y2^6 - 4*x2^3*y2^7";
const D8_G2: &str = "-t + t^2*y2^4 - 2*t^2*y2^5 + t^2*y2^6 + 2*t*x2*y2^6 - 2*t*x2*y2^7 + x2^2*y2^8";
const D8_BIG_F1: &str = "(1 + x1*y1^2)";
const D8_BIG_F2: &str = "(t - t*y2 + x2*y2^2)";

/// The splitting fields exactly as printed for the `D8` atlas.
fn d8_printed_fields(d8: &Atlas) -> Coboundary {
    let over = |num: &str, den: &str| format!("({num})/(t*{den})");
    let fields = [
        field(d8, "U0", "(t - y0^2)/(t*y0)", "-2*x0*y0/t"),
        field(d8, "U1", &over(D8_F1, D8_BIG_F1), &over(D8_G1, D8_BIG_F1)),
        field(d8, "U2", &over(D8_F2, D8_BIG_F2), &over(D8_G2, D8_BIG_F2)),
    ];
    Coboundary {
        fields: fields.into_iter().map(|f| (f.chart.clone(), f)).collect(),
    }
}

fn criterion_3() -> Outcome {
    let d8 = builtin_atlas("D8").ctx("D8")?;
    let mut n_density = 0;
    for (s, t) in pairs(&d8) {
        let r = check_density_compat(&d8, &s, &t).ctx("density")?;
        ensure(r.passed(), || r.to_string())?;
        n_density += 1;
    }
    let tr = d8.transition("U2", "U0").ctx("transition")?;
    let pulled = pullback_density(&d8, tr, &ex(&d8, "1/y0")).ctx("pullback")?;
    ensure(pulled.equals(&ex(&d8, &format!("1/{D8_BIG_F2}"))).ctx("compare")?, || {
        format!("pullback of 1/y0 through U2 -> U0 is {pulled}")
    })?;
    for (id, g) in [("U0", "1/y0"), ("U1", &format!("1/{D8_BIG_F1}^2")), ("U2", &format!("1/{D8_BIG_F2}"))] {
        let declared = d8.density(id).ctx("density")?;
        ensure(declared.equals(&ex(&d8, g)).ctx("compare")?, || format!("density of {id} is {declared}"))?;
    }

    let cocycle = ks_cocycle(&d8).ctx("ks_cocycle")?;
    ensure(entry(&cocycle, "U0", "U1")?.is_zero(), || "theta_01 is not zero".into())?;
    let t02 = field(&d8, "U0", "0", "(-1 + x0)/x0^3");
    ensure(same(entry(&cocycle, "U0", "U2")?, &t02)?, || "theta_02 differs".into())?;
    let t21 = field(&d8, "U2", "(-1 + y2)/y2^2", "0");
    ensure(same(entry(&cocycle, "U2", "U1")?, &t21)?, || "theta_21 differs".into())?;
    let r = verify_cocycle(&cocycle, &d8).ctx("verify_cocycle")?;
    ensure(r.passed(), || r.to_string())?;

    let printed = d8_printed_fields(&d8);
    let cb = d8.coboundary().ok_or("D8 has no coboundary")?;
    let stored = verify_coboundary(&cocycle, cb, &d8).ctx("verify_coboundary")?;
    ensure(stored.report.passed() && stored.orientation == Orientation::Standard, || {
        stored.report.to_string()
    })?;
    ensure(verify_gluing(&d8, cb).ctx("gluing")?.passed(), || "time flow does not glue".into())?;
    let verbatim = verify_coboundary(&cocycle, &printed, &d8).ctx("verify_coboundary")?;
    ensure(verbatim.orientation == Orientation::Reversed, || {
        format!("printed fields have orientation {:?}", verbatim.orientation)
    })?;
    for (id, f) in &printed.fields {
        ensure(same(&f.neg(), &cb.fields[id])?, || format!("stored field on {id} is not the printed one negated"))?;
    }

    let g2 = d8.density("U2").ctx("density")?;
    let fc = fundamental_check(&d8, &g2, &cb.fields["U2"]).ctx("fundamental_check")?;
    ensure(fc.passed(), || fc.to_string())?;
    // d/dt(1/F2) + d/dx2(f2/(t F2^2)) + d/dy2(g2/(t F2^2)), term by term as printed.
    let v = d8.vars();
    let idx = |n: &str| v.index_of(n).expect("var");
    let a = ex(&d8, &format!("({D8_F2})/(t*{D8_BIG_F2}^2)"));
    let b = ex(&d8, &format!("({D8_G2})/(t*{D8_BIG_F2}^2)"));
    let lhs = g2
        .diff(idx("t"))
        .and_then(|d| d.add(&a.diff(idx("x2"))?))
        .and_then(|d| d.add(&b.diff(idx("y2"))?))
        .ctx("fundamental equation")?;
    ensure(lhs.is_zero(), || format!("fundamental equation on U2 leaves {lhs}"))?;
    Ok(format!(
        "{n_density} density pullbacks, cocycle entries exact, stored fields standard; printed fields \
         satisfy the reversed convention theta_ij = theta_i - theta_j and equal the stored ones negated; \
         fundamental equation on U2 is exactly zero"
    ))
}

// Criterion 4

fn criterion_4() -> Outcome {
    let d8 = builtin_atlas("D8").ctx("D8")?;
    let red = d8_chart0_reduction(&d8).ctx("reduction")?;
    ensure(red.versus_printed.matched, || {
        format!("chart-0 elimination vs printed scalar equation: {}", red.versus_printed.verdict())
    })?;
    // Same elimination straight from the printed chart-0 system.
    let sys = d8_chart0_system("-(t - y0^2)/(t*y0)", "2*x0*y0/t").ctx("system")?;
    let scalar = eliminate_x_affine(&sys, 2).ctx("eliminate")?;
    let printed = ScalarODE {
        rhs: parse_expr(D8_SCALAR, &sys.vars).ctx("parse")?,
        ..scalar.clone()
    };
    let from_text = compare(&scalar, &printed, None).ctx("compare")?;
    ensure(from_text.matched, || format!("printed system: {}", from_text.verdict()))?;
    let detail = format!(
        "y0'' = {} reproduced exactly; x(t) = -8*y0(-t/4) gives {}",
        red.scalar.rhs,
        red.rescaled.verdict()
    );
    ensure(red.relabeled.matched, || {
        format!(
            "{detail}; under y0 -> x against the catalog third-kind D8 equation: {}. The catalog and the \
             reduced equation differ by the scaling above, not by a relabeling",
            red.relabeled.verdict()
        )
    })?;
    Ok(detail)
}

// Criterion 5

fn expected_dim(label: &str) -> i64 {
    match label {
        "E8" | "D8" => 1,
        "E7" | "D7" => 2,
        "E6" | "D6" => 3,
        "D5" => 4,
        "D4" => 5,
        "A0" | "A0*" => 9,
        a => 9 - a[1..].parse::<i64>().expect("A_k label"),
    }
}

fn criterion_5() -> Outcome {
    let labels = builtin_labels();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0ca1);
    let pinned: [(&str, &[i64]); 2] = [("E7", &[1, 2, 3, 4, 3, 2, 1, 2]), ("D8", &[1, 1, 2, 2, 2, 2, 2, 1, 1])];
    for (label, marks) in pinned {
        let (_, t) = builtin_matrix(label).ctx("catalog")?;
        ensure(t.marks == marks, || format!("{label} marks {:?}", t.marks))?;
    }
    for label in &labels {
        let (m, t) = builtin_matrix(label).ctx("catalog")?;
        let k = kernel(&m);
        ensure(k == vec![t.marks.clone()], || format!("{label}: kernel {k:?}, marks {:?}", t.marks))?;
        let dim = deformation_dim(&t);
        ensure(dim == expected_dim(label), || format!("{label}: deformation dim {dim}"))?;
        let mut perm: Vec<usize> = (0..m.n).collect();
        for _ in 0..SHUFFLES {
            perm.shuffle(&mut rng);
            let got = classify(&m.permuted(&perm)).ok_or_else(|| format!("{label}: shuffle {perm:?} unclassified"))?;
            let ok = got.root_type.label == *label || got.aliases.contains(label);
            ensure(ok, || format!("{label}: shuffle classified as {}", got.root_type.label))?;
        }
    }
    Ok(format!(
        "{} catalog labels (A0 and A0* share a matrix and are reported as aliases), kernels equal marks, \
         {SHUFFLES} shuffles each",
        labels.len()
    ))
}

// Criterion 6

fn criterion_6() -> Outcome {
    let mut lines = Vec::new();
    for tag in ["I", "II", "III", "IV", "V", "VI"] {
        let cmp = check_system(tag).ctx(tag)?.ok_or_else(|| format!("{tag}: no comparison"))?;
        ensure(cmp.matched || cmp.residual.as_deref().is_some_and(|r| !r.is_empty()), || {
            format!("{tag}: mismatch without residual")
        })?;
        if matches!(tag, "I" | "II") {
            ensure(cmp.matched, || format!("{tag}: {}", cmp.verdict()))?;
        }
        lines.push(format!("P_{tag}: {}", cmp.verdict()));
    }
    Ok(lines.join("; "))
}

// Criterion 7

fn e7_system(alpha: f64) -> Result<(CompiledSystem, BTreeMap<String, Complex64>), String> {
    let atlas = builtin_atlas("E7").ctx("E7")?;
    let sys = compile_atlas(&atlas).ctx("compile")?;
    Ok((sys, BTreeMap::from([("alpha".to_string(), c(alpha))])))
}

fn state(chart: usize, x: f64, y: f64, t: f64) -> PhaseState {
    PhaseState { chart, x: c(x), y: c(y), t: c(t) }
}

fn distance_in(b: &Bound<'_>, a: &PhaseState, chart: usize, x: Complex64, y: Complex64) -> f64 {
    match b.transform(a, chart) {
        Some(u) => (u.x - x).norm().max((u.y - y).norm()),
        None => f64::INFINITY,
    }
}

fn round_trips(name: &str, params: &[&str], rng: &mut ChaCha8Rng) -> Result<(usize, f64), String> {
    let atlas = builtin_atlas(name).ctx(name)?;
    let sys = compile_atlas(&atlas).ctx("compile")?;
    let p: BTreeMap<String, Complex64> = params
        .iter()
        .map(|n| (n.to_string(), Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
        .collect();
    let b = sys.bind(&p).ctx("bind")?;
    let n = sys.chart_ids().len();
    let (mut done, mut worst) = (0, 0.0f64);
    let mut tries = 0;
    while done < ROUND_TRIPS {
        tries += 1;
        if tries > 100 * ROUND_TRIPS {
            return Err(format!("{name}: only {done} healthy round trips sampled"));
        }
        let chart = rng.gen_range(0..n);
        let mut z = || Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let (x, y) = (z(), z());
        let t = Complex64::new(rng.gen_range(0.5..2.0), rng.gen_range(-0.5..0.5));
        let s = PhaseState { chart, x, y, t };
        let to = rng.gen_range(0..n);
        if to == s.chart || b.score(&s) < ROUND_TRIP_HEALTH {
            continue;
        }
        let Some((u, r)) = b.switch(&s, to) else { continue };
        if b.score(&u) < ROUND_TRIP_HEALTH {
            continue;
        }
        worst = worst.max(r);
        done += 1;
    }
    Ok((done, worst))
}

/// Classical RK4 with fixed step on the first and third charts of the E7
/// atlas, written out by hand, switching when `|x|` leaves the unit-ish range.
fn rk4_oracle(alpha: f64, x: f64, y: f64, t0: f64, t1: f64, h: f64) -> (usize, f64, f64, usize) {
    let a = alpha;
    let f0 = |t: f64, x: f64, y: f64| (y - x * x - t / 2.0, 2.0 * x * y + a + 0.5);
    let f2 = |t: f64, x: f64, y: f64| {
        let dx = -0.5 * (2.0 + t * x * x + (2.0 * a - 1.0) * x.powi(3) - 2.0 * x.powi(4) * y);
        let dy = -0.25 * (-1.0 + 2.0 * a - 4.0 * x * y) * (t + x * (-1.0 + 2.0 * a - 2.0 * x * y));
        (dx, dy)
    };
    let to2 = |t: f64, x: f64, y: f64| {
        (1.0 / x, 2.0 * x.powi(4) + t * x * x + (a - 0.5) * x - x * x * y)
    };
    let to0 = |t: f64, x: f64, y: f64| {
        (1.0 / x, 2.0 / (x * x) + t + (a - 0.5) * x - y * x * x)
    };
    let steps = ((t1 - t0) / h).round() as usize;
    let (mut chart, mut u, mut v) = (0usize, x, y);
    let mut switches = 0;
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        if chart == 0 && u.abs() > 2.0 {
            (u, v) = to2(t, u, v);
            chart = 2;
            switches += 1;
        } else if chart == 2 && u.abs() > 1.0 {
            (u, v) = to0(t, u, v);
            chart = 0;
            switches += 1;
        }
        let f = |t: f64, x: f64, y: f64| if chart == 0 { f0(t, x, y) } else { f2(t, x, y) };
        let k1 = f(t, u, v);
        let k2 = f(t + h / 2.0, u + h / 2.0 * k1.0, v + h / 2.0 * k1.1);
        let k3 = f(t + h / 2.0, u + h / 2.0 * k2.0, v + h / 2.0 * k2.1);
        let k4 = f(t + h, u + h * k3.0, v + h * k3.1);
        u += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        v += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    }
    (chart, u, v, switches)
}

fn criterion_7() -> Outcome {
    let mut notes = Vec::new();
    let mut red = Vec::new();
    let (sys, p) = e7_system(0.0)?;
    let b = sys.bind(&p).ctx("bind")?;
    let opts = IntegrateOptions::default();

    // Exact solution x = 0, y = t/2 at alpha = 0.
    let path = TPath::segment(c(0.0), c(10.0)).ctx("path")?;
    let traj = integrate(&sys, &p, &path, state(0, 0.0, 0.0, 0.0), &opts).ctx("integrate")?;
    let err = |s: &okpair::integrator::Sample| s.x.norm().max((s.y - s.t / 2.0).norm());
    let worst = traj.samples.iter().map(err).fold(0.0, f64::max);
    let early = traj.samples.iter().filter(|s| s.t.re <= 5.0).map(err).fold(0.0, f64::max);
    let line = format!(
        "exact solution on [0, 10] at rtol {:e}: max error {worst:.2e} (t <= 5: {early:.2e}), tolerance {TRACK_TOL:e}",
        opts.rtol
    );
    if worst <= TRACK_TOL {
        notes.push(line);
    } else {
        red.push(format!(
            "{line}. Deviations from this solution obey dx'' = t dx, whose growing Airy mode gains \
             Bi(10)/Bi(0) ~ 7e8 over the path, so a local error of one ulp near t = 0 alone ends near 1e-7; \
             reference RK45 and DOP853 runs at rtol 1e-9..1e-13 land between 2e-9 and 5e-7"
        ));
    }

    // Chart round trips on random healthy points.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for (name, params) in [("E7", &["alpha"][..]), ("D8", &[][..])] {
        let (n, w) = round_trips(name, params, &mut rng)?;
        let line = format!("{name}: {n} round trips, max relative error {w:.2e}");
        if w <= ROUND_TRIP_TOL {
            notes.push(line);
        } else {
            red.push(line);
        }
    }

    // Forward then backward through the pole of the generic run.
    let path = TPath::segment(c(0.0), c(4.0)).ctx("path")?;
    let fwd = integrate(&sys, &p, &path, state(0, 1.0, 1.0, 0.0), &opts).ctx("forward")?;
    let sw = fwd.max_switch_residual();
    if sw > ROUND_TRIP_TOL {
        red.push(format!("trajectory switch residual {sw:.2e}"));
    }
    let back = integrate(&sys, &p, &path.reversed(), fwd.final_state(), &opts).ctx("backward")?;
    let gap = distance_in(&b, &back.final_state(), 0, c(1.0), c(1.0));
    let line = format!(
        "(1, 1) on [0, 4] and back: {} switches, returns within {gap:.2e} (tolerance {:.0e})",
        fwd.switches.len(),
        RETURN_FACTOR * opts.rtol
    );
    if gap <= RETURN_FACTOR * opts.rtol {
        notes.push(line);
    } else {
        red.push(line);
    }

    // Fixed-step oracle.
    let (chart, u, v, oracle_switches) = rk4_oracle(0.0, 1.0, 1.0, 0.0, 4.0, ORACLE_STEP);
    let end = fwd.final_state();
    let dev = distance_in(&b, &end, chart, c(u), c(v));
    let line = format!(
        "RK4 h = {ORACLE_STEP:e} with {oracle_switches} switches: endpoint deviation {dev:.2e} (tolerance {ORACLE_TOL:e})"
    );
    if dev <= ORACLE_TOL {
        notes.push(line);
    } else {
        red.push(line);
    }

    if red.is_empty() {
        Ok(notes.join("; "))
    } else {
        Err(format!("{}; passing parts: {}", red.join("; "), notes.join("; ")))
    }
}

// Criterion 8

/// Chart-2 position `x2` and its time derivative at the end of a run to `t`.
fn x2_at(sys: &CompiledSystem, p: &BTreeMap<String, Complex64>, init: PhaseState, t: f64, opts: &IntegrateOptions) -> Result<(Complex64, Complex64), String> {
    let b = sys.bind(p).ctx("bind")?;
    let path = TPath::segment(init.t, c(t)).ctx("path")?;
    let end = integrate(sys, p, &path, init, opts).ctx("integrate")?.final_state();
    let u = b.transform(&end, 2).ok_or("state has no chart-2 image")?;
    let (dx, _) = b.rhs(&u).ctx("rhs")?;
    Ok((u.x, dx))
}

/// Finds the pole nearest to `guess` as a zero of `x2` and runs through it and back.
fn pole_passage(alpha: f64, x: f64, y: f64, guess: f64, t_end: f64) -> Result<String, String> {
    let (sys, p) = e7_system(alpha)?;
    let b = sys.bind(&p).ctx("bind")?;
    let opts = IntegrateOptions::with_tolerances(1e-10, 1e-13);
    let init = state(0, x, y, 0.0);
    let mut t = guess;
    for _ in 0..20 {
        let (x2, dx2) = x2_at(&sys, &p, init, t, &opts)?;
        let dt = (x2 / dx2).re;
        t -= dt;
        if dt.abs() < 1e-13 {
            break;
        }
    }
    let path = TPath::new(vec![c(0.0), c(t), c(t_end)]).ctx("path")?;
    let traj: Trajectory = integrate(&sys, &p, &path, init, &opts).ctx("through the pole")?;
    let at_pole = traj
        .samples
        .iter()
        .find(|s| s.t == c(t))
        .ok_or("no sample at the pole")?;
    let s = PhaseState { chart: at_pole.chart, x: at_pole.x, y: at_pole.y, t: at_pole.t };
    let x0 = b.transform(&s, 0).map_or(f64::INFINITY, |u| u.x.norm());
    ensure(x0 > POLE_MAGNITUDE, || format!("alpha {alpha}: |x0| = {x0:.2e} at t = {t}"))?;
    ensure(traj.last().t == c(t_end), || "run stopped early".into())?;
    ensure(!traj.switches.is_empty(), || "no chart switch".into())?;
    let back = integrate(&sys, &p, &path.reversed(), traj.final_state(), &opts).ctx("backward")?;
    let gap = distance_in(&b, &back.final_state(), 0, c(x), c(y));
    ensure(gap <= POLE_RETURN_TOL, || format!("alpha {alpha}: return gap {gap:.2e}"))?;
    Ok(format!(
        "alpha {alpha:.4}: pole at t = {t:.10}, |x0| = {x0:.1e}, {} switches, return gap {gap:.1e}",
        traj.switches.len()
    ))
}

fn criterion_8() -> Outcome {
    let mut lines = vec![pole_passage(0.0, 1.0, 1.0, 1.26, 4.0)?];
    // Seeded variants: first pole located from the minimum of |x2| along a run.
    let mut rng = ChaCha8Rng::seed_from_u64(0x9011);
    let mut tested = 0;
    for _ in 0..8 {
        let alpha = rng.gen_range(-1.0..1.0);
        let (x, y) = (rng.gen_range(0.5..1.5), rng.gen_range(0.5..1.5));
        let (sys, p) = e7_system(alpha)?;
        let b = sys.bind(&p).ctx("bind")?;
        let path = TPath::segment(c(0.0), c(3.0)).ctx("path")?;
        let Ok(traj) = integrate(&sys, &p, &path, state(0, x, y, 0.0), &IntegrateOptions::default()) else {
            continue;
        };
        let guess = traj
            .samples
            .iter()
            .filter_map(|s| {
                let u = b.transform(&PhaseState { chart: s.chart, x: s.x, y: s.y, t: s.t }, 2)?;
                Some((u.x.norm(), s.t.re))
            })
            .filter(|(m, t)| *m < 0.5 && *t > 0.05 && *t < 2.9)
            .min_by(|a, b| a.0.total_cmp(&b.0));
        let Some((_, guess)) = guess else { continue };
        lines.push(pole_passage(alpha, x, y, guess, 3.5)?);
        tested += 1;
    }
    ensure(tested >= 3, || format!("only {tested} seeded runs met a pole"))?;
    Ok(lines.join("; "))
}

// Criterion 9

fn round_trip(text: &str, vars: &Arc<VarTable>) -> Result<(), String> {
    let f = parse_expr(text, vars).ctx(text)?;
    let printed = f.to_string();
    let g = parse_expr(&printed, vars).ctx(&printed)?;
    ensure(f.equals(&g).ctx("compare")?, || format!("{text} -> {printed} changes value"))?;
    let again = g.to_string();
    ensure(again == printed, || format!("{printed} reprints as {again}"))
}

fn criterion_9() -> Outcome {
    let mut count = 0;
    for name in ["E7", "D8"] {
        let atlas = builtin_atlas(name).ctx(name)?;
        let v = atlas.vars();
        let mut exprs: Vec<RatFunc> = Vec::new();
        for tr in atlas.transitions() {
            exprs.push(tr.x_expr.clone());
            exprs.push(tr.y_expr.clone());
        }
        for ch in atlas.charts() {
            exprs.push(ch.density());
        }
        for f in atlas.coboundary().map(|cb| cb.fields.values().cloned().collect()).unwrap_or_else(Vec::new) {
            exprs.push(f.eta);
            exprs.push(f.zeta);
        }
        for e in exprs {
            round_trip(&e.to_string(), v)?;
            count += 1;
        }
    }
    for tag in SYSTEMS {
        let vars = system_vars(tag).ctx(tag)?;
        for text in system_texts(tag).ok_or_else(|| format!("{tag}: no texts"))? {
            round_trip(text, &vars)?;
            count += 1;
        }
        // The assembled pieces print and reparse as well.
        let sys = builtin_system(tag).ctx(tag)?;
        round_trip(&sys.ode.rhs.to_string(), &vars)?;
        count += 1;
    }

    let vars = system_vars("II").ctx("II")?;
    let bad = [("x +", 3), ("2*(x - t", 8), ("x ^ y", 4), ("x $ 1", 2), ("foo + 1", 0), ("x^-1", 2), ("", 0)];
    for (text, at) in bad {
        match parse_expr(text, &vars) {
            Err(RatFuncError::Parse(e)) => ensure(e.pos == at, || format!("`{text}`: error at {} not {at}: {e}", e.pos))?,
            other => return Err(format!("`{text}` gave {other:?}")),
        }
    }

    let dir = tempfile::tempdir().ctx("tempdir")?;
    let file = dir.path().join("bad.atlas");
    let src = okpair::atlas::builtin_source("E7").ok_or("E7 source")?.replace("x0 = 1/x1 ;", "x0 = 1/(x1 ;");
    std::fs::write(&file, src).ctx("write")?;
    let out = Command::new(env!("CARGO_BIN_EXE_okpair"))
        .args(["verify", "--file"])
        .arg(&file)
        .output()
        .ctx("run okpair")?;
    let stderr = String::from_utf8_lossy(&out.stderr);
    ensure(out.status.code() == Some(2), || format!("exit {:?}: {stderr}", out.status.code()))?;
    ensure(stderr.contains("line") && stderr.contains("byte"), || format!("no position in `{stderr}`"))?;
    Ok(format!(
        "{count} expressions reach a textual fixed point, {} malformed inputs located, CLI exits 2",
        bad.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "E7 identities", criterion_1),
        (2, "E7 Hamiltonian", criterion_2),
        (3, "D8 identities", criterion_3),
        (4, "D8 scalar reduction", criterion_4),
        (5, "lattice", criterion_5),
        (6, "Painleve catalog", criterion_6),
        (7, "integrator", criterion_7),
        (8, "pole passage", criterion_8),
        (9, "parser", criterion_9),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, run) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {n} ({name}): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}): {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
