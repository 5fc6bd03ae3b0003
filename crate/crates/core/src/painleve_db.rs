//! The classical Painlevé equations, their polynomial Hamiltonians, the
//! constant correspondences, and elimination of the momentum.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;
use thiserror::Error;

use crate::atlas::{Atlas, AtlasError};
use crate::ratfunc::{parse_expr, RatFunc, RatFuncError, VarTable};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PainleveError {
    #[error("unknown Painlevé system `{0}`")]
    UnknownSystem(String),
    #[error("Hamiltonian is not quadratic in the momentum (residual {0})")]
    NotQuadratic(String),
    #[error("coefficient of y^2 vanishes")]
    DegenerateA,
    #[error("dy/dt is not affine in x with nonzero slope")]
    NotAffine,
    #[error("variable tables are incompatible: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Math(#[from] RatFuncError),
    #[error(transparent)]
    Atlas(#[from] AtlasError),
}

/// Tags accepted by [`builtin_system`].
pub const SYSTEMS: [&str; 8] = ["I", "II", "III", "IV", "V", "VI", "III_D7", "III_D8"];

/// `x'' = rhs(x, p, t)` where `p` stands for `x'`.
#[derive(Debug, Clone)]
pub struct ScalarODE {
    pub vars: Arc<VarTable>,
    pub x: usize,
    pub p: usize,
    pub t: usize,
    pub rhs: RatFunc,
}

/// `H = A y² + B y + C` with `A`, `B`, `C` free of `y`.
#[derive(Debug, Clone)]
pub struct QuadraticHamiltonian {
    pub vars: Arc<VarTable>,
    pub x: usize,
    pub y: usize,
    pub t: usize,
    pub a: RatFunc,
    pub b: RatFunc,
    pub c: RatFunc,
}

/// Classical constant name and its expression in the Hamiltonian constants;
/// `None` marks an entry the table lists as absent.
#[derive(Debug, Clone, Default)]
pub struct ParamMap {
    pub entries: Vec<(String, Option<RatFunc>)>,
}

#[derive(Debug, Clone)]
pub struct PainleveSystem {
    pub tag: String,
    pub hamiltonian: Option<QuadraticHamiltonian>,
    pub ode: ScalarODE,
    pub params: Option<ParamMap>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub matched: bool,
    /// `a.rhs − b.rhs` after the map, when nonzero.
    pub residual: Option<String>,
}

impl Comparison {
    pub fn verdict(&self) -> String {
        match &self.residual {
            None => "match".to_string(),
            Some(r) => format!("residual {r}"),
        }
    }
}

struct Source {
    params: &'static [&'static str],
    hamiltonian: Option<&'static str>,
    ode: &'static str,
    map: Option<&'static [(&'static str, Option<&'static str>)]>,
}

fn source(tag: &str) -> Option<Source> {
    let s = match tag {
        "I" => Source {
            params: &[],
            hamiltonian: Some("y^2/2 - 2*x^3 - t*x"),
            ode: "6*x^2 + t",
            map: Some(&[("alpha", None), ("beta", None), ("gamma", None), ("delta", None)]),
        },
        "II" => Source {
            params: &["alpha"],
            hamiltonian: Some("y^2/2 - (x^2 + t/2)*y - (alpha + 1/2)*x"),
            ode: "2*x^3 + t*x + alpha",
            map: Some(&[("alpha", Some("alpha")), ("beta", None), ("gamma", None), ("delta", None)]),
        },
        "III" => Source {
            params: &["alpha", "beta", "gamma", "delta", "kappa0", "kappainf", "eta0", "etainf"],
            hamiltonian: Some(
                "(1/t)*(2*x^2*y^2 - (2*etainf*t*x^2 + (2*kappa0 + 1)*x - 2*eta0*t)*y \
                 + etainf*(kappa0 + kappainf)*t*x)",
            ),
            ode: "p^2/x - p/t + (alpha*x^2 + beta)/t + gamma*x^3 + delta/x",
            map: Some(&[
                ("alpha", Some("-4*etainf*kappainf")),
                ("beta", Some("4*etainf*(kappa0 + 1)")),
                ("gamma", Some("4*etainf^2")),
                ("delta", Some("-4*eta0^2")),
            ]),
        },
        "IV" => Source {
            params: &["alpha", "beta", "kappa0", "kappainf"],
            hamiltonian: Some("2*x*y^2 - (x^2 + 2*t*x + 2*kappa0)*y + kappa0*x"),
            ode: "p^2/(2*x) + (3/2)*x^3 + 4*t*x^2 + 2*(t^2 - alpha)*x + beta/x",
            map: Some(&[
                ("alpha", Some("-kappa0 + 2*kappainf + 1")),
                ("beta", Some("-2*kappa0^2")),
                ("gamma", None),
                ("delta", None),
            ]),
        },
        "V" => Source {
            params: &["alpha", "beta", "gamma", "delta", "kappa0", "kappat", "kappainf", "eta"],
            hamiltonian: Some(
                "(1/t)*(x*(x - 1)^2*y^2 - (kappa0*(x - 1)^2 + kappat*x*(x - 1) - eta*t*x)*y \
                 + (1/4)*((kappa0 + kappat)^2 - kappainf^2)*(x - 1))",
            ),
            ode: "(1/(2*x) + 1/(x - 1))*p^2 - p/t + (x - 1)^2/t^2*(alpha*x + beta/x) \
                  + gamma*x/t + delta*x*(x + 1)/(x - 1)",
            map: Some(&[
                ("alpha", Some("(1/2)*kappainf^2")),
                ("beta", Some("-(1/2)*kappa0^2")),
                ("gamma", Some("-eta*(1 + kappat)")),
                ("delta", Some("-(1/2)*eta^2/2")),
            ]),
        },
        "VI" => Source {
            params: &["alpha", "beta", "gamma", "delta", "kappa0", "kappa1", "kappat", "kappainf"],
            hamiltonian: Some(
                "1/(t*(t - 1))*(x*(x - 1)*(x - t)*y^2 \
                 - (kappa0*(x - 1)*(x - t) + kappa1*x*(x - t) + (kappat - 1)*x*(x - 1))*y \
                 + (1/4)*((kappa0 + kappa1 + kappat - 1)^2 - kappainf^2)*(x - t))",
            ),
            ode: "(1/2)*(1/x + 1/(x - 1) + 1/(x - t))*p^2 - (1/t + 1/(t - 1) + 1/(x - t))*p \
                  + x*(x - 1)*(x - t)/(t^2*(t - 1)^2)\
                  *(alpha - beta*t/x^2 + gamma*(t - 1)/(x - 1)^2 + (1/2 - delta)*t*(t - 1)/(x - t)^2)",
            map: Some(&[
                ("alpha", Some("(1/2)*kappainf^2")),
                ("beta", Some("(1/2)*kappa0^2")),
                ("gamma", Some("(1/2)*kappa1^2")),
                ("delta", Some("(1/2)*kappat^2")),
            ]),
        },
        "III_D7" => Source {
            params: &["a"],
            hamiltonian: None,
            ode: "p^2/x - p/t - 4*x^2/t^2 - (1 + 2*a)/t",
            map: None,
        },
        "III_D8" => Source {
            params: &[],
            hamiltonian: None,
            ode: "p^2/x - p/t - x^2/(4*t^2) - 4/t",
            map: None,
        },
        _ => return None,
    };
    Some(s)
}

/// Variable table of a catalog system: `x, y, p, t` then its constants.
pub fn system_vars(tag: &str) -> Result<Arc<VarTable>, PainleveError> {
    let s = source(tag).ok_or_else(|| PainleveError::UnknownSystem(tag.to_string()))?;
    let mut names = vec!["x", "y", "p", "t"];
    names.extend_from_slice(s.params);
    Ok(VarTable::new(names)?)
}

pub fn builtin_system(tag: &str) -> Result<PainleveSystem, PainleveError> {
    let s = source(tag).ok_or_else(|| PainleveError::UnknownSystem(tag.to_string()))?;
    let vars = system_vars(tag)?;
    let (x, y, p, t) = (0, 1, 2, 3);
    let hamiltonian = match s.hamiltonian {
        Some(h) => Some(QuadraticHamiltonian::from_function(&parse_expr(h, &vars)?, x, y, t)?),
        None => None,
    };
    let ode = ScalarODE {
        vars: vars.clone(),
        x,
        p,
        t,
        rhs: parse_expr(s.ode, &vars)?,
    };
    let params = match s.map {
        Some(entries) => {
            let mut out = Vec::new();
            for (name, e) in entries {
                let expr = match e {
                    Some(text) => Some(parse_expr(text, &vars)?),
                    None => None,
                };
                out.push((name.to_string(), expr));
            }
            Some(ParamMap { entries: out })
        }
        None => None,
    };
    Ok(PainleveSystem {
        tag: tag.to_string(),
        hamiltonian,
        ode,
        params,
    })
}

/// Raw expression texts of a catalog system, for printing and round trips.
pub fn system_texts(tag: &str) -> Option<Vec<&'static str>> {
    let s = source(tag)?;
    let mut v: Vec<&'static str> = s.hamiltonian.into_iter().collect();
    v.push(s.ode);
    if let Some(m) = s.map {
        v.extend(m.iter().filter_map(|(_, e)| *e));
    }
    Some(v)
}

impl QuadraticHamiltonian {
    /// Splits `h` into `A y² + B y + C`, rejecting anything else.
    pub fn from_function(h: &RatFunc, x: usize, y: usize, t: usize) -> Result<Self, PainleveError> {
        let vars = h.vars().clone();
        let zero = RatFunc::zero(&vars);
        let at0 = |f: &RatFunc| f.subst(&[(y, zero.clone())]);
        let half = RatFunc::ratio(&vars, 1, 2);
        let a = h.diff(y)?.diff(y)?.mul(&half)?;
        let b = at0(&h.diff(y)?)?;
        let c = at0(h)?;
        let yv = RatFunc::var(&vars, y);
        let rebuilt = a.mul(&yv.pow(2)?)?.add(&b.mul(&yv)?)?.add(&c)?;
        let residual = h.sub(&rebuilt)?;
        if !residual.is_zero() || a.contains_var(y) {
            return Err(PainleveError::NotQuadratic(residual.to_string()));
        }
        Ok(QuadraticHamiltonian { vars, x, y, t, a, b, c })
    }

    pub fn h(&self) -> Result<RatFunc, RatFuncError> {
        let yv = RatFunc::var(&self.vars, self.y);
        self.a.mul(&yv.pow(2)?)?.add(&self.b.mul(&yv)?)?.add(&self.c)
    }
}

/// `x'' = ∂t(2Ay+B) + ∂x(2Ay+B)·p + 2A·(−∂H/∂x)` with `y = (p − B)/(2A)`.
///
/// `p` is the variable at index `p` of the Hamiltonian's table.
pub fn eliminate_y(h: &QuadraticHamiltonian, p: usize) -> Result<ScalarODE, PainleveError> {
    if h.a.is_zero() {
        return Err(PainleveError::DegenerateA);
    }
    let vars = &h.vars;
    let two_a = h.a.scale(&BigRational::from_integer(BigInt::from(2)));
    let yv = RatFunc::var(vars, h.y);
    let xdot = two_a.mul(&yv)?.add(&h.b)?;
    let ham = h.h()?;
    let ydot = ham.diff(h.x)?.neg();
    let pv = RatFunc::var(vars, p);
    let xddot = xdot
        .diff(h.t)?
        .add(&xdot.diff(h.x)?.mul(&pv)?)?
        .add(&two_a.mul(&ydot)?)?;
    let y_of_p = pv.sub(&h.b)?.div(&two_a)?;
    let rhs = xddot.subst(&[(h.y, y_of_p)])?;
    Ok(ScalarODE {
        vars: vars.clone(),
        x: h.x,
        p,
        t: h.t,
        rhs,
    })
}

/// First-order system `x' = dx`, `y' = dy`.
#[derive(Debug, Clone)]
pub struct FirstOrderSystem {
    pub vars: Arc<VarTable>,
    pub x: usize,
    pub y: usize,
    pub t: usize,
    pub dx: RatFunc,
    pub dy: RatFunc,
}

/// Eliminates `x` when `y'` is affine in `x`: with `q = y'`,
/// `y'' = ∂t(dy) + ∂y(dy)·q + ∂x(dy)·dx` and `x = (q − dy|_{x=0}) / ∂x(dy)`.
/// The result is a scalar equation for `y` whose derivative variable is `q`.
pub fn eliminate_x_affine(sys: &FirstOrderSystem, q: usize) -> Result<ScalarODE, PainleveError> {
    let vars = &sys.vars;
    let slope = sys.dy.diff(sys.x)?;
    if slope.is_zero() || slope.contains_var(sys.x) {
        return Err(PainleveError::NotAffine);
    }
    let zero = RatFunc::zero(vars);
    let offset = sys.dy.subst(&[(sys.x, zero)])?;
    let qv = RatFunc::var(vars, q);
    let yddot = sys
        .dy
        .diff(sys.t)?
        .add(&sys.dy.diff(sys.y)?.mul(&qv)?)?
        .add(&slope.mul(&sys.dx)?)?;
    let x_of_q = qv.sub(&offset)?.div(&slope)?;
    let rhs = yddot.subst(&[(sys.x, x_of_q)])?;
    Ok(ScalarODE {
        vars: vars.clone(),
        x: sys.y,
        p: q,
        t: sys.t,
        rhs,
    })
}

impl ScalarODE {
    /// Renames the dependent variable, its derivative and time into `target`
    /// (other variables keep their names).
    pub fn relabel(&self, target: &Arc<VarTable>, x: &str, p: &str, t: &str) -> Result<ScalarODE, PainleveError> {
        let mut map = Vec::with_capacity(self.vars.len());
        for (i, name) in self.vars.names().iter().enumerate() {
            let new = if i == self.x {
                x
            } else if i == self.p {
                p
            } else if i == self.t {
                t
            } else {
                name.as_str()
            };
            if i != self.x && i != self.p && i != self.t && self.rhs.contains_var(i) && target.index_of(new).is_none() {
                return Err(PainleveError::Incompatible(format!("`{new}` missing from target")));
            }
            // Unused variables may be dropped; park them on the new time slot.
            map.push(target.index_of(new).unwrap_or(target.require(t)?));
        }
        Ok(ScalarODE {
            vars: target.clone(),
            x: target.require(x)?,
            p: target.require(p)?,
            t: target.require(t)?,
            rhs: self.rhs.relabel(target, &map),
        })
    }

    /// Equation satisfied by `X(t) = c·x(k t)`, in the same variables.
    pub fn rescale(&self, c: &BigRational, k: &BigRational) -> Result<ScalarODE, PainleveError> {
        let vars = &self.vars;
        let cf = RatFunc::constant(vars, c.clone());
        let kf = RatFunc::constant(vars, k.clone());
        let xv = RatFunc::var(vars, self.x);
        let pv = RatFunc::var(vars, self.p);
        let tv = RatFunc::var(vars, self.t);
        // X'' = c k² rhs(X/c, X'/(c k), k t)
        let inner = self.rhs.subst(&[
            (self.x, xv.div(&cf)?),
            (self.p, pv.div(&cf.mul(&kf)?)?),
            (self.t, tv.mul(&kf)?),
        ])?;
        let rhs = inner.mul(&cf)?.mul(&kf.pow(2)?)?;
        Ok(ScalarODE {
            vars: vars.clone(),
            x: self.x,
            p: self.p,
            t: self.t,
            rhs,
        })
    }
}

/// Semantic comparison of two scalar equations over the same table after
/// substituting `map` into `b`.
pub fn compare(a: &ScalarODE, b: &ScalarODE, map: Option<&ParamMap>) -> Result<Comparison, PainleveError> {
    if a.vars.names() != b.vars.names() || (a.x, a.p, a.t) != (b.x, b.p, b.t) {
        return Err(PainleveError::Incompatible(format!("{} vs {}", a.vars, b.vars)));
    }
    let mut rhs_b = b.rhs.clone();
    if let Some(m) = map {
        let mut assignment = Vec::new();
        for (name, e) in &m.entries {
            if let (Some(e), Some(i)) = (e, b.vars.index_of(name)) {
                assignment.push((i, e.clone()));
            }
        }
        rhs_b = rhs_b.subst(&assignment)?;
    }
    let d = a.rhs.sub(&rhs_b.rebase(&a.vars)?)?;
    Ok(Comparison {
        matched: d.is_zero(),
        residual: (!d.is_zero()).then(|| d.to_string()),
    })
}

/// Elimination of the catalog Hamiltonian compared with the catalog equation under its map.
pub fn check_system(tag: &str) -> Result<Option<Comparison>, PainleveError> {
    let sys = builtin_system(tag)?;
    let Some(h) = &sys.hamiltonian else {
        return Ok(None);
    };
    let p = sys.ode.p;
    let elim = eliminate_y(h, p)?;
    Ok(Some(compare(&elim, &sys.ode, sys.params.as_ref())?))
}

/// Variables of the chart-0 system of the `D8` atlas, as used by [`d8_chart0_system`].
pub fn d8_vars() -> Arc<VarTable> {
    VarTable::new(["x0", "y0", "q", "t"]).expect("static names")
}

/// The chart-0 system `x0' = dx`, `y0' = dy` given as expression texts over [`d8_vars`].
pub fn d8_chart0_system(dx: &str, dy: &str) -> Result<FirstOrderSystem, PainleveError> {
    let vars = d8_vars();
    Ok(FirstOrderSystem {
        dx: parse_expr(dx, &vars)?,
        dy: parse_expr(dy, &vars)?,
        vars,
        x: 0,
        y: 1,
        t: 3,
    })
}

/// Scalar equation for `y0` printed alongside the chart-0 system.
pub const D8_SCALAR: &str = "q^2/y0 - q/t + 2*y0^2/t^2 - 2/t";

/// Moves `f` onto `target` by variable name; names absent from `target` must be unused.
fn transplant(f: &RatFunc, target: &Arc<VarTable>) -> Result<RatFunc, PainleveError> {
    let mut map = Vec::with_capacity(f.vars().len());
    for (i, name) in f.vars().names().iter().enumerate() {
        match target.index_of(name) {
            Some(j) => map.push(j),
            None if !f.contains_var(i) => map.push(0),
            None => return Err(PainleveError::Incompatible(format!("`{name}` missing from {target}"))),
        }
    }
    Ok(f.relabel(target, &map))
}

/// Scalar reduction of chart `U0` of a `D8`-type atlas and its comparisons.
#[derive(Debug, Clone)]
pub struct ChartReduction {
    pub system: FirstOrderSystem,
    pub scalar: ScalarODE,
    /// Against [`D8_SCALAR`].
    pub versus_printed: Comparison,
    /// Against the catalog `III_D8` equation after renaming `y0` to `x`.
    pub relabeled: Comparison,
    /// Against the catalog equation after `x(t) = −8·y0(−t/4)`.
    pub rescaled: Comparison,
}

/// Eliminates `x0` from the `U0` system `(x0', y0') = (−η, −ζ)` of `atlas`.
pub fn d8_chart0_reduction(atlas: &Atlas) -> Result<ChartReduction, PainleveError> {
    let vf = atlas
        .field("U0")
        .ok_or_else(|| AtlasError::UnknownChart("U0".to_string()))?;
    let vars = d8_vars();
    let system = FirstOrderSystem {
        dx: transplant(&vf.eta.neg(), &vars)?,
        dy: transplant(&vf.zeta.neg(), &vars)?,
        vars: vars.clone(),
        x: 0,
        y: 1,
        t: 3,
    };
    let scalar = eliminate_x_affine(&system, 2)?;
    let printed = ScalarODE {
        rhs: parse_expr(D8_SCALAR, &vars)?,
        ..scalar.clone()
    };
    let versus_printed = compare(&scalar, &printed, None)?;
    let catalog = builtin_system("III_D8")?.ode;
    let relabeled = compare(&scalar.relabel(&catalog.vars, "x", "p", "t")?, &catalog, None)?;
    let scaled = scalar.rescale(&BigRational::from_integer((-8).into()), &BigRational::new((-1).into(), 4.into()))?;
    let rescaled = compare(&scaled.relabel(&catalog.vars, "x", "p", "t")?, &catalog, None)?;
    Ok(ChartReduction {
        system,
        scalar,
        versus_printed,
        relabeled,
        rescaled,
    })
}
