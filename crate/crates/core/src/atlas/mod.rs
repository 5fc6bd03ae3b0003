//! Chart atlases of a family over the time variable and the parameters:
//! rational transitions, symplectic densities and their consistency checks.

mod dsl;

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::kodaira_spencer::{ChartVectorField, Coboundary};
use crate::ratfunc::{Poly, RatFunc, RatFuncError, VarTable};
use crate::report::Report;

pub use dsl::parse_atlas;

const E7_SOURCE: &str = include_str!("../../data/e7.atlas");
const D8_SOURCE: &str = include_str!("../../data/d8.atlas");

/// Names accepted by [`builtin_atlas`].
pub const BUILTIN_ATLASES: [&str; 2] = ["E7", "D8"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AtlasError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Expr { line: usize, source: RatFuncError },
    #[error("unknown atlas `{0}`")]
    UnknownAtlas(String),
    #[error("unknown chart `{0}`")]
    UnknownChart(String),
    #[error("no transition {0} -> {1}")]
    MissingTransition(String, String),
    #[error("invalid atlas: {0}")]
    Invalid(String),
    #[error(transparent)]
    Math(#[from] RatFuncError),
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub id: String,
    /// Variable indices of the chart coordinates in the atlas table.
    pub x: usize,
    pub y: usize,
    /// Localization polynomial `f_i`.
    pub denom: Poly,
    /// Pole order `m_i` of the two-form along `f_i = 0`.
    pub pole_order: u32,
}

impl Chart {
    /// Coefficient `g = 1/f^m` of the symplectic form `g dx∧dy`.
    pub fn density(&self) -> RatFunc {
        let one = RatFunc::one(self.denom.vars());
        if self.pole_order == 0 {
            return one;
        }
        let f: RatFunc = self.denom.clone().into();
        f.pow(self.pole_order)
            .and_then(|p| one.div(&p))
            .expect("chart denominators are validated nonzero")
    }
}

/// Target coordinates as functions of source coordinates.
#[derive(Debug, Clone)]
pub struct Transition {
    pub source: usize,
    pub target: usize,
    pub x_expr: RatFunc,
    pub y_expr: RatFunc,
}

/// Partial derivatives of a transition with respect to the source coordinates.
#[derive(Debug, Clone)]
pub struct Jacobian {
    /// `m[r][c]`: row `r` is the target coordinate, column `c` the source one.
    pub m: [[RatFunc; 2]; 2],
    pub det: RatFunc,
}

#[derive(Debug, Clone)]
pub struct Atlas {
    pub name: String,
    vars: Arc<VarTable>,
    time: usize,
    params: Vec<usize>,
    charts: Vec<Chart>,
    transitions: BTreeMap<(usize, usize), Transition>,
    coboundary: Option<Coboundary>,
}

pub fn builtin_atlas(name: &str) -> Result<Atlas, AtlasError> {
    match name {
        "E7" => parse_atlas(E7_SOURCE),
        "D8" => parse_atlas(D8_SOURCE),
        _ => Err(AtlasError::UnknownAtlas(name.to_string())),
    }
}

/// DSL text of a built-in atlas.
pub fn builtin_source(name: &str) -> Option<&'static str> {
    match name {
        "E7" => Some(E7_SOURCE),
        "D8" => Some(D8_SOURCE),
        _ => None,
    }
}

impl Atlas {
    /// Assembles and validates an atlas. Transitions are keyed by
    /// `(source, target)` chart indices.
    pub fn new(
        name: impl Into<String>,
        vars: Arc<VarTable>,
        time: usize,
        params: Vec<usize>,
        charts: Vec<Chart>,
        transitions: Vec<Transition>,
        coboundary: Option<Coboundary>,
    ) -> Result<Atlas, AtlasError> {
        let map = transitions
            .into_iter()
            .map(|tr| ((tr.source, tr.target), tr))
            .collect();
        let atlas = Atlas {
            name: name.into(),
            vars,
            time,
            params,
            charts,
            transitions: map,
            coboundary,
        };
        atlas.validate()?;
        Ok(atlas)
    }

    fn validate(&self) -> Result<(), AtlasError> {
        let invalid = |m: String| Err(AtlasError::Invalid(m));
        if self.charts.is_empty() {
            return invalid("atlas has no charts".into());
        }
        let mut seen = vec![false; self.vars.len()];
        for &p in self.params.iter().chain([&self.time]) {
            seen[p] = true;
        }
        for c in &self.charts {
            if c.x == c.y {
                return invalid(format!("chart {} repeats its coordinate", c.id));
            }
            for v in [c.x, c.y] {
                if seen[v] {
                    return invalid(format!(
                        "variable {} of chart {} is already in use",
                        self.vars.name(v),
                        c.id
                    ));
                }
                seen[v] = true;
            }
            if c.denom.is_zero() {
                return invalid(format!("chart {} has a zero denominator", c.id));
            }
            self.check_support(&c.denom.clone().into(), c, &format!("denominator of {}", c.id))?;
        }
        for (&(s, t), tr) in &self.transitions {
            if s == t || s >= self.charts.len() || t >= self.charts.len() {
                return invalid(format!("bad transition {s} -> {t}"));
            }
            if !self.transitions.contains_key(&(t, s)) {
                return invalid(format!(
                    "transition {} -> {} has no reverse",
                    self.charts[s].id, self.charts[t].id
                ));
            }
            let label = format!("transition {} -> {}", self.charts[s].id, self.charts[t].id);
            self.check_support(&tr.x_expr, &self.charts[s], &label)?;
            self.check_support(&tr.y_expr, &self.charts[s], &label)?;
            if jacobian(self, tr)?.det.is_zero() {
                return invalid(format!("{label} has vanishing Jacobian determinant"));
            }
        }
        // Connectivity of the transition graph.
        let mut reached = vec![false; self.charts.len()];
        let mut stack = vec![0usize];
        reached[0] = true;
        while let Some(c) = stack.pop() {
            for &(s, t) in self.transitions.keys() {
                if s == c && !reached[t] {
                    reached[t] = true;
                    stack.push(t);
                }
            }
        }
        if let Some(i) = reached.iter().position(|r| !r) {
            return invalid(format!("chart {} is not connected", self.charts[i].id));
        }
        if let Some(cb) = &self.coboundary {
            for (id, vf) in &cb.fields {
                let c = self.chart(id)?;
                self.check_support(&vf.eta, c, &format!("coboundary {id}"))?;
                self.check_support(&vf.zeta, c, &format!("coboundary {id}"))?;
            }
        }
        Ok(())
    }

    /// Rejects expressions that use variables outside `chart` plus time and parameters.
    fn check_support(&self, f: &RatFunc, chart: &Chart, what: &str) -> Result<(), AtlasError> {
        for v in 0..self.vars.len() {
            let allowed = v == chart.x || v == chart.y || v == self.time || self.params.contains(&v);
            if !allowed && f.contains_var(v) {
                return Err(AtlasError::Invalid(format!(
                    "{what} uses `{}`, which is not a variable of chart {}",
                    self.vars.name(v),
                    chart.id
                )));
            }
        }
        Ok(())
    }

    pub fn vars(&self) -> &Arc<VarTable> {
        &self.vars
    }

    pub fn time_var(&self) -> usize {
        self.time
    }

    pub fn params(&self) -> &[usize] {
        &self.params
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    pub fn chart_index(&self, id: &str) -> Result<usize, AtlasError> {
        self.charts
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| AtlasError::UnknownChart(id.to_string()))
    }

    pub fn chart(&self, id: &str) -> Result<&Chart, AtlasError> {
        Ok(&self.charts[self.chart_index(id)?])
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> {
        self.transitions.values()
    }

    pub fn transition(&self, source: &str, target: &str) -> Result<&Transition, AtlasError> {
        let s = self.chart_index(source)?;
        let t = self.chart_index(target)?;
        self.transition_by_index(s, t)
    }

    pub fn transition_by_index(&self, s: usize, t: usize) -> Result<&Transition, AtlasError> {
        self.transitions.get(&(s, t)).ok_or_else(|| {
            AtlasError::MissingTransition(self.charts[s].id.clone(), self.charts[t].id.clone())
        })
    }

    pub fn coboundary(&self) -> Option<&Coboundary> {
        self.coboundary.as_ref()
    }

    pub fn density(&self, id: &str) -> Result<RatFunc, AtlasError> {
        Ok(self.chart(id)?.density())
    }

    /// Replaces a transition without revalidating; used to build faulty atlases.
    pub fn set_transition(&mut self, tr: Transition) {
        self.transitions.insert((tr.source, tr.target), tr);
    }

    pub fn set_coboundary(&mut self, cb: Option<Coboundary>) {
        self.coboundary = cb;
    }

    /// Rewrites an expression over the target chart of `tr` in source coordinates.
    pub fn pull(&self, tr: &Transition, f: &RatFunc) -> Result<RatFunc, RatFuncError> {
        let target = &self.charts[tr.target];
        f.subst(&[(target.x, tr.x_expr.clone()), (target.y, tr.y_expr.clone())])
    }

    /// Variable indices `(x, y)` of a chart.
    pub fn coords(&self, chart: usize) -> (usize, usize) {
        (self.charts[chart].x, self.charts[chart].y)
    }

    /// Serializes back to the atlas DSL.
    pub fn to_dsl(&self) -> String {
        dsl::write_atlas(self)
    }

    pub fn field(&self, id: &str) -> Option<&ChartVectorField> {
        self.coboundary.as_ref()?.fields.get(id)
    }
}

pub fn jacobian(atlas: &Atlas, tr: &Transition) -> Result<Jacobian, AtlasError> {
    let (sx, sy) = atlas.coords(tr.source);
    let m = [
        [tr.x_expr.diff(sx)?, tr.x_expr.diff(sy)?],
        [tr.y_expr.diff(sx)?, tr.y_expr.diff(sy)?],
    ];
    let det = m[0][0].mul(&m[1][1])?.sub(&m[0][1].mul(&m[1][0])?)?;
    Ok(Jacobian { m, det })
}

/// Coefficient of the pullback of `target_density · dx∧dy` through `tr`, in source coordinates.
pub fn pullback_density(
    atlas: &Atlas,
    tr: &Transition,
    target_density: &RatFunc,
) -> Result<RatFunc, AtlasError> {
    let j = jacobian(atlas, tr)?;
    Ok(atlas.pull(tr, target_density)?.mul(&j.det)?)
}

/// Asserts that the pullback of the target density equals the source density.
pub fn check_density_compat(atlas: &Atlas, source: &str, target: &str) -> Result<Report, AtlasError> {
    let tr = atlas.transition(source, target)?;
    let pulled = pullback_density(atlas, tr, &atlas.charts[tr.target].density())?;
    let mut r = Report::new(format!("density {source} -> {target}"));
    r.push_zero(
        format!("pullback of density of {target} equals density of {source}"),
        &pulled.sub(&atlas.charts[tr.source].density())?,
    );
    Ok(r)
}

/// Composes `i -> j -> i` and `j -> i -> j` and compares with the identity.
pub fn check_inverse_pair(atlas: &Atlas, i: &str, j: &str) -> Result<Report, AtlasError> {
    let ii = atlas.chart_index(i)?;
    let jj = atlas.chart_index(j)?;
    let mut r = Report::new(format!("inverse pair {i} <-> {j}"));
    for (a, b) in [(ii, jj), (jj, ii)] {
        let there = atlas.transition_by_index(a, b)?;
        let back = atlas.transition_by_index(b, a)?;
        let (ax, ay) = atlas.coords(a);
        let names = (&atlas.charts[a].id, &atlas.charts[b].id);
        for (expr, v) in [(&back.x_expr, ax), (&back.y_expr, ay)] {
            let composed = atlas.pull(there, expr)?;
            let residual = composed.sub(&RatFunc::var(atlas.vars(), v))?;
            r.push_zero(
                format!("{} -> {} -> {} on {}", names.0, names.1, names.0, atlas.vars.name(v)),
                &residual,
            );
        }
    }
    Ok(r)
}

/// Asserts that going `k -> j -> i` equals the direct transition `k -> i`.
pub fn check_triple_compat(atlas: &Atlas, i: &str, j: &str, k: &str) -> Result<Report, AtlasError> {
    let (ii, jj, kk) = (atlas.chart_index(i)?, atlas.chart_index(j)?, atlas.chart_index(k)?);
    let ji = atlas.transition_by_index(jj, ii)?;
    let kj = atlas.transition_by_index(kk, jj)?;
    let ki = atlas.transition_by_index(kk, ii)?;
    let mut r = Report::new(format!("triple {i} <- {j} <- {k}"));
    let (ix, iy) = atlas.coords(ii);
    for (via, direct, v) in [(&ji.x_expr, &ki.x_expr, ix), (&ji.y_expr, &ki.y_expr, iy)] {
        let composed = atlas.pull(kj, via)?;
        r.push_zero(
            format!("{k} -> {j} -> {i} equals {k} -> {i} on {}", atlas.vars.name(v)),
            &composed.sub(direct)?,
        );
    }
    Ok(r)
}

/// Every inverse pair, every ordered triple of distinct charts with all
/// transitions present, and every density compatibility.
pub fn check_atlas(atlas: &Atlas) -> Result<Report, AtlasError> {
    let mut r = Report::new(format!("atlas {}", atlas.name));
    let ids: Vec<&str> = atlas.charts.iter().map(|c| c.id.as_str()).collect();
    for &(s, t) in atlas.transitions.keys() {
        if s < t {
            r.extend(check_inverse_pair(atlas, ids[s], ids[t])?);
        }
    }
    let n = ids.len();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let distinct = i != j && j != k && i != k;
                let present = [(j, i), (k, j), (k, i)]
                    .iter()
                    .all(|p| atlas.transitions.contains_key(p));
                if distinct && present {
                    r.extend(check_triple_compat(atlas, ids[i], ids[j], ids[k])?);
                }
            }
        }
    }
    for &(s, t) in atlas.transitions.keys() {
        r.extend(check_density_compat(atlas, ids[s], ids[t])?);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratfunc::parse_expr;

    fn expr(atlas: &Atlas, s: &str) -> RatFunc {
        parse_expr(s, atlas.vars()).unwrap()
    }

    #[test]
    fn builtins_load() {
        let e7 = builtin_atlas("E7").unwrap();
        assert_eq!(e7.charts().len(), 3);
        let tr = e7.transition("U1", "U0").unwrap();
        assert!(tr.x_expr.equals(&expr(&e7, "1/x1")).unwrap());
        let d8 = builtin_atlas("D8").unwrap();
        let f2: RatFunc = d8.chart("U2").unwrap().denom.clone().into();
        assert!(f2.equals(&expr(&d8, "t - t*y2 + x2*y2^2")).unwrap());
        assert!(matches!(builtin_atlas("E9"), Err(AtlasError::UnknownAtlas(_))));
    }

    #[test]
    fn jacobian_determinants() {
        let e7 = builtin_atlas("E7").unwrap();
        for tr in e7.transitions() {
            let det = jacobian(&e7, tr).unwrap().det;
            assert!(det.equals(&RatFunc::one(e7.vars())).unwrap());
        }
        let d8 = builtin_atlas("D8").unwrap();
        let det = jacobian(&d8, d8.transition("U2", "U0").unwrap()).unwrap().det;
        assert!(det.equals(&expr(&d8, "y2^2")).unwrap());
    }

    #[test]
    fn d8_density_pullback_is_reciprocal_f2() {
        let d8 = builtin_atlas("D8").unwrap();
        let tr = d8.transition("U2", "U0").unwrap();
        let pulled = pullback_density(&d8, tr, &expr(&d8, "1/y0")).unwrap();
        assert!(pulled.equals(&expr(&d8, "1/(t - t*y2 + x2*y2^2)")).unwrap());
    }

    #[test]
    fn builtins_pass_all_checks() {
        for name in BUILTIN_ATLASES {
            let a = builtin_atlas(name).unwrap();
            let r = check_atlas(&a).unwrap();
            assert!(r.passed(), "{r}");
            assert_eq!(r.len(), 3 * 4 + 6 * 2 + 6);
        }
    }

    #[test]
    fn perturbed_transition_fails_inverse_pair() {
        let mut e7 = builtin_atlas("E7").unwrap();
        let mut tr = e7.transition("U0", "U1").unwrap().clone();
        tr.y_expr = tr.y_expr.add(&RatFunc::one(e7.vars())).unwrap();
        e7.set_transition(tr);
        let r = check_inverse_pair(&e7, "U0", "U1").unwrap();
        assert!(!r.passed());
        assert!(r.failures().all(|c| c.detail.is_some()));
    }

    #[test]
    fn inconsistent_third_transition_fails_triple() {
        let mut e7 = builtin_atlas("E7").unwrap();
        let mut tr = e7.transition("U2", "U0").unwrap().clone();
        tr.y_expr = tr.y_expr.add(&expr(&e7, "x2")).unwrap();
        e7.set_transition(tr);
        assert!(!check_triple_compat(&e7, "U0", "U1", "U2").unwrap().passed());
    }

    #[test]
    fn identity_transition_pulls_back_unchanged() {
        let src = "atlas id\nparams\ntimevar t\n\
                   chart A vars a b denom 1 + a order 1\n\
                   chart B vars c d denom 1 + c order 1\n\
                   transition A -> B { c = a ; d = b }\n\
                   transition B -> A { a = c ; b = d }\n";
        let atlas = parse_atlas(src).unwrap();
        let tr = atlas.transition("A", "B").unwrap();
        let j = jacobian(&atlas, tr).unwrap();
        assert!(j.det.equals(&RatFunc::one(atlas.vars())).unwrap());
        let g = expr(&atlas, "1/(1 + c)");
        let pulled = pullback_density(&atlas, tr, &g).unwrap();
        assert!(pulled.equals(&expr(&atlas, "1/(1 + a)")).unwrap());
        assert!(check_atlas(&atlas).unwrap().passed());
    }
}
