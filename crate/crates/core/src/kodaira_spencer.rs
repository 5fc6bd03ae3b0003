//! Kodaira–Spencer cocycle in the time direction, its splittings and the
//! induced per-chart ODE.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::atlas::{jacobian, Atlas, AtlasError};
use crate::ratfunc::RatFunc;
use crate::report::Report;

/// `eta ∂/∂x + zeta ∂/∂y` on one chart.
#[derive(Debug, Clone)]
pub struct ChartVectorField {
    pub chart: String,
    pub eta: RatFunc,
    pub zeta: RatFunc,
}

impl ChartVectorField {
    pub fn new(chart: impl Into<String>, eta: RatFunc, zeta: RatFunc) -> Self {
        ChartVectorField {
            chart: chart.into(),
            eta,
            zeta,
        }
    }

    pub fn zero(atlas: &Atlas, chart: &str) -> Self {
        let z = RatFunc::zero(atlas.vars());
        ChartVectorField::new(chart, z.clone(), z)
    }

    pub fn is_zero(&self) -> bool {
        self.eta.is_zero() && self.zeta.is_zero()
    }

    pub fn neg(&self) -> Self {
        ChartVectorField::new(self.chart.clone(), self.eta.neg(), self.zeta.neg())
    }

    pub fn add(&self, other: &Self) -> Result<Self, AtlasError> {
        self.same_chart(other)?;
        Ok(ChartVectorField::new(
            self.chart.clone(),
            self.eta.add(&other.eta)?,
            self.zeta.add(&other.zeta)?,
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, AtlasError> {
        self.add(&other.neg())
    }

    /// Componentwise semantic equality.
    pub fn equals(&self, other: &Self) -> Result<bool, AtlasError> {
        self.same_chart(other)?;
        Ok(self.eta.equals(&other.eta)? && self.zeta.equals(&other.zeta)?)
    }

    fn same_chart(&self, other: &Self) -> Result<(), AtlasError> {
        if self.chart == other.chart {
            Ok(())
        } else {
            Err(AtlasError::Invalid(format!(
                "fields live on different charts {} and {}",
                self.chart, other.chart
            )))
        }
    }
}

/// `θ_ij` keyed by `(i, j)`, stored in chart `i`'s basis and coordinates.
#[derive(Debug, Clone, Default)]
pub struct CechCocycle {
    pub entries: BTreeMap<(String, String), ChartVectorField>,
}

/// One field `θ_i` per chart.
#[derive(Debug, Clone, Default)]
pub struct Coboundary {
    pub fields: BTreeMap<String, ChartVectorField>,
}

impl Coboundary {
    pub fn zero(atlas: &Atlas) -> Self {
        let fields = atlas
            .charts()
            .iter()
            .map(|c| (c.id.clone(), ChartVectorField::zero(atlas, &c.id)))
            .collect();
        Coboundary { fields }
    }

    pub fn neg(&self) -> Self {
        let fields = self
            .fields
            .iter()
            .map(|(k, v)| (k.clone(), v.neg()))
            .collect();
        Coboundary { fields }
    }
}

/// Which splitting convention a coboundary satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Orientation {
    /// `θ_ij = θ_j − θ_i` on every pair.
    Standard,
    /// `θ_ij = θ_i − θ_j` on every pair.
    Reversed,
    Neither,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoboundaryReport {
    pub report: Report,
    pub orientation: Orientation,
}

/// Computes `θ_ij = ∂_t(transition j -> i)` rewritten in chart-`i` coordinates.
pub fn ks_cocycle(atlas: &Atlas) -> Result<CechCocycle, AtlasError> {
    let t = atlas.time_var();
    let mut entries = BTreeMap::new();
    for tr in atlas.transitions() {
        let (i, j) = (tr.target, tr.source);
        let back = atlas.transition_by_index(i, j)?;
        let eta = atlas.pull(back, &tr.x_expr.diff(t)?)?;
        let zeta = atlas.pull(back, &tr.y_expr.diff(t)?)?;
        let (ci, cj) = (&atlas.charts()[i].id, &atlas.charts()[j].id);
        entries.insert((ci.clone(), cj.clone()), ChartVectorField::new(ci.clone(), eta, zeta));
    }
    Ok(CechCocycle { entries })
}

/// Transports a field from its chart to `target`.
///
/// Evaluated as `J(target -> source)^{-1} · (vf ∘ (target -> source))`, which
/// equals the Jacobian of `source -> target` applied to `vf` and rewritten in
/// target coordinates whenever the two transitions are inverse to each other,
/// but never substitutes into the Jacobian entries.
pub fn pushforward_vf(
    atlas: &Atlas,
    vf: &ChartVectorField,
    target: &str,
) -> Result<ChartVectorField, AtlasError> {
    if vf.chart == target {
        return Ok(vf.clone());
    }
    atlas.transition(&vf.chart, target)?;
    let back = atlas.transition(target, &vf.chart)?;
    if vf.is_zero() {
        return Ok(ChartVectorField::zero(atlas, target));
    }
    let j = jacobian(atlas, back)?;
    let eta = atlas.pull(back, &vf.eta)?;
    let zeta = atlas.pull(back, &vf.zeta)?;
    let new_eta = j.m[1][1].mul(&eta)?.sub(&j.m[0][1].mul(&zeta)?)?.div(&j.det)?;
    let new_zeta = j.m[0][0].mul(&zeta)?.sub(&j.m[1][0].mul(&eta)?)?.div(&j.det)?;
    Ok(ChartVectorField::new(target, new_eta, new_zeta))
}

/// Literal pushforward: Jacobian of `source -> target` applied to `vf`, then
/// rewritten in target coordinates through `target -> source`.
pub fn pushforward_vf_direct(
    atlas: &Atlas,
    vf: &ChartVectorField,
    target: &str,
) -> Result<ChartVectorField, AtlasError> {
    if vf.chart == target {
        return Ok(vf.clone());
    }
    let tr = atlas.transition(&vf.chart, target)?;
    let back = atlas.transition(target, &vf.chart)?;
    let j = jacobian(atlas, tr)?;
    let eta = j.m[0][0].mul(&vf.eta)?.add(&j.m[0][1].mul(&vf.zeta)?)?;
    let zeta = j.m[1][0].mul(&vf.eta)?.add(&j.m[1][1].mul(&vf.zeta)?)?;
    Ok(ChartVectorField::new(
        target,
        atlas.pull(back, &eta)?,
        atlas.pull(back, &zeta)?,
    ))
}

fn residual_check(
    r: &mut Report,
    label: String,
    lhs: &ChartVectorField,
    rhs: &ChartVectorField,
) -> Result<bool, AtlasError> {
    let d = lhs.sub(rhs)?;
    r.push_zero(format!("{label} (d/dx)"), &d.eta);
    r.push_zero(format!("{label} (d/dy)"), &d.zeta);
    Ok(d.is_zero())
}

fn entry<'a>(c: &'a CechCocycle, i: &str, j: &str) -> Result<&'a ChartVectorField, AtlasError> {
    c.entries
        .get(&(i.to_string(), j.to_string()))
        .ok_or_else(|| AtlasError::MissingTransition(j.to_string(), i.to_string()))
}

/// Antisymmetry `θ_ji = −push(θ_ij)` and `θ_ik = θ_ij + push(θ_jk)` on every triple.
pub fn verify_cocycle(c: &CechCocycle, atlas: &Atlas) -> Result<Report, AtlasError> {
    let mut r = Report::new("cocycle");
    for ((i, j), th) in &c.entries {
        let Ok(rev) = entry(c, j, i) else {
            r.push(format!("theta_{j}{i} present"), false, None);
            continue;
        };
        let pushed = pushforward_vf(atlas, th, j)?;
        residual_check(&mut r, format!("theta_{j}{i} = -push(theta_{i}{j})"), rev, &pushed.neg())?;
    }
    let ids: Vec<&str> = atlas.charts().iter().map(|c| c.id.as_str()).collect();
    for &i in &ids {
        for &j in &ids {
            for &k in &ids {
                if i == j || j == k || i == k {
                    continue;
                }
                let (Ok(ik), Ok(ij), Ok(jk)) = (entry(c, i, k), entry(c, i, j), entry(c, j, k)) else {
                    continue;
                };
                let rhs = ij.add(&pushforward_vf(atlas, jk, i)?)?;
                residual_check(&mut r, format!("theta_{i}{k} = theta_{i}{j} + theta_{j}{k}"), ik, &rhs)?;
            }
        }
    }
    Ok(r)
}

/// Checks `θ_ij = θ_j − θ_i` after transporting `θ_j` to chart `i`, and
/// reports which orientation (if any) the fields satisfy.
pub fn verify_coboundary(
    c: &CechCocycle,
    b: &Coboundary,
    atlas: &Atlas,
) -> Result<CoboundaryReport, AtlasError> {
    let mut r = Report::new("coboundary");
    let mut standard = true;
    let mut reversed = true;
    for ((i, j), th) in &c.entries {
        let (Some(ti), Some(tj)) = (b.fields.get(i), b.fields.get(j)) else {
            r.push(format!("fields on {i} and {j} present"), false, None);
            standard = false;
            reversed = false;
            continue;
        };
        let tj_in_i = pushforward_vf(atlas, tj, i)?;
        let diff = tj_in_i.sub(ti)?;
        standard &= residual_check(&mut r, format!("theta_{i}{j} = theta_{j} - theta_{i}"), th, &diff)?;
        reversed &= th.equals(&diff.neg())?;
    }
    let orientation = match (standard, reversed) {
        (true, _) => Orientation::Standard,
        (false, true) => Orientation::Reversed,
        _ => Orientation::Neither,
    };
    Ok(CoboundaryReport {
        report: r,
        orientation,
    })
}

/// Checks that `∂_t − θ_i` glues: for every transition `j -> i`, the image of
/// `∂_t − θ_j` equals `∂_t − θ_i`. Computed from the transitions directly,
/// without going through [`ks_cocycle`].
pub fn verify_gluing(atlas: &Atlas, b: &Coboundary) -> Result<Report, AtlasError> {
    let t = atlas.time_var();
    let mut r = Report::new("time flow gluing");
    for tr in atlas.transitions() {
        let (i, j) = (&atlas.charts()[tr.target].id, &atlas.charts()[tr.source].id);
        let (Some(ti), Some(tj)) = (b.fields.get(i), b.fields.get(j)) else {
            r.push(format!("fields on {i} and {j} present"), false, None);
            continue;
        };
        // Image of ∂_t − θ_j in chart-j coordinates: the ∂/∂x_i, ∂/∂y_i parts.
        let jac = jacobian(atlas, tr)?;
        let eta = tr.x_expr.diff(t)?.sub(&jac.m[0][0].mul(&tj.eta)?.add(&jac.m[0][1].mul(&tj.zeta)?)?)?;
        let zeta = tr.y_expr.diff(t)?.sub(&jac.m[1][0].mul(&tj.eta)?.add(&jac.m[1][1].mul(&tj.zeta)?)?)?;
        let image = ChartVectorField::new(j.clone(), eta, zeta);
        // Compare with −θ_i rewritten in chart-j coordinates.
        let minus_ti = ChartVectorField::new(j.clone(), atlas.pull(tr, &ti.eta)?.neg(), atlas.pull(tr, &ti.zeta)?.neg());
        residual_check(&mut r, format!("d/dt - theta_{j} = d/dt - theta_{i}"), &image, &minus_ti)?;
    }
    Ok(r)
}

/// Right-hand sides `(dx/dt, dy/dt) = (−η_i, −ζ_i)` per chart.
pub fn ode_system(b: &Coboundary) -> BTreeMap<String, (RatFunc, RatFunc)> {
    b.fields
        .iter()
        .map(|(id, vf)| (id.clone(), (vf.eta.neg(), vf.zeta.neg())))
        .collect()
}
