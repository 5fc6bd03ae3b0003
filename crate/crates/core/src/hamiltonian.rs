//! Contraction with the symplectic density, the relative exterior derivative
//! (time and parameters held fixed), the fundamental equation and Hamiltonians.

use serde::Serialize;
use thiserror::Error;

use crate::atlas::{Atlas, AtlasError};
use crate::kodaira_spencer::ChartVectorField;
use crate::ratfunc::{RatFunc, RatFuncError};
use crate::report::Report;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HamiltonianError {
    #[error(transparent)]
    Atlas(#[from] AtlasError),
    #[error(transparent)]
    Math(#[from] RatFuncError),
    #[error("chart {0} does not carry the plain density dx^dy")]
    NotUnitDensity(String),
    #[error("field coefficients on chart {0} are not polynomial")]
    NonPolynomial(String),
    #[error("contraction on chart {chart} is not closed: d_pi = {residual}")]
    NotClosed { chart: String, residual: String },
}

/// `a dx + b dy` on one chart.
#[derive(Debug, Clone)]
pub struct OneForm {
    pub chart: String,
    pub a: RatFunc,
    pub b: RatFunc,
}

#[derive(Debug, Clone)]
pub struct HamiltonianDef {
    pub chart: String,
    pub h: RatFunc,
}

#[derive(Debug, Clone, Serialize)]
pub struct HamiltonianReport {
    /// `-1` when `d_pi H = -(θ⌟ω)`, `+1` when `d_pi H = θ⌟ω`, `None` if neither holds.
    pub sign: Option<i8>,
    pub report: Report,
}

/// `θ⌟(g dx∧dy) = -gζ dx + gη dy`.
pub fn contract(vf: &ChartVectorField, density: &RatFunc) -> Result<OneForm, RatFuncError> {
    Ok(OneForm {
        chart: vf.chart.clone(),
        a: density.mul(&vf.zeta)?.neg(),
        b: density.mul(&vf.eta)?,
    })
}

/// Coefficient `∂b/∂x − ∂a/∂y` of `dx∧dy` in the relative exterior derivative.
pub fn d_pi(atlas: &Atlas, w: &OneForm) -> Result<RatFunc, HamiltonianError> {
    let c = atlas.chart(&w.chart)?;
    Ok(w.b.diff(c.x)?.sub(&w.a.diff(c.y)?)?)
}

/// `d_pi H = (∂H/∂x) dx + (∂H/∂y) dy`.
pub fn d_pi_function(atlas: &Atlas, h: &HamiltonianDef) -> Result<OneForm, HamiltonianError> {
    let c = atlas.chart(&h.chart)?;
    Ok(OneForm {
        chart: h.chart.clone(),
        a: h.h.diff(c.x)?,
        b: h.h.diff(c.y)?,
    })
}

/// Asserts `∂g/∂t − d_pi(θ⌟(g dx∧dy)) = 0`.
pub fn fundamental_check(
    atlas: &Atlas,
    density: &RatFunc,
    vf: &ChartVectorField,
) -> Result<Report, HamiltonianError> {
    let lhs = density.diff(atlas.time_var())?;
    let rhs = d_pi(atlas, &contract(vf, density)?)?;
    let mut r = Report::new(format!("fundamental equation on {}", vf.chart));
    r.push_zero("dg/dt - d_pi(theta . omega)", &lhs.sub(&rhs)?);
    Ok(r)
}

/// Path integral `H = ∫_0^x ζ(s, 0) ds − ∫_0^y η(x, s) ds`, so that
/// `∂H/∂x = ζ`, `∂H/∂y = −η` and `H(0, 0) = 0`.
pub fn recover_hamiltonian(
    atlas: &Atlas,
    vf: &ChartVectorField,
) -> Result<HamiltonianDef, HamiltonianError> {
    let chart = atlas.chart(&vf.chart)?;
    if chart.pole_order != 0 && !chart.denom.is_constant() {
        return Err(HamiltonianError::NotUnitDensity(chart.id.clone()));
    }
    let density = chart.density();
    let closed = d_pi(atlas, &contract(vf, &density)?)?;
    if !closed.is_zero() {
        return Err(HamiltonianError::NotClosed {
            chart: chart.id.clone(),
            residual: closed.to_string(),
        });
    }
    let g = density
        .constant_value()
        .ok_or_else(|| HamiltonianError::NotUnitDensity(chart.id.clone()))?;
    let non_poly = || HamiltonianError::NonPolynomial(chart.id.clone());
    let eta = vf.eta.as_polynomial().ok_or_else(non_poly)?.scale(&g);
    let zeta = vf.zeta.as_polynomial().ok_or_else(non_poly)?.scale(&g);
    let first = zeta.at_zero(chart.y).antiderivative(chart.x)?;
    let second = eta.antiderivative(chart.y)?;
    Ok(HamiltonianDef {
        chart: chart.id.clone(),
        h: first.sub(&second)?.into(),
    })
}

/// Tests `d_pi H = ∓ θ⌟ω` and reports which sign holds.
pub fn verify_hamiltonian(
    atlas: &Atlas,
    h: &HamiltonianDef,
    vf: &ChartVectorField,
    density: &RatFunc,
) -> Result<HamiltonianReport, HamiltonianError> {
    if h.chart != vf.chart {
        return Err(AtlasError::Invalid(format!(
            "Hamiltonian on {} and field on {}",
            h.chart, vf.chart
        ))
        .into());
    }
    let dh = d_pi_function(atlas, h)?;
    let w = contract(vf, density)?;
    let minus = [dh.a.add(&w.a)?, dh.b.add(&w.b)?];
    let plus = [dh.a.sub(&w.a)?, dh.b.sub(&w.b)?];
    let sign = if minus.iter().all(RatFunc::is_zero) {
        Some(-1)
    } else if plus.iter().all(RatFunc::is_zero) {
        Some(1)
    } else {
        None
    };
    let mut report = Report::new(format!("Hamiltonian on {}", h.chart));
    if sign != Some(1) {
        report.push_zero("dH/dx = g*zeta", &minus[0]);
        report.push_zero("dH/dy = -g*eta", &minus[1]);
    }
    if sign != Some(-1) {
        report.push_zero("dH/dx = -g*zeta", &plus[0]);
        report.push_zero("dH/dy = g*eta", &plus[1]);
    }
    Ok(HamiltonianReport {
        sign,
        report,
    })
}

/// True if `f − g` depends on neither chart coordinate.
pub fn equal_modulo_time(atlas: &Atlas, chart: &str, f: &RatFunc, g: &RatFunc) -> Result<bool, HamiltonianError> {
    let c = atlas.chart(chart)?;
    let d = f.sub(g)?;
    Ok(d.diff(c.x)?.is_zero() && d.diff(c.y)?.is_zero())
}
