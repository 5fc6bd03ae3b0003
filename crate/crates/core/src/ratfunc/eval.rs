use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use twofloat::TwoFloat;

use super::{Poly, RatFunc, RatFuncError};

type Dd = Complex<TwoFloat>;

/// Exponent vectors with `(hi, lo)` coefficients.
type Terms = Vec<(Vec<u16>, (f64, f64))>;

/// Sparse recursive Horner scheme: a polynomial in the lowest-index variable
/// whose coefficients are polynomials in the remaining ones.
#[derive(Debug, Clone)]
enum Horner {
    /// Coefficient as an unevaluated sum `hi + lo` of doubles.
    Const(f64, f64),
    /// `(exponent, coefficient)` pairs in strictly descending exponent order.
    Var { var: usize, coeffs: Vec<(u16, Horner)> },
}

fn powi(z: Complex64, e: u16) -> Complex64 {
    match e {
        0 => Complex64::new(1.0, 0.0),
        1 => z,
        _ => z.powu(e as u32),
    }
}

fn powi_dd(z: Dd, e: u16) -> Dd {
    let mut acc = Dd::new(TwoFloat::from(1.0), TwoFloat::from(0.0));
    let (mut base, mut e) = (z, e);
    while e > 0 {
        if e & 1 == 1 {
            acc *= base;
        }
        base *= base;
        e >>= 1;
    }
    acc
}

fn split(c: &BigRational) -> (f64, f64) {
    let hi = c.to_f64().unwrap_or(f64::NAN);
    let lo = BigRational::from_float(hi)
        .map(|h| (c - h).to_f64().unwrap_or(0.0))
        .unwrap_or(0.0);
    (hi, lo)
}

impl Horner {
    fn build(terms: Terms, from_var: usize) -> Horner {
        if terms.is_empty() {
            return Horner::Const(0.0, 0.0);
        }
        let nvars = terms[0].0.len();
        let var = (from_var..nvars).find(|&v| terms.iter().any(|(e, _)| e[v] > 0));
        let Some(var) = var else {
            // Distinct exponent vectors, so at most one constant term remains.
            return Horner::Const(terms[0].1 .0, terms[0].1 .1);
        };
        let mut groups: Vec<(u16, Terms)> = Vec::new();
        let mut sorted = terms;
        sorted.sort_by(|a, b| b.0[var].cmp(&a.0[var]));
        for (mut exp, c) in sorted {
            let e = exp[var];
            exp[var] = 0;
            match groups.last_mut() {
                Some((ge, g)) if *ge == e => g.push((exp, c)),
                _ => groups.push((e, vec![(exp, c)])),
            }
        }
        Horner::Var {
            var,
            coeffs: groups
                .into_iter()
                .map(|(e, g)| (e, Horner::build(g, var + 1)))
                .collect(),
        }
    }

    fn eval(&self, point: &[Complex64]) -> Complex64 {
        match self {
            Horner::Const(hi, lo) => Complex64::new(hi + lo, 0.0),
            Horner::Var { var, coeffs } => {
                let z = point[*var];
                let mut acc = Complex64::new(0.0, 0.0);
                let mut prev: Option<u16> = None;
                for (e, c) in coeffs {
                    if let Some(p) = prev {
                        acc *= powi(z, p - e);
                    }
                    acc += c.eval(point);
                    prev = Some(*e);
                }
                acc * powi(z, prev.unwrap_or(0))
            }
        }
    }

    fn eval_dd(&self, point: &[Dd]) -> Dd {
        match self {
            Horner::Const(hi, lo) => Dd::new(TwoFloat::from(*hi) + TwoFloat::from(*lo), TwoFloat::from(0.0)),
            Horner::Var { var, coeffs } => {
                let z = point[*var];
                let mut acc = Dd::zero();
                let mut prev: Option<u16> = None;
                for (e, c) in coeffs {
                    if let Some(p) = prev {
                        acc *= powi_dd(z, p - e);
                    }
                    acc += c.eval_dd(point);
                    prev = Some(*e);
                }
                acc * powi_dd(z, prev.unwrap_or(0))
            }
        }
    }
}

fn compile_poly(p: &Poly) -> Horner {
    let terms = p.terms().map(|(e, c)| (e.to_vec(), split(c))).collect();
    Horner::build(terms, 0)
}

fn to_c64(z: Dd) -> Complex64 {
    Complex64::new(z.re.hi() + z.re.lo(), z.im.hi() + z.im.lo())
}

/// A rational function lowered to floating point for repeated evaluation.
#[derive(Debug, Clone)]
pub struct CompiledRatFunc {
    nvars: usize,
    num: Horner,
    den: Horner,
}

impl CompiledRatFunc {
    pub fn new(f: &RatFunc) -> Self {
        CompiledRatFunc {
            nvars: f.vars().len(),
            num: compile_poly(f.num()),
            den: compile_poly(f.den()),
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    /// Evaluates at a point given in table order.
    pub fn eval(&self, point: &[Complex64]) -> Result<Complex64, RatFuncError> {
        if point.len() != self.nvars {
            return Err(RatFuncError::PointArity {
                expected: self.nvars,
                got: point.len(),
            });
        }
        let d = self.den.eval(point);
        if d == Complex64::new(0.0, 0.0) {
            return Err(RatFuncError::Pole {
                point: point.to_vec(),
            });
        }
        let n = self.num.eval(point);
        let v = n / d;
        if !(n.is_finite() && d.is_finite() && v.is_finite()) {
            return Err(RatFuncError::NonFinite);
        }
        Ok(v)
    }

    /// Like [`CompiledRatFunc::eval`], but in double-double arithmetic, so that
    /// cancellation inside expanded high-degree numerators and denominators
    /// costs digits of the extended format instead of the result. Roughly an
    /// order of magnitude slower.
    pub fn eval_precise(&self, point: &[Complex64]) -> Result<Complex64, RatFuncError> {
        if point.len() != self.nvars {
            return Err(RatFuncError::PointArity {
                expected: self.nvars,
                got: point.len(),
            });
        }
        let p: Vec<Dd> = point
            .iter()
            .map(|z| Dd::new(TwoFloat::from(z.re), TwoFloat::from(z.im)))
            .collect();
        let d = self.den.eval_dd(&p);
        if d.is_zero() {
            return Err(RatFuncError::Pole {
                point: point.to_vec(),
            });
        }
        let v = to_c64(self.num.eval_dd(&p) / d);
        if !v.is_finite() {
            return Err(RatFuncError::NonFinite);
        }
        Ok(v)
    }

    /// Numerator and denominator values without forming the quotient.
    pub fn eval_parts(&self, point: &[Complex64]) -> (Complex64, Complex64) {
        (self.num.eval(point), self.den.eval(point))
    }
}

/// One-shot evaluation; compile once with [`CompiledRatFunc`] for hot loops.
pub fn eval(f: &RatFunc, point: &[Complex64]) -> Result<Complex64, RatFuncError> {
    CompiledRatFunc::new(f).eval(point)
}

impl RatFunc {
    pub fn eval(&self, point: &[Complex64]) -> Result<Complex64, RatFuncError> {
        eval(self, point)
    }

    /// Evaluation at a point given by name; every variable must be assigned.
    pub fn eval_named(&self, point: &[(&str, Complex64)]) -> Result<Complex64, RatFuncError> {
        let vars = self.vars();
        let mut full: Vec<Option<Complex64>> = vec![None; vars.len()];
        for (name, z) in point {
            full[vars.require(name)?] = Some(*z);
        }
        let full = full
            .into_iter()
            .enumerate()
            .map(|(i, z)| z.ok_or_else(|| RatFuncError::UnknownVariable(vars.name(i).to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        eval(self, &full)
    }
}
