use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use smallvec::SmallVec;

use super::poly::{same_table, Exponents};
use super::{Poly, RatFuncError, VarTable};

/// Rational function `num / den` over ℚ.
///
/// Common factors are not removed beyond monomial content, constants and
/// exact polynomial divisibility, so two equal functions can have different
/// representatives. Compare with [`RatFunc::equals`], never with `==` on the parts.
#[derive(Debug, Clone)]
pub struct RatFunc {
    num: Poly,
    den: Poly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl RatFunc {
    pub fn zero(vars: &Arc<VarTable>) -> Self {
        RatFunc {
            num: Poly::zero(vars),
            den: Poly::one(vars),
        }
    }

    pub fn one(vars: &Arc<VarTable>) -> Self {
        RatFunc {
            num: Poly::one(vars),
            den: Poly::one(vars),
        }
    }

    pub fn from_int(vars: &Arc<VarTable>, c: i64) -> Self {
        Poly::from_int(vars, c).into()
    }

    pub fn constant(vars: &Arc<VarTable>, c: BigRational) -> Self {
        Poly::constant(vars, c).into()
    }

    pub fn ratio(vars: &Arc<VarTable>, n: i64, d: i64) -> Self {
        Self::constant(vars, BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn var(vars: &Arc<VarTable>, index: usize) -> Self {
        Poly::var(vars, index).into()
    }

    /// Variable by name.
    pub fn named(vars: &Arc<VarTable>, name: &str) -> Result<Self, RatFuncError> {
        Ok(Self::var(vars, vars.require(name)?))
    }

    pub fn new(num: Poly, den: Poly) -> Result<Self, RatFuncError> {
        same_table(num.vars(), den.vars())?;
        if den.is_zero() {
            return Err(RatFuncError::DivisionByZero);
        }
        Ok(RatFunc { num, den }.normalized())
    }

    pub fn vars(&self) -> &Arc<VarTable> {
        self.num.vars()
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_constant()
    }

    /// The polynomial this function equals, if its representative is one.
    pub fn as_polynomial(&self) -> Option<Poly> {
        let c = self.den.constant_value()?;
        Some(self.num.scale(&c.recip()))
    }

    pub fn constant_value(&self) -> Option<BigRational> {
        let n = self.num.constant_value()?;
        let d = self.den.constant_value()?;
        Some(n / d)
    }

    /// Semantic zero test: the numerator is the zero polynomial.
    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Semantic equality through cross-multiplication (no GCD involved).
    pub fn equals(&self, other: &RatFunc) -> Result<bool, RatFuncError> {
        same_table(self.vars(), other.vars())?;
        if self.den == other.den {
            return Ok(self.num == other.num);
        }
        let lhs = self.num.mul(&other.den)?;
        let rhs = other.num.mul(&self.den)?;
        Ok(lhs == rhs)
    }

    /// Cheap cancellations that never require a polynomial GCD: monomial
    /// content, constant denominators and exact divisibility by the denominator.
    fn normalized(self) -> Self {
        let RatFunc { mut num, mut den } = self;
        let vars = num.vars().clone();
        if num.is_zero() {
            return RatFunc {
                num,
                den: Poly::one(&vars),
            };
        }
        if let Some(c) = den.constant_value() {
            return RatFunc {
                num: num.scale(&c.recip()),
                den: Poly::one(&vars),
            };
        }
        let gn = num.monomial_gcd();
        let gd = den.monomial_gcd();
        let common: Exponents = gn.iter().zip(&gd).map(|(a, b)| *a.min(b)).collect();
        if common.iter().any(|&e| e > 0) {
            num = num.divide_monomial(&common);
            den = den.divide_monomial(&common);
        }
        if let Some(q) = num.divide_exact(&den) {
            return RatFunc {
                num: q,
                den: Poly::one(&vars),
            };
        }
        if num.len() < den.len() || num.total_degree() < den.total_degree() {
            // Only the reciprocal can divide exactly here.
            if let Some(q) = den.divide_exact(&num) {
                let one = Poly::one(&vars);
                return RatFunc { num: one, den: q }.with_monic_den();
            }
        }
        RatFunc { num, den }.with_monic_den()
    }

    fn with_monic_den(self) -> Self {
        match self.den.leading_coeff() {
            Some(lc) if !lc.is_one() => {
                let inv = lc.recip();
                RatFunc {
                    num: self.num.scale(&inv),
                    den: self.den.scale(&inv),
                }
            }
            _ => self,
        }
    }

    pub fn neg(&self) -> RatFunc {
        RatFunc {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(&self, other: &RatFunc) -> Result<RatFunc, RatFuncError> {
        self.add_sub(other, false)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(&self, other: &RatFunc) -> Result<RatFunc, RatFuncError> {
        self.add_sub(other, true)
    }

    fn add_sub(&self, other: &RatFunc, subtract: bool) -> Result<RatFunc, RatFuncError> {
        same_table(self.vars(), other.vars())?;
        let combine = |a: &Poly, b: &Poly| if subtract { a.sub(b) } else { a.add(b) };
        if self.den == other.den {
            let num = combine(&self.num, &other.num)?;
            return Ok(RatFunc {
                num,
                den: self.den.clone(),
            }
            .normalized());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.is_zero() {
            return Ok(if subtract { other.neg() } else { other.clone() });
        }
        // One denominator dividing the other avoids squaring the common part.
        if let Some(k) = other.den.divide_exact(&self.den) {
            let num = combine(&self.num.mul(&k)?, &other.num)?;
            return Ok(RatFunc {
                num,
                den: other.den.clone(),
            }
            .normalized());
        }
        if let Some(k) = self.den.divide_exact(&other.den) {
            let num = combine(&self.num, &other.num.mul(&k)?)?;
            return Ok(RatFunc {
                num,
                den: self.den.clone(),
            }
            .normalized());
        }
        let num = combine(&self.num.mul(&other.den)?, &other.num.mul(&self.den)?)?;
        let den = self.den.mul(&other.den)?;
        Ok(RatFunc { num, den }.normalized())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(&self, other: &RatFunc) -> Result<RatFunc, RatFuncError> {
        same_table(self.vars(), other.vars())?;
        if self.is_zero() || other.is_zero() {
            return Ok(RatFunc::zero(self.vars()));
        }
        let (mut an, mut ad) = (self.num.clone(), self.den.clone());
        let (mut bn, mut bd) = (other.num.clone(), other.den.clone());
        // Cross cancellation keeps products of transition data small.
        if !bd.is_constant() {
            if let Some(q) = an.divide_exact(&bd) {
                an = q;
                bd = Poly::one(self.vars());
            }
        }
        if !ad.is_constant() {
            if let Some(q) = bn.divide_exact(&ad) {
                bn = q;
                ad = Poly::one(self.vars());
            }
        }
        let num = an.mul(&bn)?;
        let den = ad.mul(&bd)?;
        Ok(RatFunc { num, den }.normalized())
    }

    pub fn recip(&self) -> Result<RatFunc, RatFuncError> {
        if self.is_zero() {
            return Err(RatFuncError::DivisionByZero);
        }
        Ok(RatFunc {
            num: self.den.clone(),
            den: self.num.clone(),
        }
        .normalized())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(&self, other: &RatFunc) -> Result<RatFunc, RatFuncError> {
        self.mul(&other.recip()?)
    }

    pub fn scale(&self, c: &BigRational) -> RatFunc {
        RatFunc {
            num: self.num.scale(c),
            den: self.den.clone(),
        }
        .normalized()
    }

    pub fn pow(&self, n: u32) -> Result<RatFunc, RatFuncError> {
        Ok(RatFunc {
            num: self.num.pow(n)?,
            den: self.den.pow(n)?,
        }
        .normalized())
    }

    /// Field arithmetic dispatch.
    pub fn arith(&self, other: &RatFunc, op: ArithOp) -> Result<RatFunc, RatFuncError> {
        match op {
            ArithOp::Add => self.add(other),
            ArithOp::Sub => self.sub(other),
            ArithOp::Mul => self.mul(other),
            ArithOp::Div => self.div(other),
        }
    }

    /// Partial derivative by the quotient rule.
    pub fn diff(&self, var: usize) -> Result<RatFunc, RatFuncError> {
        if var >= self.vars().len() {
            return Err(RatFuncError::UnknownVariable(format!("#{var}")));
        }
        let dn = self.num.derivative(var);
        if self.den.is_constant() {
            return Ok(RatFunc {
                num: dn,
                den: self.den.clone(),
            }
            .normalized());
        }
        let dd = self.den.derivative(var);
        if dd.is_zero() {
            return Ok(RatFunc {
                num: dn,
                den: self.den.clone(),
            }
            .normalized());
        }
        let num = dn.mul(&self.den)?.sub(&self.num.mul(&dd)?)?;
        let den = self.den.mul(&self.den)?;
        Ok(RatFunc { num, den }.normalized())
    }

    pub fn diff_by_name(&self, name: &str) -> Result<RatFunc, RatFuncError> {
        let v = self.vars().require(name)?;
        self.diff(v)
    }

    /// True if the variable occurs in the representative.
    pub fn contains_var(&self, var: usize) -> bool {
        self.num.contains_var(var) || self.den.contains_var(var)
    }

    /// Simultaneous substitution of variables by rational functions over the
    /// same table; unassigned variables pass through unchanged.
    pub fn subst(&self, assignment: &[(usize, RatFunc)]) -> Result<RatFunc, RatFuncError> {
        for (v, image) in assignment {
            if *v >= self.vars().len() {
                return Err(RatFuncError::UnknownVariable(format!("#{v}")));
            }
            same_table(self.vars(), image.vars())?;
        }
        let active: Vec<&(usize, RatFunc)> = assignment
            .iter()
            .filter(|(v, _)| self.contains_var(*v))
            .collect();
        if active.is_empty() {
            return Ok(self.clone());
        }
        let mut cache = PowerCache::new(&active);
        let (a, a_degs) = subst_poly(&self.num, &active, &mut cache)?;
        let (b, b_degs) = subst_poly(&self.den, &active, &mut cache)?;
        if b.is_zero() {
            return Err(RatFuncError::SubstitutionPole);
        }
        // num/den = (A / prod D^a) / (B / prod D^b)
        let mut num = a;
        let mut den = b;
        for (k, (&da, &db)) in a_degs.iter().zip(&b_degs).enumerate() {
            let m = da.min(db);
            if db > m {
                num = num.mul(&cache.den_pow(k, db - m)?)?;
            }
            if da > m {
                den = den.mul(&cache.den_pow(k, da - m)?)?;
            }
        }
        Ok(RatFunc { num, den }.normalized())
    }

    /// Substitution keyed by variable name.
    pub fn subst_named(&self, assignment: &[(&str, RatFunc)]) -> Result<RatFunc, RatFuncError> {
        let resolved = assignment
            .iter()
            .map(|(name, f)| Ok((self.vars().require(name)?, f.clone())))
            .collect::<Result<Vec<_>, RatFuncError>>()?;
        self.subst(&resolved)
    }

    /// Rewrites the function over another table (`map[i]` = new index of old variable `i`).
    pub fn relabel(&self, target: &Arc<VarTable>, map: &[usize]) -> RatFunc {
        RatFunc {
            num: self.num.relabel(target, map),
            den: self.den.relabel(target, map),
        }
        .normalized()
    }

    /// Rewrites the function over a table that contains all of its variable names.
    pub fn rebase(&self, target: &Arc<VarTable>) -> Result<RatFunc, RatFuncError> {
        let map = self
            .vars()
            .names()
            .iter()
            .map(|n| target.require(n))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.relabel(target, &map))
    }
}

impl From<Poly> for RatFunc {
    fn from(p: Poly) -> Self {
        let den = Poly::one(p.vars());
        RatFunc { num: p, den }
    }
}

impl fmt::Display for RatFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::print::ratfunc_to_string(self))
    }
}

/// Powers of the numerators and denominators of substitution images.
struct PowerCache<'a> {
    images: Vec<&'a RatFunc>,
    num_pows: Vec<Vec<Poly>>,
    den_pows: Vec<Vec<Poly>>,
}

impl<'a> PowerCache<'a> {
    fn new(active: &[&'a (usize, RatFunc)]) -> Self {
        let images: Vec<&RatFunc> = active.iter().map(|(_, f)| f).collect();
        let num_pows = images.iter().map(|f| vec![Poly::one(f.vars())]).collect();
        let den_pows = images.iter().map(|f| vec![Poly::one(f.vars())]).collect();
        PowerCache {
            images,
            num_pows,
            den_pows,
        }
    }

    fn num_pow(&mut self, k: usize, e: u16) -> Result<Poly, RatFuncError> {
        let pows = &mut self.num_pows[k];
        while pows.len() <= e as usize {
            let next = pows.last().unwrap().mul(&self.images[k].num)?;
            pows.push(next);
        }
        Ok(pows[e as usize].clone())
    }

    fn den_pow(&mut self, k: usize, e: u16) -> Result<Poly, RatFuncError> {
        let pows = &mut self.den_pows[k];
        while pows.len() <= e as usize {
            let next = pows.last().unwrap().mul(&self.images[k].den)?;
            pows.push(next);
        }
        Ok(pows[e as usize].clone())
    }
}

/// Substitutes into a polynomial, returning the numerator over
/// `prod_k den_k^{d_k}` together with the exponents `d_k`.
fn subst_poly(
    p: &Poly,
    active: &[&(usize, RatFunc)],
    cache: &mut PowerCache<'_>,
) -> Result<(Poly, Vec<u16>), RatFuncError> {
    let vars = p.vars().clone();
    let degs: Vec<u16> = active.iter().map(|(v, _)| p.degree_in(*v)).collect();
    // Group terms by their exponents in the substituted variables.
    let mut groups: HashMap<SmallVec<[u16; 4]>, Vec<(Exponents, BigRational)>> = HashMap::new();
    for (exp, c) in p.terms() {
        let key: SmallVec<[u16; 4]> = active.iter().map(|(v, _)| exp[*v]).collect();
        let mut rest: Exponents = SmallVec::from_slice(exp);
        for (v, _) in active {
            rest[*v] = 0;
        }
        groups.entry(key).or_default().push((rest, c.clone()));
    }
    let mut keys: Vec<_> = groups.keys().cloned().collect();
    keys.sort();
    let mut total = Poly::zero(&vars);
    for key in keys {
        let rest = Poly::from_terms(&vars, groups.remove(&key).unwrap());
        let mut factor = rest;
        for (k, &e) in key.iter().enumerate() {
            if e > 0 {
                factor = factor.mul(&cache.num_pow(k, e)?)?;
            }
            if degs[k] > e && !cache.images[k].den.is_one() {
                factor = factor.mul(&cache.den_pow(k, degs[k] - e)?)?;
            }
        }
        total = total.add(&factor)?;
    }
    // Images with unit denominators contribute no denominator power.
    let degs = degs
        .iter()
        .enumerate()
        .map(|(k, &d)| if cache.images[k].den.is_one() { 0 } else { d })
        .collect();
    Ok((total, degs))
}
