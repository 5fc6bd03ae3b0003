use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU32, Ordering as AtomicOrdering};
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use super::{RatFuncError, VarTable};

/// Exponent vector, one entry per variable of the owning [`VarTable`].
pub type Exponents = SmallVec<[u16; 12]>;

pub const DEFAULT_DEGREE_CAP: u32 = 512;

static DEGREE_CAP: AtomicU32 = AtomicU32::new(DEFAULT_DEGREE_CAP);

/// Cap on the total degree of any intermediate product.
pub fn degree_cap() -> u32 {
    DEGREE_CAP.load(AtomicOrdering::Relaxed)
}

/// Sets the process-wide degree cap and returns the previous value.
pub fn set_degree_cap(cap: u32) -> u32 {
    DEGREE_CAP.swap(cap, AtomicOrdering::Relaxed)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct Term {
    pub deg: u32,
    pub exp: Exponents,
    pub coeff: BigRational,
}

fn grlex(a_deg: u32, a: &[u16], b_deg: u32, b: &[u16]) -> Ordering {
    a_deg.cmp(&b_deg).then_with(|| a.cmp(b))
}

impl Term {
    fn cmp_monomial(&self, other: &Term) -> Ordering {
        grlex(self.deg, &self.exp, other.deg, &other.exp)
    }
}

/// Sparse multivariate polynomial with rational coefficients.
///
/// Terms are kept sorted in descending graded-lexicographic order with no
/// zero coefficients, so structural equality is polynomial equality.
#[derive(Debug, Clone)]
pub struct Poly {
    vars: Arc<VarTable>,
    terms: Vec<Term>,
}

impl PartialEq for Poly {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.vars, &other.vars) || self.vars == other.vars)
            && self.terms == other.terms
    }
}

impl Eq for Poly {}

pub(crate) fn same_table(a: &Arc<VarTable>, b: &Arc<VarTable>) -> Result<(), RatFuncError> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(RatFuncError::TableMismatch)
    }
}

fn check_cap(degree: u64) -> Result<(), RatFuncError> {
    let cap = degree_cap();
    if degree > cap as u64 {
        Err(RatFuncError::DegreeCap { degree, cap })
    } else {
        Ok(())
    }
}

impl Poly {
    pub fn zero(vars: &Arc<VarTable>) -> Self {
        Poly {
            vars: vars.clone(),
            terms: Vec::new(),
        }
    }

    pub fn one(vars: &Arc<VarTable>) -> Self {
        Self::constant(vars, BigRational::one())
    }

    pub fn constant(vars: &Arc<VarTable>, c: BigRational) -> Self {
        if c.is_zero() {
            return Self::zero(vars);
        }
        Poly {
            vars: vars.clone(),
            terms: vec![Term {
                deg: 0,
                exp: SmallVec::from_elem(0, vars.len()),
                coeff: c,
            }],
        }
    }

    pub fn from_int(vars: &Arc<VarTable>, c: i64) -> Self {
        Self::constant(vars, BigRational::from_integer(BigInt::from(c)))
    }

    /// The polynomial consisting of the single variable at `index`.
    pub fn var(vars: &Arc<VarTable>, index: usize) -> Self {
        assert!(index < vars.len(), "variable index out of range");
        let mut exp: Exponents = SmallVec::from_elem(0, vars.len());
        exp[index] = 1;
        Poly {
            vars: vars.clone(),
            terms: vec![Term {
                deg: 1,
                exp,
                coeff: BigRational::one(),
            }],
        }
    }

    pub fn monomial(vars: &Arc<VarTable>, exp: &[u16], coeff: BigRational) -> Self {
        assert_eq!(exp.len(), vars.len(), "exponent length mismatch");
        if coeff.is_zero() {
            return Self::zero(vars);
        }
        Poly {
            vars: vars.clone(),
            terms: vec![Term {
                deg: exp.iter().map(|&e| e as u32).sum(),
                exp: SmallVec::from_slice(exp),
                coeff,
            }],
        }
    }

    /// Builds a polynomial from arbitrary (possibly repeated, possibly zero) terms.
    pub fn from_terms<I>(vars: &Arc<VarTable>, terms: I) -> Self
    where
        I: IntoIterator<Item = (Exponents, BigRational)>,
    {
        let mut acc: FxHashMap<Exponents, BigRational> = FxHashMap::default();
        for (exp, c) in terms {
            assert_eq!(exp.len(), vars.len(), "exponent length mismatch");
            *acc.entry(exp).or_insert_with(BigRational::zero) += c;
        }
        Self::from_map(vars, acc)
    }

    fn from_map(vars: &Arc<VarTable>, map: FxHashMap<Exponents, BigRational>) -> Self {
        let mut terms: Vec<Term> = map
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(exp, coeff)| Term {
                deg: exp.iter().map(|&e| e as u32).sum(),
                exp,
                coeff,
            })
            .collect();
        terms.sort_unstable_by(|a, b| b.cmp_monomial(a));
        Poly {
            vars: vars.clone(),
            terms,
        }
    }

    pub fn vars(&self) -> &Arc<VarTable> {
        &self.vars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.constant_value().is_some_and(|c| c.is_one())
    }

    /// `Some(c)` when the polynomial is the constant `c` (including zero).
    pub fn constant_value(&self) -> Option<BigRational> {
        match self.terms.as_slice() {
            [] => Some(BigRational::zero()),
            [t] if t.deg == 0 => Some(t.coeff.clone()),
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty() || (self.terms.len() == 1 && self.terms[0].deg == 0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Iterates `(exponents, coefficient)` in descending graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&[u16], &BigRational)> + '_ {
        self.terms.iter().map(|t| (t.exp.as_slice(), &t.coeff))
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.first().map_or(0, |t| t.deg)
    }

    pub fn degree_in(&self, var: usize) -> u16 {
        self.terms.iter().map(|t| t.exp[var]).max().unwrap_or(0)
    }

    pub fn leading_coeff(&self) -> Option<&BigRational> {
        self.terms.first().map(|t| &t.coeff)
    }

    /// True if the variable occurs in some term.
    pub fn contains_var(&self, var: usize) -> bool {
        self.terms.iter().any(|t| t.exp[var] > 0)
    }

    pub fn neg(&self) -> Poly {
        Poly {
            vars: self.vars.clone(),
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    deg: t.deg,
                    exp: t.exp.clone(),
                    coeff: -&t.coeff,
                })
                .collect(),
        }
    }

    pub fn scale(&self, c: &BigRational) -> Poly {
        if c.is_zero() {
            return Poly::zero(&self.vars);
        }
        Poly {
            vars: self.vars.clone(),
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    deg: t.deg,
                    exp: t.exp.clone(),
                    coeff: &t.coeff * c,
                })
                .collect(),
        }
    }

    fn merge(&self, other: &Poly, negate_other: bool) -> Poly {
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        let a = &self.terms;
        let b = &other.terms;
        let take_b = |t: &Term| Term {
            deg: t.deg,
            exp: t.exp.clone(),
            coeff: if negate_other {
                -&t.coeff
            } else {
                t.coeff.clone()
            },
        };
        while i < a.len() && j < b.len() {
            match a[i].cmp_monomial(&b[j]) {
                Ordering::Greater => {
                    out.push(a[i].clone());
                    i += 1;
                }
                Ordering::Less => {
                    out.push(take_b(&b[j]));
                    j += 1;
                }
                Ordering::Equal => {
                    let c = if negate_other {
                        &a[i].coeff - &b[j].coeff
                    } else {
                        &a[i].coeff + &b[j].coeff
                    };
                    if !c.is_zero() {
                        out.push(Term {
                            deg: a[i].deg,
                            exp: a[i].exp.clone(),
                            coeff: c,
                        });
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend(a[i..].iter().cloned());
        out.extend(b[j..].iter().map(take_b));
        Poly {
            vars: self.vars.clone(),
            terms: out,
        }
    }

    pub fn add(&self, other: &Poly) -> Result<Poly, RatFuncError> {
        same_table(&self.vars, &other.vars)?;
        Ok(self.merge(other, false))
    }

    pub fn sub(&self, other: &Poly) -> Result<Poly, RatFuncError> {
        same_table(&self.vars, &other.vars)?;
        Ok(self.merge(other, true))
    }

    /// Integer numerators over a common denominator: `self = sum / den`.
    fn integer_form(&self) -> (Vec<BigInt>, BigInt) {
        let den = self
            .terms
            .iter()
            .fold(BigInt::one(), |acc, t| acc.lcm(t.coeff.denom()));
        let nums = self
            .terms
            .iter()
            .map(|t| t.coeff.numer() * (&den / t.coeff.denom()))
            .collect();
        (nums, den)
    }

    pub fn mul(&self, other: &Poly) -> Result<Poly, RatFuncError> {
        same_table(&self.vars, &other.vars)?;
        if self.is_zero() || other.is_zero() {
            return Ok(Poly::zero(&self.vars));
        }
        check_cap(self.total_degree() as u64 + other.total_degree() as u64)?;
        if let Some(c) = self.constant_value() {
            return Ok(other.scale(&c));
        }
        if let Some(c) = other.constant_value() {
            return Ok(self.scale(&c));
        }
        let (an, ad) = self.integer_form();
        let (bn, bd) = other.integer_form();
        let mut acc: FxHashMap<Exponents, BigInt> = FxHashMap::default();
        acc.reserve(self.terms.len().max(other.terms.len()) * 2);
        for (ta, ca) in self.terms.iter().zip(&an) {
            for (tb, cb) in other.terms.iter().zip(&bn) {
                let exp: Exponents = ta.exp.iter().zip(&tb.exp).map(|(x, y)| x + y).collect();
                let prod = ca * cb;
                match acc.get_mut(&exp) {
                    Some(v) => *v += prod,
                    None => {
                        acc.insert(exp, prod);
                    }
                }
            }
        }
        let den = ad * bd;
        let mut terms: Vec<Term> = acc
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(exp, c)| Term {
                deg: exp.iter().map(|&e| e as u32).sum(),
                exp,
                coeff: BigRational::new(c, den.clone()),
            })
            .collect();
        terms.sort_unstable_by(|a, b| b.cmp_monomial(a));
        Ok(Poly {
            vars: self.vars.clone(),
            terms,
        })
    }

    pub fn pow(&self, n: u32) -> Result<Poly, RatFuncError> {
        if n == 0 {
            return Ok(Poly::one(&self.vars));
        }
        check_cap(self.total_degree() as u64 * n as u64)?;
        let mut result = Poly::one(&self.vars);
        let mut base = self.clone();
        let mut e = n;
        loop {
            if e & 1 == 1 {
                result = result.mul(&base)?;
            }
            e >>= 1;
            if e == 0 {
                break;
            }
            base = base.mul(&base)?;
        }
        Ok(result)
    }

    /// Partial derivative with respect to the variable at `var`.
    pub fn derivative(&self, var: usize) -> Poly {
        // Lowering one exponent in every surviving term keeps the order intact.
        let terms = self
            .terms
            .iter()
            .filter(|t| t.exp[var] > 0)
            .map(|t| {
                let mut exp = t.exp.clone();
                let e = exp[var];
                exp[var] -= 1;
                Term {
                    deg: t.deg - 1,
                    exp,
                    coeff: &t.coeff * BigRational::from_integer(BigInt::from(e)),
                }
            })
            .collect();
        Poly {
            vars: self.vars.clone(),
            terms,
        }
    }

    /// Term-by-term antiderivative in `var` with zero constant of integration.
    pub fn antiderivative(&self, var: usize) -> Result<Poly, RatFuncError> {
        check_cap(self.total_degree() as u64 + 1)?;
        Ok(Poly::from_terms(
            &self.vars,
            self.terms.iter().map(|t| {
                let mut exp = t.exp.clone();
                exp[var] += 1;
                let k = BigRational::from_integer(BigInt::from(exp[var]));
                (exp, &t.coeff / k)
            }),
        ))
    }

    /// The polynomial with `var` set to zero.
    pub fn at_zero(&self, var: usize) -> Poly {
        Poly {
            vars: self.vars.clone(),
            terms: self.terms.iter().filter(|t| t.exp[var] == 0).cloned().collect(),
        }
    }

    /// Exponent-wise minimum over all terms (the monomial content).
    pub fn monomial_gcd(&self) -> Exponents {
        let mut it = self.terms.iter();
        let Some(first) = it.next() else {
            return SmallVec::from_elem(0, self.vars.len());
        };
        let mut g = first.exp.clone();
        for t in it {
            for (gi, ei) in g.iter_mut().zip(&t.exp) {
                *gi = (*gi).min(*ei);
            }
        }
        g
    }

    /// Divides every term by the monomial `m`, which must divide all of them.
    pub fn divide_monomial(&self, m: &[u16]) -> Poly {
        let mdeg: u32 = m.iter().map(|&e| e as u32).sum();
        if mdeg == 0 {
            return self.clone();
        }
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                deg: t.deg - mdeg,
                exp: t.exp.iter().zip(m).map(|(e, d)| e - d).collect(),
                coeff: t.coeff.clone(),
            })
            .collect();
        Poly {
            vars: self.vars.clone(),
            terms,
        }
    }

    /// Exact quotient `self / divisor` when the division leaves no remainder.
    pub fn divide_exact(&self, divisor: &Poly) -> Option<Poly> {
        if same_table(&self.vars, &divisor.vars).is_err() || divisor.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Poly::zero(&self.vars));
        }
        if let Some(c) = divisor.constant_value() {
            return Some(self.scale(&c.recip()));
        }
        let lead = &divisor.terms[0];
        let trail = divisor.terms.last().unwrap();
        let divides = |big: &[u16], small: &[u16]| big.iter().zip(small).all(|(b, s)| b >= s);
        // Leading and trailing terms of a product are products of leading and trailing terms.
        if !divides(&self.terms[0].exp, &lead.exp)
            || !divides(&self.terms.last().unwrap().exp, &trail.exp)
        {
            return None;
        }
        for v in 0..self.vars.len() {
            if divisor.degree_in(v) > self.degree_in(v) {
                return None;
            }
        }
        let mut rem: BTreeMap<(u32, Exponents), BigRational> = self
            .terms
            .iter()
            .map(|t| ((t.deg, t.exp.clone()), t.coeff.clone()))
            .collect();
        let mut quotient: Vec<Term> = Vec::new();
        let lead_inv = lead.coeff.recip();
        while let Some(((deg, exp), c)) = rem.pop_last() {
            if !divides(&exp, &lead.exp) {
                return None;
            }
            let qexp: Exponents = exp.iter().zip(&lead.exp).map(|(a, b)| a - b).collect();
            let qdeg = deg - lead.deg;
            let qc = &c * &lead_inv;
            for t in &divisor.terms[1..] {
                let e: Exponents = t.exp.iter().zip(&qexp).map(|(a, b)| a + b).collect();
                let key = (t.deg + qdeg, e);
                let delta = &t.coeff * &qc;
                match rem.get_mut(&key) {
                    Some(v) => {
                        *v -= delta;
                        if v.is_zero() {
                            rem.remove(&key);
                        }
                    }
                    None => {
                        rem.insert(key, -delta);
                    }
                }
            }
            quotient.push(Term {
                deg: qdeg,
                exp: qexp,
                coeff: qc,
            });
        }
        // Quotient terms were produced in strictly descending order.
        Some(Poly {
            vars: self.vars.clone(),
            terms: quotient,
        })
    }

    /// Rewrites the polynomial over another table through an index map
    /// (`map[i]` is the new index of old variable `i`).
    pub fn relabel(&self, target: &Arc<VarTable>, map: &[usize]) -> Poly {
        assert_eq!(map.len(), self.vars.len());
        Poly::from_terms(
            target,
            self.terms.iter().map(|t| {
                let mut exp: Exponents = SmallVec::from_elem(0, target.len());
                for (i, &e) in t.exp.iter().enumerate() {
                    exp[map[i]] += e;
                }
                (exp, t.coeff.clone())
            }),
        )
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::print::poly_to_string(self))
    }
}
