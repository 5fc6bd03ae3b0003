use num_traits::{One, Signed};

use super::{Poly, RatFunc};

/// Canonical text in descending graded-lexicographic order; the output is
/// accepted by [`super::parse_expr`].
pub fn poly_to_string(p: &Poly) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    let vars = p.vars();
    let mut out = String::new();
    for (k, (exp, c)) in p.terms().enumerate() {
        let neg = c.is_negative();
        if k == 0 {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        let mag = c.abs();
        let mut factors: Vec<String> = Vec::new();
        let is_monomial_free = exp.iter().all(|&e| e == 0);
        if !mag.is_one() || is_monomial_free {
            if mag.is_integer() {
                factors.push(mag.numer().to_string());
            } else {
                factors.push(format!("{}/{}", mag.numer(), mag.denom()));
            }
        }
        for (i, &e) in exp.iter().enumerate() {
            match e {
                0 => {}
                1 => factors.push(vars.name(i).to_string()),
                _ => factors.push(format!("{}^{}", vars.name(i), e)),
            }
        }
        out.push_str(&factors.join("*"));
    }
    out
}

pub fn ratfunc_to_string(f: &RatFunc) -> String {
    if f.den().is_one() {
        poly_to_string(f.num())
    } else {
        format!("({})/({})", poly_to_string(f.num()), poly_to_string(f.den()))
    }
}
