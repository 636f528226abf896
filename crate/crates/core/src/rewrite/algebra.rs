//! Polynomial rules: expand, factor, cancel.

use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::{One, Signed};

use super::poly::{monomial_expr, MultiPoly, UPoly};
use crate::expr::{Expr, Operator};

fn expand_deep(e: &Expr) -> Expr {
    let mut hook = |atom: &Expr| match atom {
        Expr::Op(op, c) => Expr::Op(*op, c.iter().map(expand_deep).collect()),
        other => other.clone(),
    };
    MultiPoly::from_expr_with(e, &mut hook).map_or_else(|| e.clone(), |p| p.to_expr())
}

/// Distributes products over sums and expands small integer powers of
/// sums, everywhere in the tree.
pub(crate) fn expand(e: &Expr) -> Option<Expr> {
    let out = expand_deep(e);
    (out != *e).then_some(out)
}

fn product(factors: Vec<Expr>) -> Option<Expr> {
    factors.into_iter().reduce(Expr::mul)
}

/// Splits a univariate primitive polynomial into linear factors over the
/// rationals and a remaining factor without rational roots.
fn split_rational(p: &UPoly) -> Vec<(UPoly, u32)> {
    let mut cur = p.clone();
    let mut out: Vec<(UPoly, u32)> = Vec::new();
    for (num, den) in p.rational_roots() {
        let lin = UPoly::new(alloc::vec![-num, den]);
        let mut mult = 0;
        while let Some(q) = cur.div_exact(&lin) {
            cur = q;
            mult += 1;
        }
        if mult > 0 {
            out.push((lin, mult));
        }
    }
    out.sort_by(|a, b| a.0.coeffs().cmp(b.0.coeffs()));
    if cur.degree() > 0 {
        out.push((cur, 1));
    }
    out
}

/// Pulls out the integer content, the common monomial and, for polynomials
/// in `x` alone, every linear factor with a rational root.
pub(crate) fn factor(e: &Expr) -> Option<Expr> {
    let p = MultiPoly::from_expr(e)?;
    if p.terms().count() < 2 {
        return None;
    }
    let (mono, mut content) = p.common_factor();
    // Sign follows the leading term of the canonical ordering.
    if first_term_negative(&p.to_expr()) {
        content = -content;
    }
    let rest = p.div_monomial(&mono, &content);
    let mut factors: Vec<Expr> = Vec::new();
    if content.abs() > BigInt::one() {
        factors.push(Expr::Int(content.abs()));
    }
    factors.extend(mono.iter().map(|m| monomial_expr(&alloc::vec![m.clone()]).expect("non-empty")));
    let mut count = factors.len() + usize::from(content.is_negative());
    match rest.as_univariate() {
        Some(u) => {
            for (f, mult) in split_rational(&u) {
                let fe = f.to_expr();
                factors.push(if mult == 1 { fe } else { Expr::pow(fe, Expr::int(mult as i64)) });
                count += 1;
            }
        }
        None => {
            factors.push(rest.to_expr());
            count += 1;
        }
    }
    if count < 2 {
        return None;
    }
    let body = product(factors)?;
    let out = if content.is_negative() { Expr::neg(body) } else { body };
    (out != *e).then_some(out)
}

fn first_term_negative(e: &Expr) -> bool {
    let mut cur = e;
    while let Some((l, _)) = cur.binary_args(Operator::Add) {
        cur = l;
    }
    match cur {
        Expr::Int(n) => n.is_negative(),
        Expr::Op(Operator::Neg, _) => true,
        Expr::Op(Operator::Mul, c) => matches!(&c[0], Expr::Int(n) if n.is_negative()),
        _ => false,
    }
}

/// Removes common factors from numerator and denominator of a quotient.
pub(crate) fn cancel(e: &Expr) -> Option<Expr> {
    let (n, d) = e.binary_args(Operator::Div)?;
    let np = MultiPoly::from_expr(n)?;
    let dp = MultiPoly::from_expr(d)?;
    if np.is_zero() || dp.is_zero() {
        return None;
    }
    let (num, den) = match (np.as_univariate(), dp.as_univariate()) {
        (Some(nu), Some(du)) => {
            let g = nu.gcd(&du);
            if g.degree() == 0 && g.lead().is_one() {
                return None;
            }
            let (mut nq, mut dq) = (nu.div_exact(&g)?, du.div_exact(&g)?);
            if dq.lead().is_negative() {
                nq = nq.neg();
                dq = dq.neg();
            }
            (nq.to_multi(), dq.to_multi())
        }
        _ => {
            let (mn, cn) = np.common_factor();
            let (md, cd) = dp.common_factor();
            let mono: Vec<_> = mn
                .iter()
                .filter_map(|(a, e)| md.iter().find(|(b, _)| b == a).map(|(_, k)| (a.clone(), (*e).min(*k))))
                .collect();
            let c = num_integer::Integer::gcd(&cn, &cd);
            if mono.is_empty() && c.is_one() {
                return None;
            }
            (np.div_monomial(&mono, &c), dp.div_monomial(&mono, &c))
        }
    };
    let den_expr = den.to_expr();
    let out = if den_expr.is_int(1) {
        num.to_expr()
    } else if den_expr.is_int(-1) {
        Expr::neg(num.to_expr())
    } else {
        Expr::div(num.to_expr(), den_expr)
    };
    (out != *e).then_some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        s.parse().unwrap()
    }

    #[test]
    fn expand_square() {
        assert_eq!(expand(&p("pow add x INT+ 1 INT+ 2")), Some(p("add add pow x INT+ 2 mul INT+ 2 x INT+ 1")));
        assert_eq!(expand(&p("sin pow add x INT+ 1 INT+ 2")), Some(p("sin add add pow x INT+ 2 mul INT+ 2 x INT+ 1")));
        assert_eq!(expand(&p("add x INT+ 1")), None);
    }

    #[test]
    fn factor_quadratic() {
        let e = p("add add pow x INT+ 2 mul INT+ 5 x INT+ 6");
        assert_eq!(factor(&e), Some(p("mul add x INT+ 2 add x INT+ 3")));
        // 2x^2 - 2 = 2(x - 1)(x + 1)
        assert_eq!(
            factor(&p("add mul INT+ 2 pow x INT+ 2 INT- 2")),
            Some(p("mul mul INT+ 2 add x INT- 1 add x INT+ 1"))
        );
        // common monomial over a non-polynomial atom
        assert_eq!(factor(&p("add mul x sin x sin x")), Some(p("mul sin x add x INT+ 1")));
        assert_eq!(factor(&p("add pow x INT+ 2 INT+ 1")), None);
        assert_eq!(factor(&p("add neg x INT- 1")), Some(p("neg add x INT+ 1")));
    }

    #[test]
    fn cancel_quotient() {
        let e = p("div add pow x INT+ 3 mul INT+ 2 x x");
        assert_eq!(cancel(&e), Some(p("add pow x INT+ 2 INT+ 2")));
        assert_eq!(cancel(&p("div add pow x INT+ 2 INT- 1 add x INT+ 1")), Some(p("add x INT- 1")));
        assert_eq!(cancel(&p("div x add x INT+ 1")), None);
        assert_eq!(cancel(&p("div mul INT+ 4 sin x mul INT+ 2 cos x")), Some(p("div mul INT+ 2 sin x cos x")));
    }
}
