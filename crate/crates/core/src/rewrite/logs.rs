//! Logarithm expansion and combination.

use alloc::vec::Vec;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::expr::{Expr, Operator};

/// Conservative test for `e > 0` at every positive real `x` where `e` is
/// defined.
pub(crate) fn is_positive(e: &Expr) -> bool {
    use Operator::*;
    match e {
        Expr::Var | Expr::Const(_) => true,
        Expr::Int(n) => n.is_positive(),
        Expr::Op(Exp | Cosh, _) => true,
        Expr::Op(Sqrt | Sinh | Tanh | Atan | Asinh, c) => is_positive(&c[0]),
        Expr::Op(Add | Mul | Div, c) => c.iter().all(is_positive),
        Expr::Op(Pow, c) => is_positive(&c[0]),
        _ => false,
    }
}

/// Splits a logarithm of a product, quotient or power into a sum of
/// logarithms when the arguments are known positive.
pub(crate) fn expand_log(e: &Expr) -> Option<Expr> {
    use Operator::*;
    let arg = e.unary_arg(Ln)?;
    let ln = |a: &Expr| Expr::unary(Ln, a.clone());
    match arg {
        Expr::Op(Mul, c) if c.iter().all(is_positive) => Some(Expr::add(ln(&c[0]), ln(&c[1]))),
        Expr::Op(Div, c) if c.iter().all(is_positive) => Some(Expr::sub(ln(&c[0]), ln(&c[1]))),
        Expr::Op(Pow, c) if is_positive(&c[0]) => Some(Expr::mul(c[1].clone(), ln(&c[0]))),
        // ln(a^(2m)) = 2m ln|a| for a != 0
        Expr::Op(Pow, c) if c[1].as_int().is_some_and(|k| k.is_positive() && k.is_even()) => {
            Some(Expr::mul(c[1].clone(), ln(&Expr::unary(Abs, c[0].clone()))))
        }
        Expr::Op(Sqrt, c) if is_positive(&c[0]) => Some(Expr::div(ln(&c[0]), Expr::int(2))),
        Expr::Op(Exp, c) => Some(c[0].clone()),
        _ => None,
    }
}

/// A term of a sum read as `k * ln(a)`.
fn log_term(e: &Expr) -> Option<(BigInt, &Expr)> {
    use Operator::*;
    if let Some(a) = e.unary_arg(Ln) {
        return Some((BigInt::one(), a));
    }
    if let Some(inner) = e.unary_arg(Neg) {
        let (k, a) = log_term(inner)?;
        return Some((-k, a));
    }
    let (l, r) = e.binary_args(Mul)?;
    match (l, r) {
        (Expr::Int(k), other) | (other, Expr::Int(k)) if !k.is_zero() => Some((k.clone(), other.unary_arg(Ln)?)),
        _ => None,
    }
}

fn flatten_sum<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
    match e.binary_args(Operator::Add) {
        Some((a, b)) => {
            flatten_sum(a, out);
            flatten_sum(b, out);
        }
        None => out.push(e),
    }
}

/// Merges the logarithmic terms of a sum (or a single integer multiple of a
/// logarithm) into one logarithm.
pub(crate) fn logcombine(e: &Expr) -> Option<Expr> {
    let mut terms = Vec::new();
    flatten_sum(e, &mut terms);
    let logs: Vec<(usize, BigInt, &Expr)> =
        terms.iter().enumerate().filter_map(|(i, t)| log_term(t).map(|(k, a)| (i, k, a))).collect();
    let applicable = logs.len() >= 2 || (logs.len() == 1 && !logs[0].1.is_one());
    if !applicable {
        return None;
    }
    let power = |a: &Expr, k: &BigInt| -> Option<Expr> {
        let k = k.abs();
        if k.is_one() {
            Some(a.clone())
        } else {
            Some(Expr::pow(a.clone(), Expr::Int(k.to_i64().filter(|v| *v <= 64)?.into())))
        }
    };
    let mut num: Vec<Expr> = Vec::new();
    let mut den: Vec<Expr> = Vec::new();
    for (_, k, a) in &logs {
        let f = power(a, k)?;
        if k.is_positive() {
            num.push(f);
        } else {
            den.push(f);
        }
    }
    // Constant factors lead, as in `2*x`.
    num.sort_by_key(|f| !f.is_constant());
    den.sort_by_key(|f| !f.is_constant());
    let top = num.into_iter().reduce(Expr::mul).unwrap_or_else(|| Expr::int(1));
    let arg = match den.into_iter().reduce(Expr::mul) {
        Some(bottom) => Expr::div(top, bottom),
        None => top,
    };
    let combined = Expr::unary(Operator::Ln, arg);
    let first = logs[0].0;
    let rest = terms
        .iter()
        .enumerate()
        .filter(|(i, _)| *i == first || !logs.iter().any(|(j, _, _)| j == i))
        .map(|(i, t)| if i == first { combined.clone() } else { (*t).clone() });
    let out = rest.reduce(Expr::add).expect("at least one term");
    (out != *e).then_some(out)
}
