//! Trigonometric simplification and rewriting of trigonometric and
//! hyperbolic functions in terms of one another.

use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive};

use crate::expr::{Expr, Operator};

/// Largest integer exponent distributed over a product while flattening.
const MAX_FLATTEN_POWER: i64 = 8;

/// A product as a signed integer coefficient times factors with integer
/// exponents.
struct Product {
    negative: bool,
    factors: Vec<(Expr, i64)>,
}

impl Product {
    fn push(&mut self, e: &Expr, k: i64) {
        match self.factors.iter_mut().find(|(f, _)| f == e) {
            Some((_, m)) => *m += k,
            None => self.factors.push((e.clone(), k)),
        }
    }

    fn flatten(&mut self, e: &Expr, k: i64) {
        use Operator::*;
        match e {
            Expr::Op(Mul, c) if c.len() == 2 => {
                self.flatten(&c[0], k);
                self.flatten(&c[1], k);
            }
            Expr::Op(Div, c) if c.len() == 2 => {
                self.flatten(&c[0], k);
                self.flatten(&c[1], -k);
            }
            Expr::Op(Neg, c) if c.len() == 1 => {
                if k % 2 != 0 {
                    self.negative = !self.negative;
                }
                self.flatten(&c[0], k);
            }
            Expr::Op(Pow, c) if c.len() == 2 => match c[1].as_int().and_then(ToPrimitive::to_i64) {
                Some(m) if m != 0 && m.abs() <= MAX_FLATTEN_POWER && (k * m).abs() <= 64 => self.flatten(&c[0], k * m),
                _ => self.push(e, k),
            },
            Expr::Int(n) if n.is_negative() => {
                if k % 2 != 0 {
                    self.negative = !self.negative;
                }
                self.push(&Expr::Int(-n), k);
            }
            _ => self.push(e, k),
        }
    }
}

fn powered(base: Expr, k: i64) -> Expr {
    if k == 1 {
        base
    } else {
        Expr::pow(base, Expr::int(k))
    }
}

/// Factors with integer exponents.
type Powers = Vec<(Expr, i64)>;

/// Expresses `sin(u)^s * cos(u)^c` with the fewest trigonometric factors,
/// as numerator and denominator powers.
fn recombine(u: &Expr, s: i64, c: i64) -> (Powers, Powers) {
    use Operator::*;
    let f = |op| Expr::unary(op, u.clone());
    let mut num = Vec::new();
    let mut den = Vec::new();
    let mut put = |op, k: i64| {
        if k > 0 {
            num.push((f(op), k));
        } else if k < 0 {
            den.push((f(op), -k));
        }
    };
    match (s.signum(), c.signum()) {
        (1, -1) => {
            let t = s.min(-c);
            put(Tan, t);
            put(Sin, s - t);
            put(Sec, -c - t);
        }
        (-1, 1) => {
            let t = (-s).min(c);
            put(Cot, t);
            put(Csc, -s - t);
            put(Cos, c - t);
        }
        _ => {
            if s >= 0 {
                put(Sin, s);
            } else {
                put(Csc, -s);
            }
            if c >= 0 {
                put(Cos, c);
            } else {
                put(Sec, -c);
            }
        }
    }
    (num, den)
}

/// Exponents of `sin(u)` and `cos(u)` contributed by one trigonometric
/// factor.
fn sin_cos_exponents(op: Operator) -> Option<(i64, i64)> {
    use Operator::*;
    Some(match op {
        Sin => (1, 0),
        Cos => (0, 1),
        Tan => (1, -1),
        Cot => (-1, 1),
        Sec => (0, -1),
        Csc => (-1, 0),
        _ => return None,
    })
}

fn trig_product(e: &Expr) -> Option<Expr> {
    if !matches!(e, Expr::Op(Operator::Mul | Operator::Div, _)) {
        return None;
    }
    let mut p = Product { negative: false, factors: Vec::new() };
    p.flatten(e, 1);

    // (argument, sin exponent, cos exponent, number of distinct factors)
    let mut groups: Vec<(Expr, i64, i64, usize)> = Vec::new();
    let mut others: Vec<(Expr, i64)> = Vec::new();
    for (f, k) in p.factors {
        if k == 0 {
            continue;
        }
        let trig = match &f {
            Expr::Op(op, c) if c.len() == 1 => sin_cos_exponents(*op).map(|se| (c[0].clone(), se)),
            _ => None,
        };
        match trig {
            Some((u, (ds, dc))) => match groups.iter_mut().find(|g| g.0 == u) {
                Some(g) => {
                    g.1 += ds * k;
                    g.2 += dc * k;
                    g.3 += 1;
                }
                None => groups.push((u, ds * k, dc * k, 1)),
            },
            None => others.push((f, k)),
        }
    }
    if !groups.iter().any(|g| g.3 >= 2) {
        return None;
    }

    let mut num: Vec<(Expr, i64)> = Vec::new();
    let mut den: Vec<(Expr, i64)> = Vec::new();
    let mut coefficient = BigInt::one();
    for (f, k) in others {
        match (&f, k > 0) {
            (Expr::Int(n), true) if k <= 16 => coefficient *= num_traits::pow(n.clone(), k as usize),
            (_, true) => num.push((f, k)),
            (_, false) => den.push((f, -k)),
        }
    }
    for (u, s, c, _) in &groups {
        let (n, d) = recombine(u, *s, *c);
        num.extend(n);
        den.extend(d);
    }
    let mut numerator: Vec<Expr> = Vec::new();
    if !coefficient.is_one() || num.is_empty() {
        numerator.push(Expr::Int(coefficient));
    }
    numerator.extend(num.into_iter().map(|(f, k)| powered(f, k)));
    let top = numerator.into_iter().reduce(Expr::mul).expect("non-empty");
    let body = match den.into_iter().map(|(f, k)| powered(f, k)).reduce(Expr::mul) {
        Some(bottom) => Expr::div(top, bottom),
        None => top,
    };
    Some(if p.negative { Expr::neg(body) } else { body })
}

fn square_of(e: &Expr, op: Operator) -> Option<&Expr> {
    let (base, k) = e.binary_args(Operator::Pow)?;
    if !k.is_int(2) {
        return None;
    }
    base.unary_arg(op)
}

fn square(op: Operator, u: &Expr) -> Expr {
    Expr::pow(Expr::unary(op, u.clone()), Expr::int(2))
}

/// Pythagorean identities on a two-term sum, in either operand order.
fn pythagorean_sum(e: &Expr) -> Option<Expr> {
    use Operator::*;
    let (a, b) = e.binary_args(Add)?;
    for (l, r) in [(a, b), (b, a)] {
        if let (Some(u), Some(v)) = (square_of(l, Sin), square_of(r, Cos)) {
            if u == v {
                return Some(Expr::int(1));
            }
        }
        if l.is_int(1) {
            if let Some(m) = r.unary_arg(Neg) {
                if let Some(u) = square_of(m, Sin) {
                    return Some(square(Cos, u));
                }
                if let Some(u) = square_of(m, Cos) {
                    return Some(square(Sin, u));
                }
            }
            if let Some(u) = square_of(r, Tan) {
                return Some(square(Sec, u));
            }
            if let Some(u) = square_of(r, Cot) {
                return Some(square(Csc, u));
            }
        }
        if let Some(m) = r.unary_arg(Neg) {
            for (pos, sub) in [(Sec, Tan), (Csc, Cot)] {
                if let (Some(u), Some(v)) = (square_of(l, pos), square_of(m, sub)) {
                    if u == v {
                        return Some(Expr::int(1));
                    }
                }
            }
        }
    }
    None
}

/// Combines trigonometric factors sharing an argument and applies the
/// Pythagorean identities.
pub(crate) fn trigsimp(e: &Expr) -> Option<Expr> {
    let out = pythagorean_sum(e).or_else(|| trig_product(e))?;
    (out != *e).then_some(out)
}

fn half(u: &Expr) -> Expr {
    Expr::div(u.clone(), Expr::int(2))
}

fn half_pi() -> Expr {
    Expr::div(Expr::pi(), Expr::int(2))
}

fn recip(e: Expr) -> Expr {
    Expr::pow(e, Expr::int(-1))
}

/// `2 t / (1 - t^2)` or `2 t / (1 + t^2)` with `t = f(u/2)`.
fn half_angle_sin(f: Operator, u: &Expr, minus: bool) -> Expr {
    let t = Expr::unary(f, half(u));
    let t2 = Expr::pow(t.clone(), Expr::int(2));
    let denom = Expr::add(Expr::int(1), if minus { Expr::neg(t2) } else { t2 });
    Expr::mul(Expr::mul(Expr::int(2), t), recip(denom))
}

/// `(1 + t^2) / (1 - t^2)` or `(1 - t^2) / (1 + t^2)` with `t = f(u/2)`.
fn half_angle_cos(f: Operator, u: &Expr, hyperbolic: bool) -> Expr {
    let t2 = Expr::pow(Expr::unary(f, half(u)), Expr::int(2));
    let plus = Expr::add(Expr::int(1), t2.clone());
    let minus = Expr::add(Expr::int(1), Expr::neg(t2));
    if hyperbolic {
        Expr::mul(plus, recip(minus))
    } else {
        Expr::mul(minus, recip(plus))
    }
}

/// Rewrites the trigonometric function at the root of `e` in terms of
/// `target`.
pub(crate) fn rewrite_trig(e: &Expr, target: Operator) -> Option<Expr> {
    use Operator::*;
    let Expr::Op(op, c) = e else { return None };
    let [u] = c.as_slice() else { return None };
    let f = |g| Expr::unary(g, u.clone());
    let out = match (*op, target) {
        (Sin, Cos) => Expr::unary(Cos, Expr::add(u.clone(), Expr::neg(half_pi()))),
        (Cos, Sin) => Expr::unary(Sin, Expr::add(u.clone(), half_pi())),
        (Tan, Sin | Cos) => Expr::div(f(Sin), f(Cos)),
        (Cot, Sin | Cos) => Expr::div(f(Cos), f(Sin)),
        (Sec, Cos) => recip(f(Cos)),
        (Csc, Sin) => recip(f(Sin)),
        (Sin, Csc) => recip(f(Csc)),
        (Cos, Sec) => recip(f(Sec)),
        (Tan, Cot) => recip(f(Cot)),
        (Cot, Tan) => recip(f(Tan)),
        (Sin, Tan) => half_angle_sin(Tan, u, false),
        (Cos, Tan) => half_angle_cos(Tan, u, false),
        _ => return None,
    };
    Some(out)
}

/// Rewrites the hyperbolic function (or exponential) at the root of `e` in
/// terms of `target`.
pub(crate) fn rewrite_hyp(e: &Expr, target: Operator) -> Option<Expr> {
    use Operator::*;
    let Expr::Op(op, c) = e else { return None };
    let [u] = c.as_slice() else { return None };
    let f = |g| Expr::unary(g, u.clone());
    let exp_pos = || Expr::unary(Exp, u.clone());
    let exp_neg = || Expr::unary(Exp, Expr::neg(u.clone()));
    let out = match (*op, target) {
        (Sinh, Exp) => Expr::div(Expr::add(exp_pos(), Expr::neg(exp_neg())), Expr::int(2)),
        (Cosh, Exp) => Expr::div(Expr::add(exp_pos(), exp_neg()), Expr::int(2)),
        (Tanh, Exp) => Expr::div(Expr::add(exp_pos(), Expr::neg(exp_neg())), Expr::add(exp_pos(), exp_neg())),
        (Coth, Exp) => Expr::div(Expr::add(exp_pos(), exp_neg()), Expr::add(exp_pos(), Expr::neg(exp_neg()))),
        (Sinh, Tanh) => half_angle_sin(Tanh, u, true),
        (Cosh, Tanh) => half_angle_cos(Tanh, u, true),
        (Tanh, Sinh | Cosh) => Expr::div(f(Sinh), f(Cosh)),
        (Coth, Sinh | Cosh) => Expr::div(f(Cosh), f(Sinh)),
        (Tanh, Coth) => recip(f(Coth)),
        (Coth, Tanh) => recip(f(Tanh)),
        (Exp, Sinh | Cosh) => Expr::add(f(Sinh), f(Cosh)),
        _ => return None,
    };
    Some(out)
}
