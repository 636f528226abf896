//! Local simplification rules applied to a fixed point.
//!
//! Every rule strictly shrinks the tree, so the process terminates, never
//! increases the node count and is idempotent.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::expr::{Expr, Operator};

/// Largest bit length produced by folding `pow` over integer literals.
const MAX_FOLD_BITS: u64 = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("simplification step budget exhausted")]
pub struct BudgetExhausted;

/// Simplifies to a fixed point of the local rule set.
pub fn simplify_basic(expr: &Expr) -> Expr {
    simplify_bounded(expr, usize::MAX).expect("unbounded budget")
}

/// Like [`simplify_basic`], but gives up after `max_steps` rule firings.
pub fn simplify_bounded(expr: &Expr, max_steps: usize) -> Result<Expr, BudgetExhausted> {
    let mut s = Simplifier { steps: 0, budget: max_steps };
    let mut current = expr.clone();
    loop {
        let before = s.steps;
        current = s.pass(&current)?;
        if s.steps == before {
            return Ok(current);
        }
    }
}

struct Simplifier {
    steps: usize,
    budget: usize,
}

impl Simplifier {
    fn pass(&mut self, expr: &Expr) -> Result<Expr, BudgetExhausted> {
        let mut node = match expr {
            Expr::Op(op, children) => {
                Expr::Op(*op, children.iter().map(|c| self.pass(c)).collect::<Result<Vec<_>, _>>()?)
            }
            leaf => return Ok(leaf.clone()),
        };
        while let Some(next) = local(&node) {
            if self.steps >= self.budget {
                return Err(BudgetExhausted);
            }
            self.steps += 1;
            node = next;
        }
        Ok(node)
    }
}

fn int(n: BigInt) -> Expr {
    Expr::Int(n)
}

fn is_square_of(e: &Expr, op: Operator) -> Option<&Expr> {
    let (base, exp) = e.binary_args(Operator::Pow)?;
    if !exp.is_int(2) {
        return None;
    }
    base.unary_arg(op)
}

fn pythagorean(a: &Expr, b: &Expr) -> bool {
    match (is_square_of(a, Operator::Sin), is_square_of(b, Operator::Cos)) {
        (Some(u), Some(v)) if u == v => return true,
        _ => {}
    }
    matches!((is_square_of(a, Operator::Cos), is_square_of(b, Operator::Sin)), (Some(u), Some(v)) if u == v)
}

fn fold_pow(base: &BigInt, exp: &BigInt) -> Option<BigInt> {
    let e = exp.to_u32()?;
    if base.bits().saturating_mul(e as u64) > MAX_FOLD_BITS {
        return None;
    }
    Some(num_traits::pow(base.clone(), e as usize))
}

/// One rewrite at the root of `e`, assuming its children are already
/// simplified.
fn local(e: &Expr) -> Option<Expr> {
    use Operator::*;
    let Expr::Op(op, c) = e else { return None };
    match (op, c.as_slice()) {
        (Neg, [Expr::Int(n)]) => Some(int(-n)),
        (Neg, [inner]) => inner.unary_arg(Neg).cloned(),

        (Add, [Expr::Int(a), Expr::Int(b)]) => Some(int(a + b)),
        (Add, [a, b]) if a.is_int(0) => Some(b.clone()),
        (Add, [a, b]) if b.is_int(0) => Some(a.clone()),
        (Add, [a, b]) if b.unary_arg(Neg) == Some(a) || a.unary_arg(Neg) == Some(b) => Some(Expr::int(0)),
        (Add, [a, b]) if pythagorean(a, b) => Some(Expr::int(1)),
        (Add | Mul, [a, b]) => nested_constants(*op, a, b),

        (Div, [a, b]) if b.is_int(1) => Some(a.clone()),
        (Div, [a, b]) if b.is_int(-1) => Some(Expr::neg(a.clone())),
        (Div, [Expr::Int(a), Expr::Int(b)]) if !b.is_zero() && a.is_multiple_of(b) => Some(int(a / b)),

        (Pow, [a, b]) if b.is_int(1) => Some(a.clone()),
        (Pow, [_, b]) if b.is_int(0) => Some(Expr::int(1)),
        (Pow, [Expr::Int(a), Expr::Int(b)]) => fold_pow(a, b).map(int),

        (Ln, [a]) if a.is_int(1) => Some(Expr::int(0)),
        (Exp, [a]) if a.is_int(0) => Some(Expr::int(1)),
        (Abs, [Expr::Int(n)]) => Some(int(n.abs())),
        (Sqrt, [Expr::Int(n)]) if !n.is_negative() => {
            let r = n.sqrt();
            (&r * &r == *n).then(|| int(r))
        }
        _ => None,
    }
}

fn fold(op: Operator, a: &BigInt, b: &BigInt) -> BigInt {
    if op == Operator::Add {
        a + b
    } else {
        a * b
    }
}

/// Identities, absorbing elements and collapse of nested literal operands
/// for `add` and `mul`.
fn nested_constants(op: Operator, a: &Expr, b: &Expr) -> Option<Expr> {
    use Operator::*;
    if let (Expr::Int(x), Expr::Int(y)) = (a, b) {
        return Some(int(fold(op, x, y)));
    }
    if op == Mul {
        if a.is_int(1) {
            return Some(b.clone());
        }
        if b.is_int(1) {
            return Some(a.clone());
        }
        if a.is_int(0) || b.is_int(0) {
            return Some(Expr::int(0));
        }
        if a.is_int(-1) {
            return Some(Expr::neg(b.clone()));
        }
        if b.is_int(-1) {
            return Some(Expr::neg(a.clone()));
        }
    }
    // (p . c1) . c2, (c1 . p) . c2, c1 . (c2 . p), c1 . (p . c2)
    let pick = |inner: &Expr| -> Option<(Expr, BigInt)> {
        let (l, r) = inner.binary_args(op)?;
        match (l, r) {
            (_, Expr::Int(k)) => Some((l.clone(), k.clone())),
            (Expr::Int(k), _) => Some((r.clone(), k.clone())),
            _ => None,
        }
    };
    let (rest, k1, k2) = match (a, b) {
        (inner, Expr::Int(k2)) => {
            let (rest, k1) = pick(inner)?;
            (rest, k1, k2.clone())
        }
        (Expr::Int(k1), inner) => {
            let (rest, k2) = pick(inner)?;
            (rest, k1.clone(), k2)
        }
        _ => return None,
    };
    let k = fold(op, &k1, &k2);
    Some(if op == Add { Expr::Op(Add, vec![rest, int(k)]) } else { Expr::Op(Mul, vec![int(k), rest]) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        s.parse().unwrap()
    }

    #[test]
    fn pythagorean_identity() {
        assert_eq!(simplify_basic(&p("add pow sin x INT+ 2 pow cos x INT+ 2")), Expr::int(1));
        assert_eq!(simplify_basic(&p("add pow cos mul INT+ 2 x INT+ 2 pow sin mul INT+ 2 x INT+ 2")), Expr::int(1));
        // different arguments do not match
        let e = p("add pow sin x INT+ 2 pow cos ln x INT+ 2");
        assert_eq!(simplify_basic(&e), e);
    }

    #[test]
    fn identity_elements() {
        assert_eq!(simplify_basic(&Expr::mul(Expr::int(1), Expr::x())), Expr::x());
        let cases = [
            ("add x INT+ 0", "x"),
            ("mul INT+ 0 sin x", "INT+ 0"),
            ("div x INT+ 1", "x"),
            ("neg neg x", "x"),
            ("pow x INT+ 1", "x"),
            ("pow sin x INT+ 0", "INT+ 1"),
            ("ln INT+ 1", "INT+ 0"),
            ("exp INT+ 0", "INT+ 1"),
            ("add sin x neg sin x", "INT+ 0"),
            ("add mul INT+ 2 INT+ 3 INT- 1", "INT+ 5"),
            ("add add x INT+ 2 INT+ 3", "add x INT+ 5"),
            ("mul INT+ 2 mul INT+ 3 x", "mul INT+ 6 x"),
            ("mul INT+ 2 mul x INT+ 3", "mul INT+ 6 x"),
            ("add add x INT+ 2 INT- 2", "x"),
            ("pow INT+ 2 INT+ 1 0", "INT+ 1 0 2 4"),
            ("sqrt INT+ 4 9", "INT+ 7"),
            ("neg INT+ 3", "INT- 3"),
            ("mul INT- 1 x", "neg x"),
            ("div INT+ 6 INT+ 3", "INT+ 2"),
        ];
        for (input, expected) in cases {
            assert_eq!(simplify_basic(&p(input)), p(expected), "{input}");
        }
        // no exact integer result
        for keep in ["div INT+ 1 INT+ 2", "sqrt INT+ 2", "pow INT+ 2 INT- 1", "div x INT+ 0"] {
            assert_eq!(simplify_basic(&p(keep)), p(keep), "{keep}");
        }
    }

    #[test]
    fn budget() {
        let e = p("add add add x INT+ 0 INT+ 0 INT+ 0");
        assert_eq!(simplify_bounded(&e, 3), Ok(Expr::x()));
        assert_eq!(simplify_bounded(&e, 2), Err(BudgetExhausted));
    }

    #[test]
    fn big_powers_are_not_folded() {
        let e = Expr::pow(Expr::int(10), Expr::int(1000));
        assert_eq!(simplify_basic(&e), e);
    }
}
