use num_traits::ToPrimitive;

use super::{Expr, Operator};

/// Evaluates `expr` at a positive real `x`.
///
/// Returns `None` (undefined) when any subterm leaves an operator's real
/// domain or produces a non-finite value; undefined propagates to the root.
pub fn eval_numeric(expr: &Expr, x: f64) -> Option<f64> {
    match expr {
        Expr::Var => Some(x),
        Expr::Int(n) => n.to_f64().filter(|v| v.is_finite()),
        Expr::Const(c) => Some(c.value()),
        Expr::Op(op, children) => match children.as_slice() {
            [a] => apply_unary(*op, eval_numeric(a, x)?),
            [a, b] => apply_binary(*op, eval_numeric(a, x)?, eval_numeric(b, x)?),
            _ => None,
        },
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn recip(v: f64) -> Option<f64> {
    if v == 0.0 {
        None
    } else {
        finite(1.0 / v)
    }
}

pub(crate) fn apply_unary(op: Operator, a: f64) -> Option<f64> {
    use Operator::*;
    let v = match op {
        Neg => -a,
        Abs => libm::fabs(a),
        Sqrt if a < 0.0 => return None,
        Sqrt => libm::sqrt(a),
        Sin => libm::sin(a),
        Cos => libm::cos(a),
        Tan => libm::tan(a),
        Cot => return recip(libm::tan(a)),
        Sec => return recip(libm::cos(a)),
        Csc => return recip(libm::sin(a)),
        Asin | Acos if !(-1.0..=1.0).contains(&a) => return None,
        Asin => libm::asin(a),
        Acos => libm::acos(a),
        Atan => libm::atan(a),
        Sinh => libm::sinh(a),
        Cosh => libm::cosh(a),
        Tanh => libm::tanh(a),
        Coth => return recip(libm::tanh(a)),
        Asinh => libm::asinh(a),
        Acosh if a < 1.0 => return None,
        Acosh => libm::acosh(a),
        Atanh if a <= -1.0 || a >= 1.0 => return None,
        Atanh => libm::atanh(a),
        Ln if a <= 0.0 => return None,
        Ln => libm::log(a),
        Exp => libm::exp(a),
        Add | Mul | Div | Pow => return None,
    };
    finite(v)
}

pub(crate) fn apply_binary(op: Operator, a: f64, b: f64) -> Option<f64> {
    use Operator::*;
    let v = match op {
        Add => a + b,
        Mul => a * b,
        Div if b == 0.0 => return None,
        Div => a / b,
        Pow => libm::pow(a, b),
        _ => return None,
    };
    finite(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Operator::*;

    fn x() -> Expr {
        Expr::x()
    }

    #[test]
    fn pythagorean_identity() {
        let e =
            Expr::add(Expr::pow(Expr::unary(Sin, x()), Expr::int(2)), Expr::pow(Expr::unary(Cos, x()), Expr::int(2)));
        assert!((eval_numeric(&e, 0.7).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn division_by_zero_is_undefined() {
        let e = Expr::div(x(), Expr::add(x(), Expr::neg(x())));
        for v in [0.1, 1.0, 3.3, 100.0] {
            assert_eq!(eval_numeric(&e, v), None);
        }
    }

    #[test]
    fn ln_two() {
        let e = Expr::unary(Ln, x());
        assert!((eval_numeric(&e, 2.0).unwrap() - core::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn domains() {
        let undefined = [
            Expr::unary(Acosh, Expr::int(0)),
            Expr::unary(Ln, Expr::neg(x())),
            Expr::unary(Sqrt, Expr::int(-1)),
            Expr::unary(Asin, Expr::int(2)),
            Expr::unary(Atanh, Expr::int(1)),
            Expr::unary(Coth, Expr::int(0)),
            Expr::unary(Csc, Expr::int(0)),
            Expr::unary(Exp, Expr::unary(Exp, Expr::int(10))),
            Expr::pow(Expr::int(-2), Expr::div(Expr::int(1), Expr::int(2))),
            Expr::pow(Expr::int(0), Expr::int(-1)),
        ];
        for e in &undefined {
            assert_eq!(eval_numeric(e, 1.5), None, "{e}");
        }
        assert_eq!(eval_numeric(&Expr::pow(Expr::int(-2), Expr::int(3)), 1.0), Some(-8.0));
    }

    #[test]
    fn undefined_is_absorbing() {
        let bad = Expr::unary(Ln, Expr::int(-1));
        for op in Operator::ALL {
            let e = if op.arity() == 1 { Expr::unary(*op, bad.clone()) } else { Expr::binary(*op, x(), bad.clone()) };
            assert_eq!(eval_numeric(&e, 2.0), None, "{op}");
        }
    }
}
