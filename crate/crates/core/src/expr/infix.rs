use core::fmt;

use super::{Expr, NamedConst, Operator};

/// Human-readable infix rendering, for reports. Not parseable.
pub struct Infix<'a>(pub &'a Expr);

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Op(Operator::Add, _) => 1,
        Expr::Op(Operator::Mul | Operator::Div, _) => 2,
        Expr::Op(Operator::Neg, _) => 3,
        Expr::Op(Operator::Pow, _) => 4,
        Expr::Int(n) if n.sign() == num_bigint::Sign::Minus => 3,
        _ => 5,
    }
}

fn child(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if precedence(e) < min {
        write!(f, "({})", Infix(e))
    } else {
        write!(f, "{}", Infix(e))
    }
}

impl fmt::Display for Infix<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Expr::Var => f.write_str("x"),
            Expr::Int(n) => write!(f, "{n}"),
            Expr::Const(NamedConst::Pi) => f.write_str("pi"),
            Expr::Const(NamedConst::E) => f.write_str("e"),
            Expr::Op(op, c) => match (op, c.as_slice()) {
                (Operator::Add, [a, b]) => {
                    child(f, a, 1)?;
                    match b.unary_arg(Operator::Neg) {
                        Some(inner) => {
                            f.write_str(" - ")?;
                            child(f, inner, 2)
                        }
                        None => {
                            f.write_str(" + ")?;
                            child(f, b, 2)
                        }
                    }
                }
                (Operator::Mul, [a, b]) => {
                    child(f, a, 2)?;
                    f.write_str("*")?;
                    child(f, b, 3)
                }
                (Operator::Div, [a, b]) => {
                    child(f, a, 2)?;
                    f.write_str("/")?;
                    child(f, b, 3)
                }
                (Operator::Pow, [a, b]) => {
                    child(f, a, 5)?;
                    f.write_str("^")?;
                    child(f, b, 4)
                }
                (Operator::Neg, [a]) => {
                    f.write_str("-")?;
                    child(f, a, 3)
                }
                (op, args) => {
                    write!(f, "{op}(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            f.write_str(", ")?;
                        }
                        write!(f, "{}", Infix(a))?;
                    }
                    f.write_str(")")
                }
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn renders() {
        let cases = [
            ("div sin x cos x", "sin(x)/cos(x)"),
            ("add x neg INT+ 1", "x - 1"),
            ("mul add x INT+ 2 add x INT+ 3", "(x + 2)*(x + 3)"),
            ("pow add x INT+ 1 INT+ 2", "(x + 1)^2"),
            ("cos add x neg div pi INT+ 2", "cos(x - pi/2)"),
        ];
        for (prefix, infix) in cases {
            let e: Expr = prefix.parse().unwrap();
            assert_eq!(e.infix().to_string(), infix);
        }
    }
}
