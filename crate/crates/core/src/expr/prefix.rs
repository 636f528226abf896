use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num_bigint::{BigInt, Sign};

use super::{Expr, NamedConst, Operator, Token, TokenSeq};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("token stream ended in the middle of an expression")]
    Truncated,
    #[error("trailing tokens after a complete expression (starting at token {at})")]
    TrailingTokens { at: usize },
    #[error("unknown token `{0}`")]
    UnknownToken(String),
    #[error("malformed integer at token {at}: a sign token needs at least one digit")]
    MalformedInteger { at: usize },
}

/// Serializes an expression in Polish notation.
pub fn to_prefix(expr: &Expr) -> TokenSeq {
    let mut out = Vec::new();
    write_prefix(expr, &mut out);
    TokenSeq(out)
}

fn write_prefix(expr: &Expr, out: &mut Vec<Token>) {
    match expr {
        Expr::Var => out.push(Token::Var),
        Expr::Const(NamedConst::Pi) => out.push(Token::Pi),
        Expr::Const(NamedConst::E) => out.push(Token::Euler),
        Expr::Int(n) => {
            out.push(if n.sign() == Sign::Minus { Token::IntNeg } else { Token::IntPos });
            let digits = n.magnitude().to_str_radix(10);
            out.extend(digits.bytes().map(|b| Token::Digit(b - b'0')));
        }
        Expr::Op(op, children) => {
            out.push(Token::Op(*op));
            for child in children {
                write_prefix(child, out);
            }
        }
    }
}

/// Parses a Polish-notation token list into a tree. Exactly one complete
/// expression must be present.
pub fn parse_prefix(tokens: &[Token]) -> Result<Expr, ParseError> {
    let mut pos = 0;
    let expr = parse_at(tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(ParseError::TrailingTokens { at: pos });
    }
    Ok(expr)
}

fn parse_at(tokens: &[Token], pos: &mut usize) -> Result<Expr, ParseError> {
    // Explicit stack of open operators so deep trees cannot overflow the call stack.
    let mut stack: Vec<(Operator, Vec<Expr>)> = Vec::new();
    loop {
        let at = *pos;
        let token = *tokens.get(at).ok_or(ParseError::Truncated)?;
        *pos += 1;
        let mut done = match token {
            Token::Op(op) => {
                stack.push((op, Vec::with_capacity(op.arity())));
                continue;
            }
            Token::Var => Expr::Var,
            Token::Pi => Expr::Const(NamedConst::Pi),
            Token::Euler => Expr::Const(NamedConst::E),
            Token::IntPos | Token::IntNeg => {
                let mut digits = String::new();
                while let Some(Token::Digit(d)) = tokens.get(*pos) {
                    digits.push((b'0' + d) as char);
                    *pos += 1;
                }
                if digits.is_empty() {
                    return Err(ParseError::MalformedInteger { at });
                }
                let magnitude = BigInt::parse_bytes(digits.as_bytes(), 10).expect("digits");
                Expr::Int(if token == Token::IntNeg { -magnitude } else { magnitude })
            }
            Token::Digit(_) => return Err(ParseError::MalformedInteger { at }),
            special => return Err(ParseError::UnknownToken(special.as_str().to_string())),
        };
        // Attach the finished subtree to open operator frames.
        loop {
            match stack.last_mut() {
                None => return Ok(done),
                Some((op, children)) => {
                    children.push(done);
                    if children.len() < op.arity() {
                        break;
                    }
                    let (op, children) = stack.pop().expect("non-empty");
                    done = Expr::Op(op, children);
                }
            }
        }
    }
}
