use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::ops::Deref;
use core::str::FromStr;

use super::Operator;

/// One token of the prefix serialization.
///
/// Integers are spelled as a sign token followed by base-10 digit tokens, so
/// `25` is `INT+ 2 5`. `Soe`, `Eoe` and `Pad` only appear in model inputs,
/// never inside an expression serialization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Token {
    Op(Operator),
    Var,
    Pi,
    Euler,
    IntPos,
    IntNeg,
    Digit(u8),
    Soe,
    Eoe,
    Pad,
}

impl Token {
    pub fn as_str(&self) -> &'static str {
        const DIGITS: [&str; 10] = ["0", "1", "2", "3", "4", "5", "6", "7", "8", "9"];
        match self {
            Token::Op(op) => op.name(),
            Token::Var => "x",
            Token::Pi => "pi",
            Token::Euler => "euler",
            Token::IntPos => "INT+",
            Token::IntNeg => "INT-",
            Token::Digit(d) => DIGITS[*d as usize],
            Token::Soe => "SOE",
            Token::Eoe => "EOE",
            Token::Pad => "PAD",
        }
    }

    pub fn is_special(&self) -> bool {
        matches!(self, Token::Soe | Token::Eoe | Token::Pad)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown token `{0}`")]
pub struct UnknownToken(pub String);

impl FromStr for Token {
    type Err = UnknownToken;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "x" => Token::Var,
            "pi" => Token::Pi,
            "euler" => Token::Euler,
            "INT+" => Token::IntPos,
            "INT-" => Token::IntNeg,
            "SOE" => Token::Soe,
            "EOE" => Token::Eoe,
            "PAD" => Token::Pad,
            _ => {
                let bytes = s.as_bytes();
                if bytes.len() == 1 && bytes[0].is_ascii_digit() {
                    Token::Digit(bytes[0] - b'0')
                } else if let Some(op) = Operator::from_name(s) {
                    Token::Op(op)
                } else {
                    return Err(UnknownToken(s.to_string()));
                }
            }
        })
    }
}

/// An ordered token list. Its text form separates tokens by single spaces.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TokenSeq(pub Vec<Token>);

impl TokenSeq {
    pub fn new(tokens: Vec<Token>) -> Self {
        TokenSeq(tokens)
    }

    pub fn into_inner(self) -> Vec<Token> {
        self.0
    }

    /// Checks the prefix arity-balance invariant: a counter starting at 1
    /// gains `arity - 1` per operator and loses 1 per complete atom, and must
    /// reach 0 exactly at the last token.
    pub fn is_balanced(&self) -> bool {
        let mut open: isize = 1;
        let mut i = 0;
        let toks = &self.0;
        while i < toks.len() {
            if open <= 0 {
                return false;
            }
            match toks[i] {
                Token::Op(op) => open += op.arity() as isize - 1,
                Token::Var | Token::Pi | Token::Euler => open -= 1,
                Token::IntPos | Token::IntNeg => {
                    let digits = toks[i + 1..].iter().take_while(|t| matches!(t, Token::Digit(_))).count();
                    if digits == 0 {
                        return false;
                    }
                    i += digits;
                    open -= 1;
                }
                Token::Digit(_) | Token::Soe | Token::Eoe | Token::Pad => return false,
            }
            i += 1;
        }
        open == 0
    }
}

impl Deref for TokenSeq {
    type Target = [Token];

    fn deref(&self) -> &[Token] {
        &self.0
    }
}

impl From<Vec<Token>> for TokenSeq {
    fn from(tokens: Vec<Token>) -> Self {
        TokenSeq(tokens)
    }
}

impl fmt::Display for TokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(t.as_str())?;
        }
        Ok(())
    }
}

impl FromStr for TokenSeq {
    type Err = UnknownToken;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split_ascii_whitespace().map(str::parse).collect::<Result<Vec<_>, _>>().map(TokenSeq)
    }
}

impl TokenSeq {
    pub fn to_strings(&self) -> Vec<String> {
        self.0.iter().map(|t| t.as_str().to_string()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_round_trip() {
        for s in ["x", "pi", "euler", "INT+", "INT-", "7", "SOE", "EOE", "PAD", "acosh"] {
            assert_eq!(s.parse::<Token>().unwrap().as_str(), s);
        }
        assert!("sub".parse::<Token>().is_err());
        assert!("12".parse::<Token>().is_err());
    }

    #[test]
    fn balance() {
        let ok: TokenSeq = "div sin x cos x".parse().unwrap();
        assert!(ok.is_balanced());
        let int: TokenSeq = "add x INT+ 2 5".parse().unwrap();
        assert!(int.is_balanced());
        for bad in ["sin", "x x", "INT+", "add x", "SOE x", ""] {
            assert!(!bad.parse::<TokenSeq>().unwrap().is_balanced(), "{bad}");
        }
    }
}
