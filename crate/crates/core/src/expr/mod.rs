//! Univariate expression trees over a fixed operator whitelist.

pub(crate) mod eval;
mod infix;
mod prefix;
pub mod random;
mod token;

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;

pub use eval::eval_numeric;
pub use infix::Infix;
pub use prefix::{parse_prefix, to_prefix, ParseError};
pub use token::{Token, TokenSeq, UnknownToken};

/// Maximum serialized token count for expressions used in training.
pub const MAX_TOKENS: usize = 256;

macro_rules! operators {
    ($( $variant:ident => $name:literal, $arity:literal; )*) => {
        /// The operator whitelist. Subtraction is not an operator: `a - b` is
        /// written `add(a, neg(b))`.
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Operator {
            $( $variant, )*
        }

        impl Operator {
            pub const ALL: &'static [Operator] = &[$( Operator::$variant, )*];

            pub fn name(self) -> &'static str {
                match self {
                    $( Operator::$variant => $name, )*
                }
            }

            pub fn arity(self) -> usize {
                match self {
                    $( Operator::$variant => $arity, )*
                }
            }

            pub fn from_name(name: &str) -> Option<Operator> {
                match name {
                    $( $name => Some(Operator::$variant), )*
                    _ => None,
                }
            }
        }
    };
}

operators! {
    Add => "add", 2;
    Mul => "mul", 2;
    Div => "div", 2;
    Pow => "pow", 2;
    Neg => "neg", 1;
    Abs => "abs", 1;
    Sqrt => "sqrt", 1;
    Sin => "sin", 1;
    Cos => "cos", 1;
    Tan => "tan", 1;
    Cot => "cot", 1;
    Sec => "sec", 1;
    Csc => "csc", 1;
    Asin => "asin", 1;
    Acos => "acos", 1;
    Atan => "atan", 1;
    Sinh => "sinh", 1;
    Cosh => "cosh", 1;
    Tanh => "tanh", 1;
    Coth => "coth", 1;
    Asinh => "asinh", 1;
    Acosh => "acosh", 1;
    Atanh => "atanh", 1;
    Ln => "ln", 1;
    Exp => "exp", 1;
}

impl Operator {
    pub fn is_trigonometric(self) -> bool {
        use Operator::*;
        matches!(self, Sin | Cos | Tan | Cot | Sec | Csc | Asin | Acos | Atan)
    }

    pub fn is_hyperbolic(self) -> bool {
        use Operator::*;
        matches!(self, Sinh | Cosh | Tanh | Coth | Asinh | Acosh | Atanh)
    }

    fn bit(self) -> u32 {
        1 << (self as u32)
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A subset of the operator whitelist.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct OperatorSet(u32);

impl OperatorSet {
    pub fn all() -> Self {
        Operator::ALL.iter().copied().collect()
    }

    pub fn empty() -> Self {
        OperatorSet(0)
    }

    pub fn contains(self, op: Operator) -> bool {
        self.0 & op.bit() != 0
    }

    pub fn insert(&mut self, op: Operator) {
        self.0 |= op.bit();
    }

    pub fn iter(self) -> impl Iterator<Item = Operator> {
        Operator::ALL.iter().copied().filter(move |op| self.contains(*op))
    }
}

impl FromIterator<Operator> for OperatorSet {
    fn from_iter<I: IntoIterator<Item = Operator>>(iter: I) -> Self {
        let mut set = OperatorSet::empty();
        for op in iter {
            set.insert(op);
        }
        set
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NamedConst {
    Pi,
    E,
}

impl NamedConst {
    pub fn value(self) -> f64 {
        match self {
            NamedConst::Pi => core::f64::consts::PI,
            NamedConst::E => core::f64::consts::E,
        }
    }
}

/// An expression in the single variable `x`.
///
/// Trees are plain owned values; every transformation builds a new tree.
/// Children counts are checked by [`validate`], not by construction, so that
/// malformed trees can be represented and reported.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Var,
    Int(BigInt),
    Const(NamedConst),
    Op(Operator, Vec<Expr>),
}

#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn x() -> Expr {
        Expr::Var
    }

    pub fn int(value: i64) -> Expr {
        Expr::Int(BigInt::from(value))
    }

    pub fn pi() -> Expr {
        Expr::Const(NamedConst::Pi)
    }

    pub fn e() -> Expr {
        Expr::Const(NamedConst::E)
    }

    pub fn unary(op: Operator, arg: Expr) -> Expr {
        Expr::Op(op, vec![arg])
    }

    pub fn binary(op: Operator, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Op(op, vec![lhs, rhs])
    }

    pub fn add(lhs: Expr, rhs: Expr) -> Expr {
        Expr::binary(Operator::Add, lhs, rhs)
    }

    /// `lhs - rhs`, spelled `add(lhs, neg(rhs))`.
    pub fn sub(lhs: Expr, rhs: Expr) -> Expr {
        Expr::add(lhs, Expr::neg(rhs))
    }

    pub fn mul(lhs: Expr, rhs: Expr) -> Expr {
        Expr::binary(Operator::Mul, lhs, rhs)
    }

    pub fn div(lhs: Expr, rhs: Expr) -> Expr {
        Expr::binary(Operator::Div, lhs, rhs)
    }

    pub fn pow(base: Expr, exponent: Expr) -> Expr {
        Expr::binary(Operator::Pow, base, exponent)
    }

    pub fn neg(arg: Expr) -> Expr {
        Expr::unary(Operator::Neg, arg)
    }

    pub fn as_int(&self) -> Option<&BigInt> {
        match self {
            Expr::Int(n) => Some(n),
            _ => None,
        }
    }

    pub fn is_int(&self, value: i64) -> bool {
        matches!(self, Expr::Int(n) if *n == BigInt::from(value))
    }

    /// Operator and children, if this is an operator node.
    pub fn as_op(&self) -> Option<(Operator, &[Expr])> {
        match self {
            Expr::Op(op, children) => Some((*op, children)),
            _ => None,
        }
    }

    /// The single argument of a unary application of `op`.
    pub fn unary_arg(&self, op: Operator) -> Option<&Expr> {
        match self {
            Expr::Op(o, c) if *o == op && c.len() == 1 => Some(&c[0]),
            _ => None,
        }
    }

    /// Both operands of a binary application of `op`.
    pub fn binary_args(&self, op: Operator) -> Option<(&Expr, &Expr)> {
        match self {
            Expr::Op(o, c) if *o == op && c.len() == 2 => Some((&c[0], &c[1])),
            _ => None,
        }
    }

    /// `true` for integer and named-constant leaves.
    pub fn is_literal(&self) -> bool {
        matches!(self, Expr::Int(_) | Expr::Const(_))
    }

    /// `true` iff no `x` occurs in the tree.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Var => false,
            Expr::Int(_) | Expr::Const(_) => true,
            Expr::Op(_, children) => children.iter().all(Expr::is_constant),
        }
    }

    /// Number of operator nodes, not counting `neg` applied directly to a
    /// literal (the sign of a literal is not an operator).
    pub fn count_operators(&self) -> usize {
        match self {
            Expr::Var | Expr::Int(_) | Expr::Const(_) => 0,
            Expr::Op(Operator::Neg, c) if c.len() == 1 && c[0].is_literal() => 0,
            Expr::Op(_, children) => 1 + children.iter().map(Expr::count_operators).sum::<usize>(),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Op(_, children) => 1 + children.iter().map(Expr::node_count).sum::<usize>(),
            _ => 1,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Op(_, children) => 1 + children.iter().map(Expr::depth).max().unwrap_or(0),
            _ => 1,
        }
    }

    /// Set of operators occurring in the tree.
    pub fn operators(&self) -> OperatorSet {
        let mut set = OperatorSet::empty();
        self.visit(&mut |e| {
            if let Expr::Op(op, _) = e {
                set.insert(*op);
            }
        });
        set
    }

    /// Preorder traversal.
    pub fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        if let Expr::Op(_, children) = self {
            for child in children {
                child.visit(f);
            }
        }
    }

    /// Rebuilds the tree bottom-up, applying `f` to every node after its
    /// children have been rebuilt.
    pub fn map_bottom_up(&self, f: &mut impl FnMut(Expr) -> Expr) -> Expr {
        let rebuilt = match self {
            Expr::Op(op, children) => Expr::Op(*op, children.iter().map(|c| c.map_bottom_up(f)).collect()),
            leaf => leaf.clone(),
        };
        f(rebuilt)
    }

    pub fn to_prefix(&self) -> TokenSeq {
        to_prefix(self)
    }

    pub fn infix(&self) -> Infix<'_> {
        Infix(self)
    }
}

/// Prefix form with single spaces, the canonical text encoding.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.to_prefix(), f)
    }
}

impl core::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let tokens: TokenSeq = s.parse().map_err(|UnknownToken(t)| ParseError::UnknownToken(t))?;
        parse_prefix(&tokens)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// An operator node with the wrong number of children.
    Arity { op: Operator, expected: usize, found: usize },
    /// An operator outside the allowed set.
    Whitelist(Operator),
    /// Serialization longer than the token cap.
    Length { tokens: usize, cap: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Arity { op, expected, found } => {
                write!(f, "arity: {op} expects {expected} operand(s), found {found}")
            }
            Violation::Whitelist(op) => write!(f, "whitelist: operator {op} not allowed"),
            Violation::Length { tokens, cap } => write!(f, "length: {tokens} tokens exceeds cap {cap}"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ValidateOptions {
    pub allowed: OperatorSet,
    pub max_tokens: Option<usize>,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions { allowed: OperatorSet::all(), max_tokens: None }
    }
}

impl ValidateOptions {
    /// Whitelist plus the training token cap.
    pub fn training() -> Self {
        ValidateOptions { max_tokens: Some(MAX_TOKENS), ..Default::default() }
    }
}

/// Checks arity, the operator whitelist and (optionally) the token cap.
/// The single-variable rule holds by construction of [`Expr`].
pub fn validate(expr: &Expr, opts: &ValidateOptions) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    expr.visit(&mut |e| {
        if let Expr::Op(op, children) = e {
            if children.len() != op.arity() {
                violations.push(Violation::Arity { op: *op, expected: op.arity(), found: children.len() });
            }
            if !opts.allowed.contains(*op) {
                violations.push(Violation::Whitelist(*op));
            }
        }
    });
    // Serializing a malformed tree is still well defined, so the length check
    // runs regardless of arity problems.
    if let Some(cap) = opts.max_tokens {
        let tokens = to_prefix(expr).len();
        if tokens > cap {
            violations.push(Violation::Length { tokens, cap });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}
