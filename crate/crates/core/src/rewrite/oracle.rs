//! Equivalence oracle: bounded symbolic cancellation of the difference,
//! then seeded numeric sampling.

use alloc::vec::Vec;

use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::simplify::simplify_bounded;
use crate::expr::{eval_numeric, Expr, Operator};

#[derive(Clone, Debug, PartialEq)]
pub struct OracleConfig {
    pub sample_count: usize,
    /// Closed sampling interval, lower bound > 0.
    pub domain: (f64, f64),
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Step budget for the symbolic attempt.
    pub max_simplify_steps: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            sample_count: 32,
            domain: (0.1, 10.0),
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_simplify_steps: 10_000,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum OracleConfigError {
    #[error("sample_count must be at least 8, got {0}")]
    TooFewSamples(usize),
    #[error("domain must be a non-empty interval of positive reals")]
    BadDomain,
    #[error("tolerances must be positive")]
    BadTolerance,
}

impl OracleConfig {
    pub fn check(&self) -> Result<(), OracleConfigError> {
        if self.sample_count < 8 {
            return Err(OracleConfigError::TooFewSamples(self.sample_count));
        }
        let (lo, hi) = self.domain;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(OracleConfigError::BadDomain);
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(OracleConfigError::BadTolerance);
        }
        Ok(())
    }

    /// The sample points, in draw order.
    pub fn points(&self) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (lo, hi) = self.domain;
        (0..self.sample_count).map(|_| if hi > lo { rng.gen_range(lo..=hi) } else { lo }).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Equivalent,
    NotEquivalent,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Symbolic,
    Numeric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EquivalenceVerdict {
    pub verdict: Verdict,
    /// Samples where both sides were defined and agreed.
    pub agreeing: usize,
    /// Samples where both sides were undefined.
    pub both_undefined: usize,
    pub method: Method,
}

impl EquivalenceVerdict {
    pub fn is_equivalent(&self) -> bool {
        self.verdict == Verdict::Equivalent
    }
}

fn cancels(a: &Expr, b: &Expr, steps: usize) -> bool {
    matches!(simplify_bounded(&Expr::sub(a.clone(), b.clone()), steps), Ok(d) if d.is_int(0))
}

/// Decides whether `a` and `b` denote the same function of `x > 0`.
pub fn check_equivalence(a: &Expr, b: &Expr, cfg: &OracleConfig) -> EquivalenceVerdict {
    if a == b || cancels(a, b, cfg.max_simplify_steps) || cancels(b, a, cfg.max_simplify_steps) {
        return EquivalenceVerdict {
            verdict: Verdict::Equivalent,
            agreeing: 0,
            both_undefined: 0,
            method: Method::Symbolic,
        };
    }
    let (mut agreeing, mut both_undefined, mut disagreeing) = (0, 0, 0);
    for x in cfg.points() {
        match (eval_tracked(a, x), eval_tracked(b, x)) {
            (Some((va, ea)), Some((vb, eb))) => {
                let scale = libm::fmax(libm::fabs(va), libm::fabs(vb));
                let tol = cfg.abs_tol + cfg.rel_tol * scale + ERROR_MARGIN * (ea + eb);
                if libm::fabs(va - vb) <= tol {
                    agreeing += 1;
                } else {
                    disagreeing += 1;
                }
            }
            (None, None) => both_undefined += 1,
            _ => {}
        }
    }
    let verdict = if disagreeing > 0 {
        Verdict::NotEquivalent
    } else if 2 * agreeing >= cfg.sample_count {
        Verdict::Equivalent
    } else {
        Verdict::Inconclusive
    };
    EquivalenceVerdict { verdict, agreeing, both_undefined, method: Method::Numeric }
}

/// `true` when `e` is undefined at every oracle sample point.
pub fn is_nan_producing(e: &Expr, cfg: &OracleConfig) -> bool {
    cfg.points().into_iter().all(|x| eval_numeric(e, x).is_none())
}

/// Multiplier on the propagated error bounds when comparing values.
const ERROR_MARGIN: f64 = 4.0;
/// Per-operation rounding allowance, relative.
const ULP: f64 = 4.0 * f64::EPSILON;
/// A sample is discarded when its propagated error exceeds this fraction of
/// `max(1, |value|)`.
const MAX_REL_ERROR: f64 = 1e-4;

/// Evaluates `e` at `x` together with a first-order bound on the absolute
/// floating-point error. Returns `None` when the value is undefined or its
/// error bound is too large to support a comparison, which includes
/// arguments within rounding distance of a domain boundary or a pole.
pub fn eval_tracked(e: &Expr, x: f64) -> Option<(f64, f64)> {
    let (v, err) = tracked(e, x)?;
    (err <= MAX_REL_ERROR * libm::fmax(1.0, libm::fabs(v))).then_some((v, err))
}

fn tracked(e: &Expr, x: f64) -> Option<(f64, f64)> {
    match e {
        Expr::Var => Some((x, 0.0)),
        Expr::Int(n) => {
            let v = n.to_f64().filter(|v| v.is_finite())?;
            // integers below 2^53 convert exactly
            let err = if libm::fabs(v) < 9007199254740992.0 { 0.0 } else { libm::fabs(v) * f64::EPSILON };
            Some((v, err))
        }
        Expr::Const(c) => {
            let v = c.value();
            Some((v, v * f64::EPSILON))
        }
        Expr::Op(op, children) => match children.as_slice() {
            [a] => unary(*op, tracked(a, x)?),
            [a, b] => binary(*op, tracked(a, x)?, tracked(b, x)?),
            _ => None,
        },
    }
}

fn finite(v: f64, err: f64) -> Option<(f64, f64)> {
    (v.is_finite() && err.is_finite()).then_some((v, err + libm::fabs(v) * ULP))
}

fn unary(op: Operator, (a, ea): (f64, f64)) -> Option<(f64, f64)> {
    use Operator::*;
    let v = crate::expr::eval::apply_unary(op, a)?;
    if ea > 0.0 {
        // Reject arguments whose error interval reaches a domain boundary
        // or a pole.
        let reaches_boundary = match op {
            Sqrt | Ln => a - ea <= 0.0,
            Asin | Acos | Atanh => libm::fabs(a) + ea >= 1.0,
            Acosh => a - ea <= 1.0,
            Coth => libm::fabs(a) <= ea,
            Cot | Csc => libm::fabs(libm::sin(a)) <= ea,
            Tan | Sec => libm::fabs(libm::cos(a)) <= ea,
            _ => false,
        };
        if reaches_boundary {
            return None;
        }
    } else {
        return finite(v, 0.0);
    }
    // Smallest |argument| in the error interval, for slopes that decay.
    let inner = libm::fmax(0.0, libm::fabs(a) - ea);
    let slope = match op {
        Neg | Abs | Sin | Cos => 1.0,
        Atan => 1.0 / (1.0 + inner * inner),
        Asinh => 1.0 / libm::sqrt(1.0 + inner * inner),
        Tanh => {
            let c = libm::cosh(inner);
            1.0 / (c * c)
        }
        Sqrt => 0.5 / libm::sqrt(a - ea),
        Tan | Cot => 1.0 + v * v,
        Sec => libm::fabs(v * libm::tan(a)),
        Csc => libm::fabs(v / libm::tan(a)),
        Asin | Acos => {
            let m = libm::fabs(a) + ea;
            1.0 / libm::sqrt(1.0 - m * m)
        }
        Sinh | Cosh => libm::cosh(libm::fabs(a) + ea),
        Coth => {
            let s = libm::sinh(libm::fabs(a) - ea);
            1.0 / (s * s)
        }
        Acosh => {
            let m = a - ea;
            1.0 / libm::sqrt(m * m - 1.0)
        }
        Atanh => {
            let m = libm::fabs(a) + ea;
            1.0 / (1.0 - m * m)
        }
        Ln => 1.0 / (a - ea),
        Exp => libm::exp(a + ea),
        Add | Mul | Div | Pow => return None,
    };
    // Periodic functions lose all information once the argument error
    // spans a noticeable part of a period.
    if matches!(op, Sin | Cos | Tan | Cot | Sec | Csc) && ea > 1e-3 {
        return None;
    }
    finite(v, slope * ea)
}

fn binary(op: Operator, (a, ea): (f64, f64), (b, eb): (f64, f64)) -> Option<(f64, f64)> {
    use Operator::*;
    let v = crate::expr::eval::apply_binary(op, a, b)?;
    let err = match op {
        Add => ea + eb,
        Mul => libm::fabs(a) * eb + libm::fabs(b) * ea + ea * eb,
        Div => {
            let m = libm::fabs(b) - eb;
            if m <= 0.0 {
                return None;
            }
            (ea + libm::fabs(v) * eb) / m
        }
        Pow => {
            let integral_exponent = eb == 0.0 && libm::trunc(b) == b;
            if ea == 0.0 && eb == 0.0 {
                0.0
            } else if libm::fabs(a) <= ea {
                // Base within rounding of zero: only safe for non-negative
                // integer exponents, where the value is itself tiny.
                if integral_exponent && b >= 1.0 {
                    libm::pow(libm::fabs(a) + ea, b)
                } else {
                    return None;
                }
            } else if a < 0.0 && !integral_exponent {
                return None;
            } else {
                let m = libm::fabs(a) + ea;
                let base_term = libm::fabs(b) * libm::pow(m, b - 1.0).max(libm::pow(libm::fabs(a) - ea, b - 1.0)) * ea;
                let exp_term = if eb > 0.0 { libm::fabs(v * libm::log(libm::fabs(a))) * eb * 2.0 } else { 0.0 };
                base_term + exp_term
            }
        }
        _ => return None,
    };
    finite(v, err)
}
