//! Integer polynomials over opaque atoms, and univariate polynomials in `x`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::expr::{Expr, Operator};

/// Caps that keep expansion bounded.
const MAX_TERMS: usize = 64;
/// Sums are only raised to integer powers up to this bound.
pub(crate) const MAX_SUM_POWER: u32 = 4;
const MAX_MONOMIAL_POWER: u32 = 64;

/// Atom to exponent (exponents > 0), sorted by atom.
pub(crate) type Monomial = Vec<(Expr, u32)>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct MultiPoly {
    terms: BTreeMap<Monomial, BigInt>,
}

fn mono_mul(a: &Monomial, b: &Monomial) -> Option<Monomial> {
    let mut out: Monomial = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let ord = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => x.0.cmp(&y.0),
            (Some(_), None) => Ordering::Less,
            _ => Ordering::Greater,
        };
        match ord {
            Ordering::Less => {
                out.push(a[i].clone());
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j].clone());
                j += 1;
            }
            Ordering::Equal => {
                let e = a[i].1 + b[j].1;
                if e > MAX_MONOMIAL_POWER {
                    return None;
                }
                out.push((a[i].0.clone(), e));
                i += 1;
                j += 1;
            }
        }
    }
    Some(out)
}

fn mono_degree(m: &Monomial) -> u32 {
    m.iter().map(|(_, e)| e).sum()
}

impl MultiPoly {
    pub fn zero() -> Self {
        MultiPoly { terms: BTreeMap::new() }
    }

    pub fn constant(c: BigInt) -> Self {
        let mut p = MultiPoly::zero();
        if !c.is_zero() {
            p.terms.insert(Vec::new(), c);
        }
        p
    }

    pub fn atom(e: Expr) -> Self {
        let mut p = MultiPoly::zero();
        p.terms.insert(vec![(e, 1)], BigInt::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigInt)> {
        self.terms.iter()
    }

    fn add_term(&mut self, m: Monomial, c: BigInt) {
        let entry = self.terms.entry(m).or_insert_with(BigInt::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    pub fn add(&self, other: &Self) -> Option<Self> {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        (out.terms.len() <= MAX_TERMS).then_some(out)
    }

    pub fn neg(&self) -> Self {
        MultiPoly { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }

    pub fn mul(&self, other: &Self) -> Option<Self> {
        if self.terms.len() * other.terms.len() > MAX_TERMS * MAX_TERMS {
            return None;
        }
        let mut out = MultiPoly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(mono_mul(ma, mb)?, ca * cb);
            }
        }
        (out.terms.len() <= MAX_TERMS).then_some(out)
    }

    pub fn pow(&self, k: u32) -> Option<Self> {
        let mut out = MultiPoly::constant(BigInt::one());
        for _ in 0..k {
            out = out.mul(self)?;
        }
        Some(out)
    }

    /// Reads an expression as a polynomial over atoms. Sums, products,
    /// negation, integer literals and non-negative integer powers are
    /// interpreted; everything else is an atom, passed through `atom_hook`
    /// first. Powers of multi-term sums are only expanded up to
    /// [`MAX_SUM_POWER`].
    pub fn from_expr_with(e: &Expr, atom_hook: &mut impl FnMut(&Expr) -> Expr) -> Option<Self> {
        use Operator::*;
        match e {
            Expr::Int(n) => Some(MultiPoly::constant(n.clone())),
            Expr::Op(Add, c) if c.len() == 2 => {
                Self::from_expr_with(&c[0], atom_hook)?.add(&Self::from_expr_with(&c[1], atom_hook)?)
            }
            Expr::Op(Neg, c) if c.len() == 1 => Some(Self::from_expr_with(&c[0], atom_hook)?.neg()),
            Expr::Op(Mul, c) if c.len() == 2 => {
                Self::from_expr_with(&c[0], atom_hook)?.mul(&Self::from_expr_with(&c[1], atom_hook)?)
            }
            Expr::Op(Pow, c) if c.len() == 2 => match c[1].as_int().and_then(|k| k.to_u32()) {
                Some(k) if k <= MAX_MONOMIAL_POWER => {
                    let base = Self::from_expr_with(&c[0], atom_hook)?;
                    if base.terms.len() <= 1 || k <= MAX_SUM_POWER {
                        base.pow(k)
                    } else {
                        Some(MultiPoly::atom(atom_hook(e)))
                    }
                }
                _ => Some(MultiPoly::atom(atom_hook(e))),
            },
            other => Some(MultiPoly::atom(atom_hook(other))),
        }
    }

    pub fn from_expr(e: &Expr) -> Option<Self> {
        Self::from_expr_with(e, &mut |a| a.clone())
    }

    /// Canonical expression: terms by descending total degree, coefficients
    /// in front, sums and products left-associated, a `-1` coefficient
    /// written as `neg`.
    pub fn to_expr(&self) -> Expr {
        let mut terms: Vec<(&Monomial, &BigInt)> = self.terms.iter().collect();
        terms.sort_by(|a, b| mono_degree(b.0).cmp(&mono_degree(a.0)).then_with(|| a.0.cmp(b.0)));
        let mut sum: Option<Expr> = None;
        for (m, c) in terms {
            let t = term_expr(m, c);
            sum = Some(match sum {
                None => t,
                Some(s) => Expr::add(s, t),
            });
        }
        sum.unwrap_or_else(|| Expr::int(0))
    }

    /// The polynomial as a univariate polynomial in `x`, if `x` is its only
    /// atom.
    pub fn as_univariate(&self) -> Option<UPoly> {
        let mut coeffs: Vec<BigInt> = Vec::new();
        for (m, c) in &self.terms {
            let degree = match m.as_slice() {
                [] => 0,
                [(Expr::Var, k)] => *k as usize,
                _ => return None,
            };
            if coeffs.len() <= degree {
                coeffs.resize(degree + 1, BigInt::zero());
            }
            coeffs[degree] = c.clone();
        }
        Some(UPoly::new(coeffs))
    }

    /// Largest monomial dividing every term, and the gcd of coefficients.
    pub fn common_factor(&self) -> (Monomial, BigInt) {
        let mut iter = self.terms.iter();
        let Some((first, c0)) = iter.next() else { return (Vec::new(), BigInt::zero()) };
        let mut mono = first.clone();
        let mut content = c0.abs();
        for (m, c) in iter {
            content = content.gcd(c);
            mono.retain_mut(|(atom, e)| match m.iter().find(|(a, _)| a == atom) {
                Some((_, k)) => {
                    *e = (*e).min(*k);
                    true
                }
                None => false,
            });
        }
        (mono, content)
    }

    /// Exact division by a monomial times an integer; callers guarantee
    /// divisibility.
    pub fn div_monomial(&self, mono: &Monomial, c: &BigInt) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(m, k)| {
                let reduced: Monomial = m
                    .iter()
                    .filter_map(|(atom, e)| {
                        let sub = mono.iter().find(|(a, _)| a == atom).map_or(0, |(_, s)| *s);
                        (*e > sub).then(|| (atom.clone(), e - sub))
                    })
                    .collect();
                (reduced, k / c)
            })
            .collect();
        MultiPoly { terms }
    }
}

pub(crate) fn monomial_expr(m: &Monomial) -> Option<Expr> {
    m.iter()
        .map(|(atom, e)| if *e == 1 { atom.clone() } else { Expr::pow(atom.clone(), Expr::int(*e as i64)) })
        .reduce(Expr::mul)
}

fn term_expr(m: &Monomial, c: &BigInt) -> Expr {
    match monomial_expr(m) {
        None => Expr::Int(c.clone()),
        Some(prod) if c.is_one() => prod,
        Some(prod) if *c == -BigInt::one() => Expr::neg(prod),
        Some(prod) => Expr::mul(Expr::Int(c.clone()), prod),
    }
}

/// Dense univariate polynomial in `x` with integer coefficients, lowest
/// degree first, no trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct UPoly(Vec<BigInt>);

impl UPoly {
    pub fn new(mut coeffs: Vec<BigInt>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        UPoly(coeffs)
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Degree, with the zero polynomial at 0.
    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn lead(&self) -> BigInt {
        self.0.last().cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn content(&self) -> BigInt {
        self.0.iter().fold(BigInt::zero(), |g, c| g.gcd(c))
    }

    pub fn scale_div(&self, c: &BigInt) -> UPoly {
        UPoly::new(self.0.iter().map(|k| k / c).collect())
    }

    pub fn neg(&self) -> UPoly {
        UPoly(self.0.iter().map(|k| -k).collect())
    }

    /// Primitive part with a positive leading coefficient.
    pub fn primitive(&self) -> UPoly {
        if self.is_zero() {
            return self.clone();
        }
        let mut c = self.content();
        if self.lead().is_negative() {
            c = -c;
        }
        self.scale_div(&c)
    }

    pub fn to_multi(&self) -> MultiPoly {
        let mut p = MultiPoly::zero();
        for (d, c) in self.0.iter().enumerate() {
            if !c.is_zero() {
                let m = if d == 0 { Vec::new() } else { vec![(Expr::Var, d as u32)] };
                p.terms.insert(m, c.clone());
            }
        }
        p
    }

    pub fn to_expr(&self) -> Expr {
        self.to_multi().to_expr()
    }

    fn sub_shifted(&mut self, other: &UPoly, factor: &BigInt, shift: usize) {
        if self.0.len() < other.0.len() + shift {
            self.0.resize(other.0.len() + shift, BigInt::zero());
        }
        for (i, c) in other.0.iter().enumerate() {
            self.0[i + shift] -= c * factor;
        }
        *self = UPoly::new(core::mem::take(&mut self.0));
    }

    /// Pseudo-remainder of `self` by `d`.
    fn prem(&self, d: &UPoly) -> UPoly {
        let mut r = self.clone();
        let ld = d.lead();
        while !r.is_zero() && r.degree() >= d.degree() {
            let lr = r.lead();
            let shift = r.degree() - d.degree();
            r = UPoly::new(r.0.iter().map(|c| c * &ld).collect());
            r.sub_shifted(d, &lr, shift);
        }
        r
    }

    /// Greatest common divisor over the integers, positive leading
    /// coefficient.
    pub fn gcd(&self, other: &UPoly) -> UPoly {
        if self.is_zero() {
            return other.primitive_with_content();
        }
        if other.is_zero() {
            return self.primitive_with_content();
        }
        let content = self.content().gcd(&other.content());
        let (mut a, mut b) = (self.primitive(), other.primitive());
        if a.degree() < b.degree() {
            core::mem::swap(&mut a, &mut b);
        }
        while !b.is_zero() {
            let r = a.prem(&b);
            a = b;
            b = if r.is_zero() { r } else { r.primitive() };
        }
        let g = a.primitive();
        UPoly::new(g.0.iter().map(|c| c * &content).collect())
    }

    fn primitive_with_content(&self) -> UPoly {
        if self.lead().is_negative() {
            self.neg()
        } else {
            self.clone()
        }
    }

    /// Exact quotient over the integers, if it exists.
    pub fn div_exact(&self, d: &UPoly) -> Option<UPoly> {
        if d.is_zero() {
            return None;
        }
        let mut r = self.clone();
        let mut q = vec![BigInt::zero(); self.0.len().saturating_sub(d.0.len()) + 1];
        let ld = d.lead();
        while !r.is_zero() && r.degree() >= d.degree() {
            let (quot, rem) = r.lead().div_rem(&ld);
            if !rem.is_zero() {
                return None;
            }
            let shift = r.degree() - d.degree();
            q[shift] = quot.clone();
            r.sub_shifted(d, &quot, shift);
        }
        r.is_zero().then(|| UPoly::new(q))
    }

    /// Rational roots `p/q` (q > 0, in lowest terms) of a polynomial with a
    /// nonzero constant term, by the rational root test. Gives up (returns
    /// an empty list) when the end coefficients are too large to enumerate
    /// divisors.
    pub fn rational_roots(&self) -> Vec<(BigInt, BigInt)> {
        let (Some(a0), Some(an)) = (self.0.first(), self.0.last()) else { return Vec::new() };
        let (Some(p_max), Some(q_max)) = (a0.abs().to_u64(), an.abs().to_u64()) else { return Vec::new() };
        if p_max == 0 || p_max > 1_000_000 || q_max > 1_000_000 {
            return Vec::new();
        }
        let mut roots = Vec::new();
        for q in divisors(q_max) {
            for p in divisors(p_max) {
                for sign in [1i64, -1] {
                    let (p, q) = (BigInt::from(sign) * BigInt::from(p), BigInt::from(q));
                    if !p.gcd(&q).is_one() {
                        continue;
                    }
                    if self.vanishes_at(&p, &q) {
                        roots.push((p, q));
                    }
                }
            }
        }
        roots.sort();
        roots
    }

    /// `q^n * P(p/q) == 0`
    fn vanishes_at(&self, p: &BigInt, q: &BigInt) -> bool {
        let n = self.degree();
        let mut acc = BigInt::zero();
        let mut p_pow = BigInt::one();
        let q_pows: Vec<BigInt> = (0..=n)
            .scan(BigInt::one(), |s, _| {
                let v = s.clone();
                *s *= q;
                Some(v)
            })
            .collect();
        for (i, c) in self.0.iter().enumerate() {
            acc += c * &p_pow * &q_pows[n - i];
            p_pow *= p;
        }
        acc.is_zero()
    }
}

fn divisors(n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 1;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            if d != n / d {
                out.push(n / d);
            }
        }
        d += 1;
    }
    out.sort_unstable();
    out
}
