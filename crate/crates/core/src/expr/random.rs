//! Seeded random expression sampling, used to build source corpora and for
//! property tests.

use alloc::vec::Vec;

use rand::Rng;

use super::{Expr, Operator, OperatorSet};

#[derive(Clone, Debug)]
pub struct RandomExprConfig {
    pub min_ops: usize,
    pub max_ops: usize,
    pub operators: OperatorSet,
    /// Integer leaves are drawn from `1..=max_int`, negated with probability
    /// `negative_prob`.
    pub max_int: i64,
    pub negative_prob: f64,
    pub var_prob: f64,
    pub named_const_prob: f64,
    /// Resample until the expression mentions `x`.
    pub require_var: bool,
}

impl Default for RandomExprConfig {
    fn default() -> Self {
        RandomExprConfig {
            min_ops: 1,
            max_ops: 5,
            operators: OperatorSet::all(),
            max_int: 5,
            negative_prob: 0.2,
            var_prob: 0.6,
            named_const_prob: 0.05,
            require_var: true,
        }
    }
}

impl RandomExprConfig {
    pub fn with_ops(min_ops: usize, max_ops: usize) -> Self {
        RandomExprConfig { min_ops, max_ops, ..Default::default() }
    }
}

/// Draws an expression whose [`Expr::count_operators`] lies in
/// `min_ops..=max_ops`.
pub fn random_expr<R: Rng + ?Sized>(rng: &mut R, cfg: &RandomExprConfig) -> Expr {
    let ops: Vec<Operator> = cfg.operators.iter().collect();
    loop {
        let n = rng.gen_range(cfg.min_ops..=cfg.max_ops.max(cfg.min_ops));
        let e = build(rng, cfg, &ops, n);
        if !cfg.require_var || !e.is_constant() {
            return e;
        }
    }
}

fn leaf<R: Rng + ?Sized>(rng: &mut R, cfg: &RandomExprConfig) -> Expr {
    let u: f64 = rng.gen();
    if u < cfg.var_prob {
        Expr::x()
    } else if u < cfg.var_prob + cfg.named_const_prob {
        if rng.gen_bool(0.5) {
            Expr::pi()
        } else {
            Expr::e()
        }
    } else {
        let v = rng.gen_range(1..=cfg.max_int.max(1));
        Expr::int(if rng.gen_bool(cfg.negative_prob) { -v } else { v })
    }
}

fn build<R: Rng + ?Sized>(rng: &mut R, cfg: &RandomExprConfig, ops: &[Operator], n: usize) -> Expr {
    if n == 0 || ops.is_empty() {
        return leaf(rng, cfg);
    }
    // Binary operators are weighted up so trees are not mostly unary chains.
    let weight = |op: &Operator| if op.arity() == 2 { 4 } else { 1 };
    let total: u32 = ops.iter().map(weight).sum();
    let mut pick = rng.gen_range(0..total);
    let op = *ops
        .iter()
        .find(|op| {
            let w = weight(op);
            if pick < w {
                true
            } else {
                pick -= w;
                false
            }
        })
        .expect("weights cover range");
    match op {
        // Small integer exponents keep values representable.
        Operator::Pow => {
            let exponent = Expr::int(*[2, 2, 3, -1].get(rng.gen_range(0..4)).unwrap());
            Expr::pow(build(rng, cfg, ops, n - 1), exponent)
        }
        op if op.arity() == 1 => {
            let arg = build(rng, cfg, ops, n - 1);
            if op == Operator::Neg && arg.is_literal() {
                // neg over a literal would not count as an operator
                Expr::neg(Expr::x())
            } else {
                Expr::unary(op, arg)
            }
        }
        op => {
            let left = rng.gen_range(0..n);
            Expr::binary(op, build(rng, cfg, ops, left), build(rng, cfg, ops, n - 1 - left))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn operator_counts_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = RandomExprConfig::with_ops(2, 5);
        for _ in 0..2000 {
            let e = random_expr(&mut rng, &cfg);
            let n = e.count_operators();
            assert!((2..=5).contains(&n), "{e} has {n} operators");
            assert!(!e.is_constant());
        }
    }

    #[test]
    fn seeded() {
        let cfg = RandomExprConfig::default();
        let a: Vec<Expr> = {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            (0..50).map(|_| random_expr(&mut rng, &cfg)).collect()
        };
        let b: Vec<Expr> = {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            (0..50).map(|_| random_expr(&mut rng, &cfg)).collect()
        };
        assert_eq!(a, b);
    }
}
