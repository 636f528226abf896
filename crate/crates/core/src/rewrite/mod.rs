//! Equivalence-preserving rewrite rules, the basic simplifier, generation of
//! equivalent expressions and the equivalence oracle.

mod algebra;
mod logs;
mod oracle;
mod poly;
mod simplify;
mod trig;

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

pub use oracle::{
    check_equivalence, eval_tracked, is_nan_producing, EquivalenceVerdict, Method, OracleConfig, OracleConfigError,
    Verdict,
};
pub use simplify::{simplify_basic, simplify_bounded, BudgetExhausted};

use crate::expr::{validate, Expr, Operator, ValidateOptions};

/// A generation operation. `RewriteTrig(op)` and `RewriteHyp(op)` rewrite
/// functions in terms of `op`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    SimplifyBasic,
    Expand,
    Factor,
    Cancel,
    TrigSimp,
    ExpandLog,
    LogCombine,
    RewriteTrig(Operator),
    RewriteHyp(Operator),
}

const TRIG_TARGETS: [Operator; 6] =
    [Operator::Sin, Operator::Cos, Operator::Tan, Operator::Cot, Operator::Sec, Operator::Csc];
const HYP_TARGETS: [Operator; 5] = [Operator::Sinh, Operator::Cosh, Operator::Tanh, Operator::Coth, Operator::Exp];

impl Rule {
    /// Every rule, rewrite targets included, in a fixed order.
    pub fn all() -> Vec<Rule> {
        let mut rules = alloc::vec![
            Rule::SimplifyBasic,
            Rule::Expand,
            Rule::Factor,
            Rule::Cancel,
            Rule::TrigSimp,
            Rule::ExpandLog,
            Rule::LogCombine,
        ];
        rules.extend(TRIG_TARGETS.iter().map(|&op| Rule::RewriteTrig(op)));
        rules.extend(HYP_TARGETS.iter().map(|&op| Rule::RewriteHyp(op)));
        rules
    }

    /// Applies the rule at the root of `e` only, without simplification.
    fn at_root(self, e: &Expr) -> Option<Expr> {
        match self {
            Rule::SimplifyBasic => {
                let out = simplify_basic(e);
                (out != *e).then_some(out)
            }
            Rule::Expand => algebra::expand(e),
            Rule::Factor => algebra::factor(e),
            Rule::Cancel => algebra::cancel(e),
            Rule::TrigSimp => trig::trigsimp(e),
            Rule::ExpandLog => logs::expand_log(e),
            Rule::LogCombine => logs::logcombine(e),
            Rule::RewriteTrig(op) => trig::rewrite_trig(e, op),
            Rule::RewriteHyp(op) => trig::rewrite_hyp(e, op),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::SimplifyBasic => f.write_str("simplify"),
            Rule::Expand => f.write_str("expand"),
            Rule::Factor => f.write_str("factor"),
            Rule::Cancel => f.write_str("cancel"),
            Rule::TrigSimp => f.write_str("trigsimp"),
            Rule::ExpandLog => f.write_str("expand_log"),
            Rule::LogCombine => f.write_str("logcombine"),
            Rule::RewriteTrig(op) => write!(f, "rewrite_trig:{op}"),
            Rule::RewriteHyp(op) => write!(f, "rewrite_hyp:{op}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown rewrite rule `{0}`")]
pub struct UnknownRule(pub String);

impl FromStr for Rule {
    type Err = UnknownRule;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || UnknownRule(s.to_string());
        Ok(match s {
            "simplify" => Rule::SimplifyBasic,
            "expand" => Rule::Expand,
            "factor" => Rule::Factor,
            "cancel" => Rule::Cancel,
            "trigsimp" => Rule::TrigSimp,
            "expand_log" => Rule::ExpandLog,
            "logcombine" => Rule::LogCombine,
            _ => {
                let (kind, target) = s.split_once(':').ok_or_else(unknown)?;
                let op = Operator::from_name(target).ok_or_else(unknown)?;
                match kind {
                    "rewrite_trig" if TRIG_TARGETS.contains(&op) => Rule::RewriteTrig(op),
                    "rewrite_hyp" if HYP_TARGETS.contains(&op) => Rule::RewriteHyp(op),
                    _ => return Err(unknown()),
                }
            }
        })
    }
}

/// Every result of applying `rule` at exactly one position of `e`, in
/// pre-order of positions. Results are not simplified.
fn rewrites_at_each_position(e: &Expr, rule: Rule) -> Vec<Expr> {
    let mut out = Vec::new();
    if let Some(r) = rule.at_root(e) {
        out.push(r);
    }
    if let Expr::Op(op, children) = e {
        for (i, child) in children.iter().enumerate() {
            for r in rewrites_at_each_position(child, rule) {
                let mut c = children.clone();
                c[i] = r;
                out.push(Expr::Op(*op, c));
            }
        }
    }
    out
}

/// All distinct single-position applications of `rule`, each passed through
/// [`simplify_basic`], excluding `e` itself.
pub fn rule_outputs(e: &Expr, rule: Rule) -> Vec<Expr> {
    let mut seen = BTreeSet::new();
    rewrites_at_each_position(e, rule)
        .into_iter()
        .map(|r| simplify_basic(&r))
        .filter(|r| r != e && seen.insert(r.clone()))
        .collect()
}

/// Applies `rule` at the first position, in pre-order, where it applies,
/// then simplifies. Returns `None` when the rule applies nowhere or the
/// result equals the input.
pub fn apply_rule(e: &Expr, rule: Rule) -> Option<Expr> {
    fn first(e: &Expr, rule: Rule) -> Option<Expr> {
        if let Some(r) = rule.at_root(e) {
            return Some(r);
        }
        let Expr::Op(op, children) = e else { return None };
        children.iter().enumerate().find_map(|(i, child)| {
            first(child, rule).map(|r| {
                let mut c = children.clone();
                c[i] = r;
                Expr::Op(*op, c)
            })
        })
    }
    let out = simplify_basic(&first(e, rule)?);
    (out != *e).then_some(out)
}

#[derive(Clone, Debug)]
pub struct GenConfig {
    pub rules: Vec<Rule>,
    pub max_ops: usize,
    /// Number of successive rule applications composed per output.
    pub depth: usize,
    pub oracle: OracleConfig,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { rules: Rule::all(), max_ops: 5, depth: 1, oracle: OracleConfig::default() }
    }
}

/// Equivalent expressions reachable from `e` by up to `cfg.depth` rule
/// applications. Every member validates under the training token cap, has
/// at most `cfg.max_ops` operators, is not undefined at every oracle sample
/// and is oracle-equivalent to `e`.
pub fn generate_equivalents(e: &Expr, cfg: &GenConfig) -> BTreeSet<Expr> {
    let opts = ValidateOptions::training();
    let mut accepted = BTreeSet::new();
    let mut rejected = BTreeSet::new();
    let mut frontier: BTreeSet<Expr> = BTreeSet::from([e.clone()]);
    for _ in 0..cfg.depth {
        let mut next = BTreeSet::new();
        for f in &frontier {
            for &rule in &cfg.rules {
                for cand in rule_outputs(f, rule) {
                    if cand == *e || accepted.contains(&cand) || rejected.contains(&cand) {
                        continue;
                    }
                    let ok = cand.count_operators() <= cfg.max_ops
                        && validate(&cand, &opts).is_ok()
                        && !is_nan_producing(&cand, &cfg.oracle)
                        && check_equivalence(e, &cand, &cfg.oracle).is_equivalent();
                    if ok {
                        accepted.insert(cand.clone());
                        next.insert(cand);
                    } else {
                        // Over-long intermediates may still shrink later.
                        rejected.insert(cand.clone());
                        if cand.count_operators() <= 2 * cfg.max_ops {
                            next.insert(cand);
                        }
                    }
                }
            }
        }
        frontier = next;
    }
    accepted
}
