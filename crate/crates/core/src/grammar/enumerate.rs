use std::collections::BTreeSet;

use crate::error::GrammarError;
use crate::lsystem::{LSystem, Symbol, SymbolString};

use super::derivation::MAX_TREE_NODES;
use super::meta::{Item, MetaGrammar};
use super::parse::rule_log_prior;

/// Default ceiling on the number of systems [`enumerate_support`] returns.
pub const SUPPORT_LIMIT: usize = 100_000;

/// Every system whose F-rule has at most `max_len` symbols, with its exact
/// log prior. Fails with `SupportTooLarge` past `limit` systems.
pub fn enumerate_support(
    g: &MetaGrammar,
    max_len: usize,
    limit: usize,
) -> Result<Vec<(LSystem, f64)>, GrammarError> {
    let rules = enumerate_rules(g, max_len, limit / g.angles().len())
        .map_err(|_| GrammarError::SupportTooLarge { limit })?;
    let mut out = Vec::with_capacity(rules.len() * g.angles().len());
    for rule in rules {
        let rule = SymbolString::from_symbols(rule);
        let lp = rule_log_prior(g, &rule)? + g.log_angle_prob();
        for &angle in g.angles() {
            let l = LSystem { axiom: g.axiom().clone(), angle_deg: angle, f_rule: rule.clone(), g_rule: g.g_rule().clone() };
            out.push((l, lp));
        }
    }
    if out.len() > limit {
        return Err(GrammarError::SupportTooLarge { limit });
    }
    Ok(out)
}

/// Distinct F-rules of length at most `max_len`, found by depth-first
/// leftmost derivation with length pruning.
fn enumerate_rules(g: &MetaGrammar, max_len: usize, limit: usize) -> Result<BTreeSet<Vec<Symbol>>, GrammarError> {
    let min_len = min_yield_lengths(g);
    let mut found = BTreeSet::new();
    let mut steps = 0usize;
    let step_budget = limit.saturating_mul(1000).max(1_000_000);
    // Pending items are kept reversed: the next item to expand is last.
    let mut work: Vec<(Vec<Symbol>, Vec<Item>, usize)> = vec![(Vec::new(), vec![Item::Nonterminal(0)], 0)];
    while let Some((mut prefix, mut pending, nodes)) = work.pop() {
        steps += 1;
        if steps > step_budget {
            return Err(GrammarError::SupportTooLarge { limit });
        }
        // Emit leading terminals.
        while let Some(Item::Terminal(t)) = pending.last() {
            prefix.extend_from_slice(t);
            pending.pop();
        }
        let committed: usize = pending.iter().map(|i| item_min_len(i, &min_len)).sum();
        if prefix.len() + committed > max_len {
            continue;
        }
        match pending.pop() {
            None => {
                found.insert(prefix);
                if found.len() > limit {
                    return Err(GrammarError::SupportTooLarge { limit });
                }
            }
            Some(Item::Nonterminal(nt)) => {
                if nodes == MAX_TREE_NODES {
                    continue;
                }
                for p in g.productions(nt) {
                    let mut next = pending.clone();
                    next.extend(p.items.iter().rev().cloned());
                    work.push((prefix.clone(), next, nodes + 1));
                }
            }
            Some(Item::Terminal(_)) => unreachable!("terminals were emitted above"),
        }
    }
    Ok(found)
}

fn item_min_len(item: &Item, min_len: &[usize]) -> usize {
    match item {
        Item::Terminal(t) => t.len(),
        Item::Nonterminal(n) => min_len[*n as usize],
    }
}

/// Length of the shortest string each nonterminal derives.
pub fn min_yield_lengths(g: &MetaGrammar) -> Vec<usize> {
    let k = g.nonterminal_count();
    let mut best = vec![usize::MAX; k];
    loop {
        let mut changed = false;
        for nt in 0..k {
            for p in g.productions(nt as u16) {
                let mut total = 0usize;
                for item in &p.items {
                    let l = match item {
                        Item::Terminal(t) => t.len(),
                        Item::Nonterminal(b) => best[*b as usize],
                    };
                    total = total.saturating_add(l);
                }
                if total < best[nt] {
                    best[nt] = total;
                    changed = true;
                }
            }
        }
        if !changed {
            return best;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse::length_mass;

    #[test]
    fn singleton_support() {
        let g = MetaGrammar::parse("angles: 60\nStart -> G-G+F+G-G\n").unwrap();
        let s = enumerate_support(&g, 20, 100).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].1, 0.0);
    }

    #[test]
    fn support_mass_matches_length_recursion() {
        let g = MetaGrammar::default_grammar();
        for max_len in [5, 9, 13, 17] {
            let s = enumerate_support(&g, max_len, 1_000_000).unwrap();
            let total: f64 = s.iter().map(|(_, lp)| lp.exp()).sum();
            let mass: f64 = length_mass(&g, max_len).iter().sum();
            assert!((total - mass).abs() < 1e-12, "max_len {max_len}: {total} vs {mass}");
        }
    }

    #[test]
    fn fig2_rule_appears_from_length_nine() {
        let g = MetaGrammar::default_grammar();
        let has = |n| {
            enumerate_support(&g, n, 1_000_000)
                .unwrap()
                .iter()
                .any(|(l, _)| l.f_rule.to_string() == "G-G+F+G-G" && l.angle_deg == 60.0)
        };
        assert!(!has(8));
        assert!(has(9));
    }

    #[test]
    fn support_limit() {
        let g = MetaGrammar::default_grammar();
        assert!(matches!(enumerate_support(&g, 30, 50), Err(GrammarError::SupportTooLarge { limit: 50 })));
    }
}
