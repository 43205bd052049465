//! Exact prior probabilities by summing over every parse of an F-rule.

use crate::error::GrammarError;
use crate::lsystem::{LSystem, Symbol, SymbolString};

use super::derivation::{DerivationTree, Node};
use super::meta::{Item, MetaGrammar};

const FIXPOINT_TOL: f64 = 1e-16;
const FIXPOINT_ITERS: usize = 10_000;

/// Inside probabilities `P(A =>* s[i..j])` for every nonterminal and span.
pub struct Chart<'g> {
    g: &'g MetaGrammar,
    symbols: Vec<Symbol>,
    table: Vec<f64>,
}

impl<'g> Chart<'g> {
    pub fn new(g: &'g MetaGrammar, rule: &SymbolString) -> Self {
        let symbols = rule.symbols().to_vec();
        let n = symbols.len();
        let k = g.nonterminal_count();
        let mut chart = Chart { g, symbols, table: vec![0.0; k * (n + 1) * (n + 1)] };
        for len in 0..=n {
            for i in 0..=(n - len) {
                chart.fill_span(i, i + len);
            }
        }
        chart
    }

    #[inline]
    fn idx(&self, nt: u16, i: usize, j: usize) -> usize {
        let n1 = self.symbols.len() + 1;
        (nt as usize * n1 + i) * n1 + j
    }

    pub fn inside(&self, nt: u16, i: usize, j: usize) -> f64 {
        self.table[self.idx(nt, i, j)]
    }

    /// Iterates the span's equations to a fixpoint; only empty derivations
    /// and unit chains make a span depend on itself.
    fn fill_span(&mut self, i: usize, j: usize) {
        let k = self.g.nonterminal_count() as u16;
        for _ in 0..FIXPOINT_ITERS {
            let mut change: f64 = 0.0;
            for nt in 0..k {
                let prods = self.g.productions(nt);
                let w = 1.0 / prods.len() as f64;
                let mut total = 0.0;
                for p in prods {
                    total += w * self.sequence(&p.items, i, j);
                }
                let slot = self.idx(nt, i, j);
                let old = self.table[slot];
                change = change.max((total - old).abs() / total.max(f64::MIN_POSITIVE));
                self.table[slot] = total;
            }
            if change <= FIXPOINT_TOL {
                return;
            }
        }
    }

    /// Probability that `items` in sequence derive `s[i..j]`.
    fn sequence(&self, items: &[Item], i: usize, j: usize) -> f64 {
        let width = j - i + 1;
        let mut reach = vec![0.0; width];
        reach[0] = 1.0;
        for item in items {
            let mut next = vec![0.0; width];
            for (off, &p) in reach.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let pos = i + off;
                match item {
                    Item::Terminal(t) => {
                        let end = pos + t.len();
                        if end <= j && self.symbols[pos..end] == t[..] {
                            next[end - i] += p;
                        }
                    }
                    Item::Nonterminal(b) => {
                        for q in pos..=j {
                            let v = self.inside(*b, pos, q);
                            if v > 0.0 {
                                next[q - i] += p * v;
                            }
                        }
                    }
                }
            }
            reach = next;
        }
        reach[width - 1]
    }

    pub fn total(&self) -> f64 {
        self.inside(0, 0, self.symbols.len())
    }
}

/// Log-probability that the grammar derives `rule`, summed over parses.
pub fn rule_log_prior(g: &MetaGrammar, rule: &SymbolString) -> Result<f64, GrammarError> {
    let p = Chart::new(g, rule).total();
    if p > 0.0 {
        Ok(p.ln())
    } else {
        Err(GrammarError::NotInSupport(format!("f-rule {rule:?} has no derivation", rule = rule.to_string())))
    }
}

/// `log P(L)`: F-rule prior plus the uniform angle choice.
pub fn log_prior(g: &MetaGrammar, l: &LSystem) -> Result<f64, GrammarError> {
    if g.angle_index(l.angle_deg).is_none() {
        return Err(GrammarError::NotInSupport(format!("angle {} is not in the angle set", l.angle_deg)));
    }
    if l.axiom != *g.axiom() || l.g_rule != *g.g_rule() {
        return Err(GrammarError::NotInSupport("axiom or g-rule differs from the grammar's".into()));
    }
    Ok(rule_log_prior(g, &l.f_rule)? + g.log_angle_prob())
}

/// Every derivation of `l`, up to `limit` of them. Derivations that revisit
/// the same nonterminal over the same span are skipped so the enumeration
/// stays finite for grammars with empty or unit cycles.
pub fn parse_all(g: &MetaGrammar, l: &LSystem, limit: usize) -> Result<Vec<DerivationTree>, GrammarError> {
    let angle = g
        .angle_index(l.angle_deg)
        .ok_or_else(|| GrammarError::NotInSupport(format!("angle {} is not in the angle set", l.angle_deg)))?;
    let chart = Chart::new(g, &l.f_rule);
    let n = l.f_rule.symbols().len();
    if chart.total() == 0.0 {
        return Err(GrammarError::NotInSupport(format!("f-rule {} has no derivation", l.f_rule)));
    }
    let mut stack = Vec::new();
    let parses = derive(&chart, 0, 0, n, &mut stack, limit)?;
    parses.into_iter().map(|nodes| DerivationTree::from_nodes(g, nodes, angle)).collect()
}

fn derive(
    chart: &Chart,
    nt: u16,
    i: usize,
    j: usize,
    stack: &mut Vec<(u16, usize, usize)>,
    limit: usize,
) -> Result<Vec<Vec<Node>>, GrammarError> {
    if stack.contains(&(nt, i, j)) || chart.inside(nt, i, j) == 0.0 {
        return Ok(Vec::new());
    }
    stack.push((nt, i, j));
    let mut out = Vec::new();
    for (pi, p) in chart.g.productions(nt).iter().enumerate() {
        let head = vec![Node { nt, prod: pi as u16 }];
        let mut partial = vec![(i, head)];
        for item in &p.items {
            let mut next = Vec::new();
            for (pos, nodes) in partial {
                match item {
                    Item::Terminal(t) => {
                        let end = pos + t.len();
                        if end <= j && chart.symbols[pos..end] == t[..] {
                            next.push((end, nodes));
                        }
                    }
                    Item::Nonterminal(b) => {
                        for q in pos..=j {
                            if chart.inside(*b, pos, q) == 0.0 {
                                continue;
                            }
                            for sub in derive(chart, *b, pos, q, stack, limit)? {
                                let mut joined = nodes.clone();
                                joined.extend(sub);
                                next.push((q, joined));
                                if next.len() > limit {
                                    return Err(GrammarError::SupportTooLarge { limit });
                                }
                            }
                        }
                    }
                }
            }
            partial = next;
        }
        out.extend(partial.into_iter().filter(|(pos, _)| *pos == j).map(|(_, nodes)| nodes));
        if out.len() > limit {
            return Err(GrammarError::SupportTooLarge { limit });
        }
    }
    stack.pop();
    Ok(out)
}

/// `mass[n]` = probability that `Start` derives an F-rule of exactly `n`
/// symbols, for `n <= max_len`. Computed by a length recursion independent of
/// any particular string.
pub fn length_mass(g: &MetaGrammar, max_len: usize) -> Vec<f64> {
    let k = g.nonterminal_count();
    let mut mass = vec![vec![0.0; max_len + 1]; k];
    for n in 0..=max_len {
        for _ in 0..FIXPOINT_ITERS {
            let mut change: f64 = 0.0;
            for nt in 0..k {
                let prods = g.productions(nt as u16);
                let w = 1.0 / prods.len() as f64;
                let mut total = 0.0;
                for p in prods {
                    // Distribution of lengths of the item sequence, truncated at n.
                    let mut dist = vec![0.0; n + 1];
                    dist[0] = 1.0;
                    for item in &p.items {
                        let mut next = vec![0.0; n + 1];
                        for (a, &pa) in dist.iter().enumerate() {
                            if pa == 0.0 {
                                continue;
                            }
                            match item {
                                Item::Terminal(t) => {
                                    if a + t.len() <= n {
                                        next[a + t.len()] += pa;
                                    }
                                }
                                Item::Nonterminal(b) => {
                                    for (c, &m) in mass[*b as usize].iter().enumerate().take(n - a + 1) {
                                        next[a + c] += pa * m;
                                    }
                                }
                            }
                        }
                        dist = next;
                    }
                    total += w * dist[n];
                }
                let old = mass[nt][n];
                change = change.max((total - old).abs() / total.max(f64::MIN_POSITIVE));
                mass[nt][n] = total;
            }
            if change <= FIXPOINT_TOL {
                break;
            }
        }
    }
    mass.swap_remove(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lsys(g: &MetaGrammar, rule: &str, angle: f64) -> LSystem {
        LSystem { axiom: g.axiom().clone(), angle_deg: angle, f_rule: rule.parse().unwrap(), g_rule: g.g_rule().clone() }
    }

    #[test]
    fn singleton_grammar_has_prior_one() {
        let g = MetaGrammar::parse("angles: 60\nStart -> G-G+F+G-G\n").unwrap();
        assert_eq!(log_prior(&g, &lsys(&g, "G-G+F+G-G", 60.0)).unwrap(), 0.0);
        assert!(matches!(log_prior(&g, &lsys(&g, "F", 60.0)), Err(GrammarError::NotInSupport(_))));
        assert!(matches!(log_prior(&g, &lsys(&g, "G-G+F+G-G", 90.0)), Err(GrammarError::NotInSupport(_))));
    }

    #[test]
    fn binary_choice() {
        let g = MetaGrammar::parse("angles: 90\nStart -> F | G\n").unwrap();
        assert!((log_prior(&g, &lsys(&g, "G", 90.0)).unwrap() - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn ambiguous_grammar_sums_parses() {
        // "F" derives as A or as B A-with-empty-B.
        let g = MetaGrammar::parse("angles: 90\nStart -> A | B A\nA -> F | G\nB -> ε | -\n").unwrap();
        let l = lsys(&g, "F", 90.0);
        let expected = 0.5 * 0.5 + 0.5 * 0.5 * 0.5;
        assert!((log_prior(&g, &l).unwrap() - f64::ln(expected)).abs() < 1e-15);
        let parses = parse_all(&g, &l, 100).unwrap();
        assert_eq!(parses.len(), 2);
        let total: f64 = parses.iter().map(|t| t.rule_log_prob(&g).exp()).sum();
        assert!((total - expected).abs() < 1e-15);
    }

    #[test]
    fn empty_cycles_converge() {
        // A derives ε with probability p = 1/3 + p^2/3.
        let g = MetaGrammar::parse("angles: 90\nStart -> A F\nA -> ε | - | A A\n").unwrap();
        let p = Chart::new(&g, &"F".parse().unwrap()).total();
        let mass = length_mass(&g, 1);
        let nullable = (3.0 - 5f64.sqrt()) / 2.0;
        assert!((p - nullable).abs() < 1e-12);
        assert!((p - mass[1]).abs() < 1e-12);
    }

    #[test]
    fn parse_yield_round_trip() {
        let g = MetaGrammar::default_grammar();
        let l = lsys(&g, "G-G+F+G-G", 60.0);
        let parses = parse_all(&g, &l, 10).unwrap();
        assert_eq!(parses.len(), 1);
        assert_eq!(parses[0].lsystem(&g), l);
        let lp = log_prior(&g, &l).unwrap();
        assert!((lp - parses[0].log_prob(&g)).abs() < 1e-12);
    }
}
