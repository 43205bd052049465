use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::GrammarError;
use crate::lsystem::{LSystem, SymbolString};

use super::meta::{Item, MetaGrammar};

/// Largest derivation the prior admits. Trees past this size have prior
/// probability zero, which keeps sampling and rendering bounded.
pub const MAX_TREE_NODES: usize = 256;

/// Default number of draws before constrained sampling gives up.
pub const REJECTION_LIMIT: usize = 10_000;

/// One applied production.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Node {
    pub nt: u16,
    pub prod: u16,
}

/// A derivation of an F-rule from `Start`, stored as its nodes in pre-order,
/// plus the chosen angle.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DerivationTree {
    nodes: Vec<Node>,
    angle: u16,
}

impl DerivationTree {
    /// Wraps pre-order nodes; fails if they do not form one complete
    /// derivation from `Start`.
    pub fn from_nodes(g: &MetaGrammar, nodes: Vec<Node>, angle: usize) -> Result<Self, GrammarError> {
        if angle >= g.angles().len() {
            return Err(GrammarError::Invalid(format!("angle index {angle} out of range")));
        }
        let mut pending = vec![0u16];
        for (i, node) in nodes.iter().enumerate() {
            let expected = pending.pop().ok_or_else(|| GrammarError::Invalid(format!("extra node at {i}")))?;
            if node.nt != expected {
                return Err(GrammarError::Invalid(format!("node {i} expands {} where {} is due", node.nt, expected)));
            }
            let prods = g.productions(node.nt);
            let prod = prods
                .get(node.prod as usize)
                .ok_or_else(|| GrammarError::Invalid(format!("node {i} uses missing production {}", node.prod)))?;
            let children: Vec<u16> = prod.nonterminals().collect();
            pending.extend(children.into_iter().rev());
        }
        if !pending.is_empty() {
            return Err(GrammarError::Invalid("derivation is incomplete".into()));
        }
        Ok(DerivationTree { nodes, angle: angle as u16 })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn angle_index(&self) -> usize {
        self.angle as usize
    }

    pub fn with_angle(&self, angle: usize) -> DerivationTree {
        DerivationTree { nodes: self.nodes.clone(), angle: angle as u16 }
    }

    /// Exclusive end index of every node's subtree.
    pub fn subtree_ends(&self, g: &MetaGrammar) -> Vec<usize> {
        subtree_ends(g, &self.nodes)
    }

    /// Log-probability of the production choices alone.
    pub fn rule_log_prob(&self, g: &MetaGrammar) -> f64 {
        self.nodes.iter().map(|n| g.log_choice(n.nt)).sum()
    }

    /// Log-probability of the whole derivation including the angle choice.
    pub fn log_prob(&self, g: &MetaGrammar) -> f64 {
        self.rule_log_prob(g) + g.log_angle_prob()
    }

    pub fn f_rule(&self, g: &MetaGrammar) -> SymbolString {
        let mut out = SymbolString::new();
        let mut pos = 0;
        yield_into(g, &self.nodes, &mut pos, &mut out);
        out
    }

    pub fn angle_deg(&self, g: &MetaGrammar) -> f64 {
        g.angles()[self.angle as usize]
    }

    pub fn lsystem(&self, g: &MetaGrammar) -> LSystem {
        LSystem {
            axiom: g.axiom().clone(),
            angle_deg: self.angle_deg(g),
            f_rule: self.f_rule(g),
            g_rule: g.g_rule().clone(),
        }
    }
}

fn yield_into(g: &MetaGrammar, nodes: &[Node], pos: &mut usize, out: &mut SymbolString) {
    let node = nodes[*pos];
    *pos += 1;
    for item in &g.productions(node.nt)[node.prod as usize].items {
        match item {
            Item::Terminal(t) => t.iter().for_each(|s| out.push(*s, 1.0)),
            Item::Nonterminal(_) => yield_into(g, nodes, pos, out),
        }
    }
}

fn subtree_ends(g: &MetaGrammar, nodes: &[Node]) -> Vec<usize> {
    fn walk(g: &MetaGrammar, nodes: &[Node], pos: &mut usize, ends: &mut [usize]) {
        let me = *pos;
        let node = nodes[me];
        *pos += 1;
        for _ in 0..g.productions(node.nt)[node.prod as usize].arity() {
            walk(g, nodes, pos, ends);
        }
        ends[me] = *pos;
    }
    let mut ends = vec![0; nodes.len()];
    let mut pos = 0;
    while pos < nodes.len() {
        walk(g, nodes, &mut pos, &mut ends);
    }
    ends
}

/// Samples a derivation of `nt` in pre-order, failing once it would exceed
/// `budget` nodes.
pub fn sample_subtree<R: Rng + ?Sized>(
    g: &MetaGrammar,
    nt: u16,
    rng: &mut R,
    budget: usize,
) -> Result<Vec<Node>, GrammarError> {
    let mut nodes = Vec::new();
    let mut stack = vec![nt];
    while let Some(nt) = stack.pop() {
        if nodes.len() == budget {
            return Err(GrammarError::DerivationTooLarge { limit: budget });
        }
        let prods = g.productions(nt);
        let prod = rng.random_range(0..prods.len());
        nodes.push(Node { nt, prod: prod as u16 });
        let before = stack.len();
        stack.extend(prods[prod].nonterminals());
        stack[before..].reverse();
    }
    Ok(nodes)
}

/// One draw from the prior truncated to [`MAX_TREE_NODES`] (oversized draws
/// are redrawn).
pub fn sample_tree<R: Rng + ?Sized>(g: &MetaGrammar, rng: &mut R) -> DerivationTree {
    loop {
        let angle = rng.random_range(0..g.angles().len());
        if let Ok(nodes) = sample_subtree(g, 0, rng, MAX_TREE_NODES) {
            return DerivationTree { nodes, angle: angle as u16 };
        }
    }
}

/// Draws from the prior until `check` accepts the system, reporting the last
/// failure reason if `limit` draws all fail.
pub fn sample_lsystem_where<R: Rng + ?Sized>(
    g: &MetaGrammar,
    rng: &mut R,
    limit: usize,
    mut check: impl FnMut(&LSystem) -> Result<(), String>,
) -> Result<(LSystem, DerivationTree), GrammarError> {
    let mut last_failure = String::from("none");
    for _ in 0..limit {
        let tree = sample_tree(g, rng);
        let l = tree.lsystem(g);
        match check(&l) {
            Ok(()) => return Ok((l, tree)),
            Err(reason) => last_failure = reason,
        }
    }
    Err(GrammarError::RejectionLimitExceeded { attempts: limit, last_failure })
}

/// Samples a concept from the prior. With `constrained`, draws are rejected
/// until every stimulus constraint holds.
pub fn sample_lsystem<R: Rng + ?Sized>(
    g: &MetaGrammar,
    rng: &mut R,
    constrained: bool,
) -> Result<(LSystem, DerivationTree), GrammarError> {
    sample_lsystem_where(g, rng, REJECTION_LIMIT, |l| {
        if !constrained {
            return Ok(());
        }
        let report = crate::lsystem::validate_stimulus_constraints(l);
        match report.first_failure() {
            None => Ok(()),
            Some(name) => Err(name.to_string()),
        }
    })
}

/// Result of a subtree-regeneration proposal.
#[derive(Clone, Debug)]
pub struct Regeneration {
    pub tree: DerivationTree,
    /// `log q(new | old)`.
    pub forward_logq: f64,
    /// `log q(old | new)`.
    pub reverse_logq: f64,
}

/// Picks a node uniformly, resamples its subtree from the grammar, and returns
/// the exact forward and reverse proposal densities. Regenerating the root
/// redraws the whole program, angle included. Returns `None` when the
/// regenerated tree would exceed [`MAX_TREE_NODES`]; such proposals have
/// zero prior mass and are rejected.
pub fn regenerate_subtree<R: Rng + ?Sized>(t: &DerivationTree, g: &MetaGrammar, rng: &mut R) -> Option<Regeneration> {
    let ends = t.subtree_ends(g);
    let i = rng.random_range(0..t.nodes.len());
    let kept = t.nodes.len() - (ends[i] - i);
    let sub = sample_subtree(g, t.nodes[i].nt, rng, MAX_TREE_NODES - kept).ok()?;
    let mut nodes = Vec::with_capacity(kept + sub.len());
    nodes.extend_from_slice(&t.nodes[..i]);
    nodes.extend_from_slice(&sub);
    nodes.extend_from_slice(&t.nodes[ends[i]..]);
    let angle = if i == 0 { rng.random_range(0..g.angles().len()) as u16 } else { t.angle };
    let tree = DerivationTree { nodes, angle };
    let (forward_logq, reverse_logq) = proposal_log_densities(g, t, &ends, &tree);
    Some(Regeneration { tree, forward_logq, reverse_logq })
}

/// `(log q(b | a), log q(a | b))` for subtree regeneration, summing over
/// every node whose regeneration could turn one tree into the other.
pub fn proposal_logq(g: &MetaGrammar, a: &DerivationTree, b: &DerivationTree) -> (f64, f64) {
    proposal_log_densities(g, a, &a.subtree_ends(g), b)
}

fn proposal_log_densities(g: &MetaGrammar, a: &DerivationTree, a_ends: &[usize], b: &DerivationTree) -> (f64, f64) {
    let (na, nb) = (a.nodes.len(), b.nodes.len());
    let b_ends = b.subtree_ends(g);
    let first_diff = a.nodes.iter().zip(&b.nodes).position(|(x, y)| x != y).unwrap_or(na.min(nb));
    let common_suffix = a.nodes.iter().rev().zip(b.nodes.iter().rev()).take_while(|(x, y)| x == y).count();
    let prefix = |nodes: &[Node]| {
        let mut acc = Vec::with_capacity(nodes.len() + 1);
        acc.push(0.0);
        for n in nodes {
            acc.push(acc.last().unwrap() + g.log_choice(n.nt));
        }
        acc
    };
    let (pa, pb) = (prefix(&a.nodes), prefix(&b.nodes));
    let mut fwd = Vec::new();
    let mut rev = Vec::new();
    let last = first_diff.min(na.saturating_sub(1)).min(nb.saturating_sub(1));
    let log_angle = g.log_angle_prob();
    for i in 0..=last {
        if i > 0 && a.angle != b.angle {
            break;
        }
        let tail_a = na - a_ends[i];
        let tail_b = nb - b_ends[i];
        if tail_a == tail_b && tail_a <= common_suffix {
            let root = if i == 0 { log_angle } else { 0.0 };
            fwd.push(pb[b_ends[i]] - pb[i] + root);
            rev.push(pa[a_ends[i]] - pa[i] + root);
        }
    }
    (log_sum_exp(&fwd) - (na as f64).ln(), log_sum_exp(&rev) - (nb as f64).ln())
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> MetaGrammar {
        MetaGrammar::parse("angles: 90\nStart -> F A F | G\nA -> - | + B +\nB -> G | F\n").unwrap()
    }

    #[test]
    fn single_derivation_grammar() {
        let g = MetaGrammar::parse("angles: 60\nStart -> G-G+F+G-G\n").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            let (l, t) = sample_lsystem(&g, &mut rng, false).unwrap();
            assert_eq!(l.f_rule.to_string(), "G-G+F+G-G");
            assert_eq!(t.log_prob(&g), 0.0);
        }
    }

    #[test]
    fn branch_frequencies() {
        let g = MetaGrammar::parse("angles: 90\nStart -> F | G\n").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let f = (0..n).filter(|_| sample_tree(&g, &mut rng).f_rule(&g).to_string() == "F").count();
        assert!((f as f64 / n as f64 - 0.5).abs() < 0.02);
    }

    #[test]
    fn yields_and_ends() {
        let g = small();
        let t = DerivationTree::from_nodes(
            &g,
            vec![Node { nt: 0, prod: 0 }, Node { nt: 1, prod: 1 }, Node { nt: 2, prod: 1 }],
            0,
        )
        .unwrap();
        assert_eq!(t.f_rule(&g).to_string(), "F+F+F");
        assert_eq!(t.subtree_ends(&g), vec![3, 3, 3]);
        assert!((t.log_prob(&g) - (0.125f64).ln()).abs() < 1e-12);
        assert!(DerivationTree::from_nodes(&g, vec![Node { nt: 0, prod: 0 }], 0).is_err());
        assert!(DerivationTree::from_nodes(&g, vec![Node { nt: 1, prod: 0 }], 0).is_err());
    }

    #[test]
    fn regenerating_a_single_node_tree_resamples_everything() {
        let g = MetaGrammar::parse("angles: 90\nStart -> F | G | F-F\n").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = sample_tree(&g, &mut rng);
        for _ in 0..50 {
            let r = regenerate_subtree(&t, &g, &mut rng).unwrap();
            assert_eq!(r.tree.len(), 1);
            assert!((r.forward_logq - (1.0f64 / 3.0).ln()).abs() < 1e-12);
            assert!((r.reverse_logq - (1.0f64 / 3.0).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn proposal_density_matches_exhaustive_sum() {
        // Brute force: q(b|a) = (1/|a|) sum_i P(regenerating node i yields b),
        // where the root redraws the angle and other nodes keep it.
        let g = MetaGrammar::parse("angles: 90 45\nStart -> F A F | G\nA -> - | + B +\nB -> G | F\n").unwrap();
        let all = [
            vec![Node { nt: 0, prod: 1 }],
            vec![Node { nt: 0, prod: 0 }, Node { nt: 1, prod: 0 }],
            vec![Node { nt: 0, prod: 0 }, Node { nt: 1, prod: 1 }, Node { nt: 2, prod: 0 }],
            vec![Node { nt: 0, prod: 0 }, Node { nt: 1, prod: 1 }, Node { nt: 2, prod: 1 }],
        ];
        let trees: Vec<_> = all
            .iter()
            .flat_map(|n| (0..2).map(|a| DerivationTree::from_nodes(&g, n.clone(), a).unwrap()))
            .collect();
        for a in &trees {
            let ends = a.subtree_ends(&g);
            for b in &trees {
                let mut q = 0.0;
                let b_ends = b.subtree_ends(&g);
                for i in 0..a.len().min(b.len()) {
                    let angle_p = if i == 0 {
                        0.5
                    } else if a.angle_index() == b.angle_index() {
                        1.0
                    } else {
                        0.0
                    };
                    if b.nodes()[i].nt == a.nodes()[i].nt
                        && b.nodes()[..i] == a.nodes()[..i]
                        && b.nodes()[b_ends[i]..] == a.nodes()[ends[i]..]
                    {
                        let sub: f64 = b.nodes()[i..b_ends[i]].iter().map(|n| g.log_choice(n.nt)).sum();
                        q += angle_p * sub.exp() / a.len() as f64;
                    }
                }
                let (fwd, rev) = proposal_logq(&g, a, b);
                if q == 0.0 {
                    assert_eq!(fwd, f64::NEG_INFINITY);
                } else {
                    assert!((fwd.exp() - q).abs() < 1e-12, "{a:?} -> {b:?}: {} vs {q}", fwd.exp());
                }
                let (back, _) = proposal_logq(&g, b, a);
                assert!((rev - back).abs() < 1e-12 || (rev == back));
            }
        }
    }

    #[test]
    fn root_regeneration_redraws_the_angle() {
        let g = MetaGrammar::parse("angles: 30 45 60 90\nStart -> F | G\n").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = sample_tree(&g, &mut rng);
        let mut seen = [false; 4];
        for _ in 0..200 {
            let r = regenerate_subtree(&t, &g, &mut rng).unwrap();
            seen[r.tree.angle_index()] = true;
        }
        assert_eq!(seen, [true; 4]);
    }

    #[test]
    fn rejection_limit_names_failure() {
        let g = MetaGrammar::parse("angles: 90\nStart -> FF\n").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        match sample_lsystem(&g, &mut rng, true) {
            Err(GrammarError::RejectionLimitExceeded { attempts, last_failure }) => {
                assert_eq!(attempts, REJECTION_LIMIT);
                assert_eq!(last_failure, "no-adjacent-forwards");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fig2_rule_is_sampled_by_default_grammar() {
        let g = MetaGrammar::default_grammar();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let hit = (0..20_000).any(|_| sample_tree(&g, &mut rng).f_rule(&g).to_string() == "G-G+F+G-G");
        assert!(hit);
    }
}
