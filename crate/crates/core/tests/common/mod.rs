#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use bpl_core::grammar::{enumerate_support, Item, MetaGrammar};
use bpl_core::inference::{Chain, InferenceProblem, LikelihoodMemo, Scorer};
use bpl_core::lsystem::{expand_to_depth, LSystem, Symbol, MAX_DEPTH};
use bpl_core::render::{BinaryImage, InkParams, RenderSettings, Resolution};

pub const SMALL: &str = "angles: 90 45\nStart -> F A F | G\nA -> - | + B +\nB -> G | F\n";
pub const AMBIGUOUS: &str = "angles: 30 60 90\nStart -> X X | F F | G\nX -> F | G | + F -\n";
pub const WITH_EMPTY: &str = "angles: 60 90\nStart -> F T F | G T G\nT -> + | - E - | ε\nE -> F | G | ε\n";

pub type Key = (String, u64, Option<u8>);

pub fn key(l: &LSystem, depth: Option<u8>) -> Key {
    (l.f_rule.to_string(), l.angle_deg.to_bits(), depth)
}

/// Low-resolution, noisy rendering that keeps small posteriors spread out.
pub fn coarse() -> RenderSettings {
    RenderSettings::new(Resolution::square(6), InkParams::new(2.0, 1, 0.35).unwrap())
}

pub fn concept(g: &MetaGrammar, rule: &str, angle: f64) -> LSystem {
    enumerate_support(g, 16, 1000)
        .unwrap()
        .into_iter()
        .map(|(l, _)| l)
        .find(|l| l.f_rule.to_string() == rule && l.angle_deg == angle)
        .unwrap()
}

pub fn observe(render: &RenderSettings, l: &LSystem, depth: u8) -> BinaryImage {
    render.observe(&expand_to_depth(l, depth).unwrap(), l.angle_deg)
}

/// Exact posterior over `(L, j)` from the enumerated prior and the scorer.
pub fn exact_posterior(problem: &InferenceProblem) -> HashMap<Key, f64> {
    let g = &problem.grammar;
    let mut scorer = Scorer::new(problem, None);
    let depths: Vec<Option<u8>> =
        if problem.latent_depth() { (0..=MAX_DEPTH).map(Some).collect() } else { vec![None] };
    let mut logp = Vec::new();
    for (l, lp) in enumerate_support(g, 16, 1000).unwrap() {
        let angle = g.angles().iter().position(|&a| a == l.angle_deg).unwrap();
        for &d in &depths {
            logp.push((key(&l, d), lp + scorer.log_likelihood(&l, angle, d)));
        }
    }
    let max = logp.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logp.iter().map(|(_, v)| (v - max).exp()).sum();
    logp.into_iter().map(|(k, v)| (k, (v - max).exp() / z)).collect()
}

pub fn chain_frequencies(problem: &InferenceProblem, steps: usize, seed: u64) -> HashMap<Key, f64> {
    let memo = LikelihoodMemo::new();
    let mut chain = Chain::new(problem, seed, Some(&memo));
    let mut counts: HashMap<Key, f64> = HashMap::new();
    for _ in 0..steps {
        chain.step();
        let s = chain.state();
        *counts.entry(key(&s.lsystem, s.depth)).or_default() += 1.0;
    }
    counts.values_mut().for_each(|c| *c /= steps as f64);
    counts
}

pub fn total_variation(p: &HashMap<Key, f64>, q: &HashMap<Key, f64>) -> f64 {
    let keys: HashSet<&Key> = p.keys().chain(q.keys()).collect();
    keys.into_iter().map(|k| (p.get(k).unwrap_or(&0.0) - q.get(k).unwrap_or(&0.0)).abs()).sum::<f64>() / 2.0
}

pub struct Exactness {
    pub hypotheses: usize,
    pub top_mass: f64,
    pub tv: f64,
    pub left_support: bool,
}

pub fn exactness(problem: &InferenceProblem, steps: usize, seed: u64) -> Exactness {
    let exact = exact_posterior(problem);
    let freq = chain_frequencies(problem, steps, seed);
    Exactness {
        hypotheses: exact.len(),
        top_mass: exact.values().cloned().fold(0.0, f64::max),
        tv: total_variation(&exact, &freq),
        left_support: !freq.keys().all(|k| exact.contains_key(k)),
    }
}

/// The three enumerable problems: observed depths, an ambiguous grammar and
/// a latent depth.
pub fn exactness_problems() -> Vec<(&'static str, InferenceProblem)> {
    let render = coarse();
    let small = MetaGrammar::parse(SMALL).unwrap();
    let ambiguous = MetaGrammar::parse(AMBIGUOUS).unwrap();
    let a = concept(&small, "F+F+F", 90.0);
    let b = concept(&ambiguous, "F+F-", 60.0);
    let c = concept(&small, "F-F", 45.0);
    vec![
        ("known depth", InferenceProblem::known_depth(small.clone(), vec![(1, observe(&render, &a, 1))], render.clone()).unwrap()),
        ("ambiguous", InferenceProblem::known_depth(ambiguous, vec![(1, observe(&render, &b, 1))], render.clone()).unwrap()),
        ("latent depth", InferenceProblem::unknown_depth(small, observe(&render, &c, 1), render).unwrap()),
    ]
}

/// Probability of every F-rule of a finite grammar, by expanding every
/// derivation tree and summing products of uniform choice probabilities.
pub fn derivation_mass(g: &MetaGrammar) -> HashMap<String, f64> {
    fn walk(g: &MetaGrammar, prefix: Vec<Symbol>, pending: Vec<Item>, p: f64, out: &mut HashMap<String, f64>) {
        let mut prefix = prefix;
        let mut pending = pending;
        while let Some(Item::Terminal(t)) = pending.first() {
            prefix.extend_from_slice(t);
            pending.remove(0);
        }
        match pending.first().cloned() {
            None => {
                let s: String = prefix.iter().map(|s| s.as_char()).collect();
                *out.entry(s).or_default() += p;
            }
            Some(Item::Nonterminal(nt)) => {
                let prods = g.productions(nt);
                for prod in prods {
                    let mut next = prod.items.clone();
                    next.extend_from_slice(&pending[1..]);
                    walk(g, prefix.clone(), next, p / prods.len() as f64, out);
                }
            }
            Some(Item::Terminal(_)) => unreachable!(),
        }
    }
    let mut out = HashMap::new();
    walk(g, Vec::new(), vec![Item::Nonterminal(0)], 1.0, &mut out);
    out
}

/// Rewrites by text substitution, one character at a time.
pub fn naive_rewrite(s: &str, f: &str, g: &str) -> String {
    s.chars()
        .map(|c| match c {
            'F' => f.to_string(),
            'G' => g.to_string(),
            other => other.to_string(),
        })
        .collect()
}

/// Modified Hausdorff distance over explicit point lists.
pub fn brute_mhd(a: &BinaryImage, b: &BinaryImage) -> f64 {
    let points = |img: &BinaryImage| {
        let res = img.resolution();
        let mut v = Vec::new();
        for y in 0..res.height {
            for x in 0..res.width {
                if img.get(x, y) {
                    v.push((x as f64, y as f64));
                }
            }
        }
        v
    };
    let (pa, pb) = (points(a), points(b));
    let directed = |from: &[(f64, f64)], to: &[(f64, f64)]| {
        from.iter()
            .map(|p| to.iter().map(|q| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt()).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / from.len() as f64
    };
    directed(&pa, &pb).max(directed(&pb, &pa))
}

pub fn image_from_bits(bits: u32, res: Resolution) -> BinaryImage {
    BinaryImage::from_fn(res, |x, y| bits >> (y * res.width + x) & 1 == 1)
}
