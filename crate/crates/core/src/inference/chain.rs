use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grammar::{regenerate_subtree, sample_tree, DerivationTree};
use crate::lsystem::{LSystem, MAX_DEPTH};
use crate::seed;

use super::problem::InferenceProblem;
use super::score::{LikelihoodMemo, Scorer};

/// One hypothesis `(L, j)` with its cached scores.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub tree: DerivationTree,
    pub lsystem: LSystem,
    /// Latent depth; `None` when depths are observed.
    pub depth: Option<u8>,
    pub log_prior: f64,
    pub log_likelihood: f64,
}

impl ChainState {
    pub fn new(scorer: &mut Scorer, tree: DerivationTree, depth: Option<u8>) -> Self {
        let problem = scorer.problem();
        let g = &problem.grammar;
        let lsystem = tree.lsystem(g);
        let log_prior = tree.log_prob(g) + problem.log_depth_prior();
        let log_likelihood = scorer.log_likelihood(&lsystem, tree.angle_index(), depth);
        ChainState { tree, lsystem, depth, log_prior, log_likelihood }
    }

    /// A draw from the prior (truncated to the tree-size limit).
    pub fn from_prior<R: Rng + ?Sized>(scorer: &mut Scorer, rng: &mut R) -> Self {
        let problem = scorer.problem();
        let tree = sample_tree(&problem.grammar, rng);
        let depth = problem.latent_depth().then(|| rng.random_range(0..=MAX_DEPTH));
        Self::new(scorer, tree, depth)
    }

    pub fn log_posterior(&self) -> f64 {
        self.log_prior + self.log_likelihood
    }

    /// The same state with every cached score recomputed from scratch.
    pub fn recompute(&self, problem: &InferenceProblem) -> ChainState {
        Self::new(&mut Scorer::new(problem, None), self.tree.clone(), self.depth)
    }
}

/// Which move a step proposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Move {
    Subtree,
    Angle,
    Depth,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: ChainState,
    pub proposed: Move,
    pub accepted: bool,
}

/// One Metropolis-Hastings step: subtree regeneration, angle resampling or a
/// clipped ±1 depth move, accepted with the exact MH ratio.
pub fn mh_step<R: Rng + ?Sized>(state: &ChainState, scorer: &mut Scorer, rng: &mut R) -> StepOutcome {
    let problem = scorer.problem();
    let g = &problem.grammar;
    let (w_subtree, w_angle, _) = problem.weights.normalized(problem.latent_depth());
    let u: f64 = rng.random();
    let (proposed, candidate, log_q_ratio) = if u < w_subtree {
        match regenerate_subtree(&state.tree, g, rng) {
            Some(r) => (Move::Subtree, Some((r.tree, state.depth)), r.reverse_logq - r.forward_logq),
            None => (Move::Subtree, None, 0.0),
        }
    } else if u < w_subtree + w_angle || !problem.latent_depth() {
        let angle = rng.random_range(0..g.angles().len());
        (Move::Angle, Some((state.tree.with_angle(angle), state.depth)), 0.0)
    } else {
        let j = state.depth.unwrap_or(0);
        let next = if rng.random_bool(0.5) { j.saturating_sub(1) } else { (j + 1).min(MAX_DEPTH) };
        (Move::Depth, Some((state.tree.clone(), Some(next))), 0.0)
    };
    let Some((tree, depth)) = candidate else {
        return StepOutcome { state: state.clone(), proposed, accepted: false };
    };
    let next = ChainState::new(scorer, tree, depth);
    let log_alpha = next.log_posterior() - state.log_posterior() + log_q_ratio;
    let accepted = log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha;
    if accepted {
        StepOutcome { state: next, proposed, accepted }
    } else {
        StepOutcome { state: state.clone(), proposed, accepted }
    }
}

/// Diagnostic trace line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub log_posterior: f64,
    pub depth: Option<u8>,
    pub f_rule: String,
    pub angle: f64,
    pub accepted: bool,
}

impl TraceRecord {
    fn of(step: usize, state: &ChainState, accepted: bool) -> Self {
        TraceRecord {
            step,
            log_posterior: state.log_posterior(),
            depth: state.depth,
            f_rule: state.lsystem.f_rule.to_string(),
            angle: state.lsystem.angle_deg,
            accepted,
        }
    }
}

/// A running chain that remembers the best state it has visited.
pub struct Chain<'a> {
    scorer: Scorer<'a>,
    rng: ChaCha8Rng,
    state: ChainState,
    best: ChainState,
    steps: usize,
    accepted: usize,
}

impl<'a> Chain<'a> {
    /// Starts from a prior draw made with the chain's own generator.
    pub fn new(problem: &'a InferenceProblem, seed: u64, memo: Option<&'a LikelihoodMemo>) -> Self {
        let mut scorer = Scorer::new(problem, memo);
        let mut rng = seed::rng(seed);
        let state = ChainState::from_prior(&mut scorer, &mut rng);
        Chain { scorer, rng, best: state.clone(), state, steps: 0, accepted: 0 }
    }

    /// Starts from a given hypothesis.
    pub fn from_state(
        problem: &'a InferenceProblem,
        state: ChainState,
        seed: u64,
        memo: Option<&'a LikelihoodMemo>,
    ) -> Self {
        Chain { scorer: Scorer::new(problem, memo), rng: seed::rng(seed), best: state.clone(), state, steps: 0, accepted: 0 }
    }

    pub fn step(&mut self) -> bool {
        let out = mh_step(&self.state, &mut self.scorer, &mut self.rng);
        self.steps += 1;
        if out.accepted {
            self.accepted += 1;
            if out.state.log_posterior() > self.best.log_posterior() {
                self.best = out.state.clone();
            }
            self.state = out.state;
        }
        if cfg!(debug_assertions) && self.steps % 100 == 0 {
            let fresh = self.state.recompute(self.scorer.problem());
            let (a, b) = (fresh.log_posterior(), self.state.log_posterior());
            debug_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "stale cached score: {b} vs {a}");
        }
        out.accepted
    }

    pub fn run(&mut self, n_steps: usize) {
        for _ in 0..n_steps {
            self.step();
        }
    }

    /// Runs `n_steps`, appending a record every `thin` steps (and for the
    /// last step).
    pub fn run_traced(&mut self, n_steps: usize, thin: usize, trace: &mut Vec<TraceRecord>) {
        let thin = thin.max(1);
        for k in 1..=n_steps {
            let accepted = self.step();
            if k % thin == 0 || k == n_steps {
                trace.push(TraceRecord::of(self.steps, &self.state, accepted));
            }
        }
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    /// Highest-posterior state visited, the initial state included.
    pub fn best(&self) -> &ChainState {
        &self.best
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.accepted as f64 / self.steps as f64
        }
    }

    pub fn into_parts(self) -> (ChainState, ChainState) {
        (self.state, self.best)
    }
}

/// Result of [`run_chain`].
#[derive(Clone, Debug)]
pub struct ChainRun {
    pub trace: Vec<TraceRecord>,
    pub final_state: ChainState,
    pub best: ChainState,
}

/// Runs one chain from a prior draw for `n_steps` steps, recording every
/// `thin`-th state. `n_steps = 0` returns the prior draw.
pub fn run_chain(problem: &InferenceProblem, n_steps: usize, seed: u64, thin: usize) -> ChainRun {
    run_chain_with_memo(problem, n_steps, seed, thin, None)
}

pub fn run_chain_with_memo(
    problem: &InferenceProblem,
    n_steps: usize,
    seed: u64,
    thin: usize,
    memo: Option<&LikelihoodMemo>,
) -> ChainRun {
    let mut chain = Chain::new(problem, seed, memo);
    let mut trace = vec![TraceRecord::of(0, chain.state(), true)];
    chain.run_traced(n_steps, thin, &mut trace);
    let (final_state, best) = chain.into_parts();
    ChainRun { trace, final_state, best }
}
