use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::InferenceError;
use crate::exec::Exec;
use crate::harness::ToggleInterface;
use crate::render::{BinaryImage, MeanImage, Rasterizer};
use crate::seed;

use super::chain::{run_chain_with_memo, ChainState};
use super::predictive::{framed_predictive_image, predictive_image};
use super::problem::InferenceProblem;
use super::score::LikelihoodMemo;

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

/// Scores every candidate under the state's next-step predictive and picks
/// the best.
pub fn classify_with_state(
    state: &ChainState,
    problem: &InferenceProblem,
    candidates: &[BinaryImage],
) -> Result<(usize, Vec<f64>), InferenceError> {
    let predictive = predictive_image(state, problem);
    let scores = candidates
        .iter()
        .map(|c| {
            c.check_same_size(problem.resolution())?;
            Ok(predictive.log_likelihood(c)?)
        })
        .collect::<Result<Vec<f64>, InferenceError>>()?;
    let choice = argmax(&scores).ok_or(InferenceError::NoCandidates)?;
    Ok((choice, scores))
}

/// Runs one chain and decides with its last sample.
pub fn classify(
    problem: &InferenceProblem,
    candidates: &[BinaryImage],
    n_steps: usize,
    seed: u64,
) -> Result<usize, InferenceError> {
    let run = run_chain_with_memo(problem, n_steps, seed, usize::MAX, None);
    Ok(classify_with_state(&run.final_state, problem, candidates)?.0)
}

/// Order in which the greedy pass visits segments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentOrder {
    /// A seeded random permutation.
    Random,
    /// Display order, for regression tests.
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GreedyResult {
    pub assignment: Vec<bool>,
    /// Segment decisions made; each compares the segment on and off.
    pub evaluations: usize,
    /// Responses rendered; the current state's render is reused across
    /// decisions.
    pub renders: usize,
}

/// Visits each segment once from the all-off state and keeps whichever of
/// its two settings the predictive scores higher (ties keep the current one).
pub fn greedy_assignment(
    interface: &ToggleInterface,
    predictive: &MeanImage,
    order: SegmentOrder,
    seed: u64,
) -> GreedyResult {
    let m = interface.m();
    let mut visit: Vec<usize> = (0..m).collect();
    if order == SegmentOrder::Random {
        visit.shuffle(&mut seed::rng(seed));
    }
    let mut raster = Rasterizer::new(interface.render_settings().resolution);
    let mut score = |assignment: &[bool]| {
        let img = interface.render_with(&mut raster, assignment).expect("assignment has one entry per segment");
        predictive.log_likelihood(&img.threshold()).expect("predictive matches the interface resolution")
    };
    let mut assignment = interface.initial_assignment();
    let mut current = score(&assignment);
    let mut renders = 1;
    for &i in &visit {
        assignment[i] = !assignment[i];
        let flipped = score(&assignment);
        renders += 1;
        if flipped > current {
            current = flipped;
        } else {
            assignment[i] = !assignment[i];
        }
    }
    GreedyResult { assignment, evaluations: m, renders }
}

/// Greedy response under a state's next-step predictive.
pub fn generate_with_state(
    state: &ChainState,
    problem: &InferenceProblem,
    interface: &ToggleInterface,
    order: SegmentOrder,
    seed: u64,
) -> GreedyResult {
    greedy_assignment(interface, &framed_predictive_image(state, problem), order, seed)
}

/// Runs one chain, then answers greedily with its last sample.
pub fn generate_via_interface(
    problem: &InferenceProblem,
    interface: &ToggleInterface,
    n_steps: usize,
    seed: u64,
) -> Vec<bool> {
    let run = run_chain_with_memo(problem, n_steps, seed::derive(seed, &[0]), usize::MAX, None);
    generate_with_state(&run.final_state, problem, interface, SegmentOrder::Random, seed::derive(seed, &[1])).assignment
}

/// Runs `n_chains` chains sharing one likelihood memo and returns the
/// highest-posterior state any of them visited.
pub fn ideal_observer(problem: &InferenceProblem, n_chains: usize, n_steps: usize, seed: u64, exec: Exec) -> ChainState {
    let memo = LikelihoodMemo::new();
    let bests = exec.map_range(n_chains.max(1), |c| {
        run_chain_with_memo(problem, n_steps, seed::derive(seed, &[c as u64]), usize::MAX, Some(&memo)).best
    });
    let scores: Vec<f64> = bests.iter().map(ChainState::log_posterior).collect();
    bests.into_iter().nth(argmax(&scores).expect("at least one chain")).expect("index in range")
}
