use crate::error::InferenceError;
use crate::lsystem::{expand_once_capped, expansions, SymbolString};
use crate::render::{trace_raw, trajectory_in_frame, BinaryImage, Frame, MeanImage, Rasterizer};

use super::chain::ChainState;
use super::problem::InferenceProblem;
use super::score::effective_depth;

/// Current and next-step strings of a hypothesis. The cap bounds what is
/// scored against observations, so a current step within it is grown one
/// more step without the cap; a decremented current step stays put.
pub fn predictive_strings(state: &ChainState, problem: &InferenceProblem) -> (SymbolString, SymbolString) {
    let e = problem.current_depth(state.depth);
    let strings = expansions(&state.lsystem, e, problem.cap);
    let current = strings[effective_depth(&strings, e) as usize].clone();
    let next = if strings.len() == e as usize + 1 {
        expand_once_capped(&current, &state.lsystem, usize::MAX).expect("uncapped expansion")
    } else {
        current.clone()
    };
    (current, next)
}

/// Normalized render of the hypothesis one step past the most mature
/// observation.
pub fn predictive_image(state: &ChainState, problem: &InferenceProblem) -> MeanImage {
    let (_, next) = predictive_strings(state, problem);
    problem.render.mean_image(&next, state.lsystem.angle_deg)
}

/// Next-step render placed in the frame of the hypothesis' own current
/// step, matching how the toggle interface draws responses.
pub fn framed_predictive_image(state: &ChainState, problem: &InferenceProblem) -> MeanImage {
    let (current, next) = predictive_strings(state, problem);
    let angle = state.lsystem.angle_deg;
    let ink = &problem.render.ink;
    match Frame::fit(&trace_raw(&current, angle)) {
        Ok(frame) => Rasterizer::new(problem.resolution()).rasterize(&trajectory_in_frame(&next, angle, &frame), ink),
        Err(_) => MeanImage::blank(problem.resolution(), ink),
    }
}

/// `log P(candidate | state)` under the next-step predictive.
pub fn posterior_predictive_score(
    state: &ChainState,
    problem: &InferenceProblem,
    candidate: &BinaryImage,
) -> Result<f64, InferenceError> {
    candidate.check_same_size(problem.resolution())?;
    Ok(predictive_image(state, problem).log_likelihood(candidate)?)
}
