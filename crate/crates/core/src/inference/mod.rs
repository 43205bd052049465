//! Metropolis-Hastings inference over programs and depths, posterior
//! predictive scoring, and the decision policies built on it.

mod chain;
mod policy;
mod predictive;
mod problem;
mod score;

pub use chain::{mh_step, run_chain, run_chain_with_memo, Chain, ChainRun, ChainState, Move, StepOutcome, TraceRecord};
pub use policy::{
    argmax, classify, classify_with_state, generate_via_interface, generate_with_state, greedy_assignment,
    ideal_observer, GreedyResult, SegmentOrder,
};
pub use predictive::{framed_predictive_image, posterior_predictive_score, predictive_image, predictive_strings};
pub use problem::{InferenceProblem, Observations, ProposalWeights};
pub use score::{effective_depth, LikelihoodMemo, Scorer};
