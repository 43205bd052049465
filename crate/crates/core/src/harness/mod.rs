//! Stimulus construction, the toggle interface, baselines and scoring for
//! the classification and generation experiments.

mod experiment;
mod interface;
mod metrics;
mod trials;

pub use experiment::{
    anchor_neighbourhood, classify_metric, classify_nonrecursive, generate_metric, nonrecursive_predictive,
    nonrecursive_score, prefers_all_off, run_classification, run_generation, simulate_classification_trial,
    simulate_generation, simulate_generation_responses, simulate_participants, summary_table, Model, Report, Task,
    TrialResult,
};
pub use interface::{SegmentView, ToggleInterface};
pub use metrics::{
    builtin_metric, euclidean_distance, image_key, modified_hausdorff, squared_distance_transform, CosineEmbedding,
    Euclidean, ModifiedHausdorff, SimilarityMetric,
};
pub use trials::{
    assemble_classification_trial, build_classification_trial, build_generation_trial, evaluate_generation,
    generation_eligible, greedy_recoverable, growth_visible, min_segment_length, observe_depths, problem_for,
    sample_classification_suite, sample_classification_trial, sample_concept, sample_concepts, sample_generation_suite,
    steps_visible, stimulus_failure, ClassificationTrial, Condition, GenerationScore, GenerationTrial, SegmentBounds,
    CANDIDATES, DISTRACTOR_ATTEMPTS, GREEDY_CHECK_ORDERS, MAX_SEGMENTS, MIN_SEGMENTS,
};
