use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, InferenceError};
use crate::grammar::{sample_lsystem_where, sample_tree, MetaGrammar, REJECTION_LIMIT};
use crate::inference::{greedy_assignment, InferenceProblem, SegmentOrder};
use crate::lsystem::{expand_once_capped, expand_to_depth, expand_to_depth_capped, validate_stimulus_constraints, LSystem};
use crate::render::{trace, BinaryImage, RenderSettings};
use crate::seed;

use super::interface::ToggleInterface;

/// Number of answer choices in a classification trial.
pub const CANDIDATES: usize = 6;
/// Display bounds on the number of segments in a generation trial.
pub const MIN_SEGMENTS: usize = 22;
pub const MAX_SEGMENTS: usize = 125;
/// Prior draws tried when looking for five usable distractors.
pub const DISTRACTOR_ATTEMPTS: usize = 2_000;

/// Which growth steps a learner sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    /// Every step up to the most mature one, at known depths.
    Incremental,
    /// The first and the most mature step; the model conditions on the
    /// mature one alone with its depth latent.
    Block,
}

impl Condition {
    pub const ALL: [Condition; 2] = [Condition::Incremental, Condition::Block];

    /// Depths shown to a learner when `mature` is the most mature step.
    pub fn shown_depths(self, mature: u8) -> Vec<u8> {
        match self {
            Condition::Incremental => (0..=mature).collect(),
            Condition::Block => vec![0, mature],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Condition::Incremental => "incremental",
            Condition::Block => "block",
        }
    }
}

/// Shown images of `concept` at `depths`.
pub fn observe_depths(
    concept: &LSystem,
    depths: &[u8],
    render: &RenderSettings,
) -> Result<Vec<(u8, BinaryImage)>, HarnessError> {
    depths
        .iter()
        .map(|&d| Ok((d, render.observe(&expand_to_depth_capped(concept, d, usize::MAX)?, concept.angle_deg))))
        .collect()
}

/// The inference problem a condition poses.
pub fn problem_for(
    grammar: &MetaGrammar,
    condition: Condition,
    observed: &[(u8, BinaryImage)],
    render: &RenderSettings,
) -> Result<InferenceProblem, InferenceError> {
    match condition {
        Condition::Incremental => InferenceProblem::known_depth(grammar.clone(), observed.to_vec(), render.clone()),
        Condition::Block => {
            let (_, mature) = observed.iter().max_by_key(|(d, _)| *d).ok_or(InferenceError::NoObservations)?;
            InferenceProblem::unknown_depth(grammar.clone(), mature.clone(), render.clone())
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassificationTrial {
    pub id: String,
    pub concept: LSystem,
    pub condition: Condition,
    pub observed: Vec<(u8, BinaryImage)>,
    pub candidates: Vec<BinaryImage>,
    pub truth_index: usize,
    /// Systems whose rules produced each distractor, in candidate order
    /// with the true slot skipped.
    pub distractor_sources: Vec<LSystem>,
}

impl ClassificationTrial {
    /// The most mature observed image.
    pub fn mature_image(&self) -> &BinaryImage {
        &self.observed.iter().max_by_key(|(d, _)| *d).expect("trials have observations").1
    }

    pub fn mature_depth(&self) -> u8 {
        self.observed.iter().map(|(d, _)| *d).max().unwrap_or(0)
    }

    pub fn problem(&self, grammar: &MetaGrammar, render: &RenderSettings) -> Result<InferenceProblem, InferenceError> {
        problem_for(grammar, self.condition, &self.observed, render)
    }
}

/// The continuation of `concept`'s `S_2` under `rules`' F-rule, drawn with
/// the concept's angle.
fn continuation(concept: &LSystem, rules: &LSystem, render: &RenderSettings) -> Result<BinaryImage, HarnessError> {
    let s2 = expand_to_depth_capped(concept, 2, usize::MAX)?;
    let next = expand_once_capped(&s2, &concept.with_f_rule(rules.f_rule.clone()), usize::MAX)?;
    Ok(render.observe(&next, concept.angle_deg))
}

/// One six-way choice: the concept's true `S_3` and five continuations of its
/// `S_2` under other systems' rules, with the truth placed by `seed`.
pub fn build_classification_trial(
    id: impl Into<String>,
    concept: &LSystem,
    distractor_sources: &[LSystem],
    condition: Condition,
    seed: u64,
    render: &RenderSettings,
) -> Result<ClassificationTrial, HarnessError> {
    let truth_index = seed::rng(seed).random_range(0..CANDIDATES);
    assemble_classification_trial(id, concept, distractor_sources, condition, truth_index, render)
}

/// [`build_classification_trial`] with an explicit truth slot.
pub fn assemble_classification_trial(
    id: impl Into<String>,
    concept: &LSystem,
    distractor_sources: &[LSystem],
    condition: Condition,
    truth_index: usize,
    render: &RenderSettings,
) -> Result<ClassificationTrial, HarnessError> {
    if distractor_sources.len() != CANDIDATES - 1 {
        return Err(HarnessError::CandidateCount { expected: CANDIDATES - 1, found: distractor_sources.len() });
    }
    if truth_index >= CANDIDATES {
        return Err(HarnessError::Suite(format!("truth index {truth_index} out of range")));
    }
    let truth = continuation(concept, concept, render)?;
    let mut distractors: Vec<BinaryImage> = Vec::with_capacity(distractor_sources.len());
    for (i, src) in distractor_sources.iter().enumerate() {
        let img = continuation(concept, src, render)?;
        if img == truth {
            return Err(HarnessError::DegenerateDistractor { index: i });
        }
        if let Some(j) = distractors.iter().position(|d| *d == img) {
            return Err(HarnessError::DuplicateDistractor(j, i));
        }
        distractors.push(img);
    }
    let mut candidates = distractors;
    candidates.insert(truth_index, truth);
    Ok(ClassificationTrial {
        id: id.into(),
        concept: concept.clone(),
        condition,
        observed: observe_depths(concept, &condition.shown_depths(2), render)?,
        candidates,
        truth_index,
        distractor_sources: distractor_sources.to_vec(),
    })
}

/// Why a prior draw is not a usable stimulus, if it is not.
pub fn stimulus_failure(l: &LSystem, max_depth: u8) -> Option<String> {
    if let Some(name) = validate_stimulus_constraints(l).first_failure() {
        return Some(name.to_string());
    }
    if l.f_rule.count_f() == 0 {
        return Some("growth".into());
    }
    expand_to_depth(l, max_depth).err().map(|e| e.to_string())
}

/// Whether consecutive steps up to `depth` all look different.
pub fn steps_visible(l: &LSystem, depth: u8, render: &RenderSettings) -> Result<bool, HarnessError> {
    let images = observe_depths(l, &(0..=depth).collect::<Vec<_>>(), render)?;
    Ok(images.windows(2).all(|w| w[0].1 != w[1].1))
}

/// One stimulus concept not in `exclude`: a constraint-passing prior draw
/// that grows visibly and stays within the symbol cap through `max_depth`.
pub fn sample_concept<R: Rng + ?Sized>(
    grammar: &MetaGrammar,
    max_depth: u8,
    render: &RenderSettings,
    rng: &mut R,
    exclude: &[LSystem],
) -> Result<LSystem, HarnessError> {
    loop {
        let (l, _) = sample_lsystem_where(grammar, rng, REJECTION_LIMIT, |l| match stimulus_failure(l, max_depth) {
            Some(reason) => Err(reason),
            None if exclude.contains(l) => Err("duplicate".into()),
            None => Ok(()),
        })?;
        if steps_visible(&l, max_depth, render)? {
            return Ok(l);
        }
    }
}

/// `n` distinct stimulus concepts.
pub fn sample_concepts<R: Rng + ?Sized>(
    grammar: &MetaGrammar,
    n: usize,
    max_depth: u8,
    render: &RenderSettings,
    rng: &mut R,
) -> Result<Vec<LSystem>, HarnessError> {
    let mut out: Vec<LSystem> = Vec::with_capacity(n);
    while out.len() < n {
        let l = sample_concept(grammar, max_depth, render, rng, &out)?;
        out.push(l);
    }
    Ok(out)
}

/// Builds a trial for `concept`, drawing distractor sources from
/// `distractors` until none is degenerate or duplicated.
pub fn sample_classification_trial(
    distractors: &MetaGrammar,
    id: impl Into<String>,
    concept: &LSystem,
    condition: Condition,
    seed: u64,
    render: &RenderSettings,
) -> Result<ClassificationTrial, HarnessError> {
    let id = id.into();
    let mut rng = seed::derived_rng(seed, &[0]);
    let mut sources: Vec<LSystem> = Vec::with_capacity(CANDIDATES - 1);
    let truth = continuation(concept, concept, render)?;
    let mut images = vec![truth];
    let mut attempts = 0;
    while sources.len() < CANDIDATES - 1 {
        attempts += 1;
        if attempts > DISTRACTOR_ATTEMPTS {
            return Err(HarnessError::Suite(format!("no usable distractors for {id}")));
        }
        let src = sample_tree(distractors, &mut rng).lsystem(distractors);
        if src.f_rule == concept.f_rule || src.f_rule.count_forward() == 0 {
            continue;
        }
        let img = continuation(concept, &src, render)?;
        if images.contains(&img) {
            continue;
        }
        images.push(img);
        sources.push(src);
    }
    build_classification_trial(id, concept, &sources, condition, seed::derive(seed, &[1]), render)
}

/// A classification suite: `n_concepts` concepts under every requested
/// condition, with the same candidates in both conditions. Concepts for
/// which five distinct distractors cannot be found are redrawn.
pub fn sample_classification_suite(
    grammar: &MetaGrammar,
    distractors: &MetaGrammar,
    n_concepts: usize,
    conditions: &[Condition],
    seed: u64,
    render: &RenderSettings,
) -> Result<Vec<ClassificationTrial>, HarnessError> {
    let mut rng = seed::derived_rng(seed, &[0]);
    let mut concepts: Vec<LSystem> = Vec::with_capacity(n_concepts);
    let mut seeds = Vec::with_capacity(n_concepts);
    let mut rejected: Vec<LSystem> = Vec::new();
    for draw in 0u64.. {
        if concepts.len() == n_concepts {
            break;
        }
        let exclude: Vec<LSystem> = concepts.iter().chain(&rejected).cloned().collect();
        let c = sample_concept(grammar, 3, render, &mut rng, &exclude)?;
        let trial_seed = seed::derive(seed, &[1, draw]);
        match sample_classification_trial(distractors, "", &c, Condition::Incremental, trial_seed, render) {
            Ok(_) => {
                concepts.push(c);
                seeds.push(trial_seed);
            }
            Err(HarnessError::Suite(_)) => rejected.push(c),
            Err(e) => return Err(e),
        }
    }
    let mut trials = Vec::with_capacity(concepts.len() * conditions.len());
    for &condition in conditions {
        for (i, (c, &s)) in concepts.iter().zip(&seeds).enumerate() {
            let id = format!("c{:02}-{}", i + 1, condition.label());
            trials.push(sample_classification_trial(distractors, id, c, condition, s, render)?);
        }
    }
    Ok(trials)
}

#[derive(Clone, Debug)]
pub struct GenerationTrial {
    pub id: String,
    pub concept: LSystem,
    pub condition: Condition,
    pub observed: Vec<(u8, BinaryImage)>,
    pub interface: ToggleInterface,
    /// Visual form of the true next step.
    pub truth_image: BinaryImage,
}

impl GenerationTrial {
    pub fn problem(&self, grammar: &MetaGrammar, render: &RenderSettings) -> Result<InferenceProblem, InferenceError> {
        problem_for(grammar, self.condition, &self.observed, render)
    }

    pub fn m(&self) -> usize {
        self.interface.m()
    }
}

/// Display bounds applied when building generation trials.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentBounds {
    pub min: usize,
    pub max: usize,
}

impl Default for SegmentBounds {
    fn default() -> Self {
        SegmentBounds { min: MIN_SEGMENTS, max: MAX_SEGMENTS }
    }
}

/// A generation trial over `S_3` of `concept`.
pub fn build_generation_trial(
    id: impl Into<String>,
    concept: &LSystem,
    condition: Condition,
    bounds: Option<SegmentBounds>,
    render: &RenderSettings,
) -> Result<GenerationTrial, HarnessError> {
    let interface = ToggleInterface::new(concept, 3, render.clone())?;
    if let Some(b) = bounds {
        let m = interface.m();
        if m < b.min {
            return Err(HarnessError::TooFewSegments { found: m, min: b.min });
        }
        if m > b.max {
            return Err(HarnessError::TooManySegments { found: m, max: b.max });
        }
    }
    let truth_image = interface.image(&interface.truth_assignment())?;
    Ok(GenerationTrial {
        id: id.into(),
        concept: concept.clone(),
        condition,
        observed: observe_depths(concept, &condition.shown_depths(3), render)?,
        interface,
        truth_image,
    })
}

/// Shortest normalized segment of `S_3`: how large the smallest clickable
/// part of the display is.
pub fn min_segment_length(concept: &LSystem) -> Option<f64> {
    let s3 = expand_to_depth_capped(concept, 3, usize::MAX).ok()?;
    let t = trace(&s3, concept.angle_deg);
    let width = t.bbox()?.width().max(t.bbox()?.height());
    t.segments.iter().map(|s| s.length() / width).reduce(f64::min)
}

/// Concepts eligible for generation trials: `S_3` within the symbol cap and
/// the display bounds. `S_4` is only ever drawn through the toggle interface.
pub fn generation_eligible(l: &LSystem, bounds: SegmentBounds) -> Result<(), String> {
    if let Some(reason) = stimulus_failure(l, 3) {
        return Err(reason);
    }
    let m = expand_to_depth(l, 3).map_err(|e| e.to_string())?.count_forward();
    if m < bounds.min || m > bounds.max {
        return Err(format!("{m} segments"));
    }
    Ok(())
}

/// Whether the true response looks different from sprouting nothing.
pub fn growth_visible(interface: &ToggleInterface) -> Result<bool, HarnessError> {
    Ok(interface.image(&interface.truth_assignment())? != interface.image(&interface.initial_assignment())?)
}

/// Random visiting orders tried by [`greedy_recoverable`].
pub const GREEDY_CHECK_ORDERS: usize = 8;

/// Whether a single greedy pass guided by the true next step draws the true
/// form, for each of `orders` random visiting orders.
pub fn greedy_recoverable(interface: &ToggleInterface, orders: usize, seed: u64) -> Result<bool, HarnessError> {
    let truth = interface.truth_assignment();
    let target = interface.image(&truth)?;
    let predictive = interface.render(&truth)?;
    for k in 0..orders {
        let r = greedy_assignment(interface, &predictive, SegmentOrder::Random, seed::derive(seed, &[k as u64]));
        if interface.image(&r.assignment)? != target {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Makes `pool` eligible draws whose growth is visible, drops repeats, and
/// keeps the `n` whose smallest segment is largest among those a greedy pass
/// can draw, for every requested condition.
pub fn sample_generation_suite(
    grammar: &MetaGrammar,
    n: usize,
    pool: usize,
    conditions: &[Condition],
    seed: u64,
    render: &RenderSettings,
) -> Result<Vec<GenerationTrial>, HarnessError> {
    let bounds = SegmentBounds::default();
    let mut rng = seed::derived_rng(seed, &[2]);
    let mut candidates: Vec<(f64, LSystem)> = Vec::with_capacity(pool);
    let mut draws = 0;
    while draws < pool.max(n) {
        let (l, _) = sample_lsystem_where(grammar, &mut rng, REJECTION_LIMIT, |l| generation_eligible(l, bounds))?;
        if !growth_visible(&ToggleInterface::new(&l, 3, render.clone())?)? {
            continue;
        }
        draws += 1;
        if !candidates.iter().any(|(_, c)| *c == l) {
            candidates.push((min_segment_length(&l).unwrap_or(0.0), l));
        }
    }
    if candidates.len() < n {
        return Err(HarnessError::Suite(format!("only {} distinct eligible concepts in {pool} draws", candidates.len())));
    }
    // Stable sort keeps draw order among equal sizes.
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut chosen = Vec::with_capacity(n);
    for (i, (size, c)) in candidates.into_iter().enumerate() {
        if chosen.len() == n {
            break;
        }
        let interface = ToggleInterface::new(&c, 3, render.clone())?;
        if greedy_recoverable(&interface, GREEDY_CHECK_ORDERS, seed::derive(seed, &[3, i as u64]))? {
            chosen.push((size, c));
        }
    }
    if chosen.len() < n {
        return Err(HarnessError::Suite(format!("only {} concepts in {pool} draws can be drawn greedily", chosen.len())));
    }
    let candidates = chosen;
    let mut trials = Vec::with_capacity(n * conditions.len());
    for &condition in conditions {
        for (i, (_, c)) in candidates.iter().enumerate() {
            let id = format!("g{:02}-{}", i + 1, condition.label());
            trials.push(build_generation_trial(id, c, condition, Some(bounds), render)?);
        }
    }
    Ok(trials)
}

/// Response score: per-segment agreement with the canonical truth and
/// whether the response draws exactly the true form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationScore {
    pub segment_accuracy: f64,
    pub exact_visual_match: bool,
}

pub fn evaluate_generation(response: &[bool], trial: &GenerationTrial) -> Result<GenerationScore, HarnessError> {
    let truth = trial.interface.truth_assignment();
    let image = trial.interface.image(response)?;
    let agree = response.iter().zip(&truth).filter(|(a, b)| a == b).count();
    Ok(GenerationScore {
        segment_accuracy: if truth.is_empty() { 1.0 } else { agree as f64 / truth.len() as f64 },
        exact_visual_match: image == trial.truth_image,
    })
}
