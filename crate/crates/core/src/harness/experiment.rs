use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::exec::Exec;
use crate::grammar::MetaGrammar;
use crate::inference::{
    argmax, classify_with_state, generate_with_state, greedy_assignment, ideal_observer, Chain, ChainState,
    LikelihoodMemo, SegmentOrder,
};
use crate::lsystem::{expand_to_depth_capped, SymbolString};
use crate::render::{BinaryImage, MeanImage, Rasterizer, RenderSettings};
use crate::seed;

use super::metrics::SimilarityMetric;
use super::trials::{evaluate_generation, ClassificationTrial, Condition, GenerationTrial};

/// A responder in either task.
#[derive(Clone, Copy)]
pub enum Model<'a> {
    /// Ideal observer: the highest-posterior state over several long chains.
    Bpl { steps: usize, chains: usize },
    /// Simulated participants: one short chain each, deciding with the last
    /// sample.
    Limited { steps: usize, participants: usize },
    /// Scores with the mature exemplar's own render, without expansion.
    Nonrecursive,
    /// Nearest response to the mature exemplar under a visual metric.
    Metric(&'a dyn SimilarityMetric),
    /// Uniform guessing.
    Random { participants: usize },
}

impl Model<'_> {
    pub fn name(&self) -> String {
        match self {
            Model::Bpl { steps, chains } => format!("bpl(steps={steps},chains={chains})"),
            Model::Limited { steps, participants } => format!("limited(steps={steps},participants={participants})"),
            Model::Nonrecursive => "nonrecursive".into(),
            Model::Metric(m) => m.name().to_string(),
            Model::Random { participants } => format!("random(participants={participants})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classify,
    Generate,
}

impl Task {
    pub fn label(self) -> &'static str {
        match self {
            Task::Classify => "classify",
            Task::Generate => "generate",
        }
    }
}

/// Outcome of one model on one trial, averaged over its participants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: String,
    pub condition: Condition,
    /// Fraction of responses that were correct (classification) or drew
    /// exactly the true form (generation).
    pub accuracy: f64,
    /// Mean per-segment agreement with the truth; generation only.
    pub segment_accuracy: Option<f64>,
    pub responses: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub task: Task,
    pub model: String,
    pub rows: Vec<TrialResult>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut total, mut n) = (0.0, 0usize);
    for v in values {
        total += v;
        n += 1;
    }
    (n > 0).then(|| total / n as f64)
}

impl Report {
    pub fn mean_accuracy(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.accuracy)).unwrap_or(0.0)
    }

    pub fn mean_accuracy_for(&self, condition: Condition) -> Option<f64> {
        mean(self.rows.iter().filter(|r| r.condition == condition).map(|r| r.accuracy))
    }

    pub fn mean_segment_accuracy(&self) -> Option<f64> {
        mean(self.rows.iter().filter_map(|r| r.segment_accuracy))
    }

    /// Tab-separated per-trial table.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("task\tmodel\ttrial\tcondition\taccuracy\tsegment_accuracy\tresponses\n");
        for r in &self.rows {
            let seg = r.segment_accuracy.map(|s| format!("{s:.4}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{:.4}\t{}\t{}",
                self.task.label(),
                self.model,
                r.trial,
                r.condition.label(),
                r.accuracy,
                seg,
                r.responses
            );
        }
        out
    }
}

/// Human-readable accuracy table with one row per model and one column per
/// task.
pub fn summary_table(reports: &[Report]) -> String {
    let mut models: Vec<&str> = Vec::new();
    for r in reports {
        if !models.contains(&r.model.as_str()) {
            models.push(&r.model);
        }
    }
    let width = models.iter().map(|m| m.len()).max().unwrap_or(5).max(5);
    let mut out = format!("{:<width$}  {:>14}  {:>14}\n", "model", "classification", "generation");
    for m in models {
        let cell = |task: Task| {
            reports
                .iter()
                .find(|r| r.model == m && r.task == task)
                .map(|r| format!("{:.1}%", 100.0 * r.mean_accuracy()))
                .unwrap_or_else(|| "-".into())
        };
        let _ = writeln!(out, "{:<width$}  {:>14}  {:>14}", m, cell(Task::Classify), cell(Task::Generate));
    }
    out
}

/// Ground-truth string of the most mature observation.
fn mature_string(concept: &crate::lsystem::LSystem, depth: u8) -> Result<SymbolString, HarnessError> {
    Ok(expand_to_depth_capped(concept, depth, usize::MAX)?)
}

/// `log P(candidate | S_j)` with `S_j` drawn as is.
pub fn nonrecursive_score(
    mature: &SymbolString,
    angle_deg: f64,
    candidate: &BinaryImage,
    render: &RenderSettings,
) -> Result<f64, HarnessError> {
    Ok(render.mean_image(mature, angle_deg).log_likelihood(candidate)?)
}

/// The non-recursive model's choice on a classification trial.
pub fn classify_nonrecursive(trial: &ClassificationTrial, render: &RenderSettings) -> Result<usize, HarnessError> {
    let mature = mature_string(&trial.concept, trial.mature_depth())?;
    let predictive = render.mean_image(&mature, trial.concept.angle_deg);
    let scores = trial.candidates.iter().map(|c| predictive.log_likelihood(c)).collect::<Result<Vec<_>, _>>()?;
    Ok(argmax(&scores).expect("trials have candidates"))
}

/// The candidate nearest the mature exemplar; ties go to the lowest index.
pub fn classify_metric(trial: &ClassificationTrial, metric: &dyn SimilarityMetric) -> Result<usize, HarnessError> {
    let target = trial.mature_image();
    let scores =
        trial.candidates.iter().map(|c| Ok(-metric.distance(c, target)?)).collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(argmax(&scores).expect("trials have candidates"))
}

/// Display-frame render of the displayed exemplar, which is what the
/// non-recursive model predicts for the next step.
pub fn nonrecursive_predictive(trial: &GenerationTrial) -> MeanImage {
    let iface = &trial.interface;
    Rasterizer::new(iface.render_settings().resolution).rasterize(&iface.placed(iface.base()), &iface.render_settings().ink)
}

/// All-off and all-on anchors plus every single-segment change of each.
pub fn anchor_neighbourhood(m: usize) -> Vec<Vec<bool>> {
    let mut out = Vec::with_capacity(2 * (m + 1));
    for anchor in [false, true] {
        let base = vec![anchor; m];
        out.push(base.clone());
        for i in 0..m {
            let mut a = base.clone();
            a[i] = !anchor;
            out.push(a);
        }
    }
    out
}

/// The response in the anchor neighbourhood nearest the mature exemplar.
pub fn generate_metric(trial: &GenerationTrial, metric: &dyn SimilarityMetric) -> Result<Vec<bool>, HarnessError> {
    let target = trial.interface.display_image();
    let mut raster = Rasterizer::new(trial.interface.render_settings().resolution);
    let mut best: Option<(f64, Vec<bool>)> = None;
    for a in anchor_neighbourhood(trial.m()) {
        let img = trial.interface.render_with(&mut raster, &a)?.threshold();
        let d = metric.distance(&img, &target)?;
        if best.as_ref().is_none_or(|(b, _)| d < *b) {
            best = Some((d, a));
        }
    }
    Ok(best.expect("neighbourhood is never empty").1)
}

/// Whether the all-off response is strictly preferred to every single
/// activation that changes the drawing, under `score` (higher is better).
/// Activations too small to show are the same visual response as all-off.
pub fn prefers_all_off(
    trial: &GenerationTrial,
    mut score: impl FnMut(&BinaryImage) -> Result<f64, HarnessError>,
) -> Result<bool, HarnessError> {
    let mut raster = Rasterizer::new(trial.interface.render_settings().resolution);
    let m = trial.m();
    let off = vec![false; m];
    let off_image = trial.interface.render_with(&mut raster, &off)?.threshold();
    let base = score(&off_image)?;
    for i in 0..m {
        let mut a = off.clone();
        a[i] = true;
        let img = trial.interface.render_with(&mut raster, &a)?.threshold();
        if img != off_image && score(&img)? >= base {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Runs a model on a classification suite.
pub fn run_classification(
    trials: &[ClassificationTrial],
    grammar: &MetaGrammar,
    render: &RenderSettings,
    model: Model,
    seed: u64,
    exec: Exec,
) -> Result<Report, HarnessError> {
    let mut rows = Vec::with_capacity(trials.len());
    for (t, trial) in trials.iter().enumerate() {
        let trial_seed = seed::derive(seed, &[t as u64]);
        let (correct, responses) = match model {
            Model::Bpl { steps, chains } => {
                let problem = trial.problem(grammar, render)?;
                let best = ideal_observer(&problem, chains, steps, trial_seed, exec);
                let (choice, _) = classify_with_state(&best, &problem, &trial.candidates)?;
                ((choice == trial.truth_index) as usize, 1)
            }
            Model::Limited { steps, participants } => {
                let acc = simulate_classification_trial(trial, grammar, render, &[steps], participants, trial_seed, exec)?;
                ((acc[0] * participants as f64).round() as usize, participants)
            }
            Model::Nonrecursive => ((classify_nonrecursive(trial, render)? == trial.truth_index) as usize, 1),
            Model::Metric(metric) => ((classify_metric(trial, metric)? == trial.truth_index) as usize, 1),
            Model::Random { participants } => {
                let mut rng = seed::rng(trial_seed);
                let hits = (0..participants).filter(|_| rng.random_range(0..trial.candidates.len()) == trial.truth_index);
                (hits.count(), participants)
            }
        };
        rows.push(TrialResult {
            trial: trial.id.clone(),
            condition: trial.condition,
            accuracy: correct as f64 / responses.max(1) as f64,
            segment_accuracy: None,
            responses,
        });
    }
    Ok(Report { task: Task::Classify, model: model.name(), rows })
}

/// Runs a model on a generation suite.
pub fn run_generation(
    trials: &[GenerationTrial],
    grammar: &MetaGrammar,
    render: &RenderSettings,
    model: Model,
    seed: u64,
    exec: Exec,
) -> Result<Report, HarnessError> {
    let mut rows = Vec::with_capacity(trials.len());
    for (t, trial) in trials.iter().enumerate() {
        let trial_seed = seed::derive(seed, &[t as u64]);
        let responses: Vec<Vec<bool>> = match model {
            Model::Bpl { steps, chains } => {
                let problem = trial.problem(grammar, render)?;
                let best = ideal_observer(&problem, chains, steps, seed::derive(trial_seed, &[0]), exec);
                vec![
                    generate_with_state(&best, &problem, &trial.interface, SegmentOrder::Random, seed::derive(trial_seed, &[1]))
                        .assignment,
                ]
            }
            Model::Limited { steps, participants } => {
                simulate_generation_responses(trial, grammar, render, &[steps], participants, trial_seed, exec)?
                    .swap_remove(0)
            }
            Model::Nonrecursive => {
                let predictive = nonrecursive_predictive(trial);
                vec![greedy_assignment(&trial.interface, &predictive, SegmentOrder::Random, trial_seed).assignment]
            }
            Model::Metric(metric) => vec![generate_metric(trial, metric)?],
            Model::Random { participants } => {
                let mut rng = seed::rng(trial_seed);
                (0..participants).map(|_| (0..trial.m()).map(|_| rng.random_bool(0.5)).collect()).collect()
            }
        };
        let scores = responses.iter().map(|r| evaluate_generation(r, trial)).collect::<Result<Vec<_>, _>>()?;
        rows.push(TrialResult {
            trial: trial.id.clone(),
            condition: trial.condition,
            accuracy: mean(scores.iter().map(|s| s.exact_visual_match as u8 as f64)).unwrap_or(0.0),
            segment_accuracy: mean(scores.iter().map(|s| s.segment_accuracy)),
            responses: scores.len(),
        });
    }
    Ok(Report { task: Task::Generate, model: model.name(), rows })
}

/// Runs one participant chain per seed, handing its state to `decide` each
/// time the chain reaches a checkpoint. Checkpoints must be increasing.
fn checkpointed<R: Send>(
    problem: &crate::inference::InferenceProblem,
    checkpoints: &[usize],
    participants: usize,
    seed: u64,
    exec: Exec,
    decide: impl Fn(&ChainState, u64) -> R + Sync + Send,
) -> Vec<Vec<R>> {
    let memo = LikelihoodMemo::new();
    exec.map_range(participants, |p| {
        let p_seed = seed::derive(seed, &[p as u64]);
        let mut chain = Chain::new(problem, p_seed, Some(&memo));
        let mut out = Vec::with_capacity(checkpoints.len());
        for &c in checkpoints {
            chain.run(c.saturating_sub(chain.steps()));
            out.push(decide(chain.state(), p_seed));
        }
        out
    })
}

/// Fraction of participants choosing correctly at each checkpoint.
pub fn simulate_classification_trial(
    trial: &ClassificationTrial,
    grammar: &MetaGrammar,
    render: &RenderSettings,
    checkpoints: &[usize],
    participants: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<f64>, HarnessError> {
    let problem = trial.problem(grammar, render)?;
    let decisions = checkpointed(&problem, checkpoints, participants, seed, exec, |state, _| {
        classify_with_state(state, &problem, &trial.candidates).map(|(c, _)| c == trial.truth_index)
    });
    let mut hits = vec![0usize; checkpoints.len()];
    for per_participant in decisions {
        for (k, d) in per_participant.into_iter().enumerate() {
            hits[k] += d? as usize;
        }
    }
    Ok(hits.into_iter().map(|h| h as f64 / participants.max(1) as f64).collect())
}

/// Participant responses at each checkpoint: `out[k][p]`.
pub fn simulate_generation_responses(
    trial: &GenerationTrial,
    grammar: &MetaGrammar,
    render: &RenderSettings,
    checkpoints: &[usize],
    participants: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<Vec<Vec<bool>>>, HarnessError> {
    let problem = trial.problem(grammar, render)?;
    let decisions = checkpointed(&problem, checkpoints, participants, seed, exec, |state, p_seed| {
        generate_with_state(state, &problem, &trial.interface, SegmentOrder::Random, seed::derive(p_seed, &[1]))
            .assignment
    });
    let mut out = vec![Vec::with_capacity(participants); checkpoints.len()];
    for per_participant in decisions {
        for (k, a) in per_participant.into_iter().enumerate() {
            out[k].push(a);
        }
    }
    Ok(out)
}

/// Per-trial exact-match rate at each checkpoint: `out[k][t]`.
pub fn simulate_generation(
    trials: &[GenerationTrial],
    grammar: &MetaGrammar,
    render: &RenderSettings,
    checkpoints: &[usize],
    participants: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<Vec<f64>>, HarnessError> {
    let mut out = vec![Vec::with_capacity(trials.len()); checkpoints.len()];
    for (t, trial) in trials.iter().enumerate() {
        let responses =
            simulate_generation_responses(trial, grammar, render, checkpoints, participants, seed::derive(seed, &[t as u64]), exec)?;
        for (k, rs) in responses.iter().enumerate() {
            let exact = rs
                .iter()
                .map(|r| Ok(evaluate_generation(r, trial)?.exact_visual_match as u8 as f64))
                .collect::<Result<Vec<f64>, HarnessError>>()?;
            out[k].push(mean(exact.into_iter()).unwrap_or(0.0));
        }
    }
    Ok(out)
}

/// Per-trial classification accuracy at each checkpoint: `out[k][t]`.
pub fn simulate_participants(
    trials: &[ClassificationTrial],
    grammar: &MetaGrammar,
    render: &RenderSettings,
    checkpoints: &[usize],
    participants: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<Vec<f64>>, HarnessError> {
    let mut out = vec![Vec::with_capacity(trials.len()); checkpoints.len()];
    for (t, trial) in trials.iter().enumerate() {
        let acc = simulate_classification_trial(
            trial,
            grammar,
            render,
            checkpoints,
            participants,
            seed::derive(seed, &[t as u64]),
            exec,
        )?;
        for (k, a) in acc.into_iter().enumerate() {
            out[k].push(a);
        }
    }
    Ok(out)
}
