//! Implementations behind each `bpl` subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use bpl_core::config::RunConfig;
use bpl_core::exec::Exec;
use bpl_core::files::{read_suite, write_concept, write_reports, write_suite, write_trace, Suite};
use bpl_core::grammar::MetaGrammar;
use bpl_core::harness::{
    builtin_metric, run_classification, run_generation, sample_concepts, Condition, CosineEmbedding, Model, Report,
    SimilarityMetric,
};
use bpl_core::inference::{run_chain_with_memo, InferenceProblem, LikelihoodMemo};
use bpl_core::lsystem::{expand_to_depth_capped, LSystem, MAX_DEPTH};
use bpl_core::render::{fit_ink_params, random_scribble, rasterize, read_pbm, write_pbm, write_pgm, InkFit, MeanImage};
use bpl_core::seed;

pub type CliResult<T> = Result<T, Box<dyn std::error::Error + Send + Sync>>;

pub fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        Some(p) => Ok(RunConfig::load(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    Ok(())
}

/// Writes `n` constraint-passing concepts with their renders at every depth.
pub fn sample(cfg: &RunConfig, n: usize, out: &Path) -> CliResult<Vec<LSystem>> {
    let grammar = cfg.grammar()?;
    let render = cfg.render_settings()?;
    let mut rng = seed::derived_rng(cfg.seed, &[4]);
    let concepts = sample_concepts(&grammar, n, MAX_DEPTH, &render, &mut rng)?;
    create_dir(out)?;
    for (i, l) in concepts.iter().enumerate() {
        write_concept(&out.join(format!("concept-{:02}.toml", i + 1)), l)?;
        for d in 0..=MAX_DEPTH {
            let s = expand_to_depth_capped(l, d, cfg.max_symbols)?;
            write_pbm(&out.join(format!("concept-{:02}-step{d}.pbm", i + 1)), &render.observe(&s, l.angle_deg))?;
        }
    }
    Ok(concepts)
}

/// Renders a concept at one depth, thresholded and optionally as a mean image.
pub fn render(cfg: &RunConfig, concept: &LSystem, depth: u8, out: &Path, mean: Option<&Path>) -> CliResult<()> {
    let render = cfg.render_settings()?;
    let s = expand_to_depth_capped(concept, depth, cfg.max_symbols)?;
    let m: MeanImage = render.mean_image(&s, concept.angle_deg);
    write_pbm(out, &m.threshold())?;
    if let Some(p) = mean {
        write_pgm(p, &m)?;
    }
    Ok(())
}

/// How observed images are tied to depths.
pub enum Observed {
    Known(Vec<(u8, PathBuf)>),
    Unknown(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferResult {
    pub concept: LSystem,
    /// Inferred depth of the image in unknown-depth mode.
    pub depth: Option<u8>,
    pub log_prior: f64,
    pub log_likelihood: f64,
    pub log_posterior: f64,
    pub chain: usize,
}

/// Runs `chains` chains sharing one likelihood cache; writes each chain's
/// trace, the best state's concept file and a JSON summary.
pub fn infer(
    cfg: &RunConfig,
    observed: &Observed,
    steps: usize,
    chains: usize,
    thin: usize,
    out: &Path,
) -> CliResult<InferResult> {
    let grammar = cfg.grammar()?;
    let render = cfg.render_settings()?;
    let problem = match observed {
        Observed::Known(items) => {
            let images = items.iter().map(|(d, p)| Ok((*d, read_pbm(p)?))).collect::<CliResult<Vec<_>>>()?;
            InferenceProblem::known_depth(grammar, images, render)?
        }
        Observed::Unknown(p) => InferenceProblem::unknown_depth(grammar, read_pbm(p)?, render)?,
    }
    .with_cap(cfg.max_symbols)?;
    create_dir(out)?;
    let memo = LikelihoodMemo::new();
    let mut best: Option<(usize, bpl_core::inference::ChainState)> = None;
    for c in 0..chains.max(1) {
        let run = run_chain_with_memo(&problem, steps, seed::derive(cfg.seed, &[c as u64]), thin.max(1), Some(&memo));
        write_trace(&out.join(format!("trace-{c}.jsonl")), &run.trace)?;
        if best.as_ref().is_none_or(|(_, b)| run.best.log_posterior() > b.log_posterior()) {
            best = Some((c, run.best));
        }
    }
    let (chain, state) = best.expect("at least one chain");
    write_concept(&out.join("map.toml"), &state.lsystem)?;
    let result = InferResult {
        concept: state.lsystem.clone(),
        depth: state.depth,
        log_prior: state.log_prior,
        log_likelihood: state.log_likelihood,
        log_posterior: state.log_posterior(),
        chain,
    };
    fs::write(out.join("result.json"), serde_json::to_string_pretty(&result)? + "\n")?;
    Ok(result)
}

pub fn parse_conditions(name: &str) -> CliResult<Vec<Condition>> {
    match name {
        "incremental" => Ok(vec![Condition::Incremental]),
        "block" => Ok(vec![Condition::Block]),
        "both" => Ok(Condition::ALL.to_vec()),
        other => Err(format!("unknown condition {other:?} (incremental, block, both)").into()),
    }
}

pub fn suite(cfg: &RunConfig, conditions: &[Condition], out: &Path) -> CliResult<Suite> {
    let suite = Suite::sample(cfg, conditions)?;
    write_suite(out, &suite)?;
    Ok(suite)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskName {
    Classify,
    Generate,
}

/// Model selection from the command line.
#[derive(Clone, Debug, Default)]
pub struct ModelArgs {
    pub name: String,
    /// Chain length; per-condition config values when absent.
    pub steps: Option<usize>,
    pub participants: Option<usize>,
    pub chains: Option<usize>,
    /// Image-key to vector map for the `embedding` model.
    pub embedding: Option<PathBuf>,
    pub exec: Exec,
}

enum Resolved {
    Bpl { steps: usize, chains: usize },
    Limited { steps: Option<usize>, participants: usize },
    Nonrecursive,
    Metric(Box<dyn SimilarityMetric>),
    Random { participants: usize },
}

fn resolve(cfg: &RunConfig, m: &ModelArgs) -> CliResult<Resolved> {
    Ok(match m.name.as_str() {
        "bpl" => Resolved::Bpl { steps: m.steps.unwrap_or(cfg.steps.ideal), chains: m.chains.unwrap_or(cfg.steps.chains) },
        "limited" => Resolved::Limited { steps: m.steps, participants: m.participants.unwrap_or(cfg.steps.participants) },
        "nonrecursive" => Resolved::Nonrecursive,
        "random" => Resolved::Random { participants: m.participants.unwrap_or(1000) },
        "embedding" => {
            let path = m.embedding.as_ref().ok_or("the embedding model needs --embedding FILE")?;
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            Resolved::Metric(Box::new(CosineEmbedding::from_json("embedding", &text)?))
        }
        other => Resolved::Metric(builtin_metric(other)?),
    })
}

fn limited_steps(cfg: &RunConfig, task: TaskName, condition: Condition) -> usize {
    match (task, condition) {
        (TaskName::Classify, Condition::Incremental) => cfg.steps.classify_incremental,
        (TaskName::Classify, Condition::Block) => cfg.steps.classify_block,
        (TaskName::Generate, Condition::Incremental) => cfg.steps.generate_incremental,
        (TaskName::Generate, Condition::Block) => cfg.steps.generate_block,
    }
}

fn run_on(
    suite: &Suite,
    grammar: &MetaGrammar,
    task: TaskName,
    model: Model,
    condition: Option<Condition>,
    seed: u64,
    exec: Exec,
) -> CliResult<Report> {
    let keep = |c: Condition| condition.is_none_or(|k| k == c);
    Ok(match task {
        TaskName::Classify => {
            let trials: Vec<_> = suite.classification.iter().filter(|t| keep(t.condition)).cloned().collect();
            run_classification(&trials, grammar, &suite.render, model, seed, exec)?
        }
        TaskName::Generate => {
            let trials: Vec<_> = suite.generation.iter().filter(|t| keep(t.condition)).cloned().collect();
            run_generation(&trials, grammar, &suite.render, model, seed, exec)?
        }
    })
}

/// Runs one model on one task of a suite and writes the report files.
/// Limited chains without an explicit length use the configured length of
/// each condition.
pub fn experiment(
    cfg: &RunConfig,
    suite: &Suite,
    task: TaskName,
    model: &ModelArgs,
    out: Option<&Path>,
) -> CliResult<Report> {
    let grammar = cfg.grammar()?;
    let report = match resolve(cfg, model)? {
        Resolved::Bpl { steps, chains } => {
            run_on(suite, &grammar, task, Model::Bpl { steps, chains }, None, cfg.seed, model.exec)?
        }
        Resolved::Limited { steps: Some(steps), participants } => {
            run_on(suite, &grammar, task, Model::Limited { steps, participants }, None, cfg.seed, model.exec)?
        }
        Resolved::Limited { steps: None, participants } => {
            let mut merged: Option<Report> = None;
            for condition in Condition::ALL {
                let steps = limited_steps(cfg, task, condition);
                let limited = Model::Limited { steps, participants };
                let r = run_on(suite, &grammar, task, limited, Some(condition), cfg.seed, model.exec)?;
                match &mut merged {
                    None => merged = Some(Report { model: format!("limited(participants={participants})"), ..r }),
                    Some(m) => m.rows.extend(r.rows),
                }
            }
            merged.expect("two conditions")
        }
        Resolved::Nonrecursive => run_on(suite, &grammar, task, Model::Nonrecursive, None, cfg.seed, model.exec)?,
        Resolved::Metric(metric) => {
            run_on(suite, &grammar, task, Model::Metric(metric.as_ref()), None, cfg.seed, model.exec)?
        }
        Resolved::Random { participants } => {
            run_on(suite, &grammar, task, Model::Random { participants }, None, cfg.seed, model.exec)?
        }
    };
    if let Some(dir) = out {
        write_reports(dir, std::slice::from_ref(&report))?;
    }
    Ok(report)
}

pub fn load_suite(dir: &Path) -> CliResult<Suite> {
    Ok(read_suite(dir)?)
}

/// Fits ink parameters to `n` scribbles drawn with the configured ink and
/// sampled pixel by pixel.
pub fn fit_ink(cfg: &RunConfig, n: usize) -> CliResult<InkFit> {
    let render = cfg.render_settings()?;
    let mut rng = seed::derived_rng(cfg.seed, &[5]);
    let pairs: Vec<_> = (0..n)
        .map(|_| {
            let t = random_scribble(&mut rng);
            let img = rasterize(&t, &render.ink, render.resolution).sample(&mut rng);
            (t, img)
        })
        .collect();
    Ok(fit_ink_params(&pairs)?)
}
