//! On-disk formats: concept files, trial suites, chain traces and reports.
//!
//! A suite is a directory holding `suite.json` and the PBM images it
//! references by relative path.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::FileError;
use crate::harness::{
    build_generation_trial, sample_classification_suite, sample_generation_suite, summary_table, ClassificationTrial,
    Condition, GenerationTrial, Report, SegmentBounds,
};
use crate::inference::TraceRecord;
use crate::lsystem::LSystem;
use crate::render::{read_pbm, write_pbm, BinaryImage, InkParams, RenderSettings, Resolution};

pub const SUITE_MANIFEST: &str = "suite.json";

pub fn read_concept(path: &Path) -> Result<LSystem, FileError> {
    let text = fs::read_to_string(path).map_err(|e| FileError::io(path, e))?;
    let l: LSystem = toml::from_str(&text).map_err(|e| FileError::Parse(path.to_path_buf(), e.to_string()))?;
    l.validate().map_err(|e| FileError::Parse(path.to_path_buf(), e.to_string()))?;
    Ok(l)
}

pub fn concept_to_string(l: &LSystem) -> String {
    toml::to_string(l).expect("concepts serialize")
}

pub fn write_concept(path: &Path, l: &LSystem) -> Result<(), FileError> {
    fs::write(path, concept_to_string(l)).map_err(|e| FileError::io(path, e))
}

pub fn write_ink(path: &Path, ink: &InkParams) -> Result<(), FileError> {
    fs::write(path, toml::to_string(ink).expect("ink parameters serialize")).map_err(|e| FileError::io(path, e))
}

/// Writes one JSON object per line.
pub fn write_trace(path: &Path, trace: &[TraceRecord]) -> Result<(), FileError> {
    let mut out = Vec::new();
    for r in trace {
        serde_json::to_writer(&mut out, r).expect("trace records serialize");
        out.push(b'\n');
    }
    fs::write(path, out).map_err(|e| FileError::io(path, e))
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>, FileError> {
    let text = fs::read_to_string(path).map_err(|e| FileError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| FileError::Parse(path.to_path_buf(), e.to_string())))
        .collect()
}

/// Writes `report.tsv` with every trial row and `summary.txt` with the
/// per-model accuracy table.
pub fn write_reports(dir: &Path, reports: &[Report]) -> Result<(), FileError> {
    fs::create_dir_all(dir).map_err(|e| FileError::io(dir, e))?;
    let mut tsv = String::new();
    for (i, r) in reports.iter().enumerate() {
        let table = r.to_tsv();
        let body = if i == 0 { table.as_str() } else { table.split_once('\n').map_or("", |(_, b)| b) };
        tsv.push_str(body);
    }
    let path = dir.join("report.tsv");
    fs::write(&path, tsv).map_err(|e| FileError::io(&path, e))?;
    let path = dir.join("summary.txt");
    let mut f = fs::File::create(&path).map_err(|e| FileError::io(&path, e))?;
    f.write_all(summary_table(reports).as_bytes()).map_err(|e| FileError::io(&path, e))
}

/// Both trial sets of an experiment together with the renderer that drew
/// them.
#[derive(Clone, Debug)]
pub struct Suite {
    pub render: RenderSettings,
    pub classification: Vec<ClassificationTrial>,
    pub generation: Vec<GenerationTrial>,
}

impl Suite {
    /// Samples both suites from the configured grammars and seed.
    pub fn sample(cfg: &RunConfig, conditions: &[Condition]) -> Result<Suite, FileError> {
        let render = cfg.render_settings()?;
        let grammar = cfg.grammar()?;
        let distractors = cfg.distractors()?;
        let classification = sample_classification_suite(
            &grammar,
            &distractors,
            cfg.suite.classification,
            conditions,
            cfg.seed,
            &render,
        )?;
        let generation = sample_generation_suite(
            &grammar,
            cfg.suite.generation,
            cfg.suite.generation_pool,
            conditions,
            cfg.seed,
            &render,
        )?;
        Ok(Suite { render, classification, generation })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageRef {
    pub depth: u8,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationEntry {
    pub id: String,
    pub concept: LSystem,
    pub condition: Condition,
    pub observed: Vec<ImageRef>,
    pub candidates: Vec<String>,
    pub truth_index: usize,
    pub distractor_sources: Vec<LSystem>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationEntry {
    pub id: String,
    pub concept: LSystem,
    pub condition: Condition,
    pub observed: Vec<ImageRef>,
    pub segments: usize,
    /// One character per segment: `1` grows, `0` stays.
    pub truth_assignment: String,
    pub truth_image: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub resolution: Resolution,
    pub ink: InkParams,
    pub classification: Vec<ClassificationEntry>,
    pub generation: Vec<GenerationEntry>,
}

pub fn assignment_to_string(a: &[bool]) -> String {
    a.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn assignment_from_str(s: &str) -> Option<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '1' => Some(true),
            '0' => Some(false),
            _ => None,
        })
        .collect()
}

fn save_image(dir: &Path, name: String, img: &BinaryImage) -> Result<String, FileError> {
    write_pbm(&dir.join(&name), img)?;
    Ok(name)
}

fn save_observed(dir: &Path, id: &str, observed: &[(u8, BinaryImage)]) -> Result<Vec<ImageRef>, FileError> {
    observed
        .iter()
        .map(|(d, img)| Ok(ImageRef { depth: *d, file: save_image(dir, format!("images/{id}-step{d}.pbm"), img)? }))
        .collect()
}

/// Writes `suite.json` and its images under `dir`.
pub fn write_suite(dir: &Path, suite: &Suite) -> Result<(), FileError> {
    fs::create_dir_all(dir.join("images")).map_err(|e| FileError::io(dir, e))?;
    let mut classification = Vec::with_capacity(suite.classification.len());
    for t in &suite.classification {
        let candidates = t
            .candidates
            .iter()
            .enumerate()
            .map(|(i, c)| save_image(dir, format!("images/{}-choice{i}.pbm", t.id), c))
            .collect::<Result<Vec<_>, _>>()?;
        classification.push(ClassificationEntry {
            id: t.id.clone(),
            concept: t.concept.clone(),
            condition: t.condition,
            observed: save_observed(dir, &t.id, &t.observed)?,
            candidates,
            truth_index: t.truth_index,
            distractor_sources: t.distractor_sources.clone(),
        });
    }
    let mut generation = Vec::with_capacity(suite.generation.len());
    for t in &suite.generation {
        generation.push(GenerationEntry {
            id: t.id.clone(),
            concept: t.concept.clone(),
            condition: t.condition,
            observed: save_observed(dir, &t.id, &t.observed)?,
            segments: t.m(),
            truth_assignment: assignment_to_string(&t.interface.truth_assignment()),
            truth_image: save_image(dir, format!("images/{}-truth.pbm", t.id), &t.truth_image)?,
        });
    }
    let manifest = SuiteManifest {
        resolution: suite.render.resolution,
        ink: suite.render.ink.clone(),
        classification,
        generation,
    };
    let path = dir.join(SUITE_MANIFEST);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(|e| FileError::io(&path, e))
}

fn load_image(dir: &Path, file: &str, res: Resolution) -> Result<BinaryImage, FileError> {
    let img = read_pbm(&dir.join(file))?;
    img.check_same_size(res)?;
    Ok(img)
}

fn load_observed(dir: &Path, refs: &[ImageRef], res: Resolution) -> Result<Vec<(u8, BinaryImage)>, FileError> {
    refs.iter().map(|r| Ok((r.depth, load_image(dir, &r.file, res)?))).collect()
}

/// Reads a suite written by [`write_suite`]. Generation trials rebuild their
/// toggle interface from the concept and must agree with the stored truth.
pub fn read_suite(dir: &Path) -> Result<Suite, FileError> {
    let path = dir.join(SUITE_MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| FileError::io(&path, e))?;
    let manifest: SuiteManifest = serde_json::from_str(&text).map_err(|e| FileError::Parse(path.clone(), e.to_string()))?;
    manifest.ink.validate()?;
    let render = RenderSettings::new(manifest.resolution, manifest.ink);
    let res = render.resolution;
    let mut classification = Vec::with_capacity(manifest.classification.len());
    for e in manifest.classification {
        if e.truth_index >= e.candidates.len() {
            return Err(FileError::Mismatch(format!("{}: truth index {} out of range", e.id, e.truth_index)));
        }
        classification.push(ClassificationTrial {
            observed: load_observed(dir, &e.observed, res)?,
            candidates: e.candidates.iter().map(|f| load_image(dir, f, res)).collect::<Result<_, _>>()?,
            id: e.id,
            concept: e.concept,
            condition: e.condition,
            truth_index: e.truth_index,
            distractor_sources: e.distractor_sources,
        });
    }
    let mut generation = Vec::with_capacity(manifest.generation.len());
    for e in manifest.generation {
        let mut trial = build_generation_trial(e.id.clone(), &e.concept, e.condition, None::<SegmentBounds>, &render)?;
        let truth = assignment_from_str(&e.truth_assignment)
            .ok_or_else(|| FileError::Mismatch(format!("{}: malformed truth assignment", e.id)))?;
        if trial.m() != e.segments || trial.interface.truth_assignment() != truth {
            return Err(FileError::Mismatch(format!("{}: segments disagree with the concept", e.id)));
        }
        trial.observed = load_observed(dir, &e.observed, res)?;
        trial.truth_image = load_image(dir, &e.truth_image, res)?;
        generation.push(trial);
    }
    Ok(Suite { render, classification, generation })
}

