//! Run configuration: rendering, grammar, seeds and chain lengths.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::grammar::MetaGrammar;
use crate::lsystem::MAX_SYMBOLS;
use crate::render::{InkParams, RenderSettings, Resolution};

/// Chain lengths for the limited (participant) and ideal models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainLengths {
    pub classify_incremental: usize,
    pub classify_block: usize,
    pub generate_incremental: usize,
    pub generate_block: usize,
    /// Steps per chain of the ideal observer.
    pub ideal: usize,
    /// Chains of the ideal observer.
    pub chains: usize,
    /// Simulated participants per trial for limited chains.
    pub participants: usize,
}

impl Default for ChainLengths {
    fn default() -> Self {
        ChainLengths {
            classify_incremental: 240,
            classify_block: 240,
            generate_incremental: 160,
            generate_block: 80,
            ideal: 20_000,
            chains: 4,
            participants: 15,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteSizes {
    pub classification: usize,
    pub generation: usize,
    /// Eligible concepts drawn before the generation suite keeps those with
    /// the largest segments.
    pub generation_pool: usize,
}

impl Default for SuiteSizes {
    fn default() -> Self {
        SuiteSizes { classification: 24, generation: 13, generation_pool: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Side of the square image in pixels.
    pub resolution: usize,
    /// Overrides the grammar's angle set.
    pub angles: Option<Vec<f64>>,
    /// Meta-grammar file; the built-in grammar when absent.
    pub grammar: Option<PathBuf>,
    /// Grammar for distractor rules; the built-in one when absent.
    pub distractor_grammar: Option<PathBuf>,
    /// Ink parameter file (TOML); built-in defaults when absent.
    pub ink: Option<PathBuf>,
    pub max_symbols: usize,
    pub seed: u64,
    pub steps: ChainLengths,
    pub suite: SuiteSizes,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            resolution: 200,
            angles: None,
            grammar: None,
            distractor_grammar: None,
            ink: None,
            max_symbols: MAX_SYMBOLS,
            seed: 0,
            steps: ChainLengths::default(),
            suite: SuiteSizes::default(),
        }
    }
}

impl RunConfig {
    /// Reads a TOML config. Relative file references resolve against the
    /// config's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse(path.to_path_buf(), e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.grammar, &mut cfg.distractor_grammar, &mut cfg.ink].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Checks numeric ranges and that every referenced file parses.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.resolution == 0 {
            return Err(ConfigError::Invalid("resolution must be positive".into()));
        }
        if self.max_symbols == 0 {
            return Err(ConfigError::Invalid("max_symbols must be positive".into()));
        }
        let s = &self.steps;
        let lengths = [
            ("classify_incremental", s.classify_incremental),
            ("classify_block", s.classify_block),
            ("generate_incremental", s.generate_incremental),
            ("generate_block", s.generate_block),
            ("ideal", s.ideal),
            ("chains", s.chains),
            ("participants", s.participants),
        ];
        if let Some((name, _)) = lengths.iter().find(|(_, v)| *v == 0) {
            return Err(ConfigError::Invalid(format!("steps.{name} must be at least 1")));
        }
        self.grammar()?;
        self.distractors()?;
        self.render_settings()?;
        Ok(())
    }

    pub fn grammar(&self) -> Result<MetaGrammar, ConfigError> {
        self.load_grammar(self.grammar.as_deref(), MetaGrammar::default_grammar)
    }

    pub fn distractors(&self) -> Result<MetaGrammar, ConfigError> {
        self.load_grammar(self.distractor_grammar.as_deref(), MetaGrammar::distractor_grammar)
    }

    fn load_grammar(&self, path: Option<&Path>, builtin: fn() -> MetaGrammar) -> Result<MetaGrammar, ConfigError> {
        let g = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError::io(p, e))?;
                MetaGrammar::parse(&text).map_err(|e| ConfigError::Parse(p.to_path_buf(), e.to_string()))?
            }
            None => builtin(),
        };
        match &self.angles {
            Some(a) => g.with_angles(a.clone()).map_err(|e| ConfigError::Invalid(e.to_string())),
            None => Ok(g),
        }
    }

    pub fn ink_params(&self) -> Result<InkParams, ConfigError> {
        let ink = match &self.ink {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ConfigError::io(p, e))?;
                toml::from_str(&text).map_err(|e| ConfigError::Parse(p.clone(), e.to_string()))?
            }
            None => InkParams::default(),
        };
        ink.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(ink)
    }

    pub fn render_settings(&self) -> Result<RenderSettings, ConfigError> {
        Ok(RenderSettings::new(Resolution::square(self.resolution), self.ink_params()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let back: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg: RunConfig = toml::from_str("seed = 7\n[steps]\nideal = 100\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.steps.ideal, 100);
        assert_eq!(cfg.steps.classify_incremental, 240);
        assert_eq!(cfg.resolution, 200);
    }

    #[test]
    fn zero_chain_length_is_rejected() {
        let cfg: RunConfig = toml::from_str("[steps]\ngenerate_block = 0\n").unwrap();
        assert!(matches!(cfg.validate(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("seeds = 3\n").is_err());
    }

    #[test]
    fn missing_grammar_file_is_reported() {
        let cfg = RunConfig { grammar: Some("/nonexistent/grammar.txt".into()), ..RunConfig::default() };
        assert!(matches!(cfg.validate(), Err(ConfigError::Io { .. })));
    }

    #[test]
    fn angle_override() {
        let cfg = RunConfig { angles: Some(vec![60.0]), ..RunConfig::default() };
        assert_eq!(cfg.grammar().unwrap().angles(), &[60.0]);
    }
}
