use serde::{Deserialize, Serialize};

use crate::error::InferenceError;
use crate::grammar::MetaGrammar;
use crate::lsystem::{MAX_DEPTH, MAX_SYMBOLS};
use crate::render::{BinaryImage, RenderSettings, Resolution};

/// Mixture weights of the MH proposal kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalWeights {
    pub subtree: f64,
    pub angle: f64,
    /// Used only when the depth is latent; otherwise its mass is spread
    /// proportionally over the other two moves.
    pub depth: f64,
}

impl Default for ProposalWeights {
    fn default() -> Self {
        ProposalWeights { subtree: 0.7, angle: 0.2, depth: 0.1 }
    }
}

impl ProposalWeights {
    /// Normalized `(subtree, angle, depth)` probabilities for a mode.
    pub fn normalized(&self, latent_depth: bool) -> (f64, f64, f64) {
        let depth = if latent_depth { self.depth } else { 0.0 };
        let total = self.subtree + self.angle + depth;
        (self.subtree / total, self.angle / total, depth / total)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Observations {
    /// Images at known depths, conditioning on all of them.
    KnownDepth(Vec<(u8, BinaryImage)>),
    /// One image whose depth is latent with a uniform prior over `0..=MAX_DEPTH`.
    UnknownDepth(BinaryImage),
}

/// Everything a chain needs: prior, observations, likelihood settings and
/// kernel weights.
#[derive(Clone, Debug)]
pub struct InferenceProblem {
    pub grammar: MetaGrammar,
    pub observations: Observations,
    pub render: RenderSettings,
    pub cap: usize,
    pub weights: ProposalWeights,
}

impl InferenceProblem {
    pub fn known_depth(
        grammar: MetaGrammar,
        images: Vec<(u8, BinaryImage)>,
        render: RenderSettings,
    ) -> Result<Self, InferenceError> {
        if images.is_empty() {
            return Err(InferenceError::NoObservations);
        }
        let mut seen = [false; MAX_DEPTH as usize + 1];
        for (d, img) in &images {
            if *d > MAX_DEPTH {
                return Err(InferenceError::InvalidDepth(*d));
            }
            if std::mem::replace(&mut seen[*d as usize], true) {
                return Err(InferenceError::DuplicateDepth(*d));
            }
            img.check_same_size(render.resolution)?;
        }
        Self::build(grammar, Observations::KnownDepth(images), render)
    }

    pub fn unknown_depth(grammar: MetaGrammar, image: BinaryImage, render: RenderSettings) -> Result<Self, InferenceError> {
        image.check_same_size(render.resolution)?;
        Self::build(grammar, Observations::UnknownDepth(image), render)
    }

    fn build(grammar: MetaGrammar, observations: Observations, render: RenderSettings) -> Result<Self, InferenceError> {
        let problem =
            InferenceProblem { grammar, observations, render, cap: MAX_SYMBOLS, weights: ProposalWeights::default() };
        problem.check_cap()?;
        Ok(problem)
    }

    pub fn with_cap(mut self, cap: usize) -> Result<Self, InferenceError> {
        self.cap = cap;
        self.check_cap()?;
        Ok(self)
    }

    pub fn with_weights(mut self, weights: ProposalWeights) -> Self {
        self.weights = weights;
        self
    }

    fn check_cap(&self) -> Result<(), InferenceError> {
        let len = self.grammar.axiom().len();
        if len > self.cap {
            return Err(InferenceError::AxiomExceedsCap { len, cap: self.cap });
        }
        Ok(())
    }

    pub fn latent_depth(&self) -> bool {
        matches!(self.observations, Observations::UnknownDepth(_))
    }

    pub fn resolution(&self) -> Resolution {
        self.render.resolution
    }

    /// Depth of the most mature observation: the largest observed depth, or
    /// the latent `j`.
    pub fn current_depth(&self, latent: Option<u8>) -> u8 {
        match &self.observations {
            Observations::KnownDepth(images) => images.iter().map(|(d, _)| *d).max().unwrap_or(0),
            Observations::UnknownDepth(_) => latent.unwrap_or(0),
        }
    }

    /// Log prior of the depth variable.
    pub fn log_depth_prior(&self) -> f64 {
        if self.latent_depth() {
            -((MAX_DEPTH as f64) + 1.0).ln()
        } else {
            0.0
        }
    }
}
