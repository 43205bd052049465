use dashmap::DashMap;
use rustc_hash::FxBuildHasher;

use crate::geometry::Point;
use crate::lsystem::{expansions, LSystem, SymbolString};
use crate::render::{placed_trajectory, BinaryImage, Rasterizer, TurtleTrajectory};

use super::problem::{InferenceProblem, Observations};

/// Log-likelihoods shared by every chain of one problem, keyed by F-rule,
/// angle and latent depth. Values are pure functions of the key, so sharing
/// never changes results.
#[derive(Debug, Default)]
pub struct LikelihoodMemo {
    map: DashMap<Box<[u8]>, f64, FxBuildHasher>,
}

impl LikelihoodMemo {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

fn memo_key(l: &LSystem, angle: usize, depth: Option<u8>) -> Box<[u8]> {
    let mut key = l.f_rule.codes();
    key.extend([u8::MAX, angle as u8, depth.unwrap_or(u8::MAX)]);
    key.into_boxed_slice()
}

/// Deepest legal depth not above `depth`. Hypotheses whose expansion would
/// exceed the symbol cap are scored at the last legal depth.
pub fn effective_depth(strings: &[SymbolString], depth: u8) -> u8 {
    depth.min(strings.len().saturating_sub(1) as u8)
}

fn blank_trajectory() -> TurtleTrajectory {
    TurtleTrajectory { segments: Vec::new(), start: Point::default(), heading_deg: 0.0 }
}

/// Per-thread likelihood evaluator.
pub struct Scorer<'a> {
    problem: &'a InferenceProblem,
    raster: Rasterizer,
    memo: Option<&'a LikelihoodMemo>,
}

impl<'a> Scorer<'a> {
    pub fn new(problem: &'a InferenceProblem, memo: Option<&'a LikelihoodMemo>) -> Self {
        Scorer { problem, raster: Rasterizer::new(problem.resolution()), memo }
    }

    pub fn problem(&self) -> &'a InferenceProblem {
        self.problem
    }

    /// `log P(I | L, j)`, summed over observed images.
    pub fn log_likelihood(&mut self, l: &LSystem, angle: usize, depth: Option<u8>) -> f64 {
        let Some(memo) = self.memo else {
            return self.compute(l, depth);
        };
        let key = memo_key(l, angle, depth);
        if let Some(v) = memo.map.get(&key) {
            return *v;
        }
        let v = self.compute(l, depth);
        memo.map.insert(key, v);
        v
    }

    fn compute(&mut self, l: &LSystem, depth: Option<u8>) -> f64 {
        let problem = self.problem;
        let strings = expansions(l, problem.current_depth(depth), problem.cap);
        let ink = &problem.render.ink;
        let score = |raster: &mut Rasterizer, d: u8, img: &BinaryImage| {
            let s = &strings[effective_depth(&strings, d) as usize];
            let t = placed_trajectory(s, l.angle_deg).unwrap_or_else(blank_trajectory);
            raster.log_likelihood(&t, ink, img).expect("problem images match the render resolution")
        };
        match &problem.observations {
            Observations::KnownDepth(images) => images.iter().map(|(d, img)| score(&mut self.raster, *d, img)).sum(),
            Observations::UnknownDepth(img) => score(&mut self.raster, depth.unwrap_or(0), img),
        }
    }
}
