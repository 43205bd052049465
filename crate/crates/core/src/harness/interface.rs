use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, LsysError};
use crate::geometry::Point;
use crate::lsystem::{assign_forwards, expand_once_capped, expand_to_depth_capped, LSystem, Symbol, SymbolString};
use crate::render::{
    trace_raw, trajectory_in_frame, BinaryImage, Frame, MeanImage, Rasterizer, RenderSettings, TurtleTrajectory,
};

/// One clickable segment of the displayed exemplar, in unit-frame
/// coordinates with y pointing up.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentView {
    /// Position of the forward symbol in the displayed string.
    pub id: usize,
    pub start: Point,
    pub end: Point,
    /// Whether the symbol is `F` in the displayed exemplar.
    pub growing: bool,
}

/// The generation response surface: every forward symbol of the mature
/// exemplar can be set to sprout (`F`) or stay inert (`G`); the response is
/// the one-step expansion of the toggled string.
///
/// Responses render in the frame of the displayed exemplar so a toggle only
/// changes pixels near its own segment.
#[derive(Clone, Debug)]
pub struct ToggleInterface {
    concept: LSystem,
    base: SymbolString,
    positions: Vec<usize>,
    frame: Frame,
    render: RenderSettings,
}

impl ToggleInterface {
    /// Interface over `S_depth` of `concept`, with no symbol cap on the
    /// displayed string or responses.
    pub fn new(concept: &LSystem, depth: u8, render: RenderSettings) -> Result<Self, HarnessError> {
        let base = expand_to_depth_capped(concept, depth, usize::MAX)?;
        Self::over(concept, base, render)
    }

    /// Interface over an explicit displayed string.
    pub fn over(concept: &LSystem, base: SymbolString, render: RenderSettings) -> Result<Self, HarnessError> {
        let frame = Frame::fit(&trace_raw(&base, concept.angle_deg))?;
        let positions = base.forward_positions();
        Ok(ToggleInterface { concept: concept.clone(), base, positions, frame, render })
    }

    /// Number of toggleable segments.
    pub fn m(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn base(&self) -> &SymbolString {
        &self.base
    }

    pub fn concept(&self) -> &LSystem {
        &self.concept
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn render_settings(&self) -> &RenderSettings {
        &self.render
    }

    /// Starting display state: nothing sprouts.
    pub fn initial_assignment(&self) -> Vec<bool> {
        vec![false; self.m()]
    }

    /// Canonical truth: exactly the `F` positions of the displayed string.
    pub fn truth_assignment(&self) -> Vec<bool> {
        self.positions.iter().map(|&p| self.base.get(p) == Some(Symbol::F)).collect()
    }

    pub fn toggled(&self, assignment: &[bool]) -> Result<SymbolString, LsysError> {
        assign_forwards(&self.base, assignment)
    }

    /// The next-step string a response produces.
    pub fn next_string(&self, assignment: &[bool]) -> Result<SymbolString, LsysError> {
        expand_once_capped(&self.toggled(assignment)?, &self.concept, usize::MAX)
    }

    /// Trajectory of any string in the display frame.
    pub fn placed(&self, s: &SymbolString) -> TurtleTrajectory {
        trajectory_in_frame(s, self.concept.angle_deg, &self.frame)
    }

    pub fn render_with(&self, raster: &mut Rasterizer, assignment: &[bool]) -> Result<MeanImage, LsysError> {
        Ok(raster.rasterize(&self.placed(&self.next_string(assignment)?), &self.render.ink))
    }

    /// Mean image of a response.
    pub fn render(&self, assignment: &[bool]) -> Result<MeanImage, LsysError> {
        self.render_with(&mut Rasterizer::new(self.render.resolution), assignment)
    }

    /// Visual form of a response: its thresholded render.
    pub fn image(&self, assignment: &[bool]) -> Result<BinaryImage, LsysError> {
        Ok(self.render(assignment)?.threshold())
    }

    /// Image of the displayed exemplar itself, in the display frame.
    pub fn display_image(&self) -> BinaryImage {
        Rasterizer::new(self.render.resolution).rasterize(&self.placed(&self.base), &self.render.ink).threshold()
    }

    /// Geometry of the clickable segments.
    pub fn segments(&self) -> Vec<SegmentView> {
        self.placed(&self.base)
            .segments
            .iter()
            .map(|s| SegmentView {
                id: s.source_index,
                start: s.start,
                end: s.end,
                growing: self.base.get(s.source_index) == Some(Symbol::F),
            })
            .collect()
    }
}
