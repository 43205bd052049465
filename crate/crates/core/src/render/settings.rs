use serde::{Deserialize, Serialize};

use crate::lsystem::SymbolString;

use super::image::{BinaryImage, InkParams, MeanImage, Resolution};
use super::raster::render_string;

/// Resolution and ink model shared by every render of an experiment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RenderSettings {
    pub resolution: Resolution,
    pub ink: InkParams,
}

impl RenderSettings {
    pub fn new(resolution: Resolution, ink: InkParams) -> Self {
        RenderSettings { resolution, ink }
    }

    /// Normalized mean image of `s`.
    pub fn mean_image(&self, s: &SymbolString, angle_deg: f64) -> MeanImage {
        render_string(s, angle_deg, &self.ink, self.resolution)
    }

    /// The observed image of `s`: its normalized render thresholded at 0.5.
    pub fn observe(&self, s: &SymbolString, angle_deg: f64) -> BinaryImage {
        self.mean_image(s, angle_deg).threshold()
    }
}
