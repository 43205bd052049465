//! Turtle tracing, rasterization and the Bernoulli ink model.

mod fit;
mod image;
mod pnm;
mod raster;
mod scribble;
mod settings;
mod turtle;

pub use fit::{fit_ink_params, InkFit, InkObjective, MAX_BLUR_RADIUS, MIN_FIT_PAIRS};
pub use image::{binomial_kernel, log_likelihood, sample_image, BinaryImage, InkParams, MeanImage, Resolution};
pub use pnm::{decode_pbm, decode_pgm, encode_pbm, encode_pgm, read_pbm, read_pgm, write_pbm, write_pgm};
pub use raster::{placed_trajectory, rasterize, render_string, trajectory_in_frame, Rasterizer};
pub use settings::RenderSettings;
pub use scribble::{random_scribble, random_scribble_string};
pub use turtle::{normalize, trace, trace_raw, Frame, Segment, TurtleTrajectory, COMMON_WIDTH};
