//! Center heat-map joint detection and tracking for wide-area motion
//! imagery.
//!
//! Objects are encoded as Gaussian peaks on per-class center maps. A
//! fully-convolutional predictor consumes the current frame, the previous
//! frame and a filtered copy of the previous frame's center map, and emits
//! center, motion and subpixel maps. Peaks are decoded, refined, associated
//! across frames with backward motion vectors, and filtered back into the
//! next frame's feedback input.

pub mod assoc;
pub mod augment;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod frame;
pub mod grid;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod net;
pub mod pipeline;
pub mod sgr;
pub mod synth;

pub use error::{Error, Result};
