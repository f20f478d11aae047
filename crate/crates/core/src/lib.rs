//! Sky pixel detection for outdoor images.

pub mod color;
pub mod error;
pub mod floodfill;
pub mod gradient;
pub mod kmeans_hsl;
pub mod meanshift;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod selector;
pub mod sobel_prob;
pub mod synth;
pub mod technique;

pub use error::{Error, Result};
pub use raster::{MaskConvention, Raster, Rgb, SkyMask};
pub use technique::{Technique, TechniqueId};
