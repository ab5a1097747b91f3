//! Frequency-aware image warping and multi-view synchronization.

pub mod blend;
pub mod error;
pub mod image;
pub mod io;
pub mod kv;
pub mod pyramid;
pub mod sync;
pub mod uvmap;
pub mod views;
pub mod warp;

pub use blend::BlendOptions;
pub use error::{Error, Result};
pub use image::{Image, Mask, MISSING};
pub use pyramid::{Pyramid, PyramidKind};
pub use sync::{LatentTensor, SyncConfig};
pub use uvmap::{LodMap, UvMap};
pub use views::{ViewKind, ViewScene};
pub use warp::{MaskedPyramid, SampleMode};
