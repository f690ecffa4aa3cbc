//! Training loop, test-set evaluation, resizing and synthetic phantoms.

mod eval;
mod phantom;
mod resize;
mod train;

pub use eval::{evaluate, Evaluation, SlicePredictor};
pub use phantom::{generate_phantoms, make_phantoms, Ellipse, Phantom, PhantomSpec};
pub use resize::{resize_image, resize_mask, Resize};
pub use train::{train, TrainConfig, TrainReport};

use crate::error::Result;
use crate::imaging::{normalize_window, ScalarImage2D};

/// Full-scale value of stored 8-bit slices.
pub const PIXEL_MAX: f64 = 255.0;

/// Window a raw CT slice to `[lo, hi]` and quantize to `0..=255`, the form
/// slices take on disk.
pub fn quantize_ct(img: &ScalarImage2D, lo: f64, hi: f64) -> Result<ScalarImage2D> {
    let unit = normalize_window(img, lo, hi)?;
    let values = unit.values().iter().map(|v| (v * PIXEL_MAX).round()).collect();
    ScalarImage2D::new(img.width(), img.height(), values, img.spacing())
}

/// Scale an 8-bit slice to the `[0, 1]` range the networks see.
pub fn network_input(ct: &ScalarImage2D) -> ScalarImage2D {
    let values = ct.values().iter().map(|v| v / PIXEL_MAX).collect();
    ScalarImage2D::new(ct.width(), ct.height(), values, ct.spacing()).expect("same geometry")
}
