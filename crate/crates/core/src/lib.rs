//! Weak-label CT segmentation.
//!
//! Ground-truth masks are generated from co-registered PET volumes by
//! thresholding at a fixed fraction of the volume maximum, the labeled CT
//! slices are enlarged by rotation/scaling/noise augmentation, and two small
//! fully convolutional networks (an FCN-8s style encoder with skip fusion and
//! an atrous residual network with output stride 8) are trained from scratch
//! on a hand-written convolution engine. Predictions are scored with TPR,
//! TNR, Dice and Hausdorff distance.
//!
//! Modules, bottom-up:
//!
//! - [`imaging`]: scalar images, volumes, masks, MHD/PGM/PPM I/O, overlays.
//! - [`weak_label`]: PET thresholding, slice selection, patient split.
//! - [`augmentation`]: deterministic rotation/scaling/noise enumeration.
//! - [`metrics`]: confusion counts, TPR/TNR, Dice, Hausdorff, CSV reports.
//! - [`nn`]: tensors, (dilated/transposed) convolution, pooling, loss, Adam.
//! - [`models`]: FCN-mini and atrous-mini builders and checkpoints.
//! - [`train_eval`]: training loop, evaluation, synthetic phantoms.

pub mod augmentation;
pub mod error;
pub mod imaging;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod train_eval;
pub mod weak_label;

pub use error::{Error, Result};
