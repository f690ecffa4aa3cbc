//! Scalar images, volumes and binary masks, plus their file formats.

mod mhd;
mod overlay;
mod pnm;

pub use mhd::{read_volume, write_volume, ElementType};
pub use overlay::{contour_pixels, render_overlay};
pub use pnm::{read_mask_pgm, read_pgm, write_mask_pgm, write_pgm, write_ppm};

use crate::error::{Error, Result};

/// A 2-D slice of scalar intensities, row-major, with pixel spacing in mm.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarImage2D {
    width: usize,
    height: usize,
    values: Vec<f64>,
    spacing: (f64, f64),
}

impl ScalarImage2D {
    pub fn new(width: usize, height: usize, values: Vec<f64>, spacing: (f64, f64)) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("empty image {width}x{height}")));
        }
        if values.len() != width * height {
            return Err(Error::shape(format!(
                "{} values for a {width}x{height} image",
                values.len()
            )));
        }
        if !(spacing.0 > 0.0 && spacing.1 > 0.0) {
            return Err(Error::invalid(format!("spacing must be positive, got {spacing:?}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("image value at index {i}")));
        }
        Ok(Self {
            width,
            height,
            values,
            spacing,
        })
    }

    /// Unit-spaced image.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(width, height, values, (1.0, 1.0))
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::from_values(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn spacing(&self) -> (f64, f64) {
        self.spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Same geometry, new values. Used by transforms that keep the grid.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.width, self.height, values, self.spacing)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// A 3-D stack of slices; slice-major, then rows, then columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    width: usize,
    height: usize,
    depth: usize,
    values: Vec<f64>,
    spacing: (f64, f64, f64),
}

impl Volume3D {
    pub fn new(
        width: usize,
        height: usize,
        depth: usize,
        values: Vec<f64>,
        spacing: (f64, f64, f64),
    ) -> Result<Self> {
        if width == 0 || height == 0 || depth == 0 {
            return Err(Error::invalid("empty volume"));
        }
        if values.len() != width * height * depth {
            return Err(Error::shape(format!(
                "{} values for a {width}x{height}x{depth} volume",
                values.len()
            )));
        }
        if !(spacing.0 > 0.0 && spacing.1 > 0.0 && spacing.2 > 0.0) {
            return Err(Error::invalid(format!("spacing must be positive, got {spacing:?}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("volume value at index {i}")));
        }
        Ok(Self {
            width,
            height,
            depth,
            values,
            spacing,
        })
    }

    /// Stack equally sized slices; the slice spacing is `sz`.
    pub fn from_slices(slices: &[ScalarImage2D], sz: f64) -> Result<Self> {
        let first = slices.first().ok_or_else(|| Error::invalid("empty volume"))?;
        let (w, h) = (first.width, first.height);
        let mut values = Vec::with_capacity(w * h * slices.len());
        for (k, s) in slices.iter().enumerate() {
            if s.width != w || s.height != h {
                return Err(Error::shape(format!(
                    "slice {k} is {}x{}, expected {w}x{h}",
                    s.width, s.height
                )));
            }
            values.extend_from_slice(&s.values);
        }
        Self::new(w, h, slices.len(), values, (first.spacing.0, first.spacing.1, sz))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn spacing(&self) -> (f64, f64, f64) {
        self.spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slice_len(&self) -> usize {
        self.width * self.height
    }

    /// Borrow the raw values of slice `k` without copying.
    pub fn slice_values(&self, k: usize) -> &[f64] {
        let n = self.slice_len();
        &self.values[k * n..(k + 1) * n]
    }
}

/// Copy slice `k` out of a volume, keeping the in-plane spacing.
pub fn extract_slice(vol: &Volume3D, k: usize) -> Result<ScalarImage2D> {
    if k >= vol.depth {
        return Err(Error::invalid(format!(
            "slice index {k} out of range for depth {}",
            vol.depth
        )));
    }
    ScalarImage2D::new(
        vol.width,
        vol.height,
        vol.slice_values(k).to_vec(),
        (vol.spacing.0, vol.spacing.1),
    )
}

/// Linear intensity window mapped to [0, 1] with clamping.
pub fn normalize_window(img: &ScalarImage2D, lo: f64, hi: f64) -> Result<ScalarImage2D> {
    if !(lo < hi) {
        return Err(Error::invalid(format!("window lo {lo} must be below hi {hi}")));
    }
    let span = hi - lo;
    let values = img
        .values
        .iter()
        .map(|&v| ((v - lo) / span).clamp(0.0, 1.0))
        .collect();
    img.with_values(values)
}

/// Per-pixel foreground/background labels (0 or 1), row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask2D {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl BinaryMask2D {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("empty mask {width}x{height}")));
        }
        if labels.len() != width * height {
            return Err(Error::shape(format!(
                "{} labels for a {width}x{height} mask",
                labels.len()
            )));
        }
        if let Some(i) = labels.iter().position(|&l| l > 1) {
            return Err(Error::invalid(format!(
                "mask label {} at index {i} is not 0 or 1",
                labels[i]
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0; width * height])
    }

    /// Mask of pixels where `pred` holds.
    pub fn from_fn(width: usize, height: usize, mut pred: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut labels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                labels.push(u8::from(pred(x, y)));
            }
        }
        Self::new(width, height, labels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn foreground_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    /// Foreground pixel coordinates as (x, y), row-major order.
    pub fn foreground_points(&self) -> Vec<(usize, usize)> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == 1)
            .map(|(i, _)| (i % self.width, i / self.width))
            .collect()
    }

    pub fn same_dims(&self, other: &BinaryMask2D) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// 8-bit RGB image stored as three row-major planes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage2D {
    width: usize,
    height: usize,
    channels: [Vec<u8>; 3],
}

impl RgbImage2D {
    pub fn new(width: usize, height: usize, channels: [Vec<u8>; 3]) -> Result<Self> {
        let n = width * height;
        if channels.iter().any(|c| c.len() != n) {
            return Err(Error::shape(format!("channel planes must hold {n} values")));
        }
        Ok(Self {
            width,
            height,
            channels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channel(&self, c: usize) -> &[u8] {
        &self.channels[c]
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = y * self.width + x;
        [self.channels[0][i], self.channels[1][i], self.channels[2][i]]
    }
}
