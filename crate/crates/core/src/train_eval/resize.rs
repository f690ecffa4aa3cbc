use crate::error::{Error, Result};
use crate::imaging::{BinaryMask2D, ScalarImage2D};

/// Resampling to a square grid; pixel centres are aligned so that
/// destination pixel `i` samples source coordinate `(i + 0.5) * in / out - 0.5`.
pub trait Resize: Sized {
    fn resize_to(&self, size: usize) -> Result<Self>;
}

fn check_size(size: usize) -> Result<()> {
    if size < 8 {
        return Err(Error::invalid(format!("resize target must be at least 8, got {size}")));
    }
    Ok(())
}

fn source_coord(i: usize, in_len: usize, out_len: usize) -> f64 {
    (i as f64 + 0.5) * in_len as f64 / out_len as f64 - 0.5
}

/// Bilinear resize; samples beyond the edge clamp to the border pixel.
pub fn resize_image(img: &ScalarImage2D, size: usize) -> Result<ScalarImage2D> {
    check_size(size)?;
    let (w, h) = (img.width(), img.height());
    if w == size && h == size {
        return Ok(img.clone());
    }
    let axis = |i: usize, len: usize| {
        let s = source_coord(i, len, size).clamp(0.0, (len - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(len - 1);
        (i0, i1, s - i0 as f64)
    };
    let xs: Vec<_> = (0..size).map(|i| axis(i, w)).collect();
    let mut values = Vec::with_capacity(size * size);
    for y in 0..size {
        let (y0, y1, fy) = axis(y, h);
        for &(x0, x1, fx) in &xs {
            let top = img.get(x0, y0) * (1.0 - fx) + img.get(x1, y0) * fx;
            let bottom = img.get(x0, y1) * (1.0 - fx) + img.get(x1, y1) * fx;
            values.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    let (sx, sy) = img.spacing();
    ScalarImage2D::new(
        size,
        size,
        values,
        (sx * w as f64 / size as f64, sy * h as f64 / size as f64),
    )
}

/// Nearest-neighbour resize, so labels stay binary.
pub fn resize_mask(mask: &BinaryMask2D, size: usize) -> Result<BinaryMask2D> {
    check_size(size)?;
    let (w, h) = (mask.width(), mask.height());
    let nearest = |i: usize, len: usize| ((i as f64 + 0.5) * len as f64 / size as f64).floor().min((len - 1) as f64) as usize;
    BinaryMask2D::from_fn(size, size, |x, y| mask.get(nearest(x, w), nearest(y, h)) != 0)
}

impl Resize for ScalarImage2D {
    fn resize_to(&self, size: usize) -> Result<Self> {
        resize_image(self, size)
    }
}

impl Resize for BinaryMask2D {
    fn resize_to(&self, size: usize) -> Result<Self> {
        resize_mask(self, size)
    }
}
