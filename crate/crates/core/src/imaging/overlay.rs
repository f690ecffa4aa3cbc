use super::{BinaryMask2D, RgbImage2D, ScalarImage2D};
use crate::error::{Error, Result};

/// Foreground pixels with at least one 4-neighbour in the background.
/// Pixels outside the image count as background.
pub fn contour_pixels(mask: &BinaryMask2D) -> Vec<bool> {
    let (w, h) = (mask.width(), mask.height());
    let fg = |x: isize, y: isize| {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && mask.get(x as usize, y as usize) == 1
    };
    let mut out = vec![false; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            if fg(x, y) && !(fg(x - 1, y) && fg(x + 1, y) && fg(x, y - 1) && fg(x, y + 1)) {
                out[y as usize * w + x as usize] = true;
            }
        }
    }
    out
}

/// Grayscale CT with the ground-truth contour in green and, if given, the
/// prediction blended 50% red underneath.
pub fn render_overlay(
    ct: &ScalarImage2D,
    gt: &BinaryMask2D,
    pred: Option<&BinaryMask2D>,
) -> Result<RgbImage2D> {
    let (w, h) = (ct.width(), ct.height());
    let dims_ok = |m: &BinaryMask2D| m.width() == w && m.height() == h;
    if !dims_ok(gt) || !pred.is_none_or(dims_ok) {
        return Err(Error::shape(format!("overlay inputs must all be {w}x{h}")));
    }

    let (lo, hi) = ct.min_max();
    let span = hi - lo;
    let base: Vec<u8> = ct
        .values()
        .iter()
        .map(|&v| {
            if span > 0.0 {
                ((v - lo) / span * 255.0).round() as u8
            } else {
                0
            }
        })
        .collect();

    let mut r = base.clone();
    let mut g = base.clone();
    let mut b = base.clone();
    if let Some(pred) = pred {
        for (i, &l) in pred.labels().iter().enumerate() {
            if l == 1 {
                let v = u16::from(base[i]);
                r[i] = ((v + 255) / 2) as u8;
                g[i] = (v / 2) as u8;
                b[i] = (v / 2) as u8;
            }
        }
    }
    for (i, on) in contour_pixels(gt).into_iter().enumerate() {
        if on {
            r[i] = 0;
            g[i] = 255;
            b[i] = 0;
        }
    }
    RgbImage2D::new(w, h, [r, g, b])
}
