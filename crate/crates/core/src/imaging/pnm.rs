//! Binary netpbm: P5 (grayscale, maxval 255) and P6 (RGB).

use std::fs;
use std::path::Path;

use super::{BinaryMask2D, RgbImage2D, ScalarImage2D};
use crate::error::{Error, Result};

fn header(magic: &str, width: usize, height: usize) -> Vec<u8> {
    format!("{magic}\n{width} {height}\n255\n").into_bytes()
}

/// Write an image whose values are already in 0..=255; values are rounded
/// and clamped.
pub fn write_pgm(img: &ScalarImage2D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = header("P5", img.width(), img.height());
    bytes.extend(img.values().iter().map(|&v| v.round().clamp(0.0, 255.0) as u8));
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Foreground is stored as 255.
pub fn write_mask_pgm(mask: &BinaryMask2D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = header("P5", mask.width(), mask.height());
    bytes.extend(mask.labels().iter().map(|&l| if l == 1 { 255 } else { 0 }));
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_ppm(img: &RgbImage2D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = header("P6", img.width(), img.height());
    for i in 0..img.width() * img.height() {
        bytes.extend_from_slice(&[img.channel(0)[i], img.channel(1)[i], img.channel(2)[i]]);
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Parse the P5 header, skipping `#` comments. Returns (w, h, maxval, data offset).
fn parse_p5(bytes: &[u8]) -> Result<(usize, usize, usize, usize)> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format("truncated PGM header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).unwrap_or("").to_string());
    }
    if fields[0] != "P5" {
        return Err(Error::format(format!("not a binary PGM (magic `{}`)", fields[0])));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::format(format!("malformed PGM header field `{s}`")))
    };
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval != 255 {
        return Err(Error::format(format!("unsupported PGM maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    Ok((w, h, maxval, pos + 1))
}

/// Read an 8-bit PGM as raw intensities 0..=255 with unit spacing.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<ScalarImage2D> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (w, h, _, off) = parse_p5(&bytes)?;
    let data = bytes
        .get(off..off + w * h)
        .ok_or_else(|| Error::format(format!("{}: truncated PGM raster", path.display())))?;
    ScalarImage2D::from_values(w, h, data.iter().map(|&b| f64::from(b)).collect())
}

/// Any nonzero pixel is foreground.
pub fn read_mask_pgm(path: impl AsRef<Path>) -> Result<BinaryMask2D> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (w, h, _, off) = parse_p5(&bytes)?;
    let data = bytes
        .get(off..off + w * h)
        .ok_or_else(|| Error::format(format!("{}: truncated PGM raster", path.display())))?;
    BinaryMask2D::new(w, h, data.iter().map(|&b| u8::from(b != 0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = ScalarImage2D::from_values(3, 2, vec![0.0, 1.0, 254.6, 255.0, 300.0, -4.0]).unwrap();
        let p = dir.path().join("a.pgm");
        write_pgm(&img, &p).unwrap();
        let raw = fs::read(&p).unwrap();
        assert!(raw.starts_with(b"P5\n3 2\n255\n"));
        let back = read_pgm(&p).unwrap();
        assert_eq!(back.values(), &[0.0, 1.0, 255.0, 255.0, 255.0, 0.0]);
    }

    #[test]
    fn mask_stored_as_255() {
        let dir = tempfile::tempdir().unwrap();
        let m = BinaryMask2D::new(2, 2, vec![0, 1, 1, 0]).unwrap();
        let p = dir.path().join("m.pgm");
        write_mask_pgm(&m, &p).unwrap();
        let raw = fs::read(&p).unwrap();
        assert_eq!(&raw[raw.len() - 4..], &[0, 255, 255, 0]);
        assert_eq!(read_mask_pgm(&p).unwrap(), m);
    }

    #[test]
    fn header_comments_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.pgm");
        fs::write(&p, b"P5\n# made by hand\n2 1\n255\n\x07\x09").unwrap();
        assert_eq!(read_pgm(&p).unwrap().values(), &[7.0, 9.0]);

        fs::write(&p, b"P5\n2 2\n255\n\x00").unwrap();
        assert!(read_pgm(&p).unwrap_err().to_string().contains("truncated"));
        fs::write(&p, b"P2\n1 1\n255\n0").unwrap();
        assert!(read_pgm(&p).is_err());
    }

    #[test]
    fn ppm_layout() {
        let dir = tempfile::tempdir().unwrap();
        let img = RgbImage2D::new(1, 2, [vec![1, 2], vec![3, 4], vec![5, 6]]).unwrap();
        let p = dir.path().join("o.ppm");
        write_ppm(&img, &p).unwrap();
        let raw = fs::read(&p).unwrap();
        assert_eq!(raw, b"P6\n1 2\n255\n\x01\x03\x05\x02\x04\x06");
    }
}
