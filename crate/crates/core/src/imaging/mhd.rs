//! MetaImage-style volumes: a `Key = Value` text header next to a raw
//! little-endian payload (x fastest, then y, then z).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::Volume3D;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementType {
    Uint8,
    Int16,
    Uint16,
    Float32,
}

impl ElementType {
    pub fn size(self) -> usize {
        match self {
            ElementType::Uint8 => 1,
            ElementType::Int16 | ElementType::Uint16 => 2,
            ElementType::Float32 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementType::Uint8 => "uint8",
            ElementType::Int16 => "int16",
            ElementType::Uint16 => "uint16",
            ElementType::Float32 => "float32",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "uint8" => Ok(ElementType::Uint8),
            "int16" => Ok(ElementType::Int16),
            "uint16" => Ok(ElementType::Uint16),
            "float32" => Ok(ElementType::Float32),
            other => Err(Error::format(format!("unsupported ElementType `{other}`"))),
        }
    }

    fn decode(self, bytes: &[u8]) -> Vec<f64> {
        match self {
            ElementType::Uint8 => bytes.iter().map(|&b| f64::from(b)).collect(),
            ElementType::Int16 => bytes
                .chunks_exact(2)
                .map(|c| f64::from(i16::from_le_bytes([c[0], c[1]])))
                .collect(),
            ElementType::Uint16 => bytes
                .chunks_exact(2)
                .map(|c| f64::from(u16::from_le_bytes([c[0], c[1]])))
                .collect(),
            ElementType::Float32 => bytes
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
                .collect(),
        }
    }
}

struct Header {
    dims: Vec<usize>,
    element_type: ElementType,
    spacing: Vec<f64>,
    data_file: String,
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split_whitespace()
        .map(|tok| {
            tok.parse::<T>()
                .map_err(|_| Error::format(format!("malformed header key {key}: `{value}`")))
        })
        .collect()
}

fn parse_header(text: &str) -> Result<Header> {
    let mut ndims = None;
    let mut dims = None;
    let mut element_type = None;
    let mut spacing = None;
    let mut data_file = None;

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::format(format!("malformed header line {}: `{line}`", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "NDims" => {
                let n: usize = value
                    .parse()
                    .map_err(|_| Error::format(format!("malformed header key NDims: `{value}`")))?;
                if n != 2 && n != 3 {
                    return Err(Error::format(format!("NDims must be 2 or 3, got {n}")));
                }
                ndims = Some(n);
            }
            "DimSize" => dims = Some(parse_list::<usize>(key, value)?),
            "ElementType" => element_type = Some(ElementType::parse(value)?),
            "ElementSpacing" => spacing = Some(parse_list::<f64>(key, value)?),
            "ElementDataFile" => data_file = Some(value.to_string()),
            // Other MetaImage keys (ObjectType, Offset, ...) carry nothing we use.
            _ => {}
        }
    }

    let missing = |k: &str| Error::format(format!("missing header key {k}"));
    let ndims = ndims.ok_or_else(|| missing("NDims"))?;
    let dims = dims.ok_or_else(|| missing("DimSize"))?;
    let element_type = element_type.ok_or_else(|| missing("ElementType"))?;
    let data_file = data_file.ok_or_else(|| missing("ElementDataFile"))?;
    let spacing = spacing.unwrap_or_else(|| vec![1.0; ndims]);

    if dims.len() != ndims {
        return Err(Error::format(format!(
            "malformed header key DimSize: {} entries for NDims = {ndims}",
            dims.len()
        )));
    }
    if spacing.len() != ndims {
        return Err(Error::format(format!(
            "malformed header key ElementSpacing: {} entries for NDims = {ndims}",
            spacing.len()
        )));
    }
    Ok(Header {
        dims,
        element_type,
        spacing,
        data_file,
    })
}

/// Read a volume from an MHD-style header and its raw payload.
///
/// 2-D headers produce a volume of depth 1.
pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume3D> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header = parse_header(&text)?;

    let raw_path = path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&header.data_file);
    let bytes = fs::read(&raw_path).map_err(|e| Error::io(&raw_path, e))?;

    let count: usize = header.dims.iter().product();
    let expected = count * header.element_type.size();
    if bytes.len() != expected {
        return Err(Error::format(format!(
            "payload size mismatch: expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let values = header.element_type.decode(&bytes);
    let (w, h) = (header.dims[0], header.dims[1]);
    let d = header.dims.get(2).copied().unwrap_or(1);
    let sp = &header.spacing;
    Volume3D::new(w, h, d, values, (sp[0], sp[1], sp.get(2).copied().unwrap_or(1.0)))
}

/// Write `vol` as `<stem>.mhd`-style header at `path` plus a float32 payload
/// next to it (same stem, `.raw` extension). Existing files are replaced.
pub fn write_volume(vol: &Volume3D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if vol.depth() == 0 || vol.values().is_empty() {
        return Err(Error::invalid("empty volume"));
    }
    let raw_path = path.with_extension("raw");
    let raw_name = raw_path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::invalid(format!("unusable output path {}", path.display())))?
        .to_string();

    let (sx, sy, sz) = vol.spacing();
    let mut header = String::new();
    // `{:?}` on f64 prints the shortest representation that round-trips exactly.
    let _ = writeln!(header, "ObjectType = Image");
    let _ = writeln!(header, "NDims = 3");
    let _ = writeln!(header, "DimSize = {} {} {}", vol.width(), vol.height(), vol.depth());
    let _ = writeln!(header, "ElementType = float32");
    let _ = writeln!(header, "ElementSpacing = {sx:?} {sy:?} {sz:?}");
    let _ = writeln!(header, "ElementDataFile = {raw_name}");

    let mut payload = Vec::with_capacity(vol.values().len() * 4);
    for &v in vol.values() {
        payload.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(&raw_path, payload).map_err(|e| Error::io(&raw_path, e))?;
    fs::write(path, header).map_err(|e| Error::io(path, e))?;
    Ok(())
}
