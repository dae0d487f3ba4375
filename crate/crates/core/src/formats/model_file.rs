use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::nn::{NetworkParams, Tensor};

pub const MODEL_MAGIC: &str = "N2RPP-MODEL";
const FORMAT_VERSION: &str = "1";

/// Which network a model file holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetName {
    Ae,
    Gen,
    Disc,
    Clf,
}

impl fmt::Display for NetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NetName::Ae => "ae",
            NetName::Gen => "gen",
            NetName::Disc => "disc",
            NetName::Clf => "clf",
        })
    }
}

impl FromStr for NetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ae" => Ok(NetName::Ae),
            "gen" => Ok(NetName::Gen),
            "disc" => Ok(NetName::Disc),
            "clf" => Ok(NetName::Clf),
            other => Err(Error::InvalidInput(format!("unknown network name `{other}`"))),
        }
    }
}

/// Text header (magic, version, name, count, `name dims...` per tensor)
/// followed by every value as a little-endian `f32`, in header order.
pub fn encode_model(name: NetName, params: &NetworkParams) -> Vec<u8> {
    let mut header = format!("{MODEL_MAGIC}\n{FORMAT_VERSION}\n{name}\n{}\n", params.len());
    for (pname, t) in params.iter() {
        header.push_str(pname);
        for d in t.shape() {
            header.push(' ');
            header.push_str(&d.to_string());
        }
        header.push('\n');
    }
    let mut bytes = header.into_bytes();
    bytes.reserve(params.scalar_count() * 4);
    for (_, t) in params.iter() {
        for &v in t.data() {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    bytes
}

pub fn decode_model(bytes: &[u8], origin: &Path) -> Result<(NetName, NetworkParams)> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut next_line = || -> Result<&str> {
        let rest = &bytes[pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::parse(origin, line_no + 1, "truncated header"))?;
        line_no += 1;
        pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| Error::parse(origin, line_no, "header is not UTF-8"))
    };
    if next_line()? != MODEL_MAGIC {
        return Err(Error::parse(origin, 1, "not a model file"));
    }
    let version = next_line()?;
    if version != FORMAT_VERSION {
        return Err(Error::parse(
            origin,
            2,
            format!("unsupported format version `{version}`"),
        ));
    }
    let name: NetName = next_line()?
        .parse()
        .map_err(|e: Error| Error::parse(origin, 3, e.to_string()))?;
    let count: usize = next_line()?
        .parse()
        .map_err(|_| Error::parse(origin, 4, "bad parameter count"))?;
    let mut shapes = Vec::with_capacity(count);
    for i in 0..count {
        let line = next_line()?;
        let mut parts = line.split(' ');
        let pname = parts.next().filter(|s| !s.is_empty());
        let dims: Option<Vec<usize>> = parts.map(|d| d.parse().ok().filter(|&v| v > 0)).collect();
        match (pname, dims) {
            (Some(n), Some(d)) if !d.is_empty() => shapes.push((n.to_string(), d)),
            _ => return Err(Error::parse(origin, 5 + i, format!("bad parameter line `{line}`"))),
        }
    }
    let body = &bytes[pos..];
    let total: usize = shapes.iter().map(|(_, d)| d.iter().product::<usize>()).sum();
    if body.len() != total * 4 {
        return Err(Error::parse(
            origin,
            5 + count,
            format!("binary section has {} bytes, header declares {}", body.len(), total * 4),
        ));
    }
    let mut values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64);
    let mut entries = Vec::with_capacity(count);
    for (pname, dims) in shapes {
        let n = dims.iter().product();
        let data: Vec<f64> = values.by_ref().take(n).collect();
        let t = Tensor::new(dims, data).map_err(|e| Error::parse(origin, 5, format!("`{pname}`: {e}")))?;
        entries.push((pname, t));
    }
    Ok((name, NetworkParams::new(entries)?))
}

pub fn save_model(path: &Path, name: NetName, params: &NetworkParams) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, encode_model(name, params)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<(NetName, NetworkParams)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes, path)
}
