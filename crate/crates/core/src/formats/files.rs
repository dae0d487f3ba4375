use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::preprocess::{FootSide, Grid, ImageMeta, Label, PressureFrameSequence, PressureImage};
use crate::{IMAGE_COLS, IMAGE_ROWS};

pub const PGM_MAXVAL: u32 = 65535;

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn push_rows(out: &mut String, values: &[f64], cols: usize, sep: &str) {
    for row in values.chunks(cols) {
        let mut first = true;
        for v in row {
            if !first {
                out.push_str(sep);
            }
            first = false;
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
}

/// Splits a file into its header lines and the whitespace-separated body values.
fn parse_body(path: &Path, text: &str, header_lines: usize, expected: usize) -> Result<Vec<f64>> {
    let body: Vec<&str> = text.lines().skip(header_lines).collect();
    let mut values = Vec::with_capacity(expected);
    for (i, line) in body.iter().enumerate() {
        for tok in line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
        {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(path, header_lines + i + 1, format!("bad number `{tok}`")))?;
            values.push(v);
        }
    }
    if values.len() != expected {
        return Err(Error::parse(
            path,
            header_lines + 1,
            format!("expected {expected} values, found {}", values.len()),
        ));
    }
    Ok(values)
}

fn header_fields<'a>(path: &Path, text: &'a str, magic: &str) -> Result<Vec<&'a str>> {
    let mut lines = text.lines();
    if lines.next() != Some(magic) {
        return Err(Error::parse(path, 1, format!("missing `{magic}` header")));
    }
    Ok(lines
        .next()
        .ok_or_else(|| Error::parse(path, 2, "missing dimensions line"))?
        .split_whitespace()
        .collect())
}

pub fn write_sequence(path: &Path, seq: &PressureFrameSequence) -> Result<()> {
    let mut s = format!("PFS1\n{} {} {}\n", seq.rows(), seq.cols(), seq.frames().len());
    for frame in seq.frames() {
        push_rows(&mut s, frame, seq.cols(), " ");
    }
    write_text(path, &s)
}

/// Side, label, and case id come from the manifest.
pub fn read_sequence(path: &Path, foot_side: FootSide, label: Label, case_id: &str) -> Result<PressureFrameSequence> {
    let text = read_text(path)?;
    let dims = header_fields(path, &text, "PFS1")?;
    let parse_dim = |s: &str| -> Result<usize> {
        s.parse()
            .ok()
            .filter(|&v: &usize| v > 0)
            .ok_or_else(|| Error::parse(path, 2, format!("bad dimension `{s}`")))
    };
    if dims.len() != 3 {
        return Err(Error::parse(path, 2, "expected `rows cols K`"));
    }
    let (rows, cols, k) = (parse_dim(dims[0])?, parse_dim(dims[1])?, parse_dim(dims[2])?);
    let values = parse_body(path, &text, 2, rows * cols * k)?;
    let frames = values.chunks(rows * cols).map(<[f64]>::to_vec).collect();
    PressureFrameSequence::new(rows, cols, frames, foot_side, case_id, label).map_err(|e| match e {
        Error::InvalidInput(msg) => Error::InvalidInput(format!("{}: {msg}", path.display())),
        other => Error::parse(path, 3, other.to_string()),
    })
}

pub fn write_image(path: &Path, img: &PressureImage) -> Result<()> {
    let mut s = format!(
        "PIMG1\n{IMAGE_ROWS} {IMAGE_COLS} {} {} {} {} {}\n",
        img.p_min, img.p_max, img.meta.foot_side, img.meta.label, img.meta.aggregation
    );
    push_rows(&mut s, img.grid(), IMAGE_COLS, " ");
    write_text(path, &s)
}

/// The case id is not stored in the file; the caller supplies it.
pub fn read_image(path: &Path, case_id: &str) -> Result<PressureImage> {
    let text = read_text(path)?;
    let f = header_fields(path, &text, "PIMG1")?;
    if f.len() != 7 || f[0] != IMAGE_ROWS.to_string() || f[1] != IMAGE_COLS.to_string() {
        return Err(Error::parse(
            path,
            2,
            "expected `52 32 p_min p_max side label aggregation`",
        ));
    }
    let bad = |e: Error| Error::parse(path, 2, e.to_string());
    let p_min: f64 = f[2].parse().map_err(|_| Error::parse(path, 2, "bad p_min"))?;
    let p_max: f64 = f[3].parse().map_err(|_| Error::parse(path, 2, "bad p_max"))?;
    let meta = ImageMeta {
        foot_side: f[4].parse().map_err(bad)?,
        label: f[5].parse().map_err(bad)?,
        aggregation: f[6].parse().map_err(bad)?,
        case_id: case_id.to_string(),
    };
    let values = parse_body(path, &text, 2, IMAGE_ROWS * IMAGE_COLS)?;
    PressureImage::new(values, p_min, p_max, meta).map_err(|e| Error::parse(path, 3, e.to_string()))
}

pub fn write_grid_csv(path: &Path, values: &[f64], cols: usize) -> Result<()> {
    let mut s = String::new();
    push_rows(&mut s, values, cols, ",");
    write_text(path, &s)
}

pub fn read_grid_csv(path: &Path) -> Result<Grid> {
    let text = read_text(path)?;
    let mut data = Vec::new();
    let mut cols = None;
    for (i, line) in text.lines().enumerate() {
        let row: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| Error::parse(path, i + 1, format!("bad number `{t}`")))
            })
            .collect::<Result<_>>()?;
        if *cols.get_or_insert(row.len()) != row.len() {
            return Err(Error::parse(path, i + 1, "ragged row"));
        }
        data.extend(row);
    }
    let cols = cols.ok_or_else(|| Error::parse(path, 1, "empty grid"))?;
    Grid::new(data.len() / cols, cols, data)
}

/// Plain PGM of values in [0, 1] (clamped), scaled to 0..=65535.
pub fn write_pgm(path: &Path, values: &[f64], rows: usize, cols: usize) -> Result<()> {
    debug_assert_eq!(values.len(), rows * cols);
    let mut s = format!("P2\n{cols} {rows}\n{PGM_MAXVAL}\n");
    for row in values.chunks(cols) {
        let line: Vec<String> = row
            .iter()
            .map(|v| ((v.clamp(0.0, 1.0) * PGM_MAXVAL as f64).round() as u32).to_string())
            .collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    write_text(path, &s)
}

/// Parses a plain PGM, returning `(width, height, maxval, pixels)`.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, u32, Vec<u32>)> {
    let text = read_text(path)?;
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    if tokens.next() != Some("P2") {
        return Err(Error::parse(path, 1, "not a plain PGM (P2)"));
    }
    let mut next_num = |what: &str| -> Result<u64> {
        tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::parse(path, 1, format!("bad or missing {what}")))
    };
    let width = next_num("width")? as usize;
    let height = next_num("height")? as usize;
    let maxval = next_num("maxval")? as u32;
    let pixels = (0..width * height)
        .map(|_| next_num("pixel").map(|v| v as u32))
        .collect::<Result<Vec<_>>>()?;
    if pixels.iter().any(|&p| p > maxval) || tokens.next().is_some() {
        return Err(Error::parse(path, 1, "pixel data does not match header"));
    }
    Ok((width, height, maxval, pixels))
}
