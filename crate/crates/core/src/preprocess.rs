//! Frame aggregation, footprint cropping, resampling, and normalization.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::{FEATURE_DIM, IMAGE_COLS, IMAGE_LEN, IMAGE_ROWS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FootSide {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Healthy,
    Acld,
}

impl Label {
    /// Healthy is the positive class.
    pub fn target(self) -> f64 {
        match self {
            Label::Healthy => 1.0,
            Label::Acld => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Aggregation {
    Max,
    Sum,
    Avg,
}

impl Aggregation {
    pub const ALL: [Aggregation; 3] = [Aggregation::Max, Aggregation::Sum, Aggregation::Avg];
}

macro_rules! text_enum {
    ($ty:ty, $what:literal, $($variant:path => $text:literal),+) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $text),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($variant),)+
                    other => Err(Error::InvalidInput(format!(concat!("unknown ", $what, " `{}`"), other))),
                }
            }
        }
    };
}

text_enum!(FootSide, "foot side", FootSide::Left => "L", FootSide::Right => "R");
text_enum!(Label, "label", Label::Healthy => "healthy", Label::Acld => "acld");
text_enum!(Aggregation, "aggregation", Aggregation::Max => "max", Aggregation::Sum => "sum", Aggregation::Avg => "avg");

/// A row-major 2-D grid of reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values cannot form a {rows}x{cols} grid",
                data.len()
            )));
        }
        Ok(Grid { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Grid {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }
}

/// A raw multi-frame footprint capture.
#[derive(Clone, Debug, PartialEq)]
pub struct PressureFrameSequence {
    rows: usize,
    cols: usize,
    frames: Vec<Vec<f64>>,
    pub foot_side: FootSide,
    pub case_id: String,
    pub label: Label,
}

impl PressureFrameSequence {
    pub fn new(
        rows: usize,
        cols: usize,
        frames: Vec<Vec<f64>>,
        foot_side: FootSide,
        case_id: impl Into<String>,
        label: Label,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 || frames.is_empty() {
            return Err(Error::InvalidInput(
                "sequence needs at least one non-empty frame".into(),
            ));
        }
        let mut any_contact = false;
        for (k, f) in frames.iter().enumerate() {
            if f.len() != rows * cols {
                return Err(Error::Shape(format!(
                    "frame {k} has {} values, expected {}",
                    f.len(),
                    rows * cols
                )));
            }
            if f.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "frame {k} has negative or non-finite pressure"
                )));
            }
            any_contact |= f.iter().any(|&v| v > 0.0);
        }
        if !any_contact {
            return Err(Error::InvalidInput("sequence has no nonzero pressure".into()));
        }
        Ok(PressureFrameSequence {
            rows,
            cols,
            frames,
            foot_side,
            case_id: case_id.into(),
            label,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    fn fold(&self, init: f64, f: impl Fn(f64, f64) -> f64) -> Grid {
        let mut out = vec![init; self.rows * self.cols];
        for frame in &self.frames {
            out.iter_mut().zip(frame).for_each(|(o, &v)| *o = f(*o, v));
        }
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: out,
        }
    }
}

/// Per-cell maximum over frames.
pub fn aggregate_max(seq: &PressureFrameSequence) -> Grid {
    seq.fold(0.0, f64::max)
}

/// Per-cell sum over frames.
pub fn aggregate_sum(seq: &PressureFrameSequence) -> Grid {
    seq.fold(0.0, |a, b| a + b)
}

/// Per-cell mean over the frames where the cell is nonzero; 0 where it never is.
pub fn aggregate_effective_avg(seq: &PressureFrameSequence) -> Grid {
    let sum = aggregate_sum(seq);
    let count = seq.fold(0.0, |c, v| if v != 0.0 { c + 1.0 } else { c });
    let data = sum
        .data
        .iter()
        .zip(&count.data)
        .map(|(&s, &c)| if c == 0.0 { 0.0 } else { s / c })
        .collect();
    Grid { data, ..sum }
}

pub fn aggregate(seq: &PressureFrameSequence, kind: Aggregation) -> Grid {
    match kind {
        Aggregation::Max => aggregate_max(seq),
        Aggregation::Sum => aggregate_sum(seq),
        Aggregation::Avg => aggregate_effective_avg(seq),
    }
}

/// Bilinear resampling with pixel-center alignment and edge clamping.
pub fn resample_bilinear(grid: &Grid, rows: usize, cols: usize) -> Grid {
    let axis = |src: usize, dst: usize| -> Vec<(usize, usize, f64)> {
        let scale = src as f64 / dst as f64;
        (0..dst)
            .map(|i| {
                let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
                let lo = pos.floor() as usize;
                let hi = (lo + 1).min(src - 1);
                (lo, hi, pos - lo as f64)
            })
            .collect()
    };
    let ys = axis(grid.rows, rows);
    let xs = axis(grid.cols, cols);
    let mut out = Grid::zeros(rows, cols);
    for (r, &(y0, y1, fy)) in ys.iter().enumerate() {
        for (c, &(x0, x1, fx)) in xs.iter().enumerate() {
            let top = grid.get(y0, x0) * (1.0 - fx) + grid.get(y0, x1) * fx;
            let bottom = grid.get(y1, x0) * (1.0 - fx) + grid.get(y1, x1) * fx;
            out.set(r, c, top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

/// Crops to the tight bounding box of nonzero cells and resamples to 52x32.
pub fn crop_resample(grid: &Grid) -> Result<Grid> {
    let (mut r0, mut r1, mut c0, mut c1) = (usize::MAX, 0, usize::MAX, 0);
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            if grid.get(r, c) > 0.0 {
                r0 = r0.min(r);
                r1 = r1.max(r);
                c0 = c0.min(c);
                c1 = c1.max(c);
            }
        }
    }
    if r0 == usize::MAX {
        return Err(Error::InvalidInput("grid has no nonzero cells".into()));
    }
    let (rows, cols) = (r1 - r0 + 1, c1 - c0 + 1);
    let mut data = Vec::with_capacity(rows * cols);
    for r in r0..=r1 {
        data.extend_from_slice(&grid.data[r * grid.cols + c0..=r * grid.cols + c1]);
    }
    let cropped = Grid { rows, cols, data };
    Ok(resample_bilinear(&cropped, IMAGE_ROWS, IMAGE_COLS))
}

/// Descriptive fields carried alongside an image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageMeta {
    pub aggregation: Aggregation,
    pub foot_side: FootSide,
    pub case_id: String,
    pub label: Label,
}

/// A normalized 52x32 pressure image with the extrema it was scaled by.
#[derive(Clone, Debug, PartialEq)]
pub struct PressureImage {
    grid: Vec<f64>,
    pub p_min: f64,
    pub p_max: f64,
    pub meta: ImageMeta,
}

impl PressureImage {
    /// Wraps an already normalized grid.
    pub fn new(grid: Vec<f64>, p_min: f64, p_max: f64, meta: ImageMeta) -> Result<Self> {
        if grid.len() != IMAGE_LEN {
            return Err(Error::Shape(format!(
                "image needs {IMAGE_LEN} values, got {}",
                grid.len()
            )));
        }
        if grid.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput("image values must lie in [0, 1]".into()));
        }
        if !(p_min.is_finite() && p_max.is_finite()) || p_min > p_max {
            return Err(Error::InvalidInput(format!("bad extrema {p_min}..{p_max}")));
        }
        if p_min == p_max && grid.iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidInput(
                "degenerate extrema require an all-zero grid".into(),
            ));
        }
        Ok(PressureImage {
            grid,
            p_min,
            p_max,
            meta,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn to_grid(&self) -> Grid {
        Grid {
            rows: IMAGE_ROWS,
            cols: IMAGE_COLS,
            data: self.grid.clone(),
        }
    }

    /// Same extrema and metadata, new pixel values (clamped into [0, 1]).
    pub fn with_grid(&self, grid: Vec<f64>) -> Result<Self> {
        let grid = grid.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Ok(PressureImage {
            grid,
            p_min: self.p_min,
            p_max: self.p_max,
            meta: self.meta.clone(),
        })
    }
}

/// Scales a 52x32 grid to [0, 1], recording its extrema.
pub fn minmax_normalize(grid: &Grid, meta: ImageMeta) -> Result<PressureImage> {
    if grid.rows != IMAGE_ROWS || grid.cols != IMAGE_COLS {
        return Err(Error::Shape(format!(
            "expected a {IMAGE_ROWS}x{IMAGE_COLS} grid, got {}x{}",
            grid.rows, grid.cols
        )));
    }
    if grid.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("grid has non-finite values".into()));
    }
    let p_min = grid.data.iter().copied().fold(f64::INFINITY, f64::min);
    let p_max = grid.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let data = if p_max > p_min {
        let span = p_max - p_min;
        grid.data.iter().map(|v| ((v - p_min) / span).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.0; IMAGE_LEN]
    };
    Ok(PressureImage {
        grid: data,
        p_min,
        p_max,
        meta,
    })
}

/// Restores sensor units. A degenerate image restores to the constant `p_min`.
pub fn denormalize(img: &PressureImage) -> Grid {
    let span = img.p_max - img.p_min;
    Grid {
        rows: IMAGE_ROWS,
        cols: IMAGE_COLS,
        data: img.grid.iter().map(|v| v * span + img.p_min).collect(),
    }
}

/// Aggregate, crop, resample, and normalize one capture.
pub fn preprocess_sequence(seq: &PressureFrameSequence, kind: Aggregation) -> Result<PressureImage> {
    let grid = crop_resample(&aggregate(seq, kind))?;
    minmax_normalize(
        &grid,
        ImageMeta {
            aggregation: kind,
            foot_side: seq.foot_side,
            case_id: seq.case_id.clone(),
            label: seq.label,
        },
    )
}

/// A bottleneck feature vector.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    pub standardized: bool,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != FEATURE_DIM {
            return Err(Error::Shape(format!(
                "feature vector needs {FEATURE_DIM} values, got {}",
                values.len()
            )));
        }
        Ok(FeatureVector {
            values,
            standardized: false,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Zero mean, unit population standard deviation over the components.
pub fn standardize_features(v: &FeatureVector) -> Result<FeatureVector> {
    let n = v.values.len() as f64;
    let mean = v.values.iter().sum::<f64>() / n;
    let var = v.values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std <= 1e-12 {
        return Err(Error::InvalidInput(format!(
            "feature vector is (near-)constant (std {std:e})"
        )));
    }
    Ok(FeatureVector {
        values: v.values.iter().map(|x| (x - mean) / std).collect(),
        standardized: true,
    })
}
