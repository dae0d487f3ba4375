//! Seeded synthetic plantar-pressure captures.
//!
//! A foot is an ellipse carrying four Gaussian load blobs (toes, forefoot,
//! midfoot, heel) along its long axis. Each frame applies a stance-phase
//! envelope: the heel loads first, the toes last. Multiplicative noise is
//! applied inside the contact area only, so the footprint outline stays
//! stable under cropping.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::nn::seeded_rng;
use crate::preprocess::{FootSide, Label, PressureFrameSequence};

/// Loads (normalized pressure) for the four plantar regions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionLoads {
    pub toes: f64,
    pub forefoot: f64,
    pub midfoot: f64,
    pub heel: f64,
}

impl RegionLoads {
    fn map(self, other: RegionLoads, f: impl Fn(f64, f64) -> f64) -> RegionLoads {
        RegionLoads {
            toes: f(self.toes, other.toes),
            forefoot: f(self.forefoot, other.forefoot),
            midfoot: f(self.midfoot, other.midfoot),
            heel: f(self.heel, other.heel),
        }
    }

    fn as_array(&self) -> [f64; 4] {
        [self.toes, self.forefoot, self.midfoot, self.heel]
    }
}

impl Default for RegionLoads {
    fn default() -> Self {
        RegionLoads {
            toes: 0.6,
            forefoot: 1.0,
            midfoot: 0.35,
            heel: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FootParams {
    pub rows: usize,
    pub cols: usize,
    pub frames: usize,
    /// Foot length as a fraction of the grid height.
    pub length: f64,
    /// Foot width as a fraction of the grid width.
    pub width: f64,
    /// Foot progression angle in degrees.
    pub angle_deg: f64,
    pub loads: RegionLoads,
    /// Relative multiplicative noise amplitude.
    pub noise: f64,
    pub seed: u64,
}

impl Default for FootParams {
    fn default() -> Self {
        FootParams {
            rows: 64,
            cols: 40,
            frames: 16,
            length: 0.85,
            width: 0.65,
            angle_deg: 0.0,
            loads: RegionLoads::default(),
            noise: 0.02,
            seed: 0,
        }
    }
}

impl FootParams {
    pub fn validate(&self) -> Result<()> {
        if self.rows < 4 || self.cols < 4 || self.frames == 0 {
            return Err(Error::InvalidInput(format!(
                "degenerate capture {}x{} with {} frames",
                self.rows, self.cols, self.frames
            )));
        }
        if !(self.length > 0.0 && self.length <= 1.0 && self.width > 0.0 && self.width <= 1.0) {
            return Err(Error::InvalidInput(
                "foot length/width must be fractions in (0, 1]".into(),
            ));
        }
        if !(-20.0..=20.0).contains(&self.angle_deg) {
            return Err(Error::InvalidInput(format!(
                "angle {} outside [-20, 20]",
                self.angle_deg
            )));
        }
        if self.loads.as_array().iter().any(|l| l.is_nan() || *l < 0.0) {
            return Err(Error::InvalidInput("region loads must be nonnegative".into()));
        }
        if !(0.0..=0.2).contains(&self.noise) {
            return Err(Error::InvalidInput(format!("noise {} outside [0, 0.2]", self.noise)));
        }
        Ok(())
    }
}

/// Blob layout: (position along the foot, longitudinal sigma, lateral sigma),
/// in foot-relative coordinates (0 = toe tip, 1 = heel end).
const BLOBS: [(f64, f64, f64); 4] = [
    (0.10, 0.06, 0.55),
    (0.30, 0.09, 0.60),
    (0.58, 0.12, 0.35),
    (0.85, 0.08, 0.50),
];

/// Phase window in which each region carries load.
const WINDOWS: [(f64, f64); 4] = [(0.45, 1.0), (0.25, 1.0), (0.1, 0.9), (0.0, 0.65)];

/// Baseline pressure of any cell in contact.
const CONTACT_BASE: f64 = 0.08;

fn envelope(window: (f64, f64), phase: f64) -> f64 {
    let (a, b) = window;
    if phase <= a || phase >= b {
        0.0
    } else {
        (std::f64::consts::PI * (phase - a) / (b - a)).sin()
    }
}

/// Whether the part of the foot at `t` touches the ground at `phase`.
fn in_contact(t: f64, phase: f64) -> bool {
    if t > 0.65 {
        phase < 0.7
    } else if t < 0.35 {
        phase > 0.2
    } else {
        true
    }
}

/// One synthetic capture.
pub fn generate_foot(
    p: &FootParams,
    foot_side: FootSide,
    case_id: &str,
    label: Label,
) -> Result<PressureFrameSequence> {
    p.validate()?;
    let mut rng = seeded_rng(p.seed);
    let cr = (p.rows - 1) as f64 / 2.0;
    let cc = (p.cols - 1) as f64 / 2.0;
    let half_len = p.length * p.rows as f64 / 2.0;
    let half_wid = p.width * p.cols as f64 / 2.0;
    let (sin, cos) = p.angle_deg.to_radians().sin_cos();
    let loads = p.loads.as_array();

    // Foot-frame coordinates of every cell inside the outline.
    let cells: Vec<(usize, f64, f64)> = (0..p.rows * p.cols)
        .filter_map(|i| {
            let dr = (i / p.cols) as f64 - cr;
            let dc = (i % p.cols) as f64 - cc;
            let u = dr * cos + dc * sin;
            let v = -dr * sin + dc * cos;
            let (un, vn) = (u / half_len, v / half_wid);
            (un * un + vn * vn <= 1.0).then_some((i, (un + 1.0) / 2.0, vn))
        })
        .collect();
    if cells.is_empty() {
        return Err(Error::InvalidInput("foot outline covers no cells".into()));
    }

    let mut frames = Vec::with_capacity(p.frames);
    for k in 0..p.frames {
        let phase = (k as f64 + 0.5) / p.frames as f64;
        let env: Vec<f64> = WINDOWS.iter().map(|&w| envelope(w, phase)).collect();
        let mut frame = vec![0.0; p.rows * p.cols];
        for &(i, t, vn) in &cells {
            if !in_contact(t, phase) {
                continue;
            }
            let mut value = CONTACT_BASE;
            for (r, &(center, st, sv)) in BLOBS.iter().enumerate() {
                let z = (t - center).powi(2) / (2.0 * st * st) + vn * vn / (2.0 * sv * sv);
                value += loads[r] * env[r] * (-z).exp();
            }
            if p.noise > 0.0 {
                let eps: f64 = StandardNormal.sample(&mut rng);
                value *= (1.0 + p.noise * eps).max(0.0);
            }
            frame[i] = value;
        }
        frames.push(frame);
    }
    PressureFrameSequence::new(p.rows, p.cols, frames, foot_side, case_id, label)
}

/// Which feet a cohort contains.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SideMode {
    Left,
    Right,
    /// Alternating left/right by sample index.
    Both,
}

impl std::str::FromStr for SideMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L" => Ok(SideMode::Left),
            "R" => Ok(SideMode::Right),
            "both" => Ok(SideMode::Both),
            other => Err(Error::InvalidInput(format!("unknown side mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CohortSpec {
    pub n_healthy: usize,
    pub n_acld: usize,
    /// Relative load change applied to ACLD feet, e.g. `heel: -0.3`.
    pub acld_delta: RegionLoads,
    pub frames: usize,
    pub rows: usize,
    pub cols: usize,
    pub noise: f64,
    pub sides: SideMode,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            n_healthy: 500,
            n_acld: 500,
            acld_delta: RegionLoads {
                toes: -0.2,
                forefoot: 0.0,
                midfoot: 0.0,
                heel: -0.3,
            },
            frames: 16,
            rows: 64,
            cols: 40,
            noise: 0.02,
            sides: SideMode::Left,
            seed: 42,
        }
    }
}

/// Decorrelated per-sample seed (splitmix64 finalizer over seed and index).
pub fn sample_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Healthy feet first (`h0000`, ...), then ACLD feet (`a0000`, ...).
pub fn generate_cohort(spec: &CohortSpec) -> Result<Vec<PressureFrameSequence>> {
    if spec.n_healthy == 0 || spec.n_acld == 0 {
        return Err(Error::InvalidInput("cohort needs at least one sample per class".into()));
    }
    if spec.acld_delta.as_array().iter().any(|d| *d < -1.0) {
        return Err(Error::InvalidInput("ACLD delta would make loads negative".into()));
    }
    let base = RegionLoads::default();
    let total = spec.n_healthy + spec.n_acld;
    let mut out = Vec::with_capacity(total);
    for index in 0..total {
        let (label, local) = if index < spec.n_healthy {
            (Label::Healthy, index)
        } else {
            (Label::Acld, index - spec.n_healthy)
        };
        let seed = sample_seed(spec.seed, index as u64);
        let mut rng = seeded_rng(seed);
        let side = match spec.sides {
            SideMode::Left => FootSide::Left,
            SideMode::Right => FootSide::Right,
            SideMode::Both if local % 2 == 0 => FootSide::Left,
            SideMode::Both => FootSide::Right,
        };
        let jitter = RegionLoads {
            toes: rng.random_range(-0.1..0.1),
            forefoot: rng.random_range(-0.1..0.1),
            midfoot: rng.random_range(-0.1..0.1),
            heel: rng.random_range(-0.1..0.1),
        };
        let mut loads = base.map(jitter, |b, j| b * (1.0 + j));
        if label == Label::Acld {
            loads = loads.map(spec.acld_delta, |l, d| l * (1.0 + d));
        }
        let angle: f64 = rng.random_range(-8.0..8.0) + 5.0;
        let params = FootParams {
            rows: spec.rows,
            cols: spec.cols,
            frames: spec.frames,
            length: rng.random_range(0.75..0.92),
            width: rng.random_range(0.55..0.75),
            angle_deg: if side == FootSide::Left { angle } else { -angle },
            loads,
            noise: spec.noise,
            seed: rng.random(),
        };
        let prefix = if label == Label::Healthy { 'h' } else { 'a' };
        out.push(generate_foot(&params, side, &format!("{prefix}{local:04}"), label)?);
    }
    Ok(out)
}
