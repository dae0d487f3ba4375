use std::fmt::Write as _;
use std::path::Path;

use crate::autoencoder::AeConfig;
use crate::classifier::{ClfConfig, SplitSpec};
use crate::error::{Error, Result};
use crate::gan::GanConfig;
use crate::nn::AdamConfig;
use crate::synth::{CohortSpec, RegionLoads, SideMode};

/// Flat `key=value` run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub alpha: f64,
    pub gan_iterations: usize,
    pub k_d: usize,
    pub batch: usize,
    pub adam_lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub splits: [f64; 3],
    pub ae_epochs: usize,
    pub ae_lr: f64,
    pub clf_epochs: usize,
    pub clf_lr: f64,
    pub synth_healthy: usize,
    pub synth_acld: usize,
    pub synth_frames: usize,
    pub synth_rows: usize,
    pub synth_cols: usize,
    pub synth_noise: f64,
    pub synth_sides: String,
    pub synth_delta_toes: f64,
    pub synth_delta_forefoot: f64,
    pub synth_delta_midfoot: f64,
    pub synth_delta_heel: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            alpha: 0.03,
            gan_iterations: 20_000,
            k_d: 1,
            batch: 32,
            adam_lr: 2e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 42,
            splits: [0.70, 0.10, 0.20],
            ae_epochs: 500,
            ae_lr: 1e-3,
            clf_epochs: 30,
            clf_lr: 1e-3,
            synth_healthy: 500,
            synth_acld: 500,
            synth_frames: 16,
            synth_rows: 64,
            synth_cols: 40,
            synth_noise: 0.02,
            synth_sides: "L".into(),
            synth_delta_toes: -0.2,
            synth_delta_forefoot: 0.0,
            synth_delta_midfoot: 0.0,
            synth_delta_heel: -0.3,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "alpha" => self.alpha = num(key, value)?,
            "gan_iterations" => self.gan_iterations = num(key, value)?,
            "k_d" => self.k_d = num(key, value)?,
            "batch" => self.batch = num(key, value)?,
            "adam_lr" => self.adam_lr = num(key, value)?,
            "adam_beta1" => self.adam_beta1 = num(key, value)?,
            "adam_beta2" => self.adam_beta2 = num(key, value)?,
            "adam_eps" => self.adam_eps = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "splits" => {
                let parts: Vec<&str> = value.split('/').collect();
                if parts.len() != 3 {
                    return Err(Error::Config(format!("splits must be train/val/test, got `{value}`")));
                }
                for (slot, part) in self.splits.iter_mut().zip(parts) {
                    *slot = num(key, part.trim())?;
                }
            }
            "ae_epochs" => self.ae_epochs = num(key, value)?,
            "ae_lr" => self.ae_lr = num(key, value)?,
            "clf_epochs" => self.clf_epochs = num(key, value)?,
            "clf_lr" => self.clf_lr = num(key, value)?,
            "synth_healthy" => self.synth_healthy = num(key, value)?,
            "synth_acld" => self.synth_acld = num(key, value)?,
            "synth_frames" => self.synth_frames = num(key, value)?,
            "synth_rows" => self.synth_rows = num(key, value)?,
            "synth_cols" => self.synth_cols = num(key, value)?,
            "synth_noise" => self.synth_noise = num(key, value)?,
            "synth_sides" => {
                value.parse::<SideMode>()?;
                self.synth_sides = value.to_string();
            }
            "synth_delta_toes" => self.synth_delta_toes = num(key, value)?,
            "synth_delta_forefoot" => self.synth_delta_forefoot = num(key, value)?,
            "synth_delta_midfoot" => self.synth_delta_midfoot = num(key, value)?,
            "synth_delta_heel" => self.synth_delta_heel = num(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.gan().validate()?;
        let sum: f64 = self.splits.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.splits.iter().any(|f| *f < 0.0) {
            return Err(Error::Config(format!(
                "splits {:?} must be nonnegative and sum to 1",
                self.splits
            )));
        }
        if self.ae_epochs == 0 || self.clf_epochs == 0 {
            return Err(Error::Config("epoch counts must be positive".into()));
        }
        Ok(())
    }

    /// Every key with its resolved value, one per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("alpha", self.alpha.to_string());
        kv("gan_iterations", self.gan_iterations.to_string());
        kv("k_d", self.k_d.to_string());
        kv("batch", self.batch.to_string());
        kv("adam_lr", self.adam_lr.to_string());
        kv("adam_beta1", self.adam_beta1.to_string());
        kv("adam_beta2", self.adam_beta2.to_string());
        kv("adam_eps", self.adam_eps.to_string());
        kv("seed", self.seed.to_string());
        kv(
            "splits",
            format!("{}/{}/{}", self.splits[0], self.splits[1], self.splits[2]),
        );
        kv("ae_epochs", self.ae_epochs.to_string());
        kv("ae_lr", self.ae_lr.to_string());
        kv("clf_epochs", self.clf_epochs.to_string());
        kv("clf_lr", self.clf_lr.to_string());
        kv("synth_healthy", self.synth_healthy.to_string());
        kv("synth_acld", self.synth_acld.to_string());
        kv("synth_frames", self.synth_frames.to_string());
        kv("synth_rows", self.synth_rows.to_string());
        kv("synth_cols", self.synth_cols.to_string());
        kv("synth_noise", self.synth_noise.to_string());
        kv("synth_sides", self.synth_sides.clone());
        kv("synth_delta_toes", self.synth_delta_toes.to_string());
        kv("synth_delta_forefoot", self.synth_delta_forefoot.to_string());
        kv("synth_delta_midfoot", self.synth_delta_midfoot.to_string());
        kv("synth_delta_heel", self.synth_delta_heel.to_string());
        s
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.adam_lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn gan(&self) -> GanConfig {
        GanConfig {
            alpha: self.alpha,
            iterations: self.gan_iterations,
            k_d: self.k_d,
            batch: self.batch,
            seed: self.seed,
            adam: self.adam(),
        }
    }

    pub fn autoencoder(&self) -> AeConfig {
        AeConfig {
            epochs: self.ae_epochs,
            batch: self.batch,
            lr: self.ae_lr,
            seed: self.seed,
        }
    }

    pub fn classifier(&self) -> ClfConfig {
        ClfConfig {
            epochs: self.clf_epochs,
            batch: self.batch,
            lr: self.clf_lr,
            seed: self.seed,
        }
    }

    pub fn split(&self) -> SplitSpec {
        SplitSpec {
            train: self.splits[0],
            val: self.splits[1],
            test: self.splits[2],
            seed: self.seed,
        }
    }

    pub fn cohort(&self) -> Result<CohortSpec> {
        Ok(CohortSpec {
            n_healthy: self.synth_healthy,
            n_acld: self.synth_acld,
            acld_delta: RegionLoads {
                toes: self.synth_delta_toes,
                forefoot: self.synth_delta_forefoot,
                midfoot: self.synth_delta_midfoot,
                heel: self.synth_delta_heel,
            },
            frames: self.synth_frames,
            rows: self.synth_rows,
            cols: self.synth_cols,
            noise: self.synth_noise,
            sides: self.synth_sides.parse()?,
            seed: self.seed,
        })
    }
}
