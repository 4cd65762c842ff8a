//! Training configuration, presets and the `key = value` config format.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn name(self) -> &'static str {
        match self {
            Dtype::F32 => "f32",
            Dtype::F64 => "f64",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Dtype::F32 => 1,
            Dtype::F64 => 2,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(Dtype::F32),
            2 => Ok(Dtype::F64),
            _ => Err(Error::Config(format!("unknown dtype code {code}"))),
        }
    }
}

/// Everything a pretraining run depends on.
///
/// `dtype` selects the storage precision of parameters in checkpoints;
/// arithmetic is always 64-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub weight_decay: f64,
    pub epochs: u64,
    /// Optimizer steps to run; `None` runs `epochs` full passes.
    pub steps: Option<u64>,
    pub batch_size: usize,
    pub bins: usize,
    pub patch: usize,
    pub tau: f64,
    /// Factor applied to event volumes before they enter the student.
    /// Activation masks are computed from the unscaled volume.
    pub event_scale: f64,
    pub lambda_is: f64,
    pub lambda_cs: f64,
    pub seed: u64,
    pub dtype: Dtype,
    pub width: usize,
    pub height: usize,
    pub hidden: usize,
    pub dim: usize,
    pub teacher_seed: u64,
    pub teacher_radius: usize,
}

pub const PRESETS: [&str; 2] = ["desk", "paper"];

impl TrainConfig {
    /// Small fresh-MLP setting: 128x128 frames, 200 steps at lr 1e-3.
    pub fn desk() -> Self {
        TrainConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            weight_decay: 1e-4,
            epochs: 25,
            steps: Some(200),
            batch_size: 8,
            bins: 3,
            patch: 16,
            tau: 64.0,
            event_scale: 0.1,
            lambda_is: 10.0,
            lambda_cs: 4.0,
            seed: 0,
            dtype: Dtype::F64,
            width: 128,
            height: 128,
            hidden: 32,
            dim: 16,
            teacher_seed: 0,
            teacher_radius: 1,
        }
    }

    /// Published large-scale pretraining constants.
    pub fn paper() -> Self {
        TrainConfig {
            lr: 5e-6,
            weight_decay: 1e-4,
            epochs: 10,
            steps: None,
            width: 640,
            height: 480,
            ..Self::desk()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            other => Err(Error::Config(format!(
                "unknown preset `{other}` (expected one of {})",
                PRESETS.join(", ")
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.eps_adam > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("eps_adam must be positive and weight_decay non-negative");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be at least 1");
        }
        if self.bins == 0 || self.patch == 0 || self.dim == 0 {
            return bad("bins, patch and dim must be at least 1");
        }
        if !(self.tau >= 0.0) {
            return bad("tau must be non-negative");
        }
        if !(self.event_scale > 0.0) || !self.event_scale.is_finite() {
            return bad("event_scale must be a positive number");
        }
        if !(self.lambda_is >= 0.0) || !(self.lambda_cs >= 0.0) {
            return bad("loss weights must be non-negative");
        }
        if !self.width.is_multiple_of(self.patch) || !self.height.is_multiple_of(self.patch) {
            return bad("width and height must be divisible by patch");
        }
        Ok(())
    }

    /// Config-file text; parsing it back yields an identical config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let steps = self.steps.map_or("auto".to_string(), |n| n.to_string());
        let rows: [(&str, String); 22] = [
            ("lr", format!("{:e}", self.lr)),
            ("beta1", self.beta1.to_string()),
            ("beta2", self.beta2.to_string()),
            ("eps_adam", format!("{:e}", self.eps_adam)),
            ("weight_decay", format!("{:e}", self.weight_decay)),
            ("epochs", self.epochs.to_string()),
            ("steps", steps),
            ("batch_size", self.batch_size.to_string()),
            ("bins", self.bins.to_string()),
            ("patch", self.patch.to_string()),
            ("tau", self.tau.to_string()),
            ("event_scale", self.event_scale.to_string()),
            ("lambda_is", self.lambda_is.to_string()),
            ("lambda_cs", self.lambda_cs.to_string()),
            ("seed", self.seed.to_string()),
            ("dtype", self.dtype.name().to_string()),
            ("width", self.width.to_string()),
            ("height", self.height.to_string()),
            ("hidden", self.hidden.to_string()),
            ("dim", self.dim.to_string()),
            ("teacher_seed", self.teacher_seed.to_string()),
            ("teacher_radius", self.teacher_radius.to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(mut self, text: &str) -> Result<Self> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(self)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::desk().apply_text(text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
        }
        match key {
            "lr" => self.lr = num(key, value)?,
            "beta1" => self.beta1 = num(key, value)?,
            "beta2" => self.beta2 = num(key, value)?,
            "eps_adam" => self.eps_adam = num(key, value)?,
            "weight_decay" => self.weight_decay = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "steps" => {
                self.steps = if value == "auto" {
                    None
                } else {
                    Some(num(key, value)?)
                }
            }
            "batch_size" => self.batch_size = num(key, value)?,
            "bins" => self.bins = num(key, value)?,
            "patch" => self.patch = num(key, value)?,
            "tau" => self.tau = num(key, value)?,
            "event_scale" => self.event_scale = num(key, value)?,
            "lambda_is" => self.lambda_is = num(key, value)?,
            "lambda_cs" => self.lambda_cs = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "dtype" => {
                self.dtype = match value {
                    "f32" => Dtype::F32,
                    "f64" => Dtype::F64,
                    _ => return Err(Error::Config(format!("dtype must be f32 or f64, got `{value}`"))),
                }
            }
            "width" => self.width = num(key, value)?,
            "height" => self.height = num(key, value)?,
            "hidden" => self.hidden = num(key, value)?,
            "dim" => self.dim = num(key, value)?,
            "teacher_seed" => self.teacher_seed = num(key, value)?,
            "teacher_radius" => self.teacher_radius = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }
}
