//! `key = value` run configuration.
//!
//! One pair per line; `#` starts a comment. Unknown keys are rejected.
//! Values given on the command line override the file.

use std::fmt::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rfa_core::zoo::ConvFactory;

use crate::error::{read_file, CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub k: usize,
    pub stride: usize,
    /// Channel counts swept by the benchmark.
    pub channels: Vec<usize>,
    pub factory: ConvFactory,
    pub epochs: usize,
    pub batch: usize,
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub milestones: Vec<usize>,
    pub gamma: f64,
    pub classes: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub image_size: usize,
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    /// Overrides every gradient-check tolerance.
    pub tol: Option<f64>,
    pub bench_n: usize,
    pub bench_hw: Vec<usize>,
    pub bench_warmup: usize,
    pub bench_iters: usize,
    /// `tiny`, `resnet18` or `resnet34`, for `count`.
    pub model: String,
    pub input_size: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            k: 3,
            stride: 1,
            channels: vec![16, 32],
            factory: ConvFactory::Rfa,
            epochs: 3,
            batch: 32,
            lr0: 0.05,
            momentum: 0.9,
            weight_decay: 0.0,
            milestones: vec![6, 9],
            gamma: 0.1,
            classes: 2,
            train_size: 2000,
            test_size: 500,
            image_size: 28,
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
            tol: None,
            bench_n: 8,
            bench_hw: vec![32, 64],
            bench_warmup: 20,
            bench_iters: 100,
            model: "resnet18".into(),
            input_size: 224,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("invalid value {v:?} for {key}"))
}

fn parse_list(key: &str, v: &str) -> std::result::Result<Vec<usize>, String> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|p| parse(key, p.trim())).collect()
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "seed",
        "k",
        "stride",
        "channels",
        "factory",
        "epochs",
        "batch",
        "lr0",
        "momentum",
        "weight_decay",
        "milestones",
        "gamma",
        "classes",
        "train_size",
        "test_size",
        "image_size",
        "train_images",
        "train_labels",
        "test_images",
        "test_labels",
        "tol",
        "bench_n",
        "bench_hw",
        "bench_warmup",
        "bench_iters",
        "model",
        "input_size",
    ];

    /// Sets one key. Errors name the key and the offending value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        match key {
            "seed" => self.seed = parse(key, v)?,
            "k" => self.k = parse(key, v)?,
            "stride" => self.stride = parse(key, v)?,
            "channels" => self.channels = parse_list(key, v)?,
            "factory" => self.factory = v.parse().map_err(|e: rfa_core::Error| e.to_string())?,
            "epochs" => self.epochs = parse(key, v)?,
            "batch" => self.batch = parse(key, v)?,
            "lr0" => self.lr0 = parse(key, v)?,
            "momentum" => self.momentum = parse(key, v)?,
            "weight_decay" => self.weight_decay = parse(key, v)?,
            "milestones" => self.milestones = parse_list(key, v)?,
            "gamma" => self.gamma = parse(key, v)?,
            "classes" => self.classes = parse(key, v)?,
            "train_size" => self.train_size = parse(key, v)?,
            "test_size" => self.test_size = parse(key, v)?,
            "image_size" => self.image_size = parse(key, v)?,
            "train_images" => self.train_images = Some(v.into()),
            "train_labels" => self.train_labels = Some(v.into()),
            "test_images" => self.test_images = Some(v.into()),
            "test_labels" => self.test_labels = Some(v.into()),
            "tol" => self.tol = Some(parse(key, v)?),
            "bench_n" => self.bench_n = parse(key, v)?,
            "bench_hw" => self.bench_hw = parse_list(key, v)?,
            "bench_warmup" => self.bench_warmup = parse(key, v)?,
            "bench_iters" => self.bench_iters = parse(key, v)?,
            "model" => match v {
                "tiny" | "resnet18" | "resnet34" => self.model = v.into(),
                _ => return Err(format!("unknown model {v:?}")),
            },
            "input_size" => self.input_size = parse(key, v)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| CliError::Config {
                line: i + 1,
                reason: format!("expected key = value, got {line:?}"),
            })?;
            self.set(key.trim(), value)
                .map_err(|reason| CliError::Config { line: i + 1, reason })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let bytes = read_file(path)?;
        let text = String::from_utf8(bytes).map_err(|_| CliError::Config {
            line: 0,
            reason: format!("{} is not UTF-8", path.display()),
        })?;
        Self::from_text(&text)
    }

    /// Every key with its resolved value, in a form [`RunConfig::from_text`] reads back.
    pub fn resolved(&self) -> String {
        let opt = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let mut s = String::new();
        for &key in Self::KEYS {
            let v = match key {
                "seed" => Some(self.seed.to_string()),
                "k" => Some(self.k.to_string()),
                "stride" => Some(self.stride.to_string()),
                "channels" => Some(join(&self.channels)),
                "factory" => Some(self.factory.to_string()),
                "epochs" => Some(self.epochs.to_string()),
                "batch" => Some(self.batch.to_string()),
                "lr0" => Some(self.lr0.to_string()),
                "momentum" => Some(self.momentum.to_string()),
                "weight_decay" => Some(self.weight_decay.to_string()),
                "milestones" => Some(join(&self.milestones)),
                "gamma" => Some(self.gamma.to_string()),
                "classes" => Some(self.classes.to_string()),
                "train_size" => Some(self.train_size.to_string()),
                "test_size" => Some(self.test_size.to_string()),
                "image_size" => Some(self.image_size.to_string()),
                "train_images" => opt(&self.train_images),
                "train_labels" => opt(&self.train_labels),
                "test_images" => opt(&self.test_images),
                "test_labels" => opt(&self.test_labels),
                "tol" => self.tol.map(|t| t.to_string()),
                "bench_n" => Some(self.bench_n.to_string()),
                "bench_hw" => Some(join(&self.bench_hw)),
                "bench_warmup" => Some(self.bench_warmup.to_string()),
                "bench_iters" => Some(self.bench_iters.to_string()),
                "model" => Some(self.model.clone()),
                "input_size" => Some(self.input_size.to_string()),
                _ => unreachable!(),
            };
            match v {
                Some(v) => writeln!(s, "{key} = {v}").unwrap(),
                None => writeln!(s, "# {key} unset").unwrap(),
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_comments() {
        let c = RunConfig::from_text("# run\nseed = 7\nfactory=rfcbam # inline\n\nchannels = 8, 16\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.factory, ConvFactory::Rfcbam);
        assert_eq!(c.channels, vec![8, 16]);
    }

    #[test]
    fn rejects_unknown_keys_and_values() {
        let e = RunConfig::from_text("seed = 1\nlearning_rate = 3\n").unwrap_err();
        assert!(matches!(e, CliError::Config { line: 2, .. }), "{e}");
        assert!(RunConfig::from_text("k = three").is_err());
        assert!(RunConfig::from_text("factory = dense").is_err());
        assert!(RunConfig::from_text("just words").is_err());
    }

    #[test]
    fn resolved_round_trips() {
        let mut c = RunConfig::default();
        c.set("tol", "1e-3").unwrap();
        c.set("train_images", "/tmp/x.idx").unwrap();
        let back = RunConfig::from_text(&c.resolved()).unwrap();
        assert_eq!(back, c);
    }
}
