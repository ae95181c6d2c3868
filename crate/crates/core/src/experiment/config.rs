//! Flat `key = value` configuration files; `#` starts a comment.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::learn::TrainConfig;
use crate::rf::MachineId;

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub data_dir: PathBuf,
    pub seed: u64,
    pub snr: f64,
    pub n_repetitions: usize,
    pub train_frames_per_class: usize,
    pub test_frames_per_class: usize,
    pub stable_frames: usize,
    pub freehand_frames: usize,
    pub frame_axial: usize,
    pub frame_lateral: usize,
    /// Scanner profile used for the "test machine" data; `Train` gives the no-mismatch control.
    pub test_machine: MachineId,
    pub train: TrainConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            seed: 0,
            snr: 100.0,
            n_repetitions: 10,
            train_frames_per_class: 100,
            test_frames_per_class: 50,
            stable_frames: 10,
            freehand_frames: 200,
            frame_axial: 2080,
            frame_lateral: 256,
            test_machine: MachineId::Test,
            train: TrainConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::BadConfig(format!("cannot parse {key} = {value:?}")))
}

impl Config {
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::BadConfig(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.insert(key.to_string(), lineno).is_some() {
                return Err(Error::BadConfig(format!("line {}: duplicate key {key}", lineno + 1)));
            }
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingFile(path.to_path_buf())
            } else {
                Error::io(format!("reading {}", path.display()), e)
            }
        })?;
        let mut cfg = Self::parse_str(&text)?;
        // relative data directories are resolved against the config file
        if cfg.data_dir.is_relative() {
            if let Some(parent) = path.parent() {
                cfg.data_dir = parent.join(&cfg.data_dir);
            }
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "data_dir" => self.data_dir = PathBuf::from(v),
            "seed" => self.seed = parse(key, v)?,
            "snr" => self.snr = parse(key, v)?,
            "n_repetitions" => self.n_repetitions = parse(key, v)?,
            "train_frames_per_class" => self.train_frames_per_class = parse(key, v)?,
            "test_frames_per_class" => self.test_frames_per_class = parse(key, v)?,
            "stable_frames" => self.stable_frames = parse(key, v)?,
            "freehand_frames" => self.freehand_frames = parse(key, v)?,
            "frame_axial" => self.frame_axial = parse(key, v)?,
            "frame_lateral" => self.frame_lateral = parse(key, v)?,
            "test_machine" => {
                self.test_machine = match v {
                    "train" => MachineId::Train,
                    "test" => MachineId::Test,
                    _ => return Err(Error::BadConfig(format!("test_machine must be train or test, got {v:?}"))),
                }
            }
            "epochs" => self.train.epochs = parse(key, v)?,
            "learning_rate" => self.train.learning_rate = parse(key, v)?,
            "batch_size" => self.train.batch_size = parse(key, v)?,
            "hidden" => self.train.hidden = parse(key, v)?,
            "validation_fraction" => self.train.validation_fraction = parse(key, v)?,
            "flip_prob" => self.train.flip_prob = parse(key, v)?,
            _ => return Err(Error::BadConfig(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_repetitions == 0 {
            return Err(Error::BadConfig("n_repetitions must be at least 1".into()));
        }
        if self.snr.is_nan() || self.snr <= 0.0 {
            return Err(Error::BadConfig(format!("snr must be positive, got {}", self.snr)));
        }
        let counts = [
            ("train_frames_per_class", self.train_frames_per_class),
            ("test_frames_per_class", self.test_frames_per_class),
            ("stable_frames", self.stable_frames),
            ("freehand_frames", self.freehand_frames),
            ("frame_axial", self.frame_axial),
            ("frame_lateral", self.frame_lateral),
        ];
        if let Some((k, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::BadConfig(format!("{k} must be positive")));
        }
        self.train.validate()
    }
}
