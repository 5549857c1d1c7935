//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key has a
//! default; unknown keys and malformed values are rejected with the line
//! number. Command-line overrides go through [`RunConfig::set`].

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{load_scene_file, SplitManifest};
use crate::error::{Error, Result};
use crate::eval::Pairing;
use crate::model::{ModelConfig, SceneSample};
use crate::training::TrainConfig;

/// Everything a command needs besides its own flags.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Split manifest with `train:` / `test:` sections.
    pub manifest: Option<PathBuf>,
    /// Directory holding `<scene>.txt` files, used with `held_out`.
    pub data_dir: Option<PathBuf>,
    pub held_out: Option<String>,
    pub train_files: Vec<PathBuf>,
    pub test_files: Vec<PathBuf>,
    pub stride: usize,
    pub seed: u64,
    pub k: usize,
    pub pairing: Pairing,
    pub epochs: usize,
    /// Fixed step budget; 0 means `epochs` passes over the training scenes.
    pub steps: usize,
    /// Save a checkpoint every this many steps; 0 saves only the final one.
    pub checkpoint_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            manifest: None,
            data_dir: None,
            held_out: None,
            train_files: Vec::new(),
            test_files: Vec::new(),
            stride: 1,
            seed: 0,
            k: 20,
            pairing: Pairing::MinAde,
            epochs: 10,
            steps: 0,
            checkpoint_every: 0,
        }
    }
}

/// Every accepted key, in the order [`RunConfig::to_text`] writes them.
pub const CONFIG_KEYS: &[&str] = &[
    "embed_dim",
    "encoder_hidden",
    "gat_dim",
    "gat_layers",
    "leaky_slope",
    "cnn_channels",
    "cnn_kernel",
    "cnn_stride",
    "grid_channels",
    "attention_hidden",
    "latent_dim",
    "decoder_hidden",
    "discriminator_hidden",
    "latent_hidden",
    "lambda_z",
    "lambda_traj",
    "lambda_kl",
    "lambda_variety",
    "variety_k",
    "encoder_learns_z",
    "lr_generator",
    "lr_discriminator",
    "beta1",
    "beta2",
    "epsilon",
    "batch_scenes",
    "manifest",
    "data_dir",
    "held_out",
    "train_files",
    "test_files",
    "stride",
    "seed",
    "k",
    "pairing",
    "epochs",
    "steps",
    "checkpoint_every",
];

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true or false, got `{value}`"))),
    }
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn path_opt(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        std::fs::read_to_string(path)
            .map_err(Error::from)
            .and_then(|t| Self::parse(&t))
            .map_err(|e| e.at_path(path))
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let m = &mut self.model;
        let w = &mut self.train.weights;
        let o = &mut self.train.optimizer;
        match key {
            "embed_dim" => m.embed_dim = num(key, value)?,
            "encoder_hidden" => m.encoder_hidden = num(key, value)?,
            "gat_dim" => m.gat_dim = num(key, value)?,
            "gat_layers" => m.gat_layers = num(key, value)?,
            "leaky_slope" => m.leaky_slope = num(key, value)?,
            "cnn_channels" => m.cnn_channels = list(key, value)?,
            "cnn_kernel" => m.cnn_kernel = num(key, value)?,
            "cnn_stride" => m.cnn_stride = num(key, value)?,
            "grid_channels" => m.grid_channels = num(key, value)?,
            "attention_hidden" => m.attention_hidden = num(key, value)?,
            "latent_dim" => m.latent_dim = num(key, value)?,
            "decoder_hidden" => m.decoder_hidden = num(key, value)?,
            "discriminator_hidden" => m.discriminator_hidden = num(key, value)?,
            "latent_hidden" => m.latent_hidden = num(key, value)?,
            "lambda_z" => w.lambda_z = num(key, value)?,
            "lambda_traj" => w.lambda_traj = num(key, value)?,
            "lambda_kl" => w.lambda_kl = num(key, value)?,
            "lambda_variety" => w.lambda_variety = num(key, value)?,
            "variety_k" => o.variety_k = num(key, value)?,
            "encoder_learns_z" => self.train.encoder_learns_z = flag(key, value)?,
            "lr_generator" => o.lr_generator = num(key, value)?,
            "lr_discriminator" => o.lr_discriminator = num(key, value)?,
            "beta1" => o.beta1 = num(key, value)?,
            "beta2" => o.beta2 = num(key, value)?,
            "epsilon" => o.epsilon = num(key, value)?,
            "batch_scenes" => o.batch_scenes = num(key, value)?,
            "manifest" => self.manifest = path_opt(value),
            "data_dir" => self.data_dir = path_opt(value),
            "held_out" => self.held_out = (!value.is_empty()).then(|| value.to_string()),
            "train_files" => self.train_files = list(key, value)?,
            "test_files" => self.test_files = list(key, value)?,
            "stride" => self.stride = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "k" => self.k = num(key, value)?,
            "pairing" => {
                self.pairing = match value {
                    "min-ade" => Pairing::MinAde,
                    "independent" => Pairing::Independent,
                    _ => return Err(Error::Config(format!("`pairing`: expected min-ade or independent, got `{value}`"))),
                }
            }
            "epochs" => self.epochs = num(key, value)?,
            "steps" => self.steps = num(key, value)?,
            "checkpoint_every" => self.checkpoint_every = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn get(&self, key: &str) -> Result<String> {
        let m = &self.model;
        let w = &self.train.weights;
        let o = &self.train.optimizer;
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let paths = |ps: &[PathBuf]| ps.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",");
        Ok(match key {
            "embed_dim" => m.embed_dim.to_string(),
            "encoder_hidden" => m.encoder_hidden.to_string(),
            "gat_dim" => m.gat_dim.to_string(),
            "gat_layers" => m.gat_layers.to_string(),
            "leaky_slope" => m.leaky_slope.to_string(),
            "cnn_channels" => join(&m.cnn_channels),
            "cnn_kernel" => m.cnn_kernel.to_string(),
            "cnn_stride" => m.cnn_stride.to_string(),
            "grid_channels" => m.grid_channels.to_string(),
            "attention_hidden" => m.attention_hidden.to_string(),
            "latent_dim" => m.latent_dim.to_string(),
            "decoder_hidden" => m.decoder_hidden.to_string(),
            "discriminator_hidden" => m.discriminator_hidden.to_string(),
            "latent_hidden" => m.latent_hidden.to_string(),
            "lambda_z" => w.lambda_z.to_string(),
            "lambda_traj" => w.lambda_traj.to_string(),
            "lambda_kl" => w.lambda_kl.to_string(),
            "lambda_variety" => w.lambda_variety.to_string(),
            "variety_k" => o.variety_k.to_string(),
            "encoder_learns_z" => self.train.encoder_learns_z.to_string(),
            "lr_generator" => o.lr_generator.to_string(),
            "lr_discriminator" => o.lr_discriminator.to_string(),
            "beta1" => o.beta1.to_string(),
            "beta2" => o.beta2.to_string(),
            "epsilon" => o.epsilon.to_string(),
            "batch_scenes" => o.batch_scenes.to_string(),
            "manifest" => path(&self.manifest),
            "data_dir" => path(&self.data_dir),
            "held_out" => self.held_out.clone().unwrap_or_default(),
            "train_files" => paths(&self.train_files),
            "test_files" => paths(&self.test_files),
            "stride" => self.stride.to_string(),
            "seed" => self.seed.to_string(),
            "k" => self.k.to_string(),
            "pairing" => match self.pairing {
                Pairing::MinAde => "min-ade".into(),
                Pairing::Independent => "independent".into(),
            },
            "epochs" => self.epochs.to_string(),
            "steps" => self.steps.to_string(),
            "checkpoint_every" => self.checkpoint_every.to_string(),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        })
    }

    /// Every key with its current value; parses back to the same config.
    pub fn to_text(&self) -> String {
        CONFIG_KEYS
            .iter()
            .map(|k| format!("{k} = {}\n", self.get(k).expect("listed key")))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.stride == 0 {
            return Err(Error::Config("`stride` must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("`k` must be at least 1".into()));
        }
        Ok(())
    }

    /// Resolves the data keys into named train and test scene sets. Precedence:
    /// `manifest`, then `data_dir` with `held_out`, then explicit file lists.
    pub fn scene_sets(&self) -> Result<SceneSets> {
        let (train, test) = if let Some(manifest) = &self.manifest {
            let m = SplitManifest::load(manifest)?;
            let base = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
            let resolve = |ps: &[PathBuf]| ps.iter().map(|p| base.join(p)).collect::<Vec<_>>();
            (resolve(&m.train), resolve(&m.test))
        } else if let Some(dir) = &self.data_dir {
            let held = self
                .held_out
                .as_deref()
                .ok_or_else(|| Error::Config("`data_dir` needs `held_out`".into()))?;
            let m = SplitManifest::hold_one_out(dir, held)?;
            (m.train, m.test)
        } else {
            (self.train_files.clone(), self.test_files.clone())
        };
        let load = |paths: &[PathBuf]| -> Result<Vec<(String, Vec<SceneSample>)>> {
            paths
                .iter()
                .map(|p| {
                    let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                    Ok((name, load_scene_file(p, self.stride)?))
                })
                .collect()
        };
        Ok(SceneSets {
            train: load(&train)?,
            test: load(&test)?,
        })
    }

    /// Steps a training run takes for `n_scenes` training scenes.
    pub fn total_steps(&self, n_scenes: usize) -> usize {
        if self.steps > 0 {
            self.steps
        } else {
            self.epochs * n_scenes.div_ceil(self.train.optimizer.batch_scenes.max(1))
        }
    }
}

/// Scene sets by file stem.
#[derive(Clone, Debug, Default)]
pub struct SceneSets {
    pub train: Vec<(String, Vec<SceneSample>)>,
    pub test: Vec<(String, Vec<SceneSample>)>,
}

impl SceneSets {
    pub fn train_scenes(&self) -> Vec<SceneSample> {
        self.train.iter().flat_map(|(_, s)| s.iter().cloned()).collect()
    }
}
