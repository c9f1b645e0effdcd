//! Run configuration: `key = value` lines, `#` comments.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use oasr_core::optim::{LossConfig, OptimizerConfig};
use oasr_core::NetworkConfig;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Patch sampling and bookkeeping knobs of the training loop.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSettings {
    pub batch_size: usize,
    /// LR patch side.
    pub patch_size: usize,
    pub augment: bool,
    pub patches_per_source: usize,
    /// Optimizer steps per epoch; `None` means one pass over the pool.
    pub steps_per_epoch: Option<usize>,
    /// Per-epoch checkpoints kept on disk.
    pub keep_last: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            batch_size: 64,
            patch_size: 48,
            augment: true,
            patches_per_source: 1,
            steps_per_epoch: None,
            keep_last: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub network: NetworkConfig,
    pub loss: LossConfig,
    pub optim: OptimizerConfig,
    pub train: TrainSettings,
    pub train_manifest: Option<PathBuf>,
    pub eval_manifests: Vec<PathBuf>,
    pub output_dir: PathBuf,
    /// Where the final checkpoint goes; defaults to `output_dir/final.oasr`.
    pub checkpoint_path: Option<PathBuf>,
    /// A x2 checkpoint whose body seeds this run.
    pub init_from: Option<PathBuf>,
    pub seed: u64,
    pub deterministic: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            network: NetworkConfig::light(),
            loss: LossConfig::default(),
            optim: OptimizerConfig::default(),
            train: TrainSettings::default(),
            train_manifest: None,
            eval_manifests: Vec::new(),
            output_dir: PathBuf::from("runs/oasr"),
            checkpoint_path: None,
            init_from: None,
            seed: 0,
            deterministic: false,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| CliError::Config(format!("{key} = {value}: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(CliError::Config(format!("{key} = {value}: expected true or false"))),
    }
}

fn parse_path(value: &str, base: &Path) -> Option<PathBuf> {
    if value.is_empty() {
        return None;
    }
    let p = PathBuf::from(value);
    Some(if p.is_absolute() { p } else { base.join(p) })
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    /// Parse config text. Relative paths resolve against `base`.
    ///
    /// A `profile = light | enhanced` line is applied before every other key,
    /// wherever it appears.
    pub fn from_text(text: &str, base: &Path) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            pairs.push((k.trim().to_owned(), v.trim().to_owned()));
        }
        let mut cfg = Self::default();
        for (k, v) in pairs.iter().filter(|(k, _)| k == "profile") {
            cfg.set(k, v, base)?;
        }
        for (k, v) in pairs.iter().filter(|(k, _)| k != "profile") {
            cfg.set(k, v, base)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_text(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Set one key, as a config line or a command-line override would.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let v = value;
        let n = &mut self.network;
        match key {
            "profile" => {
                let keep = (n.scale, n.seed);
                *n = match v {
                    "light" => NetworkConfig::light(),
                    "enhanced" => {
                        log::warn!("the enhanced profile (64 modules) is not practical to train on a CPU");
                        NetworkConfig::enhanced()
                    }
                    _ => return Err(CliError::Config(format!("unknown profile `{v}`"))),
                };
                (n.scale, n.seed) = keep;
            }
            "scale" => n.scale = parse(key, v)?,
            "oam_count" => n.oam_count = parse(key, v)?,
            "width" => n.width = parse(key, v)?,
            "ca_reduction" => n.ca_reduction = parse(key, v)?,
            "block_design" => n.block_design = parse(key, v)?,
            "fusion_mode" => n.fusion_mode = parse(key, v)?,
            "ca_placement" => n.ca_placement = parse(key, v)?,
            "huber_delta" => self.loss.delta = parse(key, v)?,
            "huber_weight" => self.loss.weight = parse(key, v)?,
            "lr" => self.optim.lr = parse(key, v)?,
            "beta1" => self.optim.beta1 = parse(key, v)?,
            "beta2" => self.optim.beta2 = parse(key, v)?,
            "epsilon" => self.optim.epsilon = parse(key, v)?,
            "halve_after_epochs" => self.optim.halve_after_epochs = parse(key, v)?,
            "total_epochs" => self.optim.total_epochs = parse(key, v)?,
            "finetune_lr" => self.optim.finetune_lr = parse(key, v)?,
            "batch_size" => self.train.batch_size = parse(key, v)?,
            "patch_size" => self.train.patch_size = parse(key, v)?,
            "augment" => self.train.augment = parse_bool(key, v)?,
            "patches_per_source" => self.train.patches_per_source = parse(key, v)?,
            "steps_per_epoch" => {
                self.train.steps_per_epoch = match v {
                    "" | "auto" => None,
                    _ => Some(parse(key, v)?),
                }
            }
            "keep_last" => self.train.keep_last = parse(key, v)?,
            "train_manifest" => self.train_manifest = parse_path(v, base),
            "eval_manifests" => {
                self.eval_manifests = v
                    .split(',')
                    .filter_map(|p| parse_path(p.trim(), base))
                    .collect()
            }
            "output_dir" => {
                self.output_dir =
                    parse_path(v, base).ok_or_else(|| CliError::Config("output_dir must not be empty".into()))?
            }
            "checkpoint_path" => self.checkpoint_path = parse_path(v, base),
            "init_from" => self.init_from = parse_path(v, base),
            "seed" => {
                self.seed = parse(key, v)?;
                n.seed = self.seed;
            }
            "deterministic" => self.deterministic = parse_bool(key, v)?,
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Apply a `key=value` override.
    pub fn set_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
        self.set(k.trim(), v.trim(), Path::new("."))
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.loss.validate()?;
        self.optim.validate()?;
        let t = &self.train;
        if t.batch_size == 0 || t.patch_size == 0 || t.patches_per_source == 0 {
            return Err(CliError::Config(
                "batch_size, patch_size and patches_per_source must be >= 1".into(),
            ));
        }
        if t.steps_per_epoch == Some(0) {
            return Err(CliError::Config("steps_per_epoch must be >= 1".into()));
        }
        if t.keep_last == 0 {
            return Err(CliError::Config("keep_last must be >= 1".into()));
        }
        if self.network.seed != self.seed {
            return Err(CliError::Config("network seed and run seed disagree".into()));
        }
        Ok(())
    }

    /// Canonical text form; parsing it back yields the same config.
    pub fn to_text(&self) -> String {
        let n = &self.network;
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("scale", n.scale.to_string());
        line("oam_count", n.oam_count.to_string());
        line("width", n.width.to_string());
        line("ca_reduction", n.ca_reduction.to_string());
        line("block_design", n.block_design.to_string());
        line("fusion_mode", n.fusion_mode.to_string());
        line("ca_placement", n.ca_placement.to_string());
        line("huber_delta", self.loss.delta.to_string());
        line("huber_weight", self.loss.weight.to_string());
        line("lr", self.optim.lr.to_string());
        line("beta1", self.optim.beta1.to_string());
        line("beta2", self.optim.beta2.to_string());
        line("epsilon", self.optim.epsilon.to_string());
        line("halve_after_epochs", self.optim.halve_after_epochs.to_string());
        line("total_epochs", self.optim.total_epochs.to_string());
        line("finetune_lr", self.optim.finetune_lr.to_string());
        line("batch_size", self.train.batch_size.to_string());
        line("patch_size", self.train.patch_size.to_string());
        line("augment", self.train.augment.to_string());
        line("patches_per_source", self.train.patches_per_source.to_string());
        line(
            "steps_per_epoch",
            self.train.steps_per_epoch.map_or("auto".into(), |v| v.to_string()),
        );
        line("keep_last", self.train.keep_last.to_string());
        line("train_manifest", show_path(&self.train_manifest));
        line(
            "eval_manifests",
            self.eval_manifests
                .iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        line("output_dir", self.output_dir.display().to_string());
        line("checkpoint_path", show_path(&self.checkpoint_path));
        line("init_from", show_path(&self.init_from));
        line("seed", self.seed.to_string());
        line("deterministic", self.deterministic.to_string());
        s
    }

    /// SHA-256 of the canonical text, first 16 hex digits.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Write the effective config into `output_dir`.
    pub fn echo(&self) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.output_dir).map_err(|e| CliError::io(&self.output_dir, e))?;
        let path = self.output_dir.join("effective_config.txt");
        let text = format!("# config hash {}\n{}", self.hash(), self.to_text());
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn final_checkpoint(&self) -> PathBuf {
        self.checkpoint_path
            .clone()
            .unwrap_or_else(|| self.output_dir.join("final.oasr"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use oasr_core::{BlockDesign, FusionMode};

    #[test]
    fn defaults_follow_the_light_profile() {
        let c = RunConfig::default();
        assert_eq!((c.network.oam_count, c.network.width), (10, 64));
        assert_eq!((c.train.batch_size, c.train.patch_size, c.train.keep_last), (64, 48, 3));
        assert_eq!(c.optim.lr, 1e-4);
        c.validate().unwrap();
    }

    #[test]
    fn parses_comments_paths_and_enums() {
        let text = "# tiny\nwidth = 16  # narrow\noam_count=2\nblock_design = b\nfusion_mode = expb\n\
                    train_manifest = lists/train.txt\neval_manifests = a.txt, /abs/b.txt\nseed = 7\nsteps_per_epoch = 5\n";
        let c = RunConfig::from_text(text, Path::new("/cfg")).unwrap();
        assert_eq!(c.network.width, 16);
        assert_eq!(c.network.block_design, BlockDesign::TripleSquare);
        assert_eq!(c.network.fusion_mode, FusionMode::LocalOnly);
        assert_eq!(c.train_manifest, Some(PathBuf::from("/cfg/lists/train.txt")));
        assert_eq!(c.eval_manifests, vec![PathBuf::from("/cfg/a.txt"), PathBuf::from("/abs/b.txt")]);
        assert_eq!((c.seed, c.network.seed), (7, 7));
        assert_eq!(c.train.steps_per_epoch, Some(5));
    }

    #[test]
    fn profile_applies_first() {
        let c = RunConfig::from_text("oam_count = 3\nprofile = enhanced\nscale = 4", Path::new(".")).unwrap();
        assert_eq!((c.network.oam_count, c.network.scale), (3, 4));
        let c = RunConfig::from_text("profile = enhanced", Path::new(".")).unwrap();
        assert_eq!(c.network.oam_count, 64);
    }

    #[test]
    fn bad_lines_are_config_errors() {
        for text in ["nonsense", "color = blue", "width = wide", "augment = maybe", "block_design = z"] {
            let err = RunConfig::from_text(text, Path::new(".")).unwrap_err();
            assert_eq!(err.exit_code(), crate::error::EXIT_CONFIG, "{text}");
        }
    }

    #[test]
    fn text_round_trips_and_hash_tracks_content() {
        let mut c = RunConfig::from_text("width = 16\ninit_from = /x/y.oasr\neval_manifests = /m.txt\noutput_dir = /out", Path::new("/")).unwrap();
        let back = RunConfig::from_text(&c.to_text(), Path::new("/elsewhere")).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_eq!(c.hash().len(), 16);
        let h = c.hash();
        c.set_override("ca_placement=a").unwrap();
        assert_ne!(c.hash(), h);
    }

    #[test]
    fn echo_writes_the_effective_config() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = RunConfig::default();
        c.output_dir = dir.path().join("run");
        let path = c.echo().unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.starts_with(&format!("# config hash {}", c.hash())));
        assert_eq!(RunConfig::from_text(&text, Path::new("/")).unwrap(), c);
    }
}
