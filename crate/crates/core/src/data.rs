//! Dataset manifests, the augmented patch pool and evaluation pairs.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::{augment, load_rgb, make_lr_hr_pair, rgb_to_ycbcr, AugmentOp, ImagePlane, ImageRgb};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Train,
    Test,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Train => "train",
            Role::Test => "test",
        })
    }
}

/// A named list of image files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    pub name: String,
    pub role: Role,
    pub paths: Vec<PathBuf>,
}

impl DatasetManifest {
    pub fn new(name: impl Into<String>, role: Role, paths: Vec<PathBuf>) -> Result<Self> {
        let name = name.into();
        if paths.is_empty() {
            return Err(Error::Dataset(format!("manifest {name} lists no images")));
        }
        Ok(Self { name, role, paths })
    }

    /// Parse a manifest file: one path per line, `#` starts a comment.
    /// Relative paths resolve against the manifest's directory.
    pub fn load(path: &Path, role: Role) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut paths = Vec::new();
        for line in text.lines() {
            let entry = line.split('#').next().unwrap_or("").trim();
            if entry.is_empty() {
                continue;
            }
            let p = base.join(entry);
            if !p.is_file() {
                return Err(Error::Dataset(format!(
                    "{}: listed image {} does not exist",
                    path.display(),
                    p.display()
                )));
            }
            paths.push(p);
        }
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Self::new(name, role, paths)
    }

    /// Fails when any image appears in both manifests.
    pub fn ensure_disjoint(&self, other: &Self) -> Result<()> {
        let canon = |p: &PathBuf| p.canonicalize().unwrap_or_else(|_| p.clone());
        let mine: HashSet<PathBuf> = self.paths.iter().map(canon).collect();
        if let Some(shared) = other.paths.iter().map(canon).find(|p| mine.contains(p)) {
            return Err(Error::Dataset(format!(
                "{} appears in both {} and {}",
                shared.display(),
                self.name,
                other.name
            )));
        }
        Ok(())
    }
}

/// Luma plane of an RGB image, rounded to 8-bit levels.
pub fn luma(img: &ImageRgb) -> ImagePlane {
    rgb_to_ycbcr(img).y.quantize()
}

/// Patch sampling parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolConfig {
    pub scale: usize,
    /// LR patch side; HR patches are `scale * patch`.
    pub patch: usize,
    pub augment: bool,
    /// Patches drawn from each source per epoch.
    pub patches_per_source: usize,
    pub seed: u64,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            scale: 2,
            patch: 48,
            augment: true,
            patches_per_source: 1,
            seed: 0,
        }
    }
}

/// One augmented training image with its once-downscaled LR version.
#[derive(Clone, Debug)]
pub struct Source {
    pub name: String,
    pub op: AugmentOp,
    pub hr: ImagePlane,
    pub lr: ImagePlane,
}

/// Where a patch came from: source index and LR top-left corner.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchOrigin {
    pub source: usize,
    pub lr_y: usize,
    pub lr_x: usize,
}

/// A batch of aligned patches.
#[derive(Clone, Debug)]
pub struct SampleBatch {
    /// `(B, 1, p, p)`
    pub lr: Tensor<f32>,
    /// `(B, 1, R*p, R*p)`
    pub hr: Tensor<f32>,
    pub origins: Vec<PatchOrigin>,
}

/// Endless, seeded stream of aligned LR/HR patches.
///
/// Each epoch visits every source `patches_per_source` times in an order
/// shuffled by a generator derived from `(seed, epoch)`; patch corners are
/// drawn from the same generator, so the stream is fully determined by the
/// seed and the source list.
#[derive(Clone, Debug)]
pub struct PatchPool {
    cfg: PoolConfig,
    sources: Vec<Source>,
    epoch: u64,
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl PatchPool {
    /// Decode every manifest image and build the pool. Unreadable files abort.
    pub fn from_manifest(manifest: &DatasetManifest, cfg: PoolConfig) -> Result<Self> {
        let mut planes = Vec::with_capacity(manifest.paths.len());
        for p in &manifest.paths {
            planes.push((p.display().to_string(), luma(&load_rgb(p)?)));
        }
        Self::from_planes(planes, cfg)
    }

    /// Build from named HR luma planes. Variants too small for one patch are skipped.
    pub fn from_planes(planes: Vec<(String, ImagePlane)>, cfg: PoolConfig) -> Result<Self> {
        if cfg.scale == 0 || cfg.patch == 0 || cfg.patches_per_source == 0 {
            return Err(Error::Config("scale, patch and patches_per_source must be >= 1".into()));
        }
        let ops: &[AugmentOp] = if cfg.augment { &AugmentOp::FULL } else { &[AugmentOp::Identity] };
        let mut sources = Vec::new();
        for (name, plane) in planes {
            for &op in ops {
                let variant = augment(&plane, op)?;
                let need = cfg.patch * cfg.scale;
                if variant.height() < need || variant.width() < need {
                    log::warn!(
                        "skipping {name} ({op}): {}x{} is smaller than a {need}x{need} patch",
                        variant.height(),
                        variant.width()
                    );
                    continue;
                }
                let (lr, hr) = make_lr_hr_pair(&variant, cfg.scale)?;
                sources.push(Source {
                    name: name.clone(),
                    op,
                    hr,
                    lr,
                });
            }
        }
        if sources.is_empty() {
            return Err(Error::Dataset("no image is large enough for a single patch".into()));
        }
        let mut pool = Self {
            cfg,
            sources,
            epoch: 0,
            order: Vec::new(),
            cursor: 0,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        };
        pool.start_epoch(0);
        Ok(pool)
    }

    fn start_epoch(&mut self, epoch: u64) {
        self.epoch = epoch;
        self.rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        self.rng.set_stream(epoch);
        self.order = (0..self.sources.len())
            .flat_map(|s| std::iter::repeat_n(s, self.cfg.patches_per_source))
            .collect();
        self.order.shuffle(&mut self.rng);
        self.cursor = 0;
    }

    pub fn config(&self) -> &PoolConfig {
        &self.cfg
    }

    pub fn sources(&self) -> &[Source] {
        &self.sources
    }

    /// Patches per pool epoch.
    pub fn epoch_len(&self) -> usize {
        self.order.len()
    }

    /// Current pool epoch.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Next patch corner, rolling over into a reshuffled epoch when exhausted.
    pub fn next_origin(&mut self) -> PatchOrigin {
        if self.cursor == self.order.len() {
            self.start_epoch(self.epoch + 1);
        }
        let source = self.order[self.cursor];
        self.cursor += 1;
        let lr = &self.sources[source].lr;
        let p = self.cfg.patch;
        PatchOrigin {
            source,
            lr_y: self.rng.random_range(0..=lr.height() - p),
            lr_x: self.rng.random_range(0..=lr.width() - p),
        }
    }

    /// Discard `n` patches, e.g. to resume a stream.
    pub fn skip(&mut self, n: u64) {
        for _ in 0..n {
            self.next_origin();
        }
    }

    /// The aligned `(lr, hr)` crops for `o`.
    pub fn crop(&self, o: PatchOrigin) -> Result<(ImagePlane, ImagePlane)> {
        let src = &self.sources[o.source];
        let (p, r) = (self.cfg.patch, self.cfg.scale);
        Ok((
            src.lr.crop(o.lr_y, o.lr_x, p, p)?,
            src.hr.crop(r * o.lr_y, r * o.lr_x, r * p, r * p)?,
        ))
    }

    /// `b` patch pairs stacked into tensors, raw [0, 255] values.
    pub fn next_batch(&mut self, b: usize) -> Result<SampleBatch> {
        if b == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        let (p, r) = (self.cfg.patch, self.cfg.scale);
        let mut lr = Vec::with_capacity(b * p * p);
        let mut hr = Vec::with_capacity(b * r * r * p * p);
        let mut origins = Vec::with_capacity(b);
        for _ in 0..b {
            let o = self.next_origin();
            let (l, h) = self.crop(o)?;
            lr.extend_from_slice(l.data());
            hr.extend_from_slice(h.data());
            origins.push(o);
        }
        Ok(SampleBatch {
            lr: Tensor::from_vec(&[b, 1, p, p], lr)?,
            hr: Tensor::from_vec(&[b, 1, r * p, r * p], hr)?,
            origins,
        })
    }
}

/// One full-image evaluation pair.
#[derive(Clone, Debug)]
pub struct EvalPair {
    pub path: PathBuf,
    /// Bicubic-downscaled luma, rounded to 8-bit levels.
    pub lr: ImagePlane,
    /// Ground-truth luma cropped to multiples of the scale.
    pub hr: ImagePlane,
    /// The original RGB image cropped like `hr`.
    pub rgb: ImageRgb,
}

/// Per-file evaluation pairs plus the files that failed to load.
pub fn eval_set(manifest: &DatasetManifest, r: usize) -> (Vec<EvalPair>, Vec<(PathBuf, Error)>) {
    let mut pairs = Vec::new();
    let mut failures = Vec::new();
    for path in &manifest.paths {
        let pair = load_rgb(path).and_then(|rgb| {
            let (lr, hr) = make_lr_hr_pair(&luma(&rgb), r)?;
            let rgb = rgb.crop_to(hr.height(), hr.width())?;
            Ok(EvalPair {
                path: path.clone(),
                lr: lr.quantize(),
                hr,
                rgb,
            })
        });
        match pair {
            Ok(p) => pairs.push(p),
            Err(e) => {
                log::warn!("{}: {e}", path.display());
                failures.push((path.clone(), e));
            }
        }
    }
    (pairs, failures)
}
