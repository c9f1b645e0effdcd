//! Versioned binary container for a network and its optimizer state.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "OASR"  u16 version
//! u32 scale, u32 oam_count, u32 width, u32 ca_reduction
//! u8 block_design, u8 fusion_mode, u8 ca_placement, u64 seed
//! u8 io range, u64 step, u32 entry count
//! per entry: u16 name length, name, u8 rank, rank x u32 dims, f32 data
//! ```
//!
//! Parameters come first in canonical order. Optimizer moments follow as
//! `adam_m.<name>` / `adam_v.<name>` entries when present.

use std::fmt;
use std::path::Path;

use oasr_core::model::param_specs;
use oasr_core::{BlockDesign, FusionMode, GatePlacement, Network, NetworkConfig, Tensor};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"OASR";
pub const VERSION: u16 = 1;

const MOMENT_M: &str = "adam_m.";
const MOMENT_V: &str = "adam_v.";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("bad magic {found:?}, not a checkpoint")]
    BadMagic { found: Vec<u8> },
    #[error("format version {found} is not supported (expected {VERSION})")]
    Version { found: u16 },
    #[error("tensor does not match the stored config: {0}")]
    Shape(String),
    #[error("file truncated at byte {at}: needed {needed} more bytes")]
    Truncated { at: usize, needed: usize },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CheckpointError {
    /// Stable short code for each failure kind.
    pub fn code(&self) -> &'static str {
        match self {
            CheckpointError::BadMagic { .. } => "bad-magic",
            CheckpointError::Version { .. } => "version",
            CheckpointError::Shape(_) => "shape",
            CheckpointError::Truncated { .. } => "truncated",
            CheckpointError::Corrupt(_) => "corrupt",
            CheckpointError::Io { .. } => "io",
        }
    }
}

type Result<T> = std::result::Result<T, CheckpointError>;

/// Value range the network consumes and produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IoRange {
    /// Raw luma levels in [0, 255].
    Raw255,
}

impl IoRange {
    fn tag(self) -> u8 {
        match self {
            IoRange::Raw255 => 0,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(IoRange::Raw255),
            t => Err(CheckpointError::Corrupt(format!("unknown io range tag {t}"))),
        }
    }
}

impl fmt::Display for IoRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IoRange::Raw255 => f.write_str("raw [0, 255]"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub network: Network<f32>,
    pub io_range: IoRange,
    /// Optimizer steps taken so far.
    pub step: u64,
    /// Whether Adam moments are stored alongside the weights.
    pub with_moments: bool,
}

impl Checkpoint {
    pub fn new(network: Network<f32>, step: u64, with_moments: bool) -> Self {
        Self {
            network,
            io_range: IoRange::Raw255,
            step,
            with_moments,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let cfg = self.network.config();
        let mut out = Vec::with_capacity(64 + 4 * self.network.param_count() * if self.with_moments { 3 } else { 1 });
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for v in [cfg.scale, cfg.oam_count, cfg.width, cfg.ca_reduction] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.push(index_of(BlockDesign::ALL, cfg.block_design));
        out.push(index_of(FusionMode::ALL, cfg.fusion_mode));
        out.push(index_of(GatePlacement::ALL, cfg.ca_placement));
        out.extend_from_slice(&cfg.seed.to_le_bytes());
        out.push(self.io_range.tag());
        out.extend_from_slice(&self.step.to_le_bytes());
        let params = &self.network.params;
        let count = params.len() * if self.with_moments { 3 } else { 1 };
        out.extend_from_slice(&(count as u32).to_le_bytes());
        for p in params.iter() {
            write_entry(&mut out, &p.name, &p.value);
        }
        if self.with_moments {
            for p in params.iter() {
                write_entry(&mut out, &format!("{MOMENT_M}{}", p.name), &p.adam_m);
            }
            for p in params.iter() {
                write_entry(&mut out, &format!("{MOMENT_V}{}", p.name), &p.adam_v);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4)?;
        if magic != MAGIC {
            return Err(CheckpointError::BadMagic { found: magic.to_vec() });
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(CheckpointError::Version { found: version });
        }
        let mut dims4 = [0usize; 4];
        for d in dims4.iter_mut() {
            *d = r.u32()? as usize;
        }
        let config = NetworkConfig {
            scale: dims4[0],
            oam_count: dims4[1],
            width: dims4[2],
            ca_reduction: dims4[3],
            block_design: pick(BlockDesign::ALL, r.u8()?, "block design")?,
            fusion_mode: pick(FusionMode::ALL, r.u8()?, "fusion mode")?,
            ca_placement: pick(GatePlacement::ALL, r.u8()?, "gate placement")?,
            seed: r.u64()?,
        };
        config
            .validate()
            .map_err(|e| CheckpointError::Corrupt(format!("stored config is invalid: {e}")))?;
        let io_range = IoRange::from_tag(r.u8()?)?;
        let step = r.u64()?;
        let count = r.u32()? as usize;
        let specs = param_specs(&config);
        let mut weights = Vec::with_capacity(specs.len());
        let mut moments = Vec::new();
        for _ in 0..count {
            let (name, t) = r.entry()?;
            if name.starts_with(MOMENT_M) || name.starts_with(MOMENT_V) {
                moments.push((name, t));
            } else {
                weights.push((name, t));
            }
        }
        if r.pos != bytes.len() {
            return Err(CheckpointError::Corrupt(format!(
                "{} trailing bytes after the last entry",
                bytes.len() - r.pos
            )));
        }
        let mut network =
            Network::from_tensors(config, weights).map_err(|e| CheckpointError::Shape(e.to_string()))?;
        let with_moments = !moments.is_empty();
        if with_moments && moments.len() != 2 * specs.len() {
            return Err(CheckpointError::Shape(format!(
                "{} moment entries for {} parameters",
                moments.len(),
                specs.len()
            )));
        }
        for (name, t) in moments {
            let (prefix, base) = name.split_at(MOMENT_M.len());
            let p = network
                .params
                .by_name_mut(base)
                .ok_or_else(|| CheckpointError::Shape(format!("moment {name} names no parameter")))?;
            if t.dims() != p.value.dims() {
                return Err(CheckpointError::Shape(format!(
                    "moment {name} has shape {:?}, parameter has {:?}",
                    t.dims(),
                    p.value.dims()
                )));
            }
            if prefix == MOMENT_M {
                p.adam_m = t;
            } else {
                p.adam_v = t;
            }
        }
        Ok(Self {
            network,
            io_range,
            step,
            with_moments,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    /// Human-readable header summary.
    pub fn describe(&self) -> String {
        let c = self.network.config();
        let mut s = String::new();
        s.push_str(&format!("format version  {VERSION}\n"));
        s.push_str(&format!("scale           x{}\n", c.scale));
        s.push_str(&format!("modules (N)     {}\n", c.oam_count));
        s.push_str(&format!("width (C)       {}\n", c.width));
        s.push_str(&format!("reduction (s)   {}\n", c.ca_reduction));
        s.push_str(&format!("block design    {}\n", c.block_design));
        s.push_str(&format!("fusion mode     {}\n", c.fusion_mode));
        s.push_str(&format!("gate placement  {}\n", c.ca_placement));
        s.push_str(&format!("init seed       {}\n", c.seed));
        s.push_str(&format!("io range        {}\n", self.io_range));
        s.push_str(&format!("step            {}\n", self.step));
        s.push_str(&format!("tensors         {}\n", self.network.params.len()));
        s.push_str(&format!("parameters      {}\n", self.network.param_count()));
        s.push_str(&format!("adam moments    {}\n", if self.with_moments { "yes" } else { "no" }));
        s
    }
}

fn index_of<E: PartialEq>(all: &[E], v: E) -> u8 {
    all.iter().position(|x| *x == v).expect("variant listed in ALL") as u8
}

fn pick<E: Copy>(all: &[E], i: u8, what: &str) -> Result<E> {
    all.get(i as usize)
        .copied()
        .ok_or_else(|| CheckpointError::Corrupt(format!("unknown {what} index {i}")))
}

fn write_entry(out: &mut Vec<u8>, name: &str, t: &Tensor<f32>) {
    out.extend_from_slice(&(name.len() as u16).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.push(t.dims().len() as u8);
    for &d in t.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let left = self.bytes.len() - self.pos;
        if n > left {
            return Err(CheckpointError::Truncated {
                at: self.bytes.len(),
                needed: n - left,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("exact length"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn entry(&mut self) -> Result<(String, Tensor<f32>)> {
        let len = self.u16()? as usize;
        let name = std::str::from_utf8(self.take(len)?)
            .map_err(|_| CheckpointError::Corrupt("entry name is not UTF-8".into()))?
            .to_owned();
        let rank = self.u8()? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(self.u32()? as usize);
        }
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| CheckpointError::Corrupt(format!("entry {name} has oversized dims {dims:?}")))?;
        let raw = self.take(n)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")))
            .collect();
        let t = Tensor::from_vec(&dims, data).map_err(|e| CheckpointError::Corrupt(format!("entry {name}: {e}")))?;
        Ok((name, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use oasr_core::model::init_weights;

    fn tiny() -> NetworkConfig {
        NetworkConfig {
            oam_count: 2,
            width: 8,
            ca_reduction: 4,
            seed: 9,
            ..NetworkConfig::light()
        }
    }

    fn with_state() -> Checkpoint {
        let mut net = init_weights::<f32>(&tiny(), 9).unwrap();
        for (i, p) in net.params.iter_mut().enumerate() {
            p.adam_m.fill(i as f32 * 0.25);
            p.adam_v.fill(1.0 / (i as f32 + 1.0));
        }
        Checkpoint::new(net, 42, true)
    }

    #[test]
    fn round_trip_is_byte_identical() {
        for ck in [with_state(), Checkpoint::new(init_weights(&tiny(), 1).unwrap(), 0, false)] {
            let bytes = ck.to_bytes();
            let back = Checkpoint::from_bytes(&bytes).unwrap();
            assert_eq!(back.to_bytes(), bytes);
            assert_eq!(back.step, ck.step);
            assert_eq!(back.with_moments, ck.with_moments);
            assert_eq!(back.network.config(), ck.network.config());
            for (a, b) in back.network.params.iter().zip(ck.network.params.iter()) {
                assert_eq!(a.name, b.name);
                let bits = |t: &Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
                assert_eq!(bits(&a.value), bits(&b.value));
                assert_eq!(bits(&a.adam_m), bits(&b.adam_m));
                assert_eq!(bits(&a.adam_v), bits(&b.adam_v));
            }
        }
    }

    #[test]
    fn every_truncation_is_reported_as_such() {
        let bytes = with_state().to_bytes();
        for cut in [0, 3, 5, 20, 40, bytes.len() / 2, bytes.len() - 1] {
            let err = Checkpoint::from_bytes(&bytes[..cut]).unwrap_err();
            assert_eq!(err.code(), "truncated", "cut at {cut}: {err}");
        }
    }

    #[test]
    fn distinct_errors_for_magic_version_shape_and_trailing_bytes() {
        let bytes = with_state().to_bytes();
        let mut bad = bytes.clone();
        bad[..4].copy_from_slice(b"PNG\0");
        assert_eq!(Checkpoint::from_bytes(&bad).unwrap_err().code(), "bad-magic");
        let mut bad = bytes.clone();
        bad[4] = 7;
        assert_eq!(Checkpoint::from_bytes(&bad).unwrap_err().code(), "version");
        // claim a wider network than the stored tensors
        let mut bad = bytes.clone();
        bad[14..18].copy_from_slice(&16u32.to_le_bytes());
        assert_eq!(Checkpoint::from_bytes(&bad).unwrap_err().code(), "shape");
        let mut bad = bytes.clone();
        bad.push(0);
        assert_eq!(Checkpoint::from_bytes(&bad).unwrap_err().code(), "corrupt");
    }

    #[test]
    fn save_and_load_through_a_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.oasr");
        let ck = with_state();
        ck.save(&path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), ck.to_bytes());
        assert_eq!(Checkpoint::load(&path).unwrap().to_bytes(), ck.to_bytes());
        assert_eq!(Checkpoint::load(&dir.path().join("missing")).unwrap_err().code(), "io");
    }

    #[test]
    fn describe_lists_the_header() {
        let text = with_state().describe();
        assert!(text.contains("step            42"));
        assert!(text.contains("adam moments    yes"));
    }
}
