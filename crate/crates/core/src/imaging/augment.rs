use std::fmt;
use std::str::FromStr;

use super::{bicubic_resize, ImagePlane};
use crate::error::{Error, Result};

/// One training-set augmentation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AugmentOp {
    Identity,
    Rot90,
    Rot180,
    Rot270,
    HFlip,
    /// Bicubic downscale to `percent / 100` of the original size.
    Downscale(u8),
}

impl AugmentOp {
    /// Every variant produced from one source image under full augmentation.
    pub const FULL: [AugmentOp; 10] = [
        AugmentOp::Identity,
        AugmentOp::Rot90,
        AugmentOp::Rot180,
        AugmentOp::Rot270,
        AugmentOp::HFlip,
        AugmentOp::Downscale(90),
        AugmentOp::Downscale(80),
        AugmentOp::Downscale(70),
        AugmentOp::Downscale(60),
        AugmentOp::Downscale(50),
    ];
}

impl fmt::Display for AugmentOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AugmentOp::Identity => f.write_str("identity"),
            AugmentOp::Rot90 => f.write_str("rot90"),
            AugmentOp::Rot180 => f.write_str("rot180"),
            AugmentOp::Rot270 => f.write_str("rot270"),
            AugmentOp::HFlip => f.write_str("hflip"),
            AugmentOp::Downscale(p) => write!(f, "scale{:.1}", *p as f64 / 100.0),
        }
    }
}

impl FromStr for AugmentOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "identity" => return Ok(AugmentOp::Identity),
            "rot90" => return Ok(AugmentOp::Rot90),
            "rot180" => return Ok(AugmentOp::Rot180),
            "rot270" => return Ok(AugmentOp::Rot270),
            "hflip" => return Ok(AugmentOp::HFlip),
            _ => {}
        }
        s.strip_prefix("scale")
            .and_then(|v| v.parse::<f64>().ok())
            .map(|v| (v * 100.0).round())
            .filter(|p| (1.0..100.0).contains(p))
            .map(|p| AugmentOp::Downscale(p as u8))
            .ok_or_else(|| Error::Config(format!("unknown augmentation `{s}`")))
    }
}

fn permute(p: &ImagePlane, out_h: usize, out_w: usize, src: impl Fn(usize, usize) -> (usize, usize)) -> ImagePlane {
    let mut data = Vec::with_capacity(out_h * out_w);
    for y in 0..out_h {
        for x in 0..out_w {
            let (sy, sx) = src(y, x);
            data.push(p.get(sy, sx));
        }
    }
    ImagePlane::new(out_h, out_w, data).expect("permutation keeps samples valid")
}

/// Apply one augmentation. Rotations are counter-clockwise.
pub fn augment(p: &ImagePlane, op: AugmentOp) -> Result<ImagePlane> {
    let (h, w) = p.dims();
    Ok(match op {
        AugmentOp::Identity => p.clone(),
        // out[x, H-1-y] = in[y, x]  <=>  out[r, c] = in[H-1-c, r]
        AugmentOp::Rot90 => permute(p, w, h, |r, c| (h - 1 - c, r)),
        AugmentOp::Rot180 => permute(p, h, w, |r, c| (h - 1 - r, w - 1 - c)),
        AugmentOp::Rot270 => permute(p, w, h, |r, c| (c, w - 1 - r)),
        AugmentOp::HFlip => permute(p, h, w, |r, c| (r, w - 1 - c)),
        AugmentOp::Downscale(pct) => {
            if pct == 0 || pct >= 100 {
                return Err(Error::Config(format!("downscale percent {pct} outside 1..=99")));
            }
            let f = pct as f64 / 100.0;
            let oh = (h as f64 * f).ceil() as usize;
            let ow = (w as f64 * f).ceil() as usize;
            bicubic_resize(p, oh, ow)?
        }
    })
}
