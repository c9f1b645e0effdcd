use std::path::Path;

use oasr_core::data::luma;
use oasr_core::imaging::{load_rgb, save_rgb, upscale_color, ImageRgb};

use super::eval::super_resolve;
use crate::checkpoint::Checkpoint;
use crate::error::{CliError, Result};

/// Super-resolve `input` into `output`: luma through the network, chroma bicubic.
///
/// `scale`, when given, must match the checkpoint.
pub fn cmd_sr(checkpoint: &Path, input: &Path, output: &Path, scale: Option<usize>) -> Result<ImageRgb> {
    let ck = Checkpoint::load(checkpoint)?;
    let r = ck.network.config().scale;
    if let Some(want) = scale.filter(|&s| s != r) {
        return Err(CliError::Config(format!("checkpoint is x{r}, --scale asked for x{want}")));
    }
    let rgb = load_rgb(input)?;
    let sr_y = super_resolve(&ck.network, &luma(&rgb))?;
    let out = upscale_color(&rgb, &sr_y, r)?;
    save_rgb(output, &out)?;
    Ok(out)
}
