use std::path::Path;

use crate::checkpoint::Checkpoint;
use crate::error::Result;

/// Header summary of a checkpoint file.
pub fn cmd_inspect(path: &Path) -> Result<String> {
    let ck = Checkpoint::load(path)?;
    Ok(format!("{}\n{}", path.display(), ck.describe()))
}
