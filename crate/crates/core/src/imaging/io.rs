use std::path::Path;

use super::ImageRgb;
use crate::error::{Error, Result};

/// Decode an 8-bit RGB image (PNG, binary PPM or BMP, chosen by content).
pub fn load_rgb(path: &Path) -> Result<ImageRgb> {
    let img = image::ImageReader::open(path)
        .map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?
        .with_guessed_format()
        .map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?
        .decode()
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))?
        .to_rgb8();
    let (w, h) = img.dimensions();
    ImageRgb::new(h as usize, w as usize, img.into_raw())
}

/// Encode `img`; the format follows the file extension (`png`, `ppm`, `bmp`).
pub fn save_rgb(path: &Path, img: &ImageRgb) -> Result<()> {
    let buf = image::RgbImage::from_raw(img.width() as u32, img.height() as u32, img.data().to_vec())
        .ok_or_else(|| Error::Image("image buffer size mismatch".into()))?;
    buf.save(path).map_err(|e| match e {
        image::ImageError::IoError(source) => Error::Io {
            path: path.display().to_string(),
            source,
        },
        other => Error::Image(format!("{}: {other}", path.display())),
    })
}
