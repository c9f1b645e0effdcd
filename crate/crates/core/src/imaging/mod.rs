//! Image planes, color conversion, bicubic resampling, metrics and augmentation.

mod augment;
mod color;
mod io;
mod metrics;
mod resize;

pub use augment::{augment, AugmentOp};
pub use color::{rgb_to_ycbcr, ycbcr_to_rgb, YCbCr};
pub use io::{load_rgb, save_rgb};
pub use metrics::{psnr, ssim};
pub use resize::{bicubic_resize, cubic, resize_weights, ResizeWeights};

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// Interleaved 8-bit RGB image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageRgb {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl ImageRgb {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != 3 * height * width {
            return Err(Error::Image(format!(
                "{} bytes do not form a {height}x{width} RGB image",
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Top-left `h x w` region.
    pub fn crop_to(&self, h: usize, w: usize) -> Result<Self> {
        if h == 0 || w == 0 || h > self.height || w > self.width {
            return Err(Error::Image(format!(
                "cannot crop {}x{} image to {h}x{w}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(3 * h * w);
        for y in 0..h {
            let row = 3 * y * self.width;
            data.extend_from_slice(&self.data[row..row + 3 * w]);
        }
        Self::new(h, w, data)
    }

    /// True when every pixel has R = G = B.
    pub fn is_gray(&self) -> bool {
        self.data.chunks_exact(3).all(|p| p[0] == p[1] && p[1] == p[2])
    }
}

/// Single-channel float image with samples in [0, 255].
#[derive(Clone, Debug, PartialEq)]
pub struct ImagePlane {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ImagePlane {
    /// Build a plane, clamping samples into [0, 255]. Non-finite samples are an error.
    pub fn new(height: usize, width: usize, mut data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width {
            return Err(Error::Image(format!(
                "{} samples do not form a {height}x{width} plane",
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("image plane".into()));
        }
        for v in &mut data {
            *v = v.clamp(0.0, 255.0);
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// The `h x w` window whose top-left corner is `(y, x)`.
    pub fn crop(&self, y: usize, x: usize, h: usize, w: usize) -> Result<Self> {
        if h == 0 || w == 0 || y + h > self.height || x + w > self.width {
            return Err(Error::Image(format!(
                "window {h}x{w} at ({y}, {x}) exceeds {}x{} plane",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(h * w);
        for row in y..y + h {
            data.extend_from_slice(&self.data[row * self.width + x..][..w]);
        }
        Ok(Self { height: h, width: w, data })
    }

    /// Crop bottom/right so both extents are multiples of `r`.
    pub fn modcrop(&self, r: usize) -> Result<Self> {
        if r == 0 || self.height < r || self.width < r {
            return Err(Error::Image(format!(
                "{}x{} plane is smaller than scale {r}",
                self.height, self.width
            )));
        }
        self.crop(0, 0, self.height - self.height % r, self.width - self.width % r)
    }

    /// Round every sample to the nearest intensity level.
    pub fn quantize(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| v.round()).collect(),
        }
    }

    /// As a `(1, 1, H, W)` tensor.
    pub fn to_tensor<T: Element>(&self) -> Tensor<T> {
        let data = self.data.iter().map(|&v| T::from_f64_lossy(v as f64)).collect();
        Tensor::from_vec(&[1, 1, self.height, self.width], data).expect("plane dims are nonzero")
    }

    /// From a `(1, 1, H, W)` tensor, clamping into [0, 255].
    pub fn from_tensor<T: Element>(t: &Tensor<T>) -> Result<Self> {
        let (n, c, h, w) = t.dims4("image plane")?;
        if n != 1 || c != 1 {
            return Err(Error::ShapeMismatch {
                op: "image plane from tensor",
                lhs: vec![1, 1, h, w],
                rhs: t.dims().to_vec(),
            });
        }
        let data = t.data().iter().map(|v| v.to_f32().unwrap_or(f32::NAN)).collect();
        Self::new(h, w, data)
    }
}

/// Crop `hr` to multiples of `r` and bicubic-downscale it by `1/r`.
pub fn make_lr_hr_pair(hr: &ImagePlane, r: usize) -> Result<(ImagePlane, ImagePlane)> {
    let hr = hr.modcrop(r)?;
    let lr = bicubic_resize(&hr, hr.height() / r, hr.width() / r)?;
    Ok((lr, hr))
}

/// Combine a super-resolved luma plane with bicubic-upscaled chroma of `lr_rgb`.
pub fn upscale_color(lr_rgb: &ImageRgb, sr_y: &ImagePlane, r: usize) -> Result<ImageRgb> {
    let (h, w) = (lr_rgb.height() * r, lr_rgb.width() * r);
    if sr_y.dims() != (h, w) {
        return Err(Error::Image(format!(
            "luma is {}x{}, expected {h}x{w} for a {}x{} input at x{r}",
            sr_y.height(),
            sr_y.width(),
            lr_rgb.height(),
            lr_rgb.width()
        )));
    }
    let ycc = rgb_to_ycbcr(lr_rgb);
    let cb = bicubic_resize(&ycc.cb, h, w)?;
    let cr = bicubic_resize(&ycc.cr, h, w)?;
    ycbcr_to_rgb(&YCbCr {
        y: sr_y.clone(),
        cb,
        cr,
    })
}
