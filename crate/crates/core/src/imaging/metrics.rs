use super::ImagePlane;
use crate::error::{Error, Result};

const PEAK: f64 = 255.0;
const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const C1: f64 = (0.01 * PEAK) * (0.01 * PEAK);
const C2: f64 = (0.03 * PEAK) * (0.03 * PEAK);

fn shaved(a: &ImagePlane, b: &ImagePlane, shave: usize) -> Result<(ImagePlane, ImagePlane)> {
    if a.dims() != b.dims() {
        return Err(Error::Image(format!(
            "metric inputs differ in size: {}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    let (h, w) = a.dims();
    if h <= 2 * shave || w <= 2 * shave {
        return Err(Error::Image(format!("{h}x{w} image cannot be shaved by {shave}")));
    }
    let (ch, cw) = (h - 2 * shave, w - 2 * shave);
    Ok((a.crop(shave, shave, ch, cw)?, b.crop(shave, shave, ch, cw)?))
}

/// Peak signal-to-noise ratio in dB after removing `shave` border pixels; `+inf` for identical planes.
pub fn psnr(a: &ImagePlane, b: &ImagePlane, shave: usize) -> Result<f64> {
    let (a, b) = shaved(a, b, shave)?;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum::<f64>()
        / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (PEAK * PEAK / mse).log10())
}

/// Normalized 1-D Gaussian taps; their outer product is the 2-D window.
pub(crate) fn gaussian_taps() -> [f64; WINDOW] {
    let mut g = [0.0; WINDOW];
    let c = (WINDOW / 2) as f64;
    for (i, v) in g.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-(d * d) / (2.0 * SIGMA * SIGMA)).exp();
    }
    let s: f64 = g.iter().sum();
    g.map(|v| v / s)
}

/// Valid-region separable Gaussian filter.
fn filter_valid(src: &[f64], h: usize, w: usize, g: &[f64; WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h - WINDOW + 1, w - WINDOW + 1);
    let mut mid = vec![0.0; oh * w];
    for y in 0..oh {
        for (k, gk) in g.iter().enumerate() {
            let line = &src[(y + k) * w..][..w];
            for (d, s) in mid[y * w..(y + 1) * w].iter_mut().zip(line) {
                *d += gk * s;
            }
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        let line = &mid[y * w..(y + 1) * w];
        for x in 0..ow {
            out[y * ow + x] = g.iter().zip(&line[x..x + WINDOW]).map(|(a, b)| a * b).sum();
        }
    }
    out
}

/// Mean structural similarity with an 11x11 Gaussian window (sigma 1.5) over the valid region.
pub fn ssim(a: &ImagePlane, b: &ImagePlane, shave: usize) -> Result<f64> {
    let (a, b) = shaved(a, b, shave)?;
    let (h, w) = a.dims();
    if h < WINDOW || w < WINDOW {
        return Err(Error::Image(format!("{h}x{w} region is smaller than the SSIM window")));
    }
    let x: Vec<f64> = a.data().iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = b.data().iter().map(|&v| v as f64).collect();
    let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(u, v)| u * v).collect::<Vec<_>>();
    let g = gaussian_taps();
    let mu_x = filter_valid(&x, h, w, &g);
    let mu_y = filter_valid(&y, h, w, &g);
    let xx = filter_valid(&prod(&x, &x), h, w, &g);
    let yy = filter_valid(&prod(&y, &y), h, w, &g);
    let xy = filter_valid(&prod(&x, &y), h, w, &g);
    let mut total = 0.0;
    for i in 0..mu_x.len() {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let sx = xx[i] - mx * mx;
        let sy = yy[i] - my * my;
        let sxy = xy[i] - mx * my;
        total += ((2.0 * mx * my + C1) * (2.0 * sxy + C2)) / ((mx * mx + my * my + C1) * (sx + sy + C2));
    }
    Ok(total / mu_x.len() as f64)
}
