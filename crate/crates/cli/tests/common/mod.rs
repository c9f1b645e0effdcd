#![allow(dead_code)]

use std::path::{Path, PathBuf};

use oasr_cli::RunConfig;
use oasr_core::imaging::{save_rgb, ImageRgb};

/// Deterministic test scene: two gratings, a checkerboard and a dark disc.
pub fn scene(h: usize, w: usize, phase: f32) -> Vec<f32> {
    let mut d = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let (fy, fx) = (y as f32, x as f32);
            let mut v = 110.0 + 60.0 * (fx * 0.21 + fy * 0.05 + phase).sin() + 35.0 * (fy * 0.37 - fx * 0.11).cos();
            if (x / 12 + y / 16) % 2 == 0 {
                v += 30.0;
            }
            if ((fx - w as f32 / 2.0).powi(2) + (fy - h as f32 * 0.4).powi(2)).sqrt() < h as f32 * 0.2 {
                v -= 50.0;
            }
            d.push(v.clamp(0.0, 255.0));
        }
    }
    d
}

/// Gray RGB image of the scene.
pub fn gray_image(h: usize, w: usize, phase: f32) -> ImageRgb {
    let data = scene(h, w, phase)
        .into_iter()
        .flat_map(|v| [v.round() as u8; 3])
        .collect();
    ImageRgb::new(h, w, data).unwrap()
}

/// Colored variant: the scene in green, tinted red and blue ramps.
pub fn color_image(h: usize, w: usize) -> ImageRgb {
    let s = scene(h, w, 0.3);
    let mut data = Vec::with_capacity(h * w * 3);
    for y in 0..h {
        for x in 0..w {
            let g = s[y * w + x];
            data.push((g * 0.7 + 2.0 * x as f32).clamp(0.0, 255.0) as u8);
            data.push(g as u8);
            data.push((g * 0.5 + 3.0 * y as f32).clamp(0.0, 255.0) as u8);
        }
    }
    ImageRgb::new(h, w, data).unwrap()
}

pub fn write_png(dir: &Path, name: &str, img: &ImageRgb) -> PathBuf {
    let p = dir.join(name);
    save_rgb(&p, img).unwrap();
    p
}

pub fn write_manifest(dir: &Path, name: &str, images: &[&Path]) -> PathBuf {
    let p = dir.join(name);
    let text: String = images.iter().map(|i| format!("{}\n", i.display())).collect();
    std::fs::write(&p, format!("# test images\n{text}")).unwrap();
    p
}

/// Small network, short schedule, one training image.
pub fn tiny_run(dir: &Path, seed: u64) -> RunConfig {
    let img = write_png(dir, "train.png", &gray_image(48, 48, 0.0));
    let manifest = write_manifest(dir, "train.txt", &[&img]);
    let text = format!(
        "oam_count = 2\nwidth = 8\nca_reduction = 4\nbatch_size = 4\npatch_size = 12\naugment = false\n\
         total_epochs = 4\nhalve_after_epochs = 3\nsteps_per_epoch = 5\nlr = 1e-3\n\
         train_manifest = {}\noutput_dir = {}\nseed = {seed}\n",
        manifest.display(),
        dir.join("run").display()
    );
    RunConfig::from_text(&text, dir).unwrap()
}
