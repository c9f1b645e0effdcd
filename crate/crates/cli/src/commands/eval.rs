use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use oasr_core::data::{eval_set, DatasetManifest, EvalPair, Role};
use oasr_core::imaging::{bicubic_resize, psnr, ssim, ImagePlane};
use oasr_core::Network;

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub psnr: f64,
    pub ssim: f64,
}

impl Metrics {
    /// Y-channel scores of `sr` against `hr`, ignoring an `r`-pixel border.
    pub fn measure(sr: &ImagePlane, hr: &ImagePlane, r: usize) -> Result<Self> {
        Ok(Self {
            psnr: psnr(sr, hr, r)?,
            ssim: ssim(sr, hr, r)?,
        })
    }

    pub fn mean(items: impl IntoIterator<Item = Metrics>) -> Option<Metrics> {
        let (mut p, mut s, mut n) = (0.0, 0.0, 0usize);
        for m in items {
            p += m.psnr;
            s += m.ssim;
            n += 1;
        }
        (n > 0).then(|| Metrics {
            psnr: p / n as f64,
            ssim: s / n as f64,
        })
    }
}

#[derive(Clone, Debug)]
pub struct EvalRow {
    pub image: String,
    /// Network scores; absent when evaluating the bicubic baseline alone.
    pub sr: Option<Metrics>,
    pub bicubic: Metrics,
}

#[derive(Clone, Debug)]
pub struct EvalSummary {
    pub dataset: String,
    pub rows: Vec<EvalRow>,
    pub failures: Vec<(PathBuf, String)>,
    pub csv: PathBuf,
}

impl EvalSummary {
    pub fn mean_sr(&self) -> Option<Metrics> {
        self.rows.iter().map(|r| r.sr).collect::<Option<Vec<_>>>().and_then(Metrics::mean)
    }

    pub fn mean_bicubic(&self) -> Option<Metrics> {
        Metrics::mean(self.rows.iter().map(|r| r.bicubic))
    }
}

/// Network output for a luma plane, rounded to 8-bit levels.
pub fn super_resolve(net: &Network<f32>, lr: &ImagePlane) -> Result<ImagePlane> {
    let out = net.infer(&lr.to_tensor::<f32>())?;
    Ok(ImagePlane::from_tensor(&out)?.quantize())
}

/// Score one pair at scale `r`.
pub fn evaluate_pair(net: Option<&Network<f32>>, pair: &EvalPair, r: usize) -> Result<EvalRow> {
    let (h, w) = pair.hr.dims();
    let bic = bicubic_resize(&pair.lr, h, w)?.quantize();
    let sr = match net {
        Some(net) => Some(Metrics::measure(&super_resolve(net, &pair.lr)?, &pair.hr, r)?),
        None => None,
    };
    Ok(EvalRow {
        image: pair
            .path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| pair.path.display().to_string()),
        sr,
        bicubic: Metrics::measure(&bic, &pair.hr, r)?,
    })
}

/// Score every pair, spreading images over the available cores. Row order follows `pairs`.
pub fn evaluate_pairs(net: Option<&Network<f32>>, pairs: &[EvalPair], r: usize) -> Result<Vec<EvalRow>> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(pairs.len().max(1));
    if workers <= 1 {
        return pairs.iter().map(|p| evaluate_pair(net, p, r)).collect();
    }
    let chunk = pairs.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = pairs
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|p| evaluate_pair(net, p, r)).collect::<Result<Vec<_>>>()))
            .collect();
        let mut rows = Vec::with_capacity(pairs.len());
        for h in handles {
            rows.extend(h.join().expect("evaluation worker panicked")?);
        }
        Ok(rows)
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// CSV text: one row per image plus a `mean` row.
pub fn to_csv(rows: &[EvalRow]) -> String {
    let mut s = String::from("image,psnr,ssim,bicubic_psnr,bicubic_ssim\n");
    let line = |s: &mut String, name: &str, sr: Option<Metrics>, bic: Option<Metrics>| {
        let _ = writeln!(
            s,
            "{name},{},{},{},{}",
            cell(sr.map(|m| m.psnr)),
            cell(sr.map(|m| m.ssim)),
            cell(bic.map(|m| m.psnr)),
            cell(bic.map(|m| m.ssim)),
        );
    };
    for r in rows {
        line(&mut s, &r.image, r.sr, Some(r.bicubic));
    }
    let mean_sr = rows.iter().map(|r| r.sr).collect::<Option<Vec<_>>>().and_then(Metrics::mean);
    line(&mut s, "mean", mean_sr, Metrics::mean(rows.iter().map(|r| r.bicubic)));
    s
}

/// Evaluate `checkpoint` (or bicubic alone) on every eval manifest.
///
/// Writes `eval_<dataset>.csv` into the output directory and prints a table.
/// The checkpoint is only read.
pub fn cmd_eval(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<Vec<EvalSummary>> {
    if cfg.eval_manifests.is_empty() {
        return Err(CliError::Config("eval_manifests is empty".into()));
    }
    let net = match checkpoint {
        Some(p) => {
            let ck = Checkpoint::load(p)?;
            if ck.network.config().scale != cfg.network.scale {
                return Err(CliError::Config(format!(
                    "checkpoint {} is x{}, evaluation requested x{}",
                    p.display(),
                    ck.network.config().scale,
                    cfg.network.scale
                )));
            }
            Some(ck.network)
        }
        None => None,
    };
    let r = cfg.network.scale;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::io(&cfg.output_dir, e))?;
    let mut out = Vec::new();
    for mpath in &cfg.eval_manifests {
        let manifest = DatasetManifest::load(mpath, Role::Test)?;
        let (pairs, failed) = eval_set(&manifest, r);
        let rows = evaluate_pairs(net.as_ref(), &pairs, r)?;
        let csv = cfg.output_dir.join(format!("eval_{}.csv", manifest.name));
        let text = to_csv(&rows);
        std::fs::write(&csv, &text).map_err(|e| CliError::io(&csv, e))?;
        println!("{} x{r}", manifest.name);
        for line in text.lines() {
            println!("  {}", line.replace(',', "\t"));
        }
        let failures: Vec<_> = failed.into_iter().map(|(p, e)| (p, e.to_string())).collect();
        for (p, e) in &failures {
            eprintln!("  failed {}: {e}", p.display());
        }
        out.push(EvalSummary {
            dataset: manifest.name,
            rows,
            failures,
            csv,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_planes_score_infinity_and_one() {
        let p = ImagePlane::new(20, 20, (0..400).map(|v| (v % 17) as f32 * 9.0).collect()).unwrap();
        let m = Metrics::measure(&p, &p, 2).unwrap();
        assert_eq!(m.psnr, f64::INFINITY);
        assert!((m.ssim - 1.0).abs() < 1e-12);
        let rows = vec![EvalRow {
            image: "a.png".into(),
            sr: Some(m),
            bicubic: m,
        }];
        let csv = to_csv(&rows);
        assert_eq!(csv.lines().nth(1).unwrap(), "a.png,inf,1,inf,1");
        assert!(csv.lines().nth(2).unwrap().starts_with("mean,inf,1,"));
    }

    #[test]
    fn bicubic_only_rows_leave_sr_cells_empty() {
        let m = Metrics { psnr: 30.0, ssim: 0.9 };
        let csv = to_csv(&[EvalRow {
            image: "x".into(),
            sr: None,
            bicubic: m,
        }]);
        assert_eq!(csv.lines().nth(1).unwrap(), "x,,,30,0.9");
        assert_eq!(csv.lines().nth(2).unwrap(), "mean,,,30,0.9");
    }
}
