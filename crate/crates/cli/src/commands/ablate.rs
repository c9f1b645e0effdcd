use std::fmt::Write as _;
use std::path::PathBuf;

use oasr_core::data::{eval_set, DatasetManifest, Role};
use oasr_core::model::param_count;
use oasr_core::{BlockDesign, FusionMode, GatePlacement};

use super::eval::{evaluate_pairs, Metrics};
use super::train::cmd_train;
use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// One ablation run: the group it belongs to, its label and its config.
#[derive(Clone, Debug)]
pub struct Variant {
    pub group: &'static str,
    pub label: String,
    pub config: RunConfig,
}

#[derive(Clone, Debug)]
pub struct AblationRow {
    pub group: &'static str,
    pub variant: String,
    pub config_hash: String,
    pub param_count: usize,
    pub final_loss: f64,
    pub eval: Option<Metrics>,
}

/// The nine variants: three block designs, three fusion modes, three gate placements.
///
/// Each group changes one axis of `base` and trains with its own seed
/// (`base.seed + group index`), so the base point appears once per group
/// under a distinct config.
pub fn ablation_variants(base: &RunConfig) -> Vec<Variant> {
    let mut out = Vec::with_capacity(9);
    let mut push = |group: &'static str, g: u64, tag: String, apply: &dyn Fn(&mut RunConfig)| {
        let mut c = base.clone();
        apply(&mut c);
        c.seed = base.seed + g;
        c.network.seed = c.seed;
        let label = format!("{group}_{tag}");
        c.output_dir = base.output_dir.join("ablate").join(&label);
        c.checkpoint_path = None;
        out.push(Variant {
            group,
            label,
            config: c,
        });
    };
    for &d in BlockDesign::ALL {
        push("block", 0, d.to_string(), &|c| c.network.block_design = d);
    }
    for &f in FusionMode::ALL {
        push("fusion", 1, f.to_string(), &|c| c.network.fusion_mode = f);
    }
    for &p in GatePlacement::ALL {
        push("placement", 2, p.to_string(), &|c| c.network.ca_placement = p);
    }
    out
}

fn to_csv(rows: &[AblationRow]) -> String {
    let mut s = String::from("group,variant,config_hash,param_count,final_loss,psnr,ssim\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.group,
            r.variant,
            r.config_hash,
            r.param_count,
            r.final_loss,
            r.eval.map(|m| m.psnr.to_string()).unwrap_or_default(),
            r.eval.map(|m| m.ssim.to_string()).unwrap_or_default(),
        );
    }
    s
}

/// Train and score every variant at the budget of `base`; writes `ablation.csv`.
pub fn cmd_ablate(base: &RunConfig) -> Result<(Vec<AblationRow>, PathBuf)> {
    base.validate()?;
    let r = base.network.scale;
    let mut pairs = Vec::new();
    for m in &base.eval_manifests {
        let (p, failed) = eval_set(&DatasetManifest::load(m, Role::Test)?, r);
        for (path, e) in failed {
            log::warn!("skipping {}: {e}", path.display());
        }
        pairs.extend(p);
    }
    let mut rows = Vec::new();
    for v in ablation_variants(base) {
        log::info!("ablation variant {}", v.label);
        let report = cmd_train(&v.config, None)?;
        let final_loss = report
            .final_loss
            .ok_or_else(|| CliError::Config(format!("variant {} ran no steps", v.label)))?;
        let eval = if pairs.is_empty() {
            None
        } else {
            let net = Checkpoint::load(&report.final_checkpoint)?.network;
            Metrics::mean(
                evaluate_pairs(Some(&net), &pairs, r)?
                    .into_iter()
                    .filter_map(|row| row.sr),
            )
        };
        rows.push(AblationRow {
            group: v.group,
            variant: v.label,
            config_hash: v.config.hash(),
            param_count: param_count(&v.config.network),
            final_loss,
            eval,
        });
    }
    std::fs::create_dir_all(&base.output_dir).map_err(|e| CliError::io(&base.output_dir, e))?;
    let path = base.output_dir.join("ablation.csv");
    std::fs::write(&path, to_csv(&rows)).map_err(|e| CliError::io(&path, e))?;
    Ok((rows, path))
}
