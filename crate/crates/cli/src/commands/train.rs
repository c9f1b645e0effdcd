use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use oasr_core::data::{DatasetManifest, PatchPool, PoolConfig, Role};
use oasr_core::model::{init_weights, load_from_scale2};
use oasr_core::optim::{lr_at, train_step};
use oasr_core::Network;

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// Loss rows are flushed to disk this often.
pub const FLUSH_EVERY: u64 = 100;

#[derive(Clone, Debug)]
pub struct TrainReport {
    /// Steps run by this invocation.
    pub steps_run: u64,
    pub total_steps: u64,
    pub first_loss: Option<f64>,
    pub final_loss: Option<f64>,
    pub loss_csv: PathBuf,
    pub final_checkpoint: PathBuf,
}

/// Load the training and evaluation manifests, rejecting overlaps.
fn manifests(cfg: &RunConfig) -> Result<DatasetManifest> {
    let path = cfg
        .train_manifest
        .as_deref()
        .ok_or_else(|| CliError::Config("train_manifest is not set".into()))?;
    let train = DatasetManifest::load(path, Role::Train)?;
    for p in &cfg.eval_manifests {
        train.ensure_disjoint(&DatasetManifest::load(p, Role::Test)?)?;
    }
    Ok(train)
}

/// Starting network and step: fresh, warm-started from a x2 body, or resumed.
fn starting_point(cfg: &RunConfig, resume: Option<&Path>) -> Result<(Network<f32>, u64)> {
    if let Some(path) = resume {
        let ck = Checkpoint::load(path)?;
        if ck.network.config() != &cfg.network {
            return Err(CliError::Config(format!(
                "{} was trained with a different network config",
                path.display()
            )));
        }
        if !ck.with_moments {
            return Err(CliError::Config(format!("{} carries no optimizer state", path.display())));
        }
        return Ok((ck.network, ck.step));
    }
    if let Some(path) = &cfg.init_from {
        let src = Checkpoint::load(path)?;
        let sc = src.network.config();
        if sc.scale != 2 {
            return Err(CliError::Config(format!("init_from must be a x2 checkpoint, got x{}", sc.scale)));
        }
        if !sc.same_body(&cfg.network) {
            return Err(CliError::Config(format!(
                "init_from body (N={}, C={}, s={}, {}/{}/{}) does not match the config (N={}, C={}, s={}, {}/{}/{})",
                sc.oam_count,
                sc.width,
                sc.ca_reduction,
                sc.block_design,
                sc.fusion_mode,
                sc.ca_placement,
                cfg.network.oam_count,
                cfg.network.width,
                cfg.network.ca_reduction,
                cfg.network.block_design,
                cfg.network.fusion_mode,
                cfg.network.ca_placement,
            )));
        }
        return Ok((load_from_scale2(&src.network, &cfg.network)?, 0));
    }
    Ok((init_weights(&cfg.network, cfg.seed)?, 0))
}

fn open_csv(path: &Path, append: bool) -> Result<BufWriter<File>> {
    let fresh = !(append && path.exists());
    let file = if fresh {
        File::create(path)
    } else {
        OpenOptions::new().append(true).open(path)
    }
    .map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    if fresh {
        writeln!(w, "step,epoch,lr,loss").map_err(|e| CliError::io(path, e))?;
    }
    Ok(w)
}

/// Delete all but the newest `keep` epoch checkpoints.
fn prune(dir: &Path, keep: usize) -> Result<()> {
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("epoch_") && n.ends_with(".oasr"))
        })
        .collect();
    names.sort();
    let excess = names.len().saturating_sub(keep);
    for p in &names[..excess] {
        std::fs::remove_file(p).map_err(|e| CliError::io(p, e))?;
    }
    Ok(())
}

/// Train per `cfg`, optionally resuming from a checkpoint written by an earlier run.
///
/// Writes `loss.csv` (step, epoch, lr, loss), `checkpoints/epoch_NNNN.oasr`
/// after every epoch and the final checkpoint.
pub fn cmd_train(cfg: &RunConfig, resume: Option<&Path>) -> Result<TrainReport> {
    cfg.validate()?;
    let manifest = manifests(cfg)?;
    if let Some(p) = &cfg.init_from {
        if !p.exists() {
            return Err(CliError::Config(format!("init_from {} does not exist", p.display())));
        }
    }
    let (mut net, start) = starting_point(cfg, resume)?;
    let pool_cfg = PoolConfig {
        scale: cfg.network.scale,
        patch: cfg.train.patch_size,
        augment: cfg.train.augment,
        patches_per_source: cfg.train.patches_per_source,
        seed: cfg.seed,
    };
    let mut pool = PatchPool::from_manifest(&manifest, pool_cfg)?;
    let batch = cfg.train.batch_size;
    let per_epoch = cfg
        .train
        .steps_per_epoch
        .unwrap_or_else(|| pool.epoch_len().div_ceil(batch))
        .max(1) as u64;
    let total = per_epoch * cfg.optim.total_epochs as u64;
    if start > total {
        return Err(CliError::Config(format!(
            "checkpoint is at step {start}, past the {total} steps of this schedule"
        )));
    }
    pool.skip(start * batch as u64);
    let finetune = cfg.init_from.is_some();

    cfg.echo()?;
    let ck_dir = cfg.output_dir.join("checkpoints");
    std::fs::create_dir_all(&ck_dir).map_err(|e| CliError::io(&ck_dir, e))?;
    let csv_path = cfg.output_dir.join("loss.csv");
    let mut csv = open_csv(&csv_path, resume.is_some())?;
    log::info!(
        "training {} parameters for {total} steps ({per_epoch} per epoch), starting at step {start}",
        net.param_count()
    );

    let mut first = None;
    let mut last = None;
    for step in start + 1..=total {
        let epoch = ((step - 1) / per_epoch) as usize;
        let lr = lr_at(epoch, &cfg.optim, finetune)?;
        let b = pool.next_batch(batch)?;
        let loss = match train_step(&mut net, &b.lr, &b.hr, &cfg.loss, &cfg.optim, lr, step) {
            Ok(l) => l,
            Err(e) => {
                let _ = csv.flush();
                return Err(match CliError::from(e) {
                    CliError::Numerical(what) => CliError::Numerical(format!(
                        "{what} (epoch {epoch}, lr {lr}); last finite loss {last:?}"
                    )),
                    other => other,
                });
            }
        };
        first.get_or_insert(loss);
        last = Some(loss);
        writeln!(csv, "{step},{epoch},{lr},{loss}").map_err(|e| CliError::io(&csv_path, e))?;
        if step % FLUSH_EVERY == 0 {
            csv.flush().map_err(|e| CliError::io(&csv_path, e))?;
            log::info!("step {step}/{total} epoch {epoch} loss {loss:.4}");
        }
        if step % per_epoch == 0 {
            let path = ck_dir.join(format!("epoch_{:04}.oasr", step / per_epoch));
            Checkpoint::new(net.clone(), step, true).save(&path)?;
            prune(&ck_dir, cfg.train.keep_last)?;
        }
    }
    csv.flush().map_err(|e| CliError::io(&csv_path, e))?;
    let final_path = cfg.final_checkpoint();
    if let Some(parent) = final_path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    Checkpoint::new(net, total, true).save(&final_path)?;
    Ok(TrainReport {
        steps_run: total - start,
        total_steps: total,
        first_loss: first,
        final_loss: last,
        loss_csv: csv_path,
        final_checkpoint: final_path,
    })
}
