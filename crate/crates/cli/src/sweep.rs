//! Grid runs over optimizer, learning rate, batch size and depth.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use zsl_core::eval::write_metrics_csv;
use zsl_core::model::{train, ModelConfig};
use zsl_core::{Depth, OptimKind};

use crate::commands::{training_inputs, TrainingData};
use crate::manifest::write_atomic;
use crate::{CliError, CliResult, RunManifest, SweepArgs};

/// Learning rate as it appears in file names: `0.001` → `001`, `1.5` → `1p5`.
pub fn lr_label(lr: f64) -> String {
    let s = lr.to_string();
    match s.strip_prefix("0.") {
        Some(rest) => rest.to_string(),
        None => s.replace('.', "p"),
    }
}

pub fn cell_file_name(opt: OptimKind, lr: f64, batch_size: usize, depth: Depth) -> String {
    format!(
        "run_{}lr{}_bs{batch_size}_{}_tag_val_acc.csv",
        opt.name(),
        lr_label(lr),
        depth.name()
    )
}

pub struct Cell {
    pub config: ModelConfig,
    pub csv: PathBuf,
}

pub fn cells(a: &SweepArgs, data: &TrainingData) -> Vec<Cell> {
    let mut out = Vec::new();
    for &opt in &a.optimizers {
        for &lr in &a.lrs {
            for &bs in &a.batch_sizes {
                for &depth in &a.depths {
                    let optimizer = a.common.optimizer(opt, lr);
                    let config = data.config(&a.common, optimizer, bs, depth.into());
                    let csv = a
                        .out_dir
                        .join(cell_file_name(opt.into(), lr, bs, depth.into()));
                    out.push(Cell { config, csv });
                }
            }
        }
    }
    out
}

fn run_cell(cell: &Cell, data: &TrainingData, inputs: &[(&str, &Path)]) -> CliResult<bool> {
    let manifest = RunManifest::new("sweep", &cell.config, inputs)?;
    let manifest_path = RunManifest::path_for(&cell.csv);
    if cell.csv.exists()
        && RunManifest::read(&manifest_path).is_some_and(|m| m.digest == manifest.digest)
    {
        return Ok(false);
    }
    manifest.write(&manifest_path)?;
    let run = train(&cell.config, &data.train, &data.val, &data.descriptions)?;
    write_atomic(&cell.csv, |w| Ok(write_metrics_csv(&run.val_acc, w)?))?;
    Ok(true)
}

pub fn sweep(a: &SweepArgs) -> CliResult {
    if a.common.val.is_none() {
        return Err(CliError::Usage("sweep needs --val".into()));
    }
    if a.jobs == 0 {
        return Err(CliError::Usage("--jobs must be positive".into()));
    }
    let data = TrainingData::load(&a.common)?;
    let cells = cells(a, &data);
    for c in &cells {
        c.config.validate()?;
    }
    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    let inputs = training_inputs(&a.common);

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, CliResult<bool>)>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..a.jobs.min(cells.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(cell) = cells.get(i) else { break };
                let r = run_cell(cell, &data, &inputs);
                match &r {
                    Ok(true) => log::info!("finished {}", cell.csv.display()),
                    Ok(false) => log::info!("up to date: {}", cell.csv.display()),
                    Err(e) => log::error!("{}: {e}", cell.csv.display()),
                }
                results.lock().expect("no worker panicked").push((i, r));
            });
        }
    });

    let mut results = results.into_inner().expect("no worker panicked");
    results.sort_by_key(|(i, _)| *i);
    let (mut trained, mut skipped) = (0, 0);
    for (_, r) in results {
        match r? {
            true => trained += 1,
            false => skipped += 1,
        }
    }
    eprintln!("sweep: {trained} cells trained, {skipped} already complete");
    Ok(())
}
