//! Grid sweep: the full Cartesian product of models x optimizers x lr x wd
//! x seeds, executed by a worker pool with a single ordered JSONL writer.
//!
//! Records are written in grid-enumeration order regardless of completion
//! order, so repeat runs produce byte-identical files (modulo wall_ms).
//! Resume reads the existing file and recomputes only the missing cells.

use std::collections::{BTreeMap, HashSet};
use std::fs::OpenOptions;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use crate::data::{generate_dataset, Dataset};
use crate::error::{Error, Result};
use crate::opt::OptFamily;
use crate::zoo::ModelSpec;

use super::train::{run_training, RunKey};
use super::{read_jsonl, BenchConfig, RunRecord};

#[derive(Debug, Clone)]
struct Task {
    model: ModelSpec,
    family: OptFamily,
    lr: f64,
    wd: f64,
    lr_index: usize,
    wd_index: usize,
    seed: u64,
}

impl Task {
    fn key(&self) -> RunKey {
        RunKey {
            model: self.model.name(),
            optimizer: self.family.as_str().to_string(),
            lr_bits: self.lr.to_bits(),
            wd_bits: self.wd.to_bits(),
            seed: self.seed,
        }
    }
}

/// Outcome of a grid sweep: all records for the config (preexisting plus
/// newly computed), and how many were computed in this invocation.
pub struct GridOutcome {
    pub records: Vec<RunRecord>,
    pub newly_computed: usize,
    pub total_cells: usize,
}

fn enumerate_tasks(config: &BenchConfig) -> Result<Vec<Task>> {
    let mut tasks = Vec::new();
    for model in &config.models {
        for name in &config.optimizers {
            let family = OptFamily::parse(name)?;
            let lr_grid = config.lr_grid_for(family);
            let wd_grid = config.wd_grid();
            for (lr_index, &lr) in lr_grid.iter().enumerate() {
                for (wd_index, &wd) in wd_grid.iter().enumerate() {
                    for &seed in &config.seeds {
                        tasks.push(Task {
                            model: model.clone(),
                            family,
                            lr,
                            wd,
                            lr_index,
                            wd_index,
                            seed,
                        });
                    }
                }
            }
        }
    }
    Ok(tasks)
}

/// Run the sweep, streaming records to `out` as JSONL. With `resume`, cells
/// already present in the file are kept and skipped; the file is appended,
/// never rewritten.
pub fn run_grid(config: &BenchConfig, out: &Path, resume: bool, workers: usize) -> Result<GridOutcome> {
    config.validate()?;
    let dataset: Dataset = generate_dataset(&config.dataset)?;
    let all_tasks = enumerate_tasks(config)?;
    let total_cells = all_tasks.len();

    let mut existing: Vec<RunRecord> = Vec::new();
    let mut done: HashSet<RunKey> = HashSet::new();
    if resume && out.exists() {
        existing = read_jsonl(out)?;
        for r in &existing {
            done.insert(r.key());
        }
    } else if out.exists() && !resume {
        return Err(Error::Config(format!(
            "output {} exists; pass --resume to continue or --force to overwrite",
            out.display()
        )));
    }

    let pending: Vec<(usize, Task)> = all_tasks
        .into_iter()
        .enumerate()
        .filter(|(_, t)| !done.contains(&t.key()))
        .collect();

    let file = OpenOptions::new().create(true).append(true).open(out)?;
    let mut writer = BufWriter::new(file);

    let mut new_records: Vec<(usize, RunRecord)> = Vec::with_capacity(pending.len());
    let workers = workers.max(1).min(pending.len().max(1));

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, usize, Result<RunRecord>)>();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let pending = &pending;
            let next = &next;
            let dataset = &dataset;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= pending.len() {
                    break;
                }
                let (order, task) = &pending[i];
                let rec = run_training(
                    &task.model,
                    task.family,
                    task.lr,
                    task.wd,
                    task.lr_index,
                    task.wd_index,
                    task.seed,
                    dataset,
                    config,
                )
                .map(|t| t.record);
                if tx.send((i, *order, rec)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        // Reorder buffer: emit strictly in pending order so two sweeps of the
        // same config write byte-identical files.
        let mut buffer: BTreeMap<usize, (usize, Result<RunRecord>)> = BTreeMap::new();
        let mut next_emit = 0usize;
        let mut io_result: Result<()> = Ok(());
        for (i, order, rec) in rx.iter() {
            buffer.insert(i, (order, rec));
            while let Some((order, rec)) = buffer.remove(&next_emit) {
                next_emit += 1;
                match rec {
                    Ok(r) => {
                        if io_result.is_ok() {
                            io_result = write_record(&mut writer, &r);
                        }
                        new_records.push((order, r));
                    }
                    Err(e) => {
                        if io_result.is_ok() {
                            io_result = Err(e);
                        }
                    }
                }
            }
        }
        io_result
    })?;
    writer.flush()?;

    // Merge: preexisting records first (their file order), then new ones in
    // grid order; consumers key on the full identity, not file order.
    let mut records = existing;
    new_records.sort_by_key(|(order, _)| *order);
    let newly_computed = new_records.len();
    records.extend(new_records.into_iter().map(|(_, r)| r));
    Ok(GridOutcome {
        records,
        newly_computed,
        total_cells,
    })
}

fn write_record(w: &mut impl Write, rec: &RunRecord) -> Result<()> {
    serde_json::to_writer(&mut *w, rec)?;
    w.write_all(b"\n")?;
    Ok(())
}
