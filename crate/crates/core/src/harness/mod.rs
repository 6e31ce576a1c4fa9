//! Benchmark harness: deterministic training runs, the lr x wd grid sweep,
//! and result-matrix assembly.

pub mod checkpoint;
mod grid;
mod train;

pub use grid::{run_grid, GridOutcome};
pub use train::{run_seed_chain, run_training, RunKey};

use serde::{Deserialize, Serialize};

use crate::data::DatasetSpec;
use crate::error::{Error, Result};
use crate::opt::{Category, OptFamily};
use crate::zoo::ModelSpec;

/// Default learning-rate grid; the momentum-SGD family (category a) and the
/// momentum-free adaptive family (category d) take ten times these values,
/// matching where those rules keep their useful range.
pub const BASE_LR_GRID: [f64; 5] = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2];
pub const BASE_WD_GRID: [f64; 5] = [0.0, 1e-4, 1e-3, 1e-2, 5e-2];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    pub models: Vec<ModelSpec>,
    /// Optimizer family names, case-insensitive.
    pub optimizers: Vec<String>,
    /// Explicit lr grid; omitted means the per-category default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wd_grid: Option<Vec<f64>>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub dataset: DatasetSpec,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    #[serde(default)]
    pub base_seed: u64,
}

fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}
fn default_epochs() -> usize {
    50
}
fn default_batch() -> usize {
    64
}
fn default_warmup() -> usize {
    5
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() || self.optimizers.is_empty() {
            return Err(Error::Config("need at least one model and optimizer".into()));
        }
        for name in &self.optimizers {
            OptFamily::parse(name)?;
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("need at least one seed".into()));
        }
        if self.epochs < 1 || self.batch_size < 1 {
            return Err(Error::Config("epochs and batch_size must be >= 1".into()));
        }
        for grid in [&self.lr_grid, &self.wd_grid].into_iter().flatten() {
            if grid.is_empty() {
                return Err(Error::Config("grids must be nonempty".into()));
            }
            if grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config("grids must be strictly ascending".into()));
            }
        }
        Ok(())
    }

    /// Effective lr grid for a family: explicit grid, or the category-scaled
    /// default.
    pub fn lr_grid_for(&self, family: OptFamily) -> Vec<f64> {
        if let Some(g) = &self.lr_grid {
            return g.clone();
        }
        let scale = match family.category() {
            Category::A | Category::D => 10.0,
            _ => 1.0,
        };
        BASE_LR_GRID.iter().map(|lr| lr * scale).collect()
    }

    pub fn wd_grid(&self) -> Vec<f64> {
        self.wd_grid.clone().unwrap_or_else(|| BASE_WD_GRID.to_vec())
    }
}

/// One training run's identity and metric curves.
///
/// Field order is the on-disk JSONL column order; keep it stable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: String,
    pub optimizer: String,
    pub lr: f64,
    pub wd: f64,
    pub seed: u64,
    pub epochs: usize,
    pub curve_loss: Vec<f64>,
    pub curve_acc: Vec<f64>,
    pub final_val_acc: f64,
    pub best_val_acc: f64,
    pub diverged: bool,
    pub wall_ms: u64,
}

impl RunRecord {
    pub fn key(&self) -> RunKey {
        RunKey {
            model: self.model.clone(),
            optimizer: self.optimizer.clone(),
            lr_bits: self.lr.to_bits(),
            wd_bits: self.wd.to_bits(),
            seed: self.seed,
        }
    }

    /// Accuracy contribution when aggregating: diverged runs count as zero.
    pub fn scored_acc(&self) -> f64 {
        if self.diverged {
            0.0
        } else {
            self.best_val_acc
        }
    }
}

/// Winning cell for one (model, optimizer) pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cell {
    pub mean_best_acc: f64,
    pub lr: f64,
    pub wd: f64,
    /// Every contributing run diverged.
    pub all_diverged: bool,
}

/// Backbone x optimizer best-accuracy grid with per-cell optima.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultMatrix {
    /// Row labels (optimizers), in first-appearance order.
    pub optimizers: Vec<String>,
    /// Column labels (models), in first-appearance order.
    pub models: Vec<String>,
    /// cells[row][col]; None marks a (model, optimizer) pair with no records.
    pub cells: Vec<Vec<Option<Cell>>>,
}

impl ResultMatrix {
    pub fn cell(&self, optimizer: &str, model: &str) -> Option<&Cell> {
        let r = self.optimizers.iter().position(|o| o == optimizer)?;
        let c = self.models.iter().position(|m| m == model)?;
        self.cells[r][c].as_ref()
    }

    /// Column of mean best accuracies for one model, ordered like
    /// `optimizers`. Missing cells are skipped.
    pub fn column(&self, model: &str) -> Vec<f64> {
        let Some(c) = self.models.iter().position(|m| m == model) else {
            return Vec::new();
        };
        self.cells
            .iter()
            .filter_map(|row| row[c].as_ref().map(|cell| cell.mean_best_acc))
            .collect()
    }
}

/// Collapse run records into the per-pair best-accuracy matrix.
///
/// For each (model, optimizer), the (lr, wd) configuration maximizing the
/// seed-mean best accuracy wins; ties break toward smaller lr, then smaller
/// wd. Diverged runs score zero. Duplicate (model, optimizer, lr, wd, seed)
/// records beyond the first are ignored.
pub fn best_per_pair(records: &[RunRecord]) -> ResultMatrix {
    use std::collections::{BTreeMap, HashSet};

    let mut optimizers: Vec<String> = Vec::new();
    let mut models: Vec<String> = Vec::new();
    let mut seen = HashSet::new();
    // (opt, model) -> (lr_bits, wd_bits) -> (lr, wd, accs, any_ok)
    type Agg = BTreeMap<(u64, u64), (f64, f64, Vec<f64>, bool)>;
    let mut groups: BTreeMap<(String, String), Agg> = BTreeMap::new();

    for rec in records {
        if !seen.insert(rec.key()) {
            continue;
        }
        if !optimizers.contains(&rec.optimizer) {
            optimizers.push(rec.optimizer.clone());
        }
        if !models.contains(&rec.model) {
            models.push(rec.model.clone());
        }
        let agg = groups
            .entry((rec.optimizer.clone(), rec.model.clone()))
            .or_default();
        let entry = agg
            .entry((rec.lr.to_bits(), rec.wd.to_bits()))
            .or_insert((rec.lr, rec.wd, Vec::new(), false));
        entry.2.push(rec.scored_acc());
        entry.3 |= !rec.diverged;
    }

    let mut cells = vec![vec![None; models.len()]; optimizers.len()];
    for ((opt, model), agg) in &groups {
        let r = optimizers.iter().position(|o| o == opt).expect("row");
        let c = models.iter().position(|m| m == model).expect("col");
        let mut best: Option<(f64, f64, f64, bool)> = None; // (mean, lr, wd, any_ok)
        for (_, (lr, wd, accs, any_ok)) in agg.iter() {
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            let better = match &best {
                None => true,
                Some((bm, blr, bwd, _)) => {
                    mean > *bm
                        || (mean == *bm && (*lr < *blr || (*lr == *blr && *wd < *bwd)))
                }
            };
            if better {
                best = Some((mean, *lr, *wd, *any_ok));
            }
        }
        let (mean, lr, wd, any_ok) = best.expect("nonempty group");
        // The pair is all-diverged only if no configuration ever finished.
        let pair_any_ok = agg.values().any(|(_, _, _, ok)| *ok);
        let _ = any_ok;
        cells[r][c] = Some(Cell {
            mean_best_acc: mean,
            lr,
            wd,
            all_diverged: !pair_any_ok,
        });
    }

    ResultMatrix {
        optimizers,
        models,
        cells,
    }
}

/// Write records as UTF-8 JSONL, one record per line.
pub fn write_jsonl<W: std::io::Write>(w: &mut W, records: &[RunRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut *w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Parse a JSONL results file, rejecting malformed lines.
pub fn read_jsonl(path: &std::path::Path) -> Result<Vec<RunRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: RunRecord = serde_json::from_str(line)
            .map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}
