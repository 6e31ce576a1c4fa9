//! Coupling-bias analyses over result matrices: quantile-threshold failure
//! detection, worst-removed stability statistics, hyper-parameter variation,
//! and the weighted optimizer ranking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{mean, pop_std, quantile};

/// Failure flags for one result column under the quantile threshold rule:
/// flag r when r < max(R) - min(Q75 - Q25, gamma).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BocbColumn {
    pub threshold: f64,
    pub iqr: f64,
    pub gamma: f64,
    /// Indices into the input column, ascending.
    pub flagged: Vec<usize>,
}

pub fn detect_bocb(results: &[f64], gamma: f64) -> Result<BocbColumn> {
    if results.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "need at least 4 results for failure detection, got {}",
            results.len()
        )));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidInput("gamma must be > 0".into()));
    }
    let q25 = quantile(results, 0.25)?;
    let q75 = quantile(results, 0.75)?;
    let iqr = q75 - q25;
    let max = results.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let threshold = max - iqr.min(gamma);
    let flagged = results
        .iter()
        .enumerate()
        .filter(|(_, &r)| r < threshold)
        .map(|(i, _)| i)
        .collect();
    Ok(BocbColumn {
        threshold,
        iqr,
        gamma,
        flagged,
    })
}

/// Mean, population std, and range after dropping the single worst result.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StabilityStats {
    pub mean: f64,
    pub std: f64,
    pub range: f64,
}

pub fn stability_stats(results: &[f64]) -> Result<StabilityStats> {
    if results.len() < 2 {
        return Err(Error::InvalidInput(
            "need at least 2 results for worst-removed statistics".into(),
        ));
    }
    let mut sorted = results.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite result"));
    let rest = &sorted[1..];
    Ok(StabilityStats {
        mean: mean(rest),
        std: pop_std(rest),
        range: rest.last().unwrap() - rest.first().unwrap(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariationMode {
    /// One-hot Manhattan distance: each mismatch from the mode contributes 2.
    Onehot,
    /// Grid-index distance: |index - mode index|.
    Ordinal,
}

/// Index of `value` in `grid` (bitwise match), or an error.
fn grid_index(grid: &[f64], value: f64) -> Result<usize> {
    grid.iter()
        .position(|&g| g == value)
        .ok_or_else(|| Error::InvalidInput(format!("optimum {value} not on grid {grid:?}")))
}

/// Most frequent grid index; ties break toward the smaller grid value.
fn mode_index(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Variation of optimal (lr, wd) choices from their modes, in either one-hot
/// Manhattan or ordinal index distance.
pub fn hyper_variation(
    optima: &[(f64, f64)],
    lr_grid: &[f64],
    wd_grid: &[f64],
    mode: VariationMode,
) -> Result<f64> {
    if optima.is_empty() {
        return Ok(0.0);
    }
    let lr_idx: Vec<usize> = optima
        .iter()
        .map(|(lr, _)| grid_index(lr_grid, *lr))
        .collect::<Result<_>>()?;
    let wd_idx: Vec<usize> = optima
        .iter()
        .map(|(_, wd)| grid_index(wd_grid, *wd))
        .collect::<Result<_>>()?;

    let variation_axis = |idx: &[usize], grid_len: usize| -> f64 {
        let mut counts = vec![0usize; grid_len];
        for &i in idx {
            counts[i] += 1;
        }
        let m = mode_index(&counts);
        idx.iter()
            .map(|&i| match mode {
                // One-hot vectors differ in exactly two coordinates.
                VariationMode::Onehot => {
                    if i == m {
                        0.0
                    } else {
                        2.0
                    }
                }
                VariationMode::Ordinal => (i as f64 - m as f64).abs(),
            })
            .sum()
    };

    Ok(variation_axis(&lr_idx, lr_grid.len()) + variation_axis(&wd_idx, wd_grid.len()))
}

/// Input row for the ranking: per-optimizer ranks plus the binary coupling
/// flag.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankInput {
    pub optimizer: String,
    pub performance: u32,
    pub hyper: u32,
    pub bocb: u8,
    pub computation: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankRow {
    pub optimizer: String,
    pub performance: u32,
    pub hyper: u32,
    pub bocb: u8,
    pub computation: u32,
    pub score: f64,
    pub overall: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankTable {
    pub weights: [f64; 4],
    /// Rows sorted by overall rank.
    pub rows: Vec<RankRow>,
}

/// Weighted ranking across performance, hyper-parameter robustness, the
/// coupling flag, and computational cost.
///
/// Rank columns normalize to [0, 1] via (r - 1) / (N - 1) with N the table
/// size; the coupling flag enters raw. Lower scores rank first; exact score
/// ties break by optimizer name.
pub fn rank_optimizers(inputs: &[RankInput], weights: [f64; 4]) -> Result<RankTable> {
    if inputs.is_empty() {
        return Err(Error::InvalidInput("empty rank table".into()));
    }
    let wsum: f64 = weights.iter().sum();
    if (wsum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "weights must sum to 1, got {wsum}"
        )));
    }
    for r in inputs {
        if r.performance < 1 || r.hyper < 1 || r.computation < 1 {
            return Err(Error::InvalidInput(format!(
                "{}: ranks must be >= 1",
                r.optimizer
            )));
        }
        if r.bocb > 1 {
            return Err(Error::InvalidInput(format!(
                "{}: coupling flag must be 0 or 1",
                r.optimizer
            )));
        }
    }
    let n = inputs.len();
    let denom = (n as f64 - 1.0).max(1.0);
    let norm = |r: u32| (r as f64 - 1.0) / denom;

    let mut rows: Vec<RankRow> = inputs
        .iter()
        .map(|r| RankRow {
            optimizer: r.optimizer.clone(),
            performance: r.performance,
            hyper: r.hyper,
            bocb: r.bocb,
            computation: r.computation,
            score: weights[0] * norm(r.performance)
                + weights[1] * norm(r.hyper)
                + weights[2] * r.bocb as f64
                + weights[3] * norm(r.computation),
            overall: 0,
        })
        .collect();
    rows.sort_by(|a, b| {
        a.score
            .partial_cmp(&b.score)
            .expect("finite scores")
            .then_with(|| a.optimizer.cmp(&b.optimizer))
    });
    for (i, row) in rows.iter_mut().enumerate() {
        row.overall = i + 1;
    }
    Ok(RankTable { weights, rows })
}
