//! Bundled reference data: the CIFAR-100 backbone/optimizer accuracy matrix,
//! the published optimizer rank table, and the desk benchmark config.

use crate::analysis::RankInput;
use crate::error::{Error, Result};

pub const TABLE1_CSV: &str = include_str!("../fixtures/table1_cifar100.csv");
pub const TABLE4_CSV: &str = include_str!("../fixtures/table4_rankings.csv");
pub const DESK_CONFIG_JSON: &str = include_str!("../fixtures/desk.json");

/// An optimizers-by-models accuracy matrix in the bundled CSV layout:
/// header `optimizer,<model...>`, one row per optimizer.
#[derive(Debug, Clone)]
pub struct AccuracyMatrix {
    pub models: Vec<String>,
    pub optimizers: Vec<String>,
    /// values[row][col] parallel to optimizers x models.
    pub values: Vec<Vec<f64>>,
}

impl AccuracyMatrix {
    pub fn column(&self, model: &str) -> Option<Vec<f64>> {
        let c = self.models.iter().position(|m| m == model)?;
        Some(self.values.iter().map(|row| row[c]).collect())
    }

    pub fn value(&self, optimizer: &str, model: &str) -> Option<f64> {
        let r = self.optimizers.iter().position(|o| o == optimizer)?;
        let c = self.models.iter().position(|m| m == model)?;
        Some(self.values[r][c])
    }
}

pub fn parse_accuracy_csv(text: &str) -> Result<AccuracyMatrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty accuracy csv".into()))?;
    let mut cols = header.split(',');
    let first = cols.next().unwrap_or_default();
    if first != "optimizer" {
        return Err(Error::Format(format!(
            "accuracy csv must start with an 'optimizer' column, got '{first}'"
        )));
    }
    let models: Vec<String> = cols.map(|c| c.trim().to_string()).collect();
    if models.is_empty() {
        return Err(Error::Format("accuracy csv has no model columns".into()));
    }
    let mut optimizers = Vec::new();
    let mut values = Vec::new();
    for (ln, line) in lines.enumerate() {
        let mut parts = line.split(',');
        let name = parts
            .next()
            .ok_or_else(|| Error::Format(format!("row {}: missing optimizer", ln + 2)))?;
        let row: Vec<f64> = parts
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("row {}: {e}", ln + 2)))
            })
            .collect::<Result<_>>()?;
        if row.len() != models.len() {
            return Err(Error::Format(format!(
                "row {}: expected {} values, got {}",
                ln + 2,
                models.len(),
                row.len()
            )));
        }
        optimizers.push(name.trim().to_string());
        values.push(row);
    }
    Ok(AccuracyMatrix {
        models,
        optimizers,
        values,
    })
}

/// Parsed rank CSV: the four component columns plus, when present, the
/// published overall ranking for cross-checks.
#[derive(Debug, Clone)]
pub struct RankCsv {
    pub inputs: Vec<RankInput>,
    pub published_overall: Vec<(String, usize)>,
}

pub fn parse_rank_csv(text: &str) -> Result<RankCsv> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty rank csv".into()))?;
    let cols: Vec<&str> = header.split(',').map(|c| c.trim()).collect();
    let find = |name: &str| cols.iter().position(|c| *c == name);
    let (oi, pi, hi, bi, ci) = match (
        find("optimizer"),
        find("performance"),
        find("hyper"),
        find("bocb"),
        find("computation"),
    ) {
        (Some(o), Some(p), Some(h), Some(b), Some(c)) => (o, p, h, b, c),
        _ => {
            return Err(Error::Format(
                "rank csv needs optimizer,performance,hyper,bocb,computation columns".into(),
            ))
        }
    };
    let overall_idx = find("overall");

    let mut inputs = Vec::new();
    let mut published = Vec::new();
    for (ln, line) in lines.enumerate() {
        let parts: Vec<&str> = line.split(',').map(|p| p.trim()).collect();
        let get = |i: usize| -> Result<&str> {
            parts
                .get(i)
                .copied()
                .ok_or_else(|| Error::Format(format!("row {}: too few columns", ln + 2)))
        };
        let parse_u32 = |s: &str| -> Result<u32> {
            s.parse()
                .map_err(|e| Error::Format(format!("row {}: {e}", ln + 2)))
        };
        let name = get(oi)?.to_string();
        inputs.push(RankInput {
            optimizer: name.clone(),
            performance: parse_u32(get(pi)?)?,
            hyper: parse_u32(get(hi)?)?,
            bocb: parse_u32(get(bi)?)? as u8,
            computation: parse_u32(get(ci)?)?,
        });
        if let Some(idx) = overall_idx {
            published.push((name, parse_u32(get(idx)?)? as usize));
        }
    }
    Ok(RankCsv {
        inputs,
        published_overall: published,
    })
}

pub fn table1() -> AccuracyMatrix {
    parse_accuracy_csv(TABLE1_CSV).expect("bundled table1 fixture parses")
}

pub fn table4() -> RankCsv {
    parse_rank_csv(TABLE4_CSV).expect("bundled table4 fixture parses")
}
