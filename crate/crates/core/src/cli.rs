//! Command-line front end: bench, analyze, diagnose, rank, export,
//! gradcheck. All commands are reproducible given identical inputs; exit
//! codes are 0 success, 2 config/input error, 3 I/O error, 4 check failure.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{
    detect_bocb, hyper_variation, rank_optimizers, stability_stats, VariationMode,
};
use crate::data::generate_dataset;
use crate::error::{Error, Result};
use crate::fixtures;
use crate::harness::checkpoint::{write_checkpoint, CheckpointMeta};
use crate::harness::{best_per_pair, read_jsonl, run_grid, run_training, BenchConfig, ResultMatrix};
use crate::opt::OptFamily;
use crate::zoo::{build_model, Family, ModelSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_CHECK: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "optbench",
    about = "Desk-scale optimizer benchmark: train a small model zoo with 20 optimizers and run the coupling-bias analyses",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full lr x wd grid sweep and write JSONL results plus one
    /// checkpoint per (model, optimizer) at its best cell.
    Bench(BenchArgs),
    /// Failure detection, stability statistics, or hyper-parameter variation
    /// over benchmark results.
    Analyze(AnalyzeArgs),
    /// Per-layer weight diagnostics (ridge CSV) from an OWB1 checkpoint.
    Diagnose(DiagnoseArgs),
    /// Weighted optimizer ranking from a component rank table.
    Rank(RankArgs),
    /// Export the best-accuracy matrix from results, or a bundled fixture.
    Export(ExportArgs),
    /// Finite-difference gradient check of the model zoo.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Benchmark config JSON (see the bundled desk.json).
    #[arg(long)]
    pub config: PathBuf,
    /// Output JSONL path; checkpoints land in <out>.checkpoints/.
    #[arg(long)]
    pub out: PathBuf,
    /// Recompute only cells missing from an existing results file.
    #[arg(long)]
    pub resume: bool,
    /// Overwrite existing outputs.
    #[arg(long)]
    pub force: bool,
    /// Worker threads; defaults to OPTBENCH_WORKERS or the logical core count.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Skip checkpoint export (results JSONL only).
    #[arg(long)]
    pub no_checkpoints: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AnalyzeKind {
    /// Flag per-model failure cases under the quantile threshold rule.
    Bocb,
    /// Worst-removed mean/std/range per model.
    Stats,
    /// Hyper-parameter variation from mode configurations.
    Variation,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariationAxis {
    ByBackbone,
    ByOptimizer,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(value_enum)]
    pub kind: AnalyzeKind,
    /// Results JSONL from bench, or an accuracy-matrix CSV (bocb/stats only).
    #[arg(long)]
    pub results: PathBuf,
    /// Failure threshold gamma.
    #[arg(long, default_value_t = 3.0)]
    pub gamma: f64,
    /// Variation encoding.
    #[arg(long, value_enum, default_value_t = CliVariationMode::Onehot)]
    pub mode: CliVariationMode,
    /// Variation grouping axis.
    #[arg(long, value_enum, default_value_t = VariationAxis::ByOptimizer)]
    pub axis: VariationAxis,
    /// Report JSON path; bocb also writes <out stem>.matrix.csv and .flags.csv.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CliVariationMode {
    Onehot,
    Ordinal,
}

impl From<CliVariationMode> for VariationMode {
    fn from(m: CliVariationMode) -> Self {
        match m {
            CliVariationMode::Onehot => VariationMode::Onehot,
            CliVariationMode::Ordinal => VariationMode::Ordinal,
        }
    }
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// OWB1 checkpoint path.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Entropy histogram bins.
    #[arg(long, default_value_t = 256)]
    pub bins: usize,
    /// Top-k rule: either a fraction like 0.05 or a fixed count like 8.
    #[arg(long, default_value = "0.05")]
    pub k_rule: String,
    /// Ridge CSV output path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Rank table CSV (optimizer,performance,hyper,bocb,computation[,overall]).
    #[arg(long)]
    pub table: PathBuf,
    /// Comma-separated weights for performance,hyper,bocb,computation.
    #[arg(long, default_value = "0.4,0.2,0.2,0.2")]
    pub weights: String,
    /// Rank table JSON output path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FixtureName {
    /// CIFAR-100 accuracy matrix (20 optimizers x 20 backbones).
    Table1,
    /// Published optimizer rank table.
    Table4,
    /// Desk benchmark config.
    Desk,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Results JSONL to collapse into a best-accuracy matrix CSV.
    #[arg(long, conflicts_with = "fixture")]
    pub results: Option<PathBuf>,
    /// Bundled fixture to dump instead.
    #[arg(long, value_enum)]
    pub fixture: Option<FixtureName>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Model family, or "all" for the whole zoo.
    #[arg(long, default_value = "all")]
    pub model: String,
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    #[arg(long, default_value_t = 16)]
    pub width: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    /// Negative-control hook: corrupt analytic gradients so the check fails.
    #[arg(long, hide = false)]
    pub corrupt: bool,
}

/// Run a parsed command; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Bench(args) => cmd_bench(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Diagnose(args) => cmd_diagnose(args),
        Command::Rank(args) => cmd_rank(args),
        Command::Export(args) => cmd_export(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) => EXIT_IO,
                _ => EXIT_CONFIG,
            }
        }
    }
}

fn workers_from(args_workers: Option<usize>) -> usize {
    args_workers
        .or_else(|| {
            std::env::var("OPTBENCH_WORKERS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

fn guard_overwrite(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::Config(format!(
            "{} exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn load_config(path: &Path) -> Result<BenchConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let cfg: BenchConfig =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_bench(args: BenchArgs) -> Result<i32> {
    let cfg = load_config(&args.config)?;
    if args.force && args.out.exists() && !args.resume {
        std::fs::remove_file(&args.out)?;
    }
    if let Some(dir) = args.out.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let workers = workers_from(args.workers);
    let outcome = run_grid(&cfg, &args.out, args.resume, workers)?;
    println!(
        "bench: {} cells total, {} computed now -> {}",
        outcome.total_cells,
        outcome.newly_computed,
        args.out.display()
    );
    if !args.no_checkpoints {
        let count = export_checkpoints(&cfg, &outcome.records, &args.out)?;
        println!("bench: {count} checkpoints written");
    }
    Ok(EXIT_OK)
}

/// Retrain the winning (lr, wd) cell per (model, optimizer) at the first
/// seed and save the final weights. Determinism makes the retrained weights
/// identical to the sweep's.
fn export_checkpoints(
    cfg: &BenchConfig,
    records: &[crate::harness::RunRecord],
    out: &Path,
) -> Result<usize> {
    let matrix = best_per_pair(records);
    let dir = checkpoint_dir(out);
    std::fs::create_dir_all(&dir)?;
    let dataset = generate_dataset(&cfg.dataset)?;
    let seed = *cfg.seeds.first().expect("validated seeds");
    let mut written = 0usize;
    for model in &cfg.models {
        for name in &cfg.optimizers {
            let family = OptFamily::parse(name)?;
            let Some(cell) = matrix.cell(family.as_str(), &model.name()) else {
                continue;
            };
            if cell.all_diverged {
                continue;
            }
            let lr_grid = cfg.lr_grid_for(family);
            let wd_grid = cfg.wd_grid();
            let lr_index = lr_grid.iter().position(|&l| l == cell.lr).unwrap_or(0);
            let wd_index = wd_grid.iter().position(|&w| w == cell.wd).unwrap_or(0);
            let run = run_training(
                model, family, cell.lr, cell.wd, lr_index, wd_index, seed, &dataset, cfg,
            )?;
            let meta = CheckpointMeta {
                model: model.name(),
                optimizer: family.as_str().to_string(),
                lr: cell.lr,
                wd: cell.wd,
                seed,
                epoch: cfg.epochs,
            };
            let file = dir.join(format!("{}__{}.owb1", model.name(), family.as_str()));
            write_checkpoint(&file, &run.weights, &meta)?;
            written += 1;
        }
    }
    Ok(written)
}

pub fn checkpoint_dir(out: &Path) -> PathBuf {
    let mut os = out.as_os_str().to_owned();
    os.push(".checkpoints");
    PathBuf::from(os)
}

fn load_matrix(path: &Path) -> Result<ResultMatrix> {
    let is_csv = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("csv"))
        .unwrap_or(false);
    if is_csv {
        let text = std::fs::read_to_string(path)?;
        let acc = fixtures::parse_accuracy_csv(&text)?;
        let cells = acc
            .values
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&v| {
                        Some(crate::harness::Cell {
                            mean_best_acc: v,
                            lr: f64::NAN,
                            wd: f64::NAN,
                            all_diverged: false,
                        })
                    })
                    .collect()
            })
            .collect();
        Ok(ResultMatrix {
            optimizers: acc.optimizers,
            models: acc.models,
            cells,
        })
    } else {
        let records = read_jsonl(path)?;
        Ok(best_per_pair(&records))
    }
}

#[derive(Serialize)]
struct BocbModelReport {
    model: String,
    gamma: f64,
    iqr: f64,
    threshold: f64,
    flagged: Vec<String>,
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<i32> {
    guard_overwrite(&args.out, args.force)?;
    match args.kind {
        AnalyzeKind::Bocb => {
            let matrix = load_matrix(&args.results)?;
            let mut reports = Vec::new();
            let mut flag_rows: Vec<Vec<bool>> =
                vec![vec![false; matrix.models.len()]; matrix.optimizers.len()];
            for (c, model) in matrix.models.iter().enumerate() {
                let mut names = Vec::new();
                let mut col = Vec::new();
                for (r, row) in matrix.cells.iter().enumerate() {
                    if let Some(cell) = &row[c] {
                        names.push((r, matrix.optimizers[r].clone()));
                        col.push(cell.mean_best_acc);
                    }
                }
                let det = detect_bocb(&col, args.gamma)?;
                let mut flagged = Vec::new();
                for &i in &det.flagged {
                    let (row_idx, ref name) = names[i];
                    flag_rows[row_idx][c] = true;
                    flagged.push(name.clone());
                }
                reports.push(BocbModelReport {
                    model: model.clone(),
                    gamma: args.gamma,
                    iqr: det.iqr,
                    threshold: det.threshold,
                    flagged,
                });
            }
            write_json(&args.out, &reports)?;
            let matrix_csv = sibling(&args.out, "matrix.csv");
            let flags_csv = sibling(&args.out, "flags.csv");
            guard_overwrite(&matrix_csv, args.force)?;
            guard_overwrite(&flags_csv, args.force)?;
            write_text(&matrix_csv, &accuracy_csv(&matrix)?)?;
            write_text(&flags_csv, &flags_to_csv(&matrix, &flag_rows))?;
            println!(
                "analyze bocb: {} models -> {}",
                matrix.models.len(),
                args.out.display()
            );
        }
        AnalyzeKind::Stats => {
            let matrix = load_matrix(&args.results)?;
            #[derive(Serialize)]
            struct Row {
                model: String,
                mean: f64,
                std: f64,
                range: f64,
            }
            let mut rows = Vec::new();
            for model in &matrix.models {
                let col = matrix.column(model);
                let s = stability_stats(&col)?;
                rows.push(Row {
                    model: model.clone(),
                    mean: s.mean,
                    std: s.std,
                    range: s.range,
                });
            }
            write_json(&args.out, &rows)?;
            println!(
                "analyze stats: {} models -> {}",
                rows.len(),
                args.out.display()
            );
        }
        AnalyzeKind::Variation => {
            let records = read_jsonl(&args.results)?;
            let matrix = best_per_pair(&records);
            let report = variation_report(&records, &matrix, args.axis, args.mode.into())?;
            write_json(&args.out, &report)?;
            println!(
                "analyze variation: {} entities -> {}",
                report.entities.len(),
                args.out.display()
            );
        }
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct VariationEntity {
    name: String,
    variation: f64,
    optima: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct VariationReport {
    axis: String,
    mode: String,
    lr_grid: Vec<f64>,
    wd_grid: Vec<f64>,
    entities: Vec<VariationEntity>,
}

/// Variation of per-cell optimal (lr, wd) from their modes, grouped along one
/// axis. Grids are recovered from the records themselves, so explicit-grid
/// sweeps analyze cleanly; per-category default grids share the wd axis and
/// differ only by the documented tenfold lr scaling, which one-hot encoding
/// is insensitive to after index alignment.
fn variation_report(
    records: &[crate::harness::RunRecord],
    matrix: &ResultMatrix,
    axis: VariationAxis,
    mode: VariationMode,
) -> Result<VariationReport> {
    let mut lr_grid: Vec<f64> = Vec::new();
    let mut wd_grid: Vec<f64> = Vec::new();
    for r in records {
        if !lr_grid.contains(&r.lr) {
            lr_grid.push(r.lr);
        }
        if !wd_grid.contains(&r.wd) {
            wd_grid.push(r.wd);
        }
    }
    lr_grid.sort_by(|a, b| a.partial_cmp(b).expect("finite lr"));
    wd_grid.sort_by(|a, b| a.partial_cmp(b).expect("finite wd"));

    let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for (r, opt) in matrix.optimizers.iter().enumerate() {
        for (c, model) in matrix.models.iter().enumerate() {
            if let Some(cell) = &matrix.cells[r][c] {
                let key = match axis {
                    VariationAxis::ByBackbone => model.clone(),
                    VariationAxis::ByOptimizer => opt.clone(),
                };
                groups.entry(key).or_default().push((cell.lr, cell.wd));
            }
        }
    }
    let mut entities = Vec::new();
    for (name, optima) in groups {
        let variation = hyper_variation(&optima, &lr_grid, &wd_grid, mode)?;
        entities.push(VariationEntity {
            name,
            variation,
            optima,
        });
    }
    Ok(VariationReport {
        axis: match axis {
            VariationAxis::ByBackbone => "by-backbone".into(),
            VariationAxis::ByOptimizer => "by-optimizer".into(),
        },
        mode: match mode {
            VariationMode::Onehot => "onehot".into(),
            VariationMode::Ordinal => "ordinal".into(),
        },
        lr_grid,
        wd_grid,
        entities,
    })
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

fn accuracy_csv(matrix: &ResultMatrix) -> Result<String> {
    let mut out = String::from("optimizer");
    for m in &matrix.models {
        out.push(',');
        out.push_str(m);
    }
    out.push('\n');
    for (r, opt) in matrix.optimizers.iter().enumerate() {
        out.push_str(opt);
        for c in 0..matrix.models.len() {
            out.push(',');
            match &matrix.cells[r][c] {
                Some(cell) => out.push_str(&format!("{}", cell.mean_best_acc)),
                None => {}
            }
        }
        out.push('\n');
    }
    Ok(out)
}

fn flags_to_csv(matrix: &ResultMatrix, flags: &[Vec<bool>]) -> String {
    let mut out = String::from("optimizer");
    for m in &matrix.models {
        out.push(',');
        out.push_str(m);
    }
    out.push('\n');
    for (r, opt) in matrix.optimizers.iter().enumerate() {
        out.push_str(opt);
        for c in 0..matrix.models.len() {
            out.push(',');
            out.push_str(if flags[r][c] { "1" } else { "0" });
        }
        out.push('\n');
    }
    out
}

fn cmd_diagnose(args: DiagnoseArgs) -> Result<i32> {
    guard_overwrite(&args.out, args.force)?;
    let k_rule = parse_k_rule(&args.k_rule)?;
    if args.bins < 2 {
        return Err(Error::Config("--bins must be >= 2".into()));
    }
    let records = crate::diagnostics::layer_sweep(&args.checkpoint, args.bins, k_rule)?;
    let mut buf = Vec::new();
    crate::diagnostics::write_ridge_csv(&mut buf, &records)?;
    write_text(&args.out, std::str::from_utf8(&buf).expect("utf8 csv"))?;
    println!(
        "diagnose: {} layers -> {}",
        records.len(),
        args.out.display()
    );
    Ok(EXIT_OK)
}

fn parse_k_rule(text: &str) -> Result<crate::diagnostics::KRule> {
    if let Ok(frac) = text.parse::<f64>() {
        if frac > 0.0 && frac < 1.0 {
            return Ok(crate::diagnostics::KRule::Fraction(frac));
        }
        if frac >= 1.0 && frac.fract() == 0.0 {
            return Ok(crate::diagnostics::KRule::Fixed(frac as usize));
        }
    }
    Err(Error::Config(format!(
        "--k-rule wants a fraction in (0,1) or a whole count, got '{text}'"
    )))
}

fn cmd_rank(args: RankArgs) -> Result<i32> {
    guard_overwrite(&args.out, args.force)?;
    let weights = parse_weights(&args.weights)?;
    let text = std::fs::read_to_string(&args.table)?;
    let table = fixtures::parse_rank_csv(&text)?;
    let ranked = rank_optimizers(&table.inputs, weights)?;
    write_json(&args.out, &ranked)?;
    let top: Vec<&str> = ranked
        .rows
        .iter()
        .take(3)
        .map(|r| r.optimizer.as_str())
        .collect();
    println!("rank: top-3 {} -> {}", top.join(", "), args.out.display());
    Ok(EXIT_OK)
}

fn parse_weights(text: &str) -> Result<[f64; 4]> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad weight '{p}': {e}")))
        })
        .collect::<Result<_>>()?;
    if parts.len() != 4 {
        return Err(Error::Config("--weights wants four comma-separated values".into()));
    }
    Ok([parts[0], parts[1], parts[2], parts[3]])
}

fn cmd_export(args: ExportArgs) -> Result<i32> {
    guard_overwrite(&args.out, args.force)?;
    match (&args.results, args.fixture) {
        (Some(results), None) => {
            let records = read_jsonl(results)?;
            let matrix = best_per_pair(&records);
            write_text(&args.out, &accuracy_csv(&matrix)?)?;
            let optima = sibling(&args.out, "optima.csv");
            guard_overwrite(&optima, args.force)?;
            let mut text = String::from("optimizer,model,lr,wd,mean_best_acc,all_diverged\n");
            for (r, opt) in matrix.optimizers.iter().enumerate() {
                for (c, model) in matrix.models.iter().enumerate() {
                    if let Some(cell) = &matrix.cells[r][c] {
                        text.push_str(&format!(
                            "{},{},{},{},{},{}\n",
                            opt, model, cell.lr, cell.wd, cell.mean_best_acc, cell.all_diverged
                        ));
                    }
                }
            }
            write_text(&optima, &text)?;
            println!("export: matrix -> {}", args.out.display());
        }
        (None, Some(fixture)) => {
            let payload = match fixture {
                FixtureName::Table1 => fixtures::TABLE1_CSV,
                FixtureName::Table4 => fixtures::TABLE4_CSV,
                FixtureName::Desk => fixtures::DESK_CONFIG_JSON,
            };
            write_text(&args.out, payload)?;
            println!("export: fixture -> {}", args.out.display());
        }
        _ => {
            return Err(Error::Config(
                "export wants exactly one of --results or --fixture".into(),
            ))
        }
    }
    Ok(EXIT_OK)
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<i32> {
    let families: Vec<Family> = if args.model == "all" {
        vec![
            Family::Linear,
            Family::PlainMlp,
            Family::ResMlp,
            Family::PatchMixer,
            Family::QuadBowl,
        ]
    } else {
        vec![parse_family(&args.model)?]
    };
    let mut worst: f64 = 0.0;
    let mut stdout = std::io::stdout();
    for family in families {
        let err = gradcheck_family(family, &args)?;
        writeln!(stdout, "gradcheck {:<12} max_rel_err {err:.3e}", family.as_str())?;
        if err > worst {
            worst = err;
        }
    }
    if worst <= 1e-6 {
        Ok(EXIT_OK)
    } else {
        eprintln!("gradcheck failed: max relative error {worst:.3e} > 1e-6");
        Ok(EXIT_CHECK)
    }
}

fn parse_family(name: &str) -> Result<Family> {
    match name.to_ascii_lowercase().as_str() {
        "linear" => Ok(Family::Linear),
        "plain_mlp" => Ok(Family::PlainMlp),
        "res_mlp" => Ok(Family::ResMlp),
        "patch_mixer" => Ok(Family::PatchMixer),
        "quad_bowl" => Ok(Family::QuadBowl),
        _ => Err(Error::Config(format!("unknown model family '{name}'"))),
    }
}

fn gradcheck_family(family: Family, args: &GradcheckArgs) -> Result<f64> {
    use crate::data::{DatasetKind, DatasetSpec};
    // Blobs for the mixer: smooth patchgrid images can leave a 2x2 patch
    // nearly constant, and the tiny channel variance wrecks the finite
    // differences (not the analytic gradient) through the norm curvature.
    let (kind, dims, classes) = match family {
        Family::PatchMixer => (DatasetKind::Blobs, 64, 3),
        Family::QuadBowl => (DatasetKind::Quadratic, 0, 0),
        _ => (DatasetKind::Spirals, 2, 3),
    };
    let mut spec = ModelSpec::new(family, args.depth, args.width);
    spec.init_seed = args.seed.wrapping_add(101);
    if family == Family::QuadBowl {
        spec.width = 10;
    }
    let (x, y) = if family == Family::QuadBowl {
        (crate::math::Tensor::zeros(&[0, 0]), Vec::new())
    } else {
        let ds = generate_dataset(&DatasetSpec {
            kind,
            classes,
            samples_per_class: 20,
            dims,
            image_side: 8,
            noise: 0.2,
            seed: args.seed,
        })?;
        ds.gather(&ds.train_idx[..16.min(ds.train_idx.len())])
    };
    let mut model = build_model(&spec, dims, classes)?;
    if args.corrupt {
        model.gradcheck_corrupted(&x, &y, args.step, args.seed, 1e-3)
    } else {
        model.gradcheck(&x, &y, args.step, args.seed)
    }
}
