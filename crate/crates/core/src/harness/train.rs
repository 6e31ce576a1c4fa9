//! One deterministic training run: shuffled mini-batch epochs, cosine
//! schedule, per-batch optimizer steps, divergence recorded rather than
//! raised.

use std::time::Instant;

use crate::data::Dataset;
use crate::error::Result;
use crate::math::{splitmix64_mix, RandomStream, Tensor};
use crate::opt::{cosine_lr, create_optimizer, gnb_hessian_estimate, HyperParams, OptFamily};
use crate::zoo::{accuracy, build_model, Family, Model, ModelSpec};

use super::{BenchConfig, RunRecord};

/// Full identity of one run inside a grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RunKey {
    pub model: String,
    pub optimizer: String,
    pub lr_bits: u64,
    pub wd_bits: u64,
    pub seed: u64,
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

/// Run-local seed: a splitmix64 hash chain over the run identity, so every
/// (model, optimizer, lr index, wd index, seed) cell owns an independent
/// stream.
pub fn run_seed_chain(
    base_seed: u64,
    model: &str,
    family: &str,
    lr_index: usize,
    wd_index: usize,
    seed: u64,
) -> u64 {
    let mut s = base_seed;
    s = splitmix64_mix(s ^ fnv1a(model));
    s = splitmix64_mix(s ^ fnv1a(family));
    s = splitmix64_mix(s ^ lr_index as u64);
    s = splitmix64_mix(s ^ wd_index as u64);
    splitmix64_mix(s ^ seed)
}

/// Loss magnitude treated as a blow-up even while still finite; desk-scale
/// losses live many orders of magnitude below this.
const LOSS_DIVERGENCE_CAP: f64 = 1e12;

// Stream fork labels within a run.
const LABEL_INIT: u64 = 1;
const LABEL_SHUFFLE: u64 = 2;
const LABEL_HESSIAN: u64 = 3;

struct EpochOutcome {
    mean_loss: f64,
    diverged: bool,
}

/// Weights captured at the end of a finished run, for checkpoint export.
pub struct TrainedRun {
    pub record: RunRecord,
    pub weights: Vec<(String, Tensor)>,
}

#[allow(clippy::too_many_arguments)]
pub fn run_training(
    model_spec: &ModelSpec,
    family: OptFamily,
    lr: f64,
    wd: f64,
    lr_index: usize,
    wd_index: usize,
    seed: u64,
    dataset: &Dataset,
    config: &BenchConfig,
) -> Result<TrainedRun> {
    let start = Instant::now();
    let run_seed = run_seed_chain(
        config.base_seed,
        &model_spec.name(),
        family.as_str(),
        lr_index,
        wd_index,
        seed,
    );
    let root = RandomStream::new(run_seed);
    let mut shuffle_stream = root.fork(LABEL_SHUFFLE);
    let mut hessian_stream = root.fork(LABEL_HESSIAN);

    let mut spec = model_spec.clone();
    spec.init_seed = root.fork(LABEL_INIT).seed();
    let (input_dims, classes) = match model_spec.family {
        Family::QuadBowl => (0, 0),
        _ => (dataset.feature_dims(), dataset.spec.classes),
    };
    let mut model = build_model(&spec, input_dims, classes)?;

    let param_decl: Vec<(String, Vec<usize>)> = model
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.value.shape().to_vec()))
        .collect();
    let hyper = HyperParams::for_family(family, lr, wd);
    let mut opt = create_optimizer(family, hyper, &param_decl)?;

    let quadratic = model_spec.family == Family::QuadBowl;
    let steps_per_epoch_quad = dataset.spec.samples_per_class.max(1);

    let mut curve_loss: Vec<f64> = Vec::with_capacity(config.epochs);
    let mut curve_acc: Vec<f64> = Vec::with_capacity(config.epochs);
    let mut diverged = false;

    let mut train_idx = dataset.train_idx.clone();
    for epoch in 0..config.epochs {
        let lr_t = cosine_lr(lr, epoch, config.epochs, config.warmup);
        let outcome = if quadratic {
            quad_epoch(&mut model, &mut opt, lr_t, steps_per_epoch_quad)?
        } else {
            shuffle_stream.shuffle(&mut train_idx);
            data_epoch(
                &mut model,
                &mut opt,
                lr_t,
                dataset,
                &train_idx,
                config.batch_size,
                &mut hessian_stream,
            )?
        };
        if outcome.diverged {
            diverged = true;
            break;
        }
        curve_loss.push(outcome.mean_loss);
        let acc = if quadratic {
            // Monotone proxy so quadratic runs rank like classification runs.
            1.0 / (1.0 + outcome.mean_loss)
        } else {
            validation_accuracy(&mut model, dataset, config.batch_size)?
        };
        curve_acc.push(acc);
    }

    let best_val_acc = curve_acc.iter().cloned().fold(0.0f64, f64::max);
    let final_val_acc = curve_acc.last().copied().unwrap_or(0.0);
    let record = RunRecord {
        model: model_spec.name(),
        optimizer: family.as_str().to_string(),
        lr,
        wd,
        seed,
        epochs: config.epochs,
        curve_loss,
        curve_acc,
        final_val_acc,
        best_val_acc,
        diverged,
        wall_ms: start.elapsed().as_millis() as u64,
    };
    let weights = model
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.value.clone()))
        .collect();
    Ok(TrainedRun { record, weights })
}

fn data_epoch(
    model: &mut Model,
    opt: &mut crate::opt::OptimizerState,
    lr_t: f64,
    dataset: &Dataset,
    train_idx: &[usize],
    batch_size: usize,
    hessian_stream: &mut RandomStream,
) -> Result<EpochOutcome> {
    let mut total_loss = 0.0;
    let mut batches = 0usize;
    for chunk in train_idx.chunks(batch_size) {
        let (x, y) = dataset.gather(chunk);
        if opt.wants_hessian() {
            match gnb_hessian_estimate(model, &x, &y, hessian_stream) {
                Ok(h) => opt.update_hessian(&h),
                Err(_) => return Ok(EpochOutcome { mean_loss: f64::NAN, diverged: true }),
            }
        }
        let loss = match model.forward_loss(&x, &y) {
            Ok((loss, _)) if loss.abs() <= LOSS_DIVERGENCE_CAP => loss,
            _ => return Ok(EpochOutcome { mean_loss: f64::NAN, diverged: true }),
        };
        let grads = match model.backward(&x, &y) {
            Ok(g) => g,
            Err(_) => return Ok(EpochOutcome { mean_loss: f64::NAN, diverged: true }),
        };
        let mut refs: Vec<&mut Tensor> =
            model.params_mut().iter_mut().map(|p| &mut p.value).collect();
        if !opt.step(&mut refs, &grads, lr_t) {
            return Ok(EpochOutcome { mean_loss: f64::NAN, diverged: true });
        }
        total_loss += loss;
        batches += 1;
    }
    Ok(EpochOutcome {
        mean_loss: total_loss / batches.max(1) as f64,
        diverged: false,
    })
}

fn quad_epoch(
    model: &mut Model,
    opt: &mut crate::opt::OptimizerState,
    lr_t: f64,
    steps: usize,
) -> Result<EpochOutcome> {
    let empty = Tensor::zeros(&[0, 0]);
    let mut total_loss = 0.0;
    for _ in 0..steps {
        if opt.wants_hessian() {
            let diag = model.quad_diagonal();
            let h = vec![Tensor::from_vec(&[diag.len()], diag)?];
            opt.update_hessian(&h);
        }
        let loss = match model.forward_loss(&empty, &[]) {
            Ok((loss, _)) if loss.abs() <= LOSS_DIVERGENCE_CAP => loss,
            _ => return Ok(EpochOutcome { mean_loss: f64::NAN, diverged: true }),
        };
        let grads = model.backward(&empty, &[])?;
        let mut refs: Vec<&mut Tensor> =
            model.params_mut().iter_mut().map(|p| &mut p.value).collect();
        if !opt.step(&mut refs, &grads, lr_t) {
            return Ok(EpochOutcome { mean_loss: f64::NAN, diverged: true });
        }
        total_loss += loss;
    }
    Ok(EpochOutcome {
        mean_loss: total_loss / steps.max(1) as f64,
        diverged: false,
    })
}

fn validation_accuracy(model: &mut Model, dataset: &Dataset, batch_size: usize) -> Result<f64> {
    let mut hits = 0.0;
    let mut total = 0usize;
    for chunk in dataset.val_idx.chunks(batch_size) {
        let (x, y) = dataset.gather(chunk);
        let (_, logits) = model.forward_loss(&x, &y)?;
        hits += accuracy(&logits, &y) * y.len() as f64;
        total += y.len();
    }
    Ok(if total == 0 { 0.0 } else { hits / total as f64 })
}
