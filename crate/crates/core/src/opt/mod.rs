//! Twenty gradient-based optimizer update rules behind one four-step
//! interface: compute gradients, estimate gradients with history, derive the
//! per-layer rate, update with weight decay.
//!
//! Each named parameter tensor counts as one "layer" for the per-layer rules
//! (LARS, LAMB, NovoGrad, Sophia's clip).

mod hessian;
mod rules;
mod schedule;

pub use hessian::gnb_hessian_estimate;
pub use schedule::cosine_lr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::tensor::Tensor;

/// The benchmarked optimizer families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptFamily {
    SgdM,
    Sgdp,
    Lion,
    Adam,
    Adamax,
    NAdam,
    AdamW,
    Lamb,
    RAdam,
    AdamP,
    Adan,
    AdaBound,
    Lars,
    AdaFactor,
    AdaBelief,
    NovoGrad,
    Sophia,
    AdaGrad,
    AdaDelta,
    RmsProp,
}

pub const ALL_FAMILIES: [OptFamily; 20] = [
    OptFamily::SgdM,
    OptFamily::Sgdp,
    OptFamily::Lion,
    OptFamily::Adam,
    OptFamily::Adamax,
    OptFamily::NAdam,
    OptFamily::AdamW,
    OptFamily::Lamb,
    OptFamily::RAdam,
    OptFamily::AdamP,
    OptFamily::Adan,
    OptFamily::AdaBound,
    OptFamily::Lars,
    OptFamily::AdaFactor,
    OptFamily::AdaBelief,
    OptFamily::NovoGrad,
    OptFamily::Sophia,
    OptFamily::AdaGrad,
    OptFamily::AdaDelta,
    OptFamily::RmsProp,
];

/// Learning-rate adjustment / gradient-estimation category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Category {
    /// Fixed learning rate with momentum.
    A,
    /// Adaptive learning rate (second moment) with momentum.
    B,
    /// Estimated learning rate with momentum.
    C,
    /// Adaptive learning rate without momentum.
    D,
}

impl OptFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            OptFamily::SgdM => "SGD-M",
            OptFamily::Sgdp => "SGDP",
            OptFamily::Lion => "LION",
            OptFamily::Adam => "Adam",
            OptFamily::Adamax => "Adamax",
            OptFamily::NAdam => "NAdam",
            OptFamily::AdamW => "AdamW",
            OptFamily::Lamb => "LAMB",
            OptFamily::RAdam => "RAdam",
            OptFamily::AdamP => "AdamP",
            OptFamily::Adan => "Adan",
            OptFamily::AdaBound => "AdaBound",
            OptFamily::Lars => "LARS",
            OptFamily::AdaFactor => "AdaFactor",
            OptFamily::AdaBelief => "AdaBelief",
            OptFamily::NovoGrad => "NovoGrad",
            OptFamily::Sophia => "Sophia",
            OptFamily::AdaGrad => "AdaGrad",
            OptFamily::AdaDelta => "AdaDelta",
            OptFamily::RmsProp => "RMSProp",
        }
    }

    /// Case-insensitive lookup by canonical name.
    pub fn parse(name: &str) -> Result<OptFamily> {
        let lower = name.to_ascii_lowercase();
        ALL_FAMILIES
            .iter()
            .find(|f| f.as_str().to_ascii_lowercase() == lower)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown optimizer family '{name}'")))
    }

    pub fn category(&self) -> Category {
        match self {
            OptFamily::SgdM | OptFamily::Sgdp | OptFamily::Lion => Category::A,
            OptFamily::Adam
            | OptFamily::Adamax
            | OptFamily::NAdam
            | OptFamily::AdamW
            | OptFamily::Lamb
            | OptFamily::RAdam
            | OptFamily::AdamP
            | OptFamily::Adan => Category::B,
            OptFamily::AdaBound
            | OptFamily::Lars
            | OptFamily::AdaFactor
            | OptFamily::AdaBelief
            | OptFamily::NovoGrad
            | OptFamily::Sophia => Category::C,
            OptFamily::AdaGrad | OptFamily::AdaDelta | OptFamily::RmsProp => Category::D,
        }
    }

    /// Whether the family's canonical weight-decay placement is decoupled.
    pub fn default_decoupled(&self) -> bool {
        !matches!(
            self,
            OptFamily::SgdM
                | OptFamily::Adam
                | OptFamily::Adamax
                | OptFamily::NAdam
                | OptFamily::AdaGrad
                | OptFamily::AdaDelta
                | OptFamily::RmsProp
        )
    }
}

/// Rule-specific scalars with fixed conventions; only lr and weight decay are
/// grid searched.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Extras {
    /// AdaBound: final_lr = final_lr_ratio * lr_t.
    pub final_lr_ratio: f64,
    /// AdaBound bound-convergence speed.
    pub gamma_bound: f64,
    /// LAMB trust-ratio numerator clip.
    pub trust_clip: f64,
    /// Sophia preconditioner scale.
    pub sophia_gamma: f64,
    /// Sophia Hessian refresh interval in steps.
    pub sophia_interval: u64,
    /// SGDP/AdamP projection threshold delta.
    pub proj_delta: f64,
}

impl Default for Extras {
    fn default() -> Self {
        Extras {
            final_lr_ratio: 0.1,
            gamma_bound: 1e-3,
            trust_clip: 10.0,
            sophia_gamma: 0.01,
            sophia_interval: 10,
            proj_delta: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperParams {
    pub lr: f64,
    pub weight_decay: f64,
    pub decoupled_wd: bool,
    /// (beta1, beta2, beta3); beta3 is only used by Adan.
    pub betas: [f64; 3],
    pub momentum: f64,
    pub eps: f64,
    #[serde(default)]
    pub extras: Extras,
}

impl HyperParams {
    /// Family defaults with the given lr and weight decay.
    pub fn for_family(family: OptFamily, lr: f64, weight_decay: f64) -> Self {
        let betas = match family {
            OptFamily::Lion => [0.9, 0.99, 0.0],
            OptFamily::Adan => [0.98, 0.92, 0.99],
            OptFamily::Sophia => [0.965, 0.99, 0.0],
            OptFamily::NovoGrad => [0.95, 0.98, 0.0],
            OptFamily::AdaDelta => [0.0, 0.9, 0.0],
            OptFamily::RmsProp => [0.0, 0.99, 0.0],
            _ => [0.9, 0.999, 0.0],
        };
        let eps = match family {
            OptFamily::AdaDelta => 1e-6,
            _ => 1e-8,
        };
        HyperParams {
            lr,
            weight_decay,
            decoupled_wd: family.default_decoupled(),
            betas,
            momentum: 0.9,
            eps,
            extras: Extras::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::Config("lr must be > 0".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config("weight decay must be >= 0".into()));
        }
        if self.betas.iter().any(|b| !(0.0..1.0).contains(b)) {
            return Err(Error::Config("betas must lie in [0,1)".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config("eps must be > 0".into()));
        }
        Ok(())
    }
}

/// Per-parameter buffers; unused slots stay empty.
#[derive(Debug, Clone, Default)]
pub(crate) struct ParamBufs {
    /// First moment / momentum buffer.
    pub m: Vec<f64>,
    /// Second moment (Adamax: infinity norm; Sophia: Hessian diagonal;
    /// AdaDelta: E[g^2]; AdaFactor vectors: full second moment).
    pub v: Vec<f64>,
    /// Rule extras: Adan n; AdaDelta E[dx^2]; AdaFactor row stats.
    pub extra: Vec<f64>,
    /// Rule extras: Adan previous gradient; AdaFactor column stats.
    pub extra2: Vec<f64>,
    /// Per-layer scalar (NovoGrad v_l).
    pub scalar: f64,
    /// NovoGrad: v_l initialized from the first gradient norm.
    pub initialized: bool,
}

/// Optimizer state for one training run: family, hypers, step counter, and
/// per-parameter buffers keyed by the declared parameter names.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub family: OptFamily,
    pub hyper: HyperParams,
    pub step_count: u64,
    pub diverged: bool,
    names: Vec<String>,
    shapes: Vec<Vec<usize>>,
    pub(crate) bufs: Vec<ParamBufs>,
    scratch: Vec<f64>,
    scratch2: Vec<f64>,
}

/// Zero-initialized optimizer state for the named parameters.
pub fn create_optimizer(
    family: OptFamily,
    hyper: HyperParams,
    params: &[(String, Vec<usize>)],
) -> Result<OptimizerState> {
    hyper.validate()?;
    let mut bufs = Vec::with_capacity(params.len());
    for (_, shape) in params {
        let n: usize = shape.iter().product();
        let mut b = ParamBufs::default();
        match family {
            OptFamily::SgdM | OptFamily::Sgdp | OptFamily::Lars | OptFamily::Lion => {
                b.m = vec![0.0; n];
            }
            OptFamily::Adam
            | OptFamily::Adamax
            | OptFamily::NAdam
            | OptFamily::AdamW
            | OptFamily::Lamb
            | OptFamily::RAdam
            | OptFamily::AdamP
            | OptFamily::AdaBound
            | OptFamily::AdaBelief
            | OptFamily::Sophia => {
                b.m = vec![0.0; n];
                b.v = vec![0.0; n];
            }
            OptFamily::Adan => {
                b.m = vec![0.0; n];
                b.v = vec![0.0; n];
                b.extra = vec![0.0; n];
                b.extra2 = vec![0.0; n];
            }
            OptFamily::AdaFactor => {
                // Matrices get factored row/col stats; vectors a full second
                // moment. A (r, c, ...) tensor factors as (r) x (c*...).
                if shape.len() >= 2 && shape[0] > 1 && n / shape[0] > 1 {
                    b.extra = vec![0.0; shape[0]];
                    b.extra2 = vec![0.0; n / shape[0]];
                } else {
                    b.v = vec![0.0; n];
                }
            }
            OptFamily::NovoGrad => {
                b.m = vec![0.0; n];
            }
            OptFamily::AdaGrad | OptFamily::RmsProp => {
                b.v = vec![0.0; n];
            }
            OptFamily::AdaDelta => {
                b.v = vec![0.0; n];
                b.extra = vec![0.0; n];
            }
        }
        bufs.push(b);
    }
    Ok(OptimizerState {
        family,
        hyper,
        step_count: 0,
        diverged: false,
        names: params.iter().map(|(n, _)| n.clone()).collect(),
        shapes: params.iter().map(|(_, s)| s.clone()).collect(),
        bufs,
        scratch: Vec::new(),
        scratch2: Vec::new(),
    })
}

impl OptimizerState {
    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    /// Exposes a named buffer for inspection in tests.
    pub fn momentum_buffer(&self, name: &str) -> Option<&[f64]> {
        let i = self.names.iter().position(|n| n == name)?;
        let m = &self.bufs[i].m;
        if m.is_empty() {
            None
        } else {
            Some(m)
        }
    }

    pub fn has_momentum_buffers(&self) -> bool {
        self.bufs.iter().any(|b| !b.m.is_empty())
    }

    /// True when the training loop should refresh the Hessian estimate
    /// before the next step (Sophia only).
    pub fn wants_hessian(&self) -> bool {
        self.family == OptFamily::Sophia
            && self.step_count % self.hyper.extras.sophia_interval == 0
    }

    /// EMA-merge a fresh Hessian-diagonal estimate (Sophia).
    pub fn update_hessian(&mut self, estimate: &[Tensor]) {
        let beta2 = self.hyper.betas[1];
        for (b, h) in self.bufs.iter_mut().zip(estimate) {
            for (hv, &e) in b.v.iter_mut().zip(h.data()) {
                *hv = beta2 * *hv + (1.0 - beta2) * e;
            }
        }
    }

    /// Apply one update in place. Returns false (and latches `diverged`)
    /// when a parameter goes non-finite; the caller records the divergence.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor], lr_t: f64) -> bool {
        assert_eq!(params.len(), self.bufs.len());
        assert_eq!(grads.len(), self.bufs.len());
        assert!(lr_t > 0.0, "lr_t must be positive");
        if grads.iter().any(|g| !g.all_finite()) {
            self.diverged = true;
            return false;
        }
        let t = self.step_count + 1;
        let family = self.family;
        let mut healthy = true;
        for i in 0..params.len() {
            debug_assert_eq!(params[i].shape(), &self.shapes[i][..]);
            rules::apply(
                family,
                &self.hyper,
                lr_t,
                t,
                params[i].data_mut(),
                grads[i].data(),
                &mut self.bufs[i],
                &mut self.scratch,
                &mut self.scratch2,
            );
            if !params[i].all_finite() {
                healthy = false;
            }
        }
        self.step_count = t;
        if !healthy {
            self.diverged = true;
        }
        healthy
    }
}
