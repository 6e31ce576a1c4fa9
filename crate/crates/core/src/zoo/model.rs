//! The desk-scale model zoo: linear, plain MLP, pre-norm residual MLP,
//! patch mixer, and the analytic quadratic bowl. Forward and backward are
//! explicit closed forms per family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::tensor::Tensor;
use crate::math::RandomStream;
use crate::zoo::layers::*;

pub const MIXER_SIDE: usize = 8;
pub const MIXER_TOKENS: usize = 16;
pub const MIXER_CHANNELS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Linear,
    PlainMlp,
    ResMlp,
    PatchMixer,
    QuadBowl,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Linear => "linear",
            Family::PlainMlp => "plain_mlp",
            Family::ResMlp => "res_mlp",
            Family::PatchMixer => "patch_mixer",
            Family::QuadBowl => "quad_bowl",
        }
    }
}

/// Macro-design lineage a family mirrors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaxonomyTag {
    Primary,
    Classical,
    ModernIsotropic,
}

/// Canonical tag per family: plain stacking is primary, pre-norm residual is
/// classical, token/channel mixing is modern-isotropic.
pub fn family_tag(family: Family) -> TaxonomyTag {
    match family {
        Family::Linear | Family::PlainMlp | Family::QuadBowl => TaxonomyTag::Primary,
        Family::ResMlp => TaxonomyTag::Classical,
        Family::PatchMixer => TaxonomyTag::ModernIsotropic,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_width")]
    pub width: usize,
    /// Defaults to the family's canonical tag; a mismatching explicit tag is
    /// a config error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taxonomy_tag: Option<TaxonomyTag>,
    #[serde(default)]
    pub init_seed: u64,
    /// Condition number of the quadratic bowl (quad_bowl only).
    #[serde(default = "default_cond")]
    pub cond: f64,
}

fn default_depth() -> usize {
    1
}
fn default_width() -> usize {
    32
}
fn default_cond() -> f64 {
    100.0
}

impl ModelSpec {
    pub fn new(family: Family, depth: usize, width: usize) -> Self {
        ModelSpec {
            family,
            depth,
            width,
            taxonomy_tag: None,
            init_seed: 0,
            cond: default_cond(),
        }
    }

    /// Stable display name used in run records and result matrices.
    pub fn name(&self) -> String {
        match self.family {
            Family::Linear => "linear".to_string(),
            Family::QuadBowl => format!("quad_bowl_d{}", self.width),
            f => format!("{}_d{}_w{}", f.as_str(), self.depth, self.width),
        }
    }

    pub fn tag(&self) -> TaxonomyTag {
        self.taxonomy_tag.unwrap_or_else(|| family_tag(self.family))
    }

    fn validate(&self) -> Result<()> {
        if self.width < 1 || self.depth < 1 {
            return Err(Error::Config(format!(
                "{}: width and depth must be >= 1",
                self.name()
            )));
        }
        if let Some(tag) = self.taxonomy_tag {
            if tag != family_tag(self.family) {
                return Err(Error::Config(format!(
                    "{}: taxonomy tag {:?} inconsistent with family",
                    self.name(),
                    tag
                )));
            }
        }
        if self.family == Family::QuadBowl && self.cond < 1.0 {
            return Err(Error::Config("quad_bowl condition number must be >= 1".into()));
        }
        Ok(())
    }
}

/// A named parameter tensor; one "layer" for the per-layer optimizer rules.
#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
}

/// Gradients aligned index-for-index with `Model::params`.
pub type Gradients = Vec<Tensor>;

struct ResBlockCache {
    ln: LnCache,
    z: Tensor,
    a_pre: Tensor,
    a: Tensor,
}

struct MixerBlockCache {
    ln_tok: LnCache,
    z_tok: Tensor,
    ln_chan: LnCache,
    z_chan: Tensor,
    a_pre: Tensor,
    a: Tensor,
}

enum Cache {
    Linear {
        x: Tensor,
    },
    Plain {
        x: Tensor,
        pre: Vec<Tensor>,
        act: Vec<Tensor>,
    },
    Res {
        x: Tensor,
        blocks: Vec<ResBlockCache>,
        head_in: Tensor,
    },
    Mixer {
        blocks: Vec<MixerBlockCache>,
        head_in: Tensor,
    },
    Quad,
}

struct ForwardState {
    cache: Cache,
    dlogits: Tensor,
    fingerprint: u64,
}

/// A zoo model: spec, named parameters, and the activation cache from the
/// most recent forward pass.
pub struct Model {
    pub spec: ModelSpec,
    pub input_dims: usize,
    pub classes: usize,
    params: Vec<Param>,
    state: Option<ForwardState>,
}

fn batch_fingerprint(features: &Tensor, labels: &[usize]) -> u64 {
    // FNV-1a over dims, labels and boundary feature bits; cheap staleness check.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |x: u64| {
        h ^= x;
        h = h.wrapping_mul(0x1000_0000_01b3);
    };
    eat(features.rows() as u64);
    eat(features.cols() as u64);
    for &l in labels {
        eat(l as u64);
    }
    if let (Some(first), Some(last)) = (features.data().first(), features.data().last()) {
        eat(first.to_bits());
        eat(last.to_bits());
    }
    h
}

pub fn build_model(spec: &ModelSpec, input_dims: usize, classes: usize) -> Result<Model> {
    spec.validate()?;
    let mut stream = RandomStream::new(spec.init_seed);
    let mut params: Vec<Param> = Vec::new();

    match spec.family {
        Family::Linear => {
            require_dims(spec, input_dims >= 1 && classes >= 2)?;
            he_weight(&mut params, "head.weight", classes, input_dims, &mut stream);
            push_zeros(&mut params, "head.bias", &[classes]);
        }
        Family::PlainMlp => {
            require_dims(spec, input_dims >= 1 && classes >= 2)?;
            let mut prev = input_dims;
            for b in 0..spec.depth {
                he_weight(&mut params, &format!("block{b}.weight"), spec.width, prev, &mut stream);
                push_zeros(&mut params, &format!("block{b}.bias"), &[spec.width]);
                prev = spec.width;
            }
            he_weight(&mut params, "head.weight", classes, prev, &mut stream);
            push_zeros(&mut params, "head.bias", &[classes]);
        }
        Family::ResMlp => {
            require_dims(spec, input_dims >= 1 && classes >= 2)?;
            let w = spec.width;
            he_weight(&mut params, "embed.weight", w, input_dims, &mut stream);
            push_zeros(&mut params, "embed.bias", &[w]);
            for b in 0..spec.depth {
                push_ones(&mut params, &format!("block{b}.ln.gain"), &[w]);
                push_zeros(&mut params, &format!("block{b}.ln.bias"), &[w]);
                he_weight(&mut params, &format!("block{b}.fc1.weight"), w, w, &mut stream);
                push_zeros(&mut params, &format!("block{b}.fc1.bias"), &[w]);
                he_weight(&mut params, &format!("block{b}.fc2.weight"), w, w, &mut stream);
                push_zeros(&mut params, &format!("block{b}.fc2.bias"), &[w]);
            }
            he_weight(&mut params, "head.weight", classes, w, &mut stream);
            push_zeros(&mut params, "head.bias", &[classes]);
        }
        Family::PatchMixer => {
            if input_dims != MIXER_SIDE * MIXER_SIDE {
                return Err(Error::Config(format!(
                    "patch_mixer needs {}-dim input (8x8 image), dataset has {}",
                    MIXER_SIDE * MIXER_SIDE,
                    input_dims
                )));
            }
            require_dims(spec, classes >= 2)?;
            let h = spec.width;
            for b in 0..spec.depth {
                push_ones(&mut params, &format!("block{b}.tok.ln.gain"), &[MIXER_CHANNELS]);
                push_zeros(&mut params, &format!("block{b}.tok.ln.bias"), &[MIXER_CHANNELS]);
                he_weight(
                    &mut params,
                    &format!("block{b}.tok.mix.weight"),
                    MIXER_TOKENS,
                    MIXER_TOKENS,
                    &mut stream,
                );
                push_zeros(&mut params, &format!("block{b}.tok.mix.bias"), &[MIXER_TOKENS]);
                push_ones(&mut params, &format!("block{b}.chan.ln.gain"), &[MIXER_CHANNELS]);
                push_zeros(&mut params, &format!("block{b}.chan.ln.bias"), &[MIXER_CHANNELS]);
                he_weight(&mut params, &format!("block{b}.chan.fc1.weight"), h, MIXER_CHANNELS, &mut stream);
                push_zeros(&mut params, &format!("block{b}.chan.fc1.bias"), &[h]);
                he_weight(&mut params, &format!("block{b}.chan.fc2.weight"), MIXER_CHANNELS, h, &mut stream);
                push_zeros(&mut params, &format!("block{b}.chan.fc2.bias"), &[MIXER_CHANNELS]);
            }
            he_weight(&mut params, "head.weight", classes, MIXER_SIDE * MIXER_SIDE, &mut stream);
            push_zeros(&mut params, "head.bias", &[classes]);
        }
        Family::QuadBowl => {
            let d = spec.width;
            let mut theta = Tensor::zeros(&[d]);
            for v in theta.data_mut() {
                *v = stream.normal();
            }
            params.push(Param {
                name: "theta".to_string(),
                value: theta,
            });
        }
    }

    Ok(Model {
        spec: spec.clone(),
        input_dims,
        classes,
        params,
        state: None,
    })
}

fn require_dims(spec: &ModelSpec, ok: bool) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{}: dataset shape incompatible with family",
            spec.name()
        )))
    }
}

fn he_weight(params: &mut Vec<Param>, name: &str, out: usize, fan_in: usize, stream: &mut RandomStream) {
    let std = (2.0 / fan_in as f64).sqrt();
    let mut t = Tensor::zeros(&[out, fan_in]);
    for v in t.data_mut() {
        *v = std * stream.normal();
    }
    params.push(Param {
        name: name.to_string(),
        value: t,
    });
}

fn push_zeros(params: &mut Vec<Param>, name: &str, shape: &[usize]) {
    params.push(Param {
        name: name.to_string(),
        value: Tensor::zeros(shape),
    });
}

fn push_ones(params: &mut Vec<Param>, name: &str, shape: &[usize]) {
    params.push(Param {
        name: name.to_string(),
        value: Tensor::filled(shape, 1.0),
    });
}

impl Model {
    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.params.iter().find(|p| p.name == name).map(|p| &p.value)
    }

    /// Diagonal of the quadratic bowl's Hessian: logspace(1, cond, d).
    pub fn quad_diagonal(&self) -> Vec<f64> {
        let d = self.spec.width;
        let log_cond = self.spec.cond.log10();
        (0..d)
            .map(|i| {
                if d == 1 {
                    1.0
                } else {
                    10f64.powf(log_cond * i as f64 / (d - 1) as f64)
                }
            })
            .collect()
    }

    fn param_by_name(&self, name: &str) -> &Tensor {
        self.param(name).expect("parameter name")
    }

    /// Mean softmax cross-entropy over the batch (quad_bowl: the bowl value).
    /// Caches activations for a subsequent [`Model::backward`].
    pub fn forward_loss(&mut self, features: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
        for p in &self.params {
            if !p.value.all_finite() {
                return Err(Error::Diverged(format!(
                    "parameter {} contains non-finite values",
                    p.name
                )));
            }
        }
        let fingerprint = batch_fingerprint(features, labels);
        let (loss, logits, cache, dlogits) = match self.spec.family {
            Family::Linear => {
                let logits = affine_forward(
                    features,
                    self.param_by_name("head.weight"),
                    self.param_by_name("head.bias"),
                );
                let (loss, dlogits) = softmax_ce(&logits, labels);
                (loss, logits, Cache::Linear { x: features.clone() }, dlogits)
            }
            Family::PlainMlp => {
                let mut pre = Vec::with_capacity(self.spec.depth);
                let mut act = Vec::with_capacity(self.spec.depth);
                let mut h = features.clone();
                for b in 0..self.spec.depth {
                    let p = affine_forward(
                        &h,
                        self.param_by_name(&format!("block{b}.weight")),
                        self.param_by_name(&format!("block{b}.bias")),
                    );
                    let a = relu_forward(&p);
                    pre.push(p);
                    act.push(a.clone());
                    h = a;
                }
                let logits = affine_forward(
                    &h,
                    self.param_by_name("head.weight"),
                    self.param_by_name("head.bias"),
                );
                let (loss, dlogits) = softmax_ce(&logits, labels);
                (
                    loss,
                    logits,
                    Cache::Plain {
                        x: features.clone(),
                        pre,
                        act,
                    },
                    dlogits,
                )
            }
            Family::ResMlp => {
                let embed_out = affine_forward(
                    features,
                    self.param_by_name("embed.weight"),
                    self.param_by_name("embed.bias"),
                );
                let mut blocks = Vec::with_capacity(self.spec.depth);
                let mut h = embed_out;
                for b in 0..self.spec.depth {
                    let (z, ln) = layer_norm_forward(
                        &h,
                        self.param_by_name(&format!("block{b}.ln.gain")),
                        self.param_by_name(&format!("block{b}.ln.bias")),
                    );
                    let a_pre = affine_forward(
                        &z,
                        self.param_by_name(&format!("block{b}.fc1.weight")),
                        self.param_by_name(&format!("block{b}.fc1.bias")),
                    );
                    let a = relu_forward(&a_pre);
                    let y = affine_forward(
                        &a,
                        self.param_by_name(&format!("block{b}.fc2.weight")),
                        self.param_by_name(&format!("block{b}.fc2.bias")),
                    );
                    for (hv, yv) in h.data_mut().iter_mut().zip(y.data()) {
                        *hv += yv;
                    }
                    blocks.push(ResBlockCache { ln, z, a_pre, a });
                }
                let head_in = h.clone();
                let logits = affine_forward(
                    &h,
                    self.param_by_name("head.weight"),
                    self.param_by_name("head.bias"),
                );
                let (loss, dlogits) = softmax_ce(&logits, labels);
                (
                    loss,
                    logits,
                    Cache::Res {
                        x: features.clone(),
                        blocks,
                        head_in,
                    },
                    dlogits,
                )
            }
            Family::PatchMixer => {
                let bsz = features.rows();
                let mut h = patchify_forward(features, MIXER_SIDE);
                let mut blocks = Vec::with_capacity(self.spec.depth);
                for b in 0..self.spec.depth {
                    let (z_tok, ln_tok) = layer_norm_forward(
                        &h,
                        self.param_by_name(&format!("block{b}.tok.ln.gain")),
                        self.param_by_name(&format!("block{b}.tok.ln.bias")),
                    );
                    let mixed = token_mix_forward(
                        &z_tok,
                        self.param_by_name(&format!("block{b}.tok.mix.weight")),
                        self.param_by_name(&format!("block{b}.tok.mix.bias")),
                        MIXER_TOKENS,
                    );
                    for (hv, mv) in h.data_mut().iter_mut().zip(mixed.data()) {
                        *hv += mv;
                    }
                    let (z_chan, ln_chan) = layer_norm_forward(
                        &h,
                        self.param_by_name(&format!("block{b}.chan.ln.gain")),
                        self.param_by_name(&format!("block{b}.chan.ln.bias")),
                    );
                    let a_pre = affine_forward(
                        &z_chan,
                        self.param_by_name(&format!("block{b}.chan.fc1.weight")),
                        self.param_by_name(&format!("block{b}.chan.fc1.bias")),
                    );
                    let a = relu_forward(&a_pre);
                    let y = affine_forward(
                        &a,
                        self.param_by_name(&format!("block{b}.chan.fc2.weight")),
                        self.param_by_name(&format!("block{b}.chan.fc2.bias")),
                    );
                    for (hv, yv) in h.data_mut().iter_mut().zip(y.data()) {
                        *hv += yv;
                    }
                    blocks.push(MixerBlockCache {
                        ln_tok,
                        z_tok,
                        ln_chan,
                        z_chan,
                        a_pre,
                        a,
                    });
                }
                // Flatten tokens back to (B, 64) for the classifier head.
                let head_in = Tensor::from_vec(
                    &[bsz, MIXER_TOKENS * MIXER_CHANNELS],
                    h.data().to_vec(),
                )?;
                let logits = affine_forward(
                    &head_in,
                    self.param_by_name("head.weight"),
                    self.param_by_name("head.bias"),
                );
                let (loss, dlogits) = softmax_ce(&logits, labels);
                (
                    loss,
                    logits,
                    Cache::Mixer {
                        blocks,
                        head_in,
                    },
                    dlogits,
                )
            }
            Family::QuadBowl => {
                let theta = self.param_by_name("theta");
                let diag = self.quad_diagonal();
                let loss: f64 = theta
                    .data()
                    .iter()
                    .zip(&diag)
                    .map(|(&t, &a)| 0.5 * a * t * t)
                    .sum();
                (loss, Tensor::zeros(&[0, 0]), Cache::Quad, Tensor::zeros(&[0, 0]))
            }
        };
        if !loss.is_finite() {
            self.state = None;
            return Err(Error::Diverged("non-finite loss".into()));
        }
        self.state = Some(ForwardState {
            cache,
            dlogits,
            fingerprint,
        });
        Ok((loss, logits))
    }

    /// Exact gradients for the batch passed to the most recent
    /// [`Model::forward_loss`]. Aligned with `params()`.
    pub fn backward(&self, features: &Tensor, labels: &[usize]) -> Result<Gradients> {
        let state = self
            .state
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("backward without forward".into()))?;
        if state.fingerprint != batch_fingerprint(features, labels) {
            return Err(Error::InvalidInput(
                "stale activation cache: forward_loss ran on a different batch".into(),
            ));
        }
        let mut grads: Vec<Tensor> = self
            .params
            .iter()
            .map(|p| Tensor::zeros(p.value.shape()))
            .collect();
        let idx = |name: &str| -> usize {
            self.params
                .iter()
                .position(|p| p.name == name)
                .expect("parameter name")
        };

        match (&state.cache, self.spec.family) {
            (Cache::Linear { x }, Family::Linear) => {
                let (_, dw, db) =
                    affine_backward(x, self.param_by_name("head.weight"), &state.dlogits);
                grads[idx("head.weight")] = dw;
                grads[idx("head.bias")] = db;
            }
            (Cache::Plain { x, pre, act }, Family::PlainMlp) => {
                let depth = self.spec.depth;
                let head_in = if depth == 0 { x } else { &act[depth - 1] };
                let (mut dh, dw, db) =
                    affine_backward(head_in, self.param_by_name("head.weight"), &state.dlogits);
                grads[idx("head.weight")] = dw;
                grads[idx("head.bias")] = db;
                for b in (0..depth).rev() {
                    let dpre = relu_backward(&pre[b], &dh);
                    let input = if b == 0 { x } else { &act[b - 1] };
                    let (dx, dw, db) = affine_backward(
                        input,
                        self.param_by_name(&format!("block{b}.weight")),
                        &dpre,
                    );
                    grads[idx(&format!("block{b}.weight"))] = dw;
                    grads[idx(&format!("block{b}.bias"))] = db;
                    dh = dx;
                }
            }
            (
                Cache::Res {
                    x,
                    blocks,
                    head_in,
                },
                Family::ResMlp,
            ) => {
                let (mut dh, dw, db) =
                    affine_backward(head_in, self.param_by_name("head.weight"), &state.dlogits);
                grads[idx("head.weight")] = dw;
                grads[idx("head.bias")] = db;
                for b in (0..self.spec.depth).rev() {
                    let cb = &blocks[b];
                    // Residual branch: dh flows both straight through and
                    // into fc2 -> relu -> fc1 -> LN.
                    let (da, dw2, dc2) = affine_backward(
                        &cb.a,
                        self.param_by_name(&format!("block{b}.fc2.weight")),
                        &dh,
                    );
                    grads[idx(&format!("block{b}.fc2.weight"))] = dw2;
                    grads[idx(&format!("block{b}.fc2.bias"))] = dc2;
                    let dpre = relu_backward(&cb.a_pre, &da);
                    let (dz, dw1, dc1) = affine_backward(
                        &cb.z,
                        self.param_by_name(&format!("block{b}.fc1.weight")),
                        &dpre,
                    );
                    grads[idx(&format!("block{b}.fc1.weight"))] = dw1;
                    grads[idx(&format!("block{b}.fc1.bias"))] = dc1;
                    let (dln, dgain, dbias) = layer_norm_backward(
                        &cb.ln,
                        self.param_by_name(&format!("block{b}.ln.gain")),
                        &dz,
                    );
                    grads[idx(&format!("block{b}.ln.gain"))] = dgain;
                    grads[idx(&format!("block{b}.ln.bias"))] = dbias;
                    for (d, &v) in dh.data_mut().iter_mut().zip(dln.data()) {
                        *d += v;
                    }
                }
                let (_, dwe, dbe) =
                    affine_backward(x, self.param_by_name("embed.weight"), &dh);
                grads[idx("embed.weight")] = dwe;
                grads[idx("embed.bias")] = dbe;
            }
            (
                Cache::Mixer {
                    blocks,
                    head_in,
                },
                Family::PatchMixer,
            ) => {
                let bsz = head_in.rows();
                let (dflat, dw, db) =
                    affine_backward(head_in, self.param_by_name("head.weight"), &state.dlogits);
                grads[idx("head.weight")] = dw;
                grads[idx("head.bias")] = db;
                let mut dh = Tensor::from_vec(
                    &[bsz * MIXER_TOKENS, MIXER_CHANNELS],
                    dflat.data().to_vec(),
                )
                .expect("shape");
                for b in (0..self.spec.depth).rev() {
                    let cb = &blocks[b];
                    // channel-mix residual
                    let (da, dw2, dc2) = affine_backward(
                        &cb.a,
                        self.param_by_name(&format!("block{b}.chan.fc2.weight")),
                        &dh,
                    );
                    grads[idx(&format!("block{b}.chan.fc2.weight"))] = dw2;
                    grads[idx(&format!("block{b}.chan.fc2.bias"))] = dc2;
                    let dpre = relu_backward(&cb.a_pre, &da);
                    let (dz, dw1, dc1) = affine_backward(
                        &cb.z_chan,
                        self.param_by_name(&format!("block{b}.chan.fc1.weight")),
                        &dpre,
                    );
                    grads[idx(&format!("block{b}.chan.fc1.weight"))] = dw1;
                    grads[idx(&format!("block{b}.chan.fc1.bias"))] = dc1;
                    let (dln, dgain, dbias) = layer_norm_backward(
                        &cb.ln_chan,
                        self.param_by_name(&format!("block{b}.chan.ln.gain")),
                        &dz,
                    );
                    grads[idx(&format!("block{b}.chan.ln.gain"))] = dgain;
                    grads[idx(&format!("block{b}.chan.ln.bias"))] = dbias;
                    for (d, &v) in dh.data_mut().iter_mut().zip(dln.data()) {
                        *d += v;
                    }
                    // token-mix residual
                    let (dmix, dwt, dbt) = token_mix_backward(
                        &cb.z_tok,
                        self.param_by_name(&format!("block{b}.tok.mix.weight")),
                        &dh,
                        MIXER_TOKENS,
                    );
                    grads[idx(&format!("block{b}.tok.mix.weight"))] = dwt;
                    grads[idx(&format!("block{b}.tok.mix.bias"))] = dbt;
                    let (dln_tok, dgain_t, dbias_t) = layer_norm_backward(
                        &cb.ln_tok,
                        self.param_by_name(&format!("block{b}.tok.ln.gain")),
                        &dmix,
                    );
                    grads[idx(&format!("block{b}.tok.ln.gain"))] = dgain_t;
                    grads[idx(&format!("block{b}.tok.ln.bias"))] = dbias_t;
                    for (d, &v) in dh.data_mut().iter_mut().zip(dln_tok.data()) {
                        *d += v;
                    }
                }
                // Gradient w.r.t. the input image is discarded (inputs are data).
            }
            (Cache::Quad, Family::QuadBowl) => {
                let theta = self.param_by_name("theta");
                let diag = self.quad_diagonal();
                let mut g = Tensor::zeros(&[theta.len()]);
                for ((gv, &t), &a) in g.data_mut().iter_mut().zip(theta.data()).zip(&diag) {
                    *gv = a * t;
                }
                grads[idx("theta")] = g;
            }
            _ => unreachable!("cache/family mismatch"),
        }
        Ok(grads)
    }

    /// Max relative error between analytic and central-difference gradients
    /// over a seeded subsample of at most 512 coordinates.
    pub fn gradcheck(
        &mut self,
        features: &Tensor,
        labels: &[usize],
        h: f64,
        seed: u64,
    ) -> Result<f64> {
        self.gradcheck_impl(features, labels, h, seed, 0.0)
    }

    /// Negative-control hook: perturbs one analytic gradient entry before
    /// comparing, so callers can verify the check actually fails.
    pub fn gradcheck_corrupted(
        &mut self,
        features: &Tensor,
        labels: &[usize],
        h: f64,
        seed: u64,
        corruption: f64,
    ) -> Result<f64> {
        self.gradcheck_impl(features, labels, h, seed, corruption)
    }

    fn gradcheck_impl(
        &mut self,
        features: &Tensor,
        labels: &[usize],
        h: f64,
        seed: u64,
        corruption: f64,
    ) -> Result<f64> {
        assert!(h > 0.0);
        self.forward_loss(features, labels)?;
        let mut grads = self.backward(features, labels)?;
        if corruption != 0.0 {
            for g in grads.iter_mut() {
                for v in g.data_mut() {
                    *v += corruption;
                }
            }
        }

        let total: usize = self.params.iter().map(|p| p.value.len()).sum();
        let mut coords: Vec<(usize, usize)> = Vec::with_capacity(total);
        for (pi, p) in self.params.iter().enumerate() {
            for i in 0..p.value.len() {
                coords.push((pi, i));
            }
        }
        let mut stream = RandomStream::new(seed);
        if coords.len() > 512 {
            stream.shuffle(&mut coords);
            coords.truncate(512);
        }

        // Central differences sit between a rounding floor (small h on small
        // gradients) and curvature truncation (large h near norm/ReLU
        // nonsmoothness), so each coordinate is scored at the best step of a
        // short ladder around h. A wrong analytic gradient fails at every
        // step.
        let steps = [h, 10.0 * h, 100.0 * h, 0.1 * h, 0.01 * h];
        let mut max_rel: f64 = 0.0;
        for (pi, i) in coords {
            let orig = self.params[pi].value.data()[i];
            let analytic = grads[pi].data()[i];
            let mut best = f64::INFINITY;
            for &step in &steps {
                self.params[pi].value.data_mut()[i] = orig + step;
                let (lp, _) = self.forward_loss(features, labels)?;
                self.params[pi].value.data_mut()[i] = orig - step;
                let (lm, _) = self.forward_loss(features, labels)?;
                self.params[pi].value.data_mut()[i] = orig;
                let numeric = (lp - lm) / (2.0 * step);
                let rel =
                    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
                if rel < best {
                    best = rel;
                }
                if best <= 1e-8 {
                    break;
                }
            }
            if best > max_rel {
                max_rel = best;
            }
        }
        // Restore a cache consistent with the unperturbed parameters.
        self.forward_loss(features, labels)?;
        Ok(max_rel)
    }
}
