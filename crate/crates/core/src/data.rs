//! Synthetic datasets: Gaussian blobs, spiral arms, oriented sinusoid
//! patch grids, and the analytic quadratic bowl.
//!
//! Datasets are fully determined by their spec (including the seed) and are
//! immutable once generated; the train/val split is a stratified 80/20
//! deterministic shuffle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{RandomStream, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Blobs,
    Spirals,
    Patchgrid,
    Quadratic,
}

/// Specification of a synthetic dataset.
///
/// `dims` is the feature count for `blobs` and `spirals`; spirals place the
/// two signal coordinates first and fill any remaining dimensions with pure
/// noise. `image_side` is the square image side for `patchgrid`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    #[serde(default = "default_classes")]
    pub classes: usize,
    #[serde(default = "default_samples")]
    pub samples_per_class: usize,
    #[serde(default = "default_dims")]
    pub dims: usize,
    #[serde(default = "default_image_side")]
    pub image_side: usize,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_classes() -> usize {
    2
}
fn default_samples() -> usize {
    100
}
fn default_dims() -> usize {
    2
}
fn default_image_side() -> usize {
    8
}

/// Generated dataset: features, labels, and the stratified split.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub spec: DatasetSpec,
    /// (n, dims) feature matrix; empty for the quadratic kind.
    pub features: Tensor,
    pub labels: Vec<usize>,
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
}

impl Dataset {
    pub fn feature_dims(&self) -> usize {
        match self.spec.kind {
            DatasetKind::Patchgrid => self.spec.image_side * self.spec.image_side,
            DatasetKind::Quadratic => 0,
            _ => self.spec.dims,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    /// Gather a batch of rows by index.
    pub fn gather(&self, idx: &[usize]) -> (Tensor, Vec<usize>) {
        let d = self.feature_dims();
        let mut out = Tensor::zeros(&[idx.len(), d]);
        for (bi, &i) in idx.iter().enumerate() {
            let src = &self.features.data()[i * d..(i + 1) * d];
            out.data_mut()[bi * d..(bi + 1) * d].copy_from_slice(src);
        }
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        (out, labels)
    }
}

pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    if spec.kind != DatasetKind::Quadratic && spec.classes < 2 {
        return Err(Error::Config(format!(
            "classification dataset needs >= 2 classes, got {}",
            spec.classes
        )));
    }
    let mut stream = RandomStream::new(spec.seed);
    let (features, labels) = match spec.kind {
        DatasetKind::Blobs => gen_blobs(spec, &mut stream),
        DatasetKind::Spirals => gen_spirals(spec, &mut stream)?,
        DatasetKind::Patchgrid => gen_patchgrid(spec, &mut stream),
        DatasetKind::Quadratic => (Tensor::zeros(&[0, 0]), Vec::new()),
    };
    let (train_idx, val_idx) = stratified_split(&labels, spec.classes, &mut stream);
    Ok(Dataset {
        spec: spec.clone(),
        features,
        labels,
        train_idx,
        val_idx,
    })
}

fn gen_blobs(spec: &DatasetSpec, stream: &mut RandomStream) -> (Tensor, Vec<usize>) {
    let d = spec.dims;
    let n = spec.classes * spec.samples_per_class;
    let mut centers = vec![0.0; spec.classes * d];
    for v in centers.iter_mut() {
        *v = 3.0 * stream.normal();
    }
    let mut features = Tensor::zeros(&[n, d]);
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    for c in 0..spec.classes {
        for _ in 0..spec.samples_per_class {
            for j in 0..d {
                let v = centers[c * d + j] + spec.noise * stream.normal();
                features.data_mut()[row * d + j] = v;
            }
            labels.push(c);
            row += 1;
        }
    }
    (features, labels)
}

fn gen_spirals(spec: &DatasetSpec, stream: &mut RandomStream) -> Result<(Tensor, Vec<usize>)> {
    let d = spec.dims;
    if d < 2 {
        return Err(Error::Config("spirals need dims >= 2".into()));
    }
    // dims > 2 embeds the planar spiral through a seeded orthonormal frame,
    // spreading the signal over every input dimension. Dead input
    // coordinates would hand the task to non-adaptive rules for free.
    let frame = if d > 2 { Some(orthonormal_pair(d, stream)) } else { None };
    let n = spec.classes * spec.samples_per_class;
    let mut features = Tensor::zeros(&[n, d]);
    let mut labels = Vec::with_capacity(n);
    let m = spec.samples_per_class;
    let mut row = 0;
    for c in 0..spec.classes {
        for s in 0..m {
            // t sweeps [0.1, 1] along the arm.
            let t = if m > 1 {
                0.1 + 0.9 * s as f64 / (m - 1) as f64
            } else {
                0.1
            };
            let phi = 2.0 * std::f64::consts::PI * (1.75 * t + c as f64 / spec.classes as f64)
                + spec.noise * stream.normal();
            let r = t;
            let (p0, p1) = (r * phi.cos(), r * phi.sin());
            match &frame {
                None => {
                    features.data_mut()[row * d] = p0;
                    features.data_mut()[row * d + 1] = p1;
                }
                Some((u, v)) => {
                    for j in 0..d {
                        features.data_mut()[row * d + j] = p0 * u[j] + p1 * v[j];
                    }
                }
            }
            labels.push(c);
            row += 1;
        }
    }
    Ok((features, labels))
}

/// Two orthonormal d-vectors from seeded Gaussians (Gram-Schmidt).
fn orthonormal_pair(d: usize, stream: &mut RandomStream) -> (Vec<f64>, Vec<f64>) {
    let mut u: Vec<f64> = (0..d).map(|_| stream.normal()).collect();
    let un = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in u.iter_mut() {
        *x /= un;
    }
    let mut v: Vec<f64> = (0..d).map(|_| stream.normal()).collect();
    let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    for (x, &uj) in v.iter_mut().zip(&u) {
        *x -= dot * uj;
    }
    let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= vn;
    }
    (u, v)
}

fn gen_patchgrid(spec: &DatasetSpec, stream: &mut RandomStream) -> (Tensor, Vec<usize>) {
    let side = spec.image_side;
    let d = side * side;
    let n = spec.classes * spec.samples_per_class;
    // One unit direction and frequency per class.
    let mut dirs = Vec::with_capacity(spec.classes);
    for _ in 0..spec.classes {
        let psi = 2.0 * std::f64::consts::PI * stream.uniform();
        dirs.push((psi.cos(), psi.sin()));
    }
    let mut features = Tensor::zeros(&[n, d]);
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    for c in 0..spec.classes {
        let (u, v) = dirs[c];
        let freq = 1.0 + c as f64;
        for _ in 0..spec.samples_per_class {
            for y in 0..side {
                for x in 0..side {
                    let phase =
                        2.0 * std::f64::consts::PI * freq * (x as f64 * u + y as f64 * v)
                            / side as f64;
                    features.data_mut()[row * d + y * side + x] =
                        phase.sin() + spec.noise * stream.normal();
                }
            }
            labels.push(c);
            row += 1;
        }
    }
    (features, labels)
}

/// 80/20 split per class; each class contributes floor(4n/5) training rows.
fn stratified_split(
    labels: &[usize],
    classes: usize,
    stream: &mut RandomStream,
) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for c in 0..classes {
        let mut idx: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == c)
            .map(|(i, _)| i)
            .collect();
        stream.shuffle(&mut idx);
        let n_train = idx.len() * 4 / 5;
        train.extend_from_slice(&idx[..n_train]);
        val.extend_from_slice(&idx[n_train..]);
    }
    (train, val)
}
