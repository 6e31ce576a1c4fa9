//! Learned-parameter quality indicators, computed per layer: power-law tail
//! exponent of the weight spectrum, value entropy, Euclidean norm, and the
//! top-k spectral energy ratio.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::checkpoint::read_checkpoint;
use crate::math::{sym_eigenvalues, Tensor};

/// Eigenvalues of W^T W (descending, clamped at zero) for one weight matrix.
#[derive(Debug, Clone)]
pub struct Esd {
    pub source: String,
    pub eigenvalues: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
}

/// Spectrum of the weight Gram matrix. Higher-rank tensors are viewed as
/// (first extent, everything else); the smaller Gram side is used since both
/// share the nonzero spectrum.
pub fn esd(weight: &Tensor) -> Result<Esd> {
    esd_named(weight, "")
}

pub fn esd_named(weight: &Tensor, name: &str) -> Result<Esd> {
    let (rows, cols) = weight.as_matrix_view()?;
    let side = rows.min(cols);
    let mut gram = Tensor::zeros(&[side, side]);
    let data = weight.data();
    if cols <= rows {
        // W^T W
        for i in 0..side {
            for j in i..side {
                let mut s = 0.0;
                for r in 0..rows {
                    s += data[r * cols + i] * data[r * cols + j];
                }
                gram.set2(i, j, s);
                gram.set2(j, i, s);
            }
        }
    } else {
        // W W^T has the same nonzero spectrum.
        for i in 0..side {
            for j in i..side {
                let mut s = 0.0;
                for c in 0..cols {
                    s += data[i * cols + c] * data[j * cols + c];
                }
                gram.set2(i, j, s);
                gram.set2(j, i, s);
            }
        }
    }
    let mut eigenvalues = sym_eigenvalues(&gram)?;
    for e in eigenvalues.iter_mut() {
        if *e < 0.0 {
            debug_assert!(*e >= -1e-10, "Gram eigenvalue {e} below tolerance");
            *e = 0.0;
        }
    }
    Ok(Esd {
        source: name.to_string(),
        eigenvalues,
        rows,
        cols,
    })
}

/// Minimum tail size for the power-law fit.
pub const MIN_TAIL: usize = 10;

/// Hill maximum-likelihood exponent for a fixed tail cutoff:
/// alpha = 1 + n / sum(ln(lambda_i / xmin)) over lambda_i >= xmin.
pub fn hill_alpha(eigenvalues: &[f64], xmin: f64) -> Result<f64> {
    let tail: Vec<f64> = eigenvalues.iter().cloned().filter(|&l| l >= xmin).collect();
    if tail.is_empty() || xmin <= 0.0 {
        return Err(Error::InsufficientSpectrum("empty tail".into()));
    }
    let log_sum: f64 = tail.iter().map(|&l| (l / xmin).ln()).sum();
    if log_sum <= 0.0 {
        return Err(Error::InsufficientSpectrum(
            "tail is degenerate at xmin".into(),
        ));
    }
    Ok(1.0 + tail.len() as f64 / log_sum)
}

/// Power-law tail fit of a spectrum: for every candidate xmin with at least
/// `MIN_TAIL` points above it, fit alpha by the Hill estimator and keep the
/// xmin minimizing the Kolmogorov-Smirnov distance between the empirical
/// tail and the fitted law. Returns (alpha, xmin).
pub fn pl_alpha(esd: &Esd) -> Result<(f64, f64)> {
    let mut positive: Vec<f64> = esd
        .eigenvalues
        .iter()
        .cloned()
        .filter(|&l| l > 0.0)
        .collect();
    if positive.len() < MIN_TAIL {
        return Err(Error::InsufficientSpectrum(format!(
            "{} positive eigenvalues, need {}",
            positive.len(),
            MIN_TAIL
        )));
    }
    positive.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalue"));

    let mut best: Option<(f64, f64, f64)> = None; // (ks, alpha, xmin)
    for start in 0..=(positive.len() - MIN_TAIL) {
        let xmin = positive[start];
        if start > 0 && xmin == positive[start - 1] {
            continue; // duplicate cutoff
        }
        let tail = &positive[start..];
        let n = tail.len() as f64;
        let log_sum: f64 = tail.iter().map(|&l| (l / xmin).ln()).sum();
        if log_sum <= 0.0 {
            continue;
        }
        let alpha = 1.0 + n / log_sum;
        // KS distance against the fitted CDF F(l) = 1 - (l / xmin)^(1-alpha).
        let mut ks = 0.0f64;
        for (i, &l) in tail.iter().enumerate() {
            let f = 1.0 - (l / xmin).powf(1.0 - alpha);
            let hi = (i + 1) as f64 / n;
            let lo = i as f64 / n;
            ks = ks.max((f - hi).abs()).max((f - lo).abs());
        }
        let better = match best {
            None => true,
            Some((bks, _, _)) => ks < bks,
        };
        if better {
            best = Some((ks, alpha, xmin));
        }
    }
    best.map(|(_, alpha, xmin)| (alpha, xmin))
        .ok_or_else(|| Error::InsufficientSpectrum("no viable tail cutoff".into()))
}

/// Histogram entropy (natural log) over `bins` equal-width bins spanning
/// [min, max]. A constant tensor occupies one bin and has zero entropy.
pub fn entropy(tensor: &Tensor, bins: usize) -> Result<f64> {
    if tensor.is_empty() {
        return Err(Error::InvalidInput("empty tensor".into()));
    }
    if bins < 2 {
        return Err(Error::InvalidInput("need at least 2 bins".into()));
    }
    let data = tensor.data();
    let min = data.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut counts = vec![0usize; bins];
    if min == max {
        counts[0] = data.len();
    } else {
        let scale = bins as f64 / (max - min);
        for &v in data {
            let idx = (((v - min) * scale) as usize).min(bins - 1);
            counts[idx] += 1;
        }
    }
    let total = data.len() as f64;
    let mut h = 0.0;
    for &c in &counts {
        if c > 0 {
            let p = c as f64 / total;
            h -= p * p.ln();
        }
    }
    Ok(h)
}

pub fn l2_norm(tensor: &Tensor) -> f64 {
    tensor.l2_norm()
}

/// Fraction of spectral energy in the k largest eigenvalues. A zero matrix
/// yields 0 with `degenerate` set.
pub struct PcaRatio {
    pub ratio: f64,
    pub k: usize,
    pub degenerate: bool,
}

pub fn pca_topk_ratio(esd: &Esd, k: usize) -> Result<PcaRatio> {
    if k < 1 || k > esd.eigenvalues.len() {
        return Err(Error::InvalidInput(format!(
            "k={k} outside spectrum of size {}",
            esd.eigenvalues.len()
        )));
    }
    let total: f64 = esd.eigenvalues.iter().sum();
    if total <= 0.0 {
        return Ok(PcaRatio {
            ratio: 0.0,
            k,
            degenerate: true,
        });
    }
    let top: f64 = esd.eigenvalues[..k].iter().sum();
    Ok(PcaRatio {
        ratio: top / total,
        k,
        degenerate: false,
    })
}

/// How k is chosen per layer in sweeps.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum KRule {
    /// k = max(1, round(fraction * spectrum size)).
    Fraction(f64),
    Fixed(usize),
}

impl Default for KRule {
    fn default() -> Self {
        KRule::Fraction(0.05)
    }
}

impl KRule {
    pub fn k_for(&self, spectrum: usize) -> usize {
        match self {
            KRule::Fraction(f) => ((f * spectrum as f64).round() as usize).clamp(1, spectrum),
            KRule::Fixed(k) => (*k).clamp(1, spectrum),
        }
    }
}

/// One ridge-plot row: the four indicators for one parameter tensor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub layer_index: usize,
    pub layer_name: String,
    /// None when the spectrum is too small for a tail fit.
    pub alpha: Option<f64>,
    pub xmin: Option<f64>,
    pub entropy: f64,
    pub l2norm: f64,
    pub pca_k: Option<usize>,
    pub pca_ratio: Option<f64>,
}

/// Sweep a checkpoint: one record per parameter tensor in layer order.
/// Spectral indicators (alpha, PCA) apply to rank>=2 weight tensors only;
/// entropy and the norm cover every tensor.
pub fn layer_sweep(path: &Path, bins: usize, k_rule: KRule) -> Result<Vec<DiagnosticsRecord>> {
    let (tensors, _meta) = read_checkpoint(path)?;
    let mut records = Vec::with_capacity(tensors.len());
    for (i, (name, t)) in tensors.iter().enumerate() {
        let mut rec = DiagnosticsRecord {
            layer_index: i,
            layer_name: name.clone(),
            alpha: None,
            xmin: None,
            entropy: entropy(t, bins)?,
            l2norm: l2_norm(t),
            pca_k: None,
            pca_ratio: None,
        };
        if t.shape().len() >= 2 && t.shape().iter().all(|&e| e > 0) {
            let spectrum = esd_named(t, name)?;
            if let Ok((alpha, xmin)) = pl_alpha(&spectrum) {
                rec.alpha = Some(alpha);
                rec.xmin = Some(xmin);
            }
            let k = k_rule.k_for(spectrum.eigenvalues.len());
            let pca = pca_topk_ratio(&spectrum, k)?;
            rec.pca_k = Some(k);
            rec.pca_ratio = Some(pca.ratio);
        }
        records.push(rec);
    }
    Ok(records)
}

/// Ridge CSV: `layer_index,layer_name,alpha,xmin,entropy,l2norm,pca_k,pca_ratio`,
/// one row per layer, empty fields for unavailable indicators.
pub fn write_ridge_csv<W: std::io::Write>(w: &mut W, records: &[DiagnosticsRecord]) -> Result<()> {
    writeln!(w, "layer_index,layer_name,alpha,xmin,entropy,l2norm,pca_k,pca_ratio")?;
    for r in records {
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.layer_index,
            r.layer_name,
            opt(r.alpha),
            opt(r.xmin),
            r.entropy,
            r.l2norm,
            r.pca_k.map(|k| k.to_string()).unwrap_or_default(),
            opt(r.pca_ratio),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_matrix(values: &[f64]) -> Tensor {
        let n = values.len();
        let mut t = Tensor::zeros(&[n, n]);
        for (i, &v) in values.iter().enumerate() {
            t.set2(i, i, v);
        }
        t
    }

    #[test]
    fn identity_spectrum_is_flat() {
        let spec = esd(&diag_matrix(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(spec.eigenvalues, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_weights_square_into_the_spectrum() {
        let spec = esd(&diag_matrix(&[2.0, 1.0])).unwrap();
        assert!((spec.eigenvalues[0] - 4.0).abs() < 1e-12);
        assert!((spec.eigenvalues[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spectrum_sums_to_frobenius_sq() {
        let t = Tensor::from_vec(&[3, 2], vec![0.5, -1.0, 2.0, 0.25, -0.75, 1.5]).unwrap();
        let spec = esd(&t).unwrap();
        let sum: f64 = spec.eigenvalues.iter().sum();
        assert!((sum - t.frobenius_sq()).abs() <= 1e-9 * t.frobenius_sq());
        // Wide orientation shares the nonzero spectrum.
        let wide = Tensor::from_vec(&[2, 3], vec![0.5, -1.0, 2.0, 0.25, -0.75, 1.5]).unwrap();
        let spec_w = esd(&wide).unwrap();
        let sum_w: f64 = spec_w.eigenvalues.iter().sum();
        assert!((sum_w - wide.frobenius_sq()).abs() <= 1e-9 * wide.frobenius_sq());
    }

    #[test]
    fn hill_formula_hand_oracle() {
        // tail {1, e, e^2} at xmin 1: alpha = 1 + 3 / (0 + 1 + 2) = 2.
        let eig = [1.0, std::f64::consts::E, std::f64::consts::E.powi(2)];
        let alpha = hill_alpha(&eig, 1.0).unwrap();
        assert!((alpha - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pl_alpha_scale_invariant() {
        // Deterministic synthetic tail spanning two decades.
        let lambda: Vec<f64> = (1..=200).map(|i| 1.0 / (i as f64 / 200.0)).collect();
        let base = Esd {
            source: String::new(),
            eigenvalues: lambda.clone(),
            rows: 200,
            cols: 200,
        };
        let scaled = Esd {
            source: String::new(),
            eigenvalues: lambda.iter().map(|l| l * 37.5).collect(),
            rows: 200,
            cols: 200,
        };
        let (a1, _) = pl_alpha(&base).unwrap();
        let (a2, _) = pl_alpha(&scaled).unwrap();
        assert!((a1 - a2).abs() < 1e-9, "a1={a1} a2={a2}");
    }

    #[test]
    fn too_small_spectrum_is_rejected() {
        let spec = Esd {
            source: String::new(),
            eigenvalues: vec![1.0; 5],
            rows: 5,
            cols: 5,
        };
        assert!(matches!(
            pl_alpha(&spec),
            Err(Error::InsufficientSpectrum(_))
        ));
    }

    #[test]
    fn entropy_constant_tensor_is_zero() {
        let t = Tensor::filled(&[4, 4], 2.5);
        assert_eq!(entropy(&t, 256).unwrap(), 0.0);
    }

    #[test]
    fn entropy_two_even_bins() {
        let t = Tensor::from_vec(&[4], vec![1.0, 1.0, 2.0, 2.0]).unwrap();
        let h = entropy(&t, 2).unwrap();
        assert!((h - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_uniform_occupancy_hits_ln_bins() {
        let t = Tensor::from_vec(&[256], (0..256).map(|i| i as f64).collect()).unwrap();
        let h = entropy(&t, 256).unwrap();
        assert!((h - 256f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_invariant_under_affine_maps() {
        let t = Tensor::from_vec(&[6], vec![0.1, 0.4, 0.4, 0.9, -0.3, 0.75]).unwrap();
        let mapped = Tensor::from_vec(
            &[6],
            t.data().iter().map(|v| -3.0 * v + 11.0).collect(),
        )
        .unwrap();
        let h1 = entropy(&t, 64).unwrap();
        let h2 = entropy(&mapped, 64).unwrap();
        assert!((h1 - h2).abs() < 1e-12);
    }

    #[test]
    fn l2_norm_pythagorean() {
        let t = Tensor::from_vec(&[2], vec![3.0, 4.0]).unwrap();
        assert_eq!(l2_norm(&t), 5.0);
        assert_eq!(l2_norm(&Tensor::zeros(&[7])), 0.0);
        let scaled = Tensor::from_vec(&[2], vec![-6.0, -8.0]).unwrap();
        assert_eq!(l2_norm(&scaled), 10.0);
    }

    #[test]
    fn pca_identity_is_k_over_n() {
        let spec = esd(&diag_matrix(&[1.0; 8])).unwrap();
        for k in 1..=8 {
            let r = pca_topk_ratio(&spec, k).unwrap();
            assert!((r.ratio - k as f64 / 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pca_ratio_fixture_and_monotonicity() {
        let spec = esd(&diag_matrix(&[2.0, 1.0])).unwrap();
        let r = pca_topk_ratio(&spec, 1).unwrap();
        assert!((r.ratio - 0.8).abs() < 1e-12);
        let r2 = pca_topk_ratio(&spec, 2).unwrap();
        assert!(r2.ratio >= r.ratio);
        assert!((r2.ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_one_matrix_concentrates_energy() {
        let mut t = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            for j in 0..3 {
                t.set2(i, j, (i + 1) as f64 * (j + 1) as f64);
            }
        }
        let spec = esd(&t).unwrap();
        let r = pca_topk_ratio(&spec, 1).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_matrix_is_degenerate() {
        let spec = esd(&Tensor::zeros(&[4, 4])).unwrap();
        let r = pca_topk_ratio(&spec, 1).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.ratio, 0.0);
    }

    #[test]
    fn k_rule_default_is_five_percent() {
        let rule = KRule::default();
        assert_eq!(rule.k_for(100), 5);
        assert_eq!(rule.k_for(10), 1);
        assert_eq!(rule.k_for(3), 1);
    }
}
