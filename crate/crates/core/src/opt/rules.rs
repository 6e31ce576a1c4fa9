//! The canonical per-family update rules.
//!
//! Conventions shared by every rule:
//! - `t` is the 1-based step number (bias corrections use it directly).
//! - Coupled weight decay adds `wd * theta` to the gradient before any
//!   moment update; decoupled decay shrinks `theta` by `lr * wd * theta`
//!   (computed on the pre-step parameters) alongside the rule's update.
//! - Each parameter tensor is one layer for the layer-wise rules.

use super::{HyperParams, OptFamily, ParamBufs};

#[allow(clippy::too_many_arguments)]
pub(crate) fn apply(
    family: OptFamily,
    hp: &HyperParams,
    lr: f64,
    t: u64,
    theta: &mut [f64],
    grad: &[f64],
    bufs: &mut ParamBufs,
    geff_buf: &mut Vec<f64>,
    work_buf: &mut Vec<f64>,
) {
    let wd = hp.weight_decay;
    let coupled = !hp.decoupled_wd && wd != 0.0;
    let g: &[f64] = if coupled {
        geff_buf.clear();
        geff_buf.extend(grad.iter().zip(theta.iter()).map(|(&g, &th)| g + wd * th));
        geff_buf
    } else {
        grad
    };
    // Decay handled outside the gradient pipeline (zero in coupled mode).
    let dec = if hp.decoupled_wd { wd } else { 0.0 };

    match family {
        OptFamily::SgdM => {
            let mu = hp.momentum;
            for i in 0..theta.len() {
                bufs.m[i] = mu * bufs.m[i] + g[i];
                theta[i] -= lr * bufs.m[i] + lr * dec * theta[i];
            }
        }
        OptFamily::Sgdp => {
            let mu = hp.momentum;
            for i in 0..theta.len() {
                bufs.m[i] = mu * bufs.m[i] + g[i];
            }
            project_if_scale_invariant(theta, g, &mut bufs.m, hp.extras.proj_delta);
            for i in 0..theta.len() {
                theta[i] -= lr * bufs.m[i] + lr * dec * theta[i];
            }
        }
        OptFamily::Lion => {
            let (b1, b2) = (hp.betas[0], hp.betas[1]);
            for i in 0..theta.len() {
                let c = b1 * bufs.m[i] + (1.0 - b1) * g[i];
                let u = if c > 0.0 {
                    1.0
                } else if c < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                theta[i] -= lr * (u + dec * theta[i]);
                bufs.m[i] = b2 * bufs.m[i] + (1.0 - b2) * g[i];
            }
        }
        OptFamily::Adam | OptFamily::AdamW => {
            let (b1, b2) = (hp.betas[0], hp.betas[1]);
            let bc1 = 1.0 - b1.powi(t as i32);
            let bc2 = 1.0 - b2.powi(t as i32);
            for i in 0..theta.len() {
                bufs.m[i] = b1 * bufs.m[i] + (1.0 - b1) * g[i];
                bufs.v[i] = b2 * bufs.v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = bufs.m[i] / bc1;
                let v_hat = bufs.v[i] / bc2;
                theta[i] -= lr * (m_hat / (v_hat.sqrt() + hp.eps) + dec * theta[i]);
            }
        }
        OptFamily::Adamax => {
            let (b1, b2) = (hp.betas[0], hp.betas[1]);
            let bc1 = 1.0 - b1.powi(t as i32);
            for i in 0..theta.len() {
                bufs.m[i] = b1 * bufs.m[i] + (1.0 - b1) * g[i];
                bufs.v[i] = (b2 * bufs.v[i]).max(g[i].abs());
                theta[i] -= lr * ((bufs.m[i] / bc1) / (bufs.v[i] + hp.eps) + dec * theta[i]);
            }
        }
        OptFamily::NAdam => {
            let (b1, b2) = (hp.betas[0], hp.betas[1]);
            let bc1_next = 1.0 - b1.powi(t as i32 + 1);
            let bc1 = 1.0 - b1.powi(t as i32);
            let bc2 = 1.0 - b2.powi(t as i32);
            for i in 0..theta.len() {
                bufs.m[i] = b1 * bufs.m[i] + (1.0 - b1) * g[i];
                bufs.v[i] = b2 * bufs.v[i] + (1.0 - b2) * g[i] * g[i];
                // Nesterov lookahead on the bias-corrected first moment.
                let m_bar = b1 * bufs.m[i] / bc1_next + (1.0 - b1) * g[i] / bc1;
                let v_hat = bufs.v[i] / bc2;
                theta[i] -= lr * (m_bar / (v_hat.sqrt() + hp.eps) + dec * theta[i]);
            }
        }
        OptFamily::Lamb => {
            let (b1, b2) = (hp.betas[0], hp.betas[1]);
            let bc1 = 1.0 - b1.powi(t as i32);
            let bc2 = 1.0 - b2.powi(t as i32);
            work_buf.clear();
            work_buf.resize(theta.len(), 0.0);
            for i in 0..theta.len() {
                bufs.m[i] = b1 * bufs.m[i] + (1.0 - b1) * g[i];
                bufs.v[i] = b2 * bufs.v[i] + (1.0 - b2) * g[i] * g[i];
                let r = (bufs.m[i] / bc1) / ((bufs.v[i] / bc2).sqrt() + hp.eps);
                work_buf[i] = r + dec * theta[i];
            }
            let theta_norm = norm(theta);
            let update_norm = norm(work_buf);
            let ratio = if theta_norm == 0.0 || update_norm == 0.0 {
                1.0
            } else {
                theta_norm.min(hp.extras.trust_clip) / update_norm
            };
            for i in 0..theta.len() {
                theta[i] -= lr * ratio * work_buf[i];
            }
        }
        OptFamily::RAdam => {
            let (b1, b2) = (hp.betas[0], hp.betas[1]);
            let bc1 = 1.0 - b1.powi(t as i32);
            let bc2 = 1.0 - b2.powi(t as i32);
            let rho_inf = 2.0 / (1.0 - b2) - 1.0;
            let rho_t = rho_inf - 2.0 * t as f64 * b2.powi(t as i32) / bc2;
            let rect = if rho_t > 4.0 {
                Some(
                    (((rho_t - 4.0) * (rho_t - 2.0) * rho_inf)
                        / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t))
                        .sqrt(),
                )
            } else {
                None
            };
            for i in 0..theta.len() {
                bufs.m[i] = b1 * bufs.m[i] + (1.0 - b1) * g[i];
                bufs.v[i] = b2 * bufs.v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = bufs.m[i] / bc1;
                let step = match rect {
                    Some(r) => r * m_hat / ((bufs.v[i] / bc2).sqrt() + hp.eps),
                    // Variance not yet tractable: un-adapted momentum step.
                    None => m_hat,
                };
                theta[i] -= lr * (step + dec * theta[i]);
            }
        }
        OptFamily::AdamP => {
            let (b1, b2) = (hp.betas[0], hp.betas[1]);
            let bc1 = 1.0 - b1.powi(t as i32);
            let bc2 = 1.0 - b2.powi(t as i32);
            work_buf.clear();
            work_buf.resize(theta.len(), 0.0);
            for i in 0..theta.len() {
                bufs.m[i] = b1 * bufs.m[i] + (1.0 - b1) * g[i];
                bufs.v[i] = b2 * bufs.v[i] + (1.0 - b2) * g[i] * g[i];
                work_buf[i] = (bufs.m[i] / bc1) / ((bufs.v[i] / bc2).sqrt() + hp.eps);
            }
            project_if_scale_invariant(theta, g, work_buf, hp.extras.proj_delta);
            for i in 0..theta.len() {
                theta[i] -= lr * (work_buf[i] + dec * theta[i]);
            }
        }
        OptFamily::Adan => {
            let (b1, b2, b3) = (hp.betas[0], hp.betas[1], hp.betas[2]);
            let c1 = 1.0 - b1.powi(t as i32);
            let c2 = 1.0 - b2.powi(t as i32);
            let c3 = 1.0 - b3.powi(t as i32);
            for i in 0..theta.len() {
                let diff = if t == 1 { 0.0 } else { g[i] - bufs.extra2[i] };
                bufs.m[i] = b1 * bufs.m[i] + (1.0 - b1) * g[i];
                bufs.v[i] = b2 * bufs.v[i] + (1.0 - b2) * diff;
                let nterm = g[i] + b2 * diff;
                bufs.extra[i] = b3 * bufs.extra[i] + (1.0 - b3) * nterm * nterm;
                let m_hat = bufs.m[i] / c1;
                let v_hat = bufs.v[i] / c2;
                let n_hat = bufs.extra[i] / c3;
                let step = lr * (m_hat + b2 * v_hat) / (n_hat.sqrt() + hp.eps);
                theta[i] = (theta[i] - step) / (1.0 + lr * dec);
                bufs.extra2[i] = g[i];
            }
        }
        OptFamily::AdaBound => {
            let (b1, b2) = (hp.betas[0], hp.betas[1]);
            let bc1 = 1.0 - b1.powi(t as i32);
            let bc2 = 1.0 - b2.powi(t as i32);
            let final_lr = hp.extras.final_lr_ratio * lr;
            let gb = hp.extras.gamma_bound;
            let lower = final_lr * (1.0 - 1.0 / (gb * t as f64 + 1.0));
            let upper = final_lr * (1.0 + 1.0 / (gb * t as f64));
            for i in 0..theta.len() {
                bufs.m[i] = b1 * bufs.m[i] + (1.0 - b1) * g[i];
                bufs.v[i] = b2 * bufs.v[i] + (1.0 - b2) * g[i] * g[i];
                let rate = (lr / ((bufs.v[i] / bc2).sqrt() + hp.eps)).clamp(lower, upper);
                theta[i] -= rate * (bufs.m[i] / bc1) + lr * dec * theta[i];
            }
        }
        OptFamily::Lars => {
            let mu = hp.momentum;
            let theta_norm = norm(theta);
            // Trust ratio from the raw gradient norm, plus wd * ||theta|| when
            // decay rides the gradient pipeline.
            let denom = norm(grad) + if coupled { wd * theta_norm } else { 0.0 };
            let ratio = if theta_norm == 0.0 || denom == 0.0 {
                1.0
            } else {
                theta_norm / denom
            };
            for i in 0..theta.len() {
                bufs.m[i] = mu * bufs.m[i] + g[i];
                theta[i] -= lr * ratio * bufs.m[i] + lr * dec * theta[i];
            }
        }
        OptFamily::AdaFactor => {
            let b2 = hp.betas[1];
            let bc2 = 1.0 - b2.powi(t as i32);
            const EPS1: f64 = 1e-30;
            work_buf.clear();
            work_buf.resize(theta.len(), 0.0);
            if !bufs.extra.is_empty() {
                // Factored second moment: row/col sums of g^2 + eps1, with
                // the rank-1 reconstruction R C^T / sum(R).
                let rows = bufs.extra.len();
                let cols = bufs.extra2.len();
                for r in 0..rows {
                    let mut s = 0.0;
                    for c in 0..cols {
                        let gg = g[r * cols + c];
                        s += gg * gg + EPS1;
                    }
                    bufs.extra[r] = b2 * bufs.extra[r] + (1.0 - b2) * s;
                }
                for c in 0..cols {
                    let mut s = 0.0;
                    for r in 0..rows {
                        let gg = g[r * cols + c];
                        s += gg * gg + EPS1;
                    }
                    bufs.extra2[c] = b2 * bufs.extra2[c] + (1.0 - b2) * s;
                }
                let row_total: f64 = bufs.extra.iter().sum();
                for r in 0..rows {
                    for c in 0..cols {
                        let v_hat =
                            (bufs.extra[r] * bufs.extra2[c] / row_total).max(EPS1) / bc2;
                        work_buf[r * cols + c] = g[r * cols + c] / v_hat.sqrt();
                    }
                }
            } else {
                for i in 0..theta.len() {
                    bufs.v[i] = b2 * bufs.v[i] + (1.0 - b2) * (g[i] * g[i] + EPS1);
                    work_buf[i] = g[i] / (bufs.v[i] / bc2).sqrt();
                }
            }
            // Clip the update to unit RMS.
            let rms =
                (work_buf.iter().map(|u| u * u).sum::<f64>() / theta.len().max(1) as f64).sqrt();
            let clip = rms.max(1.0);
            for i in 0..theta.len() {
                theta[i] -= lr * (work_buf[i] / clip + dec * theta[i]);
            }
        }
        OptFamily::AdaBelief => {
            let (b1, b2) = (hp.betas[0], hp.betas[1]);
            let bc1 = 1.0 - b1.powi(t as i32);
            let bc2 = 1.0 - b2.powi(t as i32);
            for i in 0..theta.len() {
                bufs.m[i] = b1 * bufs.m[i] + (1.0 - b1) * g[i];
                let belief = g[i] - bufs.m[i];
                bufs.v[i] = b2 * bufs.v[i] + (1.0 - b2) * belief * belief + hp.eps;
                let m_hat = bufs.m[i] / bc1;
                let v_hat = bufs.v[i] / bc2;
                theta[i] -= lr * (m_hat / (v_hat.sqrt() + hp.eps) + dec * theta[i]);
            }
        }
        OptFamily::NovoGrad => {
            let (b1, b2) = (hp.betas[0], hp.betas[1]);
            let gnorm_sq = g.iter().map(|x| x * x).sum::<f64>();
            if bufs.initialized {
                bufs.scalar = b2 * bufs.scalar + (1.0 - b2) * gnorm_sq;
            } else {
                // First step seeds the per-layer second moment directly.
                bufs.scalar = gnorm_sq;
                bufs.initialized = true;
            }
            let denom = (bufs.scalar + hp.eps).sqrt();
            for i in 0..theta.len() {
                bufs.m[i] = b1 * bufs.m[i] + (g[i] / denom + dec * theta[i]);
                theta[i] -= lr * bufs.m[i];
            }
        }
        OptFamily::Sophia => {
            let b1 = hp.betas[0];
            let gs = hp.extras.sophia_gamma;
            for i in 0..theta.len() {
                bufs.m[i] = b1 * bufs.m[i] + (1.0 - b1) * g[i];
                let denom = (gs * bufs.v[i]).max(hp.eps);
                let u = (bufs.m[i] / denom).clamp(-1.0, 1.0);
                theta[i] -= lr * (u + dec * theta[i]);
            }
        }
        OptFamily::AdaGrad => {
            for i in 0..theta.len() {
                bufs.v[i] += g[i] * g[i];
                theta[i] -= lr * (g[i] / (bufs.v[i].sqrt() + hp.eps) + dec * theta[i]);
            }
        }
        OptFamily::AdaDelta => {
            let rho = hp.betas[1];
            for i in 0..theta.len() {
                bufs.v[i] = rho * bufs.v[i] + (1.0 - rho) * g[i] * g[i];
                let dx = -((bufs.extra[i] + hp.eps).sqrt() / (bufs.v[i] + hp.eps).sqrt()) * g[i];
                bufs.extra[i] = rho * bufs.extra[i] + (1.0 - rho) * dx * dx;
                theta[i] += lr * dx - lr * dec * theta[i];
            }
        }
        OptFamily::RmsProp => {
            let rho = hp.betas[1];
            for i in 0..theta.len() {
                bufs.v[i] = rho * bufs.v[i] + (1.0 - rho) * g[i] * g[i];
                theta[i] -= lr * (g[i] / (bufs.v[i].sqrt() + hp.eps) + dec * theta[i]);
            }
        }
    }
}

fn norm(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scale-invariance test shared by SGDP and AdamP: when the parameter layer
/// looks scale-invariant (cos(theta, g) below delta / sqrt(dim)), remove the
/// radial component of `direction`.
fn project_if_scale_invariant(theta: &[f64], g: &[f64], direction: &mut [f64], delta: f64) {
    let tn = norm(theta);
    let gn = norm(g);
    if tn == 0.0 || gn == 0.0 {
        return;
    }
    let cos = theta.iter().zip(g).map(|(&a, &b)| a * b).sum::<f64>().abs() / (tn * gn);
    if cos < delta / (theta.len() as f64).sqrt() {
        let dot: f64 = theta.iter().zip(direction.iter()).map(|(&a, &b)| a * b).sum();
        let scale = dot / (tn * tn);
        for (d, &th) in direction.iter_mut().zip(theta) {
            *d -= scale * th;
        }
    }
}
