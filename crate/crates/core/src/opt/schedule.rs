//! Cosine learning-rate decay with linear warmup.

/// Scheduled rate for `epoch` in `0..total`: linear warmup for `warmup`
/// epochs, then lr0 * (1 + cos(pi * progress)) / 2 over the remainder.
pub fn cosine_lr(lr0: f64, epoch: usize, total: usize, warmup: usize) -> f64 {
    debug_assert!(epoch < total);
    if epoch < warmup {
        return lr0 * (epoch + 1) as f64 / warmup as f64;
    }
    let span = (total - warmup).max(1);
    let progress = (epoch - warmup) as f64 / span as f64;
    lr0 * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warmup_endpoint_hits_lr0() {
        let lr = cosine_lr(3e-3, 5, 100, 5);
        assert!((lr - 3e-3).abs() < 1e-18);
    }

    #[test]
    fn halfway_is_half_without_warmup() {
        let lr = cosine_lr(1e-3, 50, 100, 0);
        assert!((lr - 5e-4).abs() < 1e-12);
    }

    #[test]
    fn final_epoch_is_near_zero() {
        let lr = cosine_lr(1e-3, 99, 100, 0);
        assert!(lr < 1e-3 * 0.001);
        assert!(lr > 0.0);
    }

    #[test]
    fn warmup_ramps_linearly() {
        assert!((cosine_lr(1.0, 0, 10, 4) - 0.25).abs() < 1e-15);
        assert!((cosine_lr(1.0, 1, 10, 4) - 0.5).abs() < 1e-15);
        assert!((cosine_lr(1.0, 3, 10, 4) - 1.0).abs() < 1e-15);
    }
}
