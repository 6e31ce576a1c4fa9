//! Acceptance gate: one test per criterion, each printing a PASS line with
//! the measured quantity (run with `--nocapture` to see them all).
//!
//! 1. gradient fidelity          5. ranking reproduction
//! 2. optimizer correctness      6. diagnostics accuracy
//! 3. failure-rule reproduction  7. desk benchmark regression
//! 4. variation metric           8. determinism and round-trips

use std::time::Instant;

use optbench::analysis::{
    detect_bocb, hyper_variation, rank_optimizers, stability_stats, VariationMode,
};
use optbench::data::{generate_dataset, DatasetKind, DatasetSpec};
use optbench::diagnostics::{entropy, esd, l2_norm, pca_topk_ratio, pl_alpha, Esd};
use optbench::fixtures;
use optbench::harness::{BenchConfig, BASE_LR_GRID};
use optbench::math::{RandomStream, Tensor};
use optbench::opt::{create_optimizer, Category, HyperParams, OptFamily, ALL_FAMILIES};
use optbench::zoo::{build_model, Family, ModelSpec};

fn pass(criterion: u32, detail: &str) {
    println!("ACCEPTANCE {criterion} PASS: {detail}");
}

/// Wall-clock bounds describe the optimized artifact; unoptimized test
/// builds still run the full checks but skip the stopwatch.
fn assert_runtime(elapsed: std::time::Duration, limit_secs: u64, what: &str) {
    if !cfg!(debug_assertions) {
        assert!(
            elapsed.as_secs() < limit_secs,
            "{what} took {elapsed:?}, limit {limit_secs}s"
        );
    }
}

// --- Criterion 1: gradient fidelity -------------------------------------

#[test]
fn criterion_1_gradient_fidelity() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        for family in [
            Family::Linear,
            Family::PlainMlp,
            Family::ResMlp,
            Family::PatchMixer,
        ] {
            let (kind, dims, classes) = match family {
                Family::PatchMixer => (DatasetKind::Blobs, 64, 3),
                _ => (DatasetKind::Spirals, 2, 3),
            };
            let ds = generate_dataset(&DatasetSpec {
                kind,
                classes,
                samples_per_class: 20,
                dims,
                image_side: 8,
                noise: 0.2,
                seed,
            })
            .unwrap();
            let (x, y) = ds.gather(&ds.train_idx[..16]);
            let mut spec = ModelSpec::new(family, 3, 16);
            spec.init_seed = seed.wrapping_add(101);
            let mut model = build_model(&spec, dims, classes).unwrap();
            let err = model.gradcheck(&x, &y, 1e-5, seed).unwrap();
            assert!(
                err <= 1e-6,
                "family {:?} seed {seed}: gradcheck {err}",
                family
            );
            if err > worst {
                worst = err;
            }
        }
    }
    let elapsed = start.elapsed();
    assert_runtime(elapsed, 60, "gradient fidelity");
    pass(
        1,
        &format!(
            "gradcheck worst {worst:.3e} <= 1e-6 over 4 families x 10 seeds in {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

// --- Criterion 2: optimizer correctness ----------------------------------

/// Hand-derived first-step oracle for every family: theta0 = 1, g = 2,
/// lr = 0.01, wd = 0, family-default hypers. Each expectation is the update
/// formula written out; none touch the implementation.
fn first_step_oracle(family: OptFamily) -> f64 {
    let (theta, g, lr, eps) = (1.0f64, 2.0f64, 0.01f64, 1e-8f64);
    match family {
        OptFamily::SgdM | OptFamily::Sgdp | OptFamily::Lars => {
            // buffer = g; LARS ratio = |theta| / |g| = 0.5; SGDP scalar layer
            // is never projected (cos = 1).
            match family {
                OptFamily::Lars => theta - lr * (theta / g) * g,
                _ => theta - lr * g,
            }
        }
        OptFamily::Lion => theta - lr, // sign(+) = 1
        OptFamily::Adam | OptFamily::AdamW => theta - lr * (g / (g + eps)),
        OptFamily::Adamax => theta - lr * (g / (g + eps)),
        OptFamily::NAdam => {
            let (b1, b2) = (0.9, 0.999);
            let m = (1.0 - b1) * g;
            let v: f64 = (1.0 - b2) * g * g;
            let m_bar = b1 * m / (1.0 - b1 * b1) + (1.0 - b1) * g / (1.0 - b1);
            theta - lr * m_bar / ((v / (1.0 - b2)).sqrt() + eps)
        }
        OptFamily::Lamb => {
            // r = g/(|g|+eps); ratio = min(|theta|,10)/|r|.
            let r: f64 = g / (g + eps);
            theta - lr * (1.0 / r.abs()) * r
        }
        OptFamily::RAdam => theta - lr * g, // rho_1 = 1 <= 4: momentum step
        OptFamily::AdamP => theta - lr * (g / (g + eps)),
        OptFamily::Adan => {
            let b3 = 0.99;
            let n_hat: f64 = (1.0 - b3) * g * g / (1.0 - b3);
            theta - lr * g / (n_hat.sqrt() + eps)
        }
        OptFamily::AdaBound => {
            let upper = 0.1 * lr * (1.0 + 1.0 / 1e-3);
            let rate = (lr / (g + eps)).clamp(0.1 * lr * (1.0 - 1.0 / (1e-3 + 1.0)), upper);
            theta - rate * g
        }
        OptFamily::AdaFactor => {
            // vector path: v = (1-b2)(g^2 + 1e-30); u = g/sqrt(v/(1-b2));
            // RMS(|u|) ~ 1 so the clip divides by max(1, |u|).
            let v_hat: f64 = g * g + 1e-30;
            let u = g / v_hat.sqrt();
            theta - lr * (u / u.abs().max(1.0))
        }
        OptFamily::AdaBelief => {
            let (b1, b2) = (0.9, 0.999);
            let m = (1.0 - b1) * g;
            let belief = g - m;
            let v: f64 = (1.0 - b2) * belief * belief + eps;
            theta - lr * (m / (1.0 - b1)) / ((v / (1.0 - b2)).sqrt() + eps)
        }
        OptFamily::NovoGrad => theta - lr * (g / (g * g + eps).sqrt()),
        OptFamily::Sophia => theta - lr, // h = 0: clipped to 1
        OptFamily::AdaGrad => theta - lr * g / ((g * g).sqrt() + eps),
        OptFamily::AdaDelta => {
            let (rho, eps_d): (f64, f64) = (0.9, 1e-6);
            let eg: f64 = (1.0 - rho) * g * g;
            theta + lr * (-((eps_d).sqrt() / (eg + eps_d).sqrt()) * g)
        }
        OptFamily::RmsProp => {
            let rho = 0.99;
            let e: f64 = (1.0 - rho) * g * g;
            theta - lr * g / (e.sqrt() + eps)
        }
    }
}

#[test]
fn criterion_2_optimizer_correctness() {
    let start = Instant::now();

    // (a) single-step fixtures, exact to 1e-12, for all 20 families.
    for family in ALL_FAMILIES {
        let hp = HyperParams::for_family(family, 0.01, 0.0);
        let mut st = create_optimizer(family, hp, &[("w".into(), vec![1])]).unwrap();
        let mut t = Tensor::from_vec(&[1], vec![1.0]).unwrap();
        let g = vec![Tensor::from_vec(&[1], vec![2.0]).unwrap()];
        assert!(st.step(&mut [&mut t], &g, 0.01));
        let got = t.data()[0];
        let expect = first_step_oracle(family);
        assert!(
            (got - expect).abs() <= 1e-12,
            "{}: got {got:.15}, hand oracle {expect:.15}",
            family.as_str()
        );
    }
    // The two named fixtures from the update-rule contracts.
    {
        let hp = HyperParams::for_family(OptFamily::SgdM, 0.1, 0.0);
        let mut st = create_optimizer(OptFamily::SgdM, hp, &[("w".into(), vec![1])]).unwrap();
        let mut t = Tensor::from_vec(&[1], vec![1.0]).unwrap();
        let g = vec![Tensor::from_vec(&[1], vec![0.1]).unwrap()];
        st.step(&mut [&mut t], &g, 0.1);
        assert!((t.data()[0] - 0.99).abs() <= 1e-12);
    }
    {
        let hp = HyperParams::for_family(OptFamily::AdamW, 1e-3, 0.01);
        let mut st = create_optimizer(OptFamily::AdamW, hp, &[("w".into(), vec![1])]).unwrap();
        let mut t = Tensor::from_vec(&[1], vec![1.0]).unwrap();
        let g = vec![Tensor::from_vec(&[1], vec![2.0]).unwrap()];
        st.step(&mut [&mut t], &g, 1e-3);
        let expect = 1.0 - 1e-3 * 0.01 - 1e-3 * (2.0 / (2.0 + 1e-8));
        assert!((t.data()[0] - expect).abs() <= 1e-12);
    }

    // (b) every family solves the condition-100 bowl at its best grid lr.
    let mut spec = ModelSpec::new(Family::QuadBowl, 1, 10);
    spec.cond = 100.0;
    spec.init_seed = 12345;
    let diag = build_model(&spec, 0, 0).unwrap().quad_diagonal();
    for family in ALL_FAMILIES {
        let scale = match family.category() {
            Category::A | Category::D => 10.0,
            _ => 1.0,
        };
        let mut best = f64::INFINITY;
        'grid: for base in BASE_LR_GRID {
            let lr = base * scale;
            let hp = HyperParams::for_family(family, lr, 0.0);
            let mut st = create_optimizer(family, hp, &[("theta".into(), vec![10])]).unwrap();
            let model = build_model(&spec, 0, 0).unwrap();
            let mut theta = model.params()[0].value.clone();
            for _ in 0..20_000 {
                if st.wants_hessian() {
                    let h = vec![Tensor::from_vec(&[10], diag.clone()).unwrap()];
                    st.update_hessian(&h);
                }
                let grad: Vec<f64> = theta
                    .data()
                    .iter()
                    .zip(&diag)
                    .map(|(&t, &a)| a * t)
                    .collect();
                let g = vec![Tensor::from_vec(&[10], grad).unwrap()];
                if !st.step(&mut [&mut theta], &g, lr) {
                    break;
                }
                let f: f64 = theta
                    .data()
                    .iter()
                    .zip(&diag)
                    .map(|(&t, &a)| 0.5 * a * t * t)
                    .sum();
                if f < best {
                    best = f;
                }
                if best < 1e-3 {
                    break 'grid;
                }
            }
        }
        assert!(best < 1e-3, "{}: bowl floor {best}", family.as_str());
    }
    let elapsed = start.elapsed();
    assert_runtime(elapsed, 300, "optimizer correctness");
    pass(
        2,
        &format!(
            "20 single-step oracles exact to 1e-12; all families reach f < 1e-3 in {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

// --- Criterion 3: failure-rule reproduction on the published matrix ------

#[test]
fn criterion_3_failure_detection_on_published_data() {
    let table = fixtures::table1();
    let anchors = [
        ("LARS", "Moga-S", 33.26),
        ("LARS", "URLK-T", 41.03),
        ("AdaGrad", "MobV2", 33.87),
        ("AdaGrad", "CAF-12", 38.09),
    ];
    for (opt, model, printed) in anchors {
        assert_eq!(table.value(opt, model), Some(printed));
        let col = table.column(model).unwrap();
        let idx = table.optimizers.iter().position(|o| o == opt).unwrap();
        // Thresholds fall as gamma grows, so gamma = 3 is the binding case;
        // the intermediate values are checked anyway.
        for gamma in [1.0, 1.5, 2.0, 2.5, 3.0] {
            let det = detect_bocb(&col, gamma).unwrap();
            assert!(
                det.flagged.contains(&idx),
                "{opt}/{model} not flagged at gamma={gamma}"
            );
        }
    }

    // Synthetic six-value fixture: threshold 81.5, flags {50, 80, 81}.
    let six = [50.0, 80.0, 81.0, 82.0, 83.0, 84.0];
    let det = detect_bocb(&six, 3.0).unwrap();
    assert!((det.threshold - 81.5).abs() < 1e-12);
    assert_eq!(det.flagged, vec![0, 1, 2]);

    // Worst-removed statistics on the same fixture.
    let s = stability_stats(&six).unwrap();
    assert!((s.mean - 82.0).abs() < 1e-12);
    assert!((s.std - 2f64.sqrt()).abs() < 1e-12);
    assert!((s.range - 4.0).abs() < 1e-12);
    pass(
        3,
        "four published failure cells flagged for gamma in [1,3]; synthetic threshold 81.5 exact",
    );
}

// --- Criterion 4: variation metric ---------------------------------------

#[test]
fn criterion_4_variation_metric() {
    let lr_grid = [1e-4, 1e-3, 1e-2];
    let wd_grid = [0.0];
    let optima: Vec<(f64, f64)> = [1e-3, 1e-3, 1e-3, 1e-2, 1e-4]
        .iter()
        .map(|&lr| (lr, 0.0))
        .collect();
    let onehot = hyper_variation(&optima, &lr_grid, &wd_grid, VariationMode::Onehot).unwrap();
    assert_eq!(onehot, 4.0);
    let ordinal = hyper_variation(&optima, &lr_grid, &wd_grid, VariationMode::Ordinal).unwrap();
    assert_eq!(ordinal, 2.0);
    let unanimous = vec![(1e-3, 0.0); 9];
    let zero = hyper_variation(&unanimous, &lr_grid, &wd_grid, VariationMode::Onehot).unwrap();
    assert_eq!(zero, 0.0);
    pass(4, "one-hot 4, ordinal 2, unanimous 0 — all exact");
}

// --- Criterion 5: ranking reproduction ------------------------------------

fn kendall_tau(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let x = (a[i] as i64 - a[j] as i64) * (b[i] as i64 - b[j] as i64);
            if x > 0 {
                concordant += 1;
            } else if x < 0 {
                discordant += 1;
            }
        }
    }
    (concordant - discordant) as f64 / (concordant + discordant) as f64
}

#[test]
fn criterion_5_ranking_reproduction() {
    let table = fixtures::table4();
    let ranked = rank_optimizers(&table.inputs, [0.4, 0.2, 0.2, 0.2]).unwrap();
    assert_eq!(ranked.rows[0].optimizer, "LAMB");
    assert_eq!(ranked.rows[1].optimizer, "AdamW");
    assert_eq!(ranked.rows[2].optimizer, "Adan");

    let published: std::collections::HashMap<String, usize> =
        table.published_overall.iter().cloned().collect();
    let mut ours = Vec::new();
    let mut theirs = Vec::new();
    for row in &ranked.rows {
        ours.push(row.overall);
        theirs.push(published[&row.optimizer]);
    }
    let tau = kendall_tau(&ours, &theirs);
    assert!(tau >= 0.75, "Kendall tau {tau}");

    let perf_only = rank_optimizers(&table.inputs, [1.0, 0.0, 0.0, 0.0]).unwrap();
    for row in &perf_only.rows {
        assert_eq!(row.overall as u32, row.performance);
    }
    pass(
        5,
        &format!("top-3 LAMB/AdamW/Adan exact; Kendall tau {tau:.4} >= 0.75; perf weights exact"),
    );
}

// --- Criterion 6: diagnostics accuracy ------------------------------------

#[test]
fn criterion_6_diagnostics() {
    let start = Instant::now();

    // Power-law recovery on fixed Pareto fixtures.
    for &alpha_true in &[2.0, 3.0, 4.0] {
        for seed in 0..20u64 {
            let mut stream = RandomStream::new(100_000 + 1000 * alpha_true as u64 + seed);
            let eig: Vec<f64> = (0..1000)
                .map(|_| {
                    let u = 1.0 - stream.uniform();
                    u.powf(-1.0 / (alpha_true - 1.0))
                })
                .collect();
            let spec = Esd {
                source: String::new(),
                eigenvalues: eig,
                rows: 1000,
                cols: 1000,
            };
            let (alpha, _) = pl_alpha(&spec).unwrap();
            assert!(
                (alpha - alpha_true).abs() <= 0.3,
                "alpha {alpha} vs {alpha_true} (seed {seed})"
            );
        }
    }

    // Trace identity on random weights.
    let mut stream = RandomStream::new(77);
    let w = Tensor::from_vec(&[24, 16], (0..384).map(|_| stream.normal()).collect()).unwrap();
    let spec = esd(&w).unwrap();
    let sum: f64 = spec.eigenvalues.iter().sum();
    assert!((sum - w.frobenius_sq()).abs() <= 1e-9 * w.frobenius_sq());

    // Trivial identities.
    assert_eq!(entropy(&Tensor::filled(&[10, 10], 0.3), 256).unwrap(), 0.0);
    assert_eq!(l2_norm(&Tensor::from_vec(&[2], vec![3.0, 4.0]).unwrap()), 5.0);
    let mut eye = Tensor::zeros(&[8, 8]);
    for i in 0..8 {
        eye.set2(i, i, 1.0);
    }
    let eye_spec = esd(&eye).unwrap();
    for k in 1..=8 {
        let r = pca_topk_ratio(&eye_spec, k).unwrap();
        assert!((r.ratio - k as f64 / 8.0).abs() < 1e-12);
    }

    let elapsed = start.elapsed();
    assert_runtime(elapsed, 120, "diagnostics");
    pass(
        6,
        &format!(
            "alpha within 0.3 on 60 Pareto spectra; trace and trivial identities exact in {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
}

// --- Criterion 8: determinism and round-trips ------------------------------

#[test]
fn criterion_8_determinism() {
    use optbench::harness::run_grid;
    let dir = tempfile::tempdir().unwrap();
    let cfg: BenchConfig =
        serde_json::from_str(fixtures::DESK_CONFIG_JSON).unwrap();
    // Shrunken desk slice through the identical code path; the full-file
    // check lives in the desk regression (criterion 7) and the ignored
    // full-sweep test.
    let mut small = cfg;
    small.models.truncate(2);
    small.optimizers = vec!["SGD-M".into(), "AdamW".into(), "Sophia".into()];
    small.lr_grid = Some(vec![1e-3, 1e-2]);
    small.wd_grid = Some(vec![0.0, 1e-2]);
    small.seeds = vec![0, 1];
    small.epochs = 3;
    small.dataset.samples_per_class = 60;

    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    run_grid(&small, &a, false, 2).unwrap();
    run_grid(&small, &b, false, 1).unwrap();
    let strip = |p: &std::path::Path| -> Vec<String> {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| {
                let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
                v.as_object_mut().unwrap().remove("wall_ms");
                serde_json::to_string(&v).unwrap()
            })
            .collect()
    };
    let (la, lb) = (strip(&a), strip(&b));
    assert_eq!(la.len(), 48);
    assert_eq!(la, lb, "sweeps differ after dropping wall_ms");

    // OWB1 round-trip is bit-exact, including awkward payloads.
    use optbench::harness::checkpoint::{read_checkpoint, write_checkpoint, CheckpointMeta};
    let path = dir.path().join("rt.owb1");
    let tensors = vec![(
        "w".to_string(),
        Tensor::from_vec(
            &[2, 3],
            vec![1.5, -0.0, f64::MIN_POSITIVE, 3.25e300, -7.125e-300, 42.0],
        )
        .unwrap(),
    )];
    let meta = CheckpointMeta {
        model: "m".into(),
        optimizer: "AdamW".into(),
        lr: 1e-3,
        wd: 0.0,
        seed: 0,
        epoch: 3,
    };
    write_checkpoint(&path, &tensors, &meta).unwrap();
    let (back, meta2) = read_checkpoint(&path).unwrap();
    assert_eq!(meta2, meta);
    for ((_, t1), (_, t2)) in tensors.iter().zip(&back) {
        let bits1: Vec<u64> = t1.data().iter().map(|v| v.to_bits()).collect();
        let bits2: Vec<u64> = t2.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits1, bits2);
    }
    pass(
        8,
        "repeat sweeps byte-identical after stripping wall_ms; checkpoint round-trip bit-exact",
    );
}
