//! Exercises the C ABI the way a foreign caller would: raw pointers, status
//! codes, opaque handles. Also guards the hand-maintained header against
//! symbol drift.

use std::ffi::{CStr, CString};

use optbench_ffi::*;

#[test]
fn quantile_through_the_abi() {
    let vals = [50.0, 80.0, 81.0, 82.0, 83.0, 84.0];
    let mut out = 0.0;
    let code = unsafe { optbench_quantile(vals.as_ptr(), vals.len(), 0.25, &mut out) };
    assert_eq!(code, OPTBENCH_OK);
    assert!((out - 80.25).abs() < 1e-12);

    let code = unsafe { optbench_quantile(std::ptr::null(), 3, 0.5, &mut out) };
    assert_eq!(code, OPTBENCH_EINVAL);
    let msg = unsafe { CStr::from_ptr(optbench_last_error()) };
    assert!(!msg.to_str().unwrap().is_empty());
}

#[test]
fn bocb_flags_match_the_hand_fixture() {
    let vals = [50.0, 80.0, 81.0, 82.0, 83.0, 84.0];
    let mut flags = [9u8; 6];
    let mut threshold = 0.0;
    let code = unsafe {
        optbench_detect_bocb(vals.as_ptr(), vals.len(), 3.0, flags.as_mut_ptr(), &mut threshold)
    };
    assert_eq!(code, OPTBENCH_OK);
    assert!((threshold - 81.5).abs() < 1e-12);
    assert_eq!(flags, [1, 1, 1, 0, 0, 0]);
}

#[test]
fn stability_and_variation() {
    let vals = [50.0, 80.0, 81.0, 82.0, 83.0, 84.0];
    let (mut mean, mut std, mut range) = (0.0, 0.0, 0.0);
    let code = unsafe {
        optbench_stability_stats(vals.as_ptr(), vals.len(), &mut mean, &mut std, &mut range)
    };
    assert_eq!(code, OPTBENCH_OK);
    assert!((mean - 82.0).abs() < 1e-12);
    assert!((std - 2f64.sqrt()).abs() < 1e-12);
    assert_eq!(range, 4.0);

    let lrs = [1e-3, 1e-3, 1e-3, 1e-2, 1e-4];
    let wds = [0.0; 5];
    let lr_grid = [1e-4, 1e-3, 1e-2];
    let wd_grid = [0.0];
    let mut var = 0.0;
    let code = unsafe {
        optbench_hyper_variation(
            lrs.as_ptr(),
            wds.as_ptr(),
            5,
            lr_grid.as_ptr(),
            3,
            wd_grid.as_ptr(),
            1,
            0,
            &mut var,
        )
    };
    assert_eq!(code, OPTBENCH_OK);
    assert_eq!(var, 4.0);
    let code = unsafe {
        optbench_hyper_variation(
            lrs.as_ptr(),
            wds.as_ptr(),
            5,
            lr_grid.as_ptr(),
            3,
            wd_grid.as_ptr(),
            1,
            1,
            &mut var,
        )
    };
    assert_eq!(code, OPTBENCH_OK);
    assert_eq!(var, 2.0);
}

#[test]
fn spectral_helpers() {
    // diag(2, 1): Gram eigenvalues {4, 1}.
    let w = [2.0, 0.0, 0.0, 1.0];
    let mut ratio = 0.0;
    let code = unsafe { optbench_pca_topk(w.as_ptr(), 2, 2, 1, &mut ratio) };
    assert_eq!(code, OPTBENCH_OK);
    assert!((ratio - 0.8).abs() < 1e-12);

    let sym = [2.0, 1.0, 1.0, 2.0];
    let mut eig = [0.0; 2];
    let code = unsafe { optbench_sym_eigenvalues(sym.as_ptr(), 2, eig.as_mut_ptr()) };
    assert_eq!(code, OPTBENCH_OK);
    assert!((eig[0] - 3.0).abs() < 1e-12);
    assert!((eig[1] - 1.0).abs() < 1e-12);

    let (mut norm, mut h) = (0.0, 0.0);
    let v = [3.0, 4.0];
    unsafe {
        assert_eq!(optbench_l2_norm(v.as_ptr(), 2, &mut norm), OPTBENCH_OK);
        assert_eq!(optbench_entropy(v.as_ptr(), 2, 2, &mut h), OPTBENCH_OK);
    }
    assert_eq!(norm, 5.0);
    assert!((h - 2f64.ln()).abs() < 1e-12);

    // Tiny spectrum: tail fit refuses.
    let mut alpha = 0.0;
    let mut xmin = 0.0;
    let code = unsafe { optbench_pl_alpha(w.as_ptr(), 2, 2, &mut alpha, &mut xmin) };
    assert_eq!(code, OPTBENCH_ESPECTRUM);
}

#[test]
fn results_handle_lifecycle() {
    // Write a small results file through the core harness.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.jsonl");
    let cfg = optbench::harness::BenchConfig {
        models: vec![optbench::zoo::ModelSpec::new(optbench::zoo::Family::Linear, 1, 1)],
        optimizers: vec!["SGD-M".into(), "AdamW".into()],
        lr_grid: Some(vec![1e-3, 1e-2]),
        wd_grid: Some(vec![0.0]),
        seeds: vec![0],
        dataset: optbench::data::DatasetSpec {
            kind: optbench::data::DatasetKind::Blobs,
            classes: 2,
            samples_per_class: 20,
            dims: 2,
            image_side: 8,
            noise: 0.1,
            seed: 1,
        },
        epochs: 2,
        batch_size: 8,
        warmup: 0,
        base_seed: 0,
    };
    optbench::harness::run_grid(&cfg, &path, false, 1).unwrap();

    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut handle: *mut OptbenchResults = std::ptr::null_mut();
    let code = unsafe { optbench_results_load(cpath.as_ptr(), &mut handle) };
    assert_eq!(code, OPTBENCH_OK);
    assert!(!handle.is_null());

    unsafe {
        assert_eq!(optbench_results_num_models(handle), 1);
        assert_eq!(optbench_results_num_optimizers(handle), 2);
        let name = CStr::from_ptr(optbench_results_model_name(handle, 0));
        assert_eq!(name.to_str().unwrap(), "linear");
        let oname = CStr::from_ptr(optbench_results_optimizer_name(handle, 1));
        assert_eq!(oname.to_str().unwrap(), "AdamW");
        assert!(optbench_results_model_name(handle, 99).is_null());

        let (mut acc, mut lr, mut wd) = (0.0, 0.0, 0.0);
        let code = optbench_results_cell(handle, 0, 0, &mut acc, &mut lr, &mut wd);
        assert_eq!(code, OPTBENCH_OK);
        assert!((0.0..=1.0).contains(&acc));
        assert!(lr == 1e-3 || lr == 1e-2);

        let code = optbench_results_cell(handle, 5, 0, &mut acc, &mut lr, &mut wd);
        assert_eq!(code, OPTBENCH_EINVAL);

        optbench_results_free(handle);
    }

    // Loading a missing file reports EIO.
    let missing = CString::new("/definitely/not/here.jsonl").unwrap();
    let mut h2: *mut OptbenchResults = std::ptr::null_mut();
    let code = unsafe { optbench_results_load(missing.as_ptr(), &mut h2) };
    assert_eq!(code, OPTBENCH_EIO);
}

#[test]
fn header_lists_every_exported_symbol() {
    let header = include_str!("../include/optbench.h");
    for symbol in [
        "optbench_last_error",
        "optbench_quantile",
        "optbench_detect_bocb",
        "optbench_stability_stats",
        "optbench_hyper_variation",
        "optbench_entropy",
        "optbench_l2_norm",
        "optbench_sym_eigenvalues",
        "optbench_pl_alpha",
        "optbench_pca_topk",
        "optbench_results_load",
        "optbench_results_free",
        "optbench_results_num_models",
        "optbench_results_num_optimizers",
        "optbench_results_model_name",
        "optbench_results_optimizer_name",
        "optbench_results_cell",
    ] {
        assert!(header.contains(symbol), "header is missing {symbol}");
    }
}
