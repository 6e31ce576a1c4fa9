//! Compiles and runs a small C program against include/optbench.h and the
//! built cdylib, proving the header matches the ABI for a real C toolchain.

use std::path::PathBuf;
use std::process::Command;

fn target_dir() -> PathBuf {
    // Tests run from target/{profile}/deps/; the cdylib lands either there
    // or one level up depending on how the build was invoked.
    let exe = std::env::current_exe().unwrap();
    let deps = exe.parent().unwrap().to_path_buf();
    if deps.join("liboptbench_ffi.so").exists() {
        return deps;
    }
    deps.parent().unwrap().to_path_buf()
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "optbench.h"

int main(void) {
    double values[6] = {50.0, 80.0, 81.0, 82.0, 83.0, 84.0};
    double q = 0.0;
    if (optbench_quantile(values, 6, 0.25, &q) != OPTBENCH_OK) return 1;
    if (q < 80.2499 || q > 80.2501) return 2;

    uint8_t flags[6];
    double threshold = 0.0;
    if (optbench_detect_bocb(values, 6, 3.0, flags, &threshold) != OPTBENCH_OK) return 3;
    if (!(flags[0] && flags[1] && flags[2] && !flags[3] && !flags[4] && !flags[5])) return 4;
    if (threshold < 81.4999 || threshold > 81.5001) return 5;

    double mean, sd, range;
    if (optbench_stability_stats(values, 6, &mean, &sd, &range) != OPTBENCH_OK) return 6;
    if (mean < 81.9999 || mean > 82.0001) return 7;

    /* error path: null input reports EINVAL and a message */
    if (optbench_quantile(NULL, 3, 0.5, &q) != OPTBENCH_EINVAL) return 8;
    if (optbench_last_error()[0] == '\0') return 9;

    printf("c-abi ok\n");
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let cc = which_cc().expect("no C compiler found in this environment");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let exe = dir.path().join("smoke");

    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let libdir = target_dir();
    let lib = libdir.join("liboptbench_ffi.so");
    assert!(lib.exists(), "cdylib missing at {}", lib.display());

    let compile = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg("-L")
        .arg(&libdir)
        .arg("-loptbench_ffi")
        .arg("-o")
        .arg(&exe)
        .output()
        .unwrap();
    assert!(
        compile.status.success(),
        "compile failed: {}",
        String::from_utf8_lossy(&compile.stderr)
    );

    let run = Command::new(&exe)
        .env("LD_LIBRARY_PATH", &libdir)
        .output()
        .unwrap();
    assert_eq!(
        run.status.code(),
        Some(0),
        "stdout: {} stderr: {}",
        String::from_utf8_lossy(&run.stdout),
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stdout).contains("c-abi ok"));
}

fn which_cc() -> Option<String> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc)
            .arg("--version")
            .output()
            .map(|o| o.status.success())
            .unwrap_or(false)
        {
            return Some(cc.to_string());
        }
    }
    None
}
