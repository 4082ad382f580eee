use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use ustat_ffi::*;

const CONFIG: &str = r#"
[process]
type = "ar1"
rho = 0.5

[kernel]
name = "symmetry3"

[experiment]
n = 60
seed = 11
checkpoints = [20, 40, 60]
replicates = 8
p = 2.0
"#;

fn cfg(text: &str) -> CString {
    CString::new(text).unwrap()
}

fn last_error() -> String {
    let p = ust_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn handles_round_trip_through_the_c_interface() {
    unsafe {
        let c = cfg(CONFIG);
        let mut path = ptr::null_mut();
        assert_eq!(ust_path_simulate(c.as_ptr(), &mut path), UstStatus::Ok);
        assert_eq!(ust_path_len(path), 60);
        assert_eq!(ust_path_dim(path), 1);
        assert_eq!(ust_path_latent_component(path), -1);

        let mut kernel = ptr::null_mut();
        assert_eq!(ust_kernel_from_config(c.as_ptr(), &mut kernel), UstStatus::Ok);
        assert_eq!(ust_kernel_order(kernel), 3);

        let mut u = f64::NAN;
        assert_eq!(ust_u_statistic(path, kernel, &mut u), UstStatus::Ok);
        let cks = [20usize, 40, 60];
        let mut series = [0.0; 3];
        assert_eq!(ust_prefix_u_statistics(path, kernel, cks.as_ptr(), 3, series.as_mut_ptr()), UstStatus::Ok);
        assert_eq!(series[2], u);

        let mut values = vec![0.0; 60];
        assert_eq!(ust_path_values(path, values.as_mut_ptr(), 60), UstStatus::Ok);
        let mut copy = ptr::null_mut();
        assert_eq!(ust_path_from_values(values.as_ptr(), 60, 1, &mut copy), UstStatus::Ok);
        let mut u2 = f64::NAN;
        assert_eq!(ust_u_statistic(copy, kernel, &mut u2), UstStatus::Ok);
        assert_eq!(u.to_bits(), u2.to_bits());

        let (mut lim, mut se) = (f64::NAN, f64::NAN);
        assert_eq!(ust_estimate_limit(c.as_ptr(), path, kernel, &mut lim, &mut se), UstStatus::Ok);
        assert_eq!(lim, 0.0);

        let mut inc = f64::NAN;
        assert_eq!(ust_incomplete_u_statistic(path, kernel, 500, 3, &mut inc), UstStatus::Ok);
        assert!(inc.abs() <= 3.0);

        ust_path_free(copy);
        ust_kernel_free(kernel);
        ust_path_free(path);
    }
}

#[test]
fn v_statistic_matches_for_a_constant_kernel() {
    unsafe {
        let c = cfg("[kernel]\nname = \"constant\"\nvalue = 2.5\norder = 2\n");
        let mut kernel = ptr::null_mut();
        assert_eq!(ust_kernel_from_config(c.as_ptr(), &mut kernel), UstStatus::Ok, "{}", last_error());
        let xs = [1.0, 2.0, 3.0, 4.0];
        let mut path = ptr::null_mut();
        assert_eq!(ust_path_from_values(xs.as_ptr(), 4, 1, &mut path), UstStatus::Ok);
        let mut v = 0.0;
        assert_eq!(ust_v_statistic(path, kernel, &mut v), UstStatus::Ok);
        assert_eq!(v, 2.5);
        ust_path_free(path);
        ust_kernel_free(kernel);
    }
}

#[test]
fn converge_report_is_usable() {
    unsafe {
        let c = cfg(CONFIG);
        let mut report = ptr::null_mut();
        assert_eq!(ust_converge(c.as_ptr(), &mut report), UstStatus::Ok, "{}", last_error());
        assert_eq!(ust_report_len(report), 3);
        let mut lp = [0.0; 3];
        assert_eq!(ust_report_lp_error(report, lp.as_mut_ptr(), 3), UstStatus::Ok);
        assert!(lp.iter().all(|e| e.is_finite() && *e >= 0.0));
        assert_eq!(ust_report_lp_error(report, lp.as_mut_ptr(), 2), UstStatus::Domain);

        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("report.csv");
        let cfile = CString::new(file.to_str().unwrap()).unwrap();
        assert_eq!(ust_report_write_csv(report, cfile.as_ptr()), UstStatus::Ok);
        let text = std::fs::read_to_string(&file).unwrap();
        assert!(text.contains("replicate,checkpoint,u_value,limit_value,limit_stderr,abs_error"));
        ust_report_free(report);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut path = ptr::null_mut();
        assert_eq!(ust_path_simulate(ptr::null(), &mut path), UstStatus::NullPointer);
        assert!(last_error().contains("config_toml"));

        let bad = cfg("[process]\ntype = \"ar1\"\nrho = 1.5\n[experiment]\nn = 10\n");
        assert_eq!(ust_path_simulate(bad.as_ptr(), &mut path), UstStatus::Config);
        assert!(last_error().contains("process.rho"));
        assert!(path.is_null());

        let unparsable = cfg("[process\n");
        assert_eq!(ust_path_simulate(unparsable.as_ptr(), &mut path), UstStatus::Config);

        let nan = [f64::NAN];
        assert_eq!(ust_path_from_values(nan.as_ptr(), 1, 1, &mut path), UstStatus::Domain);

        let xs: Vec<f64> = (0..2000).map(|i| i as f64).collect();
        assert_eq!(ust_path_from_values(xs.as_ptr(), 2000, 1, &mut path), UstStatus::Ok);
        let kcfg = cfg("[kernel]\nname = \"symmetry3\"\n");
        let mut kernel = ptr::null_mut();
        assert_eq!(ust_kernel_from_config(kcfg.as_ptr(), &mut kernel), UstStatus::Ok);
        let mut u = 0.0;
        assert_eq!(ust_u_statistic(path, kernel, &mut u), UstStatus::Infeasible);
        assert_eq!(ust_u_statistic(ptr::null(), kernel, &mut u), UstStatus::NullPointer);

        let unknown = cfg("[kernel]\nname = \"nope\"\n");
        let mut k2 = ptr::null_mut();
        assert_eq!(ust_kernel_from_config(unknown.as_ptr(), &mut k2), UstStatus::Config);
        assert!(last_error().contains("symmetry3"));

        ust_kernel_free(kernel);
        ust_path_free(path);
        ust_path_free(ptr::null_mut());
        assert_eq!(ust_path_len(ptr::null()), 0);
    }
}

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    // target/<profile>/deps/ffi-<hash>
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header_dir = manifest.join("include");
    assert!(header_dir.join("ustat.h").exists());
    let lib = target_dir().join("libustat_ffi.a");
    let Some(cc) = ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
    else {
        eprintln!("no C compiler found; header link check skipped");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <string.h>
#include "ustat.h"

int main(void) {
    const char *cfg = "[kernel]\nname = \"symmetry3\"\n";
    double xs[4] = {1.0, 2.0, -3.0, 0.5};
    UstPath *path = NULL;
    UstKernel *kernel = NULL;
    double u = 0.0;
    if (ust_path_from_values(xs, 4, 1, &path) != UST_STATUS_OK) return 10;
    if (ust_kernel_from_config(cfg, &kernel) != UST_STATUS_OK) return 11;
    if (ust_u_statistic(path, kernel, &u) != UST_STATUS_OK) return 12;
    if (ust_u_statistic(NULL, kernel, &u) != UST_STATUS_NULL_POINTER) return 13;
    if (strstr(ust_last_error(), "path") == NULL) return 14;
    printf("%.17g\n", u);
    ust_kernel_free(kernel);
    ust_path_free(path);
    return 0;
}
"#,
    )
    .unwrap();
    let syntax = Command::new(cc)
        .arg("-fsyntax-only")
        .arg("-I")
        .arg(&header_dir)
        .arg(&src)
        .status()
        .unwrap();
    assert!(syntax.success(), "header does not compile");
    if !lib.exists() {
        eprintln!("{} not built; link step skipped", lib.display());
        return;
    }
    let exe = dir.path().join("smoke");
    let out = Command::new(cc)
        .arg("-I")
        .arg(&header_dir)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let u: f64 = String::from_utf8(run.stdout).unwrap().trim().parse().unwrap();
    let mut expected = 0.0;
    unsafe {
        let xs = [1.0, 2.0, -3.0, 0.5];
        let c = cfg("[kernel]\nname = \"symmetry3\"\n");
        let (mut p, mut k) = (ptr::null_mut(), ptr::null_mut());
        ust_path_from_values(xs.as_ptr(), 4, 1, &mut p);
        ust_kernel_from_config(c.as_ptr(), &mut k);
        ust_u_statistic(p, k, &mut expected);
        ust_kernel_free(k);
        ust_path_free(p);
    }
    assert_eq!(u, expected);
}
