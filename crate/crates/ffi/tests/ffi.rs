use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use qoc_ffi::*;

const CONFIG: &str = r#"{
    "model": {
        "qubits": 1,
        "drift": {"op": "scale", "factor": 0.5, "of": {"op": "single", "name": "z", "qubit": 0}},
        "controls": [{"op": "single", "name": "x", "qubit": 0}, {"op": "single", "name": "y", "qubit": 0}]
    },
    "grid": {"n_steps": 100, "dt": 0.05},
    "cost": {"weights": {"F0": 1.0}, "target_gate": {"op": "single", "name": "x", "qubit": 0}},
    "optimizer": {"step_size": 1.0, "max_iters": 200, "fidelity_threshold": 1e-3, "seed": 0, "initial_amplitude": 0.5}
}"#;

struct Handle(*mut QocProblem);

impl Handle {
    fn new(json: &str) -> Result<Self, (QocStatus, String)> {
        let text = CString::new(json).unwrap();
        let mut p = ptr::null_mut();
        let status = unsafe { qoc_problem_from_json(text.as_ptr(), &mut p) };
        if status == QocStatus::Ok {
            Ok(Self(p))
        } else {
            Err((status, last_error()))
        }
    }

    fn len(&self) -> usize {
        unsafe { qoc_problem_n_controls(self.0) * qoc_problem_n_knots(self.0) }
    }

    fn initial(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        assert_eq!(
            unsafe { qoc_problem_initial_controls(self.0, v.as_mut_ptr(), v.len()) },
            QocStatus::Ok
        );
        v
    }

    fn gradient(&self, controls: &[f64]) -> (Vec<f64>, f64, QocMemoryStats) {
        let mut g = vec![0.0; controls.len()];
        let mut total = 0.0;
        let mut stats = QocMemoryStats::default();
        let s = unsafe {
            qoc_gradient(
                self.0,
                controls.as_ptr(),
                controls.len(),
                g.as_mut_ptr(),
                &mut total,
                &mut stats,
            )
        };
        assert_eq!(s, QocStatus::Ok, "{}", last_error());
        (g, total, stats)
    }
}

impl Drop for Handle {
    fn drop(&mut self) {
        unsafe { qoc_problem_free(self.0) };
    }
}

fn last_error() -> String {
    let p = qoc_last_error();
    if p.is_null() {
        String::new()
    } else {
        unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
    }
}

#[test]
fn shape_queries() {
    let h = Handle::new(CONFIG).unwrap();
    assert_eq!(unsafe { qoc_problem_n_controls(h.0) }, 2);
    assert_eq!(unsafe { qoc_problem_n_knots(h.0) }, 101);
    assert_eq!(unsafe { qoc_problem_n_knots(ptr::null()) }, 0);
}

#[test]
fn gradient_matches_finite_difference() {
    let h = Handle::new(CONFIG).unwrap();
    let u = h.initial();
    let (g, total, stats) = h.gradient(&u);
    assert!(total > 0.0 && total <= 1.0);
    assert_eq!(stats.peak_k, 100);
    assert!(stats.reconstruction_error.is_nan());
    let cost = |v: &[f64]| {
        let mut t = 0.0;
        assert_eq!(unsafe { qoc_cost(h.0, v.as_ptr(), v.len(), &mut t) }, QocStatus::Ok);
        t
    };
    let eps = 1e-5;
    for idx in [0, 37, 100, 150, 201] {
        let mut plus = u.clone();
        let mut minus = u.clone();
        plus[idx] += eps;
        minus[idx] -= eps;
        let fd = (cost(&plus) - cost(&minus)) / (2.0 * eps);
        assert!(
            (fd - g[idx]).abs() <= 1e-6 * (1.0 + fd.abs()),
            "knot {idx}: {fd} vs {}",
            g[idx]
        );
    }
}

#[test]
fn strategies_agree_and_report_memory() {
    let h = Handle::new(CONFIG).unwrap();
    let u = h.initial();
    let (reference, _, _) = h.gradient(&u);
    for (kind, period, peak_k) in [
        (QocStrategyKind::Checkpoint, 10, 20),
        (QocStrategyKind::Revert, 0, 0),
        (QocStrategyKind::RevertCheckpoint, 10, 9),
    ] {
        assert_eq!(unsafe { qoc_problem_set_strategy(h.0, kind, period) }, QocStatus::Ok);
        let (g, _, stats) = h.gradient(&u);
        let diff = g.iter().zip(&reference).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff <= 1e-10, "{kind:?}: {diff}");
        assert!(stats.peak_k.abs_diff(peak_k) <= 3, "{kind:?}: {}", stats.peak_k);
        if kind != QocStrategyKind::Checkpoint {
            assert!(stats.reconstruction_error < 1e-10);
        }
    }
    let s = unsafe { qoc_problem_set_strategy(h.0, QocStrategyKind::Checkpoint, 0) };
    assert_eq!(s, QocStatus::InvalidArgument);
    assert!(last_error().contains("period"));
}

#[test]
fn optimize_converges() {
    let h = Handle::new(CONFIG).unwrap();
    let mut out = vec![0.0; h.len()];
    let (mut iters, mut f0, mut converged) = (0usize, 0.0, false);
    let s = unsafe {
        qoc_optimize(
            h.0,
            ptr::null(),
            out.len(),
            out.as_mut_ptr(),
            &mut iters,
            &mut f0,
            &mut converged,
        )
    };
    assert_eq!(s, QocStatus::Ok, "{}", last_error());
    assert!(converged);
    assert!(f0 <= 1e-3);
    assert!(iters > 0);
    let mut t = 0.0;
    unsafe { qoc_cost(h.0, out.as_ptr(), out.len(), &mut t) };
    assert!((t - f0).abs() < 1e-12);
}

#[test]
fn errors_carry_status_and_message() {
    let (status, msg) = Handle::new("{\"model\": 1}").err().unwrap();
    assert_eq!(status, QocStatus::Config);
    assert!(!msg.is_empty());
    let bad_dims = CONFIG.replace(
        r#""target_gate": {"op": "single", "name": "x", "qubit": 0}"#,
        r#""target_gate": {"op": "matrix", "re": [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]}"#,
    );
    assert!(Handle::new(&bad_dims).is_err());

    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { qoc_problem_from_json(ptr::null(), &mut p) },
        QocStatus::NullPointer
    );
    let h = Handle::new(CONFIG).unwrap();
    let short = [0.0; 3];
    let mut g = [0.0; 3];
    let s = unsafe { qoc_gradient(h.0, short.as_ptr(), 3, g.as_mut_ptr(), ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(s, QocStatus::InvalidArgument);
    assert!(last_error().contains("202"));
    let nan = vec![f64::NAN; h.len()];
    let mut t = 0.0;
    assert_eq!(
        unsafe { qoc_cost(h.0, nan.as_ptr(), nan.len(), &mut t) },
        QocStatus::Numerical
    );
    unsafe { qoc_problem_free(ptr::null_mut()) };
}

#[test]
fn header_declares_api() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/qoc.h")).unwrap();
    for name in [
        "qoc_problem_from_json",
        "qoc_problem_free",
        "qoc_gradient",
        "qoc_cost",
        "qoc_optimize",
        "qoc_last_error",
        "QOC_STATUS_NUMERICAL",
        "typedef struct QocProblem QocProblem;",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}

/// Compiles and links a C program against the static library when a C
/// compiler and the archive are available.
#[test]
fn c_program_links_and_runs() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let target_dir = exe.parent().and_then(Path::parent).unwrap();
    let archive = target_dir.join("libqoc_ffi.a");
    let cc_ok = Command::new("cc")
        .arg("--version")
        .output()
        .is_ok_and(|o| o.status.success());
    if !cc_ok || !archive.exists() {
        eprintln!("skipping: cc or {} unavailable", archive.display());
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("smoke.c");
    let config = CONFIG.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ");
    std::fs::write(
        &src,
        format!(
            r#"#include <stdio.h>
#include <stdlib.h>
#include "qoc.h"
int main(void) {{
    QocProblem *p = NULL;
    if (qoc_problem_from_json("{config}", &p) != QOC_STATUS_OK) {{ printf("%s\n", qoc_last_error()); return 1; }}
    size_t n = qoc_problem_n_controls(p) * qoc_problem_n_knots(p);
    double *u = calloc(n, sizeof(double));
    double *g = calloc(n, sizeof(double));
    double total = 0.0;
    QocMemoryStats stats;
    qoc_problem_initial_controls(p, u, n);
    if (qoc_gradient(p, u, n, g, &total, &stats) != QOC_STATUS_OK) return 2;
    printf("%zu %.6f %zu\n", n, total, stats.peak_k);
    free(u); free(g);
    qoc_problem_free(p);
    return 0;
}}
"#
        ),
    )
    .unwrap();
    let bin = tmp.path().join("smoke");
    let out = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&archive)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stdout));
    let text = String::from_utf8(run.stdout).unwrap();
    assert!(text.starts_with("202 "), "{text}");
    assert!(text.trim_end().ends_with(" 100"), "{text}");
}
