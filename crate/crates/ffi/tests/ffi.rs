use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use pnd_ffi::*;

fn path_graph(n: usize) -> *mut PndGraph {
    let edges: Vec<u32> = (0..n as u32 - 1).flat_map(|i| [i, i + 1]).collect();
    let mut g = ptr::null_mut();
    let s = unsafe { pnd_graph_new(n, edges.as_ptr(), n - 1, &mut g) };
    assert_eq!(s, PndStatus::Ok);
    g
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(pnd_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn graph_lifecycle_and_counts() {
    let g = path_graph(4);
    unsafe {
        assert_eq!(pnd_graph_num_nodes(g), 4);
        assert_eq!(pnd_graph_num_edges(g), 3);
        let mut h = 0.0;
        assert_eq!(pnd_graph_homophily(g, [0u32, 0, 1, 1].as_ptr(), &mut h), PndStatus::Ok);
        assert!((h - 2.0 / 3.0).abs() < 1e-15);
        pnd_graph_free(g);
        pnd_graph_free(ptr::null_mut());
        assert_eq!(pnd_graph_num_nodes(ptr::null()), 0);
    }
}

#[test]
fn two_node_ppr() {
    let g = path_graph(2);
    let p = [1.0, 0.0, 0.0, 1.0];
    let mut out = [0.0; 4];
    unsafe {
        assert_eq!(pnd_ppr(g, p.as_ptr(), 2, 0.5, out.as_mut_ptr()), PndStatus::Ok);
        pnd_graph_free(g);
    }
    for (o, e) in out.iter().zip([0.75, 0.25, 0.25, 0.75]) {
        assert!((o - e).abs() < 1e-9, "{out:?}");
    }
}

#[test]
fn propagation_family_agrees_with_core() {
    use pnd_core::graph::{build_graph, normalized_adjacency};
    use pnd_core::propagation::{inverse_propagate, propagate_pnd_fix};
    use pnd_core::{DenseMatrix, PropagationConfig};

    let n = 5;
    let g = path_graph(n);
    let p: Vec<f64> = (0..n * 3).map(|i| ((i * 7) % 5) as f64 / 10.0 + 0.1).collect();
    let m = DenseMatrix::new(n, 3, p.clone()).unwrap();
    let a = normalized_adjacency(&build_graph(&[(0, 1), (1, 2), (2, 3), (3, 4)], n).unwrap());
    let mut out = vec![0.0; n * 3];
    unsafe {
        let fixed = [0usize, 4];
        assert_eq!(
            pnd_propagate_fix(g, p.as_ptr(), 3, 0.9, 4, fixed.as_ptr(), 2, out.as_mut_ptr()),
            PndStatus::Ok
        );
        let cfg = PropagationConfig::new(0.9, 4).unwrap();
        assert_eq!(out, propagate_pnd_fix(&m, &a, &cfg, &fixed).unwrap().into_vec());

        assert_eq!(pnd_inverse_propagate(g, p.as_ptr(), 3, 0.9, out.as_mut_ptr()), PndStatus::Ok);
        assert_eq!(out, inverse_propagate(&m, &a, 0.9).unwrap().into_vec());

        let mut e_before = 0.0;
        let mut e_after = 0.0;
        assert_eq!(pnd_dirichlet_energy(g, p.as_ptr(), 3, &mut e_before), PndStatus::Ok);
        let mut smooth = vec![0.0; n * 3];
        assert_eq!(pnd_propagate(g, p.as_ptr(), 3, 0.9, 1, smooth.as_mut_ptr()), PndStatus::Ok);
        assert_eq!(pnd_dirichlet_energy(g, smooth.as_ptr(), 3, &mut e_after), PndStatus::Ok);
        assert!(e_after <= e_before + 1e-12);

        let mut norm = vec![0.0; n * 3];
        assert_eq!(pnd_normalize_rows(out.as_ptr(), n, 3, 1e-8, norm.as_mut_ptr()), PndStatus::Ok);
        for row in norm.chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        pnd_graph_free(g);
    }
}

#[test]
fn errors_set_status_and_message() {
    let g = path_graph(3);
    let p = [0.5; 6];
    let mut out = [0.0; 6];
    unsafe {
        assert_eq!(pnd_propagate(g, p.as_ptr(), 2, 1.5, 2, out.as_mut_ptr()), PndStatus::InvalidInput);
        assert!(last_error().contains("gamma"), "{}", last_error());
        assert_eq!(pnd_ppr(g, p.as_ptr(), 2, 1.0, out.as_mut_ptr()), PndStatus::InvalidInput);
        assert_eq!(pnd_propagate(g, ptr::null(), 2, 0.5, 2, out.as_mut_ptr()), PndStatus::NullPointer);
        assert_eq!(pnd_propagate(ptr::null(), p.as_ptr(), 2, 0.5, 2, out.as_mut_ptr()), PndStatus::NullPointer);
        let bad = [0u32, 7];
        let mut h = ptr::null_mut();
        assert_eq!(pnd_graph_new(3, bad.as_ptr(), 1, &mut h), PndStatus::InvalidInput);
        assert!(h.is_null());
        let empty = path_graph(1);
        let mut hom = 0.0;
        assert_eq!(pnd_graph_homophily(empty, [0u32].as_ptr(), &mut hom), PndStatus::Undefined);
        pnd_graph_free(empty);
        pnd_graph_free(g);
    }
}

#[test]
fn theory_entry_points() {
    unsafe {
        let (mut b, mut bp) = (0.0, 0.0);
        assert_eq!(pnd_beta_exact(0.8, 0.9, 5, 0.05, 0.0, 0.0, &mut b, &mut bp), PndStatus::Ok);
        assert!(b < bp);
        let mut q = 0.0;
        assert_eq!(pnd_correction_threshold(0.8, 0.9, 5, 0.05, 0.0, &mut q), PndStatus::Ok);
        assert!(q > 0.0 && q < 0.2);
        let mut e = 0.0;
        assert_eq!(pnd_epsilon_bound(0.8, 5, &mut e), PndStatus::Ok);
        assert!((e - 3.0 / 3.8).abs() < 1e-12);
        assert_eq!(pnd_epsilon_bound(0.1, 5, &mut e), PndStatus::InvalidInput);
        assert!(!CStr::from_ptr(pnd_version()).to_bytes().is_empty());
    }
}

/// Compiles a small C program against the generated header and the static
/// library, when a C compiler is present.
#[test]
fn c_program_links_and_runs() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let tmp = Path::new(env!("CARGO_TARGET_TMPDIR"));
    let lib_dir = tmp.parent().unwrap().join(if cfg!(debug_assertions) { "debug" } else { "release" });
    let lib = lib_dir.join("libpnd_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping: no C compiler or {} missing", lib.display());
        return;
    }
    let src = tmp.join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "pnd.h"
int main(void) {
    uint32_t edges[] = {0, 1};
    PndGraph *g = NULL;
    if (pnd_graph_new(2, edges, 1, &g) != PND_STATUS_OK) return 1;
    double p[] = {1, 0, 0, 1}, out[4];
    if (pnd_ppr(g, p, 2, 0.5, out) != PND_STATUS_OK) return 2;
    if (pnd_ppr(g, p, 2, 2.0, out) != PND_STATUS_INVALID_INPUT) return 3;
    printf("%.6f %s\n", out[0], pnd_last_error());
    pnd_graph_free(g);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = tmp.join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("0.750000"));
}
