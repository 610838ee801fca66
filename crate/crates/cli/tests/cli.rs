//! End-to-end tests of the binary: exit codes, file formats, and the
//! structured record output.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gauge-logic"))
}

fn asset(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/assets")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

#[test]
fn analyze_reports_bound_and_threshold() {
    let out = run(&["analyze", "--formula", asset("ec.sexp").to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("bounded: true"));
    assert!(text.contains("bound: 1"));
    assert!(text.contains("threshold 1"));
}

#[test]
fn analyze_records_mode_is_parseable() {
    let out = run(&[
        "analyze",
        "--text",
        "(sub (const 1) (nu x))",
        "--format",
        "records",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let form = gauge_logic::sexp::parse_one(text.trim()).expect("record parses");
    assert_eq!(form.head(), Some("record"));
}

#[test]
fn parse_errors_exit_2() {
    let out = run(&["analyze", "--text", "(sub (const 1)"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["analyze", "--text", "(d x y z)"]);
    assert_eq!(out.status.code(), Some(2));
    // ill-formed quantification is rejected
    let out = run(&["analyze", "--text", "(sup x (nu x))"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_uses_structure_signature() {
    let out = run(&[
        "eval",
        asset("two_point_graph.struct").to_str().unwrap(),
        "--text",
        "(G_f u v)",
        "--assign",
        "u=a,v=b",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out).trim(), "1");
    // assignments resolve point names
    let out = run(&[
        "eval",
        asset("two_point_graph.struct").to_str().unwrap(),
        "--text",
        "(nu y)",
        "--assign",
        "y=b",
    ]);
    assert_eq!(stdout(&out).trim(), "1");
    // unassigned free variables are a usage error
    let out = run(&[
        "eval",
        asset("two_point_graph.struct").to_str().unwrap(),
        "--text",
        "(nu y)",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_pass_and_fail_codes() {
    let out = run(&["validate", asset("two_point_graph.struct").to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "PASS");

    let dir = std::env::temp_dir().join("gauge-logic-cli-test-validate");
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.struct");
    std::fs::write(
        &bad,
        "(points a b)\n(dist a b 1)\n(gauge a 0)\n(gauge b 5)\n",
    )
    .unwrap();
    let out = run(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn embound_recover_round_trip_files() {
    let dir = std::env::temp_dir().join("gauge-logic-cli-test-embound");
    std::fs::create_dir_all(&dir).unwrap();
    let e = dir.join("e.struct");
    let back = dir.join("back.struct");
    let src = asset("two_point_graph.struct");
    let out = run(&["embound", src.to_str().unwrap(), e.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&[
        "recover",
        e.to_str().unwrap(),
        back.to_str().unwrap(),
        "--infinity",
        "oo",
    ]);
    assert!(out.status.success());
    // the recovered tables match the source exactly
    let a = gauge_logic::GaugedStructure::parse(&std::fs::read_to_string(&src).unwrap(), None)
        .unwrap();
    let b = gauge_logic::GaugedStructure::parse(&std::fs::read_to_string(&back).unwrap(), None)
        .unwrap();
    assert_eq!(a.dist, b.dist);
    assert_eq!(a.gauge, b.gauge);
    assert_eq!(a.preds, b.preds);

    let out = run(&["check-embound", src.to_str().unwrap()]);
    assert!(out.status.success());
}

#[test]
fn check_theory_defect_table() {
    let out = run(&[
        "check-theory",
        asset("two_point_graph.struct").to_str().unwrap(),
        asset("graph_axioms.thy").to_str().unwrap(),
        "--eps",
        "1/2",
        "--ns",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("defect 0"));
    assert!(text.trim().ends_with("PASS"));
}

#[test]
fn check_theory_reports_positive_defect_with_exit_1() {
    // a structure violating the graph axioms: G_f is not a graph
    let dir = std::env::temp_dir().join("gauge-logic-cli-test-theory");
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.struct");
    std::fs::write(
        &bad,
        "(sig (pred G_f 2 (min (std 2) id)))\n(points a b)\n(dist a b 1)\n\
         (gauge a 0)\n(gauge b 1)\n(pred G_f a a 3)\n(pred G_f a b 0)\n\
         (pred G_f b a 0)\n(pred G_f b b 0)\n",
    )
    .unwrap();
    let out = run(&[
        "check-theory",
        bad.to_str().unwrap(),
        asset("graph_axioms.thy").to_str().unwrap(),
        "--eps",
        "1/2",
        "--ns",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn expand_macro_and_prenex_compose() {
    let out = run(&[
        "expand-macro",
        "--text",
        "(sub (const 1) (nu y))",
        "--kind",
        "sup",
        "--var",
        "x",
        "--r",
        "1",
        "--rp",
        "2",
    ]);
    assert!(out.status.success());
    let window = stdout(&out);
    assert!(window.trim_start().starts_with("(sup x"));
    // the expansion parses back and is well-formed
    let out = run(&["analyze", "--text", window.trim()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("bounded: true"));

    let out = run(&["prenex", "--text", "(sub (const 1) (sup x (sub (const 1) (nu x))))"]);
    assert!(out.status.success());
    assert!(stdout(&out).trim_start().starts_with("(inf x"));
}

#[test]
fn bm_commands() {
    let dir = std::env::temp_dir().join("gauge-logic-cli-test-bm");
    std::fs::create_dir_all(&dir).unwrap();
    let basis = dir.join("basis.vec");
    std::fs::write(&basis, "(vec 1 0)\n(vec 0 1)\n").unwrap();
    let out = run(&[
        "bm-certify",
        "--space",
        "l1:2",
        "--basis",
        basis.to_str().unwrap(),
        "--eps",
        "1/4",
        "--trials",
        "10",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("1/16"));

    let mat = dir.join("scale.mat");
    std::fs::write(&mat, "(matrix (row 2 0) (row 0 2))\n").unwrap();
    let out = run(&[
        "bm-check",
        "--matrix",
        mat.to_str().unwrap(),
        "--space",
        "l1:2",
        "--eps",
        "1/4",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let id = dir.join("id.mat");
    std::fs::write(&id, "(matrix (row 1 0) (row 0 1))\n").unwrap();
    let out = run(&[
        "bm-check",
        "--matrix",
        id.to_str().unwrap(),
        "--space",
        "linf:2",
        "--eps",
        "0",
    ]);
    assert!(out.status.success());
}

#[test]
fn ultraproduct_principal_matches_factor() {
    let dir = std::env::temp_dir().join("gauge-logic-cli-test-up");
    std::fs::create_dir_all(&dir).unwrap();
    let formulas = dir.join("formulas.sexp");
    std::fs::write(&formulas, "(sup x (sub (const 1) (nu x)))\n(nu y)\n").unwrap();
    let out = run(&[
        "ultraproduct-principal",
        asset("two_point_graph.struct").to_str().unwrap(),
        asset("two_point_graph.struct").to_str().unwrap(),
        "--index",
        "1",
        "--check-formulas",
        formulas.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("formula values checked"));
    // out-of-range index is a usage error
    let out = run(&[
        "ultraproduct-principal",
        asset("two_point_graph.struct").to_str().unwrap(),
        "--index",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
