use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_siegel-modp"));
    c.env_remove("SIEGEL_MODP_CACHE");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["theta", "--j", "3", "--p", "7", "--in", "x"]).status.code(), Some(1));
    assert_eq!(run(&["table-aop", "--p", "11", "--kmax", "8"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn table_aop_formats() {
    let text = run(&["table-aop", "--p", "5", "--kmax", "12"]);
    assert!(text.status.success());
    let lines: Vec<String> = stdout(&text).lines().map(String::from).collect();
    assert_eq!(lines[0], "4 [(7,0,0,4),1]");
    assert_eq!(lines[4], "12 [(2,28,3,0),1] [(9,0,0,4),1] [(inf,0,0,4),1]");
    let csv = stdout(&run(&["--format", "csv", "table-aop", "--p", "5", "--kmax", "10"]));
    assert!(csv.starts_with("p,k,ord,l,l_mod_p,two_l_minus_1_mod_p,multiplicity,bold\n"));
    assert!(csv.contains("5,10,inf,0,0,4,1,false"));
    let json = stdout(&run(&["--format", "json", "table-aop", "--p", "7", "--kmax", "6"]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v[0]["k"], 4);
    assert_eq!(v[0]["records"][0]["l"], 4);
}

#[test]
fn table_kernel_small() {
    let o = run(&["--threads", "2", "table-kernel", "--pmax", "7", "--kmax", "30", "--cap", "6"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with("5 0 18 24 28 30\n7 0 4 24 28\n"), "{out}");
    assert!(out.contains("violations (5,24) (7,24)"));
}

#[test]
fn gen_theta_aop_filtration_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = run(&["gen", "--bound", "5", "--names", "E4,X10", "--out", d]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("X10 weight=10 bound=5"));
    let e4 = format!("{d}/E4-B5.qexp");
    let x10 = format!("{d}/X10-B5.qexp");
    assert!(Path::new(&e4).exists());

    let th = stdout(&run(&["theta", "--j", "2", "--p", "7", "--in", &e4]));
    assert!(th.starts_with("qexp2 weight=12 char=7 bound=5"));
    assert!(th.lines().skip(1).all(|l| l.ends_with(" 0")));
    let th1 = stdout(&run(&["theta", "--j", "1", "--p", "7", "--in", &e4]));
    assert!(th1.starts_with("A\n") && th1.contains("\nB\n") && th1.contains("\nC\n"));

    let img = stdout(&run(&["aop", "--j", "2", "--M", "7", "--p", "7", "--in", &x10]));
    assert!(img.starts_with("qexp2 weight=58 char=7 bound=5"));
    let img_path = dir.path().join("img.qexp");
    std::fs::write(&img_path, img).unwrap();
    let f = stdout(&run(&["filtration", "--p", "7", "--weight", "58", "--in", img_path.to_str().unwrap()]));
    assert!(f.starts_with("omega1 46\n"), "{f}");

    let f4 = stdout(&run(&["filtration", "--p", "7", "--weight", "4", "--in", &e4]));
    assert_eq!(f4, "omega1 4\npoly 1 * x4\n");
}

#[test]
fn cache_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().env("SIEGEL_MODP_CACHE", dir.path()).args(["gen", "--bound", "3", "--names", "E6"]).output().unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("E6-B3.qexp").exists());
}

#[test]
fn verify_passes_and_reports_failures() {
    let o = run(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).lines().all(|l| l.starts_with("PASS ")));

    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("E4-B8.qexp"), "not an expansion\n").unwrap();
    let d = dir.path().to_str().unwrap();
    let bad = run(&["--cache-dir", d, "--format", "json", "verify"]);
    assert_eq!(bad.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_str(&stdout(&bad)).unwrap();
    assert!(v.as_array().unwrap().iter().any(|c| c["passed"] == false));
}
