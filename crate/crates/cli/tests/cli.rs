use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use deltasat::frontend::parse;
use deltasat::frontend::report::parse_witness_lines;
use deltasat::interval::{natural_extension, rational_down, FloatBox};
use deltasat::normalize::to_standard_form;
use num_rational::BigRational;

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deltasat")).args(args).output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap()
}

fn stdout(args: &[&str]) -> String {
    String::from_utf8(run(args).stdout).unwrap()
}

fn path(name: &str) -> String {
    corpus(name).to_string_lossy().into_owned()
}

#[test]
fn exit_codes() {
    assert_eq!(code(&["solve", &path("root.dsat")]), 0);
    assert_eq!(code(&["solve", &path("square_plus_one.dsat")]), 1);
    assert_eq!(code(&["bmc", &path("counter.dsat"), "--depth", "2"]), 1);
    assert_eq!(code(&["bmc", &path("counter.dsat"), "--depth", "3"]), 0);
    assert_eq!(code(&["invcheck", &path("counter_safe.dsat")]), 1);
    assert_eq!(code(&["solve", "/nonexistent.dsat"]), 3);
    assert_eq!(code(&["solve", &path("counter.dsat")]), 3);
    assert_eq!(code(&["solve", &path("root.dsat"), "--delta", "x"]), 3);
    assert_eq!(code(&["frobnicate"]), 3);
    assert_eq!(code(&["gen-sat", &path("example.cnf")]), 0);
}

#[test]
fn resource_limit_is_reported() {
    let dir = std::env::temp_dir().join(format!("deltasat-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let f = dir.join("sqrt2.dsat");
    std::fs::write(&f, "(declare-var x Real [0, 2])\n(assert (= (pow x 2) 2))\n").unwrap();
    let f = f.to_string_lossy().into_owned();
    let out = run(&["solve", &f, "--delta", "0", "--max-boxes", "50"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "unknown (resource limit)\n");
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn verdict_line_is_one_of_three() {
    for f in ["root.dsat", "square_plus_one.dsat", "circle.dsat", "decay.dsat"] {
        let out = stdout(&["solve", &path(f)]);
        let first = out.lines().next().unwrap();
        assert!(["unsat", "delta-sat", "unknown (resource limit)"].contains(&first), "{f}: {first}");
    }
}

/// Every clause of the standard form has a disjunct whose enclosure over the
/// printed witness lies in `[-delta, delta]`.
fn recheck(file: &str) {
    let out = stdout(&["solve", &path(file), "--witness"]);
    assert!(out.starts_with("delta-sat\n"), "{file}: {out}");
    let p = parse(&std::fs::read_to_string(corpus(file)).unwrap()).unwrap();
    let sf = to_standard_form(&p.to_sentence().unwrap()).unwrap();
    let delta = rational_down(&p.options.delta.unwrap_or_else(|| BigRational::new(1.into(), 1000.into())));
    let lines = parse_witness_lines(&out);
    let names: Vec<&str> = lines.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, sf.names.iter().map(String::as_str).collect::<Vec<_>>());
    let witness = FloatBox::new(lines.into_iter().map(|(_, iv)| iv).collect());
    assert!(witness.is_subset(&sf.domain_box()), "{file}");
    for clause in &sf.clauses {
        assert!(
            clause.iter().any(|t| natural_extension(t, &witness).is_ok_and(|r| r.lo() >= -delta && r.hi() <= delta)),
            "{file}: no disjunct certified"
        );
    }
}

#[test]
fn printed_witnesses_pass_the_certificate_check() {
    for f in ["root.dsat", "circle.dsat", "parabola.dsat", "sine.dsat", "example1.dsat"] {
        recheck(f);
    }
}

#[test]
fn seeded_runs_are_byte_identical() {
    for args in [
        vec!["solve", "circle.dsat", "--seed", "3", "--witness"],
        vec!["solve", "example1.dsat", "--seed", "3", "--format", "structured"],
        vec!["bmc", "decay_steps.dsat", "--depth", "3", "--seed", "3"],
    ] {
        let mut a: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        a[1] = path(args[1]);
        let a: Vec<&str> = a.iter().map(String::as_str).collect();
        let first = run(&a);
        let second = run(&a);
        assert_eq!(first.stdout, second.stdout);
        assert_eq!(first.status, second.status);
    }
}

#[test]
fn oracle_flag_decides_small_problems() {
    assert_eq!(code(&["solve", &path("root.dsat"), "--oracle", "--delta", "1/10"]), 0);
    assert_eq!(code(&["solve", &path("square_plus_one.dsat"), "--oracle"]), 1);
    // flows are outside the grid oracle
    assert_eq!(code(&["solve", &path("decay.dsat"), "--oracle"]), 3);
}

#[test]
fn structured_output_is_json() {
    let out = stdout(&["solve", &path("parabola.dsat"), "--format", "structured"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["verdict"], "delta-sat");
    assert_eq!(v["witness"].as_array().unwrap().len(), 2);
}
