mod support;

use std::path::PathBuf;

use deltasat::dpll::{solve, solve_sentence, Answer, DpllConfig};
use deltasat::expr::Formula;
use deltasat::frontend::{gen_sat_encoding, parse, parse_dimacs, print, unroll_bmc, Cnf};
use deltasat::icp::certificate_check;
use deltasat::normalize::to_standard_form;
use rand::Rng;
use support::{q, rng};

fn corpus() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../cli/corpus");
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "dsat"))
        .collect();
    files.sort();
    files
}

#[test]
fn print_then_parse_is_identity_on_corpus() {
    let files = corpus();
    assert!(files.len() >= 8);
    for f in files {
        let p = parse(&std::fs::read_to_string(&f).unwrap()).unwrap();
        let text = print(&p);
        let back = parse(&text).unwrap_or_else(|e| panic!("{}: {e}\n{text}", f.display()));
        assert_eq!(back, p, "{}", f.display());
        assert_eq!(print(&back), text);
    }
}

#[test]
fn deeper_unrolling_extends_the_shallower_one() {
    let src = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../cli/corpus/counter.dsat")).unwrap();
    let ts = parse(&src).unwrap().system.unwrap();
    for n in 1..5 {
        let (Formula::And(a), Formula::And(b)) = (unroll_bmc(&ts, n - 1).matrix, unroll_bmc(&ts, n).matrix) else {
            panic!("unrolling is a conjunction");
        };
        assert_eq!(a.len() + 1, b.len());
        // init and the first n-1 transitions are shared
        assert_eq!(a[..a.len() - 1], b[..a.len() - 1]);
        assert_eq!(unroll_bmc(&ts, n).bounds.len(), n + 1);
    }
}

fn random_cnf(r: &mut support::TestRng) -> Cnf {
    let clauses = (0..r.gen_range(5..=22))
        .map(|_| (0..3).map(|_| r.gen_range(1..=5i64) * if r.gen_bool(0.5) { 1 } else { -1 }).collect())
        .collect();
    Cnf { num_vars: 5, clauses }
}

#[test]
fn sat_encoding_matches_truth_tables() {
    let mut r = rng(5);
    for _ in 0..6 {
        let cnf = random_cnf(&mut r);
        let p = gen_sat_encoding(&cnf);
        let sf = to_standard_form(&p.to_sentence().unwrap()).unwrap();
        let res = solve(&sf, &DpllConfig::new(p.options.delta.clone().unwrap())).unwrap();
        assert_eq!(res.answer.verdict(), if cnf.brute_force() { "delta-sat" } else { "unsat" }, "{cnf}");
    }
    let trivial = parse_dimacs("p cnf 1 2\n1 0\n-1 0\n").unwrap();
    assert!(!trivial.brute_force());
}

#[test]
fn witness_reports_pass_the_certificate_check() {
    for f in corpus() {
        let p = parse(&std::fs::read_to_string(&f).unwrap()).unwrap();
        if p.system.is_some() {
            continue;
        }
        let sf = to_standard_form(&p.to_sentence().unwrap()).unwrap();
        let delta = p.options.delta.clone().unwrap_or_else(|| q(1, 1000));
        let res = solve(&sf, &DpllConfig::new(delta.clone())).unwrap();
        if let Answer::DeltaSat(m) = &res.answer {
            let terms: Vec<_> = m.asserted.iter().map(|a| sf.clauses[a.clause][a.disjunct].clone()).collect();
            assert!(certificate_check(&m.witness, &terms, &delta), "{}", f.display());
            assert!(m.witness.is_subset(&sf.domain_box()));
            for c in &sf.clauses {
                assert!(m.asserted.iter().any(|a| &sf.clauses[a.clause] == c));
            }
        }
    }
}

#[test]
fn example_one_normal_form() {
    let src = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../cli/corpus/example1.dsat")).unwrap();
    let p = parse(&src).unwrap();
    let phi = p.to_sentence().unwrap();
    assert_eq!(phi.num_vars(), 3);
    let sf = to_standard_form(&phi).unwrap();
    assert_eq!(sf.num_vars(), 5);
    let res = solve_sentence(&phi, &DpllConfig::new(q(1, 100))).unwrap();
    assert_eq!(res.answer.verdict(), "delta-sat");
}
