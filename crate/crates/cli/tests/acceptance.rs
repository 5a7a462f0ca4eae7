//! Acceptance suite: one PASS/FAIL line per criterion, with the measured
//! numbers and the runtime against its limit.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use deltasat::dpll::{solve, Answer, DpllConfig};
use deltasat::expr::{eval_point, rational_from_f64, Term};
use deltasat::frontend::{gen_sat_encoding, parse, unroll_bmc, Cnf, ProblemFile};
use deltasat::icp::{certificate_check, solve_conjunction, IcpConfig};
use deltasat::interval::{natural_extension, FloatBox, FloatInterval};
use deltasat::normalize::to_standard_form;
use deltasat::odes::integrate;
use deltasat::prune::sabotage::{CollapseToUpper, Inflate, PruneToEmpty};
use deltasat::prune::{box_consistency_narrow, hc4_revise, Constraint, PruneOperator};
use num_rational::BigRational;
use rand::Rng;
use support::{icp_vs_oracle, largest_value, q, random_box, random_conjunction, random_point, random_term, rng, Agreement, ClosedForm};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name)
}

fn load(name: &str) -> ProblemFile {
    parse(&std::fs::read_to_string(corpus(name)).unwrap()).unwrap()
}

// beyond this a 64-bit absolute point value needs more than the evaluator's precision cap
const MAX_MAGNITUDE: f64 = 1e12;

fn contains(iv: FloatInterval, v: &BigRational) -> bool {
    (iv.lo() == f64::NEG_INFINITY || &rational_from_f64(iv.lo()) <= v) && (iv.hi() == f64::INFINITY || v <= &rational_from_f64(iv.hi()))
}

fn inclusion_fuzz() -> Outcome {
    let mut r = rng(101);
    let cases = 100_000;
    let mut misses = 0;
    let mut redrawn = 0;
    let mut done = 0;
    while done < cases {
        let t = random_term(&mut r, 2, 4);
        let bx = random_box(&mut r, 2);
        let p = random_point(&mut r, &bx);
        let ext = natural_extension(&t, &bx).unwrap();
        if largest_value(&t, &bx) > MAX_MAGNITUDE {
            redrawn += 1;
            continue;
        }
        done += 1;
        let point: Vec<BigRational> = p.iter().map(|&x| rational_from_f64(x)).collect();
        let inside = eval_point(&t, &point, 64).is_ok_and(|v| contains(ext, &v));
        misses += !inside as usize;
    }
    outcome(misses == 0, format!("{} of {cases} point values inside the natural extension ({redrawn} huge-valued draws replaced)", cases - misses))
}

fn well_definedness() -> Outcome {
    let cases = 10_000;
    let hc4 = support::w_suite(cases, 201, |_, bx, c| hc4_revise(bx, c));
    let bc = support::w_suite(cases, 202, |r, bx, c| box_consistency_narrow(bx, c, r.gen_range(0..bx.dim())));
    let ode = support::ode_w_suite(cases, 203);
    let broken = |op: &dyn PruneOperator| support::w_suite(1000, 204, |_, bx, c| op.prune(bx, c));
    let (inflate, collapse, empty) = (broken(&Inflate), broken(&CollapseToUpper), broken(&PruneToEmpty));
    let pass = hc4.total() == 0 && bc.total() == 0 && ode.total() == 0 && inflate.w1 > 0 && collapse.w2 > 0 && empty.w3 > 0;
    outcome(
        pass,
        format!(
            "violations hc4 {}, box {}, ode {} over {cases} cases each; sabotaged caught: inflate W1 {}, collapse W2 {}, empty W3 {}",
            hc4.total(),
            bc.total(),
            ode.total(),
            inflate.w1,
            collapse.w2,
            empty.w3
        ),
    )
}

fn worked_instances() -> Outcome {
    let limit = Duration::from_secs(5);
    let mut notes = Vec::new();
    let mut pass = true;

    let t = Instant::now();
    let x = Term::var(0);
    let y = Term::var(1);
    let r = hc4_revise(&FloatBox::from_bounds(&[(1.0, 2.0), (0.0, 4.0)]), &Constraint::exact(x.clone() - y.pow(2)));
    let ok = !r.is_empty() && r.bx.get(1).is_subset(&FloatInterval::new(0.0, 2.0 + 1e-9));
    pass &= ok && t.elapsed() < limit;
    notes.push(format!("(a) y -> {} {:?}", r.bx.get(1), t.elapsed()));

    let t = Instant::now();
    let a = solve_conjunction(&[Constraint::new(x.pow(2) + Term::int(1), q(1, 2))], &FloatBox::from_bounds(&[(-1.0, 1.0)]), &IcpConfig::new(q(1, 2))).unwrap();
    pass &= a.is_unsat() && t.elapsed() < limit;
    notes.push(format!("(b) {} {:?}", if a.is_unsat() { "unsat" } else { "not unsat" }, t.elapsed()));

    let t = Instant::now();
    let p = load("example1.dsat");
    let phi = p.to_sentence().unwrap();
    let sf = to_standard_form(&phi).unwrap();
    let delta = q(1, 100);
    let res = solve(&sf, &DpllConfig::new(delta.clone())).unwrap();
    let certified = match &res.answer {
        Answer::DeltaSat(m) => {
            let terms: Vec<Term> = m.asserted.iter().map(|a| sf.clauses[a.clause][a.disjunct].clone()).collect();
            certificate_check(&m.witness, &terms, &delta)
        }
        _ => false,
    };
    // the implication holds somewhere in the cube, so delta-sat is the expected answer
    let satisfiable = (0..=20).any(|i| {
        let v = -1.0 + i as f64 / 10.0;
        (0..=20).any(|j| {
            let z = -1.0 + j as f64 / 10.0;
            z.exp() >= v + 0.1 || (0..=20).any(|k| (-1.0 + k as f64 / 10.0) < v.sin() - 0.1)
        })
    });
    let ok = phi.num_vars() == 3 && sf.num_vars() == 5 && satisfiable && certified;
    pass &= ok && t.elapsed() < limit;
    notes.push(format!("(c) {} vars, {} certified {:?}", sf.num_vars(), res.answer.verdict(), t.elapsed()));
    outcome(pass, notes.join("; "))
}

fn oracle_agreement() -> Outcome {
    let mut r = rng(401);
    let (mut agree, mut overlap, mut undecided) = (0, 0, 0);
    let mut contradictions = Vec::new();
    for k in 0..300 {
        let delta = [q(1, 2), q(1, 10), q(1, 100)][k % 3].clone();
        let sf = random_conjunction(&mut r);
        match icp_vs_oracle(&sf, &delta, 1 << 24) {
            Agreement::Agree => agree += 1,
            Agreement::Overlap => overlap += 1,
            Agreement::Undecided => undecided += 1,
            Agreement::Contradiction(msg) => contradictions.push(format!("#{k} delta {delta}: {msg}")),
        }
    }
    let decided = agree + overlap;
    outcome(
        contradictions.is_empty() && decided >= 200,
        format!(
            "{decided} decided ({agree} agree, {overlap} overlap band), {undecided} undecided, {} contradictions{}",
            contradictions.len(),
            contradictions.first().map(|c| format!(": {c}")).unwrap_or_default()
        ),
    )
}

fn truth_table(cnf: &Cnf) -> bool {
    (0u32..1 << cnf.num_vars).any(|m| {
        cnf.clauses.iter().all(|c| c.iter().any(|&l| (m >> (l.unsigned_abs() - 1) & 1 == 1) == (l > 0)))
    })
}

fn sat_encoding() -> Outcome {
    let mut r = rng(501);
    let mut correct = 0;
    let mut sat = 0;
    for _ in 0..20 {
        let clauses = (0..r.gen_range(12..=30))
            .map(|_| (0..3).map(|_| r.gen_range(1..=5i64) * if r.gen_bool(0.5) { 1 } else { -1 }).collect())
            .collect();
        let cnf = Cnf { num_vars: 5, clauses };
        let mut p = gen_sat_encoding(&cnf);
        p.options.delta = Some(q(1, 4));
        let sf = to_standard_form(&p.to_sentence().unwrap()).unwrap();
        let res = solve(&sf, &DpllConfig::new(q(1, 4))).unwrap();
        let expected = truth_table(&cnf);
        sat += expected as usize;
        correct += (res.answer.verdict() == if expected { "delta-sat" } else { "unsat" }) as usize;
    }
    outcome(correct == 20, format!("{correct}/20 verdicts match truth tables ({sat} satisfiable)"))
}

fn ulps_outside(inner: FloatInterval, outer: FloatInterval) -> u64 {
    let below = if inner.lo() < outer.lo() { outer.lo().to_bits().abs_diff(inner.lo().to_bits()) } else { 0 };
    let above = if inner.hi() > outer.hi() { inner.hi().to_bits().abs_diff(outer.hi().to_bits()) } else { 0 };
    below.max(above)
}

fn ode_tightness() -> Outcome {
    let ivp = ClosedForm::Decay.ivp();
    let y0 = FloatBox::from_bounds(&[(1.0, 1.0)]);
    let fin = |steps: usize| integrate(&ivp, &y0, &ivp.uniform_grid(steps)).unwrap().final_box().get(0);
    let e = fin(1000);
    let mut worst = 0;
    for steps in [125, 250, 500, 1000, 2000, 4000] {
        worst = worst.max(ulps_outside(fin(steps), fin(steps / 2)));
    }
    let pass = e.contains((-1.0f64).exp()) && e.width() < 0.01 && worst <= 2;
    outcome(pass, format!("enclosure {e} width {:.2e}; refinement exceeds the coarser enclosure by at most {worst} ulp", e.width()))
}

fn bmc_end_to_end() -> Outcome {
    let mut notes = Vec::new();
    let counter = load("counter.dsat");
    let ts = counter.system.as_ref().unwrap();
    let delta = counter.options.delta.clone().unwrap_or_else(deltasat::frontend::bmc::default_delta);
    let run = |ts, n, delta: &BigRational| solve(&to_standard_form(&unroll_bmc(ts, n)).unwrap(), &DpllConfig::new(delta.clone())).unwrap().answer;
    let at2 = run(ts, 2, &delta);
    let at3 = run(ts, 3, &delta);
    let trace: Vec<f64> = match &at3 {
        Answer::DeltaSat(m) => (0..4).map(|i| m.witness.get(i).mid()).collect(),
        _ => Vec::new(),
    };
    let exact = trace.len() == 4 && trace.iter().enumerate().all(|(i, v)| (v - i as f64).abs() <= 0.01);
    let mut pass = at2.verdict() == "unsat" && exact;
    notes.push(format!("counter: depth 2 {}, depth 3 {} trace {:?}", at2.verdict(), at3.verdict(), trace.iter().map(|v| v.round() as i64).collect::<Vec<_>>()));

    let decay = load("decay_steps.dsat");
    let ts = decay.system.as_ref().unwrap();
    let delta = decay.options.delta.clone().unwrap_or_else(deltasat::frontend::bmc::default_delta);
    let verdicts: Vec<Answer> = (1..=3).map(|n| run(ts, n, &delta)).collect();
    let values: Vec<f64> = match &verdicts[2] {
        Answer::DeltaSat(m) => (0..4).map(|i| m.witness.get(i).mid()).collect(),
        _ => Vec::new(),
    };
    let close = values.len() == 4 && values.iter().enumerate().all(|(i, v)| (v - (-(i as f64)).exp()).abs() <= 0.05);
    pass &= verdicts[0].verdict() == "unsat" && close;
    notes.push(format!(
        "ode steps: {} trace {:?}",
        verdicts.iter().map(Answer::verdict).collect::<Vec<_>>().join(" / "),
        values.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>()
    ));
    outcome(pass, notes.join("; "))
}

fn cli(args: &[String]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_deltasat")).args(args).output().unwrap();
    let mut bytes = out.stdout;
    bytes.extend(out.stderr);
    bytes.extend(format!("{:?}", out.status.code()).into_bytes());
    bytes
}

fn determinism() -> Outcome {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus("")).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    let mut runs = 0;
    let mut differing = Vec::new();
    for f in files {
        let path = f.to_string_lossy().into_owned();
        let src = std::fs::read_to_string(&f).unwrap();
        let mut invocations: Vec<Vec<&str>> = Vec::new();
        if path.ends_with(".cnf") {
            invocations.push(vec!["gen-sat"]);
        } else if src.contains("(declare-state") {
            invocations.push(vec!["bmc", "--depth", "3", "--witness"]);
            if src.contains("(invariant") {
                invocations.push(vec!["invcheck", "--witness"]);
            }
        } else {
            invocations.push(vec!["solve", "--witness"]);
            invocations.push(vec!["solve", "--format", "structured"]);
        }
        for inv in invocations {
            let mut args: Vec<String> = vec![inv[0].to_string(), path.clone()];
            args.extend(inv[1..].iter().map(|s| s.to_string()));
            if inv[0] != "gen-sat" {
                args.extend(["--seed".to_string(), "17".to_string()]);
            }
            runs += 1;
            if cli(&args) != cli(&args) {
                differing.push(args.join(" "));
            }
        }
    }
    outcome(differing.is_empty() && runs > 0, format!("{runs} invocations run twice, {} differ {:?}", differing.len(), differing))
}

fn main() -> ExitCode {
    let criteria: [(&str, u64, fn() -> Outcome); 8] = [
        ("interval inclusion fuzz", 60, inclusion_fuzz),
        ("pruning well-definedness suites", 120, well_definedness),
        ("worked instances", 15, worked_instances),
        ("grid oracle agreement", 600, oracle_agreement),
        ("SAT encoding", 60, sat_encoding),
        ("ODE enclosure tightness", 10, ode_tightness),
        ("bounded model checking", 30, bmc_end_to_end),
        ("seeded determinism", 300, determinism),
    ];
    // optional criterion numbers select a subset; other arguments are ignored
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (k, (name, limit, run)) in criteria.iter().enumerate() {
        if !selected.is_empty() && !selected.contains(&(k + 1)) {
            continue;
        }
        let t = Instant::now();
        let o = run();
        let elapsed = t.elapsed();
        let pass = o.pass && elapsed < Duration::from_secs(*limit);
        failed += !pass as usize;
        println!(
            "{} criterion {}: {name}: {} [{:.2}s, limit {limit}s]",
            if pass { "PASS" } else { "FAIL" },
            k + 1,
            o.detail,
            elapsed.as_secs_f64()
        );
        std::io::Write::flush(&mut std::io::stdout()).unwrap();
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
