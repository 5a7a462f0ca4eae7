//! Bounded model checking and inductive-invariant checks.

use num_rational::BigRational;

use super::parse::TransitionSystem;
use crate::dpll::{solve_sentence, Answer, DpllConfig, DpllError, SolveResult};
use crate::expr::{BoundedSigma1, Formula};

/// Default relaxation for model checking.
pub fn default_delta() -> BigRational {
    BigRational::new(1.into(), 1000.into())
}

fn shift(f: &Formula, map: impl Fn(usize) -> usize) -> Formula {
    f.map_terms(&|t| t.rename_vars(&map))
}

/// `Init(x0) and Trans(x0, x1) and ... and Trans(x_{n-1}, x_n) and Unsafe(x_n)`
/// over variables `x@i`, step `i` occupying indices `i*k .. (i+1)*k`.
pub fn unroll_bmc(ts: &TransitionSystem, n: usize) -> BoundedSigma1 {
    let k = ts.dim();
    let mut parts = vec![ts.init.clone()];
    for i in 0..n {
        parts.push(shift(&ts.trans, |v| i * k + v));
    }
    parts.push(shift(&ts.unsafe_set, |v| n * k + v));
    let mut bounds = Vec::new();
    let mut names = Vec::new();
    for i in 0..=n {
        for v in &ts.state {
            bounds.push(v.bounds.clone());
            names.push(format!("{}@{i}", v.name));
        }
    }
    BoundedSigma1 { bounds, matrix: Formula::And(parts), names }
}

/// The negated initiation, consecution and safety conditions for the
/// invariant, each an existential sentence that is unsat when the condition
/// holds.
pub fn invariant_conditions(ts: &TransitionSystem) -> Option<[(&'static str, BoundedSigma1); 3]> {
    let inv = ts.invariant.as_ref()?;
    let k = ts.dim();
    let bounds: Vec<_> = ts.state.iter().map(|v| v.bounds.clone()).collect();
    let sentence = |bounds: Vec<_>, names: Vec<String>, parts: Vec<Formula>| BoundedSigma1 { bounds, matrix: Formula::And(parts), names };
    let initiation = sentence(bounds.clone(), ts.names(), vec![ts.init.clone(), Formula::not(inv.clone())]);
    let consecution = sentence(
        bounds.iter().chain(&bounds).cloned().collect(),
        ts.primed_names(),
        vec![inv.clone(), ts.trans.clone(), Formula::not(shift(inv, |v| v + k))],
    );
    let safety = sentence(bounds, ts.names(), vec![inv.clone(), ts.unsafe_set.clone()]);
    Some([("initiation", initiation), ("consecution", consecution), ("safety", safety)])
}

#[derive(Clone, Debug)]
pub struct InvariantReport {
    pub checks: Vec<(&'static str, BoundedSigma1, SolveResult)>,
}

impl InvariantReport {
    /// Delta-sat if any condition fails, unknown if any is undecided, else unsat.
    pub fn overall(&self) -> &'static str {
        let answers: Vec<&Answer> = self.checks.iter().map(|c| &c.2.answer).collect();
        if answers.iter().any(|a| matches!(a, Answer::DeltaSat(_))) {
            "delta-sat"
        } else if answers.iter().any(|a| matches!(a, Answer::ResourceOut)) {
            "unknown (resource limit)"
        } else {
            "unsat"
        }
    }

    pub fn conclusion(&self) -> &'static str {
        match self.overall() {
            "unsat" => "Inv is an inductive invariant proving safety",
            "delta-sat" => "not inductive, or violates inductiveness under a small numerical perturbation",
            _ => "undecided within the resource limit",
        }
    }
}

/// Solve each negated condition separately; `None` without an invariant.
pub fn check_invariant(ts: &TransitionSystem, cfg: &DpllConfig) -> Option<Result<InvariantReport, DpllError>> {
    let conds = invariant_conditions(ts)?;
    let mut checks = Vec::new();
    for (name, s) in conds {
        match solve_sentence(&s, cfg) {
            Ok(r) => checks.push((name, s, r)),
            Err(e) => return Some(Err(e)),
        }
    }
    Some(Ok(InvariantReport { checks }))
}
