//! Verdicts and witnesses as text or JSON.

use std::fmt::Write;

use serde::Serialize;

use crate::dpll::{Answer, SolveResult, SolveStats};
use crate::interval::FloatInterval;
use crate::normalize::StandardForm;
use crate::oracle::{OracleAnswer, OracleResult};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarRange {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstraintRange {
    pub clause: usize,
    pub disjunct: usize,
    pub term: String,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub verdict: &'static str,
    pub witness: Vec<VarRange>,
    pub constraints: Vec<ConstraintRange>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<SolveStats>,
}

fn var_ranges(names: &[String], ivs: &[FloatInterval]) -> Vec<VarRange> {
    names.iter().zip(ivs).map(|(n, iv)| VarRange { name: n.clone(), lo: iv.lo(), hi: iv.hi() }).collect()
}

impl Report {
    pub fn from_solve(sf: &StandardForm, r: &SolveResult) -> Report {
        let (witness, constraints) = match &r.answer {
            Answer::DeltaSat(m) => (
                var_ranges(&sf.names, m.witness.intervals()),
                m.asserted
                    .iter()
                    .map(|a| ConstraintRange {
                        clause: a.clause,
                        disjunct: a.disjunct,
                        term: sf.clauses[a.clause][a.disjunct].display(&sf.names).to_string(),
                        lo: a.range.lo(),
                        hi: a.range.hi(),
                    })
                    .collect(),
            ),
            _ => (Vec::new(), Vec::new()),
        };
        Report { verdict: r.answer.verdict(), witness, constraints, stats: Some(r.stats.clone()) }
    }

    /// Grid points are reported as the float hull of the exact coordinates.
    pub fn from_oracle(sf: &StandardForm, r: &OracleResult) -> Report {
        match &r.answer {
            OracleAnswer::Unsat => Report { verdict: "unsat", witness: Vec::new(), constraints: Vec::new(), stats: None },
            OracleAnswer::DeltaSat(p) => {
                let ivs: Vec<FloatInterval> = p.iter().map(FloatInterval::hull_rational).collect();
                Report { verdict: "delta-sat", witness: var_ranges(&sf.names, &ivs), constraints: Vec::new(), stats: None }
            }
        }
    }

    /// The verdict line, then `name in [lo, hi]` per variable, then with
    /// `constraints` one range line per asserted equality.
    pub fn render_text(&self, constraints: bool) -> String {
        let mut out = format!("{}\n", self.verdict);
        for v in &self.witness {
            let _ = writeln!(out, "{} in [{:?}, {:?}]", v.name, v.lo, v.hi);
        }
        if constraints {
            for c in &self.constraints {
                let _ = writeln!(out, "constraint {}.{}: {} = 0 in [{:?}, {:?}]", c.clause, c.disjunct, c.term, c.lo, c.hi);
            }
        }
        out
    }

    pub fn render_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }
}

/// Parse `name in [lo, hi]` lines back into intervals.
pub fn parse_witness_lines(text: &str) -> Vec<(String, FloatInterval)> {
    text.lines()
        .filter_map(|l| {
            let (name, rest) = l.split_once(" in [")?;
            if name.starts_with("constraint ") {
                return None;
            }
            let (lo, hi) = rest.strip_suffix(']')?.split_once(", ")?;
            Some((name.to_string(), FloatInterval::checked(lo.parse().ok()?, hi.parse().ok()?)))
        })
        .collect()
}
