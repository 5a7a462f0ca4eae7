//! Propositional CNF to real-arithmetic problems. A propositional variable
//! `p` becomes a real `x` in `[-1, 2]` pinned near 0 or 1; the literal `p`
//! says `x >= 1` and `not p` says `x <= 0`.

use num_rational::BigRational;

use super::parse::{Options, ProblemFile, VarDecl};
use super::FrontendError;
use crate::expr::{Formula, RationalInterval, Relation, Term};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cnf {
    pub num_vars: usize,
    /// DIMACS literals: `v` or `-v` for variable `v` in `1..=num_vars`.
    pub clauses: Vec<Vec<i64>>,
}

impl Cnf {
    pub fn eval(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.iter().any(|&l| assignment[l.unsigned_abs() as usize - 1] == (l > 0)))
    }

    /// Satisfiability by enumerating all assignments.
    pub fn brute_force(&self) -> bool {
        (0..1u64 << self.num_vars).any(|m| self.eval(&(0..self.num_vars).map(|i| m >> i & 1 == 1).collect::<Vec<_>>()))
    }
}

impl std::fmt::Display for Cnf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "p cnf {} {}", self.num_vars, self.clauses.len())?;
        for c in &self.clauses {
            for l in c {
                write!(f, "{l} ")?;
            }
            writeln!(f, "0")?;
        }
        Ok(())
    }
}

pub fn parse_dimacs(src: &str) -> Result<Cnf, FrontendError> {
    let err = |line: usize, msg: String| FrontendError::Parse { line, col: 1, msg };
    let mut num_vars = None;
    let mut clauses = Vec::new();
    let mut current = Vec::new();
    for (i, line) in src.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('p') {
            let f: Vec<&str> = rest.split_whitespace().collect();
            match f.as_slice() {
                ["cnf", v, _] => num_vars = Some(v.parse::<usize>().map_err(|_| err(i + 1, "bad variable count".into()))?),
                _ => return Err(err(i + 1, "expected 'p cnf VARS CLAUSES'".into())),
            }
            continue;
        }
        let n = num_vars.ok_or_else(|| err(i + 1, "clause before the problem line".into()))?;
        for tok in line.split_whitespace() {
            let l: i64 = tok.parse().map_err(|_| err(i + 1, format!("bad literal '{tok}'")))?;
            if l == 0 {
                clauses.push(std::mem::take(&mut current));
            } else if l.unsigned_abs() as usize > n {
                return Err(err(i + 1, format!("literal {l} beyond {n} variables")));
            } else {
                current.push(l);
            }
        }
    }
    if !current.is_empty() {
        clauses.push(current);
    }
    Ok(Cnf { num_vars: num_vars.ok_or_else(|| err(1, "missing problem line".into()))?, clauses })
}

pub fn gen_sat_encoding(cnf: &Cnf) -> ProblemFile {
    let x = |v: usize| Term::var(v);
    let literal = |l: i64| {
        let v = l.unsigned_abs() as usize - 1;
        if l > 0 {
            Formula::atom(x(v) - Term::int(1), Relation::Ge)
        } else {
            Formula::atom(x(v), Relation::Le)
        }
    };
    let mut assertions: Vec<Formula> = (0..cnf.num_vars)
        .map(|v| Formula::Or(vec![Formula::atom(x(v), Relation::Eq), Formula::atom(x(v) - Term::int(1), Relation::Eq)]))
        .collect();
    assertions.extend(cnf.clauses.iter().map(|c| Formula::Or(c.iter().map(|&l| literal(l)).collect())));
    ProblemFile {
        vars: (0..cnf.num_vars).map(|v| VarDecl { name: format!("p{}", v + 1), bounds: RationalInterval::closed_int(-1, 2) }).collect(),
        ivps: Vec::new(),
        assertions,
        options: Options { delta: Some(BigRational::new(1.into(), 4.into())), ..Options::default() },
        system: None,
    }
}
