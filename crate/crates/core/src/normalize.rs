//! Standard form: a conjunction of disjunctions of equalities `f = 0` over
//! the original variables plus bounded slack variables.
//!
//! `f >= 0` becomes `f - v = 0` with `v in [0, m]`, `f > 0` becomes the same
//! with `v in (0, m]`, `f <= 0` and `f < 0` go through `-f`, and `f != 0`
//! splits into `f < 0 or f > 0`. The bound `m` exceeds a rigorous upper
//! bound of the slack's partner term over the closed domain.

use std::fmt;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::expr::{
    decide_abs_le, decide_atom, Atom, BoundedSigma1, EvalConfig, ExprError, Formula, RationalInterval, Relation, Term, Truth,
};
use crate::interval::{natural_extension, FloatBox, FloatInterval};

/// Clause count beyond which CNF conversion gives up.
pub const MAX_CNF_CLAUSES: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NormalizeError {
    #[error("variable {0} has an unbounded domain")]
    UnboundedVariable(String),
    #[error("subterm may be undefined over the domain: {0}")]
    UndefinedSubterm(String),
    #[error("conjunctive normal form exceeds {0} clauses")]
    CnfTooLarge(usize),
    #[error("delta must not be negative")]
    NegativeDelta,
    #[error("perturbation has {got} entries where {expected} are needed")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("perturbation entry exceeds delta")]
    ExceedsDelta,
    #[error("interval of {0} is a single point and has no interior")]
    EmptyInterior(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Provenance of one slack variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slack {
    /// Index of the slack variable.
    pub var: usize,
    pub clause: usize,
    pub disjunct: usize,
    /// The atom (after negation elimination) that introduced it.
    pub source: Atom,
    pub strict: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StandardForm {
    /// Bounds of the original variables followed by the slack variables.
    pub bounds: Vec<RationalInterval>,
    pub names: Vec<String>,
    /// Each clause is a disjunction of `f = 0`.
    pub clauses: Vec<Vec<Term>>,
    pub slack_map: Vec<Slack>,
    pub num_original: usize,
}

impl StandardForm {
    /// Conjunction of equalities `t = 0` over closed bounds, without slacks.
    pub fn from_conjunction(bounds: Vec<RationalInterval>, terms: Vec<Term>) -> StandardForm {
        let names = (0..bounds.len()).map(|i| format!("x{i}")).collect();
        let num_original = bounds.len();
        StandardForm { bounds, names, clauses: terms.into_iter().map(|t| vec![t]).collect(), slack_map: Vec::new(), num_original }
    }

    pub fn num_vars(&self) -> usize {
        self.bounds.len()
    }

    /// True when some clause has no disjuncts left.
    pub fn has_empty_clause(&self) -> bool {
        self.clauses.iter().any(|c| c.is_empty())
    }

    pub fn num_disjuncts(&self) -> usize {
        self.clauses.iter().map(|c| c.len()).sum()
    }

    /// Outward float box of the closed domain.
    pub fn domain_box(&self) -> FloatBox {
        domain_box(&self.bounds)
    }

    /// The standard form as a sentence with equality atoms.
    pub fn to_sentence(&self) -> BoundedSigma1 {
        let matrix = Formula::And(
            self.clauses
                .iter()
                .map(|c| Formula::Or(c.iter().map(|t| Formula::atom(t.clone(), Relation::Eq)).collect()))
                .collect(),
        );
        BoundedSigma1 { bounds: self.bounds.clone(), matrix, names: self.names.clone() }
    }

    /// Copy with every bound closed.
    pub fn closure(&self) -> StandardForm {
        StandardForm { bounds: self.bounds.iter().map(|b| b.closure()).collect(), ..self.clone() }
    }
}

impl fmt::Display for StandardForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, b) in self.names.iter().zip(&self.bounds) {
            writeln!(f, "{name} in {b}")?;
        }
        for c in &self.clauses {
            let parts: Vec<String> = c.iter().map(|t| format!("{} = 0", t.display(&self.names))).collect();
            writeln!(f, "({})", if parts.is_empty() { "false".into() } else { parts.join(" or ") })?;
        }
        Ok(())
    }
}

/// Outward float box enclosing the closure of the bounds.
pub fn domain_box(bounds: &[RationalInterval]) -> FloatBox {
    FloatBox::new(
        bounds
            .iter()
            .map(|b| match (&b.lo, &b.hi) {
                (Some(l), Some(h)) => FloatInterval::hull_rational_pair(l, h),
                (l, h) => FloatInterval::new(
                    l.as_ref().map_or(f64::NEG_INFINITY, |l| FloatInterval::hull_rational(l).lo()),
                    h.as_ref().map_or(f64::INFINITY, |h| FloatInterval::hull_rational(h).hi()),
                ),
            })
            .collect(),
    )
}

/// Conjunctive normal form of an NNF formula as clauses of atoms.
fn cnf(f: &Formula) -> Result<Vec<Vec<Atom>>, NormalizeError> {
    match f {
        Formula::Atom(a) => Ok(vec![vec![a.clone()]]),
        Formula::And(xs) => {
            let mut out = Vec::new();
            for x in xs {
                out.extend(cnf(x)?);
                if out.len() > MAX_CNF_CLAUSES {
                    return Err(NormalizeError::CnfTooLarge(MAX_CNF_CLAUSES));
                }
            }
            Ok(out)
        }
        Formula::Or(xs) => {
            let mut acc: Vec<Vec<Atom>> = vec![vec![]];
            for x in xs {
                let part = cnf(x)?;
                if acc.len().saturating_mul(part.len()) > MAX_CNF_CLAUSES {
                    return Err(NormalizeError::CnfTooLarge(MAX_CNF_CLAUSES));
                }
                let mut next = Vec::with_capacity(acc.len() * part.len());
                for a in &acc {
                    for p in &part {
                        let mut c = a.clone();
                        c.extend(p.iter().cloned());
                        next.push(c);
                    }
                }
                acc = next;
            }
            Ok(acc)
        }
        Formula::Not(_) => unreachable!("formula is in negation normal form"),
    }
}

fn check_denominators(phi: &BoundedSigma1, bx: &FloatBox) -> Result<(), NormalizeError> {
    let mut err = None;
    phi.matrix.visit_atoms(&mut |a| {
        for d in a.term.denominators() {
            let r = natural_extension(d, bx);
            if err.is_none() && r.map_or(true, |r| r.contains_zero()) {
                err = Some(NormalizeError::UndefinedSubterm(format!(
                    "denominator {} may vanish",
                    d.display(&phi.names)
                )));
            }
        }
    });
    err.map_or(Ok(()), Err)
}

/// Standard form of a bounded sentence. Atoms that cannot hold
/// anywhere in the closed domain (a strict comparison whose partner term is
/// bounded by zero, or a non-strict one bounded below zero) are dropped from
/// their clause; a clause that loses all disjuncts makes the form
/// propositionally unsatisfiable.
pub fn to_standard_form(phi: &BoundedSigma1) -> Result<StandardForm, NormalizeError> {
    for (b, name) in phi.bounds.iter().zip(&phi.names) {
        if !b.is_bounded() {
            return Err(NormalizeError::UnboundedVariable(name.clone()));
        }
    }
    let bx = domain_box(&phi.bounds);
    check_denominators(phi, &bx)?;
    let clauses = cnf(&phi.matrix.to_nnf())?;
    let n = phi.num_vars();
    let mut sf = StandardForm {
        bounds: phi.bounds.clone(),
        names: phi.names.clone(),
        clauses: Vec::with_capacity(clauses.len()),
        slack_map: Vec::new(),
        num_original: n,
    };
    for (ci, clause) in clauses.iter().enumerate() {
        let mut out = Vec::new();
        for atom in clause {
            let pieces: Vec<(Term, bool)> = match atom.rel {
                Relation::Eq => {
                    out.push(atom.term.clone());
                    continue;
                }
                Relation::Ne => vec![(atom.term.negated(), true), (atom.term.clone(), true)],
                Relation::Lt => vec![(atom.term.negated(), true)],
                Relation::Le => vec![(atom.term.negated(), false)],
                Relation::Gt => vec![(atom.term.clone(), true)],
                Relation::Ge => vec![(atom.term.clone(), false)],
            };
            for (g, strict) in pieces {
                let hi = natural_extension(&g, &bx)
                    .map_err(|e| NormalizeError::UndefinedSubterm(e.to_string()))?
                    .hi();
                if !hi.is_finite() {
                    return Err(NormalizeError::UndefinedSubterm(format!(
                        "{} is unbounded over the domain",
                        g.display(&phi.names)
                    )));
                }
                if (strict && hi <= 0.0) || (!strict && hi < 0.0) {
                    continue;
                }
                let m = BigRational::from_integer(BigRational::from_float(hi).expect("finite").ceil().to_integer() + 1);
                let var = sf.bounds.len();
                sf.bounds.push(RationalInterval { lo: Some(BigRational::zero()), hi: Some(m), lo_open: strict, hi_open: false });
                sf.names.push(format!("slack!{}", sf.slack_map.len()));
                sf.slack_map.push(Slack { var, clause: ci, disjunct: out.len(), source: atom.clone(), strict });
                out.push(g - Term::var(var));
            }
        }
        sf.clauses.push(out);
    }
    Ok(sf)
}

/// The delta-weakening `|f| <= delta` of a standard form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeltaWeakening {
    pub base: StandardForm,
    pub delta: BigRational,
}

/// With `delta = 0` the weakening is the standard form itself.
pub fn delta_weaken(sf: &StandardForm, delta: BigRational) -> Result<DeltaWeakening, NormalizeError> {
    if delta.is_negative() {
        return Err(NormalizeError::NegativeDelta);
    }
    Ok(DeltaWeakening { base: sf.clone(), delta })
}

impl DeltaWeakening {
    /// Whether the weakened matrix holds at a point of the closed domain.
    /// Points outside the closed domain give `False`.
    pub fn holds_at(&self, point: &[BigRational]) -> Truth {
        if point.len() != self.base.num_vars() {
            return Truth::False;
        }
        if !self.base.bounds.iter().zip(point).all(|(b, x)| b.closure().contains(x)) {
            return Truth::False;
        }
        let cfg = EvalConfig::default();
        all_clauses(&self.base.clauses, |t| decide_abs_le(t, point, &self.delta, &cfg))
    }
}

fn all_clauses(clauses: &[Vec<Term>], mut disjunct: impl FnMut(&Term) -> Truth) -> Truth {
    let mut result = Truth::True;
    for c in clauses {
        let mut clause = Truth::False;
        for t in c {
            match disjunct(t) {
                Truth::True => {
                    clause = Truth::True;
                    break;
                }
                Truth::Unknown => clause = Truth::Unknown,
                Truth::False => {}
            }
        }
        match clause {
            Truth::False => return Truth::False,
            Truth::Unknown => result = Truth::Unknown,
            Truth::True => {}
        }
    }
    result
}

/// Constants `c_ij`, one per disjunct, bounded by delta in absolute value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Perturbation {
    pub c: Vec<Vec<BigRational>>,
}

impl Perturbation {
    pub fn new(c: Vec<Vec<BigRational>>, delta: &BigRational) -> Result<Perturbation, NormalizeError> {
        if c.iter().flatten().any(|x| x.abs() > *delta) {
            return Err(NormalizeError::ExceedsDelta);
        }
        Ok(Perturbation { c })
    }

    pub fn zero(sf: &StandardForm) -> Perturbation {
        Perturbation { c: sf.clauses.iter().map(|c| vec![BigRational::zero(); c.len()]).collect() }
    }
}

/// Replace every disjunct `f = 0` by `f - c = 0`.
pub fn apply_perturbation(sf: &StandardForm, p: &Perturbation) -> Result<StandardForm, NormalizeError> {
    if p.c.len() != sf.clauses.len() {
        return Err(NormalizeError::DimensionMismatch { expected: sf.clauses.len(), got: p.c.len() });
    }
    let mut out = sf.clone();
    for (clause, cs) in out.clauses.iter_mut().zip(&p.c) {
        if clause.len() != cs.len() {
            return Err(NormalizeError::DimensionMismatch { expected: clause.len(), got: cs.len() });
        }
        for (t, c) in clause.iter_mut().zip(cs) {
            if !c.is_zero() {
                *t = t.clone() - Term::constant(c.clone());
            }
        }
    }
    Ok(out)
}

/// Whether the standard form (without relaxation) holds at a point.
pub fn standard_form_holds_at(sf: &StandardForm, point: &[BigRational]) -> Truth {
    delta_weaken(sf, BigRational::zero()).expect("zero delta").holds_at_strict(point)
}

impl DeltaWeakening {
    /// Like [`DeltaWeakening::holds_at`] but honouring open bounds.
    pub fn holds_at_strict(&self, point: &[BigRational]) -> Truth {
        if point.len() != self.base.num_vars() || !self.base.bounds.iter().zip(point).all(|(b, x)| b.contains(x)) {
            return Truth::False;
        }
        self.holds_at(point)
    }
}

/// Closure of a sentence: every bound closed.
pub fn closure(phi: &BoundedSigma1) -> BoundedSigma1 {
    BoundedSigma1 { bounds: phi.bounds.iter().map(|b| b.closure()).collect(), ..phi.clone() }
}

/// Interior of a sentence: every bound open.
pub fn interior(phi: &BoundedSigma1) -> Result<BoundedSigma1, NormalizeError> {
    for (b, name) in phi.bounds.iter().zip(&phi.names) {
        if b.is_degenerate() {
            return Err(NormalizeError::EmptyInterior(name.clone()));
        }
    }
    Ok(BoundedSigma1 { bounds: phi.bounds.iter().map(|b| b.interior()).collect(), ..phi.clone() })
}

/// Three-valued truth of a sentence's matrix at a point inside its domain.
pub fn sentence_holds_at(phi: &BoundedSigma1, point: &[BigRational]) -> Truth {
    if point.len() != phi.num_vars() || !phi.bounds.iter().zip(point).all(|(b, x)| b.contains(x)) {
        return Truth::False;
    }
    let cfg = EvalConfig::default();
    formula_truth(&phi.matrix.to_nnf(), &|a| decide_atom(a, point, &cfg))
}

fn formula_truth(f: &Formula, atom: &dyn Fn(&Atom) -> Truth) -> Truth {
    match f {
        Formula::Atom(a) => atom(a),
        Formula::And(xs) => {
            let mut r = Truth::True;
            for x in xs {
                match formula_truth(x, atom) {
                    Truth::False => return Truth::False,
                    Truth::Unknown => r = Truth::Unknown,
                    Truth::True => {}
                }
            }
            r
        }
        Formula::Or(xs) => {
            let mut r = Truth::False;
            for x in xs {
                match formula_truth(x, atom) {
                    Truth::True => return Truth::True,
                    Truth::Unknown => r = Truth::Unknown,
                    Truth::False => {}
                }
            }
            r
        }
        Formula::Not(x) => match formula_truth(x, atom) {
            Truth::True => Truth::False,
            Truth::False => Truth::True,
            Truth::Unknown => Truth::Unknown,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn x() -> Term {
        Term::var(0)
    }

    fn sentence(bounds: Vec<RationalInterval>, matrix: Formula) -> BoundedSigma1 {
        BoundedSigma1::with_default_names(bounds, matrix).unwrap()
    }

    #[test]
    fn disequality_splits_into_two_slacks() {
        let phi = sentence(vec![RationalInterval::closed_int(-1, 1)], Formula::atom(x(), Relation::Ne));
        let sf = to_standard_form(&phi).unwrap();
        assert_eq!(sf.clauses.len(), 1);
        assert_eq!(sf.clauses[0], vec![-x() - Term::var(1), x() - Term::var(2)]);
        for s in &sf.slack_map {
            let b = &sf.bounds[s.var];
            assert!(b.lo_open && !b.hi_open);
            assert!(b.hi.as_ref().unwrap() > &q(1, 1));
        }
    }

    #[test]
    fn implication_example_standard_form() {
        let (xv, y, z) = (Term::var(0), Term::var(1), Term::var(2));
        let matrix = Formula::implies(
            Formula::atom(z.clone().exp() - xv.clone(), Relation::Lt),
            Formula::atom(y.clone() - xv.clone().sin(), Relation::Lt),
        );
        let phi = sentence(vec![RationalInterval::closed_int(-1, 1); 3], matrix);
        let sf = to_standard_form(&phi).unwrap();
        assert_eq!(sf.num_vars(), 5);
        assert_eq!(sf.clauses, vec![vec![z.exp() - xv.clone() - Term::var(3), xv.sin() - y - Term::var(4)]]);
        let (u, v) = (&sf.bounds[3], &sf.bounds[4]);
        assert!(!u.lo_open && v.lo_open);
        // upper bounds of e^z - x and sin x - y are below e + 1 and 2
        assert!(u.hi.as_ref().unwrap() <= &q(10, 1) && u.hi.as_ref().unwrap() > &q(3718, 1000));
        assert!(v.hi.as_ref().unwrap() <= &q(10, 1) && v.hi.as_ref().unwrap() > &q(2, 1));
    }

    #[test]
    fn equalities_are_unchanged() {
        let phi = sentence(vec![RationalInterval::closed_int(0, 1)], Formula::atom(x(), Relation::Eq));
        let sf = to_standard_form(&phi).unwrap();
        assert_eq!(sf.clauses, vec![vec![x()]]);
        assert!(sf.slack_map.is_empty());
    }

    #[test]
    fn infeasible_strict_atoms_are_dropped() {
        // x < 0 over [0, 1] cannot hold
        let phi = sentence(vec![RationalInterval::closed_int(0, 1)], Formula::atom(x(), Relation::Lt));
        assert!(to_standard_form(&phi).unwrap().has_empty_clause());
    }

    #[test]
    fn vanishing_denominator_is_rejected() {
        let phi = sentence(vec![RationalInterval::closed_int(-1, 1)], Formula::atom(Term::int(1) / x(), Relation::Eq));
        assert!(matches!(to_standard_form(&phi), Err(NormalizeError::UndefinedSubterm(_))));
    }

    #[test]
    fn weakening_semantics() {
        let phi = sentence(vec![RationalInterval::closed_int(-1, 1)], Formula::atom(x(), Relation::Eq));
        let sf = to_standard_form(&phi).unwrap();
        let w = delta_weaken(&sf, q(1, 10)).unwrap();
        assert_eq!(w.holds_at(&[q(1, 20)]), Truth::True);
        assert_eq!(standard_form_holds_at(&sf, &[q(1, 20)]), Truth::False);
        assert_eq!(delta_weaken(&sf, q(-1, 10)), Err(NormalizeError::NegativeDelta));
        assert_eq!(delta_weaken(&sf, q(0, 1)).unwrap().holds_at(&[q(0, 1)]), Truth::True);
    }

    #[test]
    fn perturbations() {
        let phi = sentence(vec![RationalInterval::closed_int(-1, 1)], Formula::atom(x(), Relation::Eq));
        let sf = to_standard_form(&phi).unwrap();
        assert_eq!(apply_perturbation(&sf, &Perturbation::zero(&sf)).unwrap(), sf);
        let p = Perturbation::new(vec![vec![q(1, 10)]], &q(1, 10)).unwrap();
        let out = apply_perturbation(&sf, &p).unwrap();
        assert_eq!(out.clauses[0][0], x() - Term::constant(q(1, 10)));
        assert_eq!(Perturbation::new(vec![vec![q(1, 5)]], &q(1, 10)), Err(NormalizeError::ExceedsDelta));
        let bad = Perturbation { c: vec![] };
        assert!(matches!(apply_perturbation(&sf, &bad), Err(NormalizeError::DimensionMismatch { .. })));
    }

    #[test]
    fn closure_and_interior() {
        let b = RationalInterval { lo: Some(q(0, 1)), hi: Some(q(1, 1)), lo_open: false, hi_open: true };
        let phi = sentence(vec![b], Formula::atom(x(), Relation::Ge));
        assert_eq!(closure(&phi).bounds[0], RationalInterval::closed_int(0, 1));
        let int = interior(&phi).unwrap();
        assert!(int.bounds[0].lo_open && int.bounds[0].hi_open);
        let point = sentence(vec![RationalInterval::closed_int(2, 2)], Formula::atom(x(), Relation::Ge));
        assert!(matches!(interior(&point), Err(NormalizeError::EmptyInterior(_))));
    }
}
