//! Terms, atomic formulas and bounded existential sentences over the reals.
//!
//! All constants and domain endpoints are exact rationals. Floating point only
//! shows up once a term is handed to the interval layer.

mod dyadic;
mod eval;

use std::collections::BTreeSet;
use std::fmt;
use std::ops;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use thiserror::Error;

use crate::odes::Ivp;

pub use eval::{decide_abs_le, decide_atom, enclose_point, eval_point, eval_point_with, EvalConfig, EvalError, Truth};

/// A real-valued term over variables `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Term {
    Var(usize),
    Const(BigRational),
    Neg(Box<Term>),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    Mul(Box<Term>, Box<Term>),
    Div(Box<Term>, Box<Term>),
    /// Integer power with exponent at least one.
    Pow(Box<Term>, u32),
    Exp(Box<Term>),
    Sin(Box<Term>),
    Cos(Box<Term>),
    Min(Box<Term>, Box<Term>),
    Max(Box<Term>, Box<Term>),
    Abs(Box<Term>),
    /// Component of the solution of an initial value problem.
    Flow(FlowRef),
}

/// `y_component(time; init)` for the referenced IVP.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowRef {
    pub ivp: Arc<Ivp>,
    pub component: usize,
    pub time: Box<Term>,
    pub init: Vec<Term>,
}

impl Term {
    pub fn var(i: usize) -> Term {
        Term::Var(i)
    }

    pub fn constant(value: BigRational) -> Term {
        Term::Const(value)
    }

    pub fn int(value: i64) -> Term {
        Term::Const(BigRational::from_integer(BigInt::from(value)))
    }

    /// `numer / denom` as an exact constant.
    pub fn ratio(numer: i64, denom: i64) -> Term {
        Term::Const(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn pow(self, n: u32) -> Term {
        assert!(n >= 1, "exponent must be positive");
        Term::Pow(Box::new(self), n)
    }

    pub fn exp(self) -> Term {
        Term::Exp(Box::new(self))
    }

    pub fn sin(self) -> Term {
        Term::Sin(Box::new(self))
    }

    pub fn cos(self) -> Term {
        Term::Cos(Box::new(self))
    }

    pub fn abs(self) -> Term {
        Term::Abs(Box::new(self))
    }

    pub fn min(self, other: Term) -> Term {
        Term::Min(Box::new(self), Box::new(other))
    }

    pub fn max(self, other: Term) -> Term {
        Term::Max(Box::new(self), Box::new(other))
    }

    pub fn children(&self) -> Vec<&Term> {
        match self {
            Term::Var(_) | Term::Const(_) => vec![],
            Term::Neg(a)
            | Term::Pow(a, _)
            | Term::Exp(a)
            | Term::Sin(a)
            | Term::Cos(a)
            | Term::Abs(a) => vec![a],
            Term::Add(a, b)
            | Term::Sub(a, b)
            | Term::Mul(a, b)
            | Term::Div(a, b)
            | Term::Min(a, b)
            | Term::Max(a, b) => vec![a, b],
            Term::Flow(f) => {
                let mut v: Vec<&Term> = vec![&f.time];
                v.extend(f.init.iter());
                v
            }
        }
    }

    /// Variables syntactically present in the term.
    pub fn free_vars(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<usize>) {
        if let Term::Var(i) = self {
            out.insert(*i);
        }
        for c in self.children() {
            c.collect_vars(out);
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn contains_flow(&self) -> bool {
        matches!(self, Term::Flow(_)) || self.children().iter().any(|c| c.contains_flow())
    }

    /// Rebuild the term, replacing every `Var(i)` with `f(i)`.
    pub fn substitute(&self, f: &impl Fn(usize) -> Term) -> Term {
        let b = |t: &Term| Box::new(t.substitute(f));
        match self {
            Term::Var(i) => f(*i),
            Term::Const(c) => Term::Const(c.clone()),
            Term::Neg(a) => Term::Neg(b(a)),
            Term::Add(x, y) => Term::Add(b(x), b(y)),
            Term::Sub(x, y) => Term::Sub(b(x), b(y)),
            Term::Mul(x, y) => Term::Mul(b(x), b(y)),
            Term::Div(x, y) => Term::Div(b(x), b(y)),
            Term::Pow(x, n) => Term::Pow(b(x), *n),
            Term::Exp(x) => Term::Exp(b(x)),
            Term::Sin(x) => Term::Sin(b(x)),
            Term::Cos(x) => Term::Cos(b(x)),
            Term::Min(x, y) => Term::Min(b(x), b(y)),
            Term::Max(x, y) => Term::Max(b(x), b(y)),
            Term::Abs(x) => Term::Abs(b(x)),
            Term::Flow(fl) => Term::Flow(FlowRef {
                ivp: fl.ivp.clone(),
                component: fl.component,
                time: b(&fl.time),
                init: fl.init.iter().map(|t| t.substitute(f)).collect(),
            }),
        }
    }

    /// Renumber variables through `map`.
    pub fn rename_vars(&self, map: &impl Fn(usize) -> usize) -> Term {
        self.substitute(&|i| Term::Var(map(i)))
    }

    /// Every `Div` denominator in the term, outermost first.
    pub fn denominators(&self) -> Vec<&Term> {
        let mut out = Vec::new();
        self.collect_denominators(&mut out);
        out
    }

    fn collect_denominators<'a>(&'a self, out: &mut Vec<&'a Term>) {
        if let Term::Div(_, d) = self {
            out.push(d);
        }
        for c in self.children() {
            c.collect_denominators(out);
        }
    }

    /// Syntactic negation that avoids stacking `Neg` nodes: `-(a - b)` becomes
    /// `b - a` and `-(-a)` becomes `a`.
    pub fn negated(&self) -> Term {
        match self {
            Term::Neg(a) => (**a).clone(),
            Term::Sub(a, b) => Term::Sub(b.clone(), a.clone()),
            Term::Const(c) => Term::Const(-c),
            other => Term::Neg(Box::new(other.clone())),
        }
    }

    pub fn as_const(&self) -> Option<&BigRational> {
        match self {
            Term::Const(c) => Some(c),
            _ => None,
        }
    }

    /// Display using the given variable names (falls back to `x<i>`).
    pub fn display<'a>(&'a self, names: &'a [String]) -> TermDisplay<'a> {
        TermDisplay { term: self, names }
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $variant:ident) => {
        impl ops::$tr for Term {
            type Output = Term;
            fn $method(self, rhs: Term) -> Term {
                Term::$variant(Box::new(self), Box::new(rhs))
            }
        }
    };
}

binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl ops::Neg for Term {
    type Output = Term;
    fn neg(self) -> Term {
        Term::Neg(Box::new(self))
    }
}

/// Formats a rational the way the input language reads it back: `3`, `-1/2`.
pub fn format_rational(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub struct TermDisplay<'a> {
    term: &'a Term,
    names: &'a [String],
}

impl TermDisplay<'_> {
    fn sub<'b>(&'b self, t: &'b Term) -> TermDisplay<'b> {
        TermDisplay { term: t, names: self.names }
    }
}

impl fmt::Display for TermDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bin = |f: &mut fmt::Formatter<'_>, op: &str, a: &Term, b: &Term| {
            write!(f, "({} {} {})", op, self.sub(a), self.sub(b))
        };
        let un = |f: &mut fmt::Formatter<'_>, op: &str, a: &Term| write!(f, "({} {})", op, self.sub(a));
        match self.term {
            Term::Var(i) => match self.names.get(*i) {
                Some(n) => f.write_str(n),
                None => write!(f, "x{}", i),
            },
            Term::Const(c) => f.write_str(&format_rational(c)),
            Term::Neg(a) => un(f, "-", a),
            Term::Add(a, b) => bin(f, "+", a, b),
            Term::Sub(a, b) => bin(f, "-", a, b),
            Term::Mul(a, b) => bin(f, "*", a, b),
            Term::Div(a, b) => bin(f, "/", a, b),
            Term::Pow(a, n) => write!(f, "(pow {} {})", self.sub(a), n),
            Term::Exp(a) => un(f, "exp", a),
            Term::Sin(a) => un(f, "sin", a),
            Term::Cos(a) => un(f, "cos", a),
            Term::Min(a, b) => bin(f, "min", a, b),
            Term::Max(a, b) => bin(f, "max", a, b),
            Term::Abs(a) => un(f, "abs", a),
            Term::Flow(fl) => {
                write!(f, "(flow {} {} {}", fl.ivp.name, fl.component, self.sub(&fl.time))?;
                for t in &fl.init {
                    write!(f, " {}", self.sub(t))?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display(&[]))
    }
}

/// Comparison of a term against zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl Relation {
    /// The relation of the negated atom: `not (t < 0)` is `t >= 0`.
    pub fn negate(self) -> Relation {
        match self {
            Relation::Lt => Relation::Ge,
            Relation::Le => Relation::Gt,
            Relation::Gt => Relation::Le,
            Relation::Ge => Relation::Lt,
            Relation::Eq => Relation::Ne,
            Relation::Ne => Relation::Eq,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Gt => ">",
            Relation::Ge => ">=",
            Relation::Eq => "=",
            Relation::Ne => "!=",
        }
    }
}

/// `term rel 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    pub term: Term,
    pub rel: Relation,
}

impl Atom {
    pub fn new(term: Term, rel: Relation) -> Atom {
        Atom { term, rel }
    }
}

/// Quantifier-free formula. `And(vec![])` is true and `Or(vec![])` is false.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Formula {
    Atom(Atom),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
}

impl Formula {
    pub fn atom(term: Term, rel: Relation) -> Formula {
        Formula::Atom(Atom::new(term, rel))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Or(vec![Formula::Not(Box::new(a)), b])
    }

    pub fn not(a: Formula) -> Formula {
        Formula::Not(Box::new(a))
    }

    pub fn free_vars(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.visit_atoms(&mut |a| out.extend(a.term.free_vars()));
        out
    }

    pub fn visit_atoms(&self, f: &mut impl FnMut(&Atom)) {
        match self {
            Formula::Atom(a) => f(a),
            Formula::And(xs) | Formula::Or(xs) => xs.iter().for_each(|x| x.visit_atoms(f)),
            Formula::Not(x) => x.visit_atoms(f),
        }
    }

    pub fn map_terms(&self, f: &impl Fn(&Term) -> Term) -> Formula {
        match self {
            Formula::Atom(a) => Formula::Atom(Atom::new(f(&a.term), a.rel)),
            Formula::And(xs) => Formula::And(xs.iter().map(|x| x.map_terms(f)).collect()),
            Formula::Or(xs) => Formula::Or(xs.iter().map(|x| x.map_terms(f)).collect()),
            Formula::Not(x) => Formula::Not(Box::new(x.map_terms(f))),
        }
    }

    /// Push negations down to the atoms, flipping relations as it goes.
    pub fn to_nnf(&self) -> Formula {
        self.nnf(false)
    }

    fn nnf(&self, negate: bool) -> Formula {
        match (self, negate) {
            (Formula::Atom(a), false) => Formula::Atom(a.clone()),
            (Formula::Atom(a), true) => Formula::Atom(Atom::new(a.term.clone(), a.rel.negate())),
            (Formula::And(xs), false) => Formula::And(xs.iter().map(|x| x.nnf(false)).collect()),
            (Formula::And(xs), true) => Formula::Or(xs.iter().map(|x| x.nnf(true)).collect()),
            (Formula::Or(xs), false) => Formula::Or(xs.iter().map(|x| x.nnf(false)).collect()),
            (Formula::Or(xs), true) => Formula::And(xs.iter().map(|x| x.nnf(true)).collect()),
            (Formula::Not(x), n) => x.nnf(!n),
        }
    }

    pub fn display<'a>(&'a self, names: &'a [String]) -> FormulaDisplay<'a> {
        FormulaDisplay { formula: self, names }
    }
}

pub struct FormulaDisplay<'a> {
    formula: &'a Formula,
    names: &'a [String],
}

impl fmt::Display for FormulaDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nary = |f: &mut fmt::Formatter<'_>, op: &str, xs: &[Formula]| {
            if xs.is_empty() {
                return f.write_str(if op == "and" { "true" } else { "false" });
            }
            write!(f, "({}", op)?;
            for x in xs {
                write!(f, " {}", x.display(self.names))?;
            }
            f.write_str(")")
        };
        match self.formula {
            Formula::Atom(a) => match &a.term {
                Term::Sub(l, r) => write!(
                    f,
                    "({} {} {})",
                    a.rel.symbol(),
                    l.display(self.names),
                    r.display(self.names)
                ),
                t => write!(f, "({} {} 0)", a.rel.symbol(), t.display(self.names)),
            },
            Formula::And(xs) => nary(f, "and", xs),
            Formula::Or(xs) => nary(f, "or", xs),
            Formula::Not(x) => write!(f, "(not {})", x.display(self.names)),
        }
    }
}

/// Interval with exact rational endpoints; `None` stands for an infinite end.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalInterval {
    pub lo: Option<BigRational>,
    pub hi: Option<BigRational>,
    pub lo_open: bool,
    pub hi_open: bool,
}

impl RationalInterval {
    pub fn closed(lo: BigRational, hi: BigRational) -> RationalInterval {
        RationalInterval { lo: Some(lo), hi: Some(hi), lo_open: false, hi_open: false }
    }

    pub fn closed_int(lo: i64, hi: i64) -> RationalInterval {
        RationalInterval::closed(BigRational::from_integer(lo.into()), BigRational::from_integer(hi.into()))
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_some() && self.hi.is_some()
    }

    pub fn is_empty(&self) -> bool {
        match (&self.lo, &self.hi) {
            (Some(l), Some(h)) => l > h || (l == h && (self.lo_open || self.hi_open)),
            _ => false,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!((&self.lo, &self.hi), (Some(l), Some(h)) if l == h)
    }

    pub fn closure(&self) -> RationalInterval {
        RationalInterval { lo_open: false, hi_open: false, ..self.clone() }
    }

    pub fn interior(&self) -> RationalInterval {
        RationalInterval { lo_open: true, hi_open: true, ..self.clone() }
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        let above = match &self.lo {
            None => true,
            Some(l) if self.lo_open => x > l,
            Some(l) => x >= l,
        };
        let below = match &self.hi {
            None => true,
            Some(h) if self.hi_open => x < h,
            Some(h) => x <= h,
        };
        above && below
    }

    /// Width of a bounded interval.
    pub fn width(&self) -> Option<BigRational> {
        match (&self.lo, &self.hi) {
            (Some(l), Some(h)) => Some(h - l),
            _ => None,
        }
    }

    pub fn midpoint(&self) -> Option<BigRational> {
        match (&self.lo, &self.hi) {
            (Some(l), Some(h)) => Some((l + h) / BigRational::from_integer(2.into())),
            _ => None,
        }
    }
}

impl fmt::Display for RationalInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lo = self.lo.as_ref().map(format_rational).unwrap_or_else(|| "-inf".into());
        let hi = self.hi.as_ref().map(format_rational).unwrap_or_else(|| "inf".into());
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_open { "(" } else { "[" },
            lo,
            hi,
            if self.hi_open { ")" } else { "]" }
        )
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExprError {
    #[error("variable {0} has an unbounded domain")]
    UnboundedVariable(String),
    #[error("variable {0} has an empty domain")]
    EmptyDomain(String),
    #[error("variable index {index} out of range for {count} variables")]
    VariableOutOfRange { index: usize, count: usize },
    #[error("expected {expected} variable names, got {got}")]
    NameCount { expected: usize, got: usize },
}

/// `exists x_1 in I_1 ... x_n in I_n. matrix`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundedSigma1 {
    pub bounds: Vec<RationalInterval>,
    pub matrix: Formula,
    pub names: Vec<String>,
}

impl BoundedSigma1 {
    pub fn new(bounds: Vec<RationalInterval>, matrix: Formula, names: Vec<String>) -> Result<Self, ExprError> {
        if names.len() != bounds.len() {
            return Err(ExprError::NameCount { expected: bounds.len(), got: names.len() });
        }
        for (b, name) in bounds.iter().zip(&names) {
            if !b.is_bounded() {
                return Err(ExprError::UnboundedVariable(name.clone()));
            }
            if b.is_empty() {
                return Err(ExprError::EmptyDomain(name.clone()));
            }
        }
        if let Some(&index) = matrix.free_vars().iter().find(|&&v| v >= bounds.len()) {
            return Err(ExprError::VariableOutOfRange { index, count: bounds.len() });
        }
        Ok(BoundedSigma1 { bounds, matrix, names })
    }

    /// Convenience constructor with generated names `x0, x1, ...`.
    pub fn with_default_names(bounds: Vec<RationalInterval>, matrix: Formula) -> Result<Self, ExprError> {
        let names = (0..bounds.len()).map(|i| format!("x{i}")).collect();
        BoundedSigma1::new(bounds, matrix, names)
    }

    pub fn num_vars(&self) -> usize {
        self.bounds.len()
    }

    pub fn has_open_bounds(&self) -> bool {
        self.bounds.iter().any(|b| b.lo_open || b.hi_open)
    }
}

/// `2^-bits` as an exact rational.
pub fn pow2_neg(bits: u32) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::one() << bits)
}

/// Exact rational value of a finite double.
pub fn rational_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite float")
}

pub fn rational_abs(q: &BigRational) -> BigRational {
    if q.is_negative() {
        -q
    } else {
        q.clone()
    }
}
