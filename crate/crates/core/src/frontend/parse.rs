//! Problem files and transition systems from the surface syntax.

use std::collections::HashMap;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::Zero;

use super::sexp::{parse_rational, read_all, Sexp, SexpKind};
use super::FrontendError;
use crate::expr::{BoundedSigma1, FlowRef, Formula, RationalInterval, Relation, Term};
use crate::icp::Mode;
use crate::odes::Ivp;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Options {
    pub delta: Option<BigRational>,
    pub epsilon: Option<BigRational>,
    pub mode: Option<Mode>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub bounds: RationalInterval,
}

/// State variables `0..k`; in `trans`, variables `k..2k` are the primed copies.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionSystem {
    pub state: Vec<VarDecl>,
    pub init: Formula,
    pub trans: Formula,
    pub unsafe_set: Formula,
    pub invariant: Option<Formula>,
}

impl TransitionSystem {
    pub fn dim(&self) -> usize {
        self.state.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.state.iter().map(|v| v.name.clone()).collect()
    }

    /// State names followed by their primed versions.
    pub fn primed_names(&self) -> Vec<String> {
        let mut names = self.names();
        names.extend(self.state.iter().map(|v| format!("{}'", v.name)));
        names
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProblemFile {
    pub vars: Vec<VarDecl>,
    pub ivps: Vec<Arc<Ivp>>,
    pub assertions: Vec<Formula>,
    pub options: Options,
    pub system: Option<TransitionSystem>,
}

impl ProblemFile {
    pub fn names(&self) -> Vec<String> {
        self.vars.iter().map(|v| v.name.clone()).collect()
    }

    /// Conjunction of the assertions under the declared bounds.
    pub fn to_sentence(&self) -> Result<BoundedSigma1, FrontendError> {
        let matrix = match self.assertions.as_slice() {
            [one] => one.clone(),
            many => Formula::And(many.to_vec()),
        };
        BoundedSigma1::new(self.vars.iter().map(|v| v.bounds.clone()).collect(), matrix, self.names())
            .map_err(|e| FrontendError::Invalid(e.to_string()))
    }
}

pub fn parse(src: &str) -> Result<ProblemFile, FrontendError> {
    let mut p = ProblemFile::default();
    let mut state: Vec<VarDecl> = Vec::new();
    let (mut init, mut trans, mut unsafe_set, mut invariant) = (None, None, None, None);
    let mut system_seen: Option<&Sexp> = None;
    let items = read_all(src)?;
    for item in &items {
        let Some(xs) = item.list() else {
            return Err(item.error(format!("expected a command, found '{item}'")));
        };
        let head = item.head().ok_or_else(|| item.error("expected a command name"))?;
        match head {
            "declare-var" | "declare-state" => {
                let decl = parse_var_decl(item, xs)?;
                let taken = p.vars.iter().chain(&state).any(|v| v.name == decl.name);
                if taken {
                    return Err(item.error(format!("variable '{}' declared twice", decl.name)));
                }
                if head == "declare-var" {
                    p.vars.push(decl);
                } else {
                    system_seen.get_or_insert(item);
                    state.push(decl);
                }
            }
            "declare-ivp" => {
                let ivp = parse_ivp(item, xs, &p.ivps)?;
                p.ivps.push(Arc::new(ivp));
            }
            "assert" => {
                let [_, body] = xs else { return Err(item.error("assert takes one formula")) };
                let names: Vec<&str> = p.vars.iter().map(|v| v.name.as_str()).collect();
                p.assertions.push(Scope::new(&names, &p.ivps).formula(body)?);
            }
            "init" | "unsafe" | "invariant" | "trans" => {
                system_seen.get_or_insert(item);
                let [_, body] = xs else { return Err(item.error(format!("{head} takes one formula"))) };
                let mut names: Vec<String> = state.iter().map(|v| v.name.clone()).collect();
                if head == "trans" {
                    names.extend(state.iter().map(|v| format!("{}'", v.name)));
                }
                let names: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
                let f = Scope::new(&names, &p.ivps).formula(body)?;
                let slot = match head {
                    "init" => &mut init,
                    "unsafe" => &mut unsafe_set,
                    "invariant" => &mut invariant,
                    _ => &mut trans,
                };
                if slot.replace(f).is_some() {
                    return Err(item.error(format!("{head} given twice")));
                }
            }
            "set-delta" | "set-epsilon" => {
                let [_, v] = xs else { return Err(item.error(format!("{head} takes one number"))) };
                let q = literal(v)?;
                if head == "set-delta" {
                    p.options.delta = Some(q);
                } else {
                    p.options.epsilon = Some(q);
                }
            }
            "set-mode" => {
                let mode = match xs.get(1).and_then(|s| s.atom()) {
                    Some("certificate") if xs.len() == 2 => Mode::Certificate,
                    Some("paper-epsilon") if xs.len() == 2 => Mode::PaperEpsilon,
                    _ => return Err(item.error("set-mode takes certificate or paper-epsilon")),
                };
                p.options.mode = Some(mode);
            }
            other => return Err(xs[0].error(format!("unknown command '{other}'"))),
        }
    }
    if let Some(at) = system_seen {
        if !p.vars.is_empty() || !p.assertions.is_empty() {
            return Err(at.error("a file declares either a problem or a transition system, not both"));
        }
        let missing = |what: &str| at.error(format!("transition system without ({what} ...)"));
        p.system = Some(TransitionSystem {
            state,
            init: init.ok_or_else(|| missing("init"))?,
            trans: trans.ok_or_else(|| missing("trans"))?,
            unsafe_set: unsafe_set.ok_or_else(|| missing("unsafe"))?,
            invariant,
        });
    }
    Ok(p)
}

fn literal(s: &Sexp) -> Result<BigRational, FrontendError> {
    s.atom().and_then(parse_rational).ok_or_else(|| s.error(format!("expected a number, found '{s}'")))
}

fn symbol(s: &Sexp) -> Result<&str, FrontendError> {
    match s.atom() {
        Some(a) if parse_rational(a).is_none() => Ok(a),
        _ => Err(s.error(format!("expected a name, found '{s}'"))),
    }
}

fn parse_var_decl(item: &Sexp, xs: &[Sexp]) -> Result<VarDecl, FrontendError> {
    let name = symbol(xs.get(1).ok_or_else(|| item.error("missing variable name"))?)?.to_string();
    match xs.get(2).and_then(|s| s.atom()) {
        Some("Real") => {}
        _ => return Err(item.error("expected sort Real")),
    }
    let Some(b) = xs.get(3) else {
        return Err(FrontendError::MissingBounds { name, line: item.line, col: item.col });
    };
    if xs.len() > 4 {
        return Err(xs[4].error("unexpected token after bounds"));
    }
    let SexpKind::Bracket(ends) = &b.kind else {
        return Err(FrontendError::MissingBounds { name, line: b.line, col: b.col });
    };
    let [lo, hi] = ends.as_slice() else { return Err(b.error("bounds take the form [lo, hi]")) };
    let (lo, hi) = (literal(lo)?, literal(hi)?);
    if lo > hi {
        return Err(b.error("lower bound exceeds upper bound"));
    }
    Ok(VarDecl { name, bounds: RationalInterval::closed(lo, hi) })
}

fn parse_ivp(item: &Sexp, xs: &[Sexp], known: &[Arc<Ivp>]) -> Result<Ivp, FrontendError> {
    let name = symbol(xs.get(1).ok_or_else(|| item.error("missing IVP name"))?)?.to_string();
    if known.iter().any(|i| i.name == name) {
        return Err(item.error(format!("IVP '{name}' declared twice")));
    }
    let section = |key: &str| -> Result<&[Sexp], FrontendError> {
        xs[2..]
            .iter()
            .find(|s| s.head() == Some(key))
            .map(|s| &s.list().expect("list")[1..])
            .ok_or_else(|| item.error(format!("declare-ivp needs ({key} ...)")))
    };
    if let Some(bad) = xs[2..].iter().find(|s| !matches!(s.head(), Some("vars" | "field" | "time" | "steps"))) {
        return Err(bad.error(format!("unexpected '{bad}' in declare-ivp")));
    }
    let vars: Vec<&str> = section("vars")?.iter().map(symbol).collect::<Result<_, _>>()?;
    let field: Vec<Term> = {
        let scope = Scope::new(&vars, known);
        section("field")?.iter().map(|e| scope.term(e)).collect::<Result<_, _>>()?
    };
    let [t0, t1] = section("time")? else { return Err(item.error("(time t0 T) takes two numbers")) };
    let ivp = Ivp::new(name, vars.iter().map(|s| s.to_string()).collect(), field, literal(t0)?, literal(t1)?)
        .map_err(|e| item.error(e.to_string()))?;
    match xs[2..].iter().find(|s| s.head() == Some("steps")) {
        Some(s) => {
            let [_, n] = s.list().expect("list") else { return Err(s.error("(steps N) takes one integer")) };
            let n: usize = n.atom().and_then(|a| a.parse().ok()).filter(|&n| n > 0).ok_or_else(|| n.error("expected a positive integer"))?;
            Ok(ivp.with_steps(n))
        }
        None => Ok(ivp),
    }
}

struct Scope<'a> {
    vars: HashMap<&'a str, usize>,
    ivps: &'a [Arc<Ivp>],
}

impl<'a> Scope<'a> {
    fn new(names: &[&'a str], ivps: &'a [Arc<Ivp>]) -> Scope<'a> {
        Scope { vars: names.iter().enumerate().map(|(i, n)| (*n, i)).collect(), ivps }
    }

    fn formula(&self, s: &Sexp) -> Result<Formula, FrontendError> {
        if let Some(a) = s.atom() {
            return match a {
                "true" => Ok(Formula::And(vec![])),
                "false" => Ok(Formula::Or(vec![])),
                _ => Err(s.error(format!("expected a formula, found '{a}'"))),
            };
        }
        let xs = s.list().ok_or_else(|| s.error("expected a formula"))?;
        let head = s.head().ok_or_else(|| s.error("expected a connective or relation"))?;
        let args = &xs[1..];
        let rel = match head {
            "and" | "or" => {
                let fs = args.iter().map(|a| self.formula(a)).collect::<Result<Vec<_>, _>>()?;
                return Ok(if head == "and" { Formula::And(fs) } else { Formula::Or(fs) });
            }
            "not" => {
                let [a] = args else { return Err(s.error("not takes one formula")) };
                return Ok(Formula::not(self.formula(a)?));
            }
            "=>" => {
                let [a, b] = args else { return Err(s.error("=> takes two formulas")) };
                return Ok(Formula::implies(self.formula(a)?, self.formula(b)?));
            }
            "<" => Relation::Lt,
            "<=" => Relation::Le,
            ">" => Relation::Gt,
            ">=" => Relation::Ge,
            "=" => Relation::Eq,
            "!=" => Relation::Ne,
            other => return Err(xs[0].error(format!("unknown connective or relation '{other}'"))),
        };
        let [a, b] = args else { return Err(s.error(format!("{head} takes two terms"))) };
        let lhs = self.term(a)?;
        let rhs = self.term(b)?;
        let term = match rhs.as_const() {
            Some(c) if c.is_zero() => lhs,
            _ => lhs - rhs,
        };
        Ok(Formula::atom(term, rel))
    }

    fn term(&self, s: &Sexp) -> Result<Term, FrontendError> {
        if let Some(a) = s.atom() {
            if let Some(q) = parse_rational(a) {
                return Ok(Term::constant(q));
            }
            return self
                .vars
                .get(a)
                .map(|&i| Term::var(i))
                .ok_or_else(|| FrontendError::UndeclaredVariable { name: a.to_string(), line: s.line, col: s.col });
        }
        let xs = s.list().ok_or_else(|| s.error(format!("expected a term, found '{s}'")))?;
        let head = s.head().ok_or_else(|| s.error("expected an operator"))?;
        let args = &xs[1..];
        let terms = || args.iter().map(|a| self.term(a)).collect::<Result<Vec<_>, _>>();
        let unary = |f: fn(Term) -> Term| -> Result<Term, FrontendError> {
            let [a] = args else { return Err(s.error(format!("{head} takes one argument"))) };
            Ok(f(self.term(a)?))
        };
        let binary = |f: fn(Term, Term) -> Term| -> Result<Term, FrontendError> {
            let [a, b] = args else { return Err(s.error(format!("{head} takes two arguments"))) };
            Ok(f(self.term(a)?, self.term(b)?))
        };
        match head {
            "+" | "*" => {
                let ts = terms()?;
                let mut it = ts.into_iter();
                let first = it.next().ok_or_else(|| s.error(format!("{head} needs arguments")))?;
                Ok(it.fold(first, |acc, t| if head == "+" { acc + t } else { acc * t }))
            }
            "-" => {
                let ts = terms()?;
                match ts.len() {
                    0 => Err(s.error("- needs arguments")),
                    1 => Ok(-ts.into_iter().next().expect("one")),
                    _ => {
                        let mut it = ts.into_iter();
                        let first = it.next().expect("nonempty");
                        Ok(it.fold(first, |acc, t| acc - t))
                    }
                }
            }
            "/" => binary(|a, b| a / b),
            "pow" => {
                let [a, n] = args else { return Err(s.error("pow takes a term and an exponent")) };
                let n: u32 = n.atom().and_then(|x| x.parse().ok()).ok_or_else(|| n.error("exponent must be a nonnegative integer"))?;
                let base = self.term(a)?;
                Ok(if n == 0 { Term::int(1) } else { base.pow(n) })
            }
            "exp" => unary(Term::exp),
            "sin" => unary(Term::sin),
            "cos" => unary(Term::cos),
            "abs" => unary(Term::abs),
            "min" => binary(Term::min),
            "max" => binary(Term::max),
            "flow" => self.flow(s, args),
            other => Err(xs[0].error(format!("unknown function symbol '{other}'"))),
        }
    }

    fn flow(&self, s: &Sexp, args: &[Sexp]) -> Result<Term, FrontendError> {
        let [name, comp, time, init @ ..] = args else {
            return Err(s.error("flow takes an IVP name, a component, a time and initial values"));
        };
        let n = symbol(name)?;
        let ivp = self.ivps.iter().find(|i| i.name == n).ok_or_else(|| name.error(format!("unknown IVP '{n}'")))?;
        let component = match comp.atom() {
            Some(a) => a.parse::<usize>().ok().or_else(|| ivp.state_names.iter().position(|x| x == a)),
            None => None,
        }
        .filter(|&c| c < ivp.dim())
        .ok_or_else(|| comp.error(format!("'{comp}' is not a component of '{n}'")))?;
        if init.len() != ivp.dim() {
            return Err(s.error(format!("'{n}' needs {} initial values, got {}", ivp.dim(), init.len())));
        }
        Ok(Term::Flow(FlowRef {
            ivp: ivp.clone(),
            component,
            time: Box::new(self.term(time)?),
            init: init.iter().map(|t| self.term(t)).collect::<Result<_, _>>()?,
        }))
    }
}
