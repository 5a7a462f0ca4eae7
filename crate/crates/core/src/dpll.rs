//! Lazy DPLL(T): a propositional search over the disjuncts of a standard
//! form, with branch-and-prune deciding each set of asserted equalities.

use std::collections::BTreeMap;

use num_rational::BigRational;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{BoundedSigma1, RationalInterval, Term};
use crate::icp::{solve_in_domain, IcpAnswer, IcpConfig, IcpError};
use crate::interval::{FloatBox, FloatInterval};
use crate::normalize::{to_standard_form, NormalizeError, StandardForm};
use crate::prune::Constraint;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DpllError {
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
    #[error(transparent)]
    Icp(#[from] IcpError),
}

/// One Boolean atom per disjunct, in clause order. Clauses list atom indices.
#[derive(Clone, Debug)]
pub struct BooleanAbstraction {
    pub atoms: Vec<Term>,
    /// `(clause, disjunct)` position of each atom.
    pub origin: Vec<(usize, usize)>,
    pub clauses: Vec<Vec<usize>>,
}

pub fn abstract_form(sf: &StandardForm) -> BooleanAbstraction {
    let mut atoms = Vec::new();
    let mut origin = Vec::new();
    let mut clauses = Vec::new();
    for (ci, clause) in sf.clauses.iter().enumerate() {
        let mut lits = Vec::new();
        for (di, t) in clause.iter().enumerate() {
            lits.push(atoms.len());
            atoms.push(t.clone());
            origin.push((ci, di));
        }
        clauses.push(lits);
    }
    BooleanAbstraction { atoms, origin, clauses }
}

#[derive(Clone, Debug)]
pub struct DpllConfig {
    pub icp: IcpConfig,
    pub max_theory_calls: usize,
    /// Shrink an infeasible atom set by deletion before blocking it.
    pub shrink_conflicts: bool,
}

impl DpllConfig {
    pub fn new(delta: BigRational) -> DpllConfig {
        DpllConfig { icp: IcpConfig::new(delta), max_theory_calls: 20_000, shrink_conflicts: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssertedAtom {
    pub clause: usize,
    pub disjunct: usize,
    pub range: FloatInterval,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Model {
    pub witness: FloatBox,
    pub asserted: Vec<AssertedAtom>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Answer {
    Unsat,
    DeltaSat(Model),
    ResourceOut,
}

impl Answer {
    pub fn verdict(&self) -> &'static str {
        match self {
            Answer::Unsat => "unsat",
            Answer::DeltaSat(_) => "delta-sat",
            Answer::ResourceOut => "unknown (resource limit)",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SolveStats {
    pub propositional_models: usize,
    pub theory_calls: usize,
    pub blocking_clauses: usize,
    pub unknown_components: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub answer: Answer,
    pub stats: SolveStats,
}

pub fn solve_sentence(phi: &BoundedSigma1, cfg: &DpllConfig) -> Result<SolveResult, DpllError> {
    solve(&to_standard_form(phi)?, cfg)
}

pub fn solve(sf: &StandardForm, cfg: &DpllConfig) -> Result<SolveResult, DpllError> {
    let abs = abstract_form(sf);
    let mut sat = Cnf::new(abs.atoms.len(), abs.clauses.iter().map(|c| c.iter().map(|&a| Lit::pos(a)).collect()).collect());
    let mut theory = Theory { abs: &abs, bounds: &sf.bounds, cfg, cache: BTreeMap::new(), stats: SolveStats::default() };
    let mut incomplete = false;
    loop {
        let Some(model) = sat.search() else {
            let answer = if incomplete { Answer::ResourceOut } else { Answer::Unsat };
            return Ok(SolveResult { answer, stats: theory.stats });
        };
        theory.stats.propositional_models += 1;
        let chosen: Vec<usize> = (0..abs.atoms.len()).filter(|&a| model[a]).collect();
        let mut boxes = Vec::new();
        let mut blocked = false;
        let mut unknown = false;
        for comp in components(&abs.atoms, &chosen) {
            if theory.stats.theory_calls >= cfg.max_theory_calls {
                return Ok(SolveResult { answer: Answer::ResourceOut, stats: theory.stats });
            }
            match theory.check(&comp)? {
                IcpAnswer::DeltaSat(cert) => boxes.push((comp, cert.witness)),
                IcpAnswer::Unsat => {
                    let core = if cfg.shrink_conflicts { theory.shrink(&comp)? } else { comp };
                    sat.add(core.iter().map(|&a| Lit::neg(a)).collect());
                    theory.stats.blocking_clauses += 1;
                    blocked = true;
                    break;
                }
                IcpAnswer::ResourceOut => {
                    theory.stats.unknown_components += 1;
                    unknown = true;
                }
            }
        }
        if blocked {
            continue;
        }
        if unknown {
            // give up on this assignment but keep looking for a decided one
            incomplete = true;
            sat.add(chosen.iter().map(|&a| Lit::neg(a)).collect());
            theory.stats.blocking_clauses += 1;
            continue;
        }
        let mut witness = sf.domain_box();
        for (comp, local) in &boxes {
            for (k, &v) in comp_vars(&abs.atoms, comp).iter().enumerate() {
                witness.set(v, local.get(k));
            }
        }
        let asserted = chosen
            .iter()
            .map(|&a| {
                let (clause, disjunct) = abs.origin[a];
                let range = crate::interval::natural_extension(&abs.atoms[a], &witness).unwrap_or(FloatInterval::ENTIRE);
                AssertedAtom { clause, disjunct, range }
            })
            .collect();
        return Ok(SolveResult { answer: Answer::DeltaSat(Model { witness, asserted }), stats: theory.stats });
    }
}

/// Sorted variables of a set of atoms.
fn comp_vars(atoms: &[Term], comp: &[usize]) -> Vec<usize> {
    let mut vs: Vec<usize> = comp.iter().flat_map(|&a| atoms[a].free_vars()).collect();
    vs.sort_unstable();
    vs.dedup();
    vs
}

/// Groups of atoms connected through shared variables, in order of first atom.
fn components(atoms: &[Term], chosen: &[usize]) -> Vec<Vec<usize>> {
    let mut groups: Vec<(Vec<usize>, std::collections::BTreeSet<usize>)> = Vec::new();
    for &a in chosen {
        let vars = atoms[a].free_vars();
        let mut merged = (vec![a], vars);
        let mut k = 0;
        while k < groups.len() {
            if groups[k].1.intersection(&merged.1).next().is_some() {
                let (g, vs) = groups.remove(k);
                merged.0.extend(g);
                merged.1.extend(vs);
            } else {
                k += 1;
            }
        }
        groups.push(merged);
    }
    let mut out: Vec<Vec<usize>> = groups
        .into_iter()
        .map(|(mut g, _)| {
            g.sort_unstable();
            g
        })
        .collect();
    out.sort();
    out
}

/// Box budget for each trial of conflict shrinking.
const SHRINK_BUDGET: usize = 2000;

struct Theory<'a> {
    abs: &'a BooleanAbstraction,
    bounds: &'a [RationalInterval],
    cfg: &'a DpllConfig,
    cache: BTreeMap<Vec<usize>, IcpAnswer>,
    stats: SolveStats,
}

impl Theory<'_> {
    fn check(&mut self, comp: &[usize]) -> Result<IcpAnswer, DpllError> {
        self.check_with_budget(comp, self.cfg.icp.max_boxes)
    }

    /// Branch-and-prune on the atoms' own variables.
    fn check_with_budget(&mut self, comp: &[usize], max_boxes: usize) -> Result<IcpAnswer, DpllError> {
        if let Some(a) = self.cache.get(comp) {
            if !matches!(a, IcpAnswer::ResourceOut) || max_boxes <= SHRINK_BUDGET {
                return Ok(a.clone());
            }
        }
        self.stats.theory_calls += 1;
        let vars = comp_vars(&self.abs.atoms, comp);
        let local = |v: usize| vars.binary_search(&v).expect("variable of the component");
        let cs: Vec<Constraint> = comp
            .iter()
            .map(|&a| Constraint::new(self.abs.atoms[a].rename_vars(&local), self.cfg.icp.delta.clone()))
            .collect();
        let bounds: Vec<RationalInterval> = vars.iter().map(|&v| self.bounds[v].clone()).collect();
        let icp = IcpConfig { max_boxes: max_boxes.min(self.cfg.icp.max_boxes), ..self.cfg.icp.clone() };
        let answer = solve_in_domain(&cs, &bounds, &icp)?;
        self.cache.insert(comp.to_vec(), answer.clone());
        Ok(answer)
    }

    /// Drop atoms one at a time while the rest stays infeasible. Trials run
    /// on a reduced box budget; an undecided trial keeps the atom.
    fn shrink(&mut self, comp: &[usize]) -> Result<Vec<usize>, DpllError> {
        let mut core = comp.to_vec();
        let mut i = 0;
        while i < core.len() && core.len() > 1 {
            let mut trial = core.clone();
            trial.remove(i);
            let mut infeasible = true;
            for part in components(&self.abs.atoms, &trial) {
                if self.stats.theory_calls >= self.cfg.max_theory_calls {
                    return Ok(core);
                }
                if !self.check_with_budget(&part, SHRINK_BUDGET)?.is_unsat() {
                    infeasible = false;
                    break;
                }
            }
            if infeasible {
                core = trial;
            } else {
                i += 1;
            }
        }
        Ok(core)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Lit {
    var: usize,
    positive: bool,
}

impl Lit {
    fn pos(var: usize) -> Lit {
        Lit { var, positive: true }
    }

    fn neg(var: usize) -> Lit {
        Lit { var, positive: false }
    }
}

/// Propositional search with unit propagation, false-first decisions and
/// first-UIP clause learning. Learned clauses are implied by the others and
/// are kept across calls; each call starts from an empty assignment.
struct Cnf {
    n: usize,
    clauses: Vec<Vec<Lit>>,
}

struct Trail {
    val: Vec<Option<bool>>,
    level: Vec<usize>,
    reason: Vec<Option<usize>>,
    order: Vec<usize>,
    // start of each decision level in `order`
    marks: Vec<usize>,
}

impl Trail {
    fn new(n: usize) -> Trail {
        Trail { val: vec![None; n], level: vec![0; n], reason: vec![None; n], order: Vec::new(), marks: Vec::new() }
    }

    fn value(&self, l: Lit) -> Option<bool> {
        self.val[l.var].map(|v| v == l.positive)
    }

    fn assign(&mut self, l: Lit, reason: Option<usize>) {
        self.val[l.var] = Some(l.positive);
        self.level[l.var] = self.marks.len();
        self.reason[l.var] = reason;
        self.order.push(l.var);
    }

    fn backjump(&mut self, level: usize) {
        if level >= self.marks.len() {
            return;
        }
        for v in self.order.drain(self.marks[level]..) {
            self.val[v] = None;
            self.reason[v] = None;
        }
        self.marks.truncate(level);
    }
}

impl Cnf {
    fn new(n: usize, clauses: Vec<Vec<Lit>>) -> Cnf {
        Cnf { n, clauses }
    }

    fn add(&mut self, clause: Vec<Lit>) {
        self.clauses.push(clause);
    }

    /// Assigns forced literals; the index of a falsified clause on conflict.
    fn propagate(&self, t: &mut Trail) -> Option<usize> {
        loop {
            let mut progress = false;
            for (ci, c) in self.clauses.iter().enumerate() {
                let mut open = None;
                let mut n_open = 0;
                let mut satisfied = false;
                for &l in c {
                    match t.value(l) {
                        Some(true) => {
                            satisfied = true;
                            break;
                        }
                        Some(false) => {}
                        None => {
                            n_open += 1;
                            open = Some(l);
                        }
                    }
                }
                if satisfied {
                    continue;
                }
                match (n_open, open) {
                    (0, _) => return Some(ci),
                    (1, Some(l)) => {
                        t.assign(l, Some(ci));
                        progress = true;
                    }
                    _ => {}
                }
            }
            if !progress {
                return None;
            }
        }
    }

    /// First-UIP learned clause (asserting literal first) and the level to
    /// jump back to.
    fn analyze(&self, conflict: usize, t: &Trail) -> (Vec<Lit>, usize) {
        let current = t.marks.len();
        let mut seen = vec![false; self.n];
        let mut learnt = vec![Lit::pos(0)];
        let mut pending = 0;
        let mut clause = conflict;
        let mut skip = None;
        let mut idx = t.order.len();
        loop {
            for &l in &self.clauses[clause] {
                if Some(l.var) == skip || seen[l.var] || t.level[l.var] == 0 {
                    continue;
                }
                seen[l.var] = true;
                if t.level[l.var] == current {
                    pending += 1;
                } else {
                    learnt.push(l);
                }
            }
            let v = loop {
                idx -= 1;
                if seen[t.order[idx]] {
                    break t.order[idx];
                }
            };
            seen[v] = false;
            pending -= 1;
            if pending == 0 {
                learnt[0] = Lit { var: v, positive: t.val[v] != Some(true) };
                break;
            }
            clause = t.reason[v].expect("implied literal has a reason");
            skip = Some(v);
        }
        let back = learnt[1..].iter().map(|l| t.level[l.var]).max().unwrap_or(0);
        (learnt, back)
    }

    fn search(&mut self) -> Option<Vec<bool>> {
        let mut t = Trail::new(self.n);
        loop {
            if let Some(conflict) = self.propagate(&mut t) {
                if t.marks.is_empty() {
                    return None;
                }
                let (learnt, back) = self.analyze(conflict, &t);
                t.backjump(back);
                let unit = learnt[0];
                self.clauses.push(learnt);
                t.assign(unit, Some(self.clauses.len() - 1));
                continue;
            }
            match (0..self.n).find(|&v| t.val[v].is_none()) {
                None => return Some(t.val.into_iter().map(|v| v == Some(true)).collect()),
                Some(v) => {
                    t.marks.push(t.order.len());
                    t.assign(Lit::neg(v), None);
                }
            }
        }
    }
}
