//! Branch-and-prune over a conjunction of equalities.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{RationalInterval, Term};
use crate::interval::{gradient_enclosure, natural_extension, rational_down, FloatBox, FloatInterval};
use crate::prune::{prune_fixpoint, BoxConsistency, Constraint, Hc4, Hc4ThenBox, PruneOperator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Mode {
    /// Report delta-sat only for a box whose enclosures all lie in
    /// `[-delta, delta]`.
    Certificate,
    /// Report sat once a nonempty pruned box is narrower than epsilon.
    PaperEpsilon,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Epsilon {
    Auto,
    Fixed(BigRational),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BranchRule {
    LargestFirst,
    RoundRobin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Worklist {
    DepthFirst,
    /// Smallest box first.
    BestFirst,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pruning {
    Hc4,
    Box,
    Hc4ThenBox,
}

#[derive(Clone, Debug)]
pub struct IcpConfig {
    pub delta: BigRational,
    pub epsilon: Epsilon,
    pub mode: Mode,
    pub max_boxes: usize,
    pub branch_rule: BranchRule,
    pub worklist: Worklist,
    pub pruning: Pruning,
    /// Boxes narrower than this that still fail the certificate are given up.
    pub min_width: f64,
    /// Seed for breaking ties between equally wide dimensions.
    pub seed: Option<u64>,
}

impl IcpConfig {
    pub fn new(delta: BigRational) -> IcpConfig {
        IcpConfig {
            delta,
            epsilon: Epsilon::Auto,
            mode: Mode::Certificate,
            max_boxes: 200_000,
            branch_rule: BranchRule::LargestFirst,
            worklist: Worklist::DepthFirst,
            pruning: Pruning::Hc4,
            min_width: 2f64.powi(-40),
            seed: None,
        }
    }

    pub fn operator(&self) -> &'static dyn PruneOperator {
        match self.pruning {
            Pruning::Hc4 => &Hc4,
            Pruning::Box => &BoxConsistency,
            Pruning::Hc4ThenBox => &Hc4ThenBox,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IcpError {
    #[error("derivative bound unavailable ({0}); set epsilon explicitly")]
    UnboundedDerivative(String),
    #[error("epsilon must be positive")]
    NonpositiveEpsilon,
    #[error("delta must be positive")]
    NonpositiveDelta,
}

/// A box on which every constraint's enclosure was checked.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub witness: FloatBox,
    /// Enclosure of each constraint term over the witness box.
    pub ranges: Vec<FloatInterval>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum IcpAnswer {
    Unsat,
    DeltaSat(Certificate),
    ResourceOut,
}

impl IcpAnswer {
    pub fn is_unsat(&self) -> bool {
        matches!(self, IcpAnswer::Unsat)
    }

    pub fn is_delta_sat(&self) -> bool {
        matches!(self, IcpAnswer::DeltaSat(_))
    }
}

/// `true` iff every constraint's natural extension over the witness lies in
/// `[-delta, delta]`.
pub fn certificate_check(witness: &FloatBox, terms: &[Term], delta: &BigRational) -> bool {
    if witness.is_empty() {
        return false;
    }
    let d = rational_down(delta).max(0.0);
    let band = FloatInterval::new(-d, d);
    terms.iter().all(|t| natural_extension(t, witness).map_or(false, |r| r.is_subset(&band)))
}

/// Epsilon such that points closer than it in the infinity norm have
/// constraint values closer than delta, from interval gradient bounds.
pub fn epsilon_from_delta(terms: &[Term], b0: &FloatBox, delta: &BigRational) -> Result<BigRational, IcpError> {
    if !delta.is_positive() {
        return Err(IcpError::NonpositiveDelta);
    }
    let n = b0.dim().max(1);
    let mut lip: f64 = 0.0;
    for t in terms {
        let g = gradient_enclosure(t, b0).map_err(|e| IcpError::UnboundedDerivative(e.to_string()))?;
        let l = g.iter().map(|d| d.mag()).fold(0.0, f64::max);
        if !l.is_finite() {
            return Err(IcpError::UnboundedDerivative(format!("gradient of {t} is unbounded")));
        }
        lip = lip.max(l);
    }
    if lip == 0.0 {
        return Ok(BigRational::from_float(b0.width() + 1.0).unwrap_or_else(|| BigRational::from_integer(1.into())));
    }
    let l = BigRational::from_float(lip).expect("finite");
    Ok(delta / (BigRational::from_integer((2 * n).into()) * l))
}

/// Branch-and-prune on the box `b0`.
pub fn solve_conjunction(cs: &[Constraint], b0: &FloatBox, cfg: &IcpConfig) -> Result<IcpAnswer, IcpError> {
    Search::new(cs, b0, None, cfg, cfg.operator())?.run()
}

/// As [`solve_conjunction`], with a custom pruning operator.
pub fn solve_conjunction_with(cs: &[Constraint], b0: &FloatBox, cfg: &IcpConfig, op: &dyn PruneOperator) -> Result<IcpAnswer, IcpError> {
    Search::new(cs, b0, None, cfg, op)?.run()
}

/// As [`solve_conjunction`] on the float hull of rational bounds; witnesses
/// must also meet the closed rational domain.
pub fn solve_in_domain(cs: &[Constraint], bounds: &[RationalInterval], cfg: &IcpConfig) -> Result<IcpAnswer, IcpError> {
    let b0 = crate::normalize::domain_box(bounds);
    Search::new(cs, &b0, Some(bounds), cfg, cfg.operator())?.run()
}

struct Entry {
    width: f64,
    order: usize,
    bx: FloatBox,
    depth: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // max-heap: smaller width first, then earlier insertion
    fn cmp(&self, other: &Self) -> Ordering {
        other.width.total_cmp(&self.width).then(other.order.cmp(&self.order))
    }
}

enum Pool {
    Stack(Vec<Entry>),
    Heap(BinaryHeap<Entry>),
}

impl Pool {
    fn push(&mut self, e: Entry) {
        match self {
            Pool::Stack(s) => s.push(e),
            Pool::Heap(h) => h.push(e),
        }
    }

    fn pop(&mut self) -> Option<Entry> {
        match self {
            Pool::Stack(s) => s.pop(),
            Pool::Heap(h) => h.pop(),
        }
    }
}

struct Search<'a> {
    cs: Vec<Constraint>,
    terms: Vec<Term>,
    b0: FloatBox,
    domain: Option<&'a [RationalInterval]>,
    cfg: &'a IcpConfig,
    op: &'a dyn PruneOperator,
    epsilon: f64,
    branch_dims: Vec<usize>,
    rng: Option<ChaCha8Rng>,
}

impl<'a> Search<'a> {
    fn new(
        cs: &[Constraint],
        b0: &FloatBox,
        domain: Option<&'a [RationalInterval]>,
        cfg: &'a IcpConfig,
        op: &'a dyn PruneOperator,
    ) -> Result<Search<'a>, IcpError> {
        let terms: Vec<Term> = cs.iter().map(|c| c.term.clone()).collect();
        let (band_delta, epsilon) = match cfg.mode {
            Mode::Certificate => {
                if cfg.delta.is_negative() {
                    return Err(IcpError::NonpositiveDelta);
                }
                (cfg.delta.clone(), 0.0)
            }
            Mode::PaperEpsilon => {
                let eps = match &cfg.epsilon {
                    Epsilon::Fixed(e) if e.is_positive() => e.clone(),
                    Epsilon::Fixed(_) => return Err(IcpError::NonpositiveEpsilon),
                    Epsilon::Auto => epsilon_from_delta(&terms, b0, &cfg.delta)?,
                };
                // largest float not above epsilon, so widths below it are below epsilon
                (BigRational::zero(), rational_down(&eps))
            }
        };
        let cs: Vec<Constraint> = cs.iter().map(|c| c.with_delta(band_delta.clone())).collect();
        let branch_dims = match cfg.mode {
            Mode::Certificate => {
                let mut v: Vec<usize> = cs.iter().flat_map(|c| c.vars().iter().copied()).collect();
                v.sort_unstable();
                v.dedup();
                v
            }
            Mode::PaperEpsilon => (0..b0.dim()).collect(),
        };
        Ok(Search {
            cs,
            terms,
            b0: b0.clone(),
            domain,
            cfg,
            op,
            epsilon,
            branch_dims,
            rng: cfg.seed.map(ChaCha8Rng::seed_from_u64),
        })
    }

    fn meets_domain(&self, bx: &FloatBox) -> bool {
        let Some(domain) = self.domain else { return true };
        domain.iter().zip(bx.intervals()).all(|(d, iv)| {
            let lo_ok = d.hi.as_ref().map_or(true, |h| BigRational::from_float(iv.lo()).map_or(true, |l| &l <= h));
            let hi_ok = d.lo.as_ref().map_or(true, |l| BigRational::from_float(iv.hi()).map_or(true, |h| &h >= l));
            lo_ok && hi_ok
        })
    }

    fn certificate(&self, bx: &FloatBox) -> Certificate {
        Certificate { witness: bx.clone(), ranges: self.cs.iter().map(|c| c.range(bx)).collect() }
    }

    // boxes whose corner sits on the band edge never certify as a whole
    fn probe_midpoint(&self, bx: &FloatBox) -> Option<Certificate> {
        let mut p = bx.clone();
        for &i in &self.branch_dims {
            p.set(i, FloatInterval::point(bx.get(i).mid()));
        }
        (p.is_subset(&self.b0) && certificate_check(&p, &self.terms, &self.cfg.delta) && self.meets_domain(&p)).then(|| self.certificate(&p))
    }

    fn choose_dim(&mut self, bx: &FloatBox, depth: usize) -> Option<usize> {
        let dims: Vec<usize> = self.branch_dims.iter().copied().filter(|&i| bx.get(i).bisect().is_ok()).collect();
        if dims.is_empty() {
            return None;
        }
        if self.cfg.branch_rule == BranchRule::RoundRobin {
            return Some(dims[depth % dims.len()]);
        }
        let best = dims.iter().map(|&i| bx.get(i).width()).fold(0.0, f64::max);
        let ties: Vec<usize> = dims.into_iter().filter(|&i| bx.get(i).width() == best).collect();
        match &mut self.rng {
            Some(rng) if ties.len() > 1 => Some(ties[rng.gen_range(0..ties.len())]),
            _ => Some(ties[0]),
        }
    }

    fn run(mut self) -> Result<IcpAnswer, IcpError> {
        if self.b0.is_empty() {
            return Ok(IcpAnswer::Unsat);
        }
        let mut pool = match self.cfg.worklist {
            Worklist::DepthFirst => Pool::Stack(Vec::new()),
            Worklist::BestFirst => Pool::Heap(BinaryHeap::new()),
        };
        let mut order = 0;
        pool.push(Entry { width: self.b0.width(), order, bx: self.b0.clone(), depth: 0 });
        let mut explored = 0usize;
        let mut undecided = false;
        while let Some(Entry { bx, depth, .. }) = pool.pop() {
            explored += 1;
            if explored > self.cfg.max_boxes {
                return Ok(IcpAnswer::ResourceOut);
            }
            let pruned = prune_fixpoint(&bx, &self.cs, self.op);
            if pruned.is_empty() {
                continue;
            }
            let bx = pruned.bx;
            if !bx.is_subset(&self.b0) {
                // only a broken operator can leave the initial box
                undecided = true;
                if bx.width() > 1e300 {
                    continue;
                }
            }
            match self.cfg.mode {
                Mode::Certificate => {
                    if certificate_check(&bx, &self.terms, &self.cfg.delta) && self.meets_domain(&bx) {
                        return Ok(IcpAnswer::DeltaSat(self.certificate(&bx)));
                    }
                    if let Some(cert) = self.probe_midpoint(&bx) {
                        return Ok(IcpAnswer::DeltaSat(cert));
                    }
                    let width = self.branch_dims.iter().map(|&i| bx.get(i).width()).fold(0.0, f64::max);
                    if width < self.cfg.min_width {
                        undecided = true;
                        continue;
                    }
                }
                Mode::PaperEpsilon => {
                    if bx.width() < self.epsilon && self.meets_domain(&bx) {
                        return Ok(IcpAnswer::DeltaSat(self.certificate(&bx)));
                    }
                }
            }
            let Some(i) = self.choose_dim(&bx, depth) else {
                undecided = true;
                continue;
            };
            let (left, right) = bx.bisect(i).expect("dimension is bisectable");
            for child in [right, left] {
                order += 1;
                pool.push(Entry { width: child.width(), order, bx: child, depth: depth + 1 });
            }
        }
        Ok(if undecided { IcpAnswer::ResourceOut } else { IcpAnswer::Unsat })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prune::sabotage::{CollapseToUpper, Inflate, PruneToEmpty};

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn x() -> Term {
        Term::var(0)
    }

    fn y() -> Term {
        Term::var(1)
    }

    fn cs(ts: &[Term]) -> Vec<Constraint> {
        ts.iter().cloned().map(Constraint::exact).collect()
    }

    #[test]
    fn square_plus_one_is_unsat() {
        let r = solve_conjunction(&cs(&[x().pow(2) + Term::int(1)]), &FloatBox::from_bounds(&[(-1.0, 1.0)]), &IcpConfig::new(q(1, 2)));
        assert_eq!(r.unwrap(), IcpAnswer::Unsat);
    }

    #[test]
    fn exact_root_gives_small_witness() {
        let r = solve_conjunction(&cs(&[x()]), &FloatBox::from_bounds(&[(-1.0, 1.0)]), &IcpConfig::new(q(1, 1000))).unwrap();
        let IcpAnswer::DeltaSat(cert) = r else { panic!("expected delta-sat") };
        assert!(cert.witness.get(0).is_subset(&FloatInterval::new(-0.001, 0.001)));
        assert!(certificate_check(&cert.witness, &[x()], &q(1, 1000)));
    }

    #[test]
    fn two_constraints_witness_near_one_one() {
        let terms = [x() - y().pow(2), x() - Term::int(1)];
        let r = solve_conjunction(&cs(&terms), &FloatBox::from_bounds(&[(1.0, 2.0), (0.0, 4.0)]), &IcpConfig::new(q(1, 100))).unwrap();
        let IcpAnswer::DeltaSat(cert) = r else { panic!("expected delta-sat") };
        let m = cert.witness.midpoint();
        assert!((m[0] - 1.0).abs() < 0.01 && (m[1] - 1.0).abs() < 0.01);
        assert!(certificate_check(&cert.witness, &terms, &q(1, 100)));
    }

    #[test]
    fn sine_root_near_pi() {
        let r = solve_conjunction(&cs(&[x().sin()]), &FloatBox::from_bounds(&[(3.0, 4.0)]), &IcpConfig::new(q(1, 1000))).unwrap();
        let IcpAnswer::DeltaSat(cert) = r else { panic!("expected delta-sat") };
        let w = cert.witness.get(0);
        assert!((w.mid() - std::f64::consts::PI).abs() <= 0.0011, "{w}");
    }

    #[test]
    fn epsilon_examples() {
        let unit = FloatBox::from_bounds(&[(-1.0, 1.0)]);
        assert!(epsilon_from_delta(&[x()], &unit, &q(1, 10)).unwrap() <= q(1, 20));
        let b = FloatBox::from_bounds(&[(0.0, 1.0)]);
        assert!(epsilon_from_delta(&[Term::int(10) * x()], &b, &q(1, 10)).unwrap() <= q(1, 200));
        let b = FloatBox::from_bounds(&[(0.0, 7.0)]);
        assert!(epsilon_from_delta(&[x().sin()], &b, &q(1, 100)).unwrap() <= q(1, 200));
    }

    #[test]
    fn epsilon_mode_agrees_on_simple_cases() {
        let mut cfg = IcpConfig::new(q(1, 10));
        cfg.mode = Mode::PaperEpsilon;
        let unit = FloatBox::from_bounds(&[(-1.0, 1.0)]);
        assert!(solve_conjunction(&cs(&[x()]), &unit, &cfg).unwrap().is_delta_sat());
        assert!(solve_conjunction(&cs(&[x().pow(2) + Term::int(1)]), &unit, &cfg).unwrap().is_unsat());
    }

    #[test]
    fn sabotaged_operators_break_the_answers() {
        let unit = FloatBox::from_bounds(&[(-1.0, 1.0)]);
        let mut cfg = IcpConfig::new(q(1, 10));
        cfg.max_boxes = 1000;
        // no contraction: an unsatisfiable problem is never refuted
        let r = solve_conjunction_with(&cs(&[x().pow(2) + Term::int(1)]), &unit, &cfg, &Inflate).unwrap();
        assert_eq!(r, IcpAnswer::ResourceOut);
        // pruning everything away claims unsat for a satisfiable problem
        let r = solve_conjunction_with(&cs(&[x()]), &unit, &cfg, &PruneToEmpty).unwrap();
        assert_eq!(r, IcpAnswer::Unsat);
        // collapsing to [1, 1] claims sat for x^2 + 1 = 0 in epsilon mode
        cfg.mode = Mode::PaperEpsilon;
        let r = solve_conjunction_with(&cs(&[x().pow(2) + Term::int(1)]), &unit, &cfg, &CollapseToUpper).unwrap();
        assert!(r.is_delta_sat());
    }

    #[test]
    fn monotone_in_delta() {
        let terms = [x().pow(2) - Term::int(2)];
        let b = FloatBox::from_bounds(&[(0.0, 2.0)]);
        for d in [q(1, 1000), q(1, 100), q(1, 10)] {
            assert!(solve_conjunction(&cs(&terms), &b, &IcpConfig::new(d)).unwrap().is_delta_sat());
        }
    }
}
