//! Pruning operators for equality constraints `f = 0` relaxed to the band
//! `|f| <= delta`.
//!
//! Every operator here is contracting (the output box lies inside the
//! input), consistent (a nonempty output still has `0` in the relaxed
//! enclosure of `f`) and solution preserving (no point with `|f| <= delta`
//! is removed).

mod box_consistency;
mod hc4;
pub mod sabotage;

use std::fmt;

use num_rational::BigRational;

use crate::expr::Term;
use crate::interval::{rational_down, rational_up, FloatBox, FloatInterval, Tape};

pub use box_consistency::{box_consistency_narrow, BoxConsistency};
pub use hc4::{hc4_revise, Hc4};

/// Relative shrink below which a pruning round counts as no progress.
pub const PROGRESS_RELATIVE: f64 = 0.01;
/// Absolute shrink below which a pruning round counts as no progress.
pub const PROGRESS_ABSOLUTE: f64 = 1e-12;
/// Hard cap on fixpoint rounds.
pub const MAX_ROUNDS: usize = 10_000;

/// `term = 0` with relaxation `|term| <= delta`.
#[derive(Clone)]
pub struct Constraint {
    pub term: Term,
    pub delta: BigRational,
    tape: Tape,
    band: FloatInterval,
    cert_band: FloatInterval,
}

impl fmt::Debug for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Constraint({} = 0, delta {})", self.term, self.delta)
    }
}

impl Constraint {
    pub fn new(term: Term, delta: BigRational) -> Constraint {
        assert!(delta >= BigRational::from_integer(0.into()), "negative relaxation");
        let tape = Tape::compile(&term);
        let up = rational_up(&delta);
        let down = rational_down(&delta).max(0.0);
        Constraint { term, delta, tape, band: FloatInterval::new(-up, up), cert_band: FloatInterval::new(-down, down) }
    }

    /// Unrelaxed constraint `term = 0`.
    pub fn exact(term: Term) -> Constraint {
        Constraint::new(term, BigRational::from_integer(0.into()))
    }

    pub fn with_delta(&self, delta: BigRational) -> Constraint {
        Constraint::new(self.term.clone(), delta)
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    /// Outward float enclosure of `[-delta, delta]`, used when pruning.
    pub fn band(&self) -> FloatInterval {
        self.band
    }

    /// Inward float approximation of `[-delta, delta]`, used by certificates.
    pub fn certificate_band(&self) -> FloatInterval {
        self.cert_band
    }

    pub fn vars(&self) -> &[usize] {
        self.tape.vars()
    }

    /// Natural extension of the term over the box; the whole line when the
    /// term cannot be evaluated (division by an exact zero).
    pub fn range(&self, bx: &FloatBox) -> FloatInterval {
        self.tape.eval(bx).unwrap_or(FloatInterval::ENTIRE)
    }

    /// Whether `0` may lie in the relaxed enclosure over the box.
    pub fn consistent(&self, bx: &FloatBox) -> bool {
        !bx.is_empty() && !self.range(bx).intersect(&self.band).is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PruneResult {
    pub bx: FloatBox,
    pub changed: bool,
}

impl PruneResult {
    pub fn empty(dim: usize) -> PruneResult {
        PruneResult { bx: FloatBox::new(vec![FloatInterval::EMPTY; dim]), changed: true }
    }

    pub fn is_empty(&self) -> bool {
        self.bx.is_empty()
    }

    fn from_boxes(before: &FloatBox, after: FloatBox) -> PruneResult {
        if after.is_empty() {
            return PruneResult::empty(before.dim());
        }
        let changed = &after != before;
        PruneResult { bx: after, changed }
    }
}

/// A pruning operator on boxes.
pub trait PruneOperator: Sync {
    fn name(&self) -> &str;
    fn prune(&self, bx: &FloatBox, c: &Constraint) -> PruneResult;
}

/// HC4 followed by box consistency on every variable of the constraint.
pub struct Hc4ThenBox;

impl PruneOperator for Hc4ThenBox {
    fn name(&self) -> &str {
        "hc4+box"
    }

    fn prune(&self, bx: &FloatBox, c: &Constraint) -> PruneResult {
        let first = hc4_revise(bx, c);
        if first.is_empty() {
            return first;
        }
        let second = BoxConsistency.prune(&first.bx, c);
        PruneResult::from_boxes(bx, second.bx)
    }
}

/// Apply the operator to every constraint in turn until no interval shrinks
/// noticeably.
pub fn prune_fixpoint(bx: &FloatBox, cs: &[Constraint], op: &dyn PruneOperator) -> PruneResult {
    if bx.is_empty() {
        return PruneResult::empty(bx.dim());
    }
    let mut cur = bx.clone();
    for _ in 0..MAX_ROUNDS {
        let mut progress = false;
        for c in cs {
            let r = op.prune(&cur, c);
            if r.is_empty() {
                return PruneResult::empty(bx.dim());
            }
            if r.changed {
                progress |= significant_shrink(&cur, &r.bx);
                cur = r.bx;
            }
        }
        if !progress {
            break;
        }
    }
    PruneResult::from_boxes(bx, cur)
}

fn significant_shrink(before: &FloatBox, after: &FloatBox) -> bool {
    before.intervals().iter().zip(after.intervals()).any(|(a, b)| {
        let (wa, wb) = (a.width(), b.width());
        if wa.is_infinite() {
            return wb.is_finite() || a != b;
        }
        let shrink = wa - wb;
        shrink > PROGRESS_RELATIVE * wa && shrink > PROGRESS_ABSOLUTE
    })
}
