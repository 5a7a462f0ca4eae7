//! Pointwise evaluation with guaranteed error bounds.
//!
//! The term is evaluated in dyadic interval arithmetic at a working
//! precision that doubles until the enclosure is narrower than the requested
//! accuracy. The midpoint of the final enclosure is returned.

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use thiserror::Error;

use super::dyadic::{DyError, DyInterval, Dyadic};
use super::{pow2_neg, Atom, Relation, Term};
use crate::interval::{natural_extension, FloatBox, FloatInterval};
use crate::odes;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("term is not defined at the point: {0}")]
    NondefinedAtPoint(String),
    #[error("working precision exceeded the cap of {bits} bits")]
    PrecisionUnreachable { bits: u32 },
    #[error("point has {got} coordinates but the term uses variable {needed}")]
    DimensionMismatch { needed: usize, got: usize },
}

/// Three-valued outcome of deciding a predicate at a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Truth {
    True,
    False,
    Unknown,
}

#[derive(Clone, Debug)]
pub struct EvalConfig {
    /// Cap on the working precision in bits.
    pub max_bits: u32,
    /// Try a double-precision interval evaluation first and accept it when it
    /// is already tight enough.
    pub float_fast_path: bool,
    /// Cap on integration steps when a flow is evaluated.
    pub max_flow_steps: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { max_bits: 4096, float_fast_path: false, max_flow_steps: 1 << 14 }
    }
}

/// Rational `r` with `|r - t(point)| < 2^-bits`.
pub fn eval_point(t: &Term, point: &[BigRational], bits: u32) -> Result<BigRational, EvalError> {
    eval_point_with(t, point, bits, &EvalConfig::default())
}

pub fn eval_point_with(t: &Term, point: &[BigRational], bits: u32, cfg: &EvalConfig) -> Result<BigRational, EvalError> {
    check_dimension(t, point)?;
    let target = pow2_neg(bits);
    if cfg.float_fast_path {
        if let Some(r) = float_attempt(t, point, &target) {
            return Ok(r);
        }
    }
    let mut result = Err(EvalError::PrecisionUnreachable { bits: cfg.max_bits });
    refine(t, point, bits, cfg, |lo, hi| {
        if &hi - &lo < target {
            result = Ok((lo + hi) / BigRational::from_integer(2.into()));
            true
        } else {
            false
        }
    })
    .map(|_| result.clone())?
}

/// Rigorous enclosure `[lo, hi]` of `t(point)`, tightened until narrower
/// than `2^-bits` or the precision cap is reached.
pub fn enclose_point(t: &Term, point: &[BigRational], bits: u32, cfg: &EvalConfig) -> Result<(BigRational, BigRational), EvalError> {
    check_dimension(t, point)?;
    let target = pow2_neg(bits);
    let mut best = None;
    let out = refine(t, point, bits, cfg, |lo, hi| {
        let done = &hi - &lo < target;
        best = Some((lo, hi));
        done
    });
    match (out, best) {
        (Ok(()), Some(b)) => Ok(b),
        (Err(EvalError::PrecisionUnreachable { .. }), Some(b)) => Ok(b),
        (Err(e), _) => Err(e),
        (Ok(()), None) => unreachable!(),
    }
}

/// Decide `|t(point)| <= delta`, refining until the answer is certain.
pub fn decide_abs_le(t: &Term, point: &[BigRational], delta: &BigRational, cfg: &EvalConfig) -> Truth {
    let mut verdict = Truth::Unknown;
    let _ = refine(t, point, 0, cfg, |lo, hi| {
        let mag_hi = std::cmp::max(lo.abs(), hi.abs());
        let mag_lo = if lo.is_positive() {
            lo.clone()
        } else if hi.is_negative() {
            -hi
        } else {
            BigRational::zero()
        };
        if &mag_hi <= delta {
            verdict = Truth::True;
        } else if &mag_lo > delta {
            verdict = Truth::False;
        }
        verdict != Truth::Unknown
    });
    verdict
}

/// Decide `t(point) rel 0` for an atom.
pub fn decide_atom(atom: &Atom, point: &[BigRational], cfg: &EvalConfig) -> Truth {
    let mut verdict = Truth::Unknown;
    let _ = refine(&atom.term, point, 0, cfg, |lo, hi| {
        let zero = BigRational::zero();
        let (all_pos, all_neg, is_zero) = (lo > zero, hi < zero, lo.is_zero() && hi.is_zero());
        let all_nonneg = lo >= zero;
        let all_nonpos = hi <= zero;
        let answer = |cond_true: bool, cond_false: bool| {
            if cond_true {
                Truth::True
            } else if cond_false {
                Truth::False
            } else {
                Truth::Unknown
            }
        };
        verdict = match atom.rel {
            Relation::Lt => answer(all_neg, all_nonneg),
            Relation::Le => answer(all_nonpos, all_pos),
            Relation::Gt => answer(all_pos, all_nonpos),
            Relation::Ge => answer(all_nonneg, all_neg),
            Relation::Eq => answer(is_zero, all_pos || all_neg),
            Relation::Ne => answer(all_pos || all_neg, is_zero),
        };
        verdict != Truth::Unknown
    });
    verdict
}

fn check_dimension(t: &Term, point: &[BigRational]) -> Result<(), EvalError> {
    match t.free_vars().last() {
        Some(&v) if v >= point.len() => Err(EvalError::DimensionMismatch { needed: v, got: point.len() }),
        _ => Ok(()),
    }
}

fn float_attempt(t: &Term, point: &[BigRational], target: &BigRational) -> Option<BigRational> {
    let bx = FloatBox::new(point.iter().map(FloatInterval::hull_rational).collect());
    let r = natural_extension(t, &bx).ok()?;
    if r.is_empty() || !r.lo().is_finite() || !r.hi().is_finite() {
        return None;
    }
    let lo = BigRational::from_float(r.lo())?;
    let hi = BigRational::from_float(r.hi())?;
    if &(&hi - &lo) < target {
        Some((lo + hi) / BigRational::from_integer(2.into()))
    } else {
        None
    }
}

/// Evaluate at increasing precision and hand each enclosure to `accept`
/// until it returns true.
fn refine(
    t: &Term,
    point: &[BigRational],
    bits: u32,
    cfg: &EvalConfig,
    mut accept: impl FnMut(BigRational, BigRational) -> bool,
) -> Result<(), EvalError> {
    let mut prec = (bits + 32).max(64);
    let mut level = 0u32;
    let mut last_err = EvalError::PrecisionUnreachable { bits: cfg.max_bits };
    while prec <= cfg.max_bits {
        let ev = DyEval { point, prec, level, cfg };
        match ev.eval(t) {
            Ok(iv) => {
                if accept(iv.lo.to_rational(), iv.hi.to_rational()) {
                    return Ok(());
                }
                last_err = EvalError::PrecisionUnreachable { bits: cfg.max_bits };
            }
            Err(EvalFail::Dy(DyError::DivByZero { exact: true })) => {
                return Err(EvalError::NondefinedAtPoint("division by zero".into()));
            }
            Err(EvalFail::Dy(DyError::DivByZero { exact: false })) => {
                last_err = EvalError::NondefinedAtPoint("denominator not separated from zero".into());
            }
            Err(EvalFail::Dy(DyError::TooLarge)) => {
                return Err(EvalError::PrecisionUnreachable { bits: prec });
            }
            Err(EvalFail::Fatal(e)) => return Err(e),
        }
        prec *= 2;
        level += 1;
    }
    Err(last_err)
}

enum EvalFail {
    Dy(DyError),
    Fatal(EvalError),
}

impl From<DyError> for EvalFail {
    fn from(e: DyError) -> Self {
        EvalFail::Dy(e)
    }
}

struct DyEval<'a> {
    point: &'a [BigRational],
    prec: u32,
    level: u32,
    cfg: &'a EvalConfig,
}

impl DyEval<'_> {
    fn eval(&self, t: &Term) -> Result<DyInterval, EvalFail> {
        let p = self.prec;
        Ok(match t {
            Term::Var(i) => DyInterval::from_rational(&self.point[*i], p),
            Term::Const(c) => DyInterval::from_rational(c, p),
            Term::Neg(a) => self.eval(a)?.neg(),
            Term::Add(a, b) => self.eval(a)?.add(&self.eval(b)?, p),
            Term::Sub(a, b) => self.eval(a)?.sub(&self.eval(b)?, p),
            Term::Mul(a, b) => self.eval(a)?.mul(&self.eval(b)?, p),
            Term::Div(a, b) => self.eval(a)?.div(&self.eval(b)?, p)?,
            Term::Pow(a, n) => self.eval(a)?.pow(*n, p),
            Term::Exp(a) => self.eval(a)?.exp(p)?,
            Term::Sin(a) => self.eval(a)?.sin(p)?,
            Term::Cos(a) => self.eval(a)?.cos(p)?,
            Term::Min(a, b) => self.eval(a)?.min(&self.eval(b)?),
            Term::Max(a, b) => self.eval(a)?.max(&self.eval(b)?),
            Term::Abs(a) => self.eval(a)?.abs(),
            Term::Flow(fl) => {
                let to_float = |iv: &DyInterval| FloatInterval::hull_rational_pair(&iv.lo.to_rational(), &iv.hi.to_rational());
                let time = to_float(&self.eval(&fl.time)?);
                let init = fl.init.iter().map(|a| self.eval(a).map(|iv| to_float(&iv))).collect::<Result<Vec<_>, _>>()?;
                let steps = fl.ivp.steps.saturating_mul(1usize << (2 * self.level).min(30)).min(self.cfg.max_flow_steps).max(1);
                let r = odes::flow_extension_steps(&fl.ivp, fl.component, time, &FloatBox::new(init), steps)
                    .map_err(|e| EvalFail::Fatal(EvalError::NondefinedAtPoint(e.to_string())))?;
                if r.is_empty() || !r.lo().is_finite() || !r.hi().is_finite() {
                    return Err(EvalFail::Fatal(EvalError::NondefinedAtPoint("flow enclosure is unbounded".into())));
                }
                DyInterval::new(Dyadic::from_f64(r.lo()), Dyadic::from_f64(r.hi()))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::rational_abs;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn square_of_half() {
        let t = Term::var(0) * Term::var(0);
        let r = eval_point(&t, &[q(1, 2)], 10).unwrap();
        assert!(rational_abs(&(r - q(1, 4))) < pow2_neg(10));
    }

    #[test]
    fn sine_of_zero() {
        let r = eval_point(&Term::var(0).sin(), &[q(0, 1)], 20).unwrap();
        assert!(rational_abs(&r) < pow2_neg(20));
    }

    #[test]
    fn division_by_exact_zero_is_reported() {
        let t = Term::int(1) / Term::var(0);
        assert!(matches!(eval_point(&t, &[q(0, 1)], 10), Err(EvalError::NondefinedAtPoint(_))));
        // (x - x) is zero but not syntactically so
        let t = Term::int(1) / (Term::var(0) - Term::var(0));
        assert!(eval_point(&t, &[q(1, 3)], 10).is_err());
    }

    #[test]
    fn precisions_are_consistent() {
        let t = (Term::var(0).exp() + Term::var(0).cos()) * Term::var(0).sin();
        let a = eval_point(&t, &[q(7, 3)], 8).unwrap();
        let b = eval_point(&t, &[q(7, 3)], 40).unwrap();
        assert!(rational_abs(&(a - b)) < pow2_neg(8));
    }

    #[test]
    fn atom_decisions() {
        let cfg = EvalConfig::default();
        let a = Atom::new(Term::var(0).sin(), Relation::Gt);
        assert_eq!(decide_atom(&a, &[q(1, 1)], &cfg), Truth::True);
        let z = Atom::new(Term::var(0) - Term::var(0), Relation::Eq);
        assert_eq!(decide_atom(&z, &[q(1, 2)], &cfg), Truth::True);
        // not decidable from enclosures when the point is not dyadic
        assert_eq!(decide_atom(&z, &[q(1, 3)], &cfg), Truth::Unknown);
        assert_eq!(decide_abs_le(&Term::var(0), &[q(1, 20)], &q(1, 10), &cfg), Truth::True);
        assert_eq!(decide_abs_le(&Term::var(0), &[q(1, 5)], &q(1, 10), &cfg), Truth::False);
    }
}
