//! Grid decision procedure for low-dimensional standard forms: evaluate the
//! matrix at every point of a uniform grid on the unit cube, fine enough that
//! a true solution forces some grid point to pass the relaxed test.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{enclose_point, pow2_neg, EvalConfig, EvalError, RationalInterval, Term};
use crate::icp::{epsilon_from_delta, IcpError};
use crate::interval::{rational_down, rational_up, FloatBox, FloatInterval, Tape};
use crate::normalize::StandardForm;

pub const MAX_DIM: usize = 3;
pub const MAX_EXPONENT: u32 = 22;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("variable {0} has an unbounded domain")]
    Unbounded(usize),
    #[error("{0} variables; the grid oracle handles at most {MAX_DIM}")]
    TooManyVariables(usize),
    #[error("grid of 2^{exponent} steps per axis in {dim} dimensions exceeds the budget")]
    GridTooLarge { exponent: u32, dim: usize },
    #[error("no modulus of continuity: {0}")]
    NoModulus(String),
    #[error("flows are not supported by the grid oracle")]
    Flow,
    #[error("delta must be positive")]
    NonpositiveDelta,
    #[error("evaluation failed: {0}")]
    Evaluation(String),
}

#[derive(Clone, Debug)]
pub struct OracleConfig {
    /// Cap on the number of grid points.
    pub max_points: u64,
    /// Try a float interval evaluation before the multiprecision one.
    pub float_fast_path: bool,
    /// Multiply the number of steps per axis (for finer adjudication grids).
    pub refine: u32,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { max_points: 1 << 24, float_fast_path: true, refine: 1 }
    }
}

/// Grid with `steps + 1` points `k / steps` per axis of the unit cube.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridSpec {
    pub exponent: u32,
    pub steps: u64,
    pub dim: usize,
}

impl GridSpec {
    pub fn num_points(&self) -> u64 {
        (self.steps + 1).pow(self.dim as u32)
    }

    fn coords(&self, mut index: u64, out: &mut [u64]) {
        for c in out.iter_mut().rev() {
            *c = index % (self.steps + 1);
            index /= self.steps + 1;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum OracleAnswer {
    Unsat,
    /// A grid point, in the original coordinates, where the relaxed matrix holds.
    DeltaSat(Vec<BigRational>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    pub answer: OracleAnswer,
    pub grid: GridSpec,
}

/// Substitute `x_i -> lo_i + (hi_i - lo_i) x_i` so every variable ranges over
/// `[0, 1]`. Open bounds are closed.
pub fn rescale_to_unit(sf: &StandardForm) -> Result<StandardForm, OracleError> {
    let maps = affine_maps(&sf.bounds)?;
    let image: Vec<Term> = maps
        .iter()
        .enumerate()
        .map(|(i, (lo, width))| {
            if width.is_zero() {
                Term::constant(lo.clone())
            } else if lo.is_zero() && width.is_one() {
                Term::var(i)
            } else {
                let scaled = if width.is_one() { Term::var(i) } else { Term::constant(width.clone()) * Term::var(i) };
                if lo.is_zero() {
                    scaled
                } else {
                    Term::constant(lo.clone()) + scaled
                }
            }
        })
        .collect();
    let clauses = sf.clauses.iter().map(|c| c.iter().map(|t| t.substitute(&|v| image[v].clone())).collect()).collect();
    Ok(StandardForm {
        bounds: vec![RationalInterval::closed_int(0, 1); sf.num_vars()],
        clauses,
        ..sf.clone()
    })
}

fn affine_maps(bounds: &[RationalInterval]) -> Result<Vec<(BigRational, BigRational)>, OracleError> {
    bounds
        .iter()
        .enumerate()
        .map(|(i, b)| match (&b.lo, &b.hi) {
            (Some(lo), Some(hi)) => Ok((lo.clone(), hi - lo)),
            _ => Err(OracleError::Unbounded(i)),
        })
        .collect()
}

/// Smallest exponent `e` with `2^-e` below the modulus-of-continuity bound for
/// `delta`, over the unit cube.
pub fn grid_exponent(unit: &StandardForm, delta: &BigRational) -> Result<u32, OracleError> {
    let terms: Vec<Term> = unit.clauses.iter().flatten().cloned().collect();
    let cube = FloatBox::from_bounds(&vec![(0.0, 1.0); unit.num_vars()]);
    let eps = epsilon_from_delta(&terms, &cube, delta).map_err(|e| match e {
        IcpError::NonpositiveDelta => OracleError::NonpositiveDelta,
        other => OracleError::NoModulus(other.to_string()),
    })?;
    let mut e = 0;
    while pow2_neg(e) >= eps {
        e += 1;
        if e > MAX_EXPONENT {
            return Err(OracleError::GridTooLarge { exponent: e, dim: unit.num_vars() });
        }
    }
    Ok(e)
}

/// Decide the standard form on a grid: delta-sat at the first grid point (in
/// lexicographic order) where every clause has a disjunct with
/// `|g| < delta/2` up to evaluation error `delta/8`, unsat when there is none.
pub fn grid_decide(sf: &StandardForm, delta: &BigRational) -> Result<OracleResult, OracleError> {
    grid_decide_with(sf, delta, &OracleConfig::default())
}

pub fn grid_decide_with(sf: &StandardForm, delta: &BigRational, cfg: &OracleConfig) -> Result<OracleResult, OracleError> {
    if !delta.is_positive() {
        return Err(OracleError::NonpositiveDelta);
    }
    let n = sf.num_vars();
    if n > MAX_DIM {
        return Err(OracleError::TooManyVariables(n));
    }
    if sf.clauses.iter().flatten().any(|t| t.contains_flow()) {
        return Err(OracleError::Flow);
    }
    let maps = affine_maps(&sf.bounds)?;
    let unit = rescale_to_unit(sf)?;
    let exponent = grid_exponent(&unit, delta)?;
    let steps = (1u64 << exponent).saturating_mul(cfg.refine.max(1) as u64);
    let grid = GridSpec { exponent, steps, dim: n };
    if (steps + 1).checked_pow(n as u32).map_or(true, |p| p > cfg.max_points) {
        return Err(OracleError::GridTooLarge { exponent, dim: n });
    }
    let test = PointTest::new(&unit, delta, cfg);
    const CHUNK: u64 = 4096;
    let total = grid.num_points();
    let chunks = total.div_ceil(CHUNK);
    let hit = (0..chunks).into_par_iter().find_map_first(|c| {
        let mut coords = vec![0u64; n];
        let mut vals = Vec::new();
        for idx in c * CHUNK..((c + 1) * CHUNK).min(total) {
            grid.coords(idx, &mut coords);
            match test.holds(&coords, steps, &mut vals) {
                Ok(true) => return Some(Ok(idx)),
                Ok(false) => {}
                Err(e) => return Some(Err(e)),
            }
        }
        None
    });
    let answer = match hit {
        None => OracleAnswer::Unsat,
        Some(Err(e)) => return Err(e),
        Some(Ok(idx)) => {
            let mut coords = vec![0u64; n];
            grid.coords(idx, &mut coords);
            let steps_q = BigRational::from_integer(steps.into());
            let point = coords
                .iter()
                .zip(&maps)
                .map(|(&k, (lo, width))| lo + width * BigRational::from_integer(k.into()) / &steps_q)
                .collect();
            OracleAnswer::DeltaSat(point)
        }
    };
    Ok(OracleResult { answer, grid })
}

struct PointTest {
    clauses: Vec<Vec<(Term, Tape)>>,
    half_delta: BigRational,
    half_lo: f64,
    half_hi: f64,
    /// Largest float width accepted from the fast path.
    accuracy: f64,
    bits: u32,
    float_fast_path: bool,
}

impl PointTest {
    fn new(unit: &StandardForm, delta: &BigRational, cfg: &OracleConfig) -> PointTest {
        let half_delta = delta / BigRational::from_integer(2.into());
        let eighth = delta / BigRational::from_integer(8.into());
        let mut bits = 0;
        while pow2_neg(bits) > eighth {
            bits += 1;
        }
        PointTest {
            clauses: unit.clauses.iter().map(|c| c.iter().map(|t| (t.clone(), Tape::compile(t))).collect()).collect(),
            half_lo: rational_down(&half_delta),
            half_hi: rational_up(&half_delta),
            half_delta,
            accuracy: rational_down(&eighth),
            bits,
            float_fast_path: cfg.float_fast_path,
        }
    }

    fn holds(&self, coords: &[u64], steps: u64, vals: &mut Vec<FloatInterval>) -> Result<bool, OracleError> {
        // grid coordinates are dyadic with few bits, hence exact floats when steps is a power of two
        let exact = steps.is_power_of_two();
        let bx = FloatBox::new(
            coords
                .iter()
                .map(|&k| {
                    if exact {
                        FloatInterval::point(k as f64 / steps as f64)
                    } else {
                        FloatInterval::hull_rational(&BigRational::new(k.into(), steps.into()))
                    }
                })
                .collect(),
        );
        for clause in &self.clauses {
            let mut any = false;
            for (term, tape) in clause {
                if self.small(term, tape, &bx, coords, steps, vals)? {
                    any = true;
                    break;
                }
            }
            if !any {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The relaxed test on one disjunct: the smallest magnitude in an
    /// enclosure of width at most delta/8 is below delta/2.
    fn small(&self, term: &Term, tape: &Tape, bx: &FloatBox, coords: &[u64], steps: u64, vals: &mut Vec<FloatInterval>) -> Result<bool, OracleError> {
        if self.float_fast_path {
            if let Ok(r) = tape.forward(bx, vals) {
                if !r.is_empty() && r.is_bounded() && r.width() <= self.accuracy {
                    let m = r.mig();
                    if m < self.half_lo {
                        return Ok(true);
                    }
                    if m > self.half_hi {
                        return Ok(false);
                    }
                    let m = BigRational::from_float(m).expect("finite");
                    return Ok(m < self.half_delta);
                }
            }
        }
        let steps_q = BigRational::from_integer(steps.into());
        let point: Vec<BigRational> = coords.iter().map(|&k| BigRational::from_integer(k.into()) / &steps_q).collect();
        match enclose_point(term, &point, self.bits, &EvalConfig::default()) {
            Ok((lo, hi)) => {
                if &hi - &lo > pow2_neg(self.bits) {
                    return Err(OracleError::Evaluation(format!("could not reach 2^-{} accuracy", self.bits)));
                }
                let mig = if lo.is_positive() {
                    lo
                } else if hi.is_negative() {
                    -hi
                } else {
                    BigRational::zero()
                };
                Ok(mig < self.half_delta)
            }
            // undefined at this point: the disjunct does not hold there
            Err(EvalError::NondefinedAtPoint(_)) => Ok(false),
            Err(e) => Err(OracleError::Evaluation(e.to_string())),
        }
    }
}
