//! Validated enclosures of initial value problems `y' = g(y)`.
//!
//! Each step first finds an a-priori box `A` with `B + [0, h] g(A) ⊆ A`
//! (so the solution cannot leave `A` during the step) and then tightens the
//! end-of-step box to `B + h g(A)`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_rational::BigRational;
use thiserror::Error;

use crate::expr::Term;
use crate::interval::{gradient_enclosure, FloatBox, FloatInterval, IntervalError, Tape};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step at t = {time} failed the a-priori enclosure check")]
    StepRejected { time: f64 },
    #[error("enclosure blew up at t = {time}")]
    BlowUp { time: f64 },
    #[error("time grid must start at 0 and increase strictly")]
    InvalidGrid,
    #[error("expected {expected} initial values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid IVP: {0}")]
    Definition(String),
    #[error(transparent)]
    Interval(#[from] IntervalError),
}

/// Autonomous IVP `y' = field(y)` on `[t0, t_end]`; the field's variables
/// `0..n` are the state components.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ivp {
    pub name: String,
    pub state_names: Vec<String>,
    pub field: Vec<Term>,
    pub t0: BigRational,
    pub t_end: BigRational,
    /// Number of uniform integration steps used for flow extensions.
    pub steps: usize,
}

pub const DEFAULT_STEPS: usize = 200;

/// Enclosure widths beyond this are reported as a blow-up.
const BLOWUP_WIDTH: f64 = 1.0e8;

/// Maximum number of times a failing step is halved.
const MAX_SPLIT_DEPTH: u32 = 12;

impl Ivp {
    pub fn new(
        name: impl Into<String>,
        state_names: Vec<String>,
        field: Vec<Term>,
        t0: BigRational,
        t_end: BigRational,
    ) -> Result<Ivp, OdeError> {
        let name = name.into();
        if state_names.len() != field.len() {
            return Err(OdeError::Definition(format!("{name}: {} states but {} field components", state_names.len(), field.len())));
        }
        if t0 > t_end {
            return Err(OdeError::Definition(format!("{name}: start time after end time")));
        }
        for f in &field {
            if f.contains_flow() {
                return Err(OdeError::Definition(format!("{name}: flows inside a vector field are not supported")));
            }
            if let Some(&v) = f.free_vars().iter().find(|&&v| v >= state_names.len()) {
                return Err(OdeError::Definition(format!("{name}: field uses variable {v} beyond the state dimension")));
            }
        }
        Ok(Ivp { name, state_names, field, t0, t_end, steps: DEFAULT_STEPS })
    }

    pub fn with_steps(mut self, steps: usize) -> Ivp {
        self.steps = steps.max(1);
        self
    }

    pub fn dim(&self) -> usize {
        self.field.len()
    }

    /// Upper bound on the elapsed time `t_end - t0`.
    pub fn duration_hi(&self) -> f64 {
        FloatInterval::hull_rational(&(&self.t_end - &self.t0)).hi()
    }

    /// Bound on the infinity-norm of the field's Jacobian over `bx`.
    pub fn lipschitz_bound(&self, bx: &FloatBox) -> Result<f64, OdeError> {
        let mut l: f64 = 0.0;
        for f in &self.field {
            let g = gradient_enclosure(f, bx)?;
            let row = g.iter().fold(FloatInterval::point(0.0), |acc, d| acc.add(&FloatInterval::point(d.mag())));
            l = l.max(row.hi());
        }
        Ok(l)
    }

    /// Uniform grid of elapsed times covering `[0, t_end - t0]`.
    pub fn uniform_grid(&self, steps: usize) -> Vec<f64> {
        let d = self.duration_hi();
        let steps = steps.max(1);
        let mut grid: Vec<f64> = (0..=steps).map(|k| d * k as f64 / steps as f64).collect();
        grid[steps] = d;
        grid.dedup();
        grid
    }
}

/// Step enclosures over a time grid of elapsed times.
#[derive(Clone, Debug)]
pub struct FlowEnclosure {
    /// Elapsed times `0 = tau_0 < ... < tau_m`.
    pub times: Vec<f64>,
    /// `states[k]` encloses every `y(tau_k)`.
    pub states: Vec<FloatBox>,
    /// `ranges[k]` encloses every `y(t)` for `t` in `[tau_k, tau_{k+1}]`.
    pub ranges: Vec<FloatBox>,
}

impl FlowEnclosure {
    pub fn final_box(&self) -> &FloatBox {
        self.states.last().expect("at least the initial state")
    }

    /// Hull of component `i` over elapsed times in `tau`.
    pub fn component_over(&self, i: usize, tau: FloatInterval) -> FloatInterval {
        if tau.is_empty() {
            return FloatInterval::EMPTY;
        }
        if tau.is_point() {
            if let Ok(k) = self.times.binary_search_by(|t| t.partial_cmp(&tau.lo()).unwrap()) {
                return self.states[k].get(i);
            }
        }
        let mut out = FloatInterval::EMPTY;
        for (k, r) in self.ranges.iter().enumerate() {
            let step = FloatInterval::new(self.times[k], self.times[k + 1]);
            if !step.intersect(&tau).is_empty() {
                out = out.hull(&r.get(i));
            }
        }
        out
    }
}

struct CompiledField {
    tapes: Vec<Tape>,
}

impl CompiledField {
    fn new(ivp: &Ivp) -> CompiledField {
        CompiledField { tapes: ivp.field.iter().map(Tape::compile).collect() }
    }

    /// Rows of the Jacobian enclosure over `bx`.
    fn jacobian(&self, bx: &FloatBox) -> Result<Vec<Vec<FloatInterval>>, OdeError> {
        self.tapes.iter().map(|t| t.gradient(bx).map_err(OdeError::from)).collect()
    }

    fn eval(&self, bx: &FloatBox) -> Result<FloatBox, OdeError> {
        let mut out = Vec::with_capacity(self.tapes.len());
        for t in &self.tapes {
            out.push(t.eval(bx)?);
        }
        Ok(FloatBox::new(out))
    }
}

/// `b + h * g` componentwise.
fn euler(b: &FloatBox, h: &FloatInterval, g: &FloatBox) -> FloatBox {
    FloatBox::new(b.intervals().iter().zip(g.intervals()).map(|(x, d)| x.add(&h.mul(d))).collect())
}

/// Integrate from the initial box over the given grid of elapsed times.
pub fn integrate(ivp: &Ivp, y0: &FloatBox, grid: &[f64]) -> Result<FlowEnclosure, OdeError> {
    if y0.dim() != ivp.dim() {
        return Err(OdeError::DimensionMismatch { expected: ivp.dim(), got: y0.dim() });
    }
    if grid.first() != Some(&0.0) || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(OdeError::InvalidGrid);
    }
    let field = CompiledField::new(ivp);
    let mut states = vec![y0.clone()];
    let mut ranges = Vec::with_capacity(grid.len().saturating_sub(1));
    let mut b = y0.clone();
    // mean-value form: y(tau; y0) in y(tau; m) + V (y0 - m), with V enclosing
    // the sensitivity matrix over the box
    let center = FloatBox::new(y0.midpoint().into_iter().map(FloatInterval::point).collect());
    let mut centered = if y0.intervals().iter().all(|d| d.is_point()) {
        None
    } else {
        integrate(ivp, &center, grid).ok().map(|e| (e, identity(y0.dim()), offsets(y0, &center)))
    };
    for (k, w) in grid.windows(2).enumerate() {
        let (mut next, range) = step_split(ivp, &field, &b, w[0], w[1], 0)?;
        if let Some((mid, v, dy)) = &mut centered {
            let h = FloatInterval::point(w[1]).sub(&FloatInterval::point(w[0]));
            match sensitivity_step(&field, v, &range, &h) {
                Some(v_next) => {
                    *v = v_next;
                    next = next.intersect(&affine(&mid.states[k + 1], v, dy));
                }
                None => centered = None,
            }
        }
        if next.is_empty() || next.width() > BLOWUP_WIDTH || next.intervals().iter().any(|d| !d.is_bounded()) {
            return Err(OdeError::BlowUp { time: w[1] });
        }
        b = next;
        states.push(b.clone());
        ranges.push(range);
    }
    Ok(FlowEnclosure { times: grid.to_vec(), states, ranges })
}

type Matrix = Vec<Vec<FloatInterval>>;

fn identity(n: usize) -> Matrix {
    (0..n).map(|i| (0..n).map(|j| FloatInterval::point(if i == j { 1.0 } else { 0.0 })).collect()).collect()
}

fn offsets(y0: &FloatBox, center: &FloatBox) -> Vec<FloatInterval> {
    y0.intervals().iter().zip(center.intervals()).map(|(a, c)| a.sub(c)).collect()
}

fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = b.first().map_or(0, |r| r.len());
    a.iter()
        .map(|row| (0..n).map(|j| row.iter().zip(b).fold(FloatInterval::point(0.0), |acc, (x, r)| acc.add(&x.mul(&r[j])))).collect())
        .collect()
}

/// `v + h * j * w` entrywise.
fn mat_step(v: &Matrix, h: &FloatInterval, jw: &Matrix) -> Matrix {
    v.iter().zip(jw).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x.add(&h.mul(y))).collect()).collect()
}

fn affine(base: &FloatBox, v: &Matrix, dy: &[FloatInterval]) -> FloatBox {
    FloatBox::new(
        base.intervals()
            .iter()
            .zip(v)
            .map(|(b, row)| row.iter().zip(dy).fold(*b, |acc, (x, d)| acc.add(&x.mul(d))))
            .collect(),
    )
}

/// Enclose the sensitivity matrix at the end of a step from its value `v` at
/// the start, given the state range `range` over the step. `None` when no
/// a-priori enclosure is found.
fn sensitivity_step(field: &CompiledField, v: &Matrix, range: &FloatBox, h: &FloatInterval) -> Option<Matrix> {
    let j = field.jacobian(range).ok()?;
    let h_range = FloatInterval::new(0.0, h.hi());
    let mut w = mat_step(v, &h_range, &mat_mul(&j, v));
    for k in 0..12 {
        let grow = 0.1 * (k + 1) as f64;
        w = w.iter().map(|r| r.iter().map(|d| d.inflate(grow * d.width() + 1e-12 * (1.0 + d.mag()))).collect()).collect();
        let image = mat_step(v, &h_range, &mat_mul(&j, &w));
        let inside = image.iter().zip(&w).all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.is_bounded() && x.is_subset(y)));
        if inside {
            let next = mat_step(v, h, &mat_mul(&j, &image));
            return Some(next.iter().zip(&image).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x.intersect(y)).collect()).collect());
        }
        w = w.iter().zip(&image).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x.hull(y)).collect()).collect();
    }
    None
}

/// One grid step, halving it when the a-priori check fails.
fn step_split(ivp: &Ivp, field: &CompiledField, b: &FloatBox, t_a: f64, t_b: f64, depth: u32) -> Result<(FloatBox, FloatBox), OdeError> {
    match step(ivp, field, b, t_a, t_b) {
        Ok(r) => Ok(r),
        Err(OdeError::StepRejected { .. }) if depth < MAX_SPLIT_DEPTH => {
            let mid = 0.5 * t_a + 0.5 * t_b;
            if !(t_a < mid && mid < t_b) {
                return Err(OdeError::StepRejected { time: t_a });
            }
            let (b_mid, r1) = step_split(ivp, field, b, t_a, mid, depth + 1)?;
            let (b_end, r2) = step_split(ivp, field, &b_mid, mid, t_b, depth + 1)?;
            Ok((b_end, r1.hull(&r2)))
        }
        Err(e) => Err(e),
    }
}

fn step(ivp: &Ivp, field: &CompiledField, b: &FloatBox, t_a: f64, t_b: f64) -> Result<(FloatBox, FloatBox), OdeError> {
    let h = FloatInterval::point(t_b).sub(&FloatInterval::point(t_a));
    let h_range = FloatInterval::new(0.0, h.hi());
    let mut a = euler(b, &h_range, &field.eval(b)?);
    let mut certified = None;
    for k in 0..12 {
        // inflate so that the image can fit strictly inside
        let grow = 0.1 * (k + 1) as f64;
        a = FloatBox::new(
            a.intervals()
                .iter()
                .map(|d| d.inflate(grow * d.width() + 1e-12 * (1.0 + d.mag())))
                .collect(),
        );
        let image = euler(b, &h_range, &field.eval(&a)?);
        if image.is_empty() || image.intervals().iter().any(|d| !d.is_bounded()) {
            break;
        }
        if image.is_subset(&a) {
            certified = Some(image);
            break;
        }
        a = a.hull(&image);
    }
    let a = certified.ok_or(OdeError::StepRejected { time: t_a })?;
    let l = ivp.lipschitz_bound(&a)?;
    if !(l * h.hi() < 1.0) {
        return Err(OdeError::StepRejected { time: t_a });
    }
    let next = euler(b, &h, &field.eval(&a)?).intersect(&a);
    Ok((next, a))
}

thread_local! {
    static CACHE: RefCell<HashMap<(usize, usize, Vec<u64>), Arc<FlowEnclosure>>> = RefCell::new(HashMap::new());
}

const CACHE_LIMIT: usize = 4096;

fn cached_integrate(ivp: &Arc<Ivp>, y0: &FloatBox, steps: usize) -> Result<Arc<FlowEnclosure>, OdeError> {
    let key_bits = y0.intervals().iter().flat_map(|d| [d.lo().to_bits(), d.hi().to_bits()]).collect();
    let key = (Arc::as_ptr(ivp) as usize, steps, key_bits);
    if let Some(hit) = CACHE.with(|c| c.borrow().get(&key).cloned()) {
        return Ok(hit);
    }
    let enc = Arc::new(integrate(ivp, y0, &ivp.uniform_grid(steps))?);
    CACHE.with(|c| {
        let mut c = c.borrow_mut();
        if c.len() >= CACHE_LIMIT {
            c.clear();
        }
        c.insert(key, enc.clone());
    });
    Ok(enc)
}

/// Elapsed-time interval for absolute times `t`, clipped to the IVP's span.
fn elapsed(ivp: &Ivp, t: FloatInterval) -> FloatInterval {
    let tau = t.sub(&FloatInterval::hull_rational(&ivp.t0));
    tau.intersect(&FloatInterval::new(0.0, ivp.duration_hi()))
}

/// Cap on the refined step count of [`flow_extension`].
pub const MAX_ADAPTIVE_STEPS: usize = 1 << 13;

/// Enclosure of `y_i(t; y0)` for `t` in `t_iv` and `y0` in the box. Times
/// outside `[t0, t_end]` contribute nothing. The IVP's step count is doubled
/// until the step length is below the widest input, so the enclosure shrinks
/// with the inputs.
pub fn flow_extension(ivp: &Arc<Ivp>, i: usize, t_iv: FloatInterval, y0: &FloatBox) -> Result<FloatInterval, OdeError> {
    let w = y0.intervals().iter().fold(t_iv.width(), |m, d| m.max(d.width()));
    let duration = ivp.duration_hi();
    let mut steps = ivp.steps;
    while steps < MAX_ADAPTIVE_STEPS && duration / steps as f64 > w {
        steps *= 2;
    }
    flow_extension_steps(ivp, i, t_iv, y0, steps.max(ivp.steps))
}

pub fn flow_extension_steps(ivp: &Arc<Ivp>, i: usize, t_iv: FloatInterval, y0: &FloatBox, steps: usize) -> Result<FloatInterval, OdeError> {
    if i >= ivp.dim() {
        return Err(OdeError::Definition(format!("{} has no component {i}", ivp.name)));
    }
    let tau = elapsed(ivp, t_iv);
    if tau.is_empty() || y0.is_empty() {
        return Ok(FloatInterval::EMPTY);
    }
    let enc = cached_integrate(ivp, y0, steps)?;
    Ok(enc.component_over(i, tau))
}

/// Interval extension of one solution component; alias of
/// [`flow_extension`] in the terminology of pruning.
pub fn ode_extension(ivp: &Arc<Ivp>, i: usize, t_iv: FloatInterval, y0: &FloatBox) -> Result<FloatInterval, OdeError> {
    flow_extension(ivp, i, t_iv, y0)
}

/// `interval ∩ extension`; on integration failure the interval is kept.
pub fn ode_prune(interval: FloatInterval, ivp: &Arc<Ivp>, i: usize, t_iv: FloatInterval, y0: &FloatBox) -> FloatInterval {
    match ode_extension(ivp, i, t_iv, y0) {
        Ok(ext) => interval.intersect(&ext),
        Err(_) => interval,
    }
}
