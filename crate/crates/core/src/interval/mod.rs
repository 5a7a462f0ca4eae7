//! Closed floating-point intervals with outward rounding.
//!
//! Every operation returns an interval containing all real results of the
//! operation applied to members of its inputs. Endpoints may be infinite;
//! the empty interval is a distinct value and never encoded through NaN.

pub mod round;
mod extension;

use std::fmt;

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use round::*;

pub use extension::{gradient_enclosure, natural_extension, Node, Tape};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IntervalError {
    #[error("division by the point interval [0, 0]")]
    FullLine,
    #[error("cannot bisect a dimension without an interior float")]
    DegenerateBisect,
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// Lower and upper enclosure of pi.
pub const PI_LO: f64 = std::f64::consts::PI;
pub const PI_HI: f64 = 3.1415926535897936;

#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloatInterval {
    lo: f64,
    hi: f64,
}

impl fmt::Debug for FloatInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for FloatInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            write!(f, "empty")
        } else {
            write!(f, "[{}, {}]", self.lo, self.hi)
        }
    }
}

impl FloatInterval {
    /// Panics if `lo > hi` or an endpoint is NaN.
    pub fn new(lo: f64, hi: f64) -> FloatInterval {
        assert!(lo <= hi, "invalid interval [{lo}, {hi}]");
        FloatInterval { lo, hi }
    }

    /// `[lo, hi]`, or empty when `lo > hi`.
    pub fn checked(lo: f64, hi: f64) -> FloatInterval {
        if lo <= hi {
            FloatInterval { lo, hi }
        } else {
            FloatInterval::EMPTY
        }
    }

    pub const EMPTY: FloatInterval = FloatInterval { lo: f64::INFINITY, hi: f64::NEG_INFINITY };
    pub const ENTIRE: FloatInterval = FloatInterval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };

    pub fn point(x: f64) -> FloatInterval {
        FloatInterval::new(x, x)
    }

    /// Smallest float interval containing the rational.
    pub fn hull_rational(q: &BigRational) -> FloatInterval {
        FloatInterval::new(rational_down(q), rational_up(q))
    }

    /// Smallest float interval containing `[lo, hi]`.
    pub fn hull_rational_pair(lo: &BigRational, hi: &BigRational) -> FloatInterval {
        FloatInterval::new(rational_down(lo), rational_up(hi))
    }

    pub fn pi() -> FloatInterval {
        FloatInterval::new(PI_LO, PI_HI)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    /// Width rounded up; zero for the empty interval.
    pub fn width(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            sub_up(self.hi, self.lo)
        }
    }

    /// A float inside the interval, as close to the center as rounding allows.
    pub fn mid(&self) -> f64 {
        debug_assert!(!self.is_empty());
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => {
                let m = 0.5 * self.lo + 0.5 * self.hi;
                m.clamp(self.lo, self.hi)
            }
            (false, true) => {
                if self.hi > 0.0 {
                    0.0
                } else {
                    (self.hi * 2.0 - 1.0).max(-f64::MAX)
                }
            }
            (true, false) => {
                if self.lo < 0.0 {
                    0.0
                } else {
                    (self.lo * 2.0 + 1.0).min(f64::MAX)
                }
            }
            (false, false) => 0.0,
        }
    }

    /// Largest absolute value of a member.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Smallest absolute value of a member.
    pub fn mig(&self) -> f64 {
        if self.contains(0.0) {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    pub fn is_subset(&self, other: &FloatInterval) -> bool {
        self.is_empty() || (other.lo <= self.lo && self.hi <= other.hi)
    }

    pub fn intersect(&self, other: &FloatInterval) -> FloatInterval {
        FloatInterval::checked(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    /// Smallest interval containing both.
    pub fn hull(&self, other: &FloatInterval) -> FloatInterval {
        if self.is_empty() {
            return *other;
        }
        if other.is_empty() {
            return *self;
        }
        FloatInterval { lo: self.lo.min(other.lo), hi: self.hi.max(other.hi) }
    }

    /// Smallest interval containing all given floats (empty for none).
    pub fn hull_of_points(points: impl IntoIterator<Item = f64>) -> FloatInterval {
        points.into_iter().fold(FloatInterval::EMPTY, |acc, x| acc.hull(&FloatInterval::point(x)))
    }

    /// Widen by `r >= 0` on both sides, rounding outward.
    pub fn inflate(&self, r: f64) -> FloatInterval {
        if self.is_empty() {
            return *self;
        }
        FloatInterval { lo: sub_down(self.lo, r), hi: add_up(self.hi, r) }
    }

    /// Split at the midpoint into two halves covering the interval.
    pub fn bisect(&self) -> Result<(FloatInterval, FloatInterval), IntervalError> {
        if self.is_empty() {
            return Err(IntervalError::DegenerateBisect);
        }
        let m = self.mid();
        if !(self.lo < m && m < self.hi) {
            return Err(IntervalError::DegenerateBisect);
        }
        Ok((FloatInterval::new(self.lo, m), FloatInterval::new(m, self.hi)))
    }

    pub fn neg(&self) -> FloatInterval {
        if self.is_empty() {
            return *self;
        }
        FloatInterval { lo: -self.hi, hi: -self.lo }
    }

    pub fn add(&self, o: &FloatInterval) -> FloatInterval {
        if self.is_empty() || o.is_empty() {
            return FloatInterval::EMPTY;
        }
        FloatInterval { lo: add_down(self.lo, o.lo), hi: add_up(self.hi, o.hi) }
    }

    pub fn sub(&self, o: &FloatInterval) -> FloatInterval {
        if self.is_empty() || o.is_empty() {
            return FloatInterval::EMPTY;
        }
        FloatInterval { lo: sub_down(self.lo, o.hi), hi: sub_up(self.hi, o.lo) }
    }

    pub fn mul(&self, o: &FloatInterval) -> FloatInterval {
        if self.is_empty() || o.is_empty() {
            return FloatInterval::EMPTY;
        }
        let (a, b, c, d) = (self.lo, self.hi, o.lo, o.hi);
        let lo = mul_down(a, c).min(mul_down(a, d)).min(mul_down(b, c)).min(mul_down(b, d));
        let hi = mul_up(a, c).max(mul_up(a, d)).max(mul_up(b, c)).max(mul_up(b, d));
        FloatInterval { lo, hi }
    }

    pub fn scale(&self, k: f64) -> FloatInterval {
        self.mul(&FloatInterval::point(k))
    }

    /// Interval quotient. When `0` lies in the divisor the result is the
    /// hull of the extended quotient, which may be the whole line.
    pub fn div(&self, o: &FloatInterval) -> Result<FloatInterval, IntervalError> {
        if self.is_empty() || o.is_empty() {
            return Ok(FloatInterval::EMPTY);
        }
        if o.lo == 0.0 && o.hi == 0.0 {
            return Err(IntervalError::FullLine);
        }
        if self.lo == 0.0 && self.hi == 0.0 {
            return Ok(FloatInterval::point(0.0));
        }
        if o.contains_zero() {
            let (p, q) = div_extended(self, o);
            return Ok(p.hull(&q));
        }
        let (a, b, c, d) = (self.lo, self.hi, o.lo, o.hi);
        let lo = div_down(a, c).min(div_down(a, d)).min(div_down(b, c)).min(div_down(b, d));
        let hi = div_up(a, c).max(div_up(a, d)).max(div_up(b, c)).max(div_up(b, d));
        Ok(FloatInterval { lo, hi })
    }

    pub fn abs(&self) -> FloatInterval {
        if self.is_empty() {
            return *self;
        }
        if self.lo >= 0.0 {
            *self
        } else if self.hi <= 0.0 {
            self.neg()
        } else {
            FloatInterval { lo: 0.0, hi: self.mag() }
        }
    }

    pub fn min(&self, o: &FloatInterval) -> FloatInterval {
        if self.is_empty() || o.is_empty() {
            return FloatInterval::EMPTY;
        }
        FloatInterval { lo: self.lo.min(o.lo), hi: self.hi.min(o.hi) }
    }

    pub fn max(&self, o: &FloatInterval) -> FloatInterval {
        if self.is_empty() || o.is_empty() {
            return FloatInterval::EMPTY;
        }
        FloatInterval { lo: self.lo.max(o.lo), hi: self.hi.max(o.hi) }
    }

    /// `x^n` for `n >= 1`.
    pub fn powi(&self, n: u32) -> FloatInterval {
        if self.is_empty() {
            return *self;
        }
        if n == 0 {
            return FloatInterval::point(1.0);
        }
        if n % 2 == 1 {
            return FloatInterval { lo: signed_pow_down(self.lo, n), hi: signed_pow_up(self.hi, n) };
        }
        FloatInterval { lo: pow_down(self.mig(), n), hi: pow_up(self.mag(), n) }
    }

    pub fn exp(&self) -> FloatInterval {
        if self.is_empty() {
            return *self;
        }
        if self.lo == 0.0 && self.hi == 0.0 {
            return FloatInterval::point(1.0);
        }
        let lo = if self.lo == f64::NEG_INFINITY { 0.0 } else { pad_down(self.lo.exp(), 2).max(0.0) };
        let hi = if self.hi == f64::INFINITY { f64::INFINITY } else { pad_up(self.hi.exp(), 2) };
        FloatInterval { lo, hi }
    }

    /// Natural logarithm of the positive part; empty when there is none.
    pub fn ln(&self) -> FloatInterval {
        if self.is_empty() || self.hi <= 0.0 {
            return FloatInterval::EMPTY;
        }
        let lo = if self.lo <= 0.0 { f64::NEG_INFINITY } else { pad_down(self.lo.ln(), 2) };
        let hi = if self.hi == f64::INFINITY { f64::INFINITY } else { pad_up(self.hi.ln(), 2) };
        FloatInterval { lo, hi }
    }

    pub fn sin(&self) -> FloatInterval {
        self.trig(true)
    }

    pub fn cos(&self) -> FloatInterval {
        self.trig(false)
    }

    fn trig(&self, sine: bool) -> FloatInterval {
        if self.is_empty() {
            return *self;
        }
        if self.lo == 0.0 && self.hi == 0.0 {
            return FloatInterval::point(if sine { 0.0 } else { 1.0 });
        }
        let unit = FloatInterval::new(-1.0, 1.0);
        if !self.is_bounded() || self.mag() > 1.0e7 || self.width() >= 6.28 {
            return unit;
        }
        let f = |x: f64| if sine { x.sin() } else { x.cos() };
        let (fa, fb) = (f(self.lo), f(self.hi));
        let mut lo = pad_down(fa.min(fb), 2);
        let mut hi = pad_up(fa.max(fb), 2);
        // maxima of sin at pi/2 + 2k pi, of cos at 2k pi; minima half a period later
        let max_offset = if sine { FloatInterval::pi().scale(0.5) } else { FloatInterval::point(0.0) };
        let min_offset = max_offset.add(&FloatInterval::pi());
        if self.may_contain_period_point(&max_offset) {
            hi = 1.0;
        }
        if self.may_contain_period_point(&min_offset) {
            lo = -1.0;
        }
        FloatInterval { lo: lo.max(-1.0), hi: hi.min(1.0) }
    }

    /// Whether `offset + 2 k pi` might lie in the interval for some integer k.
    fn may_contain_period_point(&self, offset: &FloatInterval) -> bool {
        let two_pi = FloatInterval::pi().scale(2.0);
        let k_lo = FloatInterval::point(self.lo).sub(offset).div(&two_pi).expect("nonzero").lo;
        let k_hi = FloatInterval::point(self.hi).sub(offset).div(&two_pi).expect("nonzero").hi;
        k_lo.ceil() <= k_hi.floor()
    }
}

fn signed_pow_down(x: f64, n: u32) -> f64 {
    if x >= 0.0 {
        pow_down(x, n)
    } else {
        -pow_up(-x, n)
    }
}

fn signed_pow_up(x: f64, n: u32) -> f64 {
    if x >= 0.0 {
        pow_up(x, n)
    } else {
        -pow_down(-x, n)
    }
}

/// Largest float not above `q`.
pub fn rational_down(q: &BigRational) -> f64 {
    let f = q.to_f64().unwrap_or(f64::NAN);
    if f.is_nan() {
        return f64::NEG_INFINITY;
    }
    if f.is_infinite() {
        return if f > 0.0 { f64::MAX } else { f };
    }
    match BigRational::from_float(f) {
        Some(r) if &r > q => f.next_down(),
        _ => f,
    }
}

/// Smallest float not below `q`.
pub fn rational_up(q: &BigRational) -> f64 {
    let f = q.to_f64().unwrap_or(f64::NAN);
    if f.is_nan() {
        return f64::INFINITY;
    }
    if f.is_infinite() {
        return if f < 0.0 { f64::MIN } else { f };
    }
    match BigRational::from_float(f) {
        Some(r) if &r < q => f.next_up(),
        _ => f,
    }
}

/// Extended division `z / y` for a divisor containing zero, as up to two
/// pieces (the second possibly empty).
pub fn div_extended(z: &FloatInterval, y: &FloatInterval) -> (FloatInterval, FloatInterval) {
    let empty = FloatInterval::EMPTY;
    if z.is_empty() || y.is_empty() {
        return (empty, empty);
    }
    if !y.contains_zero() {
        let q = z.div(y).expect("divisor excludes zero");
        return (q, empty);
    }
    if z.contains_zero() {
        return (FloatInterval::ENTIRE, empty);
    }
    let (a, b, c, d) = (z.lo, z.hi, y.lo, y.hi);
    if c == 0.0 && d == 0.0 {
        return (empty, empty);
    }
    let ninf = f64::NEG_INFINITY;
    let pinf = f64::INFINITY;
    if b < 0.0 {
        let left = if d > 0.0 { FloatInterval::new(ninf, div_up(b, d)) } else { empty };
        let right = if c < 0.0 { FloatInterval::new(div_down(b, c), pinf) } else { empty };
        (left, right)
    } else {
        let left = if c < 0.0 { FloatInterval::new(ninf, div_up(a, c)) } else { empty };
        let right = if d > 0.0 { FloatInterval::new(div_down(a, d), pinf) } else { empty };
        (left, right)
    }
}

/// Real n-th roots of `y`, intersected with `x`; the hull of the pieces.
pub fn root_preimage(y: &FloatInterval, n: u32, x: &FloatInterval) -> FloatInterval {
    if y.is_empty() || x.is_empty() {
        return FloatInterval::EMPTY;
    }
    let odd_down = |v: f64| if v >= 0.0 { root_down(v, n) } else { -root_up(-v, n) };
    let odd_up = |v: f64| if v >= 0.0 { root_up(v, n) } else { -root_down(-v, n) };
    if n % 2 == 1 {
        let lo = if y.lo == f64::NEG_INFINITY { f64::NEG_INFINITY } else { odd_down(y.lo) };
        let hi = if y.hi == f64::INFINITY { f64::INFINITY } else { odd_up(y.hi) };
        return x.intersect(&FloatInterval::new(lo, hi));
    }
    if y.hi < 0.0 {
        return FloatInterval::EMPTY;
    }
    let r_lo = root_down(y.lo.max(0.0), n);
    let r_hi = if y.hi == f64::INFINITY { f64::INFINITY } else { root_up(y.hi, n) };
    let pos = x.intersect(&FloatInterval::new(r_lo, r_hi));
    let neg = x.intersect(&FloatInterval::new(-r_hi, -r_lo));
    pos.hull(&neg)
}

/// Hull of `{x in x_iv : sin x in y}`, computed per monotone branch.
pub fn sin_preimage(y: &FloatInterval, x_iv: &FloatInterval) -> FloatInterval {
    if y.is_empty() || x_iv.is_empty() {
        return FloatInterval::EMPTY;
    }
    let y = y.intersect(&FloatInterval::new(-1.0, 1.0));
    if y.is_empty() {
        return FloatInterval::EMPTY;
    }
    if y.lo <= -1.0 && y.hi >= 1.0 {
        return *x_iv;
    }
    if !x_iv.is_bounded() || x_iv.mag() > 1.0e7 || x_iv.width() >= 6.28 {
        return *x_iv;
    }
    let pi = FloatInterval::pi();
    let half_pi = pi.scale(0.5);
    // branch k covers [k pi - pi/2, k pi + pi/2]
    let k_of = |x: f64| FloatInterval::point(x).add(&half_pi).div(&pi).expect("nonzero");
    let k_lo = k_of(x_iv.lo).lo.floor() as i64;
    let k_hi = k_of(x_iv.hi).hi.floor() as i64;
    let asin_lo = |v: f64| if v <= -1.0 { -half_pi.hi } else { pad_down(v.asin(), 4) };
    let asin_hi = |v: f64| if v >= 1.0 { half_pi.hi } else { pad_up(v.asin(), 4) };
    let mut out = FloatInterval::EMPTY;
    for k in k_lo..=k_hi {
        let kpi = pi.scale(k as f64);
        let branch = FloatInterval::checked(kpi.sub(&half_pi).lo, kpi.add(&half_pi).hi).intersect(x_iv);
        if branch.is_empty() {
            continue;
        }
        let offsets = if k % 2 == 0 {
            FloatInterval::new(asin_lo(y.lo), asin_hi(y.hi))
        } else {
            FloatInterval::new(asin_lo(-y.hi), asin_hi(-y.lo))
        };
        out = out.hull(&kpi.add(&offsets).intersect(&branch));
    }
    out
}

/// Hull of `{x in x_iv : cos x in y}` via `cos x = sin(x + pi/2)`.
pub fn cos_preimage(y: &FloatInterval, x_iv: &FloatInterval) -> FloatInterval {
    let half_pi = FloatInterval::pi().scale(0.5);
    let shifted = x_iv.add(&half_pi);
    sin_preimage(y, &shifted).sub(&half_pi).intersect(x_iv)
}

/// Axis-aligned box: one interval per variable.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct FloatBox {
    dims: Vec<FloatInterval>,
}

impl fmt::Debug for FloatBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.dims.iter()).finish()
    }
}

impl FloatBox {
    pub fn new(dims: Vec<FloatInterval>) -> FloatBox {
        FloatBox { dims }
    }

    pub fn from_bounds(bounds: &[(f64, f64)]) -> FloatBox {
        FloatBox::new(bounds.iter().map(|&(l, h)| FloatInterval::new(l, h)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn get(&self, i: usize) -> FloatInterval {
        self.dims[i]
    }

    pub fn set(&mut self, i: usize, v: FloatInterval) {
        self.dims[i] = v;
    }

    pub fn intervals(&self) -> &[FloatInterval] {
        &self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.dims.iter().any(|d| d.is_empty())
    }

    /// Infinity-norm width.
    pub fn width(&self) -> f64 {
        self.dims.iter().map(|d| d.width()).fold(0.0, f64::max)
    }

    /// Index of the widest dimension among `candidates`, lowest index on ties.
    pub fn widest_among(&self, candidates: impl IntoIterator<Item = usize>) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in candidates {
            let w = self.dims[i].width();
            if best.map_or(true, |(_, bw)| w > bw) {
                best = Some((i, w));
            }
        }
        best.map(|(i, _)| i)
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.dims.iter().map(|d| d.mid()).collect()
    }

    pub fn is_subset(&self, other: &FloatBox) -> bool {
        self.dims.len() == other.dims.len() && self.dims.iter().zip(&other.dims).all(|(a, b)| a.is_subset(b))
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        self.dims.iter().zip(p).all(|(d, &x)| d.contains(x))
    }

    pub fn intersect(&self, other: &FloatBox) -> FloatBox {
        FloatBox::new(self.dims.iter().zip(&other.dims).map(|(a, b)| a.intersect(b)).collect())
    }

    pub fn hull(&self, other: &FloatBox) -> FloatBox {
        FloatBox::new(self.dims.iter().zip(&other.dims).map(|(a, b)| a.hull(b)).collect())
    }

    /// Split dimension `i` at its midpoint.
    pub fn bisect(&self, i: usize) -> Result<(FloatBox, FloatBox), IntervalError> {
        let (l, r) = self.dims[i].bisect()?;
        let mut a = self.clone();
        let mut b = self.clone();
        a.dims[i] = l;
        b.dims[i] = r;
        Ok((a, b))
    }
}
