//! Arbitrary-precision dyadic interval arithmetic.
//!
//! A `Dyadic` is `man * 2^exp` with a big-integer mantissa. Interval
//! endpoints are rounded outward to a caller-chosen number of mantissa bits
//! after every operation, which keeps the mantissas bounded while the
//! enclosure stays rigorous. Elementary functions use Taylor series with
//! explicit remainder bounds.

use std::cell::RefCell;
use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Dir {
    Down,
    Up,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum DyError {
    /// Divisor enclosure contains zero; `exact` when it is exactly `[0, 0]`.
    DivByZero { exact: bool },
    /// Argument too large to evaluate meaningfully.
    TooLarge,
}

#[derive(Clone, Debug)]
pub(crate) struct Dyadic {
    man: BigInt,
    exp: i64,
}

impl Dyadic {
    pub fn zero() -> Dyadic {
        Dyadic { man: BigInt::zero(), exp: 0 }
    }

    pub fn from_int(v: impl Into<BigInt>) -> Dyadic {
        Dyadic { man: v.into(), exp: 0 }
    }

    /// Exact value of a finite double.
    pub fn from_f64(x: f64) -> Dyadic {
        assert!(x.is_finite());
        if x == 0.0 {
            return Dyadic::zero();
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 1 { -1i64 } else { 1 };
        let raw_exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (m, e) = if raw_exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), raw_exp - 1075)
        };
        Dyadic { man: BigInt::from(m) * sign, exp: e }
    }

    pub fn from_rational(q: &BigRational, prec: u32, dir: Dir) -> Dyadic {
        Dyadic::div(&Dyadic::from_int(q.numer().clone()), &Dyadic::from_int(q.denom().clone()), prec, dir)
    }

    pub fn to_rational(&self) -> BigRational {
        if self.exp >= 0 {
            BigRational::from_integer(&self.man << self.exp as usize)
        } else {
            BigRational::new(self.man.clone(), BigInt::one() << (-self.exp) as usize)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.man.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.man.is_negative()
    }

    /// `|self| < 2^magnitude()`; `i64::MIN` for zero.
    pub fn magnitude(&self) -> i64 {
        if self.man.is_zero() {
            i64::MIN
        } else {
            self.man.bits() as i64 + self.exp
        }
    }

    pub fn neg(&self) -> Dyadic {
        Dyadic { man: -&self.man, exp: self.exp }
    }

    pub fn abs(&self) -> Dyadic {
        Dyadic { man: self.man.abs(), exp: self.exp }
    }

    /// Multiply by `2^k`.
    pub fn shl(&self, k: i64) -> Dyadic {
        Dyadic { man: self.man.clone(), exp: self.exp + k }
    }

    pub fn add(&self, o: &Dyadic) -> Dyadic {
        if self.is_zero() {
            return o.clone();
        }
        if o.is_zero() {
            return self.clone();
        }
        match self.exp.cmp(&o.exp) {
            Ordering::Equal => Dyadic { man: &self.man + &o.man, exp: self.exp },
            Ordering::Less => Dyadic { man: &self.man + (&o.man << (o.exp - self.exp) as usize), exp: self.exp },
            Ordering::Greater => Dyadic { man: (&self.man << (self.exp - o.exp) as usize) + &o.man, exp: o.exp },
        }
    }

    pub fn sub(&self, o: &Dyadic) -> Dyadic {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Dyadic) -> Dyadic {
        Dyadic { man: &self.man * &o.man, exp: self.exp + o.exp }
    }

    /// Round to at most `prec` mantissa bits in direction `dir`.
    pub fn round(&self, prec: u32, dir: Dir) -> Dyadic {
        let bits = self.man.bits();
        if bits <= prec as u64 {
            return self.clone();
        }
        let shift = (bits - prec as u64) as usize;
        let man = match dir {
            Dir::Down => floor_shr(&self.man, shift),
            Dir::Up => -floor_shr(&(-&self.man), shift),
        };
        Dyadic { man, exp: self.exp + shift as i64 }
    }

    /// `a / b` rounded to `prec` bits; `b` must be nonzero.
    pub fn div(a: &Dyadic, b: &Dyadic, prec: u32, dir: Dir) -> Dyadic {
        assert!(!b.is_zero());
        if a.is_zero() {
            return Dyadic::zero();
        }
        let s = (prec as i64 + b.man.bits() as i64 - a.man.bits() as i64 + 2).max(0) as usize;
        let num = &a.man << s;
        let (q, r) = num.div_mod_floor(&b.man);
        let q = match dir {
            Dir::Down => q,
            Dir::Up if r.is_zero() => q,
            Dir::Up => q + 1,
        };
        Dyadic { man: q, exp: a.exp - b.exp - s as i64 }.round(prec, dir)
    }

    /// Largest integer not above the value.
    pub fn floor(&self) -> BigInt {
        if self.exp >= 0 {
            &self.man << self.exp as usize
        } else {
            floor_shr(&self.man, (-self.exp) as usize)
        }
    }
}

fn floor_shr(x: &BigInt, shift: usize) -> BigInt {
    if shift == 0 {
        return x.clone();
    }
    let d = BigInt::one() << shift;
    x.div_floor(&d)
}

impl PartialEq for Dyadic {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Dyadic {}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.sub(other).man.sign() {
            num_bigint::Sign::Minus => Ordering::Less,
            num_bigint::Sign::NoSign => Ordering::Equal,
            num_bigint::Sign::Plus => Ordering::Greater,
        }
    }
}

/// Closed interval with dyadic endpoints.
#[derive(Clone, Debug)]
pub(crate) struct DyInterval {
    pub lo: Dyadic,
    pub hi: Dyadic,
}

fn min_of(xs: [Dyadic; 4]) -> Dyadic {
    xs.into_iter().min().unwrap()
}

fn max_of(xs: [Dyadic; 4]) -> Dyadic {
    xs.into_iter().max().unwrap()
}

impl DyInterval {
    pub fn point(x: Dyadic) -> DyInterval {
        DyInterval { lo: x.clone(), hi: x }
    }

    pub fn new(lo: Dyadic, hi: Dyadic) -> DyInterval {
        debug_assert!(lo <= hi);
        DyInterval { lo, hi }
    }

    pub fn from_rational(q: &BigRational, prec: u32) -> DyInterval {
        DyInterval {
            lo: Dyadic::from_rational(q, prec, Dir::Down),
            hi: Dyadic::from_rational(q, prec, Dir::Up),
        }
    }

    pub fn one() -> DyInterval {
        DyInterval::point(Dyadic::from_int(1))
    }

    pub fn width(&self) -> Dyadic {
        self.hi.sub(&self.lo)
    }

    pub fn mid(&self) -> Dyadic {
        self.lo.add(&self.hi).shl(-1)
    }

    /// Upper bound on `|x|` over the interval.
    pub fn mag(&self) -> Dyadic {
        std::cmp::max(self.lo.abs(), self.hi.abs())
    }

    pub fn contains_zero(&self) -> bool {
        (self.lo.is_negative() || self.lo.is_zero()) && !self.hi.is_negative()
    }

    fn rounded(lo: Dyadic, hi: Dyadic, prec: u32) -> DyInterval {
        DyInterval { lo: lo.round(prec, Dir::Down), hi: hi.round(prec, Dir::Up) }
    }

    pub fn add(&self, o: &DyInterval, prec: u32) -> DyInterval {
        DyInterval::rounded(self.lo.add(&o.lo), self.hi.add(&o.hi), prec)
    }

    pub fn sub(&self, o: &DyInterval, prec: u32) -> DyInterval {
        DyInterval::rounded(self.lo.sub(&o.hi), self.hi.sub(&o.lo), prec)
    }

    pub fn neg(&self) -> DyInterval {
        DyInterval { lo: self.hi.neg(), hi: self.lo.neg() }
    }

    pub fn mul(&self, o: &DyInterval, prec: u32) -> DyInterval {
        let p = [self.lo.mul(&o.lo), self.lo.mul(&o.hi), self.hi.mul(&o.lo), self.hi.mul(&o.hi)];
        DyInterval::rounded(min_of(p.clone()), max_of(p), prec)
    }

    pub fn div(&self, o: &DyInterval, prec: u32) -> Result<DyInterval, DyError> {
        if o.contains_zero() {
            return Err(DyError::DivByZero { exact: o.lo.is_zero() && o.hi.is_zero() });
        }
        let down = [
            Dyadic::div(&self.lo, &o.lo, prec, Dir::Down),
            Dyadic::div(&self.lo, &o.hi, prec, Dir::Down),
            Dyadic::div(&self.hi, &o.lo, prec, Dir::Down),
            Dyadic::div(&self.hi, &o.hi, prec, Dir::Down),
        ];
        let up = [
            Dyadic::div(&self.lo, &o.lo, prec, Dir::Up),
            Dyadic::div(&self.lo, &o.hi, prec, Dir::Up),
            Dyadic::div(&self.hi, &o.lo, prec, Dir::Up),
            Dyadic::div(&self.hi, &o.hi, prec, Dir::Up),
        ];
        Ok(DyInterval { lo: min_of(down), hi: max_of(up) })
    }

    pub fn div_int(&self, n: u64, prec: u32) -> DyInterval {
        let d = Dyadic::from_int(n);
        let a = Dyadic::div(&self.lo, &d, prec, Dir::Down);
        let b = Dyadic::div(&self.hi, &d, prec, Dir::Up);
        DyInterval { lo: a, hi: b }
    }

    pub fn abs(&self) -> DyInterval {
        if !self.lo.is_negative() {
            self.clone()
        } else if self.hi.is_negative() || self.hi.is_zero() {
            self.neg()
        } else {
            DyInterval { lo: Dyadic::zero(), hi: self.mag() }
        }
    }

    pub fn min(&self, o: &DyInterval) -> DyInterval {
        DyInterval { lo: std::cmp::min(self.lo.clone(), o.lo.clone()), hi: std::cmp::min(self.hi.clone(), o.hi.clone()) }
    }

    pub fn max(&self, o: &DyInterval) -> DyInterval {
        DyInterval { lo: std::cmp::max(self.lo.clone(), o.lo.clone()), hi: std::cmp::max(self.hi.clone(), o.hi.clone()) }
    }

    pub fn pow(&self, n: u32, prec: u32) -> DyInterval {
        let pow_dir = |x: &Dyadic, dir: Dir| {
            let mut acc = Dyadic::from_int(1);
            for _ in 0..n {
                acc = acc.mul(x).round(prec, dir);
            }
            acc
        };
        if n % 2 == 1 {
            // odd powers are monotone; x^n rounded down is -( |x|^n rounded up ) for x < 0
            let lo = if self.lo.is_negative() { pow_dir(&self.lo.abs(), Dir::Up).neg() } else { pow_dir(&self.lo, Dir::Down) };
            let hi = if self.hi.is_negative() { pow_dir(&self.hi.abs(), Dir::Down).neg() } else { pow_dir(&self.hi, Dir::Up) };
            return DyInterval { lo, hi };
        }
        let a = self.abs();
        DyInterval { lo: pow_dir(&a.lo, Dir::Down), hi: pow_dir(&a.hi, Dir::Up) }
    }

    pub fn intersect_unit(&self) -> DyInterval {
        let one = Dyadic::from_int(1);
        let m1 = one.neg();
        DyInterval {
            lo: std::cmp::max(self.lo.clone(), m1.clone()),
            hi: std::cmp::min(self.hi.clone(), one),
        }
    }

    pub fn exp(&self, prec: u32) -> Result<DyInterval, DyError> {
        let lo = exp_point(&self.lo, prec)?.lo;
        let hi = exp_point(&self.hi, prec)?.hi;
        Ok(DyInterval { lo, hi })
    }

    pub fn sin(&self, prec: u32) -> Result<DyInterval, DyError> {
        self.trig(prec, true)
    }

    pub fn cos(&self, prec: u32) -> Result<DyInterval, DyError> {
        self.trig(prec, false)
    }

    /// Midpoint-radius enclosure: both functions are 1-Lipschitz.
    fn trig(&self, prec: u32, sine: bool) -> Result<DyInterval, DyError> {
        let m = self.mid();
        let r = self.width().shl(-1).round(prec, Dir::Up);
        let c = trig_point(&m, prec, sine)?;
        let out = DyInterval::rounded(c.lo.sub(&r), c.hi.add(&r), prec);
        Ok(out.intersect_unit())
    }
}

/// Sum of a convergent series of interval terms; `next` produces term `k`
/// from term `k - 1`. Stops once the term magnitude falls below `2^-stop`
/// and adds the magnitude of the last term as tail bound, valid when the
/// tail is dominated by its first omitted term.
fn series(first: DyInterval, stop: i64, prec: u32, mut next: impl FnMut(&DyInterval, u64) -> DyInterval) -> DyInterval {
    let mut sum = first.clone();
    let mut term = first;
    let mut k = 1;
    loop {
        term = next(&term, k);
        k += 1;
        let mag = term.mag();
        if mag.magnitude() < -stop {
            let tail = mag.round(prec, Dir::Up);
            return DyInterval::rounded(sum.lo.sub(&tail), sum.hi.add(&tail), prec);
        }
        sum = sum.add(&term, prec);
    }
}

fn exp_point(x: &Dyadic, prec: u32) -> Result<DyInterval, DyError> {
    if x.is_zero() {
        return Ok(DyInterval::one());
    }
    let mag = x.magnitude();
    if mag > 40 {
        return Err(DyError::TooLarge);
    }
    // scale so that |y| <= 1/2
    let k = (mag + 1).max(0) as u32;
    let wp = prec + 2 * k + 24;
    let y = DyInterval::point(x.shl(-(k as i64)));
    // each omitted tail is at most a third of its first term when |y| <= 1/2
    let mut s = series(DyInterval::one(), wp as i64 + 2, wp, |t, n| t.mul(&y, wp).div_int(n, wp));
    for _ in 0..k {
        s = s.mul(&s, wp);
    }
    Ok(DyInterval::rounded(s.lo, s.hi, prec))
}

thread_local! {
    static PI_CACHE: RefCell<Option<(u32, DyInterval)>> = const { RefCell::new(None) };
}

/// `atan(1/m)` by its alternating Taylor series.
fn atan_inv(m: u64, wp: u32) -> DyInterval {
    let m2 = Dyadic::from_int(m * m);
    let one = Dyadic::from_int(1);
    let mut sum = DyInterval::point(Dyadic::zero());
    let mut power = Dyadic::from_int(m);
    let mut k: u64 = 0;
    loop {
        let den = power.mul(&Dyadic::from_int(2 * k + 1));
        let t = DyInterval { lo: Dyadic::div(&one, &den, wp, Dir::Down), hi: Dyadic::div(&one, &den, wp, Dir::Up) };
        if t.hi.magnitude() < -(wp as i64) - 4 {
            // alternating with decreasing terms: tail bounded by this term
            return DyInterval::rounded(sum.lo.sub(&t.hi), sum.hi.add(&t.hi), wp);
        }
        sum = if k % 2 == 0 { sum.add(&t, wp) } else { sum.sub(&t, wp) };
        power = power.mul(&m2);
        k += 1;
    }
}

/// Enclosure of pi with at least `prec` bits.
pub(crate) fn pi(prec: u32) -> DyInterval {
    let prec = prec.max(128);
    if let Some(p) = PI_CACHE.with(|c| c.borrow().as_ref().filter(|(bits, _)| *bits >= prec).map(|(_, p)| p.clone())) {
        return p;
    }
    let wp = prec + 16;
    let a = atan_inv(5, wp);
    let b = atan_inv(239, wp);
    let sixteen = DyInterval::point(Dyadic::from_int(16));
    let four = DyInterval::point(Dyadic::from_int(4));
    let p = sixteen.mul(&a, wp).sub(&four.mul(&b, wp), wp);
    PI_CACHE.with(|c| *c.borrow_mut() = Some((prec, p.clone())));
    p
}

fn sin_series(r: &DyInterval, wp: u32) -> DyInterval {
    let r2 = r.mul(r, wp);
    let r2 = DyInterval { lo: std::cmp::max(r2.lo, Dyadic::zero()), hi: r2.hi };
    series(r.clone(), wp as i64 + 2, wp, |t, k| t.mul(&r2, wp).div_int((2 * k) * (2 * k + 1), wp).neg())
}

fn cos_series(r: &DyInterval, wp: u32) -> DyInterval {
    let r2 = r.mul(r, wp);
    let r2 = DyInterval { lo: std::cmp::max(r2.lo, Dyadic::zero()), hi: r2.hi };
    series(DyInterval::one(), wp as i64 + 2, wp, |t, k| t.mul(&r2, wp).div_int((2 * k - 1) * (2 * k), wp).neg())
}

fn trig_point(x: &Dyadic, prec: u32, sine: bool) -> Result<DyInterval, DyError> {
    if x.is_zero() {
        return Ok(if sine { DyInterval::point(Dyadic::zero()) } else { DyInterval::one() });
    }
    let mag = x.magnitude();
    if mag > 200 {
        return Err(DyError::TooLarge);
    }
    let wp = prec + mag.max(0) as u32 + 32;
    let (r, quadrant) = if mag <= 0 {
        (DyInterval::point(x.clone()), 0u32)
    } else {
        let half_pi = {
            let p = pi(wp);
            DyInterval { lo: p.lo.shl(-1), hi: p.hi.shl(-1) }
        };
        // nearest multiple of pi/2; any integer works, this one keeps |r| small
        let q = Dyadic::div(x, &half_pi.lo, 64 + mag as u32, Dir::Down);
        let n = q.add(&Dyadic::from_int(1).shl(-1)).floor();
        let n_iv = DyInterval::point(Dyadic::from_int(n.clone()));
        let r = DyInterval::point(x.clone()).sub(&n_iv.mul(&half_pi, wp), wp);
        let quadrant = n.mod_floor(&BigInt::from(4)).to_u32().unwrap();
        (r, quadrant)
    };
    let v = match (sine, quadrant) {
        (true, 0) | (false, 3) => sin_series(&r, wp),
        (true, 1) | (false, 0) => cos_series(&r, wp),
        (true, 2) | (false, 1) => sin_series(&r, wp).neg(),
        _ => cos_series(&r, wp).neg(),
    };
    Ok(DyInterval::rounded(v.lo, v.hi, prec))
}
