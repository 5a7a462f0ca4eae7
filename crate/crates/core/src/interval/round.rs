//! Directed rounding on top of round-to-nearest hardware arithmetic.
//!
//! Each operation is computed once in the default rounding mode, then the
//! exact residual (TwoSum / FMA) tells us which side of the true result the
//! rounded value landed on. Only inexact results get nudged by one ulp, so
//! exactly representable results stay exact.

/// Below this magnitude FMA residuals may themselves be rounded, so we fall
/// back to unconditional nudging.
const TINY: f64 = 1.0e-290;

#[inline]
fn two_sum_err(a: f64, b: f64, s: f64) -> f64 {
    let bb = s - a;
    (a - (s - bb)) + (b - bb)
}

#[inline]
pub fn add_down(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s.is_infinite() {
        if a.is_finite() && b.is_finite() && s > 0.0 {
            return f64::MAX;
        }
        return s;
    }
    if s.is_nan() {
        return f64::NEG_INFINITY;
    }
    if two_sum_err(a, b, s) < 0.0 {
        s.next_down()
    } else {
        s
    }
}

#[inline]
pub fn add_up(a: f64, b: f64) -> f64 {
    let s = a + b;
    if s.is_infinite() {
        if a.is_finite() && b.is_finite() && s < 0.0 {
            return f64::MIN;
        }
        return s;
    }
    if s.is_nan() {
        return f64::INFINITY;
    }
    if two_sum_err(a, b, s) > 0.0 {
        s.next_up()
    } else {
        s
    }
}

#[inline]
pub fn sub_down(a: f64, b: f64) -> f64 {
    add_down(a, -b)
}

#[inline]
pub fn sub_up(a: f64, b: f64) -> f64 {
    add_up(a, -b)
}

/// Endpoint product with the interval convention `0 * inf = 0`.
#[inline]
fn raw_mul(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

#[inline]
pub fn mul_down(a: f64, b: f64) -> f64 {
    let p = raw_mul(a, b);
    if p == 0.0 {
        if a == 0.0 || b == 0.0 {
            return 0.0;
        }
        // underflow to zero
        return if (a < 0.0) != (b < 0.0) { (-0.0f64).next_down() } else { 0.0 };
    }
    if p.is_infinite() {
        if a.is_finite() && b.is_finite() && p > 0.0 {
            return f64::MAX;
        }
        return p;
    }
    if p.abs() < TINY {
        return p.next_down();
    }
    if a.mul_add(b, -p) < 0.0 {
        p.next_down()
    } else {
        p
    }
}

#[inline]
pub fn mul_up(a: f64, b: f64) -> f64 {
    let p = raw_mul(a, b);
    if p == 0.0 {
        if a == 0.0 || b == 0.0 {
            return 0.0;
        }
        return if (a < 0.0) != (b < 0.0) { 0.0 } else { 0.0f64.next_up() };
    }
    if p.is_infinite() {
        if a.is_finite() && b.is_finite() && p < 0.0 {
            return f64::MIN;
        }
        return p;
    }
    if p.abs() < TINY {
        return p.next_up();
    }
    if a.mul_add(b, -p) > 0.0 {
        p.next_up()
    } else {
        p
    }
}

/// Quotient with `x / inf = 0` and `inf / x = inf` (sign-adjusted). The divisor
/// must be nonzero.
#[inline]
fn raw_div(a: f64, b: f64) -> f64 {
    if a == 0.0 || b.is_infinite() && a.is_finite() {
        0.0
    } else if a.is_infinite() && b.is_infinite() {
        // only reachable through limits of unbounded intervals
        if (a < 0.0) != (b < 0.0) {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    } else {
        a / b
    }
}

#[inline]
pub fn div_down(a: f64, b: f64) -> f64 {
    debug_assert!(b != 0.0);
    let q = raw_div(a, b);
    if q == 0.0 {
        if a == 0.0 || b.is_infinite() {
            // x / inf is a limit; keep a safe side when x != 0
            if a != 0.0 && (a < 0.0) != (b < 0.0) {
                return (-0.0f64).next_down();
            }
            return 0.0;
        }
        return if (a < 0.0) != (b < 0.0) { (-0.0f64).next_down() } else { 0.0 };
    }
    if q.is_infinite() {
        if a.is_finite() && b.is_finite() && q > 0.0 {
            return f64::MAX;
        }
        return q;
    }
    if q.abs() < TINY || b.abs() < TINY {
        return q.next_down();
    }
    // a = q*b + r exactly; the true quotient is q + r/b
    let r = (-q).mul_add(b, a);
    let below = if b > 0.0 { r < 0.0 } else { r > 0.0 };
    if below {
        q.next_down()
    } else {
        q
    }
}

#[inline]
pub fn div_up(a: f64, b: f64) -> f64 {
    debug_assert!(b != 0.0);
    let q = raw_div(a, b);
    if q == 0.0 {
        if a == 0.0 || b.is_infinite() {
            if a != 0.0 && (a < 0.0) == (b < 0.0) {
                return 0.0f64.next_up();
            }
            return 0.0;
        }
        return if (a < 0.0) != (b < 0.0) { 0.0 } else { 0.0f64.next_up() };
    }
    if q.is_infinite() {
        if a.is_finite() && b.is_finite() && q < 0.0 {
            return f64::MIN;
        }
        return q;
    }
    if q.abs() < TINY || b.abs() < TINY {
        return q.next_up();
    }
    let r = (-q).mul_add(b, a);
    let above = if b > 0.0 { r > 0.0 } else { r < 0.0 };
    if above {
        q.next_up()
    } else {
        q
    }
}

#[inline]
pub fn sqrt_down(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return f64::MAX;
    }
    let s = x.sqrt();
    if x < TINY {
        return s.next_down().max(0.0);
    }
    if (-s).mul_add(s, x) < 0.0 {
        s.next_down()
    } else {
        s
    }
}

#[inline]
pub fn sqrt_up(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    let s = x.sqrt();
    if x < TINY {
        return s.next_up();
    }
    if (-s).mul_add(s, x) > 0.0 {
        s.next_up()
    } else {
        s
    }
}

/// `x^n` for `x >= 0`, rounded down.
pub fn pow_down(x: f64, n: u32) -> f64 {
    debug_assert!(x >= 0.0);
    let mut acc = 1.0;
    for _ in 0..n {
        acc = mul_down(acc, x);
    }
    acc.max(0.0)
}

/// `x^n` for `x >= 0`, rounded up.
pub fn pow_up(x: f64, n: u32) -> f64 {
    debug_assert!(x >= 0.0);
    let mut acc = 1.0;
    for _ in 0..n {
        acc = mul_up(acc, x);
    }
    acc
}

/// Lower bound on the real n-th root of `x >= 0`: the result `r` satisfies
/// `r^n <= x`.
pub fn root_down(x: f64, n: u32) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if n == 1 {
        return x;
    }
    if n == 2 {
        return sqrt_down(x);
    }
    if x.is_infinite() {
        return f64::MAX;
    }
    let fits = |r: f64| pow_up(r, n) <= x;
    let mut r = x.powf(1.0 / n as f64);
    for _ in 0..4 {
        r = r.next_up();
    }
    for _ in 0..WALK {
        if r <= 0.0 || fits(r) {
            return r.max(0.0);
        }
        r = r.next_down();
    }
    // deep in the subnormals, or a poor libm estimate
    let first_too_big = first_true(0, f64::MAX.to_bits(), |r| !fits(r));
    f64::from_bits(first_too_big - 1)
}

/// Upper bound on the real n-th root of `x >= 0`: `r^n >= x`.
pub fn root_up(x: f64, n: u32) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if n == 1 {
        return x;
    }
    if n == 2 {
        return sqrt_up(x);
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    let covers = |r: f64| pow_down(r, n) >= x;
    let mut r = x.powf(1.0 / n as f64);
    for _ in 0..4 {
        r = r.next_down();
    }
    r = r.max(0.0);
    for _ in 0..WALK {
        if covers(r) {
            return r;
        }
        r = r.next_up();
    }
    f64::from_bits(first_true(0, f64::MAX.to_bits(), covers))
}

// ulp steps tried around the libm estimate before bisecting
const WALK: usize = 16;

/// Least bit pattern in `(lo, hi]` of a non-negative float where the monotone
/// `p` holds, given `!p(lo)` and `p(hi)`.
fn first_true(mut lo: u64, mut hi: u64, p: impl Fn(f64) -> bool) -> u64 {
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if p(f64::from_bits(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Widen downwards by `ulps` units in the last place. Used around libm
/// results, which are accurate to within one ulp but not correctly rounded.
#[inline]
pub fn pad_down(x: f64, ulps: u32) -> f64 {
    let mut r = x;
    for _ in 0..ulps {
        r = r.next_down();
    }
    r
}

#[inline]
pub fn pad_up(x: f64, ulps: u32) -> f64 {
    let mut r = x;
    for _ in 0..ulps {
        r = r.next_up();
    }
    r
}
