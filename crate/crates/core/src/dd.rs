//! Double-double arithmetic.
//!
//! A [`Dd`] carries an unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`,
//! giving roughly 106 bits of significand. [`Scaled`] adds a separate binary
//! exponent so long chains of ratio recurrences neither overflow nor
//! underflow before the final conversion.

use std::cmp::Ordering;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    pub const PI: Dd = Dd {
        hi: std::f64::consts::PI,
        lo: 1.224_646_799_147_353_2e-16,
    };
    /// sqrt(pi)
    pub const SQRT_PI: Dd = Dd {
        hi: 1.772_453_850_905_516,
        lo: -7.666_586_499_825_8e-17,
    };

    #[inline]
    pub const fn new(hi: f64, lo: f64) -> Self {
        Dd { hi, lo }
    }

    #[inline]
    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn abs(self) -> Self {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.hi == 0.0
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    #[inline]
    pub fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn div_f64(self, b: f64) -> Self {
        let q1 = self.hi / b;
        let (p, e) = two_prod(q1, b);
        let (s, f) = two_sum(self.hi, -p);
        let f = f - e + self.lo;
        let q2 = (s + f) / b;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }
    }

    /// Multiplies by `2^k` exactly (barring under/overflow).
    #[inline]
    pub fn ldexp(self, k: i32) -> Self {
        let f = pow2(k);
        Dd {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let x = self.hi.sqrt();
        let (p, e) = two_prod(x, x);
        let r = (self - Dd::new(p, e)).hi / (2.0 * x);
        let (hi, lo) = quick_two_sum(x, r);
        Dd { hi, lo }
    }

    /// Integer power by repeated squaring.
    pub fn powi(self, n: u32) -> Self {
        let mut base = self;
        let mut acc = Dd::ONE;
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            k >>= 1;
        }
        acc
    }
}

/// `2^k` for any `k` in the double exponent range, computed without `powi`
/// rounding.
#[inline]
fn pow2(k: i32) -> f64 {
    if (-1022..=1023).contains(&k) {
        f64::from_bits(((k + 1023) as u64) << 52)
    } else if k > 1023 {
        f64::INFINITY
    } else if k >= -1074 {
        f64::from_bits(1u64 << (k + 1074))
    } else {
        0.0
    }
}

/// Unbiased binary exponent of a finite nonzero double (`x = m * 2^e`, `m` in `[1,2)`).
#[inline]
fn exponent(x: f64) -> i32 {
    let bits = x.to_bits();
    let raw = ((bits >> 52) & 0x7ff) as i32;
    if raw == 0 {
        // subnormal
        let m = bits & ((1u64 << 52) - 1);
        -1022 - (m.leading_zeros() as i32 - 12) - 1
    } else {
        raw - 1023
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd::from_f64(x)
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let s2 = s2 + t1;
        let (s1, s2) = quick_two_sum(s1, s2);
        let s2 = s2 + t2;
        let (hi, lo) = quick_two_sum(s1, s2);
        Dd { hi, lo }
    }
}

impl AddAssign for Dd {
    #[inline]
    fn add_assign(&mut self, b: Dd) {
        *self = *self + b;
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from_f64(q3)
    }
}

impl PartialOrd for Dd {
    fn partial_cmp(&self, other: &Dd) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

/// A double-double mantissa with an independent power-of-two exponent:
/// value = `mant * 2^exp`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scaled {
    mant: Dd,
    exp: i64,
}

const RESCALE_BOUND: i32 = 400;

impl Scaled {
    pub const ZERO: Scaled = Scaled {
        mant: Dd::ZERO,
        exp: 0,
    };

    pub fn new(x: Dd) -> Self {
        Scaled { mant: x, exp: 0 }.normalized()
    }

    pub fn from_f64(x: f64) -> Self {
        Self::new(Dd::from_f64(x))
    }

    #[inline]
    fn normalized(mut self) -> Self {
        if self.mant.hi == 0.0 || !self.mant.hi.is_finite() {
            if self.mant.hi == 0.0 {
                self.exp = 0;
            }
            return self;
        }
        let e = exponent(self.mant.hi);
        if e.abs() > RESCALE_BOUND {
            self.mant = self.mant.ldexp(-e);
            self.exp += e as i64;
        }
        self
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.mant.hi == 0.0
    }

    #[inline]
    pub fn mul_f64(self, b: f64) -> Self {
        Scaled {
            mant: self.mant.mul_f64(b),
            exp: self.exp,
        }
        .normalized()
    }

    #[inline]
    pub fn div_f64(self, b: f64) -> Self {
        Scaled {
            mant: self.mant.div_f64(b),
            exp: self.exp,
        }
        .normalized()
    }

    #[inline]
    pub fn mul_dd(self, b: Dd) -> Self {
        Scaled {
            mant: self.mant * b,
            exp: self.exp,
        }
        .normalized()
    }

    #[inline]
    pub fn mul(self, b: Scaled) -> Self {
        Scaled {
            mant: self.mant * b.mant,
            exp: self.exp + b.exp,
        }
        .normalized()
    }

    pub fn add(self, b: Scaled) -> Self {
        if b.is_zero() {
            return self;
        }
        if self.is_zero() {
            return b;
        }
        let e = self.exp.max(b.exp);
        let shift = |x: Scaled| {
            let d = x.exp - e;
            if d < -2000 {
                Dd::ZERO
            } else {
                x.mant.ldexp(d as i32)
            }
        };
        Scaled {
            mant: shift(self) + shift(b),
            exp: e,
        }
        .normalized()
    }

    #[inline]
    pub fn neg(self) -> Self {
        Scaled {
            mant: -self.mant,
            exp: self.exp,
        }
    }

    /// Natural logarithm of the magnitude; `-inf` for zero.
    pub fn ln_abs(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        self.mant.hi.abs().ln() + self.exp as f64 * std::f64::consts::LN_2
    }

    /// Collapses to an ordinary double-double; saturates to `±inf` or `0`.
    pub fn to_dd(self) -> Dd {
        if self.is_zero() {
            return Dd::ZERO;
        }
        let e = self.exp.clamp(-3000, 3000) as i32;
        if e > 0 && exponent(self.mant.hi) + e > 1023 {
            return Dd::from_f64(f64::INFINITY.copysign(self.mant.hi));
        }
        // split so intermediate factors stay representable
        let half = e / 2;
        self.mant.ldexp(half).ldexp(e - half)
    }

    pub fn to_f64(self) -> f64 {
        self.to_dd().to_f64()
    }
}
