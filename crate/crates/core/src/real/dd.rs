//! Double-double arithmetic: an unevaluated sum `hi + lo` of two binary64
//! values with `|lo| <= ulp(hi)/2`, giving roughly 106 bits of significand.
//!
//! Elementary functions are computed by argument reduction plus Taylor
//! series, or by Newton refinement of the binary64 result. They target a
//! relative accuracy of about 1e-30 on the argument ranges exercised here,
//! which is far below binary64 roundoff and all that the reference path
//! needs.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use super::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

const PI: DoubleDouble = DoubleDouble::from_parts(std::f64::consts::PI, 1.2246467991473532e-16);
const FRAC_PI_2: DoubleDouble = DoubleDouble::from_parts(std::f64::consts::FRAC_PI_2, 6.123233995736766e-17);
const LN_2: DoubleDouble = DoubleDouble::from_parts(std::f64::consts::LN_2, 2.3190468138462996e-17);

// below this magnitude a series term no longer affects a double-double sum
const TINY: f64 = 1e-36;

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const fn from_parts(hi: f64, lo: f64) -> Self {
        DoubleDouble { hi, lo }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    #[inline]
    fn normalized(hi: f64, lo: f64) -> Self {
        if !hi.is_finite() {
            return DoubleDouble { hi, lo: 0.0 };
        }
        let (hi, lo) = quick_two_sum(hi, lo);
        DoubleDouble { hi, lo }
    }

    fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        Self::normalized(p, e + self.lo * b)
    }

    /// Multiplies by `2^k` exactly (barring overflow/underflow).
    fn ldexp(self, k: i32) -> Self {
        let mut x = self;
        let mut k = k;
        while k != 0 {
            let step = k.clamp(-1000, 1000);
            let s = 2f64.powi(step);
            x = DoubleDouble {
                hi: x.hi * s,
                lo: x.lo * s,
            };
            k -= step;
        }
        x
    }

    fn sqr(self) -> Self {
        self * self
    }

    fn is_zero(self) -> bool {
        self.hi == 0.0
    }

    fn signum_f64(self) -> f64 {
        if self.hi < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    /// `exp(r) - 1` for `|r| <= ~0.5` via halving, a short Taylor series and
    /// the doubling identity `e^{2s} - 1 = e (e + 2)` with `e = e^s - 1`.
    fn expm1_small(r: Self) -> Self {
        const HALVINGS: i32 = 10;
        let s = r.ldexp(-HALVINGS);
        let mut term = s;
        let mut sum = s;
        let mut k = 1.0;
        loop {
            k += 1.0;
            term = term * s / DoubleDouble::from(k);
            sum += term;
            if term.hi.abs() < TINY * sum.hi.abs().max(TINY) {
                break;
            }
        }
        let two = DoubleDouble::from(2.0);
        for _ in 0..HALVINGS {
            sum = sum * (sum + two);
        }
        sum
    }

    /// `(sin r, cos r)` for `|r| <= pi/4`.
    fn sin_cos_reduced(r: Self) -> (Self, Self) {
        let r2 = r.sqr();
        let mut s = r;
        let mut term = r;
        let mut c = DoubleDouble::from(1.0);
        let mut cterm = DoubleDouble::from(1.0);
        let mut k = 0.0;
        loop {
            // term: r^(2i+1)/(2i+1)!, cterm: r^(2i)/(2i)!
            cterm = -(cterm * r2) / DoubleDouble::from((k + 1.0) * (k + 2.0));
            term = -(term * r2) / DoubleDouble::from((k + 2.0) * (k + 3.0));
            c += cterm;
            s += term;
            k += 2.0;
            if cterm.hi.abs() < TINY && term.hi.abs() < TINY {
                break;
            }
        }
        (s, c)
    }

    fn sin_cos(self) -> (Self, Self) {
        if !self.hi.is_finite() {
            return (DoubleDouble::from(f64::NAN), DoubleDouble::from(f64::NAN));
        }
        let j = (self.hi / FRAC_PI_2.hi).round();
        let r = self - FRAC_PI_2.mul_f64(j);
        let (s, c) = Self::sin_cos_reduced(r);
        match (j as i64).rem_euclid(4) {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        }
    }
}

impl From<f64> for DoubleDouble {
    fn from(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }
}

impl fmt::Display for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lo == 0.0 {
            write!(f, "{:e}", self.hi)
        } else {
            write!(f, "{:e}{:+e}", self.hi, self.lo)
        }
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            o => o,
        }
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        DoubleDouble {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, b: Self) -> Self {
        let (s1, s2) = two_sum(self.hi, b.hi);
        if !s1.is_finite() {
            return DoubleDouble { hi: s1, lo: 0.0 };
        }
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        Self::normalized(s1, s2 + t2)
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, b: Self) -> Self {
        let (p, e) = two_prod(self.hi, b.hi);
        Self::normalized(p, e + (self.hi * b.lo + self.lo * b.hi))
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        if !q1.is_finite() {
            return DoubleDouble { hi: q1, lo: 0.0 };
        }
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (q1, q2) = quick_two_sum(q1, q2);
        DoubleDouble { hi: q1, lo: q2 } + DoubleDouble::from(q3)
    }
}

impl AddAssign for DoubleDouble {
    fn add_assign(&mut self, b: Self) {
        *self = *self + b;
    }
}
impl SubAssign for DoubleDouble {
    fn sub_assign(&mut self, b: Self) {
        *self = *self - b;
    }
}
impl MulAssign for DoubleDouble {
    fn mul_assign(&mut self, b: Self) {
        *self = *self * b;
    }
}
impl DivAssign for DoubleDouble {
    fn div_assign(&mut self, b: Self) {
        *self = *self / b;
    }
}

impl Sum for DoubleDouble {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(DoubleDouble::default(), |a, b| a + b)
    }
}

impl Real for DoubleDouble {
    const NAME: &'static str = "double-double";

    fn from_f64(x: f64) -> Self {
        x.into()
    }
    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
    fn epsilon() -> Self {
        // 2^-104
        DoubleDouble::from(4.930380657631324e-32)
    }
    fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }
    fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return DoubleDouble::from(self.hi.sqrt());
        }
        let r = DoubleDouble::from(self.hi.sqrt());
        r + (self - r.sqr()) / r.mul_f64(2.0)
    }

    fn exp(self) -> Self {
        if self.hi > 709.8 {
            return DoubleDouble::from(f64::INFINITY);
        }
        if self.hi < -745.2 {
            return DoubleDouble::from(0.0);
        }
        let k = (self.hi / LN_2.hi).round();
        let r = self - LN_2.mul_f64(k);
        (Self::expm1_small(r) + DoubleDouble::from(1.0)).ldexp(k as i32)
    }

    fn expm1(self) -> Self {
        if self.hi.abs() < 0.5 {
            Self::expm1_small(self)
        } else {
            self.exp() - DoubleDouble::from(1.0)
        }
    }

    fn ln(self) -> Self {
        if self.hi <= 0.0 || !self.hi.is_finite() {
            return DoubleDouble::from(self.hi.ln());
        }
        let t = self - DoubleDouble::from(1.0);
        if t.hi.abs() < 0.5 {
            return t.ln_1p();
        }
        let mut y = DoubleDouble::from(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - DoubleDouble::from(1.0);
        }
        y
    }

    fn ln_1p(self) -> Self {
        if self.hi.abs() >= 0.5 {
            return (DoubleDouble::from(1.0) + self).ln();
        }
        let mut y = DoubleDouble::from(self.hi.ln_1p());
        for _ in 0..2 {
            let e = y.expm1();
            y -= (e - self) / (e + DoubleDouble::from(1.0));
        }
        y
    }

    fn powf(self, c: Self) -> Self {
        if self.is_zero() {
            return DoubleDouble::from(0f64.powf(c.hi));
        }
        (c * self.ln()).exp()
    }

    fn nthroot(self, n: u32) -> Self {
        if self.is_zero() {
            return self;
        }
        let nn = DoubleDouble::from(n as f64);
        let mut r = (self.abs().ln() / nn).exp();
        if self.hi < 0.0 {
            r = -r;
        }
        // one Newton step: r <- r - (r^n - x) / (n r^(n-1))
        let mut rn1 = DoubleDouble::from(1.0);
        for _ in 1..n {
            rn1 *= r;
        }
        r - (rn1 * r - self) / (nn * rn1)
    }

    fn sin(self) -> Self {
        self.sin_cos().0
    }

    fn cos(self) -> Self {
        self.sin_cos().1
    }

    fn tan(self) -> Self {
        let (s, c) = self.sin_cos();
        s / c
    }

    fn asin(self) -> Self {
        let one = DoubleDouble::from(1.0);
        self.atan2(((one - self) * (one + self)).sqrt())
    }

    fn acos(self) -> Self {
        let one = DoubleDouble::from(1.0);
        ((one - self) * (one + self)).sqrt().atan2(self)
    }

    fn atan(self) -> Self {
        if !self.hi.is_finite() {
            return DoubleDouble::from(self.hi.atan());
        }
        let mut y = DoubleDouble::from(self.hi.atan());
        for _ in 0..2 {
            let (s, c) = y.sin_cos();
            y += (self * c - s) * c;
        }
        y
    }

    fn atan2(self, x: Self) -> Self {
        let y = self;
        if x.is_zero() && y.is_zero() {
            return DoubleDouble::from(y.hi.atan2(x.hi));
        }
        if x.hi.abs() >= y.hi.abs() {
            let a = (y / x).atan();
            if x.hi > 0.0 {
                a
            } else if y.hi >= 0.0 {
                a + PI
            } else {
                a - PI
            }
        } else {
            FRAC_PI_2.mul_f64(y.signum_f64()) - (x / y).atan()
        }
    }

    fn sinh(self) -> Self {
        if self.hi.abs() < 0.5 {
            let e = self.expm1();
            (e + e / (e + DoubleDouble::from(1.0))).mul_f64(0.5)
        } else {
            (self.exp() - (-self).exp()).mul_f64(0.5)
        }
    }

    fn cosh(self) -> Self {
        (self.exp() + (-self).exp()).mul_f64(0.5)
    }

    fn tanh(self) -> Self {
        if self.hi.abs() > 40.0 {
            return DoubleDouble::from(self.signum_f64());
        }
        let e = self.mul_f64(2.0).expm1();
        e / (e + DoubleDouble::from(2.0))
    }

    fn asinh(self) -> Self {
        let one = DoubleDouble::from(1.0);
        let a = self.abs();
        let a2 = a.sqr();
        let r = (a + a2 / (one + (one + a2).sqrt())).ln_1p();
        if self.hi < 0.0 {
            -r
        } else {
            r
        }
    }

    fn acosh(self) -> Self {
        let one = DoubleDouble::from(1.0);
        let t = self - one;
        (t + (t * (self + one)).sqrt()).ln_1p()
    }

    fn atanh(self) -> Self {
        let one = DoubleDouble::from(1.0);
        (self.mul_f64(2.0) / (one - self)).ln_1p().mul_f64(0.5)
    }
}
