//! The arithmetic vocabulary shared by plain reals, Taylor series and tape
//! tracers, so a model can be written once and evaluated numerically,
//! in series arithmetic, or recorded onto a code list.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::real::{DoubleDouble, Real};
use crate::series::{as_integer_exponent, ElemFn, TaylorScalar};

/// Values supporting the basic arithmetic operations and the elementary
/// function catalog.
///
/// `+`, `-`, `*` and negation are infallible operators; division and the
/// elementary functions report domain errors.
pub trait Elementary:
    Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    /// The constant `c` in the same representation as `self`.
    fn constant_like(&self, c: f64) -> Self;
    fn try_div(&self, rhs: &Self) -> Result<Self>;
    fn apply(&self, f: ElemFn) -> Result<Self>;
    fn powi(&self, e: i32) -> Result<Self>;
    /// `atan2(self, x)`.
    fn atan2(&self, x: &Self) -> Result<Self>;

    fn scale(&self, c: f64) -> Self {
        self.clone() * self.constant_like(c)
    }
    fn recip(&self) -> Result<Self> {
        self.constant_like(1.0).try_div(self)
    }
    fn powf(&self, c: f64) -> Result<Self> {
        match as_integer_exponent(c) {
            Some(e) => self.powi(e),
            None => self.apply(ElemFn::Pow(c)),
        }
    }
    fn exp(&self) -> Result<Self> {
        self.apply(ElemFn::Exp)
    }
    fn expm1(&self) -> Result<Self> {
        self.apply(ElemFn::Expm1)
    }
    fn ln(&self) -> Result<Self> {
        self.apply(ElemFn::Ln)
    }
    fn ln_1p(&self) -> Result<Self> {
        self.apply(ElemFn::Ln1p)
    }
    fn sqrt(&self) -> Result<Self> {
        self.apply(ElemFn::Sqrt)
    }
    fn nthroot(&self, n: u32) -> Result<Self> {
        self.apply(ElemFn::NthRoot(n))
    }
    fn sin(&self) -> Result<Self> {
        self.apply(ElemFn::Sin)
    }
    fn cos(&self) -> Result<Self> {
        self.apply(ElemFn::Cos)
    }
    fn tan(&self) -> Result<Self> {
        self.apply(ElemFn::Tan)
    }
    fn asin(&self) -> Result<Self> {
        self.apply(ElemFn::Asin)
    }
    fn acos(&self) -> Result<Self> {
        self.apply(ElemFn::Acos)
    }
    fn atan(&self) -> Result<Self> {
        self.apply(ElemFn::Atan)
    }
    fn sinh(&self) -> Result<Self> {
        self.apply(ElemFn::Sinh)
    }
    fn cosh(&self) -> Result<Self> {
        self.apply(ElemFn::Cosh)
    }
    fn tanh(&self) -> Result<Self> {
        self.apply(ElemFn::Tanh)
    }
    fn asinh(&self) -> Result<Self> {
        self.apply(ElemFn::Asinh)
    }
    fn acosh(&self) -> Result<Self> {
        self.apply(ElemFn::Acosh)
    }
    fn atanh(&self) -> Result<Self> {
        self.apply(ElemFn::Atanh)
    }
}

/// Binary powering, the same multiplication order the series path uses.
fn real_powi<T: Real>(x: T, e: i32) -> Result<T> {
    let mut base = x;
    let mut acc = T::one();
    let mut m = e.unsigned_abs();
    while m > 0 {
        if m & 1 == 1 {
            acc *= base;
        }
        m >>= 1;
        if m > 0 {
            base = base * base;
        }
    }
    if e < 0 {
        if x == T::zero() {
            return Err(Error::Domain {
                function: "pow",
                value: 0.0,
            });
        }
        acc = T::one() / acc;
    }
    Ok(acc)
}

macro_rules! real_elementary {
    ($t:ty) => {
        impl Elementary for $t {
            fn constant_like(&self, c: f64) -> Self {
                <$t as Real>::from_f64(c)
            }
            fn try_div(&self, rhs: &Self) -> Result<Self> {
                if *rhs == <$t as Real>::zero() {
                    return Err(Error::DivisionByZeroConstantTerm);
                }
                Ok(*self / *rhs)
            }
            fn apply(&self, f: ElemFn) -> Result<Self> {
                f.eval(*self).filter(|v| Real::is_finite(*v)).ok_or(Error::Domain {
                    function: f.name(),
                    value: Real::to_f64(*self),
                })
            }
            fn powi(&self, e: i32) -> Result<Self> {
                real_powi(*self, e)
            }
            fn atan2(&self, x: &Self) -> Result<Self> {
                Ok(Real::atan2(*self, *x))
            }
        }
    };
}

real_elementary!(f64);
real_elementary!(DoubleDouble);

impl<T: Real> Elementary for TaylorScalar<T> {
    fn constant_like(&self, c: f64) -> Self {
        TaylorScalar::constant(T::from_f64(c))
    }
    fn try_div(&self, rhs: &Self) -> Result<Self> {
        TaylorScalar::try_div(self, rhs)
    }
    fn apply(&self, f: ElemFn) -> Result<Self> {
        TaylorScalar::apply(self, f)
    }
    fn powi(&self, e: i32) -> Result<Self> {
        TaylorScalar::powi(self, e)
    }
    fn atan2(&self, x: &Self) -> Result<Self> {
        TaylorScalar::atan2(self, x)
    }
    fn scale(&self, c: f64) -> Self {
        TaylorScalar::scale(self, T::from_f64(c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model<S: Elementary>(x: &S) -> Result<S> {
        // x sin(x) / (2 + cos x)
        let den = x.cos()? + x.constant_like(2.0);
        (x.clone() * x.sin()?).try_div(&den)
    }

    #[test]
    fn series_constant_term_equals_real_evaluation() {
        let x0 = 0.37;
        let direct = model(&x0).unwrap();
        let series = model(&TaylorScalar::variable(x0, 6)).unwrap();
        assert_eq!(series.coeff(0), direct);
    }

    #[test]
    fn real_domain_errors() {
        assert!(matches!(Elementary::ln(&-1.0f64), Err(Error::Domain { function: "log", .. })));
        assert_eq!((1.0f64).try_div(&0.0), Err(Error::DivisionByZeroConstantTerm));
        assert_eq!(Elementary::powi(&2.0f64, -2), Ok(0.25));
    }
}
