//! Truncated univariate Taylor series.
//!
//! A [`TaylorScalar`] of order `p` stores `u_0, …, u_p` with
//! `u_k = u^(k)(t_0) / k!`. Binary operations require equal orders, or one
//! operand of order 0 which then acts as a constant series. Terms of order
//! above `p` are discarded.
//!
//! Elementary functions are all computed through the sub-ODE recurrence in
//! [`subode`]; only the four basic arithmetic operations have dedicated
//! recurrences.

pub(crate) mod kernels;
pub mod subode;

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::real::Real;

use kernels::{Arg, Out};
pub use subode::{Bao, ElemFn, PhiArg, PhiInstr, SubOde};
use subode::{Atan2State, SubOdeState};

#[derive(Clone, PartialEq)]
pub struct TaylorScalar<T = f64> {
    coeffs: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for TaylorScalar<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TaylorScalar{:?}", self.coeffs)
    }
}

impl<T: Real> fmt::Display for TaylorScalar<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, c) in self.coeffs.iter().enumerate() {
            match k {
                0 => write!(f, "{c}")?,
                1 => write!(f, " + {c}·t")?,
                _ => write!(f, " + {c}·t^{k}")?,
            }
        }
        Ok(())
    }
}

pub(crate) fn check_finite<T: Real>(v: &[T]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteCoefficient)
    }
}

/// Order of the result of a binary operation, per the order-mixing rule.
pub(crate) fn common_order(a: usize, b: usize) -> Result<usize> {
    if a == b || b == 0 {
        Ok(a)
    } else if a == 0 {
        Ok(b)
    } else {
        Err(Error::OrderMismatch { left: a, right: b })
    }
}

impl<T: Real> TaylorScalar<T> {
    /// Series with the given coefficients; rejects empty or non-finite input.
    pub fn new(coeffs: Vec<T>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::ShapeMismatch("a series needs at least one coefficient".into()));
        }
        check_finite(&coeffs)?;
        Ok(TaylorScalar { coeffs })
    }

    /// Order-0 series `c`.
    ///
    /// # Panics
    /// If `c` is not finite.
    pub fn constant(c: T) -> Self {
        assert!(c.is_finite(), "series coefficients must be finite");
        TaylorScalar { coeffs: vec![c] }
    }

    /// The independent variable `t0 + t` truncated at `order`.
    pub fn variable(t0: T, order: usize) -> Self {
        let mut coeffs = vec![T::zero(); order + 1];
        coeffs[0] = t0;
        if order > 0 {
            coeffs[1] = T::one();
        }
        TaylorScalar { coeffs }
    }

    pub fn zeros(order: usize) -> Self {
        TaylorScalar {
            coeffs: vec![T::zero(); order + 1],
        }
    }

    /// `c` as a series of the given order (zero higher coefficients).
    pub fn constant_of_order(c: T, order: usize) -> Self {
        let mut s = Self::zeros(order);
        s.coeffs[0] = c;
        s
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    #[inline]
    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Coefficient `k`; zero beyond the stored order.
    #[inline]
    pub fn coeff(&self, k: usize) -> T {
        self.coeffs.get(k).copied().unwrap_or_else(T::zero)
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    /// Drops coefficients above order `q` (a no-op when `q >= order`).
    pub fn truncate(&self, q: usize) -> Self {
        TaylorScalar {
            coeffs: self.coeffs[..=q.min(self.order())].to_vec(),
        }
    }

    /// Same series at a higher order, padded with zero coefficients.
    pub fn extend_to(&self, order: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        if coeffs.len() < order + 1 {
            coeffs.resize(order + 1, T::zero());
        }
        TaylorScalar { coeffs }
    }

    pub fn map_coeffs(&self, f: impl Fn(T) -> T) -> Self {
        TaylorScalar {
            coeffs: self.coeffs.iter().map(|&c| f(c)).collect(),
        }
    }

    fn arg(&self) -> Arg<'_, T> {
        if self.order() == 0 {
            Arg::Const(self.coeffs[0])
        } else {
            Arg::series(&self.coeffs, &[])
        }
    }

    fn binary(
        &self,
        rhs: &Self,
        kernel: impl Fn(Arg<T>, Arg<T>, &mut Out<T>, usize) -> Result<()>,
    ) -> Result<Self> {
        let p = common_order(self.order(), rhs.order())?;
        let mut v = vec![T::zero(); p + 1];
        let mut g: [T; 0] = [];
        let (a, b) = if p == 0 {
            (Arg::series(&self.coeffs[..], &[]), Arg::series(&rhs.coeffs[..], &[]))
        } else {
            (self.arg(), rhs.arg())
        };
        for k in 0..=p {
            kernel(a, b, &mut Out::new(&mut v, &mut g), k)?;
        }
        check_finite(&v)?;
        Ok(TaylorScalar { coeffs: v })
    }

    pub fn try_add(&self, rhs: &Self) -> Result<Self> {
        self.binary(rhs, |a, b, o, k| {
            kernels::add(a, b, o, k, 0);
            Ok(())
        })
    }

    pub fn try_sub(&self, rhs: &Self) -> Result<Self> {
        self.binary(rhs, |a, b, o, k| {
            kernels::sub(a, b, o, k, 0);
            Ok(())
        })
    }

    pub fn try_mul(&self, rhs: &Self) -> Result<Self> {
        self.binary(rhs, |a, b, o, k| {
            kernels::mul(a, b, o, k, 0);
            Ok(())
        })
    }

    /// Quotient series; fails when the divisor's constant term is exactly 0.
    pub fn try_div(&self, rhs: &Self) -> Result<Self> {
        self.binary(rhs, |a, b, o, k| kernels::div(a, b, o, k, 0))
    }

    pub fn scale(&self, c: T) -> Self {
        self.map_coeffs(|x| x * c)
    }

    /// Applies a sub-ODE and returns every component of its result.
    pub fn sub_ode_apply(&self, ode: &SubOde<T>) -> Result<Vec<Self>> {
        let state = self.run_sub_ode(ode)?;
        Ok((0..ode.width)
            .map(|c| TaylorScalar {
                coeffs: state.component(c).0.to_vec(),
            })
            .collect())
    }

    fn run_sub_ode(&self, ode: &SubOde<T>) -> Result<SubOdeState<T>> {
        let p = self.order();
        let mut state = SubOdeState::new(ode, p, 0);
        let u = Arg::series(&self.coeffs, &[]);
        for k in 0..=p {
            state.step(ode, u, k)?;
        }
        for c in 0..ode.width {
            check_finite(state.component(c).0)?;
        }
        Ok(state)
    }

    /// Applies a catalog function through its sub-ODE.
    pub fn apply(&self, f: ElemFn) -> Result<Self> {
        if self.order() == 0 {
            let u0 = self.coeffs[0];
            let domain = || Error::Domain {
                function: f.name(),
                value: u0.to_f64(),
            };
            let (v, out) = subode::seed(f, u0).ok_or_else(domain)?;
            if v.iter().any(|x| !x.is_finite()) {
                return Err(domain());
            }
            return Ok(TaylorScalar::constant(v[out]));
        }
        let ode = SubOde::for_fn(f);
        let state = self.run_sub_ode(&ode)?;
        Ok(TaylorScalar {
            coeffs: state.component(ode.output).0.to_vec(),
        })
    }

    pub fn exp(&self) -> Result<Self> {
        self.apply(ElemFn::Exp)
    }
    pub fn expm1(&self) -> Result<Self> {
        self.apply(ElemFn::Expm1)
    }
    pub fn ln(&self) -> Result<Self> {
        self.apply(ElemFn::Ln)
    }
    pub fn ln_1p(&self) -> Result<Self> {
        self.apply(ElemFn::Ln1p)
    }
    pub fn sqrt(&self) -> Result<Self> {
        self.apply(ElemFn::Sqrt)
    }
    pub fn nthroot(&self, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain {
                function: "nthroot",
                value: 0.0,
            });
        }
        self.apply(ElemFn::NthRoot(n))
    }
    pub fn sin(&self) -> Result<Self> {
        self.apply(ElemFn::Sin)
    }
    pub fn cos(&self) -> Result<Self> {
        self.apply(ElemFn::Cos)
    }
    /// `(sin u, cos u)` from one application of the paired sub-ODE.
    pub fn sin_cos(&self) -> Result<(Self, Self)> {
        let mut parts = self.sub_ode_apply(&SubOde::for_fn(ElemFn::Sin))?;
        let sin = parts.pop().expect("two components");
        let cos = parts.pop().expect("two components");
        Ok((sin, cos))
    }
    pub fn tan(&self) -> Result<Self> {
        self.apply(ElemFn::Tan)
    }
    pub fn asin(&self) -> Result<Self> {
        self.apply(ElemFn::Asin)
    }
    pub fn acos(&self) -> Result<Self> {
        self.apply(ElemFn::Acos)
    }
    pub fn atan(&self) -> Result<Self> {
        self.apply(ElemFn::Atan)
    }
    pub fn sinh(&self) -> Result<Self> {
        self.apply(ElemFn::Sinh)
    }
    pub fn cosh(&self) -> Result<Self> {
        self.apply(ElemFn::Cosh)
    }
    pub fn tanh(&self) -> Result<Self> {
        self.apply(ElemFn::Tanh)
    }
    pub fn asinh(&self) -> Result<Self> {
        self.apply(ElemFn::Asinh)
    }
    pub fn acosh(&self) -> Result<Self> {
        self.apply(ElemFn::Acosh)
    }
    pub fn atanh(&self) -> Result<Self> {
        self.apply(ElemFn::Atanh)
    }

    /// Integer power by binary powering of products; negative exponents
    /// take the reciprocal and need a nonzero constant term.
    pub fn powi(&self, e: i32) -> Result<Self> {
        let mut base = self.clone();
        let mut acc = TaylorScalar::constant_of_order(T::one(), self.order());
        let mut m = e.unsigned_abs();
        while m > 0 {
            if m & 1 == 1 {
                acc = acc.try_mul(&base)?;
            }
            m >>= 1;
            if m > 0 {
                base = base.try_mul(&base)?;
            }
        }
        if e < 0 {
            if self.coeffs[0] == T::zero() {
                return Err(Error::Domain {
                    function: "pow",
                    value: 0.0,
                });
            }
            acc = TaylorScalar::constant(T::one()).try_div(&acc)?;
        }
        Ok(acc)
    }

    /// `u^c`: integer `c` by products, otherwise the `φ = c v / u` sub-ODE
    /// (requires `u₀ > 0`).
    pub fn powf(&self, c: f64) -> Result<Self> {
        match as_integer_exponent(c) {
            Some(e) => self.powi(e),
            None => self.apply(ElemFn::Pow(c)),
        }
    }

    /// Two-argument arctangent `atan2(self, x)`.
    pub fn atan2(&self, x: &Self) -> Result<Self> {
        let p = common_order(self.order(), x.order())?;
        let mut state = Atan2State::new(p, 0);
        let (y, x) = (self.extend_to(p), x.extend_to(p));
        for k in 0..=p {
            state.step(Arg::series(&y.coeffs, &[]), Arg::series(&x.coeffs, &[]), k)?;
        }
        let coeffs = state.result().0.to_vec();
        check_finite(&coeffs)?;
        Ok(TaylorScalar { coeffs })
    }
}

/// `Some(e)` when `c` is an integer representable as `i32`.
pub(crate) fn as_integer_exponent(c: f64) -> Option<i32> {
    (c.fract() == 0.0 && c.abs() <= i32::MAX as f64).then_some(c as i32)
}

macro_rules! binop {
    ($tr:ident, $method:ident, $checked:ident) => {
        impl<T: Real> $tr for TaylorScalar<T> {
            type Output = TaylorScalar<T>;
            fn $method(self, rhs: Self) -> Self {
                (&self).$checked(&rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl<'a, T: Real> $tr<&'a TaylorScalar<T>> for &'a TaylorScalar<T> {
            type Output = TaylorScalar<T>;
            fn $method(self, rhs: Self) -> TaylorScalar<T> {
                self.$checked(rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl<'a, T: Real> $tr<&'a TaylorScalar<T>> for TaylorScalar<T> {
            type Output = TaylorScalar<T>;
            fn $method(self, rhs: &'a TaylorScalar<T>) -> TaylorScalar<T> {
                (&self).$checked(rhs).unwrap_or_else(|e| panic!("{e}"))
            }
        }
        impl<T: Real> $tr<T> for TaylorScalar<T> {
            type Output = TaylorScalar<T>;
            fn $method(self, rhs: T) -> TaylorScalar<T> {
                (&self).$checked(&TaylorScalar::constant(rhs)).unwrap_or_else(|e| panic!("{e}"))
            }
        }
    };
}

// The operators panic where the `try_*` methods return an error.
binop!(Add, add, try_add);
binop!(Sub, sub, try_sub);
binop!(Mul, mul, try_mul);
binop!(Div, div, try_div);

impl<T: Real> Neg for TaylorScalar<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map_coeffs(|x| -x)
    }
}

impl<T: Real> Neg for &TaylorScalar<T> {
    type Output = TaylorScalar<T>;
    fn neg(self) -> TaylorScalar<T> {
        self.map_coeffs(|x| -x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(c: &[f64]) -> TaylorScalar {
        TaylorScalar::new(c.to_vec()).unwrap()
    }

    fn close(a: &TaylorScalar, b: &[f64], tol: f64) {
        assert_eq!(a.order() + 1, b.len(), "{a:?} vs {b:?}");
        for (x, y) in a.coeffs().iter().zip(b) {
            assert!((x - y).abs() <= tol * (1.0 + y.abs()), "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn addition_examples() {
        assert_eq!(ts(&[1.0, 2.0]) + ts(&[3.0, 4.0]), ts(&[4.0, 6.0]));
        assert_eq!(ts(&[1.0, 1.0]) + ts(&[5.0]), ts(&[6.0, 1.0]));
        let u = ts(&[1.5, -2.0, 0.25]);
        assert_eq!(&u - &u, TaylorScalar::zeros(2));
    }

    #[test]
    fn multiplication_examples() {
        assert_eq!(ts(&[1.0, 1.0, 0.0]) * ts(&[1.0, 1.0, 0.0]), ts(&[1.0, 2.0, 1.0]));
        assert_eq!(ts(&[1.0, 1.0]) * ts(&[1.0, 1.0]), ts(&[1.0, 2.0]));
        let u = ts(&[0.3, -1.0, 2.0]);
        assert_eq!(&u * &ts(&[1.0]), u);
    }

    #[test]
    fn order_mismatch_is_an_error() {
        let r = ts(&[1.0, 2.0]).try_add(&ts(&[1.0, 2.0, 3.0]));
        assert_eq!(r, Err(Error::OrderMismatch { left: 1, right: 2 }));
        assert!(ts(&[1.0, 2.0]).try_mul(&ts(&[1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn non_finite_construction_is_rejected() {
        assert_eq!(TaylorScalar::new(vec![1.0, f64::NAN]), Err(Error::NonFiniteCoefficient));
        assert_eq!(TaylorScalar::new(vec![f64::INFINITY]), Err(Error::NonFiniteCoefficient));
    }

    #[test]
    fn division_examples() {
        close(&ts(&[1.0, 0.0, 0.0, 0.0]).try_div(&ts(&[1.0, -1.0, 0.0, 0.0])).unwrap(), &[1.0; 4], 0.0);
        let u = ts(&[2.0, 1.0, -3.0]);
        assert_eq!(u.try_div(&u).unwrap(), ts(&[1.0, 0.0, 0.0]));
        assert_eq!(
            ts(&[1.0, 2.0]).try_div(&ts(&[0.0, 1.0])),
            Err(Error::DivisionByZeroConstantTerm)
        );
        // residual oracle: v · (u / v) = u
        let (u, v) = (ts(&[1.0, 1.0, 0.0]), ts(&[1.0, 1.0, 0.5]));
        let w = u.try_div(&v).unwrap();
        close(&v.try_mul(&w).unwrap(), u.coeffs(), 1e-15);
    }

    #[test]
    fn exp_of_variable() {
        let e = TaylorScalar::variable(0.0, 4).exp().unwrap();
        close(&e, &[1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0], 1e-16);
    }

    #[test]
    fn pow_example_from_sub_ode() {
        // c = 2 through the φ = c v / u sub-ODE, not the integer path
        let u = ts(&[1.0, 1.0, 0.0]);
        let v = u.apply(ElemFn::Pow(2.0)).unwrap();
        close(&v, &[1.0, 2.0, 1.0], 1e-15);
        assert_eq!(u.powf(2.0).unwrap(), ts(&[1.0, 2.0, 1.0]));
    }

    #[test]
    fn sin_cos_pair() {
        let (s, c) = TaylorScalar::variable(0.0, 3).sin_cos().unwrap();
        close(&c, &[1.0, 0.0, -0.5, 0.0], 1e-16);
        close(&s, &[0.0, 1.0, 0.0, -1.0 / 6.0], 1e-16);
    }

    #[test]
    fn catalog_examples() {
        let u = ts(&[0.7, -0.4, 1.1, 0.3]);
        close(&u.exp().unwrap().ln().unwrap(), u.coeffs(), 1e-15);
        assert_eq!(ts(&[4.0, 4.0, 1.0]).sqrt().unwrap(), ts(&[2.0, 1.0, 0.0]));
        // atan(t) = t - t^3/3
        let t = TaylorScalar::variable(0.0, 2);
        let a = t.atan2(&ts(&[1.0, 0.0, 0.0])).unwrap();
        close(&a, &[0.0, 1.0, 0.0], 0.0);
        let direct = t.try_div(&ts(&[1.0, 0.0, 0.0])).unwrap().atan().unwrap();
        close(&a, direct.coeffs(), 1e-16);
    }

    #[test]
    fn domain_errors() {
        let neg = ts(&[-1.0, 1.0]);
        assert!(matches!(neg.ln(), Err(Error::Domain { function: "log", .. })));
        assert!(matches!(neg.sqrt(), Err(Error::Domain { .. })));
        assert!(matches!(ts(&[2.0, 1.0]).asin(), Err(Error::Domain { .. })));
        assert!(matches!(ts(&[0.5, 1.0]).acosh(), Err(Error::Domain { .. })));
        assert!(matches!(ts(&[1.0, 1.0]).atanh(), Err(Error::Domain { .. })));
        assert!(matches!(ts(&[0.0, 1.0]).powf(0.5), Err(Error::Domain { .. })));
        assert!(matches!(ts(&[0.0, 1.0]).powi(-2), Err(Error::Domain { .. })));
        // the seed at the boundary exists, but the series does not
        assert!(matches!(ts(&[0.0, 1.0]).sqrt(), Err(Error::Domain { .. })));
        assert_eq!(ts(&[0.0]).sqrt().unwrap(), ts(&[0.0]));
        let z = ts(&[0.0, 1.0]);
        assert!(matches!(z.atan2(&z), Err(Error::Domain { function: "atan2", .. })));
    }

    #[test]
    fn integer_powers_at_zero_constant_term() {
        let t = TaylorScalar::variable(0.0, 4);
        assert_eq!(t.powf(3.0).unwrap(), ts(&[0.0, 0.0, 0.0, 1.0, 0.0]));
        assert_eq!(t.powi(0).unwrap(), ts(&[1.0, 0.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn inverse_functions_roundtrip() {
        let u = ts(&[0.3, 0.5, -0.2, 0.1, 0.05]);
        let tol = 1e-14;
        close(&u.sin().unwrap().asin().unwrap(), u.coeffs(), tol);
        close(&u.cos().unwrap().acos().unwrap(), u.coeffs(), tol);
        close(&u.tan().unwrap().atan().unwrap(), u.coeffs(), tol);
        close(&u.sinh().unwrap().asinh().unwrap(), u.coeffs(), tol);
        close(&u.tanh().unwrap().atanh().unwrap(), u.coeffs(), tol);
        close(&u.cosh().unwrap().acosh().unwrap(), u.coeffs(), tol);
        close(&u.expm1().unwrap().ln_1p().unwrap(), u.coeffs(), tol);
        let w = ts(&[2.0, 0.5, -0.2, 0.1, 0.05]);
        close(&w.nthroot(3).unwrap().powi(3).unwrap(), w.coeffs(), tol);
        close(&w.sqrt().unwrap().powi(2).unwrap(), w.coeffs(), tol);
        let m = ts(&[-8.0, 1.0, 0.0, 0.0, 0.0]);
        close(&m.nthroot(3).unwrap().powi(3).unwrap(), m.coeffs(), tol);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        const EPS: f64 = f64::EPSILON;

        fn series(p: usize) -> impl Strategy<Value = TaylorScalar> {
            proptest::collection::vec(-2.0f64..2.0, p + 1).prop_map(|c| TaylorScalar::new(c).unwrap())
        }

        fn triple() -> impl Strategy<Value = (TaylorScalar, TaylorScalar, TaylorScalar)> {
            (0usize..16).prop_flat_map(|p| (series(p), series(p), series(p)))
        }

        fn abs(u: &TaylorScalar) -> TaylorScalar {
            u.map_coeffs(f64::abs)
        }

        fn assert_close(a: &TaylorScalar, b: &TaylorScalar, scale: &TaylorScalar, ulps: f64) {
            for k in 0..=a.order() {
                let d = (a.coeff(k) - b.coeff(k)).abs();
                assert!(
                    d <= ulps * EPS * scale.coeff(k) + f64::MIN_POSITIVE,
                    "k = {k}: {} vs {} (scale {})",
                    a.coeff(k),
                    b.coeff(k),
                    scale.coeff(k)
                );
            }
        }

        proptest! {
            #[test]
            fn ring_laws((a, b, c) in triple()) {
                assert_close(&(&a * &b), &(&b * &a), &(&abs(&a) * &abs(&b)), 4.0);
                let left = &(&a * &b) * &c;
                let right = &a * &(&b * &c);
                assert_close(&left, &right, &(&(&abs(&a) * &abs(&b)) * &abs(&c)), 8.0);
                let dist = &a * &(&b + &c);
                let expanded = &(&a * &b) + &(&a * &c);
                assert_close(&dist, &expanded, &(&abs(&a) * &(&abs(&b) + &abs(&c))), 8.0);
            }

            #[test]
            fn division_undoes_multiplication((u, mut v, _) in triple(), v0 in 0.5f64..2.0, neg in any::<bool>()) {
                let mut c = v.coeffs().to_vec();
                c[0] = if neg { -v0 } else { v0 };
                v = TaylorScalar::new(c).unwrap();
                let w = u.try_div(&v).unwrap();
                let back = &w * &v;
                assert_close(&back, &u, &(&(&abs(&v) * &abs(&w)) + &abs(&u)), 8.0);
            }

            #[test]
            fn pythagorean_identity(u in (0usize..20).prop_flat_map(series)) {
                let (s, c) = u.sin_cos().unwrap();
                let one = &(&s * &s) + &(&c * &c);
                let scale = &(&abs(&s) * &abs(&s)) + &(&abs(&c) * &abs(&c));
                assert_close(&one, &TaylorScalar::constant_of_order(1.0, u.order()), &scale, 8.0);
            }

            #[test]
            fn exp_satisfies_its_differential_equation(u in (1usize..20).prop_flat_map(series)) {
                let e = u.exp().unwrap();
                for k in 1..=u.order() {
                    let terms: Vec<f64> = (1..=k).map(|i| i as f64 * u.coeff(i) * e.coeff(k - i)).collect();
                    let rhs: f64 = terms.iter().sum::<f64>() / k as f64;
                    let scale: f64 = terms.iter().map(|t| t.abs()).sum::<f64>() / k as f64;
                    prop_assert!((e.coeff(k) - rhs).abs() <= 8.0 * EPS * scale, "k = {}", k);
                }
            }

            #[test]
            fn positive_integer_powers_match_repeated_products(u in (0usize..12).prop_flat_map(series), e in 0i32..7, zero_start in any::<bool>()) {
                let mut c = u.coeffs().to_vec();
                if zero_start {
                    c[0] = 0.0;
                }
                let u = TaylorScalar::new(c).unwrap();
                let mut want = TaylorScalar::constant_of_order(1.0, u.order());
                let mut scale = want.clone();
                for _ in 0..e {
                    want = &want * &u;
                    scale = &scale * &abs(&u);
                }
                let got = u.powf(f64::from(e)).unwrap();
                assert_close(&got, &want, &scale, 4.0 * f64::from(e.max(1)));
            }

            #[test]
            fn fractional_power_agrees_with_roots(u in (0usize..12).prop_flat_map(series), u0 in 0.5f64..3.0) {
                let mut c = u.coeffs().to_vec();
                c[0] = u0;
                let u = TaylorScalar::new(c).unwrap();
                let r = u.powf(1.5).unwrap();
                let s = u.sqrt().unwrap();
                let alt = &s * &u;
                let scale = &(&abs(&s) * &abs(&u)) + &abs(&r);
                for k in 0..=u.order() {
                    let d = (r.coeff(k) - alt.coeff(k)).abs();
                    prop_assert!(d <= 64.0 * EPS * scale.coeff(k) * (k + 1) as f64, "k = {}: {} vs {}", k, r.coeff(k), alt.coeff(k));
                }
            }
        }
    }
}
