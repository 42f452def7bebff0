//! Order-`k` coefficient kernels for the four basic arithmetic operations and
//! the sub-ODE `⊙` step.
//!
//! Every kernel computes exactly one Taylor coefficient, reading only
//! coefficients `0..=k` of its operands and `0..k` of its own output, so the
//! tape interpreter can run them one order at a time. Gradients are carried
//! alongside: a series with gradient width `n` stores row `k` of its gradient
//! (`∂u_k/∂x₀`) at `g[k*n..(k+1)*n]`. With `n == 0` the gradient loops vanish.

use crate::error::{Error, Result};
use crate::real::Real;

/// Read-only view of an operand: a stored series or a constant (order-0)
/// series whose higher coefficients and gradients are zero.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Arg<'a, T> {
    Series { v: &'a [T], g: &'a [T] },
    Const(T),
}

impl<'a, T: Real> Arg<'a, T> {
    #[inline]
    pub fn series(v: &'a [T], g: &'a [T]) -> Self {
        Arg::Series { v, g }
    }

    #[inline]
    pub fn coeff(&self, i: usize) -> T {
        match *self {
            Arg::Series { v, .. } => v[i],
            Arg::Const(c) => {
                if i == 0 {
                    c
                } else {
                    T::zero()
                }
            }
        }
    }
}

/// Mutable destination: coefficient slice and gradient slice of one series.
pub(crate) struct Out<'a, T> {
    pub v: &'a mut [T],
    pub g: &'a mut [T],
}

impl<'a, T: Real> Out<'a, T> {
    pub fn new(v: &'a mut [T], g: &'a mut [T]) -> Self {
        Out { v, g }
    }
}

#[inline]
fn grad_row<T>(g: &[T], i: usize, n: usize) -> &[T] {
    &g[i * n..(i + 1) * n]
}

pub(crate) fn add<T: Real>(a: Arg<T>, b: Arg<T>, out: &mut Out<T>, k: usize, n: usize) {
    out.v[k] = a.coeff(k) + b.coeff(k);
    let og = &mut out.g[k * n..(k + 1) * n];
    match (a, b) {
        (Arg::Series { g: ga, .. }, Arg::Series { g: gb, .. }) => {
            for ((o, x), y) in og.iter_mut().zip(grad_row(ga, k, n)).zip(grad_row(gb, k, n)) {
                *o = *x + *y;
            }
        }
        (Arg::Series { g, .. }, Arg::Const(_)) | (Arg::Const(_), Arg::Series { g, .. }) => {
            og.copy_from_slice(grad_row(g, k, n));
        }
        (Arg::Const(_), Arg::Const(_)) => og.fill(T::zero()),
    }
}

pub(crate) fn sub<T: Real>(a: Arg<T>, b: Arg<T>, out: &mut Out<T>, k: usize, n: usize) {
    out.v[k] = a.coeff(k) - b.coeff(k);
    let og = &mut out.g[k * n..(k + 1) * n];
    match (a, b) {
        (Arg::Series { g: ga, .. }, Arg::Series { g: gb, .. }) => {
            for ((o, x), y) in og.iter_mut().zip(grad_row(ga, k, n)).zip(grad_row(gb, k, n)) {
                *o = *x - *y;
            }
        }
        (Arg::Series { g, .. }, Arg::Const(_)) => og.copy_from_slice(grad_row(g, k, n)),
        (Arg::Const(_), Arg::Series { g, .. }) => {
            for (o, x) in og.iter_mut().zip(grad_row(g, k, n)) {
                *o = -*x;
            }
        }
        (Arg::Const(_), Arg::Const(_)) => og.fill(T::zero()),
    }
}

pub(crate) fn neg<T: Real>(a: Arg<T>, out: &mut Out<T>, k: usize, n: usize) {
    sub(Arg::Const(T::zero()), a, out, k, n)
}

/// `Σ_{i=0}^{k} a_i b_{k-i}`.
#[inline]
fn cauchy<T: Real>(a: &[T], b: &[T], k: usize) -> T {
    let (a, b) = (&a[..=k], &b[..=k]);
    let mut s = T::zero();
    for i in 0..=k {
        s += a[i] * b[k - i];
    }
    s
}

/// Coefficient `k` of a product, without gradients.
#[inline]
pub(crate) fn mul_value<T: Real>(a: Arg<T>, b: Arg<T>, k: usize) -> T {
    match (a, b) {
        (Arg::Series { v: va, .. }, Arg::Series { v: vb, .. }) => cauchy(va, vb, k),
        (Arg::Series { v, .. }, Arg::Const(c)) | (Arg::Const(c), Arg::Series { v, .. }) => v[k] * c,
        (Arg::Const(a), Arg::Const(b)) => {
            if k == 0 {
                a * b
            } else {
                T::zero()
            }
        }
    }
}

/// Cauchy product: `w_k = Σ_{i=0}^{k} u_i v_{k-i}`.
pub(crate) fn mul<T: Real>(a: Arg<T>, b: Arg<T>, out: &mut Out<T>, k: usize, n: usize) {
    out.v[k] = mul_value(a, b, k);
    let og = &mut out.g[k * n..(k + 1) * n];
    match (a, b) {
        (Arg::Series { v: va, g: ga }, Arg::Series { v: vb, g: gb }) => {
            if n > 0 {
                og.fill(T::zero());
                for i in 0..=k {
                    let bi = vb[k - i];
                    let ai = va[i];
                    let gai = grad_row(ga, i, n);
                    let gbi = grad_row(gb, k - i, n);
                    for j in 0..n {
                        og[j] += gai[j] * bi + ai * gbi[j];
                    }
                }
            }
        }
        (Arg::Series { g, .. }, Arg::Const(c)) | (Arg::Const(c), Arg::Series { g, .. }) => {
            for (o, x) in og.iter_mut().zip(grad_row(g, k, n)) {
                *o = *x * c;
            }
        }
        (Arg::Const(_), Arg::Const(_)) => og.fill(T::zero()),
    }
}

/// Coefficient `k` of a quotient given its lower coefficients `w[..k]`.
#[inline]
pub(crate) fn div_value<T: Real>(a: Arg<T>, b: Arg<T>, w: &[T], k: usize) -> Result<T> {
    let b0 = b.coeff(0);
    if b0 == T::zero() {
        return Err(Error::DivisionByZeroConstantTerm);
    }
    Ok(match b {
        Arg::Const(c) => a.coeff(k) / c,
        Arg::Series { v: vb, .. } => {
            let (vb, w) = (&vb[..=k], &w[..k]);
            let mut s = a.coeff(k);
            for i in 0..k {
                s -= vb[k - i] * w[i];
            }
            s / b0
        }
    })
}

/// Quotient recurrence `w_k = (u_k - Σ_{i<k} v_{k-i} w_i) / v_0`.
///
/// Reads `out.v[..k]` and `out.g[..k*n]`, which must already hold the lower
/// coefficients of the quotient.
pub(crate) fn div<T: Real>(a: Arg<T>, b: Arg<T>, out: &mut Out<T>, k: usize, n: usize) -> Result<()> {
    let wk = div_value(a, b, out.v, k)?;
    out.v[k] = wk;
    if n == 0 {
        return Ok(());
    }
    let b0 = b.coeff(0);
    match b {
        Arg::Const(c) => {
            let og = &mut out.g[k * n..(k + 1) * n];
            match a {
                Arg::Series { g, .. } => {
                    for (o, x) in og.iter_mut().zip(grad_row(g, k, n)) {
                        *o = *x / c;
                    }
                }
                Arg::Const(_) => og.fill(T::zero()),
            }
        }
        Arg::Series { v: vb, g: gb } => {
            let (lower, upper) = out.g.split_at_mut(k * n);
            let og = &mut upper[..n];
            match a {
                Arg::Series { g: ga, .. } => og.copy_from_slice(grad_row(ga, k, n)),
                Arg::Const(_) => og.fill(T::zero()),
            }
            for i in 0..k {
                let bki = vb[k - i];
                let wi = out.v[i];
                let gbki = grad_row(gb, k - i, n);
                let gwi = grad_row(lower, i, n);
                for j in 0..n {
                    og[j] -= gbki[j] * wi + bki * gwi[j];
                }
            }
            let gb0 = grad_row(gb, 0, n);
            for j in 0..n {
                og[j] = (og[j] - wk * gb0[j]) / b0;
            }
        }
    }
    Ok(())
}

/// `(1/k) Σ_{i=1}^{k} i u_i φ_{k-i}` for `k >= 1`.
#[inline]
pub(crate) fn odot_value<T: Real>(u: Arg<T>, phi: Arg<T>, k: usize) -> T {
    debug_assert!(k >= 1);
    match (u, phi) {
        (Arg::Const(_), _) => T::zero(),
        (Arg::Series { v: vu, .. }, Arg::Const(c)) => vu[k] * c,
        (Arg::Series { v: vu, .. }, Arg::Series { v: vp, .. }) => {
            let (vu, vp) = (&vu[..=k], &vp[..k]);
            let mut s = T::zero();
            let mut fi = T::zero();
            for i in 1..=k {
                fi += T::one();
                s += fi * vu[i] * vp[k - i];
            }
            s * (T::one() / T::from_usize(k))
        }
    }
}

/// The `⊙` step for `k >= 1`: `v_k = (1/k) Σ_{i=1}^{k} i u_i φ_{k-i}`.
///
/// Writes the coefficient to `v` and its gradient row to `g` (length `n`);
/// `phi` is only read through order `k - 1`.
pub(crate) fn odot<T: Real>(u: Arg<T>, phi: Arg<T>, k: usize, n: usize, v: &mut T, g: &mut [T]) {
    *v = odot_value(u, phi, k);
    if n == 0 {
        return;
    }
    let inv_k = T::one() / T::from_usize(k);
    g.fill(T::zero());
    match (u, phi) {
        (Arg::Const(_), _) => {}
        (Arg::Series { g: gu, .. }, Arg::Const(c)) => {
            // Σ i u_i c δ_{k-i,0} / k = u_k c
            for (o, x) in g.iter_mut().zip(grad_row(gu, k, n)) {
                *o = *x * c;
            }
        }
        (Arg::Series { v: vu, g: gu }, Arg::Series { v: vp, g: gp }) => {
            for i in 1..=k {
                let fi = T::from_usize(i);
                let ui = fi * vu[i];
                let pki = fi * vp[k - i];
                let gui = grad_row(gu, i, n);
                let gpi = grad_row(gp, k - i, n);
                for j in 0..n {
                    g[j] += gui[j] * pki + ui * gpi[j];
                }
            }
            for x in g.iter_mut() {
                *x *= inv_k;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
        let p = a.len() - 1;
        let mut v = vec![0.0; p + 1];
        let mut g: Vec<f64> = vec![];
        for k in 0..=p {
            mul(Arg::series(a, &[]), Arg::series(b, &[]), &mut Out::new(&mut v, &mut g), k, 0);
        }
        v
    }

    #[test]
    fn product_truncates() {
        assert_eq!(run_mul(&[1.0, 1.0, 0.0], &[1.0, 1.0, 0.0]), vec![1.0, 2.0, 1.0]);
        assert_eq!(run_mul(&[1.0, 1.0], &[1.0, 1.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn gradient_of_product_follows_leibniz() {
        // u = x (1 + t), v = y (1 + t) with gradients wrt (x, y) at x=2, y=3
        let (x, y) = (2.0, 3.0);
        let u = [x, x];
        let gu = [1.0, 0.0, 1.0, 0.0];
        let v = [y, y];
        let gv = [0.0, 1.0, 0.0, 1.0];
        let mut w = vec![0.0; 2];
        let mut gw = vec![0.0; 4];
        for k in 0..2 {
            mul(Arg::series(&u, &gu), Arg::series(&v, &gv), &mut Out::new(&mut w, &mut gw), k, 2);
        }
        // w = xy (1 + 2t): ∇w0 = (y, x), ∇w1 = (2y, 2x)
        assert_eq!(w, vec![6.0, 12.0]);
        assert_eq!(gw, vec![3.0, 2.0, 6.0, 4.0]);
    }

    #[test]
    fn quotient_gradient_matches_closed_form() {
        // w = x / y with constant series, gradient (1/y, -x/y^2)
        let u = [2.0];
        let gu = [1.0, 0.0];
        let v = [4.0];
        let gv = [0.0, 1.0];
        let mut w = vec![0.0];
        let mut gw = vec![0.0; 2];
        div(Arg::series(&u, &gu), Arg::series(&v, &gv), &mut Out::new(&mut w, &mut gw), 0, 2).unwrap();
        assert_eq!(w, vec![0.5]);
        assert_eq!(gw, vec![0.25, -0.125]);
    }

    #[test]
    fn zero_divisor_is_rejected() {
        let mut w = vec![0.0];
        let mut g: Vec<f64> = vec![];
        let r = div(Arg::Const(1.0), Arg::series(&[0.0], &[]), &mut Out::new(&mut w, &mut g), 0, 0);
        assert_eq!(r, Err(Error::DivisionByZeroConstantTerm));
    }
}
