//! Lie coefficients `(1/k!) L_f^k X(x₀)` as Taylor coefficients of
//! flow-composed expressions:
//!
//! * scalar fields: `h(x(t))`,
//! * vector fields: `J(t)⁻¹ g(x(t))`,
//! * covector fields: `ω(x(t)) J(t)`,
//!
//! where `x(t)` solves `ẋ = f(x)` from `x₀` and `J(t) = ∂x(t)/∂x₀`. The
//! `*_zrec` / `*_jrec` functions compute the vector and covector cases a
//! second way, from the coefficients `A_i` of `f'(x(t))`, and exist as
//! cross-checks.

use crate::array::{CoeffArray, TaylorArray};
use crate::error::{Error, Result};
use crate::field::SeriesField;
use crate::real::Real;
use crate::series::TaylorScalar;
use crate::tape::{eval_series_jacobian, integrate, CodeList};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Scalar,
    Vector,
    Covector,
}

impl FieldKind {
    pub fn name(self) -> &'static str {
        match self {
            FieldKind::Scalar => "scalar",
            FieldKind::Vector => "vector",
            FieldKind::Covector => "covector",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LieResult<T = f64> {
    pub kind: FieldKind,
    pub order: usize,
    /// Coefficient array `k` is `(1/k!) L_f^k X(x₀)`.
    pub coeffs: TaylorArray<T>,
}

impl<T: Real> LieResult<T> {
    pub fn shape(&self) -> &[usize] {
        self.coeffs.shape()
    }

    pub fn get_tc(&self, k: usize) -> CoeffArray<T> {
        self.coeffs.get_tc(k)
    }

    /// `L_f^k X(x₀) = k! · get_tc(k)`, with `k!` formed in floating point.
    pub fn get_derivative(&self, k: usize) -> CoeffArray<T> {
        self.get_tc(k).scale(factorial(k))
    }
}

pub fn factorial<T: Real>(k: usize) -> T {
    (1..=k).fold(T::one(), |acc, i| acc * T::from_usize(i))
}

fn state_at<T: Real>(x0: &[T]) -> Result<TaylorArray<T>> {
    TaylorArray::constant(vec![x0.len()], x0)
}

/// Evaluates `X` on the series state and checks the shape against the
/// evaluation at the point `x₀`.
fn eval_checked<T: Real, X: SeriesField<T>>(x: &X, xs: &TaylorArray<T>, x0: &[T]) -> Result<TaylorArray<T>> {
    let at_point = x.eval_series(&state_at(x0)?)?;
    let along = x.eval_series(xs)?;
    if at_point.shape() != along.shape() {
        return Err(Error::ShapeMismatch(format!(
            "field shape changes with its input: {:?} vs {:?}",
            at_point.shape(),
            along.shape()
        )));
    }
    Ok(along.extend_to(xs.order()))
}

/// `g` as an `n × m` matrix (a single vector field becomes one column).
fn as_columns<T: Real>(g: &TaylorArray<T>, n: usize) -> Result<TaylorArray<T>> {
    match *g.shape() {
        [r] if r == n => g.reshape(vec![n, 1]),
        [r, _] if r == n => Ok(g.clone()),
        _ => Err(Error::ShapeMismatch(format!(
            "vector field must have {n} rows, got shape {:?}",
            g.shape()
        ))),
    }
}

/// `ω` as an `m × n` matrix (a single covector field becomes one row).
fn as_rows<T: Real>(w: &TaylorArray<T>, n: usize) -> Result<TaylorArray<T>> {
    match *w.shape() {
        [c] if c == n => w.reshape(vec![1, n]),
        [_, c] if c == n => Ok(w.clone()),
        _ => Err(Error::ShapeMismatch(format!(
            "covector field must have {n} columns, got shape {:?}",
            w.shape()
        ))),
    }
}

pub fn lie_scalar<T: Real, X: SeriesField<T>>(f: &CodeList, h: &X, x0: &[T], p: usize) -> Result<LieResult<T>> {
    let xs = integrate(f, x0, p, false)?.x()?;
    Ok(LieResult {
        kind: FieldKind::Scalar,
        order: p,
        coeffs: eval_checked(h, &xs, x0)?,
    })
}

pub fn lie_vector<T: Real, X: SeriesField<T>>(f: &CodeList, g: &X, x0: &[T], p: usize) -> Result<LieResult<T>> {
    let flow = integrate(f, x0, p, true)?;
    let j = flow.jacobian().expect("requested")?;
    let gx = eval_checked(g, &flow.x()?, x0)?;
    let cols = as_columns(&gx, x0.len())?;
    let coeffs = j.solve(&cols).map_err(|e| match e {
        Error::SingularConstantTerm { .. } => unreachable!("J has constant term I"),
        e => e,
    })?;
    Ok(LieResult {
        kind: FieldKind::Vector,
        order: p,
        coeffs: coeffs.reshape(gx.shape().to_vec())?,
    })
}

pub fn lie_covector<T: Real, X: SeriesField<T>>(f: &CodeList, w: &X, x0: &[T], p: usize) -> Result<LieResult<T>> {
    let flow = integrate(f, x0, p, true)?;
    let j = flow.jacobian().expect("requested")?;
    let wx = eval_checked(w, &flow.x()?, x0)?;
    let rows = as_rows(&wx, x0.len())?;
    Ok(LieResult {
        kind: FieldKind::Covector,
        order: p,
        coeffs: rows.matmul(&j)?.reshape(wx.shape().to_vec())?,
    })
}

/// Row-major `c += a b` for `a: m×r`, `b: r×n`.
fn gemm_acc<T: Real>(c: &mut [T], a: &[T], b: &[T], m: usize, r: usize, n: usize) {
    for i in 0..m {
        for j in 0..n {
            let mut s = T::zero();
            for l in 0..r {
                s += a[i * r + l] * b[l * n + j];
            }
            c[i * n + j] += s;
        }
    }
}

/// Solution series and the coefficients `A_0..A_p` of `f'(x(t))`.
fn flow_and_jacobian_series<T: Real>(f: &CodeList, x0: &[T], p: usize) -> Result<(TaylorArray<T>, Vec<Vec<T>>)> {
    let xs = integrate(f, x0, p, false)?.x()?;
    let elems: Vec<TaylorScalar<T>> = xs.elements().to_vec();
    let (_, a) = eval_series_jacobian(f, &elems)?;
    let a = (0..=p).map(|k| a.get_tc(k).into_data()).collect();
    Ok((xs, a))
}

fn identity<T: Real>(n: usize) -> Vec<T> {
    let mut m = vec![T::zero(); n * n];
    for i in 0..n {
        m[i * n + i] = T::one();
    }
    m
}

fn series_from_matrices<T: Real>(shape: Vec<usize>, mats: Vec<Vec<T>>) -> Result<TaylorArray<T>> {
    let tcs = mats
        .into_iter()
        .map(|d| CoeffArray::new(shape.clone(), d))
        .collect::<Result<Vec<_>>>()?;
    TaylorArray::from_coeff_arrays(&tcs)
}

/// `Z(t) = J(t)⁻¹` from `Z₀ = I`, `Z_{k+1} = -(1/(k+1)) Σ_{i≤k} Z_i A_{k-i}`.
pub fn inverse_jacobian_from_recurrence<T: Real>(f: &CodeList, x0: &[T], p: usize) -> Result<TaylorArray<T>> {
    let n = x0.len();
    let (_, a) = flow_and_jacobian_series(f, x0, p)?;
    series_from_matrices(vec![n, n], z_recurrence(&a, n, p))
}

fn z_recurrence<T: Real>(a: &[Vec<T>], n: usize, p: usize) -> Vec<Vec<T>> {
    let mut z = vec![identity(n)];
    for k in 0..p {
        let mut s = vec![T::zero(); n * n];
        for i in 0..=k {
            gemm_acc(&mut s, &z[i], &a[k - i], n, n, n);
        }
        let d = -T::from_usize(k + 1);
        z.push(s.into_iter().map(|x| x / d).collect());
    }
    z
}

/// `J(t)` from `J₀ = I`, `J_{k+1} = (1/(k+1)) Σ_{i≤k} A_{k-i} J_i`.
pub fn jacobian_from_recurrence<T: Real>(f: &CodeList, x0: &[T], p: usize) -> Result<TaylorArray<T>> {
    let n = x0.len();
    let (_, a) = flow_and_jacobian_series(f, x0, p)?;
    series_from_matrices(vec![n, n], j_recurrence(&a, n, p))
}

fn j_recurrence<T: Real>(a: &[Vec<T>], n: usize, p: usize) -> Vec<Vec<T>> {
    let mut j = vec![identity(n)];
    for k in 0..p {
        let mut s = vec![T::zero(); n * n];
        for i in 0..=k {
            gemm_acc(&mut s, &a[k - i], &j[i], n, n, n);
        }
        let d = T::from_usize(k + 1);
        j.push(s.into_iter().map(|x| x / d).collect());
    }
    j
}

/// Vector-field Lie coefficients `Σ_{i≤k} Z_i g_{k-i}` via the `Z` recurrence.
pub fn lie_vector_zrec<T: Real, X: SeriesField<T>>(f: &CodeList, g: &X, x0: &[T], p: usize) -> Result<LieResult<T>> {
    let n = x0.len();
    let (xs, a) = flow_and_jacobian_series(f, x0, p)?;
    let gx = eval_checked(g, &xs, x0)?;
    let cols = as_columns(&gx, n)?;
    let m = cols.shape()[1];
    let z = z_recurrence(&a, n, p);
    let gk: Vec<Vec<T>> = (0..=p).map(|k| cols.get_tc(k).into_data()).collect();
    let out = (0..=p)
        .map(|k| {
            let mut s = vec![T::zero(); n * m];
            for i in 0..=k {
                gemm_acc(&mut s, &z[i], &gk[k - i], n, n, m);
            }
            s
        })
        .collect();
    Ok(LieResult {
        kind: FieldKind::Vector,
        order: p,
        coeffs: series_from_matrices(vec![n, m], out)?.reshape(gx.shape().to_vec())?,
    })
}

/// Covector-field Lie coefficients `Σ_{i≤k} ω_i J_{k-i}` via the `J` recurrence.
pub fn lie_covector_jrec<T: Real, X: SeriesField<T>>(f: &CodeList, w: &X, x0: &[T], p: usize) -> Result<LieResult<T>> {
    let n = x0.len();
    let (xs, a) = flow_and_jacobian_series(f, x0, p)?;
    let wx = eval_checked(w, &xs, x0)?;
    let rows = as_rows(&wx, n)?;
    let m = rows.shape()[0];
    let j = j_recurrence(&a, n, p);
    let wk: Vec<Vec<T>> = (0..=p).map(|k| rows.get_tc(k).into_data()).collect();
    let out = (0..=p)
        .map(|k| {
            let mut s = vec![T::zero(); m * n];
            for i in 0..=k {
                gemm_acc(&mut s, &wk[i], &j[k - i], m, n, n);
            }
            s
        })
        .collect();
    Ok(LieResult {
        kind: FieldKind::Covector,
        order: p,
        coeffs: series_from_matrices(vec![m, n], out)?.reshape(wx.shape().to_vec())?,
    })
}
