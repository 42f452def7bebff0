//! N-dimensional arrays of Taylor series sharing one order.
//!
//! Elements are stored row-major. Elementwise operations broadcast with the
//! usual right-aligned rule (extents must match or be 1). [`TaylorArray::matmul`]
//! is the matrix Cauchy product and [`TaylorArray::solve`] the power-series
//! linear solve `A \ B`, which factorizes the constant term `A₀` once.

use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::series::{check_finite, common_order, ElemFn, TaylorScalar};

/// One Taylor coefficient of every element of a [`TaylorArray`].
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffArray<T = f64> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> CoeffArray<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values do not fill shape {shape:?}",
                data.len()
            )));
        }
        Ok(CoeffArray { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> Result<T> {
        Ok(self.data[linear_index(&self.shape, index)?])
    }

    pub fn norm_inf(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn scale(&self, c: T) -> Self {
        CoeffArray {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| x * c).collect(),
        }
    }

    /// Largest absolute elementwise difference; shapes must agree.
    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        if self.shape != other.shape {
            return Err(shape_err(&self.shape, &other.shape));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs())))
    }

    pub fn to_f64(&self) -> CoeffArray<f64> {
        CoeffArray {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| x.to_f64()).collect(),
        }
    }
}

#[derive(Clone, PartialEq)]
pub struct TaylorArray<T = f64> {
    shape: Vec<usize>,
    order: usize,
    data: Vec<TaylorScalar<T>>,
}

impl<T: fmt::Debug> fmt::Debug for TaylorArray<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TaylorArray")
            .field("shape", &self.shape)
            .field("order", &self.order)
            .field("data", &self.data)
            .finish()
    }
}

fn shape_err(a: &[usize], b: &[usize]) -> Error {
    Error::ShapeMismatch(format!("{a:?} vs {b:?}"))
}

fn linear_index(shape: &[usize], index: &[usize]) -> Result<usize> {
    if index.len() != shape.len() || index.iter().zip(shape).any(|(i, s)| i >= s) {
        return Err(Error::IndexOutOfBounds {
            index: index.to_vec(),
            shape: shape.to_vec(),
        });
    }
    Ok(index.iter().zip(shape).fold(0, |acc, (i, s)| acc * s + i))
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for d in (0..shape.len().saturating_sub(1)).rev() {
        s[d] = s[d + 1] * shape[d + 1];
    }
    s
}

fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let nd = a.len().max(b.len());
    let mut out = vec![0; nd];
    for d in 0..nd {
        let ea = if d + a.len() >= nd { a[d + a.len() - nd] } else { 1 };
        let eb = if d + b.len() >= nd { b[d + b.len() - nd] } else { 1 };
        out[d] = match (ea, eb) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return Err(shape_err(a, b)),
        };
    }
    Ok(out)
}

/// Linear index into an operand of shape `src` for each element of `dst`.
fn broadcast_map(src: &[usize], dst: &[usize]) -> Vec<usize> {
    let total: usize = dst.iter().product();
    let off = dst.len() - src.len();
    let sstr = strides(src);
    let dstr = strides(dst);
    (0..total)
        .map(|lin| {
            let mut idx = 0;
            for (d, &ext) in src.iter().enumerate() {
                let i = (lin / dstr[d + off]) % dst[d + off];
                if ext != 1 {
                    idx += i * sstr[d];
                }
            }
            idx
        })
        .collect()
}

impl<T: Real> TaylorArray<T> {
    /// Array from row-major elements; every element must have the same order.
    pub fn new(shape: Vec<usize>, data: Vec<TaylorScalar<T>>) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} elements do not fill shape {shape:?}",
                data.len()
            )));
        }
        let order = data.first().map_or(0, |s| s.order());
        if let Some(s) = data.iter().find(|s| s.order() != order) {
            return Err(Error::OrderMismatch {
                left: order,
                right: s.order(),
            });
        }
        Ok(TaylorArray { shape, order, data })
    }

    /// Array of the given order whose `k`-th coefficient array is `tcs[k]`.
    pub fn from_coeff_arrays(tcs: &[CoeffArray<T>]) -> Result<Self> {
        let first = tcs
            .first()
            .ok_or_else(|| Error::ShapeMismatch("no coefficient arrays".into()))?;
        let shape = first.shape.clone();
        if let Some(c) = tcs.iter().find(|c| c.shape != shape) {
            return Err(shape_err(&shape, &c.shape));
        }
        let data = (0..first.data.len())
            .map(|e| TaylorScalar::new(tcs.iter().map(|c| c.data[e]).collect()))
            .collect::<Result<Vec<_>>>()?;
        Ok(TaylorArray {
            shape,
            order: tcs.len() - 1,
            data,
        })
    }

    /// Order-0 array of plain values.
    pub fn constant(shape: Vec<usize>, values: &[T]) -> Result<Self> {
        check_finite(values)?;
        Self::new(shape, values.iter().map(|&v| TaylorScalar::constant(v)).collect())
    }

    pub fn zeros(shape: Vec<usize>, order: usize) -> Self {
        let n = shape.iter().product();
        TaylorArray {
            shape,
            order,
            data: vec![TaylorScalar::zeros(order); n],
        }
    }

    pub fn identity(n: usize, order: usize) -> Self {
        let mut a = Self::zeros(vec![n, n], order);
        for i in 0..n {
            a.data[i * n + i] = TaylorScalar::constant_of_order(T::one(), order);
        }
        a
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn elements(&self) -> &[TaylorScalar<T>] {
        &self.data
    }

    pub fn into_elements(self) -> Vec<TaylorScalar<T>> {
        self.data
    }

    /// The element at a full multi-index.
    pub fn index(&self, index: &[usize]) -> Result<&TaylorScalar<T>> {
        Ok(&self.data[linear_index(&self.shape, index)?])
    }

    /// Coefficient array `k` (zeros beyond the order).
    pub fn get_tc(&self, k: usize) -> CoeffArray<T> {
        CoeffArray {
            shape: self.shape.clone(),
            data: self.data.iter().map(|s| s.coeff(k)).collect(),
        }
    }

    pub fn truncate(&self, q: usize) -> Self {
        TaylorArray {
            shape: self.shape.clone(),
            order: q.min(self.order),
            data: self.data.iter().map(|s| s.truncate(q)).collect(),
        }
    }

    pub fn extend_to(&self, order: usize) -> Self {
        if order <= self.order {
            return self.clone();
        }
        TaylorArray {
            shape: self.shape.clone(),
            order,
            data: self.data.iter().map(|s| s.extend_to(order)).collect(),
        }
    }

    /// Applies a fallible map to every element.
    pub fn map(&self, f: impl Fn(&TaylorScalar<T>) -> Result<TaylorScalar<T>>) -> Result<Self> {
        let data = self.data.iter().map(f).collect::<Result<Vec<_>>>()?;
        Self::new(self.shape.clone(), data)
    }

    pub fn apply(&self, f: ElemFn) -> Result<Self> {
        self.map(|s| s.apply(f))
    }

    pub fn scale(&self, c: T) -> Self {
        TaylorArray {
            shape: self.shape.clone(),
            order: self.order,
            data: self.data.iter().map(|s| s.scale(c)).collect(),
        }
    }

    /// Broadcasting elementwise combination.
    pub fn zip_with(
        &self,
        rhs: &Self,
        f: impl Fn(&TaylorScalar<T>, &TaylorScalar<T>) -> Result<TaylorScalar<T>>,
    ) -> Result<Self> {
        common_order(self.order, rhs.order)?;
        let shape = broadcast_shape(&self.shape, &rhs.shape)?;
        let (ia, ib) = (broadcast_map(&self.shape, &shape), broadcast_map(&rhs.shape, &shape));
        let data = ia
            .iter()
            .zip(&ib)
            .map(|(&i, &j)| f(&self.data[i], &rhs.data[j]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(shape, data)
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, TaylorScalar::try_add)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, TaylorScalar::try_sub)
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, TaylorScalar::try_mul)
    }

    pub fn div(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, TaylorScalar::try_div)
    }

    pub fn neg(&self) -> Self {
        self.scale(-T::one())
    }

    fn matrix_dims(&self) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::ShapeMismatch(format!("expected a matrix, got shape {:?}", self.shape))),
        }
    }

    /// Truncated series matrix product `A(t) B(t)`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        let (m, r) = self.matrix_dims()?;
        let (r2, n) = rhs.matrix_dims()?;
        if r != r2 {
            return Err(shape_err(&self.shape, &rhs.shape));
        }
        let p = common_order(self.order, rhs.order)?;
        let mut data = Vec::with_capacity(m * n);
        for i in 0..m {
            for j in 0..n {
                let mut c = vec![T::zero(); p + 1];
                for (k, ck) in c.iter_mut().enumerate() {
                    let mut s = T::zero();
                    for l in 0..r {
                        let a = &self.data[i * r + l];
                        let b = &rhs.data[l * n + j];
                        for q in 0..=k.min(a.order()) {
                            s += a.coeff(q) * b.coeff(k - q);
                        }
                    }
                    *ck = s;
                }
                check_finite(&c)?;
                data.push(TaylorScalar::new(c)?);
            }
        }
        Self::new(vec![m, n], data)
    }

    /// `X` with `trunc(A X) = trunc(B)`, for square `A` with nonsingular `A₀`.
    pub fn solve(&self, rhs: &Self) -> Result<Self> {
        let (n, n2) = self.matrix_dims()?;
        if n != n2 {
            return Err(Error::ShapeMismatch(format!("solve needs a square matrix, got {n}x{n2}")));
        }
        let (rb, m) = rhs.matrix_dims()?;
        if rb != n {
            return Err(shape_err(&self.shape, &rhs.shape));
        }
        let p = common_order(self.order, rhs.order)?;
        let lu = Lu::factor(n, self.get_tc(0).data)?;
        let a: Vec<Vec<T>> = (1..=p.min(self.order)).map(|i| self.get_tc(i).data).collect();
        let mut xs: Vec<Vec<T>> = Vec::with_capacity(p + 1);
        for k in 0..=p {
            // R = B_k - Σ_{i=1}^{k} A_i X_{k-i}
            let mut rk = rhs.get_tc(k).data;
            for (i, ai) in a.iter().enumerate().take(k) {
                let x = &xs[k - i - 1];
                for row in 0..n {
                    for col in 0..m {
                        let mut s = T::zero();
                        for l in 0..n {
                            s += ai[row * n + l] * x[l * m + col];
                        }
                        rk[row * m + col] -= s;
                    }
                }
            }
            lu.solve_in_place(&mut rk, m);
            check_finite(&rk)?;
            xs.push(rk);
        }
        let tcs: Vec<CoeffArray<T>> = xs
            .into_iter()
            .map(|d| CoeffArray {
                shape: vec![n, m],
                data: d,
            })
            .collect();
        Self::from_coeff_arrays(&tcs)
    }

    pub fn reshape(&self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(shape_err(&self.shape, &shape));
        }
        Ok(TaylorArray {
            shape,
            order: self.order,
            data: self.data.clone(),
        })
    }

    /// Sub-array along one axis; the axis is kept with extent `range.len()`.
    pub fn slice(&self, axis: usize, range: Range<usize>) -> Result<Self> {
        let ext = *self
            .shape
            .get(axis)
            .ok_or_else(|| Error::ShapeMismatch(format!("axis {axis} of shape {:?}", self.shape)))?;
        if range.start > range.end || range.end > ext {
            return Err(Error::IndexOutOfBounds {
                index: vec![range.start, range.end],
                shape: self.shape.clone(),
            });
        }
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let mut data = Vec::with_capacity(outer * range.len() * inner);
        for o in 0..outer {
            for a in range.clone() {
                let start = (o * ext + a) * inner;
                data.extend_from_slice(&self.data[start..start + inner]);
            }
        }
        let mut shape = self.shape.clone();
        shape[axis] = range.len();
        Ok(TaylorArray {
            shape,
            order: self.order,
            data,
        })
    }

    /// Joins arrays along `axis`; other extents and orders must agree.
    pub fn concat(parts: &[&Self], axis: usize) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::ShapeMismatch("nothing to concatenate".into()))?;
        if axis >= first.shape.len() {
            return Err(Error::ShapeMismatch(format!("axis {axis} of shape {:?}", first.shape)));
        }
        for p in parts {
            if p.order != first.order {
                return Err(Error::OrderMismatch {
                    left: first.order,
                    right: p.order,
                });
            }
            let same = p.shape.len() == first.shape.len()
                && p.shape.iter().zip(&first.shape).enumerate().all(|(d, (a, b))| d == axis || a == b);
            if !same {
                return Err(shape_err(&first.shape, &p.shape));
            }
        }
        let outer: usize = first.shape[..axis].iter().product();
        let inner: usize = first.shape[axis + 1..].iter().product();
        let mut data = Vec::new();
        for o in 0..outer {
            for p in parts {
                let chunk = p.shape[axis] * inner;
                data.extend_from_slice(&p.data[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = first.shape.clone();
        shape[axis] = parts.iter().map(|p| p.shape[axis]).sum();
        Ok(TaylorArray {
            shape,
            order: first.order,
            data,
        })
    }

    /// Reverses the axes (the matrix transpose for 2-D arrays).
    pub fn transpose(&self) -> Self {
        let nd = self.shape.len();
        let shape: Vec<usize> = self.shape.iter().rev().copied().collect();
        let src = strides(&self.shape);
        let dst = strides(&shape);
        let data = (0..self.data.len())
            .map(|lin| {
                let mut idx = 0;
                for d in 0..nd {
                    let i = (lin / dst[d]) % shape[d];
                    idx += i * src[nd - 1 - d];
                }
                self.data[idx].clone()
            })
            .collect();
        TaylorArray {
            shape,
            order: self.order,
            data,
        }
    }
}

/// Dense LU factorization with partial pivoting, `P A = L U`.
struct Lu<T> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    fn factor(n: usize, mut a: Vec<T>) -> Result<Self> {
        let scale = a.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        let tol = T::from_usize(n) * T::epsilon() * scale;
        let mut perm: Vec<usize> = (0..n).collect();
        for c in 0..n {
            let (piv, mag) = (c..n)
                .map(|r| (r, a[r * n + c].abs()))
                .fold((c, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if scale == T::zero() || mag <= tol {
                return Err(Error::SingularConstantTerm {
                    column: c,
                    pivot: mag.to_f64(),
                });
            }
            if piv != c {
                for j in 0..n {
                    a.swap(c * n + j, piv * n + j);
                }
                perm.swap(c, piv);
            }
            let d = a[c * n + c];
            for r in c + 1..n {
                let f = a[r * n + c] / d;
                a[r * n + c] = f;
                for j in c + 1..n {
                    let u = a[c * n + j];
                    a[r * n + j] -= f * u;
                }
            }
        }
        Ok(Lu { n, lu: a, perm })
    }

    /// Overwrites the `n × m` row-major `b` with `A⁻¹ b`.
    fn solve_in_place(&self, b: &mut [T], m: usize) {
        let n = self.n;
        let src = b.to_vec();
        for (r, &p) in self.perm.iter().enumerate() {
            b[r * m..(r + 1) * m].copy_from_slice(&src[p * m..(p + 1) * m]);
        }
        for col in 0..m {
            for r in 1..n {
                let mut s = b[r * m + col];
                for j in 0..r {
                    s -= self.lu[r * n + j] * b[j * m + col];
                }
                b[r * m + col] = s;
            }
            for r in (0..n).rev() {
                let mut s = b[r * m + col];
                for j in r + 1..n {
                    s -= self.lu[r * n + j] * b[j * m + col];
                }
                b[r * m + col] = s / self.lu[r * n + r];
            }
        }
    }
}
