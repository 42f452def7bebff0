//! Vector fields, which are recorded onto code lists, and the fields whose
//! Lie coefficients are computed, which are evaluated directly in series
//! arithmetic.

use crate::array::TaylorArray;
use crate::elementary::Elementary;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::series::TaylorScalar;
use crate::tape::{record, CodeList};

/// The right-hand side `f` of `ẋ = f(x)`.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval<S: Elementary>(&self, x: &[S]) -> Result<Vec<S>>;

    fn code_list(&self) -> Result<CodeList> {
        record(self.dim(), |x| self.eval(x))
    }
}

/// Row-major values of a field together with their shape.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldValue<S> {
    pub shape: Vec<usize>,
    pub data: Vec<S>,
}

impl<S> FieldValue<S> {
    pub fn new(shape: Vec<usize>, data: Vec<S>) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values do not fill shape {shape:?}",
                data.len()
            )));
        }
        Ok(FieldValue { shape, data })
    }

    pub fn vector(data: Vec<S>) -> Self {
        FieldValue {
            shape: vec![data.len()],
            data,
        }
    }
}

/// A scalar, vector or covector field (or an array of them) written once
/// against [`Elementary`], so it runs in any precision.
pub trait Field {
    fn eval<S: Elementary>(&self, x: &[S]) -> Result<FieldValue<S>>;
}

/// Evaluation on a series state `x(t)` of shape `[n]`.
pub trait SeriesField<T: Real> {
    fn eval_series(&self, x: &TaylorArray<T>) -> Result<TaylorArray<T>>;
}

impl<T: Real, G: Field> SeriesField<T> for G {
    fn eval_series(&self, x: &TaylorArray<T>) -> Result<TaylorArray<T>> {
        let v = self.eval::<TaylorScalar<T>>(x.elements())?;
        let order = x.order();
        let data = v
            .data
            .into_iter()
            .map(|s| if s.order() < order { s.extend_to(order) } else { s })
            .collect();
        TaylorArray::new(v.shape, data)
    }
}

/// Adapter for a closure over series arrays.
pub struct ArrayFn<F>(pub F);

impl<T: Real, F: Fn(&TaylorArray<T>) -> Result<TaylorArray<T>>> SeriesField<T> for ArrayFn<F> {
    fn eval_series(&self, x: &TaylorArray<T>) -> Result<TaylorArray<T>> {
        (self.0)(x)
    }
}

/// A vector field used as the field being differentiated (`X = f`).
pub struct AsField<V>(pub V);

impl<V: VectorField> Field for AsField<V> {
    fn eval<S: Elementary>(&self, x: &[S]) -> Result<FieldValue<S>> {
        Ok(FieldValue::vector(self.0.eval(x)?))
    }
}

/// Vertically stacked fields of identical trailing shape.
pub struct Stack<'a, G>(pub &'a [G]);

impl<G: Field> Field for Stack<'_, G> {
    fn eval<S: Elementary>(&self, x: &[S]) -> Result<FieldValue<S>> {
        let mut shape: Option<Vec<usize>> = None;
        let mut data = Vec::new();
        for g in self.0 {
            let v = g.eval(x)?;
            match &mut shape {
                None => shape = Some(v.shape.clone()),
                Some(s) if s[1..] == v.shape[1..] => s[0] += v.shape[0],
                Some(s) => return Err(Error::ShapeMismatch(format!("{s:?} vs {:?}", v.shape))),
            }
            data.extend(v.data);
        }
        FieldValue::new(shape.unwrap_or_default(), data)
    }
}

/// Horizontally joined matrix fields (columns side by side).
pub struct Columns<'a, G>(pub &'a [G]);

impl<G: Field> Field for Columns<'_, G> {
    fn eval<S: Elementary>(&self, x: &[S]) -> Result<FieldValue<S>> {
        let parts = self.0.iter().map(|g| g.eval(x)).collect::<Result<Vec<_>>>()?;
        let rows = parts.first().map_or(0, |p| p.shape[0]);
        let mut cols = 0;
        for p in &parts {
            if p.shape.len() > 2 || p.shape[0] != rows {
                return Err(Error::ShapeMismatch(format!("cannot join shape {:?} as columns", p.shape)));
            }
            cols += p.shape.get(1).copied().unwrap_or(1);
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for p in &parts {
                let w = p.shape.get(1).copied().unwrap_or(1);
                data.extend_from_slice(&p.data[r * w..(r + 1) * w]);
            }
        }
        FieldValue::new(vec![rows, cols], data)
    }
}
