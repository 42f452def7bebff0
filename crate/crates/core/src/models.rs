//! Built-in models: the gantry crane and two linear test systems.

use crate::elementary::Elementary;
use crate::error::{Error, Result};
use crate::field::{FieldValue, VectorField};

/// Cart mass `M`, load mass `m`, cable length `ell` and gravity `g`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GantryParams {
    pub big_m: f64,
    pub m: f64,
    pub ell: f64,
    pub g: f64,
}

impl Default for GantryParams {
    fn default() -> Self {
        GantryParams {
            big_m: 1.0,
            m: 1.0,
            ell: 1.0,
            g: 9.81,
        }
    }
}

impl GantryParams {
    pub fn new(big_m: f64, m: f64, ell: f64, g: f64) -> Result<Self> {
        let ok = big_m > 0.0 && m >= 0.0 && ell > 0.0 && [big_m, m, ell, g].iter().all(|v| v.is_finite());
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "gantry parameters need M > 0, m >= 0, ell > 0 (got M={big_m}, m={m}, ell={ell}, G={g})"
            )));
        }
        Ok(GantryParams { big_m, m, ell, g })
    }
}

/// State `x = (z, φ, ż, φ̇)`: cart position, cable angle and their rates.
pub const GANTRY_X0: [f64; 4] = [1.0, 0.2, -0.5, -0.4];

struct Trig<S> {
    s: S,
    c: S,
    /// `m sin²φ + M`
    den: S,
}

fn trig<S: Elementary>(p: &GantryParams, phi: &S) -> Result<Trig<S>> {
    let (s, c) = (phi.sin()?, phi.cos()?);
    let den = s.clone() * s.clone() * phi.constant_like(p.m) + phi.constant_like(p.big_m);
    Ok(Trig { s, c, den })
}

/// Drift `f` of the control-affine gantry model.
#[derive(Clone, Copy, Debug, Default)]
pub struct GantryDrift(pub GantryParams);

impl VectorField for GantryDrift {
    fn dim(&self) -> usize {
        4
    }

    fn eval<S: Elementary>(&self, x: &[S]) -> Result<Vec<S>> {
        let p = &self.0;
        let k = |v: f64| x[0].constant_like(v);
        let Trig { s, c, den } = trig(p, &x[1])?;
        let w2 = x[3].clone() * x[3].clone();
        let a = k(p.m * p.ell) * w2.clone() * s.clone();
        let zdd = (a + k(p.m * p.g) * s.clone() * c.clone()).try_div(&den)?;
        let b = k(p.m * p.ell) * w2 * s.clone() * c;
        let pdd = -(b + k((p.m + p.big_m) * p.g) * s).try_div(&(k(p.ell) * den))?;
        Ok(vec![x[2].clone(), x[3].clone(), zdd, pdd])
    }
}

/// Input vector field `g`, shape `[4, 1]`.
#[derive(Clone, Copy, Debug, Default)]
pub struct GantryInput(pub GantryParams);

impl crate::field::Field for GantryInput {
    fn eval<S: Elementary>(&self, x: &[S]) -> Result<FieldValue<S>> {
        let p = &self.0;
        let Trig { c, den, .. } = trig(p, &x[1])?;
        let zero = x[0].constant_like(0.0);
        let g3 = den.recip()?;
        let g4 = -c.try_div(&(x[0].constant_like(p.ell) * den))?;
        FieldValue::new(vec![4, 1], vec![zero.clone(), zero, g3, g4])
    }
}

/// Output map `h`: Cartesian position of the load, shape `[2, 1]`.
#[derive(Clone, Copy, Debug, Default)]
pub struct GantryOutput(pub GantryParams);

impl crate::field::Field for GantryOutput {
    fn eval<S: Elementary>(&self, x: &[S]) -> Result<FieldValue<S>> {
        let ell = x[0].constant_like(self.0.ell);
        let h1 = ell.clone() * x[1].sin()? + x[0].clone();
        let h2 = ell * x[1].cos()?;
        FieldValue::new(vec![2, 1], vec![h1, h2])
    }
}

/// Covector family `dh`, shape `[2, 4]`.
#[derive(Clone, Copy, Debug, Default)]
pub struct GantryOutputDifferential(pub GantryParams);

impl crate::field::Field for GantryOutputDifferential {
    fn eval<S: Elementary>(&self, x: &[S]) -> Result<FieldValue<S>> {
        let ell = x[0].constant_like(self.0.ell);
        let (zero, one) = (x[0].constant_like(0.0), x[0].constant_like(1.0));
        let row1 = [one, ell.clone() * x[1].cos()?, zero.clone(), zero.clone()];
        let row2 = [zero.clone(), -(ell * x[1].sin()?), zero.clone(), zero];
        FieldValue::new(vec![2, 4], row1.into_iter().chain(row2).collect())
    }
}

/// `f(x) = A x` for a dense row-major `A`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub n: usize,
    pub a: Vec<f64>,
}

impl Linear {
    pub fn new(n: usize, a: Vec<f64>) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::ShapeMismatch(format!("A needs {} entries, got {}", n * n, a.len())));
        }
        Ok(Linear { n, a })
    }

    /// `A = [[0, 1], [0, 0]]`.
    pub fn nilpotent() -> Self {
        Linear {
            n: 2,
            a: vec![0.0, 1.0, 0.0, 0.0],
        }
    }

    /// `A = [[0, 1], [-1, 0]]`.
    pub fn oscillator() -> Self {
        Linear {
            n: 2,
            a: vec![0.0, 1.0, -1.0, 0.0],
        }
    }
}

impl VectorField for Linear {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval<S: Elementary>(&self, x: &[S]) -> Result<Vec<S>> {
        let n = self.n;
        Ok((0..n)
            .map(|i| {
                let mut terms = (0..n).filter(|&j| self.a[i * n + j] != 0.0).map(|j| {
                    let a = self.a[i * n + j];
                    if a == 1.0 {
                        x[j].clone()
                    } else if a == -1.0 {
                        -x[j].clone()
                    } else {
                        x[j].scale(a)
                    }
                });
                let first = terms.next().unwrap_or_else(|| x[0].constant_like(0.0));
                terms.fold(first, |acc, t| acc + t)
            })
            .collect())
    }
}

/// Field with constant values (a constant vector `b`, a covector `c`, ...).
#[derive(Clone, Debug, PartialEq)]
pub struct ConstantField {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl crate::field::Field for ConstantField {
    fn eval<S: Elementary>(&self, x: &[S]) -> Result<FieldValue<S>> {
        FieldValue::new(self.shape.clone(), self.values.iter().map(|&v| x[0].constant_like(v)).collect())
    }
}

/// Linear scalar field `c · x`, shape `[1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearFunctional(pub Vec<f64>);

impl crate::field::Field for LinearFunctional {
    fn eval<S: Elementary>(&self, x: &[S]) -> Result<FieldValue<S>> {
        let mut acc = x[0].constant_like(0.0);
        for (c, xi) in self.0.iter().zip(x) {
            if *c != 0.0 {
                acc = acc + xi.scale(*c);
            }
        }
        Ok(FieldValue::vector(vec![acc]))
    }
}
