//! Independent checks of the Lie coefficient paths.
//!
//! * [`lie_scalar_nested_oracle`] iterates `L_f h = h' f` literally with
//!   nested central differences.
//! * [`definition_check_scalar`] and its vector and covector siblings compare
//!   the first Lie coefficient with the defining formulas, using finite
//!   difference Jacobians.
//! * [`extended_precision_reference`] reruns the library algorithms in
//!   double-double arithmetic.
//!
//! Errors are reported per coefficient order as `‖Δ‖∞` and a normwise
//! relative error (see [`Metric`]).

use crate::array::CoeffArray;
use crate::error::Result;
use crate::field::{Field, SeriesField, VectorField};
use crate::lie::{self, FieldKind, LieResult};
use crate::real::{DoubleDouble, Real};
use crate::tape::CodeList;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    /// `‖Δ‖∞ / ‖ref‖∞`, or `‖Δ‖∞` when the reference vanishes.
    Relative,
    /// `‖Δ‖∞ / max(1, ‖ref‖∞)`.
    RelativeFloored,
}

impl Metric {
    pub fn apply(self, delta: f64, ref_norm: f64) -> f64 {
        match self {
            Metric::Relative if ref_norm > 0.0 => delta / ref_norm,
            Metric::Relative => delta,
            Metric::RelativeFloored => delta / ref_norm.max(1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrderError {
    pub k: usize,
    pub abs: f64,
    pub rel: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub label: String,
    pub metric: Metric,
    pub tolerance: f64,
    pub orders: Vec<OrderError>,
}

impl OracleReport {
    /// Compares `got[k]` with `reference[k]` for every listed order.
    pub fn compare(label: &str, got: &[Vec<f64>], reference: &[Vec<f64>], metric: Metric, tolerance: f64) -> Self {
        assert_eq!(got.len(), reference.len(), "orders compared must match");
        let orders = got
            .iter()
            .zip(reference)
            .enumerate()
            .map(|(k, (g, r))| {
                assert_eq!(g.len(), r.len(), "coefficient shapes must match");
                let abs = g.iter().zip(r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                let norm = r.iter().map(|x| x.abs()).fold(0.0, f64::max);
                OrderError {
                    k,
                    abs,
                    rel: metric.apply(abs, norm),
                }
            })
            .collect();
        OracleReport {
            label: label.to_string(),
            metric,
            tolerance,
            orders,
        }
    }

    /// Same as [`compare`](Self::compare) with orders starting at `first`.
    pub fn starting_at(mut self, first: usize) -> Self {
        for (i, o) in self.orders.iter_mut().enumerate() {
            o.k = first + i;
        }
        self
    }

    pub fn max_order(&self) -> usize {
        self.orders.last().map_or(0, |o| o.k)
    }

    pub fn max_rel(&self) -> f64 {
        self.orders.iter().map(|o| o.rel).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.orders.iter().map(|o| o.abs).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.orders.iter().all(|o| o.rel <= self.tolerance)
    }
}

/// Coefficient arrays `0..=p` of a result, in binary64.
pub fn coefficient_table<T: Real>(r: &LieResult<T>) -> Vec<Vec<f64>> {
    (0..=r.order).map(|k| r.get_tc(k).to_f64().into_data()).collect()
}

/// Central-difference Jacobian (row-major `m × n`) with step `ε^{1/3}(1 + |x_j|)`.
pub fn fd_jacobian(fun: impl Fn(&[f64]) -> Result<Vec<f64>>, x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let h = f64::EPSILON.cbrt() * (1.0 + x[j].abs());
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        xp[j] += h;
        xm[j] -= h;
        let step = xp[j] - xm[j];
        let (up, dn) = (fun(&xp)?, fun(&xm)?);
        cols.push(up.iter().zip(&dn).map(|(a, b)| (a - b) / step).collect::<Vec<f64>>());
    }
    let m = cols.first().map_or(0, Vec::len);
    Ok((0..m * n).map(|e| cols[e % n][e / n]).collect())
}

fn field_values<X: Field>(x: &X, at: &[f64]) -> Result<Vec<f64>> {
    Ok(x.eval::<f64>(at)?.data)
}

/// `L_f^k h(x₀)` for `k = 0..=kmax` by literally iterating `L_f h = h' f`.
///
/// Every level differentiates the previous one by central differences with
/// step `ε^{1/(2+k)} (1 + |x_j|)`; the cost grows like `(2n)^k`.
pub fn lie_scalar_nested_oracle<F: VectorField, H: Field>(f: &F, h: &H, x0: &[f64], kmax: usize) -> Result<Vec<Vec<f64>>> {
    (0..=kmax)
        .map(|k| {
            let step = f64::EPSILON.powf(1.0 / (2.0 + k as f64));
            nested(f, h, x0, k, step)
        })
        .collect()
}

fn nested<F: VectorField, H: Field>(f: &F, h: &H, x: &[f64], k: usize, step: f64) -> Result<Vec<f64>> {
    if k == 0 {
        return field_values(h, x);
    }
    let fx = f.eval::<f64>(x)?;
    let mut acc: Option<Vec<f64>> = None;
    for j in 0..x.len() {
        let hj = step * (1.0 + x[j].abs());
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        xp[j] += hj;
        xm[j] -= hj;
        let width = xp[j] - xm[j];
        let (up, dn) = (nested(f, h, &xp, k - 1, step)?, nested(f, h, &xm, k - 1, step)?);
        let term: Vec<f64> = up.iter().zip(&dn).map(|(a, b)| (a - b) / width * fx[j]).collect();
        acc = Some(match acc {
            None => term,
            Some(a) => a.iter().zip(&term).map(|(x, y)| x + y).collect(),
        });
    }
    Ok(acc.unwrap_or_default())
}

/// `h'(x₀) f(x₀)` for each component of a scalar-field array.
pub fn definition_scalar<F: VectorField, H: Field>(f: &F, h: &H, x0: &[f64]) -> Result<Vec<f64>> {
    let n = x0.len();
    let fx = f.eval::<f64>(x0)?;
    let dh = fd_jacobian(|x| field_values(h, x), x0)?;
    Ok(dh.chunks(n).map(|row| row.iter().zip(&fx).map(|(a, b)| a * b).sum()).collect())
}

/// `g' f - f' g` for each column of an `n × m` vector-field family.
pub fn definition_vector<F: VectorField, G: Field>(f: &F, g: &G, x0: &[f64]) -> Result<Vec<f64>> {
    let n = x0.len();
    let fx = f.eval::<f64>(x0)?;
    let gx = field_values(g, x0)?;
    let m = gx.len() / n;
    let df = fd_jacobian(|x| f.eval::<f64>(x), x0)?;
    let dg = fd_jacobian(|x| field_values(g, x), x0)?;
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        for c in 0..m {
            // row (i, c) of dg is ∂g_{ic}/∂x
            let e = i * m + c;
            let gf: f64 = (0..n).map(|j| dg[e * n + j] * fx[j]).sum();
            let fg: f64 = (0..n).map(|j| df[i * n + j] * gx[j * m + c]).sum();
            out[e] = gf - fg;
        }
    }
    Ok(out)
}

/// `(ω' f)ᵀ + ω f'` for each row of an `m × n` covector-field family.
pub fn definition_covector<F: VectorField, W: Field>(f: &F, w: &W, x0: &[f64]) -> Result<Vec<f64>> {
    let n = x0.len();
    let fx = f.eval::<f64>(x0)?;
    let wx = field_values(w, x0)?;
    let m = wx.len() / n;
    let df = fd_jacobian(|x| f.eval::<f64>(x), x0)?;
    let dw = fd_jacobian(|x| field_values(w, x), x0)?;
    let mut out = vec![0.0; m * n];
    for r in 0..m {
        for i in 0..n {
            let e = r * n + i;
            let wf: f64 = (0..n).map(|j| dw[e * n + j] * fx[j]).sum();
            let wdf: f64 = (0..n).map(|l| wx[r * n + l] * df[l * n + i]).sum();
            out[e] = wf + wdf;
        }
    }
    Ok(out)
}

/// First Lie coefficient against its defining formula.
pub fn definition_check<F: VectorField, X: Field>(
    f: &F,
    x: &X,
    kind: FieldKind,
    x0: &[f64],
    tolerance: f64,
) -> Result<OracleReport> {
    let code = f.code_list()?;
    let (lie1, reference) = match kind {
        FieldKind::Scalar => (lie::lie_scalar(&code, x, x0, 1)?, definition_scalar(f, x, x0)?),
        FieldKind::Vector => (lie::lie_vector(&code, x, x0, 1)?, definition_vector(f, x, x0)?),
        FieldKind::Covector => (lie::lie_covector(&code, x, x0, 1)?, definition_covector(f, x, x0)?),
    };
    let got = lie1.get_tc(1).into_data();
    Ok(OracleReport::compare(
        &format!("{} definition at k=1", kind.name()),
        &[got],
        &[reference],
        Metric::Relative,
        tolerance,
    )
    .starting_at(1))
}

/// Scalar Lie derivatives `L^k h` (not divided by `k!`) against the nested oracle.
pub fn nested_check<F: VectorField, H: Field>(f: &F, h: &H, x0: &[f64], kmax: usize, tolerance: f64) -> Result<OracleReport> {
    let code = f.code_list()?;
    let r = lie::lie_scalar(&code, h, x0, kmax)?;
    let got: Vec<Vec<f64>> = (0..=kmax).map(|k| r.get_derivative(k).into_data()).collect();
    let reference = lie_scalar_nested_oracle(f, h, x0, kmax)?;
    Ok(OracleReport::compare(
        "scalar vs nested finite differences",
        &got,
        &reference,
        Metric::Relative,
        tolerance,
    ))
}

/// The library algorithm for `kind` rerun in double-double arithmetic.
pub fn extended_precision_reference<X: SeriesField<DoubleDouble>>(
    f: &CodeList,
    x: &X,
    kind: FieldKind,
    x0: &[f64],
    p: usize,
) -> Result<LieResult<DoubleDouble>> {
    let x0: Vec<DoubleDouble> = x0.iter().map(|&v| DoubleDouble::from(v)).collect();
    match kind {
        FieldKind::Scalar => lie::lie_scalar(f, x, &x0, p),
        FieldKind::Vector => lie::lie_vector(f, x, &x0, p),
        FieldKind::Covector => lie::lie_covector(f, x, &x0, p),
    }
}

/// Runs `kind` in binary64 and double-double and reports the binary64 error
/// per order.
pub fn extended_precision_check<X: SeriesField<f64> + SeriesField<DoubleDouble>>(
    f: &CodeList,
    x: &X,
    kind: FieldKind,
    x0: &[f64],
    p: usize,
    tolerance: f64,
) -> Result<OracleReport> {
    let got = match kind {
        FieldKind::Scalar => lie::lie_scalar(f, x, x0, p)?,
        FieldKind::Vector => lie::lie_vector(f, x, x0, p)?,
        FieldKind::Covector => lie::lie_covector(f, x, x0, p)?,
    };
    let reference = extended_precision_reference(f, x, kind, x0, p)?;
    Ok(OracleReport::compare(
        &format!("{} binary64 vs double-double", kind.name()),
        &coefficient_table(&got),
        &coefficient_table(&reference),
        Metric::Relative,
        tolerance,
    ))
}

/// Main path against the recurrence path (`Z` for vectors, `J` for covectors).
pub fn cross_path_check<X: SeriesField<f64>>(
    f: &CodeList,
    x: &X,
    kind: FieldKind,
    x0: &[f64],
    p: usize,
    metric: Metric,
    tolerance: f64,
) -> Result<OracleReport> {
    let (main, alt) = match kind {
        FieldKind::Vector => (lie::lie_vector(f, x, x0, p)?, lie::lie_vector_zrec(f, x, x0, p)?),
        FieldKind::Covector => (lie::lie_covector(f, x, x0, p)?, lie::lie_covector_jrec(f, x, x0, p)?),
        FieldKind::Scalar => {
            return Err(crate::error::Error::InvalidParameter(
                "scalar fields have no recurrence path".into(),
            ))
        }
    };
    Ok(OracleReport::compare(
        &format!("{} main vs recurrence path", kind.name()),
        &coefficient_table(&main),
        &coefficient_table(&alt),
        metric,
        tolerance,
    ))
}

/// `‖Δ‖∞` per order between two coefficient-array sequences.
pub fn max_abs_by_order<T: Real>(a: &[CoeffArray<T>], b: &[CoeffArray<T>]) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.max_abs_diff(y).map_or(f64::INFINITY, |d| d.to_f64()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elementary::Elementary;
    use crate::field::FieldValue;
    use crate::models::{Linear, LinearFunctional};

    struct Identity1;
    impl VectorField for Identity1 {
        fn dim(&self) -> usize {
            1
        }
        fn eval<S: Elementary>(&self, x: &[S]) -> Result<Vec<S>> {
            Ok(x.to_vec())
        }
    }

    struct Poly;
    impl Field for Poly {
        fn eval<S: Elementary>(&self, x: &[S]) -> Result<FieldValue<S>> {
            // x0² x1 + 3 x1³
            let v = x[0].clone() * x[0].clone() * x[1].clone() + x[1].powi(3)?.scale(3.0);
            Ok(FieldValue::vector(vec![v]))
        }
    }

    #[test]
    fn nested_oracle_on_exponential_flow() {
        let r = lie_scalar_nested_oracle(&Identity1, &LinearFunctional(vec![1.0]), &[0.8], 4).unwrap();
        for (k, v) in r.iter().enumerate() {
            assert!((v[0] - 0.8).abs() < 1e-4 * 10f64.powi(k as i32), "k={k}: {}", v[0]);
        }
    }

    #[test]
    fn nested_oracle_on_nilpotent_system() {
        // c = (1, 0): L h = x1, L² h = 0
        let x0 = [0.4, -1.1];
        let r = lie_scalar_nested_oracle(&Linear::nilpotent(), &LinearFunctional(vec![1.0, 0.0]), &x0, 3).unwrap();
        assert!((r[0][0] - 0.4).abs() < 1e-15);
        assert!((r[1][0] + 1.1).abs() < 1e-9);
        assert!(r[2][0].abs() < 1e-6 && r[3][0].abs() < 1e-3);
    }

    #[test]
    fn first_order_matches_analytic_gradient() {
        let f = Linear::oscillator();
        let x0 = [0.7, -0.3];
        let got = definition_scalar(&f, &Poly, &x0).unwrap()[0];
        // ∇h = (2 x0 x1, x0² + 9 x1²), f = (x1, -x0)
        let (a, b) = (x0[0], x0[1]);
        let exact = 2.0 * a * b * b + (a * a + 9.0 * b * b) * (-a);
        assert!((got - exact).abs() <= 1e-9 * exact.abs());
    }

    #[test]
    fn report_metrics() {
        let r = OracleReport::compare("t", &[vec![1.0, 2.0]], &[vec![1.0, 2.5]], Metric::Relative, 0.1);
        assert_eq!(r.orders[0].abs, 0.5);
        assert_eq!(r.orders[0].rel, 0.2);
        assert!(!r.passed());
        let r = OracleReport::compare("t", &[vec![0.1]], &[vec![0.2]], Metric::RelativeFloored, 0.2);
        assert_eq!(r.orders[0].rel, 0.1);
        assert!(r.passed());
    }
}
