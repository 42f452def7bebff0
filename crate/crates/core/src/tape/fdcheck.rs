use super::{taylcoeffs, CodeList};
use crate::error::Result;

/// One compared entry `∂x_k[i]/∂x₀[j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FdEntry {
    pub k: usize,
    pub i: usize,
    pub j: usize,
    pub propagated: f64,
    pub finite_difference: f64,
    pub abs_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdReport {
    pub order: usize,
    pub entries: Vec<FdEntry>,
    /// Per order `k`: `‖Δ_k‖∞ / ‖∂x_k/∂x₀‖∞` (absolute when the norm is 0).
    pub rel_by_order: Vec<f64>,
}

impl FdReport {
    pub fn max_rel(&self) -> f64 {
        self.rel_by_order.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.abs_error).fold(0.0, f64::max)
    }
}

/// Compares propagated gradients of `x_0..x_p` with central differences,
/// step `ε^{1/3} (1 + |x0_j|)` per coordinate.
pub fn finite_difference_jacobian_check(code: &CodeList, x0: &[f64], p: usize) -> Result<FdReport> {
    let n = x0.len();
    let base = taylcoeffs(code, x0, p, true)?;
    let grads = base.grads.expect("requested");
    let mut fd = vec![vec![0.0; n * n]; p + 1];
    for j in 0..n {
        let h = f64::EPSILON.cbrt() * (1.0 + x0[j].abs());
        let mut xp = x0.to_vec();
        let mut xm = x0.to_vec();
        xp[j] += h;
        xm[j] -= h;
        let step = xp[j] - xm[j];
        let up = taylcoeffs(code, &xp, p, false)?;
        let dn = taylcoeffs(code, &xm, p, false)?;
        for (k, row) in fd.iter_mut().enumerate() {
            for i in 0..n {
                row[i * n + j] = (up.x_coeffs[k][i] - dn.x_coeffs[k][i]) / step;
            }
        }
    }
    let mut entries = Vec::with_capacity((p + 1) * n * n);
    let mut rel_by_order = Vec::with_capacity(p + 1);
    for k in 0..=p {
        let mut worst: f64 = 0.0;
        let mut norm: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let a = grads[k][i * n + j];
                let b = fd[k][i * n + j];
                let abs_error = (a - b).abs();
                worst = worst.max(abs_error);
                norm = norm.max(a.abs());
                entries.push(FdEntry {
                    k,
                    i,
                    j,
                    propagated: a,
                    finite_difference: b,
                    abs_error,
                });
            }
        }
        rel_by_order.push(if norm > 0.0 { worst / norm } else { worst });
    }
    Ok(FdReport {
        order: p,
        entries,
        rel_by_order,
    })
}
