//! Wall-clock timing of Lie coefficient computations against the order `k`.

use std::hint::black_box;
use std::time::{Duration, Instant};

use crate::error::Result;
use crate::field::{Field, VectorField};
use crate::lie::{self, FieldKind};
use crate::tape::CodeList;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub k: usize,
    /// Fastest per-call seconds over the repetitions, code-list build excluded.
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub kind: FieldKind,
    pub reps: usize,
    /// Median seconds to record the code list of `f`.
    pub build_seconds: f64,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    /// Least-squares slope of `ln t` against `ln k` over `k ∈ [lo, hi]`.
    pub fn fitted_exponent(&self, lo: usize, hi: usize) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.k >= lo.max(1) && r.k <= hi && r.seconds > 0.0)
            .map(|r| ((r.k as f64).ln(), r.seconds.ln()))
            .collect();
        log_log_slope(&pts)
    }

    /// Build time as a fraction of build plus computation, per order.
    pub fn build_fraction(&self) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .map(|r| (r.k, self.build_seconds / (self.build_seconds + r.seconds)))
            .collect()
    }
}

fn log_log_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Calls needed for one sample of at least `min_sample`.
fn calibrate(min_sample: Duration, work: &mut impl FnMut() -> Result<()>) -> Result<usize> {
    let start = Instant::now();
    work()?;
    let once = start.elapsed().max(Duration::from_nanos(1));
    Ok((min_sample.as_secs_f64() / once.as_secs_f64()).ceil().max(1.0) as usize)
}

fn sample(batch: usize, work: &mut impl FnMut() -> Result<()>) -> Result<f64> {
    let t = Instant::now();
    for _ in 0..batch {
        work()?;
    }
    Ok(t.elapsed().as_secs_f64() / batch as f64)
}

const HEAP_SHIFT: usize = 40;

pub const DEFAULT_SAMPLE: Duration = Duration::from_millis(5);

/// Times the Lie coefficients of `x` for every order `1..=kmax`.
///
/// Repetitions sweep all orders in turn and each order keeps its fastest
/// sample, so slow drifts and interruptions do not bias one end of the range.
/// Each sample runs against a differently shifted heap, so no order is tied
/// to one particular placement of its buffers.
pub fn bench_scaling<F: VectorField, X: Field>(
    f: &F,
    x: &X,
    kind: FieldKind,
    x0: &[f64],
    kmax: usize,
    reps: usize,
    min_sample: Duration,
) -> Result<BenchReport> {
    let reps = reps.max(1);
    let mut build = || {
        black_box(f.code_list()?);
        Ok(())
    };
    let build_batch = calibrate(min_sample, &mut build)?;
    let mut build_samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        build_samples.push(sample(build_batch, &mut build)?);
    }
    let code = f.code_list()?;
    let mut batches = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        batches.push(calibrate(min_sample, &mut || {
            black_box(compute(&code, x, kind, black_box(x0), k)?);
            Ok(())
        })?);
    }
    let mut best = vec![f64::INFINITY; kmax];
    for rep in 0..reps {
        for k in 1..=kmax {
            // Shifts where the heap places this sample's buffers.
            let _pad = black_box(vec![0u8; HEAP_SHIFT * ((rep * 7 + k * 3) % 64)]);
            let s = sample(batches[k - 1], &mut || {
                black_box(compute(&code, x, kind, black_box(x0), k)?);
                Ok(())
            })?;
            best[k - 1] = best[k - 1].min(s);
        }
    }
    Ok(BenchReport {
        kind,
        reps,
        build_seconds: median(build_samples),
        rows: best.into_iter().enumerate().map(|(i, seconds)| BenchRow { k: i + 1, seconds }).collect(),
    })
}

fn compute<X: Field>(code: &CodeList, x: &X, kind: FieldKind, x0: &[f64], k: usize) -> Result<lie::LieResult> {
    match kind {
        FieldKind::Scalar => lie::lie_scalar(code, x, x0, k),
        FieldKind::Vector => lie::lie_vector(code, x, x0, k),
        FieldKind::Covector => lie::lie_covector(code, x, x0, k),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{GantryDrift, GantryOutput, GANTRY_X0};

    #[test]
    fn slope_of_exact_power_law() {
        let pts: Vec<(f64, f64)> = (1..8).map(|k| ((k as f64).ln(), 3.0 + 2.0 * (k as f64).ln())).collect();
        assert!((log_log_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn minimal_run_completes() {
        let r = bench_scaling(
            &GantryDrift::default(),
            &GantryOutput::default(),
            FieldKind::Scalar,
            &GANTRY_X0,
            4,
            3,
            Duration::from_micros(100),
        )
        .unwrap();
        assert_eq!(r.rows.len(), 4);
        assert!(r.build_seconds > 0.0);
        assert!(r.fitted_exponent(1, 4).is_some());
        assert!(r.build_fraction().iter().all(|&(_, f)| f > 0.0 && f < 1.0));
    }
}
