//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line.

use std::io::Write;
use std::sync::Mutex;
use std::time::Instant;

use lietaylor::bench::{bench_scaling, DEFAULT_SAMPLE};
use lietaylor::field::{Columns, Field, FieldValue, Stack, VectorField};
use lietaylor::lie::{self, FieldKind};
use lietaylor::models::{ConstantField, GantryDrift, GantryInput, GantryOutput, GantryOutputDifferential, Linear, GANTRY_X0};
use lietaylor::oracle::{cross_path_check, definition_check, extended_precision_check, nested_check, Metric};
use lietaylor::tape::{eval_series, finite_difference_jacobian_check, taylcoeffs};
use lietaylor::{DoubleDouble, Elementary, Real, Result, TaylorArray, TaylorScalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

const EPS: f64 = f64::EPSILON;

/// Written to the stderr handle directly so the line shows even when output is captured.
fn report(n: u32, ok: bool, detail: String) {
    let line = format!("criterion {n}: {} {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}

fn lock() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn lift(a: &TaylorArray) -> TaylorArray<DoubleDouble> {
    let data = a
        .elements()
        .iter()
        .map(|s| TaylorScalar::new(s.coeffs().iter().map(|&c| DoubleDouble::from(c)).collect()).unwrap())
        .collect();
    TaylorArray::new(a.shape().to_vec(), data).unwrap()
}

fn abs_series(a: &TaylorScalar) -> TaylorScalar {
    a.map_coeffs(f64::abs)
}

fn random_series(rng: &mut ChaCha8Rng, p: usize) -> TaylorScalar {
    TaylorScalar::new((0..=p).map(|_| rng.gen_range(-2.0..=2.0)).collect()).unwrap()
}

/// Worst `|got_k - want_k| / (eps * scale_k)` over all orders.
fn ulps(got: &TaylorScalar, want: &TaylorScalar, scale: &TaylorScalar) -> f64 {
    (0..=got.order())
        .map(|k| {
            let d = (got.coeff(k) - want.coeff(k)).abs();
            if d == 0.0 {
                0.0
            } else {
                d / (EPS * scale.coeff(k))
            }
        })
        .fold(0.0, f64::max)
}

#[test]
fn criterion_01_series_algebra() {
    let _g = lock();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let start = Instant::now();
    let mut worst = [0.0f64; 6];
    let cases = 1000;
    for _ in 0..cases {
        let p = rng.gen_range(0..=20);
        let (a, b, c) = (random_series(&mut rng, p), random_series(&mut rng, p), random_series(&mut rng, p));
        let (aa, ab, ac) = (abs_series(&a), abs_series(&b), abs_series(&c));

        let prod_scale = &(&aa * &ab) * &ac;
        worst[0] = worst[0].max(ulps(&(&(&a * &b) * &c), &(&a * &(&b * &c)), &prod_scale));
        worst[1] = worst[1].max(ulps(&(&a * &b), &(&b * &a), &(&aa * &ab)));
        let dist_scale = &aa * &(&ab + &ac);
        worst[1] = worst[1].max(ulps(&(&a * &(&b + &c)), &(&(&a * &b) + &(&a * &c)), &dist_scale));

        let mut v = random_series(&mut rng, p);
        let mut vc = v.coeffs().to_vec();
        if vc[0].abs() < 0.1 {
            vc[0] = 0.1f64.copysign(vc[0]);
            v = TaylorScalar::new(vc).unwrap();
        }
        let w = a.try_div(&v).unwrap();
        let div_scale = &(&abs_series(&v) * &abs_series(&w)) + &aa;
        worst[2] = worst[2].max(ulps(&(&v * &w), &a, &div_scale));

        let e = a.exp().unwrap();
        let phi = TaylorScalar::constant_of_order(1.0, p).try_div(&e).unwrap();
        let ln_scale: Vec<f64> = (0..=p)
            .map(|k| {
                if k == 0 {
                    a.coeff(0).abs().max(1.0)
                } else {
                    let t: f64 = (1..=k).map(|i| i as f64 * e.coeff(i).abs() * phi.coeff(k - i).abs()).sum();
                    (t / k as f64).max(a.coeff(k).abs())
                }
            })
            .collect();
        worst[3] = worst[3].max(ulps(&e.ln().unwrap(), &a, &TaylorScalar::new(ln_scale).unwrap()));

        let (s, co) = a.sin_cos().unwrap();
        let one = TaylorScalar::constant_of_order(1.0, p);
        let pyth_scale = &(&abs_series(&s) * &abs_series(&s)) + &(&abs_series(&co) * &abs_series(&co));
        worst[4] = worst[4].max(ulps(&(&(&s * &s) + &(&co * &co)), &one, &pyth_scale));
    }
    let secs = start.elapsed().as_secs_f64();
    let max = worst.iter().copied().fold(0.0, f64::max);
    let ok = max <= 8.0 && secs < 10.0;
    report(
        1,
        ok,
        format!(
            "{cases} cases, ulp·scale: assoc {:.2} comm/dist {:.2} mul/div {:.2} ln∘exp {:.2} sin²+cos² {:.2} (tol 8); {secs:.2}s (tol 10s)",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_02_ode_residual() {
    let _g = lock();
    let code = GantryDrift::default().code_list().unwrap();
    let p = 10;
    let gc = taylcoeffs(&code, &GANTRY_X0, p, false).unwrap();
    let xs = gc.x().into_elements();
    let fs = eval_series(&code, &xs).unwrap();
    let mut worst = 0.0f64;
    for k in 0..p {
        let n = fs.len();
        let d = (0..n).map(|i| (fs[i].coeff(k) - (k + 1) as f64 * gc.x_coeffs[k + 1][i]).abs()).fold(0.0, f64::max);
        let r = (0..n).map(|i| fs[i].coeff(k).abs()).fold(0.0, f64::max);
        worst = worst.max(if r > 0.0 { d / r } else { d });
    }
    let ok = worst <= 1e-13;
    report(2, ok, format!("max normwise relative residual {worst:.3e} (tol 1e-13), p = {p}"));
    assert!(ok);
}

#[test]
fn criterion_03_jacobian() {
    let _g = lock();
    let code = GantryDrift::default().code_list().unwrap();
    let fd = finite_difference_jacobian_check(&code, &GANTRY_X0, 5).unwrap();
    let p = 10;
    let j = taylcoeffs(&code, &GANTRY_X0, p, true).unwrap().jacobian().unwrap();
    let jr = lie::jacobian_from_recurrence(&code, &GANTRY_X0, p).unwrap();
    let mut rec = 0.0f64;
    for k in 0..=p {
        let (a, b) = (j.get_tc(k), jr.get_tc(k));
        let d = a.max_abs_diff(&b).unwrap();
        let r = b.norm_inf();
        rec = rec.max(if r > 0.0 { d / r } else { d });
    }
    let ok = fd.max_rel() <= 1e-6 && rec <= 1e-12;
    report(
        3,
        ok,
        format!("vs central FD (k<=5) {:.3e} (tol 1e-6); vs recurrence (k<=10) {rec:.3e} (tol 1e-12)", fd.max_rel()),
    );
    assert!(ok);
}

#[test]
fn criterion_04_definitions() {
    let _g = lock();
    let f = GantryDrift::default();
    let reports = [
        definition_check(&f, &GantryOutput::default(), FieldKind::Scalar, &GANTRY_X0, 1e-6).unwrap(),
        definition_check(&f, &GantryInput::default(), FieldKind::Vector, &GANTRY_X0, 1e-6).unwrap(),
        definition_check(&f, &GantryOutputDifferential::default(), FieldKind::Covector, &GANTRY_X0, 1e-6).unwrap(),
    ];
    let ok = reports.iter().all(|r| r.passed());
    let detail: Vec<String> = reports.iter().map(|r| format!("{} {:.3e}", r.label, r.max_rel())).collect();
    report(4, ok, format!("{} (tol 1e-6)", detail.join("; ")));
    assert!(ok);
}

#[test]
fn criterion_05_cross_paths() {
    let _g = lock();
    let code = GantryDrift::default().code_list().unwrap();
    let p = 10;
    let v = cross_path_check(&code, &GantryInput::default(), FieldKind::Vector, &GANTRY_X0, p, Metric::Relative, 1e-12).unwrap();
    let c = cross_path_check(&code, &GantryOutputDifferential::default(), FieldKind::Covector, &GANTRY_X0, p, Metric::Relative, 1e-12).unwrap();

    let z = lie::inverse_jacobian_from_recurrence(&code, &GANTRY_X0, p).unwrap();
    let j = taylcoeffs(&code, &GANTRY_X0, p, true).unwrap().jacobian().unwrap();
    let zj = z.matmul(&j).unwrap();
    let eye = TaylorArray::identity(GANTRY_X0.len(), p);
    let per_k: Vec<f64> = (0..=p).map(|k| zj.get_tc(k).max_abs_diff(&eye.get_tc(k)).unwrap()).collect();
    let zj_err = per_k.iter().copied().fold(0.0, f64::max);
    let first_bad = per_k.iter().position(|&e| e > 1e-13);
    let z_norm = (0..=p).map(|k| z.get_tc(k).norm_inf()).fold(0.0, f64::max);
    let dd_residual = |z: &TaylorArray<DoubleDouble>, j: &TaylorArray<DoubleDouble>| {
        let zj = z.matmul(j).unwrap();
        let eye = TaylorArray::<DoubleDouble>::identity(GANTRY_X0.len(), p);
        (0..=p).map(|k| zj.get_tc(k).max_abs_diff(&eye.get_tc(k)).unwrap().to_f64()).fold(0.0, f64::max)
    };
    let rounded = dd_residual(&lift(&z), &lift(&j));
    let x0_dd: Vec<DoubleDouble> = GANTRY_X0.iter().map(|&v| DoubleDouble::from(v)).collect();
    let z_dd = lie::inverse_jacobian_from_recurrence(&code, &x0_dd, p).unwrap();
    let j_dd = taylcoeffs(&code, &x0_dd, p, true).unwrap().jacobian().unwrap();
    let extended = dd_residual(&z_dd, &j_dd);

    let ok = v.passed() && c.passed() && zj_err <= 1e-13;
    report(
        5,
        ok,
        format!(
            "vector vs Z path {:.3e}, covector vs J path {:.3e} (tol 1e-12); trunc(Z·J) - I {zj_err:.3e} (tol 1e-13){}",
            v.max_rel(),
            c.max_rel(),
            match first_bad {
                Some(k) => format!(
                    ", first exceeded at k = {k}; max ‖Z_k‖ = {z_norm:.3e} so eps·‖Z_k‖ = {:.3e}; \
                     binary64 Z, J multiplied exactly {rounded:.3e}; double-double Z, J {extended:.3e}",
                    EPS * z_norm
                ),
                None => String::new(),
            }
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_06_nested_oracle() {
    let _g = lock();
    let r = nested_check(&GantryDrift::default(), &GantryOutput::default(), &GANTRY_X0, 3, 1e-5).unwrap();
    let per: Vec<String> = r.orders.iter().map(|o| format!("k={} {:.2e}", o.k, o.rel)).collect();
    report(6, r.passed(), format!("{} (tol 1e-5)", per.join(", ")));
    assert!(r.passed());
}

fn matvec(a: &[f64], n: usize, v: &[f64]) -> Vec<f64> {
    (0..n).map(|i| (0..n).map(|j| a[i * n + j] * v[j]).sum()).collect()
}

fn vecmat(c: &[f64], a: &[f64], n: usize) -> Vec<f64> {
    (0..n).map(|j| (0..n).map(|i| c[i] * a[i * n + j]).sum()).collect()
}

/// Worst entrywise error in units of `eps · ‖ref‖∞`; a zero reference must be met exactly.
fn ulp_error(got: &[f64], want: &[f64]) -> f64 {
    let norm = want.iter().map(|v| v.abs()).fold(0.0, f64::max);
    got.iter()
        .zip(want)
        .map(|(g, w)| {
            let d = (g - w).abs();
            if d == 0.0 {
                0.0
            } else if norm == 0.0 {
                f64::INFINITY
            } else {
                d / (EPS * norm)
            }
        })
        .fold(0.0, f64::max)
}

#[test]
fn criterion_07_closed_forms() {
    let _g = lock();
    let systems = [
        (Linear::nilpotent(), vec![0.3, -1.7], vec![1.1, 0.4], vec![0.25, -0.5]),
        (
            Linear::new(
                4,
                vec![
                    0.0, 0.5, -1.25, 2.0, //
                    0.0, 0.0, 3.0, -0.75, //
                    0.0, 0.0, 0.0, 1.5, //
                    0.0, 0.0, 0.0, 0.0,
                ],
            )
            .unwrap(),
            vec![0.2, -0.1, 0.7, 1.3],
            vec![1.0, -2.0, 0.5, 3.0],
            vec![-1.0, 0.75, 2.0, 0.125],
        ),
    ];
    let p = 6;
    let mut worst = 0.0f64;
    for (f, x0, b, c) in &systems {
        let n = f.n;
        let code = f.code_list().unwrap();
        let neg_a: Vec<f64> = f.a.iter().map(|v| -v).collect();
        let gv = lie::lie_vector(&code, &ConstantField { shape: vec![n], values: b.clone() }, x0, p).unwrap();
        let wv = lie::lie_covector(&code, &ConstantField { shape: vec![n], values: c.clone() }, x0, p).unwrap();
        let (mut bk, mut ck) = (b.clone(), c.clone());
        for k in 0..=p {
            worst = worst.max(ulp_error(gv.get_derivative(k).data(), &bk));
            worst = worst.max(ulp_error(wv.get_derivative(k).data(), &ck));
            bk = matvec(&neg_a, n, &bk);
            ck = vecmat(&ck, &f.a, n);
        }
    }
    let ok = worst <= 4.0;
    report(7, ok, format!("ad_f^k b and L^k c over k <= {p}: {worst:.2} ulp (tol 4)"));
    assert!(ok);
}

#[test]
fn criterion_08_error_growth() {
    let _g = lock();
    let code = GantryDrift::default().code_list().unwrap();
    let p = 10;
    let h = extended_precision_check(&code, &GantryOutput::default(), FieldKind::Scalar, &GANTRY_X0, p, 1.0).unwrap();
    let g = extended_precision_check(&code, &GantryInput::default(), FieldKind::Vector, &GANTRY_X0, p, 1.0).unwrap();
    let floor = |e: f64| if e == 0.0 { EPS } else { e };
    let h_ratio = floor(h.orders[10].rel) / floor(h.orders[1].rel);
    let g_max = g.orders[1..=10].iter().map(|o| o.rel).fold(0.0, f64::max);
    let g_growth = floor(g_max) / floor(g.orders[1].rel);
    let ok = h_ratio <= 10.0 && g_growth <= 1e4;
    report(
        8,
        ok,
        format!(
            "scalar err k=1 {:.2e}, k=10 {:.2e}, ratio {h_ratio:.2} (tol 10); vector err k=1 {:.2e}, max k<=10 {g_max:.2e}, growth {g_growth:.1} (tol 1e4)",
            h.orders[1].rel, h.orders[10].rel, g.orders[1].rel
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_09_runtime_scaling() {
    let _g = lock();
    let r = bench_scaling(
        &GantryDrift::default(),
        &GantryOutput::default(),
        FieldKind::Scalar,
        &GANTRY_X0,
        60,
        15,
        DEFAULT_SAMPLE,
    )
    .unwrap();
    let low = r.fitted_exponent(1, 10).unwrap();
    let high = r.fitted_exponent(30, 60).unwrap();
    let ok = low <= 1.6 && (1.5..=2.5).contains(&high);
    report(
        9,
        ok,
        format!(
            "exponent k<=10 {low:.3} (tol <= 1.6), k in [30,60] {high:.3} (tol [1.5, 2.5]); t(10) {:.2e}s, t(60) {:.2e}s",
            r.rows[9].seconds, r.rows[59].seconds
        ),
    );
    assert!(ok);
}

/// `a0 sin(x_i) + a1 x_j x_k + a2 cos(a3 x_l)` per entry.
#[derive(Clone)]
struct RandomField {
    shape: Vec<usize>,
    terms: Vec<([f64; 4], [usize; 4])>,
}

impl RandomField {
    fn new(rng: &mut ChaCha8Rng, shape: Vec<usize>, n: usize) -> Self {
        let len = shape.iter().product();
        let terms = (0..len)
            .map(|_| {
                let a = [0; 4].map(|_| rng.gen_range(-2.0..=2.0));
                let i = [0; 4].map(|_| rng.gen_range(0..n));
                (a, i)
            })
            .collect();
        RandomField { shape, terms }
    }
}

impl Field for RandomField {
    fn eval<S: Elementary>(&self, x: &[S]) -> Result<FieldValue<S>> {
        let data = self
            .terms
            .iter()
            .map(|(a, i)| {
                let t0 = x[i[0]].sin()?.scale(a[0]);
                let t1 = (x[i[1]].clone() * x[i[2]].clone()).scale(a[1]);
                let t2 = x[i[3]].scale(a[3]).cos()?.scale(a[2]);
                Ok(t0 + t1 + t2)
            })
            .collect::<Result<Vec<S>>>()?;
        FieldValue::new(self.shape.clone(), data)
    }
}

#[test]
fn criterion_10_family_consistency() {
    let _g = lock();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let code = GantryDrift::default().code_list().unwrap();
    let (n, m, p) = (4, 3, 8);
    let x0 = GANTRY_X0;
    let hs: Vec<RandomField> = (0..m).map(|_| RandomField::new(&mut rng, vec![1], n)).collect();
    let gs: Vec<RandomField> = (0..m).map(|_| RandomField::new(&mut rng, vec![n, 1], n)).collect();
    let ws: Vec<RandomField> = (0..m).map(|_| RandomField::new(&mut rng, vec![1, n], n)).collect();

    let hf = lie::lie_scalar(&code, &Stack(&hs), &x0, p).unwrap();
    let gf = lie::lie_vector(&code, &Columns(&gs), &x0, p).unwrap();
    let wf = lie::lie_covector(&code, &Stack(&ws), &x0, p).unwrap();
    let shapes_ok = hf.shape() == [m] && gf.shape() == [n, m] && wf.shape() == [m, n];

    let mut mismatches = 0usize;
    let mut compared = 0usize;
    let mut cmp = |a: f64, b: f64| {
        compared += 1;
        if a.to_bits() != b.to_bits() {
            mismatches += 1;
        }
    };
    for c in 0..m {
        let h1 = lie::lie_scalar(&code, &hs[c], &x0, p).unwrap();
        let g1 = lie::lie_vector(&code, &gs[c], &x0, p).unwrap();
        let w1 = lie::lie_covector(&code, &ws[c], &x0, p).unwrap();
        for k in 0..=p {
            cmp(hf.get_tc(k).data()[c], h1.get_tc(k).data()[0]);
            for r in 0..n {
                cmp(gf.get_tc(k).data()[r * m + c], g1.get_tc(k).data()[r]);
                cmp(wf.get_tc(k).data()[c * n + r], w1.get_tc(k).data()[r]);
            }
        }
    }
    let ok = shapes_ok && mismatches == 0;
    report(
        10,
        ok,
        format!("m = {m} random fields per family, p = {p}: {mismatches} of {compared} coefficients differ bitwise (tol 0)"),
    );
    assert!(ok);
}
