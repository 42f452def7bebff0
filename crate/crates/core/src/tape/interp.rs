use super::{CodeList, Opcode, Operand};
use crate::array::{CoeffArray, TaylorArray};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::series::kernels::{self, Arg, Out};
use crate::series::subode::{Atan2State, SubOdeState};
use crate::series::{common_order, SubOde, TaylorScalar};

enum State<T> {
    Plain,
    Sub(SubOde<T>, SubOdeState<T>),
    Atan2(Atan2State<T>),
}

/// Value table of one interpretation: coefficients `0..=p` of every slot
/// and, with gradient width `n > 0`, a dense gradient per coefficient.
struct Interp<'c, T> {
    code: &'c CodeList,
    len: usize,
    n: usize,
    consts: Vec<T>,
    vals: Vec<T>,
    grads: Vec<T>,
    states: Vec<State<T>>,
}

impl<'c, T: Real> Interp<'c, T> {
    fn new(code: &'c CodeList, p: usize, n: usize) -> Self {
        let len = p + 1;
        let states = code
            .instructions
            .iter()
            .map(|ins| match ins.op {
                Opcode::Elem(f) => {
                    let ode = SubOde::for_fn(f);
                    let st = SubOdeState::new(&ode, p, n);
                    State::Sub(ode, st)
                }
                Opcode::Atan2 => State::Atan2(Atan2State::new(p, n)),
                _ => State::Plain,
            })
            .collect();
        Interp {
            code,
            len,
            n,
            consts: code.consts.iter().map(|&c| T::from_f64(c)).collect(),
            vals: vec![T::zero(); code.n_slots() * len],
            grads: vec![T::zero(); code.n_slots() * len * n],
            states,
        }
    }

    fn input_mut(&mut self, i: usize) -> (&mut [T], &mut [T]) {
        let (len, n) = (self.len, self.n);
        (
            &mut self.vals[i * len..(i + 1) * len],
            &mut self.grads[i * len * n..(i + 1) * len * n],
        )
    }

    /// Coefficient `k` and its gradient row for an operand.
    fn read(&self, o: Operand, k: usize) -> (T, &[T]) {
        let (len, n) = (self.len, self.n);
        match o {
            Operand::Slot(s) => (
                self.vals[s * len + k],
                &self.grads[(s * len + k) * n..(s * len + k + 1) * n],
            ),
            Operand::Const(_) => (if k == 0 { self.const_value(o) } else { T::zero() }, &[]),
        }
    }

    fn const_value(&self, o: Operand) -> T {
        match o {
            Operand::Const(c) => self.consts[c],
            Operand::Slot(_) => unreachable!(),
        }
    }

    /// Coefficient `k` of every instruction, values only.
    fn pass_values(&mut self, k: usize) -> Result<()> {
        let Interp {
            code,
            len,
            consts,
            vals,
            states,
            ..
        } = self;
        let (code, len) = (*code, *len);
        for (i, ins) in code.instructions.iter().enumerate() {
            let o = (code.n_inputs + i) * len;
            let v = {
                let arg = |op: Operand| -> Arg<T> {
                    match op {
                        Operand::Slot(s) => Arg::series(&vals[s * len..(s + 1) * len], &[]),
                        Operand::Const(c) => Arg::Const(consts[c]),
                    }
                };
                let a = arg(ins.lhs);
                let b = || arg(ins.rhs.expect("binary opcode"));
                let r = match (ins.op, &mut states[i]) {
                    (Opcode::Add, _) => Ok(a.coeff(k) + b().coeff(k)),
                    (Opcode::Sub, _) => Ok(a.coeff(k) - b().coeff(k)),
                    (Opcode::Neg, _) => Ok(T::zero() - a.coeff(k)),
                    (Opcode::Mul, _) => Ok(kernels::mul_value(a, b(), k)),
                    (Opcode::Div, _) => kernels::div_value(a, b(), &vals[o..o + k], k),
                    (Opcode::Elem(_), State::Sub(ode, st)) => {
                        st.step(ode, a, k).map(|()| st.component(ode.output).0[k])
                    }
                    (Opcode::Atan2, State::Atan2(st)) => st.step(a, b(), k).map(|()| st.result().0[k]),
                    _ => unreachable!("state prepared per opcode"),
                };
                r.map_err(|e| e.at_instruction(i))?
            };
            if !v.is_finite() {
                return Err(Error::NonFiniteCoefficient.at_instruction(i));
            }
            vals[o + k] = v;
        }
        Ok(())
    }

    /// Computes coefficient `k` of every instruction.
    fn pass(&mut self, k: usize) -> Result<()> {
        if self.n == 0 {
            return self.pass_values(k);
        }
        let (len, n, code) = (self.len, self.n, self.code);
        for (i, ins) in code.instructions.iter().enumerate() {
            let n_in = code.n_inputs;
            let slot = n_in + i;
            let (before_v, rest_v) = self.vals.split_at_mut(slot * len);
            let (before_g, rest_g) = self.grads.split_at_mut(slot * len * n);
            let consts = &self.consts;
            let arg = |o: Operand| -> Arg<T> {
                match o {
                    Operand::Slot(s) => Arg::series(
                        &before_v[s * len..(s + 1) * len],
                        &before_g[s * len * n..(s + 1) * len * n],
                    ),
                    Operand::Const(c) => Arg::Const(consts[c]),
                }
            };
            let a = arg(ins.lhs);
            let b = ins.rhs.map(arg);
            let mut out = Out::new(&mut rest_v[..len], &mut rest_g[..len * n]);
            let r = match (ins.op, &mut self.states[i]) {
                (Opcode::Add, _) => {
                    kernels::add(a, b.unwrap(), &mut out, k, n);
                    Ok(())
                }
                (Opcode::Sub, _) => {
                    kernels::sub(a, b.unwrap(), &mut out, k, n);
                    Ok(())
                }
                (Opcode::Mul, _) => {
                    kernels::mul(a, b.unwrap(), &mut out, k, n);
                    Ok(())
                }
                (Opcode::Div, _) => kernels::div(a, b.unwrap(), &mut out, k, n),
                (Opcode::Neg, _) => {
                    kernels::neg(a, &mut out, k, n);
                    Ok(())
                }
                (Opcode::Elem(_), State::Sub(ode, st)) => st.step(ode, a, k).map(|()| {
                    let (v, g) = st.component(ode.output);
                    out.v[k] = v[k];
                    out.g[k * n..(k + 1) * n].copy_from_slice(&g[k * n..(k + 1) * n]);
                }),
                (Opcode::Atan2, State::Atan2(st)) => st.step(a, b.unwrap(), k).map(|()| {
                    let (v, g) = st.result();
                    out.v[k] = v[k];
                    out.g[k * n..(k + 1) * n].copy_from_slice(&g[k * n..(k + 1) * n]);
                }),
                _ => unreachable!("state prepared per opcode"),
            };
            r.map_err(|e| e.at_instruction(i))?;
            if !out.v[k].is_finite() || !out.g[k * n..(k + 1) * n].iter().all(|x| x.is_finite()) {
                return Err(Error::NonFiniteCoefficient.at_instruction(i));
            }
        }
        Ok(())
    }
}

/// Taylor coefficients `x_0..x_p` of the solution of `ẋ = f(x)`, `x(0) = x₀`,
/// optionally with their gradients `∂x_k/∂x₀`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedCoefficients<T = f64> {
    pub order: usize,
    /// `x_coeffs[k]` is the n-vector `x_k`.
    pub x_coeffs: Vec<Vec<T>>,
    /// `grads[k]` is the row-major n×n matrix `∂x_k/∂x₀`.
    pub grads: Option<Vec<Vec<T>>>,
}

impl<T: Real> GradedCoefficients<T> {
    pub fn dim(&self) -> usize {
        self.x_coeffs[0].len()
    }

    /// `x(t)` as an array of shape `[n]`.
    pub fn x(&self) -> TaylorArray<T> {
        let n = self.dim();
        let tcs: Vec<CoeffArray<T>> = self
            .x_coeffs
            .iter()
            .map(|c| CoeffArray::new(vec![n], c.clone()).expect("n-vector"))
            .collect();
        TaylorArray::from_coeff_arrays(&tcs).expect("finite coefficients")
    }

    /// `J(t) = ∂x(t)/∂x₀` as an array of shape `[n, n]`.
    pub fn jacobian(&self) -> Option<TaylorArray<T>> {
        let n = self.dim();
        let tcs: Vec<CoeffArray<T>> = self
            .grads
            .as_ref()?
            .iter()
            .map(|g| CoeffArray::new(vec![n, n], g.clone()).expect("n×n matrix"))
            .collect();
        Some(TaylorArray::from_coeff_arrays(&tcs).expect("finite coefficients"))
    }
}

fn check_field(code: &CodeList, n: usize) -> Result<()> {
    if code.n_outputs() != code.n_inputs || code.n_inputs != n {
        return Err(Error::ShapeMismatch(format!(
            "field maps {} inputs to {} outputs, state has dimension {n}",
            code.n_inputs,
            code.n_outputs()
        )));
    }
    Ok(())
}

/// Interpreter state after integrating the ODE to order `p`.
pub(crate) struct Flow<'c, T> {
    it: Interp<'c, T>,
    dim: usize,
    p: usize,
}

impl<T: Real> Flow<'_, T> {
    /// `x(t)` as an array of shape `[n]`.
    pub fn x(&self) -> Result<TaylorArray<T>> {
        let len = self.p + 1;
        let elems = (0..self.dim)
            .map(|i| TaylorScalar::new(self.it.vals[i * len..(i + 1) * len].to_vec()))
            .collect::<Result<Vec<_>>>()?;
        TaylorArray::new(vec![self.dim], elems)
    }

    /// `J(t)` as an array of shape `[n, n]`, when gradients were carried.
    pub fn jacobian(&self) -> Option<Result<TaylorArray<T>>> {
        let (n, len) = (self.it.n, self.p + 1);
        if n == 0 {
            return None;
        }
        let g = &self.it.grads;
        let elems = (0..n * n).map(|e| {
            let (i, j) = (e / n, e % n);
            TaylorScalar::new((0..len).map(|k| g[(i * len + k) * n + j]).collect())
        });
        Some(elems.collect::<Result<Vec<_>>>().and_then(|e| TaylorArray::new(vec![n, n], e)))
    }

    fn graded(&self) -> GradedCoefficients<T> {
        let (dim, n, len) = (self.dim, self.it.n, self.p + 1);
        let it = &self.it;
        let x_coeffs = (0..len).map(|k| (0..dim).map(|i| it.vals[i * len + k]).collect()).collect();
        let grads = (n > 0).then(|| {
            (0..len)
                .map(|k| {
                    (0..dim)
                        .flat_map(|i| it.grads[(i * len + k) * n..(i * len + k + 1) * n].iter().copied())
                        .collect()
                })
                .collect()
        });
        GradedCoefficients {
            order: self.p,
            x_coeffs,
            grads,
        }
    }
}

/// Runs the order-by-order recurrence `x_{k+1} = f_k / (k + 1)`.
pub(crate) fn integrate<'c, T: Real>(code: &'c CodeList, x0: &[T], p: usize, want_jacobian: bool) -> Result<Flow<'c, T>> {
    let dim = x0.len();
    check_field(code, dim)?;
    if !x0.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFiniteCoefficient);
    }
    let n = if want_jacobian { dim } else { 0 };
    let mut it = Interp::new(code, p, n);
    for (i, &x) in x0.iter().enumerate() {
        let (v, g) = it.input_mut(i);
        v[0] = x;
        if n > 0 {
            g[i] = T::one();
        }
    }
    let mut fk = vec![T::zero(); dim];
    let mut gk = vec![T::zero(); dim * n];
    for k in 0..p {
        it.pass(k)?;
        let d = T::from_usize(k + 1);
        for (r, &o) in code.outputs.iter().enumerate() {
            let (v, g) = it.read(o, k);
            fk[r] = v / d;
            for j in 0..n {
                gk[r * n + j] = g.get(j).map_or(T::zero(), |&x| x / d);
            }
        }
        for r in 0..dim {
            let (v, g) = it.input_mut(r);
            v[k + 1] = fk[r];
            g[(k + 1) * n..(k + 2) * n].copy_from_slice(&gk[r * n..(r + 1) * n]);
        }
    }
    Ok(Flow { it, dim, p })
}

/// Taylor coefficients of the ODE solution through `x0`, one interpretation
/// pass per order, with `x_{k+1} = f_k / (k + 1)`.
pub fn taylcoeffs<T: Real>(code: &CodeList, x0: &[T], p: usize, want_jacobian: bool) -> Result<GradedCoefficients<T>> {
    Ok(integrate(code, x0, p, want_jacobian)?.graded())
}

fn run_eval<'c, T: Real>(code: &'c CodeList, x: &[TaylorScalar<T>], n: usize) -> Result<(Interp<'c, T>, usize)> {
    if x.len() != code.n_inputs {
        return Err(Error::ShapeMismatch(format!(
            "code list has {} inputs, got {}",
            code.n_inputs,
            x.len()
        )));
    }
    let p = x.iter().try_fold(0, |p, s| common_order(p, s.order()))?;
    let mut it = Interp::new(code, p, n);
    for (i, s) in x.iter().enumerate() {
        let (v, g) = it.input_mut(i);
        v[..=s.order()].copy_from_slice(s.coeffs());
        if n > 0 {
            g[i] = T::one();
        }
    }
    for k in 0..=p {
        it.pass(k)?;
    }
    Ok((it, p))
}

fn output_series<T: Real>(it: &Interp<'_, T>, p: usize) -> Result<Vec<TaylorScalar<T>>> {
    it.code
        .outputs
        .iter()
        .map(|&o| TaylorScalar::new((0..=p).map(|k| it.read(o, k).0).collect()))
        .collect()
}

/// Evaluates the code list on input series (equal orders, or order 0).
pub fn eval_series<T: Real>(code: &CodeList, x: &[TaylorScalar<T>]) -> Result<Vec<TaylorScalar<T>>> {
    let (it, p) = run_eval(code, x, 0)?;
    output_series(&it, p)
}

/// Evaluates the code list and the Taylor coefficients of its Jacobian
/// along the input series: entry `(r, j)` of the returned `[m, n]` array is
/// the series of `∂f_r/∂x_j` evaluated at `x(t)`.
pub fn eval_series_jacobian<T: Real>(
    code: &CodeList,
    x: &[TaylorScalar<T>],
) -> Result<(Vec<TaylorScalar<T>>, TaylorArray<T>)> {
    let n = code.n_inputs;
    let (it, p) = run_eval(code, x, n)?;
    let m = code.n_outputs();
    let mut tcs = Vec::with_capacity(p + 1);
    for k in 0..=p {
        let mut data = vec![T::zero(); m * n];
        for (r, &o) in code.outputs.iter().enumerate() {
            let (_, g) = it.read(o, k);
            if !g.is_empty() {
                data[r * n..(r + 1) * n].copy_from_slice(g);
            }
        }
        tcs.push(CoeffArray::new(vec![m, n], data)?);
    }
    Ok((output_series(&it, p)?, TaylorArray::from_coeff_arrays(&tcs)?))
}

/// Plain evaluation `f(x)`.
pub fn eval_point<T: Real>(code: &CodeList, x: &[T]) -> Result<Vec<T>> {
    let xs: Vec<TaylorScalar<T>> = x.iter().map(|&v| TaylorScalar::new(vec![v])).collect::<Result<_>>()?;
    Ok(eval_series(code, &xs)?.into_iter().map(|s| s.coeff(0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elementary::Elementary;
    use crate::tape::record;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-15 * b.abs().max(1.0)
    }

    #[test]
    fn exponential_flow() {
        let code = record(1, |x| Ok(vec![x[0].clone()])).unwrap();
        let c = 1.7;
        let g = taylcoeffs(&code, &[c], 4, true).unwrap();
        let fact = [1.0, 1.0, 2.0, 6.0, 24.0];
        for (k, f) in fact.iter().enumerate() {
            assert!(close(g.x_coeffs[k][0], c / f));
            assert!(close(g.grads.as_ref().unwrap()[k][0], 1.0 / f));
        }
    }

    #[test]
    fn harmonic_oscillator() {
        let code = record(2, |x| Ok(vec![x[1].clone(), -x[0].clone()])).unwrap();
        assert_eq!(eval_point(&code, &[3.0, 4.0]).unwrap(), vec![4.0, -3.0]);
        let g = taylcoeffs(&code, &[1.0, 0.0], 3, true).unwrap();
        let x1: Vec<f64> = g.x_coeffs.iter().map(|c| c[0]).collect();
        assert_eq!(x1, vec![1.0, 0.0, -0.5, 0.0]);
        // J(t) = [[cos t, sin t], [-sin t, cos t]]
        let j = g.grads.unwrap();
        assert_eq!(j[0], vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(j[1], vec![0.0, 1.0, -1.0, 0.0]);
        assert_eq!(j[2], vec![-0.5, 0.0, 0.0, -0.5]);
        assert!(close(j[3][1], -1.0 / 6.0) && close(j[3][2], 1.0 / 6.0));
    }

    #[test]
    fn square_flow_gradients_follow_hand_recurrence() {
        // ẋ = x²: x_{k+1} = (x²)_k/(k+1) gives x_k = c^{k+1}, ∂x_k/∂c = (k+1) c^k
        let code = record(1, |x| Ok(vec![x[0].clone() * x[0].clone()])).unwrap();
        let c = 0.6;
        let g = taylcoeffs(&code, &[c], 6, true).unwrap();
        for k in 0..=6 {
            assert!(close(g.x_coeffs[k][0], c.powi(k as i32 + 1)));
            assert!(close(g.grads.as_ref().unwrap()[k][0], (k + 1) as f64 * c.powi(k as i32)));
        }
    }

    #[test]
    fn values_agree_with_and_without_gradients() {
        let code = record(3, |x| {
            let q = x[0].try_div(&(x[1].clone() * x[1].clone() + x[0].constant_like(2.0)))?;
            Ok(vec![q, x[2].atan2(&x[0])?, -x[1].sin()? * x[2].exp()?])
        })
        .unwrap();
        let x0 = [0.4, -0.9, 0.3];
        let plain = taylcoeffs(&code, &x0, 12, false).unwrap();
        let graded = taylcoeffs(&code, &x0, 12, true).unwrap();
        let bits = |g: &GradedCoefficients| -> Vec<u64> { g.x_coeffs.iter().flatten().map(|v| v.to_bits()).collect() };
        assert_eq!(bits(&plain), bits(&graded));
        assert_eq!(plain.x(), integrate(&code, &x0, 12, false).unwrap().x().unwrap());
        assert_eq!(graded.jacobian(), integrate(&code, &x0, 12, true).unwrap().jacobian().transpose().unwrap());
    }

    #[test]
    fn truncation_consistency_and_determinism() {
        let code = record(2, |x| Ok(vec![x[1].sin()?, x[0].clone() * x[1].exp()?])).unwrap();
        let a = taylcoeffs(&code, &[0.3, -0.2], 8, true).unwrap();
        let b = taylcoeffs(&code, &[0.3, -0.2], 5, true).unwrap();
        assert_eq!(&a.x_coeffs[..=5], &b.x_coeffs[..]);
        assert_eq!(&a.grads.as_ref().unwrap()[..=5], &b.grads.as_ref().unwrap()[..]);
        assert_eq!(a, taylcoeffs(&code, &[0.3, -0.2], 8, true).unwrap());
    }

    #[test]
    fn errors_carry_instruction_index() {
        let code = record(1, |x| Ok(vec![(x[0].clone() - x[0].constant_like(1.0)).ln()?])).unwrap();
        let e = taylcoeffs(&code, &[0.5], 3, false).unwrap_err();
        assert!(matches!(e, Error::Instruction { index: 1, .. }));
        assert!(matches!(e.root(), Error::Domain { function: "log", .. }));

        let blowup = record(1, |x| Ok(vec![x[0].clone().exp()?.exp()?])).unwrap();
        let e = taylcoeffs(&blowup, &[6.0], 3, false).unwrap_err();
        assert_eq!(e.root(), &Error::NonFiniteCoefficient);
    }

    #[test]
    fn jacobian_along_series() {
        // f = (x0 x1, sin x0); f' = [[x1, x0], [cos x0, 0]]
        let code = record(2, |x| Ok(vec![x[0].clone() * x[1].clone(), x[0].sin()?])).unwrap();
        let xs = [TaylorScalar::variable(0.5, 3), TaylorScalar::new(vec![2.0, 0.0, 1.0, 0.0]).unwrap()];
        let (f, a) = eval_series_jacobian(&code, &xs).unwrap();
        assert_eq!(f[0], xs[0].try_mul(&xs[1]).unwrap());
        assert_eq!(a.index(&[0, 0]).unwrap(), &xs[1]);
        assert_eq!(a.index(&[0, 1]).unwrap(), &xs[0]);
        assert_eq!(a.index(&[1, 0]).unwrap(), &xs[0].cos().unwrap());
        assert_eq!(a.index(&[1, 1]).unwrap().coeffs(), &[0.0; 4]);
    }
}
