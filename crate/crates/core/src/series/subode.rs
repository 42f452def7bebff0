//! Sub-ODE machinery for the elementary functions.
//!
//! A function `v = ψ(u)` whose derivative can be written `ψ'(u) = φ(u, ψ(u))`
//! satisfies `v̇ = φ(u, v) u̇`, and its coefficients follow from one universal
//! recurrence (the `⊙` step) seeded with `v₀ = ψ(u₀)`. Here `φ` is stored as a
//! tiny straight-line program over the four basic arithmetic operations, so
//! every catalog function shares the same incremental engine, including the
//! gradient-augmented variant used by the tape interpreter.

use crate::error::{Error, Result};
use crate::real::Real;

use super::kernels::{self, Arg, Out};

/// One of the four basic arithmetic operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bao {
    Add,
    Sub,
    Mul,
    Div,
}

/// Operand of a `φ` program.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhiArg {
    /// The argument series `u`.
    U,
    /// Component `i` of the result `v`.
    V(usize),
    /// Result of instruction `i` of the program.
    Tmp(usize),
    /// Entry `i` of the constant pool.
    Const(usize),
    /// Component `i` of `v`, negated. Only valid as a `φ` component.
    NegV(usize),
}

/// `Tmp(i) = lhs op rhs`, where `i` is the instruction's position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PhiInstr {
    pub op: Bao,
    pub lhs: PhiArg,
    pub rhs: PhiArg,
}

/// Elementary functions with a sub-ODE definition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ElemFn {
    Exp,
    Expm1,
    Ln,
    Ln1p,
    /// `u^c` for a non-integer exponent (integer powers are products).
    Pow(f64),
    Sqrt,
    NthRoot(u32),
    Sin,
    Cos,
    Tan,
    Asin,
    Acos,
    Atan,
    Sinh,
    Cosh,
    Tanh,
    Asinh,
    Acosh,
    Atanh,
}

impl ElemFn {
    pub fn name(self) -> &'static str {
        match self {
            ElemFn::Exp => "exp",
            ElemFn::Expm1 => "expm1",
            ElemFn::Ln => "log",
            ElemFn::Ln1p => "log1p",
            ElemFn::Pow(_) => "pow",
            ElemFn::Sqrt => "sqrt",
            ElemFn::NthRoot(_) => "nthroot",
            ElemFn::Sin => "sin",
            ElemFn::Cos => "cos",
            ElemFn::Tan => "tan",
            ElemFn::Asin => "asin",
            ElemFn::Acos => "acos",
            ElemFn::Atan => "atan",
            ElemFn::Sinh => "sinh",
            ElemFn::Cosh => "cosh",
            ElemFn::Tanh => "tanh",
            ElemFn::Asinh => "asinh",
            ElemFn::Acosh => "acosh",
            ElemFn::Atanh => "atanh",
        }
    }

    /// Evaluates `ψ` on a plain real, or `None` outside the closed domain.
    pub fn eval<T: Real>(self, u: T) -> Option<T> {
        let (v, out) = seed(self, u)?;
        Some(v[out])
    }
}

type Seed<T> = Box<dyn Fn(T) -> Option<Vec<T>> + Send + Sync>;

/// A sub-ODE `v̇ = φ(u, v) u̇` with seed `v₀ = ψ(u₀)`.
///
/// `width` is the number of components of `v` (two for the paired
/// functions such as `(cos, sin)`); `output` selects the component returned
/// to callers that want a single function.
pub struct SubOde<T> {
    pub name: &'static str,
    pub width: usize,
    pub output: usize,
    pub program: Vec<PhiInstr>,
    /// `φ` component `i` is read from `phi[i]`.
    pub phi: Vec<PhiArg>,
    pub consts: Vec<T>,
    seed: Seed<T>,
}

impl<T: Real> std::fmt::Debug for SubOde<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SubOde")
            .field("name", &self.name)
            .field("width", &self.width)
            .field("program", &self.program)
            .field("phi", &self.phi)
            .field("consts", &self.consts)
            .finish()
    }
}

/// Seed values and output component, `None` outside the closed domain.
pub(crate) fn seed<T: Real>(f: ElemFn, u: T) -> Option<(Vec<T>, usize)> {
    let one = T::one();
    let zero = T::zero();
    let single = |ok: bool, v: T| if ok { Some((vec![v], 0)) } else { None };
    match f {
        ElemFn::Exp => single(true, u.exp()),
        ElemFn::Expm1 => single(true, u.expm1()),
        ElemFn::Ln => single(u > zero, u.ln()),
        ElemFn::Ln1p => single(u > -one, u.ln_1p()),
        ElemFn::Pow(c) => {
            let c = T::from_f64(c);
            single(u > zero || (u == zero && c > zero), u.powf(c))
        }
        ElemFn::Sqrt => single(u >= zero, u.sqrt()),
        ElemFn::NthRoot(n) => single(n >= 1 && (n % 2 == 1 || u >= zero), u.nthroot(n)),
        ElemFn::Sin => Some((vec![u.cos(), u.sin()], 1)),
        ElemFn::Cos => Some((vec![u.cos(), u.sin()], 0)),
        ElemFn::Tan => single(u.cos() != zero, u.tan()),
        ElemFn::Asin => (u.abs() <= one).then(|| (vec![u.asin(), ((one - u) * (one + u)).sqrt()], 0)),
        ElemFn::Acos => (u.abs() <= one).then(|| (vec![u.acos(), ((one - u) * (one + u)).sqrt()], 0)),
        ElemFn::Atan => single(true, u.atan()),
        ElemFn::Sinh => Some((vec![u.cosh(), u.sinh()], 1)),
        ElemFn::Cosh => Some((vec![u.cosh(), u.sinh()], 0)),
        ElemFn::Tanh => single(true, u.tanh()),
        ElemFn::Asinh => Some((vec![u.asinh(), (one + u * u).sqrt()], 0)),
        ElemFn::Acosh => (u >= one).then(|| (vec![u.acosh(), ((u - one) * (u + one)).sqrt()], 0)),
        ElemFn::Atanh => single(u.abs() < one, u.atanh()),
    }
}

use Bao::*;
use PhiArg::*;

fn ins(op: Bao, lhs: PhiArg, rhs: PhiArg) -> PhiInstr {
    PhiInstr { op, lhs, rhs }
}

impl<T: Real> SubOde<T> {
    /// Builds a custom sub-ODE. `seed` returns `ψ(u₀)` (all components) or
    /// `None` outside the domain.
    pub fn new(
        name: &'static str,
        width: usize,
        output: usize,
        program: Vec<PhiInstr>,
        phi: Vec<PhiArg>,
        consts: Vec<T>,
        seed: impl Fn(T) -> Option<Vec<T>> + Send + Sync + 'static,
    ) -> Self {
        assert_eq!(phi.len(), width, "one φ component per result component");
        assert!(output < width);
        assert!(
            program.iter().all(|i| !matches!(i.lhs, NegV(_)) && !matches!(i.rhs, NegV(_))),
            "NegV is only valid as a φ component"
        );
        SubOde {
            name,
            width,
            output,
            program,
            phi,
            consts,
            seed: Box::new(seed),
        }
    }

    /// The sub-ODE of a catalog function.
    pub fn for_fn(f: ElemFn) -> Self {
        let c = T::from_f64;
        // (program, phi, consts)
        let (program, phi, consts): (Vec<PhiInstr>, Vec<PhiArg>, Vec<T>) = match f {
            // φ = v
            ElemFn::Exp => (vec![], vec![V(0)], vec![]),
            // φ = v + 1
            ElemFn::Expm1 => (vec![ins(Add, V(0), Const(0))], vec![Tmp(0)], vec![c(1.0)]),
            // φ = 1/u
            ElemFn::Ln => (vec![ins(Div, Const(0), U)], vec![Tmp(0)], vec![c(1.0)]),
            // φ = 1/(1+u)
            ElemFn::Ln1p => (
                vec![ins(Add, Const(0), U), ins(Div, Const(0), Tmp(0))],
                vec![Tmp(1)],
                vec![c(1.0)],
            ),
            // φ = c v / u
            ElemFn::Pow(e) => (
                vec![ins(Mul, Const(0), V(0)), ins(Div, Tmp(0), U)],
                vec![Tmp(1)],
                vec![c(e)],
            ),
            // φ = (1/2) / v
            ElemFn::Sqrt => (vec![ins(Div, Const(0), V(0))], vec![Tmp(0)], vec![c(0.5)]),
            // φ = v / (n u)
            ElemFn::NthRoot(n) => (
                vec![ins(Mul, Const(0), U), ins(Div, V(0), Tmp(0))],
                vec![Tmp(1)],
                vec![T::from_f64(n as f64)],
            ),
            // v = (cos, sin), φ = (-v₂, v₁)
            ElemFn::Sin | ElemFn::Cos => (vec![], vec![NegV(1), V(0)], vec![]),
            // φ = 1 + v²
            ElemFn::Tan => (
                vec![ins(Mul, V(0), V(0)), ins(Add, Const(0), Tmp(0))],
                vec![Tmp(1)],
                vec![c(1.0)],
            ),
            // v = (asin u, √(1-u²)), φ = (1/v₂, -u/v₂)
            ElemFn::Asin => (
                vec![
                    ins(Div, Const(0), V(1)),
                    ins(Sub, Const(1), U),
                    ins(Div, Tmp(1), V(1)),
                ],
                vec![Tmp(0), Tmp(2)],
                vec![c(1.0), c(0.0)],
            ),
            // v = (acos u, √(1-u²)), φ = (-1/v₂, -u/v₂)
            ElemFn::Acos => (
                vec![
                    ins(Div, Const(0), V(1)),
                    ins(Sub, Const(1), U),
                    ins(Div, Tmp(1), V(1)),
                ],
                vec![Tmp(0), Tmp(2)],
                vec![c(-1.0), c(0.0)],
            ),
            // φ = 1/(1+u²)
            ElemFn::Atan => (
                vec![
                    ins(Mul, U, U),
                    ins(Add, Const(0), Tmp(0)),
                    ins(Div, Const(0), Tmp(1)),
                ],
                vec![Tmp(2)],
                vec![c(1.0)],
            ),
            // v = (cosh, sinh), φ = (v₂, v₁)
            ElemFn::Sinh | ElemFn::Cosh => (vec![], vec![V(1), V(0)], vec![]),
            // φ = 1 - v²
            ElemFn::Tanh => (
                vec![ins(Mul, V(0), V(0)), ins(Sub, Const(0), Tmp(0))],
                vec![Tmp(1)],
                vec![c(1.0)],
            ),
            // v = (asinh u, √(1+u²)) or (acosh u, √(u²-1)), φ = (1/v₂, u/v₂)
            ElemFn::Asinh | ElemFn::Acosh => (
                vec![ins(Div, Const(0), V(1)), ins(Div, U, V(1))],
                vec![Tmp(0), Tmp(1)],
                vec![c(1.0)],
            ),
            // φ = 1/(1-u²)
            ElemFn::Atanh => (
                vec![
                    ins(Mul, U, U),
                    ins(Sub, Const(0), Tmp(0)),
                    ins(Div, Const(0), Tmp(1)),
                ],
                vec![Tmp(2)],
                vec![c(1.0)],
            ),
        };
        let width = phi.len();
        let output = match f {
            ElemFn::Sin | ElemFn::Sinh => 1,
            _ => 0,
        };
        SubOde {
            name: f.name(),
            width,
            output,
            program,
            phi,
            consts,
            seed: Box::new(move |u| seed(f, u).map(|(v, _)| v)),
        }
    }

    /// Seed `ψ(u₀)`, or `None` outside the domain.
    pub fn seed(&self, u0: T) -> Option<Vec<T>> {
        (self.seed)(u0).filter(|v| v.len() == self.width)
    }
}

/// Coefficients and gradients of `count` series of equal order, stored
/// contiguously.
struct Bank<T> {
    len: usize,
    n: usize,
    v: Vec<T>,
    g: Vec<T>,
}

impl<T: Real> Bank<T> {
    fn new(count: usize, len: usize, n: usize) -> Self {
        Bank {
            len,
            n,
            v: vec![T::zero(); count * len],
            g: vec![T::zero(); count * len * n],
        }
    }

    fn values(&self, i: usize) -> &[T] {
        &self.v[i * self.len..(i + 1) * self.len]
    }

    fn grads(&self, i: usize) -> &[T] {
        let w = self.len * self.n;
        &self.g[i * w..(i + 1) * w]
    }

    fn arg(&self, i: usize) -> Arg<'_, T> {
        Arg::series(self.values(i), self.grads(i))
    }
}

/// The operand behind `a` and whether it enters negated.
fn resolve<'a, T: Real>(v: &'a Bank<T>, tmp: &'a Bank<T>, ode: &SubOde<T>, a: PhiArg, u: Arg<'a, T>) -> (Arg<'a, T>, bool) {
    match a {
        U => (u, false),
        V(i) => (v.arg(i), false),
        NegV(i) => (v.arg(i), true),
        Tmp(i) => (tmp.arg(i), false),
        Const(i) => (Arg::Const(ode.consts[i]), false),
    }
}

/// Incremental evaluator of one sub-ODE application: owns the coefficient
/// (and gradient) storage of every `v` component and `φ` temporary.
pub(crate) struct SubOdeState<T> {
    order: usize,
    n: usize,
    v: Bank<T>,
    tmp: Bank<T>,
    scratch_v: Vec<T>,
    scratch_g: Vec<T>,
}

impl<T: Real> SubOdeState<T> {
    pub fn new(ode: &SubOde<T>, order: usize, n: usize) -> Self {
        let len = order + 1;
        SubOdeState {
            order,
            n,
            v: Bank::new(ode.width, len, n),
            tmp: Bank::new(ode.program.len(), len, n),
            scratch_v: vec![T::zero(); ode.width],
            scratch_g: vec![T::zero(); ode.width * n],
        }
    }

    pub fn component(&self, c: usize) -> (&[T], &[T]) {
        (self.v.values(c), self.v.grads(c))
    }

    /// Computes coefficient `k` of every component. `u` must hold
    /// coefficients `0..=k`; calls must come in order `k = 0, 1, ...`.
    pub fn step(&mut self, ode: &SubOde<T>, u: Arg<T>, k: usize) -> Result<()> {
        let n = self.n;
        let len = self.order + 1;
        let domain = |u0: T| Error::Domain {
            function: ode.name,
            value: u0.to_f64(),
        };
        if k == 0 {
            let u0 = u.coeff(0);
            let v0 = ode.seed(u0).ok_or_else(|| domain(u0))?;
            for (c, x) in v0.into_iter().enumerate() {
                if !x.is_finite() {
                    return Err(domain(u0));
                }
                self.v.v[c * len] = x;
            }
            if n > 0 {
                // ∇v₀ = ψ'(u₀) ∇u₀ = φ₀ ∇u₀; φ₀ values only need v₀.
                self.run_program(ode, u, 0, 0).map_err(|_| domain(u0))?;
                for c in 0..ode.width {
                    let (phi, neg) = resolve(&self.v, &self.tmp, ode, ode.phi[c], u);
                    let phi0 = if neg { -phi.coeff(0) } else { phi.coeff(0) };
                    for j in 0..n {
                        let gu = match u {
                            Arg::Series { g, .. } => g[j],
                            Arg::Const(_) => T::zero(),
                        };
                        self.v.g[c * len * n + j] = phi0 * gu;
                    }
                }
            }
        } else {
            for c in 0..ode.width {
                let (phi, neg) = resolve(&self.v, &self.tmp, ode, ode.phi[c], u);
                if n == 0 {
                    let x = kernels::odot_value(u, phi, k);
                    self.scratch_v[c] = if neg { -x } else { x };
                } else {
                    let (sv, sg) = (&mut self.scratch_v[c], &mut self.scratch_g[c * n..(c + 1) * n]);
                    kernels::odot(u, phi, k, n, sv, sg);
                    if neg {
                        *sv = -*sv;
                        sg.iter_mut().for_each(|x| *x = -*x);
                    }
                }
            }
            for c in 0..ode.width {
                self.v.v[c * len + k] = self.scratch_v[c];
                if n > 0 {
                    let at = (c * len + k) * n;
                    self.v.g[at..at + n].copy_from_slice(&self.scratch_g[c * n..(c + 1) * n]);
                }
            }
        }
        // φ_k is consumed only by v_{k+1}
        if k < self.order && !ode.program.is_empty() {
            self.run_program(ode, u, k, n)
                .map_err(|_| domain(u.coeff(0)))?;
        }
        Ok(())
    }

    fn run_program(&mut self, ode: &SubOde<T>, u: Arg<T>, k: usize, n: usize) -> Result<()> {
        let len = self.order + 1;
        let (gw, v) = (len * n, &self.v);
        for (i, instr) in ode.program.iter().enumerate() {
            let (done_v, rest_v) = self.tmp.v.split_at_mut(i * len);
            let (done_g, rest_g) = self.tmp.g.split_at_mut(i * gw);
            let resolve = |a: PhiArg| -> Arg<T> {
                match a {
                    U => u,
                    V(c) => v.arg(c),
                    NegV(_) => unreachable!("rejected when the sub-ODE is built"),
                    Tmp(j) => Arg::series(&done_v[j * len..(j + 1) * len], &done_g[j * gw..(j + 1) * gw]),
                    Const(j) => Arg::Const(ode.consts[j]),
                }
            };
            let (a, b) = (resolve(instr.lhs), resolve(instr.rhs));
            let w = &mut rest_v[..len];
            if n == 0 {
                w[k] = match instr.op {
                    Add => a.coeff(k) + b.coeff(k),
                    Sub => a.coeff(k) - b.coeff(k),
                    Mul => kernels::mul_value(a, b, k),
                    Div => kernels::div_value(a, b, w, k)?,
                };
                continue;
            }
            let mut out = Out::new(w, &mut rest_g[..gw]);
            match instr.op {
                Add => kernels::add(a, b, &mut out, k, n),
                Sub => kernels::sub(a, b, &mut out, k, n),
                Mul => kernels::mul(a, b, &mut out, k, n),
                Div => kernels::div(a, b, &mut out, k, n)?,
            }
        }
        Ok(())
    }
}

/// Coefficient and gradient storage of one auxiliary series.
struct Buf<T> {
    v: Vec<T>,
    g: Vec<T>,
}

impl<T: Real> Buf<T> {
    fn new(len: usize, n: usize) -> Self {
        Buf {
            v: vec![T::zero(); len],
            g: vec![T::zero(); len * n],
        }
    }

    fn arg(&self) -> Arg<'_, T> {
        Arg::series(&self.v, &self.g)
    }

    fn out(&mut self) -> Out<'_, T> {
        Out::new(&mut self.v, &mut self.g)
    }
}

/// Incremental `atan2(y, x)`: `v₀ = atan2(y₀, x₀)` and `v_k = d_{k-1} / k`
/// with `d = (x ẏ - y ẋ) / (x² + y²)`, all built from basic operations.
pub(crate) struct Atan2State<T> {
    order: usize,
    n: usize,
    v: Buf<T>,
    dy: Buf<T>,
    dx: Buf<T>,
    xx: Buf<T>,
    yy: Buf<T>,
    r: Buf<T>,
    xdy: Buf<T>,
    ydx: Buf<T>,
    num: Buf<T>,
    d: Buf<T>,
}

fn grad0<T: Real>(a: Arg<T>, j: usize) -> T {
    match a {
        Arg::Series { g, .. } => g[j],
        Arg::Const(_) => T::zero(),
    }
}

impl<T: Real> Atan2State<T> {
    pub fn new(order: usize, n: usize) -> Self {
        let len = order + 1;
        Atan2State {
            order,
            n,
            v: Buf::new(len, n),
            dy: Buf::new(len, n),
            dx: Buf::new(len, n),
            xx: Buf::new(len, n),
            yy: Buf::new(len, n),
            r: Buf::new(len, n),
            xdy: Buf::new(len, n),
            ydx: Buf::new(len, n),
            num: Buf::new(len, n),
            d: Buf::new(len, n),
        }
    }

    pub fn result(&self) -> (&[T], &[T]) {
        (&self.v.v, &self.v.g)
    }

    /// Coefficient `j` of the time derivative: `ẏ_j = (j+1) y_{j+1}`.
    fn derivative(src: Arg<T>, dst: &mut Buf<T>, j: usize, n: usize) {
        let f = T::from_usize(j + 1);
        dst.v[j] = f * src.coeff(j + 1);
        let row = &mut dst.g[j * n..(j + 1) * n];
        match src {
            Arg::Series { g, .. } => {
                for (o, x) in row.iter_mut().zip(&g[(j + 1) * n..(j + 2) * n]) {
                    *o = f * *x;
                }
            }
            Arg::Const(_) => row.fill(T::zero()),
        }
    }

    pub fn step(&mut self, y: Arg<T>, x: Arg<T>, k: usize) -> Result<()> {
        let n = self.n;
        let (y0, x0) = (y.coeff(0), x.coeff(0));
        let r0 = x0 * x0 + y0 * y0;
        let domain = || Error::Domain {
            function: "atan2",
            value: r0.to_f64(),
        };
        if k == 0 {
            if r0 == T::zero() && (n > 0 || self.order > 0) {
                return Err(domain());
            }
            self.v.v[0] = y0.atan2(x0);
            for j in 0..n {
                self.v.g[j] = (x0 * grad0(y, j) - y0 * grad0(x, j)) / r0;
            }
            return Ok(());
        }
        let j = k - 1;
        Self::derivative(y, &mut self.dy, j, n);
        Self::derivative(x, &mut self.dx, j, n);
        kernels::mul(x, x, &mut self.xx.out(), j, n);
        kernels::mul(y, y, &mut self.yy.out(), j, n);
        kernels::add(self.xx.arg(), self.yy.arg(), &mut self.r.out(), j, n);
        kernels::mul(x, self.dy.arg(), &mut self.xdy.out(), j, n);
        kernels::mul(y, self.dx.arg(), &mut self.ydx.out(), j, n);
        kernels::sub(self.xdy.arg(), self.ydx.arg(), &mut self.num.out(), j, n);
        kernels::div(self.num.arg(), self.r.arg(), &mut self.d.out(), j, n).map_err(|_| domain())?;
        let inv_k = T::one() / T::from_usize(k);
        self.v.v[k] = self.d.v[j] * inv_k;
        for jj in 0..n {
            self.v.g[k * n + jj] = self.d.g[j * n + jj] * inv_k;
        }
        Ok(())
    }
}
