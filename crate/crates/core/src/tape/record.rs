use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::rc::Rc;

use super::{CodeList, Instruction, Opcode, Operand};
use crate::elementary::Elementary;
use crate::error::{Error, Result};
use crate::series::ElemFn;

/// Shared state of one recording.
#[derive(Default)]
pub struct Recorder {
    consts: Vec<f64>,
    const_index: HashMap<u64, usize>,
    instructions: Vec<Instruction>,
    seen: HashMap<InstrKey, usize>,
    n_inputs: usize,
    poisoned: Option<String>,
}

impl Recorder {
    fn constant(&mut self, c: f64) -> Operand {
        let next = self.consts.len();
        let i = *self.const_index.entry(c.to_bits()).or_insert(next);
        if i == next {
            self.consts.push(c);
        }
        Operand::Const(i)
    }

    /// Appends an instruction, or returns the slot of an identical earlier one.
    fn push(&mut self, op: Opcode, lhs: Operand, rhs: Option<Operand>) -> usize {
        let key = InstrKey::new(op, lhs, rhs);
        if let Some(&slot) = self.seen.get(&key) {
            return slot;
        }
        self.instructions.push(Instruction { op, lhs, rhs });
        let slot = self.n_inputs + self.instructions.len() - 1;
        self.seen.insert(key, slot);
        slot
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct InstrKey {
    name: &'static str,
    param: u64,
    lhs: Operand,
    rhs: Option<Operand>,
}

impl InstrKey {
    fn new(op: Opcode, lhs: Operand, rhs: Option<Operand>) -> Self {
        let param = match op {
            Opcode::Elem(ElemFn::Pow(c)) => c.to_bits(),
            Opcode::Elem(ElemFn::NthRoot(n)) => u64::from(n),
            _ => 0,
        };
        InstrKey {
            name: op.name(),
            param,
            lhs,
            rhs,
        }
    }
}

/// Value seen by a field while it is being recorded: either a constant,
/// folded immediately, or a slot of the code list under construction.
#[derive(Clone)]
pub enum Tracer {
    Const(f64),
    Var { rec: Rc<RefCell<Recorder>>, slot: usize },
}

impl fmt::Debug for Tracer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tracer::Const(c) => write!(f, "Const({c})"),
            Tracer::Var { slot, .. } => write!(f, "v{slot}"),
        }
    }
}

impl Tracer {
    fn recorder(&self) -> Option<&Rc<RefCell<Recorder>>> {
        match self {
            Tracer::Var { rec, .. } => Some(rec),
            Tracer::Const(_) => None,
        }
    }

    fn operand(&self, rec: &mut Recorder) -> Operand {
        match self {
            Tracer::Const(c) => rec.constant(*c),
            Tracer::Var { slot, .. } => Operand::Slot(*slot),
        }
    }

    fn emit(op: Opcode, a: &Tracer, b: Option<&Tracer>) -> Tracer {
        let rc = a
            .recorder()
            .or_else(|| b.and_then(Tracer::recorder))
            .expect("emit needs a traced operand")
            .clone();
        let slot = {
            let mut rec = rc.borrow_mut();
            let lhs = a.operand(&mut rec);
            let rhs = b.map(|b| b.operand(&mut rec));
            rec.push(op, lhs, rhs)
        };
        Tracer::Var { rec: rc, slot }
    }

    /// The folded value, when this is a constant.
    pub fn as_const(&self) -> Option<f64> {
        match self {
            Tracer::Const(c) => Some(*c),
            Tracer::Var { .. } => None,
        }
    }

    fn poison(&self, what: &str) {
        if let Some(rc) = self.recorder() {
            rc.borrow_mut().poisoned.get_or_insert_with(|| what.to_string());
        }
    }

    pub fn abs(&self) -> Tracer {
        self.poison("abs");
        match self {
            Tracer::Const(c) => Tracer::Const(c.abs()),
            v => v.clone(),
        }
    }

    pub fn min(&self, other: &Tracer) -> Tracer {
        self.poison("min");
        other.poison("min");
        match (self, other) {
            (Tracer::Const(a), Tracer::Const(b)) => Tracer::Const(a.min(*b)),
            (v, _) => v.clone(),
        }
    }

    pub fn max(&self, other: &Tracer) -> Tracer {
        self.poison("max");
        other.poison("max");
        match (self, other) {
            (Tracer::Const(a), Tracer::Const(b)) => Tracer::Const(a.max(*b)),
            (v, _) => v.clone(),
        }
    }
}

/// Comparing traced values would bake one branch into the code list, so it
/// marks the recording as failed.
impl PartialEq for Tracer {
    fn eq(&self, other: &Tracer) -> bool {
        self.poison("comparison");
        other.poison("comparison");
        matches!((self, other), (Tracer::Const(a), Tracer::Const(b)) if a == b)
    }
}

impl PartialOrd for Tracer {
    fn partial_cmp(&self, other: &Tracer) -> Option<Ordering> {
        self.poison("comparison");
        other.poison("comparison");
        match (self, other) {
            (Tracer::Const(a), Tracer::Const(b)) => a.partial_cmp(b),
            _ => Some(Ordering::Equal),
        }
    }
}

macro_rules! tracer_binop {
    ($tr:ident, $method:ident, $op:expr) => {
        impl $tr for Tracer {
            type Output = Tracer;
            fn $method(self, rhs: Tracer) -> Tracer {
                match (&self, &rhs) {
                    (Tracer::Const(a), Tracer::Const(b)) => Tracer::Const(a.$method(*b)),
                    _ => Tracer::emit($op, &self, Some(&rhs)),
                }
            }
        }
    };
}

tracer_binop!(Add, add, Opcode::Add);
tracer_binop!(Sub, sub, Opcode::Sub);

impl Mul for Tracer {
    type Output = Tracer;
    fn mul(self, rhs: Tracer) -> Tracer {
        match (&self, &rhs) {
            (Tracer::Const(a), Tracer::Const(b)) => Tracer::Const(a * b),
            (Tracer::Const(c), _) if *c == 1.0 => rhs,
            (_, Tracer::Const(c)) if *c == 1.0 => self,
            _ => Tracer::emit(Opcode::Mul, &self, Some(&rhs)),
        }
    }
}

impl Neg for Tracer {
    type Output = Tracer;
    fn neg(self) -> Tracer {
        match self {
            Tracer::Const(c) => Tracer::Const(-c),
            v => Tracer::emit(Opcode::Neg, &v, None),
        }
    }
}

impl Elementary for Tracer {
    fn constant_like(&self, c: f64) -> Self {
        Tracer::Const(c)
    }

    fn try_div(&self, rhs: &Self) -> Result<Self> {
        match (self, rhs) {
            (Tracer::Const(a), Tracer::Const(b)) => a.try_div(b).map(Tracer::Const),
            (_, Tracer::Const(b)) if *b == 0.0 => Err(Error::DivisionByZeroConstantTerm),
            (_, Tracer::Const(b)) if *b == 1.0 => Ok(self.clone()),
            _ => Ok(Tracer::emit(Opcode::Div, self, Some(rhs))),
        }
    }

    fn apply(&self, f: ElemFn) -> Result<Self> {
        match self {
            Tracer::Const(c) => Elementary::apply(c, f).map(Tracer::Const),
            v => Ok(Tracer::emit(Opcode::Elem(f), v, None)),
        }
    }

    fn powi(&self, e: i32) -> Result<Self> {
        if let Tracer::Const(c) = self {
            return Elementary::powi(c, e).map(Tracer::Const);
        }
        let mut base = self.clone();
        let mut acc: Option<Tracer> = None;
        let mut m = e.unsigned_abs();
        while m > 0 {
            if m & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a * base.clone(),
                });
            }
            m >>= 1;
            if m > 0 {
                base = base.clone() * base;
            }
        }
        let acc = acc.unwrap_or(Tracer::Const(1.0));
        if e < 0 {
            Tracer::Const(1.0).try_div(&acc)
        } else {
            Ok(acc)
        }
    }

    fn atan2(&self, x: &Self) -> Result<Self> {
        match (self, x) {
            (Tracer::Const(a), Tracer::Const(b)) => Elementary::atan2(a, b).map(Tracer::Const),
            _ => Ok(Tracer::emit(Opcode::Atan2, self, Some(x))),
        }
    }
}

/// Records `f` evaluated on `n_inputs` traced inputs.
pub fn record(n_inputs: usize, f: impl FnOnce(&[Tracer]) -> Result<Vec<Tracer>>) -> Result<CodeList> {
    let rc = Rc::new(RefCell::new(Recorder {
        n_inputs,
        ..Recorder::default()
    }));
    let inputs: Vec<Tracer> = (0..n_inputs)
        .map(|slot| Tracer::Var { rec: rc.clone(), slot })
        .collect();
    let outs = f(&inputs)?;
    let mut rec = rc.borrow_mut();
    if let Some(what) = rec.poisoned.take() {
        return Err(Error::UnsupportedOperation(what));
    }
    let outputs = outs.iter().map(|t| t.operand(&mut rec)).collect();
    Ok(CodeList {
        n_inputs,
        consts: std::mem::take(&mut rec.consts),
        instructions: std::mem::take(&mut rec.instructions),
        outputs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_field_records_one_negation() {
        let code = record(2, |x| Ok(vec![x[1].clone(), -x[0].clone()])).unwrap();
        assert_eq!(code.instructions().len(), 1);
        assert_eq!(code.instructions()[0].op, Opcode::Neg);
        assert_eq!(code.outputs(), &[Operand::Slot(1), Operand::Slot(2)]);
    }

    #[test]
    fn constants_fold_and_pool() {
        let code = record(1, |x| {
            let two = Tracer::Const(1.0) + Tracer::Const(1.0);
            let a = x[0].clone() * two.clone();
            Ok(vec![a + two])
        })
        .unwrap();
        assert_eq!(code.consts(), &[2.0]);
        assert_eq!(code.instructions().len(), 2);
    }

    #[test]
    fn branching_on_state_is_rejected() {
        let r = record(1, |x| {
            if x[0] > Tracer::Const(0.0) {
                Ok(vec![x[0].clone()])
            } else {
                Ok(vec![-x[0].clone()])
            }
        });
        assert_eq!(r, Err(Error::UnsupportedOperation("comparison".into())));
        let r = record(1, |x| Ok(vec![x[0].abs()]));
        assert_eq!(r, Err(Error::UnsupportedOperation("abs".into())));
    }

    #[test]
    fn integer_powers_expand_to_products() {
        let code = record(1, |x| Ok(vec![x[0].powi(5)?, x[0].powi(-2)?, x[0].powf(0.5)?])).unwrap();
        let ops: Vec<_> = code.instructions().iter().map(|i| i.op).collect();
        assert_eq!(
            ops,
            vec![
                Opcode::Mul,
                Opcode::Mul,
                Opcode::Mul,
                Opcode::Div,
                Opcode::Elem(ElemFn::Pow(0.5)),
            ]
        );
        let listing = code.to_string();
        assert!(listing.contains("pow"));
        assert!(listing.contains("outputs"));
    }

    #[test]
    fn repeated_subexpressions_and_unit_factors_fold() {
        let code = record(2, |x| {
            let a = x[0].sin()? * x[1].clone();
            let b = x[0].sin()? * x[1].clone();
            let one = x[0].constant_like(1.0);
            Ok(vec![a + b, x[1].clone() * one.clone(), x[0].try_div(&one)?])
        })
        .unwrap();
        let ops: Vec<_> = code.instructions().iter().map(|i| i.op).collect();
        assert_eq!(ops, vec![Opcode::Elem(ElemFn::Sin), Opcode::Mul, Opcode::Add]);
        assert_eq!(code.outputs()[1..], [Operand::Slot(1), Operand::Slot(0)]);
    }
}
