//! Code lists: straight-line programs recorded from a vector field and
//! interpreted in Taylor arithmetic.
//!
//! The value table of a [`CodeList`] holds the `n` inputs in slots `0..n`
//! followed by one slot per instruction, so instruction `i` writes slot
//! `n + i` and may only read lower slots or pooled constants.

mod fdcheck;
mod interp;
mod record;

use std::fmt;

use crate::series::ElemFn;

pub use fdcheck::{finite_difference_jacobian_check, FdEntry, FdReport};
pub(crate) use interp::integrate;
pub use interp::{eval_point, eval_series, eval_series_jacobian, taylcoeffs, GradedCoefficients};
pub use record::{record, Tracer};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Opcode {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Atan2,
    Elem(ElemFn),
}

impl Opcode {
    pub fn name(self) -> &'static str {
        match self {
            Opcode::Add => "add",
            Opcode::Sub => "sub",
            Opcode::Mul => "mul",
            Opcode::Div => "div",
            Opcode::Neg => "neg",
            Opcode::Atan2 => "atan2",
            Opcode::Elem(f) => f.name(),
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Opcode::Neg | Opcode::Elem(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Operand {
    /// Value-table slot.
    Slot(usize),
    /// Index into the constant pool.
    Const(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Instruction {
    pub op: Opcode,
    pub lhs: Operand,
    /// Second operand of binary opcodes.
    pub rhs: Option<Operand>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CodeList {
    n_inputs: usize,
    consts: Vec<f64>,
    instructions: Vec<Instruction>,
    outputs: Vec<Operand>,
}

impl CodeList {
    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn consts(&self) -> &[f64] {
        &self.consts
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn outputs(&self) -> &[Operand] {
        &self.outputs
    }

    pub fn n_slots(&self) -> usize {
        self.n_inputs + self.instructions.len()
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Slot(s) => write!(f, "v{s}"),
            Operand::Const(c) => write!(f, "c{c}"),
        }
    }
}

/// Human-readable listing, one instruction per line.
impl fmt::Display for CodeList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "inputs v0..v{}", self.n_inputs.saturating_sub(1))?;
        for (i, c) in self.consts.iter().enumerate() {
            writeln!(f, "const c{i} = {c:?}")?;
        }
        for (i, ins) in self.instructions.iter().enumerate() {
            let extra = match ins.op {
                Opcode::Elem(ElemFn::Pow(c)) => format!(" ^{c:?}"),
                Opcode::Elem(ElemFn::NthRoot(k)) => format!(" ^(1/{k})"),
                _ => String::new(),
            };
            write!(f, "{:>5}  v{} = {:<6} {}", i, self.n_inputs + i, ins.op.name(), ins.lhs)?;
            if let Some(r) = ins.rhs {
                write!(f, " {r}")?;
            }
            writeln!(f, "{extra}")?;
        }
        write!(f, "outputs")?;
        for o in &self.outputs {
            write!(f, " {o}")?;
        }
        writeln!(f)
    }
}
