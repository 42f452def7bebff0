use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use lietaylor::bench::{bench_scaling, BenchReport, DEFAULT_SAMPLE};
use lietaylor::field::{AsField, Field, FieldValue, VectorField};
use lietaylor::lie::{self, FieldKind, LieResult};
use lietaylor::models::{
    ConstantField, GantryDrift, GantryInput, GantryOutput, GantryOutputDifferential, GantryParams, Linear,
    LinearFunctional, GANTRY_X0,
};
use lietaylor::oracle::{cross_path_check, definition_check, extended_precision_check, nested_check, Metric, OracleReport};
use lietaylor::tape::CodeList;
use lietaylor::{Elementary, Error};

/// Lie coefficients and Lie derivatives of built-in models.
#[derive(Parser, Debug)]
#[command(name = "lietaylor", version)]
pub struct Args {
    #[arg(long, value_enum, default_value_t = ModelId::Gantry)]
    pub model: ModelId,

    /// h: scalar output map, g: input vector field, f: the drift itself,
    /// w: covector field.
    #[arg(long, value_enum, default_value_t = FieldSel::H)]
    pub field: FieldSel,

    #[arg(long, default_value_t = 10, allow_hyphen_values = true)]
    pub order: i64,

    /// Comma-separated initial state.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,

    /// Gantry: M,m,ell,G. Linear models: the 2×2 matrix A, row-major.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub params: Option<Vec<f64>>,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    #[arg(long, value_enum)]
    pub check: Option<CheckSel>,

    /// Time every order 1..=order and fit the growth exponent.
    #[arg(long)]
    pub bench: bool,

    #[arg(long, default_value_t = 5)]
    pub reps: usize,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelId {
    Gantry,
    Nilpotent,
    Oscillator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FieldSel {
    H,
    G,
    F,
    W,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CheckSel {
    Cross,
    Fd,
    Nested,
    All,
}

pub const CROSS_TOL: f64 = 1e-12;
pub const FD_TOL: f64 = 1e-6;
pub const NESTED_TOL: f64 = 1e-5;
pub const NESTED_KMAX: usize = 3;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Compute(Error),
    Io(std::io::Error),
    CheckFailed(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid configuration: {m}"),
            CliError::Compute(e) => write!(f, "computation failed: {e}"),
            CliError::Io(e) => write!(f, "output failed: {e}"),
            CliError::CheckFailed(names) => write!(f, "check failed: {}", names.join(", ")),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Compute(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

#[derive(Clone, Debug)]
enum Drift {
    Gantry(GantryDrift),
    Linear(Linear),
}

impl VectorField for Drift {
    fn dim(&self) -> usize {
        match self {
            Drift::Gantry(f) => f.dim(),
            Drift::Linear(f) => f.dim(),
        }
    }

    fn eval<S: Elementary>(&self, x: &[S]) -> lietaylor::Result<Vec<S>> {
        match self {
            Drift::Gantry(f) => f.eval(x),
            Drift::Linear(f) => f.eval(x),
        }
    }
}

enum ModelField {
    GantryOutput(GantryOutput),
    GantryInput(GantryInput),
    GantryDifferential(GantryOutputDifferential),
    Drift(AsField<Drift>),
    Constant(ConstantField),
    Functional(LinearFunctional),
}

impl Field for ModelField {
    fn eval<S: Elementary>(&self, x: &[S]) -> lietaylor::Result<FieldValue<S>> {
        match self {
            ModelField::GantryOutput(h) => h.eval(x),
            ModelField::GantryInput(g) => g.eval(x),
            ModelField::GantryDifferential(w) => w.eval(x),
            ModelField::Drift(f) => f.eval(x),
            ModelField::Constant(c) => c.eval(x),
            ModelField::Functional(c) => c.eval(x),
        }
    }
}

struct Model {
    drift: Drift,
    field: ModelField,
    kind: FieldKind,
    x0: Vec<f64>,
    order: usize,
}

fn build_model(args: &Args) -> Result<Model, CliError> {
    let order = usize::try_from(args.order).map_err(|_| CliError::Config(format!("order must be >= 0, got {}", args.order)))?;
    let (drift, default_x0) = match args.model {
        ModelId::Gantry => {
            let p = match args.params.as_deref() {
                None => GantryParams::default(),
                Some(&[big_m, m, ell, g]) => GantryParams::new(big_m, m, ell, g).map_err(|e| CliError::Config(e.to_string()))?,
                Some(v) => return Err(CliError::Config(format!("gantry takes 4 parameters M,m,ell,G, got {}", v.len()))),
            };
            (Drift::Gantry(GantryDrift(p)), GANTRY_X0.to_vec())
        }
        ModelId::Nilpotent | ModelId::Oscillator => {
            let lin = match args.params.as_deref() {
                None if args.model == ModelId::Nilpotent => Linear::nilpotent(),
                None => Linear::oscillator(),
                Some(a) if a.len() == 4 => Linear::new(2, a.to_vec())?,
                Some(v) => return Err(CliError::Config(format!("linear models take the 4 entries of A, got {}", v.len()))),
            };
            (Drift::Linear(lin), vec![1.0, 0.5])
        }
    };
    let x0 = args.x0.clone().unwrap_or(default_x0);
    let n = drift.dim();
    if x0.len() != n {
        return Err(CliError::Config(format!("x0 needs {n} entries, got {}", x0.len())));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Config("x0 entries must be finite".into()));
    }
    let (field, kind) = match (&drift, args.field) {
        (Drift::Gantry(d), FieldSel::H) => (ModelField::GantryOutput(GantryOutput(d.0)), FieldKind::Scalar),
        (Drift::Gantry(d), FieldSel::G) => (ModelField::GantryInput(GantryInput(d.0)), FieldKind::Vector),
        (Drift::Gantry(d), FieldSel::W) => (ModelField::GantryDifferential(GantryOutputDifferential(d.0)), FieldKind::Covector),
        (Drift::Linear(_), FieldSel::H) => (ModelField::Functional(LinearFunctional(vec![1.0, 0.0])), FieldKind::Scalar),
        (Drift::Linear(_), FieldSel::G) => (
            ModelField::Constant(ConstantField {
                shape: vec![2, 1],
                values: vec![0.0, 1.0],
            }),
            FieldKind::Vector,
        ),
        (Drift::Linear(_), FieldSel::W) => (
            ModelField::Constant(ConstantField {
                shape: vec![1, 2],
                values: vec![1.0, 0.0],
            }),
            FieldKind::Covector,
        ),
        (d, FieldSel::F) => (ModelField::Drift(AsField(d.clone())), FieldKind::Vector),
    };
    Ok(Model {
        drift,
        field,
        kind,
        x0,
        order,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutput {
    pub label: String,
    pub tolerance: f64,
    pub max_error: f64,
    pub passed: bool,
    /// Error per order, starting at `first_order`.
    pub first_order: usize,
    pub errors: Vec<f64>,
}

impl From<&OracleReport> for CheckOutput {
    fn from(r: &OracleReport) -> Self {
        CheckOutput {
            label: r.label.clone(),
            tolerance: r.tolerance,
            max_error: r.max_rel(),
            passed: r.passed(),
            first_order: r.orders.first().map_or(0, |o| o.k),
            errors: r.orders.iter().map(|o| o.rel).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRowOutput {
    pub k: usize,
    pub seconds: f64,
    pub build_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchOutput {
    pub reps: usize,
    pub build_seconds: f64,
    /// Log-log slope over `k <= 10`.
    pub exponent_low: Option<f64>,
    /// Log-log slope over the upper half of the orders.
    pub exponent_high: Option<f64>,
    pub rows: Vec<BenchRowOutput>,
}

impl From<&BenchReport> for BenchOutput {
    fn from(r: &BenchReport) -> Self {
        let kmax = r.rows.last().map_or(0, |row| row.k);
        BenchOutput {
            reps: r.reps,
            build_seconds: r.build_seconds,
            exponent_low: r.fitted_exponent(1, kmax.min(10)),
            exponent_high: r.fitted_exponent(kmax / 2, kmax),
            rows: r
                .rows
                .iter()
                .zip(r.build_fraction())
                .map(|(row, (_, build_fraction))| BenchRowOutput {
                    k: row.k,
                    seconds: row.seconds,
                    build_fraction,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub build_seconds: f64,
    pub compute_seconds: f64,
    pub bench: Option<BenchOutput>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub model: String,
    pub field: String,
    pub kind: String,
    pub order: usize,
    pub x0: Vec<f64>,
    pub shape: Vec<usize>,
    pub tc: Vec<Vec<f64>>,
    pub derivative: Vec<Vec<f64>>,
    pub checks: BTreeMap<String, CheckOutput>,
    pub timing: Timing,
}

fn compute(code: &CodeList, m: &Model) -> lietaylor::Result<LieResult> {
    match m.kind {
        FieldKind::Scalar => lie::lie_scalar(code, &m.field, &m.x0, m.order),
        FieldKind::Vector => lie::lie_vector(code, &m.field, &m.x0, m.order),
        FieldKind::Covector => lie::lie_covector(code, &m.field, &m.x0, m.order),
    }
}

fn run_checks(sel: CheckSel, code: &CodeList, m: &Model) -> Result<BTreeMap<String, CheckOutput>, CliError> {
    let scalar = m.kind == FieldKind::Scalar;
    if sel == CheckSel::Nested && !scalar {
        return Err(CliError::Config("the nested check applies to the scalar field h only".into()));
    }
    let mut out = BTreeMap::new();
    if matches!(sel, CheckSel::Cross | CheckSel::All) {
        let r = if scalar {
            extended_precision_check(code, &m.field, m.kind, &m.x0, m.order, CROSS_TOL)?
        } else {
            cross_path_check(code, &m.field, m.kind, &m.x0, m.order, Metric::RelativeFloored, CROSS_TOL)?
        };
        out.insert("cross".to_string(), CheckOutput::from(&r));
    }
    if matches!(sel, CheckSel::Fd | CheckSel::All) {
        let r = definition_check(&m.drift, &m.field, m.kind, &m.x0, FD_TOL)?;
        out.insert("fd".to_string(), CheckOutput::from(&r));
    }
    if scalar && matches!(sel, CheckSel::Nested | CheckSel::All) {
        let r = nested_check(&m.drift, &m.field, &m.x0, m.order.min(NESTED_KMAX), NESTED_TOL)?;
        out.insert("nested".to_string(), CheckOutput::from(&r));
    }
    Ok(out)
}

fn value_name<V: ValueEnum>(v: &V) -> String {
    v.to_possible_value().map_or_else(String::new, |p| p.get_name().to_string())
}

/// Computes the report described by `args`. Failed checks are recorded in
/// the report, not raised.
pub fn build_report(args: &Args) -> Result<Report, CliError> {
    let m = build_model(args)?;
    if args.bench && (m.order < 4 || args.reps < 3) {
        return Err(CliError::Config(format!(
            "--bench needs --order >= 4 and --reps >= 3 (got {} and {})",
            m.order, args.reps
        )));
    }
    let t = Instant::now();
    let code = m.drift.code_list()?;
    let build_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let r = compute(&code, &m)?;
    let compute_seconds = t.elapsed().as_secs_f64();
    let checks = match args.check {
        Some(sel) => run_checks(sel, &code, &m)?,
        None => BTreeMap::new(),
    };
    let bench = if args.bench {
        let b = bench_scaling(&m.drift, &m.field, m.kind, &m.x0, m.order, args.reps, DEFAULT_SAMPLE)?;
        Some(BenchOutput::from(&b))
    } else {
        None
    };
    Ok(Report {
        model: value_name(&args.model),
        field: value_name(&args.field),
        kind: m.kind.name().to_string(),
        order: m.order,
        x0: m.x0.clone(),
        shape: r.shape().to_vec(),
        tc: (0..=m.order).map(|k| r.get_tc(k).into_data()).collect(),
        derivative: (0..=m.order).map(|k| r.get_derivative(k).into_data()).collect(),
        checks,
        timing: Timing {
            build_seconds,
            compute_seconds,
            bench,
        },
    })
}

fn multi_index(mut flat: usize, shape: &[usize]) -> String {
    let mut idx = vec![0; shape.len()];
    for (slot, &dim) in idx.iter_mut().zip(shape).rev() {
        *slot = flat % dim;
        flat /= dim;
    }
    idx.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

/// One row per order and component: `k, index, tc, derivative`.
pub fn write_csv(report: &Report, out: impl Write) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Io(e.into());
    w.write_record(["k", "index", "tc", "derivative"]).map_err(io)?;
    for (k, (tc, d)) in report.tc.iter().zip(&report.derivative).enumerate() {
        for (i, (a, b)) in tc.iter().zip(d).enumerate() {
            w.write_record([k.to_string(), multi_index(i, &report.shape), format!("{a:?}"), format!("{b:?}")])
                .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_json(report: &Report, mut out: impl Write) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut out, report).map_err(|e| CliError::Io(e.into()))?;
    writeln!(out)?;
    Ok(())
}

fn summarize_timing(report: &Report, mut err: impl Write) -> std::io::Result<()> {
    if let Some(b) = &report.timing.bench {
        writeln!(err, "build {:.3e} s", b.build_seconds)?;
        for row in &b.rows {
            writeln!(err, "k {:>3}  {:.3e} s  build fraction {:.3}", row.k, row.seconds, row.build_fraction)?;
        }
        let show = |e: Option<f64>| e.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        writeln!(err, "exponent k<=10 {}, upper half {}", show(b.exponent_low), show(b.exponent_high))?;
    }
    for (name, c) in &report.checks {
        let verdict = if c.passed { "pass" } else { "FAIL" };
        writeln!(err, "check {name}: {verdict} ({}: max error {:.3e}, tol {:.0e})", c.label, c.max_error, c.tolerance)?;
    }
    Ok(())
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let report = build_report(args)?;
    let sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(std::io::BufWriter::new(std::fs::File::create(path)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    match args.format {
        Format::Json => write_json(&report, sink)?,
        Format::Csv => {
            write_csv(&report, sink)?;
        }
    }
    if args.format == Format::Csv || args.out.is_some() {
        summarize_timing(&report, std::io::stderr().lock())?;
    } else {
        let failed: Vec<_> = report.checks.iter().filter(|(_, c)| !c.passed).collect();
        for (name, c) in &failed {
            eprintln!("check {name} failed: max error {:.3e} > {:.0e}", c.max_error, c.tolerance);
        }
    }
    let failed: Vec<String> = report.checks.iter().filter(|(_, c)| !c.passed).map(|(n, _)| n.clone()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(failed))
    }
}
