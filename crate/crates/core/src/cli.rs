//! Command-line front end: configuration, scans, scaling campaigns and
//! deterministic CSV/JSON output.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::mpsc;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::eigen::{ground_state, SolverOptions};
use crate::error::{Error, Result};
use crate::freefermion::xy_rotation_metrology;
use crate::metrology::{metro_point, FidelityOptions, LoopOptions, Method, MetroOptions, MetroTensors};
use crate::pauli::{Coupling, ModelKind, ModelSpec, SpinAxis};
use crate::scaling::{drop_rate, locate_critical_point, scaling_report, CriticalPoint, ScalingReport};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    /// `center ± geomspace(start, stop, steps)` plus the center itself, where
    /// the center is the model's own value of the coupling.
    Symlog,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub param: Coupling,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl SweepAxis {
    pub fn values(&self, center: f64) -> Vec<f64> {
        let k = self.steps;
        match self.spacing {
            Spacing::Linear => (0..k).map(|i| self.start + (self.stop - self.start) * i as f64 / (k - 1) as f64).collect(),
            Spacing::Symlog => {
                let (a, b) = (self.start.ln(), self.stop.ln());
                let offs: Vec<f64> = (0..k).map(|i| (a + (b - a) * i as f64 / (k - 1) as f64).exp()).collect();
                let mut v: Vec<f64> = offs.iter().rev().map(|d| center - d).collect();
                v.push(center);
                v.extend(offs.iter().map(|d| center + d));
                v
            }
        }
    }
}

/// `label:start:stop:steps`, optionally followed by `:symlog`.
impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 && parts.len() != 5 {
            return Err(Error::Config(format!("sweep '{s}' is not label:start:stop:steps[:symlog]")));
        }
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number '{t}' in sweep '{s}'")));
        let spacing = match parts.get(4).map(|t| t.trim()) {
            None | Some("linear") => Spacing::Linear,
            Some("symlog") => Spacing::Symlog,
            Some(other) => return Err(Error::Config(format!("unknown spacing '{other}'"))),
        };
        Ok(Self {
            param: parts[0].parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            start: num(parts[1])?,
            stop: num(parts[2])?,
            steps: parts[3].trim().parse().map_err(|_| Error::Config(format!("bad step count in sweep '{s}'")))?,
            spacing,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown format '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Standard output when absent.
    pub path: Option<PathBuf>,
    pub format: Format,
}

/// Values supplied directly to the fitters, bypassing all solves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Synthetic {
    pub sizes: Vec<usize>,
    pub values: BTreeMap<String, Vec<f64>>,
}

/// A one-parameter grid on which F_xx is maximized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalSpec {
    pub param: Coupling,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl CriticalSpec {
    pub fn grid(&self) -> Vec<f64> {
        (0..self.steps).map(|i| self.start + (self.stop - self.start) * i as f64 / (self.steps - 1) as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub model: ModelSpec,
    pub sweep: Vec<SweepAxis>,
    /// Chain lengths; empty means `model.n`.
    pub sizes: Vec<usize>,
    pub axes: Vec<SpinAxis>,
    pub method: Method,
    pub solver: SolverOptions,
    pub fidelity: FidelityOptions,
    pub loops: LoopOptions,
    /// Scaling selectors: F_xx, U_xy, R_xy, R_full, det_F, det_2U, gap,
    /// drop_rate_R_xy, ...
    pub quantities: Vec<String>,
    pub synthetic: Option<Synthetic>,
    /// Evaluate each size at its own F_xx maximum along this grid.
    pub critical: Option<CriticalSpec>,
    pub output: OutputSpec,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::ferro(11, [0.2, 0.0, 0.0]),
            sweep: Vec::new(),
            sizes: Vec::new(),
            axes: SpinAxis::ALL.to_vec(),
            method: Method::FidelityBargmann,
            solver: SolverOptions::default(),
            fidelity: FidelityOptions::default(),
            loops: LoopOptions::default(),
            quantities: Vec::new(),
            synthetic: None,
            critical: None,
            output: OutputSpec::default(),
        }
    }
}

impl ScanConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn metro_options(&self) -> MetroOptions {
        MetroOptions { solver: self.solver.clone(), fidelity: self.fidelity.clone(), loops: self.loops.clone() }
    }

    /// Fill defaults that depend on other fields and check every knob.
    pub fn resolve(mut self) -> Result<Self> {
        let cfg = |m: String| Error::Config(m);
        if self.sizes.is_empty() {
            self.sizes = vec![self.model.n];
        }
        let free_fermion = self.model.kind == ModelKind::XyChain && self.method == Method::ExactRotation;
        // the spin cap bounds exact diagonalization only
        let base = if free_fermion { self.model.with_n(4) } else { self.model.clone() };
        base.validate().map_err(|e| cfg(e.to_string()))?;
        for &n in &self.sizes {
            if free_fermion {
                crate::freefermion::solve_xy(n.min(4), self.model.gamma, self.model.lambda).map_err(|e| cfg(e.to_string()))?;
                if n < 3 || n > crate::freefermion::MAX_SITES {
                    return Err(cfg(format!("n = {n} outside the free-fermion range")));
                }
            } else {
                self.model.with_n(n).validate().map_err(|e| cfg(e.to_string()))?;
            }
        }
        if self.axes.is_empty() {
            return Err(cfg("no axes requested".into()));
        }
        let mut seen = self.axes.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.axes.len() {
            return Err(cfg(format!("repeated axis in {:?}", self.axes)));
        }
        if self.model.is_ising() && self.method == Method::ExactRotation {
            return Err(cfg("exact_rotation applies to the XY chain only".into()));
        }
        for s in &self.sweep {
            if !self.model.accepts(s.param) {
                return Err(cfg(format!("sweep label {} is not a coupling of {:?}", s.param.name(), self.model.kind)));
            }
            if s.steps < 2 || !s.start.is_finite() || !s.stop.is_finite() {
                return Err(cfg(format!("sweep over {} needs finite bounds and at least 2 steps", s.param.name())));
            }
            if s.spacing == Spacing::Symlog && !(s.start > 0.0 && s.stop > s.start) {
                return Err(cfg("symlog sweeps need 0 < start < stop offsets".into()));
            }
        }
        if let Some(c) = &self.critical {
            if !self.model.accepts(c.param) || c.steps < 5 || !(c.stop > c.start) {
                return Err(cfg("critical grid needs a model coupling, start < stop and at least 5 steps".into()));
            }
        }
        let f = &self.fidelity;
        let l = &self.loops;
        let positive = [
            ("solver.tol", self.solver.tol),
            ("fidelity.delta0", f.delta0),
            ("fidelity.max_infidelity", f.max_infidelity),
            ("fidelity.residual_tol", f.residual_tol),
            ("fidelity.max_curvature", f.max_curvature),
            ("loops.target_infidelity", l.target_infidelity),
            ("loops.residual_tol", l.residual_tol),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(cfg(format!("{name} = {v} must be positive")));
        }
        if f.ladder < 4 || self.solver.max_iter == 0 || l.area_scales.iter().any(|a| !(*a > 0.0)) {
            return Err(cfg("ladder K >= 4, max_iter > 0 and positive loop area scales required".into()));
        }
        if self.sizes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(cfg("sizes must be strictly increasing".into()));
        }
        if let Some(syn) = &self.synthetic {
            if syn.values.values().any(|v| v.len() != syn.sizes.len()) {
                return Err(cfg("synthetic value lists must match the size list".into()));
            }
        }
        Ok(self)
    }

    /// Sweep points in row order: first sweep axis outermost.
    pub fn grid(&self) -> Vec<Vec<(Coupling, f64)>> {
        let mut points: Vec<Vec<(Coupling, f64)>> = vec![Vec::new()];
        for s in &self.sweep {
            let vals = s.values(self.model.get(s.param));
            points = points.iter().flat_map(|p| vals.iter().map(move |v| [p.as_slice(), &[(s.param, *v)]].concat())).collect();
        }
        points
    }
}

/// One table record. Undefined values are NaN and come with a flag.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub values: Vec<f64>,
    pub flags: Vec<String>,
    pub failed: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.failed).count()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r.values.get(i).copied().unwrap_or(f64::NAN)).collect())
    }
}

pub fn coupling_label(c: Coupling) -> &'static str {
    match c {
        Coupling::Hx => "h_x",
        Coupling::Hy => "h_y",
        Coupling::Hz => "h_z",
        Coupling::Gamma => "gamma",
        Coupling::Lambda => "lambda",
    }
}

fn model_couplings(kind: ModelKind) -> &'static [Coupling] {
    match kind {
        ModelKind::XyChain => &[Coupling::Gamma, Coupling::Lambda],
        _ => &[Coupling::Hx, Coupling::Hy, Coupling::Hz],
    }
}

/// Column names of a scan over `kind` estimating `axes`; the flags column
/// is implicit and always last.
pub fn scan_columns(kind: ModelKind, axes: &[SpinAxis]) -> Vec<String> {
    let mut axes = axes.to_vec();
    axes.sort();
    let mut c = vec!["n".to_string()];
    c.extend(model_couplings(kind).iter().map(|&k| coupling_label(k).to_string()));
    c.extend(["E0", "E1", "gap"].map(String::from));
    for (i, a) in axes.iter().enumerate() {
        for b in &axes[i..] {
            c.push(format!("F_{a}{b}"));
        }
    }
    for (i, a) in axes.iter().enumerate() {
        for b in &axes[i + 1..] {
            c.push(format!("U_{a}{b}"));
        }
    }
    for (i, a) in axes.iter().enumerate() {
        for b in &axes[i + 1..] {
            c.push(format!("R_{a}{b}"));
        }
    }
    c.push("R_full".into());
    c
}

fn tensors_row(spec: &ModelSpec, t: &MetroTensors) -> Row {
    let mut v = vec![spec.n as f64];
    v.extend(model_couplings(spec.kind).iter().map(|&k| spec.get(k)));
    match &t.energies {
        Some(e) => v.extend([e.e0, e.e1, e.gap]),
        None => v.extend([f64::NAN; 3]),
    }
    let p = t.params.len();
    for i in 0..p {
        for j in i..p {
            v.push(t.f[(i, j)]);
        }
    }
    for i in 0..p {
        for j in i + 1..p {
            v.push(t.u[(i, j)]);
        }
    }
    for q in &t.r_pairs {
        v.push(q.r.map_or(f64::NAN, |r| r.value));
    }
    v.push(t.r_full.map_or(f64::NAN, |r| r.value));
    Row { values: v, flags: t.diagnostics.flags.clone(), failed: false }
}

fn failed_row(spec: &ModelSpec, ncols: usize, e: &Error) -> Row {
    let mut v = vec![spec.n as f64];
    v.extend(model_couplings(spec.kind).iter().map(|&k| spec.get(k)));
    v.resize(ncols, f64::NAN);
    Row { values: v, flags: vec![format!("error:{e}")], failed: true }
}

/// Tensors at one scan point. The XY rotation protocol is evaluated exactly
/// by free fermions, which covers chain lengths far beyond dense vectors.
pub fn evaluate(spec: &ModelSpec, axes: &[SpinAxis], method: Method, opts: &MetroOptions) -> Result<MetroTensors> {
    match (spec.kind, method) {
        (ModelKind::XyChain, Method::ExactRotation) => {
            let full = xy_rotation_metrology(spec.n, spec.gamma, spec.lambda)?;
            let mut sorted = axes.to_vec();
            sorted.sort();
            let pick: Vec<usize> = sorted.iter().map(|a| a.index()).collect();
            let f3 = nalgebra::Matrix3::from_fn(|i, j| full.f[(i, j)]);
            let u3 = nalgebra::Matrix3::from_fn(|i, j| full.u[(i, j)]);
            debug_assert_eq!(pick.len(), sorted.len());
            let mut t = crate::metrology::restrict(full.kind, &sorted, &f3, &u3);
            t.energies = full.energies;
            Ok(t)
        }
        (ModelKind::XyChain, _) => metro_point(spec, &[0.0; 3], axes, method, opts),
        _ => metro_point(spec, &spec.h, axes, method, opts),
    }
}

/// Evaluate every (size, point) task in parallel and hand rows to `sink` in
/// size-major, sweep-order sequence as soon as each prefix is complete.
pub fn run_scan(cfg: &ScanConfig, sink: &mut dyn FnMut(&Row) -> Result<()>) -> Result<Table> {
    let columns = scan_columns(cfg.model.kind, &cfg.axes);
    let grid = cfg.grid();
    let tasks: Vec<ModelSpec> = cfg
        .sizes
        .iter()
        .flat_map(|&n| {
            grid.iter().map(move |pt| {
                let mut s = cfg.model.with_n(n);
                for &(c, v) in pt {
                    s.set(c, v);
                }
                s
            })
        })
        .collect();
    let opts = cfg.metro_options();
    let ncols = columns.len();
    let (tx, rx) = mpsc::channel::<(usize, Row)>();
    let mut rows: Vec<Option<Row>> = vec![None; tasks.len()];
    let mut next = 0;
    let mut sink_err = None;
    std::thread::scope(|scope| {
        scope.spawn(|| {
            tasks.par_iter().enumerate().for_each_with(tx, |tx, (i, spec)| {
                let row = match evaluate(spec, &cfg.axes, cfg.method, &opts) {
                    Ok(t) => tensors_row(spec, &t),
                    Err(e) => failed_row(spec, ncols, &e),
                };
                // the receiver only disappears if the writer failed
                let _ = tx.send((i, row));
            });
        });
        for (i, row) in rx {
            rows[i] = Some(row);
            while next < rows.len() {
                let Some(r) = &rows[next] else { break };
                if sink_err.is_none() {
                    if let Err(e) = sink(r) {
                        sink_err = Some(e);
                    }
                }
                next += 1;
            }
        }
    });
    if let Some(e) = sink_err {
        return Err(e);
    }
    Ok(Table { columns, rows: rows.into_iter().map(|r| r.expect("every task reports a row")).collect() })
}

/// `%.12g`: 12 significant digits, shortest of fixed and exponent forms.
pub fn format_value(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.11e}");
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..12).contains(&exp) {
        trim(&format!("{:.*}", (11 - exp) as usize, x))
    } else {
        format!("{}e{}{:02}", trim(mant), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn csv_header(columns: &[String]) -> String {
    let mut cols: Vec<String> = columns.iter().map(|c| csv_field(c)).collect();
    cols.push("flags".into());
    cols.join(",") + "\n"
}

pub fn csv_record(row: &Row) -> String {
    let mut f: Vec<String> = row.values.iter().map(|&v| format_value(v)).collect();
    f.push(csv_field(&row.flags.join(";")));
    f.join(",") + "\n"
}

fn json_rows(table: &Table) -> Value {
    Value::Array(
        table
            .rows
            .iter()
            .map(|r| {
                let mut v: Vec<Value> = r.values.iter().map(|&x| json!(x)).collect();
                v.push(json!(r.flags.join(";")));
                Value::Array(v)
            })
            .collect(),
    )
}

/// The JSON document: config echo, columns (flags last), rows and reports.
pub fn json_document(cfg: &ScanConfig, table: &Table, reports: &[Value]) -> Result<String> {
    let mut columns: Vec<Value> = table.columns.iter().map(|c| json!(c)).collect();
    columns.push(json!("flags"));
    let doc = json!({
        "config": serde_json::to_value(cfg).map_err(|e| Error::InvalidInput(e.to_string()))?,
        "columns": columns,
        "rows": json_rows(table),
        "reports": reports,
    });
    let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Error::InvalidInput(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn open_output(spec: &OutputSpec) -> Result<Box<dyn Write>> {
    Ok(match &spec.path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

/// Write `table` (plus reports, JSON only) in one piece.
pub fn emit(cfg: &ScanConfig, table: &Table, reports: &[Value]) -> Result<()> {
    let mut out = open_output(&cfg.output)?;
    match cfg.output.format {
        Format::Csv => {
            out.write_all(csv_header(&table.columns).as_bytes())?;
            for r in &table.rows {
                out.write_all(csv_record(r).as_bytes())?;
            }
        }
        Format::Json => out.write_all(json_document(cfg, table, reports)?.as_bytes())?,
    }
    out.flush()?;
    Ok(())
}

/// Scan with incremental CSV output (each row flushed as its prefix
/// completes, so an interrupted run leaves a valid CSV prefix).
pub fn scan_to_output(cfg: &ScanConfig) -> Result<Table> {
    match cfg.output.format {
        Format::Csv => {
            let mut out = open_output(&cfg.output)?;
            out.write_all(csv_header(&scan_columns(cfg.model.kind, &cfg.axes)).as_bytes())?;
            out.flush()?;
            let table = run_scan(cfg, &mut |r| {
                out.write_all(csv_record(r).as_bytes())?;
                out.flush()?;
                Ok(())
            })?;
            Ok(table)
        }
        Format::Json => {
            let table = run_scan(cfg, &mut |_| Ok(()))?;
            emit(cfg, &table, &[])?;
            Ok(table)
        }
    }
}

fn det2(m: &nalgebra::DMatrix<f64>) -> f64 {
    m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
}

/// Value of a scaling selector on one tensor bundle.
pub fn quantity(t: &MetroTensors, name: &str) -> Result<f64> {
    let bad = || Error::Config(format!("unknown or unavailable quantity '{name}'"));
    let axes2 = |s: &str| -> Result<(SpinAxis, SpinAxis)> {
        let mut ch = s.chars();
        let (a, b) = (ch.next().ok_or_else(bad)?, ch.next().ok_or_else(bad)?);
        if ch.next().is_some() {
            return Err(bad());
        }
        Ok((a.to_string().parse().map_err(|_| bad())?, b.to_string().parse().map_err(|_| bad())?))
    };
    match name {
        "gap" => t.energies.as_ref().map(|e| e.gap).ok_or_else(bad),
        "R_full" => Ok(t.r_full.map_or(f64::NAN, |r| r.value)),
        "det_F" | "det_2U" => {
            if t.params.len() != 2 {
                return Err(Error::Config(format!("{name} needs exactly two axes")));
            }
            Ok(if name == "det_F" { det2(&t.f) } else { 4.0 * det2(&t.u) })
        }
        _ => {
            let (kind, rest) = name.split_once('_').ok_or_else(bad)?;
            let (a, b) = axes2(rest)?;
            match kind {
                "F" => t.f_entry(a, b).ok_or_else(bad),
                "U" => t.u_entry(a, b).ok_or_else(bad),
                "R" => Ok(t.r_pair(a, b).map_or(f64::NAN, |r| r.value)),
                _ => Err(bad()),
            }
        }
    }
}

/// Output of a scaling campaign: the per-size rows behind the fits and one
/// report per quantity.
#[derive(Clone, Debug, Default)]
pub struct ScalingOutcome {
    pub table: Table,
    pub reports: Vec<ScalingReport>,
    pub critical: Vec<CriticalPoint>,
    pub failures: usize,
}

/// Run the per-size evaluations and fit every selected quantity.
pub fn run_scaling(cfg: &ScanConfig) -> Result<ScalingOutcome> {
    if let Some(syn) = &cfg.synthetic {
        let mut out = ScalingOutcome::default();
        for (q, vals) in &syn.values {
            out.reports.push(scaling_report(q, &syn.sizes, vals)?);
        }
        return Ok(out);
    }
    if cfg.sizes.len() < 3 {
        return Err(Error::Config("scaling needs at least 3 sizes".into()));
    }
    if cfg.quantities.is_empty() {
        return Err(Error::Config("no quantities selected".into()));
    }
    let opts = cfg.metro_options();
    let drop: Vec<&String> = cfg.quantities.iter().filter(|q| q.starts_with("drop_rate_")).collect();
    let point: Vec<&String> = cfg.quantities.iter().filter(|q| !q.starts_with("drop_rate_")).collect();
    let mut out = ScalingOutcome::default();

    // Base point per size: the located critical point if requested.
    let mut bases = Vec::new();
    for &n in &cfg.sizes {
        let mut spec = cfg.model.with_n(n);
        if let Some(c) = &cfg.critical {
            let cp = locate_critical_point(&spec, c.param, &c.grid(), &opts)?;
            spec.set(c.param, cp.location);
            out.critical.push(cp);
        }
        bases.push(spec);
    }

    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    if !point.is_empty() {
        let columns = scan_columns(cfg.model.kind, &cfg.axes);
        let results: Vec<Result<MetroTensors>> = bases.par_iter().map(|s| evaluate(s, &cfg.axes, cfg.method, &opts)).collect();
        for (spec, r) in bases.iter().zip(results) {
            match r {
                Ok(t) => {
                    for q in &point {
                        values.entry(q.to_string()).or_default().push(quantity(&t, q)?);
                    }
                    out.table.rows.push(tensors_row(spec, &t));
                }
                Err(e) => {
                    out.failures += 1;
                    for q in &point {
                        values.entry(q.to_string()).or_default().push(f64::NAN);
                    }
                    out.table.rows.push(failed_row(spec, columns.len(), &e));
                }
            }
        }
        out.table.columns = columns;
    }
    if !drop.is_empty() {
        let [sweep] = cfg.sweep.as_slice() else {
            return Err(Error::Config("drop rates need exactly one sweep axis".into()));
        };
        for q in &drop {
            let target = q.trim_start_matches("drop_rate_").to_string();
            let mut rates = Vec::new();
            for base in &bases {
                let sub = ScanConfig { model: base.clone(), sizes: vec![base.n], critical: None, ..cfg.clone() };
                let table = run_scan(&sub, &mut |_| Ok(()))?;
                out.failures += table.failures();
                let h = table.column(coupling_label(sweep.param)).ok_or_else(|| Error::Config("sweep column missing".into()))?;
                let r = table.column(&target).ok_or_else(|| Error::Config(format!("'{target}' is not a scan column")))?;
                let ok: Vec<(f64, f64)> = h.into_iter().zip(r).filter(|(_, v)| v.is_finite()).collect();
                let (hs, rs): (Vec<f64>, Vec<f64>) = ok.into_iter().unzip();
                rates.push(drop_rate(&hs, &rs, base.get(sweep.param))?.rate);
            }
            values.insert(q.to_string(), rates);
        }
    }
    for q in &cfg.quantities {
        let v = &values[q];
        match scaling_report(q, &cfg.sizes, v) {
            Ok(r) => out.reports.push(r),
            Err(e) => return Err(Error::Fit(format!("{q}: {e}"))),
        }
    }
    Ok(out)
}

fn report_table(reports: &[ScalingReport]) -> Table {
    let columns: Vec<String> = ["n", "value", "m", "a", "r2_power", "rss_power", "A", "lambda_e", "r2_exp", "rss_exp", "score"].map(String::from).to_vec();
    let mut rows = Vec::new();
    for r in reports {
        let (p, e) = (r.power(), r.exponential());
        for (n, v) in r.sizes.iter().zip(&r.values) {
            rows.push(Row {
                values: vec![*n as f64, *v, p.coef("m"), p.coef("a"), p.r2, p.rss, e.coef("A"), e.coef("lambda_e"), e.r2, e.rss, r.score],
                flags: vec![format!("quantity={}", r.quantity), format!("preferred={:?}", r.preferred).to_lowercase()],
                failed: false,
            });
        }
    }
    Table { columns, rows }
}

fn critical_table(cfg: &ScanConfig, points: &[CriticalPoint]) -> Table {
    let label = cfg.critical.as_ref().map_or("param", |c| coupling_label(c.param));
    let columns = ["n", label, "F_xx", "is_max"].map(String::from).to_vec();
    let mut rows = Vec::new();
    for (n, cp) in cfg.sizes.iter().zip(points) {
        for &(x, f) in &cp.profile {
            rows.push(Row { values: vec![*n as f64, x, f, 0.0], flags: vec![], failed: false });
        }
        let mut flags = vec![];
        if cp.on_boundary {
            flags.push("on_boundary".into());
        }
        if !cp.refined {
            flags.push("unrefined".into());
        }
        rows.push(Row { values: vec![*n as f64, cp.location, cp.value, 1.0], flags, failed: false });
    }
    Table { columns, rows }
}

#[derive(Parser, Debug)]
#[command(name = "critmetro", version, about = "Multiparameter quantum metrology of spin chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tensors on every (size, sweep point).
    Scan(Common),
    /// Finite-size scaling fits of selected quantities.
    Scaling {
        #[command(flatten)]
        common: Common,
        /// Comma-separated selectors (F_xx, det_F, drop_rate_R_xy, ...).
        #[arg(long, value_delimiter = ',')]
        quantities: Vec<String>,
    },
    /// XY-chain rotation protocol by free fermions (model forced to xy).
    XyRotation(Common),
    /// Locate the F_xx maximum per size.
    CriticalPoint {
        #[command(flatten)]
        common: Common,
        /// Coupling to scan, e.g. h_z.
        #[arg(long)]
        param: Option<String>,
        /// start:stop:steps
        #[arg(long)]
        grid: Option<String>,
    },
}

#[derive(Args, Debug, Default)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    hx: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    hy: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    hz: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// label:start:stop:steps[:symlog]; repeatable, first is outermost.
    #[arg(long, allow_hyphen_values = true)]
    sweep: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    axes: Vec<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
}

impl Common {
    fn config(&self) -> Result<ScanConfig> {
        let mut c = match &self.config {
            Some(p) => ScanConfig::load(p)?,
            None => ScanConfig::default(),
        };
        let e = |x: Error| Error::Config(x.to_string());
        if let Some(m) = &self.model {
            let kind: ModelKind = m.parse().map_err(e)?;
            if kind != c.model.kind {
                c.model = match kind {
                    ModelKind::XyChain => ModelSpec::xy(c.model.n, 1.0, 0.0),
                    _ => ModelSpec { kind, ..c.model.clone() },
                };
            }
        }
        if let Some(n) = self.n {
            c.model.n = n;
        }
        for (v, k) in [(self.hx, Coupling::Hx), (self.hy, Coupling::Hy), (self.hz, Coupling::Hz), (self.gamma, Coupling::Gamma), (self.lambda, Coupling::Lambda)] {
            if let Some(v) = v {
                c.model.set(k, v);
            }
        }
        if !self.sweep.is_empty() {
            c.sweep = self.sweep.iter().map(|s| s.parse()).collect::<Result<_>>()?;
        }
        if !self.sizes.is_empty() {
            c.sizes = self.sizes.clone();
        }
        if !self.axes.is_empty() {
            c.axes = self.axes.iter().map(|a| a.parse()).collect::<Result<_>>().map_err(e)?;
        }
        if let Some(m) = &self.method {
            c.method = m.parse().map_err(e)?;
        }
        if let Some(p) = &self.out {
            c.output.path = Some(p.clone());
        }
        if let Some(f) = &self.format {
            c.output.format = f.parse()?;
        }
        if let Some(s) = self.seed {
            c.solver.seed = s;
        }
        if let Some(t) = self.tol {
            c.solver.tol = t;
        }
        Ok(c)
    }
}

fn parse_grid(param: &str, grid: &str) -> Result<CriticalSpec> {
    let s: SweepAxis = format!("{param}:{grid}").parse()?;
    Ok(CriticalSpec { param: s.param, start: s.start, stop: s.stop, steps: s.steps })
}

/// Exit statuses: 0 success, 1 configuration (or output) error, 2 when some
/// points failed but the campaign completed.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failures) => {
            eprintln!("{failures} point(s) failed; see the flags column");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Command) -> Result<usize> {
    match cmd {
        Command::Scan(common) => {
            let cfg = common.config()?.resolve()?;
            Ok(scan_to_output(&cfg)?.failures())
        }
        Command::XyRotation(common) => {
            let mut cfg = common.config()?;
            if cfg.model.kind != ModelKind::XyChain {
                cfg.model = ModelSpec::xy(cfg.model.n, common.gamma.unwrap_or(1.0), common.lambda.unwrap_or(0.0));
            }
            cfg.method = Method::ExactRotation;
            let cfg = cfg.resolve()?;
            Ok(scan_to_output(&cfg)?.failures())
        }
        Command::Scaling { common, quantities } => {
            let mut cfg = common.config()?;
            if !quantities.is_empty() {
                cfg.quantities = quantities;
            }
            let cfg = cfg.resolve()?;
            let out = run_scaling(&cfg)?;
            let reports: Vec<Value> = out.reports.iter().map(|r| serde_json::to_value(r).expect("reports serialize")).collect();
            match cfg.output.format {
                Format::Json => emit(&cfg, &out.table, &reports)?,
                Format::Csv => emit(&cfg, &report_table(&out.reports), &[])?,
            }
            Ok(out.failures)
        }
        Command::CriticalPoint { common, param, grid } => {
            let mut cfg = common.config()?;
            match (param, grid) {
                (Some(p), Some(g)) => cfg.critical = Some(parse_grid(&p, &g)?),
                (None, None) => {}
                _ => return Err(Error::Config("--param and --grid go together".into())),
            }
            let cfg = cfg.resolve()?;
            let c = cfg.critical.clone().ok_or_else(|| Error::Config("no critical grid given".into()))?;
            let opts = cfg.metro_options();
            let points = cfg.sizes.par_iter().map(|&n| locate_critical_point(&cfg.model.with_n(n), c.param, &c.grid(), &opts)).collect::<Result<Vec<_>>>()?;
            let reports: Vec<Value> = points.iter().map(|p| serde_json::to_value(p).expect("critical points serialize")).collect();
            emit(&cfg, &critical_table(&cfg, &points), &reports)?;
            Ok(0)
        }
    }
}

/// Gap of `spec` by exact diagonalization; a convenience for scripts.
pub fn gap(spec: &ModelSpec, solver: &SolverOptions) -> Result<f64> {
    Ok(ground_state(spec, solver)?.gap)
}
