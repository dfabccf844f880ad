//! Experiment runner: seeded instance generation, exact and filtered solver
//! runs on the same instance, CSV and markdown emission, and per-iteration
//! trace files.
//!
//! Rows carry wall time for reporting only; with [`TimeMode::Zero`] the time
//! columns are written as zero so repeated runs of the same configuration
//! produce byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::chebyshev::DegreeSchedule;
use crate::io;
use crate::oracle::OracleReport;
use crate::pfam::{pfam_solve, PfamConfig, PfamOutcome};
use crate::pfpg::{pfpg_solve, PfpgConfig, PfpgOutcome, SolveMode};
use crate::problems::completion::{gen_mc, svt_solve, SvtConfig, SvtOutcome};
use crate::problems::nce::{gen_example, nce_problem, NceInstance};
use crate::problems::sdp::{cycle_weights, maxcut_sdp, planted_low_rank_sdp};
use crate::{Error, Result};

/// How time columns are filled: measured wall clock, or zero for
/// reproducible output bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMode {
    #[default]
    Wall,
    Zero,
}

/// Which solver(s) to run on the generated instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Exact,
    #[serde(alias = "pf")]
    Filtered,
    #[default]
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Nce,
    Svt,
    Sdp,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Nce => "nce",
            ExperimentKind::Svt => "svt",
            ExperimentKind::Sdp => "sdp",
        }
    }
}

/// One experiment: a generated (or loaded) instance plus solver settings.
/// Unknown keys in config files are rejected. Generator fields are
/// kind-dependent and checked by [`ExperimentConfig::validate`].
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Instance label; for `sdp` this selects the generator
    /// (`planted` or `cycle`).
    #[serde(default)]
    pub name: Option<String>,
    /// Correlation example kind 1..=3 (`nce` only).
    #[serde(default)]
    pub example: Option<u8>,
    /// Load the input matrix from a MatrixMarket file instead of the
    /// generator (`nce` only).
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub n: Option<usize>,
    /// Rows (`svt`) or constraint count (`sdp planted`).
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub rank: Option<usize>,
    /// Sampling ratio (`svt` only).
    #[serde(default)]
    pub sr: Option<f64>,
    #[serde(default)]
    pub solver: SolverChoice,
    #[serde(default)]
    pub degree: Option<usize>,
    #[serde(default)]
    pub repeats: Option<usize>,
    #[serde(default)]
    pub eta: Option<f64>,
    /// Dimension over-allocation factor.
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub time_mode: TimeMode,
}

impl ExperimentConfig {
    /// Minimal config for a kind; generator fields still need filling in.
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            kind,
            name: None,
            example: None,
            input: None,
            n: None,
            m: None,
            rank: None,
            sr: None,
            solver: SolverChoice::default(),
            degree: None,
            repeats: None,
            eta: None,
            q: None,
            tol: None,
            max_iter: None,
            seed: 0,
            time_mode: TimeMode::default(),
        }
    }

    fn require<T: Copy>(field: Option<T>, what: &str) -> Result<T> {
        field.ok_or_else(|| Error::InvalidConfig(format!("missing field `{what}`")))
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ExperimentKind::Nce => {
                if self.input.is_none() {
                    let example = Self::require(self.example, "example")?;
                    if !(1..=3).contains(&example) {
                        return Err(Error::InvalidConfig(format!(
                            "example kind {example} outside 1..=3"
                        )));
                    }
                    Self::require(self.n, "n")?;
                }
            }
            ExperimentKind::Svt => {
                Self::require(self.m, "m")?;
                Self::require(self.n, "n")?;
                Self::require(self.rank, "rank")?;
                Self::require(self.sr, "sr")?;
            }
            ExperimentKind::Sdp => match self.generator_name() {
                "planted" => {
                    Self::require(self.n, "n")?;
                    Self::require(self.m, "m")?;
                    Self::require(self.rank, "rank")?;
                }
                "cycle" => {
                    Self::require(self.n, "n")?;
                }
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown sdp instance `{other}` (expected planted or cycle)"
                    )));
                }
            },
        }
        Ok(())
    }

    fn generator_name(&self) -> &str {
        self.name.as_deref().unwrap_or("planted")
    }

    /// Deterministic instance label used in trace file names.
    pub fn label(&self) -> String {
        if let Some(name) = &self.name {
            return format!("{}-{name}-s{}", self.kind.as_str(), self.seed);
        }
        match self.kind {
            ExperimentKind::Nce => format!(
                "nce{}-n{}-s{}",
                self.example.unwrap_or(0),
                self.n.unwrap_or(0),
                self.seed
            ),
            ExperimentKind::Svt => format!(
                "svt-m{}-n{}-r{}-sr{}-s{}",
                self.m.unwrap_or(0),
                self.n.unwrap_or(0),
                self.rank.unwrap_or(0),
                self.sr.unwrap_or(0.0),
                self.seed
            ),
            ExperimentKind::Sdp => format!(
                "sdp-{}-n{}-s{}",
                self.generator_name(),
                self.n.unwrap_or(0),
                self.seed
            ),
        }
    }

    fn modes(&self) -> Vec<SolveMode> {
        match self.solver {
            SolverChoice::Exact => vec![SolveMode::Exact],
            SolverChoice::Filtered => vec![SolveMode::Filtered],
            SolverChoice::Both => vec![SolveMode::Exact, SolveMode::Filtered],
        }
    }

    fn pfpg_config(&self, mode: SolveMode) -> PfpgConfig {
        let mut cfg = PfpgConfig {
            mode,
            seed: self.seed,
            ..PfpgConfig::default()
        };
        if let Some(d) = self.degree {
            cfg.degree = DegreeSchedule::Constant(d);
        }
        if let Some(q) = self.repeats {
            cfg.repeats = q;
        }
        if let Some(eta) = self.eta {
            cfg.eta = eta;
        }
        if let Some(q) = self.q {
            cfg.q_dim = q;
        }
        if let Some(tol) = self.tol {
            cfg.tol = tol;
        }
        if let Some(mi) = self.max_iter {
            cfg.max_iter = mi;
        }
        cfg
    }

    fn svt_config(&self, mode: SolveMode) -> SvtConfig {
        let mut cfg = SvtConfig {
            mode,
            seed: self.seed,
            ..SvtConfig::default()
        };
        if let Some(d) = self.degree {
            cfg.degree = DegreeSchedule::Constant(d);
        }
        if let Some(q) = self.repeats {
            cfg.repeats = q;
        }
        if let Some(eta) = self.eta {
            cfg.eta = eta;
        }
        if let Some(q) = self.q {
            cfg.q_dim = q;
        }
        if let Some(tol) = self.tol {
            cfg.tol = tol;
        }
        if let Some(mi) = self.max_iter {
            cfg.max_iter = mi;
        }
        cfg
    }

    fn pfam_config(&self, mode: SolveMode) -> PfamConfig {
        let mut cfg = PfamConfig {
            mode,
            seed: self.seed,
            ..PfamConfig::default()
        };
        if let Some(d) = self.degree {
            cfg.degree = DegreeSchedule::Constant(d);
        }
        if let Some(q) = self.repeats {
            cfg.repeats = q;
        }
        if let Some(eta) = self.eta {
            cfg.eta = eta;
        }
        if let Some(tol) = self.tol {
            cfg.tol = tol;
        }
        if let Some(mi) = self.max_iter {
            cfg.max_iter = mi;
        }
        cfg
    }
}

/// Whole config file: shared output options plus `[[experiment]]` sections.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchFile {
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub trace_dir: Option<PathBuf>,
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(rename = "experiment", default)]
    pub experiments: Vec<ExperimentConfig>,
}

/// Parse a TOML config file.
pub fn load_bench_file(path: &Path) -> Result<BenchFile> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn solver_name(mode: SolveMode) -> &'static str {
    match mode {
        SolveMode::Exact => "exact",
        SolveMode::Filtered => "pf",
    }
}

/// One output row; the column set matches the experiment kind.
#[derive(Debug, Clone)]
pub enum ResultRow {
    Nce {
        solver: String,
        n: usize,
        time_s: f64,
        iter: usize,
        f: f64,
        rel_g: f64,
        status: String,
    },
    Svt {
        solver: String,
        m: usize,
        n: usize,
        sr: f64,
        r: usize,
        iter: usize,
        svp: usize,
        time_s: f64,
        mse: f64,
        status: String,
    },
    Sdp {
        solver: String,
        name: String,
        time_s: f64,
        iter: usize,
        pobj: f64,
        pinf: f64,
        dinf: f64,
        gap: f64,
        status: String,
    },
}

/// Scientific notation with fixed precision, so output does not depend on
/// platform default formatting.
pub fn format_float(v: f64) -> String {
    format!("{v:.6e}")
}

fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

impl ResultRow {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            ResultRow::Nce { .. } => ExperimentKind::Nce,
            ResultRow::Svt { .. } => ExperimentKind::Svt,
            ResultRow::Sdp { .. } => ExperimentKind::Sdp,
        }
    }

    pub fn status(&self) -> &str {
        match self {
            ResultRow::Nce { status, .. } => status,
            ResultRow::Svt { status, .. } => status,
            ResultRow::Sdp { status, .. } => status,
        }
    }

    pub fn header(kind: ExperimentKind) -> &'static str {
        match kind {
            ExperimentKind::Nce => "solver,n,time_s,iter,f,rel_g,status",
            ExperimentKind::Svt => "solver,m,n,sr,r,iter,svp,time_s,mse,status",
            ExperimentKind::Sdp => "solver,name,time_s,iter,pobj,pinf,dinf,gap,status",
        }
    }

    pub fn fields(&self) -> Vec<String> {
        match self {
            ResultRow::Nce { solver, n, time_s, iter, f, rel_g, status } => vec![
                solver.clone(),
                n.to_string(),
                format_float(*time_s),
                iter.to_string(),
                format_float(*f),
                format_float(*rel_g),
                status.clone(),
            ],
            ResultRow::Svt { solver, m, n, sr, r, iter, svp, time_s, mse, status } => vec![
                solver.clone(),
                m.to_string(),
                n.to_string(),
                format_float(*sr),
                r.to_string(),
                iter.to_string(),
                svp.to_string(),
                format_float(*time_s),
                format_float(*mse),
                status.clone(),
            ],
            ResultRow::Sdp { solver, name, time_s, iter, pobj, pinf, dinf, gap, status } => vec![
                solver.clone(),
                name.clone(),
                format_float(*time_s),
                iter.to_string(),
                format_float(*pobj),
                format_float(*pinf),
                format_float(*dinf),
                format_float(*gap),
                status.clone(),
            ],
        }
    }

    fn csv_line(&self) -> String {
        self.fields()
            .iter()
            .map(|f| csv_escape(f))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Render rows as CSV text (header always present, even with no rows).
pub fn csv_string(kind: ExperimentKind, rows: &[ResultRow]) -> Result<String> {
    let mut out = String::new();
    writeln!(out, "{}", ResultRow::header(kind)).expect("string write");
    for row in rows {
        if row.kind() != kind {
            return Err(Error::InvalidConfig(format!(
                "row kind {} does not match table kind {}",
                row.kind().as_str(),
                kind.as_str()
            )));
        }
        writeln!(out, "{}", row.csv_line()).expect("string write");
    }
    Ok(out)
}

/// Write rows to a CSV file.
pub fn write_csv(path: &Path, kind: ExperimentKind, rows: &[ResultRow]) -> Result<()> {
    std::fs::write(path, csv_string(kind, rows)?)?;
    Ok(())
}

/// Render rows as a markdown table with the same columns as the CSV.
pub fn markdown_table(kind: ExperimentKind, rows: &[ResultRow]) -> Result<String> {
    let header: Vec<&str> = ResultRow::header(kind).split(',').collect();
    let mut out = String::new();
    writeln!(out, "| {} |", header.join(" | ")).expect("string write");
    writeln!(out, "|{}", " --- |".repeat(header.len())).expect("string write");
    for row in rows {
        if row.kind() != kind {
            return Err(Error::InvalidConfig(format!(
                "row kind {} does not match table kind {}",
                row.kind().as_str(),
                kind.as_str()
            )));
        }
        writeln!(out, "| {} |", row.fields().join(" | ")).expect("string write");
    }
    Ok(out)
}

/// Comparison of two per-iteration series; when lengths differ the longer
/// one is truncated and the note says so.
#[derive(Debug, Clone)]
pub struct TraceComparison {
    pub reports: Vec<OracleReport>,
    pub note: Option<String>,
}

impl TraceComparison {
    pub fn max_abs_err(&self) -> f64 {
        self.reports.iter().map(|r| r.abs_err).fold(0.0, f64::max)
    }
}

/// Per-iteration deltas between two runs of the same experiment (objective
/// or residual series).
pub fn compare_traces(name: &str, reference: &[f64], candidate: &[f64]) -> TraceComparison {
    let len = reference.len().min(candidate.len());
    let note = if reference.len() != candidate.len() {
        Some(format!(
            "length mismatch ({} vs {}); compared first {len}",
            reference.len(),
            candidate.len()
        ))
    } else {
        None
    };
    let reports = (0..len)
        .map(|k| OracleReport::new(format!("{name}[{k}]"), reference[k], candidate[k]))
        .collect();
    TraceComparison { reports, note }
}

fn elapsed_s(started: std::time::Instant, time_mode: TimeMode) -> f64 {
    match time_mode {
        TimeMode::Wall => started.elapsed().as_secs_f64(),
        TimeMode::Zero => 0.0,
    }
}

fn trace_path(dir: &Path, label: &str, solver: &str) -> PathBuf {
    dir.join(format!("{label}-{solver}.trace.csv"))
}

fn write_trace(path: &Path, header: &str, lines: &[String]) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "{header}").expect("string write");
    for line in lines {
        writeln!(out, "{line}").expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn opt_float(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

fn nce_trace_lines(outcome: &PfpgOutcome, time_mode: TimeMode) -> Vec<String> {
    outcome
        .trace
        .records
        .iter()
        .map(|r| {
            let wall = match time_mode {
                TimeMode::Wall => r.wall_ms,
                TimeMode::Zero => 0.0,
            };
            format!(
                "{},{},{},{},{},{},{},{},{}",
                r.k,
                format_float(r.objective),
                format_float(r.rel_grad),
                opt_float(r.rel_grad_exact),
                r.p,
                r.degree,
                r.repeats,
                format_float(r.relative_gap),
                format_float(wall)
            )
        })
        .collect()
}

fn svt_trace_lines(outcome: &SvtOutcome, time_mode: TimeMode) -> Vec<String> {
    outcome
        .trace
        .iter()
        .map(|r| {
            let wall = match time_mode {
                TimeMode::Wall => r.wall_ms,
                TimeMode::Zero => 0.0,
            };
            format!(
                "{},{},{},{},{}",
                r.k,
                r.svp,
                format_float(r.residual_rel),
                opt_float(r.mse),
                format_float(wall)
            )
        })
        .collect()
}

fn sdp_trace_lines(outcome: &PfamOutcome, time_mode: TimeMode) -> Vec<String> {
    outcome
        .trace
        .records
        .iter()
        .map(|r| {
            let wall = match time_mode {
                TimeMode::Wall => r.wall_ms,
                TimeMode::Zero => 0.0,
            };
            format!(
                "{},{},{},{},{},{},{},{},{},{}",
                r.k,
                format_float(r.pobj),
                format_float(r.pinf),
                format_float(r.dinf),
                format_float(r.gap),
                format_float(r.residual),
                opt_float(r.residual_exact),
                r.p,
                r.degree,
                format_float(wall)
            )
        })
        .collect()
}

const NCE_TRACE_HEADER: &str = "k,f,rel_g,rel_g_exact,p,degree,repeats,relative_gap,wall_ms";
const SVT_TRACE_HEADER: &str = "k,svp,residual_rel,mse,wall_ms";
const SDP_TRACE_HEADER: &str = "k,pobj,pinf,dinf,gap,residual,residual_exact,p,degree,wall_ms";

fn run_nce(config: &ExperimentConfig, trace_dir: Option<&Path>) -> Result<Vec<ResultRow>> {
    let inst: NceInstance = match &config.input {
        Some(path) => io::read_nce_instance(path)?,
        None => gen_example(
            config.example.expect("validated"),
            config.n.expect("validated"),
            config.seed,
        )?,
    };
    let n = inst.matrix().nrows();
    let problem = nce_problem(inst);
    let label = config.label();
    let mut rows = Vec::new();
    for mode in config.modes() {
        let solver = solver_name(mode);
        let started = std::time::Instant::now();
        match pfpg_solve(&problem, &config.pfpg_config(mode)) {
            Ok(outcome) => {
                let time_s = elapsed_s(started, config.time_mode);
                if let Some(dir) = trace_dir {
                    write_trace(
                        &trace_path(dir, &label, solver),
                        NCE_TRACE_HEADER,
                        &nce_trace_lines(&outcome, config.time_mode),
                    )?;
                }
                rows.push(ResultRow::Nce {
                    solver: solver.to_string(),
                    n,
                    time_s,
                    iter: outcome.iterations,
                    f: outcome.objective,
                    rel_g: outcome.rel_grad_exact,
                    status: outcome.trace.status.as_str().to_string(),
                });
            }
            Err(e) => rows.push(ResultRow::Nce {
                solver: solver.to_string(),
                n,
                time_s: 0.0,
                iter: 0,
                f: f64::NAN,
                rel_g: f64::NAN,
                status: format!("error: {e}"),
            }),
        }
    }
    Ok(rows)
}

fn run_svt(config: &ExperimentConfig, trace_dir: Option<&Path>) -> Result<Vec<ResultRow>> {
    let m = config.m.expect("validated");
    let n = config.n.expect("validated");
    let rank = config.rank.expect("validated");
    let sr = config.sr.expect("validated");
    let (inst, truth) = gen_mc(m, n, rank, sr, config.seed)?;
    let label = config.label();
    let mut rows = Vec::new();
    for mode in config.modes() {
        let solver = solver_name(mode);
        let started = std::time::Instant::now();
        match svt_solve(&inst, &config.svt_config(mode), Some(&truth)) {
            Ok(outcome) => {
                let time_s = elapsed_s(started, config.time_mode);
                if let Some(dir) = trace_dir {
                    write_trace(
                        &trace_path(dir, &label, solver),
                        SVT_TRACE_HEADER,
                        &svt_trace_lines(&outcome, config.time_mode),
                    )?;
                }
                rows.push(ResultRow::Svt {
                    solver: solver.to_string(),
                    m,
                    n,
                    sr,
                    r: rank,
                    iter: outcome.iterations,
                    svp: outcome.factors.svp(),
                    time_s,
                    mse: outcome.mse.unwrap_or(f64::NAN),
                    status: outcome.status.as_str().to_string(),
                });
            }
            Err(e) => rows.push(ResultRow::Svt {
                solver: solver.to_string(),
                m,
                n,
                sr,
                r: rank,
                iter: 0,
                svp: 0,
                time_s: 0.0,
                mse: f64::NAN,
                status: format!("error: {e}"),
            }),
        }
    }
    Ok(rows)
}

fn run_sdp(config: &ExperimentConfig, trace_dir: Option<&Path>) -> Result<Vec<ResultRow>> {
    enum AnySdp {
        Dense(crate::problems::sdp::DenseConstraintSdp),
        Diag(crate::problems::sdp::DiagConstraintSdp),
    }
    let generator = config.generator_name().to_string();
    let prob = match generator.as_str() {
        "planted" => {
            let (prob, _) = planted_low_rank_sdp(
                config.n.expect("validated"),
                config.m.expect("validated"),
                config.rank.expect("validated"),
                config.seed,
            )?;
            AnySdp::Dense(prob)
        }
        "cycle" => {
            let w = cycle_weights(config.n.expect("validated"));
            AnySdp::Diag(maxcut_sdp(&w.view(), None)?)
        }
        other => {
            return Err(Error::InvalidConfig(format!("unknown sdp instance `{other}`")));
        }
    };
    let prob: &dyn crate::pfam::SdpProblem = match &prob {
        AnySdp::Dense(p) => p,
        AnySdp::Diag(p) => p,
    };
    let label = config.label();
    let mut rows = Vec::new();
    for mode in config.modes() {
        let solver = solver_name(mode);
        let started = std::time::Instant::now();
        match pfam_solve(prob, &config.pfam_config(mode)) {
            Ok(outcome) => {
                let time_s = elapsed_s(started, config.time_mode);
                if let Some(dir) = trace_dir {
                    write_trace(
                        &trace_path(dir, &label, solver),
                        SDP_TRACE_HEADER,
                        &sdp_trace_lines(&outcome, config.time_mode),
                    )?;
                }
                rows.push(ResultRow::Sdp {
                    solver: solver.to_string(),
                    name: generator.clone(),
                    time_s,
                    iter: outcome.iterations,
                    pobj: outcome.metrics.pobj,
                    pinf: outcome.metrics.pinf,
                    dinf: outcome.metrics.dinf,
                    gap: outcome.metrics.gap,
                    status: outcome.trace.status.as_str().to_string(),
                });
            }
            Err(e) => rows.push(ResultRow::Sdp {
                solver: solver.to_string(),
                name: generator.clone(),
                time_s: 0.0,
                iter: 0,
                pobj: f64::NAN,
                pinf: f64::NAN,
                dinf: f64::NAN,
                gap: f64::NAN,
                status: format!("error: {e}"),
            }),
        }
    }
    Ok(rows)
}

/// Run one experiment. Both solvers (when selected) see the same generated
/// instance; a solver failure becomes a row with an error status rather
/// than aborting the run. Per-iteration traces land in `trace_dir` when
/// given.
pub fn run_experiment(
    config: &ExperimentConfig,
    trace_dir: Option<&Path>,
) -> Result<Vec<ResultRow>> {
    config.validate()?;
    if let Some(dir) = trace_dir {
        std::fs::create_dir_all(dir)?;
    }
    match config.kind {
        ExperimentKind::Nce => run_nce(config, trace_dir),
        ExperimentKind::Svt => run_svt(config, trace_dir),
        ExperimentKind::Sdp => run_sdp(config, trace_dir),
    }
}

/// Run a batch of experiments of one kind, optionally across worker
/// threads. Rows are merged in config order regardless of completion
/// order, so output is deterministic.
pub fn run_batch(
    kind: ExperimentKind,
    configs: &[ExperimentConfig],
    jobs: usize,
    trace_dir: Option<&Path>,
) -> Result<Vec<ResultRow>> {
    for config in configs {
        if config.kind != kind {
            return Err(Error::InvalidConfig(format!(
                "experiment kind {} does not match batch kind {}",
                config.kind.as_str(),
                kind.as_str()
            )));
        }
    }
    let results: Vec<Result<Vec<ResultRow>>> = if jobs <= 1 {
        configs.iter().map(|c| run_experiment(c, trace_dir)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
        pool.install(|| {
            configs
                .par_iter()
                .map(|c| run_experiment(c, trace_dir))
                .collect()
        })
    };
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}
