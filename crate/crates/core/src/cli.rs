//! Command-line front end. [`run_with`] does all the work so tests can drive
//! it in-process; the `lyap` binary only wires up stdio and logging.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::cantor::{census, detail_line, intersection_dimension, CensusRow, DigitPair};
use crate::error::Error;
use crate::oracle::mc_lyapunov;
use crate::pipeline::{
    lyapunov_pipeline_with, positivize, LyapunovOutcome, Parameters, PipelineOptions,
    PipelineStatus,
};
use crate::projective::Matrix2;
use crate::recurrence::{companion, growth_rate, growth_rate_direct, RecurrenceSpec};

pub const SCHEMA: u32 = 1;
pub const DEFAULT_EPS: f64 = 1e-10;

/// Weights supplied by the user may be off from 1 by this much; they are
/// renormalized.
pub const WEIGHT_SUM_TOL: f64 = 1e-6;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_CERTIFIABLE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "lyap",
    version,
    about = "Certified top Lyapunov exponents of random 2x2 matrix products"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exponent of a weighted matrix family with a certified truncation bound.
    Lyapunov {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        eps: Option<f64>,
        /// Reuse r, N and M from an earlier report.
        #[arg(long)]
        replay: Option<PathBuf>,
        #[command(flatten)]
        pipe: PipeArgs,
    },
    /// Hausdorff dimension of the intersection of two base-b Cantor sets.
    CantorDim {
        #[arg(long)]
        b: u32,
        /// Comma-separated digits.
        #[arg(long)]
        d1: String,
        #[arg(long)]
        d2: String,
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
    },
    /// Count degenerate and connection-free digit-set pairs (CSV).
    Census {
        #[arg(long)]
        b: u32,
        /// Required for b >= 8.
        #[arg(long)]
        slow: bool,
        /// Required for b >= 11.
        #[arg(long)]
        allow_huge: bool,
        #[arg(long)]
        threads: Option<usize>,
        /// Write `D1;D2;STATUS` for every pair to this file.
        #[arg(long)]
        detail: Option<PathBuf>,
    },
    /// Growth rate of x_{n+1} = a x_n + b x_{n-1} with random (a, b).
    Recurrence {
        #[arg(long, conflicts_with = "pairs")]
        file: Option<PathBuf>,
        /// Semicolon-separated pairs, e.g. `1,1;2,1`.
        #[arg(long)]
        pairs: Option<String>,
        /// Comma-separated weights; uniform when omitted.
        #[arg(long)]
        weights: Option<String>,
        #[arg(long)]
        eps: Option<f64>,
        /// Positivize the companion matrices instead of using pair products.
        #[arg(long)]
        direct: bool,
    },
    /// Report how a family is made positive, or why it cannot be.
    CheckPositivize {
        #[arg(long)]
        file: PathBuf,
        #[command(flatten)]
        pipe: PipeArgs,
    },
    /// Monte Carlo estimate (no certificate). Accepts any real matrices.
    Mc {
        #[arg(long, conflicts_with = "pairs")]
        file: Option<PathBuf>,
        /// Recurrence pairs instead of a file, e.g. `1,1;1,-1;-1,1;-1,-1`.
        #[arg(long)]
        pairs: Option<String>,
        #[arg(long)]
        weights: Option<String>,
        #[arg(long, default_value_t = 100_000)]
        steps: usize,
        #[arg(long, default_value_t = 64)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Args, Debug, Clone, Copy)]
struct PipeArgs {
    /// Tolerance for fixed-point matching on non-integer input.
    #[arg(long)]
    tol: Option<f64>,
    /// Never use exact arithmetic, even for integer matrices.
    #[arg(long)]
    no_exact: bool,
}

impl PipeArgs {
    fn options(&self) -> PipelineOptions {
        let mut o = PipelineOptions::default();
        if let Some(t) = self.tol {
            o.tol = t;
        }
        o.exact_integers = !self.no_exact;
        o
    }
}

/// Input problems, as read from a file.
#[derive(Clone, Debug, PartialEq)]
pub enum ProblemFile {
    Matrices {
        matrices: Vec<Matrix2>,
        weights: Option<Vec<f64>>,
        epsilon: Option<f64>,
    },
    Cantor {
        b: u32,
        d1: Vec<u32>,
        d2: Vec<u32>,
        epsilon: Option<f64>,
    },
    Recurrence {
        pairs: Vec<(f64, f64)>,
        weights: Option<Vec<f64>>,
        epsilon: Option<f64>,
    },
}

#[derive(Deserialize, Clone, Copy, PartialEq, Eq, Debug)]
#[serde(rename_all = "snake_case")]
enum Mode {
    Matrices,
    Cantor,
    Recurrence,
}

// Flat on purpose: a tagged enum would buffer the input and lose line numbers.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    mode: Mode,
    matrices: Option<Vec<Matrix2>>,
    weights: Option<Vec<f64>>,
    epsilon: Option<f64>,
    b: Option<u32>,
    d1: Option<Vec<u32>>,
    d2: Option<Vec<u32>>,
    pairs: Option<Vec<(f64, f64)>>,
}

impl RawProblem {
    fn into_problem(self) -> std::result::Result<ProblemFile, InputError> {
        let need = |field: &str| {
            InputError::plain(format!("mode {:?} requires field `{field}`", self.mode))
        };
        let stray = |fields: &[(&str, bool)]| match fields.iter().find(|(_, present)| *present) {
            Some((f, _)) => Err(InputError::plain(format!(
                "field `{f}` does not apply to mode {:?}",
                self.mode
            ))),
            None => Ok(()),
        };
        match self.mode {
            Mode::Matrices => {
                stray(&[
                    ("b", self.b.is_some()),
                    ("d1", self.d1.is_some()),
                    ("d2", self.d2.is_some()),
                    ("pairs", self.pairs.is_some()),
                ])?;
                let matrices = self.matrices.clone().ok_or_else(|| need("matrices"))?;
                Ok(ProblemFile::Matrices {
                    matrices,
                    weights: self.weights,
                    epsilon: self.epsilon,
                })
            }
            Mode::Cantor => {
                stray(&[
                    ("matrices", self.matrices.is_some()),
                    ("weights", self.weights.is_some()),
                    ("pairs", self.pairs.is_some()),
                ])?;
                let b = self.b.ok_or_else(|| need("b"))?;
                let d1 = self.d1.clone().ok_or_else(|| need("d1"))?;
                let d2 = self.d2.clone().ok_or_else(|| need("d2"))?;
                Ok(ProblemFile::Cantor {
                    b,
                    d1,
                    d2,
                    epsilon: self.epsilon,
                })
            }
            Mode::Recurrence => {
                stray(&[
                    ("matrices", self.matrices.is_some()),
                    ("b", self.b.is_some()),
                    ("d1", self.d1.is_some()),
                    ("d2", self.d2.is_some()),
                ])?;
                let pairs = self.pairs.clone().ok_or_else(|| need("pairs"))?;
                Ok(ProblemFile::Recurrence {
                    pairs,
                    weights: self.weights,
                    epsilon: self.epsilon,
                })
            }
        }
    }
}

impl ProblemFile {
    pub fn epsilon(&self) -> Option<f64> {
        match self {
            ProblemFile::Matrices { epsilon, .. }
            | ProblemFile::Cantor { epsilon, .. }
            | ProblemFile::Recurrence { epsilon, .. } => *epsilon,
        }
    }

    /// Parses JSON when the first non-blank character is `{`, otherwise the
    /// text format: one matrix per line as `a b c d [weight]`, `#` starts a
    /// comment. Weights must be given on every line or on none.
    pub fn parse(text: &str) -> std::result::Result<Self, InputError> {
        if text.trim_start().starts_with('{') {
            let raw: RawProblem = serde_json::from_str(text)
                .map_err(|e| InputError::at(e.line(), e.column(), e.to_string()))?;
            raw.into_problem()
        } else {
            parse_text(text)
        }
    }

    pub fn read(path: &Path) -> std::result::Result<Self, InputError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| InputError::plain(format!("cannot read {}: {e}", path.display())))?;
        ProblemFile::parse(&text).map_err(|e| e.in_file(path))
    }
}

/// Input problem with a location when one is known.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub struct InputError {
    pub file: Option<String>,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl InputError {
    fn plain(message: impl Into<String>) -> Self {
        InputError {
            file: None,
            line: None,
            column: None,
            message: message.into(),
        }
    }

    fn at(line: usize, column: usize, message: impl Into<String>) -> Self {
        InputError {
            file: None,
            line: Some(line),
            column: Some(column),
            message: message.into(),
        }
    }

    fn in_file(mut self, path: &Path) -> Self {
        self.file = Some(path.display().to_string());
        self
    }
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(file) = &self.file {
            write!(f, "{file}:")?;
        }
        if let Some(line) = self.line {
            write!(f, "{line}:")?;
            if let Some(col) = self.column {
                write!(f, "{col}:")?;
            }
        }
        if self.file.is_some() || self.line.is_some() {
            write!(f, " ")?;
        }
        write!(f, "{}", self.message)
    }
}

fn parse_text(text: &str) -> std::result::Result<ProblemFile, InputError> {
    let mut matrices = Vec::new();
    let mut weights = Vec::new();
    let mut first_weighted: Option<bool> = None;
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        let mut nums = Vec::new();
        // track byte offsets so errors point at the bad token
        let mut offset = 0;
        for tok in line.split_whitespace() {
            let col = line[offset..]
                .find(tok)
                .map(|p| p + offset)
                .unwrap_or(offset);
            offset = col + tok.len();
            let x: f64 = tok.parse().map_err(|_| {
                InputError::at(ln + 1, col + 1, format!("cannot parse `{tok}` as a number"))
            })?;
            if !x.is_finite() {
                return Err(InputError::at(
                    ln + 1,
                    col + 1,
                    format!("`{tok}` is not finite"),
                ));
            }
            nums.push(x);
        }
        let weighted = match nums.len() {
            4 => false,
            5 => true,
            k => {
                return Err(InputError::at(
                    ln + 1,
                    1,
                    format!("expected `a b c d [weight]`, found {k} numbers"),
                ));
            }
        };
        match first_weighted {
            None => first_weighted = Some(weighted),
            Some(w) if w != weighted => {
                return Err(InputError::at(
                    ln + 1,
                    1,
                    "weights must be given on every line or on none",
                ));
            }
            _ => {}
        }
        matrices.push(Matrix2::new(nums[0], nums[1], nums[2], nums[3]));
        if weighted {
            weights.push(nums[4]);
        }
    }
    if matrices.is_empty() {
        return Err(InputError::plain("no matrices found"));
    }
    let weights = (first_weighted == Some(true)).then_some(weights);
    Ok(ProblemFile::Matrices {
        matrices,
        weights,
        epsilon: None,
    })
}

/// Uniform weights when absent; otherwise checked and renormalized.
pub fn resolve_weights(
    n: usize,
    weights: Option<Vec<f64>>,
) -> std::result::Result<Vec<f64>, InputError> {
    let Some(w) = weights else {
        return Ok(vec![1.0 / n as f64; n]);
    };
    if w.len() != n {
        return Err(InputError::plain(format!(
            "{n} items but {} weights",
            w.len()
        )));
    }
    if let Some(i) = w.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(InputError::plain(format!(
            "weight {i} = {} is not strictly positive",
            w[i]
        )));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(InputError::plain(format!(
            "weights sum to {total}, expected 1"
        )));
    }
    Ok(w.iter().map(|x| x / total).collect())
}

fn parse_list<T: std::str::FromStr>(
    flag: &str,
    s: &str,
) -> std::result::Result<Vec<T>, InputError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .enumerate()
        .map(|(i, t)| {
            t.parse().map_err(|_| {
                InputError::plain(format!("--{flag}: item {} `{t}` is not valid", i + 1))
            })
        })
        .collect()
}

fn parse_pairs(s: &str) -> std::result::Result<Vec<(f64, f64)>, InputError> {
    s.split(';')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .enumerate()
        .map(|(i, t)| {
            let v: Vec<f64> = parse_list("pairs", t)?;
            match v[..] {
                [a, b] => Ok((a, b)),
                _ => Err(InputError::plain(format!(
                    "--pairs: entry {} `{t}` must be `a,b`",
                    i + 1
                ))),
            }
        })
        .collect()
}

/// Everything that makes a command fail. Input and computation errors both
/// exit with 1.
#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("{0}")]
    Input(#[from] InputError),
    #[error("{0}")]
    Compute(#[from] Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

type CmdResult = std::result::Result<i32, Failure>;

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run_with<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(rendered.as_bytes())
            } else {
                err.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT
        }
    }
}

/// Reads `LYAP_LOG` (`quiet`, `info` or `debug`; warnings by default).
pub fn init_logging() {
    let level = match std::env::var("LYAP_LOG").as_deref() {
        Ok("quiet") => log::LevelFilter::Off,
        Ok("info") => log::LevelFilter::Info,
        Ok("debug") => log::LevelFilter::Debug,
        _ => log::LevelFilter::Warn,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .target(env_logger::Target::Stderr)
        .try_init();
}

fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> std::result::Result<T, Failure> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(InputError::plain("--threads must be at least 1").into()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Numerical(format!("cannot start thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn emit(out: &mut dyn Write, report: Value) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, &report)?;
    writeln!(out)
}

fn report_base(command: &str, started: Instant) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema".into(), json!(SCHEMA));
    m.insert("command".into(), json!(command));
    m.insert(
        "timing_ms".into(),
        json!(started.elapsed().as_secs_f64() * 1e3),
    );
    m
}

fn status_fields(m: &mut Map<String, Value>, status: &PipelineStatus, excluded: &[usize]) {
    m.insert("status".into(), json!(status.name()));
    match status {
        PipelineStatus::Conjugated { p, arc } => {
            m.insert("p".into(), json!(p));
            m.insert("arc".into(), json!(arc));
        }
        PipelineStatus::GhcDetected { witness } => {
            m.insert("witness".into(), json!(witness));
            m.insert("witness_text".into(), json!(witness.describe()));
        }
        PipelineStatus::Degenerate { index } => {
            m.insert("singular_index".into(), json!(index));
        }
        PipelineStatus::Positive => {}
    }
    m.insert("excluded".into(), json!(excluded));
}

fn outcome_fields(m: &mut Map<String, Value>, out: &LyapunovOutcome) {
    status_fields(m, &out.status, &out.excluded);
    let v = out.value;
    m.insert("estimate".into(), json!(v.map(|v| v.estimate)));
    m.insert(
        "truncation_bound".into(),
        json!(v.map(|v| v.truncation_bound)),
    );
    m.insert("N".into(), json!(v.map(|v| v.n)));
    m.insert("M".into(), json!(v.map(|v| v.m)));
    m.insert("r".into(), json!(v.map(|v| v.r_used)));
}

fn status_code(status: &PipelineStatus) -> i32 {
    if status.is_certifiable() {
        EXIT_OK
    } else {
        EXIT_NOT_CERTIFIABLE
    }
}

fn warn_not_certifiable(err: &mut dyn Write, status: &PipelineStatus) -> std::io::Result<()> {
    match status {
        PipelineStatus::GhcDetected { witness } => writeln!(
            err,
            "note: {}; the kernel expansion does not apply, try `lyap mc`",
            witness.describe()
        ),
        PipelineStatus::Degenerate { index } => {
            writeln!(
                err,
                "note: matrix {index} is singular; the family is degenerate"
            )
        }
        _ => Ok(()),
    }
}

fn matrices_problem(
    problem: ProblemFile,
) -> std::result::Result<(Vec<Matrix2>, Vec<f64>, Option<f64>), InputError> {
    match problem {
        ProblemFile::Matrices {
            matrices,
            weights,
            epsilon,
        } => {
            if matrices.is_empty() {
                return Err(InputError::plain("no matrices given"));
            }
            let w = resolve_weights(matrices.len(), weights)?;
            Ok((matrices, w, epsilon))
        }
        ProblemFile::Cantor { b, d1, d2, epsilon } => {
            let pair = DigitPair::new(b, &d1, &d2).map_err(|e| InputError::plain(e.to_string()))?;
            let ms = crate::cantor::digit_matrices(&pair);
            let n = ms.len();
            Ok((ms, vec![1.0 / n as f64; n], epsilon))
        }
        ProblemFile::Recurrence {
            pairs,
            weights,
            epsilon,
        } => {
            if pairs.is_empty() {
                return Err(InputError::plain("no coefficient pairs given"));
            }
            let w = resolve_weights(pairs.len(), weights)?;
            Ok((
                pairs.iter().map(|&(a, b)| companion(a, b)).collect(),
                w,
                epsilon,
            ))
        }
    }
}

#[derive(Deserialize)]
struct ReplayParams {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "M")]
    m: usize,
    r: f64,
}

fn read_replay(path: &Path) -> std::result::Result<Parameters, InputError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| InputError::plain(format!("cannot read {}: {e}", path.display())))?;
    let p: ReplayParams = serde_json::from_str(&text).map_err(|e| {
        InputError::at(e.line(), e.column(), format!("not a certified report: {e}")).in_file(path)
    })?;
    Ok(Parameters::Fixed {
        r: p.r,
        n: p.n,
        m: p.m,
    })
}

fn resolve_eps(flag: Option<f64>, file: Option<f64>) -> std::result::Result<f64, InputError> {
    let eps = flag.or(file).unwrap_or(DEFAULT_EPS);
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(InputError::plain(format!("epsilon {eps} must be positive")));
    }
    Ok(eps)
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let started = Instant::now();
    match cmd {
        Command::Lyapunov {
            file,
            eps,
            replay,
            pipe,
        } => {
            let (ms, w, file_eps) = matrices_problem(ProblemFile::read(&file)?)?;
            let params = match replay {
                Some(path) => read_replay(&path)?,
                None => Parameters::Target(resolve_eps(eps, file_eps)?),
            };
            let outcome = lyapunov_pipeline_with(&ms, &w, params, &pipe.options())?;
            let mut m = report_base("lyapunov", started);
            if let Parameters::Target(e) = params {
                m.insert("eps".into(), json!(e));
            }
            outcome_fields(&mut m, &outcome);
            emit(out, Value::Object(m))?;
            warn_not_certifiable(err, &outcome.status)?;
            Ok(status_code(&outcome.status))
        }
        Command::CantorDim { b, d1, d2, eps } => {
            let d1: Vec<u32> = parse_list("d1", &d1)?;
            let d2: Vec<u32> = parse_list("d2", &d2)?;
            let eps = resolve_eps(Some(eps), None)?;
            let pair = DigitPair::new(b, &d1, &d2)?;
            let res = intersection_dimension(&pair, eps)?;
            let mut m = report_base("cantor-dim", started);
            m.insert("b".into(), json!(b));
            m.insert("d1".into(), json!(pair.d1_digits()));
            m.insert("d2".into(), json!(pair.d2_digits()));
            m.insert("eps".into(), json!(eps));
            outcome_fields(&mut m, &res.outcome);
            m.insert("dimension".into(), json!(res.dimension));
            m.insert("dimension_bound".into(), json!(res.dimension_bound));
            emit(out, Value::Object(m))?;
            warn_not_certifiable(err, &res.outcome.status)?;
            Ok(status_code(&res.outcome.status))
        }
        Command::Census {
            b,
            slow,
            allow_huge,
            threads,
            detail,
        } => {
            if b >= 8 && !slow {
                return Err(InputError::plain(format!(
                    "census for b = {b} is slow; pass --slow to run it"
                ))
                .into());
            }
            if b >= 11 && !allow_huge {
                return Err(InputError::plain(format!(
                    "census for b = {b} enumerates about 4^{b} pairs; pass --allow-huge as well"
                ))
                .into());
            }
            let res = with_threads(threads, || census(b, detail.is_some()))??;
            if let (Some(path), Some(details)) = (detail, res.details.as_ref()) {
                let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
                for (pair, status) in details {
                    writeln!(f, "{}", detail_line(pair, *status))?;
                }
                f.flush()?;
            }
            writeln!(out, "{}", CensusRow::CSV_HEADER)?;
            writeln!(out, "{}", res.row.to_csv())?;
            log::info!(
                "census b={b} took {:.1} ms",
                started.elapsed().as_secs_f64() * 1e3
            );
            Ok(EXIT_OK)
        }
        Command::Recurrence {
            file,
            pairs,
            weights,
            eps,
            direct,
        } => {
            let (pairs, w, file_eps) = match (file, pairs) {
                (Some(path), None) => match ProblemFile::read(&path)? {
                    ProblemFile::Recurrence {
                        pairs,
                        weights,
                        epsilon,
                    } => {
                        let w = resolve_weights(pairs.len(), weights)?;
                        (pairs, w, epsilon)
                    }
                    _ => {
                        return Err(InputError::plain(
                            "expected a file with \"mode\": \"recurrence\"",
                        )
                        .in_file(&path)
                        .into())
                    }
                },
                (None, Some(p)) => {
                    let pairs = parse_pairs(&p)?;
                    let w = resolve_weights(
                        pairs.len(),
                        weights.map(|s| parse_list("weights", &s)).transpose()?,
                    )?;
                    (pairs, w, None)
                }
                _ => return Err(InputError::plain("give either --file or --pairs").into()),
            };
            let eps = resolve_eps(eps, file_eps)?;
            let spec = RecurrenceSpec::new(pairs.clone(), w)?;
            let g = if direct {
                growth_rate_direct(&spec, eps)?
            } else {
                growth_rate(&spec, eps)?
            };
            let mut m = report_base("recurrence", started);
            m.insert("pairs".into(), json!(pairs));
            m.insert("eps".into(), json!(eps));
            m.insert(
                "route".into(),
                json!(if direct { "direct" } else { "pairs" }),
            );
            m.insert("status".into(), json!("Positive"));
            m.insert("growth".into(), json!(g.growth));
            m.insert("growth_bound".into(), json!(g.bound));
            m.insert("estimate".into(), json!(g.lyapunov.estimate));
            m.insert(
                "truncation_bound".into(),
                json!(g.lyapunov.truncation_bound),
            );
            m.insert("N".into(), json!(g.lyapunov.n));
            m.insert("M".into(), json!(g.lyapunov.m));
            m.insert("r".into(), json!(g.lyapunov.r_used));
            emit(out, Value::Object(m))?;
            Ok(EXIT_OK)
        }
        Command::CheckPositivize { file, pipe } => {
            let (ms, _, _) = matrices_problem(ProblemFile::read(&file)?)?;
            let pos = positivize(&ms, &pipe.options())?;
            let mut m = report_base("check-positivize", started);
            status_fields(&mut m, &pos.status, &pos.excluded);
            m.insert("images".into(), json!(pos.images));
            emit(out, Value::Object(m))?;
            warn_not_certifiable(err, &pos.status)?;
            Ok(status_code(&pos.status))
        }
        Command::Mc {
            file,
            pairs,
            weights,
            steps,
            trials,
            seed,
            threads,
        } => {
            let (ms, w, recurrence) = match (file, pairs) {
                (Some(path), None) => {
                    let problem = ProblemFile::read(&path)?;
                    let rec = matches!(problem, ProblemFile::Recurrence { .. });
                    let (ms, w, _) = matrices_problem(problem)?;
                    (ms, w, rec)
                }
                (None, Some(p)) => {
                    let pairs = parse_pairs(&p)?;
                    let w = resolve_weights(
                        pairs.len(),
                        weights.map(|s| parse_list("weights", &s)).transpose()?,
                    )?;
                    (
                        pairs.iter().map(|&(a, b)| companion(a, b)).collect(),
                        w,
                        true,
                    )
                }
                _ => return Err(InputError::plain("give either --file or --pairs").into()),
            };
            let est = with_threads(threads, || mc_lyapunov(&ms, &w, steps, trials, seed))??;
            let mut m = report_base("mc", started);
            m.insert("status".into(), json!("MonteCarlo"));
            m.insert("estimate".into(), json!(est.mean));
            m.insert("std_error".into(), json!(est.std_error));
            m.insert("steps".into(), json!(est.steps));
            m.insert("trials".into(), json!(est.trials));
            m.insert("seed".into(), json!(est.seed));
            if recurrence {
                m.insert("growth".into(), json!(est.mean.exp()));
            }
            emit(out, Value::Object(m))?;
            Ok(EXIT_OK)
        }
    }
}
