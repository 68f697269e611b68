//! Command-line front end.
//!
//! Every subcommand reads its parameters from flags and, optionally, from a
//! JSON config file (`--config`) whose keys are the long flag names. Flags
//! win over the file, the file wins over built-in defaults. The resolved
//! configuration is echoed into every artifact the command writes.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::curve::{bezier_arclength, fit_quadratic_bezier, hardy_weinberg_arclength, ArclengthCurve};
use crate::distribution::{BetaParams, Underlying};
use crate::error::{Error, Result};
use crate::graph::{sample_lsm, sample_sbm, AdjacencyKind, AdjacencyMatrix, LatentPositionMatrix, LsmSpec, SbmSpec};
use crate::hypothesis::{
    embed_to_interval, ks_uniform, mann_whitney_less, pvalue_distribution_experiment, two_sample_lsm_test,
    DimensionChoiceMode, PValueConfig, TwoSampleConfig,
};
use crate::inference::{
    align_to_curve, lsm_m_estimate, mse_experiment, mse_table1_csv, mse_table_csv, CurveMode, MseConfig,
    DEFAULT_EPSILON,
};
use crate::io::{self, SCHEMA_VERSION};
use crate::manifold::isomap_unit_interval;
use crate::spectral::{ase, ase_directed, procrustes, select_dimension};

pub const DEFAULT_POLYLINE_POINTS: usize = 512;
pub const DEFAULT_HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Parser)]
#[command(name = "lsgraph", version, about = "Latent structure random graphs: simulation, estimation and testing")]
struct Cli {
    /// Worker threads for parallel loops (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON config file with long flag names as keys; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a Hardy-Weinberg or block model graph.
    Simulate(SimulateArgs),
    /// Adjacency spectral embedding of a graph.
    Embed(EmbedArgs),
    /// Beta parameters from a graph or from latent positions.
    Estimate(EstimateArgs),
    /// Quadratic Bezier support curve through embedded points.
    FitCurve(FitCurveArgs),
    /// Map embedded points to the unit interval.
    Isomap(IsomapArgs),
    /// Two-sample test of equal underlying distributions.
    Test(TestArgs),
    /// Replicated MSE of the Beta estimators.
    MseTable(MseTableArgs),
    /// p-value samples under a null and an alternative.
    PvalueSim(PvalueSimArgs),
}

// ---------------------------------------------------------------------------
// argument value types

/// `a,b` on the command line, `[a, b]` or `"a,b"` in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PairRepr", into = "[f64; 2]")]
pub struct Theta(pub f64, pub f64);

#[derive(Deserialize)]
#[serde(untagged)]
enum PairRepr {
    Array([f64; 2]),
    Text(String),
}

impl TryFrom<PairRepr> for Theta {
    type Error = String;
    fn try_from(r: PairRepr) -> std::result::Result<Self, String> {
        match r {
            PairRepr::Array([a, b]) => Ok(Theta(a, b)),
            PairRepr::Text(s) => s.parse(),
        }
    }
}

impl From<Theta> for [f64; 2] {
    fn from(t: Theta) -> Self {
        [t.0, t.1]
    }
}

impl FromStr for Theta {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let v = parse_floats(s)?;
        match v.as_slice() {
            [a, b] => Ok(Theta(*a, *b)),
            _ => Err(format!("expected 'a,b', got '{s}'")),
        }
    }
}

impl Theta {
    fn params(self, field: &str) -> Result<BetaParams> {
        BetaParams::new(self.0, self.1).map_err(|e| e.context(field))
    }
}

fn parse_floats(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("'{t}' is not a number")))
        .collect()
}

/// `auto` or a positive integer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DimRepr", into = "DimRepr")]
pub enum Dim {
    Auto,
    Fixed(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum DimRepr {
    Number(usize),
    Text(String),
}

impl TryFrom<DimRepr> for Dim {
    type Error = String;
    fn try_from(r: DimRepr) -> std::result::Result<Self, String> {
        match r {
            DimRepr::Number(d) => Dim::from_str(&d.to_string()),
            DimRepr::Text(s) => s.parse(),
        }
    }
}

impl From<Dim> for DimRepr {
    fn from(d: Dim) -> Self {
        match d {
            Dim::Auto => DimRepr::Text("auto".into()),
            Dim::Fixed(k) => DimRepr::Number(k),
        }
    }
}

impl FromStr for Dim {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Dim::Auto);
        }
        match s.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("expected 'auto' or a positive integer, got '{s}'")),
            Ok(d) => Ok(Dim::Fixed(d)),
        }
    }
}

impl From<Dim> for DimensionChoiceMode {
    fn from(d: Dim) -> Self {
        match d {
            Dim::Auto => DimensionChoiceMode::Auto,
            Dim::Fixed(k) => DimensionChoiceMode::Fixed(k),
        }
    }
}

/// Rows separated by `;`, entries by `,`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "Vec<Vec<f64>>")]
pub struct Matrix(pub Vec<Vec<f64>>);

#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixRepr {
    Rows(Vec<Vec<f64>>),
    Text(String),
}

impl TryFrom<MatrixRepr> for Matrix {
    type Error = String;
    fn try_from(r: MatrixRepr) -> std::result::Result<Self, String> {
        match r {
            MatrixRepr::Rows(v) => Ok(Matrix(v)),
            MatrixRepr::Text(s) => s.parse(),
        }
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.0
    }
}

impl FromStr for Matrix {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(';').map(parse_floats).collect::<std::result::Result<_, _>>().map(Matrix)
    }
}

/// Comma separated numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ListRepr", into = "Vec<f64>")]
pub struct FloatList(pub Vec<f64>);

#[derive(Deserialize)]
#[serde(untagged)]
enum ListRepr {
    Values(Vec<f64>),
    Text(String),
}

impl TryFrom<ListRepr> for FloatList {
    type Error = String;
    fn try_from(r: ListRepr) -> std::result::Result<Self, String> {
        match r {
            ListRepr::Values(v) => Ok(FloatList(v)),
            ListRepr::Text(s) => s.parse(),
        }
    }
}

impl From<FloatList> for Vec<f64> {
    fn from(l: FloatList) -> Self {
        l.0
    }
}

impl FromStr for FloatList {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        parse_floats(s).map(FloatList)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    HwBeta,
    Sbm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveChoice {
    Hw,
    Bezier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphFormat {
    Edges,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableLayout {
    /// `table1` for one setting on the known curve, `grid` otherwise.
    Auto,
    Table1,
    Grid,
}

// ---------------------------------------------------------------------------
// layering of flags over config file over defaults

trait Layer {
    fn layer(&mut self, under: Self);
}

impl<T> Layer for Option<T> {
    fn layer(&mut self, under: Self) {
        if self.is_none() {
            *self = under;
        }
    }
}

impl<T> Layer for Vec<T> {
    fn layer(&mut self, under: Self) {
        if self.is_empty() {
            *self = under;
        }
    }
}

macro_rules! layered {
    ($t:ident { $($f:ident),* $(,)? }) => {
        impl $t {
            fn over(mut self, under: Self) -> Self {
                $( Layer::layer(&mut self.$f, under.$f); )*
                self
            }
        }
    };
}

fn required<T: Clone>(v: &Option<T>, field: &str) -> Result<T> {
    v.clone()
        .ok_or_else(|| Error::validation(format!("missing required field `{field}` (flag --{field})")))
}

fn at_least(v: usize, min: usize, field: &str) -> Result<usize> {
    if v < min {
        return Err(Error::validation(format!("`{field}` must be at least {min}, got {v}")));
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// subcommand arguments

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SimulateArgs {
    /// Graph model.
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    /// Beta parameters `a,b` of the Hardy-Weinberg model.
    #[arg(long)]
    pub theta: Option<Theta>,
    /// Vertex count.
    #[arg(long)]
    pub n: Option<usize>,
    /// Base seed; replicate seeds are derived from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Multiplier on all edge probabilities, in (0, 1].
    #[arg(long)]
    pub sparsity: Option<f64>,
    /// Block probability matrix for `sbm`, rows separated by `;`.
    #[arg(long)]
    pub block: Option<Matrix>,
    /// Block mixing weights for `sbm`.
    #[arg(long)]
    pub mixing: Option<FloatList>,
    /// Graph output path (default: stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Graph file format.
    #[arg(long, value_enum)]
    pub format: Option<GraphFormat>,
    /// Write the latent positions as CSV.
    #[arg(long)]
    pub latent_output: Option<PathBuf>,
}
layered!(SimulateArgs { model, theta, n, seed, sparsity, block, mixing, output, format, latent_output });

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct EmbedArgs {
    /// Edge list, or dense matrix when the extension is `.csv`.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Embedding dimension or `auto`.
    #[arg(long)]
    pub d: Option<Dim>,
    /// Largest dimension considered by `--d auto`.
    #[arg(long)]
    pub d_max: Option<usize>,
    /// Embedding CSV (default: stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Eigenvalue sidecar JSON (default: next to `--output`).
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
}
layered!(EmbedArgs { graph, d, d_max, output, sidecar });

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct EstimateArgs {
    /// Edge list, or dense matrix when the extension is `.csv`.
    #[arg(long, conflicts_with = "latent")]
    pub graph: Option<PathBuf>,
    /// Latent position CSV used instead of embedding a graph.
    #[arg(long)]
    pub latent: Option<PathBuf>,
    /// Reference positions for Procrustes alignment.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Embedding dimension or `auto`.
    #[arg(long)]
    pub d: Option<Dim>,
    /// Largest dimension considered by `--d auto`.
    #[arg(long)]
    pub d_max: Option<usize>,
    /// Known Hardy-Weinberg support or a fitted quadratic Bezier.
    #[arg(long, value_enum)]
    pub curve: Option<CurveChoice>,
    /// Pullbacks are clamped to [epsilon, 1 - epsilon].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Result JSON (default: stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Aligned points with their pullbacks, as CSV.
    #[arg(long)]
    pub scatter: Option<PathBuf>,
    /// Support curve polyline CSV.
    #[arg(long)]
    pub polyline: Option<PathBuf>,
    /// Points in the polyline (default 512).
    #[arg(long)]
    pub polyline_points: Option<usize>,
}
layered!(EstimateArgs {
    graph, latent, truth, d, d_max, curve, epsilon, output, scatter, polyline, polyline_points
});

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FitCurveArgs {
    /// Edge list, or dense matrix when the extension is `.csv`.
    #[arg(long, conflicts_with = "latent")]
    pub graph: Option<PathBuf>,
    /// Latent position CSV used instead of embedding a graph.
    #[arg(long)]
    pub latent: Option<PathBuf>,
    /// Embedding dimension or `auto`.
    #[arg(long)]
    pub d: Option<Dim>,
    /// Largest dimension considered by `--d auto`.
    #[arg(long)]
    pub d_max: Option<usize>,
    /// Result JSON (default: stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub polyline: Option<PathBuf>,
    /// Points in the polyline (default 512).
    #[arg(long)]
    pub polyline_points: Option<usize>,
    /// Points the curve was fitted to, as CSV.
    #[arg(long)]
    pub scatter: Option<PathBuf>,
}
layered!(FitCurveArgs { graph, latent, d, d_max, output, polyline, polyline_points, scatter });

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct IsomapArgs {
    /// Edge list, or dense matrix when the extension is `.csv`.
    #[arg(long, conflicts_with = "latent")]
    pub graph: Option<PathBuf>,
    /// Latent position CSV used instead of embedding a graph.
    #[arg(long)]
    pub latent: Option<PathBuf>,
    /// Embedding dimension or `auto`.
    #[arg(long)]
    pub d: Option<Dim>,
    /// Largest dimension considered by `--d auto`.
    #[arg(long)]
    pub d_max: Option<usize>,
    /// Neighbors per point (default: max(10, ceil(log2 n))).
    #[arg(long)]
    pub k: Option<usize>,
    /// Unit-interval values CSV (default: stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Diagnostics JSON (default: next to `--output`).
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}
layered!(IsomapArgs { graph, latent, d, d_max, k, output, diagnostics });

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct TestArgs {
    /// First graph (edge list or `.csv` matrix).
    #[arg(long)]
    pub graph1: Option<PathBuf>,
    /// Second graph.
    #[arg(long)]
    pub graph2: Option<PathBuf>,
    /// Embedding dimension or `auto`.
    #[arg(long)]
    pub d: Option<Dim>,
    /// Largest dimension considered by `--d auto`.
    #[arg(long)]
    pub d_max: Option<usize>,
    /// Isomap neighbors (default: max(10, ceil(log2 n))).
    #[arg(long)]
    pub isomap_k: Option<usize>,
    /// Pullbacks are clamped to [epsilon, 1 - epsilon].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Result JSON (default: stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Unit-interval values of both graphs, as CSV.
    #[arg(long)]
    pub values: Option<PathBuf>,
}
layered!(TestArgs { graph1, graph2, d, d_max, isomap_k, epsilon, output, values });

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct MseTableArgs {
    /// Beta parameters `a,b`; repeat for several columns.
    #[arg(long)]
    pub theta: Vec<Theta>,
    /// Vertex count per graph.
    #[arg(long)]
    pub n: Option<usize>,
    /// Monte Carlo replicates.
    #[arg(long)]
    pub reps: Option<usize>,
    /// `hw` uses the known curve only, `bezier` adds a fitted curve.
    #[arg(long, value_enum)]
    pub curve: Option<CurveChoice>,
    /// Base seed; replicate seeds are derived from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pullbacks are clamped to [epsilon, 1 - epsilon].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// `table1` (two rows), `grid`, or `auto`.
    #[arg(long, value_enum)]
    pub layout: Option<TableLayout>,
    /// Table CSV (default: stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Full per-replicate report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}
layered!(MseTableArgs { theta, n, reps, curve, seed, epsilon, layout, output, json });

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct PvalueSimArgs {
    /// Null Beta parameters `a,b`.
    #[arg(long)]
    pub theta_null: Option<Theta>,
    /// Alternative Beta parameters `a,b`.
    #[arg(long)]
    pub theta_alt: Option<Theta>,
    /// Vertex count per graph.
    #[arg(long)]
    pub n: Option<usize>,
    /// Monte Carlo replicates.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Base seed; replicate seeds are derived from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Embedding dimension or `auto`.
    #[arg(long)]
    pub d: Option<Dim>,
    /// Largest dimension considered by `--d auto`.
    #[arg(long)]
    pub d_max: Option<usize>,
    /// Isomap neighbors (default: max(10, ceil(log2 n))).
    #[arg(long)]
    pub isomap_k: Option<usize>,
    /// Pullbacks are clamped to [epsilon, 1 - epsilon].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Result JSON (default: stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// p-value histogram CSV.
    #[arg(long)]
    pub histogram: Option<PathBuf>,
    /// Histogram bins over [0, 1].
    #[arg(long)]
    pub bins: Option<usize>,
}
layered!(PvalueSimArgs {
    theta_null, theta_alt, n, reps, seed, d, d_max, isomap_k, epsilon, output, histogram, bins
});

// ---------------------------------------------------------------------------
// entry point

/// Parses `args` (program name first), runs the command and returns the exit
/// code: 0 on success, 1 for invalid input, 2 for numerical failure.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        1
    } else {
        2
    }
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::validation("`threads` must be at least 1"));
        }
        // Fails only if a pool already exists, as when called twice in-process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let file = cli.config.as_deref();
    match cli.command {
        Command::Simulate(a) => simulate(a.over(load_config(file)?)),
        Command::Embed(a) => embed(a.over(load_config(file)?)),
        Command::Estimate(a) => estimate(a.over(load_config(file)?)),
        Command::FitCurve(a) => fit_curve(a.over(load_config(file)?)),
        Command::Isomap(a) => isomap(a.over(load_config(file)?)),
        Command::Test(a) => test(a.over(load_config(file)?)),
        Command::MseTable(a) => mse_table(a.over(load_config(file)?)),
        Command::PvalueSim(a) => pvalue_sim(a.over(load_config(file)?)),
    }
}

/// Reads a config object; an optional `schema_version` key must match.
fn load_config<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = io::read_text(path)?;
    let ctx = |m: String| Error::Validation(format!("config {}: {m}", path.display()));
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| ctx(e.to_string()))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| ctx("expected a JSON object".into()))?;
    if let Some(v) = obj.remove("schema_version") {
        if v.as_str() != Some(SCHEMA_VERSION) {
            return Err(ctx(format!("field `schema_version` is {v}, expected \"{SCHEMA_VERSION}\"")));
        }
    }
    serde_json::from_value(value).map_err(|e| ctx(e.to_string()))
}

fn echo<C: Serialize>(command: &str, config: &C) -> Vec<String> {
    vec![
        format!("lsgraph {command} schema_version={SCHEMA_VERSION}"),
        format!("config {}", serde_json::to_string(config).expect("config serializes")),
    ]
}

fn comment_block(lines: &[String]) -> String {
    lines.iter().map(|l| format!("# {l}\n")).collect()
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => io::write_text(p, text),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| Error::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

fn sibling(path: Option<&Path>, explicit: Option<&Path>, ext: &str) -> Option<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| path.map(|p| p.with_extension(ext)))
}

// ---------------------------------------------------------------------------
// plot data

/// Counts of `values` in `bins` equal-width bins over [0, 1]; the last bin is
/// closed. Values outside [0, 1] are rejected.
pub fn histogram(values: &[f64], bins: usize) -> Result<Vec<usize>> {
    if bins == 0 {
        return Err(Error::validation("`bins` must be at least 1"));
    }
    let mut counts = vec![0; bins];
    for &v in values {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::validation(format!("value {v} outside [0, 1]")));
        }
        counts[((v * bins as f64) as usize).min(bins - 1)] += 1;
    }
    Ok(counts)
}

/// `bin_lo,bin_hi,<name>...` rows for several samples.
pub fn histogram_csv(series: &[(&str, &[f64])], bins: usize, comments: &[String]) -> Result<String> {
    let counts: Vec<Vec<usize>> = series.iter().map(|(_, v)| histogram(v, bins)).collect::<Result<_>>()?;
    let mut out = comment_block(comments);
    out.push_str("bin_lo,bin_hi");
    for (name, _) in series {
        write!(out, ",{name}").expect("writing to a string");
    }
    out.push('\n');
    for b in 0..bins {
        write!(out, "{},{}", b as f64 / bins as f64, (b + 1) as f64 / bins as f64).expect("writing to a string");
        for c in &counts {
            write!(out, ",{}", c[b]).expect("writing to a string");
        }
        out.push('\n');
    }
    Ok(out)
}

/// `count` points equally spaced in arclength with their `s` values.
pub fn polyline_csv(curve: &ArclengthCurve, count: usize, comments: &[String]) -> Result<String> {
    if count < 2 {
        return Err(Error::validation("`polyline-points` must be at least 2"));
    }
    let d = curve.ambient_dim();
    let mut header = vec!["s".to_string()];
    header.extend((1..=d).map(|k| format!("x{k}")));
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = curve
        .polyline(count)
        .into_iter()
        .enumerate()
        .map(|(i, p)| [vec![i as f64 / (count - 1) as f64], p].concat());
    Ok(io::format_rows_csv(rows, Some(&refs), comments))
}

fn scatter_csv(x: &LatentPositionMatrix, extra: &[(&str, &[f64])], comments: &[String]) -> String {
    let mut header: Vec<String> = (1..=x.d()).map(|k| format!("x{k}")).collect();
    header.extend(extra.iter().map(|(n, _)| n.to_string()));
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..x.n()).map(|i| {
        let mut r = x.row(i).to_vec();
        r.extend(extra.iter().map(|(_, v)| v[i]));
        r
    });
    io::format_rows_csv(rows, Some(&refs), comments)
}

// ---------------------------------------------------------------------------
// commands

fn simulate(a: SimulateArgs) -> Result<()> {
    let a = a.over(SimulateArgs {
        model: Some(Model::HwBeta),
        sparsity: Some(1.0),
        format: Some(GraphFormat::Edges),
        ..Default::default()
    });
    let seed = required(&a.seed, "seed")?;
    let n = at_least(required(&a.n, "n")?, 1, "n")?;
    let sparsity = a.sparsity.unwrap_or(1.0);
    let (adjacency, latent) = match a.model.unwrap_or(Model::HwBeta) {
        Model::HwBeta => {
            let theta = required(&a.theta, "theta")?.params("theta")?;
            let spec = LsmSpec {
                curve: std::sync::Arc::new(hardy_weinberg_arclength()),
                underlying: Underlying::Beta(theta),
                n,
                sparsity,
            };
            let s = sample_lsm(&spec, seed)?;
            (s.adjacency, s.latent)
        }
        Model::Sbm => {
            let block = required(&a.block, "block")?;
            let mixing = required(&a.mixing, "mixing")?;
            let spec = SbmSpec::from_block_matrix(&block.0, mixing.0).map_err(|e| e.context("block"))?;
            let spec = if sparsity < 1.0 {
                scale_block_points(spec, sparsity)?
            } else {
                spec
            };
            let s = sample_sbm(&spec, n, seed)?;
            (s.adjacency, s.latent)
        }
    };
    let comments = echo("simulate", &a);
    let body = match a.format.unwrap_or(GraphFormat::Edges) {
        GraphFormat::Edges => io::format_edge_list(&adjacency),
        GraphFormat::Csv => io::format_dense_csv(&adjacency),
    };
    emit(a.output.as_deref(), &(comment_block(&comments) + &body))?;
    if let Some(p) = &a.latent_output {
        io::write_text(p, &io::format_latent_csv(&latent, &comments))?;
    }
    Ok(())
}

/// Block points scaled by `sqrt(rho)` so that edge probabilities scale by rho.
fn scale_block_points(mut spec: SbmSpec, rho: f64) -> Result<SbmSpec> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::validation(format!("`sparsity` {rho} outside (0, 1]")));
    }
    let f = rho.sqrt();
    for p in &mut spec.block_points {
        p.iter_mut().for_each(|v| *v *= f);
    }
    Ok(spec)
}

#[derive(Debug, Serialize)]
struct EmbedSummary {
    n: usize,
    kind: AdjacencyKind,
    d_hat: Option<usize>,
    d_used: usize,
    /// Eigenvalue magnitudes, or singular values for a directed graph.
    values: Vec<f64>,
    signed_eigenvalues: Option<Vec<f64>>,
    spectrum_tail: Vec<f64>,
    warnings: Vec<String>,
}

/// Embedding of a graph at a fixed or elbow-selected dimension; directed
/// graphs give `[left | right]` rows.
fn embed_graph(a: &AdjacencyMatrix, d: Dim, d_max: usize) -> Result<(LatentPositionMatrix, EmbedSummary)> {
    let mut warnings = Vec::new();
    let (d_hat, d) = match d {
        Dim::Fixed(d) => (None, d),
        Dim::Auto => {
            let choice = select_dimension(a, d_max.min(a.n()))?;
            warnings.extend(choice.warnings);
            (Some(choice.d), choice.d)
        }
    };
    if a.is_symmetric() {
        let e = ase(a, d)?;
        warnings.extend(e.warnings.iter().cloned());
        let summary = EmbedSummary {
            n: a.n(),
            kind: a.kind(),
            d_hat,
            d_used: e.d_used,
            values: e.eigenvalues.clone(),
            signed_eigenvalues: Some(e.signed_eigenvalues.clone()),
            spectrum_tail: e.spectrum_tail.clone(),
            warnings,
        };
        Ok((e.xhat, summary))
    } else {
        let e = ase_directed(a, d)?;
        warnings.extend(e.warnings.iter().cloned());
        let summary = EmbedSummary {
            n: a.n(),
            kind: a.kind(),
            d_hat,
            d_used: e.d_used,
            values: e.singular_values.clone(),
            signed_eigenvalues: None,
            spectrum_tail: Vec::new(),
            warnings,
        };
        Ok((e.concatenated(), summary))
    }
}

fn embed(a: EmbedArgs) -> Result<()> {
    let a = a.over(EmbedArgs {
        d: Some(Dim::Auto),
        d_max: Some(10),
        ..Default::default()
    });
    let graph = io::read_graph(&required(&a.graph, "graph")?)?;
    let (xhat, summary) = embed_graph(&graph, a.d.unwrap_or(Dim::Auto), at_least(a.d_max.unwrap_or(10), 1, "d-max")?)?;
    let comments = echo("embed", &a);
    emit(a.output.as_deref(), &io::format_latent_csv(&xhat, &comments))?;
    if let Some(p) = sibling(a.output.as_deref(), a.sidecar.as_deref(), "json") {
        io::write_text(&p, &io::to_json("embed", &a, &summary)?)?;
    }
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

/// Positions from `--latent`, or the embedding of `--graph`.
fn points_from(
    graph: &Option<PathBuf>,
    latent: &Option<PathBuf>,
    d: Dim,
    d_max: usize,
) -> Result<(LatentPositionMatrix, Option<EmbedSummary>)> {
    match (graph, latent) {
        (Some(g), None) => {
            let a = io::read_graph(g)?;
            let (x, s) = embed_graph(&a, d, d_max)?;
            Ok((x, Some(s)))
        }
        (None, Some(l)) => {
            let x = io::parse_latent_csv(&io::read_text(l)?).map_err(|e| e.context(&l.display().to_string()))?;
            Ok((x, None))
        }
        _ => Err(Error::validation("exactly one of `graph` and `latent` is required")),
    }
}

#[derive(Debug, Serialize)]
struct AlignmentSummary {
    method: &'static str,
    iterations: usize,
    converged: bool,
    residual: f64,
}

#[derive(Debug, Serialize)]
struct CurveSummary {
    kind: CurveChoice,
    length: f64,
    control_points: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize)]
struct EstimateSummary {
    theta: [f64; 2],
    fit: crate::inference::FitResult,
    clamped: usize,
    outside_tube_fraction: f64,
    support_misfit: bool,
    alignment: AlignmentSummary,
    curve: CurveSummary,
    embedding: Option<EmbedSummary>,
    warnings: Vec<String>,
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let a = a.over(EstimateArgs {
        d: Some(Dim::Fixed(3)),
        d_max: Some(10),
        curve: Some(CurveChoice::Hw),
        epsilon: Some(DEFAULT_EPSILON),
        polyline_points: Some(DEFAULT_POLYLINE_POINTS),
        ..Default::default()
    });
    let eps = a.epsilon.unwrap_or(DEFAULT_EPSILON);
    let (xhat, embedding) = points_from(&a.graph, &a.latent, a.d.unwrap_or(Dim::Fixed(3)), a.d_max.unwrap_or(10))?;
    let mut warnings = Vec::new();
    let curve_choice = a.curve.unwrap_or(CurveChoice::Hw);
    let (aligned, alignment) = match (&a.truth, curve_choice) {
        (Some(t), _) => {
            let truth = io::parse_latent_csv(&io::read_text(t)?).map_err(|e| e.context("truth"))?;
            let al = procrustes(&xhat, &truth).map_err(|e| e.context("truth"))?;
            let summary = AlignmentSummary {
                method: "procrustes-to-truth",
                iterations: 1,
                converged: true,
                residual: al.residual,
            };
            (al.apply(&xhat), summary)
        }
        (None, CurveChoice::Hw) => {
            let al = align_to_curve(&xhat, &hardy_weinberg_arclength())?;
            warnings.push(
                "the Hardy-Weinberg curve is mapped onto itself by an orthogonal reversal, so (b, a) fits the graph equally well"
                    .to_string(),
            );
            if !al.converged {
                warnings.push("curve alignment did not converge".into());
            }
            let summary = AlignmentSummary {
                method: "curve-icp",
                iterations: al.iterations,
                converged: al.converged,
                residual: al.alignment.residual,
            };
            (al.alignment.apply(&xhat), summary)
        }
        (None, CurveChoice::Bezier) => {
            warnings.push("curve orientation is not identifiable; (b, a) corresponds to the reversed curve".into());
            let summary = AlignmentSummary {
                method: "none",
                iterations: 0,
                converged: true,
                residual: 0.0,
            };
            (xhat.clone(), summary)
        }
    };
    let (curve, control_points) = match curve_choice {
        CurveChoice::Hw => (hardy_weinberg_arclength(), None),
        CurveChoice::Bezier => {
            let fit = fit_quadratic_bezier(&aligned.to_rows())?;
            if !fit.converged {
                warnings.push("Bezier fit did not converge".into());
            }
            let cps = fit.curve.control_points().to_vec();
            (bezier_arclength(&fit.curve)?, Some(cps))
        }
    };
    let m = lsm_m_estimate(&aligned, &curve, eps)?;
    if m.support_misfit {
        warnings.push(format!(
            "{:.1}% of the points lie outside the curve's tube",
            100.0 * m.outside_tube_fraction
        ));
    }
    let comments = echo("estimate", &a);
    if let Some(p) = &a.scatter {
        io::write_text(p, &scatter_csv(&aligned, &[("pullback", &m.pullbacks)], &comments))?;
    }
    if let Some(p) = &a.polyline {
        io::write_text(p, &polyline_csv(&curve, a.polyline_points.unwrap_or(DEFAULT_POLYLINE_POINTS), &comments)?)?;
    }
    let summary = EstimateSummary {
        theta: m.fit.theta.as_array(),
        fit: m.fit.clone(),
        clamped: m.clamped,
        outside_tube_fraction: m.outside_tube_fraction,
        support_misfit: m.support_misfit,
        alignment,
        curve: CurveSummary {
            kind: curve_choice,
            length: curve.length(),
            control_points,
        },
        embedding,
        warnings,
    };
    emit(a.output.as_deref(), &io::to_json("estimate", &a, &summary)?)
}

#[derive(Debug, Serialize)]
struct FitCurveSummary {
    control_points: Vec<Vec<f64>>,
    length: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
    n: usize,
    embedding: Option<EmbedSummary>,
}

fn fit_curve(a: FitCurveArgs) -> Result<()> {
    let a = a.over(FitCurveArgs {
        d: Some(Dim::Fixed(3)),
        d_max: Some(10),
        polyline_points: Some(DEFAULT_POLYLINE_POINTS),
        ..Default::default()
    });
    let (x, embedding) = points_from(&a.graph, &a.latent, a.d.unwrap_or(Dim::Fixed(3)), a.d_max.unwrap_or(10))?;
    let fit = fit_quadratic_bezier(&x.to_rows())?;
    let curve = bezier_arclength(&fit.curve)?;
    let comments = echo("fit-curve", &a);
    if let Some(p) = &a.polyline {
        io::write_text(p, &polyline_csv(&curve, a.polyline_points.unwrap_or(DEFAULT_POLYLINE_POINTS), &comments)?)?;
    }
    if let Some(p) = &a.scatter {
        io::write_text(p, &scatter_csv(&x, &[], &comments))?;
    }
    let summary = FitCurveSummary {
        control_points: fit.curve.control_points().to_vec(),
        length: curve.length(),
        residual: fit.residual,
        iterations: fit.iterations,
        converged: fit.converged,
        n: x.n(),
        embedding,
    };
    emit(a.output.as_deref(), &io::to_json("fit-curve", &a, &summary)?)
}

#[derive(Debug, Serialize)]
struct IsomapDiagnostics {
    k_final: usize,
    stress: f64,
    orientation: crate::manifold::Orientation,
    scaling: String,
    /// Present for graph input, where the coordinate is oriented to
    /// correlate nonnegatively with degree.
    degree_correlation: Option<f64>,
    warnings: Vec<String>,
}

fn isomap(a: IsomapArgs) -> Result<()> {
    let a = a.over(IsomapArgs {
        d: Some(Dim::Auto),
        d_max: Some(10),
        ..Default::default()
    });
    let (values, diag) = match (&a.graph, &a.latent) {
        (Some(g), None) => {
            let graph = io::read_graph(g)?;
            let config = TwoSampleConfig {
                dimension: a.d.unwrap_or(Dim::Auto).into(),
                d_max: a.d_max.unwrap_or(10),
                isomap_k: a.k,
                epsilon: DEFAULT_EPSILON,
            };
            let (emb, _, g) = embed_to_interval(&graph, &config)?;
            let diag = IsomapDiagnostics {
                k_final: emb.k_used,
                stress: emb.stress,
                orientation: emb.orientation,
                scaling: emb.scaling.clone(),
                degree_correlation: Some(g.degree_correlation),
                warnings: g.warnings,
            };
            (emb.values, diag)
        }
        (None, Some(_)) => {
            let (x, _) = points_from(&None, &a.latent, Dim::Auto, 0)?;
            let emb = isomap_unit_interval(&x.to_rows(), a.k)?;
            let diag = IsomapDiagnostics {
                k_final: emb.k_used,
                stress: emb.stress,
                orientation: emb.orientation,
                scaling: emb.scaling.clone(),
                degree_correlation: None,
                warnings: Vec::new(),
            };
            (emb.values, diag)
        }
        _ => return Err(Error::validation("exactly one of `graph` and `latent` is required")),
    };
    let comments = echo("isomap", &a);
    let csv = io::format_rows_csv(values.iter().map(|&v| vec![v]), Some(&["y"]), &comments);
    emit(a.output.as_deref(), &csv)?;
    if let Some(p) = sibling(a.output.as_deref(), a.diagnostics.as_deref(), "json") {
        io::write_text(&p, &io::to_json("isomap", &a, &diag)?)?;
    }
    Ok(())
}

fn test(a: TestArgs) -> Result<()> {
    let a = a.over(TestArgs {
        d: Some(Dim::Auto),
        d_max: Some(10),
        epsilon: Some(DEFAULT_EPSILON),
        ..Default::default()
    });
    let g1 = io::read_graph(&required(&a.graph1, "graph1")?).map_err(|e| e.context("graph1"))?;
    let g2 = io::read_graph(&required(&a.graph2, "graph2")?).map_err(|e| e.context("graph2"))?;
    let config = TwoSampleConfig {
        dimension: a.d.unwrap_or(Dim::Auto).into(),
        d_max: at_least(a.d_max.unwrap_or(10), 1, "d-max")?,
        isomap_k: a.isomap_k,
        epsilon: a.epsilon.unwrap_or(DEFAULT_EPSILON),
    };
    let report = two_sample_lsm_test(&g1, &g2, &config)?;
    let comments = echo("test", &a);
    if let Some(p) = &a.values {
        let rows = report.values[0]
            .iter()
            .map(|&v| vec![1.0, v])
            .chain(report.values[1].iter().map(|&v| vec![2.0, v]));
        io::write_text(p, &io::format_rows_csv(rows, Some(&["graph", "y"]), &comments))?;
    }
    emit(a.output.as_deref(), &io::to_json("test", &a, &report)?)
}

fn mse_table(a: MseTableArgs) -> Result<()> {
    let a = a.over(MseTableArgs {
        curve: Some(CurveChoice::Hw),
        epsilon: Some(DEFAULT_EPSILON),
        layout: Some(TableLayout::Auto),
        ..Default::default()
    });
    if a.theta.is_empty() {
        return Err(Error::validation("missing required field `theta` (flag --theta)"));
    }
    let seed = required(&a.seed, "seed")?;
    let n = required(&a.n, "n")?;
    let reps = required(&a.reps, "reps")?;
    let mode = match a.curve.unwrap_or(CurveChoice::Hw) {
        CurveChoice::Hw => CurveMode::TrueHw,
        CurveChoice::Bezier => CurveMode::FittedBezier,
    };
    let mut reports = Vec::new();
    for (i, t) in a.theta.iter().enumerate() {
        let mut cfg = MseConfig::new(mode, t.params("theta")?, n, reps, seed);
        cfg.epsilon = a.epsilon.unwrap_or(DEFAULT_EPSILON);
        let report = mse_experiment(&cfg).map_err(|e| e.context(&format!("theta #{}", i + 1)))?;
        eprintln!(
            "theta=({}, {}): {} of {} replicates in {:.1} s",
            t.0, t.1, report.replicates_completed, reps, report.runtime_secs
        );
        reports.push(report);
    }
    let layout = match a.layout.unwrap_or(TableLayout::Auto) {
        TableLayout::Auto if reports.len() == 1 && mode == CurveMode::TrueHw => TableLayout::Table1,
        TableLayout::Auto => TableLayout::Grid,
        l => l,
    };
    let table = match layout {
        TableLayout::Table1 if reports.len() == 1 => mse_table1_csv(&reports[0]),
        TableLayout::Table1 => return Err(Error::validation("`layout` table1 needs exactly one `theta`")),
        _ => mse_table_csv(&reports),
    };
    let comments = echo("mse-table", &a);
    emit(a.output.as_deref(), &(comment_block(&comments) + &table))?;
    if let Some(p) = &a.json {
        io::write_text(p, &io::to_json("mse-table", &a, &reports)?)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct PvalueSummary {
    replicates_completed: usize,
    median_null: f64,
    median_alt: f64,
    median_null_flipped: f64,
    /// One-sample KS test of the null p-values against uniform.
    null_uniformity_p: f64,
    /// One-sided Mann-Whitney test that alternative p-values are smaller.
    alt_smaller_p: f64,
    samples: crate::hypothesis::PValueSamples,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len();
    if m == 0 {
        f64::NAN
    } else if m % 2 == 1 {
        s[m / 2]
    } else {
        0.5 * (s[m / 2 - 1] + s[m / 2])
    }
}

fn pvalue_sim(a: PvalueSimArgs) -> Result<()> {
    let a = a.over(PvalueSimArgs {
        theta_null: Some(Theta(2.0, 5.0)),
        theta_alt: Some(Theta(3.0, 4.0)),
        n: Some(500),
        reps: Some(200),
        d: Some(Dim::Fixed(3)),
        d_max: Some(10),
        epsilon: Some(DEFAULT_EPSILON),
        bins: Some(DEFAULT_HISTOGRAM_BINS),
        ..Default::default()
    });
    let seed = required(&a.seed, "seed")?;
    let mut cfg = PValueConfig::new(
        a.theta_null.unwrap_or(Theta(2.0, 5.0)).params("theta-null")?,
        a.theta_alt.unwrap_or(Theta(3.0, 4.0)).params("theta-alt")?,
        a.n.unwrap_or(500),
        a.reps.unwrap_or(200),
        seed,
    );
    cfg.test = TwoSampleConfig {
        dimension: a.d.unwrap_or(Dim::Fixed(3)).into(),
        d_max: a.d_max.unwrap_or(10),
        isomap_k: a.isomap_k,
        epsilon: a.epsilon.unwrap_or(DEFAULT_EPSILON),
    };
    let samples = pvalue_distribution_experiment(&cfg)?;
    let comments = echo("pvalue-sim", &a);
    if let Some(p) = &a.histogram {
        let csv = histogram_csv(
            &[
                ("p_null", &samples.p_null),
                ("p_alt", &samples.p_alt),
                ("p_null_flipped", &samples.p_null_flipped),
            ],
            a.bins.unwrap_or(DEFAULT_HISTOGRAM_BINS),
            &comments,
        )?;
        io::write_text(p, &csv)?;
    }
    let summary = PvalueSummary {
        replicates_completed: samples.p_null.len(),
        median_null: median(&samples.p_null),
        median_alt: median(&samples.p_alt),
        median_null_flipped: median(&samples.p_null_flipped),
        null_uniformity_p: ks_uniform(&samples.p_null)?.p_value,
        alt_smaller_p: mann_whitney_less(&samples.p_alt, &samples.p_null)?.1,
        samples,
    };
    emit(a.output.as_deref(), &io::to_json("pvalue-sim", &a, &summary)?)
}
