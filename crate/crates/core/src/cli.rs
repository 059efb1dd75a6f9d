//! Command-line front end: `fit`, `simulate` and `evaluate`.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::evaluation::{evaluate, MetricReport};
use crate::graph::Graph;
use crate::penalty::{PenaltyKind, PenaltySpec};
use crate::search::{GaConfig, StepwiseConfig};
use crate::sem::{
    select_model, FitConfig, InitMethod, InitialGraph, SearchStrategy, Selection, SelectionRow,
};
use crate::simdata::{simulate, ScenarioSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_FIT: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "sparsemix",
    version,
    about = "Model-based clustering with sparse covariance graph mixtures"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit mixtures over a range of K and keep the best by BIC.
    Fit(FitArgs),
    /// Generate a simulated data set with known clusters and graphs.
    Simulate(SimulateArgs),
    /// Compare estimated labels and graphs against the truth.
    Evaluate(EvaluateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PenaltyArg {
    Bic,
    Ebic,
    Er,
    Pl,
    None,
}

impl From<PenaltyArg> for PenaltyKind {
    fn from(p: PenaltyArg) -> Self {
        match p {
            PenaltyArg::Bic => PenaltyKind::Bic,
            PenaltyArg::Ebic => PenaltyKind::Ebic,
            PenaltyArg::Er => PenaltyKind::Er,
            PenaltyArg::Pl => PenaltyKind::PowerLaw,
            PenaltyArg::None => PenaltyKind::None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SearchArg {
    Stepwise,
    Ga,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GraphArg {
    /// Learn each component's graph.
    Search,
    /// Full covariance matrices.
    Complete,
    /// Diagonal covariance matrices.
    Empty,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Hierarchical,
    Kmeans,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Numeric CSV, one observation per row.
    #[arg(long)]
    pub input: PathBuf,
    /// Where to write the fit as JSON.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub k_min: usize,
    #[arg(long, default_value_t = 4)]
    pub k_max: usize,
    #[arg(long, value_enum, default_value_t = PenaltyArg::Er)]
    pub penalty: PenaltyArg,
    /// EBIC weight (default 1).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Erdős–Rényi edge probability (default ln V / T).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Power-law strength (default ln(N V)).
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, value_enum, default_value_t = SearchArg::Stepwise)]
    pub search: SearchArg,
    #[arg(long, value_enum, default_value_t = GraphArg::Search)]
    pub graph: GraphArg,
    /// Occam window width for stepwise search.
    #[arg(long, default_value_t = 50.0)]
    pub occam_c: f64,
    #[arg(long, default_value_t = 50)]
    pub pop_size: usize,
    /// GA generations without improvement before stopping.
    #[arg(long, default_value_t = 100)]
    pub stall: usize,
    #[arg(long, default_value_t = 1000)]
    pub max_generations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to all available cores.
    #[arg(long, env = "SPARSEMIX_THREADS")]
    pub threads: Option<usize>,
    /// Disable the Inverse-Wishart regularization.
    #[arg(long)]
    pub no_prior: bool,
    #[arg(long, default_value_t = 0.001)]
    pub prior_c: f64,
    /// The input has no header row.
    #[arg(long)]
    pub no_header: bool,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// Center and scale every column before fitting.
    #[arg(long)]
    pub standardize: bool,
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
    #[arg(long, value_enum, default_value_t = InitArg::Hierarchical)]
    pub init: InitArg,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    /// Relative objective change that ends EM.
    #[arg(long, default_value_t = 1e-5)]
    pub ll_tol: f64,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub scenario: u8,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub v: usize,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output files are `<prefix>_data.csv`, `<prefix>_labels.csv`,
    /// `<prefix>_graphs.json` and `<prefix>_covariances.json`.
    #[arg(long)]
    pub out_prefix: String,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub truth_labels: PathBuf,
    #[arg(long)]
    pub truth_graphs: PathBuf,
    /// Fit JSON providing estimated labels and graphs.
    #[arg(long, conflicts_with_all = ["labels", "graphs"])]
    pub fit: Option<PathBuf>,
    #[arg(long, requires = "graphs")]
    pub labels: Option<PathBuf>,
    #[arg(long, requires = "labels")]
    pub graphs: Option<PathBuf>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// JSON form of a fitted mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub k: usize,
    pub tau: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<Vec<f64>>>,
    pub graphs: Vec<String>,
    pub loglik_trace: Vec<f64>,
    pub loglik: f64,
    pub bic: f64,
    pub n_params: usize,
    /// 1-based component of every observation.
    pub labels: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
    pub seed: u64,
    pub selection: Vec<SelectionRow>,
}

impl FitOutput {
    pub fn from_selection(sel: &Selection) -> Self {
        let f = &sel.best;
        Self {
            k: f.k,
            tau: f.model.tau.clone(),
            means: f
                .model
                .means
                .iter()
                .map(|m| m.iter().copied().collect())
                .collect(),
            covariances: f
                .model
                .components
                .iter()
                .map(|c| c.sigma.sigma().to_rows())
                .collect(),
            graphs: f
                .model
                .components
                .iter()
                .map(|c| c.graph.to_bitstring())
                .collect(),
            loglik_trace: f.ll_trace.clone(),
            loglik: f.loglik,
            bic: f.bic,
            n_params: f.n_params,
            labels: f.labels.iter().map(|l| l + 1).collect(),
            converged: f.converged,
            iterations: f.iterations,
            seed: f.seed,
            selection: sel.table.clone(),
        }
    }

    pub fn parsed_graphs(&self) -> crate::Result<Vec<Graph>> {
        self.graphs
            .iter()
            .map(|s| Graph::from_bitstring(s))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphsFile {
    pub graphs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub tau: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<Vec<f64>>>,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn parse(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_PARSE,
            message: msg.into(),
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_IO,
            message: format!("{}: {e}", path.display()),
        }
    }

    fn fit(e: Error) -> Self {
        Self {
            code: EXIT_FIT,
            message: format!("fit failed: {e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn read_data(path: &Path, header: bool, delimiter: char) -> CliResult<DMatrix<f64>> {
    if !delimiter.is_ascii() {
        return Err(CliError::parse(format!(
            "delimiter {delimiter:?} is not ASCII"
        )));
    }
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(header)
        .delimiter(delimiter as u8)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut values = Vec::new();
    let mut width = None;
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1 + header as usize;
        let rec = rec.map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
        if width.is_some_and(|w| w != rec.len()) {
            return Err(CliError::parse(format!(
                "{}: line {line} has {} fields",
                path.display(),
                rec.len()
            )));
        }
        width = Some(rec.len());
        for field in rec.iter() {
            let x: f64 = field.parse().map_err(|_| {
                CliError::parse(format!(
                    "{}: line {line}: {field:?} is not a number",
                    path.display()
                ))
            })?;
            if !x.is_finite() {
                return Err(CliError::parse(format!(
                    "{}: line {line}: non-finite value",
                    path.display()
                )));
            }
            values.push(x);
        }
    }
    let v = width.ok_or_else(|| CliError::parse(format!("{}: no data rows", path.display())))?;
    Ok(DMatrix::from_row_slice(values.len() / v, v, &values))
}

fn standardize(x: &mut DMatrix<f64>) -> CliResult<()> {
    let n = x.nrows() as f64;
    for (j, mut col) in x.column_iter_mut().enumerate() {
        let mean = col.sum() / n;
        let sd = (col.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        if sd.is_nan() || sd <= 0.0 {
            return Err(CliError::parse(format!(
                "column {} has zero variance",
                j + 1
            )));
        }
        col.apply(|a| *a = (*a - mean) / sd);
    }
    Ok(())
}

/// Reads a single column of integer labels, with or without a header.
pub fn read_labels(path: &Path) -> CliResult<Vec<usize>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut labels = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
        let field = rec.get(0).unwrap_or("");
        match field.parse::<usize>() {
            Ok(l) => labels.push(l),
            Err(_) if i == 0 => {}
            Err(_) => {
                return Err(CliError::parse(format!(
                    "{}: line {}: bad label {field:?}",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(labels)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| CliError::parse(format!("{}: {e}", path.display())))
}

fn read_graphs(path: &Path) -> CliResult<Vec<Graph>> {
    let gf: GraphsFile = read_json(path)?;
    gf.graphs
        .iter()
        .map(|s| Graph::from_bitstring(s))
        .collect::<crate::Result<_>>()
        .map_err(|e| CliError::parse(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e))?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::parse(format!("cannot start thread pool: {e}")))?;
    Ok(pool.install(f))
}

impl FitArgs {
    pub fn fit_config(&self) -> FitConfig {
        let (search, initial_graph) = match self.graph {
            GraphArg::Complete => (SearchStrategy::Fixed, InitialGraph::Complete),
            GraphArg::Empty => (SearchStrategy::Fixed, InitialGraph::Empty),
            GraphArg::Search => (
                match self.search {
                    SearchArg::Stepwise => SearchStrategy::Stepwise(StepwiseConfig {
                        occam_c: self.occam_c,
                        ..StepwiseConfig::default()
                    }),
                    SearchArg::Ga => SearchStrategy::Genetic(GaConfig {
                        pop_size: self.pop_size,
                        stall_generations: self.stall,
                        max_generations: self.max_generations,
                        ..GaConfig::default()
                    }),
                },
                InitialGraph::Threshold,
            ),
        };
        FitConfig {
            penalty: PenaltySpec {
                kind: self.penalty.into(),
                gamma: self.gamma,
                alpha: self.alpha,
                beta: self.beta,
            },
            search,
            initial_graph,
            prior_c: (!self.no_prior).then_some(self.prior_c),
            init: match self.init {
                InitArg::Hierarchical => InitMethod::Hierarchical,
                InitArg::Kmeans => InitMethod::Kmeans,
            },
            ll_tol: self.ll_tol,
            max_iter: self.max_iter,
            seed: self.seed,
            restarts: self.restarts,
            ..FitConfig::default()
        }
    }
}

pub fn summary_table(sel: &Selection) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>4} {:>14} {:>6}  edges", "K", "BIC", "nu");
    for row in &sel.table {
        let mark = if row.k == sel.best.k { "*" } else { " " };
        match (&row.bic, &row.n_params, &row.edges) {
            (Some(bic), Some(nu), Some(edges)) => {
                let e: Vec<String> = edges.iter().map(|e| e.to_string()).collect();
                let _ = writeln!(s, "{:>3}{mark} {bic:>14.4} {nu:>6}  {}", row.k, e.join(" "));
            }
            _ => {
                let _ = writeln!(
                    s,
                    "{:>3}{mark} {:>14} {:>6}  {}",
                    row.k,
                    "failed",
                    "-",
                    row.error.as_deref().unwrap_or("")
                );
            }
        }
    }
    s
}

pub fn cmd_fit(a: &FitArgs) -> CliResult<()> {
    if a.k_min == 0 || a.k_min > a.k_max {
        return Err(CliError::parse(format!(
            "invalid K range {}..={}",
            a.k_min, a.k_max
        )));
    }
    let mut x = read_data(&a.input, !a.no_header, a.delimiter)?;
    if a.standardize {
        standardize(&mut x)?;
    }
    let cfg = a.fit_config();
    let ks: Vec<usize> = (a.k_min..=a.k_max).collect();
    let sel = with_threads(a.threads, || select_model(&x, &ks, &cfg))?.map_err(CliError::fit)?;
    write_json(&a.output, &FitOutput::from_selection(&sel))?;
    print!("{}", summary_table(&sel));
    Ok(())
}

pub fn cmd_simulate(a: &SimulateArgs) -> CliResult<()> {
    let spec = ScenarioSpec::new(a.scenario, a.v, a.k, a.seed);
    let sim = simulate(&spec, a.n).map_err(|e| CliError::parse(e.to_string()))?;
    let path = |suffix: &str| PathBuf::from(format!("{}_{suffix}", a.out_prefix));

    let data_path = path("data.csv");
    let mut w = csv::Writer::from_path(&data_path).map_err(|e| CliError::io(&data_path, e))?;
    let header: Vec<String> = (1..=a.v).map(|j| format!("x{j}")).collect();
    w.write_record(&header)
        .map_err(|e| CliError::io(&data_path, e))?;
    for row in sim.x.row_iter() {
        w.write_record(row.iter().map(|x| x.to_string()))
            .map_err(|e| CliError::io(&data_path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&data_path, e))?;

    let labels_path = path("labels.csv");
    let mut w = csv::Writer::from_path(&labels_path).map_err(|e| CliError::io(&labels_path, e))?;
    w.write_record(["label"])
        .map_err(|e| CliError::io(&labels_path, e))?;
    for l in &sim.labels {
        w.write_record([(l + 1).to_string()])
            .map_err(|e| CliError::io(&labels_path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&labels_path, e))?;

    write_json(
        &path("graphs.json"),
        &GraphsFile {
            graphs: sim.graphs.iter().map(Graph::to_bitstring).collect(),
        },
    )?;
    write_json(
        &path("covariances.json"),
        &TruthFile {
            tau: sim.tau.clone(),
            means: sim
                .means
                .iter()
                .map(|m| m.iter().copied().collect())
                .collect(),
            covariances: sim
                .covariances
                .iter()
                .map(|c| c.sigma().to_rows())
                .collect(),
        },
    )
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> CliResult<()> {
    let truth_labels = read_labels(&a.truth_labels)?;
    let truth_graphs = read_graphs(&a.truth_graphs)?;
    let (labels, graphs) = match (&a.fit, &a.labels, &a.graphs) {
        (Some(fit), _, _) => {
            let f: FitOutput = read_json(fit)?;
            let g = f
                .parsed_graphs()
                .map_err(|e| CliError::parse(format!("{}: {e}", fit.display())))?;
            (f.labels, g)
        }
        (None, Some(l), Some(g)) => (read_labels(l)?, read_graphs(g)?),
        _ => {
            return Err(CliError::parse(
                "give either --fit or both --labels and --graphs",
            ))
        }
    };
    let report: MetricReport = evaluate(&labels, &truth_labels, &graphs, &truth_graphs)
        .map_err(|e| CliError::parse(e.to_string()))?;
    match &a.output {
        Some(p) => write_json(p, &report),
        None => {
            let s = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::parse(e.to_string()))?;
            println!("{s}");
            Ok(())
        }
    }
}
