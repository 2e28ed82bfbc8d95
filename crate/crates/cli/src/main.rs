use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dp_polytope::enumeration::ORACLE_MAX_N;
use dp_polytope::{
    analyze, build_system, canonical_form, conjecture_probe, enumerate_corner_family, enumerate_tight_family,
    family_membership, optimize_over_vertices, simplex_optimize, vertex_oracle, Error, Family, Mechanism,
    Membership, PrivacyParameter, Provenance, Rational, UtilityMatrix, VertexSet,
};
use serde::Serialize;

mod files;
mod verify;

use files::{InputError, MatrixRecord, VERTICES_SCHEMA};

#[derive(Parser)]
#[command(name = "dp-polytope", version, about = "Exact analysis of the local differential privacy polytope")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test a matrix file for membership; lists violated constraints.
    Check(CheckArgs),
    /// Report support, loose entries, rank, tight constraints and family.
    Analyze(MatrixArgs),
    /// List extreme points from the generators or the vertex oracle.
    Enumerate(EnumerateArgs),
    /// Run the structural checks for one (n, t).
    Verify(VerifyArgs),
    /// Maximize a linear utility over the polytope.
    Optimize(OptimizeArgs),
    /// Maximize random utilities and classify every optimum.
    Probe(ProbeArgs),
}

#[derive(Args)]
struct PrivacyArgs {
    /// Privacy parameter t = e^eps as an exact rational, e.g. "2" or "3/2".
    #[arg(long, conflicts_with = "eps_ln2_multiple")]
    t: Option<Rational>,
    /// Sets t = 2^k, i.e. eps = k ln 2.
    #[arg(long, value_name = "K")]
    eps_ln2_multiple: Option<u32>,
}

impl PrivacyArgs {
    fn get(&self) -> Result<Option<PrivacyParameter>, Failure> {
        if let Some(k) = self.eps_ln2_multiple {
            return Ok(Some(PrivacyParameter::from_ln2_multiple(k)));
        }
        self.t.clone().map(PrivacyParameter::new).transpose().map_err(Failure::from)
    }

    fn require(&self) -> Result<PrivacyParameter, Failure> {
        self.get()?.ok_or_else(|| Failure::Input("one of --t or --eps-ln2-multiple is required".into()))
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct MatrixArgs {
    /// Matrix file; its "t" field is used unless --t is given.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    privacy: PrivacyArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    matrix: MatrixArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Generator,
    Oracle,
}

#[derive(Args)]
struct EnumerateArgs {
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    privacy: PrivacyArgs,
    #[arg(long, value_enum, default_value_t = Mode::Generator)]
    mode: Mode,
    /// Keep one representative per row/column permutation orbit.
    #[arg(long)]
    canonical: bool,
    /// Work limit for the oracle; required for n = 4.
    #[arg(long)]
    budget: Option<u64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    privacy: PrivacyArgs,
    /// A matrix to certify in addition to the generated points.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptMethod {
    Simplex,
    Vertices,
}

#[derive(Args)]
struct OptimizeArgs {
    /// Utility file with an n x n "weights" array.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    privacy: PrivacyArgs,
    #[arg(long, value_enum, default_value_t = OptMethod::Simplex)]
    method: OptMethod,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    privacy: PrivacyArgs,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutputArgs,
}

/// Outcome of a command other than success.
#[derive(Debug)]
enum Failure {
    /// The question was answered and the answer is negative; exit 1.
    Negative,
    /// Bad input or usage; exit 2.
    Input(String),
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::Input(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn emit(out: &OutputArgs, text: &str) -> std::io::Result<()> {
    match &out.output {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn emit_json<T: Serialize>(out: &OutputArgs, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    emit(out, &text)
}

fn json_only(out: &OutputArgs, command: &str) -> CmdResult {
    match out.format {
        Format::Json => Ok(()),
        Format::Csv => Err(Failure::Input(format!("{command}: csv output is not available"))),
    }
}

/// Matrix input together with the privacy parameter from the flags or, failing
/// that, the file.
fn load_matrix(args: &MatrixArgs) -> Result<(files::MatrixFile, PrivacyParameter), Failure> {
    let file = files::read_matrix_file(&args.input)?;
    let t = match (args.privacy.get()?, &file.t) {
        (Some(t), _) => t,
        (None, Some(t)) => t.clone(),
        (None, None) => return Err(Failure::Input("t: missing from the file and not given with --t".into())),
    };
    Ok((file, t))
}

fn one_based(i: usize) -> usize {
    i + 1
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ConstraintRef {
    index: usize,
    constraint: String,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CheckReport {
    n: usize,
    t: PrivacyParameter,
    result: &'static str,
    violations: Vec<ConstraintRef>,
}

fn cmd_check(args: &CheckArgs) -> CmdResult {
    let (file, t) = load_matrix(&args.matrix)?;
    let n = file.matrix.rows();
    let sys = build_system(n, &t);
    let violated = match sys.membership(&file.matrix)? {
        Membership::InD => Vec::new(),
        Membership::Violation(v) => v,
    };
    let violations: Vec<ConstraintRef> = violated
        .iter()
        .map(|&i| ConstraintRef { index: i, constraint: sys.constraint(i).kind.to_string() })
        .collect();
    let member = violations.is_empty();
    let out = &args.matrix.out;
    match out.format {
        Format::Json => emit_json(
            out,
            &CheckReport { n, t, result: if member { "InD" } else { "Violation" }, violations },
        )?,
        Format::Csv => {
            let mut text = String::from("index,constraint\n");
            for v in &violations {
                text.push_str(&format!("{},{}\n", v.index, v.constraint));
            }
            emit(out, &text)?;
        }
    }
    if member {
        Ok(())
    } else {
        Err(Failure::Negative)
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct AnalyzeReport {
    n: usize,
    t: PrivacyParameter,
    gamma: Vec<usize>,
    lambda: Vec<[usize; 2]>,
    rank: usize,
    is_extreme: bool,
    tight_rank: usize,
    tight_constraints: Vec<ConstraintRef>,
    family_tag: dp_polytope::FamilyTag,
}

fn cmd_analyze(args: &MatrixArgs) -> CmdResult {
    json_only(&args.out, "analyze")?;
    let (file, t) = load_matrix(args)?;
    let n = file.matrix.rows();
    let sys = build_system(n, &t);
    if let Membership::Violation(v) = sys.membership(&file.matrix)? {
        eprintln!("error: matrix is not in the polytope; violated constraints {v:?}");
        return Err(Failure::Negative);
    }
    let a = Mechanism::new(file.matrix)?;
    let r = analyze(&a, &sys)?;
    let report = AnalyzeReport {
        n,
        gamma: r.gamma.iter().copied().map(one_based).collect(),
        lambda: r.lambda.iter().map(|&(i, j)| [one_based(i), one_based(j)]).collect(),
        rank: r.rank,
        is_extreme: r.is_extreme(),
        tight_rank: r.certificate.rank,
        tight_constraints: r
            .tight_indices()
            .iter()
            .map(|&i| ConstraintRef { index: i, constraint: sys.constraint(i).kind.to_string() })
            .collect(),
        family_tag: r.family_tag,
        t,
    };
    emit_json(&args.out, &report)?;
    Ok(())
}

#[derive(Serialize)]
struct VertexExtra {
    provenance: Provenance,
    family: Family,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct VertexList<'a> {
    schema: &'static str,
    n: usize,
    t: &'a PrivacyParameter,
    mode: &'static str,
    canonical: bool,
    /// Computed by this tool, not taken from a reference table.
    count: usize,
    vertices: Vec<MatrixRecord<'a, VertexExtra>>,
}

fn cmd_enumerate(args: &EnumerateArgs) -> CmdResult {
    let t = args.privacy.require()?;
    let n = args.n;
    if n == 0 {
        return Err(Failure::Input("n: must be at least 1".into()));
    }
    let set = match args.mode {
        Mode::Generator => {
            if n > ORACLE_MAX_N {
                return Err(Failure::Input(format!(
                    "n: generator enumeration supports n <= {ORACLE_MAX_N}, got {n}"
                )));
            }
            enumerate_corner_family(n, &t).union(&enumerate_tight_family(n, &t))
        }
        Mode::Oracle => match vertex_oracle(n, &t, args.budget) {
            Err(e @ Error::BudgetExhausted { .. }) => {
                eprintln!("error: {e}");
                return Err(Failure::Negative);
            }
            other => other?,
        },
    };
    let set = if args.canonical { canonicalize(&set)? } else { set };
    let families: Vec<Family> = set.vertices().iter().map(|v| family_membership(v, &t)).collect();
    match args.out.format {
        Format::Json => {
            let vertices = set
                .iter()
                .zip(&families)
                .map(|((v, provenance), &family)| MatrixRecord::with(&t, v, VertexExtra { provenance, family }))
                .collect();
            let list = VertexList {
                schema: VERTICES_SCHEMA,
                n,
                t: &t,
                mode: match args.mode {
                    Mode::Generator => "generator",
                    Mode::Oracle => "oracle",
                },
                canonical: args.canonical,
                count: set.len(),
                vertices,
            };
            emit_json(&args.out, &list)?;
        }
        Format::Csv => {
            let mut text = String::from("index,provenance,family");
            for i in 1..=n {
                for j in 1..=n {
                    text.push_str(&format!(",a{i}_{j}"));
                }
            }
            text.push('\n');
            for (k, ((v, provenance), family)) in set.iter().zip(&families).enumerate() {
                text.push_str(&format!("{k},{provenance:?},{family:?}"));
                for x in v.entries() {
                    text.push_str(&format!(",{x}"));
                }
                text.push('\n');
            }
            emit(&args.out, &text)?;
        }
    }
    Ok(())
}

/// One representative per orbit, in order of first appearance.
fn canonicalize(set: &VertexSet) -> Result<VertexSet, Failure> {
    let mut out = VertexSet::new(set.n(), set.t().clone());
    for (v, provenance) in set.iter() {
        out.insert(canonical_form(v)?, provenance);
    }
    Ok(out)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct VerifyReport {
    n: usize,
    t: PrivacyParameter,
    passed: bool,
    suites: Vec<verify::SuiteResult>,
}

fn cmd_verify(args: &VerifyArgs) -> CmdResult {
    json_only(&args.out, "verify")?;
    let t = args.privacy.require()?;
    let supplied = match &args.input {
        None => None,
        Some(path) => {
            let file = files::read_matrix_file(path)?;
            if file.matrix.rows() != args.n {
                return Err(Failure::Input(format!(
                    "{}: matrix is {}x{} but --n is {}",
                    path.display(),
                    file.matrix.rows(),
                    file.matrix.rows(),
                    args.n
                )));
            }
            Some(Mechanism::new(file.matrix)?)
        }
    };
    let suites = verify::run(args.n, &t, supplied.as_ref(), args.seed)?;
    if suites.is_empty() {
        return Err(Failure::Input(format!(
            "n: nothing to verify for n = {} without --input (suites cover n <= {ORACLE_MAX_N})",
            args.n
        )));
    }
    let passed = suites.iter().all(|s| s.passed);
    emit_json(&args.out, &VerifyReport { n: args.n, t, passed, suites })?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Negative)
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct OptimizeReport<'a> {
    n: usize,
    t: &'a PrivacyParameter,
    method: dp_polytope::Method,
    value: Rational,
    argmax: MatrixRecord<'a>,
    tight_indices: &'a [usize],
    pivots: usize,
}

fn cmd_optimize(args: &OptimizeArgs) -> CmdResult {
    json_only(&args.out, "optimize")?;
    let t = args.privacy.require()?;
    let u = UtilityMatrix::new(files::read_utility_file(&args.input)?)?;
    let n = u.n();
    let result = match args.method {
        OptMethod::Simplex => simplex_optimize(&u, &build_system(n, &t))?,
        OptMethod::Vertices => optimize_over_vertices(&u, &vertex_oracle(n, &t, None)?)?,
    };
    let report = OptimizeReport {
        n,
        t: &t,
        method: result.method,
        value: result.value.clone(),
        argmax: MatrixRecord::new(&t, &result.argmax),
        tight_indices: &result.certificate,
        pivots: result.pivots,
    };
    emit_json(&args.out, &report)?;
    Ok(())
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ProbeSummary<'a> {
    n: usize,
    t: &'a PrivacyParameter,
    seed: u64,
    trials: usize,
    distinct_optima: usize,
    family_counts: &'a BTreeMap<String, usize>,
    counters_found: Vec<MatrixRecord<'a>>,
    counter_files: Vec<String>,
    non_extreme_optima: Vec<MatrixRecord<'a>>,
    property_failures: &'a [dp_polytope::properties::PropertyFailure],
    clean: bool,
}

/// `report.json` -> `report-counter-3.json`, next to the report.
fn counter_path(report: &Path, k: usize) -> PathBuf {
    let stem = report.file_stem().and_then(|s| s.to_str()).unwrap_or("probe");
    report.with_file_name(format!("{stem}-counter-{k}.json"))
}

fn cmd_probe(args: &ProbeArgs) -> CmdResult {
    json_only(&args.out, "probe")?;
    let t = args.privacy.require()?;
    if args.n == 0 {
        return Err(Failure::Input("n: must be at least 1".into()));
    }
    let report = conjecture_probe(args.n, &t, args.trials, args.seed)?;
    let mut counter_files = Vec::new();
    if let Some(path) = &args.out.output {
        for (k, c) in report.counters_found.iter().enumerate() {
            let file = counter_path(path, k + 1);
            let mut text = serde_json::to_string_pretty(&MatrixRecord::new(&t, c)).expect("matrix serializes");
            text.push('\n');
            std::fs::write(&file, text)?;
            counter_files.push(file.file_name().expect("has a name").to_string_lossy().into_owned());
        }
    }
    let summary = ProbeSummary {
        n: report.n,
        t: &t,
        seed: report.seed,
        trials: report.trials_run,
        distinct_optima: report.distinct_optima,
        family_counts: &report.family_counts,
        counters_found: report.counters_found.iter().map(|c| MatrixRecord::new(&t, c)).collect(),
        counter_files,
        non_extreme_optima: report.non_extreme_optima.iter().map(|c| MatrixRecord::new(&t, c)).collect(),
        property_failures: &report.property_failures,
        clean: report.is_clean(),
    };
    emit_json(&args.out, &summary)?;
    if report.is_clean() {
        Ok(())
    } else {
        Err(Failure::Negative)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check(a) => cmd_check(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Enumerate(a) => cmd_enumerate(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Probe(a) => cmd_probe(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Negative) => ExitCode::from(1),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
