use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rankagg::experiments::{
    bound_chart, bound_sweep, gen_conflicting_pair, oracle_chart, oracle_run, skew_chart, skew_sweep, train_rows,
    train_trials, BoundSweepConfig, ConflictConfig, OracleConfig, SkewSweepConfig, SweepAxis, TrainTrialsConfig,
};
use rankagg::io::{read_dataset, write_dataset, write_results, ResultRow};
use rankagg::oracle::DEFAULT_BUDGET;
use rankagg::plot::Chart;
use rankagg::surrogate::{ModelSpec, SurrogateKind};
use rankagg::synthgen::{gen_d3_training_pair, gen_gaussian_bilevel, gen_sigmoid_pair, rho_for_prior, SigmoidSynthConfig};
use rankagg::types::{Aggregator, CostMatrix, ObjectiveSpec};
use rankagg::Error;

const THREADS_VAR: &str = "RANKAGG_THREADS";

#[derive(Parser, Debug)]
#[command(name = "rankagg", version, about = "Ranking from multiple binary labels: sweeps, training, exhaustive oracle and gap bounds")]
#[command(args_override_self = true)]
struct Cli {
    /// Plain-text file of `key=value` lines; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Closed-form scorers on the two-label sigmoid model across skew levels.
    SkewSweep(SkewSweepArgs),
    /// Train a scorer on a CSV dataset with a chosen objective.
    Train(TrainArgs),
    /// Enumerate all scorers on a small bilevel dataset and check maximizer relations.
    Oracle(OracleArgs),
    /// Compare the measured sum-scorer gap with its upper bound.
    Bound(BoundArgs),
    /// Write a synthetic dataset as CSV.
    Gen(GenArgs),
}

#[derive(Args, Debug)]
struct Output {
    /// Result CSV path, `-` for stdout.
    #[arg(long, default_value = "-")]
    out: PathBuf,
    /// SVG path; defaults to the CSV path with an `.svg` extension.
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    no_plot: bool,
    /// Fill the runtime_ms column (makes output run-dependent).
    #[arg(long)]
    timings: bool,
}

#[derive(Args, Debug)]
struct SkewSweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,5")]
    tau: Vec<f64>,
    #[arg(long, value_delimiter = ',', conflicts_with = "pi2")]
    rho: Option<Vec<f64>>,
    /// Target empirical priors of label 2 [default: 0.5,0.6,0.7,0.8,0.9,0.95].
    #[arg(long, value_delimiter = ',')]
    pi2: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Surrogate {
    Logistic,
    Hinge,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Label column names; without it, columns named y0, y1, ... are labels.
    #[arg(long, value_delimiter = ',')]
    labels: Option<Vec<String>>,
    /// label1 | label2 | lossagg:a1,a2 | labelagg:uniform | labelagg:absdiff
    #[arg(long, default_value = "labelagg:uniform")]
    objective: String,
    #[arg(long, value_enum, default_value = "logistic")]
    surrogate: Surrogate,
    /// linear | mlp:h1,h2,...
    #[arg(long, default_value = "linear")]
    model: String,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Resample each trial so label `i` (1-based) has positive fraction `pi`.
    #[arg(long, value_name = "LABEL:PI")]
    resample_pi: Option<String>,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pair_budget: usize,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value = "-")]
    out: PathBuf,
    #[arg(long)]
    timings: bool,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long, default_value_t = 400)]
    n: usize,
    /// Number of score levels available to disagreeing rows.
    #[arg(long = "P", default_value_t = 3)]
    p: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Loss-agg weights range over {1..max} squared.
    #[arg(long, default_value_t = 5)]
    weights_grid: u32,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    /// Truncate the dataset to its longest prefix with at most this many disagreeing rows.
    #[arg(long, default_value_t = 13)]
    max_disagree: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[arg(long = "K", value_delimiter = ',', default_value = "2,4,8,16")]
    k: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    n: usize,
    #[arg(long, default_value_t = 0.2)]
    c: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random tables per K.
    #[arg(long, default_value_t = 100)]
    tables: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GenKind {
    Sigmoid,
    Conflict,
    Bilevel,
    D3,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "sigmoid")]
    kind: GenKind,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 5.0)]
    tau: f64,
    #[arg(long, default_value_t = 0.0, conflicts_with = "pi2")]
    rho: f64,
    #[arg(long)]
    pi2: Option<f64>,
    /// Angle between the label directions for `conflict`, in degrees.
    #[arg(long, default_value_t = 90.0)]
    angle: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Core(Error::from(e))
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(Error::InvalidInput(_) | Error::InvalidCosts(_)) => 2,
            CliError::Core(Error::BudgetExceeded { .. } | Error::TooLarge { .. }) => 4,
            CliError::Core(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Finds `--config FILE` or `--config=FILE` among the raw arguments.
fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    None
}

/// Turns `key=value` lines into flags. `true`/`false` toggle switches.
fn config_flags(text: &str) -> Result<Vec<OsString>, CliError> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key=value", no + 1)))?;
        let key = key.trim().trim_start_matches("--");
        let value = value.trim();
        if key.is_empty() {
            return Err(usage(format!("config line {}: empty key", no + 1)));
        }
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                out.push(format!("--{key}").into());
                out.push(value.into());
            }
        }
    }
    Ok(out)
}

/// Places config flags right after the subcommand so that later explicit
/// flags override them.
fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.to_string_lossy())))?;
    let extra = config_flags(&text)?;
    let names = ["skew-sweep", "train", "oracle", "bound", "gen"];
    let Some(pos) = args.iter().position(|a| names.contains(&a.to_string_lossy().as_ref())) else {
        return Ok(args);
    };
    let mut out = args[..=pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[pos + 1..]);
    Ok(out)
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("{THREADS_VAR} must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| usage(format!("cannot configure worker pool: {e}")))
}

fn is_stdout(p: &Path) -> bool {
    p.as_os_str() == "-"
}

fn open_out(p: &Path) -> Result<Box<dyn Write>, CliError> {
    if is_stdout(p) {
        Ok(Box::new(io::stdout().lock()))
    } else {
        Ok(Box::new(BufWriter::new(File::create(p)?)))
    }
}

fn emit(output: &Output, rows: &[ResultRow], chart: impl FnOnce() -> Chart) -> Result<(), CliError> {
    write_results(open_out(&output.out)?, rows)?;
    if output.no_plot {
        return Ok(());
    }
    let svg = match &output.svg {
        Some(p) => Some(p.clone()),
        None if !is_stdout(&output.out) => Some(output.out.with_extension("svg")),
        None => None,
    };
    if let Some(path) = svg {
        std::fs::write(path, chart().to_svg())?;
    }
    Ok(())
}

fn check_finite(name: &str, v: &[f64]) -> Result<(), CliError> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(usage(format!("--{name} values must be finite")));
    }
    Ok(())
}

fn cmd_skew_sweep(a: SkewSweepArgs) -> Result<(), CliError> {
    check_finite("tau", &a.tau)?;
    if a.tau.iter().any(|&t| t <= 0.0) {
        return Err(usage("--tau values must be positive"));
    }
    let axis = match (a.rho, a.pi2) {
        (Some(r), _) => {
            check_finite("rho", &r)?;
            SweepAxis::Rho(r)
        }
        (None, Some(p)) => {
            if p.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
                return Err(usage("--pi2 values must be in (0, 1)"));
            }
            SweepAxis::Pi2(p)
        }
        (None, None) => SweepAxis::Pi2(vec![0.5, 0.6, 0.7, 0.8, 0.9, 0.95]),
    };
    let cfg = SkewSweepConfig { taus: a.tau, axis, n: a.n, seed: a.seed, timings: a.output.timings };
    let rows = skew_sweep(&cfg)?;
    emit(&a.output, &rows, || skew_chart(&rows))
}

fn parse_objective(s: &str) -> Result<ObjectiveSpec, CliError> {
    let bad = || usage(format!("unknown objective '{s}'"));
    Ok(match s {
        "label1" => ObjectiveSpec::PerLabel(0),
        "label2" => ObjectiveSpec::PerLabel(1),
        "labelagg:uniform" => ObjectiveSpec::LabelAgg { aggregator: Aggregator::Sum, costs: CostMatrix::uniform(2) },
        "labelagg:absdiff" => ObjectiveSpec::LabelAgg { aggregator: Aggregator::Sum, costs: CostMatrix::abs_diff(2) },
        _ => {
            let w = s.strip_prefix("lossagg:").ok_or_else(bad)?;
            let a = w
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| bad())?;
            ObjectiveSpec::LossAgg(a)
        }
    })
}

fn parse_model(s: &str) -> Result<ModelSpec, CliError> {
    if s == "linear" {
        return Ok(ModelSpec::Linear);
    }
    let widths = s
        .strip_prefix("mlp:")
        .map(|w| w.split(',').map(|x| x.trim().parse::<usize>()).collect::<Result<Vec<_>, _>>());
    match widths {
        Some(Ok(w)) if !w.is_empty() && w.iter().all(|&h| h > 0) => Ok(ModelSpec::Mlp(w)),
        _ => Err(usage(format!("unknown model '{s}'"))),
    }
}

fn parse_resample(s: &str) -> Result<(usize, f64), CliError> {
    let bad = || usage(format!("--resample-pi expects LABEL:PI, got '{s}'"));
    let (l, p) = s.split_once(':').ok_or_else(bad)?;
    let l: usize = l.trim().parse().map_err(|_| bad())?;
    let p: f64 = p.trim().parse().map_err(|_| bad())?;
    if l == 0 || !(p > 0.0 && p < 1.0) {
        return Err(bad());
    }
    Ok((l - 1, p))
}

fn cmd_train(a: TrainArgs) -> Result<(), CliError> {
    let objective = parse_objective(&a.objective)?;
    let model = parse_model(&a.model)?;
    let resample = a.resample_pi.as_deref().map(parse_resample).transpose()?;
    let file = File::open(&a.data).map_err(|e| Error::Data(format!("cannot open {}: {e}", a.data.display())))?;
    let data = read_dataset(BufReader::new(file), a.labels.as_deref())?;
    if let Some((k, _)) = resample {
        if k >= data.labels.k() {
            return Err(usage(format!("--resample-pi label {} out of range", k + 1)));
        }
    }
    objective.validate(data.labels.k())?;
    let mut cfg = TrainTrialsConfig::new(vec![(a.objective.clone(), objective)]);
    cfg.surrogate = match a.surrogate {
        Surrogate::Logistic => SurrogateKind::Logistic,
        Surrogate::Hinge => SurrogateKind::Hinge,
    };
    cfg.model = model;
    cfg.epochs = a.epochs;
    cfg.learning_rate = a.lr;
    cfg.pair_budget = a.pair_budget;
    cfg.seed = a.seed;
    cfg.resample = resample;
    cfg.trials = a.trials;
    cfg.test_fraction = a.test_fraction;
    cfg.timings = a.timings;
    let results = train_trials(&data, &cfg)?;
    let mut rows = train_rows(&results, &cfg);
    for r in &mut rows {
        r.n = Some(data.n() as u64);
    }
    write_results(open_out(&a.out)?, &rows)?;
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> Result<(), CliError> {
    let cfg = OracleConfig {
        n: a.n,
        p: a.p,
        seed: a.seed,
        grid_max: a.weights_grid,
        budget: a.budget,
        max_disagree: Some(a.max_disagree),
        timings: a.output.timings,
    };
    let out = oracle_run(&cfg)?;
    emit(&a.output, &out.rows, || oracle_chart(&out.rows))?;
    let mut err = io::stderr().lock();
    writeln!(err, "n={} m={} hypotheses={}", out.n, out.sets.space.m(), out.sets.space.total())?;
    for r in &out.relations {
        writeln!(err, "{} {}", if r.pass { "PASS" } else { "FAIL" }, r.name)?;
    }
    Ok(())
}

fn cmd_bound(a: BoundArgs) -> Result<(), CliError> {
    if a.k.contains(&0) {
        return Err(usage("--K values must be positive"));
    }
    let cfg = BoundSweepConfig { ks: a.k, n: a.n, c: a.c, seed: a.seed, tables: a.tables, timings: a.output.timings };
    let rows = bound_sweep(&cfg)?;
    emit(&a.output, &rows, || bound_chart(&rows))
}

fn cmd_gen(a: GenArgs) -> Result<(), CliError> {
    let sample = match a.kind {
        GenKind::Sigmoid => {
            let base = SigmoidSynthConfig { n: a.n, tau: a.tau, rho: a.rho, seed: a.seed };
            let rho = match a.pi2 {
                Some(p) => rho_for_prior(&base, p)?,
                None => a.rho,
            };
            gen_sigmoid_pair(&SigmoidSynthConfig { rho, ..base })?
        }
        GenKind::Conflict => gen_conflicting_pair(&ConflictConfig { n: a.n, tau: a.tau, angle_deg: a.angle, seed: a.seed })?,
        GenKind::Bilevel => gen_gaussian_bilevel(a.n, a.seed)?,
        GenKind::D3 => gen_d3_training_pair(a.n, a.seed, a.tau)?,
    };
    write_dataset(open_out(&a.out)?, &sample.dataset())?;
    Ok(())
}

fn run(args: Vec<OsString>) -> Result<(), CliError> {
    let args = expand_args(args)?;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return Ok(());
        }
        Err(e) => {
            let msg = e.to_string();
            return Err(usage(msg.trim_start_matches("error: ").trim_end().to_string()));
        }
    };
    configure_threads()?;
    match cli.command {
        Command::SkewSweep(a) => cmd_skew_sweep(a),
        Command::Train(a) => cmd_train(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Bound(a) => cmd_bound(a),
        Command::Gen(a) => cmd_gen(a),
    }
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_lines() {
        let flags = config_flags("# sweep\nseed = 4\n\n--no-plot=true\ntimings=false\ntau=1,5\n").unwrap();
        assert_eq!(flags, os(&["--seed", "4", "--no-plot", "--tau", "1,5"]));
        assert!(config_flags("seed 4").is_err());
    }

    #[test]
    fn objectives_and_models() {
        assert_eq!(parse_objective("lossagg:1,2").unwrap(), ObjectiveSpec::LossAgg(vec![1.0, 2.0]));
        assert_eq!(parse_objective("label2").unwrap(), ObjectiveSpec::PerLabel(1));
        assert!(parse_objective("lossagg:x").is_err());
        assert!(parse_objective("nope").is_err());
        assert_eq!(parse_model("mlp:8,4").unwrap(), ModelSpec::Mlp(vec![8, 4]));
        assert!(parse_model("mlp:").is_err());
        assert_eq!(parse_resample("2:0.8").unwrap(), (1, 0.8));
        assert!(parse_resample("0:0.8").is_err());
        assert!(parse_resample("1:1.5").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Core(Error::Data("x".into())).code(), 3);
        assert_eq!(CliError::Core(Error::TooLarge { n: 9, max: 8 }).code(), 4);
        assert_eq!(CliError::Core(Error::BudgetExceeded { required: 1, budget: 0 }).code(), 4);
        assert_eq!(usage("x").code(), 2);
    }
}
