//! `rankset` command-line front end.
//!
//! Exit codes: 0 success, 1 failed validation, 2 bad flags or input shape,
//! 3 runtime failure, 4 population smaller than the set size.

pub mod grid;
pub mod plot;
pub mod validate;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::estimators::EstimatorId;
use crate::harness::{run_experiment, spearman, ExperimentConfig, ExperimentResult, Source, DEFAULT_REPLICATES};
use crate::orss::{orss_weights, write_weight_table, OrssKind};
use crate::sampler::{load_numeric_columns, Design, FinitePopulation, RankingModel};
use grid::{join, parse_f64_list, parse_p_grid, parse_usize_list};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Parser, Debug)]
#[command(name = "rankset", version, about = "Quantile L-estimators under simple random and ranked set sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo bias/MSE/RE study under a parametric model.
    Simulate(SimulateArgs),
    /// Precompute an ORSS weight table.
    Weights(WeightsArgs),
    /// RE study resampling a finite population from a CSV file.
    PopulationStudy(PopulationArgs),
    /// Draw RE-versus-p curves from a results CSV as SVG.
    Plot(PlotArgs),
    /// Run the fast identity suite.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct CommonRun {
    /// Cycles m; a comma list pairs with --k.
    #[arg(long)]
    m: String,
    /// Set size k; a comma list pairs with --m.
    #[arg(long)]
    k: String,
    /// Levels as lo:hi:step (inclusive), a comma list, or one value.
    #[arg(long = "p-grid")]
    p_grid: Option<String>,
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    replicates: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// `all` or a comma list of estimator ids.
    #[arg(long, default_value = "all")]
    estimators: String,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; affects speed only.
    #[arg(long)]
    threads: Option<usize>,
    /// Directory for reusable ORSS weight tables.
    #[arg(long = "weight-cache")]
    weight_cache: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Parent law: normal:mean,sd | exp:rate | weibull:shape,scale. Repeatable.
    #[arg(long = "dist", required = true)]
    dists: Vec<String>,
    /// Ranking correlations; 1 means perfect ranking.
    #[arg(long, default_value = "1")]
    rho: String,
    #[command(flatten)]
    run: CommonRun,
}

#[derive(Args, Debug)]
struct WeightsArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    p: f64,
    /// orss-lf | orss-hd
    #[arg(long)]
    kind: String,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PopulationArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    response: String,
    #[arg(long)]
    ranker: String,
    /// Candidate ranking columns whose Spearman correlation with the
    /// response is printed before the run.
    #[arg(long = "screen-rankers")]
    screen_rankers: Option<String>,
    #[command(flatten)]
    run: CommonRun,
}

#[derive(Args, Debug)]
struct PlotArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    distribution: Option<String>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Runs the suite against a corrupted beta cdf.
    #[arg(long = "inject-fault", hide = true)]
    inject_fault: bool,
}

/// Maps an error to its process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::MissingColumn(_) | Error::Malformed(_) | Error::Csv(_) => 2,
        Error::PopulationTooSmall { .. } => 4,
        _ => 3,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 { write!(stdout, "{e}") } else { write!(stderr, "{e}") };
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a, stdout, stderr),
        Command::Weights(a) => weights(a, stdout),
        Command::PopulationStudy(a) => population_study(a, stdout, stderr),
        Command::Plot(a) => plot_cmd(a),
        Command::Validate(a) => return validate_cmd(a, stdout),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn designs(m: &str, k: &str) -> Result<Vec<Design>> {
    let (ms, ks) = (parse_usize_list(m)?, parse_usize_list(k)?);
    let len = ms.len().max(ks.len());
    if !(ms.len() == len || ms.len() == 1) || !(ks.len() == len || ks.len() == 1) {
        return Err(Error::Config(format!("--m {m} and --k {k} have mismatched lengths")));
    }
    (0..len)
        .map(|i| {
            let m = ms[if ms.len() == 1 { 0 } else { i }];
            let k = ks[if ks.len() == 1 { 0 } else { i }];
            Design::new(m, k).map_err(|e| Error::Config(e.to_string()))
        })
        .collect()
}

struct Resolved {
    designs: Vec<Design>,
    p_grid: Vec<f64>,
    estimators: Vec<EstimatorId>,
}

fn resolve(run: &CommonRun, default_grid: &str) -> Result<Resolved> {
    Ok(Resolved {
        designs: designs(&run.m, &run.k)?,
        p_grid: parse_p_grid(run.p_grid.as_deref().unwrap_or(default_grid))?,
        estimators: EstimatorId::parse_list(&run.estimators)?,
    })
}

fn common_echo(run: &CommonRun, r: &Resolved) -> String {
    let ms: Vec<usize> = r.designs.iter().map(Design::cycles).collect();
    let ks: Vec<usize> = r.designs.iter().map(Design::set_size).collect();
    let ids: Vec<&str> = r.estimators.iter().map(EstimatorId::as_str).collect();
    let mut s = format!(
        "--m {} --k {} --p-grid {} --replicates {} --seed {} --estimators {} --out {}",
        join(&ms),
        join(&ks),
        join(&r.p_grid),
        run.replicates,
        run.seed,
        ids.join(","),
        shell_quote(&run.out.display().to_string())
    );
    if let Some(t) = run.threads {
        s += &format!(" --threads {t}");
    }
    if let Some(c) = &run.weight_cache {
        s += &format!(" --weight-cache {}", shell_quote(&c.display().to_string()));
    }
    s
}

fn shell_quote(s: &str) -> String {
    if !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "-_./:,=+".contains(c)) {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', r"'\''"))
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {n} threads: {e}")))?
            .install(f),
        None => f(),
    }
}

fn write_results(path: &Path, result: &ExperimentResult) -> Result<()> {
    let mut buf = Vec::new();
    result.write_csv(&mut buf)?;
    fs::write(path, buf).map_err(|source| Error::Io { path: path.to_owned(), source })
}

fn warn_clamped(result: &ExperimentResult, stderr: &mut dyn Write) {
    for (d, p) in &result.clamped {
        let _ = writeln!(stderr, "note: design {d} at p = {p} clamps an order-statistic index");
    }
}

fn simulate(a: SimulateArgs, _stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let dists = a
        .dists
        .iter()
        .map(|s| s.parse::<Distribution>())
        .collect::<Result<Vec<_>>>()?;
    let rhos = parse_f64_list(&a.rho)?;
    let models = rhos
        .iter()
        .map(|&r| RankingModel::from_rho(r).map_err(|e| Error::Config(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let r = resolve(&a.run, "0.1:0.9:0.1")?;
    let dist_flags: Vec<String> = dists.iter().map(|d| format!("--dist {}", shell_quote(&d.to_string()))).collect();
    let _ = writeln!(
        stderr,
        "rankset simulate {} --rho {} {}",
        dist_flags.join(" "),
        join(&rhos),
        common_echo(&a.run, &r)
    );

    let mut all = ExperimentResult::default();
    for dist in dists {
        let cfg = ExperimentConfig {
            source: Source::Model(dist),
            designs: r.designs.clone(),
            rank_models: models.clone(),
            p_grid: r.p_grid.clone(),
            estimators: r.estimators.clone(),
            replicates: a.run.replicates,
            master_seed: a.run.seed,
            orss_enabled: true,
            weight_cache: a.run.weight_cache.clone(),
        };
        let res = with_threads(a.run.threads, || run_experiment(&cfg))?;
        all.rows.extend(res.rows);
        all.clamped.extend(res.clamped);
    }
    all.clamped.dedup();
    warn_clamped(&all, stderr);
    write_results(&a.run.out, &all)
}

fn weights(a: WeightsArgs, stdout: &mut dyn Write) -> Result<()> {
    let design = Design::new(a.m, a.k).map_err(|e| Error::Config(e.to_string()))?;
    let kind: OrssKind = a.kind.parse()?;
    if !(a.p > 0.0 && a.p < 1.0) {
        return Err(Error::Config(format!("--p {} outside (0, 1)", a.p)));
    }
    let table = orss_weights(design, a.p, kind)?;
    let mut buf = Vec::new();
    write_weight_table(&table, &mut buf).expect("writing to memory");
    match a.out {
        Some(path) => fs::write(&path, buf).map_err(|source| Error::Io { path, source }),
        None => stdout.write_all(&buf).map_err(|source| Error::Io { path: "<stdout>".into(), source }),
    }
}

fn population_study(a: PopulationArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let r = resolve(&a.run, "0.2:0.8:0.05")?;
    let screens: Vec<String> = a
        .screen_rankers
        .as_deref()
        .map(|s| s.split(',').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect())
        .unwrap_or_default();
    let mut echo = format!(
        "rankset population-study --input {} --response {} --ranker {}",
        shell_quote(&a.input.display().to_string()),
        shell_quote(&a.response),
        shell_quote(&a.ranker)
    );
    if !screens.is_empty() {
        echo += &format!(" --screen-rankers {}", shell_quote(&screens.join(",")));
    }
    let _ = writeln!(stderr, "{echo} {}", common_echo(&a.run, &r));

    for col in &screens {
        let (cols, _) = load_numeric_columns(&a.input, &[a.response.as_str(), col.as_str()])?;
        let rho = spearman(&cols[0], &cols[1])?;
        let _ = writeln!(stdout, "spearman({}, {col}) = {rho:.4} over {} rows", a.response, cols[0].len());
    }

    let (pop, dropped) = FinitePopulation::from_csv(&a.input, &a.response, &a.ranker)?;
    let _ = writeln!(stderr, "population: {} rows kept, {dropped} incomplete rows dropped", pop.len());
    let cfg = ExperimentConfig {
        source: Source::Population {
            population: Arc::new(pop),
            label: format!("{}~{}", a.response, a.ranker),
        },
        designs: r.designs.clone(),
        rank_models: vec![RankingModel::Perfect],
        p_grid: r.p_grid.clone(),
        estimators: r.estimators.clone(),
        replicates: a.run.replicates,
        master_seed: a.run.seed,
        orss_enabled: true,
        weight_cache: a.run.weight_cache.clone(),
    };
    let res = with_threads(a.run.threads, || run_experiment(&cfg))?;
    warn_clamped(&res, stderr);
    write_results(&a.run.out, &res)
}

fn plot_cmd(a: PlotArgs) -> Result<()> {
    let text = fs::read(&a.input).map_err(|source| Error::Io { path: a.input.clone(), source })?;
    let result = ExperimentResult::read_csv(text.as_slice())?;
    if result.rows.is_empty() {
        return Err(Error::Malformed(format!("{} has no data rows", a.input.display())));
    }
    let facet = plot::Facet { distribution: a.distribution, rho: a.rho, m: a.m, k: a.k };
    let svg = plot::render_svg(&result.rows, &facet)?;
    fs::write(&a.out, svg).map_err(|source| Error::Io { path: a.out.clone(), source })
}

fn validate_cmd(a: ValidateArgs, stdout: &mut dyn Write) -> i32 {
    let checks = if a.inject_fault {
        validate::run_checks(&validate::corrupted_beta_cdf)
    } else {
        validate::run_checks(&validate::reference_beta_cdf)
    };
    for c in &checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(stdout, "{status} {:<22} max error {:.3e} (tolerance {:.1e})", c.name, c.max_error, c.tolerance);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    let _ = writeln!(stdout, "{} checks, {failed} failed", checks.len());
    i32::from(failed > 0)
}
