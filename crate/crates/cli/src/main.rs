//! `l2div` command line: fit, select, simulate, validate, plot-data.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use l2div::engine;
use l2div::error::Error;
use l2div::experiments::{self, GuConfig};
use l2div::io::{self, GridSpec};
use l2div::problem::{self, KernelId, RegressionProblem};
use l2div::selection::{self, AicForm, Criterion, Indexing};
use l2div::svg;
use l2div::validate::{self, Suite};

#[derive(Parser)]
#[command(name = "l2div", version, about = "l2-regularized regression with divergence in both indexings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Smoothing,
    Pspline,
    Ridge,
    Functional,
}

#[derive(Clone, Copy, ValueEnum)]
enum IndexingArg {
    Lambda,
    Rho,
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    Aic,
    Gcv,
}

#[derive(Clone, Copy, ValueEnum)]
enum AicFormArg {
    Paper,
    Classical,
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV (x,y for splines; x1..xp,y for ridge; curve samples for functional)
    #[arg(long)]
    data: PathBuf,
    /// Separate response CSV, functional problems only
    #[arg(long)]
    response: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: KindArg,
    /// Penalized-spline order p
    #[arg(long, default_value_t = 3)]
    order: usize,
    /// Penalized-spline knots, comma separated
    #[arg(long)]
    knots: Option<String>,
    /// Functional kernel id
    #[arg(long, default_value = "sobolev")]
    kernel: String,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one problem at a fixed tuning value and emit a JSON report
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, conflicts_with = "rho")]
        lambda: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate AIC/GCV over a tuning grid
    Select {
        #[command(flatten)]
        data: DataArgs,
        /// Grid spec: log10nl:start:step:end | log10:start:step:end | list:v1,v2,...
        #[arg(long)]
        grid: String,
        #[arg(long, value_enum, default_value_t = IndexingArg::Lambda)]
        indexing: IndexingArg,
        #[arg(long, value_enum, default_value_t = CriterionArg::Gcv)]
        criterion: CriterionArg,
        #[arg(long, value_enum, default_value_t = AicFormArg::Paper)]
        aic_form: AicFormArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the simulation study and write divergence.csv, relerr.csv, summary.json
    Simulate {
        /// JSON config file mirroring the simulation parameters
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        sigma2: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, default_value = "reports")]
        out: PathBuf,
    },
    /// Run the oracle verification suites on built-in fixtures
    Validate {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render figure1.svg and figure2.svg from a report directory
    PlotData {
        #[arg(long, default_value = "reports")]
        reports: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::ParseError { .. }
        | Error::ConfigError(_)
        | Error::MissingReport(_)
        | Error::Io(_) => 3,
        Error::TooFewPoints(_, _)
        | Error::DomainError(_)
        | Error::DuplicateAbscissae(_, _)
        | Error::KnotOrderError
        | Error::GridError(_)
        | Error::KernelError(_)
        | Error::LengthMismatch(_, _)
        | Error::GridOrderError => 3,
        _ => 4,
    }
}

fn fail(err: Error) -> ExitCode {
    let payload = serde_json::json!({ "error": err.to_string() });
    eprintln!("{payload}");
    ExitCode::from(exit_code_for(&err))
}

fn read(path: &Path) -> l2div::Result<String> {
    fs::read_to_string(path).map_err(Error::from)
}

fn load_problem(args: &DataArgs) -> l2div::Result<RegressionProblem> {
    let raw = read(&args.data)?;
    match args.kind {
        KindArg::Smoothing => {
            let (x, y) = io::parse_xy_csv(&raw)?;
            problem::build_smoothing_spline(&x, &y)
        }
        KindArg::Pspline => {
            let (x, y) = io::parse_xy_csv(&raw)?;
            let knots: Vec<f64> = match &args.knots {
                Some(spec) => spec
                    .split(',')
                    .map(|v| {
                        v.trim().parse::<f64>().map_err(|_| Error::ParseError {
                            line: 1,
                            msg: format!("bad knot {v:?}"),
                        })
                    })
                    .collect::<l2div::Result<_>>()?,
                None => return Err(Error::ConfigError("--knots required for pspline".into())),
            };
            problem::build_penalized_spline(&x, &y, args.order, &knots)
        }
        KindArg::Ridge => {
            let (x, y) = io::parse_ridge_csv(&raw)?;
            problem::build_ridge(&x, &y)
        }
        KindArg::Functional => {
            let (grid, curves) = io::parse_curves_csv(&raw)?;
            let resp_path = args
                .response
                .as_ref()
                .ok_or_else(|| Error::ConfigError("--response required for functional".into()))?;
            let y = io::parse_y_csv(&read(resp_path)?)?;
            let kernel = KernelId::parse(&args.kernel)?;
            problem::build_functional(&curves, &grid, &y, kernel).map(|(p, _)| p)
        }
    }
}

fn write_or_print(out: &Option<PathBuf>, name: &str, content: &str) -> l2div::Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(name), content)?;
            Ok(())
        }
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

fn json_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().cloned().collect()
}

fn cmd_fit(
    data: &DataArgs,
    lambda: Option<f64>,
    rho: Option<f64>,
    out: &Option<PathBuf>,
) -> l2div::Result<()> {
    let problem = load_problem(data)?;
    let sys = engine::decompose(&problem)?;
    let y = problem.y.clone();
    let report = match (lambda, rho) {
        (Some(l), None) => {
            let fit = engine::fit_penalty(&sys, &y, l)?;
            serde_json::json!({
                "indexing": "lambda",
                "lambda": fit.lambda,
                "rho_induced": fit.rho_induced,
                "rss": fit.rss,
                "div": fit.div_lambda,
                "coefficients": json_vec(&fit.beta),
                "fitted": json_vec(&fit.mu),
                "warnings": [],
            })
        }
        (None, Some(r)) => {
            let fit = engine::fit_constraint(&sys, &y, r)?;
            let mut warnings = Vec::new();
            if fit.degenerate_phi {
                warnings.push("degenerate phi pair resolved by continuity limit");
            }
            serde_json::json!({
                "indexing": "rho",
                "rho": fit.rho,
                "active": fit.active,
                "lambda_star": fit.lambda_star,
                "tau": fit.tau,
                "rss": fit.rss,
                "div": fit.div_rho,
                "phi": fit.phi.iter().cloned().collect::<Vec<f64>>(),
                "fitted": json_vec(&fit.mu),
                "warnings": warnings,
            })
        }
        _ => {
            return Err(Error::ConfigError(
                "exactly one of --lambda or --rho is required".into(),
            ))
        }
    };
    write_or_print(out, "fit.json", &serde_json::to_string_pretty(&report).unwrap())
}

fn cmd_select(
    data: &DataArgs,
    grid: &str,
    indexing: IndexingArg,
    criterion: CriterionArg,
    aic_form: AicFormArg,
    out: &Option<PathBuf>,
) -> l2div::Result<()> {
    let problem = load_problem(data)?;
    let sys = engine::decompose(&problem)?;
    let y = problem.y.clone();
    let spec = io::parse_grid_spec(grid)?;
    let indexing = match indexing {
        IndexingArg::Lambda => Indexing::Lambda,
        IndexingArg::Rho => Indexing::Rho,
    };
    let criterion = match criterion {
        CriterionArg::Aic => Criterion::Aic,
        CriterionArg::Gcv => Criterion::Gcv,
    };
    let aic_form = match aic_form {
        AicFormArg::Paper => AicForm::Paper,
        AicFormArg::Classical => AicForm::Classical,
    };
    let theta_grid = match (&spec, indexing) {
        (GridSpec::Log10NLambda { .. }, Indexing::Rho) => {
            // the grid is specified in lambda; induce the rho counterparts
            let lambdas = spec.materialize(problem.n());
            let mut rhos: Vec<f64> = lambdas
                .iter()
                .rev()
                .map(|&l| engine::fit_penalty(&sys, &y, l).map(|f| f.rho_induced))
                .collect::<l2div::Result<_>>()?;
            rhos.dedup_by(|a, b| *a <= *b);
            rhos
        }
        _ => spec.materialize(problem.n()),
    };
    let table = selection::evaluate_grid(&sys, &y, &theta_grid, indexing, aic_form)?;
    let chosen = table.chosen(criterion);
    let sidecar = serde_json::json!({
        "indexing": table.indexing,
        "chosen_aic": table.chosen_aic,
        "chosen_gcv": table.chosen_gcv,
        "chosen_theta": table.grid[chosen],
        "criterion": criterion,
    });
    write_or_print(out, "criteria.csv", &table.to_csv())?;
    write_or_print(out, "chosen.json", &serde_json::to_string_pretty(&sidecar).unwrap())
}

fn cmd_simulate(
    config: &Option<PathBuf>,
    replicates: Option<usize>,
    seed: Option<u64>,
    sigma2: Option<f64>,
    n: Option<usize>,
    jobs: Option<usize>,
    out: &Path,
) -> l2div::Result<()> {
    let mut cfg = match config {
        Some(path) => io::parse_config(&read(path)?)?,
        None => GuConfig::default(),
    };
    if let Some(r) = replicates {
        cfg.replicates = r;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    } else if cfg.seed == 0 {
        if let Ok(env_seed) = std::env::var("L2DIV_SEED") {
            cfg.seed = env_seed
                .parse()
                .map_err(|_| Error::ConfigError("L2DIV_SEED must be an integer".into()))?;
        }
    }
    if let Some(s) = sigma2 {
        cfg.sigma2 = s;
    }
    if let Some(v) = n {
        cfg.n = v;
    }
    let report = experiments::run_simulation(cfg, jobs)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("divergence.csv"), report.divergence_csv())?;
    fs::write(out.join("relerr.csv"), report.relerr_csv())?;
    fs::write(out.join("summary.json"), report.summary_json())?;
    Ok(())
}

fn cmd_validate(suite: &str, out: &Option<PathBuf>) -> l2div::Result<bool> {
    let suite = Suite::parse(suite)
        .ok_or_else(|| Error::ConfigError(format!("unknown suite {suite:?}")))?;
    let records = validate::run_suite(suite)?;
    let report = serde_json::to_string_pretty(&records).unwrap();
    write_or_print(out, "validation.json", &report)?;
    Ok(validate::all_hard_pass(&records))
}

fn parse_divergence_csv(raw: &str) -> l2div::Result<Vec<experiments::DivergenceRow>> {
    let mut rows = Vec::new();
    for (i, line) in raw.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::ParseError {
                line: i + 1,
                msg: "expected 5 fields".into(),
            });
        }
        let num = |k: usize| -> l2div::Result<f64> {
            fields[k].parse().map_err(|_| Error::ParseError {
                line: i + 1,
                msg: format!("bad number {:?}", fields[k]),
            })
        };
        rows.push(experiments::DivergenceRow {
            replicate: fields[0].parse().map_err(|_| Error::ParseError {
                line: i + 1,
                msg: "bad replicate".into(),
            })?,
            lambda: num(1)?,
            rho: num(2)?,
            div_lambda: num(3)?,
            div_rho: num(4)?,
        });
    }
    Ok(rows)
}

fn parse_relerr_csv(raw: &str) -> l2div::Result<Vec<experiments::RelErrRow>> {
    let mut rows = Vec::new();
    for (i, line) in raw.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::ParseError {
                line: i + 1,
                msg: "expected 3 fields".into(),
            });
        }
        rows.push(experiments::RelErrRow {
            method: fields[0].to_string(),
            replicate: fields[1].parse().map_err(|_| Error::ParseError {
                line: i + 1,
                msg: "bad replicate".into(),
            })?,
            relative_error: fields[2].parse().map_err(|_| Error::ParseError {
                line: i + 1,
                msg: "bad value".into(),
            })?,
        });
    }
    Ok(rows)
}

fn cmd_plot_data(reports: &Path, out: &Option<PathBuf>) -> l2div::Result<()> {
    let div_path = reports.join("divergence.csv");
    if !div_path.exists() {
        return Err(Error::MissingReport(div_path.display().to_string()));
    }
    let div_rows = parse_divergence_csv(&read(&div_path)?)?;
    let fig1 = svg::figure1(&div_rows, 10)?;
    let relerr_rows = parse_relerr_csv(&read(&reports.join("relerr.csv"))?)?;
    let fig2 = svg::figure2(&relerr_rows)?;
    let dir = out.clone().unwrap_or_else(|| reports.to_path_buf());
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("figure1.svg"), fig1)?;
    fs::write(dir.join("figure2.svg"), fig2)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit {
            data,
            lambda,
            rho,
            out,
        } => cmd_fit(data, *lambda, *rho, out),
        Command::Select {
            data,
            grid,
            indexing,
            criterion,
            aic_form,
            out,
        } => cmd_select(data, grid, *indexing, *criterion, *aic_form, out),
        Command::Simulate {
            config,
            replicates,
            seed,
            sigma2,
            n,
            jobs,
            out,
        } => cmd_simulate(config, *replicates, *seed, *sigma2, *n, *jobs, out),
        Command::Validate { suite, out } => {
            return match cmd_validate(suite, out) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => ExitCode::from(4),
                Err(e) => fail(e),
            }
        }
        Command::PlotData { reports, out } => cmd_plot_data(reports, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}
