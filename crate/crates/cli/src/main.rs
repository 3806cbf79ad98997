use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use bagvm_core::format::{fmt_num, parse_distribution, path_csv, report_json};
use bagvm_core::verify::{run_all, VerifyConfig};
use bagvm_core::vonmises::{
    first_order_approx, influence_numeric, influence_theorem, plug_in_expansion, smoothing_path, superset_compare,
    vonmises_eval,
};
use bagvm_core::{mc_bagged, Decomposition, DiscreteDistribution, Engine, Error, InfluenceQuery, Point, StatisticSpec};
use clap::{Args, Parser, Subcommand};

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_BUDGET: u8 = 3;

/// Exact bagged functionals, ANOVA terms and von Mises expansions over
/// finitely supported distributions.
#[derive(Parser, Debug)]
#[command(name = "bagvm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Statistic, `NAME[:param=value,...]`.
    #[arg(long, default_value = "mean")]
    stat: String,
    /// Distribution JSON file.
    #[arg(long)]
    dist: Option<PathBuf>,
    /// Maximum number of multiset compositions per expectation.
    #[arg(long, default_value_t = bagvm_core::DEFAULT_BUDGET)]
    budget: u64,
    /// Output file instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact bagged value, or a Monte Carlo estimate with `--mc`.
    Bag {
        #[command(flatten)]
        common: Common,
        #[arg(short = 'M')]
        m: usize,
        /// Monte Carlo replicate count.
        #[arg(long)]
        mc: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// ANOVA decomposition of the statistic at a sample of size M.
    Anova {
        #[command(flatten)]
        common: Common,
        #[arg(short = 'M')]
        m: Option<usize>,
        /// Comma-separated sample.
        #[arg(long, allow_hyphen_values = true)]
        sample: String,
    },
    /// k-th order influence function of the bagged functional.
    Influence {
        #[command(flatten)]
        common: Common,
        #[arg(short = 'M')]
        m: usize,
        #[arg(short = 'k')]
        k: usize,
        /// Comma-separated evaluation points, exactly k of them.
        #[arg(long, allow_hyphen_values = true)]
        points: String,
        /// Also print the finite-difference value.
        #[arg(long)]
        check_numeric: bool,
    },
    /// Von Mises expansion around F evaluated at G (`--eval`) or at the
    /// empirical distribution of `--sample`.
    Expand {
        #[command(flatten)]
        common: Common,
        #[arg(short = 'M')]
        m: usize,
        #[arg(long, conflicts_with = "sample")]
        eval: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        sample: Option<String>,
        /// Print only the first-order approximation (requires `--sample`).
        #[arg(long, requires = "sample")]
        first_order: bool,
    },
    /// Bagged values along the path from F toward a point mass, as CSV.
    Path {
        #[command(flatten)]
        common: Common,
        /// Comma-separated resample sizes.
        #[arg(short = 'M')]
        m: String,
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, default_value_t = 21)]
        grid: usize,
    },
    /// Compare bagged and raw expansions at M = N.
    Superset {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        sample: String,
    },
    /// Monte Carlo bagging estimate as JSON.
    Mc {
        #[command(flatten)]
        common: Common,
        #[arg(short = 'M')]
        m: usize,
        #[arg(short = 'B', long = "replicates", default_value_t = 10_000)]
        b: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the invariant suite; exit 0 iff every check passes.
    Verify {
        /// Run every check (the only suite).
        #[arg(long)]
        all: bool,
        /// Largest resample size swept.
        #[arg(long = "mmax", default_value_t = 5)]
        m_max: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, default_value_t = bagvm_core::DEFAULT_BUDGET)]
        budget: u64,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Budget(String),
    Verify,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_budget() {
            Failure::Budget(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

type Outcome = Result<(), Failure>;

fn parse_list(text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Failure::Usage(format!("not a number: {t:?}"))))
        .collect()
}

fn parse_points(text: &str) -> Result<Vec<Point>, Failure> {
    Ok(Point::from_values(&parse_list(text)?)?)
}

fn parse_m_list(text: &str) -> Result<Vec<usize>, Failure> {
    text.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| Failure::Usage(format!("not a resample size: {t:?}"))))
        .collect()
}

fn read_dist(path: &PathBuf) -> Result<DiscreteDistribution, Failure> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_distribution(&text)?)
}

impl Common {
    fn stat(&self) -> Result<StatisticSpec, Failure> {
        Ok(StatisticSpec::parse(&self.stat)?)
    }

    fn dist(&self) -> Result<DiscreteDistribution, Failure> {
        match &self.dist {
            Some(p) => read_dist(p),
            None => Err(Failure::Usage("--dist is required".into())),
        }
    }

    fn engine(&self) -> Engine {
        Engine::with_budget(self.budget)
    }
}

fn emit(output: &Option<PathBuf>, text: &str) -> Outcome {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| Failure::Usage(e.to_string()))
        }
    }
}

fn line(x: f64) -> String {
    format!("{}\n", fmt_num(x))
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Bag { common, m, mc, seed } => {
            let (stat, dist) = (common.stat()?, common.dist()?);
            match mc {
                Some(b) => emit(&common.output, &report_json(&mc_bagged(&stat, &dist, m, b, seed)?)),
                None => emit(&common.output, &line(common.engine().exact_bagged(&stat, &dist, m)?)),
            }
        }
        Command::Anova { common, m, sample } => {
            let (stat, dist) = (common.stat()?, common.dist()?);
            let sample = parse_points(&sample)?;
            if let Some(m) = m {
                if m != sample.len() {
                    return Err(Failure::Usage(format!("sample has {} points but M = {m}", sample.len())));
                }
            }
            let engine = common.engine();
            let report = Decomposition::new(&engine, &stat, &dist, sample.len())?.report(&sample)?;
            emit(&common.output, &report_json(&report))
        }
        Command::Influence { common, m, k, points, check_numeric } => {
            let (stat, dist) = (common.stat()?, common.dist()?);
            let points = parse_points(&points)?;
            if points.len() != k {
                return Err(Failure::Usage(format!("-k {k} needs {k} points, got {}", points.len())));
            }
            let engine = common.engine();
            let q = InfluenceQuery { stat: &stat, dist: &dist, m, points: &points };
            let theorem = influence_theorem(&engine, &q)?;
            if check_numeric {
                let numeric = influence_numeric(&engine, &q)?;
                let text = format!("theorem,numeric\n{},{}\n", fmt_num(theorem), fmt_num(numeric));
                emit(&common.output, &text)
            } else {
                emit(&common.output, &line(theorem))
            }
        }
        Command::Expand { common, m, eval, sample, first_order } => {
            let (stat, base) = (common.stat()?, common.dist()?);
            let engine = common.engine();
            match (eval, sample) {
                (Some(path), None) => {
                    let g = read_dist(&path)?;
                    emit(&common.output, &report_json(&vonmises_eval(&engine, &stat, &base, m, &g)?))
                }
                (None, Some(sample)) => {
                    let sample = parse_points(&sample)?;
                    if first_order {
                        emit(&common.output, &line(first_order_approx(&engine, &stat, &base, m, &sample)?))
                    } else {
                        emit(&common.output, &report_json(&plug_in_expansion(&engine, &stat, &base, m, &sample)?))
                    }
                }
                _ => Err(Failure::Usage("expand needs exactly one of --eval or --sample".into())),
            }
        }
        Command::Path { common, m, x, grid } => {
            let (stat, base) = (common.stat()?, common.dist()?);
            let m_list = parse_m_list(&m)?;
            let curve = smoothing_path(&common.engine(), &stat, &base, Point::new(x)?, &m_list, grid)?;
            for (m, r) in curve.m_list.iter().zip(&curve.fit_residual) {
                eprintln!("fit_residual_M{m} {}", fmt_num(*r));
            }
            emit(&common.output, &path_csv(&curve))
        }
        Command::Superset { common, sample } => {
            let (stat, base) = (common.stat()?, common.dist()?);
            let sample = parse_points(&sample)?;
            emit(&common.output, &report_json(&superset_compare(&common.engine(), &stat, &base, &sample)?))
        }
        Command::Mc { common, m, b, seed } => {
            let (stat, dist) = (common.stat()?, common.dist()?);
            emit(&common.output, &report_json(&mc_bagged(&stat, &dist, m, b, seed)?))
        }
        Command::Verify { all: _, m_max, seed, budget, output } => {
            if m_max == 0 {
                return Err(Failure::Usage("--mmax must be at least 1".into()));
            }
            let config = VerifyConfig { m_max, seed, ..Default::default() };
            let results = run_all(&Engine::with_budget(budget), &config);
            let mut text = String::new();
            for r in &results {
                text.push_str(&format!(
                    "{} {:<13} {:<38} cases={:<6} worst={} tol={}\n",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.module,
                    r.name,
                    r.cases,
                    fmt_num(r.worst),
                    fmt_num(r.tolerance),
                ));
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            text.push_str(&format!("{} checks, {} failed\n", results.len(), failed));
            emit(&output, &text)?;
            if failed > 0 {
                Err(Failure::Verify)
            } else {
                Ok(())
            }
        }
    }
}

/// Accepts the single-dash long form `-Mmax N`.
fn normalize_args(args: impl Iterator<Item = String>) -> Vec<String> {
    args.map(|a| match a.strip_prefix("-Mmax") {
        Some(rest) if rest.is_empty() => "--mmax".to_string(),
        Some(rest) if rest.starts_with('=') => format!("--mmax{rest}"),
        _ => a,
    })
    .collect()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse_from(normalize_args(std::env::args())) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Budget(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_BUDGET)
        }
        Err(Failure::Verify) => ExitCode::from(EXIT_VERIFY_FAILED),
    }
}
