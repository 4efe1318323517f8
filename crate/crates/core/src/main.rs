use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::ThreadPoolBuilder;

use shotfield::fredholm::higher_order_vanishing;
use shotfield::harness::{
    limit_law, read_report, run_experiment, simulate_lambda, theory_summary, write_outputs, write_theory,
    ConvergenceReport, ExperimentConfig, ProcessSpec,
};
use shotfield::shotnoise::centralize_scale;
use shotfield::{Error, Result};

#[derive(Parser)]
#[command(name = "shotfield", version, about = "Shot-noise field experiments on Poisson and DPP germs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment TOML file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the master seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the number of replicates per intensity.
    #[arg(long)]
    replicates: Option<usize>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(n) = self.replicates {
            config.replicates = n;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the field and write samples.csv.
    Simulate(RunArgs),
    /// Evaluate the limit law and write theory.json and theory.csv.
    Theory {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate the trace and higher-order terms of the Fredholm log-determinant.
    Fredholm {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Simulate, compare with the limit law and write the full report.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Exit with a nonzero status when an assertion fails.
        #[arg(long)]
        assert: bool,
    },
    /// Print a summary of an existing report.json.
    Report {
        /// report.json or the directory holding it.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        assert: bool,
    },
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn simulate(args: &RunArgs) -> Result<()> {
    let config = args.load()?;
    let response = config.response_fn()?;
    fs::create_dir_all(&args.out)?;
    let path = args.out.join("samples.csv");
    let mut out = std::io::BufWriter::new(fs::File::create(&path)?);
    writeln!(out, "replicate_id,lambda,z_index,I,I_tilde")?;
    let pool = pool(args.threads)?;
    for (index, &lambda) in config.lambdas.iter().enumerate() {
        let raw = pool.install(|| simulate_lambda(&config, index))?;
        for (k, values) in raw.iter().enumerate() {
            let tilde = centralize_scale(values, lambda, &config.amplitudes, &response);
            for (j, (i, t)) in values.iter().zip(&tilde).enumerate() {
                writeln!(out, "{k},{lambda},{j},{i},{t}")?;
            }
        }
    }
    out.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}

fn theory(config: &Path, out: &Path) -> Result<()> {
    let config = ExperimentConfig::load(config)?;
    let limit = limit_law(&config)?;
    write_theory(&theory_summary(&config, &limit), out)?;
    println!("wrote {}", out.join("theory.json").display());
    Ok(())
}

fn fredholm(config: &Path, out: &Path, threads: Option<usize>) -> Result<()> {
    let config = ExperimentConfig::load(config)?;
    let ProcessSpec::Dpp { epsilon } = config.process else {
        return Err(Error::Config("the fredholm command needs a DPP process".into()));
    };
    let rows = pool(threads)?.install(|| {
        higher_order_vanishing(
            epsilon,
            &config.window()?,
            &config.amplitudes,
            &config.fdd_query()?,
            &config.response_fn()?,
            config.tests.fredholm_order,
            &config.lambdas,
        )
    })?;
    fs::create_dir_all(out)?;
    let mut csv = std::io::BufWriter::new(fs::File::create(out.join("fredholm.csv"))?);
    writeln!(csv, "lambda,scale,nodes,trace,trace_sq,trace_sq_bound,log_det,higher_order")?;
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.lambda, r.scale, r.nodes, r.trace, r.trace_sq, r.trace_sq_bound, r.log_det, r.higher_order
        )?;
        println!(
            "lambda {:>10}  nodes {:>7}  Tr {:.6e}  Tr(M^2) {:.6e}  |logdet + Tr| {:.6e}",
            r.lambda, r.nodes, r.trace, r.trace_sq, r.higher_order
        );
    }
    csv.flush()?;
    fs::write(out.join("fredholm.json"), serde_json::to_string_pretty(&rows)? + "\n")?;
    Ok(())
}

fn print_report(report: &ConvergenceReport) {
    println!("experiment {} (seed {})", report.config.name, report.config.seed);
    for row in &report.rows {
        let gap = row.variance_gap.map_or("-".to_string(), |g| format!("{g:.4e}"));
        let ks = row.joint.ks.map_or("-".to_string(), |k| format!("{:.4}", k.p_value));
        let sigma = row.joint.sigma_fit.map_or("-".to_string(), |s| format!("{s:.4}"));
        println!(
            "  lambda {:>10}  var gap {gap:>11}  KS p {ks:>7}  CF dist {:.4e}  sigma fit {sigma}",
            row.lambda, row.joint.cf_distance
        );
    }
    for a in &report.assertions {
        println!("  [{}] {:?}: {}", if a.passed { "pass" } else { "FAIL" }, a.assertion, a.detail);
    }
}

fn run() -> Result<bool> {
    match Cli::parse().command {
        Command::Simulate(args) => simulate(&args).map(|_| true),
        Command::Theory { config, out } => theory(&config, &out).map(|_| true),
        Command::Fredholm { config, out, threads } => fredholm(&config, &out, threads).map(|_| true),
        Command::Sweep { run, assert } => {
            let config = run.load()?;
            let result = run_experiment(&config, run.threads)?;
            write_outputs(&result, &run.out)?;
            print_report(&result.report);
            Ok(!assert || result.report.passed())
        }
        Command::Report { input, assert } => {
            let path = if input.is_dir() { input.join("report.json") } else { input };
            let report = read_report(&path)?;
            print_report(&report);
            Ok(!assert || report.passed())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
