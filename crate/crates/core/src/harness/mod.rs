//! Experiment configuration, Monte Carlo sweeps over an intensity grid and
//! their reports.

mod config;
mod output;
mod run;

pub use config::{
    Assertion, ExperimentConfig, LaplaceTarget, ProcessSpec, QuerySpec, TestSettings, WindowSpec,
};
pub use output::{read_report, write_outputs, write_report, write_theory};
pub use run::{
    analyse_lambda, evaluate_assertions, fredholm_summary, limit_law, replicate_rng, run_experiment,
    simulate_lambda, simulate_replicate, theory_summary, AssertionOutcome, ConvergenceReport,
    DppSummary, ExperimentRun, FredholmSummary, LambdaRow, LaplaceCheck, PositionStats, Sampler,
    TheorySummary,
};
