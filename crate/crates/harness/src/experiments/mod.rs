//! Experiment drivers. Each turns a validated config and a master seed into
//! a [`Report`]; replicas run on a worker pool and are reduced in replica
//! order, so the report does not depend on the worker count.

mod charfn;
mod clt;
mod holonomy;
mod oracle;
mod spitzer;

use rayon::prelude::*;
use rayon::ThreadPool;

use loopsoup::sampler::{stream_rng, SoupConfig, SoupSampler, StreamRng};
use loopsoup::{SoupError, TransitionMatrix};

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind};
use crate::report::{Gate, Report};
use crate::stats::Estimate;

pub use charfn::run_charfn_experiment;
pub use clt::{run_clt_experiment, run_winding_experiment};
pub use holonomy::run_holonomy_experiment;
pub use oracle::run_oracle_suite;
pub use spitzer::run_spitzer_experiment;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid config at {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Soup(#[from] SoupError),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

/// Master seed plus the worker pool replicas run on.
pub struct Runner {
    pool: ThreadPool,
    seed: u64,
}

impl Runner {
    pub fn new(seed: u64, workers: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| ExperimentError::Pool(e.to_string()))?;
        Ok(Self { pool, seed })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Runs `f` for replicas `0..n` of `block`, replica `r` drawing from
    /// stream `(block << 32) | r`; results come back in replica order.
    pub fn replicas<T, F>(&self, block: u32, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&mut StreamRng) -> T + Sync + Send,
    {
        assert!(n <= u32::MAX as usize, "too many replicas for one block");
        let seed = self.seed;
        self.pool.install(|| {
            (0..n)
                .into_par_iter()
                .map(|r| f(&mut stream_rng(seed, ((block as u64) << 32) | r as u64)))
                .collect()
        })
    }

    pub fn rng(&self, block: u32) -> StreamRng {
        stream_rng(self.seed, (block as u64) << 32 | 0xffff_ffff)
    }
}

/// Runs the experiment named by `cfg.kind`.
pub fn run_experiment(cfg: &ExperimentConfig, seed: u64, workers: usize) -> Result<Report> {
    cfg.validate()?;
    let runner = Runner::new(seed, workers)?;
    let report = match cfg.kind {
        ExperimentKind::Charfn => run_charfn_experiment(cfg, &runner)?,
        ExperimentKind::Clt => run_clt_experiment(cfg, &runner)?,
        ExperimentKind::WindingCov => run_winding_experiment(cfg, &runner)?,
        ExperimentKind::Holonomy => run_holonomy_experiment(cfg, &runner)?,
        ExperimentKind::Spitzer => run_spitzer_experiment(cfg, &runner)?,
        ExperimentKind::Oracle => run_oracle_suite(cfg, &runner)?,
    };
    Ok(report.finish())
}

fn new_report(cfg: &ExperimentConfig, runner: &Runner) -> Report {
    Report::new(cfg.kind.name(), cfg.hash(), runner.seed())
}

fn sampler(cfg: &ExperimentConfig, p: &TransitionMatrix) -> Result<SoupSampler> {
    let soup = SoupConfig { epsilon: cfg.epsilon, k_cap: cfg.k_cap, ..SoupConfig::new(1.0, 0) };
    Ok(SoupSampler::new(p, soup)?)
}

/// Monte Carlo gate: within `4·stderr` (at least `1e-12`, for exact zero-variance cases).
fn mc_gate(name: String, est: Estimate, target: f64, source: &str) -> Gate {
    Gate::within(name, est.mean, target, (4.0 * est.stderr).max(1e-12), source)
}

/// `at_most` gates asserting `values` do not increase along their order.
fn non_increasing_gates(prefix: &str, labels: &[String], values: &[f64]) -> Vec<Gate> {
    values
        .windows(2)
        .zip(labels.windows(2))
        .map(|(v, l)| Gate::at_most(format!("{prefix} {} ≤ {}", l[1], l[0]), v[1], v[0], "trend"))
        .collect()
}

fn fmt_num(x: f64) -> String {
    format!("{x:.6}").trim_end_matches('0').trim_end_matches('.').to_string()
}
