//! Grid sweeps over entropy coefficients and window lengths.
//!
//! A sweep runs standard PPO at every coefficient and the adaptive variant at
//! every nonzero coefficient for every `tau`, each with `seeds_per_cell`
//! consecutive seeds. At coefficient 0 the two modes coincide, so adaptive
//! cells there are skipped.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::adaptive::Mode;
use crate::error::{contract, Result};
use crate::trainer::{evaluate, save_update_log, seed_offset, stream, train, TrainConfig};

pub const DEFAULT_COEFFICIENTS: [f64; 5] = [0.0, 0.1, 0.3, 0.5, 0.8];
pub const DEFAULT_TAUS: [usize; 6] = [1, 10, 20, 50, 100, 200];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub coefficient_grid: Vec<f64>,
    pub tau_grid: Vec<usize>,
    pub seeds_per_cell: usize,
    pub base_seed: u64,
    pub include_standard: bool,
    pub parallelism: usize,
    pub output_dir: PathBuf,
    /// Hyperparameters shared by every run; mode, coefficient, tau and seed
    /// are overwritten per run.
    pub template: TrainConfig,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            coefficient_grid: DEFAULT_COEFFICIENTS.to_vec(),
            tau_grid: DEFAULT_TAUS.to_vec(),
            seeds_per_cell: 3,
            base_seed: 0,
            include_standard: true,
            parallelism: 1,
            output_dir: PathBuf::from("results"),
            template: TrainConfig::default(),
        }
    }
}

/// One training run of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub mode: Mode,
    pub c2_base: f64,
    /// `None` for standard runs.
    pub tau: Option<usize>,
    pub seed: u64,
}

impl RunSpec {
    pub fn log_name(&self) -> String {
        let tau = self.tau.map_or_else(|| "na".to_string(), |t| t.to_string());
        format!("run_{}_{}_{}_{}.csv", self.mode, self.c2_base, tau, self.seed)
    }

    pub fn train_config(&self, template: &TrainConfig) -> TrainConfig {
        TrainConfig {
            mode: self.mode,
            c2_base: self.c2_base,
            tau: self.tau.unwrap_or(template.tau),
            seed: self.seed,
            ..template.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub mode: Mode,
    pub c2_base: f64,
    pub tau: Option<usize>,
    pub seed: u64,
    /// Mean evaluation return; `None` when the run diverged.
    pub final_mean_return: Option<f64>,
    pub failure: Option<String>,
    pub wall_time_s: f64,
    pub log_path: PathBuf,
}

impl RunResult {
    pub fn diverged(&self) -> bool {
        self.final_mean_return.is_none()
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.coefficient_grid.is_empty() || self.tau_grid.is_empty() {
            return Err(contract("coefficient and tau grids must be non-empty"));
        }
        if self
            .coefficient_grid
            .iter()
            .any(|c| !(*c >= 0.0 && c.is_finite()))
        {
            return Err(contract("entropy coefficients must be finite and >= 0"));
        }
        if self.tau_grid.contains(&0) {
            return Err(contract("every tau must be at least 1"));
        }
        if self.seeds_per_cell == 0 || self.parallelism == 0 {
            return Err(contract("seeds_per_cell and parallelism must be at least 1"));
        }
        self.template.validate()
    }

    /// Every run of the grid, in output order.
    pub fn plan(&self) -> Vec<RunSpec> {
        let seeds = || (0..self.seeds_per_cell as u64).map(|i| self.base_seed.wrapping_add(i));
        let mut runs = Vec::new();
        if self.include_standard {
            for &c2_base in &self.coefficient_grid {
                runs.extend(seeds().map(|seed| RunSpec {
                    mode: Mode::Standard,
                    c2_base,
                    tau: None,
                    seed,
                }));
            }
        }
        for &tau in &self.tau_grid {
            for &c2_base in self.coefficient_grid.iter().filter(|&&c| c != 0.0) {
                runs.extend(seeds().map(|seed| RunSpec {
                    mode: Mode::Adaptive,
                    c2_base,
                    tau: Some(tau),
                    seed,
                }));
            }
        }
        runs
    }
}

/// Trains, evaluates and logs a single run. Divergence is recorded, not raised.
pub fn execute_run(run: &RunSpec, template: &TrainConfig, log_dir: &Path) -> Result<RunResult> {
    let config = run.train_config(template);
    let log_path = log_dir.join(run.log_name());
    let started = Instant::now();

    let (records, outcome) = match train(&config) {
        Ok(trained) => {
            let mut rng = stream(config.seed, seed_offset::EVAL);
            let outcome = evaluate(&trained.params, &config.network, config.eval_episodes, &mut rng)
                .map(|report| report.mean_return)
                .map_err(|e| e.to_string());
            (trained.records, outcome)
        }
        Err(failure) => (failure.records, Err(failure.source.to_string())),
    };
    save_update_log(&log_path, &records)?;

    let (final_mean_return, failure) = match outcome {
        Ok(mean) => (Some(mean), None),
        Err(msg) => (None, Some(msg)),
    };
    Ok(RunResult {
        mode: run.mode,
        c2_base: run.c2_base,
        tau: run.tau,
        seed: run.seed,
        final_mean_return,
        failure,
        wall_time_s: started.elapsed().as_secs_f64(),
        log_path,
    })
}

/// Runs the whole grid with up to `parallelism` runs in flight. Results come
/// back in [`SweepSpec::plan`] order whatever the completion order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<RunResult>> {
    spec.validate()?;
    let log_dir = spec.output_dir.join("logs");
    fs::create_dir_all(&log_dir)?;
    let plan = spec.plan();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.parallelism)
        .build()
        .map_err(|e| contract(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        plan.par_iter()
            .map(|run| execute_run(run, &spec.template, &log_dir))
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Markdown,
}

pub const RUNS_CSV_HEADER: &str = "mode,c2,tau,seed,final_return,wall_time_s,diverged";

/// Mean evaluation return over the non-diverged runs of one cell.
pub fn cell_mean(results: &[RunResult], mode: Mode, c2_base: f64, tau: Option<usize>) -> Option<f64> {
    let returns: Vec<f64> = results
        .iter()
        .filter(|r| r.mode == mode && r.c2_base == c2_base && (mode == Mode::Standard || r.tau == tau))
        .filter_map(|r| r.final_mean_return)
        .collect();
    (!returns.is_empty()).then(|| returns.iter().sum::<f64>() / returns.len() as f64)
}

pub fn render_results(results: &[RunResult], format: Format) -> String {
    match format {
        Format::Csv => render_csv(results),
        Format::Markdown => render_markdown(results),
    }
}

fn render_csv(results: &[RunResult]) -> String {
    let mut out = String::new();
    writeln!(out, "{RUNS_CSV_HEADER}").unwrap();
    for r in results {
        let tau = r.tau.map(|t| t.to_string()).unwrap_or_default();
        let ret = r.final_mean_return.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.mode,
            r.c2_base,
            tau,
            r.seed,
            ret,
            r.wall_time_s,
            r.diverged()
        )
        .unwrap();
    }
    out
}

fn sorted_unique<T: Copy, K: Eq + std::hash::Hash>(
    items: impl Iterator<Item = T>,
    key: impl Fn(T) -> K,
    cmp: impl Fn(&T, &T) -> std::cmp::Ordering,
) -> Vec<T> {
    let mut seen = HashMap::new();
    let mut out: Vec<T> = items.filter(|&v| seen.insert(key(v), ()).is_none()).collect();
    out.sort_by(cmp);
    out
}

/// Table with one row per algorithm (standard, then one per tau) and one
/// column per coefficient. Cells hold the seed-mean return rounded to an
/// integer; `-` marks the skipped adaptive cells at coefficient 0 and
/// `n/a` a cell whose runs all diverged.
fn render_markdown(results: &[RunResult]) -> String {
    let coefficients = sorted_unique(results.iter().map(|r| r.c2_base), f64::to_bits, |a, b| {
        a.total_cmp(b)
    });
    let taus = sorted_unique(results.iter().filter_map(|r| r.tau), |t| t, |a, b| a.cmp(b));
    let has_standard = results.iter().any(|r| r.mode == Mode::Standard);

    let mut out = String::new();
    let header: Vec<String> = coefficients.iter().map(|c| c.to_string()).collect();
    writeln!(out, "| Algorithm | {} |", header.join(" | ")).unwrap();
    writeln!(out, "|---|{}", "---|".repeat(coefficients.len())).unwrap();

    let cell = |mode: Mode, c2: f64, tau: Option<usize>| -> String {
        let ran = results
            .iter()
            .any(|r| r.mode == mode && r.c2_base == c2 && r.tau == tau);
        if !ran {
            return "-".into();
        }
        match cell_mean(results, mode, c2, tau) {
            Some(mean) => format!("{}", mean.round() as i64),
            None => "n/a".into(),
        }
    };

    if has_standard {
        let cells: Vec<String> = coefficients
            .iter()
            .map(|&c| cell(Mode::Standard, c, None))
            .collect();
        writeln!(out, "| Standard PPO | {} |", cells.join(" | ")).unwrap();
    }
    for &tau in &taus {
        let cells: Vec<String> = coefficients
            .iter()
            .map(|&c| cell(Mode::Adaptive, c, Some(tau)))
            .collect();
        writeln!(out, "| axPPO τ = {tau} | {} |", cells.join(" | ")).unwrap();
    }
    out
}

/// Writes `runs.csv` and `table.md` into `dir`.
pub fn write_sweep_outputs(dir: &Path, results: &[RunResult]) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("runs.csv"), render_results(results, Format::Csv))?;
    fs::write(dir.join("table.md"), render_results(results, Format::Markdown))?;
    Ok(())
}
