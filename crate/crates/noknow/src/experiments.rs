//! The experiments behind each command, producing one [`Table`] each.

use std::ops::Range;

use noknow_core::liouvillian::fidelity_point;
use noknow_core::unravel::{ensemble_chunks, run_chunk, EnsembleAccumulator};
use noknow_core::{
    coarsen_increments, frobenius_distance, integrate_master_equation, propagate_filter, propagate_homodyne,
    propagate_increments, propagate_jump, EnsembleResult, IntegratorConfig, MonitoredModel, NoiseStream, Observation,
    QuantumState, Scheme, SteadyStateOptions, TrajectoryResult,
};
use rayon::prelude::*;

use crate::config::{Experiment, JumpSettings, QubitSettings, RunConfig, ScanSettings, Settings};
use crate::error::CliError;
use crate::output::{Cell, Table};

/// Thread pool for independent trajectories. Results are always gathered in
/// stream-index order, so they do not depend on the number of threads.
pub struct Runner {
    pool: rayon::ThreadPool,
}

impl Runner {
    /// `threads = None` uses every available core.
    pub fn new(threads: Option<usize>) -> Result<Self, CliError> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(k) = threads {
            b = b.num_threads(k.max(1));
        }
        let pool = b
            .build()
            .map_err(|e| CliError::io("starting worker threads", std::io::Error::other(e)))?;
        Ok(Self { pool })
    }

    /// `f(i)` for every `i` in `range`, in index order. The first error by
    /// index wins.
    pub fn map<T, F>(&self, range: Range<u64>, f: F) -> Result<Vec<T>, noknow_core::Error>
    where
        T: Send,
        F: Fn(u64) -> Result<T, noknow_core::Error> + Sync,
    {
        self.pool.install(|| {
            let out: Vec<Result<T, noknow_core::Error>> = range
                .into_par_iter()
                .map(|i| {
                    f(i).map_err(|e| noknow_core::Error::Trajectory {
                        stream_index: i,
                        source: Box::new(e),
                    })
                })
                .collect();
            out.into_iter().collect()
        })
    }

    /// Ensemble average over stream indices `0..n_traj`; chunks run in
    /// parallel and are folded in index order.
    pub fn ensemble(
        &self,
        model: &MonitoredModel,
        rho0: &QuantumState,
        cfg: &IntegratorConfig,
        n_traj: u64,
        base_seed: u64,
        obs: &Observation,
    ) -> Result<EnsembleResult, noknow_core::Error> {
        if n_traj == 0 {
            return Err(noknow_core::Error::Config("n_traj must be at least 1".into()));
        }
        let chunks = ensemble_chunks(n_traj);
        let parts: Vec<Result<EnsembleAccumulator, noknow_core::Error>> = self.pool.install(|| {
            chunks
                .into_par_iter()
                .map(|r| run_chunk(model, rho0, cfg, base_seed, r, obs))
                .collect()
        });
        let mut acc = EnsembleAccumulator::new();
        for p in parts {
            acc.merge(p?)?;
        }
        acc.finish()
    }
}

/// Runs the configured experiment.
pub fn run(cfg: &RunConfig, runner: &Runner) -> Result<Table, CliError> {
    let table = match (&cfg.settings, cfg.experiment) {
        (Settings::Qubit(q), Experiment::Trajectory) => trajectory(cfg, q)?,
        (Settings::Qubit(q), Experiment::FeedbackCancel) => feedback_cancel(cfg, q)?,
        (Settings::Qubit(q), Experiment::Ensemble) => ensemble(cfg, q, runner)?,
        (Settings::Qubit(q), Experiment::FilterDivergence) => filter_divergence(cfg, q, runner)?,
        (Settings::Qubit(q), Experiment::Convergence) => convergence(cfg, q, runner)?,
        (Settings::Jump(j), Experiment::Jump) => jump(cfg, j, runner)?,
        (Settings::Scan(s), Experiment::DqcScan) => dqc_scan(s)?,
        _ => unreachable!("settings always match the experiment"),
    };
    Ok(table)
}

fn integrator(cfg: &RunConfig) -> IntegratorConfig {
    cfg.integrator.expect("dynamics experiments carry an integrator")
}

fn observation(q: &QubitSettings) -> Observation {
    Observation::new(q.observables.iter().map(|o| o.operator()).collect())
}

fn names(q: &QubitSettings, prefix: &str, suffix: &str) -> Vec<String> {
    q.observables
        .iter()
        .map(|o| format!("{prefix}{}{suffix}", o.name()))
        .collect()
}

fn trajectory_columns(q: &QubitSettings, n_signals: usize) -> Vec<String> {
    let mut cols = vec!["time".to_string()];
    cols.extend(names(q, "", ""));
    cols.extend((0..n_signals).map(|k| format!("signal_{k}")));
    cols.extend(["trace", "purity", "log_norm"].map(String::from));
    cols
}

fn trajectory_rows(t: &TrajectoryResult, n_signals: usize) -> Vec<Vec<Cell>> {
    t.samples
        .iter()
        .map(|s| {
            let mut row = vec![Cell::Num(s.time)];
            row.extend(s.expectations.iter().map(|&x| Cell::Num(x)));
            for k in 0..n_signals {
                row.push(match s.step {
                    0 => Cell::Empty,
                    n => Cell::Num(t.record.signals[n - 1][k]),
                });
            }
            row.extend([s.trace, s.purity, s.log_norm].map(Cell::Num));
            row
        })
        .collect()
}

fn trajectory(cfg: &RunConfig, q: &QubitSettings) -> Result<Table, CliError> {
    let ic = integrator(cfg);
    let model = q.build()?;
    let k = model.homodyne_channels().len();
    let t = propagate_homodyne(
        &model,
        &q.initial_state(),
        &ic,
        NoiseStream::new(cfg.seed, 0, ic.dt),
        &observation(q),
    )?;
    let mut table = Table::new("trajectory/1", trajectory_columns(q, k));
    for row in trajectory_rows(&t, k) {
        table.push(row);
    }
    Ok(table)
}

/// Solutions of the averaged master equation at the given times.
fn averaged_states(model: &MonitoredModel, rho0: &QuantumState, times: &[f64]) -> Result<Vec<QuantumState>, CliError> {
    let (h, ls) = model.unconditional_lindblad();
    let mut out = Vec::with_capacity(times.len());
    let (mut rho, mut now) = (rho0.clone(), 0.0);
    for &t in times {
        if t > now {
            rho = integrate_master_equation(&h, &ls, &rho, t - now)?;
            now = t;
        }
        out.push(rho.clone());
    }
    Ok(out)
}

fn feedback_cancel(cfg: &RunConfig, q: &QubitSettings) -> Result<Table, CliError> {
    let ic = integrator(cfg);
    let model = q.build()?;
    let k = model.homodyne_channels().len();
    let obs = observation(q).with_states();
    let rho0 = q.initial_state();
    let t = propagate_homodyne(&model, &rho0, &ic, NoiseStream::new(cfg.seed, 0, ic.dt), &obs)?;
    let est = propagate_filter(&model, &q.estimate_state(), &t.record, &ic, &obs)?;
    let times: Vec<f64> = t.samples.iter().map(|s| s.time).collect();
    let reference = averaged_states(&model, &rho0, &times)?;

    let mut cols = trajectory_columns(q, k);
    cols.extend(["reference_distance", "filter_distance"].map(String::from));
    let mut table = Table::new("feedback-cancel/1", cols);
    for (i, mut row) in trajectory_rows(&t, k).into_iter().enumerate() {
        row.push(Cell::Num(frobenius_distance(&t.states[i], &reference[i])?));
        row.push(Cell::Num(frobenius_distance(&t.states[i], &est.states[i])?));
        table.push(row);
    }
    Ok(table)
}

fn ensemble(cfg: &RunConfig, q: &QubitSettings, runner: &Runner) -> Result<Table, CliError> {
    let ic = integrator(cfg);
    let model = q.build()?;
    let e = runner.ensemble(&model, &q.initial_state(), &ic, cfg.n_traj, cfg.seed, &observation(q))?;
    let mut cols = vec!["time".to_string()];
    for o in &q.observables {
        cols.push(format!("{}_mean", o.name()));
        cols.push(format!("{}_se", o.name()));
    }
    cols.push("n_traj".into());
    let mut table = Table::new("ensemble/1", cols);
    for (i, t) in e.times.iter().enumerate() {
        let mut row = vec![Cell::Num(*t)];
        for j in 0..q.observables.len() {
            row.push(Cell::Num(e.mean[i][j]));
            row.push(Cell::Num(e.std_err[i][j]));
        }
        row.push(Cell::Int(e.n_traj));
        table.push(row);
    }
    Ok(table)
}

fn filter_divergence(cfg: &RunConfig, q: &QubitSettings, runner: &Runner) -> Result<Table, CliError> {
    let ic = integrator(cfg);
    let model = q.build()?;
    let obs = observation(q).with_states();
    let (rho0, pi0) = (q.initial_state(), q.estimate_state());
    let runs = runner.map(0..cfg.n_traj, |idx| {
        let truth = propagate_homodyne(&model, &rho0, &ic, NoiseStream::new(cfg.seed, idx, ic.dt), &obs)?;
        let est = propagate_filter(&model, &pi0, &truth.record, &ic, &obs)?;
        Ok((truth, est))
    })?;
    let mut cols = vec!["stream_index".to_string(), "time".into(), "distance".into()];
    cols.extend(names(q, "true_", ""));
    cols.extend(names(q, "filter_", ""));
    let mut table = Table::new("filter-divergence/1", cols);
    for (idx, (truth, est)) in runs.iter().enumerate() {
        for (i, s) in truth.samples.iter().enumerate() {
            let mut row = vec![Cell::Int(idx as u64), Cell::Num(s.time)];
            row.push(Cell::Num(frobenius_distance(&truth.states[i], &est.states[i])?));
            row.extend(s.expectations.iter().map(|&x| Cell::Num(x)));
            row.extend(est.samples[i].expectations.iter().map(|&x| Cell::Num(x)));
            table.push(row);
        }
    }
    Ok(table)
}

fn jump(cfg: &RunConfig, j: &JumpSettings, runner: &Runner) -> Result<Table, CliError> {
    let ic = integrator(cfg);
    let model = j.build()?;
    let rho0 = j.initial_state();
    let reference = averaged_states(&model, &rho0, &[ic.n_steps() as f64 * ic.dt])?.remove(0);
    let rows = runner.map(0..cfg.n_traj, |idx| {
        let t = propagate_jump(
            &model,
            &rho0,
            &ic,
            NoiseStream::new(cfg.seed, idx, ic.dt),
            &Observation::default(),
        )?;
        Ok((t.record.jump_count(0), frobenius_distance(&t.final_state, &reference)?))
    })?;
    let cols = ["stream_index", "jump_count", "reference_distance"]
        .map(String::from)
        .to_vec();
    let mut table = Table::new("jump/1", cols);
    for (idx, (count, dist)) in rows.into_iter().enumerate() {
        table.push(vec![Cell::Int(idx as u64), Cell::Int(count as u64), Cell::Num(dist)]);
    }
    Ok(table)
}

fn dqc_scan(s: &ScanSettings) -> Result<Table, CliError> {
    let cols = [
        "n_qubits",
        "feedback",
        "eta",
        "fidelity",
        "relative_residual",
        "spectral_gap",
        "degenerate",
        "degraded",
    ]
    .map(String::from)
    .to_vec();
    let mut table = Table::new("dqc-scan/1", cols);
    let opts = SteadyStateOptions::default();
    for n in s.n_min..=s.n_max {
        let configs = std::iter::once(None).chain(s.etas.iter().map(|&e| Some(e)));
        for eta in configs {
            let row = fidelity_point(n, s.gamma_over_alpha, eta, &opts)?;
            table.push(vec![
                Cell::Int(n as u64),
                Cell::Bool(eta.is_some()),
                eta.into(),
                Cell::Num(row.fidelity),
                Cell::Num(row.relative_residual),
                row.spectral_gap.into(),
                Cell::Bool(row.degenerate),
                Cell::Bool(row.degraded),
            ]);
        }
    }
    Ok(table)
}

/// Per-seed distances of the convergence study, one entry per level.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSample {
    /// `‖ρ(dt) − ρ(dt/2)‖` with the configured scheme.
    pub strong: Vec<f64>,
    /// `‖ρ_Ito-Euler(dt) − ρ_Heun(dt)‖`.
    pub ito_strat: Vec<f64>,
}

/// Shared-path distances at `dt, dt/2, …, dt/2^(levels−1)` for one seed.
pub fn convergence_sample(
    model: &MonitoredModel,
    rho0: &QuantumState,
    ic: &IntegratorConfig,
    levels: usize,
    seed: u64,
    stream_index: u64,
) -> Result<ConvergenceSample, noknow_core::Error> {
    let k = model.homodyne_channels().len();
    let finest = ic.dt / (1u64 << levels) as f64;
    let n_fine = ic.n_steps() << levels;
    let mut s = NoiseStream::new(seed, stream_index, finest);
    let mut grids = vec![(0..n_fine)
        .map(|_| (0..k).map(|_| s.wiener_increment()).collect::<Vec<f64>>())
        .collect::<Vec<_>>()];
    for _ in 0..levels {
        let c = coarsen_increments(grids.last().expect("nonempty"));
        grids.push(c);
    }
    // grids[m] has step finest·2^m
    let mut out = ConvergenceSample {
        strong: Vec::with_capacity(levels),
        ito_strat: Vec::with_capacity(levels),
    };
    for i in 0..levels {
        let dt = ic.dt / (1u64 << i) as f64;
        let coarse = &grids[levels - i];
        let fine = &grids[levels - i - 1];
        let a = propagate_increments(model, rho0, ic.scheme, dt, coarse)?;
        let b = propagate_increments(model, rho0, ic.scheme, dt / 2.0, fine)?;
        out.strong.push(frobenius_distance(&a, &b)?);
        let ito = propagate_increments(model, rho0, Scheme::ItoEuler, dt, coarse)?;
        let heun = propagate_increments(model, rho0, Scheme::StratonovichHeun, dt, coarse)?;
        out.ito_strat.push(frobenius_distance(&ito, &heun)?);
    }
    Ok(out)
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn convergence(cfg: &RunConfig, q: &QubitSettings, runner: &Runner) -> Result<Table, CliError> {
    let ic = integrator(cfg);
    let model = q.build()?;
    let rho0 = q.initial_state();
    let samples = runner.map(0..cfg.n_traj, |idx| {
        convergence_sample(&model, &rho0, &ic, cfg.levels, cfg.seed, idx)
    })?;
    let cols = ["dt", "strong_error_median", "ito_strat_median", "n_traj"]
        .map(String::from)
        .to_vec();
    let mut table = Table::new("convergence/1", cols);
    for i in 0..cfg.levels {
        let strong = median(samples.iter().map(|s| s.strong[i]).collect());
        let cross = median(samples.iter().map(|s| s.ito_strat[i]).collect());
        table.push(vec![
            Cell::Num(ic.dt / (1u64 << i) as f64),
            Cell::Num(strong),
            Cell::Num(cross),
            Cell::Int(cfg.n_traj),
        ]);
    }
    Ok(table)
}
