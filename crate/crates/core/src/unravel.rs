//! Trajectory propagation: homodyne diffusion, quantum filtering on a stored
//! record, photodetection jumps, and ensemble averages.
//!
//! Within a step of length `dt` the homodyne signal of channel `k` is
//! `y_k = √η_k⟨c_k + c_k†⟩ + dW_k/dt` with `c_k = L_k e^{iθ_k}`, evaluated on
//! the state at the start of the step and held fixed for the step. With the
//! signal fixed, the linear (unnormalized) stochastic master equation is a
//! linear ODE `ρ̇ = 𝒦(y)ρ` where
//!
//! ```text
//! 𝒦(y)ρ = Gρ + ρG† + Σ_j J_j ρ J_j†
//! G     = −iH − ½Σ L†L − Σ_k (η_k/2) c_k² + Σ_k (√η_k c_k − iF_k) y_k
//! ```
//!
//! with `F_k` the feedback gain on channel `k`, `J = √(1−η)L` for homodyne
//! channels and `J = L` for unmonitored ones. The exponential scheme applies
//! `exp(dt·𝒦(y))` exactly; the Heun and Euler-Maruyama schemes integrate the
//! same equation through [`crate::sde`].

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::generator;
use crate::model::{Channel, Detection, MonitoredModel};
use crate::noise::NoiseStream;
use crate::operator::{expm, OperatorMatrix, SqrtLibm, I};
use crate::sde::{ito_step, strat_correction, stratonovich_step, IntegratorConfig, Scheme, StochasticSystem};
use crate::state::QuantumState;
use crate::superop::expectation;

type CMat = DMatrix<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `y = √η⟨Le^{iθ} + L†e^{−iθ}⟩ + ξ` for a homodyne channel.
pub fn homodyne_signal(rho: &QuantumState, ch: &Channel, xi: f64) -> Result<f64> {
    let Detection::Homodyne { theta, eta } = ch.detection else {
        return Err(Error::Model("signal requested for a non-homodyne channel".into()));
    };
    let phase = Complex64::from_polar(1.0, theta);
    let quad = ch.l.scale_complex(phase) + ch.l.adjoint().scale_complex(phase.conj());
    Ok(eta.sqrt_libm() * expectation(&quad, rho)?.re + xi)
}

/// Observables sampled along a trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Observation {
    pub observables: Vec<OperatorMatrix>,
    /// Keep the normalized state at every sampled time.
    pub keep_states: bool,
}

impl Observation {
    pub fn new(observables: Vec<OperatorMatrix>) -> Self {
        Self {
            observables,
            keep_states: false,
        }
    }

    pub fn with_states(mut self) -> Self {
        self.keep_states = true;
        self
    }

    fn validate(&self, dim: usize) -> Result<()> {
        for o in &self.observables {
            o.check_dim(dim)?;
        }
        Ok(())
    }

    fn sample(&self, step: usize, time: f64, rho: &QuantumState) -> Result<Sample> {
        let expectations = self
            .observables
            .iter()
            .map(|o| expectation(o, rho).map(|z| z.re))
            .collect::<Result<_>>()?;
        Ok(Sample {
            step,
            time,
            expectations,
            trace: rho.trace(),
            purity: rho.purity(),
            log_norm: rho.log_norm(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub step: usize,
    pub time: f64,
    /// Real parts of the normalized expectations, in observable order.
    pub expectations: Vec<f64>,
    /// Trace of the carried (unnormalized) matrix.
    pub trace: f64,
    /// Purity of the normalized state.
    pub purity: f64,
    pub log_norm: f64,
}

/// Every step's signals and jump flags.
///
/// `signals[n][k]` is the signal of the `k`-th homodyne channel during step
/// `n` (from `times[n] − dt` to `times[n]`); `jumps[n][k]` flags a detection
/// on the `k`-th photodetected channel.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub seed: u64,
    pub stream_index: u64,
    pub dt: f64,
    pub times: Vec<f64>,
    pub signals: Vec<Vec<f64>>,
    pub jumps: Vec<Vec<bool>>,
}

impl MeasurementRecord {
    fn new(stream: &NoiseStream, dt: f64, n_steps: usize) -> Self {
        Self {
            seed: stream.seed(),
            stream_index: stream.stream_index(),
            dt,
            times: Vec::with_capacity(n_steps),
            signals: Vec::new(),
            jumps: Vec::new(),
        }
    }

    pub fn n_steps(&self) -> usize {
        self.times.len()
    }

    /// Number of detections on the `k`-th photodetected channel.
    pub fn jump_count(&self, k: usize) -> usize {
        self.jumps
            .iter()
            .filter(|row| row.get(k).copied().unwrap_or(false))
            .count()
    }

    /// End times of the steps with a detection on photodetected channel `k`.
    pub fn jump_times(&self, k: usize) -> Vec<f64> {
        self.jumps
            .iter()
            .zip(&self.times)
            .filter(|(row, _)| row.get(k).copied().unwrap_or(false))
            .map(|(_, t)| *t)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryResult {
    pub record: MeasurementRecord,
    pub samples: Vec<Sample>,
    /// Normalized states at the sample times when requested.
    pub states: Vec<QuantumState>,
    pub final_state: QuantumState,
}

/// Time of step boundary `n`.
pub fn step_time(n: usize, dt: f64) -> f64 {
    n as f64 * dt
}

fn is_sampled(n: usize, n_steps: usize, stride: usize) -> bool {
    n.is_multiple_of(stride) || n == n_steps
}

struct Recorder<'a> {
    obs: &'a Observation,
    stride: usize,
    n_steps: usize,
    dt: f64,
    samples: Vec<Sample>,
    states: Vec<QuantumState>,
}

impl<'a> Recorder<'a> {
    fn new(obs: &'a Observation, cfg: &IntegratorConfig) -> Self {
        Self {
            obs,
            stride: cfg.record_stride,
            n_steps: cfg.n_steps(),
            dt: cfg.dt,
            samples: Vec::new(),
            states: Vec::new(),
        }
    }

    fn visit(&mut self, n: usize, rho: &QuantumState) -> Result<()> {
        if is_sampled(n, self.n_steps, self.stride) {
            let t = step_time(n, self.dt);
            self.samples.push(self.obs.sample(n, t, rho)?);
            if self.obs.keep_states {
                self.states.push(rho.normalized());
            }
        }
        Ok(())
    }

    fn finish(self, record: MeasurementRecord, final_state: QuantumState) -> TrajectoryResult {
        TrajectoryResult {
            record,
            samples: self.samples,
            states: self.states,
            final_state,
        }
    }
}

fn flatten(m: &CMat) -> Vec<f64> {
    m.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn unflatten(x: &[f64], dim: usize) -> CMat {
    DMatrix::from_iterator(dim, dim, x.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])))
}

/// Deterministic and signal-coupled parts of the stochastic master equation
/// at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct SmeRhs {
    /// `L̂ρ − Σ_k (η_k/2)A²[c_k]ρ`.
    pub drift: OperatorMatrix,
    /// `A[√η_k c_k − iF_k]ρ = √η_k A[c_k]ρ − i[F_k, ρ]`, one per homodyne
    /// channel.
    pub diffusion: Vec<OperatorMatrix>,
}

impl SmeRhs {
    /// `drift + Σ_k diffusion_k · y_k`.
    pub fn total(&self, signals: &[f64]) -> Result<OperatorMatrix> {
        if signals.len() != self.diffusion.len() {
            return Err(Error::Dimension {
                expected: self.diffusion.len(),
                found: signals.len(),
            });
        }
        let mut out = self.drift.clone();
        for (d, &y) in self.diffusion.iter().zip(signals) {
            out += &d.scale(y);
        }
        Ok(out)
    }
}

/// Stratonovich right-hand side split into drift and per-channel diffusion.
pub fn sme_rhs(model: &MonitoredModel, rho: &QuantumState) -> Result<SmeRhs> {
    rho.matrix().check_dim(model.dim())?;
    let parts = SmeParts::new(model)?;
    let r = rho.matrix().matrix();
    Ok(SmeRhs {
        drift: OperatorMatrix::from_inner(generator::apply(&parts.g0, &parts.sandwich, r)),
        diffusion: parts
            .couplings
            .iter()
            .map(|k| OperatorMatrix::from_inner(k * r + r * k.adjoint()))
            .collect(),
    })
}

/// Precomputed operators of the homodyne SME.
#[derive(Debug, Clone)]
struct SmeParts {
    dim: usize,
    g0: CMat,
    sandwich: Vec<CMat>,
    /// `√η c + √η c†` per homodyne channel (signal mean operator).
    quadratures: Vec<OperatorMatrix>,
    /// `√η c − iF` per homodyne channel.
    couplings: Vec<CMat>,
}

impl SmeParts {
    fn new(model: &MonitoredModel) -> Result<Self> {
        let dim = model.dim();
        let mut g0 = model.hamiltonian().matrix() * (-I);
        let mut sandwich = Vec::new();
        let mut quadratures = Vec::new();
        let mut couplings = Vec::new();
        for (i, ch) in model.channels().iter().enumerate() {
            let l = ch.l.matrix();
            g0 -= (l.adjoint() * l) * c(0.5);
            match ch.detection {
                Detection::Unmonitored => sandwich.push(l.clone()),
                Detection::Photodetect => {
                    return Err(Error::Model(format!(
                        "channel {i} is photodetected; use the jump propagator"
                    )))
                }
                Detection::Homodyne { eta, .. } => {
                    let rot = ch.rotated().expect("homodyne").into_inner();
                    let se = eta.sqrt_libm();
                    g0 -= (&rot * &rot) * c(0.5 * eta);
                    if eta < 1.0 {
                        sandwich.push(l * c((1.0 - eta).sqrt_libm()));
                    }
                    let q = &rot * c(se);
                    quadratures.push(OperatorMatrix::from_inner(&q + q.adjoint()));
                    let mut k = q;
                    if let Some(f) = model.feedback_gain(i) {
                        k -= f.matrix() * I;
                    }
                    couplings.push(k);
                }
            }
        }
        Ok(Self {
            dim,
            g0,
            sandwich,
            quadratures,
            couplings,
        })
    }
}

impl StochasticSystem for SmeParts {
    fn noise_count(&self) -> usize {
        self.couplings.len()
    }

    fn drift(&self, x: &[f64]) -> Vec<f64> {
        let r = unflatten(x, self.dim);
        flatten(&generator::apply(&self.g0, &self.sandwich, &r))
    }

    fn diffusion(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let r = unflatten(x, self.dim);
        let kk = &self.couplings[k];
        flatten(&(kk * &r + &r * kk.adjoint()))
    }
}

/// Ito form of a Stratonovich system: drift `a + ½Σ_k B_k²x`.
struct ItoForm<'a, S>(&'a S);

impl<S: StochasticSystem> StochasticSystem for ItoForm<'_, S> {
    fn noise_count(&self) -> usize {
        self.0.noise_count()
    }

    fn drift(&self, x: &[f64]) -> Vec<f64> {
        let mut a = self.0.drift(x);
        for (ai, ci) in a.iter_mut().zip(strat_correction(self.0, x)) {
            *ai -= ci;
        }
        a
    }

    fn diffusion(&self, k: usize, x: &[f64]) -> Vec<f64> {
        self.0.diffusion(k, x)
    }
}

/// Steps a homodyne-monitored model given per-step signals.
#[derive(Debug, Clone)]
pub struct HomodyneIntegrator {
    parts: SmeParts,
    scheme: Scheme,
    dt: f64,
}

impl HomodyneIntegrator {
    pub fn new(model: &MonitoredModel, scheme: Scheme, dt: f64) -> Result<Self> {
        Ok(Self {
            parts: SmeParts::new(model)?,
            scheme,
            dt,
        })
    }

    pub fn channel_count(&self) -> usize {
        self.parts.couplings.len()
    }

    /// Signals `√η⟨c + c†⟩ + dW/dt` for the given Wiener increments.
    pub fn signals(&self, rho: &QuantumState, dws: &[f64]) -> Result<Vec<f64>> {
        if dws.len() != self.channel_count() {
            return Err(Error::Dimension {
                expected: self.channel_count(),
                found: dws.len(),
            });
        }
        self.parts
            .quadratures
            .iter()
            .zip(dws)
            .map(|(q, dw)| Ok(expectation(q, rho)?.re + dw / self.dt))
            .collect()
    }

    /// One step driven by the signals `ys`, followed by Hermitization and the
    /// trace-rescaling policy.
    pub fn advance(&self, rho: &mut QuantumState, ys: &[f64]) -> Result<()> {
        if ys.len() != self.channel_count() {
            return Err(Error::Dimension {
                expected: self.channel_count(),
                found: ys.len(),
            });
        }
        let r = rho.matrix().matrix();
        let next = match self.scheme {
            Scheme::Exponential => {
                let mut g = self.parts.g0.clone();
                for (k, &y) in self.parts.couplings.iter().zip(ys) {
                    g += k * c(y);
                }
                generator::propagate(&g, &self.parts.sandwich, r, self.dt)
            }
            Scheme::StratonovichHeun | Scheme::ItoEuler => {
                let x = flatten(r);
                let incs: Vec<f64> = ys.iter().map(|y| y * self.dt).collect();
                let out = if self.scheme == Scheme::ItoEuler {
                    ito_step(&ItoForm(&self.parts), &x, &incs, self.dt)?
                } else {
                    stratonovich_step(&self.parts, &x, &incs, self.dt)?
                };
                unflatten(&out, self.parts.dim)
            }
        };
        rho.set_matrix(next);
        rho.hermitize();
        rho.renormalize()
    }
}

fn check_start(model: &MonitoredModel, rho0: &QuantumState, obs: &Observation) -> Result<()> {
    rho0.matrix().check_dim(model.dim())?;
    obs.validate(model.dim())
}

fn check_stream(stream: &NoiseStream, cfg: &IntegratorConfig) -> Result<()> {
    if stream.dt() != cfg.dt {
        return Err(Error::Config(format!(
            "noise stream dt {} differs from integrator dt {}",
            stream.dt(),
            cfg.dt
        )));
    }
    Ok(())
}

/// Conditional homodyne trajectory with fresh noise from `stream`.
///
/// Each step draws one Wiener increment per homodyne channel, in channel
/// order, forms the signals from the current state and feeds them (and any
/// attached feedback) into the same step.
pub fn propagate_homodyne(
    model: &MonitoredModel,
    rho0: &QuantumState,
    cfg: &IntegratorConfig,
    mut stream: NoiseStream,
    obs: &Observation,
) -> Result<TrajectoryResult> {
    cfg.validate()?;
    check_start(model, rho0, obs)?;
    check_stream(&stream, cfg)?;
    let integ = HomodyneIntegrator::new(model, cfg.scheme, cfg.dt)?;
    let n_steps = cfg.n_steps();
    let mut record = MeasurementRecord::new(&stream, cfg.dt, n_steps);
    record.signals.reserve(n_steps);
    let mut rec = Recorder::new(obs, cfg);
    let mut rho = rho0.clone();
    rec.visit(0, &rho)?;
    let mut dws = vec![0.0; integ.channel_count()];
    for n in 1..=n_steps {
        for dw in dws.iter_mut() {
            *dw = stream.wiener_increment();
        }
        let ys = integ.signals(&rho, &dws)?;
        integ.advance(&mut rho, &ys).map_err(|e| step_context(e, n))?;
        record.times.push(step_time(n, cfg.dt));
        record.signals.push(ys);
        rec.visit(n, &rho)?;
    }
    Ok(rec.finish(record, rho))
}

fn step_context(e: Error, n: usize) -> Error {
    match e {
        Error::Numerical(msg) => Error::Numerical(format!("step {n}: {msg}")),
        Error::State(msg) => Error::State(format!("step {n}: {msg}")),
        other => other,
    }
}

/// Quantum filter driven by a stored record instead of fresh noise.
pub fn propagate_filter(
    model: &MonitoredModel,
    pi0: &QuantumState,
    record: &MeasurementRecord,
    cfg: &IntegratorConfig,
    obs: &Observation,
) -> Result<TrajectoryResult> {
    cfg.validate()?;
    check_start(model, pi0, obs)?;
    let integ = HomodyneIntegrator::new(model, cfg.scheme, cfg.dt)?;
    let n_steps = cfg.n_steps();
    if record.dt != cfg.dt {
        return Err(Error::Record(format!(
            "record dt {} differs from {}",
            record.dt, cfg.dt
        )));
    }
    if record.n_steps() != n_steps || record.signals.len() != n_steps {
        return Err(Error::Record(format!(
            "record has {} steps, configuration needs {}",
            record.n_steps(),
            n_steps
        )));
    }
    for (n, t) in record.times.iter().enumerate() {
        if *t != step_time(n + 1, cfg.dt) {
            return Err(Error::Record(format!("time {t} at step {} is off the grid", n + 1)));
        }
    }
    let mut rec = Recorder::new(obs, cfg);
    let mut pi = pi0.clone();
    rec.visit(0, &pi)?;
    for (n, ys) in record.signals.iter().enumerate() {
        if ys.len() != integ.channel_count() {
            return Err(Error::Record(format!(
                "step {} has {} signals, model has {} homodyne channels",
                n + 1,
                ys.len(),
                integ.channel_count()
            )));
        }
        integ.advance(&mut pi, ys).map_err(|e| step_context(e, n + 1))?;
        rec.visit(n + 1, &pi)?;
    }
    Ok(rec.finish(record.clone(), pi))
}

/// Final state of a homodyne trajectory driven by given Wiener increments,
/// `increments[n][k]` for step `n` and homodyne channel `k`.
///
/// Used for shared-path comparisons across schemes and step sizes; pair with
/// [`coarsen_increments`] to derive the coarser grids of one path.
pub fn propagate_increments(
    model: &MonitoredModel,
    rho0: &QuantumState,
    scheme: Scheme,
    dt: f64,
    increments: &[Vec<f64>],
) -> Result<QuantumState> {
    rho0.matrix().check_dim(model.dim())?;
    let integ = HomodyneIntegrator::new(model, scheme, dt)?;
    let mut rho = rho0.clone();
    for (n, dws) in increments.iter().enumerate() {
        let ys = integ.signals(&rho, dws)?;
        integ.advance(&mut rho, &ys).map_err(|e| step_context(e, n + 1))?;
    }
    Ok(rho)
}

/// Sums consecutive pairs of steps: the same Brownian path on a grid of twice
/// the step. A trailing odd step is dropped.
pub fn coarsen_increments(increments: &[Vec<f64>]) -> Vec<Vec<f64>> {
    increments
        .chunks_exact(2)
        .map(|p| p[0].iter().zip(&p[1]).map(|(a, b)| a + b).collect())
        .collect()
}

/// Photodetection trajectory.
///
/// Each step evolves with the no-jump generator `−iH − ½ΣL†L` (plus
/// `D[L]`-type sandwich terms for unmonitored channels), then draws one
/// uniform per photodetected channel in channel order; a detection, with
/// probability `⟨L†L⟩dt` evaluated at the start of the step, applies
/// `ω → LωL†` followed by the channel's correction unitary if any.
pub fn propagate_jump(
    model: &MonitoredModel,
    omega0: &QuantumState,
    cfg: &IntegratorConfig,
    mut stream: NoiseStream,
    obs: &Observation,
) -> Result<TrajectoryResult> {
    cfg.validate()?;
    check_start(model, omega0, obs)?;
    check_stream(&stream, cfg)?;
    let mut g = model.hamiltonian().matrix() * (-I);
    let mut sandwich = Vec::new();
    let mut detected = Vec::new();
    let mut rate_bound = 0.0;
    for (i, ch) in model.channels().iter().enumerate() {
        let l = ch.l.matrix();
        let ldl = OperatorMatrix::from_inner(l.adjoint() * l);
        g -= ldl.matrix() * c(0.5);
        match ch.detection {
            Detection::Unmonitored => sandwich.push(l.clone()),
            Detection::Photodetect => {
                rate_bound += ldl.hermitian_spectral_radius();
                let corr = model.jump_correction(i).map(|u| u.matrix().clone());
                detected.push((l.clone(), ldl, corr));
            }
            Detection::Homodyne { .. } => {
                return Err(Error::Model(format!(
                    "channel {i} is homodyne; use the diffusive propagator"
                )))
            }
        }
    }
    if rate_bound * cfg.dt >= 0.1 {
        return Err(Error::Config(format!(
            "jump probability bound {:.3} per step must stay below 0.1",
            rate_bound * cfg.dt
        )));
    }
    let no_jump = if sandwich.is_empty() {
        Some(expm(&(&g * c(cfg.dt))))
    } else {
        None
    };
    let n_steps = cfg.n_steps();
    let mut record = MeasurementRecord::new(&stream, cfg.dt, n_steps);
    record.jumps.reserve(n_steps);
    let mut rec = Recorder::new(obs, cfg);
    let mut w = omega0.clone();
    rec.visit(0, &w)?;
    for n in 1..=n_steps {
        let probs = detected
            .iter()
            .map(|(_, ldl, _)| Ok(expectation(ldl, &w)?.re * cfg.dt))
            .collect::<Result<Vec<f64>>>()?;
        let r = w.matrix().matrix();
        let mut next = match &no_jump {
            Some(m) => m * r * m.adjoint(),
            None => generator::propagate(&g, &sandwich, r, cfg.dt),
        };
        let mut flags = Vec::with_capacity(detected.len());
        for ((l, _, corr), p) in detected.iter().zip(&probs) {
            let jump = stream.uniform() < *p;
            if jump {
                next = l * &next * l.adjoint();
                if let Some(u) = corr {
                    next = u * &next * u.adjoint();
                }
            }
            flags.push(jump);
        }
        w.set_matrix(next);
        w.hermitize();
        w.renormalize().map_err(|e| step_context(e, n))?;
        record.times.push(step_time(n, cfg.dt));
        record.jumps.push(flags);
        rec.visit(n, &w)?;
    }
    Ok(rec.finish(record, w))
}

/// Dispatches to the jump propagator when the model has photodetected
/// channels and to the homodyne propagator otherwise.
pub fn propagate(
    model: &MonitoredModel,
    rho0: &QuantumState,
    cfg: &IntegratorConfig,
    stream: NoiseStream,
    obs: &Observation,
) -> Result<TrajectoryResult> {
    if model.photodetect_channels().is_empty() {
        propagate_homodyne(model, rho0, cfg, stream, obs)
    } else {
        propagate_jump(model, rho0, cfg, stream, obs)
    }
}

/// Trajectories per accumulation chunk. Fixed so that the summation order,
/// and hence every output bit, is independent of how chunks are scheduled.
pub const ENSEMBLE_CHUNK: u64 = 64;

/// Chunk ranges of stream indices `0..n_traj`.
pub fn ensemble_chunks(n_traj: u64) -> Vec<Range<u64>> {
    (0..n_traj)
        .step_by(ENSEMBLE_CHUNK as usize)
        .map(|s| s..(s + ENSEMBLE_CHUNK).min(n_traj))
        .collect()
}

/// Running sums over trajectories sharing a sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleAccumulator {
    count: u64,
    times: Vec<f64>,
    state_sums: Vec<CMat>,
    sums: Vec<Vec<f64>>,
    square_sums: Vec<Vec<f64>>,
}

impl EnsembleAccumulator {
    pub fn new() -> Self {
        Self {
            count: 0,
            times: Vec::new(),
            state_sums: Vec::new(),
            sums: Vec::new(),
            square_sums: Vec::new(),
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Adds a trajectory sampled with `keep_states`.
    pub fn add(&mut self, traj: &TrajectoryResult) -> Result<()> {
        if traj.states.len() != traj.samples.len() {
            return Err(Error::Model("ensemble trajectories must keep states".into()));
        }
        if self.count == 0 {
            self.times = traj.samples.iter().map(|s| s.time).collect();
            self.state_sums = traj.states.iter().map(|s| s.matrix().matrix().clone()).collect();
            self.sums = traj.samples.iter().map(|s| s.expectations.clone()).collect();
            self.square_sums = traj
                .samples
                .iter()
                .map(|s| s.expectations.iter().map(|x| x * x).collect())
                .collect();
        } else {
            if traj.samples.len() != self.times.len() {
                return Err(Error::Record("trajectories have different sample grids".into()));
            }
            for (i, (s, st)) in traj.samples.iter().zip(&traj.states).enumerate() {
                self.state_sums[i] += st.matrix().matrix();
                for (j, x) in s.expectations.iter().enumerate() {
                    self.sums[i][j] += x;
                    self.square_sums[i][j] += x * x;
                }
            }
        }
        self.count += 1;
        Ok(())
    }

    /// Adds the sums of a later chunk.
    pub fn merge(&mut self, other: EnsembleAccumulator) -> Result<()> {
        if other.count == 0 {
            return Ok(());
        }
        if self.count == 0 {
            *self = other;
            return Ok(());
        }
        if other.times.len() != self.times.len() {
            return Err(Error::Record("chunks have different sample grids".into()));
        }
        for i in 0..self.times.len() {
            self.state_sums[i] += &other.state_sums[i];
            for j in 0..self.sums[i].len() {
                self.sums[i][j] += other.sums[i][j];
                self.square_sums[i][j] += other.square_sums[i][j];
            }
        }
        self.count += other.count;
        Ok(())
    }

    pub fn finish(self) -> Result<EnsembleResult> {
        if self.count == 0 {
            return Err(Error::Model("empty ensemble".into()));
        }
        let n = self.count as f64;
        let mean_states = self
            .state_sums
            .into_iter()
            .map(|m| QuantumState::from_parts(OperatorMatrix::from_inner(m * c(1.0 / n)), 0.0))
            .collect();
        let mean: Vec<Vec<f64>> = self
            .sums
            .iter()
            .map(|row| row.iter().map(|x| x / n).collect())
            .collect();
        let std_err = self
            .square_sums
            .iter()
            .zip(&mean)
            .map(|(sq, mu)| {
                sq.iter()
                    .zip(mu)
                    .map(|(s, m)| {
                        if self.count < 2 {
                            0.0
                        } else {
                            let var = ((s - n * m * m) / (n - 1.0)).max(0.0);
                            (var / n).sqrt_libm()
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(EnsembleResult {
            n_traj: self.count,
            times: self.times,
            mean_states,
            mean,
            std_err,
        })
    }
}

impl Default for EnsembleAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub n_traj: u64,
    pub times: Vec<f64>,
    /// Average of the normalized conditional states.
    pub mean_states: Vec<QuantumState>,
    /// `mean[i][j]`: observable `j` at time `i`.
    pub mean: Vec<Vec<f64>>,
    pub std_err: Vec<Vec<f64>>,
}

/// Runs trajectories `range` (stream indices) sequentially into one
/// accumulator. Errors carry the failing stream index.
pub fn run_chunk(
    model: &MonitoredModel,
    rho0: &QuantumState,
    cfg: &IntegratorConfig,
    base_seed: u64,
    range: Range<u64>,
    obs: &Observation,
) -> Result<EnsembleAccumulator> {
    let obs = obs.clone().with_states();
    let mut acc = EnsembleAccumulator::new();
    for idx in range {
        let stream = NoiseStream::new(base_seed, idx, cfg.dt);
        let traj = propagate(model, rho0, cfg, stream, &obs).map_err(|e| Error::Trajectory {
            stream_index: idx,
            source: Box::new(e),
        })?;
        acc.add(&traj)?;
    }
    Ok(acc)
}

/// Ensemble average over stream indices `0..n_traj` of seed `base_seed`,
/// folded chunk by chunk in stream-index order.
pub fn ensemble_average(
    model: &MonitoredModel,
    rho0: &QuantumState,
    cfg: &IntegratorConfig,
    n_traj: u64,
    base_seed: u64,
    obs: &Observation,
) -> Result<EnsembleResult> {
    if n_traj == 0 {
        return Err(Error::Config("n_traj must be at least 1".into()));
    }
    let mut acc = EnsembleAccumulator::new();
    for range in ensemble_chunks(n_traj) {
        acc.merge(run_chunk(model, rho0, cfg, base_seed, range, obs)?)?;
    }
    acc.finish()
}
