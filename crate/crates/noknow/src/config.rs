//! Flat key-value run configuration.
//!
//! A configuration is one JSON object. Every key is optional; absent keys
//! take documented defaults, which are echoed (together with the given
//! values) in the metadata header of every output file. Keys that are unknown,
//! or that do not apply to the selected experiment or model, are rejected.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::PathBuf;

use noknow_core::models::{mismatched_estimate, reference_state, MAX_CHAIN};
use noknow_core::{
    dephasing_qubit, general_l_model, jump_correction, sigma_minus, sigma_x, sigma_y, sigma_z, Channel,
    DephasingQubitParams, IntegratorConfig, MonitoredModel, OperatorMatrix, QuantumState, Scheme,
};
use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Experiment {
    Trajectory,
    Ensemble,
    FilterDivergence,
    FeedbackCancel,
    Jump,
    DqcScan,
    Convergence,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Trajectory,
        Experiment::Ensemble,
        Experiment::FilterDivergence,
        Experiment::FeedbackCancel,
        Experiment::Jump,
        Experiment::DqcScan,
        Experiment::Convergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Trajectory => "trajectory",
            Experiment::Ensemble => "ensemble",
            Experiment::FilterDivergence => "filter-divergence",
            Experiment::FeedbackCancel => "feedback-cancel",
            Experiment::Jump => "jump",
            Experiment::DqcScan => "dqc-scan",
            Experiment::Convergence => "convergence",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }

    fn is_qubit(self) -> bool {
        !matches!(self, Experiment::Jump | Experiment::DqcScan)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    JsonLines,
}

impl OutputFormat {
    pub fn name(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::JsonLines => "json-lines",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::JsonLines => "jsonl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// `H = Ωσ_x`, `L = √γ σ_z` homodyned at `(θ, η)`.
    DephasingQubit,
    /// `H = Ωσ_x`, `L = √γ σ_−` plus its reverse reservoir, both monitored
    /// through the beamsplitter pair at `θ = π/2`.
    GeneralL,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    SigmaX,
    SigmaY,
    SigmaZ,
}

impl Observable {
    pub fn name(self) -> &'static str {
        match self {
            Observable::SigmaX => "sigma_x",
            Observable::SigmaY => "sigma_y",
            Observable::SigmaZ => "sigma_z",
        }
    }

    pub fn operator(self) -> OperatorMatrix {
        match self {
            Observable::SigmaX => sigma_x(),
            Observable::SigmaY => sigma_y(),
            Observable::SigmaZ => sigma_z(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpOperator {
    SigmaX,
    SigmaY,
    SigmaZ,
    SigmaMinus,
}

impl JumpOperator {
    pub fn name(self) -> &'static str {
        match self {
            JumpOperator::SigmaX => "sigma_x",
            JumpOperator::SigmaY => "sigma_y",
            JumpOperator::SigmaZ => "sigma_z",
            JumpOperator::SigmaMinus => "sigma_minus",
        }
    }

    pub fn operator(self) -> OperatorMatrix {
        match self {
            JumpOperator::SigmaX => sigma_x(),
            JumpOperator::SigmaY => sigma_y(),
            JumpOperator::SigmaZ => sigma_z(),
            JumpOperator::SigmaMinus => sigma_minus(),
        }
    }
}

/// Qubit model settings shared by the diffusive experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitSettings {
    pub model: ModelKind,
    pub omega: f64,
    pub gamma: f64,
    pub theta: f64,
    pub eta: f64,
    pub feedback: bool,
    pub rho0: [f64; 3],
    pub pi0: [f64; 3],
    pub observables: Vec<Observable>,
}

impl QubitSettings {
    pub fn build(&self) -> Result<MonitoredModel, noknow_core::Error> {
        let model = match self.model {
            ModelKind::DephasingQubit => dephasing_qubit(&DephasingQubitParams {
                omega: self.omega,
                gamma: self.gamma,
                theta: self.theta,
                eta: self.eta,
            })?,
            ModelKind::GeneralL => general_l_model(
                &sigma_x().scale(self.omega),
                &sigma_minus().scale(self.gamma.sqrt()),
                self.eta,
            )?,
        };
        if self.feedback {
            model.with_no_knowledge_feedback()
        } else {
            Ok(model)
        }
    }

    pub fn initial_state(&self) -> QuantumState {
        bloch_state(self.rho0)
    }

    pub fn estimate_state(&self) -> QuantumState {
        bloch_state(self.pi0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpSettings {
    pub omega: f64,
    pub gamma: f64,
    pub jump_operator: JumpOperator,
    pub correct_jumps: bool,
    pub rho0: [f64; 3],
}

impl JumpSettings {
    /// `H = Ωσ_x` with one photodetected channel `√γ·op`; the correction
    /// `op†` is attached after every detection when requested.
    pub fn build(&self) -> Result<MonitoredModel, noknow_core::Error> {
        let op = self.jump_operator.operator();
        let model = MonitoredModel::new(
            sigma_x().scale(self.omega),
            vec![Channel::photodetect(op.scale(self.gamma.sqrt()))],
        )?;
        if self.correct_jumps {
            model.with_feedback(jump_correction(&op)?)
        } else {
            Ok(model)
        }
    }

    pub fn initial_state(&self) -> QuantumState {
        bloch_state(self.rho0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSettings {
    pub n_min: usize,
    pub n_max: usize,
    pub gamma_over_alpha: f64,
    pub etas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Settings {
    Qubit(QubitSettings),
    Jump(JumpSettings),
    Scan(ScanSettings),
}

/// Fully validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub n_traj: u64,
    /// Absent for the steady-state scan.
    pub integrator: Option<IntegratorConfig>,
    /// Number of step halvings in the convergence study.
    pub levels: usize,
    pub format: OutputFormat,
    pub out_dir: Option<PathBuf>,
    pub settings: Settings,
}

impl RunConfig {
    pub fn qubit(&self) -> Option<&QubitSettings> {
        match &self.settings {
            Settings::Qubit(q) => Some(q),
            _ => None,
        }
    }

    /// Every parameter the run depends on, defaults included, keyed by the
    /// configuration key. The output location is not part of it.
    pub fn resolved(&self) -> Map<String, Value> {
        let mut m: BTreeMap<&str, Value> = BTreeMap::new();
        m.insert("experiment", self.experiment.name().into());
        m.insert("seed", self.seed.into());
        m.insert("format", self.format.name().into());
        if uses_n_traj(self.experiment) {
            m.insert("n_traj", self.n_traj.into());
        }
        if let Some(ic) = &self.integrator {
            m.insert("dt", ic.dt.into());
            m.insert("t_final", ic.t_final.into());
            m.insert("scheme", scheme_name(ic.scheme).into());
            m.insert("record_stride", ic.record_stride.into());
        }
        if self.experiment == Experiment::Convergence {
            m.insert("levels", self.levels.into());
        }
        match &self.settings {
            Settings::Qubit(q) => {
                m.insert(
                    "model",
                    match q.model {
                        ModelKind::DephasingQubit => "dephasing-qubit",
                        ModelKind::GeneralL => "general-l",
                    }
                    .into(),
                );
                m.insert("omega", q.omega.into());
                m.insert("gamma", q.gamma.into());
                if q.model == ModelKind::DephasingQubit {
                    m.insert("theta", q.theta.into());
                }
                m.insert("eta", q.eta.into());
                if self.experiment != Experiment::FeedbackCancel {
                    m.insert("feedback", q.feedback.into());
                }
                m.insert("rho0", q.rho0.to_vec().into());
                if uses_pi0(self.experiment) {
                    m.insert("pi0", q.pi0.to_vec().into());
                }
                if uses_observables(self.experiment) {
                    let names: Vec<Value> = q.observables.iter().map(|o| o.name().into()).collect();
                    m.insert("observables", names.into());
                }
            }
            Settings::Jump(j) => {
                m.insert("omega", j.omega.into());
                m.insert("gamma", j.gamma.into());
                m.insert("jump_operator", j.jump_operator.name().into());
                m.insert("correct_jumps", j.correct_jumps.into());
                m.insert("rho0", j.rho0.to_vec().into());
            }
            Settings::Scan(s) => {
                m.insert("n_min", s.n_min.into());
                m.insert("n_max", s.n_max.into());
                m.insert("gamma_over_alpha", s.gamma_over_alpha.into());
                m.insert("etas", s.etas.clone().into());
            }
        }
        m.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

pub fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::Exponential => "exponential",
        Scheme::StratonovichHeun => "stratonovich-heun",
        Scheme::ItoEuler => "ito-euler",
    }
}

fn bloch_state(b: [f64; 3]) -> QuantumState {
    QuantumState::from_bloch(b[0], b[1], b[2])
}

fn bloch_of(s: &QuantumState) -> [f64; 3] {
    s.bloch().expect("qubit state")
}

fn uses_n_traj(e: Experiment) -> bool {
    matches!(
        e,
        Experiment::Ensemble | Experiment::FilterDivergence | Experiment::Jump | Experiment::Convergence
    )
}

fn uses_pi0(e: Experiment) -> bool {
    matches!(e, Experiment::FilterDivergence | Experiment::FeedbackCancel)
}

fn uses_observables(e: Experiment) -> bool {
    matches!(
        e,
        Experiment::Trajectory | Experiment::Ensemble | Experiment::FilterDivergence | Experiment::FeedbackCancel
    )
}

/// Experiments a key applies to.
fn key_applies(key: &str, e: Experiment) -> Option<bool> {
    let qubit = e.is_qubit();
    Some(match key {
        "experiment" | "seed" | "format" | "out_dir" => true,
        "dt" | "t_final" | "scheme" | "record_stride" => e != Experiment::DqcScan,
        "n_traj" => uses_n_traj(e),
        "levels" => e == Experiment::Convergence,
        "model" | "theta" | "eta" => qubit,
        "feedback" => qubit && e != Experiment::FeedbackCancel,
        "omega" | "gamma" | "rho0" => qubit || e == Experiment::Jump,
        "pi0" => uses_pi0(e),
        "observables" => uses_observables(e),
        "jump_operator" | "correct_jumps" => e == Experiment::Jump,
        "n_min" | "n_max" | "gamma_over_alpha" | "etas" => e == Experiment::DqcScan,
        _ => return None,
    })
}

/// 1-based line of the first occurrence of `"key"` in the source text.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&quoted)).map(|i| i + 1)
}

/// Collects typed values and violations while walking the document.
struct Reader<'a> {
    text: &'a str,
    map: &'a Map<String, Value>,
    violations: Vec<String>,
}

impl<'a> Reader<'a> {
    fn at(&self, key: &str) -> String {
        match line_of(self.text, key) {
            Some(l) => format!("line {l}: `{key}`"),
            None => format!("`{key}`"),
        }
    }

    fn fail(&mut self, key: &str, msg: impl fmt::Display) {
        let at = self.at(key);
        self.violations.push(format!("{at}: {msg}"));
    }

    fn get<T>(&mut self, key: &str, what: &str, conv: impl Fn(&Value) -> Option<T>) -> Option<T> {
        let v = self.map.get(key)?;
        match conv(v) {
            Some(t) => Some(t),
            None => {
                self.fail(key, format!("expected {what}, found {v}"));
                None
            }
        }
    }

    fn number(&mut self, key: &str) -> Option<f64> {
        self.get(key, "a finite number", |v| v.as_f64().filter(|x| x.is_finite()))
    }

    fn count(&mut self, key: &str) -> Option<u64> {
        self.get(key, "a non-negative integer", Value::as_u64)
    }

    fn flag(&mut self, key: &str) -> Option<bool> {
        self.get(key, "true or false", Value::as_bool)
    }

    fn text(&mut self, key: &str) -> Option<String> {
        self.get(key, "a string", |v| v.as_str().map(str::to_string))
    }

    fn choice<T: Copy>(&mut self, key: &str, options: &[(&str, T)]) -> Option<T> {
        let s = self.text(key)?;
        match options.iter().find(|(n, _)| *n == s) {
            Some((_, t)) => Some(*t),
            None => {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                self.fail(key, format!("`{s}` is not one of {}", names.join(", ")));
                None
            }
        }
    }

    fn bloch(&mut self, key: &str) -> Option<[f64; 3]> {
        let b = self.get(key, "a Bloch vector [x, y, z]", |v| {
            let a = v.as_array()?;
            if a.len() != 3 {
                return None;
            }
            let mut out = [0.0; 3];
            for (o, x) in out.iter_mut().zip(a) {
                *o = x.as_f64().filter(|x| x.is_finite())?;
            }
            Some(out)
        })?;
        let r2: f64 = b.iter().map(|x| x * x).sum();
        if r2 > 1.0 + 1e-12 {
            self.fail(key, format!("Bloch vector length {} exceeds 1", r2.sqrt()));
            return None;
        }
        Some(b)
    }

    fn numbers(&mut self, key: &str) -> Option<Vec<f64>> {
        self.get(key, "an array of numbers", |v| {
            v.as_array()?
                .iter()
                .map(|x| x.as_f64().filter(|x| x.is_finite()))
                .collect()
        })
    }

    fn names(&mut self, key: &str) -> Option<Vec<String>> {
        self.get(key, "an array of strings", |v| {
            v.as_array()?.iter().map(|x| x.as_str().map(str::to_string)).collect()
        })
    }
}

/// Parses a configuration whose `experiment` key selects the experiment.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    parse_config_for(text, None)
}

/// Parses a configuration for `experiment` (given on the command line). A
/// config-file `experiment` key, if present, must agree with it.
pub fn parse_config_for(text: &str, experiment: Option<Experiment>) -> Result<RunConfig, CliError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| CliError::Parse {
        line: e.line(),
        key: None,
        message: e.to_string(),
    })?;
    let Value::Object(map) = doc else {
        return Err(CliError::Parse {
            line: 1,
            key: None,
            message: "configuration must be a JSON object".into(),
        });
    };
    let mut r = Reader {
        text,
        map: &map,
        violations: Vec::new(),
    };

    let named = match r.text("experiment") {
        Some(s) => match Experiment::from_name(&s) {
            Some(e) => Some(e),
            None => {
                let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
                r.fail("experiment", format!("`{s}` is not one of {}", names.join(", ")));
                None
            }
        },
        None => None,
    };
    let experiment = match (experiment, named) {
        (Some(cli), Some(file)) if cli != file => {
            r.fail("experiment", format!("config names `{file}` but `{cli}` was requested"));
            cli
        }
        (Some(e), _) | (None, Some(e)) => e,
        (None, None) => {
            r.violations.push("no experiment given".into());
            return Err(CliError::Validation(r.violations));
        }
    };

    for key in map.keys() {
        match key_applies(key, experiment) {
            None => r.fail(key, "unknown key"),
            Some(false) => r.fail(key, format!("does not apply to experiment {experiment}")),
            Some(true) => {}
        }
    }

    let seed = r.count("seed").unwrap_or(0);
    let format = r
        .choice(
            "format",
            &[("csv", OutputFormat::Csv), ("json-lines", OutputFormat::JsonLines)],
        )
        .unwrap_or(OutputFormat::Csv);
    let out_dir = r.text("out_dir").map(PathBuf::from);
    let default_traj = match experiment {
        Experiment::Ensemble | Experiment::Jump => 1000,
        Experiment::Convergence => 20,
        _ => 1,
    };
    let n_traj = r.count("n_traj").unwrap_or(default_traj);
    if uses_n_traj(experiment) && n_traj == 0 {
        r.fail("n_traj", "must be at least 1");
    }
    let levels = r.count("levels").unwrap_or(3) as usize;
    if experiment == Experiment::Convergence && !(1..=8).contains(&levels) {
        r.fail("levels", "must lie in [1, 8]");
    }

    let settings = match experiment {
        Experiment::DqcScan => Settings::Scan(read_scan(&mut r)),
        Experiment::Jump => Settings::Jump(read_jump(&mut r)),
        _ => Settings::Qubit(read_qubit(&mut r, experiment)),
    };

    let integrator = if experiment == Experiment::DqcScan {
        None
    } else {
        read_integrator(&mut r, experiment, &settings)
    };

    if !r.violations.is_empty() {
        return Err(CliError::Validation(r.violations));
    }
    Ok(RunConfig {
        experiment,
        seed,
        n_traj,
        integrator,
        levels,
        format,
        out_dir,
        settings,
    })
}

fn read_qubit(r: &mut Reader<'_>, experiment: Experiment) -> QubitSettings {
    let model = r
        .choice(
            "model",
            &[
                ("dephasing-qubit", ModelKind::DephasingQubit),
                ("general-l", ModelKind::GeneralL),
            ],
        )
        .unwrap_or(ModelKind::DephasingQubit);
    if model == ModelKind::GeneralL && r.map.contains_key("theta") {
        r.fail(
            "theta",
            "does not apply to model general-l (the beamsplitter pair is read at pi/2)",
        );
    }
    let omega = r.number("omega").unwrap_or(1.0);
    let gamma = r.number("gamma").unwrap_or(1.0);
    if !(gamma > 0.0) {
        r.fail("gamma", format!("must be positive, got {gamma}"));
    }
    let theta = r.number("theta").unwrap_or(FRAC_PI_2);
    let eta = r.number("eta").unwrap_or(1.0);
    if !(0.0..=1.0).contains(&eta) {
        r.fail("eta", format!("{eta} outside the bound [0, 1]"));
    }
    let feedback = experiment == Experiment::FeedbackCancel || r.flag("feedback").unwrap_or(false);
    let rho0 = r.bloch("rho0").unwrap_or_else(|| bloch_of(&reference_state()));
    let pi0 = r.bloch("pi0").unwrap_or_else(|| bloch_of(&mismatched_estimate()));
    let options = [
        ("sigma_x", Observable::SigmaX),
        ("sigma_y", Observable::SigmaY),
        ("sigma_z", Observable::SigmaZ),
    ];
    let observables = match r.names("observables") {
        Some(names) => {
            let mut out = Vec::new();
            for n in names {
                match options.iter().find(|(o, _)| *o == n) {
                    Some((_, o)) => out.push(*o),
                    None => r.fail("observables", format!("`{n}` is not one of sigma_x, sigma_y, sigma_z")),
                }
            }
            out
        }
        None => options.iter().map(|(_, o)| *o).collect(),
    };
    let q = QubitSettings {
        model,
        omega,
        gamma,
        theta,
        eta,
        feedback,
        rho0,
        pi0,
        observables,
    };
    if gamma > 0.0 && (0.0..=1.0).contains(&eta) {
        if let Err(e) = q.build() {
            let key = if feedback { "feedback" } else { "model" };
            r.fail(key, format!("model rejected: {e}"));
        }
    }
    q
}

fn read_jump(r: &mut Reader<'_>) -> JumpSettings {
    let omega = r.number("omega").unwrap_or(0.0);
    let gamma = r.number("gamma").unwrap_or(1.0);
    if !(gamma > 0.0) {
        r.fail("gamma", format!("must be positive, got {gamma}"));
    }
    let jump_operator = r
        .choice(
            "jump_operator",
            &[
                ("sigma_x", JumpOperator::SigmaX),
                ("sigma_y", JumpOperator::SigmaY),
                ("sigma_z", JumpOperator::SigmaZ),
                ("sigma_minus", JumpOperator::SigmaMinus),
            ],
        )
        .unwrap_or(JumpOperator::SigmaX);
    let correct_jumps = r.flag("correct_jumps").unwrap_or(true);
    if correct_jumps && jump_operator == JumpOperator::SigmaMinus {
        r.fail("correct_jumps", "sigma_minus is not unitary and cannot be undone");
    }
    let rho0 = r.bloch("rho0").unwrap_or_else(|| bloch_of(&reference_state()));
    JumpSettings {
        omega,
        gamma,
        jump_operator,
        correct_jumps,
        rho0,
    }
}

fn read_scan(r: &mut Reader<'_>) -> ScanSettings {
    let n_min = r.count("n_min").unwrap_or(2) as usize;
    let n_max = r.count("n_max").unwrap_or(6) as usize;
    if n_min < 2 {
        r.fail("n_min", "chains need at least 2 qubits");
    }
    if n_max > MAX_CHAIN {
        r.fail("n_max", format!("chains are limited to {MAX_CHAIN} qubits"));
    }
    if n_min > n_max {
        r.fail("n_max", format!("n_max = {n_max} is below n_min = {n_min}"));
    }
    let gamma_over_alpha = r.number("gamma_over_alpha").unwrap_or(10.0);
    if gamma_over_alpha < 0.0 {
        r.fail("gamma_over_alpha", "must be non-negative");
    }
    let etas = r.numbers("etas").unwrap_or_else(|| vec![0.9, 0.99, 1.0]);
    for &e in &etas {
        if !(0.0..=1.0).contains(&e) {
            r.fail("etas", format!("{e} outside the bound [0, 1]"));
        }
    }
    ScanSettings {
        n_min,
        n_max,
        gamma_over_alpha,
        etas,
    }
}

fn read_integrator(r: &mut Reader<'_>, experiment: Experiment, settings: &Settings) -> Option<IntegratorConfig> {
    let (rate, gamma) = match settings {
        Settings::Qubit(q) => (q.omega.abs().max(q.gamma), q.gamma),
        Settings::Jump(j) => (j.omega.abs().max(j.gamma), j.gamma),
        Settings::Scan(_) => return None,
    };
    let unit = if experiment == Experiment::Convergence {
        1e-2
    } else {
        1e-3
    };
    let dt = r.number("dt").unwrap_or(unit / rate);
    let t_final = r.number("t_final").unwrap_or(5.0 / gamma);
    let scheme = r
        .choice(
            "scheme",
            &[
                ("exponential", Scheme::Exponential),
                ("stratonovich-heun", Scheme::StratonovichHeun),
                ("ito-euler", Scheme::ItoEuler),
            ],
        )
        .unwrap_or(Scheme::Exponential);
    let stride = r.count("record_stride").unwrap_or(10) as usize;
    match IntegratorConfig::new(dt, t_final, scheme, stride) {
        Ok(c) => Some(c),
        Err(e) => {
            let key = if stride == 0 { "record_stride" } else { "dt" };
            r.fail(key, e);
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn violations(text: &str) -> Vec<String> {
        match parse_config(text) {
            Err(CliError::Validation(v)) => v,
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_qubit_config_takes_defaults() {
        let c = parse_config(r#"{"experiment": "trajectory", "gamma": 2.0}"#).unwrap();
        let ic = c.integrator.unwrap();
        assert_eq!(ic.dt, 1e-3 / 2.0);
        assert_eq!(ic.t_final, 2.5);
        assert_eq!(c.qubit().unwrap().eta, 1.0);
        assert_eq!(c.seed, 0);
        assert_eq!(c.format, OutputFormat::Csv);
    }

    #[test]
    fn eta_bound_is_named() {
        let v = violations(r#"{"experiment": "trajectory", "eta": 1.5}"#);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("[0, 1]") && v[0].contains("eta"), "{v:?}");
    }

    #[test]
    fn every_violation_is_listed() {
        let text = "{\n  \"experiment\": \"ensemble\",\n  \"eta\": -1,\n  \"etaa\": 1,\n  \"n_min\": 3,\n  \"scheme\": \"rk4\"\n}";
        let v = violations(text);
        assert_eq!(v.len(), 4, "{v:?}");
        assert!(v.iter().any(|m| m.starts_with("line 4: `etaa`: unknown key")));
        assert!(v.iter().any(|m| m.contains("n_min") && m.contains("does not apply")));
        assert!(v.iter().any(|m| m.contains("rk4")));
    }

    #[test]
    fn syntax_errors_carry_the_line() {
        match parse_config("{\n \"seed\": 1,\n \"eta\" 0.5\n}") {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn default_cluster_scan() {
        let c = parse_config(
            r#"{"experiment": "dqc-scan", "n_min": 2, "n_max": 6, "gamma_over_alpha": 10, "etas": [0.9, 0.99, 1]}"#,
        )
        .unwrap();
        assert_eq!(c.experiment, Experiment::DqcScan);
        assert!(c.integrator.is_none());
        assert_eq!(
            c.settings,
            Settings::Scan(ScanSettings {
                n_min: 2,
                n_max: 6,
                gamma_over_alpha: 10.0,
                etas: vec![0.9, 0.99, 1.0],
            })
        );
    }

    #[test]
    fn feedback_needs_an_uninformative_quadrature() {
        let v = violations(r#"{"experiment": "trajectory", "theta": 0.3, "feedback": true}"#);
        assert!(v[0].contains("feedback"), "{v:?}");
    }

    #[test]
    fn command_line_experiment_must_match() {
        let r = parse_config_for(r#"{"experiment": "jump"}"#, Some(Experiment::Ensemble));
        assert!(matches!(r, Err(CliError::Validation(_))));
        assert!(parse_config_for("{}", Some(Experiment::Jump)).is_ok());
        assert!(matches!(parse_config("{}"), Err(CliError::Validation(_))));
    }

    #[test]
    fn resolved_config_echoes_defaults() {
        let c = parse_config(r#"{"experiment": "feedback-cancel"}"#).unwrap();
        let m = c.resolved();
        assert_eq!(m["theta"], Value::from(FRAC_PI_2));
        assert_eq!(m["eta"], Value::from(1.0));
        assert!(!m.contains_key("feedback"));
        let keys: Vec<&String> = m.keys().collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }
}
