//! Stochastic integration over a flat real state vector.
//!
//! Systems are written as `dx = a(x) dt + Σ_k b_k(x) dW_k`, where `a` and
//! `b_k` return the already-applied vectors `A(x)x` and `B_k(x)x`. Complex
//! density matrices enter as interleaved `(re, im)` pairs.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Discretization used by the trajectory propagators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Euler-Maruyama on the Ito form.
    ItoEuler,
    /// Heun predictor-corrector on the Stratonovich form.
    StratonovichHeun,
    /// Exact exponential of the linear generator with the step's signal held
    /// fixed (piecewise-constant record).
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    pub record_stride: usize,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_final: f64, scheme: Scheme, record_stride: usize) -> Result<Self> {
        let cfg = Self {
            dt,
            t_final,
            scheme,
            record_stride,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// `dt = 1e-3 / max_rate`, exponential scheme, every step recorded.
    pub fn for_rate(max_rate: f64, t_final: f64) -> Result<Self> {
        Self::new(1e-3 / max_rate, t_final, Scheme::Exponential, 1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::Config(format!("t_final must be positive, got {}", self.t_final)));
        }
        if self.dt > self.t_final {
            return Err(Error::Config("dt exceeds t_final".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::Config("record_stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        libm::round(self.t_final / self.dt) as usize
    }

    pub fn with_dt(&self, dt: f64) -> Self {
        Self { dt, ..*self }
    }

    pub fn with_scheme(&self, scheme: Scheme) -> Self {
        Self { scheme, ..*self }
    }
}

/// A (possibly nonlinear) SDE with `noise_count` scalar driving noises.
pub trait StochasticSystem {
    fn noise_count(&self) -> usize;
    /// `A(x)x`.
    fn drift(&self, x: &[f64]) -> Vec<f64>;
    /// `B_k(x)x`.
    fn diffusion(&self, k: usize, x: &[f64]) -> Vec<f64>;
}

/// Single-noise system assembled from two closures.
pub struct FnSystem<A, B> {
    pub drift: A,
    pub diffusion: B,
}

impl<A, B> StochasticSystem for FnSystem<A, B>
where
    A: Fn(&[f64]) -> Vec<f64>,
    B: Fn(&[f64]) -> Vec<f64>,
{
    fn noise_count(&self) -> usize {
        1
    }

    fn drift(&self, x: &[f64]) -> Vec<f64> {
        (self.drift)(x)
    }

    fn diffusion(&self, _k: usize, x: &[f64]) -> Vec<f64> {
        (self.diffusion)(x)
    }
}

fn check_noise<S: StochasticSystem + ?Sized>(sys: &S, dws: &[f64]) -> Result<()> {
    if dws.len() != sys.noise_count() {
        return Err(Error::Dimension {
            expected: sys.noise_count(),
            found: dws.len(),
        });
    }
    Ok(())
}

fn finite(x: Vec<f64>) -> Result<Vec<f64>> {
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite component {i} after step")));
    }
    Ok(x)
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Euler-Maruyama: `x + a(x) dt + Σ_k b_k(x) dW_k`.
pub fn ito_step<S: StochasticSystem + ?Sized>(sys: &S, x: &[f64], dws: &[f64], dt: f64) -> Result<Vec<f64>> {
    check_noise(sys, dws)?;
    let mut out = x.to_vec();
    axpy(&mut out, dt, &sys.drift(x));
    for (k, &dw) in dws.iter().enumerate() {
        axpy(&mut out, dw, &sys.diffusion(k, x));
    }
    finite(out)
}

/// Heun predictor-corrector, consistent with the Stratonovich interpretation.
pub fn stratonovich_step<S: StochasticSystem + ?Sized>(sys: &S, x: &[f64], dws: &[f64], dt: f64) -> Result<Vec<f64>> {
    check_noise(sys, dws)?;
    let a0 = sys.drift(x);
    let b0: Vec<Vec<f64>> = (0..dws.len()).map(|k| sys.diffusion(k, x)).collect();
    let mut pred = x.to_vec();
    axpy(&mut pred, dt, &a0);
    for (b, &dw) in b0.iter().zip(dws) {
        axpy(&mut pred, dw, b);
    }
    let a1 = sys.drift(&pred);
    let mut out = x.to_vec();
    axpy(&mut out, 0.5 * dt, &a0);
    axpy(&mut out, 0.5 * dt, &a1);
    for (k, (b, &dw)) in b0.iter().zip(dws).enumerate() {
        axpy(&mut out, 0.5 * dw, b);
        axpy(&mut out, 0.5 * dw, &sys.diffusion(k, &pred));
    }
    finite(out)
}

/// Drift correction `−½ Σ_k B_k(B_k x)` turning an Ito drift into the
/// Stratonovich drift of the same process (diffusion linear in the state).
pub fn strat_correction<S: StochasticSystem + ?Sized>(sys: &S, x: &[f64]) -> Vec<f64> {
    let mut out = alloc::vec![0.0; x.len()];
    for k in 0..sys.noise_count() {
        let once = sys.diffusion(k, x);
        axpy(&mut out, -0.5, &sys.diffusion(k, &once));
    }
    out
}
