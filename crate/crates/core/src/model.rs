//! Monitored open-system models: a Hamiltonian plus coupling channels, each
//! with its own detection scheme, and an optional feedback law.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::feedback::{FeedbackKind, FeedbackLaw};
use crate::operator::{OperatorMatrix, SqrtLibm, I};
use crate::state::Tolerances;

/// How the output field of a channel is observed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Detection {
    /// Homodyne detection at quadrature angle `theta` with efficiency `eta`.
    Homodyne { theta: f64, eta: f64 },
    /// Direct photodetection (jump unraveling).
    Photodetect,
    /// Not observed; contributes `D[L]` only.
    Unmonitored,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub l: OperatorMatrix,
    pub detection: Detection,
}

impl Channel {
    pub fn homodyne(l: OperatorMatrix, theta: f64, eta: f64) -> Self {
        Self {
            l,
            detection: Detection::Homodyne { theta, eta },
        }
    }

    pub fn photodetect(l: OperatorMatrix) -> Self {
        Self {
            l,
            detection: Detection::Photodetect,
        }
    }

    pub fn unmonitored(l: OperatorMatrix) -> Self {
        Self {
            l,
            detection: Detection::Unmonitored,
        }
    }

    /// Homodyne efficiency, zero for other detection kinds.
    pub fn eta(&self) -> f64 {
        match self.detection {
            Detection::Homodyne { eta, .. } => eta,
            _ => 0.0,
        }
    }

    /// `L e^{iθ}` for a homodyne channel.
    pub fn rotated(&self) -> Option<OperatorMatrix> {
        match self.detection {
            Detection::Homodyne { theta, .. } => {
                Some(self.l.scale_complex(Complex64::new(libm::cos(theta), libm::sin(theta))))
            }
            _ => None,
        }
    }

    fn validate(&self, index: usize, dim: usize) -> Result<()> {
        self.l.check_dim(dim)?;
        if let Detection::Homodyne { theta, eta } = self.detection {
            if !theta.is_finite() {
                return Err(Error::Model(format!("channel {index}: theta must be finite")));
            }
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::Model(format!("channel {index}: eta = {eta} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Hamiltonian, channels and optional feedback.
///
/// Homodyne channels are numbered in the order they appear in `channels`;
/// signal vectors and record rows use that order.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitoredModel {
    hamiltonian: OperatorMatrix,
    channels: Vec<Channel>,
    feedback: Option<FeedbackLaw>,
}

impl MonitoredModel {
    pub fn new(hamiltonian: OperatorMatrix, channels: Vec<Channel>) -> Result<Self> {
        if !hamiltonian.is_hermitian(Tolerances::default().hermiticity) {
            return Err(Error::Model("Hamiltonian is not Hermitian".into()));
        }
        let dim = hamiltonian.dim();
        for (i, ch) in channels.iter().enumerate() {
            ch.validate(i, dim)?;
        }
        Ok(Self {
            hamiltonian,
            channels,
            feedback: None,
        })
    }

    /// Attaches a feedback law after checking it against the channels.
    pub fn with_feedback(mut self, law: FeedbackLaw) -> Result<Self> {
        let dim = self.dim();
        for (ch, g) in law.gains() {
            let channel = self.channels.get(*ch).ok_or(Error::Index {
                index: *ch,
                len: self.channels.len(),
            })?;
            g.check_dim(dim)?;
            match (law.kind(), channel.detection) {
                (FeedbackKind::HamiltonianModulation, Detection::Homodyne { .. }) => {}
                (FeedbackKind::JumpUnitary, Detection::Photodetect) => {}
                (kind, det) => {
                    return Err(Error::Model(format!(
                        "channel {ch}: {kind:?} feedback does not apply to {det:?} detection"
                    )))
                }
            }
        }
        self.feedback = Some(law);
        Ok(self)
    }

    pub fn without_feedback(&self) -> Self {
        Self {
            feedback: None,
            ..self.clone()
        }
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn hamiltonian(&self) -> &OperatorMatrix {
        &self.hamiltonian
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn feedback(&self) -> Option<&FeedbackLaw> {
        self.feedback.as_ref()
    }

    /// Indices (into `channels`) of the homodyne channels.
    pub fn homodyne_channels(&self) -> Vec<usize> {
        self.indices(|d| matches!(d, Detection::Homodyne { .. }))
    }

    /// Indices (into `channels`) of the photodetected channels.
    pub fn photodetect_channels(&self) -> Vec<usize> {
        self.indices(|d| matches!(d, Detection::Photodetect))
    }

    fn indices(&self, pred: impl Fn(&Detection) -> bool) -> Vec<usize> {
        self.channels
            .iter()
            .enumerate()
            .filter(|(_, c)| pred(&c.detection))
            .map(|(i, _)| i)
            .collect()
    }

    /// Sum of the Hamiltonian-modulation gains attached to channel `index`.
    pub fn feedback_gain(&self, index: usize) -> Option<OperatorMatrix> {
        let law = self.feedback.as_ref()?;
        if law.kind() != FeedbackKind::HamiltonianModulation {
            return None;
        }
        let mut acc: Option<OperatorMatrix> = None;
        for (ch, g) in law.gains() {
            if *ch == index {
                acc = Some(match acc {
                    Some(a) => a + g,
                    None => g.clone(),
                });
            }
        }
        acc
    }

    /// Correction unitary applied after a jump on channel `index`.
    pub fn jump_correction(&self, index: usize) -> Option<&OperatorMatrix> {
        let law = self.feedback.as_ref()?;
        if law.kind() != FeedbackKind::JumpUnitary {
            return None;
        }
        law.gains().iter().find(|(ch, _)| *ch == index).map(|(_, u)| u)
    }

    /// Largest rate in the model: max of `‖H‖` and every `‖L†L‖`.
    pub fn max_rate(&self) -> f64 {
        self.channels
            .iter()
            .map(|c| (c.l.adjoint() * &c.l).hermitian_spectral_radius())
            .fold(self.hamiltonian.hermitian_spectral_radius(), f64::max)
    }

    /// Hamiltonian and Lindblad operators of the ensemble-averaged dynamics.
    ///
    /// A homodyne channel `c = Le^{iθ}` at efficiency `η` with gain `G`
    /// averages to `(1−η)D[c] + D[√η c − iG]` plus the Hamiltonian shift
    /// `√η (c†G + Gc)/2`. A photodetected channel with correction `U`
    /// averages to `D[UL]`. Zero operators are dropped.
    pub fn unconditional_lindblad(&self) -> (OperatorMatrix, Vec<OperatorMatrix>) {
        let mut h = self.hamiltonian.clone();
        let mut ls = Vec::new();
        for (i, ch) in self.channels.iter().enumerate() {
            match ch.detection {
                Detection::Unmonitored => ls.push(ch.l.clone()),
                Detection::Photodetect => match self.jump_correction(i) {
                    Some(u) => ls.push(u * &ch.l),
                    None => ls.push(ch.l.clone()),
                },
                Detection::Homodyne { eta, .. } => {
                    let c = ch.rotated().unwrap_or_else(|| ch.l.clone());
                    match self.feedback_gain(i) {
                        None => ls.push(ch.l.clone()),
                        Some(g) => {
                            if eta < 1.0 {
                                ls.push(c.scale((1.0 - eta).sqrt_libm()));
                            }
                            let se = eta.sqrt_libm();
                            ls.push(c.scale(se) - g.scale_complex(I));
                            let shift = (c.adjoint() * &g + &g * &c).scale(0.5 * se);
                            h += &shift.hermitian_part();
                        }
                    }
                }
            }
        }
        ls.retain(|l| l.max_abs() > 0.0);
        (h, ls)
    }
}
