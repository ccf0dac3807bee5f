//! Feedback-law builders.

use alloc::vec;
use alloc::vec::Vec;

use core::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{Channel, Detection};
use crate::operator::{OperatorMatrix, SqrtLibm, I};
use crate::state::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackKind {
    /// Hamiltonian increment `Σ_k G_k y_k` driven by the homodyne signals.
    HamiltonianModulation,
    /// Unitary applied right after a detected jump.
    JumpUnitary,
}

/// Per-channel feedback operators.
///
/// For [`FeedbackKind::HamiltonianModulation`] each entry is a Hermitian gain
/// `G`; for [`FeedbackKind::JumpUnitary`] it is the correction unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackLaw {
    gains: Vec<(usize, OperatorMatrix)>,
    kind: FeedbackKind,
}

impl FeedbackLaw {
    pub fn hamiltonian(gains: Vec<(usize, OperatorMatrix)>) -> Result<Self> {
        let tol = Tolerances::default().hermiticity;
        for (ch, g) in &gains {
            if !g.is_hermitian(tol) {
                return Err(Error::NonHermitianChannel {
                    channel: *ch,
                    deviation: g.hermiticity_defect(),
                });
            }
        }
        Ok(Self {
            gains,
            kind: FeedbackKind::HamiltonianModulation,
        })
    }

    pub fn jump_unitary(channel: usize, u_corr: OperatorMatrix) -> Result<Self> {
        if !u_corr.is_unitary(Tolerances::default().unitarity) {
            return Err(Error::NonUnitary(u_corr.unitarity_defect()));
        }
        Ok(Self {
            gains: vec![(channel, u_corr)],
            kind: FeedbackKind::JumpUnitary,
        })
    }

    pub fn gains(&self) -> &[(usize, OperatorMatrix)] {
        &self.gains
    }

    pub fn kind(&self) -> FeedbackKind {
        self.kind
    }

    /// Same law with every entry moved to channel `channel`.
    pub fn on_channel(mut self, channel: usize) -> Self {
        for g in &mut self.gains {
            g.0 = channel;
        }
        self
    }

    /// Same law with channel indices shifted by `offset`.
    pub fn offset(mut self, offset: usize) -> Self {
        for g in &mut self.gains {
            g.0 += offset;
        }
        self
    }

    /// Concatenation of two laws of the same kind.
    pub fn merge(mut self, other: FeedbackLaw) -> Result<Self> {
        if self.kind != other.kind {
            return Err(Error::Model("cannot merge feedback laws of different kinds".into()));
        }
        self.gains.extend(other.gains);
        Ok(self)
    }
}

/// `‖L − L†‖_F / ‖L‖_F`, zero for the zero operator.
pub fn relative_anti_hermitian(l: &OperatorMatrix) -> f64 {
    let n = l.frobenius_norm();
    if n == 0.0 {
        0.0
    } else {
        (l - &l.adjoint()).frobenius_norm() / n
    }
}

fn is_no_knowledge_angle(theta: f64) -> Option<f64> {
    // θ ≡ π/2 (mod π); returns sin θ = ±1
    let r = libm::remainder(theta - FRAC_PI_2, PI);
    if r.abs() <= 1e-12 {
        Some(libm::sin(theta).signum())
    } else {
        None
    }
}

/// Gains `G_k = √η_k sin θ_k · L_k` cancelling the measurement back-action of
/// no-knowledge homodyne channels.
///
/// Channel indices are positions in `channels`. Unmonitored channels get no
/// gain; any other channel must be homodyne at `θ ≡ π/2 (mod π)` with a
/// Hermitian coupling.
pub fn no_knowledge_feedback(channels: &[Channel]) -> Result<FeedbackLaw> {
    let tol = Tolerances::default().channel_hermiticity;
    let mut gains = Vec::new();
    for (i, ch) in channels.iter().enumerate() {
        match ch.detection {
            Detection::Unmonitored => continue,
            Detection::Photodetect => {
                return Err(Error::Angle {
                    channel: i,
                    theta: f64::NAN,
                })
            }
            Detection::Homodyne { theta, eta } => {
                let deviation = relative_anti_hermitian(&ch.l);
                if deviation > tol {
                    return Err(Error::NonHermitianChannel { channel: i, deviation });
                }
                let sign = is_no_knowledge_angle(theta).ok_or(Error::Angle { channel: i, theta })?;
                gains.push((i, ch.l.hermitian_part().scale(sign * eta.sqrt_libm())));
            }
        }
    }
    FeedbackLaw::hamiltonian(gains)
}

/// `L_+ = (L + L†)/√2` and `L_− = i(L − L†)/√2`, Hermitian by construction.
pub fn hermitian_split(l: &OperatorMatrix) -> (OperatorMatrix, OperatorMatrix) {
    let n = l.dim();
    let mut plus = Vec::with_capacity(n * n);
    let mut minus = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (l.get(i, j), l.get(j, i).conj());
            plus.push((a + b) * FRAC_1_SQRT_2);
            minus.push(I * (a - b) * FRAC_1_SQRT_2);
        }
    }
    // entries mirror exactly: (a + b) and i(a − b) are conjugate-symmetric
    // under i ↔ j in floating point
    (
        OperatorMatrix::from_rows(n, &plus).expect("square"),
        OperatorMatrix::from_rows(n, &minus).expect("square"),
    )
}

/// The two no-knowledge homodyne channels `(L_+, L_−)` at `θ = π/2` and
/// shared efficiency `eta` that monitor `D[L] + D[L†]`.
pub fn beamsplitter_network(l: &OperatorMatrix, eta: f64) -> Vec<Channel> {
    let (p, m) = hermitian_split(l);
    vec![
        Channel::homodyne(p, FRAC_PI_2, eta),
        Channel::homodyne(m, FRAC_PI_2, eta),
    ]
}

/// Jump-unitary law applying `U†` after each jump of channel 0; use
/// [`FeedbackLaw::on_channel`] to target another channel.
pub fn jump_correction(u: &OperatorMatrix) -> Result<FeedbackLaw> {
    if !u.is_unitary(Tolerances::default().unitarity) {
        return Err(Error::NonUnitary(u.unitarity_defect()));
    }
    FeedbackLaw::jump_unitary(0, u.adjoint())
}

/// Homodyne angle in `(−π/2, π/2]` whose signal mean vanishes for every
/// state, when `L† = L e^{iφ}` for some phase `φ`.
pub fn no_knowledge_angle(l: &OperatorMatrix) -> Result<f64> {
    let norm_sq = l.frobenius_norm() * l.frobenius_norm();
    if norm_sq == 0.0 {
        return Err(Error::Model("zero coupling operator".into()));
    }
    let ld = l.adjoint();
    // ⟨L, L†⟩ = Tr[L† L†] = e^{iφ} ‖L‖²
    let overlap: Complex64 = ld.trace_product(&ld);
    if overlap.norm() == 0.0 {
        return Err(Error::NoQuadrature);
    }
    let phase = overlap / overlap.norm();
    let defect = (&ld - &l.scale_complex(phase)).frobenius_norm() / norm_sq.sqrt_libm();
    if defect > Tolerances::default().channel_hermiticity {
        return Err(Error::NoQuadrature);
    }
    let phi = libm::atan2(phase.im, phase.re);
    let mut theta = (phi - PI) / 2.0;
    while theta <= -FRAC_PI_2 {
        theta += PI;
    }
    while theta > FRAC_PI_2 {
        theta -= PI;
    }
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{sigma_minus, sigma_x, sigma_y, sigma_z};
    use crate::state::QuantumState;
    use crate::superop::{dissipator, expectation};
    use crate::testutil::{random_operator, random_state, TestRng};

    #[test]
    fn single_channel_gain() {
        let l = sigma_z().scale(0.7);
        let law = no_knowledge_feedback(&[Channel::homodyne(l.clone(), FRAC_PI_2, 1.0)]).unwrap();
        assert_eq!(law.gains().len(), 1);
        assert!((&law.gains()[0].1 - &l).max_abs() < 1e-15);
        let off = no_knowledge_feedback(&[Channel::homodyne(l, FRAC_PI_2, 0.0)]).unwrap();
        assert_eq!(off.gains()[0].1.max_abs(), 0.0);
    }

    #[test]
    fn gain_sign_follows_quadrature() {
        let l = sigma_z();
        let law = no_knowledge_feedback(&[Channel::homodyne(l.clone(), -FRAC_PI_2, 1.0)]).unwrap();
        assert!((&law.gains()[0].1 + &l).max_abs() < 1e-15);
    }

    #[test]
    fn feedback_preconditions() {
        let bad_angle = Channel::homodyne(sigma_z(), 0.3, 1.0);
        assert!(matches!(
            no_knowledge_feedback(&[bad_angle]),
            Err(Error::Angle { channel: 0, .. })
        ));
        let bad_l = Channel::homodyne(sigma_minus(), FRAC_PI_2, 1.0);
        assert!(matches!(
            no_knowledge_feedback(&[bad_l]),
            Err(Error::NonHermitianChannel { channel: 0, .. })
        ));
    }

    #[test]
    fn split_of_lowering_operator() {
        let (p, m) = hermitian_split(&sigma_minus());
        assert!((p - sigma_x().scale(FRAC_1_SQRT_2)).max_abs() < 1e-16);
        assert!((m - sigma_y().scale(FRAC_1_SQRT_2)).max_abs() < 1e-16);
    }

    #[test]
    fn split_of_hermitian_operator() {
        let (p, m) = hermitian_split(&sigma_z());
        assert!((p - sigma_z().scale(2f64.sqrt())).max_abs() < 1e-15);
        assert_eq!(m.max_abs(), 0.0);
    }

    #[test]
    fn split_is_exactly_hermitian_and_preserves_dissipators() {
        let mut rng = TestRng::new(3);
        for n in 2..=4 {
            for _ in 0..10 {
                let l = random_operator(&mut rng, n);
                let (p, m) = hermitian_split(&l);
                assert_eq!(p, p.adjoint());
                assert_eq!(m, m.adjoint());
                let rho = random_state(&mut rng, n);
                let lhs = dissipator(&l, &rho).unwrap() + dissipator(&l.adjoint(), &rho).unwrap();
                let rhs = dissipator(&p, &rho).unwrap() + dissipator(&m, &rho).unwrap();
                assert!((lhs - rhs).frobenius_norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn jump_correction_round_trip() {
        assert!(
            (jump_correction(&OperatorMatrix::identity(2)).unwrap().gains()[0]
                .1
                .clone()
                - OperatorMatrix::identity(2))
            .max_abs()
                == 0.0
        );
        let excited = QuantumState::excited();
        let u = sigma_x();
        let corr = jump_correction(&u).unwrap().gains()[0].1.clone();
        let back = &corr * &(&u * excited.matrix() * u.adjoint()) * corr.adjoint();
        assert_eq!(&back, excited.matrix());

        let u = crate::operator::unitary_propagator(&sigma_z().scale(-PI / 4.0), 1.0);
        let corr = jump_correction(&u).unwrap().gains()[0].1.clone();
        let mut rng = TestRng::new(8);
        for _ in 0..10 {
            let w = random_state(&mut rng, 2);
            let back = &corr * &(&u * w.matrix() * u.adjoint()) * corr.adjoint();
            assert!((back - w.matrix()).max_abs() < 1e-14);
        }
        assert!(matches!(jump_correction(&sigma_minus()), Err(Error::NonUnitary(_))));
    }

    #[test]
    fn angles() {
        assert!((no_knowledge_angle(&sigma_z()).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!(matches!(no_knowledge_angle(&sigma_minus()), Err(Error::NoQuadrature)));
        let l = sigma_z().scale_complex(Complex64::from_polar(1.0, PI / 4.0));
        let theta = no_knowledge_angle(&l).unwrap();
        assert!(theta > -FRAC_PI_2 && theta <= FRAC_PI_2);
        let quad = l.scale_complex(Complex64::from_polar(1.0, theta))
            + l.adjoint().scale_complex(Complex64::from_polar(1.0, -theta));
        let mut rng = TestRng::new(21);
        for _ in 0..20 {
            let rho = random_state(&mut rng, 2);
            assert!(expectation(&quad, &rho).unwrap().norm() <= 1e-12);
        }
    }
}
