use std::f64::consts::{FRAC_PI_2, PI};

use noknow_core::models::{mismatched_estimate, reference_state};
use noknow_core::operator::unitary_propagator;
use noknow_core::unravel::HomodyneIntegrator;
use noknow_core::{
    dephasing_qubit, ensemble_average, frobenius_distance, integrate_bloch, integrate_master_equation,
    no_knowledge_feedback, propagate_filter, propagate_homodyne, propagate_jump, sigma_x, sigma_z, BlochState, Channel,
    DephasingQubitParams, IntegratorConfig, MonitoredModel, NoiseStream, Observation, OperatorMatrix, QuantumState,
    Scheme,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn qubit(theta: f64, eta: f64) -> MonitoredModel {
    dephasing_qubit(&DephasingQubitParams {
        omega: 1.0,
        gamma: 1.0,
        theta,
        eta,
    })
    .unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Integrates one homodyne channel on increments `dws` (each of length `dt`).
fn run_path(model: &MonitoredModel, scheme: Scheme, rho0: &QuantumState, dws: &[f64], dt: f64) -> QuantumState {
    let integ = HomodyneIntegrator::new(model, scheme, dt).unwrap();
    let mut rho = rho0.clone();
    for &dw in dws {
        let ys = integ.signals(&rho, &[dw]).unwrap();
        integ.advance(&mut rho, &ys).unwrap();
    }
    rho
}

fn coarsen(dws: &[f64]) -> Vec<f64> {
    dws.chunks(2).map(|p| p.iter().sum()).collect()
}

fn hermitian_from(v: &[f64], dim: usize) -> OperatorMatrix {
    let entries: Vec<Complex64> = v.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
    OperatorMatrix::from_rows(dim, &entries).unwrap().hermitian_part()
}

#[test]
fn strong_error_shrinks_with_dt() {
    let model = qubit(4.0 * PI / 5.0, 1.0);
    let rho0 = reference_state();
    let t_final: f64 = 1.0;
    let dts = [1e-2, 5e-3, 2.5e-3];
    let finest = dts[2] / 2.0;
    let mut errs = vec![Vec::new(); dts.len()];
    for seed in 0..20 {
        let n = (t_final / finest).round() as usize;
        let mut s = NoiseStream::new(seed, 0, finest);
        let mut levels = vec![(0..n).map(|_| s.wiener_increment()).collect::<Vec<_>>()];
        for _ in 0..dts.len() {
            let c = coarsen(levels.last().unwrap());
            levels.push(c);
        }
        // levels[k] has step finest·2^k
        for (i, &dt) in dts.iter().enumerate() {
            let k = dts.len() - i;
            let coarse = run_path(&model, Scheme::Exponential, &rho0, &levels[k], dt);
            let fine = run_path(&model, Scheme::Exponential, &rho0, &levels[k - 1], dt / 2.0);
            errs[i].push(frobenius_distance(&coarse, &fine).unwrap());
        }
    }
    let med: Vec<f64> = errs.into_iter().map(median).collect();
    assert!(med[0] > med[1] && med[1] > med[2], "{med:?}");
}

#[test]
fn no_knowledge_measurement_keeps_states_pure() {
    let mut s = NoiseStream::new(4, 0, 1.0);
    let mut draw = |n: usize| (0..n).map(|_| s.wiener_increment()).collect::<Vec<_>>();
    let h = hermitian_from(&draw(18), 3);
    let l = hermitian_from(&draw(18), 3);
    let model = MonitoredModel::new(h, vec![Channel::homodyne(l, FRAC_PI_2, 1.0)]).unwrap();
    let psi: Vec<Complex64> = draw(6).chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
    let rho0 = QuantumState::pure(&psi).unwrap();
    let cfg = IntegratorConfig::for_rate(model.max_rate(), 2.0).unwrap();
    let t = propagate_homodyne(
        &model,
        &rho0,
        &cfg,
        NoiseStream::new(9, 0, cfg.dt),
        &Observation::default(),
    )
    .unwrap();
    for s in &t.samples {
        assert!((s.purity - 1.0).abs() <= 1e-6 * s.time.max(cfg.dt));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn feedback_cancels_pathwise(
        dim in 2usize..=4,
        raw in prop::collection::vec(-1.0f64..1.0, 3 * 32),
        seed in 0u64..1000,
    ) {
        let m2 = 2 * dim * dim;
        let h = hermitian_from(&raw[..m2], dim);
        let l = hermitian_from(&raw[m2..2 * m2], dim);
        let psi: Vec<Complex64> = raw[2 * m2..2 * m2 + 2 * dim].chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
        prop_assume!(psi.iter().map(|z| z.norm_sqr()).sum::<f64>() > 1e-3);
        let rho0 = QuantumState::pure(&psi).unwrap();
        let ch = Channel::homodyne(l, FRAC_PI_2, 1.0);
        let model = MonitoredModel::new(h.clone(), vec![ch.clone()]).unwrap()
            .with_feedback(no_knowledge_feedback(&[ch]).unwrap()).unwrap();
        let cfg = IntegratorConfig::new(1e-3, 1.0, Scheme::Exponential, 100).unwrap();
        let obs = Observation::default().with_states();
        let t = propagate_homodyne(&model, &rho0, &cfg, NoiseStream::new(seed, 0, cfg.dt), &obs).unwrap();
        for (s, rho) in t.samples.iter().zip(&t.states) {
            let u = unitary_propagator(&h, s.time);
            let exact = QuantumState::new(&u * rho0.matrix() * &u.adjoint()).unwrap();
            prop_assert!(frobenius_distance(rho, &exact).unwrap() <= 1e-9);
        }
    }
}

#[test]
fn partial_efficiency_is_deterministic_per_path() {
    let eta = 0.5;
    let model = qubit(FRAC_PI_2, eta).with_no_knowledge_feedback().unwrap();
    let cfg = IntegratorConfig::new(1e-3, 3.0, Scheme::Exponential, 500).unwrap();
    let obs = Observation::default().with_states();
    let rho0 = reference_state();
    for seed in 0..3 {
        let t = propagate_homodyne(&model, &rho0, &cfg, NoiseStream::new(seed, 0, cfg.dt), &obs).unwrap();
        for (s, rho) in t.samples.iter().zip(&t.states) {
            let want =
                integrate_master_equation(&sigma_x(), &[sigma_z().scale((1.0 - eta).sqrt())], &rho0, s.time).unwrap();
            assert!(frobenius_distance(rho, &want).unwrap() <= 1e-9, "t={}", s.time);
        }
    }
}

#[test]
fn filter_distance_is_constant_for_uninformative_quadrature() {
    let model = qubit(FRAC_PI_2, 1.0);
    let cfg = IntegratorConfig::new(1e-3, 5.0, Scheme::Exponential, 50).unwrap();
    let obs = Observation::default().with_states();
    for seed in 0..5 {
        let truth = propagate_homodyne(
            &model,
            &reference_state(),
            &cfg,
            NoiseStream::new(seed, 0, cfg.dt),
            &obs,
        )
        .unwrap();
        let est = propagate_filter(&model, &mismatched_estimate(), &truth.record, &cfg, &obs).unwrap();
        for (a, b) in truth.states.iter().zip(&est.states) {
            assert!((frobenius_distance(a, b).unwrap() - 1.0).abs() <= 1e-9);
        }
    }
}

#[test]
fn filter_tracks_informative_quadrature() {
    let model = qubit(4.0 * PI / 5.0, 1.0);
    let cfg = IntegratorConfig::new(1e-3, 5.0, Scheme::Exponential, 5000).unwrap();
    let obs = Observation::default();
    let finals: Vec<f64> = (0..20)
        .map(|seed| {
            let truth = propagate_homodyne(
                &model,
                &reference_state(),
                &cfg,
                NoiseStream::new(seed, 0, cfg.dt),
                &obs,
            )
            .unwrap();
            let est = propagate_filter(&model, &mismatched_estimate(), &truth.record, &cfg, &obs).unwrap();
            frobenius_distance(&truth.final_state, &est.final_state).unwrap()
        })
        .collect();
    assert!(median(finals) <= 0.15);
}

#[test]
fn jump_counts_are_poissonian() {
    let model = MonitoredModel::new(OperatorMatrix::zeros(2), vec![Channel::photodetect(sigma_x())]).unwrap();
    let cfg = IntegratorConfig::new(1e-3, 5.0, Scheme::Exponential, 5000).unwrap();
    let n = 2000;
    let counts: Vec<f64> = (0..n)
        .map(|i| {
            let t = propagate_jump(
                &model,
                &reference_state(),
                &cfg,
                NoiseStream::new(11, i, cfg.dt),
                &Observation::default(),
            )
            .unwrap();
            t.record.jump_count(0) as f64
        })
        .collect();
    let mean = counts.iter().sum::<f64>() / n as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    // Poisson(5): sd of the mean 0.05, sd of the variance about 0.17
    assert!((mean - 5.0).abs() <= 0.2, "mean {mean}");
    assert!((var - 5.0).abs() <= 0.7, "var {var}");
}

#[test]
fn trajectory_average_matches_master_equation() {
    let model = qubit(0.0, 1.0);
    let cfg = IntegratorConfig::new(1e-3, 2.0, Scheme::Exponential, 1000).unwrap();
    let obs = Observation::new(vec![sigma_x()]);
    let rho0 = reference_state();
    let e = ensemble_average(&model, &rho0, &cfg, 400, 3, &obs).unwrap();
    for (i, t) in e.times.iter().enumerate() {
        let want = integrate_master_equation(&sigma_x(), &[sigma_z()], &rho0, *t).unwrap();
        let x = noknow_core::expectation(&sigma_x(), &want).unwrap().re;
        let se = e.std_err[i][0].max(1e-12);
        assert!(
            (e.mean[i][0] - x).abs() <= 4.0 * se,
            "t={t}: {} vs {x} (se {se})",
            e.mean[i][0]
        );
    }
}

#[test]
fn bloch_oracle_tracks_the_sme_path() {
    let dt = 1e-4;
    let rho0 = reference_state();
    let b0 = BlochState::of(&rho0).unwrap();
    let cfg = IntegratorConfig::new(dt, 5.0, Scheme::Exponential, 1).unwrap();
    let obs = Observation::default().with_states();
    for theta in [FRAC_PI_2, 4.0 * PI / 5.0] {
        let p = DephasingQubitParams {
            omega: 1.0,
            gamma: 1.0,
            theta,
            eta: 1.0,
        };
        let model = dephasing_qubit(&p).unwrap();
        for seed in 0..3 {
            let t = propagate_homodyne(&model, &rho0, &cfg, NoiseStream::new(seed, 0, dt), &obs).unwrap();
            let ys: Vec<f64> = t.record.signals.iter().map(|s| s[0]).collect();
            let bloch = integrate_bloch(b0, &p, &ys, dt, 1);
            assert_eq!(bloch.len(), t.states.len());
            for (rho, b) in t.states.iter().zip(&bloch) {
                let d = BlochState::of(rho).unwrap().max_abs_diff(b);
                assert!(d <= 1e-6, "theta {theta}, seed {seed}: {d}");
            }
        }
    }
}
