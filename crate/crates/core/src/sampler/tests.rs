use super::*;
use crate::expfam::VariableKind;
use crate::model::Role;
use ndarray::array;
use rand::SeedableRng;

const NAN: f64 = f64::NAN;

fn specs(y2: VariableKind) -> Vec<VariableSpec> {
    vec![
        VariableSpec::new("x", VariableKind::Continuous, Role::Covariate),
        VariableSpec::new("y1", VariableKind::Continuous, Role::Outcome1),
        VariableSpec::new("y2", y2, Role::Outcome2),
    ]
}

/// `n` units alternating between the two patterns; covariate and observed
/// outcome values come from `rng`.
fn alternating(n: usize, y2: VariableKind, seed: u64) -> CombinedDataset {
    let mut rng = Rng::seed_from_u64(seed);
    let m: Vec<u8> = (0..n).map(|i| (i % 2 == 0) as u8).collect();
    let mut v = Array2::from_elem((n, 3), NAN);
    for i in 0..n {
        v[[i, 0]] = normal(&mut rng);
        if m[i] == 1 {
            v[[i, 1]] = 0.5 + normal(&mut rng);
        } else {
            v[[i, 2]] = match y2 {
                VariableKind::Continuous => normal(&mut rng),
                VariableKind::Binary => (normal(&mut rng) > 0.0) as u8 as f64,
                VariableKind::Count => (i % 4) as f64,
            };
        }
    }
    CombinedDataset::new(specs(y2), v, m).unwrap()
}

fn frozen() -> StepVariances {
    StepVariances {
        z: 0.0,
        eta: 0.0,
        tau1: 0.0,
        log_tau2: 0.0,
        lambda0: 0.0,
        sigma: 0.0,
        loadings: 0.0,
    }
}

fn cfg(iterations: usize, burn_in: usize, thin: usize, step_var: StepVariances) -> McmcConfig {
    McmcConfig {
        iterations,
        burn_in,
        thin,
        step_var,
        seed: 11,
        ..McmcConfig::default()
    }
}

/// GP state with `f = 0` everywhere (all `eta` zero).
fn flat_gp(data: &CombinedDataset, nmar: bool, lambda0: Vec<f64>, sigma: Vec<f64>) -> ModelState {
    let layout = ChannelLayout::for_data(data, nmar);
    let c = layout.n_channels();
    let n = data.n();
    let z = Array2::from_shape_fn((n, 1), |(i, _)| i as f64 * 0.3);
    ModelState::from_eta(
        layout,
        z,
        vec![1.0; c],
        vec![0; c],
        vec![1.0],
        vec![Array1::zeros(n); c],
        lambda0,
        sigma,
    )
    .unwrap()
}

fn gp_trace(draws: &PosteriorDraws, f: impl Fn(&ModelState) -> f64) -> Vec<f64> {
    draws
        .states
        .iter()
        .map(|s| match s {
            ChainState::Gp(s) => f(s),
            ChainState::Linear(_) => panic!("expected a GP state"),
        })
        .collect()
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Monte Carlo standard error of the mean via batch means.
fn mc_se(x: &[f64]) -> f64 {
    batch_mean_var(x).1.sqrt()
}

#[test]
fn mh_accept_edge_cases_and_rate() {
    let mut rng = Rng::seed_from_u64(1);
    for _ in 0..100 {
        assert!(mh_accept(-3.0, -3.0, &mut rng));
        assert!(!mh_accept(f64::NEG_INFINITY, 0.0, &mut rng));
        assert!(!mh_accept(f64::NAN, 0.0, &mut rng));
    }
    let trials = 100_000;
    let hits = (0..trials).filter(|_| mh_accept(0.5f64.ln(), 0.0, &mut rng)).count();
    assert!((hits as f64 / trials as f64 - 0.5).abs() < 0.01);
}

#[test]
fn retained_count_and_config_checks() {
    let c = cfg(100, 50, 5, StepVariances::default());
    assert_eq!(c.retained(), 10);
    assert!(cfg(100, 100, 5, StepVariances::default()).validate().is_err());
    assert!(cfg(100, 50, 0, StepVariances::default()).validate().is_err());
    let mut bad = frozen();
    bad.z = -1.0;
    assert!(cfg(100, 50, 5, bad).validate().is_err());
}

#[test]
fn retained_iterations_follow_thinning() {
    let data = alternating(6, VariableKind::Binary, 3);
    let draws = run_chain(&data, ModelVariant::GpdcmNmar, 1, &cfg(100, 50, 5, StepVariances::default())).unwrap();
    assert_eq!(draws.iterations, (55..=100).step_by(5).collect::<Vec<_>>());
    assert_eq!(draws.loglik_trace.len(), 100);
    assert_eq!(draws.imputations.len(), 10);
    assert_eq!(draws.missing_cells.len(), 6);
}

#[test]
fn chains_are_reproducible_per_seed() {
    let data = alternating(10, VariableKind::Binary, 4);
    for variant in ModelVariant::ALL {
        let c = cfg(60, 30, 3, StepVariances::default());
        let a = run_chain(&data, variant, 2, &c).unwrap();
        let b = run_chain(&data, variant, 2, &c).unwrap();
        assert_eq!(a.loglik_trace, b.loglik_trace, "{variant}");
        assert_eq!(a.imputations, b.imputations, "{variant}");
        assert_eq!(a.states, b.states, "{variant}");
        let other = run_chain(&data, variant, 2, &McmcConfig { seed: 12, ..c }).unwrap();
        assert_ne!(a.loglik_trace, other.loglik_trace, "{variant}");
    }
}

#[test]
fn zero_variance_blocks_never_move() {
    let data = alternating(8, VariableKind::Count, 5);
    for variant in ModelVariant::ALL {
        let c = cfg(40, 10, 1, frozen());
        let mut rng = stream(c.seed, 0);
        let init = initial_state(&data, variant, 2, &c, &mut rng).unwrap();
        let draws = run_chain_from(&data, variant, &c, init.clone()).unwrap();
        assert!(draws.states.iter().all(|s| *s == init), "{variant}");
        assert!(draws.acceptance_rates.is_empty());
    }
}

#[test]
fn wrong_starting_state_is_rejected() {
    let data = alternating(6, VariableKind::Binary, 6);
    let c = cfg(10, 5, 1, StepVariances::default());
    let mut rng = stream(0, 0);
    let gp = initial_state(&data, ModelVariant::GpdcmMar, 1, &c, &mut rng).unwrap();
    assert!(run_chain_from(&data, ModelVariant::LvmMar, &c, gp.clone()).is_err());
    assert!(run_chain_from(&data, ModelVariant::GpdcmNmar, &c, gp).is_err());
    assert!(run_chain(&data, ModelVariant::GpdcmMar, 0, &c).is_err());
}

/// Normal outcome with `f = 0` and known unit dispersion: the intercept
/// posterior is `N(sum y / (k + 1), 1 / (k + 1))`, `k` observed values.
#[test]
fn intercept_matches_conjugate_posterior() {
    let data = alternating(20, VariableKind::Binary, 7);
    let obs: Vec<f64> = (0..20).filter_map(|i| data.value(i, 1)).collect();
    let k = obs.len() as f64;
    let (mean, var) = (obs.iter().sum::<f64>() / (k + 1.0), 1.0 / (k + 1.0));

    let mut sv = frozen();
    sv.lambda0 = 0.2;
    let c = cfg(2000 + 10_000 * 5, 2000, 5, sv);
    let init = ChainState::Gp(flat_gp(&data, false, vec![0.0; 3], vec![1.0; 3]));
    let draws = run_chain_from(&data, ModelVariant::GpdcmMar, &c, init).unwrap();
    let tr = gp_trace(&draws, |s| s.lambda0[1]);
    assert_eq!(tr.len(), 10_000);
    let (m, v) = mean_var(&tr);
    assert!((m - mean).abs() < 3.0 * mc_se(&tr), "mean {m} vs {mean}");
    assert!((v / var - 1.0).abs() < 0.1, "variance {v} vs {var}");
}

#[test]
fn intercept_recovers_prior_without_data() {
    let empty = CombinedDataset::new(specs(VariableKind::Binary), Array2::zeros((0, 3)), vec![]).unwrap();
    let mut sv = frozen();
    sv.lambda0 = 1.0;
    let c = cfg(1000 + 10_000 * 3, 1000, 3, sv);
    let init = ChainState::Gp(flat_gp(&empty, false, vec![0.0; 3], vec![1.0; 3]));
    let draws = run_chain_from(&empty, ModelVariant::GpdcmMar, &c, init).unwrap();
    for j in [1, 2] {
        let tr = gp_trace(&draws, |s| s.lambda0[j]);
        let (m, v) = mean_var(&tr);
        assert!(m.abs() < 0.05, "channel {j}: mean {m}");
        assert!((v - 1.0).abs() < 0.1, "channel {j}: variance {v}");
    }
}

#[test]
fn dispersion_recovers_generating_value() {
    let n = 200;
    let mut rng = Rng::seed_from_u64(8);
    let m: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
    let mut v = Array2::from_elem((n, 3), NAN);
    for i in 0..n {
        v[[i, 0]] = 0.5 * normal(&mut rng);
        if m[i] == 1 {
            v[[i, 1]] = 0.0;
        } else {
            v[[i, 2]] = 1.0;
        }
    }
    let data = CombinedDataset::new(specs(VariableKind::Binary), v, m).unwrap();
    let mut sv = frozen();
    sv.sigma = 0.0025;
    let c = cfg(6000, 1000, 5, sv);
    let init = ChainState::Gp(flat_gp(&data, false, vec![0.0; 3], vec![1.0; 3]));
    let draws = run_chain_from(&data, ModelVariant::GpdcmMar, &c, init).unwrap();
    let (m, _) = mean_var(&gp_trace(&draws, |s| s.sigma[0]));
    assert!((0.4..=0.6).contains(&m), "posterior mean sigma {m}");
}

#[test]
fn imputations_follow_posterior_predictive() {
    let data = alternating(40, VariableKind::Binary, 9);
    let c = cfg(10_100, 100, 1, frozen());
    let init = ChainState::Gp(flat_gp(&data, true, vec![0.0, 3.0, 0.0], vec![1.0; 3]));
    let draws = run_chain_from(&data, ModelVariant::GpdcmNmar, &c, init).unwrap();
    let mean = point_predict(&draws).unwrap();
    let per_var = |j: usize| {
        let idx: Vec<usize> = (0..mean.len()).filter(|&c| draws.missing_cells[c].1 == j).collect();
        idx.iter().map(|&c| mean[c]).sum::<f64>() / idx.len() as f64
    };
    // 20 cells x 10_000 draws each
    assert!((per_var(1) - 3.0).abs() < 3.0 / (200_000f64).sqrt() * 3.0);
    assert!((per_var(2) - 0.5).abs() < 0.01);

    let counts = alternating(40, VariableKind::Count, 10);
    let init = ChainState::Gp(flat_gp(&counts, false, vec![0.0, 0.0, 4f64.ln()], vec![1.0; 3]));
    let draws = run_chain_from(&counts, ModelVariant::GpdcmMar, &c, init).unwrap();
    let mean = point_predict(&draws).unwrap();
    let poisson: Vec<f64> = (0..mean.len()).filter(|&c| draws.missing_cells[c].1 == 2).map(|c| mean[c]).collect();
    let avg = poisson.iter().sum::<f64>() / poisson.len() as f64;
    assert!((avg - 4.0).abs() < 3.0 * (4.0 / 200_000f64).sqrt(), "poisson mean {avg}");
}

#[test]
fn point_predict_averages_draws() {
    let draws = PosteriorDraws {
        variant: ModelVariant::GpdcmMar,
        missing_cells: vec![(0, 1), (1, 2)],
        iterations: vec![1, 2],
        states: vec![],
        imputations: vec![vec![1.0, 0.0], vec![3.0, 1.0]],
        loglik_trace: vec![0.0, 0.0],
        acceptance_rates: BTreeMap::new(),
        warnings: vec![],
    };
    assert_eq!(point_predict(&draws).unwrap(), vec![2.0, 0.5]);
    let empty = PosteriorDraws {
        imputations: vec![],
        ..draws
    };
    assert!(point_predict(&empty).is_err());
}

fn log_inv_gamma_55(x: f64) -> f64 {
    5.0 * 5f64.ln() - 24f64.ln() - 6.0 * x.ln() - 5.0 / x
}

fn log_normal(y: f64, mean: f64, sd: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI).ln() - sd.ln() - 0.5 * ((y - mean) / sd).powi(2)
}

/// Two units, one length-scale group: compare the acceptance ratio of a
/// `tau2` move with one assembled from explicit 2x2 Cholesky factors.
#[test]
fn tau2_ratio_matches_hand_assembly() {
    let specs = specs(VariableKind::Binary);
    let v = array![[0.4, 1.2, NAN], [-0.7, NAN, 1.0]];
    let data = CombinedDataset::new(specs, v, vec![1, 0]).unwrap();
    let layout = ChannelLayout::for_data(&data, true);
    let eta = vec![array![0.3, -1.1], array![0.8, 0.5], array![-0.2, 1.4], array![1.0, 0.1]];
    let tau1 = vec![1.5, 0.7, 2.0, 0.9];
    let st = ModelState::from_eta(
        layout,
        array![[0.0], [1.0]],
        tau1.clone(),
        vec![0; 4],
        vec![1.0],
        eta.clone(),
        vec![0.0, 0.2, -0.4],
        vec![0.6, 1.3, 1.0],
    )
    .unwrap();
    let engine = GpEngine::new(st.clone(), Augmented::new(&data), &McmcConfig::default()).unwrap();

    let jit = crate::gp_core::BASE_JITTER;
    let f_at = |tau2: f64, j: usize| {
        let a = (-1.0 / (2.0 * tau2)).exp();
        let l11 = (1.0 + jit).sqrt();
        let l21 = a / l11;
        let l22 = (1.0 + jit - l21 * l21).sqrt();
        let s = tau1[j].sqrt();
        [s * l11 * eta[j][0], s * (l21 * eta[j][0] + l22 * eta[j][1])]
    };
    let ll = |tau2: f64| {
        let fx = f_at(tau2, 0);
        let f1 = f_at(tau2, 1);
        let f2 = f_at(tau2, 2);
        let fm = f_at(tau2, 3);
        let bern = |y: f64, t: f64| y * t - (1.0 + t.exp()).ln();
        let phi = |x: f64| 0.5 * libm::erfc(-x / 2f64.sqrt());
        log_normal(0.4, fx[0], 0.6)
            + log_normal(-0.7, fx[1], 0.6)
            + log_normal(1.2, 0.2 + f1[0], 1.3)
            + bern(1.0, -0.4 + f2[1])
            + phi(fm[0]).ln()
            + (1.0 - phi(fm[1])).ln()
    };
    for t_new in [0.3, 2.0, 7.5] {
        let expected = ll(t_new) - ll(1.0) + log_inv_gamma_55(t_new) - log_inv_gamma_55(1.0) + t_new.ln();
        let got = engine.tau2_log_ratio(0, t_new).unwrap();
        assert!((got - expected).abs() < 1e-9, "tau2 {t_new}: {got} vs {expected}");
    }
    // the state's own log-likelihood agrees with the hand sum at tau2 = 1
    assert!((engine.loglik() - ll(1.0)).abs() < 1e-9);
}

#[test]
fn zero_eta_keeps_f_zero_under_kernel_moves() {
    let data = alternating(12, VariableKind::Binary, 13);
    let mut sv = frozen();
    sv.tau1 = 0.5;
    sv.log_tau2 = 1.0;
    let c = cfg(50, 10, 1, sv);
    let init = ChainState::Gp(flat_gp(&data, true, vec![0.0; 3], vec![1.0; 3]));
    let draws = run_chain_from(&data, ModelVariant::GpdcmNmar, &c, init).unwrap();
    let moved = gp_trace(&draws, |s| s.tau2[0]).iter().any(|&t| t != 1.0);
    assert!(moved);
    for s in &draws.states {
        let ChainState::Gp(s) = s else { unreachable!() };
        assert!(s.channels.iter().all(|ch| ch.f.iter().all(|&v| v == 0.0)));
    }
}

#[test]
fn whitening_holds_after_every_move() {
    let data = alternating(30, VariableKind::Count, 14);
    for tying in [KernelTying::SharedLengthScale, KernelTying::PerChannel] {
        let c = McmcConfig {
            tying,
            eta_block: 7,
            ..cfg(200, 100, 10, StepVariances::default())
        };
        let draws = run_chain(&data, ModelVariant::GpdcmNmar, 2, &c).unwrap();
        for s in &draws.states {
            let ChainState::Gp(s) = s else { unreachable!() };
            assert!(s.whitening_error().unwrap() < 1e-8);
        }
        assert!(draws.acceptance_rates.contains_key("z"));
        assert!(draws.acceptance_rates.contains_key("eta"));
    }
}

/// With one unit, `f_1 ~ N(0, tau1 (1 + jitter))` whatever `z_1` is, so the
/// position posterior is its prior.
#[test]
fn single_unit_position_posterior_is_prior() {
    let v = array![[0.8, 2.0, NAN]];
    let data = CombinedDataset::new(specs(VariableKind::Binary), v, vec![1]).unwrap();
    let mut sv = frozen();
    sv.z = 1.0;
    sv.eta = 0.5;
    let c = cfg(2000 + 20_000 * 2, 2000, 2, sv);
    let draws = run_chain(&data, ModelVariant::GpdcmNmar, 1, &c).unwrap();
    let tr = gp_trace(&draws, |s| s.z[[0, 0]]);
    let (m, v) = mean_var(&tr);
    assert!(m.abs() < 4.0 * mc_se(&tr), "mean {m}");
    assert!((v - 1.0).abs() < 0.08, "variance {v}");
}

/// Two units and Gaussian channels with fixed hyperparameters: the joint
/// posterior of positions and latent values can be integrated on a grid,
/// since `f` is conjugate given `z`. Only the covariate channel carries
/// information about `z` (each outcome is observed once).
#[test]
fn positions_and_latents_match_grid_integration() {
    let v = array![[1.5, 0.3, NAN], [-1.0, NAN, -0.2]];
    let data = CombinedDataset::new(specs(VariableKind::Continuous), v, vec![1, 0]).unwrap();
    let sigma = 0.5;
    let jit = crate::gp_core::BASE_JITTER;
    let (x0, x1) = (1.5, -1.0);

    // grid over r = z1 - z2 and s = z1 + z2 (the prior factorizes)
    let h = 0.01;
    let (mut w_sum, mut r2_sum, mut f0_sum) = (0.0, 0.0, 0.0);
    let mut r: f64 = -8.0;
    while r <= 8.0 {
        let a = (-0.5 * r * r).exp();
        let (k11, k12) = (1.0 + jit, a);
        let (c11, c12) = (k11 + sigma * sigma, k12);
        let det = c11 * c11 - c12 * c12;
        let quad = (c11 * x0 * x0 - 2.0 * c12 * x0 * x1 + c11 * x1 * x1) / det;
        // z1 - z2 ~ N(0, 2) under the prior
        let w = (-0.25 * r * r).exp() * (-0.5 * quad).exp() / det.sqrt();
        // E[f_x | x, z] = K (K + s^2 I)^-1 x, first component
        let s0 = (c11 * x0 - c12 * x1) / det;
        let s1 = (-c12 * x0 + c11 * x1) / det;
        w_sum += w;
        r2_sum += w * r * r;
        f0_sum += w * (k11 * s0 + k12 * s1);
        r += h;
    }
    let (e_r2, e_f0) = (r2_sum / w_sum, f0_sum / w_sum);

    let mut sv = frozen();
    sv.z = 1.0;
    sv.eta = 0.5;
    let c = cfg(5000 + 60_000, 5000, 1, sv);
    let mut rng = stream(c.seed, 0);
    let ChainState::Gp(mut init) = initial_state(&data, ModelVariant::GpdcmMar, 1, &c, &mut rng).unwrap() else {
        unreachable!()
    };
    init.sigma = vec![sigma; 3];
    init.lambda0 = vec![0.0; 3];
    let draws = run_chain_from(&data, ModelVariant::GpdcmMar, &c, ChainState::Gp(init)).unwrap();
    let r2 = gp_trace(&draws, |s| (s.z[[0, 0]] - s.z[[1, 0]]).powi(2));
    let f0 = gp_trace(&draws, |s| s.channels[0].f[0]);
    let (m_r2, _) = mean_var(&r2);
    let (m_f0, _) = mean_var(&f0);
    assert!((m_r2 - e_r2).abs() < 4.0 * mc_se(&r2) + 0.01, "E[(z1-z2)^2] {m_r2} vs {e_r2}");
    assert!((m_f0 - e_f0).abs() < 4.0 * mc_se(&f0) + 0.01, "E[f] {m_f0} vs {e_f0}");
}

/// Linear model with loadings fixed at zero: every intercept has the
/// conjugate normal posterior given unit dispersion.
#[test]
fn linear_intercept_matches_conjugate_posterior() {
    let data = alternating(16, VariableKind::Binary, 15);
    let xs: Vec<f64> = (0..16).map(|i| data.value(i, 0).unwrap()).collect();
    let k = xs.len() as f64;
    let (mean, var) = (xs.iter().sum::<f64>() / (k + 1.0), 1.0 / (k + 1.0));
    let layout = ChannelLayout::for_data(&data, false);
    let init = ChainState::Linear(LinearState {
        z: Array2::zeros((16, 1)),
        loadings: LinearLoadings::new(Array2::zeros((3, 1)), Array1::zeros(3)).unwrap(),
        sigma: vec![1.0; 3],
        layout,
    });
    let mut sv = frozen();
    sv.lambda0 = 0.2;
    let c = cfg(2000 + 10_000 * 3, 2000, 3, sv);
    let draws = run_chain_from(&data, ModelVariant::LvmMar, &c, init).unwrap();
    let tr: Vec<f64> = draws
        .states
        .iter()
        .map(|s| match s {
            ChainState::Linear(s) => s.loadings.lambda0[0],
            ChainState::Gp(_) => unreachable!(),
        })
        .collect();
    let (m, v) = mean_var(&tr);
    assert!((m - mean).abs() < 3.0 * mc_se(&tr), "mean {m} vs {mean}");
    assert!((v / var - 1.0).abs() < 0.1, "variance {v} vs {var}");
}

#[test]
fn posterior_mean_loglik_is_finite_and_rotation_free_for_linear() {
    let data = alternating(20, VariableKind::Binary, 16);
    for variant in ModelVariant::ALL {
        let draws = run_chain(&data, variant, 2, &cfg(200, 100, 5, StepVariances::default())).unwrap();
        assert!(draws.loglik_at_posterior_mean(&data).unwrap().is_finite());
    }
    // a rotated copy of every linear state leaves theta and the evaluation unchanged
    let draws = run_chain(&data, ModelVariant::LvmNmar, 2, &cfg(200, 100, 5, StepVariances::default())).unwrap();
    let (c, s) = (0.6f64, 0.8f64);
    let rot = array![[c, -s], [s, c]];
    let mut rotated = draws.clone();
    for st in &mut rotated.states {
        let ChainState::Linear(st) = st else { unreachable!() };
        st.z = st.z.dot(&rot);
        st.loadings.lambda = st.loadings.lambda.dot(&rot);
    }
    let a = draws.loglik_at_posterior_mean(&data).unwrap();
    let b = rotated.loglik_at_posterior_mean(&data).unwrap();
    assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
}

#[test]
fn geweke_separates_stationary_from_trending() {
    let mut rng = Rng::seed_from_u64(17);
    let iid: Vec<f64> = (0..5000).map(|_| normal(&mut rng)).collect();
    assert!(geweke_z(&iid, 0.1, 0.5).unwrap().abs() < 3.0);
    let trend: Vec<f64> = (0..5000).map(|t| t as f64 / 500.0 + normal(&mut rng)).collect();
    assert!(geweke_z(&trend, 0.1, 0.5).unwrap().abs() > 5.0);
    assert!(geweke_z(&iid[..10], 0.1, 0.5).is_err());
    assert!(geweke_z(&iid, 0.6, 0.5).is_err());
}

#[test]
fn trace_and_imputation_files() {
    let data = alternating(6, VariableKind::Binary, 18);
    let dir = tempfile::tempdir().unwrap();
    for variant in [ModelVariant::GpdcmNmar, ModelVariant::LvmMar] {
        let draws = run_chain(&data, variant, 1, &cfg(40, 20, 5, StepVariances::default())).unwrap();
        let trace = dir.path().join("trace.csv");
        draws.write_trace(&trace, data.specs()).unwrap();
        let text = std::fs::read_to_string(&trace).unwrap();
        assert_eq!(text.lines().count(), 1 + 4);
        assert!(text.starts_with("iteration,loglik,lambda0_"));
        let imp = dir.path().join("imp.csv");
        draws.write_imputations(&imp, data.specs(), true).unwrap();
        let text = std::fs::read_to_string(&imp).unwrap();
        assert_eq!(text.lines().count(), 1 + 6);
        assert_eq!(text.lines().next().unwrap().split(',').count(), 4 + 4);
    }
}
