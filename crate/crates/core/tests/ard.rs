mod common;

use ard_choice::ard::{
    elbo_estimate, fit, lambda_optimal, penalty, penalty_grad, select_variables, step, Checkpoint, GroupLayout, Schedule,
    Selection, TrainingConfig, VariationalState,
};
use ard_choice::mnl::loglik_and_grad;
use ard_choice::space::DesignTensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{gauss_hermite, normals, numeric_lambda, random_problem};

#[test]
fn gauss_hermite_integrates_gaussian_moments() {
    let nodes = gauss_hermite(64);
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let moment = |p: i32| nodes.iter().map(|(x, w)| w * (2f64.sqrt() * x).powi(p)).sum::<f64>() / sqrt_pi;
    assert!((moment(0) - 1.0).abs() < 1e-13);
    assert!(moment(1).abs() < 1e-13);
    assert!((moment(2) - 1.0).abs() < 1e-12);
    assert!((moment(4) - 3.0).abs() < 1e-11);
}

fn one_column_toy() -> (DesignTensor, Vec<usize>) {
    let x = vec![0.8, -1.2, 0.3, 2.1, -0.4, 1.5, -2.2, 0.0, 0.9, -0.7];
    let choices = vec![0, 1, 0, 0, 1, 0, 1, 1, 0, 1];
    let design = DesignTensor::from_blocks(10, &[1, 0], vec![x, vec![]], vec![true; 20]).unwrap();
    (design, choices)
}

#[test]
fn monte_carlo_elbo_matches_quadrature() {
    let (design, choices) = one_column_toy();
    let rows: Vec<usize> = (0..10).collect();
    let layout = GroupLayout::singletons(1);
    let (mu, c) = ([0.4], [0.9]);
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let expected_ll: f64 = gauss_hermite(64)
        .iter()
        .map(|&(x, w)| {
            let beta = [c[0] * 2f64.sqrt() * x + mu[0]];
            w * loglik_and_grad(&beta, &design, &choices, &rows).unwrap().0
        })
        .sum::<f64>()
        / sqrt_pi;
    let exact = expected_ll + penalty(&mu, &c, &layout);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws = 100_000;
    let samples: Vec<f64> = (0..draws)
        .map(|_| {
            let z = normals(&mut rng, 1, 1.0);
            elbo_estimate(&mu, &c, &design, &choices, 10, &rows, &z, &layout).unwrap()
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / draws as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    let se = (var / draws as f64).sqrt();
    assert!((mean - exact).abs() < 3.0 * se, "mean {mean} exact {exact} se {se}");
}

#[test]
fn full_batch_estimate_has_unit_scale() {
    let (design, choices) = random_problem(3, 40, &[2, 3, 1], true);
    let rows: Vec<usize> = (0..40).collect();
    let layout = GroupLayout::singletons(6);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mu = normals(&mut rng, 6, 0.5);
    let c: Vec<f64> = normals(&mut rng, 6, 0.3).iter().map(|v| v.abs() + 0.05).collect();
    let z = normals(&mut rng, 6, 1.0);
    let beta: Vec<f64> = (0..6).map(|k| c[k] * z[k] + mu[k]).collect();
    let ll = loglik_and_grad(&beta, &design, &choices, &rows).unwrap().0;
    let e = elbo_estimate(&mu, &c, &design, &choices, 40, &rows, &z, &layout).unwrap();
    assert_eq!(e, ll + penalty(&mu, &c, &layout));
}

#[test]
fn closed_form_lambda_maximizes_the_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let k = rng.random_range(1..=8);
        let scale = 10f64.powf(rng.random_range(-2.0..1.0));
        let mu = normals(&mut rng, k, scale);
        let c: Vec<f64> = (0..k).map(|_| scale * rng.random_range(0.01..2.0)).collect();
        let layout = GroupLayout {
            column_group: vec![0; k],
            sizes: vec![k],
            alternative: vec![0],
            n_alternatives: 1,
        };
        let closed = lambda_optimal(&mu, &c, &layout).values[0];
        let numeric = numeric_lambda(&mu, &c);
        assert!((closed - numeric).abs() <= 1e-8 * closed, "closed {closed} numeric {numeric}");
    }
}

#[test]
fn penalty_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let layout = GroupLayout {
        column_group: vec![0, 0, 0, 1, 2, 2],
        sizes: vec![3, 1, 2],
        alternative: vec![0, 0, 1],
        n_alternatives: 2,
    };
    for _ in 0..20 {
        let mu = normals(&mut rng, 6, 1.0);
        let c: Vec<f64> = (0..6).map(|_| rng.random_range(0.1..1.5)).collect();
        let (gm, gc) = penalty_grad(&mu, &c, &layout);
        let h = 1e-5;
        for k in 0..6 {
            let shifted = |v: &[f64], d: f64| {
                let mut w = v.to_vec();
                w[k] += d;
                w
            };
            let fd_mu = (penalty(&shifted(&mu, h), &c, &layout) - penalty(&shifted(&mu, -h), &c, &layout)) / (2.0 * h);
            let fd_c = (penalty(&mu, &shifted(&c, h), &layout) - penalty(&mu, &shifted(&c, -h), &layout)) / (2.0 * h);
            assert!((fd_mu - gm[k]).abs() < 1e-8 * (1.0 + gm[k].abs()), "μ {k}: {fd_mu} vs {}", gm[k]);
            assert!((fd_c - gc[k]).abs() < 1e-8 * (1.0 + gc[k].abs()), "c {k}: {fd_c} vs {}", gc[k]);
        }
    }
}

fn short_config(seed: u64, iterations: u64) -> TrainingConfig {
    TrainingConfig {
        batch_size: 50,
        max_iterations: iterations,
        seed,
        ..Default::default()
    }
}

#[test]
fn zero_design_shrinks_to_the_prior() {
    let design = DesignTensor::from_blocks(200, &[3, 2], vec![vec![0.0; 600], vec![0.0; 400]], vec![true; 400]).unwrap();
    let choices: Vec<usize> = (0..200).map(|r| r % 2).collect();
    let rows: Vec<usize> = (0..200).collect();
    let layout = GroupLayout::singletons(5);
    let config = TrainingConfig {
        init_mu: 0.5,
        ..short_config(1, 2000)
    };
    let result = fit(&design, &choices, &rows, &layout, &config, None).unwrap();
    assert!(result.state.mu.iter().all(|m| m.abs() < 0.05), "{:?}", result.state.mu);
}

#[test]
fn strong_signal_outranks_noise() {
    let n = 600;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = normals(&mut rng, n * 3, 1.0);
    let choices: Vec<usize> = (0..n)
        .map(|r| {
            let v = 2.0 * x[r * 3];
            usize::from(rng.random::<f64>() >= 1.0 / (1.0 + (-v).exp()))
        })
        .collect();
    let design = DesignTensor::from_blocks(n, &[3, 0], vec![x, vec![]], vec![true; 2 * n]).unwrap();
    let rows: Vec<usize> = (0..n).collect();
    let layout = GroupLayout::singletons(3);
    let config = TrainingConfig {
        batch_size: 100,
        max_iterations: 4000,
        init_c: 1e-3,
        average_from: Some(2000),
        ..Default::default()
    };
    let result = fit(&design, &choices, &rows, &layout, &config, None).unwrap();
    let lam = &result.lambda.values;
    assert!(lam[0] > 1.0, "{lam:?}");
    assert!(lam[1] < 0.1 * lam[0] && lam[2] < 0.1 * lam[0], "{lam:?}");
    assert_eq!(select_variables(&result.lambda, &layout, &Selection::default())[0][0], 0);
}

#[test]
fn proximal_step_survives_a_stiff_prior_that_breaks_the_explicit_step() {
    let (design, choices) = random_problem(4, 300, &[4, 4, 0], false);
    let rows: Vec<usize> = (0..300).collect();
    let layout = GroupLayout::singletons(8);
    let base = TrainingConfig {
        schedule: Schedule::Decay { rho0: 0.01, t0: 100.0 },
        init_c: 1e-4,
        ..short_config(3, 300)
    };
    let explicit = TrainingConfig {
        proximal: false,
        ..base.clone()
    };
    let blown = match fit(&design, &choices, &rows, &layout, &explicit, None) {
        Err(e) => e.is_numerical(),
        Ok(r) => r.state.mu.iter().chain(&r.state.c).any(|v| v.abs() > 1e3),
    };
    assert!(blown);
    let ok = fit(&design, &choices, &rows, &layout, &base, None).unwrap();
    assert!(ok.state.mu.iter().chain(&ok.state.c).all(|v| v.is_finite() && v.abs() < 10.0));
}

#[test]
fn same_seed_gives_bit_identical_fits() {
    let (design, choices) = random_problem(5, 400, &[5, 3, 2], true);
    let rows: Vec<usize> = (0..400).collect();
    let layout = GroupLayout::singletons(10);
    let config = TrainingConfig {
        average_from: Some(100),
        ..short_config(9, 300)
    };
    let a = fit(&design, &choices, &rows, &layout, &config, None).unwrap();
    let b = fit(&design, &choices, &rows, &layout, &config, None).unwrap();
    assert_eq!(a.state, b.state);
    assert_eq!(a.lambda, b.lambda);
    assert_eq!(a.trace, b.trace);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let c = pool.install(|| fit(&design, &choices, &rows, &layout, &config, None).unwrap());
    assert_eq!(a.state, c.state);
    let other = fit(&design, &choices, &rows, &layout, &short_config(10, 300), None).unwrap();
    assert_ne!(a.state.mu, other.state.mu);
}

#[test]
fn resume_from_checkpoint_matches_an_uninterrupted_run() {
    let (design, choices) = random_problem(6, 300, &[4, 4], false);
    let rows: Vec<usize> = (0..300).collect();
    let layout = GroupLayout::singletons(8);
    let full_config = TrainingConfig {
        average_from: Some(80),
        ..short_config(4, 200)
    };
    let full = fit(&design, &choices, &rows, &layout, &full_config, None).unwrap();

    let first = fit(&design, &choices, &rows, &layout, &TrainingConfig { max_iterations: 120, ..full_config.clone() }, None).unwrap();
    let file = tempfile::NamedTempFile::new().unwrap();
    Checkpoint::from_state(&first.state, &layout, full_config.hash(), None).save(file.path()).unwrap();
    let restored = Checkpoint::load(file.path()).unwrap().to_state().unwrap();
    assert_eq!(restored, first.state);
    let resumed = fit(&design, &choices, &rows, &layout, &full_config, Some(restored)).unwrap();
    assert_eq!(resumed.state, full.state);
    assert_eq!(resumed.lambda, full.lambda);
    assert_eq!(resumed.trace.start, 120);
    assert_eq!(&full.trace.elbo[120..], &resumed.trace.elbo[..]);
}

#[test]
fn corrupted_checkpoint_is_rejected() {
    let layout = GroupLayout::singletons(2);
    let state = VariationalState::new(2, &TrainingConfig::default());
    let mut cp = Checkpoint::from_state(&state, &layout, "h".into(), None);
    cp.c[1] = -1.0;
    assert!(cp.to_state().is_err());
    let mut cp = Checkpoint::from_state(&state, &layout, "h".into(), None);
    cp.rng_seed = "zz".into();
    assert!(cp.to_state().is_err());
}

#[test]
fn averaging_reports_the_mean_iterate() {
    let (design, choices) = random_problem(8, 200, &[3, 0], false);
    let rows: Vec<usize> = (0..200).collect();
    let layout = GroupLayout::singletons(3);
    let config = TrainingConfig {
        average_from: Some(150),
        ..short_config(1, 200)
    };
    let mut state = VariationalState::new(3, &config);
    let mut sums = [0.0; 3];
    for t in 1..=200u64 {
        step(&mut state, &design, &choices, &rows, &layout, &config).unwrap();
        if t > 150 {
            for k in 0..3 {
                sums[k] += state.mu[k];
            }
        }
    }
    let averaged = fit(&design, &choices, &rows, &layout, &config, None).unwrap();
    assert_eq!(averaged.state.mu, state.mu);
    for k in 0..3 {
        assert!((averaged.state.average.mu[k] - sums[k] / 50.0).abs() < 1e-12);
    }
}

/// Permute whole groups (with their columns) of a layout and a state.
fn permute_groups(layout: &GroupLayout, mu: &[f64], c: &[f64], order: &[usize]) -> (GroupLayout, Vec<f64>, Vec<f64>) {
    let mut column_group = Vec::new();
    let (mut pm, mut pc) = (Vec::new(), Vec::new());
    for (new_g, &old_g) in order.iter().enumerate() {
        for k in 0..layout.n_columns() {
            if layout.column_group[k] == old_g {
                column_group.push(new_g);
                pm.push(mu[k]);
                pc.push(c[k]);
            }
        }
    }
    let layout = GroupLayout {
        column_group,
        sizes: order.iter().map(|&g| layout.sizes[g]).collect(),
        alternative: order.iter().map(|&g| layout.alternative[g]).collect(),
        n_alternatives: layout.n_alternatives,
    };
    (layout, pm, pc)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lambda_and_selection_commute_with_group_permutations(
        sizes in prop::collection::vec(1usize..4, 2..8),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_groups = sizes.len();
        let alternative: Vec<usize> = (0..n_groups).map(|g| g % 2).collect();
        let column_group: Vec<usize> = sizes.iter().enumerate().flat_map(|(g, &k)| vec![g; k]).collect();
        let d = column_group.len();
        let layout = GroupLayout { column_group, sizes: sizes.clone(), alternative, n_alternatives: 2 };
        let mu = normals(&mut rng, d, 1.0);
        let c: Vec<f64> = (0..d).map(|_| rng.random_range(1e-4..1.0)).collect();
        let mut order: Vec<usize> = (0..n_groups).collect();
        rand::seq::SliceRandom::shuffle(&mut order[..], &mut rng);

        let lam = lambda_optimal(&mu, &c, &layout);
        let (pl, pm, pc) = permute_groups(&layout, &mu, &c, &order);
        let plam = lambda_optimal(&pm, &pc, &pl);
        for (new_g, &old_g) in order.iter().enumerate() {
            prop_assert_eq!(plam.values[new_g], lam.values[old_g]);
        }
        let rule = Selection { threshold: 0.2, ..Default::default() };
        let sel = select_variables(&lam, &layout, &rule);
        let psel = select_variables(&plam, &pl, &rule);
        for alt in 0..2 {
            let mut a: Vec<usize> = sel[alt].clone();
            let mut b: Vec<usize> = psel[alt].iter().map(|&g| order[g]).collect();
            a.sort_unstable();
            b.sort_unstable();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn scales_stay_positive_after_every_step(
        seed in any::<u64>(),
        init_c in 1e-6f64..2.0,
        rate in 1e-3f64..5.0,
        proximal in any::<bool>(),
    ) {
        let (design, choices) = random_problem(seed, 60, &[3, 2, 1], true);
        let rows: Vec<usize> = (0..60).collect();
        let layout = GroupLayout::singletons(6);
        let config = TrainingConfig {
            batch_size: 20,
            init_c,
            proximal,
            seed,
            schedule: Schedule::Adaptive { rate, beta2: 0.999, decay: 1000.0, power: 1.0 },
            ..Default::default()
        };
        let mut state = VariationalState::new(6, &config);
        for _ in 0..50 {
            if step(&mut state, &design, &choices, &rows, &layout, &config).is_err() {
                break;
            }
            prop_assert!(state.c.iter().all(|&c| c > 0.0));
        }
    }
}
