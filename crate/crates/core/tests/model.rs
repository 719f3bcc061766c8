use darap_core::allocator::Allocation;
use darap_core::model::{Model, ModelParams, SceneState, Target};
use darap_core::rng::rng_from_seed;
use proptest::prelude::*;

fn params(q: usize) -> ModelParams<f64> {
    let mut p = ModelParams::table_one(10, 1000.0);
    p.num_cells = q;
    p
}

#[test]
fn candidate_count_matches_binomial_mean() {
    let model = Model::new(params(1000)).unwrap();
    let mut rng = rng_from_seed(1);
    let draws = 10_000;
    let total: usize = (0..draws).map(|_| model.draw_candidate_cells(&mut rng).len()).sum();
    let mean = total as f64 / draws as f64;
    let sd = (1000.0 * 0.01 * 0.99f64).sqrt();
    assert!((mean - 10.0).abs() <= 3.0 * sd / 100.0, "mean {mean}");
}

#[test]
fn initial_scene_is_collision_free_and_sorted() {
    let mut p = params(300);
    p.prior_prob = 0.3;
    let model = Model::new(p).unwrap();
    let mut rng = rng_from_seed(2);
    for _ in 0..200 {
        let s = model.sample_initial_scene(&mut rng);
        assert!(model.is_collision_free(&s));
        assert!(s.cells().windows(2).all(|w| w[0] < w[1]));
    }
}

fn isolated(q: usize, cell: usize) -> SceneState<f64> {
    SceneState {
        stage: 1,
        num_cells: q,
        targets: vec![Target { cell, amplitude: 1.0 }],
    }
}

#[test]
fn move_frequencies_follow_the_kernel() {
    let model = Model::new(params(1000)).unwrap();
    let mut rng = rng_from_seed(3);
    let start = isolated(1000, 500);
    let n = 100_000;
    let mut counts = [0usize; 3];
    for _ in 0..n {
        let next = model.step_scene(&start, &mut rng);
        match next.targets[0].cell {
            499 => counts[0] += 1,
            500 => counts[1] += 1,
            501 => counts[2] += 1,
            c => panic!("jumped to {c}"),
        }
    }
    for c in counts {
        assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() < 0.005, "{counts:?}");
    }
}

#[test]
fn torus_moves_reach_all_four_neighbours() {
    let mut p = params(100);
    p.neighbor_count = 4;
    p.stay_prob = 0.2;
    let model = Model::new(p).unwrap();
    let mut rng = rng_from_seed(4);
    let start = isolated(100, 55);
    let n = 100_000;
    let mut counts = std::collections::BTreeMap::new();
    for _ in 0..n {
        *counts.entry(model.step_scene(&start, &mut rng).targets[0].cell).or_insert(0usize) += 1;
    }
    assert_eq!(counts.keys().copied().collect::<Vec<_>>(), vec![45, 54, 55, 56, 65]);
    for (cell, c) in counts {
        let expect = 0.2;
        let sd = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!((c as f64 / n as f64 - expect).abs() < 3.0 * sd, "cell {cell}: {c}");
    }
}

#[test]
fn survival_rate_matches_death_probability() {
    let mut p = params(1000);
    p.death_prob = 0.2;
    let model = Model::new(p).unwrap();
    let mut rng = rng_from_seed(5);
    let start = isolated(1000, 10);
    let n = 100_000;
    let survived = (0..n).filter(|_| !model.step_scene(&start, &mut rng).is_empty()).count();
    let sd = (0.8 * 0.2 / n as f64).sqrt();
    assert!((survived as f64 / n as f64 - 0.8).abs() < 3.0 * sd);
}

#[test]
fn certain_birth_adds_one_target_per_stage() {
    let mut p = params(50);
    p.birth_prob = 1.0;
    let model = Model::new(p).unwrap();
    let mut rng = rng_from_seed(6);
    let mut s = SceneState::empty(50, 1);
    for k in 1..=5 {
        s = model.step_scene(&s, &mut rng);
        assert_eq!(s.len(), k);
        assert!(model.is_collision_free(&s));
    }
}

#[test]
fn static_amplitudes_are_constant_while_targets_move() {
    let mut p = params(400);
    p.amp_walk_std = 0.0;
    p.prior_prob = 0.05;
    let model = Model::new(p).unwrap();
    let mut rng = rng_from_seed(7);
    let s0 = model.sample_initial_scene(&mut rng);
    let mut amps: Vec<f64> = s0.targets.iter().map(|t| t.amplitude).collect();
    amps.sort_by(f64::total_cmp);
    let mut s = s0;
    for _ in 0..30 {
        s = model.step_scene(&s, &mut rng);
        let mut now: Vec<f64> = s.targets.iter().map(|t| t.amplitude).collect();
        now.sort_by(f64::total_cmp);
        assert_eq!(now, amps);
    }
}

#[test]
fn identical_seeds_give_identical_trajectories() {
    let mut p = params(500);
    p.birth_prob = 0.3;
    p.death_prob = 0.01;
    let model = Model::new(p).unwrap();
    let run = |seed| {
        let mut rng = rng_from_seed(seed);
        let mut s = model.sample_initial_scene(&mut rng);
        let mut all = vec![s.clone()];
        for _ in 0..20 {
            s = model.step_scene(&s, &mut rng);
            all.push(s.clone());
        }
        all
    };
    assert_eq!(run(9), run(9));
    assert_ne!(run(9), run(10));
}

#[test]
fn observation_variance_is_noise_variance() {
    let model = Model::new(params(1)).unwrap();
    let scene = isolated(1, 0);
    let alloc = Allocation::from_lambda(1, vec![4.0]);
    let mut rng = rng_from_seed(8);
    let n = 100_000;
    let ys: Vec<f64> = (0..n).map(|_| model.observe(&scene, &alloc, &mut rng).values[0]).collect();
    let mean = ys.iter().sum::<f64>() / n as f64;
    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!((mean - 2.0).abs() < 0.02);
    assert!((var - 1.0).abs() < 0.02, "var {var}");
}

#[test]
fn pure_noise_without_target() {
    let model = Model::new(params(1)).unwrap();
    let scene = SceneState::empty(1, 1);
    let alloc = Allocation::from_lambda(1, vec![0.0]);
    let mut rng = rng_from_seed(9);
    let n = 50_000;
    let ys: Vec<f64> = (0..n).map(|_| model.observe(&scene, &alloc, &mut rng).values[0]).collect();
    let mean = ys.iter().sum::<f64>() / n as f64;
    let var = ys.iter().map(|y| y * y).sum::<f64>() / n as f64;
    assert!(mean.abs() < 0.02 && (var - 1.0).abs() < 0.03);
}

#[test]
fn invalid_parameters_are_rejected() {
    let mut p = params(10);
    p.stay_prob = 1.5;
    assert!(Model::new(p).is_err());
    let mut p = params(10);
    p.stage_weights = vec![0.0; 10];
    assert!(Model::new(p).is_err());
    let mut p = params(10);
    p.noise_var = 0.0;
    assert!(Model::new(p).is_err());
    let mut p = params(10);
    p.budgets.pop();
    assert!(Model::new(p).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scenes_stay_collision_free(
        q in 9usize..120,
        torus in any::<bool>(),
        p0 in 0.0f64..0.6,
        pi0 in 0.0f64..1.0,
        alpha in 0.0f64..0.3,
        beta in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let mut p = params(q);
        if torus {
            let side = (q as f64).sqrt().floor() as usize;
            p.num_cells = side * side;
            p.neighbor_count = 4;
        }
        p.prior_prob = p0;
        p.stay_prob = pi0;
        p.death_prob = alpha;
        p.birth_prob = beta;
        let model = Model::new(p).unwrap();
        let mut rng = rng_from_seed(seed);
        let mut s = model.sample_initial_scene(&mut rng);
        for _ in 0..25 {
            s = model.step_scene(&s, &mut rng);
            prop_assert!(model.is_collision_free(&s));
            let occ = s.occupancy();
            prop_assert_eq!(occ.iter().filter(|o| **o).count(), s.len());
        }
    }
}
