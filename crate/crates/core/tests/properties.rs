//! Property tests over randomly generated inputs.

use mtbench::agent::gae::{compute_gae, gae_path};
use mtbench::agent::{conjugate_gradient, trpo_update, GaussianPolicy, Path, PolicyArch, TrajectoryBatch, TrpoConfig};
use mtbench::env::{registry, BoxSpace, Environment, RngState};
use mtbench::locomotion::runner::BASE_PARTS;
use mtbench::locomotion::{
    build_runner, torso_sense, BodyPart, ChainState, PartScale, SensorConfig, VariationParams, WallBox,
};
use mtbench::nav2d::{disc_overlaps_obstacle, NavEnv, NavObsMode, NavVariation, AGENT_RADIUS};
use mtbench::protocol::{EnvRecord, EvalStats, GroupReport};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

/// Direct O(T²) sum of discounted TD errors, with V = 0 past the end.
fn gae_oracle(r: &[f64], v: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    let t_max = r.len();
    (0..t_max)
        .map(|t| {
            (t..t_max)
                .map(|k| {
                    let next = if k + 1 < t_max { v[k + 1] } else { 0.0 };
                    (gamma * lambda).powi((k - t) as i32) * (r[k] + gamma * next - v[k])
                })
                .sum()
        })
        .collect()
}

fn nav_mode() -> impl Strategy<Value = NavObsMode> {
    prop::sample::select(NavObsMode::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn gae_matches_oracle(
        episode in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..60),
        gamma in 0.0f64..=1.0,
        lambda in 0.0f64..=1.0,
    ) {
        let (r, v): (Vec<f64>, Vec<f64>) = episode.into_iter().unzip();
        let fast = gae_path(&r, &v, gamma, lambda);
        for (a, b) in fast.iter().zip(gae_oracle(&r, &v, gamma, lambda)) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn batched_gae_is_per_episode(lens in prop::collection::vec(1usize..20, 1..6), seed in any::<u64>()) {
        let mut rng = RngState::new(seed);
        let n: usize = lens.iter().sum();
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut bounds = vec![0];
        for l in &lens {
            bounds.push(bounds.last().unwrap() + l);
        }
        let all = compute_gae(&r, &v, &bounds, 0.99, 0.95);
        for w in bounds.windows(2) {
            prop_assert_eq!(&all[w[0]..w[1]], &gae_path(&r[w[0]..w[1]], &v[w[0]..w[1]], 0.99, 0.95)[..]);
        }
    }

    #[test]
    fn cg_solves_spd_systems(n in 1usize..12, seed in any::<u64>()) {
        let mut rng = RngState::new(seed);
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = &m * m.transpose() + DMatrix::identity(n, n);
        let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let direct = a.clone().lu().solve(&b).unwrap();
        let x = conjugate_gradient(|v| (&a * DVector::from_column_slice(v)).as_slice().to_vec(), b.as_slice(), 4 * n, 1e-12)
            .unwrap();
        prop_assert!((DVector::from_vec(x) - direct).norm() <= 1e-8);
    }

    #[test]
    fn clamp_lands_in_the_box_and_is_idempotent(x in prop::collection::vec(-1e3f64..1e3, 3)) {
        let space = BoxSpace::new(vec![-1.0, 0.0, -5.0], vec![1.0, 2.0, 5.0]).unwrap();
        let (c, changed) = space.clamp(&x);
        prop_assert!(space.contains(&c));
        prop_assert_eq!(changed, !space.contains(&x));
        prop_assert_eq!(space.clamp(&c), (c.clone(), false));
    }

    #[test]
    fn runner_mass_follows_part_scales(scales in prop::collection::vec(0.25f64..2.0, 4)) {
        let mut params = VariationParams::default();
        for (part, s) in BodyPart::ALL.iter().zip(&scales) {
            params.part_scales.insert(*part, PartScale { mass_scale: *s, width_scale: 1.0 });
        }
        let expected: f64 = BodyPart::ALL.iter().zip(&scales).map(|(p, s)| BASE_PARTS[p.index()].mass * s).sum();
        prop_assert!((build_runner(&params).unwrap().total_mass() - expected).abs() <= 1e-12);
    }

    #[test]
    fn torso_readouts_are_bounded(
        x in -2.0f64..6.0, z in 0.2f64..2.0, pitch in -1.5f64..1.5,
        x0 in 1.8f64..3.8, beams in 1usize..16,
    ) {
        let config = SensorConfig { n_beams: beams, ..SensorConfig::default() };
        let state = ChainState { q: vec![x, z, pitch, 0.0, 0.0, 0.0], qdot: vec![0.0; 6], time: 0.0 };
        let wall = WallBox { x0, thickness: 0.2, height: 0.5 };
        let r = torso_sense(&config, &state, Some(&wall));
        prop_assert_eq!(r.len(), beams);
        prop_assert!(r.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(torso_sense(&config, &state, None).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn nav_agent_never_overlaps_obstacles(
        map in 0usize..10, goal in 0usize..3, mode in nav_mode(),
        seed in any::<u64>(),
        actions in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..200),
    ) {
        let mut env = NavEnv::new("prop", NavVariation { map, goal, mode }, 1000, seed).unwrap();
        env.reset();
        for (ax, ay) in actions {
            let s = env.step(&[ax, ay]).unwrap();
            prop_assert!(!disc_overlaps_obstacle(env.grid(), env.state().position, AGENT_RADIUS));
            prop_assert_eq!(s.observation.len(), env.observation_space().dim());
            if s.done {
                break;
            }
        }
    }

    #[test]
    fn nav_return_is_accounted_by_steps_collisions_and_goal(
        map in 0usize..10, goal in 0usize..3, seed in any::<u64>(),
        actions in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..300),
    ) {
        let mut env = NavEnv::new("prop", NavVariation { map, goal, mode: NavObsMode::State }, 1000, seed).unwrap();
        env.reset();
        let (mut ret, mut steps, mut reached) = (0.0, 0usize, false);
        for (ax, ay) in actions {
            let s = env.step(&[ax, ay]).unwrap();
            ret += s.reward;
            steps += 1;
            reached = s.info["reached_goal"] == 1.0;
            if s.done {
                break;
            }
        }
        let expected = -(steps as f64) - 5.0 * env.collisions() as f64 + if reached { 10.0 } else { 0.0 };
        prop_assert_eq!(ret, expected);
    }

    #[test]
    fn every_summary_recomputes_from_its_returns(
        rows in prop::collection::vec(prop::collection::vec(-1e4f64..1e4, 1..25), 1..6),
    ) {
        let mut report = GroupReport {
            format: GroupReport::FORMAT.into(),
            group: "prop".into(),
            description: String::new(),
            physics: "planar-v1".into(),
            seed: 0,
            config_hash: TrpoConfig::default().hash(),
            config: TrpoConfig::default(),
            iterations_per_env: 1,
            eval_rollouts: 1,
            complete: true,
            failure: None,
            envs: rows
                .iter()
                .enumerate()
                .map(|(i, r)| EnvRecord {
                    fully_trained: Some(EvalStats::from_returns(r.clone())),
                    after_env_training: Some(EvalStats::from_returns(r.iter().map(|x| x * 0.5).collect())),
                    ..EnvRecord::new(&format!("E{i}-v0"))
                })
                .collect(),
            totals: Default::default(),
        };
        report.recompute_totals();
        let parsed = GroupReport::from_json(&report.to_json()).unwrap();
        prop_assert_eq!(&parsed, &report);
        let means: Vec<f64> = report.envs.iter().map(|e| e.fully_trained.as_ref().unwrap().mean).collect();
        let expected = means.iter().sum::<f64>() / means.len() as f64;
        prop_assert_eq!(report.totals.fully_trained.as_ref().unwrap().mean, expected);

        // Table cells are the report numbers at two decimals.
        let table = report.render_table();
        for e in &report.envs {
            let line = table.lines().find(|l| l.starts_with(&e.env_id)).unwrap();
            let cells: Vec<&str> = line.split(" | ").map(str::trim).collect();
            let ft = e.fully_trained.as_ref().unwrap();
            prop_assert_eq!(cells[1], format!("{:.2} ± {:.2}", ft.mean, ft.std));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    /// Accepted steps satisfy both line-search conditions; anything else
    /// returns the incoming parameters untouched.
    #[test]
    fn trpo_steps_respect_the_trust_region(seed in any::<u64>(), kl_step in 1e-4f64..0.05) {
        let mut rng = RngState::new(seed);
        let space = BoxSpace::uniform(2, -1.0, 1.0);
        let p = GaussianPolicy::new(PolicyArch::new(3, 2, &[6]), &space, &mut rng).unwrap();
        let paths: Vec<Path> = (0..4)
            .map(|_| {
                let mut path = Path::default();
                for _ in 0..25 {
                    let o: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let a = p.sample(&o, &mut rng).unwrap();
                    path.log_probs.push(p.log_prob(&o, &a).unwrap());
                    path.rewards.push(-a.iter().map(|x| (x - o[0]).powi(2)).sum::<f64>());
                    path.observations.push(o);
                    path.actions.push(a);
                }
                path
            })
            .collect();
        let mut batch = TrajectoryBatch::from_paths(&paths, 25);
        batch.process(&mut Default::default(), 0.99, 1.0);
        let config = TrpoConfig { kl_step, ..TrpoConfig::default() };
        let (next, d) = trpo_update(&p, &batch, &config).unwrap();
        match d.status {
            mtbench::agent::UpdateStatus::Accepted => {
                prop_assert!(d.kl <= kl_step);
                prop_assert!(d.surrogate_after > d.surrogate_before);
            }
            _ => prop_assert_eq!(next.params, p.params),
        }
    }
}

#[test]
fn nav_random_walk_of_1e5_steps_stays_in_free_space() {
    let mut rng = RngState::new(77);
    let mut steps = 0;
    let mut env_index = 0u64;
    while steps < 100_000 {
        let v =
            NavVariation { map: (env_index % 10) as usize, goal: (env_index % 3) as usize, mode: NavObsMode::State };
        let mut env = NavEnv::new("walk", v, 1000, env_index).unwrap();
        env.reset();
        loop {
            let a = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let s = env.step(&a).unwrap();
            steps += 1;
            assert!(!disc_overlaps_obstacle(env.grid(), env.state().position, AGENT_RADIUS));
            if s.done {
                break;
            }
        }
        env_index += 1;
    }
}

#[test]
fn nav_observations_are_pure_functions_of_state() {
    for id in ["State-Based-Navigation-2d-Map3-Goal1-v0", "Image-Based-Navigation-2d-Map3-Goal1-v0"] {
        let mut a = registry().make(id, 5).unwrap();
        let mut b = registry().make(id, 5).unwrap();
        assert_eq!(a.reset(), b.reset());
        for k in 0..50 {
            let act = [(k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()];
            assert_eq!(a.step(&act).unwrap(), b.step(&act).unwrap());
        }
    }
}
