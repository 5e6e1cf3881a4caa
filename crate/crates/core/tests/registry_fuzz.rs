//! Every registered environment under random actions.

use mtbench::env::{registry, EnvError, Environment, Family, RngState, StepResult};
use rand::Rng;

fn random_action(env: &dyn Environment, rng: &mut RngState) -> Vec<f64> {
    let s = env.action_space();
    // Deliberately overshoot the box to exercise clamping.
    s.low().iter().zip(s.high()).map(|(lo, hi)| rng.random_range(1.2 * lo..=1.2 * hi)).collect()
}

#[test]
fn observations_match_declared_dimension() {
    for spec in registry().list(None) {
        let mut env = registry().make(&spec.id, 3).unwrap();
        let dim = env.observation_space().dim();
        assert_eq!(env.observation_shape().iter().product::<usize>(), dim, "{}", spec.id);
        let mut rng = RngState::new(11);
        assert_eq!(env.reset().len(), dim, "{}", spec.id);
        for _ in 0..10 {
            let a = random_action(env.as_ref(), &mut rng);
            let s = env.step(&a).unwrap();
            assert_eq!(s.observation.len(), dim, "{}", spec.id);
            if s.done {
                env.reset();
            }
        }
    }
}

#[test]
fn rewards_and_observations_stay_finite_for_1000_steps() {
    for spec in registry().list(None) {
        let mut env = registry().make(&spec.id, 5).unwrap();
        let mut rng = RngState::new(13);
        env.reset();
        for t in 0..1000 {
            let a = random_action(env.as_ref(), &mut rng);
            let s = env.step(&a).unwrap();
            assert!(s.reward.is_finite(), "{} step {t}: reward {}", spec.id, s.reward);
            assert!(s.observation.iter().all(|v| v.is_finite()), "{} step {t}", spec.id);
            if s.done {
                env.reset();
            }
        }
    }
}

fn replay(id: &str, seed: u64, steps: usize) -> Vec<(Vec<f64>, StepResult)> {
    let mut env = registry().make(id, seed).unwrap();
    let mut rng = RngState::new(99);
    let mut out = Vec::new();
    let mut obs = env.reset();
    for _ in 0..steps {
        let a = random_action(env.as_ref(), &mut rng);
        let s = env.step(&a).unwrap();
        let done = s.done;
        out.push((obs, s.clone()));
        obs = if done { env.reset() } else { s.observation };
    }
    out
}

fn bits(rows: &[(Vec<f64>, StepResult)]) -> Vec<u64> {
    rows.iter()
        .flat_map(|(o, s)| {
            o.iter()
                .chain(&s.observation)
                .chain(std::iter::once(&s.reward))
                .map(|v| v.to_bits())
                .chain(std::iter::once(s.done as u64))
                .collect::<Vec<_>>()
        })
        .collect()
}

#[test]
fn fixed_seed_and_actions_are_bit_identical() {
    for spec in registry().list(None) {
        assert_eq!(bits(&replay(&spec.id, 21, 120)), bits(&replay(&spec.id, 21, 120)), "{}", spec.id);
    }
}

#[test]
fn stochastic_families_depend_on_the_seed() {
    for id in ["Limited-Range-Based-Navigation-2d-Map0-Goal0-v0", "HopperWall-v0", "PusherMovingGoal-v0"] {
        assert_ne!(bits(&replay(id, 1, 30)), bits(&replay(id, 2, 30)), "{id}");
    }
}

#[test]
fn step_after_done_and_wrong_dimension_are_errors() {
    for spec in registry().list(None).into_iter().step_by(7) {
        let mut env = registry().make(&spec.id, 0).unwrap();
        let a = vec![0.0; env.action_space().dim()];
        assert_eq!(env.step(&a).unwrap_err(), EnvError::EpisodeFinished, "{}", spec.id);
        env.reset();
        assert!(matches!(env.step(&[0.0; 9]), Err(EnvError::DimensionMismatch { .. })), "{}", spec.id);
        let mut done = false;
        for _ in 0..env.horizon() {
            if env.step(&a).unwrap().done {
                done = true;
                break;
            }
        }
        assert!(done, "{} never finished within its horizon", spec.id);
        assert_eq!(env.step(&a).unwrap_err(), EnvError::EpisodeFinished);
    }
}

#[test]
fn family_counts() {
    assert_eq!(registry().list(Some(Family::Nav2d)).len(), 150);
    assert_eq!(registry().list(Some(Family::Runner)).len(), 15);
    assert_eq!(registry().list(Some(Family::Arm)).len(), 4);
}
