//! Fixtures shared by the criterion benches.

use axppo_core::numeric::init_params;
use axppo_core::rollout::{collect_rollout, compute_gae, EnvCursor};
use axppo_core::{CartPole, Environment, NetworkConfig, ParameterSet, RolloutBuffer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn network() -> (NetworkConfig, ParameterSet) {
    let config = NetworkConfig::cartpole();
    let params = init_params(&config, &mut rng(0));
    (config, params)
}

/// `batch` observations drawn from the range CartPole visits in practice.
pub fn observations(batch: usize) -> Vec<f64> {
    let mut r = rng(1);
    (0..batch * 4).map(|_| r.random_range(-0.2..0.2)).collect()
}

/// A 256-step rollout from a fresh policy, with its GAE outputs.
pub struct UpdateFixture {
    pub config: NetworkConfig,
    pub params: ParameterSet,
    pub buffer: RolloutBuffer,
    pub advantages: Vec<f64>,
    pub targets: Vec<f64>,
}

pub fn update_fixture() -> UpdateFixture {
    let (config, params) = network();
    let env = CartPole::default();
    let mut env_rng = rng(2);
    let cursor = EnvCursor::new(env.reset(&mut env_rng));
    let (buffer, _, _) = collect_rollout(&env, &params, &config, cursor, 256, &mut env_rng, &mut rng(3))
        .expect("fixture rollout");
    let (advantages, targets) = compute_gae(&buffer, 0.99, 0.8).expect("fixture gae");
    UpdateFixture {
        config,
        params,
        buffer,
        advantages,
        targets,
    }
}
