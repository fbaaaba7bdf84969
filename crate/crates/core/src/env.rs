//! CartPole-v1 dynamics with explicit Euler integration.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{contract, Result};

/// Episodic environment with a discrete action set.
///
/// Transitions are pure: the caller owns the state and threads it through.
pub trait Environment {
    type State: Clone + std::fmt::Debug;

    fn obs_dim(&self) -> usize;

    fn action_count(&self) -> usize;

    fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;

    fn step(&self, state: &Self::State, action: usize) -> Result<StepResult<Self::State>>;

    /// Appends the observation for `state` to `out`.
    fn observe(&self, state: &Self::State, out: &mut Vec<f64>);

    /// Largest undiscounted return a single episode can collect.
    fn max_return(&self) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult<S> {
    pub next_state: S,
    pub reward: f64,
    /// Failure condition reached. Takes precedence over `truncated`.
    pub terminated: bool,
    /// Step limit reached without failure.
    pub truncated: bool,
}

impl<S> StepResult<S> {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicsConstants {
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub half_pole_length: f64,
    pub force_magnitude: f64,
    pub dt: f64,
    pub x_threshold: f64,
    pub theta_threshold: f64,
    pub max_episode_steps: u32,
    pub reward_per_step: f64,
}

impl Default for PhysicsConstants {
    fn default() -> Self {
        Self {
            gravity: 9.8,
            cart_mass: 1.0,
            pole_mass: 0.1,
            half_pole_length: 0.5,
            force_magnitude: 10.0,
            dt: 0.02,
            x_threshold: 2.4,
            theta_threshold: 12.0 * PI / 180.0,
            max_episode_steps: 500,
            reward_per_step: 1.0,
        }
    }
}

/// G_max for the adaptive entropy scale: `max_episode_steps * reward_per_step`.
pub fn max_return(constants: &PhysicsConstants) -> f64 {
    f64::from(constants.max_episode_steps) * constants.reward_per_step
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub elapsed_steps: u32,
}

impl CartPoleState {
    pub fn new(x: f64, x_dot: f64, theta: f64, theta_dot: f64) -> Self {
        Self {
            x,
            x_dot,
            theta,
            theta_dot,
            elapsed_steps: 0,
        }
    }

    pub fn observation(&self) -> [f64; 4] {
        [self.x, self.x_dot, self.theta, self.theta_dot]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CartPole {
    pub constants: PhysicsConstants,
}

impl CartPole {
    pub const PUSH_LEFT: usize = 0;
    pub const PUSH_RIGHT: usize = 1;

    pub fn new(constants: PhysicsConstants) -> Self {
        Self { constants }
    }

    /// One explicit-Euler step of the cart-pole equations of motion under
    /// `force`, ignoring failure thresholds and the step limit.
    pub fn integrate(&self, state: &CartPoleState, force: f64) -> CartPoleState {
        let c = &self.constants;
        let total_mass = c.cart_mass + c.pole_mass;
        let pole_mass_length = c.pole_mass * c.half_pole_length;
        let (sin, cos) = state.theta.sin_cos();

        let temp = (force + pole_mass_length * state.theta_dot * state.theta_dot * sin) / total_mass;
        let theta_acc = (c.gravity * sin - cos * temp)
            / (c.half_pole_length * (4.0 / 3.0 - c.pole_mass * cos * cos / total_mass));
        let x_acc = temp - pole_mass_length * theta_acc * cos / total_mass;

        // Positions advance with the pre-update velocities.
        CartPoleState {
            x: state.x + c.dt * state.x_dot,
            x_dot: state.x_dot + c.dt * x_acc,
            theta: state.theta + c.dt * state.theta_dot,
            theta_dot: state.theta_dot + c.dt * theta_acc,
            elapsed_steps: state.elapsed_steps + 1,
        }
    }

    fn out_of_bounds(&self, s: &CartPoleState) -> bool {
        s.x.abs() > self.constants.x_threshold || s.theta.abs() > self.constants.theta_threshold
    }
}

impl Environment for CartPole {
    type State = CartPoleState;

    fn obs_dim(&self) -> usize {
        4
    }

    fn action_count(&self) -> usize {
        2
    }

    fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> CartPoleState {
        let mut draw = || rng.random_range(-0.05..=0.05);
        CartPoleState::new(draw(), draw(), draw(), draw())
    }

    fn step(&self, state: &CartPoleState, action: usize) -> Result<StepResult<CartPoleState>> {
        let c = &self.constants;
        let force = match action {
            Self::PUSH_LEFT => -c.force_magnitude,
            Self::PUSH_RIGHT => c.force_magnitude,
            other => return Err(contract(format!("cartpole action must be 0 or 1, got {other}"))),
        };
        if self.out_of_bounds(state) || state.elapsed_steps >= c.max_episode_steps {
            return Err(contract("cannot step a finished cartpole episode"));
        }
        let next_state = self.integrate(state, force);
        let terminated = self.out_of_bounds(&next_state);
        let truncated = !terminated && next_state.elapsed_steps >= c.max_episode_steps;
        Ok(StepResult {
            next_state,
            reward: c.reward_per_step,
            terminated,
            truncated,
        })
    }

    fn observe(&self, state: &CartPoleState, out: &mut Vec<f64>) {
        out.extend_from_slice(&state.observation());
    }

    fn max_return(&self) -> f64 {
        max_return(&self.constants)
    }
}
