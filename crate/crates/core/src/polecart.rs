//! Double-pole balancing on a cart, neural controllers and the task family
//! over short-pole lengths.
//!
//! Two uniform poles are hinged independently on a cart running on a
//! bounded track. With `l_i` the half-length and `m_i` the mass of pole
//! `i`, the equations of motion are the standard coupled ones obtained
//! from the Lagrangian of the system:
//!
//! ```text
//! x''  = (F - mu_c sgn(x') + sum_i [m_i l_i th_i'^2 sin th_i
//!          - 3/4 m_i cos th_i (g sin th_i - mu_p th_i' / (m_i l_i))])
//!        / (M + sum_i m_i (1 - 3/4 cos^2 th_i))
//! th_i'' = 3 / (4 l_i) (g sin th_i - x'' cos th_i - mu_p th_i' / (m_i l_i))
//! ```
//!
//! Angles are measured from the upright position, positive towards `+x`.
//! Pole 1 is the long pole. Integration is classical RK4 with the force held
//! over each step; the controller acts every `substeps` integration steps.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{MultitaskProblem, TaskDefinition};

/// Hidden units of the controller.
pub const HIDDEN: usize = 10;
/// State variables fed to the controller.
pub const INPUTS: usize = 6;
/// `6 * 10 + 10 + 10 * 1 + 1`.
pub const CONTROLLER_PARAMS: usize = INPUTS * HIDDEN + HIDDEN + HIDDEN + 1;
/// Weight box half-width of the controller search space.
pub const WEIGHT_LIMIT: f64 = 10.0;
/// Divisors applied to `(x, x', th1, th1', th2, th2')` before the network.
pub const STATE_SCALE: [f64; 6] = [2.4, 10.0, 0.6283, 5.0, 0.6283, 5.0];

/// Cart position and velocity, then angle and angular velocity of each pole.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoleCartState {
    pub x: f64,
    pub x_dot: f64,
    pub theta1: f64,
    pub theta1_dot: f64,
    pub theta2: f64,
    pub theta2_dot: f64,
}

impl PoleCartState {
    pub fn to_array(self) -> [f64; 6] {
        [self.x, self.x_dot, self.theta1, self.theta1_dot, self.theta2, self.theta2_dot]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self { x: a[0], x_dot: a[1], theta1: a[2], theta1_dot: a[3], theta2: a[4], theta2_dot: a[5] }
    }

    pub fn mirrored(self) -> Self {
        Self::from_array(self.to_array().map(|v| -v))
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoleCartParams {
    pub gravity: f64,
    pub cart_mass: f64,
    pub long_pole_length: f64,
    pub short_pole_length: f64,
    /// Pole mass per metre of length.
    pub pole_mass_per_length: f64,
    pub cart_friction: f64,
    pub hinge_friction: f64,
    pub force_limit: f64,
    /// Integration step in seconds.
    pub timestep: f64,
    /// Integration steps per control step.
    pub substeps: usize,
    /// Control steps required for success.
    pub max_steps: usize,
    pub track_half_width: f64,
    pub fail_angle: f64,
    /// Initial long-pole angle; every other state variable starts at zero.
    pub initial_theta1: f64,
}

impl PoleCartParams {
    /// Frictionless system with the given short-pole length.
    pub fn with_short_pole(short_pole_length: f64) -> Self {
        Self {
            gravity: 9.8,
            cart_mass: 1.0,
            long_pole_length: 1.0,
            short_pole_length,
            pole_mass_per_length: 0.1,
            cart_friction: 0.0,
            hinge_friction: 0.0,
            force_limit: 10.0,
            timestep: 0.01,
            substeps: 2,
            max_steps: 5000,
            track_half_width: 2.4,
            fail_angle: 36.0 * PI / 180.0,
            initial_theta1: PI / 180.0,
        }
    }

    /// Same system with the classic cart and hinge friction coefficients.
    pub fn with_friction(mut self) -> Self {
        self.cart_friction = 0.0005;
        self.hinge_friction = 0.000002;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(self.short_pole_length > 0.0 && self.short_pole_length < self.long_pole_length) {
            return fail("short pole length must lie in (0, long pole length)");
        }
        if !(self.timestep > 0.0) || self.substeps == 0 || self.max_steps == 0 {
            return fail("timestep, substeps and max_steps must be positive");
        }
        if !(self.cart_mass > 0.0 && self.pole_mass_per_length > 0.0 && self.force_limit > 0.0) {
            return fail("masses and force limit must be positive");
        }
        Ok(())
    }

    /// `(half-length, mass)` of pole 1 (long) and pole 2 (short).
    fn poles(&self) -> [(f64, f64); 2] {
        let pole = |len: f64| (0.5 * len, self.pole_mass_per_length * len);
        [pole(self.long_pole_length), pole(self.short_pole_length)]
    }

    pub fn initial_state(&self) -> PoleCartState {
        PoleCartState { theta1: self.initial_theta1, ..PoleCartState::default() }
    }
}

/// Time derivative of the state under `force`.
pub fn dynamics(state: &PoleCartState, force: f64, params: &PoleCartParams) -> Result<[f64; 6]> {
    let d = derivative(&state.to_array(), force, params);
    if d.iter().all(|v| v.is_finite()) {
        Ok(d)
    } else {
        Err(Error::DynamicsBlowUp)
    }
}

fn derivative(s: &[f64; 6], force: f64, params: &PoleCartParams) -> [f64; 6] {
    let g = params.gravity;
    let poles = params.poles();
    let angles = [(s[2], s[3]), (s[4], s[5])];
    let mut effective_force = 0.0;
    let mut effective_mass = 0.0;
    let mut friction = [0.0; 2];
    let mut trig = [(0.0, 0.0); 2];
    for i in 0..2 {
        let (half, mass) = poles[i];
        let (theta, omega) = angles[i];
        let (sin, cos) = theta.sin_cos();
        trig[i] = (sin, cos);
        friction[i] = params.hinge_friction * omega / (mass * half);
        effective_force += mass * half * omega * omega * sin - 0.75 * mass * cos * (g * sin - friction[i]);
        effective_mass += mass * (1.0 - 0.75 * cos * cos);
    }
    let cart_friction = if s[1] > 0.0 {
        params.cart_friction
    } else if s[1] < 0.0 {
        -params.cart_friction
    } else {
        0.0
    };
    let x_acc = (force - cart_friction + effective_force) / (params.cart_mass + effective_mass);
    let mut out = [s[1], x_acc, s[3], 0.0, s[5], 0.0];
    for i in 0..2 {
        let (half, _) = poles[i];
        let (sin, cos) = trig[i];
        out[3 + 2 * i] = 0.75 / half * (g * sin - x_acc * cos - friction[i]);
    }
    out
}

/// Classical fourth-order Runge-Kutta step for `y' = f(y)`.
pub fn rk4<const N: usize>(y: &[f64; N], h: f64, mut f: impl FnMut(&[f64; N]) -> [f64; N]) -> [f64; N] {
    let shifted = |base: &[f64; N], k: &[f64; N], scale: f64| {
        let mut out = *base;
        out.iter_mut().zip(k).for_each(|(o, d)| *o += scale * d);
        out
    };
    let k1 = f(y);
    let k2 = f(&shifted(y, &k1, 0.5 * h));
    let k3 = f(&shifted(y, &k2, 0.5 * h));
    let k4 = f(&shifted(y, &k3, h));
    let mut out = *y;
    for n in 0..N {
        out[n] += h / 6.0 * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n]);
    }
    out
}

/// One RK4 step of the cart-pole system with `force` held constant.
pub fn rk4_step(state: &PoleCartState, force: f64, h: f64, params: &PoleCartParams) -> Result<PoleCartState> {
    let next = rk4(&state.to_array(), h, |s| derivative(s, force, params));
    if next.iter().all(|v| v.is_finite()) {
        Ok(PoleCartState::from_array(next))
    } else {
        Err(Error::DynamicsBlowUp)
    }
}

/// Kinetic plus potential energy; conserved when friction is zero and no
/// force acts.
pub fn mechanical_energy(state: &PoleCartState, params: &PoleCartParams) -> f64 {
    let s = state.to_array();
    let total_mass = params.cart_mass + params.poles().iter().map(|p| p.1).sum::<f64>();
    let mut kinetic = 0.5 * total_mass * s[1] * s[1];
    let mut potential = 0.0;
    for (i, (half, mass)) in params.poles().into_iter().enumerate() {
        let (theta, omega) = (s[2 + 2 * i], s[3 + 2 * i]);
        kinetic += mass * half * s[1] * omega * theta.cos() + 2.0 / 3.0 * mass * half * half * omega * omega;
        potential += mass * params.gravity * half * theta.cos();
    }
    kinetic + potential
}

/// `(A, b)` of the dynamics linearized at the upright rest state, so that
/// `s' ~ A s + b F` (cart friction omitted).
pub fn linearized(params: &PoleCartParams) -> ([[f64; 6]; 6], [f64; 6]) {
    let g = params.gravity;
    let poles = params.poles();
    let denom = params.cart_mass + poles.iter().map(|p| 0.25 * p.1).sum::<f64>();
    // x'' row
    let mut x_row = [0.0; 6];
    for (i, (half, mass)) in poles.iter().enumerate() {
        x_row[2 + 2 * i] = -0.75 * mass * g / denom;
        x_row[3 + 2 * i] = 0.75 * params.hinge_friction / (half * denom);
    }
    let x_force = 1.0 / denom;
    let mut a = [[0.0; 6]; 6];
    let mut b = [0.0; 6];
    a[0][1] = 1.0;
    a[1] = x_row;
    b[1] = x_force;
    for (i, (half, mass)) in poles.iter().enumerate() {
        let row = 3 + 2 * i;
        a[2 + 2 * i][row] = 1.0;
        let c = 0.75 / half;
        for (col, value) in x_row.iter().enumerate() {
            a[row][col] = -c * value;
        }
        a[row][2 + 2 * i] += c * g;
        a[row][row] -= c * params.hinge_friction / (mass * half);
        b[row] = -c * x_force;
    }
    (a, b)
}

/// Fully connected 6-10-1 tanh network with biases.
///
/// Parameter layout: input weights row by row per hidden unit (60), hidden
/// biases (10), output weights (10), output bias (1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerNetwork {
    params: Vec<f64>,
}

impl ControllerNetwork {
    pub fn from_params(params: &[f64]) -> Result<Self> {
        if params.len() != CONTROLLER_PARAMS {
            return Err(Error::DimensionMismatch { expected: CONTROLLER_PARAMS, got: params.len() });
        }
        Ok(Self { params: params.to_vec() })
    }

    pub fn zeros() -> Self {
        Self { params: alloc::vec![0.0; CONTROLLER_PARAMS] }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], f64) {
        let (w1, rest) = self.params.split_at(INPUTS * HIDDEN);
        let (b1, rest) = rest.split_at(HIDDEN);
        let (w2, rest) = rest.split_at(HIDDEN);
        (w1, b1, w2, rest[0])
    }

    /// Network output in `[-1, 1]` for a normalized input.
    pub fn output(&self, input: &[f64; INPUTS]) -> f64 {
        let (w1, b1, w2, b2) = self.split();
        let mut acc = b2;
        for h in 0..HIDDEN {
            let row = &w1[h * INPUTS..(h + 1) * INPUTS];
            let pre = b1[h] + row.iter().zip(input).map(|(w, v)| w * v).sum::<f64>();
            acc += w2[h] * pre.tanh();
        }
        acc.tanh()
    }

    /// Controller for the mirrored system: `force'(s) = -force(-s)`.
    pub fn mirrored(&self) -> Self {
        let mut params = self.params.clone();
        let bias_start = INPUTS * HIDDEN;
        params[bias_start..bias_start + HIDDEN].iter_mut().for_each(|b| *b = -*b);
        params[CONTROLLER_PARAMS - 1] = -params[CONTROLLER_PARAMS - 1];
        Self { params }
    }
}

/// Force applied by `network` in `state`, within `±force_limit`.
pub fn controller_force(network: &ControllerNetwork, state: &PoleCartState, params: &PoleCartParams) -> f64 {
    let s = state.to_array();
    let mut input = [0.0; INPUTS];
    for k in 0..INPUTS {
        input[k] = s[k] / STATE_SCALE[k];
    }
    params.force_limit * network.output(&input)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCause {
    PoleAngle,
    TrackBounds,
    DynamicsBlowUp,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub steps_balanced: usize,
    pub success: bool,
    pub failure_cause: FailureCause,
}

/// One control step of an episode, for debugging dumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStep {
    pub step: usize,
    pub state: PoleCartState,
    pub force: f64,
}

pub fn simulate_episode(network: &ControllerNetwork, params: &PoleCartParams, initial: &PoleCartState) -> EpisodeResult {
    run_episode(network, params, initial, |_| {})
}

/// Like [`simulate_episode`] but also returns the state and force at every
/// control step.
pub fn simulate_episode_traced(
    network: &ControllerNetwork,
    params: &PoleCartParams,
    initial: &PoleCartState,
) -> (EpisodeResult, Vec<EpisodeStep>) {
    let mut steps = Vec::new();
    let result = run_episode(network, params, initial, |s| steps.push(s));
    (result, steps)
}

fn run_episode(
    network: &ControllerNetwork,
    params: &PoleCartParams,
    initial: &PoleCartState,
    mut observe: impl FnMut(EpisodeStep),
) -> EpisodeResult {
    let mut state = *initial;
    let failed = |steps_balanced, failure_cause| EpisodeResult { steps_balanced, success: false, failure_cause };
    for step in 0..params.max_steps {
        let force = controller_force(network, &state, params);
        observe(EpisodeStep { step, state, force });
        for _ in 0..params.substeps {
            match rk4_step(&state, force, params.timestep, params) {
                Ok(next) => state = next,
                Err(_) => return failed(step, FailureCause::DynamicsBlowUp),
            }
        }
        if state.x.abs() > params.track_half_width {
            return failed(step, FailureCause::TrackBounds);
        }
        if state.theta1.abs() > params.fail_angle || state.theta2.abs() > params.fail_angle {
            return failed(step, FailureCause::PoleAngle);
        }
    }
    EpisodeResult { steps_balanced: params.max_steps, success: true, failure_cause: FailureCause::None }
}

/// Task whose fitness is the number of control steps balanced from the
/// standard initial state, over the weight box `[-10, 10]^81`.
pub fn polecart_task(params: PoleCartParams) -> Result<TaskDefinition> {
    params.validate()?;
    let name = format!("polecart-ls{:.2}", params.short_pole_length);
    let threshold = params.max_steps as f64;
    let initial = params.initial_state();
    let objective = Arc::new(move |w: &[f64]| match ControllerNetwork::from_params(w) {
        Ok(net) => simulate_episode(&net, &params, &initial).steps_balanced as f64,
        Err(_) => f64::NAN,
    });
    Ok(TaskDefinition::symmetric(name, CONTROLLER_PARAMS, WEIGHT_LIMIT, objective).with_success_threshold(threshold))
}

/// One task per short-pole length, all other parameters from `base`.
pub fn make_polecart_tasks(short_pole_lengths: &[f64], base: &PoleCartParams) -> Result<MultitaskProblem> {
    let tasks = short_pole_lengths
        .iter()
        .map(|&l| {
            if !(l > 0.0 && l < 1.0) {
                return Err(Error::InvalidConfig(format!("short pole length {l} outside (0, 1)")));
            }
            polecart_task(PoleCartParams { short_pole_length: l, ..base.clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    MultitaskProblem::new(tasks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn params() -> PoleCartParams {
        PoleCartParams::with_short_pole(0.6)
    }

    #[test]
    fn upright_rest_is_equilibrium() {
        let d = dynamics(&PoleCartState::default(), 0.0, &params()).unwrap();
        assert_eq!(d, [0.0; 6]);
        let next = rk4_step(&PoleCartState::default(), 0.0, 0.01, &params()).unwrap();
        assert_eq!(next, PoleCartState::default());
    }

    #[test]
    fn dynamics_are_odd() {
        let p = params().with_friction();
        let s = PoleCartState { x: 0.3, x_dot: -0.2, theta1: 0.1, theta1_dot: 0.4, theta2: -0.05, theta2_dot: 0.3 };
        let a = dynamics(&s, 3.0, &p).unwrap();
        let b = dynamics(&s.mirrored(), -3.0, &p).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert_eq!(*u, -*v);
        }
    }

    #[test]
    fn leaning_pole_falls_away() {
        let s = PoleCartState { theta1: 0.01, ..Default::default() };
        let d = dynamics(&s, 0.0, &params()).unwrap();
        assert!(d[3] > 0.0);
        assert!(d[1] < 0.0);
    }

    #[test]
    fn rk4_scalar_exponential() {
        let y = rk4(&[1.0], 0.1, |y| [y[0]]);
        let expected = 1.0 + 0.1 / 6.0 * (1.0 + 2.0 * 1.05 + 2.0 * 1.0525 + 1.10525);
        assert!((y[0] - expected).abs() < 1e-15);
        assert!((y[0] - 1.1051708333).abs() < 1e-10);
        assert_eq!(rk4(&[3.0, -1.0], 0.0, |y| *y), [3.0, -1.0]);
    }

    #[test]
    fn zero_controller_outputs_zero() {
        let net = ControllerNetwork::zeros();
        let s = PoleCartState { x: 1.0, theta1: 0.3, ..Default::default() };
        assert_eq!(controller_force(&net, &s, &params()), 0.0);
    }

    #[test]
    fn forward_pass_matches_hand_computation() {
        let mut w = vec![0.0; CONTROLLER_PARAMS];
        // hidden 0 reads x and theta1, hidden 1 reads x_dot; output mixes both
        w[0] = 1.0;
        w[2] = -2.0;
        w[INPUTS + 1] = 0.5;
        w[60] = 0.1;
        w[70] = 2.0;
        w[71] = -1.0;
        w[80] = 0.05;
        let net = ControllerNetwork::from_params(&w).unwrap();
        let s = PoleCartState { x: 1.2, x_dot: 4.0, theta1: 0.2, ..Default::default() };
        let input = [1.2 / 2.4, 4.0 / 10.0, 0.2 / 0.6283, 0.0, 0.0, 0.0];
        let h0 = (0.1 + input[0] - 2.0 * input[2]).tanh();
        let h1 = (0.5 * input[1]).tanh();
        let expected = 10.0 * (0.05 + 2.0 * h0 - h1).tanh();
        assert!((controller_force(&net, &s, &params()) - expected).abs() < 1e-12);
        assert!(ControllerNetwork::from_params(&w[..80]).is_err());
    }

    #[test]
    fn zero_controller_fails() {
        let p = params();
        let r = simulate_episode(&ControllerNetwork::zeros(), &p, &p.initial_state());
        assert!(!r.success);
        assert!(r.steps_balanced < p.max_steps);
        assert_eq!(r.failure_cause, FailureCause::PoleAngle);
    }

    #[test]
    fn task_family() {
        let p = make_polecart_tasks(&[0.6, 0.65, 0.7], &params()).unwrap();
        assert_eq!(p.num_tasks(), 3);
        assert!(p.tasks().iter().all(|t| t.dim() == 81));
        assert_eq!(p.unified_dim(), 81);
        assert_eq!(p.task(0).success_threshold(), Some(5000.0));
        assert!(make_polecart_tasks(&[0.6, 1.2], &params()).is_err());
        assert_eq!(make_polecart_tasks(&[0.6], &params()).unwrap().num_tasks(), 1);
    }
}
