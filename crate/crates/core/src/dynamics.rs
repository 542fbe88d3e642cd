//! Rigid-body quadrotor dynamics, the rotor-to-wrench mixer, and a fixed-step
//! RK4 integrator with SO(3) drift correction.
//!
//! The model is the standard SE(3) rigid body: position/velocity in the
//! inertial frame, a body-to-inertial rotation matrix, and body-frame angular
//! velocity. Net thrust acts along body z; gravity along inertial -z.

use crate::se3::{self, hat, Mat3, RotationMatrix, Se3Error, Vec3};
use nalgebra::{Matrix4, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Magnitude at which integration is declared divergent.
const DIVERGENCE_LIMIT: f64 = 1e8;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("integration diverged at step {step}: a state component left ±{limit:.1e}")]
    IntegrationDiverged { step: usize, limit: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("trajectory format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Se3(#[from] Se3Error),
}

/// Physical parameters of the vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadParams {
    /// Mass in kg.
    pub mass: f64,
    /// Body-frame inertia matrix in kg·m² (diagonal for this vehicle).
    pub inertia: Mat3,
    /// Moment arm from center of mass to each rotor, m.
    pub arm: f64,
    /// Thrust-to-torque ratio of each rotor.
    pub torque_coeff: f64,
    /// Gravitational acceleration, m/s².
    pub gravity: f64,
}

impl Default for QuadParams {
    fn default() -> Self {
        QuadParams {
            mass: 4.34,
            inertia: Mat3::from_diagonal(&Vec3::new(0.0820, 0.0845, 0.1377)),
            arm: 0.315,
            torque_coeff: 8e-4,
            gravity: 9.81,
        }
    }
}

impl QuadParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.mass > 0.0) {
            return Err(DynamicsError::InvalidParams("mass must be positive".into()));
        }
        if !(self.arm > 0.0) || !(self.gravity > 0.0) {
            return Err(DynamicsError::InvalidParams(
                "arm and gravity must be positive".into(),
            ));
        }
        let sym = (self.inertia - self.inertia.transpose()).norm();
        let eig = self.inertia.symmetric_eigenvalues();
        if sym > 1e-12 || eig.min() <= 0.0 {
            return Err(DynamicsError::InvalidParams(
                "inertia must be symmetric positive definite".into(),
            ));
        }
        Ok(())
    }

    /// Thrust that balances gravity: `m·g`.
    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity
    }
}

/// Full state on SE(3) × R⁶.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadState {
    /// Position in the inertial frame, m.
    pub position: Vec3,
    /// Velocity in the inertial frame, m/s.
    pub velocity: Vec3,
    /// Body-to-inertial rotation.
    pub rotation: RotationMatrix,
    /// Angular velocity in the body frame, rad/s.
    pub omega: Vec3,
}

impl QuadState {
    /// At rest at the origin with identity attitude.
    pub fn hover() -> Self {
        QuadState {
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
            rotation: RotationMatrix::identity(),
            omega: Vec3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.rotation.matrix().iter().all(|v| v.is_finite())
            && self.omega.iter().all(|v| v.is_finite())
    }
}

/// Net thrust along body z plus body-frame moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInput {
    /// Net thrust, N.
    pub thrust: f64,
    /// Body moments, N·m.
    pub moment: Vec3,
}

impl ControlInput {
    pub fn zero() -> Self {
        ControlInput {
            thrust: 0.0,
            moment: Vec3::zeros(),
        }
    }

    pub fn new(thrust: f64, moment: Vec3) -> Self {
        ControlInput { thrust, moment }
    }

    /// Order used everywhere a 4-vector form is needed: `(f_t, M1, M2, M3)`.
    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.thrust, self.moment.x, self.moment.y, self.moment.z)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        ControlInput {
            thrust: v[0],
            moment: Vec3::new(v[1], v[2], v[3]),
        }
    }

    pub fn clamped(&self, limits: &ActuatorLimits) -> Self {
        ControlInput {
            thrust: self.thrust.clamp(limits.thrust_min, limits.thrust_max),
            moment: Vec3::new(
                self.moment.x.clamp(-limits.moment_abs_max.x, limits.moment_abs_max.x),
                self.moment.y.clamp(-limits.moment_abs_max.y, limits.moment_abs_max.y),
                self.moment.z.clamp(-limits.moment_abs_max.z, limits.moment_abs_max.z),
            ),
        }
    }
}

/// Per-rotor thrusts, N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorForces {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub f4: f64,
}

impl RotorForces {
    pub fn new(f1: f64, f2: f64, f3: f64, f4: f64) -> Self {
        RotorForces { f1, f2, f3, f4 }
    }

    fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.f1, self.f2, self.f3, self.f4)
    }
}

/// Box bounds on the control input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorLimits {
    pub thrust_min: f64,
    pub thrust_max: f64,
    /// Symmetric bound per moment axis.
    pub moment_abs_max: Vec3,
}

impl ActuatorLimits {
    /// Default envelope: thrust in `[0, 2·m·g]`, moments within ±5 N·m.
    pub fn for_params(params: &QuadParams) -> Self {
        ActuatorLimits {
            thrust_min: 0.0,
            thrust_max: 2.0 * params.hover_thrust(),
            moment_abs_max: Vec3::new(5.0, 5.0, 5.0),
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if self.thrust_min >= self.thrust_max {
            return Err(DynamicsError::InvalidParams(
                "thrust_min must be below thrust_max".into(),
            ));
        }
        if self.moment_abs_max.min() <= 0.0 {
            return Err(DynamicsError::InvalidParams(
                "moment_abs_max must be positive componentwise".into(),
            ));
        }
        Ok(())
    }

    pub fn contains(&self, u: &ControlInput, tol: f64) -> bool {
        u.thrust >= self.thrust_min - tol
            && u.thrust <= self.thrust_max + tol
            && (0..3).all(|i| u.moment[i].abs() <= self.moment_abs_max[i] + tol)
    }
}

/// Time derivative of the full state. `r_dot` is a raw matrix: the flow
/// leaves SO(3) infinitesimally and the integrator projects back.
#[derive(Debug, Clone, Copy)]
pub struct StateDerivative {
    pub p_dot: Vec3,
    pub v_dot: Vec3,
    pub r_dot: Mat3,
    pub w_dot: Vec3,
}

/// The 4×4 map from per-rotor thrusts to `(f_t, M1, M2, M3)`.
///
/// Rotors 1 and 3 spin clockwise, 2 and 4 counterclockwise; rotors sit on
/// the body x/y axes at distance `d`.
#[rustfmt::skip]
pub fn mixer_matrix(params: &QuadParams) -> Matrix4<f64> {
    let d = params.arm;
    let c = params.torque_coeff;
    Matrix4::new(
        1.0, 1.0, 1.0, 1.0,
        0.0,  -d, 0.0,   d,
          d, 0.0,  -d, 0.0,
         -c,   c,  -c,   c,
    )
}

/// Net thrust and moments produced by the four rotors.
pub fn mixer(rotors: &RotorForces, params: &QuadParams) -> ControlInput {
    let u = mixer_matrix(params) * rotors.as_vector();
    ControlInput::from_vector(&u)
}

/// Per-rotor thrusts realizing a commanded wrench. The mixer matrix is
/// nonsingular whenever `d > 0` and `c_tau > 0`.
pub fn inverse_mixer(u: &ControlInput, params: &QuadParams) -> RotorForces {
    let inv = mixer_matrix(params)
        .try_inverse()
        .expect("mixer matrix is invertible for valid params");
    let f = inv * u.as_vector();
    RotorForces::new(f[0], f[1], f[2], f[3])
}

/// Continuous-time equations of motion:
///
/// ```text
/// ṗ = v
/// v̇ = (1/m) R (0, 0, f_t)ᵀ - (0, 0, g)ᵀ
/// Ṙ = R ω̂
/// ω̇ = J⁻¹ (M - ω × Jω)
/// ```
pub fn dynamics(x: &QuadState, u: &ControlInput, params: &QuadParams) -> StateDerivative {
    deriv_raw(
        &x.velocity,
        x.rotation.matrix(),
        &x.omega,
        u,
        params,
        &params
            .inertia
            .try_inverse()
            .expect("inertia is SPD, hence invertible"),
    )
}

fn deriv_raw(
    v: &Vec3,
    r: &Mat3,
    w: &Vec3,
    u: &ControlInput,
    params: &QuadParams,
    inertia_inv: &Mat3,
) -> StateDerivative {
    let thrust_body = Vec3::new(0.0, 0.0, u.thrust);
    StateDerivative {
        p_dot: *v,
        v_dot: r * thrust_body / params.mass - Vec3::new(0.0, 0.0, params.gravity),
        r_dot: r * hat(*w),
        w_dot: inertia_inv * (u.moment - w.cross(&(params.inertia * w))),
    }
}

/// One classical RK4 step with the input held constant (zero-order hold),
/// followed by polar projection of the attitude back onto SO(3).
pub fn step(
    x: &QuadState,
    u: &ControlInput,
    params: &QuadParams,
    dt: f64,
) -> Result<QuadState, DynamicsError> {
    step_inner(x, u, params, dt, 0)
}

fn step_inner(
    x: &QuadState,
    u: &ControlInput,
    params: &QuadParams,
    dt: f64,
    step_index: usize,
) -> Result<QuadState, DynamicsError> {
    assert!(dt > 0.0, "step size must be positive");
    let j_inv = params
        .inertia
        .try_inverse()
        .expect("inertia is SPD, hence invertible");

    let (p0, v0, r0, w0) = (x.position, x.velocity, *x.rotation.matrix(), x.omega);

    let eval = |p: Vec3, v: Vec3, r: Mat3, w: Vec3| -> (Vec3, Vec3, Mat3, Vec3) {
        let _ = p;
        let d = deriv_raw(&v, &r, &w, u, params, &j_inv);
        (d.p_dot, d.v_dot, d.r_dot, d.w_dot)
    };

    let k1 = eval(p0, v0, r0, w0);
    let k2 = eval(
        p0 + 0.5 * dt * k1.0,
        v0 + 0.5 * dt * k1.1,
        r0 + 0.5 * dt * k1.2,
        w0 + 0.5 * dt * k1.3,
    );
    let k3 = eval(
        p0 + 0.5 * dt * k2.0,
        v0 + 0.5 * dt * k2.1,
        r0 + 0.5 * dt * k2.2,
        w0 + 0.5 * dt * k2.3,
    );
    let k4 = eval(
        p0 + dt * k3.0,
        v0 + dt * k3.1,
        r0 + dt * k3.2,
        w0 + dt * k3.3,
    );

    let sixth = dt / 6.0;
    let p = p0 + sixth * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
    let v = v0 + sixth * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    let r_raw = r0 + sixth * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2);
    let w = w0 + sixth * (k1.3 + 2.0 * k2.3 + 2.0 * k3.3 + k4.3);

    let in_bounds = |val: f64| val.is_finite() && val.abs() <= DIVERGENCE_LIMIT;
    if !(p.iter().all(|&c| in_bounds(c))
        && v.iter().all(|&c| in_bounds(c))
        && r_raw.iter().all(|&c| in_bounds(c))
        && w.iter().all(|&c| in_bounds(c)))
    {
        return Err(DynamicsError::IntegrationDiverged {
            step: step_index,
            limit: DIVERGENCE_LIMIT,
        });
    }

    let rotation = se3::project_to_so3(&r_raw).map_err(|_| DynamicsError::IntegrationDiverged {
        step: step_index,
        limit: DIVERGENCE_LIMIT,
    })?;

    Ok(QuadState {
        position: p,
        velocity: v,
        rotation,
        omega: w,
    })
}

/// Discrete trajectory at uniform sample time: one more state than inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t_s: f64,
    pub states: Vec<QuadState>,
    pub inputs: Vec<ControlInput>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Roll the plant forward under a known input sequence.
pub fn simulate(
    x0: &QuadState,
    inputs: &[ControlInput],
    params: &QuadParams,
    t_s: f64,
) -> Result<Trajectory, DynamicsError> {
    assert!(!inputs.is_empty(), "input sequence must be nonempty");
    let mut states = Vec::with_capacity(inputs.len() + 1);
    states.push(*x0);
    for (k, u) in inputs.iter().enumerate() {
        let next = step_inner(states.last().unwrap(), u, params, t_s, k)?;
        states.push(next);
    }
    Ok(Trajectory {
        t_s,
        states,
        inputs: inputs.to_vec(),
    })
}

/// Gaussian excitation over `(f_t, M1, M2, M3)` with diagonal covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputDistribution {
    pub mean: [f64; 4],
    /// Per-channel variances (covariance diagonal).
    pub cov_diag: [f64; 4],
}

impl InputDistribution {
    pub fn new(mean: [f64; 4], cov_diag: [f64; 4]) -> Self {
        assert!(
            cov_diag.iter().all(|&v| v >= 0.0),
            "variances must be nonnegative"
        );
        InputDistribution { mean, cov_diag }
    }
}

/// I.i.d. Gaussian input sequence, deterministic for a given seed.
pub fn sample_random_inputs(n_steps: usize, dist: &InputDistribution, seed: u64) -> Vec<ControlInput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_random_inputs_with(n_steps, dist, &mut rng)
}

/// Same as [`sample_random_inputs`] with a caller-owned generator. Channels
/// are drawn in the fixed order `f_t, M1, M2, M3` per step.
pub fn sample_random_inputs_with<R: rand::Rng>(
    n_steps: usize,
    dist: &InputDistribution,
    rng: &mut R,
) -> Vec<ControlInput> {
    let normals: Vec<Normal<f64>> = (0..4)
        .map(|i| Normal::new(dist.mean[i], dist.cov_diag[i].sqrt()).expect("valid sigma"))
        .collect();
    (0..n_steps)
        .map(|_| {
            let ft = normals[0].sample(rng);
            let m1 = normals[1].sample(rng);
            let m2 = normals[2].sample(rng);
            let m3 = normals[3].sample(rng);
            ControlInput::new(ft, Vec3::new(m1, m2, m3))
        })
        .collect()
}

/// Uniform randomization envelope for trajectory initial states.
///
/// Spreading starting positions and velocities over O(1) ranges keeps those
/// directions visible to the identification alongside the O(40 N) thrust
/// channel; tilt and spin stay moderate so the data lives where the lifted
/// model is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialStateDistribution {
    /// Position per axis, uniform in ±range, m.
    pub pos_range: f64,
    /// Velocity per axis, uniform in ±range, m/s.
    pub vel_range: f64,
    /// Tilt angle uniform in [0, max_tilt] about a uniform axis, rad.
    pub max_tilt: f64,
    /// Angular velocity per axis, uniform in ±range, rad/s.
    pub omega_range: f64,
}

impl Default for InitialStateDistribution {
    fn default() -> Self {
        InitialStateDistribution {
            pos_range: 1.0,
            vel_range: 1.0,
            max_tilt: 0.2,
            omega_range: 1.0,
        }
    }
}

impl InitialStateDistribution {
    /// Degenerate distribution: every trajectory starts at rest at the origin.
    pub fn fixed_hover() -> Self {
        InitialStateDistribution {
            pos_range: 0.0,
            vel_range: 0.0,
            max_tilt: 0.0,
            omega_range: 0.0,
        }
    }
}

/// Draw an initial state. Channels are consumed in a fixed order (position,
/// velocity, tilt axis, tilt angle, angular velocity), so sequences are
/// reproducible from the generator state.
pub fn sample_initial_state<R: rand::Rng>(
    dist: &InitialStateDistribution,
    rng: &mut R,
) -> QuadState {
    fn uniform3<R: rand::Rng>(rng: &mut R, range: f64) -> Vec3 {
        Vec3::new(
            rng.random_range(-1.0..1.0) * range,
            rng.random_range(-1.0..1.0) * range,
            rng.random_range(-1.0..1.0) * range,
        )
    }
    let position = uniform3(rng, dist.pos_range);
    let velocity = uniform3(rng, dist.vel_range);
    let axis_raw = uniform3(rng, 1.0);
    let angle = rng.random_range(0.0..=1.0) * dist.max_tilt;
    let rotation = if axis_raw.norm() > 1e-9 && angle > 0.0 {
        se3::so3_exp(axis_raw.normalize() * angle)
    } else {
        RotationMatrix::identity()
    };
    let omega = uniform3(rng, dist.omega_range);
    QuadState {
        position,
        velocity,
        rotation,
        omega,
    }
}

/// Total mechanical energy `½m‖v‖² + ½ωᵀJω + m·g·p_z`; conserved by the
/// unforced flow, useful as an integrator diagnostic.
pub fn mechanical_energy(x: &QuadState, params: &QuadParams) -> f64 {
    0.5 * params.mass * x.velocity.norm_squared()
        + 0.5 * x.omega.dot(&(params.inertia * x.omega))
        + params.mass * params.gravity * x.position.z
}

// --- trajectory serialization -----------------------------------------------
//
// CSV columns: t,px,py,pz,vx,vy,vz,r11,r21,r31,r12,r22,r32,r13,r23,r33,
// wx,wy,wz,ft,m1,m2,m3 — the nine R entries in column-stacked order. The
// final row has no input, so its last four fields are empty. Floats are
// printed in shortest round-trip form, so parse(write(t)) == t bit-exactly.

pub const TRAJECTORY_CSV_HEADER: &str =
    "t,px,py,pz,vx,vy,vz,r11,r21,r31,r12,r22,r32,r13,r23,r33,wx,wy,wz,ft,m1,m2,m3";

impl Trajectory {
    pub fn to_csv_string(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        out.push_str(TRAJECTORY_CSV_HEADER);
        out.push('\n');
        for (k, s) in self.states.iter().enumerate() {
            let t = k as f64 * self.t_s;
            write!(out, "{t}").unwrap();
            for c in s.position.iter().chain(s.velocity.iter()) {
                write!(out, ",{c}").unwrap();
            }
            for c in se3::vectorize(s.rotation.matrix()) {
                write!(out, ",{c}").unwrap();
            }
            for c in s.omega.iter() {
                write!(out, ",{c}").unwrap();
            }
            if let Some(u) = self.inputs.get(k) {
                write!(out, ",{},{},{},{}", u.thrust, u.moment.x, u.moment.y, u.moment.z).unwrap();
            } else {
                out.push_str(",,,,");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self, DynamicsError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| DynamicsError::Format("empty trajectory file".into()))?;
        if header.trim() != TRAJECTORY_CSV_HEADER {
            return Err(DynamicsError::Format(format!(
                "unexpected header: {header}"
            )));
        }
        let mut states = Vec::new();
        let mut inputs = Vec::new();
        let mut times = Vec::new();
        for (line_no, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 23 {
                return Err(DynamicsError::Format(format!(
                    "row {line_no}: expected 23 fields, got {}",
                    fields.len()
                )));
            }
            let num = |s: &str| -> Result<f64, DynamicsError> {
                s.parse::<f64>()
                    .map_err(|e| DynamicsError::Format(format!("row {line_no}: {e}")))
            };
            times.push(num(fields[0])?);
            let mut vals = [0.0; 18];
            for (i, f) in fields[1..19].iter().enumerate() {
                vals[i] = num(f)?;
            }
            let rotation = RotationMatrix::try_new(se3::devectorize(&vals[6..15]))?;
            states.push(QuadState {
                position: Vec3::new(vals[0], vals[1], vals[2]),
                velocity: Vec3::new(vals[3], vals[4], vals[5]),
                rotation,
                omega: Vec3::new(vals[15], vals[16], vals[17]),
            });
            if !fields[19].is_empty() {
                inputs.push(ControlInput::new(
                    num(fields[19])?,
                    Vec3::new(num(fields[20])?, num(fields[21])?, num(fields[22])?),
                ));
            }
        }
        if states.is_empty() {
            return Err(DynamicsError::Format("no states in trajectory file".into()));
        }
        if inputs.len() + 1 != states.len() {
            return Err(DynamicsError::Format(format!(
                "inconsistent lengths: {} states, {} inputs",
                states.len(),
                inputs.len()
            )));
        }
        let t_s = if times.len() >= 2 { times[1] - times[0] } else { 1.0 };
        Ok(Trajectory { t_s, states, inputs })
    }

    pub fn save_csv(&self, path: &std::path::Path) -> Result<(), DynamicsError> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn load_csv(path: &std::path::Path) -> Result<Self, DynamicsError> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&io::TrajectoryRepr::from(self)).expect("trajectory serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self, DynamicsError> {
        let repr: io::TrajectoryRepr = serde_json::from_str(text)
            .map_err(|e| DynamicsError::Format(format!("trajectory json: {e}")))?;
        repr.try_into()
    }
}

mod io {
    use super::*;

    #[derive(Serialize, Deserialize)]
    pub(super) struct StateRepr {
        p: [f64; 3],
        v: [f64; 3],
        /// Column-stacked rotation matrix.
        r: [f64; 9],
        w: [f64; 3],
    }

    #[derive(Serialize, Deserialize)]
    pub(super) struct InputRepr {
        ft: f64,
        m: [f64; 3],
    }

    #[derive(Serialize, Deserialize)]
    pub(super) struct TrajectoryRepr {
        t_s: f64,
        states: Vec<StateRepr>,
        inputs: Vec<InputRepr>,
    }

    impl From<&Trajectory> for TrajectoryRepr {
        fn from(t: &Trajectory) -> Self {
            TrajectoryRepr {
                t_s: t.t_s,
                states: t
                    .states
                    .iter()
                    .map(|s| StateRepr {
                        p: [s.position.x, s.position.y, s.position.z],
                        v: [s.velocity.x, s.velocity.y, s.velocity.z],
                        r: se3::vectorize(s.rotation.matrix()),
                        w: [s.omega.x, s.omega.y, s.omega.z],
                    })
                    .collect(),
                inputs: t
                    .inputs
                    .iter()
                    .map(|u| InputRepr {
                        ft: u.thrust,
                        m: [u.moment.x, u.moment.y, u.moment.z],
                    })
                    .collect(),
            }
        }
    }

    impl TryFrom<TrajectoryRepr> for Trajectory {
        type Error = DynamicsError;
        fn try_from(repr: TrajectoryRepr) -> Result<Self, DynamicsError> {
            if repr.inputs.len() + 1 != repr.states.len() {
                return Err(DynamicsError::Format(
                    "inconsistent state/input lengths".into(),
                ));
            }
            let states = repr
                .states
                .iter()
                .map(|s| {
                    Ok(QuadState {
                        position: Vec3::from_row_slice(&s.p),
                        velocity: Vec3::from_row_slice(&s.v),
                        rotation: RotationMatrix::try_new(se3::devectorize(&s.r))?,
                        omega: Vec3::from_row_slice(&s.w),
                    })
                })
                .collect::<Result<Vec<_>, Se3Error>>()?;
            Ok(Trajectory {
                t_s: repr.t_s,
                states,
                inputs: repr
                    .inputs
                    .iter()
                    .map(|u| ControlInput::new(u.ft, Vec3::from_row_slice(&u.m)))
                    .collect(),
            })
        }
    }
}
