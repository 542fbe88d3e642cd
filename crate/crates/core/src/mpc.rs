//! Linear MPC in the lifted space: condensation of the horizon tracking
//! problem into a dense QP and the receding-horizon loop against the
//! nonlinear plant.
//!
//! With lifted dynamics `z_{k+1} = A z_k + B u_k`, stacking the horizon
//! gives `Z = A_qp z0 + B_qp U` where
//!
//! ```text
//! A_qp = [A; A²; …; A^Nh],   B_qp(i,j) = A^{i-j} B  for i ≥ j (blocks).
//! ```
//!
//! Substituting into the tracking cost `Σ (z_k - z_ref,k)ᵀQ̄(z_k - z_ref,k)
//! + u_kᵀR̄u_k` yields the QP data
//!
//! ```text
//! H = 2 (B_qpᵀ Q̄̄ B_qp + R̄̄),   G = 2 B_qpᵀ Q̄̄ (A_qp z0 - y),
//! ```
//!
//! with `Q̄ = [Q 0; 0 0]` embedding the 24-dimensional state cost into the
//! lifted space, `Q̄̄`/`R̄̄` the block-diagonal horizon repetitions, and `y`
//! the stacked lifted reference. Only `G` depends on the current state, so
//! the controller precomputes everything else once and solves a warm-started
//! QP per step.

use crate::dynamics::{
    self, ActuatorLimits, ControlInput, DynamicsError, QuadParams, QuadState, Trajectory,
};
use crate::edmd::KoopmanModel;
use crate::lift::{self, LiftError, LiftedState, BASE_DIM, INPUT_DIM};
use crate::qp::{ActiveSetQp, QpError, QpProblem, QpSolution, QpStatus};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MpcError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid MPC configuration: {0}")]
    InvalidConfig(String),
    #[error("QP solve failed at step {step}: status {status:?}")]
    QpFailure { step: usize, status: QpStatus },
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Plant(#[from] DynamicsError),
    #[error(transparent)]
    Lift(#[from] LiftError),
}

/// Horizon length, cost weights, and input limits for the tracking problem.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcConfig {
    /// Prediction horizon, steps.
    pub horizon: usize,
    /// State cost on the leading 24 lifted coordinates.
    pub q: DMatrix<f64>,
    /// Control cost, 4×4 positive definite.
    pub r_ctrl: DMatrix<f64>,
    pub limits: ActuatorLimits,
    /// Sample time; must match the model the controller runs on.
    pub t_s: f64,
}

impl MpcConfig {
    /// Diagonal cost from per-group weights: position (3), velocity (3),
    /// `vec(R)` (9), `vec(ω̂)` (9), and a uniform control weight.
    pub fn from_weights(
        horizon: usize,
        q_position: f64,
        q_velocity: f64,
        q_rotation: f64,
        q_omega: f64,
        r_control: f64,
        limits: ActuatorLimits,
        t_s: f64,
    ) -> Self {
        let mut q = DMatrix::zeros(BASE_DIM, BASE_DIM);
        for i in 0..3 {
            q[(i, i)] = q_position;
            q[(3 + i, 3 + i)] = q_velocity;
        }
        for i in 6..15 {
            q[(i, i)] = q_rotation;
        }
        for i in 15..24 {
            q[(i, i)] = q_omega;
        }
        MpcConfig {
            horizon,
            q,
            r_ctrl: DMatrix::identity(INPUT_DIM, INPUT_DIM) * r_control,
            limits,
            t_s,
        }
    }

    pub fn validate(&self) -> Result<(), MpcError> {
        if self.horizon < 1 {
            return Err(MpcError::InvalidConfig("horizon must be at least 1".into()));
        }
        if self.q.shape() != (BASE_DIM, BASE_DIM) {
            return Err(MpcError::InvalidConfig(format!(
                "Q must be {BASE_DIM}x{BASE_DIM}, got {:?}",
                self.q.shape()
            )));
        }
        if self.r_ctrl.shape() != (INPUT_DIM, INPUT_DIM) {
            return Err(MpcError::InvalidConfig("R must be 4x4".into()));
        }
        if (&self.q - self.q.transpose()).norm() > 1e-9 {
            return Err(MpcError::InvalidConfig("Q must be symmetric".into()));
        }
        if self.q.clone().symmetric_eigenvalues().min() < -1e-9 {
            return Err(MpcError::InvalidConfig(
                "Q must be positive semidefinite".into(),
            ));
        }
        if self.r_ctrl.clone().cholesky().is_none() {
            return Err(MpcError::InvalidConfig(
                "R must be positive definite".into(),
            ));
        }
        if !(self.t_s > 0.0) {
            return Err(MpcError::InvalidConfig("t_s must be positive".into()));
        }
        self.limits.validate().map_err(MpcError::Plant)?;
        Ok(())
    }
}

/// Reference states at the controller sample time. Windows past the end hold
/// the final state, which keeps the horizon problem well defined up to and
/// beyond the last sample.
#[derive(Debug, Clone)]
pub struct ReferenceTrajectory {
    pub states: Vec<QuadState>,
    pub t_s: f64,
}

impl ReferenceTrajectory {
    pub fn new(states: Vec<QuadState>, t_s: f64) -> Self {
        assert!(!states.is_empty(), "reference must contain at least one state");
        ReferenceTrajectory { states, t_s }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `len` states starting at `start`, holding the last state past the end.
    pub fn window(&self, start: usize, len: usize) -> Vec<QuadState> {
        (start..start + len)
            .map(|k| self.states[k.min(self.states.len() - 1)])
            .collect()
    }
}

/// The condensed per-step QP of the horizon problem.
#[derive(Debug, Clone)]
pub struct MpcProblem {
    /// Stacked powers `[A; A²; …; A^Nh]`, `(N·Nh)×N`.
    pub a_qp: DMatrix<f64>,
    /// Block lower-triangular impulse response, `(N·Nh)×(4·Nh)`.
    pub b_qp: DMatrix<f64>,
    /// QP Hessian `2(B_qpᵀQ̄̄B_qp + R̄̄)`.
    pub h: DMatrix<f64>,
    /// QP gradient `2B_qpᵀQ̄̄(A_qp z0 - y)`.
    pub g: DVector<f64>,
    /// Stacked lifted reference over the horizon.
    pub y: DVector<f64>,
    /// Input box constraints replicated over the horizon.
    pub a_ineq: DMatrix<f64>,
    pub b_ineq: DVector<f64>,
}

/// Everything in the condensation that does not depend on the current state.
#[derive(Debug, Clone)]
struct Condensation {
    a_qp: DMatrix<f64>,
    b_qp: DMatrix<f64>,
    h: DMatrix<f64>,
    /// `B_qpᵀ Q̄̄`, reused for the per-step gradient.
    bt_qbar: DMatrix<f64>,
    a_ineq: DMatrix<f64>,
    b_ineq: DVector<f64>,
    n: usize,
    horizon: usize,
}

impl Condensation {
    fn new(model: &KoopmanModel, cfg: &MpcConfig) -> Result<Self, MpcError> {
        cfg.validate()?;
        let n = model.lifted_dim();
        let nh = cfg.horizon;
        let nu = INPUT_DIM * nh;
        if model.a.shape() != (n, n) || model.b.shape() != (n, INPUT_DIM) {
            return Err(MpcError::DimensionMismatch(format!(
                "model matrices {:?}/{:?} inconsistent with lifted dim {n}",
                model.a.shape(),
                model.b.shape()
            )));
        }

        // Powers A^k and the impulse blocks A^k B.
        let mut a_pow = Vec::with_capacity(nh);
        a_pow.push(model.a.clone());
        for k in 1..nh {
            let next = &a_pow[k - 1] * &model.a;
            a_pow.push(next);
        }
        let mut ab = Vec::with_capacity(nh);
        ab.push(model.b.clone());
        for k in 1..nh {
            let next = &model.a * &ab[k - 1];
            ab.push(next);
        }

        let mut a_qp = DMatrix::zeros(n * nh, n);
        let mut b_qp = DMatrix::zeros(n * nh, nu);
        for i in 0..nh {
            a_qp.view_mut((i * n, 0), (n, n)).copy_from(&a_pow[i]);
            for j in 0..=i {
                b_qp.view_mut((i * n, INPUT_DIM * j), (n, INPUT_DIM))
                    .copy_from(&ab[i - j]);
            }
        }

        // Q̄̄ B_qp exploiting the [Q 0; 0 0] block structure: only the
        // leading 24 rows of each horizon block survive.
        let mut qbar_b = DMatrix::zeros(n * nh, nu);
        for i in 0..nh {
            let block = b_qp.view((i * n, 0), (BASE_DIM, nu));
            qbar_b
                .view_mut((i * n, 0), (BASE_DIM, nu))
                .copy_from(&(&cfg.q * block));
        }
        let mut h = (b_qp.transpose() * &qbar_b) * 2.0;
        for i in 0..nh {
            for r in 0..INPUT_DIM {
                for c in 0..INPUT_DIM {
                    h[(INPUT_DIM * i + r, INPUT_DIM * i + c)] += 2.0 * cfg.r_ctrl[(r, c)];
                }
            }
        }
        let bt_qbar = qbar_b.transpose();

        // Box limits on every input in the horizon: 8 rows per step.
        let mut a_ineq = DMatrix::zeros(8 * nh, nu);
        let mut b_ineq = DVector::zeros(8 * nh);
        for k in 0..nh {
            let row0 = 8 * k;
            let col = INPUT_DIM * k;
            a_ineq[(row0, col)] = 1.0;
            b_ineq[row0] = cfg.limits.thrust_max;
            a_ineq[(row0 + 1, col)] = -1.0;
            b_ineq[row0 + 1] = -cfg.limits.thrust_min;
            for axis in 0..3 {
                a_ineq[(row0 + 2 + 2 * axis, col + 1 + axis)] = 1.0;
                b_ineq[row0 + 2 + 2 * axis] = cfg.limits.moment_abs_max[axis];
                a_ineq[(row0 + 3 + 2 * axis, col + 1 + axis)] = -1.0;
                b_ineq[row0 + 3 + 2 * axis] = cfg.limits.moment_abs_max[axis];
            }
        }

        Ok(Condensation {
            a_qp,
            b_qp,
            h,
            bt_qbar,
            a_ineq,
            b_ineq,
            n,
            horizon: nh,
        })
    }

    fn stack_reference(&self, ref_window: &[LiftedState]) -> Result<DVector<f64>, MpcError> {
        if ref_window.len() != self.horizon {
            return Err(MpcError::DimensionMismatch(format!(
                "reference window has {} states, horizon needs {}",
                ref_window.len(),
                self.horizon
            )));
        }
        let mut y = DVector::zeros(self.n * self.horizon);
        for (k, z) in ref_window.iter().enumerate() {
            if z.len() != self.n {
                return Err(MpcError::DimensionMismatch(format!(
                    "lifted reference has dimension {}, expected {}",
                    z.len(),
                    self.n
                )));
            }
            y.rows_mut(k * self.n, self.n).copy_from(z);
        }
        Ok(y)
    }

    fn gradient(&self, z0: &LiftedState, y: &DVector<f64>) -> DVector<f64> {
        (&self.bt_qbar * (&self.a_qp * z0 - y)) * 2.0
    }
}

/// Build the condensed QP for one step. [`MpcController`] caches the
/// state-independent parts; this entry point rebuilds them and is intended
/// for inspection and tests.
pub fn condense(
    model: &KoopmanModel,
    cfg: &MpcConfig,
    z0: &LiftedState,
    ref_window: &[LiftedState],
) -> Result<MpcProblem, MpcError> {
    let cond = Condensation::new(model, cfg)?;
    if z0.len() != cond.n {
        return Err(MpcError::DimensionMismatch(format!(
            "z0 has dimension {}, expected {}",
            z0.len(),
            cond.n
        )));
    }
    let y = cond.stack_reference(ref_window)?;
    let g = cond.gradient(z0, &y);
    Ok(MpcProblem {
        a_qp: cond.a_qp,
        b_qp: cond.b_qp,
        h: cond.h,
        g,
        y,
        a_ineq: cond.a_ineq,
        b_ineq: cond.b_ineq,
    })
}

/// Receding-horizon tracking controller over a fixed model and config.
///
/// Holds the precomputed condensation and a warm-started QP solver, so it is
/// single-owner; create one controller per concurrent loop.
pub struct MpcController<'m> {
    model: &'m KoopmanModel,
    cfg: MpcConfig,
    cond: Condensation,
    solver: ActiveSetQp,
    prev_u: Option<DVector<f64>>,
}

impl<'m> MpcController<'m> {
    pub fn new(model: &'m KoopmanModel, cfg: MpcConfig) -> Result<Self, MpcError> {
        if (cfg.t_s - model.t_s).abs() > 1e-12 {
            return Err(MpcError::InvalidConfig(format!(
                "config t_s {} does not match model t_s {}",
                cfg.t_s, model.t_s
            )));
        }
        let cond = Condensation::new(model, &cfg)?;
        Ok(MpcController {
            model,
            cfg,
            cond,
            solver: ActiveSetQp::with_defaults(),
            prev_u: None,
        })
    }

    pub fn config(&self) -> &MpcConfig {
        &self.cfg
    }

    /// One controller step: lift the measured state, solve the condensed QP
    /// warm-started from the previous step, and return the first input.
    ///
    /// `ref_window` must hold the next `horizon` reference states (for steps
    /// `k+1 .. k+Nh`).
    pub fn step(&mut self, x: &QuadState, ref_window: &[QuadState]) -> Result<ControlInput, MpcError> {
        self.step_detailed(x, ref_window).map(|(u, _)| u)
    }

    /// [`Self::step`] plus the full QP solution for logging and tests.
    pub fn step_detailed(
        &mut self,
        x: &QuadState,
        ref_window: &[QuadState],
    ) -> Result<(ControlInput, QpSolution), MpcError> {
        let z0 = lift::lift(x, &self.model.cfg);
        let lifted: Vec<LiftedState> = ref_window
            .iter()
            .map(|s| lift::lift(s, &self.model.cfg))
            .collect();
        let y = self.cond.stack_reference(&lifted)?;
        let g = self.cond.gradient(&z0, &y);
        let qp = QpProblem::new(
            self.cond.h.clone(),
            g,
            self.cond.a_ineq.clone(),
            self.cond.b_ineq.clone(),
        )?;

        // Shifted previous solution as a feasible hint: entries already
        // satisfied the box at the last step.
        let hint = self.prev_u.as_ref().map(|u| {
            let nu = u.len();
            let mut shifted = DVector::zeros(nu);
            shifted.rows_mut(0, nu - INPUT_DIM).copy_from(&u.rows(INPUT_DIM, nu - INPUT_DIM));
            shifted
                .rows_mut(nu - INPUT_DIM, INPUT_DIM)
                .copy_from(&u.rows(nu - INPUT_DIM, INPUT_DIM));
            shifted
        });
        let sol = self.solver.solve_with_hint(&qp, hint.as_ref())?;
        if sol.status != QpStatus::Optimal {
            return Err(MpcError::QpFailure {
                step: 0,
                status: sol.status,
            });
        }
        self.prev_u = Some(sol.u.clone());
        let u = ControlInput::new(sol.u[0], crate::se3::Vec3::new(sol.u[1], sol.u[2], sol.u[3]));
        Ok((u, sol))
    }
}

/// One-shot controller step; see [`MpcController::step`] for the loop form.
pub fn mpc_step(
    model: &KoopmanModel,
    cfg: &MpcConfig,
    x: &QuadState,
    ref_window: &[QuadState],
) -> Result<ControlInput, MpcError> {
    MpcController::new(model, cfg.clone())?.step(x, ref_window)
}

/// Wall-clock statistics for the per-step QP pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub mean_us: f64,
    pub max_us: f64,
    pub p50_us: f64,
    pub p95_us: f64,
    pub p99_us: f64,
}

impl TimingStats {
    pub fn from_samples_us(samples: &[f64]) -> Self {
        assert!(!samples.is_empty());
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Nearest-rank percentile.
        let pct = |q: f64| {
            let rank = (q * sorted.len() as f64).ceil() as usize;
            sorted[rank.clamp(1, sorted.len()) - 1]
        };
        TimingStats {
            mean_us: samples.iter().sum::<f64>() / samples.len() as f64,
            max_us: *sorted.last().unwrap(),
            p50_us: pct(0.50),
            p95_us: pct(0.95),
            p99_us: pct(0.99),
        }
    }
}

/// Output of a closed-loop tracking run.
#[derive(Debug, Clone)]
pub struct ClosedLoopRun {
    /// The realized plant trajectory with the applied inputs.
    pub actual: Trajectory,
    /// Reference states aligned with `actual.states`.
    pub reference: Vec<QuadState>,
    /// Per-step QP iteration counts.
    pub qp_iterations: Vec<usize>,
    /// Per-step controller wall time, µs.
    pub solve_us: Vec<f64>,
    pub timing: TimingStats,
}

/// Run the receding-horizon loop against the nonlinear plant for
/// `duration` seconds. The plant is always the true rigid-body simulator;
/// the learned model only ever sees the controller.
///
/// Aborts with the failing step index if the plant integration diverges or
/// any QP solve comes back non-optimal (with pure box input constraints the
/// subproblem is always feasible, so a failure here indicates a bug, not an
/// operating condition).
pub fn run_closed_loop(
    model: &KoopmanModel,
    cfg: &MpcConfig,
    params: &QuadParams,
    x0: &QuadState,
    reference: &ReferenceTrajectory,
    duration: f64,
) -> Result<ClosedLoopRun, MpcError> {
    if (reference.t_s - cfg.t_s).abs() > 1e-12 {
        return Err(MpcError::InvalidConfig(
            "reference sample time must match controller t_s".into(),
        ));
    }
    let steps = (duration / cfg.t_s).round() as usize;
    if steps == 0 {
        return Err(MpcError::InvalidConfig("duration shorter than one step".into()));
    }
    let mut controller = MpcController::new(model, cfg.clone())?;

    let mut states = Vec::with_capacity(steps + 1);
    let mut inputs = Vec::with_capacity(steps);
    let mut qp_iterations = Vec::with_capacity(steps);
    let mut solve_us = Vec::with_capacity(steps);
    states.push(*x0);

    let mut x = *x0;
    for k in 0..steps {
        let window = reference.window(k + 1, cfg.horizon);
        let started = Instant::now();
        let (u, sol) = controller
            .step_detailed(&x, &window)
            .map_err(|e| match e {
                MpcError::QpFailure { status, .. } => MpcError::QpFailure { step: k, status },
                other => other,
            })?;
        solve_us.push(started.elapsed().as_secs_f64() * 1e6);
        qp_iterations.push(sol.iterations);

        x = dynamics::step(&x, &u, params, cfg.t_s)?;
        states.push(x);
        inputs.push(u);
    }

    let timing = TimingStats::from_samples_us(&solve_us);
    Ok(ClosedLoopRun {
        actual: Trajectory {
            t_s: cfg.t_s,
            states,
            inputs,
        },
        reference: reference.window(0, steps + 1),
        qp_iterations,
        solve_us,
        timing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{sample_random_inputs, simulate, InputDistribution};
    use crate::edmd::{build_dataset, fit, rollout_lifted};
    use crate::lift::LiftConfig;
    use crate::qp;
    use crate::se3::Vec3;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn test_params() -> QuadParams {
        QuadParams::default()
    }

    /// Small trained model shared across tests.
    fn trained_model(n_traj: usize) -> KoopmanModel {
        use crate::dynamics::{sample_initial_state, InitialStateDistribution};
        use rand::SeedableRng;
        let params = test_params();
        let dist = InputDistribution::new([params.hover_thrust(), 0.0, 0.0, 0.0], [10.0; 4]);
        let ic = InitialStateDistribution::default();
        let trajs: Vec<Trajectory> = (0..n_traj as u64)
            .map(|i| {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1000 + i);
                let x0 = sample_initial_state(&ic, &mut rng);
                let inputs = crate::dynamics::sample_random_inputs_with(100, &dist, &mut rng);
                simulate(&x0, &inputs, &params, 0.001).unwrap()
            })
            .collect();
        fit(&build_dataset(&trajs, LiftConfig::new(3)).unwrap()).unwrap()
    }

    fn test_config(horizon: usize) -> MpcConfig {
        MpcConfig::from_weights(
            horizon,
            100.0,
            10.0,
            10.0,
            1.0,
            1e-6,
            ActuatorLimits::for_params(&test_params()),
            0.001,
        )
    }

    #[test]
    fn single_step_condensation_is_the_model() {
        let model = trained_model(20);
        let cfg = test_config(1);
        let z0 = lift::lift(&QuadState::hover(), &model.cfg);
        let problem = condense(&model, &cfg, &z0, &[z0.clone()]).unwrap();
        assert_eq!(problem.a_qp, model.a);
        assert_eq!(problem.b_qp, model.b);

        // H = 2(BᵀQ̄B + R̄) with Q̄ = [Q 0; 0 0].
        let qb = &cfg.q * model.b.rows(0, BASE_DIM);
        let expected_h = (model.b.rows(0, BASE_DIM).transpose() * qb + &cfg.r_ctrl) * 2.0;
        assert_relative_eq!(problem.h, expected_h, epsilon = 1e-9);
    }

    #[test]
    fn condensed_prediction_equals_sequential_propagation() {
        let model = trained_model(20);
        let cfg = test_config(10);
        let cond = Condensation::new(&model, &cfg).unwrap();
        let n = model.lifted_dim();
        let mut rng = StdRng::seed_from_u64(7);

        for _ in 0..20 {
            let z0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let u_stack =
                DVector::from_fn(INPUT_DIM * cfg.horizon, |_, _| rng.random_range(-1.0..1.0));
            let stacked = &cond.a_qp * &z0 + &cond.b_qp * &u_stack;

            let inputs: Vec<DVector<f64>> = (0..cfg.horizon)
                .map(|k| u_stack.rows(INPUT_DIM * k, INPUT_DIM).into_owned())
                .collect();
            let zs = rollout_lifted(&model.a, &model.b, &z0, &inputs).unwrap();
            for k in 0..cfg.horizon {
                let block = stacked.rows(k * n, n);
                assert!((block - &zs[k + 1]).norm() <= 1e-10, "block {k}");
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let model = trained_model(20);
        let cfg = test_config(5);
        let mut rng = StdRng::seed_from_u64(8);
        let n = model.lifted_dim();
        let z0 = DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5));
        let refs: Vec<LiftedState> = (0..cfg.horizon)
            .map(|_| DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5)))
            .collect();
        let problem = condense(&model, &cfg, &z0, &refs).unwrap();

        // J(U) = (A_qp z0 + B_qp U - y)ᵀ Q̄̄ (…) + Uᵀ R̄̄ U
        let cost = |u: &DVector<f64>| -> f64 {
            let zs = &problem.a_qp * &z0 + &problem.b_qp * u - &problem.y;
            let mut j = 0.0;
            for k in 0..cfg.horizon {
                let dz = zs.rows(k * n, BASE_DIM);
                j += (dz.transpose() * &cfg.q * dz)[(0, 0)];
                let uk = u.rows(INPUT_DIM * k, INPUT_DIM);
                j += (uk.transpose() * &cfg.r_ctrl * uk)[(0, 0)];
            }
            j
        };

        let nu = INPUT_DIM * cfg.horizon;
        let eps = 1e-6;
        for i in 0..nu {
            let mut up = DVector::zeros(nu);
            up[i] = eps;
            let mut dn = DVector::zeros(nu);
            dn[i] = -eps;
            let fd = (cost(&up) - cost(&dn)) / (2.0 * eps);
            let rel = (problem.g[i] - fd).abs() / (1.0 + fd.abs());
            assert!(rel <= 1e-6, "component {i}: G {} vs FD {fd}", problem.g[i]);
        }
    }

    #[test]
    fn hessian_is_spd_with_floor_from_r() {
        let model = trained_model(20);
        let cfg = test_config(10);
        let cond = Condensation::new(&model, &cfg).unwrap();
        let h_sym = (&cond.h + cond.h.transpose()) * 0.5;
        assert!((&cond.h - &h_sym).norm() <= 1e-9);
        let min_eig = h_sym.symmetric_eigenvalues().min();
        let r_floor = 2.0 * cfg.r_ctrl[(0, 0)];
        assert!(
            min_eig >= r_floor - 1e-9,
            "λ_min(H) = {min_eig} below 2·λ_min(R̄) = {r_floor}"
        );
    }

    #[test]
    fn reference_window_holds_last_state() {
        let mut s1 = QuadState::hover();
        s1.position = Vec3::new(1.0, 0.0, 0.0);
        let reference = ReferenceTrajectory::new(vec![QuadState::hover(), s1], 0.001);
        let w = reference.window(1, 3);
        assert_eq!(w.len(), 3);
        assert_eq!(w[0].position.x, 1.0);
        assert_eq!(w[1].position.x, 1.0);
        assert_eq!(w[2].position.x, 1.0);
    }

    #[test]
    fn mpc_step_is_deterministic_and_respects_limits() {
        let model = trained_model(30);
        let cfg = test_config(10);
        let x = QuadState::hover();
        let window = vec![QuadState::hover(); 10];
        let u1 = mpc_step(&model, &cfg, &x, &window).unwrap();
        let u2 = mpc_step(&model, &cfg, &x, &window).unwrap();
        assert_eq!(u1, u2);
        assert!(cfg.limits.contains(&u1, 1e-8));
    }

    #[test]
    fn hover_equilibrium_input_is_recovered() {
        // With the reference pinned at the current equilibrium, the QP should
        // ask for close to hover thrust and nearly zero moments. Tolerance is
        // set by model fit quality, not solver accuracy.
        let params = test_params();
        let model = trained_model(30);
        let cfg = test_config(10);
        let window = vec![QuadState::hover(); 10];
        let u = mpc_step(&model, &cfg, &QuadState::hover(), &window).unwrap();
        assert!(
            (u.thrust - params.hover_thrust()).abs() <= 0.15 * params.hover_thrust(),
            "hover thrust {} vs mg {}",
            u.thrust,
            params.hover_thrust()
        );
        assert!(u.moment.norm() <= 0.5, "hover moment {:?}", u.moment);
    }

    #[test]
    fn tight_limits_saturate_exactly() {
        let model = trained_model(30);
        let mut cfg = test_config(10);
        // Force thrust saturation well below hover demand.
        cfg.limits.thrust_max = 10.0;
        let window = vec![QuadState::hover(); 10];
        let u = mpc_step(&model, &cfg, &QuadState::hover(), &window).unwrap();
        assert_relative_eq!(u.thrust, 10.0, epsilon = 1e-7);
    }

    #[test]
    fn closed_loop_first_step_matches_open_loop_plan() {
        let model = trained_model(30);
        let cfg = test_config(10);
        let reference = ReferenceTrajectory::new(vec![QuadState::hover(); 20], 0.001);

        let z0 = lift::lift(&QuadState::hover(), &model.cfg);
        let lifted_refs: Vec<LiftedState> = reference
            .window(1, cfg.horizon)
            .iter()
            .map(|s| lift::lift(s, &model.cfg))
            .collect();
        let problem = condense(&model, &cfg, &z0, &lifted_refs).unwrap();
        let qp = QpProblem::new(problem.h, problem.g, problem.a_ineq, problem.b_ineq).unwrap();
        let plan = qp::solve(&qp, qp::DEFAULT_TOL, qp::DEFAULT_MAX_ITER).unwrap();

        let run = run_closed_loop(
            &model,
            &cfg,
            &test_params(),
            &QuadState::hover(),
            &reference,
            0.005,
        )
        .unwrap();
        let first = run.actual.inputs[0];
        assert_relative_eq!(first.thrust, plan.u[0], epsilon = 1e-9);
        assert_relative_eq!(first.moment.x, plan.u[1], epsilon = 1e-9);
    }

    #[test]
    fn closed_loop_hover_stays_put() {
        let params = test_params();
        let model = trained_model(40);
        let cfg = test_config(10);
        let reference = ReferenceTrajectory::new(vec![QuadState::hover(); 1300], 0.001);
        let run = run_closed_loop(&model, &cfg, &params, &QuadState::hover(), &reference, 1.2)
            .unwrap();
        assert_eq!(run.actual.states.len(), 1201);
        let max_pos_err = run
            .actual
            .states
            .iter()
            .map(|s| s.position.norm())
            .fold(0.0, f64::max);
        assert!(max_pos_err <= 0.05, "hover drift {max_pos_err} m");
        for u in &run.actual.inputs {
            assert!(cfg.limits.contains(u, 1e-8));
        }
    }

    #[test]
    fn config_validation_rejects_bad_weights() {
        let mut cfg = test_config(10);
        cfg.r_ctrl = DMatrix::zeros(4, 4);
        assert!(matches!(cfg.validate(), Err(MpcError::InvalidConfig(_))));

        let mut cfg = test_config(10);
        cfg.horizon = 0;
        assert!(cfg.validate().is_err());

        let model = trained_model(20);
        let mut cfg = test_config(10);
        cfg.t_s = 0.01;
        assert!(matches!(
            MpcController::new(&model, cfg),
            Err(MpcError::InvalidConfig(_))
        ));
    }

    #[test]
    fn timing_stats_percentiles() {
        let samples: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let t = TimingStats::from_samples_us(&samples);
        assert_relative_eq!(t.mean_us, 50.5, epsilon = 1e-12);
        assert_eq!(t.max_us, 100.0);
        assert_eq!(t.p50_us, 50.0);
        assert_eq!(t.p95_us, 95.0);
    }
}
