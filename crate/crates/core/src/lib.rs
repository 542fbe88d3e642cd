//! Quadrotor simulation on SE(3), Koopman/EDMD system identification, and
//! lifted-space linear MPC.
//!
//! The crate is organized around the pipeline it implements:
//!
//! * [`se3`] — hat/vee maps, SO(3) exp/log, polar projection, vectorization.
//! * [`dynamics`] — rigid-body quadrotor equations of motion, rotor mixer,
//!   RK4 integrator and trajectory simulation.
//! * [`lift`] — the physics-informed observable map `Ψ(x)` built from
//!   products `R·ω̂^i`, its augmented form, and state reconstruction.
//! * [`edmd`] — least-squares fit of the lifted linear predictor
//!   `z⁺ = A z + B u` from snapshot data, open-loop rollouts, and nRMSE
//!   scoring.
//! * [`qp`] — dense primal active-set solver for strictly convex quadratic
//!   programs with inequality constraints.
//! * [`mpc`] — condensation of the lifted tracking problem into a dense QP
//!   and the receding-horizon loop against the nonlinear plant.

pub mod dynamics;
pub mod edmd;
pub mod lift;
pub mod mpc;
pub mod qp;
pub mod se3;

pub use dynamics::{
    ActuatorLimits, ControlInput, DynamicsError, InitialStateDistribution, InputDistribution,
    QuadParams, QuadState, RotorForces, Trajectory,
};
pub use edmd::{EdmdError, FitDiagnostics, KoopmanModel, SnapshotDataset, StateGroup};
pub use lift::{LiftConfig, LiftError, LiftedState};
pub use mpc::{MpcConfig, MpcController, MpcError, MpcProblem, ReferenceTrajectory};
pub use qp::{QpError, QpProblem, QpSolution, QpStatus};
pub use se3::{Mat3, RotationMatrix, Se3Error, Vec3};
