//! Physics-informed observables: the lifting map `Ψ(x)`, its control-augmented
//! form, the linear recovery map, and reconstruction of states from lifted
//! vectors.
//!
//! Lifted-state layout (`N = 24 + 9p`):
//!
//! | indices          | block          | size |
//! |------------------|----------------|------|
//! | `0..3`           | `p`            | 3    |
//! | `3..6`           | `v`            | 3    |
//! | `6..15`          | `vec(R)`       | 9    |
//! | `15..24`         | `vec(ω̂)`       | 9    |
//! | `24+9(i-1)..24+9i` | `vec(R·ω̂^i)` | 9 each, `i = 1..p` |
//!
//! All matrix blocks are column-stacked ([`crate::se3::vectorize`]). The
//! augmented vector appends the input `(f_t, M1, M2, M3)`, giving `N + 4`.
//! Model files and the MPC condensation both depend on this exact layout.

use crate::dynamics::{ControlInput, QuadState};
use crate::se3::{self, hat, Mat3, Se3Error, Vec3};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Number of lifted coordinates that are plain (un-augmented) state entries.
pub const BASE_DIM: usize = 24;
/// Number of control channels appended by the augmented lift.
pub const INPUT_DIM: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum LiftError {
    #[error("lifted vector has dimension {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("state reconstruction failed: {0}")]
    ReconstructionFailed(Se3Error),
}

/// Order of the observable family: products `R·ω̂^i` for `i = 1..p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LiftConfig {
    pub p: usize,
}

impl LiftConfig {
    pub fn new(p: usize) -> Self {
        assert!(p >= 1, "observable order must be at least 1");
        LiftConfig { p }
    }

    /// Dimension of the lifted state, `24 + 9p`.
    pub fn lifted_dim(&self) -> usize {
        BASE_DIM + 9 * self.p
    }

    /// Dimension of the control-augmented lifted vector.
    pub fn augmented_dim(&self) -> usize {
        self.lifted_dim() + INPUT_DIM
    }
}

impl Default for LiftConfig {
    fn default() -> Self {
        LiftConfig { p: 3 }
    }
}

/// A point in the lifted space; layout documented at module level.
pub type LiftedState = DVector<f64>;

/// Evaluate the observable map `Ψ(x)`.
pub fn lift(x: &QuadState, cfg: &LiftConfig) -> LiftedState {
    let mut z = DVector::zeros(cfg.lifted_dim());
    write_lift(x, cfg, z.as_mut_slice());
    z
}

/// `Ψ` written into a caller-provided slice, used by dataset assembly to
/// avoid per-snapshot allocation.
pub fn write_lift(x: &QuadState, cfg: &LiftConfig, out: &mut [f64]) {
    assert_eq!(out.len(), cfg.lifted_dim());
    out[0..3].copy_from_slice(x.position.as_slice());
    out[3..6].copy_from_slice(x.velocity.as_slice());
    let r = x.rotation.matrix();
    out[6..15].copy_from_slice(&se3::vectorize(r));
    let w_hat = hat(x.omega);
    out[15..24].copy_from_slice(&se3::vectorize(&w_hat));
    let mut product: Mat3 = r * w_hat;
    out[24..33].copy_from_slice(&se3::vectorize(&product));
    for i in 2..=cfg.p {
        product *= w_hat;
        let lo = BASE_DIM + 9 * (i - 1);
        out[lo..lo + 9].copy_from_slice(&se3::vectorize(&product));
    }
}

/// `Ψ_a(x, u) = [Ψ(x); u]`.
pub fn lift_augmented(x: &QuadState, u: &ControlInput, cfg: &LiftConfig) -> DVector<f64> {
    let mut z = DVector::zeros(cfg.augmented_dim());
    write_lift(x, cfg, &mut z.as_mut_slice()[..cfg.lifted_dim()]);
    let n = cfg.lifted_dim();
    z[n] = u.thrust;
    z[n + 1] = u.moment.x;
    z[n + 2] = u.moment.y;
    z[n + 3] = u.moment.z;
    z
}

/// The recovery map `C = [I 0]` selecting the leading 24 lifted coordinates.
pub fn recovery_matrix(cfg: &LiftConfig) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(BASE_DIM, cfg.lifted_dim());
    for i in 0..BASE_DIM {
        c[(i, i)] = 1.0;
    }
    c
}

/// State recovered from a lifted vector plus the axis-angle attitude
/// `Θ = log(R)∨`.
///
/// Linear predictions drift off the manifold, so the `R` block is polar
/// projected back onto SO(3) and the `ω̂` block is skew-symmetrized before
/// applying vee.
pub fn reconstruct_state(z: &LiftedState, cfg: &LiftConfig) -> Result<(QuadState, Vec3), LiftError> {
    if z.len() != cfg.lifted_dim() {
        return Err(LiftError::DimensionMismatch {
            got: z.len(),
            expected: cfg.lifted_dim(),
        });
    }
    let position = Vec3::new(z[0], z[1], z[2]);
    let velocity = Vec3::new(z[3], z[4], z[5]);
    let r_raw = se3::devectorize(&z.as_slice()[6..15]);
    let rotation = se3::project_to_so3(&r_raw).map_err(LiftError::ReconstructionFailed)?;
    let w_raw = se3::devectorize(&z.as_slice()[15..24]);
    let omega = se3::vee_unchecked(&se3::skew_part(&w_raw));
    let theta = se3::vee_unchecked(&se3::so3_log(&rotation));
    Ok((
        QuadState {
            position,
            velocity,
            rotation,
            omega,
        },
        theta,
    ))
}
