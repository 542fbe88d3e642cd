//! Least-squares identification of the lifted linear predictor
//! `z⁺ = A z + B u` from snapshot data, open-loop prediction, and normalized
//! RMS scoring.
//!
//! The fit follows the averaged normal-equation form
//!
//! ```text
//! G1 = (1/M) Σ Ψ(y_i) Ψ_a(x_i)ᵀ,   G2 = (1/M) Σ Ψ_a(x_i) Ψ_a(x_i)ᵀ,
//! K  = G1 G2†
//! ```
//!
//! with a singular-value pseudo-inverse. The `ω̂` block carries only three
//! independent values in nine slots, so `G2` is structurally rank-deficient
//! and the relative cutoff is load-bearing: values below
//! `1e-10 · σ_max` are treated as zero and the resulting rank is recorded in
//! the fit diagnostics.

use crate::dynamics::{ControlInput, DynamicsError, QuadState, Trajectory};
use crate::lift::{self, LiftConfig, LiftError};
use crate::se3;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Relative singular-value cutoff for the `G2` pseudo-inverse.
pub const DEFAULT_SV_CUTOFF: f64 = 1e-10;
/// Lifted-norm bound beyond which an open-loop rollout is declared divergent.
const ROLLOUT_DIVERGENCE_LIMIT: f64 = 1e8;
/// Version tag written into model files.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EdmdError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("snapshot Gram matrix is numerically zero; cannot fit")]
    DegenerateData,
    #[error("nRMSE reference signal has zero norm")]
    ZeroReference,
    #[error("lifted rollout diverged at step {step}")]
    PredictionDiverged { step: usize },
    #[error("model file has format version {found}, this build reads {expected}")]
    FormatVersionMismatch { found: u32, expected: u32 },
    #[error("corrupt model file: {0}")]
    CorruptFile(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Lift(#[from] LiftError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Paired one-step snapshots `(x_i, u_i, y_i)` with `y_i` the successor of
/// `x_i` under the input `u_i` and sample time `t_s`.
#[derive(Debug, Clone)]
pub struct SnapshotDataset {
    pub xs: Vec<QuadState>,
    pub us: Vec<ControlInput>,
    pub ys: Vec<QuadState>,
    pub t_s: f64,
    pub cfg: LiftConfig,
}

impl SnapshotDataset {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// True when there are too few snapshots for a well-posed fit
    /// (`M < N + 4`).
    pub fn is_underdetermined(&self) -> bool {
        self.len() < self.cfg.augmented_dim()
    }

    /// Lifted snapshot matrices: successors `Ψ(Y)` (N×M) and augmented
    /// predecessors `Ψ_a(X)` ((N+4)×M), one column per snapshot.
    pub fn lifted_matrices(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.cfg.lifted_dim();
        let na = self.cfg.augmented_dim();
        let m = self.len();
        let mut z_next = DMatrix::zeros(n, m);
        let mut z_aug = DMatrix::zeros(na, m);
        for i in 0..m {
            lift::write_lift(&self.ys[i], &self.cfg, z_next.column_mut(i).as_mut_slice());
            let mut col = z_aug.column_mut(i);
            lift::write_lift(&self.xs[i], &self.cfg, &mut col.as_mut_slice()[..n]);
            let u = self.us[i].as_vector();
            for k in 0..4 {
                col[n + k] = u[k];
            }
        }
        (z_next, z_aug)
    }
}

/// Adjacent state pairs from each trajectory, never spanning a boundary.
pub fn build_dataset(
    trajectories: &[Trajectory],
    cfg: LiftConfig,
) -> Result<SnapshotDataset, EdmdError> {
    let mut xs = Vec::new();
    let mut us = Vec::new();
    let mut ys = Vec::new();
    let mut t_s = None;
    for traj in trajectories {
        if traj.states.len() < 2 {
            continue;
        }
        t_s.get_or_insert(traj.t_s);
        for k in 0..traj.states.len() - 1 {
            xs.push(traj.states[k]);
            us.push(traj.inputs[k]);
            ys.push(traj.states[k + 1]);
        }
    }
    if xs.is_empty() {
        return Err(EdmdError::EmptyDataset);
    }
    Ok(SnapshotDataset {
        xs,
        us,
        ys,
        t_s: t_s.unwrap(),
        cfg,
    })
}

/// Quality and conditioning information recorded at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// `‖Ψ(Y) - K Ψ_a(X)‖_F` over the training set.
    pub residual_fro: f64,
    /// Residual per snapshot: `residual_fro / √M`.
    pub residual_rms: f64,
    /// Numerical rank of `G2` at the cutoff.
    pub g2_rank: usize,
    /// Absolute singular-value cutoff that was applied.
    pub sv_cutoff: f64,
    pub n_snapshots: usize,
    /// Set when `M < N + 4`; the fit is still computed (minimum-norm).
    pub underdetermined: bool,
}

/// The learned lifted-linear predictor and its recovery map.
#[derive(Debug, Clone, PartialEq)]
pub struct KoopmanModel {
    /// Lifted state transition, N×N.
    pub a: DMatrix<f64>,
    /// Lifted input map, N×4.
    pub b: DMatrix<f64>,
    /// Recovery map selecting the leading 24 coordinates, 24×N.
    pub c: DMatrix<f64>,
    pub cfg: LiftConfig,
    pub t_s: f64,
    pub diagnostics: FitDiagnostics,
}

impl KoopmanModel {
    pub fn lifted_dim(&self) -> usize {
        self.cfg.lifted_dim()
    }
}

/// Core EDMD regression on already-lifted snapshot matrices.
///
/// `z_next` is N×M, `z_aug` is Na×M (Na = N + input dimension). Returns the
/// N×Na predictor `K = [A B]` minimizing `‖z_next - K z_aug‖_F` (minimum-norm
/// when `G2` is singular) plus diagnostics.
pub fn fit_lifted(
    z_next: &DMatrix<f64>,
    z_aug: &DMatrix<f64>,
    sv_rel_cutoff: f64,
) -> Result<(DMatrix<f64>, FitDiagnostics), EdmdError> {
    let m = z_aug.ncols();
    if m == 0 || z_next.ncols() != m {
        return Err(EdmdError::EmptyDataset);
    }
    let scale = 1.0 / m as f64;
    let g1 = z_next * z_aug.transpose() * scale;
    let g2 = z_aug * z_aug.transpose() * scale;

    let svd = g2.svd(true, true);
    let sigma_max = svd.singular_values.max();
    if !sigma_max.is_finite() || sigma_max <= 0.0 {
        return Err(EdmdError::DegenerateData);
    }
    let cutoff = sv_rel_cutoff * sigma_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let g2_pinv = svd
        .pseudo_inverse(cutoff)
        .map_err(|_| EdmdError::DegenerateData)?;
    let k = g1 * g2_pinv;

    let residual_fro = (z_next - &k * z_aug).norm();
    let diagnostics = FitDiagnostics {
        residual_fro,
        residual_rms: residual_fro / (m as f64).sqrt(),
        g2_rank: rank,
        sv_cutoff: cutoff,
        n_snapshots: m,
        underdetermined: m < z_aug.nrows(),
    };
    Ok((k, diagnostics))
}

/// Fit the quadrotor predictor from a snapshot dataset.
pub fn fit(data: &SnapshotDataset) -> Result<KoopmanModel, EdmdError> {
    if data.is_empty() {
        return Err(EdmdError::EmptyDataset);
    }
    let (z_next, z_aug) = data.lifted_matrices();
    let (k, diagnostics) = fit_lifted(&z_next, &z_aug, DEFAULT_SV_CUTOFF)?;
    let n = data.cfg.lifted_dim();
    let a = k.columns(0, n).into_owned();
    let b = k.columns(n, lift::INPUT_DIM).into_owned();
    Ok(KoopmanModel {
        a,
        b,
        c: lift::recovery_matrix(&data.cfg),
        cfg: data.cfg,
        t_s: data.t_s,
        diagnostics,
    })
}

/// Propagate `z_{k+1} = A z_k + B u_k` without any re-lifting or projection.
/// Returns the full lifted sequence including `z_0`.
pub fn rollout_lifted(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    z0: &DVector<f64>,
    inputs: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>, EdmdError> {
    let mut zs = Vec::with_capacity(inputs.len() + 1);
    zs.push(z0.clone());
    for (k, u) in inputs.iter().enumerate() {
        let z = zs.last().unwrap();
        let next = a * z + b * u;
        if !next.iter().all(|v| v.is_finite()) || next.norm() > ROLLOUT_DIVERGENCE_LIMIT {
            return Err(EdmdError::PredictionDiverged { step: k });
        }
        zs.push(next);
    }
    Ok(zs)
}

/// Open-loop prediction in the original state space: lift once, roll the
/// linear model forward, and map every lifted point back through
/// reconstruction. The rollout stays in lifted space throughout, exposing
/// any predictor drift honestly.
pub fn predict_rollout(
    model: &KoopmanModel,
    x0: &QuadState,
    inputs: &[ControlInput],
) -> Result<Trajectory, EdmdError> {
    let z0 = lift::lift(x0, &model.cfg);
    let input_vecs: Vec<DVector<f64>> = inputs
        .iter()
        .map(|u| DVector::from_column_slice(u.as_vector().as_slice()))
        .collect();
    let zs = rollout_lifted(&model.a, &model.b, &z0, &input_vecs)?;
    let states = zs
        .iter()
        .map(|z| lift::reconstruct_state(z, &model.cfg).map(|(s, _)| s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Trajectory {
        t_s: model.t_s,
        states,
        inputs: inputs.to_vec(),
    })
}

/// State groups scored by [`nrmse`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateGroup {
    /// Position `p`.
    Position,
    /// Velocity `v`.
    Velocity,
    /// Axis-angle attitude `Θ = log(R)∨`.
    Attitude,
    /// Body angular velocity `ω`.
    AngularVelocity,
    /// Concatenation of all four groups.
    All,
}

impl StateGroup {
    /// Table row labels used in metrics files.
    pub fn label(&self) -> &'static str {
        match self {
            StateGroup::Position => "p",
            StateGroup::Velocity => "v",
            StateGroup::Attitude => "theta",
            StateGroup::AngularVelocity => "omega",
            StateGroup::All => "all",
        }
    }

    fn extract(&self, state: &QuadState, out: &mut Vec<f64>) {
        match self {
            StateGroup::Position => out.extend_from_slice(state.position.as_slice()),
            StateGroup::Velocity => out.extend_from_slice(state.velocity.as_slice()),
            StateGroup::Attitude => {
                let theta = se3::vee_unchecked(&se3::so3_log(&state.rotation));
                out.extend_from_slice(theta.as_slice());
            }
            StateGroup::AngularVelocity => out.extend_from_slice(state.omega.as_slice()),
            StateGroup::All => {
                for g in [
                    StateGroup::Position,
                    StateGroup::Velocity,
                    StateGroup::Attitude,
                    StateGroup::AngularVelocity,
                ] {
                    g.extract(state, out);
                }
            }
        }
    }
}

/// Normalized RMS error as a percentage over raw component series:
/// `100 · √(Σ (pred - truth)²) / √(Σ truth²)`.
pub fn nrmse_raw(pred: &[f64], truth: &[f64]) -> Result<f64, EdmdError> {
    assert_eq!(pred.len(), truth.len(), "series lengths must match");
    let num: f64 = pred
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let den: f64 = truth.iter().map(|v| v * v).sum();
    if den == 0.0 {
        return Err(EdmdError::ZeroReference);
    }
    Ok(100.0 * (num.sqrt() / den.sqrt()))
}

/// nRMSE of a predicted trajectory against ground truth over one state
/// group.
///
/// Scored over steps `k ≥ 1`: both trajectories share the initial state by
/// construction, and counting it would only deflate the score.
pub fn nrmse(
    predicted: &Trajectory,
    truth: &Trajectory,
    group: StateGroup,
) -> Result<f64, EdmdError> {
    if predicted.states.len() != truth.states.len() {
        return Err(EdmdError::DimensionMismatch(format!(
            "trajectory lengths differ: {} vs {}",
            predicted.states.len(),
            truth.states.len()
        )));
    }
    let mut pred_series = Vec::new();
    let mut truth_series = Vec::new();
    for (p, t) in predicted.states.iter().zip(&truth.states).skip(1) {
        group.extract(p, &mut pred_series);
        group.extract(t, &mut truth_series);
    }
    nrmse_raw(&pred_series, &truth_series)
}

// --- model persistence -------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    /// Row-major entries.
    data: Vec<f64>,
}

impl From<&DMatrix<f64>> for MatrixRepr {
    fn from(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        MatrixRepr {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

impl MatrixRepr {
    fn to_matrix(&self) -> Result<DMatrix<f64>, EdmdError> {
        if self.data.len() != self.rows * self.cols {
            return Err(EdmdError::CorruptFile(format!(
                "matrix payload has {} entries for a {}x{} shape",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    p: usize,
    t_s: f64,
    a: MatrixRepr,
    b: MatrixRepr,
    c: MatrixRepr,
    diagnostics: FitDiagnostics,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

pub fn save_model(model: &KoopmanModel, path: &Path) -> Result<(), EdmdError> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        p: model.cfg.p,
        t_s: model.t_s,
        a: (&model.a).into(),
        b: (&model.b).into(),
        c: (&model.c).into(),
        diagnostics: model.diagnostics.clone(),
    };
    let json = serde_json::to_string_pretty(&file).expect("model serializes");
    std::fs::write(path, json)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<KoopmanModel, EdmdError> {
    let text = std::fs::read_to_string(path)?;
    let probe: VersionProbe = serde_json::from_str(&text)
        .map_err(|e| EdmdError::CorruptFile(format!("unreadable header: {e}")))?;
    if probe.format_version != MODEL_FORMAT_VERSION {
        return Err(EdmdError::FormatVersionMismatch {
            found: probe.format_version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| EdmdError::CorruptFile(e.to_string()))?;
    let cfg = LiftConfig::new(file.p);
    let n = cfg.lifted_dim();
    let (a, b, c) = (file.a.to_matrix()?, file.b.to_matrix()?, file.c.to_matrix()?);
    if a.shape() != (n, n) || b.shape() != (n, lift::INPUT_DIM) || c.shape() != (lift::BASE_DIM, n)
    {
        return Err(EdmdError::CorruptFile(format!(
            "matrix shapes inconsistent with p = {}",
            file.p
        )));
    }
    if !(file.t_s > 0.0) {
        return Err(EdmdError::CorruptFile("nonpositive sample time".into()));
    }
    Ok(KoopmanModel {
        a,
        b,
        c,
        cfg,
        t_s: file.t_s,
        diagnostics: file.diagnostics,
    })
}
