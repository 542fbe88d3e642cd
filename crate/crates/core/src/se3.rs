//! SO(3) primitives: hat/vee maps, exponential and logarithm, polar
//! projection onto the rotation group, and column-stacking vectorization.
//!
//! Conventions fixed repo-wide:
//! * Matrices are `nalgebra` column-major; `Mat3::new` takes entries in
//!   row-major reading order.
//! * [`vectorize`] stacks **columns**, so `vectorize(M)[3*j + i] = M[(i, j)]`.
//! * Rotation matrices map body-frame vectors into the inertial frame.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Angle below which `θ/(2 sin θ)` and the Rodrigues coefficients switch to
/// their Taylor expansions.
const SMALL_ANGLE: f64 = 1e-4;
/// Distance from π below which the log switches to symmetric-part axis
/// extraction. The generic formula loses ~eps/(π-θ)² near π, so the switch
/// happens well before that amplification reaches round-trip tolerances.
const NEAR_PI: f64 = 1e-2;

#[derive(Debug, Error, PartialEq)]
pub enum Se3Error {
    /// `vee` was handed a matrix whose symmetric part is too large.
    #[error("matrix is not skew-symmetric: ||H + H^T||_F = {asymmetry:.3e}")]
    NonSkewInput { asymmetry: f64 },
    /// Polar projection target is rank-deficient; no nearest rotation exists.
    #[error("matrix is too close to singular to project onto SO(3)")]
    SingularProjection,
    /// A matrix failed the orthonormality/determinant checks for a rotation.
    #[error("matrix is not a rotation: ||R^T R - I||_F = {ortho_defect:.3e}, det = {det}")]
    NotARotation { ortho_defect: f64, det: f64 },
}

/// A 3x3 matrix verified (or constructed) to lie on SO(3):
/// `||R^T R - I||_F <= 1e-9` and `det(R) ∈ [1 - 1e-9, 1 + 1e-9]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Mat3);

impl RotationMatrix {
    pub const ORTHO_TOL: f64 = 1e-9;

    pub fn identity() -> Self {
        RotationMatrix(Mat3::identity())
    }

    /// Validates the SO(3) invariants before wrapping.
    pub fn try_new(m: Mat3) -> Result<Self, Se3Error> {
        let defect = (m.transpose() * m - Mat3::identity()).norm();
        let det = m.determinant();
        if defect <= Self::ORTHO_TOL && (det - 1.0).abs() <= Self::ORTHO_TOL {
            Ok(RotationMatrix(m))
        } else {
            Err(Se3Error::NotARotation {
                ortho_defect: defect,
                det,
            })
        }
    }

    /// Wraps without checking. Callers must guarantee the invariants hold
    /// (e.g. the matrix came out of [`so3_exp`] or [`project_to_so3`]).
    pub(crate) fn new_unchecked(m: Mat3) -> Self {
        debug_assert!((m.transpose() * m - Mat3::identity()).norm() <= 1e-7);
        RotationMatrix(m)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn into_matrix(self) -> Mat3 {
        self.0
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        let c = ((self.0.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos()
    }
}

impl std::ops::Mul for RotationMatrix {
    type Output = RotationMatrix;
    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        // Product of rotations drifts at the eps level only; keep unchecked.
        RotationMatrix::new_unchecked(self.0 * rhs.0)
    }
}

impl std::ops::Mul<Vec3> for RotationMatrix {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// Skew-symmetric matrix of `a`, satisfying `hat(a) * b = a × b`.
#[rustfmt::skip]
pub fn hat(a: Vec3) -> Mat3 {
    Mat3::new(
         0.0, -a.z,  a.y,
         a.z,  0.0, -a.x,
        -a.y,  a.x,  0.0,
    )
}

/// Inverse of [`hat`]: extracts `(H32, H13, H21)`.
///
/// Rejects inputs whose symmetric part exceeds `1e-8` in Frobenius norm.
pub fn vee(h: &Mat3) -> Result<Vec3, Se3Error> {
    let asymmetry = (h + h.transpose()).norm();
    if asymmetry > 1e-8 {
        return Err(Se3Error::NonSkewInput { asymmetry });
    }
    Ok(vee_unchecked(h))
}

/// `vee` without the skewness check; reads only the lower-triangle entries.
pub fn vee_unchecked(h: &Mat3) -> Vec3 {
    Vec3::new(h[(2, 1)], h[(0, 2)], h[(1, 0)])
}

/// Least-squares skew approximation `(H - H^T)/2`.
pub fn skew_part(h: &Mat3) -> Mat3 {
    (h - h.transpose()) / 2.0
}

/// Rodrigues formula: `exp(hat(w))`.
pub fn so3_exp(w: Vec3) -> RotationMatrix {
    let theta2 = w.norm_squared();
    let theta = theta2.sqrt();
    let (sinc, cosc) = if theta < SMALL_ANGLE {
        // sin θ / θ and (1 - cos θ)/θ² expanded around 0.
        (
            1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0,
            0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
        )
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let w_hat = hat(w);
    RotationMatrix::new_unchecked(Mat3::identity() + sinc * w_hat + cosc * (w_hat * w_hat))
}

/// Logarithm on SO(3): the skew-symmetric `L` with `exp(L) = R` and rotation
/// angle `||vee(L)|| ∈ [0, π]`.
///
/// Three regimes: Taylor expansion of `θ/(2 sin θ)` near θ = 0, the generic
/// skew-part formula in the middle, and symmetric-part axis extraction near
/// θ = π where the skew part cancels to zero.
pub fn so3_log(r: &RotationMatrix) -> Mat3 {
    let theta = r.angle();
    let m = r.matrix();

    if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        let factor = 0.5 + t2 / 12.0 + 7.0 * t2 * t2 / 720.0;
        return factor * (m - m.transpose());
    }

    if theta > std::f64::consts::PI - NEAR_PI {
        return hat(theta * axis_near_pi(m, theta));
    }

    (theta / (2.0 * theta.sin())) * (m - m.transpose())
}

/// Rotation axis for angles near π, where `R - R^T ≈ 0`.
///
/// Uses `(R + R^T)/2 = I + (1 - cos θ) (a a^T - I)` to read `a a^T` off the
/// symmetric part, anchoring on the largest diagonal entry for stability.
fn axis_near_pi(m: &Mat3, theta: f64) -> Vec3 {
    let sym = (m + m.transpose()) / 2.0;
    let one_minus_cos = 1.0 - theta.cos();
    let outer = (sym - Mat3::identity()) / one_minus_cos + Mat3::identity();

    let k = (0..3)
        .max_by(|&a, &b| outer[(a, a)].partial_cmp(&outer[(b, b)]).unwrap())
        .unwrap();
    let mut axis = Vec3::zeros();
    axis[k] = outer[(k, k)].max(0.0).sqrt();
    for j in 0..3 {
        if j != k {
            axis[j] = outer[(k, j)] / axis[k];
        }
    }
    axis.normalize_mut();

    // Fix the overall sign from the skew part where it is still nonzero;
    // at exactly π both signs are valid and we keep the anchored one.
    let skew_dir = vee_unchecked(&skew_part(m));
    if skew_dir.dot(&axis) < 0.0 {
        axis = -axis;
    }
    axis
}

/// Nearest rotation to `m` in Frobenius norm: the orthogonal polar factor
/// with the determinant sign fixed to +1.
pub fn project_to_so3(m: &Mat3) -> Result<RotationMatrix, Se3Error> {
    let svd = m.svd(true, true);
    let u = svd.u.ok_or(Se3Error::SingularProjection)?;
    let v_t = svd.v_t.ok_or(Se3Error::SingularProjection)?;
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin.is_finite() && smax.is_finite()) || smin <= 1e-12 * smax.max(1.0) {
        return Err(Se3Error::SingularProjection);
    }
    let mut q = u * v_t;
    if q.determinant() < 0.0 {
        // Flip the column of U paired with the smallest singular value.
        let (jmin, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        let mut u_fixed = u;
        for i in 0..3 {
            u_fixed[(i, jmin)] = -u_fixed[(i, jmin)];
        }
        q = u_fixed * v_t;
    }
    // Polar factors of well-conditioned inputs are orthonormal to machine
    // precision, but a re-orthonormalization pass keeps the invariant tight
    // regardless of SVD round-off.
    Ok(RotationMatrix::new_unchecked(orthonormalize(&q)))
}

/// One Gram-Schmidt pass over the columns; input is already near-orthonormal.
fn orthonormalize(m: &Mat3) -> Mat3 {
    let c0: Vec3 = m.column(0).into_owned().normalize();
    let mut c1: Vec3 = m.column(1).into_owned();
    c1 -= c0 * c0.dot(&c1);
    let c1 = c1.normalize();
    let c2 = c0.cross(&c1);
    Mat3::from_columns(&[c0, c1, c2])
}

/// Column-stacking vectorization: entry `(i, j)` lands at index `3j + i`.
pub fn vectorize(m: &Mat3) -> [f64; 9] {
    let mut out = [0.0; 9];
    for j in 0..3 {
        for i in 0..3 {
            out[3 * j + i] = m[(i, j)];
        }
    }
    out
}

/// Inverse of [`vectorize`].
pub fn devectorize(v: &[f64]) -> Mat3 {
    assert_eq!(v.len(), 9, "devectorize needs exactly 9 entries");
    let mut m = Mat3::zeros();
    for j in 0..3 {
        for i in 0..3 {
            m[(i, j)] = v[3 * j + i];
        }
    }
    m
}
