//! Primitives for so(3) and SO(3): the hat/vee isomorphism, the Killing
//! inner product, and the distances used for error measurement.
//!
//! Conventions: `hat(v)` is the skew matrix acting as the cross product,
//! `hat(v) * u = v x u`, so the bracket satisfies `[hat(a), hat(b)] =
//! hat(a x b)`. Distances on the group are taken in the entrywise Euclidean
//! norm of `I - A^T B`; the plain norm of `A - B` is *not* a group metric
//! (the self-distance of a rotation under it would be nonzero) and is not
//! offered.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Largest entrywise asymmetry `vee` accepts before rejecting its input.
pub const SKEW_TOL: f64 = 1e-12;

/// Default orthonormality-defect bound for a checked rotation.
pub const ROTATION_DEFECT_TOL: f64 = 1e-10;

/// Skew-symmetric 3x3 matrix stored as its axis vector, so skewness holds by
/// construction; the matrix form is materialized on demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Skew3 {
    axis: Vec3,
}

impl Skew3 {
    pub fn new(axis: Vec3) -> Self {
        Self { axis }
    }

    pub fn axis(&self) -> Vec3 {
        self.axis
    }

    /// Rows (0, -w3, w2), (w3, 0, -w1), (-w2, w1, 0).
    pub fn matrix(&self) -> Mat3 {
        let w = self.axis;
        Mat3::new(
            0.0, -w.z, w.y, //
            w.z, 0.0, -w.x, //
            -w.y, w.x, 0.0,
        )
    }
}

/// Rotation matrix whose orthonormality defect was checked at construction.
///
/// Validity is checked, never silently restored: long products of rotations
/// are expected to drift, the drift is the quantity under study, and
/// `defect()` stays queryable on every value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot3 {
    m: Mat3,
}

impl Rot3 {
    pub fn identity() -> Self {
        Self {
            m: Mat3::identity(),
        }
    }

    /// Checked constructor with the default tolerance [`ROTATION_DEFECT_TOL`].
    pub fn new(m: Mat3) -> Result<Self> {
        Self::with_tolerance(m, ROTATION_DEFECT_TOL)
    }

    pub fn with_tolerance(m: Mat3, tol: f64) -> Result<Self> {
        let defect = orthonormality_defect(&m);
        if !(defect <= tol) {
            return Err(Error::NotOrthonormal { defect, tol });
        }
        Ok(Self { m })
    }

    /// Wraps a matrix that is a rotation by construction (e.g. the image of
    /// the Cayley map, or a product of rotations whose drift is being
    /// tracked). No check is performed; `defect()` reports the truth.
    pub fn from_matrix_unchecked(m: Mat3) -> Self {
        Self { m }
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.m
    }

    /// Orthonormality defect |I - R^T R| of the stored matrix.
    pub fn defect(&self) -> f64 {
        orthonormality_defect(&self.m)
    }

    /// Group product. Drift is carried, not repaired.
    pub fn compose(&self, other: &Rot3) -> Rot3 {
        Rot3 {
            m: self.m * other.m,
        }
    }
}

/// The isomorphism R^3 -> so(3).
pub fn hat(v: Vec3) -> Skew3 {
    Skew3::new(v)
}

/// Inverse of `hat`. Asymmetric input beyond [`SKEW_TOL`] is an error, not
/// silently projected.
pub fn vee(m: &Mat3) -> Result<Vec3> {
    let asymmetry = (m[(0, 1)] + m[(1, 0)])
        .abs()
        .max((m[(0, 2)] + m[(2, 0)]).abs())
        .max((m[(1, 2)] + m[(2, 1)]).abs())
        .max(m[(0, 0)].abs())
        .max(m[(1, 1)].abs())
        .max(m[(2, 2)].abs());
    if !(asymmetry <= SKEW_TOL) {
        return Err(Error::NotSkew {
            asymmetry,
            tol: SKEW_TOL,
        });
    }
    Ok(Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)]))
}

/// Inner product on so(3) through the matrix pairing -1/2 trace(a^ b^).
/// Numerically agrees with the Euclidean dot product a . b.
pub fn killing_inner(a: Vec3, b: Vec3) -> f64 {
    -0.5 * (hat(a).matrix() * hat(b).matrix()).trace()
}

/// Distance on the algebra: killing_inner(a - b, a - b)^(1/2).
pub fn algebra_distance(a: Vec3, b: Vec3) -> f64 {
    killing_inner(a - b, a - b).max(0.0).sqrt()
}

/// Distance on the group: the entrywise Euclidean norm |I - A^T B|.
pub fn group_distance(a: &Mat3, b: &Mat3) -> f64 {
    (Mat3::identity() - a.transpose() * b).norm()
}

/// Self-distance |I - A^T A|; zero exactly on orthonormal matrices.
pub fn orthonormality_defect(a: &Mat3) -> f64 {
    (Mat3::identity() - a.transpose() * a).norm()
}
