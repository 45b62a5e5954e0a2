//! The Cayley retraction on SO(3) and its right-trivialized tangent maps.
//!
//! cay(w) = I + (1/(1 + |w/2|^2)) (w^ + w^2/2) lands exactly in SO(3) for
//! every w, which is what makes it usable as a structure-preserving update.
//! The tangent maps come in two flavors: the generic 3x3 matrices
//! dcay / dcay_inv, and the constrained variant `dcay_inv_scaled` whose
//! (3,3) entry is 0 rather than 1. The discrete variational equations were
//! derived from the constrained matrix, so both are kept and tested against
//! each other (they agree in every other entry).

use crate::error::{Error, Result};
use crate::so3::{hat, vee, Mat3, Rot3, Vec3};

/// Chart-boundary threshold for `cay_inv`: |trace(R) + 1| below this means
/// the rotation angle is numerically pi and (I + R) is not invertible.
pub const CHART_BOUNDARY_TOL: f64 = 1e-10;

/// Residual bound for the `cay_inv` round-trip check.
const CAY_INV_RESIDUAL_TOL: f64 = 1e-8;

/// Constraint tolerance on w3 for the constrained tangent matrix.
pub const CONSTRAINT_TOL: f64 = 1e-12;

/// The Cayley map. Its image is exactly orthonormal up to round-off.
pub fn cay(w: Vec3) -> Rot3 {
    let s = hat(w).matrix();
    let alpha = 1.0 / (1.0 + (w / 2.0).norm_squared());
    Rot3::from_matrix_unchecked(Mat3::identity() + alpha * (s + 0.5 * (s * s)))
}

/// Inverse of `cay` on its chart: w = vee(skew part of 2(R - I)(R + I)^-1).
///
/// The skew projection and a round-trip residual check guard against inputs
/// that are not close to a rotation inside the chart.
pub fn cay_inv(r: &Rot3) -> Result<Vec3> {
    let m = r.matrix();
    let trace_plus_one = m.trace() + 1.0;
    if !(trace_plus_one.abs() >= CHART_BOUNDARY_TOL) {
        return Err(Error::ChartBoundary { trace_plus_one });
    }
    let inv = (m + Mat3::identity())
        .try_inverse()
        .ok_or(Error::ChartBoundary { trace_plus_one })?;
    let c = 2.0 * (m - Mat3::identity()) * inv;
    let skew = 0.5 * (c - c.transpose());
    let w = vee(&skew).expect("explicit skew projection");
    let residual = (cay(w).matrix() - m).norm();
    if !(residual <= CAY_INV_RESIDUAL_TOL) {
        return Err(Error::ChartBoundary { trace_plus_one });
    }
    Ok(w)
}

/// Right-trivialized tangent of `cay`: (1/(1 + |w/2|^2)) (I + w^/2).
pub fn dcay(w: Vec3) -> Mat3 {
    let alpha = 1.0 / (1.0 + (w / 2.0).norm_squared());
    alpha * (Mat3::identity() + 0.5 * hat(w).matrix())
}

/// Inverse of `dcay`: I - w^/2 + w w^T / 4.
pub fn dcay_inv(w: Vec3) -> Mat3 {
    Mat3::identity() - 0.5 * hat(w).matrix() + 0.25 * (w * w.transpose())
}

/// Constrained inverse-tangent matrix at argument eps*w for w3 = 0.
///
/// Agrees with `dcay_inv(eps * w)` in every entry except (3,3), which is 0
/// here and 1 there; the variational discrete equations are derived from
/// this variant.
pub fn dcay_inv_scaled(w: Vec3, eps: f64) -> Result<Mat3> {
    if !(w.z.abs() <= CONSTRAINT_TOL) {
        return Err(Error::ConstraintViolated { residual: w.z });
    }
    let (w1, w2) = (w.x, w.y);
    let e = eps;
    Ok(Mat3::new(
        1.0 + e * e * w1 * w1 / 4.0,
        e * e * w1 * w2 / 4.0,
        -e * w2 / 2.0,
        //
        e * e * w1 * w2 / 4.0,
        1.0 + e * e * w2 * w2 / 4.0,
        e * w1 / 2.0,
        //
        e * w2 / 2.0,
        -e * w1 / 2.0,
        0.0,
    ))
}
