//! Continuous Suslov dynamics: reduced Lagrangian and energy, the decoupled
//! angular-velocity ODE, the Lagrange multiplier, a general
//! multiplier-elimination route used as a cross-oracle, an RK4 reference
//! integrator, and attitude reconstruction.
//!
//! Two independent derivations of the same dynamics are implemented on
//! purpose. `suslov_rhs`/`suslov_multiplier` are the closed forms specific
//! to the constraint w3 = 0 written in terms of the inertia entries;
//! `eliminate_multiplier` projects the unconstrained Euler equations onto an
//! arbitrary constraint covector. They must agree, and the test suite holds
//! them to 1e-12 of each other.

use nalgebra::Matrix2;

use crate::cayley::cay;
use crate::error::{Error, Result};
use crate::so3::{hat, Mat3, Rot3, Vec3};

/// Constraint tolerance |<a, w>| for operation inputs.
pub const CONSTRAINT_TOL: f64 = 1e-12;

/// Tighter constraint tolerance a [`SuslovState`] must satisfy.
pub const STATE_CONSTRAINT_TOL: f64 = 1e-13;

/// Floor for the projected constraint stiffness <a, I^-1 a>.
pub const STIFFNESS_FLOOR: f64 = 1e-14;

/// Inertia tensor with its constraint-plane 2x2 block and that block's
/// determinant cached; the block must be non-degenerate for the reduced
/// dynamics to be well-posed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertiaTensor {
    m: Mat3,
    planar: Matrix2<f64>,
    planar_det: f64,
}

impl InertiaTensor {
    pub fn new(m: Mat3) -> Result<Self> {
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateInertia {
                detail: "non-finite entry".into(),
            });
        }
        let planar = Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let planar_det = planar[(0, 0)] * planar[(1, 1)] - planar[(0, 1)] * planar[(1, 0)];
        if !planar_det.is_normal() {
            return Err(Error::DegenerateInertia {
                detail: format!("2x2 constraint-plane block has determinant {planar_det:e}"),
            });
        }
        Ok(Self {
            m,
            planar,
            planar_det,
        })
    }

    pub fn from_row_major(entries: [f64; 9]) -> Result<Self> {
        Self::new(Mat3::from_row_slice(&entries))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.m
    }

    /// Upper-left 2x2 block, the restriction to the constraint plane.
    pub fn planar_block(&self) -> Matrix2<f64> {
        self.planar
    }

    pub fn planar_det(&self) -> f64 {
        self.planar_det
    }
}

/// Unit covector defining the constraint <a, w> = 0. The canonical Suslov
/// choice is a = e3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintCovector {
    a: Vec3,
}

impl ConstraintCovector {
    pub fn new(direction: Vec3) -> Result<Self> {
        let n = direction.norm();
        if !n.is_normal() {
            return Err(Error::Config {
                detail: format!("constraint covector has norm {n:e}"),
            });
        }
        Ok(Self { a: direction / n })
    }

    pub fn canonical() -> Self {
        Self { a: Vec3::z() }
    }

    pub fn vector(&self) -> Vec3 {
        self.a
    }
}

/// Point on the reduced phase space: body angular velocity, attitude, time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuslovState {
    pub omega: Vec3,
    pub rotation: Rot3,
    pub time: f64,
}

impl SuslovState {
    /// Validates the constraint |w3| <= 1e-13 and the rotation's
    /// orthonormality defect <= 1e-10.
    pub fn new(omega: Vec3, rotation: Rot3, time: f64) -> Result<Self> {
        if omega.iter().any(|x| !x.is_finite()) || !time.is_finite() {
            return Err(Error::Config {
                detail: "non-finite state".into(),
            });
        }
        if !(omega.z.abs() <= STATE_CONSTRAINT_TOL) {
            return Err(Error::ConstraintViolated { residual: omega.z });
        }
        let defect = rotation.defect();
        if !(defect <= crate::so3::ROTATION_DEFECT_TOL) {
            return Err(Error::NotOrthonormal {
                defect,
                tol: crate::so3::ROTATION_DEFECT_TOL,
            });
        }
        Ok(Self {
            omega,
            rotation,
            time,
        })
    }

    /// Attitude velocity R w^ induced by the body angular velocity.
    pub fn group_velocity(&self) -> Mat3 {
        self.rotation.matrix() * hat(self.omega).matrix()
    }
}

fn check_constrained(w: Vec3) -> Result<()> {
    if !(w.z.abs() <= CONSTRAINT_TOL) {
        return Err(Error::ConstraintViolated { residual: w.z });
    }
    Ok(())
}

/// l(w) = 1/2 <I w, w>.
pub fn reduced_lagrangian(inertia: &InertiaTensor, w: Vec3) -> f64 {
    0.5 * w.dot(&(inertia.matrix() * w))
}

/// dl/dw. For a general (possibly non-symmetric) inertia matrix the gradient
/// of the quadratic form is the symmetrized product 1/2 (I + I^T) w.
pub fn reduced_lagrangian_gradient(inertia: &InertiaTensor, w: Vec3) -> Vec3 {
    0.5 * (inertia.matrix() * w + inertia.matrix().transpose() * w)
}

/// Reduced energy as the Legendre value <dl/dw, w> - l. For the quadratic
/// Lagrangian this equals l itself; computing it through the gradient keeps
/// the identity a checkable fact instead of shared code.
pub fn reduced_energy(inertia: &InertiaTensor, w: Vec3) -> f64 {
    reduced_lagrangian_gradient(inertia, w).dot(&w) - reduced_lagrangian(inertia, w)
}

/// Weighted velocity S = I31 w1 + I32 w2, the factor common to the reduced
/// equations and the multiplier.
fn coupling(inertia: &InertiaTensor, w: Vec3) -> f64 {
    let m = inertia.matrix();
    m[(2, 0)] * w.x + m[(2, 1)] * w.y
}

/// Right-hand side of the decoupled reduced ODE:
/// w1' = -(I22 w2 + I12 w1) S / det, w2' = (I21 w2 + I11 w1) S / det, w3' = 0.
pub fn suslov_rhs(inertia: &InertiaTensor, w: Vec3) -> Result<Vec3> {
    check_constrained(w)?;
    let m = inertia.matrix();
    let s = coupling(inertia, w);
    let det = inertia.planar_det();
    let w1dot = -(m[(1, 1)] * w.y + m[(0, 1)] * w.x) * s / det;
    let w2dot = (m[(1, 0)] * w.y + m[(0, 0)] * w.x) * s / det;
    Ok(Vec3::new(w1dot, w2dot, 0.0))
}

/// Lagrange multiplier along the constrained motion:
/// lambda(w) = w1 (I2i wi) - w2 (I1i wi)
///           + (S/det) ((I32 I21 - I31 I22) w2 + (I32 I11 - I31 I12) w1).
pub fn suslov_multiplier(inertia: &InertiaTensor, w: Vec3) -> Result<f64> {
    check_constrained(w)?;
    let m = inertia.matrix();
    let p1 = m[(0, 0)] * w.x + m[(0, 1)] * w.y;
    let p2 = m[(1, 0)] * w.x + m[(1, 1)] * w.y;
    let s = coupling(inertia, w);
    let det = inertia.planar_det();
    let bracket = (m[(2, 1)] * m[(1, 0)] - m[(2, 0)] * m[(1, 1)]) * w.y
        + (m[(2, 1)] * m[(0, 0)] - m[(2, 0)] * m[(0, 1)]) * w.x;
    Ok(w.x * p2 - w.y * p1 + s / det * bracket)
}

/// General multiplier elimination for an arbitrary unit constraint covector:
/// f(w) = I^-1 (I w x w), lambda = -<a, f> / <a, I^-1 a>, rhs = f + lambda I^-1 a.
///
/// This is the cross-oracle for `suslov_rhs`/`suslov_multiplier`; the two
/// routes solve the same linear system and must agree.
pub fn eliminate_multiplier(
    inertia: &InertiaTensor,
    a: &ConstraintCovector,
    w: Vec3,
) -> Result<(Vec3, f64)> {
    let av = a.vector();
    let residual = av.dot(&w);
    if !(residual.abs() <= CONSTRAINT_TOL) {
        return Err(Error::ConstraintViolated { residual });
    }
    let inv = inertia
        .matrix()
        .try_inverse()
        .ok_or(Error::DegenerateInertia {
            detail: "inertia tensor is not invertible".into(),
        })?;
    let f = inv * (inertia.matrix() * w).cross(&w);
    let inv_a = inv * av;
    let stiffness = av.dot(&inv_a);
    if !(stiffness > STIFFNESS_FLOOR) {
        return Err(Error::DegenerateConstraint { value: stiffness });
    }
    let lambda = -av.dot(&f) / stiffness;
    Ok((f + lambda * inv_a, lambda))
}

/// One classical 4-stage Runge-Kutta step of the reduced ODE. The output's
/// third component is pinned to exactly 0 (the right-hand side has zero
/// third component, so this discards only accumulated input round-off).
pub fn rk4_step(inertia: &InertiaTensor, w: Vec3, eps: f64) -> Result<Vec3> {
    let k1 = suslov_rhs(inertia, w)?;
    let k2 = suslov_rhs(inertia, w + 0.5 * eps * k1)?;
    let k3 = suslov_rhs(inertia, w + 0.5 * eps * k2)?;
    let k4 = suslov_rhs(inertia, w + eps * k3)?;
    let out = w + eps / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    Ok(Vec3::new(out.x, out.y, 0.0))
}

/// RK4 trajectory of `n_steps` steps; returns all n_steps + 1 states
/// including the initial one.
pub fn integrate_reference(
    inertia: &InertiaTensor,
    w0: Vec3,
    eps: f64,
    n_steps: usize,
) -> Result<Vec<Vec3>> {
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(w0);
    let mut w = w0;
    for _ in 0..n_steps {
        w = rk4_step(inertia, w, eps)?;
        out.push(w);
    }
    Ok(out)
}

/// Discrete reconstruction update R -> R cay(eps w). Orthonormality drift of
/// the input is carried through, never repaired.
pub fn reconstruct_step(r: &Rot3, w: Vec3, eps: f64) -> Rot3 {
    r.compose(&cay(eps * w))
}

/// Residual of the unreduced (group-level) constraint, <a R^T, R w^>
/// evaluated as a . (R^T R) w; equals <a, w> exactly when R is orthonormal.
pub fn unreduced_constraint_residual(r: &Rot3, w: Vec3, a: &ConstraintCovector) -> f64 {
    let m = r.matrix();
    a.vector().dot(&(m.transpose() * (m * w)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn reference_inertia() -> InertiaTensor {
        InertiaTensor::from_row_major([1.0, 0.1, 0.2, 0.1, 1.0, 0.2, 0.2, 0.1, 1.0]).unwrap()
    }

    fn w0() -> Vec3 {
        Vec3::new(0.4, 0.5, 0.0)
    }

    fn rand_constrained(rng: &mut StdRng, scale: f64) -> Vec3 {
        Vec3::new(
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
            0.0,
        )
    }

    fn fit_slope(points: &[(f64, f64)]) -> f64 {
        let n = points.len() as f64;
        let sx: f64 = points.iter().map(|p| p.0).sum();
        let sy: f64 = points.iter().map(|p| p.1).sum();
        let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    }

    #[test]
    fn inertia_tensor_caches_planar_block() {
        let i = reference_inertia();
        assert_eq!(i.planar_block(), Matrix2::new(1.0, 0.1, 0.1, 1.0));
        assert!((i.planar_det() - 0.99).abs() < 1e-15);
    }

    #[test]
    fn inertia_tensor_rejects_degenerate_planar_block() {
        let res = InertiaTensor::from_row_major([1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(res, Err(Error::DegenerateInertia { .. })));
    }

    #[test]
    fn lagrangian_point_values() {
        let i = reference_inertia();
        assert_eq!(reduced_lagrangian(&i, Vec3::zeros()), 0.0);
        let unit = InertiaTensor::new(Mat3::identity()).unwrap();
        assert_eq!(reduced_lagrangian(&unit, Vec3::x()), 0.5);
        // I w0 = (0.45, 0.54, 0.13), so l = (0.4*0.45 + 0.5*0.54) / 2.
        assert!((reduced_lagrangian(&i, w0()) - 0.225).abs() < 1e-16);
    }

    #[test]
    fn energy_is_the_legendre_value_of_the_lagrangian() {
        let i = reference_inertia();
        assert_eq!(reduced_energy(&i, Vec3::zeros()), 0.0);
        assert!((reduced_energy(&i, w0()) - 0.225).abs() < 1e-15);
        let mut rng = StdRng::seed_from_u64(47);
        for _ in 0..1000 {
            let w = Vec3::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            let e = reduced_energy(&i, w);
            let l = reduced_lagrangian(&i, w);
            assert!((e - l).abs() <= 1e-14 * (1.0 + l.abs()), "{e} vs {l}");
        }
    }

    #[test]
    fn lagrangian_gradient_matches_central_differences() {
        let i = reference_inertia();
        let w = Vec3::new(0.3, -0.7, 0.9);
        let g = reduced_lagrangian_gradient(&i, w);
        let h = 1e-5;
        for k in 0..3 {
            let mut dp = w;
            let mut dm = w;
            dp[k] += h;
            dm[k] -= h;
            let fd = (reduced_lagrangian(&i, dp) - reduced_lagrangian(&i, dm)) / (2.0 * h);
            assert!((g[k] - fd).abs() < 1e-7, "component {k}: {} vs {fd}", g[k]);
        }
    }

    #[test]
    fn rhs_point_values() {
        let i = reference_inertia();
        assert_eq!(suslov_rhs(&i, Vec3::zeros()).unwrap(), Vec3::zeros());
        // Exact rationals: (-0.54 * 0.13 / 0.99, 0.45 * 0.13 / 0.99, 0)
        //                = (-39/550, 13/220, 0).
        let f = suslov_rhs(&i, w0()).unwrap();
        assert!((f.x - (-39.0 / 550.0)).abs() < 1e-15);
        assert!((f.y - 13.0 / 220.0).abs() < 1e-15);
        assert_eq!(f.z, 0.0);
    }

    #[test]
    fn rhs_vanishes_for_diagonal_inertia() {
        let i = InertiaTensor::new(Mat3::from_diagonal(&Vec3::new(2.0, 3.0, 5.0))).unwrap();
        let mut rng = StdRng::seed_from_u64(53);
        for _ in 0..100 {
            let w = rand_constrained(&mut rng, 4.0);
            assert_eq!(suslov_rhs(&i, w).unwrap(), Vec3::zeros());
        }
    }

    #[test]
    fn rhs_rejects_unconstrained_input() {
        let i = reference_inertia();
        assert!(matches!(
            suslov_rhs(&i, Vec3::new(0.1, 0.1, 1e-3)),
            Err(Error::ConstraintViolated { .. })
        ));
    }

    #[test]
    fn multiplier_point_values() {
        let i = reference_inertia();
        assert_eq!(suslov_multiplier(&i, Vec3::zeros()).unwrap(), 0.0);
        // 0.216 - 0.225 + (0.13/0.99)(-0.063) = -19/1100 exactly.
        let l = suslov_multiplier(&i, w0()).unwrap();
        assert!((l - (-19.0 / 1100.0)).abs() < 1e-15, "{l}");
    }

    #[test]
    fn multiplier_closed_form_for_diagonal_inertia() {
        let i = InertiaTensor::new(Mat3::from_diagonal(&Vec3::new(2.0, 3.0, 5.0))).unwrap();
        let mut rng = StdRng::seed_from_u64(59);
        for _ in 0..100 {
            let w = rand_constrained(&mut rng, 4.0);
            let expected = w.x * w.y * (3.0 - 2.0);
            assert!((suslov_multiplier(&i, w).unwrap() - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn elimination_agrees_with_closed_forms() {
        // The module's central cross-check: the projection route and the
        // closed-form route must produce the same dynamics and multiplier.
        let i = reference_inertia();
        let a = ConstraintCovector::canonical();

        let (rhs0, l0) = eliminate_multiplier(&i, &a, Vec3::zeros()).unwrap();
        assert_eq!(rhs0, Vec3::zeros());
        assert_eq!(l0, 0.0);

        let mut rng = StdRng::seed_from_u64(61);
        for _ in 0..1000 {
            let w = rand_constrained(&mut rng, 3.0);
            let (rhs, lambda) = eliminate_multiplier(&i, &a, w).unwrap();
            let direct = suslov_rhs(&i, w).unwrap();
            let lambda_direct = suslov_multiplier(&i, w).unwrap();
            assert!((rhs - direct).norm() < 1e-12, "rhs {rhs:?} vs {direct:?}");
            assert!((lambda - lambda_direct).abs() < 1e-12);
            assert!(a.vector().dot(&rhs).abs() < 1e-13);
        }
    }

    #[test]
    fn elimination_diagonal_closed_form() {
        let i = InertiaTensor::new(Mat3::from_diagonal(&Vec3::new(2.0, 3.0, 5.0))).unwrap();
        let a = ConstraintCovector::canonical();
        let w = Vec3::new(0.7, -0.4, 0.0);
        let (rhs, lambda) = eliminate_multiplier(&i, &a, w).unwrap();
        assert!(rhs.norm() < 1e-15);
        assert!((lambda - w.x * w.y * (3.0 - 2.0)).abs() < 1e-14);
    }

    #[test]
    fn elimination_detects_degenerate_stiffness() {
        // Huge I33 drives <a, I^-1 a> below the floor.
        let i = InertiaTensor::new(Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 1e20))).unwrap();
        let a = ConstraintCovector::canonical();
        assert!(matches!(
            eliminate_multiplier(&i, &a, Vec3::new(0.4, 0.5, 0.0)),
            Err(Error::DegenerateConstraint { .. })
        ));
    }

    #[test]
    fn energy_is_conserved_to_first_order_along_the_flow() {
        // (E(w + eps f(w)) - E(w)) / eps is O(eps) because dE/dt = 0:
        // log-log slope 1.
        let i = reference_inertia();
        let w = w0();
        let f = suslov_rhs(&i, w).unwrap();
        let e0 = reduced_energy(&i, w);
        let mut points = Vec::new();
        for k in 0..7 {
            let eps = 1e-5 * 10f64.powf(k as f64 / 2.0);
            let de = (reduced_energy(&i, w + eps * f) - e0) / eps;
            points.push((eps.ln(), de.abs().ln()));
        }
        let slope = fit_slope(&points);
        assert!((slope - 1.0).abs() < 0.05, "slope {slope}");
    }

    #[test]
    fn rk4_step_matches_richardson_extrapolation_at_fifth_order() {
        let i = reference_inertia();
        let w = w0();
        // err(eps) = |one step at eps - two steps at eps/2| scales like eps^5.
        // The grid stays coarse; below eps ~ 1e-2 the difference reaches
        // round-off for this slow flow.
        let mut points = Vec::new();
        for k in 0..5 {
            let eps = 0.8 * 2f64.powi(-k);
            let coarse = rk4_step(&i, w, eps).unwrap();
            let half = rk4_step(&i, w, eps / 2.0).unwrap();
            let fine = rk4_step(&i, half, eps / 2.0).unwrap();
            let err = (coarse - fine).norm();
            points.push((eps.ln(), err.ln()));
        }
        let slope = fit_slope(&points);
        assert!((slope - 5.0).abs() < 0.15, "slope {slope}");
    }

    #[test]
    fn rk4_conserves_energy_over_long_runs() {
        let i = reference_inertia();
        let e0 = reduced_energy(&i, w0());
        let mut w = w0();
        let eps = 1e-3;
        let mut max_drift: f64 = 0.0;
        for _ in 0..10_000 {
            w = rk4_step(&i, w, eps).unwrap();
            max_drift = max_drift.max((reduced_energy(&i, w) - e0).abs());
            assert_eq!(w.z, 0.0);
        }
        assert!(max_drift <= 1e-8, "energy drift {max_drift:.3e}");
    }

    #[test]
    fn integrate_reference_returns_inclusive_trajectory() {
        let i = reference_inertia();
        let traj = integrate_reference(&i, w0(), 1e-3, 10).unwrap();
        assert_eq!(traj.len(), 11);
        assert_eq!(traj[0], w0());
        assert_eq!(traj[1], rk4_step(&i, w0(), 1e-3).unwrap());
    }

    #[test]
    fn reconstruct_step_point_values() {
        let r = reconstruct_step(&Rot3::identity(), Vec3::zeros(), 0.3);
        assert_eq!(*r.matrix(), Mat3::identity());

        let eps = 1e-3;
        let quarter = reconstruct_step(&Rot3::identity(), Vec3::new(2.0 / eps, 0.0, 0.0), eps);
        let expected = Mat3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        assert!((quarter.matrix() - expected).norm() < 1e-13);
        assert!(quarter.defect() <= 1e-13);
    }

    #[test]
    fn unreduced_residual_point_values() {
        let a = ConstraintCovector::canonical();
        let i3 = Rot3::identity();
        assert_eq!(unreduced_constraint_residual(&i3, Vec3::z(), &a), 1.0);

        let mut rng = StdRng::seed_from_u64(67);
        for _ in 0..100 {
            let w = rand_constrained(&mut rng, 4.0);
            let r = cay(Vec3::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            ));
            assert!(unreduced_constraint_residual(&r, w, &a).abs() < 1e-13);
        }
    }

    #[test]
    fn unreduced_residual_perturbation_bound() {
        // R = I + H with |H| = 1e-3: the residual picks up at most
        // (2|H| + |H|^2) |w|.
        let a = ConstraintCovector::canonical();
        let mut rng = StdRng::seed_from_u64(71);
        for _ in 0..1000 {
            let mut h = Mat3::zeros();
            for r in 0..3 {
                for c in 0..3 {
                    h[(r, c)] = rng.random_range(-1.0..1.0);
                }
            }
            h *= 1e-3 / h.norm();
            let r = Rot3::from_matrix_unchecked(Mat3::identity() + h);
            let w = rand_constrained(&mut rng, 4.0);
            let residual = unreduced_constraint_residual(&r, w, &a).abs();
            assert!(residual <= 2e-3 * w.norm() + 1e-15, "residual {residual}");
        }
    }
}
