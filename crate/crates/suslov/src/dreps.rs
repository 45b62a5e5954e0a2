//! Discrete reduced one-step maps for the Suslov problem: the implicit
//! midpoint scheme and the variational scheme, a common interface, a small
//! Newton solver in the constrained coordinates, and the multiplier
//! inconsistency diagnostic.
//!
//! Both schemes advance only (w1, w2); w3 is structurally zero, so the
//! reduced constraint is preserved exactly rather than approximately. The
//! midpoint residual is the divided-difference form
//! I_m (w_next - w_k)/eps - l(mean); at eps = 0 it degenerates to the pure
//! matching condition I_m (w_next - w_k), which has the same root and keeps
//! the zero-step residual well-defined. The variational residual is the
//! eps-multiplied polynomial form of its defining equations, kept verbatim.

use nalgebra::{Matrix2, Vector2};

use crate::dynamics::{
    reconstruct_step, suslov_multiplier, InertiaTensor, SuslovState, CONSTRAINT_TOL,
};
use crate::error::{Error, Result};
use crate::so3::Vec3;

/// Condition-number threshold above which the Newton Jacobian is reported
/// as singular (the operational stand-in for the scheme's regularity
/// condition).
pub const REGULARITY_LIMIT: f64 = 1e12;

/// Extra Newton steps taken after the tolerance is met, while the residual
/// still strictly decreases. Keeps solver error far below the one-step
/// truncation errors the consistency lab measures.
const POLISH_STEPS: usize = 3;

/// Newton solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Convergence threshold on the residual 2-norm.
    pub tol: f64,
    /// Maximum number of residual evaluations.
    pub max_iter: usize,
    /// Replace analytic Jacobians with central finite differences.
    pub fd_jacobian: bool,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            max_iter: 50,
            fd_jacobian: false,
        }
    }
}

/// Output of one implicit step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    /// Next angular velocity; third component exactly 0.
    pub omega_next: Vec3,
    /// Scheme multiplier attached to the arrival state.
    pub lambda_next: f64,
    /// Residual evaluations until the tolerance was met (a fixed point
    /// counts as 1). Polishing evaluations are not counted.
    pub newton_iters: usize,
    /// Condition number of the Jacobian at the solution.
    pub jacobian_condition: f64,
}

/// Common interface of the implicit one-step maps on the constrained plane.
pub trait DrepsScheme {
    fn name(&self) -> &'static str;

    fn inertia(&self) -> &InertiaTensor;

    /// Two-component residual whose root defines w_next given w_k.
    fn residual(&self, w_k: Vec3, w_next: Vec3, eps: f64) -> Result<Vector2<f64>>;

    /// Analytic Jacobian of the residual with respect to (w_next.1, w_next.2).
    fn jacobian(&self, w_k: Vec3, w_next: Vec3, eps: f64) -> Result<Matrix2<f64>>;

    /// Scheme multiplier attached to the step (w_k -> w_next).
    fn multiplier(&self, w_k: Vec3, w_next: Vec3, eps: f64) -> Result<f64>;
}

fn check_constrained(w: Vec3) -> Result<()> {
    if !(w.z.abs() <= CONSTRAINT_TOL) {
        return Err(Error::ConstraintViolated { residual: w.z });
    }
    Ok(())
}

/// S = I31 w1 + I32 w2 evaluated on a planar pair.
fn coupling(inertia: &InertiaTensor, w: Vector2<f64>) -> f64 {
    let m = inertia.matrix();
    m[(2, 0)] * w.x + m[(2, 1)] * w.y
}

fn planar(w: Vec3) -> Vector2<f64> {
    Vector2::new(w.x, w.y)
}

/// Midpoint residual I_m ((w_next - w_k)/eps) - (l1, l2) with
/// l1 = -m2 S(m), l2 = m1 S(m), m = (w_k + w_next)/2. At eps = 0 the
/// divided difference degenerates to I_m (w_next - w_k).
pub fn midpoint_residual(
    inertia: &InertiaTensor,
    w_k: Vec3,
    w_next: Vec3,
    eps: f64,
) -> Result<Vector2<f64>> {
    check_constrained(w_k)?;
    check_constrained(w_next)?;
    let dw = planar(w_next) - planar(w_k);
    if eps == 0.0 {
        return Ok(inertia.planar_block() * dw);
    }
    let mean = 0.5 * (planar(w_k) + planar(w_next));
    let s = coupling(inertia, mean);
    let l = Vector2::new(-mean.y * s, mean.x * s);
    Ok(inertia.planar_block() * (dw / eps) - l)
}

/// Multiplier choice of the midpoint scheme: the continuous formula
/// evaluated at the arrival state.
pub fn midpoint_multiplier(inertia: &InertiaTensor, w_next: Vec3) -> Result<f64> {
    suslov_multiplier(inertia, w_next)
}

fn midpoint_jacobian(
    inertia: &InertiaTensor,
    w_k: Vec3,
    w_next: Vec3,
    eps: f64,
) -> Result<Matrix2<f64>> {
    check_constrained(w_k)?;
    check_constrained(w_next)?;
    let im = inertia.planar_block();
    if eps == 0.0 {
        return Ok(im);
    }
    let m = inertia.matrix();
    let (i31, i32) = (m[(2, 0)], m[(2, 1)]);
    let mean = 0.5 * (planar(w_k) + planar(w_next));
    let s = coupling(inertia, mean);
    let dl = Matrix2::new(
        -0.5 * mean.y * i31,
        -0.5 * s - 0.5 * mean.y * i32,
        0.5 * s + 0.5 * mean.x * i31,
        0.5 * mean.x * i32,
    );
    Ok(im / eps - dl)
}

/// q(u) = u^T I_m u, the scalar through which the cubic terms act
/// (the outer-product matrix times I_m u collapses to q(u) u).
fn planar_quadratic(inertia: &InertiaTensor, u: Vector2<f64>) -> f64 {
    u.dot(&(inertia.planar_block() * u))
}

/// Variational residual, the eps-multiplied polynomial form verbatim:
/// I_m (w_next - w_k)
///   + (eps/2) (  w2' S' + w2 S,  -w1' S' - w1 S )
///   + (eps^2/4) ( q(w') w' - q(w) w ),   ' marking the arrival state.
pub fn variational_residual(
    inertia: &InertiaTensor,
    w_k: Vec3,
    w_next: Vec3,
    eps: f64,
) -> Result<Vector2<f64>> {
    check_constrained(w_k)?;
    check_constrained(w_next)?;
    let u = planar(w_k);
    let v = planar(w_next);
    let su = coupling(inertia, u);
    let sv = coupling(inertia, v);
    let linear = inertia.planar_block() * (v - u);
    let mid = Vector2::new(v.y * sv + u.y * su, -v.x * sv - u.x * su);
    let cubic = planar_quadratic(inertia, v) * v - planar_quadratic(inertia, u) * u;
    Ok(linear + 0.5 * eps * mid + 0.25 * eps * eps * cubic)
}

/// Variational multiplier with the -1/eps^2 rescaling already applied, so
/// the value is on the physical multiplier scale:
/// 1/2 (w1' P2' + w1 P2) - 1/2 (w2' P1' + w2 P1) with Pi = I_i1 w1 + I_i2 w2.
pub fn variational_multiplier(inertia: &InertiaTensor, w_k: Vec3, w_next: Vec3) -> Result<f64> {
    check_constrained(w_k)?;
    check_constrained(w_next)?;
    let m = inertia.matrix();
    let p = |w: Vec3, row: usize| m[(row, 0)] * w.x + m[(row, 1)] * w.y;
    Ok(0.5 * (w_next.x * p(w_next, 1) + w_k.x * p(w_k, 1))
        - 0.5 * (w_next.y * p(w_next, 0) + w_k.y * p(w_k, 0)))
}

fn variational_jacobian(
    inertia: &InertiaTensor,
    w_k: Vec3,
    w_next: Vec3,
    eps: f64,
) -> Result<Matrix2<f64>> {
    check_constrained(w_k)?;
    check_constrained(w_next)?;
    let m = inertia.matrix();
    let (i31, i32) = (m[(2, 0)], m[(2, 1)]);
    let v = planar(w_next);
    let sv = coupling(inertia, v);
    let dmid = Matrix2::new(v.y * i31, sv + v.y * i32, -sv - v.x * i31, -v.x * i32);
    let im = inertia.planar_block();
    let grad_q = im * v + im.transpose() * v;
    let dcubic = planar_quadratic(inertia, v) * Matrix2::identity() + v * grad_q.transpose();
    Ok(im + 0.5 * eps * dmid + 0.25 * eps * eps * dcubic)
}

/// The nonzero eps -> 0 limit of the variational scheme's multiplier error:
/// O0 = (S/det) ((I32 I21 - I31 I22) w2 + (I32 I11 - I31 I12) w1).
pub fn inconsistency_offset(inertia: &InertiaTensor, w: Vec3) -> Result<f64> {
    check_constrained(w)?;
    let m = inertia.matrix();
    let s = m[(2, 0)] * w.x + m[(2, 1)] * w.y;
    let bracket = (m[(2, 1)] * m[(1, 0)] - m[(2, 0)] * m[(1, 1)]) * w.y
        + (m[(2, 1)] * m[(0, 0)] - m[(2, 0)] * m[(0, 1)]) * w.x;
    Ok(s / inertia.planar_det() * bracket)
}

/// Implicit midpoint discretization.
#[derive(Debug, Clone, Copy)]
pub struct MidpointScheme {
    inertia: InertiaTensor,
}

impl MidpointScheme {
    pub fn new(inertia: InertiaTensor) -> Self {
        Self { inertia }
    }
}

impl DrepsScheme for MidpointScheme {
    fn name(&self) -> &'static str {
        "midpoint"
    }

    fn inertia(&self) -> &InertiaTensor {
        &self.inertia
    }

    fn residual(&self, w_k: Vec3, w_next: Vec3, eps: f64) -> Result<Vector2<f64>> {
        midpoint_residual(&self.inertia, w_k, w_next, eps)
    }

    fn jacobian(&self, w_k: Vec3, w_next: Vec3, eps: f64) -> Result<Matrix2<f64>> {
        midpoint_jacobian(&self.inertia, w_k, w_next, eps)
    }

    fn multiplier(&self, _w_k: Vec3, w_next: Vec3, _eps: f64) -> Result<f64> {
        midpoint_multiplier(&self.inertia, w_next)
    }
}

/// Variational discretization (order 2 in the dynamical variables, with an
/// inconsistent multiplier whose offset is `inconsistency_offset`).
#[derive(Debug, Clone, Copy)]
pub struct VariationalScheme {
    inertia: InertiaTensor,
}

impl VariationalScheme {
    pub fn new(inertia: InertiaTensor) -> Self {
        Self { inertia }
    }
}

impl DrepsScheme for VariationalScheme {
    fn name(&self) -> &'static str {
        "variational"
    }

    fn inertia(&self) -> &InertiaTensor {
        &self.inertia
    }

    fn residual(&self, w_k: Vec3, w_next: Vec3, eps: f64) -> Result<Vector2<f64>> {
        variational_residual(&self.inertia, w_k, w_next, eps)
    }

    fn jacobian(&self, w_k: Vec3, w_next: Vec3, eps: f64) -> Result<Matrix2<f64>> {
        variational_jacobian(&self.inertia, w_k, w_next, eps)
    }

    fn multiplier(&self, w_k: Vec3, w_next: Vec3, _eps: f64) -> Result<f64> {
        variational_multiplier(&self.inertia, w_k, w_next)
    }
}

/// 2-norm condition number of a 2x2 matrix, computed from the closed-form
/// singular values: sigma_max^2 / |det|.
fn condition_2x2(j: &Matrix2<f64>) -> f64 {
    let det = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
    let tau: f64 = j.iter().map(|x| x * x).sum();
    if det == 0.0 || !det.is_finite() || !tau.is_finite() {
        return f64::INFINITY;
    }
    let smax_sq = 0.5 * (tau + (tau * tau - 4.0 * det * det).max(0.0).sqrt());
    smax_sq / det.abs()
}

fn solve_2x2(j: &Matrix2<f64>, rhs: Vector2<f64>) -> Option<Vector2<f64>> {
    let det = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some(Vector2::new(
        (j[(1, 1)] * rhs.x - j[(0, 1)] * rhs.y) / det,
        (j[(0, 0)] * rhs.y - j[(1, 0)] * rhs.x) / det,
    ))
}

fn central_fd_jacobian<S: DrepsScheme + ?Sized>(
    scheme: &S,
    w_k: Vec3,
    w_next: Vec3,
    eps: f64,
) -> Result<Matrix2<f64>> {
    let delta = 1e-6;
    let mut j = Matrix2::zeros();
    for col in 0..2 {
        let mut wp = w_next;
        let mut wm = w_next;
        wp[col] += delta;
        wm[col] -= delta;
        let fp = scheme.residual(w_k, wp, eps)?;
        let fm = scheme.residual(w_k, wm, eps)?;
        let d = (fp - fm) / (2.0 * delta);
        j[(0, col)] = d.x;
        j[(1, col)] = d.y;
    }
    Ok(j)
}

/// Newton iteration for the scheme's implicit equation, in the constrained
/// coordinates (w1, w2) with initial guess w_next = w_k.
///
/// Converges to the residual tolerance, or to the floating-point
/// evaluation floor of the residual where that floor sits above the
/// tolerance (possible at small step sizes, where the divided-difference
/// form quantizes at roughly ulp(w)/eps); the floor case is detected by
/// the iteration revisiting an iterate exactly. After that, up to
/// [`POLISH_STEPS`] further steps are taken while the residual strictly
/// decreases; they are not counted in `newton_iters`.
pub fn newton_solve<S: DrepsScheme + ?Sized>(
    scheme: &S,
    w_k: Vec3,
    eps: f64,
    cfg: &NewtonConfig,
) -> Result<StepResult> {
    check_constrained(w_k)?;
    let jacobian = |w: Vec3| -> Result<Matrix2<f64>> {
        if cfg.fd_jacobian {
            central_fd_jacobian(scheme, w_k, w, eps)
        } else {
            scheme.jacobian(w_k, w, eps)
        }
    };

    let mut w = Vec3::new(w_k.x, w_k.y, 0.0);
    let mut f = scheme.residual(w_k, w, eps)?;
    let mut evals = 1;
    // A non-finite residual norm fails every comparison, so without this
    // guard a NaN at the initial guess would fall through the loop below
    // and be reported as converged.
    if !f.norm().is_finite() {
        return Err(Error::NonConvergence {
            iters: evals,
            residual: f.norm(),
            tol: cfg.tol,
        });
    }
    let mut w_prev = w;
    while f.norm() > cfg.tol {
        if evals >= cfg.max_iter {
            return Err(Error::NonConvergence {
                iters: evals,
                residual: f.norm(),
                tol: cfg.tol,
            });
        }
        let j = jacobian(w)?;
        let condition = condition_2x2(&j);
        if !(condition <= REGULARITY_LIMIT) {
            return Err(Error::SingularJacobian { condition });
        }
        let step = solve_2x2(&j, f).ok_or(Error::SingularJacobian {
            condition: f64::INFINITY,
        })?;
        let w_new = Vec3::new(w.x - step.x, w.y - step.y, 0.0);
        // The divided-difference residual is quantized with granularity on
        // the order of ulp(w)/eps, so at small step sizes its attainable
        // floor can sit above tol. When the update revisits an iterate
        // (stagnation or a two-point cycle) no representable improvement
        // exists; the regularity check above rules out a singular-Jacobian
        // stall, so accept the iterate (the polish phase below keeps the
        // better point of a cycle).
        if w_new == w || w_new == w_prev {
            break;
        }
        w_prev = w;
        w = w_new;
        f = scheme.residual(w_k, w, eps)?;
        evals += 1;
        if !f.norm().is_finite() {
            return Err(Error::NonConvergence {
                iters: evals,
                residual: f.norm(),
                tol: cfg.tol,
            });
        }
    }
    let newton_iters = evals;

    let mut best_norm = f.norm();
    for _ in 0..POLISH_STEPS {
        if best_norm == 0.0 {
            break;
        }
        let j = jacobian(w)?;
        if !(condition_2x2(&j) <= REGULARITY_LIMIT) {
            break;
        }
        let Some(step) = solve_2x2(&j, f) else { break };
        let trial = Vec3::new(w.x - step.x, w.y - step.y, 0.0);
        let trial_f = scheme.residual(w_k, trial, eps)?;
        if trial_f.norm() < best_norm {
            w = trial;
            f = trial_f;
            best_norm = f.norm();
        } else {
            break;
        }
    }

    let lambda_next = scheme.multiplier(w_k, w, eps)?;
    let jacobian_condition = condition_2x2(&jacobian(w)?);
    Ok(StepResult {
        omega_next: w,
        lambda_next,
        newton_iters,
        jacobian_condition,
    })
}

/// A velocity one-step map with an attached multiplier: the common face of
/// the implicit schemes and the explicit reference method, used by the
/// trajectory engine and the consistency measurements.
///
/// Every [`DrepsScheme`] is an `OneStepMap` through Newton solution with
/// default settings.
pub trait OneStepMap {
    fn name(&self) -> &'static str;

    fn inertia(&self) -> &InertiaTensor;

    /// Advance the angular velocity by one step of size `eps` and return it
    /// together with the multiplier the method attaches to the arrival
    /// state.
    fn step(&self, w: Vec3, eps: f64) -> Result<(Vec3, f64)>;
}

impl<S: DrepsScheme + ?Sized> OneStepMap for S {
    fn name(&self) -> &'static str {
        DrepsScheme::name(self)
    }

    fn inertia(&self) -> &InertiaTensor {
        DrepsScheme::inertia(self)
    }

    fn step(&self, w: Vec3, eps: f64) -> Result<(Vec3, f64)> {
        let result = newton_solve(self, w, eps, &NewtonConfig::default())?;
        Ok((result.omega_next, result.lambda_next))
    }
}

/// Explicit fourth-order reference method wrapped as a one-step map; the
/// multiplier is the continuous formula at the arrival velocity.
#[derive(Debug, Clone, Copy)]
pub struct Rk4Map {
    inertia: InertiaTensor,
}

impl Rk4Map {
    pub fn new(inertia: InertiaTensor) -> Self {
        Self { inertia }
    }
}

impl OneStepMap for Rk4Map {
    fn name(&self) -> &'static str {
        "rk4"
    }

    fn inertia(&self) -> &InertiaTensor {
        &self.inertia
    }

    fn step(&self, w: Vec3, eps: f64) -> Result<(Vec3, f64)> {
        let w_next = crate::dynamics::rk4_step(&self.inertia, w, eps)?;
        let lambda = suslov_multiplier(&self.inertia, w_next)?;
        Ok((w_next, lambda))
    }
}

/// One full discrete step: reconstruct the attitude with the departure
/// velocity, solve the implicit equation for the arrival velocity, attach
/// the scheme multiplier.
pub fn dreps_step<S: DrepsScheme + ?Sized>(
    scheme: &S,
    state: &SuslovState,
    eps: f64,
    cfg: &NewtonConfig,
) -> Result<(SuslovState, f64)> {
    check_constrained(state.omega)?;
    let rotation_next = reconstruct_step(&state.rotation, state.omega, eps);
    let step = newton_solve(scheme, state.omega, eps, cfg)?;
    let next = SuslovState::new(step.omega_next, rotation_next, state.time + eps)?;
    Ok((next, step.lambda_next))
}
