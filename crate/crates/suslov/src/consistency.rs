//! Empirical consistency-order measurement: one-step errors of a scheme
//! against high-accuracy references in the angular velocity, the
//! multiplier, the attitude (group distance), and the trivialized attitude
//! velocity, plus log-log slope fits over a step-size grid.
//!
//! The velocity reference integrates the reduced equations with RK4
//! substeps, doubling the substep count until two successive resolutions
//! agree to 1e-13. The attitude reference composes Cayley substeps driven
//! by the midpoint-resolved velocity, doubling from 1000 substeps until two
//! successive resolutions agree to 1e-12 in the group metric. Both
//! references refuse (with a fit error) rather than silently return an
//! unconverged value.

use std::fmt;

use crate::dreps::OneStepMap;
use crate::dynamics::{integrate_reference, reconstruct_step, suslov_multiplier, InertiaTensor};
use crate::error::{Error, Result};
use crate::so3::{group_distance, hat, Rot3, Vec3};

/// Error samples below this magnitude are round-off, not signal; fits
/// refuse to run on them.
pub const MEASURABLE_FLOOR: f64 = 1e-15;

/// Agreement required between successive velocity-reference resolutions.
const OMEGA_AGREEMENT_TOL: f64 = 1e-13;

/// Agreement required between successive attitude-reference resolutions,
/// measured in the group metric.
const GROUP_AGREEMENT_TOL: f64 = 1e-12;

/// Starting substep count for the attitude reference.
const GROUP_SUBSTEPS: usize = 1000;

/// Substep ceilings for the doubling escalations.
const OMEGA_SUBSTEP_CAP: usize = 65_536;
const GROUP_SUBSTEP_CAP: usize = 128_000;

/// One-step errors of a scheme at a single step size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSample {
    pub eps: f64,
    /// |w_ref - w_next| in the Euclidean norm.
    pub err_omega: f64,
    /// |lambda_ref - lambda_next|.
    pub err_lambda: f64,
    /// Group distance between the reference attitude and the scheme's.
    pub err_group: f64,
    /// Entrywise norm of the difference of trivialized attitude velocities.
    pub err_velocity: f64,
}

/// Least-squares line through (ln eps, ln err) for one error quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantityFit {
    pub quantity: &'static str,
    /// Consistency order estimate: local error exponent.
    pub slope: f64,
    /// Intercept in log space; exp(intercept) is the leading constant.
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub rms_residual: f64,
}

/// Full consistency measurement for one scheme over a step-size grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub scheme: &'static str,
    /// Samples sorted by increasing eps.
    pub samples: Vec<ErrorSample>,
    /// Fits in fixed order: omega, lambda, group, velocity.
    pub fits: Vec<QuantityFit>,
    /// Constant term of the affine fit err_lambda = a + b eps. Near zero
    /// for schemes with a consistent multiplier; near the offset magnitude
    /// for the variational scheme, whose multiplier error does not vanish
    /// with eps.
    pub lambda_offset_estimate: f64,
}

impl ConsistencyReport {
    pub fn fit(&self, quantity: &str) -> Option<&QuantityFit> {
        self.fits.iter().find(|f| f.quantity == quantity)
    }
}

impl fmt::Display for ConsistencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lo = self.samples.first().map(|s| s.eps).unwrap_or(f64::NAN);
        let hi = self.samples.last().map(|s| s.eps).unwrap_or(f64::NAN);
        writeln!(
            f,
            "scheme {}: {} samples, eps in [{lo:.4e}, {hi:.4e}]",
            self.scheme,
            self.samples.len()
        )?;
        writeln!(
            f,
            "  {:<10} {:>8} {:>14} {:>10}",
            "quantity", "slope", "leading const", "fit rms"
        )?;
        for fit in &self.fits {
            writeln!(
                f,
                "  {:<10} {:>8.4} {:>14.4e} {:>10.2e}",
                fit.quantity,
                fit.slope,
                fit.intercept.exp(),
                fit.rms_residual
            )?;
        }
        write!(
            f,
            "  multiplier constant term estimate: {:.6e}",
            self.lambda_offset_estimate
        )
    }
}

/// Default measurement grid: 8 step sizes log-spaced across two decades,
/// chosen so the smallest third-order errors stay above round-off for
/// data of unit scale.
pub fn default_eps_grid() -> Vec<f64> {
    log_spaced_grid(10f64.powf(-3.5), 10f64.powf(-1.5), 8).expect("static grid parameters")
}

/// `count` step sizes log-spaced from `min` to `max` inclusive.
pub fn log_spaced_grid(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if !(min > 0.0) || !(max > min) || !max.is_finite() {
        return Err(Error::Fit {
            detail: format!("step-size range [{min}, {max}] is not positive and increasing"),
        });
    }
    if count < 5 {
        return Err(Error::Fit {
            detail: format!("{count} step sizes requested; slope fits need at least 5"),
        });
    }
    let (ln_min, ln_max) = (min.ln(), max.ln());
    Ok((0..count)
        .map(|i| {
            let t = i as f64 / (count - 1) as f64;
            (ln_min + t * (ln_max - ln_min)).exp()
        })
        .collect())
}

/// Starting substep count for the velocity reference, chosen so the
/// fifth-order truncation eps^5 / n^4 sits below 1e-18. Smaller counts at
/// small eps keep accumulated round-off minimal, which matters when the
/// measured one-step errors are only a few times machine precision.
fn initial_omega_substeps(eps: f64) -> usize {
    let needed = (eps.abs().powi(5) / 1e-18).powf(0.25).ceil();
    (needed as usize).clamp(1, OMEGA_SUBSTEP_CAP / 2)
}

/// Reference angular velocity at time eps, by substep doubling until two
/// successive resolutions agree to 1e-13.
fn reference_omega(inertia: &InertiaTensor, w0: Vec3, eps: f64) -> Result<Vec3> {
    let mut n = initial_omega_substeps(eps);
    let mut coarse = *integrate_reference(inertia, w0, eps / n as f64, n)?
        .last()
        .ok_or(Error::EmptyTrajectory)?;
    while n <= OMEGA_SUBSTEP_CAP {
        let fine = *integrate_reference(inertia, w0, eps / (2 * n) as f64, 2 * n)?
            .last()
            .ok_or(Error::EmptyTrajectory)?;
        if (fine - coarse).norm() <= OMEGA_AGREEMENT_TOL * (1.0 + fine.norm()) {
            return Ok(fine);
        }
        coarse = fine;
        n *= 2;
    }
    Err(Error::Fit {
        detail: format!("velocity reference did not settle at eps = {eps:.3e}"),
    })
}

/// Attitude after composing `n` Cayley substeps, each driven by the
/// velocity resolved at the substep midpoint.
fn composed_rotation(
    inertia: &InertiaTensor,
    r0: &Rot3,
    w0: Vec3,
    eps: f64,
    n: usize,
) -> Result<Rot3> {
    let half_grid = integrate_reference(inertia, w0, eps / (2 * n) as f64, 2 * n)?;
    let h = eps / n as f64;
    let mut r = *r0;
    for i in 0..n {
        r = reconstruct_step(&r, half_grid[2 * i + 1], h);
    }
    Ok(r)
}

/// Reference attitude at time eps, by substep doubling until two
/// successive compositions agree to 1e-12 in the group metric.
fn reference_rotation(inertia: &InertiaTensor, r0: &Rot3, w0: Vec3, eps: f64) -> Result<Rot3> {
    let mut n = GROUP_SUBSTEPS;
    let mut coarse = composed_rotation(inertia, r0, w0, eps, n)?;
    while n <= GROUP_SUBSTEP_CAP {
        let fine = composed_rotation(inertia, r0, w0, eps, 2 * n)?;
        if group_distance(coarse.matrix(), fine.matrix()) <= GROUP_AGREEMENT_TOL {
            return Ok(fine);
        }
        coarse = fine;
        n *= 2;
    }
    Err(Error::Fit {
        detail: format!("attitude reference did not settle at eps = {eps:.3e}"),
    })
}

/// Measure one step of `map` from (w0, r0) against the references.
pub fn one_step_errors(map: &dyn OneStepMap, w0: Vec3, r0: &Rot3, eps: f64) -> Result<ErrorSample> {
    let inertia = map.inertia();
    let (w_next, lambda_next) = map.step(w0, eps)?;
    let r_next = reconstruct_step(r0, w0, eps);

    let w_ref = reference_omega(inertia, w0, eps)?;
    let lambda_ref = suslov_multiplier(inertia, w_ref)?;
    let r_ref = reference_rotation(inertia, r0, w0, eps)?;

    let sample = ErrorSample {
        eps,
        err_omega: (w_ref - w_next).norm(),
        err_lambda: (lambda_ref - lambda_next).abs(),
        err_group: group_distance(r_ref.matrix(), r_next.matrix()),
        err_velocity: (r_ref.matrix() * hat(w_ref).matrix()
            - r_next.matrix() * hat(w_next).matrix())
        .norm(),
    };
    let finite = sample.err_omega.is_finite()
        && sample.err_lambda.is_finite()
        && sample.err_group.is_finite()
        && sample.err_velocity.is_finite();
    if !finite {
        return Err(Error::Fit {
            detail: format!("non-finite error sample at eps = {eps:.3e}"),
        });
    }
    Ok(sample)
}

fn log_log_fit(quantity: &'static str, points: &[(f64, f64)]) -> QuantityFit {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0.ln()).sum();
    let sy: f64 = points.iter().map(|p| p.1.ln()).sum();
    let sxx: f64 = points.iter().map(|p| p.0.ln() * p.0.ln()).sum();
    let sxy: f64 = points.iter().map(|p| p.0.ln() * p.1.ln()).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let rms = (points
        .iter()
        .map(|p| {
            let r = p.1.ln() - (intercept + slope * p.0.ln());
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    QuantityFit {
        quantity,
        slope,
        intercept,
        rms_residual: rms,
    }
}

/// Constant term of the affine least-squares fit err = a + b eps.
fn affine_constant(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    (sy * sxx - sx * sxy) / (n * sxx - sx * sx)
}

/// Run the one-step measurement over a grid and fit consistency orders.
///
/// Errors with a fit error if the grid is unusable or any error sample
/// falls below [`MEASURABLE_FLOOR`], where slopes would measure round-off
/// rather than truncation.
pub fn estimate_order(
    map: &dyn OneStepMap,
    w0: Vec3,
    eps_grid: &[f64],
) -> Result<ConsistencyReport> {
    if eps_grid.len() < 5 {
        return Err(Error::Fit {
            detail: format!(
                "{} step sizes given; slope fits need at least 5",
                eps_grid.len()
            ),
        });
    }
    if eps_grid.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::Fit {
            detail: "step sizes must be finite and positive".into(),
        });
    }
    let mut grid = eps_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite step sizes"));

    let r0 = Rot3::identity();
    let mut samples = Vec::with_capacity(grid.len());
    for &eps in &grid {
        let sample = one_step_errors(map, w0, &r0, eps)?;
        let smallest = sample
            .err_omega
            .min(sample.err_lambda)
            .min(sample.err_group)
            .min(sample.err_velocity);
        if smallest < MEASURABLE_FLOOR {
            return Err(Error::Fit {
                detail: format!(
                    "error sample {smallest:.3e} at eps = {eps:.3e} is below measurable precision"
                ),
            });
        }
        samples.push(sample);
    }

    let collect = |f: fn(&ErrorSample) -> f64| -> Vec<(f64, f64)> {
        samples.iter().map(|s| (s.eps, f(s))).collect()
    };
    let fits = vec![
        log_log_fit("omega", &collect(|s| s.err_omega)),
        log_log_fit("lambda", &collect(|s| s.err_lambda)),
        log_log_fit("group", &collect(|s| s.err_group)),
        log_log_fit("velocity", &collect(|s| s.err_velocity)),
    ];
    let lambda_offset_estimate = affine_constant(&collect(|s| s.err_lambda));

    Ok(ConsistencyReport {
        scheme: map.name(),
        samples,
        fits,
        lambda_offset_estimate,
    })
}
