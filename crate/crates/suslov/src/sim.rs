//! Orchestration behind the command line tool: trajectory runs with CSV
//! output and worst-case summaries, two-method comparisons on a shared
//! grid, one-step consistency studies, and gnuplot script emission.
//!
//! Everything here is ordinary library code; the binary only parses
//! flags, picks output streams, and maps error kinds to exit codes.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::{Method, RunConfig};
use crate::consistency::{estimate_order, ConsistencyReport};
use crate::dreps::inconsistency_offset;
use crate::dynamics::{suslov_multiplier, InertiaTensor};
use crate::error::{Error, Result};
use crate::trajectory::{
    build_map, fmt_f64, run_trajectory, write_csv, TrajectoryRecord, CSV_HEADER,
};

/// Margin allowed between a fitted slope and its theoretical order.
pub const SLOPE_TOL: f64 = 0.15;

/// Relative margin allowed between the measured variational multiplier
/// offset and its predicted magnitude.
pub const OFFSET_RTOL: f64 = 0.05;

/// Column layout of the comparison CSV: the shared time column, then
/// omega, lambda, and energy for each method.
pub const COMPARE_CSV_HEADER: &str = "t,omega1_a,omega2_a,omega3_a,lambda_a,energy_a,\
omega1_b,omega2_b,omega3_b,lambda_b,energy_b";

/// Column layout of the consistency study CSV.
pub const STUDY_CSV_HEADER: &str = "eps,err_omega,err_lambda,err_group,err_velocity";

/// Worst-case deviations of the monitored quantities along one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    /// max |E_l(k) - E_l(0)|.
    pub max_energy_drift: f64,
    /// max |omega3|: the reduced constraint, zero for the implicit schemes.
    pub max_reduced_residual: f64,
    /// max unreduced constraint residual, measured through the attitude.
    pub max_unreduced_residual: f64,
    pub max_orthonormality_defect: f64,
    /// max |lambda_k - lambda(omega_k)|: distance between the method's
    /// multiplier and the continuous formula at the method's own states.
    pub max_multiplier_gap: f64,
}

impl MethodSummary {
    fn from_records(
        method: Method,
        inertia: &InertiaTensor,
        records: &[TrajectoryRecord],
    ) -> Result<Self> {
        let first = records.first().ok_or(Error::EmptyTrajectory)?;
        let e0 = first.energy;
        let mut summary = MethodSummary {
            method,
            max_energy_drift: 0.0,
            max_reduced_residual: 0.0,
            max_unreduced_residual: 0.0,
            max_orthonormality_defect: 0.0,
            max_multiplier_gap: 0.0,
        };
        for r in records {
            summary.max_energy_drift = summary.max_energy_drift.max((r.energy - e0).abs());
            summary.max_reduced_residual =
                summary.max_reduced_residual.max(r.reduced_residual.abs());
            summary.max_unreduced_residual = summary
                .max_unreduced_residual
                .max(r.unreduced_residual.abs());
            summary.max_orthonormality_defect = summary
                .max_orthonormality_defect
                .max(r.orthonormality_defect);
            let continuous = suslov_multiplier(inertia, r.omega)?;
            summary.max_multiplier_gap = summary
                .max_multiplier_gap
                .max((r.lambda - continuous).abs());
        }
        Ok(summary)
    }

    fn rows(&self) -> [(&'static str, f64); 5] {
        [
            ("max |E_l - E_l(0)|", self.max_energy_drift),
            ("max |omega3|", self.max_reduced_residual),
            ("max unreduced residual", self.max_unreduced_residual),
            ("max orthonormality defect", self.max_orthonormality_defect),
            ("max |lambda - lambda(omega)|", self.max_multiplier_gap),
        ]
    }
}

impl fmt::Display for MethodSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<28} {}", "method", self.method)?;
        let rows = self.rows();
        for (i, (label, value)) in rows.iter().enumerate() {
            if i + 1 < rows.len() {
                writeln!(f, "{label:<28} {value:.6e}")?;
            } else {
                write!(f, "{label:<28} {value:.6e}")?;
            }
        }
        Ok(())
    }
}

/// Outcome of a completed trajectory run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunReport {
    pub summary: MethodSummary,
    /// Data rows written, steps + 1.
    pub rows: usize,
    pub final_time: f64,
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<28} {}", "rows", self.rows)?;
        writeln!(f, "{:<28} {:.6e}", "final time", self.final_time)?;
        write!(f, "{}", self.summary)
    }
}

/// Comparison of two methods on the same initial data and time grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareReport {
    pub a: MethodSummary,
    pub b: MethodSummary,
    /// max |omega_a(k) - omega_b(k)| over the shared grid.
    pub max_omega_gap: f64,
    /// Data rows in the merged CSV.
    pub rows: usize,
}

impl fmt::Display for CompareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<28} {:>16} {:>16}",
            "quantity",
            format!("a: {}", self.a.method),
            format!("b: {}", self.b.method)
        )?;
        for ((label, va), (_, vb)) in self.a.rows().iter().zip(self.b.rows().iter()) {
            writeln!(f, "{label:<28} {va:>16.6e} {vb:>16.6e}")?;
        }
        writeln!(f, "{:<28} {:>16}", "rows", self.rows)?;
        write!(
            f,
            "{:<28} {:>16.6e}",
            "max |omega_a - omega_b|", self.max_omega_gap
        )
    }
}

/// Sibling path for an emitted gnuplot script: same stem, extension `gp`.
pub fn plot_script_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("gp")
}

/// Run the configured trajectory and write its CSV to `config.out`, or to
/// standard output when no path is set. Returns the worst-case summary.
///
/// With `emit_plots` set, a gnuplot script is written next to the CSV
/// (same stem, extension `gp`). That requires an output path, because the
/// script references the CSV file by name.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    if config.emit_plots && config.out.is_none() {
        return Err(Error::Config {
            detail: "plot scripts reference the trajectory CSV by file name; set an output path"
                .into(),
        });
    }
    let records = run_trajectory(config)?;
    match &config.out {
        Some(path) => {
            let mut out = BufWriter::new(File::create(path)?);
            write_csv(&mut out, records.iter().map(|r| Ok(*r)))?;
            if config.emit_plots {
                emit_run_plot_script(&records, path, &plot_script_path(path))?;
            }
        }
        None => {
            let stdout = io::stdout();
            write_csv(&mut stdout.lock(), records.iter().map(|r| Ok(*r)))?;
        }
    }
    let summary = MethodSummary::from_records(config.method, &config.inertia, &records)?;
    Ok(RunReport {
        summary,
        rows: records.len(),
        final_time: records[records.len() - 1].t,
    })
}

/// Integrate the same initial data with two methods and write an aligned
/// merged CSV (see [`COMPARE_CSV_HEADER`]) to the given writer.
///
/// The configs must agree exactly on inertia, initial velocity, step
/// size, and final time; the methods are free to differ (or not: equal
/// methods give bit-identical column pairs).
pub fn compare<W: Write>(
    config_a: &RunConfig,
    config_b: &RunConfig,
    csv: &mut W,
) -> Result<CompareReport> {
    config_a.validate()?;
    config_b.validate()?;
    if config_a.inertia.matrix() != config_b.inertia.matrix()
        || config_a.omega0 != config_b.omega0
        || config_a.eps != config_b.eps
        || config_a.t_final != config_b.t_final
    {
        return Err(Error::Config {
            detail: "comparison needs identical inertia, omega0, eps, and t_final".into(),
        });
    }
    let records_a = run_trajectory(config_a)?;
    let records_b = run_trajectory(config_b)?;
    writeln!(csv, "{COMPARE_CSV_HEADER}")?;
    let mut max_omega_gap = 0.0f64;
    for (ra, rb) in records_a.iter().zip(&records_b) {
        let fields = [
            ra.t, ra.omega.x, ra.omega.y, ra.omega.z, ra.lambda, ra.energy, rb.omega.x, rb.omega.y,
            rb.omega.z, rb.lambda, rb.energy,
        ];
        let row: Vec<String> = fields.iter().map(|x| fmt_f64(*x)).collect();
        writeln!(csv, "{}", row.join(","))?;
        max_omega_gap = max_omega_gap.max((ra.omega - rb.omega).norm());
    }
    csv.flush()?;
    Ok(CompareReport {
        a: MethodSummary::from_records(config_a.method, &config_a.inertia, &records_a)?,
        b: MethodSummary::from_records(config_b.method, &config_b.inertia, &records_b)?,
        max_omega_gap,
        rows: records_a.len(),
    })
}

/// Measure one-step errors of the configured method over a step-size grid
/// and write one CSV row per sample (see [`STUDY_CSV_HEADER`]).
///
/// Grid problems and samples below the measurable floor surface as fit
/// errors, exactly as from the underlying order estimate.
pub fn consistency_study<W: Write>(
    config: &RunConfig,
    grid: &[f64],
    csv: &mut W,
) -> Result<ConsistencyReport> {
    config.validate()?;
    let map = build_map(config.method, config.inertia);
    let report = estimate_order(map.as_ref(), config.omega0, grid)?;
    writeln!(csv, "{STUDY_CSV_HEADER}")?;
    for s in &report.samples {
        let fields = [
            s.eps,
            s.err_omega,
            s.err_lambda,
            s.err_group,
            s.err_velocity,
        ];
        let row: Vec<String> = fields.iter().map(|x| fmt_f64(*x)).collect();
        writeln!(csv, "{}", row.join(","))?;
    }
    csv.flush()?;
    Ok(report)
}

/// Check a study's fitted slopes against the theoretical orders of the
/// configured scheme. Returns one message per violated expectation; an
/// empty list means every expectation held.
///
/// Both implicit schemes carry third-order one-step velocity errors and
/// second-order attitude and attitude-velocity errors. The midpoint
/// multiplier is third order too; the variational multiplier is instead
/// checked against its predicted constant offset, which is the point of
/// that scheme's study. The explicit reference method has no claimed
/// orders, so asking for assertions on it is a configuration error.
pub fn check_expected_orders(
    config: &RunConfig,
    report: &ConsistencyReport,
) -> Result<Vec<String>> {
    let mut expected: Vec<(&str, f64)> = vec![("omega", 3.0), ("group", 2.0), ("velocity", 2.0)];
    match config.method {
        Method::Midpoint => expected.push(("lambda", 3.0)),
        Method::Variational => {}
        Method::Rk4 => {
            return Err(Error::Config {
                detail: "order assertions apply to the midpoint and variational schemes only"
                    .into(),
            });
        }
    }
    let mut violations = Vec::new();
    for (quantity, want) in expected {
        match report.fit(quantity) {
            Some(fit) if (fit.slope - want).abs() <= SLOPE_TOL => {}
            Some(fit) => violations.push(format!(
                "{quantity} slope {:.4} outside {want:.1} +/- {SLOPE_TOL}",
                fit.slope
            )),
            None => violations.push(format!("no fit found for {quantity}")),
        }
    }
    if config.method == Method::Variational {
        let predicted = inconsistency_offset(&config.inertia, config.omega0)?.abs();
        if predicted > 0.0 {
            let measured = report.lambda_offset_estimate.abs();
            if (measured - predicted).abs() > OFFSET_RTOL * predicted {
                violations.push(format!(
                    "multiplier offset {measured:.6e} misses the predicted {predicted:.6e} \
                     by more than {:.0}%",
                    OFFSET_RTOL * 100.0
                ));
            }
        }
    }
    Ok(violations)
}

fn gnuplot_quote(path: &Path) -> String {
    format!("'{}'", path.display().to_string().replace('\'', "''"))
}

fn write_plot_preamble<W: Write>(out: &mut W, csv_path: &Path, layout: &str) -> io::Result<()> {
    writeln!(
        out,
        "# generated plotting script; expects gnuplot 5.4 or newer"
    )?;
    writeln!(out, "set datafile separator \",\"")?;
    writeln!(out, "set datafile columnheaders")?;
    writeln!(out, "csv = {}", gnuplot_quote(csv_path))?;
    writeln!(out, "set terminal pngcairo size 1350,900")?;
    writeln!(
        out,
        "set output {}",
        gnuplot_quote(&csv_path.with_extension("png"))
    )?;
    writeln!(out, "set multiplot layout {layout}")?;
    writeln!(out, "set xlabel \"t\"")?;
    writeln!(out, "set key top right")
}

fn write_run_script(csv_path: &Path, script_path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(script_path)?);
    write_plot_preamble(&mut out, csv_path, "3,2")?;
    for column in ["omega1", "omega2", "lambda"] {
        writeln!(
            out,
            "plot csv using \"t\":\"{column}\" with lines title \"{column}\""
        )?;
    }
    writeln!(
        out,
        "plot csv using \"t\":\"reduced_residual\" with lines title \"reduced residual\", \\"
    )?;
    writeln!(
        out,
        "     csv using \"t\":\"unreduced_residual\" with lines title \"unreduced residual\""
    )?;
    writeln!(
        out,
        "plot csv using \"t\":\"orthonormality_defect\" with lines title \"orthonormality defect\""
    )?;
    writeln!(
        out,
        "plot csv using \"t\":\"energy\" with lines title \"energy\""
    )?;
    writeln!(out, "unset multiplot")?;
    writeln!(out, "unset output")?;
    out.flush()?;
    Ok(())
}

fn write_compare_script(csv_path: &Path, script_path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(script_path)?);
    write_plot_preamble(&mut out, csv_path, "2,3")?;
    for column in ["omega1", "omega2", "omega3", "lambda", "energy"] {
        writeln!(
            out,
            "plot csv using \"t\":\"{column}_a\" with lines title \"{column} a\", \\"
        )?;
        writeln!(
            out,
            "     csv using \"t\":\"{column}_b\" with lines title \"{column} b\""
        )?;
    }
    writeln!(out, "unset multiplot")?;
    writeln!(out, "unset output")?;
    out.flush()?;
    Ok(())
}

/// Write a gnuplot script drawing the six monitored panels of a run CSV:
/// the two free velocity components, the multiplier, both constraint
/// residuals, the orthonormality defect, and the reduced energy, all
/// against time.
///
/// An empty record list is refused before the script file is created.
pub fn emit_run_plot_script(
    records: &[TrajectoryRecord],
    csv_path: &Path,
    script_path: &Path,
) -> Result<()> {
    if records.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    write_run_script(csv_path, script_path)
}

/// Write a gnuplot script drawing the five merged panels of a comparison
/// CSV: omega1, omega2, omega3, lambda, and energy, each with one curve
/// per method.
///
/// Empty record lists are refused before the script file is created.
pub fn emit_compare_plot_script(
    records_a: &[TrajectoryRecord],
    records_b: &[TrajectoryRecord],
    csv_path: &Path,
    script_path: &Path,
) -> Result<()> {
    if records_a.is_empty() || records_b.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    write_compare_script(csv_path, script_path)
}

/// Inspect an existing CSV produced by [`run`] or [`compare`] and write
/// the matching plot script. The kind is recognized by the header line;
/// a header-only file is an empty trajectory and is refused.
pub fn emit_plot_script_for_csv(csv_path: &Path, script_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(csv_path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").trim_end_matches('\r');
    let rows = lines.filter(|l| !l.trim().is_empty()).count();
    if header != CSV_HEADER && header != COMPARE_CSV_HEADER {
        return Err(Error::Csv {
            detail: "unrecognized header; expected a trajectory or comparison CSV".into(),
        });
    }
    if rows == 0 {
        return Err(Error::EmptyTrajectory);
    }
    if header == CSV_HEADER {
        write_run_script(csv_path, script_path)
    } else {
        write_compare_script(csv_path, script_path)
    }
}
