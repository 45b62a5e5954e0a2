//! Trajectory runs and their CSV form: a streaming step iterator, the
//! per-step record of every monitored quantity, a writer with full
//! round-trip precision, and a reader that refuses malformed input instead
//! of panicking.
//!
//! Records are emitted for steps 0 through n inclusive. Row 0 carries the
//! initial data with the continuous-formula multiplier; row k > 0 carries
//! the multiplier the method attached to its arrival state. Attitudes are
//! reconstructed with the departure velocity for every method, so the
//! explicit reference method gets the same first-order attitude update as
//! the implicit schemes.

use std::io::{BufRead, Write};

use crate::config::{Method, RunConfig};
use crate::dreps::{MidpointScheme, OneStepMap, Rk4Map, VariationalScheme};
use crate::dynamics::{
    reconstruct_step, reduced_energy, suslov_multiplier, unreduced_constraint_residual,
    ConstraintCovector, InertiaTensor,
};
use crate::error::{Error, Result};
use crate::so3::{Mat3, Rot3, Vec3};

/// Every quantity monitored along a run, one row per step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub omega: Vec3,
    pub lambda: f64,
    pub energy: f64,
    /// Signed constraint value at the algebra level; exactly 0 for the
    /// constrained one-step maps.
    pub reduced_residual: f64,
    pub unreduced_residual: f64,
    pub orthonormality_defect: f64,
    pub rotation: Mat3,
}

/// Column layout of the trajectory CSV, fixed and documented.
pub const CSV_HEADER: &str = "t,omega1,omega2,omega3,lambda,energy,reduced_residual,\
unreduced_residual,orthonormality_defect,R11,R12,R13,R21,R22,R23,R31,R32,R33";

const CSV_COLUMNS: usize = 18;

/// Full round-trip precision: 17 significant decimal digits.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl TrajectoryRecord {
    fn measure(
        inertia: &InertiaTensor,
        a: &ConstraintCovector,
        t: f64,
        w: Vec3,
        r: &Rot3,
        lambda: f64,
    ) -> Self {
        Self {
            t,
            omega: w,
            lambda,
            energy: reduced_energy(inertia, w),
            reduced_residual: w.z,
            unreduced_residual: unreduced_constraint_residual(r, w, a),
            orthonormality_defect: r.defect(),
            rotation: *r.matrix(),
        }
    }

    /// One CSV row, 17 significant digits per value so reading it back
    /// reproduces every bit.
    pub fn to_csv_row(&self) -> String {
        let r = &self.rotation;
        let fields = [
            self.t,
            self.omega.x,
            self.omega.y,
            self.omega.z,
            self.lambda,
            self.energy,
            self.reduced_residual,
            self.unreduced_residual,
            self.orthonormality_defect,
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ];
        let mut row = String::with_capacity(CSV_COLUMNS * 24);
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                row.push(',');
            }
            row.push_str(&fmt_f64(*f));
        }
        row
    }

    /// Parse one CSV row. `line_no` is 1-based and used in error messages.
    pub fn from_csv_row(line: &str, line_no: usize) -> Result<Self> {
        let mut fields = [0.0f64; CSV_COLUMNS];
        let mut count = 0;
        for part in line.split(',') {
            if count == CSV_COLUMNS {
                return Err(Error::Csv {
                    detail: format!("line {line_no}: more than {CSV_COLUMNS} fields"),
                });
            }
            fields[count] = part.trim().parse::<f64>().map_err(|_| Error::Csv {
                detail: format!("line {line_no}: '{}' is not a number", part.trim()),
            })?;
            count += 1;
        }
        if count != CSV_COLUMNS {
            return Err(Error::Csv {
                detail: format!("line {line_no}: expected {CSV_COLUMNS} fields, got {count}"),
            });
        }
        Ok(Self {
            t: fields[0],
            omega: Vec3::new(fields[1], fields[2], fields[3]),
            lambda: fields[4],
            energy: fields[5],
            reduced_residual: fields[6],
            unreduced_residual: fields[7],
            orthonormality_defect: fields[8],
            rotation: Mat3::new(
                fields[9], fields[10], fields[11], fields[12], fields[13], fields[14], fields[15],
                fields[16], fields[17],
            ),
        })
    }
}

/// Build the one-step map a method name stands for.
pub fn build_map(method: Method, inertia: InertiaTensor) -> Box<dyn OneStepMap> {
    match method {
        Method::Midpoint => Box::new(MidpointScheme::new(inertia)),
        Method::Variational => Box::new(VariationalScheme::new(inertia)),
        Method::Rk4 => Box::new(Rk4Map::new(inertia)),
    }
}

/// Streaming trajectory: yields `n_steps + 1` records, or fewer followed by
/// one error if the solver fails mid-run. After an error (or the final
/// record) the iterator is exhausted.
pub struct TrajectoryIter {
    inertia: InertiaTensor,
    map: Box<dyn OneStepMap>,
    a: ConstraintCovector,
    eps: f64,
    n_steps: usize,
    k: usize,
    w: Vec3,
    r: Rot3,
    lambda: f64,
    pending_error: Option<Error>,
    done: bool,
}

impl TrajectoryIter {
    /// Index of the step the next yielded record belongs to; after an
    /// error, the index of the step that failed.
    pub fn step_index(&self) -> usize {
        self.k
    }
}

impl Iterator for TrajectoryIter {
    type Item = Result<TrajectoryRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        if let Some(e) = self.pending_error.take() {
            self.done = true;
            return Some(Err(e));
        }
        let record = TrajectoryRecord::measure(
            &self.inertia,
            &self.a,
            self.k as f64 * self.eps,
            self.w,
            &self.r,
            self.lambda,
        );
        if self.k < self.n_steps {
            match self.map.step(self.w, self.eps) {
                Ok((w_next, lambda_next)) => {
                    self.r = reconstruct_step(&self.r, self.w, self.eps);
                    self.w = w_next;
                    self.lambda = lambda_next;
                    self.k += 1;
                }
                Err(e) => {
                    self.k += 1;
                    self.pending_error = Some(Error::Step {
                        step: self.k,
                        source: Box::new(e),
                    });
                }
            }
        } else {
            self.done = true;
        }
        Some(Ok(record))
    }
}

/// Start a trajectory from the configured initial data with the identity
/// attitude. Row 0's multiplier is the continuous formula at omega0.
pub fn trajectory(config: &RunConfig) -> Result<TrajectoryIter> {
    config.validate()?;
    let inertia = config.inertia;
    let w0 = Vec3::new(config.omega0.x, config.omega0.y, config.omega0.z);
    let lambda0 = suslov_multiplier(&inertia, w0)?;
    Ok(TrajectoryIter {
        inertia,
        map: build_map(config.method, inertia),
        a: ConstraintCovector::canonical(),
        eps: config.eps,
        n_steps: config.n_steps(),
        k: 0,
        w: w0,
        r: Rot3::identity(),
        lambda: lambda0,
        pending_error: None,
        done: false,
    })
}

/// Run a trajectory to completion in memory.
pub fn run_trajectory(config: &RunConfig) -> Result<Vec<TrajectoryRecord>> {
    trajectory(config)?.collect()
}

/// Stream records to CSV. Returns the number of data rows written. On a
/// mid-run solver error the rows before the failure have been written.
pub fn write_csv<W: Write, I: Iterator<Item = Result<TrajectoryRecord>>>(
    out: &mut W,
    records: I,
) -> Result<usize> {
    writeln!(out, "{CSV_HEADER}")?;
    let mut rows = 0;
    for record in records {
        writeln!(out, "{}", record?.to_csv_row())?;
        rows += 1;
    }
    out.flush()?;
    Ok(rows)
}

/// Read a trajectory CSV produced by [`write_csv`]. Strict about the
/// header and the column count, tolerant of trailing carriage returns,
/// and total: any input yields a value or an error, never a panic.
pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<TrajectoryRecord>> {
    let mut records = Vec::new();
    let mut lines = input.lines();
    let header = match lines.next() {
        Some(h) => h.map_err(|e| Error::Csv {
            detail: format!("line 1: {e}"),
        })?,
        None => {
            return Err(Error::Csv {
                detail: "empty input: missing header".into(),
            })
        }
    };
    if header.trim_end_matches('\r') != CSV_HEADER {
        return Err(Error::Csv {
            detail: "line 1: unrecognized header".into(),
        });
    }
    for (idx, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::Csv {
            detail: format!("line {}: {e}", idx + 2),
        })?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        records.push(TrajectoryRecord::from_csv_row(line, idx + 2)?);
    }
    Ok(records)
}
