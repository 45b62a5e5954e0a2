//! Run configuration: a flat key = value text format, defaults encoding the
//! reference experiment, and validation.
//!
//! The format is deliberately trivial: one `key = value` pair per line,
//! `#` starts a comment, blank lines are skipped. Vector-valued keys take
//! whitespace-separated numbers. Unknown and duplicate keys are errors, so
//! typos surface instead of silently running the default. Every failure in
//! this module is a configuration error; the parser never panics on any
//! input.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dynamics::{InertiaTensor, STATE_CONSTRAINT_TOL};
use crate::error::{Error, Result};
use crate::so3::Vec3;

/// Integration method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Midpoint,
    Variational,
    Rk4,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Midpoint, Method::Variational, Method::Rk4];

    pub fn name(self) -> &'static str {
        match self {
            Method::Midpoint => "midpoint",
            Method::Variational => "variational",
            Method::Rk4 => "rk4",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "midpoint" => Ok(Method::Midpoint),
            "variational" => Ok(Method::Variational),
            "rk4" => Ok(Method::Rk4),
            other => Err(Error::Config {
                detail: format!(
                    "unknown method '{other}' (expected midpoint, variational, or rk4)"
                ),
            }),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything a trajectory run needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub inertia: InertiaTensor,
    pub omega0: Vec3,
    /// Step size, seconds.
    pub eps: f64,
    /// Final time, seconds.
    pub t_final: f64,
    pub method: Method,
    /// CSV destination; standard output when absent.
    pub out: Option<PathBuf>,
    pub emit_plots: bool,
}

impl RunConfig {
    /// The reference experiment: coupled inertia tensor, planar initial
    /// velocity, a thousand millisecond steps over ten seconds.
    pub fn default_experiment() -> Self {
        let inertia = InertiaTensor::from_row_major([1.0, 0.1, 0.2, 0.1, 1.0, 0.2, 0.2, 0.1, 1.0])
            .expect("reference inertia tensor is well conditioned");
        Self {
            inertia,
            omega0: Vec3::new(0.4, 0.5, 0.0),
            eps: 1e-3,
            t_final: 10.0,
            method: Method::Midpoint,
            out: None,
            emit_plots: false,
        }
    }

    /// Checks the cross-field invariants. Field setters and flag overrides
    /// may leave the config invalid; call this after the last mutation.
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config {
                detail: format!("eps must be positive and finite, got {}", self.eps),
            });
        }
        if !(self.t_final.is_finite() && self.t_final >= self.eps) {
            return Err(Error::Config {
                detail: format!(
                    "t_final must be finite and at least eps, got t_final = {}, eps = {}",
                    self.t_final, self.eps
                ),
            });
        }
        if self.omega0.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config {
                detail: "omega0 must be finite".into(),
            });
        }
        if !(self.omega0.z.abs() <= STATE_CONSTRAINT_TOL) {
            return Err(Error::Config {
                detail: format!(
                    "omega0 must satisfy the constraint: |third component| <= {STATE_CONSTRAINT_TOL}, got {}",
                    self.omega0.z
                ),
            });
        }
        Ok(())
    }

    /// Number of steps the run will take: floor(t_final / eps).
    pub fn n_steps(&self) -> usize {
        (self.t_final / self.eps).floor() as usize
    }
}

fn parse_floats(key: &str, value: &str, n: usize) -> Result<Vec<f64>> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != n {
        return Err(Error::Config {
            detail: format!("{key} takes {n} numbers, got {}", parts.len()),
        });
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<f64>().map_err(|_| Error::Config {
                detail: format!("{key}: '{p}' is not a number"),
            })
        })
        .collect()
}

fn parse_float(key: &str, value: &str) -> Result<f64> {
    Ok(parse_floats(key, value, 1)?[0])
}

/// Parse a configuration from text. Keys not present keep their default
/// values from the reference experiment; the result is validated.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut config = RunConfig::default_experiment();
    let mut seen: Vec<String> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = match raw_line.split_once('#') {
            Some((before, _comment)) => before,
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config {
                detail: format!("line {}: expected 'key = value', got '{line}'", idx + 1),
            });
        };
        let key = key.trim();
        let value = value.trim();
        if seen.iter().any(|s| s == key) {
            return Err(Error::Config {
                detail: format!("line {}: duplicate key '{key}'", idx + 1),
            });
        }
        seen.push(key.to_string());
        match key {
            "inertia" => {
                let v = parse_floats(key, value, 9)?;
                let entries: [f64; 9] = v.try_into().expect("length checked");
                config.inertia =
                    InertiaTensor::from_row_major(entries).map_err(|e| Error::Config {
                        detail: format!("inertia: {e}"),
                    })?;
            }
            "omega0" => {
                let v = parse_floats(key, value, 3)?;
                config.omega0 = Vec3::new(v[0], v[1], v[2]);
            }
            "eps" => config.eps = parse_float(key, value)?,
            "t_final" => config.t_final = parse_float(key, value)?,
            "method" => config.method = value.parse()?,
            "out" => {
                if value.is_empty() {
                    return Err(Error::Config {
                        detail: "out: empty path".into(),
                    });
                }
                config.out = Some(PathBuf::from(value));
            }
            "emit_plots" => {
                config.emit_plots = match value {
                    "true" => true,
                    "false" => false,
                    other => {
                        return Err(Error::Config {
                            detail: format!("emit_plots: expected true or false, got '{other}'"),
                        })
                    }
                };
            }
            other => {
                return Err(Error::Config {
                    detail: format!("line {}: unknown key '{other}'", idx + 1),
                });
            }
        }
    }
    config.validate()?;
    Ok(config)
}

/// Read and parse a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
        detail: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_experiment_is_the_reference_data() {
        let c = RunConfig::default_experiment();
        let m = c.inertia.matrix();
        assert_eq!(m[(0, 0)], 1.0);
        assert_eq!(m[(0, 1)], 0.1);
        assert_eq!(m[(0, 2)], 0.2);
        assert_eq!(m[(1, 0)], 0.1);
        assert_eq!(m[(2, 0)], 0.2);
        assert_eq!(m[(2, 1)], 0.1);
        assert_eq!(c.omega0, Vec3::new(0.4, 0.5, 0.0));
        assert_eq!(c.eps, 1e-3);
        assert_eq!(c.t_final, 10.0);
        assert_eq!(c.method, Method::Midpoint);
        assert!(c.out.is_none());
        assert!(!c.emit_plots);
        c.validate().unwrap();
        assert_eq!(c.n_steps(), 10_000);
    }

    #[test]
    fn shipped_default_config_is_the_default_experiment() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default.cfg");
        let from_file = load_config(Path::new(path)).unwrap();
        let built_in = RunConfig::default_experiment();
        assert_eq!(from_file.inertia.matrix(), built_in.inertia.matrix());
        assert_eq!(from_file.omega0, built_in.omega0);
        assert_eq!(from_file.eps, built_in.eps);
        assert_eq!(from_file.t_final, built_in.t_final);
        assert_eq!(from_file.method, built_in.method);
        assert!(from_file.out.is_none());
        assert!(!from_file.emit_plots);
    }

    #[test]
    fn full_round_trip_of_every_key() {
        let text = "\
# experiment setup
inertia = 2 0.1 0.2 0.1 3 0.2 0.2 0.1 4   # row-major
omega0 = 0.1 -0.2 0
eps = 0.5
t_final = 2.0
method = variational
out = results/run.csv
emit_plots = true
";
        let c = parse_config_str(text).unwrap();
        assert_eq!(c.inertia.matrix()[(1, 1)], 3.0);
        assert_eq!(c.omega0, Vec3::new(0.1, -0.2, 0.0));
        assert_eq!(c.eps, 0.5);
        assert_eq!(c.t_final, 2.0);
        assert_eq!(c.method, Method::Variational);
        assert_eq!(c.out.as_deref(), Some(Path::new("results/run.csv")));
        assert!(c.emit_plots);
        assert_eq!(c.n_steps(), 4);
    }

    #[test]
    fn omitted_keys_keep_defaults() {
        let c = parse_config_str("eps = 0.25\n").unwrap();
        assert_eq!(c.eps, 0.25);
        assert_eq!(c.t_final, 10.0);
        assert_eq!(c.method, Method::Midpoint);
    }

    #[test]
    fn rejects_malformed_input() {
        let cases: &[(&str, &str)] = &[
            ("word salad", "expected 'key = value'"),
            ("speed = 3", "unknown key"),
            ("eps = fast", "not a number"),
            ("eps = 1 2", "takes 1 numbers"),
            ("inertia = 1 2 3", "takes 9 numbers"),
            ("omega0 = 0.4 0.5 0.1", "constraint"),
            ("eps = -1", "positive"),
            ("eps = 0", "positive"),
            ("eps = inf", "positive"),
            ("eps = 2\nt_final = 1", "at least eps"),
            ("t_final = nan", "finite"),
            ("eps = 1\neps = 2", "duplicate key"),
            ("method = euler", "unknown method"),
            ("emit_plots = yes", "expected true or false"),
            ("out =", "empty path"),
            ("omega0 = 1 nan 0", "finite"),
            ("inertia = 1 0 0 0 1 0 0 0 1\ninertia2 = 1", "unknown key"),
        ];
        for (text, needle) in cases {
            match parse_config_str(text) {
                Err(Error::Config { detail }) => {
                    assert!(
                        detail.contains(needle),
                        "input {text:?}: expected '{needle}' in '{detail}'"
                    );
                }
                other => panic!("input {text:?}: expected config error, got {other:?}"),
            }
        }
    }

    #[test]
    fn rejects_degenerate_inertia_as_config_error() {
        // A tensor whose upper-left block is singular cannot drive the
        // reduced equations.
        let text = "inertia = 1 1 0 1 1 0 0 0 1";
        assert!(matches!(parse_config_str(text), Err(Error::Config { .. })));
    }

    #[test]
    fn omega0_near_zero_third_component_is_accepted() {
        let c = parse_config_str("omega0 = 0.4 0.5 1e-14").unwrap();
        assert_eq!(c.omega0.z, 1e-14);
    }

    #[test]
    fn parser_is_total_on_hostile_input() {
        // None of these may panic; whether they parse is their business.
        let inputs = [
            "",
            "=",
            "==",
            "eps",
            "eps=",
            "eps==3",
            "#",
            "# eps = 1",
            "eps = 1e",
            "eps = 1e99999",
            "inertia = 1 2 3 4 5 6 7 8",
            "\u{0}\u{0}\u{0}",
            "eps = \u{221e}",
            "out = #",
            "   =   ",
            "a\n\nb\n",
            "method =",
        ];
        for text in inputs {
            let _ = parse_config_str(text);
        }
    }

    #[test]
    fn method_parsing_and_display_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(format!("{m}"), m.name());
        }
        assert!("Euler".parse::<Method>().is_err());
    }

    #[test]
    fn step_count_uses_floor() {
        let mut c = RunConfig::default_experiment();
        c.eps = 0.3;
        c.t_final = 1.0;
        assert_eq!(c.n_steps(), 3);
        c.t_final = 0.3;
        assert_eq!(c.n_steps(), 1);
    }

    #[test]
    fn load_config_missing_file_is_a_config_error() {
        let err = load_config(Path::new("/nonexistent/config.cfg")).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }
}
