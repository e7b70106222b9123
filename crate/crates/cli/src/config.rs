//! Run configuration: command-line flags override a JSON config file, which
//! overrides built-in defaults.

use std::path::Path;

use bgeo_core::connection::{GeodesicOptions, DEFAULT_ODE_TOL};
use bgeo_core::elliptic::DEFAULT_POLE_GUARD;
use bgeo_core::kernels::{DerivativeMode, DomainDescriptor, KernelModel, DEFAULT_FD_STEP, DEFAULT_KERNEL_FLOOR};
use bgeo_core::representative::DEFAULT_NEWTON_TOL;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::complex::parse_cvec;
use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 7;

/// Keys of a config file. Dashes and underscores are interchangeable; a
/// nested `"tolerances"` object is merged into the top level.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    values: Map<String, Value>,
}

fn normalize(key: &str) -> String {
    key.replace('-', "_")
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {} is not valid JSON: {e}", path.display())))?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> CliResult<Self> {
        let Value::Object(obj) = value else {
            return Err(CliError::Usage("config must be a JSON object".into()));
        };
        let mut values = Map::new();
        for (k, v) in obj {
            if k == "tolerances" {
                let Value::Object(tol) = v else {
                    return Err(CliError::Usage("config \"tolerances\" must be an object".into()));
                };
                for (tk, tv) in tol {
                    values.insert(normalize(&tk), tv);
                }
            } else {
                values.insert(normalize(&k), v);
            }
        }
        Ok(ConfigFile { values })
    }

    fn raw(&self, key: &str) -> Option<&Value> {
        self.values.get(&normalize(key))
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> CliResult<Option<T>> {
        self.raw(key)
            .map(|v| {
                serde_json::from_value(v.clone()).map_err(|e| CliError::Usage(format!("config key {key:?}: {e}")))
            })
            .transpose()
    }

    /// A complex vector, written as a grammar string or an array of them.
    pub fn cvec(&self, key: &str) -> CliResult<Option<Vec<Complex64>>> {
        let bad = |e: String| CliError::Usage(format!("config key {key:?}: {e}"));
        match self.raw(key) {
            None => Ok(None),
            Some(Value::String(s)) => parse_cvec(s).map(Some).map_err(bad),
            Some(Value::Number(n)) => Ok(Some(vec![Complex64::new(n.as_f64().unwrap_or(f64::NAN), 0.0)])),
            Some(Value::Array(items)) => items
                .iter()
                .map(|item| match item {
                    Value::String(s) => crate::complex::parse_complex(s),
                    Value::Number(n) => Ok(Complex64::new(n.as_f64().unwrap_or(f64::NAN), 0.0)),
                    other => Err(format!("expected a complex literal, got {other}")),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
                .map_err(bad),
            Some(other) => Err(bad(format!("expected a complex literal, got {other}"))),
        }
    }

    /// A domain, written as a JSON object or as a string holding one.
    pub fn domain(&self, key: &str) -> CliResult<Option<DomainDescriptor>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::String(s)) => parse_domain(s).map(Some).map_err(CliError::Usage),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| CliError::Usage(format!("config key {key:?}: {e}"))),
        }
    }
}

pub fn parse_domain(s: &str) -> Result<DomainDescriptor, String> {
    let d: DomainDescriptor = serde_json::from_str(s).map_err(|e| format!("bad domain {s:?}: {e}"))?;
    d.validate().map_err(|e| e.to_string())?;
    Ok(d)
}

/// Numerical tolerances shared by all subcommands.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Tolerances {
    pub ode_tol: f64,
    pub newton_tol: f64,
    pub fd_step: f64,
    pub pole_guard: f64,
    pub kernel_floor: f64,
    pub finite_differences: bool,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            ode_tol: DEFAULT_ODE_TOL,
            newton_tol: DEFAULT_NEWTON_TOL,
            fd_step: DEFAULT_FD_STEP,
            pole_guard: DEFAULT_POLE_GUARD,
            kernel_floor: DEFAULT_KERNEL_FLOOR,
            finite_differences: false,
        }
    }
}

/// Flag values as parsed; `None` means "not given on the command line".
#[derive(Debug, Clone, Copy, Default)]
pub struct ToleranceFlags {
    pub ode_tol: Option<f64>,
    pub newton_tol: Option<f64>,
    pub fd_step: Option<f64>,
    pub pole_guard: Option<f64>,
    pub kernel_floor: Option<f64>,
    pub finite_differences: bool,
}

impl Tolerances {
    pub fn resolve(flags: &ToleranceFlags, cfg: &ConfigFile) -> CliResult<Self> {
        let d = Tolerances::default();
        let pick = |flag: Option<f64>, key: &str, default: f64| -> CliResult<f64> {
            let v = match flag {
                Some(v) => v,
                None => cfg.get::<f64>(key)?.unwrap_or(default),
            };
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Usage(format!("{key} must be positive, got {v}")));
            }
            Ok(v)
        };
        Ok(Tolerances {
            ode_tol: pick(flags.ode_tol, "ode_tol", d.ode_tol)?,
            newton_tol: pick(flags.newton_tol, "newton_tol", d.newton_tol)?,
            fd_step: pick(flags.fd_step, "fd_step", d.fd_step)?,
            pole_guard: pick(flags.pole_guard, "pole_guard", d.pole_guard)?,
            kernel_floor: pick(flags.kernel_floor, "kernel_floor", d.kernel_floor)?,
            finite_differences: flags.finite_differences || cfg.get::<bool>("finite_differences")?.unwrap_or(false),
        })
    }

    pub fn model(&self, domain: &DomainDescriptor) -> CliResult<KernelModel> {
        let mode = if self.finite_differences { DerivativeMode::FiniteDifference } else { DerivativeMode::ClosedForm };
        Ok(KernelModel::with_pole_guard(domain.clone(), self.pole_guard)?
            .with_kernel_floor(self.kernel_floor)
            .with_fd_step(self.fd_step)
            .with_mode(mode))
    }

    pub fn geodesic_options(&self) -> GeodesicOptions {
        GeodesicOptions::with_tol(self.ode_tol)
    }
}
