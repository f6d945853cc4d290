//! Scenario configuration: a strict TOML schema with defaults, dotted-path
//! overrides, and validation against the library's constructors.
//!
//! Schema (all sections and keys optional unless noted):
//!
//! ```toml
//! [potential]
//! kind = "oscillatory_example"   # zero | scale_invariant | oscillatory_example | tabulated
//! params = [0.5, 2.0]            # scale_invariant: [mu, nu]; oscillatory_example: [beta, kappa]
//! samples = [[0.0, 1.0], ...]    # tabulated only: (t, M) pairs
//!
//! [grid]
//! t_min = 0.0
//! t_max = 1e4
//! points = 200
//!
//! [conditions]
//! alpha = 0.0                    # (M1) exponent; also the zone weight exponent
//! beta = 0.6                     # (M2) exponent
//! gamma = 1.0                    # (M3) exponent
//!
//! [gauge]
//! tol = 1e-9                     # series tail tolerance
//! k_max = 40                     # order cap
//! start = "auto"                 # or a fixed numeric start time
//!
//! [sweep]
//! xi_min = 1e-2
//! xi_max = 1e2
//! xi_points = 33
//! t_end = 1e3
//! ode_tol = 1e-10
//! ic = [1.0, 0.0]                # (u, u_t) at t = 0, real parts
//! weights = "gaussian"           # gaussian (exp(-xi^2)) | uniform
//!
//! [zone]
//! n_policy = "auto"              # auto (N = max(1, 2 sup|Q1|)) | explicit
//! n = 1.0                        # used when n_policy = "explicit"
//!
//! [output]
//! dir = "out"
//! ```
//!
//! Unknown keys are rejected everywhere: a typo in an exponent name must be
//! an error, not a silently applied default.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use kglab_core::potential::PotentialSpec;
use kglab_core::{ConditionParams, StartTime};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default)]
    pub samples: Vec<(f64, f64)>,
}

impl Default for PotentialSection {
    fn default() -> Self {
        PotentialSection { kind: "zero".into(), params: Vec::new(), samples: Vec::new() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { t_min: 0.0, t_max: 1e4, points: 200 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConditionsSection {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for ConditionsSection {
    fn default() -> Self {
        ConditionsSection { alpha: 0.0, beta: 0.6, gamma: 1.0 }
    }
}

/// Gauge start time: automatic threshold scan or a pinned value.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum StartKey {
    Named(String),
    Fixed(f64),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaugeSection {
    pub tol: f64,
    pub k_max: usize,
    pub start: StartKey,
}

impl Default for GaugeSection {
    fn default() -> Self {
        GaugeSection { tol: 1e-9, k_max: 40, start: StartKey::Named("auto".into()) }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub xi_min: f64,
    pub xi_max: f64,
    pub xi_points: usize,
    pub t_end: f64,
    pub ode_tol: f64,
    pub ic: [f64; 2],
    pub weights: String,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            xi_min: 1e-2,
            xi_max: 1e2,
            xi_points: 33,
            t_end: 1e3,
            ode_tol: 1e-10,
            ic: [1.0, 0.0],
            weights: "gaussian".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZoneSection {
    pub n_policy: String,
    pub n: f64,
}

impl Default for ZoneSection {
    fn default() -> Self {
        ZoneSection { n_policy: "auto".into(), n: 1.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out") }
    }
}

/// A fully parsed and validated experiment description.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub potential: PotentialSection,
    pub grid: GridSection,
    pub conditions: ConditionsSection,
    pub gauge: GaugeSection,
    pub sweep: SweepSection,
    pub zone: ZoneSection,
    pub output: OutputSection,
}

impl Scenario {
    /// Build the potential named by the config (validating its parameters).
    pub fn build_potential(&self) -> Result<PotentialSpec> {
        let p = &self.potential;
        if p.kind == "tabulated" {
            if !p.params.is_empty() {
                bail!("potential kind 'tabulated' takes samples, not params");
            }
            return PotentialSpec::tabulated(&p.samples)
                .context("invalid tabulated potential samples");
        }
        if !p.samples.is_empty() {
            bail!("potential samples are only valid with kind = \"tabulated\"");
        }
        PotentialSpec::make_builtin(&p.kind, &p.params)
            .with_context(|| format!("invalid potential section (kind = '{}')", p.kind))
    }

    /// Condition exponents as a validated parameter triple.
    pub fn condition_params(&self) -> Result<ConditionParams> {
        let c = &self.conditions;
        Ok(ConditionParams::new(c.alpha, c.beta, c.gamma)?)
    }

    /// Gauge start-time policy.
    pub fn start_time(&self) -> Result<StartTime> {
        match &self.gauge.start {
            StartKey::Named(name) if name == "auto" => Ok(StartTime::Auto),
            StartKey::Named(other) => {
                bail!("gauge.start must be \"auto\" or a number (got '{other}')")
            }
            StartKey::Fixed(t) => Ok(StartTime::Fixed(*t)),
        }
    }

    /// Log-spaced sweep frequencies.
    pub fn xi_grid(&self) -> Result<Vec<f64>> {
        let s = &self.sweep;
        if !(s.xi_min > 0.0 && s.xi_max >= s.xi_min) {
            bail!("sweep needs 0 < xi_min <= xi_max (got [{}, {}])", s.xi_min, s.xi_max);
        }
        if s.xi_points == 0 {
            bail!("sweep.xi_points must be positive");
        }
        if s.xi_points == 1 {
            return Ok(vec![s.xi_min]);
        }
        let ratio = s.xi_max / s.xi_min;
        Ok((0..s.xi_points)
            .map(|i| s.xi_min * ratio.powf(i as f64 / (s.xi_points - 1) as f64))
            .collect())
    }

    /// Mode weight for the aggregate energy.
    pub fn weight_of(&self, xi: f64) -> Result<f64> {
        match self.sweep.weights.as_str() {
            "gaussian" => Ok((-xi * xi).exp()),
            "uniform" => Ok(1.0),
            other => bail!("sweep.weights must be \"gaussian\" or \"uniform\" (got '{other}')"),
        }
    }

    /// Structural checks that do not need library calls.
    pub fn validate(&self) -> Result<()> {
        if !(self.grid.t_min >= 0.0 && self.grid.t_max > self.grid.t_min) {
            bail!(
                "grid needs 0 <= t_min < t_max (got [{}, {}])",
                self.grid.t_min,
                self.grid.t_max
            );
        }
        if self.grid.points < 8 {
            bail!("grid.points must be at least 8 (got {})", self.grid.points);
        }
        if !(self.gauge.tol > 0.0) {
            bail!("gauge.tol must be positive (got {})", self.gauge.tol);
        }
        if !(self.sweep.t_end > 0.0) {
            bail!("sweep.t_end must be positive (got {})", self.sweep.t_end);
        }
        if !(self.sweep.ode_tol > 0.0 && self.sweep.ode_tol <= 0.1) {
            bail!("sweep.ode_tol must lie in (0, 0.1] (got {})", self.sweep.ode_tol);
        }
        match self.zone.n_policy.as_str() {
            "auto" => {}
            "explicit" => {
                if !(self.zone.n > 0.0) {
                    bail!("zone.n must be positive for the explicit policy (got {})", self.zone.n);
                }
            }
            other => bail!("zone.n_policy must be \"auto\" or \"explicit\" (got '{other}')"),
        }
        // Fail fast on anything the builders would reject later.
        self.build_potential()?;
        self.condition_params()?;
        self.start_time()?;
        self.xi_grid()?;
        self.weight_of(1.0)?;
        Ok(())
    }
}

/// Set `key = value` in a TOML table, creating intermediate tables along the
/// dotted path.  Values parse as TOML (numbers, booleans, arrays, strings);
/// bare words fall back to strings.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let Some((key, raw)) = spec.split_once('=') else {
        bail!("override '{spec}' is not of the form key=value");
    };
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() {
        bail!("override '{spec}' has an empty key");
    }
    let value: toml::Value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed table has the key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut node = table;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        node = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .with_context(|| format!("override '{key}': '{part}' is not a table"))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Load a scenario: parse the file (or start from defaults when `path` is
/// None), apply the dotted-path overrides, then validate.
pub fn load_scenario(path: Option<&Path>, overrides: &[String]) -> Result<Scenario> {
    let mut table: toml::Table = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("cannot read config file {}", p.display()))?;
            toml::from_str(&text)
                .with_context(|| format!("cannot parse config file {}", p.display()))?
        }
        None => toml::Table::new(),
    };
    for spec in overrides {
        apply_override(&mut table, spec)?;
    }
    let scenario: Scenario = toml::Value::Table(table)
        .try_into()
        .context("config does not match the documented schema")?;
    scenario.validate()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_config() {
        let s = load_scenario(None, &[]).unwrap();
        assert_eq!(s.potential.kind, "zero");
        assert_eq!(s.grid.points, 200);
        assert_eq!(s.sweep.xi_points, 33);
        assert_eq!(s.gauge.k_max, 40);
        assert!(matches!(s.start_time().unwrap(), StartTime::Auto));
        assert!(s.build_potential().is_ok());
    }

    #[test]
    fn overrides_reach_nested_keys_and_reject_junk() {
        let s = load_scenario(
            None,
            &[
                "potential.kind=oscillatory_example".into(),
                "potential.params=[0.5, 2.0]".into(),
                "sweep.xi_points=5".into(),
                "gauge.start=3.5".into(),
            ],
        )
        .unwrap();
        assert_eq!(s.potential.kind, "oscillatory_example");
        assert_eq!(s.sweep.xi_points, 5);
        assert!(matches!(s.start_time().unwrap(), StartTime::Fixed(t) if t == 3.5));
        // Unknown keys are rejected, including ones injected by override.
        assert!(load_scenario(None, &["sweep.xi_pionts=5".into()]).is_err());
        assert!(load_scenario(None, &["nonsense=1".into()]).is_err());
    }

    #[test]
    fn invalid_example_parameters_fail_validation() {
        // κ must exceed 2(1−β); β = 0.5, κ = 1 violates it.
        let err = load_scenario(
            None,
            &[
                "potential.kind=oscillatory_example".into(),
                "potential.params=[0.5, 1.0]".into(),
            ],
        )
        .unwrap_err();
        assert!(format!("{err:#}").contains("κ > 2(1−β)"), "got: {err:#}");
    }

    #[test]
    fn tabulated_requires_samples() {
        assert!(load_scenario(None, &["potential.kind=tabulated".into()]).is_err());
        let s = load_scenario(
            None,
            &[
                "potential.kind=tabulated".into(),
                "potential.samples=[[0.0, 1.0], [1.0, 0.5], [2.0, 0.25], [3.0, 0.2]]".into(),
            ],
        )
        .unwrap();
        assert!(s.build_potential().is_ok());
    }
}
