//! Scenario configuration: built-in defaults, optional TOML file, and
//! `--set key=value` overrides, merged in that order. Unknown keys are
//! rejected so typos fail loudly instead of silently using a default.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const TWO_PI: f64 = std::f64::consts::TAU;

/// Single-qubit state preparation under a detuned plant (control model
/// assumes zero detuning).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitConfig {
    /// Plant detuning in rad/ns (the model always assumes zero).
    pub detuning: f64,
    pub dt: f64,
    pub horizon: usize,
    pub feedback_period: usize,
    /// Amplitude bound in rad/ns.
    pub u_max: f64,
    /// Per-step slew bound in rad/ns.
    pub du_max: f64,
    pub r_weight: f64,
    /// Total simulated duration in ns.
    pub duration: f64,
    /// Time at which the headline infidelity is read off, in ns.
    pub eval_time: f64,
    pub success_threshold: f64,
}

impl Default for QubitConfig {
    fn default() -> Self {
        Self {
            detuning: -0.2,
            dt: 0.2,
            horizon: 50,
            feedback_period: 7,
            u_max: TWO_PI * 0.1,
            du_max: TWO_PI * 0.04,
            r_weight: 1e-2,
            duration: 15.0,
            eval_time: 12.5,
            success_threshold: 1e-2,
        }
    }
}

/// Transmon pulse ladder: open-loop optimum, MPC variants, and DRAG
/// baselines on an anharmonic three-level plant.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmonConfig {
    /// Anharmonicity in rad/ns.
    pub anharmonicity: f64,
    pub dt: f64,
    pub horizon: usize,
    pub feedback_period: usize,
    pub u_max: f64,
    pub du_max: f64,
    pub r_weight: f64,
    pub duration: f64,
    /// DRAG derivative scale in [0, 1]; 1 is the analytic value.
    pub drag_scale: f64,
    /// Which ladder cases to run, subset of "a".."e".
    pub cases: Vec<String>,
    pub success_threshold: f64,
}

impl TransmonConfig {
    pub fn with_cases(cases: &[&str]) -> Self {
        Self {
            cases: cases.iter().map(|s| s.to_string()).collect(),
            ..Self::default()
        }
    }
}

impl Default for TransmonConfig {
    fn default() -> Self {
        Self {
            anharmonicity: -0.6,
            dt: 0.4,
            horizon: 10,
            feedback_period: 1,
            u_max: 0.75,
            du_max: 0.2,
            r_weight: 0.5,
            duration: 10.0,
            drag_scale: 0.6,
            cases: ["a", "b", "c", "d", "e"].iter().map(|s| s.to_string()).collect(),
            success_threshold: 1e-2,
        }
    }
}

/// Two qubits coupled by an always-on ZZ term, driven to |11> either by
/// independent pi pulses or by joint MPC aware of the full plant.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrosstalkConfig {
    /// ZZ coupling strength in rad/ns.
    pub coupling: f64,
    pub dt: f64,
    pub horizon: usize,
    pub feedback_period: usize,
    pub u_max: f64,
    pub du_max: f64,
    pub r_weight: f64,
    pub duration: f64,
    pub success_threshold: f64,
}

impl Default for CrosstalkConfig {
    fn default() -> Self {
        Self {
            coupling: 0.5,
            dt: 0.6,
            horizon: 15,
            feedback_period: 1,
            u_max: TWO_PI * 0.1,
            du_max: TWO_PI * 0.04,
            r_weight: 1e-2,
            duration: 25.0,
            success_threshold: 1e-2,
        }
    }
}

/// Model-aware vs random-start Nelder-Mead pulse calibration across a grid
/// of plant detunings, budgeted in state-tomography evaluations.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NmConfig {
    pub dt: f64,
    pub duration: f64,
    /// Detuning grid: `grid_points` values uniform in +-`detuning_span`.
    pub detuning_span: f64,
    pub grid_points: usize,
    pub horizon: usize,
    pub u_max: f64,
    pub du_max: f64,
    pub r_weight: f64,
    pub max_evals: usize,
    pub random_trials: usize,
    pub success_threshold: f64,
}

impl Default for NmConfig {
    fn default() -> Self {
        Self {
            dt: 1.0,
            duration: 10.0,
            detuning_span: 0.36,
            grid_points: 11,
            horizon: 5,
            u_max: TWO_PI * 0.1,
            du_max: TWO_PI * 0.05,
            r_weight: 1e-2,
            max_evals: 10,
            random_trials: 10,
            success_threshold: 1e-2,
        }
    }
}

/// Closed-loop infidelity over a detuning x feedback-period grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub dt: f64,
    pub horizon: usize,
    pub u_max: f64,
    pub du_max: f64,
    pub r_weight: f64,
    pub duration: f64,
    pub eval_time: f64,
    pub detuning_span: f64,
    pub grid_points: usize,
    pub min_period: usize,
    pub max_period: usize,
    pub success_threshold: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            dt: 0.2,
            horizon: 50,
            u_max: TWO_PI * 0.1,
            du_max: TWO_PI * 0.04,
            r_weight: 1e-2,
            duration: 15.0,
            eval_time: 12.5,
            detuning_span: 0.08,
            grid_points: 11,
            min_period: 1,
            max_period: 8,
            success_threshold: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum ScenarioConfig {
    Qubit(QubitConfig),
    Transmon(TransmonConfig),
    Crosstalk(CrosstalkConfig),
    Nm(NmConfig),
    Sweep(SweepConfig),
}

pub const SCENARIOS: &[&str] = &[
    "qubit_detuning",
    "transmon_drag",
    "drag_ladder",
    "crosstalk",
    "nm_comparison",
    "feedback_sweep",
];

fn default_value(scenario: &str) -> Result<toml::Value> {
    let v = match scenario {
        "qubit_detuning" => toml::Value::try_from(QubitConfig::default())?,
        "transmon_drag" => toml::Value::try_from(TransmonConfig::with_cases(&["a", "b", "d"]))?,
        "drag_ladder" => toml::Value::try_from(TransmonConfig::default())?,
        "crosstalk" => toml::Value::try_from(CrosstalkConfig::default())?,
        "nm_comparison" => toml::Value::try_from(NmConfig::default())?,
        "feedback_sweep" => toml::Value::try_from(SweepConfig::default())?,
        other => bail!("unknown scenario '{other}' (run `qmpc list` for options)"),
    };
    Ok(v)
}

fn merge_toml(base: &mut toml::Value, overlay: toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge_toml(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn apply_set(table: &mut toml::Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .with_context(|| format!("--set '{assignment}' is not of the form key=value"))?;
    // Parse the value as a TOML literal; fall back to a plain string so
    // `--set cases=a` works without quoting.
    let value: toml::Value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(t) => t["v"].clone(),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut slot = table;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let t = slot
            .as_table_mut()
            .with_context(|| format!("--set key '{key}': '{part}' is not a table"))?;
        if i + 1 == parts.len() {
            t.insert(part.to_string(), value);
            return Ok(());
        }
        slot = t
            .entry(part.to_string())
            .or_insert(toml::Value::Table(Default::default()));
    }
    Ok(())
}

/// Build a scenario's effective config: defaults, then the optional file,
/// then `--set` overrides; deserialize with unknown keys rejected.
pub fn load(scenario: &str, file: Option<&Path>, sets: &[String]) -> Result<ScenarioConfig> {
    let mut value = default_value(scenario)?;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut overlay: toml::Value = text
            .parse()
            .with_context(|| format!("parsing config {}", path.display()))?;
        // A config file may name its scenario for `validate`; it is not a
        // config key of any scenario, so strip it before merging.
        if let Some(t) = overlay.as_table_mut() {
            if let Some(s) = t.remove("scenario") {
                let named = s.as_str().unwrap_or_default();
                if named != scenario {
                    bail!(
                        "config file is for scenario '{named}', but '{scenario}' was requested"
                    );
                }
            }
        }
        merge_toml(&mut value, overlay);
    }
    for assignment in sets {
        apply_set(&mut value, assignment)?;
    }
    let cfg = match scenario {
        "qubit_detuning" => ScenarioConfig::Qubit(value.try_into()?),
        "transmon_drag" | "drag_ladder" => ScenarioConfig::Transmon(value.try_into()?),
        "crosstalk" => ScenarioConfig::Crosstalk(value.try_into()?),
        "nm_comparison" => ScenarioConfig::Nm(value.try_into()?),
        "feedback_sweep" => ScenarioConfig::Sweep(value.try_into()?),
        other => bail!("unknown scenario '{other}'"),
    };
    Ok(cfg)
}

/// Scenario named inside a config file, if any.
pub fn scenario_of_file(path: &Path) -> Result<Option<String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let value: toml::Value = text
        .parse()
        .with_context(|| format!("parsing config {}", path.display()))?;
    Ok(value
        .get("scenario")
        .and_then(|v| v.as_str())
        .map(|s| s.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn set_overrides_file_which_overrides_defaults() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "scenario = \"qubit_detuning\"\ndetuning = -0.3\ndt = 0.1").unwrap();
        let cfg = load(
            "qubit_detuning",
            Some(file.path()),
            &["dt=0.25".to_string()],
        )
        .unwrap();
        let ScenarioConfig::Qubit(q) = cfg else { panic!("wrong variant") };
        assert_eq!(q.detuning, -0.3);
        assert_eq!(q.dt, 0.25);
        assert_eq!(q.horizon, 50);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = load("qubit_detuning", None, &["detunning=-0.3".to_string()])
            .unwrap_err()
            .to_string();
        assert!(err.contains("detunning"), "{err}");
    }

    #[test]
    fn mismatched_scenario_name_in_file_is_rejected() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "scenario = \"crosstalk\"").unwrap();
        assert!(load("qubit_detuning", Some(file.path()), &[]).is_err());
    }

    #[test]
    fn set_parses_toml_literals_and_falls_back_to_strings() {
        let cfg = load(
            "drag_ladder",
            None,
            &["cases=[\"a\",\"e\"]".to_string(), "drag_scale=1".to_string()],
        )
        .unwrap();
        let ScenarioConfig::Transmon(t) = cfg else { panic!("wrong variant") };
        assert_eq!(t.cases, ["a", "e"]);
        assert_eq!(t.drag_scale, 1.0);
    }
}
