//! Scenario files: a TOML document describing both links, the receiver,
//! the access parameters and optional simulation and sweep settings.
//!
//! Every physical quantity carries its unit in the key name, e.g.
//! `tx_power_dbm` or `tx_power_w`; exactly one variant must be given.
//!
//! ```toml
//! [link1]
//! tx_power_dbm = 6.9897
//! distance_m = 30
//! path_loss_exp = 4
//! sinr_threshold_db = 0
//!
//! [link2]
//! tx_power_w = 0.005
//! distance_m = 30
//! path_loss_exp = 4
//! sinr_threshold_linear = 1.0
//!
//! [receiver]
//! noise_power_dbm = -100
//!
//! [access]
//! q1 = 0.5
//! q2 = 0.5
//! arrival_prob = 0.5
//! deadline = 3
//! ```

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::channel::{db_to_linear, dbm_to_watts, LinkParams, ReceiverParams};
use crate::sim::{SimConfig, SimMode};
use crate::system::{SweepAxis, SystemParams};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkSection {
    tx_power_dbm: Option<f64>,
    tx_power_w: Option<f64>,
    distance_m: f64,
    path_loss_exp: f64,
    fading_scale: Option<f64>,
    sinr_threshold_db: Option<f64>,
    sinr_threshold_linear: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReceiverSection {
    noise_power_dbm: Option<f64>,
    noise_power_w: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AccessSection {
    q1: f64,
    q2: f64,
    arrival_prob: f64,
    deadline: i64,
}

#[derive(Debug, Default, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub slots: Option<u64>,
    pub warmup_slots: Option<u64>,
    pub seed: Option<u64>,
    pub replications: Option<u32>,
    pub mode: Option<SimMode>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    axis: String,
    values: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    link1: LinkSection,
    link2: LinkSection,
    receiver: ReceiverSection,
    access: AccessSection,
    #[serde(default)]
    simulation: SimulationSection,
    sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: SystemParams,
    pub simulation: SimulationSection,
    pub sweep: Option<SweepSpec>,
}

/// Defaults for simulation settings the scenario and command line leave open.
pub const DEFAULT_SLOTS: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_REPLICATIONS: u32 = 1;

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        let mut problems = Vec::new();

        let link1 = link(&file.link1, "link1", &mut problems);
        let link2 = link(&file.link2, "link2", &mut problems);
        let noise_power = one_of(
            "receiver.noise_power",
            file.receiver.noise_power_dbm.map(dbm_to_watts),
            file.receiver.noise_power_w,
            ("noise_power_dbm", "noise_power_w"),
            &mut problems,
        );
        let deadline = match u32::try_from(file.access.deadline) {
            Ok(d) if d >= 1 => d,
            _ => {
                problems.push(format!("access.deadline: {} is not a positive integer", file.access.deadline));
                1
            }
        };
        for (name, v) in [
            ("access.q1", file.access.q1),
            ("access.q2", file.access.q2),
            ("access.arrival_prob", file.access.arrival_prob),
        ] {
            if !(0.0..=1.0).contains(&v) {
                problems.push(format!("{name}: {v} is not a probability in [0, 1]"));
            }
        }

        let sweep = file.sweep.map(|s| {
            let axis = s.axis.parse::<SweepAxis>().unwrap_or_else(|e| {
                problems.push(format!("sweep.axis: {e}"));
                SweepAxis::Q1
            });
            if s.values.is_empty() {
                problems.push("sweep.values: at least one value is required".into());
            }
            SweepSpec { axis, values: s.values }
        });

        let params = SystemParams {
            link1,
            link2,
            rx: ReceiverParams { noise_power },
            q1: file.access.q1,
            q2: file.access.q2,
            arrival_prob: file.access.arrival_prob,
            deadline,
        };
        if problems.is_empty() {
            problems.extend(params.problems().iter().map(|e| e.to_string()));
        }
        if let Some(spec) = &sweep {
            if problems.is_empty() {
                for v in &spec.values {
                    if let Err(e) = spec.axis.apply(&params, *v) {
                        problems.push(format!("sweep.values: {v}: {e}"));
                    }
                }
            }
        }
        if !problems.is_empty() {
            return Err(ScenarioError::Invalid(problems));
        }
        Ok(Scenario {
            params,
            simulation: file.simulation,
            sweep,
        })
    }

    /// Simulation config from file values, overridden by any `Some` argument.
    pub fn sim_config(&self, overrides: &SimulationSection) -> SimConfig {
        let slots = overrides.slots.or(self.simulation.slots).unwrap_or(DEFAULT_SLOTS);
        let mut cfg = SimConfig::new(
            self.params,
            slots,
            overrides.seed.or(self.simulation.seed).unwrap_or(DEFAULT_SEED),
        );
        if let Some(w) = overrides.warmup_slots.or(self.simulation.warmup_slots) {
            cfg.warmup_slots = w;
        }
        cfg.replications = overrides
            .replications
            .or(self.simulation.replications)
            .unwrap_or(DEFAULT_REPLICATIONS);
        cfg.mode = overrides.mode.or(self.simulation.mode).unwrap_or_default();
        cfg
    }
}

fn one_of(
    field: &str,
    a: Option<f64>,
    b: Option<f64>,
    keys: (&str, &str),
    problems: &mut Vec<String>,
) -> f64 {
    match (a, b) {
        (Some(v), None) | (None, Some(v)) => v,
        _ => {
            problems.push(format!("{field}: exactly one of `{}` or `{}` is required", keys.0, keys.1));
            f64::NAN
        }
    }
}

fn link(s: &LinkSection, name: &str, problems: &mut Vec<String>) -> LinkParams {
    let tx_power = one_of(
        &format!("{name}.tx_power"),
        s.tx_power_dbm.map(dbm_to_watts),
        s.tx_power_w,
        ("tx_power_dbm", "tx_power_w"),
        problems,
    );
    let sinr_threshold = one_of(
        &format!("{name}.sinr_threshold"),
        s.sinr_threshold_db.map(db_to_linear),
        s.sinr_threshold_linear,
        ("sinr_threshold_db", "sinr_threshold_linear"),
        problems,
    );
    let l = LinkParams {
        tx_power,
        distance: s.distance_m,
        path_loss_exp: s.path_loss_exp,
        fading_scale: s.fading_scale.unwrap_or(1.0),
        sinr_threshold,
    };
    if tx_power.is_nan() || sinr_threshold.is_nan() {
        return l;
    }
    if let Err(e) = l.validate() {
        problems.push(format!("{name}: {e}"));
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = r#"
[link1]
tx_power_dbm = 6.989700043360188
distance_m = 30
path_loss_exp = 4
sinr_threshold_db = -5

[link2]
tx_power_w = 0.005
distance_m = 30.0
path_loss_exp = 4
fading_scale = 1
sinr_threshold_db = -5

[receiver]
noise_power_dbm = -100

[access]
q1 = 0.5
q2 = 0.5
arrival_prob = 0.5
deadline = 3

[simulation]
slots = 2000
seed = 9
mode = "decoupled"

[sweep]
axis = "q2"
values = [0.1, 0.2]
"#;

    #[test]
    fn parses_reference_scenario() {
        let s = Scenario::from_toml_str(REFERENCE).unwrap();
        assert!((s.params.link1.tx_power - 0.005).abs() < 1e-15);
        assert_eq!(s.params.link2.tx_power, 0.005);
        assert!((s.params.rx.noise_power - 1e-13).abs() < 1e-27);
        assert_eq!(s.params.deadline, 3);
        assert_eq!(s.sweep.as_ref().unwrap().axis, SweepAxis::Q2);
        let cfg = s.sim_config(&SimulationSection::default());
        assert_eq!((cfg.slots, cfg.seed, cfg.mode), (2000, 9, SimMode::Decoupled));
        let cfg = s.sim_config(&SimulationSection {
            seed: Some(4),
            replications: Some(8),
            ..Default::default()
        });
        assert_eq!((cfg.seed, cfg.replications), (4, 8));
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = REFERENCE.replace("q1 = 0.5", "q1 = 0.5\nq3 = 0.1");
        let err = Scenario::from_toml_str(&text).unwrap_err();
        assert!(matches!(err, ScenarioError::Parse(_)));
        assert!(err.to_string().contains("q3"), "{err}");
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn requires_explicit_units() {
        let text = REFERENCE.replace("tx_power_w = 0.005\n", "");
        let err = Scenario::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("link2.tx_power"), "{err}");

        let text = REFERENCE.replace("noise_power_dbm = -100", "noise_power_dbm = -100\nnoise_power_w = 1e-13");
        let err = Scenario::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("receiver.noise_power"), "{err}");
    }

    #[test]
    fn lists_every_offending_field() {
        let text = REFERENCE
            .replace("q1 = 0.5", "q1 = 1.2")
            .replace("arrival_prob = 0.5", "arrival_prob = -1")
            .replace("deadline = 3", "deadline = 0");
        match Scenario::from_toml_str(&text).unwrap_err() {
            ScenarioError::Invalid(problems) => {
                assert_eq!(problems.len(), 3, "{problems:?}");
                assert!(problems[1].contains("access.q1"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rejects_bad_sweep() {
        let text = REFERENCE.replace("axis = \"q2\"", "axis = \"mu\"");
        assert!(Scenario::from_toml_str(&text).unwrap_err().to_string().contains("sweep.axis"));
        let text = REFERENCE.replace("values = [0.1, 0.2]", "values = []");
        assert!(Scenario::from_toml_str(&text).unwrap_err().to_string().contains("sweep.values"));
        let text = REFERENCE.replace("values = [0.1, 0.2]", "values = [0.1, 1.5]");
        assert!(Scenario::from_toml_str(&text).unwrap_err().to_string().contains("1.5"));
    }
}
