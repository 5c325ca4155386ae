//! Run configuration: strict JSON ingestion (unknown and duplicate keys are
//! schema errors), invariant validation, default filling, and the effective
//! config echo with reproducible float formatting.

use crate::error::{Result, RuinError};
use crate::geometry::TargetSpec;
use crate::increments::{IncrementModel, SpectralMeasure};
use crate::kernel::{KernelParams, Simulator, ValueStrategy};
use crate::lyapunov::MollifierParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub dir: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub alpha: f64,
    pub xm: f64,
    #[serde(default)]
    pub body_radius: f64,
    pub atoms: Vec<AtomConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub vstar: Vec<Vec<f64>>,
    pub astar: Vec<f64>,
    /// Enlargement tilt; default 0.05.
    pub delta: Option<f64>,
    /// Coordinate cap; default 10 * max_j a_j*.
    pub beta: Option<f64>,
    /// Drift-exit level; default 20.
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    /// Mixture aggressiveness; default 0.99.
    pub theta: Option<f64>,
    /// Jump-region contraction; default 0.99.
    pub a: Option<f64>,
    /// Mixture shut-off margin; default 0.1 * min_j a_j.
    pub delta2: Option<f64>,
    /// Horizon cap multiplier; default 10.
    pub max_step_factor: Option<f64>,
    /// "exact" (default) or "asymptotic" value-function evaluation.
    pub value_strategy: Option<String>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig { theta: None, a: None, delta2: None, max_step_factor: None, value_strategy: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifierConfig {
    /// Floor of the smoothing scale c0(b); default 1.
    pub c0_tilde: Option<f64>,
    /// Mollifier half-width; default 0.5.
    pub delta0: Option<f64>,
    /// Drift-constant epsilon; default 0.2. Sets c1 = (1+eps)^3 (1+4 eps)
    /// and the drift-check theta = 1/(1+eps)^2 unless overridden.
    pub epsilon: Option<f64>,
    pub c1: Option<f64>,
}

impl Default for MollifierConfig {
    fn default() -> Self {
        MollifierConfig { c0_tilde: None, delta0: None, epsilon: None, c1: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    /// Drift-check mixture theta; default 1/(1+eps)^2.
    pub theta: Option<f64>,
    /// Monte Carlo draws per state; default 20000.
    pub n_mc: Option<usize>,
    /// Number of auto-placed grid states; default 20.
    pub n_states: Option<usize>,
    /// Explicit states in units of b (overrides the auto grid).
    pub states_z: Option<Vec<Vec<f64>>>,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        LyapunovConfig { theta: None, n_mc: None, n_states: None, states_z: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsConfig {
    /// Paths simulated for the limit-law battery; default 10000.
    pub n_paths: Option<u64>,
    /// Conditional oracle paths collected by crude-oracle; default 0.
    pub crude_hits: Option<usize>,
}

impl Default for LimitsConfig {
    fn default() -> Self {
        LimitsConfig { n_paths: None, crude_hits: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub b: Option<f64>,
    pub b_list: Option<Vec<f64>>,
    pub n_paths: Option<u64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub output_dir: Option<String>,
    /// estimate: also write a per-path summary CSV.
    #[serde(default)]
    pub dump_paths: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            b: None,
            b_list: None,
            n_paths: None,
            seed: None,
            workers: None,
            output_dir: None,
            dump_paths: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub target: TargetConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub mollifier: MollifierConfig,
    #[serde(default)]
    pub lyapunov: LyapunovConfig,
    #[serde(default)]
    pub limits: LimitsConfig,
    #[serde(default)]
    pub sim: SimConfig,
}

/// Fully validated, default-filled run context.
#[derive(Debug, Clone)]
pub struct Validated {
    pub sim: Simulator,
    pub moll: MollifierParams,
    pub epsilon: f64,
    pub drift_theta: f64,
    pub lyapunov_n_mc: usize,
    pub lyapunov_n_states: usize,
    pub lyapunov_states_z: Option<Vec<Vec<f64>>>,
    pub limits_n_paths: u64,
    pub crude_hits: usize,
    pub b: Option<f64>,
    pub b_list: Option<Vec<f64>>,
    pub n_paths: u64,
    pub seed: u64,
    pub workers: usize,
    pub output_dir: String,
    pub dump_paths: bool,
    /// The config with every default materialized, for the echo file.
    pub effective: RunConfig,
}

pub fn parse_config(text: &str) -> Result<Validated> {
    check_duplicate_keys(text)?;
    let cfg: RunConfig =
        serde_json::from_str(text).map_err(|e| RuinError::Schema(e.to_string()))?;
    validate(cfg)
}

pub fn parse_config_file(path: &std::path::Path) -> Result<Validated> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn validate(cfg: RunConfig) -> Result<Validated> {
    let spectral = SpectralMeasure::normalized(
        cfg.model.atoms.iter().map(|a| (a.dir.clone(), a.weight)).collect(),
    )?;
    let model =
        IncrementModel::new(cfg.model.alpha, cfg.model.xm, spectral, cfg.model.body_radius)?;

    let max_astar_raw = cfg.target.astar.iter().copied().fold(0.0f64, f64::max);
    let delta = cfg.target.delta.unwrap_or(0.05);
    let beta = cfg.target.beta.unwrap_or(10.0 * max_astar_raw);
    let gamma = cfg.target.gamma.unwrap_or(20.0);
    let target = TargetSpec::normalize(
        cfg.target.vstar.clone(),
        cfg.target.astar.clone(),
        delta,
        beta,
        gamma,
    )?;

    let system = target.enlarge();
    let min_off = system.min_offset();
    let theta = cfg.kernel.theta.unwrap_or(0.99);
    let a = cfg.kernel.a.unwrap_or(0.99);
    let delta2 = cfg.kernel.delta2.unwrap_or(0.1 * min_off);
    let max_step_factor = cfg.kernel.max_step_factor.unwrap_or(10.0);
    let strategy = match cfg.kernel.value_strategy.as_deref() {
        None | Some("exact") => ValueStrategy::ExactRadial,
        Some("asymptotic") => ValueStrategy::AsymptoticKappa,
        Some(other) => {
            return Err(RuinError::Validation(format!(
                "kernel.value_strategy must be \"exact\" or \"asymptotic\", got \"{other}\""
            )))
        }
    };
    let params = KernelParams { theta, a, delta2, max_step_factor };
    let sim = Simulator::new(model, target, params, strategy)?;

    let epsilon = cfg.mollifier.epsilon.unwrap_or(0.2);
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(RuinError::Validation("mollifier.epsilon must lie in (0, 0.5)".into()));
    }
    let c1 = cfg.mollifier.c1.unwrap_or((1.0 + epsilon).powi(3) * (1.0 + 4.0 * epsilon));
    let moll = MollifierParams {
        c0_tilde: cfg.mollifier.c0_tilde.unwrap_or(1.0),
        delta0: cfg.mollifier.delta0.unwrap_or(0.5),
        c1,
    };
    moll.validate()?;
    let drift_theta = cfg.lyapunov.theta.unwrap_or(1.0 / (1.0 + epsilon).powi(2));
    if !(0.0..1.0).contains(&drift_theta) {
        return Err(RuinError::Validation("lyapunov.theta must lie in [0, 1)".into()));
    }

    let n_paths = cfg.sim.n_paths.unwrap_or(100_000);
    let seed = cfg.sim.seed.unwrap_or(1);
    let workers = cfg.sim.workers.unwrap_or(0);
    let output_dir = cfg.sim.output_dir.clone().unwrap_or_else(|| "out".into());

    // echo with every default and normalization materialized
    let effective = RunConfig {
        model: ModelConfig {
            alpha: sim.model.alpha,
            xm: sim.model.xm,
            body_radius: sim.model.body_radius,
            atoms: (0..sim.model.spectral.len())
                .map(|k| AtomConfig {
                    dir: sim.model.spectral.dir(k).to_vec(),
                    weight: sim.model.spectral.weight(k),
                })
                .collect(),
        },
        target: TargetConfig {
            vstar: sim.target.vstar.clone(),
            astar: sim.target.astar.clone(),
            delta: Some(sim.target.delta),
            beta: Some(sim.target.beta),
            gamma: Some(sim.target.gamma),
        },
        kernel: KernelConfig {
            theta: Some(theta),
            a: Some(a),
            delta2: Some(delta2),
            max_step_factor: Some(max_step_factor),
            value_strategy: Some(
                match strategy {
                    ValueStrategy::ExactRadial => "exact",
                    ValueStrategy::AsymptoticKappa => "asymptotic",
                }
                .into(),
            ),
        },
        mollifier: MollifierConfig {
            c0_tilde: Some(moll.c0_tilde),
            delta0: Some(moll.delta0),
            epsilon: Some(epsilon),
            c1: Some(moll.c1),
        },
        lyapunov: LyapunovConfig {
            theta: Some(drift_theta),
            n_mc: Some(cfg.lyapunov.n_mc.unwrap_or(20_000)),
            n_states: Some(cfg.lyapunov.n_states.unwrap_or(20)),
            states_z: cfg.lyapunov.states_z.clone(),
        },
        limits: LimitsConfig {
            n_paths: Some(cfg.limits.n_paths.unwrap_or(10_000)),
            crude_hits: Some(cfg.limits.crude_hits.unwrap_or(0)),
        },
        sim: SimConfig {
            b: cfg.sim.b,
            b_list: cfg.sim.b_list.clone(),
            n_paths: Some(n_paths),
            seed: Some(seed),
            workers: Some(workers),
            output_dir: Some(output_dir.clone()),
            dump_paths: cfg.sim.dump_paths,
        },
    };

    Ok(Validated {
        sim,
        moll,
        epsilon,
        drift_theta,
        lyapunov_n_mc: cfg.lyapunov.n_mc.unwrap_or(20_000),
        lyapunov_n_states: cfg.lyapunov.n_states.unwrap_or(20),
        lyapunov_states_z: cfg.lyapunov.states_z,
        limits_n_paths: cfg.limits.n_paths.unwrap_or(10_000),
        crude_hits: cfg.limits.crude_hits.unwrap_or(0),
        b: cfg.sim.b,
        b_list: cfg.sim.b_list,
        n_paths,
        seed,
        workers,
        output_dir,
        dump_paths: cfg.sim.dump_paths,
        effective,
    })
}

/// Walk the document and reject duplicate object keys (serde_json would
/// silently keep the last one).
pub fn check_duplicate_keys(text: &str) -> Result<()> {
    let mut de = serde_json::Deserializer::from_str(text);
    DupCheck::deserialize(&mut de).map_err(|e| RuinError::Schema(e.to_string()))?;
    Ok(())
}

struct DupCheck;

impl<'de> Deserialize<'de> for DupCheck {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> serde::de::Visitor<'de> for V {
            type Value = DupCheck;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("any JSON value")
            }

            fn visit_map<A: serde::de::MapAccess<'de>>(
                self,
                mut map: A,
            ) -> std::result::Result<DupCheck, A::Error> {
                let mut seen = std::collections::BTreeSet::new();
                while let Some(key) = map.next_key::<String>()? {
                    if !seen.insert(key.clone()) {
                        return Err(serde::de::Error::custom(format!("duplicate key `{key}`")));
                    }
                    map.next_value::<DupCheck>()?;
                }
                Ok(DupCheck)
            }

            fn visit_seq<A: serde::de::SeqAccess<'de>>(
                self,
                mut seq: A,
            ) -> std::result::Result<DupCheck, A::Error> {
                while seq.next_element::<DupCheck>()?.is_some() {}
                Ok(DupCheck)
            }

            fn visit_bool<E>(self, _: bool) -> std::result::Result<DupCheck, E> {
                Ok(DupCheck)
            }
            fn visit_i64<E>(self, _: i64) -> std::result::Result<DupCheck, E> {
                Ok(DupCheck)
            }
            fn visit_u64<E>(self, _: u64) -> std::result::Result<DupCheck, E> {
                Ok(DupCheck)
            }
            fn visit_f64<E>(self, _: f64) -> std::result::Result<DupCheck, E> {
                Ok(DupCheck)
            }
            fn visit_str<E>(self, _: &str) -> std::result::Result<DupCheck, E> {
                Ok(DupCheck)
            }
            fn visit_unit<E>(self) -> std::result::Result<DupCheck, E> {
                Ok(DupCheck)
            }
        }
        d.deserialize_any(V)
    }
}

/// Serialize any value to pretty JSON with floats at 17 significant digits
/// (exact f64 round-trip) and sorted object keys.
pub fn to_json_17<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| RuinError::Schema(e.to_string()))?;
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    Ok(out)
}

fn write_value(v: &serde_json::Value, indent: usize, out: &mut String) {
    match v {
        serde_json::Value::Null => out.push_str("null"),
        serde_json::Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        serde_json::Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if n.is_f64() {
                    if f.is_finite() {
                        out.push_str(&format!("{:.16e}", f));
                    } else {
                        out.push_str("null");
                    }
                } else {
                    out.push_str(&n.to_string());
                }
            } else {
                out.push_str(&n.to_string());
            }
        }
        serde_json::Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string"));
        }
        serde_json::Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent + 1));
                write_value(item, indent + 1, out);
            }
            out.push('\n');
            out.push_str(&"  ".repeat(indent));
            out.push(']');
        }
        serde_json::Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            for (i, (k, val)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent + 1));
                out.push_str(&serde_json::to_string(k).expect("key"));
                out.push_str(": ");
                write_value(val, indent + 1, out);
            }
            out.push('\n');
            out.push_str(&"  ".repeat(indent));
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const CANONICAL: &str = r#"{
        "model": {"alpha": 2.5, "xm": 1.0, "atoms": [{"dir": [1.0, 0.0], "weight": 1.0}]},
        "target": {"vstar": [[1.0, 0.0]], "astar": [1.0]},
        "sim": {"b": 5.0, "n_paths": 1000, "seed": 7}
    }"#;

    #[test]
    fn minimal_config_fills_documented_defaults() {
        let v = parse_config(CANONICAL).unwrap();
        assert_eq!(v.sim.params.theta, 0.99);
        assert_eq!(v.sim.params.a, 0.99);
        assert_eq!(v.sim.params.max_step_factor, 10.0);
        assert_eq!(v.sim.target.gamma, 20.0);
        assert_eq!(v.sim.target.delta, 0.05);
        assert_eq!(v.sim.target.beta, 10.0); // 10 * max a*
        assert!((v.sim.params.delta2 - 0.1).abs() < 1e-15); // 0.1 * min a_j
        assert!((v.epsilon - 0.2).abs() < 1e-15);
        assert!((v.moll.c1 - 1.2f64.powi(3) * 1.8).abs() < 1e-12);
        assert!((v.drift_theta - 1.0 / 1.44).abs() < 1e-12);
    }

    #[test]
    fn degenerate_direction_is_rejected() {
        let bad = r#"{
            "model": {"alpha": 2.5, "xm": 1.0, "atoms": [{"dir": [1.0, 0.0], "weight": 1.0}]},
            "target": {"vstar": [[1.0, -1.0]], "astar": [1.0]},
            "sim": {"b": 5.0}
        }"#;
        assert!(matches!(parse_config(bad), Err(RuinError::DegenerateDirection { .. })));
    }

    #[test]
    fn unknown_and_duplicate_keys_are_schema_errors() {
        let unknown = r#"{
            "model": {"alpha": 2.5, "xm": 1.0, "atoms": [{"dir": [1.0, 0.0], "weight": 1.0}], "extra": 1},
            "target": {"vstar": [[1.0, 0.0]], "astar": [1.0]}
        }"#;
        assert!(matches!(parse_config(unknown), Err(RuinError::Schema(msg)) if msg.contains("extra")));
        let dup = r#"{
            "model": {"alpha": 2.5, "alpha": 3.0, "xm": 1.0, "atoms": [{"dir": [1.0, 0.0], "weight": 1.0}]},
            "target": {"vstar": [[1.0, 0.0]], "astar": [1.0]}
        }"#;
        assert!(matches!(parse_config(dup), Err(RuinError::Schema(msg)) if msg.contains("duplicate")));
    }

    #[test]
    fn effective_config_round_trips() {
        let v = parse_config(CANONICAL).unwrap();
        let echo = to_json_17(&v.effective).unwrap();
        let v2 = parse_config(&echo).unwrap();
        assert_eq!(v.sim.params.delta2.to_bits(), v2.sim.params.delta2.to_bits());
        assert_eq!(v.sim.model.shift[0].to_bits(), v2.sim.model.shift[0].to_bits());
        assert_eq!(v.seed, v2.seed);
        let echo2 = to_json_17(&v2.effective).unwrap();
        assert_eq!(echo, echo2);
    }

    #[test]
    fn seventeen_digit_floats_round_trip_exactly() {
        #[derive(Serialize)]
        struct W {
            x: f64,
        }
        for x in [std::f64::consts::PI, 1.0 / 3.0, 2.5e-300, -7.123456789012345e88] {
            let s = to_json_17(&W { x }).unwrap();
            let v: serde_json::Value = serde_json::from_str(&s).unwrap();
            assert_eq!(v["x"].as_f64().unwrap().to_bits(), x.to_bits(), "{s}");
        }
    }
}
