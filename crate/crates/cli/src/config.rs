//! Plain-text `key = value` configuration with dotted sections. Unknown keys
//! are rejected; unset keys fall back to per-recipe defaults.

use anyhow::{bail, Context, Result};
use std::collections::BTreeMap;
use std::path::Path;

/// Raw parsed configuration (everything optional; recipes resolve defaults).
#[derive(Debug, Clone, Default)]
pub struct LabConfig {
    pub model_alpha: Option<f64>,
    pub model_x_max: Option<f64>,
    pub model_n_points: Option<usize>,
    pub integrator_dt: Option<f64>,
    pub integrator_t_max: Option<f64>,
    pub integrator_record_stride: Option<usize>,
    pub weights_gamma: Option<f64>,
    pub weights_a: Option<f64>,
    pub weights_b: Option<f64>,
    pub shooting_delta0: Option<f64>,
    pub shooting_k_amp: Option<f64>,
    pub shooting_t_max: Option<f64>,
    pub shooting_bisection_tol: Option<f64>,
    pub shooting_max_iters: Option<usize>,
    pub seed: Option<u64>,
    pub experiment: Option<String>,
    pub output_dir: Option<String>,
}

impl LabConfig {
    pub fn parse_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = LabConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("config line {}: expected key = value, got {raw:?}", lineno + 1);
            };
            let key = key.trim();
            let value = value.trim();
            let ctx = |what: &str| format!("config line {}: bad {what}: {value:?}", lineno + 1);
            match key {
                "model.alpha" => cfg.model_alpha = Some(value.parse().with_context(|| ctx("float"))?),
                "model.x_max" => cfg.model_x_max = Some(value.parse().with_context(|| ctx("float"))?),
                "model.n_points" => {
                    cfg.model_n_points = Some(value.parse().with_context(|| ctx("integer"))?)
                }
                "integrator.dt" => {
                    cfg.integrator_dt = Some(value.parse().with_context(|| ctx("float"))?)
                }
                "integrator.t_max" => {
                    cfg.integrator_t_max = Some(value.parse().with_context(|| ctx("float"))?)
                }
                "integrator.record_stride" => {
                    cfg.integrator_record_stride =
                        Some(value.parse().with_context(|| ctx("integer"))?)
                }
                "weights.gamma" => {
                    cfg.weights_gamma = Some(value.parse().with_context(|| ctx("float"))?)
                }
                "weights.a" => cfg.weights_a = Some(value.parse().with_context(|| ctx("float"))?),
                "weights.b" => cfg.weights_b = Some(value.parse().with_context(|| ctx("float"))?),
                "shooting.delta0" => {
                    cfg.shooting_delta0 = Some(value.parse().with_context(|| ctx("float"))?)
                }
                "shooting.k_amp" => {
                    cfg.shooting_k_amp = Some(value.parse().with_context(|| ctx("float"))?)
                }
                "shooting.t_max" => {
                    cfg.shooting_t_max = Some(value.parse().with_context(|| ctx("float"))?)
                }
                "shooting.bisection_tol" => {
                    cfg.shooting_bisection_tol =
                        Some(value.parse().with_context(|| ctx("float"))?)
                }
                "shooting.max_iters" => {
                    cfg.shooting_max_iters = Some(value.parse().with_context(|| ctx("integer"))?)
                }
                "seed" => cfg.seed = Some(value.parse().with_context(|| ctx("integer"))?),
                "experiment" => cfg.experiment = Some(value.to_string()),
                "output_dir" => cfg.output_dir = Some(value.to_string()),
                other => bail!("config line {}: unknown key {other:?}", lineno + 1),
            }
        }
        Ok(cfg)
    }
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub experiment: String,
    pub alpha: f64,
    pub x_max: f64,
    pub n_points: usize,
    pub dt: f64,
    pub t_max: f64,
    pub record_stride: usize,
    pub gamma: f64,
    pub weights_fixed: Option<(f64, f64)>,
    pub delta0: f64,
    pub k_amp: f64,
    pub shoot_t_max: f64,
    pub bisection_tol: Option<f64>,
    pub max_iters: usize,
    pub seed: u64,
    pub output_dir: String,
}

impl Resolved {
    /// Snapshot for the manifest: every resolved value, stringly and sorted.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("experiment".into(), self.experiment.clone());
        m.insert("model.alpha".into(), format!("{}", self.alpha));
        m.insert("model.x_max".into(), format!("{}", self.x_max));
        m.insert("model.n_points".into(), format!("{}", self.n_points));
        m.insert("integrator.dt".into(), format!("{}", self.dt));
        m.insert("integrator.t_max".into(), format!("{}", self.t_max));
        m.insert(
            "integrator.record_stride".into(),
            format!("{}", self.record_stride),
        );
        m.insert("weights.gamma".into(), format!("{}", self.gamma));
        if let Some((a, b)) = self.weights_fixed {
            m.insert("weights.a".into(), format!("{a}"));
            m.insert("weights.b".into(), format!("{b}"));
        }
        m.insert("shooting.delta0".into(), format!("{}", self.delta0));
        m.insert("shooting.k_amp".into(), format!("{}", self.k_amp));
        m.insert("shooting.t_max".into(), format!("{}", self.shoot_t_max));
        if let Some(t) = self.bisection_tol {
            m.insert("shooting.bisection_tol".into(), format!("{t}"));
        }
        m.insert("shooting.max_iters".into(), format!("{}", self.max_iters));
        m.insert("seed".into(), format!("{}", self.seed));
        m.insert("output_dir".into(), self.output_dir.clone());
        m
    }
}

pub const RECIPES: &[&str] = &[
    "spectrum",
    "factorization",
    "linear_modes",
    "virial_audit",
    "shoot",
    "lipschitz",
    "decay",
    "sweep_alpha",
];

/// Resolve the raw config against per-recipe defaults. Trajectory-driven
/// recipes default to the wide domain (radiation emitted by t <= 100 never
/// returns); the desk grid of the operator-level recipes is h = 0.01,
/// x_max = 40.
pub fn resolve(cfg: &LabConfig, experiment_cli: Option<&str>) -> Result<Resolved> {
    let experiment = experiment_cli
        .map(str::to_string)
        .or_else(|| cfg.experiment.clone())
        .unwrap_or_else(|| "spectrum".to_string());
    if !RECIPES.contains(&experiment.as_str()) {
        bail!(
            "unknown experiment {experiment:?}; available: {}",
            RECIPES.join(", ")
        );
    }
    let wide = matches!(
        experiment.as_str(),
        "shoot" | "lipschitz" | "decay" | "virial_audit" | "sweep_alpha"
    );
    let (def_xmax, def_n, def_dt) = if wide {
        (120.0, 6001, 2e-3)
    } else {
        (40.0, 4001, 1e-3)
    };
    let weights_fixed = match (cfg.weights_a, cfg.weights_b) {
        (Some(a), Some(b)) => Some((a, b)),
        (None, None) => None,
        _ => bail!("weights.a and weights.b must be set together"),
    };
    let r = Resolved {
        experiment,
        alpha: cfg.model_alpha.unwrap_or(2.0),
        x_max: cfg.model_x_max.unwrap_or(def_xmax),
        n_points: cfg.model_n_points.unwrap_or(def_n),
        dt: cfg.integrator_dt.unwrap_or(def_dt),
        t_max: cfg.integrator_t_max.unwrap_or(100.0),
        record_stride: cfg.integrator_record_stride.unwrap_or(if wide { 50 } else { 100 }),
        gamma: cfg.weights_gamma.unwrap_or(0.05),
        weights_fixed,
        delta0: cfg.shooting_delta0.unwrap_or(1e-3),
        k_amp: cfg.shooting_k_amp.unwrap_or(4.0),
        shoot_t_max: cfg.shooting_t_max.unwrap_or(100.0),
        bisection_tol: cfg.shooting_bisection_tol.filter(|&t| t > 0.0),
        max_iters: cfg.shooting_max_iters.unwrap_or(60),
        seed: cfg.seed.unwrap_or(7),
        output_dir: cfg.output_dir.clone().unwrap_or_else(|| "runs".to_string()),
    };
    Ok(r)
}
