//! Experiment configuration files.
//!
//! The format is line oriented. `#` starts a comment, blank lines are
//! ignored, `[section]` opens a section and every other line is
//! `key = value`. Keys before the first section header are top-level.
//!
//! ```text
//! campaign = 6 x 1000 seed 42      # n vehicles x runs, optional base seed
//!
//! [geometry]   ways r_in r_en approach_len theta1 theta2 theta3
//! [cost]       lambda e_inf c c_ins c_en c_in c_o d d_en d_c v_l
//! [game]       horizon player_cap strategies
//! [agent]      weight_grid epsilon_dev epsilon_r deadlock_probability
//!              deadlock_accel stopped_speed estimator_ego_uses_true_weight
//! [sim]        delta max_steps spawn_arclen spawn_spacing arm_stagger
//!              vehicles_per_arm removal_margin
//! [output]     dir traces
//! ```
//!
//! `campaign` may be repeated; without one the campaign is 4 to 8 vehicles,
//! 200 runs each, base seed 1. `strategies` lists acceleration vectors
//! separated by `|`, each truncated or zero-padded to `horizon`:
//! `strategies = -50 0 0 0 0 | 0 0 0 0 0 | 30 0 0 0 0`. `weight_grid` is a
//! space-separated list. Every other key takes one number, or `true`/`false`.
//! Unknown sections or keys and repeated keys are errors.

use std::collections::HashSet;
use std::path::PathBuf;

use roundabout::agent::{AgentParams, DecisionModel};
use roundabout::cost::CostParams;
use roundabout::game::{Strategy, StrategySet, DEFAULT_PLAYER_CAP};
use roundabout::geometry::{build_roundabout, RoundaboutSpec};
use roundabout::sim::SimParams;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// One block of runs: `runs` simulations of `n_vehicles`, seeds
/// `base_seed, base_seed + 1, ...`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CampaignRow {
    pub n_vehicles: usize,
    pub runs: usize,
    pub base_seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub traces: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub geometry: RoundaboutSpec,
    pub cost: CostParams,
    pub strategies: StrategySet,
    pub agent: AgentParams,
    pub sim: SimParams,
    /// Time step Δ in seconds.
    pub delta: f64,
    pub campaign: Vec<CampaignRow>,
    pub output: OutputConfig,
}

pub const DEFAULT_RUNS: usize = 200;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_HORIZON: usize = 4;

pub fn default_campaign() -> Vec<CampaignRow> {
    (4..=8)
        .map(|n| CampaignRow {
            n_vehicles: n,
            runs: DEFAULT_RUNS,
            base_seed: DEFAULT_SEED,
        })
        .collect()
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            geometry: RoundaboutSpec::default(),
            cost: CostParams::default(),
            strategies: StrategySet::default_alphabet(DEFAULT_HORIZON),
            agent: AgentParams::default(),
            sim: SimParams::default(),
            delta: 0.25,
            campaign: default_campaign(),
            output: OutputConfig {
                dir: PathBuf::from("results"),
                traces: false,
            },
        }
    }
}

impl ExperimentConfig {
    /// Builds the shared decision model, validating every parameter.
    pub fn model(&self) -> Result<DecisionModel, ConfigError> {
        let invalid = |e: roundabout::Error| ConfigError::Invalid(e.to_string());
        let model = DecisionModel {
            geometry: build_roundabout(self.geometry.clone()).map_err(invalid)?,
            cost: self.cost.clone(),
            strategies: self.strategies.clone(),
            agent: self.agent.clone(),
            delta: self.delta,
        };
        model.validate().map_err(invalid)?;
        self.sim.validate().map_err(invalid)?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model()?;
        let capacity = self.geometry.ways * self.sim.vehicles_per_arm;
        for row in &self.campaign {
            if row.n_vehicles > capacity {
                return Err(ConfigError::Invalid(format!(
                    "campaign asks for {} vehicles but the layout holds {capacity}",
                    row.n_vehicles
                )));
            }
        }
        Ok(())
    }

    /// Replaces every row's base seed and run count where given.
    pub fn override_campaign(&mut self, seed: Option<u64>, runs: Option<usize>) {
        for row in &mut self.campaign {
            if let Some(s) = seed {
                row.base_seed = s;
            }
            if let Some(r) = runs {
                row.runs = r;
            }
        }
    }
}

struct Line<'a> {
    number: usize,
    key: &'a str,
    value: &'a str,
}

impl Line<'_> {
    fn err(&self, message: impl Into<String>) -> ConfigError {
        ConfigError::Syntax {
            line: self.number,
            message: message.into(),
        }
    }

    fn f64(&self) -> Result<f64, ConfigError> {
        self.value
            .parse()
            .map_err(|_| self.err(format!("`{}` expects a number, got `{}`", self.key, self.value)))
    }

    fn usize(&self) -> Result<usize, ConfigError> {
        self.value
            .parse()
            .map_err(|_| self.err(format!("`{}` expects a non-negative integer, got `{}`", self.key, self.value)))
    }

    fn bool(&self) -> Result<bool, ConfigError> {
        match self.value {
            "true" => Ok(true),
            "false" => Ok(false),
            v => Err(self.err(format!("`{}` expects true or false, got `{v}`", self.key))),
        }
    }

    fn numbers(&self, text: &str) -> Result<Vec<f64>, ConfigError> {
        text.split_whitespace()
            .map(|t| t.parse().map_err(|_| self.err(format!("`{}`: `{t}` is not a number", self.key))))
            .collect()
    }

    fn campaign(&self) -> Result<CampaignRow, ConfigError> {
        let bad = || self.err(format!("campaign must look like `6 x 1000 seed 42`, got `{}`", self.value));
        let t: Vec<&str> = self.value.split_whitespace().collect();
        let (n, runs, seed) = match t.as_slice() {
            [n, "x", runs] => (n, runs, None),
            [n, "x", runs, "seed", seed] => (n, runs, Some(seed)),
            _ => return Err(bad()),
        };
        Ok(CampaignRow {
            n_vehicles: n.parse().map_err(|_| bad())?,
            runs: runs.parse().map_err(|_| bad())?,
            base_seed: seed.map_or(Ok(DEFAULT_SEED), |s| s.parse()).map_err(|_| bad())?,
        })
    }
}

const SECTIONS: [&str; 6] = ["geometry", "cost", "game", "agent", "sim", "output"];

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::default();
    let mut section = String::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut campaign = Vec::new();
    let mut horizon = DEFAULT_HORIZON;
    let mut listing: Option<(usize, Vec<Vec<f64>>)> = None;
    let mut theta2: Option<f64> = None;

    for (k, raw) in text.lines().enumerate() {
        let number = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or(ConfigError::Syntax { line: number, message: format!("unterminated section header `{content}`") })?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(ConfigError::Syntax { line: number, message: format!("unknown section `{name}`") });
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax {
            line: number,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let line = Line { number, key: key.trim(), value: value.trim() };
        if line.key != "campaign" && !seen.insert((section.clone(), line.key.to_string())) {
            return Err(line.err(format!("`{}` is set twice", line.key)));
        }
        let unknown = || line.err(format!("unknown key `{}` in {}", line.key, if section.is_empty() { "top level".to_string() } else { format!("[{section}]") }));
        let g = &mut cfg.geometry;
        let c = &mut cfg.cost;
        let a = &mut cfg.agent;
        let s = &mut cfg.sim;
        match (section.as_str(), line.key) {
            ("", "campaign") => campaign.push(line.campaign()?),

            ("geometry", "ways") => g.ways = line.usize()?,
            ("geometry", "r_in") => g.r_in = line.f64()?,
            ("geometry", "r_en") => g.r_en = line.f64()?,
            ("geometry", "approach_len") => g.approach_len = line.f64()?,
            ("geometry", "theta1") => g.theta1 = line.f64()?,
            ("geometry", "theta2") => theta2 = Some(line.f64()?),
            ("geometry", "theta3") => g.theta3 = line.f64()?,

            ("cost", "lambda") => c.lambda = line.f64()?,
            ("cost", "e_inf") => c.e_inf = line.f64()?,
            ("cost", "c") => c.c = line.f64()?,
            ("cost", "c_ins") => c.c_ins = line.f64()?,
            ("cost", "c_en") => c.c_en = line.f64()?,
            ("cost", "c_in") => c.c_in = line.f64()?,
            ("cost", "c_o") => c.c_o = line.f64()?,
            ("cost", "d") => c.d = line.f64()?,
            ("cost", "d_en") => c.d_en = line.f64()?,
            ("cost", "d_c") => c.d_c = line.f64()?,
            ("cost", "v_l") => c.v_l = line.f64()?,

            ("game", "horizon") => horizon = line.usize()?,
            ("game", "player_cap") => a.player_cap = line.usize()?,
            ("game", "strategies") => {
                let vectors = line.value.split('|').map(|v| line.numbers(v)).collect::<Result<Vec<_>, _>>()?;
                if vectors.iter().any(Vec::is_empty) {
                    return Err(line.err("empty strategy between `|` separators"));
                }
                listing = Some((number, vectors));
            }

            ("agent", "weight_grid") => a.weight_grid = line.numbers(line.value)?,
            ("agent", "epsilon_dev") => a.epsilon_dev = line.f64()?,
            ("agent", "epsilon_r") => a.epsilon_r = line.f64()?,
            ("agent", "deadlock_probability") => a.deadlock_probability = line.f64()?,
            ("agent", "deadlock_accel") => a.deadlock_accel = line.f64()?,
            ("agent", "stopped_speed") => a.stopped_speed = line.f64()?,
            ("agent", "estimator_ego_uses_true_weight") => a.estimator_ego_uses_true_weight = line.bool()?,

            ("sim", "delta") => cfg.delta = line.f64()?,
            ("sim", "max_steps") => s.max_steps = line.usize()?,
            ("sim", "spawn_arclen") => s.spawn_arclen = line.f64()?,
            ("sim", "spawn_spacing") => s.spawn_spacing = line.f64()?,
            ("sim", "arm_stagger") => s.arm_stagger = line.f64()?,
            ("sim", "vehicles_per_arm") => s.vehicles_per_arm = line.usize()?,
            ("sim", "removal_margin") => s.removal_margin = line.f64()?,

            ("output", "dir") => cfg.output.dir = PathBuf::from(line.value),
            ("output", "traces") => cfg.output.traces = line.bool()?,

            _ => return Err(unknown()),
        }
    }

    // arm layout follows the arm count unless given explicitly
    let g = &cfg.geometry;
    let mut spec = RoundaboutSpec::evenly_spaced(g.ways, g.r_in, g.r_en, g.approach_len, g.theta1, g.theta3);
    if let Some(t) = theta2 {
        spec.theta2 = t;
    }
    cfg.geometry = spec;

    if horizon == 0 {
        return Err(ConfigError::Invalid("horizon must be at least 1".into()));
    }
    cfg.strategies = match listing {
        None => StrategySet::default_alphabet(horizon),
        Some((number, vectors)) => {
            let plans = vectors.iter().map(|v| Strategy::from_listing(v, horizon)).collect();
            StrategySet::new(plans).map_err(|e| ConfigError::Syntax { line: number, message: e.to_string() })?
        }
    };
    if !campaign.is_empty() {
        cfg.campaign = campaign;
    }
    if cfg.agent.player_cap == 0 {
        cfg.agent.player_cap = DEFAULT_PLAYER_CAP;
    }
    cfg.validate()?;
    Ok(cfg)
}
