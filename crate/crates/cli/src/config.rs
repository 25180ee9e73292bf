//! Run configuration: presets, TOML files and flag overrides.
//!
//! Resolution order is preset, then file, then flags. The file is merged
//! into the preset table by key; a sub-table whose `kind` differs from the
//! preset's replaces it instead of merging.

use std::fmt;
use std::path::{Path, PathBuf};

use pricemfg_core::analytic::Quadrature;
use pricemfg_core::{
    CostModel, GradientBackend, Init, InitialStates, Potential, SolverConfig, SupplySpec, TimeGrid,
};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, Result};

/// Wiener seed for the case2 supply.
pub const CASE2_SUPPLY_SEED: u64 = 0;
/// Wiener seed for the case4b supply, screened so the path ends positive
/// and every agent finishes within 0.1 of the upper well.
pub const CASE4B_SUPPLY_SEED: u64 = 13493;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Case1,
    Case2,
    Case3,
    Case4a,
    Case4b,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Case1,
        Preset::Case2,
        Preset::Case3,
        Preset::Case4a,
        Preset::Case4b,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Case1 => "case1",
            Preset::Case2 => "case2",
            Preset::Case3 => "case3",
            Preset::Case4a => "case4a",
            Preset::Case4b => "case4b",
        }
    }

    /// T = 1, N = 1000, M = 100 agents evenly spaced on [0, 1], c0 = 1,
    /// 10^4 iterations.
    pub fn config(self) -> RunConfig {
        let well = Potential::DoubleWell {
            r: 50.0,
            y_a: 0.25,
            y_b: 0.75,
        };
        let sine = SupplySpec::Sinusoid {
            amplitude: 1.0,
            angular_frequency: 10.0,
        };
        let (running, terminal, supply) = match self {
            Preset::Case1 => (
                Potential::Zero,
                Potential::Quadratic { r: 10.0, y: 0.0 },
                sine,
            ),
            Preset::Case2 => (
                Potential::Quadratic { r: 10.0, y: 0.0 },
                Potential::Zero,
                SupplySpec::Wiener {
                    seed: CASE2_SUPPLY_SEED,
                },
            ),
            Preset::Case3 => (Potential::Zero, well, sine),
            Preset::Case4a => (well, Potential::Zero, sine),
            Preset::Case4b => (
                well,
                Potential::Zero,
                SupplySpec::Wiener {
                    seed: CASE4B_SUPPLY_SEED,
                },
            ),
        };
        RunConfig {
            preset: Some(self),
            grid: TimeGrid::new(1.0, 1000).expect("preset grid"),
            agents: AgentsConfig {
                count: 100,
                initial: InitialSpec::EvenlySpaced { a: 0.0, b: 1.0 },
            },
            cost: CostModel {
                c0: 1.0,
                running,
                terminal,
            },
            supply,
            solver: SolverConfig::default(),
            output_dir: None,
            sample_agents: default_sample_agents(),
            oracle_quadrature: Quadrature::LeftEndpoint,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `x_m = a + (m-1)(b-a)/(M-1)`
    EvenlySpaced {
        a: f64,
        b: f64,
    },
    FromFile {
        path: PathBuf,
    },
    Explicit {
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentsConfig {
    pub count: usize,
    pub initial: InitialSpec,
}

impl AgentsConfig {
    pub fn initial_states(&self) -> Result<InitialStates> {
        let states = match &self.initial {
            InitialSpec::EvenlySpaced { a, b } => InitialStates::evenly_spaced(*a, *b, self.count)?,
            InitialSpec::FromFile { path } => InitialStates::from_csv(path)?,
            InitialSpec::Explicit { values } => InitialStates::explicit(values.clone())?,
        };
        if states.len() != self.count {
            return Err(CliError::Config {
                origin: "agents".into(),
                message: format!(
                    "agents.count = {} but the initial states hold {} values",
                    self.count,
                    states.len()
                ),
            });
        }
        Ok(states)
    }
}

fn default_sample_agents() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    pub grid: TimeGrid,
    pub agents: AgentsConfig,
    pub cost: CostModel,
    pub supply: SupplySpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Number of agents written to `trajectories.csv`.
    #[serde(default = "default_sample_agents")]
    pub sample_agents: usize,
    #[serde(default)]
    pub oracle_quadrature: Quadrature,
}

/// Command-line values that take precedence over preset and file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub tau_alpha: Option<f64>,
    pub tau_omega: Option<f64>,
    pub sigma: Option<f64>,
    pub backend: Option<GradientBackend>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let s = &mut cfg.solver;
        if let Some(seed) = self.seed {
            s.init = Init::SeededNormal { seed };
        }
        if let Some(k) = self.iterations {
            s.iterations = k;
        }
        if let Some(v) = self.tau_alpha {
            s.tau_alpha = v;
        }
        if let Some(v) = self.tau_omega {
            s.tau_omega = v;
        }
        if let Some(v) = self.sigma {
            s.sigma = v;
        }
        if let Some(b) = self.backend {
            s.backend = b;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = Some(out.clone());
        }
    }
}

impl RunConfig {
    /// Merges an optional preset, an optional TOML file and the overrides.
    /// A preset named on the command line wins over one named in the file.
    pub fn resolve(
        preset: Option<Preset>,
        file: Option<&Path>,
        overrides: &Overrides,
    ) -> Result<Self> {
        let (origin, table) = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(io_err(path))?;
                let origin = path.display().to_string();
                let table: toml::Table = toml::from_str(&text).map_err(|e| CliError::Config {
                    origin: origin.clone(),
                    message: e.to_string(),
                })?;
                (origin, table)
            }
            None => ("flags".to_string(), toml::Table::new()),
        };
        let config_err = |message: String| CliError::Config {
            origin: origin.clone(),
            message,
        };

        let preset = match (preset, table.get("preset")) {
            (Some(p), _) => Some(p),
            (None, None) => None,
            (None, Some(v)) => Some(
                v.clone()
                    .try_into::<Preset>()
                    .map_err(|e| config_err(format!("field `preset`: {e}")))?,
            ),
        };
        if preset.is_none() && file.is_none() {
            return Err(config_err("give --preset, --config or both".into()));
        }

        let mut merged = match preset {
            Some(p) => toml::Table::try_from(p.config())
                .map_err(|e| config_err(format!("preset {p}: {e}")))?,
            None => toml::Table::new(),
        };
        merge(&mut merged, table);
        if let Some(p) = preset {
            merged.insert("preset".into(), toml::Value::String(p.name().into()));
        }
        let mut cfg: RunConfig = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| config_err(e.to_string()))?;
        overrides.apply(&mut cfg);
        cfg.validate().map_err(|e| config_err(e.to_string()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.cost.validate()?;
        self.solver.validate()?;
        if self.agents.count == 0 {
            return Err(CliError::Config {
                origin: "agents".into(),
                message: "agents.count must be at least 1".into(),
            });
        }
        if let GradientBackend::FiniteDifference { step } = self.solver.backend {
            if !(step.is_finite() && step > 0.0) {
                return Err(CliError::Config {
                    origin: "solver.backend".into(),
                    message: format!("finite-difference step must be positive, got {step}"),
                });
            }
        }
        Ok(())
    }

    /// Name used for the default output directory.
    pub fn label(&self) -> &'static str {
        self.preset.map_or("custom", Preset::name)
    }
}

fn merge(base: &mut toml::Table, top: toml::Table) {
    for (key, value) in top {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) if same_kind(b, &t) => merge(b, t),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

fn same_kind(a: &toml::Table, b: &toml::Table) -> bool {
    match b.get("kind") {
        None => true,
        Some(k) => a.get("kind") == Some(k),
    }
}
