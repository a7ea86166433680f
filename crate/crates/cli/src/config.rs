use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use blockade_core::dynamics::ScheduleSpec;
use blockade_core::graphs::{ChainGeometry, GridGeometry, UnitDiskGraph};
use blockade_core::hamiltonians::{GraphSource, ModelSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::figures::FigureId;

/// A model given inline or as a path to a ModelSpec JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Inline(ModelSpec),
    File(PathBuf),
}

/// Evenly spaced points, or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Linspace { start: f64, stop: f64, points: usize },
    Values(Vec<f64>),
}

impl Grid {
    pub fn linspace(start: f64, stop: f64, points: usize) -> Self {
        Grid::Linspace { start, stop, points }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Values(v) => v.clone(),
            Grid::Linspace { start, stop, points } => match points {
                0 => vec![],
                1 => vec![*start],
                n => (0..*n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect(),
            },
        }
    }
}

/// Reference configuration for overlaps and quench initial states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefState {
    Z2,
    Z2bar,
    AllGround,
    Mask(u64),
}

impl RefState {
    pub fn label(&self) -> String {
        match self {
            RefState::Z2 => "z2".into(),
            RefState::Z2bar => "z2bar".into(),
            RefState::AllGround => "all_ground".into(),
            RefState::Mask(m) => format!("mask_{m}"),
        }
    }

    pub fn mask(&self, spec: &ModelSpec) -> blockade_core::Result<u64> {
        match self {
            RefState::Z2 => spec.z2_mask(),
            RefState::Z2bar => spec.z2bar_mask(),
            RefState::AllGround => Ok(0),
            RefState::Mask(m) => Ok(*m),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphRecipe {
    Path {
        n: usize,
    },
    DoubletChain {
        #[serde(rename = "L")]
        length: usize,
        #[serde(default)]
        geometry: Option<ChainGeometry>,
    },
    GadgetChain {
        #[serde(rename = "L")]
        length: usize,
        q: u32,
        #[serde(default)]
        geometry: Option<ChainGeometry>,
    },
    DoubletGrid {
        m: usize,
        #[serde(default)]
        geometry: Option<GridGeometry>,
    },
    SquareGrid {
        rows: usize,
        cols: usize,
    },
}

fn default_rel_tol() -> f64 {
    1e-4
}
fn default_dt() -> f64 {
    0.01
}
fn default_omega() -> f64 {
    1.0
}
fn default_refs() -> Vec<RefState> {
    vec![RefState::Z2, RefState::Z2bar]
}
fn default_initial() -> RefState {
    RefState::Z2bar
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Operation {
    GraphBuild {
        graph: GraphRecipe,
    },
    GapScan {
        grid: Grid,
    },
    MinGap {
        range: (f64, f64),
        #[serde(default = "default_rel_tol")]
        rel_tol: f64,
    },
    PhaseDiagram {
        #[serde(rename = "L")]
        length: usize,
        ks: Grid,
        deltas: Grid,
    },
    Overlaps {
        #[serde(default = "default_refs")]
        refs: Vec<RefState>,
    },
    Quench {
        t_max: f64,
        #[serde(default = "default_dt")]
        dt: f64,
        #[serde(default = "default_initial")]
        initial: RefState,
    },
    Sweep {
        schedule: ScheduleSpec,
    },
    SweepQuench {
        schedule: ScheduleSpec,
        #[serde(default)]
        quench_delta: f64,
        t_max: f64,
        #[serde(default = "default_dt")]
        dt: f64,
    },
    TheoryReport {
        #[serde(rename = "L")]
        length: usize,
        k: f64,
        #[serde(default = "default_omega")]
        omega: f64,
    },
    Reproduce {
        figure: FigureId,
    },
}

impl Operation {
    pub fn name(&self) -> &'static str {
        match self {
            Operation::GraphBuild { .. } => "graph_build",
            Operation::GapScan { .. } => "gap_scan",
            Operation::MinGap { .. } => "min_gap",
            Operation::PhaseDiagram { .. } => "phase_diagram",
            Operation::Overlaps { .. } => "overlaps",
            Operation::Quench { .. } => "quench",
            Operation::Sweep { .. } => "sweep",
            Operation::SweepQuench { .. } => "sweep_quench",
            Operation::TheoryReport { .. } => "theory_report",
            Operation::Reproduce { .. } => "reproduce",
        }
    }

    pub fn needs_model(&self) -> bool {
        !matches!(
            self,
            Operation::GraphBuild { .. }
                | Operation::PhaseDiagram { .. }
                | Operation::TheoryReport { .. }
                | Operation::Reproduce { .. }
        )
    }
}

fn default_seed() -> u64 {
    7
}

/// One experiment: what to compute and where the results go.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: Option<ModelRef>,
    pub operation: Operation,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(model: Option<ModelSpec>, operation: Operation) -> Self {
        ExperimentConfig {
            model: model.map(ModelRef::Inline),
            operation,
            output_dir: None,
            cache_dir: None,
            threads: None,
            seed: default_seed(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        // Relative paths inside a config are relative to the config file.
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(ModelRef::File(p)) = &mut cfg.model {
            rebase(p);
        }
        if let Some(ModelRef::Inline(spec)) = &mut cfg.model {
            if let Some(GraphSource::File(p)) = &mut spec.graph {
                rebase(p);
            }
        }
        if let Some(p) = &mut cfg.output_dir {
            rebase(p);
        }
        if let Some(p) = &mut cfg.cache_dir {
            rebase(p);
        }
        Ok(cfg)
    }

    /// Loads every referenced file so that the config is self-contained.
    pub fn resolve(mut self) -> Result<Self> {
        if let Some(ModelRef::File(p)) = &self.model {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading model {}", p.display()))?;
            let spec: ModelSpec =
                serde_json::from_str(&text).with_context(|| format!("parsing model {}", p.display()))?;
            self.model = Some(ModelRef::Inline(spec));
        }
        if let Some(ModelRef::Inline(spec)) = &mut self.model {
            if let Some(GraphSource::File(p)) = &spec.graph {
                let g = UnitDiskGraph::from_json(
                    &std::fs::read_to_string(p).with_context(|| format!("reading graph {}", p.display()))?,
                )?;
                spec.graph = Some(GraphSource::Inline(g));
            }
            spec.validate()?;
        }
        if self.operation.needs_model() && self.model.is_none() {
            bail!(ConfigError(format!("operation {} needs a model", self.operation.name())));
        }
        if self.threads == Some(0) {
            bail!(ConfigError("threads must be positive".into()));
        }
        Ok(self)
    }

    pub fn model(&self) -> Option<&ModelSpec> {
        match &self.model {
            Some(ModelRef::Inline(spec)) => Some(spec),
            _ => None,
        }
    }

    /// Semantic content: model, operation and seed. Output locations and the
    /// thread count do not change results and are left out.
    pub fn semantic_json(&self) -> Result<String> {
        let value = serde_json::json!({
            "model": self.model,
            "operation": self.operation,
            "seed": self.seed,
        });
        // serde_json maps are ordered by key, so the text is canonical.
        Ok(serde_json::to_string(&value)?)
    }

    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.semantic_json()?.as_bytes())))
    }
}

/// Malformed or incomplete configuration.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}
