//! Execution of single operations into in-memory artifacts.

use anyhow::{Context, Result};
use blockade_core::dynamics::{
    peak_fidelity, quasi_adiabatic_then_quench, quench_trace, sweep, QuenchTrace, SweepOptions, Target,
};
use blockade_core::graphs::{
    build_doublet_chain, build_doublet_grid, build_gadget_chain, enumerate_independent_sets, path_graph, square_grid,
    GadgetKind, UnitDiskGraph, DEFAULT_ENUMERATION_CAP,
};
use blockade_core::hamiltonians::ModelSpec;
use blockade_core::spectral::{
    eigenstate_overlaps, find_min_gap, gap_scan, occupation_profile, phase_diagram, EigenOptions, StateVector,
};
use blockade_core::theory::theory_report;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, GraphRecipe, Operation, RefState};
use crate::figures;

/// A named output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(name: impl Into<String>, bytes: Vec<u8>) -> Self {
        Artifact { name: name.into(), bytes }
    }

    pub fn json(name: impl Into<String>, value: &impl serde::Serialize) -> Result<Self> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        Ok(Artifact::new(name, bytes))
    }
}

/// Everything an operation produced.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub summary: Value,
    /// Parameter substitutions made to keep the computation at desk scale.
    pub substitutions: Vec<String>,
}

/// CSV with a header row. Numbers use the shortest representation that round-trips,
/// switching to exponent notation for very small or large magnitudes.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Table { writer })
    }

    pub fn row(&mut self, cells: &[Cell]) -> Result<()> {
        self.writer.write_record(cells.iter().map(Cell::render))?;
        Ok(())
    }

    pub fn finish(self, name: impl Into<String>) -> Result<Artifact> {
        let bytes = self.writer.into_inner().context("flushing CSV")?;
        Ok(Artifact::new(name, bytes))
    }
}

pub enum Cell {
    Num(f64),
    Int(u64),
    Missing,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format!("{x:?}"),
            Cell::Int(n) => n.to_string(),
            Cell::Missing => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing, Cell::Num)
    }
}

pub fn eigen_options(seed: u64) -> EigenOptions {
    EigenOptions { seed, ..EigenOptions::default() }
}

pub fn build_graph(recipe: &GraphRecipe) -> Result<UnitDiskGraph> {
    Ok(match recipe {
        GraphRecipe::Path { n } => path_graph(*n)?,
        GraphRecipe::DoubletChain { length, geometry } => build_doublet_chain(*length, &geometry.unwrap_or_default())?,
        GraphRecipe::GadgetChain { length, q, geometry } => {
            build_gadget_chain(*length, GadgetKind::new(*q)?, &geometry.unwrap_or_default())?
        }
        GraphRecipe::DoubletGrid { m, geometry } => build_doublet_grid(*m, &geometry.unwrap_or_default())?,
        GraphRecipe::SquareGrid { rows, cols } => square_grid(*rows, *cols)?,
    })
}

/// Quench trace as CSV: `t, revival_fidelity, transfer_fidelity, mean_occupation`.
pub fn trace_table(trace: &QuenchTrace, name: &str) -> Result<Artifact> {
    let mut t = Table::new(&["t", "revival_fidelity", "transfer_fidelity", "mean_occupation"])?;
    for i in 0..trace.times.len() {
        let occ = trace.mean_occupation.as_ref().map(|o| o[i]);
        t.row(&[trace.times[i].into(), trace.revival[i].into(), trace.transfer[i].into(), occ.into()])?;
    }
    t.finish(name)
}

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    let opts = eigen_options(cfg.seed);
    let model = || cfg.model().context("operation needs a model");
    match &cfg.operation {
        Operation::GraphBuild { graph } => {
            let g = build_graph(graph)?;
            let counts = enumerate_independent_sets(&g, None, DEFAULT_ENUMERATION_CAP).ok();
            let summary = json!({
                "vertices": g.vertex_count(),
                "edges": g.edges().len(),
                "content_hash": g.content_hash(),
                "mis_size": counts.as_ref().map(|c| c.mis_size),
                "mis_count": counts.as_ref().map(|c| c.count(c.mis_size).to_string()),
                "mis_minus_one_count": counts.as_ref().map(|c| c.count(c.mis_size.saturating_sub(1)).to_string()),
            });
            let mut bytes = g.to_json()?.into_bytes();
            bytes.push(b'\n');
            Ok(Outcome { artifacts: vec![Artifact::new("graph.json", bytes)], summary, substitutions: vec![] })
        }
        Operation::GapScan { grid } => {
            let curve = gap_scan(model()?, &grid.values(), &opts)?;
            let mut t = Table::new(&["delta", "gap"])?;
            for p in &curve.points {
                t.row(&[p.delta.into(), p.gap.into()])?;
            }
            let failed = curve.points.iter().filter(|p| p.gap.is_none()).count();
            let summary = json!({
                "points": curve.points.len(),
                "unresolved_points": failed,
                "minimum": curve.minimum().map(|(d, g)| json!({"delta": d, "gap": g})),
            });
            Ok(Outcome { artifacts: vec![t.finish("gap_scan.csv")?], summary, substitutions: vec![] })
        }
        Operation::MinGap { range, rel_tol } => {
            let m = find_min_gap(model()?, *range, *rel_tol, &opts)?;
            Ok(Outcome {
                artifacts: vec![Artifact::json("min_gap.json", &m)?],
                summary: serde_json::to_value(m)?,
                substitutions: vec![],
            })
        }
        Operation::PhaseDiagram { length, ks, deltas } => {
            let pd = phase_diagram(*length, &ks.values(), &deltas.values(), &opts)?;
            let mut t = Table::new(&["k", "delta", "mean_occupation"])?;
            for (i, &k) in pd.ks.iter().enumerate() {
                for (j, &d) in pd.deltas.iter().enumerate() {
                    t.row(&[k.into(), d.into(), pd.occupation[i][j].into()])?;
                }
            }
            let summary = json!({"L": pd.length, "k_points": pd.ks.len(), "delta_points": pd.deltas.len()});
            Ok(Outcome { artifacts: vec![t.finish("phase_diagram.csv")?], summary, substitutions: vec![] })
        }
        Operation::Overlaps { refs } => {
            let spec = model()?;
            let art = overlaps_table(spec, refs, "overlaps.csv")?;
            Ok(Outcome { artifacts: vec![art], summary: json!({"refs": refs}), substitutions: vec![] })
        }
        Operation::Quench { t_max, dt, initial } => {
            let spec = model()?;
            let family = spec.family()?;
            let psi0 = StateVector::basis(family.space().clone(), initial.mask(spec)?)?;
            let trace = quench_trace(spec, &psi0, *t_max, *dt, &Default::default())?;
            let summary = quench_summary(&trace, 0.0, *t_max)?;
            Ok(Outcome { artifacts: vec![trace_table(&trace, "quench.csv")?], summary, substitutions: vec![] })
        }
        Operation::Sweep { schedule } => {
            let spec = model()?;
            let res = sweep(spec, schedule, &SweepOptions::default())?;
            let profile = occupation_profile(&res.state);
            let mut t = Table::new(&["site", "occupation"])?;
            for (i, &n) in profile.iter().enumerate() {
                t.row(&[Cell::Int(i as u64), n.into()])?;
            }
            let summary = json!({
                "stop_time": res.stop_time,
                "stop_delta": res.stop_delta,
                "ground_fidelity": res.ground_fidelity,
                "z2_probability": res.state.probability(spec.z2_mask()?),
            });
            Ok(Outcome {
                artifacts: vec![Artifact::json("sweep.json", &summary)?, t.finish("sweep_profile.csv")?],
                summary,
                substitutions: vec![],
            })
        }
        Operation::SweepQuench { schedule, quench_delta, t_max, dt } => {
            let spec = model()?;
            let trace =
                quasi_adiabatic_then_quench(spec, schedule, *quench_delta, *t_max, *dt, &SweepOptions::default())?;
            let end = trace.sweep_end.unwrap_or(0.0);
            let summary = quench_summary(&trace, end, end + t_max)?;
            Ok(Outcome { artifacts: vec![trace_table(&trace, "sweep_quench.csv")?], summary, substitutions: vec![] })
        }
        Operation::TheoryReport { length, k, omega } => {
            let report = theory_report(*length, *k, *omega)?;
            Ok(Outcome {
                artifacts: vec![Artifact::json("theory_report.json", &report)?],
                summary: json!({
                    "epsilon_crit": report.perturbation.epsilon_crit,
                    "top_two_disjoint": report.gershgorin.top_two_disjoint,
                    "localization_overlap": report.localization_overlap,
                    "meanfield_delta_crit": report.meanfield_delta_crit,
                    "dimer_revival_time": report.dimer_revival_time,
                }),
                substitutions: vec![],
            })
        }
        Operation::Reproduce { figure } => figures::reproduce(*figure, &opts),
    }
}

/// First `Z2` peak after `start` and the largest transfer fidelity overall.
pub fn quench_summary(trace: &QuenchTrace, start: f64, stop: f64) -> Result<Value> {
    let peak = peak_fidelity(trace, Target::Z2, (start + 0.5, stop)).ok();
    Ok(json!({
        "samples": trace.times.len(),
        "norm_drift": trace.norm_drift,
        "sweep_end": trace.sweep_end,
        "max_transfer_fidelity": max_of(&trace.transfer),
        "first_peak": peak.map(|(t, f)| json!({"t": t - start, "fidelity": f})),
    }))
}

/// Eigenstate overlaps as CSV: `energy, overlap_<ref>...`.
pub fn overlaps_table(spec: &ModelSpec, refs: &[RefState], name: &str) -> Result<Artifact> {
    let h = spec.build()?;
    let states =
        refs.iter().map(|r| Ok(StateVector::basis(h.space().clone(), r.mask(spec)?)?)).collect::<Result<Vec<_>>>()?;
    let records = eigenstate_overlaps(&h, &states)?;
    let header: Vec<String> =
        std::iter::once("energy".to_string()).chain(refs.iter().map(|r| format!("overlap_{}", r.label()))).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new(&header)?;
    for rec in &records {
        let row: Vec<Cell> = std::iter::once(rec.energy.into()).chain(rec.overlaps.iter().map(|&o| o.into())).collect();
        t.row(&row)?;
    }
    t.finish(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_formats_rows() {
        let mut t = Table::new(&["a", "b"]).unwrap();
        t.row(&[0.5.into(), None.into()]).unwrap();
        t.row(&[Cell::Int(3), 1e-20.into()]).unwrap();
        let a = t.finish("x.csv").unwrap();
        assert_eq!(String::from_utf8(a.bytes).unwrap(), "a,b\n0.5,\n3,1e-20\n");
    }
}
