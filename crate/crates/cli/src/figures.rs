//! Dataset bundles, one per figure id.

use anyhow::Result;
use blockade_core::dynamics::{
    peak_fidelity, quasi_adiabatic_then_quench, quench_from_z2bar, QuenchTrace, ScheduleSpec, SweepOptions, Target,
};
use blockade_core::graphs::mis1_closed_form;
use blockade_core::hamiltonians::{ModelKind, ModelSpec};
use blockade_core::spectral::{
    find_min_gap, occupation_profile, phase_diagram, solve_gap, EigenOptions, MinGap, StateVector,
};
use blockade_core::theory::{gap_scaling_fit, meanfield_critical_delta};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RefState;
use crate::ops::{overlaps_table, quench_summary, trace_table, Artifact, Cell, Outcome, Table};

const SQRT2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FigureId {
    #[value(name = "fig3")]
    Fig3,
    #[value(name = "fig4")]
    Fig4,
    #[value(name = "fig5")]
    Fig5,
    #[value(name = "fig6a")]
    Fig6a,
    #[value(name = "fig6b")]
    Fig6b,
    #[value(name = "fig7")]
    Fig7,
    #[value(name = "fig8")]
    Fig8,
    #[value(name = "app_quench")]
    AppQuench,
}

impl FigureId {
    pub fn as_str(&self) -> &'static str {
        match self {
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
            FigureId::Fig6a => "fig6a",
            FigureId::Fig6b => "fig6b",
            FigureId::Fig7 => "fig7",
            FigureId::Fig8 => "fig8",
            FigureId::AppQuench => "app_quench",
        }
    }
}

/// Collects artifacts and the column map written to the bundle README.
struct Bundle {
    title: &'static str,
    outcome: Outcome,
    columns: Vec<(String, String)>,
}

impl Bundle {
    fn new(title: &'static str) -> Self {
        Bundle { title, outcome: Outcome::default(), columns: Vec::new() }
    }

    fn add(&mut self, artifact: Artifact, columns: &str) {
        self.columns.push((artifact.name.clone(), columns.to_string()));
        self.outcome.artifacts.push(artifact);
    }

    fn substitute(&mut self, note: &str) {
        self.outcome.substitutions.push(note.to_string());
    }

    fn finish(mut self, id: FigureId, summary: serde_json::Value) -> Outcome {
        let mut readme = format!("# {}: {}\n\n| file | columns |\n|---|---|\n", id.as_str(), self.title);
        for (file, cols) in &self.columns {
            readme.push_str(&format!("| {file} | {cols} |\n"));
        }
        if !self.outcome.substitutions.is_empty() {
            readme.push_str("\nDesk-scale substitutions:\n\n");
            for s in &self.outcome.substitutions {
                readme.push_str(&format!("- {s}\n"));
            }
        }
        self.outcome.artifacts.push(Artifact::new("README.md", readme.into_bytes()));
        self.outcome.summary = summary;
        self.outcome
    }
}

fn k_label(k: f64) -> &'static str {
    if k == 1.0 {
        "k1"
    } else {
        "ksqrt2"
    }
}

pub fn reproduce(id: FigureId, opts: &EigenOptions) -> Result<Outcome> {
    match id {
        FigureId::Fig3 => fig3(opts),
        FigureId::Fig4 => fig4(opts),
        FigureId::Fig5 => fig5(opts),
        FigureId::Fig6a => fig6a(opts),
        FigureId::Fig6b => fig6b(opts),
        FigureId::Fig7 => fig7(),
        FigureId::Fig8 => fig8(),
        FigureId::AppQuench => app_quench(),
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn fig3(opts: &EigenOptions) -> Result<Outcome> {
    let mut b = Bundle::new("mean ground-state occupation of the constrained k-chain, L=11");
    let pd = phase_diagram(11, &linspace(0.5, 2.5, 64), &linspace(-3.0, 6.0, 64), opts)?;
    let mut t = Table::new(&["k", "delta", "mean_occupation"])?;
    for (i, &k) in pd.ks.iter().enumerate() {
        for (j, &d) in pd.deltas.iter().enumerate() {
            t.row(&[k.into(), d.into(), pd.occupation[i][j].into()])?;
        }
    }
    b.add(t.finish("phase_diagram.csv")?, "k, delta, mean_occupation");
    Ok(b.finish(FigureId::Fig3, json!({"L": 11, "grid": [64, 64]})))
}

const GAP_LENGTHS: [usize; 6] = [5, 7, 9, 11, 13, 15];

fn min_gaps(specs: Vec<ModelSpec>, range: (f64, f64), opts: &EigenOptions) -> Result<Vec<MinGap>> {
    Ok(specs.par_iter().map(|s| find_min_gap(s, range, 1e-4, opts)).collect::<blockade_core::Result<Vec<_>>>()?)
}

fn fig4(opts: &EigenOptions) -> Result<Outcome> {
    let mut b = Bundle::new("minimum adiabatic gap of the sqrt2-Rydberg chain (V=100) with and without 1/r^6 tails");
    b.substitute("L restricted to 5..15 and solved exactly; longer chains need tensor-network methods");
    let chain = |l: usize| ModelSpec::chain(ModelKind::KChain, l, SQRT2).with_v(100.0);
    let plain = min_gaps(GAP_LENGTHS.iter().map(|&l| chain(l)).collect(), (-2.0, 12.0), opts)?;
    let tails = min_gaps(GAP_LENGTHS.iter().map(|&l| chain(l).with_tails(5.0)).collect(), (-2.0, 12.0), opts)?;
    let mut t = Table::new(&["L", "gap", "delta_crit", "gap_tails", "delta_crit_tails", "meanfield_delta_crit"])?;
    for (i, &l) in GAP_LENGTHS.iter().enumerate() {
        let mf = meanfield_critical_delta(l, SQRT2, 1.0).ok();
        t.row(&[
            Cell::Int(l as u64),
            plain[i].gap.into(),
            plain[i].delta.into(),
            tails[i].gap.into(),
            tails[i].delta.into(),
            mf.into(),
        ])?;
    }
    b.add(t.finish("gaps.csv")?, "L, gap, delta_crit, gap_tails, delta_crit_tails, meanfield_delta_crit");
    let points = |g: &[MinGap]| GAP_LENGTHS.iter().zip(g).map(|(&l, m)| (l, m.gap)).collect::<Vec<_>>();
    let fits = json!({
        "no_tails": gap_scaling_fit(&points(&plain))?,
        "tails": gap_scaling_fit(&points(&tails))?,
    });
    b.add(Artifact::json("fits.json", &fits)?, "least-squares fits of ln(gap) against L and L*ln(L)");
    Ok(b.finish(FigureId::Fig4, fits))
}

fn fig5(opts: &EigenOptions) -> Result<Outcome> {
    let mut b = Bundle::new("local ground-state occupation of Rydberg chains (L=11, V=100, no tails)");
    let deltas = linspace(-2.0, 6.0, 17);
    let l = 11;
    for k in [1.0, SQRT2] {
        let family = ModelSpec::chain(ModelKind::KChain, l, k).with_v(100.0).family()?;
        let header: Vec<String> =
            std::iter::once("delta".to_string()).chain((0..l).map(|i| format!("n_{i}"))).collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut t = Table::new(&header)?;
        let mut warm: Vec<Vec<f64>> = Vec::new();
        for &d in &deltas {
            let sol = solve_gap(&family.at(d), opts, &warm)?;
            let psi = StateVector::from_real(family.space().clone(), &sol.vectors[0])?;
            let row: Vec<Cell> =
                std::iter::once(d.into()).chain(occupation_profile(&psi).into_iter().map(Cell::from)).collect();
            t.row(&row)?;
            warm = sol.vectors;
        }
        b.add(t.finish(format!("occupation_{}.csv", k_label(k)))?, "delta, n_0 .. n_10 (site occupations)");
    }
    Ok(b.finish(FigureId::Fig5, json!({"L": l, "deltas": deltas.len()})))
}

fn fig6a(opts: &EigenOptions) -> Result<Outcome> {
    let mut b = Bundle::new("minimum gap with a global spin-exchange term, sqrt2-Rydberg chain (V=100, no tails)");
    b.substitute("L restricted to 5..13 and solved exactly");
    let lengths = [5usize, 7, 9, 11, 13];
    let phis = [0.0, 1.0, 2.0, 3.0];
    let specs: Vec<(usize, f64, ModelSpec)> = lengths
        .iter()
        .flat_map(|&l| {
            phis.iter().map(move |&phi| {
                (l, phi, ModelSpec::chain(ModelKind::SpinExchange, l, SQRT2).with_v(100.0).with_phi(phi))
            })
        })
        .collect();
    let gaps = min_gaps(specs.iter().map(|s| s.2.clone()).collect(), (-2.0, 25.0), opts)?;
    let mut t = Table::new(&["L", "N", "phi", "gap", "delta_min"])?;
    for ((l, phi, _), m) in specs.iter().zip(&gaps) {
        t.row(&[
            Cell::Int(*l as u64),
            Cell::Int((l + (l - 1) / 2) as u64),
            (*phi).into(),
            m.gap.into(),
            m.delta.into(),
        ])?;
    }
    b.add(t.finish("gaps.csv")?, "L (chain sites), N (atoms in the doublet geometry), phi, gap, delta_min");
    Ok(b.finish(FigureId::Fig6a, json!({"points": gaps.len()})))
}

fn fig6b(opts: &EigenOptions) -> Result<Outcome> {
    let mut b = Bundle::new("standard sweep versus Laplacian driving (phi=L), sqrt2 chain at V=1000");
    b.substitute("L restricted to 5..15 and solved exactly");
    let lap = |l: usize, phi: f64| ModelSpec::chain(ModelKind::Laplacian, l, SQRT2).with_v(1000.0).with_phi(phi);
    let standard = min_gaps(GAP_LENGTHS.iter().map(|&l| lap(l, 0.0)).collect(), (-2.0, 12.0), opts)?;
    let driven = min_gaps(GAP_LENGTHS.iter().map(|&l| lap(l, l as f64)).collect(), (-40.0, 40.0), opts)?;
    let mut t = Table::new(&["L", "N", "sqrt_d_mis_minus_one", "gap_standard", "gap_laplacian"])?;
    for (i, &l) in GAP_LENGTHS.iter().enumerate() {
        let d = (mis1_closed_form(l)? as f64).sqrt();
        t.row(&[
            Cell::Int(l as u64),
            Cell::Int((l + (l - 1) / 2) as u64),
            d.into(),
            standard[i].gap.into(),
            driven[i].gap.into(),
        ])?;
    }
    b.add(t.finish("gaps.csv")?, "L, N, sqrt(D(|MIS|-1)), gap_standard, gap_laplacian");
    Ok(b.finish(FigureId::Fig6b, json!({"lengths": GAP_LENGTHS})))
}

fn chain_quench(l: usize, k: f64, t_max: f64) -> Result<QuenchTrace> {
    Ok(quench_from_z2bar(&ModelSpec::chain(ModelKind::Quench, l, k), t_max, 0.01)?)
}

fn fig7() -> Result<Outcome> {
    let mut b = Bundle::new("scar overlaps and quench revivals of k-PXP chains");
    for k in [1.0, SQRT2] {
        let spec = ModelSpec::chain(ModelKind::KPxp, 15, k);
        let art = overlaps_table(&spec, &[RefState::Z2, RefState::Z2bar], &format!("overlaps_{}_L15.csv", k_label(k)))?;
        b.add(art, "energy, overlap_z2, overlap_z2bar (squared overlaps with each eigenstate, delta=0)");
    }
    let mut summary = serde_json::Map::new();
    for k in [1.0, SQRT2] {
        let trace = chain_quench(21, k, 6.0)?;
        summary.insert(format!("quench_{}_L21", k_label(k)), quench_summary(&trace, 0.0, 6.0)?);
        b.add(
            trace_table(&trace, &format!("quench_{}_L21.csv", k_label(k)))?,
            "t, revival_fidelity, transfer_fidelity, mean_occupation",
        );
    }
    let lengths: Vec<usize> = (9..=21).step_by(2).collect();
    let rows: Vec<(usize, f64, f64, f64, f64)> = [(1.0, 2.37), (SQRT2, 2.00)]
        .iter()
        .flat_map(|&(k, t_fixed)| lengths.iter().map(move |&l| (l, k, t_fixed)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(l, k, t_fixed)| {
            let trace = chain_quench(l, k, 4.0)?;
            let (tp, fp) = peak_fidelity(&trace, Target::Z2, (0.5, 4.0))?;
            let i = trace.times.iter().position(|&t| t >= t_fixed - 1e-9).unwrap_or(trace.times.len() - 1);
            Ok((l, k, tp, fp, trace.transfer[i]))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Table::new(&["L", "k", "t_peak", "peak_fidelity", "t_fixed", "fidelity_at_t_fixed"])?;
    for &(l, k, tp, fp, ff) in &rows {
        let t_fixed = if k == 1.0 { 2.37 } else { 2.00 };
        t.row(&[Cell::Int(l as u64), k.into(), tp.into(), fp.into(), t_fixed.into(), ff.into()])?;
    }
    b.add(t.finish("peak_scaling.csv")?, "L, k, t_peak, peak_fidelity, t_fixed, fidelity_at_t_fixed");
    Ok(b.finish(FigureId::Fig7, serde_json::Value::Object(summary)))
}

fn fig8() -> Result<Outcome> {
    let mut b = Bundle::new("quench revivals on the imbalanced doublet grid (k=sqrt2)");
    let mut summary = serde_json::Map::new();
    for m in [3usize, 5] {
        let trace = quench_from_z2bar(&ModelSpec::grid(m, SQRT2), 4.0, 0.01)?;
        summary.insert(format!("grid_m{m}"), quench_summary(&trace, 0.0, 4.0)?);
        b.add(
            trace_table(&trace, &format!("grid_m{m}.csv"))?,
            "t, revival_fidelity, transfer_fidelity, mean_occupation",
        );
    }
    Ok(b.finish(FigureId::Fig8, serde_json::Value::Object(summary)))
}

fn app_quench() -> Result<Outcome> {
    let mut b = Bundle::new("long quench revivals and a quench after an aborted quasi-adiabatic sweep");
    let long = chain_quench(21, SQRT2, 20.0)?;
    let mut summary = serde_json::Map::new();
    summary.insert("long_quench".into(), quench_summary(&long, 0.0, 20.0)?);
    b.add(trace_table(&long, "long_quench_ksqrt2_L21.csv")?, "t, revival_fidelity, transfer_fidelity, mean_occupation");
    let spec = ModelSpec::chain(ModelKind::KChain, 11, SQRT2).with_v(20.0).with_tails(5.0);
    let schedule = ScheduleSpec::new(50.0, -40.0, 40.0, 0.73);
    let trace = quasi_adiabatic_then_quench(&spec, &schedule, 0.0, 10.0, 0.01, &SweepOptions::default())?;
    let end = trace.sweep_end.unwrap_or(0.0);
    summary.insert("sweep_quench".into(), quench_summary(&trace, end, end + 10.0)?);
    b.add(
        trace_table(&trace, "sweep_quench_L11.csv")?,
        "t (sweep then quench; the quench starts at the sweep_end recorded in the manifest), revival_fidelity, transfer_fidelity, mean_occupation",
    );
    Ok(b.finish(FigureId::AppQuench, serde_json::Value::Object(summary)))
}
