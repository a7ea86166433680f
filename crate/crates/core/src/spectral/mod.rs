//! Gap scans, minimum-gap search, occupation profiles, phase diagrams and
//! eigenstate overlaps.

mod eigen;

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

pub use eigen::{dense_spectrum, lowest_eigenpairs, lowest_eigenpairs_with, EigenOptions, Eigenpair};

use crate::error::{Error, Result};
use crate::hamiltonians::{DetuningFamily, LinearOperator, ModelKind, ModelSpec, SparseOperator};
use crate::linalg::cdot;
use crate::statespace::ConfigSpace;

/// Gaps below this multiple of the operator norm are not resolvable in double precision.
pub const GAP_RESOLUTION: f64 = 1e-12;

/// Largest dimension accepted by [`eigenstate_overlaps`].
pub const OVERLAP_DIM_CAP: usize = 6000;

const SCAN_CHUNK: usize = 8;

/// Complex amplitudes over a configuration space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    space: Arc<ConfigSpace>,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn from_amplitudes(space: Arc<ConfigSpace>, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != space.dim() {
            return Err(Error::invalid(format!("{} amplitudes for a {}-state space", amps.len(), space.dim())));
        }
        if amps.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(Error::invalid("state amplitudes must be finite"));
        }
        Ok(StateVector { space, amps })
    }

    pub fn from_real(space: Arc<ConfigSpace>, amps: &[f64]) -> Result<Self> {
        Self::from_amplitudes(space, amps.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    /// The configuration `mask` as a normalized state.
    pub fn basis(space: Arc<ConfigSpace>, mask: u64) -> Result<Self> {
        let i = space
            .index_of(mask)
            .ok_or_else(|| Error::invalid(format!("configuration {mask:#b} is not in the space")))?;
        let mut amps = vec![Complex64::new(0.0, 0.0); space.dim()];
        amps[i] = Complex64::new(1.0, 0.0);
        Ok(StateVector { space, amps })
    }

    pub fn space(&self) -> &Arc<ConfigSpace> {
        &self.space
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::cnorm(&self.amps)
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::invalid("cannot normalize the zero vector"));
        }
        for a in &mut self.amps {
            *a /= n;
        }
        Ok(self)
    }

    fn same_space(&self, other: &StateVector) -> Result<()> {
        if Arc::ptr_eq(&self.space, &other.space) || self.space == other.space {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &StateVector) -> Result<Complex64> {
        self.same_space(other)?;
        Ok(cdot(&self.amps, &other.amps))
    }

    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.overlap(other)?.norm_sqr())
    }

    /// Weight on a single configuration; zero if it is not in the space.
    pub fn probability(&self, mask: u64) -> f64 {
        self.space.index_of(mask).map_or(0.0, |i| self.amps[i].norm_sqr())
    }

    pub fn energy(&self, h: &dyn LinearOperator) -> f64 {
        let mut hv = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        h.apply_complex(&self.amps, &mut hv);
        cdot(&self.amps, &hv).re
    }
}

/// Per-site `⟨n_i⟩`.
pub fn occupation_profile(state: &StateVector) -> Vec<f64> {
    let sites = state.space().site_count();
    let mut out = vec![0.0; sites];
    for (b, a) in state.space().basis().iter().zip(state.amplitudes()) {
        let p = a.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let mut bits = *b;
        while bits != 0 {
            out[bits.trailing_zeros() as usize] += p;
            bits &= bits - 1;
        }
    }
    out
}

fn real_occupation_mean(space: &ConfigSpace, v: &[f64]) -> f64 {
    let total: f64 = space.basis().iter().zip(v).map(|(b, a)| b.count_ones() as f64 * a * a).sum();
    total / space.site_count() as f64
}

/// Two lowest levels of one operator.
#[derive(Debug, Clone)]
pub struct GapSolution {
    pub e0: f64,
    pub e1: f64,
    pub below_resolution: bool,
    pub vectors: Vec<Vec<f64>>,
}

impl GapSolution {
    pub fn gap(&self) -> f64 {
        self.e1 - self.e0
    }
}

pub fn solve_gap(h: &dyn LinearOperator, opts: &EigenOptions, warm: &[Vec<f64>]) -> Result<GapSolution> {
    let pairs = lowest_eigenpairs_with(h, 2, opts, warm)?;
    let (e0, e1) = (pairs[0].value, pairs[1].value);
    Ok(GapSolution {
        e0,
        e1,
        below_resolution: e1 - e0 < GAP_RESOLUTION * h.norm_bound(),
        vectors: pairs.into_iter().map(|p| p.vector).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    BelowResolution,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanPoint {
    pub delta: f64,
    pub gap: Option<f64>,
    pub ground_energy: Option<f64>,
    pub mean_occupation: Option<f64>,
    pub status: PointStatus,
}

/// Gap along a detuning grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanCurve {
    pub points: Vec<ScanPoint>,
}

impl ScanCurve {
    /// Smallest resolved gap and its detuning.
    pub fn minimum(&self) -> Option<(f64, f64)> {
        self.points.iter().filter_map(|p| p.gap.map(|g| (p.delta, g))).min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("detuning grid is empty"));
    }
    if grid.iter().any(|d| !d.is_finite()) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("detuning grid must be finite and strictly increasing"));
    }
    Ok(())
}

fn scan_family(family: &DetuningFamily, grid: &[f64], opts: &EigenOptions) -> Vec<ScanPoint> {
    let space = family.space().clone();
    let chunks: Vec<&[f64]> = grid.chunks(SCAN_CHUNK).collect();
    chunks
        .par_iter()
        .map(|chunk| {
            let mut warm: Vec<Vec<f64>> = Vec::new();
            chunk
                .iter()
                .map(|&delta| match solve_gap(&family.at(delta), opts, &warm) {
                    Ok(sol) => {
                        let occ = real_occupation_mean(&space, &sol.vectors[0]);
                        let point = ScanPoint {
                            delta,
                            gap: (!sol.below_resolution).then(|| sol.gap()),
                            ground_energy: Some(sol.e0),
                            mean_occupation: Some(occ),
                            status: if sol.below_resolution { PointStatus::BelowResolution } else { PointStatus::Ok },
                        };
                        warm = sol.vectors;
                        point
                    }
                    Err(e) => ScanPoint {
                        delta,
                        gap: None,
                        ground_energy: None,
                        mean_occupation: None,
                        status: PointStatus::Failed(e.to_string()),
                    },
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// `E1 − E0` at every detuning of `grid`; failed points are marked, not fatal.
pub fn gap_scan(spec: &ModelSpec, grid: &[f64], opts: &EigenOptions) -> Result<ScanCurve> {
    check_grid(grid)?;
    let family = spec.family()?;
    Ok(ScanCurve { points: scan_family(&family, grid, opts) })
}

/// Location and size of the minimum gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinGap {
    pub gap: f64,
    pub delta: f64,
    pub evaluations: usize,
    /// False when the bracket was not unimodal and the grid minimum is returned as is.
    pub refined: bool,
    pub below_resolution: bool,
}

struct GapEvaluator<'a> {
    family: &'a DetuningFamily,
    opts: EigenOptions,
    seen: Vec<(f64, f64, bool, Vec<Vec<f64>>)>,
}

impl GapEvaluator<'_> {
    fn eval(&mut self, delta: f64) -> Result<f64> {
        if let Some(hit) = self.seen.iter().find(|s| s.0 == delta) {
            return Ok(hit.1);
        }
        let warm = self
            .seen
            .iter()
            .min_by(|a, b| (a.0 - delta).abs().total_cmp(&(b.0 - delta).abs()))
            .map(|s| s.3.clone())
            .unwrap_or_default();
        let sol = solve_gap(&self.family.at(delta), &self.opts, &warm)?;
        let g = sol.gap();
        self.seen.push((delta, g, sol.below_resolution, sol.vectors));
        Ok(g)
    }

    fn best(&self) -> (f64, f64, bool) {
        let s = self.seen.iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("at least one evaluation");
        (s.0, s.1, s.2)
    }

    fn level(&mut self, lo: f64, hi: f64, points: usize) -> Result<Vec<(f64, f64)>> {
        (0..points)
            .map(|i| {
                let d = if i + 1 == points { hi } else { lo + (hi - lo) * i as f64 / (points - 1) as f64 };
                Ok((d, self.eval(d)?))
            })
            .collect()
    }
}

fn is_unimodal(values: &[f64]) -> bool {
    let slack = 1e-12 * values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let turn = values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
    values[..=turn].windows(2).all(|w| w[1] <= w[0] + slack) && values[turn..].windows(2).all(|w| w[1] + slack >= w[0])
}

/// Minimum of `E1 − E0` over `range`: four nested 16-point grids, each zooming onto the
/// neighbourhood of the current minimum, then golden-section refinement to relative
/// detuning tolerance `rel_tol`.
pub fn find_min_gap(spec: &ModelSpec, range: (f64, f64), rel_tol: f64, opts: &EigenOptions) -> Result<MinGap> {
    let family = spec.family()?;
    find_min_gap_family(&family, range, rel_tol, opts)
}

pub fn find_min_gap_family(
    family: &DetuningFamily,
    range: (f64, f64),
    rel_tol: f64,
    opts: &EigenOptions,
) -> Result<MinGap> {
    let (lo, hi) = range;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(format!("invalid detuning range [{lo}, {hi}]")));
    }
    if !(rel_tol > 0.0) {
        return Err(Error::invalid("rel_tol must be positive"));
    }
    const POINTS: usize = 16;
    const LEVELS: usize = 4;
    let mut ev = GapEvaluator { family, opts: *opts, seen: Vec::new() };
    let (mut a, mut b) = (lo, hi);
    let mut last = Vec::new();
    for level in 0..LEVELS {
        let pts = ev.level(a, b, POINTS)?;
        let i = pts.iter().enumerate().min_by(|x, y| x.1 .1.total_cmp(&y.1 .1)).map(|(i, _)| i).expect("nonempty");
        if level == 0 && (i == 0 || i == POINTS - 1) {
            return Err(Error::NoInteriorMinimum { lo, hi, at: pts[i].0 });
        }
        a = pts[i.saturating_sub(1)].0;
        b = pts[(i + 1).min(POINTS - 1)].0;
        last = pts;
    }
    let values: Vec<f64> = last.iter().map(|p| p.1).collect();
    if !is_unimodal(&values) {
        let (delta, gap, below) = ev.best();
        return Ok(MinGap { gap, delta, evaluations: ev.seen.len(), refined: false, below_resolution: below });
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = ev.eval(c)?;
    let mut fd = ev.eval(d)?;
    for _ in 0..200 {
        if (b - a) <= rel_tol * (0.5 * (a + b)).abs().max(1.0) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = ev.eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = ev.eval(d)?;
        }
    }
    let (delta, gap, below) = ev.best();
    Ok(MinGap { gap, delta, evaluations: ev.seen.len(), refined: true, below_resolution: below })
}

/// Mean ground-state occupation of the constrained k-chain over a (k, δ) grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseDiagram {
    pub length: usize,
    pub ks: Vec<f64>,
    pub deltas: Vec<f64>,
    /// `occupation[i][j]` at `ks[i]`, `deltas[j]`; `None` where the solve failed.
    pub occupation: Vec<Vec<Option<f64>>>,
}

pub fn phase_diagram(length: usize, ks: &[f64], deltas: &[f64], opts: &EigenOptions) -> Result<PhaseDiagram> {
    check_grid(deltas)?;
    if ks.is_empty() {
        return Err(Error::invalid("k grid is empty"));
    }
    let rows: Result<Vec<Vec<Option<f64>>>> = ks
        .par_iter()
        .map(|&k| {
            let family = ModelSpec::chain(ModelKind::KPxp, length, k).family()?;
            let space = family.space().clone();
            let mut warm: Vec<Vec<f64>> = Vec::new();
            Ok(deltas
                .iter()
                .map(|&delta| match lowest_eigenpairs_with(&family.at(delta), 1, opts, &warm) {
                    Ok(mut pairs) => {
                        let v = pairs.remove(0).vector;
                        let occ = real_occupation_mean(&space, &v);
                        warm = vec![v];
                        Some(occ)
                    }
                    Err(e) => {
                        log::warn!("phase diagram point k={k}, delta={delta} failed: {e}");
                        None
                    }
                })
                .collect())
        })
        .collect();
    Ok(PhaseDiagram { length, ks: ks.to_vec(), deltas: deltas.to_vec(), occupation: rows? })
}

/// One eigenstate and its squared overlaps with each reference state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapRecord {
    pub energy: f64,
    pub overlaps: Vec<f64>,
}

/// Full diagonalization of `h`, returning `|⟨ref|E_n⟩|²` for every eigenstate.
pub fn eigenstate_overlaps(h: &SparseOperator, refs: &[StateVector]) -> Result<Vec<OverlapRecord>> {
    let n = h.dim();
    if n > OVERLAP_DIM_CAP {
        return Err(Error::ResourceLimit {
            what: "dimension for full diagonalization".into(),
            count: n as u128,
            cap: OVERLAP_DIM_CAP as u128,
        });
    }
    for r in refs {
        if !(Arc::ptr_eq(r.space(), h.space()) || r.space().as_ref() == h.space().as_ref()) {
            return Err(Error::SpaceMismatch);
        }
    }
    let (values, vectors) = dense_spectrum(h);
    Ok(values
        .iter()
        .enumerate()
        .map(|(j, &energy)| {
            let col = vectors.column(j);
            let overlaps = refs
                .iter()
                .map(|r| {
                    r.amplitudes().iter().zip(col.iter()).map(|(a, &v)| a.conj() * v).sum::<Complex64>().norm_sqr()
                })
                .collect();
            OverlapRecord { energy, overlaps }
        })
        .collect())
}
