//! Closed-form and small-matrix analytics: mean-field crossing, second-order
//! perturbation theory on the MIS−1 manifold, dimer revival model, gap-scaling fits.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{alternating_mask, path_masks};
use crate::linalg::{linear_fit, LinearFit};
use crate::statespace::ConfigSpace;

/// Largest MIS−1 basis handled by [`perturbation_matrix`].
pub const PERTURBATION_BASIS_CAP: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanFieldResult {
    pub e_z2: f64,
    pub e_z2bar: f64,
    pub theta_odd: f64,
    pub theta_even: f64,
    pub delta_crit: Option<f64>,
}

/// Product-state energies of the two alternating patterns.
pub fn meanfield_energies(length: usize, k: f64, delta: f64, omega: f64) -> (f64, f64) {
    let l = length as f64;
    let e_z2 = -(l + 1.0) / 4.0 * (delta + (4.0 * omega * omega + delta * delta).sqrt());
    let e_z2bar = -(l - 1.0) / 4.0 * (delta + (4.0 * k * k * omega * omega + delta * delta).sqrt());
    (e_z2, e_z2bar)
}

pub fn meanfield(length: usize, k: f64, delta: f64, omega: f64) -> MeanFieldResult {
    let (e_z2, e_z2bar) = meanfield_energies(length, k, delta, omega);
    MeanFieldResult {
        e_z2,
        e_z2bar,
        theta_odd: (-2.0 * omega).atan2(delta),
        theta_even: (-2.0 * k * omega).atan2(delta),
        delta_crit: meanfield_critical_delta(length, k, omega).ok(),
    }
}

/// Detuning where the two mean-field energies cross, by bisection on
/// `[-10√L, 10√L]·Ω` to absolute tolerance `1e-10·Ω`.
pub fn meanfield_critical_delta(length: usize, k: f64, omega: f64) -> Result<f64> {
    if length.is_multiple_of(2) || length < 3 {
        return Err(Error::invalid(format!("L must be odd and at least 3, got {length}")));
    }
    if !(omega > 0.0) {
        return Err(Error::invalid("omega must be positive"));
    }
    let f = |d: f64| {
        let (a, b) = meanfield_energies(length, k, d, omega);
        a - b
    };
    let span = 10.0 * (length as f64).sqrt() * omega;
    if k <= 1.0 {
        return Err(Error::NoCrossing { lo: -span, hi: span });
    }
    // Take the largest-δ sign change on a coarse grid, then bisect inside it.
    const SAMPLES: usize = 2000;
    let at = |i: usize| -span + 2.0 * span * i as f64 / SAMPLES as f64;
    let last = (0..SAMPLES).rev().find(|&i| f(at(i)).signum() != f(at(i + 1)).signum());
    let Some(i) = last else {
        return Err(Error::NoCrossing { lo: -span, hi: span });
    };
    let (mut lo, mut hi) = (at(i), at(i + 1));
    let flo = f(lo);
    while hi - lo > 1e-10 * omega {
        let mid = 0.5 * (lo + hi);
        if f(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Second-order ground energy `−K − Kε²` in units of δ.
pub fn perturbative_ground_energy(mis_size: usize, epsilon: f64) -> f64 {
    let k = mis_size as f64;
    -k - k * epsilon * epsilon
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Disc {
    pub center: f64,
    pub radius: f64,
}

/// Effective MIS−1 coupling matrix of the k-chain with derived diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationReport {
    pub length: usize,
    pub k: f64,
    pub mis_size: usize,
    /// `Ω/δ` if a detuning was supplied.
    pub epsilon: Option<f64>,
    /// MIS−1 configurations, ascending.
    pub basis: Vec<u64>,
    /// `M` without the `−ε²` prefactor.
    pub matrix: Vec<Vec<f64>>,
    /// Diagonal of `M`, descending.
    pub sorted_diagonal: Vec<f64>,
    pub discs: Vec<Disc>,
    pub dominant_eigenvalue: f64,
    pub dominant_vector: Vec<f64>,
    pub z2bar_index: usize,
    pub epsilon_crit: Option<f64>,
    /// `L·ln ε_crit`, the predicted `ln Δ` up to a prefactor.
    pub log_gap_prediction: Option<f64>,
}

impl PerturbationReport {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

fn flip_amplitude(site: usize, k: f64) -> f64 {
    if site.is_multiple_of(2) {
        1.0
    } else {
        k
    }
}

/// `M_ij = Σ_{l∈MIS−2} a_il a_lj − Σ_{l∈MIS} a_il a_lj` over the MIS−1 configurations of
/// the chain, where `a` are single-flip amplitudes (1 on odd sites, k on even sites).
pub fn perturbation_matrix(length: usize, k: f64) -> Result<PerturbationReport> {
    if length.is_multiple_of(2) || !(3..=63).contains(&length) {
        return Err(Error::invalid(format!("L must be odd in 3..=63, got {length}")));
    }
    let mis = length.div_ceil(2);
    let masks = path_masks(length);
    let count_with = |size: usize| -> Result<Vec<u64>> {
        // Enumerate independent sets of one size without building the whole space.
        let mut out = Vec::new();
        let mut stack = vec![(0usize, 0u64, 0usize)];
        while let Some((site, mask, used)) = stack.pop() {
            if used == size {
                out.push(mask);
                if out.len() > PERTURBATION_BASIS_CAP {
                    return Err(Error::ResourceLimit {
                        what: "MIS-1 basis size".into(),
                        count: out.len() as u128,
                        cap: PERTURBATION_BASIS_CAP as u128,
                    });
                }
                continue;
            }
            if site == length || (length - site).div_ceil(2) < size - used {
                continue;
            }
            stack.push((site + 1, mask, used));
            if mask & masks[site] == 0 {
                stack.push((site + 1, mask | 1 << site, used + 1));
            }
        }
        out.sort_unstable();
        Ok(out)
    };
    let basis = count_with(mis - 1)?;
    let space = ConfigSpace::from_basis(length, basis.clone())?;
    let n = basis.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (i, &b) in basis.iter().enumerate() {
        // Down then up: through MIS−2 configurations.
        for s in (0..length).filter(|&s| b >> s & 1 == 1) {
            let mid = b & !(1 << s);
            let a1 = flip_amplitude(s, k);
            for t in (0..length).filter(|&t| mid >> t & 1 == 0 && mid & masks[t] == 0) {
                if let Some(j) = space.index_of(mid | 1 << t) {
                    m[(i, j)] += a1 * flip_amplitude(t, k);
                }
            }
        }
        // Up then down: through the MIS.
        for s in (0..length).filter(|&s| b >> s & 1 == 0 && b & masks[s] == 0) {
            let mid = b | 1 << s;
            let a1 = flip_amplitude(s, k);
            for t in (0..length).filter(|&t| mid >> t & 1 == 1) {
                if let Some(j) = space.index_of(mid & !(1 << t)) {
                    m[(i, j)] -= a1 * flip_amplitude(t, k);
                }
            }
        }
    }
    let z2bar_index = space.index_of(alternating_mask(length, 1)).expect("the even-site pattern has K−1 excitations");
    let mut sorted_diagonal: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    sorted_diagonal.sort_by(|a, b| b.total_cmp(a));
    let discs = (0..n)
        .map(|i| Disc { center: m[(i, i)], radius: (0..n).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum() })
        .collect();
    let eig = SymmetricEigen::new(m.clone());
    let top = (0..n).max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).expect("nonempty");
    let mut dominant_vector: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
    if dominant_vector.iter().sum::<f64>() < 0.0 {
        for v in &mut dominant_vector {
            *v = -*v;
        }
    }
    let epsilon_crit = perturbative_epsilon_crit(mis, k).ok();
    Ok(PerturbationReport {
        length,
        k,
        mis_size: mis,
        epsilon: None,
        basis,
        matrix: (0..n).map(|i| m.row(i).iter().copied().collect()).collect(),
        sorted_diagonal,
        discs,
        dominant_eigenvalue: eig.eigenvalues[top],
        dominant_vector,
        z2bar_index,
        epsilon_crit,
        log_gap_prediction: epsilon_crit.map(|e| length as f64 * e.ln()),
    })
}

/// Outcome of the Gershgorin separation test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GershgorinCheck {
    pub discs: Vec<Disc>,
    /// Disc with the largest center.
    pub top: Disc,
    /// Widest disc among those with the second-largest center.
    pub runner_up: Disc,
    /// `top` and `runner_up` do not intersect.
    pub top_two_disjoint: bool,
    /// `top` intersects no other disc at all.
    pub top_isolated: bool,
}

pub fn gershgorin_check(report: &PerturbationReport) -> Result<GershgorinCheck> {
    let discs = report.discs.clone();
    if discs.len() < 2 {
        return Err(Error::invalid("Gershgorin comparison needs at least two rows"));
    }
    let top_i = (0..discs.len()).max_by(|&a, &b| discs[a].center.total_cmp(&discs[b].center)).expect("nonempty");
    let top = discs[top_i];
    let scale = top.center.abs().max(1.0);
    let second = discs
        .iter()
        .enumerate()
        .filter(|&(i, d)| i != top_i && d.center < top.center - 1e-12 * scale)
        .map(|(_, d)| d.center)
        .fold(f64::NEG_INFINITY, f64::max);
    let second = if second.is_finite() { second } else { top.center };
    let runner_up = discs
        .iter()
        .enumerate()
        .filter(|&(i, d)| i != top_i && (d.center - second).abs() <= 1e-12 * scale)
        .map(|(_, d)| *d)
        .max_by(|a, b| a.radius.total_cmp(&b.radius))
        .expect("a runner-up exists");
    let separated = |d: &Disc| top.center - top.radius > d.center + d.radius;
    let top_isolated = discs.iter().enumerate().all(|(i, d)| i == top_i || separated(d));
    Ok(GershgorinCheck { top_two_disjoint: separated(&runner_up), top, runner_up, discs, top_isolated })
}

fn is_irreducible(m: &[Vec<f64>]) -> bool {
    let n = m.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && m[i][j] != 0.0 {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// `|⟨Z̄2|v⟩|²` for the dominant eigenvector `v` of `M`.
pub fn localization_overlap(report: &PerturbationReport) -> Result<f64> {
    if report.matrix.iter().flatten().any(|&x| x < -1e-12) {
        return Err(Error::invalid("matrix has negative entries"));
    }
    if !is_irreducible(&report.matrix) {
        return Err(Error::Reducible(format!("{}x{} coupling matrix", report.dim(), report.dim())));
    }
    Ok(report.dominant_vector[report.z2bar_index].powi(2))
}

/// `1/√(k²(K−1) − K)`.
pub fn perturbative_epsilon_crit(mis_size: usize, k: f64) -> Result<f64> {
    let big_k = mis_size as f64;
    let radicand = k * k * (big_k - 1.0) - big_k;
    if !(radicand > 0.0) {
        return Err(Error::invalid(format!("no perturbative crossing: k²(K−1) − K = {radicand}")));
    }
    Ok(1.0 / radicand.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingModel {
    Exponential,
    Superexponential,
}

/// Fits of `ln Δ` against `L` and against `L ln L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapScalingFit {
    pub exponential: LinearFit,
    pub superexponential: LinearFit,
    pub preferred: ScalingModel,
}

pub fn gap_scaling_fit(points: &[(usize, f64)]) -> Result<GapScalingFit> {
    if points.len() < 4 {
        return Err(Error::DegenerateFit(format!("need at least 4 points, got {}", points.len())));
    }
    if points.iter().any(|&(l, g)| !(g > 0.0 && g.is_finite()) || l < 2) {
        return Err(Error::DegenerateFit("gaps must be positive and L at least 2".into()));
    }
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let xl: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let xll: Vec<f64> = xl.iter().map(|l| l * l.ln()).collect();
    let fit = |x: &[f64]| linear_fit(x, &y).ok_or_else(|| Error::DegenerateFit("all L values coincide".into()));
    let exponential = fit(&xl)?;
    let superexponential = fit(&xll)?;
    let preferred = if superexponential.r_squared >= exponential.r_squared {
        ScalingModel::Superexponential
    } else {
        ScalingModel::Exponential
    };
    Ok(GapScalingFit { exponential, superexponential, preferred })
}

/// Amplitudes on `(|gg⟩, |gr⟩, |rg⟩)` of a dimer started in `|gr⟩`, where the excited
/// site of `|gr⟩` has Rabi frequency `kΩ` and the other `Ω`.
pub fn dimer_amplitudes(t: f64, k: f64, omega: f64) -> [Complex64; 3] {
    let s = (1.0 + k * k).sqrt();
    let w = s * omega * t;
    let (sin, cos) = w.sin_cos();
    [
        Complex64::new(0.0, -k * sin / s),
        Complex64::new((1.0 + k * k * cos) / (1.0 + k * k), 0.0),
        Complex64::new(k * (cos - 1.0) / (1.0 + k * k), 0.0),
    ]
}

/// First time the dimer transfers to `|rg⟩`: `(2/√(1+k²))·π/(2Ω)`.
pub fn dimer_revival_time(k: f64, omega: f64) -> Result<f64> {
    if !(k >= 1.0 && omega > 0.0) {
        return Err(Error::invalid(format!("need k >= 1 and omega > 0, got k={k}, omega={omega}")));
    }
    Ok(2.0 / (1.0 + k * k).sqrt() * std::f64::consts::PI / (2.0 * omega))
}

/// Per-dimer transfer fidelity `4k²/(1+k²)²` at the revival time.
pub fn dimer_transfer_fidelity(k: f64) -> f64 {
    4.0 * k * k / (1.0 + k * k).powi(2)
}

/// Everything the theory module can say about one chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryReport {
    pub perturbation: PerturbationReport,
    pub gershgorin: GershgorinCheck,
    pub localization_overlap: Option<f64>,
    pub meanfield_delta_crit: Option<f64>,
    pub meanfield_at_crit: Option<MeanFieldResult>,
    pub dimer_revival_time: f64,
    pub dimer_transfer_fidelity: f64,
}

pub fn theory_report(length: usize, k: f64, omega: f64) -> Result<TheoryReport> {
    let perturbation = perturbation_matrix(length, k)?;
    let gershgorin = gershgorin_check(&perturbation)?;
    let localization_overlap = localization_overlap(&perturbation).ok();
    let meanfield_delta_crit = meanfield_critical_delta(length, k, omega).ok();
    Ok(TheoryReport {
        localization_overlap,
        meanfield_at_crit: meanfield_delta_crit.map(|d| meanfield(length, k, d, omega)),
        meanfield_delta_crit,
        dimer_revival_time: dimer_revival_time(k.max(1.0), omega)?,
        dimer_transfer_fidelity: dimer_transfer_fidelity(k),
        gershgorin,
        perturbation,
    })
}
