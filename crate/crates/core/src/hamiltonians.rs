//! Sparse Hermitian operators for every model family.

use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{self, grid_site_in_mis, UnitDiskGraph};
use crate::statespace::{build_blockaded_space, ConfigSpace, DEFAULT_SPACE_CAP};

/// Largest unconstrained space built by default.
pub const DEFAULT_FULL_CAP: usize = 1 << 24;

/// Entries smaller than this fraction of the largest magnitude are dropped.
pub const DROP_TOLERANCE: f64 = 1e-14;

const PARALLEL_MIN_ROWS: usize = 1 << 14;

pub(crate) trait Amplitude: Copy + Send + Sync {
    fn zero() -> Self;
    fn scale_add(self, a: f64, x: Self) -> Self;
}

impl Amplitude for f64 {
    fn zero() -> Self {
        0.0
    }
    fn scale_add(self, a: f64, x: Self) -> Self {
        self + a * x
    }
}

impl Amplitude for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn scale_add(self, a: f64, x: Self) -> Self {
        self + x * a
    }
}

/// Real symmetric operator acting on real or complex vectors.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn apply_complex(&self, x: &[Complex64], y: &mut [Complex64]);
    /// Upper bound on the spectral norm.
    fn norm_bound(&self) -> f64;
    /// Copy of the diagonal, used for preconditioning.
    fn diagonal_vec(&self) -> Vec<f64>;
    fn to_dense(&self) -> DMatrix<f64>;
}

/// Real symmetric matrix over a [`ConfigSpace`]: a diagonal plus off-diagonal rows
/// stored in full CSR form for fast products.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    space: Arc<ConfigSpace>,
    diag: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseOperator {
    /// Assembles from a diagonal and upper-triangle triplets (`row < col`); duplicates add.
    pub fn from_parts(space: Arc<ConfigSpace>, mut diag: Vec<f64>, mut upper: Vec<(u32, u32, f64)>) -> Result<Self> {
        let n = space.dim();
        if diag.len() != n {
            return Err(Error::invalid(format!("diagonal has {} entries, space {n}", diag.len())));
        }
        if let Some(&(r, c, _)) = upper.iter().find(|&&(r, c, _)| r >= c || c as usize >= n) {
            return Err(Error::invalid(format!("triplet ({r}, {c}) is not strictly upper")));
        }
        if diag.iter().chain(upper.iter().map(|t| &t.2)).any(|v| !v.is_finite()) {
            return Err(Error::invalid("operator entries must be finite"));
        }
        upper.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(u32, u32, f64)> = Vec::with_capacity(upper.len());
        for (r, c, v) in upper {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        let max = diag.iter().chain(merged.iter().map(|t| &t.2)).fold(0.0f64, |m, v| m.max(v.abs()));
        let cut = DROP_TOLERANCE * max;
        for d in &mut diag {
            if d.abs() < cut {
                *d = 0.0;
            }
        }
        merged.retain(|t| t.2 != 0.0 && t.2.abs() >= cut);

        let mut counts = vec![0usize; n + 1];
        for &(r, c, _) in &merged {
            counts[r as usize + 1] += 1;
            counts[c as usize + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut fill = counts;
        let mut cols = vec![0u32; merged.len() * 2];
        let mut vals = vec![0f64; merged.len() * 2];
        for &(r, c, v) in &merged {
            for (a, b) in [(r, c), (c, r)] {
                let slot = fill[a as usize];
                cols[slot] = b;
                vals[slot] = v;
                fill[a as usize] += 1;
            }
        }
        // Rows come out column-sorted: lower entries are inserted in ascending row order
        // before the upper ones of the same row, which were sorted by column.
        Ok(SparseOperator { space, diag, row_ptr, cols, vals })
    }

    pub fn space(&self) -> &Arc<ConfigSpace> {
        &self.space
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Stored entries `(row, col, value)` with `col >= row`, row-major.
    pub fn upper_entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for r in 0..self.dim() {
            if self.diag[r] != 0.0 {
                out.push((r, r, self.diag[r]));
            }
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[p] as usize;
                if c > r {
                    out.push((r, c, self.vals[p]));
                }
            }
        }
        out
    }

    /// Off-diagonal entries of row `r` as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |p| (self.cols[p] as usize, self.vals[p]))
    }

    pub fn nnz_offdiag(&self) -> usize {
        self.vals.len()
    }

    /// Entry lookup, mainly for tests.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        if r == c {
            return self.diag[r];
        }
        self.row(r).find(|&(j, _)| j == c).map_or(0.0, |(_, v)| v)
    }

    /// Same operator with `coeff * shift` added to the diagonal.
    pub fn with_diagonal_shift(&self, coeff: f64, shift: &[f64]) -> SparseOperator {
        let mut out = self.clone();
        for (d, s) in out.diag.iter_mut().zip(shift) {
            *d += coeff * s;
        }
        out
    }

    pub(crate) fn spmv<T: Amplitude>(&self, x: &[T], y: &mut [T], shift: Option<(f64, &[f64])>) {
        let row = |i: usize| {
            let mut d = self.diag[i];
            if let Some((c, s)) = shift {
                d += c * s[i];
            }
            let mut acc = T::zero().scale_add(d, x[i]);
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc = acc.scale_add(self.vals[p], x[self.cols[p] as usize]);
            }
            acc
        };
        if y.len() >= PARALLEL_MIN_ROWS {
            y.par_iter_mut().enumerate().with_min_len(4096).for_each(|(i, yi)| *yi = row(i));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = row(i);
            }
        }
    }

    fn row_abs_bound(&self, shift: Option<(f64, &[f64])>) -> f64 {
        (0..self.dim())
            .map(|i| {
                let d = self.diag[i] + shift.map_or(0.0, |(c, s)| c * s[i]);
                d.abs() + self.vals[self.row_ptr[i]..self.row_ptr[i + 1]].iter().map(|v| v.abs()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    fn dense_with(&self, shift: Option<(f64, &[f64])>) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i] + shift.map_or(0.0, |(c, s)| c * s[i]);
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

impl LinearOperator for SparseOperator {
    fn dim(&self) -> usize {
        self.diag.len()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.spmv(x, y, None)
    }
    fn apply_complex(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.spmv(x, y, None)
    }
    fn norm_bound(&self) -> f64 {
        self.row_abs_bound(None)
    }
    fn diagonal_vec(&self) -> Vec<f64> {
        self.diag.clone()
    }
    fn to_dense(&self) -> DMatrix<f64> {
        self.dense_with(None)
    }
}

/// `base - delta * occupation` without copying the base operator.
#[derive(Debug, Clone, Copy)]
pub struct Detuned<'a> {
    pub base: &'a SparseOperator,
    pub occupation: &'a [f64],
    pub delta: f64,
}

impl LinearOperator for Detuned<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.base.spmv(x, y, Some((-self.delta, self.occupation)))
    }
    fn apply_complex(&self, x: &[Complex64], y: &mut [Complex64]) {
        self.base.spmv(x, y, Some((-self.delta, self.occupation)))
    }
    fn norm_bound(&self) -> f64 {
        self.base.row_abs_bound(Some((-self.delta, self.occupation)))
    }
    fn diagonal_vec(&self) -> Vec<f64> {
        self.base.diag.iter().zip(self.occupation).map(|(d, o)| d - self.delta * o).collect()
    }
    fn to_dense(&self) -> DMatrix<f64> {
        self.base.dense_with(Some((-self.delta, self.occupation)))
    }
}

/// A model at zero detuning plus its occupation operator; `H(δ) = base - δ·N`.
#[derive(Debug, Clone)]
pub struct DetuningFamily {
    pub base: SparseOperator,
    pub occupation: Vec<f64>,
}

impl DetuningFamily {
    pub fn space(&self) -> &Arc<ConfigSpace> {
        self.base.space()
    }

    pub fn at(&self, delta: f64) -> Detuned<'_> {
        Detuned { base: &self.base, occupation: &self.occupation, delta }
    }

    pub fn operator_at(&self, delta: f64) -> SparseOperator {
        self.base.with_diagonal_shift(-delta, &self.occupation)
    }
}

/// `(1 - s) H0 + s HT` on the union sparsity pattern.
pub fn interpolate(h0: &SparseOperator, ht: &SparseOperator, s: f64) -> Result<SparseOperator> {
    if !Arc::ptr_eq(h0.space(), ht.space()) && h0.space() != ht.space() {
        return Err(Error::SpaceMismatch);
    }
    let diag = h0.diag.iter().zip(&ht.diag).map(|(a, b)| (1.0 - s) * a + s * b).collect();
    let mut upper = Vec::with_capacity(h0.nnz_offdiag() / 2 + ht.nnz_offdiag() / 2);
    for (op, w) in [(h0, 1.0 - s), (ht, s)] {
        for (r, c, v) in op.upper_entries() {
            if r != c {
                upper.push((r as u32, c as u32, w * v));
            }
        }
    }
    SparseOperator::from_parts(h0.space().clone(), diag, upper)
}

/// Generic term collection over a configuration space.
struct Terms<'a> {
    space: &'a ConfigSpace,
    rabi: Vec<f64>,
    pairs: Vec<(usize, usize, f64)>,
    hops: Vec<(usize, usize, f64)>,
}

impl Terms<'_> {
    fn assemble(self, space: Arc<ConfigSpace>, delta: f64, extra_diag: impl Fn(u64) -> f64) -> Result<SparseOperator> {
        let sp = self.space;
        let mut diag = Vec::with_capacity(sp.dim());
        let mut upper = Vec::new();
        for (i, &b) in sp.basis().iter().enumerate() {
            let mut d = -delta * b.count_ones() as f64 + extra_diag(b);
            for &(p, q, v) in &self.pairs {
                if b >> p & 1 == 1 && b >> q & 1 == 1 {
                    d += v;
                }
            }
            diag.push(d);
            for (s, &amp) in self.rabi.iter().enumerate() {
                if amp != 0.0 && b >> s & 1 == 0 {
                    if let Some(j) = sp.index_of(b | 1 << s) {
                        upper.push((i as u32, j as u32, amp));
                    }
                }
            }
            for &(p, q, v) in &self.hops {
                if (b >> p & 1) != (b >> q & 1) {
                    let flipped = b ^ (1 << p) ^ (1 << q);
                    if flipped > b {
                        if let Some(j) = sp.index_of(flipped) {
                            upper.push((i as u32, j as u32, v));
                        }
                    }
                }
            }
        }
        SparseOperator::from_parts(space, diag, upper)
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

fn check_length(l: usize) -> Result<()> {
    if l == 0 || l > 63 {
        return Err(Error::invalid(format!("chain length must be in 1..=63, got {l}")));
    }
    Ok(())
}

/// Per-site Rabi amplitudes of a chain: `Ω` on odd sites (1-based), `kΩ` on even sites.
pub fn chain_rabi(l: usize, k: f64, omega: f64) -> Vec<f64> {
    (0..l).map(|s| if s % 2 == 0 { omega } else { k * omega }).collect()
}

/// Neighbour masks of the open path.
pub fn path_masks(l: usize) -> Vec<u64> {
    (0..l)
        .map(|s| {
            let mut m = 0u64;
            if s > 0 {
                m |= 1 << (s - 1);
            }
            if s + 1 < l {
                m |= 1 << (s + 1);
            }
            m
        })
        .collect()
}

/// Independent sets of the path of length `l`.
pub fn path_space(l: usize) -> Result<Arc<ConfigSpace>> {
    check_length(l)?;
    Ok(Arc::new(ConfigSpace::independent_sets(&path_masks(l), DEFAULT_SPACE_CAP)?))
}

fn full_space(n: usize) -> Result<Arc<ConfigSpace>> {
    Ok(Arc::new(ConfigSpace::full(n, DEFAULT_FULL_CAP)?))
}

fn chain_pairs(l: usize, v: f64, tail_cutoff: usize) -> Vec<(usize, usize, f64)> {
    let range = tail_cutoff.max(1);
    let mut pairs = Vec::new();
    for i in 0..l {
        for d in 1..=range {
            if i + d < l {
                pairs.push((i, i + d, v / (d as f64).powi(6)));
            }
        }
    }
    pairs
}

/// Reduced chain on the full `2^L` space: `V` between neighbours and, for
/// `tail_cutoff >= 2`, `V/|i-j|^6` up to that many sites.
pub fn build_k_chain(l: usize, k: f64, delta: f64, omega: f64, v: f64, tail_cutoff: usize) -> Result<SparseOperator> {
    check_length(l)?;
    check_positive("V", v)?;
    let space = full_space(l)?;
    Terms { space: &space, rabi: chain_rabi(l, k, omega), pairs: chain_pairs(l, v, tail_cutoff), hops: vec![] }
        .assemble(space.clone(), delta, |_| 0.0)
}

/// Blockade-constrained chain with enhanced Rabi frequency on even sites.
pub fn build_k_pxp(l: usize, k: f64, delta: f64, omega: f64) -> Result<SparseOperator> {
    let space = path_space(l)?;
    Terms { space: &space, rabi: chain_rabi(l, k, omega), pairs: vec![], hops: vec![] }.assemble(
        space.clone(),
        delta,
        |_| 0.0,
    )
}

fn exchange_hops(l: usize, amp: f64) -> Vec<(usize, usize, f64)> {
    (0..l.saturating_sub(1)).map(|i| (i, i + 1, amp)).collect()
}

/// [`build_k_chain`] without tails plus nearest-neighbour exchange of strength `-φ`.
pub fn build_spin_exchange(l: usize, k: f64, delta: f64, omega: f64, v: f64, phi: f64) -> Result<SparseOperator> {
    check_length(l)?;
    check_positive("V", v)?;
    let space = full_space(l)?;
    Terms { space: &space, rabi: chain_rabi(l, k, omega), pairs: chain_pairs(l, v, 0), hops: exchange_hops(l, -phi) }
        .assemble(space.clone(), delta, |_| 0.0)
}

/// Diagonal correction of the Laplacian model for configuration `b` on `l` sites.
pub fn laplacian_diagonal(b: u64, l: usize, phi: f64) -> f64 {
    // Sites are 1-based here; projectors outside [1, L] are the identity.
    let n = |i: isize| -> f64 {
        if i >= 1 && i as usize <= l {
            (b >> (i - 1) & 1) as f64
        } else {
            0.0
        }
    };
    let p = |i: isize| 1.0 - n(i);
    let phi_i = |i: isize| if i % 2 == 1 { phi } else { 2.0 * phi };
    let li = l as isize;
    let mut total = 0.0;
    for i in 1..li {
        total += phi_i(i) * n(i) * p(i + 1) * p(i + 2);
    }
    for i in 2..=li {
        total += phi_i(i) * p(i - 2) * p(i - 1) * n(i);
    }
    total
}

/// Doublet chain with Laplacian-type exchange `-√2 φ` and boundary-truncated diagonal terms.
pub fn build_laplacian(l: usize, delta: f64, omega: f64, v: f64, phi: f64) -> Result<SparseOperator> {
    check_length(l)?;
    check_positive("V", v)?;
    let space = full_space(l)?;
    let k = 2f64.sqrt();
    Terms {
        space: &space,
        rabi: chain_rabi(l, k, omega),
        pairs: chain_pairs(l, v, 0),
        hops: exchange_hops(l, -k * phi),
    }
    .assemble(space.clone(), delta, |b| laplacian_diagonal(b, l, phi))
}

/// Quench operator of the constrained chain; identical to [`build_k_pxp`].
pub fn build_quench_chain(l: usize, k: f64, omega: f64, delta: f64) -> Result<SparseOperator> {
    build_k_pxp(l, k, delta, omega)
}

/// Independent sets of the m×m square grid, row-major sites.
pub fn grid_space(m: usize) -> Result<Arc<ConfigSpace>> {
    let g = graphs::square_grid(m, m)?;
    Ok(Arc::new(build_blockaded_space(&g, DEFAULT_SPACE_CAP)?))
}

/// Reduced doublet grid: `kΩ` on non-MIS sites, `Ω` on MIS sites.
pub fn build_quench_grid(m: usize, k: f64, omega: f64, delta: f64) -> Result<SparseOperator> {
    if m.is_multiple_of(2) || m == 0 {
        return Err(Error::invalid(format!("grid size must be odd, got {m}")));
    }
    let space = grid_space(m)?;
    let rabi = (0..m * m).map(|s| if grid_site_in_mis(s / m, s % m) { omega } else { k * omega }).collect();
    Terms { space: &space, rabi, pairs: vec![], hops: vec![] }.assemble(space.clone(), delta, |_| 0.0)
}

/// Pair couplings of the Euclidean model. Blockade pairs (`r < R_b`) are returned
/// separately from tail pairs (`R_b <= r <= tail_cutoff`).
fn rydberg_pairs(g: &UnitDiskGraph, v: f64, tail_cutoff: f64) -> (Vec<(usize, usize, f64)>, Vec<(usize, usize, f64)>) {
    let pos = g.positions();
    let mut blockade = Vec::new();
    let mut tails = Vec::new();
    for i in 0..pos.len() {
        for j in (i + 1)..pos.len() {
            let r = pos[i].distance(&pos[j]);
            let c = v / r.powi(6);
            if g.has_edge(i, j) {
                blockade.push((i, j, c));
            } else if r <= tail_cutoff * (1.0 + 1e-12) {
                tails.push((i, j, c));
            }
        }
    }
    (blockade, tails)
}

/// Rydberg model on a unit-disk graph. Constrained: the space is the independent sets,
/// blockade pairs are dropped and only tails are kept. Unconstrained: full space with
/// `V/r^6` on blockade pairs and tails.
pub fn build_rydberg(
    g: &UnitDiskGraph,
    delta: f64,
    omega: f64,
    v: f64,
    tail_cutoff: f64,
    constrained: bool,
) -> Result<SparseOperator> {
    check_positive("V", v)?;
    if !(tail_cutoff >= 0.0) {
        return Err(Error::invalid(format!("tail_cutoff must be nonnegative, got {tail_cutoff}")));
    }
    let n = g.vertex_count();
    let (blockade, tails) = rydberg_pairs(g, v, tail_cutoff);
    let (space, pairs) = if constrained {
        (Arc::new(build_blockaded_space(g, DEFAULT_SPACE_CAP)?), tails)
    } else {
        (full_space(n)?, blockade.into_iter().chain(tails).collect())
    };
    Terms { space: &space, rabi: vec![omega; n], pairs, hops: vec![] }.assemble(space.clone(), delta, |_| 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Rydberg,
    KChain,
    KPxp,
    SpinExchange,
    Laplacian,
    Quench,
    GridKPxp,
}

/// Inline graph or a path to a graph JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSource {
    Inline(UnitDiskGraph),
    File(PathBuf),
}

impl GraphSource {
    pub fn load(&self) -> Result<UnitDiskGraph> {
        match self {
            GraphSource::Inline(g) => Ok(g.clone()),
            GraphSource::File(p) => UnitDiskGraph::from_json(&std::fs::read_to_string(p)?),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn default_v() -> f64 {
    100.0
}
fn yes() -> bool {
    true
}

/// Declarative description of a model; `delta` is the detuning used when a single
/// operator is requested.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphSource>,
    #[serde(default = "one")]
    pub omega: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(rename = "V", default = "default_v")]
    pub v: f64,
    #[serde(default = "one")]
    pub k: f64,
    #[serde(default)]
    pub phi: f64,
    #[serde(default)]
    pub tail_cutoff: f64,
    #[serde(default = "yes")]
    pub constrained: bool,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        ModelSpec {
            kind,
            length: None,
            m: None,
            graph: None,
            omega: 1.0,
            delta: 0.0,
            v: 100.0,
            k: 1.0,
            phi: 0.0,
            tail_cutoff: 0.0,
            constrained: true,
        }
    }

    pub fn chain(kind: ModelKind, length: usize, k: f64) -> Self {
        ModelSpec { length: Some(length), k, ..Self::new(kind) }
    }

    pub fn grid(m: usize, k: f64) -> Self {
        ModelSpec { m: Some(m), k, ..Self::new(ModelKind::GridKPxp) }
    }

    pub fn rydberg(graph: UnitDiskGraph, v: f64, tail_cutoff: f64, constrained: bool) -> Self {
        ModelSpec {
            graph: Some(GraphSource::Inline(graph)),
            v,
            tail_cutoff,
            constrained,
            ..Self::new(ModelKind::Rydberg)
        }
    }

    pub fn with_v(mut self, v: f64) -> Self {
        self.v = v;
        self
    }

    pub fn with_phi(mut self, phi: f64) -> Self {
        self.phi = phi;
        self
    }

    pub fn with_tails(mut self, cutoff: f64) -> Self {
        self.tail_cutoff = cutoff;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("omega", self.omega)?;
        check_positive("k", self.k)?;
        if !self.delta.is_finite() || !self.phi.is_finite() {
            return Err(Error::invalid("delta and phi must be finite"));
        }
        if !(self.tail_cutoff >= 0.0 && self.tail_cutoff.is_finite()) {
            return Err(Error::invalid("tail_cutoff must be a nonnegative number"));
        }
        match self.kind {
            ModelKind::Rydberg => {
                if self.graph.is_none() {
                    return Err(Error::invalid("rydberg model needs a graph"));
                }
            }
            ModelKind::GridKPxp => {
                if self.m.is_none() {
                    return Err(Error::invalid("grid model needs m"));
                }
            }
            _ => {
                if self.length.is_none() {
                    return Err(Error::invalid("chain model needs L"));
                }
            }
        }
        if matches!(self.kind, ModelKind::KChain | ModelKind::Rydberg | ModelKind::SpinExchange | ModelKind::Laplacian)
        {
            check_positive("V", self.v)?;
        }
        if self.kind == ModelKind::KChain && self.tail_cutoff.fract() != 0.0 {
            return Err(Error::invalid("chain tail_cutoff counts sites and must be an integer"));
        }
        Ok(())
    }

    fn len(&self) -> usize {
        self.length.unwrap_or(0)
    }

    /// Operator at `delta = 0` and the occupation diagonal.
    pub fn family(&self) -> Result<DetuningFamily> {
        self.validate()?;
        let (o, k, v, phi) = (self.omega, self.k, self.v, self.phi);
        let base = match self.kind {
            ModelKind::Rydberg => {
                let g = self.graph.as_ref().expect("validated").load()?;
                build_rydberg(&g, 0.0, o, v, self.tail_cutoff, self.constrained)?
            }
            ModelKind::KChain => build_k_chain(self.len(), k, 0.0, o, v, self.tail_cutoff as usize)?,
            ModelKind::KPxp | ModelKind::Quench => build_k_pxp(self.len(), k, 0.0, o)?,
            ModelKind::SpinExchange => build_spin_exchange(self.len(), k, 0.0, o, v, phi)?,
            ModelKind::Laplacian => build_laplacian(self.len(), 0.0, o, v, phi)?,
            ModelKind::GridKPxp => build_quench_grid(self.m.expect("validated"), k, o, 0.0)?,
        };
        let occupation = base.space().basis().iter().map(|b| b.count_ones() as f64).collect();
        Ok(DetuningFamily { base, occupation })
    }

    /// Operator at `self.delta`.
    pub fn build(&self) -> Result<SparseOperator> {
        Ok(self.family()?.operator_at(self.delta))
    }

    pub fn site_count(&self) -> Result<usize> {
        match self.kind {
            ModelKind::Rydberg => {
                Ok(self.graph.as_ref().ok_or_else(|| Error::invalid("missing graph"))?.load()?.vertex_count())
            }
            ModelKind::GridKPxp => Ok(self.m.map(|m| m * m).ok_or_else(|| Error::invalid("missing m"))?),
            _ => self.length.ok_or_else(|| Error::invalid("missing L")),
        }
    }

    /// Occupation pattern of the optimal (MIS) configuration.
    pub fn z2_mask(&self) -> Result<u64> {
        match self.kind {
            ModelKind::Rydberg => {
                let g = self.graph.as_ref().ok_or_else(|| Error::invalid("missing graph"))?.load()?;
                let (_, sols) = graphs::mis_solve(&g, graphs::DEFAULT_SOLUTION_CAP)?;
                Ok(sols[0].iter().fold(0, |m, &v| m | 1 << v))
            }
            ModelKind::GridKPxp => {
                let m = self.m.ok_or_else(|| Error::invalid("missing m"))?;
                Ok(grid_mask(m, true))
            }
            _ => Ok(alternating_mask(self.site_count()?, 0)),
        }
    }

    /// Complementary alternating pattern (the locally favoured suboptimal state).
    pub fn z2bar_mask(&self) -> Result<u64> {
        match self.kind {
            ModelKind::Rydberg => Err(Error::invalid("the Z2-bar pattern is defined for chains and grids only")),
            ModelKind::GridKPxp => {
                let m = self.m.ok_or_else(|| Error::invalid("missing m"))?;
                Ok(grid_mask(m, false))
            }
            _ => Ok(alternating_mask(self.site_count()?, 1)),
        }
    }
}

/// Bits `start, start+2, ...` below `n`.
pub fn alternating_mask(n: usize, start: usize) -> u64 {
    (start..n).step_by(2).fold(0, |m, s| m | 1 << s)
}

fn grid_mask(m: usize, mis: bool) -> u64 {
    (0..m * m).filter(|&s| grid_site_in_mis(s / m, s % m) == mis).fold(0, |acc, s| acc | 1 << s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_rows_are_column_sorted() {
        let h = build_k_pxp(7, 1.3, 0.4, 1.0).unwrap();
        for r in 0..h.dim() {
            let cols: Vec<usize> = h.row(r).map(|(c, _)| c).collect();
            assert!(cols.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn tiny_entries_are_dropped() {
        let space = Arc::new(ConfigSpace::full(1, 4).unwrap());
        let h = SparseOperator::from_parts(space, vec![1.0, 1e-16], vec![(0, 1, 1e-15)]).unwrap();
        assert_eq!(h.diagonal()[1], 0.0);
        assert_eq!(h.nnz_offdiag(), 0);
    }

    #[test]
    fn rejects_lower_triplets() {
        let space = Arc::new(ConfigSpace::full(1, 4).unwrap());
        assert!(SparseOperator::from_parts(space, vec![0.0, 0.0], vec![(1, 0, 1.0)]).is_err());
    }

    #[test]
    fn spec_json_field_names() {
        let s: ModelSpec = serde_json::from_str(r#"{"kind":"k_chain","L":7,"k":1.5,"V":20,"tail_cutoff":5}"#).unwrap();
        assert_eq!(s.length, Some(7));
        assert_eq!(s.v, 20.0);
        assert_eq!(s.omega, 1.0);
        assert!(serde_json::from_str::<ModelSpec>(r#"{"kind":"k_chain","L":7,"bogus":1}"#).is_err());
    }
}
