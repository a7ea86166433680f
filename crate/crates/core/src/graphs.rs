//! Graph families and exact classical MIS analysis.

use std::collections::{BTreeMap, HashMap};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Default cap on the number of independent sets an exact count may report.
pub const DEFAULT_ENUMERATION_CAP: u128 = 100_000_000;

/// Default cap on the number of maximum independent sets listed by [`mis_solve`].
pub const DEFAULT_SOLUTION_CAP: u128 = 1_000_000;

const MEMO_CAP: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Result of [`unit_disk_edges`]: edges in lexicographic order plus coincident vertex pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSet {
    pub edges: Vec<(usize, usize)>,
    pub duplicates: Vec<(usize, usize)>,
}

/// All pairs `(i, j)`, `i < j`, strictly closer than `radius`.
pub fn unit_disk_edges(positions: &[Point], radius: f64) -> Result<EdgeSet> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid(format!("radius must be positive and finite, got {radius}")));
    }
    if let Some(i) = positions.iter().position(|p| !(p.x.is_finite() && p.y.is_finite())) {
        return Err(Error::invalid(format!("vertex {i} has a non-finite coordinate")));
    }
    let mut edges = Vec::new();
    let mut duplicates = Vec::new();
    for i in 0..positions.len() {
        for j in (i + 1)..positions.len() {
            let d = positions[i].distance(&positions[j]);
            if d == 0.0 {
                log::warn!("vertices {i} and {j} share coordinates");
                duplicates.push((i, j));
            }
            if d < radius {
                edges.push((i, j));
            }
        }
    }
    Ok(EdgeSet { edges, duplicates })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VertexRecord {
    id: usize,
    x: f64,
    y: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphRecord {
    vertices: Vec<VertexRecord>,
    blockade_radius: f64,
}

/// Vertices in the plane joined whenever they sit closer than the blockade radius.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GraphRecord", into = "GraphRecord")]
pub struct UnitDiskGraph {
    positions: Vec<Point>,
    blockade_radius: f64,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl UnitDiskGraph {
    pub fn new(positions: Vec<Point>, blockade_radius: f64) -> Result<Self> {
        let EdgeSet { edges, .. } = unit_disk_edges(&positions, blockade_radius)?;
        let mut neighbors = vec![Vec::new(); positions.len()];
        for &(i, j) in &edges {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for n in &mut neighbors {
            n.sort_unstable();
        }
        Ok(UnitDiskGraph { positions, blockade_radius, edges, neighbors })
    }

    pub fn vertex_count(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn blockade_radius(&self) -> f64 {
        self.blockade_radius
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    /// Closed-neighborhood bitmasks; requires at most 128 vertices.
    pub fn closed_neighborhood_masks(&self) -> Result<Vec<u128>> {
        let n = self.vertex_count();
        if n > 128 {
            return Err(Error::ResourceLimit {
                what: "vertex count for bitmask algorithms".into(),
                count: n as u128,
                cap: 128,
            });
        }
        Ok((0..n).map(|v| self.neighbors[v].iter().fold(1u128 << v, |m, &u| m | (1u128 << u))).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// SHA-256 of the canonical JSON form, hex encoded. Used as a cache key.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("graph serialization is infallible");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

impl TryFrom<GraphRecord> for UnitDiskGraph {
    type Error = Error;

    fn try_from(mut rec: GraphRecord) -> Result<Self> {
        rec.vertices.sort_by_key(|v| v.id);
        for (expect, v) in rec.vertices.iter().enumerate() {
            if v.id != expect {
                return Err(Error::invalid(format!(
                    "vertex ids must be contiguous 0..N-1; expected {expect}, found {}",
                    v.id
                )));
            }
        }
        let positions = rec.vertices.iter().map(|v| Point::new(v.x, v.y)).collect();
        UnitDiskGraph::new(positions, rec.blockade_radius)
    }
}

impl From<UnitDiskGraph> for GraphRecord {
    fn from(g: UnitDiskGraph) -> Self {
        GraphRecord {
            vertices: g.positions.iter().enumerate().map(|(id, p)| VertexRecord { id, x: p.x, y: p.y }).collect(),
            blockade_radius: g.blockade_radius,
        }
    }
}

/// Clique size of a gadget; the effective Rabi enhancement is `sqrt(q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GadgetKind(u32);

impl GadgetKind {
    pub const SINGLE: GadgetKind = GadgetKind(1);
    pub const DOUBLET: GadgetKind = GadgetKind(2);

    pub fn new(clique_size: u32) -> Result<Self> {
        match clique_size {
            1..=4 => Ok(GadgetKind(clique_size)),
            q => Err(Error::invalid(format!("unsupported gadget clique size {q}; expected 1..=4"))),
        }
    }

    pub fn clique_size(self) -> u32 {
        self.0
    }

    pub fn enhancement(self) -> f64 {
        (self.0 as f64).sqrt()
    }
}

/// Placement of chain gadgets. Gadget members are spread over a vertical segment of
/// length `doublet_gap`; `offset` is the distance from an outer member to the adjacent single.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainGeometry {
    pub doublet_gap: f64,
    pub offset: f64,
    pub blockade_radius: f64,
}

impl Default for ChainGeometry {
    fn default() -> Self {
        ChainGeometry { doublet_gap: 1.0, offset: 1.5f64.sqrt(), blockade_radius: 1.4 }
    }
}

impl ChainGeometry {
    /// Horizontal spacing between consecutive chain positions.
    pub fn horizontal_spacing(&self) -> Result<f64> {
        let half = self.doublet_gap / 2.0;
        if !(self.offset > half) {
            return Err(Error::invalid(format!("offset {} must exceed half the doublet gap {half}", self.offset)));
        }
        Ok((self.offset * self.offset - half * half).sqrt())
    }
}

fn check_odd(name: &str, value: usize, min: usize) -> Result<()> {
    if value.is_multiple_of(2) || value < min {
        return Err(Error::invalid(format!("{name} must be odd and at least {min}, got {value}")));
    }
    Ok(())
}

/// Builds a graph from grouped positions and verifies the connectivity equals
/// `groups` as cliques joined completely along `links`.
fn build_grouped(groups: &[Vec<Point>], links: &[(usize, usize)], radius: f64) -> Result<UnitDiskGraph> {
    let mut positions = Vec::new();
    let mut owner = Vec::new();
    for (gi, g) in groups.iter().enumerate() {
        for p in g {
            positions.push(*p);
            owner.push(gi);
        }
    }
    let graph = UnitDiskGraph::new(positions, radius)?;
    let mut linked = std::collections::HashSet::new();
    for &(a, b) in links {
        linked.insert((a.min(b), a.max(b)));
    }
    let intended = |i: usize, j: usize| {
        let (a, b) = (owner[i].min(owner[j]), owner[i].max(owner[j]));
        a == b || linked.contains(&(a, b))
    };
    let n = graph.vertex_count();
    let mut extra = Vec::new();
    let mut missing = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            match (graph.has_edge(i, j), intended(i, j)) {
                (true, false) => extra.push((i, j)),
                (false, true) => missing.push((i, j)),
                _ => {}
            }
        }
    }
    if !extra.is_empty() || !missing.is_empty() {
        return Err(Error::UnintendedEdges(format!(
            "radius {radius}: {} unexpected edges (first {:?}), {} missing edges (first {:?})",
            extra.len(),
            extra.first(),
            missing.len(),
            missing.first()
        )));
    }
    Ok(graph)
}

/// Chain of `length` horizontal positions with a q-clique on every even position.
pub fn build_gadget_chain(length: usize, kind: GadgetKind, geometry: &ChainGeometry) -> Result<UnitDiskGraph> {
    check_odd("L", length, 1)?;
    let h = geometry.horizontal_spacing()?;
    let q = kind.clique_size() as usize;
    let groups: Vec<Vec<Point>> = (1..=length)
        .map(|i| {
            let x = (i - 1) as f64 * h;
            if i % 2 == 1 || q == 1 {
                vec![Point::new(x, 0.0)]
            } else {
                let step = geometry.doublet_gap / (q - 1) as f64;
                (0..q).map(|j| Point::new(x, -geometry.doublet_gap / 2.0 + j as f64 * step)).collect()
            }
        })
        .collect();
    let links: Vec<_> = (1..length).map(|i| (i - 1, i)).collect();
    build_grouped(&groups, &links, geometry.blockade_radius)
}

/// Doublet chain with default geometry knobs overridable through `geometry`.
pub fn build_doublet_chain(length: usize, geometry: &ChainGeometry) -> Result<UnitDiskGraph> {
    check_odd("L", length, 3)?;
    build_gadget_chain(length, GadgetKind::DOUBLET, geometry)
}

/// Geometry of the quasi-2D doublet grid. Doublet members are split along the
/// (1,1) diagonal by `doublet_separation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub spacing: f64,
    pub doublet_separation: f64,
    pub blockade_radius: f64,
}

impl Default for GridGeometry {
    fn default() -> Self {
        GridGeometry { spacing: 1.0, doublet_separation: 0.2, blockade_radius: 1.15 }
    }
}

/// True for grid sites in the checkerboard MIS (both corners included).
pub fn grid_site_in_mis(row: usize, col: usize) -> bool {
    (row + col).is_multiple_of(2)
}

/// m×m grid whose non-MIS sites are replaced by doublets. Vertices are ordered
/// row-major over grid sites, doublet members consecutively.
pub fn build_doublet_grid(m: usize, geometry: &GridGeometry) -> Result<UnitDiskGraph> {
    check_odd("m", m, 1)?;
    let a = geometry.spacing;
    let d = geometry.doublet_separation / (2.0 * 2f64.sqrt());
    let mut groups = Vec::with_capacity(m * m);
    for r in 0..m {
        for c in 0..m {
            let (x, y) = (c as f64 * a, r as f64 * a);
            if grid_site_in_mis(r, c) {
                groups.push(vec![Point::new(x, y)]);
            } else {
                groups.push(vec![Point::new(x - d, y - d), Point::new(x + d, y + d)]);
            }
        }
    }
    build_grouped(&groups, &grid_links(m, m), geometry.blockade_radius)
}

fn grid_links(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut links = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                links.push((i, i + 1));
            }
            if r + 1 < rows {
                links.push((i, i + cols));
            }
        }
    }
    links
}

/// Path on `n` unit-spaced collinear vertices.
pub fn path_graph(n: usize) -> Result<UnitDiskGraph> {
    UnitDiskGraph::new((0..n).map(|i| Point::new(i as f64, 0.0)).collect(), 1.2)
}

/// Square-lattice graph, row-major, nearest neighbours only.
pub fn square_grid(rows: usize, cols: usize) -> Result<UnitDiskGraph> {
    let pts = (0..rows).flat_map(|r| (0..cols).map(move |c| Point::new(c as f64, r as f64))).collect();
    UnitDiskGraph::new(pts, 1.2)
}

/// Number of independent sets of each size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneracyCount {
    pub counts: BTreeMap<usize, u128>,
    pub mis_size: usize,
    pub ratio: Ratio<u128>,
}

impl DegeneracyCount {
    pub fn count(&self, size: usize) -> u128 {
        self.counts.get(&size).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u128 {
        self.counts.values().sum()
    }
}

/// Memoized independence-polynomial evaluation on vertex subsets, eliminating the
/// lowest-index vertex first.
struct Counter<'a> {
    closed: &'a [u128],
    memo: HashMap<u128, Vec<u128>>,
}

impl<'a> Counter<'a> {
    fn new(closed: &'a [u128]) -> Self {
        Counter { closed, memo: HashMap::new() }
    }

    fn poly(&mut self, set: u128) -> Result<Vec<u128>> {
        if set == 0 {
            return Ok(vec![1]);
        }
        if let Some(p) = self.memo.get(&set) {
            return Ok(p.clone());
        }
        let v = set.trailing_zeros() as usize;
        let without = self.poly(set & !(1u128 << v))?;
        let with = self.poly(set & !self.closed[v])?;
        let mut out = without;
        if out.len() < with.len() + 1 {
            out.resize(with.len() + 1, 0);
        }
        for (s, c) in with.iter().enumerate() {
            out[s + 1] += c;
        }
        if self.memo.len() >= MEMO_CAP {
            return Err(Error::ResourceLimit {
                what: "independent-set memo entries".into(),
                count: self.memo.len() as u128,
                cap: MEMO_CAP as u128,
            });
        }
        self.memo.insert(set, out.clone());
        Ok(out)
    }

    fn alpha(&mut self, set: u128) -> Result<usize> {
        Ok(self.poly(set)?.len() - 1)
    }

    fn collect_maximum(&mut self, set: u128, chosen: u128, out: &mut Vec<u128>) -> Result<()> {
        if set == 0 {
            out.push(chosen);
            return Ok(());
        }
        let target = self.alpha(set)?;
        let v = set.trailing_zeros() as usize;
        let rest = set & !self.closed[v];
        if self.alpha(rest)? + 1 == target {
            self.collect_maximum(rest, chosen | (1u128 << v), out)?;
        }
        let skip = set & !(1u128 << v);
        if self.alpha(skip)? == target {
            self.collect_maximum(skip, chosen, out)?;
        }
        Ok(())
    }
}

fn full_mask(n: usize) -> u128 {
    if n == 128 {
        u128::MAX
    } else {
        (1u128 << n) - 1
    }
}

/// Exact independent-set counts per size, optionally truncated at `max_size`.
pub fn enumerate_independent_sets(g: &UnitDiskGraph, max_size: Option<usize>, cap: u128) -> Result<DegeneracyCount> {
    let closed = g.closed_neighborhood_masks()?;
    let poly = Counter::new(&closed).poly(full_mask(g.vertex_count()))?;
    let total: u128 = poly.iter().sum();
    if total > cap {
        return Err(Error::ResourceLimit { what: "independent sets".into(), count: total, cap });
    }
    let mis_size = poly.len() - 1;
    let limit = max_size.unwrap_or(mis_size).min(mis_size);
    let counts = (0..=limit).map(|s| (s, poly[s])).collect();
    let below = if mis_size == 0 { 0 } else { poly[mis_size - 1] };
    Ok(DegeneracyCount { counts, mis_size, ratio: Ratio::new(below, poly[mis_size]) })
}

/// Size of the maximum independent set and all maximizers as sorted vertex lists.
pub fn mis_solve(g: &UnitDiskGraph, solution_cap: u128) -> Result<(usize, Vec<Vec<usize>>)> {
    let closed = g.closed_neighborhood_masks()?;
    let all = full_mask(g.vertex_count());
    let mut counter = Counter::new(&closed);
    let poly = counter.poly(all)?;
    let size = poly.len() - 1;
    let count = poly[size];
    if count > solution_cap {
        return Err(Error::ResourceLimit { what: "maximum independent sets".into(), count, cap: solution_cap });
    }
    let mut masks = Vec::new();
    counter.collect_maximum(all, 0, &mut masks)?;
    masks.sort_unstable();
    let sets = masks.into_iter().map(|m| (0..g.vertex_count()).filter(|&v| m >> v & 1 == 1).collect()).collect();
    Ok((size, sets))
}

/// `D(|MIS|-1) / D(|MIS|)`.
pub fn degeneracy_ratio(g: &UnitDiskGraph) -> Result<Ratio<u128>> {
    Ok(enumerate_independent_sets(g, None, DEFAULT_ENUMERATION_CAP)?.ratio)
}

/// Closed-form number of size-(|MIS|-1) independent sets of the doublet chain.
pub fn mis1_closed_form(length: usize) -> Result<u128> {
    check_odd("L", length, 3)?;
    if length > 250 {
        return Err(Error::invalid(format!("L={length} overflows 128-bit arithmetic")));
    }
    Ok((1u128 << ((length + 3) / 2)) - (length as u128 + 5) / 2)
}
