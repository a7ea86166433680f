//! Blockade-constrained configuration spaces and the gadget → enhanced-Rabi reduction.

use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graphs::UnitDiskGraph;

/// Spaces with fewer states than this use a hash-map reverse index.
pub const HASH_INDEX_THRESHOLD: usize = 1 << 20;

/// Default cap on constrained-space dimension.
pub const DEFAULT_SPACE_CAP: usize = 100_000_000;

#[derive(Debug, Clone)]
enum Lookup {
    Full,
    Hash(HashMap<u64, u32>),
    Sorted,
}

/// Ordered basis of occupation bitmasks (bit i set ⇔ site i excited).
#[derive(Debug, Clone)]
pub struct ConfigSpace {
    site_count: usize,
    basis: Vec<u64>,
    lookup: Lookup,
}

impl PartialEq for ConfigSpace {
    fn eq(&self, other: &Self) -> bool {
        self.site_count == other.site_count && self.basis == other.basis
    }
}

impl ConfigSpace {
    /// Unconstrained space of all `2^n` configurations.
    pub fn full(site_count: usize, cap: usize) -> Result<Self> {
        if site_count >= 40 || (1usize << site_count) > cap {
            return Err(Error::ResourceLimit {
                what: "unconstrained dimension".into(),
                count: 1u128 << site_count.min(127),
                cap: cap as u128,
            });
        }
        Ok(ConfigSpace { site_count, basis: (0..1u64 << site_count).collect(), lookup: Lookup::Full })
    }

    /// All independent sets of the graph given by per-site neighbour masks.
    pub fn independent_sets(neighbor_masks: &[u64], cap: usize) -> Result<Self> {
        let n = neighbor_masks.len();
        if n > 64 {
            return Err(Error::ResourceLimit {
                what: "site count for 64-bit configurations".into(),
                count: n as u128,
                cap: 64,
            });
        }
        // Deciding the highest site first, excluded before included, yields ascending order.
        let mut basis = Vec::new();
        let mut stack = vec![(n, 0u64)];
        while let Some((next, mask)) = stack.pop() {
            if next == 0 {
                if basis.len() == cap {
                    return Err(Error::ResourceLimit {
                        what: "constrained dimension".into(),
                        count: cap as u128 + 1,
                        cap: cap as u128,
                    });
                }
                basis.push(mask);
                continue;
            }
            let v = next - 1;
            if mask & neighbor_masks[v] == 0 {
                stack.push((v, mask | (1u64 << v)));
            }
            stack.push((v, mask));
        }
        Ok(Self::with_index(n, basis))
    }

    /// Wraps a basis that must be strictly ascending.
    pub fn from_basis(site_count: usize, basis: Vec<u64>) -> Result<Self> {
        Self::from_basis_with_threshold(site_count, basis, HASH_INDEX_THRESHOLD)
    }

    /// As [`from_basis`](Self::from_basis) with an explicit hash-index threshold.
    pub fn from_basis_with_threshold(site_count: usize, basis: Vec<u64>, hash_threshold: usize) -> Result<Self> {
        if site_count > 64 {
            return Err(Error::invalid(format!("{site_count} sites exceed 64-bit masks")));
        }
        if basis.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("basis must be strictly ascending"));
        }
        if site_count < 64 && basis.last().is_some_and(|&b| b >> site_count != 0) {
            return Err(Error::invalid("basis state uses bits beyond site_count"));
        }
        let lookup = if basis.len() < hash_threshold {
            Lookup::Hash(basis.iter().enumerate().map(|(i, &b)| (b, i as u32)).collect())
        } else {
            Lookup::Sorted
        };
        Ok(ConfigSpace { site_count, basis, lookup })
    }

    fn with_index(site_count: usize, basis: Vec<u64>) -> Self {
        Self::from_basis(site_count, basis).expect("enumeration yields a valid ascending basis")
    }

    pub fn site_count(&self) -> usize {
        self.site_count
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[u64] {
        &self.basis
    }

    pub fn state(&self, i: usize) -> u64 {
        self.basis[i]
    }

    pub fn is_full(&self) -> bool {
        matches!(self.lookup, Lookup::Full)
    }

    pub fn uses_hash_index(&self) -> bool {
        matches!(self.lookup, Lookup::Hash(_))
    }

    pub fn index_of(&self, mask: u64) -> Option<usize> {
        match &self.lookup {
            Lookup::Full => ((mask as usize) < self.basis.len()).then_some(mask as usize),
            Lookup::Hash(map) => map.get(&mask).map(|&i| i as usize),
            Lookup::Sorted => self.basis.binary_search(&mask).ok(),
        }
    }

    pub fn contains(&self, mask: u64) -> bool {
        self.index_of(mask).is_some()
    }

    /// Writes the basis as little-endian 64-bit words.
    pub fn write_basis<W: Write>(&self, mut w: W) -> Result<()> {
        for b in &self.basis {
            w.write_all(&b.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_basis<R: Read>(mut r: R, site_count: usize) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() % 8 != 0 {
            return Err(Error::invalid("basis dump length is not a multiple of 8 bytes"));
        }
        let basis = bytes.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
        Self::from_basis(site_count, basis)
    }
}

fn neighbor_masks(g: &UnitDiskGraph) -> Result<Vec<u64>> {
    let n = g.vertex_count();
    if n > 64 {
        return Err(Error::ResourceLimit {
            what: "site count for 64-bit configurations".into(),
            count: n as u128,
            cap: 64,
        });
    }
    Ok((0..n).map(|v| g.neighbors(v).iter().fold(0u64, |m, &u| m | 1 << u)).collect())
}

/// Space of independent sets of `g`.
pub fn build_blockaded_space(g: &UnitDiskGraph, cap: usize) -> Result<ConfigSpace> {
    ConfigSpace::independent_sets(&neighbor_masks(g)?, cap)
}

/// Cache file for the blockaded space of `g` under `dir`.
pub fn basis_cache_path(dir: &Path, g: &UnitDiskGraph) -> PathBuf {
    dir.join(format!("basis-{}.bin", g.content_hash()))
}

/// Loads the blockaded space from `dir` if present, otherwise builds and stores it.
pub fn cached_blockaded_space(g: &UnitDiskGraph, dir: &Path, cap: usize) -> Result<ConfigSpace> {
    let path = basis_cache_path(dir, g);
    if let Ok(f) = fs::File::open(&path) {
        let space = ConfigSpace::read_basis(std::io::BufReader::new(f), g.vertex_count())?;
        if space.dim() <= cap {
            return Ok(space);
        }
    }
    let space = build_blockaded_space(g, cap)?;
    fs::create_dir_all(dir)?;
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut w = std::io::BufWriter::new(fs::File::create(&tmp)?);
        space.write_basis(&mut w)?;
        w.flush()?;
    }
    fs::rename(&tmp, &path)?;
    Ok(space)
}

pub fn hamming_distance(a: u64, b: u64) -> u32 {
    (a ^ b).count_ones()
}

/// One site of a reduced model: a clique of true twins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedSite {
    pub members: Vec<usize>,
    pub enhancement: f64,
}

/// Quotient of a graph by its gadget cliques.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedGraph {
    pub sites: Vec<ReducedSite>,
    pub neighbors: Vec<Vec<usize>>,
}

/// Reduced model that forms a path; sites are listed along the chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedChain {
    pub sites: Vec<ReducedSite>,
}

impl ReducedChain {
    pub fn length(&self) -> usize {
        self.sites.len()
    }

    pub fn enhancement(&self) -> Vec<f64> {
        self.sites.iter().map(|s| s.enhancement).collect()
    }
}

impl ReducedGraph {
    /// Per-site total occupation of each clique.
    pub fn reduce_profile(&self, full: &[f64]) -> Vec<f64> {
        self.sites.iter().map(|s| s.members.iter().map(|&v| full[v]).sum()).collect()
    }

    /// Reduced configuration of a full configuration (a site is excited when any member is).
    pub fn reduce_config(&self, full: u64) -> u64 {
        self.sites
            .iter()
            .enumerate()
            .filter(|(_, s)| s.members.iter().any(|&v| full >> v & 1 == 1))
            .fold(0, |m, (i, _)| m | 1 << i)
    }

    /// Orders the sites along a path, starting from the end holding the lowest vertex id.
    pub fn to_chain(&self) -> Result<ReducedChain> {
        let n = self.sites.len();
        let degrees: Vec<usize> = self.neighbors.iter().map(Vec::len).collect();
        let ends: Vec<usize> = (0..n).filter(|&i| degrees[i] <= 1).collect();
        let edge_count: usize = degrees.iter().sum::<usize>() / 2;
        let is_path = n > 0 && edge_count + 1 == n && degrees.iter().all(|&d| d <= 2) && (n == 1 || ends.len() == 2);
        if !is_path {
            return Err(Error::UnrecognizedStructure(format!(
                "reduced graph with {n} sites and {edge_count} links is not a path"
            )));
        }
        let start = *ends.iter().min_by_key(|&&i| self.sites[i].members[0]).expect("path has ends");
        let mut order = vec![start];
        let mut prev = usize::MAX;
        let mut cur = start;
        while order.len() < n {
            let next = *self.neighbors[cur]
                .iter()
                .find(|&&x| x != prev)
                .ok_or_else(|| Error::UnrecognizedStructure("reduced graph is disconnected".into()))?;
            prev = cur;
            cur = next;
            order.push(cur);
        }
        Ok(ReducedChain { sites: order.into_iter().map(|i| self.sites[i].clone()).collect() })
    }
}

/// Collapses every class of true twins (vertices with identical closed neighbourhoods)
/// into one site with enhancement `sqrt(class size)`. Sites are ordered by lowest member.
pub fn reduce_gadgets(g: &UnitDiskGraph) -> Result<ReducedGraph> {
    let n = g.vertex_count();
    let mut class_of = vec![usize::MAX; n];
    let mut by_nbhd: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut sites: Vec<ReducedSite> = Vec::new();
    for v in 0..n {
        let mut closed = g.neighbors(v).to_vec();
        closed.push(v);
        closed.sort_unstable();
        let id = *by_nbhd.entry(closed).or_insert_with(|| {
            sites.push(ReducedSite { members: Vec::new(), enhancement: 1.0 });
            sites.len() - 1
        });
        sites[id].members.push(v);
        class_of[v] = id;
    }
    for s in &mut sites {
        s.enhancement = (s.members.len() as f64).sqrt();
    }
    let mut neighbors = vec![Vec::new(); sites.len()];
    for &(a, b) in g.edges() {
        let (ca, cb) = (class_of[a], class_of[b]);
        if ca != cb && !neighbors[ca].contains(&cb) {
            neighbors[ca].push(cb);
            neighbors[cb].push(ca);
        }
    }
    for nb in &mut neighbors {
        nb.sort_unstable();
    }
    Ok(ReducedGraph { sites, neighbors })
}

/// Reduces a gadget chain to its enhanced-Rabi chain.
pub fn reduce_doublets(g: &UnitDiskGraph) -> Result<ReducedChain> {
    reduce_gadgets(g)?.to_chain()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming_distance(0b101, 0b010), 3);
        assert_eq!(hamming_distance(7, 7), 0);
    }

    #[test]
    fn full_space_lookup() {
        let s = ConfigSpace::full(4, 1 << 24).unwrap();
        assert_eq!(s.dim(), 16);
        assert_eq!(s.index_of(9), Some(9));
        assert_eq!(s.index_of(16), None);
    }

    #[test]
    fn rejects_unsorted_basis() {
        assert!(ConfigSpace::from_basis(3, vec![0, 2, 1]).is_err());
        assert!(ConfigSpace::from_basis(2, vec![0, 4]).is_err());
    }

    #[test]
    fn dimension_cap_is_enforced() {
        let masks = vec![0u64; 10];
        assert!(matches!(ConfigSpace::independent_sets(&masks, 1000), Err(Error::ResourceLimit { .. })));
    }
}
