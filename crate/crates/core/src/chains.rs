//! Cubical 1-chains on the lattice torus over Z and Z2.

use crate::charge::ChargeChain;
use crate::grid::TorusGrid;
use crate::invariants::SliceProfile;
use crate::{Error, Result, Ring};
use std::collections::{BTreeMap, BTreeSet};

/// 0-chain: vertex multi-index to coefficient (zeros omitted).
pub type ZeroChain = BTreeMap<Vec<usize>, i64>;

/// Finite 1-chain, each edge stored in the positive axis direction.
#[derive(Debug, Clone, PartialEq)]
pub struct OneChain {
    pub ring: Ring,
    pub grid: TorusGrid,
    edges: BTreeMap<(Vec<usize>, usize), i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ChainRecord {
    pub vertex: Vec<usize>,
    pub axis: usize,
    pub coefficient: i64,
}

/// Serialized layout of a chain.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChainJson {
    pub ring: Ring,
    pub sizes: Vec<usize>,
    pub edges: Vec<ChainRecord>,
}

impl OneChain {
    pub fn new(grid: &TorusGrid, ring: Ring) -> Self {
        OneChain { ring, grid: grid.clone(), edges: BTreeMap::new() }
    }

    /// Adds `c` times the edge `v -> v + e_axis`.
    pub fn add_edge(&mut self, v: &[usize], axis: usize, c: i64) {
        let key = (self.grid.wrap_index(&v.iter().map(|&x| x as i64).collect::<Vec<_>>()), axis);
        let e = self.edges.entry(key.clone()).or_insert(0);
        *e = self.ring.reduce(*e + c);
        if *e == 0 {
            self.edges.remove(&key);
        }
    }

    /// Adds `c` times the edge `v -> v - e_axis`, stored as `-c` on the
    /// positive edge ending at `v`.
    pub fn add_step(&mut self, v: &[usize], axis: usize, forward: bool, c: i64) {
        if forward {
            self.add_edge(v, axis, c);
        } else {
            let w = self.grid.neighbor(v, axis, -1);
            self.add_edge(&w, axis, -c);
        }
    }

    pub fn coefficient(&self, v: &[usize], axis: usize) -> i64 {
        self.edges.get(&(v.to_vec(), axis)).copied().unwrap_or(0)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&[usize], usize, i64)> {
        self.edges.iter().map(|((v, a), &c)| (v.as_slice(), *a, c))
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn plus(&self, other: &OneChain) -> OneChain {
        let mut out = self.clone();
        for (v, a, c) in other.edges() {
            out.add_edge(v, a, c);
        }
        out
    }

    pub fn scaled(&self, s: i64) -> OneChain {
        let mut out = OneChain::new(&self.grid, self.ring);
        for (v, a, c) in self.edges() {
            out.add_edge(v, a, s * c);
        }
        out
    }

    pub fn minus(&self, other: &OneChain) -> OneChain {
        self.plus(&other.scaled(-1))
    }

    /// `c` copies of the generator loop along `axis` through `base`.
    pub fn generator_loop(grid: &TorusGrid, ring: Ring, base: &[usize], axis: usize, c: i64) -> OneChain {
        let mut out = OneChain::new(grid, ring);
        let mut v = base.to_vec();
        for _ in 0..grid.sizes()[axis] {
            out.add_edge(&v, axis, c);
            v = grid.neighbor(&v, axis, 1);
        }
        out
    }

    pub fn to_json(&self) -> ChainJson {
        ChainJson {
            ring: self.ring,
            sizes: self.grid.sizes().to_vec(),
            edges: self.edges().map(|(v, axis, coefficient)| ChainRecord { vertex: v.to_vec(), axis, coefficient }).collect(),
        }
    }

    pub fn from_json(j: &ChainJson) -> Result<OneChain> {
        let grid = TorusGrid::with_dims(j.sizes.len(), &j.sizes)?;
        let mut out = OneChain::new(&grid, j.ring);
        for r in &j.edges {
            if r.axis >= grid.dim() || r.vertex.len() != grid.dim() || r.vertex.iter().zip(&j.sizes).any(|(v, n)| v >= n) {
                return Err(Error::InvalidArgument("chain record outside the grid".into()));
            }
            out.add_edge(&r.vertex, r.axis, r.coefficient);
        }
        Ok(out)
    }
}

/// `d(v -> v + e_i) = (v + e_i) - (v)`.
pub fn boundary(chain: &OneChain) -> ZeroChain {
    let mut out = ZeroChain::new();
    let mut bump = |v: Vec<usize>, c: i64| {
        let e = out.entry(v.clone()).or_insert(0);
        *e = chain.ring.reduce(*e + c);
        if *e == 0 {
            out.remove(&v);
        }
    };
    for (v, a, c) in chain.edges() {
        bump(chain.grid.neighbor(v, a, 1), c);
        bump(v.to_vec(), -c);
    }
    out
}

/// Class in `H_1(T^d)` (Z^d) or `H_1(T^d; Z2)`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct HomologyClass {
    pub ring: Ring,
    pub winding: Vec<i64>,
}

impl HomologyClass {
    pub fn is_zero(&self) -> bool {
        self.winding.iter().all(|&w| w == 0)
    }
}

pub fn winding_class(cycle: &OneChain) -> Result<HomologyClass> {
    if !boundary(cycle).is_empty() {
        return Err(Error::NotACycle);
    }
    let d = cycle.grid.dim();
    let mut winding = vec![0i64; d];
    match cycle.ring {
        Ring::Z => {
            let mut sums = vec![0i64; d];
            for (_, a, c) in cycle.edges() {
                sums[a] += c;
            }
            for a in 0..d {
                let n = cycle.grid.sizes()[a] as i64;
                if sums[a] % n != 0 {
                    return Err(Error::NonIntegralWinding(a));
                }
                winding[a] = sums[a] / n;
            }
        }
        Ring::Z2 => {
            // crossings of the layer between n_a - 1 and 0
            for (v, a, c) in cycle.edges() {
                if v[a] == cycle.grid.sizes()[a] - 1 {
                    winding[a] = (winding[a] + c).rem_euclid(2);
                }
            }
        }
    }
    Ok(HomologyClass { ring: cycle.ring, winding })
}

/// Signed number of `direction` edges crossing the hyperplane
/// `k_direction = coordinate`.
pub fn intersection_number(chain: &OneChain, direction: usize, coordinate: f64) -> Result<i64> {
    let g = &chain.grid;
    let c = g.layer_coordinate(direction, coordinate);
    let n = g.sizes()[direction];
    let nearest = c.round();
    if (c - nearest).abs() < 1e-9 {
        let layer = (nearest as usize) % n;
        let touches = chain.edges().any(|(v, a, _)| v[direction] == layer || (a == direction && (v[a] + 1) % n == layer));
        if touches {
            return Err(Error::SliceThroughVertex { axis: direction, coordinate });
        }
        return Ok(0);
    }
    let below = c.floor() as usize % n;
    let sum: i64 = chain.edges().filter(|(v, a, _)| *a == direction && v[direction] == below).map(|(_, _, c)| c).sum();
    Ok(chain.ring.reduce(sum))
}

/// Verdict of a chain comparison.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Equivalence {
    pub equivalent: bool,
    /// Class of `l1 - l2`.
    pub class: HomologyClass,
}

pub fn chains_equivalent(l1: &OneChain, l2: &OneChain) -> Result<Equivalence> {
    if l1.ring != l2.ring || l1.grid != l2.grid || boundary(l1) != boundary(l2) {
        return Err(Error::BoundaryMismatch);
    }
    let class = winding_class(&l1.minus(l2))?;
    Ok(Equivalence { equivalent: class.is_zero(), class })
}

/// Reduction of an integer chain mod 2.
pub fn to_kervaire(chain: &OneChain) -> OneChain {
    let mut out = OneChain::new(&chain.grid, Ring::Z2);
    for (v, a, c) in chain.edges() {
        out.add_edge(v, a, c);
    }
    out
}

/// Toroidal lattice path from `from` to `to`: axes in increasing order, each
/// along the shorter way round (the positive way on ties).
pub fn monotone_path(grid: &TorusGrid, ring: Ring, from: &[usize], to: &[usize]) -> OneChain {
    let mut out = OneChain::new(grid, ring);
    let mut v = from.to_vec();
    for a in 0..grid.dim() {
        let n = grid.sizes()[a] as i64;
        let fwd = (to[a] as i64 - v[a] as i64).rem_euclid(n);
        let (steps, forward) = if fwd <= n - fwd { (fwd, true) } else { (n - fwd, false) };
        for _ in 0..steps {
            out.add_step(&v, a, forward, 1);
            v = grid.neighbor(&v, a, if forward { 1 } else { -1 });
        }
    }
    out
}

fn lattice_distance(grid: &TorusGrid, a: &[usize], b: &[usize]) -> i64 {
    (0..grid.dim())
        .map(|i| {
            let n = grid.sizes()[i] as i64;
            let f = (b[i] as i64 - a[i] as i64).rem_euclid(n);
            f.min(n - f)
        })
        .sum()
}

fn nearest(grid: &TorusGrid, candidates: &[Vec<usize>], to: &[usize]) -> Option<usize> {
    candidates
        .iter()
        .enumerate()
        .min_by_key(|(_, m)| (lattice_distance(grid, m, to), (*m).clone()))
        .map(|(i, _)| i)
}

/// Boundary of the unit square spanned by `e_a, e_b` at `v`, oriented `a`
/// then `b`.
pub fn face_boundary(grid: &TorusGrid, ring: Ring, v: &[usize], a: usize, b: usize) -> OneChain {
    let mut out = OneChain::new(grid, ring);
    out.add_edge(v, a, 1);
    out.add_edge(&grid.neighbor(v, a, 1), b, 1);
    out.add_edge(&grid.neighbor(v, b, 1), a, -1);
    out.add_edge(v, b, -1);
    out
}

/// Snapped charge 0-chain on the grid (coincident snaps summed).
pub fn snap_charges(charges: &ChargeChain, grid: &TorusGrid) -> ZeroChain {
    let mut out = ZeroChain::new();
    for e in &charges.entries {
        let v = grid.snap(&e.position);
        let c = out.entry(v.clone()).or_insert(0);
        *c = charges.ring.reduce(*c + e.charge);
        if *c == 0 {
            out.remove(&v);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Certificate {
    pub boundary_matches: bool,
    pub profiles_match: bool,
    pub checked_samples: usize,
    /// Profile samples whose interval collapses after snapping to the grid.
    pub skipped_samples: usize,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.boundary_matches && self.profiles_match
    }
}

#[derive(Debug, Clone)]
pub struct EulerChain {
    pub chain: OneChain,
    /// Generator loops added per axis.
    pub added_windings: Vec<i64>,
    pub basepoint: Vec<usize>,
    /// (tail, head) snapped vertices of each paired unit charge.
    pub pairs: Vec<(Vec<usize>, Vec<usize>)>,
    pub certificate: Certificate,
}

/// A chain-side coordinate per profile sample: halfway between the snapped
/// layers of the node coordinates bounding the sample's interval, or `None`
/// if that snapped interval is empty.
pub fn chain_coordinates(profile: &SliceProfile, grid: &TorusGrid) -> Vec<Option<f64>> {
    let a = profile.direction;
    let n = grid.sizes()[a];
    let layers: Vec<usize> =
        profile.node_coordinates.iter().map(|&c| (grid.layer_coordinate(a, c).round() as usize) % n).collect();
    let r = layers.len();
    profile
        .samples
        .iter()
        .map(|s| match s.interval {
            None => Some(s.coordinate),
            Some(j) => {
                if r >= 2 && layers[j] == layers[(j + 1) % r] {
                    None
                } else {
                    Some(grid.angle(a, layers[j] as i64) + 0.5 * grid.step(a))
                }
            }
        })
        .collect()
}

/// Builds a 1-chain with boundary equal to the snapped charges whose
/// intersection numbers reproduce the measured slice profiles.
///
/// Slice invariants jump by `+q` crossing a node upward while intersection
/// numbers of a chain ending there jump by `-q`, so the certificate requires
/// `intersection = -profile` on every certified sample. Directions without a
/// profile get no generator loops. `avoid` lists additional points (e.g.
/// zero-charge nodes) the loop basepoint must keep away from.
pub fn reconstruct_euler_chain(
    charges: &ChargeChain,
    profiles: &[SliceProfile],
    grid: &TorusGrid,
    avoid: &[Vec<f64>],
) -> Result<EulerChain> {
    let ring = charges.ring;
    let total = charges.total();
    if total != 0 {
        return Err(Error::ChargesUnbalanced(total));
    }
    let d = grid.dim();
    let snapped = snap_charges(charges, grid);
    let mut chain = OneChain::new(grid, ring);
    let mut pairs = Vec::new();
    match ring {
        Ring::Z => {
            let mut plus: Vec<Vec<usize>> = Vec::new();
            let mut remaining: Vec<Vec<usize>> = Vec::new();
            for (v, &q) in &snapped {
                let list = if q > 0 { &mut plus } else { &mut remaining };
                for _ in 0..q.abs() {
                    list.push(v.clone());
                }
            }
            for p in &plus {
                let best = nearest(grid, &remaining, p).ok_or(Error::ChargesUnbalanced(total))?;
                let m = remaining.remove(best);
                chain = chain.plus(&monotone_path(grid, ring, &m, p));
                pairs.push((m, p.clone()));
            }
        }
        Ring::Z2 => {
            let mut units: Vec<Vec<usize>> = snapped.keys().cloned().collect();
            while !units.is_empty() {
                let m = units.remove(0);
                let best = nearest(grid, &units, &m).ok_or(Error::ChargesUnbalanced(1))?;
                let p = units.remove(best);
                chain = chain.plus(&monotone_path(grid, ring, &m, &p));
                pairs.push((m, p));
            }
        }
    }

    let mut blocked: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut centers: Vec<Vec<usize>> = snapped.keys().cloned().collect();
    centers.extend(charges.entries.iter().map(|e| grid.snap(&e.position)));
    centers.extend(avoid.iter().map(|p| grid.snap(p)));
    for c in &centers {
        for off in 0..3usize.pow(d as u32) {
            let idx: Vec<i64> = (0..d).map(|a| c[a] as i64 + ((off / 3usize.pow(a as u32)) % 3) as i64 - 1).collect();
            blocked.insert(grid.wrap_index(&idx));
        }
    }
    let basepoint = grid
        .vertices()
        .find(|v| !blocked.contains(v))
        .or_else(|| grid.vertices().find(|v| !centers.contains(v)))
        .unwrap_or_else(|| vec![0; d]);

    let mut added = vec![0i64; d];
    let mut checked = 0;
    let mut skipped = 0;
    for prof in profiles {
        let a = prof.direction;
        let coords = chain_coordinates(prof, grid);
        let mut k: Option<i64> = None;
        let mut usable = 0;
        for (s, c) in prof.samples.iter().zip(&coords) {
            let Some(c) = *c else { continue };
            usable += 1;
            let here = ring.reduce(-s.value - intersection_number(&chain, a, c)?);
            match k {
                None => k = Some(here),
                Some(prev) if prev != here => return Err(Error::InconsistentProfiles(a)),
                _ => {}
            }
        }
        if usable == 0 && !prof.samples.is_empty() {
            return Err(Error::NotIsolated(format!("node coordinates along axis {a} collapse onto one grid layer")));
        }
        let k = k.unwrap_or(0);
        added[a] = k;
        if k != 0 {
            chain = chain.plus(&OneChain::generator_loop(grid, ring, &basepoint, a, k));
        }
    }

    let boundary_matches = boundary(&chain) == snapped;
    let mut profiles_match = true;
    for prof in profiles {
        for (s, c) in prof.samples.iter().zip(chain_coordinates(prof, grid)) {
            match c {
                None => skipped += 1,
                Some(c) => {
                    checked += 1;
                    if ring.reduce(intersection_number(&chain, prof.direction, c)?) != ring.reduce(-s.value) {
                        profiles_match = false;
                    }
                }
            }
        }
    }
    Ok(EulerChain {
        chain,
        added_windings: added,
        basepoint,
        pairs,
        certificate: Certificate { boundary_matches, profiles_match, checked_samples: checked, skipped_samples: skipped },
    })
}
