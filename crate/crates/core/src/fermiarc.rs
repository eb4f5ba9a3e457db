//! Projection of bulk chains to the surface torus and Fermi-arc
//! connectivity.

use crate::chains::{boundary, winding_class, OneChain, ZeroChain};
use crate::{Error, Result, Ring};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub struct FermiArc {
    pub ring: Ring,
    /// Bulk axis removed by the projection.
    pub source_direction: usize,
    pub chain: OneChain,
    pub projected_charges: ZeroChain,
}

impl FermiArc {
    pub fn surface_dimension(&self) -> usize {
        self.chain.grid.dim()
    }
}

fn drop(v: &[usize], axis: usize) -> Vec<usize> {
    v.iter().enumerate().filter(|&(a, _)| a != axis).map(|(_, &x)| x).collect()
}

/// Point projection of a 0-chain, summing coincident images.
pub fn project_zero_chain(z: &ZeroChain, direction: usize, ring: Ring) -> ZeroChain {
    let mut out = ZeroChain::new();
    for (v, &c) in z {
        let w = drop(v, direction);
        let e = out.entry(w.clone()).or_insert(0);
        *e = ring.reduce(*e + c);
        if *e == 0 {
            out.remove(&w);
        }
    }
    out
}

/// `pi_*` along `direction`: edges in that direction vanish, the others map
/// to the surface edges with coefficients summed.
pub fn project_chain(chain: &OneChain, direction: usize) -> FermiArc {
    let surface = chain.grid.drop_axis(direction);
    let mut out = OneChain::new(&surface, chain.ring);
    for (v, a, c) in chain.edges() {
        if a == direction {
            continue;
        }
        let b = if a < direction { a } else { a - 1 };
        out.add_edge(&drop(v, direction), b, c);
    }
    FermiArc {
        ring: chain.ring,
        source_direction: direction,
        chain: out,
        projected_charges: project_zero_chain(&boundary(chain), direction, chain.ring),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct ArcEdge {
    pub from: Vec<usize>,
    pub to: Vec<usize>,
    pub axis: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ArcRecord {
    /// Path from a negative to a positive projected charge; `displacement`
    /// counts signed lattice steps per surface axis.
    Path { from: Vec<usize>, to: Vec<usize>, displacement: Vec<i64>, edges: Vec<ArcEdge> },
    Loop { winding: Vec<i64>, edges: Vec<ArcEdge> },
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct ArcReport {
    pub ring: Ring,
    pub source_direction: usize,
    pub records: Vec<ArcRecord>,
}

impl ArcReport {
    pub fn connections(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        self.records
            .iter()
            .filter_map(|r| match r {
                ArcRecord::Path { from, to, .. } => Some((from.clone(), to.clone())),
                _ => None,
            })
            .collect()
    }

    pub fn loop_windings(&self) -> Vec<Vec<i64>> {
        self.records
            .iter()
            .filter_map(|r| match r {
                ArcRecord::Loop { winding, .. } => Some(winding.clone()),
                _ => None,
            })
            .collect()
    }
}

/// Unit steps available at each vertex: (axis, forward) with multiplicity.
type Steps = BTreeMap<Vec<usize>, BTreeMap<(usize, bool), i64>>;

fn unit_steps(arc: &FermiArc) -> Steps {
    let g = &arc.chain.grid;
    let mut out: Steps = BTreeMap::new();
    for (v, a, c) in arc.chain.edges() {
        let w = g.neighbor(v, a, 1);
        let n = c.abs();
        match arc.ring {
            Ring::Z => {
                if c > 0 {
                    *out.entry(v.to_vec()).or_default().entry((a, true)).or_insert(0) += n;
                } else {
                    *out.entry(w).or_default().entry((a, false)).or_insert(0) += n;
                }
            }
            Ring::Z2 => {
                *out.entry(v.to_vec()).or_default().entry((a, true)).or_insert(0) += 1;
                *out.entry(w).or_default().entry((a, false)).or_insert(0) += 1;
            }
        }
    }
    out
}

/// Consumes the lowest-axis step out of `v` (forward first); for Z2 the
/// reverse half-edge is consumed too.
fn take_step(arc: &FermiArc, steps: &mut Steps, v: &[usize]) -> Option<(Vec<usize>, ArcEdge, usize, i64)> {
    let g = &arc.chain.grid;
    let avail = steps.get_mut(v)?;
    let (&(a, fwd), _) = avail.iter().find(|(_, &n)| n > 0)?;
    *avail.get_mut(&(a, fwd)).unwrap() -= 1;
    let w = g.neighbor(v, a, if fwd { 1 } else { -1 });
    if arc.ring == Ring::Z2 {
        if let Some(back) = steps.get_mut(&w).and_then(|m| m.get_mut(&(a, !fwd))) {
            *back -= 1;
        }
    }
    let edge = if fwd {
        ArcEdge { from: v.to_vec(), to: w.clone(), axis: a }
    } else {
        ArcEdge { from: w.clone(), to: v.to_vec(), axis: a }
    };
    Some((w, edge, a, if fwd { 1 } else { -1 }))
}

/// Decomposes the arc chain into paths between projected charges and
/// leftover closed loops, walking edges lexicographically.
pub fn arc_report(arc: &FermiArc) -> Result<ArcReport> {
    if boundary(&arc.chain) != arc.projected_charges {
        return Err(Error::DanglingBoundary);
    }
    let g = arc.chain.grid.clone();
    let d = g.dim();
    let mut steps = unit_steps(arc);
    let mut records = Vec::new();
    // remaining charge demand per vertex
    let mut demand: BTreeMap<Vec<usize>, i64> = arc.projected_charges.clone();
    loop {
        let source = match arc.ring {
            Ring::Z => demand.iter().find(|(_, &q)| q < 0).map(|(v, _)| v.clone()),
            Ring::Z2 => demand.iter().find(|(_, &q)| q != 0).map(|(v, _)| v.clone()),
        };
        let Some(start) = source else { break };
        *demand.get_mut(&start).unwrap() += if arc.ring == Ring::Z { 1 } else { -1 };
        let mut v = start.clone();
        let mut edges = Vec::new();
        let mut displacement = vec![0i64; d];
        loop {
            let (w, e, a, s) = take_step(arc, &mut steps, &v).ok_or(Error::DanglingBoundary)?;
            edges.push(e);
            displacement[a] += s;
            v = w;
            if demand.get(&v).map_or(false, |&q| q > 0) {
                *demand.get_mut(&v).unwrap() -= 1;
                break;
            }
        }
        records.push(ArcRecord::Path { from: start, to: v, displacement, edges });
    }
    loop {
        let start = steps.iter().find(|(_, m)| m.values().any(|&n| n > 0)).map(|(v, _)| v.clone());
        let Some(start) = start else { break };
        let mut v = start.clone();
        let mut signed = OneChain::new(&g, arc.ring);
        let mut edges = Vec::new();
        loop {
            let (w, e, a, s) = take_step(arc, &mut steps, &v).ok_or(Error::DanglingBoundary)?;
            signed.add_edge(&e.from, a, s);
            edges.push(e);
            v = w;
            if v == start {
                break;
            }
        }
        let winding = winding_class(&signed)?.winding;
        records.push(ArcRecord::Loop { winding, edges });
    }
    Ok(ArcReport { ring: arc.ring, source_direction: arc.source_direction, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::{monotone_path, to_kervaire};
    use crate::grid::TorusGrid;
    use proptest::prelude::*;

    fn g8() -> TorusGrid {
        TorusGrid::cubic(3, 8).unwrap()
    }

    #[test]
    fn aligned_chain_projects_to_nothing() {
        let l = monotone_path(&g8(), Ring::Z, &[1, 1, 2], &[1, 1, 6]);
        let arc = project_chain(&l, 2);
        assert!(arc.chain.is_empty());
        assert!(arc.projected_charges.is_empty());
        assert!(arc_report(&arc).unwrap().records.is_empty());
    }

    #[test]
    fn straight_chain_gives_one_connection() {
        // chain from (0,0,-pi/2) to (0,0,pi/2), projected along x
        let l = monotone_path(&g8(), Ring::Z, &[0, 0, 6], &[0, 0, 2]);
        let arc = project_chain(&l, 0);
        assert_eq!(arc.projected_charges.get(&vec![0, 2]), Some(&1));
        assert_eq!(arc.projected_charges.get(&vec![0, 6]), Some(&-1));
        let rep = arc_report(&arc).unwrap();
        assert_eq!(rep.connections(), vec![(vec![0, 6], vec![0, 2])]);
        assert!(rep.loop_windings().is_empty());
    }

    #[test]
    fn doubled_chain_cancels_mod_two() {
        let l = monotone_path(&g8(), Ring::Z, &[0, 0, 0], &[3, 2, 1]).scaled(2);
        let arc = project_chain(&to_kervaire(&l), 0);
        assert!(arc.chain.is_empty());
        assert!(arc_report(&arc).unwrap().records.is_empty());
    }

    #[test]
    fn extra_loop_is_reported() {
        let g = g8();
        let path = monotone_path(&g, Ring::Z, &[0, 0, 6], &[0, 0, 2]);
        let looped = path.plus(&OneChain::generator_loop(&g, Ring::Z, &[0, 4, 4], 1, 1));
        let a = arc_report(&project_chain(&path, 0)).unwrap();
        let b = arc_report(&project_chain(&looped, 0)).unwrap();
        assert_ne!(a, b);
        assert_eq!(b.loop_windings(), vec![vec![1, 0]]);
        assert_eq!(b.connections(), a.connections());
    }

    #[test]
    fn dangling_boundary_is_detected() {
        let l = monotone_path(&g8(), Ring::Z, &[0, 0, 6], &[0, 0, 2]);
        let mut arc = project_chain(&l, 0);
        arc.projected_charges.clear();
        assert_eq!(arc_report(&arc), Err(Error::DanglingBoundary));
    }

    fn arb_chain() -> impl Strategy<Value = OneChain> {
        proptest::collection::vec(((0usize..5, 0usize..5, 0usize..5), 0usize..3, -2i64..3), 0..25).prop_map(|es| {
            let mut l = OneChain::new(&TorusGrid::cubic(3, 5).unwrap(), Ring::Z);
            for ((x, y, z), a, c) in es {
                l.add_edge(&[x, y, z], a, c);
            }
            l
        })
    }

    proptest! {
        #[test]
        fn projection_commutes_with_boundary(l in arb_chain(), dir in 0usize..3) {
            let arc = project_chain(&l, dir);
            prop_assert_eq!(boundary(&arc.chain), arc.projected_charges.clone());
            prop_assert!(arc_report(&arc).is_ok());
        }

        #[test]
        fn projection_commutes_with_reduction(l in arb_chain(), dir in 0usize..3) {
            prop_assert_eq!(to_kervaire(&project_chain(&l, dir).chain), project_chain(&to_kervaire(&l), dir).chain);
        }

        #[test]
        fn projected_winding(dir in 0usize..3, w in proptest::collection::vec(-2i64..3, 3)) {
            let g = TorusGrid::cubic(3, 5).unwrap();
            let mut cyc = OneChain::new(&g, Ring::Z);
            for (a, &k) in w.iter().enumerate() {
                cyc = cyc.plus(&OneChain::generator_loop(&g, Ring::Z, &[a, 0, 1], a, k));
            }
            let proj = winding_class(&project_chain(&cyc, dir).chain).unwrap().winding;
            let mut expect = w.clone();
            expect.remove(dir);
            prop_assert_eq!(proj, expect);
        }
    }
}
