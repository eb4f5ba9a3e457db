//! Periodic sampling lattices on `T^d` and oriented triangulated spheres.

use crate::{Error, Result};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::f64::consts::{PI, TAU};

/// A point of `T^d` given by angle coordinates (not necessarily reduced).
pub type Point = Vec<f64>;

/// Reduces an angle into `[0, 2pi)`.
pub fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Signed periodic difference `b - a` reduced into `[-pi, pi)`.
pub fn periodic_delta(a: f64, b: f64) -> f64 {
    (b - a + PI).rem_euclid(TAU) - PI
}

/// Flat toroidal distance on `T^d` with `2pi` periods.
pub fn torus_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| periodic_delta(*x, *y).powi(2)).sum::<f64>().sqrt()
}

/// Regular periodic lattice on `T^d`, `k_i = offset_i + 2pi m_i / n_i`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TorusGrid {
    n: Vec<usize>,
    /// Origin shift in units of one cell (used to move a grid off a node).
    offset: Vec<f64>,
}

impl TorusGrid {
    pub fn new(d: usize, n: &[usize]) -> Result<Self> {
        if !(3..=5).contains(&d) {
            return Err(Error::UnsupportedDimension(d));
        }
        Self::with_dims(d, n)
    }

    /// Like [`TorusGrid::new`] but admitting any dimension >= 1; used for
    /// slices and surface tori.
    pub fn with_dims(d: usize, n: &[usize]) -> Result<Self> {
        if n.len() != d {
            return Err(Error::InvalidArgument(format!("expected {d} axis sizes, got {}", n.len())));
        }
        if let Some(&bad) = n.iter().find(|&&x| x < 4) {
            return Err(Error::InvalidArgument(format!("each axis needs at least 4 samples, got {bad}")));
        }
        Ok(TorusGrid { n: n.to_vec(), offset: vec![0.0; d] })
    }

    pub fn cubic(d: usize, n: usize) -> Result<Self> {
        Self::new(d, &vec![n; d])
    }

    /// The same lattice shifted by half a cell along every axis.
    pub fn half_shifted(&self) -> Self {
        TorusGrid { n: self.n.clone(), offset: self.offset.iter().map(|o| o + 0.5).collect() }
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.n
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn num_vertices(&self) -> usize {
        self.n.iter().product()
    }

    pub fn step(&self, axis: usize) -> f64 {
        TAU / self.n[axis] as f64
    }

    pub fn min_step(&self) -> f64 {
        (0..self.dim()).map(|a| self.step(a)).fold(f64::INFINITY, f64::min)
    }

    pub fn cell_diameter(&self) -> f64 {
        (0..self.dim()).map(|a| self.step(a).powi(2)).sum::<f64>().sqrt()
    }

    /// Angle of layer `m` along `axis` (m may be any integer, wraps).
    pub fn angle(&self, axis: usize, m: i64) -> f64 {
        let n = self.n[axis] as i64;
        TAU * (m.rem_euclid(n) as f64 + self.offset[axis]) / n as f64
    }

    /// Continuous layer coordinate of an angle along `axis`, in `[0, n)`.
    pub fn layer_coordinate(&self, axis: usize, angle: f64) -> f64 {
        let n = self.n[axis] as f64;
        (wrap_angle(angle) / TAU * n - self.offset[axis]).rem_euclid(n)
    }

    pub fn wrap_index(&self, idx: &[i64]) -> Vec<usize> {
        idx.iter().zip(&self.n).map(|(&m, &n)| m.rem_euclid(n as i64) as usize).collect()
    }

    /// Linear vertex index, last axis fastest.
    pub fn linear(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.n).fold(0, |acc, (&m, &n)| acc * n + m)
    }

    pub fn multi(&self, mut lin: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            out[a] = lin % self.n[a];
            lin /= self.n[a];
        }
        out
    }

    pub fn vertex_point(&self, idx: &[usize]) -> Point {
        idx.iter().enumerate().map(|(a, &m)| self.angle(a, m as i64)).collect()
    }

    /// Neighbour of a vertex one step along `axis` (with wraparound).
    pub fn neighbor(&self, idx: &[usize], axis: usize, step: i64) -> Vec<usize> {
        let mut out = idx.to_vec();
        out[axis] = (idx[axis] as i64 + step).rem_euclid(self.n[axis] as i64) as usize;
        out
    }

    /// Nearest vertex to a point.
    pub fn snap(&self, p: &[f64]) -> Vec<usize> {
        (0..self.dim())
            .map(|a| {
                let c = self.layer_coordinate(a, p[a]).round() as usize;
                c % self.n[a]
            })
            .collect()
    }

    /// All vertex multi-indices in linear order.
    pub fn vertices(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.num_vertices()).map(move |l| self.multi(l))
    }

    /// The grid with one axis removed.
    pub fn drop_axis(&self, axis: usize) -> TorusGrid {
        let mut n = self.n.clone();
        let mut offset = self.offset.clone();
        n.remove(axis);
        offset.remove(axis);
        TorusGrid { n, offset }
    }
}

/// Closed oriented simplicial `(d-1)`-sphere embedded in a chart of `T^d`.
///
/// Each simplex lists `d` vertex indices; the ordering is outward positive,
/// i.e. `det(v_0 - c, ..., v_{d-1} - c) > 0`.
#[derive(Debug, Clone)]
pub struct SphereMesh {
    pub center: Point,
    pub radius: f64,
    /// Vertex positions relative to the center, each of norm `radius`.
    pub offsets: Vec<Vec<f64>>,
    pub simplices: Vec<Vec<usize>>,
}

impl SphereMesh {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Absolute vertex position in the covering chart.
    pub fn vertex(&self, i: usize) -> Point {
        self.center.iter().zip(&self.offsets[i]).map(|(c, o)| c + o).collect()
    }

    pub fn unit_offset(&self, i: usize) -> Vec<f64> {
        self.offsets[i].iter().map(|x| x / self.radius).collect()
    }

    /// Euler characteristic of the simplicial complex.
    pub fn euler_characteristic(&self) -> i64 {
        let mut faces: Vec<HashSet<Vec<usize>>> = vec![HashSet::new(); self.dim()];
        for s in &self.simplices {
            let k = s.len();
            for mask in 1u32..(1 << k) {
                let mut f: Vec<usize> = (0..k).filter(|&b| mask & (1 << b) != 0).map(|b| s[b]).collect();
                f.sort_unstable();
                faces[f.len() - 1].insert(f);
            }
        }
        faces.iter().enumerate().map(|(i, f)| if i % 2 == 0 { f.len() as i64 } else { -(f.len() as i64) }).sum()
    }

    /// Induced boundary of the simplex chain: the map from sorted
    /// `(d-2)`-faces to summed orientation signs. Empty for a closed,
    /// coherently oriented mesh.
    pub fn boundary_faces(&self) -> BTreeMap<Vec<usize>, (i64, usize)> {
        let mut acc: BTreeMap<Vec<usize>, (i64, usize)> = BTreeMap::new();
        for s in &self.simplices {
            for skip in 0..s.len() {
                let face: Vec<usize> = s.iter().enumerate().filter(|&(j, _)| j != skip).map(|(_, &v)| v).collect();
                let (sorted, parity) = sort_with_parity(&face);
                let sign = if skip % 2 == 0 { 1 } else { -1 } * parity;
                let e = acc.entry(sorted).or_insert((0, 0));
                e.0 += sign;
                e.1 += 1;
            }
        }
        acc.retain(|_, (sum, count)| *sum != 0 || *count != 2);
        acc
    }

    pub fn is_closed_oriented(&self) -> bool {
        self.boundary_faces().is_empty()
    }

    /// Whether every simplex is outward oriented.
    pub fn outward_oriented(&self) -> bool {
        let d = self.dim();
        self.simplices.iter().all(|s| {
            let mut m = Vec::with_capacity(d * d);
            for &v in s {
                m.extend_from_slice(&self.offsets[v]);
            }
            crate::linalg::det_real(&m, d) > 0.0
        })
    }
}

/// Sorts a small list and reports the permutation parity (+1 / -1).
pub fn sort_with_parity(v: &[usize]) -> (Vec<usize>, i64) {
    let mut a = v.to_vec();
    let mut parity = 1;
    for i in 0..a.len() {
        for j in 0..a.len() - 1 - i {
            if a[j] > a[j + 1] {
                a.swap(j, j + 1);
                parity = -parity;
            }
        }
    }
    (a, parity)
}

/// Permutation parity of a list of distinct integers.
pub fn permutation_sign(p: &[usize]) -> i64 {
    sort_with_parity(p).1
}

/// Builds a closed oriented `(d-1)`-sphere of given radius around `center`.
/// d = 3 starts from the icosahedron with 4-fold midpoint refinement; d = 4, 5
/// project the boundary of a cube with `refinement + 2` cells per edge.
pub fn sphere_mesh(center: &[f64], radius: f64, refinement: usize) -> Result<SphereMesh> {
    let d = center.len();
    if !(3..=5).contains(&d) {
        return Err(Error::UnsupportedDimension(d));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    let (mut verts, mut simps) = if d == 3 { icosahedron() } else { cube_surface(d, refinement + 2) };
    if d == 3 {
        for _ in 0..refinement {
            (verts, simps) = subdivide_midpoint(&verts, &simps);
        }
    }
    let offsets = verts
        .into_iter()
        .map(|v| {
            let r = crate::linalg::norm(&v);
            v.iter().map(|x| x * radius / r).collect()
        })
        .collect();
    Ok(SphereMesh { center: center.to_vec(), radius, offsets, simplices: simps })
}

fn orient_outward(verts: &[Vec<f64>], s: &mut [usize]) {
    let d = verts[0].len();
    let mut m = Vec::with_capacity(d * d);
    for &v in s.iter() {
        m.extend_from_slice(&verts[v]);
    }
    if crate::linalg::det_real(&m, d) < 0.0 {
        s.swap(0, 1);
    }
}

fn icosahedron() -> (Vec<Vec<f64>>, Vec<Vec<usize>>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let verts: Vec<Vec<f64>> = vec![
        vec![-1.0, t, 0.0],
        vec![1.0, t, 0.0],
        vec![-1.0, -t, 0.0],
        vec![1.0, -t, 0.0],
        vec![0.0, -1.0, t],
        vec![0.0, 1.0, t],
        vec![0.0, -1.0, -t],
        vec![0.0, 1.0, -t],
        vec![t, 0.0, -1.0],
        vec![t, 0.0, 1.0],
        vec![-t, 0.0, -1.0],
        vec![-t, 0.0, 1.0],
    ];
    let faces: [[usize; 3]; 20] = [
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    let simps = faces
        .iter()
        .map(|f| {
            let mut s = f.to_vec();
            orient_outward(&verts, &mut s);
            s
        })
        .collect();
    (verts, simps)
}

/// Boundary of `[-1, 1]^d` cut into `n^{d-1}` cubes per facet, each split
/// into Kuhn simplices along the global axis order (so shared ridges agree).
fn cube_surface(d: usize, n: usize) -> (Vec<Vec<f64>>, Vec<Vec<usize>>) {
    let m = d - 1;
    let perms = permutations(m);
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut verts: Vec<Vec<f64>> = Vec::new();
    let mut simps = Vec::with_capacity(2 * d * n.pow(m as u32) * perms.len());
    for axis in 0..d {
        for side in [0, n] {
            for cell in 0..n.pow(m as u32) {
                let c: Vec<usize> = (0..m).map(|i| (cell / n.pow(i as u32)) % n).collect();
                for p in &perms {
                    let mut w = c.clone();
                    let mut s = Vec::with_capacity(d);
                    for step in 0..=m {
                        if step > 0 {
                            w[p[step - 1]] += 1;
                        }
                        let mut key = w.clone();
                        key.insert(axis, side);
                        let id = *index.entry(key.clone()).or_insert_with(|| {
                            let x: Vec<f64> = key.iter().map(|&q| -1.0 + 2.0 * q as f64 / n as f64).collect();
                            verts.push(x);
                            verts.len() - 1
                        });
                        s.push(id);
                    }
                    orient_outward(&verts, &mut s);
                    simps.push(s);
                }
            }
        }
    }
    (verts, simps)
}

fn subdivide_midpoint(verts: &[Vec<f64>], simps: &[Vec<usize>]) -> (Vec<Vec<f64>>, Vec<Vec<usize>>) {
    let mut out_v = verts.to_vec();
    let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |a: usize, b: usize, out_v: &mut Vec<Vec<f64>>| -> usize {
        let key = (a.min(b), a.max(b));
        *mid.entry(key).or_insert_with(|| {
            let m: Vec<f64> = out_v[a].iter().zip(&out_v[b]).map(|(x, y)| 0.5 * (x + y)).collect();
            let r = crate::linalg::norm(&m);
            out_v.push(m.iter().map(|x| x / r).collect());
            out_v.len() - 1
        })
    };
    let mut out_s = Vec::with_capacity(simps.len() * 4);
    for s in simps {
        let (a, b, c) = (s[0], s[1], s[2]);
        let ab = midpoint(a, b, &mut out_v);
        let bc = midpoint(b, c, &mut out_v);
        let ca = midpoint(c, a, &mut out_v);
        out_s.push(vec![a, ab, ca]);
        out_s.push(vec![ab, b, bc]);
        out_s.push(vec![ca, bc, c]);
        out_s.push(vec![ab, bc, ca]);
    }
    (out_v, out_s)
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// All permutations of `0..k`.
pub fn all_permutations(k: usize) -> Vec<Vec<usize>> {
    permutations(k)
}
