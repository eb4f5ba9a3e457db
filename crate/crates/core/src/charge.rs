//! Degrees of unit-vector maps: local charges on node spheres, slice degrees
//! on codimension-one subtori, and the global charge sum.

use crate::field::FieldSpec;
use crate::grid::{all_permutations, permutation_sign, sphere_mesh, SphereMesh};
use crate::linalg::{det_real, dot, norm};
use crate::nodes::{NodeCharge, WeylNode};
use crate::{Error, Result, Ring};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;

pub const DEGREE_RESIDUAL: f64 = 0.05;

/// Largest angle between two image vertices of one simplex accepted before
/// the mesh is considered too coarse to represent the map.
pub const MAX_IMAGE_ANGLE: f64 = PI / 3.0;

/// Volume of the unit sphere `S^{d-1}`.
pub fn sphere_volume(d: usize) -> f64 {
    match d {
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        4 => 2.0 * PI * PI,
        5 => 8.0 * PI * PI / 3.0,
        _ => {
            // 2 pi^{d/2} / Gamma(d/2) by the recursion |S^{d-1}| = 2pi/(d-2) |S^{d-3}|
            2.0 * PI / (d as f64 - 2.0) * sphere_volume(d - 2)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Degree {
    pub value: i64,
    pub raw: f64,
    pub residual: f64,
}

impl Degree {
    fn from_raw(raw: f64, gate: f64) -> Result<Self> {
        if !raw.is_finite() {
            return Err(Error::DegenerateImage);
        }
        let value = raw.round();
        let residual = (raw - value).abs();
        if residual >= gate {
            return Err(Error::MeshTooCoarse { raw, residual });
        }
        Ok(Degree { value: value as i64, raw, residual })
    }
}

/// Grundmann-Moeller rule of degree `2s + 1` (s = 1, 2) on the standard
/// `m`-simplex (volume `1/m!`): barycentric points and weights.
fn gm_rule(m: usize, s: usize) -> &'static [(Vec<f64>, f64)] {
    static RULES: OnceLock<Vec<Vec<Vec<(Vec<f64>, f64)>>>> = OnceLock::new();
    let rules = RULES.get_or_init(|| (1..=2).map(|s| (0..=5).map(|m| build_gm_rule(m, s)).collect()).collect());
    &rules[s - 1][m]
}

fn build_gm_rule(m: usize, s: usize) -> Vec<(Vec<f64>, f64)> {
    let deg = 2 * s + 1;
    let fact = |k: usize| (1..=k).map(|x| x as f64).product::<f64>();
    let mut out = Vec::new();
    for i in 0..=s {
        let denom = (deg + m - 2 * i) as f64;
        let w = if i % 2 == 0 { 1.0 } else { -1.0 } * 2f64.powi(-(2 * s as i32)) * denom.powi(deg as i32)
            / (fact(i) * fact(deg + m - i));
        for beta in compositions(s - i, m + 1) {
            let p: Vec<f64> = beta.iter().map(|&b| (2 * b + 1) as f64 / denom).collect();
            out.push((p, w));
        }
    }
    out
}

/// All vectors of `parts` non-negative integers summing to `total`.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Signed volume of the geodesic simplex spanned by the directions of
/// `u[0..d]` on `S^{d-1}`; positive when `det(u_0, ..., u_{d-1}) > 0`.
pub fn spherical_simplex_volume(u: &[Vec<f64>]) -> Result<f64> {
    let d = u.len();
    match d {
        2 => {
            let c = u[0][0] * u[1][1] - u[0][1] * u[1][0];
            Ok(c.atan2(dot(&u[0], &u[1])))
        }
        3 => {
            let n: Vec<Vec<f64>> = u.iter().map(|v| v.iter().map(|x| x / norm(v)).collect()).collect();
            let mut m = Vec::with_capacity(9);
            for v in &n {
                m.extend_from_slice(v);
            }
            let det = det_real(&m, 3);
            let den = 1.0 + dot(&n[0], &n[1]) + dot(&n[1], &n[2]) + dot(&n[2], &n[0]);
            if den < 0.0 && det.abs() < 1e-3 {
                return Err(Error::DegenerateImage);
            }
            Ok(2.0 * det.atan2(den))
        }
        _ => {
            let n: Vec<Vec<f64>> = u.iter().map(|v| v.iter().map(|x| x / norm(v)).collect()).collect();
            let mut total = 0.0;
            flat_simplex_solid_angle(&n, 0, &mut total)?;
            Ok(total)
        }
    }
}

/// `Omega = det(x_0..x_m) * int_{Delta} |x(lambda)|^{-d} d lambda` over the
/// flat simplex with vertices `x`, by adaptive longest-edge bisection driven
/// by the gap between the degree-3 and degree-5 rules.
fn flat_simplex_solid_angle(x: &[Vec<f64>], depth: usize, total: &mut f64) -> Result<()> {
    let d = x.len();
    let rmin = x.iter().map(|v| norm(v)).fold(f64::INFINITY, f64::min);
    if rmin < 1e-3 || depth > 40 {
        return Err(Error::DegenerateImage);
    }
    let mut m = Vec::with_capacity(d * d);
    for v in x {
        m.extend_from_slice(v);
    }
    let det = det_real(&m, d);
    if det == 0.0 {
        return Ok(());
    }
    let rule = |s: usize| {
        let mut p = vec![0.0; d];
        let mut integral = 0.0;
        for (bary, w) in gm_rule(d - 1, s) {
            p.iter_mut().for_each(|c| *c = 0.0);
            for (l, v) in bary.iter().zip(x) {
                for (c, vi) in p.iter_mut().zip(v) {
                    *c += l * vi;
                }
            }
            integral += w * dot(&p, &p).powf(-0.5 * d as f64);
        }
        det * integral
    };
    let fine = rule(2);
    let coarse = rule(1);
    if (fine - coarse).abs() <= 1e-6 * fine.abs() + 1e-12 {
        *total += fine;
        return Ok(());
    }
    let mut longest = (0.0, 0, 0);
    for i in 0..d {
        for j in i + 1..d {
            let e = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if e > longest.0 {
                longest = (e, i, j);
            }
        }
    }
    let (_, i, j) = longest;
    let mid: Vec<f64> = x[i].iter().zip(&x[j]).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut a = x.to_vec();
    a[j] = mid.clone();
    flat_simplex_solid_angle(&a, depth + 1, total)?;
    let mut b = x.to_vec();
    b[i] = mid;
    flat_simplex_solid_angle(&b, depth + 1, total)
}

fn max_pairwise_angle(u: &[&[f64]]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..u.len() {
        for j in i + 1..u.len() {
            worst = worst.max(dot(u[i], u[j]).clamp(-1.0, 1.0).acos());
        }
    }
    worst
}

/// Fixed generic directions used to count signed preimages in d >= 4.
fn probes(d: usize) -> Vec<Vec<f64>> {
    (0..5)
        .map(|j| {
            let v: Vec<f64> = (0..d).map(|i| (1.7 + 2.3 * i as f64 + 3.1 * j as f64 + 0.37 * (i * j) as f64).sin()).collect();
            let n = norm(&v);
            v.into_iter().map(|x| x / n).collect()
        })
        .collect()
}

/// Solves `sum_i c_i u_i = p` for every probe `p` by one pivoted elimination;
/// returns the sign-carrying determinant and the coefficients, or `None` for a
/// singular simplex.
fn cone_coordinates(u: &[&[f64]], probes: &[Vec<f64>]) -> Option<(f64, Vec<[f64; 8]>)> {
    let d = u.len();
    let k = probes.len();
    let mut a = [[0.0f64; 8]; 8];
    let mut rhs = vec![[0.0f64; 8]; k];
    for r in 0..d {
        for c in 0..d {
            a[r][c] = u[c][r];
        }
        for (j, p) in probes.iter().enumerate() {
            rhs[j][r] = p[r];
        }
    }
    let mut det = 1.0;
    for col in 0..d {
        let piv = (col..d).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        if piv != col {
            a.swap(piv, col);
            rhs.iter_mut().for_each(|b| b.swap(piv, col));
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..d {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..d {
                    a[r][c] -= f * a[col][c];
                }
                rhs.iter_mut().for_each(|b| b[r] -= f * b[col]);
            }
        }
    }
    for b in rhs.iter_mut() {
        for r in (0..d).rev() {
            let mut x = b[r];
            for c in r + 1..d {
                x -= a[r][c] * b[c];
            }
            b[r] = x / a[r][r];
        }
    }
    Some((det, rhs))
}

/// Raw degree of an oriented simplex list, in units of `|S^{d-1}|`, and the
/// largest image angle seen. For d = 3 the signed image areas are summed; in
/// higher dimension the signed number of image cones containing each probe
/// direction is averaged over the probes that hit no cone boundary.
fn raw_degree<'a>(d: usize, simplices: impl IndexedParallelIterator<Item = (Vec<&'a [f64]>, i64)>) -> Result<(f64, f64)> {
    if d <= 3 {
        let parts: Vec<Result<(f64, f64)>> = simplices
            .map(|(verts, sign)| {
                let angle = max_pairwise_angle(&verts);
                let owned: Vec<Vec<f64>> = verts.iter().map(|v| v.to_vec()).collect();
                let vol = spherical_simplex_volume(&owned)?;
                Ok((sign as f64 * vol, angle))
            })
            .collect();
        let mut sum = 0.0;
        let mut worst: f64 = 0.0;
        for p in parts {
            let (v, a) = p?;
            sum += v;
            worst = worst.max(a);
        }
        return Ok((sum / sphere_volume(d), worst));
    }
    let dirs = probes(d);
    let k = dirs.len();
    let (counts, ambiguous, worst) = simplices
        .map(|(verts, sign)| {
            let angle = max_pairwise_angle(&verts);
            let mut counts = vec![0i64; k];
            let mut amb = vec![false; k];
            match cone_coordinates(&verts, &dirs) {
                // flat image simplex: zero volume
                None => {}
                Some((det, coords)) => {
                    for (j, c) in coords.iter().enumerate().take(k) {
                        let c = &c[..d];
                        let scale: f64 = c.iter().map(|x| x.abs()).sum();
                        let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
                        if lo.abs() <= 1e-12 * scale {
                            amb[j] = true;
                        } else if lo > 0.0 {
                            counts[j] = sign * det.signum() as i64;
                        }
                    }
                }
            }
            (counts, amb, angle)
        })
        .reduce(
            || (vec![0i64; k], vec![false; k], 0.0f64),
            |mut x, y| {
                for j in 0..k {
                    x.0[j] += y.0[j];
                    x.1[j] |= y.1[j];
                }
                (x.0, x.1, x.2.max(y.2))
            },
        );
    let good: Vec<i64> = (0..k).filter(|&j| !ambiguous[j]).map(|j| counts[j]).collect();
    if good.is_empty() {
        return Err(Error::DegenerateImage);
    }
    let raw = good.iter().sum::<i64>() as f64 / good.len() as f64;
    Ok((raw, worst))
}

/// Degree of a map from a closed oriented sphere mesh to `S^{d-1}`, given by
/// unit images per mesh vertex.
pub fn degree_sphere_map(mesh: &SphereMesh, images: &[Vec<f64>]) -> Result<Degree> {
    degree_sphere_map_with(mesh, images, DEGREE_RESIDUAL)
}

pub fn degree_sphere_map_with(mesh: &SphereMesh, images: &[Vec<f64>], gate: f64) -> Result<Degree> {
    let d = mesh.dim();
    if images.len() != mesh.offsets.len() {
        return Err(Error::InvalidArgument("one image per mesh vertex expected".into()));
    }
    if images.iter().any(|u| u.len() != d || (norm(u) - 1.0).abs() > 1e-9) {
        return Err(Error::InvalidArgument("images must be unit vectors".into()));
    }
    let (raw, worst) = raw_degree(
        d,
        mesh.simplices.par_iter().map(|s| (s.iter().map(|&v| images[v].as_slice()).collect::<Vec<_>>(), 1)),
    )?;
    let deg = Degree::from_raw(raw, gate)?;
    if worst > MAX_IMAGE_ANGLE {
        return Err(Error::MeshTooCoarse { raw, residual: deg.residual });
    }
    Ok(deg)
}

fn max_sphere_refinement(d: usize) -> usize {
    match d {
        3 => 6,
        4 => 8,
        _ => 4,
    }
}

/// Local index of `field` at `node` from the degree on an enclosing sphere of
/// radius `node.radius`. Coarse or degenerate meshes are refined up to the
/// per-dimension cap; the result is cached into `node.charge`.
pub fn local_charge(field: &FieldSpec, node: &mut WeylNode, refinement: usize) -> Result<i64> {
    let deg = local_degree(field, node, refinement)?;
    node.charge = NodeCharge::Integer(deg.value);
    Ok(deg.value)
}

pub fn local_degree(field: &FieldSpec, node: &WeylNode, refinement: usize) -> Result<Degree> {
    local_degree_with(field, node, refinement, DEGREE_RESIDUAL)
}

pub fn local_degree_with(field: &FieldSpec, node: &WeylNode, refinement: usize, gate: f64) -> Result<Degree> {
    if field.is_pair() {
        return Err(Error::InvalidArgument("integer local charge undefined for a tangent 2-field".into()));
    }
    let cap = max_sphere_refinement(field.dim).max(refinement);
    let mut level = refinement;
    loop {
        let mesh = sphere_mesh(&node.position, node.radius, level)?;
        let images: Vec<Result<Vec<f64>>> = (0..mesh.offsets.len())
            .into_par_iter()
            .map(|i| {
                let h = field.eval(&mesh.vertex(i));
                let r = norm(&h);
                if r < 1e-9 {
                    return Err(Error::NodeOnSphere(r));
                }
                Ok(h.iter().map(|x| x / r).collect())
            })
            .collect();
        let images: Vec<Vec<f64>> = images.into_iter().collect::<Result<_>>()?;
        match degree_sphere_map_with(&mesh, &images, gate) {
            Err(Error::MeshTooCoarse { .. }) | Err(Error::DegenerateImage) if level < cap => level += 1,
            other => return other,
        }
    }
}

/// 0-chain of node charges.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ChargeChain {
    pub ring: Ring,
    pub entries: Vec<ChargeEntry>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ChargeEntry {
    pub position: Vec<f64>,
    pub charge: i64,
}

impl ChargeChain {
    pub fn new(ring: Ring, entries: Vec<(Vec<f64>, i64)>) -> Self {
        ChargeChain {
            ring,
            entries: entries
                .into_iter()
                .map(|(position, q)| ChargeEntry { position, charge: ring.reduce(q) })
                .filter(|e| e.charge != 0)
                .collect(),
        }
    }

    /// Builds the chain from located nodes with known charges.
    pub fn from_nodes(ring: Ring, nodes: &[WeylNode]) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, n) in nodes.iter().enumerate() {
            let q = match n.charge {
                NodeCharge::Integer(q) => q,
                NodeCharge::Z2 { value, .. } => value as i64,
                NodeCharge::Unknown => return Err(Error::UnknownCharge(i)),
            };
            entries.push((n.position.clone(), q));
        }
        Ok(Self::new(ring, entries))
    }

    pub fn total(&self) -> i64 {
        self.ring.reduce(self.entries.iter().map(|e| e.charge).sum())
    }

    pub fn reduce_mod2(&self) -> ChargeChain {
        ChargeChain::new(Ring::Z2, self.entries.iter().map(|e| (e.position.clone(), e.charge)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct PhVerdict {
    pub pass: bool,
    pub sum: i64,
}

/// Global charge cancellation: the sum of local indices must equal the Euler
/// characteristic (ring Z) or the Kervaire semicharacteristic (ring Z2) of the
/// torus, both zero.
pub fn poincare_hopf_verify(charges: &ChargeChain) -> PhVerdict {
    let sum = charges.total();
    PhVerdict { pass: sum == 0, sum }
}

/// Degree of `h_hat` restricted to the subtorus `k_direction = coordinate`.
///
/// The subtorus lattice is the grid with `direction` removed, triangulated
/// into Kuhn simplices; the slice is co-oriented by `+e_direction`, so the
/// degree increases by the charge of every node crossed in that direction.
/// The lattice is refined (by factors of two) while image simplices are too
/// large to resolve the map.
pub fn slice_degree(field: &FieldSpec, direction: usize, coordinate: f64, grid: &crate::grid::TorusGrid) -> Result<i64> {
    Ok(slice_degree_detailed(field, direction, coordinate, grid, DEGREE_RESIDUAL)?.value)
}

pub fn slice_degree_detailed(
    field: &FieldSpec,
    direction: usize,
    coordinate: f64,
    grid: &crate::grid::TorusGrid,
    gate: f64,
) -> Result<Degree> {
    let d = grid.dim();
    if direction >= d || field.dim != d {
        return Err(Error::InvalidArgument("slice direction out of range".into()));
    }
    let axes: Vec<usize> = (0..d).filter(|&a| a != direction).collect();
    let base_cells: usize = axes.iter().map(|&a| grid.sizes()[a]).product();
    let mut factor = 1usize;
    loop {
        let res = slice_degree_at(field, direction, coordinate, grid, &axes, factor, gate);
        let room = base_cells * (factor * 2).pow(axes.len() as u32) <= 1 << 21;
        match res {
            Err(Error::MeshTooCoarse { .. }) | Err(Error::DegenerateImage) if room && factor < 16 => factor *= 2,
            other => return other,
        }
    }
}

fn slice_degree_at(
    field: &FieldSpec,
    direction: usize,
    coordinate: f64,
    grid: &crate::grid::TorusGrid,
    axes: &[usize],
    factor: usize,
    gate: f64,
) -> Result<Degree> {
    let d = grid.dim();
    let m = axes.len();
    let sizes: Vec<usize> = axes.iter().map(|&a| grid.sizes()[a] * factor).collect();
    let total: usize = sizes.iter().product();
    let multi = |mut l: usize| -> Vec<usize> {
        let mut out = vec![0; m];
        for j in (0..m).rev() {
            out[j] = l % sizes[j];
            l /= sizes[j];
        }
        out
    };
    let linear = |idx: &[usize]| idx.iter().zip(&sizes).fold(0, |acc, (&x, &n)| acc * n + x);
    let images: Vec<Result<Vec<f64>>> = (0..total)
        .into_par_iter()
        .map(|l| {
            let idx = multi(l);
            let mut k = vec![0.0; d];
            k[direction] = coordinate;
            for (j, &a) in axes.iter().enumerate() {
                k[a] = grid.angle(a, 0) + grid.step(a) * idx[j] as f64 / factor as f64;
            }
            let h = field.eval(&k);
            let r = norm(&h);
            if !(r > 1e-9) {
                return Err(Error::SliceHitsNode { axis: direction, coordinate });
            }
            Ok(h.iter().map(|x| x / r).collect())
        })
        .collect();
    let images: Vec<Vec<f64>> = images.into_iter().collect::<Result<_>>()?;
    let perms = all_permutations(m);
    let co = if direction % 2 == 0 { 1 } else { -1 };
    let simplices: Vec<(usize, usize)> = (0..total).flat_map(|c| (0..perms.len()).map(move |p| (c, p))).collect();
    let (raw, worst) = raw_degree(
        d,
        simplices.par_iter().map(|&(cell, p)| {
            let perm = &perms[p];
            let mut idx = multi(cell);
            let mut verts: Vec<&[f64]> = Vec::with_capacity(m + 1);
            verts.push(images[linear(&idx)].as_slice());
            for &ax in perm {
                idx[ax] = (idx[ax] + 1) % sizes[ax];
                verts.push(images[linear(&idx)].as_slice());
            }
            // the Kuhn simplex (v0, v0+e_p0, ...) has orientation sign(perm)
            // relative to the ordered remaining axes
            let mut verts = verts;
            let sign = permutation_sign(perm) * co;
            // a (d-1)-simplex of the slice has d vertices, matching S^{d-1}
            if sign < 0 {
                verts.swap(0, 1);
            }
            (verts, 1)
        }),
    )?;
    let deg = Degree::from_raw(raw, gate)?;
    if worst > MAX_IMAGE_ANGLE {
        return Err(Error::MeshTooCoarse { raw, residual: deg.residual });
    }
    Ok(deg)
}
