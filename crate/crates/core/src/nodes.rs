//! Locating the isolated zero set of a field on `T^d`.

use crate::field::FieldSpec;
use crate::grid::{periodic_delta, torus_distance, wrap_angle, TorusGrid};
use crate::linalg::norm;
use crate::{Error, Result};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Local charge of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum NodeCharge {
    Integer(i64),
    /// Z2 charge carried as builder metadata, not recomputed from samples.
    Z2 { value: u8, verified: bool },
    Unknown,
}

impl NodeCharge {
    pub fn integer(&self) -> Option<i64> {
        match self {
            NodeCharge::Integer(q) => Some(*q),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct WeylNode {
    /// Refined position, each angle in `[0, 2pi)`.
    pub position: Vec<f64>,
    pub radius: f64,
    pub charge: NodeCharge,
    /// `|h|` (or `lambda`) at the refined position.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct LocateOptions {
    pub tol: f64,
    /// Cells whose smallest corner magnitude is below `bound_factor` times
    /// the largest corner-to-corner variation are refined.
    pub bound_factor: f64,
    pub max_iter: usize,
    /// Inclusive ranges of cell base indices per axis to scan; `None` scans
    /// the whole torus.
    pub search: Option<Vec<(usize, usize)>>,
}

impl Default for LocateOptions {
    fn default() -> Self {
        LocateOptions { tol: 1e-8, bound_factor: 10.0, max_iter: 60, search: None }
    }
}

pub fn locate_zeros(field: &FieldSpec, grid: &TorusGrid, tol: f64) -> Result<Vec<WeylNode>> {
    locate_zeros_with(field, grid, &LocateOptions { tol, ..Default::default() })
}

pub fn locate_zeros_with(field: &FieldSpec, grid: &TorusGrid, opts: &LocateOptions) -> Result<Vec<WeylNode>> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    if field.dim != grid.dim() {
        return Err(Error::InvalidArgument("field and grid dimensions differ".into()));
    }
    match scan(field, grid, opts) {
        Err(Error::VanishesOnVertex(_)) => scan(field, &grid.half_shifted(), opts),
        other => other,
    }
}

fn scan(field: &FieldSpec, grid: &TorusGrid, opts: &LocateOptions) -> Result<Vec<WeylNode>> {
    let d = grid.dim();
    let values: Vec<Vec<f64>> = (0..grid.num_vertices())
        .into_par_iter()
        .map(|l| field.eval(&grid.vertex_point(&grid.multi(l))))
        .collect();
    let mags: Vec<f64> = (0..grid.num_vertices())
        .into_par_iter()
        .map(|l| if field.is_pair() { field.magnitude(&grid.vertex_point(&grid.multi(l))) } else { norm(&values[l]) })
        .collect();
    if let Some(l) = mags.iter().position(|&m| m < opts.tol) {
        return Err(Error::VanishesOnVertex(grid.multi(l)));
    }

    let cells: Vec<usize> = (0..grid.num_vertices())
        .filter(|&l| match &opts.search {
            None => true,
            Some(ranges) => grid.multi(l).iter().zip(ranges).all(|(&m, &(lo, hi))| m >= lo && m <= hi),
        })
        .collect();

    let corner_offsets: Vec<Vec<i64>> =
        (0..(1usize << d)).map(|c| (0..d).map(|a| ((c >> a) & 1) as i64).collect()).collect();

    let candidates: Vec<Vec<f64>> = cells
        .par_iter()
        .filter_map(|&l| {
            let base = grid.multi(l);
            let corners: Vec<usize> = corner_offsets
                .iter()
                .map(|o| {
                    let idx: Vec<i64> = base.iter().zip(o).map(|(&b, &x)| b as i64 + x).collect();
                    grid.linear(&grid.wrap_index(&idx))
                })
                .collect();
            let sign_change = !field.is_pair()
                && (0..d).all(|c| {
                    let lo = corners.iter().map(|&v| values[v][c]).fold(f64::INFINITY, f64::min);
                    let hi = corners.iter().map(|&v| values[v][c]).fold(f64::NEG_INFINITY, f64::max);
                    lo <= 0.0 && hi >= 0.0
                });
            let min_mag = corners.iter().map(|&v| mags[v]).fold(f64::INFINITY, f64::min);
            let mut variation: f64 = 0.0;
            for (i, &u) in corners.iter().enumerate() {
                for &v in &corners[i + 1..] {
                    let diff = values[u].iter().zip(&values[v]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    variation = variation.max(diff);
                }
            }
            let bound = min_mag < opts.bound_factor * variation;
            if !(sign_change || bound) {
                return None;
            }
            let lo: Vec<f64> = base.iter().enumerate().map(|(a, &m)| grid.angle(a, 0) + grid.step(a) * m as f64).collect();
            refine_in_cell(field, grid, &lo, opts, sign_change)
        })
        .collect();

    merge(field, grid, candidates, opts)
}

/// Refines a zero inside the cell with lower corner `lo`; returns the zero if
/// one is found within half a cell of the cell.
fn refine_in_cell(field: &FieldSpec, grid: &TorusGrid, lo: &[f64], opts: &LocateOptions, sign_change: bool) -> Option<Vec<f64>> {
    let d = grid.dim();
    let steps: Vec<f64> = (0..d).map(|a| grid.step(a)).collect();
    let center: Vec<f64> = lo.iter().zip(&steps).map(|(l, s)| l + 0.5 * s).collect();
    let inside = |p: &[f64]| p.iter().zip(&center).zip(&steps).all(|((x, c), s)| (x - c).abs() <= *s);
    let attempt = |start: &[f64]| -> Option<Vec<f64>> {
        let found = if field.is_pair() {
            descend(field, start, &steps, opts)
        } else {
            newton(field, start, &center, &steps, opts)
        }?;
        if inside(&found) {
            Some(found)
        } else {
            None
        }
    };
    if let Some(z) = attempt(&center) {
        return Some(z);
    }
    if !sign_change {
        return None;
    }
    // bisect the cell keeping sub-boxes whose corners still straddle zero
    let mut boxes = vec![(lo.to_vec(), steps.clone())];
    for _ in 0..opts.max_iter.min(30) {
        let mut next = Vec::new();
        for (blo, bstep) in &boxes {
            let half: Vec<f64> = bstep.iter().map(|s| 0.5 * s).collect();
            for c in 0..(1usize << d) {
                let sub_lo: Vec<f64> = (0..d).map(|a| blo[a] + if (c >> a) & 1 == 1 { half[a] } else { 0.0 }).collect();
                if box_straddles(field, &sub_lo, &half) {
                    next.push((sub_lo, half.clone()));
                }
            }
        }
        if next.is_empty() {
            return None;
        }
        next.truncate(64);
        boxes = next;
        let (blo, bstep) = &boxes[0];
        let mid: Vec<f64> = blo.iter().zip(bstep).map(|(l, s)| l + 0.5 * s).collect();
        if field.magnitude(&mid) < opts.tol {
            return Some(mid.iter().map(|&x| wrap_angle(x)).collect());
        }
        if let Some(z) = attempt(&mid) {
            return Some(z);
        }
    }
    None
}

fn box_straddles(field: &FieldSpec, lo: &[f64], step: &[f64]) -> bool {
    let d = lo.len();
    let vals: Vec<Vec<f64>> = (0..(1usize << d))
        .map(|c| {
            let p: Vec<f64> = (0..d).map(|a| lo[a] + if (c >> a) & 1 == 1 { step[a] } else { 0.0 }).collect();
            field.eval(&p)
        })
        .collect();
    (0..d).all(|c| {
        let lo = vals.iter().map(|v| v[c]).fold(f64::INFINITY, f64::min);
        let hi = vals.iter().map(|v| v[c]).fold(f64::NEG_INFINITY, f64::max);
        lo <= 0.0 && hi >= 0.0
    })
}

/// Damped Newton iteration with a finite-difference Jacobian, confined to a
/// window of 1.5 cells around `center`.
fn newton(field: &FieldSpec, start: &[f64], center: &[f64], steps: &[f64], opts: &LocateOptions) -> Option<Vec<f64>> {
    let d = start.len();
    let mut x = start.to_vec();
    let mut fx = field.eval(&x);
    for _ in 0..opts.max_iter {
        let r = norm(&fx);
        if r < opts.tol {
            return Some(x.iter().map(|&v| wrap_angle(v)).collect());
        }
        let eps = 1e-7f64.max(1e-4 * r.min(1.0) * steps[0]).min(1e-5);
        let mut jac = vec![0.0; d * d];
        for j in 0..d {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += eps;
            xm[j] -= eps;
            let fp = field.eval(&xp);
            let fm = field.eval(&xm);
            for i in 0..d {
                jac[i * d + j] = (fp[i] - fm[i]) / (2.0 * eps);
            }
        }
        let rhs: Vec<f64> = fx.iter().map(|v| -v).collect();
        let dx = crate::linalg::solve_real(&jac, &rhs, d)?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + t * b).collect();
            let ft = field.eval(&trial);
            if norm(&ft) < r {
                x = trial;
                fx = ft;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return None;
        }
        if x.iter().zip(center).zip(steps).any(|((v, c), s)| (v - c).abs() > 1.5 * s) {
            return None;
        }
    }
    None
}

/// Cyclic coordinate descent on `lambda = |a ^ b|` (tangent 2-fields).
fn descend(field: &FieldSpec, start: &[f64], steps: &[f64], opts: &LocateOptions) -> Option<Vec<f64>> {
    let d = start.len();
    let mut x = start.to_vec();
    let mut fx = field.magnitude(&x);
    let mut h: Vec<f64> = steps.to_vec();
    for _ in 0..opts.max_iter {
        if fx < opts.tol {
            return Some(x.iter().map(|&v| wrap_angle(v)).collect());
        }
        let mut moved: f64 = 0.0;
        for a in 0..d {
            // golden-section search on [x_a - h, x_a + h]
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let (mut lo, mut hi) = (x[a] - h[a], x[a] + h[a]);
            let at = |t: f64, x: &Vec<f64>| {
                let mut p = x.clone();
                p[a] = t;
                field.magnitude(&p)
            };
            let mut c1 = hi - g * (hi - lo);
            let mut c2 = lo + g * (hi - lo);
            let (mut f1, mut f2) = (at(c1, &x), at(c2, &x));
            for _ in 0..60 {
                if f1 < f2 {
                    hi = c2;
                    c2 = c1;
                    f2 = f1;
                    c1 = hi - g * (hi - lo);
                    f1 = at(c1, &x);
                } else {
                    lo = c1;
                    c1 = c2;
                    f1 = f2;
                    c2 = lo + g * (hi - lo);
                    f2 = at(c2, &x);
                }
            }
            let t = 0.5 * (lo + hi);
            let ft = at(t, &x);
            if ft < fx {
                moved = moved.max((t - x[a]).abs());
                x[a] = t;
                fx = ft;
            }
        }
        // next brackets follow the largest accepted move of this sweep
        let next = (2.0 * moved).max(1e-14);
        h.iter_mut().for_each(|v| *v = v.min(next).max(1e-14));
        if x.iter().zip(start).zip(steps).any(|((v, c), s)| (v - c).abs() > 1.5 * s) {
            return None;
        }
    }
    if fx < opts.tol {
        Some(x.iter().map(|&v| wrap_angle(v)).collect())
    } else {
        None
    }
}

fn merge(field: &FieldSpec, grid: &TorusGrid, mut candidates: Vec<Vec<f64>>, opts: &LocateOptions) -> Result<Vec<WeylNode>> {
    candidates.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    let diam = grid.cell_diameter();
    let d = grid.dim();
    // union-find over candidates closer than one cell diameter
    let n = candidates.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut j = i;
        while p[j] != r {
            let nx = p[j];
            p[j] = r;
            j = nx;
        }
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if torus_distance(&candidates[i], &candidates[j]) < diam {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[rj.max(ri)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut reps = Vec::new();
    for members in groups.values() {
        let first = &candidates[members[0]];
        for a in 0..d {
            let extent = members
                .iter()
                .map(|&m| periodic_delta(first[a], candidates[m][a]))
                .fold((0.0f64, 0.0f64), |(lo, hi), x| (lo.min(x), hi.max(x)));
            if extent.1 - extent.0 > 3.0 * grid.step(a) {
                return Err(Error::NotIsolated(format!("zero cluster spans more than 3 cells along axis {a}")));
            }
        }
        let best = members
            .iter()
            .map(|&m| (field.magnitude(&candidates[m]), m))
            .min_by(|x, y| x.0.total_cmp(&y.0))
            .unwrap();
        reps.push((candidates[best.1].clone(), best.0));
    }
    let positions: Vec<Vec<f64>> = reps.iter().map(|r| r.0.clone()).collect();
    let sep = min_separation(&positions);
    let radius = grid.min_step().min(0.5 * sep);
    let _ = opts;
    Ok(reps
        .into_iter()
        .map(|(position, residual)| WeylNode { position, radius, charge: NodeCharge::Unknown, residual })
        .collect())
}

/// Minimum pairwise toroidal distance; `pi` (half the period) for fewer than
/// two nodes.
pub fn min_separation(positions: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            best = best.min(torus_distance(&positions[i], &positions[j]));
        }
    }
    if best.is_finite() {
        best
    } else {
        PI
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trig() -> FieldSpec {
        FieldSpec::analytic(3, "trig", |k| vec![k[0].sin(), k[1].sin(), 2.0 - k[0].cos() - k[1].cos() - k[2].cos()])
    }

    #[test]
    fn constant_field_has_no_nodes() {
        let f = FieldSpec::analytic(3, "c", |_| vec![1.0, 0.0, 0.0]);
        let g = TorusGrid::cubic(3, 8).unwrap();
        assert!(locate_zeros(&f, &g, 1e-8).unwrap().is_empty());
    }

    #[test]
    fn trig_model_nodes() {
        // zeros solve sin kx = sin ky = 0 and cos kz = 2 - cos kx - cos ky,
        // i.e. kx = ky = 0, kz = +-pi/2
        let g = TorusGrid::cubic(3, 16).unwrap();
        let nodes = locate_zeros(&trig(), &g, 1e-10).unwrap();
        assert_eq!(nodes.len(), 2);
        let mut z: Vec<f64> = nodes.iter().map(|n| n.position[2]).collect();
        z.sort_by(f64::total_cmp);
        assert!((z[0] - PI / 2.0).abs() < 1e-6 && (z[1] - 1.5 * PI).abs() < 1e-6);
        for n in &nodes {
            assert!(torus_distance(&n.position[..2], &[0.0, 0.0]) < 1e-6);
            assert!(n.residual < 1e-10);
            assert!(n.radius <= g.min_step() && n.radius <= 0.5 * PI);
        }
    }

    #[test]
    fn nodal_surface_is_rejected() {
        let f = FieldSpec::analytic(3, "plane", |k| vec![k[0].sin(), 0.0, 0.0]);
        let g = TorusGrid::cubic(3, 8).unwrap();
        assert!(matches!(locate_zeros(&f, &g, 1e-8), Err(Error::NotIsolated(_)) | Err(Error::VanishesOnVertex(_))));
    }

    #[test]
    fn separation_examples() {
        let a = vec![0.0, 0.0, PI / 2.0];
        let b = vec![0.0, 0.0, -PI / 2.0];
        assert!((min_separation(&[a.clone(), b]) - PI).abs() < 1e-12);
        assert_eq!(min_separation(&[a]), PI);
        assert!((min_separation(&[vec![0.0; 3], vec![0.0, 0.0, 1.5 * PI]]) - PI / 2.0).abs() < 1e-12);
    }
}
