//! Slice characteristic numbers computed independently of the degree sum:
//! lattice Chern numbers, SU(2) winding numbers, curvature integrals on
//! spheres, and piecewise-constant slice profiles.

use crate::charge::{slice_degree_detailed, DEGREE_RESIDUAL};
use crate::clifford::{gamma_rep, pauli, su2_from_unit};
use crate::field::FieldSpec;
use crate::grid::{all_permutations, permutation_sign, wrap_angle, TorusGrid};
use crate::linalg::{det_real, norm, CMatrix, C64, I, ZERO};
use crate::{Error, Result};
use rayon::prelude::*;
use std::f64::consts::{PI, TAU};

/// Plaquette phases above this magnitude trigger lattice refinement.
const PLAQUETTE_LIMIT: f64 = PI / 2.0;

fn coorientation(direction: usize) -> i64 {
    if direction % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Valence (`-1`) eigenvector of `n . sigma`: the normalized largest column
/// of `(1 - n . sigma) / 2`.
fn valence_vector(n: &[f64]) -> [C64; 2] {
    let c0 = [C64::new(0.5 * (1.0 - n[2]), 0.0), C64::new(-0.5 * n[0], -0.5 * n[1])];
    let c1 = [C64::new(-0.5 * n[0], 0.5 * n[1]), C64::new(0.5 * (1.0 + n[2]), 0.0)];
    let pick = if n[2] <= 0.0 { c0 } else { c1 };
    let r = (pick[0].norm_sqr() + pick[1].norm_sqr()).sqrt();
    [pick[0] / r, pick[1] / r]
}

/// Lattice Chern number of the valence line bundle of `h_hat . sigma` on the
/// 2-subtorus `k_direction = coordinate` (d = 3).
///
/// Link variables `U_mu = <u(k)|u(k+mu)>/|.|` give gauge-invariant plaquette
/// phases. The 2-sphere is oriented through the valence Bloch-sphere
/// identification `n <-> (-1)-eigenspace of n . sigma`, under which the
/// Chern number equals the degree of `h_hat` with the slice co-orientation of
/// [`crate::charge::slice_degree`].
pub fn lattice_chern(field: &FieldSpec, direction: usize, coordinate: f64, grid: &TorusGrid) -> Result<i64> {
    lattice_chern_gauged(field, direction, coordinate, grid, &|_| 0.0)
}

/// As [`lattice_chern`], with valence vectors multiplied by `exp(i phase(k))`.
pub fn lattice_chern_gauged(
    field: &FieldSpec,
    direction: usize,
    coordinate: f64,
    grid: &TorusGrid,
    phase: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<i64> {
    if grid.dim() != 3 || field.dim != 3 {
        return Err(Error::UnsupportedDimension(grid.dim()));
    }
    if direction >= 3 {
        return Err(Error::InvalidArgument("slice direction out of range".into()));
    }
    let mut factor = 1;
    loop {
        match chern_at(field, direction, coordinate, grid, factor, phase) {
            Err(Error::PlaquetteNearPi) if factor < 16 => factor *= 2,
            other => return other,
        }
    }
}

fn chern_at(
    field: &FieldSpec,
    direction: usize,
    coordinate: f64,
    grid: &TorusGrid,
    factor: usize,
    phase: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<i64> {
    let axes: Vec<usize> = (0..3).filter(|&a| a != direction).collect();
    let (na, nb) = (grid.sizes()[axes[0]] * factor, grid.sizes()[axes[1]] * factor);
    let point = |i: usize, j: usize| {
        let mut k = vec![0.0; 3];
        k[direction] = coordinate;
        k[axes[0]] = grid.angle(axes[0], 0) + grid.step(axes[0]) * i as f64 / factor as f64;
        k[axes[1]] = grid.angle(axes[1], 0) + grid.step(axes[1]) * j as f64 / factor as f64;
        k
    };
    let states: Vec<Result<[C64; 2]>> = (0..na * nb)
        .into_par_iter()
        .map(|l| {
            let k = point(l / nb, l % nb);
            let h = field.eval(&k);
            let r = norm(&h);
            if !(r > 1e-9) {
                return Err(Error::SliceHitsNode { axis: direction, coordinate });
            }
            let n: Vec<f64> = h.iter().map(|x| x / r).collect();
            let u = valence_vector(&n);
            let g = C64::from_polar(1.0, phase(&k));
            Ok([u[0] * g, u[1] * g])
        })
        .collect();
    let states: Vec<[C64; 2]> = states.into_iter().collect::<Result<_>>()?;
    let at = |i: usize, j: usize| &states[(i % na) * nb + (j % nb)];
    let link = |a: &[C64; 2], b: &[C64; 2]| {
        let z = a[0].conj() * b[0] + a[1].conj() * b[1];
        z / z.norm()
    };
    let phases: Vec<f64> = (0..na * nb)
        .into_par_iter()
        .map(|l| {
            let (i, j) = (l / nb, l % nb);
            let u1 = link(at(i, j), at(i + 1, j));
            let u2 = link(at(i + 1, j), at(i + 1, j + 1));
            let u3 = link(at(i, j + 1), at(i + 1, j + 1));
            let u4 = link(at(i, j), at(i, j + 1));
            (u1 * u2 / (u3 * u4)).arg()
        })
        .collect();
    if phases.iter().any(|p| !p.is_finite() || p.abs() > PLAQUETTE_LIMIT) {
        return Err(Error::PlaquetteNearPi);
    }
    let total: f64 = phases.iter().sum::<f64>() / TAU;
    // standard link sum is the Chern number of image orientation -n; flip to
    // the valence identification
    let value = -total * coorientation(direction) as f64;
    Ok(value.round() as i64)
}

/// SU(2)-valued samples on a periodic 3-torus lattice (last axis fastest).
#[derive(Debug, Clone)]
pub struct Su2Lattice {
    pub sizes: [usize; 3],
    /// Lattice spacing per axis.
    pub steps: [f64; 3],
    pub values: Vec<CMatrix>,
}

impl Su2Lattice {
    pub fn from_fn(sizes: [usize; 3], f: impl Fn(&[f64; 3]) -> CMatrix + Sync) -> Self {
        let steps = [TAU / sizes[0] as f64, TAU / sizes[1] as f64, TAU / sizes[2] as f64];
        let values = (0..sizes.iter().product::<usize>())
            .into_par_iter()
            .map(|l| {
                let i = l / (sizes[1] * sizes[2]);
                let j = (l / sizes[2]) % sizes[1];
                let k = l % sizes[2];
                f(&[steps[0] * i as f64, steps[1] * j as f64, steps[2] * k as f64])
            })
            .collect();
        Su2Lattice { sizes, steps, values }
    }

    /// Largest geodesic distance on `S^3 = SU(2)` between lattice neighbours.
    pub fn max_step_angle(&self) -> f64 {
        let [_, n1, n2] = self.sizes;
        (0..self.values.len())
            .into_par_iter()
            .map(|l| {
                let (i, j, k) = ((l / (n1 * n2)) as i64, ((l / n2) % n1) as i64, (l % n2) as i64);
                let u = self.at(i, j, k).adjoint();
                [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
                    .iter()
                    .map(|&(a, b, c)| {
                        let v = self.at(i + a, j + b, k + c);
                        let cos = 0.5 * (&u * v).trace().re / (0.5 * (&u * &u.adjoint()).trace().re).max(1e-300);
                        cos.clamp(-1.0, 1.0).acos()
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    fn at(&self, i: i64, j: i64, k: i64) -> &CMatrix {
        let [a, b, c] = self.sizes.map(|x| x as i64);
        &self.values[((i.rem_euclid(a) * b + j.rem_euclid(b)) * c + k.rem_euclid(c)) as usize]
    }
}

/// Projects a 2x2 matrix of the form `[[alpha, -conj(beta)], [beta, conj(alpha)]]`
/// back to SU(2).
fn reproject(u: &CMatrix) -> Result<CMatrix> {
    let alpha = 0.5 * (u[(0, 0)] + u[(1, 1)].conj());
    let beta = 0.5 * (u[(1, 0)] - u[(0, 1)].conj());
    let r = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
    if !(r > 1e-12) || u.dim() != 2 {
        return Err(Error::InvalidArgument("sample is not an SU(2) matrix".into()));
    }
    let (a, b) = (alpha / r, beta / r);
    Ok(CMatrix::from_rows(&[&[a, -b.conj()], &[b, a.conj()]]))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Winding {
    pub value: i64,
    pub raw: f64,
    pub residual: f64,
}

/// `-(1/24 pi^2) int tr((U^-1 dU)^3)` over the lattice, oriented by axis order.
pub fn wzw_winding(samples: &Su2Lattice) -> Result<i64> {
    Ok(wzw_winding_detailed(samples, DEGREE_RESIDUAL)?.value)
}

pub fn wzw_winding_detailed(samples: &Su2Lattice, gate: f64) -> Result<Winding> {
    let u: Vec<CMatrix> = samples.values.iter().map(reproject).collect::<Result<_>>()?;
    let s = Su2Lattice { sizes: samples.sizes, steps: samples.steps, values: u };
    let [n0, n1, n2] = s.sizes;
    let vol = s.steps.iter().product::<f64>();
    let density: Vec<f64> = (0..n0 * n1 * n2)
        .into_par_iter()
        .map(|l| {
            let (i, j, k) = ((l / (n1 * n2)) as i64, ((l / n2) % n1) as i64, (l % n2) as i64);
            let ui = s.at(i, j, k).adjoint();
            // fourth-order central difference
            let diff = |di: i64, dj: i64, dk: i64, h: f64| {
                let d1 = s.at(i + di, j + dj, k + dk) - s.at(i - di, j - dj, k - dk);
                let d2 = s.at(i + 2 * di, j + 2 * dj, k + 2 * dk) - s.at(i - 2 * di, j - 2 * dj, k - 2 * dk);
                &ui * &(&d1.scale_re(8.0) - &d2).scale_re(1.0 / (12.0 * h))
            };
            let a0 = diff(1, 0, 0, s.steps[0]);
            let a1 = diff(0, 1, 0, s.steps[1]);
            let a2 = diff(0, 0, 1, s.steps[2]);
            // eps^{abc} tr(A_a A_b A_c) = 3 tr(A_0 [A_1, A_2])
            (&a0 * &a1.commutator(&a2)).trace().re * 3.0
        })
        .collect();
    let raw = -density.iter().sum::<f64>() * vol / (24.0 * PI * PI);
    let value = raw.round();
    let residual = (raw - value).abs();
    if residual >= gate {
        return Err(Error::WindingResidual { raw, residual });
    }
    Ok(Winding { value: value as i64, raw, residual })
}

/// Largest angle, as seen from `S^3`, between neighbouring samples that
/// [`slice_wzw`] accepts before doubling the lattice. A texture that is not
/// resolved can still round cleanly to a wrong integer.
const MAX_WZW_STEP_ANGLE: f64 = PI / 6.0;

/// WZW winding of the chiral unitary of `h_hat` (d = 4) on the 3-subtorus
/// `k_direction = coordinate`, co-oriented like the slice degree. The lattice
/// is doubled until neighbouring samples are close and the residual gate
/// passes.
pub fn slice_wzw(field: &FieldSpec, direction: usize, coordinate: f64, grid: &TorusGrid) -> Result<i64> {
    if grid.dim() != 4 || field.dim != 4 {
        return Err(Error::UnsupportedDimension(grid.dim()));
    }
    let axes: Vec<usize> = (0..4).filter(|&a| a != direction).collect();
    let mut factor = 1;
    loop {
        let sizes = [0, 1, 2].map(|j| grid.sizes()[axes[j]] * factor);
        let mut hit = false;
        let lattice = Su2Lattice::from_fn(sizes, |x| {
            let mut k = vec![0.0; 4];
            k[direction] = coordinate;
            for j in 0..3 {
                k[axes[j]] = grid.angle(axes[j], 0) + x[j];
            }
            let h = field.eval(&k);
            let r = norm(&h);
            if !(r > 1e-9) {
                return CMatrix::zeros(2);
            }
            su2_from_unit(&h.iter().map(|v| v / r).collect::<Vec<_>>())
        });
        if lattice.values.iter().any(|m| m.max_abs() == 0.0) {
            hit = true;
        }
        if hit {
            return Err(Error::SliceHitsNode { axis: direction, coordinate });
        }
        if lattice.max_step_angle() > MAX_WZW_STEP_ANGLE && factor < 16 {
            factor *= 2;
            continue;
        }
        match wzw_winding_detailed(&lattice, DEGREE_RESIDUAL) {
            Ok(w) => return Ok(w.value * coorientation(direction)),
            Err(Error::WindingResidual { .. }) if factor < 16 => factor *= 2,
            Err(e) => return Err(e),
        }
    }
}

/// `(1/2 pi i) int_{S^2} tr(P dP ^ dP)` for `P = (1 + s n . sigma)/2` with
/// `s = +1`, or `s = -1` when `flip` is set; midpoint rule on an `n x n`
/// `(theta, phi)` grid, outward orientation.
pub fn hopf_c1_calibration(n: usize, flip: bool) -> f64 {
    let s = if flip { -1.0 } else { 1.0 };
    let sig = pauli();
    let contract = |v: [f64; 3]| -> CMatrix {
        let mut m = CMatrix::zeros(2);
        for (g, x) in sig.iter().zip(v) {
            m = &m + &g.scale_re(x);
        }
        m
    };
    let (dt, dp) = (PI / n as f64, TAU / n as f64);
    let cells: Vec<C64> = (0..n * n)
        .into_par_iter()
        .map(|l| {
            let t = (l / n) as f64 * dt + 0.5 * dt;
            let p = (l % n) as f64 * dp + 0.5 * dp;
            let nv = [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()];
            let nt = [t.cos() * p.cos(), t.cos() * p.sin(), -t.sin()];
            let np = [-t.sin() * p.sin(), t.sin() * p.cos(), 0.0];
            let proj = &CMatrix::identity(2).scale_re(0.5) + &contract(nv).scale_re(0.5 * s);
            let pt = contract(nt).scale_re(0.5 * s);
            let pp = contract(np).scale_re(0.5 * s);
            (&proj * &pt.commutator(&pp)).trace() * (dt * dp)
        })
        .collect();
    let total: C64 = cells.iter().sum();
    (total / (TAU * I)).re
}

fn s4_point(t: &[f64; 4]) -> [f64; 5] {
    let (s1, s2, s3) = (t[0].sin(), t[1].sin(), t[2].sin());
    [t[0].cos(), s1 * t[1].cos(), s1 * s2 * t[2].cos(), s1 * s2 * s3 * t[3].cos(), s1 * s2 * s3 * t[3].sin()]
}

/// `(1/8 pi^2) int_{S^4} tr(P dP dP dP dP)` for the rank-2 projector
/// `P = (1 + s n . gamma)/2` pulled back along the identity of `S^4` (or its
/// reflection in the first axis). Hyperspherical chart with midpoint cells
/// and fine central differences, oriented by the outward normal.
pub fn quaternionic_c2_calibration(n: usize, conjugate_band: bool, reflect: bool) -> f64 {
    let rep = gamma_rep(5).expect("d = 5 representation");
    let s = if conjugate_band { -1.0 } else { 1.0 };
    let r = if reflect { -1.0 } else { 1.0 };
    let h = [PI / n as f64, PI / n as f64, PI / n as f64, TAU / n as f64];
    let map = |t: &[f64; 4]| {
        let mut x = s4_point(t);
        x[0] *= r;
        x
    };
    let projector = |x: &[f64; 5]| -> CMatrix {
        &CMatrix::identity(4).scale_re(0.5) + &rep.contract(x).scale_re(0.5 * s)
    };
    let perms = all_permutations(4);
    let total: f64 = (0..n * n * n * n)
        .into_par_iter()
        .map(|l| {
            let idx = [l / (n * n * n), (l / (n * n)) % n, (l / n) % n, l % n];
            let t: [f64; 4] = [0, 1, 2, 3].map(|a| (idx[a] as f64 + 0.5) * h[a]);
            let x = map(&t);
            let eps = 1e-5;
            let mut dp = Vec::with_capacity(4);
            // the chart is oriented on the domain sphere, before any reflection
            let mut frame = s4_point(&t).to_vec();
            for a in 0..4 {
                let (mut tp, mut tm) = (t, t);
                tp[a] += eps;
                tm[a] -= eps;
                dp.push((&projector(&map(&tp)) - &projector(&map(&tm))).scale_re(0.5 / eps));
                let (xp, xm) = (s4_point(&tp), s4_point(&tm));
                frame.extend(xp.iter().zip(&xm).map(|(p, m)| (p - m) / (2.0 * eps)));
            }
            let orient = det_real(&frame, 5).signum();
            let p = projector(&x);
            let mut acc = ZERO;
            for perm in &perms {
                let mut m = p.clone();
                for &a in perm {
                    m = &m * &dp[a];
                }
                acc += m.trace() * permutation_sign(perm) as f64;
            }
            acc.re * orient * h.iter().product::<f64>()
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    total / (8.0 * PI * PI)
}

/// The kind of slice characteristic number for a dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum InvariantKind {
    C1,
    DD,
    C2,
}

impl InvariantKind {
    pub fn for_dim(d: usize) -> Result<Self> {
        match d {
            3 => Ok(InvariantKind::C1),
            4 => Ok(InvariantKind::DD),
            5 => Ok(InvariantKind::C2),
            _ => Err(Error::UnsupportedDimension(d)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ProfileSample {
    pub coordinate: f64,
    pub value: i64,
    /// Index of the node coordinate at the lower end of the sample's interval
    /// (`None` when there are no node coordinates).
    pub interval: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Jump {
    pub coordinate: f64,
    /// Value just above minus value just below.
    pub delta: i64,
}

/// Piecewise-constant slice invariant along one axis.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SliceProfile {
    pub direction: usize,
    pub kind: InvariantKind,
    /// Distinct node coordinates along the axis, sorted in `[0, 2pi)`.
    pub node_coordinates: Vec<f64>,
    pub samples: Vec<ProfileSample>,
    pub jumps: Vec<Jump>,
}

impl SliceProfile {
    /// Profile value at an arbitrary coordinate (from the interval sample).
    pub fn value_at(&self, coordinate: f64) -> i64 {
        let c = wrap_angle(coordinate);
        let r = self.node_coordinates.len();
        if r == 0 {
            return self.samples[0].value;
        }
        let below = self.node_coordinates.iter().rposition(|&x| x < c).unwrap_or(r - 1);
        self.samples[below].value
    }
}

/// Merges sorted coordinates closer than `tol`.
fn distinct_coordinates(mut coords: Vec<f64>, tol: f64) -> Vec<f64> {
    coords.iter_mut().for_each(|c| *c = wrap_angle(*c));
    coords.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for c in coords {
        if out.last().map_or(true, |&l| c - l > tol) {
            out.push(c);
        }
    }
    if out.len() > 1 && out[0] + TAU - out[out.len() - 1] <= tol {
        out.pop();
    }
    out
}

/// Measures the slice invariant at the midpoint of every interval between
/// consecutive node coordinates along `direction` (cyclically), and records
/// the jump at each node coordinate.
pub fn profile(field: &FieldSpec, direction: usize, grid: &TorusGrid, node_positions: &[Vec<f64>]) -> Result<SliceProfile> {
    profile_with(field, direction, grid, node_positions, DEGREE_RESIDUAL)
}

/// [`profile`] with an explicit degree residual gate.
pub fn profile_with(
    field: &FieldSpec,
    direction: usize,
    grid: &TorusGrid,
    node_positions: &[Vec<f64>],
    gate: f64,
) -> Result<SliceProfile> {
    let kind = InvariantKind::for_dim(grid.dim())?;
    let coords = distinct_coordinates(node_positions.iter().map(|p| p[direction]).collect(), 1e-9);
    let r = coords.len();
    let mut sample_coords = Vec::new();
    if r == 0 {
        sample_coords.push((wrap_angle(grid.angle(direction, 0) + 0.5 * grid.step(direction)), None));
    } else {
        for j in 0..r {
            let lo = coords[j];
            let hi = if j + 1 < r { coords[j + 1] } else { coords[0] + TAU };
            sample_coords.push((wrap_angle(0.5 * (lo + hi)), Some(j)));
        }
    }
    let values: Vec<Result<i64>> = sample_coords
        .iter()
        .map(|&(c, _)| Ok(slice_degree_detailed(field, direction, c, grid, gate)?.value))
        .collect();
    let mut samples = Vec::with_capacity(r.max(1));
    for (&(coordinate, interval), v) in sample_coords.iter().zip(values) {
        samples.push(ProfileSample { coordinate, value: v?, interval });
    }
    let jumps = (0..r)
        .map(|j| {
            let below = samples[(j + r - 1) % r].value;
            Jump { coordinate: coords[j], delta: samples[j].value - below }
        })
        .collect();
    Ok(SliceProfile { direction, kind, node_coordinates: coords, samples, jumps })
}
