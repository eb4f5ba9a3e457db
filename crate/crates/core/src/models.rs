//! Field builders with known nodes and charges.

use crate::field::{DeclaredNode, FieldSpec};
use crate::grid::{periodic_delta, torus_distance, wrap_angle};
use crate::linalg::{dot, norm};
use crate::{Error, Result, Ring};
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

/// `h = (sin k_x, sin k_y, m - cos k_x - cos k_y - cos k_z)`, nodes at
/// `(0, 0, +-arccos(m - 2))` with charges `+1` (upper) and `-1` (lower).
pub fn trig_weyl_field(m: f64) -> Result<FieldSpec> {
    trig_dirac_field(3, m)
}

/// `h = (sin k_1, ..., sin k_{d-1}, m - sum_i cos k_i)` for
/// `d - 2 < m < d`: two nodes at `k_d = +-arccos(m - d + 1)`, the other
/// coordinates zero. The Jacobian there is `diag(1, ..., 1, sin k_d)`.
pub fn trig_dirac_field(d: usize, m: f64) -> Result<FieldSpec> {
    if !(3..=5).contains(&d) {
        return Err(Error::UnsupportedDimension(d));
    }
    let lo = d as f64 - 2.0;
    if !(m > lo && m < d as f64) {
        return Err(Error::InvalidArgument(format!("mass {m} outside ({lo}, {d}) gives no isolated node pair")));
    }
    let kz = (m - d as f64 + 1.0).acos();
    let node = |z: f64, q: i64| {
        let mut p = vec![0.0; d];
        p[d - 1] = wrap_angle(z);
        DeclaredNode { position: p, charge: q, ring: Ring::Z }
    };
    Ok(FieldSpec::analytic(d, &format!("trig(d={d}, m={m})"), move |k| {
        let mut v: Vec<f64> = k[..d - 1].iter().map(|x| x.sin()).collect();
        v.push(m - k.iter().map(|x| x.cos()).sum::<f64>());
        v
    })
    .with_declared(vec![node(kz, 1), node(-kz, -1)]))
}

/// Nowhere-vanishing constant field `e_axis`.
pub fn constant_field(d: usize, axis: usize) -> Result<FieldSpec> {
    if !(3..=5).contains(&d) {
        return Err(Error::UnsupportedDimension(d));
    }
    if axis >= d {
        return Err(Error::InvalidArgument("axis out of range".into()));
    }
    Ok(FieldSpec::analytic(d, "constant", move |_| {
        let mut v = vec![0.0; d];
        v[axis] = 1.0;
        v
    }))
}

/// d = 3 field independent of `k_z` whose restriction to every `k_z` slice
/// has degree `q`: with `rho e^{i phi} = sin k_x + i sin k_y`,
/// `h = (rho cos(q phi), rho sin(q phi), cos k_x + cos k_y - 1)`.
pub fn surface_degree_field(q: i64) -> FieldSpec {
    FieldSpec::analytic(3, &format!("surface-degree({q})"), move |k| {
        let (x, y) = (k[0].sin(), k[1].sin());
        let rho = (x * x + y * y).sqrt();
        let phi = y.atan2(x);
        let a = q as f64 * phi;
        vec![rho * a.cos(), rho * a.sin(), k[0].cos() + k[1].cos() - 1.0]
    })
}

/// Degree-one map `T^3 -> S^3` (as a unit 4-vector): the ball of radius
/// `0.9 pi` about the origin wraps once, everything else maps to `-e_4`.
pub fn su2_wrap(k: &[f64]) -> Vec<f64> {
    let big_r = 0.9 * PI;
    let x: Vec<f64> = k.iter().take(3).map(|&a| periodic_delta(0.0, a)).collect();
    let r = norm(&x);
    if r >= big_r {
        return vec![0.0, 0.0, 0.0, -1.0];
    }
    let s = r / big_r;
    let alpha = PI * s - 0.5 * (TAU * s).sin();
    let scale = if r > 0.0 { alpha.sin() / r } else { 0.0 };
    vec![-x[0] * scale, x[1] * scale, x[2] * scale, alpha.cos()]
}

/// Quintic smoothstep on `[0, 1]`, clamped.
fn smooth(x: f64) -> f64 {
    let t = x.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Unit collapse map of a cross-section: `-tau` on the axis, `tau` on the
/// wall, turning through `pi * rho` towards the transverse offset direction.
fn collapse(offset: &[f64], rho: f64, tau: &[f64]) -> Vec<f64> {
    let n = norm(offset);
    let (c, s) = ((PI * rho).cos(), (PI * rho).sin());
    let scale = if n > 0.0 { s / n } else { 0.0 };
    tau.iter().zip(offset).map(|(t, x)| -c * t + scale * x).collect()
}

/// Longitudinal weight along a tube of axis length `length` with tapers of
/// half-width `delta`: 0 beyond the ends, 1/2 exactly at both ends, 1 inside.
fn taper_weight(t: f64, length: f64, delta: f64) -> f64 {
    smooth((t + delta) / (2.0 * delta)) * smooth((length + delta - t) / (2.0 * delta))
}

type Mat = Vec<f64>;

fn identity(d: usize) -> Mat {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

fn mat_mul(a: &Mat, b: &Mat, d: usize) -> Mat {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            let x = a[i * d + k];
            if x != 0.0 {
                for j in 0..d {
                    out[i * d + j] += x * b[k * d + j];
                }
            }
        }
    }
    out
}

fn mat_vec(a: &Mat, v: &[f64]) -> Vec<f64> {
    let d = v.len();
    (0..d).map(|i| (0..d).map(|j| a[i * d + j] * v[j]).sum()).collect()
}

/// Rotation by `theta` in the plane of orthonormal `u, w`, taking `u`
/// towards `w`.
fn plane_rotation(u: &[f64], w: &[f64], theta: f64) -> Mat {
    let d = u.len();
    let (c, s) = (theta.cos(), theta.sin());
    let mut m = identity(d);
    for i in 0..d {
        for j in 0..d {
            m[i * d + j] += (c - 1.0) * (u[i] * u[j] + w[i] * w[j]) + s * (w[i] * u[j] - u[i] * w[j]);
        }
    }
    m
}

/// Minimal rotation taking unit `a` to unit `b` (`a . b > -1`).
fn rotation_between(a: &[f64], b: &[f64]) -> Mat {
    let d = a.len();
    let c = dot(a, b);
    let s: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
    let mut m = identity(d);
    for i in 0..d {
        for j in 0..d {
            m[i * d + j] += -s[i] * s[j] / (1.0 + c) + 2.0 * b[i] * a[j];
        }
    }
    m
}

/// A rotation taking unit `a` to unit `b`, valid even for `a = -b`.
fn any_rotation(a: &[f64], b: &[f64]) -> Mat {
    let d = a.len();
    if dot(a, b) > -0.5 {
        return rotation_between(a, b);
    }
    // half turn in a plane containing b, composed with a -> -b
    let nb: Vec<f64> = b.iter().map(|x| -x).collect();
    let mut f = vec![0.0; d];
    let j = (0..d).min_by(|&x, &y| b[x].abs().total_cmp(&b[y].abs())).unwrap();
    f[j] = 1.0;
    let p = dot(&f, b);
    f.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
    let nf = norm(&f);
    f.iter_mut().for_each(|x| *x /= nf);
    mat_mul(&plane_rotation(&nb, &f, PI), &rotation_between(a, &nb), d)
}

/// Axis-aligned path on the covering space of `T^d` from the tail node to
/// the head node, thickened to a tube.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DipolePath {
    /// Consecutive waypoints differ along exactly one axis.
    pub waypoints: Vec<Vec<f64>>,
    pub tube_radius: f64,
    /// Length over which the collapse map is switched on at each end.
    #[serde(default = "default_taper")]
    pub taper: f64,
    /// Radius of the quarter arcs rounding the corners; defaults to twice the
    /// tube radius.
    #[serde(default)]
    pub corner_radius: Option<f64>,
}

fn default_taper() -> f64 {
    0.4
}

impl DipolePath {
    pub fn straight(from: Vec<f64>, axis: usize, length: f64, tube_radius: f64) -> Self {
        let mut to = from.clone();
        to[axis] += length;
        DipolePath { waypoints: vec![from, to], tube_radius, taper: default_taper(), corner_radius: None }
    }

    pub fn tail(&self) -> Vec<f64> {
        self.waypoints[0].iter().map(|&x| wrap_angle(x)).collect()
    }

    pub fn head(&self) -> Vec<f64> {
        self.waypoints.last().unwrap().iter().map(|&x| wrap_angle(x)).collect()
    }

    /// Covering-space displacement from tail to head.
    pub fn displacement(&self) -> Vec<f64> {
        let (a, b) = (&self.waypoints[0], self.waypoints.last().unwrap());
        b.iter().zip(a).map(|(x, y)| x - y).collect()
    }
}

#[derive(Debug, Clone)]
enum Piece {
    Segment { start: Vec<f64>, dir: Vec<f64>, len: f64, t0: f64, frame: Mat },
    Arc { center: Vec<f64>, u_in: Vec<f64>, u_out: Vec<f64>, rho: f64, t0: f64, frame: Mat },
}

/// Closest point data on the tube axis.
struct Foot {
    dist: f64,
    t: f64,
    offset: Vec<f64>,
    tangent: Vec<f64>,
    /// Parallel transport taking the local tangent to the initial tangent.
    frame: Mat,
}

#[derive(Debug, Clone)]
struct TubeGeometry {
    d: usize,
    pieces: Vec<Piece>,
    length: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
    tangent0: Vec<f64>,
}

impl TubeGeometry {
    fn build(path: &DipolePath, d: usize) -> Result<Self> {
        let radius = path.tube_radius;
        let delta = path.taper;
        if !(radius > 0.0) || !(delta > 0.0) {
            return Err(Error::InvalidArgument("tube radius and taper must be positive".into()));
        }
        if radius >= PI / 2.0 {
            return Err(Error::TubeTooCurved("tube radius must stay below pi/2".into()));
        }
        let rho = path.corner_radius.unwrap_or(2.0 * radius);
        if rho < 1.5 * radius {
            return Err(Error::TubeTooCurved(format!("corner radius {rho} below 1.5 x tube radius")));
        }
        if path.waypoints.len() < 2 || path.waypoints.iter().any(|w| w.len() != d) {
            return Err(Error::InvalidArgument(format!("a path needs at least two {d}-dimensional waypoints")));
        }
        // axis-aligned runs, merging collinear ones
        let mut runs: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
        for w in path.waypoints.windows(2) {
            let diff: Vec<f64> = w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect();
            let moving: Vec<usize> = (0..d).filter(|&a| diff[a].abs() > 1e-12).collect();
            if moving.len() != 1 {
                return Err(Error::InvalidArgument("consecutive waypoints must differ along exactly one axis".into()));
            }
            let a = moving[0];
            let mut dir = vec![0.0; d];
            dir[a] = diff[a].signum();
            let len = diff[a].abs();
            if let Some(last) = runs.last_mut() {
                let c = dot(&last.1, &dir);
                if c > 0.5 {
                    last.2 += len;
                    continue;
                }
                if c < -0.5 {
                    return Err(Error::TubeTooCurved("path reverses direction".into()));
                }
            }
            runs.push((w[0].clone(), dir, len));
        }
        let n = runs.len();
        for (i, r) in runs.iter().enumerate() {
            let cuts = rho * ((i > 0) as usize + (i + 1 < n) as usize) as f64;
            if r.2 < cuts {
                return Err(Error::TubeTooCurved(format!("run {i} of length {} cannot fit its corners", r.2)));
            }
        }
        let ghost = 2.0 * delta;
        let mut pieces = Vec::new();
        let mut frame = identity(d);
        let mut t = -ghost;
        let first = &runs[0];
        pieces.push(Piece::Segment {
            start: first.0.iter().zip(&first.1).map(|(p, u)| p - ghost * u).collect(),
            dir: first.1.clone(),
            len: ghost,
            t0: t,
            frame: frame.clone(),
        });
        t = 0.0;
        for (i, (start, dir, len)) in runs.iter().enumerate() {
            let s0 = if i > 0 { rho } else { 0.0 };
            let s1 = if i + 1 < n { rho } else { 0.0 };
            let seg_start: Vec<f64> = start.iter().zip(dir).map(|(p, u)| p + s0 * u).collect();
            let seg_len = len - s0 - s1;
            pieces.push(Piece::Segment { start: seg_start, dir: dir.clone(), len: seg_len, t0: t, frame: frame.clone() });
            t += seg_len;
            if i + 1 < n {
                let corner: Vec<f64> = start.iter().zip(dir).map(|(p, u)| p + len * u).collect();
                let u_out = runs[i + 1].1.clone();
                let center: Vec<f64> = (0..d).map(|a| corner[a] - rho * dir[a] + rho * u_out[a]).collect();
                pieces.push(Piece::Arc { center, u_in: dir.clone(), u_out: u_out.clone(), rho, t0: t, frame: frame.clone() });
                t += rho * PI / 2.0;
                frame = mat_mul(&frame, &plane_rotation(dir, &u_out, -PI / 2.0), d);
            }
        }
        let length = t;
        let last = runs.last().unwrap();
        let end: Vec<f64> = last.0.iter().zip(&last.1).map(|(p, u)| p + last.2 * u).collect();
        pieces.push(Piece::Segment { start: end, dir: last.1.clone(), len: ghost, t0: t, frame });
        let margin = ghost + radius;
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for w in &path.waypoints {
            for a in 0..d {
                lo[a] = lo[a].min(w[a] - margin);
                hi[a] = hi[a].max(w[a] + margin);
            }
        }
        let geom = TubeGeometry { d, pieces, length, lo, hi, tangent0: runs[0].1.clone() };
        geom.check_self_avoiding(radius)?;
        Ok(geom)
    }

    fn point_at(&self, t: f64) -> Vec<f64> {
        for p in &self.pieces {
            match p {
                Piece::Segment { start, dir, len, t0, .. } => {
                    if t <= t0 + len + 1e-12 {
                        let s = (t - t0).clamp(0.0, *len);
                        return start.iter().zip(dir).map(|(a, u)| a + s * u).collect();
                    }
                }
                Piece::Arc { center, u_in, u_out, rho, t0, .. } => {
                    if t <= t0 + rho * PI / 2.0 + 1e-12 {
                        let th = ((t - t0) / rho).clamp(0.0, PI / 2.0);
                        return (0..self.d).map(|a| center[a] + rho * (-u_out[a] * th.cos() + u_in[a] * th.sin())).collect();
                    }
                }
            }
        }
        self.point_at(self.length)
    }

    fn check_self_avoiding(&self, radius: f64) -> Result<()> {
        // the taper vanishes on the outer half of each ghost segment
        let lo = match &self.pieces[0] {
            Piece::Segment { t0, .. } => 0.5 * *t0,
            _ => 0.0,
        };
        let total = self.length - 2.0 * lo;
        let steps = ((total / (0.25 * radius)).ceil() as usize).max(2);
        let ts: Vec<f64> = (0..=steps).map(|i| lo + total * i as f64 / steps as f64).collect();
        let pts: Vec<Vec<f64>> = ts.iter().map(|&t| self.point_at(t)).collect();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if ts[j] - ts[i] > 4.0 * radius && torus_distance(&pts[i], &pts[j]) < 2.0 * radius {
                    return Err(Error::TubeTooCurved("tube meets itself".into()));
                }
            }
        }
        Ok(())
    }

    fn foot_on(&self, piece: &Piece, y: &[f64]) -> Foot {
        let d = self.d;
        match piece {
            Piece::Segment { start, dir, len, t0, frame } => {
                let rel: Vec<f64> = y.iter().zip(start).map(|(a, b)| a - b).collect();
                let s = dot(&rel, dir).clamp(0.0, *len);
                let offset: Vec<f64> = (0..d).map(|a| rel[a] - s * dir[a]).collect();
                Foot { dist: norm(&offset), t: t0 + s, offset, tangent: dir.clone(), frame: frame.clone() }
            }
            Piece::Arc { center, u_in, u_out, rho, t0, frame } => {
                let w: Vec<f64> = y.iter().zip(center).map(|(a, b)| a - b).collect();
                let p1 = -dot(&w, u_out);
                let p2 = dot(&w, u_in);
                let th = p2.atan2(p1).clamp(0.0, PI / 2.0);
                let foot: Vec<f64> = (0..d).map(|a| center[a] + rho * (-u_out[a] * th.cos() + u_in[a] * th.sin())).collect();
                let offset: Vec<f64> = y.iter().zip(&foot).map(|(a, b)| a - b).collect();
                let tangent: Vec<f64> = (0..d).map(|a| u_in[a] * th.cos() + u_out[a] * th.sin()).collect();
                let fr = mat_mul(frame, &plane_rotation(u_in, u_out, -th), d);
                Foot { dist: norm(&offset), t: t0 + rho * th, offset, tangent, frame: fr }
            }
        }
    }

    /// Nearest axis point over all periodic images of `k` near the tube.
    fn nearest(&self, k: &[f64], reach: f64) -> Option<Foot> {
        let d = self.d;
        let mut options: Vec<Vec<f64>> = vec![vec![]];
        for a in 0..d {
            let mut cands = Vec::new();
            let base = k[a] + TAU * ((self.lo[a] - k[a]) / TAU).floor();
            let mut y = base;
            while y <= self.hi[a] {
                if y >= self.lo[a] {
                    cands.push(y);
                }
                y += TAU;
            }
            if cands.is_empty() {
                return None;
            }
            options = options
                .into_iter()
                .flat_map(|o| {
                    cands.iter().map(move |&c| {
                        let mut p = o.clone();
                        p.push(c);
                        p
                    })
                })
                .collect();
        }
        let mut best: Option<Foot> = None;
        for y in &options {
            for piece in &self.pieces {
                let f = self.foot_on(piece, y);
                if f.dist < reach && best.as_ref().map_or(true, |b| f.dist < b.dist) {
                    best = Some(f);
                }
            }
        }
        best
    }
}

/// Inserts a dipole along `path` into `base`: inside the tube the unit field
/// follows a radial collapse map of each cross-section (boundary to the base
/// direction, axis to its opposite), switched on smoothly near the ends so
/// that zeros appear exactly at the tail (charge -1) and head (charge +1).
/// Outside the tube the base field is returned unchanged.
pub fn dipole_insert(base: &FieldSpec, path: &DipolePath) -> Result<FieldSpec> {
    if base.is_pair() {
        return Err(Error::InvalidArgument("dipole insertion needs a vector field".into()));
    }
    let d = base.dim;
    let geom = Arc::new(TubeGeometry::build(path, d)?);
    let radius = path.tube_radius;
    let delta = path.taper;
    let length = geom.length;

    // reference direction: base direction at the tail; it must stay within
    // 30 degrees over the tube
    let e = base.unit(&path.waypoints[0]).map_err(|_| Error::BaseVariesOnTube)?;
    let ghost = 2.0 * delta;
    let nt = ((length + 2.0 * ghost) / (0.5 * radius)).ceil() as usize + 1;
    for i in 0..=nt {
        let t = -ghost + (length + 2.0 * ghost) * i as f64 / nt as f64;
        let c = geom.point_at(t);
        let mut probes = vec![c.clone()];
        for a in 0..d {
            for s in [-1.0, 1.0] {
                let mut p = c.clone();
                p[a] += s * radius;
                probes.push(p);
            }
        }
        for p in probes {
            let u = base.unit(&p).map_err(|_| Error::BaseVariesOnTube)?;
            if dot(&u, &e) < (PI / 6.0).cos() {
                return Err(Error::BaseVariesOnTube);
            }
        }
    }
    let q0 = any_rotation(&geom.tangent0, &e);
    let base_f = base.clone();
    let g = geom.clone();
    let f = move |k: &[f64]| -> Vec<f64> {
        let b = base_f.eval(k);
        let Some(foot) = g.nearest(k, radius) else { return b };
        let psi = taper_weight(foot.t, length, delta);
        let rho = foot.dist / radius;
        if psi == 0.0 || rho >= 1.0 {
            return b;
        }
        let tau = &foot.tangent;
        let along = dot(&foot.offset, tau);
        let perp: Vec<f64> = (0..d).map(|a| foot.offset[a] - along * tau[a]).collect();
        let u = collapse(&perp, rho, tau);
        let mut fv: Vec<f64> = (0..d).map(|a| tau[a] + psi * (u[a] - tau[a])).collect();
        fv = mat_vec(&foot.frame, &fv);
        fv = mat_vec(&q0, &fv);
        let bn = norm(&b);
        let bhat: Vec<f64> = b.iter().map(|x| x / bn).collect();
        let rot = rotation_between(&e, &bhat);
        mat_vec(&rot, &fv).into_iter().map(|x| x * bn).collect()
    };
    let mut declared = base.declared.clone();
    declared.push(DeclaredNode { position: path.tail(), charge: -1, ring: Ring::Z });
    declared.push(DeclaredNode { position: path.head(), charge: 1, ring: Ring::Z });
    Ok(FieldSpec::analytic(d, &format!("{} + dipole", base.label), f).with_declared(declared))
}

/// Constant field `e_0` modified inside a closed straight tube around the
/// `direction` cycle through transverse point `center`, by the interior
/// dipole collapse map with tangent `-e_direction`. No zeros; every
/// transverse slice has degree 1.
pub fn cycle_pair_field(d: usize, direction: usize, center: &[f64], tube_radius: f64) -> Result<FieldSpec> {
    if !(3..=5).contains(&d) {
        return Err(Error::UnsupportedDimension(d));
    }
    if direction >= d || center.len() != d {
        return Err(Error::InvalidArgument("direction or center out of range".into()));
    }
    if !(tube_radius > 0.0 && tube_radius < PI / 2.0) {
        return Err(Error::TubeTooCurved("tube radius must lie in (0, pi/2)".into()));
    }
    let mut e = vec![0.0; d];
    e[if direction == 0 { 1 } else { 0 }] = 1.0;
    let mut tau = vec![0.0; d];
    tau[direction] = -1.0;
    let q = any_rotation(&tau, &e);
    let c = center.to_vec();
    Ok(FieldSpec::analytic(d, &format!("cycle-pair(axis {direction})"), move |k| {
        let off: Vec<f64> = (0..d).map(|a| if a == direction { 0.0 } else { periodic_delta(c[a], k[a]) }).collect();
        let rho = norm(&off) / tube_radius;
        if rho >= 1.0 {
            return e.clone();
        }
        mat_vec(&q, &collapse(&off, rho, &tau))
    }))
}

/// Parameters of the d = 5 tangent 2-field with two Z2 nodes.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Z2NodeParams {
    /// Transverse position (axes 1-4) of the tube along axis 5.
    pub center: [f64; 4],
    /// Axis-5 coordinates of the two nodes.
    pub t0: f64,
    pub t1: f64,
    pub tube_radius: f64,
    pub taper: f64,
}

impl Default for Z2NodeParams {
    fn default() -> Self {
        Z2NodeParams { center: [PI / 2.0, PI / 2.0, PI / 2.0, PI / 2.0], t0: 1.3, t1: 4.1, tube_radius: 1.3, taper: 0.4 }
    }
}

/// Hopf map `C^2 -> R^3`, homogeneous of degree two.
pub fn hopf_map(z1: (f64, f64), z2: (f64, f64)) -> [f64; 3] {
    // z1 conj(z2)
    let re = z1.0 * z2.0 + z1.1 * z2.1;
    let im = z1.1 * z2.0 - z1.0 * z2.1;
    [2.0 * re, 2.0 * im, z1.0 * z1.0 + z1.1 * z1.1 - z2.0 * z2.0 - z2.1 * z2.1]
}

/// Tangent 2-field `(a, b)` on `T^5` with `a = e_1` and `b` in `e_1^perp`
/// given near each node by the suspension of the Hopf map, scaled by the
/// distance to the node. The two nodes carry declared Z2 charge 1 each.
pub fn z2_node_field(params: &Z2NodeParams) -> Result<FieldSpec> {
    let p = params.clone();
    if !(p.tube_radius > 0.0 && p.tube_radius < PI / 2.0 && p.taper > 0.0) {
        return Err(Error::InvalidArgument("tube radius must lie in (0, pi/2), taper positive".into()));
    }
    let length = p.t1 - p.t0;
    if !(length > 2.0 * p.taper && length + 4.0 * p.taper < TAU) {
        return Err(Error::InvalidArgument("node separation does not fit the tapers".into()));
    }
    let a = |_: &[f64]| vec![1.0, 0.0, 0.0, 0.0, 0.0];
    let b = move |k: &[f64]| -> Vec<f64> {
        let z: Vec<f64> = (0..4).map(|i| periodic_delta(p.center[i], k[i])).collect();
        let rz = norm(&z);
        let rho = rz / p.tube_radius;
        let t = 0.5 * length + periodic_delta(p.t0 + 0.5 * length, k[4]);
        let psi = taper_weight(t, length, p.taper);
        if psi == 0.0 || rho >= 1.0 {
            return vec![0.0, 0.0, 0.0, 0.0, 1.0];
        }
        // Hopf direction, turned away from the axis by pi * rho
        let eta = hopf_map((z[0], z[1]), (z[2], z[3]));
        let s = if rz > 0.0 { (PI * rho).sin() / (rz * rz) } else { 0.0 };
        let c = (PI * rho).cos();
        vec![0.0, psi * eta[0] * s, psi * eta[1] * s, psi * eta[2] * s, 1.0 - psi * (1.0 + c)]
    };
    let node = |t: f64| {
        let mut pos: Vec<f64> = params.center.to_vec();
        pos.push(wrap_angle(t));
        DeclaredNode { position: pos, charge: 1, ring: Ring::Z2 }
    };
    Ok(FieldSpec::pair(5, "z2-node", a, b).with_declared(vec![node(params.t0), node(params.t1)]))
}
