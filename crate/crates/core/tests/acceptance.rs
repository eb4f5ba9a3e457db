//! Acceptance suite: one PASS/FAIL line per criterion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semitopo::chains::{
    boundary, chain_coordinates, chains_equivalent, intersection_number, reconstruct_euler_chain, to_kervaire,
    winding_class, OneChain, ZeroChain,
};
use semitopo::charge::{local_degree_with, slice_degree, ChargeChain};
use semitopo::cli::{self, Analysis, AnalysisConfig, FieldConfig, Status};
use semitopo::clifford::*;
use semitopo::fermiarc::{project_chain, project_zero_chain};
use semitopo::field::FieldSpec;
use semitopo::grid::{torus_distance, TorusGrid};
use semitopo::invariants::{
    hopf_c1_calibration, lattice_chern, quaternionic_c2_calibration, slice_wzw, InvariantKind, Jump, ProfileSample,
    SliceProfile,
};
use semitopo::linalg::{degeneracy_groups, hermitian_eigenvalues, norm, CMatrix, C64};
use semitopo::models::*;
use semitopo::nodes::locate_zeros;
use semitopo::Ring;
use std::f64::consts::{PI, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

fn secs(t: Instant) -> f64 {
    t.elapsed().as_secs_f64()
}

fn exact(a: &CMatrix, b: &CMatrix) -> bool {
    (a - b).max_abs() == 0.0
}

fn random_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn reject(v: &mut [f64], from: &[&[f64]]) {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for u in from {
        let mut w = u.to_vec();
        for q in &basis {
            let p: f64 = w.iter().zip(q).map(|(a, b)| a * b).sum();
            w.iter_mut().zip(q).for_each(|(x, y)| *x -= p * y);
        }
        let n = norm(&w);
        basis.push(w.iter().map(|x| x / n).collect());
    }
    for q in &basis {
        let p: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
        v.iter_mut().zip(q).for_each(|(x, y)| *x -= p * y);
    }
}

fn calibration() -> Outcome {
    let t = Instant::now();
    let c1 = hopf_c1_calibration(32, false);
    let t1 = secs(t);
    check!((c1 - 1.0).abs() < 0.01 && t1 < 1.0, "c1 = {c1} in {t1:.2} s");
    let t = Instant::now();
    let c2 = quaternionic_c2_calibration(16, false, false);
    let t2 = secs(t);
    check!((c2 - 1.0).abs() < 0.05 && t2 < 60.0, "c2 = {c2} in {t2:.2} s");
    let t = Instant::now();
    let dd = cli::wrap_winding(32);
    let t3 = secs(t);
    check!(dd.round() == 1.0 && (dd - 1.0).abs() < 0.05 && t3 < 10.0, "DD = {dd} in {t3:.2} s");
    Ok(format!("c1 {c1:.4} ({t1:.2} s), c2 {c2:.4} ({t2:.1} s), DD {dd:.4} ({t3:.2} s)"))
}

fn clifford_suite() -> Outcome {
    let t = Instant::now();
    let mut checks = 0;
    for d in 3..=5 {
        let rep = gamma_rep(d).map_err(|e| e.to_string())?;
        let n = rep.size();
        check!(n == 1 << (d / 2), "d={d}: size {n}");
        let id = CMatrix::identity(n);
        for i in 0..d {
            let g = &rep.matrices[i];
            check!(exact(g, &g.adjoint()) && g.trace() == C64::new(0.0, 0.0), "d={d}: gamma_{i} not traceless hermitian");
            for j in 0..d {
                let want = if i == j { id.scale_re(2.0) } else { CMatrix::zeros(n) };
                check!(exact(&g.anticommutator(&rep.matrices[j]), &want), "d={d}: anticommutator ({i},{j})");
                checks += 1;
            }
        }
        if d == 3 {
            let s3i = rep.matrices[2].scale(C64::new(0.0, 1.0));
            check!(exact(&(&rep.matrices[0] * &rep.matrices[1]), &s3i), "sigma1 sigma2 != i sigma3");
        } else {
            let th = &rep.theta;
            check!(exact(&th.square(), &id.scale_re(-1.0)), "d={d}: Theta^2 != -1");
            for (i, g) in rep.matrices.iter().enumerate() {
                check!((&th.conjugate(g) - g).max_abs() <= 1e-12, "d={d}: Theta gamma_{i} Theta^-1 != gamma_{i}");
            }
            let prod = &(&(&rep.matrices[0] * &rep.matrices[1]) * &rep.matrices[2]) * &rep.matrices[3];
            check!(exact(&prod, rep.chirality.as_ref().unwrap()), "d={d}: gamma1..4 != gamma5");
        }
    }
    let r5 = gamma_rep(5).unwrap();
    let r4 = gamma_rep(4).unwrap();
    let h5 = dirac_hamiltonian(&[0.3, -0.2, 0.5, 0.1, -0.7], &r5);
    check!(symmetry_check(&h5, Symmetry::T, &r5) == Ok(Verdict::Holds), "d=5 dirac T");
    let b5 = bilinear_hamiltonian(&[1.0, 0.2, 0.0, 0.3, 0.0], &[0.0, 1.0, -0.5, 0.0, 0.4], &[0.0; 5], &[0.0; 5], &r5)
        .map_err(|e| e.to_string())?;
    check!(symmetry_check(&b5, Symmetry::C, &r5) == Ok(Verdict::Holds), "d=5 bilinear C");
    let h4 = dirac_hamiltonian(&[0.3, -0.2, 0.5, 0.1], &r4);
    check!(symmetry_check(&h4, Symmetry::S, &r4) == Ok(Verdict::Holds), "d=4 dirac S");
    let el = secs(t);
    check!(el < 1.0, "took {el:.2} s");
    Ok(format!("{checks} anticommutators exact, gamma5 and Theta relations hold ({el:.3} s)"))
}

fn dirac_spectrum() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for d in 3..=5 {
        let rep = gamma_rep(d).unwrap();
        let n = rep.size();
        for _ in 0..1000 {
            let h = random_vec(&mut rng, d);
            let r = norm(&h);
            let op = dirac_hamiltonian(&h, &rep);
            let sq = &op.matrix * &op.matrix;
            check!((&sq - &CMatrix::identity(n).scale_re(r * r)).max_abs() < 1e-12, "H^2 != |h|^2");
            let ev = hermitian_eigenvalues(&op.matrix);
            for (i, e) in ev.iter().enumerate() {
                let want = if i < n / 2 { -r } else { r };
                worst = worst.max((e - want).abs());
            }
            let groups = degeneracy_groups(&ev, 1e-8);
            check!(groups.len() == 2 && groups.iter().all(|g| g.1 == n / 2), "d={d}: multiplicities {groups:?}");
        }
    }
    check!(worst < 1e-10, "max deviation {worst:e}");
    Ok(format!("3000 samples, max deviation {worst:.1e}"))
}

fn bilinear_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rep = gamma_rep(5).unwrap();
    let mut worst: f64 = 0.0;
    let mut census = [0usize; 2];
    for _ in 0..1000 {
        let a = random_vec(&mut rng, 5);
        let b = random_vec(&mut rng, 5);
        let mut c = random_vec(&mut rng, 5);
        let mut e = random_vec(&mut rng, 5);
        reject(&mut c, &[&a, &b]);
        reject(&mut e, &[&a, &b]);
        let (l, m) = bilinear_magnitudes(&a, &b, &c, &e);
        let formula = bilinear_spectrum(l, m).map_err(|e| e.to_string())?;
        let ev = bilinear_hamiltonian(&a, &b, &c, &e, &rep).map_err(|e| e.to_string())?.spectrum();
        for (x, y) in formula.iter().zip(&ev) {
            worst = worst.max((x - y).abs());
        }
        // every sign combination +-lambda +- mu is an eigenvalue
        for s in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let want = s.0 * l + s.1 * m;
            check!(ev.iter().any(|x| (x - want).abs() < 1e-9), "missing {want} in {ev:?}");
        }
        census[(l > m) as usize] += 1;
    }
    check!(worst < 1e-9, "max deviation {worst:e}");
    check!(census[0] > 0 && census[1] > 0, "sign census {census:?}");
    Ok(format!("1000 pairs, max deviation {worst:.1e}, lambda<mu {} / lambda>mu {}", census[0], census[1]))
}

fn config(field: FieldConfig, n: usize) -> AnalysisConfig {
    AnalysisConfig::new(field, n)
}

fn constant(d: usize, axis: usize) -> FieldConfig {
    FieldConfig::Constant { d, axis }
}

fn dipole(base: FieldConfig, paths: Vec<DipolePath>) -> FieldConfig {
    FieldConfig::Dipole { base: Box::new(base), paths }
}

fn builder_suite() -> Vec<(&'static str, AnalysisConfig)> {
    let bent = DipolePath {
        waypoints: vec![vec![0.5, 1.0, 1.0], vec![3.5, 1.0, 1.0], vec![3.5, 1.0, 4.0]],
        tube_radius: 0.8,
        taper: 0.4,
        corner_radius: None,
    };
    let mut trig5 = config(FieldConfig::TrigDirac { d: 5, m: 4.0 }, 6);
    trig5.directions = Some(vec![0, 4]);
    let mut z2 = config(FieldConfig::Z2Node { params: Z2NodeParams::default() }, 8);
    z2.ring = Ring::Z2;
    vec![
        ("trig m=2", config(FieldConfig::TrigWeyl { m: 2.0 }, 16)),
        ("trig m=2.5", config(FieldConfig::TrigWeyl { m: 2.5 }, 16)),
        ("trig d=4", config(FieldConfig::TrigDirac { d: 4, m: 3.0 }, 8)),
        ("trig d=5", trig5),
        ("constant d=3", config(constant(3, 0), 8)),
        ("constant d=4", config(constant(4, 2), 6)),
        ("constant d=5", config(constant(5, 4), 4)),
        ("dipole", config(dipole(constant(3, 0), vec![DipolePath::straight(vec![1.1, 2.3, 1.4], 2, 2.2, 0.9)]), 16)),
        ("bent dipole", config(dipole(constant(3, 1), vec![bent]), 16)),
        (
            "two dipoles",
            config(
                dipole(
                    constant(3, 0),
                    vec![
                        DipolePath::straight(vec![1.0, 1.0, 1.0], 2, 2.0, 0.8),
                        DipolePath::straight(vec![4.0, 4.0, 3.0], 1, -2.0, 0.8),
                    ],
                ),
                16,
            ),
        ),
        (
            "dipole in trig",
            config(
                dipole(FieldConfig::TrigWeyl { m: 2.0 }, vec![DipolePath::straight(vec![3.0, 3.0, 2.0], 0, 1.5, 0.8)]),
                16,
            ),
        ),
        ("dipole d=4", config(dipole(constant(4, 0), vec![DipolePath::straight(vec![1.0; 4], 3, 2.5, 1.0)]), 8)),
        ("cycle d=3", config(FieldConfig::CyclePair { d: 3, direction: 2, center: vec![2.0; 3], tube_radius: 1.0 }, 16)),
        ("cycle d=4", config(FieldConfig::CyclePair { d: 4, direction: 1, center: vec![2.0; 4], tube_radius: 1.0 }, 8)),
        ("z2 nodes", z2),
    ]
}

struct BuilderRun {
    label: &'static str,
    analysis: Analysis,
}

fn run_builders() -> Result<Vec<BuilderRun>, String> {
    builder_suite()
        .into_iter()
        .map(|(label, c)| Ok(BuilderRun { label, analysis: cli::analyze(&c).map_err(|e| format!("{label}: {e}"))? }))
        .collect()
}

fn poincare_hopf(runs: &[BuilderRun]) -> Outcome {
    for r in runs {
        let a = &r.analysis;
        let ph = a.report.ph_check.ok_or(format!("{}: no PH check ({:?})", r.label, a.failure))?;
        check!(ph.pass, "{}: sum {}", r.label, ph.sum);
        // locate <-> metadata bijection
        check!(a.nodes.len() == a.field.declared.len(), "{}: {} nodes, {} declared", r.label, a.nodes.len(), a.field.declared.len());
        for dn in &a.field.declared {
            let hit = a.nodes.iter().find(|n| torus_distance(&n.position, &dn.position) < 1e-6);
            let hit = hit.ok_or(format!("{}: declared node {:?} not located", r.label, dn.position))?;
            let q = match hit.charge {
                semitopo::nodes::NodeCharge::Integer(q) => q,
                semitopo::nodes::NodeCharge::Z2 { value, .. } => value as i64,
                semitopo::nodes::NodeCharge::Unknown => return Err(format!("{}: unknown charge", r.label)),
            };
            check!(q == dn.ring.reduce(dn.charge), "{}: charge {q} vs declared {}", r.label, dn.charge);
        }
    }
    let t = Instant::now();
    let f = trig_weyl_field(2.0).unwrap();
    let g = TorusGrid::cubic(3, 16).unwrap();
    let nodes = locate_zeros(&f, &g, 1e-8).map_err(|e| e.to_string())?;
    let mut qs = Vec::new();
    for n in &nodes {
        let deg = (1..=2).find_map(|r| local_degree_with(&f, n, r, 0.05).ok()).ok_or("no degree at refinement <= 2")?;
        check!(deg.residual < 0.05, "residual {}", deg.residual);
        qs.push((n.position[2], deg.value));
    }
    qs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let charges: Vec<i64> = qs.iter().map(|x| x.1).collect();
    check!(charges == vec![1, -1], "trig charges {charges:?}");
    let el = secs(t);
    check!(el < 5.0, "trig charges took {el:.2} s");
    Ok(format!("{} builder fields balanced, trig charges (+1, -1) in {el:.2} s", runs.len()))
}

fn random_dipole(rng: &mut ChaCha8Rng) -> DipolePath {
    let start: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..TAU)).collect();
    let a = rng.gen_range(0..3);
    let l1 = rng.gen_range(2.6..3.2) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let mut w1 = start.clone();
    w1[a] += l1;
    let mut waypoints = vec![start, w1.clone()];
    if rng.gen_bool(0.5) {
        let b = (a + rng.gen_range(1..3)) % 3;
        let mut w2 = w1;
        w2[b] += rng.gen_range(2.6..3.2) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        waypoints.push(w2);
    }
    DipolePath { waypoints, tube_radius: rng.gen_range(0.8..0.95), taper: 0.4, corner_radius: None }
}

fn jump_law() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut slices = 0;
    let mut jumps = 0;
    for case in 0..20 {
        let path = random_dipole(&mut rng);
        let field = dipole(constant(3, rng.gen_range(0..3)), vec![path.clone()]);
        let a = cli::analyze(&config(field, 16)).map_err(|e| format!("case {case}: {e}"))?;
        check!(a.status() == Status::Ok, "case {case} ({path:?}): {:?}", a.failure);
        check!(a.nodes.len() == 2, "case {case}: {} nodes", a.nodes.len());
        let charges = a.charges.as_ref().unwrap();
        for p in &a.report.profiles {
            for j in &p.jumps {
                let q: i64 = charges
                    .entries
                    .iter()
                    .filter(|e| semitopo::grid::periodic_delta(e.position[p.direction], j.coordinate).abs() < 1e-9)
                    .map(|e| e.charge)
                    .sum();
                check!(j.delta == q, "case {case}: jump {} vs charge {q}", j.delta);
                jumps += 1;
            }
            for s in &p.samples {
                let c = lattice_chern(&a.field, p.direction, s.coordinate, &a.grid).map_err(|e| e.to_string())?;
                check!(c == s.value, "case {case}: lattice chern {c} vs degree {}", s.value);
                slices += 1;
            }
        }
    }
    let el = secs(t);
    check!(el < 120.0, "took {el:.1} s");
    Ok(format!("20 dipoles, {jumps} jumps and {slices} slices agree ({el:.1} s)"))
}

fn chiral_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = TorusGrid::cubic(4, 8).unwrap();
    let mut cases: Vec<(FieldSpec, Vec<(usize, f64)>)> = Vec::new();
    for _ in 0..5 {
        let m = rng.gen_range(2.3..3.7);
        let mut perm: Vec<usize> = (0..4).collect();
        for i in (1..4).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let signs: Vec<f64> = (0..4).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let base = trig_dirac_field(4, m).unwrap();
        let p = perm.clone();
        let f = FieldSpec::analytic(4, "permuted trig", move |k| {
            let q: Vec<f64> = (0..4).map(|i| k[p[i]]).collect();
            base.eval(&q).iter().zip(&signs).map(|(x, s)| x * s).collect()
        });
        // the nodes sit at +-kz0 on input axis perm[3]
        let kz = (m - 3.0).acos();
        let axis = perm[3];
        let other = perm[rng.gen_range(0..3)];
        cases.push((f, vec![(axis, 0.0), (axis, PI), (axis, rng.gen_range(-kz + 0.3..kz - 0.3)), (other, 1.0)]));
    }
    for _ in 0..3 {
        let a = rng.gen_range(0..4);
        let start: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..TAU)).collect();
        let len = rng.gen_range(2.2..2.8) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let f = dipole_insert(&constant_field(4, rng.gen_range(0..4)).unwrap(), &DipolePath::straight(start.clone(), a, len, 1.0))
            .map_err(|e| e.to_string())?;
        cases.push((f, vec![(a, start[a] + 0.5 * len), (a, start[a] + len + 0.5 * (TAU - len.abs()) * len.signum())]));
    }
    for _ in 0..2 {
        let dir = rng.gen_range(0..4);
        let center: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..TAU)).collect();
        let f = cycle_pair_field(4, dir, &center, 1.0).map_err(|e| e.to_string())?;
        cases.push((f, vec![(dir, rng.gen_range(0.0..TAU)), ((dir + 1) % 4, rng.gen_range(0.0..TAU))]));
    }
    let mut nonzero = 0;
    let mut total = 0;
    let rep = gamma_rep(4).unwrap();
    for (i, (f, slices)) in cases.iter().enumerate() {
        let k: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..TAU)).collect();
        let op = dirac_hamiltonian(&f.eval(&k), &rep);
        check!(symmetry_check(&op, Symmetry::S, &rep) == Ok(Verdict::Holds), "field {i} not chiral");
        for &(dir, c) in slices {
            let deg = slice_degree(f, dir, c, &g).map_err(|e| format!("field {i}: {e}"))?;
            let w = slice_wzw(f, dir, c, &g).map_err(|e| format!("field {i}: {e}"))?;
            check!(deg == w, "field {i} axis {dir} at {c:.3}: degree {deg} vs wzw {w}");
            nonzero += (deg != 0) as usize;
            total += 1;
        }
    }
    let el = secs(t);
    check!(el < 120.0, "took {el:.1} s");
    check!(nonzero >= 8, "only {nonzero} nonzero slices");
    Ok(format!("10 fields, {total} slices ({nonzero} nonzero) agree ({el:.1} s)"))
}

fn euler_certificates(runs: &[BuilderRun]) -> Outcome {
    for r in runs {
        let a = &r.analysis;
        let e = a.euler.as_ref().ok_or(format!("{}: no chain ({:?})", r.label, a.failure))?;
        check!(e.certificate.passed(), "{}: certificate {:?}", r.label, e.certificate);
        let snapped = semitopo::chains::snap_charges(a.charges.as_ref().unwrap(), &a.grid);
        check!(boundary(&e.chain) == snapped, "{}: boundary", r.label);
        for p in &a.report.profiles {
            for (s, c) in p.samples.iter().zip(chain_coordinates(p, &a.grid)) {
                if let Some(c) = c {
                    let x = intersection_number(&e.chain, p.direction, c).map_err(|e| e.to_string())?;
                    check!(a.charges.as_ref().unwrap().ring.reduce(x + s.value) == 0, "{}: intersection", r.label);
                }
            }
        }
        if r.label.starts_with("cycle") {
            let dir = if r.label.ends_with('3') { 2 } else { 1 };
            let n = a.grid.sizes()[dir];
            let w = winding_class(&e.chain).map_err(|e| e.to_string())?.winding;
            let mut want = vec![0; a.grid.dim()];
            want[dir] = -1;
            check!(w == want && e.chain.len() == n && e.chain.edges().all(|(_, ax, c)| ax == dir && c == -1), "{}: {w:?}", r.label);
        }
        if r.label.starts_with("trig m") {
            check!(e.added_windings.iter().all(|&w| w == 0) && e.chain.edges().all(|(_, ax, _)| ax == 2), "{}: not straight", r.label);
        }
        if r.label == "z2 nodes" {
            check!(e.chain.ring == Ring::Z2 && boundary(&e.chain).len() == 2, "z2: kervaire boundary");
            check!(a.charges.as_ref().unwrap().total() == 0, "z2: mod-2 sum");
        }
    }
    Ok(format!("{} builder fields certified, cycle fields give one generator loop", runs.len()))
}

fn rewiring() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..10 {
        let a = rng.gen_range(0..3);
        let b = (a + rng.gen_range(1..3)) % 3;
        let start: Vec<f64> = (0..3).map(|_| rng.gen_range(0.5..TAU - 0.5)).collect();
        let len = rng.gen_range(2.6..2.9) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let r = 0.8;
        let mut head = start.clone();
        head[a] += len;
        let base = constant(3, b);
        let short = DipolePath { waypoints: vec![start.clone(), head.clone()], tube_radius: r, taper: 0.4, corner_radius: None };
        let mut long_head = head.clone();
        long_head[a] -= TAU * len.signum();
        let long = DipolePath { waypoints: vec![start.clone(), long_head], ..short.clone() };
        let off = rng.gen_range(2.5..2.8) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let (mut p1, mut p2) = (start.clone(), head.clone());
        p1[b] += off;
        p2[b] += off;
        let detour = DipolePath { waypoints: vec![start.clone(), p1, p2, head.clone()], corner_radius: Some(1.25), ..short.clone() };
        let cfg = |p: &DipolePath| config(dipole(base.clone(), vec![p.clone()]), 16);
        let cmp_long = cli::compare(&cfg(&short), &cfg(&long), 1e-6).map_err(|e| format!("case {case} long: {e}"))?;
        let mut want = vec![0; 3];
        want[a] = len.signum() as i64;
        check!(!cmp_long.equivalent && cmp_long.class.winding == want, "case {case}: class {:?} vs {want:?}", cmp_long.class.winding);
        for d in &cmp_long.arcs {
            check!(d.differ == (d.direction != a), "case {case}: arcs along {} differ = {}", d.direction, d.differ);
        }
        let cmp_detour = cli::compare(&cfg(&short), &cfg(&detour), 1e-6).map_err(|e| format!("case {case} detour: {e}"))?;
        check!(cmp_detour.equivalent, "case {case}: detour class {:?}", cmp_detour.class.winding);
    }
    let el = secs(t);
    check!(el < 120.0, "took {el:.1} s");
    Ok(format!("10 cases: long way round gives its generator, detours give 0 ({el:.1} s)"))
}

fn random_chain(rng: &mut ChaCha8Rng, g: &TorusGrid, ring: Ring) -> OneChain {
    let mut l = OneChain::new(g, ring);
    for _ in 0..rng.gen_range(0..30) {
        let v: Vec<usize> = g.sizes().iter().map(|&n| rng.gen_range(0..n)).collect();
        l.add_edge(&v, rng.gen_range(0..g.dim()), rng.gen_range(-3..4));
    }
    l
}

fn reduce_zero(z: &ZeroChain) -> ZeroChain {
    z.iter().filter(|(_, &c)| c.rem_euclid(2) != 0).map(|(v, &c)| (v.clone(), c.rem_euclid(2))).collect()
}

fn z2_pipeline() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let g = TorusGrid::cubic(3, 5).unwrap();
    for i in 0..100 {
        let l = random_chain(&mut rng, &g, Ring::Z);
        check!(to_kervaire(&l.scaled(2)).is_empty(), "chain {i}: 2l survives");
        let k = to_kervaire(&l);
        for (v, a, c) in l.edges() {
            check!(k.coefficient(v, a) == c.rem_euclid(2), "chain {i}: edge reduction");
        }
        check!(boundary(&k) == reduce_zero(&boundary(&l)), "chain {i}: boundary vs reduction");
        for dir in 0..3 {
            let pz = project_chain(&l, dir);
            let pk = project_chain(&k, dir);
            check!(to_kervaire(&pz.chain) == pk.chain, "chain {i}: projection along {dir}");
            check!(pk.projected_charges == project_zero_chain(&boundary(&k), dir, Ring::Z2), "chain {i}: projected charges");
            check!(boundary(&pk.chain) == pk.projected_charges, "chain {i}: kervaire boundary");
        }
    }
    let f = z2_node_field(&Z2NodeParams::default()).map_err(|e| e.to_string())?;
    let rep = gamma_rep(5).unwrap();
    let zero = [0.0; 5];
    for dn in &f.declared {
        let (a, b) = f.eval_pair(&dn.position);
        let at = bilinear_hamiltonian(&a, &b, &zero, &zero, &rep).map_err(|e| e.to_string())?.spectrum();
        check!(at.iter().all(|x| x.abs() < 1e-9), "spectrum at node {at:?}");
        for _ in 0..20 {
            let off = random_vec(&mut rng, 5);
            let s = 0.1 / norm(&off);
            let k: Vec<f64> = dn.position.iter().zip(&off).map(|(p, o)| p + s * o).collect();
            let (a, b) = f.eval_pair(&k);
            let lam = wedge_norm(&a, &b);
            let ev = bilinear_hamiltonian(&a, &b, &zero, &zero, &rep).map_err(|e| e.to_string())?.spectrum();
            let want = [-lam, -lam, lam, lam];
            check!(lam > 0.0 && ev.iter().zip(&want).all(|(x, y)| (x - y).abs() < 1e-9), "near node: {ev:?} vs {lam}");
        }
    }
    Ok("100 random chains, four-fold crossings at both Z2 nodes, doubled bands nearby".into())
}

/// Row-reduced basis mod a prime, for exact rank tests on small chain spaces.
struct Span {
    p: i64,
    rows: Vec<(usize, Vec<i64>)>,
}

impl Span {
    fn new(p: i64) -> Self {
        Span { p, rows: vec![] }
    }

    fn reduce(&self, v: &[i64]) -> Vec<i64> {
        let p = self.p;
        let mut v: Vec<i64> = v.iter().map(|x| x.rem_euclid(p)).collect();
        for (piv, r) in &self.rows {
            let f = v[*piv];
            if f != 0 {
                for (x, y) in v.iter_mut().zip(r) {
                    *x = (*x - (f as i128 * *y as i128 % p as i128) as i64).rem_euclid(p);
                }
            }
        }
        v
    }

    fn insert(&mut self, v: &[i64]) {
        let p = self.p;
        let mut v = self.reduce(v);
        let Some(piv) = v.iter().position(|&x| x != 0) else { return };
        let inv = pow_mod(v[piv], p - 2, p);
        v.iter_mut().for_each(|x| *x = (*x as i128 * inv as i128 % p as i128) as i64);
        for (_, r) in self.rows.iter_mut() {
            let f = r[piv];
            if f != 0 {
                for (x, y) in r.iter_mut().zip(&v) {
                    *x = (*x - (f as i128 * *y as i128 % p as i128) as i64).rem_euclid(p);
                }
            }
        }
        self.rows.push((piv, v));
    }

    fn contains(&self, v: &[i64]) -> bool {
        self.reduce(v).iter().all(|&x| x == 0)
    }
}

fn pow_mod(b: i64, mut e: i64, p: i64) -> i64 {
    let (mut r, mut b, p) = (1i128, b.rem_euclid(p) as i128, p as i128);
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    r as i64
}

fn edge_index(g: &TorusGrid, v: &[usize], axis: usize) -> usize {
    g.linear(v) * g.dim() + axis
}

fn dense(g: &TorusGrid, l: &OneChain) -> Vec<i64> {
    let mut out = vec![0; g.num_vertices() * g.dim()];
    for (v, a, c) in l.edges() {
        out[edge_index(g, v, a)] += c;
    }
    out
}

/// Synthetic profiles of `l`: slice values `-intersection` between the
/// snapped charge layers along every axis.
fn profiles_of(l: &OneChain, charges: &ChargeChain) -> Result<Vec<SliceProfile>, String> {
    let g = &l.grid;
    let mut out = Vec::new();
    for dir in 0..g.dim() {
        let mut coords: Vec<f64> = charges.entries.iter().map(|e| e.position[dir]).collect();
        coords.sort_by(f64::total_cmp);
        coords.dedup();
        let r = coords.len();
        let mut p = SliceProfile { direction: dir, kind: InvariantKind::C1, node_coordinates: coords.clone(), samples: vec![], jumps: vec![] };
        for j in 0..r.max(1) {
            let c = if r == 0 { 0.5 * g.step(dir) } else { coords[j] + 0.5 * g.step(dir) };
            p.samples.push(ProfileSample { coordinate: c, value: 0, interval: (r > 0).then_some(j) });
        }
        let at = chain_coordinates(&p, g);
        for (s, c) in p.samples.iter_mut().zip(at) {
            s.value = -intersection_number(l, dir, c.ok_or("collapsed interval")?).map_err(|e| e.to_string())?;
        }
        p.jumps = (0..r).map(|j| Jump { coordinate: coords[j], delta: p.samples[j].value - p.samples[(j + r - 1) % r].value }).collect();
        out.push(p);
    }
    Ok(out)
}

fn brute_force_homology() -> Outcome {
    let t = Instant::now();
    let g = TorusGrid::cubic(3, 4).unwrap();
    let ne = g.num_vertices() * 3;
    // image of the face boundary map
    let mut faces = Span::new(2_305_843_009_213_693_951);
    for v in g.vertices() {
        for a in 0..3 {
            for b in a + 1..3 {
                faces.insert(&dense(&g, &semitopo::chains::face_boundary(&g, Ring::Z, &v, a, b)));
            }
        }
    }
    let h1_rank = ne - (g.num_vertices() - 1) - faces.rows.len();
    check!(h1_rank == 3, "dim H1 = {h1_rank}");
    let loops: Vec<OneChain> = (0..3).map(|a| OneChain::generator_loop(&g, Ring::Z, &[0, 0, 0], a, 1)).collect();

    // free action: no nonzero combination of generator loops bounds
    for k in 0..125 {
        let w = [k % 5 - 2, (k / 5) % 5 - 2, k / 25 - 2].map(|x| x as i64);
        let mut l = OneChain::new(&g, Ring::Z);
        for (a, &c) in w.iter().enumerate() {
            l = l.plus(&loops[a].scaled(c));
        }
        let bounds = faces.contains(&dense(&g, &l));
        check!(bounds == (w == [0, 0, 0]), "combination {w:?} bounds = {bounds}");
        check!(winding_class(&l).map_err(|e| e.to_string())?.winding == w.to_vec(), "winding of {w:?}");
    }

    // all chains with coefficients in {-1, 0, 1} on a fixed support whose
    // boundary is the charge 0-chain
    let (tail, head) = (vec![0usize, 0, 0], vec![1usize, 0, 0]);
    let charges = ChargeChain::new(Ring::Z, vec![(g.vertex_point(&head), 1), (g.vertex_point(&tail), -1)]);
    let mut support: Vec<(Vec<usize>, usize)> = Vec::new();
    for i in 0..4 {
        support.push((vec![i, 0, 0], 0));
        support.push((vec![0, i, 0], 1));
        support.push((vec![0, 0, i], 2));
    }
    support.push((vec![0, 1, 0], 0));
    support.push((vec![1, 0, 0], 1));
    let target: Vec<i64> = {
        let mut z = vec![0; g.num_vertices()];
        z[g.linear(&head)] = 1;
        z[g.linear(&tail)] = -1;
        z
    };
    let ends: Vec<(usize, usize)> = support.iter().map(|(v, a)| (g.linear(v), g.linear(&g.neighbor(v, *a, 1)))).collect();
    let s = support.len();
    let mut passing: Vec<OneChain> = Vec::new();
    let mut coeff = vec![-1i64; s];
    let mut bd = vec![0i64; g.num_vertices()];
    let apply = |bd: &mut Vec<i64>, i: usize, c: i64| {
        bd[ends[i].1] += c;
        bd[ends[i].0] -= c;
    };
    for i in 0..s {
        apply(&mut bd, i, -1);
    }
    let total = 3usize.pow(s as u32);
    for n in 0..total {
        if bd == target {
            let mut l = OneChain::new(&g, Ring::Z);
            for (i, (v, a)) in support.iter().enumerate() {
                l.add_edge(v, *a, coeff[i]);
            }
            passing.push(l);
        }
        if n + 1 == total {
            break;
        }
        let mut i = 0;
        while coeff[i] == 1 {
            apply(&mut bd, i, -2);
            coeff[i] = -1;
            i += 1;
        }
        apply(&mut bd, i, 1);
        coeff[i] += 1;
    }
    let l0 = passing.iter().find(|l| l.len() == 1).ok_or("no single-edge chain")?.clone();
    let mut classes = std::collections::BTreeSet::new();
    for l in &passing {
        check!(boundary(l) == semitopo::chains::snap_charges(&charges, &g), "boundary");
        let eq = chains_equivalent(l, &l0).map_err(|e| e.to_string())?;
        let diff = dense(&g, &l.minus(&l0));
        check!(eq.equivalent == faces.contains(&diff), "verdict disagrees with the face-span oracle");
        // transitivity: l - l0 minus its class loops bounds
        let mut shifted = l.minus(&l0);
        for (a, &c) in eq.class.winding.iter().enumerate() {
            shifted = shifted.minus(&loops[a].scaled(c));
        }
        check!(faces.contains(&dense(&g, &shifted)), "class {:?} does not account for the difference", eq.class.winding);
        if classes.insert(eq.class.winding.clone()) {
            // profiles pin the orbit element
            let rec = reconstruct_euler_chain(&charges, &profiles_of(l, &charges)?, &g, &[]).map_err(|e| e.to_string())?;
            check!(rec.certificate.passed(), "certificate for class {:?}", eq.class.winding);
            check!(chains_equivalent(&rec.chain, l).map_err(|e| e.to_string())?.equivalent, "reconstruction misses class");
        }
    }

    // a 0-chain bounds iff it sums to zero
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut edges = Span::new(faces.p);
    for v in g.vertices() {
        for a in 0..3 {
            let mut z = vec![0; g.num_vertices()];
            z[g.linear(&g.neighbor(&v, a, 1))] += 1;
            z[g.linear(&v)] -= 1;
            edges.insert(&z);
        }
    }
    for _ in 0..200 {
        let mut entries = Vec::new();
        let mut z = vec![0; g.num_vertices()];
        for _ in 0..rng.gen_range(1..5) {
            let v: Vec<usize> = (0..3).map(|_| rng.gen_range(0..4)).collect();
            let q = rng.gen_range(-2..3);
            z[g.linear(&v)] += q;
            entries.push((g.vertex_point(&v), q));
        }
        let sum: i64 = z.iter().sum();
        check!(edges.contains(&z) == (sum == 0), "0-chain oracle");
        let cc = ChargeChain::new(Ring::Z, entries);
        match reconstruct_euler_chain(&cc, &[], &g, &[]) {
            Ok(e) => check!(sum == 0 && e.certificate.boundary_matches, "bounding chain for sum {sum}"),
            Err(semitopo::Error::ChargesUnbalanced(_)) => check!(sum != 0, "balanced charges rejected"),
            Err(e) => return Err(e.to_string()),
        }
    }
    let el = secs(t);
    check!(el < 300.0, "took {el:.1} s");
    Ok(format!("{} chains on 4^3 in {} classes, free and transitive ({el:.1} s)", passing.len(), classes.len()))
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or(e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match r {
            Ok(msg) => println!("PASS {n:>2} {name}: {msg} [{:.1} s]", secs(t)),
            Err(msg) => {
                failed += 1;
                println!("FAIL {n:>2} {name}: {msg} [{:.1} s]", secs(t))
            }
        }
    };
    report(1, "calibration values", &mut calibration);
    report(2, "clifford suite", &mut clifford_suite);
    report(3, "dirac spectrum", &mut dirac_spectrum);
    report(4, "bilinear spectrum", &mut bilinear_suite);
    let t = Instant::now();
    let runs = run_builders();
    let build_time = secs(t);
    report(5, "poincare-hopf", &mut || {
        poincare_hopf(runs.as_ref().map_err(|e| e.clone())?).map(|m| format!("{m}; suite analysed in {build_time:.1} s"))
    });
    report(6, "jump law", &mut jump_law);
    report(7, "d=4 oracle agreement", &mut chiral_oracle);
    report(8, "euler chain certificates", &mut || euler_certificates(runs.as_ref().map_err(|e| e.clone())?));
    report(9, "rewiring detection", &mut rewiring);
    report(10, "z2 pipeline", &mut z2_pipeline);
    report(11, "brute-force homology oracle", &mut brute_force_homology);
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
