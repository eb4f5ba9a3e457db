//! Batch front-end: configuration, the end-to-end pipeline, reports and
//! calibration tables. The binary in `main.rs` is a thin wrapper.

use crate::chains::{chains_equivalent, reconstruct_euler_chain, Certificate, ChainJson, EulerChain, HomologyClass};
use crate::charge::{degree_sphere_map, local_degree_with, poincare_hopf_verify, ChargeChain, PhVerdict};
use crate::clifford::{bilinear_hamiltonian, dirac_hamiltonian, gamma_rep, su2_from_unit};
use crate::fermiarc::{arc_report, project_chain, ArcReport};
use crate::field::{FieldSpec, SampledField};
use crate::grid::{sphere_mesh, torus_distance, TorusGrid};
use crate::invariants::{
    hopf_c1_calibration, profile_with, quaternionic_c2_calibration, wzw_winding_detailed, SliceProfile, Su2Lattice,
};
use crate::models::{
    constant_field, cycle_pair_field, dipole_insert, su2_wrap, surface_degree_field, trig_dirac_field, trig_weyl_field,
    z2_node_field, DipolePath, Z2NodeParams,
};
use crate::nodes::{locate_zeros_with, LocateOptions, NodeCharge, WeylNode};
use crate::{Error, Result, Ring};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

/// Field source: a named builder with its parameters, or a sample file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    TrigWeyl {
        m: f64,
    },
    TrigDirac {
        d: usize,
        m: f64,
    },
    Constant {
        d: usize,
        axis: usize,
    },
    SurfaceDegree {
        q: i64,
    },
    /// Dipoles inserted one after another into `base`.
    Dipole {
        base: Box<FieldConfig>,
        paths: Vec<DipolePath>,
    },
    CyclePair {
        d: usize,
        direction: usize,
        center: Vec<f64>,
        tube_radius: f64,
    },
    Z2Node {
        #[serde(default)]
        params: Z2NodeParams,
    },
    Sampled {
        path: PathBuf,
    },
}

impl FieldConfig {
    pub fn build(&self) -> Result<FieldSpec> {
        match self {
            FieldConfig::TrigWeyl { m } => trig_weyl_field(*m),
            FieldConfig::TrigDirac { d, m } => trig_dirac_field(*d, *m),
            FieldConfig::Constant { d, axis } => constant_field(*d, *axis),
            FieldConfig::SurfaceDegree { q } => Ok(surface_degree_field(*q)),
            FieldConfig::Dipole { base, paths } => {
                let mut f = base.build()?;
                for p in paths {
                    f = dipole_insert(&f, p)?;
                }
                Ok(f)
            }
            FieldConfig::CyclePair { d, direction, center, tube_radius } => {
                cycle_pair_field(*d, *direction, center, *tube_radius)
            }
            FieldConfig::Z2Node { params } => z2_node_field(params),
            FieldConfig::Sampled { path } => {
                let file = fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                let (samples, _) = SampledField::read_from(BufReader::new(file))?;
                FieldSpec::sampled(samples, &path.display().to_string())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Resolution {
    Uniform(usize),
    PerAxis(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: Resolution,
    /// Inclusive cell index ranges per axis to scan for nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_degree_residual")]
    pub degree_residual: f64,
    #[serde(default = "default_node_tol")]
    pub node_tol: f64,
    #[serde(default = "default_hermiticity")]
    pub hermiticity: f64,
}

fn default_degree_residual() -> f64 {
    0.05
}

fn default_node_tol() -> f64 {
    1e-8
}

fn default_hermiticity() -> f64 {
    1e-10
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            degree_residual: default_degree_residual(),
            node_tol: default_node_tol(),
            hermiticity: default_hermiticity(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Report file; standard output when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    /// Directory for `profile_axis<a>.csv` tables; none written when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tables: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub field: FieldConfig,
    pub grid: GridConfig,
    #[serde(default = "default_refinement")]
    pub refinement: usize,
    /// Axes for slice profiles and arc projection; all axes when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<Vec<usize>>,
    #[serde(default = "default_ring")]
    pub ring: Ring,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_refinement() -> usize {
    1
}

fn default_ring() -> Ring {
    Ring::Z
}

impl AnalysisConfig {
    pub fn new(field: FieldConfig, n: usize) -> Self {
        AnalysisConfig {
            field,
            grid: GridConfig { n: Resolution::Uniform(n), search: None },
            refinement: default_refinement(),
            directions: None,
            ring: Ring::Z,
            tolerances: Tolerances::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn grid(&self, d: usize) -> Result<TorusGrid> {
        let sizes = match &self.grid.n {
            Resolution::Uniform(n) => vec![*n; d],
            Resolution::PerAxis(v) => v.clone(),
        };
        if sizes.len() != d {
            return Err(Error::Config(format!("grid has {} axes, field has {d}", sizes.len())));
        }
        TorusGrid::new(d, &sizes).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn directions(&self, d: usize) -> Vec<usize> {
        self.directions.clone().unwrap_or_else(|| (0..d).collect())
    }

    /// Checks everything that does not need field evaluations.
    pub fn validate(&self, d: usize) -> Result<()> {
        let grid = self.grid(d)?;
        if let Some(dirs) = &self.directions {
            if let Some(&a) = dirs.iter().find(|&&a| a >= d) {
                return Err(Error::Config(format!("direction {a} out of range for d = {d}")));
            }
            let mut sorted = dirs.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != dirs.len() {
                return Err(Error::Config("repeated direction".into()));
            }
        }
        if let Some(search) = &self.grid.search {
            if search.len() != d {
                return Err(Error::Config("search needs one range per axis".into()));
            }
            for (a, &(lo, hi)) in search.iter().enumerate() {
                if lo > hi || hi >= grid.sizes()[a] {
                    return Err(Error::Config(format!("bad search range on axis {a}")));
                }
            }
        }
        let t = &self.tolerances;
        if !(t.degree_residual > 0.0 && t.degree_residual < 0.5) {
            return Err(Error::Config("degree_residual must lie in (0, 0.5)".into()));
        }
        if !(t.node_tol > 0.0) || !(t.hermiticity > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    VerificationFailure,
    NumericalGateFailure,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::VerificationFailure => 2,
            Status::NumericalGateFailure => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gate {
    pub name: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl Gate {
    fn measured(name: &str, value: f64, threshold: f64) -> Self {
        Gate { name: name.into(), pass: value <= threshold, value: Some(value), threshold: Some(threshold), message: None }
    }

    fn failed(name: &str, e: &Error) -> Self {
        Gate { name: name.into(), pass: false, value: None, threshold: None, message: Some(e.to_string()) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeRecord {
    pub position: Vec<f64>,
    pub radius: f64,
    pub residual: f64,
    pub charge: NodeCharge,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree_raw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EulerChainRecord {
    pub chain: ChainJson,
    pub added_windings: Vec<i64>,
    pub basepoint: Vec<usize>,
    pub pairs: Vec<(Vec<usize>, Vec<usize>)>,
    pub certificate: Certificate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub config_echo: AnalysisConfig,
    pub status: Status,
    pub nodes: Vec<NodeRecord>,
    pub charges: Option<ChargeChain>,
    pub ph_check: Option<PhVerdict>,
    pub profiles: Vec<SliceProfile>,
    pub euler_chain: Option<EulerChainRecord>,
    pub arcs: Vec<ArcReport>,
    pub gates: Vec<Gate>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One CSV table per profile: `(file name, contents)`.
    pub fn profile_tables(&self) -> Vec<(String, String)> {
        self.profiles
            .iter()
            .map(|p| {
                let mut rows: Vec<(f64, i64, bool)> = p.samples.iter().map(|s| (s.coordinate, s.value, false)).collect();
                rows.extend(p.jumps.iter().map(|j| (j.coordinate, j.delta, true)));
                rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
                let mut csv = String::from("coordinate,invariant,is_jump\n");
                for (c, v, j) in rows {
                    writeln!(csv, "{c},{v},{j}").unwrap();
                }
                (format!("profile_axis{}.csv", p.direction), csv)
            })
            .collect()
    }

    pub fn failing_gates(&self) -> Vec<&Gate> {
        self.gates.iter().filter(|g| !g.pass).collect()
    }
}

/// Result of [`analyze`]: the report plus the objects it was made from.
pub struct Analysis {
    pub report: Report,
    pub field: FieldSpec,
    pub grid: TorusGrid,
    pub nodes: Vec<WeylNode>,
    pub charges: Option<ChargeChain>,
    pub euler: Option<EulerChain>,
    /// The error that stopped the pipeline, if any.
    pub failure: Option<Error>,
}

impl Analysis {
    pub fn status(&self) -> Status {
        self.report.status
    }
}

/// Runs locate, local charges, the Poincare-Hopf check, slice profiles, chain
/// reconstruction and arc projection. Numerical-gate and verification failures
/// stop the pipeline but still produce a report; bad input is an `Err`.
pub fn analyze(config: &AnalysisConfig) -> Result<Analysis> {
    let field = config.field.build()?;
    config.validate(field.dim)?;
    let grid = config.grid(field.dim)?;
    let mut a = Analysis {
        report: Report {
            config_echo: config.clone(),
            status: Status::Ok,
            nodes: vec![],
            charges: None,
            ph_check: None,
            profiles: vec![],
            euler_chain: None,
            arcs: vec![],
            gates: vec![],
        },
        field,
        grid,
        nodes: vec![],
        charges: None,
        euler: None,
        failure: None,
    };
    if let Err((stage, e)) = run_stages(&mut a, config) {
        let status = if e.is_numerical_gate() {
            Status::NumericalGateFailure
        } else if e.is_verification_failure() {
            Status::VerificationFailure
        } else {
            return Err(e);
        };
        a.report.gates.push(Gate::failed(stage, &e));
        a.report.status = status;
        a.failure = Some(e);
    }
    Ok(a)
}

type Staged<T> = std::result::Result<T, (&'static str, Error)>;

fn stage<T>(name: &'static str, r: Result<T>) -> Staged<T> {
    r.map_err(|e| (name, e))
}

fn run_stages(a: &mut Analysis, config: &AnalysisConfig) -> Staged<()> {
    let tol = &config.tolerances;
    let ring = config.ring;
    let d = a.field.dim;
    let opts = LocateOptions { tol: tol.node_tol, search: config.grid.search.clone(), ..Default::default() };
    a.nodes = stage("locate", locate_zeros_with(&a.field, &a.grid, &opts))?;
    let worst = a.nodes.iter().map(|n| n.residual).fold(0.0, f64::max);
    a.report.gates.push(Gate::measured("node_residual", worst, tol.node_tol));

    let mut raws = vec![None; a.nodes.len()];
    let mut worst_degree: f64 = 0.0;
    for (i, node) in a.nodes.iter_mut().enumerate() {
        node.charge = if a.field.is_pair() {
            declared_charge(&a.field, node, ring)
        } else {
            let deg = stage("local_charge", local_degree_with(&a.field, node, config.refinement, tol.degree_residual))?;
            raws[i] = Some(deg.raw);
            worst_degree = worst_degree.max(deg.residual);
            match ring {
                Ring::Z => NodeCharge::Integer(deg.value),
                Ring::Z2 => NodeCharge::Z2 { value: deg.value.rem_euclid(2) as u8, verified: true },
            }
        };
    }
    a.report.nodes = a
        .nodes
        .iter()
        .zip(&raws)
        .map(|(n, &degree_raw)| NodeRecord {
            position: n.position.clone(),
            radius: n.radius,
            residual: n.residual,
            charge: n.charge,
            degree_raw,
        })
        .collect();
    if !a.field.is_pair() {
        a.report.gates.push(Gate::measured("degree_residual", worst_degree, tol.degree_residual));
    }
    let charges = stage("local_charge", ChargeChain::from_nodes(ring, &a.nodes))?;
    a.report.charges = Some(charges.clone());
    a.charges = Some(charges.clone());

    let ph = poincare_hopf_verify(&charges);
    a.report.ph_check = Some(ph);
    a.report.gates.push(Gate {
        name: "poincare_hopf".into(),
        pass: ph.pass,
        value: Some(ph.sum as f64),
        threshold: Some(0.0),
        message: (!ph.pass).then(|| format!("charge sum {} differs from the Euler characteristic 0", ph.sum)),
    });
    if !ph.pass {
        a.report.status = Status::VerificationFailure;
        a.failure = Some(Error::ChargesUnbalanced(ph.sum));
        return Ok(());
    }

    // Z2 charges of a tangent 2-field are not seen by slice degrees
    let directions = config.directions(d);
    let positions: Vec<Vec<f64>> = a.nodes.iter().map(|n| n.position.clone()).collect();
    if !(ring == Ring::Z2 && a.field.is_pair()) {
        for &dir in &directions {
            let p = stage("profile", profile_with(&a.field, dir, &a.grid, &positions, tol.degree_residual))?;
            for j in &p.jumps {
                let q: i64 = charges
                    .entries
                    .iter()
                    .filter(|e| crate::grid::periodic_delta(e.position[dir], j.coordinate).abs() < 1e-9)
                    .map(|e| e.charge)
                    .sum();
                if ring.reduce(j.delta - q) != 0 {
                    return Err(("jump_law", Error::InconsistentProfiles(dir)));
                }
            }
            a.report.profiles.push(p);
        }
        a.report.gates.push(Gate { name: "jump_law".into(), pass: true, value: None, threshold: None, message: None });
    }

    let euler = stage("euler_chain", reconstruct_euler_chain(&charges, &a.report.profiles, &a.grid, &positions))?;
    let cert = euler.certificate.clone();
    a.report.euler_chain = Some(EulerChainRecord {
        chain: euler.chain.to_json(),
        added_windings: euler.added_windings.clone(),
        basepoint: euler.basepoint.clone(),
        pairs: euler.pairs.clone(),
        certificate: cert.clone(),
    });
    a.report.gates.push(Gate {
        name: "certificate".into(),
        pass: cert.passed(),
        value: None,
        threshold: None,
        message: (!cert.passed()).then(|| {
            format!("boundary matches: {}, profiles match: {}", cert.boundary_matches, cert.profiles_match)
        }),
    });
    if !cert.passed() {
        let e = if cert.boundary_matches { Error::InconsistentProfiles(d) } else { Error::BoundaryMismatch };
        a.report.status = Status::VerificationFailure;
        a.failure = Some(e);
        a.euler = Some(euler);
        return Ok(());
    }
    for &dir in &directions {
        a.report.arcs.push(stage("arcs", arc_report(&project_chain(&euler.chain, dir)))?);
    }
    a.euler = Some(euler);
    Ok(())
}

fn declared_charge(field: &FieldSpec, node: &WeylNode, ring: Ring) -> NodeCharge {
    let hit = field
        .declared
        .iter()
        .filter(|dn| torus_distance(&dn.position, &node.position) < 1e-6)
        .min_by(|x, y| {
            torus_distance(&x.position, &node.position).total_cmp(&torus_distance(&y.position, &node.position))
        });
    match (hit, ring) {
        (Some(dn), Ring::Z2) => NodeCharge::Z2 { value: dn.charge.rem_euclid(2) as u8, verified: false },
        (Some(dn), Ring::Z) if dn.ring == Ring::Z => NodeCharge::Integer(dn.charge),
        _ => NodeCharge::Unknown,
    }
}

/// Writes the report (or prints it) and the profile tables.
pub fn write_outputs(report: &Report, report_path: Option<&Path>, tables: Option<&Path>) -> Result<()> {
    match report_path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, report.to_json())?
        }
        None => std::io::stdout().write_all(report.to_json().as_bytes())?,
    }
    if let Some(dir) = tables {
        fs::create_dir_all(dir)?;
        for (name, csv) in report.profile_tables() {
            fs::write(dir.join(name), csv)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArcDifference {
    pub direction: usize,
    pub differ: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub equivalent: bool,
    /// Class of the first chain minus the second.
    pub class: HomologyClass,
    pub arcs: Vec<ArcDifference>,
}

impl Comparison {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("comparison serializes");
        s.push('\n');
        s
    }
}

/// Analyzes both configs, matches their charge 0-chains within `match_tol`
/// and compares the reconstructed chains and projected arcs.
pub fn compare(a: &AnalysisConfig, b: &AnalysisConfig, match_tol: f64) -> Result<Comparison> {
    let ra = analyze(a)?;
    let rb = analyze(b)?;
    for r in [&ra, &rb] {
        if let Some(e) = &r.failure {
            return Err(e.clone());
        }
    }
    if ra.grid != rb.grid {
        return Err(Error::ChargeMismatch("grids differ".into()));
    }
    let (ca, cb) = (ra.charges.as_ref().unwrap(), rb.charges.as_ref().unwrap());
    if ca.ring != cb.ring || ca.entries.len() != cb.entries.len() {
        return Err(Error::ChargeMismatch(format!("{} versus {} charged nodes", ca.entries.len(), cb.entries.len())));
    }
    let mut used = vec![false; cb.entries.len()];
    for e in &ca.entries {
        let j = cb
            .entries
            .iter()
            .enumerate()
            .position(|(j, f)| {
                !used[j] && f.charge == e.charge && torus_distance(&f.position, &e.position) < match_tol
            })
            .ok_or_else(|| Error::ChargeMismatch(format!("no partner for charge {} at {:?}", e.charge, e.position)))?;
        used[j] = true;
    }
    let (la, lb) = (&ra.euler.as_ref().unwrap().chain, &rb.euler.as_ref().unwrap().chain);
    let eq = chains_equivalent(la, lb).map_err(|e| match e {
        Error::BoundaryMismatch => Error::ChargeMismatch("snapped charges differ".into()),
        other => other,
    })?;
    let arcs = a
        .directions(ra.field.dim)
        .into_iter()
        .map(|dir| {
            Ok(ArcDifference {
                direction: dir,
                differ: arc_report(&project_chain(la, dir))? != arc_report(&project_chain(lb, dir))?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Comparison { equivalent: eq.equivalent, class: eq.class, arcs })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumRow {
    /// Arc length along the path.
    pub s: f64,
    pub k: Vec<f64>,
    pub energies: Vec<f64>,
}

/// Band energies along the polyline through `path`, `points` samples per
/// segment plus the final corner. Vector fields give `h . gamma`; tangent
/// 2-fields (d = 5) give the bilinear operator with `c = e = 0`.
pub fn spectrum(field: &FieldSpec, path: &[Vec<f64>], points: usize, hermiticity: f64) -> Result<Vec<SpectrumRow>> {
    let d = field.dim;
    if path.len() < 2 || path.iter().any(|p| p.len() != d) || points == 0 {
        return Err(Error::InvalidArgument(format!("path needs at least two points of dimension {d}")));
    }
    let rep = gamma_rep(d)?;
    let mut ks: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut s0 = 0.0;
    for w in path.windows(2) {
        let len = torus_free_length(&w[0], &w[1]);
        for i in 0..points {
            let t = i as f64 / points as f64;
            ks.push((s0 + t * len, w[0].iter().zip(&w[1]).map(|(a, b)| a + t * (b - a)).collect()));
        }
        s0 += len;
    }
    ks.push((s0, path[path.len() - 1].clone()));
    ks.into_iter()
        .map(|(s, k)| {
            let op = if field.is_pair() {
                let (a, b) = field.eval_pair(&k);
                let zero = vec![0.0; d];
                bilinear_hamiltonian(&a, &b, &zero, &zero, &rep)?
            } else {
                dirac_hamiltonian(&field.eval(&k), &rep)
            };
            let defect = (&op.matrix - &op.matrix.adjoint()).max_abs();
            if defect > hermiticity {
                return Err(Error::NotHermitian(defect));
            }
            Ok(SpectrumRow { s, k, energies: op.spectrum() })
        })
        .collect()
}

fn torus_free_length(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum::<f64>().sqrt()
}

pub fn spectrum_csv(rows: &[SpectrumRow]) -> String {
    let mut out = String::new();
    let Some(first) = rows.first() else { return out };
    let mut head = vec!["s".to_string()];
    head.extend((0..first.k.len()).map(|i| format!("k{i}")));
    head.extend((0..first.energies.len()).map(|i| format!("e{i}")));
    writeln!(out, "{}", head.join(",")).unwrap();
    for r in rows {
        let vals: Vec<String> =
            std::iter::once(r.s).chain(r.k.iter().copied()).chain(r.energies.iter().copied()).map(|x| x.to_string()).collect();
        writeln!(out, "{}", vals.join(",")).unwrap();
    }
    out
}

/// Samples the configured field on the configured grid in the text format
/// read back by the `sampled` builder.
pub fn build_field(config: &AnalysisConfig, out: impl Write) -> Result<()> {
    let field = config.field.build()?;
    let grid = config.grid(field.dim)?;
    let kind = if field.is_pair() { "pair" } else { "vector" };
    field.sample(&grid).write_to(kind, out)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CalibrationOptions {
    /// Use deliberately low resolutions.
    pub coarse: bool,
    /// Reverse the orientation used by the first Chern number check.
    pub tamper_orientation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationRow {
    pub check: String,
    pub resolution: usize,
    pub value: f64,
    pub target: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub integer_correct: bool,
    pub pass: bool,
}

impl CalibrationRow {
    fn new(check: &str, resolution: usize, value: f64, target: f64, tolerance: f64) -> Self {
        let residual = (value - target).abs();
        CalibrationRow {
            check: check.into(),
            resolution,
            value,
            target,
            residual,
            tolerance,
            integer_correct: value.round() == target,
            pass: residual <= tolerance,
        }
    }
}

/// Degree-one wrap winding of the SU(2) lattice at `n^3`, unrounded.
pub fn wrap_winding(n: usize) -> f64 {
    let lat = Su2Lattice::from_fn([n; 3], |k| su2_from_unit(&su2_wrap(k)));
    match wzw_winding_detailed(&lat, 0.5) {
        Ok(w) => w.raw,
        Err(Error::WindingResidual { raw, .. }) => raw,
        Err(_) => f64::NAN,
    }
}

/// Calibration table: first and second Chern numbers of the reference
/// bundles, the SU(2) wrap winding and the degree of the identity of
/// `S^2`, `S^3`, `S^4`, each at two resolutions.
pub fn calibrate(opts: CalibrationOptions) -> Vec<CalibrationRow> {
    let pick = |fine: [usize; 2], coarse: [usize; 2]| if opts.coarse { coarse } else { fine };
    let mut rows = Vec::new();
    for n in pick([20, 32], [6, 10]) {
        rows.push(CalibrationRow::new("c1", n, hopf_c1_calibration(n, opts.tamper_orientation), 1.0, 0.01));
    }
    for n in pick([24, 32], [10, 14]) {
        rows.push(CalibrationRow::new("DD", n, wrap_winding(n), 1.0, 0.05));
    }
    for n in pick([8, 16], [4, 6]) {
        rows.push(CalibrationRow::new("c2", n, quaternionic_c2_calibration(n, false, false), 1.0, 0.05));
    }
    // coarser sphere meshes are refused by the image-angle gate
    for d in 3..=5 {
        for level in [2, 3] {
            let value = sphere_mesh(&vec![0.0; d], 1.0, level)
                .and_then(|m| {
                    let images: Vec<Vec<f64>> = (0..m.offsets.len()).map(|i| m.unit_offset(i)).collect();
                    degree_sphere_map(&m, &images)
                })
                .map_or(f64::NAN, |g| g.raw);
            rows.push(CalibrationRow::new(&format!("deg S^{}", d - 1), level, value, 1.0, 0.05));
        }
    }
    rows
}

pub fn calibration_table(rows: &[CalibrationRow]) -> String {
    let mut out = String::new();
    writeln!(out, "{:<10} {:>10} {:>14} {:>7} {:>12} {:>9}  status", "check", "resolution", "value", "target", "residual", "tolerance")
        .unwrap();
    for r in rows {
        writeln!(
            out,
            "{:<10} {:>10} {:>14.6} {:>7} {:>12.3e} {:>9}  {}",
            r.check,
            r.resolution,
            r.value,
            r.target,
            r.residual,
            r.tolerance,
            if r.pass { "pass" } else { "FAIL" }
        )
        .unwrap();
    }
    out
}

/// Parses `k;k;...` with comma-separated components; `pi` and multiples such
/// as `0.5pi` or `-pi` are accepted.
pub fn parse_path(text: &str) -> Result<Vec<Vec<f64>>> {
    text.split(';')
        .map(|p| p.split(',').map(|c| parse_component(c.trim())).collect::<Result<Vec<f64>>>())
        .collect()
}

fn parse_component(c: &str) -> Result<f64> {
    let bad = || Error::InvalidArgument(format!("bad path component `{c}`"));
    match c.strip_suffix("pi") {
        Some(m) => {
            let f = match m.trim() {
                "" | "+" => 1.0,
                "-" => -1.0,
                s => s.trim_end_matches('*').parse().map_err(|_| bad())?,
            };
            Ok(f * std::f64::consts::PI)
        }
        None => c.parse().map_err(|_| bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let ok = r#"{"field": {"builder": "trig_weyl", "m": 2.0}, "grid": {"n": 8}}"#;
        assert!(AnalysisConfig::from_json(ok).is_ok());
        let top = r#"{"field": {"builder": "trig_weyl", "m": 2.0}, "grid": {"n": 8}, "extra": 1}"#;
        assert!(matches!(AnalysisConfig::from_json(top), Err(Error::Config(_))));
        let inner = r#"{"field": {"builder": "trig_weyl", "m": 2.0, "q": 1}, "grid": {"n": 8}}"#;
        assert!(AnalysisConfig::from_json(inner).is_err());
        let tol = r#"{"field": {"builder": "trig_weyl", "m": 2.0}, "grid": {"n": 8}, "tolerances": {"nodetol": 1}}"#;
        assert!(AnalysisConfig::from_json(tol).is_err());
    }

    #[test]
    fn config_round_trip() {
        let c = AnalysisConfig {
            field: FieldConfig::Dipole {
                base: Box::new(FieldConfig::Constant { d: 3, axis: 0 }),
                paths: vec![DipolePath::straight(vec![1.0, 2.0, 1.0], 2, 2.0, 0.8)],
            },
            grid: GridConfig { n: Resolution::PerAxis(vec![8, 8, 12]), search: None },
            refinement: 2,
            directions: Some(vec![2]),
            ring: Ring::Z2,
            tolerances: Tolerances::default(),
            output: OutputConfig::default(),
        };
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(AnalysisConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn validation() {
        let mut c = AnalysisConfig::new(FieldConfig::TrigWeyl { m: 2.0 }, 8);
        assert!(c.validate(3).is_ok());
        c.directions = Some(vec![3]);
        assert!(c.validate(3).is_err());
        c.directions = None;
        c.grid.search = Some(vec![(0, 8), (0, 7), (0, 7)]);
        assert!(c.validate(3).is_err());
        c.grid.search = None;
        c.grid.n = Resolution::PerAxis(vec![8, 8]);
        assert!(c.validate(3).is_err());
    }

    #[test]
    fn path_parsing() {
        let p = parse_path("0,0,0; pi,0.5pi,-pi ;1.5,2,-0.25").unwrap();
        assert_eq!(p.len(), 3);
        assert!((p[1][1] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(p[1][2], -std::f64::consts::PI);
        assert!(parse_path("0,x").is_err());
    }

    #[test]
    fn dirac_bands_along_path() {
        let f = trig_weyl_field(2.0).unwrap();
        let rows = spectrum(&f, &parse_path("0,0,0;0,0,pi").unwrap(), 8, 1e-10).unwrap();
        assert_eq!(rows.len(), 9);
        for r in &rows {
            let h = crate::linalg::norm(&f.eval(&r.k));
            assert!((r.energies[0] + h).abs() < 1e-12 && (r.energies[1] - h).abs() < 1e-12);
        }
        assert!(spectrum_csv(&rows).starts_with("s,k0,k1,k2,e0,e1\n"));
    }

    #[test]
    fn sampled_round_trip() {
        let c = AnalysisConfig::new(FieldConfig::TrigWeyl { m: 2.0 }, 4);
        let mut buf = Vec::new();
        build_field(&c, &mut buf).unwrap();
        let (s, kind) = SampledField::read_from(&buf[..]).unwrap();
        assert_eq!(kind, "vector");
        let f = trig_weyl_field(2.0).unwrap();
        let g = c.grid(3).unwrap();
        for v in g.vertices() {
            assert_eq!(s.at_vertex(&v), &f.eval(&g.vertex_point(&v))[..]);
        }
    }
}
