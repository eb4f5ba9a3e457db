//! Vector fields on `T^d`: analytic closures, grid samples, and tangent
//! 2-fields `(a, b)`.

use crate::grid::TorusGrid;
use crate::{Error, Result, Ring};
use std::f64::consts::TAU;
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Sampled values on a grid, evaluated off-grid by periodic multilinear
/// interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub grid: TorusGrid,
    pub components: usize,
    /// `values[linear_vertex * components + c]`.
    pub values: Vec<f64>,
}

impl SampledField {
    pub fn sample(grid: &TorusGrid, components: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let mut values = Vec::with_capacity(grid.num_vertices() * components);
        for v in grid.vertices() {
            values.extend(f(&grid.vertex_point(&v)));
        }
        SampledField { grid: grid.clone(), components, values }
    }

    pub fn at_vertex(&self, idx: &[usize]) -> &[f64] {
        let l = self.grid.linear(idx);
        &self.values[l * self.components..(l + 1) * self.components]
    }

    pub fn interpolate(&self, k: &[f64]) -> Vec<f64> {
        let d = self.grid.dim();
        let mut base = vec![0i64; d];
        let mut frac = vec![0.0; d];
        for a in 0..d {
            let c = self.grid.layer_coordinate(a, k[a]);
            let f = c.floor();
            base[a] = f as i64;
            frac[a] = c - f;
        }
        let mut out = vec![0.0; self.components];
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = vec![0i64; d];
            for a in 0..d {
                let bit = (corner >> a) & 1;
                idx[a] = base[a] + bit as i64;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if w == 0.0 {
                continue;
            }
            let v = self.at_vertex(&self.grid.wrap_index(&idx));
            out.iter_mut().zip(v).for_each(|(o, x)| *o += w * x);
        }
        out
    }

    /// Writes the text sample format: a `semitopo-field v1` line, `d`, `n`,
    /// `kind` header lines, then one row of components per vertex in linear
    /// (last axis fastest) order.
    pub fn write_to(&self, kind: &str, mut w: impl Write) -> Result<()> {
        writeln!(w, "semitopo-field v1")?;
        writeln!(w, "d {}", self.grid.dim())?;
        let n: Vec<String> = self.grid.sizes().iter().map(|x| x.to_string()).collect();
        writeln!(w, "n {}", n.join(" "))?;
        writeln!(w, "kind {kind}")?;
        for row in self.values.chunks(self.components) {
            let r: Vec<String> = row.iter().map(|x| format!("{x:.17e}")).collect();
            writeln!(w, "{}", r.join(" "))?;
        }
        Ok(())
    }

    /// Parses the format written by [`SampledField::write_to`]; returns the
    /// field and its `kind` tag (`vector` or `pair`).
    pub fn read_from(r: impl BufRead) -> Result<(Self, String)> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines.next().ok_or_else(|| Error::Config("truncated field file".into()))?.map_err(Error::from)
        };
        if next()?.trim() != "semitopo-field v1" {
            return Err(Error::Config("missing field file magic".into()));
        }
        let header = |line: String, key: &str| -> Result<String> {
            line.strip_prefix(key)
                .map(|s| s.trim().to_string())
                .ok_or_else(|| Error::Config(format!("expected `{key}` header line")))
        };
        let d: usize = header(next()?, "d ")?.parse().map_err(|_| Error::Config("bad d".into()))?;
        let n: Vec<usize> = header(next()?, "n ")?
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| Error::Config("bad n".into())))
            .collect::<Result<_>>()?;
        let kind = header(next()?, "kind ")?;
        let components = match kind.as_str() {
            "vector" => d,
            "pair" => 2 * d,
            other => return Err(Error::Config(format!("unknown field kind `{other}`"))),
        };
        let grid = TorusGrid::new(d, &n)?;
        let mut values = Vec::with_capacity(grid.num_vertices() * components);
        for _ in 0..grid.num_vertices() {
            let row = next()?;
            let parsed: Vec<f64> = row
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| Error::Config(format!("bad number `{s}`"))))
                .collect::<Result<_>>()?;
            if parsed.len() != components {
                return Err(Error::Config(format!("row has {} values, expected {components}", parsed.len())));
            }
            values.extend(parsed);
        }
        Ok((SampledField { grid, components, values }, kind))
    }
}

#[derive(Clone)]
pub enum FieldKind {
    Analytic(VectorFn),
    Sampled(SampledField),
    /// Tangent 2-field `(a, b)`.
    Pair(VectorFn, VectorFn),
    /// Sampled tangent 2-field, `a` then `b` per vertex.
    SampledPair(SampledField),
}

/// Builder-declared node, used as ground truth and for Z2 charges that are
/// not computed from samples.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DeclaredNode {
    pub position: Vec<f64>,
    pub charge: i64,
    pub ring: Ring,
}

#[derive(Clone)]
pub struct FieldSpec {
    pub dim: usize,
    pub kind: FieldKind,
    pub declared: Vec<DeclaredNode>,
    pub label: String,
}

impl fmt::Debug for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldSpec")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .field("declared", &self.declared)
            .finish()
    }
}

impl FieldSpec {
    pub fn analytic(dim: usize, label: &str, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        FieldSpec { dim, kind: FieldKind::Analytic(Arc::new(f)), declared: vec![], label: label.into() }
    }

    pub fn pair(
        dim: usize,
        label: &str,
        a: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        b: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        FieldSpec { dim, kind: FieldKind::Pair(Arc::new(a), Arc::new(b)), declared: vec![], label: label.into() }
    }

    pub fn sampled(samples: SampledField, label: &str) -> Result<Self> {
        let dim = samples.grid.dim();
        let kind = if samples.components == dim {
            FieldKind::Sampled(samples)
        } else if samples.components == 2 * dim {
            FieldKind::SampledPair(samples)
        } else {
            return Err(Error::InvalidArgument("sample width must be d or 2d".into()));
        };
        Ok(FieldSpec { dim, kind, declared: vec![], label: label.into() })
    }

    pub fn with_declared(mut self, nodes: Vec<DeclaredNode>) -> Self {
        self.declared = nodes;
        self
    }

    pub fn is_pair(&self) -> bool {
        matches!(self.kind, FieldKind::Pair(..) | FieldKind::SampledPair(_))
    }

    /// The defining vector field `h(k)`. For a tangent 2-field this is `b`
    /// with its component along `a` removed, scaled by `|a|` (the vector whose
    /// wedge with `a_hat` is `a ^ b`).
    pub fn eval(&self, k: &[f64]) -> Vec<f64> {
        match &self.kind {
            FieldKind::Analytic(f) => f(k),
            FieldKind::Sampled(s) => s.interpolate(k),
            FieldKind::Pair(..) | FieldKind::SampledPair(_) => {
                let (a, b) = self.eval_pair(k);
                let aa = crate::linalg::dot(&a, &a);
                if aa == 0.0 {
                    return vec![0.0; self.dim];
                }
                let p = crate::linalg::dot(&a, &b) / aa;
                let s = aa.sqrt();
                b.iter().zip(&a).map(|(bi, ai)| s * (bi - p * ai)).collect()
            }
        }
    }

    pub fn eval_pair(&self, k: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match &self.kind {
            FieldKind::Pair(a, b) => (a(k), b(k)),
            FieldKind::SampledPair(s) => {
                let v = s.interpolate(k);
                let (a, b) = v.split_at(self.dim);
                (a.to_vec(), b.to_vec())
            }
            _ => (self.eval(k), vec![0.0; self.dim]),
        }
    }

    /// `|h|`, or `lambda = |a ^ b|` for a tangent 2-field.
    pub fn magnitude(&self, k: &[f64]) -> f64 {
        if self.is_pair() {
            let (a, b) = self.eval_pair(k);
            crate::clifford::wedge_norm(&a, &b)
        } else {
            crate::linalg::norm(&self.eval(k))
        }
    }

    pub fn unit(&self, k: &[f64]) -> Result<Vec<f64>> {
        let h = self.eval(k);
        let n = crate::linalg::norm(&h);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::OnNode);
        }
        Ok(h.iter().map(|x| x / n).collect())
    }

    /// Samples the field on a grid (analytic fields are sampled exactly).
    pub fn sample(&self, grid: &TorusGrid) -> SampledField {
        if self.is_pair() {
            SampledField::sample(grid, 2 * self.dim, |k| {
                let (mut a, b) = self.eval_pair(k);
                a.extend(b);
                a
            })
        } else {
            SampledField::sample(grid, self.dim, |k| self.eval(k))
        }
    }

    /// Maximum deviation between values at `k` and at `k + 2pi e_i`,
    /// over the given probe points.
    pub fn periodicity_defect(&self, probes: &[Vec<f64>]) -> f64 {
        let mut worst: f64 = 0.0;
        for p in probes {
            let base = self.eval(p);
            for a in 0..self.dim {
                let mut q = p.clone();
                q[a] += TAU;
                let shifted = self.eval(&q);
                for (x, y) in base.iter().zip(&shifted) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
        worst
    }
}
