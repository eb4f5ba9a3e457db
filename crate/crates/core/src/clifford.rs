//! Gamma-matrix representations, Dirac-type and bilinear Bloch Hamiltonians,
//! spectral projectors, symmetry operators and the chiral SU(2) map.

use crate::linalg::{hermitian_eigenvalues, CMatrix, C64, I, ONE, ZERO};
use crate::{Error, Result};

pub fn pauli() -> [CMatrix; 3] {
    [
        CMatrix::from_rows(&[&[ZERO, ONE], &[ONE, ZERO]]),
        CMatrix::from_rows(&[&[ZERO, -I], &[I, ZERO]]),
        CMatrix::from_rows(&[&[ONE, ZERO], &[ZERO, -ONE]]),
    ]
}

/// Antiunitary operator `V o kappa` (kappa = complex conjugation).
#[derive(Debug, Clone)]
pub struct Antiunitary {
    pub unitary: CMatrix,
}

impl Antiunitary {
    /// `Theta A Theta^{-1} = V conj(A) V^dagger`.
    pub fn conjugate(&self, a: &CMatrix) -> CMatrix {
        &(&self.unitary * &a.conj()) * &self.unitary.adjoint()
    }

    /// `Theta^2 = V conj(V)`.
    pub fn square(&self) -> CMatrix {
        &self.unitary * &self.unitary.conj()
    }
}

/// Irreducible Hermitian Clifford generators for d = 3, 4, 5.
#[derive(Debug, Clone)]
pub struct GammaRep {
    pub d: usize,
    pub matrices: Vec<CMatrix>,
    /// Quaternionic structure; `i sigma_2 kappa` for d = 3,
    /// `(1 (x) i sigma_2) kappa` for d = 4, 5.
    pub theta: Antiunitary,
    /// `gamma_5 = gamma_1 gamma_2 gamma_3 gamma_4` for d = 4, 5 (the chiral
    /// operator S in d = 4).
    pub chirality: Option<CMatrix>,
}

impl GammaRep {
    pub fn size(&self) -> usize {
        self.matrices[0].dim()
    }

    /// `sum_i v_i gamma_i`.
    pub fn contract(&self, v: &[f64]) -> CMatrix {
        let mut m = CMatrix::zeros(self.size());
        for (g, &x) in self.matrices.iter().zip(v) {
            if x != 0.0 {
                m = &m + &g.scale_re(x);
            }
        }
        m
    }
}

pub fn gamma_rep(d: usize) -> Result<GammaRep> {
    let [s1, s2, s3] = pauli();
    let id2 = CMatrix::identity(2);
    let isy = s2.scale(I);
    match d {
        3 => Ok(GammaRep { d, matrices: vec![s1, s2, s3], theta: Antiunitary { unitary: isy }, chirality: None }),
        4 | 5 => {
            let g = vec![s2.kron(&s1), s2.kron(&s2), s2.kron(&s3), s1.kron(&id2), s3.kron(&id2)];
            let chir = g[4].clone();
            let matrices = g.into_iter().take(d).collect();
            Ok(GammaRep { d, matrices, theta: Antiunitary { unitary: id2.kron(&isy) }, chirality: Some(chir) })
        }
        _ => Err(Error::UnsupportedDimension(d)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum OperatorKind {
    Dirac,
    Bilinear,
}

/// A Bloch Hamiltonian at one momentum.
#[derive(Debug, Clone)]
pub struct BlochOperator {
    pub k: Option<Vec<f64>>,
    pub matrix: CMatrix,
    pub kind: OperatorKind,
}

impl BlochOperator {
    pub fn spectrum(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }
}

/// `H = h . gamma`.
pub fn dirac_hamiltonian(h: &[f64], rep: &GammaRep) -> BlochOperator {
    BlochOperator { k: None, matrix: rep.contract(h), kind: OperatorKind::Dirac }
}

/// Valence projector `P = (1 - h_hat . gamma) / 2`.
pub fn fermi_projector(h: &[f64], rep: &GammaRep) -> Result<CMatrix> {
    let n = crate::linalg::norm(h);
    if n == 0.0 {
        return Err(Error::OnNode);
    }
    let unit: Vec<f64> = h.iter().map(|x| -x / n).collect();
    let id = CMatrix::identity(rep.size());
    Ok((&id + &rep.contract(&unit)).scale_re(0.5))
}

/// `H = (i/2)[a.gamma, b.gamma] + (i/2)[c.gamma, e.gamma]` on the d = 5
/// representation.
pub fn bilinear_hamiltonian(a: &[f64], b: &[f64], c: &[f64], e: &[f64], rep: &GammaRep) -> Result<BlochOperator> {
    if rep.d != 5 {
        return Err(Error::UnsupportedDimension(rep.d));
    }
    let half_i = C64::new(0.0, 0.5);
    let first = rep.contract(a).commutator(&rep.contract(b)).scale(half_i);
    let second = rep.contract(c).commutator(&rep.contract(e)).scale(half_i);
    Ok(BlochOperator { k: None, matrix: &first + &second, kind: OperatorKind::Bilinear })
}

/// `|a ^ b|`, the area of the parallelogram spanned by a and b.
pub fn wedge_norm(a: &[f64], b: &[f64]) -> f64 {
    let aa = crate::linalg::dot(a, a);
    let bb = crate::linalg::dot(b, b);
    let ab = crate::linalg::dot(a, b);
    (aa * bb - ab * ab).max(0.0).sqrt()
}

/// `{+-(lambda + mu), +-(lambda - mu)}`, ascending.
pub fn bilinear_spectrum(lambda: f64, mu: f64) -> Result<[f64; 4]> {
    if lambda < 0.0 || mu < 0.0 {
        return Err(Error::InvalidArgument("bilinear magnitudes must be non-negative".into()));
    }
    let mut v = [lambda + mu, -(lambda + mu), lambda - mu, mu - lambda];
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Orthogonalises `(c, e)` against span(a, b) and returns `(lambda, mu)` of the
/// resulting mutually orthogonal pairs.
pub fn bilinear_magnitudes(a: &[f64], b: &[f64], c: &[f64], e: &[f64]) -> (f64, f64) {
    let lambda = wedge_norm(a, b);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in [a, b] {
        let mut w = v.to_vec();
        for q in &basis {
            let p = crate::linalg::dot(&w, q);
            w.iter_mut().zip(q).for_each(|(x, y)| *x -= p * y);
        }
        let n = crate::linalg::norm(&w);
        if n > 1e-14 {
            basis.push(w.iter().map(|x| x / n).collect());
        }
    }
    let project = |v: &[f64]| {
        let mut w = v.to_vec();
        for q in &basis {
            let p = crate::linalg::dot(&w, q);
            w.iter_mut().zip(q).for_each(|(x, y)| *x -= p * y);
        }
        w
    };
    let mu = wedge_norm(&project(c), &project(e));
    (lambda, mu)
}

/// The SU(2) matrix `U = [[h4 + i h3, h2 + i h1], [-h2 + i h1, h4 - i h3]]`.
pub fn chiral_unitary(h: &[f64]) -> Result<CMatrix> {
    if h.len() != 4 {
        return Err(Error::InvalidArgument("chiral unitary needs a 4-vector".into()));
    }
    let n = crate::linalg::norm(h);
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("chiral unitary needs a unit vector, |h| = {n}")));
    }
    Ok(su2_from_unit(h))
}

/// Same as [`chiral_unitary`] without the unit-norm check.
pub fn su2_from_unit(h: &[f64]) -> CMatrix {
    let (h1, h2, h3, h4) = (h[0], h[1], h[2], h[3]);
    CMatrix::from_rows(&[&[C64::new(h4, h3), C64::new(h2, h1)], &[C64::new(-h2, h1), C64::new(h4, -h3)]])
}

/// Lower-left 2x2 block of a 4x4 matrix.
pub fn lower_left_block(m: &CMatrix) -> CMatrix {
    CMatrix::from_rows(&[&[m[(2, 0)], m[(2, 1)]], &[m[(3, 0)], m[(3, 1)]]])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Symmetry {
    /// Time reversal `T = Theta`, required to commute.
    T,
    /// Particle-hole `C = Theta`, required to anticommute.
    C,
    /// Chiral `S = gamma_5`, required to anticommute.
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Verdict {
    Holds,
    Opposite,
    Indeterminate,
}

impl Verdict {
    pub fn sign(self) -> i32 {
        match self {
            Verdict::Holds => 1,
            Verdict::Opposite => -1,
            Verdict::Indeterminate => 0,
        }
    }
}

pub fn symmetry_check(h: &BlochOperator, op: Symmetry, rep: &GammaRep) -> Result<Verdict> {
    let transformed = match op {
        Symmetry::T | Symmetry::C => rep.theta.conjugate(&h.matrix),
        Symmetry::S => {
            let s = rep.chirality.as_ref().ok_or_else(|| Error::InvalidArgument("no chiral operator for d = 3".into()))?;
            &(s * &h.matrix) * s
        }
    };
    let wanted_sign = match op {
        Symmetry::T => 1.0,
        Symmetry::C | Symmetry::S => -1.0,
    };
    let tol = 1e-10 * h.matrix.max_abs().max(1.0);
    let plus = (&transformed - &h.matrix).max_abs() <= tol;
    let minus = (&transformed + &h.matrix).max_abs() <= tol;
    // the zero matrix satisfies both relations
    Ok(match (plus, minus) {
        (true, true) => Verdict::Holds,
        (true, false) if wanted_sign > 0.0 => Verdict::Holds,
        (false, true) if wanted_sign < 0.0 => Verdict::Holds,
        (true, false) | (false, true) => Verdict::Opposite,
        _ => Verdict::Indeterminate,
    })
}
