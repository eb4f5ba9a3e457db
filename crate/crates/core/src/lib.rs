//! Topological data of semimetal band structures defined by singular vector
//! fields on the Brillouin torus `T^d` (d = 3, 4, 5).
//!
//! The pipeline locates the zeros of a field, assigns local charges by the
//! degree of the unit-vector map on small enclosing spheres, measures the
//! slice invariants (c1 / DD / c2) on codimension-one subtori, reconstructs a
//! 1-chain whose boundary is the charge 0-chain (the Euler chain, or its mod-2
//! Kervaire analogue) and projects it to the surface torus to predict Fermi arc
//! connectivity.

pub mod chains;
pub mod charge;
pub mod cli;
pub mod clifford;
pub mod error;
pub mod fermiarc;
pub mod field;
pub mod grid;
pub mod invariants;
pub mod linalg;
pub mod models;
pub mod nodes;

pub use error::{Error, Result};

/// Coefficient ring for charges and chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum Ring {
    #[serde(rename = "Z")]
    Z,
    #[serde(rename = "Z2")]
    Z2,
}

impl Ring {
    pub fn reduce(self, c: i64) -> i64 {
        match self {
            Ring::Z => c,
            Ring::Z2 => c.rem_euclid(2),
        }
    }
}
