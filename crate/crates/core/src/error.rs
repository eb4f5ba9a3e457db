use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported dimension {0} (expected 3, 4 or 5)")]
    UnsupportedDimension(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("on node: the field vanishes at the evaluation point")]
    OnNode,
    #[error("zero-locus not isolated: {0}")]
    NotIsolated(String),
    #[error("field vanishes on grid vertex {0:?}")]
    VanishesOnVertex(Vec<usize>),
    #[error("mesh too coarse: degree residual {residual:.4} (raw {raw:.6})")]
    MeshTooCoarse { raw: f64, residual: f64 },
    #[error("degenerate image simplex")]
    DegenerateImage,
    #[error("node on sphere: |h| = {0:e} at a mesh vertex")]
    NodeOnSphere(f64),
    #[error("slice hits node (axis {axis}, coordinate {coordinate})")]
    SliceHitsNode { axis: usize, coordinate: f64 },
    #[error("plaquette phase near pi; refine the slice grid")]
    PlaquetteNearPi,
    #[error("winding residual {residual:.4} (raw {raw:.6}); refine")]
    WindingResidual { raw: f64, residual: f64 },
    #[error("not a cycle")]
    NotACycle,
    #[error("non-integral winding along axis {0}")]
    NonIntegralWinding(usize),
    #[error("slice through chain vertex (axis {axis}, coordinate {coordinate})")]
    SliceThroughVertex { axis: usize, coordinate: f64 },
    #[error("charges unbalanced: total {0}")]
    ChargesUnbalanced(i64),
    #[error("inconsistent profiles along axis {0}")]
    InconsistentProfiles(usize),
    #[error("boundary mismatch")]
    BoundaryMismatch,
    #[error("dangling boundary: arc boundary differs from projected charges")]
    DanglingBoundary,
    #[error("charge mismatch: {0}")]
    ChargeMismatch(String),
    #[error("unknown charge at node {0}")]
    UnknownCharge(usize),
    #[error("tube too curved: {0}")]
    TubeTooCurved(String),
    #[error("base direction varies too much on tube")]
    BaseVariesOnTube,
    #[error("operator not hermitian: defect {0:e}")]
    NotHermitian(f64),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Whether the error comes from a numerical gate (as opposed to a
    /// topological verification failure or bad input).
    pub fn is_numerical_gate(&self) -> bool {
        matches!(
            self,
            Error::MeshTooCoarse { .. }
                | Error::DegenerateImage
                | Error::NodeOnSphere(_)
                | Error::PlaquetteNearPi
                | Error::WindingResidual { .. }
                | Error::NotIsolated(_)
                | Error::VanishesOnVertex(_)
                | Error::SliceHitsNode { .. }
                | Error::SliceThroughVertex { .. }
                | Error::NotHermitian(_)
        )
    }

    /// Whether the error is a failed topological consistency check.
    pub fn is_verification_failure(&self) -> bool {
        matches!(
            self,
            Error::ChargesUnbalanced(_)
                | Error::InconsistentProfiles(_)
                | Error::BoundaryMismatch
                | Error::DanglingBoundary
                | Error::ChargeMismatch(_)
                | Error::UnknownCharge(_)
                | Error::NotACycle
                | Error::NonIntegralWinding(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
