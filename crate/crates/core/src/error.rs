use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("ambient dimension must be even and at least 2, got {0}")]
    OddDimension(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("zero vector is not allowed here")]
    ZeroVector,

    #[error("vector is not primitive: gcd of coordinates is {gcd}")]
    NotPrimitive { gcd: u64 },

    #[error("integer overflow in lattice arithmetic")]
    Overflow,

    #[error("matrix is not square: {rows} rows, row of length {cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not unimodular: determinant {det}")]
    NotUnimodular { det: String },

    #[error("unimodular matrix does not satisfy Q^T J Q = ±J")]
    NotConformalSymplectic,

    #[error("scaling coordinate {index} is zero")]
    ZeroScaling { index: usize },

    #[error("non-canonical element: {0}")]
    NonCanonical(String),

    #[error("invalid scalar literal: {0}")]
    InvalidScalar(String),

    #[error("invalid witness: {0}")]
    InvalidWitness(String),

    #[error("element is not homogeneous of degree {0}")]
    NotHomogeneous(String),

    #[error("element has a nonzero Cartan part")]
    CartanPart,

    #[error("radius {0} is too small for this operation")]
    RadiusTooSmall(i64),

    #[error("truncation box with {points} lattice points is too large")]
    BoxTooLarge { points: u128 },

    #[error("degree {degree} lies outside the truncation box of radius {radius}")]
    DegreeOutsideBox { degree: String, radius: i64 },

    #[error("internal consistency check failed: {0}")]
    Internal(String),
}

impl Error {
    /// Stable machine-readable code used by the CLI error documents.
    pub fn code(&self) -> &'static str {
        match self {
            Error::OddDimension(_) => "odd_dimension",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::ZeroVector => "zero_vector",
            Error::NotPrimitive { .. } => "not_primitive",
            Error::Overflow => "overflow",
            Error::NotSquare { .. } => "not_square",
            Error::NotUnimodular { .. } => "not_unimodular",
            Error::NotConformalSymplectic => "not_conformal_symplectic",
            Error::ZeroScaling { .. } => "zero_scaling",
            Error::NonCanonical(_) => "non_canonical",
            Error::InvalidScalar(_) => "invalid_scalar",
            Error::InvalidWitness(_) => "invalid_witness",
            Error::NotHomogeneous(_) => "not_homogeneous",
            Error::CartanPart => "cartan_part",
            Error::RadiusTooSmall(_) => "radius_too_small",
            Error::BoxTooLarge { .. } => "box_too_large",
            Error::DegreeOutsideBox { .. } => "degree_outside_box",
            Error::Internal(_) => "internal",
        }
    }
}
