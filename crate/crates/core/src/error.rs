use alloc::string::String;

/// Errors raised by the group, ring, approximation, spectral, oracle and
/// sofic layers.
#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("operands belong to different group descriptors")]
    DescriptorMismatch,
    #[error("element is not a valid element of this group: {0}")]
    ElementNotInGroup(String),
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("duplicate generator name `{0}`")]
    DuplicateGenerator(String),
    #[error("invalid multiplication table: {0}")]
    InvalidTable(String),
    #[error("group has no generators")]
    NoGenerators,
    #[error("group is infinite; operation needs a finite group")]
    NotFinite,
    #[error("assignment does not extend to a homomorphism: {0}")]
    NotHomomorphism(String),
    #[error("parse error at offset {offset} in `{input}`: {reason}")]
    Parse {
        input: String,
        offset: usize,
        reason: String,
    },
    #[error("matrix dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("operation needs exact (cyclotomic) coefficients")]
    NotExact,
    #[error("Galois index {j} is not a unit modulo the conductor {n}")]
    GaloisIndexNotUnit { j: i64, n: u32 },
    #[error("conjugacy class of `{0}` is infinite")]
    InfiniteClass(String),
    #[error("conjugacy class of `{0}` undecided within the enumeration budget")]
    UndecidedClass(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("approximation scheme cannot be realized: {0}")]
    Infeasible(String),
    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("machine-word rational arithmetic overflowed")]
    Overflow,
    #[error("linear system is inconsistent")]
    Inconsistent,
    #[error("spectral kind refers to untracked class index {0}")]
    UnknownKind(usize),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("negative spectrum below threshold: {0:.3e}")]
    NegativeSpectrum(f64),
    #[error("kernel width {width} exceeds certified radius {radius}")]
    WidthExceedsRadius { width: usize, radius: usize },
    #[error("unsupported descriptor: {0}")]
    Unsupported(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
