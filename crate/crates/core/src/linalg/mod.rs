pub mod charpoly;
pub mod eigen;
pub mod envelope;
pub mod exact;
pub mod modular;
pub mod sparse;

pub use eigen::{eigh, eigvalsh, Eigen};
pub use exact::{ExactField, SparseExact};
pub use sparse::SparseMatrix;
