//! Certified top Lyapunov exponents for i.i.d. products of non-negative 2×2
//! matrices, with applications to Cantor set intersections and random
//! three-term recurrences.

pub mod cantor;
pub mod cli;
pub mod error;
pub mod exact;
pub mod kernel;
pub mod oracle;
pub mod pipeline;
pub mod positivize;
pub mod projective;
pub mod recurrence;

pub use error::{Error, Result};
pub use kernel::{compute_lyapunov, CertifiedValue, KernelSystem, WeightedFamily};
pub use projective::{ExtendedReal, Matrix2, MobiusClass, MobiusKind, MobiusMap};
