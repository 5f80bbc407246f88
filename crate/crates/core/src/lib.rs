//! Degree-2 Siegel modular forms modulo p: truncated Fourier expansions, the
//! generators of the ring of modular forms, theta operators, restriction
//! operators and filtrations.

pub mod error;
pub mod experiments;
pub mod genforms;
pub mod halfint;
pub mod linalg;
pub mod modp;
pub mod nt;
pub mod qexp;
pub mod ringmodp;
pub mod thetaops;

pub use error::{Error, Result};
pub use halfint::HalfIntMat;
pub use qexp::{QExp1, QExp2};
