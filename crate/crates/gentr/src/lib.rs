//! Exact-arithmetic engine for the correlation differentials of generalized
//! topological recursion on genus-zero spectral curves: the classical
//! residue recursion as an independent oracle, the x-y duality transform,
//! loop-equation and determinantal verification, and free-energy extraction.

pub mod builder;
pub mod ceo;
pub mod curve;
pub mod duality;
pub mod engine;
pub mod error;
pub mod forms;
pub mod frat;
pub mod jet;
pub mod kp;
pub mod loops;
pub mod mpoly;
pub mod multidiff;
pub mod num;
pub mod poly;
pub mod potential;
pub mod ratfun;
pub mod report;
pub mod tensor;
pub mod verify;

pub use curve::{parse_curve, SpectralCurve};
pub use engine::Engine;
pub use error::EngineError;
pub use forms::{OneForm, Point};
pub use multidiff::MultiDiff;
