pub mod admissibility;
pub mod area;
pub mod catalog;
pub mod error;
pub mod exprcore;
pub mod geom;
pub mod immersion;
pub mod io;
pub mod jet;
pub mod linalg;
pub mod manifold;
pub mod multivector;
pub mod quadrature;
pub mod variation;

pub use error::{Error, Result};
