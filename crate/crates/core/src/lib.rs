//! Numerical laboratory for the Donaldson geometric flow on symplectic
//! 2-forms of the flat 4-torus `(R/2πZ)^4`.

pub mod algebra;
pub mod grid;
pub mod sampling;
pub mod flow;
pub mod io;
pub mod kmap;
