pub mod branches;
pub mod cli;
pub mod continuation;
pub mod dynamics;
pub mod error;
pub mod evolve;
pub mod grid;
pub mod linalg;
pub mod newton;
pub mod params;
pub mod spectral;
