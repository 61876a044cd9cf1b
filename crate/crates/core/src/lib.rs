pub mod linalg;
pub mod objective;
pub mod optimizer;
pub mod testbed;
pub mod theory;
pub mod spectral;
pub mod dynamics;
pub mod certify;
pub mod cli;
