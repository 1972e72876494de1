pub mod error;
pub mod params;
pub mod curves;
pub mod bloch;
pub mod correlations;
pub mod montecarlo;
pub mod vdw;
pub mod orbit;
pub mod analysis;
