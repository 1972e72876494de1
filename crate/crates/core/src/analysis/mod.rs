//! Least-squares fits of the fluorescence models and simple estimators.

mod estimators;
mod fit;
mod lm;

pub use estimators::{
    localized_atom_count, localized_atom_count_from_spectra, mean_atom_number, thermal_speed, transit_time,
    GeometryConfig,
};
pub use fit::{
    fit_coincidences, fit_exponential, fit_vtype_spectrum, CandidateScore, CoincidenceFit, CoincidenceFitOptions,
    FitParameter, FitResult, VTypeFitOptions,
};
