//! Two-parameter logistic IRT: model, likelihood, fitting, standard errors.

mod fit;
pub mod lbfgs;
mod model;

pub use fit::{
    fit, numerical_hessian, rank_by_ability, standard_errors, AbilityVector, Fit2PL, FitReport,
    FitSettings, ItemEstimate, SystemEstimate,
};
pub use model::{
    gradient, log_likelihood, log_sigmoid, predict_prob, sigmoid, ItemParameterSet, Objective,
    PriorConfig,
};
