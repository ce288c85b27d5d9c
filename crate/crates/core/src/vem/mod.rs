//! Variational EM for the penalized mixture of latent trait models.
//!
//! One cycle runs, in order: responsibilities, latent posterior moments and
//! Laplace rates (VE-step); variational parameters (M-step 1); slopes and
//! intercepts (M-step 2); mixing proportions (M-step 3); then the lower bound
//! and the Aitken stopping rule.

mod aitken;
mod bound;
mod estep;
pub(crate) mod fit;
mod init;
mod mstep;
mod state;

pub use aitken::AitkenTracker;
pub use bound::{evaluate_bound, observation_bound, BoundPieces};
pub use estep::{ve_step_latent_moments, ve_step_rates, ve_step_responsibilities};
pub use fit::{fit, fit_from, FitConfig, FitResult, InitStrategy, PenaltyMode, RestartSummary, Run};
pub use init::initialize;
pub use mstep::{
    m_step_mixing_proportions, m_step_weights_intercepts, m_step_xi, ETA_FLOOR, XI_MIN,
};
pub use state::{LatentMoments, VariationalState};
