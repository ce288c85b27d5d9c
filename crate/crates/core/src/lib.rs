//! Penalized mixtures of latent trait models for clustering binary data.
//!
//! Each observation comes from one of G components; within a component the
//! items follow a logistic latent trait model with D standard-normal traits.
//! Slopes carry gamma-Laplace priors with item- and component-specific rates,
//! which shrinks uninformative loadings to exactly zero. Estimation is by
//! variational EM on the Jaakkola-Jordan bound; model selection uses BIC with
//! a Gauss-Hermite log-likelihood evaluated after convergence.
//!
//! ```no_run
//! use pmltm::{fit, simulation::{generate_dataset, SimulationSpec}, FitConfig, Hyperparameters};
//!
//! let (data, truth) = generate_dataset(&SimulationSpec::table1(7)).unwrap();
//! let config = FitConfig::new(Hyperparameters::new(2, 1, 1.0, 0.5));
//! let result = fit(&data, &config).unwrap();
//! println!("BIC {:?}, ARI {}", result.bic,
//!     pmltm::selection::adjusted_rand_index(&result.labels, &truth).unwrap());
//! ```

pub mod error;
pub mod exec;
pub mod matrix;
pub mod model;
pub mod numeric;
pub mod persist;
pub mod porter;
pub mod quadrature;
pub mod selection;
pub mod simulation;
pub mod text;
pub mod vem;

pub use error::{Error, Result};
pub use exec::Execution;
pub use matrix::BinaryMatrix;
pub use model::{Hyperparameters, ModelParameters};
pub use vem::{fit, FitConfig, FitResult, InitStrategy, PenaltyMode, VariationalState};
