//! Extreme learning machines for quantitative finance.
//!
//! The crate covers ridge-trained random-feature networks ([`elm`]), node-by-node
//! growth with candidate selection ([`incremental`]), physics-informed solvers
//! for linear pricing PDEs ([`pinn`]), the pricing oracles that generate and
//! check training data ([`oracles`]), implied-volatility-surface fitting and
//! static-arbitrage auditing ([`ivs`]), a Gaussian-process baseline ([`gpr`]),
//! and intraday direction classification ([`classify`]).

pub mod activation;
pub mod classify;
pub mod data;
pub mod elm;
pub mod error;
pub mod gpr;
pub mod incremental;
pub mod ivs;
pub mod linalg;
pub mod metrics;
pub mod oracles;
pub mod pinn;
pub mod rng;

pub use activation::Activation;
pub use data::{Dataset, InputScaler};
pub use elm::{fit_ridge, ElmModel, HiddenLayer};
pub use error::{Error, Result};
