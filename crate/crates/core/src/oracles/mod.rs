//! Ground-truth pricers: closed forms, series, quadrature and Monte Carlo.

pub mod barrier;
pub mod bs;
pub mod dataset;
pub mod heston;
pub mod implied;
pub mod mc;
pub mod normal;
pub mod rainbow;

pub use barrier::{double_barrier_call, BarrierPrice, BarrierSpec};
pub use bs::{bs_price, bs_vega, BsParams, OptionKind};
pub use dataset::{generate_heston_dataset, HestonDatasetConfig, HestonDatasetMeta, HestonRanges};
pub use heston::{heston_cos_price, CosSettings, HestonParams};
pub use implied::implied_vol;
pub use mc::{mc_double_barrier_call, mc_european, mc_heston, mc_rainbow_put_max, McEstimate, RainbowSpec};
pub use rainbow::rainbow_put_max;
