pub mod classify;
pub mod heston;
pub mod ivs;
pub mod pde;
