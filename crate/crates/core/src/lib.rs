//! Triangular-lattice Ising model under heat-bath Glauber dynamics: simulation,
//! percolation events, exact small-volume computations and Monte Carlo estimation.

pub mod dsu;
pub mod dynamics;
pub mod error;
pub mod events;
pub mod harness;
pub mod ising;
pub mod lattice;
pub mod oracle;

pub use error::{Error, Result};
pub use ising::{beta_c, BoundaryCondition, ModelParams, SpinConfig};
pub use lattice::{Region, SiteCoord};
