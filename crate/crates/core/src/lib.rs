pub mod analysis;
pub mod classical;
pub mod contour;
pub mod ensembles;
pub mod error;
pub mod floquet;
pub mod grid;
pub mod io;
pub mod lattice;
pub mod map;
mod propagate;
pub mod tdse;
pub mod units;

pub use error::{Error, Result};
