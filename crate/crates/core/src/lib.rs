//! Device-free multi-entity localization from WLAN signal strength.
//!
//! Each frame of RSS readings is turned into a binary environment map (which
//! grid locations are occupied) by minimizing an energy with temporal,
//! spatial and observation terms via an exact min-cut. The last `w` maps are
//! merged and clustered into entity counts and positions.
//!
//! Pipeline: [`preprocess`] smooths readings and drops drifting streams,
//! [`fingerprint`] holds the cross-calibrated per-location histograms,
//! [`energy`] and [`graphcut`] evaluate and minimize the energy,
//! [`tracker`] keeps the map history, [`clustering`] produces estimates.
//! [`simulator`] and [`harness`] generate synthetic testbeds and score runs.

pub mod clustering;
pub mod energy;
pub mod error;
pub mod fingerprint;
pub mod graphcut;
pub mod harness;
pub mod maxflow;
pub mod preprocess;
pub mod random;
pub mod simulator;
pub mod trace;
pub mod tracker;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    ContrastMode, EntityPosition, EnvironmentMap, Grid, GridLocation, GroundTruthFrame, HmmOrder, ModelParams, Point,
    RssFrame, StreamId,
};
