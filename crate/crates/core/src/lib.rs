//! Hierarchical cooperation in line-of-sight wireless networks: channel
//! synthesis, MIMO capacity, spatial degrees-of-freedom estimates, oscillatory
//! integral bounds and a throughput simulator for the hierarchical scheme.

// `!(x > 0.0)` guards are deliberate: they reject NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod constants;
pub mod dof;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod mimo;
pub mod oscillatory;
pub mod quadrature;
pub mod rng;
pub mod scheme;
pub mod stats;

pub use channel::{channel_matrix, los_gain, ChannelMatrix, ChannelModel, MatrixForm, MatrixSpec, PowerBudget};
pub use config::NetworkConfig;
pub use error::{Error, Result};
pub use geometry::{ClusterGrid, NodePlacement, Point2, Rect};
pub use constants::Constants;
pub use harness::{run_experiment, ExperimentId, ExperimentSpec, Manifest};
pub use mimo::{MimoLink, Spectrum};
pub use scheme::{HierarchyPlan, RegimeLabel, SchemeConstants, ThroughputReport};
