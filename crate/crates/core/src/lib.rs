//! Simulation of a cognitive network of colocated MIMO radars in heavy-tailed,
//! correlated clutter.
//!
//! A trial walks through coherent processing intervals (CPIs). In each one every
//! radar transmits with a beamformer chosen from the last decision, forms a robust
//! Wald statistic per angle bin, and the network fuses the statistics. A SARSA
//! agent, or one of the baseline policies, then picks which bins to illuminate next.
//!
//! ```
//! use cogradar::{load_scenario, run_campaign, PolicyKind};
//!
//! let text = "\
//! [radar]
//! n_tx = 2
//! n_rx = 2
//! pulses_per_cpi = 16
//! n_bins = 8
//! pfa_nominal = 0.01
//!
//! [timeline]
//! n_cpis = 3
//!
//! [target]
//! bin = 3
//! cpi_start = 0
//! cpi_end = 2
//! snr_db_per_radar = 0
//! ";
//! let scenario = load_scenario(text).unwrap();
//! let report = run_campaign(&scenario, PolicyKind::Orthogonal, 2, 7, Some(1)).unwrap();
//! assert_eq!(report.pd_curve[&3].len(), 3);
//! ```

pub mod array;
pub mod clutter;
pub mod cognition;
pub mod detector;
pub mod error;
pub mod fusion;
pub mod montecarlo;
pub mod scenario;

pub use array::{make_beamformer, steering, virtual_steering, Beamformer, CpiReturn, VirtualSteering};
pub use clutter::{validate_decay, Ar2dModel, ClutterConfig, ClutterField, Innovation};
pub use cognition::{PolicyKind, QTable, RlAction, RlState};
pub use detector::{cfar_threshold, marcum_q1, wald_statistic, DetectorConfig, LagRule, StatisticVector};
pub use error::{Error, Result};
pub use fusion::{decentralized_threshold, fuse_centralized, fuse_decentralized, FusedCpi};
pub use montecarlo::{run_campaign, run_trial, MetricsConfig, MetricsReport, RunManifest, TrialResult};
pub use scenario::{load_clutter, load_scenario, FusionMode, RadarParams, Scenario};
