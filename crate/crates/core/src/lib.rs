//! Simulation and processing of blade surface-pressure campaigns measured by
//! an on-blade MEMS array and a conventional tap/scanner system.

pub mod analysis;
pub mod campaign;
pub mod error;
pub mod flow;
pub mod io;
pub mod pipeline;
pub mod seed;
pub mod sensor;
pub mod series;

pub use error::{Error, Result};
pub use flow::{ChordStation, FlowConditions, FlowModelParams, SensorKind};
pub use io::CampaignManifest;
pub use pipeline::BladeState;
pub use sensor::{MemsSpec, ScannerSpec, TubeModel};
pub use series::TimeSeries;
