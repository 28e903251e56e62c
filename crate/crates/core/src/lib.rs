//! Hazard-exposure heterophily in socio-spatial networks.
//!
//! The crate overlays flood-hazard polygons on zone polygons to get each
//! zone's floodplain share, builds a network weighted by scaled social
//! connectedness, and measures how much of every zone's connectedness flows
//! to low-exposure zones (the resourceful tie rate). Zones are then split on
//! the two medians into four groups whose incomes can be compared.
//!
//! Pipeline stages, in order:
//!
//! * [`geo`]: zone and flood-layer loading, validation, equal-area projection
//! * [`overlay`]: exact polygon overlay and floodplain percentages
//! * [`sci`]: streaming edge-list ingest and scaling of raw friendship counts
//! * [`network`]: exposure classes, sum of connectedness, tie rates, groups
//! * [`stats`]: median, skewness, Welch's t-test, group income summaries
//! * [`report`]: end-to-end orchestration and output files
//!
//! [`synth`] generates seeded synthetic communities in the same file formats.

pub mod geo;
pub mod network;
pub mod overlay;
pub mod parallel;
pub mod report;
pub mod sci;
pub mod stats;
pub mod synth;

pub use geo::{Coord, CrsMode, FloodLayer, MultiPolygon, Polygon, Ring, Zone};
pub use network::{AnalysisConfig, ExposureClass, Group, SocioSpatialNetwork, ZoneMetrics};
pub use overlay::HazardExposure;
pub use parallel::Parallelism;
pub use sci::{EdgeList, EdgeRecord, IngestStats};
