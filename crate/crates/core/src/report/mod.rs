//! End-to-end orchestration: load, overlay, classify, ingest, build the
//! network, compute metrics and statistics, then write result files.

mod emit;

pub use emit::{emit_outputs, write_fp_rates, OUTPUT_FILES};

use std::io;
use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

use crate::geo::{load_flood_layers, load_zones, CrsMode, FloodLayer, GeoError, Zone};
use crate::network::{
    assign_groups, build_network, classify_exposure, AnalysisConfig, ExposureClass, Group,
    NetworkBuildStats, NetworkError, ZoneMetrics,
};
use crate::overlay::{compute_fp_rates, union_layers, HazardExposure, OverlayError};
use crate::parallel::Parallelism;
use crate::sci::{
    compute_sci_from_raw, read_raw_connectivity, read_user_counts, stream_edges_chunked, EdgeList,
    IngestError, IngestStats, ZoneFilter,
};
use crate::stats::{
    group_income_summary, group_incomes, skewness, welch_t_test, GroupSummary, Histogram,
    StatsError, TTestResult,
};
use crate::synth::SynthError;

/// Default number of histogram bins.
pub const DEFAULT_BINS: usize = 20;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("geo_ingest: {0}")]
    Geo(#[from] GeoError),
    #[error("flood_overlay: {0}")]
    Overlay(#[from] OverlayError),
    #[error("sci_ingest: {0}")]
    Ingest(#[from] IngestError),
    #[error("network_metrics: {0}")]
    Network(#[from] NetworkError),
    #[error("stats: {0}")]
    Stats(#[from] StatsError),
    #[error("synthgen: {0}")]
    Synth(#[from] SynthError),
    #[error("report: cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl PipelineError {
    /// 1 usage error, 2 data or validation error, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_)
            | PipelineError::Geo(GeoError::NoLayers)
            | PipelineError::Geo(GeoError::LabelCountMismatch { .. })
            | PipelineError::Overlay(OverlayError::NoLayers)
            | PipelineError::Network(NetworkError::InvalidConfig(_)) => 1,
            PipelineError::Synth(SynthError::InvalidParams(_)) => 1,
            PipelineError::Stats(_)
            | PipelineError::Network(NetworkError::Stats(_))
            | PipelineError::Network(NetworkError::WeightOverflow { .. })
            | PipelineError::Ingest(IngestError::Overflow { .. }) => 3,
            _ => 2,
        }
    }
}

/// Where edge weights come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EdgeSource {
    /// Scaled SCI file.
    Sci { path: PathBuf },
    /// Raw friendship counts plus per-zone user counts.
    Raw { raw: PathBuf, users: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputPaths {
    pub zones: PathBuf,
    pub flood: Vec<PathBuf>,
    pub flood_labels: Vec<String>,
    pub edges: EdgeSource,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub analysis: AnalysisConfig,
    pub crs: CrsMode,
    /// Groups compared by the income t-test.
    pub ttest_groups: (Group, Group),
    pub alpha: f64,
    pub bins: usize,
    /// Zones with a known population below this are excluded.
    pub min_population: Option<u64>,
    /// Does not affect results.
    #[serde(skip)]
    pub parallelism: Parallelism,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            analysis: AnalysisConfig::default(),
            crs: CrsMode::Planar,
            ttest_groups: (Group::G3, Group::G4),
            alpha: DEFAULT_ALPHA,
            bins: DEFAULT_BINS,
            min_population: None,
            parallelism: Parallelism::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.analysis.validate()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(PipelineError::Usage(format!(
                "alpha must lie strictly between 0 and 1, got {}",
                self.alpha
            )));
        }
        if self.bins == 0 {
            return Err(PipelineError::Usage("bins must be at least 1".into()));
        }
        if self.ttest_groups.0 == self.ttest_groups.1 {
            return Err(PipelineError::Usage(
                "the t-test needs two different groups".into(),
            ));
        }
        Ok(())
    }
}

/// Every knob and input that affected the results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub inputs: Option<InputPaths>,
    pub settings: PipelineConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkewnessPair {
    pub sum_of_sc: Option<f64>,
    pub res_tie_rate: Option<f64>,
    /// Why a value is missing, if one is.
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TTestReport {
    pub groups: (Group, Group),
    pub result: Option<TTestResult>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PopulationFilter {
    pub min_population: Option<u64>,
    pub dropped: Vec<String>,
    /// Kept because their population is unknown.
    pub kept_without_population: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOutputs {
    /// Study zones after the population filter.
    pub zones: Vec<Zone>,
    pub exposures: Vec<HazardExposure>,
    pub metrics: Vec<ZoneMetrics>,
    pub group_summaries: Vec<GroupSummary>,
    pub median_fp_rate: f64,
    pub median_res_tie_rate: f64,
    pub unassigned: Vec<String>,
    pub skewness: SkewnessPair,
    pub t_test: TTestReport,
    pub ingest: IngestStats,
    pub network: NetworkBuildStats,
    pub population_filter: PopulationFilter,
    pub hist_sum_of_sc: Histogram,
    pub hist_res_tie_rate: Histogram,
    pub config: ConfigEcho,
}

impl AnalysisOutputs {
    pub fn metric(&self, zone_id: &str) -> Option<&ZoneMetrics> {
        self.metrics.iter().find(|m| m.zone_id == zone_id)
    }

    pub fn count(&self, class: ExposureClass) -> usize {
        self.metrics
            .iter()
            .filter(|m| m.exposure_class == class)
            .count()
    }
}

fn filter_population(zones: Vec<Zone>, min: Option<u64>) -> (Vec<Zone>, PopulationFilter) {
    let mut filter = PopulationFilter {
        min_population: min,
        dropped: Vec::new(),
        kept_without_population: 0,
    };
    let Some(min) = min else {
        return (zones, filter);
    };
    let mut kept = Vec::with_capacity(zones.len());
    for z in zones {
        match z.population {
            Some(p) if p < min => filter.dropped.push(z.zone_id),
            Some(_) => kept.push(z),
            None => {
                filter.kept_without_population += 1;
                kept.push(z);
            }
        }
    }
    if filter.kept_without_population > 0 {
        log::warn!(
            "{} zones have no population and were kept by the population filter",
            filter.kept_without_population
        );
    }
    (kept, filter)
}

/// Loads, ingests and analyzes the inputs named by `inputs`.
pub fn run_pipeline(
    inputs: &InputPaths,
    config: &PipelineConfig,
) -> Result<AnalysisOutputs, PipelineError> {
    config.validate()?;
    let zones = load_zones(&inputs.zones, config.crs)?;
    let layers = load_flood_layers(&inputs.flood, &inputs.flood_labels, config.crs)?;
    let (zones, population_filter) = filter_population(zones, config.min_population);
    let (edges, ingest) = ingest_edges(&inputs.edges, &zones, config.parallelism)?;
    let echo = ConfigEcho {
        inputs: Some(inputs.clone()),
        settings: config.clone(),
    };
    analyze_filtered(
        zones,
        population_filter,
        &layers,
        &edges,
        ingest,
        config,
        echo,
    )
}

/// Reads the edge source restricted to `zones`.
pub fn ingest_edges(
    source: &EdgeSource,
    zones: &[Zone],
    mode: Parallelism,
) -> Result<(EdgeList, IngestStats), PipelineError> {
    let filter = ZoneFilter::new(zones.iter().map(|z| z.zone_id.clone()));
    match source {
        EdgeSource::Sci { path } => Ok(stream_edges_chunked(path, &filter, mode.threads(), mode)?),
        EdgeSource::Raw { raw, users } => {
            let raw = read_raw_connectivity(raw)?;
            let users = read_user_counts(users)?;
            let mut stats = IngestStats {
                rows_read: raw.len() as u64,
                ..Default::default()
            };
            for r in &raw {
                if filter.contains(&r.loc_a) && filter.contains(&r.loc_b) {
                    stats.rows_kept += 1;
                    if r.loc_a == r.loc_b {
                        stats.self_pairs += 1;
                    }
                } else {
                    stats.rows_dropped_unknown_zone += 1;
                }
            }
            Ok((compute_sci_from_raw(&raw, &users)?, stats))
        }
    }
}

/// Analyzes in-memory inputs; `ingest` is echoed into the outputs.
pub fn analyze(
    zones: Vec<Zone>,
    layers: &[FloodLayer],
    edges: &EdgeList,
    ingest: IngestStats,
    config: &PipelineConfig,
) -> Result<AnalysisOutputs, PipelineError> {
    config.validate()?;
    let (zones, population_filter) = filter_population(zones, config.min_population);
    let echo = ConfigEcho {
        inputs: None,
        settings: config.clone(),
    };
    analyze_filtered(
        zones,
        population_filter,
        layers,
        edges,
        ingest,
        config,
        echo,
    )
}

fn analyze_filtered(
    zones: Vec<Zone>,
    population_filter: PopulationFilter,
    layers: &[FloodLayer],
    edges: &EdgeList,
    ingest: IngestStats,
    config: &PipelineConfig,
    echo: ConfigEcho,
) -> Result<AnalysisOutputs, PipelineError> {
    let mode = config.parallelism;
    let flood = union_layers(layers)?;
    let raw_exposures = compute_fp_rates(&zones, &flood, mode)?;
    let classified = classify_exposure(&raw_exposures)?;
    let net = build_network(&zones, &classified.exposures, edges, config.analysis)?;
    let mut metrics = net.zone_metrics(mode)?;
    let groups = assign_groups(&mut metrics)?;
    if !groups.unassigned.is_empty() {
        log::warn!(
            "{} zones have no incident edges and no tie rate",
            groups.unassigned.len()
        );
    }

    let sums: Vec<f64> = metrics.iter().map(|m| m.sum_of_sc as f64).collect();
    let rates: Vec<f64> = metrics.iter().filter_map(|m| m.res_tie_rate).collect();
    let variant = config.analysis.skewness_variant;
    let mut notes = Vec::new();
    let mut skew = |values: &[f64], what: &str| match skewness(values, variant) {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(format!("{what}: {e}"));
            None
        }
    };
    let sk_sum = skew(&sums, "sum_of_sc");
    let sk_rate = skew(&rates, "res_tie_rate");
    let skewness = SkewnessPair {
        sum_of_sc: sk_sum,
        res_tie_rate: sk_rate,
        notes,
    };

    let (ga, gb) = config.ttest_groups;
    let t_test = match welch_t_test(
        &group_incomes(&metrics, &zones, ga),
        &group_incomes(&metrics, &zones, gb),
        config.alpha,
    ) {
        Ok(r) => TTestReport {
            groups: (ga, gb),
            result: Some(r),
            note: None,
        },
        Err(e) => {
            log::warn!("t-test {ga} vs {gb} not computed: {e}");
            TTestReport {
                groups: (ga, gb),
                result: None,
                note: Some(e.to_string()),
            }
        }
    };

    let group_summaries = group_income_summary(&metrics, &zones);
    let hist_sum_of_sc = Histogram::new(&sums, config.bins, None)?;
    let hist_res_tie_rate = Histogram::new(&rates, config.bins, Some((0.0, 100.0)))?;

    Ok(AnalysisOutputs {
        exposures: classified.exposures,
        metrics,
        group_summaries,
        median_fp_rate: classified.median_fp_rate,
        median_res_tie_rate: groups.median_res_tie_rate,
        unassigned: groups.unassigned,
        skewness,
        t_test,
        ingest,
        network: *net.build_stats(),
        population_filter,
        hist_sum_of_sc,
        hist_res_tie_rate,
        config: echo,
        zones,
    })
}

/// Floodplain percentages only, without classification or network.
pub fn overlay_only(
    zones_path: &PathBuf,
    flood: &[PathBuf],
    labels: &[String],
    crs: CrsMode,
    mode: Parallelism,
) -> Result<Vec<HazardExposure>, PipelineError> {
    let zones = load_zones(zones_path, crs)?;
    let layers = load_flood_layers(flood, labels, crs)?;
    let union = union_layers(&layers)?;
    Ok(compute_fp_rates(&zones, &union, mode)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerSummary {
    pub label: String,
    pub polygons: usize,
    pub vertices: usize,
}

/// Input validation results without any analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub zones: usize,
    pub zones_with_income: usize,
    pub zones_with_population: usize,
    pub population_filter: PopulationFilter,
    pub flood_layers: Vec<LayerSummary>,
    pub ingest: IngestStats,
    pub edges: usize,
}

/// Loads and validates every input and ingests the edges.
pub fn check_inputs(
    inputs: &InputPaths,
    config: &PipelineConfig,
) -> Result<CheckReport, PipelineError> {
    let zones = load_zones(&inputs.zones, config.crs)?;
    let layers = load_flood_layers(&inputs.flood, &inputs.flood_labels, config.crs)?;
    let zones_with_income = zones
        .iter()
        .filter(|z| z.median_household_income.is_some())
        .count();
    let zones_with_population = zones.iter().filter(|z| z.population.is_some()).count();
    let (zones, population_filter) = filter_population(zones, config.min_population);
    let (edges, ingest) = ingest_edges(&inputs.edges, &zones, config.parallelism)?;
    Ok(CheckReport {
        zones: zones.len(),
        zones_with_income,
        zones_with_population,
        population_filter,
        flood_layers: layers
            .iter()
            .map(|l| LayerSummary {
                label: l.label.clone(),
                polygons: l.geometry.polygons.len(),
                vertices: l.geometry.vertex_count(),
            })
            .collect(),
        ingest,
        edges: edges.len(),
    })
}
