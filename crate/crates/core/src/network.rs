//! The socio-spatial network: zones as nodes carrying their flood exposure,
//! scaled social connectedness as undirected edge weights.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::Zone;
use crate::overlay::HazardExposure;
use crate::parallel::{map_range, Parallelism};
use crate::sci::EdgeList;
use crate::stats::{median_split, SkewnessVariant, StatsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExposureClass {
    #[serde(rename = "L")]
    Low,
    #[serde(rename = "H")]
    High,
}

impl ExposureClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ExposureClass::Low => "L",
            ExposureClass::High => "H",
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            ExposureClass::Low => ExposureClass::High,
            ExposureClass::High => ExposureClass::Low,
        }
    }
}

impl fmt::Display for ExposureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Quadrants of the (exposure, tie rate) plane:
/// G1 low exposure and low tie rate, G2 low exposure and high tie rate,
/// G3 high exposure and high tie rate, G4 high exposure and low tie rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    G1,
    G2,
    G3,
    G4,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::G1, Group::G2, Group::G3, Group::G4];

    pub fn classify(exposure: ExposureClass, high_tie_rate: bool) -> Group {
        match (exposure, high_tie_rate) {
            (ExposureClass::Low, false) => Group::G1,
            (ExposureClass::Low, true) => Group::G2,
            (ExposureClass::High, true) => Group::G3,
            (ExposureClass::High, false) => Group::G4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Group::G1 => "G1",
            Group::G2 => "G2",
            Group::G3 => "G3",
            Group::G4 => "G4",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "G1" => Ok(Group::G1),
            "G2" => Ok(Group::G2),
            "G3" => Ok(Group::G3),
            "G4" => Ok(Group::G4),
            other => Err(format!("unknown group {other:?}, expected G1..G4")),
        }
    }
}

/// How values equal to the median are classified. Only one rule exists:
/// at or above the median is "high".
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MedianTieRule {
    #[default]
    AtOrAboveIsHigh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub include_self_loops: bool,
    /// Edges lighter than this are dropped; 0 keeps everything.
    pub min_edge_weight: u64,
    pub top_k_per_node: Option<usize>,
    pub median_tie_rule: MedianTieRule,
    pub skewness_variant: SkewnessVariant,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            include_self_loops: false,
            min_edge_weight: 0,
            top_k_per_node: None,
            median_tie_rule: MedianTieRule::AtOrAboveIsHigh,
            skewness_variant: SkewnessVariant::Adjusted,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.top_k_per_node == Some(0) {
            return Err(NetworkError::InvalidConfig(
                "top_k_per_node must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("exposure classification needs at least 2 zones, got {0}")]
    TooFewZones(usize),
    #[error("zone {zone_id:?} has no hazard exposure")]
    MissingExposure { zone_id: String },
    #[error("zone {zone_id:?} has no exposure class; classify exposures first")]
    Unclassified { zone_id: String },
    #[error("unknown zone {zone_id:?}")]
    UnknownZone { zone_id: String },
    #[error("duplicate zone {zone_id:?}")]
    DuplicateZone { zone_id: String },
    #[error("invalid analysis configuration: {0}")]
    InvalidConfig(String),
    #[error("group assignment needs at least 2 zones with a defined tie rate, got {0}")]
    TooFewDefinedRates(usize),
    #[error("connectedness sum of zone {zone_id:?} overflows 64 bits")]
    WeightOverflow { zone_id: String },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Result of [`classify_exposure`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExposureClassification {
    pub median_fp_rate: f64,
    pub exposures: Vec<HazardExposure>,
}

impl ExposureClassification {
    pub fn count(&self, class: ExposureClass) -> usize {
        self.exposures
            .iter()
            .filter(|e| e.exposure_class == Some(class))
            .count()
    }
}

/// Splits zones at the median floodplain percentage: at or above is H.
pub fn classify_exposure(
    exposures: &[HazardExposure],
) -> Result<ExposureClassification, NetworkError> {
    if exposures.len() < 2 {
        return Err(NetworkError::TooFewZones(exposures.len()));
    }
    let rates: Vec<f64> = exposures.iter().map(|e| e.fp_rate).collect();
    let split = median_split(&rates)?;
    let exposures = exposures
        .iter()
        .zip(&split.high)
        .map(|(e, &high)| HazardExposure {
            exposure_class: Some(if high {
                ExposureClass::High
            } else {
                ExposureClass::Low
            }),
            ..e.clone()
        })
        .collect();
    Ok(ExposureClassification {
        median_fp_rate: split.median,
        exposures,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct NetworkBuildStats {
    pub edges_in: usize,
    pub edges_kept: usize,
    pub dropped_unknown_zone: usize,
    pub dropped_self_loops: usize,
    pub dropped_below_min_weight: usize,
    pub dropped_top_k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub zone_id: String,
    pub exposure: HazardExposure,
    pub class: ExposureClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct NetEdge {
    a: usize,
    b: usize,
    weight: u64,
}

/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct SocioSpatialNetwork {
    nodes: Vec<Node>,
    index: HashMap<String, usize>,
    edges: Vec<NetEdge>,
    /// CSR adjacency: neighbors of node i are `adj[offsets[i]..offsets[i+1]]`;
    /// a self-loop appears once in its node's list.
    offsets: Vec<usize>,
    adj: Vec<(usize, u64)>,
    config: AnalysisConfig,
    stats: NetworkBuildStats,
}

/// Builds the network over `zones` (node order follows `zones`).
///
/// Filters apply in order: unknown endpoint, self-loop policy, minimum
/// weight, then top-k. An edge survives top-k if it ranks within the k
/// heaviest edges of either endpoint; ties rank by neighbor zone order.
pub fn build_network(
    zones: &[Zone],
    exposures: &[HazardExposure],
    edges: &EdgeList,
    config: AnalysisConfig,
) -> Result<SocioSpatialNetwork, NetworkError> {
    config.validate()?;
    let by_id: HashMap<&str, &HazardExposure> =
        exposures.iter().map(|e| (e.zone_id.as_str(), e)).collect();
    let mut nodes = Vec::with_capacity(zones.len());
    let mut index = HashMap::with_capacity(zones.len());
    for (i, z) in zones.iter().enumerate() {
        let exposure =
            by_id
                .get(z.zone_id.as_str())
                .ok_or_else(|| NetworkError::MissingExposure {
                    zone_id: z.zone_id.clone(),
                })?;
        let class = exposure
            .exposure_class
            .ok_or_else(|| NetworkError::Unclassified {
                zone_id: z.zone_id.clone(),
            })?;
        if index.insert(z.zone_id.clone(), i).is_some() {
            return Err(NetworkError::DuplicateZone {
                zone_id: z.zone_id.clone(),
            });
        }
        nodes.push(Node {
            zone_id: z.zone_id.clone(),
            exposure: (*exposure).clone(),
            class,
        });
    }

    let mut stats = NetworkBuildStats {
        edges_in: edges.len(),
        ..Default::default()
    };
    // EdgeList guarantees one entry per unordered pair.
    let mut kept: Vec<NetEdge> = Vec::with_capacity(edges.len());
    for e in edges.edges() {
        let (Some(&a), Some(&b)) = (index.get(edges.id(e.a)), index.get(edges.id(e.b))) else {
            stats.dropped_unknown_zone += 1;
            continue;
        };
        if a == b && !config.include_self_loops {
            stats.dropped_self_loops += 1;
            continue;
        }
        if e.weight < config.min_edge_weight {
            stats.dropped_below_min_weight += 1;
            continue;
        }
        kept.push(NetEdge {
            a: a.min(b),
            b: a.max(b),
            weight: e.weight,
        });
    }
    kept.sort_unstable_by_key(|e| (e.a, e.b));

    if let Some(k) = config.top_k_per_node {
        let before = kept.len();
        kept = top_k_filter(nodes.len(), kept, k);
        stats.dropped_top_k = before - kept.len();
    }
    stats.edges_kept = kept.len();

    let (offsets, adj) = csr(nodes.len(), &kept);
    Ok(SocioSpatialNetwork {
        nodes,
        index,
        edges: kept,
        offsets,
        adj,
        config,
        stats,
    })
}

fn top_k_filter(n: usize, edges: Vec<NetEdge>, k: usize) -> Vec<NetEdge> {
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, e) in edges.iter().enumerate() {
        incident[e.a].push(i);
        if e.b != e.a {
            incident[e.b].push(i);
        }
    }
    let mut keep = vec![false; edges.len()];
    for (node, list) in incident.iter_mut().enumerate() {
        let other = |i: usize| {
            let e = edges[i];
            if e.a == node {
                e.b
            } else {
                e.a
            }
        };
        list.sort_by(|&x, &y| {
            edges[y]
                .weight
                .cmp(&edges[x].weight)
                .then(other(x).cmp(&other(y)))
        });
        for &i in list.iter().take(k) {
            keep[i] = true;
        }
    }
    edges
        .into_iter()
        .zip(keep)
        .filter_map(|(e, k)| k.then_some(e))
        .collect()
}

fn csr(n: usize, edges: &[NetEdge]) -> (Vec<usize>, Vec<(usize, u64)>) {
    let mut degree = vec![0usize; n];
    for e in edges {
        degree[e.a] += 1;
        if e.a != e.b {
            degree[e.b] += 1;
        }
    }
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0);
    for d in &degree {
        offsets.push(offsets.last().unwrap() + d);
    }
    let mut fill = offsets[..n].to_vec();
    let mut adj = vec![(0, 0); offsets[n]];
    for e in edges {
        adj[fill[e.a]] = (e.b, e.weight);
        fill[e.a] += 1;
        if e.a != e.b {
            adj[fill[e.b]] = (e.a, e.weight);
            fill[e.b] += 1;
        }
    }
    (offsets, adj)
}

/// Exact numerator and denominator of a zone's tie rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TieSums {
    /// Connectedness received from L zones.
    pub low: u128,
    pub total: u128,
}

impl TieSums {
    /// 100 · low / total, or `None` when total is 0. The fraction is reduced
    /// before dividing, so scaling all weights leaves the result bit-identical.
    pub fn rate(&self) -> Option<f64> {
        if self.total == 0 {
            return None;
        }
        let g = gcd(self.low, self.total);
        let (num, den) = (self.low / g, self.total / g);
        Some(100.0 * (num as f64) / (den as f64))
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl SocioSpatialNetwork {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn config(&self) -> &AnalysisConfig {
        &self.config
    }

    pub fn build_stats(&self) -> &NetworkBuildStats {
        &self.stats
    }

    /// Edges as (zone_a, zone_b, weight) in node order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, u64)> + '_ {
        self.edges.iter().map(|e| {
            (
                self.nodes[e.a].zone_id.as_str(),
                self.nodes[e.b].zone_id.as_str(),
                e.weight,
            )
        })
    }

    pub fn neighbors(&self, zone_id: &str) -> Result<Vec<(&str, u64)>, NetworkError> {
        let i = self.node_index(zone_id)?;
        Ok(self.adj[self.offsets[i]..self.offsets[i + 1]]
            .iter()
            .map(|&(j, w)| (self.nodes[j].zone_id.as_str(), w))
            .collect())
    }

    fn node_index(&self, zone_id: &str) -> Result<usize, NetworkError> {
        self.index
            .get(zone_id)
            .copied()
            .ok_or_else(|| NetworkError::UnknownZone {
                zone_id: zone_id.to_string(),
            })
    }

    fn sums_at(&self, i: usize) -> TieSums {
        let mut s = TieSums::default();
        for &(j, w) in &self.adj[self.offsets[i]..self.offsets[i + 1]] {
            s.total += w as u128;
            if self.nodes[j].class == ExposureClass::Low {
                s.low += w as u128;
            }
        }
        s
    }

    pub fn tie_sums(&self, zone_id: &str) -> Result<TieSums, NetworkError> {
        Ok(self.sums_at(self.node_index(zone_id)?))
    }

    /// Total incident connectedness. Self-loops count only when the
    /// network was built with them.
    pub fn sum_of_sc(&self, zone_id: &str) -> Result<u64, NetworkError> {
        let total = self.tie_sums(zone_id)?.total;
        u64::try_from(total).map_err(|_| NetworkError::WeightOverflow {
            zone_id: zone_id.to_string(),
        })
    }

    /// Percentage of a zone's connectedness that comes from L zones;
    /// `None` for zones without incident edges.
    pub fn res_tie_rate(&self, zone_id: &str) -> Result<Option<f64>, NetworkError> {
        Ok(self.tie_sums(zone_id)?.rate())
    }

    /// Per-zone metrics in node order, groups not yet assigned.
    pub fn zone_metrics(&self, mode: Parallelism) -> Result<Vec<ZoneMetrics>, NetworkError> {
        map_range(self.nodes.len(), mode, |i| {
            let node = &self.nodes[i];
            let sums = self.sums_at(i);
            let overflow = || NetworkError::WeightOverflow {
                zone_id: node.zone_id.clone(),
            };
            Ok(ZoneMetrics {
                zone_id: node.zone_id.clone(),
                fp_rate: node.exposure.fp_rate,
                exposure_class: node.class,
                sum_of_sc: u64::try_from(sums.total).map_err(|_| overflow())?,
                low_exposure_sc: u64::try_from(sums.low).map_err(|_| overflow())?,
                res_tie_rate: sums.rate(),
                group: None,
            })
        })
        .into_iter()
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoneMetrics {
    pub zone_id: String,
    pub fp_rate: f64,
    pub exposure_class: ExposureClass,
    pub sum_of_sc: u64,
    /// Part of `sum_of_sc` received from L zones.
    pub low_exposure_sc: u64,
    pub res_tie_rate: Option<f64>,
    pub group: Option<Group>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupAssignment {
    pub median_res_tie_rate: f64,
    /// Zones whose tie rate is undefined.
    pub unassigned: Vec<String>,
}

/// Assigns quadrant groups using the median tie rate over zones where it is
/// defined; at or above the median counts as high.
pub fn assign_groups(metrics: &mut [ZoneMetrics]) -> Result<GroupAssignment, NetworkError> {
    let defined: Vec<usize> = (0..metrics.len())
        .filter(|&i| metrics[i].res_tie_rate.is_some())
        .collect();
    if defined.len() < 2 {
        return Err(NetworkError::TooFewDefinedRates(defined.len()));
    }
    let rates: Vec<f64> = defined
        .iter()
        .map(|&i| metrics[i].res_tie_rate.unwrap())
        .collect();
    let split = median_split(&rates)?;
    let mut unassigned = Vec::new();
    for m in metrics.iter_mut() {
        m.group = None;
        if m.res_tie_rate.is_none() {
            unassigned.push(m.zone_id.clone());
        }
    }
    for (&i, &high) in defined.iter().zip(&split.high) {
        metrics[i].group = Some(Group::classify(metrics[i].exposure_class, high));
    }
    Ok(GroupAssignment {
        median_res_tie_rate: split.median,
        unassigned,
    })
}
