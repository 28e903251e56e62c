//! Seeded synthetic communities: a grid of unit-square zones with spatially
//! smooth incomes, flood coverage that can lean toward poorer zones, and
//! social edges drawn from a gravity model with income homophily.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{write_flood_layer, write_zones, FloodLayer, MultiPolygon, Polygon, Ring, Zone};
use crate::sci::{Edge, EdgeList};

/// Candidate pairs above this count are subsampled before edge selection.
const MAX_CANDIDATE_PAIRS: usize = 200_000;
/// Weight of an edge with affinity 1.
const WEIGHT_SCALE: f64 = 1e6;
/// Area of the 100-year square relative to the 500-year one.
const INNER_LAYER_SHARE: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub grid_w: usize,
    pub grid_h: usize,
    pub income_range: (f64, f64),
    /// Box-filter radius in cells.
    pub income_smoothness: f64,
    /// γ ∈ [−1, 1]: how strongly flood coverage tracks low income.
    pub flood_income_corr: f64,
    /// h ≥ 0: preference for ties between similar incomes.
    pub homophily_strength: f64,
    /// d ≥ 0: decay of tie affinity per cell of distance.
    pub distance_decay: f64,
    /// Target mean degree.
    pub edges_per_zone: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            grid_w: 20,
            grid_h: 20,
            income_range: (25_000.0, 150_000.0),
            income_smoothness: 2.0,
            flood_income_corr: 0.0,
            homophily_strength: 0.0,
            distance_decay: 0.3,
            edges_per_zone: 10.0,
            seed: 1,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidParams(m.to_string()));
        if self.grid_w == 0 || self.grid_h == 0 || self.grid_w * self.grid_h < 4 {
            return bad("the grid needs at least 4 zones");
        }
        if self.grid_w.max(self.grid_h) > 10_000 {
            return bad("grid dimensions are limited to 10000");
        }
        let (lo, hi) = self.income_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return bad("income range must satisfy low < high");
        }
        if !(self.income_smoothness >= 0.0 && self.income_smoothness.is_finite()) {
            return bad("income smoothness must be a finite non-negative number");
        }
        if !(-1.0..=1.0).contains(&self.flood_income_corr) {
            return bad("flood-income correlation must lie in [-1, 1]");
        }
        if !(self.homophily_strength >= 0.0 && self.homophily_strength.is_finite()) {
            return bad("homophily strength must be a finite non-negative number");
        }
        if !(self.distance_decay >= 0.0 && self.distance_decay.is_finite()) {
            return bad("distance decay must be a finite non-negative number");
        }
        if !(self.edges_per_zone > 0.0 && self.edges_per_zone.is_finite()) {
            return bad("edges per zone must be positive");
        }
        Ok(())
    }

    fn zone_count(&self) -> usize {
        self.grid_w * self.grid_h
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic parameters: {0}")]
    InvalidParams(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCommunity {
    pub params: SynthParams,
    /// Row-major, bottom row first.
    pub zones: Vec<Zone>,
    /// Flooded share of each zone's area, in zone order.
    pub flood_fraction: Vec<f64>,
    /// "100yr" then "500yr"; the first lies inside the second.
    pub flood_layers: Vec<FloodLayer>,
    pub edges: EdgeList,
}

pub const ZONES_FILE: &str = "zones.geojson";
pub const SCI_FILE: &str = "sci.tsv";

impl SyntheticCommunity {
    /// File names written by [`SyntheticCommunity::write`], flood layers in
    /// layer order.
    pub fn flood_file_names(&self) -> Vec<String> {
        self.flood_layers
            .iter()
            .map(|l| format!("flood_{}.geojson", l.label))
            .collect()
    }

    /// Writes zones, flood layers and the scaled SCI file into `out_dir`.
    pub fn write(&self, out_dir: impl AsRef<Path>) -> Result<(), SynthError> {
        let dir = out_dir.as_ref();
        fs::create_dir_all(dir).map_err(|source| SynthError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        write_file(&dir.join(ZONES_FILE), |w| write_zones(&self.zones, w))?;
        for (layer, name) in self.flood_layers.iter().zip(self.flood_file_names()) {
            write_file(&dir.join(name), |w| write_flood_layer(layer, w))?;
        }
        write_file(&dir.join(SCI_FILE), |w| self.edges.write_tsv(w))
    }
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
) -> Result<(), SynthError> {
    let io_err = |source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    f(&mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Generates a community; identical params always give identical output.
pub fn generate_community(params: &SynthParams) -> Result<SyntheticCommunity, SynthError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (w, h) = (params.grid_w, params.grid_h);
    let n = params.zone_count();

    let incomes = income_field(params, &mut rng);
    let flood_fraction = flood_fractions(&incomes, params.flood_income_corr, &mut rng);

    let width = (w.max(h) - 1).to_string().len();
    let mut zones = Vec::with_capacity(n);
    let mut outer = Vec::with_capacity(n);
    let mut inner = Vec::with_capacity(n);
    for i in 0..n {
        let (x, y) = ((i % w) as f64, (i / w) as f64);
        let population = rng.random_range(500..5_000u64);
        zones.push(
            Zone::new(
                format!("z{:0width$}_{:0width$}", i / w, i % w),
                MultiPolygon::rectangle(x, y, x + 1.0, y + 1.0),
            )
            .with_income(incomes[i])
            .with_population(population),
        );
        // Squares anchored at the lower-left corner never touch a neighbor's.
        let side = flood_fraction[i].sqrt();
        let inner_side = (flood_fraction[i] * INNER_LAYER_SHARE).sqrt();
        outer.push(Polygon::new(
            Ring::rectangle(x, y, x + side, y + side),
            vec![],
        ));
        inner.push(Polygon::new(
            Ring::rectangle(x, y, x + inner_side, y + inner_side),
            vec![],
        ));
    }
    let flood_layers = vec![
        FloodLayer {
            label: "100yr".into(),
            geometry: MultiPolygon::new(inner),
        },
        FloodLayer {
            label: "500yr".into(),
            geometry: MultiPolygon::new(outer),
        },
    ];

    let edges = social_edges(params, &zones, &incomes, &mut rng);
    Ok(SyntheticCommunity {
        params: params.clone(),
        zones,
        flood_fraction,
        flood_layers,
        edges,
    })
}

/// Uniform noise smoothed by a separable box filter, min-max scaled to the
/// income range and rounded to whole currency units.
fn income_field(params: &SynthParams, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (w, h) = (params.grid_w, params.grid_h);
    let noise: Vec<f64> = (0..w * h).map(|_| rng.random::<f64>()).collect();
    let r = params.income_smoothness.round() as usize;
    let rows = box_filter(&noise, w, h, r, true);
    let smooth = box_filter(&rows, w, h, r, false);
    let lo = smooth.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = smooth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (a, b) = params.income_range;
    smooth
        .iter()
        .map(|&v| {
            let u = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            (a + u * (b - a)).round()
        })
        .collect()
}

/// Mean over a window of radius `r` along rows (or columns), truncated at
/// the grid edge.
fn box_filter(v: &[f64], w: usize, h: usize, r: usize, along_rows: bool) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for y in 0..h {
        for x in 0..w {
            let (pos, len) = if along_rows { (x, w) } else { (y, h) };
            let (from, to) = (pos.saturating_sub(r), (pos + r).min(len - 1));
            let mut sum = 0.0;
            for k in from..=to {
                sum += if along_rows {
                    v[y * w + k]
                } else {
                    v[k * w + x]
                };
            }
            out[y * w + x] = sum / (to - from + 1) as f64;
        }
    }
    out
}

/// Latent score γ·s + √(1−γ²)·ε with s the standardized negative income;
/// the score's rank sets the flooded fraction ((rank + ½)/n)².
fn flood_fractions(incomes: &[f64], gamma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = incomes.len() as f64;
    let mean = incomes.iter().sum::<f64>() / n;
    let sd = (incomes.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let noise_weight = (1.0 - gamma * gamma).max(0.0).sqrt();
    let score: Vec<f64> = incomes
        .iter()
        .map(|&inc| {
            let s = if sd > 0.0 { -(inc - mean) / sd } else { 0.0 };
            let eps: f64 = rng.sample(StandardNormal);
            gamma * s + noise_weight * eps
        })
        .collect();
    let mut order: Vec<usize> = (0..score.len()).collect();
    order.sort_by(|&a, &b| score[a].total_cmp(&score[b]).then(a.cmp(&b)));
    let mut fraction = vec![0.0; score.len()];
    for (rank, &i) in order.iter().enumerate() {
        fraction[i] = ((rank as f64 + 0.5) / n).powi(2);
    }
    fraction
}

/// Tie affinity exp(−|Δincome|·h/σ)·exp(−d·distance) between two zones.
fn affinity(params: &SynthParams, incomes: &[f64], sigma: f64, i: usize, j: usize) -> f64 {
    let w = params.grid_w;
    let (dx, dy) = (
        (i % w) as f64 - (j % w) as f64,
        (i / w) as f64 - (j / w) as f64,
    );
    let dist = dx.hypot(dy);
    let gap = if sigma > 0.0 {
        (incomes[i] - incomes[j]).abs() / sigma
    } else {
        0.0
    };
    (-gap * params.homophily_strength).exp() * (-params.distance_decay * dist).exp()
}

/// Selects n·k/2 pairs by weighted sampling without replacement
/// (Efraimidis–Spirakis keys) with probability proportional to affinity.
fn social_edges(
    params: &SynthParams,
    zones: &[Zone],
    incomes: &[f64],
    rng: &mut ChaCha8Rng,
) -> EdgeList {
    let n = zones.len();
    let mean = incomes.iter().sum::<f64>() / n as f64;
    let sigma = (incomes.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();

    let total_pairs = n * (n - 1) / 2;
    let candidates: Vec<(u32, u32)> = if total_pairs <= MAX_CANDIDATE_PAIRS {
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i as u32, j as u32)))
            .collect()
    } else {
        let mut set = BTreeSet::new();
        while set.len() < MAX_CANDIDATE_PAIRS {
            let a = rng.random_range(0..n as u32);
            let b = rng.random_range(0..n as u32);
            if a != b {
                set.insert((a.min(b), a.max(b)));
            }
        }
        set.into_iter().collect()
    };
    let target =
        ((n as f64 * params.edges_per_zone / 2.0).round() as usize).clamp(1, candidates.len());

    let mut keyed: Vec<(f64, u32, u32, f64)> = candidates
        .into_iter()
        .map(|(a, b)| {
            let w = affinity(params, incomes, sigma, a as usize, b as usize);
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            let key = if w > 0.0 {
                u.ln() / w
            } else {
                f64::NEG_INFINITY
            };
            (key, a, b, w)
        })
        .collect();
    keyed.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    keyed.truncate(target);

    // Zone ids are zero-padded row-major, so index order is id order.
    let ids: Vec<String> = zones.iter().map(|z| z.zone_id.clone()).collect();
    let mut edges: Vec<Edge> = keyed
        .into_iter()
        .map(|(_, a, b, w)| Edge {
            a,
            b,
            weight: ((WEIGHT_SCALE * w).round() as u64).max(1),
        })
        .collect();
    edges.sort_unstable_by_key(|e| (e.a, e.b));
    EdgeList::from_parts(ids, edges)
}
