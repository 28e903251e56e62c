#![allow(dead_code)]

use hazard_heterophily::network::ExposureClass;
use hazard_heterophily::overlay::union_layers;
use hazard_heterophily::sci::{EdgeList, EdgeRecord};
use hazard_heterophily::{FloodLayer, HazardExposure, MultiPolygon, Zone};
use rand::Rng;

pub fn fixture_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/pocket_county")
}

/// Union of axis-aligned rectangles on a 1/8 grid inside [0, 10]².
pub fn random_rectilinear(rng: &mut impl Rng, rects: usize) -> MultiPolygon {
    let layers: Vec<FloodLayer> = (0..rects)
        .map(|_| {
            let x0 = rng.random_range(0..72) as f64 / 8.0;
            let y0 = rng.random_range(0..72) as f64 / 8.0;
            let w = rng.random_range(1..24) as f64 / 8.0;
            let h = rng.random_range(1..24) as f64 / 8.0;
            FloodLayer {
                label: "r".into(),
                geometry: MultiPolygon::rectangle(x0, y0, x0 + w, y0 + h),
            }
        })
        .collect();
    union_layers(&layers).expect("rectangles are valid")
}

/// A network over `n` zones described by an explicit symmetric weight
/// matrix (0 = no edge) and exposure classes.
#[derive(Debug, Clone)]
pub struct MatrixNetwork {
    pub classes: Vec<ExposureClass>,
    pub weights: Vec<Vec<u64>>,
}

pub fn zone_id(i: usize) -> String {
    format!("n{i:02}")
}

impl MatrixNetwork {
    pub fn random(rng: &mut impl Rng, n: usize, density: f64, max_weight: u64) -> Self {
        let classes = (0..n)
            .map(|_| {
                if rng.random_bool(0.5) {
                    ExposureClass::Low
                } else {
                    ExposureClass::High
                }
            })
            .collect();
        let mut weights = vec![vec![0u64; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random_bool(density) {
                    let w = rng.random_range(1..=max_weight);
                    weights[i][j] = w;
                    weights[j][i] = w;
                }
            }
        }
        MatrixNetwork { classes, weights }
    }

    pub fn n(&self) -> usize {
        self.classes.len()
    }

    pub fn zones(&self) -> Vec<Zone> {
        (0..self.n())
            .map(|i| {
                let x = i as f64;
                Zone::new(zone_id(i), MultiPolygon::rectangle(x, 0.0, x + 1.0, 1.0))
            })
            .collect()
    }

    pub fn exposures(&self) -> Vec<HazardExposure> {
        self.classes
            .iter()
            .enumerate()
            .map(|(i, &c)| HazardExposure {
                zone_id: zone_id(i),
                zone_area: 1.0,
                flood_area: if c == ExposureClass::High { 1.0 } else { 0.0 },
                fp_rate: if c == ExposureClass::High { 100.0 } else { 0.0 },
                exposure_class: Some(c),
            })
            .collect()
    }

    pub fn edge_list(&self) -> EdgeList {
        let mut records = Vec::new();
        for i in 0..self.n() {
            for j in (i + 1)..self.n() {
                if self.weights[i][j] > 0 {
                    records.push(EdgeRecord::new(zone_id(i), zone_id(j), self.weights[i][j]));
                }
            }
        }
        EdgeList::from_records(&records).expect("matrix is symmetric")
    }

    /// Direct summation over row i of the matrix: (from L, total).
    pub fn brute_force_sums(&self, i: usize) -> (u128, u128) {
        let mut low = 0u128;
        let mut total = 0u128;
        for j in 0..self.n() {
            let w = self.weights[i][j] as u128;
            total += w;
            if self.classes[j] == ExposureClass::Low {
                low += w;
            }
        }
        (low, total)
    }
}
