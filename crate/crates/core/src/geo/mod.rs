//! Zone and flood-layer geometry: planar polygon types, validation, the
//! built-in equal-area projection and GeoJSON-style interchange.
//!
//! All coordinates are meters in a planar equal-area frame once loaded.
//! Rings are stored with explicit closure (first vertex repeated at the end)
//! and with normalized orientation: outers counterclockwise, holes clockwise.

pub(crate) mod geojson;
mod predicates;
mod project;
mod validate;

pub use geojson::{
    load_flood_layers, load_zones, parse_flood_layer, parse_zones, write_flood_layer, write_zones,
    CrsMode,
};
pub(crate) use predicates::{orient, point_on_segment, segments_intersect};
pub use project::{equal_area_project, project_coord, EARTH_RADIUS_M};
pub use validate::{validate_geometry, RingRef, ValidationReport, Violation};

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Grid to which input vertices are snapped before any overlay work.
pub const SNAP_GRID_M: f64 = 1e-9;

/// Rounds a coordinate to the [`SNAP_GRID_M`] grid. Values too large for the
/// grid to be representable are returned unchanged.
pub fn snap(v: f64) -> f64 {
    let scaled = v * 1e9;
    if scaled.abs() < 4.0e15 {
        scaled.round() / 1e9
    } else {
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Coord {
    pub x: f64,
    pub y: f64,
}

impl Coord {
    pub const fn new(x: f64, y: f64) -> Self {
        Coord { x, y }
    }

    pub(crate) fn snapped(self) -> Self {
        Coord::new(snap(self.x), snap(self.y))
    }
}

impl From<(f64, f64)> for Coord {
    fn from((x, y): (f64, f64)) -> Self {
        Coord { x, y }
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    pub fn empty() -> Self {
        BBox {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.min_x <= self.max_x && self.min_y <= self.max_y)
    }

    pub fn include(&mut self, c: Coord) {
        self.min_x = self.min_x.min(c.x);
        self.min_y = self.min_y.min(c.y);
        self.max_x = self.max_x.max(c.x);
        self.max_y = self.max_y.max(c.y);
    }

    pub fn merge(&mut self, other: &BBox) {
        self.min_x = self.min_x.min(other.min_x);
        self.min_y = self.min_y.min(other.min_y);
        self.max_x = self.max_x.max(other.max_x);
        self.max_y = self.max_y.max(other.max_y);
    }

    /// Closed-box overlap test.
    pub fn intersects(&self, other: &BBox) -> bool {
        self.min_x <= other.max_x
            && other.min_x <= self.max_x
            && self.min_y <= other.max_y
            && other.min_y <= self.max_y
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn area(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.width() * self.height()
        }
    }
}

/// A closed ring of vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    vertices: Vec<Coord>,
}

impl Ring {
    /// Builds a ring from vertices given with explicit or implicit closure.
    /// Consecutive duplicate vertices are dropped and the ring is closed
    /// explicitly. No validity checks are made here.
    pub fn new(vertices: impl IntoIterator<Item = Coord>) -> Self {
        let mut out: Vec<Coord> = Vec::new();
        for v in vertices {
            if out.last() != Some(&v) {
                out.push(v);
            }
        }
        if out.len() > 1 && out.first() == out.last() {
            out.pop();
        }
        if let Some(&first) = out.first() {
            out.push(first);
        }
        Ring { vertices: out }
    }

    /// Axis-aligned rectangle, counterclockwise.
    pub fn rectangle(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Ring::new([
            Coord::new(min_x, min_y),
            Coord::new(max_x, min_y),
            Coord::new(max_x, max_y),
            Coord::new(min_x, max_y),
        ])
    }

    /// Vertices including the closing repeat of the first vertex.
    pub fn vertices(&self) -> &[Coord] {
        &self.vertices
    }

    /// Vertices without the closing repeat.
    pub fn open_vertices(&self) -> &[Coord] {
        match self.vertices.len() {
            0 => &[],
            n => &self.vertices[..n - 1],
        }
    }

    /// Number of edges (equals the number of open vertices).
    pub fn edge_count(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }

    pub fn edges(&self) -> impl Iterator<Item = (Coord, Coord)> + '_ {
        self.vertices.windows(2).map(|w| (w[0], w[1]))
    }

    /// Shoelace signed area; positive for counterclockwise rings.
    pub fn signed_area(&self) -> f64 {
        let Some(&origin) = self.vertices.first() else {
            return 0.0;
        };
        let mut twice = 0.0;
        for (a, b) in self.edges() {
            let (ax, ay) = (a.x - origin.x, a.y - origin.y);
            let (bx, by) = (b.x - origin.x, b.y - origin.y);
            twice += ax * by - bx * ay;
        }
        twice / 2.0
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn is_ccw(&self) -> bool {
        self.signed_area() > 0.0
    }

    pub fn reverse(&mut self) {
        self.vertices.reverse();
    }

    pub fn bbox(&self) -> BBox {
        let mut b = BBox::empty();
        for &v in &self.vertices {
            b.include(v);
        }
        b
    }

    pub fn map_coords(&self, mut f: impl FnMut(Coord) -> Coord) -> Ring {
        Ring::new(self.open_vertices().iter().map(|&c| f(c)))
    }

    /// Winding number of the ring around `p` (nonzero means inside).
    pub fn winding_number(&self, p: Coord) -> i32 {
        let mut wn = 0;
        for (a, b) in self.edges() {
            if a.y <= p.y {
                if b.y > p.y && orient(a, b, p) > 0.0 {
                    wn += 1;
                }
            } else if b.y <= p.y && orient(a, b, p) < 0.0 {
                wn -= 1;
            }
        }
        wn
    }

    pub fn point_on_boundary(&self, p: Coord) -> bool {
        self.edges().any(|(a, b)| point_on_segment(p, a, b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub outer: Ring,
    pub holes: Vec<Ring>,
}

impl Polygon {
    pub fn new(outer: Ring, holes: Vec<Ring>) -> Self {
        let mut p = Polygon { outer, holes };
        p.normalize_orientation();
        p
    }

    pub fn normalize_orientation(&mut self) {
        if self.outer.signed_area() < 0.0 {
            self.outer.reverse();
        }
        for h in &mut self.holes {
            if h.signed_area() > 0.0 {
                h.reverse();
            }
        }
    }

    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        std::iter::once(&self.outer).chain(self.holes.iter())
    }

    pub fn area(&self) -> f64 {
        self.outer.area() - self.holes.iter().map(Ring::area).sum::<f64>()
    }
}

/// A collection of polygons. Polygons of one multipolygon may touch or, for
/// flood layers assembled from many features, overlap; area and overlay use
/// the positive-winding rule so overlap is never double counted.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MultiPolygon {
    pub polygons: Vec<Polygon>,
}

impl MultiPolygon {
    pub fn new(polygons: Vec<Polygon>) -> Self {
        MultiPolygon { polygons }
    }

    pub fn empty() -> Self {
        MultiPolygon::default()
    }

    pub fn from_polygon(p: Polygon) -> Self {
        MultiPolygon { polygons: vec![p] }
    }

    /// Convenience constructor for a single axis-aligned rectangle.
    pub fn rectangle(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self::from_polygon(Polygon::new(
            Ring::rectangle(min_x, min_y, max_x, max_y),
            Vec::new(),
        ))
    }

    pub fn is_empty(&self) -> bool {
        self.polygons.is_empty()
    }

    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        self.polygons.iter().flat_map(Polygon::rings)
    }

    pub fn vertex_count(&self) -> usize {
        self.rings().map(Ring::edge_count).sum()
    }

    pub fn normalize_orientation(&mut self) {
        for p in &mut self.polygons {
            p.normalize_orientation();
        }
    }

    pub fn bbox(&self) -> BBox {
        let mut b = BBox::empty();
        for p in &self.polygons {
            b.merge(&p.outer.bbox());
        }
        b
    }

    pub fn map_coords(&self, mut f: impl FnMut(Coord) -> Coord) -> MultiPolygon {
        let polygons = self
            .polygons
            .iter()
            .map(|p| {
                Polygon::new(
                    p.outer.map_coords(&mut f),
                    p.holes.iter().map(|h| h.map_coords(&mut f)).collect(),
                )
            })
            .collect();
        MultiPolygon { polygons }
    }

    pub(crate) fn snapped(&self) -> MultiPolygon {
        self.map_coords(Coord::snapped)
    }

    /// Sum of per-ring winding numbers at `p` under normalized orientation.
    pub fn winding_number(&self, p: Coord) -> i32 {
        self.rings().map(|r| r.winding_number(p)).sum()
    }

    /// Positive-winding containment test; boundary points are unspecified.
    pub fn contains(&self, p: Coord) -> bool {
        self.winding_number(p) > 0
    }
}

/// A spatial area acting as a network node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub zone_id: String,
    pub geometry: MultiPolygon,
    pub median_household_income: Option<f64>,
    pub population: Option<u64>,
}

impl Zone {
    pub fn new(zone_id: impl Into<String>, geometry: MultiPolygon) -> Self {
        Zone {
            zone_id: zone_id.into(),
            geometry,
            median_household_income: None,
            population: None,
        }
    }

    pub fn with_income(mut self, income: f64) -> Self {
        self.median_household_income = Some(income);
        self
    }

    pub fn with_population(mut self, population: u64) -> Self {
        self.population = Some(population);
        self
    }
}

/// One flood-hazard layer (e.g. the 100-year or 500-year floodplain).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloodLayer {
    pub label: String,
    pub geometry: MultiPolygon,
}

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{source_name}: parse error at line {line}, column {column}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{source_name}: feature {feature}: {message}")]
    Feature {
        source_name: String,
        feature: usize,
        message: String,
    },
    #[error("{source_name}: feature {feature} has no string property \"zone_id\"")]
    MissingZoneId { source_name: String, feature: usize },
    #[error("{source_name}: duplicate zone_id {zone_id:?}")]
    DuplicateZoneId {
        source_name: String,
        zone_id: String,
    },
    #[error("{source_name}: invalid geometry for {feature}: {report}")]
    InvalidGeometry {
        source_name: String,
        feature: String,
        report: ValidationReport,
    },
    #[error("{source_name}: zone {zone_id:?} has zero area")]
    ZeroAreaZone {
        source_name: String,
        zone_id: String,
    },
    #[error("coordinate out of range: lon {lon}, lat {lat}")]
    CoordinateOutOfRange { lon: f64, lat: f64 },
    #[error("at least one flood layer path is required")]
    NoLayers,
    #[error("{paths} flood layer paths but {labels} labels")]
    LabelCountMismatch { paths: usize, labels: usize },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_closure_is_normalized() {
        let implicit = Ring::new([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)].map(Coord::from));
        let explicit = Ring::new([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 0.0)].map(Coord::from));
        assert_eq!(implicit, explicit);
        assert_eq!(implicit.vertices().len(), 4);
        assert_eq!(implicit.edge_count(), 3);
    }

    #[test]
    fn consecutive_duplicates_dropped() {
        let r = Ring::new(
            [(0.0, 0.0), (0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (1.0, 1.0)].map(Coord::from),
        );
        assert_eq!(r.open_vertices().len(), 3);
    }

    #[test]
    fn orientation_normalized() {
        let mut cw = Ring::rectangle(0.0, 0.0, 2.0, 2.0);
        cw.reverse();
        let mut hole = Ring::rectangle(0.5, 0.5, 1.5, 1.5);
        assert!(hole.is_ccw());
        let p = Polygon::new(cw, vec![hole.clone()]);
        assert!(p.outer.is_ccw());
        assert!(!p.holes[0].is_ccw());
        assert_eq!(p.area(), 3.0);
        hole.reverse();
        assert_eq!(hole, p.holes[0]);
    }

    #[test]
    fn winding_containment() {
        let mp = MultiPolygon::new(vec![Polygon::new(
            Ring::rectangle(0.0, 0.0, 4.0, 4.0),
            vec![Ring::rectangle(1.0, 1.0, 2.0, 2.0)],
        )]);
        assert!(mp.contains(Coord::new(3.0, 3.0)));
        assert!(!mp.contains(Coord::new(1.5, 1.5)));
        assert!(!mp.contains(Coord::new(5.0, 1.5)));
    }

    #[test]
    fn snapping_is_idempotent() {
        for v in [0.1 + 0.2, -3.000_000_000_4, 123_456.789_012_345_6, 1e20] {
            assert_eq!(snap(snap(v)), snap(v));
        }
        assert_eq!(snap(0.1 + 0.2), snap(0.3));
    }

    #[test]
    fn bbox_contact_counts_as_intersection() {
        let a = Ring::rectangle(0.0, 0.0, 1.0, 1.0).bbox();
        let b = Ring::rectangle(1.0, 0.0, 2.0, 1.0).bbox();
        let c = Ring::rectangle(1.5, 0.0, 2.0, 1.0).bbox();
        assert!(a.intersects(&b));
        assert!(!a.intersects(&c));
    }
}
