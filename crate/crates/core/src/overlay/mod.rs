//! Floodplain overlay: polygon areas, unions, intersections and each zone's
//! floodplain area percentage (FP_rate).

mod monte_carlo;
mod sweep;

pub use monte_carlo::{monte_carlo_area_estimate, monte_carlo_area_estimate_with, AreaEstimate};

use serde::Serialize;
use thiserror::Error;

use crate::geo::{validate_geometry, BBox, FloodLayer, MultiPolygon, Zone};
use crate::network::ExposureClass;
use crate::parallel::{map_slice, Parallelism};
use sweep::{clip_ring_to_box, SegmentSet};

#[derive(Debug, Error)]
pub enum OverlayError {
    #[error("invalid geometry ({what}): {report}")]
    InvalidGeometry {
        what: String,
        report: crate::geo::ValidationReport,
    },
    #[error("zone {zone_id:?} has zero area")]
    ZeroAreaZone { zone_id: String },
    #[error("no flood layers given")]
    NoLayers,
    #[error("monte carlo estimate needs at least one sample")]
    NoSamples,
    #[error("bounding box of the sampled geometry is empty")]
    EmptyBoundingBox,
}

/// Floodplain exposure of one zone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HazardExposure {
    pub zone_id: String,
    /// m²
    pub zone_area: f64,
    /// m² of the zone inside the flood union
    pub flood_area: f64,
    /// percent, 100·flood_area/zone_area
    pub fp_rate: f64,
    /// Set by [`crate::network::classify_exposure`].
    pub exposure_class: Option<ExposureClass>,
}

fn ensure_valid(geom: &MultiPolygon, what: &str) -> Result<(), OverlayError> {
    let report = validate_geometry(geom);
    if report.is_ok() {
        Ok(())
    } else {
        Err(OverlayError::InvalidGeometry {
            what: what.to_string(),
            report,
        })
    }
}

/// Area of a valid multipolygon (outers minus holes, overlap counted once).
pub fn polygon_area(geom: &MultiPolygon) -> Result<f64, OverlayError> {
    ensure_valid(geom, "polygon_area input")?;
    Ok(area_unchecked(geom))
}

pub(crate) fn area_unchecked(geom: &MultiPolygon) -> f64 {
    // Disjoint polygons (every loaded or constructed case in practice) need
    // no sweep; otherwise the sweep counts overlap once.
    if geom.polygons.len() <= 1 {
        return geom.polygons.first().map_or(0.0, |p| p.area().max(0.0));
    }
    let mut set = SegmentSet::new();
    set.add_geometry(0, &geom.snapped());
    set.sweep(|c| c[0] > 0, false).area
}

/// Geometric union of all layers.
pub fn union_layers(layers: &[FloodLayer]) -> Result<MultiPolygon, OverlayError> {
    if layers.is_empty() {
        return Err(OverlayError::NoLayers);
    }
    let mut set = SegmentSet::new();
    for layer in layers {
        ensure_valid(&layer.geometry, &format!("flood layer {:?}", layer.label))?;
        set.add_geometry(0, &layer.geometry.snapped());
    }
    Ok(set.sweep(|c| c[0] > 0, true).into_geometry())
}

/// Union of two valid multipolygons.
pub fn polygon_union(a: &MultiPolygon, b: &MultiPolygon) -> Result<MultiPolygon, OverlayError> {
    ensure_valid(a, "union operand a")?;
    ensure_valid(b, "union operand b")?;
    let mut set = SegmentSet::new();
    set.add_geometry(0, &a.snapped());
    set.add_geometry(1, &b.snapped());
    Ok(set.sweep(|c| c[0] > 0 || c[1] > 0, true).into_geometry())
}

/// Intersection of two valid multipolygons as geometry.
pub fn polygon_intersection(
    a: &MultiPolygon,
    b: &MultiPolygon,
) -> Result<MultiPolygon, OverlayError> {
    ensure_valid(a, "intersection operand a")?;
    ensure_valid(b, "intersection operand b")?;
    let mut set = SegmentSet::new();
    set.add_geometry(0, &a.snapped());
    set.add_geometry(1, &b.snapped());
    Ok(set.sweep(|c| c[0] > 0 && c[1] > 0, true).into_geometry())
}

/// Area of a ∩ b. Shared edges and points contribute nothing.
pub fn polygon_intersection_area(a: &MultiPolygon, b: &MultiPolygon) -> Result<f64, OverlayError> {
    ensure_valid(a, "intersection operand a")?;
    ensure_valid(b, "intersection operand b")?;
    Ok(clipped_intersection_area(&a.snapped(), &b.snapped()))
}

/// Intersection area with b's rings pre-clipped to a's bounding box.
fn clipped_intersection_area(a: &MultiPolygon, b: &MultiPolygon) -> f64 {
    let bb = a.bbox();
    if bb.is_empty() || !bb.intersects(&b.bbox()) {
        return 0.0;
    }
    let mut set = SegmentSet::new();
    set.add_geometry(0, a);
    add_clipped(
        &mut set,
        1,
        b.rings().map(|r| (r.bbox(), r.vertices())),
        &bb,
    );
    if set.is_empty() {
        return 0.0;
    }
    set.sweep(|c| c[0] > 0 && c[1] > 0, false).area
}

fn add_clipped<'a>(
    set: &mut SegmentSet,
    operand: usize,
    rings: impl Iterator<Item = (BBox, &'a [crate::geo::Coord])>,
    window: &BBox,
) {
    set.declare_operand(operand);
    for (rb, verts) in rings {
        if !rb.intersects(window) {
            continue;
        }
        let inside = rb.min_x >= window.min_x
            && rb.max_x <= window.max_x
            && rb.min_y >= window.min_y
            && rb.max_y <= window.max_y;
        if inside {
            set.add_ring(operand, verts);
        } else {
            let clipped = clip_ring_to_box(verts, window);
            if clipped.len() >= 4 {
                set.add_ring(operand, &clipped);
            }
        }
    }
}

/// Flood union prepared for many per-zone queries.
struct PreparedFlood<'a> {
    rings: Vec<(BBox, &'a [crate::geo::Coord])>,
}

impl<'a> PreparedFlood<'a> {
    fn new(union: &'a MultiPolygon) -> Self {
        PreparedFlood {
            rings: union.rings().map(|r| (r.bbox(), r.vertices())).collect(),
        }
    }

    fn flooded_area(&self, zone: &MultiPolygon) -> f64 {
        let bb = zone.bbox();
        let mut set = SegmentSet::new();
        set.add_geometry(0, zone);
        add_clipped(&mut set, 1, self.rings.iter().copied(), &bb);
        set.sweep(|c| c[0] > 0 && c[1] > 0, false).area
    }
}

/// FP_rate of every zone against an already-unioned flood geometry. Output
/// order follows `zones`; values do not depend on `mode`.
pub fn compute_fp_rates(
    zones: &[Zone],
    flood_union: &MultiPolygon,
    mode: Parallelism,
) -> Result<Vec<HazardExposure>, OverlayError> {
    ensure_valid(flood_union, "flood union")?;
    for z in zones {
        ensure_valid(&z.geometry, &format!("zone {:?}", z.zone_id))?;
    }
    let flood = flood_union.snapped();
    let prepared = PreparedFlood::new(&flood);
    map_slice(zones, mode, |z| {
        let geom = z.geometry.snapped();
        let zone_area = area_unchecked(&geom);
        if zone_area <= 0.0 {
            return Err(OverlayError::ZeroAreaZone {
                zone_id: z.zone_id.clone(),
            });
        }
        let flood_area = prepared.flooded_area(&geom).clamp(0.0, zone_area);
        Ok(HazardExposure {
            zone_id: z.zone_id.clone(),
            zone_area,
            flood_area,
            fp_rate: (100.0 * flood_area / zone_area).clamp(0.0, 100.0),
            exposure_class: None,
        })
    })
    .into_iter()
    .collect()
}
