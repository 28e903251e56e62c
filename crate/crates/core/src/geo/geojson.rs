//! GeoJSON-style FeatureCollection reading and writing.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{
    equal_area_project, validate_geometry, Coord, FloodLayer, GeoError, MultiPolygon, Polygon,
    Ring, Zone,
};

/// How input coordinates are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrsMode {
    /// Planar meters in an equal-area frame, used as-is.
    #[default]
    Planar,
    /// Longitude/latitude degrees, projected on load.
    LonLat,
}

impl FromStr for CrsMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "planar" => Ok(CrsMode::Planar),
            "lonlat" => Ok(CrsMode::LonLat),
            other => Err(format!(
                "unknown crs mode {other:?} (expected planar|lonlat)"
            )),
        }
    }
}

impl fmt::Display for CrsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CrsMode::Planar => "planar",
            CrsMode::LonLat => "lonlat",
        })
    }
}

fn read_text(path: &Path) -> Result<String, GeoError> {
    fs::read_to_string(path).map_err(|source| GeoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_zones(path: impl AsRef<Path>, crs: CrsMode) -> Result<Vec<Zone>, GeoError> {
    let path = path.as_ref();
    parse_zones(&read_text(path)?, crs, &path.display().to_string())
}

/// Loads one flood layer per path. Labels pair with paths positionally.
pub fn load_flood_layers<P, S>(
    paths: &[P],
    labels: &[S],
    crs: CrsMode,
) -> Result<Vec<FloodLayer>, GeoError>
where
    P: AsRef<Path>,
    S: AsRef<str>,
{
    if paths.is_empty() {
        return Err(GeoError::NoLayers);
    }
    if paths.len() != labels.len() {
        return Err(GeoError::LabelCountMismatch {
            paths: paths.len(),
            labels: labels.len(),
        });
    }
    paths
        .iter()
        .zip(labels)
        .map(|(p, label)| {
            let p = p.as_ref();
            parse_flood_layer(
                &read_text(p)?,
                label.as_ref(),
                crs,
                &p.display().to_string(),
            )
        })
        .collect()
}

struct RawFeature {
    index: usize,
    properties: Map<String, Value>,
    geometry: MultiPolygon,
}

fn parse_collection(text: &str, source_name: &str) -> Result<Vec<RawFeature>, GeoError> {
    let root: Value = serde_json::from_str(text).map_err(|e| GeoError::Parse {
        source_name: source_name.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let structural = |message: &str| GeoError::Parse {
        source_name: source_name.to_string(),
        line: 1,
        column: 1,
        message: message.to_string(),
    };
    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(structural("top-level object must be a FeatureCollection"));
    }
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| structural("FeatureCollection has no \"features\" array"))?;

    features
        .iter()
        .enumerate()
        .map(|(index, f)| {
            let feature_err = |message: String| GeoError::Feature {
                source_name: source_name.to_string(),
                feature: index,
                message,
            };
            let properties = match f.get("properties") {
                None | Some(Value::Null) => Map::new(),
                Some(Value::Object(m)) => m.clone(),
                Some(_) => return Err(feature_err("\"properties\" must be an object".into())),
            };
            let geometry = f
                .get("geometry")
                .ok_or_else(|| feature_err("missing \"geometry\"".into()))
                .and_then(|g| parse_geometry(g).map_err(feature_err))?;
            Ok(RawFeature {
                index,
                properties,
                geometry,
            })
        })
        .collect()
}

fn parse_position(v: &Value) -> Result<Coord, String> {
    let arr = v.as_array().ok_or("position must be an array")?;
    if arr.len() < 2 {
        return Err("position needs at least two numbers".into());
    }
    let x = arr[0]
        .as_f64()
        .ok_or("position coordinate is not a number")?;
    let y = arr[1]
        .as_f64()
        .ok_or("position coordinate is not a number")?;
    Ok(Coord::new(x, y))
}

fn parse_ring(v: &Value) -> Result<Ring, String> {
    let arr = v.as_array().ok_or("ring must be an array of positions")?;
    let pts = arr
        .iter()
        .map(parse_position)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Ring::new(pts))
}

fn parse_polygon(v: &Value) -> Result<Polygon, String> {
    let arr = v.as_array().ok_or("polygon must be an array of rings")?;
    let mut rings = arr.iter().map(parse_ring);
    let outer = rings.next().ok_or("polygon has no rings")??;
    let holes = rings.collect::<Result<Vec<_>, _>>()?;
    // Orientation is normalized after projection and validation.
    Ok(Polygon { outer, holes })
}

fn parse_geometry(g: &Value) -> Result<MultiPolygon, String> {
    let kind = g
        .get("type")
        .and_then(Value::as_str)
        .ok_or("geometry has no \"type\"")?;
    let coords = g
        .get("coordinates")
        .ok_or("geometry has no \"coordinates\"")?;
    match kind {
        "Polygon" => Ok(MultiPolygon::new(vec![parse_polygon(coords)?])),
        "MultiPolygon" => {
            let arr = coords
                .as_array()
                .ok_or("MultiPolygon coordinates must be an array")?;
            Ok(MultiPolygon::new(
                arr.iter().map(parse_polygon).collect::<Result<_, _>>()?,
            ))
        }
        other => Err(format!("unsupported geometry type {other:?}")),
    }
}

/// Projects (if needed), snaps, validates and orientation-normalizes.
fn prepare_geometry(
    raw: MultiPolygon,
    crs: CrsMode,
    source_name: &str,
    feature: &str,
) -> Result<MultiPolygon, GeoError> {
    let planar = match crs {
        CrsMode::Planar => raw,
        CrsMode::LonLat => equal_area_project(&raw)?,
    };
    let mut geom = planar.snapped_raw();
    let report = validate_geometry(&geom);
    if !report.is_ok() {
        return Err(GeoError::InvalidGeometry {
            source_name: source_name.to_string(),
            feature: feature.to_string(),
            report,
        });
    }
    geom.normalize_orientation();
    Ok(geom)
}

impl MultiPolygon {
    /// Snaps vertices without touching ring orientation.
    fn snapped_raw(&self) -> MultiPolygon {
        let snap_ring = |r: &Ring| Ring::new(r.open_vertices().iter().map(|c| c.snapped()));
        MultiPolygon::new(
            self.polygons
                .iter()
                .map(|p| Polygon {
                    outer: snap_ring(&p.outer),
                    holes: p.holes.iter().map(snap_ring).collect(),
                })
                .collect(),
        )
    }
}

pub fn parse_zones(text: &str, crs: CrsMode, source_name: &str) -> Result<Vec<Zone>, GeoError> {
    let features = parse_collection(text, source_name)?;
    let mut seen = HashSet::new();
    let mut zones = Vec::with_capacity(features.len());
    for f in features {
        let zone_id = match f.properties.get("zone_id") {
            Some(Value::String(s)) => s.clone(),
            _ => {
                return Err(GeoError::MissingZoneId {
                    source_name: source_name.to_string(),
                    feature: f.index,
                })
            }
        };
        if !seen.insert(zone_id.clone()) {
            return Err(GeoError::DuplicateZoneId {
                source_name: source_name.to_string(),
                zone_id,
            });
        }
        let prop_err = |message: String| GeoError::Feature {
            source_name: source_name.to_string(),
            feature: f.index,
            message,
        };
        let median_household_income = match f.properties.get("median_household_income") {
            None | Some(Value::Null) => None,
            Some(v) => Some(
                v.as_f64()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| prop_err("median_household_income must be a number".into()))?,
            ),
        };
        let population = match f.properties.get("population") {
            None | Some(Value::Null) => None,
            Some(v) => Some(
                v.as_u64()
                    .or_else(|| {
                        v.as_f64()
                            .filter(|x| *x >= 0.0 && x.fract() == 0.0 && *x < 1.8e19)
                            .map(|x| x as u64)
                    })
                    .ok_or_else(|| prop_err("population must be a non-negative integer".into()))?,
            ),
        };
        let geometry = prepare_geometry(f.geometry, crs, source_name, &zone_id)?;
        if geometry.polygons.iter().map(Polygon::area).sum::<f64>() <= 0.0 {
            return Err(GeoError::ZeroAreaZone {
                source_name: source_name.to_string(),
                zone_id,
            });
        }
        zones.push(Zone {
            zone_id,
            geometry,
            median_household_income,
            population,
        });
    }
    Ok(zones)
}

/// Parses one flood layer: every polygon of every feature joins the layer.
pub fn parse_flood_layer(
    text: &str,
    label: &str,
    crs: CrsMode,
    source_name: &str,
) -> Result<FloodLayer, GeoError> {
    let features = parse_collection(text, source_name)?;
    if features.is_empty() {
        log::warn!("{source_name}: flood layer {label:?} has no features; treating as empty");
    }
    let mut polygons = Vec::new();
    for f in features {
        let g = prepare_geometry(
            f.geometry,
            crs,
            source_name,
            &format!("feature {}", f.index),
        )?;
        polygons.extend(g.polygons);
    }
    Ok(FloodLayer {
        label: label.to_string(),
        geometry: MultiPolygon::new(polygons),
    })
}

fn ring_json(r: &Ring) -> Value {
    Value::Array(r.vertices().iter().map(|c| json!([c.x, c.y])).collect())
}

fn polygon_json(p: &Polygon) -> Value {
    Value::Array(p.rings().map(ring_json).collect())
}

pub(crate) fn geometry_json(g: &MultiPolygon) -> Value {
    if g.polygons.len() == 1 {
        json!({"type": "Polygon", "coordinates": polygon_json(&g.polygons[0])})
    } else {
        json!({
            "type": "MultiPolygon",
            "coordinates": Value::Array(g.polygons.iter().map(polygon_json).collect()),
        })
    }
}

pub(crate) fn write_feature_collection(
    features: impl IntoIterator<Item = (Map<String, Value>, Value)>,
    mut w: impl Write,
) -> io::Result<()> {
    let features: Vec<Value> = features
        .into_iter()
        .map(|(props, geom)| json!({"type": "Feature", "properties": props, "geometry": geom}))
        .collect();
    let doc = json!({"type": "FeatureCollection", "features": features});
    serde_json::to_writer(&mut w, &doc)?;
    w.write_all(b"\n")
}

pub(crate) fn zone_properties(z: &Zone) -> Map<String, Value> {
    let mut props = Map::new();
    props.insert("zone_id".into(), json!(z.zone_id));
    if let Some(inc) = z.median_household_income {
        props.insert("median_household_income".into(), json!(inc));
    }
    if let Some(pop) = z.population {
        props.insert("population".into(), json!(pop));
    }
    props
}

/// Writes zones in the same format [`load_zones`] reads (planar mode).
pub fn write_zones(zones: &[Zone], w: impl Write) -> io::Result<()> {
    write_feature_collection(
        zones
            .iter()
            .map(|z| (zone_properties(z), geometry_json(&z.geometry))),
        w,
    )
}

/// Writes a flood layer with one feature per polygon.
pub fn write_flood_layer(layer: &FloodLayer, w: impl Write) -> io::Result<()> {
    write_feature_collection(
        layer.geometry.polygons.iter().map(|p| {
            let mut props = Map::new();
            props.insert("layer".into(), json!(layer.label));
            (props, geometry_json(&MultiPolygon::from_polygon(p.clone())))
        }),
        w,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT_A: &str = r#"{"type":"FeatureCollection","features":[
        {"type":"Feature","properties":{"zone_id":"A","median_household_income":50000,"population":1200},
         "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}}]}"#;

    #[test]
    fn loads_unit_square_zone() {
        let zones = parse_zones(UNIT_A, CrsMode::Planar, "mem").unwrap();
        assert_eq!(zones.len(), 1);
        assert_eq!(zones[0].zone_id, "A");
        assert_eq!(zones[0].geometry.polygons[0].area(), 1.0);
        assert_eq!(zones[0].median_household_income, Some(50000.0));
        assert_eq!(zones[0].population, Some(1200));
    }

    #[test]
    fn duplicate_zone_id_rejected() {
        let text = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{"zone_id":"A"},
             "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1]]]}},
            {"type":"Feature","properties":{"zone_id":"A"},
             "geometry":{"type":"Polygon","coordinates":[[[2,0],[3,0],[3,1],[2,1]]]}}]}"#;
        let err = parse_zones(text, CrsMode::Planar, "mem").unwrap_err();
        assert!(matches!(err, GeoError::DuplicateZoneId { ref zone_id, .. } if zone_id == "A"));
    }

    #[test]
    fn bowtie_zone_named_in_error() {
        let text = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{"zone_id":"BOW"},
             "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,1],[1,0],[0,1],[0,0]]]}}]}"#;
        let err = parse_zones(text, CrsMode::Planar, "mem").unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("BOW") && msg.contains("self-intersection"),
            "{msg}"
        );
    }

    #[test]
    fn missing_zone_id() {
        let text = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{"zone_id":7},
             "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1]]]}}]}"#;
        assert!(matches!(
            parse_zones(text, CrsMode::Planar, "mem"),
            Err(GeoError::MissingZoneId { feature: 0, .. })
        ));
    }

    #[test]
    fn malformed_json_reports_location() {
        let text = "{\"type\":\"FeatureCollection\",\n\"features\": [,]}";
        match parse_zones(text, CrsMode::Planar, "mem") {
            Err(GeoError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn clockwise_input_normalized() {
        let text = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{"zone_id":"A"},
             "geometry":{"type":"Polygon","coordinates":[[[0,0],[0,1],[1,1],[1,0],[0,0]]]}}]}"#;
        let zones = parse_zones(text, CrsMode::Planar, "mem").unwrap();
        assert!(zones[0].geometry.polygons[0].outer.is_ccw());
    }

    #[test]
    fn empty_flood_layer_accepted() {
        let text = r#"{"type":"FeatureCollection","features":[]}"#;
        let layer = parse_flood_layer(text, "100yr", CrsMode::Planar, "mem").unwrap();
        assert!(layer.geometry.is_empty());
        assert_eq!(layer.label, "100yr");
    }

    #[test]
    fn flood_layer_label_errors() {
        let none: [&str; 0] = [];
        assert!(matches!(
            load_flood_layers(&none, &none, CrsMode::Planar),
            Err(GeoError::NoLayers)
        ));
        assert!(matches!(
            load_flood_layers(&["a.geojson"], &["x", "y"], CrsMode::Planar),
            Err(GeoError::LabelCountMismatch {
                paths: 1,
                labels: 2
            })
        ));
    }

    #[test]
    fn lonlat_zone_is_projected() {
        let text = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{"zone_id":"77002"},
             "geometry":{"type":"Polygon","coordinates":[[[-95.4,29.7],[-95.3,29.7],[-95.3,29.8],[-95.4,29.8]]]}}]}"#;
        let zones = parse_zones(text, CrsMode::LonLat, "mem").unwrap();
        let area = zones[0].geometry.polygons[0].area();
        // roughly 9.7 km × 11.1 km
        assert!(area > 1.0e8 && area < 1.2e8, "{area}");
    }

    #[test]
    fn written_zones_round_trip() {
        let zones = parse_zones(UNIT_A, CrsMode::Planar, "mem").unwrap();
        let mut buf = Vec::new();
        write_zones(&zones, &mut buf).unwrap();
        let again =
            parse_zones(std::str::from_utf8(&buf).unwrap(), CrsMode::Planar, "mem").unwrap();
        assert_eq!(zones, again);
    }
}
