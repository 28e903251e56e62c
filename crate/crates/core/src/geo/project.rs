use super::{Coord, GeoError, MultiPolygon};

/// Mean Earth radius used by the equal-area projection.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Lambert cylindrical equal-area projection of one (lon, lat) pair in
/// degrees: x = R·λ, y = R·sin φ.
pub fn project_coord(lonlat: Coord) -> Result<Coord, GeoError> {
    let (lon, lat) = (lonlat.x, lonlat.y);
    if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) {
        return Err(GeoError::CoordinateOutOfRange { lon, lat });
    }
    Ok(Coord::new(
        EARTH_RADIUS_M * lon.to_radians(),
        EARTH_RADIUS_M * lat.to_radians().sin(),
    ))
}

/// Projects every vertex of a lon/lat multipolygon into planar meters.
/// Orientation is preserved since both axes are monotone in lon and lat.
pub fn equal_area_project(geom_lonlat: &MultiPolygon) -> Result<MultiPolygon, GeoError> {
    let mut err = None;
    let out = geom_lonlat.map_coords(|c| match project_coord(c) {
        Ok(p) => p,
        Err(e) => {
            err.get_or_insert(e);
            c
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}
