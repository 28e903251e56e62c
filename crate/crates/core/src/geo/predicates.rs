use super::Coord;

/// Twice the signed area of triangle (a, b, c); positive when c lies to the
/// left of a→b.
pub(crate) fn orient(a: Coord, b: Coord, c: Coord) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn within(a: f64, b: f64, v: f64) -> bool {
    a.min(b) <= v && v <= a.max(b)
}

/// `p` lies on the closed segment a–b.
pub(crate) fn point_on_segment(p: Coord, a: Coord, b: Coord) -> bool {
    orient(a, b, p) == 0.0 && within(a.x, b.x, p.x) && within(a.y, b.y, p.y)
}

/// Closed segments p1–p2 and q1–q2 share at least one point.
pub(crate) fn segments_intersect(p1: Coord, p2: Coord, q1: Coord, q2: Coord) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && point_on_segment(p1, q1, q2))
        || (d2 == 0.0 && point_on_segment(p2, q1, q2))
        || (d3 == 0.0 && point_on_segment(q1, p1, p2))
        || (d4 == 0.0 && point_on_segment(q2, p1, p2))
}
