use std::fmt;

use serde::Serialize;

use super::{orient, point_on_segment, segments_intersect, Coord, MultiPolygon, Ring};

/// Position of a ring inside a multipolygon. `ring` 0 is the outer ring,
/// `ring` k ≥ 1 is hole k − 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RingRef {
    pub polygon: usize,
    pub ring: usize,
}

impl fmt::Display for RingRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ring == 0 {
            write!(f, "polygon {} outer ring", self.polygon)
        } else {
            write!(f, "polygon {} hole {}", self.polygon, self.ring - 1)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NonFiniteCoordinate {
        at: RingRef,
    },
    DegenerateRing {
        at: RingRef,
        distinct_vertices: usize,
    },
    ZeroAreaRing {
        at: RingRef,
    },
    SelfIntersection {
        at: RingRef,
        near: Coord,
    },
    HoleOutsideOuter {
        at: RingRef,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFiniteCoordinate { at } => write!(f, "non-finite coordinate in {at}"),
            Violation::DegenerateRing {
                at,
                distinct_vertices,
            } => write!(
                f,
                "degenerate ring: {at} has {distinct_vertices} distinct vertices"
            ),
            Violation::ZeroAreaRing { at } => write!(f, "zero-area ring: {at}"),
            Violation::SelfIntersection { at, near } => {
                write!(f, "self-intersection in {at} near {near}")
            }
            Violation::HoleOutsideOuter { at } => write!(f, "{at} is not inside its outer ring"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every ring and hole-containment invariant and reports all
/// violations found. Overlap between distinct polygons is not a violation.
pub fn validate_geometry(geom: &MultiPolygon) -> ValidationReport {
    let mut violations = Vec::new();
    for (pi, poly) in geom.polygons.iter().enumerate() {
        let mut rings_ok = Vec::new();
        for (ri, ring) in poly.rings().enumerate() {
            let at = RingRef {
                polygon: pi,
                ring: ri,
            };
            let before = violations.len();
            check_ring(ring, at, &mut violations);
            rings_ok.push(violations.len() == before);
        }
        if !rings_ok[0] {
            continue;
        }
        for (hi, hole) in poly.holes.iter().enumerate() {
            if rings_ok[hi + 1] && !hole_inside(hole, &poly.outer) {
                violations.push(Violation::HoleOutsideOuter {
                    at: RingRef {
                        polygon: pi,
                        ring: hi + 1,
                    },
                });
            }
        }
    }
    ValidationReport { violations }
}

fn check_ring(ring: &Ring, at: RingRef, out: &mut Vec<Violation>) {
    let verts = ring.open_vertices();
    if verts.iter().any(|c| !c.x.is_finite() || !c.y.is_finite()) {
        out.push(Violation::NonFiniteCoordinate { at });
        return;
    }
    let mut distinct: Vec<(u64, u64)> = verts
        .iter()
        .map(|c| ((c.x + 0.0).to_bits(), (c.y + 0.0).to_bits()))
        .collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        out.push(Violation::DegenerateRing {
            at,
            distinct_vertices: distinct.len(),
        });
        return;
    }
    if let Some(near) = find_self_intersection(ring) {
        out.push(Violation::SelfIntersection { at, near });
        return;
    }
    if ring.signed_area() == 0.0 {
        out.push(Violation::ZeroAreaRing { at });
    }
}

/// Visits candidate edge pairs whose x-extents overlap, stopping when `f`
/// returns true. Returns whether it stopped early.
pub(crate) fn sweep_edge_pairs(
    edges: &[(Coord, Coord)],
    mut f: impl FnMut(usize, usize) -> bool,
) -> bool {
    let mut order: Vec<usize> = (0..edges.len()).collect();
    let min_x = |i: usize| edges[i].0.x.min(edges[i].1.x);
    let max_x = |i: usize| edges[i].0.x.max(edges[i].1.x);
    order.sort_by(|&a, &b| min_x(a).total_cmp(&min_x(b)));
    let mut active: Vec<usize> = Vec::new();
    for &i in &order {
        let lo = min_x(i);
        active.retain(|&j| max_x(j) >= lo);
        let (ymin, ymax) = (
            edges[i].0.y.min(edges[i].1.y),
            edges[i].0.y.max(edges[i].1.y),
        );
        for &j in &active {
            let (jymin, jymax) = (
                edges[j].0.y.min(edges[j].1.y),
                edges[j].0.y.max(edges[j].1.y),
            );
            if jymin <= ymax && ymin <= jymax && f(i.min(j), i.max(j)) {
                return true;
            }
        }
        active.push(i);
    }
    false
}

fn find_self_intersection(ring: &Ring) -> Option<Coord> {
    let edges: Vec<(Coord, Coord)> = ring.edges().collect();
    let n = edges.len();
    let mut hit = None;
    sweep_edge_pairs(&edges, |i, j| {
        let (a0, a1) = edges[i];
        let (b0, b1) = edges[j];
        let adjacent_fwd = j == i + 1;
        let adjacent_wrap = i == 0 && j == n - 1;
        let bad = if adjacent_fwd {
            // shared vertex a1 == b0; any further contact is an overlap
            collinear_backtrack(a0, a1, b1)
        } else if adjacent_wrap {
            // shared vertex b1 == a0
            collinear_backtrack(b0, b1, a1)
        } else {
            segments_intersect(a0, a1, b0, b1)
        };
        if bad {
            hit = Some(a1);
        }
        bad
    });
    hit
}

/// Consecutive edges p→q→r fold back over each other.
fn collinear_backtrack(p: Coord, q: Coord, r: Coord) -> bool {
    orient(p, q, r) == 0.0 && {
        let d1 = (q.x - p.x, q.y - p.y);
        let d2 = (r.x - q.x, r.y - q.y);
        d1.0 * d2.0 + d1.1 * d2.1 < 0.0
    }
}

fn hole_inside(hole: &Ring, outer: &Ring) -> bool {
    for &v in hole.open_vertices() {
        if !outer.point_on_boundary(v) && outer.winding_number(v) == 0 {
            return false;
        }
    }
    // Vertices inside or on the outer ring; a concave outer can still be
    // crossed by a hole edge.
    let h: Vec<(Coord, Coord)> = hole.edges().collect();
    let o: Vec<(Coord, Coord)> = outer.edges().collect();
    for &(a0, a1) in &h {
        for &(b0, b1) in &o {
            if proper_crossing(a0, a1, b0, b1) {
                return false;
            }
        }
        let mid = Coord::new((a0.x + a1.x) / 2.0, (a0.y + a1.y) / 2.0);
        if !outer.point_on_boundary(mid) && outer.winding_number(mid) == 0 {
            return false;
        }
    }
    true
}

fn proper_crossing(p1: Coord, p2: Coord, q1: Coord, q2: Coord) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    d1 * d2 < 0.0 && d3 * d4 < 0.0 && !point_on_segment(p1, q1, q2)
}
