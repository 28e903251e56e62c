//! Vertical-slab sweep for polygon boolean operations.
//!
//! Every vertex x and every pairwise edge crossing x becomes a slab boundary.
//! Inside a slab no two edges cross, so the edges crossing it are totally
//! ordered by height and each maximal run of covered height is a trapezoid
//! bounded by one bottom and one top edge. Areas come straight from the
//! trapezoids; geometry is rebuilt by stitching their boundary pieces.
//!
//! Coverage uses per-operand winding counts with the positive-winding rule,
//! so overlapping polygons inside one operand are counted once.

use std::collections::HashMap;

use crate::geo::{BBox, Coord, MultiPolygon, Polygon, Ring};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Segment {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    /// +1 when the source edge runs toward +x, −1 otherwise.
    winding: i32,
    operand: usize,
}

impl Segment {
    /// Height at `x`; exact at the endpoints.
    fn y_at(&self, x: f64) -> f64 {
        if x == self.x0 {
            self.y0
        } else if x == self.x1 {
            self.y1
        } else {
            self.y0 + (self.y1 - self.y0) * ((x - self.x0) / (self.x1 - self.x0))
        }
    }

    fn slope(&self) -> f64 {
        (self.y1 - self.y0) / (self.x1 - self.x0)
    }
}

/// Edges of all operands, ready for sweeping.
#[derive(Debug, Default)]
pub(crate) struct SegmentSet {
    segs: Vec<Segment>,
    operands: usize,
}

impl SegmentSet {
    pub(crate) fn new() -> Self {
        SegmentSet::default()
    }

    /// Makes `operand` part of the coverage vector even if it adds no edges.
    pub(crate) fn declare_operand(&mut self, operand: usize) {
        self.operands = self.operands.max(operand + 1);
    }

    /// Adds every non-vertical edge of `rings` as part of `operand`.
    pub(crate) fn add_rings<'a>(
        &mut self,
        operand: usize,
        rings: impl IntoIterator<Item = &'a Ring>,
    ) {
        self.operands = self.operands.max(operand + 1);
        for ring in rings {
            self.add_ring(operand, ring.vertices());
        }
    }

    pub(crate) fn add_ring(&mut self, operand: usize, closed: &[Coord]) {
        self.operands = self.operands.max(operand + 1);
        for w in closed.windows(2) {
            let (p, q) = (w[0], w[1]);
            if p.x == q.x {
                continue;
            }
            let seg = if p.x < q.x {
                Segment {
                    x0: p.x,
                    y0: p.y,
                    x1: q.x,
                    y1: q.y,
                    winding: 1,
                    operand,
                }
            } else {
                Segment {
                    x0: q.x,
                    y0: q.y,
                    x1: p.x,
                    y1: p.y,
                    winding: -1,
                    operand,
                }
            };
            self.segs.push(seg);
        }
    }

    pub(crate) fn add_geometry(&mut self, operand: usize, geom: &MultiPolygon) {
        self.add_rings(operand, geom.rings());
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.segs.is_empty()
    }

    /// Runs the sweep. `inside` maps per-operand winding counts to coverage.
    pub(crate) fn sweep(&self, inside: impl Fn(&[i32]) -> bool, keep_slabs: bool) -> Sweep {
        sweep(&self.segs, self.operands.max(1), inside, keep_slabs)
    }
}

#[derive(Debug)]
pub(crate) struct Slab {
    x_lo: f64,
    x_hi: f64,
    /// (bottom, top) segment indices of covered trapezoids, ascending.
    intervals: Vec<(usize, usize)>,
}

#[derive(Debug)]
pub(crate) struct Sweep {
    pub(crate) area: f64,
    segs: Vec<Segment>,
    slabs: Vec<Slab>,
}

/// Slab boundaries: every endpoint x plus every interior edge crossing x.
fn slab_boundaries(segs: &[Segment]) -> Vec<f64> {
    let mut xs: Vec<f64> = Vec::with_capacity(segs.len() * 2);
    for s in segs {
        xs.push(s.x0);
        xs.push(s.x1);
    }
    let mut order: Vec<usize> = (0..segs.len()).collect();
    order.sort_by(|&a, &b| segs[a].x0.total_cmp(&segs[b].x0));
    let mut active: Vec<usize> = Vec::new();
    for &i in &order {
        let s = segs[i];
        active.retain(|&j| segs[j].x1 > s.x0);
        let (smin, smax) = (s.y0.min(s.y1), s.y0.max(s.y1));
        for &j in &active {
            let t = segs[j];
            if t.y0.min(t.y1) > smax || t.y0.max(t.y1) < smin {
                continue;
            }
            if let Some(x) = crossing_x(&s, &t) {
                xs.push(x);
            }
        }
        active.push(i);
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// x of the crossing of two segments strictly inside their common x-range.
fn crossing_x(a: &Segment, b: &Segment) -> Option<f64> {
    let lo = a.x0.max(b.x0);
    let hi = a.x1.min(b.x1);
    if lo >= hi {
        return None;
    }
    // Heights relative to each other at the ends of the shared range.
    let d_lo = a.y_at(lo) - b.y_at(lo);
    let d_hi = a.y_at(hi) - b.y_at(hi);
    if d_lo == 0.0 || d_hi == 0.0 || (d_lo > 0.0) == (d_hi > 0.0) {
        return None;
    }
    let (ax, ay) = (a.x1 - a.x0, a.y1 - a.y0);
    let (bx, by) = (b.x1 - b.x0, b.y1 - b.y0);
    let denom = ax * by - ay * bx;
    if denom == 0.0 {
        return None;
    }
    let t = ((b.x0 - a.x0) * by - (b.y0 - a.y0) * bx) / denom;
    let x = a.x0 + t * ax;
    // Rounding can push the crossing onto or past the range ends, where it
    // is already a boundary.
    (x > lo && x < hi).then_some(x)
}

fn sweep(
    segs: &[Segment],
    operands: usize,
    inside: impl Fn(&[i32]) -> bool,
    keep_slabs: bool,
) -> Sweep {
    let xs = slab_boundaries(segs);
    let mut order: Vec<usize> = (0..segs.len()).collect();
    order.sort_by(|&a, &b| segs[a].x0.total_cmp(&segs[b].x0));

    let mut next = 0usize;
    let mut active: Vec<usize> = Vec::new();
    let mut keyed: Vec<(f64, f64, usize)> = Vec::new();
    let mut counts = vec![0i32; operands];
    let mut area = 0.0f64;
    let mut comp = 0.0f64;
    let mut slabs = Vec::new();

    for w in xs.windows(2) {
        let (x_lo, x_hi) = (w[0], w[1]);
        while next < order.len() && segs[order[next]].x0 <= x_lo {
            active.push(order[next]);
            next += 1;
        }
        active.retain(|&j| segs[j].x1 > x_lo);
        if active.is_empty() {
            if keep_slabs {
                slabs.push(Slab {
                    x_lo,
                    x_hi,
                    intervals: Vec::new(),
                });
            }
            continue;
        }
        let x_mid = 0.5 * (x_lo + x_hi);
        keyed.clear();
        keyed.extend(
            active
                .iter()
                .map(|&j| (segs[j].y_at(x_mid), segs[j].slope(), j)),
        );
        keyed.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.total_cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });

        counts.iter_mut().for_each(|c| *c = 0);
        let mut intervals = Vec::new();
        let mut bottom: Option<(f64, usize)> = None;
        let width = x_hi - x_lo;
        for &(y, _, j) in &keyed {
            let s = &segs[j];
            counts[s.operand] += s.winding;
            let now = inside(&counts);
            match (bottom, now) {
                (None, true) => bottom = Some((y, j)),
                (Some((yb, jb)), false) => {
                    bottom = None;
                    let h = y - yb;
                    if h > 0.0 {
                        // Neumaier summation keeps inclusion–exclusion tight.
                        let term = width * h;
                        let t = area + term;
                        if area.abs() >= term.abs() {
                            comp += (area - t) + term;
                        } else {
                            comp += (term - t) + area;
                        }
                        area = t;
                        if keep_slabs {
                            intervals.push((jb, j));
                        }
                    }
                }
                _ => {}
            }
        }
        debug_assert!(bottom.is_none(), "coverage must close above the top edge");
        if keep_slabs {
            slabs.push(Slab {
                x_lo,
                x_hi,
                intervals,
            });
        }
    }

    Sweep {
        area: area + comp,
        segs: if keep_slabs {
            segs.to_vec()
        } else {
            Vec::new()
        },
        slabs,
    }
}

type PointKey = (u64, u64);

fn key(c: Coord) -> PointKey {
    ((c.x + 0.0).to_bits(), (c.y + 0.0).to_bits())
}

impl Sweep {
    /// Covered region as polygons: outers counterclockwise, holes clockwise.
    pub(crate) fn into_geometry(self) -> MultiPolygon {
        let pieces = self.boundary_pieces();
        let rings = stitch(&pieces);
        assemble(rings)
    }

    /// Directed boundary pieces with the covered region on their left.
    fn boundary_pieces(&self) -> Vec<(Coord, Coord)> {
        let segs = &self.segs;
        let mut pieces = Vec::new();
        for slab in &self.slabs {
            for &(b, t) in &slab.intervals {
                let (sb, st) = (&segs[b], &segs[t]);
                pieces.push((
                    Coord::new(slab.x_lo, sb.y_at(slab.x_lo)),
                    Coord::new(slab.x_hi, sb.y_at(slab.x_hi)),
                ));
                pieces.push((
                    Coord::new(slab.x_hi, st.y_at(slab.x_hi)),
                    Coord::new(slab.x_lo, st.y_at(slab.x_lo)),
                ));
            }
        }
        // Vertical pieces where coverage differs across a slab boundary.
        let side = |slab: Option<&Slab>, x: f64| -> Vec<(f64, f64)> {
            let mut iv: Vec<(f64, f64)> = slab
                .map(|s| {
                    s.intervals
                        .iter()
                        .map(|&(b, t)| (segs[b].y_at(x), segs[t].y_at(x)))
                        .collect()
                })
                .unwrap_or_default();
            iv.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut merged: Vec<(f64, f64)> = Vec::with_capacity(iv.len());
            for (lo, hi) in iv {
                match merged.last_mut() {
                    Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                    _ => merged.push((lo, hi)),
                }
            }
            merged
        };
        let covered = |iv: &[(f64, f64)], y: f64| iv.iter().any(|&(lo, hi)| lo < y && y < hi);
        for k in 0..=self.slabs.len() {
            let left_slab = k.checked_sub(1).map(|i| &self.slabs[i]);
            let right_slab = self.slabs.get(k);
            let x = match (left_slab, right_slab) {
                (_, Some(r)) => r.x_lo,
                (Some(l), None) => l.x_hi,
                (None, None) => continue,
            };
            let left = side(left_slab, x);
            let right = side(right_slab, x);
            if left.is_empty() && right.is_empty() {
                continue;
            }
            let mut ys: Vec<f64> = left
                .iter()
                .chain(right.iter())
                .flat_map(|&(a, b)| [a, b])
                .collect();
            ys.sort_by(f64::total_cmp);
            ys.dedup();
            for w in ys.windows(2) {
                let mid = 0.5 * (w[0] + w[1]);
                match (covered(&left, mid), covered(&right, mid)) {
                    (true, false) => pieces.push((Coord::new(x, w[0]), Coord::new(x, w[1]))),
                    (false, true) => pieces.push((Coord::new(x, w[1]), Coord::new(x, w[0]))),
                    _ => {}
                }
            }
        }
        pieces.retain(|(a, b)| a != b);
        pieces
    }
}

/// Clockwise angle from direction `from` to direction `to`, in (0, 2π].
fn clockwise_turn(from: (f64, f64), to: (f64, f64)) -> f64 {
    use std::f64::consts::TAU;
    let a = from.1.atan2(from.0) - to.1.atan2(to.0);
    let a = a.rem_euclid(TAU);
    if a == 0.0 {
        TAU
    } else {
        a
    }
}

/// Links directed pieces into closed rings. At a vertex with several exits
/// the walk takes the sharpest left turn, which keeps rings that merely
/// touch at a point apart.
fn stitch(pieces: &[(Coord, Coord)]) -> Vec<Vec<Coord>> {
    let mut out_of: HashMap<PointKey, Vec<usize>> = HashMap::new();
    for (i, &(a, _)) in pieces.iter().enumerate() {
        out_of.entry(key(a)).or_default().push(i);
    }
    let mut used = vec![false; pieces.len()];
    let mut rings = Vec::new();
    for start in 0..pieces.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let origin = key(pieces[start].0);
        let mut ring = vec![pieces[start].0];
        let mut cur = start;
        loop {
            let (a, b) = pieces[cur];
            if key(b) == origin {
                break;
            }
            ring.push(b);
            let back = (a.x - b.x, a.y - b.y);
            let next = out_of.get(&key(b)).and_then(|cands| {
                cands
                    .iter()
                    .copied()
                    .filter(|&c| !used[c])
                    .min_by(|&c1, &c2| {
                        let d = |c: usize| {
                            let (p, q) = pieces[c];
                            clockwise_turn(back, (q.x - p.x, q.y - p.y))
                        };
                        d(c1).total_cmp(&d(c2)).then(c1.cmp(&c2))
                    })
            });
            match next {
                Some(n) => {
                    used[n] = true;
                    cur = n;
                }
                None => {
                    // Unbalanced vertex; only possible through rounding.
                    log::debug!("overlay: open boundary chain at {b}");
                    break;
                }
            }
        }
        rings.extend(split_at_repeats(ring));
    }
    rings
}

/// Splits a closed walk at repeated vertices into simple loops.
fn split_at_repeats(walk: Vec<Coord>) -> Vec<Vec<Coord>> {
    let mut out = Vec::new();
    let mut stack: Vec<Coord> = Vec::with_capacity(walk.len());
    let mut pos: HashMap<PointKey, usize> = HashMap::new();
    for c in walk {
        if let Some(&i) = pos.get(&key(c)) {
            let tail: Vec<Coord> = stack.drain(i..).collect();
            for t in &tail {
                pos.remove(&key(*t));
            }
            out.push(tail);
        }
        pos.insert(key(c), stack.len());
        stack.push(c);
    }
    out.push(stack);
    out
}

/// Drops vertices that lie on the line through their neighbours (within a
/// relative 1e-12) and spikes that double back.
fn simplify(mut pts: Vec<Coord>) -> Vec<Coord> {
    const REL: f64 = 1e-12;
    loop {
        let n = pts.len();
        if n < 3 {
            return pts;
        }
        let mut keep = Vec::with_capacity(n);
        let mut changed = false;
        for i in 0..n {
            let p = *keep.last().unwrap_or(&pts[(i + n - 1) % n]);
            let q = pts[i];
            let r = pts[(i + 1) % n];
            let (dx, dy) = (r.x - p.x, r.y - p.y);
            let cross = (q.x - p.x) * dy - (q.y - p.y) * dx;
            let len2 = dx * dx + dy * dy;
            let span2 = (q.x - p.x).powi(2) + (q.y - p.y).powi(2);
            if cross.abs() <= REL * len2.max(span2) || q == p {
                changed = true;
                continue;
            }
            keep.push(q);
        }
        pts = keep;
        if !changed {
            return pts;
        }
    }
}

fn signed_area(pts: &[Coord]) -> f64 {
    let Some(&o) = pts.first() else {
        return 0.0;
    };
    let n = pts.len();
    let mut twice = 0.0;
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        twice += (a.x - o.x) * (b.y - o.y) - (b.x - o.x) * (a.y - o.y);
    }
    twice / 2.0
}

fn assemble(loops: Vec<Vec<Coord>>) -> MultiPolygon {
    let mut outers: Vec<(Ring, f64, BBox)> = Vec::new();
    let mut holes: Vec<Ring> = Vec::new();
    for l in loops {
        let l = simplify(l);
        if l.len() < 3 {
            continue;
        }
        let a = signed_area(&l);
        let ring = Ring::new(l);
        if a > 0.0 {
            let bb = ring.bbox();
            outers.push((ring, a, bb));
        } else if a < 0.0 {
            holes.push(ring);
        }
    }
    let mut assigned: Vec<Vec<Ring>> = vec![Vec::new(); outers.len()];
    for h in holes {
        let v = h.vertices();
        let probe = Coord::new(0.5 * (v[0].x + v[1].x), 0.5 * (v[0].y + v[1].y));
        let owner = outers
            .iter()
            .enumerate()
            .filter(|(_, (r, _, bb))| {
                probe.x >= bb.min_x
                    && probe.x <= bb.max_x
                    && probe.y >= bb.min_y
                    && probe.y <= bb.max_y
                    && r.winding_number(probe) != 0
            })
            .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .map(|(i, _)| i);
        match owner {
            Some(i) => assigned[i].push(h),
            None => log::warn!("overlay: dropping hole with no enclosing outer ring"),
        }
    }
    MultiPolygon::new(
        outers
            .into_iter()
            .zip(assigned)
            .map(|((outer, _, _), holes)| Polygon { outer, holes })
            .collect(),
    )
}

/// Sutherland–Hodgman clip of a closed ring to an axis-aligned box. Inside
/// the box the result has the same winding number as the input, which is all
/// the sweep needs; it may carry degenerate edges along the box sides.
pub(crate) fn clip_ring_to_box(closed: &[Coord], b: &BBox) -> Vec<Coord> {
    let mut pts: Vec<Coord> = closed[..closed.len().saturating_sub(1)].to_vec();
    let planes: [(fn(Coord, &BBox) -> bool, fn(Coord, Coord, &BBox) -> Coord); 4] = [
        (|p, b| p.x >= b.min_x, |p, q, b| at_x(p, q, b.min_x)),
        (|p, b| p.x <= b.max_x, |p, q, b| at_x(p, q, b.max_x)),
        (|p, b| p.y >= b.min_y, |p, q, b| at_y(p, q, b.min_y)),
        (|p, b| p.y <= b.max_y, |p, q, b| at_y(p, q, b.max_y)),
    ];
    for (keep, cut) in planes {
        if pts.is_empty() {
            break;
        }
        let mut out = Vec::with_capacity(pts.len() + 4);
        let n = pts.len();
        for i in 0..n {
            let cur = pts[i];
            let prev = pts[(i + n - 1) % n];
            match (keep(prev, b), keep(cur, b)) {
                (true, true) => out.push(cur),
                (true, false) => out.push(cut(prev, cur, b)),
                (false, true) => {
                    out.push(cut(prev, cur, b));
                    out.push(cur);
                }
                (false, false) => {}
            }
        }
        pts = out;
    }
    if let Some(&f) = pts.first() {
        pts.push(f);
    }
    pts
}

fn at_x(p: Coord, q: Coord, x: f64) -> Coord {
    let t = (x - p.x) / (q.x - p.x);
    Coord::new(x, p.y + t * (q.y - p.y))
}

fn at_y(p: Coord, q: Coord, y: f64) -> Coord {
    let t = (y - p.y) / (q.y - p.y);
    Coord::new(p.x + t * (q.x - p.x), y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x: f64, y: f64, s: f64) -> MultiPolygon {
        MultiPolygon::rectangle(x, y, x + s, y + s)
    }

    fn area_of(op: fn(&[i32]) -> bool, a: &MultiPolygon, b: &MultiPolygon) -> f64 {
        let mut set = SegmentSet::new();
        set.add_geometry(0, a);
        set.add_geometry(1, b);
        set.sweep(op, false).area
    }

    #[test]
    fn rotated_squares_intersection() {
        // Diamond of half-diagonal 1 intersected with the unit-centered square.
        let diamond = MultiPolygon::from_polygon(Polygon::new(
            Ring::new([(0.0, -1.0), (1.0, 0.0), (0.0, 1.0), (-1.0, 0.0)].map(Coord::from)),
            vec![],
        ));
        let sq = MultiPolygon::rectangle(-0.5, -0.5, 0.5, 0.5);
        let inter = area_of(|c| c[0] > 0 && c[1] > 0, &diamond, &sq);
        assert!((inter - 1.0).abs() < 1e-15);
        let uni = area_of(|c| c[0] > 0 || c[1] > 0, &diamond, &sq);
        assert!((uni - 2.0).abs() < 1e-15);
        // Triangle crossing: square of side 1.2 clips the diamond corners.
        let big = MultiPolygon::rectangle(-0.6, -0.6, 0.6, 0.6);
        let inter = area_of(|c| c[0] > 0 && c[1] > 0, &diamond, &big);
        let expected = 1.44 - 4.0 * 0.5 * 0.2 * 0.2;
        assert!((inter - expected).abs() < 1e-14, "{inter} vs {expected}");
    }

    #[test]
    fn union_geometry_of_overlapping_squares() {
        let mut set = SegmentSet::new();
        set.add_geometry(0, &square(0.0, 0.0, 1.0));
        set.add_geometry(0, &square(0.5, 0.5, 1.0));
        let g = set.sweep(|c| c[0] > 0, true).into_geometry();
        assert_eq!(g.polygons.len(), 1);
        assert_eq!(g.polygons[0].outer.edge_count(), 8);
        assert!((g.polygons[0].area() - 1.75).abs() < 1e-15);
    }

    #[test]
    fn corner_touching_squares_stay_separate() {
        let mut set = SegmentSet::new();
        set.add_geometry(0, &square(0.0, 0.0, 1.0));
        set.add_geometry(0, &square(1.0, 1.0, 1.0));
        let g = set.sweep(|c| c[0] > 0, true).into_geometry();
        assert_eq!(g.polygons.len(), 2);
        for p in &g.polygons {
            assert_eq!(p.outer.edge_count(), 4);
        }
    }

    #[test]
    fn frame_union_produces_hole() {
        let mut set = SegmentSet::new();
        for r in [
            (0.0, 0.0, 3.0, 1.0),
            (0.0, 2.0, 3.0, 3.0),
            (0.0, 0.0, 1.0, 3.0),
            (2.0, 0.0, 3.0, 3.0),
        ] {
            set.add_geometry(0, &MultiPolygon::rectangle(r.0, r.1, r.2, r.3));
        }
        let g = set.sweep(|c| c[0] > 0, true).into_geometry();
        assert_eq!(g.polygons.len(), 1);
        assert_eq!(g.polygons[0].holes.len(), 1);
        assert!((g.polygons[0].area() - 8.0).abs() < 1e-15);
        assert!(crate::geo::validate_geometry(&g).is_ok());
    }

    #[test]
    fn clip_preserves_area_inside_box() {
        let u = vec![
            (0.0, 0.0),
            (3.0, 0.0),
            (3.0, 3.0),
            (2.0, 3.0),
            (2.0, 1.0),
            (1.0, 1.0),
            (1.0, 3.0),
            (0.0, 3.0),
        ];
        let ring = Ring::new(u.into_iter().map(Coord::from));
        let b = BBox {
            min_x: 0.5,
            min_y: 0.5,
            max_x: 2.5,
            max_y: 2.0,
        };
        let clipped = clip_ring_to_box(ring.vertices(), &b);
        let mut set = SegmentSet::new();
        set.add_ring(0, &clipped);
        let area = set.sweep(|c| c[0] > 0, false).area;
        // full box 3.0 minus the notch part [1,2]x[1,2]
        assert!((area - 2.0).abs() < 1e-15, "{area}");
    }

    #[test]
    fn split_separates_figure_eight() {
        let walk: Vec<Coord> = [
            (0.0, 0.0),
            (1.0, 0.0),
            (1.0, 1.0),
            (2.0, 1.0),
            (2.0, 2.0),
            (1.0, 2.0),
            (1.0, 1.0),
            (0.0, 1.0),
        ]
        .map(Coord::from)
        .to_vec();
        let loops = split_at_repeats(walk);
        assert_eq!(loops.len(), 2);
        assert!(loops.iter().all(|l| l.len() == 4));
    }
}
