//! Simple-polygon helpers: shoelace area and centroid, containment,
//! segment distance and clipping against axis-aligned cells.

use crate::operators::Point;

/// Signed area (positive for counterclockwise vertex order).
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for k in 0..n {
        let a = poly[k];
        let b = poly[(k + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

/// Signed area and area-weighted centroid. Degenerate (zero-area) inputs
/// return the vertex average as centroid.
pub fn area_centroid(poly: &[Point]) -> (f64, Point) {
    let n = poly.len();
    if n == 0 {
        return (0.0, Point::default());
    }
    let mut a2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    // Shift to the first vertex to limit cancellation for small cells far
    // from the origin.
    let o = poly[0];
    for k in 0..n {
        let a = Point::new(poly[k].x - o.x, poly[k].y - o.y);
        let nb = poly[(k + 1) % n];
        let b = Point::new(nb.x - o.x, nb.y - o.y);
        let cross = a.x * b.y - b.x * a.y;
        a2 += cross;
        cx += (a.x + b.x) * cross;
        cy += (a.y + b.y) * cross;
    }
    if a2.abs() < 1e-300 {
        let (sx, sy) = poly.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        return (0.0, Point::new(sx / n as f64, sy / n as f64));
    }
    (0.5 * a2, Point::new(o.x + cx / (3.0 * a2), o.y + cy / (3.0 * a2)))
}

/// Even-odd containment test; points on the boundary may go either way.
pub fn contains(poly: &[Point], p: Point) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Euclidean distance from `p` to the segment `[a, b]`, with the parameter
/// of the closest point.
pub fn segment_distance(p: Point, a: Point, b: Point) -> (f64, f64) {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    let q = Point::new(a.x + t * dx, a.y + t * dy);
    (p.dist(q), t)
}

/// Chebyshev (max-norm) distance from `p` to the segment `[a, b]`.
pub fn segment_distance_inf(p: Point, a: Point, b: Point) -> f64 {
    // The max-norm distance to a segment is a convex function of the
    // segment parameter; ternary search is exact enough for classification.
    let f = |t: f64| {
        let q = Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
        (p.x - q.x).abs().max((p.y - q.y).abs())
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    f(0.5 * (lo + hi)).min(f(0.0)).min(f(1.0))
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn centered(c: Point, half: f64) -> Self {
        Self {
            x0: c.x - half,
            x1: c.x + half,
            y0: c.y - half,
            y1: c.y + half,
        }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn intersects_segment_bbox(&self, a: Point, b: Point) -> bool {
        a.x.min(b.x) <= self.x1 && a.x.max(b.x) >= self.x0 && a.y.min(b.y) <= self.y1 && a.y.max(b.y) >= self.y0
    }
}

/// Clips a (possibly nonconvex) polygon against a rectangle with
/// Sutherland–Hodgman. The result may contain zero-width bridges along the
/// rectangle edges; these do not affect area or centroid integrals.
pub fn clip_to_rect(poly: &[Point], r: &Rect) -> Vec<Point> {
    let mut out: Vec<Point> = poly.to_vec();
    // Each clip edge: inside test and intersection along one axis.
    let edges: [(u8, f64); 4] = [(0, r.x0), (1, r.x1), (2, r.y0), (3, r.y1)];
    for (kind, v) in edges {
        if out.is_empty() {
            break;
        }
        let inside = |p: Point| match kind {
            0 => p.x >= v,
            1 => p.x <= v,
            2 => p.y >= v,
            _ => p.y <= v,
        };
        let cut = |a: Point, b: Point| -> Point {
            if kind < 2 {
                let t = (v - a.x) / (b.x - a.x);
                Point::new(v, a.y + t * (b.y - a.y))
            } else {
                let t = (v - a.y) / (b.y - a.y);
                Point::new(a.x + t * (b.x - a.x), v)
            }
        };
        let input = std::mem::take(&mut out);
        let n = input.len();
        for k in 0..n {
            let cur = input[k];
            let prev = input[(k + n - 1) % n];
            match (inside(prev), inside(cur)) {
                (true, true) => out.push(cur),
                (true, false) => out.push(cut(prev, cur)),
                (false, true) => {
                    out.push(cut(prev, cur));
                    out.push(cur);
                }
                (false, false) => {}
            }
        }
    }
    out
}

/// True if the open segments `[a, b]` and `[c, d]` properly intersect or
/// overlap collinearly.
pub fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let orient = |p: Point, q: Point, r: Point| (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x);
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    // Collinear overlap of positive length.
    if d1 == 0.0 && d2 == 0.0 {
        let (lo1, hi1, lo2, hi2) = if (b.x - a.x).abs() >= (b.y - a.y).abs() {
            (a.x.min(b.x), a.x.max(b.x), c.x.min(d.x), c.x.max(d.x))
        } else {
            (a.y.min(b.y), a.y.max(b.y), c.y.min(d.y), c.y.max(d.y))
        };
        return lo1.max(lo2) < hi1.min(hi2);
    }
    false
}
