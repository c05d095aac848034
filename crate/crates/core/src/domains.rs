//! Admissible domains bounded by a straight characteristic segment `Γ` on
//! `x = ±1` and a noncharacteristic polyline `C`, plus masked lattices over
//! them and the discrete tangential boundary condition on `C`.
//!
//! A curve is stored in the counterclockwise orientation of the boundary, so
//! for `Γ` on `x = 1` it runs from the upper endpoint of `Γ` to the lower one.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{classify_type, MixedSystem, Point, TypeClass};
use crate::poly::Poly2;
use crate::polygon::{self, Rect};

/// Minimum number of polyline segments on `C`.
pub const MIN_SEGMENTS: usize = 64;

/// Endpoint matching tolerance against the `Γ` line.
pub const ENDPOINT_TOL: f64 = 1e-12;

/// Maximum number of distinct supporting lines for which a level function
/// is synthesized from a bare polyline.
const MAX_LEVEL_LINES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainVariant {
    /// `1/√2 < x <= 1`, `|y| < 1/√2`; Hodge system with star weights.
    Omega,
    /// Fourth quadrant, `0 < x <= 1`, `-1 < y < 0`; symmetric system.
    OmegaM,
    /// `1/√2 < x <= 1`, `1/√(2-δ) < y <= √(1-ε)`; homogeneous system.
    OmegaO { delta: f64, epsilon: f64 },
    /// Mirror image of `OmegaM` lying in the quadrant with the given
    /// coordinate signs.
    OmegaMFlipped { sign_x: i8, sign_y: i8 },
}

impl DomainVariant {
    pub fn name(&self) -> &'static str {
        match self {
            DomainVariant::Omega => "omega",
            DomainVariant::OmegaM => "omega_m",
            DomainVariant::OmegaO { .. } => "omega_o",
            DomainVariant::OmegaMFlipped { .. } => "omega_m_flipped",
        }
    }
}

/// The vertical characteristic segment `{x} x [y0, y1]`, `y0 < y1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gamma {
    pub x: f64,
    pub y0: f64,
    pub y1: f64,
}

/// Serialized form of a domain: the input to [`build_domain`] and the
/// output of [`DomainSpec::to_document`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainDocument {
    pub variant: DomainVariant,
    pub gamma: Gamma,
    /// Curve nodes in counterclockwise boundary order.
    pub curve: Vec<[f64; 2]>,
    /// Polynomial vanishing on `C`, as `[px, py, coeff]` terms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_set: Option<Poly2>,
}

/// Analytic curve shapes sampled into polylines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CurveShape {
    /// Half ellipse bulging away from `Γ`, with centre on `Γ`.
    HalfEllipse { center_y: f64, semi_x: f64, semi_y: f64 },
    /// Three sides of the rectangle `[x_left, x_Γ] x [y0, y1]`.
    Rectangle { x_left: f64, y0: f64, y1: f64 },
}

impl DomainDocument {
    /// Samples a shape attached to `Γ` on `x = 1`, oriented counterclockwise.
    pub fn from_shape(variant: DomainVariant, shape: CurveShape, segments: usize) -> Self {
        let segments = segments.max(MIN_SEGMENTS);
        let xg = 1.0;
        match shape {
            CurveShape::HalfEllipse {
                center_y,
                semi_x,
                semi_y,
            } => {
                let mut curve: Vec<[f64; 2]> = (0..=segments)
                    .map(|k| {
                        let t = PI / 2.0 + PI * k as f64 / segments as f64;
                        [xg + semi_x * t.cos(), center_y + semi_y * t.sin()]
                    })
                    .collect();
                curve[0] = [xg, center_y + semi_y];
                curve[segments] = [xg, center_y - semi_y];
                // ((x - 1)/a)^2 + ((y - c)/b)^2 - 1
                let level = Poly2::from_terms([
                    (2, 0, 1.0 / (semi_x * semi_x)),
                    (1, 0, -2.0 * xg / (semi_x * semi_x)),
                    (0, 2, 1.0 / (semi_y * semi_y)),
                    (0, 1, -2.0 * center_y / (semi_y * semi_y)),
                    (
                        0,
                        0,
                        xg * xg / (semi_x * semi_x) + center_y * center_y / (semi_y * semi_y) - 1.0,
                    ),
                ]);
                Self {
                    variant,
                    gamma: Gamma {
                        x: xg,
                        y0: center_y - semi_y,
                        y1: center_y + semi_y,
                    },
                    curve,
                    level_set: Some(level),
                }
            }
            CurveShape::Rectangle { x_left, y0, y1 } => {
                let w = xg - x_left;
                let hgt = y1 - y0;
                let per = 2.0 * w + hgt;
                let n_top = ((segments as f64 * w / per).round() as usize).max(1);
                let n_side = ((segments as f64 * hgt / per).round() as usize).max(1);
                let n_bot = segments.saturating_sub(n_top + n_side).max(n_top);
                let mut curve = Vec::with_capacity(n_top + n_side + n_bot + 1);
                for k in 0..n_top {
                    curve.push([xg - w * k as f64 / n_top as f64, y1]);
                }
                for k in 0..n_side {
                    curve.push([x_left, y1 - hgt * k as f64 / n_side as f64]);
                }
                for k in 0..=n_bot {
                    curve.push([x_left + w * k as f64 / n_bot as f64, y0]);
                }
                let last = curve.len() - 1;
                curve[last] = [xg, y0];
                let level = &(&(&Poly2::y() - &Poly2::constant(y1)) * &(&Poly2::x() - &Poly2::constant(x_left)))
                    * &(&Poly2::y() - &Poly2::constant(y0));
                Self {
                    variant,
                    gamma: Gamma { x: xg, y0, y1 },
                    curve,
                    level_set: Some(level),
                }
            }
        }
    }

    /// Mirror image under `(x, y) -> (sx x, sy y)`, re-oriented
    /// counterclockwise. The variant is left unchanged.
    pub fn reflected(&self, sx: i8, sy: i8) -> Self {
        let (fx, fy) = (sx as f64, sy as f64);
        let mut curve: Vec<[f64; 2]> = self.curve.iter().map(|p| [fx * p[0], fy * p[1]]).collect();
        if sx * sy < 0 {
            curve.reverse();
        }
        let (a, b) = (fy * self.gamma.y0, fy * self.gamma.y1);
        let level_set = self.level_set.as_ref().map(|q| {
            Poly2::from_terms(
                q.terms()
                    .map(|(i, j, c)| (i, j, c * fx.powi(i as i32) * fy.powi(j as i32))),
            )
        });
        Self {
            variant: self.variant,
            gamma: Gamma {
                x: fx * self.gamma.x,
                y0: a.min(b),
                y1: a.max(b),
            },
            curve,
            level_set,
        }
    }
}

/// A validated admissible domain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DomainSpec {
    pub variant: DomainVariant,
    pub gamma: Gamma,
    /// Counterclockwise boundary order; closing the polyline through `Γ`
    /// gives the domain polygon.
    pub curve: Vec<Point>,
    /// Polynomial vanishing at every node of `C`, when one is known.
    pub level_set: Option<Poly2>,
    pub area: f64,
    /// Smallest distance of the closed domain from the lines where the
    /// variant's norm weights vanish.
    pub weight_margin: f64,
    /// True when the weights are bounded away from zero on the domain, so
    /// that weighted and plain L² norms are equivalent.
    pub weights_bounded: bool,
}

fn reject(invariant: &'static str, detail: impl Into<String>) -> Error {
    Error::domain(invariant, detail)
}

/// Bounds of a variant in its standard (fourth-quadrant or `x_Γ = 1`) frame.
struct Bounds {
    x_lo: f64,
    y_lo: f64,
    y_hi: f64,
    y_hi_closed: bool,
}

fn standard_bounds(variant: &DomainVariant) -> Result<Bounds> {
    Ok(match *variant {
        DomainVariant::Omega => Bounds {
            x_lo: FRAC_1_SQRT_2,
            y_lo: -FRAC_1_SQRT_2,
            y_hi: FRAC_1_SQRT_2,
            y_hi_closed: false,
        },
        DomainVariant::OmegaM | DomainVariant::OmegaMFlipped { .. } => Bounds {
            x_lo: 0.0,
            y_lo: -1.0,
            y_hi: 0.0,
            y_hi_closed: false,
        },
        DomainVariant::OmegaO { delta, epsilon } => {
            if !(delta > 0.0 && delta < 0.5 && epsilon > 0.0 && epsilon < 0.5) {
                return Err(reject(
                    "parameters",
                    format!("need 0 < delta < 1/2 and 0 < epsilon < 1/2, got delta={delta}, epsilon={epsilon}"),
                ));
            }
            Bounds {
                x_lo: FRAC_1_SQRT_2,
                y_lo: 1.0 / (2.0 - delta).sqrt(),
                y_hi: (1.0 - epsilon).sqrt(),
                y_hi_closed: true,
            }
        }
    })
}

/// Validates a domain document and returns the admissible domain.
pub fn build_domain(doc: &DomainDocument) -> Result<DomainSpec> {
    let standard = match doc.variant {
        DomainVariant::OmegaMFlipped { sign_x, sign_y } => {
            if sign_x.abs() != 1 || sign_y.abs() != 1 {
                return Err(reject("parameters", "quadrant signs must be +1 or -1"));
            }
            // Map back to the fourth quadrant.
            doc.reflected(sign_x, -sign_y)
        }
        _ => doc.clone(),
    };
    validate_standard(&standard)?;

    let curve: Vec<Point> = doc.curve.iter().map(|p| Point::new(p[0], p[1])).collect();
    let area = polygon::signed_area(&curve);
    let level_set = match &doc.level_set {
        Some(q) => {
            check_level_set(q, &curve)?;
            Some(q.clone())
        }
        None => level_set_from_lines(&curve),
    };

    let std_curve: Vec<Point> = standard.curve.iter().map(|p| Point::new(p[0], p[1])).collect();
    let weight_margin = match doc.variant {
        DomainVariant::Omega | DomainVariant::OmegaO { .. } => std_curve
            .iter()
            .map(|p| (p.x - FRAC_1_SQRT_2).min(FRAC_1_SQRT_2 - p.y.abs()))
            .fold(f64::INFINITY, f64::min),
        DomainVariant::OmegaM | DomainVariant::OmegaMFlipped { .. } => {
            std_curve.iter().map(|p| p.x.min(-p.y)).fold(f64::INFINITY, f64::min)
        }
    };
    let weight_margin = match doc.variant {
        // Star weights |2y^2 - 1| are bounded below by construction there.
        DomainVariant::OmegaO { .. } => std_curve
            .iter()
            .map(|p| (p.x - FRAC_1_SQRT_2).min(p.y - FRAC_1_SQRT_2))
            .fold(f64::INFINITY, f64::min),
        _ => weight_margin,
    };

    Ok(DomainSpec {
        variant: doc.variant,
        gamma: doc.gamma,
        curve,
        level_set,
        area,
        weight_margin,
        weights_bounded: weight_margin > 0.0,
    })
}

fn validate_standard(doc: &DomainDocument) -> Result<()> {
    let b = standard_bounds(&doc.variant)?;
    let g = doc.gamma;
    if g.x != 1.0 {
        return Err(reject(
            "topology",
            format!("Γ must lie on x = 1 (standard frame), got x = {}", g.x),
        ));
    }
    if !(g.y0 < g.y1) {
        return Err(reject("topology", "Γ endpoints must satisfy y0 < y1"));
    }
    if doc.curve.len() < MIN_SEGMENTS + 1 {
        return Err(reject(
            "segments",
            format!(
                "C needs at least {MIN_SEGMENTS} segments, got {}",
                doc.curve.len().saturating_sub(1)
            ),
        ));
    }
    if doc.curve.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(reject("finite", "C contains non-finite coordinates"));
    }
    let first = doc.curve[0];
    let last = doc.curve[doc.curve.len() - 1];
    let on = |p: [f64; 2], y: f64| (p[0] - g.x).abs() <= ENDPOINT_TOL && (p[1] - y).abs() <= ENDPOINT_TOL;
    if !on(first, g.y1) || !on(last, g.y0) {
        return Err(reject(
            "topology",
            format!(
                "C must run from (1, {}) to (1, {}); got ({}, {}) .. ({}, {})",
                g.y1, g.y0, first[0], first[1], last[0], last[1]
            ),
        ));
    }
    let y_ok = |y: f64| y > b.y_lo && (y < b.y_hi || (b.y_hi_closed && y <= b.y_hi));
    if !y_ok(g.y0) || !y_ok(g.y1) {
        return Err(reject(
            "containment",
            format!("Γ endpoints y0={}, y1={} outside ({}, {})", g.y0, g.y1, b.y_lo, b.y_hi),
        ));
    }
    for (k, w) in doc.curve.windows(2).enumerate() {
        if w[1][1] > w[0][1] {
            return Err(reject(
                "orientation",
                format!("dy > 0 on C between nodes {k} and {}", k + 1),
            ));
        }
    }
    let n = doc.curve.len();
    for (k, p) in doc.curve.iter().enumerate().take(n - 1).skip(1) {
        if !(p[0] > b.x_lo && p[0] < g.x) || !y_ok(p[1]) {
            return Err(reject(
                "containment",
                format!("node {k} at ({}, {}) leaves the admissible rectangle", p[0], p[1]),
            ));
        }
    }
    if let DomainVariant::Omega = doc.variant {
        for (k, p) in doc.curve.iter().enumerate() {
            let (x, y) = (p[0], p[1]);
            if x * x * (y * y * (1.0 - 4.0 * x * x) + 3.0 * x * x - 1.0) <= 0.0 {
                return Err(reject(
                    "discriminant",
                    format!("multiplier discriminant not positive at node {k}"),
                ));
            }
        }
    }
    if let DomainVariant::OmegaO { delta, .. } = doc.variant {
        for (k, p) in doc.curve.iter().enumerate() {
            let (x, y) = (p[0], p[1]);
            if !((1.0 - y * y) / (y * y) < 1.0 - delta && 2.0 * x * x - 1.0 > 0.0) {
                return Err(reject(
                    "discriminant",
                    format!("homogeneous bound conditions fail at node {k}"),
                ));
            }
        }
    }
    let pts: Vec<Point> = doc.curve.iter().map(|p| Point::new(p[0], p[1])).collect();
    check_simple(&pts)?;
    if polygon::signed_area(&pts) <= 0.0 {
        return Err(reject(
            "orientation",
            "boundary is not counterclockwise (non-positive area)",
        ));
    }
    Ok(())
}

fn check_simple(curve: &[Point]) -> Result<()> {
    let n = curve.len();
    let segs: Vec<(Point, Point)> = (0..n - 1).map(|k| (curve[k], curve[k + 1])).collect();
    for (k, (a, b)) in segs.iter().enumerate() {
        if a == b {
            return Err(reject("simple", format!("zero-length segment {k}")));
        }
    }
    // Adjacent segments must not fold back onto each other.
    for k in 0..segs.len() - 1 {
        let (a, b) = segs[k];
        let (_, c) = segs[k + 1];
        let cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
        let dot = (b.x - a.x) * (c.x - b.x) + (b.y - a.y) * (c.y - b.y);
        if cross == 0.0 && dot < 0.0 {
            return Err(reject("simple", format!("C folds back at node {}", k + 1)));
        }
    }
    let crossing = (0..segs.len()).into_par_iter().find_any(|&i| {
        let (a, b) = segs[i];
        ((i + 2)..segs.len()).any(|j| {
            let (c, d) = segs[j];
            if a.x.max(b.x) < c.x.min(d.x)
                || c.x.max(d.x) < a.x.min(b.x)
                || a.y.max(b.y) < c.y.min(d.y)
                || c.y.max(d.y) < a.y.min(b.y)
            {
                return false;
            }
            polygon::segments_cross(a, b, c, d) || (a == d || b == c || a == c || b == d) && !(j == i + 1)
        })
    });
    if let Some(i) = crossing {
        return Err(reject("simple", format!("C self-intersects near segment {i}")));
    }
    Ok(())
}

fn check_level_set(q: &Poly2, curve: &[Point]) -> Result<()> {
    let scale = q.max_abs_coeff().max(1.0);
    for (k, p) in curve.iter().enumerate() {
        if q.eval(*p).abs() > 1e-9 * scale {
            return Err(reject(
                "level_set",
                format!("level function does not vanish at node {k}"),
            ));
        }
    }
    Ok(())
}

/// Product of the distinct lines carrying the segments of `C`, if there are
/// few of them.
fn level_set_from_lines(curve: &[Point]) -> Option<Poly2> {
    let mut lines: Vec<[f64; 3]> = Vec::new();
    for w in curve.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (nx, ny) = (b.y - a.y, a.x - b.x);
        let len = nx.hypot(ny);
        let (mut nx, mut ny) = (nx / len, ny / len);
        if nx < 0.0 || (nx == 0.0 && ny < 0.0) {
            nx = -nx;
            ny = -ny;
        }
        let c = -(nx * a.x + ny * a.y);
        let known = lines
            .iter()
            .any(|l| (l[0] - nx).abs() < 1e-9 && (l[1] - ny).abs() < 1e-9 && (l[2] - c).abs() < 1e-9);
        if !known {
            lines.push([nx, ny, c]);
            if lines.len() > MAX_LEVEL_LINES {
                return None;
            }
        }
    }
    Some(lines.iter().fold(Poly2::constant(1.0), |acc, l| {
        &acc * &Poly2::from_terms([(1, 0, l[0]), (0, 1, l[1]), (0, 0, l[2])])
    }))
}

impl DomainSpec {
    pub fn to_document(&self) -> DomainDocument {
        DomainDocument {
            variant: self.variant,
            gamma: self.gamma,
            curve: self.curve.iter().map(|p| [p.x, p.y]).collect(),
            level_set: self.level_set.clone(),
        }
    }

    /// Vertices of the closed domain polygon (the closing edge is `Γ`).
    pub fn polygon(&self) -> &[Point] {
        &self.curve
    }

    /// Largest vertex-to-vertex distance.
    pub fn diameter(&self) -> f64 {
        let pts = &self.curve;
        (0..pts.len())
            .into_par_iter()
            .map(|i| pts[i + 1..].iter().map(|q| pts[i].dist(*q)).fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max)
    }

    /// `n + 1` equally spaced points on `Γ`.
    pub fn gamma_nodes(&self, n: usize) -> Vec<Point> {
        let n = n.max(1);
        (0..=n)
            .map(|k| {
                Point::new(
                    self.gamma.x,
                    self.gamma.y0 + (self.gamma.y1 - self.gamma.y0) * k as f64 / n as f64,
                )
            })
            .collect()
    }

    /// Segments of `C` as `(start, end)` pairs in boundary order.
    pub fn c_segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.curve.windows(2).map(|w| (w[0], w[1]))
    }

    /// Unit tangent of the segment of `C` nearest to `p`.
    pub fn nearest_tangent(&self, p: Point) -> Point {
        let (a, b) = self
            .c_segments()
            .min_by(|s, t| {
                let ds = polygon::segment_distance(p, s.0, s.1).0;
                let dt = polygon::segment_distance(p, t.0, t.1).0;
                ds.total_cmp(&dt)
            })
            .expect("curve has segments");
        let len = a.dist(b);
        Point::new((b.x - a.x) / len, (b.y - a.y) / len)
    }

    /// Writes the JSON document form.
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, &self.to_document())?;
        Ok(())
    }
}

pub fn read_domain_json(text: &str) -> Result<DomainSpec> {
    let doc: DomainDocument = serde_json::from_str(text)?;
    build_domain(&doc)
}

/// Standard domains used throughout tests, examples and the CLI.
pub mod presets {
    use super::*;

    /// Half ellipse `((x-1)/0.25)^2 + (y/0.5)^2 = 1`, `x <= 1`.
    pub fn omega(segments: usize) -> DomainSpec {
        let doc = DomainDocument::from_shape(
            DomainVariant::Omega,
            CurveShape::HalfEllipse {
                center_y: 0.0,
                semi_x: 0.25,
                semi_y: 0.5,
            },
            segments,
        );
        build_domain(&doc).expect("preset omega is admissible")
    }

    /// Half ellipse centred at `(1, -0.5)` with semi-axes `0.5`, `0.4`.
    pub fn omega_m(segments: usize) -> DomainSpec {
        build_domain(&omega_m_document(segments)).expect("preset omega_m is admissible")
    }

    pub fn omega_m_document(segments: usize) -> DomainDocument {
        DomainDocument::from_shape(
            DomainVariant::OmegaM,
            CurveShape::HalfEllipse {
                center_y: -0.5,
                semi_x: 0.5,
                semi_y: 0.4,
            },
            segments,
        )
    }

    /// Mirror image of [`omega_m`] in the quadrant `(sign_x, sign_y)`.
    pub fn omega_m_flipped(sign_x: i8, sign_y: i8, segments: usize) -> Result<DomainSpec> {
        let mut doc = omega_m_document(segments).reflected(sign_x, -sign_y);
        doc.variant = DomainVariant::OmegaMFlipped { sign_x, sign_y };
        build_domain(&doc)
    }

    /// Rectangle-shaped `C` inside the homogeneous-system rectangle.
    pub fn omega_o(delta: f64, epsilon: f64, segments: usize) -> Result<DomainSpec> {
        let y_lo = 1.0 / (2.0 - delta).sqrt();
        let y_hi = (1.0 - epsilon).sqrt();
        let pad = 0.05 * (y_hi - y_lo);
        let doc = DomainDocument::from_shape(
            DomainVariant::OmegaO { delta, epsilon },
            CurveShape::Rectangle {
                x_left: 0.75,
                y0: y_lo + pad,
                y1: y_hi - pad,
            },
            segments,
        );
        build_domain(&doc)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeClass {
    Exterior,
    Interior,
    Gamma,
    CBoundary,
}

impl NodeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeClass::Exterior => "exterior",
            NodeClass::Interior => "interior",
            NodeClass::Gamma => "gamma",
            NodeClass::CBoundary => "c-boundary",
        }
    }

    pub fn is_active(self) -> bool {
        self != NodeClass::Exterior
    }
}

/// A masked rectangular lattice carrying a two-component field.
///
/// Node `(i, j)` sits at `(x_origin + i h, y_origin + j h)` and owns the dual
/// cell of side `h` centred on it; `area` is the part of that cell inside
/// the domain polygon and `centroid` the centroid of that part. Values of
/// exterior nodes, and missing values, are `NaN`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub h: f64,
    pub x_origin: f64,
    pub y_origin: f64,
    pub nx: usize,
    pub ny: usize,
    pub class: Vec<NodeClass>,
    pub area: Vec<f64>,
    pub centroid: Vec<Point>,
    /// Unit tangent of the nearest boundary segment, for boundary nodes.
    pub tangent: Vec<Option<Point>>,
    pub values: Vec<[f64; 2]>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ClassCounts {
    pub exterior: usize,
    pub interior: usize,
    pub gamma: usize,
    pub c_boundary: usize,
}

impl GridField {
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn node(&self, k: usize) -> Point {
        let (i, j) = (k % self.nx, k / self.nx);
        Point::new(self.x_origin + i as f64 * self.h, self.y_origin + j as f64 * self.h)
    }

    pub fn len(&self) -> usize {
        self.class.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class.is_empty()
    }

    /// Indices of non-exterior nodes, in lattice order.
    pub fn active(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&k| self.class[k].is_active())
    }

    pub fn counts(&self) -> ClassCounts {
        let mut c = ClassCounts::default();
        for cl in &self.class {
            match cl {
                NodeClass::Exterior => c.exterior += 1,
                NodeClass::Interior => c.interior += 1,
                NodeClass::Gamma => c.gamma += 1,
                NodeClass::CBoundary => c.c_boundary += 1,
            }
        }
        c
    }

    /// Total clipped area of the active cells.
    pub fn total_area(&self) -> f64 {
        self.active().map(|k| self.area[k]).sum()
    }

    /// Copy of the lattice with values filled from `f` at node positions.
    pub fn with_values(&self, f: impl Fn(Point) -> [f64; 2]) -> Self {
        let mut out = self.clone();
        for k in 0..out.len() {
            out.values[k] = if out.class[k].is_active() {
                f(out.node(k))
            } else {
                [f64::NAN; 2]
            };
        }
        out
    }

    /// Neighbour index in direction `(di, dj)` if it is an active node.
    pub fn neighbor(&self, k: usize, di: isize, dj: isize) -> Option<usize> {
        let (i, j) = ((k % self.nx) as isize + di, (k / self.nx) as isize + dj);
        if i < 0 || j < 0 || i >= self.nx as isize || j >= self.ny as isize {
            return None;
        }
        let n = self.index(i as usize, j as usize);
        self.class[n].is_active().then_some(n)
    }

    /// Writes `x,y,class,u1,u2` rows for the active nodes.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "x,y,class,u1,u2")?;
        for k in self.active() {
            let p = self.node(k);
            let [u1, u2] = self.values[k];
            writeln!(
                out,
                "{:.17e},{:.17e},{},{:.17e},{:.17e}",
                p.x,
                p.y,
                self.class[k].as_str(),
                u1,
                u2
            )?;
        }
        Ok(())
    }

    /// Reads values for this lattice from CSV rows `x,y,...,u1,u2`
    /// (the format written by [`GridField::write_csv`]); nodes are matched
    /// to the nearest lattice position.
    pub fn read_values_csv(&self, text: &str) -> Result<Self> {
        let mut out = self.with_values(|_| [f64::NAN; 2]);
        for (line_no, line) in text.lines().enumerate().skip(1) {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() < 4 {
                return Err(Error::Parse(format!("line {}: expected x,y,...,u1,u2", line_no + 1)));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", line_no + 1)))
            };
            let (x, y) = (num(cols[0])?, num(cols[1])?);
            let (u1, u2) = (num(cols[cols.len() - 2])?, num(cols[cols.len() - 1])?);
            let i = ((x - self.x_origin) / self.h).round();
            let j = ((y - self.y_origin) / self.h).round();
            if i < 0.0 || j < 0.0 || i >= self.nx as f64 || j >= self.ny as f64 {
                continue;
            }
            let k = self.index(i as usize, j as usize);
            if out.class[k].is_active() {
                out.values[k] = [u1, u2];
            }
        }
        Ok(out)
    }
}

/// Masks a lattice against a closed polygon.
///
/// `gamma` marks the lattice column at `x = gamma.x` as characteristic
/// boundary; `x_origin`/`y_origin` fix the lattice alignment.
pub fn mask_polygon(poly: &[Point], h: f64, gamma: Option<Gamma>) -> GridField {
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in poly {
        xmin = xmin.min(p.x);
        xmax = xmax.max(p.x);
        ymin = ymin.min(p.y);
        ymax = ymax.max(p.y);
    }
    // Align columns with Γ when present, rows with y = 0.
    let x_anchor = gamma.map(|g| g.x).unwrap_or(0.0);
    let i_lo = ((xmin - x_anchor) / h).floor() as i64 - 1;
    let i_hi = ((xmax - x_anchor) / h).ceil() as i64 + 1;
    let j_lo = (ymin / h).floor() as i64 - 1;
    let j_hi = (ymax / h).ceil() as i64 + 1;
    let nx = (i_hi - i_lo + 1) as usize;
    let ny = (j_hi - j_lo + 1) as usize;
    let x_origin = x_anchor + i_lo as f64 * h;
    let y_origin = j_lo as f64 * h;
    let node = |k: usize| Point::new(x_origin + (k % nx) as f64 * h, y_origin + (k / nx) as f64 * h);

    // Cells touched by some boundary segment need clipping.
    let mut cut = vec![false; nx * ny];
    let m = poly.len();
    for s in 0..m {
        let (a, b) = (poly[s], poly[(s + 1) % m]);
        let i0 = (((a.x.min(b.x) - x_origin) / h - 0.5).floor().max(0.0)) as usize;
        let i1 = ((((a.x.max(b.x) - x_origin) / h + 0.5).ceil()) as usize).min(nx - 1);
        let j0 = (((a.y.min(b.y) - y_origin) / h - 0.5).floor().max(0.0)) as usize;
        let j1 = ((((a.y.max(b.y) - y_origin) / h + 0.5).ceil()) as usize).min(ny - 1);
        for j in j0..=j1 {
            for i in i0..=i1 {
                let k = j * nx + i;
                if Rect::centered(node(k), 0.5 * h).intersects_segment_bbox(a, b) {
                    cut[k] = true;
                }
            }
        }
    }

    let cells: Vec<(f64, Point)> = (0..nx * ny)
        .into_par_iter()
        .map(|k| {
            let p = node(k);
            if cut[k] {
                let rect = Rect::centered(p, 0.5 * h);
                let clipped = polygon::clip_to_rect(poly, &rect);
                let (a, c) = polygon::area_centroid(&clipped);
                (a.max(0.0).min(h * h), c)
            } else if polygon::contains(poly, p) {
                (h * h, p)
            } else {
                (0.0, p)
            }
        })
        .collect();

    let full = h * h;
    let mut class: Vec<NodeClass> = (0..nx * ny)
        .map(|k| {
            let (a, _) = cells[k];
            if a <= 1e-12 * full {
                return NodeClass::Exterior;
            }
            let p = node(k);
            if let Some(g) = gamma {
                if (p.x - g.x).abs() < 0.5 * h && p.y >= g.y0 - 0.5 * h && p.y <= g.y1 + 0.5 * h {
                    return NodeClass::Gamma;
                }
            }
            if a < full * (1.0 - 1e-12) {
                NodeClass::CBoundary
            } else {
                NodeClass::Interior
            }
        })
        .collect();

    // Nodes without an active neighbour along some axis cannot carry a
    // difference stencil; drop them.
    loop {
        let mut changed = false;
        for k in 0..nx * ny {
            if !class[k].is_active() {
                continue;
            }
            let (i, j) = (k % nx, k / nx);
            let act = |ii: isize, jj: isize| {
                ii >= 0
                    && jj >= 0
                    && (ii as usize) < nx
                    && (jj as usize) < ny
                    && class[jj as usize * nx + ii as usize].is_active()
            };
            let (i, j) = (i as isize, j as isize);
            let has_x = act(i - 1, j) || act(i + 1, j);
            let has_y = act(i, j - 1) || act(i, j + 1);
            if !has_x || !has_y {
                class[k] = NodeClass::Exterior;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let area: Vec<f64> = (0..nx * ny)
        .map(|k| if class[k].is_active() { cells[k].0 } else { 0.0 })
        .collect();
    let centroid: Vec<Point> = cells.iter().map(|c| c.1).collect();
    GridField {
        h,
        x_origin,
        y_origin,
        nx,
        ny,
        class,
        area,
        centroid,
        tangent: vec![None; nx * ny],
        values: vec![[f64::NAN; 2]; nx * ny],
    }
}

/// Masks a lattice of spacing `h` over the domain.
pub fn generate_grid(d: &DomainSpec, h: f64) -> Result<GridField> {
    let limit = d.diameter() / 8.0;
    if !(h > 0.0 && h < limit) {
        return Err(Error::Resolution { h, limit });
    }
    let mut grid = mask_polygon(d.polygon(), h, Some(d.gamma));
    let tangents: Vec<Option<Point>> = (0..grid.len())
        .into_par_iter()
        .map(|k| (grid.class[k] == NodeClass::CBoundary).then(|| d.nearest_tangent(grid.node(k))))
        .collect();
    grid.tangent = tangents;
    Ok(grid)
}

/// Largest tangential component `|u1 dx/ds + u2 dy/ds|` over the `C`
/// boundary nodes.
pub fn boundary_tangent_residual(grid: &GridField) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut missing = 0;
    for k in 0..grid.len() {
        if grid.class[k] != NodeClass::CBoundary {
            continue;
        }
        let [u1, u2] = grid.values[k];
        if !u1.is_finite() || !u2.is_finite() {
            missing += 1;
            continue;
        }
        let t = grid.tangent[k].expect("boundary nodes carry tangents");
        worst = worst.max((u1 * t.x + u2 * t.y).abs());
    }
    if missing > 0 {
        return Err(Error::IncompleteField { missing });
    }
    Ok(worst)
}

/// Type map of the Hodge family on a lattice, for export.
#[derive(Clone, Debug)]
pub struct TypeMap {
    pub bbox: [f64; 4],
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major from the bottom row; `None` marks degenerate nodes.
    pub classes: Vec<Option<TypeClass>>,
    /// Signed radial defect `x^2 + y^2 - 1` per node.
    pub radial: Vec<f64>,
}

impl TypeMap {
    /// Classifies `s` at the lattice nodes of `bbox = [x0, x1, y0, y1]` with
    /// spacing `h`. Nodes where the characteristic form degenerates are
    /// recorded as `None`.
    pub fn compute(s: &MixedSystem, bbox: [f64; 4], h: f64) -> Result<Self> {
        let [x0, x1, y0, y1] = bbox;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Resolution {
                h,
                limit: f64::INFINITY,
            });
        }
        if !(x1 > x0 && y1 > y0) || bbox.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain(
                "bbox",
                format!("box {bbox:?} must satisfy x0 < x1, y0 < y1"),
            ));
        }
        let nx = ((x1 - x0) / h + 1e-9).floor() as usize + 1;
        let ny = ((y1 - y0) / h + 1e-9).floor() as usize + 1;
        let (classes, radial): (Vec<_>, Vec<_>) = (0..nx * ny)
            .into_par_iter()
            .map(|k| {
                let p = Point::new(x0 + (k % nx) as f64 * h, y0 + (k / nx) as f64 * h);
                (classify_type(s, p).ok(), p.norm_sq() - 1.0)
            })
            .unzip();
        Ok(Self {
            bbox,
            h,
            nx,
            ny,
            classes,
            radial,
        })
    }

    /// PGM (P2): 0 elliptic, 128 within `h` of the unit circle, 255
    /// hyperbolic; the top image row is the largest `y`.
    pub fn write_pgm<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "P2\n{} {}\n255", self.nx, self.ny)?;
        for j in (0..self.ny).rev() {
            let row: Vec<String> = (0..self.nx)
                .map(|i| {
                    let k = j * self.nx + i;
                    let p = Point::new(self.bbox[0] + i as f64 * self.h, self.bbox[2] + j as f64 * self.h);
                    let r = p.norm_sq().sqrt();
                    if (r - 1.0).abs() <= self.h {
                        "128"
                    } else if self.radial[k] < 0.0 {
                        "0"
                    } else {
                        "255"
                    }
                    .to_string()
                })
                .collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "x,y,type")?;
        for j in 0..self.ny {
            for i in 0..self.nx {
                let k = j * self.nx + i;
                let p = Point::new(self.bbox[0] + i as f64 * self.h, self.bbox[2] + j as f64 * self.h);
                let t = self.classes[k]
                    .map(|c| c.to_string())
                    .unwrap_or_else(|| "degenerate".into());
                writeln!(out, "{},{},{}", p.x, p.y, t)?;
            }
        }
        Ok(())
    }

    pub fn fraction(&self, class: TypeClass) -> f64 {
        self.classes.iter().filter(|c| **c == Some(class)).count() as f64 / self.classes.len() as f64
    }
}
