//! Singular metrics, the sonic radius, flow-metric signature and the
//! characteristic lines of the Hodge family.
//!
//! The characteristics of the Hodge principal part are exactly the tangent
//! lines to the unit disc, so they are represented in closed form. A
//! fixed-step RK4 integrator of the characteristic direction field is kept
//! alongside as an independent cross-check.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::Point;

/// Tolerance for the degenerate (null) classification of flow metrics and
/// for the singular locus of the metrics.
pub const SIGNATURE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    /// `G_ij = (1-r^2)^-2 [[1-y^2, xy], [xy, 1-x^2]]`.
    Beltrami,
    /// `G^ij = (1-r^2) [[1-x^2, -xy], [-xy, 1-y^2]]`.
    BeltramiInverse,
    /// Hodograph-plane metric with adiabatic constant `gamma`; coordinates
    /// are the velocity components.
    Hodograph { gamma: f64 },
    /// `(1-|u|^2)^m [[1-u1^2, -u1 u2], [-u1 u2, 1-u2^2]]`, coordinates are the
    /// velocity components.
    FlowQuasilinear { m: f64 },
    /// `diag(1, sgn y)`: Euclidean above the axis, Minkowskian below.
    Sign,
}

impl MetricKind {
    fn name(&self) -> String {
        match self {
            MetricKind::Beltrami => "beltrami".into(),
            MetricKind::BeltramiInverse => "beltrami-inverse".into(),
            MetricKind::Hodograph { gamma } => format!("hodograph({gamma})"),
            MetricKind::FlowQuasilinear { m } => format!("flow-quasilinear({m})"),
            MetricKind::Sign => "sign".into(),
        }
    }
}

/// A symmetric 2x2 metric field; only `g12` is stored off the diagonal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metric2 {
    pub kind: MetricKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricValue {
    pub g11: f64,
    pub g12: f64,
    pub g22: f64,
    /// Closed-form determinant density of the model. For the Beltrami kinds
    /// this is `G = 1/(1 - x^2 - y^2)`, the density that makes the
    /// coordinate divergence of the Hodge equations reproduce the system;
    /// it is not `g11 g22 - g12^2` of the displayed matrix. For the other
    /// kinds it equals the matrix determinant.
    pub determinant: f64,
}

impl MetricValue {
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.g11, self.g12], [self.g12, self.g22]]
    }

    /// Determinant of the returned matrix itself.
    pub fn matrix_determinant(&self) -> f64 {
        self.g11 * self.g22 - self.g12 * self.g12
    }
}

impl Metric2 {
    pub fn new(kind: MetricKind) -> Self {
        Self { kind }
    }

    fn singular(&self, p: Point) -> Error {
        Error::SingularMetric {
            kind: self.kind.name(),
            x: p.x,
            y: p.y,
        }
    }

    pub fn eval(&self, p: Point) -> Result<MetricValue> {
        let (x, y) = (p.x, p.y);
        match self.kind {
            MetricKind::Beltrami | MetricKind::BeltramiInverse => {
                let s = 1.0 - x * x - y * y;
                if s.abs() <= SIGNATURE_TOL {
                    return Err(self.singular(p));
                }
                if self.kind == MetricKind::Beltrami {
                    let f = 1.0 / (s * s);
                    Ok(MetricValue {
                        g11: f * (1.0 - y * y),
                        g12: f * x * y,
                        g22: f * (1.0 - x * x),
                        determinant: 1.0 / s,
                    })
                } else {
                    Ok(MetricValue {
                        g11: s * (1.0 - x * x),
                        g12: -s * x * y,
                        g22: s * (1.0 - y * y),
                        determinant: s,
                    })
                }
            }
            MetricKind::Hodograph { gamma } => {
                if !(gamma >= 1.0) {
                    return Err(Error::AdiabaticConstant(gamma));
                }
                let q2 = x * x + y * y;
                let c2 = 1.0 - 0.5 * (gamma - 1.0) * q2;
                let denom = c2 * (c2 - q2);
                if denom.abs() <= SIGNATURE_TOL {
                    return Err(self.singular(p));
                }
                let v = MetricValue {
                    g11: (c2 - x * x) / denom,
                    g12: -x * y / denom,
                    g22: (c2 - y * y) / denom,
                    determinant: 0.0,
                };
                Ok(MetricValue {
                    determinant: v.matrix_determinant(),
                    ..v
                })
            }
            MetricKind::FlowQuasilinear { m } => {
                let base = 1.0 - x * x - y * y;
                if m < 0.0 && base.abs() <= SIGNATURE_TOL {
                    return Err(self.singular(p));
                }
                let factor = conformal_factor(base, m);
                let v = MetricValue {
                    g11: factor * (1.0 - x * x),
                    g12: -factor * x * y,
                    g22: factor * (1.0 - y * y),
                    determinant: 0.0,
                };
                Ok(MetricValue {
                    determinant: v.matrix_determinant(),
                    ..v
                })
            }
            MetricKind::Sign => {
                if y == 0.0 {
                    return Err(self.singular(p));
                }
                let s = y.signum();
                Ok(MetricValue {
                    g11: 1.0,
                    g12: 0.0,
                    g22: s,
                    determinant: s,
                })
            }
        }
    }
}

/// `base^m`, using the magnitude of a negative base for non-integer `m`.
fn conformal_factor(base: f64, m: f64) -> f64 {
    if m == m.trunc() && m.abs() < i32::MAX as f64 {
        base.powi(m as i32)
    } else {
        base.abs().powf(m)
    }
}

pub fn eval_metric(metric: &Metric2, p: Point) -> Result<MetricValue> {
    metric.eval(p)
}

/// Radius `sqrt(2/(gamma+1))` of the sonic circle in the hodograph plane.
pub fn sonic_radius(gamma: f64) -> Result<f64> {
    if !(gamma >= 1.0) || !gamma.is_finite() {
        return Err(Error::AdiabaticConstant(gamma));
    }
    Ok((2.0 / (gamma + 1.0)).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signature {
    Riemannian,
    Degenerate,
    Lorentzian,
}

/// Signature of `[[1-u1^2, -u1 u2], [-u1 u2, 1-u2^2]]`, whose determinant is
/// `1 - u1^2 - u2^2`.
pub fn flow_metric_signature(u1: f64, u2: f64) -> Signature {
    let det = 1.0 - u1 * u1 - u2 * u2;
    if det.abs() <= SIGNATURE_TOL {
        Signature::Degenerate
    } else if det > 0.0 {
        Signature::Riemannian
    } else {
        Signature::Lorentzian
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Smaller slope (vertical lines count as slope `+inf`).
    First,
    /// Larger slope.
    Second,
}

/// A characteristic line of the Hodge family, tangent to the unit circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CharacteristicCurve {
    pub anchor: Point,
    /// Unit direction vector.
    pub direction: Point,
    pub tangency: Point,
}

impl CharacteristicCurve {
    /// Slope `dy/dx`, `+inf` for vertical lines.
    pub fn slope(&self) -> f64 {
        if self.direction.x.abs() <= 1e-15 {
            f64::INFINITY
        } else {
            self.direction.y / self.direction.x
        }
    }

    pub fn point_at(&self, t: f64) -> Point {
        Point::new(
            self.anchor.x + t * self.direction.x,
            self.anchor.y + t * self.direction.y,
        )
    }

    /// Distance from the origin to the carrying line.
    pub fn origin_distance(&self) -> f64 {
        (self.anchor.x * self.direction.y - self.anchor.y * self.direction.x).abs()
    }

    /// Samples the line on `t in [t0, t1]` with `n + 1` points.
    pub fn polyline(&self, t0: f64, t1: f64, n: usize) -> Vec<Point> {
        let n = n.max(1);
        (0..=n)
            .map(|k| self.point_at(t0 + (t1 - t0) * k as f64 / n as f64))
            .collect()
    }
}

/// Value of `(1-y^2) dx^2 + 2xy dx dy + (1-x^2) dy^2` for a direction.
pub fn characteristic_form(p: Point, dir: Point) -> f64 {
    (1.0 - p.y * p.y) * dir.x * dir.x + 2.0 * p.x * p.y * dir.x * dir.y + (1.0 - p.x * p.x) * dir.y * dir.y
}

fn line_through(anchor: Point, theta: f64) -> CharacteristicCurve {
    let tangency = Point::new(theta.cos(), theta.sin());
    let mut direction = Point::new(-tangency.y, tangency.x);
    // Canonical orientation: rightward, or upward when vertical.
    if direction.x < -1e-15 || (direction.x.abs() <= 1e-15 && direction.y < 0.0) {
        direction = Point::new(-direction.x, -direction.y);
    }
    CharacteristicCurve {
        anchor,
        direction,
        tangency,
    }
}

/// The tangent line to the unit circle through `p` on the chosen branch.
pub fn trace_characteristic(p: Point, branch: Branch) -> Result<CharacteristicCurve> {
    let r2 = p.norm_sq();
    if r2 < 1.0 - PARABOLIC_RADIUS_TOL {
        return Err(Error::NoRealCharacteristic { x: p.x, y: p.y });
    }
    let phi = p.y.atan2(p.x);
    if r2 <= 1.0 + PARABOLIC_RADIUS_TOL {
        return Ok(line_through(p, phi));
    }
    let spread = (1.0 / r2.sqrt()).acos();
    let a = line_through(p, phi + spread);
    let b = line_through(p, phi - spread);
    let (lo, hi) = if a.slope() <= b.slope() { (a, b) } else { (b, a) };
    Ok(match branch {
        Branch::First => lo,
        Branch::Second => hi,
    })
}

/// Points within this of the unit circle (in `r^2`) are treated as parabolic.
pub const PARABOLIC_RADIUS_TOL: f64 = 1e-12;

/// Real characteristic directions at `p`, as unit vectors.
fn characteristic_directions(p: Point) -> Option<[Point; 2]> {
    let (x, y) = (p.x, p.y);
    let disc = x * x + y * y - 1.0;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    // Null directions of the form: (dx, dy) with dx = -(xy) ± s..., written
    // without division so vertical directions are included.
    let c_xx = 1.0 - y * y;
    let c_yy = 1.0 - x * x;
    let unit = |v: Point| {
        let n = v.x.hypot(v.y);
        Point::new(v.x / n, v.y / n)
    };
    let cand = if c_yy.abs() >= c_xx.abs() {
        // dy/dx = (-xy ± s) / (1 - x^2)
        [unit(Point::new(c_yy, -x * y + s)), unit(Point::new(c_yy, -x * y - s))]
    } else {
        // dx/dy = (-xy ± s) / (1 - y^2)
        [unit(Point::new(-x * y + s, c_xx)), unit(Point::new(-x * y - s, c_xx))]
    };
    Some(cand)
}

/// Integrates the characteristic direction field with fixed-step RK4 by arc
/// length, starting at `start` along (approximately) `initial_dir`. Used to
/// cross-check the closed-form tangent lines.
pub fn integrate_characteristic_rk4(start: Point, initial_dir: Point, length: f64, step: f64) -> Vec<Point> {
    let n = (length / step).ceil().max(1.0) as usize;
    let h = length / n as f64;
    let mut pts = Vec::with_capacity(n + 1);
    let mut p = start;
    let mut prev = initial_dir;
    pts.push(p);
    let field = |q: Point, prev: Point| -> Point {
        match characteristic_directions(q) {
            Some([d1, d2]) => {
                let pick = |d: Point| {
                    let dot = d.x * prev.x + d.y * prev.y;
                    (dot.abs(), if dot < 0.0 { Point::new(-d.x, -d.y) } else { d })
                };
                let (s1, v1) = pick(d1);
                let (s2, v2) = pick(d2);
                if s1 >= s2 {
                    v1
                } else {
                    v2
                }
            }
            None => prev,
        }
    };
    for _ in 0..n {
        let k1 = field(p, prev);
        let k2 = field(Point::new(p.x + 0.5 * h * k1.x, p.y + 0.5 * h * k1.y), k1);
        let k3 = field(Point::new(p.x + 0.5 * h * k2.x, p.y + 0.5 * h * k2.y), k2);
        let k4 = field(Point::new(p.x + h * k3.x, p.y + h * k3.y), k3);
        let dx = (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x) / 6.0;
        let dy = (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y) / 6.0;
        p = Point::new(p.x + h * dx, p.y + h * dy);
        prev = k4;
        pts.push(p);
    }
    pts
}

/// Writes polylines as CSV with columns `curve,x,y`.
pub fn write_polylines_csv<W: Write>(out: &mut W, curves: &[(String, Vec<Point>)]) -> Result<()> {
    writeln!(out, "curve,x,y")?;
    for (name, pts) in curves {
        for p in pts {
            writeln!(out, "{name},{:.17e},{:.17e}", p.x, p.y)?;
        }
    }
    Ok(())
}

/// Writes metric evaluations on a grid as CSV with columns
/// `x,y,g11,g12,g22,determinant`; singular nodes are written as `nan`.
pub fn write_metric_grid_csv<W: Write>(out: &mut W, metric: &Metric2, bbox: [f64; 4], h: f64) -> Result<()> {
    writeln!(out, "x,y,g11,g12,g22,determinant")?;
    let nx = ((bbox[1] - bbox[0]) / h).round() as usize;
    let ny = ((bbox[3] - bbox[2]) / h).round() as usize;
    for j in 0..=ny {
        for i in 0..=nx {
            let p = Point::new(bbox[0] + i as f64 * h, bbox[2] + j as f64 * h);
            match metric.eval(p) {
                Ok(v) => writeln!(out, "{},{},{},{},{},{}", p.x, p.y, v.g11, v.g12, v.g22, v.determinant)?,
                Err(_) => writeln!(out, "{},{},nan,nan,nan,nan", p.x, p.y)?,
            }
        }
    }
    Ok(())
}

/// Angle helper used by tests and the CLI: a point at radius `r`, angle `t`.
pub fn polar(r: f64, t: f64) -> Point {
    Point::new(r * t.cos(), r * t.sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beltrami_examples() {
        let m = Metric2::new(MetricKind::Beltrami);
        let v = m.eval(Point::new(0.0, 0.0)).unwrap();
        assert_eq!(v.matrix(), [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(v.determinant, 1.0);

        let v = m.eval(Point::new(0.5, 0.0)).unwrap();
        assert!((v.g11 - 16.0 / 9.0).abs() < 1e-14);
        assert!(v.g12.abs() < 1e-15);
        assert!((v.g22 - 4.0 / 3.0).abs() < 1e-14);
        assert!((v.determinant - 4.0 / 3.0).abs() < 1e-12);

        assert!(matches!(
            m.eval(Point::new(0.6, 0.8)),
            Err(Error::SingularMetric { .. })
        ));
    }

    #[test]
    fn sonic_radius_examples() {
        assert_eq!(sonic_radius(1.0).unwrap(), 1.0);
        assert!((sonic_radius(3.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((sonic_radius(1.4).unwrap() - 0.912_870_929_175_276_9).abs() < 1e-12);
        assert!(sonic_radius(0.9).is_err());
        assert!(sonic_radius(f64::NAN).is_err());
    }

    #[test]
    fn flow_signature_examples() {
        assert_eq!(flow_metric_signature(0.0, 0.0), Signature::Riemannian);
        assert_eq!(flow_metric_signature(1.0, 0.0), Signature::Degenerate);
        assert_eq!(flow_metric_signature(1.0, 1.0), Signature::Lorentzian);
    }

    #[test]
    fn flow_metric_conformal_factor_keeps_signature() {
        for m in [-1.5, 0.0, 2.0] {
            let metric = Metric2::new(MetricKind::FlowQuasilinear { m });
            for (p, sig) in [
                (Point::new(0.3, 0.2), Signature::Riemannian),
                (Point::new(1.2, 0.4), Signature::Lorentzian),
            ] {
                let det = metric.eval(p).unwrap().determinant;
                assert_eq!(det > 0.0, sig == Signature::Riemannian, "m={m} p={p:?}");
                assert_eq!(flow_metric_signature(p.x, p.y), sig);
            }
        }
    }

    #[test]
    fn hodograph_metric_singular_on_sonic_circle() {
        let gamma = 1.4;
        let r = sonic_radius(gamma).unwrap();
        let m = Metric2::new(MetricKind::Hodograph { gamma });
        assert!(m.eval(polar(r, 0.3)).is_err());
        let inside = m.eval(polar(0.5 * r, 0.3)).unwrap();
        assert!(inside.determinant > 0.0);
        // Between the sonic circle and the cavitation limit the metric is
        // indefinite.
        let q = polar((r + 1.0) / 2.0, 0.3);
        let v = m.eval(q).unwrap();
        assert!(v.determinant < 0.0, "{v:?}");
    }

    #[test]
    fn sign_metric() {
        let m = Metric2::new(MetricKind::Sign);
        assert_eq!(m.eval(Point::new(0.0, 1.0)).unwrap().determinant, 1.0);
        assert_eq!(m.eval(Point::new(0.0, -1.0)).unwrap().determinant, -1.0);
        assert!(m.eval(Point::new(3.0, 0.0)).is_err());
    }

    #[test]
    fn characteristic_from_external_point() {
        let p = Point::new(2.0, 0.0);
        let first = trace_characteristic(p, Branch::First).unwrap();
        let second = trace_characteristic(p, Branch::Second).unwrap();
        let k = 1.0 / 3f64.sqrt();
        assert!((first.slope() + k).abs() < 1e-12);
        assert!((second.slope() - k).abs() < 1e-12);
        assert!((first.origin_distance() - 1.0).abs() < 1e-14);
        assert!((second.origin_distance() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn characteristic_on_circle_is_tangent_line() {
        let p = Point::new(1.0, 0.0);
        for b in [Branch::First, Branch::Second] {
            let c = trace_characteristic(p, b).unwrap();
            assert!(c.slope().is_infinite());
            assert_eq!(c.tangency, p);
        }
        assert!(matches!(
            trace_characteristic(Point::new(0.0, 0.0), Branch::First),
            Err(Error::NoRealCharacteristic { .. })
        ));
    }

    #[test]
    fn vertical_tangent_is_second_branch() {
        // Through (1, 0.5): the vertical line x = 1 and one other tangent.
        let c = trace_characteristic(Point::new(1.0, 0.5), Branch::Second).unwrap();
        assert!(c.slope().is_infinite());
        assert!((c.tangency.x - 1.0).abs() < 1e-12 && c.tangency.y.abs() < 1e-12);
        let other = trace_characteristic(Point::new(1.0, 0.5), Branch::First).unwrap();
        assert!(other.slope().is_finite());
    }

    #[test]
    fn characteristic_relation_holds_along_line() {
        let c = trace_characteristic(Point::new(-1.3, 2.1), Branch::First).unwrap();
        for q in c.polyline(-3.0, 3.0, 99) {
            assert!(characteristic_form(q, c.direction).abs() < 1e-10);
        }
    }

    #[test]
    fn rk4_tracer_follows_tangent_line() {
        let p = Point::new(1.5, 0.8);
        for b in [Branch::First, Branch::Second] {
            let line = trace_characteristic(p, b).unwrap();
            // Move away from the tangency point so the branch stays simple.
            let away = {
                let t = (line.tangency.x - p.x) * line.direction.x + (line.tangency.y - p.y) * line.direction.y;
                if t > 0.0 {
                    Point::new(-line.direction.x, -line.direction.y)
                } else {
                    line.direction
                }
            };
            let path = integrate_characteristic_rk4(p, away, 0.5, 1e-3);
            for q in path {
                let d = (q.x * line.direction.y - q.y * line.direction.x).abs();
                assert!((d - 1.0).abs() < 1e-9, "{b:?}: {d}");
            }
        }
    }
}
