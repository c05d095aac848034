//! Weighted norms, admissible test functions, the Green-identity defect and
//! numerical checks of the multiplier (energy) estimates.
//!
//! Test functions are closed-form polynomials, so adjoints are applied
//! exactly; only integrals are approximated, by a centroid rule on the
//! clipped dual cells of a masked lattice and a segment-midpoint rule on the
//! boundary polyline.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::domains::{generate_grid, DomainSpec, DomainVariant, GridField, NodeClass};
use crate::error::{Error, Result};
use crate::operators::{adjoint_system, MixedSystem, Point};
use crate::poly::{Poly2, PolyField};

/// Admissibility tolerance for boundary values of test functions.
pub const CERTIFICATE_TOL: f64 = 1e-12;

/// Pointwise weights `|weight1|`, `|weight2|` of a weighted L² norm, or
/// their reciprocals when `inverted`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormWeights {
    pub name: &'static str,
    pub weight1: Poly2,
    pub weight2: Poly2,
    pub inverted: bool,
}

impl NormWeights {
    /// `(|2x² - 1|, |2y² - 1|)`.
    pub fn star() -> Self {
        let two_sq_minus_one = |v: Poly2| &(&v * &v).scale(2.0) - &Poly2::constant(1.0);
        Self {
            name: "star",
            weight1: two_sq_minus_one(Poly2::x()),
            weight2: two_sq_minus_one(Poly2::y()),
            inverted: false,
        }
    }

    /// `(|x|, |y|)`.
    pub fn m_star() -> Self {
        Self {
            name: "m-star",
            weight1: Poly2::x(),
            weight2: Poly2::y(),
            inverted: false,
        }
    }

    pub fn plain() -> Self {
        Self {
            name: "plain",
            weight1: Poly2::constant(1.0),
            weight2: Poly2::constant(1.0),
            inverted: false,
        }
    }

    /// Weights natural to a domain variant.
    pub fn for_variant(v: &DomainVariant) -> Self {
        match v {
            DomainVariant::Omega => Self::star(),
            DomainVariant::OmegaM | DomainVariant::OmegaMFlipped { .. } => Self::m_star(),
            DomainVariant::OmegaO { .. } => Self::plain(),
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            inverted: !self.inverted,
            ..self.clone()
        }
    }

    pub fn eval(&self, p: Point) -> Result<[f64; 2]> {
        let w = [self.weight1.eval(p).abs(), self.weight2.eval(p).abs()];
        if !self.inverted {
            return Ok(w);
        }
        if w[0] == 0.0 || w[1] == 0.0 {
            return Err(Error::DivisionDegeneracy { x: p.x, y: p.y });
        }
        Ok([1.0 / w[0], 1.0 / w[1]])
    }
}

/// Nodes and weights of a cubature rule over a masked domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadrature {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    /// One point per active cell, at the centroid of its clipped part.
    pub fn centroid(grid: &GridField) -> Self {
        let (points, weights) = grid.active().map(|k| (grid.centroid[k], grid.area[k])).unzip();
        Self { points, weights }
    }

    /// Two-by-two Gauss points on uncut cells (exact for bicubics), centroid
    /// rule on cells clipped by the boundary.
    pub fn gauss(grid: &GridField) -> Self {
        let off = 0.5 * grid.h / 3f64.sqrt();
        let quarter = 0.25 * grid.h * grid.h;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for k in grid.active() {
            if grid.class[k] == NodeClass::Interior {
                let c = grid.node(k);
                for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
                    points.push(Point::new(c.x + sx * off, c.y + sy * off));
                    weights.push(quarter);
                }
            } else {
                points.push(grid.centroid[k]);
                weights.push(grid.area[k]);
            }
        }
        Self { points, weights }
    }

    /// One point per active cell, at the lattice node.
    pub fn nodal(grid: &GridField) -> Self {
        let (points, weights) = grid.active().map(|k| (grid.node(k), grid.area[k])).unzip();
        Self { points, weights }
    }

    /// Sum of `weight * f(point)`, accumulated in a fixed order.
    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(*p)).sum()
    }

    pub fn try_integrate(&self, f: impl Fn(Point) -> Result<f64>) -> Result<f64> {
        let mut acc = 0.0;
        for (p, w) in self.points.iter().zip(&self.weights) {
            acc += w * f(*p)?;
        }
        Ok(acc)
    }

    /// Weighted L² norm of a field given pointwise.
    pub fn weighted_norm(&self, f: impl Fn(Point) -> [f64; 2], weights: &NormWeights) -> Result<f64> {
        let sq = self.try_integrate(|p| {
            let [u1, u2] = f(p);
            let [m1, m2] = weights.eval(p)?;
            Ok(m1 * u1 * u1 + m2 * u2 * u2)
        })?;
        Ok(sq.max(0.0).sqrt())
    }

    /// Plain L² inner product of two fields.
    pub fn inner(&self, f: impl Fn(Point) -> [f64; 2], g: impl Fn(Point) -> [f64; 2]) -> f64 {
        self.integrate(|p| {
            let (a, b) = (f(p), g(p));
            a[0] * b[0] + a[1] * b[1]
        })
    }
}

/// Weighted L² norm of a lattice field (nodal values times clipped cell
/// area).
pub fn weighted_norm(field: &GridField, weights: &NormWeights) -> Result<f64> {
    let mut sq = 0.0;
    let mut missing = 0;
    for k in field.active() {
        let [u1, u2] = field.values[k];
        if !u1.is_finite() || !u2.is_finite() {
            missing += 1;
            continue;
        }
        let [m1, m2] = weights.eval(field.node(k))?;
        sq += field.area[k] * (m1 * u1 * u1 + m2 * u2 * u2);
    }
    if missing > 0 {
        return Err(Error::IncompleteField { missing });
    }
    Ok(sq.sqrt())
}

/// Five-point Gauss–Legendre nodes on `[0, 1]` and their weights; exact for
/// polynomials of degree 9 along a segment.
const GAUSS5: [(f64, f64); 5] = [
    (0.046_910_077_030_668, 0.118_463_442_528_094_5),
    (0.230_765_344_947_158_5, 0.239_314_335_249_683_2),
    (0.5, 0.284_444_444_444_444_4),
    (0.769_234_655_052_841_5, 0.239_314_335_249_683_2),
    (0.953_089_922_969_332, 0.118_463_442_528_094_5),
];

fn segment_integral(a: Point, b: Point, f: &impl Fn(Point) -> (f64, f64)) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    GAUSS5
        .iter()
        .map(|&(t, wt)| {
            let (p, q) = f(Point::new(a.x + t * dx, a.y + t * dy));
            wt * (p * dx + q * dy)
        })
        .sum()
}

/// Line integral `∫_C P dx + Q dy` along the polyline of `d`, with
/// `f(p) = (P, Q)`. Gauss–Legendre per segment, so polynomial integrands of
/// moderate degree are integrated exactly along the polygon.
pub fn c_line_integral(d: &DomainSpec, f: impl Fn(Point) -> (f64, f64)) -> f64 {
    d.c_segments().map(|(a, b)| segment_integral(a, b, &f)).sum()
}

/// Line integral over `Γ` in the boundary orientation, on `n` equal pieces.
pub fn gamma_line_integral(d: &DomainSpec, n: usize, f: impl Fn(Point) -> (f64, f64)) -> f64 {
    let mut nodes = d.gamma_nodes(n);
    // The boundary runs down Γ when it lies on x = -1.
    if d.gamma.x < 0.0 {
        nodes.reverse();
    }
    nodes.windows(2).map(|s| segment_integral(s[0], s[1], &f)).sum()
}

/// Boundary values recorded when a test function was accepted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Certificate {
    /// `max |w1|` over the nodes of `C`.
    pub max_w1_on_c: f64,
    /// `max |w2|` over sample nodes of `Γ`.
    pub max_w2_on_gamma: f64,
}

impl Certificate {
    pub fn holds(&self) -> bool {
        self.max_w1_on_c <= CERTIFICATE_TOL && self.max_w2_on_gamma <= CERTIFICATE_TOL
    }
}

/// A closed-form admissible test function `w` with `w1 = 0` on `C` and
/// `w2 = 0` on `Γ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestFunction {
    pub w: PolyField,
    pub certificate: Certificate,
}

impl TestFunction {
    /// Checks the boundary conditions of `w` on `d` and wraps it.
    pub fn certify(d: &DomainSpec, w: PolyField) -> Result<Self> {
        if w.is_zero() {
            return Err(Error::ZeroFunction("test function is identically zero".into()));
        }
        let certificate = Certificate {
            max_w1_on_c: d.curve.iter().map(|p| w.u1.eval(*p).abs()).fold(0.0, f64::max),
            max_w2_on_gamma: d
                .gamma_nodes(64)
                .iter()
                .map(|p| w.u2.eval(*p).abs())
                .fold(0.0, f64::max),
        };
        if !certificate.holds() {
            return Err(Error::Certificate(format!(
                "max |w1| on C = {:e}, max |w2| on Γ = {:e}",
                certificate.max_w1_on_c, certificate.max_w2_on_gamma
            )));
        }
        Ok(Self { w, certificate })
    }

    /// Wraps `w` with a passing certificate without checking anything.
    /// Only useful to exercise code paths that trust certificates.
    #[doc(hidden)]
    pub fn unchecked(w: PolyField) -> Self {
        Self {
            w,
            certificate: Certificate {
                max_w1_on_c: 0.0,
                max_w2_on_gamma: 0.0,
            },
        }
    }

    fn require_admissible(&self) -> Result<()> {
        if self.certificate.holds() {
            Ok(())
        } else {
            Err(Error::Certificate("test function carries a failing certificate".into()))
        }
    }
}

fn random_quadratic(rng: &mut ChaCha8Rng) -> Poly2 {
    Poly2::from_terms(
        [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
            .into_iter()
            .map(|(i, j)| (i, j, rng.gen_range(-1.0..=1.0))),
    )
}

/// Draws `n` admissible test functions `(ρ p, (x - x_Γ) q)` with random
/// quadratic `p`, `q`, where `ρ` is the level function of `C`.
pub fn make_test_functions(d: &DomainSpec, n: usize, seed: u64) -> Result<Vec<TestFunction>> {
    let rho = d
        .level_set
        .as_ref()
        .ok_or_else(|| Error::Generator("domain has no level function for C".into()))?;
    // ρ must not vanish throughout the domain.
    let probe = crate::polygon::area_centroid(&d.curve).1;
    let spread = d
        .curve
        .iter()
        .map(|p| Point::new(0.5 * (p.x + probe.x), 0.5 * (p.y + probe.y)))
        .chain(std::iter::once(probe))
        .map(|p| rho.eval(p).abs())
        .fold(0.0, f64::max);
    if spread <= CERTIFICATE_TOL {
        return Err(Error::Generator("level function vanishes inside the domain".into()));
    }
    let shift = &Poly2::x() - &Poly2::constant(d.gamma.x);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<TestFunction> = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        if attempts > 10 * n + 100 {
            return Err(Error::Generator(format!(
                "only {} of {n} admissible test functions after {attempts} draws",
                out.len()
            )));
        }
        let p = random_quadratic(&mut rng);
        let q = random_quadratic(&mut rng);
        let w = PolyField::new(rho * &p, &shift * &q);
        if w.is_zero() || out.iter().any(|t| t.w == w) {
            continue;
        }
        match TestFunction::certify(d, w) {
            Ok(t) => out.push(t),
            Err(Error::Certificate(_)) | Err(Error::ZeroFunction(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// `|(L*w, u) + (w, Lu) + ∫_C (1 - y²) w2 (u1 dx + u2 dy)|` on the lattice
/// of spacing `h`.
pub fn green_identity_defect(s: &MixedSystem, w: &TestFunction, u: &PolyField, d: &DomainSpec, h: f64) -> Result<f64> {
    let q = Quadrature::gauss(&generate_grid(d, h)?);
    green_identity_defect_on(s, w, u, d, &q)
}

/// As [`green_identity_defect`], with a prebuilt quadrature.
pub fn green_identity_defect_on(
    s: &MixedSystem,
    w: &TestFunction,
    u: &PolyField,
    d: &DomainSpec,
    q: &Quadrature,
) -> Result<f64> {
    w.require_admissible()?;
    let (interior, boundary) = green_terms(s, &w.w, u, d, q)?;
    Ok((interior + boundary).abs())
}

/// Interior part `(L*w, u) + (w, Lu)` and the `C` term of the Green
/// identity.
pub fn green_terms(
    s: &MixedSystem,
    w: &PolyField,
    u: &PolyField,
    d: &DomainSpec,
    q: &Quadrature,
) -> Result<(f64, f64)> {
    let lw = adjoint_system(s).apply_poly(w)?;
    let lu = s.apply_poly(u)?;
    let interior = q.inner(|p| lw.eval(p), |p| u.eval(p)) + q.inner(|p| w.eval(p), |p| lu.eval(p));
    let boundary = c_line_integral(d, |p| {
        let f = (1.0 - p.y * p.y) * w.u2.eval(p);
        let [u1, u2] = u.eval(p);
        (f * u1, f * u2)
    });
    Ok((interior, boundary))
}

/// Full boundary flux `∮ (w^T A u) dy - (w^T B u) dx` over `C`, including
/// the `w1` contributions that vanish for admissible `w`.
pub fn c_flux(s: &MixedSystem, w: &PolyField, u: &PolyField, d: &DomainSpec) -> f64 {
    c_line_integral(d, |p| {
        let (fa, fb) = s.boundary_flux(w.eval(p), u.eval(p), p);
        (-fb, fa)
    })
}

/// Quadratic form and divergence terms of the multiplier identity
/// `(Sw)·(a w) = α w1² + 2β w1 w2 + γ w2² + div(w^T P w, w^T R w)`,
/// with `P = aA/2`, `R = aB/2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MultiplierForm {
    pub a: Poly2,
    pub alpha: Poly2,
    pub beta: Poly2,
    pub gamma: Poly2,
    pub flux_x: [[Poly2; 2]; 2],
    pub flux_y: [[Poly2; 2]; 2],
}

impl MultiplierForm {
    pub fn quadratic(&self, p: Point, w: [f64; 2]) -> f64 {
        self.alpha.eval(p) * w[0] * w[0] + 2.0 * self.beta.eval(p) * w[0] * w[1] + self.gamma.eval(p) * w[1] * w[1]
    }

    /// `αγ - β²`.
    pub fn discriminant(&self) -> Poly2 {
        &(&self.alpha * &self.gamma) - &(&self.beta * &self.beta)
    }

    /// Smaller eigenvalue of `[[α, β], [β, γ]]` at `p`.
    pub fn min_eigenvalue(&self, p: Point) -> f64 {
        let (a, b, c) = (self.alpha.eval(p), self.beta.eval(p), self.gamma.eval(p));
        0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt()
    }

    /// Pair `(w^T P w, w^T R w)` whose divergence completes the identity.
    pub fn flux(&self, p: Point, w: [f64; 2]) -> (f64, f64) {
        let quad = |m: &[[Poly2; 2]; 2]| {
            let mut acc = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    acc += w[i] * m[i][j].eval(p) * w[j];
                }
            }
            acc
        };
        (quad(&self.flux_x), quad(&self.flux_y))
    }
}

/// Multiplier form of the pairing `(Sw, a w)` for a system with symmetric
/// principal part.
pub fn multiplier_form(s: &MixedSystem, a: &Poly2) -> Result<MultiplierForm> {
    let pa = s.poly_block(&s.a)?;
    let pb = s.poly_block(&s.b)?;
    let pz = s.poly_block(&s.z)?;
    if pa[0][1] != pa[1][0] || pb[0][1] != pb[1][0] {
        return Err(Error::PrincipalPart(format!(
            "multiplier identity needs symmetric principal part; `{}` is not symmetric",
            s.label
        )));
    }
    let half = |m: &[[Poly2; 2]; 2]| -> [[Poly2; 2]; 2] {
        let f = |q: &Poly2| (a * q).scale(0.5);
        [[f(&m[0][0]), f(&m[0][1])], [f(&m[1][0]), f(&m[1][1])]]
    };
    let flux_x = half(&pa);
    let flux_y = half(&pb);
    // M = (aA)_x / 2 + (aB)_y / 2
    let m = |i: usize, j: usize| &flux_x[i][j].dx() + &flux_y[i][j].dy();
    let alpha = &(a * &pz[0][0]) - &m(0, 0);
    let beta = &(a * &(&pz[0][1] + &pz[1][0])).scale(0.5) - &m(0, 1);
    let gamma = &(a * &pz[1][1]) - &m(1, 1);
    Ok(MultiplierForm {
        a: a.clone(),
        alpha,
        beta,
        gamma,
        flux_x,
        flux_y,
    })
}

/// `‖L*w‖^* / ‖w‖_*` on the lattice of spacing `h`.
pub fn estimate_ratio(s: &MixedSystem, d: &DomainSpec, w: &TestFunction, weights: &NormWeights, h: f64) -> Result<f64> {
    let q = Quadrature::centroid(&generate_grid(d, h)?);
    estimate_ratio_on(&adjoint_system(s), w, weights, &q)
}

/// Ratio for a prebuilt adjoint and quadrature.
pub fn estimate_ratio_on(
    adjoint: &MixedSystem,
    w: &TestFunction,
    weights: &NormWeights,
    q: &Quadrature,
) -> Result<f64> {
    w.require_admissible()?;
    let lw = adjoint.apply_poly(&w.w)?;
    let den = q.weighted_norm(|p| w.w.eval(p), weights)?;
    if den == 0.0 {
        return Err(Error::ZeroFunction("‖w‖ vanishes on the grid".into()));
    }
    let num = q.weighted_norm(|p| lw.eval(p), &weights.inverse())?;
    Ok(num / den)
}

/// Maximizer and maximum of `√((c - λ) λ)` over `0 < λ < c`.
pub fn optimal_constant(c: f64) -> Result<(f64, f64)> {
    if !(c > 0.0) {
        return Err(Error::NonPositiveBound(c));
    }
    Ok((0.5 * c, 0.5 * c))
}

/// `ε (1 - √(1 - δ)) / (2 √(2 - δ))`.
pub fn homogeneous_bound_coefficient(delta: f64, epsilon: f64) -> f64 {
    epsilon * (1.0 - (1.0 - delta).sqrt()) / (2.0 * (2.0 - delta).sqrt())
}

/// `((L₀w, xy w), coefficient · ‖w‖₂²)` on the lattice of spacing `h`.
pub fn homogeneous_bound_check(d: &DomainSpec, w: &TestFunction, h: f64) -> Result<(f64, f64)> {
    let q = Quadrature::centroid(&generate_grid(d, h)?);
    homogeneous_bound_check_on(d, w, &q)
}

pub fn homogeneous_bound_check_on(d: &DomainSpec, w: &TestFunction, q: &Quadrature) -> Result<(f64, f64)> {
    let DomainVariant::OmegaO { delta, epsilon } = d.variant else {
        return Err(Error::WrongVariant {
            expected: "omega_o",
            got: d.variant.name().to_string(),
        });
    };
    w.require_admissible()?;
    let l0w = MixedSystem::homogeneous().apply_poly(&w.w)?;
    let lhs = q.integrate(|p| {
        let [a1, a2] = l0w.eval(p);
        let [w1, w2] = w.w.eval(p);
        p.x * p.y * (a1 * w1 + a2 * w2)
    });
    let l2 = q.inner(|p| w.w.eval(p), |p| w.w.eval(p));
    Ok((lhs, homogeneous_bound_coefficient(delta, epsilon) * l2))
}

/// `(|(w, g)|, ‖w‖_*, ‖g‖^*)` on the lattice of spacing `h`.
pub fn pairing_bound_check(
    w: &TestFunction,
    g: impl Fn(Point) -> [f64; 2],
    d: &DomainSpec,
    weights: &NormWeights,
    h: f64,
) -> Result<(f64, f64, f64)> {
    let q = Quadrature::centroid(&generate_grid(d, h)?);
    pairing_bound_check_on(w, g, weights, &q)
}

pub fn pairing_bound_check_on(
    w: &TestFunction,
    g: impl Fn(Point) -> [f64; 2],
    weights: &NormWeights,
    q: &Quadrature,
) -> Result<(f64, f64, f64)> {
    let pairing = q.inner(|p| w.w.eval(p), &g).abs();
    let wn = q.weighted_norm(|p| w.w.eval(p), weights)?;
    let gn = q.weighted_norm(&g, &weights.inverse())?;
    Ok((pairing, wn, gn))
}

/// Result of the energy-estimate ratio experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioReport {
    pub system: String,
    pub domain: String,
    pub weights: String,
    pub h: f64,
    pub seed: u64,
    pub samples: usize,
    pub quadrature_points: usize,
    pub predicted_constant: Option<f64>,
    pub target: Option<f64>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub passed: Option<bool>,
    pub ratios: Vec<f64>,
}

/// Constant predicted by the multiplier argument for a domain variant.
pub fn predicted_constant(v: &DomainVariant) -> Option<f64> {
    match v {
        DomainVariant::Omega => optimal_constant(FRAC_1_SQRT_2).ok().map(|c| c.1),
        DomainVariant::OmegaM | DomainVariant::OmegaMFlipped { .. } => optimal_constant(2.0).ok().map(|c| c.1),
        DomainVariant::OmegaO { .. } => None,
    }
}

/// Runs the ratio experiment with the variant's natural weights.
pub fn verify_estimate(s: &MixedSystem, d: &DomainSpec, samples: usize, seed: u64, h: f64) -> Result<RatioReport> {
    let weights = NormWeights::for_variant(&d.variant);
    let q = Quadrature::centroid(&generate_grid(d, h)?);
    let adjoint = adjoint_system(s);
    let tests = make_test_functions(d, samples, seed)?;
    let ratios = tests
        .par_iter()
        .map(|w| estimate_ratio_on(&adjoint, w, &weights, &q))
        .collect::<Result<Vec<f64>>>()?;
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let predicted = predicted_constant(&d.variant);
    let target = predicted.map(|k| 0.95 * k);
    Ok(RatioReport {
        system: s.label.to_string(),
        domain: d.variant.name().to_string(),
        weights: weights.name.to_string(),
        h,
        seed,
        samples,
        quadrature_points: q.points.len(),
        predicted_constant: predicted,
        target,
        min_ratio,
        max_ratio,
        passed: target.map(|t| min_ratio >= t),
        ratios,
    })
}

/// Result of the Green-identity refinement experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GreenReport {
    pub system: String,
    pub h_coarse: f64,
    pub h_fine: f64,
    pub seed: u64,
    pub pairs: usize,
    pub defects_coarse: Vec<f64>,
    pub defects_fine: Vec<f64>,
    /// `log2(coarse / fine)` per pair.
    pub orders: Vec<f64>,
    /// Fine defect relative to `|(w, Lu)|`, per pair.
    pub relative_fine: Vec<f64>,
    pub min_order: f64,
    pub max_relative_fine: f64,
}

/// Random smooth polynomial field of degree at most two.
pub fn random_field(rng: &mut ChaCha8Rng) -> PolyField {
    PolyField::new(random_quadratic(rng), random_quadratic(rng))
}

/// Compares the Green-identity defect at `h` and `h/2` on `pairs` random
/// `(w, u)`.
pub fn verify_green(s: &MixedSystem, d: &DomainSpec, pairs: usize, seed: u64, h: f64) -> Result<GreenReport> {
    let coarse = Quadrature::gauss(&generate_grid(d, h)?);
    let fine = Quadrature::gauss(&generate_grid(d, 0.5 * h)?);
    let tests = make_test_functions(d, pairs, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let fields: Vec<PolyField> = (0..pairs).map(|_| random_field(&mut rng)).collect();
    let rows = tests
        .par_iter()
        .zip(fields.par_iter())
        .map(|(w, u)| {
            let dc = green_identity_defect_on(s, w, u, d, &coarse)?;
            let df = green_identity_defect_on(s, w, u, d, &fine)?;
            let lu = s.apply_poly(u)?;
            let scale = fine.inner(|p| w.w.eval(p), |p| lu.eval(p)).abs();
            Ok((dc, df, scale))
        })
        .collect::<Result<Vec<_>>>()?;
    let defects_coarse: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let defects_fine: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let orders: Vec<f64> = rows.iter().map(|r| (r.0 / r.1).log2()).collect();
    let relative_fine: Vec<f64> = rows.iter().map(|r| r.1 / r.2).collect();
    Ok(GreenReport {
        system: s.label.to_string(),
        h_coarse: h,
        h_fine: 0.5 * h,
        seed,
        pairs,
        min_order: orders.iter().copied().fold(f64::INFINITY, f64::min),
        max_relative_fine: relative_fine.iter().copied().fold(0.0, f64::max),
        defects_coarse,
        defects_fine,
        orders,
        relative_fine,
    })
}

/// Result of the homogeneous-system bound experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HomogeneousReport {
    pub delta: f64,
    pub epsilon: f64,
    pub coefficient: f64,
    pub h: f64,
    pub seed: u64,
    pub samples: usize,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Smallest `lhs / rhs`.
    pub min_ratio: f64,
}

pub fn verify_homogeneous(d: &DomainSpec, samples: usize, seed: u64, h: f64) -> Result<HomogeneousReport> {
    let DomainVariant::OmegaO { delta, epsilon } = d.variant else {
        return Err(Error::WrongVariant {
            expected: "omega_o",
            got: d.variant.name().to_string(),
        });
    };
    let q = Quadrature::centroid(&generate_grid(d, h)?);
    let tests = make_test_functions(d, samples, seed)?;
    let pairs = tests
        .par_iter()
        .map(|w| homogeneous_bound_check_on(d, w, &q))
        .collect::<Result<Vec<_>>>()?;
    let (lhs, rhs): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let min_ratio = lhs.iter().zip(&rhs).map(|(l, r)| l / r).fold(f64::INFINITY, f64::min);
    Ok(HomogeneousReport {
        delta,
        epsilon,
        coefficient: homogeneous_bound_coefficient(delta, epsilon),
        h,
        seed,
        samples,
        lhs,
        rhs,
        min_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{mask_polygon, presets};
    use crate::operators::MixedSystem;

    fn poly(terms: &[(usize, usize, f64)]) -> Poly2 {
        Poly2::from_terms(terms.iter().copied())
    }

    #[test]
    fn star_norm_on_box() {
        let square = [
            Point::new(0.8, 0.0),
            Point::new(0.9, 0.0),
            Point::new(0.9, 0.1),
            Point::new(0.8, 0.1),
        ];
        // ∫∫ (2x² - 1) over the box.
        let exact = ((2.0 * 0.9f64.powi(3) / 3.0 - 0.9) - (2.0 * 0.8f64.powi(3) / 3.0 - 0.8)) * 0.1;
        assert!((exact - 0.0044667).abs() < 1e-7);
        let mut prev = f64::INFINITY;
        for h in [1.0 / 200.0, 1.0 / 400.0, 1.0 / 800.0] {
            let g = mask_polygon(&square, h, None).with_values(|_| [1.0, 0.0]);
            let n = weighted_norm(&g, &NormWeights::star()).unwrap();
            let err = (n - exact.sqrt()).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-5, "{prev}");
    }

    #[test]
    fn trivial_norms() {
        let d = presets::omega(128);
        let g = generate_grid(&d, 1.0 / 64.0).unwrap();
        assert_eq!(
            weighted_norm(&g.with_values(|_| [0.0, 0.0]), &NormWeights::star()).unwrap(),
            0.0
        );
        let n = weighted_norm(&g.with_values(|_| [1.0, 1.0]), &NormWeights::plain()).unwrap();
        assert!((n - (2.0 * d.area).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn inverted_weight_rejects_zero() {
        let sq = [
            Point::new(-0.1, -0.1),
            Point::new(0.1, -0.1),
            Point::new(0.1, 0.1),
            Point::new(-0.1, 0.1),
        ];
        let g = mask_polygon(&sq, 0.05, None).with_values(|_| [1.0, 1.0]);
        let err = weighted_norm(&g, &NormWeights::m_star().inverse()).unwrap_err();
        assert!(matches!(err, Error::DivisionDegeneracy { .. }));
    }

    #[test]
    fn generated_test_functions() {
        let d = presets::omega(256);
        let ws = make_test_functions(&d, 100, 7).unwrap();
        assert_eq!(ws.len(), 100);
        let q = Quadrature::centroid(&generate_grid(&d, 1.0 / 32.0).unwrap());
        let adj = adjoint_system(&MixedSystem::hodge());
        for (i, t) in ws.iter().enumerate() {
            assert!(t.certificate.holds());
            assert!(d.curve.iter().all(|p| t.w.u1.eval(*p).abs() <= 1e-12));
            assert!(d.gamma_nodes(100).iter().all(|p| t.w.u2.eval(*p).abs() <= 1e-12));
            assert!(ws[..i].iter().all(|o| o.w != t.w));
            let lw = adj.apply_poly(&t.w).unwrap();
            let n = q.weighted_norm(|p| lw.eval(p), &NormWeights::star().inverse()).unwrap();
            assert!(n.is_finite() && n > 0.0);
        }
        // Same seed, same functions.
        assert_eq!(make_test_functions(&d, 100, 7).unwrap(), ws);
    }

    #[test]
    fn zero_function_is_excluded() {
        let d = presets::omega(128);
        assert!(matches!(
            TestFunction::certify(&d, PolyField::zero()),
            Err(Error::ZeroFunction(_))
        ));
        assert!(matches!(
            TestFunction::certify(&d, PolyField::new(Poly2::constant(1.0), Poly2::zero())),
            Err(Error::Certificate(_))
        ));
    }

    #[test]
    fn green_defect_zero_w() {
        let d = presets::omega(256);
        let w = TestFunction::unchecked(PolyField::zero());
        let u = PolyField::new(poly(&[(1, 1, 1.0)]), poly(&[(0, 0, 2.0)]));
        let r = green_identity_defect(&MixedSystem::hodge(), &w, &u, &d, 1.0 / 32.0).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn green_defect_detects_forged_certificate() {
        let d = presets::omega(2048);
        let s = MixedSystem::hodge();
        // w1 = 1 does not vanish on C.
        let w = PolyField::new(Poly2::constant(1.0), &Poly2::x() - &Poly2::constant(1.0));
        assert!(TestFunction::certify(&d, w.clone()).is_err());
        let forged = TestFunction::unchecked(w.clone());
        let u = PolyField::new(poly(&[(0, 1, 1.0), (0, 0, 0.5)]), poly(&[(1, 0, 1.0)]));
        let h = 1.0 / 128.0;
        let defect = green_identity_defect(&s, &forged, &u, &d, h).unwrap();
        // The identity misses the part of the C flux carried by w1.
        let only_w1 = PolyField::new(w.u1.clone(), Poly2::zero());
        let omitted = c_flux(&s, &only_w1, &u, &d).abs();
        assert!(omitted > 1e-2);
        assert!((defect - omitted).abs() < 1e-3 * omitted, "{defect} vs {omitted}");
    }

    #[test]
    fn multiplier_closed_forms() {
        let (x, y) = (Poly2::x(), Poly2::y());
        let one = Poly2::constant(1.0);
        let omy2 = &one - &(&y * &y);

        let f = multiplier_form(&adjoint_system(&MixedSystem::hodge()), &(&x * &x)).unwrap();
        assert_eq!(f.alpha, &x * &(&(&x * &x).scale(3.0) - &one));
        assert_eq!(f.gamma, &x * &omy2);
        assert_eq!(f.beta.scale(2.0), (&(&x * &x) * &y).scale(2.0));
        let target = &(&x * &x) * &(&(&(&y * &y) * &(&one - &(&x * &x).scale(4.0))) + &(&(&x * &x).scale(3.0) - &one));
        assert!(f.discriminant().approx_eq(&target, 1e-14));
        let v = f.discriminant().eval(Point::new(0.9, 0.5));
        assert!((v - 0.7047).abs() < 5e-5, "{v}");

        let f = multiplier_form(&adjoint_system(&MixedSystem::symmetric()), &one).unwrap();
        assert_eq!(f.alpha, x.scale(2.0));
        assert_eq!(f.gamma, y.scale(-2.0));
        assert!(f.beta.is_zero());

        let f = multiplier_form(&MixedSystem::homogeneous(), &(&x * &y)).unwrap();
        assert!(f
            .alpha
            .approx_eq(&(&y * &(&(&x * &x).scale(3.0) - &one)).scale(0.5), 1e-15));
        assert!(f.gamma.approx_eq(&(&y * &omy2).scale(0.5), 1e-15));
        assert!(f.beta.scale(2.0).approx_eq(&(&omy2 * &x).scale(-1.0), 1e-15));
    }

    #[test]
    fn multiplier_identity_is_pointwise_exact() {
        // (Sw)·(aw) = Q(w) + div(flux), checked as a polynomial identity.
        let s = adjoint_system(&MixedSystem::hodge());
        let a = &Poly2::x() * &Poly2::x();
        let f = multiplier_form(&s, &a).unwrap();
        let w = PolyField::new(
            poly(&[(0, 0, 0.3), (1, 1, -0.7), (0, 2, 1.1)]),
            poly(&[(1, 0, 0.4), (2, 1, 0.9)]),
        );
        let sw = s.apply_poly(&w).unwrap();
        let lhs = &a * &(&(&sw.u1 * &w.u1) + &(&sw.u2 * &w.u2));
        let quad = |m: &[[Poly2; 2]; 2]| {
            let c = [&w.u1, &w.u2];
            let mut acc = Poly2::zero();
            for i in 0..2 {
                for j in 0..2 {
                    acc = acc + &(c[i] * &m[i][j]) * c[j];
                }
            }
            acc
        };
        let q = &(&(&f.alpha * &(&w.u1 * &w.u1)) + &(&f.beta * &(&w.u1 * &w.u2)).scale(2.0))
            + &(&f.gamma * &(&w.u2 * &w.u2));
        let rhs = &(&q + &quad(&f.flux_x).dx()) + &quad(&f.flux_y).dy();
        assert!(lhs.approx_eq(&rhs, 1e-12));
    }

    #[test]
    fn lavrentiev_multiplier_is_rejected() {
        assert!(multiplier_form(&MixedSystem::lavrentiev(), &Poly2::constant(1.0)).is_err());
    }

    #[test]
    fn optimal_constants() {
        let (l, k) = optimal_constant(FRAC_1_SQRT_2).unwrap();
        assert!((l - 0.353553).abs() < 1e-6 && (k - 0.353553).abs() < 1e-6);
        // Grid search oracle on √((c - λ)λ).
        for c in [FRAC_1_SQRT_2, 2.0] {
            let (best_l, best_k) = (1..100_000)
                .map(|i| {
                    let l = c * i as f64 / 100_000.0;
                    (l, ((c - l) * l).sqrt())
                })
                .fold((0.0, 0.0), |acc, v| if v.1 > acc.1 { v } else { acc });
            let (l, k) = optimal_constant(c).unwrap();
            assert!((l - best_l).abs() < 1e-4 && (k - best_k).abs() < 1e-8);
        }
        assert_eq!(optimal_constant(2.0).unwrap(), (1.0, 1.0));
        assert!(matches!(optimal_constant(0.0), Err(Error::NonPositiveBound(_))));
    }

    #[test]
    fn ratio_rejects_zero() {
        let d = presets::omega(128);
        let w = TestFunction::unchecked(PolyField::zero());
        let err = estimate_ratio(&MixedSystem::hodge(), &d, &w, &NormWeights::star(), 1.0 / 32.0).unwrap_err();
        assert!(matches!(err, Error::ZeroFunction(_)));
    }

    #[test]
    fn homogeneous_coefficient_and_trivial_case() {
        assert!((homogeneous_bound_coefficient(0.1, 0.1) - 1.8615e-3).abs() < 1e-7);
        let d = presets::omega_o(0.1, 0.1, 128).unwrap();
        let w = TestFunction::unchecked(PolyField::zero());
        assert_eq!(homogeneous_bound_check(&d, &w, 1.0 / 64.0).unwrap(), (0.0, 0.0));
        let wrong = presets::omega(128);
        assert!(matches!(
            homogeneous_bound_check(&wrong, &w, 1.0 / 64.0),
            Err(Error::WrongVariant { .. })
        ));
    }

    #[test]
    fn pairing_trivial_and_equality() {
        let d = presets::omega(128);
        let w = make_test_functions(&d, 1, 3).unwrap().remove(0);
        let star = NormWeights::star();
        let (p, wn, gn) = pairing_bound_check(&w, |_| [0.0, 0.0], &d, &star, 1.0 / 64.0).unwrap();
        assert_eq!((p, gn), (0.0, 0.0));
        assert!(wn > 0.0);
        let g = |pt: Point| {
            let m = star.eval(pt).unwrap();
            let v = w.w.eval(pt);
            [2.5 * m[0] * v[0], 2.5 * m[1] * v[1]]
        };
        let (p, wn, gn) = pairing_bound_check(&w, g, &d, &star, 1.0 / 64.0).unwrap();
        assert!((p - wn * gn).abs() <= 1e-6 * p);
    }

    #[test]
    fn gamma_reduction_and_c_sign() {
        let d = presets::omega(512);
        for t in make_test_functions(&d, 20, 11).unwrap() {
            let gamma = gamma_line_integral(&d, 256, |p| {
                let w2 = t.w.u2.eval(p);
                (0.0, 0.5 * p.x * p.x * (1.0 - p.y * p.y) * w2 * w2)
            });
            assert!(gamma.abs() <= 1e-12);
            let c = -c_line_integral(&d, |p| {
                let w2 = t.w.u2.eval(p);
                (0.0, 0.5 * p.x * p.x * (1.0 - p.y * p.y) * w2 * w2)
            });
            assert!(c >= 0.0);
        }
    }
}
