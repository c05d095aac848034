//! First-order planar systems `A u_x + B u_y + Z u` and their adjoints.
//!
//! The adjoint follows the sign convention in which
//! `(L* w, u) = -(w, L u) - boundary term`, i.e. `L*` is the negative of the
//! textbook formal adjoint:
//!
//! ```text
//! L* w = A^T w_x + B^T w_y + (A_x^T + B_y^T - Z^T) w
//! ```
//!
//! All members of the Hodge family (`hodge`, `symmetric`, `homogeneous` and
//! their adjoints) share the principal part
//!
//! ```text
//! A = [[1 - x^2, 0], [0, -(1 - y^2)]],   B = [[-2xy, 1 - y^2], [1 - y^2, 0]]
//! ```
//!
//! and differ only in the zeroth-order block `Z`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{Poly2, PolyField};

/// Discriminants with magnitude at or below this are treated as zero.
pub const PARABOLIC_TOL: f64 = 1e-12;

/// Leading characteristic coefficients at or below this are degenerate.
pub const DEGENERATE_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A scalar coefficient with closed-form partial derivatives.
#[derive(Clone, Debug, PartialEq)]
pub enum CoefficientField {
    Poly(Poly2),
    /// `scale * sgn(y)`, with value 0 on `y = 0`. Its derivatives are taken
    /// as zero; the distributional part on the interface line is ignored.
    SignY(f64),
}

impl CoefficientField {
    pub fn zero() -> Self {
        CoefficientField::Poly(Poly2::zero())
    }

    pub fn eval(&self, p: Point) -> f64 {
        match self {
            CoefficientField::Poly(q) => q.eval(p),
            CoefficientField::SignY(s) => {
                if p.y > 0.0 {
                    *s
                } else if p.y < 0.0 {
                    -*s
                } else {
                    0.0
                }
            }
        }
    }

    pub fn partial_x(&self) -> Self {
        match self {
            CoefficientField::Poly(q) => CoefficientField::Poly(q.dx()),
            CoefficientField::SignY(_) => Self::zero(),
        }
    }

    pub fn partial_y(&self) -> Self {
        match self {
            CoefficientField::Poly(q) => CoefficientField::Poly(q.dy()),
            CoefficientField::SignY(_) => Self::zero(),
        }
    }

    pub fn as_poly(&self) -> Option<&Poly2> {
        match self {
            CoefficientField::Poly(q) => Some(q),
            CoefficientField::SignY(_) => None,
        }
    }

    fn add(&self, other: &Self) -> Self {
        match (self, other) {
            (CoefficientField::Poly(a), CoefficientField::Poly(b)) => CoefficientField::Poly(a + b),
            (CoefficientField::SignY(s), CoefficientField::Poly(q))
            | (CoefficientField::Poly(q), CoefficientField::SignY(s))
                if q.is_zero() =>
            {
                CoefficientField::SignY(*s)
            }
            (CoefficientField::SignY(a), CoefficientField::SignY(b)) => CoefficientField::SignY(a + b),
            // Mixed sums never arise from the supported constructors.
            _ => unreachable!("sum of piecewise and nonzero polynomial coefficient"),
        }
    }

    fn neg(&self) -> Self {
        match self {
            CoefficientField::Poly(q) => CoefficientField::Poly(-q),
            CoefficientField::SignY(s) => CoefficientField::SignY(-s),
        }
    }
}

impl From<Poly2> for CoefficientField {
    fn from(q: Poly2) -> Self {
        CoefficientField::Poly(q)
    }
}

pub type CoefficientMatrix = [[CoefficientField; 2]; 2];

fn transpose(m: &CoefficientMatrix) -> CoefficientMatrix {
    [[m[0][0].clone(), m[1][0].clone()], [m[0][1].clone(), m[1][1].clone()]]
}

fn eval_matrix(m: &CoefficientMatrix, p: Point) -> [[f64; 2]; 2] {
    [[m[0][0].eval(p), m[0][1].eval(p)], [m[1][0].eval(p), m[1][1].eval(p)]]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemLabel {
    Hodge,
    HodgeAdjoint,
    Symmetric,
    SymmetricAdjoint,
    Homogeneous,
    Lavrentiev,
    Custom,
}

impl SystemLabel {
    pub const SUPPORTED: [&'static str; 6] = [
        "hodge",
        "hodge-adjoint",
        "symmetric",
        "symmetric-adjoint",
        "homogeneous",
        "lavrentiev",
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SystemLabel::Hodge => "hodge",
            SystemLabel::HodgeAdjoint => "hodge-adjoint",
            SystemLabel::Symmetric => "symmetric",
            SystemLabel::SymmetricAdjoint => "symmetric-adjoint",
            SystemLabel::Homogeneous => "homogeneous",
            SystemLabel::Lavrentiev => "lavrentiev",
            SystemLabel::Custom => "custom",
        }
    }
}

impl fmt::Display for SystemLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SystemLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "hodge" => SystemLabel::Hodge,
            "hodge-adjoint" => SystemLabel::HodgeAdjoint,
            "symmetric" => SystemLabel::Symmetric,
            "symmetric-adjoint" => SystemLabel::SymmetricAdjoint,
            "homogeneous" => SystemLabel::Homogeneous,
            "lavrentiev" => SystemLabel::Lavrentiev,
            other => {
                return Err(Error::UnknownLabel {
                    label: other.to_string(),
                    supported: SystemLabel::SUPPORTED.join(", "),
                })
            }
        })
    }
}

/// Values and first derivatives of a two-component field at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VectorFieldSample {
    pub u1: f64,
    pub u2: f64,
    pub du1dx: f64,
    pub du1dy: f64,
    pub du2dx: f64,
    pub du2dy: f64,
}

impl VectorFieldSample {
    pub fn of(field: &PolyField, p: Point) -> Self {
        Self {
            u1: field.u1.eval(p),
            u2: field.u2.eval(p),
            du1dx: field.u1.dx().eval(p),
            du1dy: field.u1.dy().eval(p),
            du2dx: field.u2.dx().eval(p),
            du2dy: field.u2.dy().eval(p),
        }
    }

    pub fn constant(u1: f64, u2: f64) -> Self {
        Self {
            u1,
            u2,
            ..Self::default()
        }
    }

    pub fn lin_comb(a: f64, u: &Self, b: f64, v: &Self) -> Self {
        Self {
            u1: a * u.u1 + b * v.u1,
            u2: a * u.u2 + b * v.u2,
            du1dx: a * u.du1dx + b * v.du1dx,
            du1dy: a * u.du1dy + b * v.du1dy,
            du2dx: a * u.du2dx + b * v.du2dx,
            du2dy: a * u.du2dy + b * v.du2dy,
        }
    }
}

/// Real roots of `|A - lambda B| = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CharRoots {
    None,
    Double(f64),
    /// Ascending order.
    Two(f64, f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootReport {
    /// Discriminant of the (reduced, for the Hodge family) characteristic
    /// quadratic.
    pub discriminant: f64,
    pub roots: CharRoots,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TypeClass {
    Elliptic,
    Parabolic,
    Hyperbolic,
}

impl fmt::Display for TypeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TypeClass::Elliptic => "elliptic",
            TypeClass::Parabolic => "parabolic",
            TypeClass::Hyperbolic => "hyperbolic",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixedSystem {
    pub label: SystemLabel,
    pub a: CoefficientMatrix,
    pub b: CoefficientMatrix,
    pub z: CoefficientMatrix,
    /// Coefficients `(c2, c1, c0)` of the characteristic quadratic after the
    /// common factor `-(1 - y^2)` has been removed. Present for the Hodge
    /// principal part only.
    reduced_characteristic: Option<[Poly2; 3]>,
}

fn one_minus_sq(var: Poly2) -> Poly2 {
    &Poly2::constant(1.0) - &(&var * &var)
}

fn hodge_principal() -> (CoefficientMatrix, CoefficientMatrix) {
    let x = Poly2::x();
    let y = Poly2::y();
    let a = [
        [one_minus_sq(x.clone()).into(), CoefficientField::zero()],
        [CoefficientField::zero(), (-one_minus_sq(y.clone())).into()],
    ];
    let b = [
        [(&x * &y).scale(-2.0).into(), one_minus_sq(y.clone()).into()],
        [one_minus_sq(y).into(), CoefficientField::zero()],
    ];
    (a, b)
}

fn hodge_reduced_characteristic() -> [Poly2; 3] {
    [
        one_minus_sq(Poly2::y()),
        (&Poly2::x() * &Poly2::y()).scale(2.0),
        one_minus_sq(Poly2::x()),
    ]
}

fn lin(cx: f64, cy: f64) -> CoefficientField {
    Poly2::from_terms([(1, 0, cx), (0, 1, cy)]).into()
}

impl MixedSystem {
    fn hodge_family(label: SystemLabel, z: CoefficientMatrix) -> Self {
        let (a, b) = hodge_principal();
        Self {
            label,
            a,
            b,
            z,
            reduced_characteristic: Some(hodge_reduced_characteristic()),
        }
    }

    /// `(Lu)_1 = [(1-x^2)u1]_x - 2xy u1_y + [(1-y^2)u2]_y - 2x u1 - 2y u2`,
    /// `(Lu)_2 = (1-y^2)(u1_y - u2_x)`.
    pub fn hodge() -> Self {
        Self::hodge_family(
            SystemLabel::Hodge,
            [
                [lin(-4.0, 0.0), lin(0.0, -4.0)],
                [CoefficientField::zero(), CoefficientField::zero()],
            ],
        )
    }

    /// The Hodge system with the sign of the explicit `2y u2` term of the
    /// first component switched.
    pub fn hodge_sign_flipped() -> Self {
        Self::hodge_family(
            SystemLabel::Custom,
            [
                [lin(-4.0, 0.0), CoefficientField::zero()],
                [CoefficientField::zero(), CoefficientField::zero()],
            ],
        )
    }

    /// Lower-order terms distributed as `-2x u1` in the first component and
    /// `+2y u2` in the second.
    pub fn symmetric() -> Self {
        Self::hodge_family(
            SystemLabel::Symmetric,
            [
                [lin(-4.0, 0.0), lin(0.0, -2.0)],
                [CoefficientField::zero(), lin(0.0, 2.0)],
            ],
        )
    }

    /// Symmetric system with lower-order signs switched so that its
    /// estimate holds in the quadrant with the given coordinate signs.
    /// `(1, -1)` is the unmodified system.
    pub fn symmetric_for_quadrant(sign_x: i8, sign_y: i8) -> Self {
        let mut s = Self::symmetric();
        if sign_x < 0 {
            s.z[0][0] = CoefficientField::zero();
        }
        if sign_y > 0 {
            s.z[1][1] = lin(0.0, -2.0);
        }
        if (sign_x, sign_y) != (1, -1) {
            s.label = SystemLabel::Custom;
        }
        s
    }

    /// No zeroth-order terms beyond those produced by the divergence form.
    pub fn homogeneous() -> Self {
        Self::hodge_family(
            SystemLabel::Homogeneous,
            [
                [lin(-2.0, 0.0), lin(0.0, -2.0)],
                [CoefficientField::zero(), CoefficientField::zero()],
            ],
        )
    }

    /// `u1_x + sgn(y) u2_y = 0`, `u1_y - u2_x = 0`.
    pub fn lavrentiev() -> Self {
        let c = |v: f64| CoefficientField::Poly(Poly2::constant(v));
        Self {
            label: SystemLabel::Lavrentiev,
            a: [[c(1.0), c(0.0)], [c(0.0), c(-1.0)]],
            b: [[c(0.0), CoefficientField::SignY(1.0)], [c(1.0), c(0.0)]],
            z: [[c(0.0), c(0.0)], [c(0.0), c(0.0)]],
            reduced_characteristic: None,
        }
    }

    /// A system with arbitrary coefficient blocks.
    pub fn custom(a: CoefficientMatrix, b: CoefficientMatrix, z: CoefficientMatrix) -> Self {
        Self {
            label: SystemLabel::Custom,
            a,
            b,
            z,
            reduced_characteristic: None,
        }
    }

    pub fn reduced_characteristic(&self) -> Option<&[Poly2; 3]> {
        self.reduced_characteristic.as_ref()
    }

    /// True when every coefficient is a polynomial.
    pub fn is_polynomial(&self) -> bool {
        [&self.a, &self.b, &self.z]
            .iter()
            .all(|m| m.iter().flatten().all(|c| c.as_poly().is_some()))
    }

    pub fn eval_a(&self, p: Point) -> [[f64; 2]; 2] {
        eval_matrix(&self.a, p)
    }

    pub fn eval_b(&self, p: Point) -> [[f64; 2]; 2] {
        eval_matrix(&self.b, p)
    }

    pub fn eval_z(&self, p: Point) -> [[f64; 2]; 2] {
        eval_matrix(&self.z, p)
    }

    /// Boundary flux pair `(w^T A u, w^T B u)` at `p`; the divergence of this
    /// pair is `(L*w)·u + w·(Lu)`.
    pub fn boundary_flux(&self, w: [f64; 2], u: [f64; 2], p: Point) -> (f64, f64) {
        let a = self.eval_a(p);
        let b = self.eval_b(p);
        let quad =
            |m: [[f64; 2]; 2]| w[0] * (m[0][0] * u[0] + m[0][1] * u[1]) + w[1] * (m[1][0] * u[0] + m[1][1] * u[1]);
        (quad(a), quad(b))
    }

    /// Polynomial entries of a coefficient block, or an error for piecewise
    /// systems.
    pub(crate) fn poly_block(&self, m: &CoefficientMatrix) -> Result<[[Poly2; 2]; 2]> {
        let get = |c: &CoefficientField| {
            c.as_poly()
                .cloned()
                .ok_or_else(|| Error::NotPolynomial(self.label.to_string()))
        };
        Ok([[get(&m[0][0])?, get(&m[0][1])?], [get(&m[1][0])?, get(&m[1][1])?]])
    }

    /// Applies the system to a closed-form field, exactly.
    pub fn apply_poly(&self, u: &PolyField) -> Result<PolyField> {
        let a = self.poly_block(&self.a)?;
        let b = self.poly_block(&self.b)?;
        let z = self.poly_block(&self.z)?;
        let comps = [&u.u1, &u.u2];
        let dx = [u.u1.dx(), u.u2.dx()];
        let dy = [u.u1.dy(), u.u2.dy()];
        let row = |i: usize| {
            let mut acc = Poly2::zero();
            for j in 0..2 {
                acc = acc + &a[i][j] * &dx[j] + &b[i][j] * &dy[j] + &z[i][j] * comps[j];
            }
            acc
        };
        Ok(PolyField::new(row(0), row(1)))
    }
}

/// Builds a system from its lowercase label.
pub fn make_system(label: &str) -> Result<MixedSystem> {
    let label: SystemLabel = label.parse()?;
    Ok(match label {
        SystemLabel::Hodge => MixedSystem::hodge(),
        SystemLabel::HodgeAdjoint => adjoint_system(&MixedSystem::hodge()),
        SystemLabel::Symmetric => MixedSystem::symmetric(),
        SystemLabel::SymmetricAdjoint => adjoint_system(&MixedSystem::symmetric()),
        SystemLabel::Homogeneous => MixedSystem::homogeneous(),
        SystemLabel::Lavrentiev => MixedSystem::lavrentiev(),
        SystemLabel::Custom => unreachable!("custom is not parseable"),
    })
}

/// Evaluates `A u_x + B u_y + Z u` at `p`.
pub fn apply_system(s: &MixedSystem, sample: &VectorFieldSample, p: Point) -> [f64; 2] {
    let a = s.eval_a(p);
    let b = s.eval_b(p);
    let z = s.eval_z(p);
    let ux = [sample.du1dx, sample.du2dx];
    let uy = [sample.du1dy, sample.du2dy];
    let u = [sample.u1, sample.u2];
    let row = |i: usize| {
        (0..2)
            .map(|j| a[i][j] * ux[j] + b[i][j] * uy[j] + z[i][j] * u[j])
            .sum::<f64>()
    };
    [row(0), row(1)]
}

/// Zeroth-order block of the adjoint: `A_x^T + B_y^T - Z^T`.
pub fn adjoint_zeroth_order(s: &MixedSystem) -> CoefficientMatrix {
    let entry = |i: usize, j: usize| s.a[j][i].partial_x().add(&s.b[j][i].partial_y()).add(&s.z[j][i].neg());
    [[entry(0, 0), entry(0, 1)], [entry(1, 0), entry(1, 1)]]
}

pub fn adjoint_system(s: &MixedSystem) -> MixedSystem {
    let label = match s.label {
        SystemLabel::Hodge => SystemLabel::HodgeAdjoint,
        SystemLabel::HodgeAdjoint => SystemLabel::Hodge,
        SystemLabel::Symmetric => SystemLabel::SymmetricAdjoint,
        SystemLabel::SymmetricAdjoint => SystemLabel::Symmetric,
        SystemLabel::Homogeneous => SystemLabel::Homogeneous,
        SystemLabel::Lavrentiev | SystemLabel::Custom => SystemLabel::Custom,
    };
    MixedSystem {
        label,
        a: transpose(&s.a),
        b: transpose(&s.b),
        z: adjoint_zeroth_order(s),
        reduced_characteristic: s.reduced_characteristic.clone(),
    }
}

/// Coefficients `(c2, c1, c0)` of `lambda ↦ |A - lambda B|` at `p`
/// (reduced by the common factor for the Hodge principal part).
fn characteristic_quadratic(s: &MixedSystem, p: Point) -> [f64; 3] {
    if let Some([c2, c1, c0]) = &s.reduced_characteristic {
        return [c2.eval(p), c1.eval(p), c0.eval(p)];
    }
    let a = s.eval_a(p);
    let b = s.eval_b(p);
    [
        b[0][0] * b[1][1] - b[0][1] * b[1][0],
        -(a[0][0] * b[1][1] + a[1][1] * b[0][0] - a[0][1] * b[1][0] - a[1][0] * b[0][1]),
        a[0][0] * a[1][1] - a[0][1] * a[1][0],
    ]
}

pub fn characteristic_roots(s: &MixedSystem, p: Point) -> Result<RootReport> {
    let [c2, c1, c0] = characteristic_quadratic(s, p);
    if c2.abs() <= DEGENERATE_TOL {
        return Err(Error::DegenerateCoefficient { x: p.x, y: p.y });
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    let roots = if disc.abs() <= PARABOLIC_TOL {
        CharRoots::Double(-c1 / (2.0 * c2))
    } else if disc < 0.0 {
        CharRoots::None
    } else {
        let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
        let (r1, r2) = if q == 0.0 {
            let r = (disc.sqrt() / (2.0 * c2)).abs();
            (-r, r)
        } else {
            (q / c2, c0 / q)
        };
        CharRoots::Two(r1.min(r2), r1.max(r2))
    };
    Ok(RootReport {
        discriminant: disc,
        roots,
    })
}

pub fn classify_type(s: &MixedSystem, p: Point) -> Result<TypeClass> {
    Ok(match characteristic_roots(s, p)?.roots {
        CharRoots::None => TypeClass::Elliptic,
        CharRoots::Double(_) => TypeClass::Parabolic,
        CharRoots::Two(..) => TypeClass::Hyperbolic,
    })
}

/// `u1_y - u2_x`; zero exactly when the sampled 1-form is closed.
pub fn curl_residual(sample: &VectorFieldSample) -> f64 {
    sample.du1dy - sample.du2dx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_mat(m: [[f64; 2]; 2], expect: [[f64; 2]; 2]) {
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (m[i][j] - expect[i][j]).abs() < 1e-14,
                    "entry ({i},{j}): {} vs {}",
                    m[i][j],
                    expect[i][j]
                );
            }
        }
    }

    #[test]
    fn hodge_principal_part_at_origin() {
        let s = make_system("hodge").unwrap();
        let o = Point::new(0.0, 0.0);
        assert_mat(s.eval_a(o), [[1.0, 0.0], [0.0, -1.0]]);
        assert_mat(s.eval_b(o), [[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn hodge_zeroth_order_expansion() {
        let s = MixedSystem::hodge();
        assert_mat(s.eval_z(Point::new(0.5, 0.25)), [[-2.0, -1.0], [0.0, 0.0]]);
    }

    #[test]
    fn homogeneous_second_row_vanishes() {
        let s = MixedSystem::homogeneous();
        for p in [Point::new(0.3, -2.0), Point::new(5.0, 1.5)] {
            let z = s.eval_z(p);
            assert_eq!(z[1], [0.0, 0.0]);
        }
    }

    #[test]
    fn unknown_label_lists_supported() {
        let err = make_system("tricomi").unwrap_err().to_string();
        assert!(err.contains("tricomi"));
        for l in SystemLabel::SUPPORTED {
            assert!(err.contains(l), "{err}");
        }
    }

    #[test]
    fn apply_examples() {
        let hodge = MixedSystem::hodge();
        let zero = VectorFieldSample::default();
        assert_eq!(apply_system(&hodge, &zero, Point::new(0.7, -0.2)), [0.0, 0.0]);
        let out = apply_system(&hodge, &VectorFieldSample::constant(1.0, 0.0), Point::new(0.5, 0.0));
        assert_eq!(out, [-2.0, 0.0]);
        let adj = make_system("hodge-adjoint").unwrap();
        let out = apply_system(&adj, &VectorFieldSample::constant(1.0, 0.0), Point::new(0.0, 0.5));
        assert!((out[0]).abs() < 1e-15 && (out[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn adjoint_examples() {
        let p = Point::new(0.37, -0.81);
        let adj = adjoint_system(&MixedSystem::hodge());
        assert_eq!(adj.label, SystemLabel::HodgeAdjoint);
        assert_mat(adj.eval_z(p), [[0.0, -2.0 * p.y], [2.0 * p.y, 0.0]]);

        let sym = adjoint_system(&MixedSystem::symmetric());
        assert_mat(sym.eval_z(p), [[0.0, -2.0 * p.y], [0.0, -2.0 * p.y]]);

        let h = MixedSystem::homogeneous();
        let h_adj = adjoint_system(&h);
        assert_eq!(h_adj.a, h.a);
        assert_eq!(h_adj.b, h.b);
        assert_eq!(h_adj.z, h.z);
    }

    #[test]
    fn root_examples() {
        let s = MixedSystem::hodge();
        match characteristic_roots(&s, Point::new(2f64.sqrt(), 0.0)).unwrap().roots {
            CharRoots::Two(a, b) => {
                assert!((a + 1.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            characteristic_roots(&s, Point::new(1.0, 0.0)).unwrap().roots,
            CharRoots::Double(0.0)
        );
        assert_eq!(
            characteristic_roots(&s, Point::new(0.0, 0.0)).unwrap().roots,
            CharRoots::None
        );
        assert!(matches!(
            characteristic_roots(&s, Point::new(0.3, 1.0)),
            Err(Error::DegenerateCoefficient { .. })
        ));
    }

    #[test]
    fn classify_examples() {
        let s = MixedSystem::hodge();
        assert_eq!(classify_type(&s, Point::new(0.0, 0.0)).unwrap(), TypeClass::Elliptic);
        assert_eq!(classify_type(&s, Point::new(2.0, 0.0)).unwrap(), TypeClass::Hyperbolic);
        assert_eq!(classify_type(&s, Point::new(0.6, 0.8)).unwrap(), TypeClass::Parabolic);
    }

    #[test]
    fn lavrentiev_changes_type_across_axis() {
        let s = make_system("lavrentiev").unwrap();
        assert_eq!(classify_type(&s, Point::new(0.2, 1.0)).unwrap(), TypeClass::Elliptic);
        assert_eq!(classify_type(&s, Point::new(0.2, -1.0)).unwrap(), TypeClass::Hyperbolic);
        assert!(classify_type(&s, Point::new(0.2, 0.0)).is_err());
        assert!(!s.is_polynomial());
        assert!(s.apply_poly(&PolyField::zero()).is_err());
    }

    #[test]
    fn curl_examples() {
        // u = (y, x), u = (y, -x), u = 0
        let exact = VectorFieldSample {
            u1: 0.3,
            u2: 0.2,
            du1dy: 1.0,
            du2dx: 1.0,
            ..Default::default()
        };
        assert_eq!(curl_residual(&exact), 0.0);
        let rot = VectorFieldSample {
            du1dy: 1.0,
            du2dx: -1.0,
            ..Default::default()
        };
        assert_eq!(curl_residual(&rot), 2.0);
        assert_eq!(curl_residual(&VectorFieldSample::default()), 0.0);
    }

    #[test]
    fn reduced_characteristic_divides_full_determinant() {
        // |A - lambda B| = -(1 - y^2) * reduced(lambda), as polynomials.
        let s = MixedSystem::hodge();
        let a = s.poly_block(&s.a).unwrap();
        let b = s.poly_block(&s.b).unwrap();
        let full = [
            &b[0][0] * &b[1][1] - &b[0][1] * &b[1][0],
            -(&a[0][0] * &b[1][1] + &a[1][1] * &b[0][0] - &a[0][1] * &b[1][0] - &a[1][0] * &b[0][1]),
            &a[0][0] * &a[1][1] - &a[0][1] * &a[1][0],
        ];
        let factor = -one_minus_sq(Poly2::y());
        let reduced = s.reduced_characteristic().unwrap();
        for k in 0..3 {
            assert!((&factor * &reduced[k]).approx_eq(&full[k], 0.0), "coefficient {k}");
        }
    }
}
