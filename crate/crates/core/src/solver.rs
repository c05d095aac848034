//! Weighted least-squares approximation of weak solutions of `Lu = g` with
//! the tangential condition `u1 dx + u2 dy = 0` on `C` and no condition on
//! `Γ`.
//!
//! Unknowns are the two components at every active lattice node. Each node
//! contributes two difference equations for `Lu - g`, scaled by the square
//! root of its cell area and of the dual (inverted) norm weights, and each
//! `C`-boundary node one penalty row for the tangential component.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{make_test_functions, NormWeights, Quadrature};
use crate::domains::{boundary_tangent_residual, generate_grid, DomainSpec, GridField, NodeClass};
use crate::error::{Error, Result};
use crate::operators::{adjoint_system, MixedSystem, Point};
use crate::poly::{Poly2, PolyField};
use crate::sparse::{cgls, CsrMatrix};

/// Right-hand side of the system.
#[derive(Clone, Debug, PartialEq)]
pub enum Forcing {
    Zero,
    /// Closed-form field, evaluated at the nodes.
    Poly(PolyField),
    /// Nodal values on the solver lattice.
    Grid(GridField),
}

impl Forcing {
    fn at(&self, grid: &GridField, k: usize) -> [f64; 2] {
        match self {
            Forcing::Zero => [0.0, 0.0],
            Forcing::Poly(f) => f.eval(grid.node(k)),
            Forcing::Grid(g) => g.values[k],
        }
    }

    fn check(&self, grid: &GridField) -> Result<()> {
        if let Forcing::Grid(g) = self {
            if (g.nx, g.ny, g.h, g.x_origin, g.y_origin) != (grid.nx, grid.ny, grid.h, grid.x_origin, grid.y_origin) {
                return Err(Error::Forcing("forcing lattice differs from the solver lattice".into()));
            }
            let missing = grid
                .active()
                .filter(|&k| !g.values[k].iter().all(|v| v.is_finite()))
                .count();
            if missing > 0 {
                return Err(Error::Forcing(format!(
                    "{missing} active node(s) have no forcing value"
                )));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Self {
        match self {
            Forcing::Zero => Forcing::Zero,
            Forcing::Poly(f) => Forcing::Poly(f.scale(c)),
            Forcing::Grid(g) => {
                let mut g = g.clone();
                for v in g.values.iter_mut() {
                    *v = [c * v[0], c * v[1]];
                }
                Forcing::Grid(g)
            }
        }
    }
}

/// The assembled least-squares problem on one lattice.
#[derive(Clone, Debug)]
pub struct DiscreteSystem {
    pub grid: GridField,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Unknown index of each lattice node (`None` for exterior nodes); the
    /// node's components are columns `2 i` and `2 i + 1`.
    pub unknown: Vec<Option<usize>>,
    /// Number of PDE rows; the boundary rows follow them.
    pub pde_rows: usize,
    /// Row scale `sqrt(area / weight)` of each PDE row.
    pub row_scale: Vec<f64>,
}

/// One-sided or central difference weights along an axis.
fn stencil(grid: &GridField, k: usize, di: isize, dj: isize) -> Vec<(usize, f64)> {
    let h = grid.h;
    match (grid.neighbor(k, di, dj), grid.neighbor(k, -di, -dj)) {
        (Some(p), Some(m)) => vec![(p, 0.5 / h), (m, -0.5 / h)],
        (Some(p), None) => vec![(p, 1.0 / h), (k, -1.0 / h)],
        (None, Some(m)) => vec![(k, 1.0 / h), (m, -1.0 / h)],
        (None, None) => Vec::new(),
    }
}

impl DiscreteSystem {
    pub fn assemble(s: &MixedSystem, d: &DomainSpec, g: &Forcing, h: f64) -> Result<Self> {
        let grid = generate_grid(d, h)?;
        Self::assemble_on(s, d, g, grid)
    }

    pub fn assemble_on(s: &MixedSystem, d: &DomainSpec, g: &Forcing, grid: GridField) -> Result<Self> {
        g.check(&grid)?;
        let weights = NormWeights::for_variant(&d.variant).inverse();
        let mut unknown = vec![None; grid.len()];
        let active: Vec<usize> = grid.active().collect();
        for (i, &k) in active.iter().enumerate() {
            unknown[k] = Some(i);
        }
        let n = active.len();

        // Two PDE rows per active node.
        let blocks = active
            .par_iter()
            .map(|&k| {
                let p = grid.node(k);
                let [w1, w2] = weights.eval(p)?;
                let scale = [(grid.area[k] * w1).sqrt(), (grid.area[k] * w2).sqrt()];
                let (a, b, z) = (s.eval_a(p), s.eval_b(p), s.eval_z(p));
                let sx = stencil(&grid, k, 1, 0);
                let sy = stencil(&grid, k, 0, 1);
                let f = g.at(&grid, k);
                let mut entries = Vec::with_capacity(2 * (2 * (sx.len() + sy.len()) + 2));
                let mut rhs = [0.0; 2];
                for comp in 0..2 {
                    for j in 0..2 {
                        for &(m, c) in &sx {
                            entries.push((comp, 2 * unknown[m].unwrap() + j, scale[comp] * a[comp][j] * c));
                        }
                        for &(m, c) in &sy {
                            entries.push((comp, 2 * unknown[m].unwrap() + j, scale[comp] * b[comp][j] * c));
                        }
                        entries.push((comp, 2 * unknown[k].unwrap() + j, scale[comp] * z[comp][j]));
                    }
                    rhs[comp] = scale[comp] * f[comp];
                }
                Ok((entries, rhs, scale))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut triplets = Vec::new();
        let mut rhs = Vec::with_capacity(2 * n);
        let mut row_scale = Vec::with_capacity(2 * n);
        for (i, (entries, r, sc)) in blocks.into_iter().enumerate() {
            for (comp, col, v) in entries {
                if v != 0.0 {
                    triplets.push((2 * i + comp, col, v));
                }
            }
            rhs.extend_from_slice(&r);
            row_scale.extend_from_slice(&sc);
        }
        let pde_rows = 2 * n;

        // Penalty rows: weight 1/h times the boundary length element h.
        let mut row = pde_rows;
        for &k in &active {
            if grid.class[k] != NodeClass::CBoundary {
                continue;
            }
            let t = grid.tangent[k].expect("boundary nodes carry tangents");
            let i = unknown[k].unwrap();
            triplets.push((row, 2 * i, t.x));
            triplets.push((row, 2 * i + 1, t.y));
            rhs.push(0.0);
            row += 1;
        }
        let matrix = CsrMatrix::from_triplets(row, 2 * n, &triplets);
        Ok(Self {
            grid,
            matrix,
            rhs,
            unknown,
            pde_rows,
            row_scale,
        })
    }

    /// Lattice field holding the unknown vector `x`.
    pub fn field(&self, x: &[f64]) -> GridField {
        let mut out = self.grid.with_values(|_| [f64::NAN; 2]);
        for (k, u) in self.unknown.iter().enumerate() {
            if let Some(i) = u {
                out.values[k] = [x[2 * i], x[2 * i + 1]];
            }
        }
        out
    }

    /// Unknown vector of a lattice field.
    pub fn vector(&self, f: &GridField) -> Vec<f64> {
        let mut x = vec![0.0; self.matrix.cols];
        for (k, u) in self.unknown.iter().enumerate() {
            if let Some(i) = u {
                x[2 * i] = f.values[k][0];
                x[2 * i + 1] = f.values[k][1];
            }
        }
        x
    }

    /// Residual norms `(pde, boundary)` of a field, and the largest
    /// unweighted pointwise PDE residual.
    pub fn residuals(&self, f: &GridField) -> (f64, f64, f64) {
        let x = self.vector(f);
        let ax = self.matrix.mul(&x);
        let r: Vec<f64> = ax.iter().zip(&self.rhs).map(|(a, b)| a - b).collect();
        let pde = r[..self.pde_rows].iter().map(|v| v * v).sum::<f64>().sqrt();
        let bc = r[self.pde_rows..].iter().map(|v| v * v).sum::<f64>().sqrt();
        let pointwise = r[..self.pde_rows]
            .iter()
            .zip(&self.row_scale)
            .map(|(v, s)| if *s > 0.0 { (v / s).abs() } else { 0.0 })
            .fold(0.0, f64::max);
        (pde, bc, pointwise)
    }
}

/// Diagnostics of a solve, recomputed from the returned field.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub system: String,
    pub domain: String,
    pub h: f64,
    pub unknowns: usize,
    pub rows: usize,
    pub iterations: usize,
    pub converged: bool,
    pub tol: f64,
    /// `‖A^T r‖ / ‖A^T b‖` at exit.
    pub relative_normal_residual: f64,
    /// Weighted PDE residual `(Σ area · |Lu - g|²/weight)^{1/2}`.
    pub weighted_residual: f64,
    /// Euclidean norm of the penalty rows.
    pub boundary_penalty_residual: f64,
    /// Largest tangential component on `C` nodes.
    pub boundary_residual: f64,
    /// Largest unweighted pointwise residual of the difference equations.
    pub max_pointwise_residual: f64,
    /// True when `‖b - A x‖` never increased across iterations.
    pub objective_monotone: bool,
    /// Normalized weak-form defects on sample test functions.
    pub weak_defects: Vec<f64>,
}

/// Options beyond the basic signature of [`solve_bvp`].
#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Initial iterate on the solver lattice; zero when absent.
    pub initial: Option<GridField>,
    /// Number of weak-form defect samples to report (0 to skip).
    pub defect_samples: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
            initial: None,
            defect_samples: 8,
            seed: 0,
        }
    }
}

/// Least-squares solve with default options apart from `tol`, `max_iter`.
pub fn solve_bvp(
    s: &MixedSystem,
    d: &DomainSpec,
    g: &Forcing,
    h: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(GridField, SolveReport)> {
    solve_bvp_with(
        s,
        d,
        g,
        h,
        &SolveOptions {
            tol,
            max_iter,
            ..SolveOptions::default()
        },
    )
}

pub fn solve_bvp_with(
    s: &MixedSystem,
    d: &DomainSpec,
    g: &Forcing,
    h: f64,
    opts: &SolveOptions,
) -> Result<(GridField, SolveReport)> {
    let sys = DiscreteSystem::assemble(s, d, g, h)?;
    let x0 = opts.initial.as_ref().map(|f| sys.vector(f));
    let res = cgls(&sys.matrix, &sys.rhs, x0.as_deref(), opts.tol, opts.max_iter)?;
    let field = sys.field(&res.x);

    let (pde, bc, pointwise) = sys.residuals(&field);
    let boundary_residual = boundary_tangent_residual(&field)?;
    let objective_monotone = res
        .residual_history
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-300);
    let weak_defects = if opts.defect_samples > 0 && d.level_set.is_some() {
        weak_defect_suite(s, &field, g, d, opts.defect_samples, opts.seed)?
    } else {
        Vec::new()
    };
    let report = SolveReport {
        system: s.label.to_string(),
        domain: d.variant.name().to_string(),
        h,
        unknowns: sys.matrix.cols,
        rows: sys.matrix.rows,
        iterations: res.iterations,
        converged: res.converged,
        tol: opts.tol,
        relative_normal_residual: res.relative_normal_residual,
        weighted_residual: pde,
        boundary_penalty_residual: bc,
        boundary_residual,
        max_pointwise_residual: pointwise,
        objective_monotone,
        weak_defects,
    };
    Ok((field, report))
}

/// `|(L*w, u_h) + (w, g)| / ‖L*w‖^*` for `n` generated test functions,
/// with nodal quadrature on the lattice of `u_h`.
pub fn weak_defect_suite(
    s: &MixedSystem,
    u_h: &GridField,
    g: &Forcing,
    d: &DomainSpec,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    g.check(u_h)?;
    let adjoint = adjoint_system(s);
    let dual = NormWeights::for_variant(&d.variant).inverse();
    let q = Quadrature::nodal(u_h);
    let nodes: Vec<usize> = u_h.active().collect();
    let tests = make_test_functions(d, n, seed)?;
    tests
        .par_iter()
        .map(|w| {
            let lw = adjoint.apply_poly(&w.w)?;
            let mut acc = 0.0;
            for &k in &nodes {
                let p = u_h.node(k);
                let [a1, a2] = lw.eval(p);
                let [w1, w2] = w.w.eval(p);
                let [u1, u2] = u_h.values[k];
                let [g1, g2] = g.at(u_h, k);
                acc += u_h.area[k] * (a1 * u1 + a2 * u2 + w1 * g1 + w2 * g2);
            }
            let scale = q.weighted_norm(|p| lw.eval(p), &dual)?;
            Ok(acc.abs() / scale)
        })
        .collect()
}

/// Closed-form field `σ ∇ρ + ρ v` whose tangential component vanishes on
/// the level curve `ρ = 0`, scaled to unit plain L² norm on the domain.
pub fn manufactured_solution(d: &DomainSpec) -> Result<PolyField> {
    let rho = d
        .level_set
        .as_ref()
        .ok_or_else(|| Error::Forcing("manufactured solution needs a level function for C".into()))?;
    let (x, y) = (Poly2::x(), Poly2::y());
    let sigma = &Poly2::constant(1.0) + &(&x * &y);
    let v = [&Poly2::constant(1.0) - &y, x.clone()];
    let u = PolyField::new(
        &(&sigma * &rho.dx()) + &(rho * &v[0]),
        &(&sigma * &rho.dy()) + &(rho * &v[1]),
    );
    let grid = generate_grid(d, d.diameter() / 64.0)?;
    let q = Quadrature::centroid(&grid);
    let n = q.inner(|p| u.eval(p), |p| u.eval(p)).sqrt();
    if n == 0.0 {
        return Err(Error::Forcing("manufactured field vanishes on the domain".into()));
    }
    Ok(u.scale(1.0 / n))
}

/// Plain L² distance between a lattice field and a closed-form field, and
/// the plain L² norm of the latter (nodal quadrature).
pub fn l2_error(u_h: &GridField, exact: impl Fn(Point) -> [f64; 2]) -> (f64, f64) {
    let (mut err, mut nrm) = (0.0, 0.0);
    for k in u_h.active() {
        let e = exact(u_h.node(k));
        let v = u_h.values[k];
        err += u_h.area[k] * ((v[0] - e[0]).powi(2) + (v[1] - e[1]).powi(2));
        nrm += u_h.area[k] * (e[0] * e[0] + e[1] * e[1]);
    }
    (err.sqrt(), nrm.sqrt())
}

/// Discrete white noise of intensity `amplitude`: independent Gaussian
/// values with variance `amplitude² / area` per active cell, so that
/// `Σ area · ξ · φ` has variance `amplitude² Σ area · φ²` like the
/// continuum pairing `(ξ, φ)`.
pub fn white_noise(grid: &GridField, amplitude: f64, seed: u64) -> GridField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = grid.with_values(|_| [f64::NAN; 2]);
    for k in grid.active() {
        let sd = amplitude / grid.area[k].sqrt();
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        out.values[k] = [sd * a, sd * b];
    }
    out
}

/// Pointwise sum of two fields on the same lattice.
pub fn add_fields(a: &GridField, b: &GridField) -> GridField {
    let mut out = a.clone();
    for k in a.active() {
        out.values[k] = [a.values[k][0] + b.values[k][0], a.values[k][1] + b.values[k][1]];
    }
    out
}

/// Plain L² distance between two fields on the same lattice.
pub fn l2_distance(a: &GridField, b: &GridField) -> f64 {
    a.active()
        .map(|k| {
            let (u, v) = (a.values[k], b.values[k]);
            a.area[k] * ((u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2))
        })
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::presets;

    #[test]
    fn zero_forcing_gives_zero() {
        let d = presets::omega(256);
        let (u, rep) = solve_bvp(&MixedSystem::hodge(), &d, &Forcing::Zero, 1.0 / 32.0, 1e-10, 1000).unwrap();
        assert!(u.active().all(|k| u.values[k] == [0.0, 0.0]));
        assert_eq!(rep.iterations, 0);
        assert_eq!(rep.weighted_residual, 0.0);
        assert!(rep.weak_defects.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn every_node_has_two_pde_rows() {
        let d = presets::omega(256);
        let sys = DiscreteSystem::assemble(&MixedSystem::hodge(), &d, &Forcing::Zero, 1.0 / 32.0).unwrap();
        let nodes = sys.grid.active().count();
        assert_eq!(sys.pde_rows, 2 * nodes);
        assert!(sys.matrix.rows >= sys.matrix.cols);
        assert_eq!(sys.matrix.rows - sys.pde_rows, sys.grid.counts().c_boundary);
    }

    #[test]
    fn manufactured_field_is_normal_on_c() {
        let d = presets::omega(256);
        let u = manufactured_solution(&d).unwrap();
        let q = d.level_set.as_ref().unwrap();
        for p in &d.curve {
            let [u1, u2] = u.eval(*p);
            let (gx, gy) = (q.dx().eval(*p), q.dy().eval(*p));
            // Tangent (-gy, gx) of the level curve.
            assert!((-gy * u1 + gx * u2).abs() < 1e-10);
        }
    }

    #[test]
    fn forcing_lattice_mismatch() {
        let d = presets::omega(256);
        let other = generate_grid(&d, 1.0 / 16.0).unwrap().with_values(|_| [0.0, 0.0]);
        let err = solve_bvp(&MixedSystem::hodge(), &d, &Forcing::Grid(other), 1.0 / 32.0, 1e-8, 10).unwrap_err();
        assert!(matches!(err, Error::Forcing(_)));
    }
}
