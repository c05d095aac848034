use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mhodge::analysis::{verify_estimate, verify_green, verify_homogeneous};
use mhodge::domains::{generate_grid, presets, read_domain_json, DomainSpec, TypeMap};
use mhodge::geometry::{trace_characteristic, write_polylines_csv, Branch};
use mhodge::operators::{make_system, MixedSystem, TypeClass};
use mhodge::solver::{l2_error, manufactured_solution, solve_bvp_with, Forcing, SolveOptions, SolveReport};
use mhodge::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{CharacteristicsArgs, ClassifyArgs, Command, HomogeneousArgs, SampleArgs, SolveArgs, ValidateArgs};
use crate::CliError;

/// Polyline segments used for builtin domains.
const BUILTIN_SEGMENTS: usize = 4096;

/// Runs a command and returns its one-line summary.
pub fn run(cmd: &Command) -> Result<String, CliError> {
    match cmd {
        Command::Classify(a) => classify(a),
        Command::Characteristics(a) => characteristics(a),
        Command::VerifyEstimate(a) => estimate(a),
        Command::VerifyGreen(a) => green(a),
        Command::VerifyHomogeneous(a) => homogeneous(a),
        Command::Solve(a) => solve(a),
        Command::ValidateDomain(a) => validate(a),
    }
}

fn system(label: &str) -> Result<MixedSystem, CliError> {
    match label {
        "hodge-sign-flipped" => Ok(MixedSystem::hodge_sign_flipped()),
        other => Ok(make_system(other)?),
    }
}

fn check_h(h: f64) -> Result<(), CliError> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(CliError::invalid(
            "positive_h",
            format!("grid spacing must be positive, got {h}"),
        ))
    }
}

fn check_samples(n: usize) -> Result<(), CliError> {
    if n >= 1 {
        Ok(())
    } else {
        Err(CliError::invalid("sample_count", "sample count must be at least 1"))
    }
}

fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::invalid("file_exists", format!("{}: {e}", path.display())))
}

/// Loads a domain file or a `builtin:` preset.
fn domain(source: &str) -> Result<DomainSpec, CliError> {
    if let Some(name) = source.strip_prefix("builtin:") {
        return match name {
            "omega" => Ok(presets::omega(BUILTIN_SEGMENTS)),
            "omega_m" => Ok(presets::omega_m(BUILTIN_SEGMENTS)),
            "omega_o" => Ok(presets::omega_o(0.1, 0.1, BUILTIN_SEGMENTS)?),
            other => Err(CliError::invalid(
                "builtin_domain",
                format!("unknown builtin domain `{other}` (supported: omega, omega_m, omega_o)"),
            )),
        };
    }
    Ok(read_domain_json(&read_input(Path::new(source))?)?)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes a report as pretty JSON to `out`, or to stdout.
fn emit_json<T: Serialize>(report: &T, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report).map_err(mhodge::Error::from)?;
    match out {
        Some(path) => {
            let mut f = create(path)?;
            writeln!(f, "{text}")?;
            f.flush()?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn classify(a: &ClassifyArgs) -> Result<String, CliError> {
    check_h(a.h)?;
    let bbox: [f64; 4] = a
        .bbox
        .as_slice()
        .try_into()
        .map_err(|_| CliError::invalid("bbox", "expected four numbers x0 x1 y0 y1"))?;
    let s = system(&a.system)?;
    let map = TypeMap::compute(&s, bbox, a.h)?;
    let mut f = create(&a.out)?;
    if a.out.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")) {
        map.write_pgm(&mut f)?;
    } else {
        map.write_csv(&mut f)?;
    }
    f.flush()?;
    let degenerate = map.classes.iter().filter(|c| c.is_none()).count();
    Ok(format!(
        "classify: {} nodes ({}x{}), elliptic {:.4}, hyperbolic {:.4}, degenerate {} -> {}",
        map.classes.len(),
        map.nx,
        map.ny,
        map.fraction(TypeClass::Elliptic),
        map.fraction(TypeClass::Hyperbolic),
        degenerate,
        a.out.display()
    ))
}

fn characteristics(a: &CharacteristicsArgs) -> Result<String, CliError> {
    check_samples(a.samples)?;
    if !(a.length > 0.0 && a.length.is_finite()) {
        return Err(CliError::invalid(
            "positive_length",
            format!("line length must be positive, got {}", a.length),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut curves = Vec::with_capacity(2 * a.samples);
    let mut worst: f64 = 0.0;
    for k in 0..a.samples {
        let r = rng.gen_range(1.05..2.5);
        let t = rng.gen_range(0.0..std::f64::consts::TAU);
        let p = Point::new(r * t.cos(), r * t.sin());
        for (tag, branch) in [("a", Branch::First), ("b", Branch::Second)] {
            let c = trace_characteristic(p, branch)?;
            worst = worst.max((c.origin_distance() - 1.0).abs());
            curves.push((format!("{k}{tag}"), c.polyline(-a.length, a.length, 64)));
        }
    }
    let mut f = create(&a.out)?;
    write_polylines_csv(&mut f, &curves)?;
    f.flush()?;
    Ok(format!(
        "characteristics: {} lines, max |distance(origin, line) - 1| = {worst:.3e} -> {}",
        curves.len(),
        a.out.display()
    ))
}

fn estimate(a: &SampleArgs) -> Result<String, CliError> {
    check_h(a.h)?;
    check_samples(a.samples)?;
    let s = system(&a.system)?;
    let d = domain(&a.domain)?;
    let r = verify_estimate(&s, &d, a.samples, a.seed, a.h)?;
    emit_json(&r, a.out.as_deref())?;
    let verdict = match (r.target, r.passed) {
        (Some(t), Some(p)) => format!(" (target {t:.4}: {})", if p { "pass" } else { "FAIL" }),
        _ => String::new(),
    };
    Ok(format!(
        "verify-estimate: {} on {}, {} samples, min ratio {:.4}{verdict}",
        r.system, r.domain, r.samples, r.min_ratio
    ))
}

fn green(a: &SampleArgs) -> Result<String, CliError> {
    check_h(a.h)?;
    check_samples(a.samples)?;
    let s = system(&a.system)?;
    let d = domain(&a.domain)?;
    let r = verify_green(&s, &d, a.samples, a.seed, a.h)?;
    emit_json(&r, a.out.as_deref())?;
    Ok(format!(
        "verify-green: {} pairs, min order {:.3}, max relative defect at h/2 {:.3e}",
        r.pairs, r.min_order, r.max_relative_fine
    ))
}

fn homogeneous(a: &HomogeneousArgs) -> Result<String, CliError> {
    check_h(a.h)?;
    check_samples(a.samples)?;
    let d = domain(&a.domain)?;
    let r = verify_homogeneous(&d, a.samples, a.seed, a.h)?;
    emit_json(&r, a.out.as_deref())?;
    Ok(format!(
        "verify-homogeneous: {} samples, coefficient {:.5e}, min lhs/rhs {:.3}",
        r.samples, r.coefficient, r.min_ratio
    ))
}

#[derive(Serialize)]
struct SolveOutput {
    #[serde(flatten)]
    report: SolveReport,
    forcing: String,
    /// Plain L² error relative to the exact field, for manufactured runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    relative_l2_error: Option<f64>,
}

fn solve(a: &SolveArgs) -> Result<String, CliError> {
    check_h(a.h)?;
    if a.tol.is_nan() || a.tol <= 0.0 {
        return Err(CliError::invalid(
            "positive_tol",
            format!("tolerance must be positive, got {}", a.tol),
        ));
    }
    let s = system(&a.system)?;
    let d = domain(&a.domain)?;
    let mut exact = None;
    let g = match a.g.as_str() {
        "zero" => Forcing::Zero,
        "manufactured" => {
            let u = manufactured_solution(&d)?;
            let g = Forcing::Poly(s.apply_poly(&u)?);
            exact = Some(u);
            g
        }
        path => {
            let grid = generate_grid(&d, a.h)?;
            Forcing::Grid(grid.read_values_csv(&read_input(Path::new(path))?)?)
        }
    };
    let opts = SolveOptions {
        tol: a.tol,
        max_iter: a.max_iter,
        seed: a.seed,
        ..SolveOptions::default()
    };
    let (u, report) = solve_bvp_with(&s, &d, &g, a.h, &opts)?;
    let relative_l2_error = exact.map(|ex| {
        let (e, n) = l2_error(&u, |p| ex.eval(p));
        e / n
    });

    let mut f = create(&a.out)?;
    u.write_csv(&mut f)?;
    f.flush()?;
    let report_path: PathBuf = a.report.clone().unwrap_or_else(|| a.out.with_extension("json"));
    let out = SolveOutput {
        report,
        forcing: a.g.clone(),
        relative_l2_error,
    };
    emit_json(&out, Some(&report_path))?;

    let err = relative_l2_error
        .map(|e| format!(", relative L2 error {e:.3e}"))
        .unwrap_or_default();
    Ok(format!(
        "solve: {} unknowns, {} iterations ({}), boundary residual {:.2e}{err} -> {}",
        out.report.unknowns,
        out.report.iterations,
        if out.report.converged {
            "converged"
        } else {
            "not converged"
        },
        out.report.boundary_residual,
        a.out.display()
    ))
}

fn validate(a: &ValidateArgs) -> Result<String, CliError> {
    let d = domain(&a.domain)?;
    if let Some(path) = &a.out {
        let mut f = create(path)?;
        d.write_json(&mut f)?;
        writeln!(f)?;
        f.flush()?;
    }
    Ok(format!(
        "validate-domain: {} ok, {} segments on C, area {:.6}, diameter {:.6}, weight margin {:.4}",
        d.variant.name(),
        d.curve.len() - 1,
        d.area,
        d.diameter(),
        d.weight_margin
    ))
}
