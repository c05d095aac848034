use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every error names the invariant it violates as `<module>.<invariant>`,
/// so command-line failures can be traced to the owning module.
#[derive(Debug, Error)]
pub enum Error {
    #[error("operators.label: unknown system label `{label}` (supported: {supported})")]
    UnknownLabel { label: String, supported: String },

    #[error("operators.degenerate_coefficient: characteristic form degenerates at ({x}, {y})")]
    DegenerateCoefficient { x: f64, y: f64 },

    #[error("operators.polynomial_coefficients: system `{0}` has piecewise coefficients")]
    NotPolynomial(String),

    #[error("operators.principal_part: {0}")]
    PrincipalPart(String),

    #[error("geometry.singular_locus: {kind} metric is singular at ({x}, {y})")]
    SingularMetric { kind: String, x: f64, y: f64 },

    #[error("geometry.adiabatic_range: adiabatic constant must be >= 1, got {0}")]
    AdiabaticConstant(f64),

    #[error("geometry.real_characteristic: no real characteristic through ({x}, {y}) inside the unit disc")]
    NoRealCharacteristic { x: f64, y: f64 },

    #[error("domains.{invariant}: {detail}")]
    Domain { invariant: &'static str, detail: String },

    #[error("domains.resolution: spacing {h} must satisfy 0 < h < {limit}")]
    Resolution { h: f64, limit: f64 },

    #[error("domains.complete_field: {missing} boundary node(s) carry no value")]
    IncompleteField { missing: usize },

    #[error("analysis.positive_weight: inverted weight vanishes at ({x}, {y})")]
    DivisionDegeneracy { x: f64, y: f64 },

    #[error("analysis.nonzero_function: {0}")]
    ZeroFunction(String),

    #[error("analysis.admissibility: {0}")]
    Certificate(String),

    #[error("analysis.generator: {0}")]
    Generator(String),

    #[error("analysis.domain_variant: expected {expected}, got {got}")]
    WrongVariant { expected: &'static str, got: String },

    #[error("analysis.positive_bound: upper bound must be positive, got {0}")]
    NonPositiveBound(f64),

    #[error("solver.rank: {0}")]
    RankDeficient(String),

    #[error("solver.forcing: {0}")]
    Forcing(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("io.json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io.parse: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn domain(invariant: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            invariant,
            detail: detail.into(),
        }
    }

    /// True for rejections of user input (bad label, invalid domain, ...);
    /// false for I/O and internal failures.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::RankDeficient(_))
    }
}
