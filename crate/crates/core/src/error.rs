use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the simulation engine.
///
/// Each variant belongs to one subsystem; [`Error::category`] names it so
/// front ends can prefix messages and choose an exit status.
#[derive(Debug, Error)]
pub enum Error {
    #[error("wavelength {wavelength_um:.4} um outside the valid window [{min_um}, {max_um}] um of the {model} index model")]
    WavelengthOutOfRange {
        model: String,
        wavelength_um: f64,
        min_um: f64,
        max_um: f64,
    },

    #[error("invalid Sellmeier data at line {line}: {reason}")]
    SellmeierParse { line: usize, reason: String },

    #[error(
        "no collinear phase matching between {lambda_p_nm:.1} nm and {lambda_s_nm:.1} nm in (0, 90) deg"
    )]
    NoCollinearPhaseMatching { lambda_p_nm: f64, lambda_s_nm: f64 },

    #[error("paraxial approximation violated: |q|/k = {ratio:.3} exceeds {limit}")]
    Paraxial { ratio: f64, limit: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("momentum grid truncates the amplitude: boundary |A|^2 is {ratio:.2e} of peak (limit {limit:.1e}); increase the extent")]
    SupportTruncated { ratio: f64, limit: f64 },

    #[error("transform needs an estimated {needed} bytes, above the {budget} byte budget")]
    ResourceLimit { needed: u64, budget: u64 },

    #[error("basis mismatch: expected {expected}, found {found}")]
    Basis {
        expected: &'static str,
        found: &'static str,
    },

    #[error("conditioning slice holds {fraction:.2e} of the total probability")]
    DegenerateConditioning { fraction: f64 },

    #[error("distribution is not normalized (total = {total})")]
    NotNormalized { total: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error(
        "region of interest ({roi_um:.1} um) is smaller than the distribution support ({support_um:.1} um)"
    )]
    RoiTooSmall { roi_um: f64, support_um: f64 },

    #[error("accumulator overflow in {0}")]
    Overflow(&'static str),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Name of the subsystem that raised the error.
    pub fn category(&self) -> &'static str {
        use Error::*;
        match self {
            WavelengthOutOfRange { .. }
            | SellmeierParse { .. }
            | NoCollinearPhaseMatching { .. }
            | Paraxial { .. } => "dispersion",
            Config(_) => "config",
            SupportTruncated { .. }
            | ResourceLimit { .. }
            | Basis { .. }
            | DegenerateConditioning { .. }
            | Shape(_) => "fields",
            NotNormalized { .. } => "entanglement",
            RoiTooSmall { .. } | Overflow(_) => "coincidence",
            Format(_) | Io(_) | Json(_) => "io",
        }
    }
}
