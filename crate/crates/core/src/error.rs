use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("contract violated: {what}{}", lambda_suffix(*.lambda_min))]
    Contract { what: String, lambda_min: Option<f64> },

    #[error("support violation: leaked mass {leaked:.3e} outside the support of the reference state")]
    Support { leaked: f64 },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("{routine} failed to converge after {iterations} iterations")]
    NoConvergence { routine: &'static str, iterations: usize },

    #[error("no spectral gap above the ground band: separation {gap:.3e} does not exceed tolerance {tol:.3e}")]
    Gapless { gap: f64, tol: f64 },

    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),

    #[error("no AGSP degree up to {max_degree} meets the ceiling {ceiling:.3e} (best D^2*Delta = {best:.3e} at degree {best_degree})")]
    Ceiling { ceiling: f64, best: f64, best_degree: usize, max_degree: usize },

    #[error("distance budget exceeded: {distance:.6} > {budget:.6} ({chain})")]
    Budget { distance: f64, budget: f64, chain: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn lambda_suffix(l: Option<f64>) -> String {
    match l {
        Some(v) => format!(" (lambda_min = {v:.3e})"),
        None => String::new(),
    }
}

impl Error {
    pub fn contract(what: impl Into<String>) -> Self {
        Error::Contract { what: what.into(), lambda_min: None }
    }

    pub fn contract_psd(what: impl Into<String>, lambda_min: f64) -> Self {
        Error::Contract { what: what.into(), lambda_min: Some(lambda_min) }
    }

    /// Short machine-readable label, used in status columns.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::Contract { .. } => "contract",
            Error::Support { .. } => "support",
            Error::Resource(_) => "resource",
            Error::NoConvergence { .. } => "no_convergence",
            Error::Gapless { .. } => "gapless",
            Error::UnsupportedDimension(_) => "unsupported_dimension",
            Error::Ceiling { .. } => "ceiling",
            Error::Budget { .. } => "budget",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }

    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Resource(_) | Error::Ceiling { .. } => 3,
            Error::Config(_) | Error::Io(_) => 4,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
