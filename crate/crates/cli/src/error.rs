use bergman_core::asymptotics::AsymptoticsError;
use bergman_core::bounds::BoundsError;
use bergman_core::forms::FormsError;
use bergman_core::hyperbolic::GeometryError;
use bergman_core::orbits::OrbitError;
use bergman_core::quadfield::FieldError;
use thiserror::Error;

/// Exit status 2 for bad input, 3 when a computation misses its tolerance.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("output: {e}"))
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::IterationLimit(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::IterationLimit(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<FormsError> for CliError {
    fn from(e: FormsError) -> Self {
        match e {
            FormsError::Geometry(g) => g.into(),
            FormsError::UnsupportedWeight(_)
            | FormsError::WeightMismatch(..)
            | FormsError::NotCuspForm
            | FormsError::BelowMinHeight { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        match e {
            BoundsError::Field(f) => f.into(),
            BoundsError::Quadrature(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<OrbitError> for CliError {
    fn from(e: OrbitError) -> Self {
        match e {
            OrbitError::EmptyOrbit(_) | OrbitError::Divergent | OrbitError::Quadrature(_) => {
                CliError::Numeric(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<AsymptoticsError> for CliError {
    fn from(e: AsymptoticsError) -> Self {
        match e {
            AsymptoticsError::Forms(f) => f.into(),
            AsymptoticsError::Geometry(g) => g.into(),
            AsymptoticsError::Quadrature(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}
