use thiserror::Error;

/// Which real component of a complex configuration coordinate went astray.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Real,
    Imag,
}

impl std::fmt::Display for Component {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Component::Real => f.write_str("q"),
            Component::Imag => f.write_str("p"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration for `{field}`: {message}")]
    Config { field: &'static str, message: String },

    #[error("degenerate field: no site amplitude exceeds the node threshold")]
    DegenerateField,

    #[error("index {index} out of range for {len} entries")]
    Index { index: usize, len: usize },

    #[error(
        "configuration leaves the functional box at site {site}: {component} = {value} \
         (box half width {half_width}); use a larger half width"
    )]
    Domain {
        site: usize,
        component: Component,
        value: f64,
        half_width: f64,
    },

    #[error("numerical blow-up at step {step}")]
    Blowup { step: usize },

    #[error("shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("degenerate density: {0}")]
    Density(&'static str),

    #[error("history too short: need at least {needed} snapshots, got {got}")]
    History { needed: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config(field: &'static str, message: impl Into<String>) -> Error {
    Error::Config {
        field,
        message: message.into(),
    }
}
