use thiserror::Error;

/// Errors raised by the rate model and its oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("Fock expansion not converged after {n_cap} terms (accumulated mass {partial_mass})")]
    Truncation { n_cap: usize, partial_mass: f64 },

    #[error("Fock oracle truncated at n = {n_max} misses {missing_mass:e} of probability mass")]
    InsufficientTruncation { n_max: usize, missing_mass: f64 },

    #[error("closed form for C_{0} is not available (only orders 0..=4)")]
    UnsupportedOrder(usize),

    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown source family `{0}`")]
    UnknownFamily(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            expected: "[0, 1]",
        })
    }
}

pub(crate) fn check_non_negative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            expected: "finite and >= 0",
        })
    }
}
