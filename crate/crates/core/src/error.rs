use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The source-target separation breaks the edge-effect guard B(X_t, d + r) ⊆ D.
    #[error(
        "separation d = {d} violates the edge-effect guard B(X_t, d + r) ⊆ D; \
         d must lie in [0, R/2 - r] = [0, {max}]"
    )]
    EdgeEffect { d: f64, max: f64 },

    /// The excluded ball covers the whole square, so nothing is left to sample from.
    #[error("exclusion ball of radius {radius} covers the whole domain")]
    DegenerateRegion { radius: f64 },

    /// A routing invariant was broken. Indicates a bug, never bad input.
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// `true` for errors caused by caller input rather than by a bug.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Invariant(_))
    }
}
