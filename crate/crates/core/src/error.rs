use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed or out-of-domain input.
    #[error("rejected input: {0}")]
    RejectedInput(String),

    /// `<post|pre>` is below the overlap floor, so the weak value is undefined.
    #[error("orthogonal postselection: |<post|pre>| = {overlap:e}")]
    OrthogonalPostselection { overlap: f64 },

    /// No eigenvalue channel connects the preselected and postselected states.
    #[error("impossible sequence: ABL denominator {denominator:e} is zero")]
    ImpossibleSequence { denominator: f64 },

    /// Postselection probability below the floor; the conditional pointer is undefined.
    #[error("postselection failed: probability {probability:e} below floor")]
    PostselectionFailed { probability: f64 },

    /// The flow-line velocity field was evaluated at a (near-)node of the field.
    #[error("near-node at x = {x}, z = {z}")]
    Node { x: f64, z: f64 },

    #[error("integration failed for line starting at x = {start_x}: {reason}")]
    IntegrationFailed { start_x: f64, reason: String },
}

impl Error {
    pub(crate) fn rejected(msg: impl Into<String>) -> Self {
        Error::RejectedInput(msg.into())
    }

    /// True for errors that describe a physically impossible request rather
    /// than bad input or numerical trouble.
    pub fn is_physical(&self) -> bool {
        matches!(
            self,
            Error::OrthogonalPostselection { .. }
                | Error::ImpossibleSequence { .. }
                | Error::PostselectionFailed { .. }
        )
    }
}
