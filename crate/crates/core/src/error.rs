use thiserror::Error;

/// Errors raised by the wavefront toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A bracketing search or an iteration did not converge.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// The monotone iteration produced an iterate outside its ordering
    /// envelope by more than the allowed rounding slack.
    #[error("order violation at iteration {iteration}, node {node}: {detail} (excess {excess:.3e})")]
    OrderViolation {
        iteration: usize,
        node: usize,
        excess: f64,
        detail: String,
    },

    /// A decay-rate fit window holds too few nodes.
    #[error("fit window on the {side} side has {found} nodes, at least {needed} required")]
    Window {
        side: &'static str,
        found: usize,
        needed: usize,
    },

    /// A lattice value left the invariant interval before clamping.
    #[error("lattice state left [0, K] at t = {time}: site {site} has value {value:e}")]
    Stability { time: f64, site: usize, value: f64 },

    /// The tracked front came too close to the end of the lattice.
    #[error("front at x = {position} entered the boundary guard band at t = {time}")]
    Boundary { time: f64, position: f64 },

    /// A model file or run configuration is malformed.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
