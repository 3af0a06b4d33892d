//! Error types shared across the crate.

use thiserror::Error;

/// Everything that can go wrong while deriving parameters, packing systems,
/// planning moves, or evaluating maps.
#[derive(Debug, Error)]
pub enum Error {
    /// A structural parameter constraint failed. Carries the first violated
    /// constraint, spelled out with the offending numbers.
    #[error("infeasible parameters: {0}")]
    InfeasibleParams(String),

    /// Strong separation failed; carries a witness (pair of map indices, or
    /// an index and "boundary").
    #[error("strong separation violated: {witness}")]
    SeparationViolation { witness: String },

    /// A piecewise-linear move failed validation.
    #[error("move validation failed ({move_kind}): {detail}")]
    MoveValidationFailure { move_kind: String, detail: String },

    /// The corridor planner could not find a route.
    #[error("planning failed: {0}")]
    PlanningFailure(String),

    /// A point handed to the generating map lies strictly inside a hole.
    #[error("point lies inside hole {0}")]
    PointInHole(usize),

    /// Point location over a move's cells found no containing cell,
    /// which indicates a validation bug rather than bad input.
    #[error("point location failed in move {move_index} at {point:?}")]
    LocationFailure { move_index: usize, point: Vec<f64> },

    /// An address symbol is out of range for its system.
    #[error("bad address: symbol {symbol} not in 1..={count}")]
    BadAddress { symbol: u64, count: u128 },

    /// An enumeration would exceed its stated budget.
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    /// Geometric evaluation of the generated map needs the generating map,
    /// but none was built.
    #[error("generating map required but not built")]
    NeedsGeneratingMap,

    /// Box-count regression cannot fit a slope (all counts equal).
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// The Sobolev series factor q is >= 1, so the energy series diverges.
    #[error("divergent series: q = {q} >= 1")]
    DivergentSeries { q: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
