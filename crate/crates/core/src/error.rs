//! Error types shared across the engine.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numeric divergence: NaN at cell ({x}, {y}, {z}) in sweep '{sweep}' at step {step}")]
    NumericDivergence {
        x: i64,
        y: i64,
        z: i64,
        sweep: &'static str,
        step: u64,
    },

    #[error("solver divergence: residual grew from {previous:.3e} to {current:.3e} within one cycle")]
    SolverDivergence { previous: f64, current: f64 },

    #[error("singular operator: zero diagonal at cell ({x}, {y}, {z}) on level {level}")]
    SingularOperator { x: i64, y: i64, z: i64, level: usize },

    #[error("CG breakdown (p·Ap = {curvature:.3e} ≤ 0); operator not SPD, check boundary conditions")]
    CgBreakdown { curvature: f64 },

    #[error(
        "particle {id} moved {displacement:.3e} m in one step (> 0.5 δx = {limit:.3e} m); \
         time step too large for resolved coupling"
    )]
    Stability { id: u64, displacement: f64, limit: f64 },

    #[error("drag undefined: mean velocity is zero")]
    DragUndefined,

    #[error("step {step}, sweep '{sweep}': {source}")]
    Step {
        step: u64,
        sweep: &'static str,
        #[source]
        source: Box<SimError>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl SimError {
    pub fn config(msg: impl Into<String>) -> Self {
        SimError::Config(msg.into())
    }

    /// Process exit code per the CLI contract: 0 ok, 2 config error, 3 numeric divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) => 2,
            SimError::Step { source, .. } => source.exit_code(),
            SimError::Io(_) => 1,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
