use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::model::QueueId;

pub type Result<T> = std::result::Result<T, Error>;

/// One violated model invariant. `validate_model` reports all of them at once.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DimensionMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    NonFinite {
        field: &'static str,
        index: usize,
    },
    NegativeRate {
        field: &'static str,
        queue: QueueId,
        value: f64,
    },
    ZeroServiceRate {
        queue: QueueId,
    },
    ProbabilityOutOfRange {
        row: QueueId,
        col: QueueId,
        value: f64,
    },
    RowSumExceedsOne {
        row: QueueId,
        excess: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DimensionMismatch {
                field,
                expected,
                found,
            } => write!(f, "{field}: expected length {expected}, found {found}"),
            Violation::NonFinite { field, index } => {
                write!(f, "{field}: non-finite value at position {}", index + 1)
            }
            Violation::NegativeRate { field, queue, value } => {
                write!(f, "{field}: negative rate {value} at queue {queue}")
            }
            Violation::ZeroServiceRate { queue } => {
                write!(f, "service_rates: queue {queue} has non-positive service rate")
            }
            Violation::ProbabilityOutOfRange { row, col, value } => {
                write!(f, "routing: r[{row},{col}] = {value} is outside [0, 1]")
            }
            Violation::RowSumExceedsOne { row, excess } => {
                write!(f, "routing: row {row} sums to 1 + {excess:.3e}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violations(pub Vec<Violation>);

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// A receiver whose increment pushes some queues to `lambda >= mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct Destabilized {
    pub receiver: QueueId,
    pub queues: Vec<QueueId>,
}

fn join_ids(ids: &[QueueId]) -> String {
    ids.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(", ")
}

fn join_destabilized(items: &[Destabilized]) -> String {
    items
        .iter()
        .map(|d| format!("receiver {} -> [{}]", d.receiver, join_ids(&d.queues)))
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}", path = .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}, column {column}{}: {message}", .field.as_ref().map(|f| format!(" (field `{f}`)")).unwrap_or_default())]
    Parse {
        field: Option<String>,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid model: {0}")]
    Invalid(Violations),

    #[error("queue label {label} is out of range 1..={num_queues}")]
    QueueOutOfRange { label: usize, num_queues: usize },

    #[error("partition sets are not disjoint: queue {queue} appears more than once")]
    NotDisjoint { queue: QueueId },

    #[error("partition does not cover queues [{}]", join_ids(.missing))]
    NotCovering { missing: Vec<QueueId> },

    #[error("partition head is empty")]
    EmptyHead,

    #[error("partition cutset is empty")]
    EmptyCutset,

    #[error("cutset does not separate head from tail: edge {from}->{to}")]
    SeparationViolated { from: QueueId, to: QueueId },

    #[error("target queue {target} is not in the head")]
    TargetNotInHead { target: QueueId },

    #[error("I - R' is singular (pivot {magnitude:.3e} at step {step}); some jobs can never leave")]
    SingularSystem { step: usize, magnitude: f64 },

    #[error("I - R_TT is singular; the tail contains a closed recurrent class")]
    SingularTailBlock,

    #[error("unstable: lambda >= mu at queues [{}]", join_ids(.queues))]
    Unstable { queues: Vec<QueueId> },

    #[error("perturbation destabilizes the network: {}", join_destabilized(.receivers))]
    PerturbationDestabilizes { receivers: Vec<Destabilized> },

    #[error("increment must be finite and non-negative, got {0}")]
    InvalidIncrement(f64),

    #[error("invalid line-network parameters: {0}")]
    InvalidLineParams(String),

    /// The closed form has a repeated root; `fallback` holds the weights
    /// obtained by direct inversion instead.
    #[error("line-network discriminant {discriminant:.3e} is degenerate (repeated root)")]
    DegenerateDiscriminant {
        discriminant: f64,
        fallback: Vec<f64>,
    },

    #[error("reduced model is not an equivalent reduction (max alpha deviation {max_diff:.3e})")]
    EquivalenceViolated { max_diff: f64 },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),
}
