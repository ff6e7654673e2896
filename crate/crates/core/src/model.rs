//! Core domain types for open Jackson networks, their validation, and the
//! JSON model and partition file formats.
//!
//! Internally every queue is addressed by a 0-based [`QueueId`]. Everything a
//! human reads or writes (files, CLI flags, error messages) uses 1-based labels.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation, Violations};
use crate::io;
use crate::linalg::Matrix;

/// Slack allowed on routing row sums and individual probabilities.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QueueId(pub usize);

impl QueueId {
    pub fn index(self) -> usize {
        self.0
    }

    /// The 1-based label used in files and output.
    pub fn label(self) -> usize {
        self.0 + 1
    }

    /// Converts a 1-based label, checking it against the model size.
    pub fn from_label(label: usize, num_queues: usize) -> Result<Self> {
        if label == 0 || label > num_queues {
            return Err(Error::QueueOutOfRange { label, num_queues });
        }
        Ok(QueueId(label - 1))
    }
}

/// Serialized as the 1-based label.
impl Serialize for QueueId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_u64(self.label() as u64)
    }
}

impl fmt::Display for QueueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// Square routing matrix `R`, with `r[i][j]` the probability that a job
/// finishing service at queue `i` moves to queue `j`. The exit probability
/// `1 - sum_j r[i][j]` is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingMatrix(Matrix);

impl RoutingMatrix {
    pub fn num_queues(&self) -> usize {
        self.0.rows()
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.0[(from, to)]
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn exit_probability(&self, from: usize) -> f64 {
        1.0 - self.0.row(from).iter().sum::<f64>()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.0[(from, to)] > 0.0
    }

    pub fn successors(&self, from: usize) -> impl Iterator<Item = usize> + '_ {
        self.0.row(from).iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(j, _)| j)
    }

    pub fn predecessors(&self, to: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_queues()).filter(move |&i| self.0[(i, to)] > 0.0)
    }
}

/// Unvalidated model description, as read from a file or assembled in code.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawModel {
    pub routing: Vec<Vec<f64>>,
    pub exo_rates: Vec<f64>,
    pub service_rates: Vec<f64>,
    pub names: Option<Vec<String>>,
}

/// A validated open Jackson network. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    routing: RoutingMatrix,
    exo_rates: Vec<f64>,
    service_rates: Vec<f64>,
    names: Option<Vec<String>>,
}

impl NetworkModel {
    pub fn new(
        routing: Vec<Vec<f64>>,
        exo_rates: Vec<f64>,
        service_rates: Vec<f64>,
    ) -> Result<Self> {
        validate_model(RawModel {
            routing,
            exo_rates,
            service_rates,
            names: None,
        })
    }

    pub fn num_queues(&self) -> usize {
        self.routing.num_queues()
    }

    pub fn queues(&self) -> impl Iterator<Item = QueueId> {
        (0..self.num_queues()).map(QueueId)
    }

    pub fn routing(&self) -> &RoutingMatrix {
        &self.routing
    }

    pub fn exo_rates(&self) -> &[f64] {
        &self.exo_rates
    }

    pub fn service_rates(&self) -> &[f64] {
        &self.service_rates
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn to_raw(&self) -> RawModel {
        RawModel {
            routing: self.routing.0.to_rows(),
            exo_rates: self.exo_rates.clone(),
            service_rates: self.service_rates.clone(),
            names: self.names.clone(),
        }
    }

    /// Copy of this model with different exogenous rates.
    pub fn with_exo_rates(&self, exo_rates: Vec<f64>) -> Result<Self> {
        validate_model(RawModel {
            exo_rates,
            ..self.to_raw()
        })
    }

    /// Copy of this model with different service rates.
    pub fn with_service_rates(&self, service_rates: Vec<f64>) -> Result<Self> {
        validate_model(RawModel {
            service_rates,
            ..self.to_raw()
        })
    }
}

/// Checks every model invariant and reports all violations together.
pub fn validate_model(raw: RawModel) -> Result<NetworkModel> {
    let m = raw.routing.len();
    let mut violations = Vec::new();

    if m == 0 {
        violations.push(Violation::DimensionMismatch {
            field: "routing",
            expected: 1,
            found: 0,
        });
    }
    let mut square = true;
    for row in &raw.routing {
        if row.len() != m {
            square = false;
            violations.push(Violation::DimensionMismatch {
                field: "routing",
                expected: m,
                found: row.len(),
            });
        }
    }
    for (field, v) in [("exo_rates", &raw.exo_rates), ("service_rates", &raw.service_rates)] {
        if v.len() != m {
            violations.push(Violation::DimensionMismatch {
                field,
                expected: m,
                found: v.len(),
            });
        }
    }
    if let Some(names) = &raw.names {
        if names.len() != m {
            violations.push(Violation::DimensionMismatch {
                field: "names",
                expected: m,
                found: names.len(),
            });
        }
    }

    if square {
        for (i, row) in raw.routing.iter().enumerate() {
            let mut bad_entry = false;
            for (j, &p) in row.iter().enumerate() {
                if !p.is_finite() {
                    violations.push(Violation::NonFinite {
                        field: "routing",
                        index: i * m + j,
                    });
                    bad_entry = true;
                } else if !(0.0..=1.0 + ROW_SUM_TOLERANCE).contains(&p) {
                    violations.push(Violation::ProbabilityOutOfRange {
                        row: QueueId(i),
                        col: QueueId(j),
                        value: p,
                    });
                    bad_entry = true;
                }
            }
            let excess = row.iter().sum::<f64>() - 1.0;
            if !bad_entry && excess > ROW_SUM_TOLERANCE {
                violations.push(Violation::RowSumExceedsOne {
                    row: QueueId(i),
                    excess,
                });
            }
        }
    }

    for (i, &rate) in raw.exo_rates.iter().enumerate() {
        if !rate.is_finite() {
            violations.push(Violation::NonFinite {
                field: "exo_rates",
                index: i,
            });
        } else if rate < 0.0 {
            violations.push(Violation::NegativeRate {
                field: "exo_rates",
                queue: QueueId(i),
                value: rate,
            });
        }
    }
    for (i, &rate) in raw.service_rates.iter().enumerate() {
        if !rate.is_finite() {
            violations.push(Violation::NonFinite {
                field: "service_rates",
                index: i,
            });
        } else if rate < 0.0 {
            violations.push(Violation::NegativeRate {
                field: "service_rates",
                queue: QueueId(i),
                value: rate,
            });
        } else if rate == 0.0 {
            violations.push(Violation::ZeroServiceRate { queue: QueueId(i) });
        }
    }

    if !violations.is_empty() {
        return Err(Error::Invalid(Violations(violations)));
    }

    Ok(NetworkModel {
        routing: RoutingMatrix(Matrix::from_rows(&raw.routing)),
        exo_rates: raw.exo_rates,
        service_rates: raw.service_rates,
        names: raw.names,
    })
}

// ---------------------------------------------------------------------------
// Model file format
// ---------------------------------------------------------------------------

/// On-disk model document. Queue labels inside are 1-based.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub num_queues: usize,
    pub routing: Vec<Vec<f64>>,
    pub exo_rates: Vec<f64>,
    pub service_rates: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

/// Sidecar block written alongside reduced models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub reduced_from: String,
    pub partition: PartitionFile,
    pub folded: bool,
    /// Original 1-based label of each reduced-model queue.
    pub index_map: Vec<usize>,
}

impl ModelFile {
    pub fn from_model(model: &NetworkModel) -> Self {
        let raw = model.to_raw();
        ModelFile {
            num_queues: model.num_queues(),
            routing: raw.routing,
            exo_rates: raw.exo_rates,
            service_rates: raw.service_rates,
            names: raw.names,
            provenance: None,
        }
    }

    pub fn into_model(self) -> Result<NetworkModel> {
        if self.routing.len() != self.num_queues {
            return Err(Error::Invalid(Violations(vec![Violation::DimensionMismatch {
                field: "routing",
                expected: self.num_queues,
                found: self.routing.len(),
            }])));
        }
        validate_model(RawModel {
            routing: self.routing,
            exo_rates: self.exo_rates,
            service_rates: self.service_rates,
            names: self.names,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model file serializes");
        s.push('\n');
        s
    }
}

fn parse_error(err: serde_json::Error) -> Error {
    let message = err.to_string();
    let field = message
        .strip_prefix("missing field `")
        .and_then(|rest| rest.split('`').next())
        .map(str::to_owned);
    Error::Parse {
        field,
        line: err.line(),
        column: err.column(),
        message,
    }
}

pub fn parse_model_file(text: &str) -> Result<ModelFile> {
    serde_json::from_str(text).map_err(parse_error)
}

pub fn parse_model(text: &str) -> Result<NetworkModel> {
    parse_model_file(text)?.into_model()
}

pub fn load_model(path: &Path) -> Result<NetworkModel> {
    parse_model(&io::read_to_string(path)?)
}

pub fn save_model(model: &NetworkModel, path: &Path) -> Result<()> {
    io::write_atomic(path, ModelFile::from_model(model).to_json().as_bytes())
}

// ---------------------------------------------------------------------------
// Partitions
// ---------------------------------------------------------------------------

/// Which block of a partition a queue belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Head,
    Cutset,
    Tail,
}

/// Partition candidate with 0-based indices, before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartitionSpec {
    pub head: Vec<usize>,
    pub cutset: Vec<usize>,
    pub tail: Vec<usize>,
}

/// Partition as written in files and on the command line (1-based labels).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionFile {
    pub head: Vec<usize>,
    pub cutset: Vec<usize>,
    #[serde(default)]
    pub tail: Vec<usize>,
}

impl PartitionFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(parse_error)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&io::read_to_string(path)?)
    }

    pub fn to_spec(&self, num_queues: usize) -> Result<PartitionSpec> {
        let convert = |labels: &[usize]| -> Result<Vec<usize>> {
            labels
                .iter()
                .map(|&l| QueueId::from_label(l, num_queues).map(QueueId::index))
                .collect()
        };
        Ok(PartitionSpec {
            head: convert(&self.head)?,
            cutset: convert(&self.cutset)?,
            tail: convert(&self.tail)?,
        })
    }

    pub fn from_partition(p: &Partition) -> Self {
        let labels = |v: &[QueueId]| v.iter().map(|q| q.label()).collect();
        PartitionFile {
            head: labels(p.head()),
            cutset: labels(p.cutset()),
            tail: labels(p.tail()),
        }
    }
}

/// A validated head/cutset/tail split: disjoint, covering, and with no
/// routing edge in either direction between head and tail.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    head: Vec<QueueId>,
    cutset: Vec<QueueId>,
    tail: Vec<QueueId>,
    blocks: Vec<Block>,
}

impl Partition {
    pub fn head(&self) -> &[QueueId] {
        &self.head
    }

    pub fn cutset(&self) -> &[QueueId] {
        &self.cutset
    }

    pub fn tail(&self) -> &[QueueId] {
        &self.tail
    }

    pub fn num_queues(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_of(&self, q: QueueId) -> Block {
        self.blocks[q.index()]
    }

    /// Head and cutset queues in ascending index order.
    pub fn preserved(&self) -> Vec<QueueId> {
        (0..self.blocks.len())
            .filter(|&i| self.blocks[i] != Block::Tail)
            .map(QueueId)
            .collect()
    }

    /// Indices ordered head, then cutset, then tail.
    pub fn block_order(&self) -> Vec<usize> {
        self.head
            .iter()
            .chain(&self.cutset)
            .chain(&self.tail)
            .map(|q| q.index())
            .collect()
    }
}

/// Validates a partition candidate against `model`.
///
/// Separation is checked twice: directly on head/tail routing entries and by
/// a reachability search on the routing digraph with the cutset removed. The
/// two checks are equivalent; a disagreement is a bug and panics in debug builds.
pub fn validate_partition(model: &NetworkModel, spec: &PartitionSpec) -> Result<Partition> {
    let m = model.num_queues();
    let mut blocks: Vec<Option<Block>> = vec![None; m];
    for (set, block) in [(&spec.head, Block::Head), (&spec.cutset, Block::Cutset), (&spec.tail, Block::Tail)] {
        for &i in set {
            if i >= m {
                return Err(Error::QueueOutOfRange {
                    label: i + 1,
                    num_queues: m,
                });
            }
            if blocks[i].is_some() {
                return Err(Error::NotDisjoint { queue: QueueId(i) });
            }
            blocks[i] = Some(block);
        }
    }
    let missing: Vec<QueueId> = (0..m).filter(|&i| blocks[i].is_none()).map(QueueId).collect();
    if !missing.is_empty() {
        return Err(Error::NotCovering { missing });
    }
    if spec.head.is_empty() {
        return Err(Error::EmptyHead);
    }
    if spec.cutset.is_empty() {
        return Err(Error::EmptyCutset);
    }
    let blocks: Vec<Block> = blocks.into_iter().map(Option::unwrap).collect();

    let sorted = |v: &[usize]| {
        let mut ids: Vec<QueueId> = v.iter().copied().map(QueueId).collect();
        ids.sort();
        ids
    };
    let partition = Partition {
        head: sorted(&spec.head),
        cutset: sorted(&spec.cutset),
        tail: sorted(&spec.tail),
        blocks,
    };

    let by_edges = separation_edge_violation(model.routing(), &partition);
    let by_reach = separation_reach_violation(model.routing(), &partition);
    debug_assert_eq!(
        by_edges.is_some(),
        by_reach.is_some(),
        "edge and reachability separation checks disagree"
    );
    if let Some((from, to)) = by_edges.or(by_reach) {
        return Err(Error::SeparationViolated { from, to });
    }
    Ok(partition)
}

/// First routing edge between head and tail (either direction), if any.
pub fn separation_edge_violation(routing: &RoutingMatrix, p: &Partition) -> Option<(QueueId, QueueId)> {
    for &h in &p.head {
        for &t in &p.tail {
            if routing.has_edge(h.index(), t.index()) {
                return Some((h, t));
            }
            if routing.has_edge(t.index(), h.index()) {
                return Some((t, h));
            }
        }
    }
    None
}

/// Searches the digraph with cutset vertices deleted for any path from head
/// to tail or tail to head. Returns the endpoints of the first such path.
pub fn separation_reach_violation(routing: &RoutingMatrix, p: &Partition) -> Option<(QueueId, QueueId)> {
    let reach = |sources: &[QueueId], goal: Block| -> Option<(QueueId, QueueId)> {
        for &s in sources {
            let mut seen = vec![false; p.num_queues()];
            let mut queue = VecDeque::from([s.index()]);
            seen[s.index()] = true;
            while let Some(u) = queue.pop_front() {
                for v in routing.successors(u) {
                    if seen[v] || p.blocks[v] == Block::Cutset {
                        continue;
                    }
                    if p.blocks[v] == goal {
                        return Some((s, QueueId(v)));
                    }
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        None
    };
    reach(&p.head, Block::Tail).or_else(|| reach(&p.tail, Block::Head))
}
