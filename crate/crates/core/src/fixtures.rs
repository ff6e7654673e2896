//! Reference models shipped with the crate.
//!
//! [`five_queue`] is the five-queue network used throughout the documentation.
//! [`twelve_queue`] is a hand-built 12-queue network with a head {1..4},
//! cutset {5,6,7} and tail {8..12} layout. Its routing probabilities are
//! chosen for this crate; they do not reproduce any published matrix.

use crate::model::{NetworkModel, Partition, PartitionSpec, validate_partition};

/// Five queues, unit-free service rates 20 and exogenous rate 5 everywhere.
pub fn five_queue() -> NetworkModel {
    NetworkModel::new(
        vec![
            vec![0.4, 0.45, 0.0, 0.0, 0.0],
            vec![0.23, 0.3, 0.23, 0.0, 0.0],
            vec![0.0, 0.05, 0.08, 0.23, 0.15],
            vec![0.0, 0.0, 0.21, 0.01, 0.17],
            vec![0.0, 0.0, 0.29, 0.25, 0.16],
        ],
        vec![5.0; 5],
        vec![20.0; 5],
    )
    .expect("five_queue is valid")
}

/// Head {1,2}, cutset {3}, tail {4,5} (1-based) on [`five_queue`].
pub fn five_queue_partition() -> Partition {
    validate_partition(
        &five_queue(),
        &PartitionSpec {
            head: vec![0, 1],
            cutset: vec![2],
            tail: vec![3, 4],
        },
    )
    .expect("five_queue partition is valid")
}

// (from, to, probability), 1-based labels.
const TWELVE_QUEUE_EDGES: &[(usize, usize, f64)] = &[
    (1, 2, 0.35), (1, 3, 0.3),
    (2, 1, 0.2), (2, 4, 0.3), (2, 5, 0.2),
    (3, 1, 0.25), (3, 5, 0.3),
    (4, 2, 0.25), (4, 6, 0.35),
    (5, 3, 0.15), (5, 7, 0.15), (5, 8, 0.3),
    (6, 4, 0.2), (6, 7, 0.15), (6, 9, 0.3),
    (7, 5, 0.15), (7, 6, 0.15), (7, 10, 0.3),
    (8, 5, 0.25), (8, 9, 0.2), (8, 11, 0.25),
    (9, 6, 0.25), (9, 8, 0.2), (9, 12, 0.2),
    (10, 7, 0.3), (10, 11, 0.2),
    (11, 8, 0.2), (11, 10, 0.2), (11, 12, 0.25),
    (12, 9, 0.25), (12, 11, 0.25),
];

/// 12-queue stand-in network: service rate 20 everywhere, exogenous rate 5
/// at queue 1 and 1 at tail queue 10.
pub fn twelve_queue() -> NetworkModel {
    let mut routing = vec![vec![0.0; 12]; 12];
    for &(from, to, p) in TWELVE_QUEUE_EDGES {
        routing[from - 1][to - 1] = p;
    }
    let mut exo = vec![0.0; 12];
    exo[0] = 5.0;
    exo[9] = 1.0;
    NetworkModel::new(routing, exo, vec![20.0; 12]).expect("twelve-queue fixture is valid")
}

/// Head {1..4}, cutset {5,6,7}, tail {8..12} (1-based) on [`twelve_queue`].
pub fn twelve_queue_partition() -> Partition {
    validate_partition(
        &twelve_queue(),
        &PartitionSpec {
            head: vec![0, 1, 2, 3],
            cutset: vec![4, 5, 6],
            tail: (7..12).collect(),
        },
    )
    .expect("twelve-queue partition is valid")
}
