//! Random instance generators for property tests and experiments.
//!
//! Every routing row gets a random sparsity pattern and Dirichlet(1) weights
//! scaled so that the row exits with probability drawn uniformly from
//! `[0.1, 0.5]`. Generated models are therefore strictly substochastic with
//! margin, and service rates are set from the solved arrival rates so every
//! queue is stable.

use rand::Rng;

use crate::analytics::solve_traffic;
use crate::model::{validate_partition, Block, NetworkModel, Partition, PartitionSpec};
use crate::partition::LineNetworkParams;

/// Bounds of the per-row exit probability.
pub const EXIT_RANGE: (f64, f64) = (0.1, 0.5);

fn dirichlet_row<R: Rng + ?Sized>(rng: &mut R, allowed: &[usize], m: usize, density: f64) -> Vec<f64> {
    let mut row = vec![0.0; m];
    let chosen: Vec<usize> = allowed.iter().copied().filter(|_| rng.random_bool(density)).collect();
    if chosen.is_empty() {
        return row;
    }
    let weights: Vec<f64> = chosen.iter().map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = weights.iter().sum();
    let mass = 1.0 - rng.random_range(EXIT_RANGE.0..=EXIT_RANGE.1);
    for (&j, w) in chosen.iter().zip(weights) {
        row[j] = mass * w / total;
    }
    row
}

/// Random substochastic routing where `allowed(i, j)` gates each edge.
pub fn random_routing<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
    density: f64,
    allowed: impl Fn(usize, usize) -> bool,
) -> Vec<Vec<f64>> {
    (0..m)
        .map(|i| {
            let targets: Vec<usize> = (0..m).filter(|&j| allowed(i, j)).collect();
            dirichlet_row(rng, &targets, m, density)
        })
        .collect()
}

/// Wraps a routing matrix into a stable model: each queue gets exogenous
/// traffic with probability 1/2, and service rates put utilizations in
/// `[0.1, 0.8]`.
pub fn stable_model<R: Rng + ?Sized>(rng: &mut R, routing: Vec<Vec<f64>>) -> NetworkModel {
    let m = routing.len();
    let mut exo: Vec<f64> = (0..m)
        .map(|_| if rng.random_bool(0.5) { rng.random_range(0.5..5.0) } else { 0.0 })
        .collect();
    if exo.iter().all(|&x| x == 0.0) {
        exo[rng.random_range(0..m)] = 5.0;
    }
    let provisional = NetworkModel::new(routing, exo, vec![1.0; m]).expect("generated model is valid");
    let lambda = solve_traffic(&provisional).expect("generated routing is substochastic");
    let mu: Vec<f64> = lambda
        .iter()
        .map(|&l| l / rng.random_range(0.1..0.8) + 0.5)
        .collect();
    provisional.with_service_rates(mu).expect("positive service rates")
}

pub fn random_model<R: Rng + ?Sized>(rng: &mut R, m: usize) -> NetworkModel {
    let density = rng.random_range(0.15..0.6);
    let routing = random_routing(rng, m, density, |_, _| true);
    stable_model(rng, routing)
}

/// Random block assignment with nonempty head and cutset. The tail is
/// nonempty whenever `m >= 3` and `require_tail` is set.
pub fn random_blocks<R: Rng + ?Sized>(rng: &mut R, m: usize, require_tail: bool) -> Vec<Block> {
    assert!(m >= 2);
    let mut order: Vec<usize> = (0..m).collect();
    for i in (1..m).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut blocks = vec![Block::Tail; m];
    blocks[order[0]] = Block::Head;
    blocks[order[1]] = Block::Cutset;
    let fixed = if require_tail && m >= 3 { 3 } else { 2 };
    for &i in &order[fixed..] {
        blocks[i] = match rng.random_range(0..3) {
            0 => Block::Head,
            1 => Block::Cutset,
            _ => Block::Tail,
        };
    }
    blocks
}

fn spec_from_blocks(blocks: &[Block]) -> PartitionSpec {
    let pick = |b: Block| (0..blocks.len()).filter(|&i| blocks[i] == b).collect();
    PartitionSpec {
        head: pick(Block::Head),
        cutset: pick(Block::Cutset),
        tail: pick(Block::Tail),
    }
}

/// A random stable model together with a valid partition planted in its
/// routing (no head/tail edges). Queue labels are shuffled, so blocks are
/// not contiguous.
pub fn random_partitioned_model<R: Rng + ?Sized>(rng: &mut R, m: usize) -> (NetworkModel, Partition) {
    let blocks = random_blocks(rng, m, true);
    let density = rng.random_range(0.2..0.7);
    let separated = |i: usize, j: usize| {
        !matches!(
            (blocks[i], blocks[j]),
            (Block::Head, Block::Tail) | (Block::Tail, Block::Head)
        )
    };
    let routing = random_routing(rng, m, density, separated);
    let model = stable_model(rng, routing);
    let partition = validate_partition(&model, &spec_from_blocks(&blocks)).expect("planted partition is valid");
    (model, partition)
}

/// Random model whose queues are split into consecutive layers, with routing
/// only inside a layer or between adjacent layers. Any single layer (other
/// than the first) is then a valid cutset between the layers before and after it.
pub fn layered_model<R: Rng + ?Sized>(rng: &mut R, layer_sizes: &[usize]) -> (NetworkModel, Vec<usize>) {
    let layer_of: Vec<usize> = layer_sizes
        .iter()
        .enumerate()
        .flat_map(|(l, &n)| std::iter::repeat_n(l, n))
        .collect();
    let m = layer_of.len();
    let density = rng.random_range(0.3..0.8);
    let routing = random_routing(rng, m, density, |i, j| layer_of[i].abs_diff(layer_of[j]) <= 1);
    (stable_model(rng, routing), layer_of)
}

/// Partition of a layered model with head = layers before `cut`, cutset =
/// layer `cut`, tail = everything after.
pub fn layered_partition(model: &NetworkModel, layer_of: &[usize], cut: usize) -> Partition {
    let blocks: Vec<Block> = layer_of
        .iter()
        .map(|&l| match l.cmp(&cut) {
            std::cmp::Ordering::Less => Block::Head,
            std::cmp::Ordering::Equal => Block::Cutset,
            std::cmp::Ordering::Greater => Block::Tail,
        })
        .collect();
    validate_partition(model, &spec_from_blocks(&blocks)).expect("layer cut is a valid partition")
}

/// Random line-network parameters with discriminant above `min_discriminant`
/// and `M` drawn from `m_range`.
pub fn random_line_params<R: Rng + ?Sized>(
    rng: &mut R,
    m_range: std::ops::RangeInclusive<usize>,
    min_discriminant: f64,
) -> LineNetworkParams {
    loop {
        let total = rng.random_range(0.05..1.0);
        let w: Vec<f64> = (0..3).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let s: f64 = w.iter().sum();
        let (rf, rb, rl) = (total * w[0] / s, total * w[1] / s, total * w[2] / s);
        let m = rng.random_range(m_range.clone());
        if let Ok(p) = LineNetworkParams::new(m, rf, rb, rl) {
            if p.discriminant() > min_discriminant {
                return p;
            }
        }
    }
}
