//! Cutset analysis of contribution weights.
//!
//! For a target queue in the head of a head/cutset/tail partition, the largest
//! contribution weight among cutset receivers bounds the weight of every tail
//! receiver. This module checks that bound, profiles weights by graph
//! distance, and evaluates the closed form for bidirectional line networks.

use std::collections::VecDeque;

use serde::Serialize;

use crate::analytics::{contribution_matrix, ContributionMatrix};
use crate::error::{Error, Result};
use crate::model::{Block, NetworkModel, Partition, QueueId};

/// Roundoff allowance on majorization slack.
pub const MAJORIZATION_TOLERANCE: f64 = 1e-12;

/// Discriminants at or below this take the repeated-root fallback.
pub const DISCRIMINANT_FLOOR: f64 = 1e-10;

/// Outcome of comparing the best cutset receiver against every tail receiver.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MajorizationReport {
    pub target: QueueId,
    pub cutset_max: f64,
    pub cutset_argmax: QueueId,
    pub cutset_values: Vec<(QueueId, f64)>,
    pub tail_values: Vec<(QueueId, f64)>,
    pub holds: bool,
    /// `cutset_max - max(tail)`; zero when the tail is empty.
    pub slack: f64,
}

impl MajorizationReport {
    /// Builds a report from per-receiver values. `cutset_values` must be nonempty.
    pub fn from_values(target: QueueId, cutset_values: Vec<(QueueId, f64)>, tail_values: Vec<(QueueId, f64)>) -> Self {
        let &(cutset_argmax, cutset_max) = cutset_values
            .iter()
            .fold(None, |best: Option<&(QueueId, f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            })
            .expect("cutset is nonempty");
        let slack = tail_values
            .iter()
            .map(|&(_, v)| cutset_max - v)
            .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.min(s))))
            .unwrap_or(0.0);
        Self {
            target,
            cutset_max,
            cutset_argmax,
            cutset_values,
            tail_values,
            holds: slack >= -MAJORIZATION_TOLERANCE,
            slack,
        }
    }
}

/// Requires `target` to lie in the head of `partition`.
pub fn require_head(target: QueueId, partition: &Partition) -> Result<()> {
    if target.index() >= partition.num_queues() || partition.block_of(target) != Block::Head {
        return Err(Error::TargetNotInHead { target });
    }
    Ok(())
}

/// Compares row `target` of `alpha` over cutset and tail columns.
pub fn majorization_check(alpha: &ContributionMatrix, target: QueueId, partition: &Partition) -> Result<MajorizationReport> {
    require_head(target, partition)?;
    let values = |set: &[QueueId]| set.iter().map(|&r| (r, alpha.weight(target, r))).collect();
    Ok(MajorizationReport::from_values(target, values(partition.cutset()), values(partition.tail())))
}

// ---------------------------------------------------------------------------
// Distance profile
// ---------------------------------------------------------------------------

/// Shortest routing-path length from every queue to `target`, found by BFS
/// over reversed routing edges. `None` means no path.
pub fn distances_to(model: &NetworkModel, target: QueueId) -> Vec<Option<usize>> {
    let routing = model.routing();
    let mut dist = vec![None; model.num_queues()];
    dist[target.index()] = Some(0);
    let mut queue = VecDeque::from([target.index()]);
    while let Some(u) = queue.pop_front() {
        let d = dist[u].expect("queued vertices have a distance");
        for p in routing.predecessors(u) {
            if dist[p].is_none() {
                dist[p] = Some(d + 1);
                queue.push_back(p);
            }
        }
    }
    dist
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceLevel {
    pub distance: usize,
    pub max_weight: f64,
    pub argmax: QueueId,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceProfile {
    pub target: QueueId,
    pub levels: Vec<DistanceLevel>,
    /// Receivers with no routing path to the target; their weight is zero.
    pub unreachable: Vec<(QueueId, f64)>,
}

impl DistanceProfile {
    /// True if max weight never grows with distance, beyond `tolerance`.
    pub fn is_non_increasing(&self, tolerance: f64) -> bool {
        self.levels
            .windows(2)
            .all(|w| w[1].max_weight <= w[0].max_weight + tolerance)
    }
}

/// Largest contribution weight at each graph distance from `target`.
pub fn distance_profile(alpha: &ContributionMatrix, model: &NetworkModel, target: QueueId) -> DistanceProfile {
    let dist = distances_to(model, target);
    let mut levels: Vec<DistanceLevel> = Vec::new();
    let mut unreachable = Vec::new();
    for (j, d) in dist.iter().enumerate() {
        let receiver = QueueId(j);
        let Some(d) = *d else {
            // No routing path: the weight is structurally zero.
            unreachable.push((receiver, 0.0));
            continue;
        };
        let w = alpha.weight(target, receiver);
        if levels.len() <= d {
            levels.resize(
                d + 1,
                DistanceLevel {
                    distance: 0,
                    max_weight: f64::NEG_INFINITY,
                    argmax: receiver,
                },
            );
        }
        let level = &mut levels[d];
        level.distance = d;
        if w > level.max_weight {
            level.max_weight = w;
            level.argmax = receiver;
        }
    }
    DistanceProfile {
        target,
        levels,
        unreachable,
    }
}

// ---------------------------------------------------------------------------
// Line networks
// ---------------------------------------------------------------------------

/// Bidirectional line of `m` queues: from queue `i` a job moves forward to
/// `i + 1` with probability `rf`, back to `i - 1` with `rb`, and re-enters
/// `i` with `rl`. End queues lose the missing direction to exit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineNetworkParams {
    m: usize,
    rf: f64,
    rb: f64,
    rl: f64,
}

impl LineNetworkParams {
    pub fn new(m: usize, rf: f64, rb: f64, rl: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidLineParams("M must be at least 1".into()));
        }
        for (name, v) in [("r_f", rf), ("r_b", rb), ("r_l", rl)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidLineParams(format!("{name} = {v} must be finite and non-negative")));
            }
        }
        if rf + rb + rl > 1.0 + crate::model::ROW_SUM_TOLERANCE {
            return Err(Error::InvalidLineParams(format!("r_f + r_b + r_l = {} exceeds 1", rf + rb + rl)));
        }
        let p = Self { m, rf, rb, rl };
        // Non-negative whenever the sum constraint holds; kept as a guard.
        if p.discriminant() < -crate::model::ROW_SUM_TOLERANCE {
            return Err(Error::InvalidLineParams(format!("negative discriminant {}", p.discriminant())));
        }
        Ok(p)
    }

    pub fn num_queues(&self) -> usize {
        self.m
    }

    pub fn forward(&self) -> f64 {
        self.rf
    }

    pub fn backward(&self) -> f64 {
        self.rb
    }

    pub fn self_loop(&self) -> f64 {
        self.rl
    }

    /// `(1 - r_l)^2 - 4 r_b r_f`.
    pub fn discriminant(&self) -> f64 {
        (1.0 - self.rl).powi(2) - 4.0 * self.rb * self.rf
    }

    pub fn routing(&self) -> Vec<Vec<f64>> {
        let m = self.m;
        let mut r = vec![vec![0.0; m]; m];
        for i in 0..m {
            r[i][i] = self.rl;
            if i + 1 < m {
                r[i][i + 1] = self.rf;
            }
            if i > 0 {
                r[i][i - 1] = self.rb;
            }
        }
        r
    }

    /// Line network as a model with no exogenous traffic and unit service.
    pub fn to_model(&self) -> Result<NetworkModel> {
        NetworkModel::new(self.routing(), vec![0.0; self.m], vec![1.0; self.m])
    }
}

/// Row 1 of the contribution matrix of the line network, by direct LU inversion.
pub fn line_direct_weights(params: &LineNetworkParams) -> Result<Vec<f64>> {
    let alpha = contribution_matrix(&params.to_model()?)?;
    Ok(alpha.row(QueueId(0)).to_vec())
}

/// Closed-form contribution weights of every receiver onto target queue 1.
///
/// With `g1, g2 = ((1 - r_l) +- sqrt(disc)) / (2 r_f)` the weight of receiver
/// `i` is `r_b^(i-1) (g2^(M-i+1) - g1^(M-i+1)) / (r_f^i (g2^(M+1) - g1^(M+1)))`.
/// It is evaluated after dividing through by `g1^(M+1)`, which gives
/// `(r_b/a)^(i-1) / a * (1 - q^(M-i+1)) / (1 - q^(M+1))` with `a = r_f g1`
/// and `q = g2 / g1`. That form is algebraically identical, cannot overflow
/// for large `M`, and stays finite when `r_f = 0`.
pub fn line_closed_form_weights(params: &LineNetworkParams) -> Result<Vec<f64>> {
    let disc = params.discriminant();
    if disc <= DISCRIMINANT_FLOOR {
        return Err(Error::DegenerateDiscriminant {
            discriminant: disc,
            fallback: line_direct_weights(params)?,
        });
    }
    let root = disc.sqrt();
    let a = ((1.0 - params.rl) + root) / 2.0;
    // a * b = r_b r_f; avoids cancellation in ((1 - r_l) - root) / 2.
    let b = params.rb * params.rf / a;
    let q = b / a;
    let g = params.rb / a;
    let m = params.m as i32;
    let denom = 1.0 - q.powi(m + 1);
    Ok((1..=m)
        .map(|i| g.powi(i - 1) / a * (1.0 - q.powi(m - i + 1)) / denom)
        .collect())
}

/// Closed-form weight of `receiver` (1-based label) onto queue 1.
pub fn line_contribution(params: &LineNetworkParams, receiver: usize) -> Result<f64> {
    if receiver == 0 || receiver > params.m {
        return Err(Error::QueueOutOfRange {
            label: receiver,
            num_queues: params.m,
        });
    }
    Ok(line_closed_form_weights(params)?[receiver - 1])
}

/// Closed form next to direct inversion for every receiver.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineProfile {
    /// `None` when the discriminant is degenerate.
    pub closed_form: Option<Vec<f64>>,
    pub direct: Vec<f64>,
    pub degenerate: bool,
    pub max_abs_diff: Option<f64>,
}

pub fn line_profile(params: &LineNetworkParams) -> Result<LineProfile> {
    let direct = line_direct_weights(params)?;
    match line_closed_form_weights(params) {
        Ok(closed) => {
            let max_abs_diff = closed.iter().zip(&direct).map(|(c, d)| (c - d).abs()).fold(0.0, f64::max);
            Ok(LineProfile {
                closed_form: Some(closed),
                direct,
                degenerate: false,
                max_abs_diff: Some(max_abs_diff),
            })
        }
        Err(Error::DegenerateDiscriminant { .. }) => Ok(LineProfile {
            closed_form: None,
            direct,
            degenerate: true,
            max_abs_diff: None,
        }),
        Err(e) => Err(e),
    }
}

/// Least-squares line through `(i, ln w_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    /// Slope of `ln w` per step along the line; negative when weights decay.
    pub log_slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Fits `ln w_i` against the 1-based receiver index over interior receivers
/// (first and last dropped, as the end queues see boundary effects).
/// Non-positive weights are skipped; `None` if fewer than three points remain.
pub fn decay_fit(weights: &[f64]) -> Option<DecayFit> {
    let n = weights.len();
    if n < 3 {
        return None;
    }
    let pts: Vec<(f64, f64)> = (1..n - 1)
        .filter(|&k| weights[k] > 0.0)
        .map(|k| ((k + 1) as f64, weights[k].ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let len = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / len;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / len;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(DecayFit {
        log_slope: slope,
        intercept: my - slope * mx,
        r_squared,
        points: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{five_queue, five_queue_partition};

    /// Unscaled two-root form, used only to confirm the rescaled one.
    fn literal_weight(p: &LineNetworkParams, i: usize) -> f64 {
        let root = p.discriminant().sqrt();
        let g1 = ((1.0 - p.rl) + root) / (2.0 * p.rf);
        let g2 = ((1.0 - p.rl) - root) / (2.0 * p.rf);
        let m = p.m as i32;
        let i = i as i32;
        p.rb.powi(i - 1) * (g2.powi(m - i + 1) - g1.powi(m - i + 1)) / (p.rf.powi(i) * (g2.powi(m + 1) - g1.powi(m + 1)))
    }

    #[test]
    fn five_queue_majorization() {
        let alpha = contribution_matrix(&five_queue()).unwrap();
        let report = majorization_check(&alpha, QueueId(0), &five_queue_partition()).unwrap();
        assert!(report.holds);
        assert_eq!(report.cutset_argmax, QueueId(2));
        assert!((report.cutset_max - 0.05).abs() <= 0.005);
        assert!((report.tail_values[0].1 - 0.01).abs() <= 0.005);
        assert!((report.tail_values[1].1 - 0.02).abs() <= 0.005);
        assert!((report.slack - 0.03).abs() <= 0.005);
    }

    #[test]
    fn target_outside_head_is_rejected() {
        let alpha = contribution_matrix(&five_queue()).unwrap();
        let err = majorization_check(&alpha, QueueId(2), &five_queue_partition()).unwrap_err();
        assert!(matches!(err, Error::TargetNotInHead { .. }));
    }

    #[test]
    fn zero_routing_majorization_has_zero_slack() {
        let m = NetworkModel::new(vec![vec![0.0; 3]; 3], vec![1.0; 3], vec![5.0; 3]).unwrap();
        let p = crate::model::validate_partition(
            &m,
            &crate::model::PartitionSpec {
                head: vec![0],
                cutset: vec![1],
                tail: vec![2],
            },
        )
        .unwrap();
        let report = majorization_check(&contribution_matrix(&m).unwrap(), QueueId(0), &p).unwrap();
        assert!(report.holds);
        assert_eq!(report.slack, 0.0);
        assert_eq!(report.cutset_max, 0.0);
    }

    #[test]
    fn tandem_distance_profile() {
        // 3 -> 2 -> 1, target 1.
        let m = NetworkModel::new(
            vec![vec![0.0, 0.0, 0.0], vec![0.6, 0.0, 0.0], vec![0.0, 0.5, 0.0]],
            vec![1.0, 1.0, 1.0],
            vec![10.0; 3],
        )
        .unwrap();
        let alpha = contribution_matrix(&m).unwrap();
        let prof = distance_profile(&alpha, &m, QueueId(0));
        let dists: Vec<usize> = prof.levels.iter().map(|l| l.distance).collect();
        assert_eq!(dists, vec![0, 1, 2]);
        assert!(prof.levels[0].max_weight >= 1.0);
        assert!((prof.levels[1].max_weight - 0.6).abs() < 1e-12);
        assert!((prof.levels[2].max_weight - 0.3).abs() < 1e-12);
        assert!(prof.unreachable.is_empty());
        assert!(prof.is_non_increasing(0.0));
    }

    #[test]
    fn disconnected_receiver_has_zero_weight() {
        // Queue 3 only receives from 1; it never routes back.
        let m = NetworkModel::new(
            vec![vec![0.0, 0.3, 0.3], vec![0.4, 0.0, 0.0], vec![0.0, 0.0, 0.0]],
            vec![1.0; 3],
            vec![10.0; 3],
        )
        .unwrap();
        let alpha = contribution_matrix(&m).unwrap();
        let prof = distance_profile(&alpha, &m, QueueId(0));
        assert_eq!(prof.unreachable, vec![(QueueId(2), 0.0)]);
        assert!(alpha.weight(QueueId(0), QueueId(2)).abs() < 1e-15);
    }

    #[test]
    fn five_queue_distance_profile_non_increasing() {
        let m = five_queue();
        let alpha = contribution_matrix(&m).unwrap();
        let prof = distance_profile(&alpha, &m, QueueId(0));
        assert_eq!(prof.levels.len(), 4);
        assert!(prof.is_non_increasing(0.0));
    }

    #[test]
    fn line_without_backward_routing() {
        for (m, rf, rl) in [(1, 0.0, 0.3), (4, 0.5, 0.2), (7, 0.9, 0.0)] {
            let p = LineNetworkParams::new(m, rf, 0.0, rl).unwrap();
            let w = line_closed_form_weights(&p).unwrap();
            assert!((w[0] - 1.0 / (1.0 - rl)).abs() < 1e-14);
            assert!(w[1..].iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn line_two_queue_hand_inverse() {
        let p = LineNetworkParams::new(2, 0.3, 0.2, 0.0).unwrap();
        let w = line_contribution(&p, 1).unwrap();
        assert!((w - 1.0 / 0.94).abs() < 1e-12);
        // Second receiver: r_b / (1 - r_f r_b).
        assert!((line_contribution(&p, 2).unwrap() - 0.2 / 0.94).abs() < 1e-12);
    }

    #[test]
    fn line_matches_direct_inversion() {
        let p = LineNetworkParams::new(5, 0.3, 0.2, 0.1).unwrap();
        let prof = line_profile(&p).unwrap();
        assert!(prof.max_abs_diff.unwrap() <= 1e-9);
        for i in 1..=5 {
            assert!((literal_weight(&p, i) - prof.direct[i - 1]).abs() < 1e-9);
        }
    }

    #[test]
    fn line_with_no_forward_routing() {
        let p = LineNetworkParams::new(4, 0.0, 0.4, 0.1).unwrap();
        let prof = line_profile(&p).unwrap();
        assert!(prof.max_abs_diff.unwrap() < 1e-12);
    }

    #[test]
    fn degenerate_discriminant_falls_back() {
        let p = LineNetworkParams::new(6, 0.5, 0.5, 0.0).unwrap();
        match line_closed_form_weights(&p).unwrap_err() {
            Error::DegenerateDiscriminant { fallback, .. } => {
                assert_eq!(fallback, line_direct_weights(&p).unwrap());
            }
            other => panic!("unexpected {other:?}"),
        }
        let prof = line_profile(&p).unwrap();
        assert!(prof.degenerate && prof.closed_form.is_none());
    }

    #[test]
    fn line_params_validation() {
        assert!(LineNetworkParams::new(0, 0.1, 0.1, 0.1).is_err());
        assert!(LineNetworkParams::new(3, 0.6, 0.5, 0.0).is_err());
        assert!(LineNetworkParams::new(3, -0.1, 0.5, 0.0).is_err());
        assert!(matches!(
            line_contribution(&LineNetworkParams::new(3, 0.2, 0.2, 0.2).unwrap(), 4),
            Err(Error::QueueOutOfRange { .. })
        ));
    }

    #[test]
    fn decay_fit_on_geometric_sequence() {
        let w: Vec<f64> = (0..8).map(|k| 3.0 * 0.5f64.powi(k)).collect();
        let fit = decay_fit(&w).unwrap();
        assert!((fit.log_slope - 0.5f64.ln()).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(fit.points, 6);
        assert!(decay_fit(&[1.0, 0.0, 0.0, 0.0]).is_none());
    }

    #[test]
    fn line_weights_decay_log_linearly() {
        let p = LineNetworkParams::new(10, 0.3, 0.2, 0.1).unwrap();
        let fit = decay_fit(&line_closed_form_weights(&p).unwrap()).unwrap();
        assert!(fit.log_slope < 0.0);
        assert!(fit.r_squared > 0.99);
    }
}
