//! Structure-preserving reduction: eliminate the tail of a head/cutset/tail
//! partition and fold its effect into self-routing among cutset queues.
//!
//! The reduced routing is
//!
//! ```text
//! R* = [ R_HH   R_HC       ]      L_C = R_CT (I - R_TT)^-1 R_TC
//!      [ R_CH   R_CC + L_C ]
//! ```
//!
//! and its contribution matrix equals the original one restricted to the
//! preserved queues. Head rows and the head/cutset blocks are copied verbatim.
//!
//! Exogenous traffic entering the tail is dropped by [`reduce`] (with a
//! warning) and can be restored onto the cutset by [`fold_tail_arrivals`],
//! which makes preserved-queue arrival rates match the original exactly.

use log::warn;
use serde::Serialize;

use crate::analytics::{contribution_matrix, solve_traffic, steady_state};
use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};
use crate::model::{validate_model, NetworkModel, Partition, QueueId, RawModel};

/// Allowed deviation between original and reduced contribution weights.
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    pub model: NetworkModel,
    /// Original queue of each reduced-model queue, ascending.
    pub index_map: Vec<QueueId>,
    /// `L_C`, indexed in the partition's cutset order. `None` for an empty tail.
    pub loop_correction: Option<Matrix>,
    /// Exogenous rate added to each cutset queue by folding, in cutset order.
    pub folded_arrivals: Option<Vec<f64>>,
    /// Set when the tail carried exogenous traffic that this model ignores.
    pub dropped_tail_arrivals: bool,
}

impl ReducedModel {
    pub fn is_identity(&self) -> bool {
        self.loop_correction.is_none()
    }

    /// Position of an original queue in the reduced model, if preserved.
    pub fn reduced_index(&self, original: QueueId) -> Option<usize> {
        self.index_map.binary_search(&original).ok()
    }
}

fn indices(ids: &[QueueId]) -> Vec<usize> {
    ids.iter().map(|q| q.index()).collect()
}

fn tail_lu(model: &NetworkModel, partition: &Partition, transpose: bool) -> Result<Lu> {
    let t = indices(partition.tail());
    let mut r_tt = model.routing().as_matrix().select(&t, &t);
    if transpose {
        r_tt = r_tt.transpose();
    }
    Lu::factor(&r_tt.identity_minus()).map_err(|_| Error::SingularTailBlock)
}

/// Builds the equivalent reduction of `model` onto head and cutset queues.
pub fn reduce(model: &NetworkModel, partition: &Partition) -> Result<ReducedModel> {
    let m = model.num_queues();
    if partition.tail().is_empty() {
        return Ok(ReducedModel {
            model: model.clone(),
            index_map: (0..m).map(QueueId).collect(),
            loop_correction: None,
            folded_arrivals: None,
            dropped_tail_arrivals: false,
        });
    }

    let r = model.routing().as_matrix();
    let c = indices(partition.cutset());
    let t = indices(partition.tail());
    let lu = tail_lu(model, partition, false)?;
    let solved = lu.solve_matrix(&r.select(&t, &c));
    let mut loop_correction = r.select(&c, &t).matmul(&solved);
    // Every term of (I - R_TT)^-1 is a sum of nonnegative path weights, so a
    // negative entry here is elimination roundoff.
    let (rows, cols) = (loop_correction.rows(), loop_correction.cols());
    for a in 0..rows {
        for b in 0..cols {
            loop_correction[(a, b)] = loop_correction[(a, b)].max(0.0);
        }
    }

    let preserved = partition.preserved();
    let keep = indices(&preserved);
    let mut routing = r.select(&keep, &keep).to_rows();
    let position = |orig: usize| keep.binary_search(&orig).expect("cutset queues are preserved");
    for (a, &ca) in c.iter().enumerate() {
        for (b, &cb) in c.iter().enumerate() {
            routing[position(ca)][position(cb)] += loop_correction[(a, b)];
        }
    }

    let dropped_tail_arrivals = t.iter().any(|&i| model.exo_rates()[i] > 0.0);
    if dropped_tail_arrivals {
        warn!(
            "tail queues carry exogenous traffic that the reduced model drops; \
             fold it onto the cutset to preserve arrival rates"
        );
    }

    let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    let reduced = validate_model(RawModel {
        routing,
        exo_rates: pick(model.exo_rates()),
        service_rates: pick(model.service_rates()),
        names: model.names().map(|n| keep.iter().map(|&i| n[i].clone()).collect()),
    })?;

    let result = ReducedModel {
        model: reduced,
        index_map: preserved,
        loop_correction: Some(loop_correction),
        folded_arrivals: None,
        dropped_tail_arrivals,
    };
    let max_diff = max_alpha_deviation(model, &result)?;
    let scale = contribution_matrix(model)?.as_matrix().max_abs().max(1.0);
    if !(max_diff <= EQUIVALENCE_TOLERANCE * scale) {
        return Err(Error::EquivalenceViolated { max_diff });
    }
    Ok(result)
}

/// Moves tail exogenous traffic onto the cutset:
/// `rho*_C = rho_C + R_TC' (I - R_TT')^-1 rho_T`.
pub fn fold_tail_arrivals(model: &NetworkModel, partition: &Partition, reduced: &ReducedModel) -> Result<ReducedModel> {
    if partition.tail().is_empty() {
        return Ok(reduced.clone());
    }
    let c = indices(partition.cutset());
    let t = indices(partition.tail());
    let rho_t: Vec<f64> = t.iter().map(|&i| model.exo_rates()[i]).collect();
    let through_tail = tail_lu(model, partition, true)?.solve(&rho_t);
    let r_tc_t = model.routing().as_matrix().select(&t, &c).transpose();
    let correction: Vec<f64> = r_tc_t.mul_vec(&through_tail).into_iter().map(|x| x.max(0.0)).collect();

    let mut exo = reduced.model.exo_rates().to_vec();
    for (k, &ci) in c.iter().enumerate() {
        let pos = reduced
            .reduced_index(QueueId(ci))
            .expect("cutset queues are preserved");
        exo[pos] = model.exo_rates()[ci] + correction[k];
    }
    Ok(ReducedModel {
        model: reduced.model.with_exo_rates(exo)?,
        folded_arrivals: Some(correction),
        dropped_tail_arrivals: false,
        ..reduced.clone()
    })
}

fn max_alpha_deviation(original: &NetworkModel, reduced: &ReducedModel) -> Result<f64> {
    let alpha = contribution_matrix(original)?;
    let alpha_star = contribution_matrix(&reduced.model)?;
    let mut max = 0.0_f64;
    for (a, &qa) in reduced.index_map.iter().enumerate() {
        for (b, &qb) in reduced.index_map.iter().enumerate() {
            max = max.max((alpha_star.as_matrix()[(a, b)] - alpha.weight(qa, qb)).abs());
        }
    }
    Ok(max)
}

/// Differences `reduced - original` on the preserved queues.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    /// Original 1-based labels of the preserved queues.
    pub preserved: Vec<usize>,
    pub max_alpha_diff: f64,
    pub arrival_rate_diffs: Vec<f64>,
    /// Steady-state diffs; `None` when either model is unstable.
    pub metrics: Option<MetricDiffs>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricDiffs {
    pub queue_length_diffs: Vec<f64>,
    pub sojourn_time_diffs: Vec<f64>,
    pub delay_diffs: Vec<f64>,
    /// Not expected to vanish: stay times depend on time spent in the tail.
    pub stay_time_diffs: Vec<f64>,
    pub max_queue_length_diff: f64,
    pub max_sojourn_time_diff: f64,
    pub max_delay_diff: f64,
    pub max_stay_time_diff: f64,
}

impl EquivalenceReport {
    pub fn max_arrival_rate_diff(&self) -> f64 {
        max_abs(&self.arrival_rate_diffs)
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn equivalence_report(original: &NetworkModel, reduced: &ReducedModel) -> Result<EquivalenceReport> {
    let max_alpha_diff = max_alpha_deviation(original, reduced)?;
    let keep: Vec<usize> = indices(&reduced.index_map);
    let diff = |orig: &[f64], red: &[f64]| -> Vec<f64> {
        keep.iter().enumerate().map(|(k, &i)| red[k] - orig[i]).collect()
    };
    let arrival_rate_diffs = diff(&solve_traffic(original)?, &solve_traffic(&reduced.model)?);

    let metrics = match (steady_state(original), steady_state(&reduced.model)) {
        (Ok(a), Ok(b)) => {
            let queue_length_diffs = diff(&a.queue_lengths, &b.queue_lengths);
            let sojourn_time_diffs = diff(&a.sojourn_times, &b.sojourn_times);
            let delay_diffs = diff(&a.delays, &b.delays);
            let stay_time_diffs = diff(&a.stay_times, &b.stay_times);
            Some(MetricDiffs {
                max_queue_length_diff: max_abs(&queue_length_diffs),
                max_sojourn_time_diff: max_abs(&sojourn_time_diffs),
                max_delay_diff: max_abs(&delay_diffs),
                max_stay_time_diff: max_abs(&stay_time_diffs),
                queue_length_diffs,
                sojourn_time_diffs,
                delay_diffs,
                stay_time_diffs,
            })
        }
        (Err(Error::Unstable { .. }), _) | (_, Err(Error::Unstable { .. })) => None,
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };

    Ok(EquivalenceReport {
        preserved: reduced.index_map.iter().map(|q| q.label()).collect(),
        max_alpha_diff,
        arrival_rate_diffs,
        metrics,
    })
}
