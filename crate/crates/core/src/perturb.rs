//! Impact of local increments on a target queue.
//!
//! Raising the exogenous rate at receiver `r` by `delta` raises every total
//! arrival rate linearly: `lambda_q(delta_r) = lambda_q + alpha[q][r] * delta`,
//! exactly. Raising the service rate at a target leaves all arrival rates
//! alone and only shortens sojourn and stay times.
//!
//! Stay-time changes are reported as `before - after`, so a faster server
//! produces non-negative values.

use rayon::prelude::*;
use serde::Serialize;

use crate::analytics::{
    check_stability, contribution_matrix, mm1_delay, mm1_queue_length, mm1_sojourn, solve_traffic, stay_times,
    steady_state, steady_state_from_rates, ContributionMatrix, SteadyState,
};
use crate::error::{Destabilized, Error, Result};
use crate::model::{NetworkModel, Partition, QueueId};
use crate::partition::{require_head, MajorizationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IncrementKind {
    Arrival,
    Service,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncrementScenario {
    pub receiver: QueueId,
    pub delta: f64,
    pub kind: IncrementKind,
}

impl IncrementScenario {
    pub fn new(receiver: QueueId, delta: f64, kind: IncrementKind) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidIncrement(delta));
        }
        Ok(Self { receiver, delta, kind })
    }

    pub fn arrival(receiver: QueueId, delta: f64) -> Result<Self> {
        Self::new(receiver, delta, IncrementKind::Arrival)
    }

    pub fn service(receiver: QueueId, delta: f64) -> Result<Self> {
        Self::new(receiver, delta, IncrementKind::Service)
    }
}

/// Per-queue `perturbed - baseline` differences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricDeltas {
    pub arrival_rates: Vec<f64>,
    pub queue_lengths: Vec<f64>,
    pub sojourn_times: Vec<f64>,
    pub delays: Vec<f64>,
    pub stay_times: Vec<f64>,
}

impl MetricDeltas {
    fn between(baseline: &SteadyState, perturbed: &SteadyState) -> Self {
        let diff = |a: &[f64], b: &[f64]| b.iter().zip(a).map(|(y, x)| y - x).collect();
        Self {
            arrival_rates: diff(&baseline.arrival_rates, &perturbed.arrival_rates),
            queue_lengths: diff(&baseline.queue_lengths, &perturbed.queue_lengths),
            sojourn_times: diff(&baseline.sojourn_times, &perturbed.sojourn_times),
            delays: diff(&baseline.delays, &perturbed.delays),
            stay_times: diff(&baseline.stay_times, &perturbed.stay_times),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactReport {
    pub scenario: IncrementScenario,
    pub target: QueueId,
    pub baseline: SteadyState,
    pub perturbed: SteadyState,
    pub deltas: MetricDeltas,
    /// `lambda + alpha[:, r] * delta`; only for arrival increments.
    pub shortcut_arrival_rates: Option<Vec<f64>>,
    /// Largest gap between the shortcut and the full re-solve.
    pub shortcut_error: f64,
}

impl ImpactReport {
    pub fn target_delta_lambda(&self) -> f64 {
        self.deltas.arrival_rates[self.target.index()]
    }
}

fn check_queue(model: &NetworkModel, q: QueueId) -> Result<()> {
    if q.index() >= model.num_queues() {
        return Err(Error::QueueOutOfRange {
            label: q.label(),
            num_queues: model.num_queues(),
        });
    }
    Ok(())
}

fn check_increment(delta: f64) -> Result<()> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::InvalidIncrement(delta));
    }
    Ok(())
}

/// Re-solves the network with `rho_r += delta` and compares against the
/// linear shortcut through column `r` of the contribution matrix.
pub fn arrival_increment_impact(model: &NetworkModel, scenario: &IncrementScenario, target: QueueId) -> Result<ImpactReport> {
    assert_eq!(scenario.kind, IncrementKind::Arrival, "expected an arrival increment");
    check_queue(model, scenario.receiver)?;
    check_queue(model, target)?;
    let baseline = steady_state(model)?;
    let r = scenario.receiver.index();

    let alpha = contribution_matrix(model)?;
    let shortcut: Vec<f64> = baseline
        .arrival_rates
        .iter()
        .enumerate()
        .map(|(i, l)| l + alpha.as_matrix()[(i, r)] * scenario.delta)
        .collect();

    let mut rho = model.exo_rates().to_vec();
    rho[r] += scenario.delta;
    let bumped = model.with_exo_rates(rho)?;
    let lambda = solve_traffic(&bumped)?;
    let stability = check_stability(&bumped, &lambda);
    if !stability.stable {
        return Err(Error::PerturbationDestabilizes {
            receivers: vec![Destabilized {
                receiver: scenario.receiver,
                queues: stability.unstable_queues(),
            }],
        });
    }
    let shortcut_error = lambda.iter().zip(&shortcut).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    debug_assert!(shortcut_error <= 1e-9 * (1.0 + lambda.iter().fold(0.0_f64, |m, x| m.max(x.abs()))));
    let perturbed = steady_state_from_rates(&bumped, lambda)?;
    Ok(ImpactReport {
        scenario: *scenario,
        target,
        deltas: MetricDeltas::between(&baseline, &perturbed),
        baseline,
        perturbed,
        shortcut_arrival_rates: Some(shortcut),
        shortcut_error,
    })
}

/// Target-queue metrics when the exogenous rate at one receiver is raised.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReceiverImpact {
    pub receiver: QueueId,
    /// `alpha[target][receiver] * delta`.
    pub delta_lambda_target: f64,
    /// `None` if the increment destabilizes some queue.
    pub target_metrics: Option<TargetMetrics>,
    /// Queues pushed to `lambda >= mu`.
    pub destabilized: Vec<QueueId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TargetMetrics {
    pub arrival_rate: f64,
    pub queue_length: f64,
    pub sojourn_time: f64,
    pub delay: f64,
}

/// Evaluates every receiver in `receivers` against a shared baseline. Uses
/// one factorization: an arrival increment only changes the right-hand side.
pub fn receiver_sweep(
    model: &NetworkModel,
    alpha: &ContributionMatrix,
    target: QueueId,
    delta: f64,
    receivers: &[QueueId],
) -> Result<Vec<ReceiverImpact>> {
    check_increment(delta)?;
    check_queue(model, target)?;
    for &r in receivers {
        check_queue(model, r)?;
    }
    let lambda = solve_traffic(model)?;
    let mu = model.service_rates();
    let q = target.index();
    Ok(receivers
        .par_iter()
        .map(|&r| {
            let destabilized: Vec<QueueId> = (0..model.num_queues())
                .filter(|&i| !(lambda[i] + alpha.as_matrix()[(i, r.index())] * delta < mu[i]))
                .map(QueueId)
                .collect();
            let delta_lambda_target = alpha.weight(target, r) * delta;
            let target_metrics = destabilized.is_empty().then(|| {
                let l = lambda[q] + delta_lambda_target;
                TargetMetrics {
                    arrival_rate: l,
                    queue_length: mm1_queue_length(l, mu[q]),
                    sojourn_time: mm1_sojourn(l, mu[q]),
                    delay: mm1_delay(l, mu[q]),
                }
            });
            ReceiverImpact {
                receiver: r,
                delta_lambda_target,
                target_metrics,
                destabilized,
            }
        })
        .collect())
}

/// Cutset-versus-tail comparison of the target's arrival-rate change.
pub fn arrival_increment_majorization(
    model: &NetworkModel,
    target: QueueId,
    partition: &Partition,
    delta: f64,
) -> Result<MajorizationReport> {
    require_head(target, partition)?;
    check_increment(delta)?;
    let alpha = contribution_matrix(model)?;
    let values = |set: &[QueueId]| set.iter().map(|&r| (r, alpha.weight(target, r) * delta)).collect();
    Ok(MajorizationReport::from_values(target, values(partition.cutset()), values(partition.tail())))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricMajorization {
    pub sojourn_time: MajorizationReport,
    pub delay: MajorizationReport,
    pub queue_length: MajorizationReport,
}

impl MetricMajorization {
    pub fn holds(&self) -> bool {
        self.sojourn_time.holds && self.delay.holds && self.queue_length.holds
    }

    pub fn min_slack(&self) -> f64 {
        self.sojourn_time.slack.min(self.delay.slack).min(self.queue_length.slack)
    }
}

/// Target sojourn, delay and queue length after an increment at each cutset
/// or tail receiver, compared cutset-max versus tail.
pub fn metric_increment_majorization(
    model: &NetworkModel,
    target: QueueId,
    partition: &Partition,
    delta: f64,
) -> Result<MetricMajorization> {
    require_head(target, partition)?;
    steady_state(model)?;
    let alpha = contribution_matrix(model)?;
    let receivers: Vec<QueueId> = partition.cutset().iter().chain(partition.tail()).copied().collect();
    let sweep = receiver_sweep(model, &alpha, target, delta, &receivers)?;

    let bad: Vec<Destabilized> = sweep
        .iter()
        .filter(|s| !s.destabilized.is_empty())
        .map(|s| Destabilized {
            receiver: s.receiver,
            queues: s.destabilized.clone(),
        })
        .collect();
    if !bad.is_empty() {
        return Err(Error::PerturbationDestabilizes { receivers: bad });
    }

    let n_cut = partition.cutset().len();
    let report = |f: fn(&TargetMetrics) -> f64| {
        let vals: Vec<(QueueId, f64)> = sweep
            .iter()
            .map(|s| (s.receiver, f(s.target_metrics.as_ref().expect("stable receivers have metrics"))))
            .collect();
        MajorizationReport::from_values(target, vals[..n_cut].to_vec(), vals[n_cut..].to_vec())
    };
    Ok(MetricMajorization {
        sojourn_time: report(|m| m.sojourn_time),
        delay: report(|m| m.delay),
        queue_length: report(|m| m.queue_length),
    })
}

/// Full before/after comparison for a service-rate increment at `scenario.receiver`.
pub fn service_increment_impact(model: &NetworkModel, scenario: &IncrementScenario) -> Result<ImpactReport> {
    assert_eq!(scenario.kind, IncrementKind::Service, "expected a service increment");
    check_queue(model, scenario.receiver)?;
    let baseline = steady_state(model)?;
    let mut mu = model.service_rates().to_vec();
    mu[scenario.receiver.index()] += scenario.delta;
    let faster = model.with_service_rates(mu)?;
    let perturbed = steady_state(&faster)?;
    Ok(ImpactReport {
        scenario: *scenario,
        target: scenario.receiver,
        deltas: MetricDeltas::between(&baseline, &perturbed),
        baseline,
        perturbed,
        shortcut_arrival_rates: None,
        shortcut_error: 0.0,
    })
}

/// Drop in stay time `T_before - T_after` for jobs entering at each queue,
/// when the service rate at `target` grows by `delta_mu`.
pub fn service_increment_stay_impact(model: &NetworkModel, target: QueueId, delta_mu: f64) -> Result<Vec<f64>> {
    check_queue(model, target)?;
    check_increment(delta_mu)?;
    let baseline = steady_state(model)?;
    let q = target.index();
    let mut sojourn = baseline.sojourn_times.clone();
    sojourn[q] = mm1_sojourn(baseline.arrival_rates[q], model.service_rates()[q] + delta_mu);
    let after = stay_times(model, &sojourn)?;
    Ok(baseline.stay_times.iter().zip(&after).map(|(b, a)| b - a).collect())
}

/// Cutset-versus-tail comparison of stay-time drops by entry queue.
pub fn stay_time_majorization(
    model: &NetworkModel,
    target: QueueId,
    partition: &Partition,
    delta_mu: f64,
) -> Result<MajorizationReport> {
    require_head(target, partition)?;
    let drop = service_increment_stay_impact(model, target, delta_mu)?;
    let values = |set: &[QueueId]| set.iter().map(|&i| (i, drop[i.index()])).collect();
    Ok(MajorizationReport::from_values(target, values(partition.cutset()), values(partition.tail())))
}
