//! Discrete-event simulation of an open network of single-server FCFS queues
//! with Poisson arrivals and exponential service.
//!
//! Replications are independent and run on a rayon pool; results are merged
//! in replication-index order so output does not depend on thread count.

mod engine;
pub mod rng;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::SteadyState;
use crate::error::{Error, Result};
use crate::model::{NetworkModel, QueueId};

pub use engine::{EventCounts, ReplicationResult};
use engine::{Engine, TraceRecorder};

/// Floor of the relative-error denominator in [`compare`].
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-9;

/// Normal quantile used for 95% half-widths.
const Z_95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: f64,
    /// Defaults to a tenth of the horizon.
    pub warmup: Option<f64>,
    pub seed: u64,
    pub replications: usize,
    /// Worker threads for replications; 0 lets rayon decide.
    pub threads: usize,
}

impl SimConfig {
    pub fn new(horizon: f64, seed: u64, replications: usize) -> Self {
        Self {
            horizon,
            warmup: None,
            seed,
            replications,
            threads: 0,
        }
    }

    pub fn with_warmup(mut self, warmup: f64) -> Self {
        self.warmup = Some(warmup);
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn effective_warmup(&self) -> f64 {
        self.warmup.unwrap_or(self.horizon / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidSimConfig(format!(
                "horizon must be positive and finite, got {}",
                self.horizon
            )));
        }
        let warmup = self.effective_warmup();
        if !(warmup.is_finite() && warmup >= 0.0 && warmup < self.horizon) {
            return Err(Error::InvalidSimConfig(format!(
                "warmup must lie in [0, horizon), got {warmup}"
            )));
        }
        if self.replications == 0 {
            return Err(Error::InvalidSimConfig("replications must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-statistic 95% half-widths across replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalfWidths {
    pub mean_queue_lengths: Vec<f64>,
    pub mean_in_system: Vec<f64>,
    pub mean_sojourns: Vec<f64>,
    pub mean_delays: Vec<f64>,
    pub mean_stays: Vec<f64>,
    pub throughputs: Vec<f64>,
    pub arrival_rates: Vec<f64>,
}

/// Replication-averaged estimates.
///
/// `mean_queue_lengths` is the time-average number waiting (in service
/// excluded). Sojourn, delay and stay means average only the replications
/// that observed at least one job; the `*_samples` vectors give the pooled job
/// counts and a zero count means the estimate is reported as 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimStats {
    pub horizon: f64,
    pub warmup: f64,
    pub replications: usize,
    pub mean_queue_lengths: Vec<f64>,
    pub mean_in_system: Vec<f64>,
    pub mean_sojourns: Vec<f64>,
    pub mean_delays: Vec<f64>,
    pub mean_stays: Vec<f64>,
    pub throughputs: Vec<f64>,
    pub arrival_rates: Vec<f64>,
    pub half_widths: HalfWidths,
    pub sojourn_samples: Vec<u64>,
    pub stay_samples: Vec<u64>,
    pub counts: Vec<EventCounts>,
}

impl SimStats {
    pub fn num_queues(&self) -> usize {
        self.mean_queue_lengths.len()
    }
}

/// Mean and half-width of a sample; the half-width is 0 below two points.
fn summarize(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Z_95 * (var / n as f64).sqrt())
}

fn aggregate_dense(reps: &[ReplicationResult], m: usize, f: impl Fn(&ReplicationResult) -> &[f64]) -> (Vec<f64>, Vec<f64>) {
    (0..m)
        .map(|i| summarize(&reps.iter().map(|r| f(r)[i]).collect::<Vec<_>>()))
        .unzip()
}

fn aggregate_sparse(
    reps: &[ReplicationResult],
    m: usize,
    f: impl Fn(&ReplicationResult) -> &[Option<f64>],
) -> (Vec<f64>, Vec<f64>) {
    (0..m)
        .map(|i| summarize(&reps.iter().filter_map(|r| f(r)[i]).collect::<Vec<_>>()))
        .unzip()
}

fn run_pool<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(job),
        Err(e) => {
            log::warn!("could not build a thread pool ({e}); using the global pool");
            job()
        }
    }
}

/// Runs one replication and returns its raw estimates.
pub fn simulate_replication(model: &NetworkModel, config: &SimConfig, rep: u64) -> ReplicationResult {
    let key = rng::replication_key(config.seed, rep);
    Engine::new(model, config.horizon, config.effective_warmup(), key).run(None)
}

pub fn simulate(model: &NetworkModel, config: &SimConfig) -> Result<SimStats> {
    config.validate()?;
    let m = model.num_queues();
    let reps: Vec<ReplicationResult> = run_pool(config.threads, || {
        (0..config.replications as u64)
            .into_par_iter()
            .map(|rep| simulate_replication(model, config, rep))
            .collect()
    });

    let (mean_queue_lengths, hw_l) = aggregate_dense(&reps, m, |r| &r.mean_waiting);
    let (mean_in_system, hw_n) = aggregate_dense(&reps, m, |r| &r.mean_in_system);
    let (throughputs, hw_x) = aggregate_dense(&reps, m, |r| &r.throughput);
    let (arrival_rates, hw_a) = aggregate_dense(&reps, m, |r| &r.arrival_rate);
    let (mean_sojourns, hw_w) = aggregate_sparse(&reps, m, |r| &r.mean_sojourn);
    let (mean_delays, hw_d) = aggregate_sparse(&reps, m, |r| &r.mean_delay);
    let (mean_stays, hw_t) = aggregate_sparse(&reps, m, |r| &r.mean_stay);
    let pooled = |f: &dyn Fn(&ReplicationResult) -> &[u64]| -> Vec<u64> {
        (0..m).map(|i| reps.iter().map(|r| f(r)[i]).sum()).collect()
    };
    let sojourn_samples = pooled(&|r| &r.sojourn_samples);
    let stay_samples = pooled(&|r| &r.stay_samples);

    Ok(SimStats {
        horizon: config.horizon,
        warmup: config.effective_warmup(),
        replications: config.replications,
        mean_queue_lengths,
        mean_in_system,
        mean_sojourns,
        mean_delays,
        mean_stays,
        throughputs,
        arrival_rates,
        half_widths: HalfWidths {
            mean_queue_lengths: hw_l,
            mean_in_system: hw_n,
            mean_sojourns: hw_w,
            mean_delays: hw_d,
            mean_stays: hw_t,
            throughputs: hw_x,
            arrival_rates: hw_a,
        },
        sojourn_samples,
        stay_samples,
        counts: reps.into_iter().map(|r| r.counts).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub time: f64,
    pub queue_length: u64,
}

/// Number in system at `queue` sampled at `k * sample_dt` for
/// `k = 0..=floor(horizon / sample_dt)`, taken from replication 0.
pub fn trace(model: &NetworkModel, config: &SimConfig, queue: QueueId, sample_dt: f64) -> Result<Vec<TracePoint>> {
    config.validate()?;
    if !(sample_dt.is_finite() && sample_dt > 0.0) {
        return Err(Error::InvalidSimConfig(format!("sample_dt must be positive, got {sample_dt}")));
    }
    if queue.index() >= model.num_queues() {
        return Err(Error::QueueOutOfRange {
            label: queue.label(),
            num_queues: model.num_queues(),
        });
    }
    let last_k = (config.horizon / sample_dt).floor() as u64;
    let mut recorder = TraceRecorder {
        queue: queue.index(),
        dt: sample_dt,
        next_k: 0,
        last_k,
        samples: Vec::with_capacity(last_k as usize + 1),
    };
    let key = rng::replication_key(config.seed, 0);
    Engine::new(model, config.horizon, config.effective_warmup(), key).run(Some(&mut recorder));
    // Grid points that round past the horizon still carry the final state.
    let tail = recorder.samples.last().map_or(0, |s| s.1);
    while recorder.samples.len() as u64 <= last_k {
        let k = recorder.samples.len() as f64;
        recorder.samples.push((k * sample_dt, tail));
    }
    Ok(recorder
        .samples
        .into_iter()
        .map(|(time, queue_length)| TracePoint { time, queue_length })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ArrivalRate,
    QueueLength,
    Sojourn,
    Delay,
    Stay,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::ArrivalRate => "arrival_rate",
            Metric::QueueLength => "queue_length",
            Metric::Sojourn => "sojourn",
            Metric::Delay => "delay",
            Metric::Stay => "stay",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub metric: Metric,
    pub queue: QueueId,
    pub analytic: f64,
    pub simulated: f64,
    pub half_width: f64,
    pub rel_error: f64,
    pub pass: bool,
}

pub fn relative_error(analytic: f64, simulated: f64) -> f64 {
    (simulated - analytic).abs() / analytic.abs().max(RELATIVE_ERROR_FLOOR)
}

/// Per-queue relative errors between analytic and simulated statistics.
///
/// Rows are ordered by metric, then queue. Sojourn and delay rows are omitted
/// for queues that saw no timed departures, and stay rows for queues that no
/// job entered the network through.
pub fn compare(analytic: &SteadyState, empirical: &SimStats, tolerance: f64) -> Result<Vec<ComparisonRow>> {
    let m = analytic.arrival_rates.len();
    if empirical.num_queues() != m {
        return Err(Error::DimensionMismatch {
            what: "simulated statistics",
            expected: m,
            found: empirical.num_queues(),
        });
    }
    type Series<'a> = (Metric, &'a [f64], &'a [f64], &'a [f64], Option<&'a [u64]>);
    let hw = &empirical.half_widths;
    let series: [Series; 5] = [
        (Metric::ArrivalRate, &analytic.arrival_rates, &empirical.arrival_rates, &hw.arrival_rates, None),
        (Metric::QueueLength, &analytic.queue_lengths, &empirical.mean_queue_lengths, &hw.mean_queue_lengths, None),
        (Metric::Sojourn, &analytic.sojourn_times, &empirical.mean_sojourns, &hw.mean_sojourns, Some(&empirical.sojourn_samples)),
        (Metric::Delay, &analytic.delays, &empirical.mean_delays, &hw.mean_delays, Some(&empirical.sojourn_samples)),
        (Metric::Stay, &analytic.stay_times, &empirical.mean_stays, &hw.mean_stays, Some(&empirical.stay_samples)),
    ];
    let mut rows = Vec::new();
    for (metric, a, s, h, samples) in series {
        for i in 0..m {
            if samples.is_some_and(|n| n[i] == 0) {
                continue;
            }
            let rel_error = relative_error(a[i], s[i]);
            rows.push(ComparisonRow {
                metric,
                queue: QueueId(i),
                analytic: a[i],
                simulated: s[i],
                half_width: h[i],
                rel_error,
                pass: rel_error <= tolerance,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::steady_state;

    fn mm1(rho: f64, mu: f64) -> NetworkModel {
        NetworkModel::new(vec![vec![0.0]], vec![rho], vec![mu]).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(100.0, 0, 1).validate().is_ok());
        assert!(SimConfig::new(0.0, 0, 1).validate().is_err());
        assert!(SimConfig::new(100.0, 0, 0).validate().is_err());
        assert!(SimConfig::new(100.0, 0, 1).with_warmup(100.0).validate().is_err());
        assert_eq!(SimConfig::new(100.0, 0, 1).effective_warmup(), 10.0);
    }

    #[test]
    fn empty_network_produces_nothing() {
        let model = NetworkModel::new(vec![vec![0.0; 2]; 2], vec![0.0, 0.0], vec![3.0, 4.0]).unwrap();
        let stats = simulate(&model, &SimConfig::new(100.0, 1, 3)).unwrap();
        assert!(stats.counts.iter().all(|c| c.events == 0));
        for v in [&stats.mean_queue_lengths, &stats.mean_sojourns, &stats.throughputs, &stats.mean_stays] {
            assert!(v.iter().all(|&x| x == 0.0));
        }
        let tr = trace(&model, &SimConfig::new(10.0, 1, 1), QueueId(0), 0.5).unwrap();
        assert_eq!(tr.len(), 21);
        assert!(tr.iter().all(|p| p.queue_length == 0));
    }

    #[test]
    fn deterministic_regardless_of_threads() {
        let model = crate::fixtures::five_queue();
        let base = SimConfig::new(500.0, 9, 4);
        let a = simulate(&model, &base.clone().with_threads(1)).unwrap();
        let b = simulate(&model, &base.with_threads(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn conservation_holds_per_replication() {
        let model = crate::fixtures::five_queue();
        let stats = simulate(&model, &SimConfig::new(300.0, 5, 3)).unwrap();
        for c in &stats.counts {
            assert_eq!(c.entries, c.exits + c.in_system_at_horizon);
            for i in 0..model.num_queues() {
                assert_eq!(c.queue_arrivals[i], c.queue_departures[i] + c.queue_content_at_horizon[i]);
            }
        }
    }

    #[test]
    fn short_mm1_is_in_the_right_range() {
        let model = mm1(5.0, 20.0);
        let stats = simulate(&model, &SimConfig::new(2e4, 3, 2)).unwrap();
        assert!((stats.mean_sojourns[0] - 1.0 / 15.0).abs() < 0.01);
        assert!((stats.throughputs[0] - 5.0).abs() < 0.2);
    }

    #[test]
    fn trace_length_and_grid() {
        let model = mm1(5.0, 20.0);
        let tr = trace(&model, &SimConfig::new(10.0, 0, 1), QueueId(0), 0.3).unwrap();
        assert_eq!(tr.len(), (10.0f64 / 0.3).floor() as usize + 1);
        assert_eq!(tr[0].time, 0.0);
        assert_eq!(tr[0].queue_length, 0);
    }

    #[test]
    fn compare_identical_is_zero() {
        let model = mm1(5.0, 20.0);
        let ss = steady_state(&model).unwrap();
        let mut stats = simulate(&model, &SimConfig::new(100.0, 0, 1)).unwrap();
        stats.arrival_rates = ss.arrival_rates.clone();
        stats.mean_queue_lengths = ss.queue_lengths.clone();
        stats.mean_sojourns = ss.sojourn_times.clone();
        stats.mean_delays = ss.delays.clone();
        stats.mean_stays = ss.stay_times.clone();
        let rows = compare(&ss, &stats, 0.0).unwrap();
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|r| r.rel_error == 0.0 && r.pass));
    }

    #[test]
    fn compare_rejects_dimension_mismatch() {
        let ss = steady_state(&crate::fixtures::five_queue()).unwrap();
        let stats = simulate(&mm1(1.0, 2.0), &SimConfig::new(10.0, 0, 1)).unwrap();
        assert!(matches!(compare(&ss, &stats, 0.1), Err(Error::DimensionMismatch { .. })));
    }
}
