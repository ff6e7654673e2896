//! Event loop for a single replication.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::Serialize;

use super::rng::{stream, StreamKind};
use crate::model::NetworkModel;

#[derive(Debug, Clone, Copy)]
enum EventKind {
    Exogenous(usize),
    Completion(usize),
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so BinaryHeap pops the earliest event; ties go to the lower sequence number.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, Copy)]
struct Job {
    entry_queue: usize,
    entered_network: f64,
    arrived_here: f64,
    service_start: f64,
}

struct Station {
    jobs: VecDeque<Job>,
    arrival_rng: ChaCha8Rng,
    service_rng: ChaCha8Rng,
    routing_rng: ChaCha8Rng,
    arrival_dist: Option<Exp<f64>>,
    service_dist: Exp<f64>,
    cumulative_routing: Vec<f64>,
    // Windowed accumulators.
    last_change: f64,
    area_waiting: f64,
    area_in_system: f64,
    arrivals: u64,
    departures: u64,
    sojourn_sum: f64,
    delay_sum: f64,
    timed_departures: u64,
    // Whole-run counters.
    total_arrivals: u64,
    total_departures: u64,
}

/// Exact job accounting over the whole replication `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventCounts {
    pub events: u64,
    /// Exogenous arrivals into the network.
    pub entries: u64,
    pub exits: u64,
    pub in_system_at_horizon: u64,
    pub queue_arrivals: Vec<u64>,
    pub queue_departures: Vec<u64>,
    pub queue_content_at_horizon: Vec<u64>,
}

/// Raw per-replication estimates. Means over empty samples are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub mean_waiting: Vec<f64>,
    pub mean_in_system: Vec<f64>,
    pub mean_sojourn: Vec<Option<f64>>,
    pub mean_delay: Vec<Option<f64>>,
    pub mean_stay: Vec<Option<f64>>,
    pub throughput: Vec<f64>,
    pub arrival_rate: Vec<f64>,
    pub sojourn_samples: Vec<u64>,
    pub stay_samples: Vec<u64>,
    pub counts: EventCounts,
}

/// Samples the number in system at one queue on a fixed grid.
pub(crate) struct TraceRecorder {
    pub queue: usize,
    pub dt: f64,
    pub next_k: u64,
    pub last_k: u64,
    pub samples: Vec<(f64, u64)>,
}

impl TraceRecorder {
    fn record_until(&mut self, time: f64, value: u64, inclusive: bool) {
        while self.next_k <= self.last_k {
            let t = self.next_k as f64 * self.dt;
            if t > time || (!inclusive && t == time) {
                break;
            }
            self.samples.push((t, value));
            self.next_k += 1;
        }
    }
}

pub(crate) struct Engine<'a> {
    model: &'a NetworkModel,
    horizon: f64,
    warmup: f64,
    stations: Vec<Station>,
    heap: BinaryHeap<Event>,
    seq: u64,
    stay_sum: Vec<f64>,
    stay_count: Vec<u64>,
    entries: u64,
    exits: u64,
    events: u64,
}

impl<'a> Engine<'a> {
    pub fn new(model: &'a NetworkModel, horizon: f64, warmup: f64, key: u64) -> Self {
        let m = model.num_queues();
        let stations = (0..m)
            .map(|i| {
                let rho = model.exo_rates()[i];
                let mut acc = 0.0;
                let cumulative_routing = model
                    .routing()
                    .as_matrix()
                    .row(i)
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect();
                Station {
                    jobs: VecDeque::new(),
                    arrival_rng: stream(key, i, StreamKind::Arrival),
                    service_rng: stream(key, i, StreamKind::Service),
                    routing_rng: stream(key, i, StreamKind::Routing),
                    arrival_dist: (rho > 0.0).then(|| Exp::new(rho).expect("positive rate")),
                    service_dist: Exp::new(model.service_rates()[i]).expect("positive rate"),
                    cumulative_routing,
                    last_change: 0.0,
                    area_waiting: 0.0,
                    area_in_system: 0.0,
                    arrivals: 0,
                    departures: 0,
                    sojourn_sum: 0.0,
                    delay_sum: 0.0,
                    timed_departures: 0,
                    total_arrivals: 0,
                    total_departures: 0,
                }
            })
            .collect();
        Self {
            model,
            horizon,
            warmup,
            stations,
            heap: BinaryHeap::new(),
            seq: 0,
            stay_sum: vec![0.0; m],
            stay_count: vec![0; m],
            entries: 0,
            exits: 0,
            events: 0,
        }
    }

    fn schedule(&mut self, time: f64, kind: EventKind) {
        self.heap.push(Event {
            time,
            seq: self.seq,
            kind,
        });
        self.seq += 1;
    }

    fn in_window(&self, t: f64) -> bool {
        t >= self.warmup && t <= self.horizon
    }

    /// Accumulates time-weighted content at queue `i` up to `now`.
    fn integrate(&mut self, i: usize, now: f64) {
        let (warmup, horizon) = (self.warmup, self.horizon);
        let s = &mut self.stations[i];
        let from = s.last_change.max(warmup);
        let to = now.min(horizon);
        if to > from {
            let n = s.jobs.len() as f64;
            s.area_in_system += n * (to - from);
            s.area_waiting += (n - 1.0).max(0.0) * (to - from);
        }
        s.last_change = now;
    }

    fn start_service(&mut self, i: usize, now: f64) {
        let s = &mut self.stations[i];
        let job = s.jobs.front_mut().expect("service starts on a nonempty queue");
        job.service_start = now;
        let service = s.service_dist.sample(&mut s.service_rng);
        self.schedule(now + service, EventKind::Completion(i));
    }

    fn arrive(&mut self, i: usize, mut job: Job, now: f64) {
        self.integrate(i, now);
        job.arrived_here = now;
        let in_window = self.in_window(now);
        let s = &mut self.stations[i];
        s.total_arrivals += 1;
        if in_window {
            s.arrivals += 1;
        }
        s.jobs.push_back(job);
        if s.jobs.len() == 1 {
            self.start_service(i, now);
        }
    }

    fn next_exogenous(&mut self, i: usize, now: f64) {
        let s = &mut self.stations[i];
        if let Some(dist) = s.arrival_dist {
            let gap = dist.sample(&mut s.arrival_rng);
            self.schedule(now + gap, EventKind::Exogenous(i));
        }
    }

    fn complete(&mut self, i: usize, now: f64) {
        self.integrate(i, now);
        let in_window = self.in_window(now);
        let warmup = self.warmup;
        let s = &mut self.stations[i];
        let job = s.jobs.pop_front().expect("completion at a nonempty queue");
        s.total_departures += 1;
        if in_window {
            s.departures += 1;
            if job.arrived_here >= warmup {
                s.sojourn_sum += now - job.arrived_here;
                s.delay_sum += job.service_start - job.arrived_here;
                s.timed_departures += 1;
            }
        }
        let u: f64 = s.routing_rng.random();
        let next = s.cumulative_routing.iter().position(|&c| u < c);
        if !s.jobs.is_empty() {
            self.start_service(i, now);
        }
        match next {
            Some(j) => self.arrive(j, job, now),
            None => {
                self.exits += 1;
                if job.entered_network >= warmup && in_window {
                    self.stay_sum[job.entry_queue] += now - job.entered_network;
                    self.stay_count[job.entry_queue] += 1;
                }
            }
        }
    }

    pub fn run(mut self, mut trace: Option<&mut TraceRecorder>) -> ReplicationResult {
        for i in 0..self.model.num_queues() {
            self.next_exogenous(i, 0.0);
        }
        while let Some(&Event { time, .. }) = self.heap.peek() {
            if time > self.horizon {
                break;
            }
            let ev = self.heap.pop().expect("peeked");
            if let Some(tr) = trace.as_deref_mut() {
                let n = self.stations[tr.queue].jobs.len() as u64;
                tr.record_until(time, n, false);
            }
            self.events += 1;
            match ev.kind {
                EventKind::Exogenous(i) => {
                    self.entries += 1;
                    self.next_exogenous(i, time);
                    let job = Job {
                        entry_queue: i,
                        entered_network: time,
                        arrived_here: time,
                        service_start: time,
                    };
                    self.arrive(i, job, time);
                }
                EventKind::Completion(i) => self.complete(i, time),
            }
        }
        let horizon = self.horizon;
        for i in 0..self.stations.len() {
            self.integrate(i, horizon);
        }
        if let Some(tr) = trace {
            let n = self.stations[tr.queue].jobs.len() as u64;
            tr.record_until(horizon, n, true);
        }
        self.finish()
    }

    fn finish(self) -> ReplicationResult {
        let window = self.horizon - self.warmup;
        let per = |f: &dyn Fn(&Station) -> f64| self.stations.iter().map(f).collect::<Vec<f64>>();
        let mean_of = |sum: f64, n: u64| (n > 0).then(|| sum / n as f64);
        let in_system: Vec<u64> = self.stations.iter().map(|s| s.jobs.len() as u64).collect();
        ReplicationResult {
            mean_waiting: per(&|s| s.area_waiting / window),
            mean_in_system: per(&|s| s.area_in_system / window),
            mean_sojourn: self.stations.iter().map(|s| mean_of(s.sojourn_sum, s.timed_departures)).collect(),
            mean_delay: self.stations.iter().map(|s| mean_of(s.delay_sum, s.timed_departures)).collect(),
            mean_stay: self.stay_sum.iter().zip(&self.stay_count).map(|(&s, &n)| mean_of(s, n)).collect(),
            throughput: per(&|s| s.departures as f64 / window),
            arrival_rate: per(&|s| s.arrivals as f64 / window),
            sojourn_samples: self.stations.iter().map(|s| s.timed_departures).collect(),
            stay_samples: self.stay_count.clone(),
            counts: EventCounts {
                events: self.events,
                entries: self.entries,
                exits: self.exits,
                in_system_at_horizon: in_system.iter().sum(),
                queue_arrivals: self.stations.iter().map(|s| s.total_arrivals).collect(),
                queue_departures: self.stations.iter().map(|s| s.total_departures).collect(),
                queue_content_at_horizon: in_system,
            },
        }
    }
}
