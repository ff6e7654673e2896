use std::collections::BTreeMap;
use std::path::Path;

use jackson_core::analytics::{contribution_matrix, steady_state, SteadyState};
use jackson_core::model::{
    load_model, validate_partition, Block, ModelFile, NetworkModel, Partition, PartitionFile, Provenance, QueueId,
};
use jackson_core::partition::{
    decay_fit, line_profile, require_head, DecayFit, LineNetworkParams, MajorizationReport, MAJORIZATION_TOLERANCE,
};
use jackson_core::perturb::{receiver_sweep, ReceiverImpact};
use jackson_core::reduce::{equivalence_report, fold_tail_arrivals, EquivalenceReport};
use jackson_core::sim::{compare, simulate as run_simulation, trace, SimConfig, SimStats};
use serde::Serialize;

use crate::output::{csv_bytes, json_bytes, num, OutputDir};
use crate::svg::{bar_chart, line_chart, Series};
use crate::{AnalyzeArgs, CliError, LineCheckArgs, PerturbArgs, ReduceArgs, SimulateArgs};

pub const THREADS_ENV: &str = "JACKSON_KIT_THREADS";

/// Largest closed-form versus inversion gap accepted by `line-check`.
pub const LINE_TOLERANCE: f64 = 1e-9;

fn options<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Reads `--partition` as inline JSON when it looks like an object, else as a path.
fn load_partition(arg: &str, model: &NetworkModel) -> Result<Partition, CliError> {
    let file = if arg.trim_start().starts_with('{') {
        PartitionFile::parse(arg)?
    } else {
        PartitionFile::load(Path::new(arg))?
    };
    Ok(validate_partition(model, &file.to_spec(model.num_queues())?)?)
}

fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}"))),
        Err(_) => Ok(0),
    }
}

fn labels(m: usize) -> Vec<String> {
    (1..=m).map(|i| i.to_string()).collect()
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct AnalyzeReport<'a> {
    num_queues: usize,
    #[serde(flatten)]
    steady_state: &'a SteadyState,
    stability_margins: Vec<f64>,
}

pub fn analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let ss = steady_state(&model)?;
    let alpha = contribution_matrix(&model)?;
    let m = model.num_queues();

    let report = AnalyzeReport {
        num_queues: m,
        steady_state: &ss,
        stability_margins: model.service_rates().iter().zip(&ss.arrival_rates).map(|(mu, l)| mu - l).collect(),
    };
    let mut header = vec!["queue".to_string()];
    header.extend(labels(m));
    let rows: Vec<Vec<String>> = (0..m)
        .map(|i| {
            std::iter::once((i + 1).to_string())
                .chain(alpha.row(QueueId(i)).iter().map(|&v| num(v)))
                .collect()
        })
        .collect();

    let mut out = OutputDir::create(&args.common.out)?;
    out.write("steady_state.json", &json_bytes(&report)?)?;
    out.write("alpha.csv", &csv_bytes(&header.iter().map(String::as_str).collect::<Vec<_>>(), &rows)?)?;
    out.finish("analyze", Some(&args.model), BTreeMap::new(), None)
}

// ---------------------------------------------------------------------------
// perturb
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct PerturbSummary {
    target: QueueId,
    delta: f64,
    baseline: BaselineMetrics,
    delta_lambda: MajorizationReport,
    /// Absent when some cutset or tail receiver destabilizes the network.
    queue_length: Option<MajorizationReport>,
    sojourn_time: Option<MajorizationReport>,
    delay: Option<MajorizationReport>,
}

#[derive(Serialize)]
struct BaselineMetrics {
    arrival_rate: f64,
    queue_length: f64,
    sojourn_time: f64,
    delay: f64,
}

fn block_name(b: Block) -> &'static str {
    match b {
        Block::Head => "head",
        Block::Cutset => "cutset",
        Block::Tail => "tail",
    }
}

fn sweep_report(
    target: QueueId,
    partition: &Partition,
    sweep: &[ReceiverImpact],
    value: impl Fn(&ReceiverImpact) -> Option<f64>,
) -> Option<MajorizationReport> {
    let collect = |set: &[QueueId]| -> Option<Vec<(QueueId, f64)>> {
        set.iter().map(|&q| value(&sweep[q.index()]).map(|v| (q, v))).collect()
    };
    Some(MajorizationReport::from_values(
        target,
        collect(partition.cutset())?,
        collect(partition.tail())?,
    ))
}

pub fn perturb(args: &PerturbArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let m = model.num_queues();
    let partition = load_partition(&args.partition, &model)?;
    let target = QueueId::from_label(args.target, m)?;
    require_head(target, &partition)?;
    let baseline = steady_state(&model)?;
    let alpha = contribution_matrix(&model)?;
    let receivers: Vec<QueueId> = model.queues().collect();
    let sweep = receiver_sweep(&model, &alpha, target, args.delta, &receivers)?;

    let metric = |f: fn(&jackson_core::perturb::TargetMetrics) -> f64| {
        move |s: &ReceiverImpact| s.target_metrics.as_ref().map(f)
    };
    let summary = PerturbSummary {
        target,
        delta: args.delta,
        baseline: {
            let q = target.index();
            BaselineMetrics {
                arrival_rate: baseline.arrival_rates[q],
                queue_length: baseline.queue_lengths[q],
                sojourn_time: baseline.sojourn_times[q],
                delay: baseline.delays[q],
            }
        },
        delta_lambda: sweep_report(target, &partition, &sweep, |s| Some(s.delta_lambda_target))
            .expect("arrival-rate changes are always defined"),
        queue_length: sweep_report(target, &partition, &sweep, metric(|t| t.queue_length)),
        sojourn_time: sweep_report(target, &partition, &sweep, metric(|t| t.sojourn_time)),
        delay: sweep_report(target, &partition, &sweep, metric(|t| t.delay)),
    };

    // A tail row is majorized when every metric it defines stays at or below
    // the cutset maximum of that metric. Cutset rows are the bound itself.
    let cut_max = |f: &dyn Fn(&ReceiverImpact) -> Option<f64>| {
        partition
            .cutset()
            .iter()
            .filter_map(|q| f(&sweep[q.index()]))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    type Getter = Box<dyn Fn(&ReceiverImpact) -> Option<f64>>;
    let getters: Vec<Getter> = vec![
        Box::new(|s| Some(s.delta_lambda_target)),
        Box::new(metric(|t| t.queue_length)),
        Box::new(metric(|t| t.sojourn_time)),
        Box::new(metric(|t| t.delay)),
    ];
    let bounds: Vec<f64> = getters.iter().map(|g| cut_max(g.as_ref())).collect();

    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    let rows: Vec<Vec<String>> = sweep
        .iter()
        .map(|s| {
            let block = partition.block_of(s.receiver);
            let majorized = match block {
                Block::Head => "na".to_string(),
                Block::Cutset => "true".to_string(),
                Block::Tail => getters
                    .iter()
                    .zip(&bounds)
                    .all(|(g, &b)| g(s).is_none_or(|v| v <= b + MAJORIZATION_TOLERANCE))
                    .to_string(),
            };
            let destabilized = s.destabilized.iter().map(|q| q.label().to_string()).collect::<Vec<_>>().join(" ");
            let tm = s.target_metrics.as_ref();
            vec![
                s.receiver.label().to_string(),
                block_name(block).to_string(),
                num(s.delta_lambda_target),
                opt(tm.map(|t| t.queue_length)),
                opt(tm.map(|t| t.sojourn_time)),
                opt(tm.map(|t| t.delay)),
                majorized,
                destabilized,
            ]
        })
        .collect();

    let mut out = OutputDir::create(&args.common.out)?;
    out.write(
        "perturb.csv",
        &csv_bytes(
            &[
                "receiver",
                "block",
                "delta_lambda_target",
                "queue_length_target",
                "sojourn_target",
                "delay_target",
                "majorized",
                "destabilized_queues",
            ],
            &rows,
        )?,
    )?;
    out.write("perturb_summary.json", &json_bytes(&summary)?)?;
    let charts = [
        ("perturb_delta_lambda.svg", "Change in target arrival rate", "delta lambda"),
        ("perturb_queue_length.svg", "Target mean queue length", "L"),
        ("perturb_sojourn.svg", "Target mean sojourn time", "W"),
        ("perturb_delay.svg", "Target mean delay", "D"),
    ];
    let receiver_labels = labels(m);
    for ((file, title, y), getter) in charts.iter().zip(&getters) {
        let values: Vec<Option<f64>> = sweep.iter().map(getter).collect();
        let title = format!("{title} (target {target}) by receiver");
        out.write(file, bar_chart(&title, "receiver queue", y, &receiver_labels, &values).as_bytes())?;
    }
    out.finish(
        "perturb",
        Some(&args.model),
        options([
            ("target", args.target.to_string()),
            ("partition", args.partition.clone()),
            ("delta", args.delta.to_string()),
        ]),
        None,
    )?;

    let count = sweep.iter().filter(|s| !s.destabilized.is_empty()).count();
    if count > 0 {
        return Err(CliError::Destabilized { count });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// reduce
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ReduceReport {
    #[serde(flatten)]
    equivalence: EquivalenceReport,
    folded: bool,
    dropped_tail_arrivals: bool,
    /// Extra routing mass added among cutset queues, in cutset order.
    loop_correction: Option<Vec<Vec<f64>>>,
    folded_arrivals: Option<Vec<f64>>,
}

pub fn reduce(args: &ReduceArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let partition = load_partition(&args.partition, &model)?;
    let mut reduced = jackson_core::reduce::reduce(&model, &partition)?;
    if args.fold {
        reduced = fold_tail_arrivals(&model, &partition, &reduced)?;
    }
    let equivalence = equivalence_report(&model, &reduced)?;

    let mut file = ModelFile::from_model(&reduced.model);
    file.provenance = Some(Provenance {
        reduced_from: args.model.display().to_string(),
        partition: PartitionFile::from_partition(&partition),
        folded: args.fold,
        index_map: reduced.index_map.iter().map(|q| q.label()).collect(),
    });
    let report = ReduceReport {
        equivalence,
        folded: args.fold,
        dropped_tail_arrivals: reduced.dropped_tail_arrivals,
        loop_correction: reduced.loop_correction.as_ref().map(|l| l.to_rows()),
        folded_arrivals: reduced.folded_arrivals.clone(),
    };

    let mut out = OutputDir::create(&args.common.out)?;
    out.write("reduced.json", file.to_json().as_bytes())?;
    out.write("equivalence.json", &json_bytes(&report)?)?;
    out.finish(
        "reduce",
        Some(&args.model),
        options([("partition", args.partition.clone()), ("fold", args.fold.to_string())]),
        None,
    )
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn stats_json(stats: &SimStats) -> Result<Vec<u8>, CliError> {
    json_bytes(stats)
}

pub fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let m = model.num_queues();
    let mut config = SimConfig::new(args.horizon, args.seed, args.reps).with_threads(threads_from_env()?);
    config.warmup = args.warmup;
    config.validate()?;
    let trace_queue = args.trace.map(|q| QueueId::from_label(q, m)).transpose()?;
    let sample_dt = args.sample_dt.unwrap_or(args.horizon / 1000.0);

    let stats = run_simulation(&model, &config)?;
    let comparison = match steady_state(&model) {
        Ok(analytic) => Some(compare(&analytic, &stats, args.tolerance)?),
        Err(jackson_core::Error::Unstable { queues }) => {
            log::warn!(
                "model is unstable at queues {:?}; skipping the analytic comparison",
                queues.iter().map(|q| q.label()).collect::<Vec<_>>()
            );
            None
        }
        Err(e) => return Err(e.into()),
    };
    let samples = trace_queue.map(|q| trace(&model, &config, q, sample_dt)).transpose()?;

    let mut out = OutputDir::create(&args.common.out)?;
    out.write("sim_stats.json", &stats_json(&stats)?)?;
    if let Some(rows) = &comparison {
        let rows: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    r.metric.name().to_string(),
                    r.queue.label().to_string(),
                    num(r.analytic),
                    num(r.simulated),
                    num(r.half_width),
                    num(r.rel_error),
                    r.pass.to_string(),
                ]
            })
            .collect();
        out.write(
            "compare.csv",
            &csv_bytes(&["metric", "queue", "analytic", "simulated", "half_width", "rel_error", "pass"], &rows)?,
        )?;
    }
    if let (Some(q), Some(samples)) = (trace_queue, &samples) {
        let rows: Vec<Vec<String>> = samples
            .iter()
            .map(|p| vec![num(p.time), p.queue_length.to_string()])
            .collect();
        out.write(&format!("trace_q{}.csv", q.label()), &csv_bytes(&["time", "queue_length"], &rows)?)?;
        let series = Series {
            name: "number in system",
            points: samples.iter().map(|p| (p.time, p.queue_length as f64)).collect(),
            step: true,
        };
        let svg = line_chart(&format!("Queue {} length over time", q.label()), "time", "jobs", &[series], false);
        out.write(&format!("trace_q{}.svg", q.label()), svg.as_bytes())?;
    }

    let mut opts = options([
        ("horizon", args.horizon.to_string()),
        ("warmup", config.effective_warmup().to_string()),
        ("reps", args.reps.to_string()),
        ("tolerance", args.tolerance.to_string()),
    ]);
    if let Some(q) = args.trace {
        opts.insert("trace".into(), q.to_string());
        opts.insert("sample_dt".into(), sample_dt.to_string());
    }
    out.finish("simulate", Some(&args.model), opts, Some(args.seed))
}

// ---------------------------------------------------------------------------
// line-check
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct LineSummary {
    m: usize,
    rf: f64,
    rb: f64,
    rl: f64,
    discriminant: f64,
    degenerate: bool,
    max_abs_diff: Option<f64>,
    tolerance: f64,
    decay: Option<DecayFit>,
}

pub fn line_check(args: &LineCheckArgs) -> Result<(), CliError> {
    let params = LineNetworkParams::new(args.m, args.rf, args.rb, args.rl)?;
    let profile = line_profile(&params)?;

    let rows: Vec<Vec<String>> = (0..args.m)
        .map(|k| {
            let closed = profile.closed_form.as_ref().map(|c| c[k]);
            vec![
                (k + 1).to_string(),
                closed.map(num).unwrap_or_default(),
                num(profile.direct[k]),
                closed.map(|c| num((c - profile.direct[k]).abs())).unwrap_or_default(),
            ]
        })
        .collect();
    let summary = LineSummary {
        m: args.m,
        rf: args.rf,
        rb: args.rb,
        rl: args.rl,
        discriminant: params.discriminant(),
        degenerate: profile.degenerate,
        max_abs_diff: profile.max_abs_diff,
        tolerance: LINE_TOLERANCE,
        decay: decay_fit(profile.closed_form.as_ref().unwrap_or(&profile.direct)),
    };
    let points = |w: &[f64]| w.iter().enumerate().map(|(k, &v)| ((k + 1) as f64, v)).collect();
    let mut series = vec![Series {
        name: "direct inversion",
        points: points(&profile.direct),
        step: false,
    }];
    if let Some(c) = &profile.closed_form {
        series.push(Series {
            name: "closed form",
            points: points(c),
            step: false,
        });
    }

    let mut out = OutputDir::create(&args.common.out)?;
    out.write("line_check.csv", &csv_bytes(&["i", "closed_form", "direct", "abs_diff"], &rows)?)?;
    out.write("line_check.json", &json_bytes(&summary)?)?;
    let svg = line_chart("Contribution to queue 1 by receiver", "receiver i", "alpha_1i", &series, true);
    out.write("line_check.svg", svg.as_bytes())?;
    out.finish(
        "line-check",
        None,
        options([
            ("m", args.m.to_string()),
            ("rf", args.rf.to_string()),
            ("rb", args.rb.to_string()),
            ("rl", args.rl.to_string()),
        ]),
        None,
    )?;

    if profile.degenerate {
        return Err(jackson_core::Error::DegenerateDiscriminant {
            discriminant: params.discriminant(),
            fallback: profile.direct,
        }
        .into());
    }
    match profile.max_abs_diff {
        Some(d) if d > LINE_TOLERANCE => Err(CliError::LineDeviation(d)),
        _ => Ok(()),
    }
}
