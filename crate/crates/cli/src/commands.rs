use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::anyhow;
use pedants::harness::{
    pairwise_ranking_accuracy, rank_models, threshold_sweep, Confusion, RankingInput, RateTally,
    SweepRow,
};
use pedants::pipeline::{seed_corpus, train_pedants, PedantsConfig};
use pedants::{best_over_references, NormPolicy, PedantsModel, QAExample, Threshold};
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::Serialize;

use crate::dataset::{read_all, InputRecord, Records};
use crate::error::{Classify, CliError, CliResult};
use crate::scoring::{MetricKind, Scorer};
use crate::{EvalArgs, JudgeArgs, RankArgs, RunArgs, SweepArgs, TrainArgs};

/// Records handed to the worker pool at once, per worker.
const CHUNK_PER_WORKER: usize = 256;

pub fn train(args: &TrainArgs) -> CliResult<()> {
    let corpus: Vec<QAExample> = match &args.dataset {
        Some(path) => read_all(path, args.skip_bad)?
            .into_iter()
            .map(|r| r.example)
            .collect(),
        None => seed_corpus(),
    };
    let start = Instant::now();
    let model = train_pedants(&corpus, &PedantsConfig::with_seed(args.seed))
        .invalid(|| "training failed".into())?;
    let elapsed = start.elapsed().as_secs_f64();

    let mut hits = 0usize;
    for ex in &corpus {
        let j = model
            .judge(ex)
            .failed(|| "judging training corpus".into())?;
        hits += usize::from(Some(j.correct) == ex.human_label);
    }
    model
        .save(&args.out)
        .failed(|| format!("writing {}", args.out.display()))?;
    eprintln!(
        "trained on {} examples in {elapsed:.2}s; training accuracy {:.4}; seed {}; corpus sha256 {}",
        corpus.len(),
        hits as f64 / corpus.len() as f64,
        model.fingerprint.seed,
        model.fingerprint.corpus_sha256,
    );
    Ok(())
}

pub fn judge(args: &JudgeArgs) -> CliResult<()> {
    if args.threshold.len() > 1 {
        return Err(CliError::validation(anyhow!(
            "judge takes a single --threshold"
        )));
    }
    let threshold = args.threshold.first().copied().unwrap_or(0.5);
    let scorers = build_scorers(&[args.metric], &[threshold], args.norm.policy(), &args.run)?;
    let scorer = &scorers[0];

    let sink: Box<dyn Write> = match &args.out {
        Some(path) => {
            Box::new(File::create(path).failed(|| format!("creating {}", path.display()))?)
        }
        None => Box::new(io::stdout().lock()),
    };
    let mut out = BufWriter::new(sink);
    let mut records = Records::open(&args.run.dataset, args.run.skip_bad)?;
    let pool = pool(args.run.workers)?;

    let start = Instant::now();
    let n = stream(
        &mut records,
        &pool,
        |r| scorer.score(&r.example),
        |_, _, verdict| {
            serde_json::to_writer(&mut out, &verdict)
                .map_err(io::Error::from)
                .and_then(|()| out.write_all(b"\n"))
                .failed(|| "writing judgments".into())
        },
    )?;
    out.flush().failed(|| "writing judgments".into())?;
    report_throughput(n, records.skipped, start, pool.current_num_threads());
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvalRow {
    metric: String,
    n: u64,
    accuracy: f64,
    macro_f1: f64,
    true_pos: u64,
    false_pos: u64,
    true_neg: u64,
    false_neg: u64,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    dataset: String,
    records: usize,
    skipped: usize,
    metrics: Vec<EvalRow>,
}

pub fn eval(args: &EvalArgs) -> CliResult<()> {
    let thresholds = thresholds_or(&args.threshold, &[0.5]);
    let scorers = build_scorers(
        &metrics_or_default(&args.metric, &args.run),
        &thresholds,
        args.norm.policy(),
        &args.run,
    )?;
    let mut records = Records::open(&args.run.dataset, args.run.skip_bad)?;
    let pool = pool(args.run.workers)?;

    let mut order: Vec<String> = scorers.iter().map(ToString::to_string).collect();
    let mut tallies: BTreeMap<String, Confusion> = BTreeMap::new();
    let mut unlabeled = 0usize;
    let skip_bad = args.run.skip_bad;
    let start = Instant::now();
    let n = stream(
        &mut records,
        &pool,
        |r| verdicts(&scorers, r),
        |line, rec, verdicts| {
            let Some(human) = rec.example.human_label else {
                if skip_bad {
                    unlabeled += 1;
                    return Ok(());
                }
                return Err(unlabeled_error(line));
            };
            for (name, v) in verdicts.into_iter().chain(rec.metric_verdicts.clone()) {
                if !tallies.contains_key(&name) && !order.contains(&name) {
                    order.push(name.clone());
                }
                tallies.entry(name).or_default().add(human, v);
            }
            Ok(())
        },
    )?;
    report_throughput(
        n,
        records.skipped + unlabeled,
        start,
        pool.current_num_threads(),
    );

    let mut rows = Vec::new();
    for name in order {
        let c = tallies.get(&name).copied().unwrap_or_default();
        rows.push(EvalRow {
            accuracy: c.accuracy().invalid(|| format!("metric {name}"))?,
            macro_f1: c.macro_f1().invalid(|| format!("metric {name}"))?,
            n: c.total(),
            true_pos: c.true_pos,
            false_pos: c.false_pos,
            true_neg: c.true_neg,
            false_neg: c.false_neg,
            metric: name,
        });
    }
    let report = EvalReport {
        dataset: args.run.dataset.display().to_string(),
        records: n - unlabeled,
        skipped: records.skipped + unlabeled,
        metrics: rows,
    };
    emit(args.out.as_deref(), "report", &report.metrics, &report)
}

#[derive(Debug, Serialize)]
struct RankRow {
    metric: String,
    pairwise_accuracy: f64,
    models: usize,
}

#[derive(Debug, Serialize)]
struct Ranked {
    model: String,
    rate: f64,
}

fn ranked(rates: &BTreeMap<String, f64>) -> Vec<Ranked> {
    rank_models(rates)
        .into_iter()
        .map(|(model, rate)| Ranked { model, rate })
        .collect()
}

#[derive(Debug, Serialize)]
struct MetricRanking {
    metric: String,
    pairwise_accuracy: f64,
    ranking: Vec<Ranked>,
}

#[derive(Debug, Serialize)]
struct RankReport {
    models: usize,
    human: Vec<Ranked>,
    metrics: Vec<MetricRanking>,
}

pub fn rank(args: &RankArgs) -> CliResult<()> {
    let input: RankingInput = match (&args.rates, &args.dataset) {
        (Some(path), None) => {
            let text =
                fs::read_to_string(path).invalid(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str(&text)
                .invalid(|| format!("{}: not a rate table", path.display()))?
        }
        (None, Some(path)) => {
            let run = RunArgs {
                dataset: path.clone(),
                model: args.model.clone(),
                skip_bad: args.skip_bad,
                workers: args.workers,
            };
            rates_from_dataset(args, &run)?
        }
        _ => {
            return Err(CliError::validation(anyhow!(
                "rank needs exactly one of --rates or --dataset"
            )))
        }
    };

    let mut metrics = Vec::new();
    for (name, rates) in &input.metrics {
        metrics.push(MetricRanking {
            metric: name.clone(),
            pairwise_accuracy: pairwise_ranking_accuracy(&input, name)
                .invalid(|| format!("metric {name}"))?,
            ranking: ranked(rates),
        });
    }
    if metrics.is_empty() {
        return Err(CliError::validation(anyhow!("no metric rates to rank")));
    }
    let report = RankReport {
        models: input.human.len(),
        human: ranked(&input.human),
        metrics,
    };
    let rows: Vec<RankRow> = report
        .metrics
        .iter()
        .map(|m| RankRow {
            metric: m.metric.clone(),
            pairwise_accuracy: m.pairwise_accuracy,
            models: report.models,
        })
        .collect();
    emit(args.out.as_deref(), "ranking", &rows, &report)
}

fn rates_from_dataset(args: &RankArgs, run: &RunArgs) -> CliResult<RankingInput> {
    let thresholds = thresholds_or(&args.threshold, &[0.5]);
    let scorers = build_scorers(
        &metrics_or_default(&args.metric, run),
        &thresholds,
        args.norm.policy(),
        run,
    )?;
    let mut records = Records::open(&run.dataset, run.skip_bad)?;
    let pool = pool(run.workers)?;
    let mut tally = RateTally::default();
    let mut ignored = 0usize;
    stream(
        &mut records,
        &pool,
        |r| verdicts(&scorers, r),
        |_, rec, mut verdicts| {
            match (&rec.example.model_id, rec.example.human_label) {
                (Some(model), Some(human)) => {
                    verdicts.extend(rec.metric_verdicts.clone());
                    tally.add(model, human, &verdicts);
                }
                _ => ignored += 1,
            }
            Ok(())
        },
    )?;
    if ignored > 0 {
        eprintln!("warning: {ignored} records without model_id or label ignored");
    }
    Ok(tally.finish())
}

#[derive(Debug, Serialize)]
struct SweepReport {
    dataset: String,
    records: usize,
    rows: Vec<SweepRow>,
}

pub fn sweep(args: &SweepArgs) -> CliResult<()> {
    let thresholds = thresholds_or(&args.threshold, &[0.3, 0.5, 0.7]);
    for &t in &thresholds {
        Threshold::new(t).invalid(|| "--threshold".into())?;
    }
    let policy = args.norm.policy();
    let mut records = Records::open(&args.run.dataset, args.run.skip_bad)?;
    let pool = pool(args.run.workers)?;
    let mut scored: Vec<(f64, bool)> = Vec::new();
    stream(
        &mut records,
        &pool,
        |r| best_over_references(&r.example.candidate, &r.example.references, &policy),
        |line, rec, (_, s)| match rec.example.human_label {
            Some(h) => {
                scored.push((s.f1, h));
                Ok(())
            }
            None => Err(unlabeled_error(line)),
        },
    )?;
    let rows = threshold_sweep(&scored, &thresholds).invalid(|| "sweep".into())?;
    let report = SweepReport {
        dataset: args.run.dataset.display().to_string(),
        records: scored.len(),
        rows,
    };
    emit(args.out.as_deref(), "sweep", &report.rows, &report)
}

fn unlabeled_error(line: usize) -> CliError {
    CliError::validation(anyhow!("line {line}: record has no label"))
}

fn thresholds_or(given: &[f64], default: &[f64]) -> Vec<f64> {
    if given.is_empty() {
        default.to_vec()
    } else {
        given.to_vec()
    }
}

fn metrics_or_default(given: &[MetricKind], run: &RunArgs) -> Vec<MetricKind> {
    if !given.is_empty() {
        return given.to_vec();
    }
    let mut m = vec![MetricKind::Em, MetricKind::F1];
    if run.model.is_some() {
        m.push(MetricKind::Pedants);
    }
    m
}

fn build_scorers(
    metrics: &[MetricKind],
    thresholds: &[f64],
    policy: NormPolicy,
    run: &RunArgs,
) -> CliResult<Vec<Scorer>> {
    let mut model: Option<Arc<PedantsModel>> = None;
    let mut out = Vec::new();
    for &m in metrics {
        match m {
            MetricKind::Em => out.push(Scorer::Em(policy)),
            MetricKind::F1 => {
                for &t in thresholds {
                    let threshold = Threshold::new(t).invalid(|| "--threshold".into())?;
                    out.push(Scorer::F1 { policy, threshold });
                }
            }
            MetricKind::Pedants => {
                if model.is_none() {
                    model = Some(Arc::new(load_model(run.model.as_deref())?));
                }
                out.push(Scorer::Pedants(model.clone().expect("loaded above")));
            }
        }
    }
    Ok(out)
}

fn load_model(path: Option<&Path>) -> CliResult<PedantsModel> {
    let path = path.ok_or_else(|| {
        CliError::validation(anyhow!("the pedants metric needs --model or PEDANTS_MODEL"))
    })?;
    PedantsModel::load(path).invalid(|| format!("cannot load model {}", path.display()))
}

fn verdicts(scorers: &[Scorer], rec: &InputRecord) -> pedants::Result<BTreeMap<String, bool>> {
    scorers
        .iter()
        .map(|s| Ok((s.to_string(), s.score(&rec.example)?.correct())))
        .collect()
}

fn pool(workers: Option<usize>) -> CliResult<ThreadPool> {
    let n = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if n == 0 {
        return Err(CliError::validation(anyhow!(
            "--workers must be at least 1"
        )));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .failed(|| "starting worker pool".into())
}

/// Scores records chunk by chunk on `pool` and hands results to `sink` in
/// input order. Only one chunk is held in memory at a time.
fn stream<T, S, K>(
    records: &mut Records,
    pool: &ThreadPool,
    score: S,
    mut sink: K,
) -> CliResult<usize>
where
    T: Send,
    S: Fn(&InputRecord) -> pedants::Result<T> + Sync,
    K: FnMut(usize, &InputRecord, T) -> CliResult<()>,
{
    let chunk = pool.current_num_threads() * CHUNK_PER_WORKER;
    let mut buf: Vec<(usize, InputRecord)> = Vec::with_capacity(chunk);
    let mut n = 0;
    loop {
        buf.clear();
        for item in records.by_ref().take(chunk) {
            buf.push(item?);
        }
        if buf.is_empty() {
            return Ok(n);
        }
        let results: Vec<pedants::Result<T>> =
            pool.install(|| buf.par_iter().map(|(_, r)| score(r)).collect());
        for ((line, rec), res) in buf.iter().zip(results) {
            let v = res.failed(|| format!("line {line}"))?;
            sink(*line, rec, v)?;
            n += 1;
        }
    }
}

fn report_throughput(n: usize, skipped: usize, start: Instant, workers: usize) {
    let secs = start.elapsed().as_secs_f64();
    let mut msg = format!(
        "judged {n} records in {secs:.3}s ({:.0} records/s, {workers} workers)",
        n as f64 / secs.max(1e-9)
    );
    if skipped > 0 {
        msg.push_str(&format!("; skipped {skipped}"));
    }
    if let Some(kib) = peak_rss_kib() {
        msg.push_str(&format!("; peak RSS {kib} KiB"));
    }
    eprintln!("{msg}");
}

/// High-water resident set size, where the OS exposes it.
fn peak_rss_kib() -> Option<u64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`, or the JSON to stdout.
fn emit<R: Serialize, J: Serialize>(
    dir: Option<&Path>,
    stem: &str,
    rows: &[R],
    json: &J,
) -> CliResult<()> {
    let Some(dir) = dir else {
        let mut out = io::stdout().lock();
        serde_json::to_writer_pretty(&mut out, json).failed(|| "writing report".into())?;
        return writeln!(out).failed(|| "writing report".into());
    };
    fs::create_dir_all(dir).failed(|| format!("creating {}", dir.display()))?;
    let csv_path: PathBuf = dir.join(format!("{stem}.csv"));
    let mut w =
        csv::Writer::from_path(&csv_path).failed(|| format!("creating {}", csv_path.display()))?;
    for row in rows {
        w.serialize(row)
            .failed(|| format!("writing {}", csv_path.display()))?;
    }
    w.flush()
        .failed(|| format!("writing {}", csv_path.display()))?;
    let json_path = dir.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(json).failed(|| "encoding report".into())?;
    fs::write(&json_path, text + "\n").failed(|| format!("writing {}", json_path.display()))
}
