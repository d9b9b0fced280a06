//! End-to-end acceptance checks. Runs without the libtest harness so that the
//! verdict line of every criterion is always printed.

#[path = "../../core/tests/common/oracles.rs"]
mod oracles;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use oracles::{brute_force_pairwise, gaussian_blobs, DenseLogReg};
use pedants::harness::{
    likert_to_binary, pairwise_ranking_accuracy, threshold_sweep, RankingInput,
};
use pedants::linear::train;
use pedants::pipeline::{seed_corpus, train_pedants, PedantsConfig};
use pedants::{
    exact_match, threshold_judge, token_prf, NormPolicy, QAExample, QuestionType, RuleLabel,
    SparseVector, Threshold, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn token_metrics() -> Check {
    for policy in [NormPolicy::EM, NormPolicy::PEDANTS] {
        let s = token_prf("Joseph Biden", "Joe Biden", &policy);
        for v in [s.precision, s.recall, s.f1] {
            ensure(close(v, 0.5, 1e-9), || {
                format!("Joseph/Joe Biden gave {s:?}")
            })?;
        }
        let s = token_prf("2021", "Jan 20, 2021", &policy);
        ensure(
            close(s.f1, 0.5, 1e-9)
                && close(s.precision, 1.0, 1e-9)
                && close(s.recall, 1.0 / 3.0, 1e-9),
            || format!("2021 vs Jan 20, 2021 gave {s:?}"),
        )?;
    }
    Ok("P=R=F1=0.5 and F1=0.5 with P=1, R=1/3 (tol 1e-9)".into())
}

fn exact_match_behavior() -> Check {
    let failures = [
        ("Mt. Everest", "Mount Everest"),
        ("wetlands area", "wetland"),
        ("12 PM", "12 noon"),
    ];
    for (c, r) in failures {
        ensure(!exact_match(c, &[r]).unwrap(), || {
            format!("EM({c:?}, {r:?}) was true")
        })?;
    }
    let equal = [
        ("The Mount Everest!", "mount everest"),
        ("  Wetlands\tArea ", "wetlands area"),
        ("12 pm.", "12 PM"),
        ("an apple", "Apple"),
    ];
    for (c, r) in equal {
        ensure(exact_match(c, &[r]).unwrap(), || {
            format!("EM({c:?}, {r:?}) was false")
        })?;
    }
    Ok("3 paraphrase pairs rejected, 4 normalization-equal pairs accepted".into())
}

fn threshold_semantics() -> Check {
    let s = token_prf("blue fin", "blue sperm whale", &NormPolicy::EM);
    ensure(close(s.f1, 0.4, 1e-12), || {
        format!("expected F1 0.4, got {}", s.f1)
    })?;
    ensure(threshold_judge(&s, Threshold::new(0.3).unwrap()), || {
        "rejected at 0.3".into()
    })?;
    ensure(!threshold_judge(&s, Threshold::new(0.5).unwrap()), || {
        "accepted at 0.5".into()
    })?;

    // A verdict flips between grid thresholds t1 < t2 only if its F1 lies in
    // [t1, t2); with no observed F1 there the sweep rows must coincide.
    let words = ["a", "b", "c", "d", "e", "f"];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grid: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
    let phrase = |rng: &mut ChaCha8Rng| {
        let n = rng.gen_range(1..5);
        (0..n)
            .map(|_| words[rng.gen_range(0..words.len())])
            .collect::<Vec<_>>()
            .join(" ")
    };
    for corpus in 0..200 {
        let n = rng.gen_range(1..25);
        let recs: Vec<(f64, bool)> = (0..n)
            .map(|_| {
                let (c, r) = (phrase(&mut rng), phrase(&mut rng));
                (token_prf(&c, &r, &NormPolicy::EM).f1, rng.gen())
            })
            .collect();
        let rows = threshold_sweep(&recs, &grid).unwrap();
        for k in 1..grid.len() {
            let (t1, t2) = (grid[k - 1], grid[k]);
            if recs.iter().any(|&(f, _)| f >= t1 && f < t2) {
                continue;
            }
            let (a, b) = (&rows[k - 1], &rows[k]);
            ensure(a.accuracy == b.accuracy && a.macro_f1 == b.macro_f1, || {
                format!("corpus {corpus}: sweep changed on [{t1}, {t2}) with no F1 there")
            })?;
        }
    }
    Ok("F1=0.4 correct at 0.3, incorrect at 0.5; sweep piecewise-constant on 200 corpora".into())
}

fn pairwise_ranking() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for table in 0..200 {
        let n = rng.gen_range(2..=6);
        // Coarse grid so that ties occur.
        let rate = |rng: &mut ChaCha8Rng| rng.gen_range(0..=10) as f64 / 10.0;
        let human: Vec<f64> = (0..n).map(|_| rate(&mut rng)).collect();
        let metric: Vec<f64> = (0..n).map(|_| rate(&mut rng)).collect();
        let got = pairwise_ranking_accuracy(&rate_table(&human, &metric), "m").unwrap();
        let want = brute_force_pairwise(&human, &metric);
        ensure(got == want, || {
            format!("table {table}: {got} != oracle {want}")
        })?;
    }
    let h = [0.9, 0.5, 0.1, 0.3];
    ensure(
        pairwise_ranking_accuracy(&rate_table(&h, &h), "m").unwrap() == 1.0,
        || "identical rates did not give 1.0".into(),
    )?;
    ensure(
        pairwise_ranking_accuracy(&rate_table(&[0.8, 0.2], &[0.2, 0.8]), "m").unwrap() == 0.0,
        || "reversed pair did not give 0.0".into(),
    )?;
    Ok("200 random tables (N<=6) equal the brute-force oracle exactly; trivial cases hold".into())
}

fn rate_table(human: &[f64], metric: &[f64]) -> RankingInput {
    let name = |i: usize| format!("model{i}");
    RankingInput {
        human: human
            .iter()
            .enumerate()
            .map(|(i, r)| (name(i), *r))
            .collect(),
        metrics: BTreeMap::from([(
            "m".to_string(),
            metric
                .iter()
                .enumerate()
                .map(|(i, r)| (name(i), *r))
                .collect(),
        )]),
    }
}

fn linear_model() -> Check {
    let cfg = TrainConfig::default();
    for seed in 0..10u64 {
        let (xs, ys) = gaussian_blobs(20, 1.5, 0.8, seed);
        let data: Vec<_> = xs
            .iter()
            .map(|x| SparseVector::from_dense(x))
            .zip(ys.iter().copied())
            .collect();
        let model = train(&data, 2, &cfg).unwrap();
        let oracle = DenseLogReg::fit(&xs, &ys, 2, cfg.l2_penalty, 0.5, 20_000);
        for (x, (sx, _)) in xs.iter().zip(&data) {
            ensure(model.predict(sx).unwrap() == oracle.predict(x), || {
                format!("instance {seed}: disagreement at {x:?}")
            })?;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let seven: Vec<(SparseVector, usize)> = (0..70)
        .map(|i| {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            (SparseVector::from_dense(&x), i % 7)
        })
        .collect();
    let (xs, ys) = gaussian_blobs(20, 1.5, 0.8, 0);
    let blobs: Vec<_> = xs
        .iter()
        .map(|x| SparseVector::from_dense(x))
        .zip(ys)
        .collect();
    let models = [
        train(&blobs, 2, &cfg).unwrap(),
        train(&seven, 7, &cfg).unwrap(),
    ];
    for i in 0..100_000 {
        let m = &models[i % 2];
        let scale = [1.0, 100.0, 1e6][i % 3];
        let x: Vec<f64> = (0..m.feature_dim())
            .map(|_| scale * rng.gen_range(-1.0..1.0))
            .collect();
        let p = m.predict_proba(&SparseVector::from_dense(&x)).unwrap();
        let sum: f64 = p.iter().sum();
        ensure(close(sum, 1.0, 1e-9), || {
            format!("probabilities sum to {sum} at {x:?}")
        })?;
    }

    let a = serde_json::to_string(&train(&seven, 7, &cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&train(&seven, 7, &cfg).unwrap()).unwrap();
    ensure(a == b, || "two seeded runs differ".into())?;
    Ok(
        "10/10 instances agree with GD oracle; 1e5 probability sums within 1e-9; bit-exact reruns"
            .into(),
    )
}

fn pipeline_regression() -> Check {
    let start = Instant::now();
    let corpus = seed_corpus();
    let model = train_pedants(&corpus, &PedantsConfig::default()).map_err(|e| e.to_string())?;
    let hits = corpus
        .iter()
        .filter(|ex| Some(model.judge(ex).unwrap().correct) == ex.human_label)
        .count();
    let acc = hits as f64 / corpus.len() as f64;
    ensure(acc >= 0.90, || format!("training accuracy {acc}"))?;

    let q1 = QAExample::new(
        "Who is the president of the US in 2023?",
        &["Joe Biden"],
        "Joseph Biden",
    );
    let j = model.judge(&q1).unwrap();
    ensure(
        j.correct && j.predicted_rule == RuleLabel::R1 && j.predicted_type == QuestionType::Who,
        || format!("q1 judged {j:?}"),
    )?;
    let q2 = QAExample::new(
        "When did Joe Biden become the president of the US?",
        &["Jan 20, 2021"],
        "2021",
    );
    let j = model.judge(&q2).unwrap();
    ensure(
        !j.correct && j.predicted_rule == RuleLabel::R2 && j.predicted_type == QuestionType::When,
        || format!("q2 judged {j:?}"),
    )?;

    for ex in &corpus {
        let probe = QAExample {
            candidate: ex.references[0].clone(),
            ..ex.clone()
        };
        ensure(model.judge(&probe).unwrap().correct, || {
            format!("identical candidate rejected: {:?}", probe.candidate)
        })?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!(
        "training accuracy {acc:.3}; q1 correct/R1/who; q2 incorrect/R2/when; {} identical candidates correct; {secs:.2}s",
        corpus.len()
    ))
}

const TEMPLATES: [(&str, &str, &str); 6] = [
    ("Who wrote Hamlet?", "William Shakespeare", "Shakespeare"),
    ("When did World War II end?", "September 2, 1945", "1945"),
    ("Where is the Eiffel Tower?", "Paris, France", "in Paris"),
    ("How many legs does a spider have?", "8", "eight"),
    ("Which planet is largest?", "Jupiter", "Saturn"),
    ("What is the capital of Japan?", "Tokyo", "Tokyo, Japan"),
];

fn write_synthetic(path: &Path, n: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    let mut text = String::from("# synthetic benchmark\n");
    for i in 0..n {
        let (q, r, c) = TEMPLATES[rng.gen_range(0..TEMPLATES.len())];
        let ex = QAExample::new(q, &[r], &format!("{c} {}", i % 97));
        text.push_str(&serde_json::to_string(&ex).unwrap());
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

/// Runs `pedants judge` and returns (seconds, output lines, peak RSS KiB).
fn run_judge(
    dataset: &Path,
    model: &Path,
    out: &Path,
) -> Result<(f64, usize, Option<u64>), String> {
    let start = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_pedants"))
        .args(["judge", "--workers", "2", "--dataset"])
        .arg(dataset)
        .arg("--model")
        .arg(model)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let stderr = String::from_utf8_lossy(&o.stderr);
    ensure(o.status.success(), || format!("judge failed: {stderr}"))?;
    let lines = std::fs::read_to_string(out).unwrap().lines().count();
    let rss = stderr
        .split("peak RSS ")
        .nth(1)
        .and_then(|s| s.split_whitespace().next())
        .and_then(|s| s.parse().ok());
    Ok((secs, lines, rss))
}

fn throughput() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let model = dir.path().join("model.json");
    let status = Command::new(env!("CARGO_BIN_EXE_pedants"))
        .args(["train", "--out"])
        .arg(&model)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(status.status.success(), || "train failed".into())?;

    let mut results = Vec::new();
    for n in [1_000, 10_000, 40_000] {
        let data = dir.path().join(format!("syn{n}.jsonl"));
        write_synthetic(&data, n);
        let (secs, lines, rss) =
            run_judge(&data, &model, &dir.path().join(format!("out{n}.jsonl")))?;
        ensure(lines == n, || format!("{n} inputs gave {lines} judgments"))?;
        results.push((n, secs, rss));
    }
    let (_, secs10k, _) = results[1];
    ensure(secs10k <= 60.0, || {
        format!("10,000 examples took {secs10k:.1}s")
    })?;

    let mut memory = String::from("peak RSS not exposed on this platform");
    if let (Some(small), Some(large)) = (results[0].2, results[2].2) {
        // A non-streaming run would hold 40x the records of the small run.
        ensure(large <= small + small / 4 + 2048, || {
            format!("peak RSS grew from {small} KiB (1k) to {large} KiB (40k)")
        })?;
        memory = format!("peak RSS {small} KiB at 1k vs {large} KiB at 40k");
    }
    Ok(format!("10,000 examples in {secs10k:.2}s; {memory}"))
}

fn likert() -> Check {
    ensure(matches!(likert_to_binary(4, 4), Ok(true)), || {
        "4 not correct".into()
    })?;
    ensure(matches!(likert_to_binary(3, 4), Ok(false)), || {
        "3 not incorrect".into()
    })?;
    ensure(matches!(likert_to_binary(5, 4), Ok(true)), || {
        "5 not correct".into()
    })?;
    ensure(
        likert_to_binary(0, 4).is_err() && likert_to_binary(6, 4).is_err(),
        || "out-of-range scores accepted".into(),
    )?;
    Ok("4 -> correct, 3 -> incorrect".into())
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("token metric exactness", token_metrics),
        ("exact match behavior", exact_match_behavior),
        ("threshold semantics", threshold_semantics),
        ("pairwise ranking", pairwise_ranking),
        ("linear model oracle", linear_model),
        ("pipeline regression", pipeline_regression),
        ("judge throughput", throughput),
        ("likert conversion", likert),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Ok(Err(why)) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", i + 1);
            }
            Err(_) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: panicked", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
