//! Experiment drivers behind the command-line harness. Each returns result
//! rows in a fixed order, so equal inputs give byte-identical CSV output
//! regardless of thread count.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bayes::{label_agg_bayes_scorer_sum, loss_agg_bayes_scorer};
use crate::bound::bound_report;
use crate::error::{Error, Result};
use crate::io::ResultRow;
use crate::metrics::{auc_report, AucReport, LabelSource};
use crate::oracle::{maximizer_sets, MaximizerSets, RelationCheck};
use crate::plot::{Chart, Mark, Series};
use crate::surrogate::{train_with_eval, ModelSpec, Optimizer, SurrogateKind, TrainConfig};
use crate::synthgen::{gen_gaussian_bilevel, gen_sigmoid_pair, resample_indices, rho_for_prior, sigmoid, SigmoidSynthConfig, SyntheticSample};
use crate::types::{Dataset, EtaTable, InstanceSet, ObjectiveSpec, PriorVector, SampledLabels};

/// Mixes a base seed with a path of indices (splitmix64 finalizer per step).
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    path.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

fn prior(labels: &SampledLabels, k: usize) -> f64 {
    labels.column(k).iter().filter(|&&y| y == 1).count() as f64 / labels.n() as f64
}

fn elapsed_ms(start: Instant, timings: bool) -> Option<f64> {
    timings.then(|| (start.elapsed().as_secs_f64() * 1e3).round())
}

fn fill_report(row: &mut ResultRow, r: &AucReport) {
    row.auc_1 = r.per_label.first().copied();
    row.auc_2 = r.per_label.get(1).copied();
    row.diff = r.diff;
    row.min = Some(r.min);
}

/// Where the skew sweep places its points.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    Rho(Vec<f64>),
    /// Target empirical prior of the second label; the shift is solved by bisection.
    Pi2(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkewSweepConfig {
    pub taus: Vec<f64>,
    pub axis: SweepAxis,
    /// Size of the sample defining priors and of the fresh evaluation sample.
    pub n: usize,
    pub seed: u64,
    pub timings: bool,
}

/// Per-label AUCs of the two closed-form scorers on the sigmoid pair model as
/// the second label grows more skewed. Rows come in `(tau, point, method)` order.
pub fn skew_sweep(cfg: &SkewSweepConfig) -> Result<Vec<ResultRow>> {
    let points: Vec<(f64, f64)> = match &cfg.axis {
        SweepAxis::Rho(r) => cfg.taus.iter().flat_map(|&t| r.iter().map(move |&v| (t, v))).collect(),
        SweepAxis::Pi2(p) => cfg.taus.iter().flat_map(|&t| p.iter().map(move |&v| (t, v))).collect(),
    };
    let blocks: Vec<Vec<ResultRow>> = points
        .par_iter()
        .map(|&(tau, v)| -> Result<Vec<ResultRow>> {
            let start = Instant::now();
            let base = SigmoidSynthConfig { n: cfg.n, tau, rho: 0.0, seed: cfg.seed };
            let rho = match cfg.axis {
                SweepAxis::Rho(_) => v,
                SweepAxis::Pi2(_) => rho_for_prior(&base, v)?,
            };
            let train = gen_sigmoid_pair(&SigmoidSynthConfig { rho, ..base })?;
            let priors = PriorVector::from_eta(&train.eta);
            let eval = gen_sigmoid_pair(&SigmoidSynthConfig { rho, seed: derive_seed(cfg.seed, &[1]), ..base })?;
            let scorers = [
                ("loss_agg", loss_agg_bayes_scorer(&eval.eta, &priors, &[1.0, 1.0])?),
                ("label_agg", label_agg_bayes_scorer_sum(&eval.eta)),
            ];
            let mut rows = Vec::new();
            for (name, s) in scorers {
                let report = auc_report(s.table().unwrap(), LabelSource::Sampled(&eval.labels))?;
                let mut row = ResultRow {
                    experiment: "skew_sweep".into(),
                    method: name.into(),
                    seed: Some(cfg.seed),
                    stat: "point".into(),
                    n: Some(cfg.n as u64),
                    k: Some(2),
                    tau: Some(tau),
                    rho: Some(rho),
                    pi1: Some(prior(&train.labels, 0)),
                    pi2: Some(prior(&train.labels, 1)),
                    a1: Some(1.0),
                    a2: Some(1.0),
                    ..Default::default()
                };
                fill_report(&mut row, &report);
                rows.push(row);
            }
            let ms = elapsed_ms(start, cfg.timings);
            rows.iter_mut().for_each(|r| r.runtime_ms = ms);
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(blocks.into_iter().flatten().collect())
}

/// Diff-AUC against the second label's prior, one line per (method, tau).
pub fn skew_chart(rows: &[ResultRow]) -> Chart {
    let mut series: Vec<Series> = Vec::new();
    for r in rows {
        let name = format!("{} tau={}", r.method, r.tau.unwrap_or(f64::NAN));
        let point = (r.pi2.unwrap_or(f64::NAN), r.diff.unwrap_or(f64::NAN));
        match series.iter_mut().find(|s| s.name == name) {
            Some(s) => s.points.push(point),
            None => series.push(Series { name, points: vec![point], mark: Mark::Line }),
        }
    }
    Chart {
        title: "Per-label AUC difference vs skew".into(),
        x_label: "empirical prior of label 2".into(),
        y_label: "|AUC_1 - AUC_2|".into(),
        series,
        ..Default::default()
    }
}

/// Two logistic labels driven by different feature directions, so no single
/// linear scorer is optimal for both.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConflictConfig {
    pub n: usize,
    pub tau: f64,
    /// Angle between the two label directions, in degrees.
    pub angle_deg: f64,
    pub seed: u64,
}

impl Default for ConflictConfig {
    fn default() -> Self {
        Self { n: 2000, tau: 4.0, angle_deg: 90.0, seed: 0 }
    }
}

pub fn gen_conflicting_pair(cfg: &ConflictConfig) -> Result<SyntheticSample> {
    if cfg.n == 0 {
        return Err(Error::invalid("need at least one row"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x: Vec<f64> = (0..2 * cfg.n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let theta = cfg.angle_deg.to_radians();
    let w2 = [theta.cos(), theta.sin()];
    let eta: Vec<f64> = x
        .chunks(2)
        .flat_map(|r| [sigmoid(cfg.tau * r[0]), sigmoid(cfg.tau * (w2[0] * r[0] + w2[1] * r[1]))])
        .collect();
    let eta = EtaTable::new(eta, cfg.n, 2)?;
    rng.set_stream(1);
    let labels: Vec<u8> = (0..2 * cfg.n).map(|i| u8::from(rng.random::<f64>() < eta.get(i / 2, i % 2))).collect();
    Ok(SyntheticSample {
        features: InstanceSet::new(x, cfg.n, 2)?,
        eta,
        labels: SampledLabels::new(labels, cfg.n, 2)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrialsConfig {
    /// `(name, objective)` pairs, each trained separately per trial.
    pub methods: Vec<(String, ObjectiveSpec)>,
    pub surrogate: SurrogateKind,
    pub model: ModelSpec,
    pub epochs: usize,
    pub learning_rate: f64,
    pub pair_budget: usize,
    pub seed: u64,
    /// Resample so that label `k` has the given positive fraction.
    pub resample: Option<(usize, f64)>,
    pub trials: usize,
    /// Share of each trial's rows held out for evaluation.
    pub test_fraction: f64,
    pub timings: bool,
}

impl TrainTrialsConfig {
    pub fn new(methods: Vec<(String, ObjectiveSpec)>) -> Self {
        Self {
            methods,
            surrogate: SurrogateKind::Logistic,
            model: ModelSpec::Linear,
            epochs: 100,
            learning_rate: 0.05,
            pair_budget: 1_000_000,
            seed: 0,
            resample: None,
            trials: 1,
            test_fraction: 0.2,
            timings: false,
        }
    }
}

/// Held-out per-label AUCs of one trained method in one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub method: String,
    pub trial: usize,
    pub report: AucReport,
    pub runtime_ms: Option<f64>,
}

/// Runs every method on every trial. Trial `t` resamples (when asked) and
/// splits with a seed derived from `(seed, t)`; methods share that split.
pub fn train_trials(data: &Dataset, cfg: &TrainTrialsConfig) -> Result<Vec<TrialResult>> {
    if cfg.trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0) {
        return Err(Error::invalid("test fraction must be in (0, 1)"));
    }
    let jobs: Vec<(usize, usize)> = (0..cfg.trials).flat_map(|t| (0..cfg.methods.len()).map(move |m| (t, m))).collect();
    jobs.par_iter()
        .map(|&(t, m)| {
            let start = Instant::now();
            let trial_seed = derive_seed(cfg.seed, &[t as u64]);
            let mut idx = match cfg.resample {
                Some((k, pi)) => resample_indices(&data.labels, k, pi, trial_seed)?,
                None => (0..data.n()).collect(),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(trial_seed, &[1]));
            idx.shuffle(&mut rng);
            let n_test = ((idx.len() as f64) * cfg.test_fraction).round() as usize;
            let (test_idx, train_idx) = idx.split_at(n_test);
            let (train_set, test_set) = (data.select(train_idx), data.select(test_idx));
            let (name, objective) = &cfg.methods[m];
            let tc = TrainConfig {
                model: cfg.model.clone(),
                optimizer: Optimizer::adam(),
                learning_rate: cfg.learning_rate,
                epochs: cfg.epochs,
                pair_budget: cfg.pair_budget,
                seed: derive_seed(trial_seed, &[2]),
                objective: objective.clone(),
                surrogate: cfg.surrogate,
            };
            let out = train_with_eval(&train_set, None, &tc)?;
            let scores = out.scorer.score(&test_set.features)?;
            let report = auc_report(&scores, LabelSource::Sampled(&test_set.labels))?;
            Ok(TrialResult { method: name.clone(), trial: t, report, runtime_ms: elapsed_ms(start, cfg.timings) })
        })
        .collect()
}

/// Mean and standard error of a sample.
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Per-trial rows followed by `mean` and `stderr` rows per method.
pub fn train_rows(results: &[TrialResult], cfg: &TrainTrialsConfig) -> Vec<ResultRow> {
    let base = |method: &str, stat: &str| ResultRow {
        experiment: "train".into(),
        method: method.into(),
        seed: Some(cfg.seed),
        stat: stat.into(),
        k: Some(2),
        pi1: cfg.resample.filter(|r| r.0 == 0).map(|r| r.1),
        pi2: cfg.resample.filter(|r| r.0 == 1).map(|r| r.1),
        ..Default::default()
    };
    let mut rows = Vec::new();
    for r in results {
        let mut row = base(&r.method, "trial");
        row.trial = Some(r.trial as u64);
        row.k = Some(r.report.per_label.len() as u64);
        fill_report(&mut row, &r.report);
        row.runtime_ms = r.runtime_ms;
        rows.push(row);
    }
    for (name, _) in &cfg.methods {
        let mine: Vec<&TrialResult> = results.iter().filter(|r| &r.method == name).collect();
        let col = |f: &dyn Fn(&AucReport) -> Option<f64>| -> Option<Vec<f64>> { mine.iter().map(|r| f(&r.report)).collect() };
        let stats = [
            col(&|r| r.per_label.first().copied()),
            col(&|r| r.per_label.get(1).copied()),
            col(&|r| r.diff),
            col(&|r| Some(r.min)),
        ];
        for (stat, pick) in [("mean", 0usize), ("stderr", 1)] {
            let mut row = base(name, stat);
            let v: Vec<Option<f64>> = stats
                .iter()
                .map(|s| s.as_ref().map(|xs| if pick == 0 { mean_stderr(xs).0 } else { mean_stderr(xs).1 }))
                .collect();
            row.auc_1 = v[0];
            row.auc_2 = v[1];
            row.diff = v[2];
            row.min = v[3];
            rows.push(row);
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub n: usize,
    pub p: u32,
    pub seed: u64,
    pub grid_max: u32,
    pub budget: u64,
    /// Shrink `n` to the longest prefix with at most this many disagreeing rows.
    pub max_disagree: Option<usize>,
    pub timings: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    /// Instance count actually used.
    pub n: usize,
    pub sets: MaximizerSets,
    pub relations: Vec<RelationCheck>,
    pub rows: Vec<ResultRow>,
}

pub fn oracle_run(cfg: &OracleConfig) -> Result<OracleOutcome> {
    let start = Instant::now();
    let mut sample = gen_gaussian_bilevel(cfg.n, cfg.seed)?;
    let mut n = cfg.n;
    if let Some(limit) = cfg.max_disagree {
        let l = &sample.labels;
        let mut m = 0;
        let mut keep = 0;
        for i in 0..l.n() {
            m += usize::from(l.get(i, 0) != l.get(i, 1));
            if m > limit {
                break;
            }
            keep = i + 1;
        }
        if keep < n {
            n = keep;
            sample = gen_gaussian_bilevel(n, cfg.seed)?;
        }
    }
    let sets = maximizer_sets(&sample.labels, cfg.p, cfg.grid_max, cfg.budget)?;
    let relations = sets.relations();
    let ms = elapsed_ms(start, cfg.timings);

    let base = |method: &str, stat: &str| ResultRow {
        experiment: "oracle".into(),
        method: method.into(),
        seed: Some(cfg.seed),
        stat: stat.into(),
        n: Some(n as u64),
        k: Some(2),
        ..Default::default()
    };
    let with_aucs = |mut row: ResultRow, counts: (u64, u64)| {
        let (a, b) = sets.aucs(counts);
        row.auc_1 = Some(a);
        row.auc_2 = Some(b);
        row.diff = Some((a - b).abs());
        row.min = Some(a.min(b));
        row
    };
    let mut rows = Vec::new();
    for &c in &sets.attainable {
        rows.push(with_aucs(base("attainable", "point"), c));
    }
    for &c in &sets.front() {
        rows.push(with_aucs(base("front", "point"), c));
    }
    for ((a1, a2), set) in &sets.loss_agg {
        let mut row = with_aucs(base("loss_agg", "maximizer"), sets.counts_of(set.members[0]));
        row.a1 = Some(f64::from(*a1));
        row.a2 = Some(f64::from(*a2));
        row.note = format!("members={}", set.members.len());
        rows.push(row);
    }
    for (name, set) in [("label_agg", &sets.label_agg), ("label_product", &sets.label_product)] {
        let mut row = with_aucs(base(name, "maximizer"), sets.counts_of(set.members[0]));
        row.note = format!("members={}", set.members.len());
        rows.push(row);
    }
    for r in &relations {
        let mut row = base("relation", &r.name);
        row.note = if r.pass { "PASS" } else { "FAIL" }.into();
        rows.push(row);
    }
    let mut summary = base("space", "summary");
    summary.note = format!("p={} m={} hypotheses={}", cfg.p, sets.space.m(), sets.space.total());
    summary.runtime_ms = ms;
    rows.push(summary);
    Ok(OracleOutcome { n, sets, relations, rows })
}

/// Per-label AUC scatter of every attainable hypothesis, with the maximizers.
pub fn oracle_chart(rows: &[ResultRow]) -> Chart {
    let pick = |method: &str| -> Vec<(f64, f64)> {
        rows.iter()
            .filter(|r| r.method == method)
            .filter_map(|r| Some((r.auc_1?, r.auc_2?)))
            .collect()
    };
    Chart {
        title: "Per-label AUCs of all hypotheses".into(),
        x_label: "AUC label 1".into(),
        y_label: "AUC label 2".into(),
        series: vec![
            Series { name: "attainable".into(), points: pick("attainable"), mark: Mark::Points },
            Series { name: "front".into(), points: pick("front"), mark: Mark::Line },
            Series { name: "loss_agg".into(), points: pick("loss_agg"), mark: Mark::Points },
            Series { name: "label_agg".into(), points: pick("label_agg"), mark: Mark::Points },
        ],
        ..Default::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundSweepConfig {
    pub ks: Vec<usize>,
    pub n: usize,
    /// Class probabilities are drawn uniformly from `[c, 1 - c]`.
    pub c: f64,
    pub seed: u64,
    pub tables: usize,
    pub timings: bool,
}

/// Random class-probability table with entries uniform on `[c, 1 - c]`.
pub fn random_eta(n: usize, k: usize, c: f64, seed: u64) -> Result<EtaTable> {
    if !(c > 0.0 && c <= 0.5) {
        return Err(Error::invalid("c must be in (0, 0.5]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals = (0..n * k)
        .map(|_| if c == 0.5 { 0.5 } else { rng.random_range(c..=1.0 - c) })
        .collect();
    EtaTable::new(vals, n, k)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// One row per random table and a `median` row per `K` whose gap column
/// holds the median gap and whose `note` records the median of `gap * sqrt(K)`.
pub fn bound_sweep(cfg: &BoundSweepConfig) -> Result<Vec<ResultRow>> {
    if cfg.tables == 0 {
        return Err(Error::invalid("tables must be at least 1"));
    }
    let jobs: Vec<(usize, usize)> = cfg.ks.iter().flat_map(|&k| (0..cfg.tables).map(move |t| (k, t))).collect();
    let reports = jobs
        .par_iter()
        .map(|&(k, t)| {
            let start = Instant::now();
            let eta = random_eta(cfg.n, k, cfg.c, derive_seed(cfg.seed, &[k as u64, t as u64]))?;
            let r = bound_report(&eta, &vec![1.0; k])?;
            Ok((k, t, r, elapsed_ms(start, cfg.timings)))
        })
        .collect::<Result<Vec<_>>>()?;
    let base = |k: usize, stat: &str| ResultRow {
        experiment: "bound".into(),
        method: "weighted_sum".into(),
        seed: Some(cfg.seed),
        stat: stat.into(),
        n: Some(cfg.n as u64),
        k: Some(k as u64),
        ..Default::default()
    };
    let mut rows = Vec::new();
    for &(k, t, r, ms) in &reports {
        let mut row = base(k, "table");
        row.trial = Some(t as u64);
        row.gap = Some(r.empirical_gap);
        row.bound = Some(r.bound_value);
        row.note = if r.empirical_gap <= r.bound_value { "within" } else { "VIOLATION" }.into();
        row.runtime_ms = ms;
        rows.push(row);
    }
    for &k in &cfg.ks {
        let mut gaps: Vec<f64> = reports.iter().filter(|r| r.0 == k).map(|r| r.2.empirical_gap).collect();
        let mut bounds: Vec<f64> = reports.iter().filter(|r| r.0 == k).map(|r| r.2.bound_value).collect();
        let mut row = base(k, "median");
        let g = median(&mut gaps);
        row.gap = Some(g);
        row.bound = Some(median(&mut bounds));
        row.note = format!("gap_sqrt_k={}", g * (k as f64).sqrt());
        rows.push(row);
    }
    Ok(rows)
}

/// Median gap and median bound against `K` on log-log axes.
pub fn bound_chart(rows: &[ResultRow]) -> Chart {
    let med: Vec<&ResultRow> = rows.iter().filter(|r| r.stat == "median").collect();
    let pts = |f: &dyn Fn(&ResultRow) -> Option<f64>| -> Vec<(f64, f64)> {
        med.iter().filter_map(|r| Some((r.k? as f64, f(r)?))).collect()
    };
    Chart {
        title: "Gap and bound against the number of labels".into(),
        x_label: "K".into(),
        y_label: "value".into(),
        series: vec![
            Series { name: "median bound".into(), points: pts(&|r| r.bound), mark: Mark::Line },
            Series { name: "median gap".into(), points: pts(&|r| r.gap), mark: Mark::Line },
        ],
        log_x: true,
        log_y: true,
    }
}
