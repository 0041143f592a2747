//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rankagg::bayes::{
    label_agg_bayes_scorer_sum, label_agg_uniform_cost_scorer_k2, loss_agg_bayes_scorer, partial_order_over_combos,
    product_agg_bayes_scorer, AlphaVector, Combo, ComboMethod,
};
use rankagg::bound::envelope;
use rankagg::experiments::{
    bound_sweep, gen_conflicting_pair, oracle_run, skew_sweep, train_trials, BoundSweepConfig, ConflictConfig,
    OracleConfig, SkewSweepConfig, SweepAxis, TrainTrialsConfig,
};
use rankagg::metrics::{
    bipartite_auc_empirical, bipartite_auc_population, multipartite_auc, pareto_dominates, MultipartiteTarget,
};
use rankagg::oracle::{certify_bayes, DEFAULT_BUDGET};
use rankagg::surrogate::{init_scorer, surrogate_gradient, surrogate_objective, ModelSpec, SurrogateKind, TrainConfig};
use rankagg::types::{
    Aggregator, CostMatrix, Dataset, EtaTable, InstanceSet, JointLabelModel, ObjectiveSpec, OrdinalLabels, PriorVector,
    SampledLabels,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn fixture_eta() -> EtaTable {
    let e1 = [1.0, 0.2, 0.62, 0.44, 0.56, 0.81];
    let e2 = [0.44, 0.56, 0.81, 1.0, 0.2, 0.62];
    EtaTable::from_rows(&e1.iter().zip(&e2).map(|(&a, &b)| vec![a, b]).collect::<Vec<_>>()).unwrap()
}

/// Independent population AUC: a double loop over all ordered pairs.
fn population_auc_by_pairs(scores: &[f64], eta: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            let w = eta[i] * (1.0 - eta[j]);
            let h = if scores[i] > scores[j] {
                1.0
            } else if scores[i] == scores[j] {
                0.5
            } else {
                0.0
            };
            num += w * h;
            den += w;
        }
    }
    num / den
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let eta = fixture_eta();
    let scorer = label_agg_uniform_cost_scorer_k2(&eta).unwrap();
    let f = scorer.table().unwrap().to_vec();
    let expected = [1.78571, 0.72973, 1.86380, 1.78571, 0.72973, 1.86380];
    let scores_ok = f.iter().zip(&expected).all(|(a, b)| within(*a, *b, 1e-4));

    let col = |k: usize| eta.column(k);
    let la = [bipartite_auc_population(&f, &col(0)).unwrap(), bipartite_auc_population(&f, &col(1)).unwrap()];
    let oracle_la = [population_auc_by_pairs(&f, &col(0)), population_auc_by_pairs(&f, &col(1))];
    let impl_ok = la.iter().zip(&oracle_la).all(|(a, b)| within(*a, *b, 1e-12));
    let la_ok = la.iter().all(|&v| within(v, 0.65559, 1e-4));

    // instance i is placed at rank g[i]
    let g: Vec<f64> = [4.0, 0.0, 2.0, 5.0, 1.0, 3.0].to_vec();
    let ga = [bipartite_auc_population(&g, &col(0)).unwrap(), bipartite_auc_population(&g, &col(1)).unwrap()];
    let g_ok = within(ga[0], 0.65706, 1e-4) && within(ga[1], 0.65862, 1e-4);
    let dominates = pareto_dominates(&ga, &la);
    let fast = start.elapsed() < Duration::from_secs(1);
    outcome(
        scores_ok && impl_ok && la_ok && g_ok && dominates && fast,
        format!(
            "scores within 1e-4: {scores_ok}; label-agg AUCs {:.6}/{:.6} vs 0.65559: {la_ok}; ordering AUCs {:.6}/{:.6} vs 0.65706/0.65862: {g_ok}; dominates: {dominates}; < 1 s: {fast}",
            la[0], la[1], ga[0], ga[1]
        ),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let tables = 60;
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut failures = 0;
    for t in 0..tables {
        let rows: Vec<Vec<f64>> = (0..6).map(|_| vec![rng.random_range(0.02..0.98), rng.random_range(0.02..0.98)]).collect();
        let eta = EtaTable::from_rows(&rows).unwrap();
        let model = JointLabelModel::ConditionallyIndependent(eta.clone());
        let priors = PriorVector::from_eta(&eta);
        let a = if t % 2 == 0 { vec![1.0, 1.0] } else { vec![rng.random_range(0.2..5.0), rng.random_range(0.2..5.0)] };
        let loss = certify_bayes(&loss_agg_bayes_scorer(&eta, &priors, &a).unwrap(), &model, &ObjectiveSpec::LossAgg(a)).unwrap();
        let abs = ObjectiveSpec::LabelAgg { aggregator: Aggregator::Sum, costs: CostMatrix::abs_diff(3) };
        let label = certify_bayes(&label_agg_bayes_scorer_sum(&eta), &model, &abs).unwrap();
        for c in [loss, label] {
            worst = worst.max(c.gap);
            failures += usize::from(!(c.optimal && c.gap <= 1e-12));
        }
    }
    let fast = start.elapsed() < Duration::from_secs(120);
    outcome(failures == 0 && fast, format!("{tables} tables, {failures} uncertified, largest gap {worst:.2e}, < 2 min: {fast}"))
}

fn criterion_3() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for seed in 0..6 {
        let start = Instant::now();
        let cfg = OracleConfig {
            n: 400,
            p: 3,
            seed,
            grid_max: 5,
            budget: DEFAULT_BUDGET,
            max_disagree: Some(13),
            timings: false,
        };
        let out = oracle_run(&cfg).unwrap();
        let failed: Vec<&str> = out.relations.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
        let ok = failed.is_empty() && out.sets.space.m() <= 13 && start.elapsed() < Duration::from_secs(300);
        pass &= ok;
        notes.push(format!("seed {seed}: m={} {}", out.sets.space.m(), if ok { "ok".into() } else { format!("failed {failed:?}") }));
    }
    outcome(pass, notes.join("; "))
}

fn criterion_4() -> Outcome {
    let cfg = SkewSweepConfig {
        taus: vec![1.0, 5.0],
        axis: SweepAxis::Pi2(vec![0.5, 0.6, 0.7, 0.8, 0.9, 0.95]),
        n: 100_000,
        seed: 0,
        timings: false,
    };
    let rows = skew_sweep(&cfg).unwrap();
    let mut pass = true;
    let mut notes = Vec::new();
    for pair in rows.chunks(2) {
        let (loss, label) = (&pair[0], &pair[1]);
        assert_eq!((loss.method.as_str(), label.method.as_str()), ("loss_agg", "label_agg"));
        let (dl, da, pi2) = (loss.diff.unwrap(), label.diff.unwrap(), loss.pi2.unwrap());
        if pi2 >= 0.7 - 0.005 {
            pass &= dl >= da - 0.01;
        }
        notes.push(format!("tau={} pi2={pi2:.3}: {dl:.4} vs {da:.4}", loss.tau.unwrap()));
    }
    let last = &rows[rows.len() - 2..];
    let strict = last[0].diff.unwrap() >= last[1].diff.unwrap() + 0.01;
    outcome(pass && strict, format!("most skewed tau=5 margin {:.4}; {}", last[0].diff.unwrap() - last[1].diff.unwrap(), notes.join(", ")))
}

const C00: Combo = [0, 0];
const C10: Combo = [1, 0];
const C01: Combo = [0, 1];
const C11: Combo = [1, 1];

/// Hand-written ranks of the four combinations for each panel.
fn panel_rank(panel: char, c: Combo) -> u8 {
    match (panel, c) {
        (_, C00) => 0,
        ('a', C01) | ('b', C10) => 1,
        ('a', C10) | ('b', C01) => 2,
        ('a' | 'b', C11) => 3,
        ('c', C10 | C01) => 1,
        ('c', C11) => 2,
        ('d', C10 | C01) => 0,
        ('d', C11) => 1,
        _ => unreachable!(),
    }
}

fn panel_pairs(panel: char) -> Vec<(Combo, Combo)> {
    let all = [C00, C10, C01, C11];
    let mut out = Vec::new();
    for lo in all {
        for hi in all {
            if panel_rank(panel, lo) < panel_rank(panel, hi) {
                out.push((lo, hi));
            }
        }
    }
    out.sort();
    out
}

fn order_matches(scores: &[f64], combos: &[Combo], panel: char) -> bool {
    (0..scores.len()).all(|i| {
        (0..scores.len()).all(|j| {
            let expect = panel_rank(panel, combos[i]).cmp(&panel_rank(panel, combos[j]));
            scores[i].partial_cmp(&scores[j]) == Some(expect)
        })
    })
}

fn criterion_5() -> Outcome {
    let all = [C00, C10, C01, C11];
    let weights = [[1.0, 1.0], [1.0, 2.0], [2.0, 1.0], [1.0, 3.0], [5.0, 1.0]];
    let (mut tables, mut loss_checks, mut bad) = (0usize, 0usize, Vec::new());
    for n in 1..=6u32 {
        for code in 0..4usize.pow(n) {
            let combos: Vec<Combo> = (0..n).map(|i| all[code / 4usize.pow(i) % 4]).collect();
            let rows: Vec<Vec<f64>> = combos.iter().map(|c| vec![f64::from(c[0]), f64::from(c[1])]).collect();
            let eta = EtaTable::from_rows(&rows).unwrap();
            tables += 1;
            let sum = label_agg_bayes_scorer_sum(&eta);
            if !order_matches(sum.table().unwrap(), &combos, 'c') {
                bad.push(format!("sum {combos:?}"));
            }
            let prod = product_agg_bayes_scorer(&JointLabelModel::ConditionallyIndependent(eta.clone()));
            if !order_matches(prod.table().unwrap(), &combos, 'd') {
                bad.push(format!("product {combos:?}"));
            }
            let priors = PriorVector::from_eta(&eta);
            for a in weights {
                let Ok(alpha) = AlphaVector::from_priors(&priors, &a) else { continue };
                let panel = match alpha.0[0].partial_cmp(&alpha.0[1]) {
                    Some(std::cmp::Ordering::Greater) => 'a',
                    Some(std::cmp::Ordering::Less) => 'b',
                    _ => continue,
                };
                let s = loss_agg_bayes_scorer(&eta, &priors, &a).unwrap();
                loss_checks += 1;
                if !order_matches(s.table().unwrap(), &combos, panel) {
                    bad.push(format!("loss-agg {a:?} {combos:?}"));
                }
            }
        }
    }
    let sorted = |m: ComboMethod| {
        let mut v = partial_order_over_combos(&m).unwrap();
        v.sort();
        v
    };
    let combos_ok = sorted(ComboMethod::LossAgg(AlphaVector(vec![3.0, 1.0]))) == panel_pairs('a')
        && sorted(ComboMethod::LossAgg(AlphaVector(vec![1.0, 3.0]))) == panel_pairs('b')
        && sorted(ComboMethod::LabelAggSum) == panel_pairs('c')
        && sorted(ComboMethod::LabelAggProduct) == panel_pairs('d')
        && panel_pairs('a').contains(&(C01, C10))
        && panel_pairs('b').contains(&(C10, C01));
    outcome(
        bad.is_empty() && combos_ok,
        format!("{tables} tables, {loss_checks} loss-agg orders, {} mismatches {:?}, combo orders: {combos_ok}", bad.len(), bad.iter().take(3).collect::<Vec<_>>()),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let cfg = BoundSweepConfig { ks: vec![2, 4, 8, 16], n: 5, c: 0.2, seed: 0, tables: 100, timings: false };
    let rows = bound_sweep(&cfg).unwrap();
    let tables: Vec<_> = rows.iter().filter(|r| r.stat == "table").collect();
    let violations = tables
        .iter()
        .filter(|r| [2, 4, 8].contains(&r.k.unwrap()) && r.gap.unwrap() > r.bound.unwrap())
        .count();
    let within_envelope = tables.iter().all(|r| r.bound.unwrap() <= envelope(0.2, r.k.unwrap() as usize) + 1e-12);
    let scaled: Vec<f64> = cfg
        .ks
        .iter()
        .map(|&k| {
            let gaps = tables.iter().filter(|r| r.k == Some(k as u64)).map(|r| r.gap.unwrap()).collect();
            median(gaps) * (k as f64).sqrt()
        })
        .collect();
    let hi = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    let rate_ok = hi < 3.0 * lo || hi == 0.0;
    let fast = start.elapsed() < Duration::from_secs(600);
    let positive = tables.iter().filter(|r| r.gap.unwrap() > 1e-12).count();
    outcome(
        violations == 0 && rate_ok && within_envelope && fast,
        format!(
            "{} tables, {violations} bound violations, {positive} with positive gap, median gap*sqrt(K) {scaled:?}, bounds within envelope: {within_envelope}, < 10 min: {fast}",
            tables.len()
        ),
    )
}

fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
    loop {
        let x: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<u8> = (0..n * 2).map(|_| u8::from(rng.random::<bool>())).collect();
        let labels = SampledLabels::new(y, n, 2).unwrap();
        let balanced = (0..2).all(|k| {
            let pos = labels.column(k).iter().filter(|&&v| v == 1).count();
            pos > 0 && pos < n
        });
        if balanced {
            return Dataset::new(InstanceSet::new(x, n, d).unwrap(), labels).unwrap();
        }
    }
}

fn criterion_7() -> Outcome {
    let families = [
        ("per-label", ObjectiveSpec::PerLabel(0)),
        ("loss-agg", ObjectiveSpec::LossAgg(vec![1.0, 2.5])),
        ("label-agg", ObjectiveSpec::LabelAgg { aggregator: Aggregator::Sum, costs: CostMatrix::uniform(3) }),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for (name, objective) in &families {
        let mut family_worst: f64 = 0.0;
        for draw in 0..20 {
            let data = random_dataset(&mut rng, 12, 3);
            let mut cfg = TrainConfig::new(objective.clone());
            cfg.model = if draw % 2 == 0 { ModelSpec::Linear } else { ModelSpec::Mlp(vec![5, 3]) };
            cfg.seed = draw;
            let mut scorer = init_scorer(3, &cfg);
            let params: Vec<f64> = scorer.params().unwrap().iter().map(|_| rng.random_range(-1.0..1.0)).collect();
            scorer.set_params(&params).unwrap();
            let grad = surrogate_gradient(&scorer, &data, objective, SurrogateKind::Logistic).unwrap();
            let h = 1e-5;
            let mut fd = Vec::with_capacity(params.len());
            for p in 0..params.len() {
                let mut probe = scorer.clone();
                let mut q = params.clone();
                q[p] = params[p] + h;
                probe.set_params(&q).unwrap();
                let up = surrogate_objective(&probe, &data, objective, SurrogateKind::Logistic).unwrap();
                q[p] = params[p] - h;
                probe.set_params(&q).unwrap();
                let down = surrogate_objective(&probe, &data, objective, SurrogateKind::Logistic).unwrap();
                fd.push((up - down) / (2.0 * h));
            }
            let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            let err = grad.iter().zip(&fd).fold(0.0f64, |m, (g, f)| m.max((g - f).abs())) / scale;
            family_worst = family_worst.max(err);
        }
        worst = worst.max(family_worst);
        notes.push(format!("{name} {family_worst:.2e}"));
    }
    outcome(worst < 1e-5, format!("max relative error: {}", notes.join(", ")))
}

/// Standard error of an empirical AUC (Hanley and McNeil).
fn auc_standard_error(auc: f64, pos: f64, neg: f64) -> f64 {
    let q1 = auc / (2.0 - auc);
    let q2 = 2.0 * auc * auc / (1.0 + auc);
    ((auc * (1.0 - auc) + (pos - 1.0) * (q1 - auc * auc) + (neg - 1.0) * (q2 - auc * auc)) / (pos * neg)).sqrt()
}

fn criterion_8() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let n = 10_000;
        let eta: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let scores: Vec<f64> = eta.iter().map(|e| e + 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
        let labels: Vec<u8> = eta.iter().map(|&e| u8::from(rng.random::<f64>() < e)).collect();
        let pos = labels.iter().filter(|&&y| y == 1).count() as f64;
        let pop = bipartite_auc_population(&scores, &eta).unwrap();
        let emp = bipartite_auc_empirical(&scores, &labels).unwrap();
        let se = auc_standard_error(emp, pos, n as f64 - pos);
        let z = (emp - pop).abs() / se;
        pass &= z <= 3.0;
        notes.push(format!("{z:.2}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..60);
        let tied = rng.random::<bool>();
        let scores: Vec<f64> =
            (0..n).map(|_| if tied { f64::from(rng.random_range(0..4u8)) } else { rng.random::<f64>() }).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
        labels[0] = 1;
        labels[1] = 0;
        let ordinal = OrdinalLabels { values: labels.iter().map(|&y| usize::from(y)).collect(), levels: 2 };
        let multi = multipartite_auc(&scores, MultipartiteTarget::Ordinal(&ordinal), &CostMatrix::uniform(2)).unwrap();
        let bi = bipartite_auc_empirical(&scores, &labels).unwrap();
        mismatches += usize::from(multi.to_bits() != bi.to_bits());
    }
    outcome(pass && mismatches == 0, format!("population vs empirical |z| {}; binary multipartite mismatches {mismatches}/100", notes.join(", ")))
}

fn criterion_9() -> Outcome {
    let data = gen_conflicting_pair(&ConflictConfig { n: 1000, ..Default::default() }).unwrap().dataset();
    let methods = vec![
        ("label1".to_string(), ObjectiveSpec::PerLabel(0)),
        ("label2".to_string(), ObjectiveSpec::PerLabel(1)),
        ("lossagg".to_string(), ObjectiveSpec::LossAgg(vec![1.0, 1.0])),
        ("labelagg".to_string(), ObjectiveSpec::LabelAgg { aggregator: Aggregator::Sum, costs: CostMatrix::uniform(3) }),
    ];
    let mut pass = true;
    let mut notes = Vec::new();
    for pi in [0.8, 0.9] {
        let mut cfg = TrainTrialsConfig::new(methods.clone());
        cfg.trials = 25;
        cfg.seed = 9;
        cfg.resample = Some((0, pi));
        let results = train_trials(&data, &cfg).unwrap();
        let mean = |m: &str, f: &dyn Fn(&rankagg::metrics::AucReport) -> f64| {
            let v: Vec<f64> = results.iter().filter(|r| r.method == m).map(|r| f(&r.report)).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let auc1 = |m: &str| mean(m, &|r| r.per_label[0]);
        let auc2 = |m: &str| mean(m, &|r| r.per_label[1]);
        let min = |m: &str| mean(m, &|r| r.min);
        let own = ["label2", "lossagg", "labelagg"].iter().all(|m| auc1("label1") >= auc1(m))
            && ["label1", "lossagg", "labelagg"].iter().all(|m| auc2("label2") >= auc2(m));
        let balance = min("labelagg") >= min("lossagg") - 0.01;
        pass &= own && balance;
        notes.push(format!(
            "pi1={pi}: own-label best {own}, min AUC label-agg {:.4} vs loss-agg {:.4}",
            min("labelagg"),
            min("lossagg")
        ));
    }
    outcome(pass, notes.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("closed-form fixture", criterion_1),
        ("Bayes certification", criterion_2),
        ("exhaustive maximizer relations", criterion_3),
        ("skew sweep ordering", criterion_4),
        ("label dictatorship orders", criterion_5),
        ("gap bound", criterion_6),
        ("gradient correctness", criterion_7),
        ("metric cross-checks", criterion_8),
        ("directional training claims", criterion_9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = format!("criterion_{}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| id.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let out = run();
        failed += usize::from(!out.pass);
        println!(
            "{} {id} {name} ({:.1}s): {}",
            if out.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            out.detail
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
