//! Pairwise surrogate objectives, their analytic gradients, and a small
//! deterministic trainer for linear and MLP scorers.
//!
//! Every objective family is a weighted sum `sum_(i,j) w_ij phi(f(x_i) - f(x_j))`
//! over (higher, lower) label pairs, with the same normalization as the
//! matching AUC. Minimizing the surrogate maximizes a relaxation of that AUC.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::{auc_report, fit_costs, AucReport, LabelSource};
use crate::types::{aggregate_labels, Dataset, DenseLayer, Mlp, ObjectiveSpec, SampledLabels, Scorer};

/// Convex, non-increasing relaxation of the misranking indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurrogateKind {
    /// `log(1 + exp(-z))`
    Logistic,
    /// `max(0, 1 - z)`
    Hinge,
}

impl SurrogateKind {
    #[inline]
    pub fn value(self, z: f64) -> f64 {
        match self {
            SurrogateKind::Logistic => (-z).max(0.0) + (-z.abs()).exp().ln_1p(),
            SurrogateKind::Hinge => (1.0 - z).max(0.0),
        }
    }

    /// Derivative in `z`; the hinge takes 0 at its kink.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            SurrogateKind::Logistic => {
                // -sigmoid(-z), written to avoid overflow
                if z >= 0.0 {
                    let e = (-z).exp();
                    -e / (1.0 + e)
                } else {
                    -1.0 / (1.0 + z.exp())
                }
            }
            SurrogateKind::Hinge => {
                if z < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// All `(hi, lo)` pairs between two index lists share one weight.
#[derive(Debug, Clone)]
struct PairBlock {
    hi: Vec<usize>,
    lo: Vec<usize>,
    weight: f64,
}

impl PairBlock {
    fn count(&self) -> u128 {
        self.hi.len() as u128 * self.lo.len() as u128
    }
}

/// The weighted pair structure of an objective on a labelled sample.
#[derive(Debug, Clone)]
pub struct PairSet {
    blocks: Vec<PairBlock>,
}

fn split_column(labels: &SampledLabels, k: usize) -> (Vec<usize>, Vec<usize>) {
    (0..labels.n()).partition(|&i| labels.get(i, k) == 1)
}

impl PairSet {
    pub fn new(labels: &SampledLabels, objective: &ObjectiveSpec) -> Result<Self> {
        objective.validate(labels.k())?;
        let per_label = |k: usize, a: f64| -> Result<PairBlock> {
            let (pos, neg) = split_column(labels, k);
            if pos.is_empty() || neg.is_empty() {
                return Err(Error::degenerate(Some(k), "need at least one positive and one negative"));
            }
            let weight = a / (pos.len() as f64 * neg.len() as f64);
            Ok(PairBlock { hi: pos, lo: neg, weight })
        };
        let blocks = match objective {
            ObjectiveSpec::PerLabel(k) => vec![per_label(*k, 1.0)?],
            ObjectiveSpec::LossAgg(a) => a
                .iter()
                .enumerate()
                .filter(|(_, &ak)| ak != 0.0)
                .map(|(k, &ak)| per_label(k, ak))
                .collect::<Result<_>>()?,
            ObjectiveSpec::LabelAgg { aggregator, costs } => {
                let ord = aggregate_labels(labels, aggregator)?;
                let costs = fit_costs(costs, ord.levels)?;
                let mut by_level = vec![Vec::new(); ord.levels];
                for (i, &v) in ord.values.iter().enumerate() {
                    by_level[v].push(i);
                }
                let mut blocks = Vec::new();
                for hi in 1..ord.levels {
                    for lo in 0..hi {
                        let c = costs.cost(hi, lo);
                        if c > 0.0 && !by_level[hi].is_empty() && !by_level[lo].is_empty() {
                            blocks.push(PairBlock { hi: by_level[hi].clone(), lo: by_level[lo].clone(), weight: c });
                        }
                    }
                }
                let mass: f64 = blocks.iter().map(|b| b.weight * b.count() as f64).sum();
                if !(mass > 0.0) {
                    return Err(Error::degenerate(None, "no discordant pair carries positive cost"));
                }
                for b in &mut blocks {
                    b.weight /= mass;
                }
                blocks
            }
        };
        Ok(Self { blocks })
    }

    pub fn pair_count(&self) -> u128 {
        self.blocks.iter().map(PairBlock::count).sum()
    }

    /// Sum of all pair weights.
    pub fn total_weight(&self) -> f64 {
        self.blocks.iter().map(|b| b.weight * b.count() as f64).sum()
    }

    /// Surrogate value and its gradient with respect to the scores, over every pair.
    pub fn evaluate(&self, scores: &[f64], phi: SurrogateKind) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; scores.len()];
        let mut loss = 0.0;
        for b in &self.blocks {
            for &i in &b.hi {
                let si = scores[i];
                let (mut l, mut gi) = (0.0, 0.0);
                for &j in &b.lo {
                    let z = si - scores[j];
                    l += phi.value(z);
                    let d = phi.derivative(z);
                    gi += d;
                    grad[j] -= b.weight * d;
                }
                loss += b.weight * l;
                grad[i] += b.weight * gi;
            }
        }
        (loss, grad)
    }

    /// Unbiased estimate from `m` pairs drawn with probability proportional to
    /// their weight.
    pub fn evaluate_sampled<R: Rng>(&self, scores: &[f64], phi: SurrogateKind, m: usize, rng: &mut R) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; scores.len()];
        let masses: Vec<f64> = self.blocks.iter().map(|b| b.weight * b.count() as f64).collect();
        let pick = WeightedIndex::new(&masses).expect("pair set has positive mass");
        let per_pair = self.total_weight() / m as f64;
        let mut loss = 0.0;
        for _ in 0..m {
            let b = &self.blocks[pick.sample(rng)];
            let i = b.hi[rng.random_range(0..b.hi.len())];
            let j = b.lo[rng.random_range(0..b.lo.len())];
            let z = scores[i] - scores[j];
            loss += per_pair * phi.value(z);
            let d = per_pair * phi.derivative(z);
            grad[i] += d;
            grad[j] -= d;
        }
        (loss, grad)
    }
}

/// Exact surrogate objective of a scorer on a dataset.
pub fn surrogate_objective(scorer: &Scorer, data: &Dataset, objective: &ObjectiveSpec, phi: SurrogateKind) -> Result<f64> {
    let pairs = PairSet::new(&data.labels, objective)?;
    let scores = scorer.score(&data.features)?;
    Ok(pairs.evaluate(&scores, phi).0)
}

/// Exact gradient of [`surrogate_objective`] in the scorer's parameter layout
/// (see [`Scorer::params`]).
pub fn surrogate_gradient(scorer: &Scorer, data: &Dataset, objective: &ObjectiveSpec, phi: SurrogateKind) -> Result<Vec<f64>> {
    if matches!(scorer, Scorer::Table(_)) {
        return Err(Error::NotTrainable);
    }
    let pairs = PairSet::new(&data.labels, objective)?;
    let scores = scorer.score(&data.features)?;
    let (_, g) = pairs.evaluate(&scores, phi);
    backprop(scorer, data, &g)
}

/// Chains a per-instance score gradient through the scorer's parameters.
pub fn backprop(scorer: &Scorer, data: &Dataset, score_grad: &[f64]) -> Result<Vec<f64>> {
    let x = &data.features;
    match scorer {
        Scorer::Table(_) => Err(Error::NotTrainable),
        Scorer::Linear { weights, .. } => {
            let d = weights.len();
            let mut g = vec![0.0; d + 1];
            for (i, &gi) in score_grad.iter().enumerate() {
                if gi == 0.0 {
                    continue;
                }
                for (gk, xk) in g[..d].iter_mut().zip(x.row(i)) {
                    *gk += gi * xk;
                }
                g[d] += gi;
            }
            Ok(g)
        }
        Scorer::Mlp(mlp) => {
            let mut g = vec![0.0; mlp.num_params()];
            let offsets: Vec<usize> = mlp
                .layers
                .iter()
                .scan(0, |at, l| {
                    let o = *at;
                    *at += l.weights.len() + l.bias.len();
                    Some(o)
                })
                .collect();
            let last = mlp.layers.len() - 1;
            for (i, &gi) in score_grad.iter().enumerate() {
                if gi == 0.0 {
                    continue;
                }
                let input = x.row(i);
                let trace = mlp.forward_trace(input);
                let mut delta = vec![gi];
                for l in (0..=last).rev() {
                    let layer = &mlp.layers[l];
                    let act: Vec<f64> = if l == 0 {
                        input.to_vec()
                    } else {
                        trace[l - 1].iter().map(|v| v.max(0.0)).collect()
                    };
                    let (wg, bg) = g[offsets[l]..offsets[l] + layer.weights.len() + layer.bias.len()]
                        .split_at_mut(layer.weights.len());
                    for (o, &dl) in delta.iter().enumerate() {
                        if dl == 0.0 {
                            continue;
                        }
                        for (w, a) in wg[o * layer.inputs..(o + 1) * layer.inputs].iter_mut().zip(&act) {
                            *w += dl * a;
                        }
                        bg[o] += dl;
                    }
                    if l > 0 {
                        let prev = &trace[l - 1];
                        delta = (0..layer.inputs)
                            .map(|inp| {
                                if prev[inp] <= 0.0 {
                                    return 0.0;
                                }
                                delta
                                    .iter()
                                    .enumerate()
                                    .map(|(o, dl)| layer.weights[o * layer.inputs + inp] * dl)
                                    .sum()
                            })
                            .collect();
                    }
                }
            }
            Ok(g)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub const fn adam() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelSpec {
    Linear,
    /// Hidden layer widths; the output layer is added automatically.
    Mlp(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: ModelSpec,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Pairs per step; objectives with more pairs are subsampled.
    pub pair_budget: usize,
    pub seed: u64,
    pub objective: ObjectiveSpec,
    pub surrogate: SurrogateKind,
}

impl TrainConfig {
    pub fn new(objective: ObjectiveSpec) -> Self {
        Self {
            model: ModelSpec::Linear,
            optimizer: Optimizer::adam(),
            learning_rate: 0.01,
            epochs: 100,
            pair_budget: 1_000_000,
            seed: 0,
            objective,
            surrogate: SurrogateKind::Logistic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be finite and non-negative"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.pair_budget == 0 {
            return Err(Error::invalid("pair budget must be positive"));
        }
        if let ModelSpec::Mlp(h) = &self.model {
            if h.contains(&0) {
                return Err(Error::invalid("hidden layers must be non-empty"));
            }
        }
        Ok(())
    }
}

const INIT_STREAM: u64 = 10;
const PAIR_STREAM: u64 = 11;

/// The untrained scorer for `d` features: zero linear weights, or an MLP drawn
/// uniformly from `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
pub fn init_scorer(d: usize, config: &TrainConfig) -> Scorer {
    match &config.model {
        ModelSpec::Linear => Scorer::Linear { weights: vec![0.0; d], bias: 0.0 },
        ModelSpec::Mlp(hidden) => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(INIT_STREAM);
            let mut layers = Vec::new();
            let mut inputs = d;
            for &outputs in hidden.iter().chain(std::iter::once(&1)) {
                let bound = 1.0 / (inputs as f64).sqrt();
                let mut draw = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.random_range(-bound..=bound)).collect() };
                let weights = draw(outputs * inputs);
                let bias = draw(outputs);
                layers.push(DenseLayer { inputs, outputs, weights, bias });
                inputs = outputs;
            }
            Scorer::Mlp(Mlp { layers })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Surrogate value at the start of the epoch (estimated when subsampling).
    pub loss: f64,
    pub train: AucReport,
    pub eval: Option<AucReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub scorer: Scorer,
    pub trace: Vec<EpochRecord>,
}

pub fn train(data: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with_eval(data, None, config)
}

/// One gradient step per epoch. Runs are deterministic given the seed.
pub fn train_with_eval(data: &Dataset, eval: Option<&Dataset>, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let pairs = PairSet::new(&data.labels, &config.objective)?;
    let full = pairs.pair_count() <= config.pair_budget as u128;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(PAIR_STREAM);

    let mut scorer = init_scorer(data.features.d(), config);
    let mut params = scorer.params()?;
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let scores = scorer.score(&data.features)?;
        let (loss, score_grad) = if full {
            pairs.evaluate(&scores, config.surrogate)
        } else {
            pairs.evaluate_sampled(&scores, config.surrogate, config.pair_budget, &mut rng)
        };
        let train = auc_report(&scores, LabelSource::Sampled(&data.labels))?;
        let eval_report = match eval {
            Some(e) => Some(auc_report(&scorer.score(&e.features)?, LabelSource::Sampled(&e.labels))?),
            None => None,
        };
        trace.push(EpochRecord { epoch, loss, train, eval: eval_report });

        let grad = backprop(&scorer, data, &score_grad)?;
        let lr = config.learning_rate;
        match config.optimizer {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(&grad) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let t = (epoch + 1) as i32;
                let (c1, c2) = (1.0 - beta1.powi(t), 1.0 - beta2.powi(t));
                for ((p, g), (mi, vi)) in params.iter_mut().zip(&grad).zip(m.iter_mut().zip(v.iter_mut())) {
                    *mi = beta1 * *mi + (1.0 - beta1) * g;
                    *vi = beta2 * *vi + (1.0 - beta2) * g * g;
                    *p -= lr * (*mi / c1) / ((*vi / c2).sqrt() + eps);
                }
            }
        }
        scorer.set_params(&params)?;
    }
    Ok(TrainOutcome { scorer, trace })
}
