//! Domain types shared by every other module.
//!
//! All containers are dense, row-major and immutable once built. The rows of an
//! [`InstanceSet`] carry a uniform empirical measure: population expectations
//! over instances become averages over rows (or over ordered row pairs).

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Tolerance used when checking that probability rows sum to one.
pub const PROB_TOL: f64 = 1e-9;

/// An `n x d` feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSet {
    features: Vec<f64>,
    n: usize,
    d: usize,
}

impl InstanceSet {
    pub fn new(features: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::invalid("instance set needs n >= 1 and d >= 1"));
        }
        if features.len() != n * d {
            return Err(Error::invalid(format!(
                "expected {} feature entries, got {}",
                n * d,
                features.len()
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite feature at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self { features, n, d })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("ragged feature rows"));
        }
        Self::new(rows.concat(), rows.len(), d)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.features
    }

    /// Rows picked by `indices`, in that order (repeats allowed).
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Self {
            features,
            n: indices.len(),
            d: self.d,
        }
    }
}

/// Features paired with sampled labels, row for row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: InstanceSet,
    pub labels: SampledLabels,
}

impl Dataset {
    pub fn new(features: InstanceSet, labels: SampledLabels) -> Result<Self> {
        if features.n() != labels.n() {
            return Err(Error::invalid(format!(
                "{} feature rows but {} label rows",
                features.n(),
                labels.n()
            )));
        }
        Ok(Self { features, labels })
    }

    pub fn n(&self) -> usize {
        self.features.n()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select(indices),
            labels: self.labels.select(indices),
        }
    }
}

/// An `n x K` binary label matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledLabels {
    labels: Vec<u8>,
    n: usize,
    k: usize,
}

impl SampledLabels {
    pub fn new(labels: Vec<u8>, n: usize, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("label matrix needs K >= 1"));
        }
        if labels.len() != n * k {
            return Err(Error::invalid(format!(
                "expected {} label entries, got {}",
                n * k,
                labels.len()
            )));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::invalid("labels must be 0 or 1"));
        }
        Ok(Self { labels, n, k })
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::invalid("ragged label rows"));
        }
        Self::new(rows.concat(), rows.len(), k)
    }

    /// A single label column.
    pub fn from_column(column: &[u8]) -> Result<Self> {
        Self::new(column.to_vec(), column.len(), 1)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.labels[i * self.k..(i + 1) * self.k]
    }

    pub fn get(&self, i: usize, k: usize) -> u8 {
        self.labels[i * self.k + k]
    }

    pub fn column(&self, k: usize) -> Vec<u8> {
        (0..self.n).map(|i| self.get(i, k)).collect()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.labels
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let mut labels = Vec::with_capacity(indices.len() * self.k);
        for &i in indices {
            labels.extend_from_slice(self.row(i));
        }
        Self {
            labels,
            n: indices.len(),
            k: self.k,
        }
    }

    /// The deterministic class-probability table equal to these labels.
    pub fn to_eta(&self) -> EtaTable {
        EtaTable {
            eta: self.labels.iter().map(|&y| f64::from(y)).collect(),
            n: self.n,
            k: self.k,
        }
    }
}

/// Per-instance marginal class probabilities `eta[i][k] = P(Y_k = 1 | x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaTable {
    eta: Vec<f64>,
    n: usize,
    k: usize,
}

impl EtaTable {
    pub fn new(eta: Vec<f64>, n: usize, k: usize) -> Result<Self> {
        if k == 0 || n == 0 {
            return Err(Error::invalid("eta table needs n >= 1 and K >= 1"));
        }
        if eta.len() != n * k {
            return Err(Error::invalid(format!(
                "expected {} eta entries, got {}",
                n * k,
                eta.len()
            )));
        }
        if eta.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("eta entries must lie in [0, 1]"));
        }
        Ok(Self { eta, n, k })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::invalid("ragged eta rows"));
        }
        Self::new(rows.concat(), rows.len(), k)
    }

    /// Builds a table from per-label columns (`columns[k][i]`).
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let k = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::invalid("eta columns differ in length"));
        }
        let mut eta = Vec::with_capacity(n * k);
        for i in 0..n {
            eta.extend(columns.iter().map(|c| c[i]));
        }
        Self::new(eta, n, k)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.eta[i * self.k..(i + 1) * self.k]
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.eta[i * self.k + k]
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, k)).collect()
    }

    pub fn is_deterministic(&self) -> bool {
        self.eta.iter().all(|&p| p == 0.0 || p == 1.0)
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let mut eta = Vec::with_capacity(indices.len() * self.k);
        for &i in indices {
            eta.extend_from_slice(self.row(i));
        }
        Self {
            eta,
            n: indices.len(),
            k: self.k,
        }
    }
}

/// Explicit joint label distribution: row `i` holds `P(Y = y | x_i)` for every
/// `y` in `{0,1}^K`, with label `k` stored in bit `k` of the combo index.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    probs: Vec<f64>,
    n: usize,
    k: usize,
}

/// Largest K for which explicit joint tables are materialized.
pub const MAX_EXPLICIT_K: usize = 20;

impl JointTable {
    pub fn new(probs: Vec<f64>, n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > MAX_EXPLICIT_K {
            return Err(Error::invalid(format!(
                "explicit joint tables support 1 <= K <= {MAX_EXPLICIT_K}"
            )));
        }
        let width = 1usize << k;
        if probs.len() != n * width {
            return Err(Error::invalid(format!(
                "expected {} joint entries, got {}",
                n * width,
                probs.len()
            )));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid("joint probabilities must be finite and >= 0"));
        }
        for (i, row) in probs.chunks_exact(width).enumerate() {
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > PROB_TOL {
                return Err(Error::invalid(format!(
                    "joint row {i} sums to {total}, not 1"
                )));
            }
        }
        Ok(Self { probs, n, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let width = 1usize << self.k;
        &self.probs[i * width..(i + 1) * width]
    }

    pub fn marginals(&self) -> EtaTable {
        let mut eta = Vec::with_capacity(self.n * self.k);
        for i in 0..self.n {
            let row = self.row(i);
            for k in 0..self.k {
                let p: f64 = row
                    .iter()
                    .enumerate()
                    .filter(|(combo, _)| combo >> k & 1 == 1)
                    .map(|(_, &p)| p)
                    .sum();
                eta.push(p.clamp(0.0, 1.0));
            }
        }
        EtaTable {
            eta,
            n: self.n,
            k: self.k,
        }
    }
}

/// Joint distribution of the K labels given an instance.
#[derive(Debug, Clone, PartialEq)]
pub enum JointLabelModel {
    /// Labels independent given the instance.
    ConditionallyIndependent(EtaTable),
    Explicit(JointTable),
}

impl JointLabelModel {
    pub fn n(&self) -> usize {
        match self {
            Self::ConditionallyIndependent(eta) => eta.n(),
            Self::Explicit(t) => t.n(),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Self::ConditionallyIndependent(eta) => eta.k(),
            Self::Explicit(t) => t.k(),
        }
    }

    pub fn marginals(&self) -> EtaTable {
        match self {
            Self::ConditionallyIndependent(eta) => eta.clone(),
            Self::Explicit(t) => t.marginals(),
        }
    }

    /// Expands to an explicit table using products of `eta` and `1 - eta`.
    pub fn to_explicit(&self) -> Result<JointTable> {
        match self {
            Self::Explicit(t) => Ok(t.clone()),
            Self::ConditionallyIndependent(eta) => {
                let k = eta.k();
                if k > MAX_EXPLICIT_K {
                    return Err(Error::invalid(format!(
                        "cannot expand K = {k} labels explicitly"
                    )));
                }
                let width = 1usize << k;
                let mut probs = Vec::with_capacity(eta.n() * width);
                for i in 0..eta.n() {
                    let row = eta.row(i);
                    for combo in 0..width {
                        let p: f64 = row
                            .iter()
                            .enumerate()
                            .map(|(k, &e)| if combo >> k & 1 == 1 { e } else { 1.0 - e })
                            .product();
                        probs.push(p);
                    }
                }
                Ok(JointTable {
                    probs,
                    n: eta.n(),
                    k,
                })
            }
        }
    }
}

/// Class priors `pi[k] = P(Y_k = 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorVector(pub Vec<f64>);

impl PriorVector {
    pub fn from_labels(labels: &SampledLabels) -> Self {
        let n = labels.n() as f64;
        Self(
            (0..labels.k())
                .map(|k| (0..labels.n()).map(|i| f64::from(labels.get(i, k))).sum::<f64>() / n)
                .collect(),
        )
    }

    pub fn from_eta(eta: &EtaTable) -> Self {
        let n = eta.n() as f64;
        Self(
            (0..eta.k())
                .map(|k| (0..eta.n()).map(|i| eta.get(i, k)).sum::<f64>() / n)
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Misranking costs over an ordinal alphabet `{0, ..., L}`.
///
/// `cost(hi, lo)` is the cost of ranking an instance labelled `hi` below one
/// labelled `lo`; only entries with `hi > lo` are ever read.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    size: usize,
    costs: Vec<f64>,
}

impl CostMatrix {
    /// All costs equal to one.
    pub fn uniform(size: usize) -> Self {
        Self {
            size,
            costs: vec![1.0; size * size],
        }
    }

    /// `c(hi, lo) = |hi - lo|` for `hi > lo`.
    pub fn abs_diff(size: usize) -> Self {
        let mut costs = vec![0.0; size * size];
        for hi in 0..size {
            for lo in 0..hi {
                costs[hi * size + lo] = (hi - lo) as f64;
            }
        }
        Self { size, costs }
    }

    /// `rows[hi][lo]`; entries on or above the diagonal are ignored.
    pub fn custom(rows: &[Vec<f64>]) -> Result<Self> {
        let size = rows.len();
        if rows.iter().any(|r| r.len() != size) {
            return Err(Error::InvalidCosts("cost matrix must be square".into()));
        }
        if rows.iter().flatten().any(|&c| !(c >= 0.0) || !c.is_finite()) {
            return Err(Error::InvalidCosts("costs must be finite and >= 0".into()));
        }
        Ok(Self {
            size,
            costs: rows.concat(),
        })
    }

    /// Alphabet size `L + 1`.
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn cost(&self, hi: usize, lo: usize) -> f64 {
        debug_assert!(hi > lo);
        self.costs[hi * self.size + lo]
    }

    /// Same cost rule on a different alphabet size, where the rule is generic.
    pub(crate) fn resized(&self, size: usize) -> Option<Self> {
        if *self == Self::uniform(self.size) {
            Some(Self::uniform(size))
        } else if *self == Self::abs_diff(self.size) {
            Some(Self::abs_diff(size))
        } else {
            None
        }
    }
}

/// Per-instance probability table over an ordinal alphabet of `levels` values.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProbTable {
    probs: Vec<f64>,
    n: usize,
    levels: usize,
}

impl ClassProbTable {
    pub fn new(probs: Vec<f64>, n: usize, levels: usize) -> Result<Self> {
        if levels < 2 {
            return Err(Error::invalid("class-probability table needs >= 2 levels"));
        }
        if probs.len() != n * levels {
            return Err(Error::invalid(format!(
                "expected {} class probabilities, got {}",
                n * levels,
                probs.len()
            )));
        }
        if probs.iter().any(|&p| !(p >= -PROB_TOL) || !p.is_finite()) {
            return Err(Error::invalid("class probabilities must be >= 0"));
        }
        for (i, row) in probs.chunks_exact(levels).enumerate() {
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > PROB_TOL {
                return Err(Error::invalid(format!(
                    "class-probability row {i} sums to {total}, not 1"
                )));
            }
        }
        Ok(Self { probs, n, levels })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let levels = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != levels) {
            return Err(Error::invalid("ragged class-probability rows"));
        }
        Self::new(rows.concat(), rows.len(), levels)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.probs[i * self.levels..(i + 1) * self.levels]
    }

    /// Mean level per instance, `sum_m m * p_i(m)`.
    pub fn expected_level(&self) -> Vec<f64> {
        self.probs
            .chunks_exact(self.levels)
            .map(|row| row.iter().enumerate().map(|(m, p)| m as f64 * p).sum())
            .collect()
    }
}

/// How K binary labels are fused into one ordinal label.
#[derive(Debug, Clone, PartialEq)]
pub enum Aggregator {
    Sum,
    Product,
    /// `sum_k alpha_k y_k` with strictly positive `alpha`.
    WeightedSum(Vec<f64>),
}

impl Aggregator {
    pub fn validate(&self, k: usize) -> Result<()> {
        if let Aggregator::WeightedSum(alpha) = self {
            if alpha.len() != k {
                return Err(Error::invalid(format!(
                    "weighted aggregation needs {k} weights, got {}",
                    alpha.len()
                )));
            }
            if alpha.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
                return Err(Error::invalid("aggregation weights must be > 0"));
            }
        }
        Ok(())
    }

    fn raw_value(&self, y: impl Iterator<Item = u8> + Clone) -> f64 {
        match self {
            Aggregator::Sum => y.map(f64::from).sum(),
            Aggregator::Product => {
                if y.clone().all(|v| v == 1) {
                    1.0
                } else {
                    0.0
                }
            }
            Aggregator::WeightedSum(alpha) => {
                alpha.iter().zip(y).map(|(a, v)| a * f64::from(v)).sum()
            }
        }
    }
}

/// Ordinal labels on the alphabet `{0, ..., levels - 1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrdinalLabels {
    pub values: Vec<usize>,
    pub levels: usize,
}

/// Which objective to evaluate or train.
#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveSpec {
    /// Bipartite AUC of a single label (zero-based index).
    PerLabel(usize),
    /// `sum_k a_k AUC_k` with `a_k > 0`.
    LossAgg(Vec<f64>),
    /// Multipartite AUC on the aggregated label.
    LabelAgg {
        aggregator: Aggregator,
        costs: CostMatrix,
    },
}

impl ObjectiveSpec {
    pub fn validate(&self, k: usize) -> Result<()> {
        match self {
            ObjectiveSpec::PerLabel(idx) if *idx >= k => Err(Error::invalid(format!(
                "label index {idx} out of range for K = {k}"
            ))),
            ObjectiveSpec::PerLabel(_) => Ok(()),
            ObjectiveSpec::LossAgg(a) => {
                if a.len() != k {
                    return Err(Error::invalid(format!(
                        "loss aggregation needs {k} weights, got {}",
                        a.len()
                    )));
                }
                // a zero weight is accepted: it reduces to fewer labels
                if a.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) || a.iter().all(|&w| w == 0.0) {
                    return Err(Error::invalid("loss aggregation weights must be >= 0, not all 0"));
                }
                Ok(())
            }
            ObjectiveSpec::LabelAgg { aggregator, .. } => aggregator.validate(k),
        }
    }
}

/// Fuses each row of `labels` into an ordinal value.
///
/// `Sum` uses the alphabet `{0..K}` and `Product` uses `{0, 1}`. A weighted sum
/// is mapped onto the sorted distinct values that actually occur.
pub fn aggregate_labels(labels: &SampledLabels, aggregator: &Aggregator) -> Result<OrdinalLabels> {
    aggregator.validate(labels.k())?;
    let k = labels.k();
    match aggregator {
        Aggregator::Sum => Ok(OrdinalLabels {
            values: (0..labels.n())
                .map(|i| labels.row(i).iter().map(|&y| usize::from(y)).sum())
                .collect(),
            levels: k + 1,
        }),
        Aggregator::Product => Ok(OrdinalLabels {
            values: (0..labels.n())
                .map(|i| usize::from(labels.row(i).iter().all(|&y| y == 1)))
                .collect(),
            levels: 2,
        }),
        Aggregator::WeightedSum(_) => {
            let raw: Vec<f64> = (0..labels.n())
                .map(|i| aggregator.raw_value(labels.row(i).iter().copied()))
                .collect();
            let alphabet = dense_alphabet(raw.iter().copied());
            Ok(OrdinalLabels {
                values: raw.iter().map(|v| alphabet[&v.to_bits()]).collect(),
                levels: alphabet.len().max(1),
            })
        }
    }
}

/// Maps non-negative values to their rank among the sorted distinct values.
fn dense_alphabet(values: impl Iterator<Item = f64>) -> BTreeMap<u64, usize> {
    // bit patterns of non-negative floats sort like the floats themselves
    let mut map: BTreeMap<u64, usize> = values.map(|v| (v.to_bits(), 0)).collect();
    for (rank, slot) in map.values_mut().enumerate() {
        *slot = rank;
    }
    map
}

/// Per-instance distribution of the aggregated label.
///
/// Independent models aggregated by `Sum` use the Poisson-binomial recursion, so
/// large K stays cheap; everything else goes through the explicit joint table.
/// For `WeightedSum` the alphabet is every value achievable by some label combo.
pub fn aggregate_distribution(model: &JointLabelModel, aggregator: &Aggregator) -> Result<ClassProbTable> {
    aggregator.validate(model.k())?;
    let n = model.n();
    let k = model.k();
    if let (JointLabelModel::ConditionallyIndependent(eta), Aggregator::Sum) = (model, aggregator) {
        let mut probs = Vec::with_capacity(n * (k + 1));
        for i in 0..n {
            probs.extend(poisson_binomial(eta.row(i)));
        }
        return ClassProbTable::new(probs, n, k + 1);
    }

    let joint = model.to_explicit()?;
    let width = 1usize << k;
    let combo_value = |combo: usize| aggregator.raw_value((0..k).map(move |b| (combo >> b & 1) as u8));
    let (levels, combo_level): (usize, Vec<usize>) = match aggregator {
        Aggregator::Sum => (k + 1, (0..width).map(|c| c.count_ones() as usize).collect()),
        Aggregator::Product => (2, (0..width).map(|c| usize::from(c == width - 1)).collect()),
        Aggregator::WeightedSum(_) => {
            let alphabet = dense_alphabet((0..width).map(combo_value));
            (
                alphabet.len(),
                (0..width).map(|c| alphabet[&combo_value(c).to_bits()]).collect(),
            )
        }
    };
    let mut probs = vec![0.0; n * levels];
    for i in 0..n {
        for (combo, &p) in joint.row(i).iter().enumerate() {
            probs[i * levels + combo_level[combo]] += p;
        }
    }
    ClassProbTable::new(probs, n, levels)
}

/// Distribution of the number of successes among independent Bernoulli draws.
pub fn poisson_binomial(p: &[f64]) -> Vec<f64> {
    let mut dist = vec![0.0; p.len() + 1];
    dist[0] = 1.0;
    for (j, &q) in p.iter().enumerate() {
        for m in (0..=j + 1).rev() {
            let stay = dist[m] * (1.0 - q);
            let step = if m > 0 { dist[m - 1] * q } else { 0.0 };
            dist[m] = stay + step;
        }
    }
    dist
}

/// Fully connected layer, `outputs x inputs` weights stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.bias.iter().enumerate().map(|(o, b)| {
            let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            b + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
        }));
    }
}

/// ReLU multilayer perceptron with a scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
}

impl Mlp {
    /// Pre-activations of every layer for one input; the last entry is the score.
    pub(crate) fn forward_trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut trace = Vec::with_capacity(self.layers.len());
        let mut input: Vec<f64> = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut pre = Vec::new();
            layer.forward(&input, &mut pre);
            input = if l + 1 < self.layers.len() {
                pre.iter().map(|v| v.max(0.0)).collect()
            } else {
                pre.clone()
            };
            trace.push(pre);
        }
        trace
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        let mut a: Vec<f64> = x.to_vec();
        let mut pre = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            layer.forward(&a, &mut pre);
            if l + 1 < self.layers.len() {
                for v in pre.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            std::mem::swap(&mut a, &mut pre);
        }
        a[0]
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }
}

/// A scoring function from instances to reals.
#[derive(Debug, Clone, PartialEq)]
pub enum Scorer {
    Linear { weights: Vec<f64>, bias: f64 },
    Mlp(Mlp),
    /// One score per instance index.
    Table(Vec<f64>),
}

impl Scorer {
    /// Scores every row. Table scorers must match the row count.
    pub fn score(&self, x: &InstanceSet) -> Result<Vec<f64>> {
        match self {
            Scorer::Linear { weights, bias } => {
                if weights.len() != x.d() {
                    return Err(Error::invalid(format!(
                        "linear scorer has {} weights for {} features",
                        weights.len(),
                        x.d()
                    )));
                }
                Ok(x
                    .rows()
                    .map(|r| bias + r.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>())
                    .collect())
            }
            Scorer::Mlp(mlp) => {
                let d = mlp.layers.first().map_or(0, |l| l.inputs);
                if d != x.d() {
                    return Err(Error::invalid(format!(
                        "mlp expects {d} features, got {}",
                        x.d()
                    )));
                }
                Ok(x.rows().map(|r| mlp.score(r)).collect())
            }
            Scorer::Table(scores) => {
                if scores.len() != x.n() {
                    return Err(Error::invalid(format!(
                        "table scorer has {} entries for {} instances",
                        scores.len(),
                        x.n()
                    )));
                }
                Ok(scores.clone())
            }
        }
    }

    /// The explicit score table, for table scorers.
    pub fn table(&self) -> Option<&[f64]> {
        match self {
            Scorer::Table(s) => Some(s),
            _ => None,
        }
    }

    /// Flattened trainable parameters (weights before biases, layer by layer).
    pub fn params(&self) -> Result<Vec<f64>> {
        match self {
            Scorer::Linear { weights, bias } => {
                let mut p = weights.clone();
                p.push(*bias);
                Ok(p)
            }
            Scorer::Mlp(mlp) => {
                let mut p = Vec::with_capacity(mlp.num_params());
                for l in &mlp.layers {
                    p.extend_from_slice(&l.weights);
                    p.extend_from_slice(&l.bias);
                }
                Ok(p)
            }
            Scorer::Table(_) => Err(Error::NotTrainable),
        }
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        let expected = self.params()?.len();
        if params.len() != expected {
            return Err(Error::invalid(format!(
                "expected {expected} parameters, got {}",
                params.len()
            )));
        }
        match self {
            Scorer::Linear { weights, bias } => {
                let d = weights.len();
                weights.copy_from_slice(&params[..d]);
                *bias = params[d];
            }
            Scorer::Mlp(mlp) => {
                let mut at = 0;
                for l in &mut mlp.layers {
                    let nw = l.weights.len();
                    l.weights.copy_from_slice(&params[at..at + nw]);
                    at += nw;
                    let nb = l.bias.len();
                    l.bias.copy_from_slice(&params[at..at + nb]);
                    at += nb;
                }
            }
            Scorer::Table(_) => return Err(Error::NotTrainable),
        }
        Ok(())
    }
}
