//! AUC objectives in empirical and population form, Pareto dominance, and the
//! balance diagnostics (difference and minimum of per-label AUCs).
//!
//! Conventions:
//!
//! * Ties score one half and are detected with exact float equality.
//! * Empirical sums run over ordered pairs of *distinct* rows.
//! * Population sums treat the rows as a uniform distribution and draw the two
//!   instances of a pair independently, so `i == j` pairs are included (where a
//!   tie contributes one half).
//! * Multipartite AUC is normalized by the total cost mass of discordant pairs,
//!   which keeps it in `[0, 1]`.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::types::{
    aggregate_distribution, aggregate_labels, Aggregator, ClassProbTable, CostMatrix, EtaTable,
    JointLabelModel, ObjectiveSpec, OrdinalLabels, SampledLabels,
};

/// `1(z > 0) + 1/2 * 1(z = 0)`.
#[inline]
pub fn heaviside(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else if z == 0.0 {
        0.5
    } else {
        0.0
    }
}

/// `H(a - b)` without the subtraction, so infinite sentinels tie with each other.
#[inline]
pub fn pair_credit(a: f64, b: f64) -> f64 {
    if a > b {
        1.0
    } else if a == b {
        0.5
    } else {
        0.0
    }
}

fn check_scores(scores: &[f64], n: usize) -> Result<()> {
    if scores.len() != n {
        return Err(Error::invalid(format!(
            "{} scores for {n} instances",
            scores.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    Ok(())
}

/// Indices sorted by ascending score, plus the boundaries of tie groups.
fn tie_groups(scores: &[f64]) -> (Vec<usize>, Vec<std::ops::Range<usize>>) {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));
    let mut groups = Vec::new();
    let mut start = 0;
    for pos in 1..=order.len() {
        if pos == order.len() || scores[order[pos]] != scores[order[start]] {
            groups.push(start..pos);
            start = pos;
        }
    }
    (order, groups)
}

/// Empirical bipartite AUC: the fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half.
pub fn bipartite_auc_empirical(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_scores(scores, labels.len())?;
    let pos = labels.iter().filter(|&&y| y == 1).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::degenerate(None, "need at least one positive and one negative"));
    }
    let (order, groups) = tie_groups(scores);
    // twice the number of correctly ranked pairs, so ties stay integral
    let mut twice: u64 = 0;
    let mut neg_below: u64 = 0;
    for g in groups {
        let (mut p, mut q) = (0u64, 0u64);
        for &i in &order[g] {
            if labels[i] == 1 {
                p += 1;
            } else {
                q += 1;
            }
        }
        twice += 2 * p * neg_below + p * q;
        neg_below += q;
    }
    Ok(twice as f64 * 0.5 / (pos * neg) as f64)
}

/// Population bipartite AUC of a class-probability column under the uniform
/// measure over rows:
/// `sum_{i,j} eta_i (1 - eta_j) H(f_i - f_j) / (sum eta * sum (1 - eta))`.
pub fn bipartite_auc_population(scores: &[f64], eta: &[f64]) -> Result<f64> {
    check_scores(scores, eta.len())?;
    let mass_pos: f64 = eta.iter().sum();
    let mass_neg: f64 = eta.iter().map(|e| 1.0 - e).sum();
    if mass_pos <= 0.0 || mass_neg <= 0.0 {
        return Err(Error::degenerate(None, "class prior is 0 or 1"));
    }
    let (order, groups) = tie_groups(scores);
    let mut total = 0.0;
    let mut neg_below = 0.0;
    for g in groups {
        let members = &order[g];
        let p: f64 = members.iter().map(|&i| eta[i]).sum();
        let q: f64 = members.iter().map(|&i| 1.0 - eta[i]).sum();
        total += p * neg_below + 0.5 * p * q;
        neg_below += q;
    }
    Ok(total / (mass_pos * mass_neg))
}

/// Labels for a multipartite AUC: observed ordinal values or a per-instance
/// class-probability table.
#[derive(Debug, Clone, Copy)]
pub enum MultipartiteTarget<'a> {
    Ordinal(&'a OrdinalLabels),
    Distribution(&'a ClassProbTable),
}

fn check_cost_size(costs: &CostMatrix, levels: usize) -> Result<()> {
    if costs.size() < levels {
        return Err(Error::InvalidCosts(format!(
            "cost matrix covers {} levels, labels use {levels}",
            costs.size()
        )));
    }
    Ok(())
}

/// Cost-weighted AUC over ordinal labels, normalized by the cost mass of all
/// pairs with `y_i > y_j`.
pub fn multipartite_auc(scores: &[f64], target: MultipartiteTarget<'_>, costs: &CostMatrix) -> Result<f64> {
    match target {
        MultipartiteTarget::Ordinal(labels) => multipartite_auc_ordinal(scores, labels, costs),
        MultipartiteTarget::Distribution(table) => {
            check_scores(scores, table.n())?;
            let obj = PairwiseObjective::multipartite(table, costs)?;
            Ok(obj.evaluate(scores))
        }
    }
}

fn multipartite_auc_ordinal(scores: &[f64], labels: &OrdinalLabels, costs: &CostMatrix) -> Result<f64> {
    check_scores(scores, labels.values.len())?;
    let levels = labels.levels;
    check_cost_size(costs, levels)?;
    if let Some(&bad) = labels.values.iter().find(|&&v| v >= levels) {
        return Err(Error::invalid(format!("ordinal value {bad} outside {levels} levels")));
    }
    let mut counts = vec![0.0f64; levels];
    for &v in &labels.values {
        counts[v] += 1.0;
    }
    let mut mass = 0.0;
    for hi in 1..levels {
        for lo in 0..hi {
            mass += costs.cost(hi, lo) * counts[hi] * counts[lo];
        }
    }
    if !(mass > 0.0) {
        return Err(Error::degenerate(None, "no discordant pair carries positive cost"));
    }

    // sweep tie groups upward, tracking the level histogram below the group
    let (order, groups) = tie_groups(scores);
    let mut below = vec![0.0f64; levels];
    let mut in_group = vec![0.0f64; levels];
    let mut total = 0.0;
    for g in groups {
        in_group.iter_mut().for_each(|c| *c = 0.0);
        for &i in &order[g.clone()] {
            in_group[labels.values[i]] += 1.0;
        }
        for hi in 1..levels {
            if in_group[hi] == 0.0 {
                continue;
            }
            for lo in 0..hi {
                let c = costs.cost(hi, lo);
                total += c * in_group[hi] * below[lo] + 0.5 * c * in_group[hi] * in_group[lo];
            }
        }
        for (b, g) in below.iter_mut().zip(&in_group) {
            *b += g;
        }
    }
    Ok(total / mass)
}

/// A population ranking objective written as `sum_{i,j} w_ij H(f_i - f_j)`
/// over ordered instance pairs (including `i == j`).
///
/// Every population AUC in this crate reduces to this form, which is what the
/// exhaustive weak-order search maximizes.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseObjective {
    n: usize,
    weights: Vec<f64>,
}

impl PairwiseObjective {
    /// Raw weights, row-major `n x n`.
    pub fn from_weights(weights: Vec<f64>, n: usize) -> Result<Self> {
        if weights.len() != n * n {
            return Err(Error::invalid("pair weight matrix must be n x n"));
        }
        Ok(Self { n, weights })
    }

    /// `w_ij = eta_i (1 - eta_j) / (sum eta * sum (1 - eta))`.
    pub fn bipartite(eta: &[f64]) -> Result<Self> {
        let n = eta.len();
        let mass_pos: f64 = eta.iter().sum();
        let mass_neg: f64 = eta.iter().map(|e| 1.0 - e).sum();
        if mass_pos <= 0.0 || mass_neg <= 0.0 {
            return Err(Error::degenerate(None, "class prior is 0 or 1"));
        }
        let z = mass_pos * mass_neg;
        let mut weights = Vec::with_capacity(n * n);
        for &ei in eta {
            weights.extend(eta.iter().map(|ej| ei * (1.0 - ej) / z));
        }
        Ok(Self { n, weights })
    }

    /// `sum_k a_k AUC_k` in pair-weight form.
    pub fn loss_agg(eta: &EtaTable, a: &[f64]) -> Result<Self> {
        ObjectiveSpec::LossAgg(a.to_vec()).validate(eta.k())?;
        let n = eta.n();
        let mut weights = vec![0.0; n * n];
        for (k, &ak) in a.iter().enumerate() {
            if ak == 0.0 {
                continue;
            }
            let part = Self::bipartite(&eta.column(k)).map_err(|_| {
                Error::degenerate(Some(k), "class prior is 0 or 1")
            })?;
            for (w, p) in weights.iter_mut().zip(&part.weights) {
                *w += ak * p;
            }
        }
        Ok(Self { n, weights })
    }

    /// `w_ij = sum_{u > v} c(u, v) p_i(u) p_j(v)`, normalized to unit mass.
    pub fn multipartite(table: &ClassProbTable, costs: &CostMatrix) -> Result<Self> {
        let levels = table.levels();
        check_cost_size(costs, levels)?;
        let n = table.n();
        let mut weights = Vec::with_capacity(n * n);
        for i in 0..n {
            let pi = table.row(i);
            for j in 0..n {
                let pj = table.row(j);
                let mut w = 0.0;
                for hi in 1..levels {
                    if pi[hi] == 0.0 {
                        continue;
                    }
                    for lo in 0..hi {
                        w += costs.cost(hi, lo) * pi[hi] * pj[lo];
                    }
                }
                weights.push(w);
            }
        }
        let z: f64 = weights.iter().sum();
        if !(z > 0.0) {
            return Err(Error::degenerate(None, "no discordant pair carries positive cost"));
        }
        weights.iter_mut().for_each(|w| *w /= z);
        Ok(Self { n, weights })
    }

    /// The population form of any [`ObjectiveSpec`].
    pub fn population(model: &JointLabelModel, objective: &ObjectiveSpec) -> Result<Self> {
        objective.validate(model.k())?;
        match objective {
            ObjectiveSpec::PerLabel(k) => Self::bipartite(&model.marginals().column(*k))
                .map_err(|_| Error::degenerate(Some(*k), "class prior is 0 or 1")),
            ObjectiveSpec::LossAgg(a) => Self::loss_agg(&model.marginals(), a),
            ObjectiveSpec::LabelAgg { aggregator, costs } => {
                let table = aggregate_distribution(model, aggregator)?;
                let costs = fit_costs(costs, table.levels())?;
                Self::multipartite(&table, &costs)
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    pub fn evaluate(&self, scores: &[f64]) -> f64 {
        debug_assert_eq!(scores.len(), self.n);
        let mut total = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            let row = &self.weights[i * self.n..(i + 1) * self.n];
            for (w, &sj) in row.iter().zip(scores) {
                total += w * pair_credit(si, sj);
            }
        }
        total
    }
}

/// Adapts uniform / absolute-difference costs to the alphabet size actually in
/// use (weighted sums have data-dependent alphabets).
pub(crate) fn fit_costs(costs: &CostMatrix, levels: usize) -> Result<CostMatrix> {
    if costs.size() >= levels {
        return Ok(costs.clone());
    }
    costs.resized(levels).ok_or_else(|| {
        Error::InvalidCosts(format!(
            "cost matrix covers {} levels, labels use {levels}",
            costs.size()
        ))
    })
}

/// Where per-label information comes from.
#[derive(Debug, Clone, Copy)]
pub enum LabelSource<'a> {
    /// Observed binary labels (empirical objectives).
    Sampled(&'a SampledLabels),
    /// Class probabilities with labels independent given the instance.
    Eta(&'a EtaTable),
    /// Arbitrary joint label distribution.
    Joint(&'a JointLabelModel),
}

impl LabelSource<'_> {
    pub fn n(&self) -> usize {
        match self {
            LabelSource::Sampled(l) => l.n(),
            LabelSource::Eta(e) => e.n(),
            LabelSource::Joint(m) => m.n(),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            LabelSource::Sampled(l) => l.k(),
            LabelSource::Eta(e) => e.k(),
            LabelSource::Joint(m) => m.k(),
        }
    }
}

/// Per-label AUCs (empirical or population depending on the source).
pub fn per_label_aucs(scores: &[f64], source: LabelSource<'_>) -> Result<Vec<f64>> {
    let tag = |k: usize| move |e: Error| match e {
        Error::DegenerateLabel { reason, .. } => Error::DegenerateLabel { label: Some(k), reason },
        other => other,
    };
    match source {
        LabelSource::Sampled(labels) => (0..labels.k())
            .map(|k| bipartite_auc_empirical(scores, &labels.column(k)).map_err(tag(k)))
            .collect(),
        LabelSource::Eta(eta) => (0..eta.k())
            .map(|k| bipartite_auc_population(scores, &eta.column(k)).map_err(tag(k)))
            .collect(),
        LabelSource::Joint(model) => {
            let eta = model.marginals();
            (0..eta.k())
                .map(|k| bipartite_auc_population(scores, &eta.column(k)).map_err(tag(k)))
                .collect()
        }
    }
}

/// Loss-aggregated AUC `sum_k a_k AUC_k` (not divided by `sum a_k`).
pub fn loss_agg_auc(scores: &[f64], source: LabelSource<'_>, weights: &[f64]) -> Result<f64> {
    ObjectiveSpec::LossAgg(weights.to_vec()).validate(source.k())?;
    let aucs = per_label_aucs(scores, source)?;
    Ok(aucs.iter().zip(weights).map(|(auc, a)| a * auc).sum())
}

/// Label-aggregated AUC: aggregate the labels, then take the multipartite AUC.
pub fn label_agg_auc(
    scores: &[f64],
    source: LabelSource<'_>,
    aggregator: &Aggregator,
    costs: &CostMatrix,
) -> Result<f64> {
    match source {
        LabelSource::Sampled(labels) => {
            let ordinal = aggregate_labels(labels, aggregator)?;
            let costs = fit_costs(costs, ordinal.levels)?;
            multipartite_auc(scores, MultipartiteTarget::Ordinal(&ordinal), &costs)
        }
        LabelSource::Eta(eta) => {
            let model = JointLabelModel::ConditionallyIndependent(eta.clone());
            label_agg_auc(scores, LabelSource::Joint(&model), aggregator, costs)
        }
        LabelSource::Joint(model) => {
            let table = aggregate_distribution(model, aggregator)?;
            let costs = fit_costs(costs, table.levels())?;
            multipartite_auc(scores, MultipartiteTarget::Distribution(&table), &costs)
        }
    }
}

/// Any objective, dispatched on its spec.
pub fn objective_value(scores: &[f64], source: LabelSource<'_>, objective: &ObjectiveSpec) -> Result<f64> {
    objective.validate(source.k())?;
    match objective {
        ObjectiveSpec::PerLabel(k) => Ok(per_label_aucs(scores, source)?[*k]),
        ObjectiveSpec::LossAgg(a) => loss_agg_auc(scores, source, a),
        ObjectiveSpec::LabelAgg { aggregator, costs } => label_agg_auc(scores, source, aggregator, costs),
    }
}

/// Per-label AUCs with the two balance diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct AucReport {
    pub per_label: Vec<f64>,
    /// `|AUC_1 - AUC_2|`, only defined for two labels.
    pub diff: Option<f64>,
    pub min: f64,
}

impl AucReport {
    pub fn from_per_label(per_label: Vec<f64>) -> Self {
        let diff = (per_label.len() == 2).then(|| (per_label[0] - per_label[1]).abs());
        let min = per_label.iter().copied().fold(f64::INFINITY, f64::min);
        Self { per_label, diff, min }
    }
}

pub fn auc_report(scores: &[f64], source: LabelSource<'_>) -> Result<AucReport> {
    Ok(AucReport::from_per_label(per_label_aucs(scores, source)?))
}

/// `g` Pareto-dominates `f`: at least as good everywhere, strictly better somewhere.
pub fn pareto_dominates(g: &[f64], f: &[f64]) -> bool {
    assert_eq!(g.len(), f.len(), "dominance needs equal-length vectors");
    g.iter().zip(f).all(|(a, b)| a >= b) && g.iter().zip(f).any(|(a, b)| a > b)
}

/// Indices of candidates not dominated by any other candidate. Duplicated
/// frontier points are all kept.
pub fn pareto_front(candidates: &[Vec<f64>]) -> Vec<usize> {
    (0..candidates.len())
        .filter(|&i| {
            !candidates
                .iter()
                .enumerate()
                .any(|(j, c)| j != i && pareto_dominates(c, &candidates[i]))
        })
        .collect()
}
