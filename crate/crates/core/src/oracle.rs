//! Exhaustive certification: hypothesis enumeration on deterministic two-label
//! data, maximizer sets of the competing objectives, and exact AUC
//! maximization over weak orders of a small instance set.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::PairwiseObjective;
use crate::types::{JointLabelModel, ObjectiveSpec, SampledLabels, Scorer};

/// Default cap on the number of enumerated hypotheses.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// Which labels a disagreeing row carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disagreement {
    /// Positive on the first label only.
    FirstOnly,
    /// Positive on the second label only.
    SecondOnly,
}

/// Score tables on deterministic two-label data where rows positive on both
/// labels are pinned to `p`, rows negative on both to `0`, and each
/// disagreeing row takes a value in `0..p`.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSpace {
    p: u32,
    template: Vec<f64>,
    disagree: Vec<usize>,
    kinds: Vec<Disagreement>,
}

impl HypothesisSpace {
    pub fn new(labels: &SampledLabels, p: u32) -> Result<Self> {
        if labels.k() != 2 {
            return Err(Error::invalid(format!("expected 2 labels, got {}", labels.k())));
        }
        if p < 2 {
            return Err(Error::invalid("image size must be at least 2"));
        }
        let mut template = Vec::with_capacity(labels.n());
        let mut disagree = Vec::new();
        let mut kinds = Vec::new();
        for i in 0..labels.n() {
            match (labels.get(i, 0), labels.get(i, 1)) {
                (1, 1) => template.push(f64::from(p)),
                (0, 0) => template.push(0.0),
                (y1, _) => {
                    template.push(0.0);
                    disagree.push(i);
                    kinds.push(if y1 == 1 { Disagreement::FirstOnly } else { Disagreement::SecondOnly });
                }
            }
        }
        Ok(Self { p, template, disagree, kinds })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.template.len()
    }

    /// Number of disagreeing rows.
    pub fn m(&self) -> usize {
        self.disagree.len()
    }

    pub fn disagreeing_rows(&self) -> &[usize] {
        &self.disagree
    }

    pub fn kinds(&self) -> &[Disagreement] {
        &self.kinds
    }

    /// `p^m`, saturating at `u128::MAX`.
    pub fn total(&self) -> u128 {
        (0..self.m()).try_fold(1u128, |acc, _| acc.checked_mul(u128::from(self.p))).unwrap_or(u128::MAX)
    }

    pub fn check_budget(&self, budget: u64) -> Result<u64> {
        let total = self.total();
        if total > u128::from(budget) {
            return Err(Error::BudgetExceeded { required: total, budget });
        }
        Ok(total as u64)
    }

    /// Values of the disagreeing rows for a hypothesis index; the first
    /// disagreeing row is the most significant digit.
    pub fn digits(&self, mut index: u64) -> Vec<u32> {
        let mut d = vec![0; self.m()];
        for slot in d.iter_mut().rev() {
            *slot = (index % u64::from(self.p)) as u32;
            index /= u64::from(self.p);
        }
        d
    }

    pub fn scores(&self, index: u64) -> Vec<f64> {
        let mut s = self.template.clone();
        for (&row, v) in self.disagree.iter().zip(self.digits(index)) {
            s[row] = f64::from(v);
        }
        s
    }
}

/// Every hypothesis in lexicographic order, as table scorers.
pub fn enumerate_hypotheses(
    labels: &SampledLabels,
    p: u32,
    budget: u64,
) -> Result<impl Iterator<Item = Scorer>> {
    let space = HypothesisSpace::new(labels, p)?;
    let total = space.check_budget(budget)?;
    Ok((0..total).map(move |i| Scorer::Table(space.scores(i))))
}

/// Twice the concordant pair counts of one hypothesis. Every objective in the
/// maximizer search is a fixed positive multiple of one of these integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairCounts {
    pub first: u64,
    pub second: u64,
    pub sum_label: u64,
    pub product_label: u64,
}

/// Twice the concordant count between histograms over score bins.
fn twice_concordant(hi: &[u64], lo: &[u64]) -> u64 {
    let mut below = 0;
    let mut total = 0;
    for (h, l) in hi.iter().zip(lo) {
        total += h * (2 * below + l);
        below += l;
    }
    total
}

struct Counter {
    bins: usize,
    both: u64,
    neither: u64,
}

impl Counter {
    fn counts(&self, first_only: &[u64], second_only: &[u64]) -> PairCounts {
        let bins = self.bins;
        let mut top = vec![0u64; bins];
        top[bins - 1] = self.both;
        let mut bottom = vec![0u64; bins];
        bottom[0] = self.neither;
        let add = |a: &[u64], b: &[u64]| -> Vec<u64> { a.iter().zip(b).map(|(x, y)| x + y).collect() };
        let pos1 = add(&top, first_only);
        let neg1 = add(&bottom, second_only);
        let pos2 = add(&top, second_only);
        let neg2 = add(&bottom, first_only);
        let middle = add(first_only, second_only);
        let not_top = add(&bottom, &middle);
        PairCounts {
            first: twice_concordant(&pos1, &neg1),
            second: twice_concordant(&pos2, &neg2),
            sum_label: twice_concordant(&top, &middle) + twice_concordant(&top, &bottom) + twice_concordant(&middle, &bottom),
            product_label: twice_concordant(&top, &not_top),
        }
    }
}

/// The argmax set of one objective over the hypothesis space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaximizerSet {
    /// Objective value in its exact integer form.
    pub value: u64,
    /// Hypothesis indices in ascending order.
    pub members: Vec<u64>,
}

impl MaximizerSet {
    fn empty() -> Self {
        Self { value: 0, members: Vec::new() }
    }

    fn offer(&mut self, value: u64, index: u64) {
        match value.cmp(&self.value) {
            Ordering::Greater => {
                self.value = value;
                self.members.clear();
                self.members.push(index);
            }
            Ordering::Equal => self.members.push(index),
            Ordering::Less => {}
        }
    }

    fn merge(mut self, other: Self) -> Self {
        match other.value.cmp(&self.value) {
            Ordering::Greater => other,
            Ordering::Equal => {
                self.members.extend(other.members);
                self
            }
            Ordering::Less => self,
        }
    }
}

/// Argmax sets of loss aggregation over a weight grid, label aggregation with
/// the sum label and uniform costs, and the product label.
///
/// Loss-aggregation weights are `a_k = alpha_k pi_k (1 - pi_k)`, which turns
/// the objective into `sum_k alpha_k` times the concordant count of label `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaximizerSets {
    pub space: HypothesisSpace,
    /// `((alpha_1, alpha_2), argmax set)` per grid point.
    pub loss_agg: Vec<((u32, u32), MaximizerSet)>,
    pub label_agg: MaximizerSet,
    pub label_product: MaximizerSet,
    /// Distinct `(first, second)` twice-concordant counts over the whole space.
    pub attainable: BTreeSet<(u64, u64)>,
    /// Normalizers turning twice-counts into per-label AUCs.
    pub label_pairs: [u64; 2],
}

struct ChunkResult {
    loss_agg: Vec<MaximizerSet>,
    label_agg: MaximizerSet,
    label_product: MaximizerSet,
    attainable: BTreeSet<(u64, u64)>,
}

const CHUNK: u64 = 1 << 14;

/// Exhaustive argmax sets. Chunks of the index range run in parallel and are
/// merged in index order, so the result does not depend on the thread count.
pub fn maximizer_sets(labels: &SampledLabels, p: u32, grid_max: u32, budget: u64) -> Result<MaximizerSets> {
    if grid_max == 0 {
        return Err(Error::invalid("weight grid must be non-empty"));
    }
    let space = HypothesisSpace::new(labels, p)?;
    let total = space.check_budget(budget)?;
    let mut label_pairs = [0u64; 2];
    for (k, slot) in label_pairs.iter_mut().enumerate() {
        let pos = (0..labels.n()).filter(|&i| labels.get(i, k) == 1).count() as u64;
        let neg = labels.n() as u64 - pos;
        if pos == 0 || neg == 0 {
            return Err(Error::degenerate(Some(k), "need at least one positive and one negative"));
        }
        *slot = pos * neg;
    }
    let both = (0..labels.n()).filter(|&i| labels.get(i, 0) == 1 && labels.get(i, 1) == 1).count() as u64;
    if both == 0 || both == labels.n() as u64 {
        return Err(Error::degenerate(None, "product label has a single class"));
    }
    let neither = (0..labels.n()).filter(|&i| labels.get(i, 0) == 0 && labels.get(i, 1) == 0).count() as u64;
    let counter = Counter { bins: p as usize + 1, both, neither };
    let grid: Vec<(u32, u32)> = (1..=grid_max).flat_map(|a| (1..=grid_max).map(move |b| (a, b))).collect();

    let chunks: Vec<u64> = (0..total.div_ceil(CHUNK)).collect();
    let results: Vec<ChunkResult> = chunks
        .par_iter()
        .map(|&c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(total);
            let mut out = ChunkResult {
                loss_agg: vec![MaximizerSet::empty(); grid.len()],
                label_agg: MaximizerSet::empty(),
                label_product: MaximizerSet::empty(),
                attainable: BTreeSet::new(),
            };
            let mut digits = space.digits(start);
            let mut first = vec![0u64; counter.bins];
            let mut second = vec![0u64; counter.bins];
            for index in start..end {
                first.iter_mut().for_each(|v| *v = 0);
                second.iter_mut().for_each(|v| *v = 0);
                for (&d, kind) in digits.iter().zip(&space.kinds) {
                    match kind {
                        Disagreement::FirstOnly => first[d as usize] += 1,
                        Disagreement::SecondOnly => second[d as usize] += 1,
                    }
                }
                let pc = counter.counts(&first, &second);
                for (set, &(a1, a2)) in out.loss_agg.iter_mut().zip(&grid) {
                    set.offer(u64::from(a1) * pc.first + u64::from(a2) * pc.second, index);
                }
                out.label_agg.offer(pc.sum_label, index);
                out.label_product.offer(pc.product_label, index);
                out.attainable.insert((pc.first, pc.second));
                // odometer increment
                for slot in digits.iter_mut().rev() {
                    *slot += 1;
                    if *slot < p {
                        break;
                    }
                    *slot = 0;
                }
            }
            out
        })
        .collect();

    let mut loss_agg = vec![MaximizerSet::empty(); grid.len()];
    let mut label_agg = MaximizerSet::empty();
    let mut label_product = MaximizerSet::empty();
    let mut attainable = BTreeSet::new();
    for r in results {
        loss_agg = loss_agg.into_iter().zip(r.loss_agg).map(|(a, b)| a.merge(b)).collect();
        label_agg = label_agg.merge(r.label_agg);
        label_product = label_product.merge(r.label_product);
        attainable.extend(r.attainable);
    }
    Ok(MaximizerSets {
        space,
        loss_agg: grid.into_iter().zip(loss_agg).collect(),
        label_agg,
        label_product,
        attainable,
        label_pairs,
    })
}

/// Outcome of one set relation check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationCheck {
    pub name: String,
    pub pass: bool,
}

fn is_subset(a: &BTreeSet<u64>, b: &BTreeSet<u64>) -> bool {
    a.is_subset(b)
}

impl MaximizerSets {
    /// Union of loss-aggregation argmax sets over grid points where
    /// `alpha_1` compares to `alpha_2` as `order`.
    pub fn loss_agg_union(&self, order: Ordering) -> BTreeSet<u64> {
        self.loss_agg
            .iter()
            .filter(|((a1, a2), _)| a1.cmp(a2) == order)
            .flat_map(|(_, s)| s.members.iter().copied())
            .collect()
    }

    pub fn aucs(&self, counts: (u64, u64)) -> (f64, f64) {
        (
            counts.0 as f64 / (2 * self.label_pairs[0]) as f64,
            counts.1 as f64 / (2 * self.label_pairs[1]) as f64,
        )
    }

    /// Twice-concordant counts of one hypothesis.
    pub fn counts_of(&self, index: u64) -> (u64, u64) {
        let mut first = vec![0u64; self.space.p as usize + 1];
        let mut second = first.clone();
        for (d, kind) in self.space.digits(index).into_iter().zip(&self.space.kinds) {
            match kind {
                Disagreement::FirstOnly => first[d as usize] += 1,
                Disagreement::SecondOnly => second[d as usize] += 1,
            }
        }
        let both = self.space.template.iter().filter(|&&s| s == f64::from(self.space.p)).count() as u64;
        let neither = self.space.n() as u64 - both - self.space.m() as u64;
        let pc = Counter { bins: first.len(), both, neither }.counts(&first, &second);
        (pc.first, pc.second)
    }

    /// Non-dominated points among the attainable count pairs, by ascending first count.
    pub fn front(&self) -> Vec<(u64, u64)> {
        let mut best_second: BTreeMap<u64, u64> = BTreeMap::new();
        for &(a, b) in &self.attainable {
            let e = best_second.entry(a).or_insert(b);
            *e = (*e).max(b);
        }
        let mut front = Vec::new();
        let mut ceiling: Option<u64> = None;
        for (&a, &b) in best_second.iter().rev() {
            if ceiling.is_none_or(|c| b > c) {
                front.push((a, b));
                ceiling = Some(b);
            }
        }
        front.reverse();
        front
    }

    fn on_front(&self, point: (u64, u64)) -> bool {
        !self
            .attainable
            .iter()
            .any(|&(a, b)| a >= point.0 && b >= point.1 && (a, b) != point)
    }

    /// Checks the containment chain between the argmax sets, the shape of the
    /// two extreme loss-aggregation maximizers, and their position on the front.
    pub fn relations(&self) -> Vec<RelationCheck> {
        let less = self.loss_agg_union(Ordering::Less);
        let equal = self.loss_agg_union(Ordering::Equal);
        let greater = self.loss_agg_union(Ordering::Greater);
        let la: BTreeSet<u64> = self.label_agg.members.iter().copied().collect();
        let lp: BTreeSet<u64> = self.label_product.members.iter().copied().collect();
        let mut out = Vec::new();
        let mut check = |name: &str, pass: bool| out.push(RelationCheck { name: name.to_string(), pass });

        check("loss_agg_lt_subset_loss_agg_eq", is_subset(&less, &equal));
        check("loss_agg_gt_subset_loss_agg_eq", is_subset(&greater, &equal));
        check("loss_agg_eq_equals_label_agg", equal == la);
        check("label_agg_subset_label_product", is_subset(&la, &lp));
        check("loss_agg_lt_singleton", less.len() == 1);
        check("loss_agg_gt_singleton", greater.len() == 1);

        let groups_at = |set: &BTreeSet<u64>, first: u32, second: u32| -> bool {
            set.len() == 1 && {
                let idx = *set.iter().next().unwrap();
                self.space.digits(idx).iter().zip(&self.space.kinds).all(|(&d, k)| match k {
                    Disagreement::FirstOnly => d == first,
                    Disagreement::SecondOnly => d == second,
                })
            }
        };
        check("loss_agg_lt_scores_groups_1_2", groups_at(&less, 1, 2));
        check("loss_agg_gt_scores_groups_2_1", groups_at(&greater, 2, 1));

        let front = self.front();
        let ends = |set: &BTreeSet<u64>, end: Option<&(u64, u64)>| -> bool {
            !set.is_empty() && set.iter().all(|&i| Some(&self.counts_of(i)) == end)
        };
        check("front_max_second_is_loss_agg_lt", ends(&less, front.first()));
        check("front_max_first_is_loss_agg_gt", ends(&greater, front.last()));
        let all_on_front = self
            .loss_agg
            .iter()
            .flat_map(|(_, s)| s.members.iter())
            .all(|&i| self.on_front(self.counts_of(i)));
        check("loss_agg_maximizers_on_front", all_on_front);
        out
    }
}

/// Largest instance count accepted by the weak-order search.
pub const MAX_WEAK_ORDER_N: usize = 8;

/// Exact subset sums `S[A][B] = sum_{i in A, j in B} w_ij`.
struct BlockSums {
    n: usize,
    sums: Vec<f64>,
}

impl BlockSums {
    fn new(obj: &PairwiseObjective) -> Self {
        let n = obj.n();
        let size = 1usize << n;
        let mut row = vec![0.0; n * size];
        for i in 0..n {
            for b in 1..size {
                let j = b.trailing_zeros() as usize;
                row[i * size + b] = row[i * size + (b & (b - 1))] + obj.weight(i, j);
            }
        }
        let mut sums = vec![0.0; size * size];
        for a in 1..size {
            let i = a.trailing_zeros() as usize;
            let rest = a & (a - 1);
            for b in 0..size {
                sums[a * size + b] = sums[rest * size + b] + row[i * size + b];
            }
        }
        Self { n, sums }
    }

    #[inline]
    fn get(&self, a: usize, b: usize) -> f64 {
        self.sums[(a << self.n) + b]
    }

    /// Value gained by placing block `b` above everything left in `rest`.
    #[inline]
    fn block_value(&self, b: usize, rest: usize) -> f64 {
        self.get(b, rest) + 0.5 * self.get(b, b)
    }
}

/// Calls `visit` with the blocks (bitmasks, top first) of every weak order of
/// `n` items. Blocks are chosen top-down; at each level candidate blocks are
/// the non-empty subsets of the remaining items in ascending bitmask order.
pub fn for_each_weak_order(n: usize, mut visit: impl FnMut(&[usize])) {
    fn go(rest: usize, blocks: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        if rest == 0 {
            visit(blocks);
            return;
        }
        let mut b = 0usize;
        loop {
            b = b.wrapping_sub(rest) & rest;
            if b == 0 {
                break;
            }
            blocks.push(b);
            go(rest & !b, blocks, visit);
            blocks.pop();
        }
    }
    go((1usize << n) - 1, &mut Vec::new(), &mut visit);
}

/// Scores for a weak order given as blocks, top block highest.
pub fn scores_from_blocks(n: usize, blocks: &[usize]) -> Vec<f64> {
    let mut s = vec![0.0; n];
    for (pos, &b) in blocks.iter().enumerate() {
        for (i, v) in s.iter_mut().enumerate() {
            if b >> i & 1 == 1 {
                *v = (blocks.len() - pos) as f64;
            }
        }
    }
    s
}

/// An exact maximizer of a pairwise objective.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakOrderOptimum {
    pub scorer: Scorer,
    pub value: f64,
}

/// Tolerance for preferring a later weak order over the incumbent.
pub const OPTIMUM_TOL: f64 = 1e-12;

/// Maximizes `sum_{i,j} w_ij H(f_i - f_j)` over all weak orders of at most
/// eight instances. Among near-ties the first order in
/// [`for_each_weak_order`]'s enumeration wins.
pub fn optimal_weak_order(obj: &PairwiseObjective) -> Result<WeakOrderOptimum> {
    let n = obj.n();
    if n > MAX_WEAK_ORDER_N {
        return Err(Error::TooLarge { n, max: MAX_WEAK_ORDER_N });
    }
    if n == 0 {
        return Err(Error::invalid("empty instance set"));
    }
    let sums = BlockSums::new(obj);

    fn go(sums: &BlockSums, rest: usize, acc: f64, blocks: &mut Vec<usize>, best: &mut (f64, Vec<usize>)) {
        if rest == 0 {
            if best.1.is_empty() || acc > best.0 + OPTIMUM_TOL {
                *best = (acc, blocks.clone());
            }
            return;
        }
        let mut b = 0usize;
        loop {
            b = b.wrapping_sub(rest) & rest;
            if b == 0 {
                break;
            }
            let left = rest & !b;
            blocks.push(b);
            go(sums, left, acc + sums.block_value(b, left), blocks, best);
            blocks.pop();
        }
    }
    let mut best = (f64::NEG_INFINITY, Vec::new());
    go(&sums, (1 << n) - 1, 0.0, &mut Vec::new(), &mut best);
    Ok(WeakOrderOptimum {
        scorer: Scorer::Table(scores_from_blocks(n, &best.1)),
        value: best.0,
    })
}

/// [`optimal_weak_order`] for the population form of an objective.
pub fn optimal_weak_order_for(model: &JointLabelModel, objective: &ObjectiveSpec) -> Result<WeakOrderOptimum> {
    if model.n() > MAX_WEAK_ORDER_N {
        return Err(Error::TooLarge { n: model.n(), max: MAX_WEAK_ORDER_N });
    }
    optimal_weak_order(&PairwiseObjective::population(model, objective)?)
}

/// Result of checking a table scorer against the exact optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub optimal: bool,
    /// Best attainable value minus the scorer's value.
    pub gap: f64,
    pub best_value: f64,
    pub scorer_value: f64,
}

/// Gap between a table scorer and the best weak order under `objective`.
pub fn certify_bayes(scorer: &Scorer, model: &JointLabelModel, objective: &ObjectiveSpec) -> Result<Certificate> {
    let scores = scorer
        .table()
        .ok_or_else(|| Error::invalid("certification needs a table scorer"))?;
    if scores.len() != model.n() {
        return Err(Error::invalid(format!("{} scores for {} instances", scores.len(), model.n())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    if model.n() > MAX_WEAK_ORDER_N {
        return Err(Error::TooLarge { n: model.n(), max: MAX_WEAK_ORDER_N });
    }
    let obj = PairwiseObjective::population(model, objective)?;
    let best = optimal_weak_order(&obj)?;
    let scorer_value = obj.evaluate(scores);
    let gap = best.value - scorer_value;
    Ok(Certificate {
        optimal: gap <= OPTIMUM_TOL,
        gap,
        best_value: best.value,
        scorer_value,
    })
}
