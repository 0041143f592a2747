//! Closed-form Bayes-optimal scorers and the label-dictatorship diagnostics.
//!
//! Every constructor returns a [`Scorer::Table`] holding one score per
//! instance. Ratio scorers use `f64::INFINITY` when their denominator vanishes;
//! it ranks above every finite score and ties with itself.

use crate::error::{Error, Result};
use crate::types::{
    aggregate_distribution, Aggregator, ClassProbTable, CostMatrix, EtaTable, JointLabelModel,
    ObjectiveSpec, PriorVector, Scorer,
};

/// Per-label multipliers `a_k / (pi_k (1 - pi_k))` of the loss-aggregated scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaVector(pub Vec<f64>);

impl AlphaVector {
    pub fn from_priors(priors: &PriorVector, a: &[f64]) -> Result<Self> {
        let pi = priors.as_slice();
        if pi.len() != a.len() {
            return Err(Error::invalid(format!("{} priors for {} weights", pi.len(), a.len())));
        }
        pi.iter()
            .zip(a)
            .enumerate()
            .map(|(k, (&p, &ak))| {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::degenerate(Some(k), format!("prior {p} is not in (0, 1)")));
                }
                Ok(ak / (p * (1.0 - p)))
            })
            .collect::<Result<Vec<_>>>()
            .map(AlphaVector)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

fn weighted_rows(eta: &EtaTable, coef: &[f64]) -> Vec<f64> {
    (0..eta.n())
        .map(|i| eta.row(i).iter().zip(coef).map(|(e, c)| c * e).sum())
        .collect()
}

/// `(1/K) sum_k a_k / (pi_k (1 - pi_k)) * eta_k(x)`.
pub fn loss_agg_bayes_scorer(eta: &EtaTable, priors: &PriorVector, a: &[f64]) -> Result<Scorer> {
    ObjectiveSpec::LossAgg(a.to_vec()).validate(eta.k())?;
    let alpha = AlphaVector::from_priors(priors, a)?;
    let k = eta.k() as f64;
    let coef: Vec<f64> = alpha.0.iter().map(|x| x / k).collect();
    Ok(Scorer::Table(weighted_rows(eta, &coef)))
}

/// `sum_k eta_k(x)`.
pub fn label_agg_bayes_scorer_sum(eta: &EtaTable) -> Scorer {
    Scorer::Table((0..eta.n()).map(|i| eta.row(i).iter().sum()).collect())
}

/// `sum_k alpha_k eta_k(x)`.
pub fn label_agg_bayes_scorer_weighted(eta: &EtaTable, alphas: &[f64]) -> Result<Scorer> {
    Aggregator::WeightedSum(alphas.to_vec()).validate(eta.k())?;
    Ok(Scorer::Table(weighted_rows(eta, alphas)))
}

/// Two independent labels, sum aggregation, uniform costs:
/// `(eta_1 + eta_2 - eta_1 eta_2) / (1 - eta_1 eta_2)`.
pub fn label_agg_uniform_cost_scorer_k2(eta: &EtaTable) -> Result<Scorer> {
    if eta.k() != 2 {
        return Err(Error::invalid(format!("expected 2 labels, got {}", eta.k())));
    }
    Ok(Scorer::Table(
        (0..eta.n())
            .map(|i| {
                let (e1, e2) = (eta.get(i, 0), eta.get(i, 1));
                let den = 1.0 - e1 * e2;
                if den <= 0.0 {
                    f64::INFINITY
                } else {
                    (e1 + e2 - e1 * e2) / den
                }
            })
            .collect(),
    ))
}

/// Relative tolerance of the scale-condition check.
pub const SCALE_TOL: f64 = 1e-8;

/// Whether the top-left `levels x levels` block of `costs` factors as
/// `c(y, y') = w_y w_y' (s_y - s_y')`.
///
/// Fixing `w_0 = 1, s_0 = 0` gives `c(y, y') = w_y' c(y, 0) - w_y c(y', 0)`;
/// the `y' = 1` column then pins every `w_y` as an affine function of `w_1`,
/// which is fitted by least squares against the remaining entries.
pub fn satisfies_scale_condition(costs: &CostMatrix, levels: usize) -> bool {
    if levels <= 3 {
        return true;
    }
    let c10 = costs.cost(1, 0);
    if c10 <= 0.0 {
        return false;
    }
    // w_y = p_y w_1 + q_y
    let p: Vec<f64> = (0..levels)
        .map(|y| match y {
            0 => 0.0,
            1 => 1.0,
            _ => costs.cost(y, 0) / c10,
        })
        .collect();
    let q: Vec<f64> = (0..levels)
        .map(|y| match y {
            0 => 1.0,
            1 => 0.0,
            _ => -costs.cost(y, 1) / c10,
        })
        .collect();
    // residual r = w_lo c(hi, 0) - w_hi c(lo, 0) - c(hi, lo) = u w_1 + v
    let mut rows = Vec::new();
    for hi in 3..levels {
        for lo in 2..hi {
            let u = p[lo] * costs.cost(hi, 0) - p[hi] * costs.cost(lo, 0);
            let v = q[lo] * costs.cost(hi, 0) - q[hi] * costs.cost(lo, 0) - costs.cost(hi, lo);
            rows.push((u, v));
        }
    }
    let uu: f64 = rows.iter().map(|(u, _)| u * u).sum();
    let w1 = if uu > 0.0 {
        -rows.iter().map(|(u, v)| u * v).sum::<f64>() / uu
    } else {
        0.0
    };
    let scale = (0..levels)
        .flat_map(|hi| (0..hi).map(move |lo| (hi, lo)))
        .map(|(hi, lo)| costs.cost(hi, lo).abs())
        .fold(0.0, f64::max);
    rows.iter().all(|(u, v)| (u * w1 + v).abs() <= SCALE_TOL * scale)
}

/// `sum_{y >= 1} c(y, 0) p(y) / sum_{y <= L-2} c(L-1, y) p(y)` over levels
/// `0..L`, the closed form for three levels or costs with the scale property.
pub fn multipartite_bayes_scorer(table: &ClassProbTable, costs: &CostMatrix) -> Result<Scorer> {
    let levels = table.levels();
    let costs = if costs.size() >= levels {
        costs.clone()
    } else {
        costs.resized(levels).ok_or_else(|| {
            Error::InvalidCosts(format!("cost matrix covers {} levels, labels use {levels}", costs.size()))
        })?
    };
    if !satisfies_scale_condition(&costs, levels) {
        return Err(Error::InvalidCosts(format!(
            "costs over {levels} levels admit no w, s factorization"
        )));
    }
    let top = levels - 1;
    Ok(Scorer::Table(
        (0..table.n())
            .map(|i| {
                let p = table.row(i);
                let num: f64 = (1..levels).map(|y| costs.cost(y, 0) * p[y]).sum();
                let den: f64 = (0..top).map(|y| costs.cost(top, y) * p[y]).sum();
                if den <= 0.0 {
                    f64::INFINITY
                } else {
                    num / den
                }
            })
            .collect(),
    ))
}

/// Probability that every label is positive.
pub fn product_agg_bayes_scorer(model: &JointLabelModel) -> Scorer {
    Scorer::Table(match model {
        JointLabelModel::ConditionallyIndependent(eta) => {
            (0..eta.n()).map(|i| eta.row(i).iter().product()).collect()
        }
        JointLabelModel::Explicit(joint) => {
            let all = (1usize << joint.k()) - 1;
            (0..joint.n()).map(|i| joint.row(i)[all]).collect()
        }
    })
}

/// A Bayes-optimal scorer for any objective that has a closed form.
///
/// Label aggregation goes through the aggregated class-probability table, so
/// it fails with `InvalidCosts` when the costs lack the scale property on more
/// than three levels.
pub fn bayes_scorer(model: &JointLabelModel, objective: &ObjectiveSpec) -> Result<Scorer> {
    objective.validate(model.k())?;
    match objective {
        ObjectiveSpec::PerLabel(k) => Ok(Scorer::Table(model.marginals().column(*k))),
        ObjectiveSpec::LossAgg(a) => {
            let eta = model.marginals();
            loss_agg_bayes_scorer(&eta, &PriorVector::from_eta(&eta), a)
        }
        ObjectiveSpec::LabelAgg { aggregator: Aggregator::Product, .. } => Ok(product_agg_bayes_scorer(model)),
        ObjectiveSpec::LabelAgg { aggregator, costs } => {
            let table = aggregate_distribution(model, aggregator)?;
            multipartite_bayes_scorer(&table, costs)
        }
    }
}

/// Outcome of the dictatorship check for two labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DictatorshipReport {
    /// Index (0-based) of the label with the larger multiplier; `None` on a tie.
    pub dictator: Option<usize>,
    /// For deterministic tables: instance pairs `(pos, neg)` on the dictator
    /// label where the loss-aggregated scorer fails to rank `pos` strictly higher.
    pub violations: Vec<(usize, usize)>,
}

/// Which label dictates the loss-aggregated ordering when labels are deterministic.
///
/// When `eta` is given and deterministic, the ordering constraint is verified
/// on the scorer `sum_k alpha_k eta_k`.
pub fn dictatorship_analysis(alphas: &AlphaVector, eta: Option<&EtaTable>) -> Result<DictatorshipReport> {
    let al = alphas.as_slice();
    if al.len() != 2 {
        return Err(Error::invalid(format!("expected 2 labels, got {}", al.len())));
    }
    let dictator = if al[0] > al[1] {
        Some(0)
    } else if al[1] > al[0] {
        Some(1)
    } else {
        None
    };
    let mut violations = Vec::new();
    if let (Some(d), Some(eta)) = (dictator, eta) {
        if eta.k() != 2 {
            return Err(Error::invalid(format!("expected 2 labels, got {}", eta.k())));
        }
        if eta.is_deterministic() {
            let scores = weighted_rows(eta, al);
            for i in 0..eta.n() {
                for j in 0..eta.n() {
                    if eta.get(i, d) == 1.0 && eta.get(j, d) == 0.0 && scores[i] <= scores[j] {
                        violations.push((i, j));
                    }
                }
            }
        }
    }
    Ok(DictatorshipReport { dictator, violations })
}

/// Which Bayes scorer induces the order over label combinations.
#[derive(Debug, Clone, PartialEq)]
pub enum ComboMethod {
    LossAgg(AlphaVector),
    LabelAggSum,
    LabelAggProduct,
}

/// A binary label combination for two labels.
pub type Combo = [u8; 2];

/// The four combinations in the order (0,0), (1,0), (0,1), (1,1).
pub const COMBOS: [Combo; 4] = [[0, 0], [1, 0], [0, 1], [1, 1]];

/// Strict pairs `(lower, higher)` among the four deterministic combinations,
/// as ranked by the method's Bayes scorer. Tied combinations are incomparable.
pub fn partial_order_over_combos(method: &ComboMethod) -> Result<Vec<(Combo, Combo)>> {
    let rows: Vec<Vec<f64>> = COMBOS
        .iter()
        .map(|c| c.iter().map(|&y| f64::from(y)).collect())
        .collect();
    let eta = EtaTable::from_rows(&rows)?;
    let scores = match method {
        ComboMethod::LossAgg(alpha) => {
            Aggregator::WeightedSum(alpha.0.clone()).validate(2)?;
            weighted_rows(&eta, &alpha.0)
        }
        ComboMethod::LabelAggSum => label_agg_bayes_scorer_sum(&eta).table().unwrap().to_vec(),
        ComboMethod::LabelAggProduct => {
            product_agg_bayes_scorer(&JointLabelModel::ConditionallyIndependent(eta)).table().unwrap().to_vec()
        }
    };
    let mut out = Vec::new();
    for (i, lo) in COMBOS.iter().enumerate() {
        for (j, hi) in COMBOS.iter().enumerate() {
            if scores[i] < scores[j] {
                out.push((*lo, *hi));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::JointTable;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn table(s: &Scorer) -> &[f64] {
        s.table().unwrap()
    }

    fn ranks_agree(a: &[f64], b: &[f64]) -> bool {
        (0..a.len()).all(|i| (0..a.len()).all(|j| a[i].partial_cmp(&a[j]) == b[i].partial_cmp(&b[j])))
    }

    #[test]
    fn loss_agg_examples() {
        let eta = EtaTable::from_rows(&[vec![0.3, 0.7]]).unwrap();
        let s = loss_agg_bayes_scorer(&eta, &PriorVector(vec![0.5, 0.5]), &[1.0, 1.0]).unwrap();
        assert_relative_eq!(table(&s)[0], 2.0, epsilon = 1e-12);

        let eta = EtaTable::from_rows(&[vec![0.2], vec![0.9], vec![0.5]]).unwrap();
        let s = loss_agg_bayes_scorer(&eta, &PriorVector(vec![0.3]), &[2.0]).unwrap();
        assert!(ranks_agree(table(&s), &eta.column(0)));

        let bad = loss_agg_bayes_scorer(&eta, &PriorVector(vec![1.0]), &[1.0]);
        assert!(matches!(bad, Err(Error::DegenerateLabel { label: Some(0), .. })));
    }

    #[test]
    fn alpha_from_skewed_priors() {
        let alpha = AlphaVector::from_priors(&PriorVector(vec![0.4, 0.01]), &[1.0, 1.0]).unwrap();
        assert_relative_eq!(alpha.0[0], 4.17, epsilon = 5e-3);
        assert_relative_eq!(alpha.0[1], 101.01, epsilon = 5e-3);
        let r = dictatorship_analysis(&alpha, None).unwrap();
        assert_eq!(r.dictator, Some(1));
    }

    #[test]
    fn sum_and_weighted_examples() {
        let eta = EtaTable::from_rows(&[vec![1.0, 0.44], vec![0.0, 0.0], vec![0.5, 0.5]]).unwrap();
        let s = label_agg_bayes_scorer_sum(&eta);
        assert_relative_eq!(table(&s)[0], 1.44, epsilon = 1e-12);
        assert_eq!(table(&s)[1], 0.0);
        let w = label_agg_bayes_scorer_weighted(&eta, &[1.0, 1.0]).unwrap();
        assert_eq!(table(&w), table(&s));
        let w = label_agg_bayes_scorer_weighted(&eta, &[2.0, 1.0]).unwrap();
        assert_eq!(table(&w)[2], 1.5);
        assert!(label_agg_bayes_scorer_weighted(&eta, &[0.0, 1.0]).is_err());

        let det = EtaTable::from_rows(&[vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(table(&label_agg_bayes_scorer_sum(&det)), &[2.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn anti_correlated_weighted_scorer_is_constant() {
        // Y2 = 1 - Y1: only outcomes 01 and 10 carry mass
        let rows = [0.3, 0.8, 0.5];
        let mut probs = Vec::new();
        for p in rows {
            probs.extend([0.0, p, 1.0 - p, 0.0]);
        }
        let model = JointLabelModel::Explicit(JointTable::new(probs, 3, 2).unwrap());
        let s = label_agg_bayes_scorer_weighted(&model.marginals(), &[1.0, 1.0]).unwrap();
        for v in table(&s) {
            assert_relative_eq!(*v, 1.0, epsilon = 1e-12);
        }
        // and the aggregated objective has nothing to rank
        let obj = ObjectiveSpec::LabelAgg { aggregator: Aggregator::Sum, costs: CostMatrix::uniform(3) };
        assert!(matches!(
            crate::metrics::PairwiseObjective::population(&model, &obj),
            Err(Error::DegenerateLabel { .. })
        ));
    }

    #[test]
    fn k2_uniform_examples() {
        let eta = EtaTable::from_rows(&[vec![1.0, 0.44], vec![0.2, 0.56], vec![1.0, 1.0]]).unwrap();
        let s = label_agg_uniform_cost_scorer_k2(&eta).unwrap();
        assert_relative_eq!(table(&s)[0], 1.78571, epsilon = 1e-5);
        assert_relative_eq!(table(&s)[1], 0.72973, epsilon = 1e-5);
        assert_eq!(table(&s)[2], f64::INFINITY);
    }

    #[test]
    fn k2_uniform_matches_multipartite_form() {
        let eta = EtaTable::from_rows(&[vec![1.0, 0.44], vec![0.2, 0.56], vec![0.7, 0.1], vec![0.0, 0.3]]).unwrap();
        let a = label_agg_uniform_cost_scorer_k2(&eta).unwrap();
        let dist = aggregate_distribution(&JointLabelModel::ConditionallyIndependent(eta), &Aggregator::Sum).unwrap();
        let b = multipartite_bayes_scorer(&dist, &CostMatrix::uniform(3)).unwrap();
        for (x, y) in table(&a).iter().zip(table(&b)) {
            assert_relative_eq!(*x, *y, epsilon = 1e-12);
        }
    }

    #[test]
    fn multipartite_examples() {
        let t = ClassProbTable::from_rows(&[vec![0.2, 0.3, 0.5]]).unwrap();
        let s = multipartite_bayes_scorer(&t, &CostMatrix::uniform(3)).unwrap();
        assert_relative_eq!(table(&s)[0], 1.6, epsilon = 1e-12);

        let t = ClassProbTable::from_rows(&[vec![0.8, 0.2], vec![0.1, 0.9], vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap();
        let s = multipartite_bayes_scorer(&t, &CostMatrix::uniform(2)).unwrap();
        let top: Vec<f64> = (0..4).map(|i| t.row(i)[1]).collect();
        assert!(ranks_agree(table(&s), &top));
    }

    #[test]
    fn abs_diff_orders_by_expected_level() {
        let eta = EtaTable::from_rows(&[
            vec![0.1, 0.9, 0.4],
            vec![0.5, 0.5, 0.5],
            vec![0.9, 0.8, 0.05],
            vec![0.0, 0.2, 0.3],
            vec![1.0, 1.0, 0.2],
        ])
        .unwrap();
        let dist = aggregate_distribution(&JointLabelModel::ConditionallyIndependent(eta.clone()), &Aggregator::Sum).unwrap();
        let s = multipartite_bayes_scorer(&dist, &CostMatrix::abs_diff(4)).unwrap();
        assert!(ranks_agree(table(&s), table(&label_agg_bayes_scorer_sum(&eta))));
    }

    #[test]
    fn scale_condition() {
        assert!(satisfies_scale_condition(&CostMatrix::abs_diff(6), 6));
        assert!(!satisfies_scale_condition(&CostMatrix::uniform(4), 4));
        assert!(satisfies_scale_condition(&CostMatrix::uniform(3), 3));
        // w = (1, 2, 1, 3), s = (0, 1, 2, 5)
        let (w, sv) = ([1.0, 2.0, 1.0, 3.0], [0.0, 1.0, 2.0, 5.0]);
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|hi| (0..4).map(|lo| if hi > lo { w[hi] * w[lo] * (sv[hi] - sv[lo]) } else { 0.0 }).collect())
            .collect();
        let c = CostMatrix::custom(&rows).unwrap();
        assert!(satisfies_scale_condition(&c, 4));
        let t = ClassProbTable::from_rows(&[vec![0.25; 4]]).unwrap();
        assert!(multipartite_bayes_scorer(&t, &c).is_ok());
        assert!(matches!(
            multipartite_bayes_scorer(&t, &CostMatrix::uniform(4)),
            Err(Error::InvalidCosts(_))
        ));
    }

    #[test]
    fn product_examples() {
        let eta = EtaTable::from_rows(&[vec![0.5, 0.5], vec![1.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let s = product_agg_bayes_scorer(&JointLabelModel::ConditionallyIndependent(eta.clone()));
        assert_eq!(table(&s), &[0.25, 1.0, 0.0]);
        let explicit = JointLabelModel::ConditionallyIndependent(eta).to_explicit().unwrap();
        let s2 = product_agg_bayes_scorer(&JointLabelModel::Explicit(explicit));
        for (a, b) in table(&s).iter().zip(table(&s2)) {
            assert_relative_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    fn deterministic_rows(k: usize) -> Vec<Vec<f64>> {
        (0..1usize << k)
            .map(|m| (0..k).map(|b| ((m >> b) & 1) as f64).collect())
            .collect()
    }

    #[test]
    fn product_strict_orders_are_sum_strict_orders() {
        for k in [2, 3] {
            let eta = EtaTable::from_rows(&deterministic_rows(k)).unwrap();
            let sum = label_agg_bayes_scorer_sum(&eta);
            let prod = product_agg_bayes_scorer(&JointLabelModel::ConditionallyIndependent(eta.clone()));
            let (s, p) = (table(&sum), table(&prod));
            for i in 0..eta.n() {
                for j in 0..eta.n() {
                    if p[i] > p[j] {
                        assert!(s[i] > s[j], "k={k} rows {i},{j}");
                    }
                    // equal sums never get split by the product
                    if s[i] == s[j] {
                        assert_eq!(p[i], p[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn k2_uniform_on_deterministic_combos() {
        let eta = EtaTable::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let s = label_agg_uniform_cost_scorer_k2(&eta).unwrap();
        assert_eq!(table(&s), &[0.0, 1.0, 1.0, f64::INFINITY]);
        assert!(ranks_agree(table(&s), &[0.0, 1.0, 1.0, 2.0]));
    }

    #[test]
    fn dictatorship_examples() {
        let r = dictatorship_analysis(&AlphaVector(vec![3.0, 3.0]), None).unwrap();
        assert_eq!(r.dictator, None);
        let eta = EtaTable::from_rows(&deterministic_rows(2)).unwrap();
        let r = dictatorship_analysis(&AlphaVector(vec![5.0, 2.0]), Some(&eta)).unwrap();
        assert_eq!(r.dictator, Some(0));
        assert!(r.violations.is_empty());
        let order = partial_order_over_combos(&ComboMethod::LossAgg(AlphaVector(vec![5.0, 2.0]))).unwrap();
        assert!(order.contains(&([0, 1], [1, 0])));
    }

    #[test]
    fn combo_orders() {
        let mut sum = partial_order_over_combos(&ComboMethod::LabelAggSum).unwrap();
        sum.sort();
        let mut expected = vec![
            ([0, 0], [1, 0]),
            ([0, 0], [0, 1]),
            ([1, 0], [1, 1]),
            ([0, 1], [1, 1]),
            ([0, 0], [1, 1]),
        ];
        expected.sort();
        assert_eq!(sum, expected);

        let la = partial_order_over_combos(&ComboMethod::LossAgg(AlphaVector(vec![4.0, 1.0]))).unwrap();
        assert_eq!(la.len(), 6);
        let mut extra = la.clone();
        extra.retain(|p| !expected.contains(p));
        assert_eq!(extra, vec![([0, 1], [1, 0])]);

        let lb = partial_order_over_combos(&ComboMethod::LossAgg(AlphaVector(vec![1.0, 4.0]))).unwrap();
        assert!(lb.contains(&([1, 0], [0, 1])));
        assert_eq!(lb.len(), 6);

        let prod = partial_order_over_combos(&ComboMethod::LabelAggProduct).unwrap();
        assert_eq!(prod.len(), 3);
        assert!(prod.iter().all(|(_, hi)| *hi == [1, 1]));
    }

    #[test]
    fn bayes_scorer_dispatch() {
        let eta = EtaTable::from_rows(&[vec![0.3, 0.6], vec![0.9, 0.2], vec![0.5, 0.5]]).unwrap();
        let model = JointLabelModel::ConditionallyIndependent(eta.clone());
        let la = bayes_scorer(&model, &ObjectiveSpec::LabelAgg { aggregator: Aggregator::Sum, costs: CostMatrix::uniform(3) }).unwrap();
        let k2 = label_agg_uniform_cost_scorer_k2(&eta).unwrap();
        for (a, b) in table(&la).iter().zip(table(&k2)) {
            assert_relative_eq!(*a, *b, epsilon = 1e-12);
        }
        let p = bayes_scorer(&model, &ObjectiveSpec::PerLabel(1)).unwrap();
        assert_eq!(table(&p), &[0.6, 0.2, 0.5]);
    }

    proptest! {
        #[test]
        fn loss_agg_ordering_is_scale_invariant(
            eta in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..12),
            a in (0.1f64..5.0, 0.1f64..5.0),
            c in 0.01f64..100.0,
            pi in (0.05f64..0.95, 0.05f64..0.95),
        ) {
            let rows: Vec<Vec<f64>> = eta.iter().map(|(x, y)| vec![*x, *y]).collect();
            let eta = EtaTable::from_rows(&rows).unwrap();
            let priors = PriorVector(vec![pi.0, pi.1]);
            let s1 = loss_agg_bayes_scorer(&eta, &priors, &[a.0, a.1]).unwrap();
            let s2 = loss_agg_bayes_scorer(&eta, &priors, &[c * a.0, c * a.1]).unwrap();
            // compare orderings, allowing rounding to split or merge near-ties
            let (t1, t2) = (table(&s1), table(&s2));
            for i in 0..t1.len() {
                for j in 0..t1.len() {
                    if t1[i] > t1[j] * (1.0 + 1e-12) + 1e-300 {
                        prop_assert!(t2[i] >= t2[j]);
                    }
                }
            }
        }

        #[test]
        fn prior_weighted_loss_agg_matches_sum(
            eta in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 1..10),
            pi in prop::collection::vec(0.05f64..0.95, 3),
        ) {
            let eta = EtaTable::from_rows(&eta).unwrap();
            let a: Vec<f64> = pi.iter().map(|p| p * (1.0 - p)).collect();
            let s = loss_agg_bayes_scorer(&eta, &PriorVector(pi), &a).unwrap();
            let sum = label_agg_bayes_scorer_sum(&eta);
            // alpha is identically 1, so the scorer is sum / K
            for (x, y) in table(&s).iter().zip(table(&sum)) {
                prop_assert!((x * 3.0 - y).abs() < 1e-9);
            }
        }

        #[test]
        fn aggregated_mean_is_the_sum_scorer(
            eta in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 1..5), 1..8),
        ) {
            let k = eta[0].len();
            let rows: Vec<Vec<f64>> = eta.iter().map(|r| r.iter().cycle().take(k).copied().collect()).collect();
            let eta = EtaTable::from_rows(&rows).unwrap();
            let dist = aggregate_distribution(&JointLabelModel::ConditionallyIndependent(eta.clone()), &Aggregator::Sum).unwrap();
            let mean = dist.expected_level();
            for (m, s) in mean.iter().zip(table(&label_agg_bayes_scorer_sum(&eta))) {
                prop_assert!((m - s).abs() < 1e-9);
            }
        }
    }
}
