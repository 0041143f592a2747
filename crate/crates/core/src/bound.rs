//! Upper bound on how far ordering by `sum_k a_k eta_k` can fall short of the
//! optimal label-aggregated AUC when labels are conditionally independent,
//! and the matching exact measurement on small instance sets.

use crate::error::{Error, Result};
use crate::metrics::PairwiseObjective;
use crate::oracle::{optimal_weak_order, MAX_WEAK_ORDER_N};
use crate::types::{Aggregator, CostMatrix, EtaTable, JointLabelModel, ObjectiveSpec};

/// `2t / (1 - t)` on `[0, 1)`, `+inf` from 1 on.
pub fn psi(t: f64) -> f64 {
    if t >= 1.0 {
        f64::INFINITY
    } else {
        2.0 * t / (1.0 - t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapBound {
    pub argument: f64,
    /// `psi(argument)`, infinite when the argument reaches 1.
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub k: usize,
    pub empirical_gap: f64,
    pub bound_value: f64,
    pub argument: f64,
}

fn check_weights(eta: &EtaTable, a: &[f64]) -> Result<()> {
    if a.len() != eta.k() {
        return Err(Error::invalid(format!("{} weights for {} labels", a.len(), eta.k())));
    }
    if a.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::invalid("weights must be positive and finite"));
    }
    Ok(())
}

/// Per-instance label variances `eta (1 - eta)`, row-major.
fn variances(eta: &EtaTable) -> Vec<Vec<f64>> {
    (0..eta.n()).map(|i| eta.row(i).iter().map(|e| e * (1.0 - e)).collect()).collect()
}

/// Averages `sum_k a_k^3 v_k / (sum_k a_k^2 v_k)^{3/2}` over all ordered row
/// pairs (including a row with itself), where `v_k` is the summed label-`k`
/// variance of the two rows.
pub fn gap_bound(eta: &EtaTable, a: &[f64]) -> Result<GapBound> {
    check_weights(eta, a)?;
    let var = variances(eta);
    let n = eta.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (mut num, mut den) = (0.0, 0.0);
            for (k, &ak) in a.iter().enumerate() {
                let v = var[i][k] + var[j][k];
                num += ak.powi(3) * v;
                den += ak * ak * v;
            }
            if den <= 0.0 {
                return Err(Error::DegenerateVariance(format!("rows {i} and {j} have deterministic labels")));
            }
            total += num / den.powf(1.5);
        }
    }
    let argument = total / (n * n) as f64;
    Ok(GapBound { argument, bound: psi(argument) })
}

/// The closed-form envelope for unit weights and every `eta` in `[c, 1 - c]`.
pub fn envelope(c: f64, k: usize) -> f64 {
    psi(1.0 / (2.0 * c * (1.0 - c) * k as f64).sqrt())
}

/// Label-aggregated objective with the weighted-sum label and uniform costs
/// over its alphabet, for conditionally independent labels.
pub fn weighted_sum_objective(eta: &EtaTable, a: &[f64]) -> Result<PairwiseObjective> {
    check_weights(eta, a)?;
    let model = JointLabelModel::ConditionallyIndependent(eta.clone());
    let objective = ObjectiveSpec::LabelAgg {
        aggregator: Aggregator::WeightedSum(a.to_vec()),
        costs: CostMatrix::uniform(2),
    };
    PairwiseObjective::population(&model, &objective)
}

/// Optimal value minus the value of ordering by `sum_k a_k eta_k`.
pub fn measure_gap(eta: &EtaTable, a: &[f64]) -> Result<f64> {
    if eta.n() > MAX_WEAK_ORDER_N {
        return Err(Error::TooLarge { n: eta.n(), max: MAX_WEAK_ORDER_N });
    }
    gap_bound(eta, a)?;
    let obj = weighted_sum_objective(eta, a)?;
    let best = optimal_weak_order(&obj)?;
    let linear: Vec<f64> = (0..eta.n())
        .map(|i| eta.row(i).iter().zip(a).map(|(e, w)| e * w).sum())
        .collect();
    Ok(best.value - obj.evaluate(&linear))
}

pub fn bound_report(eta: &EtaTable, a: &[f64]) -> Result<BoundReport> {
    let b = gap_bound(eta, a)?;
    Ok(BoundReport {
        k: eta.k(),
        empirical_gap: measure_gap(eta, a)?,
        bound_value: b.bound,
        argument: b.argument,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn constant(n: usize, k: usize, v: f64) -> EtaTable {
        EtaTable::new(vec![v; n * k], n, k).unwrap()
    }

    #[test]
    fn balanced_examples() {
        let b = gap_bound(&constant(3, 8, 0.5), &[1.0; 8]).unwrap();
        assert_relative_eq!(b.argument, 0.5, epsilon = 1e-12);
        assert_relative_eq!(b.bound, 2.0, epsilon = 1e-12);
        let b = gap_bound(&constant(2, 200, 0.5), &[1.0; 200]).unwrap();
        assert_relative_eq!(b.argument, 0.1, epsilon = 1e-12);
        assert_relative_eq!(b.bound, 0.2 / 0.9, epsilon = 1e-12);
        for k in [1, 2, 3, 5, 13] {
            let b = gap_bound(&constant(2, k, 0.5), &vec![1.0; k]).unwrap();
            assert_relative_eq!(b.argument, (k as f64 / 2.0).powf(-0.5), epsilon = 1e-12);
        }
    }

    #[test]
    fn pole_and_degenerate_cases() {
        let b = gap_bound(&constant(2, 2, 0.5), &[1.0, 100.0]).unwrap();
        assert!(b.argument >= 1.0);
        assert_eq!(b.bound, f64::INFINITY);
        assert!(matches!(gap_bound(&constant(2, 2, 1.0), &[1.0, 1.0]), Err(Error::DegenerateVariance(_))));
        assert!(gap_bound(&constant(2, 2, 0.5), &[1.0, 0.0]).is_err());
    }

    #[test]
    fn psi_is_increasing() {
        let grid: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        for w in grid.windows(2) {
            assert!(psi(w[1]) > psi(w[0]));
        }
        assert_eq!(psi(1.0), f64::INFINITY);
    }

    #[test]
    fn zero_gap_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let single: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.random_range(0.2..0.8)]).collect();
        assert!(measure_gap(&EtaTable::from_rows(&single).unwrap(), &[1.0]).unwrap().abs() <= 1e-12);
        let same = EtaTable::from_rows(&vec![vec![0.3, 0.6, 0.45]; 5]).unwrap();
        assert!(measure_gap(&same, &[1.0; 3]).unwrap().abs() <= 1e-12);
        assert_eq!(
            measure_gap(&constant(9, 2, 0.5), &[1.0, 1.0]).unwrap_err(),
            Error::TooLarge { n: 9, max: 8 }
        );
    }

    #[test]
    fn gap_within_bound_and_envelope() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = 0.2;
        for k in [2, 4, 8] {
            for _ in 0..10 {
                let rows: Vec<Vec<f64>> = (0..5).map(|_| (0..k).map(|_| rng.random_range(c..1.0 - c)).collect()).collect();
                let eta = EtaTable::from_rows(&rows).unwrap();
                let r = bound_report(&eta, &vec![1.0; k]).unwrap();
                assert!(r.empirical_gap >= -1e-12);
                assert!(r.empirical_gap <= r.bound_value);
                assert!(r.bound_value <= envelope(c, k) + 1e-12);
            }
        }
        for k in 1..64 {
            assert!(envelope(c, k + 1) <= envelope(c, k));
        }
    }
}
