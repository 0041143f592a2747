//! Seeded synthetic data generators.
//!
//! One `u64` seed drives a ChaCha8 generator per concern, each on its own
//! stream, so for example growing `n` extends the feature draws without
//! disturbing the label draws of earlier rows.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::types::{Dataset, EtaTable, InstanceSet, SampledLabels};

const FEATURE_STREAM: u64 = 0;
const WEIGHT_STREAM: u64 = 1;
const LABEL_STREAM: u64 = 2;
const COVARIANCE_STREAM: u64 = 3;
const RESAMPLE_STREAM: u64 = 4;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Features, their class probabilities, and labels drawn from them.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub features: InstanceSet,
    pub eta: EtaTable,
    pub labels: SampledLabels,
}

impl SyntheticSample {
    pub fn dataset(&self) -> Dataset {
        Dataset {
            features: self.features.clone(),
            labels: self.labels.clone(),
        }
    }
}

fn uniform_square(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..2 * n).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

fn bernoulli_labels(eta: &EtaTable, seed: u64) -> SampledLabels {
    let mut rng = stream(seed, LABEL_STREAM);
    let draws: Vec<u8> = (0..eta.n())
        .flat_map(|i| eta.row(i).to_vec())
        .map(|p| u8::from(rng.random::<f64>() < p))
        .collect();
    SampledLabels::new(draws, eta.n(), eta.k()).expect("shape matches eta")
}

fn require_rows(n: usize, min: usize) -> Result<()> {
    if n < min {
        return Err(Error::invalid(format!("need at least {min} rows, got {n}")));
    }
    Ok(())
}

/// Two logistic labels over the square `[-1, 1]^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmoidSynthConfig {
    pub n: usize,
    /// Scale applied inside both sigmoids.
    pub tau: f64,
    /// Shift of the second label; larger values make it rarer.
    pub rho: f64,
    pub seed: u64,
}

impl SigmoidSynthConfig {
    pub const W1: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];
    pub const W2: [f64; 2] = [0.0, 1.0];

    pub fn eta(&self, x: &[f64]) -> [f64; 2] {
        let dot = |w: [f64; 2]| w[0] * x[0] + w[1] * x[1];
        [sigmoid(self.tau * dot(Self::W1)), sigmoid(self.tau * (dot(Self::W2) - self.rho))]
    }
}

pub fn gen_sigmoid_pair(config: &SigmoidSynthConfig) -> Result<SyntheticSample> {
    require_rows(config.n, 1)?;
    if !(config.tau > 0.0 && config.tau.is_finite() && config.rho.is_finite()) {
        return Err(Error::invalid("tau must be positive and rho finite"));
    }
    let x = uniform_square(config.n, &mut stream(config.seed, FEATURE_STREAM));
    let eta: Vec<f64> = x.chunks(2).flat_map(|r| config.eta(r)).collect();
    let eta = EtaTable::new(eta, config.n, 2)?;
    let labels = bernoulli_labels(&eta, config.seed);
    Ok(SyntheticSample {
        features: InstanceSet::new(x, config.n, 2)?,
        eta,
        labels,
    })
}

/// The shift at which the second label's empirical positive fraction reaches
/// `target`, found by bisection on samples drawn with the config's seed.
///
/// The sample's features and uniform label draws do not depend on `rho`, so
/// the fraction is monotone in it and the search lands within `1/n`.
pub fn rho_for_prior(config: &SigmoidSynthConfig, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid(format!("target prior {target} is not in (0, 1)")));
    }
    let prior = |rho: f64| -> Result<f64> {
        let s = gen_sigmoid_pair(&SigmoidSynthConfig { rho, ..*config })?;
        let pos = s.labels.column(1).iter().filter(|&&y| y == 1).count();
        Ok(pos as f64 / config.n as f64)
    };
    let span = 1.0 + 50.0 / config.tau;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if prior(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // pick whichever end of the final bracket is closer to the target
    let (pl, ph) = (prior(lo)?, prior(hi)?);
    Ok(if (pl - target).abs() <= (ph - target).abs() { lo } else { hi })
}

/// Two labels thresholded at 0 from a zero-mean Gaussian with covariance
/// `A A^T`, `A` uniform on `[0, 1]^{2x2}`.
pub fn gen_gaussian_bilevel(n: usize, seed: u64) -> Result<SyntheticSample> {
    let mut rng = stream(seed, COVARIANCE_STREAM);
    let mut a = [[0.0; 2]; 2];
    for row in &mut a {
        for v in row.iter_mut() {
            *v = rng.random::<f64>();
        }
    }
    gen_gaussian_bilevel_with_factor(n, a, seed)
}

/// As [`gen_gaussian_bilevel`] with a given covariance factor `A`.
pub fn gen_gaussian_bilevel_with_factor(n: usize, a: [[f64; 2]; 2], seed: u64) -> Result<SyntheticSample> {
    require_rows(n, 2)?;
    let mut rng = stream(seed, FEATURE_STREAM);
    let mut x = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let z: [f64; 2] = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
        x.push(a[0][0] * z[0] + a[0][1] * z[1]);
        x.push(a[1][0] * z[0] + a[1][1] * z[1]);
    }
    let labels: Vec<u8> = x.iter().map(|&v| u8::from(v > 0.0)).collect();
    let eta: Vec<f64> = labels.iter().map(|&y| f64::from(y)).collect();
    Ok(SyntheticSample {
        features: InstanceSet::new(x, n, 2)?,
        eta: EtaTable::new(eta, n, 2)?,
        labels: SampledLabels::new(labels, n, 2)?,
    })
}

/// Two logistic labels with directions drawn uniformly from `[-1, 1]^2`.
pub fn gen_d3_training_pair(n: usize, seed: u64, tau: f64) -> Result<SyntheticSample> {
    require_rows(n, 1)?;
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::invalid("tau must be finite and non-negative"));
    }
    let w = uniform_square(2, &mut stream(seed, WEIGHT_STREAM));
    let x = uniform_square(n, &mut stream(seed, FEATURE_STREAM));
    let eta: Vec<f64> = x
        .chunks(2)
        .flat_map(|r| {
            [
                sigmoid(tau * (w[0] * r[0] + w[1] * r[1])),
                sigmoid(tau * (w[2] * r[0] + w[3] * r[1])),
            ]
        })
        .collect();
    let eta = EtaTable::new(eta, n, 2)?;
    let labels = bernoulli_labels(&eta, seed);
    Ok(SyntheticSample {
        features: InstanceSet::new(x, n, 2)?,
        eta,
        labels,
    })
}

/// Row indices of a with-replacement resample in which label `k` is positive
/// in `round(target * n)` rows.
pub fn resample_indices(labels: &SampledLabels, k: usize, target: f64, seed: u64) -> Result<Vec<usize>> {
    if k >= labels.k() {
        return Err(Error::invalid(format!("label {k} out of range")));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid(format!("target prior {target} is not in (0, 1)")));
    }
    let (pos, neg): (Vec<usize>, Vec<usize>) = (0..labels.n()).partition(|&i| labels.get(i, k) == 1);
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::degenerate(Some(k), "need both classes to resample"));
    }
    let n = labels.n();
    let n_pos = (target * n as f64).round() as usize;
    let mut rng = stream(seed, RESAMPLE_STREAM);
    let mut idx = Vec::with_capacity(n);
    for slot in 0..n {
        let pool = if slot < n_pos { &pos } else { &neg };
        idx.push(pool[rng.random_range(0..pool.len())]);
    }
    idx.shuffle(&mut rng);
    Ok(idx)
}

pub fn resample_to_skew(data: &Dataset, k: usize, target: f64, seed: u64) -> Result<Dataset> {
    let idx = resample_indices(&data.labels, k, target, seed)?;
    Ok(data.select(&idx))
}
