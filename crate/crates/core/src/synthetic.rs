//! Seeded synthetic benchmark generators.
//!
//! All four generators are pure functions of `(n, seed)`: identical inputs
//! produce identical datasets, and calls are safe to run concurrently.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng;

/// Parameters of the two-class score model: points on the unit square are
/// scored by `alpha = coeff * (x1 - 0.5) * (x2 - 0.5)`, jittered by Gaussian
/// noise, and bucketed by `(lower, upper)`; scores landing between the two
/// thresholds fall in a transition zone where the class-2 probability decays
/// linearly with `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticIParams {
    pub lower: f64,
    pub upper: f64,
    pub sigma: f64,
    pub coeff: f64,
}

impl Default for SyntheticIParams {
    fn default() -> Self {
        Self { lower: -0.5, upper: 0.25, sigma: 0.125, coeff: 10.0 }
    }
}

/// Zone boundaries of the five-class score model: odd intervals are class
/// plateaus 1..=5, even intervals are the four transition zones.
pub const SYNTH_III_THRESHOLDS: [f64; 8] = [-1.5, -1.25, -1.0, -0.5, -0.1, 0.1, 0.5, 1.1];

/// Score `alpha` of a point on the unit square.
pub fn synthetic_i_score(x1: f64, x2: f64) -> f64 {
    let p = SyntheticIParams::default();
    p.coeff * (x1 - 0.5) * (x2 - 0.5)
}

/// Draws a two-class label for a fixed point, consuming noise from `rng`.
pub fn synthetic_i_label(x1: f64, x2: f64, rng: &mut impl Rng) -> usize {
    let p = SyntheticIParams::default();
    let alpha = synthetic_i_score(x1, x2);
    let noise = Normal::new(0.0, p.sigma).unwrap();
    let score = alpha + noise.sample(rng);
    if score < p.lower {
        1
    } else if score > p.upper {
        2
    } else {
        // transition zone: class-2 probability decreases linearly in alpha
        let u = rng.random_range(p.lower..p.upper);
        if u < alpha {
            2
        } else {
            1
        }
    }
}

/// Draws a five-class label for a fixed point, consuming noise from `rng`.
pub fn synthetic_iii_label(x1: f64, x2: f64, rng: &mut impl Rng) -> usize {
    let p = SyntheticIParams::default();
    let alpha = synthetic_i_score(x1, x2);
    let noise = Normal::new(0.0, p.sigma).unwrap();
    let score = alpha + noise.sample(rng);
    let t = &SYNTH_III_THRESHOLDS;
    // interval index in 0..9 over (-inf, t[0]), (t[0], t[1]), ..., (t[7], +inf)
    let idx = t.iter().position(|&b| score < b).unwrap_or(t.len());
    if idx % 2 == 0 {
        idx / 2 + 1 // plateau
    } else {
        // transition zone j between classes j and j+1
        let j = idx.div_ceil(2);
        let u = rng.random_range(t[idx - 1]..t[idx]);
        if u < alpha {
            j + 1
        } else {
            j
        }
    }
}

/// Two classes on the unit square separated by a saddle-shaped score with a
/// noisy transition zone.
pub fn generate_synthetic_i(n: usize, seed: u64) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::InvalidParam("n must be >= 1".into()));
    }
    let mut rng = rng::seeded(seed);
    let mut flat = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x1: f64 = rng.random_range(0.0..1.0);
        let x2: f64 = rng.random_range(0.0..1.0);
        flat.push(x1);
        flat.push(x2);
        labels.push(synthetic_i_label(x1, x2, &mut rng));
    }
    let features = Array2::from_shape_vec((n, 2), flat).expect("shape");
    LabeledDataset::new(features, labels, 2)
}

fn gaussian_block(
    rng: &mut impl Rng,
    count: usize,
    mean: f64,
    std: f64,
    label: usize,
    flat: &mut Vec<f64>,
    labels: &mut Vec<usize>,
) {
    let normal = Normal::new(mean, std).unwrap();
    for _ in 0..count {
        for _ in 0..2 {
            let g = normal.sample(rng);
            let eps: f64 = rng.random_range(0.025..0.25);
            flat.push(g + eps);
        }
        labels.push(label);
    }
}

/// Two Gaussian classes in the plane, means `(-2,-2)` / `(2,2)`, variances
/// `9I` / `25I`, plus independent per-coordinate noise `U[0.025, 0.25]`;
/// `n/2` points per class.
pub fn generate_synthetic_ii(n: usize, seed: u64) -> Result<LabeledDataset> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::InvalidParam(format!("n must be positive and even, got {n}")));
    }
    let mut rng = rng::seeded(seed);
    let mut flat = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    gaussian_block(&mut rng, n / 2, -2.0, 3.0, 1, &mut flat, &mut labels);
    gaussian_block(&mut rng, n / 2, 2.0, 5.0, 2, &mut flat, &mut labels);
    let features = Array2::from_shape_vec((n, 2), flat).expect("shape");
    LabeledDataset::new(features, labels, 2)
}

/// Five ordinal classes on the unit square: the same saddle score as the
/// two-class generator, bucketed into five plateaus separated by four noisy
/// transition zones.
pub fn generate_synthetic_iii(n: usize, seed: u64) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::InvalidParam("n must be >= 1".into()));
    }
    let mut rng = rng::seeded(seed);
    let mut flat = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x1: f64 = rng.random_range(0.0..1.0);
        let x2: f64 = rng.random_range(0.0..1.0);
        flat.push(x1);
        flat.push(x2);
        labels.push(synthetic_iii_label(x1, x2, &mut rng));
    }
    let features = Array2::from_shape_vec((n, 2), flat).expect("shape");
    LabeledDataset::new(features, labels, 5)
}

/// The two-Gaussian dataset plus a third class at mean `(7,7)`, variance
/// `4I`; `n/3` points per class, ordinal order `1 < 2 < 3`.
pub fn generate_synthetic_iv(n: usize, seed: u64) -> Result<LabeledDataset> {
    if n == 0 || !n.is_multiple_of(3) {
        return Err(Error::InvalidParam(format!(
            "n must be positive and divisible by 3, got {n}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let mut flat = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    gaussian_block(&mut rng, n / 3, -2.0, 3.0, 1, &mut flat, &mut labels);
    gaussian_block(&mut rng, n / 3, 2.0, 5.0, 2, &mut flat, &mut labels);
    gaussian_block(&mut rng, n / 3, 7.0, 2.0, 3, &mut flat, &mut labels);
    let features = Array2::from_shape_vec((n, 2), flat).expect("shape");
    LabeledDataset::new(features, labels, 3)
}
