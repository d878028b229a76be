//! Kernel functions over extended feature vectors.

use ndarray::ArrayView1;

use crate::error::{Error, Result};

/// Kernel choice for the weighted binary SVM. The kernel operates on the
/// full extended vector, so for RBF the cross-replica similarity decays with
/// the extension constant `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Linear,
    /// `k(a, b) = exp(-gamma * |a - b|^2)`, `gamma > 0`.
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Rbf { gamma } => {
                if *gamma > 0.0 && gamma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParam(format!("RBF gamma must be positive, got {gamma}")))
                }
            }
        }
    }

    /// Kernel value; panics on mismatched lengths (callers validate shapes
    /// at their API boundary).
    pub fn eval(&self, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
        match self {
            KernelSpec::Linear => a.dot(&b),
            KernelSpec::Rbf { gamma } => {
                let mut sq = 0.0;
                for (x, y) in a.iter().zip(b.iter()) {
                    let d = x - y;
                    sq += d * d;
                }
                (-gamma * sq).exp()
            }
        }
    }
}
