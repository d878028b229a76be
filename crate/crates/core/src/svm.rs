//! Cost-weighted binary kernel SVM trained by sequential minimal
//! optimization.
//!
//! The dual problem is `min ½ αᵗQα − eᵗα` subject to `yᵗα = 0` and the
//! per-sample box `0 ≤ αᵢ ≤ C·costᵢ`, with `Q_ij = yᵢyⱼk(xᵢ,xⱼ)`. The solver
//! repeatedly picks the maximal-violating pair (the most out-of-KKT indices
//! from the up/down candidate sets) and solves the two-variable subproblem
//! analytically, so the dual objective never decreases. Per-sample boxes are
//! all the cost-sensitivity there is: a row with zero cost can never enter
//! the working set.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::replication::ReplicatedDataset;
use crate::rng;

/// Solver knobs. `max_passes` bounds the work at `max_passes * l` pair
/// updates; convergence on the KKT gap usually stops training far earlier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoConfig {
    /// Termination threshold on the maximal KKT violation.
    pub tol: f64,
    /// Pair-update budget multiplier (total budget is `max_passes * l`).
    pub max_passes: usize,
    /// Seed for tie-breaking among equally violating indices.
    pub seed: u64,
}

impl Default for SmoConfig {
    fn default() -> Self {
        Self { tol: 1e-3, max_passes: 1000, seed: 0 }
    }
}

/// A trained weighted binary SVM: the retained (support) training rows, the
/// signed coefficients `αᵢyᵢ`, the bias, and the box data needed to audit
/// the KKT conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    rows: Array2<f64>,
    coeffs: Vec<f64>,
    bias: f64,
    kernel: KernelSpec,
    c: f64,
    row_costs: Vec<f64>,
}

impl SvmModel {
    pub fn n_support(&self) -> usize {
        self.rows.nrows()
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    /// Retained training rows, one per support vector.
    pub fn support_rows(&self) -> ArrayView2<'_, f64> {
        self.rows.view()
    }

    /// Signed dual coefficients `αᵢyᵢ` aligned with `support_rows`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Cost multipliers of the retained rows (box upper bounds are
    /// `C * cost`).
    pub fn row_costs(&self) -> &[f64] {
        &self.row_costs
    }

    pub(crate) fn from_parts(
        rows: Array2<f64>,
        coeffs: Vec<f64>,
        bias: f64,
        kernel: KernelSpec,
        c: f64,
        row_costs: Vec<f64>,
    ) -> Self {
        Self { rows, coeffs, bias, kernel, c, row_costs }
    }

    /// Decision value `Σ αᵢyᵢ k(xᵢ, x̄) + b`.
    pub fn decision_value(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: x.len() });
        }
        let mut sum = self.bias;
        for (i, &coef) in self.coeffs.iter().enumerate() {
            sum += coef * self.kernel.eval(self.rows.row(i), x);
        }
        Ok(sum)
    }

    /// Dual objective `Σαᵢ − ½ ΣΣ αᵢαⱼyᵢyⱼk(xᵢ,xⱼ)` reconstructed from the
    /// stored coefficients (`αᵢ = |αᵢyᵢ|` since `yᵢ = ±1`).
    pub fn dual_objective(&self) -> f64 {
        let alpha_sum: f64 = self.coeffs.iter().map(|c| c.abs()).sum();
        let mut quad = 0.0;
        for i in 0..self.coeffs.len() {
            for j in 0..self.coeffs.len() {
                quad += self.coeffs[i]
                    * self.coeffs[j]
                    * self.kernel.eval(self.rows.row(i), self.rows.row(j));
            }
        }
        alpha_sum - 0.5 * quad
    }

    /// Explicit weight vector for the linear kernel: `w = Σ αᵢyᵢ xᵢ`.
    pub fn linear_weights(&self) -> Result<Array1<f64>> {
        if self.kernel != KernelSpec::Linear {
            return Err(Error::InvalidParam(
                "weight vector is only defined for the linear kernel".into(),
            ));
        }
        let mut w = Array1::zeros(self.dim());
        for (i, &coef) in self.coeffs.iter().enumerate() {
            w.scaled_add(coef, &self.rows.row(i));
        }
        Ok(w)
    }
}

/// Trains the weighted SVM on a replicated dataset (the rejoSVM reduction:
/// one shared binary problem in the extended space).
pub fn train_svm(
    data: &ReplicatedDataset,
    kernel: KernelSpec,
    c: f64,
    cfg: SmoConfig,
) -> Result<SvmModel> {
    let y: Vec<f64> = (0..data.n_rows()).map(|i| data.y(i)).collect();
    train_weighted(data.features(), &y, data.costs(), kernel, c, cfg)
}

/// Trains a per-sample cost-weighted binary SVM on arbitrary rows with
/// labels in `{-1, +1}`.
pub fn train_weighted(
    x: ArrayView2<'_, f64>,
    y: &[f64],
    costs: &[f64],
    kernel: KernelSpec,
    c: f64,
    cfg: SmoConfig,
) -> Result<SvmModel> {
    kernel.validate()?;
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::InvalidParam(format!("C must be positive and finite, got {c}")));
    }
    let l = x.nrows();
    if l == 0 {
        return Err(Error::InvalidDataset("no training rows".into()));
    }
    if y.len() != l || costs.len() != l {
        return Err(Error::DimensionMismatch { expected: l, actual: y.len().min(costs.len()) });
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidDataset("labels must be -1 or +1".into()));
    }
    if costs.iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(Error::InvalidDataset("costs must be finite and >= 0".into()));
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::SingleClass);
    }

    // Precompute the Gram matrix; training sets here are small enough that
    // the O(l^2) memory is the cheapest correct cache.
    let mut gram = Array2::zeros((l, l));
    for i in 0..l {
        for j in 0..=i {
            let v = kernel.eval(x.row(i), x.row(j));
            if !v.is_finite() {
                return Err(Error::NonFinite("kernel matrix".into()));
            }
            gram[[i, j]] = v;
            gram[[j, i]] = v;
        }
    }

    let cbox: Vec<f64> = costs.iter().map(|&w| c * w).collect();
    let mut alpha = vec![0.0f64; l];
    // gradient of ½αQα − Σα at α = 0
    let mut grad = vec![-1.0f64; l];
    let mut rng = rng::seeded(cfg.seed ^ rng::SALT_TRAIN);
    let budget = cfg.max_passes.saturating_mul(l);

    let mut last_m = f64::NEG_INFINITY;
    let mut last_big_m = f64::INFINITY;

    for _ in 0..budget {
        // maximal-violating pair over the up/down candidate sets
        let mut m = f64::NEG_INFINITY;
        let mut i_up = usize::MAX;
        let mut up_ties = 0u32;
        let mut big_m = f64::INFINITY;
        let mut i_low = usize::MAX;
        let mut low_ties = 0u32;
        for t in 0..l {
            let v = -y[t] * grad[t];
            let in_up = (y[t] > 0.0 && alpha[t] < cbox[t]) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] < 0.0 && alpha[t] < cbox[t]) || (y[t] > 0.0 && alpha[t] > 0.0);
            if in_up {
                if v > m {
                    m = v;
                    i_up = t;
                    up_ties = 1;
                } else if v == m {
                    // reservoir sampling keeps the choice uniform over ties
                    up_ties += 1;
                    if rng.random_range(0..up_ties) == 0 {
                        i_up = t;
                    }
                }
            }
            if in_low {
                if v < big_m {
                    big_m = v;
                    i_low = t;
                    low_ties = 1;
                } else if v == big_m {
                    low_ties += 1;
                    if rng.random_range(0..low_ties) == 0 {
                        i_low = t;
                    }
                }
            }
        }
        last_m = m;
        last_big_m = big_m;
        if i_up == usize::MAX || i_low == usize::MAX || m - big_m <= cfg.tol {
            break;
        }
        let (i, j) = (i_up, i_low);

        // analytic two-variable update (working-set step along yᵗα = 0)
        let old_ai = alpha[i];
        let old_aj = alpha[j];
        if y[i] != y[j] {
            let mut quad = gram[[i, i]] + gram[[j, j]] - 2.0 * gram[[i, j]];
            if quad <= 0.0 {
                quad = 1e-12;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > cbox[i] - cbox[j] {
                if alpha[i] > cbox[i] {
                    alpha[i] = cbox[i];
                    alpha[j] = cbox[i] - diff;
                }
            } else if alpha[j] > cbox[j] {
                alpha[j] = cbox[j];
                alpha[i] = cbox[j] + diff;
            }
        } else {
            let mut quad = gram[[i, i]] + gram[[j, j]] - 2.0 * gram[[i, j]];
            if quad <= 0.0 {
                quad = 1e-12;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > cbox[i] {
                if alpha[i] > cbox[i] {
                    alpha[i] = cbox[i];
                    alpha[j] = sum - cbox[i];
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cbox[j] {
                if alpha[j] > cbox[j] {
                    alpha[j] = cbox[j];
                    alpha[i] = sum - cbox[j];
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let d_ai = alpha[i] - old_ai;
        let d_aj = alpha[j] - old_aj;
        if d_ai == 0.0 && d_aj == 0.0 {
            // numerically stuck pair; no progress possible along it
            break;
        }
        for t in 0..l {
            grad[t] += y[t] * y[i] * gram[[t, i]] * d_ai + y[t] * y[j] * gram[[t, j]] * d_aj;
        }
    }

    // bias from free support vectors; fall back to the violation midpoint
    let mut b_sum = 0.0;
    let mut b_n = 0usize;
    for t in 0..l {
        if alpha[t] > 0.0 && alpha[t] < cbox[t] {
            b_sum += -y[t] * grad[t];
            b_n += 1;
        }
    }
    let bias = if b_n > 0 {
        b_sum / b_n as f64
    } else if last_m.is_finite() && last_big_m.is_finite() {
        (last_m + last_big_m) / 2.0
    } else if last_m.is_finite() {
        last_m
    } else if last_big_m.is_finite() {
        last_big_m
    } else {
        0.0
    };

    let keep: Vec<usize> = (0..l).filter(|&t| alpha[t] > 0.0).collect();
    let rows = x.select(ndarray::Axis(0), &keep);
    let coeffs = keep.iter().map(|&t| alpha[t] * y[t]).collect();
    let row_costs = keep.iter().map(|&t| costs[t]).collect();
    Ok(SvmModel::from_parts(rows, coeffs, bias, kernel, c, row_costs))
}

/// Offsets `b_q` of the `2(K-1)` parallel boundaries induced by a
/// linear-kernel model: `b_1` is the model bias and `b_q = b_1 + w_{p+q-1}·h`
/// for `q >= 2`, where `w` is the extended weight vector.
pub fn induced_offsets(model: &SvmModel, h: f64, k: usize) -> Result<Vec<f64>> {
    let w = model.linear_weights()?;
    let n_replicas = 2 * (k - 1);
    let p = model
        .dim()
        .checked_sub(n_replicas - 1)
        .filter(|&p| p >= 1)
        .ok_or(Error::DimensionMismatch { expected: n_replicas, actual: model.dim() })?;
    let mut offsets = Vec::with_capacity(n_replicas);
    offsets.push(model.bias());
    for q in 2..=n_replicas {
        offsets.push(model.bias() + w[p + q - 2] * h);
    }
    Ok(offsets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LabeledDataset;
    use crate::replication::replicate;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn unit_costs(n: usize) -> Vec<f64> {
        vec![1.0; n]
    }

    #[test]
    fn two_point_max_margin_is_analytic() {
        let x = array![[-1.0], [1.0]];
        let y = [-1.0, 1.0];
        let m = train_weighted(
            x.view(),
            &y,
            &unit_costs(2),
            KernelSpec::Linear,
            1e6,
            SmoConfig::default(),
        )
        .unwrap();
        let w = m.linear_weights().unwrap();
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.bias(), 0.0, epsilon = 1e-9);
    }

    // Independent oracle: dense grid over (w, b) minimizing the primal
    // objective 0.5 w^2 + C Σ cost_i · max(0, 1 − y_i (w x_i + b)).
    fn primal_1d(w: f64, b: f64, x: &[f64], y: &[f64], costs: &[f64], c: f64) -> f64 {
        let hinge: f64 = x
            .iter()
            .zip(y)
            .zip(costs)
            .map(|((&xi, &yi), &wi)| wi * (1.0 - yi * (w * xi + b)).max(0.0))
            .sum();
        0.5 * w * w + c * hinge
    }

    #[test]
    fn asymmetric_costs_shift_the_boundary_toward_the_cheap_class() {
        let xs = [-1.0, 1.0];
        let ys = [-1.0, 1.0];
        let costs = [0.9, 0.1];
        let c = 1.0;
        let x = array![[-1.0], [1.0]];
        let m =
            train_weighted(x.view(), &ys, &costs, KernelSpec::Linear, c, SmoConfig::default())
                .unwrap();
        let w = m.linear_weights().unwrap()[0];
        let b = m.bias();

        // grid-search oracle over the primal
        let mut best = f64::INFINITY;
        for wi in 0..=400 {
            let wv = wi as f64 * 0.01 - 2.0;
            for bi in 0..=400 {
                let bv = bi as f64 * 0.01 - 2.0;
                best = best.min(primal_1d(wv, bv, &xs, &ys, &costs, c));
            }
        }
        let ours = primal_1d(w, b, &xs, &ys, &costs, c);
        assert!(ours <= best + 1e-6, "primal {ours} vs grid optimum {best}");

        // equal costs put the boundary at 0; cheap +1 errors push it right
        let boundary = -b / w;
        assert!(boundary > 0.5, "boundary {boundary} did not shift");
    }

    #[test]
    fn xor_with_rbf_fits_exactly() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]];
        let y = [-1.0, -1.0, 1.0, 1.0];
        let m = train_weighted(
            x.view(),
            &y,
            &unit_costs(4),
            KernelSpec::Rbf { gamma: 1.0 },
            1e3,
            SmoConfig::default(),
        )
        .unwrap();
        for (i, &yi) in y.iter().enumerate() {
            let f = m.decision_value(x.row(i)).unwrap();
            assert!(f * yi > 0.0, "row {i}: f={f}, y={yi}");
        }
    }

    #[test]
    fn single_class_and_bad_inputs_error() {
        let x = array![[0.0], [1.0]];
        assert!(matches!(
            train_weighted(
                x.view(),
                &[1.0, 1.0],
                &unit_costs(2),
                KernelSpec::Linear,
                1.0,
                SmoConfig::default()
            ),
            Err(Error::SingleClass)
        ));
        assert!(train_weighted(
            x.view(),
            &[1.0, 0.5],
            &unit_costs(2),
            KernelSpec::Linear,
            1.0,
            SmoConfig::default()
        )
        .is_err());
        assert!(train_weighted(
            x.view(),
            &[1.0, -1.0],
            &unit_costs(2),
            KernelSpec::Linear,
            0.0,
            SmoConfig::default()
        )
        .is_err());
        assert!(train_weighted(
            x.view(),
            &[1.0, -1.0],
            &[1.0, -0.5],
            KernelSpec::Linear,
            1.0,
            SmoConfig::default()
        )
        .is_err());
    }

    fn toy_replicated(w_r: f64) -> crate::replication::ReplicatedDataset {
        let data = LabeledDataset::new(
            array![
                [0.1, 0.4],
                [0.4, 0.1],
                [0.9, 1.3],
                [1.3, 0.9],
                [0.6, 0.7],
                [0.8, 0.5]
            ],
            vec![1, 1, 2, 2, 1, 2],
            2,
        )
        .unwrap();
        replicate(&data, 1.0, w_r).unwrap()
    }

    #[test]
    fn model_satisfies_dual_feasibility() {
        let data = toy_replicated(0.2);
        let m = train_svm(&data, KernelSpec::Linear, 10.0, SmoConfig::default()).unwrap();
        let mut sum_ay = 0.0;
        for (i, &coef) in m.coeffs().iter().enumerate() {
            let alpha = coef.abs();
            let limit = m.c() * m.row_costs()[i];
            assert!(alpha <= limit + 1e-12, "alpha {alpha} over box {limit}");
            sum_ay += coef;
        }
        assert!(sum_ay.abs() <= 1e-6, "sum alpha*y = {sum_ay}");
    }

    #[test]
    fn free_support_vectors_sit_on_the_margin() {
        let data = toy_replicated(0.2);
        let m = train_svm(&data, KernelSpec::Rbf { gamma: 0.5 }, 5.0, SmoConfig::default())
            .unwrap();
        let mut found = 0;
        for (i, &coef) in m.coeffs().iter().enumerate() {
            let alpha = coef.abs();
            let limit = m.c() * m.row_costs()[i];
            if alpha > 1e-9 && alpha < limit - 1e-9 {
                let y = coef.signum();
                let f = m.decision_value(m.support_rows().row(i)).unwrap();
                assert_abs_diff_eq!(y * f, 1.0, epsilon = 1e-3);
                found += 1;
            }
        }
        assert!(found > 0, "no free support vectors to audit");
    }

    #[test]
    fn linear_decision_is_affine() {
        let data = toy_replicated(0.3);
        let m = train_svm(&data, KernelSpec::Linear, 10.0, SmoConfig::default()).unwrap();
        let a = array![0.2, 0.3, 0.0];
        let b = array![1.0, 0.9, 1.0];
        let mid = (&a + &b) / 2.0;
        let fa = m.decision_value(a.view()).unwrap();
        let fb = m.decision_value(b.view()).unwrap();
        let fm = m.decision_value(mid.view()).unwrap();
        assert_abs_diff_eq!(fm, (fa + fb) / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn replica_value_difference_is_constant_for_linear_kernel() {
        let data = toy_replicated(0.2);
        let m = train_svm(&data, KernelSpec::Linear, 10.0, SmoConfig::default()).unwrap();
        let mut rng = crate::rng::seeded(3);
        let mut diffs = Vec::new();
        for _ in 0..100 {
            let x = array![
                rng.random_range(-2.0..2.0f64),
                rng.random_range(-2.0..2.0f64)
            ];
            let x1 = crate::replication::extend_point(x.view(), 1, 1.0, 2).unwrap();
            let x2 = crate::replication::extend_point(x.view(), 2, 1.0, 2).unwrap();
            let d = m.decision_value(x2.view()).unwrap() - m.decision_value(x1.view()).unwrap();
            diffs.push(d);
        }
        let spread = diffs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - diffs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread <= 1e-9, "spread {spread}");

        // and the constant is exactly w_{p+1} * h
        let w = m.linear_weights().unwrap();
        assert_abs_diff_eq!(diffs[0], w[2] * 1.0, epsilon = 1e-9);
    }

    #[test]
    fn induced_offsets_match_decision_values() {
        let data = toy_replicated(0.25);
        let m = train_svm(&data, KernelSpec::Linear, 10.0, SmoConfig::default()).unwrap();
        let offsets = induced_offsets(&m, 1.0, 2).unwrap();
        assert_eq!(offsets.len(), 2);
        let w = m.linear_weights().unwrap();
        assert_abs_diff_eq!(offsets[1] - offsets[0], w[2] * 1.0, epsilon = 1e-12);

        // recompute from decision values at the origin
        let x = array![0.0, 0.0];
        for q in 1..=2 {
            let ext = crate::replication::extend_point(x.view(), q, 1.0, 2).unwrap();
            let f = m.decision_value(ext.view()).unwrap();
            assert_abs_diff_eq!(f, offsets[q - 1], epsilon = 1e-9);
        }

        let rbf = train_svm(&data, KernelSpec::Rbf { gamma: 1.0 }, 10.0, SmoConfig::default())
            .unwrap();
        assert!(induced_offsets(&rbf, 1.0, 2).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy_replicated(0.2);
        let cfg = SmoConfig { seed: 9, ..SmoConfig::default() };
        let a = train_svm(&data, KernelSpec::Rbf { gamma: 0.7 }, 3.0, cfg).unwrap();
        let b = train_svm(&data, KernelSpec::Rbf { gamma: 0.7 }, 3.0, cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dual_objective_monotone_in_budget() {
        let data = toy_replicated(0.2);
        let mut prev = f64::NEG_INFINITY;
        for passes in [1, 2, 4, 8, 1000] {
            let cfg = SmoConfig { max_passes: passes, seed: 4, ..SmoConfig::default() };
            let m = train_svm(&data, KernelSpec::Rbf { gamma: 0.5 }, 5.0, cfg).unwrap();
            let obj = m.dual_objective();
            assert!(obj >= prev - 1e-9, "dual dropped: {prev} -> {obj}");
            prev = obj;
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let data = toy_replicated(0.2);
        let m = train_svm(&data, KernelSpec::Linear, 1.0, SmoConfig::default()).unwrap();
        let bad = array![0.0, 0.0];
        assert!(matches!(
            m.decision_value(bad.view()),
            Err(Error::DimensionMismatch { expected: 3, actual: 2 })
        ));
    }
}
