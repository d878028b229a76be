//! Partially-linear neural network for the replicated problem.
//!
//! The decision function is `out(x̄) = G(x) + uᵗe + bias`, where `x` is the
//! original part of the extended vector, `e` the extension part, `G` a small
//! feed-forward network with tanh hidden layers, and `u` a plain linear map.
//! Because the extension coordinates enter only linearly, the boundaries
//! induced in the original space are parallel level sets of the same `G`,
//! which is what rules out crossing boundaries.
//!
//! Training minimizes the cost-weighted logistic loss
//! `Σᵢ costᵢ · ln(1 + exp(−yᵢ·out(x̄ᵢ)))` by seeded mini-batch gradient
//! descent.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::replication::ReplicatedDataset;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layer {
    /// `out x in` weight matrix.
    pub(crate) w: Array2<f64>,
    pub(crate) b: Array1<f64>,
}

/// Training knobs for the partially-linear network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    /// Hidden layer sizes of `G`; empty means affine `G`.
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self { hidden: vec![8], lr: 0.1, epochs: 200, batch_size: 32, seed: 0 }
    }
}

/// A trained (or freshly initialized) partially-linear network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub(crate) layers: Vec<Layer>,
    /// Final linear readout of the last hidden activation (or of `x` itself
    /// when there are no hidden layers). Its bias is the model-level `bias`.
    pub(crate) out_w: Array1<f64>,
    /// Linear extension weights, one per extension coordinate.
    pub(crate) u: Array1<f64>,
    pub(crate) bias: f64,
    pub(crate) p: usize,
}

impl MlpModel {
    /// Fresh model: fan-in-scaled uniform weights for `G`, zero extension
    /// weights (so all replica boundaries initially coincide), zero bias.
    pub fn init_random(p: usize, k: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        if p == 0 || k < 2 {
            return Err(Error::InvalidParam(format!("need p >= 1 and K >= 2, got p={p}, K={k}")));
        }
        if hidden.contains(&0) {
            return Err(Error::InvalidParam("hidden layer sizes must be >= 1".into()));
        }
        let ext_len = 2 * (k - 1) - 1;
        let mut rng = rng::seeded(seed ^ rng::SALT_TRAIN);
        let mut layers = Vec::with_capacity(hidden.len());
        let mut fan_in = p;
        for &size in hidden {
            let s = 1.0 / (fan_in as f64).sqrt();
            let w = Array2::from_shape_fn((size, fan_in), |_| rng.random_range(-s..s));
            let b = Array1::from_shape_fn(size, |_| rng.random_range(-s..s));
            layers.push(Layer { w, b });
            fan_in = size;
        }
        let s = 1.0 / (fan_in as f64).sqrt();
        let out_w = Array1::from_shape_fn(fan_in, |_| rng.random_range(-s..s));
        Ok(Self { layers, out_w, u: Array1::zeros(ext_len), bias: 0.0, p })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Extended input dimensionality `p + 2(K-1) - 1`.
    pub fn dim(&self) -> usize {
        self.p + self.u.len()
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.b.len()).collect()
    }

    pub fn u(&self) -> ArrayView1<'_, f64> {
        self.u.view()
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// `G(x)` plus the hidden activations needed for backprop.
    fn forward_g(&self, x: ArrayView1<'_, f64>) -> (f64, Vec<Array1<f64>>) {
        let mut acts: Vec<Array1<f64>> = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for layer in &self.layers {
            a = (layer.w.dot(&a) + &layer.b).mapv(f64::tanh);
            acts.push(a.clone());
        }
        (self.out_w.dot(&a), acts)
    }

    fn param_count(&self) -> usize {
        let g: usize = self.layers.iter().map(|l| l.w.len() + l.b.len()).sum();
        g + self.out_w.len() + self.u.len() + 1
    }

    fn get_params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            v.extend(l.w.iter());
            v.extend(l.b.iter());
        }
        v.extend(self.out_w.iter());
        v.extend(self.u.iter());
        v.push(self.bias);
        v
    }

    fn set_params(&mut self, v: &[f64]) {
        let mut it = v.iter().copied();
        for l in &mut self.layers {
            for w in l.w.iter_mut() {
                *w = it.next().unwrap();
            }
            for b in l.b.iter_mut() {
                *b = it.next().unwrap();
            }
        }
        for w in self.out_w.iter_mut() {
            *w = it.next().unwrap();
        }
        for u in self.u.iter_mut() {
            *u = it.next().unwrap();
        }
        self.bias = it.next().unwrap();
        assert!(it.next().is_none());
    }
}

/// Decision value `G(x) + uᵗe + bias` of an extended vector.
pub fn mlp_decision(model: &MlpModel, x_ext: ArrayView1<'_, f64>) -> Result<f64> {
    if x_ext.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), actual: x_ext.len() });
    }
    let (g, _) = model.forward_g(x_ext.slice(ndarray::s![..model.p]));
    Ok(g + model.u.dot(&x_ext.slice(ndarray::s![model.p..])) + model.bias)
}

/// Numerically stable `ln(1 + exp(-z))`.
fn softplus_neg(z: f64) -> f64 {
    (-z).max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Cost-weighted logistic loss `Σᵢ costᵢ · ln(1 + exp(−yᵢ·outᵢ))` over
/// arbitrary extended rows.
pub fn weighted_loss(
    model: &MlpModel,
    x: ArrayView2<'_, f64>,
    y: &[f64],
    costs: &[f64],
) -> Result<f64> {
    if y.len() != x.nrows() || costs.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            actual: y.len().min(costs.len()),
        });
    }
    let mut total = 0.0;
    for i in 0..x.nrows() {
        let out = mlp_decision(model, x.row(i))?;
        total += costs[i] * softplus_neg(y[i] * out);
    }
    Ok(total)
}

/// Gradient of the weighted loss in `get_params` order, accumulated over the
/// given rows.
fn loss_gradient(
    model: &MlpModel,
    x: ArrayView2<'_, f64>,
    y: &[f64],
    costs: &[f64],
    rows: &[usize],
) -> Vec<f64> {
    let mut gw: Vec<Array2<f64>> = model.layers.iter().map(|l| Array2::zeros(l.w.dim())).collect();
    let mut gb: Vec<Array1<f64>> = model.layers.iter().map(|l| Array1::zeros(l.b.len())).collect();
    let mut gout = Array1::zeros(model.out_w.len());
    let mut gu = Array1::zeros(model.u.len());
    let mut gbias = 0.0;

    for &i in rows {
        let xi = x.row(i);
        let (orig, ext) = (xi.slice(ndarray::s![..model.p]), xi.slice(ndarray::s![model.p..]));
        let (g, acts) = model.forward_g(orig);
        let out = g + model.u.dot(&ext) + model.bias;
        // d/dout of cost * ln(1 + exp(-y*out)) = -cost * y * sigmoid(-y*out)
        let z = y[i] * out;
        let dout = -costs[i] * y[i] / (1.0 + z.exp());

        gbias += dout;
        gu.scaled_add(dout, &ext);
        let last_act = acts.last().map(|a| a.view()).unwrap_or(orig);
        gout.scaled_add(dout, &last_act);

        if !model.layers.is_empty() {
            // delta at the last hidden layer
            let mut delta = model.out_w.to_owned();
            delta *= dout;
            delta = &delta * &acts[acts.len() - 1].mapv(|a| 1.0 - a * a);
            for li in (0..model.layers.len()).rev() {
                let below = if li == 0 { orig } else { acts[li - 1].view() };
                for (r, &d) in delta.iter().enumerate() {
                    gb[li][r] += d;
                    for (c, &a) in below.iter().enumerate() {
                        gw[li][[r, c]] += d * a;
                    }
                }
                if li > 0 {
                    let back = model.layers[li].w.t().dot(&delta);
                    delta = &back * &acts[li - 1].mapv(|a| 1.0 - a * a);
                }
            }
        }
    }

    let mut v = Vec::with_capacity(model.param_count());
    for li in 0..model.layers.len() {
        v.extend(gw[li].iter());
        v.extend(gb[li].iter());
    }
    v.extend(gout.iter());
    v.extend(gu.iter());
    v.push(gbias);
    v
}

/// Trains the partially-linear network on a replicated dataset by
/// mini-batch gradient descent (batch-averaged steps, seeded shuffling).
pub fn train_mlp(data: &ReplicatedDataset, cfg: &MlpConfig) -> Result<MlpModel> {
    if !cfg.lr.is_finite() || cfg.lr <= 0.0 {
        return Err(Error::InvalidParam(format!("learning rate must be positive, got {}", cfg.lr)));
    }
    if cfg.epochs == 0 {
        return Err(Error::InvalidParam("epochs must be >= 1".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidParam("batch size must be >= 1".into()));
    }
    let mut model = MlpModel::init_random(data.p(), data.k(), &cfg.hidden, cfg.seed)?;
    let x = data.features();
    let y: Vec<f64> = (0..data.n_rows()).map(|i| data.y(i)).collect();
    let costs = data.costs();

    let mut order: Vec<usize> = (0..data.n_rows()).collect();
    let mut shuffle_rng = rng::seeded(cfg.seed ^ rng::SALT_TRAIN ^ 0x6d6c_705f_7368_7566);
    let mut params = model.get_params();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(cfg.batch_size) {
            let grad = loss_gradient(&model, x, &y, costs, batch);
            let scale = cfg.lr / batch.len() as f64;
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= scale * g;
            }
            model.set_params(&params);
        }
        let loss = weighted_loss(&model, x, &y, costs)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
    }
    Ok(model)
}

/// Compares the analytic gradient of the weighted loss against central
/// finite differences on a subsample of at most 20 rows, perturbing every
/// parameter. Returns the worst per-parameter discrepancy relative to the
/// overall gradient magnitude: `max_i |aᵢ − nᵢ| / max(‖a‖ + ‖n‖, 1e-8)`.
pub fn gradient_check(model: &MlpModel, data: &ReplicatedDataset, eps: f64) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::InvalidParam(format!(
            "finite-difference step must be in [1e-7, 1e-3], got {eps}"
        )));
    }
    let n = data.n_rows().min(20);
    let rows: Vec<usize> = (0..n).collect();
    let x = data.features();
    let y: Vec<f64> = (0..data.n_rows()).map(|i| data.y(i)).collect();
    let costs = data.costs();

    let analytic = loss_gradient(model, x, &y, costs, &rows);
    let sub = data.features().select(ndarray::Axis(0), &rows);
    let sub_y: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    let sub_costs: Vec<f64> = rows.iter().map(|&i| costs[i]).collect();

    let mut probe = model.clone();
    let base = model.get_params();
    let mut numeric = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut params = base.clone();
        params[i] = base[i] + eps;
        probe.set_params(&params);
        let up = weighted_loss(&probe, sub.view(), &sub_y, &sub_costs)?;
        params[i] = base[i] - eps;
        probe.set_params(&params);
        let down = weighted_loss(&probe, sub.view(), &sub_y, &sub_costs)?;
        numeric.push((up - down) / (2.0 * eps));
    }

    let norm = |v: &[f64]| v.iter().map(|g| g * g).sum::<f64>().sqrt();
    let scale = (norm(&analytic) + norm(&numeric)).max(1e-8);
    let worst = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max);
    Ok(worst / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LabeledDataset;
    use crate::replication::{extend_point, replicate};
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array1};

    fn separable_replicated() -> ReplicatedDataset {
        let data = LabeledDataset::new(
            array![
                [0.0, 0.0],
                [0.2, 0.1],
                [0.1, 0.3],
                [0.9, 1.0],
                [1.1, 0.8],
                [1.0, 1.2]
            ],
            vec![1, 1, 1, 2, 2, 2],
            2,
        )
        .unwrap();
        replicate(&data, 1.0, 0.2).unwrap()
    }

    #[test]
    fn affine_model_fits_separable_data() {
        let data = separable_replicated();
        let cfg = MlpConfig { hidden: vec![], lr: 0.5, epochs: 500, ..Default::default() };
        let m = train_mlp(&data, &cfg).unwrap();
        for i in 0..data.n_rows() {
            let out = mlp_decision(&m, data.row(i)).unwrap();
            assert!(out * data.y(i) > 0.0, "row {i}: out={out}, y={}", data.y(i));
        }
    }

    #[test]
    fn final_loss_not_above_initial() {
        let data = separable_replicated();
        let cfg = MlpConfig { hidden: vec![4], lr: 0.1, epochs: 50, ..Default::default() };
        let y: Vec<f64> = (0..data.n_rows()).map(|i| data.y(i)).collect();
        let fresh = MlpModel::init_random(data.p(), data.k(), &cfg.hidden, cfg.seed).unwrap();
        let before = weighted_loss(&fresh, data.features(), &y, data.costs()).unwrap();
        let trained = train_mlp(&data, &cfg).unwrap();
        let after = weighted_loss(&trained, data.features(), &y, data.costs()).unwrap();
        assert!(after <= before, "loss went up: {before} -> {after}");
    }

    #[test]
    fn doubled_costs_double_the_loss() {
        let data = separable_replicated();
        let m = MlpModel::init_random(data.p(), data.k(), &[5], 3).unwrap();
        let y: Vec<f64> = (0..data.n_rows()).map(|i| data.y(i)).collect();
        let doubled: Vec<f64> = data.costs().iter().map(|c| 2.0 * c).collect();
        let base = weighted_loss(&m, data.features(), &y, data.costs()).unwrap();
        let twice = weighted_loss(&m, data.features(), &y, &doubled).unwrap();
        assert_eq!(twice, 2.0 * base);
    }

    #[test]
    fn training_is_deterministic() {
        let data = separable_replicated();
        let cfg = MlpConfig { hidden: vec![6], epochs: 30, seed: 11, ..Default::default() };
        let a = train_mlp(&data, &cfg).unwrap();
        let b = train_mlp(&data, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn replica_outputs_differ_by_extension_weight() {
        let data = separable_replicated();
        let cfg = MlpConfig { epochs: 20, ..Default::default() };
        let m = train_mlp(&data, &cfg).unwrap();
        let x = array![0.3, 0.7];
        let f1 = mlp_decision(&m, extend_point(x.view(), 1, 1.0, 2).unwrap().view()).unwrap();
        let f2 = mlp_decision(&m, extend_point(x.view(), 2, 1.0, 2).unwrap().view()).unwrap();
        assert_abs_diff_eq!(f2 - f1, m.u()[0] * 1.0, epsilon = 1e-12);
    }

    #[test]
    fn output_is_affine_in_extension_coordinates() {
        let m = MlpModel::init_random(3, 3, &[4], 7).unwrap();
        let mut rng = crate::rng::seeded(8);
        for _ in 0..20 {
            let x = Array1::from_shape_fn(3, |_| rng.random_range(-1.0..1.0));
            let e = Array1::from_shape_fn(3, |_| rng.random_range(-2.0..2.0));
            let mut full = Array1::zeros(6);
            full.slice_mut(ndarray::s![..3]).assign(&x);
            full.slice_mut(ndarray::s![3..]).assign(&e);
            let mut zeroed = full.clone();
            zeroed.slice_mut(ndarray::s![3..]).fill(0.0);
            let with_e = mlp_decision(&m, full.view()).unwrap();
            let without = mlp_decision(&m, zeroed.view()).unwrap();
            assert_abs_diff_eq!(with_e - without, m.u().dot(&e), epsilon = 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = separable_replicated();
        let m = MlpModel::init_random(data.p(), data.k(), &[6, 4], 17).unwrap();
        let err = gradient_check(&m, &data, 1e-5).unwrap();
        assert!(err <= 1e-4, "gradient discrepancy {err}");
    }

    #[test]
    fn affine_gradient_is_near_exact() {
        let data = separable_replicated();
        let m = MlpModel::init_random(data.p(), data.k(), &[], 18).unwrap();
        let err = gradient_check(&m, &data, 1e-5).unwrap();
        assert!(err <= 1e-7, "affine gradient discrepancy {err}");
    }

    #[test]
    fn zero_cost_rows_contribute_nothing() {
        let data = separable_replicated();
        let m = MlpModel::init_random(data.p(), data.k(), &[4], 19).unwrap();
        let y: Vec<f64> = (0..data.n_rows()).map(|i| data.y(i)).collect();
        let rows: Vec<usize> = (0..data.n_rows()).collect();
        let zero = vec![0.0; data.n_rows()];
        let g = loss_gradient(&m, data.features(), &y, &zero, &rows);
        assert!(g.iter().all(|&v| v == 0.0));

        // zeroing one row's cost equals dropping that row
        let mut partial = data.costs().to_vec();
        partial[0] = 0.0;
        let without_first: Vec<usize> = (1..data.n_rows()).collect();
        let a = loss_gradient(&m, data.features(), &y, &partial, &rows);
        let b = loss_gradient(&m, data.features(), &y, data.costs(), &without_first);
        for (ga, gb) in a.iter().zip(&b) {
            assert_abs_diff_eq!(ga, gb, epsilon = 1e-12);
        }
    }

    #[test]
    fn epsilon_out_of_range_is_rejected() {
        let data = separable_replicated();
        let m = MlpModel::init_random(data.p(), data.k(), &[], 1).unwrap();
        assert!(gradient_check(&m, &data, 1e-2).is_err());
        assert!(gradient_check(&m, &data, 1e-8).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = MlpModel::init_random(2, 2, &[3], 1).unwrap();
        assert!(matches!(
            mlp_decision(&m, array![1.0, 2.0].view()),
            Err(Error::DimensionMismatch { expected: 3, actual: 2 })
        ));
    }
}
