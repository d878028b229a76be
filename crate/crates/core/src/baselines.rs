//! Comparison designs: a single classifier with a rejection band around its
//! boundary, and independently trained cost-asymmetric classifier pairs.
//!
//! Both baselines work in the original feature space. Unlike the reduction
//! models they give no structural guarantee of nested boundaries: the
//! independent pairs can cross, producing regions where the label sequence
//! is contradictory. Those predictions decode by the same count rule and
//! carry the `non_monotone` flag so evaluation can report an ambiguity rate.

use ndarray::ArrayView1;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::replication::{cost_pair, decode, replica_cost, replica_label, Decision, Prediction, ReplicaLabel};
use crate::rng;
use crate::svm::{train_weighted, SmoConfig, SvmModel};

/// One equal-cost binary classifier plus a rejection half-width `t`:
/// points with `|f(x)| <= t` are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleThresholdModel {
    pub(crate) svm: SvmModel,
    pub(crate) t: f64,
    pub(crate) w_r: f64,
}

impl SingleThresholdModel {
    pub fn threshold(&self) -> f64 {
        self.t
    }

    pub fn p(&self) -> usize {
        self.svm.dim()
    }

    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<Prediction> {
        let f = self.svm.decision_value(x)?;
        let decision = if f.abs() <= self.t {
            Decision::Reject(1)
        } else if f < 0.0 {
            Decision::Class(1)
        } else {
            Decision::Class(2)
        };
        Ok(Prediction { decision, non_monotone: false })
    }
}

/// Candidate rejection half-widths: zero plus 33 evenly spaced order
/// statistics of the absolute decision values.
pub(crate) fn threshold_grid(abs_values: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = abs_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut grid = vec![0.0];
    if n > 0 {
        for j in 1..=33usize {
            let idx = (j * n / 34).min(n - 1);
            grid.push(sorted[idx]);
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Empirical risk of the band rule at half-width `t` over decision values
/// `f` with true classes in `{1, 2}`.
pub(crate) fn band_risk(f: &[f64], truth: &[usize], t: f64, w_r: f64) -> f64 {
    let n = f.len() as f64;
    let mut rejected = 0usize;
    let mut wrong = 0usize;
    for (&fi, &yi) in f.iter().zip(truth) {
        if fi.abs() <= t {
            rejected += 1;
        } else {
            let predicted = if fi < 0.0 { 1 } else { 2 };
            if predicted != yi {
                wrong += 1;
            }
        }
    }
    w_r * rejected as f64 / n + wrong as f64 / n
}

/// Trains the single-classifier baseline (binary problems only): an
/// equal-cost SVM fitted on four fifths of the training set, with `t` picked
/// on the held-out fifth to minimize the empirical risk `w_r·R + E`. Ties
/// break toward the larger `t`.
pub fn train_single_threshold(
    train: &LabeledDataset,
    w_r: f64,
    kernel: KernelSpec,
    c: f64,
    cfg: SmoConfig,
) -> Result<SingleThresholdModel> {
    if train.k() != 2 {
        return Err(Error::InvalidParam(format!(
            "single-threshold baseline needs K = 2, got K = {}",
            train.k()
        )));
    }
    cost_pair(w_r)?;

    // held-out fifth for threshold selection, seeded by the solver seed
    let l = train.n_rows();
    let mut idx: Vec<usize> = (0..l).collect();
    {
        use rand::seq::SliceRandom;
        let mut rng = rng::seeded(cfg.seed ^ rng::SALT_SPLIT);
        idx.shuffle(&mut rng);
    }
    let n_val = (l / 5).max(1).min(l.saturating_sub(2));
    let (fit_idx, val_idx) = idx.split_at(l - n_val);

    let fit = train.select(fit_idx)?;
    let svm = match fit_svm_binary(&fit, kernel, c, cfg) {
        Ok(svm) => svm,
        // a fifth this small can strand one class; fall back to the full set
        Err(Error::SingleClass) => fit_svm_binary(train, kernel, c, cfg)?,
        Err(e) => return Err(e),
    };

    let val = train.select(val_idx)?;
    let f: Vec<f64> = (0..val.n_rows())
        .map(|i| svm.decision_value(val.row(i)))
        .collect::<Result<_>>()?;
    let abs: Vec<f64> = f.iter().map(|v| v.abs()).collect();

    let mut best_t = 0.0;
    let mut best_risk = f64::INFINITY;
    for &t in &threshold_grid(&abs) {
        let risk = band_risk(&f, val.labels(), t, w_r);
        // <= keeps the larger t on ties (grid is ascending)
        if risk <= best_risk {
            best_risk = risk;
            best_t = t;
        }
    }
    Ok(SingleThresholdModel { svm, t: best_t, w_r })
}

fn fit_svm_binary(
    data: &LabeledDataset,
    kernel: KernelSpec,
    c: f64,
    cfg: SmoConfig,
) -> Result<SvmModel> {
    let y: Vec<f64> = data
        .labels()
        .iter()
        .map(|&k| if k == 1 { -1.0 } else { 1.0 })
        .collect();
    let costs = vec![1.0; data.n_rows()];
    train_weighted(data.features(), &y, &costs, kernel, c, cfg)
}

/// `2(K-1)` independently trained classifiers over the original space;
/// classifier `q` uses the replica-`q` labels and costs.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentPairModel {
    pub(crate) members: Vec<SvmModel>,
    pub(crate) k: usize,
    pub(crate) w_r: f64,
}

impl IndependentPairModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> usize {
        self.members[0].dim()
    }

    pub fn members(&self) -> &[SvmModel] {
        &self.members
    }

    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<Prediction> {
        let labels: Vec<ReplicaLabel> = self
            .members
            .iter()
            .map(|m| Ok(ReplicaLabel::from_sign(m.decision_value(x)?)))
            .collect::<Result<_>>()?;
        decode(&labels)
    }
}

/// Trains the independent-pair baseline: one weighted SVM per replica index,
/// each on the original features with that replica's labels and costs, with
/// nothing shared between members (not even the tie-break stream).
pub fn train_independent(
    train: &LabeledDataset,
    w_r: f64,
    kernel: KernelSpec,
    c: f64,
    cfg: SmoConfig,
) -> Result<IndependentPairModel> {
    let scheme = cost_pair(w_r)?;
    let k = train.k();
    let mut members = Vec::with_capacity(2 * (k - 1));
    for q in 1..=2 * (k - 1) {
        let y: Vec<f64> = train.labels().iter().map(|&cl| replica_label(cl, q).to_y()).collect();
        let costs: Vec<f64> = train.labels().iter().map(|&cl| replica_cost(cl, q, scheme)).collect();
        let member_cfg = SmoConfig { seed: rng::derive_seed(cfg.seed, q as u64), ..cfg };
        members.push(train_weighted(train.features(), &y, &costs, kernel, c, member_cfg)?);
    }
    Ok(IndependentPairModel { members, k, w_r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn separable() -> LabeledDataset {
        LabeledDataset::new(
            Array2::from_shape_vec(
                (10, 1),
                vec![-2.0, -1.8, -1.5, -1.2, -1.0, 1.0, 1.2, 1.5, 1.8, 2.0],
            )
            .unwrap(),
            vec![1, 1, 1, 1, 1, 2, 2, 2, 2, 2],
            2,
        )
        .unwrap()
    }

    fn overlapping() -> LabeledDataset {
        LabeledDataset::new(
            Array2::from_shape_vec(
                (12, 1),
                vec![-2.0, -1.5, -1.0, -0.5, 0.4, 1.1, -1.1, -0.4, 0.5, 1.0, 1.5, 2.0],
            )
            .unwrap(),
            vec![1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2],
            2,
        )
        .unwrap()
    }

    #[test]
    fn free_rejection_picks_the_widest_band() {
        let data = overlapping();
        let cfg = SmoConfig::default();
        let m = train_single_threshold(&data, 0.0, KernelSpec::Linear, 1.0, cfg).unwrap();

        // at w_r = 0 risk is non-increasing in t, so the largest grid value
        // (the max |f| on the validation fifth) wins; reconstruct that fifth
        // from the deterministic shuffle
        let l = data.n_rows();
        let mut idx: Vec<usize> = (0..l).collect();
        {
            use rand::seq::SliceRandom;
            let mut rng = rng::seeded(cfg.seed ^ rng::SALT_SPLIT);
            idx.shuffle(&mut rng);
        }
        let val_idx = &idx[l - (l / 5).max(1)..];
        let val_max = val_idx
            .iter()
            .map(|&i| m.svm.decision_value(data.row(i)).unwrap().abs())
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(m.threshold(), val_max);
        assert!(m.threshold() > 0.0);
    }

    #[test]
    fn expensive_rejection_on_separable_data_never_rejects() {
        let m = train_single_threshold(
            &separable(),
            0.49,
            KernelSpec::Linear,
            10.0,
            SmoConfig::default(),
        )
        .unwrap();
        assert_eq!(m.threshold(), 0.0);
        for (x, want) in [(-1.5, 1), (1.5, 2)] {
            let p = m.predict(array![x].view()).unwrap();
            assert_eq!(p.decision, Decision::Class(want));
            assert!(!p.non_monotone);
        }
    }

    #[test]
    fn zero_band_reproduces_the_plain_classifier() {
        let data = separable();
        let svm = fit_svm_binary(&data, KernelSpec::Linear, 10.0, SmoConfig::default()).unwrap();
        let m = SingleThresholdModel { svm: svm.clone(), t: 0.0, w_r: 0.3 };
        for i in 0..data.n_rows() {
            let f = svm.decision_value(data.row(i)).unwrap();
            let plain = if f < 0.0 { 1 } else { 2 };
            if f != 0.0 {
                assert_eq!(m.predict(data.row(i)).unwrap().decision, Decision::Class(plain));
            }
        }
    }

    #[test]
    fn chosen_threshold_minimizes_validation_risk() {
        // argmin property over the grid, recomputed from first principles
        let f: Vec<f64> = vec![-1.9, -1.2, -0.3, 0.2, 0.9, 1.7, -0.8, 0.4, 1.1, -0.1];
        let truth = vec![1, 1, 1, 1, 2, 2, 2, 2, 2, 1];
        let abs: Vec<f64> = f.iter().map(|v| v.abs()).collect();
        for w_r in [0.05, 0.2, 0.45] {
            let grid = threshold_grid(&abs);
            let mut best_t = 0.0;
            let mut best = f64::INFINITY;
            for &t in &grid {
                let r = band_risk(&f, &truth, t, w_r);
                if r <= best {
                    best = r;
                    best_t = t;
                }
            }
            for &t in &grid {
                assert!(
                    band_risk(&f, &truth, best_t, w_r) <= band_risk(&f, &truth, t, w_r) + 1e-15
                );
            }
        }
    }

    #[test]
    fn single_threshold_requires_binary_data() {
        let data = LabeledDataset::new(
            Array2::from_shape_vec((3, 1), vec![0.0, 1.0, 2.0]).unwrap(),
            vec![1, 2, 3],
            3,
        )
        .unwrap();
        assert!(train_single_threshold(
            &data,
            0.2,
            KernelSpec::Linear,
            1.0,
            SmoConfig::default()
        )
        .is_err());
    }

    #[test]
    fn independent_members_match_replica_rules() {
        let data = LabeledDataset::new(
            Array2::from_shape_vec((6, 1), vec![0.0, 0.5, 2.0, 2.5, 4.0, 4.5]).unwrap(),
            vec![1, 1, 2, 2, 3, 3],
            3,
        )
        .unwrap();
        let m = train_independent(&data, 0.2, KernelSpec::Linear, 10.0, SmoConfig::default())
            .unwrap();
        assert_eq!(m.members().len(), 4);

        // members 1 and 2 share labels (class 1 vs rest), differ in costs
        let scheme = cost_pair(0.2).unwrap();
        for cl in 1..=3 {
            assert_eq!(replica_label(cl, 1), replica_label(cl, 2));
        }
        assert_ne!(
            (1..=3).map(|cl| replica_cost(cl, 1, scheme)).collect::<Vec<_>>(),
            (1..=3).map(|cl| replica_cost(cl, 2, scheme)).collect::<Vec<_>>()
        );
    }

    #[test]
    fn equal_costs_and_seed_make_member_pairs_coincide() {
        let data = separable();
        let y: Vec<f64> = data.labels().iter().map(|&k| if k == 1 { -1.0 } else { 1.0 }).collect();
        let costs = vec![1.0; data.n_rows()];
        let cfg = SmoConfig { seed: 7, ..SmoConfig::default() };
        let a = train_weighted(data.features(), &y, &costs, KernelSpec::Linear, 5.0, cfg).unwrap();
        let b = train_weighted(data.features(), &y, &costs, KernelSpec::Linear, 5.0, cfg).unwrap();
        assert_eq!(a, b);
        let pair = IndependentPairModel { members: vec![a, b], k: 2, w_r: 0.2 };
        for x in [-2.0, -0.5, 0.0, 0.5, 2.0] {
            let p = pair.predict(array![x].view()).unwrap();
            assert!(!p.non_monotone, "x={x}");
            assert!(matches!(p.decision, Decision::Class(_)));
        }
    }

    /// 1-D linear member with decision f(x) = x - threshold.
    fn member_at(threshold: f64) -> SvmModel {
        SvmModel::from_parts(
            Array2::from_shape_vec((1, 1), vec![1.0]).unwrap(),
            vec![1.0],
            -threshold,
            KernelSpec::Linear,
            1.0,
            vec![1.0],
        )
    }

    #[test]
    fn crossed_boundaries_flag_ambiguous_points() {
        // boundary 1 at x = 1, boundary 2 at x = 0: crossed order
        let crossed = IndependentPairModel { members: vec![member_at(1.0), member_at(0.0)], k: 2, w_r: 0.2 };
        let p = crossed.predict(array![0.5].view()).unwrap();
        assert_eq!(p.decision, Decision::Reject(1));
        assert!(p.non_monotone);

        // nested order never flags
        let nested = IndependentPairModel { members: vec![member_at(0.0), member_at(1.0)], k: 2, w_r: 0.2 };
        for x in [-1.0, 0.5, 2.0] {
            assert!(!nested.predict(array![x].view()).unwrap().non_monotone);
        }
        assert_eq!(nested.predict(array![0.5].view()).unwrap().decision, Decision::Reject(1));
    }
}
