//! Trained reduction models and prediction.
//!
//! A [`RejectModel`] owns one binary classifier over the extended space plus
//! the geometry (`p`, `K`, `h`) needed to replicate an incoming point,
//! classify every replica, and decode the resulting label sequence.

use ndarray::ArrayView1;

use crate::baselines::{IndependentPairModel, SingleThresholdModel};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::mlp::{mlp_decision, train_mlp, MlpConfig, MlpModel};
use crate::replication::{decode, extend_point, replicate, Prediction, ReplicaLabel};
use crate::svm::{train_svm, SmoConfig, SvmModel};

/// The binary classifier backing a reduction model.
#[derive(Debug, Clone, PartialEq)]
pub enum ExtendedClassifier {
    Svm(SvmModel),
    Mlp(MlpModel),
}

impl ExtendedClassifier {
    pub fn decision_value(&self, x_ext: ArrayView1<'_, f64>) -> Result<f64> {
        match self {
            ExtendedClassifier::Svm(m) => m.decision_value(x_ext),
            ExtendedClassifier::Mlp(m) => mlp_decision(m, x_ext),
        }
    }
}

/// A trained reduction model (rejoSVM or rejoNN).
#[derive(Debug, Clone, PartialEq)]
pub struct RejectModel {
    pub classifier: ExtendedClassifier,
    /// Original-space dimensionality.
    pub p: usize,
    /// Class count.
    pub k: usize,
    /// Extension constant used at training time.
    pub h: f64,
    /// Rejection cost the model was trained for.
    pub w_r: f64,
}

impl RejectModel {
    pub fn n_replicas(&self) -> usize {
        2 * (self.k - 1)
    }

    /// Decision value of each replica of `x`, in replica order.
    pub fn replica_values(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>> {
        if x.len() != self.p {
            return Err(Error::DimensionMismatch { expected: self.p, actual: x.len() });
        }
        (1..=self.n_replicas())
            .map(|q| {
                let ext = extend_point(x, q, self.h, self.k)?;
                self.classifier.decision_value(ext.view())
            })
            .collect()
    }

    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<Prediction> {
        predict(self, x)
    }
}

/// Classifies every replica of `x`, maps signs to replica labels (an exact
/// zero counts as `Upper`), and decodes by the count rule.
pub fn predict(model: &RejectModel, x: ArrayView1<'_, f64>) -> Result<Prediction> {
    let values = model.replica_values(x)?;
    let labels: Vec<ReplicaLabel> = values.iter().map(|&v| ReplicaLabel::from_sign(v)).collect();
    decode(&labels)
}

/// Trains a rejoSVM model: replicate, then solve one weighted binary SVM.
pub fn train_rejo_svm(
    data: &LabeledDataset,
    h: f64,
    w_r: f64,
    kernel: KernelSpec,
    c: f64,
    cfg: SmoConfig,
) -> Result<RejectModel> {
    let replicated = replicate(data, h, w_r)?;
    let svm = train_svm(&replicated, kernel, c, cfg)?;
    Ok(RejectModel {
        classifier: ExtendedClassifier::Svm(svm),
        p: data.n_features(),
        k: data.k(),
        h,
        w_r,
    })
}

/// Trains a rejoNN model: replicate, then fit the partially-linear network.
pub fn train_rejo_nn(
    data: &LabeledDataset,
    h: f64,
    w_r: f64,
    cfg: &MlpConfig,
) -> Result<RejectModel> {
    let replicated = replicate(data, h, w_r)?;
    let mlp = train_mlp(&replicated, cfg)?;
    Ok(RejectModel {
        classifier: ExtendedClassifier::Mlp(mlp),
        p: data.n_features(),
        k: data.k(),
        h,
        w_r,
    })
}

/// Any trained model this crate can serialize, load and evaluate.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Rejo(RejectModel),
    SingleThreshold(SingleThresholdModel),
    IndependentPair(IndependentPairModel),
}

impl TrainedModel {
    /// Stable kind tag used by the model file format.
    pub fn kind(&self) -> &'static str {
        match self {
            TrainedModel::Rejo(m) => match m.classifier {
                ExtendedClassifier::Svm(_) => "rejo-svm",
                ExtendedClassifier::Mlp(_) => "rejo-nn",
            },
            TrainedModel::SingleThreshold(_) => "single-threshold",
            TrainedModel::IndependentPair(_) => "independent-pair",
        }
    }

    pub fn k(&self) -> usize {
        match self {
            TrainedModel::Rejo(m) => m.k,
            TrainedModel::SingleThreshold(_) => 2,
            TrainedModel::IndependentPair(m) => m.k(),
        }
    }

    /// Original-space dimensionality accepted by `predict`.
    pub fn p(&self) -> usize {
        match self {
            TrainedModel::Rejo(m) => m.p,
            TrainedModel::SingleThreshold(m) => m.p(),
            TrainedModel::IndependentPair(m) => m.p(),
        }
    }

    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<Prediction> {
        match self {
            TrainedModel::Rejo(m) => m.predict(x),
            TrainedModel::SingleThreshold(m) => m.predict(x),
            TrainedModel::IndependentPair(m) => m.predict(x),
        }
    }
}
