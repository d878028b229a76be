//! Empirical-risk accounting, cross-validated grid search, and the
//! repeated-split Accuracy-Reject experiment protocol.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::dataset::{split, LabeledDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::mlp::MlpConfig;
use crate::model::{train_rejo_nn, train_rejo_svm, TrainedModel};
use crate::replication::{Decision, Prediction};
use crate::rng;
use crate::svm::SmoConfig;
use crate::baselines::{train_independent, train_single_threshold};

/// One point of an Accuracy-Reject curve. The fields satisfy, bit-exactly,
/// `error_rate = (1 - accuracy_on_accepted) * (1 - reject_rate)` and
/// `empirical_risk = w_r * reject_rate + error_rate`, because they are
/// defined by those expressions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ARPoint {
    pub w_r: f64,
    /// Fraction of points rejected.
    pub reject_rate: f64,
    /// Accuracy over accepted points; 1.0 when nothing is accepted.
    pub accuracy_on_accepted: f64,
    /// Fraction of points both accepted and misclassified.
    pub error_rate: f64,
    pub empirical_risk: f64,
    /// Fraction of points whose replica label sequence was non-monotone.
    pub ambiguity_rate: f64,
}

fn check_lengths(preds: &[Prediction], truth: &[usize]) -> Result<()> {
    if preds.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), actual: preds.len() });
    }
    if preds.is_empty() {
        return Err(Error::InvalidParam("no predictions to evaluate".into()));
    }
    Ok(())
}

/// Scores predictions against true labels at rejection cost `w_r`.
pub fn evaluate_predictions(
    preds: &[Prediction],
    truth: &[usize],
    w_r: f64,
) -> Result<ARPoint> {
    check_lengths(preds, truth)?;
    let n = preds.len();
    let mut rejected = 0usize;
    let mut correct = 0usize;
    let mut flagged = 0usize;
    for (p, &t) in preds.iter().zip(truth) {
        if p.non_monotone {
            flagged += 1;
        }
        match p.decision {
            Decision::Reject(_) => rejected += 1,
            Decision::Class(c) => {
                if c == t {
                    correct += 1;
                }
            }
        }
    }
    let accepted = n - rejected;
    let reject_rate = rejected as f64 / n as f64;
    let accuracy_on_accepted =
        if accepted == 0 { 1.0 } else { correct as f64 / accepted as f64 };
    let error_rate = (1.0 - accuracy_on_accepted) * (1.0 - reject_rate);
    let empirical_risk = w_r * reject_rate + error_rate;
    Ok(ARPoint {
        w_r,
        reject_rate,
        accuracy_on_accepted,
        error_rate,
        empirical_risk,
        ambiguity_rate: flagged as f64 / n as f64,
    })
}

/// Empirical risk `w_r·R + E`: `R` the rejected fraction, `E` the fraction
/// accepted and wrong (for ordinal data, predicted class != true class).
pub fn empirical_risk(preds: &[Prediction], truth: &[usize], w_r: f64) -> Result<f64> {
    check_lengths(preds, truth)?;
    let n = preds.len() as f64;
    let mut rejected = 0usize;
    let mut wrong = 0usize;
    for (p, &t) in preds.iter().zip(truth) {
        match p.decision {
            Decision::Reject(_) => rejected += 1,
            Decision::Class(c) => {
                if c != t {
                    wrong += 1;
                }
            }
        }
    }
    Ok(w_r * rejected as f64 / n + wrong as f64 / n)
}

/// Method under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    RejoSvm,
    RejoNn,
    SingleThreshold,
    IndependentPair,
}

impl Method {
    /// Stable name used in result CSVs and CLI flags.
    pub fn name(&self) -> &'static str {
        match self {
            Method::RejoSvm => "rejosvm",
            Method::RejoNn => "rejonn",
            Method::SingleThreshold => "single-threshold",
            Method::IndependentPair => "independent-pair",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rejosvm" => Ok(Method::RejoSvm),
            "rejonn" => Ok(Method::RejoNn),
            "single-threshold" => Ok(Method::SingleThreshold),
            "independent-pair" => Ok(Method::IndependentPair),
            other => Err(Error::InvalidParam(format!(
                "unknown method `{other}` (expected rejosvm, rejonn, single-threshold or independent-pair)"
            ))),
        }
    }
}

/// Hyperparameter search space. SVM-backed methods search kernels and
/// trade-off constants; the network searches architectures and learning
/// rates at a fixed epoch budget.
#[derive(Debug, Clone, PartialEq)]
pub enum HyperGrid {
    Svm { kernels: Vec<KernelSpec>, cs: Vec<f64> },
    Mlp { hidden: Vec<Vec<usize>>, lrs: Vec<f64>, epochs: usize },
}

/// One point of the hyperparameter grid.
#[derive(Debug, Clone, PartialEq)]
pub enum HyperPoint {
    Svm { kernel: KernelSpec, c: f64 },
    Mlp { hidden: Vec<usize>, lr: f64, epochs: usize },
}

impl HyperGrid {
    /// Candidates in canonical tie-break order: SVM points by ascending `C`
    /// then descending RBF width (linear last); network points by ascending
    /// learning rate then ascending layer sizes. `grid_search_cv` keeps the
    /// first minimum, so earlier candidates win ties.
    fn candidates(&self) -> Result<Vec<HyperPoint>> {
        match self {
            HyperGrid::Svm { kernels, cs } => {
                if kernels.is_empty() || cs.is_empty() {
                    return Err(Error::InvalidParam("empty hyperparameter grid".into()));
                }
                let mut cs = cs.clone();
                cs.sort_by(f64::total_cmp);
                cs.dedup();
                let mut kernels = kernels.clone();
                kernels.sort_by(|a, b| {
                    let key = |k: &KernelSpec| match k {
                        KernelSpec::Rbf { gamma } => (0, -gamma),
                        KernelSpec::Linear => (1, 0.0),
                    };
                    key(a).partial_cmp(&key(b)).unwrap()
                });
                kernels.dedup();
                let mut out = Vec::with_capacity(cs.len() * kernels.len());
                for &c in &cs {
                    for &kernel in &kernels {
                        out.push(HyperPoint::Svm { kernel, c });
                    }
                }
                Ok(out)
            }
            HyperGrid::Mlp { hidden, lrs, epochs } => {
                if hidden.is_empty() || lrs.is_empty() {
                    return Err(Error::InvalidParam("empty hyperparameter grid".into()));
                }
                let mut lrs = lrs.clone();
                lrs.sort_by(f64::total_cmp);
                lrs.dedup();
                let mut hidden = hidden.clone();
                hidden.sort();
                hidden.dedup();
                let mut out = Vec::with_capacity(lrs.len() * hidden.len());
                for &lr in &lrs {
                    for arch in &hidden {
                        out.push(HyperPoint::Mlp { hidden: arch.clone(), lr, epochs: *epochs });
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Trains `method` on `train` at one grid point.
pub fn train_method(
    method: Method,
    train: &LabeledDataset,
    point: &HyperPoint,
    w_r: f64,
    h: f64,
    seed: u64,
) -> Result<TrainedModel> {
    match (method, point) {
        (Method::RejoSvm, HyperPoint::Svm { kernel, c }) => {
            let cfg = SmoConfig { seed, ..SmoConfig::default() };
            Ok(TrainedModel::Rejo(train_rejo_svm(train, h, w_r, *kernel, *c, cfg)?))
        }
        (Method::RejoNn, HyperPoint::Mlp { hidden, lr, epochs }) => {
            let cfg = MlpConfig {
                hidden: hidden.clone(),
                lr: *lr,
                epochs: *epochs,
                batch_size: 32,
                seed,
            };
            Ok(TrainedModel::Rejo(train_rejo_nn(train, h, w_r, &cfg)?))
        }
        (Method::SingleThreshold, HyperPoint::Svm { kernel, c }) => {
            let cfg = SmoConfig { seed, ..SmoConfig::default() };
            Ok(TrainedModel::SingleThreshold(train_single_threshold(
                train, w_r, *kernel, *c, cfg,
            )?))
        }
        (Method::IndependentPair, HyperPoint::Svm { kernel, c }) => {
            let cfg = SmoConfig { seed, ..SmoConfig::default() };
            Ok(TrainedModel::IndependentPair(train_independent(train, w_r, *kernel, *c, cfg)?))
        }
        _ => Err(Error::InvalidParam(format!(
            "hyperparameter grid kind does not match method {}",
            method.name()
        ))),
    }
}

/// Predicts every row of `data` with a trained model.
pub fn predict_dataset(model: &TrainedModel, data: &LabeledDataset) -> Result<Vec<Prediction>> {
    (0..data.n_rows()).map(|i| model.predict(data.row(i))).collect()
}

fn fold_assignment(l: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..l).collect();
    let mut rng = rng::seeded(seed ^ rng::SALT_CV);
    idx.shuffle(&mut rng);
    let mut out = vec![Vec::new(); folds];
    for (pos, &i) in idx.iter().enumerate() {
        out[pos % folds].push(i);
    }
    out
}

/// Selects the grid point minimizing the mean cross-validated empirical risk
/// at the given `w_r`. A singleton grid is returned without running any
/// folds. Folds whose training part misses a class make the whole call fail
/// with a degenerate-split error (callers redraw the repetition). A network
/// candidate that diverges is logged and scored as infinite risk.
pub fn grid_search_cv(
    train: &LabeledDataset,
    method: Method,
    grid: &HyperGrid,
    folds: usize,
    w_r: f64,
    h: f64,
    seed: u64,
) -> Result<HyperPoint> {
    let candidates = grid.candidates()?;
    if candidates.len() == 1 {
        return Ok(candidates.into_iter().next().unwrap());
    }
    if folds < 2 {
        return Err(Error::InvalidParam(format!("need at least 2 folds, got {folds}")));
    }
    if train.n_rows() < folds {
        return Err(Error::DegenerateSplit(format!(
            "{} training rows cannot fill {folds} folds",
            train.n_rows()
        )));
    }

    let assignment = fold_assignment(train.n_rows(), folds, seed);
    let mut splits = Vec::with_capacity(folds);
    for f in 0..folds {
        let held = &assignment[f];
        let rest: Vec<usize> = (0..folds)
            .filter(|&g| g != f)
            .flat_map(|g| assignment[g].iter().copied())
            .collect();
        let fold_train = train.select(&rest)?;
        if !fold_train.has_all_classes() {
            return Err(Error::DegenerateSplit(format!(
                "fold {} training part misses a class",
                f + 1
            )));
        }
        splits.push((fold_train, train.select(held)?));
    }

    let mut best: Option<(f64, HyperPoint)> = None;
    for point in candidates {
        let mut total = 0.0;
        for (f, (fold_train, fold_val)) in splits.iter().enumerate() {
            let fit = train_method(
                method,
                fold_train,
                &point,
                w_r,
                h,
                rng::derive_seed(seed ^ rng::SALT_CV, f as u64),
            );
            let risk = match fit {
                Ok(model) => {
                    let preds = predict_dataset(&model, fold_val)?;
                    empirical_risk(&preds, fold_val.labels(), w_r)?
                }
                Err(Error::Divergence { epoch }) => {
                    log::warn!(
                        "grid candidate {point:?} diverged at epoch {epoch}; scoring as infinite risk"
                    );
                    f64::INFINITY
                }
                Err(Error::SingleClass) => {
                    return Err(Error::DegenerateSplit(format!(
                        "fold {} training part has a single binary class",
                        f + 1
                    )))
                }
                Err(e) => return Err(e),
            };
            total += risk;
        }
        let mean = total / folds as f64;
        // strict < keeps the earliest candidate on ties (canonical order)
        if best.as_ref().is_none_or(|(b, _)| mean < *b) {
            best = Some((mean, point));
        }
    }
    let (risk, point) = best.unwrap();
    if risk.is_infinite() {
        return Err(Error::InvalidParam(
            "every hyperparameter candidate diverged during cross-validation".into(),
        ));
    }
    Ok(point)
}

/// Full experiment description for [`ar_curve`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Dataset label echoed into result rows.
    pub dataset: String,
    pub method: Method,
    pub grid: HyperGrid,
    pub w_r_grid: Vec<f64>,
    pub fractions: Vec<f64>,
    pub repetitions: usize,
    pub base_seed: u64,
    pub folds: usize,
    /// Extension constant of the replication.
    pub h: f64,
}

/// The declared default rejection-cost grid `{0.04, 0.08, ..., 0.48}`.
pub fn default_w_r_grid() -> Vec<f64> {
    (1..=12).map(|i| i as f64 * 0.04).collect()
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.w_r_grid.is_empty() || self.w_r_grid.iter().any(|&w| !(0.0..0.5).contains(&w)) {
            return Err(Error::InvalidParam(
                "w_r grid must be nonempty with every value in [0, 0.5)".into(),
            ));
        }
        if self.fractions.is_empty()
            || self.fractions.iter().any(|&f| !(f > 0.0 && f < 1.0))
        {
            return Err(Error::InvalidParam(
                "train fractions must be nonempty with every value in (0, 1)".into(),
            ));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidParam("repetitions must be >= 1".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidParam("folds must be >= 2".into()));
        }
        if !self.h.is_finite() || self.h <= 0.0 {
            return Err(Error::InvalidParam("h must be positive and finite".into()));
        }
        self.grid.candidates().map(|_| ())
    }
}

/// Count of (true class, predicted outcome) pairs; predicted outcomes are
/// `class-k` or `reject-j`.
pub type ConfusionCounts = BTreeMap<(usize, String), usize>;

fn confusion_of(preds: &[Prediction], truth: &[usize]) -> ConfusionCounts {
    let mut counts = ConfusionCounts::new();
    for (p, &t) in preds.iter().zip(truth) {
        let label = match p.decision {
            Decision::Class(c) => format!("class-{c}"),
            Decision::Reject(j) => format!("reject-{j}"),
        };
        *counts.entry((t, label)).or_insert(0) += 1;
    }
    counts
}

/// One evaluated (fraction, w_r, repetition) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RepRow {
    pub fraction: f64,
    pub w_r: f64,
    pub rep: usize,
    pub point: ARPoint,
    pub confusion: ConfusionCounts,
}

/// Mean and sample standard deviation over repetitions for one
/// (fraction, w_r) cell, field-aligned with [`ARPoint`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow {
    pub fraction: f64,
    pub w_r: f64,
    pub reject_rate: (f64, f64),
    pub accuracy_on_accepted: (f64, f64),
    pub error_rate: (f64, f64),
    pub empirical_risk: (f64, f64),
    pub ambiguity_rate: (f64, f64),
}

/// Result of a full repeated-split experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveResult {
    pub rows: Vec<RepRow>,
    pub aggregates: Vec<AggregateRow>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    (mean, std)
}

/// Runs one repetition at one train fraction: split, per-`w_r` grid search,
/// retrain on the full training set, evaluate on the test set. A degenerate
/// split (train part or a CV fold missing a class) redraws the repetition
/// with a derived seed, up to 100 attempts.
fn run_repetition(
    data: &LabeledDataset,
    config: &ExperimentConfig,
    fraction: f64,
    rep: usize,
) -> Result<Vec<(f64, ARPoint, ConfusionCounts)>> {
    let rep_seed = rng::derive_seed(config.base_seed, rep as u64);
    'attempt: for attempt in 0..100u64 {
        let seed = rng::retry_seed(rep_seed, attempt);
        let (train, test) = split(data, SplitSpec { train_fraction: fraction, seed })?;
        if !train.has_all_classes() {
            log::warn!(
                "repetition {rep} at fraction {fraction}: training split misses a class; redrawing (attempt {})",
                attempt + 1
            );
            continue;
        }
        let mut rows = Vec::with_capacity(config.w_r_grid.len());
        for &w_r in &config.w_r_grid {
            let searched = grid_search_cv(
                &train,
                config.method,
                &config.grid,
                config.folds,
                w_r,
                config.h,
                seed,
            );
            let point = match searched {
                Ok(p) => p,
                Err(Error::DegenerateSplit(msg)) => {
                    log::warn!(
                        "repetition {rep} at fraction {fraction}: {msg}; redrawing (attempt {})",
                        attempt + 1
                    );
                    continue 'attempt;
                }
                Err(e) => return Err(e),
            };
            let model = match train_method(config.method, &train, &point, w_r, config.h, seed) {
                Ok(m) => m,
                Err(Error::SingleClass) => {
                    log::warn!(
                        "repetition {rep} at fraction {fraction}: single-class training set; redrawing (attempt {})",
                        attempt + 1
                    );
                    continue 'attempt;
                }
                Err(e) => return Err(e),
            };
            let preds = predict_dataset(&model, &test)?;
            let ar = evaluate_predictions(&preds, test.labels(), w_r)?;
            rows.push((w_r, ar, confusion_of(&preds, test.labels())));
        }
        return Ok(rows);
    }
    Err(Error::DegenerateSplit(format!(
        "repetition {rep} at fraction {fraction}: no usable split in 100 attempts"
    )))
}

/// Runs the repeated-split protocol over every (fraction, w_r) cell.
/// Repetitions fan out on the current rayon pool; output order and content
/// are independent of scheduling, so a fixed `base_seed` reproduces the
/// result bit-for-bit.
pub fn ar_curve(data: &LabeledDataset, config: &ExperimentConfig) -> Result<CurveResult> {
    config.validate()?;
    let mut rows = Vec::new();
    for &fraction in &config.fractions {
        let per_rep: Vec<Result<Vec<(f64, ARPoint, ConfusionCounts)>>> = (0..config.repetitions)
            .into_par_iter()
            .map(|rep| run_repetition(data, config, fraction, rep))
            .collect();
        // regroup as (w_r major, rep minor) for stable output
        let mut by_rep = Vec::with_capacity(config.repetitions);
        for r in per_rep {
            by_rep.push(r?);
        }
        for (wi, &w_r) in config.w_r_grid.iter().enumerate() {
            for (rep, rep_rows) in by_rep.iter().enumerate() {
                let (row_wr, point, confusion) = &rep_rows[wi];
                debug_assert_eq!(*row_wr, w_r);
                rows.push(RepRow {
                    fraction,
                    w_r,
                    rep,
                    point: *point,
                    confusion: confusion.clone(),
                });
            }
        }
    }

    let mut aggregates = Vec::new();
    for &fraction in &config.fractions {
        for &w_r in &config.w_r_grid {
            let cell: Vec<&RepRow> = rows
                .iter()
                .filter(|r| r.fraction == fraction && r.w_r == w_r)
                .collect();
            let field = |f: fn(&ARPoint) -> f64| -> (f64, f64) {
                mean_std(&cell.iter().map(|r| f(&r.point)).collect::<Vec<_>>())
            };
            aggregates.push(AggregateRow {
                fraction,
                w_r,
                reject_rate: field(|p| p.reject_rate),
                accuracy_on_accepted: field(|p| p.accuracy_on_accepted),
                error_rate: field(|p| p.error_rate),
                empirical_risk: field(|p| p.empirical_risk),
                ambiguity_rate: field(|p| p.ambiguity_rate),
            });
        }
    }
    Ok(CurveResult { rows, aggregates })
}

/// Per-repetition results CSV (schema is stable; floats use shortest
/// round-trip formatting).
pub fn results_csv(config: &ExperimentConfig, result: &CurveResult) -> String {
    let mut out = String::from(
        "dataset,method,fraction,w_r,rep,reject_rate,acc_accepted,error_rate,risk,ambiguity_rate\n",
    );
    for r in &result.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            config.dataset,
            config.method.name(),
            r.fraction,
            r.w_r,
            r.rep,
            r.point.reject_rate,
            r.point.accuracy_on_accepted,
            r.point.error_rate,
            r.point.empirical_risk,
            r.point.ambiguity_rate,
        );
    }
    out
}

/// Aggregate CSV: mean and sample standard deviation over repetitions.
pub fn aggregate_csv(config: &ExperimentConfig, result: &CurveResult) -> String {
    let mut out = String::from(
        "dataset,method,fraction,w_r,reject_rate_mean,reject_rate_std,acc_accepted_mean,acc_accepted_std,error_rate_mean,error_rate_std,risk_mean,risk_std,ambiguity_rate_mean,ambiguity_rate_std\n",
    );
    for a in &result.aggregates {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            config.dataset,
            config.method.name(),
            a.fraction,
            a.w_r,
            a.reject_rate.0,
            a.reject_rate.1,
            a.accuracy_on_accepted.0,
            a.accuracy_on_accepted.1,
            a.error_rate.0,
            a.error_rate.1,
            a.empirical_risk.0,
            a.empirical_risk.1,
            a.ambiguity_rate.0,
            a.ambiguity_rate.1,
        );
    }
    out
}

/// Confusion-count CSV: one row per (cell, true class, predicted outcome).
pub fn confusion_csv(config: &ExperimentConfig, result: &CurveResult) -> String {
    let mut out = String::from("dataset,method,fraction,w_r,rep,true_class,predicted,count\n");
    for r in &result.rows {
        for ((truth, predicted), count) in &r.confusion {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                config.dataset,
                config.method.name(),
                r.fraction,
                r.w_r,
                r.rep,
                truth,
                predicted,
                count,
            );
        }
    }
    out
}
