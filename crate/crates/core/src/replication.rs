//! The data-replication reduction.
//!
//! An ordinal problem with `K` classes and a reject option is reduced to a
//! single binary problem: each point is copied into `2(K-1)` replicas living
//! in `R^{p + 2(K-1) - 1}`, where replica `q >= 2` switches on one extension
//! coordinate at value `h`. Replica `q` carries the binary label of the
//! boundary it represents, and a low/high misclassification cost that steers
//! that boundary. A prediction is read back by classifying all replicas of a
//! point and counting votes.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

/// Reject/error cost pair with the normalization `c_low + c_high = 1`,
/// so `w_r = c_low / (c_low + c_high)` is the rejection cost relative to the
/// cost of an error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostScheme {
    pub w_r: f64,
    pub c_low: f64,
    pub c_high: f64,
}

/// Builds the cost pair for a rejection cost `w_r ∈ [0, 0.5)`. At `w_r >=
/// 0.5` rejecting is never better than guessing, so such values are refused.
pub fn cost_pair(w_r: f64) -> Result<CostScheme> {
    if !(0.0..0.5).contains(&w_r) {
        return Err(Error::InvalidParam(format!(
            "rejection cost w_r must be in [0, 0.5), got {w_r}"
        )));
    }
    Ok(CostScheme { w_r, c_low: w_r, c_high: 1.0 - w_r })
}

/// Binary label of a replica row: `Lower` is the side of the smaller ordinal
/// classes, `Upper` the side of the larger ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplicaLabel {
    Lower,
    Upper,
}

impl ReplicaLabel {
    /// Label from a real decision value; an exact zero maps to `Upper`
    /// (deterministic and measure-zero for continuous data).
    pub fn from_sign(value: f64) -> Self {
        if value < 0.0 {
            ReplicaLabel::Lower
        } else {
            ReplicaLabel::Upper
        }
    }

    pub fn to_y(self) -> f64 {
        match self {
            ReplicaLabel::Lower => -1.0,
            ReplicaLabel::Upper => 1.0,
        }
    }
}

/// Outcome for one point: a class in `1..=K`, or a rejection between
/// boundaries `2j-1` and `2j` (between classes `j` and `j+1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Class(usize),
    Reject(usize),
}

/// A decoded prediction. `non_monotone` is true when the replica label
/// sequence could not have come from nested boundaries; the count rule is
/// still applied to keep decoding total.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prediction {
    pub decision: Decision,
    pub non_monotone: bool,
}

/// Binary label of a class-`k` point in replica `q` (both 1-based): with
/// `j = ceil(q/2)`, the row is `Lower` iff `k <= j`.
pub fn replica_label(k: usize, q: usize) -> ReplicaLabel {
    let j = q.div_ceil(2);
    if k <= j {
        ReplicaLabel::Lower
    } else {
        ReplicaLabel::Upper
    }
}

/// Cost of a class-`k` point in replica `q`: boundary `2j-1` protects class
/// `j+1..` (low cost on class `j`), boundary `2j` protects class `..j` (low
/// cost on class `j+1`); everything else gets the high cost.
pub fn replica_cost(k: usize, q: usize, costs: CostScheme) -> f64 {
    let j = q.div_ceil(2);
    let low = if q % 2 == 1 { k == j } else { k == j + 1 };
    if low {
        costs.c_low
    } else {
        costs.c_high
    }
}

/// Embeds `x` into the extended space as replica `q`: `p + 2(K-1) - 1`
/// coordinates, all extension entries zero except coordinate `p + q - 1`
/// (1-based) set to `h` when `q >= 2`.
pub fn extend_point(x: ArrayView1<'_, f64>, q: usize, h: f64, k: usize) -> Result<Array1<f64>> {
    let n_replicas = 2 * (k - 1);
    if q < 1 || q > n_replicas {
        return Err(Error::InvalidParam(format!(
            "replica index {q} outside 1..={n_replicas}"
        )));
    }
    let p = x.len();
    let mut ext = Array1::zeros(p + n_replicas - 1);
    ext.slice_mut(ndarray::s![..p]).assign(&x);
    if q >= 2 {
        ext[p + q - 2] = h;
    }
    Ok(ext)
}

/// The replicated training set: `2(K-1) * l` rows in the extended space with
/// binary labels and per-row costs. Rows are grouped by replica; row
/// `(q-1)*l + i` is replica `q` of original point `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicatedDataset {
    features: Array2<f64>,
    labels: Vec<ReplicaLabel>,
    costs: Vec<f64>,
    replica: Vec<usize>,
    origin: Vec<usize>,
    k: usize,
    p: usize,
    h: f64,
    scheme: CostScheme,
}

impl ReplicatedDataset {
    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    /// Extended dimensionality `p + 2(K-1) - 1`.
    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[ReplicaLabel] {
        &self.labels
    }

    /// Signed labels in `{-1.0, +1.0}`, row-aligned.
    pub fn y(&self, i: usize) -> f64 {
        self.labels[i].to_y()
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    /// Replica index `q` of row `i`, in `1..=2(K-1)`.
    pub fn replica_of(&self, i: usize) -> usize {
        self.replica[i]
    }

    /// Index of the original point behind row `i`, in `0..l`.
    pub fn origin_of(&self, i: usize) -> usize {
        self.origin[i]
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Original-space dimensionality `p`.
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn scheme(&self) -> CostScheme {
        self.scheme
    }

    pub fn n_replicas(&self) -> usize {
        2 * (self.k - 1)
    }
}

/// Builds the replicated dataset for extension constant `h > 0` and
/// rejection cost `w_r`.
pub fn replicate(data: &LabeledDataset, h: f64, w_r: f64) -> Result<ReplicatedDataset> {
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::InvalidParam(format!("h must be positive and finite, got {h}")));
    }
    let scheme = cost_pair(w_r)?;
    let k = data.k();
    let p = data.n_features();
    let l = data.n_rows();
    let n_replicas = 2 * (k - 1);
    let dim = p + n_replicas - 1;

    let mut features = Array2::zeros((n_replicas * l, dim));
    let mut labels = Vec::with_capacity(n_replicas * l);
    let mut costs = Vec::with_capacity(n_replicas * l);
    let mut replica = Vec::with_capacity(n_replicas * l);
    let mut origin = Vec::with_capacity(n_replicas * l);

    for q in 1..=n_replicas {
        for i in 0..l {
            let row = (q - 1) * l + i;
            features
                .row_mut(row)
                .slice_mut(ndarray::s![..p])
                .assign(&data.row(i));
            if q >= 2 {
                features[[row, p + q - 2]] = h;
            }
            let class = data.labels()[i];
            labels.push(replica_label(class, q));
            costs.push(replica_cost(class, q, scheme));
            replica.push(q);
            origin.push(i);
        }
    }

    Ok(ReplicatedDataset { features, labels, costs, replica, origin, k, p, h, scheme })
}

/// Decodes a sequence of `2(K-1)` replica labels by the count rule: with
/// `N` = number of `Upper` labels, an even `N` yields `Class(N/2 + 1)` and an
/// odd `N` yields `Reject((N+1)/2)`. Sequences in which some `Lower` label
/// precedes an `Upper` cannot arise from nested boundaries and are flagged.
pub fn decode(labels: &[ReplicaLabel]) -> Result<Prediction> {
    if labels.is_empty() || !labels.len().is_multiple_of(2) {
        return Err(Error::InvalidParam(format!(
            "replica label sequence must have even positive length 2(K-1), got {}",
            labels.len()
        )));
    }
    let n_upper = labels.iter().filter(|&&l| l == ReplicaLabel::Upper).count();
    let non_monotone = labels
        .iter()
        .skip_while(|&&l| l == ReplicaLabel::Upper)
        .any(|&l| l == ReplicaLabel::Upper);
    let decision = if n_upper % 2 == 0 {
        Decision::Class(n_upper / 2 + 1)
    } else {
        Decision::Reject(n_upper.div_ceil(2))
    };
    Ok(Prediction { decision, non_monotone })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use ReplicaLabel::{Lower, Upper};

    #[test]
    fn cost_pair_examples() {
        let s = cost_pair(0.2).unwrap();
        assert_eq!((s.c_low, s.c_high), (0.2, 0.8));
        assert_eq!(s.c_low + s.c_high, 1.0);
        let s = cost_pair(0.0).unwrap();
        assert_eq!((s.c_low, s.c_high), (0.0, 1.0));
        assert!(cost_pair(0.5).is_err());
        assert!(cost_pair(-0.1).is_err());
        assert!(cost_pair(f64::NAN).is_err());
    }

    #[test]
    fn binary_table_row_for_row() {
        let s = cost_pair(0.2).unwrap();
        // replica 1: class 1 -> (-1, low), class 2 -> (+1, high)
        assert_eq!(replica_label(1, 1), Lower);
        assert_eq!(replica_cost(1, 1, s), s.c_low);
        assert_eq!(replica_label(2, 1), Upper);
        assert_eq!(replica_cost(2, 1, s), s.c_high);
        // replica 2: class 1 -> (-1, high), class 2 -> (+1, low)
        assert_eq!(replica_label(1, 2), Lower);
        assert_eq!(replica_cost(1, 2, s), s.c_high);
        assert_eq!(replica_label(2, 2), Upper);
        assert_eq!(replica_cost(2, 2, s), s.c_low);
    }

    #[test]
    fn three_class_point_class2() {
        let s = cost_pair(0.1).unwrap();
        let labels: Vec<_> = (1..=4).map(|q| replica_label(2, q).to_y()).collect();
        let costs: Vec<_> = (1..=4).map(|q| replica_cost(2, q, s)).collect();
        assert_eq!(labels, vec![1.0, 1.0, -1.0, -1.0]);
        assert_eq!(costs, vec![s.c_high, s.c_low, s.c_low, s.c_high]);
    }

    #[test]
    fn extend_point_placement() {
        let x = array![3.0, 4.0];
        assert_eq!(extend_point(x.view(), 1, 1.0, 2).unwrap(), array![3.0, 4.0, 0.0]);
        assert_eq!(extend_point(x.view(), 2, 1.0, 2).unwrap(), array![3.0, 4.0, 1.0]);
        assert_eq!(
            extend_point(x.view(), 3, 2.0, 3).unwrap(),
            array![3.0, 4.0, 0.0, 2.0, 0.0]
        );
        assert!(extend_point(x.view(), 0, 1.0, 2).is_err());
        assert!(extend_point(x.view(), 3, 1.0, 2).is_err());
    }

    #[test]
    fn replicate_binary_shape_and_costs() {
        let data = LabeledDataset::new(
            array![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]],
            vec![1, 2, 1],
            2,
        )
        .unwrap();
        let r = replicate(&data, 1.0, 0.2).unwrap();
        assert_eq!(r.n_rows(), 6);
        assert_eq!(r.n_features(), 3);
        // extension values are exactly {0, 1}
        for i in 0..r.n_rows() {
            let ext = r.row(i)[2];
            assert!(ext == 0.0 || ext == 1.0);
        }
        // class-1 rows: low cost in replica 1, high in replica 2
        for i in 0..r.n_rows() {
            if data.labels()[r.origin_of(i)] == 1 {
                let expect = if r.replica_of(i) == 1 { 0.2 } else { 0.8 };
                assert_eq!(r.costs()[i], expect);
            }
        }
        assert!(replicate(&data, 0.0, 0.2).is_err());
        assert!(replicate(&data, 1.0, 0.7).is_err());
    }

    #[test]
    fn replication_is_a_bijection_on_rows() {
        let data = LabeledDataset::new(
            array![[0.5], [1.5], [2.5], [3.5]],
            vec![1, 2, 3, 2],
            3,
        )
        .unwrap();
        let r = replicate(&data, 1.0, 0.3).unwrap();
        assert_eq!(r.n_rows(), 4 * data.n_rows());
        let mut seen = std::collections::HashSet::new();
        for i in 0..r.n_rows() {
            let key = (r.origin_of(i), r.replica_of(i));
            assert!(seen.insert(key), "duplicate {key:?}");
            // row content is exactly extend_point of the original
            let expect =
                extend_point(data.row(r.origin_of(i)), r.replica_of(i), 1.0, 3).unwrap();
            assert_eq!(r.row(i), expect.view());
            // and the label/cost match the per-replica rules
            let class = data.labels()[r.origin_of(i)];
            assert_eq!(r.labels()[i], replica_label(class, r.replica_of(i)));
            assert_eq!(r.costs()[i], replica_cost(class, r.replica_of(i), r.scheme()));
        }
    }

    #[test]
    fn cost_symmetry_under_class_and_replica_swap() {
        let s = cost_pair(0.25).unwrap();
        // swapping class 1<->2 and replica 1<->2 mirrors the assignment
        for (k, q) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            let mirrored = replica_cost(3 - k, 3 - q, s);
            assert_eq!(replica_cost(k, q, s), mirrored);
        }
    }

    #[test]
    fn decode_binary_sequences() {
        let p = decode(&[Lower, Lower]).unwrap();
        assert_eq!(p.decision, Decision::Class(1));
        assert!(!p.non_monotone);
        let p = decode(&[Upper, Lower]).unwrap();
        assert_eq!(p.decision, Decision::Reject(1));
        assert!(!p.non_monotone);
        let p = decode(&[Upper, Upper]).unwrap();
        assert_eq!(p.decision, Decision::Class(2));
        assert!(!p.non_monotone);
        // the one impossible binary sequence is flagged
        let p = decode(&[Lower, Upper]).unwrap();
        assert_eq!(p.decision, Decision::Reject(1));
        assert!(p.non_monotone);
    }

    #[test]
    fn decode_count_rule_examples() {
        // K=3, N=3 -> Reject(2)
        let p = decode(&[Upper, Upper, Upper, Lower]).unwrap();
        assert_eq!(p.decision, Decision::Reject(2));
        assert!(!p.non_monotone);
        // order-blind count with flag
        let p = decode(&[Lower, Upper, Lower, Lower]).unwrap();
        assert_eq!(p.decision, Decision::Reject(1));
        assert!(p.non_monotone);
    }

    #[test]
    fn decode_rejects_bad_lengths() {
        assert!(decode(&[]).is_err());
        assert!(decode(&[Upper]).is_err());
        assert!(decode(&[Upper, Lower, Upper]).is_err());
    }

    #[test]
    fn decode_total_and_monotone_flags_exact() {
        // exhaustive over all sequences for K=2..=5
        for k in 2..=5usize {
            let len = 2 * (k - 1);
            for mask in 0u32..(1 << len) {
                let seq: Vec<_> = (0..len)
                    .map(|i| if mask & (1 << i) != 0 { Upper } else { Lower })
                    .collect();
                let p = decode(&seq).unwrap();
                // flag iff not of the form Upper^N Lower^M
                let n = seq.iter().filter(|&&l| l == Upper).count();
                let sorted: Vec<_> = (0..len).map(|i| if i < n { Upper } else { Lower }).collect();
                assert_eq!(p.non_monotone, seq != sorted, "{seq:?}");
                match p.decision {
                    Decision::Class(c) => assert!((1..=k).contains(&c)),
                    Decision::Reject(j) => assert!((1..=k - 1).contains(&j)),
                }
            }
        }
    }
}
