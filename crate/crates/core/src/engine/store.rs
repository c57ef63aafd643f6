//! Per-layer candidate stores: a map from bucket key to at most `k` best
//! evaluated candidates, ordered by (accuracy desc, cost asc, choices asc).
//! The total order makes the retained set independent of insertion order.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::space::{Architecture, Cost, PhiMode, Prefix, SearchSpace};
use crate::Real;

/// Key a candidate is grouped under.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BucketKey {
    /// Cost-range bucket index in `[0, H)`.
    Bucket(usize),
    /// Exact scaled cost, used by the dynamic-programming run.
    ExactCost(Cost),
    /// The prefix itself; nothing is merged.
    Unique(Vec<usize>),
}

/// One evaluated candidate: a prefix, its default-completed architecture and
/// the evaluation outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord<F: Real> {
    pub prefix: Prefix,
    pub arch_evaluated: Architecture,
    pub validation_accuracy: F,
    pub cost: Cost,
    pub bucket: BucketKey,
}

/// Total order used everywhere a candidate beats another: higher accuracy
/// first, then lower cost, then lexicographically smaller choices.
pub(crate) fn candidate_order<F: Real>(a: (F, Cost, &[usize]), b: (F, Cost, &[usize])) -> Ordering {
    b.0.partial_cmp(&a.0)
        .expect("accuracies are not NaN")
        .then_with(|| a.1.cmp(&b.1))
        .then_with(|| a.2.cmp(b.2))
}

fn record_order<F: Real>(a: &CandidateRecord<F>, b: &CandidateRecord<F>) -> Ordering {
    candidate_order(
        (a.validation_accuracy, a.cost, a.prefix.choices.as_slice()),
        (b.validation_accuracy, b.cost, b.prefix.choices.as_slice()),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub enum InsertOutcome<F: Real> {
    Inserted,
    /// Inserted; the returned record fell out of the bucket.
    Displaced(CandidateRecord<F>),
    /// Duplicate choices, or worse than everything in a full bucket.
    Rejected,
}

/// Candidates stored for one layer, up to `replicas` per bucket.
#[derive(Debug, Clone)]
pub struct LayerStore<F: Real> {
    layer_index: usize,
    replicas: usize,
    bucket_count: usize,
    mode: PhiMode,
    entries: BTreeMap<BucketKey, Vec<CandidateRecord<F>>>,
}

impl<F: Real> LayerStore<F> {
    pub fn new(layer_index: usize, replicas: usize, bucket_count: usize, mode: PhiMode) -> Self {
        LayerStore {
            layer_index,
            replicas,
            bucket_count,
            mode,
            entries: BTreeMap::new(),
        }
    }

    pub fn layer_index(&self) -> usize {
        self.layer_index
    }

    pub fn replicas(&self) -> usize {
        self.replicas
    }

    pub fn mode(&self) -> PhiMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn bucket_len(&self, key: &BucketKey) -> usize {
        self.entries.get(key).map_or(0, Vec::len)
    }

    /// Records in deterministic order: bucket key, then in-bucket rank.
    pub fn records(&self) -> impl Iterator<Item = &CandidateRecord<F>> {
        self.entries.values().flatten()
    }

    /// Inserts `rec` into its bucket if the bucket has room or `rec` beats
    /// the worst entry; duplicates (same choices) are rejected.
    pub fn insert(&mut self, rec: CandidateRecord<F>) -> InsertOutcome<F> {
        if let BucketKey::Bucket(h) = rec.bucket {
            debug_assert!(h < self.bucket_count, "bucket index within H");
        }
        let bucket = self.entries.entry(rec.bucket.clone()).or_default();
        if bucket.iter().any(|r| r.prefix == rec.prefix) {
            return InsertOutcome::Rejected;
        }
        let at = bucket
            .binary_search_by(|probe| record_order(probe, &rec))
            .unwrap_or_else(|i| i);
        if bucket.len() < self.replicas {
            bucket.insert(at, rec);
            return InsertOutcome::Inserted;
        }
        if at >= self.replicas {
            return InsertOutcome::Rejected;
        }
        bucket.insert(at, rec);
        let displaced = bucket.pop().expect("bucket was full");
        InsertOutcome::Displaced(displaced)
    }

    /// Drops records whose completion interval misses the target band.
    pub fn retain_feasible(&mut self, space: &SearchSpace, low: Cost, high: Cost) {
        self.entries.retain(|_, bucket| {
            bucket.retain(|rec| super::feasible(space, &rec.prefix, low, high));
            !bucket.is_empty()
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(acc: f64, cost: i64, choices: Vec<usize>, bucket: usize) -> CandidateRecord<f64> {
        CandidateRecord {
            prefix: Prefix::new(choices.clone()),
            arch_evaluated: Architecture::new(choices),
            validation_accuracy: acc,
            cost: Cost(cost),
            bucket: BucketKey::Bucket(bucket),
        }
    }

    #[test]
    fn empty_bucket_accepts_anything() {
        let mut store = LayerStore::new(1, 1, 10, PhiMode::CostBucket);
        assert_eq!(
            store.insert(rec(0.5, 3, vec![0], 0)),
            InsertOutcome::Inserted
        );
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn better_accuracy_displaces_the_worst() {
        let mut store = LayerStore::new(1, 1, 10, PhiMode::CostBucket);
        store.insert(rec(0.80, 3, vec![0], 0));
        match store.insert(rec(0.85, 3, vec![1], 0)) {
            InsertOutcome::Displaced(old) => assert_eq!(old.validation_accuracy, 0.80),
            other => panic!("expected displacement, got {other:?}"),
        }
        assert_eq!(store.records().next().unwrap().validation_accuracy, 0.85);
    }

    #[test]
    fn equal_accuracy_ties_break_on_cost() {
        let mut store = LayerStore::new(1, 1, 10, PhiMode::CostBucket);
        store.insert(rec(0.80, 5, vec![0], 0));
        match store.insert(rec(0.80, 3, vec![1], 0)) {
            InsertOutcome::Displaced(old) => assert_eq!(old.cost, Cost(5)),
            other => panic!("expected displacement, got {other:?}"),
        }
    }

    #[test]
    fn worse_candidate_is_rejected_when_full() {
        let mut store = LayerStore::new(1, 2, 10, PhiMode::CostBucket);
        store.insert(rec(0.9, 3, vec![0], 0));
        store.insert(rec(0.8, 3, vec![1], 0));
        assert_eq!(
            store.insert(rec(0.7, 3, vec![2], 0)),
            InsertOutcome::Rejected
        );
        assert_eq!(store.len(), 2);
    }

    #[test]
    fn duplicate_choices_are_rejected() {
        let mut store = LayerStore::new(1, 3, 10, PhiMode::CostBucket);
        store.insert(rec(0.8, 3, vec![0], 0));
        assert_eq!(
            store.insert(rec(0.9, 3, vec![0], 0)),
            InsertOutcome::Rejected
        );
    }

    /// The retained set is a function of the record set, not arrival order.
    #[test]
    fn insertion_order_does_not_change_the_store() {
        let records = [
            rec(0.80, 4, vec![0], 0),
            rec(0.80, 3, vec![1], 0),
            rec(0.85, 6, vec![2], 0),
            rec(0.70, 1, vec![3], 0),
        ];
        let mut reference: Option<Vec<Vec<usize>>> = None;
        // all 24 permutations of 4 records
        let mut order = [0usize, 1, 2, 3];
        let mut permutations = vec![];
        permute(&mut order, 0, &mut permutations);
        assert_eq!(permutations.len(), 24);
        for perm in permutations {
            let mut store = LayerStore::new(1, 2, 10, PhiMode::CostBucket);
            for &i in &perm {
                store.insert(records[i].clone());
            }
            let kept: Vec<Vec<usize>> = store.records().map(|r| r.prefix.choices.clone()).collect();
            match &reference {
                None => reference = Some(kept),
                Some(expect) => assert_eq!(&kept, expect, "order {perm:?}"),
            }
        }
        // top two: best accuracy, then the cheaper of the 0.80 pair
        assert_eq!(reference.unwrap(), vec![vec![2], vec![1]]);
    }

    fn permute(order: &mut [usize; 4], k: usize, out: &mut Vec<[usize; 4]>) {
        if k == order.len() {
            out.push(*order);
            return;
        }
        for i in k..order.len() {
            order.swap(k, i);
            permute(order, k + 1, out);
            order.swap(k, i);
        }
    }
}
