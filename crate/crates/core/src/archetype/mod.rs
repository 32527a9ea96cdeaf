//! Behavioral archetypes: k-means centroids over training behavior embeddings,
//! each carrying an item transition matrix (discrete mode) or a pattern mean
//! (continuous mode).

mod kmeans;

pub use kmeans::{fit_kmeans, KMeansConfig, KMeansFit};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_with::serde_as;

use crate::backbone::BehaviorEmbedding;
use crate::error::{LatticeError, Result};
use crate::seqcore::{Mode, SeqView, SequenceDataset, Series};

// Integer-keyed maps are written as pair lists; JSON object keys would be strings.

/// Raw transition counts out of one item for one archetype.
#[serde_as]
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CountRow {
    pub total: u64,
    /// Successor item → count, only observed successors.
    #[serde_as(as = "Vec<(_, _)>")]
    pub counts: BTreeMap<usize, u64>,
}

/// Laplace-smoothed transition matrices stored as sparse counts:
/// `P_k(i→j) = (count + alpha) / (row_total + alpha·V)`.
#[serde_as]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionCounts {
    pub vocab_size: usize,
    pub alpha: f64,
    /// One map per archetype; rows without observations are absent.
    #[serde_as(as = "Vec<Vec<(_, _)>>")]
    pub rows: Vec<BTreeMap<usize, CountRow>>,
}

impl TransitionCounts {
    fn empty_row() -> &'static CountRow {
        static EMPTY: std::sync::OnceLock<CountRow> = std::sync::OnceLock::new();
        EMPTY.get_or_init(CountRow::default)
    }

    pub fn num_archetypes(&self) -> usize {
        self.rows.len()
    }

    fn row(&self, k: usize, from: usize) -> &CountRow {
        self.rows[k].get(&from).unwrap_or_else(|| Self::empty_row())
    }

    /// `P_k(from → to)`.
    pub fn prob(&self, k: usize, from: usize, to: usize) -> f64 {
        let row = self.row(k, from);
        let c = row.counts.get(&to).copied().unwrap_or(0) as f64;
        (c + self.alpha) / (row.total as f64 + self.alpha * self.vocab_size as f64)
    }

    /// Dense row `P_k(from → ·)`.
    pub fn dense_row(&self, k: usize, from: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.vocab_size];
        self.add_row(k, from, 1.0, &mut out);
        out
    }

    fn add_row(&self, k: usize, from: usize, weight: f64, out: &mut [f64]) {
        let row = self.row(k, from);
        let denom = row.total as f64 + self.alpha * self.vocab_size as f64;
        let base = weight * self.alpha / denom;
        out.iter_mut().for_each(|o| *o += base);
        for (&j, &c) in &row.counts {
            out[j] += weight * c as f64 / denom;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum ArchetypeStructure {
    Transitions(TransitionCounts),
    PatternMeans(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeModel {
    pub centroids: Vec<Vec<f64>>,
    pub structure: ArchetypeStructure,
}

/// `p(k|s)` over archetypes.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftAssignment(pub Vec<f64>);

impl SoftAssignment {
    pub fn probs(&self) -> &[f64] {
        &self.0
    }
}

/// Index and Euclidean distance of the nearest centroid; ties go to the lowest index.
pub fn nearest_centroid(e: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let (k, d2) = kmeans::nearest_sq(e, centroids);
    (k, d2.sqrt())
}

/// Euclidean distance to every centroid.
pub fn centroid_distances(e: &[f64], centroids: &[Vec<f64>]) -> Vec<f64> {
    centroids.iter().map(|c| kmeans::sq_dist(e, c).sqrt()).collect()
}

/// `softmax(-d_k)` with `d_k` the Euclidean distance to centroid `k`.
pub fn soft_assign_to(e: &[f64], centroids: &[Vec<f64>]) -> Result<SoftAssignment> {
    if let Some(c) = centroids.first() {
        if c.len() != e.len() {
            return Err(LatticeError::DimensionMismatch { expected: c.len(), got: e.len() });
        }
    }
    let d = centroid_distances(e, centroids);
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = d.iter().map(|&x| (min - x).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(SoftAssignment(w.into_iter().map(|x| x / z).collect()))
}

fn hard_assignments(embeddings: &[BehaviorEmbedding], centroids: &[Vec<f64>]) -> Vec<usize> {
    embeddings.iter().map(|e| nearest_centroid(e.as_slice(), centroids).0).collect()
}

/// Count each training sequence's consecutive transitions into its nearest
/// archetype.
pub fn fit_transitions(
    train: &SequenceDataset,
    embeddings: &[BehaviorEmbedding],
    centroids: &[Vec<f64>],
    alpha: f64,
) -> Result<TransitionCounts> {
    let vocab_size = match (train.mode, train.vocab_size()) {
        (Mode::Discrete, Some(v)) => v,
        _ => {
            return Err(LatticeError::ModeMismatch {
                expected: "discrete",
                found: train.mode.name(),
            })
        }
    };
    if !(alpha > 0.0) {
        return Err(LatticeError::InvalidConfig(format!("smoothing alpha must be > 0, got {alpha}")));
    }
    check_lengths(train, embeddings)?;
    let mut rows: Vec<BTreeMap<usize, CountRow>> = vec![BTreeMap::new(); centroids.len()];
    for (s, k) in train.sequences.iter().zip(hard_assignments(embeddings, centroids)) {
        if let Series::Items(items) = &s.series {
            for w in items.windows(2) {
                let row = rows[k].entry(w[0]).or_default();
                row.total += 1;
                *row.counts.entry(w[1]).or_insert(0) += 1;
            }
        }
    }
    Ok(TransitionCounts { vocab_size, alpha, rows })
}

/// Per-archetype mean of every value that follows another value in the
/// archetype's training windows. Empty archetypes fall back to the global mean.
pub fn fit_pattern_means(train: &SequenceDataset, embeddings: &[BehaviorEmbedding], centroids: &[Vec<f64>]) -> Result<Vec<f64>> {
    if train.mode != Mode::Continuous {
        return Err(LatticeError::ModeMismatch {
            expected: "continuous",
            found: train.mode.name(),
        });
    }
    check_lengths(train, embeddings)?;
    let k = centroids.len();
    let (mut sums, mut counts) = (vec![0.0; k], vec![0usize; k]);
    for (s, a) in train.sequences.iter().zip(hard_assignments(embeddings, centroids)) {
        if let Series::Values(v) = &s.series {
            for &next in v.iter().skip(1) {
                sums[a] += next;
                counts[a] += 1;
            }
        }
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(LatticeError::EmptyDataset);
    }
    let global = sums.iter().sum::<f64>() / total as f64;
    Ok(sums
        .into_iter()
        .zip(counts)
        .map(|(s, n)| if n == 0 { global } else { s / n as f64 })
        .collect())
}

fn check_lengths(train: &SequenceDataset, embeddings: &[BehaviorEmbedding]) -> Result<()> {
    if train.len() != embeddings.len() {
        return Err(LatticeError::LengthMismatch {
            left: train.len(),
            right: embeddings.len(),
        });
    }
    Ok(())
}

impl ArchetypeModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn mode(&self) -> Mode {
        match self.structure {
            ArchetypeStructure::Transitions(_) => Mode::Discrete,
            ArchetypeStructure::PatternMeans(_) => Mode::Continuous,
        }
    }

    pub fn transitions(&self) -> Option<&TransitionCounts> {
        match &self.structure {
            ArchetypeStructure::Transitions(t) => Some(t),
            ArchetypeStructure::PatternMeans(_) => None,
        }
    }

    pub fn pattern_means(&self) -> Option<&[f64]> {
        match &self.structure {
            ArchetypeStructure::PatternMeans(m) => Some(m),
            ArchetypeStructure::Transitions(_) => None,
        }
    }

    pub fn soft_assign(&self, e: &BehaviorEmbedding) -> Result<SoftAssignment> {
        soft_assign_to(e.as_slice(), &self.centroids)
    }

    /// `Σ_k p(k|s) · P_k(last → ·)`.
    pub fn score(&self, assign: &SoftAssignment, last: usize) -> Result<Vec<f64>> {
        let t = self.transitions().ok_or(LatticeError::ModeMismatch {
            expected: "discrete",
            found: "continuous",
        })?;
        if last >= t.vocab_size {
            return Err(LatticeError::OutOfVocab { index: last, size: t.vocab_size });
        }
        let mut out = vec![0.0; t.vocab_size];
        for (k, &p) in assign.probs().iter().enumerate() {
            t.add_row(k, last, p, &mut out);
        }
        Ok(out)
    }

    /// `Σ_k p(k|s) · μ_k`.
    pub fn predict_continuous(&self, assign: &SoftAssignment) -> Result<f64> {
        let means = self.pattern_means().ok_or(LatticeError::ModeMismatch {
            expected: "continuous",
            found: "discrete",
        })?;
        Ok(assign.probs().iter().zip(means).map(|(p, m)| p * m).sum())
    }

    /// Archetype scores for a sequence ending in `input`.
    pub fn score_sequence(&self, assign: &SoftAssignment, input: SeqView<'_>) -> Result<ArchetypeOutput> {
        match input {
            SeqView::Items(items) => {
                let last = *items.last().ok_or(LatticeError::EmptyDataset)?;
                Ok(ArchetypeOutput::Distribution(self.score(assign, last)?))
            }
            SeqView::Values(_) => Ok(ArchetypeOutput::Value(self.predict_continuous(assign)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArchetypeOutput {
    Distribution(Vec<f64>),
    Value(f64),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqcore::{ItemVocab, Sequence};
    use proptest::prelude::*;

    fn emb(v: &[f64]) -> BehaviorEmbedding {
        BehaviorEmbedding(v.to_vec())
    }

    #[test]
    fn soft_assign_symmetric() {
        let cs = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let a = soft_assign_to(&[0.0, 3.0], &cs).unwrap();
        assert!((a.0[0] - 0.5).abs() < 1e-12 && (a.0[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn soft_assign_at_centroid() {
        let cs = vec![vec![0.0, 0.0], vec![100.0, 0.0]];
        let a = soft_assign_to(&[0.0, 0.0], &cs).unwrap();
        assert!(a.0[0] > 1.0 - 1e-12 && a.0[1] < 1e-12);
        assert!((a.0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn soft_assign_known_distances() {
        // centroids at distances 1, 2, 3 from the origin
        let cs = vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![-3.0, 0.0]];
        let a = soft_assign_to(&[0.0, 0.0], &cs).unwrap();
        // softmax(-1, -2, -3) evaluated directly
        let z = (-1f64).exp() + (-2f64).exp() + (-3f64).exp();
        let expect = [(-1f64).exp() / z, (-2f64).exp() / z, (-3f64).exp() / z];
        for (got, want) in a.0.iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }
        for (got, want) in a.0.iter().zip([0.6652, 0.2447, 0.0900]) {
            assert!((got - want).abs() < 1e-4);
        }
        assert!(soft_assign_to(&[0.0], &cs).is_err());
    }

    #[test]
    fn laplace_row_from_counts() {
        // 0→1 twice, 0→2 once, V=3, alpha=1 → (1/6, 3/6, 2/6)
        let ds = SequenceDataset::discrete(
            ItemVocab::identity(3),
            vec![Sequence::items("a", vec![0, 1, 0, 1]), Sequence::items("b", vec![0, 2])],
        )
        .unwrap();
        // "a" also contributes 1→0, which lives in another row.
        let t = fit_transitions(&ds, &[emb(&[0.0]), emb(&[0.1])], &[vec![0.0]], 1.0).unwrap();
        let row = t.dense_row(0, 0);
        let expect = [1.0 / 6.0, 3.0 / 6.0, 2.0 / 6.0];
        for (g, w) in row.iter().zip(expect) {
            assert!((g - w).abs() < 1e-15);
        }
        assert_eq!(t.prob(0, 0, 1), 0.5);
    }

    #[test]
    fn unobserved_archetype_is_uniform() {
        let ds = SequenceDataset::discrete(ItemVocab::identity(4), vec![Sequence::items("a", vec![0, 1, 2])]).unwrap();
        let t = fit_transitions(&ds, &[emb(&[0.0])], &[vec![0.0], vec![10.0]], 1.0).unwrap();
        for i in 0..4 {
            assert_eq!(t.dense_row(1, i), vec![0.25; 4]);
        }
    }

    #[test]
    fn mixture_of_rows() {
        let mut rows = vec![BTreeMap::new(), BTreeMap::new()];
        // alpha tiny so rows are ~ (0.2, 0.8) and (0.6, 0.4)
        rows[0].insert(0, CountRow { total: 10, counts: [(0, 2), (1, 8)].into_iter().collect() });
        rows[1].insert(0, CountRow { total: 10, counts: [(0, 6), (1, 4)].into_iter().collect() });
        let m = ArchetypeModel {
            centroids: vec![vec![0.0], vec![1.0]],
            structure: ArchetypeStructure::Transitions(TransitionCounts { vocab_size: 2, alpha: 1e-12, rows }),
        };
        let s = m.score(&SoftAssignment(vec![0.5, 0.5]), 0).unwrap();
        assert!((s[0] - 0.4).abs() < 1e-9 && (s[1] - 0.6).abs() < 1e-9);
        // K = 1 style: one-hot mixture returns the row itself
        let s = m.score(&SoftAssignment(vec![1.0, 0.0]), 0).unwrap();
        assert_eq!(s, m.transitions().unwrap().dense_row(0, 0));
        assert!(m.score(&SoftAssignment(vec![1.0, 0.0]), 2).is_err());
    }

    #[test]
    fn pattern_means_and_fallback() {
        let ds = SequenceDataset::continuous(vec![Sequence::values("w", vec![9.0, 1.0, 3.0])], None).unwrap();
        let means = fit_pattern_means(&ds, &[emb(&[0.0])], &[vec![0.0], vec![5.0]]).unwrap();
        assert_eq!(means, vec![2.0, 2.0]);
        let m = ArchetypeModel {
            centroids: vec![vec![0.0], vec![5.0]],
            structure: ArchetypeStructure::PatternMeans(vec![1.0, 3.0]),
        };
        assert_eq!(m.predict_continuous(&SoftAssignment(vec![0.5, 0.5])).unwrap(), 2.0);
        assert_eq!(m.predict_continuous(&SoftAssignment(vec![0.0, 1.0])).unwrap(), 3.0);
        let single = ArchetypeModel { centroids: vec![vec![0.0]], structure: ArchetypeStructure::PatternMeans(vec![0.7]) };
        assert_eq!(single.predict_continuous(&SoftAssignment(vec![1.0])).unwrap(), 0.7);
    }

    #[test]
    fn pattern_means_match_regrouping() {
        let seqs: Vec<Sequence> = (0..12)
            .map(|i| Sequence::values(format!("w{i}"), vec![i as f64, (i * i) as f64 * 0.1, -(i as f64)]))
            .collect();
        let embs: Vec<BehaviorEmbedding> = (0..12).map(|i| emb(&[if i % 3 == 0 { 1.0 } else { -1.0 }])).collect();
        let ds = SequenceDataset::continuous(seqs.clone(), None).unwrap();
        let means = fit_pattern_means(&ds, &embs, &[vec![1.0], vec![-1.0]]).unwrap();
        for (group, want_mod) in [(0usize, true), (1, false)] {
            let vals: Vec<f64> = seqs
                .iter()
                .enumerate()
                .filter(|(i, _)| (i % 3 == 0) == want_mod)
                .flat_map(|(_, s)| match &s.series {
                    Series::Values(v) => v[1..].to_vec(),
                    _ => unreachable!(),
                })
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((means[group] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_alpha_and_mode() {
        let ds = SequenceDataset::discrete(ItemVocab::identity(2), vec![Sequence::items("a", vec![0, 1])]).unwrap();
        assert!(fit_transitions(&ds, &[emb(&[0.0])], &[vec![0.0]], 0.0).is_err());
        assert!(fit_pattern_means(&ds, &[emb(&[0.0])], &[vec![0.0]]).is_err());
        assert!(fit_transitions(&ds, &[], &[vec![0.0]], 1.0).is_err());
    }

    proptest! {
        #[test]
        fn rows_stochastic_and_positive(
            seqs in prop::collection::vec(prop::collection::vec(0usize..6, 2..12), 1..10),
            alpha in 0.01f64..3.0,
            k in 1usize..4,
        ) {
            let n = seqs.len();
            let ds = SequenceDataset::discrete(
                ItemVocab::identity(6),
                seqs.into_iter().enumerate().map(|(i, s)| Sequence::items(format!("{i}"), s)).collect(),
            ).unwrap();
            let embs: Vec<_> = (0..n).map(|i| emb(&[i as f64])).collect();
            let cs: Vec<Vec<f64>> = (0..k).map(|c| vec![c as f64 * 2.0]).collect();
            let t = fit_transitions(&ds, &embs, &cs, alpha).unwrap();
            for kk in 0..k {
                for i in 0..6 {
                    let row = t.dense_row(kk, i);
                    prop_assert!(row.iter().all(|&p| p > 0.0));
                    prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
