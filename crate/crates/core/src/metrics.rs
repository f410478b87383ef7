//! Evaluation metrics: frame-level accuracy on piano-rolls and distance,
//! linearity and clustering statistics over embedding tables.

use std::collections::{BTreeMap, HashMap};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chorale::{ItemKind, ItemMeta, NhtKind};
use crate::model::PianoRoll;

/// Number of frames a sequence is divided into for frame accuracy.
pub const FRAMES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("piano-rolls have {pred} and {target} columns")]
    ShapeMismatch { pred: usize, target: usize },
    #[error("{steps} columns cannot be split into {FRAMES} equal frames")]
    IndivisibleFrames { steps: usize },
    #[error("vector of item {item_id} has dimension {found}, table uses {expected}")]
    DimensionMismatch {
        item_id: String,
        expected: usize,
        found: usize,
    },
    #[error("no skeleton embedding for skeleton ids {0:?}")]
    MissingSkeletons(Vec<String>),
    #[error("need at least {needed} buckets, have {found}")]
    TooFewBuckets { needed: usize, found: usize },
    #[error("need at least two labels with two or more members, have {0}")]
    TooFewClusters(usize),
    #[error("table contains no realisations")]
    NoRealisations,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::default();
    values.into_iter().for_each(|x| acc.add(x));
    acc.value()
}

/// TP / (TP + FP + FN) over 16 frames, each frame the union of its columns.
///
/// Returns 1.0 when both rolls are empty.
pub fn frame_accuracy(pred: &PianoRoll, target: &PianoRoll) -> Result<f64, MetricsError> {
    let steps = target.steps();
    if pred.steps() != steps {
        return Err(MetricsError::ShapeMismatch {
            pred: pred.steps(),
            target: steps,
        });
    }
    if steps == 0 || !steps.is_multiple_of(FRAMES) {
        return Err(MetricsError::IndivisibleFrames { steps });
    }
    let width = steps / FRAMES;
    let frame = |roll: &PianoRoll, f: usize| {
        roll.columns()[f * width..(f + 1) * width]
            .iter()
            .fold(0u128, |acc, c| acc | c)
    };
    let (mut tp, mut wrong) = (0u64, 0u64);
    for f in 0..FRAMES {
        let (p, t) = (frame(pred, f), frame(target, f));
        tp += u64::from((p & t).count_ones());
        wrong += u64::from((p ^ t).count_ones());
    }
    if tp + wrong == 0 {
        return Ok(1.0);
    }
    Ok(tp as f64 / (tp + wrong) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingLabels {
    pub kind: ItemKind,
    pub tonality: String,
    pub skeleton_id: String,
    pub nht_count: usize,
    pub nht_kinds: Vec<NhtKind>,
}

impl From<&ItemMeta> for EmbeddingLabels {
    fn from(m: &ItemMeta) -> Self {
        Self {
            kind: m.kind,
            tonality: m.tonality.clone(),
            skeleton_id: m.skeleton_id.clone(),
            nht_count: m.nht_count,
            nht_kinds: m.nhts.iter().map(|n| n.kind).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub item_id: String,
    pub vector: Vec<f64>,
    pub labels: EmbeddingLabels,
}

/// Pairs rows of an embedding matrix with metadata lines, in order.
pub fn join_embeddings(rows: Vec<Vec<f64>>, meta: &[ItemMeta]) -> Vec<EmbeddingRecord> {
    rows.into_iter()
        .zip(meta)
        .map(|(vector, m)| EmbeddingRecord {
            item_id: m.item_id.clone(),
            vector,
            labels: m.into(),
        })
        .collect()
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    compensated_sum(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y))).sqrt()
}

fn check_dimensions(records: &[EmbeddingRecord]) -> Result<(), MetricsError> {
    let Some(first) = records.first() else {
        return Ok(());
    };
    let expected = first.vector.len();
    match records.iter().find(|r| r.vector.len() != expected) {
        Some(r) => Err(MetricsError::DimensionMismatch {
            item_id: r.item_id.clone(),
            expected,
            found: r.vector.len(),
        }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Summary {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Self {
        let count = values.len();
        let mean = compensated_sum(values.iter().copied()) / count as f64;
        let var = compensated_sum(values.iter().map(|x| (x - mean) * (x - mean))) / count as f64;
        Self {
            mean,
            std: var.sqrt(),
            count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceBucket {
    pub nht_count: usize,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
    /// Mean divided by the largest bucket mean.
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceProfile {
    pub buckets: Vec<DistanceBucket>,
}

/// Skeleton-to-realisation distances of every realisation, keyed by a label.
fn grouped_distances<K: Ord>(
    records: &[EmbeddingRecord],
    key: impl Fn(&EmbeddingRecord) -> Option<K>,
) -> Result<BTreeMap<K, Vec<f64>>, MetricsError> {
    check_dimensions(records)?;
    let skeletons: HashMap<&str, &[f64]> = records
        .iter()
        .filter(|r| r.labels.kind == ItemKind::Skeleton)
        .map(|r| (r.labels.skeleton_id.as_str(), r.vector.as_slice()))
        .collect();
    let realisations: Vec<&EmbeddingRecord> = records
        .iter()
        .filter(|r| r.labels.kind == ItemKind::Realisation)
        .collect();
    if realisations.is_empty() {
        return Err(MetricsError::NoRealisations);
    }
    let mut missing: Vec<String> = realisations
        .iter()
        .filter(|r| !skeletons.contains_key(r.labels.skeleton_id.as_str()))
        .map(|r| r.labels.skeleton_id.clone())
        .collect();
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(MetricsError::MissingSkeletons(missing));
    }
    let distances: Vec<f64> = realisations
        .par_iter()
        .map(|r| l2_distance(&r.vector, skeletons[r.labels.skeleton_id.as_str()]))
        .collect();
    let mut groups: BTreeMap<K, Vec<f64>> = BTreeMap::new();
    for (r, d) in realisations.iter().zip(distances) {
        if let Some(k) = key(r) {
            groups.entry(k).or_default().push(d);
        }
    }
    Ok(groups)
}

/// L2 distance between each realisation and its skeleton, bucketed by NHT count.
pub fn distance_profile(records: &[EmbeddingRecord]) -> Result<DistanceProfile, MetricsError> {
    let groups = grouped_distances(records, |r| Some(r.labels.nht_count))?;
    let summaries: Vec<(usize, Summary)> =
        groups.iter().map(|(&k, d)| (k, Summary::of(d))).collect();
    let max = summaries.iter().map(|(_, s)| s.mean).fold(0.0, f64::max);
    let buckets = summaries
        .into_iter()
        .map(|(nht_count, s)| DistanceBucket {
            nht_count,
            mean: s.mean,
            std: s.std,
            count: s.count,
            normalized: if max > 0.0 { s.mean / max } else { 0.0 },
        })
        .collect();
    Ok(DistanceProfile { buckets })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindRow {
    pub kind: NhtKind,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Like [`distance_profile`] but over single-NHT realisations grouped by kind.
pub fn kindwise_profile(records: &[EmbeddingRecord]) -> Result<Vec<KindRow>, MetricsError> {
    let groups = grouped_distances(records, |r| match r.labels.nht_kinds.as_slice() {
        [kind] => Some(*kind),
        _ => None,
    })?;
    Ok(groups
        .into_iter()
        .map(|(kind, d)| {
            let s = Summary::of(&d);
            KindRow {
                kind,
                mean: s.mean,
                std: s.std,
                count: s.count,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linearity {
    pub pearson: f64,
    pub spearman: f64,
    /// Set when either series has zero variance; coefficients are then 0.
    pub degenerate: bool,
}

/// Pearson and Spearman correlation of bucket means against NHT counts.
pub fn linearity_score(profile: &DistanceProfile) -> Result<Linearity, MetricsError> {
    if profile.buckets.len() < 3 {
        return Err(MetricsError::TooFewBuckets {
            needed: 3,
            found: profile.buckets.len(),
        });
    }
    let x: Vec<f64> = profile.buckets.iter().map(|b| b.nht_count as f64).collect();
    let y: Vec<f64> = profile.buckets.iter().map(|b| b.mean).collect();
    let r = pearson(&x, &y);
    let rho = pearson(&ranks(&x), &ranks(&y));
    Ok(Linearity {
        pearson: r.unwrap_or(0.0),
        spearman: rho.unwrap_or(0.0),
        degenerate: r.is_none() || rho.is_none(),
    })
}

/// Sample Pearson correlation, `None` for zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = compensated_sum(x.iter().copied()) / n;
    let my = compensated_sum(y.iter().copied()) / n;
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = compensated_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let syy = compensated_sum(y.iter().map(|b| (b - my) * (b - my)));
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks, ties receive their average rank.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Silhouette {
    pub score: f64,
    pub items: usize,
    pub clusters: usize,
    /// Labels dropped for having a single member.
    pub excluded: Vec<String>,
}

/// Mean silhouette coefficient of the tonality labels under the L2 metric.
pub fn tonality_silhouette(records: &[EmbeddingRecord]) -> Result<Silhouette, MetricsError> {
    check_dimensions(records)?;
    let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_label
            .entry(r.labels.tonality.as_str())
            .or_default()
            .push(i);
    }
    let excluded: Vec<String> = by_label
        .iter()
        .filter(|(_, m)| m.len() < 2)
        .map(|(l, _)| l.to_string())
        .collect();
    for label in &excluded {
        warn!("tonality {label} has a single member and is excluded from the silhouette");
    }
    let clusters: Vec<Vec<usize>> = by_label.into_values().filter(|m| m.len() >= 2).collect();
    if clusters.len() < 2 {
        return Err(MetricsError::TooFewClusters(clusters.len()));
    }
    let members: Vec<(usize, usize)> = clusters
        .iter()
        .enumerate()
        .flat_map(|(c, m)| m.iter().map(move |&i| (c, i)))
        .collect();
    let scores: Vec<f64> = members
        .par_iter()
        .map(|&(own, i)| {
            let mean_to = |c: usize| {
                let others = clusters[c].iter().filter(|&&j| j != i);
                let n = clusters[c].len() - usize::from(c == own);
                compensated_sum(
                    others.map(|&j| l2_distance(&records[i].vector, &records[j].vector)),
                ) / n as f64
            };
            let a = mean_to(own);
            let b = (0..clusters.len())
                .filter(|&c| c != own)
                .map(mean_to)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom > 0.0 {
                (b - a) / denom
            } else {
                0.0
            }
        })
        .collect();
    Ok(Silhouette {
        score: compensated_sum(scores.iter().copied()) / scores.len() as f64,
        items: scores.len(),
        clusters: clusters.len(),
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn roll(cells: &[(u8, usize)]) -> PianoRoll {
        let mut r = PianoRoll::new(16, 120);
        for &(p, t) in cells {
            r.set(p, t, true);
        }
        r
    }

    fn rec(
        id: &str,
        kind: ItemKind,
        sk: &str,
        nht: usize,
        tonality: &str,
        v: Vec<f64>,
    ) -> EmbeddingRecord {
        EmbeddingRecord {
            item_id: id.into(),
            vector: v,
            labels: EmbeddingLabels {
                kind,
                tonality: tonality.into(),
                skeleton_id: sk.into(),
                nht_count: nht,
                nht_kinds: vec![NhtKind::Passing; nht],
            },
        }
    }

    #[test]
    fn frame_accuracy_examples() {
        let x = roll(&[(60, 0), (64, 3)]);
        assert_eq!(frame_accuracy(&x, &x).unwrap(), 1.0);
        assert_eq!(frame_accuracy(&roll(&[(61, 0)]), &x).unwrap(), 0.0);
        let target = roll(&[(60, 1), (64, 1)]);
        let pred = roll(&[(60, 1), (67, 1)]);
        assert!((frame_accuracy(&pred, &target).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(frame_accuracy(&roll(&[]), &roll(&[])).unwrap(), 1.0);
        assert_eq!(
            frame_accuracy(&PianoRoll::new(8, 1), &roll(&[])),
            Err(MetricsError::ShapeMismatch {
                pred: 8,
                target: 16
            })
        );
        assert_eq!(
            frame_accuracy(&PianoRoll::new(8, 1), &PianoRoll::new(8, 1)),
            Err(MetricsError::IndivisibleFrames { steps: 8 })
        );
    }

    #[test]
    fn frames_are_column_unions() {
        // 32 columns: frame 0 holds columns 0 and 1
        let mut a = PianoRoll::new(32, 60);
        let mut b = PianoRoll::new(32, 60);
        a.set(60, 0, true);
        b.set(60, 1, true);
        assert_eq!(frame_accuracy(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn profile_normalization() {
        let t = vec![
            rec("s", ItemKind::Skeleton, "s", 0, "C:maj", vec![0.0, 0.0]),
            rec("r1", ItemKind::Realisation, "s", 1, "C:maj", vec![1.0, 0.0]),
            rec("r2", ItemKind::Realisation, "s", 2, "C:maj", vec![0.0, 2.0]),
            rec(
                "r3",
                ItemKind::Realisation,
                "s",
                2,
                "C:maj",
                vec![0.0, -2.0],
            ),
            rec("r0", ItemKind::Realisation, "s", 0, "C:maj", vec![0.0, 0.0]),
        ];
        let p = distance_profile(&t).unwrap();
        let got: Vec<_> = p
            .buckets
            .iter()
            .map(|b| (b.nht_count, b.mean, b.count, b.normalized))
            .collect();
        assert_eq!(
            got,
            vec![(0, 0.0, 1, 0.0), (1, 1.0, 1, 0.5), (2, 2.0, 2, 1.0)]
        );
        assert_eq!(p.buckets[2].std, 0.0);
    }

    #[test]
    fn missing_skeleton_is_listed() {
        let t = vec![
            rec("a", ItemKind::Realisation, "s9", 1, "C:maj", vec![1.0]),
            rec("b", ItemKind::Realisation, "s3", 1, "C:maj", vec![1.0]),
        ];
        assert_eq!(
            distance_profile(&t),
            Err(MetricsError::MissingSkeletons(vec![
                "s3".into(),
                "s9".into()
            ]))
        );
    }

    #[test]
    fn dimension_mismatch() {
        let t = vec![
            rec("s", ItemKind::Skeleton, "s", 0, "C:maj", vec![0.0]),
            rec("r", ItemKind::Realisation, "s", 1, "C:maj", vec![0.0, 1.0]),
        ];
        assert!(matches!(
            distance_profile(&t),
            Err(MetricsError::DimensionMismatch { .. })
        ));
    }

    fn profile(means: &[f64]) -> DistanceProfile {
        DistanceProfile {
            buckets: means
                .iter()
                .enumerate()
                .map(|(i, &mean)| DistanceBucket {
                    nht_count: i + 1,
                    mean,
                    std: 0.0,
                    count: 1,
                    normalized: 0.0,
                })
                .collect(),
        }
    }

    #[test]
    fn linearity_examples() {
        let l = linearity_score(&profile(&[1.0, 2.0, 3.0, 4.0])).unwrap();
        assert!((l.pearson - 1.0).abs() < 1e-15 && (l.spearman - 1.0).abs() < 1e-15);
        let l = linearity_score(&profile(&[4.0, 3.0, 2.0, 1.0])).unwrap();
        assert!((l.pearson + 1.0).abs() < 1e-15);
        let l = linearity_score(&profile(&[2.0, 2.0, 2.0])).unwrap();
        assert!(l.degenerate && l.pearson == 0.0);
        assert_eq!(
            linearity_score(&profile(&[1.0, 2.0])),
            Err(MetricsError::TooFewBuckets {
                needed: 3,
                found: 2
            })
        );
    }

    #[test]
    fn linearity_matches_textbook_formula() {
        let means = [0.3, 1.1, 1.05, 2.4, 2.9, 3.7];
        // n Σxy − Σx Σy over the root product form
        let n = means.len() as f64;
        let xs: Vec<f64> = (1..=means.len()).map(|i| i as f64).collect();
        let (sx, sy): (f64, f64) = (xs.iter().sum(), means.iter().sum());
        let sxy: f64 = xs.iter().zip(&means).map(|(a, b)| a * b).sum();
        let sxx: f64 = xs.iter().map(|a| a * a).sum();
        let syy: f64 = means.iter().map(|b| b * b).sum();
        let r = (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt());
        // one swapped pair of ranks: rho = 1 - 6 * 2 / (n (n^2 - 1))
        let rho = 1.0 - 6.0 * 2.0 / (n * (n * n - 1.0));
        let l = linearity_score(&profile(&means)).unwrap();
        assert!((l.pearson - r).abs() < 1e-12);
        assert!((l.spearman - rho).abs() < 1e-12);
    }

    #[test]
    fn average_ranks() {
        assert_eq!(ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn silhouette_separated_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut t = Vec::new();
        for i in 0..40 {
            let (label, centre) = if i % 2 == 0 {
                ("C:maj", 0.0)
            } else {
                ("A:min", 100.0)
            };
            let v = vec![centre + rng.gen::<f64>(), rng.gen::<f64>()];
            t.push(rec(&i.to_string(), ItemKind::Skeleton, "s", 0, label, v));
        }
        assert!(tonality_silhouette(&t).unwrap().score > 0.9);
    }

    #[test]
    fn silhouette_identical_vectors_is_zero() {
        let t: Vec<_> = (0..6)
            .map(|i| {
                rec(
                    "x",
                    ItemKind::Skeleton,
                    "s",
                    0,
                    ["a", "b"][i % 2],
                    vec![1.0, 1.0],
                )
            })
            .collect();
        assert_eq!(tonality_silhouette(&t).unwrap().score, 0.0);
    }

    #[test]
    fn silhouette_shuffled_labels_near_zero() {
        // simulation oracle: random labels on a single Gaussian blob
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let labels = ["C:maj", "G:maj", "D:min", "A:min"];
        let t: Vec<_> = (0..1000)
            .map(|i| {
                let v: Vec<f64> = (0..8).map(|_| StandardNormal.sample(&mut rng)).collect();
                rec(
                    &i.to_string(),
                    ItemKind::Skeleton,
                    "s",
                    0,
                    labels[rng.gen_range(0..4)],
                    v,
                )
            })
            .collect();
        let s = tonality_silhouette(&t).unwrap();
        assert!(s.score.abs() < 0.1, "{}", s.score);
    }

    #[test]
    fn silhouette_excludes_singletons() {
        let mut t: Vec<_> = (0..4)
            .map(|i| {
                rec(
                    "x",
                    ItemKind::Skeleton,
                    "s",
                    0,
                    ["a", "b"][i % 2],
                    vec![i as f64],
                )
            })
            .collect();
        t.push(rec("y", ItemKind::Skeleton, "s", 0, "lonely", vec![0.0]));
        let s = tonality_silhouette(&t).unwrap();
        assert_eq!(s.excluded, vec!["lonely".to_string()]);
        assert_eq!(s.items, 4);
        t.truncate(1);
        assert_eq!(
            tonality_silhouette(&t),
            Err(MetricsError::TooFewClusters(0))
        );
    }

    #[test]
    fn kindwise_rows() {
        let mut single = rec("r", ItemKind::Realisation, "s", 1, "C:maj", vec![3.0, 4.0]);
        single.labels.nht_kinds = vec![NhtKind::Suspension];
        let t = vec![
            rec("s", ItemKind::Skeleton, "s", 0, "C:maj", vec![0.0, 0.0]),
            single,
            rec("p", ItemKind::Realisation, "s", 1, "C:maj", vec![1.0, 0.0]),
            rec("q", ItemKind::Realisation, "s", 2, "C:maj", vec![9.0, 0.0]),
        ];
        let rows = kindwise_profile(&t).unwrap();
        assert_eq!(
            rows,
            vec![
                KindRow {
                    kind: NhtKind::Passing,
                    mean: 1.0,
                    std: 0.0,
                    count: 1
                },
                KindRow {
                    kind: NhtKind::Suspension,
                    mean: 5.0,
                    std: 0.0,
                    count: 1
                },
            ]
        );
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let values = [1e16, 1.0, -1e16];
        assert_eq!(compensated_sum(values), 1.0);
    }

    proptest! {
        #[test]
        fn frame_accuracy_properties(
            a in proptest::collection::vec((40u8..90, 0usize..16), 0..30),
            b in proptest::collection::vec((40u8..90, 0usize..16), 0..30),
            shift in -30i32..30,
        ) {
            let (ra, rb) = (roll(&a), roll(&b));
            let acc = frame_accuracy(&ra, &rb).unwrap();
            prop_assert!((0.0..=1.0).contains(&acc));
            prop_assert_eq!(frame_accuracy(&ra, &ra).unwrap(), 1.0);
            let t = |cells: &[(u8, usize)]| roll(&cells.iter().map(|&(p, s)| ((p as i32 + shift) as u8, s)).collect::<Vec<_>>());
            prop_assert_eq!(frame_accuracy(&t(&a), &t(&b)).unwrap(), acc);
        }

        #[test]
        fn profile_invariant_under_rotation(
            pts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0usize..4), 2..12),
            theta in 0.0f64..std::f64::consts::TAU,
        ) {
            let mut t = vec![rec("s", ItemKind::Skeleton, "s", 0, "C:maj", vec![0.5, -0.25])];
            t.extend(pts.iter().map(|&(x, y, n)| rec("r", ItemKind::Realisation, "s", n, "C:maj", vec![x, y])));
            let (c, s) = (theta.cos(), theta.sin());
            let rotated: Vec<_> = t.iter().cloned().map(|mut r| {
                let (x, y) = (r.vector[0], r.vector[1]);
                r.vector = vec![c * x - s * y, s * x + c * y];
                r
            }).collect();
            let (p, q) = (distance_profile(&t).unwrap(), distance_profile(&rotated).unwrap());
            for (a, b) in p.buckets.iter().zip(&q.buckets) {
                prop_assert!((a.mean - b.mean).abs() < 1e-9);
            }
        }

        #[test]
        fn pearson_affine_invariant(means in proptest::collection::vec(0.0f64..10.0, 3..9), a in 0.1f64..10.0, b in -5.0f64..5.0) {
            let p = linearity_score(&profile(&means)).unwrap();
            let scaled: Vec<f64> = means.iter().map(|m| a * m + b).collect();
            let q = linearity_score(&profile(&scaled)).unwrap();
            prop_assert_eq!(p.degenerate, q.degenerate);
            prop_assert!((p.pearson - q.pearson).abs() < 1e-9);
        }
    }
}
