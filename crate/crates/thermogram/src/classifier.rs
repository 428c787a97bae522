//! Nearest-neighbor screening over the four-feature vectors: per-feature
//! distance voting (the default) and plain k-NN with Euclidean distance.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub const FEATURE_NAMES: [&str; 4] = ["mean_norm", "std_raw", "max_norm", "asymmetry"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Label {
    Healthy,
    Sick,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Healthy => write!(f, "healthy"),
            Label::Sick => write!(f, "sick"),
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "healthy" => Ok(Label::Healthy),
            "sick" => Ok(Label::Sick),
            other => Err(Error::Parse {
                what: "label".into(),
                detail: format!("expected `healthy` or `sick`, got {other:?}"),
            }),
        }
    }
}

/// One subject: an id, its features, and (for gallery records) a label.
#[derive(Clone, Debug, PartialEq)]
pub struct PatientRecord {
    pub id: String,
    pub features: FeatureVector,
    pub label: Option<Label>,
}

/// Per gallery record, the four absolute feature differences to a query.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceTable {
    pub entries: Vec<[f64; 4]>,
}

/// Absolute per-feature distances from the query to every gallery record,
/// in gallery order.
pub fn feature_distances(query: &PatientRecord, gallery: &[PatientRecord]) -> Result<DistanceTable> {
    if gallery.is_empty() {
        return Err(Error::EmptyGallery);
    }
    let q = query.features.as_array();
    let entries = gallery
        .iter()
        .map(|g| {
            let v = g.features.as_array();
            [
                (q[0] - v[0]).abs(),
                (q[1] - v[1]).abs(),
                (q[2] - v[2]).abs(),
                (q[3] - v[3]).abs(),
            ]
        })
        .collect();
    Ok(DistanceTable { entries })
}

/// Result of per-feature voting: the chosen gallery index per feature and
/// the majority label.
#[derive(Clone, Debug, PartialEq)]
pub struct VoteOutcome {
    /// For each feature, the gallery index with the minimal distance.
    pub votes: [usize; 4],
    pub label: Label,
}

/// Each feature votes for its nearest gallery record (ties to the earlier
/// record); the majority label wins. A 2-2 label tie goes to the record
/// with the smallest sum of min-normalized distances, each column divided
/// by its maximum (all-zero columns contribute 0).
pub fn per_feature_vote(table: &DistanceTable, labels: &[Label]) -> Result<VoteOutcome> {
    if table.entries.is_empty() {
        return Err(Error::EmptyGallery);
    }
    if table.entries.len() != labels.len() {
        return Err(Error::InvalidParams {
            detail: format!(
                "distance table has {} rows but {} labels were given",
                table.entries.len(),
                labels.len()
            ),
        });
    }
    let mut votes = [0usize; 4];
    for f in 0..4 {
        let mut best = 0usize;
        for g in 1..table.entries.len() {
            if table.entries[g][f] < table.entries[best][f] {
                best = g;
            }
        }
        votes[f] = best;
    }
    let sick = votes.iter().filter(|&&g| labels[g] == Label::Sick).count();
    let label = match sick.cmp(&2) {
        std::cmp::Ordering::Greater => Label::Sick,
        std::cmp::Ordering::Less => Label::Healthy,
        std::cmp::Ordering::Equal => {
            let mut col_max = [0.0f64; 4];
            for row in &table.entries {
                for f in 0..4 {
                    col_max[f] = col_max[f].max(row[f]);
                }
            }
            let score = |row: &[f64; 4]| -> f64 {
                (0..4)
                    .map(|f| if col_max[f] > 0.0 { row[f] / col_max[f] } else { 0.0 })
                    .sum()
            };
            let mut best = 0usize;
            for g in 1..table.entries.len() {
                if score(&table.entries[g]) < score(&table.entries[best]) {
                    best = g;
                }
            }
            labels[best]
        }
    };
    Ok(VoteOutcome { votes, label })
}

/// Result of a k-NN query: the sorted `(gallery index, distance)` list of
/// the k nearest and the majority label.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnOutcome {
    pub neighbors: Vec<(usize, f64)>,
    pub label: Label,
}

/// k-nearest-neighbor classification over the raw 4-dimensional vectors
/// (min-max scaled over gallery plus query when `normalize` is on).
/// Distance ties go to the earlier gallery record; an even-k label tie goes
/// to the single nearest neighbor's label.
pub fn knn_euclidean(
    query: &PatientRecord,
    gallery: &[PatientRecord],
    k: usize,
    normalize: bool,
) -> Result<KnnOutcome> {
    if k == 0 {
        return Err(Error::InvalidParams {
            detail: "k must be at least 1".into(),
        });
    }
    if gallery.len() < k {
        return Err(Error::GalleryTooSmall {
            len: gallery.len(),
            k,
        });
    }
    let labels: Vec<Label> = gallery
        .iter()
        .map(|g| {
            g.label.ok_or_else(|| Error::UnlabeledGallery {
                id: g.id.clone(),
            })
        })
        .collect::<Result<_>>()?;

    let mut vectors: Vec<[f64; 4]> = gallery.iter().map(|g| g.features.as_array()).collect();
    let mut q = query.features.as_array();
    if normalize {
        for f in 0..4 {
            let mut lo = q[f];
            let mut hi = q[f];
            for v in &vectors {
                lo = lo.min(v[f]);
                hi = hi.max(v[f]);
            }
            let span = hi - lo;
            let scale = |x: f64| if span > 0.0 { (x - lo) / span } else { 0.0 };
            for v in &mut vectors {
                v[f] = scale(v[f]);
            }
            q[f] = scale(q[f]);
        }
    }

    let mut neighbors: Vec<(usize, f64)> = vectors
        .iter()
        .enumerate()
        .map(|(g, v)| {
            let d2: f64 = (0..4).map(|f| (q[f] - v[f]) * (q[f] - v[f])).sum();
            (g, d2.sqrt())
        })
        .collect();
    neighbors.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    neighbors.truncate(k);

    let sick = neighbors
        .iter()
        .filter(|&&(g, _)| labels[g] == Label::Sick)
        .count();
    let label = match (2 * sick).cmp(&k) {
        std::cmp::Ordering::Greater => Label::Sick,
        std::cmp::Ordering::Less => Label::Healthy,
        std::cmp::Ordering::Equal => labels[neighbors[0].0],
    };
    Ok(KnnOutcome { neighbors, label })
}

/// Which classifier a batch run uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassifyMethod {
    Vote,
    Knn { k: usize, normalize: bool },
}

impl fmt::Display for ClassifyMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassifyMethod::Vote => write!(f, "vote"),
            ClassifyMethod::Knn { k, normalize } => {
                write!(f, "knn k={k}")?;
                if *normalize {
                    write!(f, " normalized")?;
                }
                Ok(())
            }
        }
    }
}

/// Everything recorded about one classified record.
#[derive(Clone, Debug, PartialEq)]
pub enum PredictionDetail {
    Vote {
        /// Gallery ids in the order the distance rows use.
        gallery: Vec<(String, Label)>,
        distances: DistanceTable,
        votes: [usize; 4],
    },
    Knn {
        /// The k nearest: id, distance, label.
        neighbors: Vec<(String, f64, Label)>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub label: Label,
    pub detail: PredictionDetail,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchEntry {
    pub id: String,
    /// The prediction, or the per-record error message.
    pub outcome: std::result::Result<Prediction, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchReport {
    pub method: ClassifyMethod,
    /// Ids appearing more than once among the classified records.
    pub duplicates: Vec<String>,
    pub entries: Vec<BatchEntry>,
}

/// Classifies every record against the gallery. The gallery is first put
/// into canonical id order so the outcome does not depend on how the list
/// was assembled; gallery entries sharing a record's id are left out for
/// that record, which turns a shared record/gallery file into
/// leave-one-out. Per-record failures are collected into the report rather
/// than aborting the batch.
pub fn classify_batch(
    records: &[PatientRecord],
    gallery: &[PatientRecord],
    method: ClassifyMethod,
) -> Result<BatchReport> {
    if gallery.is_empty() {
        return Err(Error::EmptyGallery);
    }
    let mut canonical: Vec<&PatientRecord> = gallery.iter().collect();
    canonical.sort_by(|a, b| a.id.cmp(&b.id));
    for g in &canonical {
        if g.label.is_none() {
            return Err(Error::UnlabeledGallery { id: g.id.clone() });
        }
    }

    let mut duplicates = Vec::new();
    for (idx, r) in records.iter().enumerate() {
        if records[..idx].iter().any(|p| p.id == r.id) && !duplicates.contains(&r.id) {
            duplicates.push(r.id.clone());
        }
    }

    let entries = records
        .iter()
        .map(|record| {
            let subset: Vec<PatientRecord> = canonical
                .iter()
                .filter(|g| g.id != record.id)
                .map(|g| (*g).clone())
                .collect();
            let outcome = classify_one(record, &subset, method).map_err(|e| e.to_string());
            BatchEntry {
                id: record.id.clone(),
                outcome,
            }
        })
        .collect();

    Ok(BatchReport {
        method,
        duplicates,
        entries,
    })
}

fn classify_one(
    record: &PatientRecord,
    gallery: &[PatientRecord],
    method: ClassifyMethod,
) -> Result<Prediction> {
    match method {
        ClassifyMethod::Vote => {
            let distances = feature_distances(record, gallery)?;
            let labels: Vec<Label> = gallery
                .iter()
                .map(|g| {
                    g.label.ok_or_else(|| Error::UnlabeledGallery {
                        id: g.id.clone(),
                    })
                })
                .collect::<Result<_>>()?;
            let outcome = per_feature_vote(&distances, &labels)?;
            Ok(Prediction {
                label: outcome.label,
                detail: PredictionDetail::Vote {
                    gallery: gallery
                        .iter()
                        .zip(&labels)
                        .map(|(g, &l)| (g.id.clone(), l))
                        .collect(),
                    distances,
                    votes: outcome.votes,
                },
            })
        }
        ClassifyMethod::Knn { k, normalize } => {
            let outcome = knn_euclidean(record, gallery, k, normalize)?;
            Ok(Prediction {
                label: outcome.label,
                detail: PredictionDetail::Knn {
                    neighbors: outcome
                        .neighbors
                        .iter()
                        .map(|&(g, d)| {
                            (
                                gallery[g].id.clone(),
                                d,
                                gallery[g].label.expect("gallery labels checked"),
                            )
                        })
                        .collect(),
                },
            })
        }
    }
}

impl BatchReport {
    /// Stable text rendering, one block per record in input order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("# classification report\n");
        out.push_str(&format!("method: {}\n", self.method));
        if self.duplicates.is_empty() {
            out.push_str("duplicates: none\n");
        } else {
            out.push_str(&format!("duplicates: {}\n", self.duplicates.join(", ")));
        }
        for entry in &self.entries {
            out.push('\n');
            match &entry.outcome {
                Err(msg) => out.push_str(&format!("record {}: error: {}\n", entry.id, msg)),
                Ok(p) => {
                    out.push_str(&format!("record {}: {}\n", entry.id, p.label));
                    match &p.detail {
                        PredictionDetail::Vote {
                            gallery,
                            distances,
                            votes,
                        } => {
                            let vote_text: Vec<String> = FEATURE_NAMES
                                .iter()
                                .zip(votes)
                                .map(|(name, &g)| format!("{}->{}", name, gallery[g].0))
                                .collect();
                            out.push_str(&format!("  votes: {}\n", vote_text.join(" ")));
                            for ((id, label), row) in gallery.iter().zip(&distances.entries) {
                                out.push_str(&format!(
                                    "  distances {} ({}): {:.6} {:.6} {:.6} {:.6}\n",
                                    id, label, row[0], row[1], row[2], row[3]
                                ));
                            }
                        }
                        PredictionDetail::Knn { neighbors } => {
                            let text: Vec<String> = neighbors
                                .iter()
                                .map(|(id, d, label)| format!("{} d={:.6} ({})", id, d, label))
                                .collect();
                            out.push_str(&format!("  neighbors: {}\n", text.join("; ")));
                        }
                    }
                }
            }
        }
        out
    }
}

pub const RECORDS_HEADER: &str = "id,mean_norm,std_raw,max_norm,asymmetry,label";

/// Parses the records format: a header line, then one record per line with
/// an empty label column for unlabeled queries.
pub fn parse_records(text: &str) -> Result<Vec<PatientRecord>> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((_, l)) => break l,
            None => {
                return Err(Error::Parse {
                    what: "records".into(),
                    detail: "empty file".into(),
                })
            }
        }
    };
    if header.trim() != RECORDS_HEADER {
        return Err(Error::Parse {
            what: "records".into(),
            detail: format!("expected header `{}`, got {:?}", RECORDS_HEADER, header.trim()),
        });
    }
    let mut records = Vec::new();
    for (line_no, raw) in lines {
        if raw.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = raw.split(',').collect();
        if cells.len() != 6 {
            return Err(Error::RaggedRows {
                row: line_no + 1,
                expected: 6,
                got: cells.len(),
            });
        }
        let mut nums = [0.0f64; 4];
        for (f, cell) in cells[1..5].iter().enumerate() {
            let trimmed = cell.trim();
            nums[f] = trimmed.parse().map_err(|_| Error::NonNumericCell {
                row: line_no + 1,
                col: f + 2,
                text: trimmed.to_string(),
            })?;
        }
        let features = FeatureVector {
            mean_norm: nums[0],
            std_raw: nums[1],
            max_norm: nums[2],
            asymmetry: nums[3],
        };
        features.validate()?;
        let label_text = cells[5].trim();
        let label = if label_text.is_empty() {
            None
        } else {
            Some(label_text.parse()?)
        };
        records.push(PatientRecord {
            id: cells[0].trim().to_string(),
            features,
            label,
        });
    }
    Ok(records)
}

pub fn read_records_file(path: &Path) -> Result<Vec<PatientRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::UnreadableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    parse_records(&text)
}

/// Renders records in the file format, features at six decimal places.
pub fn format_records(records: &[PatientRecord]) -> String {
    let mut out = String::from(RECORDS_HEADER);
    out.push('\n');
    for r in records {
        let f = r.features.as_array();
        let label = r.label.map(|l| l.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{}\n",
            r.id, f[0], f[1], f[2], f[3], label
        ));
    }
    out
}

pub fn write_records_file(path: &Path, records: &[PatientRecord]) -> Result<()> {
    fs::write(path, format_records(records)).map_err(|e| Error::UnwritableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(id: &str, f: [f64; 4], label: Option<Label>) -> PatientRecord {
        PatientRecord {
            id: id.into(),
            features: FeatureVector {
                mean_norm: f[0],
                std_raw: f[1],
                max_norm: f[2],
                asymmetry: f[3],
            },
            label,
        }
    }

    /// Gallery rows carrying the published O_1 distance rows (O_2, O_3,
    /// O_4) used by several tests.
    fn o1_distance_table() -> (DistanceTable, Vec<Label>) {
        (
            DistanceTable {
                entries: vec![
                    [0.172, 14.648, 0.157, 0.053],
                    [0.8216, 28.826, 0.833, 0.063],
                    [0.414, 37.26, 0.315, 0.070],
                ],
            },
            vec![Label::Sick, Label::Healthy, Label::Healthy],
        )
    }

    #[test]
    fn distances_to_matching_record_are_zero() {
        let q = record("q", [0.5, 20.0, 0.8, 0.05], None);
        let same = record("g1", [0.5, 20.0, 0.8, 0.05], Some(Label::Sick));
        let other = record("g2", [0.3, 10.0, 0.6, 0.02], Some(Label::Healthy));
        let t = feature_distances(&q, &[same, other]).unwrap();
        assert_eq!(t.entries[0], [0.0, 0.0, 0.0, 0.0]);
        assert_eq!(t.entries[1][0], 0.2);
    }

    #[test]
    fn distances_require_a_gallery() {
        let q = record("q", [0.5, 20.0, 0.8, 0.05], None);
        assert!(matches!(feature_distances(&q, &[]), Err(Error::EmptyGallery)));
    }

    #[test]
    fn distances_are_symmetric_between_records() {
        let a = record("a", [0.4, 31.0, 0.7, 0.04], Some(Label::Sick));
        let b = record("b", [0.9, 12.5, 0.2, 0.09], Some(Label::Healthy));
        let ab = feature_distances(&a, std::slice::from_ref(&b)).unwrap();
        let ba = feature_distances(&b, std::slice::from_ref(&a)).unwrap();
        assert_eq!(ab.entries[0], ba.entries[0]);
    }

    #[test]
    fn vote_on_first_published_table_is_unanimous_sick() {
        let (table, labels) = o1_distance_table();
        let outcome = per_feature_vote(&table, &labels).unwrap();
        assert_eq!(outcome.votes, [0, 0, 0, 0]);
        assert_eq!(outcome.label, Label::Sick);
    }

    #[test]
    fn vote_on_second_published_table_is_three_to_one_healthy() {
        // Rows: O_1, O_2, O_4 distances from the third subject.
        let table = DistanceTable {
            entries: vec![
                [0.821, 28.826, 0.833, 0.063],
                [0.848, 20.963, 0.898, 0.014],
                [0.811, 15.977, 0.971, 0.006],
            ],
        };
        let labels = vec![Label::Sick, Label::Sick, Label::Healthy];
        let outcome = per_feature_vote(&table, &labels).unwrap();
        assert_eq!(outcome.votes, [2, 2, 0, 2]);
        assert_eq!(outcome.label, Label::Healthy);
    }

    #[test]
    fn single_gallery_record_wins_every_feature() {
        let table = DistanceTable {
            entries: vec![[0.1, 5.0, 0.2, 0.01]],
        };
        let outcome = per_feature_vote(&table, &[Label::Sick]).unwrap();
        assert_eq!(outcome.votes, [0, 0, 0, 0]);
        assert_eq!(outcome.label, Label::Sick);
    }

    #[test]
    fn within_feature_tie_prefers_earlier_gallery_record() {
        let table = DistanceTable {
            entries: vec![[0.2, 3.0, 0.1, 0.02], [0.2, 3.0, 0.1, 0.02]],
        };
        let outcome = per_feature_vote(&table, &[Label::Healthy, Label::Sick]).unwrap();
        assert_eq!(outcome.votes, [0, 0, 0, 0]);
        assert_eq!(outcome.label, Label::Healthy);
    }

    #[test]
    fn two_two_tie_uses_min_normalized_sums() {
        // Features 0 and 1 go to row 0 (sick); features 2 and 3 to row 1
        // (healthy). Normalized sums: row 0 = 0.1+0.1+1+1 = 2.2,
        // row 1 = 1+1+0.1+0.1 = 2.2, row 2 = 0.5·4 = 2.0 → row 2, healthy.
        let table = DistanceTable {
            entries: vec![
                [0.01, 1.0, 1.0, 0.10],
                [0.10, 10.0, 0.1, 0.01],
                [0.05, 5.0, 0.5, 0.05],
            ],
        };
        let labels = vec![Label::Sick, Label::Healthy, Label::Healthy];
        let outcome = per_feature_vote(&table, &labels).unwrap();
        assert_eq!(outcome.votes, [0, 0, 1, 1]);
        assert_eq!(outcome.label, Label::Healthy);
    }

    #[test]
    fn vote_is_invariant_under_column_scaling() {
        let (table, labels) = o1_distance_table();
        let baseline = per_feature_vote(&table, &labels).unwrap();
        for f in 0..4 {
            for scale in [0.01, 3.0, 1000.0] {
                let mut scaled = table.clone();
                for row in &mut scaled.entries {
                    row[f] *= scale;
                }
                let outcome = per_feature_vote(&scaled, &labels).unwrap();
                assert_eq!(outcome.votes, baseline.votes);
                assert_eq!(outcome.label, baseline.label);
            }
        }
    }

    #[test]
    fn knn_returns_exact_match_label() {
        let gallery = vec![
            record("a", [0.9, 40.0, 0.95, 0.06], Some(Label::Sick)),
            record("b", [0.2, 10.0, 0.30, 0.01], Some(Label::Healthy)),
        ];
        let q = record("q", [0.2, 10.0, 0.30, 0.01], None);
        let out = knn_euclidean(&q, &gallery, 1, false).unwrap();
        assert_eq!(out.label, Label::Healthy);
        assert_eq!(out.neighbors[0].0, 1);
        assert_eq!(out.neighbors[0].1, 0.0);
    }

    #[test]
    fn knn_with_constructed_nearest_sick_record() {
        let gallery = vec![
            record("h1", [0.10, 12.0, 0.20, 0.010], Some(Label::Healthy)),
            record("h2", [0.15, 14.0, 0.25, 0.012], Some(Label::Healthy)),
            record("s1", [0.85, 38.0, 0.90, 0.060], Some(Label::Sick)),
            record("s2", [0.90, 42.0, 0.95, 0.070], Some(Label::Sick)),
        ];
        let q = record("q", [0.84, 38.5, 0.89, 0.058], None);
        assert_eq!(knn_euclidean(&q, &gallery, 1, false).unwrap().label, Label::Sick);
        assert_eq!(knn_euclidean(&q, &gallery, 3, false).unwrap().label, Label::Sick);
    }

    #[test]
    fn knn_rejects_oversized_k_and_zero_k() {
        let gallery = vec![record("a", [0.1, 1.0, 0.1, 0.01], Some(Label::Sick))];
        let q = record("q", [0.1, 1.0, 0.1, 0.01], None);
        assert!(matches!(
            knn_euclidean(&q, &gallery, 2, false),
            Err(Error::GalleryTooSmall { len: 1, k: 2 })
        ));
        assert!(knn_euclidean(&q, &gallery, 0, false).is_err());
    }

    #[test]
    fn knn_distance_tie_prefers_earlier_record() {
        let gallery = vec![
            record("first", [0.5, 10.0, 0.5, 0.05], Some(Label::Sick)),
            record("second", [0.5, 10.0, 0.5, 0.05], Some(Label::Healthy)),
        ];
        let q = record("q", [0.5, 10.0, 0.5, 0.05], None);
        let out = knn_euclidean(&q, &gallery, 1, false).unwrap();
        assert_eq!(out.neighbors[0].0, 0);
        assert_eq!(out.label, Label::Sick);
    }

    #[test]
    fn knn_even_label_tie_takes_single_nearest() {
        let gallery = vec![
            record("near", [0.5, 10.0, 0.5, 0.05], Some(Label::Sick)),
            record("far", [0.5, 20.0, 0.5, 0.05], Some(Label::Healthy)),
        ];
        let q = record("q", [0.5, 11.0, 0.5, 0.05], None);
        let out = knn_euclidean(&q, &gallery, 2, false).unwrap();
        assert_eq!(out.label, Label::Sick);
    }

    #[test]
    fn knn_normalization_rebalances_dominant_feature() {
        // Raw distances are dominated by std_raw; normalization lets the
        // other three features decide.
        let gallery = vec![
            record("s", [0.90, 45.0, 0.90, 0.060], Some(Label::Sick)),
            record("h", [0.10, 31.5, 0.10, 0.010], Some(Label::Healthy)),
        ];
        let q = record("q", [0.88, 31.0, 0.92, 0.055], None);
        assert_eq!(knn_euclidean(&q, &gallery, 1, false).unwrap().label, Label::Healthy);
        assert_eq!(knn_euclidean(&q, &gallery, 1, true).unwrap().label, Label::Sick);
    }

    #[test]
    fn knn_requires_labeled_gallery() {
        let gallery = vec![record("a", [0.1, 1.0, 0.1, 0.01], None)];
        let q = record("q", [0.1, 1.0, 0.1, 0.01], None);
        assert!(matches!(
            knn_euclidean(&q, &gallery, 1, false),
            Err(Error::UnlabeledGallery { .. })
        ));
    }

    fn four_subdescriptor_records() -> Vec<PatientRecord> {
        vec![
            record("O_1", [0.95, 40.0, 0.96, 0.060], Some(Label::Sick)),
            record("O_2", [0.90, 38.0, 0.92, 0.055], Some(Label::Sick)),
            record("O_3", [0.15, 10.0, 0.20, 0.010], Some(Label::Healthy)),
            record("O_4", [0.20, 12.0, 0.25, 0.012], Some(Label::Healthy)),
        ]
    }

    #[test]
    fn batch_leave_one_out_reproduces_expected_labels() {
        let recs = four_subdescriptor_records();
        for method in [ClassifyMethod::Vote, ClassifyMethod::Knn { k: 1, normalize: false }] {
            let report = classify_batch(&recs, &recs, method).unwrap();
            assert!(report.duplicates.is_empty());
            let by_id = |id: &str| -> Label {
                report
                    .entries
                    .iter()
                    .find(|e| e.id == id)
                    .unwrap()
                    .outcome
                    .as_ref()
                    .unwrap()
                    .label
            };
            assert_eq!(by_id("O_1"), Label::Sick);
            assert_eq!(by_id("O_3"), Label::Healthy);
        }
    }

    #[test]
    fn empty_record_list_gives_empty_report() {
        let gallery = four_subdescriptor_records();
        let report = classify_batch(&[], &gallery, ClassifyMethod::Vote).unwrap();
        assert!(report.entries.is_empty());
        assert!(report.duplicates.is_empty());
    }

    #[test]
    fn duplicate_ids_are_flagged() {
        let gallery = four_subdescriptor_records();
        let mut recs = gallery.clone();
        recs.push(recs[0].clone());
        let report = classify_batch(&recs, &gallery, ClassifyMethod::Vote).unwrap();
        assert_eq!(report.duplicates, vec!["O_1".to_string()]);
    }

    #[test]
    fn batch_report_is_invariant_under_gallery_order() {
        let gallery = four_subdescriptor_records();
        let mut reversed = gallery.clone();
        reversed.reverse();
        let recs = gallery.clone();
        for method in [ClassifyMethod::Vote, ClassifyMethod::Knn { k: 1, normalize: false }] {
            let a = classify_batch(&recs, &gallery, method).unwrap();
            let b = classify_batch(&recs, &reversed, method).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.render(), b.render());
        }
    }

    #[test]
    fn batch_collects_per_record_errors() {
        // A gallery holding only the record itself leaves nothing to
        // compare against after the id exclusion.
        let only = vec![record("solo", [0.5, 10.0, 0.5, 0.05], Some(Label::Sick))];
        let report = classify_batch(&only, &only, ClassifyMethod::Vote).unwrap();
        assert!(report.entries[0].outcome.is_err());
        let text = report.render();
        assert!(text.contains("record solo: error:"), "{text}");
    }

    #[test]
    fn unlabeled_gallery_is_fatal_for_batches() {
        let gallery = vec![record("a", [0.5, 10.0, 0.5, 0.05], None)];
        let recs = vec![record("q", [0.5, 10.0, 0.5, 0.05], None)];
        assert!(matches!(
            classify_batch(&recs, &gallery, ClassifyMethod::Vote),
            Err(Error::UnlabeledGallery { .. })
        ));
        assert!(matches!(
            classify_batch(&recs, &[], ClassifyMethod::Vote),
            Err(Error::EmptyGallery)
        ));
    }

    #[test]
    fn records_text_round_trips() {
        let records = four_subdescriptor_records();
        let text = format_records(&records);
        assert!(text.starts_with(RECORDS_HEADER));
        let parsed = parse_records(&text).unwrap();
        assert_eq!(parsed.len(), 4);
        assert_eq!(parsed[0].id, "O_1");
        assert_eq!(parsed[0].label, Some(Label::Sick));
        assert!((parsed[0].features.mean_norm - 0.95).abs() < 1e-9);
    }

    #[test]
    fn records_with_empty_label_parse_as_queries() {
        let text = format!("{}\nq_1,0.500000,10.000000,0.600000,0.050000,\n", RECORDS_HEADER);
        let parsed = parse_records(&text).unwrap();
        assert_eq!(parsed[0].label, None);
    }

    #[test]
    fn malformed_records_are_rejected_with_positions() {
        let bad_header = "id,mean,std\nx,1,2\n";
        assert!(matches!(parse_records(bad_header), Err(Error::Parse { .. })));
        let ragged = format!("{}\na,0.1,2.0,0.3\n", RECORDS_HEADER);
        assert!(matches!(parse_records(&ragged), Err(Error::RaggedRows { .. })));
        let non_numeric = format!("{}\na,0.1,warm,0.3,0.01,sick\n", RECORDS_HEADER);
        assert!(matches!(parse_records(&non_numeric), Err(Error::NonNumericCell { .. })));
        let bad_label = format!("{}\na,0.1,2.0,0.3,0.01,ill\n", RECORDS_HEADER);
        assert!(matches!(parse_records(&bad_label), Err(Error::Parse { .. })));
        let out_of_range = format!("{}\na,1.5,2.0,0.3,0.01,sick\n", RECORDS_HEADER);
        assert!(matches!(parse_records(&out_of_range), Err(Error::InvalidParams { .. })));
    }

    proptest! {
        #[test]
        fn knn_exact_vector_in_gallery_wins_with_k1(
            f in [
                (0.0f64..1.0, 0.0f64..100.0, 0.0f64..1.0, 0.0f64..1.0),
                (0.0f64..1.0, 0.0f64..100.0, 0.0f64..1.0, 0.0f64..1.0),
                (0.0f64..1.0, 0.0f64..100.0, 0.0f64..1.0, 0.0f64..1.0),
            ],
        ) {
            let as_vec = |t: &(f64, f64, f64, f64)| [t.0, t.1, t.2, t.3];
            let gallery = vec![
                record("g0", as_vec(&f[0]), Some(Label::Healthy)),
                record("g1", as_vec(&f[1]), Some(Label::Sick)),
                record("g2", as_vec(&f[2]), Some(Label::Healthy)),
            ];
            let q = record("q", as_vec(&f[1]), None);
            let out = knn_euclidean(&q, &gallery, 1, false).unwrap();
            // g1 holds the query's exact vector; a different record can win
            // only by holding the same vector at an earlier index.
            let winner = out.neighbors[0].0;
            prop_assert!(out.neighbors[0].1 == 0.0);
            prop_assert!(winner == 1 || gallery[winner].features == gallery[1].features);
        }
    }
}
