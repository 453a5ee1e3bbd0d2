//! Score evaluation: detection curves, precision–recall curves, AUPR, and
//! degree sweeps.
//!
//! Both curve families sweep a threshold over the observed scores in
//! descending order with *group-threshold* semantics: all rows with equal
//! scores cross the threshold together. That makes every statistic here a
//! function of the score ordering alone — permuting tied rows or applying a
//! strictly increasing transform to all scores changes nothing, bit for bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::LabeledDataset;
use crate::model::{ChristoffelModel, FitOptions};

/// Scores paired with ground-truth anomaly labels (`true` = positive).
#[derive(Clone, Debug)]
pub struct ScoredDataset {
    scores: Vec<f64>,
    labels: Vec<bool>,
}

impl ScoredDataset {
    /// Validates lengths and finiteness.
    pub fn new(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::LabelMismatch {
                scores: scores.len(),
                labels: labels.len(),
            });
        }
        for (index, &value) in scores.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index, value });
            }
        }
        Ok(ScoredDataset { scores, labels })
    }

    /// Scores every point of `data` with `model` and pairs the scores with
    /// the dataset's labels.
    pub fn from_model(model: &ChristoffelModel, data: &LabeledDataset) -> Result<Self> {
        let scores = model.score_batch(data.points())?;
        ScoredDataset::new(scores, data.labels().to_vec())
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Number of positive labels.
    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }
}

/// Which sweep a [`CurvePoints`] came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurveKind {
    /// x = fraction of all rows flagged, y = recall.
    Detection,
    /// x = recall, y = precision.
    PrecisionRecall,
}

/// A monotone-in-x list of curve points with both coordinates in [0, 1].
#[derive(Clone, Debug)]
pub struct CurvePoints {
    kind: CurveKind,
    points: Vec<(f64, f64)>,
}

impl CurvePoints {
    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Writes the curve as CSV with an `x,y` header; floats are in
    /// shortest round-trip form.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "x,y")?;
        for (x, y) in &self.points {
            writeln!(out, "{x},{y}")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// One threshold group of the descending sweep: cumulative counts after
/// the group's rows (all sharing one score) cross the threshold.
struct ThresholdGroup {
    /// Rows flagged so far.
    flagged: usize,
    /// True positives flagged so far.
    true_positives: usize,
    /// True positives contributed by this group alone.
    new_true_positives: usize,
}

/// Sweeps a threshold down over the distinct scores, grouping ties, and
/// reports cumulative counts after each group. Errors if there is no
/// positive label to measure recall against.
fn threshold_groups(sd: &ScoredDataset) -> Result<(Vec<ThresholdGroup>, usize)> {
    let k = sd.positives();
    if k == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..sd.len()).collect();
    order.sort_by(|&i, &j| {
        sd.scores[j]
            .partial_cmp(&sd.scores[i])
            .expect("scores were validated finite")
    });

    let mut groups = Vec::new();
    let mut flagged = 0;
    let mut true_positives = 0;
    let mut at = 0;
    while at < order.len() {
        let score = sd.scores[order[at]];
        let mut new_true_positives = 0;
        let mut size = 0;
        while at + size < order.len() && sd.scores[order[at + size]] == score {
            if sd.labels[order[at + size]] {
                new_true_positives += 1;
            }
            size += 1;
        }
        flagged += size;
        true_positives += new_true_positives;
        groups.push(ThresholdGroup {
            flagged,
            true_positives,
            new_true_positives,
        });
        at += size;
    }
    Ok((groups, k))
}

/// Detection curve: for each threshold, the fraction of all rows scoring
/// above it (x) against the fraction of positives scoring above it (y,
/// recall). Includes the endpoints (0, 0) and (1, 1).
pub fn detection_curve(sd: &ScoredDataset) -> Result<CurvePoints> {
    let (groups, k) = threshold_groups(sd)?;
    let n = sd.len() as f64;
    let k = k as f64;
    let mut points = Vec::with_capacity(groups.len() + 1);
    points.push((0.0, 0.0));
    for g in &groups {
        points.push((g.flagged as f64 / n, g.true_positives as f64 / k));
    }
    Ok(CurvePoints {
        kind: CurveKind::Detection,
        points,
    })
}

/// Precision–recall curve: after each threshold group, x = recall and
/// y = precision among the flagged rows.
pub fn pr_curve(sd: &ScoredDataset) -> Result<CurvePoints> {
    let (groups, k) = threshold_groups(sd)?;
    let k = k as f64;
    let points = groups
        .iter()
        .map(|g| {
            (
                g.true_positives as f64 / k,
                g.true_positives as f64 / g.flagged as f64,
            )
        })
        .collect();
    Ok(CurvePoints {
        kind: CurveKind::PrecisionRecall,
        points,
    })
}

/// Area under the precision–recall curve by the step integral over
/// achieved recall levels: each threshold group contributes its recall
/// increment times the precision at that group. Avoids the linear
/// PR-interpolation pitfall; a perfect ranking scores exactly 1.
pub fn aupr(sd: &ScoredDataset) -> Result<f64> {
    let (groups, k) = threshold_groups(sd)?;
    let mut area = 0.0;
    for g in &groups {
        if g.new_true_positives > 0 {
            let precision = g.true_positives as f64 / g.flagged as f64;
            area += g.new_true_positives as f64 * precision;
        }
    }
    Ok(area / k as f64)
}

/// One row of a degree sweep: the model degree and either its AUPR or the
/// stringified fit/score failure.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub degree: usize,
    pub outcome: std::result::Result<f64, String>,
}

/// Fits one model per degree on the full dataset (labels play no role in
/// fitting), scores the same points, and reports AUPR per degree.
///
/// Rows come back sorted by degree with duplicates removed. A degenerate
/// fit at one degree (say, fewer points than basis functions) is reported
/// in its row and does not abort the sweep.
pub fn sweep_degree(
    data: &LabeledDataset,
    degrees: &[usize],
    opts: &FitOptions,
) -> Result<Vec<SweepPoint>> {
    if data.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if data.positives() == 0 {
        return Err(Error::NoPositives);
    }
    let mut sorted: Vec<usize> = degrees.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    let rows = sorted
        .into_iter()
        .map(|degree| {
            let outcome = ChristoffelModel::fit_points(data.points(), degree, opts)
                .and_then(|model| ScoredDataset::from_model(&model, data))
                .and_then(|sd| aupr(&sd))
                .map_err(|e| e.to_string());
            SweepPoint { degree, outcome }
        })
        .collect();
    Ok(rows)
}

/// Writes sweep rows as CSV with a `d,aupr` header. Failed rows are
/// skipped in the file (they carry no number); callers that want the
/// failure text can read it off the returned rows.
pub fn write_sweep_csv<P: AsRef<Path>>(path: P, rows: &[SweepPoint]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "d,aupr")?;
    for row in rows {
        if let Ok(value) = row.outcome {
            writeln!(out, "{},{value}", row.degree)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{synth_cloud, SynthSpec};

    fn sd(scores: &[f64], labels: &[bool]) -> ScoredDataset {
        ScoredDataset::new(scores.to_vec(), labels.to_vec()).unwrap()
    }

    #[test]
    fn construction_validates_inputs() {
        assert!(matches!(
            ScoredDataset::new(vec![1.0], vec![]),
            Err(Error::LabelMismatch { scores: 1, labels: 0 })
        ));
        assert!(matches!(
            ScoredDataset::new(vec![f64::NAN], vec![true]),
            Err(Error::NonFinite { index: 0, .. })
        ));
    }

    #[test]
    fn detection_curve_matches_the_hand_enumeration() {
        let curve = detection_curve(&sd(&[3.0, 2.0, 1.0], &[true, false, false])).unwrap();
        let expected = [
            (0.0, 0.0),
            (1.0 / 3.0, 1.0), // flagging only the top row catches the one outlier
            (2.0 / 3.0, 1.0),
            (1.0, 1.0),
        ];
        assert_eq!(curve.points(), &expected);
        assert_eq!(curve.kind(), CurveKind::Detection);
    }

    #[test]
    fn all_positive_labels_give_the_diagonal() {
        let curve = detection_curve(&sd(&[5.0, 4.0, 2.0, 1.0], &[true; 4])).unwrap();
        for &(x, y) in curve.points() {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn perfect_separation_reaches_full_recall_at_the_positive_fraction() {
        // Three positives scored above five negatives.
        let scores = [9.0, 8.0, 7.0, 5.0, 4.0, 3.0, 2.0, 1.0];
        let labels = [true, true, true, false, false, false, false, false];
        let curve = detection_curve(&sd(&scores, &labels)).unwrap();
        assert!(curve.points().contains(&(3.0 / 8.0, 1.0)));
        let area = aupr(&sd(&scores, &labels)).unwrap();
        assert_eq!(area, 1.0, "a perfect ranking has AUPR exactly one");
    }

    #[test]
    fn detection_curve_is_monotone_with_unit_endpoints() {
        // Deterministic pseudo-random scores with ties and mixed labels.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for i in 0..200 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            scores.push(((state >> 40) % 37) as f64);
            labels.push(i % 7 == 0);
        }
        let curve = detection_curve(&sd(&scores, &labels)).unwrap();
        let pts = curve.points();
        assert_eq!(pts.first(), Some(&(0.0, 0.0)));
        assert_eq!(pts.last(), Some(&(1.0, 1.0)));
        for w in pts.windows(2) {
            assert!(w[1].0 > w[0].0, "x strictly increases across groups");
            assert!(w[1].1 >= w[0].1, "recall never decreases");
        }
        for &(x, y) in pts {
            assert!((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y));
        }
    }

    #[test]
    fn aupr_matches_the_hand_worked_example() {
        // Recall steps at precision 1 (first row) and 2/3 (third row).
        let area = aupr(&sd(&[3.0, 2.0, 1.0], &[true, false, true])).unwrap();
        assert_eq!(area, (1.0 + 2.0 / 3.0) / 2.0);
        assert!((area - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn inverted_ranking_with_one_positive_scores_one_over_n() {
        let scores = [8.0, 7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0];
        let mut labels = [false; 8];
        labels[7] = true; // the only positive gets the worst score
        let area = aupr(&sd(&scores, &labels)).unwrap();
        assert_eq!(area, 1.0 / 8.0);
    }

    #[test]
    fn tied_scores_cross_the_threshold_together() {
        let a = sd(&[2.0, 2.0, 1.0], &[true, false, false]);
        let b = sd(&[2.0, 2.0, 1.0], &[false, true, false]); // tied rows swapped
        assert_eq!(aupr(&a).unwrap(), 0.5, "the tied pair is flagged as one group");
        assert_eq!(aupr(&a).unwrap().to_bits(), aupr(&b).unwrap().to_bits());
        assert_eq!(detection_curve(&a).unwrap().points(), detection_curve(&b).unwrap().points());
        assert_eq!(pr_curve(&a).unwrap().points(), pr_curve(&b).unwrap().points());
    }

    #[test]
    fn all_scores_equal_collapse_to_a_single_group() {
        let data = sd(&[4.0; 6], &[true, true, false, false, false, false]);
        let curve = detection_curve(&data).unwrap();
        assert_eq!(curve.points(), &[(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(aupr(&data).unwrap(), 2.0 / 6.0, "precision of the only group");
    }

    #[test]
    fn strictly_increasing_transforms_leave_everything_bitwise_unchanged() {
        let mut state = 42u64;
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for i in 0..300 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            // Small integer grid forces plenty of exact ties.
            scores.push(1.0 + ((state >> 33) % 23) as f64 / 4.0);
            labels.push(i % 11 == 0);
        }
        let base = sd(&scores, &labels);
        let transforms: [&dyn Fn(f64) -> f64; 3] = [
            &|s| s.ln(),            // scores here are ≥ 1
            &|s| 3.0 * s - 7.0,
            &|s| s * s * s,
        ];
        for f in transforms {
            let mapped = sd(&scores.iter().map(|&s| f(s)).collect::<Vec<_>>(), &labels);
            assert_eq!(
                aupr(&base).unwrap().to_bits(),
                aupr(&mapped).unwrap().to_bits()
            );
            assert_eq!(
                detection_curve(&base).unwrap().points(),
                detection_curve(&mapped).unwrap().points()
            );
            assert_eq!(
                pr_curve(&base).unwrap().points(),
                pr_curve(&mapped).unwrap().points()
            );
        }
    }

    #[test]
    fn no_positive_labels_is_an_error() {
        let data = sd(&[1.0, 2.0], &[false, false]);
        assert!(matches!(detection_curve(&data), Err(Error::NoPositives)));
        assert!(matches!(pr_curve(&data), Err(Error::NoPositives)));
        assert!(matches!(aupr(&data), Err(Error::NoPositives)));
    }

    #[test]
    fn degree_sweep_reports_rows_in_degree_order() {
        let data = synth_cloud(
            &SynthSpec::RingWithBackground { n_ring: 200, n_background: 20 },
            11,
        )
        .unwrap();
        let rows = sweep_degree(&data, &[3, 1, 2, 3], &FitOptions::default()).unwrap();
        let degrees: Vec<usize> = rows.iter().map(|r| r.degree).collect();
        assert_eq!(degrees, [1, 2, 3], "sorted and deduplicated");
        for row in &rows {
            let value = row.outcome.as_ref().expect("these fits are well-posed");
            assert!((0.0..=1.0).contains(value));
        }
    }

    #[test]
    fn degree_sweep_survives_a_degenerate_row() {
        // Ten points cannot support the 21-dimensional degree-5 basis.
        let data = synth_cloud(
            &SynthSpec::RingWithBackground { n_ring: 8, n_background: 2 },
            5,
        )
        .unwrap();
        let rows = sweep_degree(&data, &[1, 5], &FitOptions::default()).unwrap();
        assert!(rows[0].outcome.is_ok(), "degree 1 is fine on ten points");
        let message = rows[1].outcome.as_ref().unwrap_err();
        assert!(
            message.contains("pivot"),
            "the degenerate row carries the factorization diagnosis, got: {message}"
        );
    }

    #[test]
    fn degree_sweep_validates_the_dataset() {
        let unlabeled = synth_cloud(&SynthSpec::TwoGaussians { n: 30 }, 1).unwrap();
        assert!(matches!(
            sweep_degree(&unlabeled, &[1], &FitOptions::default()),
            Err(Error::NoPositives)
        ));
    }

    #[test]
    fn curve_and_sweep_csv_files_have_the_documented_shape() {
        let dir = tempfile::tempdir().unwrap();
        let curve_path = dir.path().join("curve.csv");
        let curve = detection_curve(&sd(&[3.0, 2.0, 1.0], &[true, false, false])).unwrap();
        curve.write_csv(&curve_path).unwrap();
        let text = std::fs::read_to_string(&curve_path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,y");
        assert_eq!(lines.len(), 1 + curve.len());
        assert_eq!(lines[1], "0,0");
        let x: f64 = lines[2].split(',').next().unwrap().parse().unwrap();
        assert_eq!(x, 1.0 / 3.0, "shortest round-trip floats reparse exactly");

        let sweep_path = dir.path().join("sweep.csv");
        let rows = vec![
            SweepPoint { degree: 1, outcome: Ok(0.25) },
            SweepPoint { degree: 2, outcome: Err("boom".to_string()) },
            SweepPoint { degree: 3, outcome: Ok(0.75) },
        ];
        write_sweep_csv(&sweep_path, &rows).unwrap();
        let text = std::fs::read_to_string(&sweep_path).unwrap();
        assert_eq!(text, "d,aupr\n1,0.25\n3,0.75\n", "failed rows are omitted");
    }
}
