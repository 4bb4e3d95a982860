//! Model evaluation: ROC curves with trapezoidal AUC, Youden threshold
//! selection, and cumulative gain curves with capture-at-fraction
//! readouts.

use std::path::Path;

use crate::error::{Error, Result};

/// One point of the ROC sweep. The curve starts at (0, 0) with an
/// infinite threshold and ends at (1, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Rows score >= threshold are predicted positive at this point.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Cumulative gain: fraction of true positives captured within the
/// top-scored fraction of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GainCurve {
    /// (sample_fraction, captured_positive_fraction) pairs from (0, 0) to
    /// (1, 1).
    pub points: Vec<(f64, f64)>,
}

fn check_inputs(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::SchemaMismatch(
            "scores and labels differ in length".into(),
        ));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("scores contain NaN".into()));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }
    Ok((positives, negatives))
}

/// Sweep the ROC curve over distinct score thresholds (tied scores
/// grouped) and integrate the AUC by the trapezoidal rule, which makes it
/// equal to the positive-outranks-negative pair statistic with ties
/// counted half.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    let (positives, negatives) = check_inputs(scores, labels)?;

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
            threshold,
        });
    }

    let mut auc = 0.0;
    for pair in points.windows(2) {
        auc += (pair[1].fpr - pair[0].fpr) * (pair[1].tpr + pair[0].tpr) / 2.0;
    }
    Ok(RocCurve { points, auc })
}

/// Threshold maximizing Youden's J = TPR - FPR, ties broken by smaller
/// FPR then smaller threshold. The synthetic (0, 0) anchor is not a
/// usable cut and is skipped.
pub fn select_threshold(curve: &RocCurve) -> f64 {
    let mut best: Option<&RocPoint> = None;
    for point in curve.points.iter().skip(1) {
        let j = point.tpr - point.fpr;
        let better = match best {
            None => true,
            Some(b) => {
                let bj = b.tpr - b.fpr;
                j > bj
                    || (j == bj
                        && (point.fpr < b.fpr
                            || (point.fpr == b.fpr && point.threshold < b.threshold)))
            }
        };
        if better {
            best = Some(point);
        }
    }
    best.map(|p| p.threshold).unwrap_or(f64::INFINITY)
}

/// Rows sorted by descending score (stable, so tied scores keep input
/// order); point k is (k/n, positives in top k / total positives).
pub fn gain_curve(scores: &[f64], labels: &[u8]) -> Result<GainCurve> {
    let (positives, _) = check_inputs(scores, labels)?;
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut points = Vec::with_capacity(n + 1);
    points.push((0.0, 0.0));
    let mut captured = 0usize;
    for (k, &i) in order.iter().enumerate() {
        captured += usize::from(labels[i] == 1);
        points.push(((k + 1) as f64 / n as f64, captured as f64 / positives as f64));
    }
    Ok(GainCurve { points })
}

/// Gain at the largest tabulated sample fraction <= `fraction` (step
/// interpolation).
pub fn capture_at(curve: &GainCurve, fraction: f64) -> f64 {
    let mut value = 0.0;
    for &(f, gain) in &curve.points {
        if f <= fraction + 1e-12 {
            value = gain;
        } else {
            break;
        }
    }
    value
}

/// Write `fpr,tpr,threshold` rows for external plotting.
pub fn write_roc_csv(curve: &RocCurve, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["fpr", "tpr", "threshold"])?;
    for p in &curve.points {
        writer.write_record([p.fpr.to_string(), p.tpr.to_string(), p.threshold.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

/// Write `fraction,gain` rows for external plotting.
pub fn write_gain_csv(curve: &GainCurve, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["fraction", "gain"])?;
    for (f, g) in &curve.points {
        writer.write_record([f.to_string(), g.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

/// Brute-force pair statistic P(s+ > s-) + 0.5 P(s+ = s-); the
/// O(n^2) oracle the sweep must agree with.
pub fn pair_statistic_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..scores.len() {
        if labels[i] != 1 {
            continue;
        }
        for j in 0..scores.len() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    Ok(wins / pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfectly_separated_scores_have_auc_one() {
        let curve = roc_auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap();
        assert_eq!(curve.auc, 1.0);
        let first = curve.points.first().unwrap();
        let last = curve.points.last().unwrap();
        assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
    }

    #[test]
    fn all_equal_scores_have_auc_half() {
        let curve = roc_auc(&[0.5, 0.5, 0.5, 0.5], &[1, 0, 1, 0]).unwrap();
        assert!((curve.auc - 0.5).abs() < 1e-15);
        // Tied scores collapse into one threshold group.
        assert_eq!(curve.points.len(), 2);
    }

    #[test]
    fn four_row_fixtures_match_the_pair_oracle() {
        let scores = [0.9, 0.4, 0.6, 0.2];
        let labels = [1, 0, 1, 0];
        let curve = roc_auc(&scores, &labels).unwrap();
        assert_eq!(curve.auc, 1.0);
        assert_eq!(pair_statistic_auc(&scores, &labels).unwrap(), 1.0);

        let scores = [0.9, 0.6, 0.4, 0.2];
        let curve = roc_auc(&scores, &labels).unwrap();
        assert_eq!(curve.auc, 0.75);
        assert_eq!(pair_statistic_auc(&scores, &labels).unwrap(), 0.75);
    }

    #[test]
    fn sweep_matches_pair_oracle_with_ties() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let n = rng.gen_range(4..120);
            // Coarse grid forces plenty of tied scores.
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..8) as f64 / 8.0).collect();
            let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2) as u8).collect();
            labels[0] = 1;
            labels[1] = 0;
            let sweep = roc_auc(&scores, &labels).unwrap().auc;
            let oracle = pair_statistic_auc(&scores, &labels).unwrap();
            assert!((sweep - oracle).abs() <= 1e-12, "{sweep} vs {oracle}");
        }
    }

    #[test]
    fn single_class_labels_error() {
        assert!(matches!(
            roc_auc(&[0.1, 0.2], &[1, 1]),
            Err(Error::SingleClass)
        ));
        assert!(matches!(
            gain_curve(&[0.1, 0.2], &[0, 0]),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn threshold_at_perfect_separation_corner() {
        let curve = roc_auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap();
        // The (0, 1) corner is reached once both positives are included.
        assert_eq!(select_threshold(&curve), 0.8);
    }

    #[test]
    fn threshold_for_degenerate_scores_is_the_single_threshold() {
        let curve = roc_auc(&[0.3, 0.3, 0.3], &[1, 0, 1]).unwrap();
        assert_eq!(select_threshold(&curve), 0.3);
    }

    #[test]
    fn threshold_tie_breaks_toward_smaller_fpr() {
        // J peaks at 0.5 for both t=0.9 (FPR 0) and t=0.4 (FPR 0.5).
        let curve = roc_auc(&[0.9, 0.6, 0.4, 0.2], &[1, 0, 1, 0]).unwrap();
        assert_eq!(select_threshold(&curve), 0.9);
    }

    #[test]
    fn gain_of_perfect_model_saturates_at_the_positive_rate() {
        // Positive rate 0.2: all positives sit in the top fifth.
        let scores = [0.99, 0.5, 0.4, 0.3, 0.2, 0.95, 0.45, 0.35, 0.25, 0.15];
        let labels = [1, 0, 0, 0, 0, 1, 0, 0, 0, 0];
        let curve = gain_curve(&scores, &labels).unwrap();
        assert_eq!(capture_at(&curve, 0.2), 1.0);
        assert_eq!(capture_at(&curve, 0.5), 1.0);
        assert_eq!(capture_at(&curve, 1.0), 1.0);
        assert_eq!(capture_at(&curve, 0.0), 0.0);
    }

    #[test]
    fn gain_of_worst_model_is_zero_at_half() {
        let scores = [0.9, 0.8, 0.7, 0.6, 0.2, 0.1];
        let labels = [0, 0, 0, 0, 1, 1];
        let curve = gain_curve(&scores, &labels).unwrap();
        assert_eq!(capture_at(&curve, 0.5), 0.0);
        assert_eq!(capture_at(&curve, 1.0), 1.0);
    }

    #[test]
    fn tied_scores_keep_input_order_in_the_gain_curve() {
        // All scores equal: the curve walks the labels in input order, so
        // the gain equals the label prefix ratio.
        let scores = [0.5; 6];
        let labels = [1, 0, 1, 0, 0, 1];
        let curve = gain_curve(&scores, &labels).unwrap();
        let expected = [
            (0.0, 0.0),
            (1.0 / 6.0, 1.0 / 3.0),
            (2.0 / 6.0, 1.0 / 3.0),
            (3.0 / 6.0, 2.0 / 3.0),
            (4.0 / 6.0, 2.0 / 3.0),
            (5.0 / 6.0, 2.0 / 3.0),
            (1.0, 1.0),
        ];
        assert_eq!(curve.points.len(), expected.len());
        for (got, want) in curve.points.iter().zip(&expected) {
            assert!((got.0 - want.0).abs() < 1e-12);
            assert!((got.1 - want.1).abs() < 1e-12);
        }
    }

    #[test]
    fn gain_curves_are_monotone_and_anchored() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = rng.gen_range(3..80);
            let scores: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2) as u8).collect();
            labels[0] = 1;
            labels[n - 1] = 0;
            let curve = gain_curve(&scores, &labels).unwrap();
            assert_eq!(curve.points[0], (0.0, 0.0));
            assert_eq!(curve.points.last().unwrap().1, 1.0);
            for pair in curve.points.windows(2) {
                assert!(pair[1].1 >= pair[0].1);
                assert!(pair[1].0 >= pair[0].0);
            }
            // capture_at is monotone in the fraction.
            let mut last = 0.0;
            for k in 0..=10 {
                let c = capture_at(&curve, k as f64 / 10.0);
                assert!(c >= last);
                last = c;
            }
        }
    }

    #[test]
    fn auc_is_invariant_under_strictly_monotone_transforms() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let n = 60;
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2) as u8).collect();
        labels[0] = 1;
        labels[1] = 0;
        let base = roc_auc(&scores, &labels).unwrap().auc;
        let exp_scores: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
        let affine_scores: Vec<f64> = scores.iter().map(|s| 3.5 * s + 11.0).collect();
        assert!((roc_auc(&exp_scores, &labels).unwrap().auc - base).abs() <= 1e-12);
        assert!((roc_auc(&affine_scores, &labels).unwrap().auc - base).abs() <= 1e-12);
    }

    #[test]
    fn sweep_auc_dominates_every_single_threshold_curve() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 50;
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..10) as f64).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2) as u8).collect();
        labels[0] = 1;
        labels[1] = 0;
        let curve = roc_auc(&scores, &labels).unwrap();
        for point in &curve.points {
            // Conservative step area of the single-threshold classifier
            // through (fpr, tpr): tpr * (1 - fpr). This is the
            // probability a positive scores >= t while a negative scores
            // < t, which can never beat the pair statistic.
            let two_point = point.tpr * (1.0 - point.fpr);
            assert!(two_point <= curve.auc + 1e-12);
        }
    }

    #[test]
    fn csv_writers_emit_well_formed_tables() {
        let dir = tempfile::tempdir().unwrap();
        let curve = roc_auc(&[0.9, 0.4, 0.6, 0.2], &[1, 0, 1, 0]).unwrap();
        let roc_path = dir.path().join("roc.csv");
        write_roc_csv(&curve, &roc_path).unwrap();
        let text = std::fs::read_to_string(&roc_path).unwrap();
        assert!(text.starts_with("fpr,tpr,threshold\n0,0,inf\n"));

        let gain = gain_curve(&[0.9, 0.4, 0.6, 0.2], &[1, 0, 1, 0]).unwrap();
        let gain_path = dir.path().join("gain.csv");
        write_gain_csv(&gain, &gain_path).unwrap();
        let text = std::fs::read_to_string(&gain_path).unwrap();
        assert!(text.starts_with("fraction,gain\n0,0\n"));
        assert!(text.trim_end().ends_with("1,1"));
    }
}
