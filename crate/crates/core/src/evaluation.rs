//! Confusion counts, accuracy / detection rate / false-alarm rate, ROC and AUC.
//!
//! All three rates are percentages. The false-alarm rate divides false
//! accident reports by the total number of cases, not by the number of
//! negatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    fn require_cases(&self, metric: &str) -> Result<f64> {
        match self.total() {
            0 => Err(Error::invalid(format!(
                "{metric}: confusion matrix is empty"
            ))),
            n => Ok(n as f64),
        }
    }

    /// True reports over all cases, ×100.
    pub fn accuracy(&self) -> Result<f64> {
        let n = self.require_cases("accuracy")?;
        Ok((self.tp + self.tn) as f64 / n * 100.0)
    }

    /// True accident reports over all accidents, ×100.
    pub fn detection_rate(&self) -> Result<f64> {
        let accidents = self.tp + self.fn_;
        if accidents == 0 {
            return Err(Error::invalid("detection rate: no accidents in the data"));
        }
        Ok(self.tp as f64 / accidents as f64 * 100.0)
    }

    /// False accident reports over all cases, ×100.
    pub fn false_alarm_rate(&self) -> Result<f64> {
        let n = self.require_cases("false alarm rate")?;
        Ok(self.fp as f64 / n * 100.0)
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    cm.accuracy()
}

pub fn detection_rate(cm: &ConfusionMatrix) -> Result<f64> {
    cm.detection_rate()
}

pub fn false_alarm_rate(cm: &ConfusionMatrix) -> Result<f64> {
    cm.false_alarm_rate()
}

fn check_labels(labels: &[u8]) -> Result<()> {
    match labels.iter().position(|&l| l > 1) {
        Some(i) => Err(Error::invalid(format!(
            "label at {i} is {} (must be 0 or 1)",
            labels[i]
        ))),
        None => Ok(()),
    }
}

/// Count outcomes with accident (1) as the positive class.
pub fn confusion(predictions: &[u8], labels: &[u8]) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::shape(
            "confusion",
            format!("{} predictions", predictions.len()),
            format!("{} labels", labels.len()),
        ));
    }
    if labels.is_empty() {
        return Err(Error::invalid("confusion: no samples"));
    }
    check_labels(labels)?;
    check_labels(predictions)?;
    let mut cm = ConfusionMatrix::default();
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (1, 1) => cm.tp += 1,
            (1, 0) => cm.fp += 1,
            (0, 1) => cm.fn_ += 1,
            _ => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// Decisions `score >= threshold`.
pub fn apply_threshold(scores: &[f64], threshold: f64) -> Vec<u8> {
    scores.iter().map(|&s| u8::from(s >= threshold)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub false_positive_rate: f64,
    pub true_positive_rate: f64,
    pub threshold: f64,
}

/// ROC points for the rule `score >= threshold`, one per distinct score
/// (descending), preceded by `(0, 0)` at threshold `+∞`.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<RocPoint>> {
    if scores.len() != labels.len() {
        return Err(Error::shape(
            "roc_curve",
            format!("{} scores", scores.len()),
            format!("{} labels", labels.len()),
        ));
    }
    check_labels(labels)?;
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::invalid(format!(
            "roc_curve: score {i} is not finite"
        )));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::invalid("roc_curve needs both classes in the labels"));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        false_positive_rate: 0.0,
        true_positive_rate: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            false_positive_rate: fp as f64 / neg as f64,
            true_positive_rate: tp as f64 / pos as f64,
            threshold: s,
        });
    }
    Ok(points)
}

/// Trapezoidal area under a ROC curve ordered by non-decreasing FPR.
pub fn auc(roc: &[RocPoint]) -> Result<f64> {
    if roc.len() < 2 {
        return Err(Error::invalid(format!(
            "auc needs at least 2 ROC points, got {}",
            roc.len()
        )));
    }
    let mut area = 0.0;
    for w in roc.windows(2) {
        let dx = w[1].false_positive_rate - w[0].false_positive_rate;
        if dx < 0.0 {
            return Err(Error::invalid(
                "ROC points are not ordered by false positive rate",
            ));
        }
        area += dx * (w[0].true_positive_rate + w[1].true_positive_rate) / 2.0;
    }
    Ok(area)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub detection_rate: f64,
    pub false_alarm_rate: f64,
}

/// 0.01, 0.02, …, 0.99
pub fn default_threshold_grid() -> Vec<f64> {
    (1..100).map(|i| i as f64 / 100.0).collect()
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid("threshold grid is empty"));
    }
    if grid.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
        return Err(Error::invalid("threshold grid values must lie in (0,1)"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("threshold grid must be strictly increasing"));
    }
    Ok(())
}

/// Evaluate every grid threshold and pick the one maximizing
/// `detection_rate − false_alarm_rate` (first, i.e. lowest, on ties).
pub fn threshold_sweep(
    scores: &[f64],
    labels: &[u8],
    grid: &[f64],
) -> Result<(f64, Vec<SweepRow>)> {
    validate_grid(grid)?;
    let mut rows = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &t in grid {
        let cm = confusion(&apply_threshold(scores, t), labels)?;
        let dr = cm
            .detection_rate()
            .map_err(|e| Error::invalid(format!("threshold sweep at {t}: {e}")))?;
        let far = cm.false_alarm_rate()?;
        let objective = dr - far;
        if best.is_none_or(|(_, b)| objective > b) {
            best = Some((t, objective));
        }
        rows.push(SweepRow {
            threshold: t,
            confusion: cm,
            accuracy: cm.accuracy()?,
            detection_rate: dr,
            false_alarm_rate: far,
        });
    }
    Ok((best.expect("non-empty grid").0, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub threshold: f64,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub detection_rate: f64,
    pub false_alarm_rate: f64,
    pub auc: f64,
    pub roc: Vec<RocPoint>,
}

impl EvalReport {
    pub fn from_scores(scores: &[f64], labels: &[u8], threshold: f64) -> Result<Self> {
        let cm = confusion(&apply_threshold(scores, threshold), labels)?;
        let roc = roc_curve(scores, labels)?;
        Ok(EvalReport {
            threshold,
            confusion: cm,
            accuracy: cm.accuracy()?,
            detection_rate: cm.detection_rate()?,
            false_alarm_rate: cm.false_alarm_rate()?,
            auc: auc(&roc)?,
            roc,
        })
    }

    /// `metric,value` table.
    pub fn metrics_csv(&self) -> String {
        let cm = &self.confusion;
        let mut s = String::from("metric,value\n");
        for (k, v) in [
            ("threshold", self.threshold.to_string()),
            ("tp", cm.tp.to_string()),
            ("fp", cm.fp.to_string()),
            ("fn", cm.fn_.to_string()),
            ("tn", cm.tn.to_string()),
            ("accuracy", self.accuracy.to_string()),
            ("detection_rate", self.detection_rate.to_string()),
            ("false_alarm_rate", self.false_alarm_rate.to_string()),
            ("auc", self.auc.to_string()),
        ] {
            s.push_str(&format!("{k},{v}\n"));
        }
        s
    }

    /// `threshold,fpr,tpr` rows in curve order.
    pub fn roc_csv(&self) -> String {
        let mut s = String::from("threshold,fpr,tpr\n");
        for p in &self.roc {
            s.push_str(&format!(
                "{},{},{}\n",
                p.threshold, p.false_positive_rate, p.true_positive_rate
            ));
        }
        s
    }

    pub fn summary(&self) -> String {
        format!(
            "accuracy {:.1}%  detection rate {:.1}%  false alarm rate {:.1}%  AUC {:.3}",
            self.accuracy, self.detection_rate, self.false_alarm_rate, self.auc
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    /// P(score_pos > score_neg) + ½ P(tie) by exhaustive pair counting.
    fn mann_whitney(scores: &[f64], labels: &[u8]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &si) in scores.iter().enumerate() {
            for (j, &sj) in scores.iter().enumerate() {
                if labels[i] == 1 && labels[j] == 0 {
                    pairs += 1.0;
                    if si > sj {
                        wins += 1.0;
                    } else if si == sj {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn confusion_cells() {
        assert_eq!(
            confusion(&[1, 1, 1], &[1, 1, 1]).unwrap(),
            ConfusionMatrix::new(3, 0, 0, 0)
        );
        assert_eq!(
            confusion(&[1, 0, 1, 0], &[1, 1, 0, 0]).unwrap(),
            ConfusionMatrix::new(1, 1, 1, 1)
        );
        assert!(confusion(&[], &[]).is_err());
        assert!(confusion(&[1], &[1, 0]).is_err());
        assert!(confusion(&[2], &[1]).is_err());
    }

    #[test]
    fn reported_lstm_and_gru_metrics() {
        let lstm = ConfusionMatrix::new(62, 66, 22, 2048);
        assert!((accuracy(&lstm).unwrap() - 96.0).abs() < 0.05);
        assert!((detection_rate(&lstm).unwrap() - 73.8).abs() < 0.05);
        assert!((false_alarm_rate(&lstm).unwrap() - 3.0).abs() < 0.05);
        let gru = ConfusionMatrix::new(63, 70, 21, 2044);
        assert!((accuracy(&gru).unwrap() - 95.9).abs() < 0.05);
        assert!((detection_rate(&gru).unwrap() - 75.0).abs() < 0.05);
        assert!((false_alarm_rate(&gru).unwrap() - 3.2).abs() < 0.05);
    }

    #[test]
    fn metric_edge_cases() {
        assert_eq!(accuracy(&ConfusionMatrix::new(1, 0, 0, 1)).unwrap(), 100.0);
        assert_eq!(
            detection_rate(&ConfusionMatrix::new(0, 3, 5, 1)).unwrap(),
            0.0
        );
        assert_eq!(
            false_alarm_rate(&ConfusionMatrix::new(2, 0, 1, 4)).unwrap(),
            0.0
        );
        assert!(accuracy(&ConfusionMatrix::default()).is_err());
        assert!(false_alarm_rate(&ConfusionMatrix::default()).is_err());
        assert!(detection_rate(&ConfusionMatrix::new(0, 1, 0, 1)).is_err());
    }

    #[test]
    fn roc_hand_example() {
        let roc = roc_curve(&[0.9, 0.6, 0.4, 0.2], &[1, 0, 1, 0]).unwrap();
        let pts: Vec<(f64, f64)> = roc
            .iter()
            .map(|p| (p.false_positive_rate, p.true_positive_rate))
            .collect();
        assert_eq!(
            pts,
            vec![(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0)]
        );
        assert_eq!(auc(&roc).unwrap(), 0.75);
    }

    #[test]
    fn roc_perfect_and_tied() {
        let roc = roc_curve(&[0.9, 0.8, 0.1, 0.2], &[1, 1, 0, 0]).unwrap();
        assert!(roc
            .iter()
            .any(|p| p.false_positive_rate == 0.0 && p.true_positive_rate == 1.0));
        assert_eq!(auc(&roc).unwrap(), 1.0);

        let roc = roc_curve(&[0.3; 4], &[1, 0, 1, 0]).unwrap();
        assert_eq!(roc.len(), 2);
        assert_eq!(roc[1].threshold, 0.3);
        assert_eq!(
            (roc[1].false_positive_rate, roc[1].true_positive_rate),
            (1.0, 1.0)
        );
        assert_eq!(auc(&roc).unwrap(), 0.5);
    }

    #[test]
    fn roc_errors() {
        assert!(roc_curve(&[0.1, 0.2], &[1, 1]).is_err());
        assert!(roc_curve(&[0.1], &[1, 0]).is_err());
        assert!(roc_curve(&[f64::NAN, 0.2], &[1, 0]).is_err());
        assert!(auc(&[]).is_err());
    }

    #[test]
    fn sweep_separated_scores_picks_lowest_best() {
        let scores = [0.95, 0.8, 0.85, 0.2, 0.15, 0.05];
        let labels = [1, 1, 1, 0, 0, 0];
        let grid: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
        let (best, table) = threshold_sweep(&scores, &labels, &grid).unwrap();
        assert_eq!(best, 0.3);
        assert_eq!(table.len(), 9);
        for row in &table[2..8] {
            assert_eq!((row.detection_rate, row.false_alarm_rate), (100.0, 0.0));
        }
    }

    #[test]
    fn sweep_edge_cases() {
        assert!(threshold_sweep(&[0.1], &[1], &[]).is_err());
        let err = threshold_sweep(&[0.1, 0.2], &[0, 0], &[0.5]).unwrap_err();
        assert!(err.to_string().contains("detection rate"), "{err}");
        assert_eq!(
            threshold_sweep(&[0.1, 0.7], &[0, 1], &[0.42]).unwrap().0,
            0.42
        );
        assert!(threshold_sweep(&[0.1], &[1], &[0.5, 0.4]).is_err());
        assert!(threshold_sweep(&[0.1], &[1], &[1.0]).is_err());
    }

    #[test]
    fn default_grid() {
        let g = default_threshold_grid();
        assert_eq!(g.len(), 99);
        assert_eq!((g[0], g[98]), (0.01, 0.99));
        validate_grid(&g).unwrap();
    }

    #[test]
    fn report_csv_shapes() {
        let r = EvalReport::from_scores(&[0.9, 0.6, 0.4, 0.2], &[1, 0, 1, 0], 0.5).unwrap();
        assert_eq!(r.confusion, ConfusionMatrix::new(1, 1, 1, 1));
        let roc = r.roc_csv();
        assert!(
            roc.starts_with("threshold,fpr,tpr\ninf,0,0\n0.9,0,0.5\n"),
            "{roc}"
        );
        assert!(r.metrics_csv().contains("\nauc,0.75\n"));
    }

    #[test]
    fn auc_matches_pair_counting_randomized() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(2..=200);
            // coarse scores force plenty of ties
            let levels = rng.random_range(2..20);
            let scores: Vec<f64> = (0..n)
                .map(|_| rng.random_range(0..levels) as f64 / levels as f64)
                .collect();
            let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
            labels[0] = 0;
            labels[1] = 1;
            let a = auc(&roc_curve(&scores, &labels).unwrap()).unwrap();
            assert!((a - mann_whitney(&scores, &labels)).abs() <= 1e-12);
        }
    }

    proptest! {
        #[test]
        fn accuracy_complements_error_share(tp in 0u64..500, fp in 0u64..500, fn_ in 0u64..500, tn in 1u64..500) {
            let cm = ConfusionMatrix::new(tp, fp, fn_, tn);
            let err = (fp + fn_) as f64 / cm.total() as f64 * 100.0;
            prop_assert!((cm.accuracy().unwrap() + err - 100.0).abs() < 1e-9);
            prop_assert!(cm.false_alarm_rate().unwrap() <= 100.0 * (fp + tn) as f64 / cm.total() as f64 + 1e-12);
        }

        #[test]
        fn roc_invariant_under_monotone_transform(
            scores in prop::collection::vec(0.0..1.0f64, 4..60),
            labels in prop::collection::vec(0u8..2, 4..60),
        ) {
            let n = scores.len().min(labels.len());
            let (scores, mut labels) = (scores[..n].to_vec(), labels[..n].to_vec());
            labels[0] = 0;
            labels[1] = 1;
            let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
            let a = roc_curve(&scores, &labels).unwrap();
            let b = roc_curve(&transformed, &labels).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (p, q) in a.iter().zip(&b) {
                prop_assert_eq!(p.false_positive_rate, q.false_positive_rate);
                prop_assert_eq!(p.true_positive_rate, q.true_positive_rate);
            }
        }

        #[test]
        fn roc_is_monotone(
            scores in prop::collection::vec(0.0..1.0f64, 2..80),
            labels in prop::collection::vec(0u8..2, 2..80),
        ) {
            let n = scores.len().min(labels.len());
            let (scores, mut labels) = (scores[..n].to_vec(), labels[..n].to_vec());
            labels[0] = 0;
            labels[1] = 1;
            let roc = roc_curve(&scores, &labels).unwrap();
            for w in roc.windows(2) {
                prop_assert!(w[1].false_positive_rate >= w[0].false_positive_rate);
                prop_assert!(w[1].true_positive_rate >= w[0].true_positive_rate);
                prop_assert!(w[1].threshold < w[0].threshold);
            }
            let last = roc.last().unwrap();
            prop_assert_eq!((last.false_positive_rate, last.true_positive_rate), (1.0, 1.0));
        }
    }
}
