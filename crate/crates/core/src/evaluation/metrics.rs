use serde::{Deserialize, Serialize};

use crate::sample::OutlierLabel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryClass {
    Inlier,
    Outlier,
}

/// Label 0 is an inlier; every other label is an outlier.
pub fn binarize(label: OutlierLabel) -> BinaryClass {
    if label.is_outlier() {
        BinaryClass::Outlier
    } else {
        BinaryClass::Inlier
    }
}

/// Binary confusion counts with outlier as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tp: u64,
}

impl ConfusionMatrix {
    pub fn new(tn: u64, fp: u64, fn_: u64, tp: u64) -> Self {
        ConfusionMatrix { tn, fp, fn_, tp }
    }

    /// Counts `(actual_outlier, predicted_outlier)` pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut c = ConfusionMatrix::default();
        for pair in pairs {
            c.record(pair.0, pair.1);
        }
        c
    }

    pub fn record(&mut self, actual_outlier: bool, predicted_outlier: bool) {
        match (actual_outlier, predicted_outlier) {
            (false, false) => self.tn += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (true, true) => self.tp += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tn + self.fp + self.fn_ + self.tp
    }

    pub fn merged(&self, other: &ConfusionMatrix) -> ConfusionMatrix {
        ConfusionMatrix::new(
            self.tn + other.tn,
            self.fp + other.fp,
            self.fn_ + other.fn_,
            self.tp + other.tp,
        )
    }

    pub fn mcc(&self) -> f64 {
        mcc(self)
    }

    pub fn f1(&self) -> f64 {
        f1(self)
    }
}

/// Matthews correlation coefficient; 0 when any marginal is empty.
pub fn mcc(c: &ConfusionMatrix) -> f64 {
    let (tn, fp, fn_, tp) = (c.tn as f64, c.fp as f64, c.fn_ as f64, c.tp as f64);
    let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if denom == 0.0 {
        return 0.0;
    }
    (tp * tn - fp * fn_) / denom.sqrt()
}

/// F1 of the outlier class; 0 when there are no positives at all.
pub fn f1(c: &ConfusionMatrix) -> f64 {
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        return 0.0;
    }
    (2 * c.tp) as f64 / denom as f64
}

/// 5×5 class confusion, actual classes on rows, predicted on columns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassConfusion {
    pub counts: [[u64; 5]; 5],
}

impl ClassConfusion {
    pub fn record(&mut self, actual: OutlierLabel, predicted: OutlierLabel) {
        self.counts[usize::from(actual.value())][usize::from(predicted.value())] += 1;
    }

    pub fn merged(&self, other: &ClassConfusion) -> ClassConfusion {
        let mut out = *self;
        for (row, orow) in out.counts.iter_mut().zip(&other.counts) {
            for (v, o) in row.iter_mut().zip(orow) {
                *v += o;
            }
        }
        out
    }

    /// Collapses to the binary outlier-vs-inlier matrix.
    pub fn binarized(&self) -> ConfusionMatrix {
        let mut c = ConfusionMatrix::default();
        for (a, row) in self.counts.iter().enumerate() {
            for (p, &n) in row.iter().enumerate() {
                match (a > 0, p > 0) {
                    (false, false) => c.tn += n,
                    (false, true) => c.fp += n,
                    (true, false) => c.fn_ += n,
                    (true, true) => c.tp += n,
                }
            }
        }
        c
    }
}

/// Mean ± population standard deviation, min and max of per-fold values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        if values.is_empty() {
            return Summary { mean: f64::NAN, std: f64::NAN, min: f64::NAN, max: f64::NAN };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Summary {
            mean,
            std: var.sqrt(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reported_matrices() {
        let spm = ConfusionMatrix::new(754, 44, 237, 1763);
        assert!((spm.mcc() - 0.780).abs() < 0.005);
        assert!((spm.f1() - 0.926).abs() < 0.005);
        let ml = ConfusionMatrix::new(783, 15, 30, 1970);
        assert!((ml.mcc() - 0.961).abs() < 0.005);
        assert!((ml.f1() - 0.989).abs() < 0.005);
    }

    #[test]
    fn perfect_and_degenerate() {
        let c = ConfusionMatrix::new(10, 0, 0, 10);
        assert_eq!(c.mcc(), 1.0);
        assert_eq!(c.f1(), 1.0);
        let all_neg = ConfusionMatrix::new(10, 0, 0, 0);
        assert_eq!(all_neg.mcc(), 0.0);
        assert_eq!(all_neg.f1(), 0.0);
        assert_eq!(ConfusionMatrix::new(0, 0, 5, 5).mcc(), 0.0);
        assert_eq!(ConfusionMatrix::new(5, 0, 0, 5).merged(&ConfusionMatrix::new(0, 5, 5, 0)).mcc(), 0.0);
        assert_eq!(ConfusionMatrix::new(0, 5, 5, 0).merged(&ConfusionMatrix::new(0, 5, 5, 0)).total(), 20);
    }

    #[test]
    fn anti_correlated() {
        assert_eq!(ConfusionMatrix::new(0, 7, 7, 0).mcc(), -1.0);
        assert_eq!(ConfusionMatrix::new(0, 7, 3, 0).mcc(), -1.0);
    }

    #[test]
    fn binarize_total() {
        assert_eq!(binarize(OutlierLabel::Valid), BinaryClass::Inlier);
        assert_eq!(binarize(OutlierLabel::InvertedOrientation), BinaryClass::Outlier);
        for l in OutlierLabel::OUTLIERS {
            assert_eq!(binarize(l), BinaryClass::Outlier);
        }
    }

    #[test]
    fn class_confusion_binarizes() {
        let mut cc = ClassConfusion::default();
        cc.record(OutlierLabel::Valid, OutlierLabel::Valid);
        cc.record(OutlierLabel::Valid, OutlierLabel::IncorrectSide);
        cc.record(OutlierLabel::DoubleCapture, OutlierLabel::AcquisitionError);
        cc.record(OutlierLabel::DoubleCapture, OutlierLabel::Valid);
        assert_eq!(cc.binarized(), ConfusionMatrix::new(1, 1, 1, 1));
    }

    #[test]
    fn summary() {
        let s = Summary::of(&[1.0, 3.0]);
        assert_eq!((s.mean, s.std, s.min, s.max), (2.0, 1.0, 1.0, 3.0));
    }
}
