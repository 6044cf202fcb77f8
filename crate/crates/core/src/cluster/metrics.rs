use super::ClusterError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn tally(predicted: &[bool], truth: &[bool]) -> Result<Self, ClusterError> {
        if predicted.len() != truth.len() {
            return Err(ClusterError::LengthMismatch(predicted.len(), truth.len()));
        }
        let mut c = Confusion::default();
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p, t) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }
}

/// F1 of the positive (valid) class; 0 when precision and recall are both undefined or zero.
pub fn f1_score(predicted: &[bool], truth: &[bool]) -> Result<f64, ClusterError> {
    let c = Confusion::tally(predicted, truth)?;
    if c.tp + c.fn_ == 0 {
        return Err(ClusterError::NoPositives);
    }
    let denom = 2 * c.tp + c.fp + c.fn_;
    Ok(if denom == 0 {
        0.0
    } else {
        2.0 * c.tp as f64 / denom as f64
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect() {
        let t = [true, false, true, false];
        assert_eq!(f1_score(&t, &t).unwrap(), 1.0);
    }

    #[test]
    fn two_thirds() {
        // TP=2, FP=1, FN=1
        let pred = [true, true, true, false, false];
        let truth = [true, true, false, true, false];
        assert!((f1_score(&pred, &truth).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn no_predicted_positives() {
        assert_eq!(f1_score(&[false, false], &[true, false]).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        assert_eq!(
            f1_score(&[true], &[true, false]),
            Err(ClusterError::LengthMismatch(1, 2))
        );
        assert_eq!(
            f1_score(&[true, false], &[false, false]),
            Err(ClusterError::NoPositives)
        );
    }

    proptest! {
        #[test]
        fn matches_precision_recall_definition(
            pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..60)
        ) {
            let pred: Vec<bool> = pairs.iter().map(|p| p.0).collect();
            let truth: Vec<bool> = pairs.iter().map(|p| p.1).collect();
            let tp = pairs.iter().filter(|p| p.0 && p.1).count() as f64;
            let pp = pred.iter().filter(|&&p| p).count() as f64;
            let ap = truth.iter().filter(|&&t| t).count() as f64;
            match f1_score(&pred, &truth) {
                Err(ClusterError::NoPositives) => prop_assert_eq!(ap, 0.0),
                Ok(f1) => {
                    let precision = if pp > 0.0 { tp / pp } else { 0.0 };
                    let recall = tp / ap;
                    let expected = if precision + recall > 0.0 {
                        2.0 * precision * recall / (precision + recall)
                    } else {
                        0.0
                    };
                    prop_assert!((f1 - expected).abs() < 1e-12);
                }
                Err(e) => prop_assert!(false, "unexpected {e}"),
            }
        }
    }
}
