//! Label smoothing for the conditioning targets.

use crate::window::ConditionLabel;

/// Smooth the one-hot portion: `onehot * (1 - eps) + eps / K`. The lifetime
/// element, when present, is left untouched.
pub fn smooth_labels(label: &ConditionLabel, eps: f64) -> ConditionLabel {
    let k = label.onehot.len() as f64;
    ConditionLabel {
        onehot: label.onehot.iter().map(|&x| x * (1.0 - eps) + eps / k).collect(),
        lifetime: label.lifetime,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_eps_is_identity() {
        let l = ConditionLabel::onehot(1, 4);
        assert_eq!(smooth_labels(&l, 0.0), l);
    }

    #[test]
    fn three_class_closed_form() {
        let l = ConditionLabel::onehot(0, 3);
        let s = smooth_labels(&l, 0.1);
        let want = [0.9 + 0.1 / 3.0, 0.1 / 3.0, 0.1 / 3.0];
        for (a, b) in s.onehot.iter().zip(&want) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
        let sum: f64 = s.onehot.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lifetime_untouched() {
        let l = ConditionLabel::with_lifetime(2, 3, 0.42);
        let s = smooth_labels(&l, 0.2);
        assert_eq!(s.lifetime, Some(0.42));
    }
}
