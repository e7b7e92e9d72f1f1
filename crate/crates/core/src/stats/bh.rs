use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BhOutcome {
    pub p_values: Vec<f64>,
    /// Decision per test, in input order.
    pub reject: Vec<bool>,
    pub alpha: f64,
}

/// Benjamini–Hochberg step-up procedure.
pub fn benjamini_hochberg(p_values: &[f64], alpha: f64) -> BhOutcome {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let cutoff = (0..m)
        .rev()
        .find(|&i| p_values[order[i]] <= (i + 1) as f64 / m as f64 * alpha)
        .map(|i| p_values[order[i]]);
    let reject = match cutoff {
        Some(c) => p_values.iter().map(|&p| p <= c).collect(),
        None => vec![false; m],
    };
    BhOutcome {
        p_values: p_values.to_vec(),
        reject,
        alpha,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(benjamini_hochberg(&[0.01, 0.02, 0.03, 0.04], 0.05).reject, [true; 4]);
        assert_eq!(benjamini_hochberg(&[0.5, 0.9], 0.05).reject, [false; 2]);
        assert!(benjamini_hochberg(&[], 0.05).reject.is_empty());
        // Step-up: p_(2) = 0.04 > 0.025 but p_(3) = 0.045 <= 0.05 rescues both.
        assert_eq!(benjamini_hochberg(&[0.045, 0.001, 0.04], 0.05).reject, [true; 3]);
    }

    proptest! {
        #[test]
        fn rejections_form_prefix_and_grow_with_alpha(ps in proptest::collection::vec(0.0f64..=1.0, 0..40), a in 0.0f64..0.5, b in 0.0f64..0.5) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let small = benjamini_hochberg(&ps, lo);
            let large = benjamini_hochberg(&ps, hi);
            for i in 0..ps.len() {
                prop_assert!(!small.reject[i] || large.reject[i]);
                for j in 0..ps.len() {
                    if small.reject[i] && ps[j] <= ps[i] {
                        prop_assert!(small.reject[j]);
                    }
                }
            }
        }
    }
}
