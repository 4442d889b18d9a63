//! Circle-style multi-label loss over grid cells:
//! `log(e^δ + Σ_{pos} e^{−c}) + log(e^δ + Σ_{neg} e^{c})`.

/// Positive cells of one label and the set of cells that take part in the
/// loss at all. Span labels only use the upper triangle `i ≤ j`.
#[derive(Debug, Clone)]
pub struct PairSets {
    pub n: usize,
    pub upper_only: bool,
    positive: Vec<bool>,
}

impl PairSets {
    pub fn new(n: usize, upper_only: bool, positive: Vec<bool>) -> Self {
        assert_eq!(positive.len(), n * n);
        debug_assert!(
            !upper_only || (0..n * n).all(|k| !positive[k] || k / n <= k % n),
            "span positives must lie in the upper triangle"
        );
        PairSets {
            n,
            upper_only,
            positive,
        }
    }

    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        !self.upper_only || i <= j
    }

    pub fn is_positive(&self, i: usize, j: usize) -> bool {
        self.positive[i * self.n + j]
    }

    pub fn positives(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cells().filter(|&(i, j)| self.is_positive(i, j))
    }

    pub fn negatives(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cells().filter(|&(i, j)| !self.is_positive(i, j))
    }

    fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        (0..n)
            .flat_map(move |i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.is_valid(i, j))
    }
}

/// `log(e^δ + Σ e^{x})`, overflow-safe.
pub fn log_sum_exp_with(delta: f64, xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(delta, f64::max);
    let s = (delta - m).exp() + xs.map(|x| (x - m).exp()).sum::<f64>();
    m + s.ln()
}

/// The loss on explicit positive and negative score lists.
pub fn circle_loss(positive: &[f64], negative: &[f64], delta: f64) -> f64 {
    log_sum_exp_with(delta, positive.iter().map(|c| -c))
        + log_sum_exp_with(delta, negative.iter().copied())
}

/// The loss for one `n × n` score channel. When `dscores` is given the
/// gradient is added into it; masked-out cells are never read or written.
pub fn circle_loss_grid(
    scores: &[f64],
    pairs: &PairSets,
    delta: f64,
    dscores: Option<&mut [f64]>,
) -> f64 {
    let n = pairs.n;
    let at = |(i, j): (usize, usize)| scores[i * n + j];
    let pos_max = pairs.positives().map(|c| -at(c)).fold(delta, f64::max);
    let neg_max = pairs.negatives().map(at).fold(delta, f64::max);
    let mut pos_sum = (delta - pos_max).exp();
    for c in pairs.positives() {
        pos_sum += (-at(c) - pos_max).exp();
    }
    let mut neg_sum = (delta - neg_max).exp();
    for c in pairs.negatives() {
        neg_sum += (at(c) - neg_max).exp();
    }
    let loss = pos_max + pos_sum.ln() + neg_max + neg_sum.ln();
    if let Some(ds) = dscores {
        for (i, j) in pairs.positives() {
            ds[i * n + j] -= (-at((i, j)) - pos_max).exp() / pos_sum;
        }
        for (i, j) in pairs.negatives() {
            ds[i * n + j] += (at((i, j)) - neg_max).exp() / neg_sum;
        }
    }
    loss
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_sets_give_zero() {
        assert_eq!(circle_loss(&[], &[], 0.0), 0.0);
    }

    #[test]
    fn worked_value() {
        let want = (1.0 + (-3.0f64).exp()).ln() + (1.0 + (-2.0f64).exp()).ln();
        let got = circle_loss(&[3.0], &[-2.0], 0.0);
        assert!((got - want).abs() < 1e-15);
        assert!((got - 0.175515).abs() < 1e-6);
    }

    #[test]
    fn saturated_separation() {
        let loss = circle_loss(&[40.0; 5], &[-40.0; 20], 0.0);
        assert!(loss <= 1e-12, "{loss}");
    }

    #[test]
    fn grid_masks_lower_triangle() {
        let n = 3;
        let mut positive = vec![false; 9];
        positive[1] = true;
        let pairs = PairSets::new(n, true, positive);
        let mut scores = vec![0.5; 9];
        let base = circle_loss_grid(&scores, &pairs, 0.0, None);
        // Lower-triangle cells never matter.
        scores[3] = 1e6;
        scores[6] = f64::NAN;
        scores[7] = -1e6;
        assert_eq!(circle_loss_grid(&scores, &pairs, 0.0, None), base);
        let mut ds = vec![0.0; 9];
        circle_loss_grid(&scores, &pairs, 0.0, Some(&mut ds));
        assert_eq!((ds[3], ds[6], ds[7]), (0.0, 0.0, 0.0));
        assert!(ds[1] < 0.0 && ds[0] > 0.0);
    }

    #[test]
    fn grid_gradient_matches_finite_difference() {
        let n = 4;
        let positive: Vec<bool> = (0..16).map(|k| k % 5 == 0).collect();
        let pairs = PairSets::new(n, false, positive);
        let scores: Vec<f64> = (0..16).map(|k| (k as f64 * 0.7).sin() * 3.0).collect();
        let mut ds = vec![0.0; 16];
        circle_loss_grid(&scores, &pairs, 0.0, Some(&mut ds));
        let eps = 1e-6;
        for k in 0..16 {
            let mut p = scores.clone();
            p[k] += eps;
            let mut m = scores.clone();
            m[k] -= eps;
            let fd = (circle_loss_grid(&p, &pairs, 0.0, None)
                - circle_loss_grid(&m, &pairs, 0.0, None))
                / (2.0 * eps);
            assert!((fd - ds[k]).abs() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn nonnegative_at_zero_threshold(
            pos in prop::collection::vec(-50.0f64..50.0, 0..8),
            neg in prop::collection::vec(-50.0f64..50.0, 0..8),
        ) {
            prop_assert!(circle_loss(&pos, &neg, 0.0) >= 0.0);
        }

        #[test]
        fn monotone_in_each_cell(
            pos in prop::collection::vec(-10.0f64..10.0, 1..6),
            neg in prop::collection::vec(-10.0f64..10.0, 1..6),
            bump in 0.01f64..2.0,
        ) {
            let base = circle_loss(&pos, &neg, 0.0);
            let mut p2 = pos.clone();
            p2[0] += bump;
            prop_assert!(circle_loss(&p2, &neg, 0.0) < base);
            let mut n2 = neg.clone();
            n2[0] += bump;
            prop_assert!(circle_loss(&pos, &n2, 0.0) > base);
        }

        #[test]
        fn order_invariant(
            mut pos in prop::collection::vec(-20.0f64..20.0, 0..10),
            mut neg in prop::collection::vec(-20.0f64..20.0, 0..10),
        ) {
            let a = circle_loss(&pos, &neg, 0.0);
            pos.reverse();
            let half = neg.len() / 2;
            neg.rotate_left(half);
            prop_assert!((circle_loss(&pos, &neg, 0.0) - a).abs() <= 1e-12);
        }
    }
}
