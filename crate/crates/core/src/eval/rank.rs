use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

/// Tie-fair rank of the best-ranked correct item.
///
/// With `s*` the best correct similarity, `g` the number of gallery items
/// scoring strictly above it, `t` the number scoring exactly `s*` and `c` the
/// number of correct items among those `t`, the rank is `g + (t+1)/(c+1)`:
/// the expected position of the first correct item when ties are broken
/// uniformly at random. With a single correct item in the tie this is the
/// usual mid-rank.
pub fn fair_rank(sims: &[f64], correct: &[usize]) -> Result<f64> {
    if correct.is_empty() {
        return Err(Error::validation("correct_set", "must be non-empty"));
    }
    if let Some(&bad) = correct.iter().find(|&&j| j >= sims.len()) {
        return Err(Error::Shape(format!("correct index {bad} outside gallery of {}", sims.len())));
    }
    let best = correct.iter().map(|&j| sims[j]).fold(f64::NEG_INFINITY, f64::max);
    let greater = sims.iter().filter(|&&s| s > best).count();
    let ties = sims.iter().filter(|&&s| s == best).count();
    let mut correct_ties: Vec<usize> = correct.iter().copied().filter(|&j| sims[j] == best).collect();
    correct_ties.sort_unstable();
    correct_ties.dedup();
    Ok(greater as f64 + (ties as f64 + 1.0) / (correct_ties.len() as f64 + 1.0))
}

/// Ranks each query row of `e_query` against all rows of `e_gallery` by dot
/// product.
pub fn rank_queries(e_query: &Matrix, e_gallery: &Matrix, correct_sets: &[Vec<usize>]) -> Result<Vec<f64>> {
    if correct_sets.len() != e_query.rows() {
        return Err(Error::Shape(format!(
            "{} correct sets for {} queries",
            correct_sets.len(),
            e_query.rows()
        )));
    }
    if e_query.cols() != e_gallery.cols() {
        return Err(Error::Shape("query and gallery dimensions differ".into()));
    }
    let mut sims = vec![0.0; e_gallery.rows()];
    correct_sets
        .iter()
        .enumerate()
        .map(|(q, set)| {
            let row = e_query.row(q);
            for (s, g) in sims.iter_mut().zip(e_gallery.iter_rows()) {
                *s = dot(row, g);
            }
            fair_rank(&sims, set)
        })
        .collect()
}

/// Percentage of ranks at or below `k`; zero for an empty list.
pub fn recall_at_k(ranks: &[f64], k: usize) -> f64 {
    if ranks.is_empty() {
        return 0.0;
    }
    100.0 * ranks.iter().filter(|&&r| r <= k as f64).count() as f64 / ranks.len() as f64
}

/// Median rank, averaging the middle pair for even counts; NaN when empty.
pub fn median_rank(ranks: &[f64]) -> f64 {
    if ranks.is_empty() {
        return f64::NAN;
    }
    let mut v = ranks.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rank_examples() {
        assert_eq!(fair_rank(&[0.9, 0.5, 0.1], &[0]).unwrap(), 1.0);
        assert_eq!(fair_rank(&[0.3; 5], &[2]).unwrap(), 3.0);
        assert_eq!(fair_rank(&[0.5, 0.2, 0.9], &[1, 2]).unwrap(), 1.0);
        assert_eq!(fair_rank(&[0.9, 0.5, 0.1], &[2]).unwrap(), 3.0);
        // two-way tie for first with one correct item
        assert_eq!(fair_rank(&[0.7, 0.7, 0.1], &[1]).unwrap(), 1.5);
        // every item correct and tied
        assert_eq!(fair_rank(&[0.4; 6], &[0, 1, 2, 3, 4, 5]).unwrap(), 1.0);
        assert!(fair_rank(&[0.1], &[]).is_err());
        assert!(fair_rank(&[0.1], &[3]).is_err());
    }

    #[test]
    fn recall_and_median_examples() {
        let r = [1.0, 3.0, 7.0];
        assert!((recall_at_k(&r, 1) - 100.0 / 3.0).abs() < 1e-12);
        assert!((recall_at_k(&r, 5) - 200.0 / 3.0).abs() < 1e-12);
        assert_eq!(median_rank(&r), 3.0);
        assert_eq!(median_rank(&[2.0, 4.0]), 3.0);
        assert_eq!(recall_at_k(&[1.0; 4], 1), 100.0);
        assert_eq!(median_rank(&[1.0; 4]), 1.0);
    }

    /// Brute force over all tie orderings of the gallery.
    fn expected_rank_by_enumeration(sims: &[f64], correct: &[usize]) -> f64 {
        fn perms(items: Vec<usize>) -> Vec<Vec<usize>> {
            if items.len() <= 1 {
                return vec![items];
            }
            let mut out = Vec::new();
            for i in 0..items.len() {
                let mut rest = items.clone();
                let x = rest.remove(i);
                for mut p in perms(rest) {
                    p.insert(0, x);
                    out.push(p);
                }
            }
            out
        }
        let all = perms((0..sims.len()).collect());
        let mut total = 0.0;
        let mut count = 0.0;
        for p in all {
            let sorted = p.windows(2).all(|w| sims[w[0]] >= sims[w[1]]);
            if !sorted {
                continue;
            }
            let pos = p.iter().position(|j| correct.contains(j)).unwrap();
            total += pos as f64 + 1.0;
            count += 1.0;
        }
        total / count
    }

    proptest! {
        #[test]
        fn matches_tie_enumeration(
            levels in proptest::collection::vec(0u8..3, 1..7),
            mask in proptest::collection::vec(any::<bool>(), 7),
        ) {
            let sims: Vec<f64> = levels.iter().map(|&l| l as f64 / 2.0).collect();
            let mut correct: Vec<usize> = (0..sims.len()).filter(|&i| mask[i]).collect();
            if correct.is_empty() { correct.push(0); }
            let got = fair_rank(&sims, &correct).unwrap();
            let want = expected_rank_by_enumeration(&sims, &correct);
            prop_assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }

        #[test]
        fn recall_nondecreasing_and_bounded(ranks in proptest::collection::vec(1.0f64..50.0, 1..40)) {
            let r1 = recall_at_k(&ranks, 1);
            let r5 = recall_at_k(&ranks, 5);
            let r10 = recall_at_k(&ranks, 10);
            prop_assert!(0.0 <= r1 && r1 <= r5 && r5 <= r10 && r10 <= 100.0);
            prop_assert!(median_rank(&ranks) >= 1.0);
        }
    }
}
