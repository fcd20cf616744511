//! Symmetric InfoNCE and its exact gradient with respect to both embedding
//! matrices.

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

/// Numerically stable softmax of `logits / tau`.
pub fn softmax(logits: &[f64], tau: f64) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| ((l - max) / tau).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// `ln Σ exp(x / tau)`.
fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone, tau: f64) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = xs.map(|x| ((x - max) / tau).exp()).sum();
    max / tau + s.ln()
}

fn check(e_text: &Matrix, e_motion: &Matrix, tau: f64) -> Result<()> {
    if e_text.rows() != e_motion.rows() || e_text.cols() != e_motion.cols() {
        return Err(Error::Shape(format!(
            "text {}x{} vs motion {}x{}",
            e_text.rows(),
            e_text.cols(),
            e_motion.rows(),
            e_motion.cols()
        )));
    }
    if e_text.rows() < 2 {
        return Err(Error::Shape("InfoNCE needs at least two pairs".into()));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::validation("tau", "must be positive"));
    }
    Ok(())
}

/// Loss from a similarity matrix with positives on the diagonal: the mean
/// of row-wise and column-wise cross-entropies at temperature `tau`.
pub fn infonce_from_similarity(sim: &Matrix, tau: f64) -> f64 {
    let n = sim.rows();
    let mut row = 0.0;
    let mut col = 0.0;
    for i in 0..n {
        row += log_sum_exp(sim.row(i).iter().copied(), tau) - sim.get(i, i) / tau;
        col += log_sum_exp((0..n).map(|r| sim.get(r, i)), tau) - sim.get(i, i) / tau;
    }
    0.5 * (row / n as f64 + col / n as f64)
}

pub fn infonce_symmetric(e_text: &Matrix, e_motion: &Matrix, tau: f64) -> Result<f64> {
    check(e_text, e_motion, tau)?;
    Ok(infonce_from_similarity(&e_text.mul_transpose(e_motion), tau))
}

/// Loss together with its gradient with respect to both embedding matrices.
///
/// With `S = E_t E_mᵀ`, row softmax `P` and column softmax `Q`,
/// `∂L/∂S = (P + Q − 2I) / (2Nτ)`; then `G_t = (∂L/∂S) E_m` and
/// `G_m = (∂L/∂S)ᵀ E_t`.
pub fn infonce_with_grad(e_text: &Matrix, e_motion: &Matrix, tau: f64) -> Result<(f64, Matrix, Matrix)> {
    check(e_text, e_motion, tau)?;
    let n = e_text.rows();
    let sim = e_text.mul_transpose(e_motion);
    let loss = infonce_from_similarity(&sim, tau);
    let scale = 1.0 / (2.0 * n as f64 * tau);
    let mut d_sim = Matrix::zeros(n, n);
    for i in 0..n {
        let p = softmax(sim.row(i), tau);
        for (j, pj) in p.into_iter().enumerate() {
            d_sim.set(i, j, pj);
        }
    }
    for j in 0..n {
        let column: Vec<f64> = (0..n).map(|i| sim.get(i, j)).collect();
        let q = softmax(&column, tau);
        for (i, qi) in q.into_iter().enumerate() {
            d_sim.set(i, j, d_sim.get(i, j) + qi);
        }
    }
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { 2.0 } else { 0.0 };
            d_sim.set(i, j, (d_sim.get(i, j) - delta) * scale);
        }
    }
    let d = e_text.cols();
    let mut g_text = Matrix::zeros(n, d);
    let mut g_motion = Matrix::zeros(n, d);
    for i in 0..n {
        for j in 0..n {
            let w = d_sim.get(i, j);
            for k in 0..d {
                g_text.row_mut(i)[k] += w * e_motion.get(j, k);
                g_motion.row_mut(j)[k] += w * e_text.get(i, k);
            }
        }
    }
    Ok((loss, g_text, g_motion))
}

pub fn grad_embeddings(e_text: &Matrix, e_motion: &Matrix, tau: f64) -> Result<(Matrix, Matrix)> {
    infonce_with_grad(e_text, e_motion, tau).map(|(_, gt, gm)| (gt, gm))
}

/// One-directional InfoNCE gradient for a single query against a key set:
/// `(c − k₊)/τ` with `c = Σ_j p_j k_j` the softmax-weighted key centroid.
pub fn query_gradient(query: &[f64], keys: &Matrix, positive: usize, tau: f64) -> Vec<f64> {
    let logits: Vec<f64> = keys.iter_rows().map(|k| dot(query, k)).collect();
    let p = softmax(&logits, tau);
    let mut c = vec![0.0; keys.cols()];
    for (pj, k) in p.iter().zip(keys.iter_rows()) {
        for (ck, kk) in c.iter_mut().zip(k) {
            *ck += pj * kk;
        }
    }
    c.iter()
        .zip(keys.row(positive))
        .map(|(ck, pk)| (ck - pk) / tau)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::normalize;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let mut m = Matrix::zeros(n, d);
        for i in 0..n {
            let r = m.row_mut(i);
            for v in r.iter_mut() {
                *v = rng.random::<f64>() - 0.5;
            }
            normalize(r);
        }
        m
    }

    #[test]
    fn uniform_logits_give_ln_n() {
        for n in [2usize, 4, 128] {
            let sim = Matrix::from_vec(n, n, vec![0.3; n * n]);
            for tau in [0.07, 1.0] {
                assert!((infonce_from_similarity(&sim, tau) - (n as f64).ln()).abs() < 1e-9);
            }
        }
        // Same through embeddings: every row equal.
        let e = Matrix::from_rows(&vec![vec![0.6, 0.8]; 4]);
        assert!((infonce_symmetric(&e, &e, 0.5).unwrap() - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn identity_similarity_at_default_temperature() {
        let n = 128;
        let mut e = Matrix::zeros(n, n);
        for i in 0..n {
            e.set(i, i, 1.0);
        }
        let expected = (1.0 + 127.0 * (-1.0f64 / 0.07).exp()).ln();
        let loss = infonce_symmetric(&e, &e, 0.07).unwrap();
        assert!((loss - expected).abs() < 1e-12, "{loss} vs {expected}");
        assert!((loss - 7.9356e-5).abs() < 1e-9, "{loss}");
    }

    #[test]
    fn symmetric_in_roles() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_unit(6, 5, &mut rng);
        let b = random_unit(6, 5, &mut rng);
        let l1 = infonce_symmetric(&a, &b, 0.2).unwrap();
        let l2 = infonce_symmetric(&b, &a, 0.2).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        assert!(l1 >= 0.0);
    }

    #[test]
    fn two_keys_equal_logits() {
        let keys = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let q = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];
        let g = query_gradient(&q, &keys, 0, 1.0);
        assert!((g[0] + 0.5).abs() < 1e-15 && (g[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn row_term_is_centroid_form() {
        // The text-side gradient splits into a row (text-query) part equal to
        // (c − k₊)/(2Nτ) and a column part; isolate the row part by
        // subtracting the column part computed independently.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, d, tau) = (5, 4, 0.3);
        let t = random_unit(n, d, &mut rng);
        let m = random_unit(n, d, &mut rng);
        let (g_t, _) = grad_embeddings(&t, &m, tau).unwrap();
        let sim = t.mul_transpose(&m);
        for i in 0..n {
            let row = query_gradient(t.row(i), &m, i, tau);
            let mut col_part = vec![0.0; d];
            for j in 0..n {
                let column: Vec<f64> = (0..n).map(|r| sim.get(r, j)).collect();
                let q = softmax(&column, tau);
                let w = (q[i] - if i == j { 1.0 } else { 0.0 }) / (2.0 * n as f64 * tau);
                for k in 0..d {
                    col_part[k] += w * m.get(j, k);
                }
            }
            for k in 0..d {
                let expect = row[k] / (2.0 * n as f64) + col_part[k];
                assert!((g_t.get(i, k) - expect).abs() < 1e-12);
            }
        }
    }

    fn fd_check(n: usize, d: usize, tau: f64, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_unit(n, d, &mut rng);
        let m = random_unit(n, d, &mut rng);
        let (g_t, g_m) = grad_embeddings(&t, &m, tau).unwrap();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for (which, g) in [(0, &g_t), (1, &g_m)] {
            for i in 0..n {
                for k in 0..d {
                    let mut plus = (t.clone(), m.clone());
                    let mut minus = (t.clone(), m.clone());
                    let (p, q) = if which == 0 {
                        (&mut plus.0, &mut minus.0)
                    } else {
                        (&mut plus.1, &mut minus.1)
                    };
                    p.set(i, k, p.get(i, k) + h);
                    q.set(i, k, q.get(i, k) - h);
                    let lp = infonce_symmetric(&plus.0, &plus.1, tau).unwrap();
                    let lm = infonce_symmetric(&minus.0, &minus.1, tau).unwrap();
                    let num = (lp - lm) / (2.0 * h);
                    let a = g.get(i, k);
                    let err = (a - num).abs() / a.abs().max(num.abs()).max(1e-3);
                    worst = worst.max(err);
                }
            }
        }
        worst
    }

    #[test]
    fn matches_central_differences() {
        for (tau, seed) in [(1.0, 1), (0.07, 2), (0.3, 3)] {
            let err = fd_check(8, 6, tau, seed);
            assert!(err <= 1e-5, "tau={tau}: {err}");
        }
    }

    #[test]
    fn saturated_identity_has_vanishing_gradient() {
        let n = 8;
        let mut e = Matrix::zeros(n, n);
        for i in 0..n {
            e.set(i, i, 1.0);
        }
        let (g_t, g_m) = grad_embeddings(&e, &e, 0.07).unwrap();
        let max = g_t
            .as_slice()
            .iter()
            .chain(g_m.as_slice())
            .fold(0.0f64, |a, v| a.max(v.abs()));
        // Off-diagonal softmax mass is e^{-1/0.07} ≈ 6.2e-7 per entry.
        assert!(max < 1e-5, "{max}");
        let (g_t1, _) = grad_embeddings(&e, &e, 1.0).unwrap();
        let max1 = g_t1.as_slice().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(max1 > 100.0 * max);
    }
}
