use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::featurize::SparseVec;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

/// Linear text and motion encoders into a shared unit sphere.
///
/// `text` is `F × d` and `motion` is `F_m × d`; an input `x` encodes to
/// `Wᵀx / ‖Wᵀx‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub text: Matrix,
    pub motion: Matrix,
}

impl EncoderParams {
    /// Gaussian initialization with standard deviation `1/√fan_in` per matrix.
    pub fn init<R: Rng + ?Sized>(text_dim: usize, motion_dim: usize, embed_dim: usize, rng: &mut R) -> Self {
        let mut draw = |rows: usize| {
            let normal = Normal::new(0.0, 1.0 / (rows as f64).sqrt()).expect("valid std");
            let data = (0..rows * embed_dim).map(|_| normal.sample(rng)).collect();
            Matrix::from_vec(rows, embed_dim, data)
        };
        let text = draw(text_dim);
        let motion = draw(motion_dim);
        Self { text, motion }
    }

    pub fn embed_dim(&self) -> usize {
        self.text.cols()
    }

    pub fn all_finite(&self) -> bool {
        self.text.all_finite() && self.motion.all_finite()
    }
}

/// Encoded batch: unit-norm rows plus the pre-normalization norms needed for
/// backpropagation.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub emb: Matrix,
    pub norms: Vec<f64>,
}

fn finish(mut z: Vec<f64>, what: &str) -> Result<(Vec<f64>, f64)> {
    let n = dot(&z, &z).sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::Degenerate(format!("{what} projects to a zero or non-finite vector")));
    }
    z.iter_mut().for_each(|v| *v /= n);
    Ok((z, n))
}

fn project_sparse(w: &Matrix, v: &SparseVec) -> Vec<f64> {
    let mut z = vec![0.0; w.cols()];
    for &(j, x) in v {
        for (zk, wk) in z.iter_mut().zip(w.row(j)) {
            *zk += x * wk;
        }
    }
    z
}

fn project_dense(w: &Matrix, x: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; w.cols()];
    for (j, &xj) in x.iter().enumerate() {
        if xj != 0.0 {
            for (zk, wk) in z.iter_mut().zip(w.row(j)) {
                *zk += xj * wk;
            }
        }
    }
    z
}

pub fn encode_text(params: &EncoderParams, v: &SparseVec) -> Result<Vec<f64>> {
    if v.iter().any(|(j, x)| *j >= params.text.rows() || !x.is_finite()) {
        return Err(Error::Shape("text features out of range or non-finite".into()));
    }
    finish(project_sparse(&params.text, v), "text").map(|(e, _)| e)
}

pub fn encode_motion(params: &EncoderParams, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != params.motion.rows() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Shape(format!(
            "motion features have length {}, encoder expects {}",
            x.len(),
            params.motion.rows()
        )));
    }
    finish(project_dense(&params.motion, x), "motion").map(|(e, _)| e)
}

pub fn encode_text_batch(params: &EncoderParams, inputs: &[&SparseVec]) -> Result<Encoded> {
    let d = params.embed_dim();
    let mut emb = Matrix::zeros(inputs.len(), d);
    let mut norms = Vec::with_capacity(inputs.len());
    for (i, v) in inputs.iter().enumerate() {
        let (e, n) = finish(project_sparse(&params.text, v), "text")?;
        emb.row_mut(i).copy_from_slice(&e);
        norms.push(n);
    }
    Ok(Encoded { emb, norms })
}

pub fn encode_motion_batch(params: &EncoderParams, inputs: &[&[f64]]) -> Result<Encoded> {
    let d = params.embed_dim();
    let mut emb = Matrix::zeros(inputs.len(), d);
    let mut norms = Vec::with_capacity(inputs.len());
    for (i, x) in inputs.iter().enumerate() {
        if x.len() != params.motion.rows() {
            return Err(Error::Shape("motion feature length".into()));
        }
        let (e, n) = finish(project_dense(&params.motion, x), "motion")?;
        emb.row_mut(i).copy_from_slice(&e);
        norms.push(n);
    }
    Ok(Encoded { emb, norms })
}

/// Gradient with respect to the pre-normalization output `z = ‖z‖·e`:
/// `(I − eeᵀ) g / ‖z‖`.
pub fn normalization_backward(e: &[f64], norm: f64, g: &[f64]) -> Vec<f64> {
    let eg = dot(e, g);
    e.iter().zip(g).map(|(ek, gk)| (gk - eg * ek) / norm).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub text: Matrix,
    pub motion: Matrix,
}

impl ParamGrads {
    pub fn zeros_like(params: &EncoderParams) -> Self {
        Self {
            text: Matrix::zeros(params.text.rows(), params.text.cols()),
            motion: Matrix::zeros(params.motion.rows(), params.motion.cols()),
        }
    }
}

/// Chain rule from embedding gradients to encoder weights, accumulated into
/// `out`.
pub fn backprop_params(
    texts: &[&SparseVec],
    motions: &[&[f64]],
    enc_text: &Encoded,
    enc_motion: &Encoded,
    g_text: &Matrix,
    g_motion: &Matrix,
    out: &mut ParamGrads,
) {
    for (i, v) in texts.iter().enumerate() {
        let dz = normalization_backward(enc_text.emb.row(i), enc_text.norms[i], g_text.row(i));
        for &(j, x) in v.iter() {
            for (w, d) in out.text.row_mut(j).iter_mut().zip(&dz) {
                *w += x * d;
            }
        }
    }
    for (i, x) in motions.iter().enumerate() {
        let dz = normalization_backward(enc_motion.emb.row(i), enc_motion.norms[i], g_motion.row(i));
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (w, d) in out.motion.row_mut(j).iter_mut().zip(&dz) {
                    *w += xj * d;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_padded(rows: usize, d: usize) -> Matrix {
        let mut m = Matrix::zeros(rows, d);
        for i in 0..rows.min(d) {
            m.set(i, i, 1.0);
        }
        m
    }

    #[test]
    fn identity_encoder_passes_basis_vector() {
        let p = EncoderParams {
            text: identity_padded(4, 3),
            motion: identity_padded(4, 3),
        };
        assert_eq!(encode_motion(&p, &[1.0, 0.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(encode_text(&p, &vec![(0, 1.0)]).unwrap(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn scale_invariant_and_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = EncoderParams::init(32, 16, 8, &mut rng);
        let x: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
        let x5: Vec<f64> = x.iter().map(|v| v * 5.0).collect();
        let a = encode_motion(&p, &x).unwrap();
        let b = encode_motion(&p, &x5).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-15);
        }
        assert!((norm(&a) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_projection_is_degenerate() {
        let p = EncoderParams {
            text: identity_padded(4, 2),
            motion: identity_padded(4, 2),
        };
        assert!(matches!(
            encode_motion(&p, &[0.0, 0.0, 1.0, 0.0]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn zero_embedding_gradient_gives_zero_param_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = EncoderParams::init(16, 4, 3, &mut rng);
        let t: SparseVec = vec![(1, 0.6), (5, 0.8)];
        let m = [0.1, 0.2, 0.3, 0.4];
        let et = encode_text_batch(&p, &[&t]).unwrap();
        let em = encode_motion_batch(&p, &[&m]).unwrap();
        let mut g = ParamGrads::zeros_like(&p);
        backprop_params(&[&t], &[&m], &et, &em, &Matrix::zeros(1, 3), &Matrix::zeros(1, 3), &mut g);
        assert!(g.text.as_slice().iter().all(|&v| v == 0.0));
        assert!(g.motion.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn radial_gradient_is_projected_out() {
        // A gradient along the embedding itself only rescales z; the
        // normalization Jacobian removes it.
        let e = [0.6, 0.8];
        let dz = normalization_backward(&e, 2.5, &[1.2, 1.6]);
        assert!(dz.iter().all(|v| v.abs() < 1e-15));
    }
}
