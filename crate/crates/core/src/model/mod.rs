//! Featurization, linear dual encoders, symmetric InfoNCE with exact
//! gradients, and the training strategies.

pub mod encoder;
pub mod featurize;
pub mod gradcheck;
pub mod loss;
pub mod train;

pub use encoder::{encode_motion, encode_text, EncoderParams, ParamGrads};
pub use featurize::{HashedFeaturizer, SparseVec};
pub use gradcheck::{finite_diff_check, GradCheckReport};
pub use loss::{grad_embeddings, infonce_symmetric, query_gradient, softmax};
pub use train::{
    cosine_lr, initial_checkpoint, train, train_from, BatchRecord, BlendUpdate, Checkpoint, PassLoss, TextSource, TrainConfig,
    TrainInputs, TrainMode, CHECKPOINT_FORMAT_VERSION,
};

use crate::corpus::Dataset;
use crate::error::Result;
use crate::linalg::Matrix;

/// Encoding view of a checkpoint: featurizer plus encoder weights.
#[derive(Debug, Clone, Copy)]
pub struct Encoder<'a> {
    pub featurizer: &'a HashedFeaturizer,
    pub params: &'a EncoderParams,
}

impl<'a> Encoder<'a> {
    pub fn from_checkpoint(ckpt: &'a Checkpoint) -> Self {
        Self {
            featurizer: &ckpt.config.featurizer,
            params: &ckpt.params,
        }
    }

    pub fn text(&self, text: &str) -> Result<Vec<f64>> {
        encode_text(self.params, &self.featurizer.featurize(text)?)
    }

    pub fn texts<S: AsRef<str>>(&self, texts: &[S]) -> Result<Matrix> {
        let mut m = Matrix::zeros(texts.len(), self.params.embed_dim());
        for (i, t) in texts.iter().enumerate() {
            m.row_mut(i).copy_from_slice(&self.text(t.as_ref())?);
        }
        Ok(m)
    }

    /// Unit embeddings of every motion of `ds`, in dataset order.
    pub fn motions(&self, ds: &Dataset) -> Result<Matrix> {
        let mut m = Matrix::zeros(ds.motions().len(), self.params.embed_dim());
        for (i, mo) in ds.motions().iter().enumerate() {
            m.row_mut(i).copy_from_slice(&encode_motion(self.params, &mo.features)?);
        }
        Ok(m)
    }
}
