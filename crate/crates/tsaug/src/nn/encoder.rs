//! Encoder-style transformer block: pre-norm residual attention followed by a
//! pre-norm residual feed-forward. No encoder-decoder attention.

use rand_chacha::ChaCha8Rng;

use crate::nn::attention::{Attention, BlockParams};
use crate::nn::norm::InstanceNorm;
use crate::nn::params::{Fwd, Linear, ParamStore};
use crate::tensor::{Result, TensorId};

#[derive(Debug, Clone)]
pub struct EncoderBlock {
    pub norm1: InstanceNorm,
    pub attn: Attention,
    pub norm2: InstanceNorm,
    pub ffn1: Linear,
    pub ffn2: Linear,
    pub params: BlockParams,
}

impl EncoderBlock {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, params: BlockParams) -> Self {
        let d = params.d_model;
        let hidden = d * params.ffn_mult;
        Self {
            norm1: InstanceNorm::new(store, rng, &format!("{name}.norm1"), d),
            attn: Attention::new(store, rng, &format!("{name}.attn"), params),
            norm2: InstanceNorm::new(store, rng, &format!("{name}.norm2"), d),
            ffn1: Linear::new(store, rng, &format!("{name}.ffn1"), d, hidden, true),
            ffn2: Linear::new(store, rng, &format!("{name}.ffn2"), hidden, d, true),
            params,
        }
    }

    /// `y = x + Attn(norm(x)); z = y + FFN(norm(y))`.
    pub fn forward(&self, fw: &mut Fwd, x: TensorId, positions: &[usize], seed: u64) -> Result<TensorId> {
        let n1 = self.norm1.forward(fw, x)?;
        let a = self.attn.forward(fw, n1, positions, seed)?;
        let y = fw.tape.add(x, a)?;
        let n2 = self.norm2.forward(fw, y)?;
        let h = self.ffn1.forward(fw, n2)?;
        let h = fw.tape.elu(h);
        let f = self.ffn2.forward(fw, h)?;
        fw.tape.add(y, f)
    }
}
