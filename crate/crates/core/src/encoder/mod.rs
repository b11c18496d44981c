//! Token embeddings, the ReLU feedforward stack, attention refinement and
//! span representations, with hand-written backward passes.
//!
//! Forward for a document of `n` tokens with hidden size `d`:
//!
//! ```text
//! E   = table[tokens]                    n × d
//! H⁰  = E,  Hˡ = relu(Hˡ⁻¹ Wˡᵀ + bˡ)      n × d
//! S   = (H Q)(H K)ᵀ                      n × n
//! A   = softmax over each row of S
//! R   = A H                              n × d   (R = H when attention is off)
//! g   = [R_start, R_end, mean R_start..=end]     3d
//! ```

mod attention;
mod embedding;
mod span;
mod stack;

pub use attention::{attend, AttentionCache, AttentionParams, TokenRepresentations};
pub use embedding::{embed, EmbeddingTable, UNKNOWN_TOKEN};
pub use span::{span_repr, span_repr_backward};
pub use stack::{encode, EncodedStack, EncoderStack, Layer};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, ParamTensor, Rng};

/// The token-level half of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub table: EmbeddingTable,
    pub stack: EncoderStack,
    pub attention: AttentionParams,
}

/// Everything the backward pass needs from one document's forward pass.
#[derive(Debug, Clone)]
pub struct EncoderForward {
    pub token_ids: Vec<usize>,
    pub encoded: EncodedStack,
    pub reps: TokenRepresentations,
}

impl Encoder {
    pub fn new(vocab: impl IntoIterator<Item = String>, dim: usize, att_dim: usize, depth: usize, attention: bool, rng: &mut Rng) -> Self {
        Self {
            table: EmbeddingTable::new(vocab, dim, rng),
            stack: EncoderStack::new(dim, depth, rng),
            attention: AttentionParams::new(dim, att_dim, attention, rng),
        }
    }

    pub fn dim(&self) -> usize {
        self.table.dim()
    }

    pub fn forward(&self, tokens: &[String]) -> Result<EncoderForward> {
        if tokens.is_empty() {
            return Err(Error::Empty("embed: document has no tokens"));
        }
        let token_ids = self.table.lookup(tokens);
        let e = self.table.rows(&token_ids);
        let encoded = encode(&e, &self.stack)?;
        let reps = attend(encoded.output(), &self.attention)?;
        Ok(EncoderForward { token_ids, encoded, reps })
    }

    /// Accumulates parameter gradients given `d_r`, the gradient of the loss
    /// with respect to the refined representations `R`.
    pub fn backward(&mut self, fwd: &EncoderForward, d_r: &Matrix) -> Result<()> {
        if d_r.shape() != fwd.reps.matrix().shape() {
            return Err(Error::Shape {
                op: "encoder backward",
                left: d_r.shape(),
                right: fwd.reps.matrix().shape(),
            });
        }
        let d_h = attention::attend_backward(&mut self.attention, fwd.encoded.output(), &fwd.reps, d_r)?;
        let d_e = stack::encode_backward(&mut self.stack, &fwd.encoded, d_h)?;
        self.table.accumulate(&fwd.token_ids, &d_e);
        Ok(())
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        let mut out = vec![&self.table.table];
        for l in &self.stack.layers {
            out.push(&l.weight);
            out.push(&l.bias);
        }
        out.push(&self.attention.query);
        out.push(&self.attention.key);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut out = vec![&mut self.table.table];
        for l in &mut self.stack.layers {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        out.push(&mut self.attention.query);
        out.push(&mut self.attention.key);
        out
    }
}
