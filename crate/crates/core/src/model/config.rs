use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture and optimizer settings of the sequence model.
///
/// Each side is a stack of `layers` pre-norm transformer blocks whose last
/// block is applied `loops` times. With `copy_gate` on, every application of
/// the shared block is blended with its input through a learned gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub enc_dim: usize,
    pub dec_dim: usize,
    pub enc_heads: usize,
    pub dec_heads: usize,
    pub enc_loops: usize,
    pub dec_loops: usize,
    /// Hidden width of the feed-forward sublayer as a multiple of the model width.
    pub ff_mult: usize,
    pub copy_gate: bool,
    pub lr: f64,
    pub warmup_steps: u64,
    pub batch_size: usize,
    pub epoch_size: usize,
    /// Global gradient-norm clip; 0 disables clipping.
    pub grad_clip: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            enc_layers: 2,
            dec_layers: 2,
            enc_dim: 256,
            dec_dim: 128,
            enc_heads: 4,
            dec_heads: 4,
            enc_loops: 2,
            dec_loops: 2,
            ff_mult: 4,
            copy_gate: true,
            lr: 1e-3,
            warmup_steps: 1000,
            batch_size: 32,
            epoch_size: 300_000,
            grad_clip: 1.0,
            adam_beta1: 0.9,
            adam_beta2: 0.98,
            adam_eps: 1e-8,
        }
    }
}

impl ModelConfig {
    /// Configuration at the scale of the published attacks: 1024/512 wide,
    /// 16/4 heads, two layers per side with the decoder's second looped 8 times.
    pub fn full_scale() -> Self {
        Self {
            enc_dim: 1024,
            dec_dim: 512,
            enc_heads: 16,
            dec_heads: 4,
            enc_loops: 2,
            dec_loops: 8,
            lr: 1e-5,
            warmup_steps: 8000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("enc_layers", self.enc_layers),
            ("dec_layers", self.dec_layers),
            ("enc_dim", self.enc_dim),
            ("dec_dim", self.dec_dim),
            ("enc_heads", self.enc_heads),
            ("dec_heads", self.dec_heads),
            ("enc_loops", self.enc_loops),
            ("dec_loops", self.dec_loops),
            ("ff_mult", self.ff_mult),
            ("batch_size", self.batch_size),
            ("epoch_size", self.epoch_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("model.{name} must be positive")));
            }
        }
        if self.enc_dim % self.enc_heads != 0 || self.dec_dim % self.dec_heads != 0 {
            return Err(Error::Config(
                "model widths must be divisible by their head counts".into(),
            ));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config("model.lr must be positive".into()));
        }
        if !(self.grad_clip.is_finite() && self.grad_clip >= 0.0) {
            return Err(Error::Config("model.grad_clip must be >= 0".into()));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("model.{name} must lie in [0, 1)")));
            }
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::Config("model.adam_eps must be positive".into()));
        }
        Ok(())
    }

    /// Learning rate at optimizer step `step` (1-based): linear warmup, then
    /// inverse square-root decay.
    pub fn lr_at(&self, step: u64) -> f64 {
        let t = step.max(1) as f64;
        let w = self.warmup_steps as f64;
        if self.warmup_steps == 0 {
            return self.lr;
        }
        self.lr * (t / w).min((w / t).sqrt())
    }
}
