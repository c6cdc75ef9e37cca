use std::ops::Range;

use rand::Rng;

/// Location of one tensor inside the flat parameter buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Pid {
    pub off: usize,
    pub len: usize,
}

impl Pid {
    pub fn range(self) -> Range<usize> {
        self.off..self.off + self.len
    }
}

pub(crate) enum Init {
    Zeros,
    Ones,
    /// Uniform on `[-a, a]`.
    Uniform(f32),
}

/// All trainable weights in one contiguous buffer, with a gradient buffer of
/// the same shape and a name per tensor for checkpoints.
#[derive(Debug, Clone, Default)]
pub(crate) struct ParamStore {
    pub vals: Vec<f32>,
    pub grads: Vec<f32>,
    pub names: Vec<(String, Pid)>,
}

impl ParamStore {
    pub fn alloc<R: Rng + ?Sized>(&mut self, name: String, len: usize, init: Init, rng: &mut R) -> Pid {
        let id = Pid {
            off: self.vals.len(),
            len,
        };
        match init {
            Init::Zeros => self.vals.resize(id.off + len, 0.0),
            Init::Ones => self.vals.resize(id.off + len, 1.0),
            Init::Uniform(a) => self.vals.extend((0..len).map(|_| rng.gen_range(-a..=a))),
        }
        self.grads.resize(self.vals.len(), 0.0);
        self.names.push((name, id));
        id
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn zero_grads(&mut self) {
        self.grads.fill(0.0);
    }

    pub fn grad_norm(&self) -> f64 {
        self.grads
            .iter()
            .map(|&g| (g as f64) * (g as f64))
            .sum::<f64>()
            .sqrt()
    }
}

/// Two adjacent tensors' gradient slices, e.g. a weight and the bias
/// allocated right after it.
pub(crate) fn pair_mut(grads: &mut [f32], first: Pid, second: Pid) -> (&mut [f32], &mut [f32]) {
    assert_eq!(first.off + first.len, second.off, "tensors are not adjacent");
    grads[first.off..second.off + second.len].split_at_mut(first.len)
}

#[derive(Debug, Clone)]
pub(crate) struct Adam {
    m: Vec<f32>,
    v: Vec<f32>,
    pub step: u64,
    beta1: f32,
    beta2: f32,
    eps: f32,
}

impl Adam {
    pub fn new(len: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            beta1: beta1 as f32,
            beta2: beta2 as f32,
            eps: eps as f32,
        }
    }

    /// One update with bias correction; `grad_scale` multiplies every gradient
    /// first (used for clipping).
    pub fn update(&mut self, vals: &mut [f32], grads: &[f32], lr: f64, grad_scale: f32) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - (b1 as f64).powi(self.step.min(i32::MAX as u64) as i32);
        let c2 = 1.0 - (b2 as f64).powi(self.step.min(i32::MAX as u64) as i32);
        let step = (lr * c2.sqrt() / c1) as f32;
        for (((w, &g), m), v) in vals
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            let g = g * grad_scale;
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *w -= step * *m / (v.sqrt() + self.eps);
        }
    }
}
