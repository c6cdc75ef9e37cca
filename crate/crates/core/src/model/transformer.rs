//! Encoder-decoder transformer with a looped, optionally gated, last layer on
//! each side. Forward passes return caches consumed by the matching backward
//! pass; gradients accumulate into [`ParamStore::grads`].

use rand::Rng;

use super::config::ModelConfig;
use super::ops::{
    argmax, attention_backward, attention_forward, cross_entropy, gelu, gelu_grad,
    layer_norm_backward, layer_norm_forward, linear_backward, linear_forward, sigmoid, Segments,
};
use super::params::{pair_mut, Init, ParamStore, Pid};

#[derive(Debug, Clone, Copy)]
struct Linear {
    w: Pid,
    b: Pid,
    dout: usize,
}

impl Linear {
    fn new<R: Rng + ?Sized>(ps: &mut ParamStore, name: &str, din: usize, dout: usize, rng: &mut R) -> Self {
        Self::scaled(ps, name, din, dout, 1.0, rng)
    }

    /// Xavier-uniform weights multiplied by `gain`, zero bias.
    fn scaled<R: Rng + ?Sized>(
        ps: &mut ParamStore,
        name: &str,
        din: usize,
        dout: usize,
        gain: f32,
        rng: &mut R,
    ) -> Self {
        let a = gain * (6.0 / (din + dout) as f32).sqrt();
        let w = ps.alloc(format!("{name}.weight"), din * dout, Init::Uniform(a), rng);
        let b = ps.alloc(format!("{name}.bias"), dout, Init::Zeros, rng);
        Self { w, b, dout }
    }

    fn forward(&self, vals: &[f32], x: &[f32], rows: usize) -> Vec<f32> {
        let mut y = vec![0.0; rows * self.dout];
        linear_forward(x, &vals[self.w.range()], &vals[self.b.range()], rows, &mut y);
        y
    }

    fn backward(&self, vals: &[f32], grads: &mut [f32], x: &[f32], rows: usize, dy: &[f32], dx: Option<&mut [f32]>) {
        let (dw, db) = pair_mut(grads, self.w, self.b);
        linear_backward(x, &vals[self.w.range()], rows, dy, dw, db, dx);
    }
}

#[derive(Debug, Clone, Copy)]
struct Norm {
    g: Pid,
    b: Pid,
    d: usize,
}

struct NormCache {
    xhat: Vec<f32>,
    rstd: Vec<f32>,
}

impl Norm {
    fn new<R: Rng + ?Sized>(ps: &mut ParamStore, name: &str, d: usize, rng: &mut R) -> Self {
        let g = ps.alloc(format!("{name}.gain"), d, Init::Ones, rng);
        let b = ps.alloc(format!("{name}.bias"), d, Init::Zeros, rng);
        Self { g, b, d }
    }

    fn forward(&self, vals: &[f32], x: &[f32]) -> (Vec<f32>, NormCache) {
        let rows = x.len() / self.d;
        let mut y = vec![0.0; x.len()];
        let mut c = NormCache {
            xhat: vec![0.0; x.len()],
            rstd: vec![0.0; rows],
        };
        layer_norm_forward(
            x,
            &vals[self.g.range()],
            &vals[self.b.range()],
            &mut y,
            &mut c.xhat,
            &mut c.rstd,
        );
        (y, c)
    }

    fn backward(&self, vals: &[f32], grads: &mut [f32], c: &NormCache, dy: &[f32], dx: &mut [f32]) {
        let (dg, db) = pair_mut(grads, self.g, self.b);
        layer_norm_backward(dy, &vals[self.g.range()], &c.xhat, &c.rstd, dg, db, dx);
    }
}

#[derive(Debug, Clone, Copy)]
struct Attention {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
    d: usize,
    heads: usize,
}

struct AttnCache {
    q: Vec<f32>,
    k: Vec<f32>,
    v: Vec<f32>,
    probs: Vec<f32>,
    ctx: Vec<f32>,
}

impl Attention {
    fn new<R: Rng + ?Sized>(
        ps: &mut ParamStore,
        name: &str,
        d: usize,
        kv_in: usize,
        heads: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            q: Linear::new(ps, &format!("{name}.q"), d, d, rng),
            k: Linear::new(ps, &format!("{name}.k"), kv_in, d, rng),
            v: Linear::new(ps, &format!("{name}.v"), kv_in, d, rng),
            o: Linear::new(ps, &format!("{name}.o"), d, d, rng),
            d,
            heads,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn forward(
        &self,
        vals: &[f32],
        xq: &[f32],
        qs: &Segments,
        xkv: &[f32],
        ks: &Segments,
        causal: bool,
    ) -> (Vec<f32>, AttnCache) {
        let (rq, rk) = (qs.total(), ks.total());
        let q = self.q.forward(vals, xq, rq);
        let k = self.k.forward(vals, xkv, rk);
        let v = self.v.forward(vals, xkv, rk);
        let mut ctx = vec![0.0; rq * self.d];
        let mut probs = Vec::new();
        attention_forward(&q, &k, &v, self.d, self.heads, qs, ks, causal, &mut probs, &mut ctx);
        let out = self.o.forward(vals, &ctx, rq);
        (out, AttnCache { q, k, v, probs, ctx })
    }

    /// Adds input gradients into `dxq` and `dxkv`; with `dxkv == None` the
    /// key/value source is the query source and everything lands in `dxq`.
    #[allow(clippy::too_many_arguments)]
    fn backward(
        &self,
        vals: &[f32],
        grads: &mut [f32],
        c: &AttnCache,
        xq: &[f32],
        qs: &Segments,
        xkv: &[f32],
        ks: &Segments,
        dout: &[f32],
        dxq: &mut [f32],
        dxkv: Option<&mut [f32]>,
    ) {
        let (rq, rk) = (qs.total(), ks.total());
        let d = self.d;
        let mut dctx = vec![0.0; rq * d];
        self.o.backward(vals, grads, &c.ctx, rq, dout, Some(&mut dctx));
        let mut dq = vec![0.0; rq * d];
        let mut dk = vec![0.0; rk * d];
        let mut dv = vec![0.0; rk * d];
        attention_backward(
            &c.q, &c.k, &c.v, d, self.heads, qs, ks, &c.probs, &dctx, &mut dq, &mut dk, &mut dv,
        );
        self.q.backward(vals, grads, xq, rq, &dq, Some(dxq));
        match dxkv {
            Some(dxkv) => {
                self.k.backward(vals, grads, xkv, rk, &dk, Some(dxkv));
                self.v.backward(vals, grads, xkv, rk, &dv, Some(dxkv));
            }
            None => {
                self.k.backward(vals, grads, xkv, rk, &dk, Some(dxq));
                self.v.backward(vals, grads, xkv, rk, &dv, Some(dxq));
            }
        }
    }
}

/// Encoder-side memory visible to decoder cross-attention.
#[derive(Clone, Copy)]
struct Memory<'a> {
    x: &'a [f32],
    segs: &'a Segments,
}

#[derive(Debug, Clone)]
struct Block {
    ln1: Norm,
    attn: Attention,
    cross: Option<(Norm, Attention)>,
    ln2: Norm,
    ff1: Linear,
    ff2: Linear,
    causal: bool,
}

struct BlockCache {
    ln1: NormCache,
    a: Vec<f32>,
    attn: AttnCache,
    cross: Option<(NormCache, Vec<f32>, AttnCache)>,
    ln2: NormCache,
    f: Vec<f32>,
    h: Vec<f32>,
    g: Vec<f32>,
}

impl Block {
    fn new<R: Rng + ?Sized>(
        ps: &mut ParamStore,
        name: &str,
        d: usize,
        heads: usize,
        ff: usize,
        cross_from: Option<usize>,
        rng: &mut R,
    ) -> Self {
        Self {
            ln1: Norm::new(ps, &format!("{name}.ln_self"), d, rng),
            attn: Attention::new(ps, &format!("{name}.self"), d, d, heads, rng),
            cross: cross_from.map(|src| {
                (
                    Norm::new(ps, &format!("{name}.ln_cross"), d, rng),
                    Attention::new(ps, &format!("{name}.cross"), d, src, heads, rng),
                )
            }),
            ln2: Norm::new(ps, &format!("{name}.ln_ff"), d, rng),
            ff1: Linear::new(ps, &format!("{name}.ff_in"), d, ff, rng),
            ff2: Linear::new(ps, &format!("{name}.ff_out"), ff, d, rng),
            causal: cross_from.is_some(),
        }
    }

    fn forward(&self, vals: &[f32], x: &[f32], segs: &Segments, mem: Option<Memory<'_>>) -> (Vec<f32>, BlockCache) {
        let rows = segs.total();
        let (a, ln1) = self.ln1.forward(vals, x);
        let (sa, attn) = self.attn.forward(vals, &a, segs, &a, segs, self.causal);
        let mut x1: Vec<f32> = x.iter().zip(&sa).map(|(u, v)| u + v).collect();
        let cross = match (&self.cross, mem) {
            (Some((ln, at)), Some(mem)) => {
                let (c, lc) = ln.forward(vals, &x1);
                let (ca, acache) = at.forward(vals, &c, segs, mem.x, mem.segs, false);
                for (u, v) in x1.iter_mut().zip(&ca) {
                    *u += v;
                }
                Some((lc, c, acache))
            }
            (None, None) => None,
            _ => panic!("cross-attention needs encoder memory"),
        };
        let (f, ln2) = self.ln2.forward(vals, &x1);
        let h = self.ff1.forward(vals, &f, rows);
        let g: Vec<f32> = h.iter().map(|&v| gelu(v)).collect();
        let out = self.ff2.forward(vals, &g, rows);
        for (u, v) in x1.iter_mut().zip(&out) {
            *u += v;
        }
        (
            x1,
            BlockCache {
                ln1,
                a,
                attn,
                cross,
                ln2,
                f,
                h,
                g,
            },
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn backward(
        &self,
        vals: &[f32],
        grads: &mut [f32],
        c: &BlockCache,
        segs: &Segments,
        mem: Option<Memory<'_>>,
        dy: &[f32],
        dmem: Option<&mut [f32]>,
    ) -> Vec<f32> {
        let rows = segs.total();
        // feed-forward sublayer
        let mut dg = vec![0.0; c.g.len()];
        self.ff2.backward(vals, grads, &c.g, rows, dy, Some(&mut dg));
        for (d, &h) in dg.iter_mut().zip(&c.h) {
            *d *= gelu_grad(h);
        }
        let mut df = vec![0.0; c.f.len()];
        self.ff1.backward(vals, grads, &c.f, rows, &dg, Some(&mut df));
        let mut dx1 = dy.to_vec();
        self.ln2.backward(vals, grads, &c.ln2, &df, &mut dx1);
        // cross-attention sublayer
        if let (Some((ln, at)), Some((lc, cin, acache)), Some(mem), Some(dmem)) =
            (&self.cross, &c.cross, mem, dmem)
        {
            let mut dc = vec![0.0; cin.len()];
            at.backward(vals, grads, acache, cin, segs, mem.x, mem.segs, &dx1, &mut dc, Some(dmem));
            ln.backward(vals, grads, lc, &dc, &mut dx1);
        }
        // self-attention sublayer
        let mut da = vec![0.0; c.a.len()];
        self.attn
            .backward(vals, grads, &c.attn, &c.a, segs, &c.a, segs, &dx1, &mut da, None);
        let mut dx = dx1;
        self.ln1.backward(vals, grads, &c.ln1, &da, &mut dx);
        dx
    }
}

struct GateCache {
    x: Vec<f32>,
    y: Vec<f32>,
    g: Vec<f32>,
}

struct StepCache {
    block: BlockCache,
    gate: Option<GateCache>,
}

/// `layers` blocks; the last one is applied `loops` times.
#[derive(Debug, Clone)]
struct Stack {
    blocks: Vec<Block>,
    loops: usize,
    gate: Option<Linear>,
}

impl Stack {
    fn schedule(&self) -> Vec<usize> {
        let last = self.blocks.len() - 1;
        (0..last).chain(std::iter::repeat_n(last, self.loops)).collect()
    }

    fn forward(
        &self,
        vals: &[f32],
        mut x: Vec<f32>,
        segs: &Segments,
        mem: Option<Memory<'_>>,
    ) -> (Vec<f32>, Vec<StepCache>) {
        let rows = segs.total();
        let last = self.blocks.len() - 1;
        let mut caches = Vec::new();
        for idx in self.schedule() {
            let (y, block) = self.blocks[idx].forward(vals, &x, segs, mem);
            match (&self.gate, idx == last) {
                (Some(gate), true) => {
                    let z = gate.forward(vals, &y, rows);
                    let g: Vec<f32> = z.iter().map(|&v| sigmoid(v)).collect();
                    let out: Vec<f32> = g
                        .iter()
                        .zip(y.iter().zip(&x))
                        .map(|(&g, (&y, &x))| g * y + (1.0 - g) * x)
                        .collect();
                    caches.push(StepCache {
                        block,
                        gate: Some(GateCache { x, y, g }),
                    });
                    x = out;
                }
                _ => {
                    caches.push(StepCache { block, gate: None });
                    x = y;
                }
            }
        }
        (x, caches)
    }

    #[allow(clippy::too_many_arguments)]
    fn backward(
        &self,
        vals: &[f32],
        grads: &mut [f32],
        caches: &[StepCache],
        segs: &Segments,
        mem: Option<Memory<'_>>,
        mut dout: Vec<f32>,
        mut dmem: Option<&mut [f32]>,
    ) -> Vec<f32> {
        let rows = segs.total();
        for (idx, c) in self.schedule().into_iter().zip(caches).rev() {
            let (dy, dskip) = match (&self.gate, &c.gate) {
                (Some(gate), Some(gc)) => {
                    let mut dy: Vec<f32> = dout.iter().zip(&gc.g).map(|(d, g)| d * g).collect();
                    let dskip: Vec<f32> = dout.iter().zip(&gc.g).map(|(d, g)| d * (1.0 - g)).collect();
                    let dz: Vec<f32> = dout
                        .iter()
                        .zip(gc.g.iter().zip(gc.y.iter().zip(&gc.x)))
                        .map(|(d, (g, (y, x)))| d * (y - x) * g * (1.0 - g))
                        .collect();
                    gate.backward(vals, grads, &gc.y, rows, &dz, Some(&mut dy));
                    (dy, Some(dskip))
                }
                _ => (dout, None),
            };
            let mut dx = self.blocks[idx].backward(vals, grads, &c.block, segs, mem, &dy, dmem.as_deref_mut());
            if let Some(dskip) = dskip {
                for (u, v) in dx.iter_mut().zip(&dskip) {
                    *u += v;
                }
            }
            dout = dx;
        }
        dout
    }
}

#[derive(Debug, Clone, Copy)]
struct Embedding {
    tok: Pid,
    pos: Pid,
    d: usize,
    max_len: usize,
}

impl Embedding {
    fn new<R: Rng + ?Sized>(ps: &mut ParamStore, name: &str, vocab: usize, max_len: usize, d: usize, rng: &mut R) -> Self {
        let a = (3.0 / d as f32).sqrt();
        let tok = ps.alloc(format!("{name}.tokens"), vocab * d, Init::Uniform(a), rng);
        let pos = ps.alloc(format!("{name}.positions"), max_len * d, Init::Uniform(a), rng);
        Self { tok, pos, d, max_len }
    }

    fn forward(&self, vals: &[f32], ids: &[u32], segs: &Segments) -> Vec<f32> {
        let d = self.d;
        let tok = &vals[self.tok.range()];
        let pos = &vals[self.pos.range()];
        let mut x = vec![0.0; ids.len() * d];
        for ((row, &id), p) in x.chunks_exact_mut(d).zip(ids).zip(segs.positions()) {
            assert!(p < self.max_len, "sequence longer than the model's position table");
            let t = &tok[id as usize * d..(id as usize + 1) * d];
            let e = &pos[p * d..(p + 1) * d];
            for j in 0..d {
                row[j] = t[j] + e[j];
            }
        }
        x
    }

    fn backward(&self, grads: &mut [f32], ids: &[u32], segs: &Segments, dx: &[f32]) {
        let d = self.d;
        for ((row, &id), p) in dx.chunks_exact(d).zip(ids).zip(segs.positions()) {
            let t = self.tok.off + id as usize * d;
            let e = self.pos.off + p * d;
            for j in 0..d {
                grads[t + j] += row[j];
                grads[e + j] += row[j];
            }
        }
    }
}

/// Token ids for one batch, laid out as ragged segments.
#[derive(Debug, Clone, Default)]
pub(crate) struct Batch {
    pub enc_ids: Vec<u32>,
    pub enc_segs: Segments,
    pub dec_ids: Vec<u32>,
    pub dec_segs: Segments,
    pub targets: Vec<u32>,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct StepStats {
    pub loss_sum: f64,
    pub tokens: usize,
    pub correct: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Net {
    enc_emb: Embedding,
    dec_emb: Embedding,
    enc: Stack,
    dec: Stack,
    enc_norm: Norm,
    dec_norm: Norm,
    out: Linear,
    vocab: usize,
}

/// Encoder output for a batch, reused across decoding steps.
pub(crate) struct Encoded {
    x: Vec<f32>,
    segs: Segments,
}

impl Net {
    pub fn new<R: Rng + ?Sized>(
        cfg: &ModelConfig,
        vocab: usize,
        max_in: usize,
        max_out: usize,
        rng: &mut R,
    ) -> (Self, ParamStore) {
        let mut ps = ParamStore::default();
        let (de, dd) = (cfg.enc_dim, cfg.dec_dim);
        let enc_emb = Embedding::new(&mut ps, "encoder.embed", vocab, max_in, de, rng);
        let dec_emb = Embedding::new(&mut ps, "decoder.embed", vocab, max_out, dd, rng);
        let enc_blocks = (0..cfg.enc_layers)
            .map(|i| Block::new(&mut ps, &format!("encoder.layer{i}"), de, cfg.enc_heads, de * cfg.ff_mult, None, rng))
            .collect();
        let dec_blocks = (0..cfg.dec_layers)
            .map(|i| {
                Block::new(&mut ps, &format!("decoder.layer{i}"), dd, cfg.dec_heads, dd * cfg.ff_mult, Some(de), rng)
            })
            .collect();
        let enc_gate = cfg.copy_gate.then(|| Linear::new(&mut ps, "encoder.gate", de, de, rng));
        let dec_gate = cfg.copy_gate.then(|| Linear::new(&mut ps, "decoder.gate", dd, dd, rng));
        let enc_norm = Norm::new(&mut ps, "encoder.ln_out", de, rng);
        let dec_norm = Norm::new(&mut ps, "decoder.ln_out", dd, rng);
        // small output weights start the model near the uniform distribution
        let out = Linear::scaled(&mut ps, "decoder.proj", dd, vocab, 0.1, rng);
        let net = Self {
            enc_emb,
            dec_emb,
            enc: Stack {
                blocks: enc_blocks,
                loops: cfg.enc_loops,
                gate: enc_gate,
            },
            dec: Stack {
                blocks: dec_blocks,
                loops: cfg.dec_loops,
                gate: dec_gate,
            },
            enc_norm,
            dec_norm,
            out,
            vocab,
        };
        (net, ps)
    }

    pub fn max_output_len(&self) -> usize {
        self.dec_emb.max_len
    }

    /// Forward and backward over one batch. Gradients are added to
    /// `ps.grads`; the loss is the mean over target tokens.
    pub fn accumulate_grads(&self, ps: &mut ParamStore, batch: &Batch) -> StepStats {
        let vals = &ps.vals;
        let grads = &mut ps.grads;
        let es = &batch.enc_segs;
        let ds = &batch.dec_segs;

        let x = self.enc_emb.forward(vals, &batch.enc_ids, es);
        let (h, enc_caches) = self.enc.forward(vals, x, es, None);
        let (mem, enc_ln) = self.enc_norm.forward(vals, &h);
        let memory = Memory { x: &mem, segs: es };

        let y = self.dec_emb.forward(vals, &batch.dec_ids, ds);
        let (hd, dec_caches) = self.dec.forward(vals, y, ds, Some(memory));
        let (z, dec_ln) = self.dec_norm.forward(vals, &hd);
        let rows = ds.total();
        let logits = self.out.forward(vals, &z, rows);

        let mut dlogits = vec![0.0; logits.len()];
        let (loss_sum, correct) = cross_entropy(&logits, &batch.targets, self.vocab, &mut dlogits);

        let mut dz = vec![0.0; z.len()];
        self.out.backward(vals, grads, &z, rows, &dlogits, Some(&mut dz));
        let mut dhd = vec![0.0; hd.len()];
        self.dec_norm.backward(vals, grads, &dec_ln, &dz, &mut dhd);
        let mut dmem = vec![0.0; mem.len()];
        let dy = self
            .dec
            .backward(vals, grads, &dec_caches, ds, Some(memory), dhd, Some(&mut dmem));
        self.dec_emb.backward(grads, &batch.dec_ids, ds, &dy);

        let mut dh = vec![0.0; h.len()];
        self.enc_norm.backward(vals, grads, &enc_ln, &dmem, &mut dh);
        let dx = self.enc.backward(vals, grads, &enc_caches, es, None, dh, None);
        self.enc_emb.backward(grads, &batch.enc_ids, es, &dx);

        StepStats {
            loss_sum,
            tokens: rows,
            correct,
        }
    }

    /// Mean token loss without touching gradients.
    pub fn loss(&self, vals: &[f32], batch: &Batch) -> f64 {
        let enc = self.encode(vals, &batch.enc_ids, batch.enc_segs.clone());
        let logits = self.decoder_logits(vals, &enc, &batch.dec_ids, &batch.dec_segs);
        let mut scratch = vec![0.0; logits.len()];
        let (sum, _) = cross_entropy(&logits, &batch.targets, self.vocab, &mut scratch);
        sum / batch.targets.len() as f64
    }

    pub fn encode(&self, vals: &[f32], ids: &[u32], segs: Segments) -> Encoded {
        let x = self.enc_emb.forward(vals, ids, &segs);
        let (h, _) = self.enc.forward(vals, x, &segs, None);
        let (x, _) = self.enc_norm.forward(vals, &h);
        Encoded { x, segs }
    }

    /// Logits for every decoder position.
    pub fn decoder_logits(&self, vals: &[f32], enc: &Encoded, ids: &[u32], segs: &Segments) -> Vec<f32> {
        let memory = Memory {
            x: &enc.x,
            segs: &enc.segs,
        };
        let y = self.dec_emb.forward(vals, ids, segs);
        let (hd, _) = self.dec.forward(vals, y, segs, Some(memory));
        let (z, _) = self.dec_norm.forward(vals, &hd);
        self.out.forward(vals, &z, segs.total())
    }

    /// Greedy decoding for a batch of encoded inputs. Each output starts with
    /// `bos`; generation stops at `eos` or after `max_steps` tokens. Returns
    /// the generated tokens (without `bos`) per example.
    pub fn greedy(&self, vals: &[f32], enc: &Encoded, bos: u32, eos: u32, max_steps: usize) -> Vec<Vec<u32>> {
        let count = enc.segs.count();
        let mut out: Vec<Vec<u32>> = vec![Vec::new(); count];
        let mut done = vec![false; count];
        let steps = max_steps.min(self.max_output_len());
        for _ in 0..steps {
            if done.iter().all(|&d| d) {
                break;
            }
            // every example is decoded each step so the batch keeps its shape
            let segs = Segments::from_lengths(out.iter().map(|o| o.len() + 1));
            let mut ids = Vec::with_capacity(segs.total());
            for o in &out {
                ids.push(bos);
                ids.extend_from_slice(o);
            }
            let logits = self.decoder_logits(vals, enc, &ids, &segs);
            for e in 0..count {
                if done[e] {
                    continue;
                }
                let last = segs.start[e] + segs.len[e] - 1;
                let tok = argmax(&logits[last * self.vocab..(last + 1) * self.vocab]) as u32;
                out[e].push(tok);
                if tok == eos {
                    done[e] = true;
                }
            }
        }
        out
    }

    pub fn param_names(ps: &ParamStore) -> impl Iterator<Item = (&str, Pid)> {
        ps.names.iter().map(|(n, p)| (n.as_str(), *p))
    }
}
