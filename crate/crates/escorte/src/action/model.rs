use crate::numcore::{Checkpoint, CheckpointError, Matrix, NodeId, NumError, Rng, Tape};

use super::buffer::WindowBuffer;
use super::{ActionPrediction, ActionState};

/// Exactly three action classes.
pub const NUM_CLASSES: usize = 3;
/// Fixed encoder depth.
pub const NUM_LAYERS: usize = 4;
const LN_EPS: f64 = 1e-5;

/// One pre-norm transformer encoder layer. Projections and feed-forward
/// matrices are bias-free; the normalizations carry learned scale/offset.
#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub wo: Matrix,
    pub ff1: Matrix,
    pub ff2: Matrix,
    pub ln1_scale: Matrix,
    pub ln1_offset: Matrix,
    pub ln2_scale: Matrix,
    pub ln2_offset: Matrix,
}

impl EncoderLayer {
    fn init(d: usize, ff: usize, rng: &mut Rng) -> Self {
        let sd = 1.0 / (d as f64).sqrt();
        let sf = 1.0 / (ff as f64).sqrt();
        EncoderLayer {
            wq: rng.uniform_matrix(d, d, -sd, sd),
            wk: rng.uniform_matrix(d, d, -sd, sd),
            wv: rng.uniform_matrix(d, d, -sd, sd),
            wo: rng.uniform_matrix(d, d, -sd, sd),
            ff1: rng.uniform_matrix(d, ff, -sd, sd),
            ff2: rng.uniform_matrix(ff, d, -sf, sf),
            ln1_scale: Matrix::filled(1, d, 1.0),
            ln1_offset: Matrix::zeros(1, d),
            ln2_scale: Matrix::filled(1, d, 1.0),
            ln2_offset: Matrix::zeros(1, d),
        }
    }
}

/// The windowed action classifier: four encoder layers over the buffered
/// subject vectors, attention pooling into a single vector, then a linear
/// pooling layer with ReLU and a three-way classification layer. A fixed
/// sinusoidal positional table is added to the inputs — without it the
/// pipeline is nearly permutation-invariant over the window and cannot tell
/// a growing gap from a shrinking one.
#[derive(Debug, Clone)]
pub struct ActionModel {
    pub window: usize,
    pub dim: usize,
    pub heads: usize,
    pub ff_width: usize,
    pub layers: Vec<EncoderLayer>,
    /// Attention-pool vector A (d x 1).
    pub attn_a: Matrix,
    /// Pooling layer (d -> d).
    pub pool_w: Matrix,
    /// Classification layer (d -> 3).
    pub cls_w: Matrix,
    /// Positional encoding table (w x d), fixed, not trained.
    pub pos: Matrix,
}

impl ActionModel {
    pub fn init(window: usize, dim: usize, heads: usize, ff_width: usize, rng: &mut Rng) -> Self {
        assert!(heads > 0 && dim % heads == 0, "dim must divide into heads");
        let sd = 1.0 / (dim as f64).sqrt();
        ActionModel {
            window,
            dim,
            heads,
            ff_width,
            layers: (0..NUM_LAYERS)
                .map(|_| EncoderLayer::init(dim, ff_width, rng))
                .collect(),
            attn_a: rng.uniform_matrix(dim, 1, -sd, sd),
            pool_w: rng.uniform_matrix(dim, dim, -sd, sd),
            cls_w: rng.uniform_matrix(dim, NUM_CLASSES, -sd, sd),
            pos: sinusoidal_table(window, dim),
        }
    }

    /// Flat parameter list in a fixed order (positional table excluded).
    pub fn params(&self) -> Vec<Matrix> {
        let mut out = Vec::with_capacity(self.layers.len() * 10 + 3);
        for l in &self.layers {
            out.extend_from_slice(&[
                l.wq.clone(),
                l.wk.clone(),
                l.wv.clone(),
                l.wo.clone(),
                l.ff1.clone(),
                l.ff2.clone(),
                l.ln1_scale.clone(),
                l.ln1_offset.clone(),
                l.ln2_scale.clone(),
                l.ln2_offset.clone(),
            ]);
        }
        out.push(self.attn_a.clone());
        out.push(self.pool_w.clone());
        out.push(self.cls_w.clone());
        out
    }

    pub fn set_params(&mut self, params: Vec<Matrix>) {
        assert_eq!(params.len(), self.layers.len() * 10 + 3);
        let mut it = params.into_iter();
        for l in &mut self.layers {
            l.wq = it.next().unwrap();
            l.wk = it.next().unwrap();
            l.wv = it.next().unwrap();
            l.wo = it.next().unwrap();
            l.ff1 = it.next().unwrap();
            l.ff2 = it.next().unwrap();
            l.ln1_scale = it.next().unwrap();
            l.ln1_offset = it.next().unwrap();
            l.ln2_scale = it.next().unwrap();
            l.ln2_offset = it.next().unwrap();
        }
        self.attn_a = it.next().unwrap();
        self.pool_w = it.next().unwrap();
        self.cls_w = it.next().unwrap();
    }

    pub(crate) fn register_params(&self, tape: &mut Tape) -> Vec<NodeId> {
        self.params().into_iter().map(|p| tape.param(p)).collect()
    }

    /// Record the full forward pass: encoder stack, masked attention pooling,
    /// pooling layer with ReLU, classifier. Returns `(H, logits)` node ids.
    pub(crate) fn forward_nodes(
        &self,
        tape: &mut Tape,
        param_ids: &[NodeId],
        input: NodeId,
        mask: &[bool],
    ) -> Result<(NodeId, NodeId), NumError> {
        let head_dim = self.dim / self.heads;
        let pos = tape.constant(self.pos.clone());
        let mut x = tape.add(input, pos)?;

        for (li, _) in self.layers.iter().enumerate() {
            let p = &param_ids[li * 10..(li + 1) * 10];
            let [wq, wk, wv, wo, ff1, ff2, ln1_s, ln1_o, ln2_s, ln2_o] =
                [p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8], p[9]];

            // Pre-norm attention block.
            let n1 = tape.row_normalize(x, LN_EPS);
            let n1 = tape.mul_row_vec(n1, ln1_s)?;
            let n1 = tape.add_row_vec(n1, ln1_o)?;
            let q = tape.matmul(n1, wq)?;
            let k = tape.matmul(n1, wk)?;
            let v = tape.matmul(n1, wv)?;
            let mut heads = Vec::with_capacity(self.heads);
            for h in 0..self.heads {
                let qh = tape.slice_cols(q, h * head_dim, head_dim);
                let kh = tape.slice_cols(k, h * head_dim, head_dim);
                let vh = tape.slice_cols(v, h * head_dim, head_dim);
                let kt = tape.transpose(kh);
                let scores = tape.matmul(qh, kt)?;
                let scaled = tape.scale(scores, 1.0 / (head_dim as f64).sqrt());
                let probs = tape.masked_row_softmax(scaled, mask)?;
                heads.push(tape.matmul(probs, vh)?);
            }
            let concat = tape.concat_cols(&heads);
            let attn_out = tape.matmul(concat, wo)?;
            let x2 = tape.add(x, attn_out)?;

            // Pre-norm feed-forward block.
            let n2 = tape.row_normalize(x2, LN_EPS);
            let n2 = tape.mul_row_vec(n2, ln2_s)?;
            let n2 = tape.add_row_vec(n2, ln2_o)?;
            let f = tape.matmul(n2, ff1)?;
            let f = tape.relu(f);
            let f = tape.matmul(f, ff2)?;
            x = tape.add(x2, f)?;
        }

        // Masked attention pooling over the window.
        let base = self.layers.len() * 10;
        let (attn_a, pool_w, cls_w) = (param_ids[base], param_ids[base + 1], param_ids[base + 2]);
        let b = tape.matmul(x, attn_a)?;
        let bt = tape.transpose(b);
        let ct = tape.masked_row_softmax(bt, mask)?;
        let u = tape.matmul(ct, x)?; // 1 x d == (Hᵀ C)ᵀ

        let pooled = tape.matmul(u, pool_w)?;
        let pooled = tape.relu(pooled);
        let logits = tape.matmul(pooled, cls_w)?;
        Ok((x, logits))
    }

    /// Encoder output `H` (`w x d`) for a full buffer; `None` while the
    /// buffer is underfull (caller waits).
    pub fn transformer_forward(&self, buffer: &WindowBuffer) -> Result<Option<Matrix>, NumError> {
        let Some((input, mask)) = buffer.as_input() else {
            return Ok(None);
        };
        self.forward_window(&input, &mask).map(|(h, _)| Some(h))
    }

    /// Forward a raw `w x d` window with its mask; returns `(H, probs)`.
    pub fn forward_window(
        &self,
        input: &Matrix,
        mask: &[bool],
    ) -> Result<(Matrix, [f64; 3]), NumError> {
        if input.rows() != self.window || input.cols() != self.dim {
            return Err(NumError::BadShape {
                op: "forward_window",
                expected: "window x dim input",
                rows: input.rows(),
                cols: input.cols(),
            });
        }
        let mut tape = Tape::new();
        let ids = self.register_params(&mut tape);
        let inp = tape.constant(input.clone());
        let (h, logits) = self.forward_nodes(&mut tape, &ids, inp, mask)?;
        let probs_m = tape.value(logits).row_softmax();
        let probs = [probs_m.get(0, 0), probs_m.get(0, 1), probs_m.get(0, 2)];
        Ok((tape.value(h).clone(), probs))
    }

    /// Classify from a full buffer; `None` while underfull.
    pub fn predict(
        &self,
        buffer: &WindowBuffer,
        frame: usize,
    ) -> Result<Option<ActionPrediction>, NumError> {
        let Some((input, mask)) = buffer.as_input() else {
            return Ok(None);
        };
        let (_, probs) = self.forward_window(&input, &mask)?;
        Ok(Some(ActionPrediction::from_probs(probs, frame)))
    }

    /// Classify a pooled vector `u` of length `d` — softmax of the
    /// classification layer applied to `relu(pool(u))`.
    pub fn classify(&self, u: &[f64]) -> Result<ActionPrediction, NumError> {
        let x = Matrix::row(u)?;
        let pooled = x.matmul(&self.pool_w)?.relu();
        let logits = pooled.matmul(&self.cls_w)?;
        let probs_m = logits.row_softmax();
        let probs = [probs_m.get(0, 0), probs_m.get(0, 1), probs_m.get(0, 2)];
        Ok(ActionPrediction::from_probs(probs, 0))
    }

    /// Online detection over a chronological stream of per-frame subject
    /// vectors (`None` = subject absent). The first prediction appears once
    /// `w` frames have been seen, then one per frame; each prediction
    /// depends only on frames up to its own index.
    pub fn detect_stream(
        &self,
        stream: &[Option<Vec<f64>>],
    ) -> Result<Vec<ActionPrediction>, NumError> {
        let mut buffer = WindowBuffer::new(self.window, self.dim);
        let mut out = Vec::new();
        for (i, item) in stream.iter().enumerate() {
            buffer.push(item.as_deref())?;
            if let Some(pred) = self.predict(&buffer, i)? {
                out.push(pred);
            }
        }
        Ok(out)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(
            "action",
            vec![
                self.window as u32,
                self.dim as u32,
                self.heads as u32,
                self.ff_width as u32,
            ],
        );
        for (i, l) in self.layers.iter().enumerate() {
            ck.push(&format!("l{i}_wq"), l.wq.clone());
            ck.push(&format!("l{i}_wk"), l.wk.clone());
            ck.push(&format!("l{i}_wv"), l.wv.clone());
            ck.push(&format!("l{i}_wo"), l.wo.clone());
            ck.push(&format!("l{i}_ff1"), l.ff1.clone());
            ck.push(&format!("l{i}_ff2"), l.ff2.clone());
            ck.push(&format!("l{i}_ln1_scale"), l.ln1_scale.clone());
            ck.push(&format!("l{i}_ln1_offset"), l.ln1_offset.clone());
            ck.push(&format!("l{i}_ln2_scale"), l.ln2_scale.clone());
            ck.push(&format!("l{i}_ln2_offset"), l.ln2_offset.clone());
        }
        ck.push("attn_a", self.attn_a.clone());
        ck.push("pool_w", self.pool_w.clone());
        ck.push("cls_w", self.cls_w.clone());
        ck.push("pos", self.pos.clone());
        ck
    }

    pub fn from_checkpoint(mut ck: Checkpoint) -> Result<Self, CheckpointError> {
        ck.expect_kind("action")?;
        let dims = ck.dims.clone();
        if dims.len() < 4 {
            return Err(CheckpointError::MissingBlock("dims".into()));
        }
        let (window, dim, heads, ff_width) = (
            dims[0] as usize,
            dims[1] as usize,
            dims[2] as usize,
            dims[3] as usize,
        );
        let mut layers = Vec::with_capacity(NUM_LAYERS);
        for i in 0..NUM_LAYERS {
            layers.push(EncoderLayer {
                wq: ck.take(&format!("l{i}_wq"))?,
                wk: ck.take(&format!("l{i}_wk"))?,
                wv: ck.take(&format!("l{i}_wv"))?,
                wo: ck.take(&format!("l{i}_wo"))?,
                ff1: ck.take(&format!("l{i}_ff1"))?,
                ff2: ck.take(&format!("l{i}_ff2"))?,
                ln1_scale: ck.take(&format!("l{i}_ln1_scale"))?,
                ln1_offset: ck.take(&format!("l{i}_ln1_offset"))?,
                ln2_scale: ck.take(&format!("l{i}_ln2_scale"))?,
                ln2_offset: ck.take(&format!("l{i}_ln2_offset"))?,
            });
        }
        Ok(ActionModel {
            window,
            dim,
            heads,
            ff_width,
            layers,
            attn_a: ck.take("attn_a")?,
            pool_w: ck.take("pool_w")?,
            cls_w: ck.take("cls_w")?,
            pos: ck.take("pos")?,
        })
    }

    pub fn fingerprint(&self) -> u64 {
        self.to_checkpoint().fingerprint()
    }
}

/// Standard sinusoidal positional table: even columns sine, odd columns
/// cosine, geometric wavelengths from 1 to 10000.
pub fn sinusoidal_table(window: usize, dim: usize) -> Matrix {
    let mut data = vec![0.0; window * dim];
    for t in 0..window {
        for j in 0..dim {
            let pair = (j / 2) as f64;
            let rate = 1.0 / 10000f64.powf(2.0 * pair / dim as f64);
            let angle = t as f64 * rate;
            data[t * dim + j] = if j % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    Matrix::from_vec_unchecked(window, dim, data)
}

/// Categorical cross-entropy of one prediction: `-ln p[label]`, with the
/// probability clamped to `[1e-12, 1 - 1e-12]` before the log. The binary
/// two-class form is the special case at two classes.
pub fn cross_entropy(probs: &[f64], label: ActionState) -> f64 {
    let p = probs[label.index()].clamp(1e-12, 1.0 - 1e-12);
    -p.ln()
}

/// Mean cross-entropy over a batch of (probabilities, label) pairs.
pub fn cross_entropy_batch(items: &[([f64; 3], ActionState)]) -> f64 {
    let total: f64 = items.iter().map(|(p, l)| cross_entropy(p, *l)).sum();
    total / items.len() as f64
}
