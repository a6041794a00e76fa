use super::matrix::{softmax_into, Matrix, NumError};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

/// Probabilities are clamped to `[CLAMP_LO, 1 - CLAMP_LO]` before logs.
const CLAMP_LO: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Op {
    MatMul { a: usize, b: usize },
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    AddRowVec { x: usize, v: usize },
    MulRowVec { x: usize, v: usize },
    Scale { x: usize, c: f64 },
    Relu { x: usize },
    RowSoftmax { x: usize },
    RowNormalize { x: usize, eps: f64 },
    Transpose { x: usize },
    RowSum { x: usize },
    SumAll { x: usize },
    MeanAll { x: usize },
    Sqrt { x: usize },
    LogClamped { x: usize },
    SliceCols { x: usize, start: usize, len: usize },
    ConcatCols { xs: Vec<usize> },
}

struct Node {
    value: Matrix,
    grad: Option<Matrix>,
    // `None` for leaves (inputs, params, constants).
    op: Option<Op>,
}

/// Wengert tape: the forward pass records every primitive with its operand
/// node ids, and `backward` replays the list in reverse, accumulating
/// gradients by the chain rule. Operations are recorded in topological order
/// by construction, so the reverse sweep visits each node exactly once.
pub struct Tape {
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, value: Matrix, op: Option<Op>) -> NodeId {
        self.nodes.push(Node {
            value,
            grad: None,
            op,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Record a leaf whose gradient will be tracked (parameters, inputs).
    pub fn leaf(&mut self, value: Matrix) -> NodeId {
        self.push(value, None)
    }

    /// Alias of [`Tape::leaf`], used when registering model parameters.
    pub fn param(&mut self, value: Matrix) -> NodeId {
        self.leaf(value)
    }

    /// Record a constant (masks, positional tables, targets). Gradients are
    /// still computed for it — they are simply never read.
    pub fn constant(&mut self, value: Matrix) -> NodeId {
        self.leaf(value)
    }

    pub fn value(&self, id: NodeId) -> &Matrix {
        &self.nodes[id.0].value
    }

    /// Gradient of the last `backward` loss w.r.t. `id`.
    pub fn grad(&self, id: NodeId) -> Option<&Matrix> {
        self.nodes[id.0].grad.as_ref()
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        let value = self.nodes[a.0].value.matmul(&self.nodes[b.0].value)?;
        Ok(self.push(value, Some(Op::MatMul { a: a.0, b: b.0 })))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        let value = self.nodes[a.0].value.add(&self.nodes[b.0].value)?;
        Ok(self.push(value, Some(Op::Add { a: a.0, b: b.0 })))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        let value = self.nodes[a.0].value.sub(&self.nodes[b.0].value)?;
        Ok(self.push(value, Some(Op::Sub { a: a.0, b: b.0 })))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NumError> {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if av.rows() != bv.rows() || av.cols() != bv.cols() {
            return Err(NumError::ShapeMismatch {
                op: "mul",
                lrows: av.rows(),
                lcols: av.cols(),
                rrows: bv.rows(),
                rcols: bv.cols(),
            });
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        let value = Matrix::from_vec_unchecked(av.rows(), av.cols(), data);
        Ok(self.push(value, Some(Op::Mul { a: a.0, b: b.0 })))
    }

    /// `x (n x d) + v (1 x d)`, broadcasting `v` over rows.
    pub fn add_row_vec(&mut self, x: NodeId, v: NodeId) -> Result<NodeId, NumError> {
        let (xv, vv) = (&self.nodes[x.0].value, &self.nodes[v.0].value);
        if vv.rows() != 1 || vv.cols() != xv.cols() {
            return Err(NumError::ShapeMismatch {
                op: "add_row_vec",
                lrows: xv.rows(),
                lcols: xv.cols(),
                rrows: vv.rows(),
                rcols: vv.cols(),
            });
        }
        let mut data = xv.data().to_vec();
        for r in 0..xv.rows() {
            for (d, b) in data[r * xv.cols()..(r + 1) * xv.cols()]
                .iter_mut()
                .zip(vv.data())
            {
                *d += b;
            }
        }
        let value = Matrix::from_vec_unchecked(xv.rows(), xv.cols(), data);
        Ok(self.push(value, Some(Op::AddRowVec { x: x.0, v: v.0 })))
    }

    /// `x (n x d) ∘ v (1 x d)`, broadcasting `v` over rows.
    pub fn mul_row_vec(&mut self, x: NodeId, v: NodeId) -> Result<NodeId, NumError> {
        let (xv, vv) = (&self.nodes[x.0].value, &self.nodes[v.0].value);
        if vv.rows() != 1 || vv.cols() != xv.cols() {
            return Err(NumError::ShapeMismatch {
                op: "mul_row_vec",
                lrows: xv.rows(),
                lcols: xv.cols(),
                rrows: vv.rows(),
                rcols: vv.cols(),
            });
        }
        let mut data = xv.data().to_vec();
        for r in 0..xv.rows() {
            for (d, g) in data[r * xv.cols()..(r + 1) * xv.cols()]
                .iter_mut()
                .zip(vv.data())
            {
                *d *= g;
            }
        }
        let value = Matrix::from_vec_unchecked(xv.rows(), xv.cols(), data);
        Ok(self.push(value, Some(Op::MulRowVec { x: x.0, v: v.0 })))
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let value = self.nodes[x.0].value.scale(c);
        self.push(value, Some(Op::Scale { x: x.0, c }))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let value = self.nodes[x.0].value.relu();
        self.push(value, Some(Op::Relu { x: x.0 }))
    }

    pub fn row_softmax(&mut self, x: NodeId) -> NodeId {
        let value = self.nodes[x.0].value.row_softmax();
        self.push(value, Some(Op::RowSoftmax { x: x.0 }))
    }

    /// Per-row standardization `(x - mean) / sqrt(var + eps)`.
    pub fn row_normalize(&mut self, x: NodeId, eps: f64) -> NodeId {
        let xv = &self.nodes[x.0].value;
        let (n, d) = (xv.rows(), xv.cols());
        let mut data = vec![0.0; n * d];
        for r in 0..n {
            let row = xv.row_slice(r);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + eps).sqrt();
            for (o, &v) in data[r * d..(r + 1) * d].iter_mut().zip(row) {
                *o = (v - mean) * inv;
            }
        }
        let value = Matrix::from_vec_unchecked(n, d, data);
        self.push(value, Some(Op::RowNormalize { x: x.0, eps }))
    }

    pub fn transpose(&mut self, x: NodeId) -> NodeId {
        let value = self.nodes[x.0].value.transpose();
        self.push(value, Some(Op::Transpose { x: x.0 }))
    }

    /// Row sums: `n x d -> n x 1`.
    pub fn row_sum(&mut self, x: NodeId) -> NodeId {
        let xv = &self.nodes[x.0].value;
        let data = (0..xv.rows())
            .map(|r| xv.row_slice(r).iter().sum())
            .collect();
        let value = Matrix::from_vec_unchecked(xv.rows(), 1, data);
        self.push(value, Some(Op::RowSum { x: x.0 }))
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let s = self.nodes[x.0].value.data().iter().sum();
        let value = Matrix::from_vec_unchecked(1, 1, vec![s]);
        self.push(value, Some(Op::SumAll { x: x.0 }))
    }

    pub fn mean_all(&mut self, x: NodeId) -> NodeId {
        let xv = &self.nodes[x.0].value;
        let n = xv.data().len() as f64;
        let s: f64 = xv.data().iter().sum();
        let value = Matrix::from_vec_unchecked(1, 1, vec![s / n]);
        self.push(value, Some(Op::MeanAll { x: x.0 }))
    }

    /// Elementwise square root. The derivative is clamped near zero so a
    /// zero-distance triplet yields a bounded subgradient instead of Inf.
    pub fn sqrt(&mut self, x: NodeId) -> NodeId {
        let xv = &self.nodes[x.0].value;
        let data = xv.data().iter().map(|v| v.max(0.0).sqrt()).collect();
        let value = Matrix::from_vec_unchecked(xv.rows(), xv.cols(), data);
        self.push(value, Some(Op::Sqrt { x: x.0 }))
    }

    /// `ln(clamp(x, 1e-12, 1 - 1e-12))` — the probability-safe log used by
    /// the cross-entropy objective.
    pub fn log_clamped(&mut self, x: NodeId) -> NodeId {
        let xv = &self.nodes[x.0].value;
        let data = xv
            .data()
            .iter()
            .map(|v| v.clamp(CLAMP_LO, 1.0 - CLAMP_LO).ln())
            .collect();
        let value = Matrix::from_vec_unchecked(xv.rows(), xv.cols(), data);
        self.push(value, Some(Op::LogClamped { x: x.0 }))
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let xv = &self.nodes[x.0].value;
        debug_assert!(start + len <= xv.cols());
        let mut data = Vec::with_capacity(xv.rows() * len);
        for r in 0..xv.rows() {
            data.extend_from_slice(&xv.row_slice(r)[start..start + len]);
        }
        let value = Matrix::from_vec_unchecked(xv.rows(), len, data);
        self.push(value, Some(Op::SliceCols { x: x.0, start, len }))
    }

    pub fn concat_cols(&mut self, xs: &[NodeId]) -> NodeId {
        debug_assert!(!xs.is_empty());
        let rows = self.nodes[xs[0].0].value.rows();
        let total: usize = xs.iter().map(|id| self.nodes[id.0].value.cols()).sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for id in xs {
                data.extend_from_slice(self.nodes[id.0].value.row_slice(r));
            }
        }
        let value = Matrix::from_vec_unchecked(rows, total, data);
        self.push(
            value,
            Some(Op::ConcatCols {
                xs: xs.iter().map(|id| id.0).collect(),
            }),
        )
    }

    fn add_grad(&mut self, node: usize, g: Matrix) {
        match &mut self.nodes[node].grad {
            Some(existing) => {
                for (e, v) in existing.data_mut().iter_mut().zip(g.data()) {
                    *e += v;
                }
            }
            slot @ None => *slot = Some(g),
        }
    }

    /// Reverse sweep from a scalar loss node. After this call every node's
    /// gradient (including non-parameter leaves) is available via
    /// [`Tape::grad`].
    pub fn backward(&mut self, loss: NodeId) -> Result<(), NumError> {
        let lv = &self.nodes[loss.0].value;
        if lv.rows() != 1 || lv.cols() != 1 {
            return Err(NumError::NonScalarLoss {
                rows: lv.rows(),
                cols: lv.cols(),
            });
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        self.nodes[loss.0].grad = Some(Matrix::from_vec_unchecked(1, 1, vec![1.0]));

        for i in (0..=loss.0).rev() {
            let Some(op) = self.nodes[i].op.clone() else {
                continue;
            };
            let Some(gout) = self.nodes[i].grad.clone() else {
                continue;
            };
            match op {
                Op::MatMul { a, b } => {
                    let bt = self.nodes[b].value.transpose();
                    let ga = gout.matmul(&bt)?;
                    let at = self.nodes[a].value.transpose();
                    let gb = at.matmul(&gout)?;
                    self.add_grad(a, ga);
                    self.add_grad(b, gb);
                }
                Op::Add { a, b } => {
                    self.add_grad(a, gout.clone());
                    self.add_grad(b, gout);
                }
                Op::Sub { a, b } => {
                    self.add_grad(a, gout.clone());
                    self.add_grad(b, gout.scale(-1.0));
                }
                Op::Mul { a, b } => {
                    let ga = hadamard(&gout, &self.nodes[b].value);
                    let gb = hadamard(&gout, &self.nodes[a].value);
                    self.add_grad(a, ga);
                    self.add_grad(b, gb);
                }
                Op::AddRowVec { x, v } => {
                    let gv = col_sums(&gout);
                    self.add_grad(x, gout);
                    self.add_grad(v, gv);
                }
                Op::MulRowVec { x, v } => {
                    let vv = self.nodes[v].value.clone();
                    let xv = self.nodes[x].value.clone();
                    let (n, d) = (gout.rows(), gout.cols());
                    let mut gx = vec![0.0; n * d];
                    let mut gv = vec![0.0; d];
                    for r in 0..n {
                        let grow = gout.row_slice(r);
                        let xrow = xv.row_slice(r);
                        for c in 0..d {
                            gx[r * d + c] = grow[c] * vv.data()[c];
                            gv[c] += grow[c] * xrow[c];
                        }
                    }
                    self.add_grad(x, Matrix::from_vec_unchecked(n, d, gx));
                    self.add_grad(v, Matrix::from_vec_unchecked(1, d, gv));
                }
                Op::Scale { x, c } => self.add_grad(x, gout.scale(c)),
                Op::Relu { x } => {
                    let xv = &self.nodes[x].value;
                    let data = gout
                        .data()
                        .iter()
                        .zip(xv.data())
                        .map(|(g, v)| if *v > 0.0 { *g } else { 0.0 })
                        .collect();
                    let gx = Matrix::from_vec_unchecked(xv.rows(), xv.cols(), data);
                    self.add_grad(x, gx);
                }
                Op::RowSoftmax { x } => {
                    let y = &self.nodes[i].value;
                    let (n, d) = (y.rows(), y.cols());
                    let mut gx = vec![0.0; n * d];
                    for r in 0..n {
                        let yrow = y.row_slice(r);
                        let grow = gout.row_slice(r);
                        let dot: f64 = yrow.iter().zip(grow).map(|(a, b)| a * b).sum();
                        for c in 0..d {
                            gx[r * d + c] = yrow[c] * (grow[c] - dot);
                        }
                    }
                    self.add_grad(x, Matrix::from_vec_unchecked(n, d, gx));
                }
                Op::RowNormalize { x, eps } => {
                    let xv = self.nodes[x].value.clone();
                    let (n, d) = (xv.rows(), xv.cols());
                    let mut gx = vec![0.0; n * d];
                    for r in 0..n {
                        let row = xv.row_slice(r);
                        let mean = row.iter().sum::<f64>() / d as f64;
                        let var =
                            row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
                        let inv = 1.0 / (var + eps).sqrt();
                        let xhat: Vec<f64> = row.iter().map(|v| (v - mean) * inv).collect();
                        let grow = gout.row_slice(r);
                        let gmean = grow.iter().sum::<f64>() / d as f64;
                        let gdot =
                            grow.iter().zip(&xhat).map(|(g, h)| g * h).sum::<f64>() / d as f64;
                        for c in 0..d {
                            gx[r * d + c] = inv * (grow[c] - gmean - xhat[c] * gdot);
                        }
                    }
                    self.add_grad(x, Matrix::from_vec_unchecked(n, d, gx));
                }
                Op::Transpose { x } => self.add_grad(x, gout.transpose()),
                Op::RowSum { x } => {
                    let xv = &self.nodes[x].value;
                    let (n, d) = (xv.rows(), xv.cols());
                    let mut gx = vec![0.0; n * d];
                    for r in 0..n {
                        let g = gout.data()[r];
                        for c in 0..d {
                            gx[r * d + c] = g;
                        }
                    }
                    self.add_grad(x, Matrix::from_vec_unchecked(n, d, gx));
                }
                Op::SumAll { x } => {
                    let xv = &self.nodes[x].value;
                    let gx = Matrix::filled(xv.rows(), xv.cols(), gout.data()[0]);
                    self.add_grad(x, gx);
                }
                Op::MeanAll { x } => {
                    let xv = &self.nodes[x].value;
                    let n = xv.data().len() as f64;
                    let gx = Matrix::filled(xv.rows(), xv.cols(), gout.data()[0] / n);
                    self.add_grad(x, gx);
                }
                Op::Sqrt { x } => {
                    let y = &self.nodes[i].value;
                    let data = gout
                        .data()
                        .iter()
                        .zip(y.data())
                        .map(|(g, s)| g * 0.5 / s.max(1e-12))
                        .collect();
                    let gx = Matrix::from_vec_unchecked(y.rows(), y.cols(), data);
                    self.add_grad(x, gx);
                }
                Op::LogClamped { x } => {
                    let xv = &self.nodes[x].value;
                    let data = gout
                        .data()
                        .iter()
                        .zip(xv.data())
                        .map(|(g, v)| {
                            if *v > CLAMP_LO && *v < 1.0 - CLAMP_LO {
                                g / v
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    let gx = Matrix::from_vec_unchecked(xv.rows(), xv.cols(), data);
                    self.add_grad(x, gx);
                }
                Op::SliceCols { x, start, len } => {
                    let xv = &self.nodes[x].value;
                    let (n, d) = (xv.rows(), xv.cols());
                    let mut gx = vec![0.0; n * d];
                    for r in 0..n {
                        let grow = gout.row_slice(r);
                        gx[r * d + start..r * d + start + len].copy_from_slice(grow);
                    }
                    self.add_grad(x, Matrix::from_vec_unchecked(n, d, gx));
                }
                Op::ConcatCols { xs } => {
                    let mut offset = 0;
                    for xid in xs {
                        let xv = &self.nodes[xid].value;
                        let (n, d) = (xv.rows(), xv.cols());
                        let mut gx = vec![0.0; n * d];
                        for r in 0..n {
                            let grow = &gout.row_slice(r)[offset..offset + d];
                            gx[r * d..(r + 1) * d].copy_from_slice(grow);
                        }
                        offset += d;
                        self.add_grad(xid, Matrix::from_vec_unchecked(n, d, gx));
                    }
                }
            }
        }
        Ok(())
    }

    /// Row-softmax with an additive pre-softmax mask: masked positions get a
    /// large negative score and end up with exactly zero weight — unless the
    /// whole row is masked, in which case the offsets cancel and the result
    /// degenerates to the unmasked softmax (still a valid distribution).
    pub fn masked_row_softmax(&mut self, x: NodeId, mask: &[bool]) -> Result<NodeId, NumError> {
        let xv = &self.nodes[x.0].value;
        if mask.len() != xv.cols() {
            return Err(NumError::BadShape {
                op: "masked_row_softmax",
                expected: "mask length = cols",
                rows: xv.rows(),
                cols: xv.cols(),
            });
        }
        let row: Vec<f64> = mask
            .iter()
            .map(|&m| if m { 0.0 } else { MASK_NEG })
            .collect();
        let mut data = Vec::with_capacity(xv.rows() * xv.cols());
        for _ in 0..xv.rows() {
            data.extend_from_slice(&row);
        }
        let mask_node = self.constant(Matrix::from_vec_unchecked(xv.rows(), xv.cols(), data));
        let masked = self.add(x, mask_node)?;
        Ok(self.row_softmax(masked))
    }
}

/// Pre-softmax score for masked positions. Large enough that its exponential
/// underflows to exactly 0.0 whenever any unmasked position is present.
pub(crate) const MASK_NEG: f64 = -1e30;

fn hadamard(a: &Matrix, b: &Matrix) -> Matrix {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    Matrix::from_vec_unchecked(a.rows(), a.cols(), data)
}

fn col_sums(m: &Matrix) -> Matrix {
    let mut out = vec![0.0; m.cols()];
    for r in 0..m.rows() {
        for (o, v) in out.iter_mut().zip(m.row_slice(r)) {
            *o += v;
        }
    }
    Matrix::from_vec_unchecked(1, m.cols(), out)
}

/// Softmax of a plain slice (no tape), with max-subtraction.
pub(crate) fn softmax_slice(row: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; row.len()];
    softmax_into(row, &mut out);
    out
}
