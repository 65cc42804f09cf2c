//! Reverse-mode automatic differentiation over matrix-valued nodes.
//!
//! A [`Tape`] records every operation applied to [`Var`] handles in
//! evaluation order. [`Tape::backward`] seeds the gradient of a scalar
//! (1×1) node with one and sweeps the record in reverse, accumulating
//! adjoints into every ancestor.
//!
//! The ReLU subgradient at exactly zero is taken to be zero.

use super::matrix::Matrix;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `(n, c) + (1, c)` with the row broadcast.
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Tanh(Var),
    Square(Var),
    Mean(Var),
    Sum(Var),
    ConcatCols(Var, Var),
    SliceCols(Var, usize, usize),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Matrix>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul(self.value(b));
        self.push(value, Op::MatMul(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let r = self.value(row);
        assert_eq!(r.rows(), 1, "broadcast operand must be a single row");
        let mut value = self.value(a).clone();
        assert_eq!(value.cols(), r.cols());
        let bias = r.as_slice().to_vec();
        for i in 0..value.rows() {
            for (x, b) in value.row_mut(i).iter_mut().zip(&bias) {
                *x += b;
            }
        }
        self.push(value, Op::AddRow(a, row))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(value, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(value, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let value = self.value(a).map(|x| x * k);
        self.push(value, Op::Scale(a, k))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        self.push(value, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.push(value, Op::Tanh(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x * x);
        self.push(value, Op::Square(a))
    }

    /// Mean over every element, as a 1×1 node.
    pub fn mean(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).mean());
        self.push(value, Op::Mean(a))
    }

    /// Sum over every element, as a 1×1 node.
    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).sum());
        self.push(value, Op::Sum(a))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).concat_cols(self.value(b)).expect("row counts must agree");
        self.push(value, Op::ConcatCols(a, b))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let value = self.value(a).slice_cols(start, end);
        self.push(value, Op::SliceCols(a, start, end))
    }

    /// Back-propagates from the scalar node `root`.
    ///
    /// Gradients of earlier calls are discarded.
    pub fn backward(&mut self, root: Var) {
        assert_eq!(self.value(root).shape(), (1, 1), "backward root must be scalar");
        self.grads = vec![None; self.nodes.len()];
        self.grads[root.0] = Some(Matrix::scalar(1.0));
        for idx in (0..=root.0).rev() {
            let Some(g) = self.grads[idx].take() else { continue };
            let op = self.nodes[idx].op.clone();
            match op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let da = Matrix::matmul_t(&g, false, self.value(b), true);
                    let db = Matrix::matmul_t(self.value(a), true, &g, false);
                    self.accumulate(a, da);
                    self.accumulate(b, db);
                }
                Op::AddRow(a, row) => {
                    let mut dr = Matrix::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (acc, x) in dr.as_mut_slice().iter_mut().zip(g.row(i)) {
                            *acc += x;
                        }
                    }
                    self.accumulate(row, dr);
                    self.accumulate(a, g.clone());
                }
                Op::Add(a, b) => {
                    self.accumulate(a, g.clone());
                    self.accumulate(b, g.clone());
                }
                Op::Sub(a, b) => {
                    self.accumulate(b, g.map(|x| -x));
                    self.accumulate(a, g.clone());
                }
                Op::Mul(a, b) => {
                    let da = g.zip_map(self.value(b), |x, y| x * y);
                    let db = g.zip_map(self.value(a), |x, y| x * y);
                    self.accumulate(a, da);
                    self.accumulate(b, db);
                }
                Op::Scale(a, k) => self.accumulate(a, g.map(|x| x * k)),
                Op::Relu(a) => {
                    let d = g.zip_map(self.value(a), |x, z| if z > 0.0 { x } else { 0.0 });
                    self.accumulate(a, d);
                }
                Op::Tanh(a) => {
                    let out = &self.nodes[idx].value;
                    let d = g.zip_map(out, |x, t| x * (1.0 - t * t));
                    self.accumulate(a, d);
                }
                Op::Square(a) => {
                    let d = g.zip_map(self.value(a), |x, z| 2.0 * z * x);
                    self.accumulate(a, d);
                }
                Op::Mean(a) => {
                    let (r, c) = self.value(a).shape();
                    let d = Matrix::filled(r, c, g.get(0, 0) / (r * c) as f64);
                    self.accumulate(a, d);
                }
                Op::Sum(a) => {
                    let (r, c) = self.value(a).shape();
                    self.accumulate(a, Matrix::filled(r, c, g.get(0, 0)));
                }
                Op::ConcatCols(a, b) => {
                    let split = self.value(a).cols();
                    self.accumulate(a, g.slice_cols(0, split));
                    self.accumulate(b, g.slice_cols(split, g.cols()));
                }
                Op::SliceCols(a, start, end) => {
                    let (r, c) = self.value(a).shape();
                    let mut d = Matrix::zeros(r, c);
                    for i in 0..r {
                        d.row_mut(i)[start..end].copy_from_slice(g.row(i));
                    }
                    self.accumulate(a, d);
                }
            }
            self.grads[idx] = Some(g);
        }
    }

    fn accumulate(&mut self, v: Var, d: Matrix) {
        match &mut self.grads[v.0] {
            Some(existing) => existing.add_assign(&d),
            slot @ None => *slot = Some(d),
        }
    }

    /// Adjoint of `v` after [`Tape::backward`]; zeros if `v` did not reach the root.
    pub fn grad(&self, v: Var) -> Matrix {
        match self.grads.get(v.0).and_then(Option::as_ref) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.value(v).shape();
                Matrix::zeros(r, c)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_chain_rule() {
        // L = mean((w*x - t)^2) with x=2, t=0, w=1 -> dL/dw = 2*(w*x - t)*x = 4... per element
        let mut tape = Tape::new();
        let x = tape.leaf(Matrix::scalar(2.0));
        let w = tape.leaf(Matrix::scalar(1.0));
        let t = tape.leaf(Matrix::scalar(0.0));
        let y = tape.matmul(x, w);
        let r = tape.sub(y, t);
        let sq = tape.square(r);
        let loss = tape.mean(sq);
        tape.backward(loss);
        assert_eq!(tape.value(loss).get(0, 0), 4.0);
        assert_eq!(tape.grad(w).get(0, 0), 8.0);
        assert_eq!(tape.grad(x).get(0, 0), 4.0);
    }

    #[test]
    fn fan_out_accumulates() {
        // L = sum(a * a) via Mul with shared operand -> dL/da = 2a
        let mut tape = Tape::new();
        let a = tape.leaf(Matrix::row_vector(&[1.0, -3.0]));
        let p = tape.mul(a, a);
        let l = tape.sum(p);
        tape.backward(l);
        assert_eq!(tape.grad(a).as_slice(), &[2.0, -6.0]);
    }

    #[test]
    fn relu_kink_has_zero_subgradient() {
        let mut tape = Tape::new();
        let a = tape.leaf(Matrix::row_vector(&[0.0, 1.0, -1.0]));
        let r = tape.relu(a);
        let l = tape.sum(r);
        tape.backward(l);
        assert_eq!(tape.grad(a).as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn slice_and_concat_route_gradients() {
        let mut tape = Tape::new();
        let a = tape.leaf(Matrix::row_vector(&[1.0, 2.0]));
        let b = tape.leaf(Matrix::row_vector(&[3.0]));
        let c = tape.concat_cols(a, b);
        let s = tape.slice_cols(c, 1, 3);
        let sq = tape.square(s);
        let l = tape.sum(sq);
        tape.backward(l);
        assert_eq!(tape.grad(a).as_slice(), &[0.0, 4.0]);
        assert_eq!(tape.grad(b).as_slice(), &[6.0]);
    }
}
