//! Reverse-mode differentiation over a linear record of vector operations.
//!
//! Every operation appends one node; node `k` only reads nodes `< k`, so
//! walking the record backwards is a reverse topological order.

use super::params::{Gradients, ParamId, ParamStore};
use super::tensor::{canonical_mean, lex_cmp, matvec_raw, sigmoid_scalar, Tensor, BCE_EPS};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatVec(Var, Var),
    Sum(Vec<Var>),
    Sub(Var, Var),
    Mul(Var, Var),
    OneMinus(Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Mean(Vec<Var>),
    Mask(Var, Vec<f64>),
    Bce(Var, bool),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param(_) => "param",
            Op::MatVec(..) => "matvec",
            Op::Sum(_) => "sum",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::OneMinus(_) => "one_minus",
            Op::Relu(_) => "relu",
            Op::Sigmoid(_) => "sigmoid",
            Op::Tanh(_) => "tanh",
            Op::Mean(_) => "mean",
            Op::Mask(..) => "mask",
            Op::Bce(..) => "bce",
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    rows: usize,
    cols: usize,
    value: Vec<f64>,
}

#[derive(Debug)]
pub struct Tape {
    nodes: Vec<Node>,
    first_non_finite: Option<(usize, &'static str)>,
    min_relu_margin: f64,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            first_non_finite: None,
            min_relu_margin: f64::INFINITY,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, rows: usize, cols: usize, value: Vec<f64>) -> Var {
        debug_assert_eq!(value.len(), rows * cols);
        if self.first_non_finite.is_none() && value.iter().any(|v| !v.is_finite()) {
            self.first_non_finite = Some((self.nodes.len(), op.name()));
        }
        self.nodes.push(Node {
            op,
            rows,
            cols,
            value,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        let n = &self.nodes[v.0];
        Tensor::from_vec(n.rows, n.cols, n.value.clone()).expect("node shape")
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    /// Smallest `|z|` seen by any relu so far; a small margin means a
    /// finite-difference probe may straddle the kink.
    pub fn min_relu_margin(&self) -> f64 {
        self.min_relu_margin
    }

    /// Fails if any recorded value was NaN or infinite.
    pub fn check_finite(&self) -> Result<()> {
        match self.first_non_finite {
            None => Ok(()),
            Some((idx, op)) => Err(Error::NonFinite(format!("{op} (tape node {idx})"))),
        }
    }

    /// Constant input; receives no gradient outside the tape.
    pub fn input(&mut self, t: &Tensor) -> Var {
        self.push(Op::Input, t.rows(), t.cols(), t.data().to_vec())
    }

    pub fn input_vec(&mut self, v: &[f64]) -> Var {
        self.push(Op::Input, v.len(), 1, v.to_vec())
    }

    /// Records a parameter leaf. Reusing the returned `Var` ties uses together,
    /// so their gradients add up in one buffer.
    pub fn param(&mut self, id: ParamId, value: &Tensor) -> Var {
        self.push(
            Op::Param(id),
            value.rows(),
            value.cols(),
            value.data().to_vec(),
        )
    }

    pub fn param_from(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.param(id, store.get(id))
    }

    fn require_vector(&self, op: &'static str, v: Var) -> Result<usize> {
        let (r, c) = self.shape(v);
        if c != 1 {
            return Err(Error::shape(op, format!("expected a vector, got {r}x{c}")));
        }
        Ok(r)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        Ok(())
    }

    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let (rows, cols) = self.shape(w);
        let len = self.require_vector("matvec", x)?;
        if len != cols {
            return Err(Error::shape(
                "matvec",
                format!("{rows}x{cols} times vector of length {len}"),
            ));
        }
        let value = matvec_raw(rows, cols, self.value(w), self.value(x));
        Ok(self.push(Op::MatVec(w, x), rows, 1, value))
    }

    /// Elementwise sum of equally shaped values, accumulated left to right.
    pub fn sum(&mut self, terms: &[Var]) -> Result<Var> {
        let first = *terms
            .first()
            .ok_or_else(|| Error::shape("sum", "no terms"))?;
        let (rows, cols) = self.shape(first);
        let mut acc = self.value(first).to_vec();
        for &t in &terms[1..] {
            self.same_shape("sum", first, t)?;
            for (a, v) in acc.iter_mut().zip(self.value(t)) {
                *a += v;
            }
        }
        Ok(self.push(Op::Sum(terms.to_vec()), rows, cols, acc))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.sum(&[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let (rows, cols) = self.shape(a);
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x - y)
            .collect();
        Ok(self.push(Op::Sub(a, b), rows, cols, value))
    }

    /// Hadamard product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let (rows, cols) = self.shape(a);
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .collect();
        Ok(self.push(Op::Mul(a, b), rows, cols, value))
    }

    /// `1 - a`, elementwise.
    pub fn one_minus(&mut self, a: Var) -> Var {
        let (rows, cols) = self.shape(a);
        let value = self.value(a).iter().map(|x| 1.0 - x).collect();
        self.push(Op::OneMinus(a), rows, cols, value)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let (rows, cols) = self.shape(a);
        let margin = self
            .value(a)
            .iter()
            .fold(self.min_relu_margin, |m, z| m.min(z.abs()));
        self.min_relu_margin = margin;
        let value = self.value(a).iter().map(|x| x.max(0.0)).collect();
        self.push(Op::Relu(a), rows, cols, value)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let (rows, cols) = self.shape(a);
        let value = self.value(a).iter().map(|&x| sigmoid_scalar(x)).collect();
        self.push(Op::Sigmoid(a), rows, cols, value)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let (rows, cols) = self.shape(a);
        let value = self.value(a).iter().map(|x| x.tanh()).collect();
        self.push(Op::Tanh(a), rows, cols, value)
    }

    /// Mean of a nonempty set of equally shaped values. The forward sum runs
    /// in a canonical (value-sorted) order, so the result does not depend on
    /// the order of `items`.
    pub fn mean(&mut self, items: &[Var]) -> Result<Var> {
        let first = *items.first().ok_or(Error::EmptyMean)?;
        for &v in &items[1..] {
            self.same_shape("mean", first, v)?;
        }
        let (rows, cols) = self.shape(first);
        let slices: Vec<&[f64]> = items.iter().map(|&v| self.value(v)).collect();
        let value = canonical_mean(&slices);
        Ok(self.push(Op::Mean(items.to_vec()), rows, cols, value))
    }

    /// Multiplies by a fixed mask (dropout).
    pub fn mask(&mut self, a: Var, mask: Vec<f64>) -> Result<Var> {
        let (rows, cols) = self.shape(a);
        if mask.len() != rows * cols {
            return Err(Error::shape("mask", "mask length differs from value"));
        }
        let value = self
            .value(a)
            .iter()
            .zip(&mask)
            .map(|(x, m)| x * m)
            .collect();
        Ok(self.push(Op::Mask(a, mask), rows, cols, value))
    }

    /// Binary cross-entropy of a scalar probability.
    pub fn bce(&mut self, score: Var, label: bool) -> Result<Var> {
        if self.shape(score) != (1, 1) {
            return Err(Error::shape("bce", "score must be a scalar"));
        }
        let loss = super::tensor::bce_loss(self.scalar(score), label);
        Ok(self.push(Op::Bce(score, label), 1, 1, vec![loss]))
    }

    /// Adjoint of every recorded value w.r.t. the scalar `output`.
    /// Entries for values that do not influence `output` are `None`.
    pub fn adjoints(&self, output: Var) -> Result<Vec<Option<Vec<f64>>>> {
        self.check_finite()?;
        if self.shape(output) != (1, 1) {
            return Err(Error::shape("backward", "output must be a scalar"));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; output.0 + 1];
        adj[output.0] = Some(vec![1.0]);

        fn acc(adj: &mut [Option<Vec<f64>>], v: Var, delta: impl Iterator<Item = f64>, len: usize) {
            let slot = adj[v.0].get_or_insert_with(|| vec![0.0; len]);
            for (a, d) in slot.iter_mut().zip(delta) {
                *a += d;
            }
        }

        for k in (0..=output.0).rev() {
            let Some(g) = adj[k].take() else { continue };
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "adjoint of {} (tape node {k})",
                    self.nodes[k].op.name()
                )));
            }
            let node = &self.nodes[k];
            match &node.op {
                Op::Input | Op::Param(_) => {}
                Op::MatVec(w, x) => {
                    let (rows, cols) = self.shape(*w);
                    let wv = self.value(*w);
                    let xv = self.value(*x);
                    let dw = (0..rows * cols).map(|idx| g[idx / cols] * xv[idx % cols]);
                    acc(&mut adj, *w, dw, rows * cols);
                    let dx = (0..cols).map(|c| (0..rows).map(|r| wv[r * cols + c] * g[r]).sum());
                    acc(&mut adj, *x, dx, cols);
                }
                Op::Sum(terms) => {
                    for t in terms {
                        acc(&mut adj, *t, g.iter().copied(), g.len());
                    }
                }
                Op::Sub(a, b) => {
                    acc(&mut adj, *a, g.iter().copied(), g.len());
                    acc(&mut adj, *b, g.iter().map(|x| -x), g.len());
                }
                Op::Mul(a, b) => {
                    let av = self.value(*a);
                    let bv = self.value(*b);
                    acc(&mut adj, *a, g.iter().zip(bv).map(|(x, y)| x * y), g.len());
                    acc(&mut adj, *b, g.iter().zip(av).map(|(x, y)| x * y), g.len());
                }
                Op::OneMinus(a) => acc(&mut adj, *a, g.iter().map(|x| -x), g.len()),
                Op::Relu(a) => {
                    let av = self.value(*a);
                    let d = g
                        .iter()
                        .zip(av)
                        .map(|(x, z)| if *z > 0.0 { *x } else { 0.0 });
                    acc(&mut adj, *a, d, g.len());
                }
                Op::Sigmoid(a) => {
                    let d = g.iter().zip(&node.value).map(|(x, s)| x * s * (1.0 - s));
                    acc(&mut adj, *a, d, g.len());
                }
                Op::Tanh(a) => {
                    let d = g.iter().zip(&node.value).map(|(x, t)| x * (1.0 - t * t));
                    acc(&mut adj, *a, d, g.len());
                }
                Op::Mean(items) => {
                    let inv = 1.0 / items.len() as f64;
                    // reverse canonical order keeps accumulation reproducible
                    let mut order: Vec<usize> = (0..items.len()).collect();
                    order.sort_by(|&i, &j| lex_cmp(self.value(items[i]), self.value(items[j])));
                    for &i in order.iter().rev() {
                        acc(&mut adj, items[i], g.iter().map(|x| x * inv), g.len());
                    }
                }
                Op::Mask(a, mask) => {
                    acc(
                        &mut adj,
                        *a,
                        g.iter().zip(mask).map(|(x, m)| x * m),
                        g.len(),
                    );
                }
                Op::Bce(s, label) => {
                    let raw = self.scalar(*s);
                    let d = if raw <= BCE_EPS || raw >= 1.0 - BCE_EPS {
                        0.0
                    } else if *label {
                        -1.0 / raw
                    } else {
                        1.0 / (1.0 - raw)
                    };
                    acc(&mut adj, *s, std::iter::once(g[0] * d), 1);
                }
            }
            adj[k] = Some(g);
        }
        Ok(adj)
    }

    /// Gradients of the scalar `output` w.r.t. every parameter leaf, summed
    /// over all leaves that share a [`ParamId`].
    pub fn backward(&self, output: Var, store: &ParamStore) -> Result<Gradients> {
        let adj = self.adjoints(output)?;
        let mut grads = store.zero_grads();
        for (k, node) in self.nodes.iter().enumerate().take(output.0 + 1) {
            if let (Op::Param(id), Some(g)) = (&node.op, &adj[k]) {
                grads.accumulate(*id, g);
            }
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("parameter gradient".into()));
        }
        Ok(grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(values: &[(&str, Tensor)]) -> (ParamStore, Vec<ParamId>) {
        let mut s = ParamStore::new();
        let ids = values
            .iter()
            .map(|(n, t)| s.insert(*n, t.clone()).unwrap())
            .collect();
        (s, ids)
    }

    #[test]
    fn linear_gradient() {
        let (store, ids) = store_with(&[("w", Tensor::from_rows(&[&[5.0]]).unwrap())]);
        let mut tape = Tape::new();
        let w = tape.param_from(&store, ids[0]);
        let x = tape.input_vec(&[2.0]);
        let y = tape.matvec(w, x).unwrap();
        let g = tape.backward(y, &store).unwrap();
        assert_eq!(g.get(ids[0]).data(), &[2.0]);
    }

    #[test]
    fn sigmoid_gradient_at_zero() {
        let mut tape = Tape::new();
        let z = tape.input_vec(&[0.0]);
        let s = tape.sigmoid(z);
        let adj = tape.adjoints(s).unwrap();
        assert_eq!(adj[z.index()].as_ref().unwrap(), &vec![0.25]);
    }

    #[test]
    fn tied_uses_accumulate() {
        let (store, ids) = store_with(&[("w", Tensor::from_rows(&[&[3.0]]).unwrap())]);
        let mut tape = Tape::new();
        let w = tape.param_from(&store, ids[0]);
        let x = tape.input_vec(&[2.0]);
        let h = tape.matvec(w, x).unwrap();
        let y = tape.matvec(w, h).unwrap(); // w^2 x
        let g = tape.backward(y, &store).unwrap();
        assert_eq!(g.get(ids[0]).data(), &[2.0 * 3.0 * 2.0]);
    }

    #[test]
    fn non_finite_is_reported() {
        let mut tape = Tape::new();
        let a = tape.input_vec(&[f64::INFINITY]);
        let b = tape.input_vec(&[1.0]);
        let c = tape.sub(a, b).unwrap();
        let _ = c;
        assert!(matches!(tape.check_finite(), Err(Error::NonFinite(_))));
        assert!(tape.adjoints(b).is_err());
    }

    #[test]
    fn shape_errors() {
        let mut tape = Tape::new();
        let a = tape.input_vec(&[1.0, 2.0]);
        let b = tape.input_vec(&[1.0]);
        assert!(tape.add(a, b).is_err());
        assert!(tape.mul(a, b).is_err());
        assert!(tape.matvec(a, a).is_err());
        assert!(matches!(tape.mean(&[]), Err(Error::EmptyMean)));
        assert!(tape.bce(a, true).is_err());
    }

    #[test]
    fn relu_margin_tracks_closest_preactivation() {
        let mut tape = Tape::new();
        let a = tape.input_vec(&[0.5, -0.01, 3.0]);
        tape.relu(a);
        assert_eq!(tape.min_relu_margin(), 0.01);
    }
}
