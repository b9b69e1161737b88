use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`. Vectors are `len x 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "from_vec",
                format!("{} values for a {rows}x{cols} tensor", data.len()),
            ));
        }
        Ok(Tensor { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("from_rows", "ragged rows"));
        }
        Ok(Tensor {
            rows: rows.len(),
            cols,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            rows: data.len(),
            cols: 1,
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_vector(&self) -> bool {
        self.cols == 1
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `W x` for `W: m x k`, `x: k`.
    pub fn matvec(&self, x: &Tensor) -> Result<Tensor> {
        if !x.is_vector() || x.rows != self.cols {
            return Err(Error::shape(
                "matvec",
                format!("{}x{} times {}x{}", self.rows, self.cols, x.rows, x.cols),
            ));
        }
        Ok(Tensor::vector(matvec_raw(
            self.rows, self.cols, &self.data, &x.data,
        )))
    }
}

pub(crate) fn matvec_raw(rows: usize, cols: usize, w: &[f64], x: &[f64]) -> Vec<f64> {
    (0..rows)
        .map(|r| {
            w[r * cols..(r + 1) * cols]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

pub fn sigmoid_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(sigmoid_scalar)
}

pub fn tanh(x: &Tensor) -> Tensor {
    x.map(f64::tanh)
}

/// Lexicographic total order on vectors; used to fix the summation order of
/// set reductions so the result depends only on the multiset of inputs.
pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Elementwise mean of equally shaped slices, summed in canonical order.
pub(crate) fn canonical_mean(items: &[&[f64]]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&i, &j| lex_cmp(items[i], items[j]));
    let mut acc = vec![0.0; items[0].len()];
    for &i in &order {
        for (a, v) in acc.iter_mut().zip(items[i]) {
            *a += v;
        }
    }
    let n = items.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Arithmetic mean of a nonempty list of same-shaped vectors.
///
/// The result is bit-identical for every ordering of `vectors`.
pub fn mean_of(vectors: &[Tensor]) -> Result<Tensor> {
    let first = vectors.first().ok_or(Error::EmptyMean)?;
    if vectors.iter().any(|v| v.shape() != first.shape()) {
        return Err(Error::shape("mean_of", "vectors differ in shape"));
    }
    let items: Vec<&[f64]> = vectors.iter().map(|v| v.data()).collect();
    Ok(Tensor {
        rows: first.rows,
        cols: first.cols,
        data: canonical_mean(&items),
    })
}

pub const BCE_EPS: f64 = 1e-12;

/// Binary cross-entropy of a probability against a 0/1 label, with the
/// probability clamped to `[1e-12, 1 - 1e-12]`.
pub fn bce_loss(score: f64, label: bool) -> f64 {
    let s = score.clamp(BCE_EPS, 1.0 - BCE_EPS);
    if label {
        -s.ln()
    } else {
        -(1.0 - s).ln()
    }
}
