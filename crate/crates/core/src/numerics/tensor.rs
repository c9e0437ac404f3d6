use ndarray::{ArrayView1, ArrayView2, ArrayViewMut2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Up to two dimensions, stored inline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Shape {
    dims: [usize; 2],
    ndim: u8,
}

impl Shape {
    fn from_slice(s: &[usize]) -> Option<Self> {
        match *s {
            [n] => Some(Shape { dims: [n, 0], ndim: 1 }),
            [r, c] => Some(Shape { dims: [r, c], ndim: 2 }),
            _ => None,
        }
    }

    fn as_slice(&self) -> &[usize] {
        &self.dims[..self.ndim as usize]
    }
}

/// Dense row-major array of 64-bit floats with one or two dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TensorRepr", try_from = "TensorRepr")]
pub struct Tensor {
    shape: Shape,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TensorRepr {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl From<Tensor> for TensorRepr {
    fn from(t: Tensor) -> Self {
        TensorRepr {
            shape: t.shape().to_vec(),
            values: t.values,
        }
    }
}

impl TryFrom<TensorRepr> for Tensor {
    type Error = Error;

    fn try_from(r: TensorRepr) -> Result<Self> {
        Tensor::new(r.shape, r.values)
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        Self::from_shape(&shape, values)
    }

    /// Fails unless `shape` has one or two dimensions whose product is
    /// `values.len()`.
    pub fn from_shape(shape: &[usize], values: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        match Shape::from_slice(shape) {
            Some(s) if n == values.len() => Ok(Tensor { shape: s, values }),
            _ => Err(Error::Shape {
                op: "tensor",
                left: shape.to_vec(),
                right: vec![values.len()],
            }),
        }
    }

    /// Panics unless `shape` has one or two dimensions.
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: Shape::from_slice(shape).expect("one or two dimensions"),
            values: vec![0.0; n],
        }
    }

    pub fn vector(values: Vec<f64>) -> Self {
        Tensor {
            shape: Shape { dims: [values.len(), 0], ndim: 1 },
            values,
        }
    }

    /// Panics if `values.len() != rows * cols`.
    pub fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        assert_eq!(rows * cols, values.len(), "matrix {rows}x{cols}");
        Tensor {
            shape: Shape { dims: [rows, cols], ndim: 2 },
            values,
        }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor::vector(vec![v])
    }

    pub fn shape(&self) -> &[usize] {
        self.shape.as_slice()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rows of a 2-D tensor; a 1-D tensor counts as one row.
    pub fn rows(&self) -> usize {
        match self.shape.ndim {
            2 => self.shape.dims[0],
            _ => 1,
        }
    }

    pub fn cols(&self) -> usize {
        match self.shape.ndim {
            2 => self.shape.dims[1],
            _ => self.values.len(),
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn view2(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.rows(), self.cols()), &self.values).expect("row-major layout")
    }

    pub fn view1(&self) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.values[..])
    }
}

pub(crate) fn view2_mut(values: &mut [f64], rows: usize, cols: usize) -> ArrayViewMut2<'_, f64> {
    ArrayViewMut2::from_shape((rows, cols), values).expect("row-major layout")
}

pub(crate) fn view2(values: &[f64], rows: usize, cols: usize) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((rows, cols), values).expect("row-major layout")
}

/// Numerically stable softmax of a vector.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-log softmax(logits)[class]`.
pub fn cross_entropy(logits: &[f64], class: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
    lse - logits[class]
}
