//! Dense rank-4 tensor in NHWC layout (batch, height, width, channels).

use super::NeuralError;
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    n: usize,
    h: usize,
    w: usize,
    c: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(n: usize, h: usize, w: usize, c: usize) -> Self {
        Self {
            n,
            h,
            w,
            c,
            data: vec![0.0; n * h * w * c],
        }
    }

    pub fn from_vec(
        n: usize,
        h: usize,
        w: usize,
        c: usize,
        data: Vec<f64>,
    ) -> Result<Self, NeuralError> {
        if data.len() != n * h * w * c {
            return Err(NeuralError::ShapeMismatch {
                context: "tensor construction",
                expected: format!("{} values for {}x{}x{}x{}", n * h * w * c, n, h, w, c),
                got: format!("{} values", data.len()),
            });
        }
        Ok(Self { n, h, w, c, data })
    }

    /// Reinterprets each matrix row as one H×W×C sample.
    pub fn from_matrix(m: &Matrix, h: usize, w: usize, c: usize) -> Result<Self, NeuralError> {
        if m.cols() != h * w * c {
            return Err(NeuralError::ShapeMismatch {
                context: "matrix to tensor",
                expected: format!("{} columns for {}x{}x{}", h * w * c, h, w, c),
                got: format!("{} columns", m.cols()),
            });
        }
        Ok(Self {
            n: m.rows(),
            h,
            w,
            c,
            data: m.data().to_vec(),
        })
    }

    /// Flattens each sample to one row (row-major H, W, C order).
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_parts(self.n, self.h * self.w * self.c, self.data.clone())
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.n, self.h, self.w, self.c)
    }

    pub fn batch(&self) -> usize {
        self.n
    }

    pub fn features_per_sample(&self) -> usize {
        self.h * self.w * self.c
    }

    #[inline]
    pub(crate) fn idx(&self, n: usize, h: usize, w: usize, c: usize) -> usize {
        ((n * self.h + h) * self.w + w) * self.c + c
    }

    #[inline]
    pub fn get(&self, n: usize, h: usize, w: usize, c: usize) -> f64 {
        self.data[self.idx(n, h, w, c)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, h: usize, w: usize, c: usize, value: f64) {
        let i = self.idx(n, h, w, c);
        self.data[i] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
