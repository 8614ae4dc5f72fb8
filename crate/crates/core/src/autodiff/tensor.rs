use crate::error::{MkrError, Result};
use crate::scalar::Scalar;

/// Dense row-major array.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(MkrError::contract(format!(
                "tensor shape {shape:?} has a zero extent"
            )));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(MkrError::dim("tensor", &shape, &[data.len()]));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![T::zero(); n],
        }
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::filled(shape, T::one())
    }

    pub fn scalar(v: T) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
        }
    }

    /// 1-D tensor.
    pub fn vector(data: Vec<T>) -> Self {
        assert!(!data.is_empty(), "empty vector tensor");
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn from_f64(shape: &[usize], data: &[f64]) -> Result<Self> {
        Self::new(shape.to_vec(), data.iter().map(|&x| T::lit(x)).collect())
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Value of a one-element tensor.
    pub fn item(&self) -> T {
        debug_assert!(self.is_scalar());
        self.data[0]
    }

    /// `(rows, cols)` view: a vector of length n is a single row.
    pub fn dims2(&self) -> (usize, usize) {
        match self.shape.as_slice() {
            [n] => (1, *n),
            [r, c] => (*r, *c),
            _ => {
                let c = *self.shape.last().unwrap();
                (self.data.len() / c, c)
            }
        }
    }

    pub fn rows(&self) -> usize {
        self.dims2().0
    }

    pub fn cols(&self) -> usize {
        self.dims2().1
    }

    pub fn row(&self, i: usize) -> &[T] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols() + j]
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        Self::new(shape.to_vec(), self.data.clone())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.data.len(), other.data.len());
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn squared_norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let (r, c) = self.dims2();
        let mut out = vec![T::zero(); r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Tensor {
            shape: vec![c, r],
            data: out,
        }
    }

    /// Matrix product of two 2-D tensors.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.shape.len() != 2 || other.shape.len() != 2 || self.shape[1] != other.shape[0] {
            return Err(MkrError::dim("matmul", &self.shape, &other.shape));
        }
        let (m, n, p) = (self.shape[0], self.shape[1], other.shape[1]);
        let mut out = vec![T::zero(); m * p];
        for i in 0..m {
            let out_row = &mut out[i * p..(i + 1) * p];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == T::zero() {
                    continue;
                }
                let b_row = &other.data[k * p..(k + 1) * p];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Tensor {
            shape: vec![m, p],
            data: out,
        })
    }

    /// Product with the transpose of `other`: `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Self) -> Result<Self> {
        let (m, n) = self.dims2();
        let (p, n2) = other.dims2();
        if n != n2 || self.shape.len() != 2 || other.shape.len() != 2 {
            return Err(MkrError::dim("matmul_t", &self.shape, &other.shape));
        }
        let mut out = vec![T::zero(); m * p];
        for i in 0..m {
            let a = &self.data[i * n..(i + 1) * n];
            for j in 0..p {
                let b = &other.data[j * n..(j + 1) * n];
                out[i * p + j] = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
            }
        }
        Ok(Tensor {
            shape: vec![m, p],
            data: out,
        })
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &Self) -> Result<Self> {
        let (n, m) = self.dims2();
        let (n2, p) = other.dims2();
        if n != n2 || self.shape.len() != 2 || other.shape.len() != 2 {
            return Err(MkrError::dim("t_matmul", &self.shape, &other.shape));
        }
        let mut out = vec![T::zero(); m * p];
        for k in 0..n {
            let a = &self.data[k * m..(k + 1) * m];
            let b = &other.data[k * p..(k + 1) * p];
            for (i, &x) in a.iter().enumerate() {
                if x == T::zero() {
                    continue;
                }
                for (o, &y) in out[i * p..(i + 1) * p].iter_mut().zip(b) {
                    *o += x * y;
                }
            }
        }
        Ok(Tensor {
            shape: vec![m, p],
            data: out,
        })
    }
}

/// Logistic function, evaluated on the branch that cannot overflow.
///
/// The result is kept inside the open interval (0, 1): values that would
/// round to 0 or 1 are pinned to the nearest representable interior point.
pub fn stable_sigmoid<T: Scalar>(x: T) -> T {
    let s = if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let z = x.exp();
        z / (T::one() + z)
    };
    let upper = T::one() - T::epsilon() / T::lit(2.0);
    s.max(T::min_positive_value()).min(upper)
}
