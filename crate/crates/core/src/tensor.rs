//! Dense row-major tensors and the handful of numeric kernels the model needs.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense n-dimensional array stored row-major in one contiguous buffer.
///
/// A rank-0 tensor (empty shape) holds exactly one value.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

/// Pointwise operations on a single tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Relu,
    Exp,
    Log,
}

/// Pointwise operations on two tensors of identical shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
}

impl<T: Scalar> Tensor<T> {
    pub fn from_vec(shape: impl Into<Vec<usize>>, data: Vec<T>) -> Result<Self> {
        let shape = shape.into();
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Dimension {
                op: "from_vec",
                left: shape,
                right: vec![data.len()],
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn full(shape: impl Into<Vec<usize>>, value: T) -> Self {
        let shape = shape.into();
        let len = shape.iter().product();
        Tensor {
            shape,
            data: vec![value; len],
        }
    }

    pub fn zeros(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn ones(shape: impl Into<Vec<usize>>) -> Self {
        Self::full(shape, T::one())
    }

    pub fn scalar(value: T) -> Self {
        Tensor {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self::zeros(other.shape.clone())
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros([n, n]);
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        t
    }

    /// Builds a rank-2 tensor from equally long rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::Dimension {
                    op: "from_rows",
                    left: vec![cols],
                    right: vec![row.len()],
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_vec([rows.len(), cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
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

    /// Leading extent; 1 for a scalar.
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    /// Number of elements per leading index.
    pub fn cols(&self) -> usize {
        self.shape.iter().skip(1).product()
    }

    pub fn row(&self, r: usize) -> &[T] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols() + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: T) {
        let cols = self.cols();
        self.data[r * cols + c] = value;
    }

    fn require_matrix(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::Dimension {
                op,
                left: self.shape.clone(),
                right: vec![0, 0],
            }),
        }
    }

    fn require_same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Dimension {
                op,
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        Ok(())
    }

    /// Matrix product of `[r × k]` and `[k × c]`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        let (r, k) = self.require_matrix("matmul")?;
        let (k2, c) = other.require_matrix("matmul")?;
        if k != k2 {
            return Err(Error::Dimension {
                op: "matmul",
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        let mut out = Self::zeros([r, c]);
        for i in 0..r {
            let lhs = &self.data[i * k..(i + 1) * k];
            let dst = &mut out.data[i * c..(i + 1) * c];
            for (p, &a) in lhs.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                axpy(a, &other.data[p * c..(p + 1) * c], dst);
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Result<Self> {
        let (r, c) = self.require_matrix("transpose")?;
        let mut out = Self::zeros([c, r]);
        for i in 0..r {
            for j in 0..c {
                out.data[j * r + i] = self.data[i * c + j];
            }
        }
        Ok(out)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.require_same_shape(other, op)?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn unary(&self, op: UnaryOp) -> Self {
        match op {
            UnaryOp::Relu => self.map(|x| x.max(T::zero())),
            UnaryOp::Exp => self.map(T::exp),
            UnaryOp::Log => self.map(T::ln),
        }
    }

    pub fn binary(&self, op: BinaryOp, other: &Self) -> Result<Self> {
        match op {
            BinaryOp::Add => self.zip_map(other, "add", |a, b| a + b),
            BinaryOp::Sub => self.zip_map(other, "sub", |a, b| a - b),
            BinaryOp::Mul => self.zip_map(other, "mul", |a, b| a * b),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.binary(BinaryOp::Add, other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.binary(BinaryOp::Sub, other)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.binary(BinaryOp::Mul, other)
    }

    pub fn relu(&self) -> Self {
        self.unary(UnaryOp::Relu)
    }

    pub fn exp(&self) -> Self {
        self.unary(UnaryOp::Exp)
    }

    pub fn ln(&self) -> Self {
        self.unary(UnaryOp::Log)
    }

    pub fn scale(&self, k: T) -> Self {
        self.map(|x| x * k)
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.require_same_shape(other, "add_assign")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale_assign(&mut self, k: T) {
        for a in &mut self.data {
            *a *= k;
        }
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    pub fn sum(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| acc + x)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Converts every element to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| U::lit(x.as_f64())).collect(),
        }
    }
}

/// `dst += a * src`, elementwise.
#[inline]
pub(crate) fn axpy<T: Scalar>(a: T, src: &[T], dst: &mut [T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += a * s;
    }
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Numerically stable `log Σ exp(v)`.
///
/// Equals `max(v)` exactly for a single element.
pub fn logsumexp<T: Scalar>(v: &[T]) -> Result<T> {
    let max = v
        .iter()
        .copied()
        .reduce(T::max)
        .ok_or_else(|| Error::Domain("logsumexp of an empty vector".into()))?;
    if v.len() == 1 || !max.is_finite() {
        return Ok(max);
    }
    let sum = v.iter().fold(T::zero(), |acc, &x| acc + (x - max).exp());
    Ok(max + sum.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Tensor<f64> {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn matmul_examples() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(a.matmul(&Tensor::identity(2)).unwrap(), a);
        assert_eq!(a.matmul(&m(&[&[0.0], &[0.0]])).unwrap(), m(&[&[0.0], &[0.0]]));
        assert_eq!(a.matmul(&m(&[&[5.0], &[6.0]])).unwrap(), m(&[&[17.0], &[39.0]]));
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let a = Tensor::<f64>::zeros([2, 3]);
        let b = Tensor::<f64>::zeros([2, 3]);
        let err = a.matmul(&b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]"), "{err}");
    }

    #[test]
    fn from_vec_checks_length() {
        assert!(Tensor::from_vec([2, 2], vec![1.0f64; 3]).is_err());
        let s = Tensor::from_vec(Vec::new(), vec![7.0f64]).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.rank(), 0);
    }

    #[test]
    fn elementwise_examples() {
        let t = Tensor::from_vec([3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(t.relu().data(), &[0.0, 0.0, 2.0]);
        assert_eq!(t.add(&Tensor::zeros_like(&t)).unwrap(), t);
        let u = Tensor::from_vec([3], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(u.scale(2.0).data(), &[2.0, 4.0, 6.0]);
        assert_eq!(u.mul(&u).unwrap().data(), &[1.0, 4.0, 9.0]);
        assert!(u.add(&Tensor::zeros([2])).is_err());
        assert_eq!(u.ln().exp().data()[2], 3.0f64.ln().exp());
    }

    #[test]
    fn logsumexp_examples() {
        let v = [0.0f64; 4];
        assert!((logsumexp(&v).unwrap() - 4f64.ln()).abs() < 1e-12);
        assert_eq!(logsumexp(&[-3.25f64]).unwrap(), -3.25);
        let big = logsumexp(&[1000.0f64, 1000.0]).unwrap();
        assert_eq!(big, 1000.0 + 2f64.ln());
        let huge = logsumexp(&[1e300f64, 1e300]).unwrap();
        assert!(huge.is_finite());
        assert!(logsumexp::<f64>(&[]).is_err());
    }

    #[test]
    fn works_for_f32() {
        let a = Tensor::<f32>::from_vec([1, 2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::<f32>::from_vec([2, 1], vec![3.0, 4.0]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().data(), &[11.0]);
        assert!((logsumexp(&[0.0f32, 0.0]).unwrap() - 2f32.ln()).abs() < 1e-6);
    }

    fn small_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-50.0f64..50.0, 1..10)
    }

    fn matrix(r: usize, c: usize) -> impl Strategy<Value = Tensor<f64>> {
        prop::collection::vec(-2.0f64..2.0, r * c)
            .prop_map(move |d| Tensor::from_vec([r, c], d).unwrap())
    }

    proptest! {
        #[test]
        fn logsumexp_bounds(v in small_vec()) {
            let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let l = logsumexp(&v).unwrap();
            prop_assert!(l >= max);
            prop_assert!(l <= max + (v.len() as f64).ln() + 1e-12);
        }

        #[test]
        fn logsumexp_shift_equivariant(v in small_vec(), c in -100.0f64..100.0) {
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let diff = logsumexp(&shifted).unwrap() - logsumexp(&v).unwrap() - c;
            prop_assert!(diff.abs() < 1e-9);
        }

        #[test]
        fn matmul_associative(a in matrix(3, 4), b in matrix(4, 2), c in matrix(2, 5)) {
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            for (x, y) in left.data().iter().zip(right.data()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
