use crate::error::{Error, Result};

/// Batched feature maps, laid out n-major, then channel, row, column.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn new(dims: [usize; 4], data: Vec<f64>) -> Result<Self> {
        let [n, c, h, w] = dims;
        if data.len() != n * c * h * w {
            return Err(Error::shape(format!(
                "{} values for tensor of dims {dims:?}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("tensor value at index {i}")));
        }
        Ok(Self { n, c, h, w, data })
    }

    pub fn zeros(dims: [usize; 4]) -> Self {
        let [n, c, h, w] = dims;
        Self {
            n,
            c,
            h,
            w,
            data: vec![0.0; n * c * h * w],
        }
    }

    /// Build without the finiteness scan. Internal hot paths only.
    pub(crate) fn from_raw(dims: [usize; 4], data: Vec<f64>) -> Self {
        let [n, c, h, w] = dims;
        debug_assert_eq!(data.len(), n * c * h * w);
        Self { n, c, h, w, data }
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.n, self.c, self.h, self.w]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
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

    #[inline]
    pub fn index(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        ((n * self.c + c) * self.h + y) * self.w + x
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(n, c, y, x)]
    }

    pub fn plane_len(&self) -> usize {
        self.h * self.w
    }

    /// Elementwise sum; shapes must agree.
    pub fn add(&self, other: &Tensor4) -> Result<Tensor4> {
        if self.dims() != other.dims() {
            return Err(Error::shape(format!(
                "cannot add {:?} and {:?}",
                self.dims(),
                other.dims()
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Tensor4::from_raw(self.dims(), data))
    }

    pub fn add_assign(&mut self, other: &Tensor4) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::shape(format!(
                "cannot add {:?} and {:?}",
                self.dims(),
                other.dims()
            )));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, k: f64) {
        for v in &mut self.data {
            *v *= k;
        }
    }

    /// Frobenius inner product.
    pub fn dot(&self, other: &Tensor4) -> Result<f64> {
        if self.dims() != other.dims() {
            return Err(Error::shape(format!(
                "cannot take inner product of {:?} and {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
