use crate::error::{Error, Result};

/// Maximum tensor rank supported by the container and the file format.
pub const MAX_RANK: usize = 4;

/// Dense row-major tensor of f64 values, rank 0 through 4.
///
/// All heavy state in the pipeline (feature maps, masks, centroids,
/// checkpoints) lives in this container. Values are kept finite by
/// construction; every constructor rejects NaN and infinities.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

/// Per-pixel soft part assignment, l x H x W, simplex across channels.
pub type SoftMask = Tensor;

/// Per-pixel one-hot part assignment, l x H x W.
pub type HardMask = Tensor;

impl Tensor {
    /// Build a tensor from extents and row-major data.
    pub fn from_vec(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        if dims.len() > MAX_RANK {
            return Err(Error::RankTooLarge(dims.len() as u32));
        }
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(Error::ShapeMismatch {
                context: "tensor construction",
                expected: vec![expected],
                actual: vec![data.len()],
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor data"));
        }
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    /// All-zero tensor with the given extents.
    pub fn zeros(dims: &[usize]) -> Self {
        let len = dims.iter().product();
        Self {
            dims: dims.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
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

    /// Row-major linear offset of a rank-3 index.
    #[inline]
    pub fn offset3(&self, a: usize, b: usize, c: usize) -> usize {
        debug_assert_eq!(self.rank(), 3);
        (a * self.dims[1] + b) * self.dims[2] + c
    }

    #[inline]
    pub fn get3(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[self.offset3(a, b, c)]
    }

    #[inline]
    pub fn set3(&mut self, a: usize, b: usize, c: usize, value: f64) {
        let off = self.offset3(a, b, c);
        self.data[off] = value;
    }

    #[inline]
    pub fn add3(&mut self, a: usize, b: usize, c: usize, value: f64) {
        let off = self.offset3(a, b, c);
        self.data[off] += value;
    }

    /// Row-major linear offset of a rank-2 index.
    #[inline]
    pub fn offset2(&self, a: usize, b: usize) -> usize {
        debug_assert_eq!(self.rank(), 2);
        a * self.dims[1] + b
    }

    #[inline]
    pub fn get2(&self, a: usize, b: usize) -> f64 {
        self.data[self.offset2(a, b)]
    }

    #[inline]
    pub fn set2(&mut self, a: usize, b: usize, value: f64) {
        let off = self.offset2(a, b);
        self.data[off] = value;
    }

    /// Row (contiguous last axis) of a rank-2 tensor.
    pub fn row(&self, a: usize) -> &[f64] {
        debug_assert_eq!(self.rank(), 2);
        let w = self.dims[1];
        &self.data[a * w..(a + 1) * w]
    }

    /// Channel plane (contiguous H*W block) of a rank-3 tensor.
    pub fn plane(&self, a: usize) -> &[f64] {
        debug_assert_eq!(self.rank(), 3);
        let hw = self.dims[1] * self.dims[2];
        &self.data[a * hw..(a + 1) * hw]
    }

    /// Check that the extents match, with context for the error message.
    pub fn expect_dims(&self, dims: &[usize], context: &'static str) -> Result<()> {
        if self.dims != dims {
            return Err(Error::ShapeMismatch {
                context,
                expected: dims.to_vec(),
                actual: self.dims.clone(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        let err = Tensor::from_vec(&[2, 3], vec![1.0; 5]).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }));
    }

    #[test]
    fn from_vec_rejects_non_finite() {
        let err = Tensor::from_vec(&[2], vec![1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn from_vec_rejects_rank_5() {
        let err = Tensor::from_vec(&[1, 1, 1, 1, 1], vec![1.0]).unwrap_err();
        assert!(matches!(err, Error::RankTooLarge(5)));
    }

    #[test]
    fn zero_length_dim_is_valid() {
        let t = Tensor::from_vec(&[3, 0, 2], vec![]).unwrap();
        assert_eq!(t.len(), 0);
    }

    #[test]
    fn row_major_indexing() {
        let t = Tensor::from_vec(&[2, 2, 2], (0..8).map(f64::from).collect()).unwrap();
        assert_eq!(t.get3(1, 0, 1), 5.0);
        assert_eq!(t.plane(1), &[4.0, 5.0, 6.0, 7.0]);
    }
}
