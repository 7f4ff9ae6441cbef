use crate::error::{Error, Result};

/// Dense channels-last 4-D array: `(batch, time, spatial, channel)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: [usize; 4],
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(dims: [usize; 4]) -> Self {
        Tensor {
            dims,
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub fn from_vec(dims: [usize; 4], data: Vec<f64>) -> Result<Self> {
        let want: usize = dims.iter().product();
        if data.len() != want {
            return Err(Error::Shape(format!(
                "{} values cannot fill dims {dims:?} ({want})",
                data.len()
            )));
        }
        Ok(Tensor { dims, data })
    }

    /// Stacks equally sized items along the batch axis.
    pub fn stack(item_dims: [usize; 3], items: &[&[f64]]) -> Result<Self> {
        let len: usize = item_dims.iter().product();
        let mut data = Vec::with_capacity(len * items.len());
        for item in items {
            if item.len() != len {
                return Err(Error::Shape(format!(
                    "batch item of length {} where {len} expected",
                    item.len()
                )));
            }
            data.extend_from_slice(item);
        }
        Tensor::from_vec([items.len(), item_dims[0], item_dims[1], item_dims[2]], data)
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn batch(&self) -> usize {
        self.dims[0]
    }

    pub fn item_len(&self) -> usize {
        self.dims[1] * self.dims[2] * self.dims[3]
    }

    pub fn item(&self, n: usize) -> &[f64] {
        let len = self.item_len();
        &self.data[n * len..(n + 1) * len]
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn offset(&self, n: usize, h: usize, w: usize, c: usize) -> usize {
        ((n * self.dims[1] + h) * self.dims[2] + w) * self.dims[3] + c
    }

    pub fn at(&self, n: usize, h: usize, w: usize, c: usize) -> f64 {
        self.data[self.offset(n, h, w, c)]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn reshape(self, dims: [usize; 4]) -> Result<Self> {
        Tensor::from_vec(dims, self.data)
    }

    /// Concatenates along the channel axis, `a`'s channels first.
    pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
        let [n, h, w, ca] = a.dims;
        let cb = b.dims[3];
        if b.dims[..3] != a.dims[..3] {
            return Err(Error::Shape(format!(
                "cannot fuse {:?} with {:?}",
                a.dims, b.dims
            )));
        }
        let mut data = Vec::with_capacity(a.len() + b.len());
        for (xa, xb) in a.data.chunks_exact(ca.max(1)).zip(b.data.chunks_exact(cb.max(1))) {
            data.extend_from_slice(xa);
            data.extend_from_slice(xb);
        }
        Tensor::from_vec([n, h, w, ca + cb], data)
    }

    /// Inverse of [`Tensor::concat_channels`].
    pub fn split_channels(&self, first: usize) -> Result<(Tensor, Tensor)> {
        let [n, h, w, c] = self.dims;
        if first > c {
            return Err(Error::Shape(format!("cannot split {c} channels at {first}")));
        }
        let mut a = Vec::with_capacity(n * h * w * first);
        let mut b = Vec::with_capacity(n * h * w * (c - first));
        for cell in self.data.chunks_exact(c.max(1)) {
            a.extend_from_slice(&cell[..first]);
            b.extend_from_slice(&cell[first..]);
        }
        Ok((
            Tensor::from_vec([n, h, w, first], a)?,
            Tensor::from_vec([n, h, w, c - first], b)?,
        ))
    }
}
