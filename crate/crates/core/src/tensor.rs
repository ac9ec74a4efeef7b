use crate::error::{Error, Result};

/// Dense channel-first `f32` array of shape `(channels, height, width)`.
///
/// Storage is channel-major, then row-major within each channel.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: [usize; 3],
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: [usize; 3], data: Vec<f32>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::Shape(format!("tensor dims {dims:?} contain a zero")));
        }
        let expected = dims.iter().product::<usize>();
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "tensor dims {dims:?} need {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::filled(channels, height, width, 0.0)
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Self {
        assert!(channels > 0 && height > 0 && width > 0, "tensor dims must be positive");
        Self {
            dims: [channels, height, width],
            data: vec![value; channels * height * width],
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn channels(&self) -> usize {
        self.dims[0]
    }

    pub fn height(&self) -> usize {
        self.dims[1]
    }

    pub fn width(&self) -> usize {
        self.dims[2]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn plane(&self, channel: usize) -> &[f32] {
        let size = self.dims[1] * self.dims[2];
        &self.data[channel * size..(channel + 1) * size]
    }

    pub fn plane_mut(&mut self, channel: usize) -> &mut [f32] {
        let size = self.dims[1] * self.dims[2];
        &mut self.data[channel * size..(channel + 1) * size]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.dims[1] + y) * self.dims[2] + x]
    }

    pub fn map_inplace(&mut self, f: impl Fn(f32) -> f32) {
        self.data.iter_mut().for_each(|v| *v = f(*v));
    }
}
