use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signalio::ResponseSample;

/// Dense `channels x 1 x length` activation, stored channel-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    channels: usize,
    length: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(channels: usize, length: usize) -> Self {
        Self {
            channels,
            length,
            data: vec![0.0; channels * length],
        }
    }

    pub fn from_vec(channels: usize, length: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * length {
            return Err(Error::dim(format!(
                "tensor {channels}x1x{length} needs {} values, got {}",
                channels * length,
                data.len()
            )));
        }
        Ok(Self {
            channels,
            length,
            data,
        })
    }

    pub fn from_sample(sample: &ResponseSample) -> Self {
        Self {
            channels: sample.channels(),
            length: sample.length(),
            data: sample.data().to_vec(),
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn length(&self) -> usize {
        self.length
    }

    /// `(channels, 1, length)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.channels, 1, self.length)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn channel(&self, ch: usize) -> &[f64] {
        &self.data[ch * self.length..(ch + 1) * self.length]
    }

    pub fn channel_mut(&mut self, ch: usize) -> &mut [f64] {
        &mut self.data[ch * self.length..(ch + 1) * self.length]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Reinterprets the same buffer with a different channel/length split.
    pub fn reshape(self, channels: usize, length: usize) -> Result<Self> {
        Self::from_vec(channels, length, self.data)
    }

    pub fn dot(&self, other: &Tensor3) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }
}
