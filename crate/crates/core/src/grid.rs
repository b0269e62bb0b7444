//! Dense `f64` grids used by the spectral and box-propagation code.

use crate::error::{Error, Result};
use crate::types::FeatureMap;

/// Single-channel row-major grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn zeros(height: usize, width: usize) -> Self {
        Grid {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Grid {
            height,
            width,
            data,
        }
    }

    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::dim(format!(
                "grid {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Grid {
            height,
            width,
            data,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    /// Location and value of the maximum; the first one in row-major order
    /// wins ties.
    pub fn argmax(&self) -> (usize, usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, &v) in self.data.iter().enumerate() {
            if v > best.1 {
                best = (i, v);
            }
        }
        (best.0 / self.width, best.0 % self.width, best.1)
    }

    pub fn max(&self) -> f64 {
        self.argmax().2
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Bilinear upsampling by an integer `factor`, sampling the source at
    /// `(i + 0.5) / factor - 0.5` with edge clamping.
    pub fn upsample_bilinear(&self, factor: usize) -> Grid {
        let factor = factor.max(1);
        if factor == 1 {
            return self.clone();
        }
        let (oh, ow) = (self.height * factor, self.width * factor);
        let f = factor as f64;
        let coord = |i: usize, n: usize| -> (usize, usize, f64) {
            let x = ((i as f64 + 0.5) / f - 0.5).clamp(0.0, (n - 1) as f64);
            let x0 = x.floor() as usize;
            let x1 = (x0 + 1).min(n - 1);
            (x0, x1, x - x0 as f64)
        };
        let cols: Vec<_> = (0..ow).map(|c| coord(c, self.width)).collect();
        let mut out = Vec::with_capacity(oh * ow);
        for r in 0..oh {
            let (r0, r1, fr) = coord(r, self.height);
            for &(c0, c1, fc) in &cols {
                let top = self.get(r0, c0) * (1.0 - fc) + self.get(r0, c1) * fc;
                let bottom = self.get(r1, c0) * (1.0 - fc) + self.get(r1, c1) * fc;
                out.push(top * (1.0 - fr) + bottom * fr);
            }
        }
        Grid {
            height: oh,
            width: ow,
            data: out,
        }
    }
}

/// Multi-channel grid, row-major with channels fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Volume {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Volume {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::dim(format!(
                "volume {height}x{width}x{channels} needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(Volume {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + ch]
    }

    pub fn point(&self, row: usize, col: usize) -> &[f64] {
        let at = (row * self.width + col) * self.channels;
        &self.data[at..at + self.channels]
    }

    pub fn point_mut(&mut self, row: usize, col: usize) -> &mut [f64] {
        let at = (row * self.width + col) * self.channels;
        &mut self.data[at..at + self.channels]
    }

    /// Extracts one channel as a plain grid.
    pub fn plane(&self, ch: usize) -> Grid {
        Grid {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .skip(ch)
                .step_by(self.channels)
                .copied()
                .collect(),
        }
    }

    /// Per-channel mean over all cells.
    pub fn channel_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.channels];
        for p in self.data.chunks_exact(self.channels) {
            for (m, v) in means.iter_mut().zip(p) {
                *m += v;
            }
        }
        let n = (self.height * self.width) as f64;
        means.iter_mut().for_each(|m| *m /= n);
        means
    }

    /// Window of `height x width` cells starting at `(row, col)`.
    pub fn window(&self, row: usize, col: usize, height: usize, width: usize) -> Volume {
        let mut data = Vec::with_capacity(height * width * self.channels);
        for r in row..row + height {
            for c in col..col + width {
                data.extend_from_slice(self.point(r, c));
            }
        }
        Volume {
            height,
            width,
            channels: self.channels,
            data,
        }
    }
}

impl From<&FeatureMap> for Volume {
    fn from(fm: &FeatureMap) -> Self {
        Volume {
            height: fm.height(),
            width: fm.width(),
            channels: fm.channels(),
            data: fm.data().iter().map(|v| f64::from(*v)).collect(),
        }
    }
}
