//! 2D discrete Fourier transforms and cross-correlation.
//!
//! The forward transform is unnormalized; [`idft2`] applies `1 / (H * W)`.
//! Correlation follows `r(d) = sum_n t(n) * s(n + d)`, which in the Fourier
//! domain is `S * conj(T)`.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Grid, Volume};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Complex-valued grid produced by [`dft2`].
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub height: usize,
    pub width: usize,
    pub data: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(height: usize, width: usize) -> Self {
        Spectrum {
            height,
            width,
            data: vec![Complex64::new(0.0, 0.0); height * width],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.width + col]
    }

    /// Elementwise `self * conj(other)`.
    pub fn mul_conj(&self, other: &Spectrum) -> Spectrum {
        Spectrum {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a * b.conj())
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Spectrum) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }
}

fn transform_2d(height: usize, width: usize, data: &mut [Complex64], inverse: bool) {
    let rows = plan(width, inverse);
    for row in data.chunks_exact_mut(width) {
        rows.process(row);
    }
    if height > 1 {
        let cols = plan(height, inverse);
        let mut column = vec![Complex64::new(0.0, 0.0); height];
        for c in 0..width {
            for r in 0..height {
                column[r] = data[r * width + c];
            }
            cols.process(&mut column);
            for r in 0..height {
                data[r * width + c] = column[r];
            }
        }
    }
}

/// Forward, unnormalized 2D DFT of a real grid. Any size is supported.
pub fn dft2(grid: &Grid) -> Spectrum {
    let mut data: Vec<Complex64> = grid.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform_2d(grid.height, grid.width, &mut data, false);
    Spectrum {
        height: grid.height,
        width: grid.width,
        data,
    }
}

/// Inverse of [`dft2`], keeping only the real part.
pub fn idft2(spectrum: &Spectrum) -> Grid {
    let mut data = spectrum.data.clone();
    transform_2d(spectrum.height, spectrum.width, &mut data, true);
    let scale = 1.0 / (spectrum.height * spectrum.width) as f64;
    Grid {
        height: spectrum.height,
        width: spectrum.width,
        data: data.iter().map(|z| z.re * scale).collect(),
    }
}

/// Per-channel spectra of a volume zero-padded to `height x width`.
pub fn dft2_channels(volume: &Volume, height: usize, width: usize) -> Vec<Spectrum> {
    (0..volume.channels)
        .map(|ch| {
            let mut padded = Grid::zeros(height, width);
            for r in 0..volume.height.min(height) {
                for c in 0..volume.width.min(width) {
                    padded.set(r, c, volume.get(r, c, ch));
                }
            }
            dft2(&padded)
        })
        .collect()
}

fn check_fits(template: &Volume, search: &Volume) -> Result<()> {
    if template.channels != search.channels {
        return Err(Error::dim(format!(
            "template has {} channels, search has {}",
            template.channels, search.channels
        )));
    }
    if template.height > search.height
        || template.width > search.width
        || template.height == 0
        || template.width == 0
    {
        return Err(Error::dim(format!(
            "template {}x{} does not fit in search {}x{}",
            template.height, template.width, search.height, search.width
        )));
    }
    Ok(())
}

/// Valid-mode cross-correlation summed over channels, computed directly.
/// The output is `(H' - H + 1) x (W' - W + 1)`.
pub fn xcorr_spatial(template: &Volume, search: &Volume) -> Result<Grid> {
    check_fits(template, search)?;
    let oh = search.height - template.height + 1;
    let ow = search.width - template.width + 1;
    let c = template.channels;
    let mut out = Grid::zeros(oh, ow);
    for dy in 0..oh {
        for dx in 0..ow {
            let mut acc = 0.0;
            for r in 0..template.height {
                let t_row = &template.data[r * template.width * c..(r + 1) * template.width * c];
                let s_at = ((r + dy) * search.width + dx) * c;
                let s_row = &search.data[s_at..s_at + template.width * c];
                acc += t_row.iter().zip(s_row).map(|(a, b)| a * b).sum::<f64>();
            }
            out.set(dy, dx, acc);
        }
    }
    Ok(out)
}

/// Same result as [`xcorr_spatial`], computed through zero-padded DFTs with
/// the template spectrum conjugated.
pub fn xcorr_fft(template: &Volume, search: &Volume) -> Result<Grid> {
    check_fits(template, search)?;
    let (h, w) = (search.height, search.width);
    let t_spec = dft2_channels(template, h, w);
    let s_spec = dft2_channels(search, h, w);
    let mut acc = Spectrum::zeros(h, w);
    for (s, t) in s_spec.iter().zip(&t_spec) {
        acc.add_assign(&s.mul_conj(t));
    }
    let full = idft2(&acc);
    let oh = h - template.height + 1;
    let ow = w - template.width + 1;
    Ok(Grid::from_fn(oh, ow, |r, c| full.get(r, c)))
}

/// Circular cross-correlation of two equally sized volumes, summed over
/// channels.
pub fn xcorr_circular(template: &Volume, search: &Volume) -> Result<Grid> {
    if template.height != search.height
        || template.width != search.width
        || template.channels != search.channels
    {
        return Err(Error::dim("circular correlation needs equal shapes"));
    }
    let (h, w) = (search.height, search.width);
    let t_spec = dft2_channels(template, h, w);
    let s_spec = dft2_channels(search, h, w);
    let mut acc = Spectrum::zeros(h, w);
    for (s, t) in s_spec.iter().zip(&t_spec) {
        acc.add_assign(&s.mul_conj(t));
    }
    Ok(idft2(&acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_dft(g: &Grid) -> Spectrum {
        let (h, w) = (g.height, g.width);
        let mut out = Spectrum::zeros(h, w);
        for ky in 0..h {
            for kx in 0..w {
                let mut acc = Complex64::new(0.0, 0.0);
                for y in 0..h {
                    for x in 0..w {
                        let phase = -std::f64::consts::TAU
                            * ((ky * y) as f64 / h as f64 + (kx * x) as f64 / w as f64);
                        acc += Complex64::from_polar(g.get(y, x), phase);
                    }
                }
                out.data[ky * w + kx] = acc;
            }
        }
        out
    }

    fn random_volume(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Volume {
        Volume::new(h, w, c, (0..h * w * c).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn constant_grid_concentrates_at_dc() {
        let g = Grid::from_fn(3, 5, |_, _| 2.0);
        let s = dft2(&g);
        assert!((s.get(0, 0).re - 30.0).abs() < 1e-12);
        for (i, z) in s.data.iter().enumerate().skip(1) {
            assert!(z.norm() < 1e-12, "bin {i} = {z}");
        }
    }

    #[test]
    fn matches_naive_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (h, w) in [(4, 4), (3, 5), (7, 1), (6, 9)] {
            let g = Grid::from_fn(h, w, |_, _| rng.random_range(-1.0..1.0));
            let fast = dft2(&g);
            let slow = naive_dft(&g);
            for (a, b) in fast.data.iter().zip(&slow.data) {
                assert!((a - b).norm() < 1e-9);
            }
            let back = idft2(&fast);
            for (a, b) in back.data.iter().zip(&g.data) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn delta_template_reproduces_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let search = random_volume(&mut rng, 9, 7, 2);
        let mut template = Volume::zeros(3, 3, 2);
        template.point_mut(1, 2)[1] = 1.0;
        let spatial = xcorr_spatial(&template, &search).unwrap();
        let fft = xcorr_fft(&template, &search).unwrap();
        assert_eq!((spatial.height, spatial.width), (7, 5));
        for r in 0..7 {
            for c in 0..5 {
                assert_eq!(spatial.get(r, c), search.get(r + 1, c + 2, 1));
                assert!((fft.get(r, c) - search.get(r + 1, c + 2, 1)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn translated_copy_is_found() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let template = random_volume(&mut rng, 4, 5, 3);
        let mut search = Volume::zeros(16, 16, 3);
        for r in 0..4 {
            for c in 0..5 {
                search.point_mut(r + 9, c + 2).copy_from_slice(template.point(r, c));
            }
        }
        let (r, c, _) = xcorr_spatial(&template, &search).unwrap().argmax();
        assert_eq!((r, c), (9, 2));
        let (r, c, _) = xcorr_fft(&template, &search).unwrap().argmax();
        assert_eq!((r, c), (9, 2));
    }

    #[test]
    fn zero_template_gives_zero_response() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let search = random_volume(&mut rng, 10, 10, 2);
        let resp = xcorr_fft(&Volume::zeros(3, 3, 2), &search).unwrap();
        assert!(resp.data.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn oversized_template_is_rejected() {
        let t = Volume::zeros(5, 5, 1);
        let s = Volume::zeros(4, 8, 1);
        assert!(matches!(xcorr_spatial(&t, &s), Err(Error::Dimension(_))));
        assert!(matches!(xcorr_fft(&t, &s), Err(Error::Dimension(_))));
        assert!(xcorr_fft(&Volume::zeros(2, 2, 2), &Volume::zeros(4, 4, 1)).is_err());
    }

    #[test]
    fn fft_matches_spatial_on_8x8_in_16x16() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = random_volume(&mut rng, 8, 8, 3);
        let s = random_volume(&mut rng, 16, 16, 3);
        let a = xcorr_spatial(&t, &s).unwrap();
        let b = xcorr_fft(&t, &s).unwrap();
        let scale = a.max_abs();
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((x - y).abs() <= 1e-5 * scale);
        }
    }

    #[test]
    fn circular_correlation_peaks_at_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let t = random_volume(&mut rng, 6, 7, 2);
        let mut s = Volume::zeros(6, 7, 2);
        for r in 0..6 {
            for c in 0..7 {
                s.point_mut((r + 2) % 6, (c + 3) % 7).copy_from_slice(t.point(r, c));
            }
        }
        let (r, c, _) = xcorr_circular(&t, &s).unwrap().argmax();
        assert_eq!((r, c), (2, 3));
    }
}
