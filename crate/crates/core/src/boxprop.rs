//! Single-object box propagation: a fixed-template cross-correlation head
//! and a correlation-filter head learned by ridge regression in the Fourier
//! domain, both searched over a small pyramid of scales.

use image::{Rgb, RgbImage};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::features::{extract_builtin, l2_normalize_points};
use crate::geom::BBox;
use crate::grid::{Grid, Volume};
use crate::spectral::{dft2, dft2_channels, idft2, xcorr_fft, Spectrum};
use crate::types::FeatureMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    XCorr,
    Dcf,
}

impl std::str::FromStr for Head {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xcorr" => Ok(Head::XCorr),
            "dcf" => Ok(Head::Dcf),
            other => Err(Error::Config(format!("unknown head `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxPropConfig {
    /// Template and search patches span `context_factor * max(w, h)`.
    pub context_factor: f64,
    /// Side of the resampled square patch, in pixels.
    pub patch_size: usize,
    pub num_scales: usize,
    pub scale_step: f64,
    /// Penalty base; scale `i` steps from the middle get `penalty^|i|`.
    pub scale_penalty: f64,
    pub ridge: f64,
    pub momentum: f64,
    pub head: Head,
    pub response_upsample: usize,
    pub stride: u32,
    /// Ideal-response Gaussian width in cells; `None` means a tenth of the
    /// response width.
    pub gaussian_sigma: Option<f64>,
    /// Multiply responses by a Hann window before peak search.
    pub displacement_window: bool,
    /// Multiply correlation-filter patch features by a Hann window.
    pub feature_window: bool,
    pub normalize_features: bool,
}

impl Default for BoxPropConfig {
    fn default() -> Self {
        BoxPropConfig {
            context_factor: 4.5,
            patch_size: 520,
            num_scales: 3,
            scale_step: 1.0275,
            scale_penalty: 0.985,
            ridge: 1e-4,
            momentum: 1e-2,
            head: Head::Dcf,
            response_upsample: 16,
            stride: 8,
            gaussian_sigma: None,
            displacement_window: false,
            feature_window: true,
            normalize_features: true,
        }
    }
}

impl BoxPropConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.num_scales % 2 == 0 {
            return bad("num_scales must be odd");
        }
        if !(self.scale_step > 1.0) {
            return bad("scale_step must exceed 1");
        }
        if !(self.ridge >= 0.0) {
            return bad("ridge must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1]");
        }
        if !(self.context_factor > 0.0) {
            return bad("context_factor must be positive");
        }
        if self.stride == 0 || self.patch_size < self.stride as usize {
            return bad("patch_size must be at least one stride");
        }
        if self.response_upsample == 0 {
            return bad("response_upsample must be at least 1");
        }
        Ok(())
    }

    /// Cells per side of a patch feature map (65 at the defaults).
    pub fn patch_cells(&self) -> usize {
        self.patch_size / self.stride as usize
    }

    /// `(factor, penalty)` per scale, smallest factor first.
    pub fn scales(&self) -> Vec<(f64, f64)> {
        let mid = (self.num_scales / 2) as i32;
        (0..self.num_scales as i32)
            .map(|i| {
                let k = i - mid;
                (
                    self.scale_step.powi(k),
                    self.scale_penalty.powi(k.abs()),
                )
            })
            .collect()
    }

    fn sigma(&self) -> f64 {
        self.gaussian_sigma
            .unwrap_or(self.patch_cells() as f64 / 10.0)
    }
}

/// Frame input to the tracker: raw pixels, or a precomputed frame-level
/// feature map that is cropped directly.
#[derive(Debug, Clone, Copy)]
pub enum FrameInput<'a> {
    Image(&'a RgbImage),
    Features(&'a FeatureMap),
}

pub fn image_to_volume(image: &RgbImage) -> Volume {
    let data = image
        .pixels()
        .flat_map(|p| p.0.map(f64::from))
        .collect();
    Volume {
        height: image.height() as usize,
        width: image.width() as usize,
        channels: 3,
        data,
    }
}

pub fn volume_to_image(volume: &Volume) -> RgbImage {
    RgbImage::from_fn(volume.width as u32, volume.height as u32, |x, y| {
        let p = volume.point(y as usize, x as usize);
        let px = |i: usize| p[i.min(p.len() - 1)].round().clamp(0.0, 255.0) as u8;
        Rgb([px(0), px(1), px(2)])
    })
}

/// Square bilinear crop of side `side` centered at `(u, v)`, resampled to
/// `out_size x out_size`. Samples falling outside the source use the
/// source's per-channel mean.
pub fn crop_square(source: &Volume, u: f64, v: f64, side: f64, out_size: usize) -> Result<Volume> {
    if !(side > 0.0) || out_size == 0 {
        return Err(Error::dim("crop needs positive side and output size"));
    }
    let mean = source.channel_means();
    let c = source.channels;
    let scale = side / out_size as f64;
    let x_start = u - side / 2.0;
    let y_start = v - side / 2.0;
    let (sw, sh) = (source.width as isize, source.height as isize);
    let fetch = |x: isize, y: isize| -> &[f64] {
        if x < 0 || y < 0 || x >= sw || y >= sh {
            &mean
        } else {
            source.point(y as usize, x as usize)
        }
    };
    let mut out = Volume::zeros(out_size, out_size, c);
    for i in 0..out_size {
        let y = y_start + (i as f64 + 0.5) * scale - 0.5;
        let y0 = y.floor();
        let fy = y - y0;
        for j in 0..out_size {
            let x = x_start + (j as f64 + 0.5) * scale - 0.5;
            let x0 = x.floor();
            let fx = x - x0;
            let (xi, yi) = (x0 as isize, y0 as isize);
            let (a, b, cc, d) = (
                fetch(xi, yi),
                fetch(xi + 1, yi),
                fetch(xi, yi + 1),
                fetch(xi + 1, yi + 1),
            );
            let dst = out.point_mut(i, j);
            for ch in 0..c {
                let top = a[ch] * (1.0 - fx) + b[ch] * fx;
                let bottom = cc[ch] * (1.0 - fx) + d[ch] * fx;
                dst[ch] = top * (1.0 - fy) + bottom * fy;
            }
        }
    }
    Ok(out)
}

/// Crops the context patch around `b`: a square of side
/// `context_factor * max(w, h)` resampled to `patch_size`.
pub fn crop_patch(source: &Volume, b: &BBox, cfg: &BoxPropConfig) -> Result<Volume> {
    if !(b.w > 0.0 && b.h > 0.0) {
        return Err(Error::dim("box must have positive size"));
    }
    crop_square(
        source,
        b.u,
        b.v,
        cfg.context_factor * b.w.max(b.h),
        cfg.patch_size,
    )
}

/// Centered Gaussian response with peak 1 at `(height / 2, width / 2)`.
pub fn gaussian_response(height: usize, width: usize, sigma: f64) -> Grid {
    let (cy, cx) = ((height / 2) as f64, (width / 2) as f64);
    let denom = 2.0 * sigma * sigma;
    Grid::from_fn(height, width, |r, c| {
        let d2 = (r as f64 - cy).powi(2) + (c as f64 - cx).powi(2);
        (-d2 / denom).exp()
    })
}

/// Correlation filter in the Fourier domain, kept as a running numerator
/// and denominator so it can be updated by moving average.
#[derive(Debug, Clone, PartialEq)]
pub struct DcfTemplate {
    /// Per channel `x_hat * conj(y_hat)`.
    pub numerator: Vec<Spectrum>,
    /// `sum_c |x_hat_c|^2 + ridge`.
    pub denominator: Vec<f64>,
    pub ideal_response: Spectrum,
    pub ridge: f64,
}

impl DcfTemplate {
    pub fn height(&self) -> usize {
        self.ideal_response.height
    }

    pub fn width(&self) -> usize {
        self.ideal_response.width
    }

    pub fn channels(&self) -> usize {
        self.numerator.len()
    }

    /// Filter spectra `w_hat_c = numerator_c / denominator`.
    pub fn filter(&self) -> Vec<Spectrum> {
        self.numerator
            .iter()
            .map(|num| Spectrum {
                height: num.height,
                width: num.width,
                data: num
                    .data
                    .iter()
                    .zip(&self.denominator)
                    .map(|(n, d)| n / d)
                    .collect(),
            })
            .collect()
    }

    /// Filter taps in the spatial domain, one grid per channel.
    pub fn spatial_filter(&self) -> Vec<Grid> {
        self.filter().iter().map(idft2).collect()
    }

    /// Circular correlation of the filter with `search`:
    /// `g_hat = sum_c conj(w_hat_c) * z_hat_c`.
    pub fn response(&self, search: &Volume) -> Result<Grid> {
        if search.height != self.height()
            || search.width != self.width()
            || search.channels != self.channels()
        {
            return Err(Error::dim(format!(
                "search {}x{}x{} does not match filter {}x{}x{}",
                search.height,
                search.width,
                search.channels,
                self.height(),
                self.width(),
                self.channels()
            )));
        }
        let spectra = dft2_channels(search, self.height(), self.width());
        let mut acc = Spectrum::zeros(self.height(), self.width());
        for ((num, z), _) in self.numerator.iter().zip(&spectra).zip(0..) {
            for ((a, n), (zz, d)) in acc
                .data
                .iter_mut()
                .zip(&num.data)
                .zip(z.data.iter().zip(&self.denominator))
            {
                *a += (n / d).conj() * zz;
            }
        }
        Ok(idft2(&acc))
    }
}

fn numerator_and_energy(x: &Volume, y_hat: &Spectrum) -> (Vec<Spectrum>, Vec<f64>) {
    let spectra = dft2_channels(x, x.height, x.width);
    let mut energy = vec![0.0; x.height * x.width];
    for s in &spectra {
        for (e, z) in energy.iter_mut().zip(&s.data) {
            *e += z.norm_sqr();
        }
    }
    let numerator = spectra
        .iter()
        .map(|s| Spectrum {
            height: s.height,
            width: s.width,
            data: s
                .data
                .iter()
                .zip(&y_hat.data)
                .map(|(a, b): (&Complex64, &Complex64)| a * b.conj())
                .collect(),
        })
        .collect();
    (numerator, energy)
}

/// Closed-form multi-channel ridge regression
/// `argmin_w ||w * x - y||^2 + ridge ||w||^2`, solved per frequency.
pub fn dcf_solve(x: &Volume, y: &Grid, ridge: f64) -> Result<DcfTemplate> {
    if !(ridge >= 0.0) {
        return Err(Error::Config("ridge must be non-negative".into()));
    }
    if x.height != y.height || x.width != y.width {
        return Err(Error::dim("ideal response must match the patch grid"));
    }
    if x.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("patch features are not finite"));
    }
    let y_hat = dft2(y);
    let (numerator, energy) = numerator_and_energy(x, &y_hat);
    let denominator: Vec<f64> = energy.iter().map(|e| e + ridge).collect();
    let zero_bins = denominator.iter().filter(|d| **d == 0.0).count();
    if zero_bins > 0 {
        return Err(Error::Singular(zero_bins));
    }
    Ok(DcfTemplate {
        numerator,
        denominator,
        ideal_response: y_hat,
        ridge,
    })
}

/// Moving-average update of numerator and denominator with momentum
/// `alpha`: `new = alpha * from(x_t) + (1 - alpha) * old`.
pub fn dcf_update(template: &DcfTemplate, x_t: &Volume, alpha: f64) -> Result<DcfTemplate> {
    if x_t.height != template.height()
        || x_t.width != template.width()
        || x_t.channels != template.channels()
    {
        return Err(Error::dim("update patch does not match the template"));
    }
    let (fresh_num, energy) = numerator_and_energy(x_t, &template.ideal_response);
    let numerator = template
        .numerator
        .iter()
        .zip(&fresh_num)
        .map(|(old, new)| Spectrum {
            height: old.height,
            width: old.width,
            data: old
                .data
                .iter()
                .zip(&new.data)
                .map(|(o, n)| n * alpha + o * (1.0 - alpha))
                .collect(),
        })
        .collect();
    let denominator = template
        .denominator
        .iter()
        .zip(&energy)
        .map(|(old, e)| alpha * (e + template.ridge) + (1.0 - alpha) * old)
        .collect();
    Ok(DcfTemplate {
        numerator,
        denominator,
        ideal_response: template.ideal_response.clone(),
        ridge: template.ridge,
    })
}

/// Applies per-scale penalties to response peaks and returns the winning
/// scale index (first one on ties) with the penalized scores. Penalties
/// below one always make a scale less attractive, whatever the peak sign.
pub fn select_scale(peaks: &[f64], penalties: &[f64]) -> (usize, Vec<f64>) {
    let scores: Vec<f64> = peaks
        .iter()
        .zip(penalties)
        .map(|(&peak, &penalty)| if peak >= 0.0 { peak * penalty } else { peak / penalty })
        .collect();
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    (best, scores)
}

fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / (n - 1) as f64).cos())
        .collect()
}

#[derive(Debug, Clone)]
enum Model {
    XCorr { template: Volume },
    Dcf { template: DcfTemplate },
}

#[derive(Debug, Clone)]
struct TrackState {
    target: BBox,
    model: Model,
}

/// Diagnostics from the most recent [`BoxTracker::track_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub scale_index: usize,
    pub scale_factor: f64,
    pub scores: Vec<f64>,
    /// Displacement of the peak from the zero-motion cell, in patch cells.
    pub displacement_cells: (f64, f64),
}

/// Per-video single-object tracker.
#[derive(Debug, Clone)]
pub struct BoxTracker {
    cfg: BoxPropConfig,
    ideal: Grid,
    state: Option<TrackState>,
    last_report: Option<StepReport>,
}

impl BoxTracker {
    pub fn new(cfg: BoxPropConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.patch_cells();
        let ideal = gaussian_response(n, n, cfg.sigma());
        Ok(BoxTracker {
            cfg,
            ideal,
            state: None,
            last_report: None,
        })
    }

    pub fn config(&self) -> &BoxPropConfig {
        &self.cfg
    }

    pub fn current(&self) -> Option<BBox> {
        self.state.as_ref().map(|s| s.target)
    }

    pub fn last_report(&self) -> Option<&StepReport> {
        self.last_report.as_ref()
    }

    /// Cells per side of the cross-correlation template window.
    fn xcorr_template_cells(&self) -> usize {
        let n = self.cfg.patch_cells();
        let t = (n as f64 / self.cfg.context_factor).round() as usize;
        let t = if t % 2 == n % 2 { t } else { t + 1 };
        t.clamp(1, n)
    }

    /// Feature grid of the square context patch centered at `(u, v)`.
    fn patch_features(&self, input: FrameInput<'_>, u: f64, v: f64, side: f64) -> Result<Volume> {
        let cells = self.cfg.patch_cells();
        let fm = match input {
            FrameInput::Image(image) => {
                let patch = crop_square(&image_to_volume(image), u, v, side, self.cfg.patch_size)?;
                extract_builtin(&volume_to_image(&patch), self.cfg.stride)?
            }
            FrameInput::Features(fm) => {
                let r = f64::from(fm.stride());
                // cell (i, j) of a stride-r map covers pixels starting at i * r
                let vol = Volume::from(fm);
                let cropped = crop_square(&vol, u / r, v / r, side / r, cells)?;
                FeatureMap::new(
                    cells,
                    cells,
                    vol.channels,
                    self.cfg.stride,
                    cropped.data.iter().map(|v| *v as f32).collect(),
                )?
            }
        };
        let fm = if self.cfg.normalize_features {
            l2_normalize_points(&fm)
        } else {
            fm
        };
        let mut vol = Volume::from(&fm);
        // zero-mean channels keep the flat background from dominating the
        // correlation peak
        let means = vol.channel_means();
        for p in vol.data.chunks_exact_mut(vol.channels) {
            for (x, m) in p.iter_mut().zip(&means) {
                *x -= m;
            }
        }
        if self.cfg.feature_window && self.cfg.head == Head::Dcf {
            let (wy, wx) = (hann(vol.height), hann(vol.width));
            for r in 0..vol.height {
                for c in 0..vol.width {
                    let k = wy[r] * wx[c];
                    vol.point_mut(r, c).iter_mut().for_each(|x| *x *= k);
                }
            }
        }
        // fixed total energy: otherwise tighter crops, holding more object
        // texture, win the scale search on magnitude alone
        let energy: f64 = vol.data.iter().map(|x| x * x).sum();
        if energy > 0.0 {
            let k = ((vol.height * vol.width) as f64 / energy).sqrt();
            vol.data.iter_mut().for_each(|x| *x *= k);
        }
        Ok(vol)
    }

    /// Builds the frame-1 template from the ground-truth box.
    pub fn init(&mut self, input: FrameInput<'_>, target: BBox) -> Result<()> {
        let side = self.cfg.context_factor * target.w.max(target.h);
        let x = self.patch_features(input, target.u, target.v, side)?;
        let model = match self.cfg.head {
            Head::Dcf => Model::Dcf {
                template: dcf_solve(&x, &self.ideal, self.cfg.ridge)?,
            },
            Head::XCorr => {
                let t = self.xcorr_template_cells();
                let off = (x.height - t) / 2;
                Model::XCorr {
                    template: x.window(off, off, t, t),
                }
            }
        };
        self.state = Some(TrackState { target, model });
        self.last_report = None;
        Ok(())
    }

    fn respond(&self, model: &Model, search: &Volume) -> Result<Grid> {
        let mut resp = match model {
            Model::Dcf { template } => template.response(search)?,
            Model::XCorr { template } => xcorr_fft(template, search)?,
        };
        if self.cfg.displacement_window {
            let (wy, wx) = (hann(resp.height), hann(resp.width));
            for r in 0..resp.height {
                for c in 0..resp.width {
                    let v = resp.get(r, c) * wy[r] * wx[c];
                    resp.set(r, c, v);
                }
            }
        }
        Ok(resp)
    }

    /// Locates the target in a new frame and returns its box.
    pub fn track_step(&mut self, input: FrameInput<'_>) -> Result<BBox> {
        let state = self.state.as_ref().ok_or(Error::NotInitialized)?;
        let target = state.target;
        let base_side = self.cfg.context_factor * target.w.max(target.h);
        let scales = self.cfg.scales();

        let responses: Vec<Grid> = scales
            .par_iter()
            .map(|&(factor, _)| {
                let z = self.patch_features(input, target.u, target.v, base_side * factor)?;
                self.respond(&state.model, &z)
            })
            .collect::<Result<_>>()?;

        let peaks: Vec<f64> = responses.iter().map(Grid::max).collect();
        let penalties: Vec<f64> = scales.iter().map(|s| s.1).collect();
        let (best, scores) = select_scale(&peaks, &penalties);
        let (factor, _) = scales[best];
        let resp = &responses[best];

        let up = self.cfg.response_upsample;
        let fine = resp.upsample_bilinear(up);
        let (fr, fc, _) = fine.argmax();
        let to_cell = |i: usize| (i as f64 + 0.5) / up as f64 - 0.5;
        let (mut dy, mut dx) = match &state.model {
            Model::Dcf { .. } => (
                to_cell(fr) - (resp.height / 2) as f64,
                to_cell(fc) - (resp.width / 2) as f64,
            ),
            Model::XCorr { .. } => (
                to_cell(fr) - ((resp.height - 1) / 2) as f64,
                to_cell(fc) - ((resp.width - 1) / 2) as f64,
            ),
        };
        if matches!(state.model, Model::Dcf { .. }) {
            // circular responses wrap past the half-way point
            let (h, w) = (resp.height as f64, resp.width as f64);
            if dy > h / 2.0 {
                dy -= h;
            }
            if dx > w / 2.0 {
                dx -= w;
            }
        }
        let px_per_cell =
            f64::from(self.cfg.stride) * base_side * factor / self.cfg.patch_size as f64;
        let new_box = BBox::new(
            target.u + dx * px_per_cell,
            target.v + dy * px_per_cell,
            target.w * factor,
            target.h * factor,
        )?;

        let model = match &state.model {
            Model::Dcf { template } => {
                let side = self.cfg.context_factor * new_box.w.max(new_box.h);
                let x_t = self.patch_features(input, new_box.u, new_box.v, side)?;
                Model::Dcf {
                    template: dcf_update(template, &x_t, self.cfg.momentum)?,
                }
            }
            // every frame is matched against the first-frame template
            Model::XCorr { template } => Model::XCorr {
                template: template.clone(),
            },
        };
        self.last_report = Some(StepReport {
            scale_index: best,
            scale_factor: factor,
            scores,
            displacement_cells: (dx, dy),
        });
        self.state = Some(TrackState {
            target: new_box,
            model,
        });
        Ok(new_box)
    }
}
