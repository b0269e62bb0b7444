use image::RgbImage;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::FeatureMap;

/// Mean RGB (3) + gradient orientation histogram (8) + 2x2 sub-cell mean
/// intensity (4).
pub const BUILTIN_CHANNELS: usize = 15;
const ORIENTATION_BINS: usize = 8;

/// Hand-crafted dense features, one point per `stride x stride` cell.
///
/// Intensities are scaled to `[0, 1]`. Gradients use central differences
/// (clamped at the border) and are binned by signed orientation with bin
/// `b` centered on `b * 45` degrees, weighted by magnitude and averaged over
/// the cell.
pub fn extract_builtin(image: &RgbImage, stride: u32) -> Result<FeatureMap> {
    let (iw, ih) = (image.width() as usize, image.height() as usize);
    let s = stride as usize;
    if s == 0 || iw < s || ih < s {
        return Err(Error::dim(format!(
            "image {iw}x{ih} smaller than stride {stride}"
        )));
    }
    let gray: Vec<f32> = image
        .pixels()
        .map(|p| (f32::from(p[0]) + f32::from(p[1]) + f32::from(p[2])) / (3.0 * 255.0))
        .collect();
    let (gh, gw) = (ih / s, iw / s);
    let cell_area = (s * s) as f32;
    let half = (s / 2).max(1);
    let sub_ranges = [(0, half), (half.min(s - 1), s)];

    let rows: Vec<Vec<f32>> = (0..gh)
        .into_par_iter()
        .map(|gy| {
            let mut row = vec![0.0f32; gw * BUILTIN_CHANNELS];
            for gx in 0..gw {
                let out = &mut row[gx * BUILTIN_CHANNELS..(gx + 1) * BUILTIN_CHANNELS];
                let (x0, y0) = (gx * s, gy * s);
                for y in y0..y0 + s {
                    for x in x0..x0 + s {
                        let p = image.get_pixel(x as u32, y as u32);
                        for ch in 0..3 {
                            out[ch] += f32::from(p[ch]) / 255.0;
                        }
                        let at = |xx: usize, yy: usize| gray[yy * iw + xx];
                        let gx_ = at((x + 1).min(iw - 1), y) - at(x.saturating_sub(1), y);
                        let gy_ = at(x, (y + 1).min(ih - 1)) - at(x, y.saturating_sub(1));
                        let mag = (gx_ * gx_ + gy_ * gy_).sqrt();
                        if mag > 0.0 {
                            let angle = gy_.atan2(gx_).rem_euclid(std::f32::consts::TAU);
                            let bin = ((angle + std::f32::consts::FRAC_PI_8)
                                / std::f32::consts::FRAC_PI_4)
                                .floor() as usize
                                % ORIENTATION_BINS;
                            out[3 + bin] += mag;
                        }
                    }
                }
                out[..3 + ORIENTATION_BINS]
                    .iter_mut()
                    .for_each(|v| *v /= cell_area);
                for (q, &(ry, rx)) in [(0, 0), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
                    let (ya, yb) = sub_ranges[ry];
                    let (xa, xb) = sub_ranges[rx];
                    let mut sum = 0.0;
                    let mut count = 0usize;
                    for y in y0 + ya..y0 + yb {
                        for x in x0 + xa..x0 + xb {
                            sum += gray[y * iw + x];
                            count += 1;
                        }
                    }
                    out[3 + ORIENTATION_BINS + q] = sum / count.max(1) as f32;
                }
            }
            row
        })
        .collect();
    FeatureMap::new(gh, gw, BUILTIN_CHANNELS, stride, rows.concat())
}
