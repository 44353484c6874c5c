//! Line-image preprocessing: illumination compensation, Sauvola
//! binarization, deslanting, and the random augmentations used in training.
//!
//! Images are 8-bit grayscale with dark ink (0) on a light background (255).

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::math;

/// Pixels darker than this count as ink when measuring slant.
pub const INK_THRESHOLD: u8 = 128;

/// Row-major 8-bit grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(invalid!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            ));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    /// Pixel at signed coordinates, or `None` outside the image.
    fn sample(&self, x: i64, y: i64) -> Option<u8> {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            None
        } else {
            Some(self.get(x as usize, y as usize))
        }
    }
}

/// Summed-area table with one extra leading row and column.
struct Integral {
    stride: usize,
    sum: Vec<u64>,
    sum_sq: Vec<u64>,
}

impl Integral {
    fn new(img: &GrayImage) -> Self {
        let stride = img.width + 1;
        let mut sum = vec![0u64; stride * (img.height + 1)];
        let mut sum_sq = vec![0u64; stride * (img.height + 1)];
        for y in 0..img.height {
            let mut row = 0u64;
            let mut row_sq = 0u64;
            for x in 0..img.width {
                let v = u64::from(img.get(x, y));
                row += v;
                row_sq += v * v;
                let i = (y + 1) * stride + x + 1;
                sum[i] = sum[i - stride] + row;
                sum_sq[i] = sum_sq[i - stride] + row_sq;
            }
        }
        Self {
            stride,
            sum,
            sum_sq,
        }
    }

    /// Sum, sum of squares and pixel count over `[x0, x1) × [y0, y1)`.
    fn window(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> (u64, u64, u64) {
        let at = |t: &[u64], x: usize, y: usize| t[y * self.stride + x];
        let s = at(&self.sum, x1, y1) + at(&self.sum, x0, y0)
            - at(&self.sum, x0, y1)
            - at(&self.sum, x1, y0);
        let s2 = at(&self.sum_sq, x1, y1) + at(&self.sum_sq, x0, y0)
            - at(&self.sum_sq, x0, y1)
            - at(&self.sum_sq, x1, y0);
        (s, s2, ((x1 - x0) * (y1 - y0)) as u64)
    }
}

/// `[c − r, c + r]` clipped to `[0, len)`, as a half-open range.
fn clipped(c: usize, r: usize, len: usize) -> (usize, usize) {
    (c.saturating_sub(r), (c + r + 1).min(len))
}

/// Local mean of a float field over a `(2r+1)²` window clipped at the
/// borders.
fn box_mean(field: &[f64], width: usize, height: usize, r: usize) -> Vec<f64> {
    let stride = width + 1;
    let mut integral = vec![0.0; stride * (height + 1)];
    for y in 0..height {
        let mut row = 0.0;
        for x in 0..width {
            row += field[y * width + x];
            integral[(y + 1) * stride + x + 1] = integral[y * stride + x + 1] + row;
        }
    }
    let mut out = vec![0.0; width * height];
    for y in 0..height {
        let (y0, y1) = clipped(y, r, height);
        for x in 0..width {
            let (x0, x1) = clipped(x, r, width);
            let s = integral[y1 * stride + x1] + integral[y0 * stride + x0]
                - integral[y0 * stride + x1]
                - integral[y1 * stride + x0];
            out[y * width + x] = s / ((x1 - x0) * (y1 - y0)) as f64;
        }
    }
    out
}

/// Separable rank filter (min or max) over a `(2r+1)²` clipped window.
fn rank_filter(img: &GrayImage, r: usize, pick_max: bool) -> GrayImage {
    let pick = |a: u8, b: u8| if pick_max { a.max(b) } else { a.min(b) };
    let (w, h) = (img.width, img.height);
    let mut horiz = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let (x0, x1) = clipped(x, r, w);
            horiz[y * w + x] = (x0..x1).map(|i| img.get(i, y)).reduce(pick).unwrap_or(255);
        }
    }
    let mut out = vec![0u8; w * h];
    for y in 0..h {
        let (y0, y1) = clipped(y, r, h);
        for x in 0..w {
            out[y * w + x] = (y0..y1)
                .map(|j| horiz[j * w + x])
                .reduce(pick)
                .unwrap_or(255);
        }
    }
    GrayImage {
        width: w,
        height: h,
        pixels: out,
    }
}

/// Grows dark strokes: minimum over a `kernel × kernel` window.
pub fn dilate(img: &GrayImage, kernel: usize) -> GrayImage {
    rank_filter(img, kernel / 2, false)
}

/// Thins dark strokes: maximum over a `kernel × kernel` window.
pub fn erode(img: &GrayImage, kernel: usize) -> GrayImage {
    rank_filter(img, kernel / 2, true)
}

fn illumination_radii(img: &GrayImage) -> (usize, usize) {
    let short = img.width.min(img.height);
    ((short / 8).max(2), (short / 2).max(4))
}

/// Background intensity estimate: a max filter removes the ink, a large box
/// mean smooths what is left.
pub fn estimate_background(img: &GrayImage) -> Vec<f64> {
    let (max_r, mean_r) = illumination_radii(img);
    let paper = rank_filter(img, max_r, true);
    let field: Vec<f64> = paper.pixels.iter().map(|&v| f64::from(v)).collect();
    box_mean(&field, img.width, img.height, mean_r)
}

/// Divides out the estimated background and rescales to its mean level, so
/// uneven lighting becomes a flat background. Constant images are fixed
/// points.
pub fn illumination_compensate(img: &GrayImage) -> Result<GrayImage> {
    if img.width < 8 || img.height < 8 {
        return Err(invalid!(
            "illumination compensation needs at least 8x8 pixels, got {}x{}",
            img.width,
            img.height
        ));
    }
    let background = estimate_background(img);
    let level = background.iter().sum::<f64>() / background.len() as f64;
    let pixels = img
        .pixels
        .iter()
        .zip(&background)
        .map(|(&v, &bg)| {
            let out = f64::from(v) * level / bg.max(1.0);
            math::round(out).clamp(0.0, 255.0) as u8
        })
        .collect();
    Ok(GrayImage {
        width: img.width,
        height: img.height,
        pixels,
    })
}

/// Default Sauvola window side.
pub const SAUVOLA_WINDOW: usize = 25;
/// Default Sauvola sensitivity.
pub const SAUVOLA_K: f64 = 0.2;
/// Dynamic range of the standard deviation for 8-bit images.
pub const SAUVOLA_RANGE: f64 = 128.0;

/// Sauvola threshold for one window given its integer sums.
pub fn sauvola_threshold(sum: u64, sum_sq: u64, count: u64, k: f64, range: f64) -> f64 {
    let n = count as f64;
    let mean = sum as f64 / n;
    let var = (sum_sq as f64 / n - mean * mean).max(0.0);
    mean * (1.0 + k * (math::sqrt(var) / range - 1.0))
}

/// Local thresholding with `t = m·(1 + k·(s/R − 1))` over a `window ×
/// window` neighbourhood (clipped at the borders). Pixels at or below the
/// threshold become ink (0), everything else 255.
pub fn sauvola_binarize(img: &GrayImage, window: usize, k: f64, range: f64) -> Result<GrayImage> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(invalid!(
            "Sauvola window must be odd and at least 3, got {window}"
        ));
    }
    if !(k > 0.0 && k < 1.0) {
        return Err(invalid!("Sauvola k must lie in (0, 1), got {k}"));
    }
    if range.is_nan() || range <= 0.0 {
        return Err(invalid!("Sauvola range must be positive, got {range}"));
    }
    let integral = Integral::new(img);
    let r = window / 2;
    let mut out = img.clone();
    for y in 0..img.height {
        let (y0, y1) = clipped(y, r, img.height);
        for x in 0..img.width {
            let (x0, x1) = clipped(x, r, img.width);
            let (s, s2, n) = integral.window(x0, y0, x1, y1);
            let t = sauvola_threshold(s, s2, n, k, range);
            out.set(
                x,
                y,
                if f64::from(img.get(x, y)) <= t {
                    0
                } else {
                    255
                },
            );
        }
    }
    Ok(out)
}

fn tan_deg(deg: f64) -> f64 {
    math::tan(deg.to_radians())
}

/// Horizontal shear that leans the image right by `degrees` (the top row
/// moves furthest). The canvas widens so nothing is cropped; new pixels are
/// background.
pub fn shear(img: &GrayImage, degrees: f64) -> GrayImage {
    let s = tan_deg(degrees);
    let span = if img.height > 1 {
        (img.height - 1) as f64 * s
    } else {
        0.0
    };
    let extra = math::ceil(span.abs() - 1e-9).max(0.0) as usize;
    let offset = if s < 0.0 { extra as f64 } else { 0.0 };
    let width = img.width + extra;
    let mut out = GrayImage::filled(width, img.height, 255);
    for y in 0..img.height {
        let shift = (img.height - 1 - y) as f64 * s + offset;
        for x in 0..width {
            let src = math::round(x as f64 - shift) as i64;
            if let Some(v) = img.sample(src, y as i64) {
                out.set(x, y, v);
            }
        }
    }
    out
}

/// Σ over columns of (ink pixels in the column)² after shearing by
/// `-degrees`.
fn verticality(img: &GrayImage, degrees: f64) -> u64 {
    let s = tan_deg(degrees);
    let extra = math::ceil(((img.height.max(1) - 1) as f64 * s.abs()) - 1e-9).max(0.0) as usize;
    let offset = if s > 0.0 { extra as f64 } else { 0.0 };
    let mut counts = vec![0u64; img.width + extra + 1];
    for y in 0..img.height {
        let shift = offset - (img.height - 1 - y) as f64 * s;
        for x in 0..img.width {
            if img.get(x, y) < INK_THRESHOLD {
                let col = math::round(x as f64 + shift) as i64;
                if col >= 0 && (col as usize) < counts.len() {
                    counts[col as usize] += 1;
                }
            }
        }
    }
    counts.iter().map(|c| c * c).sum()
}

/// Slant search range and step, in degrees.
pub const SLANT_LIMIT_DEG: i32 = 45;

/// Estimated slant in whole degrees (positive leans right). Searches
/// `[-45, 45]` in 1° steps; ties prefer the smaller magnitude.
pub fn estimate_slant(img: &GrayImage) -> i32 {
    let mut best = (verticality(img, 0.0), 0);
    for a in 1..=SLANT_LIMIT_DEG {
        for deg in [a, -a] {
            let score = verticality(img, f64::from(deg));
            if score > best.0 {
                best = (score, deg);
            }
        }
    }
    best.1
}

/// Output of [`deslant`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deslanted {
    pub image: GrayImage,
    /// Slant that was removed, in degrees.
    pub slant: i32,
}

/// Removes the estimated slant by shearing the opposite way.
pub fn deslant(img: &GrayImage) -> Deslanted {
    let slant = estimate_slant(img);
    let image = if slant == 0 {
        img.clone()
    } else {
        shear(img, -f64::from(slant))
    };
    Deslanted { image, slant }
}

/// Ranges for [`augment`]. Every transform is drawn uniformly from its range
/// and applied with probability one half.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    /// Maximum absolute rotation, at most 5°.
    pub max_rotation_deg: f64,
    /// Maximum absolute displacement per axis, at most 5 px.
    pub max_shift_px: f64,
    /// Scale range, within `[0.9, 1.1]`.
    pub scale: (f64, f64),
    /// Erosion/dilation kernel: 1 (off) or 3.
    pub morph_kernel: usize,
}

impl AugmentParams {
    /// No-op augmentation.
    pub fn identity() -> Self {
        Self {
            max_rotation_deg: 0.0,
            max_shift_px: 0.0,
            scale: (1.0, 1.0),
            morph_kernel: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=5.0).contains(&self.max_rotation_deg) {
            return Err(invalid!(
                "rotation limit {} outside [0, 5]",
                self.max_rotation_deg
            ));
        }
        if !(0.0..=5.0).contains(&self.max_shift_px) {
            return Err(invalid!("shift limit {} outside [0, 5]", self.max_shift_px));
        }
        let (lo, hi) = self.scale;
        if !(0.9 <= lo && lo <= hi && hi <= 1.1) {
            return Err(invalid!("scale range ({lo}, {hi}) outside [0.9, 1.1]"));
        }
        if self.morph_kernel != 1 && self.morph_kernel != 3 {
            return Err(invalid!(
                "morphology kernel must be 1 or 3, got {}",
                self.morph_kernel
            ));
        }
        Ok(())
    }
}

impl Default for AugmentParams {
    fn default() -> Self {
        Self {
            max_rotation_deg: 2.0,
            max_shift_px: 2.0,
            scale: (0.95, 1.05),
            morph_kernel: 3,
        }
    }
}

/// Rotation (degrees), scale and translation about the image centre, mapped
/// back to the input size with nearest-neighbour sampling.
fn affine(img: &GrayImage, degrees: f64, scale: f64, dx: f64, dy: f64) -> GrayImage {
    let (sin, cos) = (
        math::sin(degrees.to_radians()),
        math::cos(degrees.to_radians()),
    );
    let cx = (img.width as f64 - 1.0) / 2.0;
    let cy = (img.height as f64 - 1.0) / 2.0;
    let mut out = GrayImage::filled(img.width, img.height, 255);
    for y in 0..img.height {
        for x in 0..img.width {
            // Inverse map: undo translation, rotation, then scale.
            let u = x as f64 - cx - dx;
            let v = y as f64 - cy - dy;
            let sx = (cos * u + sin * v) / scale + cx;
            let sy = (-sin * u + cos * v) / scale + cy;
            if let Some(p) = img.sample(math::round(sx) as i64, math::round(sy) as i64) {
                out.set(x, y, p);
            }
        }
    }
    out
}

/// Seeded random displacement, rotation, resizing and erosion/dilation.
/// The output has the input's dimensions.
pub fn augment(img: &GrayImage, seed: u64, params: &AugmentParams) -> Result<GrayImage> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |limit: f64, rng: &mut ChaCha8Rng| {
        if limit > 0.0 && rng.gen_bool(0.5) {
            rng.gen_range(-limit..=limit)
        } else {
            0.0
        }
    };
    let rotation = draw(params.max_rotation_deg, &mut rng);
    let dx = math::round(draw(params.max_shift_px, &mut rng));
    let dy = math::round(draw(params.max_shift_px, &mut rng));
    let (lo, hi) = params.scale;
    let scale = if hi > lo && rng.gen_bool(0.5) {
        rng.gen_range(lo..=hi)
    } else {
        1.0
    };

    let mut out = if rotation == 0.0 && dx == 0.0 && dy == 0.0 && scale == 1.0 {
        img.clone()
    } else {
        affine(img, rotation, scale, dx, dy)
    };
    if params.morph_kernel > 1 && rng.gen_bool(0.5) {
        out = if rng.gen_bool(0.5) {
            erode(&out, params.morph_kernel)
        } else {
            dilate(&out, params.morph_kernel)
        };
    }
    Ok(out)
}

/// One stage of the line-image pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Step {
    Illumination,
    Binarize,
    Deslant,
}

impl Step {
    /// Illumination, then binarization, then deslanting.
    pub const DEFAULT_ORDER: [Step; 3] = [Step::Illumination, Step::Binarize, Step::Deslant];

    pub fn name(self) -> &'static str {
        match self {
            Step::Illumination => "illum",
            Step::Binarize => "binarize",
            Step::Deslant => "deslant",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "illum" => Ok(Step::Illumination),
            "binarize" => Ok(Step::Binarize),
            "deslant" => Ok(Step::Deslant),
            other => Err(invalid!(
                "unknown preprocessing step {other:?} (expected illum, binarize or deslant)"
            )),
        }
    }
}

/// Applies `steps` in order, binarizing with the default Sauvola settings.
pub fn apply_steps(img: &GrayImage, steps: &[Step]) -> Result<GrayImage> {
    let mut out = img.clone();
    for step in steps {
        out = match step {
            Step::Illumination => illumination_compensate(&out)?,
            Step::Binarize => sauvola_binarize(&out, SAUVOLA_WINDOW, SAUVOLA_K, SAUVOLA_RANGE)?,
            Step::Deslant => deslant(&out).image,
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_names_round_trip() {
        for s in Step::DEFAULT_ORDER {
            assert_eq!(Step::parse(s.name()).unwrap(), s);
        }
        assert!(Step::parse("blur").is_err());
        let img = GrayImage::filled(12, 12, 255);
        assert_eq!(apply_steps(&img, &Step::DEFAULT_ORDER).unwrap(), img);
    }

    fn random_image(seed: u64, w: usize, h: usize) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GrayImage::new(w, h, (0..w * h).map(|_| rng.gen()).collect()).unwrap()
    }

    fn bars(width: usize, height: usize, period: usize, thickness: usize) -> GrayImage {
        let mut img = GrayImage::filled(width, height, 255);
        for y in 0..height {
            for x in 0..width {
                if x % period < thickness && x >= period && x + period < width {
                    img.set(x, y, 0);
                }
            }
        }
        img
    }

    fn std_dev(v: &[f64]) -> f64 {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        math::sqrt(v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64)
    }

    #[test]
    fn image_length_is_checked() {
        assert!(GrayImage::new(2, 2, vec![0; 3]).is_err());
    }

    #[test]
    fn constant_image_is_an_illumination_fixed_point() {
        let img = GrayImage::filled(40, 20, 200);
        let out = illumination_compensate(&img).unwrap();
        assert!(out.pixels().iter().all(|&v| v.abs_diff(200) <= 1));
        assert!(illumination_compensate(&GrayImage::filled(7, 20, 200)).is_err());
    }

    #[test]
    fn illumination_flattens_a_ramp() {
        let (w, h) = (96, 32);
        let mut img = GrayImage::filled(w, h, 0);
        for y in 0..h {
            for x in 0..w {
                let ramp = 90.0 + 160.0 * x as f64 / (w - 1) as f64;
                img.set(x, y, ramp as u8);
            }
        }
        // Dark strokes on top of the ramp.
        for x in (10..w - 10).step_by(9) {
            for y in 8..h - 8 {
                img.set(x, y, 20);
                img.set(x + 1, y, 20);
            }
        }
        let out = illumination_compensate(&img).unwrap();
        let before = std_dev(&estimate_background(&img));
        let after = std_dev(&estimate_background(&out));
        assert!(after * 5.0 <= before, "background std {before} -> {after}");
        // Strokes survive as dark pixels.
        assert!(out.get(10, h / 2) < 60);
    }

    #[test]
    fn sauvola_uniform_and_black() {
        let img = GrayImage::filled(16, 16, 128);
        let (s, s2, n) = (128 * 25, 128 * 128 * 25, 25);
        assert!((sauvola_threshold(s, s2, n, 0.2, 128.0) - 102.4).abs() < 1e-12);
        let out = sauvola_binarize(&img, 5, 0.2, 128.0).unwrap();
        assert!(out.pixels().iter().all(|&v| v == 255));
        let black = GrayImage::filled(16, 16, 0);
        let out = sauvola_binarize(&black, 5, 0.2, 128.0).unwrap();
        assert!(out.pixels().iter().all(|&v| v == 0));
        let white = GrayImage::filled(16, 16, 255);
        let out = sauvola_binarize(&white, 25, 0.2, 128.0).unwrap();
        assert!(out.pixels().iter().all(|&v| v == 255));
    }

    #[test]
    fn sauvola_rejects_bad_parameters() {
        let img = GrayImage::filled(8, 8, 1);
        assert!(sauvola_binarize(&img, 4, 0.2, 128.0).is_err());
        assert!(sauvola_binarize(&img, 1, 0.2, 128.0).is_err());
        assert!(sauvola_binarize(&img, 5, 1.0, 128.0).is_err());
    }

    #[test]
    fn sauvola_matches_naive_windows() {
        for seed in 0..5 {
            let img = random_image(seed, 32, 32);
            for window in [3, 7, 25] {
                let fast = sauvola_binarize(&img, window, 0.2, 128.0).unwrap();
                let r = window / 2;
                for y in 0..32usize {
                    for x in 0..32usize {
                        let (mut s, mut s2, mut n) = (0u64, 0u64, 0u64);
                        for yy in y.saturating_sub(r)..(y + r + 1).min(32) {
                            for xx in x.saturating_sub(r)..(x + r + 1).min(32) {
                                let v = u64::from(img.get(xx, yy));
                                s += v;
                                s2 += v * v;
                                n += 1;
                            }
                        }
                        let mean = s as f64 / n as f64;
                        let var = (s2 as f64 / n as f64 - mean * mean).max(0.0);
                        let t = mean * (1.0 + 0.2 * (math::sqrt(var) / 128.0 - 1.0));
                        let want = if f64::from(img.get(x, y)) <= t {
                            0
                        } else {
                            255
                        };
                        assert_eq!(fast.get(x, y), want);
                    }
                }
            }
        }
    }

    #[test]
    fn vertical_bars_are_not_sheared() {
        let img = bars(60, 30, 8, 2);
        assert_eq!(estimate_slant(&img), 0);
        let d = deslant(&img);
        assert_eq!(d.slant, 0);
        assert_eq!(d.image, img);
    }

    #[test]
    fn recovers_synthetic_shear() {
        let img = bars(80, 40, 10, 2);
        for angle in [-30, -22, -15, -7, 0, 5, 15, 24, 30] {
            let slanted = shear(&img, f64::from(angle));
            assert_eq!(slanted.height(), 40);
            let est = estimate_slant(&slanted);
            assert!((est - angle).abs() <= 2, "angle {angle}: estimated {est}");
            let d = deslant(&slanted);
            assert!(estimate_slant(&d.image).abs() <= 1);
            let again = deslant(&d.image);
            assert!((again.slant).abs() <= 1);
        }
    }

    #[test]
    fn closing_restores_a_solid_rectangle() {
        let mut img = GrayImage::filled(20, 12, 255);
        for y in 3..9 {
            for x in 4..15 {
                img.set(x, y, 0);
            }
        }
        let grown = dilate(&img, 3);
        assert_ne!(grown, img);
        assert_eq!(erode(&grown, 3), img);
    }

    #[test]
    fn augment_identity_and_determinism() {
        let img = random_image(9, 30, 16);
        assert_eq!(augment(&img, 5, &AugmentParams::identity()).unwrap(), img);
        let p = AugmentParams::default();
        let a = augment(&img, 42, &p).unwrap();
        let b = augment(&img, 42, &p).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.width(), a.height()), (30, 16));
        let changed = (0..20).any(|s| augment(&img, s, &p).unwrap() != img);
        assert!(changed);
    }

    #[test]
    fn augment_validates_ranges() {
        let mut p = AugmentParams::identity();
        p.max_rotation_deg = 6.0;
        assert!(p.validate().is_err());
        let mut p = AugmentParams::identity();
        p.scale = (0.8, 1.0);
        assert!(p.validate().is_err());
        let mut p = AugmentParams::identity();
        p.morph_kernel = 5;
        assert!(p.validate().is_err());
        let mut p = AugmentParams::identity();
        p.max_shift_px = 5.5;
        assert!(augment(&GrayImage::filled(4, 4, 0), 0, &p).is_err());
    }
}
