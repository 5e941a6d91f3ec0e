use std::io::Write;

use crate::error::{mismatch, Result, SimcoError};
use crate::numerics::{DenseMatrix, RngState};

pub const PATCH_EDGE: usize = 8;

/// 8-bit grayscale image held as real pixel values (row-major). Values may
/// leave `[0, 255]` after adding noise; writers clamp and round.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(mismatch("GrayImage::new", width * height, pixels.len()));
        }
        if let Some(index) = pixels.iter().position(|v| !v.is_finite()) {
            return Err(SimcoError::NonFinite { index });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pixels[r * self.width + c]
    }

    /// Pixels rounded and clamped to `0..=255`.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect()
    }

    pub fn clamped(&self) -> Self {
        Self { pixels: self.pixels.iter().map(|v| v.clamp(0.0, 255.0)).collect(), ..*self }
    }

    /// Binary PGM (`P5`), maxval 255.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.to_u8())?;
        Ok(())
    }

    /// ASCII PGM (`P2`), maxval 255.
    pub fn write_pgm_ascii<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "P2\n{} {}\n255\n", self.width, self.height)?;
        for row in self.to_u8().chunks(self.width.max(1)) {
            let line: Vec<String> = row.iter().map(u8::to_string).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_pgm(&mut out).expect("writing to memory");
        out
    }

    /// Reads `P2` or `P5` data; samples are rescaled to a 255 peak when the
    /// file's maxval differs.
    pub fn read_pgm(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut token = || -> Result<String> {
            loop {
                while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                if pos < bytes.len() && bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                    continue;
                }
                break;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(SimcoError::Parse("unexpected end of PGM header".into()));
            }
            Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
        };
        let magic = token()?;
        let num = |s: String| s.parse::<usize>().map_err(|_| SimcoError::Parse(format!("bad PGM number {s:?}")));
        let width = num(token()?)?;
        let height = num(token()?)?;
        let maxval = num(token()?)?;
        if maxval == 0 || maxval > 255 {
            return Err(SimcoError::Parse(format!("unsupported PGM maxval {maxval}")));
        }
        let scale = 255.0 / maxval as f64;
        let count = width * height;
        let pixels: Vec<f64> = match magic.as_str() {
            "P5" => {
                let data = &bytes[(pos + 1).min(bytes.len())..];
                if data.len() < count {
                    return Err(SimcoError::Parse(format!("PGM raster has {} of {count} bytes", data.len())));
                }
                data[..count].iter().map(|&b| b as f64 * scale).collect()
            }
            "P2" => {
                let mut px = Vec::with_capacity(count);
                for _ in 0..count {
                    let v = num(token()?)?;
                    if v > maxval {
                        return Err(SimcoError::Parse(format!("PGM sample {v} exceeds maxval")));
                    }
                    px.push(v as f64 * scale);
                }
                px
            }
            other => return Err(SimcoError::Parse(format!("unsupported PGM magic {other:?}"))),
        };
        Self::new(width, height, pixels)
    }
}

/// Piecewise-smooth synthetic scene: shaded background, a disc, a bar and a
/// gentle ripple. Values stay inside `[0, 255]`.
pub fn test_image(size: usize) -> GrayImage {
    let s = size as f64;
    let mut pixels = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            let (y, x) = (r as f64 / s, c as f64 / s);
            let mut v = 70.0 + 90.0 * x + 25.0 * (2.0 * std::f64::consts::PI * 1.5 * y).sin();
            let (dy, dx) = (y - 0.42, x - 0.55);
            if dy * dy + dx * dx < 0.28 * 0.28 {
                v += 60.0 - 80.0 * (dx * dx + dy * dy);
            }
            if (0.72..0.86).contains(&y) && (0.1..0.7).contains(&x) {
                v -= 55.0;
            }
            pixels.push(v.clamp(0.0, 255.0));
        }
    }
    GrayImage { width: size, height: size, pixels }
}

/// Low-frequency smooth image without edges.
pub fn smooth_test_image(size: usize) -> GrayImage {
    let s = size as f64;
    let tau = 2.0 * std::f64::consts::PI;
    let mut pixels = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            let (y, x) = (r as f64 / s, c as f64 / s);
            pixels.push(128.0 + 50.0 * (tau * 0.7 * x).sin() * (tau * 0.5 * y).cos() + 30.0 * (x - y));
        }
    }
    GrayImage { width: size, height: size, pixels }
}

/// Adds i.i.d. `N(0, σ²)` noise (no clamping).
pub fn add_noise(img: &GrayImage, sigma: f64, rng: &mut RngState) -> GrayImage {
    let pixels = img.pixels.iter().map(|v| v + sigma * rng.normal()).collect();
    GrayImage { pixels, ..*img }
}

/// `10·log10(255² / MSE)`; `+inf` for identical images.
pub fn psnr(reference: &GrayImage, estimate: &GrayImage) -> Result<f64> {
    if (reference.width, reference.height) != (estimate.width, estimate.height) {
        return Err(mismatch(
            "psnr image size",
            format!("{}x{}", reference.width, reference.height),
            format!("{}x{}", estimate.width, estimate.height),
        ));
    }
    let se: f64 = reference.pixels.iter().zip(&estimate.pixels).map(|(a, b)| (a - b).powi(2)).sum();
    let mse = se / reference.pixels.len() as f64;
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

/// Vectorized 8×8 patches (row-major pixel order) with their means removed.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    pub edge: usize,
    /// `64 x n`, mean-removed.
    pub patches: DenseMatrix,
    pub means: Vec<f64>,
    /// Top-left `(row, col)` of each patch.
    pub anchors: Vec<(usize, usize)>,
    pub width: usize,
    pub height: usize,
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }
}

fn check_size(img: &GrayImage) -> Result<()> {
    if img.width < PATCH_EDGE || img.height < PATCH_EDGE {
        return Err(SimcoError::Precondition(format!(
            "image {}x{} is smaller than {PATCH_EDGE}x{PATCH_EDGE}",
            img.width, img.height
        )));
    }
    Ok(())
}

fn patches_at(img: &GrayImage, anchors: Vec<(usize, usize)>) -> PatchSet {
    let e = PATCH_EDGE;
    let mut cols = Vec::with_capacity(anchors.len());
    let mut means = Vec::with_capacity(anchors.len());
    for &(r0, c0) in &anchors {
        let mut p = Vec::with_capacity(e * e);
        for r in r0..r0 + e {
            p.extend_from_slice(&img.pixels[r * img.width + c0..r * img.width + c0 + e]);
        }
        let mean = p.iter().sum::<f64>() / (e * e) as f64;
        p.iter_mut().for_each(|v| *v -= mean);
        cols.push(p);
        means.push(mean);
    }
    PatchSet {
        edge: e,
        patches: DenseMatrix::from_columns(e * e, &cols).expect("finite pixels"),
        means,
        anchors,
        width: img.width,
        height: img.height,
    }
}

/// `count` patches at uniformly random top-left anchors.
pub fn extract_patches(img: &GrayImage, count: usize, rng: &mut RngState) -> Result<PatchSet> {
    check_size(img)?;
    let (rows, cols) = (img.height - PATCH_EDGE + 1, img.width - PATCH_EDGE + 1);
    let anchors = (0..count).map(|_| (rng.below(rows), rng.below(cols))).collect();
    Ok(patches_at(img, anchors))
}

/// Every patch position (stride 1), in raster order of anchors.
pub fn extract_all_patches(img: &GrayImage) -> Result<PatchSet> {
    check_size(img)?;
    let anchors = (0..=img.height - PATCH_EDGE)
        .flat_map(|r| (0..=img.width - PATCH_EDGE).map(move |c| (r, c)))
        .collect();
    Ok(patches_at(img, anchors))
}

/// Non-overlapping tiling of the top-left `⌊h/8⌋·8 x ⌊w/8⌋·8` region.
pub fn extract_grid_patches(img: &GrayImage) -> Result<PatchSet> {
    check_size(img)?;
    let anchors = (0..img.height / PATCH_EDGE)
        .flat_map(|r| (0..img.width / PATCH_EDGE).map(move |c| (r * PATCH_EDGE, c * PATCH_EDGE)))
        .collect();
    Ok(patches_at(img, anchors))
}

/// Adds the stored means back to `patches` (same layout as `set.patches`)
/// and averages overlapping estimates per pixel. Pixels no patch covers are
/// taken from `fill`, or zero.
pub fn reassemble(set: &PatchSet, patches: &DenseMatrix, fill: Option<&GrayImage>) -> Result<GrayImage> {
    let e = set.edge;
    if patches.shape() != (e * e, set.len()) {
        return Err(mismatch("reassemble patches", format!("{}x{}", e * e, set.len()), format!("{}x{}", patches.rows(), patches.cols())));
    }
    let mut sum = vec![0.0; set.width * set.height];
    let mut count = vec![0u32; set.width * set.height];
    for (k, &(r0, c0)) in set.anchors.iter().enumerate() {
        for dr in 0..e {
            for dc in 0..e {
                let idx = (r0 + dr) * set.width + c0 + dc;
                sum[idx] += patches.get(dr * e + dc, k) + set.means[k];
                count[idx] += 1;
            }
        }
    }
    let pixels = sum
        .iter()
        .zip(&count)
        .enumerate()
        .map(|(i, (&s, &c))| if c > 0 { s / c as f64 } else { fill.map_or(0.0, |f| f.pixels[i]) })
        .collect();
    GrayImage::new(set.width, set.height, pixels)
}
