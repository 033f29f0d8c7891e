//! Fixed-length region descriptors.
//!
//! Regions are described either by the built-in 128-dimensional colour and
//! gradient histogram, or by externally computed activations delivered in
//! OFPF files. Downstream stages only see a [`FeatureMatrix`] and do not care
//! which route produced it.

pub mod ofpf;

pub use ofpf::{read_ofpf, write_ofpf};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::proposals::ProposalSet;
use crate::raster::{crop, resize_bilinear, RasterImage};

pub const BUILTIN_DIM: usize = 128;
const PATCH: u32 = 32;
const INTENSITY_BINS: usize = 32;
const ORIENTATION_BINS: usize = 32;

/// N×dim row-major matrix of region descriptors for one image.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub image_id: String,
    dim: usize,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(image_id: impl Into<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::argument("feature dimension must be positive"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::argument(format!(
                "feature buffer of {} values is not a multiple of dim {dim}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::argument(format!(
                "non-finite feature value at row {} column {}",
                i / dim,
                i % dim
            )));
        }
        Ok(Self {
            image_id: image_id.into(),
            dim,
            data,
        })
    }

    pub fn from_rows(image_id: impl Into<String>, dim: usize, rows: &[Vec<f32>]) -> Result<Self> {
        if let Some(r) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::argument(format!(
                "row {r} has length {}, expected {dim}",
                rows[r].len()
            )));
        }
        Self::new(image_id, dim, rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Scales every non-zero row to unit l2 norm.
    pub fn l2_normalize_rows(&mut self) {
        for row in self.data.chunks_exact_mut(self.dim) {
            let norm = row
                .iter()
                .map(|&v| f64::from(v) * f64::from(v))
                .sum::<f64>()
                .sqrt();
            if norm > 0.0 {
                row.iter_mut()
                    .for_each(|v| *v = (f64::from(*v) / norm) as f32);
            }
        }
    }
}

/// Which descriptor produces the rows of a [`FeatureMatrix`].
#[derive(Clone, Debug, Default)]
pub enum DescriptorSource {
    #[default]
    Builtin,
    /// Activations computed outside this crate, one row per proposal.
    /// `None` means the caller selected the external route but supplied no file.
    External(Option<FeatureMatrix>),
}

fn l1_normalize(block: &mut [f64]) {
    let sum: f64 = block.iter().sum();
    if sum > 0.0 {
        block.iter_mut().for_each(|v| *v /= sum);
    }
}

/// 128-d descriptor of a region crop.
///
/// The crop is resized to 32×32. Dimensions 0..96 hold 32-bin intensity
/// histograms for R, G and B; 96..128 hold a 32-bin histogram of luma
/// gradient orientation weighted by gradient magnitude. Each block is
/// l1-normalised on its own; an all-zero gradient block stays zero.
pub fn builtin_descriptor(region: &RasterImage) -> Vec<f32> {
    let patch = resize_bilinear(region, PATCH, PATCH).expect("patch size is non-zero");
    let mut hist = [0.0f64; BUILTIN_DIM];
    let n = PATCH as usize;
    let mut luma = vec![0.0f64; n * n];
    for (i, px) in patch.pixels().chunks_exact(3).enumerate() {
        for c in 0..3 {
            hist[c * INTENSITY_BINS + (px[c] as usize * INTENSITY_BINS / 256)] += 1.0;
        }
        luma[i] = 0.299 * f64::from(px[0]) + 0.587 * f64::from(px[1]) + 0.114 * f64::from(px[2]);
    }
    let offset = 3 * INTENSITY_BINS;
    let step = std::f64::consts::TAU / ORIENTATION_BINS as f64;
    for y in 0..n {
        for x in 0..n {
            let l = |xx: usize, yy: usize| luma[yy * n + xx];
            let gx = (l((x + 1).min(n - 1), y) - l(x.saturating_sub(1), y)) / 2.0;
            let gy = (l(x, (y + 1).min(n - 1)) - l(x, y.saturating_sub(1))) / 2.0;
            let mag = gx.hypot(gy);
            if mag > 0.0 {
                let angle = gy.atan2(gx).rem_euclid(std::f64::consts::TAU);
                let bin = ((angle / step) as usize).min(ORIENTATION_BINS - 1);
                hist[offset + bin] += mag;
            }
        }
    }
    for c in 0..3 {
        l1_normalize(&mut hist[c * INTENSITY_BINS..(c + 1) * INTENSITY_BINS]);
    }
    l1_normalize(&mut hist[offset..]);
    hist.iter().map(|&v| v as f32).collect()
}

/// Describes every proposal of `set`; row i belongs to proposal i.
pub fn describe_regions(
    img: &RasterImage,
    set: &ProposalSet,
    source: &DescriptorSource,
    exec: Execution,
) -> Result<FeatureMatrix> {
    match source {
        DescriptorSource::Builtin => {
            let rows = exec.try_map(&set.proposals, |p| {
                crop(img, &p.bbox).map(|c| builtin_descriptor(&c))
            })?;
            FeatureMatrix::from_rows(set.image_id.clone(), BUILTIN_DIM, &rows)
        }
        DescriptorSource::External(None) => Err(Error::Config(
            "external descriptor selected but no feature file was supplied".into(),
        )),
        DescriptorSource::External(Some(feats)) => {
            if feats.rows() != set.len() {
                return Err(Error::Config(format!(
                    "external features have {} rows but image {} has {} proposals",
                    feats.rows(),
                    set.image_id,
                    set.len()
                )));
            }
            if let Some(p) = set
                .proposals
                .iter()
                .find(|p| !p.bbox.fits_within(img.width(), img.height()))
            {
                let b = p.bbox;
                return Err(Error::Bounds {
                    x: b.x,
                    y: b.y,
                    w: b.w,
                    h: b.h,
                    width: img.width(),
                    height: img.height(),
                });
            }
            let mut out = feats.clone();
            out.image_id = set.image_id.clone();
            Ok(out)
        }
    }
}
