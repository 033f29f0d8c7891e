//! End-to-end composition of the stages: image → proposals → region
//! descriptors → pooled vector → (optional) compression → index payload.

use crate::compression::{ItqModel, PcaModel};
use crate::descriptors::{describe_regions, DescriptorSource, FeatureMatrix};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::index::{Metric, Payload, RetrievalIndex};
use crate::pooling::{l2_normalize, max_pool, PooledRepresentation};
use crate::proposals::{nms_filter, selective_search, ProposalSet, SelectiveSearchConfig};
use crate::raster::RasterImage;

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub k: f64,
    pub min_size: usize,
    pub nms_iou: f64,
    pub top_n: usize,
    /// Scale each region descriptor to unit l2 norm before pooling.
    pub normalize_rows: bool,
    /// Scale the pooled vector to unit l2 norm.
    pub normalize: bool,
    pub pca_dim: usize,
    pub itq_bits: usize,
    pub itq_iters: usize,
    pub metric: Metric,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            k: 100.0,
            min_size: 50,
            nms_iou: 0.9,
            top_n: 500,
            normalize_rows: false,
            normalize: false,
            pca_dim: 32,
            itq_bits: 64,
            itq_iters: 50,
            metric: Metric::L2,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::Config(format!("k must be positive, got {}", self.k)));
        }
        if self.min_size < 1 {
            return Err(Error::Config("min-size must be at least 1".into()));
        }
        if !(self.nms_iou > 0.0 && self.nms_iou <= 1.0) {
            return Err(Error::Config(format!(
                "nms-iou must lie in (0, 1], got {}",
                self.nms_iou
            )));
        }
        if self.top_n < 1 {
            return Err(Error::Config("top-n must be at least 1".into()));
        }
        if self.pca_dim < 1 || self.itq_bits < 1 {
            return Err(Error::Config(
                "pca dimension and ITQ bits must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn search_config(&self) -> SelectiveSearchConfig {
        SelectiveSearchConfig {
            k: self.k,
            min_size: self.min_size,
            seed: self.seed,
        }
    }
}

/// Selective search followed by score-ordered IoU suppression and top-N truncation.
pub fn propose(img: &RasterImage, image_id: &str, cfg: &PipelineConfig) -> Result<ProposalSet> {
    let all = selective_search(img, image_id, &cfg.search_config())?;
    nms_filter(&all, cfg.nms_iou, cfg.top_n)
}

pub fn describe(
    img: &RasterImage,
    set: &ProposalSet,
    source: &DescriptorSource,
    normalize_rows: bool,
    exec: Execution,
) -> Result<FeatureMatrix> {
    let mut feats = describe_regions(img, set, source, exec)?;
    if normalize_rows {
        feats.l2_normalize_rows();
    }
    Ok(feats)
}

pub fn pool(feats: &FeatureMatrix, normalize: bool) -> Result<PooledRepresentation> {
    let rep = max_pool(feats)?;
    Ok(if normalize { l2_normalize(&rep) } else { rep })
}

/// Pooled built-in representation of one image.
pub fn represent(
    img: &RasterImage,
    image_id: &str,
    cfg: &PipelineConfig,
    exec: Execution,
) -> Result<PooledRepresentation> {
    let set = propose(img, image_id, cfg)?;
    let feats = describe(
        img,
        &set,
        &DescriptorSource::Builtin,
        cfg.normalize_rows,
        exec,
    )?;
    pool(&feats, cfg.normalize)
}

/// Representations for many images; parallel across images, sequential within each.
pub fn represent_all(
    images: &[(String, RasterImage)],
    cfg: &PipelineConfig,
    exec: Execution,
) -> Result<Vec<PooledRepresentation>> {
    exec.try_map(images, |(id, img)| {
        represent(img, id, cfg, Execution::Sequential)
    })
}

/// Maps pooled vectors to index payloads.
#[derive(Clone, Debug)]
pub enum Encoder {
    Raw,
    Pca(PcaModel),
    Itq(ItqModel),
}

impl Encoder {
    pub fn metric(&self) -> Metric {
        match self {
            Encoder::Itq(_) => Metric::Hamming,
            _ => Metric::L2,
        }
    }

    pub fn encode(&self, vector: &[f32]) -> Result<Payload> {
        Ok(match self {
            Encoder::Raw => Payload::Float(vector.to_vec()),
            Encoder::Pca(m) => Payload::Float(
                m.project_f32(vector)?
                    .into_iter()
                    .map(|v| v as f32)
                    .collect(),
            ),
            Encoder::Itq(m) => Payload::Binary(m.encode_f32(vector)?),
        })
    }

    /// Payload width for a given input dimension.
    pub fn width(&self, input_dim: usize) -> usize {
        match self {
            Encoder::Raw => input_dim,
            Encoder::Pca(m) => m.output_dim(),
            Encoder::Itq(m) => m.bits(),
        }
    }
}

pub fn build_index(
    reps: &[PooledRepresentation],
    encoder: &Encoder,
    exec: Execution,
) -> Result<RetrievalIndex> {
    let input_dim = reps.first().map_or(0, PooledRepresentation::dim);
    let width = match encoder {
        Encoder::Raw if reps.is_empty() => {
            return Err(Error::EmptyInput("no representations to index".into()))
        }
        _ => encoder.width(input_dim),
    };
    let mut index = RetrievalIndex::new(encoder.metric(), width)?;
    let payloads = exec.try_map(reps, |r| encoder.encode(&r.vector))?;
    for (rep, payload) in reps.iter().zip(payloads) {
        index.insert(rep.image_id.clone(), payload)?;
    }
    Ok(index)
}
