//! Orderless aggregation of region descriptors by component-wise maximum.

use crate::descriptors::{read_ofpf, write_ofpf, FeatureMatrix};
use crate::error::{Error, Result};
use crate::proposals::{Proposal, ProposalSet};
use crate::raster::BoundingBox;

/// One fixed-length vector per image.
#[derive(Clone, Debug, PartialEq)]
pub struct PooledRepresentation {
    pub image_id: String,
    pub vector: Vec<f32>,
    /// Set once the vector has been scaled to unit l2 norm.
    pub normalized: bool,
}

impl PooledRepresentation {
    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

pub fn max_pool(feats: &FeatureMatrix) -> Result<PooledRepresentation> {
    let mut rows = feats.iter_rows();
    let Some(first) = rows.next() else {
        return Err(Error::EmptyInput(format!(
            "image {:?} has no region descriptors to pool",
            feats.image_id
        )));
    };
    let mut vector = first.to_vec();
    for row in rows {
        for (m, &v) in vector.iter_mut().zip(row) {
            if v > *m {
                *m = v;
            }
        }
    }
    Ok(PooledRepresentation {
        image_id: feats.image_id.clone(),
        vector,
        normalized: false,
    })
}

/// Scales to unit l2 norm; a zero vector is returned as is with `normalized = false`.
pub fn l2_normalize(rep: &PooledRepresentation) -> PooledRepresentation {
    let norm = rep
        .vector
        .iter()
        .map(|&v| f64::from(v) * f64::from(v))
        .sum::<f64>()
        .sqrt();
    if norm == 0.0 {
        return PooledRepresentation {
            normalized: false,
            ..rep.clone()
        };
    }
    PooledRepresentation {
        image_id: rep.image_id.clone(),
        vector: rep
            .vector
            .iter()
            .map(|&v| (f64::from(v) / norm) as f32)
            .collect(),
        normalized: true,
    }
}

pub fn cosine_similarity(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum();
    let na: f64 = a.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Encodes a representation as a one-record OFPF file.
///
/// The record box spans `extent` from the origin; the score is 1. The
/// `normalized` flag is not stored.
pub fn write_representation(rep: &PooledRepresentation, extent: (u32, u32)) -> Result<Vec<u8>> {
    let set = ProposalSet::new(
        rep.image_id.clone(),
        vec![Proposal {
            bbox: BoundingBox::new(0, 0, extent.0.max(1), extent.1.max(1)),
            score: 1.0,
        }],
    );
    let feats = FeatureMatrix::new(rep.image_id.clone(), rep.dim(), rep.vector.clone())?;
    write_ofpf(&set, &feats)
}

pub fn read_representation(bytes: &[u8], image_id: &str) -> Result<PooledRepresentation> {
    let (_, feats) = read_ofpf(bytes)?;
    if feats.rows() != 1 {
        return Err(Error::format(
            12,
            format!(
                "representation file must hold exactly one record, found {}",
                feats.rows()
            ),
        ));
    }
    Ok(PooledRepresentation {
        image_id: image_id.to_owned(),
        vector: feats.row(0).to_vec(),
        normalized: false,
    })
}

/// Extent covering every proposal box, measured from the origin.
pub fn proposal_extent(set: &ProposalSet) -> (u32, u32) {
    set.boxes()
        .fold((1, 1), |(w, h), b| (w.max(b.right()), h.max(b.bottom())))
}
