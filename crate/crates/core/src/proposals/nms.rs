use super::ProposalSet;
use crate::error::{Error, Result};
use crate::raster::BoundingBox;

/// Jaccard overlap of two boxes; 0 when their interiors do not meet.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix = a.right().min(b.right()).saturating_sub(a.x.max(b.x));
    let iy = a.bottom().min(b.bottom()).saturating_sub(a.y.max(b.y));
    let inter = u64::from(ix) * u64::from(iy);
    if inter == 0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

/// Greedy suppression in descending score order.
///
/// A proposal is kept iff its IoU with every already-kept proposal is at most
/// `threshold`; the scan stops once `top_n` proposals are kept. The input is
/// re-sorted by score (stable) so callers may pass any order.
pub fn nms_filter(set: &ProposalSet, threshold: f64, top_n: usize) -> Result<ProposalSet> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::argument(format!(
            "IoU threshold must lie in (0, 1], got {threshold}"
        )));
    }
    if top_n < 1 {
        return Err(Error::argument("top_n must be at least 1"));
    }
    let mut ordered = set.proposals.clone();
    ordered.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut kept = Vec::with_capacity(top_n.min(ordered.len()));
    for p in ordered {
        if kept.len() == top_n {
            break;
        }
        if kept
            .iter()
            .all(|k: &super::Proposal| iou(&k.bbox, &p.bbox) <= threshold)
        {
            kept.push(p);
        }
    }
    Ok(ProposalSet {
        image_id: set.image_id.clone(),
        proposals: kept,
    })
}
