//! Hierarchical grouping of an over-segmentation into object proposals.
//!
//! Starting from the graph-based segments, the most similar adjacent pair is
//! merged repeatedly until a single region covers the image. Every region
//! that ever existed contributes its bounding box.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::segment::{felzenszwalb_segment, SegmentLabelMap};
use super::{Proposal, ProposalSet};
use crate::error::Result;
use crate::raster::{BoundingBox, RasterImage};

pub const COLOR_BINS_PER_CHANNEL: usize = 25;
pub const COLOR_BINS: usize = 3 * COLOR_BINS_PER_CHANNEL;
pub const TEXTURE_ORIENTATIONS: usize = 8;
pub const TEXTURE_BINS: usize = 3 * TEXTURE_ORIENTATIONS;

/// Grouping parameters. `k` and `min_size` go to the initial segmentation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectiveSearchConfig {
    pub k: f64,
    pub min_size: usize,
    pub seed: u64,
}

impl Default for SelectiveSearchConfig {
    fn default() -> Self {
        Self {
            k: 100.0,
            min_size: 50,
            seed: 0,
        }
    }
}

/// State carried by each region during grouping.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionNode {
    pub pixel_count: usize,
    pub bbox: BoundingBox,
    /// HSV histogram, 25 bins per channel, l1-normalised over all 75 bins.
    pub color: [f64; COLOR_BINS],
    /// Gradient orientation histogram, 8 bins per RGB channel, l1-normalised.
    pub texture: [f64; TEXTURE_BINS],
}

impl RegionNode {
    /// Pixel-count weighted combination of two regions.
    pub fn merge(&self, other: &RegionNode) -> RegionNode {
        let total = self.pixel_count + other.pixel_count;
        let wa = self.pixel_count as f64 / total as f64;
        let wb = other.pixel_count as f64 / total as f64;
        let mut color = [0.0; COLOR_BINS];
        for (i, c) in color.iter_mut().enumerate() {
            *c = self.color[i] * wa + other.color[i] * wb;
        }
        let mut texture = [0.0; TEXTURE_BINS];
        for (i, t) in texture.iter_mut().enumerate() {
            *t = self.texture[i] * wa + other.texture[i] * wb;
        }
        RegionNode {
            pixel_count: total,
            bbox: self.bbox.union(&other.bbox),
            color,
            texture,
        }
    }
}

/// Individual similarity terms, each in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimilarityTerms {
    pub color: f64,
    pub texture: f64,
    pub size: f64,
    pub fill: f64,
}

impl SimilarityTerms {
    pub fn total(&self) -> f64 {
        self.color + self.texture + self.size + self.fill
    }
}

fn histogram_intersection(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.min(*y)).sum()
}

pub fn similarity_terms(a: &RegionNode, b: &RegionNode, image_area: u64) -> SimilarityTerms {
    let area = image_area as f64;
    let joint = (a.pixel_count + b.pixel_count) as f64;
    let union_box = a.bbox.union(&b.bbox).area() as f64;
    SimilarityTerms {
        color: histogram_intersection(&a.color, &b.color).clamp(0.0, 1.0),
        texture: histogram_intersection(&a.texture, &b.texture).clamp(0.0, 1.0),
        size: (1.0 - joint / area).clamp(0.0, 1.0),
        fill: (1.0 - (union_box - joint) / area).clamp(0.0, 1.0),
    }
}

/// Sum of colour, texture, size and fill similarity, in `[0, 4]`.
pub fn region_similarity(a: &RegionNode, b: &RegionNode, image_area: u64) -> f64 {
    similarity_terms(a, b, image_area).total()
}

fn hsv_bins(rgb: [u8; 3]) -> [usize; 3] {
    let r = f64::from(rgb[0]) / 255.0;
    let g = f64::from(rgb[1]) / 255.0;
    let b = f64::from(rgb[2]) / 255.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let hue = if delta == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    let sat = if max == 0.0 { 0.0 } else { delta / max };
    let bin =
        |v: f64| ((v * COLOR_BINS_PER_CHANNEL as f64) as usize).min(COLOR_BINS_PER_CHANNEL - 1);
    [bin(hue), bin(sat), bin(max)]
}

/// Per-pixel colour and orientation bin indices, computed once per image.
struct PixelBins {
    color: Vec<[u8; 3]>,
    texture: Vec<[u8; 3]>,
}

fn pixel_bins(img: &RasterImage) -> PixelBins {
    let (w, h) = (img.width(), img.height());
    let n = w as usize * h as usize;
    let mut color = Vec::with_capacity(n);
    let mut texture = Vec::with_capacity(n);
    let step = std::f64::consts::TAU / TEXTURE_ORIENTATIONS as f64;
    for y in 0..h {
        for x in 0..w {
            let p = img.pixel(x, y);
            let hb = hsv_bins(p);
            color.push([hb[0] as u8, hb[1] as u8, hb[2] as u8]);
            let left = img.pixel(x.saturating_sub(1), y);
            let right = img.pixel((x + 1).min(w - 1), y);
            let up = img.pixel(x, y.saturating_sub(1));
            let down = img.pixel(x, (y + 1).min(h - 1));
            let mut t = [0u8; 3];
            for c in 0..3 {
                let gx = (f64::from(right[c]) - f64::from(left[c])) / 2.0;
                let gy = (f64::from(down[c]) - f64::from(up[c])) / 2.0;
                let angle = gy.atan2(gx).rem_euclid(std::f64::consts::TAU);
                t[c] = ((angle / step) as usize).min(TEXTURE_ORIENTATIONS - 1) as u8;
            }
            texture.push(t);
        }
    }
    PixelBins { color, texture }
}

/// Builds the initial region nodes, one per segment label.
pub fn initial_regions(img: &RasterImage, seg: &SegmentLabelMap) -> Vec<RegionNode> {
    let bins = pixel_bins(img);
    let n = seg.segment_count;
    let mut counts = vec![0usize; n];
    let mut color = vec![[0.0f64; COLOR_BINS]; n];
    let mut texture = vec![[0.0f64; TEXTURE_BINS]; n];
    let mut extent = vec![(u32::MAX, u32::MAX, 0u32, 0u32); n];
    for y in 0..seg.height {
        for x in 0..seg.width {
            let p = y as usize * seg.width as usize + x as usize;
            let l = seg.labels[p] as usize;
            counts[l] += 1;
            for c in 0..3 {
                color[l][c * COLOR_BINS_PER_CHANNEL + bins.color[p][c] as usize] += 1.0;
                texture[l][c * TEXTURE_ORIENTATIONS + bins.texture[p][c] as usize] += 1.0;
            }
            let e = &mut extent[l];
            e.0 = e.0.min(x);
            e.1 = e.1.min(y);
            e.2 = e.2.max(x + 1);
            e.3 = e.3.max(y + 1);
        }
    }
    (0..n)
        .map(|l| {
            let denom = 3.0 * counts[l] as f64;
            let mut node = RegionNode {
                pixel_count: counts[l],
                bbox: BoundingBox::new(
                    extent[l].0,
                    extent[l].1,
                    extent[l].2 - extent[l].0,
                    extent[l].3 - extent[l].1,
                ),
                color: color[l],
                texture: texture[l],
            };
            node.color.iter_mut().for_each(|v| *v /= denom);
            node.texture.iter_mut().for_each(|v| *v /= denom);
            node
        })
        .collect()
}

fn adjacency(seg: &SegmentLabelMap) -> BTreeSet<(usize, usize)> {
    let mut pairs = BTreeSet::new();
    let (w, h) = (seg.width, seg.height);
    let mut add = |a: u32, b: u32| {
        if a != b {
            pairs.insert((a.min(b) as usize, a.max(b) as usize));
        }
    };
    for y in 0..h {
        for x in 0..w {
            let l = seg.label(x, y);
            if x + 1 < w {
                add(l, seg.label(x + 1, y));
            }
            if y + 1 < h {
                add(l, seg.label(x, y + 1));
                if x + 1 < w {
                    add(l, seg.label(x + 1, y + 1));
                }
                if x > 0 {
                    add(l, seg.label(x - 1, y + 1));
                }
            }
        }
    }
    pairs
}

/// The merge hierarchy: every region in creation order. The first
/// `initial_count` entries are the segments; each later entry is one merge.
#[derive(Clone, Debug)]
pub struct Hierarchy {
    pub regions: Vec<RegionNode>,
    pub initial_count: usize,
}

/// Greedy most-similar-first merging until one region remains.
pub fn group_regions(
    initial: Vec<RegionNode>,
    adjacent: &BTreeSet<(usize, usize)>,
    image_area: u64,
) -> Hierarchy {
    let initial_count = initial.len();
    let mut regions = initial;
    regions.reserve(initial_count.saturating_sub(1));
    let mut neighbours: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); initial_count];
    let mut sims: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for &(a, b) in adjacent {
        neighbours[a].insert(b);
        neighbours[b].insert(a);
        sims.insert(
            (a, b),
            region_similarity(&regions[a], &regions[b], image_area),
        );
    }

    loop {
        // highest similarity; ties go to the lexicographically smallest pair
        let best = sims.iter().fold(
            None::<((usize, usize), f64)>,
            |acc, (&pair, &s)| match acc {
                Some((_, best_s)) if best_s >= s => acc,
                _ => Some((pair, s)),
            },
        );
        let Some(((a, b), _)) = best else { break };

        let merged = regions[a].merge(&regions[b]);
        let t = regions.len();
        regions.push(merged);

        let mut joined: BTreeSet<usize> = neighbours[a].union(&neighbours[b]).copied().collect();
        joined.remove(&a);
        joined.remove(&b);
        for &n in neighbours[a].iter().chain(neighbours[b].iter()) {
            sims.remove(&(n.min(a), n.max(a)));
            sims.remove(&(n.min(b), n.max(b)));
        }
        neighbours[a].clear();
        neighbours[b].clear();
        for &n in &joined {
            neighbours[n].remove(&a);
            neighbours[n].remove(&b);
            neighbours[n].insert(t);
            sims.insert(
                (n, t),
                region_similarity(&regions[n], &regions[t], image_area),
            );
        }
        neighbours.push(joined);
    }
    Hierarchy {
        regions,
        initial_count,
    }
}

fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// RNG stream for one image, derived from the run seed and the image id.
pub fn image_rng(seed: u64, image_id: &str) -> ChaCha8Rng {
    let key = fnv1a(seed.to_le_bytes().into_iter().chain(image_id.bytes()));
    ChaCha8Rng::seed_from_u64(key)
}

/// Scores the hierarchy's unique boxes and sorts them by descending score.
///
/// Creation steps count from 1 over all regions (segments first, then
/// merges); score = step / total × u with u drawn per unique box in creation
/// order. Equal scores keep the earlier creation step first.
pub fn score_hierarchy(h: &Hierarchy, image_id: &str, seed: u64) -> ProposalSet {
    let total = h.regions.len() as f64;
    let mut seen = HashSet::with_capacity(h.regions.len());
    let mut rng = image_rng(seed, image_id);
    let mut scored: Vec<(usize, Proposal)> = Vec::new();
    for (i, region) in h.regions.iter().enumerate() {
        if !seen.insert(region.bbox) {
            continue;
        }
        let depth = (i + 1) as f64 / total;
        let u: f64 = rng.random();
        scored.push((
            i,
            Proposal {
                bbox: region.bbox,
                score: (depth * u) as f32,
            },
        ));
    }
    scored.sort_by(|(ia, a), (ib, b)| b.score.total_cmp(&a.score).then(ia.cmp(ib)));
    ProposalSet {
        image_id: image_id.to_owned(),
        proposals: scored.into_iter().map(|(_, p)| p).collect(),
    }
}

/// Full proposal generation: segmentation, hierarchical grouping, scoring.
pub fn selective_search(
    img: &RasterImage,
    image_id: &str,
    config: &SelectiveSearchConfig,
) -> Result<ProposalSet> {
    let seg = felzenszwalb_segment(img, config.k, config.min_size)?;
    let regions = initial_regions(img, &seg);
    let adjacent = adjacency(&seg);
    let area = u64::from(img.width()) * u64::from(img.height());
    let hierarchy = group_regions(regions, &adjacent, area);
    Ok(score_hierarchy(&hierarchy, image_id, config.seed))
}

/// Segmentation plus grouping without scoring, for inspection and tests.
pub fn build_hierarchy(img: &RasterImage, config: &SelectiveSearchConfig) -> Result<Hierarchy> {
    let seg = felzenszwalb_segment(img, config.k, config.min_size)?;
    let regions = initial_regions(img, &seg);
    let adjacent = adjacency(&seg);
    let area = u64::from(img.width()) * u64::from(img.height());
    Ok(group_regions(regions, &adjacent, area))
}
