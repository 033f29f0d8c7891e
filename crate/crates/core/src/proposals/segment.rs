//! Graph-based over-segmentation on the 8-connected pixel grid.
//!
//! Edges carry the Euclidean RGB distance between neighbouring pixels. Edges
//! are visited in non-decreasing weight order and two components merge when
//! the edge weight does not exceed either component's internal difference
//! plus `k / |C|`. A final pass absorbs components below `min_size` into the
//! neighbour reached over the cheapest edge.

use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Dense per-pixel segment labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentLabelMap {
    pub width: u32,
    pub height: u32,
    /// Row-major segment id per pixel, dense in `0..segment_count`.
    pub labels: Vec<u32>,
    pub segment_count: usize,
}

impl SegmentLabelMap {
    pub fn label(&self, x: u32, y: u32) -> u32 {
        self.labels[y as usize * self.width as usize + x as usize]
    }
}

/// Disjoint-set forest with union by rank and path halving.
pub(crate) struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
    size: Vec<usize>,
}

impl DisjointSets {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
            size: vec![1; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn size(&self, root: usize) -> usize {
        self.size[root]
    }

    /// Joins two roots and returns the surviving root.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> usize {
        let (hi, lo) = if self.rank[a] >= self.rank[b] {
            (a, b)
        } else {
            (b, a)
        };
        self.parent[lo] = hi;
        self.size[hi] += self.size[lo];
        if self.rank[hi] == self.rank[lo] {
            self.rank[hi] += 1;
        }
        hi
    }
}

struct Edge {
    a: u32,
    b: u32,
    w: f64,
}

fn grid_edges(img: &RasterImage) -> Vec<Edge> {
    let (w, h) = (img.width(), img.height());
    let mut edges = Vec::with_capacity(w as usize * h as usize * 4);
    let dist = |p: [u8; 3], q: [u8; 3]| {
        p.iter()
            .zip(q.iter())
            .map(|(&u, &v)| {
                let d = f64::from(u) - f64::from(v);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    };
    let idx = |x: u32, y: u32| y * w + x;
    for y in 0..h {
        for x in 0..w {
            let p = img.pixel(x, y);
            // right, down, down-right, down-left: each undirected neighbour pair once
            if x + 1 < w {
                edges.push(Edge {
                    a: idx(x, y),
                    b: idx(x + 1, y),
                    w: dist(p, img.pixel(x + 1, y)),
                });
            }
            if y + 1 < h {
                edges.push(Edge {
                    a: idx(x, y),
                    b: idx(x, y + 1),
                    w: dist(p, img.pixel(x, y + 1)),
                });
                if x + 1 < w {
                    edges.push(Edge {
                        a: idx(x, y),
                        b: idx(x + 1, y + 1),
                        w: dist(p, img.pixel(x + 1, y + 1)),
                    });
                }
                if x > 0 {
                    edges.push(Edge {
                        a: idx(x, y),
                        b: idx(x - 1, y + 1),
                        w: dist(p, img.pixel(x - 1, y + 1)),
                    });
                }
            }
        }
    }
    edges
}

/// Segments `img` with scale parameter `k` and minimum component size `min_size`.
pub fn felzenszwalb_segment(img: &RasterImage, k: f64, min_size: usize) -> Result<SegmentLabelMap> {
    if k <= 0.0 || !k.is_finite() {
        return Err(Error::argument(format!(
            "k must be positive and finite, got {k}"
        )));
    }
    if min_size < 1 {
        return Err(Error::argument("min_size must be at least 1"));
    }
    let n = img.width() as usize * img.height() as usize;
    let mut edges = grid_edges(img);
    // stable sort keeps construction order among equal weights
    edges.sort_by(|e, f| e.w.total_cmp(&f.w));

    let mut sets = DisjointSets::new(n);
    let mut threshold = vec![k; n];
    for e in &edges {
        let a = sets.find(e.a as usize);
        let b = sets.find(e.b as usize);
        if a != b && e.w <= threshold[a] && e.w <= threshold[b] {
            let root = sets.union(a, b);
            threshold[root] = e.w + k / sets.size(root) as f64;
        }
    }
    for e in &edges {
        let a = sets.find(e.a as usize);
        let b = sets.find(e.b as usize);
        if a != b && (sets.size(a) < min_size || sets.size(b) < min_size) {
            sets.union(a, b);
        }
    }

    // dense ids in order of first appearance in row-major scan
    let mut remap = vec![u32::MAX; n];
    let mut labels = Vec::with_capacity(n);
    let mut next = 0u32;
    for p in 0..n {
        let root = sets.find(p);
        if remap[root] == u32::MAX {
            remap[root] = next;
            next += 1;
        }
        labels.push(remap[root]);
    }
    Ok(SegmentLabelMap {
        width: img.width(),
        height: img.height(),
        labels,
        segment_count: next as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_image_is_one_segment() {
        let img = RasterImage::filled(16, 16, [90, 30, 200]).unwrap();
        for k in [1.0, 100.0, 5000.0] {
            let seg = felzenszwalb_segment(&img, k, 1).unwrap();
            assert_eq!(seg.segment_count, 1);
            assert!(seg.labels.iter().all(|&l| l == 0));
        }
    }

    #[test]
    fn two_half_planes_split_exactly() {
        let mut img = RasterImage::filled(16, 16, [0, 0, 0]).unwrap();
        for y in 0..16 {
            for x in 8..16 {
                img.set_pixel(x, y, [255, 255, 255]);
            }
        }
        let seg = felzenszwalb_segment(&img, 100.0, 20).unwrap();
        assert_eq!(seg.segment_count, 2);
        for y in 0..16 {
            for x in 0..16 {
                assert_eq!(seg.label(x, y), u32::from(x >= 8));
            }
        }
    }

    #[test]
    fn segment_count_non_increasing_in_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pixels: Vec<u8> = (0..32 * 32 * 3).map(|_| rng.random()).collect();
        let img = RasterImage::new(32, 32, pixels).unwrap();
        let counts: Vec<usize> = [10.0, 50.0, 100.0, 500.0]
            .iter()
            .map(|&k| felzenszwalb_segment(&img, k, 1).unwrap().segment_count)
            .collect();
        assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
        assert!(counts[0] > counts[3]);
    }

    #[test]
    fn labels_dense_and_min_size_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pixels: Vec<u8> = (0..24 * 20 * 3).map(|_| rng.random()).collect();
        let img = RasterImage::new(24, 20, pixels).unwrap();
        let seg = felzenszwalb_segment(&img, 50.0, 10).unwrap();
        let mut sizes = vec![0usize; seg.segment_count];
        for &l in &seg.labels {
            sizes[l as usize] += 1;
        }
        assert!(sizes.iter().all(|&s| s >= 10), "{sizes:?}");
    }

    #[test]
    fn invalid_arguments() {
        let img = RasterImage::filled(2, 2, [0, 0, 0]).unwrap();
        assert!(felzenszwalb_segment(&img, 0.0, 1).is_err());
        assert!(felzenszwalb_segment(&img, 1.0, 0).is_err());
    }
}
