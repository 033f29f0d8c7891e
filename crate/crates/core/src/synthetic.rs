//! Deterministic synthetic scenes: coloured shapes on a lightly textured
//! background. Used for the retrieval fixtures, benches and invariance checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eval::GroundTruth;
use crate::raster::RasterImage;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeKind {
    Rect,
    Ellipse,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SceneObject {
    pub kind: ShapeKind,
    pub color: [u8; 3],
    pub x: i32,
    pub y: i32,
    pub w: u32,
    pub h: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub width: u32,
    pub height: u32,
    pub background: [u8; 3],
    /// Peak amplitude of the per-pixel background jitter.
    pub noise: u8,
    pub noise_seed: u64,
    pub objects: Vec<SceneObject>,
}

impl SceneObject {
    fn covers(&self, px: i32, py: i32) -> bool {
        let (x1, y1) = (self.x + self.w as i32, self.y + self.h as i32);
        if px < self.x || py < self.y || px >= x1 || py >= y1 {
            return false;
        }
        match self.kind {
            ShapeKind::Rect => true,
            ShapeKind::Ellipse => {
                let rx = self.w as f64 / 2.0;
                let ry = self.h as f64 / 2.0;
                let dx = (f64::from(px) + 0.5 - f64::from(self.x)) - rx;
                let dy = (f64::from(py) + 0.5 - f64::from(self.y)) - ry;
                (dx / rx).powi(2) + (dy / ry).powi(2) <= 1.0
            }
        }
    }
}

impl Scene {
    /// Later objects paint over earlier ones.
    pub fn render(&self) -> RasterImage {
        let mut img = RasterImage::filled(self.width, self.height, self.background)
            .expect("scene size is positive");
        let mut rng = ChaCha8Rng::seed_from_u64(self.noise_seed);
        let amp = i32::from(self.noise);
        for y in 0..self.height {
            for x in 0..self.width {
                let jitter = if amp > 0 {
                    rng.random_range(-amp..=amp)
                } else {
                    0
                };
                let base = self
                    .objects
                    .iter()
                    .rev()
                    .find(|o| o.covers(x as i32, y as i32))
                    .map_or(self.background, |o| o.color);
                let px = base.map(|c| (i32::from(c) + jitter).clamp(0, 255) as u8);
                img.set_pixel(x, y, px);
            }
        }
        img
    }
}

/// Two 128×128 scenes holding the same two rectangles with their positions
/// swapped. In the first scene the red rectangle touches the left border, in
/// the second the blue one does.
pub fn swapped_rectangle_scenes() -> (RasterImage, RasterImage) {
    let background = [200, 200, 190];
    let red = |x, y| SceneObject {
        kind: ShapeKind::Rect,
        color: [200, 30, 40],
        x,
        y,
        w: 40,
        h: 56,
    };
    let blue = |x, y| SceneObject {
        kind: ShapeKind::Rect,
        color: [30, 60, 190],
        x,
        y,
        w: 48,
        h: 32,
    };
    let scene = |objects| Scene {
        width: 128,
        height: 128,
        background,
        noise: 0,
        noise_seed: 0,
        objects,
    };
    let a = scene(vec![red(0, 20), blue(70, 64)]);
    let b = scene(vec![blue(0, 20), red(70, 64)]);
    (a.render(), b.render())
}

struct GroupStyle {
    background: [u8; 3],
    objects: [(ShapeKind, [u8; 3], u32, u32); 3],
}

const GROUPS: [GroupStyle; 4] = [
    GroupStyle {
        background: [225, 220, 200],
        objects: [
            (ShapeKind::Rect, [200, 40, 40], 36, 28),
            (ShapeKind::Ellipse, [40, 90, 200], 30, 30),
            (ShapeKind::Rect, [240, 200, 40], 20, 40),
        ],
    },
    GroupStyle {
        background: [40, 70, 45],
        objects: [
            (ShapeKind::Ellipse, [250, 250, 245], 34, 26),
            (ShapeKind::Rect, [230, 120, 20], 24, 24),
            (ShapeKind::Ellipse, [140, 40, 160], 22, 36),
        ],
    },
    GroupStyle {
        background: [120, 170, 220],
        objects: [
            (ShapeKind::Rect, [30, 30, 35], 40, 22),
            (ShapeKind::Rect, [240, 240, 240], 22, 30),
            (ShapeKind::Ellipse, [220, 60, 130], 28, 28),
        ],
    },
    GroupStyle {
        background: [90, 60, 50],
        objects: [
            (ShapeKind::Ellipse, [60, 200, 90], 32, 32),
            (ShapeKind::Rect, [250, 230, 150], 30, 20),
            (ShapeKind::Rect, [20, 160, 170], 18, 38),
        ],
    },
];

const SLOTS: [(i32, i32); 3] = [(12, 14), (72, 20), (36, 76)];

/// Small random patches painted underneath the main objects.
///
/// Colours come from `color_seed` and placements from `place_seed`, so scenes
/// can share a palette while the layout changes.
fn clutter(count: usize, color_seed: u64, place_seed: u64) -> Vec<SceneObject> {
    let mut colors = ChaCha8Rng::seed_from_u64(color_seed);
    let mut rng = ChaCha8Rng::seed_from_u64(place_seed);
    (0..count)
        .map(|_| {
            let w = rng.random_range(7..11);
            let h = rng.random_range(7..11);
            SceneObject {
                kind: ShapeKind::Rect,
                color: [colors.random(), colors.random(), colors.random()],
                x: rng.random_range(0..(128 - w as i32)),
                y: rng.random_range(0..(128 - h as i32)),
                w,
                h,
            }
        })
        .collect()
}

pub const CLUTTER_PATCHES: usize = 60;

fn group_scene(group: usize, variant: usize) -> Scene {
    let style = &GROUPS[group];
    let noise_seed = (group * 10 + variant) as u64 + 1;
    // variant 0: base layout; 1: translated; 2: rearranged and shrunk
    let (offset, order, scale) = match variant {
        0 => ((0, 0), [0, 1, 2], 1.0),
        1 => ((10, 8), [0, 1, 2], 1.0),
        _ => ((4, 2), [2, 0, 1], 0.8),
    };
    let mut objects = clutter(CLUTTER_PATCHES, group as u64 + 1000, noise_seed ^ 0x5eed);
    objects.extend(
        style
            .objects
            .iter()
            .enumerate()
            .map(|(i, &(kind, color, w, h))| {
                let slot = SLOTS[order[i]];
                SceneObject {
                    kind,
                    color,
                    x: slot.0 + offset.0,
                    y: slot.1 + offset.1,
                    w: (f64::from(w) * scale).round() as u32,
                    h: (f64::from(h) * scale).round() as u32,
                }
            }),
    );
    Scene {
        width: 128,
        height: 128,
        background: style.background,
        noise: 6,
        noise_seed,
        objects,
    }
}

/// A labelled synthetic image.
#[derive(Clone, Debug)]
pub struct CorpusImage {
    pub image_id: String,
    pub group: usize,
    pub image: RasterImage,
}

/// Twelve 128×128 images in four groups of three. Members of a group share
/// the same objects; the variants are translated, rearranged and scaled, and
/// each image carries small clutter patches in its group's palette at
/// image-specific positions.
pub fn retrieval_corpus() -> Vec<CorpusImage> {
    (0..GROUPS.len())
        .flat_map(|g| {
            (0..3).map(move |v| CorpusImage {
                image_id: format!("g{g}_v{v}"),
                group: g,
                image: group_scene(g, v).render(),
            })
        })
        .collect()
}

/// Ground truth pairing every corpus image with the members of its group.
pub fn corpus_ground_truth(images: &[CorpusImage]) -> GroundTruth {
    let mut gt = GroundTruth::new();
    for q in images {
        gt.insert(
            q.image_id.clone(),
            images
                .iter()
                .filter(|c| c.group == q.group)
                .map(|c| c.image_id.clone()),
        )
        .expect("a group always contains its own query");
    }
    gt
}

/// Random scenes for fitting the compression models.
pub fn random_scenes(count: usize, seed: u64) -> Vec<CorpusImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let mut color = || [rng.random::<u8>(), rng.random::<u8>(), rng.random::<u8>()];
            let background = color();
            let palette: Vec<[u8; 3]> = (0..3).map(|_| color()).collect();
            let mut objects = clutter(CLUTTER_PATCHES, rng.random(), rng.random());
            objects.extend(palette.into_iter().map(|c| {
                let w = rng.random_range(14..48);
                let h = rng.random_range(14..48);
                SceneObject {
                    kind: if rng.random_bool(0.5) {
                        ShapeKind::Rect
                    } else {
                        ShapeKind::Ellipse
                    },
                    color: c,
                    x: rng.random_range(0..(128 - w as i32)),
                    y: rng.random_range(0..(128 - h as i32)),
                    w,
                    h,
                }
            }));
            let scene = Scene {
                width: 128,
                height: 128,
                background,
                noise: 6,
                noise_seed: rng.random(),
                objects,
            };
            CorpusImage {
                image_id: format!("train_{i:03}"),
                group: usize::MAX,
                image: scene.render(),
            }
        })
        .collect()
}
