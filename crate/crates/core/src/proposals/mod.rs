//! Class-agnostic object proposals: segmentation, hierarchical grouping,
//! IoU-based suppression, and the line-oriented proposal file format.

pub mod grouping;
pub mod nms;
pub mod segment;

pub use grouping::{region_similarity, selective_search, RegionNode, SelectiveSearchConfig};
pub use nms::{iou, nms_filter};
pub use segment::{felzenszwalb_segment, SegmentLabelMap};

use crate::error::{Error, Result};
use crate::raster::BoundingBox;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Proposal {
    pub bbox: BoundingBox,
    /// Objectness score in `[0, 1]`.
    pub score: f32,
}

/// Proposals for one image, in non-increasing score order.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ProposalSet {
    pub image_id: String,
    pub proposals: Vec<Proposal>,
}

impl ProposalSet {
    pub fn new(image_id: impl Into<String>, proposals: Vec<Proposal>) -> Self {
        Self {
            image_id: image_id.into(),
            proposals,
        }
    }

    pub fn len(&self) -> usize {
        self.proposals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proposals.is_empty()
    }

    pub fn boxes(&self) -> impl Iterator<Item = &BoundingBox> {
        self.proposals.iter().map(|p| &p.bbox)
    }
}

/// Image ids travel through whitespace-separated text formats.
pub fn validate_image_id(id: &str) -> Result<()> {
    if id.is_empty() || id.chars().any(char::is_whitespace) {
        return Err(Error::argument(format!(
            "image id {id:?} must be non-empty and contain no whitespace"
        )));
    }
    Ok(())
}

/// Renders proposal sets as `image_id x y w h score` lines.
///
/// Scores use the shortest decimal that round-trips to the same `f32`.
pub fn write_proposals(sets: &[ProposalSet]) -> String {
    let mut out = String::new();
    for set in sets {
        for p in &set.proposals {
            let b = p.bbox;
            out.push_str(&format!(
                "{} {} {} {} {} {}\n",
                set.image_id, b.x, b.y, b.w, b.h, p.score
            ));
        }
    }
    out
}

/// Parses the proposal text format, grouping consecutive lines by image id.
pub fn read_proposals(text: &str) -> Result<Vec<ProposalSet>> {
    let mut sets: Vec<ProposalSet> = Vec::new();
    let mut offset = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line_offset = offset;
        offset += line.len() + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad =
            |msg: &str| Error::format(line_offset, format!("proposal line {}: {msg}", lineno + 1));
        if fields.len() != 6 {
            return Err(bad(&format!("expected 6 fields, found {}", fields.len())));
        }
        let num = |s: &str| {
            s.parse::<u32>()
                .map_err(|_| bad(&format!("invalid integer {s:?}")))
        };
        let bbox = BoundingBox::new(
            num(fields[1])?,
            num(fields[2])?,
            num(fields[3])?,
            num(fields[4])?,
        );
        if bbox.w == 0 || bbox.h == 0 {
            return Err(bad("box has zero extent"));
        }
        let score: f32 = fields[5]
            .parse()
            .map_err(|_| bad(&format!("invalid score {:?}", fields[5])))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(bad(&format!("score {score} outside [0, 1]")));
        }
        let proposal = Proposal { bbox, score };
        match sets.last_mut() {
            Some(s) if s.image_id == fields[0] => s.proposals.push(proposal),
            _ => sets.push(ProposalSet::new(fields[0], vec![proposal])),
        }
    }
    Ok(sets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn text_format_layout() {
        let set = ProposalSet::new(
            "img_1",
            vec![
                Proposal {
                    bbox: BoundingBox::new(0, 0, 128, 128),
                    score: 0.75,
                },
                Proposal {
                    bbox: BoundingBox::new(3, 4, 5, 6),
                    score: 0.1,
                },
            ],
        );
        let text = write_proposals(std::slice::from_ref(&set));
        assert_eq!(text, "img_1 0 0 128 128 0.75\nimg_1 3 4 5 6 0.1\n");
        assert_eq!(read_proposals(&text).unwrap(), vec![set]);
    }

    #[test]
    fn malformed_lines_fail() {
        assert!(read_proposals("a 1 2 3\n").is_err());
        assert!(read_proposals("a 1 2 0 4 0.5\n").is_err());
        assert!(read_proposals("a 1 2 3 4 1.5\n").is_err());
        assert!(read_proposals("a x 2 3 4 0.5\n").is_err());
        assert!(read_proposals("").unwrap().is_empty());
    }

    #[test]
    fn image_ids_without_whitespace() {
        assert!(validate_image_id("abc_01.x").is_ok());
        assert!(validate_image_id("a b").is_err());
        assert!(validate_image_id("").is_err());
    }

    proptest! {
        #[test]
        fn scores_roundtrip_exactly(scores in prop::collection::vec(0f32..=1.0, 1..20)) {
            let set = ProposalSet::new(
                "p",
                scores.iter().enumerate().map(|(i, &score)| Proposal { bbox: BoundingBox::new(i as u32, 0, 1, 1), score }).collect(),
            );
            let back = read_proposals(&write_proposals(std::slice::from_ref(&set))).unwrap();
            prop_assert_eq!(back, vec![set]);
        }
    }
}
