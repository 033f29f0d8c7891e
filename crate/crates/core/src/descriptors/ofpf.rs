//! OFPF: proposals with their per-region features.
//!
//! ```text
//! "OFPF" | version u32 = 1 | dim u32 | count u32
//! count × ( x u32 | y u32 | w u32 | h u32 | score f32 | dim × f32 )
//! ```
//! All little-endian, no padding. The image id is not stored; callers attach
//! it (usually from the file name).

use super::FeatureMatrix;
use crate::binio::{put_f32, put_u32, to_u32, Reader};
use crate::error::{Error, Result};
use crate::proposals::{Proposal, ProposalSet};
use crate::raster::BoundingBox;

pub const MAGIC: &[u8; 4] = b"OFPF";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

pub fn write_ofpf(set: &ProposalSet, feats: &FeatureMatrix) -> Result<Vec<u8>> {
    if set.len() != feats.rows() {
        return Err(Error::argument(format!(
            "{} proposals but {} feature rows",
            set.len(),
            feats.rows()
        )));
    }
    let dim = feats.dim();
    let mut out = Vec::with_capacity(HEADER_LEN + set.len() * (20 + 4 * dim));
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_u32(&mut out, to_u32(dim, "dim")?);
    put_u32(&mut out, to_u32(set.len(), "count")?);
    for (p, row) in set.proposals.iter().zip(feats.iter_rows()) {
        for v in [p.bbox.x, p.bbox.y, p.bbox.w, p.bbox.h] {
            put_u32(&mut out, v);
        }
        put_f32(&mut out, p.score);
        for &v in row {
            put_f32(&mut out, v);
        }
    }
    Ok(out)
}

/// Parses an OFPF file. Both returned values carry an empty image id.
pub fn read_ofpf(bytes: &[u8]) -> Result<(ProposalSet, FeatureMatrix)> {
    let mut r = Reader::new(bytes);
    r.magic(MAGIC)?;
    r.version(VERSION)?;
    let dim = r.u32("dim")? as usize;
    let count = r.u32("count")? as usize;
    if dim == 0 {
        return Err(Error::format(8, "dim must be positive"));
    }
    let record = 20 + 4 * dim;
    r.require(count * record, "payload")?;
    let mut proposals = Vec::with_capacity(count);
    let mut data = Vec::with_capacity(count * dim);
    for _ in 0..count {
        let at = r.pos();
        let x = r.u32("x")?;
        let y = r.u32("y")?;
        let w = r.u32("w")?;
        let h = r.u32("h")?;
        let score = r.f32("score")?;
        if !score.is_finite() {
            return Err(Error::format(at + 16, "non-finite score"));
        }
        proposals.push(Proposal {
            bbox: BoundingBox::new(x, y, w, h),
            score,
        });
        for _ in 0..dim {
            let vat = r.pos();
            let v = r.f32("feature")?;
            if !v.is_finite() {
                return Err(Error::format(vat, "non-finite feature value"));
            }
            data.push(v);
        }
    }
    r.finish()?;
    let feats = FeatureMatrix::new(String::new(), dim, data)?;
    Ok((ProposalSet::new(String::new(), proposals), feats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixture() -> (ProposalSet, FeatureMatrix) {
        let set = ProposalSet::new(
            "",
            vec![
                Proposal {
                    bbox: BoundingBox::new(0, 0, 10, 20),
                    score: 0.9,
                },
                Proposal {
                    bbox: BoundingBox::new(5, 6, 7, 8),
                    score: 0.25,
                },
            ],
        );
        let feats =
            FeatureMatrix::new("", 4, vec![1.0, -2.5, 0.0, 3.25, 1e-7, 7.0, 8.0, -0.0]).unwrap();
        (set, feats)
    }

    #[test]
    fn exact_layout_and_roundtrip() {
        let (set, feats) = fixture();
        let bytes = write_ofpf(&set, &feats).unwrap();
        assert_eq!(bytes.len(), 16 + 2 * (20 + 16));
        assert_eq!(
            &bytes[..16],
            &[0x4F, 0x46, 0x50, 0x46, 1, 0, 0, 0, 4, 0, 0, 0, 2, 0, 0, 0]
        );
        assert_eq!(&bytes[16..20], &[0, 0, 0, 0]);
        assert_eq!(&bytes[24..28], &10u32.to_le_bytes());
        assert_eq!(&bytes[32..36], &0.9f32.to_le_bytes());
        assert_eq!(&bytes[36..40], &1.0f32.to_le_bytes());
        let (s2, f2) = read_ofpf(&bytes).unwrap();
        assert_eq!((&s2, &f2), (&set, &feats));
        assert_eq!(write_ofpf(&s2, &f2).unwrap(), bytes);
    }

    #[test]
    fn empty_set_is_valid() {
        let set = ProposalSet::default();
        let feats = FeatureMatrix::new("", 4096, vec![]).unwrap();
        let bytes = write_ofpf(&set, &feats).unwrap();
        assert_eq!(bytes.len(), 16);
        let (s, f) = read_ofpf(&bytes).unwrap();
        assert!(s.is_empty());
        assert_eq!((f.rows(), f.dim()), (0, 4096));
    }

    #[test]
    fn truncated_record_reports_lengths() {
        let (set, feats) = fixture();
        let bytes = write_ofpf(&set, &feats).unwrap();
        let err = read_ofpf(&bytes[..bytes.len() - 5])
            .unwrap_err()
            .to_string();
        assert!(err.contains("expected 88 bytes"), "{err}");
        assert!(err.contains("found 83"), "{err}");
    }

    #[test]
    fn header_errors() {
        let (set, feats) = fixture();
        let mut bytes = write_ofpf(&set, &feats).unwrap();
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            read_ofpf(&bad_magic),
            Err(Error::Format { offset: 0, .. })
        ));
        bytes[4] = 2;
        assert!(matches!(
            read_ofpf(&bytes),
            Err(Error::Format { offset: 4, .. })
        ));
        let mut extra = write_ofpf(&set, &feats).unwrap();
        extra.push(0);
        assert!(read_ofpf(&extra).is_err());
    }

    #[test]
    fn mismatched_rows_rejected() {
        let (set, _) = fixture();
        let feats = FeatureMatrix::new("", 4, vec![0.0; 4]).unwrap();
        assert!(write_ofpf(&set, &feats).is_err());
    }

    proptest! {
        #[test]
        fn roundtrip_identity(
            dim in 1usize..12,
            rows in prop::collection::vec((0u32..1000, 0u32..1000, 1u32..500, 1u32..500, 0f32..=1.0), 0..8),
            seed_vals in prop::collection::vec(-1e30f32..1e30, 0..96),
        ) {
            let set = ProposalSet::new("", rows.iter().map(|&(x, y, w, h, score)| Proposal { bbox: BoundingBox::new(x, y, w, h), score }).collect());
            let data: Vec<f32> = (0..rows.len() * dim).map(|i| seed_vals.get(i).copied().unwrap_or(i as f32 * 0.5)).collect();
            let feats = FeatureMatrix::new("", dim, data).unwrap();
            let bytes = write_ofpf(&set, &feats).unwrap();
            let (s, f) = read_ofpf(&bytes).unwrap();
            prop_assert_eq!(&s, &set);
            prop_assert_eq!(f.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), feats.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }
}
