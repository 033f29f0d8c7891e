//! Exact nearest-neighbour search over float or binary representations.
//!
//! Searches are brute-force scans. L2 ranks on squared distance and reports
//! the square root; equal distances keep insertion order.

use std::collections::HashSet;

use crate::binio::{put_f32, put_u32, to_u32, Reader};
use crate::compression::code::{payload_len, BinaryCode};
use crate::error::{Error, Result};
use crate::exec::Execution;

pub const MAGIC: &[u8; 4] = b"OFPI";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    L2,
    Hamming,
}

impl Metric {
    fn tag(self) -> u32 {
        match self {
            Metric::L2 => 0,
            Metric::Hamming => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::L2 => "l2",
            Metric::Hamming => "hamming",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(Metric::L2),
            "hamming" => Ok(Metric::Hamming),
            other => Err(Error::argument(format!(
                "unknown metric {other:?} (expected l2 or hamming)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Float(Vec<f32>),
    Binary(BinaryCode),
}

impl Payload {
    fn width(&self) -> usize {
        match self {
            Payload::Float(v) => v.len(),
            Payload::Binary(c) => c.bits(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RetrievalIndex {
    metric: Metric,
    /// Vector dimension for l2, bit count for hamming.
    width: usize,
    ids: Vec<String>,
    floats: Vec<f32>,
    codes: Vec<u8>,
    id_set: HashSet<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hit {
    pub image_id: String,
    pub distance: f64,
}

/// Search results for one query, best first.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct RankedList {
    pub query_id: String,
    pub hits: Vec<Hit>,
}

impl RankedList {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.hits.iter().map(|h| h.image_id.as_str())
    }
}

/// Number of differing bits.
pub fn hamming_distance(a: &BinaryCode, b: &BinaryCode) -> Result<u32> {
    if a.bits() != b.bits() {
        return Err(Error::argument(format!(
            "cannot compare {}-bit and {}-bit codes",
            a.bits(),
            b.bits()
        )));
    }
    Ok(hamming_bytes(a.payload(), b.payload()))
}

#[inline]
fn hamming_bytes(a: &[u8], b: &[u8]) -> u32 {
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    let mut total = 0;
    for (x, y) in (&mut ca).zip(&mut cb) {
        let x = u64::from_le_bytes(x.try_into().expect("8 bytes"));
        let y = u64::from_le_bytes(y.try_into().expect("8 bytes"));
        total += (x ^ y).count_ones();
    }
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        total += (x ^ y).count_ones();
    }
    total
}

#[inline]
fn squared_l2(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum()
}

impl RetrievalIndex {
    pub fn new(metric: Metric, width: usize) -> Result<Self> {
        if width == 0 {
            return Err(Error::argument("index width must be positive"));
        }
        Ok(Self {
            metric,
            width,
            ids: Vec::new(),
            floats: Vec::new(),
            codes: Vec::new(),
            id_set: HashSet::new(),
        })
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Payload bytes per entry: `4·dim` for l2, `⌈bits/8⌉` for hamming.
    pub fn entry_bytes(&self) -> usize {
        match self.metric {
            Metric::L2 => 4 * self.width,
            Metric::Hamming => payload_len(self.width),
        }
    }

    fn check_payload(&self, payload: &Payload) -> Result<()> {
        match (self.metric, payload) {
            (Metric::L2, Payload::Float(_)) | (Metric::Hamming, Payload::Binary(_)) => {}
            _ => {
                return Err(Error::argument(format!(
                    "payload kind does not match {} index",
                    self.metric.name()
                )))
            }
        }
        if payload.width() != self.width {
            return Err(Error::argument(format!(
                "payload width {} differs from index width {}",
                payload.width(),
                self.width
            )));
        }
        Ok(())
    }

    pub fn insert(&mut self, image_id: impl Into<String>, payload: Payload) -> Result<()> {
        let image_id = image_id.into();
        self.check_payload(&payload)?;
        if self.id_set.contains(&image_id) {
            return Err(Error::argument(format!("duplicate image id {image_id:?}")));
        }
        match payload {
            Payload::Float(v) => {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::argument(format!(
                        "non-finite value in entry {image_id:?}"
                    )));
                }
                self.floats.extend_from_slice(&v)
            }
            Payload::Binary(c) => self.codes.extend_from_slice(c.payload()),
        }
        self.id_set.insert(image_id.clone());
        self.ids.push(image_id);
        Ok(())
    }

    pub fn payload(&self, i: usize) -> Payload {
        match self.metric {
            Metric::L2 => {
                Payload::Float(self.floats[i * self.width..(i + 1) * self.width].to_vec())
            }
            Metric::Hamming => {
                let n = payload_len(self.width);
                Payload::Binary(
                    BinaryCode::new(self.width, self.codes[i * n..(i + 1) * n].to_vec())
                        .expect("stored codes are valid"),
                )
            }
        }
    }

    /// Ranking keys for every entry: squared l2 or Hamming count.
    fn keys(&self, query: &Payload, exec: Execution) -> Vec<f64> {
        match query {
            Payload::Float(q) => exec.map_range(self.len(), |i| {
                squared_l2(q, &self.floats[i * self.width..(i + 1) * self.width])
            }),
            Payload::Binary(q) => {
                let n = payload_len(self.width);
                exec.map_range(self.len(), |i| {
                    f64::from(hamming_bytes(q.payload(), &self.codes[i * n..(i + 1) * n]))
                })
            }
        }
    }

    /// Exact top-`k` search; `k` is capped at the corpus size.
    pub fn search(&self, query_id: &str, query: &Payload, k: usize) -> Result<RankedList> {
        self.search_with(query_id, query, k, Execution::Sequential)
    }

    pub fn search_with(
        &self,
        query_id: &str,
        query: &Payload,
        k: usize,
        exec: Execution,
    ) -> Result<RankedList> {
        if k < 1 {
            return Err(Error::argument("k must be at least 1"));
        }
        self.check_payload(query)?;
        let keys = self.keys(query, exec);
        let mut order: Vec<usize> = (0..keys.len()).collect();
        let cmp = |a: &usize, b: &usize| keys[*a].total_cmp(&keys[*b]).then(a.cmp(b));
        let k = k.min(order.len());
        if k < order.len() {
            order.select_nth_unstable_by(k, cmp);
            order.truncate(k);
        }
        order.sort_unstable_by(cmp);
        let hits = order
            .into_iter()
            .map(|i| Hit {
                image_id: self.ids[i].clone(),
                distance: match self.metric {
                    Metric::L2 => keys[i].sqrt(),
                    Metric::Hamming => keys[i],
                },
            })
            .collect();
        Ok(RankedList {
            query_id: query_id.to_owned(),
            hits,
        })
    }

    /// Runs several queries; parallel across queries when `exec` allows.
    pub fn search_batch(
        &self,
        queries: &[(String, Payload)],
        k: usize,
        exec: Execution,
    ) -> Result<Vec<RankedList>> {
        exec.try_map(queries, |(id, q)| self.search(id, q, k))
    }

    /// OFPI: magic, version, metric tag, width, count, then per entry
    /// `id_len u32 | UTF-8 id | payload`.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_u32(&mut out, self.metric.tag());
        put_u32(&mut out, to_u32(self.width, "width")?);
        put_u32(&mut out, to_u32(self.len(), "count")?);
        let step = self.entry_bytes();
        for (i, id) in self.ids.iter().enumerate() {
            put_u32(&mut out, to_u32(id.len(), "id length")?);
            out.extend_from_slice(id.as_bytes());
            match self.metric {
                Metric::L2 => {
                    for &v in &self.floats[i * self.width..(i + 1) * self.width] {
                        put_f32(&mut out, v);
                    }
                }
                Metric::Hamming => out.extend_from_slice(&self.codes[i * step..(i + 1) * step]),
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(MAGIC)?;
        r.version(VERSION)?;
        let at = r.pos();
        let metric = match r.u32("metric")? {
            0 => Metric::L2,
            1 => Metric::Hamming,
            t => return Err(Error::format(at, format!("unknown metric tag {t}"))),
        };
        let at = r.pos();
        let width = r.u32("width")? as usize;
        if width == 0 {
            return Err(Error::format(at, "width must be positive"));
        }
        let count = r.u32("count")? as usize;
        let mut index = RetrievalIndex::new(metric, width)?;
        let step = index.entry_bytes();
        for _ in 0..count {
            let len = r.u32("id length")? as usize;
            let at = r.pos();
            let id = std::str::from_utf8(r.take(len, "image id")?)
                .map_err(|_| Error::format(at, "image id is not valid UTF-8"))?
                .to_owned();
            let at = r.pos();
            let raw = r.take(step, "payload")?;
            let payload = match metric {
                Metric::L2 => Payload::Float(
                    raw.chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                        .collect(),
                ),
                Metric::Hamming => Payload::Binary(
                    BinaryCode::new(width, raw.to_vec())
                        .map_err(|e| Error::format(at, e.to_string()))?,
                ),
            };
            index
                .insert(id, payload)
                .map_err(|e| Error::format(at, e.to_string()))?;
        }
        r.finish()?;
        Ok(index)
    }
}

/// Text form of search results: a `# query <id>` line per query followed by
/// `rank image_id distance` lines, ranks starting at 1.
pub fn write_results(lists: &[RankedList]) -> String {
    let mut out = String::new();
    for list in lists {
        out.push_str(&format!("# query {}\n", list.query_id));
        for (rank, hit) in list.hits.iter().enumerate() {
            out.push_str(&format!("{} {} {}\n", rank + 1, hit.image_id, hit.distance));
        }
    }
    out
}

pub fn read_results(text: &str) -> Result<Vec<RankedList>> {
    let mut lists: Vec<RankedList> = Vec::new();
    let mut offset = 0usize;
    for line in text.lines() {
        let at = offset;
        offset += line.len() + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut parts = rest.split_whitespace();
            if parts.next() == Some("query") {
                let id = parts
                    .next()
                    .ok_or_else(|| Error::format(at, "query header without id"))?;
                lists.push(RankedList {
                    query_id: id.to_owned(),
                    hits: Vec::new(),
                });
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::format(
                at,
                format!("expected `rank image_id distance`, got {line:?}"),
            ));
        }
        let list = lists
            .last_mut()
            .ok_or_else(|| Error::format(at, "result line before any `# query` header"))?;
        let rank: usize = fields[0]
            .parse()
            .map_err(|_| Error::format(at, "invalid rank"))?;
        if rank != list.hits.len() + 1 {
            return Err(Error::format(at, format!("rank {rank} out of sequence")));
        }
        let distance: f64 = fields[2]
            .parse()
            .map_err(|_| Error::format(at, "invalid distance"))?;
        list.hits.push(Hit {
            image_id: fields[1].to_owned(),
            distance,
        });
    }
    Ok(lists)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn code8(v: u8) -> BinaryCode {
        BinaryCode::new(8, vec![v]).unwrap()
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(
            hamming_distance(&code8(0b1011_0010), &code8(0b1011_0010)).unwrap(),
            0
        );
        assert_eq!(
            hamming_distance(&code8(0b1011_0010), &code8(0b0100_1101)).unwrap(),
            8
        );
        let wide = BinaryCode::new(16, vec![0, 0]).unwrap();
        assert!(hamming_distance(&code8(0), &wide).is_err());
    }

    fn float_index() -> RetrievalIndex {
        let mut idx = RetrievalIndex::new(Metric::L2, 2).unwrap();
        idx.insert("a", Payload::Float(vec![0.0, 0.0])).unwrap();
        idx.insert("b", Payload::Float(vec![3.0, 4.0])).unwrap();
        idx.insert("c", Payload::Float(vec![1.0, 0.0])).unwrap();
        idx
    }

    #[test]
    fn search_basics() {
        let idx = float_index();
        let r = idx.search("q", &Payload::Float(vec![3.0, 4.0]), 1).unwrap();
        assert_eq!(
            r.hits,
            vec![Hit {
                image_id: "b".into(),
                distance: 0.0
            }]
        );
        let all = idx
            .search("q", &Payload::Float(vec![0.0, 0.0]), 10)
            .unwrap();
        assert_eq!(all.ids().collect::<Vec<_>>(), ["a", "c", "b"]);
        assert_eq!(all.hits[2].distance, 5.0);
    }

    #[test]
    fn ties_keep_insertion_order() {
        let mut idx = RetrievalIndex::new(Metric::L2, 1).unwrap();
        for (id, v) in [("x", 1.0), ("y", -1.0), ("z", 1.0)] {
            idx.insert(id, Payload::Float(vec![v])).unwrap();
        }
        let r = idx.search("q", &Payload::Float(vec![0.0]), 2).unwrap();
        assert_eq!(r.ids().collect::<Vec<_>>(), ["x", "y"]);
    }

    #[test]
    fn search_errors() {
        let idx = float_index();
        assert!(idx.search("q", &Payload::Float(vec![0.0]), 1).is_err());
        assert!(idx.search("q", &Payload::Binary(code8(1)), 1).is_err());
        assert!(idx.search("q", &Payload::Float(vec![0.0, 0.0]), 0).is_err());
        let empty = RetrievalIndex::new(Metric::Hamming, 8).unwrap();
        assert!(empty
            .search("q", &Payload::Binary(code8(1)), 3)
            .unwrap()
            .hits
            .is_empty());
        let mut idx = float_index();
        assert!(idx.insert("a", Payload::Float(vec![9.0, 9.0])).is_err());
    }

    #[test]
    fn index_bytes_roundtrip_and_truncation() {
        let mut idx = RetrievalIndex::new(Metric::Hamming, 12).unwrap();
        for (i, id) in ["a", "longer_id_01", "ü-utf8", ""].iter().enumerate() {
            let payload = vec![(i * 37) as u8, ((i * 11) as u8) & 0xF0];
            idx.insert(*id, Payload::Binary(BinaryCode::new(12, payload).unwrap()))
                .unwrap();
        }
        assert_eq!(idx.entry_bytes(), 2);
        let bytes = idx.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"OFPI");
        assert_eq!(RetrievalIndex::from_bytes(&bytes).unwrap(), idx);
        let err = RetrievalIndex::from_bytes(&bytes[..bytes.len() - 1])
            .unwrap_err()
            .to_string();
        assert!(err.contains("expected 2 bytes"), "{err}");

        let empty = RetrievalIndex::new(Metric::L2, 3).unwrap();
        assert_eq!(
            RetrievalIndex::from_bytes(&empty.to_bytes().unwrap()).unwrap(),
            empty
        );
        let f = float_index();
        assert_eq!(
            RetrievalIndex::from_bytes(&f.to_bytes().unwrap()).unwrap(),
            f
        );
    }

    #[test]
    fn results_text_roundtrip() {
        let idx = float_index();
        let lists = vec![
            idx.search("q1", &Payload::Float(vec![0.5, 0.5]), 3)
                .unwrap(),
            idx.search("q2", &Payload::Float(vec![3.0, 3.0]), 2)
                .unwrap(),
        ];
        let text = write_results(&lists);
        assert!(text.starts_with("# query q1\n1 a "));
        assert_eq!(read_results(&text).unwrap(), lists);
        assert!(read_results("1 a 0.5\n").is_err());
        assert!(read_results("# query q\n2 a 0.5\n").is_err());
    }

    proptest! {
        #[test]
        fn hamming_is_a_metric(a in prop::collection::vec(any::<u8>(), 5), b in prop::collection::vec(any::<u8>(), 5), c in prop::collection::vec(any::<u8>(), 5)) {
            let (a, b, c) = (BinaryCode::new(40, a).unwrap(), BinaryCode::new(40, b).unwrap(), BinaryCode::new(40, c).unwrap());
            let ab = hamming_distance(&a, &b).unwrap();
            prop_assert_eq!(ab, hamming_distance(&b, &a).unwrap());
            prop_assert_eq!(hamming_distance(&a, &a).unwrap(), 0);
            prop_assert!(ab <= hamming_distance(&a, &c).unwrap() + hamming_distance(&c, &b).unwrap());
        }
    }
}
