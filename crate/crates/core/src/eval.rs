//! Retrieval scoring: mean average precision and the 4×precision@4 score.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::index::RankedList;

/// Relevant image ids per query.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruth {
    relevant: BTreeMap<String, BTreeSet<String>>,
}

impl GroundTruth {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert<I, S>(&mut self, query_id: impl Into<String>, relevant: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let query_id = query_id.into();
        let set: BTreeSet<String> = relevant.into_iter().map(Into::into).collect();
        if set.is_empty() {
            return Err(Error::Protocol(format!(
                "query {query_id} has an empty relevant set"
            )));
        }
        self.relevant.entry(query_id).or_default().extend(set);
        Ok(())
    }

    pub fn relevant(&self, query_id: &str) -> Option<&BTreeSet<String>> {
        self.relevant.get(query_id)
    }

    pub fn len(&self) -> usize {
        self.relevant.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relevant.is_empty()
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.relevant.keys().map(String::as_str)
    }

    /// Parses `query_id<TAB>relevant_id[,relevant_id...]` lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut gt = GroundTruth::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (query, rest) = line.split_once('\t').ok_or_else(|| {
                Error::Protocol(format!(
                    "ground truth line {}: missing tab separator",
                    lineno + 1
                ))
            })?;
            let ids: Vec<&str> = rest
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .collect();
            gt.insert(query.trim(), ids)
                .map_err(|e| Error::Protocol(format!("ground truth line {}: {e}", lineno + 1)))?;
        }
        Ok(gt)
    }

    pub fn to_text(&self) -> String {
        self.relevant
            .iter()
            .map(|(q, rel)| {
                format!(
                    "{q}\t{}\n",
                    rel.iter().cloned().collect::<Vec<_>>().join(",")
                )
            })
            .collect()
    }
}

/// Non-interpolated average precision.
///
/// With `exclude_query`, the query's own id is dropped from both the ranking
/// and the relevant set. The normaliser counts relevant items present in the
/// ranking; relevant items missing from it contribute nothing.
pub fn average_precision(
    ranked: &RankedList,
    relevant: &BTreeSet<String>,
    exclude_query: bool,
) -> Result<f64> {
    let is_relevant = |id: &str| relevant.contains(id) && !(exclude_query && id == ranked.query_id);
    if !relevant.iter().any(|id| is_relevant(id)) {
        return Err(Error::Protocol(format!(
            "query {} has no relevant items after exclusion",
            ranked.query_id
        )));
    }
    let mut seen = BTreeSet::new();
    let mut rank = 0usize;
    let mut hits = 0usize;
    let mut sum = 0.0;
    for id in ranked.ids() {
        if exclude_query && id == ranked.query_id {
            continue;
        }
        if !seen.insert(id) {
            continue;
        }
        rank += 1;
        if is_relevant(id) {
            hits += 1;
            sum += hits as f64 / rank as f64;
        }
    }
    if hits == 0 {
        return Ok(0.0);
    }
    Ok(sum / hits as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryScore {
    pub query_id: String,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Protocol {
    MeanAveragePrecision,
    Ukb,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub protocol: Protocol,
    /// Per-query AP, or per-query hit count in the top 4 for UKB.
    pub per_query: Vec<QueryScore>,
    /// mAP in `[0, 1]` or UKB score in `[0, 4]`.
    pub score: f64,
}

impl EvalReport {
    pub fn query_count(&self) -> usize {
        self.per_query.len()
    }

    /// Human-readable table followed by the machine-readable summary line.
    pub fn render(&self) -> String {
        let (col, key) = match self.protocol {
            Protocol::MeanAveragePrecision => ("AP", "mAP"),
            Protocol::Ukb => ("hits@4", "ukb"),
        };
        let width = self
            .per_query
            .iter()
            .map(|q| q.query_id.len())
            .max()
            .unwrap_or(5)
            .max(5);
        let mut out = format!("{:<width$}  {col}\n", "query");
        for q in &self.per_query {
            out.push_str(&format!("{:<width$}  {:.6}\n", q.query_id, q.value));
        }
        out.push_str(&format!(
            "queries={}\n{key}={}\n",
            self.query_count(),
            self.score
        ));
        out
    }
}

fn lookup<'a>(gt: &'a GroundTruth, query_id: &str) -> Result<&'a BTreeSet<String>> {
    gt.relevant(query_id)
        .ok_or_else(|| Error::Protocol(format!("no ground truth for query {query_id}")))
}

pub fn mean_average_precision(
    lists: &[RankedList],
    gt: &GroundTruth,
    exclude_query: bool,
) -> Result<EvalReport> {
    if lists.is_empty() {
        return Err(Error::Protocol("no ranked lists to evaluate".into()));
    }
    let per_query = lists
        .iter()
        .map(|l| {
            Ok(QueryScore {
                query_id: l.query_id.clone(),
                value: average_precision(l, lookup(gt, &l.query_id)?, exclude_query)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let score = per_query.iter().map(|q| q.value).sum::<f64>() / per_query.len() as f64;
    Ok(EvalReport {
        protocol: Protocol::MeanAveragePrecision,
        per_query,
        score,
    })
}

/// Mean number of relevant ids among the top 4 (the query itself stays in the list).
pub fn ukb_score(lists: &[RankedList], gt: &GroundTruth) -> Result<EvalReport> {
    if lists.is_empty() {
        return Err(Error::Protocol("no ranked lists to evaluate".into()));
    }
    let per_query = lists
        .iter()
        .map(|l| {
            let relevant = lookup(gt, &l.query_id)?;
            if l.hits.len() < 4 {
                return Err(Error::Protocol(format!(
                    "query {} ranking has {} entries, UKB scoring needs at least 4",
                    l.query_id,
                    l.hits.len()
                )));
            }
            let hits = l.ids().take(4).filter(|id| relevant.contains(*id)).count();
            Ok(QueryScore {
                query_id: l.query_id.clone(),
                value: hits as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let score = per_query.iter().map(|q| q.value).sum::<f64>() / per_query.len() as f64;
    Ok(EvalReport {
        protocol: Protocol::Ukb,
        per_query,
        score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::Hit;

    fn ranked(query: &str, ids: &[&str]) -> RankedList {
        RankedList {
            query_id: query.into(),
            hits: ids
                .iter()
                .enumerate()
                .map(|(i, id)| Hit {
                    image_id: (*id).into(),
                    distance: i as f64,
                })
                .collect(),
        }
    }

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| (*s).to_owned()).collect()
    }

    #[test]
    fn ap_examples() {
        assert_eq!(
            average_precision(&ranked("q", &["a", "b", "x"]), &set(&["a", "b"]), false).unwrap(),
            1.0
        );
        let v =
            average_precision(&ranked("q", &["a", "x", "b"]), &set(&["a", "b"]), false).unwrap();
        assert!((v - 5.0 / 6.0).abs() < 1e-15);
        let v =
            average_precision(&ranked("q", &["x", "y", "z", "a"]), &set(&["a"]), false).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
    }

    #[test]
    fn query_exclusion() {
        // query first in its own list; removing it leaves [a, x, b]
        let l = ranked("q", &["q", "a", "x", "b"]);
        let v = average_precision(&l, &set(&["q", "a", "b"]), true).unwrap();
        assert!((v - 5.0 / 6.0).abs() < 1e-15);
        assert!(matches!(
            average_precision(&l, &set(&["q"]), true),
            Err(Error::Protocol(_))
        ));
        assert_eq!(average_precision(&l, &set(&["q"]), false).unwrap(), 1.0);
    }

    #[test]
    fn absent_relevant_items_do_not_count() {
        let v =
            average_precision(&ranked("q", &["x", "a"]), &set(&["a", "missing"]), false).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        assert_eq!(
            average_precision(&ranked("q", &["x"]), &set(&["missing"]), false).unwrap(),
            0.0
        );
    }

    #[test]
    fn map_aggregation_and_missing_truth() {
        let mut gt = GroundTruth::new();
        gt.insert("q1", ["a"]).unwrap();
        gt.insert("q2", ["b"]).unwrap();
        let lists = [ranked("q1", &["a", "b"]), ranked("q2", &["a", "b"])];
        let r = mean_average_precision(&lists, &gt, false).unwrap();
        assert!((r.score - 0.75).abs() < 1e-15);
        assert_eq!(r.query_count(), 2);
        assert!(r.render().ends_with("mAP=0.75\n"));
        let err = mean_average_precision(&[ranked("q3", &["a"])], &gt, false).unwrap_err();
        assert!(err.to_string().contains("q3"));
    }

    #[test]
    fn ukb_examples() {
        let mut gt = GroundTruth::new();
        for g in 0..3 {
            let members: Vec<String> = (0..4).map(|i| format!("g{g}_{i}")).collect();
            for m in &members {
                gt.insert(m.clone(), members.clone()).unwrap();
            }
        }
        let lists = [
            ranked("g0_0", &["g0_0", "g0_1", "g0_2", "g0_3", "g1_0"]),
            ranked("g1_0", &["g1_0", "g0_0", "g1_1", "g2_0"]),
            ranked("g2_0", &["g2_0", "g2_1", "g0_0", "g2_2"]),
        ];
        let r = ukb_score(&lists, &gt).unwrap();
        assert_eq!(
            r.per_query.iter().map(|q| q.value).collect::<Vec<_>>(),
            vec![4.0, 2.0, 3.0]
        );
        assert_eq!(r.score, 3.0);
        assert!(r.render().ends_with("ukb=3\n"));
        assert!(ukb_score(&[ranked("g0_0", &["g0_0", "g0_1"])], &gt).is_err());
    }

    #[test]
    fn ground_truth_text() {
        let gt = GroundTruth::parse("q1\ta,b\nq2\tc\n\n").unwrap();
        assert_eq!(gt.len(), 2);
        assert_eq!(gt.relevant("q1").unwrap(), &set(&["a", "b"]));
        assert_eq!(GroundTruth::parse(&gt.to_text()).unwrap(), gt);
        assert!(GroundTruth::parse("q1 a,b\n").is_err());
        assert!(GroundTruth::parse("q1\t\n").is_err());
    }
}
