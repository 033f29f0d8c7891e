use std::collections::BTreeSet;

use objpool::compression::BinaryCode;
use objpool::descriptors::FeatureMatrix;
use objpool::eval::average_precision;
use objpool::index::{Hit, Metric, Payload, RankedList, RetrievalIndex};
use objpool::pooling::max_pool;
use proptest::prelude::*;

fn ranking(index: &RetrievalIndex, query: Payload) -> Vec<String> {
    index
        .search("q", &query, index.len())
        .unwrap()
        .ids()
        .map(str::to_owned)
        .collect()
}

fn float_index(vectors: &[Vec<f32>]) -> RetrievalIndex {
    let mut index = RetrievalIndex::new(Metric::L2, vectors[0].len()).unwrap();
    for (i, v) in vectors.iter().enumerate() {
        index
            .insert(format!("v{i}"), Payload::Float(v.clone()))
            .unwrap();
    }
    index
}

fn small_int_vectors(dim: usize) -> impl Strategy<Value = Vec<Vec<f32>>> {
    prop::collection::vec(
        prop::collection::vec((-8i8..=8).prop_map(f32::from), dim),
        2..40,
    )
}

proptest! {
    #[test]
    fn l2_ranking_survives_shift_and_scale(
        vectors in small_int_vectors(5),
        query in prop::collection::vec((-8i8..=8).prop_map(f32::from), 5),
        shift in prop::collection::vec((-4i8..=4).prop_map(f32::from), 5),
    ) {
        let base = ranking(&float_index(&vectors), Payload::Float(query.clone()));
        let moved: Vec<Vec<f32>> = vectors
            .iter()
            .map(|v| v.iter().zip(&shift).map(|(a, s)| 4.0 * (a + s)).collect())
            .collect();
        let q: Vec<f32> = query.iter().zip(&shift).map(|(a, s)| 4.0 * (a + s)).collect();
        prop_assert_eq!(base, ranking(&float_index(&moved), Payload::Float(q)));
    }

    #[test]
    fn hamming_ranking_survives_shared_bit_flips(
        codes in prop::collection::vec(prop::collection::vec(any::<bool>(), 37), 2..40),
        query in prop::collection::vec(any::<bool>(), 37),
        mask in prop::collection::vec(any::<bool>(), 37),
    ) {
        let build = |flip: bool| {
            let mut index = RetrievalIndex::new(Metric::Hamming, 37).unwrap();
            for (i, c) in codes.iter().enumerate() {
                let bits: Vec<bool> = c.iter().zip(&mask).map(|(b, m)| b ^ (flip && *m)).collect();
                index.insert(format!("c{i}"), Payload::Binary(BinaryCode::from_bits(&bits).unwrap())).unwrap();
            }
            let q: Vec<bool> = query.iter().zip(&mask).map(|(b, m)| b ^ (flip && *m)).collect();
            (index, Payload::Binary(BinaryCode::from_bits(&q).unwrap()))
        };
        let (plain, q) = build(false);
        let (flipped, fq) = build(true);
        prop_assert_eq!(ranking(&plain, q), ranking(&flipped, fq));
    }

    #[test]
    fn index_bytes_round_trip(vectors in small_int_vectors(3)) {
        let index = float_index(&vectors);
        let back = RetrievalIndex::from_bytes(&index.to_bytes().unwrap()).unwrap();
        prop_assert_eq!(back, index);
    }

    #[test]
    fn max_pool_commutes_with_monotone_maps(
        rows in prop::collection::vec(prop::collection::vec(-50f32..50.0, 4), 1..30),
    ) {
        let flat: Vec<f32> = rows.concat();
        let pooled = max_pool(&FeatureMatrix::new("m", 4, flat.clone()).unwrap()).unwrap().vector;
        let f = |x: f32| x.atan() * 3.0;
        let mapped = max_pool(&FeatureMatrix::new("m", 4, flat.iter().map(|&x| f(x)).collect()).unwrap())
            .unwrap()
            .vector;
        prop_assert_eq!(mapped, pooled.iter().map(|&x| f(x)).collect::<Vec<_>>());
    }

    #[test]
    fn average_precision_bounds(
        relevant_flags in prop::collection::vec(any::<bool>(), 1..40),
    ) {
        prop_assume!(relevant_flags.iter().any(|&r| r));
        let ids: Vec<String> = (0..relevant_flags.len()).map(|i| format!("d{i}")).collect();
        let relevant: BTreeSet<String> = ids
            .iter()
            .zip(&relevant_flags)
            .filter(|(_, &r)| r)
            .map(|(id, _)| id.clone())
            .collect();
        let list = |order: Vec<String>| RankedList {
            query_id: "q".into(),
            hits: order
                .into_iter()
                .enumerate()
                .map(|(i, image_id)| Hit { image_id, distance: i as f64 })
                .collect(),
        };
        let ap = average_precision(&list(ids.clone()), &relevant, false).unwrap();
        prop_assert!((0.0..=1.0).contains(&ap));

        let mut best = ids.clone();
        best.sort_by_key(|id| !relevant.contains(id));
        prop_assert_eq!(average_precision(&list(best.clone()), &relevant, false).unwrap(), 1.0);
        best.reverse();
        let worst = average_precision(&list(best), &relevant, false).unwrap();
        prop_assert!(worst <= ap + 1e-12);
    }
}
