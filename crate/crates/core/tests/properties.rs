mod common;

use std::collections::BTreeSet;
use std::path::Path;

use common::*;
use microact_core::changepoint::{brute_force_segment, pelt, CostFunction};
use microact_core::dimreduce::{fit, ReducerSpec};
use microact_core::embedding::{
    nearest_verbs, parse_attribute_string, render_query, Distance, PhraseMap, VerbCorpus, VerbEntry,
};
use microact_core::ingest::{magnitude, resample_sync, RawSample, RawSensorStream, SyncedStream};
use microact_core::pipeline::{
    model_from_bytes, model_to_bytes, synth_generate, train_pipeline, PipelineConfig, SynthSpec,
};
use microact_core::zeroshot::{
    confusion, micro_f1, train_zeroshot, AttributeSchema, AttributeVector, ClassifierSpec,
    ForestParams, RandomForest,
};
use microact_core::Matrix;
use proptest::prelude::*;
use rand::Rng;

fn vector_strategy(schema: AttributeSchema) -> impl Strategy<Value = AttributeVector> {
    let ranges: Vec<_> = schema
        .attributes()
        .iter()
        .map(|a| 0..a.kind.arity())
        .collect();
    ranges.prop_map(move |v| AttributeVector::new(&schema, v).unwrap())
}

fn schema_strategy() -> impl Strategy<Value = AttributeSchema> {
    prop_oneof![Just(AttributeSchema::verb()), Just(AttributeSchema::lara())]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn attribute_string_round_trips(v in vector_strategy(AttributeSchema::verb())) {
        let s = AttributeSchema::verb();
        prop_assert_eq!(parse_attribute_string(&s, &v.to_csv()).unwrap(), v);
    }

    #[test]
    fn out_of_range_values_are_rejected(j in 0usize..30, extra in 0u8..4) {
        let s = AttributeSchema::verb();
        let mut values = vec![0u8; s.len()];
        values[j] = s.attributes()[j].kind.arity() + extra;
        prop_assert!(AttributeVector::new(&s, values).is_err());
    }

    #[test]
    fn distances_are_symmetric_and_zero_on_self(
        a in vector_strategy(AttributeSchema::verb()),
        b in vector_strategy(AttributeSchema::verb()),
    ) {
        for d in [Distance::Euclidean, Distance::Cosine] {
            prop_assert_eq!(d.between(&a, &b), d.between(&b, &a));
            prop_assert!(d.between(&a, &b) >= 0.0);
            prop_assert!(d.between(&a, &a).abs() < 1e-12);
        }
    }

    #[test]
    fn nearest_verbs_ignore_corpus_order(
        q in vector_strategy(AttributeSchema::verb()),
        k in 1usize..8,
        seed in any::<u64>(),
    ) {
        let corpus = VerbCorpus::demo_kitchen();
        let mut entries: Vec<VerbEntry> = corpus.entries().to_vec();
        let mut r = rng(seed);
        for i in (1..entries.len()).rev() {
            entries.swap(i, r.random_range(0..=i));
        }
        let shuffled = VerbCorpus::new(corpus.schema().clone(), entries).unwrap();
        for d in [Distance::Euclidean, Distance::Cosine] {
            prop_assert_eq!(
                nearest_verbs(&corpus, &q, k, d).unwrap(),
                nearest_verbs(&shuffled, &q, k, d).unwrap()
            );
        }
    }

    #[test]
    fn nearest_distances_are_sorted(q in vector_strategy(AttributeSchema::lara())) {
        let corpus = VerbCorpus::demo_lara();
        let m = nearest_verbs(&corpus, &q, corpus.len(), Distance::Euclidean).unwrap();
        prop_assert_eq!(m.len(), corpus.len());
        prop_assert!(m.windows(2).all(|w| w[0].distance <= w[1].distance));
    }

    #[test]
    fn rendering_is_injective(
        schema in schema_strategy(),
        seed in any::<u64>(),
    ) {
        let mut r = rng(seed);
        let a = random_vector(&mut r, &schema);
        let b = random_vector(&mut r, &schema);
        let p = PhraseMap::default_for(&schema);
        let (qa, qb) = (render_query(&a, "", &p).unwrap(), render_query(&b, "", &p).unwrap());
        prop_assert_eq!(a == b, qa == qb);
    }

    #[test]
    fn changing_one_attribute_changes_one_fragment(
        schema in schema_strategy(),
        seed in any::<u64>(),
        pick in any::<prop::sample::Index>(),
    ) {
        let mut r = rng(seed);
        let a = random_vector(&mut r, &schema);
        let j = pick.index(schema.len());
        let arity = schema.attributes()[j].kind.arity();
        let mut values = a.values().to_vec();
        values[j] = (values[j] + 1) % arity;
        let b = AttributeVector::new(&schema, values).unwrap();
        let p = PhraseMap::default_for(&schema);
        let fragments = |v: &AttributeVector| {
            let q = render_query(v, "", &p).unwrap();
            let body = q.split_once(" that ").unwrap().1.trim_end_matches('.').to_string();
            body.split(", ").map(str::to_string).collect::<Vec<_>>()
        };
        let (fa, fb) = (fragments(&a), fragments(&b));
        prop_assert_eq!(fa.len(), schema.len());
        let differing = fa.iter().zip(&fb).filter(|(x, y)| x != y).count();
        prop_assert_eq!(differing, 1);
    }

    #[test]
    fn micro_f1_matches_enumeration(schema in schema_strategy(), seed in any::<u64>(), rows in 1usize..6) {
        let mut r = rng(seed);
        let p: Vec<_> = (0..rows).map(|_| random_vector(&mut r, &schema)).collect();
        let t: Vec<_> = (0..rows).map(|_| random_vector(&mut r, &schema)).collect();
        let (tp, fp, fn_) = brute_force_counts(&schema, &p, &t);
        let c = confusion(&schema, &p, &t).unwrap();
        prop_assert_eq!((c.tp, c.fp, c.fn_), (tp, fp, fn_));
        prop_assert_eq!(micro_f1(&schema, &p, &t).unwrap(), f1_from_counts(tp, fp, fn_));
        prop_assert_eq!(micro_f1(&schema, &t, &t).unwrap(), 1.0);
    }

    #[test]
    fn pelt_equals_brute_force(seed in any::<u64>(), n in 20usize..300, changes in 0usize..4, penalty in 1.0f64..50.0, min_len in 1usize..8) {
        let (sig, _) = piecewise_signal(seed, n, changes, 3.0);
        let a = pelt(&sig, penalty, CostFunction::L2, min_len).unwrap();
        let b = brute_force_segment(&sig, penalty, CostFunction::L2, min_len).unwrap();
        prop_assert_eq!(&a, &b);
        let spans = a.segments();
        prop_assert_eq!(spans.first().unwrap().0, 0);
        prop_assert_eq!(spans.last().unwrap().1, n);
        prop_assert!(spans.iter().all(|(s, e)| e - s >= min_len));
        prop_assert!(spans.windows(2).all(|w| w[0].1 == w[1].0));
    }

    #[test]
    fn deeper_trees_fit_their_bootstrap_no_worse(seed in any::<u64>(), m in 10usize..60, depth in 1usize..8) {
        let mut r = rng(seed);
        let x = random_matrix(&mut r, m, 3);
        let y: Vec<u8> = (0..m).map(|_| r.random_range(0..3)).collect();
        let params = |max_depth| ForestParams { n_trees: 5, max_depth, seed };
        let shallow = RandomForest::train(&params(depth), &x, &y, 3);
        let deep = RandomForest::train(&params(depth + 1), &x, &y, 3);
        for t in 0..5 {
            let idx = RandomForest::bootstrap_sample(seed, t, m);
            let acc = |f: &RandomForest| idx.iter().filter(|&&i| f.trees()[t].predict(x.row(i)) == y[i]).count();
            prop_assert!(acc(&deep) >= acc(&shallow));
            prop_assert!(deep.trees()[t].depth() <= depth + 1);
        }
    }

    #[test]
    fn unbounded_trees_fit_their_bootstrap_exactly(seed in any::<u64>(), m in 5usize..60, classes in 2u8..4) {
        let mut r = rng(seed);
        let x = random_matrix(&mut r, m, 3);
        let y: Vec<u8> = (0..m).map(|_| r.random_range(0..classes)).collect();
        let f = RandomForest::train(&ForestParams { n_trees: 4, max_depth: m, seed }, &x, &y, classes as usize);
        for t in 0..4 {
            for i in RandomForest::bootstrap_sample(seed, t, m) {
                prop_assert_eq!(f.trees()[t].predict(x.row(i)), y[i]);
            }
        }
    }

    #[test]
    fn magnitude_ignores_unit_rotation(seed in any::<u64>(), angle in 0.0f64..std::f64::consts::TAU) {
        let mut r = rng(seed);
        let n = 50;
        let data: Vec<f64> = (0..n * 3).map(|_| r.random_range(-5.0..5.0)).collect();
        let (c, s) = (angle.cos(), angle.sin());
        let rotated: Vec<f64> = data
            .chunks(3)
            .flat_map(|v| [c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]])
            .collect();
        let mk = |d: Vec<f64>| SyncedStream::new(100.0, vec!["u".into()], Matrix::from_vec(n, 3, d).unwrap(), 0).unwrap();
        let (a, b) = (magnitude(&mk(data)), magnitude(&mk(rotated)));
        for (x, y) in a.data.as_slice().iter().zip(b.data.as_slice()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_streams_resample_to_constants(v in -20.0f64..20.0, period_us in 1000i64..20000, count in 2usize..300) {
        let samples = (0..count as i64)
            .map(|k| RawSample { timestamp_us: k * period_us, ax: v, ay: -v, az: 2.0 * v })
            .collect();
        let s = resample_sync(&[RawSensorStream::new("u", samples).unwrap()], std::time::Duration::from_millis(10)).unwrap();
        let expected_rows = ((count as i64 - 1) * period_us / 10_000 + 1) as usize;
        prop_assert_eq!(s.n_samples(), expected_rows);
        for row in s.data.iter_rows() {
            prop_assert!((row[0] - v).abs() < 1e-12 && (row[1] + v).abs() < 1e-12 && (row[2] - 2.0 * v).abs() < 1e-12);
        }
    }
}

#[test]
fn attributes_train_independently() {
    let schema = AttributeSchema::lara();
    let mut r = rng(4);
    let x = random_matrix(&mut r, 40, 2);
    let attrs: Vec<AttributeVector> = (0..40).map(|_| random_vector(&mut r, &schema)).collect();
    let reducer = fit(&ReducerSpec::default(), &x).unwrap();
    let spec = ClassifierSpec::RandomForest(ForestParams {
        n_trees: 10,
        max_depth: 6,
        seed: 3,
    });
    let a = train_zeroshot(&schema, &x, &attrs, &spec, reducer.clone()).unwrap();
    let altered: Vec<AttributeVector> = attrs
        .iter()
        .map(|v| {
            let mut values = v.values().to_vec();
            values[5] = 1 - values[5];
            AttributeVector::new(&schema, values).unwrap()
        })
        .collect();
    let b = train_zeroshot(&schema, &x, &altered, &spec, reducer).unwrap();
    for j in 0..schema.len() {
        assert_eq!(
            a.classifiers[j] == b.classifiers[j],
            j != 5,
            "attribute {j}"
        );
    }
}

fn small_model() -> microact_core::zeroshot::ZeroShotModel {
    let spec = SynthSpec::demo(5);
    let (rec, _) = synth_generate(&spec).unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.set("rf_trees", "8").unwrap();
    train_pipeline(&[rec], &cfg, &spec.label_attributes())
        .unwrap()
        .0
}

#[test]
fn any_corrupted_model_byte_is_detected() {
    let bytes = model_to_bytes(&small_model()).unwrap();
    assert!(model_from_bytes(&bytes).is_ok());
    let mut r = rng(8);
    let mut positions: BTreeSet<usize> = (0..40).collect();
    positions.extend((0..200).map(|_| r.random_range(0..bytes.len())));
    positions.extend(bytes.len() - 40..bytes.len());
    for i in positions {
        let mut b = bytes.clone();
        b[i] ^= 0x10;
        assert!(model_from_bytes(&b).is_err(), "flip at {i} accepted");
    }
    for cut in [0, 3, 10, bytes.len() / 2, bytes.len() - 1] {
        assert!(
            model_from_bytes(&bytes[..cut]).is_err(),
            "truncation at {cut} accepted"
        );
    }
}

#[test]
fn schema_files_round_trip() {
    for s in [AttributeSchema::verb(), AttributeSchema::lara()] {
        let back = AttributeSchema::parse_csv(&s.to_csv_string(), Path::new("s")).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.hash(), s.hash());
    }
    assert_ne!(
        AttributeSchema::verb().hash(),
        AttributeSchema::lara().hash()
    );
}
