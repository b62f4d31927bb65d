use std::collections::{BTreeSet, HashMap};

use asag_core::corpus::{AnswerPair, Corpus, CorpusSource};
use asag_core::splitter::{apportion, split_indices, stratified_split, SplitError, SplitSpec};
use proptest::prelude::*;

fn corpus(sizes: &[usize]) -> Corpus {
    let pairs = sizes
        .iter()
        .enumerate()
        .flat_map(|(q, &n)| {
            (0..n).map(move |k| {
                AnswerPair::new(
                    format!("{q}-{k}"),
                    format!("q{q}"),
                    "reference",
                    format!("answer {k}"),
                )
                .with_score(1.0)
            })
        })
        .collect();
    Corpus::new(pairs, 5.0, CorpusSource::UserCsv).unwrap()
}

fn fractions() -> impl Strategy<Value = Vec<f64>> {
    prop_oneof![
        Just(vec![0.8, 0.1, 0.1]),
        Just(vec![0.9, 0.1]),
        Just(vec![0.5, 0.5]),
        Just(vec![0.6, 0.2, 0.2]),
        Just(vec![1.0]),
    ]
}

proptest! {
    #[test]
    fn partition_covers_and_stratifies(
        sizes in prop::collection::vec(3usize..30, 1..12),
        fr in fractions(),
        seed in any::<u64>(),
    ) {
        let c = corpus(&sizes);
        let spec = SplitSpec::new(fr.clone(), seed).unwrap();
        let parts = stratified_split(&c, &spec).unwrap();
        prop_assert_eq!(parts.len(), fr.len());
        let mut all: Vec<String> = parts.iter().flat_map(|p| p.pairs().iter().map(|a| a.id.clone())).collect();
        prop_assert_eq!(all.len(), c.len());
        all.sort();
        all.dedup();
        prop_assert_eq!(all.len(), c.len());
        for part in &parts {
            let qs: BTreeSet<&str> = part.pairs().iter().map(|p| p.question_id.as_str()).collect();
            prop_assert_eq!(qs.len(), sizes.len());
        }
        // per-question part sizes follow the apportionment
        for (q, &n) in sizes.iter().enumerate() {
            let want = apportion(n, &fr);
            let got: Vec<usize> = parts
                .iter()
                .map(|p| p.pairs().iter().filter(|a| a.question_id == format!("q{q}")).count())
                .collect();
            prop_assert_eq!(got, want);
        }
        prop_assert_eq!(stratified_split(&c, &spec).unwrap(), parts);
    }

    #[test]
    fn apportion_sums_and_floors(n in 0usize..500, fr in fractions()) {
        let sizes = apportion(n, &fr);
        prop_assert_eq!(sizes.iter().sum::<usize>(), n);
        if n >= fr.len() {
            prop_assert!(sizes.iter().all(|&s| s >= 1));
        }
        for (s, f) in sizes.iter().zip(&fr) {
            prop_assert!((*s as f64 - f * n as f64).abs() <= fr.len() as f64);
        }
    }

    #[test]
    fn parts_keep_input_order(sizes in prop::collection::vec(3usize..15, 1..6), seed in any::<u64>()) {
        let c = corpus(&sizes);
        let qids: Vec<&str> = c.pairs().iter().map(|p| p.question_id.as_str()).collect();
        for part in split_indices(&qids, &SplitSpec::train_val_test(seed)).unwrap() {
            prop_assert!(part.windows(2).all(|w| w[0] < w[1]));
        }
    }
}

#[test]
fn small_question_is_named() {
    let c = corpus(&[10, 2, 10]);
    let err = stratified_split(&c, &SplitSpec::train_val_test(40)).unwrap_err();
    assert_eq!(
        err,
        SplitError::TooFewPairs {
            question_id: "q1".into(),
            pairs: 2,
            parts: 3
        }
    );
    assert!(stratified_split(&c, &SplitSpec::train_val_test(40).unstratified()).is_ok());
}

#[test]
fn seeds_change_membership_not_sizes() {
    let c = corpus(&[20; 5]);
    let a = stratified_split(&c, &SplitSpec::train_val(40)).unwrap();
    let b = stratified_split(&c, &SplitSpec::train_val(43)).unwrap();
    assert_eq!(a[1].len(), b[1].len());
    assert_ne!(a[1], b[1]);
    let count = |p: &Corpus| {
        let mut m: HashMap<String, usize> = HashMap::new();
        for x in p.pairs() {
            *m.entry(x.question_id.clone()).or_default() += 1;
        }
        m
    };
    assert_eq!(count(&a[1]), count(&b[1]));
}
