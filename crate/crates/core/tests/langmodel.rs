use std::collections::{BTreeMap, BTreeSet, HashMap};

use bci_core::langmodel::{
    normalize_text, sentences, tokenize, train_ngram, CharModel, LanguageStore, LmError, NgramModel, Smoothing,
    BUNDLED, UNDETERMINED, UNK,
};
use proptest::prelude::*;

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

fn corpus_of(lang: &str) -> &'static str {
    BUNDLED.iter().find(|b| b.code == lang).unwrap().corpus
}

/// N1 and N read straight off a bigram count table built here.
fn count_table_oracle(corpus: &[Vec<String>]) -> (u64, u64) {
    let mut table: HashMap<(String, String), u64> = HashMap::new();
    for s in corpus {
        let mut prev = "<s>".to_string();
        for t in s {
            *table.entry((prev.clone(), t.clone())).or_default() += 1;
            prev = t.clone();
        }
    }
    let n1 = table.values().filter(|c| **c == 1).count() as u64;
    (n1, table.values().sum())
}

fn all_contexts_normalized(m: &NgramModel) {
    let mut contexts: Vec<Vec<String>> = m.contexts().cloned().collect();
    contexts.push(vec!["never-seen".into(); m.order() - 1]);
    for c in contexts {
        let mass = m.mass(&c);
        assert!(
            (mass - 1.0).abs() < 1e-9,
            "{:?} context {c:?} sums to {mass}",
            m.smoothing()
        );
    }
}

#[test]
fn normalization_examples() {
    assert_eq!(normalize_text("Hello, World!", "en"), ["hello", "world"]);
    assert!(normalize_text("", "en").is_empty());
    assert_eq!(normalize_text("Turn on the light", "en"), ["turn", "on", "light"]);
    // Reference segmentation: words split at spaces and hyphens, each ideograph on its own.
    assert_eq!(
        tokenize("I love 北京 and café-au-lait!"),
        ["i", "love", "北", "京", "and", "café", "au", "lait"]
    );
    assert_eq!(
        normalize_text("I love 北京 and café-au-lait!", "en"),
        ["i", "love", "北", "京", "café", "au", "lait"]
    );
    assert_eq!(normalize_text("Привет, МИР", "ru"), ["привет", "мир"]);
}

#[test]
fn mle_bigrams() {
    let m = train_ngram(&[toks("a b a b")], 2, Smoothing::Mle, "x").unwrap();
    assert_eq!(m.probability(&toks("a"), "b"), 1.0);
    assert_eq!(m.probability(&toks("b"), "a"), 1.0);
    assert_eq!(m.probability(&toks("a"), "a"), 0.0);
    assert_eq!(m.suggest(&toks("a"), 1), ["b"]);
}

#[test]
fn laplace_one_sixth() {
    let vocab: BTreeSet<String> = ["a", "b", "c"].map(String::from).into();
    let mut counts = BTreeMap::new();
    counts.insert(
        toks("ctx"),
        BTreeMap::from([("a".to_string(), 2), ("b".to_string(), 1)]),
    );
    let m = NgramModel::from_counts("x", 2, Smoothing::Laplace, vocab, counts).unwrap();
    assert_eq!(m.probability(&toks("ctx"), "c"), 1.0 / 6.0);
    assert_eq!(m.probability(&toks("ctx"), "a"), 3.0 / 6.0);
    assert_eq!(m.probability(&toks("ctx"), "b"), 2.0 / 6.0);
}

#[test]
fn laplace_floor_and_unseen_context_suggestions() {
    let corpus: Vec<Vec<String>> = sentences(corpus_of("en")).map(|l| normalize_text(l, "en")).collect();
    let m = train_ngram(&corpus, 2, Smoothing::Laplace, "en").unwrap();
    all_contexts_normalized(&m);
    let v = m.vocab().len() as f64;
    for ctx in m.contexts() {
        let n: u64 = m.vocab().iter().map(|t| m.count(ctx, t)).sum();
        let floor = 1.0 / (n as f64 + v);
        assert!(m.vocab().iter().all(|t| m.probability(ctx, t) >= floor));
    }
    let unseen = toks("zzzz");
    let expected: Vec<String> = m.vocab().iter().filter(|t| *t != UNK).take(5).cloned().collect();
    assert_eq!(m.suggest(&unseen, 5), expected);
    let everything = m.suggest(&unseen, 100_000);
    assert_eq!(everything.len(), m.vocab().len() - 1);
}

#[test]
fn good_turing_unseen_mass_matches_count_table() {
    for lang in ["en", "de", "zh"] {
        let corpus: Vec<Vec<String>> = sentences(corpus_of(lang)).map(|l| normalize_text(l, lang)).collect();
        let m = train_ngram(&corpus, 2, Smoothing::GoodTuring, lang).unwrap();
        let (n1, n) = count_table_oracle(&corpus);
        assert_eq!(m.total_tokens(), n);
        let mass = m.unseen_event_mass();
        assert!((mass - n1 as f64 / n as f64).abs() < 1e-9, "{lang}: {mass} vs {n1}/{n}");
        all_contexts_normalized(&m);
    }
}

#[test]
fn good_turing_katz_regime() {
    // Frequency-of-frequencies rich enough for adjusted counts up to the cutoff.
    let mut corpus = Vec::new();
    let mut k = 0;
    for (count, types) in [(1, 40), (2, 18), (3, 10), (4, 6), (5, 4), (6, 2), (9, 1)] {
        for _ in 0..types {
            for _ in 0..count {
                corpus.push(vec![format!("w{k}")]);
            }
            k += 1;
        }
    }
    let m = train_ngram(&corpus, 2, Smoothing::GoodTuring, "x").unwrap();
    let fof = m.frequency_of_frequencies();
    assert_eq!(fof[&1], 40);
    let (n1, n) = count_table_oracle(&corpus);
    assert!((m.unseen_event_mass() - n1 as f64 / n as f64).abs() < 1e-9);
    // c* = (c+1) N_{c+1} / N_c below the cutoff, raw counts above.
    assert!(m.adjusted_count(1) < 1.0 && m.adjusted_count(1) > 0.0);
    assert_eq!(m.adjusted_count(9), 9.0);
    let r = 6.0 * 2.0 / 40.0;
    let c_star_1 = 2.0 * 18.0 / 40.0;
    assert!((m.adjusted_count(1) - (c_star_1 - r) / (1.0 - r)).abs() < 1e-12);
    all_contexts_normalized(&m);
}

#[test]
fn rejects_empty_corpus() {
    assert_eq!(
        train_ngram(&[], 2, Smoothing::Laplace, "en").unwrap_err(),
        LmError::EmptyCorpus
    );
}

#[test]
fn model_json_round_trip() {
    let store = LanguageStore::bundled(3, Smoothing::GoodTuring).unwrap();
    let m = store.words("es").unwrap();
    assert_eq!(m.order(), 3);
    let back = NgramModel::from_json(&m.to_json()).unwrap();
    assert_eq!(&back, m);
    assert!(NgramModel::from_json("{}").is_err());
}

#[test]
fn store_suggestions() {
    let store = LanguageStore::bundled(2, Smoothing::Laplace).unwrap();
    assert!(store.languages().count() >= 10);
    let after_turn = store.suggest("turn ", "en", 3).unwrap();
    assert!(
        after_turn.contains(&"off".to_string()) || after_turn.contains(&"on".to_string()),
        "{after_turn:?}"
    );
    let completions = store.suggest("please turn of", "en", 5).unwrap();
    assert_eq!(completions.first().map(String::as_str), Some("off"));
    assert!(completions.iter().all(|t| t.starts_with("of")));
    assert!(store.suggest("hola", "xx", 3).is_err());
    assert_eq!(store.suggest("", "en-US", 2).unwrap().len(), 2);
}

// Perplexity computed from raw count maps, independent of CharModel.
fn oracle_perplexity(train: &str, text: &str) -> f64 {
    let runs = |s: &str| -> Vec<Vec<char>> {
        s.to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|r| !r.is_empty())
            .map(|r| {
                let mut v = vec![' ', ' '];
                v.extend(r.chars());
                v.push(' ');
                v
            })
            .collect()
    };
    let mut c1: HashMap<char, f64> = HashMap::new();
    let mut c2: HashMap<(char, char), f64> = HashMap::new();
    let mut c3: HashMap<(char, char, char), f64> = HashMap::new();
    let mut h1: HashMap<char, f64> = HashMap::new();
    let mut h2: HashMap<(char, char), f64> = HashMap::new();
    let mut total = 0.0;
    for line in train.lines().filter(|l| !l.trim().is_empty()) {
        for r in runs(line) {
            for w in r.windows(3) {
                *c1.entry(w[2]).or_default() += 1.0;
                *c2.entry((w[1], w[2])).or_default() += 1.0;
                *c3.entry((w[0], w[1], w[2])).or_default() += 1.0;
                *h1.entry(w[1]).or_default() += 1.0;
                *h2.entry((w[0], w[1])).or_default() += 1.0;
                total += 1.0;
            }
        }
    }
    let (mut ll, mut n) = (0.0, 0.0);
    for r in runs(text) {
        for w in r.windows(3) {
            let p1 = 0.99 * c1.get(&w[2]).unwrap_or(&0.0) / total + 0.01 / 65536.0;
            let p2 = match h1.get(&w[1]) {
                Some(d) => 0.7 * c2.get(&(w[1], w[2])).unwrap_or(&0.0) / d + 0.3 * p1,
                None => p1,
            };
            let p3 = match h2.get(&(w[0], w[1])) {
                Some(d) => 0.7 * c3.get(&(w[0], w[1], w[2])).unwrap_or(&0.0) / d + 0.3 * p2,
                None => p2,
            };
            ll += p3.ln();
            n += 1.0;
        }
    }
    (-ll / n).exp()
}

#[test]
fn detection_matches_perplexity_oracle() {
    let text = "the quick brown fox";
    let models: Vec<CharModel> = ["en", "es", "zh"]
        .iter()
        .map(|l| CharModel::train(l, sentences(corpus_of(l))).unwrap())
        .collect();
    let d = bci_core::langmodel::detect_language(text, &models);
    for lang in ["en", "es", "zh"] {
        let oracle = oracle_perplexity(corpus_of(lang), text);
        assert!((d.perplexities[lang] - oracle).abs() <= 1e-9 * oracle, "{lang}");
    }
    let oracle_best = ["en", "es", "zh"]
        .into_iter()
        .min_by(|a, b| oracle_perplexity(corpus_of(a), text).total_cmp(&oracle_perplexity(corpus_of(b), text)))
        .unwrap();
    assert_eq!(oracle_best, "en");
    assert_eq!(d.language, "en");
    assert!(!d.low_confidence);
}

#[test]
fn heldout_detection_accuracy() {
    let store = LanguageStore::bundled(2, Smoothing::Laplace).unwrap();
    let (mut right, mut total) = (0, 0);
    let mut misses = Vec::new();
    for b in BUNDLED {
        for s in sentences(b.heldout) {
            assert!(s.chars().count() >= 20, "{s}");
            let d = store.detect(s);
            total += 1;
            if d.language == b.code {
                right += 1;
            } else {
                misses.push(format!("{} -> {}: {s}", b.code, d.language));
            }
        }
    }
    let acc = right as f64 / total as f64;
    assert!(acc >= 0.95, "accuracy {acc:.3}; misses {misses:#?}");
}

#[test]
fn detection_edge_cases() {
    let store = LanguageStore::bundled(2, Smoothing::Laplace).unwrap();
    let d = store.detect("");
    assert_eq!(d.language, UNDETERMINED);
    assert_eq!(store.detect("?! ...").language, UNDETERMINED);
    // Hebrew is not bundled.
    let d = store.detect("שלום עולם מה שלומך היום");
    assert_ne!(d.language, UNDETERMINED);
    assert!(d.low_confidence);
    let once = store.detect("el perro duerme en la casa");
    let twice = store.detect("el perro duerme en la casa el perro duerme en la casa");
    assert_eq!(once.language, twice.language);
    for (k, v) in &once.perplexities {
        assert!((v - twice.perplexities[k]).abs() < 1e-9 * v);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn smoothed_models_normalize(
        corpus in prop::collection::vec(prop::collection::vec("[a-e]", 1..8), 1..12),
        order in 2usize..=3,
    ) {
        for smoothing in [Smoothing::Laplace, Smoothing::GoodTuring] {
            let m = train_ngram(&corpus, order, smoothing, "x").unwrap();
            all_contexts_normalized(&m);
        }
        let m = train_ngram(&corpus, 2, Smoothing::GoodTuring, "x").unwrap();
        let (n1, n) = count_table_oracle(&corpus);
        prop_assert!((m.unseen_event_mass() - n1 as f64 / n as f64).abs() < 1e-9);
    }
}
