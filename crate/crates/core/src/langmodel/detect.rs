use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::LmError;

pub const UNDETERMINED: &str = "und";
/// Below this normalized perplexity margin a detection is flagged low-confidence.
pub const LOW_CONFIDENCE_MARGIN: f64 = 0.05;

const BOUNDARY: char = ' ';
/// Size of the notional alphabet behind the uniform floor; shared by every
/// model so that text none of them has seen scores identically.
const FLOOR_ALPHABET: f64 = 65536.0;
const UNIGRAM_FLOOR_WEIGHT: f64 = 0.01;
const HIGHER_ORDER_WEIGHT: f64 = 0.7;

/// Lowercased alphanumeric runs; everything else separates runs.
fn runs(text: &str) -> Vec<Vec<char>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    for ch in text.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() {
            cur.push(ch);
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Each run padded with two leading and one trailing boundary.
fn padded(run: &[char]) -> Vec<char> {
    let mut v = Vec::with_capacity(run.len() + 3);
    v.extend([BOUNDARY, BOUNDARY]);
    v.extend_from_slice(run);
    v.push(BOUNDARY);
    v
}

/// Interpolated character trigram model used for language identification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharModel {
    pub language: String,
    unigrams: BTreeMap<char, u64>,
    bigrams: BTreeMap<(char, char), u64>,
    trigrams: BTreeMap<(char, char, char), u64>,
    /// Counts of bigram and trigram histories.
    uni_ctx: BTreeMap<char, u64>,
    bi_ctx: BTreeMap<(char, char), u64>,
    total: u64,
}

impl CharModel {
    pub fn train<'a>(language: &str, sentences: impl IntoIterator<Item = &'a str>) -> Result<Self, LmError> {
        let mut m = Self {
            language: language.to_string(),
            unigrams: BTreeMap::new(),
            bigrams: BTreeMap::new(),
            trigrams: BTreeMap::new(),
            uni_ctx: BTreeMap::new(),
            bi_ctx: BTreeMap::new(),
            total: 0,
        };
        for s in sentences {
            for run in runs(s) {
                let p = padded(&run);
                for w in p.windows(3) {
                    let (a, b, c) = (w[0], w[1], w[2]);
                    *m.unigrams.entry(c).or_insert(0) += 1;
                    *m.bigrams.entry((b, c)).or_insert(0) += 1;
                    *m.trigrams.entry((a, b, c)).or_insert(0) += 1;
                    *m.uni_ctx.entry(b).or_insert(0) += 1;
                    *m.bi_ctx.entry((a, b)).or_insert(0) += 1;
                    m.total += 1;
                }
            }
        }
        if m.total == 0 {
            return Err(LmError::EmptyCorpus);
        }
        Ok(m)
    }

    pub fn alphabet(&self) -> BTreeSet<char> {
        self.unigrams.keys().copied().collect()
    }

    /// `P(c | a b)`.
    pub fn prob(&self, a: char, b: char, c: char) -> f64 {
        let count = |x: Option<&u64>| x.copied().unwrap_or(0) as f64;
        let p1 = (1.0 - UNIGRAM_FLOOR_WEIGHT) * count(self.unigrams.get(&c)) / self.total as f64
            + UNIGRAM_FLOOR_WEIGHT / FLOOR_ALPHABET;
        let p2 = match self.uni_ctx.get(&b) {
            Some(n) => {
                HIGHER_ORDER_WEIGHT * count(self.bigrams.get(&(b, c))) / *n as f64 + (1.0 - HIGHER_ORDER_WEIGHT) * p1
            }
            None => p1,
        };
        match self.bi_ctx.get(&(a, b)) {
            Some(n) => {
                HIGHER_ORDER_WEIGHT * count(self.trigrams.get(&(a, b, c))) / *n as f64
                    + (1.0 - HIGHER_ORDER_WEIGHT) * p2
            }
            None => p2,
        }
    }

    /// Sum of log-probabilities and number of predicted characters.
    fn log_likelihood(&self, text_runs: &[Vec<char>]) -> (f64, usize) {
        let mut ll = 0.0;
        let mut n = 0;
        for run in text_runs {
            for w in padded(run).windows(3) {
                ll += self.prob(w[0], w[1], w[2]).ln();
                n += 1;
            }
        }
        (ll, n)
    }

    /// Per-character perplexity of `text`, or `None` when it has no letters.
    pub fn perplexity(&self, text: &str) -> Option<f64> {
        let (ll, n) = self.log_likelihood(&runs(text));
        (n > 0).then(|| (-ll / n as f64).exp())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Winning language, or [`UNDETERMINED`].
    pub language: String,
    /// `(ppl_second - ppl_best) / ppl_second`; 1 with a single model.
    pub confidence: f64,
    pub low_confidence: bool,
    /// Fraction of the text's characters the winner never saw in training.
    pub unseen_char_fraction: f64,
    pub perplexities: BTreeMap<String, f64>,
}

impl Detection {
    fn undetermined() -> Self {
        Self {
            language: UNDETERMINED.into(),
            confidence: 0.0,
            low_confidence: true,
            unseen_char_fraction: 0.0,
            perplexities: BTreeMap::new(),
        }
    }
}

/// Language with the lowest per-character perplexity. Ties go to the
/// lexicographically smallest code.
pub fn detect_language<'a>(text: &str, models: impl IntoIterator<Item = &'a CharModel>) -> Detection {
    let text_runs = runs(text);
    let mut perplexities = BTreeMap::new();
    let mut best: Option<(f64, &CharModel)> = None;
    for m in models {
        let (ll, n) = m.log_likelihood(&text_runs);
        if n == 0 {
            return Detection::undetermined();
        }
        let ppl = (-ll / n as f64).exp();
        perplexities.insert(m.language.clone(), ppl);
        let better = match &best {
            None => true,
            Some((b, bm)) => ppl < *b || (ppl == *b && m.language < bm.language),
        };
        if better {
            best = Some((ppl, m));
        }
    }
    let Some((best_ppl, winner)) = best else {
        return Detection::undetermined();
    };
    let runner_up = perplexities
        .iter()
        .filter(|(k, _)| **k != winner.language)
        .map(|(_, v)| *v)
        .min_by(f64::total_cmp);
    let confidence = runner_up.map_or(1.0, |r| ((r - best_ppl) / r).max(0.0));
    let chars: Vec<char> = text_runs.iter().flatten().copied().collect();
    let unseen = chars.iter().filter(|c| !winner.unigrams.contains_key(c)).count();
    let unseen_char_fraction = unseen as f64 / chars.len() as f64;
    Detection {
        language: winner.language.clone(),
        confidence,
        low_confidence: confidence < LOW_CONFIDENCE_MARGIN || unseen_char_fraction > 0.5,
        unseen_char_fraction,
        perplexities,
    }
}
