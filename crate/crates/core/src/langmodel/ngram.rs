use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::LmError;

pub const BOS: &str = "<s>";
pub const UNK: &str = "<unk>";
pub const NGRAM_SCHEMA_VERSION: u32 = 1;
/// Counts up to this value are Good-Turing adjusted; larger ones are trusted.
pub const GOOD_TURING_CUTOFF: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    Mle,
    Laplace,
    GoodTuring,
}

impl Smoothing {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "mle" => Some(Self::Mle),
            "laplace" | "addone" => Some(Self::Laplace),
            "goodturing" | "gt" => Some(Self::GoodTuring),
            _ => None,
        }
    }
}

/// How seen counts are discounted under Good-Turing.
#[derive(Debug, Clone, PartialEq)]
enum Discount {
    /// `discounts[c]` multiplies a count `c <= cutoff` (Katz form).
    Katz { cutoff: u64, discounts: Vec<f64> },
    /// Every count scaled by `1 - N1/N`, used when the frequency-of-frequency
    /// table is too sparse for Katz discounts.
    Proportional(f64),
}

impl Discount {
    fn fit(freq_of_freq: &BTreeMap<u64, u64>, total: u64) -> Self {
        let n = |c: u64| *freq_of_freq.get(&c).unwrap_or(&0) as f64;
        let n1 = n(1);
        for k in (2..=GOOD_TURING_CUTOFF).rev() {
            if (1..=k + 1).any(|c| n(c) == 0.0) {
                continue;
            }
            let r = (k + 1) as f64 * n(k + 1) / n1;
            if r >= 1.0 {
                continue;
            }
            let mut discounts = vec![1.0; k as usize + 1];
            let mut ok = true;
            for c in 1..=k {
                let c_star = (c + 1) as f64 * n(c + 1) / n(c);
                let d = (c_star / c as f64 - r) / (1.0 - r);
                if !(d > 0.0 && d <= 1.0) {
                    ok = false;
                    break;
                }
                discounts[c as usize] = d;
            }
            if ok {
                return Self::Katz { cutoff: k, discounts };
            }
        }
        let scale = if total == 0 { 1.0 } else { 1.0 - n1 / total as f64 };
        Self::Proportional(scale)
    }

    fn apply(&self, c: u64) -> f64 {
        match self {
            Self::Katz { cutoff, discounts } if c <= *cutoff => c as f64 * discounts[c as usize],
            Self::Katz { .. } => c as f64,
            Self::Proportional(s) => c as f64 * s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContextCounts {
    context: Vec<String>,
    counts: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NgramModelFile {
    schema_version: u32,
    language: String,
    order: usize,
    smoothing: Smoothing,
    vocab: BTreeSet<String>,
    contexts: Vec<ContextCounts>,
}

/// Word n-gram model. `vocab` is the full prediction space (every training
/// type plus [`UNK`]); contexts are the preceding `order - 1` tokens, padded
/// with [`BOS`] at sentence starts.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    language: String,
    order: usize,
    smoothing: Smoothing,
    vocab: BTreeSet<String>,
    counts: BTreeMap<Vec<String>, BTreeMap<String, u64>>,
    context_totals: BTreeMap<Vec<String>, u64>,
    total_tokens: u64,
    discount: Discount,
}

pub fn train_ngram(
    corpus: &[Vec<String>],
    order: usize,
    smoothing: Smoothing,
    language: &str,
) -> Result<NgramModel, LmError> {
    if order < 2 {
        return Err(LmError::InvalidOrder(order));
    }
    if corpus.iter().all(Vec::is_empty) {
        return Err(LmError::EmptyCorpus);
    }
    let mut vocab: BTreeSet<String> = corpus.iter().flatten().cloned().collect();
    vocab.insert(UNK.to_string());
    let mut counts: BTreeMap<Vec<String>, BTreeMap<String, u64>> = BTreeMap::new();
    for sentence in corpus.iter().filter(|s| !s.is_empty()) {
        let mut window: Vec<String> = vec![BOS.to_string(); order - 1];
        for tok in sentence {
            *counts
                .entry(window.clone())
                .or_default()
                .entry(tok.clone())
                .or_insert(0) += 1;
            window.remove(0);
            window.push(tok.clone());
        }
    }
    NgramModel::build(language, order, smoothing, vocab, counts)
}

/// Splits `text` into lines, normalizes each and trains on the result.
pub fn train_from_text(text: &str, order: usize, smoothing: Smoothing, language: &str) -> Result<NgramModel, LmError> {
    let corpus: Vec<Vec<String>> = super::bundled::sentences(text)
        .map(|l| super::normalize_text(l, language))
        .collect();
    train_ngram(&corpus, order, smoothing, language)
}

impl NgramModel {
    /// Model over an explicit prediction space. Tokens outside `vocab` get
    /// probability zero unless `vocab` contains [`UNK`].
    pub fn from_counts(
        language: &str,
        order: usize,
        smoothing: Smoothing,
        vocab: BTreeSet<String>,
        counts: BTreeMap<Vec<String>, BTreeMap<String, u64>>,
    ) -> Result<Self, LmError> {
        Self::build(language, order, smoothing, vocab, counts)
    }

    fn build(
        language: &str,
        order: usize,
        smoothing: Smoothing,
        vocab: BTreeSet<String>,
        mut counts: BTreeMap<Vec<String>, BTreeMap<String, u64>>,
    ) -> Result<Self, LmError> {
        if order < 2 {
            return Err(LmError::InvalidOrder(order));
        }
        if language.trim().is_empty() {
            return Err(LmError::UnknownLanguage(language.to_string()));
        }
        if vocab.is_empty() {
            return Err(LmError::InvalidVocab("empty vocabulary".into()));
        }
        counts.retain(|_, m| {
            m.retain(|_, c| *c > 0);
            !m.is_empty()
        });
        for (ctx, m) in &counts {
            if ctx.len() != order - 1 {
                return Err(LmError::InvalidVocab(format!(
                    "context {ctx:?} is not {} tokens",
                    order - 1
                )));
            }
            if let Some(t) = m.keys().find(|t| !vocab.contains(*t)) {
                return Err(LmError::InvalidVocab(format!(
                    "counted token {t:?} missing from vocabulary"
                )));
            }
        }
        let context_totals: BTreeMap<Vec<String>, u64> =
            counts.iter().map(|(k, m)| (k.clone(), m.values().sum())).collect();
        let total_tokens = context_totals.values().sum();
        let mut fof = BTreeMap::new();
        for c in counts.values().flat_map(|m| m.values()) {
            *fof.entry(*c).or_insert(0u64) += 1;
        }
        let discount = Discount::fit(&fof, total_tokens);
        Ok(Self {
            language: language.to_string(),
            order,
            smoothing,
            vocab,
            counts,
            context_totals,
            total_tokens,
            discount,
        })
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> Smoothing {
        self.smoothing
    }

    pub fn vocab(&self) -> &BTreeSet<String> {
        &self.vocab
    }

    /// Number of counted n-gram events.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn count(&self, context: &[String], token: &str) -> u64 {
        self.counts
            .get(context)
            .and_then(|m| m.get(token))
            .copied()
            .unwrap_or(0)
    }

    pub fn contexts(&self) -> impl Iterator<Item = &Vec<String>> {
        self.counts.keys()
    }

    /// Frequency of frequencies over all counted n-gram types.
    pub fn frequency_of_frequencies(&self) -> BTreeMap<u64, u64> {
        let mut fof = BTreeMap::new();
        for c in self.counts.values().flat_map(|m| m.values()) {
            *fof.entry(*c).or_insert(0) += 1;
        }
        fof
    }

    fn map_token<'a>(&'a self, t: &'a str) -> Option<&'a str> {
        if self.vocab.contains(t) {
            Some(t)
        } else if self.vocab.contains(UNK) {
            Some(UNK)
        } else {
            None
        }
    }

    /// Last `order - 1` tokens of `context`, out-of-vocabulary tokens mapped
    /// to [`UNK`] (when the vocabulary has it) and left-padded with [`BOS`].
    pub fn context_key(&self, context: &[String]) -> Vec<String> {
        let n = self.order - 1;
        let tail = &context[context.len().saturating_sub(n)..];
        let mut key = vec![BOS.to_string(); n - tail.len()];
        key.extend(tail.iter().map(|t| {
            if t == BOS {
                BOS.to_string()
            } else {
                self.map_token(t).unwrap_or(t).to_string()
            }
        }));
        key
    }

    pub fn probability(&self, context: &[String], token: &str) -> f64 {
        let key = self.context_key(context);
        match self.map_token(token) {
            Some(t) => self.dist(&key).prob(t),
            None => 0.0,
        }
    }

    fn dist<'a>(&'a self, key: &[String]) -> ContextDist<'a> {
        let seen = self.counts.get(key);
        let n_ctx = self.context_totals.get(key).copied().unwrap_or(0);
        let v = self.vocab.len() as f64;
        let (seen_denom, unseen_each) = match (self.smoothing, seen) {
            (Smoothing::Mle, None) => (1.0, 0.0),
            (_, None) => (1.0, 1.0 / v),
            (Smoothing::Mle, Some(_)) => (n_ctx as f64, 0.0),
            (Smoothing::Laplace, Some(_)) => (n_ctx as f64 + v, 1.0 / (n_ctx as f64 + v)),
            (Smoothing::GoodTuring, Some(m)) => {
                let discounted: f64 = m.values().map(|c| self.discount.apply(*c)).sum();
                let unseen = self.vocab.len() - m.len();
                if unseen == 0 {
                    (discounted, 0.0)
                } else {
                    let left = (1.0 - discounted / n_ctx as f64).max(0.0);
                    (n_ctx as f64, left / unseen as f64)
                }
            }
        };
        ContextDist {
            model: self,
            seen,
            seen_denom,
            unseen_each,
        }
    }

    /// Top `k` tokens after `context`, by probability then lexicographically.
    /// [`UNK`] is never suggested.
    pub fn suggest(&self, context: &[String], k: usize) -> Vec<String> {
        self.suggest_filtered(context, k, |_| true)
    }

    /// Like [`suggest`](Self::suggest), restricted to tokens starting with `prefix`.
    pub fn suggest_prefixed(&self, context: &[String], prefix: &str, k: usize) -> Vec<String> {
        self.suggest_filtered(context, k, |t| t.starts_with(prefix))
    }

    fn suggest_filtered(&self, context: &[String], k: usize, keep: impl Fn(&str) -> bool) -> Vec<String> {
        let dist = self.dist(&self.context_key(context));
        let mut scored: Vec<(f64, &String)> = self
            .vocab
            .iter()
            .filter(|t| t.as_str() != UNK && keep(t))
            .map(|t| (dist.prob(t), t))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        scored.into_iter().take(k).map(|(_, t)| t.clone()).collect()
    }

    /// Sum of `P(token | context)` over the vocabulary.
    pub fn mass(&self, context: &[String]) -> f64 {
        let dist = self.dist(&self.context_key(context));
        self.vocab.iter().map(|t| dist.prob(t)).sum()
    }

    /// Probability of all unseen (context, token) events, weighting each
    /// counted context by its share of the training events.
    pub fn unseen_event_mass(&self) -> f64 {
        if self.total_tokens == 0 {
            return 0.0;
        }
        self.counts
            .keys()
            .map(|ctx| {
                let dist = self.dist(ctx);
                let unseen = (self.vocab.len() - dist.seen.map_or(0, BTreeMap::len)) as f64;
                self.context_totals[ctx] as f64 / self.total_tokens as f64 * unseen * dist.unseen_each
            })
            .sum()
    }

    /// Effective count used in place of `c` for a seen event.
    pub fn adjusted_count(&self, c: u64) -> f64 {
        self.discount.apply(c)
    }

    pub fn to_json(&self) -> String {
        let file = NgramModelFile {
            schema_version: NGRAM_SCHEMA_VERSION,
            language: self.language.clone(),
            order: self.order,
            smoothing: self.smoothing,
            vocab: self.vocab.clone(),
            contexts: self
                .counts
                .iter()
                .map(|(c, m)| ContextCounts {
                    context: c.clone(),
                    counts: m.clone(),
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, LmError> {
        let file: NgramModelFile = serde_json::from_str(s).map_err(|e| LmError::Format(e.to_string()))?;
        if file.schema_version != NGRAM_SCHEMA_VERSION {
            return Err(LmError::Format(format!(
                "unsupported schema_version {}",
                file.schema_version
            )));
        }
        let mut counts = BTreeMap::new();
        for c in file.contexts {
            if counts.insert(c.context.clone(), c.counts).is_some() {
                return Err(LmError::Format(format!("context {:?} listed twice", c.context)));
            }
        }
        Self::build(&file.language, file.order, file.smoothing, file.vocab, counts)
    }
}

struct ContextDist<'a> {
    model: &'a NgramModel,
    seen: Option<&'a BTreeMap<String, u64>>,
    seen_denom: f64,
    unseen_each: f64,
}

impl ContextDist<'_> {
    fn prob(&self, token: &str) -> f64 {
        match self.seen.and_then(|m| m.get(token)) {
            Some(c) => match self.model.smoothing {
                Smoothing::Mle => *c as f64 / self.seen_denom,
                Smoothing::Laplace => (*c + 1) as f64 / self.seen_denom,
                Smoothing::GoodTuring if self.seen_denom > 0.0 => self.model.discount.apply(*c) / self.seen_denom,
                Smoothing::GoodTuring => 0.0,
            },
            None => self.unseen_each,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn bigram_mle() {
        let m = train_ngram(&[toks("a b a b")], 2, Smoothing::Mle, "en").unwrap();
        assert_eq!(m.probability(&toks("a"), "b"), 1.0);
        assert_eq!(m.probability(&toks("b"), "a"), 1.0);
        assert_eq!(m.probability(&toks("b"), "b"), 0.0);
        assert_eq!(m.probability(&[], "a"), 1.0);
        assert_eq!(m.suggest(&toks("a"), 1), ["b"]);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            train_ngram(&[], 2, Smoothing::Mle, "en").unwrap_err(),
            LmError::EmptyCorpus
        );
        assert_eq!(
            train_ngram(&[vec![]], 2, Smoothing::Mle, "en").unwrap_err(),
            LmError::EmptyCorpus
        );
        assert_eq!(
            train_ngram(&[toks("a")], 1, Smoothing::Mle, "en").unwrap_err(),
            LmError::InvalidOrder(1)
        );
    }

    #[test]
    fn smoothing_names() {
        assert_eq!(Smoothing::parse("good-turing"), Some(Smoothing::GoodTuring));
        assert_eq!(Smoothing::parse("Laplace"), Some(Smoothing::Laplace));
        assert_eq!(Smoothing::parse("kneser"), None);
    }
}
