//! Word n-gram prediction and character-level language identification over
//! the bundled multilingual corpora.

mod bundled;
mod detect;
mod ngram;
mod normalize;

pub use bundled::{sentences, BundledLanguage, BUNDLED};
pub use detect::{detect_language, CharModel, Detection, LOW_CONFIDENCE_MARGIN, UNDETERMINED};
pub use ngram::{
    train_from_text, train_ngram, NgramModel, Smoothing, BOS, GOOD_TURING_CUTOFF, NGRAM_SCHEMA_VERSION, UNK,
};
pub use normalize::{normalize_text, stop_words, tokenize};

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LmError {
    #[error("corpus has no tokens")]
    EmptyCorpus,
    #[error("n-gram order {0} is not supported (need at least 2)")]
    InvalidOrder(usize),
    #[error("language {0:?} is not registered")]
    UnknownLanguage(String),
    #[error("invalid vocabulary: {0}")]
    InvalidVocab(String),
    #[error("model file: {0}")]
    Format(String),
}

/// Word and character models keyed by language code.
#[derive(Debug, Clone, Default)]
pub struct LanguageStore {
    words: BTreeMap<String, NgramModel>,
    chars: BTreeMap<String, CharModel>,
}

impl LanguageStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every bundled language, word models trained at `order` with `smoothing`.
    pub fn bundled(order: usize, smoothing: Smoothing) -> Result<Self, LmError> {
        let mut store = Self::new();
        for b in BUNDLED {
            let words = train_from_text(b.corpus, order, smoothing, b.code)?;
            let chars = CharModel::train(b.code, sentences(b.corpus))?;
            store.register(words, chars)?;
        }
        Ok(store)
    }

    pub fn register(&mut self, words: NgramModel, chars: CharModel) -> Result<(), LmError> {
        if words.language() != chars.language || words.language().trim().is_empty() {
            return Err(LmError::UnknownLanguage(chars.language));
        }
        self.chars.insert(chars.language.clone(), chars);
        self.words.insert(words.language().to_string(), words);
        Ok(())
    }

    /// Replaces the word model of an already registered language.
    pub fn replace_words(&mut self, words: NgramModel) -> Result<(), LmError> {
        match self.words.get_mut(words.language()) {
            Some(slot) => {
                *slot = words;
                Ok(())
            }
            None => Err(LmError::UnknownLanguage(words.language().to_string())),
        }
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.words.keys().map(String::as_str)
    }

    pub fn words(&self, language: &str) -> Option<&NgramModel> {
        self.words
            .get(language)
            .or_else(|| self.words.get(&normalize::primary_subtag(language)))
    }

    pub fn detect(&self, text: &str) -> Detection {
        detect_language(text, self.chars.values())
    }

    /// Suggestions for spelled text. A trailing partial word (no whitespace
    /// after it) restricts suggestions to completions of that prefix.
    pub fn suggest(&self, text: &str, language: &str, k: usize) -> Result<Vec<String>, LmError> {
        let model = self
            .words(language)
            .ok_or_else(|| LmError::UnknownLanguage(language.to_string()))?;
        let partial = text.chars().last().is_some_and(char::is_alphanumeric);
        let mut tokens = tokenize(text);
        let prefix = if partial { tokens.pop() } else { None };
        let stops: Vec<&str> = stop_words(language).collect();
        tokens.retain(|t| !stops.contains(&t.as_str()));
        Ok(match prefix {
            Some(p) => model.suggest_prefixed(&tokens, &p, k),
            None => model.suggest(&tokens, k),
        })
    }
}
