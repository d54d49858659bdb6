use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use unicode_segmentation::UnicodeSegmentation;

use super::bundled::BUNDLED;

fn stop_lists() -> &'static BTreeMap<&'static str, BTreeSet<&'static str>> {
    static LISTS: OnceLock<BTreeMap<&'static str, BTreeSet<&'static str>>> = OnceLock::new();
    LISTS.get_or_init(|| {
        BUNDLED
            .iter()
            .map(|b| {
                let words = b.stop_words.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
                (b.code, words)
            })
            .collect()
    })
}

/// Stop words for `language` (primary subtag); empty for unknown languages.
pub fn stop_words(language: &str) -> impl Iterator<Item = &'static str> {
    let primary = primary_subtag(language);
    stop_lists()
        .get(primary.as_str())
        .into_iter()
        .flat_map(|s| s.iter().copied())
}

pub(crate) fn primary_subtag(language: &str) -> String {
    language.split(['-', '_']).next().unwrap_or("").to_ascii_lowercase()
}

/// Word tokens with punctuation dropped and case folded, before stop-word
/// removal. Boundaries follow Unicode word segmentation, so ideographs come
/// out one per token.
pub fn tokenize(raw: &str) -> Vec<String> {
    raw.unicode_words().map(str::to_lowercase).collect()
}

/// [`tokenize`] followed by removal of the language's stop words.
pub fn normalize_text(raw: &str, language: &str) -> Vec<String> {
    let primary = primary_subtag(language);
    let stops = stop_lists().get(primary.as_str());
    tokenize(raw)
        .into_iter()
        .filter(|t| stops.map_or(true, |s| !s.contains(t.as_str())))
        .collect()
}
