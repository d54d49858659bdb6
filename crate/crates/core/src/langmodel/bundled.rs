pub struct BundledLanguage {
    pub code: &'static str,
    pub name: &'static str,
    /// One sentence per line.
    pub corpus: &'static str,
    /// Sentences kept out of training, for evaluation.
    pub heldout: &'static str,
    pub stop_words: &'static str,
}

macro_rules! bundled {
    ($($code:literal => $name:literal),* $(,)?) => {
        &[$(BundledLanguage {
            code: $code,
            name: $name,
            corpus: include_str!(concat!("../../data/corpus/", $code, ".txt")),
            heldout: include_str!(concat!("../../data/heldout/", $code, ".txt")),
            stop_words: include_str!(concat!("../../data/stopwords/", $code, ".txt")),
        }),*]
    };
}

pub const BUNDLED: &[BundledLanguage] = bundled! {
    "de" => "Deutsch",
    "en" => "English",
    "es" => "Español",
    "fr" => "Français",
    "it" => "Italiano",
    "ja" => "日本語",
    "ko" => "한국어",
    "nl" => "Nederlands",
    "pt" => "Português",
    "ru" => "Русский",
    "zh" => "中文",
};

pub fn sentences(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty())
}
