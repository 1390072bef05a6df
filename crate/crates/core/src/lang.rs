//! Language codes understood by the toolkit.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// An ISO 639-1 language code.
///
/// The first seven variants form the DisCo language set, in the order used
/// for report columns and manifest dataset lists. The remainder are the
/// languages of the published MBE corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Hi,
    Pa,
    Bn,
    Ta,
    Gu,
    Mr,
    De,
    Ja,
    Ar,
    Es,
    Zh,
    Pt,
    Ru,
    Id,
}

/// English plus the six Indian languages, in column order.
pub const DISCO_LANGUAGES: [Language; 7] = [
    Language::En,
    Language::Hi,
    Language::Pa,
    Language::Bn,
    Language::Ta,
    Language::Gu,
    Language::Mr,
];

impl Language {
    pub fn code(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Hi => "hi",
            Language::Pa => "pa",
            Language::Bn => "bn",
            Language::Ta => "ta",
            Language::Gu => "gu",
            Language::Mr => "mr",
            Language::De => "de",
            Language::Ja => "ja",
            Language::Ar => "ar",
            Language::Es => "es",
            Language::Zh => "zh",
            Language::Pt => "pt",
            Language::Ru => "ru",
            Language::Id => "id",
        }
    }

    /// Whether the language belongs to the DisCo set (English and the six Indian languages).
    pub fn is_disco(self) -> bool {
        DISCO_LANGUAGES.contains(&self)
    }

    /// The DisCo languages other than English.
    pub fn non_english() -> impl Iterator<Item = Language> {
        DISCO_LANGUAGES.into_iter().filter(|l| *l != Language::En)
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown language code `{0}`")]
pub struct UnknownLanguage(pub String);

impl FromStr for Language {
    type Err = UnknownLanguage;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lang = match s.trim().to_ascii_lowercase().as_str() {
            "en" => Language::En,
            "hi" => Language::Hi,
            "pa" => Language::Pa,
            "bn" => Language::Bn,
            "ta" => Language::Ta,
            "gu" => Language::Gu,
            "mr" => Language::Mr,
            "de" => Language::De,
            "ja" => Language::Ja,
            "ar" => Language::Ar,
            "es" => Language::Es,
            "zh" => Language::Zh,
            "pt" => Language::Pt,
            "ru" => Language::Ru,
            "id" => Language::Id,
            _ => return Err(UnknownLanguage(s.to_string())),
        };
        Ok(lang)
    }
}
