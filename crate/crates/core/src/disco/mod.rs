//! Multilingual DisCo: template slot-filling with gendered name pairs.
//!
//! Each template has a `{PERSON}` slot, filled once with the male and once
//! with the female name of every pair, and a `{BLANK}` slot the model fills.
//! Languages with gendered verbs carry separate male and female surface
//! forms of the same template; English stores the same text twice.

mod eval;

pub use eval::{
    evaluate_disco, normalize_token, tally_predictions, Aggregation, DiscoOptions, DiscoReport, FillTally, DEFAULT_CANDIDATE_POOL,
    DEFAULT_K,
};

use crate::gateway::{GatewayError, BLANK};
use crate::lang::Language;
use crate::stats::StatsError;
use crate::debias::DebiasError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::Path;

pub const PERSON: &str = "{PERSON}";

#[derive(Debug, thiserror::Error)]
pub enum DiscoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("template `{id}`: {reason}")]
    InvalidTemplate { id: String, reason: String },
    #[error("duplicate template id `{0}`")]
    DuplicateTemplate(String),
    #[error("invalid name pair ({male}, {female}): {reason}")]
    InvalidNamePair { male: String, female: String, reason: String },
    #[error("template `{template}` is {template_lang} but the name pair is {pair_lang}")]
    LanguageMismatch {
        template: String,
        template_lang: Language,
        pair_lang: Language,
    },
    #[error("inputs span several languages ({0}); evaluate one language at a time")]
    MixedLanguages(String),
    #[error("no templates to evaluate")]
    NoTemplates,
    #[error("no name pairs to evaluate")]
    NoNamePairs,
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("model request for `{text}` failed: {source}")]
    Model { text: String, source: GatewayError },
    #[error("model returned {got} predictions for `{text}`, expected {expected}")]
    ShortPrediction { text: String, got: usize, expected: usize },
    #[error("model id changed during the run: `{0}` then `{1}`")]
    ModelIdChanged(String, String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Debias(#[from] DebiasError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub id: String,
    pub lang: Language,
    pub male_text: String,
    pub female_text: String,
}

fn check_markers(id: &str, text: &str) -> Result<(), DiscoError> {
    for marker in [PERSON, BLANK] {
        let n = text.matches(marker).count();
        if n != 1 {
            return Err(DiscoError::InvalidTemplate {
                id: id.to_string(),
                reason: format!("expected exactly one {marker} marker, found {n} in `{text}`"),
            });
        }
    }
    Ok(())
}

impl Template {
    pub fn new(
        id: impl Into<String>,
        lang: Language,
        male_text: impl Into<String>,
        female_text: impl Into<String>,
    ) -> Result<Self, DiscoError> {
        let t = Self {
            id: id.into(),
            lang,
            male_text: male_text.into(),
            female_text: female_text.into(),
        };
        t.validate()?;
        Ok(t)
    }

    /// An English-style template whose text does not depend on gender.
    pub fn shared(id: impl Into<String>, lang: Language, text: impl Into<String>) -> Result<Self, DiscoError> {
        let text = text.into();
        Self::new(id, lang, text.clone(), text)
    }

    pub fn validate(&self) -> Result<(), DiscoError> {
        if !self.lang.is_disco() {
            return Err(DiscoError::InvalidTemplate {
                id: self.id.clone(),
                reason: format!("language `{}` is not a DisCo language", self.lang),
            });
        }
        check_markers(&self.id, &self.male_text)?;
        check_markers(&self.id, &self.female_text)?;
        if self.lang == Language::En && self.male_text != self.female_text {
            return Err(DiscoError::InvalidTemplate {
                id: self.id.clone(),
                reason: "English templates must use one text for both genders".into(),
            });
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct TemplateRecord {
    id: String,
    lang: String,
    male: String,
    female: String,
}

/// Reads a JSON Lines template file: `{"id", "lang", "male", "female"}` per line.
pub fn load_templates(path: &Path) -> Result<Vec<Template>, DiscoError> {
    let file = std::fs::File::open(path).map_err(|source| DiscoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_templates(std::io::BufReader::new(file))
}

pub fn read_templates(reader: impl BufRead) -> Result<Vec<Template>, DiscoError> {
    let mut templates = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| DiscoError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TemplateRecord = serde_json::from_str(&line).map_err(|e| DiscoError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let lang: Language = rec.lang.parse().map_err(|e: crate::lang::UnknownLanguage| DiscoError::InvalidTemplate {
            id: rec.id.clone(),
            reason: e.to_string(),
        })?;
        let template = Template::new(rec.id, lang, rec.male, rec.female)?;
        if !ids.insert(template.id.clone()) {
            return Err(DiscoError::DuplicateTemplate(template.id));
        }
        templates.push(template);
    }
    Ok(templates)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NamePair {
    pub male: String,
    pub female: String,
    pub lang: Language,
}

impl NamePair {
    pub fn new(male: impl Into<String>, female: impl Into<String>, lang: Language) -> Result<Self, DiscoError> {
        let (male, female) = (male.into(), female.into());
        let invalid = |reason: &str| DiscoError::InvalidNamePair {
            male: male.clone(),
            female: female.clone(),
            reason: reason.to_string(),
        };
        if male.trim().is_empty() || female.trim().is_empty() {
            return Err(invalid("names must be non-empty"));
        }
        if male == female {
            return Err(invalid("male and female names must differ"));
        }
        Ok(Self { male, female, lang })
    }
}

#[derive(Deserialize)]
struct NameRow {
    lang: String,
    male: String,
    female: String,
}

/// Reads a `lang,male,female` CSV of name pairs.
pub fn load_name_pairs(path: &Path) -> Result<Vec<NamePair>, DiscoError> {
    let file = std::fs::File::open(path).map_err(|source| DiscoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_name_pairs(file)
}

pub fn read_name_pairs(reader: impl std::io::Read) -> Result<Vec<NamePair>, DiscoError> {
    let mut pairs = Vec::new();
    for (i, row) in csv::Reader::from_reader(reader).deserialize::<NameRow>().enumerate() {
        let row = row.map_err(|e| DiscoError::Parse {
            line: i + 2,
            message: e.to_string(),
        })?;
        let lang = row.lang.parse().map_err(|e: crate::lang::UnknownLanguage| DiscoError::Parse {
            line: i + 2,
            message: e.to_string(),
        })?;
        pairs.push(NamePair::new(row.male.trim(), row.female.trim(), lang)?);
    }
    Ok(pairs)
}

/// Fills `{PERSON}` in both gendered variants; `{BLANK}` is left for the model.
pub fn instantiate(template: &Template, pair: &NamePair) -> Result<(String, String), DiscoError> {
    if template.lang != pair.lang {
        return Err(DiscoError::LanguageMismatch {
            template: template.id.clone(),
            template_lang: template.lang,
            pair_lang: pair.lang,
        });
    }
    Ok((
        template.male_text.replacen(PERSON, &pair.male, 1),
        template.female_text.replacen(PERSON, &pair.female, 1),
    ))
}
