//! Fine-tuning manifests for the four CDA setups.
//!
//! | setup        | CDA data used        | schedule      |
//! |--------------|----------------------|---------------|
//! | `CDA-{en}`   | English              | 50 000 steps  |
//! | `CDA-{l}`    | language `l`         | 1 epoch       |
//! | `CDA-{l,en}` | `l` and English      | 1 epoch       |
//! | `CDA-𝓛\{en}` | all six non-English  | 1 epoch       |
//!
//! All setups share batch size 32, learning rate 2e-5 and weight decay 0.01.

use super::CdaError;
use crate::lang::{Language, DISCO_LANGUAGES};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub const DEFAULT_STEPS: u64 = 50_000;
pub const DEFAULT_EPOCHS: u32 = 1;
pub const DEFAULT_BATCH_SIZE: u32 = 32;
pub const DEFAULT_LEARNING_RATE: f64 = 2e-5;
pub const DEFAULT_WEIGHT_DECAY: f64 = 0.01;

const NON_ENGLISH_LABEL: &str = "CDA-\u{1D4DB}\\{en}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CdaSetup {
    /// English data only (zero-shot transfer to other languages).
    English,
    /// Data in one non-English language.
    Monolingual,
    /// One non-English language plus English.
    FewShot,
    /// All non-English languages together.
    NonEnglish,
}

impl CdaSetup {
    pub fn needs_language(self) -> bool {
        matches!(self, CdaSetup::Monolingual | CdaSetup::FewShot)
    }

    /// Languages whose data this setup trains on, in canonical order.
    pub fn languages(self, language: Option<Language>) -> Result<Vec<Language>, CdaError> {
        let pick = |l: Option<Language>| -> Result<Language, CdaError> {
            match l {
                None => Err(CdaError::SetupLanguage(format!("{self} needs --lang"))),
                Some(Language::En) => Err(CdaError::SetupLanguage(format!(
                    "{self} takes a non-English language; English-only data is CDA-{{en}}"
                ))),
                Some(l) if !l.is_disco() => Err(CdaError::SetupLanguage(format!("`{l}` is not a DisCo language"))),
                Some(l) => Ok(l),
            }
        };
        if !self.needs_language() && language.is_some() {
            return Err(CdaError::SetupLanguage(format!("{self} does not take a language")));
        }
        Ok(match self {
            CdaSetup::English => vec![Language::En],
            CdaSetup::Monolingual => vec![pick(language)?],
            CdaSetup::FewShot => vec![Language::En, pick(language)?],
            CdaSetup::NonEnglish => Language::non_english().collect(),
        })
    }

    /// Identifier with `l` bound, e.g. `CDA-{hi,en}`.
    pub fn label(self, language: Option<Language>) -> String {
        let l = language.map_or("l".to_string(), |l| l.code().to_string());
        match self {
            CdaSetup::English => "CDA-{en}".to_string(),
            CdaSetup::Monolingual => format!("CDA-{{{l}}}"),
            CdaSetup::FewShot => format!("CDA-{{{l},en}}"),
            CdaSetup::NonEnglish => NON_ENGLISH_LABEL.to_string(),
        }
    }

    /// Recovers the setup and bound language from a manifest `setup_id`.
    pub fn parse_label(label: &str) -> Result<(Self, Option<Language>), CdaError> {
        let bad = || CdaError::UnknownSetup(label.to_string());
        if let Ok(setup) = label.parse::<CdaSetup>() {
            if !setup.needs_language() {
                return Ok((setup, None));
            }
        }
        let inner = label
            .strip_prefix("CDA-{")
            .and_then(|s| s.strip_suffix('}'))
            .ok_or_else(bad)?;
        match inner.split_once(',') {
            Some((l, "en")) => Ok((CdaSetup::FewShot, Some(l.parse().map_err(|_| bad())?))),
            None => Ok((CdaSetup::Monolingual, Some(inner.parse().map_err(|_| bad())?))),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for CdaSetup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label(None))
    }
}

impl FromStr for CdaSetup {
    type Err = CdaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let body = s.strip_prefix("CDA-").unwrap_or(s);
        match body {
            "{en}" | "en" => Ok(CdaSetup::English),
            "{l}" | "l" => Ok(CdaSetup::Monolingual),
            "{l,en}" | "l,en" | "l-en" => Ok(CdaSetup::FewShot),
            "\u{1D4DB}\\{en}" | "L\\{en}" | "L-en" | "non-en" => Ok(CdaSetup::NonEnglish),
            _ => Err(CdaError::UnknownSetup(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    Steps(u64),
    Epochs(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub lang: Language,
    pub path: PathBuf,
    pub records: u64,
}

/// Available CDA datasets per language.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetCatalog {
    entries: BTreeMap<Language, DatasetEntry>,
}

impl DatasetCatalog {
    pub fn insert(&mut self, lang: Language, path: impl Into<PathBuf>, records: u64) {
        self.entries.insert(
            lang,
            DatasetEntry {
                lang,
                path: path.into(),
                records,
            },
        );
    }

    pub fn get(&self, lang: Language) -> Option<&DatasetEntry> {
        self.entries.get(&lang)
    }

    /// Reads a JSON object `{"<lang>": "<dataset path>"}` and counts the
    /// non-empty lines of each dataset. Relative paths resolve against the
    /// catalog file's directory and are stored resolved.
    pub fn load(path: &Path) -> Result<Self, CdaError> {
        let raw = std::fs::read_to_string(path).map_err(|e| CdaError::io(path, e))?;
        let listing: BTreeMap<String, PathBuf> =
            serde_json::from_str(&raw).map_err(|e| CdaError::Parse(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut catalog = Self::default();
        for (lang, dataset) in listing {
            let lang: Language = lang.parse().map_err(|e: crate::lang::UnknownLanguage| CdaError::Parse(e.to_string()))?;
            let resolved = if dataset.is_absolute() { dataset } else { base.join(&dataset) };
            let content = std::fs::read_to_string(&resolved).map_err(|e| CdaError::io(&resolved, e))?;
            let records = content.lines().filter(|l| !l.trim().is_empty()).count() as u64;
            catalog.insert(lang, resolved, records);
        }
        Ok(catalog)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparameters {
    pub steps: u64,
    pub epochs: u32,
    pub batch_size: u32,
    pub learning_rate: f64,
    pub weight_decay: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            learning_rate: DEFAULT_LEARNING_RATE,
            weight_decay: DEFAULT_WEIGHT_DECAY,
        }
    }
}

impl Hyperparameters {
    fn validate(&self) -> Result<(), CdaError> {
        let bad = |m: &str| Err(CdaError::InvalidHyperparameters(m.to_string()));
        if self.steps == 0 || self.epochs == 0 {
            return bad("steps and epochs must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad("weight decay must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawManifest")]
pub struct TrainingManifest {
    setup_id: String,
    datasets: Vec<DatasetEntry>,
    steps_or_epochs: Schedule,
    batch_size: u32,
    learning_rate: f64,
    weight_decay: f64,
}

#[derive(Deserialize)]
struct RawManifest {
    setup_id: String,
    datasets: Vec<DatasetEntry>,
    steps_or_epochs: Schedule,
    batch_size: u32,
    learning_rate: f64,
    weight_decay: f64,
}

impl TryFrom<RawManifest> for TrainingManifest {
    type Error = CdaError;

    fn try_from(raw: RawManifest) -> Result<Self, Self::Error> {
        let (setup, lang) = CdaSetup::parse_label(&raw.setup_id)?;
        let expected = setup.languages(lang)?;
        let got: Vec<Language> = raw.datasets.iter().map(|d| d.lang).collect();
        if got != expected {
            return Err(CdaError::SetupLanguage(format!(
                "{} lists datasets for {:?}, expected {:?}",
                raw.setup_id, got, expected
            )));
        }
        let schedule_ok = match (setup, raw.steps_or_epochs) {
            (CdaSetup::English, Schedule::Steps(n)) => n > 0,
            (CdaSetup::English, Schedule::Epochs(_)) => false,
            (_, Schedule::Epochs(n)) => n > 0,
            (_, Schedule::Steps(_)) => false,
        };
        if !schedule_ok {
            return Err(CdaError::InvalidHyperparameters(format!(
                "{} cannot use schedule {:?}",
                raw.setup_id, raw.steps_or_epochs
            )));
        }
        Hyperparameters {
            steps: 1,
            epochs: 1,
            batch_size: raw.batch_size,
            learning_rate: raw.learning_rate,
            weight_decay: raw.weight_decay,
        }
        .validate()?;
        Ok(Self {
            setup_id: raw.setup_id,
            datasets: raw.datasets,
            steps_or_epochs: raw.steps_or_epochs,
            batch_size: raw.batch_size,
            learning_rate: raw.learning_rate,
            weight_decay: raw.weight_decay,
        })
    }
}

impl TrainingManifest {
    pub fn setup_id(&self) -> &str {
        &self.setup_id
    }
    pub fn datasets(&self) -> &[DatasetEntry] {
        &self.datasets
    }
    pub fn schedule(&self) -> Schedule {
        self.steps_or_epochs
    }
    pub fn batch_size(&self) -> u32 {
        self.batch_size
    }
    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }
    pub fn weight_decay(&self) -> f64 {
        self.weight_decay
    }
    pub fn languages(&self) -> Vec<Language> {
        self.datasets.iter().map(|d| d.lang).collect()
    }
}

pub fn compose_manifest(
    setup: CdaSetup,
    language: Option<Language>,
    catalog: &DatasetCatalog,
) -> Result<TrainingManifest, CdaError> {
    compose_manifest_with(setup, language, catalog, &Hyperparameters::default())
}

pub fn compose_manifest_with(
    setup: CdaSetup,
    language: Option<Language>,
    catalog: &DatasetCatalog,
    hp: &Hyperparameters,
) -> Result<TrainingManifest, CdaError> {
    hp.validate()?;
    let langs = setup.languages(language)?;
    debug_assert!(langs.iter().all(|l| DISCO_LANGUAGES.contains(l)));
    let datasets = langs
        .iter()
        .map(|l| catalog.get(*l).cloned().ok_or(CdaError::MissingDataset(*l)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TrainingManifest {
        setup_id: setup.label(language),
        datasets,
        steps_or_epochs: match setup {
            CdaSetup::English => Schedule::Steps(hp.steps),
            _ => Schedule::Epochs(hp.epochs),
        },
        batch_size: hp.batch_size,
        learning_rate: hp.learning_rate,
        weight_decay: hp.weight_decay,
    })
}
