//! Self-debiasing for masked-slot predictions.
//!
//! The model is queried twice for the same slot: once on the plain input and
//! once with a bias-eliciting prompt prepended. Candidates whose probability
//! rises under the prompt are treated as biased and decayed exponentially in
//! the size of the rise; everything is then renormalized.

use crate::gateway::Prediction;
use crate::lang::Language;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

pub const DEFAULT_DECAY_LAMBDA: f64 = 50.0;
pub const DEFAULT_EPSILON: f64 = 0.01;
pub const ENGLISH_PROMPT: &str = "The following text discriminates against people because of their gender";
pub const PROMPT_SEPARATOR: &str = ": ";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DebiasError {
    #[error("input text is empty")]
    EmptyText,
    #[error("debias prompt is empty")]
    EmptyPrompt,
    #[error("decay lambda must be positive and finite, got {0}")]
    InvalidLambda(f64),
    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("probability {prob} for `{token}` is not a finite value >= 0")]
    InvalidProbability { token: String, prob: f64 },
    #[error("plain and prompted distributions cover different candidate sets")]
    CandidateMismatch,
    #[error("distribution has no probability mass to renormalize")]
    ZeroMass,
    #[error("no debias prompt for language `{0}`")]
    MissingPrompt(Language),
    #[error("unknown debias mode `{0}` (expected none, sd-en or sd-l)")]
    UnknownMode(String),
    #[error("prompt file: {0}")]
    PromptFile(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebiasConfig {
    pub prompt_text: String,
    pub prompt_lang: Language,
    pub decay_lambda: f64,
    pub epsilon: f64,
}

impl DebiasConfig {
    pub fn new(prompt_text: impl Into<String>, prompt_lang: Language) -> Result<Self, DebiasError> {
        Self {
            prompt_text: prompt_text.into(),
            prompt_lang,
            decay_lambda: DEFAULT_DECAY_LAMBDA,
            epsilon: DEFAULT_EPSILON,
        }
        .validated()
    }

    pub fn english() -> Self {
        Self::new(ENGLISH_PROMPT, Language::En).expect("built-in prompt is valid")
    }

    pub fn with_decay(mut self, decay_lambda: f64, epsilon: f64) -> Result<Self, DebiasError> {
        self.decay_lambda = decay_lambda;
        self.epsilon = epsilon;
        self.validated()
    }

    fn validated(self) -> Result<Self, DebiasError> {
        if self.prompt_text.trim().is_empty() {
            return Err(DebiasError::EmptyPrompt);
        }
        if !(self.decay_lambda.is_finite() && self.decay_lambda > 0.0) {
            return Err(DebiasError::InvalidLambda(self.decay_lambda));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(DebiasError::InvalidEpsilon(self.epsilon));
        }
        Ok(self)
    }
}

/// Which prompt, if any, to use during an evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DebiasMode {
    #[default]
    #[serde(rename = "none")]
    None,
    /// English prompt regardless of the input language.
    #[serde(rename = "sd-en")]
    SdEn,
    /// Prompt translated into the input language.
    #[serde(rename = "sd-l")]
    SdL,
}

impl DebiasMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DebiasMode::None => "none",
            DebiasMode::SdEn => "sd-en",
            DebiasMode::SdL => "sd-l",
        }
    }
}

impl FromStr for DebiasMode {
    type Err = DebiasError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(DebiasMode::None),
            "sd-en" => Ok(DebiasMode::SdEn),
            "sd-l" => Ok(DebiasMode::SdL),
            other => Err(DebiasError::UnknownMode(other.to_string())),
        }
    }
}

/// Debias prompts keyed by language, loaded from a `lang,prompt_text` CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PromptBook {
    prompts: BTreeMap<Language, String>,
}

#[derive(Deserialize)]
struct PromptRow {
    lang: String,
    prompt_text: String,
}

impl PromptBook {
    pub fn load(path: &Path) -> Result<Self, DebiasError> {
        let file = std::fs::File::open(path).map_err(|e| DebiasError::PromptFile(format!("{}: {e}", path.display())))?;
        Self::from_reader(file)
    }

    pub fn from_reader(reader: impl std::io::Read) -> Result<Self, DebiasError> {
        let mut prompts = BTreeMap::new();
        for row in csv::Reader::from_reader(reader).deserialize::<PromptRow>() {
            let row = row.map_err(|e| DebiasError::PromptFile(e.to_string()))?;
            let lang: Language = row.lang.parse().map_err(|e: crate::lang::UnknownLanguage| DebiasError::PromptFile(e.to_string()))?;
            if row.prompt_text.trim().is_empty() {
                return Err(DebiasError::EmptyPrompt);
            }
            prompts.insert(lang, row.prompt_text);
        }
        Ok(Self { prompts })
    }

    pub fn insert(&mut self, lang: Language, prompt: impl Into<String>) {
        self.prompts.insert(lang, prompt.into());
    }

    pub fn get(&self, lang: Language) -> Option<&str> {
        self.prompts.get(&lang).map(String::as_str)
    }

    /// The config a mode implies for inputs in `input_lang`; `None` for [`DebiasMode::None`].
    pub fn config_for(&self, mode: DebiasMode, input_lang: Language) -> Result<Option<DebiasConfig>, DebiasError> {
        let lang = match mode {
            DebiasMode::None => return Ok(None),
            DebiasMode::SdEn => Language::En,
            DebiasMode::SdL => input_lang,
        };
        let prompt = self.get(lang).ok_or(DebiasError::MissingPrompt(lang))?;
        DebiasConfig::new(prompt, lang).map(Some)
    }
}

/// Probabilities over a fixed candidate set for one masked slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateDistribution {
    entries: BTreeMap<String, f64>,
}

impl CandidateDistribution {
    pub fn new(entries: impl IntoIterator<Item = (String, f64)>) -> Result<Self, DebiasError> {
        let entries: BTreeMap<String, f64> = entries.into_iter().collect();
        if let Some((token, prob)) = entries.iter().find(|(_, p)| !(p.is_finite() && **p >= 0.0)) {
            return Err(DebiasError::InvalidProbability {
                token: token.clone(),
                prob: *prob,
            });
        }
        Ok(Self { entries })
    }

    pub fn from_predictions(predictions: &[Prediction]) -> Result<Self, DebiasError> {
        Self::new(predictions.iter().map(|p| (p.token.clone(), p.prob)))
    }

    pub fn get(&self, token: &str) -> Option<f64> {
        self.entries.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(t, p)| (t.as_str(), *p))
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn normalized(&self) -> Result<Self, DebiasError> {
        let total = self.total();
        if total.is_nan() || total <= 0.0 {
            return Err(DebiasError::ZeroMass);
        }
        Ok(Self {
            entries: self.entries.iter().map(|(t, p)| (t.clone(), p / total)).collect(),
        })
    }

    /// The `k` most probable candidates, ties broken by token order.
    pub fn top_k(&self, k: usize) -> Vec<(String, f64)> {
        let mut ranked: Vec<(String, f64)> = self.entries.iter().map(|(t, p)| (t.clone(), *p)).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(k);
        ranked
    }
}

pub fn sdb_input(config: &DebiasConfig, text: &str) -> Result<String, DebiasError> {
    if text.trim().is_empty() {
        return Err(DebiasError::EmptyText);
    }
    Ok(format!("{}{}{}", config.prompt_text, PROMPT_SEPARATOR, text))
}

/// Decay applied to a candidate whose probability changed by `delta = p_plain - p_prompted`.
pub fn scale_factor(delta: f64, config: &DebiasConfig) -> f64 {
    if delta >= 0.0 {
        1.0
    } else {
        (config.decay_lambda * delta).exp().max(config.epsilon)
    }
}

pub fn reweight(
    p_regular: &CandidateDistribution,
    p_biased: &CandidateDistribution,
    config: &DebiasConfig,
) -> Result<CandidateDistribution, DebiasError> {
    if p_regular.len() != p_biased.len() || p_regular.tokens().ne(p_biased.tokens()) {
        return Err(DebiasError::CandidateMismatch);
    }
    let regular = p_regular.normalized()?;
    let biased = p_biased.normalized()?;
    let weighted: Vec<(String, f64)> = regular
        .iter()
        .zip(biased.iter())
        .map(|((token, p), (_, q))| (token.to_string(), scale_factor(p - q, config) * p))
        .collect();
    CandidateDistribution::new(weighted)?.normalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dist(pairs: &[(&str, f64)]) -> CandidateDistribution {
        CandidateDistribution::new(pairs.iter().map(|(t, p)| (t.to_string(), *p))).unwrap()
    }

    #[test]
    fn prompt_is_prepended_with_separator() {
        let out = sdb_input(&DebiasConfig::english(), "Amit likes to {BLANK}").unwrap();
        assert_eq!(
            out,
            "The following text discriminates against people because of their gender: Amit likes to {BLANK}"
        );
        assert_eq!(sdb_input(&DebiasConfig::english(), ""), Err(DebiasError::EmptyText));
    }

    #[test]
    fn hindi_prompt_keeps_language() {
        let cfg = DebiasConfig::new("निम्नलिखित पाठ लोगों के साथ उनके लिंग के कारण भेदभाव करता है", Language::Hi).unwrap();
        let out = sdb_input(&cfg, "अमित को {BLANK} पसंद है").unwrap();
        assert!(out.starts_with(&cfg.prompt_text));
        assert!(out.ends_with("अमित को {BLANK} पसंद है"));
        assert_eq!(cfg.prompt_lang, Language::Hi);
    }

    #[test]
    fn identical_distributions_pass_through() {
        let p = dist(&[("a", 0.2), ("b", 0.5), ("c", 0.3)]);
        let out = reweight(&p, &p, &DebiasConfig::english()).unwrap();
        for (t, prob) in p.iter() {
            assert!((out.get(t).unwrap() - prob).abs() < 1e-15);
        }
    }

    #[test]
    fn large_rise_is_clamped_at_epsilon() {
        let out = reweight(
            &dist(&[("w1", 0.5), ("w2", 0.5)]),
            &dist(&[("w1", 0.6), ("w2", 0.4)]),
            &DebiasConfig::english(),
        )
        .unwrap();
        // weights {0.01 * 0.5, 0.5} -> {1/101, 100/101}
        assert!((out.get("w1").unwrap() - 1.0 / 101.0).abs() < 1e-12);
        assert!((out.get("w2").unwrap() - 100.0 / 101.0).abs() < 1e-12);
    }

    #[test]
    fn small_rise_decays_exponentially() {
        let out = reweight(
            &dist(&[("w1", 0.5), ("w2", 0.5)]),
            &dist(&[("w1", 0.52), ("w2", 0.48)]),
            &DebiasConfig::english(),
        )
        .unwrap();
        let a = (-1.0f64).exp();
        assert!((out.get("w1").unwrap() - a / (1.0 + a)).abs() < 1e-9);
        assert!((out.get("w1").unwrap() - 0.2689).abs() < 5e-5);
        assert!((out.get("w2").unwrap() - 0.7311).abs() < 5e-5);
    }

    #[test]
    fn mismatched_or_empty_sets_error() {
        let cfg = DebiasConfig::english();
        assert_eq!(
            reweight(&dist(&[("a", 1.0)]), &dist(&[("b", 1.0)]), &cfg),
            Err(DebiasError::CandidateMismatch)
        );
        assert_eq!(
            reweight(&dist(&[("a", 0.0)]), &dist(&[("a", 1.0)]), &cfg),
            Err(DebiasError::ZeroMass)
        );
    }

    #[test]
    fn config_validation() {
        assert!(DebiasConfig::new("", Language::En).is_err());
        assert!(DebiasConfig::english().with_decay(50.0, 1.0).is_err());
        assert!(DebiasConfig::english().with_decay(0.0, 0.01).is_err());
    }

    #[test]
    fn prompt_book_selects_by_mode() {
        let book = PromptBook::from_reader("lang,prompt_text\nen,English prompt\nhi,हिंदी\n".as_bytes()).unwrap();
        assert_eq!(book.config_for(DebiasMode::None, Language::Hi).unwrap(), None);
        let en = book.config_for(DebiasMode::SdEn, Language::Hi).unwrap().unwrap();
        assert_eq!(en.prompt_lang, Language::En);
        let hi = book.config_for(DebiasMode::SdL, Language::Hi).unwrap().unwrap();
        assert_eq!(hi.prompt_text, "हिंदी");
        assert_eq!(
            book.config_for(DebiasMode::SdL, Language::Ta),
            Err(DebiasError::MissingPrompt(Language::Ta))
        );
    }

    fn distribution_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..12).prop_flat_map(|n| {
            (
                prop::collection::vec(0.001f64..1.0, n),
                prop::collection::vec(0.001f64..1.0, n),
            )
        })
    }

    fn build(values: &[f64]) -> CandidateDistribution {
        let total: f64 = values.iter().sum();
        CandidateDistribution::new(values.iter().enumerate().map(|(i, v)| (format!("w{i:02}"), v / total))).unwrap()
    }

    proptest! {
        #[test]
        fn output_is_a_distribution_and_never_amplifies((a, b) in distribution_pair()) {
            let cfg = DebiasConfig::english();
            let (p, q) = (build(&a), build(&b));
            let out = reweight(&p, &q, &cfg).unwrap();
            prop_assert!((out.total() - 1.0).abs() < 1e-9);
            for ((_, pr), (_, pb)) in p.iter().zip(q.iter()) {
                let alpha = scale_factor(pr - pb, &cfg);
                prop_assert!(alpha <= 1.0 && alpha >= cfg.epsilon);
            }
        }

        #[test]
        fn undecayed_candidates_keep_their_ratios((a, b) in distribution_pair()) {
            let (p, q) = (build(&a), build(&b));
            let out = reweight(&p, &q, &DebiasConfig::english()).unwrap();
            let kept: Vec<&str> = p.iter().zip(q.iter()).filter(|((_, x), (_, y))| x - y >= 0.0).map(|((t, _), _)| t).collect();
            for pair in kept.windows(2) {
                let before = p.get(pair[0]).unwrap() / p.get(pair[1]).unwrap();
                let after = out.get(pair[0]).unwrap() / out.get(pair[1]).unwrap();
                prop_assert!((before - after).abs() <= 1e-9 * before.max(1.0));
            }
        }

        #[test]
        fn no_rise_keeps_top_k(a in prop::collection::vec(0.001f64..1.0, 2..12), k in 1usize..5) {
            let p = build(&a);
            let out = reweight(&p, &p, &DebiasConfig::english()).unwrap();
            let top = |d: &CandidateDistribution| d.top_k(k).into_iter().map(|(t, _)| t).collect::<Vec<_>>();
            prop_assert_eq!(top(&out), top(&p));
        }

        #[test]
        fn stronger_decay_never_raises_a_suppressed_candidate(rise in 0.0001f64..0.05, l1 in 1.0f64..80.0, extra in 0.0f64..80.0) {
            // Candidate w0 rises by `rise` under the prompt; w1 falls by the same amount.
            let p = build(&[0.5, 0.5]);
            let q = build(&[0.5 + rise, 0.5 - rise]);
            let lo = DebiasConfig::english().with_decay(l1, 1e-6).unwrap();
            let hi = DebiasConfig::english().with_decay(l1 + extra, 1e-6).unwrap();
            let a = reweight(&p, &q, &lo).unwrap().get("w00").unwrap();
            let b = reweight(&p, &q, &hi).unwrap().get("w00").unwrap();
            prop_assert!(b <= a + 1e-15);
        }
    }
}
