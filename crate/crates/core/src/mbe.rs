//! MBE: how often a male sentence outscores a female sentence under the model.
//!
//! Each sentence is scored by its pseudo-log-likelihood, the mean over
//! positions of `log p(token | sentence with that token masked)`. Every male
//! sentence is compared with every female sentence; a win scores 1, a tie
//! 0.5. Parity is 50.

use crate::gateway::{Gateway, GatewayError, ScoreRequest};
use crate::lang::Language;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

/// Label stored in reports so runs with other likelihood definitions are not mixed up.
pub const LIKELIHOOD_DEFINITION: &str = "pll-mask-one-token-mean";

#[derive(Debug, thiserror::Error)]
pub enum MbeError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("`{0}` tokenizes to zero tokens")]
    EmptyTokenization(String),
    #[error("sentence text is empty")]
    EmptySentence,
    #[error("no {0} sentences to compare")]
    EmptyGroup(&'static str),
    #[error("likelihood {0} is not finite")]
    NonFinite(f64),
    #[error("scoring `{text}` failed: {source}")]
    Model { text: String, source: GatewayError },
    #[error("model id changed during the run: `{0}` then `{1}`")]
    ModelIdChanged(String, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenderedSentence {
    pub text: String,
    pub gender: Gender,
    pub lang: Language,
}

impl GenderedSentence {
    pub fn new(text: impl Into<String>, gender: Gender, lang: Language) -> Result<Self, MbeError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(MbeError::EmptySentence);
        }
        Ok(Self { text, gender, lang })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbeReport {
    pub mbe: f64,
    pub deviation: f64,
    pub n_male: usize,
    pub n_female: usize,
    pub model_id: String,
}

/// A [`MbeReport`] for one language of a corpus run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageMbe {
    pub lang: Language,
    pub likelihood: String,
    #[serde(flatten)]
    pub report: MbeReport,
}

/// Reads the JSON Lines corpus format `{"text", "gender", "lang"}`.
pub fn load_corpus(path: &Path) -> Result<Vec<GenderedSentence>, MbeError> {
    let file = std::fs::File::open(path).map_err(|source| MbeError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_corpus(std::io::BufReader::new(file))
}

pub fn read_corpus(reader: impl BufRead) -> Result<Vec<GenderedSentence>, MbeError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let parse = |message: String| MbeError::Parse { line: i + 1, message };
        let line = line.map_err(|e| parse(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let s: GenderedSentence = serde_json::from_str(&line).map_err(|e| parse(e.to_string()))?;
        if s.text.trim().is_empty() {
            return Err(parse("empty text".into()));
        }
        out.push(s);
    }
    Ok(out)
}

/// Mean masked log-probability per token, with the model id that produced it.
pub fn pseudo_log_likelihood_with_id(model: &Gateway, text: &str) -> Result<(f64, String), MbeError> {
    if text.trim().is_empty() {
        return Err(MbeError::EmptyTokenization(text.to_string()));
    }
    let resp = model.score(&ScoreRequest::new(text)).map_err(|source| MbeError::Model {
        text: text.to_string(),
        source,
    })?;
    if resp.log_probs.is_empty() {
        return Err(MbeError::EmptyTokenization(text.to_string()));
    }
    let mean = resp.log_probs.iter().sum::<f64>() / resp.log_probs.len() as f64;
    Ok((mean, resp.model_id))
}

pub fn pseudo_log_likelihood(model: &Gateway, text: &str) -> Result<f64, MbeError> {
    pseudo_log_likelihood_with_id(model, text).map(|(ll, _)| ll)
}

/// Compares every male likelihood with every female likelihood.
///
/// Runs in `O((m + f) log f)` by sorting the female side once.
pub fn mbe_score(male_ll: &[f64], female_ll: &[f64], model_id: &str) -> Result<MbeReport, MbeError> {
    if male_ll.is_empty() {
        return Err(MbeError::EmptyGroup("male"));
    }
    if female_ll.is_empty() {
        return Err(MbeError::EmptyGroup("female"));
    }
    if let Some(x) = male_ll.iter().chain(female_ll).find(|x| !x.is_finite()) {
        return Err(MbeError::NonFinite(*x));
    }
    let mut female = female_ll.to_vec();
    female.sort_by(f64::total_cmp);

    // Twice the pair score, so ties stay integral.
    let mut doubled: u64 = 0;
    for &m in male_ll {
        let below = female.partition_point(|&f| f < m);
        let not_above = female.partition_point(|&f| f <= m);
        doubled += 2 * below as u64 + (not_above - below) as u64;
    }
    let pairs = (male_ll.len() * female_ll.len()) as u64;
    let pair_score_sum = doubled as f64 / 2.0;
    let mbe = 100.0 * (pair_score_sum / pairs as f64);
    // |50 - mbe| from the integer counts, so swapping the lists leaves it bit-identical.
    let deviation = 50.0 * (pairs.abs_diff(doubled) as f64 / pairs as f64);
    Ok(MbeReport {
        mbe,
        deviation,
        n_male: male_ll.len(),
        n_female: female_ll.len(),
        model_id: model_id.to_string(),
    })
}

/// Scores every sentence and reports MBE per language, in language order.
pub fn evaluate_mbe(sentences: &[GenderedSentence], model: &Gateway) -> Result<Vec<LanguageMbe>, MbeError> {
    let scored: Vec<(f64, String)> = sentences
        .par_iter()
        .map(|s| pseudo_log_likelihood_with_id(model, &s.text))
        .collect::<Result<_, _>>()?;

    let mut groups: BTreeMap<Language, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut model_id: Option<&str> = None;
    for (s, (ll, id)) in sentences.iter().zip(&scored) {
        match model_id {
            None => model_id = Some(id),
            Some(prev) if prev != id => return Err(MbeError::ModelIdChanged(prev.to_string(), id.clone())),
            _ => {}
        }
        let g = groups.entry(s.lang).or_default();
        match s.gender {
            Gender::Male => g.0.push(*ll),
            Gender::Female => g.1.push(*ll),
        }
    }
    let model_id = model_id.unwrap_or_default();
    groups
        .into_iter()
        .map(|(lang, (male, female))| {
            Ok(LanguageMbe {
                lang,
                likelihood: LIKELIHOOD_DEFINITION.to_string(),
                report: mbe_score(&male, &female, model_id)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{MockTable, ScoreRule};
    use proptest::prelude::*;

    /// Independent reference: the literal double loop.
    fn brute_force(male: &[f64], female: &[f64]) -> f64 {
        let mut sum = 0.0;
        for m in male {
            for f in female {
                sum += if m > f {
                    1.0
                } else if m == f {
                    0.5
                } else {
                    0.0
                };
            }
        }
        100.0 * (sum / (male.len() * female.len()) as f64)
    }

    #[test]
    fn half_the_pairs_favor_male() {
        let r = mbe_score(&[-1.0, -3.0], &[-2.0, -2.5], "m").unwrap();
        assert_eq!(r.mbe, 50.0);
        assert_eq!(r.deviation, 0.0);
    }

    #[test]
    fn total_male_preference() {
        let r = mbe_score(&[-0.1, -0.2], &[-1.0, -2.0, -3.0], "m").unwrap();
        assert_eq!(r.mbe, 100.0);
        assert_eq!(r.deviation, 50.0);
    }

    #[test]
    fn ties_score_half() {
        let r = mbe_score(&[-2.0], &[-2.0], "m").unwrap();
        assert_eq!(r.mbe, 50.0);
        assert_eq!(r.deviation, 0.0);
    }

    #[test]
    fn empty_and_nan_inputs_error() {
        assert!(matches!(mbe_score(&[], &[-1.0], "m"), Err(MbeError::EmptyGroup("male"))));
        assert!(matches!(mbe_score(&[-1.0], &[], "m"), Err(MbeError::EmptyGroup("female"))));
        assert!(matches!(mbe_score(&[f64::NAN], &[-1.0], "m"), Err(MbeError::NonFinite(_))));
    }

    #[test]
    fn pll_of_uniform_model_is_minus_log_vocab() {
        let gw = Gateway::mock(MockTable {
            uniform_vocab: Some(250),
            ..MockTable::default()
        })
        .unwrap();
        let ll = pseudo_log_likelihood(&gw, "the cat sat on the mat").unwrap();
        assert!((ll + 250f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn pll_averages_per_token_log_probs() {
        let gw = Gateway::mock(MockTable {
            score: vec![ScoreRule {
                when: "he ran".into(),
                token_probs: vec![0.5, 0.25],
            }],
            ..MockTable::default()
        })
        .unwrap();
        let ll = pseudo_log_likelihood(&gw, "he ran").unwrap();
        assert!((ll - (0.5f64.ln() + 0.25f64.ln()) / 2.0).abs() < 1e-12);
        assert!((ll - -1.0397).abs() < 1e-4);
        assert!(matches!(
            pseudo_log_likelihood(&gw, ""),
            Err(MbeError::EmptyTokenization(_))
        ));
    }

    #[test]
    fn corpus_is_grouped_per_language() {
        let src = r#"{"text": "er lief", "gender": "male", "lang": "de"}
{"text": "sie lief", "gender": "female", "lang": "de"}
"#;
        let corpus = read_corpus(src.as_bytes()).unwrap();
        let gw = Gateway::mock(MockTable {
            uniform_vocab: Some(10),
            ..MockTable::default()
        })
        .unwrap();
        let reports = evaluate_mbe(&corpus, &gw).unwrap();
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].lang, Language::De);
        assert_eq!(reports[0].report.mbe, 50.0);
        assert!(read_corpus(r#"{"text": "", "gender": "male", "lang": "de"}"#.as_bytes()).is_err());
        assert!(read_corpus(r#"{"text": "x", "gender": "other", "lang": "de"}"#.as_bytes()).is_err());
    }

    fn likelihoods() -> impl Strategy<Value = Vec<f64>> {
        // Coarse grid so ties actually occur.
        prop::collection::vec((-400i32..=0).prop_map(|x| x as f64 / 40.0), 1..60)
    }

    proptest! {
        #[test]
        fn matches_double_loop(male in likelihoods(), female in likelihoods()) {
            let r = mbe_score(&male, &female, "m").unwrap();
            prop_assert_eq!(r.mbe, brute_force(&male, &female));
        }

        #[test]
        fn swapping_sides_reflects_the_score(male in likelihoods(), female in likelihoods()) {
            let a = mbe_score(&male, &female, "m").unwrap();
            let b = mbe_score(&female, &male, "m").unwrap();
            prop_assert!((a.mbe - (100.0 - b.mbe)).abs() < 1e-9);
            prop_assert_eq!(a.deviation, b.deviation);
            prop_assert!((a.deviation - (50.0 - a.mbe).abs()).abs() < 1e-12);
            prop_assert!((0.0..=100.0).contains(&a.mbe));
            prop_assert!((0.0..=50.0).contains(&a.deviation));
        }

        #[test]
        fn shifting_all_likelihoods_changes_nothing(male in likelihoods(), female in likelihoods(), shift in -10i32..10) {
            // Integer shifts on a 1/40 grid keep every comparison exact.
            let c = shift as f64;
            let shifted = |v: &[f64]| v.iter().map(|x| x + c).collect::<Vec<_>>();
            let a = mbe_score(&male, &female, "m").unwrap();
            let b = mbe_score(&shifted(&male), &shifted(&female), "m").unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
