use super::{instantiate, DiscoError, NamePair, Template};
use crate::debias::{reweight, sdb_input, CandidateDistribution, DebiasConfig, DebiasMode};
use crate::gateway::{FillMaskRequest, Gateway, GatewayError};
use crate::lang::Language;
use crate::stats::{chi_square_uniform2, disco_score, pooled_disco_score, TemplateSignificance};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_CANDIDATE_POOL: usize = 20;

const SUBWORD_PREFIXES: [&str; 3] = ["\u{2581}", "\u{120}", "##"];

/// How per-template significance tallies become one score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Mean over templates of rejected/total.
    #[default]
    PerTemplate,
    /// Rejected over total, summed across all templates.
    Pooled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscoOptions {
    pub k: usize,
    /// Candidate words seen fewer times than this (both genders together) are not tested.
    pub min_count: u64,
    pub aggregation: Aggregation,
    pub debias_mode: DebiasMode,
    pub debias: Option<DebiasConfig>,
    /// How many plain top predictions form the candidate set that self-debiasing reranks.
    pub candidate_pool: usize,
}

impl Default for DiscoOptions {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            min_count: 0,
            aggregation: Aggregation::PerTemplate,
            debias_mode: DebiasMode::None,
            debias: None,
            candidate_pool: DEFAULT_CANDIDATE_POOL,
        }
    }
}

impl DiscoOptions {
    pub fn with_k(k: usize) -> Self {
        Self { k, ..Self::default() }
    }

    pub fn with_debias(mut self, mode: DebiasMode, config: Option<DebiasConfig>) -> Self {
        self.debias_mode = mode;
        self.debias = config;
        self
    }

    fn validate(&self) -> Result<(), DiscoError> {
        if self.k == 0 {
            return Err(DiscoError::InvalidOptions("k must be at least 1".into()));
        }
        if (self.debias_mode == DebiasMode::None) != self.debias.is_none() {
            return Err(DiscoError::InvalidOptions(format!(
                "debias mode `{}` does not match the supplied debias config",
                self.debias_mode.as_str()
            )));
        }
        if self.debias.is_some() && self.candidate_pool < self.k {
            return Err(DiscoError::InvalidOptions("candidate pool smaller than k".into()));
        }
        Ok(())
    }
}

/// Male and female occurrence counts of every candidate word predicted for one template.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FillTally {
    pub template_id: String,
    pub counts: BTreeMap<String, (u64, u64)>,
}

impl FillTally {
    fn significance(&self, min_count: u64) -> Result<TemplateSignificance, DiscoError> {
        let mut rejected = 0;
        let mut total = 0;
        for &(m, f) in self.counts.values() {
            if m + f < min_count.max(1) {
                continue;
            }
            total += 1;
            if chi_square_uniform2(m, f)?.rejected {
                rejected += 1;
            }
        }
        Ok(TemplateSignificance::new(self.template_id.clone(), rejected, total)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoReport {
    pub lang: Language,
    pub score: f64,
    pub per_template: Vec<TemplateSignificance>,
    pub k: usize,
    pub model_id: String,
    pub debias_mode: DebiasMode,
    pub aggregation: Aggregation,
    pub min_count: u64,
    pub name_pairs: usize,
}

/// Strips tokenizer word-start markers so `▁cook`, `Ġcook` and `cook` tally together.
pub fn normalize_token(raw: &str) -> String {
    let mut t = raw.trim();
    for prefix in SUBWORD_PREFIXES {
        if let Some(rest) = t.strip_prefix(prefix) {
            t = rest;
            break;
        }
    }
    let t = t.trim();
    if t.is_empty() {
        raw.trim().to_string()
    } else {
        t.to_string()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Gender {
    Male,
    Female,
}

struct Job<'a> {
    template: usize,
    gender: Gender,
    text: &'a str,
}

struct Filled {
    template: usize,
    gender: Gender,
    model_id: String,
    tokens: Vec<String>,
}

fn model_err(text: &str) -> impl FnOnce(GatewayError) -> DiscoError + '_ {
    move |source| DiscoError::Model {
        text: text.to_string(),
        source,
    }
}

fn predict(model: &Gateway, text: &str, opts: &DiscoOptions) -> Result<(String, Vec<String>), DiscoError> {
    let short = |got: usize| DiscoError::ShortPrediction {
        text: text.to_string(),
        got,
        expected: opts.k,
    };
    match &opts.debias {
        None => {
            let resp = model
                .fill_mask(&FillMaskRequest::top_k(text, opts.k))
                .map_err(model_err(text))?;
            if resp.predictions.len() != opts.k {
                return Err(short(resp.predictions.len()));
            }
            let tokens = resp.predictions.iter().map(|p| normalize_token(&p.token)).collect();
            Ok((resp.model_id, tokens))
        }
        Some(config) => {
            let plain = model
                .fill_mask(&FillMaskRequest::top_k(text, opts.candidate_pool))
                .map_err(model_err(text))?;
            if plain.predictions.len() < opts.k {
                return Err(short(plain.predictions.len()));
            }
            let regular = CandidateDistribution::from_predictions(&plain.predictions)?.normalized()?;
            let prompted_text = sdb_input(config, text)?;
            let candidates: Vec<String> = regular.tokens().map(str::to_string).collect();
            let prompted = model
                .fill_mask(&FillMaskRequest::candidates(prompted_text.as_str(), candidates))
                .map_err(model_err(&prompted_text))?;
            if prompted.model_id != plain.model_id {
                return Err(DiscoError::ModelIdChanged(plain.model_id, prompted.model_id));
            }
            let biased = CandidateDistribution::from_predictions(&prompted.predictions)?;
            let debiased = reweight(&regular, &biased, config)?;
            let tokens = debiased
                .top_k(opts.k)
                .into_iter()
                .map(|(t, _)| normalize_token(&t))
                .collect();
            Ok((plain.model_id, tokens))
        }
    }
}

/// Runs DisCo for one language.
///
/// Every (template, name pair) instantiation is sent to the model in both
/// gendered forms; each of the top-k predictions counts once toward its
/// gender. A candidate word is biased for a template when its male/female
/// counts fail the chi-squared equal-rate test.
pub fn evaluate_disco(
    templates: &[Template],
    pairs: &[NamePair],
    model: &Gateway,
    opts: &DiscoOptions,
) -> Result<DiscoReport, DiscoError> {
    opts.validate()?;
    let first = templates.first().ok_or(DiscoError::NoTemplates)?;
    if pairs.is_empty() {
        return Err(DiscoError::NoNamePairs);
    }
    let lang = first.lang;
    let mut langs: Vec<Language> = templates.iter().map(|t| t.lang).chain(pairs.iter().map(|p| p.lang)).collect();
    langs.sort();
    langs.dedup();
    if langs.len() > 1 {
        let names: Vec<&str> = langs.iter().map(|l| l.code()).collect();
        return Err(DiscoError::MixedLanguages(names.join(", ")));
    }
    for t in templates {
        t.validate()?;
    }

    let mut sentences = Vec::with_capacity(templates.len() * pairs.len());
    for (ti, template) in templates.iter().enumerate() {
        for pair in pairs {
            let (male, female) = instantiate(template, pair)?;
            sentences.push((ti, male, female));
        }
    }
    let jobs: Vec<Job<'_>> = sentences
        .iter()
        .flat_map(|(ti, male, female)| {
            [
                Job {
                    template: *ti,
                    gender: Gender::Male,
                    text: male.as_str(),
                },
                Job {
                    template: *ti,
                    gender: Gender::Female,
                    text: female.as_str(),
                },
            ]
        })
        .collect();

    let filled: Vec<Filled> = jobs
        .par_iter()
        .map(|job| {
            predict(model, job.text, opts).map(|(model_id, tokens)| Filled {
                template: job.template,
                gender: job.gender,
                model_id,
                tokens,
            })
        })
        .collect::<Result<_, _>>()?;

    let model_id = filled[0].model_id.clone();
    let mut tallies: Vec<FillTally> = templates
        .iter()
        .map(|t| FillTally {
            template_id: t.id.clone(),
            counts: BTreeMap::new(),
        })
        .collect();
    for f in &filled {
        if f.model_id != model_id {
            return Err(DiscoError::ModelIdChanged(model_id, f.model_id.clone()));
        }
        let counts = &mut tallies[f.template].counts;
        for token in &f.tokens {
            let entry = counts.entry(token.clone()).or_insert((0, 0));
            match f.gender {
                Gender::Male => entry.0 += 1,
                Gender::Female => entry.1 += 1,
            }
        }
    }

    let per_template = tallies
        .iter()
        .map(|t| t.significance(opts.min_count))
        .collect::<Result<Vec<_>, _>>()?;
    let score = match opts.aggregation {
        Aggregation::PerTemplate => disco_score(&per_template)?,
        Aggregation::Pooled => pooled_disco_score(&per_template)?,
    };

    Ok(DiscoReport {
        lang,
        score,
        per_template,
        k: opts.k,
        model_id,
        debias_mode: opts.debias_mode,
        aggregation: opts.aggregation,
        min_count: opts.min_count,
        name_pairs: pairs.len(),
    })
}

/// Tallies for inspection; same counting rule as [`evaluate_disco`] without debiasing.
pub fn tally_predictions(
    templates: &[Template],
    pairs: &[NamePair],
    model: &Gateway,
    k: usize,
) -> Result<Vec<FillTally>, DiscoError> {
    let opts = DiscoOptions::with_k(k);
    let mut out = Vec::with_capacity(templates.len());
    for template in templates {
        let mut counts = BTreeMap::new();
        for pair in pairs {
            let (male, female) = instantiate(template, pair)?;
            for (text, is_male) in [(male, true), (female, false)] {
                let (_, tokens) = predict(model, &text, &opts)?;
                for token in tokens {
                    let e: &mut (u64, u64) = counts.entry(token).or_default();
                    if is_male {
                        e.0 += 1;
                    } else {
                        e.1 += 1;
                    }
                }
            }
        }
        out.push(FillTally {
            template_id: template.id.clone(),
            counts,
        });
    }
    Ok(out)
}
