use super::CdaError;
use crate::disco::NamePair;
use crate::lang::Language;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermPair {
    pub male_form: String,
    pub female_form: String,
}

impl TermPair {
    pub fn new(male_form: impl Into<String>, female_form: impl Into<String>) -> Result<Self, CdaError> {
        let (male_form, female_form) = (male_form.into(), female_form.into());
        if male_form.trim().is_empty() || female_form.trim().is_empty() {
            return Err(CdaError::InvalidTermPair(format!("({male_form}, {female_form}): empty form")));
        }
        if male_form.to_lowercase() == female_form.to_lowercase() {
            return Err(CdaError::InvalidTermPair(format!("({male_form}, {female_form}): forms are identical")));
        }
        Ok(Self { male_form, female_form })
    }
}

/// Reads a `male_form,female_form` CSV.
pub fn load_term_pairs(path: &Path) -> Result<Vec<TermPair>, CdaError> {
    let file = std::fs::File::open(path).map_err(|e| CdaError::io(path, e))?;
    read_term_pairs(file)
}

pub fn read_term_pairs(reader: impl std::io::Read) -> Result<Vec<TermPair>, CdaError> {
    #[derive(Deserialize)]
    struct Row {
        male_form: String,
        female_form: String,
    }
    let mut out = Vec::new();
    for row in csv::Reader::from_reader(reader).deserialize::<Row>() {
        let row = row.map_err(|e| CdaError::Parse(e.to_string()))?;
        out.push(TermPair::new(row.male_form.trim(), row.female_form.trim())?);
    }
    Ok(out)
}

/// A lowercase, involutive token replacement relation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SwapMap {
    mapping: BTreeMap<String, String>,
}

impl SwapMap {
    fn insert_pair(&mut self, a: &str, b: &str) -> Result<(), CdaError> {
        let (a, b) = (a.to_lowercase(), b.to_lowercase());
        if a == b {
            return Err(CdaError::InvalidTermPair(format!("`{a}` cannot swap with itself")));
        }
        for (key, want) in [(&a, &b), (&b, &a)] {
            if let Some(existing) = self.mapping.get(key) {
                if existing != want {
                    return Err(CdaError::Conflict {
                        token: key.clone(),
                        existing: existing.clone(),
                        new: want.clone(),
                    });
                }
            }
        }
        self.mapping.insert(a.clone(), b.clone());
        self.mapping.insert(b, a);
        Ok(())
    }

    pub fn get(&self, token: &str) -> Option<&str> {
        self.mapping.get(&token.to_lowercase()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.mapping.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// Unions term pairs and name pairs into one bidirectional map.
pub fn build_swap_map(terms: &[TermPair], names: &[NamePair]) -> Result<SwapMap, CdaError> {
    let mut map = SwapMap::default();
    for t in terms {
        map.insert_pair(&t.male_form, &t.female_form)?;
    }
    for n in names {
        map.insert_pair(&n.male, &n.female)?;
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterfactualRecord {
    pub original: String,
    pub counterfactual: String,
    /// `(word index, original surface form, replacement)`.
    pub substitutions: Vec<(usize, String, String)>,
    pub lang: Language,
}

impl CounterfactualRecord {
    /// Rebuilds the counterfactual from the original and the substitution list.
    pub fn replay(&self) -> Option<String> {
        let mut subs = self.substitutions.iter().peekable();
        let mut out = String::with_capacity(self.original.len());
        for (idx, seg) in segments(&self.original).enumerate_words() {
            match (idx, subs.peek()) {
                (Some(i), Some((pos, from, to))) if i == *pos => {
                    if seg.text != from {
                        return None;
                    }
                    out.push_str(to);
                    subs.next();
                }
                _ => out.push_str(seg.text),
            }
        }
        subs.next().is_none().then_some(out)
    }
}

pub(crate) struct Segment<'a> {
    pub text: &'a str,
    pub is_word: bool,
}

pub(crate) struct Segments<'a>(Vec<Segment<'a>>);

impl<'a> Segments<'a> {
    /// Pairs every segment with its word index (None for separators).
    pub fn enumerate_words(self) -> impl Iterator<Item = (Option<usize>, Segment<'a>)> {
        let mut n = 0;
        self.0.into_iter().map(move |s| {
            if s.is_word {
                n += 1;
                (Some(n - 1), s)
            } else {
                (None, s)
            }
        })
    }

    pub fn words(&self) -> impl Iterator<Item = &'a str> + '_ {
        self.0.iter().filter(|s| s.is_word).map(|s| s.text)
    }
}

fn is_separator(c: char) -> bool {
    c.is_whitespace()
        || c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}'..='\u{201F}' | '\u{2010}'..='\u{2015}' | '\u{2026}' | '\u{00AB}' | '\u{00BB}' | '\u{00A1}' | '\u{00BF}' | '\u{0964}' | '\u{0965}'
        )
}

/// Splits on whitespace and punctuation, keeping separators so the text can be rebuilt.
pub(crate) fn segments(text: &str) -> Segments<'_> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut in_word: Option<bool> = None;
    for (i, c) in text.char_indices() {
        let word = !is_separator(c);
        match in_word {
            Some(prev) if prev == word && word => {}
            Some(_) => {
                out.push(Segment {
                    text: &text[start..i],
                    is_word: in_word == Some(true),
                });
                start = i;
            }
            None => {}
        }
        in_word = Some(word);
    }
    if let Some(word) = in_word {
        out.push(Segment {
            text: &text[start..],
            is_word: word,
        });
    }
    Segments(out)
}

fn match_case(source: &str, replacement: &str) -> String {
    let upper_first = source.chars().next().is_some_and(char::is_uppercase);
    if !upper_first {
        return replacement.to_string();
    }
    let mut chars = replacement.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Swaps every gendered word in one pass; `None` when nothing matched.
pub fn generate_counterfactual(sentence: &str, map: &SwapMap, lang: Language) -> Option<CounterfactualRecord> {
    let mut out = String::with_capacity(sentence.len());
    let mut substitutions = Vec::new();
    for (idx, seg) in segments(sentence).enumerate_words() {
        let replacement = idx.and_then(|_| map.get(seg.text));
        match (idx, replacement) {
            (Some(i), Some(to)) => {
                let to = match_case(seg.text, to);
                out.push_str(&to);
                substitutions.push((i, seg.text.to_string(), to));
            }
            _ => out.push_str(seg.text),
        }
    }
    if substitutions.is_empty() {
        return None;
    }
    Some(CounterfactualRecord {
        original: sentence.to_string(),
        counterfactual: out,
        substitutions,
        lang,
    })
}

/// Counterfactuals for a corpus, in corpus order; sentences without gendered words are dropped.
pub fn generate_corpus(sentences: &[String], map: &SwapMap, lang: Language) -> Vec<CounterfactualRecord> {
    sentences
        .par_iter()
        .filter_map(|s| generate_counterfactual(s, map, lang))
        .collect()
}
