use super::swap::segments;
use super::CdaError;
use std::collections::BTreeSet;
use std::path::Path;

pub const DEFAULT_TARGET: usize = 20_000;

/// Lowercase keywords; a keyword may span several words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordSet {
    keywords: BTreeSet<String>,
    pub description: String,
}

impl KeywordSet {
    pub fn new<I, S>(keywords: I, description: impl Into<String>) -> Result<Self, CdaError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let keywords: BTreeSet<String> = keywords
            .into_iter()
            .map(|k| k.as_ref().trim().to_lowercase())
            .filter(|k| !k.is_empty())
            .collect();
        if keywords.is_empty() {
            return Err(CdaError::EmptyKeywords);
        }
        Ok(Self {
            keywords,
            description: description.into(),
        })
    }

    /// One keyword per line; leading `#` lines form the description.
    pub fn load(path: &Path) -> Result<Self, CdaError> {
        let raw = std::fs::read_to_string(path).map_err(|e| CdaError::io(path, e))?;
        Self::parse(&raw)
    }

    pub fn parse(raw: &str) -> Result<Self, CdaError> {
        let mut description = Vec::new();
        let mut keywords = Vec::new();
        for line in raw.lines() {
            if let Some(comment) = line.trim_start().strip_prefix('#') {
                description.push(comment.trim().to_string());
            } else {
                keywords.push(line.to_string());
            }
        }
        Self::new(keywords, description.join(" "))
    }

    pub fn len(&self) -> usize {
        self.keywords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keywords.is_empty()
    }

    /// Whether any keyword occurs in `sentence` on word boundaries, ignoring case.
    pub fn matches(&self, sentence: &str) -> bool {
        let words: Vec<String> = segments(sentence).words().map(str::to_lowercase).collect();
        self.keywords.iter().any(|kw| {
            let kw_words: Vec<&str> = segments(kw).words().collect();
            !kw_words.is_empty() && words.windows(kw_words.len()).any(|w| w.iter().zip(&kw_words).all(|(a, b)| a == b))
        })
    }
}

/// The first `target` sentences, in corpus order, that mention a keyword.
pub fn filter_by_keywords<I, S>(corpus: I, keywords: &KeywordSet, target: usize) -> Result<Vec<String>, CdaError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if target == 0 {
        return Err(CdaError::InvalidTarget);
    }
    if keywords.is_empty() {
        return Err(CdaError::EmptyKeywords);
    }
    Ok(corpus
        .into_iter()
        .filter(|s| keywords.matches(s.as_ref()))
        .take(target)
        .map(|s| s.as_ref().to_string())
        .collect())
}
