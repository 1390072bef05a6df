//! Deterministic in-process model driven by a lookup table.

use super::{
    Backend, FillMaskRequest, FillMaskResponse, GatewayError, HealthResponse, Prediction, ScoreRequest,
    ScoreResponse,
};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Top predictions for any fill-mask text containing `when`.
///
/// `when` of `"*"` or `""` matches every text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillRule {
    pub when: String,
    pub predictions: Vec<(String, f64)>,
}

/// Per-position masked-token probabilities for any score text containing `when`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRule {
    pub when: String,
    pub token_probs: Vec<f64>,
}

/// Serialized form of a mock model. Rules are tried in order; the first match wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockTable {
    pub model_id: String,
    pub fill_mask: Vec<FillRule>,
    pub score: Vec<ScoreRule>,
    /// Fallback for score texts no rule matches: every token gets probability 1/V.
    pub uniform_vocab: Option<usize>,
    /// Probability assigned to a requested candidate absent from the matched rule,
    /// before renormalization over the candidate set.
    pub unknown_prob: f64,
}

impl Default for MockTable {
    fn default() -> Self {
        Self {
            model_id: "mock".into(),
            fill_mask: Vec::new(),
            score: Vec::new(),
            uniform_vocab: None,
            unknown_prob: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MockModel {
    table: MockTable,
}

fn matches(pattern: &str, text: &str) -> bool {
    pattern.is_empty() || pattern == "*" || text.contains(pattern)
}

impl MockModel {
    pub fn from_table(mut table: MockTable) -> Result<Self, GatewayError> {
        let invalid = |msg: String| Err(GatewayError::InvalidTable(msg));
        for rule in &mut table.fill_mask {
            if rule.predictions.is_empty() {
                return invalid(format!("fill rule `{}` has no predictions", rule.when));
            }
            let mut total = 0.0;
            for (tok, p) in &rule.predictions {
                if !(*p > 0.0 && *p <= 1.0) {
                    return invalid(format!("probability {p} for `{tok}` outside (0, 1]"));
                }
                total += p;
            }
            if total > 1.0 + 1e-9 {
                return invalid(format!("fill rule `{}` has total mass {total} > 1", rule.when));
            }
            let mut seen = std::collections::BTreeSet::new();
            if let Some((dup, _)) = rule.predictions.iter().find(|(t, _)| !seen.insert(t.clone())) {
                return invalid(format!("token `{dup}` listed twice in rule `{}`", rule.when));
            }
            rule.predictions
                .sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        }
        for rule in &table.score {
            if let Some(p) = rule.token_probs.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
                return invalid(format!("score rule `{}` has probability {p} outside (0, 1]", rule.when));
            }
        }
        if table.uniform_vocab == Some(0) {
            return invalid("uniform_vocab must be positive".into());
        }
        if !(table.unknown_prob > 0.0 && table.unknown_prob <= 1.0) {
            return invalid(format!("unknown_prob {} outside (0, 1]", table.unknown_prob));
        }
        Ok(Self { table })
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::InvalidTable(format!("{}: {e}", path.display())))?;
        let table: MockTable = serde_json::from_str(&raw)
            .map_err(|e| GatewayError::InvalidTable(format!("{}: {e}", path.display())))?;
        Self::from_table(table)
    }

    pub fn table(&self) -> &MockTable {
        &self.table
    }
}

impl Backend for MockModel {
    fn fill_mask(&self, request: &FillMaskRequest) -> Result<FillMaskResponse, GatewayError> {
        let rule = self
            .table
            .fill_mask
            .iter()
            .find(|r| matches(&r.when, &request.text))
            .ok_or_else(|| GatewayError::NoMockEntry(request.text.clone()))?;

        let predictions = match &request.candidates {
            None => rule
                .predictions
                .iter()
                .take(request.top_k)
                .map(|(t, p)| Prediction::new(t.clone(), *p))
                .collect(),
            Some(cands) => {
                let raw: Vec<(String, f64)> = cands
                    .iter()
                    .map(|c| {
                        let p = rule
                            .predictions
                            .iter()
                            .find(|(t, _)| t == c)
                            .map_or(self.table.unknown_prob, |(_, p)| *p);
                        (c.clone(), p)
                    })
                    .collect();
                let mass: f64 = raw.iter().map(|(_, p)| p).sum();
                let mut preds: Vec<Prediction> =
                    raw.into_iter().map(|(t, p)| Prediction::new(t, p / mass)).collect();
                preds.sort_by(|a, b| b.prob.total_cmp(&a.prob).then_with(|| a.token.cmp(&b.token)));
                preds
            }
        };
        Ok(FillMaskResponse {
            model_id: self.table.model_id.clone(),
            predictions,
        })
    }

    fn score(&self, request: &ScoreRequest) -> Result<ScoreResponse, GatewayError> {
        let tokens: Vec<String> = request.text.split_whitespace().map(str::to_string).collect();
        let probs = match self.table.score.iter().find(|r| matches(&r.when, &request.text)) {
            Some(rule) => {
                if rule.token_probs.len() != tokens.len() {
                    return Err(GatewayError::InvalidTable(format!(
                        "score rule `{}` has {} positions but `{}` has {} tokens",
                        rule.when,
                        rule.token_probs.len(),
                        request.text,
                        tokens.len()
                    )));
                }
                rule.token_probs.clone()
            }
            None => match self.table.uniform_vocab {
                Some(v) => vec![1.0 / v as f64; tokens.len()],
                None => return Err(GatewayError::NoMockEntry(request.text.clone())),
            },
        };
        Ok(ScoreResponse {
            model_id: self.table.model_id.clone(),
            tokens,
            log_probs: probs.iter().map(|p| p.ln()).collect(),
        })
    }

    fn health(&self) -> Result<HealthResponse, GatewayError> {
        Ok(HealthResponse {
            model_id: self.table.model_id.clone(),
            ok: true,
        })
    }
}
