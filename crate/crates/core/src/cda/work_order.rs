use super::swap::CounterfactualRecord;
use super::CdaError;
use crate::lang::Language;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// One line of a translation work order; responses use the same shape with translated text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationItem {
    pub id: String,
    pub text: String,
    pub target_lang: Language,
}

/// Both halves of every augmented pair, once per target language.
///
/// Ids are `<record index>-<o|c>-<lang>` so responses can be matched back.
pub fn translation_orders(records: &[CounterfactualRecord], targets: &[Language]) -> Vec<TranslationItem> {
    let mut out = Vec::with_capacity(records.len() * 2 * targets.len());
    for &lang in targets {
        for (i, r) in records.iter().enumerate() {
            for (tag, text) in [("o", &r.original), ("c", &r.counterfactual)] {
                out.push(TranslationItem {
                    id: format!("{i:06}-{tag}-{lang}"),
                    text: text.clone(),
                    target_lang: lang,
                });
            }
        }
    }
    out
}

/// Groups translated text per language, in order-file order.
///
/// Every order must have exactly one response with the same id and target language.
pub fn assemble_translations(
    orders: &[TranslationItem],
    responses: &[TranslationItem],
) -> Result<BTreeMap<Language, Vec<String>>, CdaError> {
    let mut by_id: BTreeMap<&str, &TranslationItem> = BTreeMap::new();
    for r in responses {
        if by_id.insert(r.id.as_str(), r).is_some() {
            return Err(CdaError::WorkOrder(format!("duplicate response id `{}`", r.id)));
        }
    }
    let order_ids: BTreeSet<&str> = orders.iter().map(|o| o.id.as_str()).collect();
    if let Some(extra) = by_id.keys().find(|id| !order_ids.contains(*id)) {
        return Err(CdaError::WorkOrder(format!("response `{extra}` matches no order")));
    }
    let mut out: BTreeMap<Language, Vec<String>> = BTreeMap::new();
    for o in orders {
        let r = by_id
            .get(o.id.as_str())
            .ok_or_else(|| CdaError::WorkOrder(format!("no response for `{}`", o.id)))?;
        if r.target_lang != o.target_lang {
            return Err(CdaError::WorkOrder(format!(
                "`{}` ordered in {} but answered in {}",
                o.id, o.target_lang, r.target_lang
            )));
        }
        out.entry(o.target_lang).or_default().push(r.text.clone());
    }
    Ok(out)
}
