use crate::args::*;
use crate::error::CliError;
use crate::provenance::{Inputs, Outputs};
use biaslens_core::cda::{
    assemble_translations, build_swap_map, compose_manifest, filter_by_keywords, generate_corpus, pair_names_greedy,
    read_name_list, read_term_pairs, translation_orders, CdaSetup, DatasetCatalog, KeywordSet, NameMatch,
    TranslationItem,
};
use biaslens_core::debias::{DebiasConfig, DebiasMode, PromptBook, ENGLISH_PROMPT};
use biaslens_core::disco::{evaluate_disco, read_name_pairs, read_templates, DiscoOptions, DiscoReport, NamePair};
use biaslens_core::gateway::{run_conformance, EndpointConfig, Gateway, HttpBackend};
use biaslens_core::mbe::{evaluate_mbe, read_corpus, LIKELIHOOD_DEFINITION};
use biaslens_core::report::{ResultRow, ResultTable};
use biaslens_core::Language;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

fn open_gateway(e: &EndpointArgs) -> Result<Gateway, CliError> {
    Ok(Gateway::open(&e.endpoint, timeout(e)?, e.retries)?)
}

fn timeout(e: &EndpointArgs) -> Result<Duration, CliError> {
    if !(e.timeout_s.is_finite() && e.timeout_s > 0.0) {
        return Err(CliError::Usage(format!("timeout must be a positive number of seconds, got {}", e.timeout_s)));
    }
    Ok(Duration::from_secs_f64(e.timeout_s))
}

fn table_json(table: &ResultTable) -> Result<serde_json::Value, CliError> {
    Ok(serde_json::from_str(&table.to_json()?)?)
}

fn jsonl<T: Serialize>(items: &[T]) -> Result<String, CliError> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    Ok(out)
}

fn read_jsonl<T: serde::de::DeserializeOwned>(raw: &str, what: &str) -> Result<Vec<T>, CliError> {
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::Usage(format!("{what} line {}: {e}", i + 1)))
        })
        .collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Serialize)]
struct DiscoRunConfig<'a> {
    k: usize,
    min_count: u64,
    aggregation: biaslens_core::disco::Aggregation,
    debias_mode: DebiasMode,
    candidate_pool: Option<usize>,
    debias: BTreeMap<Language, DebiasConfig>,
    languages: &'a [Language],
    model_id: &'a str,
    inputs: &'a Inputs,
}

#[derive(Serialize)]
struct DiscoRun<'a> {
    command: &'static str,
    config: DiscoRunConfig<'a>,
    results: &'a [DiscoReport],
    table: serde_json::Value,
}

fn default_method(mode: DebiasMode) -> &'static str {
    match mode {
        DebiasMode::None => "OOB",
        DebiasMode::SdEn => "SD-en",
        DebiasMode::SdL => "SD-l",
    }
}

pub fn eval_disco(a: &EvalDiscoArgs, inputs: &mut Inputs, out: &mut Outputs) -> Result<(), CliError> {
    let templates = read_templates(inputs.read("templates", &a.templates)?.as_slice())?;
    let names = read_name_pairs(inputs.read("names", &a.names)?.as_slice())?;
    let prompts = match &a.prompts {
        Some(p) => PromptBook::from_reader(inputs.read("prompts", p)?.as_slice())?,
        None if a.debias == DebiasMode::SdL => {
            return Err(CliError::Usage("--debias sd-l needs --prompts".into()));
        }
        None => {
            let mut book = PromptBook::default();
            book.insert(Language::En, ENGLISH_PROMPT);
            book
        }
    };
    let langs: Vec<Language> = if a.langs.is_empty() {
        templates.iter().map(|t| t.lang).collect::<BTreeSet<_>>().into_iter().collect()
    } else {
        a.langs.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    };

    let gateway = open_gateway(&a.endpoint)?;
    let mut results = Vec::with_capacity(langs.len());
    let mut debias = BTreeMap::new();
    for &lang in &langs {
        let ts: Vec<_> = templates.iter().filter(|t| t.lang == lang).cloned().collect();
        if ts.is_empty() {
            return Err(CliError::Usage(format!("no templates for language {lang}")));
        }
        let ps: Vec<NamePair> = names.iter().filter(|p| p.lang == lang).cloned().collect();
        let config = prompts.config_for(a.debias, lang)?;
        if let Some(c) = &config {
            debias.insert(lang, c.clone());
        }
        let opts = DiscoOptions {
            k: a.k,
            min_count: a.min_count,
            aggregation: a.aggregation,
            debias_mode: a.debias,
            debias: config,
            candidate_pool: a.candidate_pool,
        };
        results.push(evaluate_disco(&ts, &ps, &gateway, &opts)?);
    }
    let model_id = results[0].model_id.clone();
    if let Some(other) = results.iter().find(|r| r.model_id != model_id) {
        return Err(CliError::Usage(format!(
            "endpoint changed model from `{model_id}` to `{}` between languages",
            other.model_id
        )));
    }

    let table = ResultTable {
        rows: vec![ResultRow {
            model_id: model_id.clone(),
            method: a.method.clone().unwrap_or_else(|| default_method(a.debias).to_string()),
            languages_used: a.languages_used.clone(),
            scores: results.iter().map(|r| (r.lang, r.score)).collect(),
        }],
    };
    let run = DiscoRun {
        command: "eval-disco",
        config: DiscoRunConfig {
            k: a.k,
            min_count: a.min_count,
            aggregation: a.aggregation,
            debias_mode: a.debias,
            candidate_pool: (a.debias != DebiasMode::None).then_some(a.candidate_pool),
            debias,
            languages: &langs,
            model_id: &model_id,
            inputs,
        },
        results: &results,
        table: table_json(&table)?,
    };
    out.write_json("disco_report.json", &run)?;
    out.write("disco_table.csv", table.to_csv()?.as_bytes())?;
    Ok(())
}

pub fn eval_mbe(a: &EvalMbeArgs, inputs: &mut Inputs, out: &mut Outputs) -> Result<(), CliError> {
    let corpus = read_corpus(inputs.read("corpus", &a.corpus)?.as_slice())?;
    let gateway = open_gateway(&a.endpoint)?;
    let results = evaluate_mbe(&corpus, &gateway)?;
    let model_id = results.first().map(|r| r.report.model_id.clone()).unwrap_or_default();
    let table = ResultTable {
        rows: vec![ResultRow {
            model_id: model_id.clone(),
            method: a.method.clone(),
            languages_used: a.languages_used.clone(),
            scores: results.iter().map(|r| (r.lang, r.report.deviation)).collect(),
        }],
    };
    let run = serde_json::json!({
        "command": "eval-mbe",
        "config": {
            "likelihood": LIKELIHOOD_DEFINITION,
            "model_id": model_id,
            "table_value": "deviation",
            "inputs": inputs,
        },
        "results": results,
        "table": table_json(&table)?,
    });
    out.write_json("mbe_report.json", &run)?;
    out.write("mbe_table.csv", table.to_csv()?.as_bytes())?;
    Ok(())
}

pub fn gen_cda(a: &GenCdaArgs, inputs: &mut Inputs, out: &mut Outputs) -> Result<(), CliError> {
    let text = inputs.read_string("corpus", &a.corpus)?;
    let sentences: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    let terms = read_term_pairs(inputs.read("terms", &a.terms)?.as_slice())?;
    let names: Vec<NamePair> = match (&a.names, a.no_name_swaps) {
        (Some(path), false) => read_name_pairs(inputs.read("names", path)?.as_slice())?
            .into_iter()
            .filter(|p| p.lang == a.lang)
            .collect(),
        _ => Vec::new(),
    };
    let keywords = match &a.keywords {
        Some(path) => Some(KeywordSet::parse(&inputs.read_string("keywords", path)?)?),
        None => None,
    };
    let selected = match &keywords {
        Some(kw) => filter_by_keywords(&sentences, kw, a.target)?,
        None => sentences.clone(),
    };
    if let Some(&bad) = a.translate_to.iter().find(|l| **l == a.lang) {
        return Err(CliError::Usage(format!("cannot translate {bad} data into {bad}")));
    }

    let map = build_swap_map(&terms, &names)?;
    let records = generate_corpus(&selected, &map, a.lang);

    if keywords.is_some() {
        let mut body = selected.join("\n");
        body.push('\n');
        out.write("cda_selected.txt", body.as_bytes())?;
    }
    out.write("counterfactuals.jsonl", jsonl(&records)?.as_bytes())?;
    let mut corpus = String::new();
    for line in selected.iter().chain(records.iter().map(|r| &r.counterfactual)) {
        corpus.push_str(line);
        corpus.push('\n');
    }
    out.write("cda_corpus.txt", corpus.as_bytes())?;
    let orders = translation_orders(&records, &a.translate_to);
    if !a.translate_to.is_empty() {
        out.write("translation_order.jsonl", jsonl(&orders)?.as_bytes())?;
    }

    let summary = serde_json::json!({
        "command": "gen-cda",
        "config": {
            "lang": a.lang,
            "target": keywords.as_ref().map(|_| a.target),
            "keyword_description": keywords.as_ref().map(|k| k.description.clone()),
            "name_swaps": names.len(),
            "translate_to": a.translate_to,
            "inputs": inputs,
        },
        "counts": {
            "input_sentences": sentences.len(),
            "selected": selected.len(),
            "counterfactuals": records.len(),
            "substitutions": records.iter().map(|r| r.substitutions.len()).sum::<usize>(),
            "swap_map_entries": map.len(),
            "translation_orders": orders.len(),
        },
    });
    out.write_json("cda_report.json", &summary)?;
    Ok(())
}

pub fn pair_names(a: &PairNamesArgs, inputs: &mut Inputs, out: &mut Outputs) -> Result<(), CliError> {
    let male = read_name_list(&inputs.read_string("male", &a.male)?);
    let female = read_name_list(&inputs.read_string("female", &a.female)?);
    let pairs: Vec<NameMatch> = pair_names_greedy(&male, &female)?;
    let mut csv = String::from("lang,male,female,distance\n");
    for p in &pairs {
        csv.push_str(&format!("{},{},{},{}\n", a.lang, csv_field(&p.male), csv_field(&p.female), p.distance));
    }
    out.write("name_pairs.csv", csv.as_bytes())?;
    Ok(())
}

pub fn compose(a: &ComposeManifestArgs, inputs: &mut Inputs, out: &mut Outputs) -> Result<(), CliError> {
    let (setup, label_lang) = match a.setup.parse::<CdaSetup>() {
        Ok(setup) => (setup, None),
        Err(_) => CdaSetup::parse_label(&a.setup)?,
    };
    let lang = match (label_lang, a.lang) {
        (Some(l), Some(given)) if l != given => {
            return Err(CliError::Usage(format!("setup `{}` names {l} but --lang is {given}", a.setup)));
        }
        (l, given) => l.or(given),
    };
    inputs.read("catalog", &a.catalog)?;
    let catalog = DatasetCatalog::load(&a.catalog)?;
    let manifest = compose_manifest(setup, lang, &catalog)?;
    out.write_json("manifest.json", &manifest)?;
    Ok(())
}

pub fn merge_translations(a: &MergeTranslationsArgs, inputs: &mut Inputs, out: &mut Outputs) -> Result<(), CliError> {
    let orders: Vec<TranslationItem> = read_jsonl(&inputs.read_string("order", &a.order)?, "order")?;
    let responses: Vec<TranslationItem> = read_jsonl(&inputs.read_string("responses", &a.responses)?, "responses")?;
    let by_lang = assemble_translations(&orders, &responses)?;
    let mut catalog = BTreeMap::new();
    if let Some(path) = &a.english {
        let english = inputs.read("english", path)?;
        out.write("en.txt", &english)?;
        catalog.insert(Language::En, "en.txt".to_string());
    }
    for (lang, lines) in &by_lang {
        let name = format!("{lang}.txt");
        let mut body = lines.join("\n");
        body.push('\n');
        out.write(&name, body.as_bytes())?;
        catalog.insert(*lang, name);
    }
    out.write_json("catalog.json", &catalog)?;
    Ok(())
}

pub fn conformance(a: &ConformanceArgs, out: &mut Outputs) -> Result<(), CliError> {
    let e = &a.endpoint;
    if !(e.endpoint.starts_with("http://") || e.endpoint.starts_with("https://")) {
        return Err(CliError::Usage("conformance needs an http(s) endpoint".into()));
    }
    let backend = HttpBackend::new(EndpointConfig {
        base_url: e.endpoint.clone(),
        timeout: timeout(e)?,
        retries: e.retries,
    })?;
    let report = run_conformance(&backend);
    out.write_json("conformance.json", &report)?;
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::Conformance {
            failed,
            total: report.checks.len(),
        });
    }
    Ok(())
}
