//! Schema induction with a language model: property discovery, data-type
//! argmax, unit prediction and choice generation.
//!
//! Every operation retries once on unparseable output by appending a
//! corrective user turn, then fails.

use std::collections::HashSet;

use thiserror::Error;

use super::{DataType, PropertySchema, PropertySpec, SchemaError, TypeKind, CATCH_ALL};
use crate::model_client::{ChatBackend, ChatExchange, ClientError, Role, SamplingOptions};
use crate::prompts::Prompt;

pub const ROOT_PROPERTY: &str = "Product Name";

#[derive(Debug, Error)]
pub enum InductionError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("the model listed no property names")]
    EmptyResult,
    #[error("no data-type label in reply for {property:?}: {reply:?}")]
    UnparseableTypeLabel { property: String, reply: String },
    #[error("no unit in continuation for {property:?}")]
    EmptyUnit { property: String },
    #[error("fewer than two distinct choices for {property:?}")]
    TooFewChoices { property: String },
    #[error(transparent)]
    Backend(#[from] ClientError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropertyMode {
    Auto,
    Manual,
}

fn complete_one(llm: &dyn ChatBackend, exchange: &ChatExchange) -> Result<String, ClientError> {
    let mut replies = llm.complete(exchange)?;
    Ok(replies.swap_remove(0))
}

/// Asks once, and on a parse failure asks again with a corrective turn.
fn ask_with_retry<T>(
    llm: &dyn ChatBackend,
    exchange: ChatExchange,
    retry_prompt: Prompt,
    parse: impl Fn(&str) -> Option<T>,
) -> Result<Result<T, String>, ClientError> {
    let reply = complete_one(llm, &exchange)?;
    if let Some(v) = parse(&reply) {
        return Ok(Ok(v));
    }
    let mut retry = exchange;
    retry.push(Role::Assistant, reply, None);
    retry.push(Role::User, retry_prompt.render(&[]), None);
    let reply = complete_one(llm, &retry)?;
    Ok(parse(&reply).ok_or(reply))
}

fn dedup_case_insensitive(items: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut seen = HashSet::new();
    items.into_iter().filter(|s| seen.insert(s.to_lowercase())).collect()
}

/// Splits a free-text list on commas, semicolons and newlines, dropping
/// bullets, numbering and quotes.
fn parse_list(reply: &str) -> Vec<String> {
    let items = reply
        .split([',', ';', '\n'])
        .map(|item| {
            let item = item.trim().trim_start_matches(['-', '*', '•']).trim();
            let item = match item.find(['.', ')']) {
                Some(i) if i > 0 && item[..i].chars().all(|c| c.is_ascii_digit()) => item[i + 1..].trim(),
                _ => item,
            };
            item.trim_matches(|c| c == '"' || c == '\'' || c == '`')
                .trim_end_matches('.')
                .trim()
                .to_string()
        })
        .filter(|s| !s.is_empty());
    dedup_case_insensitive(items)
}

pub fn identify_properties(
    mode: PropertyMode,
    seed_list: Option<&[String]>,
    llm: Option<&dyn ChatBackend>,
) -> Result<Vec<String>, InductionError> {
    match mode {
        PropertyMode::Manual => {
            let seed = seed_list.unwrap_or_default();
            let names = dedup_case_insensitive(seed.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()));
            if names.is_empty() {
                return Err(InductionError::InvalidInput("manual mode needs a non-empty property list".into()));
            }
            Ok(names)
        }
        PropertyMode::Auto => {
            let llm = llm.ok_or_else(|| InductionError::InvalidInput("auto mode needs a language model".into()))?;
            let exchange = ChatExchange::default().user(Prompt::IdentifyProperties.render(&[]));
            ask_with_retry(llm, exchange, Prompt::IdentifyPropertiesRetry, |r| {
                Some(parse_list(r)).filter(|l| !l.is_empty())
            })?
            .map_err(|_| InductionError::EmptyResult)
        }
    }
}

/// Maps a sampled reply to a type label: the first word starting with
/// `int`, `float`, `str` or `choice`.
fn label_from_reply(reply: &str) -> Option<TypeKind> {
    reply
        .split(|c: char| !c.is_ascii_alphabetic())
        .map(str::to_ascii_lowercase)
        .find_map(|w| {
            if w.starts_with("int") {
                Some(TypeKind::Int)
            } else if w.starts_with("float") {
                Some(TypeKind::Float)
            } else if w.starts_with("str") {
                Some(TypeKind::Str)
            } else if w.starts_with("choice") {
                Some(TypeKind::Choices)
            } else {
                None
            }
        })
}

/// Argmax over label scores; ties go to the earlier label in int < float < str < choices.
fn argmax(scores: &[f64]) -> Option<TypeKind> {
    let mut best: Option<(TypeKind, f64)> = None;
    for (kind, &score) in TypeKind::ALL.iter().zip(scores) {
        if score.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((*kind, score));
        }
    }
    best.map(|(k, _)| k)
}

fn data_type_of(kind: TypeKind) -> DataType {
    match kind {
        TypeKind::Int => DataType::Int,
        TypeKind::Float => DataType::Float,
        TypeKind::Str => DataType::Str,
        TypeKind::Choices => DataType::Choices(Vec::new()),
    }
}

/// Picks the most probable data type. Uses per-label scores when the backend
/// exposes them, otherwise samples at temperature 0 and reads the label.
pub fn infer_data_type(property: &str, llm: &dyn ChatBackend) -> Result<DataType, InductionError> {
    if property.trim().is_empty() {
        return Err(InductionError::InvalidInput("property name is empty".into()));
    }
    let exchange = ChatExchange::new(SamplingOptions::with_temperature(0.0))
        .user(Prompt::DataType.render(&[("property", property)]));
    let labels: Vec<&str> = TypeKind::ALL.iter().map(|k| k.as_str()).collect();
    if let Some(scores) = llm.score_labels(&exchange, &labels)? {
        if let Some(kind) = argmax(&scores) {
            return Ok(data_type_of(kind));
        }
    }
    ask_with_retry(llm, exchange, Prompt::DataTypeRetry, label_from_reply)?
        .map(data_type_of)
        .map_err(|reply| InductionError::UnparseableTypeLabel {
            property: property.to_string(),
            reply,
        })
}

fn unit_from_continuation(text: &str) -> Option<String> {
    let token = text.split_whitespace().next()?;
    let token = token.trim_matches(|c: char| ".,;:!?\"'()[]{}`".contains(c));
    (!token.is_empty()).then(|| token.to_string())
}

pub fn infer_unit(property: &str, llm: &dyn ChatBackend) -> Result<String, InductionError> {
    let exchange = ChatExchange::new(SamplingOptions::with_temperature(0.0))
        .user(Prompt::Unit.render(&[("property", property)]));
    ask_with_retry(llm, exchange, Prompt::UnitRetry, unit_from_continuation)?.map_err(|_| InductionError::EmptyUnit {
        property: property.to_string(),
    })
}

fn is_catch_all(label: &str) -> bool {
    label.eq_ignore_ascii_case("other") || label.eq_ignore_ascii_case("others")
}

/// Normalizes a raw choice list: dedup, catch-all moved to the end as `Others`.
fn finish_choices(labels: Vec<String>) -> Option<Vec<String>> {
    let mut real: Vec<String> = labels.into_iter().filter(|l| !is_catch_all(l)).collect();
    if real.len() < 2 {
        return None;
    }
    real.push(CATCH_ALL.to_string());
    Some(real)
}

pub fn generate_choices(property: &str, llm: &dyn ChatBackend) -> Result<Vec<String>, InductionError> {
    let exchange = ChatExchange::new(SamplingOptions::with_temperature(0.0))
        .user(Prompt::Choices.render(&[("property", property)]));
    ask_with_retry(llm, exchange, Prompt::ChoicesRetry, |r| finish_choices(parse_list(r)))?.map_err(|_| {
        InductionError::TooFewChoices {
            property: property.to_string(),
        }
    })
}

/// Types every property in `names` and assembles a schema rooted at
/// `Product Name`. The first choices property whose name mentions "category"
/// becomes the hierarchy anchor.
pub fn induce_schema(names: &[String], llm: &dyn ChatBackend) -> Result<PropertySchema, InductionError> {
    let mut properties = Vec::new();
    for name in names.iter().filter(|n| !n.eq_ignore_ascii_case(ROOT_PROPERTY)) {
        let spec = match infer_data_type(name, llm)? {
            DataType::Choices(_) => PropertySpec::choices(name.clone(), &generate_choices(name, llm)?),
            dt if dt.kind().is_numeric() => {
                let unit = infer_unit(name, llm)?;
                PropertySpec::new(name.clone(), dt, Some(&unit))
            }
            dt => PropertySpec::new(name.clone(), dt, None),
        };
        properties.push(spec);
    }
    let anchor = properties
        .iter()
        .find(|p| p.kind() == TypeKind::Choices && p.name.to_lowercase().contains("category"))
        .map(|p| p.name.clone());
    Ok(PropertySchema::new(PropertySpec::str(ROOT_PROPERTY), properties, anchor.as_deref())?)
}
