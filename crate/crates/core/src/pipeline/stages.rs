//! The per-product stages: extract, format and infer, hierarchical expansion,
//! and the triple-generation baseline.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::StageError;
use crate::constraints::{
    compile_constraint, lenient_value, schema_prompt_text, validate_output, AssignedValue, PropertyAssignment,
    PropertyValue, Provenance,
};
use crate::graph::normalize_label;
use crate::model_client::{CanonicalExchange, ChatBackend, ChatExchange, ClientError, ImageAttachment, SamplingOptions};
use crate::prompts::Prompt;
use crate::schema::PropertySchema;

/// One request and the replies it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeLog {
    pub model: String,
    pub request: CanonicalExchange,
    pub replies: Vec<String>,
}

pub type Transcript = Vec<ExchangeLog>;

fn call(backend: &dyn ChatBackend, exchange: &ChatExchange, log: &mut Transcript) -> Result<Vec<String>, ClientError> {
    let result = backend.complete(exchange);
    let replies = match &result {
        Ok(replies) => replies.clone(),
        Err(ClientError::ConstraintViolation { reply }) => vec![reply.clone()],
        Err(_) => return result,
    };
    log.push(ExchangeLog {
        model: backend.model_id().to_string(),
        request: exchange.canonical(),
        replies,
    });
    result
}

fn call_one(backend: &dyn ChatBackend, exchange: &ChatExchange, log: &mut Transcript) -> Result<String, ClientError> {
    let mut replies = call(backend, exchange, log)?;
    if replies.len() != 1 {
        return Err(ClientError::SampleCount {
            expected: 1,
            got: replies.len(),
        });
    }
    Ok(replies.remove(0))
}

/// Describes the product image: one turn, or two when `multi_turn` is set.
/// The first prompt embeds the schema description.
pub fn extract(
    image: &ImageAttachment,
    schema: &PropertySchema,
    vlm: &dyn ChatBackend,
    multi_turn: bool,
    temperature: f64,
    log: &mut Transcript,
) -> Result<Vec<String>, StageError> {
    let schema_text = schema_prompt_text(schema);
    let mut exchange = ChatExchange::new(SamplingOptions::with_temperature(temperature))
        .user_with_image(Prompt::ExtractDescribe.render(&[("schema", &schema_text)]), image.clone());
    let first = call_one(vlm, &exchange, log)?;
    if first.trim().is_empty() {
        return Err(StageError::EmptyDescription { turn: 1 });
    }
    let mut descriptions = vec![first.clone()];
    if multi_turn {
        exchange = exchange.assistant(first).user(Prompt::ExtractMore.render(&[]));
        let second = call_one(vlm, &exchange, log)?;
        if second.trim().is_empty() {
            return Err(StageError::EmptyDescription { turn: 2 });
        }
        descriptions.push(second);
    }
    Ok(descriptions)
}

fn descriptions_text(descriptions: &[String]) -> String {
    descriptions
        .iter()
        .enumerate()
        .map(|(i, d)| format!("Description {}:\n{}", i + 1, d.trim()))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Result of the format-and-infer stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Formatted {
    pub assignment: PropertyAssignment,
    /// Free-form analysis turn; empty when reasoning is off.
    pub reasoning: String,
    /// Constrained retries used (0 or 1).
    pub retries: u32,
}

/// Turns descriptions into a schema-valid assignment through constrained
/// generation, optionally preceded by a free-form reasoning turn. A rejected
/// reply is retried once with the error appended to the conversation.
pub fn format_and_infer(
    descriptions: &[String],
    schema: &PropertySchema,
    llm: &dyn ChatBackend,
    with_reasoning: bool,
    reason_temperature: f64,
    constrained_temperature: f64,
    log: &mut Transcript,
) -> Result<Formatted, StageError> {
    if descriptions.iter().all(|d| d.trim().is_empty()) {
        return Err(StageError::NoDescriptions);
    }
    let schema_text = schema_prompt_text(schema);
    let described = descriptions_text(descriptions);
    let constrained = SamplingOptions::constrained(compile_constraint(schema), constrained_temperature);
    let mut reasoning = String::new();
    let mut exchange = if with_reasoning {
        let ask = ChatExchange::new(SamplingOptions::with_temperature(reason_temperature))
            .user(Prompt::Reason.render(&[("descriptions", &described), ("schema", &schema_text)]));
        reasoning = call_one(llm, &ask, log)?;
        ask.assistant(reasoning.clone())
            .user(Prompt::FormatAfterReasoning.render(&[("schema", &schema_text)]))
            .with_options(constrained)
    } else {
        ChatExchange::new(constrained)
            .user(Prompt::FormatDirect.render(&[("descriptions", &described), ("schema", &schema_text)]))
    };

    let mut retries = 0;
    loop {
        let (reply, failure) = match call_one(llm, &exchange, log) {
            Ok(reply) => match validate_output(&reply, schema) {
                Ok(assignment) => {
                    return Ok(Formatted {
                        assignment,
                        reasoning,
                        retries,
                    })
                }
                Err(e) => (reply, StageError::Validation(e)),
            },
            Err(ClientError::ConstraintViolation { reply }) => {
                let err = StageError::Client(ClientError::ConstraintViolation { reply: reply.clone() });
                (reply, err)
            }
            Err(e) => return Err(e.into()),
        };
        if retries >= super::RETRY_ON_CONSTRAINT_VIOLATION {
            return Err(failure);
        }
        retries += 1;
        let message = match &failure {
            StageError::Validation(e) => e.to_string(),
            _ => match validate_output(&reply, schema) {
                Err(e) => e.to_string(),
                Ok(_) => "the output does not follow the required JSON format".to_string(),
            },
        };
        exchange = exchange.assistant(reply).user(Prompt::FormatRetry.render(&[("error", &message)]));
    }
}

/// First usable line of a proposal, without list markers, quotes or a trailing period.
fn clean_proposal(reply: &str) -> String {
    let line = reply.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    let line = line.trim_start_matches(|c: char| c == '-' || c == '*' || c == '•' || c.is_whitespace());
    let wrapper = |c: char| c == '"' || c == '\'' || c == '*' || c == '`' || c.is_whitespace();
    line.trim_end_matches('.').trim_matches(wrapper).trim_end_matches('.').trim().to_string()
}

/// A proposal is usable when it is non-empty and not already on the chain.
fn acceptable(proposal: &str, chain: &[String]) -> bool {
    let Ok(key) = normalize_label(proposal) else {
        return false;
    };
    !chain.iter().any(|member| normalize_label(member).is_ok_and(|m| m == key))
}

/// Grows up to `k` category chains from `product` to `anchor`.
///
/// The first step samples `k` proposals in one top-k request; each later step
/// asks once per chain for a label between the product and the chain's
/// current innermost category. A chain whose proposal is empty or repeats a
/// label already on it stops growing. Chains equal after normalization are
/// merged.
pub fn expand_hierarchy(
    product: &str,
    anchor: &str,
    llm: &dyn ChatBackend,
    depth: u32,
    k: u32,
    temperature: f64,
    log: &mut Transcript,
) -> Result<Vec<Vec<String>>, StageError> {
    let base = vec![product.to_string(), anchor.to_string()];
    if depth == 0 || k == 0 {
        return Ok(vec![base]);
    }
    let ask = |inner: &str| {
        Prompt::Expand.render(&[("product", product), ("inner", inner), ("anchor", anchor)])
    };
    let first = ChatExchange::new(SamplingOptions::top_k(k, temperature)).user(ask(anchor));
    let proposals = call(llm, &first, log)?;
    let mut chains: Vec<(Vec<String>, bool)> = proposals
        .iter()
        .map(|p| {
            let p = clean_proposal(p);
            if acceptable(&p, &base) {
                (vec![product.to_string(), p, anchor.to_string()], true)
            } else {
                (base.clone(), false)
            }
        })
        .collect();
    chains = dedup_by_labels(chains);

    for _ in 1..depth {
        for (chain, growing) in chains.iter_mut().filter(|(_, g)| *g) {
            let exchange = ChatExchange::new(SamplingOptions::with_temperature(temperature)).user(ask(&chain[1]));
            let proposal = clean_proposal(&call_one(llm, &exchange, log)?);
            if acceptable(&proposal, chain) {
                chain.insert(1, proposal);
            } else {
                *growing = false;
            }
        }
        chains = dedup_by_labels(chains);
    }
    Ok(chains.into_iter().map(|(c, _)| c).collect())
}

fn dedup_by_labels(chains: Vec<(Vec<String>, bool)>) -> Vec<(Vec<String>, bool)> {
    let mut seen = HashSet::new();
    chains
        .into_iter()
        .filter(|(chain, _)| {
            let key: Vec<String> = chain.iter().map(|l| normalize_label(l).unwrap_or_default()).collect();
            seen.insert(key)
        })
        .collect()
}

/// Splits one triple line into (subject, predicate, object), locating the
/// predicate among `predicates` so subjects and objects may contain commas.
fn parse_triple<'a>(line: &str, predicates: &[&'a str]) -> Option<(String, &'a str, String)> {
    let line = line.trim().trim_start_matches(['-', '*', '•']).trim_start();
    let line = match line.split_once(['.', ')']) {
        Some((n, rest)) if !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()) && rest.starts_with(' ') => rest.trim(),
        _ => line,
    };
    let inner = match (line.find('('), line.rfind(')')) {
        (Some(open), Some(close)) if open < close => &line[open + 1..close],
        _ => line,
    };
    let sep = if inner.contains('|') { '|' } else { ',' };
    let parts: Vec<&str> = inner.split(sep).collect();
    let unquote = |s: &str| s.trim().trim_matches(|c| c == '"' || c == '\'').trim().to_string();
    for i in 1..parts.len().saturating_sub(1) {
        let candidate = unquote(parts[i]);
        if let Some(p) = predicates.iter().find(|p| p.eq_ignore_ascii_case(&candidate)) {
            let subject = unquote(&parts[..i].join(&sep.to_string()));
            let object = unquote(&parts[i + 1..].join(&sep.to_string()));
            return Some((subject, p, object));
        }
    }
    None
}

/// Baseline prediction: one VLM turn asking for triples with the product name
/// as subject and the schema's property names as predicates, optionally
/// preceded by the schema description. Objects are converted leniently;
/// properties without a triple are [`PropertyValue::Absent`].
pub fn baseline_extract(
    image: &ImageAttachment,
    schema: &PropertySchema,
    vlm: &dyn ChatBackend,
    with_schema_prompt: bool,
    temperature: f64,
    log: &mut Transcript,
) -> Result<PropertyAssignment, StageError> {
    let names: Vec<&str> = schema.properties().iter().map(|p| p.name.as_str()).collect();
    let mut prompt = String::new();
    if with_schema_prompt {
        prompt.push_str(&Prompt::BaselineSchemaPreamble.render(&[("schema", &schema_prompt_text(schema))]));
    }
    prompt.push_str(&Prompt::Baseline.render(&[("predicates", &names.join(", "))]));
    let exchange = ChatExchange::new(SamplingOptions::with_temperature(temperature)).user_with_image(prompt, image.clone());
    let reply = call_one(vlm, &exchange, log)?;
    if reply.trim().is_empty() {
        return Err(StageError::EmptyDescription { turn: 1 });
    }
    let mut all: Vec<&str> = vec![schema.root().name.as_str()];
    all.extend(&names);
    let triples: Vec<(String, &str, String)> = reply.lines().filter_map(|l| parse_triple(l, &all)).collect();

    let mut values = Vec::with_capacity(schema.len());
    for spec in schema.all_properties() {
        let mut value = triples
            .iter()
            .find(|(_, p, _)| *p == spec.name)
            .map_or(PropertyValue::Absent, |(_, _, o)| lenient_value(spec, o));
        if value.is_absent() && spec.name == schema.root().name {
            if let Some((subject, _, _)) = triples.iter().find(|(s, _, _)| !s.is_empty()) {
                value = lenient_value(spec, subject);
            }
        }
        values.push(AssignedValue {
            name: spec.name.clone(),
            value,
            provenance: Provenance::BaselineTriples,
        });
    }
    Ok(PropertyAssignment { values })
}
