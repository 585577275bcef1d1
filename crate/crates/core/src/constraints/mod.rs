//! Schema-to-pattern compilation and strict output validation.
//!
//! [`compile_constraint`] turns a schema into a single anchored regular
//! expression that matches exactly one JSON object literal with the schema's
//! fields in schema order. The dialect is the common subset accepted by
//! constrained-decoding servers: literals, character classes, non-capturing
//! groups, alternation, bounded repetition, `^`/`$` anchors.
//!
//! Value patterns:
//!
//! | type    | pattern |
//! |---------|---------|
//! | int     | `-?(?:0\|[1-9][0-9]{0,17})` |
//! | float   | int pattern followed by an optional `(?:\.[0-9]{1,17})` |
//! | str     | a JSON string of 1..=512 characters, no raw control characters, escapes limited to `\" \\ \/ \b \f \n \r \t` |
//! | choices | `"(?:A\|B\|...)"` with labels verbatim |
//!
//! Tokens may be separated by any run of spaces, tabs, carriage returns or newlines.

mod validate;

pub use validate::{lenient_value, validate_output, AssignedValue, PropertyAssignment, PropertyValue, Provenance, ValidationError};

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use regex::Regex;

use crate::schema::{DataType, PropertySchema};

pub const STR_MAX_CHARS: usize = 512;

const WS: &str = r"[ \t\n\r]*";
const INT: &str = r"-?(?:0|[1-9][0-9]{0,17})";
const FRACTION: &str = r"(?:\.[0-9]{1,17})?";
const STR_CHAR: &str = r#"(?:[^"\\\x00-\x1F]|\\["\\/bfnrt])"#;

/// A compiled structural pattern for one schema.
#[derive(Clone)]
pub struct GenerationConstraint {
    field_patterns: Vec<(String, String)>,
    rendered_pattern: String,
    compiled: Arc<OnceLock<Regex>>,
}

impl GenerationConstraint {
    /// `(property name, value pattern)` pairs in schema order.
    pub fn field_patterns(&self) -> &[(String, String)] {
        &self.field_patterns
    }

    pub fn rendered_pattern(&self) -> &str {
        &self.rendered_pattern
    }

    pub fn regex(&self) -> &Regex {
        self.compiled.get_or_init(|| {
            regex::RegexBuilder::new(&self.rendered_pattern)
                .size_limit(256 << 20)
                .dfa_size_limit(64 << 20)
                .build()
                .expect("compiled constraints are valid regular expressions")
        })
    }

    pub fn matches(&self, text: &str) -> bool {
        self.regex().is_match(text)
    }
}

impl fmt::Debug for GenerationConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenerationConstraint")
            .field("fields", &self.field_patterns.iter().map(|(n, _)| n).collect::<Vec<_>>())
            .finish()
    }
}

impl PartialEq for GenerationConstraint {
    fn eq(&self, other: &Self) -> bool {
        self.rendered_pattern == other.rendered_pattern
    }
}

/// JSON string-literal body for `s` (without the surrounding quotes).
fn json_string_body(s: &str) -> String {
    let quoted = serde_json::to_string(s).expect("strings serialize");
    quoted[1..quoted.len() - 1].to_string()
}

fn value_pattern(data_type: &DataType) -> String {
    match data_type {
        DataType::Int => INT.to_string(),
        DataType::Float => format!("{INT}{FRACTION}"),
        DataType::Str => format!(r#""{STR_CHAR}{{1,{STR_MAX_CHARS}}}""#),
        DataType::Choices(labels) => {
            let alts: Vec<String> = labels.iter().map(|l| regex::escape(&json_string_body(l))).collect();
            format!(r#""(?:{})""#, alts.join("|"))
        }
    }
}

pub fn compile_constraint(schema: &PropertySchema) -> GenerationConstraint {
    let field_patterns: Vec<(String, String)> = schema
        .all_properties()
        .map(|p| (p.name.clone(), value_pattern(&p.data_type)))
        .collect();
    let members: Vec<String> = field_patterns
        .iter()
        .map(|(name, value)| format!(r#""{}"{WS}:{WS}{value}"#, regex::escape(&json_string_body(name))))
        .collect();
    let rendered_pattern = format!(r"^{WS}\{{{WS}{}{WS}\}}{WS}$", members.join(&format!("{WS},{WS}")));
    // Equal patterns share one compiled automaton for the life of the process.
    static COMPILED: OnceLock<Mutex<HashMap<String, Arc<OnceLock<Regex>>>>> = OnceLock::new();
    let compiled = COMPILED
        .get_or_init(Default::default)
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .entry(rendered_pattern.clone())
        .or_default()
        .clone();
    GenerationConstraint {
        field_patterns,
        rendered_pattern,
        compiled,
    }
}

/// Human-readable schema rendering embedded in prompts, one line per property.
pub fn schema_prompt_text(schema: &PropertySchema) -> String {
    let mut out = String::new();
    for p in schema.all_properties() {
        let line = match (&p.data_type, &p.unit) {
            (DataType::Choices(labels), _) => format!("{}: choices [{}]", p.name, labels.join(", ")),
            (DataType::Str, _) => format!("{}: string", p.name),
            (dt, Some(unit)) => format!("{}: {} ({unit})", p.name, dt.kind()),
            (dt, None) => format!("{}: {}", p.name, dt.kind()),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}
