//! Versioned prompt templates, one text asset per stage under `prompts/`.
//!
//! Fixture keys hash the rendered prompts, so any edit to a template must bump
//! [`PROMPT_VERSION`] and re-record fixtures.

pub const PROMPT_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Prompt {
    IdentifyProperties,
    IdentifyPropertiesRetry,
    DataType,
    DataTypeRetry,
    Unit,
    UnitRetry,
    Choices,
    ChoicesRetry,
    ExtractDescribe,
    ExtractMore,
    Reason,
    FormatAfterReasoning,
    FormatDirect,
    FormatRetry,
    Expand,
    Baseline,
    BaselineSchemaPreamble,
}

impl Prompt {
    pub fn template(self) -> &'static str {
        match self {
            Prompt::IdentifyProperties => include_str!("../prompts/identify_properties.txt"),
            Prompt::IdentifyPropertiesRetry => include_str!("../prompts/identify_properties_retry.txt"),
            Prompt::DataType => include_str!("../prompts/data_type.txt"),
            Prompt::DataTypeRetry => include_str!("../prompts/data_type_retry.txt"),
            Prompt::Unit => include_str!("../prompts/unit.txt"),
            Prompt::UnitRetry => include_str!("../prompts/unit_retry.txt"),
            Prompt::Choices => include_str!("../prompts/choices.txt"),
            Prompt::ChoicesRetry => include_str!("../prompts/choices_retry.txt"),
            Prompt::ExtractDescribe => include_str!("../prompts/extract_describe.txt"),
            Prompt::ExtractMore => include_str!("../prompts/extract_more.txt"),
            Prompt::Reason => include_str!("../prompts/reason.txt"),
            Prompt::FormatAfterReasoning => include_str!("../prompts/format_after_reasoning.txt"),
            Prompt::FormatDirect => include_str!("../prompts/format_direct.txt"),
            Prompt::FormatRetry => include_str!("../prompts/format_retry.txt"),
            Prompt::Expand => include_str!("../prompts/expand.txt"),
            Prompt::Baseline => include_str!("../prompts/baseline.txt"),
            Prompt::BaselineSchemaPreamble => include_str!("../prompts/baseline_schema_preamble.txt"),
        }
    }

    /// Substitutes `{name}` placeholders in one pass; substituted text is not rescanned.
    pub fn render(self, vars: &[(&str, &str)]) -> String {
        let template = self.template();
        let mut out = String::with_capacity(template.len() + 256);
        let mut rest = template;
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let after = &rest[open + 1..];
            match after.find('}').map(|close| (&after[..close], close)) {
                Some((name, close)) if vars.iter().any(|(k, _)| *k == name) => {
                    let value = vars.iter().find(|(k, _)| *k == name).map(|(_, v)| *v).unwrap_or_default();
                    out.push_str(value);
                    rest = &after[close + 1..];
                }
                _ => {
                    out.push('{');
                    rest = after;
                }
            }
        }
        out.push_str(rest);
        out
    }
}
