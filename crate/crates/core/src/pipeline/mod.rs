//! The enrollment cycle: extract, format and infer, expand the hierarchy,
//! then merge the product subgraph into the inventory.
//!
//! Each [`EnrollmentMode`] is an [`EnrollmentStrategy`] looked up by name in a
//! [`StrategyRegistry`]. The three pipeline modes differ only in whether the
//! extract stage asks a follow-up question and whether formatting is preceded
//! by a reasoning turn; the two baseline modes predict properties from
//! generated triples and cannot be enrolled.
//!
//! Enrollment is all-or-nothing: every backend call happens in [`prepare`]
//! before the inventory is touched, and [`commit`] cannot fail.

mod batch;
mod stages;
mod strategy;

pub use batch::{load_manifest, ManifestEntry};
pub use stages::{baseline_extract, expand_hierarchy, extract, format_and_infer, ExchangeLog, Formatted, Transcript};
pub use strategy::{predict, BaselineStrategy, EnrollmentStrategy, PipelineStrategy, Prediction, StrategyRegistry};

use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::constraints::{PropertyAssignment, ValidationError};
use crate::graph::{merge_subgraph, subgraph_from_assignment, GraphError, InventoryGraph, MergeReport, ProductSubgraph};
use crate::model_client::{ClientError, ImageAttachment, ModelBackend};
use crate::schema::{parse_schema, serialize_schema, PropertySchema, SchemaError};

/// Constrained-generation retries per product.
pub const RETRY_ON_CONSTRAINT_VIOLATION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnrollmentMode {
    Full,
    NoReasoning,
    NoMultiTurn,
    BaselineZeroShot,
    BaselineSchema,
}

impl EnrollmentMode {
    pub const ALL: [EnrollmentMode; 5] = [
        EnrollmentMode::BaselineZeroShot,
        EnrollmentMode::BaselineSchema,
        EnrollmentMode::NoReasoning,
        EnrollmentMode::NoMultiTurn,
        EnrollmentMode::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnrollmentMode::Full => "full",
            EnrollmentMode::NoReasoning => "no-reasoning",
            EnrollmentMode::NoMultiTurn => "no-multi-turn",
            EnrollmentMode::BaselineZeroShot => "baseline-zero-shot",
            EnrollmentMode::BaselineSchema => "baseline-schema",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Row label in the results table.
    pub fn table_label(self) -> &'static str {
        match self {
            EnrollmentMode::Full => "ours",
            EnrollmentMode::NoReasoning => "ours w/o reasoning",
            EnrollmentMode::NoMultiTurn => "ours w/o multi-turn",
            EnrollmentMode::BaselineZeroShot => "Baseline (zero-shot)",
            EnrollmentMode::BaselineSchema => "Baseline w/ schema",
        }
    }
}

impl fmt::Display for EnrollmentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Temperatures {
    pub extract: f64,
    pub reason: f64,
    pub constrained: f64,
    pub expansion: f64,
}

impl Default for Temperatures {
    fn default() -> Self {
        Self {
            extract: 0.2,
            reason: 0.2,
            constrained: 0.0,
            expansion: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnrollmentConfig {
    pub mode: EnrollmentMode,
    /// Intermediate categories inserted per chain.
    pub expansion_depth: u32,
    /// Chains sampled in parallel (top-k).
    pub expansion_parallel: u32,
    pub temperatures: Temperatures,
}

impl Default for EnrollmentConfig {
    fn default() -> Self {
        Self::new(EnrollmentMode::Full)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("expansion_depth must be at least 1")]
    Depth,
    #[error("expansion_parallel must be at least 1")]
    Parallel,
    #[error("temperature {name} = {value} must be finite and non-negative")]
    Temperature { name: &'static str, value: f64 },
    #[error("unknown mode {0:?}")]
    UnknownMode(String),
    #[error("no modes to run")]
    NoModes,
}

impl EnrollmentConfig {
    pub fn new(mode: EnrollmentMode) -> Self {
        Self {
            mode,
            expansion_depth: 2,
            expansion_parallel: 3,
            temperatures: Temperatures::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.expansion_depth == 0 {
            return Err(ConfigError::Depth);
        }
        if self.expansion_parallel == 0 {
            return Err(ConfigError::Parallel);
        }
        let t = &self.temperatures;
        for (name, value) in [
            ("extract", t.extract),
            ("reason", t.reason),
            ("constrained", t.constrained),
            ("expansion", t.expansion),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ConfigError::Temperature { name, value });
            }
        }
        Ok(())
    }
}

/// The vision-language and language model handles used by one run.
#[derive(Clone)]
pub struct Backends {
    pub vlm: ModelBackend,
    pub llm: ModelBackend,
}

/// What a product is enrolled from.
#[derive(Debug, Clone)]
pub enum ProductInput {
    /// Encoded image bytes and a label (usually the file name).
    Image { bytes: Vec<u8>, label: String },
    /// A textual product description; the extract stage is skipped.
    Text { text: String, label: String },
}

impl ProductInput {
    pub fn label(&self) -> &str {
        match self {
            ProductInput::Image { label, .. } | ProductInput::Text { label, .. } => label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Input,
    Extract,
    Format,
    Baseline,
    Expand,
    Build,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Input => "input",
            Stage::Extract => "extract",
            Stage::Format => "format",
            Stage::Baseline => "baseline",
            Stage::Expand => "expand",
            Stage::Build => "build",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("description turn {turn} is empty")]
    EmptyDescription { turn: u32 },
    #[error("no descriptions to format")]
    NoDescriptions,
    #[error("output rejected after retry: {0}")]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("schema has no value for the hierarchy anchor")]
    MissingAnchor,
    #[error("mode {0} only predicts properties and cannot be enrolled")]
    NotEnrollable(EnrollmentMode),
    #[error("mode {0} needs an image input")]
    NeedsImage(EnrollmentMode),
    #[error("unknown mode {0:?}")]
    UnknownStrategy(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// A stage failure tagged with where it happened.
#[derive(Debug, Error)]
#[error("{stage}: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: StageError,
}

impl PipelineError {
    pub fn at(stage: Stage) -> impl FnOnce(StageError) -> PipelineError {
        move |source| PipelineError { stage, source }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    Image,
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRef {
    pub label: String,
    pub kind: InputKind,
    /// SHA-256 of the resized pixels for images, of the UTF-8 text otherwise.
    pub content_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTranscript {
    pub stage: Stage,
    pub exchanges: Transcript,
}

/// Wall-clock time per stage. Emitted as log events; not serialized, so
/// records stay byte-identical across runs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageTimings(pub Vec<(Stage, Duration)>);

/// Everything needed to audit one enrollment and rebuild its subgraph
/// without calling a model again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrollmentRecord {
    pub input: InputRef,
    pub config: EnrollmentConfig,
    /// Schema document the product was enrolled against.
    pub schema: String,
    pub transcripts: Vec<StageTranscript>,
    pub descriptions: Vec<String>,
    pub reasoning: String,
    pub format_retries: u32,
    pub assignment: PropertyAssignment,
    pub chains: Vec<Vec<String>>,
    #[serde(skip)]
    pub timings: StageTimings,
}

impl EnrollmentRecord {
    /// Rebuilds the product subgraph from the recorded values.
    pub fn subgraph(&self) -> Result<ProductSubgraph, StageError> {
        let schema = parse_schema(&self.schema).map_err(|e: SchemaError| StageError::Graph(GraphError::InvalidAssignment(e.to_string())))?;
        Ok(subgraph_from_assignment(&self.assignment, &self.chains, &schema)?)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("records serialize");
        text.push('\n');
        text
    }
}

/// A fully computed enrollment that has not touched the inventory yet.
#[derive(Debug, Clone)]
pub struct PreparedEnrollment {
    pub subgraph: ProductSubgraph,
    pub record: EnrollmentRecord,
}

fn timed<T>(timings: &mut StageTimings, stage: Stage, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    timings.0.push((stage, start.elapsed()));
    out
}

pub(crate) fn decode_input(input: &ProductInput) -> Result<(Option<ImageAttachment>, InputRef), PipelineError> {
    match input {
        ProductInput::Image { bytes, label } => {
            let image = ImageAttachment::from_encoded(bytes, Some(label.clone())).map_err(|e| PipelineError {
                stage: Stage::Input,
                source: e.into(),
            })?;
            let input = InputRef {
                label: label.clone(),
                kind: InputKind::Image,
                content_hash: image.content_hash().to_string(),
            };
            Ok((Some(image), input))
        }
        ProductInput::Text { text, label } => Ok((
            None,
            InputRef {
                label: label.clone(),
                kind: InputKind::Text,
                content_hash: hex::encode(Sha256::digest(text.as_bytes())),
            },
        )),
    }
}

/// Runs every model-facing stage for one product and builds its subgraph.
pub fn prepare(
    input: &ProductInput,
    schema: &PropertySchema,
    backends: &Backends,
    config: &EnrollmentConfig,
    strategies: &StrategyRegistry,
) -> Result<PreparedEnrollment, PipelineError> {
    config.validate().map_err(|e| PipelineError::at(Stage::Input)(e.into()))?;
    let strategy = strategies
        .get(config.mode.name())
        .ok_or_else(|| PipelineError::at(Stage::Input)(StageError::UnknownStrategy(config.mode.name().into())))?;
    if !strategy.enrollable() {
        return Err(PipelineError::at(Stage::Input)(StageError::NotEnrollable(config.mode)));
    }
    let (image, input_ref) = decode_input(input)?;
    let mut timings = StageTimings::default();
    let mut transcripts = Vec::new();
    let prediction = strategy.predict(input, image.as_ref(), schema, backends, config, &mut transcripts, &mut timings)?;

    let anchor_value = match schema.anchor() {
        Some(spec) => Some(
            prediction
                .assignment
                .get(&spec.name)
                .and_then(|v| v.as_label())
                .ok_or_else(|| PipelineError::at(Stage::Expand)(StageError::MissingAnchor))?
                .to_string(),
        ),
        None => None,
    };
    let chains = match anchor_value {
        Some(anchor) => {
            let product = prediction
                .assignment
                .product_name(schema)
                .ok_or_else(|| PipelineError::at(Stage::Expand)(StageError::MissingAnchor))?
                .to_string();
            let mut log = Vec::new();
            let chains = timed(&mut timings, Stage::Expand, || {
                expand_hierarchy(
                    &product,
                    &anchor,
                    backends.llm.as_ref(),
                    config.expansion_depth,
                    config.expansion_parallel,
                    config.temperatures.expansion,
                    &mut log,
                )
            })
            .map_err(PipelineError::at(Stage::Expand))?;
            transcripts.push(StageTranscript {
                stage: Stage::Expand,
                exchanges: log,
            });
            chains
        }
        None => Vec::new(),
    };

    let subgraph = timed(&mut timings, Stage::Build, || {
        subgraph_from_assignment(&prediction.assignment, &chains, schema)
    })
    .map_err(|e| PipelineError::at(Stage::Build)(e.into()))?;

    for (stage, elapsed) in &timings.0 {
        tracing::info!(target: "imgkg::timing", product = %input_ref.label, stage = %stage, micros = elapsed.as_micros() as u64, "stage finished");
    }
    let record = EnrollmentRecord {
        input: input_ref,
        config: *config,
        schema: serialize_schema(schema),
        transcripts,
        descriptions: prediction.descriptions,
        reasoning: prediction.reasoning,
        format_retries: prediction.format_retries,
        assignment: prediction.assignment,
        chains,
        timings,
    };
    Ok(PreparedEnrollment { subgraph, record })
}

/// Merges a prepared enrollment. Never fails: the subgraph was validated when built.
pub fn commit(inventory: &mut InventoryGraph, prepared: &PreparedEnrollment) -> MergeReport {
    merge_subgraph(inventory, &prepared.subgraph).expect("prepared subgraphs satisfy merge preconditions")
}

/// Enrolls one product with the default strategies. On error the inventory is unchanged.
pub fn enroll(
    input: &ProductInput,
    schema: &PropertySchema,
    inventory: &mut InventoryGraph,
    backends: &Backends,
    config: &EnrollmentConfig,
) -> Result<(EnrollmentRecord, MergeReport), PipelineError> {
    let prepared = prepare(input, schema, backends, config, &StrategyRegistry::with_defaults())?;
    let report = commit(inventory, &prepared);
    Ok((prepared.record, report))
}
