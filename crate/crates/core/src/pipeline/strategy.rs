use std::collections::BTreeMap;
use std::sync::Arc;

use super::stages::{baseline_extract, extract, format_and_infer};
use super::{
    timed, Backends, EnrollmentConfig, EnrollmentMode, PipelineError, ProductInput, Stage, StageError, StageTimings,
    StageTranscript,
};
use crate::constraints::PropertyAssignment;
use crate::model_client::ImageAttachment;
use crate::schema::PropertySchema;

/// Property prediction for one product.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub descriptions: Vec<String>,
    pub reasoning: String,
    pub format_retries: u32,
    pub assignment: PropertyAssignment,
}

/// One way of turning an input into property values.
pub trait EnrollmentStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    /// Whether predictions are schema-valid and can be merged into an inventory.
    fn enrollable(&self) -> bool;

    /// `image` is the decoded form of `input` when it is an image.
    #[allow(clippy::too_many_arguments)]
    fn predict(
        &self,
        input: &ProductInput,
        image: Option<&ImageAttachment>,
        schema: &PropertySchema,
        backends: &Backends,
        config: &EnrollmentConfig,
        transcripts: &mut Vec<StageTranscript>,
        timings: &mut StageTimings,
    ) -> Result<Prediction, PipelineError>;
}

/// Extract (one or two turns) then constrained formatting (with or without a reasoning turn).
pub struct PipelineStrategy {
    pub mode: EnrollmentMode,
    pub multi_turn: bool,
    pub reasoning: bool,
}

impl EnrollmentStrategy for PipelineStrategy {
    fn name(&self) -> &'static str {
        self.mode.name()
    }

    fn enrollable(&self) -> bool {
        true
    }

    fn predict(
        &self,
        input: &ProductInput,
        image: Option<&ImageAttachment>,
        schema: &PropertySchema,
        backends: &Backends,
        config: &EnrollmentConfig,
        transcripts: &mut Vec<StageTranscript>,
        timings: &mut StageTimings,
    ) -> Result<Prediction, PipelineError> {
        let t = &config.temperatures;
        let descriptions = match (input, image) {
            (_, Some(image)) => {
                let mut log = Vec::new();
                let out = timed(timings, Stage::Extract, || {
                    extract(image, schema, backends.vlm.as_ref(), self.multi_turn, t.extract, &mut log)
                });
                transcripts.push(StageTranscript {
                    stage: Stage::Extract,
                    exchanges: log,
                });
                out.map_err(PipelineError::at(Stage::Extract))?
            }
            (ProductInput::Text { text, .. }, None) => vec![text.clone()],
            (ProductInput::Image { .. }, None) => {
                return Err(PipelineError::at(Stage::Input)(StageError::NeedsImage(self.mode)));
            }
        };
        let mut log = Vec::new();
        let formatted = timed(timings, Stage::Format, || {
            format_and_infer(
                &descriptions,
                schema,
                backends.llm.as_ref(),
                self.reasoning,
                t.reason,
                t.constrained,
                &mut log,
            )
        });
        transcripts.push(StageTranscript {
            stage: Stage::Format,
            exchanges: log,
        });
        let formatted = formatted.map_err(PipelineError::at(Stage::Format))?;
        Ok(Prediction {
            descriptions,
            reasoning: formatted.reasoning,
            format_retries: formatted.retries,
            assignment: formatted.assignment,
        })
    }
}

/// Triple generation from the image, with or without the schema preamble.
pub struct BaselineStrategy {
    pub mode: EnrollmentMode,
    pub with_schema: bool,
}

impl EnrollmentStrategy for BaselineStrategy {
    fn name(&self) -> &'static str {
        self.mode.name()
    }

    fn enrollable(&self) -> bool {
        false
    }

    fn predict(
        &self,
        _input: &ProductInput,
        image: Option<&ImageAttachment>,
        schema: &PropertySchema,
        backends: &Backends,
        config: &EnrollmentConfig,
        transcripts: &mut Vec<StageTranscript>,
        timings: &mut StageTimings,
    ) -> Result<Prediction, PipelineError> {
        let image = image.ok_or_else(|| PipelineError::at(Stage::Input)(StageError::NeedsImage(self.mode)))?;
        let mut log = Vec::new();
        let out = timed(timings, Stage::Baseline, || {
            baseline_extract(
                image,
                schema,
                backends.vlm.as_ref(),
                self.with_schema,
                config.temperatures.extract,
                &mut log,
            )
        });
        let description = log.first().and_then(|l| l.replies.first()).cloned();
        transcripts.push(StageTranscript {
            stage: Stage::Baseline,
            exchanges: log,
        });
        let assignment = out.map_err(PipelineError::at(Stage::Baseline))?;
        Ok(Prediction {
            descriptions: description.into_iter().collect(),
            reasoning: String::new(),
            format_retries: 0,
            assignment,
        })
    }
}

/// Strategies by name.
#[derive(Clone)]
pub struct StrategyRegistry {
    strategies: BTreeMap<&'static str, Arc<dyn EnrollmentStrategy>>,
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self {
            strategies: BTreeMap::new(),
        }
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        for (mode, multi_turn, reasoning) in [
            (EnrollmentMode::Full, true, true),
            (EnrollmentMode::NoReasoning, true, false),
            (EnrollmentMode::NoMultiTurn, false, true),
        ] {
            r.register(Arc::new(PipelineStrategy {
                mode,
                multi_turn,
                reasoning,
            }));
        }
        for (mode, with_schema) in [(EnrollmentMode::BaselineZeroShot, false), (EnrollmentMode::BaselineSchema, true)] {
            r.register(Arc::new(BaselineStrategy { mode, with_schema }));
        }
        r
    }

    pub fn register(&mut self, strategy: Arc<dyn EnrollmentStrategy>) {
        self.strategies.insert(strategy.name(), strategy);
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn EnrollmentStrategy>> {
        self.strategies.get(name).cloned()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.strategies.keys().copied().collect()
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

/// Predicts properties for one input under `config.mode` without enrolling it.
pub fn predict(
    input: &ProductInput,
    schema: &PropertySchema,
    backends: &Backends,
    config: &EnrollmentConfig,
    strategies: &StrategyRegistry,
) -> Result<(Prediction, Vec<StageTranscript>), PipelineError> {
    config.validate().map_err(|e| PipelineError::at(Stage::Input)(e.into()))?;
    let strategy = strategies
        .get(config.mode.name())
        .ok_or_else(|| PipelineError::at(Stage::Input)(StageError::UnknownStrategy(config.mode.name().into())))?;
    let (image, _) = super::decode_input(input)?;
    let mut transcripts = Vec::new();
    let mut timings = StageTimings::default();
    let prediction = strategy.predict(input, image.as_ref(), schema, backends, config, &mut transcripts, &mut timings)?;
    Ok((prediction, transcripts))
}
