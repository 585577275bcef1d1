use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{score_categorical, score_numeric, AnnotationRecord, CellStats, EvalPair, Percent};
use crate::constraints::{AssignedValue, PropertyAssignment, PropertyValue, Provenance};
use crate::pipeline::{predict, Backends, ConfigError, EnrollmentConfig, EnrollmentMode, ProductInput, StrategyRegistry};
use crate::schema::PropertySchema;

/// One table column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "snake_case")]
pub enum Column {
    Accuracy { property: String },
    AccuracyAt { property: String, threshold: f64 },
}

impl Column {
    pub fn property(&self) -> &str {
        match self {
            Column::Accuracy { property } | Column::AccuracyAt { property, .. } => property,
        }
    }

    pub fn header(&self) -> String {
        match self {
            Column::Accuracy { property } => property.clone(),
            Column::AccuracyAt { property, threshold } => format!("{property} (Acc@{threshold})"),
        }
    }
}

/// Four categorical accuracies, then weight accuracy at 0.01 and 0.05.
pub fn default_columns() -> Vec<Column> {
    let acc = |p: &str| Column::Accuracy { property: p.into() };
    let at = |t: f64| Column::AccuracyAt {
        property: "Weight".into(),
        threshold: t,
    };
    vec![
        acc("Primary Package Color"),
        acc("Package Shape"),
        acc("Package Material"),
        acc("Category"),
        at(0.01),
        at(0.05),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// `None` when no image is annotated for the column's property.
    pub percent: Option<Percent>,
    #[serde(flatten)]
    pub stats: CellStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub mode: EnrollmentMode,
    pub label: String,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub columns: Vec<Column>,
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn cell(&self, mode: EnrollmentMode, header: &str) -> Option<&Cell> {
        let col = self.columns.iter().position(|c| c.header() == header)?;
        self.rows.iter().find(|r| r.mode == mode).map(|r| &r.cells[col])
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("tables serialize");
        text.push('\n');
        text
    }

    /// Aligned plain-text table of percentages, followed by the per-cell
    /// `correct/total` denominators.
    pub fn render_text(&self) -> String {
        let mut headers = vec!["Method".to_string()];
        headers.extend(self.columns.iter().map(Column::header));
        let percent_rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut cells = vec![r.label.clone()];
                cells.extend(r.cells.iter().map(|c| c.percent.map_or("n/a".to_string(), |p| p.to_string())));
                cells
            })
            .collect();
        let count_rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut cells = vec![r.label.clone()];
                cells.extend(r.cells.iter().map(|c| format!("{}/{}", c.stats.correct, c.stats.total())));
                cells
            })
            .collect();
        let mut out = render_grid(&headers, &percent_rows);
        out.push('\n');
        out.push_str("Correct / annotated\n");
        out.push_str(&render_grid(&headers, &count_rows));
        out
    }
}

fn render_grid(headers: &[String], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..headers.len())
        .map(|i| {
            rows.iter()
                .map(|r| r[i].chars().count())
                .chain([headers[i].chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                s.push_str(" | ");
            }
            if i == 0 {
                let _ = write!(s, "{cell:<w$}", w = widths[i]);
            } else {
                let _ = write!(s, "{cell:>w$}", w = widths[i]);
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(headers);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&line(&rule).replace(" | ", "-+-"));
    for row in rows {
        out.push_str(&line(row));
    }
    out
}

/// One scored prediction, kept for auditing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub mode: EnrollmentMode,
    pub image: String,
    pub assignment: PropertyAssignment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRun {
    pub table: MetricsTable,
    pub predictions: Vec<ScoredPrediction>,
}

fn all_absent(schema: &PropertySchema) -> PropertyAssignment {
    PropertyAssignment {
        values: schema
            .all_properties()
            .map(|p| AssignedValue {
                name: p.name.clone(),
                value: PropertyValue::Absent,
                provenance: Provenance::BaselineTriples,
            })
            .collect(),
    }
}

/// Predicts every annotated image under every mode and scores the results.
/// Prediction failures, including unreadable images, score as absent.
pub fn run_benchmark(
    dataset: &[AnnotationRecord],
    modes: &[EnrollmentConfig],
    columns: &[Column],
    schema: &PropertySchema,
    backends: &Backends,
    strategies: &StrategyRegistry,
) -> Result<BenchmarkRun, ConfigError> {
    if modes.is_empty() {
        return Err(ConfigError::NoModes);
    }
    for config in modes {
        config.validate()?;
        if strategies.get(config.mode.name()).is_none() {
            return Err(ConfigError::UnknownMode(config.mode.name().into()));
        }
    }
    let mut rows = Vec::with_capacity(modes.len());
    let mut predictions = Vec::new();
    for config in modes {
        let mut scored = Vec::with_capacity(dataset.len());
        for record in dataset {
            let label = record
                .image
                .file_name()
                .map_or_else(|| record.image.display().to_string(), |n| n.to_string_lossy().into_owned());
            let outcome = std::fs::read(&record.image)
                .map_err(|e| format!("{}: {e}", record.image.display()))
                .and_then(|bytes| {
                    let input = ProductInput::Image { bytes, label: label.clone() };
                    predict(&input, schema, backends, config, strategies).map_err(|e| e.to_string())
                });
            let (assignment, error) = match outcome {
                Ok((prediction, _)) => (prediction.assignment, None),
                Err(e) => {
                    tracing::warn!(mode = %config.mode, image = %label, error = %e, "prediction failed; scored as absent");
                    (all_absent(schema), Some(e))
                }
            };
            scored.push((record, assignment.clone()));
            predictions.push(ScoredPrediction {
                mode: config.mode,
                image: record.image.display().to_string(),
                assignment,
                error,
            });
        }
        let cells = columns
            .iter()
            .map(|column| {
                let pairs: Vec<EvalPair> = scored
                    .iter()
                    .filter_map(|(record, assignment)| {
                        let truth = record.truth(column.property())?;
                        Some(EvalPair {
                            property: column.property().to_string(),
                            predicted: assignment.get(column.property()).cloned().unwrap_or(PropertyValue::Absent),
                            truth,
                        })
                    })
                    .collect();
                let stats = match column {
                    Column::Accuracy { .. } => score_categorical(&pairs),
                    Column::AccuracyAt { threshold, .. } => score_numeric(*threshold, &pairs),
                }
                .unwrap_or_else(|e| {
                    tracing::warn!(column = %column.header(), error = %e, "column not scorable");
                    CellStats::default()
                });
                Cell {
                    percent: stats.percent(),
                    stats,
                }
            })
            .collect();
        rows.push(MetricsRow {
            mode: config.mode,
            label: config.mode.table_label().to_string(),
            cells,
        });
    }
    Ok(BenchmarkRun {
        table: MetricsTable {
            columns: columns.to_vec(),
            rows,
        },
        predictions,
    })
}
