//! Task configuration files (TOML).
//!
//! ```toml
//! [task]
//! name = "sentiment"
//! description = "Classify the sentiment of a review."
//! labels = ["positive", "negative", "neutral"]
//!
//! [splits.train]
//! path = "train.jsonl"
//! [splits.validation]   # optional; carved from train when absent
//! path = "validation.jsonl"
//! [splits.test]         # optional
//! path = "test.jsonl"
//!
//! [extraction]          # optional
//! pattern = '(?i)answer\s*[:=]\s*(.+)'
//! fallback = "last_label_mention"
//! ```
//!
//! Split paths are relative to the config file.

use std::path::{Path, PathBuf};

use ampo_core::eval::{AnswerExtraction, ExtractionFallback};
use ampo_core::{DatasetSplits, TaskSpec};
use serde::Deserialize;

use crate::dataset;
use crate::error::{config, Result};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFile {
    task: TaskSection,
    splits: Splits,
    #[serde(default)]
    extraction: Extraction,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskSection {
    name: String,
    #[serde(default)]
    description: String,
    labels: Option<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Splits {
    train: SplitFile,
    validation: Option<SplitFile>,
    test: Option<SplitFile>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitFile {
    path: PathBuf,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct Extraction {
    pattern: Option<String>,
    fallback: Option<ExtractionFallback>,
}

pub fn load(path: &Path) -> Result<TaskSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config(format!("cannot read task config {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse(&text, base).map_err(|e| config(format!("{}: {e}", path.display())))
}

/// Parses a task config, resolving split paths against `base`.
pub fn parse(text: &str, base: &Path) -> Result<TaskSpec> {
    let file: TaskFile = toml::from_str(text).map_err(config)?;
    let read = |s: &Option<SplitFile>| -> Result<Vec<_>> {
        s.as_ref().map_or(Ok(Vec::new()), |s| dataset::load(&base.join(&s.path)))
    };
    let train = dataset::load(&base.join(&file.splits.train.path))?;
    let splits = DatasetSplits::new(train, read(&file.splits.validation)?, read(&file.splits.test)?)
        .map_err(config)?;
    let defaults = AnswerExtraction::default();
    let extraction = AnswerExtraction {
        pattern: file.extraction.pattern.unwrap_or(defaults.pattern),
        fallback: file.extraction.fallback.unwrap_or(defaults.fallback),
    };
    extraction.compile().map_err(config)?;
    TaskSpec::new(file.task.name, file.task.description, splits, file.task.labels, extraction)
        .map_err(config)
}
