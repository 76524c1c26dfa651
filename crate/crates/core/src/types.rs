//! Domain value objects shared by every module.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::eval::AnswerExtraction;
use crate::text::{branch_count, normalize_label};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataError {
    #[error("example id is empty in {0} split")]
    EmptyId(Split),
    #[error("duplicate example id `{id}` in {split} split")]
    DuplicateId { split: Split, id: String },
    #[error("example id `{id}` appears in both {first} and {second} splits")]
    SharedId { id: String, first: Split, second: Split },
    #[error("example `{0}` has an empty gold label")]
    EmptyGold(String),
    #[error("gold label `{gold}` of example `{id}` is not in the label set")]
    LabelNotInSet { id: String, gold: String },
    #[error("training split is empty")]
    EmptyTrain,
    #[error("prompt text is empty")]
    EmptyPrompt,
    #[error("invalid pattern: {0}")]
    InvalidPattern(&'static str),
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(alloc::format!("unknown split `{other}`")),
        }
    }
}

/// One input/gold pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub input: String,
    pub gold: String,
}

impl Example {
    pub fn new(id: impl Into<String>, input: impl Into<String>, gold: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            input: input.into(),
            gold: gold.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplits {
    train: Vec<Example>,
    validation: Vec<Example>,
    test: Vec<Example>,
}

impl DatasetSplits {
    /// Checks id uniqueness within and across splits and non-empty gold labels.
    pub fn new(
        train: Vec<Example>,
        validation: Vec<Example>,
        test: Vec<Example>,
    ) -> Result<Self, DataError> {
        let splits = Self {
            train,
            validation,
            test,
        };
        let mut seen: Vec<(BTreeSet<&str>, Split)> = Vec::new();
        for split in [Split::Train, Split::Validation, Split::Test] {
            let mut ids = BTreeSet::new();
            for ex in splits.get(split) {
                if ex.id.is_empty() {
                    return Err(DataError::EmptyId(split));
                }
                if normalize_label(&ex.gold).is_empty() {
                    return Err(DataError::EmptyGold(ex.id.clone()));
                }
                if !ids.insert(ex.id.as_str()) {
                    return Err(DataError::DuplicateId {
                        split,
                        id: ex.id.clone(),
                    });
                }
                if let Some((_, first)) = seen.iter().find(|(s, _)| s.contains(ex.id.as_str())) {
                    return Err(DataError::SharedId {
                        id: ex.id.clone(),
                        first: *first,
                        second: split,
                    });
                }
            }
            seen.push((ids, split));
        }
        Ok(splits)
    }

    pub fn get(&self, split: Split) -> &[Example] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    pub fn train(&self) -> &[Example] {
        &self.train
    }

    pub fn validation(&self) -> &[Example] {
        &self.validation
    }

    pub fn test(&self) -> &[Example] {
        &self.test
    }

    /// Moves a seeded `fraction` of the training examples (at least one, at
    /// most `len - 1`) into the validation split. Order within each split is
    /// preserved.
    pub fn carve_validation(&self, fraction: f64, seed: u64) -> Result<Self, DataError> {
        let n = self.train.len();
        if n < 2 {
            return Err(DataError::InvalidConfig(
                "need at least 2 training examples to carve a validation split".into(),
            ));
        }
        let take = (libm::ceil(fraction * n as f64) as usize).clamp(1, n - 1);
        let mut rng = crate::rng::stream(seed, crate::rng::Stream::ValidationCarve, 0);
        let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, n, take).into_vec();
        picked.sort_unstable();
        let mut train = Vec::with_capacity(n - take);
        let mut validation = Vec::with_capacity(take);
        for (i, ex) in self.train.iter().enumerate() {
            if picked.binary_search(&i).is_ok() {
                validation.push(ex.clone());
            } else {
                train.push(ex.clone());
            }
        }
        Self::new(train, validation, self.test.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    #[default]
    ExactMatch,
}

/// A task: its data, optional closed label set, answer extraction rule and measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub description: String,
    pub splits: DatasetSplits,
    pub label_set: Option<Vec<String>>,
    pub extraction: AnswerExtraction,
    pub measure: Measure,
}

impl TaskSpec {
    pub fn new(
        name: impl Into<String>,
        description: impl Into<String>,
        splits: DatasetSplits,
        label_set: Option<Vec<String>>,
        extraction: AnswerExtraction,
    ) -> Result<Self, DataError> {
        if let Some(labels) = &label_set {
            let normalized: BTreeSet<String> = labels.iter().map(|l| normalize_label(l)).collect();
            for split in [Split::Train, Split::Validation, Split::Test] {
                for ex in splits.get(split) {
                    if !normalized.contains(&normalize_label(&ex.gold)) {
                        return Err(DataError::LabelNotInSet {
                            id: ex.id.clone(),
                            gold: ex.gold.clone(),
                        });
                    }
                }
            }
        }
        Ok(Self {
            name: name.into(),
            description: description.into(),
            splits,
            label_set,
            extraction,
            measure: Measure::ExactMatch,
        })
    }

    pub fn with_splits(&self, splits: DatasetSplits) -> Self {
        Self {
            splits,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    Initial,
    Revised,
    Pruned,
}

/// A prompt together with its lineage and scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptCandidate {
    pub id: String,
    pub text: String,
    pub parent_id: Option<String>,
    pub iteration_created: u32,
    pub source: CandidateSource,
    pub applied_patterns: Vec<String>,
    pub branch_count: usize,
    pub val_score: Option<f64>,
    pub train_score: Option<f64>,
}

impl PromptCandidate {
    /// A root candidate (`source = initial`, no parent, iteration 0).
    pub fn initial(id: impl Into<String>, text: impl Into<String>) -> Result<Self, DataError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(DataError::EmptyPrompt);
        }
        Ok(Self {
            id: id.into(),
            branch_count: branch_count(&text),
            text,
            parent_id: None,
            iteration_created: 0,
            source: CandidateSource::Initial,
            applied_patterns: Vec::new(),
            val_score: None,
            train_score: None,
        })
    }

    /// A revision of `parent`. `iteration` must be at least 1.
    pub fn derived(
        id: impl Into<String>,
        text: impl Into<String>,
        parent: &PromptCandidate,
        iteration: u32,
        applied_patterns: Vec<String>,
    ) -> Result<Self, DataError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(DataError::EmptyPrompt);
        }
        Ok(Self {
            id: id.into(),
            branch_count: branch_count(&text),
            text,
            parent_id: Some(parent.id.clone()),
            iteration_created: iteration.max(1),
            source: CandidateSource::Revised,
            applied_patterns,
            val_score: None,
            train_score: None,
        })
    }

    /// Checks the lineage and score invariants.
    pub fn check(&self) -> Result<(), DataError> {
        if self.text.trim().is_empty() {
            return Err(DataError::EmptyPrompt);
        }
        let initial = self.source == CandidateSource::Initial;
        if initial != self.parent_id.is_none() || initial != (self.iteration_created == 0) {
            return Err(DataError::InvalidConfig(alloc::format!(
                "candidate `{}` has inconsistent lineage",
                self.id
            )));
        }
        for score in [self.val_score, self.train_score].into_iter().flatten() {
            if !(0.0..=1.0).contains(&score) {
                return Err(DataError::InvalidConfig(alloc::format!(
                    "candidate `{}` score {score} outside [0, 1]",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// A misclassified example with what the target model said.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureCase {
    pub example: Example,
    pub model_output: String,
    pub extracted_answer: String,
}

/// A summarized error pattern and its importance score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub id: String,
    pub description: String,
    pub importance: f64,
    pub source_reason_ids: Vec<String>,
}

impl Pattern {
    pub fn new(
        id: impl Into<String>,
        description: impl Into<String>,
        importance: f64,
        source_reason_ids: Vec<String>,
    ) -> Result<Self, DataError> {
        let description = description.into();
        if description.trim().is_empty() {
            return Err(DataError::InvalidPattern("empty description"));
        }
        if !importance.is_finite() {
            return Err(DataError::InvalidPattern("importance is not finite"));
        }
        Ok(Self {
            id: id.into(),
            description,
            importance,
            source_reason_ids,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternStrategy {
    #[default]
    TopScore,
    Random,
}

impl core::str::FromStr for PatternStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "top_score" | "top-score" => Ok(Self::TopScore),
            "random" => Ok(Self::Random),
            other => Err(alloc::format!("unknown pattern strategy `{other}`")),
        }
    }
}

/// Early-stop rule on the validation history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrePruneRule {
    pub min_delta: f64,
    pub patience: u32,
}

impl Default for PrePruneRule {
    fn default() -> Self {
        Self {
            min_delta: 0.01,
            patience: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub iterations: u32,
    pub failures_per_iter: usize,
    pub top_patterns: usize,
    pub pattern_strategy: PatternStrategy,
    pub seed: u64,
    pub pre_prune: PrePruneRule,
    pub analyzer_temperature: f64,
    pub summarizer_temperature: f64,
    pub revisor_temperature: f64,
    pub target_temperature: f64,
    pub val_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            iterations: 5,
            failures_per_iter: 5,
            top_patterns: 1,
            pattern_strategy: PatternStrategy::TopScore,
            seed: 0,
            pre_prune: PrePruneRule::default(),
            analyzer_temperature: 1.0,
            summarizer_temperature: 0.0,
            revisor_temperature: 0.0,
            target_temperature: 0.0,
            val_fraction: 0.10,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |msg: &str| Err(DataError::InvalidConfig(msg.to_string()));
        if self.iterations < 1 {
            return bad("iterations must be >= 1");
        }
        if self.failures_per_iter < 1 {
            return bad("failures_per_iter must be >= 1");
        }
        if self.top_patterns < 1 {
            return bad("top_patterns must be >= 1");
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad("val_fraction must lie in (0, 1)");
        }
        if self.pre_prune.min_delta.is_nan() || self.pre_prune.min_delta < 0.0 {
            return bad("min_delta must be >= 0");
        }
        for t in [
            self.analyzer_temperature,
            self.summarizer_temperature,
            self.revisor_temperature,
            self.target_temperature,
        ] {
            if !(0.0..=2.0).contains(&t) {
                return bad("temperatures must lie in [0, 2]");
            }
        }
        Ok(())
    }
}
