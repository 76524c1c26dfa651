//! Run directories:
//!
//! ```text
//! <runs>/<run_id>/config                     frozen settings (JSON)
//! <runs>/<run_id>/events.log                 one event per line
//! <runs>/<run_id>/candidates/<id>.txt        prompt texts
//! <runs>/<run_id>/capture.log                every model call
//! <runs>/<run_id>/reports/<id>.<split>.jsonl per-example outcomes
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ampo_core::search::{Clock, EventSink, StrategyParams};
use ampo_core::{EvalReport, Event, EventBody, RunConfig};
use serde::{Deserialize, Serialize};

use crate::error::{config, runtime, Result};
use crate::events;

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64)
    }
}

/// Everything needed to rerun a run, written before it starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenConfig {
    pub run_id: String,
    pub run_config: RunConfig,
    pub params: StrategyParams,
    pub task: PathBuf,
    pub prompt: PathBuf,
    pub backend: String,
    pub target_model: String,
    pub optimizer_model: String,
    pub parallelism: usize,
    pub max_tokens: Option<u32>,
    pub templates_dir: Option<PathBuf>,
}

pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    /// Creates `<runs_dir>/<run_id>`; refuses to reuse an existing run.
    pub fn create(runs_dir: &Path, run_id: &str) -> Result<Self> {
        if run_id.is_empty() || run_id.contains(['/', '\\']) || run_id.starts_with('.') {
            return Err(config(format!("invalid run id `{run_id}`")));
        }
        let root = runs_dir.join(run_id);
        if root.exists() {
            return Err(config(format!("run directory {} already exists", root.display())));
        }
        let dir = Self { root };
        for sub in [dir.candidates_dir(), dir.reports_dir()] {
            fs::create_dir_all(&sub).map_err(|e| runtime(format!("cannot create {}: {e}", sub.display())))?;
        }
        Ok(dir)
    }

    pub fn open(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config_path(&self) -> PathBuf {
        self.root.join("config")
    }

    pub fn events_path(&self) -> PathBuf {
        self.root.join("events.log")
    }

    pub fn capture_path(&self) -> PathBuf {
        self.root.join("capture.log")
    }

    pub fn candidates_dir(&self) -> PathBuf {
        self.root.join("candidates")
    }

    pub fn candidate_path(&self, id: &str) -> PathBuf {
        self.candidates_dir().join(format!("{id}.txt"))
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn write_config(&self, frozen: &FrozenConfig) -> Result<()> {
        let json = serde_json::to_string_pretty(frozen).expect("config serializes");
        fs::write(self.config_path(), json + "\n").map_err(runtime)
    }

    pub fn read_config(&self) -> Result<FrozenConfig> {
        let path = self.config_path();
        let text = fs::read_to_string(&path).map_err(|e| config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| config(format!("{}: {e}", path.display())))
    }

    pub fn read_events(&self) -> Result<Vec<Event>> {
        let path = self.events_path();
        if !path.is_file() {
            return Err(config(format!("{}: no events.log", self.root.display())));
        }
        events::read(&path)
    }

    pub fn sink(&self) -> Result<FileSink> {
        let file = File::create(self.events_path()).map_err(runtime)?;
        Ok(FileSink {
            events: BufWriter::new(file),
            candidates: self.candidates_dir(),
            reports: self.reports_dir(),
            error: None,
        })
    }
}

/// Writes events as they arrive, so a crashed run leaves a usable prefix.
pub struct FileSink {
    events: BufWriter<File>,
    candidates: PathBuf,
    reports: PathBuf,
    error: Option<std::io::Error>,
}

impl FileSink {
    /// The first write error, if any.
    pub fn finish(mut self) -> Result<()> {
        if self.error.is_none() {
            if let Err(e) = self.events.flush() {
                self.error = Some(e);
            }
        }
        match self.error {
            Some(e) => Err(runtime(format!("writing run directory: {e}"))),
            None => Ok(()),
        }
    }

    fn try_record(&mut self, event: &Event) -> std::io::Result<()> {
        writeln!(self.events, "{}", events::to_line(event))?;
        self.events.flush()?;
        if let EventBody::Candidate(c) = &event.body {
            fs::write(self.candidates.join(format!("{}.txt", c.id)), &c.text)?;
        }
        Ok(())
    }

    fn try_report(&mut self, report: &EvalReport) -> std::io::Result<()> {
        let path = self.reports.join(format!("{}.{}.jsonl", report.prompt_id, report.split));
        let mut out = BufWriter::new(File::create(path)?);
        for outcome in &report.per_example {
            writeln!(out, "{}", serde_json::to_string(outcome).expect("outcome serializes"))?;
        }
        out.flush()
    }
}

impl EventSink for FileSink {
    fn record(&mut self, event: &Event) {
        if self.error.is_none() {
            self.error = self.try_record(event).err();
        }
    }

    fn report(&mut self, report: &EvalReport) {
        if self.error.is_none() {
            self.error = self.try_report(report).err();
        }
    }
}
