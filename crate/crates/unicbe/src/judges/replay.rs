//! Recorded pairwise preferences replayed as a judge.
//!
//! Input is JSON Lines, one judgment per line:
//! `{"model_a": "x", "model_b": "y", "sample": "q1", "winner": "a" | "b" | "tie"}`
//! or the same with `"r": <float in [0, 1]>` instead of `winner`.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::Tuple;
use crate::session::{ModelId, Registry, SampleId, Session, SessionConfig};

use super::{Judge, JudgeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    A,
    B,
    Tie,
}

/// Sample identifiers may be strings or integers in the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum SampleKey {
    Text(String),
    Number(u64),
}

impl fmt::Display for SampleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleKey::Text(s) => f.write_str(s),
            SampleKey::Number(n) => write!(f, "{n}"),
        }
    }
}

/// One input line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayLine {
    pub model_a: String,
    pub model_b: String,
    sample: SampleKey,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub winner: Option<Winner>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
}

impl ReplayLine {
    pub fn new(model_a: impl Into<String>, model_b: impl Into<String>, sample: impl Into<String>, r: f64) -> Self {
        Self {
            model_a: model_a.into(),
            model_b: model_b.into(),
            sample: SampleKey::Text(sample.into()),
            winner: None,
            r: Some(r),
        }
    }

    pub fn sample(&self) -> String {
        self.sample.to_string()
    }

    /// Preference of `model_a` over `model_b`.
    pub fn preference(&self) -> Result<f64, String> {
        match (self.winner, self.r) {
            (Some(_), Some(_)) => Err("give either \"winner\" or \"r\", not both".into()),
            (None, None) => Err("missing \"winner\" or \"r\"".into()),
            (Some(Winner::A), None) => Ok(1.0),
            (Some(Winner::B), None) => Ok(0.0),
            (Some(Winner::Tie), None) => Ok(0.5),
            (None, Some(r)) if (0.0..=1.0).contains(&r) => Ok(r),
            (None, Some(r)) => Err(format!("r = {r} is outside [0, 1]")),
        }
    }
}

/// Two lines disagreeing about the same tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct Conflict {
    pub model_a: String,
    pub model_b: String,
    pub sample: String,
    pub first_line: usize,
    pub line: usize,
}

impl fmt::Display for Conflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}) on line {} contradicts line {}",
            self.model_a, self.model_b, self.sample, self.line, self.first_line
        )
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("reading input: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{} conflicting duplicate(s): {}", .0.len(), .0.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("; "))]
    Conflicts(Vec<Conflict>),
}

/// Summary of an ingested dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestSummary {
    pub models: usize,
    pub samples: usize,
    pub records: usize,
    /// Judged tuples over `N · M(M-1)/2`.
    pub coverage: f64,
    pub duplicates: usize,
    pub conflicts: usize,
}

impl fmt::Display for IngestSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "models (M):     {}", self.models)?;
        writeln!(f, "samples (N):    {}", self.samples)?;
        writeln!(f, "records:        {}", self.records)?;
        writeln!(f, "coverage:       {:.4}", self.coverage)?;
        writeln!(f, "duplicates:     {}", self.duplicates)?;
        write!(f, "conflicts:      {}", self.conflicts)
    }
}

/// Canonical preference map over named models and samples.
#[derive(Debug, Clone, Default)]
pub struct ReplayDataset {
    models: Registry,
    samples: Registry,
    /// `(lo, hi, sample) → r` of `lo` over `hi`, with the source line.
    values: HashMap<(u32, u32, u32), (f64, usize)>,
    duplicates: usize,
}

impl ReplayDataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses JSON Lines; blank lines are skipped.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, IngestError> {
        let mut ds = Self::new();
        let mut conflicts = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line_no = n + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: ReplayLine = serde_json::from_str(&line).map_err(|e| IngestError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let r = parsed.preference().map_err(|message| IngestError::Parse { line: line_no, message })?;
            if parsed.model_a == parsed.model_b {
                return Err(IngestError::Parse {
                    line: line_no,
                    message: format!("model {:?} compared with itself", parsed.model_a),
                });
            }
            if let Err(c) = ds.insert_at(&parsed.model_a, &parsed.model_b, &parsed.sample(), r, line_no) {
                conflicts.push(c);
            }
        }
        if conflicts.is_empty() {
            Ok(ds)
        } else {
            Err(IngestError::Conflicts(conflicts))
        }
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, IngestError> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    fn id(reg: &mut Registry, name: &str) -> u32 {
        match reg.find(name) {
            Some(i) => i,
            None => reg.register(name).expect("name is new"),
        }
    }

    fn insert_at(&mut self, a: &str, b: &str, sample: &str, r: f64, line: usize) -> Result<(), Conflict> {
        let ia = Self::id(&mut self.models, a);
        let ib = Self::id(&mut self.models, b);
        let k = Self::id(&mut self.samples, sample);
        let (key, v) = if ia < ib { ((ia, ib, k), r) } else { ((ib, ia, k), 1.0 - r) };
        match self.values.get(&key) {
            Some(&(old, first_line)) => {
                if old == v {
                    self.duplicates += 1;
                    Ok(())
                } else {
                    Err(Conflict {
                        model_a: a.into(),
                        model_b: b.into(),
                        sample: sample.into(),
                        first_line,
                        line,
                    })
                }
            }
            None => {
                self.values.insert(key, (v, line));
                Ok(())
            }
        }
    }

    /// Adds one judgment; a conflicting value for an existing tuple is rejected.
    pub fn insert(&mut self, a: &str, b: &str, sample: &str, r: f64) -> Result<(), Conflict> {
        let line = self.values.len() + self.duplicates + 1;
        self.insert_at(a, b, sample, r, line)
    }

    pub fn models(&self) -> &Registry {
        &self.models
    }

    pub fn samples(&self) -> &Registry {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    /// Preference of `a` over `b` on `k`, flipping orientation as needed.
    pub fn lookup(&self, a: ModelId, b: ModelId, k: SampleId) -> Option<f64> {
        if a == b {
            return None;
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let &(v, _) = self.values.get(&(lo.0, hi.0, k.0))?;
        Some(if a < b { v } else { 1.0 - v })
    }

    pub fn summary(&self) -> IngestSummary {
        let m = self.models.len();
        let n = self.samples.len();
        let full = n * m * m.saturating_sub(1) / 2;
        IngestSummary {
            models: m,
            samples: n,
            records: self.values.len(),
            coverage: if full == 0 { 0.0 } else { self.values.len() as f64 / full as f64 },
            duplicates: self.duplicates,
            conflicts: 0,
        }
    }

    /// Tuples of the full traversal with no recorded preference.
    pub fn holes(&self) -> Vec<Tuple> {
        let m = self.models.len() as u32;
        let n = self.samples.len() as u32;
        let mut out = Vec::new();
        for a in 0..m {
            for b in a + 1..m {
                for k in 0..n {
                    if !self.values.contains_key(&(a, b, k)) {
                        out.push(Tuple::new(ModelId(a), ModelId(b), SampleId(k)));
                    }
                }
            }
        }
        out
    }

    /// Writes every record as a JSON line with an explicit `r`, ordered and
    /// oriented by name so the output depends only on the content.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let name = |reg: &Registry, i: u32| reg.name(i).expect("registered").to_string();
        let mut rows: Vec<(String, String, String, f64)> = self
            .values
            .iter()
            .map(|(&(a, b, k), &(r, _))| {
                let (na, nb) = (name(&self.models, a), name(&self.models, b));
                let sample = name(&self.samples, k);
                if na <= nb {
                    (na, nb, sample, r)
                } else {
                    (nb, na, sample, 1.0 - r)
                }
            })
            .collect();
        rows.sort_by(|x, y| (&x.0, &x.1, &x.2).cmp(&(&y.0, &y.1, &y.2)));
        for (a, b, k, r) in rows {
            serde_json::to_writer(&mut w, &ReplayLine::new(a, b, k, r))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// A fresh session over this dataset's models and samples.
    pub fn session(&self, config: SessionConfig, seed: u64) -> Session {
        Session::new(self.models.clone(), self.samples.clone(), config, seed)
    }
}

/// Judge answering from a [`ReplayDataset`]; missing tuples yield `None`.
#[derive(Debug, Clone)]
pub struct ReplayJudge {
    data: Arc<ReplayDataset>,
}

impl ReplayJudge {
    pub fn new(data: Arc<ReplayDataset>) -> Self {
        Self { data }
    }

    pub fn dataset(&self) -> &ReplayDataset {
        &self.data
    }
}

impl Judge for ReplayJudge {
    fn judge(&mut self, t: Tuple) -> Result<Option<f64>, JudgeError> {
        if !self.data.models.contains(t.a.0) {
            return Err(JudgeError::UnknownModel(t.a));
        }
        if !self.data.models.contains(t.b.0) {
            return Err(JudgeError::UnknownModel(t.b));
        }
        if !self.data.samples.contains(t.sample.0) {
            return Err(JudgeError::UnknownSample(t.sample));
        }
        Ok(self.data.lookup(t.a, t.b, t.sample))
    }
}
