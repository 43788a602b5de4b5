//! Normalized JSONL file formats and their loaders/writers.
//!
//! Three record shapes, one JSON object per line:
//!
//! * responses: `{instruction_id, instruction_text, system_id, response_text}`
//! * battles: `{system_a, system_b, outcome, tags, record_id?}` with
//!   `outcome` one of `a_wins` / `b_wins` / `tie`
//! * judgments: `{judge_model, realization, anchor_system?, instruction_id,
//!   system_id, raw_output, score?}`
//!
//! Loaders report the file and 1-based line number on any malformed record,
//! skip blank lines, and tolerate unknown fields (forward compatibility for
//! upstream converters).

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{InstructionId, JudgeModelId, SystemId};
use crate::model::{BattleRecord, JudgeSpec, ModelError, Outcome, Realization};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: invalid record: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: duplicate {what}")]
    Duplicate {
        path: PathBuf,
        line: usize,
        what: String,
    },
    #[error("{path} contains no records")]
    EmptyFile { path: PathBuf },
    #[error("no battles remain after applying tag filter {filter:?} to {path}")]
    EmptyAfterFilter { path: PathBuf, filter: Vec<String> },
}

/// One (instruction, system) response pair as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub instruction_id: InstructionId,
    pub instruction_text: String,
    pub system_id: SystemId,
    pub response_text: String,
}

/// One battle as stored on disk. `tags` label data slices (e.g. language or
/// difficulty); `record_id` is the upstream row identifier when known.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BattleFileRecord {
    pub system_a: SystemId,
    pub system_b: SystemId,
    pub outcome: Outcome,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_id: Option<String>,
}

/// One judgment as stored on disk. `score` is absent when parsing the raw
/// output failed; re-parsing `raw_output` reproduces the failure reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub judge_model: JudgeModelId,
    pub realization: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_system: Option<SystemId>,
    pub instruction_id: InstructionId,
    pub system_id: SystemId,
    pub raw_output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl JudgmentRecord {
    pub fn from_parts(
        judge: &JudgeSpec,
        instruction_id: InstructionId,
        system_id: SystemId,
        raw_output: String,
        score: Option<f64>,
    ) -> Self {
        Self {
            judge_model: judge.model.clone(),
            realization: judge.realization.tag().to_owned(),
            anchor_system: judge.realization.anchor_system().cloned(),
            instruction_id,
            system_id,
            raw_output,
            score,
        }
    }

    /// The judge this record belongs to; errors on an unknown realization
    /// tag or an inconsistent anchor field.
    pub fn judge_spec(&self) -> Result<JudgeSpec, ModelError> {
        let realization = Realization::from_parts(&self.realization, self.anchor_system.clone())?;
        Ok(JudgeSpec::new(self.judge_model.clone(), realization))
    }
}

/// An in-memory response corpus: instruction texts plus one response per
/// (instruction, system) cell, with axes in first-appearance order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    instructions: Vec<InstructionId>,
    systems: Vec<SystemId>,
    instruction_text: HashMap<InstructionId, String>,
    responses: HashMap<(InstructionId, SystemId), String>,
}

impl Corpus {
    /// Build from records; duplicate (instruction, system) pairs and
    /// inconsistent instruction texts are rejected via the returned index.
    pub fn from_records(records: Vec<ResponseRecord>) -> Result<Self, String> {
        let mut corpus = Corpus {
            instructions: Vec::new(),
            systems: Vec::new(),
            instruction_text: HashMap::new(),
            responses: HashMap::new(),
        };
        for record in records {
            corpus.push(record)?;
        }
        Ok(corpus)
    }

    fn push(&mut self, record: ResponseRecord) -> Result<(), String> {
        match self.instruction_text.get(&record.instruction_id) {
            None => {
                self.instructions.push(record.instruction_id.clone());
                self.instruction_text
                    .insert(record.instruction_id.clone(), record.instruction_text);
            }
            Some(existing) if *existing != record.instruction_text => {
                return Err(format!(
                    "instruction `{}` appears with two different texts",
                    record.instruction_id
                ));
            }
            Some(_) => {}
        }
        if !self.systems.contains(&record.system_id) {
            self.systems.push(record.system_id.clone());
        }
        let key = (record.instruction_id, record.system_id);
        if self.responses.contains_key(&key) {
            return Err(format!("response for ({}, {})", key.0, key.1));
        }
        self.responses.insert(key, record.response_text);
        Ok(())
    }

    pub fn instructions(&self) -> &[InstructionId] {
        &self.instructions
    }

    pub fn systems(&self) -> &[SystemId] {
        &self.systems
    }

    pub fn instruction_text(&self, id: &InstructionId) -> Option<&str> {
        self.instruction_text.get(id).map(String::as_str)
    }

    pub fn response(&self, instruction: &InstructionId, system: &SystemId) -> Option<&str> {
        self.responses
            .get(&(instruction.clone(), system.clone()))
            .map(String::as_str)
    }

    /// Number of (instruction, system) response entries.
    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    /// Records in deterministic instruction-major order. Cells with no
    /// response are skipped (the corpus may be ragged).
    pub fn to_records(&self) -> Vec<ResponseRecord> {
        let mut records = Vec::with_capacity(self.responses.len());
        for instruction in &self.instructions {
            for system in &self.systems {
                if let Some(text) = self.response(instruction, system) {
                    records.push(ResponseRecord {
                        instruction_id: instruction.clone(),
                        instruction_text: self.instruction_text[instruction].clone(),
                        system_id: system.clone(),
                        response_text: text.to_owned(),
                    });
                }
            }
        }
        records
    }
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, DataError> {
    let file = File::open(path).map_err(|source| DataError::Read {
        path: path.to_owned(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| DataError::Read {
            path: path.to_owned(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|err| DataError::Record {
            path: path.to_owned(),
            line: line_no,
            message: err.to_string(),
        })?;
        records.push((line_no, record));
    }
    Ok(records)
}

fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), DataError> {
    let write_err = |source| DataError::Write {
        path: path.to_owned(),
        source,
    };
    let mut file = std::io::BufWriter::new(File::create(path).map_err(write_err)?);
    for record in records {
        let json = serde_json::to_string(record).expect("record serialization cannot fail");
        file.write_all(json.as_bytes()).map_err(write_err)?;
        file.write_all(b"\n").map_err(write_err)?;
    }
    file.flush().map_err(write_err)?;
    Ok(())
}

/// Load a response corpus. Every record is indexed; duplicate
/// (instruction, system) pairs are an error naming the pair and line.
pub fn load_responses(path: impl AsRef<Path>) -> Result<Corpus, DataError> {
    let path = path.as_ref();
    let records: Vec<(usize, ResponseRecord)> = read_jsonl(path)?;
    if records.is_empty() {
        return Err(DataError::EmptyFile {
            path: path.to_owned(),
        });
    }
    let mut corpus = Corpus::from_records(Vec::new()).expect("empty corpus is valid");
    for (line, record) in records {
        corpus.push(record).map_err(|what| DataError::Duplicate {
            path: path.to_owned(),
            line,
            what,
        })?;
    }
    Ok(corpus)
}

pub fn write_responses(path: impl AsRef<Path>, corpus: &Corpus) -> Result<(), DataError> {
    write_jsonl(path.as_ref(), &corpus.to_records())
}

/// Load battles, keeping only records that carry **all** `tag_filter` tags
/// (an empty filter keeps everything).
///
/// Records with a `record_id` are deduplicated on
/// (system_a, system_b, outcome, record_id): an exact repeat collapses to
/// one. Records without a `record_id` are never collapsed — repeated battles
/// between the same pair are real data. Ties are retained; the consumer's
/// tie policy decides their weight.
pub fn load_battles(
    path: impl AsRef<Path>,
    tag_filter: &[String],
) -> Result<Vec<BattleRecord>, DataError> {
    let path = path.as_ref();
    let records: Vec<(usize, BattleFileRecord)> = read_jsonl(path)?;
    if records.is_empty() {
        return Err(DataError::EmptyFile {
            path: path.to_owned(),
        });
    }
    let mut battles = Vec::new();
    let mut seen: HashSet<(SystemId, SystemId, Outcome, String)> = HashSet::new();
    for (line, record) in records {
        if !tag_filter.iter().all(|t| record.tags.iter().any(|r| r == t)) {
            continue;
        }
        if let Some(record_id) = &record.record_id {
            let key = (
                record.system_a.clone(),
                record.system_b.clone(),
                record.outcome,
                record_id.clone(),
            );
            if !seen.insert(key) {
                continue; // exact duplicate of an identified record
            }
        }
        let battle = BattleRecord::new(record.system_a, record.system_b, record.outcome)
            .map_err(|err| DataError::Record {
                path: path.to_owned(),
                line,
                message: err.to_string(),
            })?;
        battles.push(battle);
    }
    if battles.is_empty() {
        return Err(DataError::EmptyAfterFilter {
            path: path.to_owned(),
            filter: tag_filter.to_vec(),
        });
    }
    Ok(battles)
}

pub fn write_battles(path: impl AsRef<Path>, battles: &[BattleRecord]) -> Result<(), DataError> {
    let records: Vec<BattleFileRecord> = battles
        .iter()
        .map(|b| BattleFileRecord {
            system_a: b.system_a.clone(),
            system_b: b.system_b.clone(),
            outcome: b.outcome,
            tags: Vec::new(),
            record_id: None,
        })
        .collect();
    write_jsonl(path.as_ref(), &records)
}

/// Load judgment records; realization tags and anchor fields are validated
/// per line so schema problems surface with their location.
pub fn load_judgments(path: impl AsRef<Path>) -> Result<Vec<JudgmentRecord>, DataError> {
    let path = path.as_ref();
    let records: Vec<(usize, JudgmentRecord)> = read_jsonl(path)?;
    if records.is_empty() {
        return Err(DataError::EmptyFile {
            path: path.to_owned(),
        });
    }
    for (line, record) in &records {
        record.judge_spec().map_err(|err| DataError::Record {
            path: path.to_owned(),
            line: *line,
            message: err.to_string(),
        })?;
    }
    Ok(records.into_iter().map(|(_, r)| r).collect())
}

pub fn write_judgments(
    path: impl AsRef<Path>,
    records: &[JudgmentRecord],
) -> Result<(), DataError> {
    write_jsonl(path.as_ref(), records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn write_lines(dir: &TempDir, name: &str, lines: &[&str]) -> PathBuf {
        let path = dir.path().join(name);
        std::fs::write(&path, lines.join("\n")).unwrap();
        path
    }

    #[test]
    fn responses_round_trip() {
        let dir = TempDir::new().unwrap();
        let path = write_lines(
            &dir,
            "responses.jsonl",
            &[
                r#"{"instruction_id":"i1","instruction_text":"Write a haiku","system_id":"a","response_text":"..."}"#,
                r#"{"instruction_id":"i1","instruction_text":"Write a haiku","system_id":"b","response_text":"...b"}"#,
            ],
        );
        let corpus = load_responses(&path).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.instructions().len(), 1);
        assert_eq!(corpus.systems().len(), 2);

        let out = dir.path().join("copy.jsonl");
        write_responses(&out, &corpus).unwrap();
        assert_eq!(load_responses(&out).unwrap(), corpus);
    }

    #[test]
    fn duplicate_response_cell_is_an_error_naming_the_pair() {
        let dir = TempDir::new().unwrap();
        let path = write_lines(
            &dir,
            "responses.jsonl",
            &[
                r#"{"instruction_id":"i1","instruction_text":"t","system_id":"a","response_text":"x"}"#,
                r#"{"instruction_id":"i1","instruction_text":"t","system_id":"a","response_text":"y"}"#,
            ],
        );
        let err = load_responses(&path).unwrap_err();
        let message = err.to_string();
        assert!(message.contains(":2:"), "{message}");
        assert!(message.contains("(i1, a)"), "{message}");
    }

    #[test]
    fn malformed_json_reports_line_number() {
        let dir = TempDir::new().unwrap();
        let path = write_lines(
            &dir,
            "battles.jsonl",
            &[
                r#"{"system_a":"a","system_b":"b","outcome":"a_wins","tags":[]}"#,
                r#"{"system_a":"a","system_b":"b","outcome":"#,
            ],
        );
        let err = load_battles(&path, &[]).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
    }

    #[test]
    fn unknown_outcome_value_is_an_error_naming_the_value() {
        let dir = TempDir::new().unwrap();
        let path = write_lines(
            &dir,
            "battles.jsonl",
            &[r#"{"system_a":"a","system_b":"b","outcome":"draw","tags":[]}"#],
        );
        let err = load_battles(&path, &[]).unwrap_err();
        assert!(err.to_string().contains("draw"), "{err}");
    }

    #[test]
    fn tag_filter_requires_all_tags_and_reports_empty_result() {
        let dir = TempDir::new().unwrap();
        let path = write_lines(
            &dir,
            "battles.jsonl",
            &[
                r#"{"system_a":"a","system_b":"b","outcome":"a_wins","tags":["english","hard"]}"#,
                r#"{"system_a":"a","system_b":"b","outcome":"b_wins","tags":["english"]}"#,
            ],
        );
        let both = load_battles(&path, &["english".into(), "hard".into()]).unwrap();
        assert_eq!(both.len(), 1);
        assert_eq!(both[0].outcome, Outcome::AWins);
        let err = load_battles(&path, &["spanish".into()]).unwrap_err();
        assert!(matches!(err, DataError::EmptyAfterFilter { .. }));
    }

    #[test]
    fn dedup_applies_only_to_identified_records() {
        let dir = TempDir::new().unwrap();
        let path = write_lines(
            &dir,
            "battles.jsonl",
            &[
                r#"{"system_a":"a","system_b":"b","outcome":"a_wins","tags":[],"record_id":"r1"}"#,
                r#"{"system_a":"a","system_b":"b","outcome":"a_wins","tags":[],"record_id":"r1"}"#,
                r#"{"system_a":"a","system_b":"b","outcome":"a_wins","tags":[]}"#,
                r#"{"system_a":"a","system_b":"b","outcome":"a_wins","tags":[]}"#,
                r#"{"system_a":"a","system_b":"b","outcome":"tie","tags":[],"record_id":"r1"}"#,
            ],
        );
        let battles = load_battles(&path, &[]).unwrap();
        // r1 collapses to one, the two anonymous repeats are kept, the tie
        // has a different outcome so it is not a duplicate of r1.
        assert_eq!(battles.len(), 4);
        assert_eq!(
            battles.iter().filter(|b| b.outcome == Outcome::Tie).count(),
            1
        );
    }

    #[test]
    fn self_battle_rejected_with_location() {
        let dir = TempDir::new().unwrap();
        let path = write_lines(
            &dir,
            "battles.jsonl",
            &[r#"{"system_a":"a","system_b":"a","outcome":"tie","tags":[]}"#],
        );
        let err = load_battles(&path, &[]).unwrap_err();
        assert!(err.to_string().contains(":1:"), "{err}");
    }

    #[test]
    fn judgments_round_trip_and_validate_realization() {
        let dir = TempDir::new().unwrap();
        let path = write_lines(
            &dir,
            "judgments.jsonl",
            &[
                r#"{"judge_model":"j","realization":"numeric","instruction_id":"i1","system_id":"a","raw_output":"85","score":85.0}"#,
                r#"{"judge_model":"j","realization":"numeric","instruction_id":"i1","system_id":"b","raw_output":"oops"}"#,
            ],
        );
        let records = load_judgments(&path).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[1].score, None);

        let out = dir.path().join("copy.jsonl");
        write_judgments(&out, &records).unwrap();
        assert_eq!(load_judgments(&out).unwrap(), records);

        let bad = write_lines(
            &dir,
            "bad.jsonl",
            &[r#"{"judge_model":"j","realization":"anchor","instruction_id":"i1","system_id":"a","raw_output":""}"#],
        );
        let err = load_judgments(&bad).unwrap_err();
        assert!(err.to_string().contains("anchor_system"), "{err}");
    }

    #[test]
    fn blank_lines_skipped_and_empty_file_rejected() {
        let dir = TempDir::new().unwrap();
        let path = write_lines(
            &dir,
            "battles.jsonl",
            &[
                "",
                r#"{"system_a":"a","system_b":"b","outcome":"tie","tags":[]}"#,
                "   ",
            ],
        );
        assert_eq!(load_battles(&path, &[]).unwrap().len(), 1);

        let empty = write_lines(&dir, "empty.jsonl", &[""]);
        assert!(matches!(
            load_battles(&empty, &[]),
            Err(DataError::EmptyFile { .. })
        ));
    }
}
