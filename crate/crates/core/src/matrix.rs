//! The K x L score matrix: one judge's scores over instructions x systems.

use std::collections::HashMap;

use thiserror::Error;

use crate::data::JudgmentRecord;
use crate::ids::{InstructionId, SystemId};
use crate::model::{JudgeSpec, ModelError};

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot build a score matrix from zero judgment records")]
    NoRecords,
    #[error("judgment records mix judges: `{first}` and `{second}`")]
    MixedJudges { first: String, second: String },
    #[error("duplicate instruction id `{0}`")]
    DuplicateInstruction(InstructionId),
    #[error("duplicate system id `{0}`")]
    DuplicateSystem(SystemId),
    #[error("unknown instruction id `{0}`")]
    UnknownInstruction(InstructionId),
    #[error("unknown system id `{0}`")]
    UnknownSystem(SystemId),
    #[error(
        "conflicting judgments for ({instruction}, {system}): {existing:?} vs {incoming:?}"
    )]
    ConflictingCell {
        instruction: InstructionId,
        system: SystemId,
        existing: Option<f64>,
        incoming: Option<f64>,
    },
    #[error("resample index {index} out of range for {n_instructions} instructions")]
    ResampleIndexOutOfRange { index: usize, n_instructions: usize },
}

/// Scores assigned by a single judge: rows are instructions, columns are
/// systems, cells are `Some(score)` or `None` for a missing/failed judgment.
///
/// Row and column ids are unique and every id lookup is total: asking about
/// an id the matrix does not know is an error, never a silent `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    judge: JudgeSpec,
    instructions: Vec<InstructionId>,
    systems: Vec<SystemId>,
    instruction_index: HashMap<InstructionId, usize>,
    system_index: HashMap<SystemId, usize>,
    /// Row-major K x L cells.
    cells: Vec<Option<f64>>,
}

impl ScoreMatrix {
    /// An all-missing matrix over the given axes. Ids must be unique.
    pub fn new(
        judge: JudgeSpec,
        instructions: Vec<InstructionId>,
        systems: Vec<SystemId>,
    ) -> Result<Self, MatrixError> {
        let mut instruction_index = HashMap::with_capacity(instructions.len());
        for (i, id) in instructions.iter().enumerate() {
            if instruction_index.insert(id.clone(), i).is_some() {
                return Err(MatrixError::DuplicateInstruction(id.clone()));
            }
        }
        let mut system_index = HashMap::with_capacity(systems.len());
        for (i, id) in systems.iter().enumerate() {
            if system_index.insert(id.clone(), i).is_some() {
                return Err(MatrixError::DuplicateSystem(id.clone()));
            }
        }
        let cells = vec![None; instructions.len() * systems.len()];
        Ok(Self {
            judge,
            instructions,
            systems,
            instruction_index,
            system_index,
            cells,
        })
    }

    /// Build from judgment records of a single judge.
    ///
    /// Axes are taken in first-appearance order. Two records for the same
    /// cell are an error unless they carry the identical score (then they
    /// collapse); scores are validated against the realization's range.
    pub fn from_judgments(records: &[JudgmentRecord]) -> Result<Self, MatrixError> {
        let first = records.first().ok_or(MatrixError::NoRecords)?;
        let judge = first.judge_spec()?;

        let mut instructions = Vec::new();
        let mut systems = Vec::new();
        let mut seen_instructions = HashMap::new();
        let mut seen_systems = HashMap::new();
        for record in records {
            let spec = record.judge_spec()?;
            if spec != judge {
                return Err(MatrixError::MixedJudges {
                    first: judge.to_string(),
                    second: spec.to_string(),
                });
            }
            if !seen_instructions.contains_key(&record.instruction_id) {
                seen_instructions.insert(record.instruction_id.clone(), instructions.len());
                instructions.push(record.instruction_id.clone());
            }
            if !seen_systems.contains_key(&record.system_id) {
                seen_systems.insert(record.system_id.clone(), systems.len());
                systems.push(record.system_id.clone());
            }
        }

        let mut matrix = Self::new(judge, instructions, systems)?;
        let mut touched: HashMap<(usize, usize), Option<f64>> = HashMap::new();
        for record in records {
            let ki = matrix.instruction_index[&record.instruction_id];
            let li = matrix.system_index[&record.system_id];
            if let Some(score) = record.score {
                matrix.judge.realization.validate_score(score)?;
            }
            match touched.get(&(ki, li)) {
                Some(&existing) if existing != record.score => {
                    return Err(MatrixError::ConflictingCell {
                        instruction: record.instruction_id.clone(),
                        system: record.system_id.clone(),
                        existing,
                        incoming: record.score,
                    });
                }
                Some(_) => {} // exact duplicate record: collapse
                None => {
                    touched.insert((ki, li), record.score);
                    matrix.cells[ki * matrix.systems.len() + li] = record.score;
                }
            }
        }
        Ok(matrix)
    }

    pub fn judge(&self) -> &JudgeSpec {
        &self.judge
    }

    pub fn n_instructions(&self) -> usize {
        self.instructions.len()
    }

    pub fn n_systems(&self) -> usize {
        self.systems.len()
    }

    pub fn instructions(&self) -> &[InstructionId] {
        &self.instructions
    }

    pub fn systems(&self) -> &[SystemId] {
        &self.systems
    }

    /// Score by id; unknown ids are an error.
    pub fn get(&self, instruction: &InstructionId, system: &SystemId) -> Result<Option<f64>, MatrixError> {
        let ki = *self
            .instruction_index
            .get(instruction)
            .ok_or_else(|| MatrixError::UnknownInstruction(instruction.clone()))?;
        let li = *self
            .system_index
            .get(system)
            .ok_or_else(|| MatrixError::UnknownSystem(system.clone()))?;
        Ok(self.cells[ki * self.systems.len() + li])
    }

    /// Score by position. Panics on out-of-range indices (programmer error).
    pub fn cell(&self, instruction_idx: usize, system_idx: usize) -> Option<f64> {
        self.cells[instruction_idx * self.systems.len() + system_idx]
    }

    /// Set a cell by id; the score is validated against the realization.
    pub fn set(
        &mut self,
        instruction: &InstructionId,
        system: &SystemId,
        score: f64,
    ) -> Result<(), MatrixError> {
        self.judge.realization.validate_score(score)?;
        let ki = *self
            .instruction_index
            .get(instruction)
            .ok_or_else(|| MatrixError::UnknownInstruction(instruction.clone()))?;
        let li = *self
            .system_index
            .get(system)
            .ok_or_else(|| MatrixError::UnknownSystem(system.clone()))?;
        self.cells[ki * self.systems.len() + li] = Some(score);
        Ok(())
    }

    /// Number of non-missing cells.
    pub fn n_scored(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    /// Row of one instruction (by position), length `n_systems`.
    pub fn row(&self, instruction_idx: usize) -> &[Option<f64>] {
        let l = self.systems.len();
        &self.cells[instruction_idx * l..(instruction_idx + 1) * l]
    }

    /// New matrix whose rows are `rows[i]`-th rows of `self`, in order.
    /// Because an instruction may repeat, rows get fresh synthetic ids
    /// (`resample-0000`, ...); aggregations never read instruction identity.
    pub fn resample_instructions(&self, rows: &[usize]) -> Result<ScoreMatrix, MatrixError> {
        let l = self.systems.len();
        let mut instructions = Vec::with_capacity(rows.len());
        let mut cells = Vec::with_capacity(rows.len() * l);
        for (new_idx, &row) in rows.iter().enumerate() {
            if row >= self.instructions.len() {
                return Err(MatrixError::ResampleIndexOutOfRange {
                    index: row,
                    n_instructions: self.instructions.len(),
                });
            }
            instructions.push(
                InstructionId::new(format!("resample-{new_idx:06}")).expect("non-empty id"),
            );
            cells.extend_from_slice(&self.cells[row * l..(row + 1) * l]);
        }
        let mut matrix = Self::new(self.judge.clone(), instructions, self.systems.clone())?;
        matrix.cells = cells;
        Ok(matrix)
    }

    /// Flatten back to judgment records (instruction-major). Missing cells
    /// produce no record; `raw_output` is the score's decimal rendering.
    pub fn to_judgment_records(&self) -> Vec<JudgmentRecord> {
        let mut records = Vec::with_capacity(self.n_scored());
        for (ki, instruction) in self.instructions.iter().enumerate() {
            for (li, system) in self.systems.iter().enumerate() {
                if let Some(score) = self.cells[ki * self.systems.len() + li] {
                    records.push(JudgmentRecord::from_parts(
                        &self.judge,
                        instruction.clone(),
                        system.clone(),
                        score.to_string(),
                        Some(score),
                    ));
                }
            }
        }
        records
    }
}
