//! Toolkit for evaluating score-based judges as *system rankers*.
//!
//! The pipeline: collect per-(instruction, system) judgment scores from a
//! chat-completions endpoint ([`judge`]), aggregate them into per-system
//! rankings ([`aggregate`]), compare those rankings to a gold ranking derived
//! from human pairwise battles ([`gold`], [`metrics`]), and characterize how
//! a judge behaves — how decisive it is and which systems it favors
//! ([`behavior`]). A synthetic-world generator ([`synth`]) produces data with
//! known ground truth so every stage can be validated end to end.
//!
//! The CLI in `main.rs` wires these together behind `collect`, `rank`,
//! `behavior`, `report`, and `synth` subcommands; the same entry points are
//! callable as a library through [`pipeline`].

pub mod aggregate;
pub mod behavior;
pub mod betainc;
pub mod bt;
pub mod config;
pub mod data;
pub mod gold;
pub mod ids;
pub mod judge;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod synth;
pub mod winrate;

pub use ids::{InstructionId, JudgeModelId, SystemId};
pub use matrix::ScoreMatrix;
pub use model::{
    AggregationLabel, BattleRecord, JudgeProfile, JudgeSpec, Outcome, RankingSource,
    RankingVector, Realization,
};
pub use winrate::{WinRateEntry, WinRateSource, WinRateTable};
