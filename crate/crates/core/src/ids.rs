//! Newtype identifiers for instructions, systems, and judge models.
//!
//! Identifiers are validated at construction: leading/trailing whitespace is
//! trimmed and empty strings are rejected, so two ids compare equal exactly
//! when their trimmed text is equal.

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{kind} id is empty after trimming whitespace")]
pub struct EmptyIdError {
    pub kind: &'static str,
}

macro_rules! id_newtype {
    ($(#[$doc:meta])* $name:ident, $kind:literal) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(raw: impl AsRef<str>) -> Result<Self, EmptyIdError> {
                let trimmed = raw.as_ref().trim();
                if trimmed.is_empty() {
                    return Err(EmptyIdError { kind: $kind });
                }
                Ok(Self(trimmed.to_owned()))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl std::str::FromStr for $name {
            type Err = EmptyIdError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::new(s)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(deserializer)?;
                Self::new(raw).map_err(serde::de::Error::custom)
            }
        }
    };
}

id_newtype!(
    /// Identifies one instruction (user prompt) in a corpus.
    InstructionId,
    "instruction"
);
id_newtype!(
    /// Identifies one system (model under evaluation).
    SystemId,
    "system"
);
id_newtype!(
    /// Identifies one judge model (the scoring LLM), e.g. an API model name.
    JudgeModelId,
    "judge model"
);
