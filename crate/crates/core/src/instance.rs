//! Instance files: FAMS, TSG, or a raw game, told apart by their keys.

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fams::{encode_fams, FamsError, FamsInstance};
use crate::game::{AraGame, GameError};
use crate::tsg::{encode_tsg, TsgError, TsgInstance};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("cannot tell the instance kind: expected a `marshals`, `teams` or `k` key")]
    UnknownKind,
    #[error(transparent)]
    Fams(#[from] FamsError),
    #[error(transparent)]
    Tsg(#[from] TsgError),
    #[error(transparent)]
    Game(#[from] GameError),
}

impl From<serde_json::Error> for ParseError {
    fn from(e: serde_json::Error) -> Self {
        let message = e.to_string();
        // serde_json appends " at line L column C"; keep the bare message.
        let message = message
            .rsplit_once(" at line ")
            .map_or(message.as_str(), |(head, _)| head)
            .to_string();
        ParseError::Syntax {
            line: e.line(),
            column: e.column(),
            message,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Instance {
    Fams(FamsInstance),
    Tsg(TsgInstance),
    Game(AraGame),
}

impl Instance {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let has = |key: &str| value.as_object().is_some_and(|o| o.contains_key(key));
        // Re-parse the text itself so type errors keep their position.
        if has("marshals") {
            let inst: FamsInstance = serde_json::from_str(text)?;
            inst.validate()?;
            Ok(Instance::Fams(inst))
        } else if has("teams") {
            let inst: TsgInstance = serde_json::from_str(text)?;
            inst.validate()?;
            Ok(Instance::Tsg(inst))
        } else if has("k") {
            Ok(Instance::Game(serde_json::from_str(text)?))
        } else {
            Err(ParseError::UnknownKind)
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Instance::Fams(_) => "fams",
            Instance::Tsg(_) => "tsg",
            Instance::Game(_) => "game",
        }
    }

    pub fn game(&self) -> Result<AraGame, ParseError> {
        Ok(match self {
            Instance::Fams(i) => encode_fams(i)?,
            Instance::Tsg(i) => encode_tsg(i)?,
            Instance::Game(g) => g.clone(),
        })
    }

    pub fn generator(&self) -> Option<&serde_json::Value> {
        match self {
            Instance::Fams(i) => i.generator.as_ref(),
            Instance::Tsg(i) => i.generator.as_ref(),
            Instance::Game(_) => None,
        }
    }

    /// SHA-256 of the compact JSON serialization, hex encoded.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("instances serialize");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("instances serialize")
    }
}

impl From<FamsInstance> for Instance {
    fn from(i: FamsInstance) -> Self {
        Instance::Fams(i)
    }
}

impl From<TsgInstance> for Instance {
    fn from(i: TsgInstance) -> Self {
        Instance::Tsg(i)
    }
}

impl From<AraGame> for Instance {
    fn from(g: AraGame) -> Self {
        Instance::Game(g)
    }
}
