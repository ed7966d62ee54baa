//! The bol vocabulary: 31 monosyllabic utterance classes plus the stick-beat
//! (no bol) class, each with a fixed numeric code.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Code/label table for the 32 classes. Code 99 is accepted as an alias for
/// the stick class (32) when parsing.
pub const VOCABULARY: [(u8, &str); 32] = [
    (1, "a"),
    (2, "da"),
    (3, "dha"),
    (4, "dhat"),
    (5, "dhi"),
    (6, "dhin"),
    (7, "dhit"),
    (8, "ding"),
    (9, "e"),
    (10, "gadu"),
    (11, "gin"),
    (12, "ha"),
    (13, "hat"),
    (14, "hi"),
    (15, "jag"),
    (16, "jham"),
    (17, "ka"),
    (18, "ki"),
    (19, "ku"),
    (20, "na"),
    (21, "ri"),
    (22, "ta"),
    (23, "tak"),
    (24, "tam"),
    (25, "tan"),
    (26, "tat"),
    (27, "tei"),
    (28, "tom"),
    (29, "tta"),
    (30, "ya"),
    (31, "yum"),
    (32, "stick"),
];

pub const STICK_CODE: u8 = 32;
pub const STICK_ALIAS: u8 = 99;

/// A bol class identified by its vocabulary code (1..=32).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BolClass(u8);

impl BolClass {
    pub const STICK: BolClass = BolClass(STICK_CODE);

    pub fn from_code(code: u32) -> Result<BolClass> {
        let code = if code == STICK_ALIAS as u32 {
            STICK_CODE as u32
        } else {
            code
        };
        if (1..=32).contains(&code) {
            Ok(BolClass(code as u8))
        } else {
            Err(Error::UnknownBolCode(code))
        }
    }

    pub fn from_label(label: &str) -> Result<BolClass> {
        VOCABULARY
            .iter()
            .find(|(_, l)| *l == label)
            .map(|&(c, _)| BolClass(c))
            .ok_or_else(|| Error::UnknownBolLabel(label.to_string()))
    }

    pub fn code(&self) -> u8 {
        self.0
    }

    pub fn label(&self) -> &'static str {
        VOCABULARY[self.0 as usize - 1].1
    }

    pub fn is_stick(&self) -> bool {
        self.0 == STICK_CODE
    }

    pub fn all() -> impl Iterator<Item = BolClass> {
        VOCABULARY.iter().map(|&(c, _)| BolClass(c))
    }
}

impl std::fmt::Display for BolClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}
