use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Separates the syntactic category from the semantic formula inside a label token.
pub const SEM_DELIMITER: char = '@';

/// A node label: syntactic category plus an optional semantic formula.
///
/// Two labels are equal only if both components match, so `NP@user` and
/// `NP@destination` are distinct substitution sites.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label {
    syn: String,
    sem: Option<String>,
}

fn valid_piece(s: &str) -> bool {
    !s.is_empty()
        && !s
            .chars()
            .any(|c| c.is_whitespace() || c == '(' || c == ')' || c == SEM_DELIMITER)
}

impl Label {
    pub fn new(syn: impl Into<String>, sem: Option<String>) -> Result<Self> {
        let syn = syn.into();
        if !valid_piece(&syn) {
            return Err(Error::InvalidLabel(syn));
        }
        if let Some(s) = &sem {
            if !valid_piece(s) {
                return Err(Error::InvalidLabel(format!("{syn}{SEM_DELIMITER}{s}")));
            }
        }
        Ok(Label { syn, sem })
    }

    pub fn category(syn: impl Into<String>) -> Result<Self> {
        Label::new(syn, None)
    }

    pub fn syn(&self) -> &str {
        &self.syn
    }

    pub fn sem(&self) -> Option<&str> {
        self.sem.as_deref()
    }

    pub fn without_sem(&self) -> Label {
        Label {
            syn: self.syn.clone(),
            sem: None,
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(token: &str) -> Result<Self> {
        match token.split_once(SEM_DELIMITER) {
            Some((syn, sem)) => Label::new(syn, Some(sem.to_string())),
            None => Label::new(token, None),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.sem {
            Some(sem) => write!(f, "{}{}{}", self.syn, SEM_DELIMITER, sem),
            None => f.write_str(&self.syn),
        }
    }
}
