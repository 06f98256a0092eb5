use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the seven rubric questions, in fixed order Q1..Q7.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Question {
    Q1,
    Q2,
    Q3,
    Q4,
    Q5,
    Q6,
    Q7,
}

impl Question {
    pub const ALL: [Question; 7] = [
        Question::Q1,
        Question::Q2,
        Question::Q3,
        Question::Q4,
        Question::Q5,
        Question::Q6,
        Question::Q7,
    ];

    /// The ranking features: every question except the Q1 filter.
    pub const FEATURES: [Question; 6] = [
        Question::Q2,
        Question::Q3,
        Question::Q4,
        Question::Q5,
        Question::Q6,
        Question::Q7,
    ];

    /// Zero-based position in Q1..Q7.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Question> {
        Self::ALL.get(index).copied()
    }

    pub fn key(self) -> &'static str {
        match self {
            Question::Q1 => "Q1",
            Question::Q2 => "Q2",
            Question::Q3 => "Q3",
            Question::Q4 => "Q4",
            Question::Q5 => "Q5",
            Question::Q6 => "Q6",
            Question::Q7 => "Q7",
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Question::Q1 => "MITIGATION",
            Question::Q2 => "TECHNOLOGY",
            Question::Q3 => "READINESS",
            Question::Q4 => "MARKET",
            Question::Q5 => "TECH ENABLING",
            Question::Q6 => "ECO FOCUS",
            Question::Q7 => "NEGLECTEDNESS",
        }
    }
}

impl fmt::Display for Question {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown question key {0:?}")]
pub struct UnknownQuestion(pub String);

impl FromStr for Question {
    type Err = UnknownQuestion;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        Question::ALL
            .into_iter()
            .find(|q| q.key().eq_ignore_ascii_case(trimmed))
            .ok_or_else(|| UnknownQuestion(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_case_insensitively() {
        assert_eq!("q3".parse::<Question>().unwrap(), Question::Q3);
        assert_eq!(" Q7 ".parse::<Question>().unwrap(), Question::Q7);
        assert!("Q8".parse::<Question>().is_err());
    }

    #[test]
    fn index_round_trips() {
        for q in Question::ALL {
            assert_eq!(Question::from_index(q.index()), Some(q));
        }
        assert_eq!(Question::from_index(7), None);
    }
}
