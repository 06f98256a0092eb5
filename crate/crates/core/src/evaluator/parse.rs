use serde_json::{Map, Value};

use super::{ScoreVector, ScoringMode};
use crate::Question;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("no JSON object found in response")]
    NoObject,
    #[error("response object lacks key {0}")]
    MissingKey(Question),
    #[error("{question} = {value} outside the {mode} range")]
    OutOfRange {
        question: Question,
        value: String,
        mode: ScoringMode,
    },
    #[error("{question} = {value} is not an integer")]
    NotInteger { question: Question, value: String },
    #[error("{question} has unusable value {value}")]
    InvalidValue { question: Question, value: String },
}

/// Finds the first JSON object in `raw` that mentions a rubric key, falling
/// back to the first object of any shape.
fn extract_object(raw: &str) -> Option<Map<String, Value>> {
    let mut fallback = None;
    for (start, _) in raw.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&raw[start..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            let mentions_rubric = map
                .keys()
                .any(|k| k.parse::<Question>().is_ok());
            if mentions_rubric {
                return Some(map);
            }
            fallback.get_or_insert(map);
        }
    }
    fallback
}

fn lookup(map: &Map<String, Value>, question: Question) -> Option<&Value> {
    map.iter()
        .find(|(k, _)| k.trim().eq_ignore_ascii_case(question.key()))
        .map(|(_, v)| v)
}

fn score_value(question: Question, value: &Value, mode: ScoringMode) -> Result<u8, ParseError> {
    let shown = value.to_string();
    let number = match value {
        Value::Number(n) => n
            .as_i64()
            .map(|i| i as f64)
            .or_else(|| n.as_f64())
            .ok_or_else(|| ParseError::InvalidValue {
                question,
                value: shown.clone(),
            })?,
        Value::Bool(b) if mode == ScoringMode::Binary => f64::from(u8::from(*b)),
        Value::String(s) => {
            let s = s.trim();
            match (mode, s.to_ascii_lowercase().as_str()) {
                (ScoringMode::Binary, "yes") => 1.0,
                (ScoringMode::Binary, "no") => 0.0,
                _ => s.parse::<f64>().map_err(|_| ParseError::InvalidValue {
                    question,
                    value: shown.clone(),
                })?,
            }
        }
        _ => {
            return Err(ParseError::InvalidValue {
                question,
                value: shown,
            })
        }
    };
    if !number.is_finite() || number.fract() != 0.0 {
        return Err(ParseError::NotInteger {
            question,
            value: shown,
        });
    }
    let (lo, hi) = mode.range();
    if number < f64::from(lo) || number > f64::from(hi) {
        return Err(ParseError::OutOfRange {
            question,
            value: shown,
            mode,
        });
    }
    Ok(number as u8)
}

/// Extracts the Q1..Q7 answer object from a model reply, ignoring any
/// surrounding prose, and validates every value for `mode`. Fractional
/// values are rejected, never rounded.
pub fn parse_response(raw: &str, mode: ScoringMode) -> Result<ScoreVector, ParseError> {
    let map = extract_object(raw).ok_or(ParseError::NoObject)?;
    let mut values = [0u8; 7];
    for q in Question::ALL {
        let value = lookup(&map, q).ok_or(ParseError::MissingKey(q))?;
        values[q.index()] = score_value(q, value, mode)?;
    }
    Ok(ScoreVector::new(mode, values).expect("values validated above"))
}
