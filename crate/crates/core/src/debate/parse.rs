use std::sync::OnceLock;

use regex::Regex;
use serde_json::Value;

use super::ParseStatus;

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedOutput {
    pub score: Option<f64>,
    pub rationale: String,
    pub status: ParseStatus,
}

const REASON_KEYS: [&str; 5] = ["reasoning", "rationale", "reason", "explanation", "justification"];

/// Byte ranges of balanced `{...}` spans, skipping braces inside strings.
fn brace_spans(s: &str) -> Vec<(usize, usize)> {
    let bytes = s.as_bytes();
    let mut spans = Vec::new();
    for start in s.match_indices('{').map(|(i, _)| i) {
        let mut depth = 0usize;
        let mut in_str = false;
        let mut escaped = false;
        for (off, &b) in bytes[start..].iter().enumerate() {
            if in_str {
                match (escaped, b) {
                    (true, _) => escaped = false,
                    (false, b'\\') => escaped = true,
                    (false, b'"') => in_str = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_str = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        spans.push((start, start + off + 1));
                        break;
                    }
                }
                _ => {}
            }
        }
    }
    spans
}

fn score_from_value(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => fallback_number(s),
        _ => None,
    }
    .filter(|x| x.is_finite())
}

fn structured(raw: &str) -> Option<(f64, Option<String>)> {
    for (a, b) in brace_spans(raw) {
        let Ok(Value::Object(map)) = serde_json::from_str::<Value>(&raw[a..b]) else {
            continue;
        };
        let score = map
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case("score"))
            .and_then(|(_, v)| score_from_value(v));
        let Some(score) = score else { continue };
        let reason = REASON_KEYS.iter().find_map(|key| {
            map.iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(key))
                .and_then(|(_, v)| v.as_str())
                .map(str::to_string)
        });
        return Some((score, reason));
    }
    None
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(\d+(?:\.\d+)?|\.\d+)(?:\s*(%)|\s*/\s*(\d+(?:\.\d+)?))?")
            .expect("static regex")
    })
}

/// First number in `[0, 1]`, reading `65%` as 0.65 and `65/100` as 0.65.
fn fallback_number(text: &str) -> Option<f64> {
    for cap in number_re().captures_iter(text) {
        let Ok(v) = cap[1].parse::<f64>() else { continue };
        let candidate = if cap.get(2).is_some() {
            v / 100.0
        } else if let Some(den) = cap.get(3) {
            match den.as_str().parse::<f64>() {
                Ok(d) if d > 0.0 => v / d,
                _ => continue,
            }
        } else {
            v
        };
        if (0.0..=1.0).contains(&candidate) {
            return Some(candidate);
        }
    }
    None
}

/// Extracts a score in `[0, 1]` and a rationale from an agent reply.
///
/// A JSON object with a `score` field anywhere in the text is a clean parse
/// (score clamped to `[0, 1]`). Otherwise the first number in range is used
/// and the whole text becomes the rationale. No number at all means
/// [`ParseStatus::Failed`].
pub fn parse_agent_output(raw: &str) -> ParsedOutput {
    if let Some((score, reason)) = structured(raw) {
        return ParsedOutput {
            score: Some(score.clamp(0.0, 1.0)),
            rationale: reason.unwrap_or_else(|| raw.trim().to_string()),
            status: ParseStatus::Clean,
        };
    }
    match fallback_number(raw) {
        Some(score) => ParsedOutput {
            score: Some(score),
            rationale: raw.trim().to_string(),
            status: ParseStatus::Fallback,
        },
        None => ParsedOutput {
            score: None,
            rationale: raw.trim().to_string(),
            status: ParseStatus::Failed,
        },
    }
}
