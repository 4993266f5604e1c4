//! Turning raw model text into a JSON object.

use alloc::string::{String, ToString};

use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RepairError {
    #[error("no balanced JSON object in model output")]
    NoObject,
    #[error("model output is not valid JSON after repair: {0}")]
    Unparseable(String),
}

/// Parses model output into a JSON object: strips code fences and a leading
/// `json` tag, cuts the first balanced `{...}` span out of surrounding prose,
/// and retries once with trailing commas removed.
pub fn repair_json(raw: &str) -> Result<Map<String, Value>, RepairError> {
    let cleaned = strip_fences(raw);
    let mut last_err = None;
    let mut found = false;
    let mut from = 0;
    while let Some((start, end)) = balanced_object(&cleaned, from) {
        found = true;
        let span = &cleaned[start..=end];
        match parse_object(span).or_else(|_| parse_object(&remove_trailing_commas(span))) {
            Ok(obj) => return Ok(obj),
            Err(e) => last_err = Some(e),
        }
        from = start + 1;
    }
    if !found {
        return Err(RepairError::NoObject);
    }
    Err(RepairError::Unparseable(last_err.unwrap_or_default()))
}

fn parse_object(s: &str) -> Result<Map<String, Value>, String> {
    match serde_json::from_str::<Value>(s) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err("not an object".to_string()),
        Err(e) => Err(e.to_string()),
    }
}

fn strip_fences(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for line in raw.lines() {
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix("```") {
            // drop the fence and any language tag that follows it
            let rest = rest.trim_start_matches(|c: char| c.is_ascii_alphanumeric());
            out.push_str(rest);
        } else {
            out.push_str(line);
        }
        out.push('\n');
    }
    let t = out.trim();
    let t = match t.get(..4) {
        Some(tag) if tag.eq_ignore_ascii_case("json") => {
            let rest = &t[4..];
            if rest.starts_with(|c: char| c.is_whitespace() || c == '{') {
                rest.trim_start()
            } else {
                t
            }
        }
        _ => t,
    };
    t.to_string()
}

/// Byte range of the first balanced object starting at or after `from`.
fn balanced_object(s: &str, from: usize) -> Option<(usize, usize)> {
    let bytes = s.as_bytes();
    let start = from + bytes.get(from..)?.iter().position(|&b| b == b'{')?;
    let mut depth = 0usize;
    let mut in_str = false;
    let mut esc = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_str {
            if esc {
                esc = false;
            } else if b == b'\\' {
                esc = true;
            } else if b == b'"' {
                in_str = false;
            }
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some((start, i));
                }
            }
            _ => {}
        }
    }
    // unbalanced from here; a later `{` cannot close either
    None
}

fn remove_trailing_commas(s: &str) -> String {
    let chars: alloc::vec::Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    let mut in_str = false;
    let mut esc = false;
    for (i, &c) in chars.iter().enumerate() {
        if in_str {
            if esc {
                esc = false;
            } else if c == '\\' {
                esc = true;
            } else if c == '"' {
                in_str = false;
            }
            out.push(c);
            continue;
        }
        if c == '"' {
            in_str = true;
        } else if c == ',' {
            let next = chars[i + 1..].iter().find(|n| !n.is_whitespace());
            if matches!(next, Some('}') | Some(']')) {
                continue;
            }
        }
        out.push(c);
    }
    out
}
