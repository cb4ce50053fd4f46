//! Channel specification files.
//!
//! A spec is one JSON document:
//!
//! ```json
//! {
//!   "name": "bsc-0.1",
//!   "alphabets": {"S": {"size": 1}, "X": {"size": 2}, "Y": {"size": 2}},
//!   "state_pmf": [1.0],
//!   "W": [[[0.9, 0.1], [0.1, 0.9]]]
//! }
//! ```
//!
//! `W[s][x][y]` is the channel law. Validation errors name the offending
//! element and, when the source text is at hand, its line and column.

use std::fmt;

use gpchan::gp::GpProblem;
use gpchan::{Channel, Pmf};
use serde::{Deserialize, Serialize};

pub const SUM_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Alphabet {
    pub size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Alphabets {
    #[serde(rename = "S")]
    pub s: Alphabet,
    #[serde(rename = "X")]
    pub x: Alphabet,
    #[serde(rename = "Y")]
    pub y: Alphabet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub alphabets: Alphabets,
    pub state_pmf: Vec<f64>,
    #[serde(rename = "W")]
    pub w: Vec<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Seg {
    Key(&'static str),
    Index(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpecError {
    pub message: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            _ => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for SpecError {}

struct Problem {
    path: Vec<Seg>,
    message: String,
}

fn path_string(path: &[Seg]) -> String {
    let mut out = String::new();
    for seg in path {
        match seg {
            Seg::Key(k) if out.is_empty() => out.push_str(k),
            Seg::Key(k) => {
                out.push('.');
                out.push_str(k);
            }
            Seg::Index(i) => out.push_str(&format!("[{i}]")),
        }
    }
    out
}

impl ChannelSpec {
    /// Parses and validates. Errors carry the line of the offending element.
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        let spec: ChannelSpec = serde_json::from_str(text).map_err(|e| SpecError {
            message: e.to_string(),
            line: Some(e.line()),
            column: Some(e.column()),
        })?;
        if let Some(p) = spec.first_problem() {
            let at = locate(text, &p.path);
            return Err(SpecError {
                message: format!("{}: {}", path_string(&p.path), p.message),
                line: at.map(|a| a.0),
                column: at.map(|a| a.1),
            });
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        match self.first_problem() {
            None => Ok(()),
            Some(p) => Err(SpecError {
                message: format!("{}: {}", path_string(&p.path), p.message),
                line: None,
                column: None,
            }),
        }
    }

    fn first_problem(&self) -> Option<Problem> {
        let bad = |path: Vec<Seg>, message: String| Some(Problem { path, message });
        let named = [("S", &self.alphabets.s), ("X", &self.alphabets.x), ("Y", &self.alphabets.y)];
        for (key, a) in named {
            if a.size == 0 {
                return bad(vec![Seg::Key("alphabets"), Seg::Key(key), Seg::Key("size")], "alphabet size must be at least 1".into());
            }
            if let Some(labels) = &a.labels {
                if labels.len() != a.size {
                    return bad(
                        vec![Seg::Key("alphabets"), Seg::Key(key), Seg::Key("labels")],
                        format!("{} labels for an alphabet of size {}", labels.len(), a.size),
                    );
                }
            }
        }
        let (ns, nx, ny) = (self.alphabets.s.size, self.alphabets.x.size, self.alphabets.y.size);

        if self.state_pmf.len() != ns {
            return bad(vec![Seg::Key("state_pmf")], format!("{} entries, expected |S| = {ns}", self.state_pmf.len()));
        }
        if let Some(m) = row_problem(&self.state_pmf) {
            return bad(vec![Seg::Key("state_pmf")], m);
        }
        if self.w.len() != ns {
            return bad(vec![Seg::Key("W")], format!("{} state blocks, expected |S| = {ns}", self.w.len()));
        }
        for (s, block) in self.w.iter().enumerate() {
            if block.len() != nx {
                return bad(vec![Seg::Key("W"), Seg::Index(s)], format!("{} input rows, expected |X| = {nx}", block.len()));
            }
            for (x, row) in block.iter().enumerate() {
                let path = vec![Seg::Key("W"), Seg::Index(s), Seg::Index(x)];
                if row.len() != ny {
                    return bad(path, format!("{} entries, expected |Y| = {ny}", row.len()));
                }
                if let Some(m) = row_problem(row) {
                    return bad(path, m);
                }
            }
        }
        None
    }

    pub fn problem(&self) -> GpProblem {
        let channel = Channel::new(self.w.clone()).expect("validated channel");
        let pmf = Pmf::new(self.state_pmf.clone()).expect("validated state pmf");
        GpProblem::new(channel, pmf).expect("validated spec")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("spec serializes");
        s.push('\n');
        s
    }

    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or("unnamed")
    }
}

fn row_problem(row: &[f64]) -> Option<String> {
    if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Some(format!("entry {v} is not a probability"));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > SUM_TOL {
        return Some(format!("entries sum to {sum}, not 1 (tolerance {SUM_TOL:e})"));
    }
    None
}

/// Line and column (both 1-based) of the value at `path` in JSON `text`.
fn locate(text: &str, path: &[Seg]) -> Option<(usize, usize)> {
    let bytes = text.as_bytes();
    let mut pos = skip_ws(bytes, 0);
    for seg in path {
        pos = match seg {
            Seg::Key(k) => member(bytes, pos, k)?,
            Seg::Index(i) => element(bytes, pos, *i)?,
        };
    }
    let before = &text[..pos];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    Some((line, column))
}

fn skip_ws(b: &[u8], mut i: usize) -> usize {
    while i < b.len() && b[i].is_ascii_whitespace() {
        i += 1;
    }
    i
}

/// End of the string starting at the opening quote `i`.
fn skip_string(b: &[u8], mut i: usize) -> Option<usize> {
    i += 1;
    while i < b.len() {
        match b[i] {
            b'\\' => i += 2,
            b'"' => return Some(i + 1),
            _ => i += 1,
        }
    }
    None
}

/// End of the value starting at `i`.
fn skip_value(b: &[u8], i: usize) -> Option<usize> {
    match *b.get(i)? {
        b'"' => skip_string(b, i),
        b'{' | b'[' => {
            let mut depth = 0usize;
            let mut j = i;
            while j < b.len() {
                match b[j] {
                    b'"' => {
                        j = skip_string(b, j)?;
                        continue;
                    }
                    b'{' | b'[' => depth += 1,
                    b'}' | b']' => {
                        depth -= 1;
                        if depth == 0 {
                            return Some(j + 1);
                        }
                    }
                    _ => {}
                }
                j += 1;
            }
            None
        }
        _ => {
            let mut j = i;
            while j < b.len() && !matches!(b[j], b',' | b'}' | b']') && !b[j].is_ascii_whitespace() {
                j += 1;
            }
            Some(j)
        }
    }
}

fn member(b: &[u8], obj: usize, key: &str) -> Option<usize> {
    if b.get(obj) != Some(&b'{') {
        return None;
    }
    let mut i = skip_ws(b, obj + 1);
    while b.get(i) == Some(&b'"') {
        let end = skip_string(b, i)?;
        let name = std::str::from_utf8(&b[i + 1..end - 1]).ok()?;
        i = skip_ws(b, end);
        if b.get(i) != Some(&b':') {
            return None;
        }
        i = skip_ws(b, i + 1);
        if name == key {
            return Some(i);
        }
        i = skip_ws(b, skip_value(b, i)?);
        if b.get(i) == Some(&b',') {
            i = skip_ws(b, i + 1);
        }
    }
    None
}

fn element(b: &[u8], arr: usize, index: usize) -> Option<usize> {
    if b.get(arr) != Some(&b'[') {
        return None;
    }
    let mut i = skip_ws(b, arr + 1);
    for _ in 0..index {
        i = skip_ws(b, skip_value(b, i)?);
        if b.get(i) != Some(&b',') {
            return None;
        }
        i = skip_ws(b, i + 1);
    }
    Some(i)
}
