//! Flat `key=value` text records.
//!
//! One record per line, keys sorted, single spaces between fields. Numbers
//! with a fractional part are fixed-point with six decimals so a record
//! prints the same way on every platform and parses back exactly.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

const SCALE: f64 = 1_000_000.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("bad key {0:?}")]
    BadKey(String),
    #[error("bad value for {key}: {value:?}")]
    BadValue { key: String, value: String },
    #[error("field without '=': {0:?}")]
    MissingEquals(String),
    #[error("duplicate key {0}")]
    DuplicateKey(String),
    #[error("unterminated quoted value")]
    Unterminated,
    #[error("missing field {0}")]
    Missing(String),
    #[error("field {key} should be {expected}")]
    WrongType { key: String, expected: &'static str },
}

/// Fixed-point number in millionths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fixed(pub i64);

impl Fixed {
    pub fn from_f64(x: f64) -> Self {
        Fixed((x * SCALE).round() as i64)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE
    }

    fn parse(s: &str) -> Option<Self> {
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (int, frac) = body.split_once('.')?;
        if int.is_empty()
            || frac.is_empty()
            || frac.len() > 6
            || !int.bytes().all(|b| b.is_ascii_digit())
            || !frac.bytes().all(|b| b.is_ascii_digit())
        {
            return None;
        }
        let whole: i64 = int.parse().ok()?;
        let frac: i64 = format!("{frac:0<6}").parse().ok()?;
        let v = whole.checked_mul(1_000_000)?.checked_add(frac)?;
        Some(Fixed(if neg { -v } else { v }))
    }
}

impl fmt::Display for Fixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let a = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:06}", a / 1_000_000, a % 1_000_000)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Int(i64),
    Num(Fixed),
    Text(String),
}

impl Value {
    pub fn num(x: f64) -> Self {
        Value::Num(Fixed::from_f64(x))
    }

    pub fn text(s: impl Into<String>) -> Self {
        Value::Text(s.into())
    }

    fn is_bare(s: &str) -> bool {
        let mut chars = s.chars();
        matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
            && chars.all(|c| c.is_ascii_alphanumeric() || "_.:-/".contains(c))
    }

    fn parse(key: &str, raw: &str) -> Result<Self, RecordError> {
        let bad = || RecordError::BadValue {
            key: key.to_string(),
            value: raw.to_string(),
        };
        if let Some(q) = raw.strip_prefix('"') {
            return unquote(q).map(Value::Text).ok_or_else(bad);
        }
        if Value::is_bare(raw) {
            return Ok(Value::Text(raw.to_string()));
        }
        if raw.contains('.') {
            return Fixed::parse(raw).map(Value::Num).ok_or_else(bad);
        }
        raw.parse().map(Value::Int).map_err(|_| bad())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Num(x) => write!(f, "{x}"),
            Value::Text(s) if Value::is_bare(s) => f.write_str(s),
            Value::Text(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
        }
    }
}

/// `q` is the text after the opening quote, up to and including the closing one.
fn unquote(q: &str) -> Option<String> {
    let mut out = String::new();
    let mut chars = q.chars();
    while let Some(c) = chars.next() {
        match c {
            '"' => return chars.next().is_none().then_some(out),
            '\\' => match chars.next()? {
                'n' => out.push('\n'),
                c @ ('"' | '\\') => out.push(c),
                _ => return None,
            },
            c => out.push(c),
        }
    }
    None
}

fn valid_key(k: &str) -> bool {
    let mut chars = k.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Record {
    fields: BTreeMap<String, Value>,
}

impl Record {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builder-style insert. Panics on a malformed key, which is a
    /// programming error for the fixed key sets used in this crate.
    pub fn with(mut self, key: &str, value: Value) -> Self {
        assert!(valid_key(key), "bad record key {key:?}");
        self.fields.insert(key.to_string(), value);
        self
    }

    pub fn int(self, key: &str, v: i64) -> Self {
        self.with(key, Value::Int(v))
    }

    pub fn num(self, key: &str, v: f64) -> Self {
        self.with(key, Value::num(v))
    }

    pub fn text(self, key: &str, v: impl Into<String>) -> Self {
        self.with(key, Value::text(v))
    }

    pub fn flag(self, key: &str, v: bool) -> Self {
        self.with(key, Value::text(if v { "true" } else { "false" }))
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.fields.get(key)
    }

    pub fn fields(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.fields.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    fn require(&self, key: &str) -> Result<&Value, RecordError> {
        self.get(key).ok_or_else(|| RecordError::Missing(key.to_string()))
    }

    fn wrong(key: &str, expected: &'static str) -> RecordError {
        RecordError::WrongType {
            key: key.to_string(),
            expected,
        }
    }

    pub fn get_int(&self, key: &str) -> Result<i64, RecordError> {
        match self.require(key)? {
            Value::Int(i) => Ok(*i),
            _ => Err(Self::wrong(key, "an integer")),
        }
    }

    /// Numeric field as seconds/meters; integers are accepted too.
    pub fn get_f64(&self, key: &str) -> Result<f64, RecordError> {
        match self.require(key)? {
            Value::Num(x) => Ok(x.to_f64()),
            Value::Int(i) => Ok(*i as f64),
            _ => Err(Self::wrong(key, "a number")),
        }
    }

    pub fn get_text(&self, key: &str) -> Result<&str, RecordError> {
        match self.require(key)? {
            Value::Text(s) => Ok(s),
            _ => Err(Self::wrong(key, "text")),
        }
    }

    pub fn get_flag(&self, key: &str) -> Result<bool, RecordError> {
        match self.get_text(key)? {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(Self::wrong(key, "true or false")),
        }
    }

    pub fn parse(line: &str) -> Result<Self, RecordError> {
        let mut fields = BTreeMap::new();
        for token in tokenize(line)? {
            let (key, raw) = token
                .split_once('=')
                .ok_or_else(|| RecordError::MissingEquals(token.clone()))?;
            if !valid_key(key) {
                return Err(RecordError::BadKey(key.to_string()));
            }
            let value = Value::parse(key, raw)?;
            if fields.insert(key.to_string(), value).is_some() {
                return Err(RecordError::DuplicateKey(key.to_string()));
            }
        }
        Ok(Record { fields })
    }
}

fn tokenize(line: &str) -> Result<Vec<String>, RecordError> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut in_quote = false;
    let mut escaped = false;
    for c in line.chars() {
        if in_quote {
            cur.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_quote = false;
            }
        } else if c.is_whitespace() {
            if !cur.is_empty() {
                tokens.push(std::mem::take(&mut cur));
            }
        } else {
            in_quote = c == '"';
            cur.push(c);
        }
    }
    if in_quote {
        return Err(RecordError::Unterminated);
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    Ok(tokens)
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, v)) in self.fields.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Records of a multi-line text with their 1-based line numbers. Blank
/// lines and `#` comments are skipped.
pub fn parse_lines(text: &str) -> impl Iterator<Item = (usize, Result<Record, RecordError>)> + '_ {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim();
        (!line.is_empty() && !line.starts_with('#')).then(|| (i + 1, Record::parse(line)))
    })
}
