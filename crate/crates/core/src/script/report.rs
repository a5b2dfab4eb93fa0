//! Ordered report documents with byte-stable text and JSON renderings.
//!
//! Map keys are kept sorted. Numbers are printed with 12 significant digits,
//! trailing zeros trimmed; magnitudes below `1e-3` use exponent notation.

use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i128),
    Num(f64),
    Str(String),
    List(Vec<Value>),
    Map(BTreeMap<String, Value>),
}

impl Value {
    pub fn map<K: Into<String>>(entries: impl IntoIterator<Item = (K, Value)>) -> Value {
        Value::Map(entries.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        match self {
            Value::Map(m) => m.get(key),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::List(l) => Some(l),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i128> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            Value::Int(i) => Some(*i as f64),
            _ => None,
        }
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(s)
    }
}

macro_rules! from_int {
    ($($t:ty),*) => {$(
        impl From<$t> for Value {
            fn from(i: $t) -> Self {
                Value::Int(i as i128)
            }
        }
    )*};
}
from_int!(u8, u32, u64, usize, i32, i64);

impl From<u128> for Value {
    fn from(i: u128) -> Self {
        Value::Int(i128::try_from(i).unwrap_or(i128::MAX))
    }
}

impl<T: Into<Value>> From<Vec<T>> for Value {
    fn from(v: Vec<T>) -> Self {
        Value::List(v.into_iter().map(Into::into).collect())
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or(Value::Null, Into::into)
    }
}

/// 12 significant digits; fixed notation at or above `1e-3`, exponent below.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x.abs() >= 1e-3 {
        let exp = x.abs().log10().floor() as i32;
        let prec = (11 - exp).max(0) as usize;
        trim_fraction(format!("{x:.prec$}"))
    } else {
        let s = format!("{x:.11e}");
        let (mantissa, exponent) = s.split_once('e').expect("exponent form");
        format!("{}e{exponent}", trim_fraction(mantissa.to_string()))
    }
}

fn trim_fraction(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".into()
    } else {
        t.to_string()
    }
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

/// Pretty JSON with two-space indentation and a trailing newline.
pub fn to_json(v: &Value) -> String {
    let mut out = String::new();
    write_json(v, 0, &mut out);
    out.push('\n');
    out
}

fn write_json(v: &Value, indent: usize, out: &mut String) {
    let pad = |n: usize| " ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Int(i) => out.push_str(&i.to_string()),
        Value::Num(x) if x.is_finite() => out.push_str(&format_number(*x)),
        Value::Num(_) => out.push_str("null"),
        Value::Str(s) => out.push_str(&json_string(s)),
        Value::List(items) if items.is_empty() => out.push_str("[]"),
        Value::Map(m) if m.is_empty() => out.push_str("{}"),
        Value::List(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 2));
                write_json(item, indent + 2, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Map(m) => {
            out.push_str("{\n");
            for (i, (k, item)) in m.iter().enumerate() {
                out.push_str(&pad(indent + 2));
                out.push_str(&json_string(k));
                out.push_str(": ");
                write_json(item, indent + 2, out);
                out.push_str(if i + 1 < m.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

fn scalar_text(v: &Value) -> Option<String> {
    Some(match v {
        Value::Null => "-".into(),
        Value::Bool(b) => b.to_string(),
        Value::Int(i) => i.to_string(),
        Value::Num(x) => format_number(*x),
        Value::Str(s) => s.clone(),
        Value::List(l) if l.is_empty() => "[]".into(),
        Value::Map(m) if m.is_empty() => "{}".into(),
        Value::List(l) if l.iter().all(|x| matches!(x, Value::Int(_))) => {
            let parts: Vec<String> = l.iter().filter_map(scalar_text).collect();
            format!("[{}]", parts.join(", "))
        }
        _ => return None,
    })
}

/// Indented `key: value` rendering for terminals.
pub fn to_text(v: &Value) -> String {
    let mut lines = Vec::new();
    write_text(v, 0, &mut lines);
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

fn write_text(v: &Value, indent: usize, lines: &mut Vec<String>) {
    let pad = " ".repeat(indent);
    match v {
        Value::Map(m) if !m.is_empty() => {
            for (k, item) in m {
                match scalar_text(item) {
                    Some(s) => lines.push(format!("{pad}{k}: {s}")),
                    None => {
                        lines.push(format!("{pad}{k}:"));
                        write_text(item, indent + 2, lines);
                    }
                }
            }
        }
        Value::List(items) if !items.is_empty() => {
            for item in items {
                match scalar_text(item) {
                    Some(s) => lines.push(format!("{pad}- {s}")),
                    None => {
                        let start = lines.len();
                        write_text(item, indent + 2, lines);
                        if let Some(first) = lines.get_mut(start) {
                            first.replace_range(..indent + 2, &format!("{pad}- "));
                        }
                    }
                }
            }
        }
        other => lines.push(format!("{pad}{}", scalar_text(other).unwrap_or_default())),
    }
}
