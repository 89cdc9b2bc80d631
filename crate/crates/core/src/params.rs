//! Named parameters substituted into expression text before parsing.
//!
//! A parameter is a number or a formula (which may use x_i, t and other
//! parameters). Each occurrence of the name as a whole identifier is
//! replaced by its parenthesised value, so `g*x2` with `g = "1/(t+1)"`
//! becomes `(1/(t+1))*x2`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::UnaryOp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Formula(String),
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Number(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Formula(v.to_string())
    }
}

pub type Params = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamError {
    ReservedName(String),
    InvalidName(String),
    Cycle(Vec<String>),
    NonFinite(String),
}

impl fmt::Display for ParamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamError::ReservedName(n) => write!(f, "parameter name '{n}' is reserved"),
            ParamError::InvalidName(n) => write!(f, "'{n}' is not a valid parameter name"),
            ParamError::Cycle(path) => write!(f, "parameters refer to each other in a cycle: {}", path.join(" -> ")),
            ParamError::NonFinite(n) => write!(f, "parameter '{n}' is not finite"),
        }
    }
}

impl std::error::Error for ParamError {}

fn is_variable(name: &str) -> bool {
    name.strip_prefix('x').is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
}

fn check_name(name: &str) -> Result<(), ParamError> {
    let mut chars = name.chars();
    let ok_start = chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
    if !ok_start || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(ParamError::InvalidName(name.to_string()));
    }
    if name == "t" || is_variable(name) || UnaryOp::from_name(name).is_some() {
        return Err(ParamError::ReservedName(name.to_string()));
    }
    Ok(())
}

pub fn validate(params: &Params) -> Result<(), ParamError> {
    for (name, v) in params {
        check_name(name)?;
        if let ParamValue::Number(x) = v {
            if !x.is_finite() {
                return Err(ParamError::NonFinite(name.clone()));
            }
        }
    }
    Ok(())
}

fn split_tokens(text: &str) -> Vec<(bool, &str)> {
    // (is_identifier, slice); numbers are kept whole so "2e3" never yields "e3"
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let start = i;
        let c = bytes[i];
        if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            out.push((false, &text[start..i]));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((true, &text[start..i]));
        } else {
            // one UTF-8 character
            let len = text[i..].chars().next().map_or(1, char::len_utf8);
            i += len;
            out.push((false, &text[start..i]));
        }
    }
    out
}

fn expand(name: &str, params: &Params, stack: &mut Vec<String>, memo: &mut BTreeMap<String, String>) -> Result<String, ParamError> {
    if let Some(done) = memo.get(name) {
        return Ok(done.clone());
    }
    if stack.iter().any(|s| s == name) {
        let mut path = stack.clone();
        path.push(name.to_string());
        return Err(ParamError::Cycle(path));
    }
    let value = match &params[name] {
        ParamValue::Number(v) => format!("({v:?})"),
        ParamValue::Formula(f) => {
            stack.push(name.to_string());
            let inner = substitute_inner(f, params, stack, memo)?;
            stack.pop();
            format!("({inner})")
        }
    };
    memo.insert(name.to_string(), value.clone());
    Ok(value)
}

fn substitute_inner(text: &str, params: &Params, stack: &mut Vec<String>, memo: &mut BTreeMap<String, String>) -> Result<String, ParamError> {
    let mut out = String::with_capacity(text.len());
    for (ident, tok) in split_tokens(text) {
        if ident && params.contains_key(tok) {
            out.push_str(&expand(tok, params, stack, memo)?);
        } else {
            out.push_str(tok);
        }
    }
    Ok(out)
}

/// Replace every parameter name in `text` by its parenthesised value.
pub fn substitute(text: &str, params: &Params) -> Result<String, ParamError> {
    validate(params)?;
    substitute_inner(text, params, &mut Vec::new(), &mut BTreeMap::new())
}

/// `base` with `overrides` layered on top.
pub fn merged(base: &Params, overrides: &Params) -> Params {
    let mut out = base.clone();
    out.extend(overrides.iter().map(|(k, v)| (k.clone(), v.clone())));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn p(pairs: &[(&str, ParamValue)]) -> Params {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn whole_identifiers_only() {
        let ps = p(&[("g", "1/(t+1)".into()), ("a", 2.0.into())]);
        assert_eq!(substitute("g*x2 + gg + a^2", &ps).unwrap(), "(1/(t+1))*x2 + gg + (2.0)^2");
        assert_eq!(substitute("2e3*a", &ps).unwrap(), "2e3*(2.0)");
    }

    #[test]
    fn nested_and_cycles() {
        let ps = p(&[("phi1", "2+sin(2*t)".into()), ("phi0", "phi1 + 1".into())]);
        let s = substitute("phi0*x1", &ps).unwrap();
        let e = parse(&s, 1).unwrap();
        assert!((e.eval(&[1.0], 0.0).unwrap() - 3.0).abs() < 1e-15);
        let cyc = p(&[("a", "b".into()), ("b", "a+1".into())]);
        assert!(matches!(substitute("a", &cyc), Err(ParamError::Cycle(_))));
    }

    #[test]
    fn reserved_names() {
        for bad in ["t", "x2", "sin", "2a", "a-b"] {
            assert!(substitute("1", &p(&[(bad, 1.0.into())])).is_err(), "{bad}");
        }
        assert!(substitute("1", &p(&[("x", 1.0.into())])).is_ok());
    }

    #[test]
    fn negative_and_tiny_numbers_parse() {
        let ps = p(&[("c", (-1e-12).into())]);
        let s = substitute("x1 - c", &ps).unwrap();
        assert!((parse(&s, 1).unwrap().eval(&[1.0], 0.0).unwrap() - (1.0 + 1e-12)).abs() < 1e-15);
    }
}
