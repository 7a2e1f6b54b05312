//! ARFF export (and the matching reader for files this crate writes).

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{FeatureVector, TaskLabel};

/// Renders a real with six significant digits, `%g` style.
pub fn format_sig6(x: f64) -> String {
    if x.is_nan() {
        return "?".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "Infinity".into() } else { "-Infinity".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn quote_name(name: &str) -> String {
    if name.chars().any(|c| c.is_whitespace() || ",{}%'\"".contains(c)) {
        format!("'{}'", name.replace('\'', "\\'"))
    } else {
        name.to_string()
    }
}

/// Renders an ARFF document with an explicit attribute schema. Every vector
/// must carry exactly that schema.
pub fn write_arff_with_schema(
    relation: &str,
    schema: &[String],
    vectors: &[FeatureVector],
) -> Result<String> {
    for (i, v) in vectors.iter().enumerate() {
        if v.schema != schema {
            return Err(Error::Schema(format!(
                "vector {i} has a different attribute schema"
            )));
        }
    }
    let mut out = String::new();
    writeln!(out, "@relation {}", quote_name(relation)).unwrap();
    out.push('\n');
    for name in schema {
        writeln!(out, "@attribute {} numeric", quote_name(name)).unwrap();
    }
    let classes: Vec<&str> = TaskLabel::ALL.iter().map(|t| t.as_str()).collect();
    writeln!(out, "@attribute class {{{}}}", classes.join(",")).unwrap();
    out.push('\n');
    out.push_str("@data\n");
    for v in vectors {
        for x in &v.values {
            out.push_str(&format_sig6(*x));
            out.push(',');
        }
        out.push_str(v.label.as_str());
        out.push('\n');
    }
    Ok(out)
}

/// Renders an ARFF document using the first vector's schema.
pub fn write_arff(vectors: &[FeatureVector], relation: &str) -> Result<String> {
    let schema = vectors.first().map(|v| v.schema.clone()).unwrap_or_default();
    write_arff_with_schema(relation, &schema, vectors)
}

/// Parsed ARFF content.
#[derive(Debug, Clone, PartialEq)]
pub struct ArffData {
    pub relation: String,
    pub schema: Vec<String>,
    pub vectors: Vec<FeatureVector>,
}

fn unquote(s: &str) -> String {
    let s = s.trim();
    if s.len() >= 2 && s.starts_with('\'') && s.ends_with('\'') {
        s[1..s.len() - 1].replace("\\'", "'")
    } else {
        s.to_string()
    }
}

/// Splits an `@attribute` line body into (name, type).
fn split_attribute(rest: &str) -> Option<(String, String)> {
    let rest = rest.trim();
    if let Some(stripped) = rest.strip_prefix('\'') {
        let end = stripped.find('\'')?;
        Some((unquote(&rest[..end + 2]), stripped[end + 1..].trim().to_string()))
    } else {
        let (name, ty) = rest.split_once(char::is_whitespace)?;
        Some((name.to_string(), ty.trim().to_string()))
    }
}

/// Reads an ARFF document of numeric attributes followed by a nominal
/// `class` attribute whose values are task labels.
pub fn read_arff(text: &str) -> Result<ArffData> {
    let mut relation = String::new();
    let mut schema = Vec::new();
    let mut has_class = false;
    let mut in_data = false;
    let mut vectors = Vec::new();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if !in_data {
            let lower = line.to_ascii_lowercase();
            if lower.starts_with("@relation") {
                relation = unquote(&line["@relation".len()..]);
            } else if lower.starts_with("@attribute") {
                let (name, ty) = split_attribute(&line["@attribute".len()..]).ok_or_else(|| {
                    Error::Schema(format!("line {}: malformed attribute", lineno + 1))
                })?;
                if ty.starts_with('{') {
                    has_class = true;
                } else if has_class {
                    return Err(Error::Schema("class attribute must be last".into()));
                } else {
                    schema.push(name);
                }
            } else if lower.starts_with("@data") {
                if !has_class {
                    return Err(Error::Schema("no nominal class attribute".into()));
                }
                in_data = true;
            } else {
                return Err(Error::Schema(format!("line {}: unexpected `{line}`", lineno + 1)));
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != schema.len() + 1 {
            return Err(Error::Schema(format!(
                "line {}: {} fields, expected {}",
                lineno + 1,
                fields.len(),
                schema.len() + 1
            )));
        }
        let values = fields[..schema.len()]
            .iter()
            .map(|f| {
                if *f == "?" {
                    Ok(f64::NAN)
                } else {
                    f.parse::<f64>().map_err(|e| {
                        Error::Schema(format!("line {}: `{f}`: {e}", lineno + 1))
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let label: TaskLabel = fields[schema.len()].parse()?;
        vectors.push(FeatureVector::new(values, schema.clone(), label)?);
    }
    Ok(ArffData {
        relation,
        schema,
        vectors,
    })
}
