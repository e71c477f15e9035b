//! Plain-text matrix files.
//!
//! The first line is a flat list of `key value` pairs beginning with `p <p>`;
//! it is followed by `p` rows of whitespace-separated entries written with
//! shortest round-trip precision.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::symlin::SymMatrix;

pub fn write_matrix(fields: &[(&str, String)], m: &SymMatrix) -> String {
    let mut out = format!("p {}", m.p());
    for (k, v) in fields {
        let _ = write!(out, " {k} {v}");
    }
    out.push('\n');
    for i in 0..m.p() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Returns the header pairs (excluding `p`) and the matrix.
pub fn parse_matrix(text: &str) -> Result<(Vec<(String, String)>, SymMatrix)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = lines.next().ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let tokens: Vec<&str> = head.split_whitespace().collect();
    if tokens.len() % 2 != 0 || tokens.first() != Some(&"p") {
        return Err(Error::Parse(format!("bad matrix header `{head}`")));
    }
    let p: usize = tokens[1].parse().map_err(|e| Error::Parse(format!("bad dimension: {e}")))?;
    let fields = tokens[2..].chunks(2).map(|kv| (kv[0].to_string(), kv[1].to_string())).collect();
    let mut data = Vec::with_capacity(p * p);
    for line in lines.by_ref().take(p) {
        for tok in line.split_whitespace() {
            data.push(tok.parse::<f64>().map_err(|e| Error::Parse(format!("bad entry `{tok}`: {e}")))?);
        }
    }
    let m = SymMatrix::from_row_major(p, data)?;
    Ok((fields, m))
}

pub fn field<'a>(fields: &'a [(String, String)], key: &str) -> Option<&'a str> {
    fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_keeps_full_precision() {
        let m = SymMatrix::from_rows(&[vec![1.0, 0.1 + 0.2], vec![0.1 + 0.2, 1.0 / 3.0]]).unwrap();
        let text = write_matrix(&[("kind", "empirical_corr".into())], &m);
        assert!(text.starts_with("p 2 kind empirical_corr\n"));
        let (fields, back) = parse_matrix(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(field(&fields, "kind"), Some("empirical_corr"));
    }

    #[test]
    fn rejects_short_body() {
        assert!(parse_matrix("p 2\n1 0\n").is_err());
    }
}
