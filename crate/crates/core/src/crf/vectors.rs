//! Dense per-token vector files for the projection emission model.
//!
//! Format: a `dim=<d>` header line, then one block per sentence of lines
//! `token_index TAB v1 v2 ... vd` (1-based, sequential indices), blocks
//! separated by blank lines. `#` lines are comments.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum VectorsError {
    #[error("line {0}: {1}")]
    Line(usize, String),
    #[error("missing dim= header")]
    MissingHeader,
}

use VectorsError::Line;

/// Parse a vectors file into `[sentence][token][component]`.
pub fn parse_vectors(text: &str) -> Result<(usize, Vec<Vec<Vec<f64>>>), VectorsError> {
    let mut dim: Option<usize> = None;
    let mut sentences: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut current: Vec<Vec<f64>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.starts_with('#') {
            continue;
        }
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(std::mem::take(&mut current));
            }
            continue;
        }
        let Some(d) = dim else {
            let rest = line
                .strip_prefix("dim=")
                .ok_or_else(|| Line(lineno, "expected dim=<d> header".into()))?;
            let d: usize = rest
                .trim()
                .parse()
                .map_err(|_| Line(lineno, format!("bad dimension {rest:?}")))?;
            if d == 0 {
                return Err(Line(lineno, "dimension must be positive".into()));
            }
            dim = Some(d);
            continue;
        };
        let (idx, values) = line
            .split_once('\t')
            .ok_or_else(|| Line(lineno, "expected token_index TAB values".into()))?;
        let idx: usize =
            idx.parse().map_err(|_| Line(lineno, format!("bad token index {idx:?}")))?;
        if idx != current.len() + 1 {
            return Err(Line(
                lineno,
                format!("token index {idx} out of order (expected {})", current.len() + 1),
            ));
        }
        let vec: Result<Vec<f64>, _> =
            values.split_whitespace().map(|v| v.parse::<f64>()).collect();
        let vec = vec.map_err(|e| Line(lineno, format!("bad value: {e}")))?;
        if vec.len() != d {
            return Err(Line(lineno, format!("{} values where dim={d}", vec.len())));
        }
        current.push(vec);
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    let dim = dim.ok_or(VectorsError::MissingHeader)?;
    Ok((dim, sentences))
}

pub fn write_vectors(dim: usize, sentences: &[Vec<Vec<f64>>]) -> String {
    let mut out = format!("dim={dim}\n");
    for block in sentences {
        for (i, vec) in block.iter().enumerate() {
            out.push_str(&(i + 1).to_string());
            out.push('\t');
            for (j, v) in vec.iter().enumerate() {
                if j > 0 {
                    out.push(' ');
                }
                out.push_str(&format!("{v}"));
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}
