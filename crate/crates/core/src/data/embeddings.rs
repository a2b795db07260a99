//! Pre-trained word vectors in the plain text format
//! `token v_1 ... v_dim`, one entry per line.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};

pub fn parse_embeddings(text: &str, path: &Path, dim: usize) -> Result<HashMap<String, Vec<f64>>> {
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values: Vec<&str> = fields.collect();
        // word2vec/fastText header: "<count> <dim>"
        if lineno == 1 && values.len() == 1 && dim != 1 && token.parse::<usize>().is_ok() && values[0].parse::<usize>().is_ok() {
            continue;
        }
        if values.len() != dim {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected {dim} values after `{token}`, found {}", values.len()),
            ));
        }
        let vec = values
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| Error::parse(path, lineno, format!("bad number `{v}`"))))
            .collect::<Result<Vec<f64>>>()?;
        if out.insert(token.to_string(), vec).is_some() {
            warn!("{}:{lineno}: duplicate embedding for `{token}`, keeping the last one", path.display());
        }
    }
    Ok(out)
}

pub fn load_embeddings(path: impl AsRef<Path>, dim: usize) -> Result<HashMap<String, Vec<f64>>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&text, path, dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_and_duplicates() {
        let m = parse_embeddings("cat 0.1 0.2\ndog 1 2\ncat 0.3 0.4\n", Path::new("e.txt"), 2).unwrap();
        assert_eq!(m["cat"], vec![0.3, 0.4]);
        assert_eq!(m["dog"], vec![1.0, 2.0]);
    }

    #[test]
    fn arity_error_has_line() {
        let err = parse_embeddings("cat 0.1 0.2\ndog 1\n", Path::new("e.txt"), 2).unwrap_err();
        assert!(err.to_string().starts_with("e.txt:2:"), "{err}");
    }

    #[test]
    fn header_skipped() {
        let m = parse_embeddings("2 3\na 1 2 3\nb 4 5 6\n", Path::new("e.vec"), 3).unwrap();
        assert_eq!(m.len(), 2);
    }

    #[test]
    fn large_file_self_check() {
        let mut text = String::new();
        for i in 0..100_000 {
            text.push_str(&format!("w{i} {} {} {}\n", i as f64 * 0.5, -1.25, 3));
        }
        let m = parse_embeddings(&text, Path::new("big.txt"), 3).unwrap();
        assert_eq!(m.len(), 100_000);
        assert!(m.values().all(|v| v.len() == 3));
    }
}
