//! Link files: one `u v` pair per line, `#` comments allowed.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::bytes::write_atomic;
use crate::model::LinkSet;

/// Loads a deduplicated symmetric link set. Self-loops and non-integer
/// tokens fail with the offending line number.
pub fn load_links(path: &Path) -> Result<LinkSet> {
    let text = fs::read_to_string(path)?;
    let err = |line: usize, message: String| Error::ParseText {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut links = LinkSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let (a, b) = match (tokens.next(), tokens.next(), tokens.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => return Err(err(line_no, format!("expected two user ids, got {line:?}"))),
        };
        let u: usize = a.parse().map_err(|_| err(line_no, format!("non-integer token {a:?}")))?;
        let v: usize = b.parse().map_err(|_| err(line_no, format!("non-integer token {b:?}")))?;
        if u == v {
            return Err(err(line_no, format!("self-loop on user {u}")));
        }
        links.insert(u, v)?;
    }
    Ok(links)
}

/// Writes edges once each in canonical ascending order.
pub fn save_links(links: &LinkSet, path: &Path) -> Result<()> {
    let mut out = String::new();
    for (u, v) in links.iter() {
        out.push_str(&format!("{u} {v}\n"));
    }
    write_atomic(path, out.as_bytes())
}
