//! Feature files: the binary format and the CSV fallback.
//!
//! Binary layout (all integers and reals little-endian):
//! magic `GRTMFEAT`, version u32, N_users u32, D u32, N_users per-user
//! image counts u32, then every image as D f64 values in user order.
//!
//! CSV fallback: optional `user_id,f0,f1,...` header, then one row per
//! image with a constant feature dimension. Users whose ids are not dense
//! `[0, N)` are reindexed and a `<path>.idmap` sidecar records the mapping.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::bytes::{write_atomic, BinReader, BinWriter};
use crate::model::{Corpus, UserCollection};

pub const FEATURES_MAGIC: &[u8; 8] = b"GRTMFEAT";
pub const FEATURES_VERSION: u32 = 1;

/// Loads a corpus from the binary feature format or the CSV fallback,
/// distinguished by the magic tag.
pub fn load_features(path: &Path) -> Result<Corpus<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() >= 8 && &bytes[..8] == FEATURES_MAGIC {
        load_features_binary(BinReader::from_bytes(path, bytes))
    } else {
        load_features_csv(path, &bytes)
    }
}

fn load_features_binary(mut r: BinReader) -> Result<Corpus<f64>> {
    r.magic(FEATURES_MAGIC)?;
    r.version(FEATURES_VERSION)?;
    let n_users = r.u32("user count")? as usize;
    let dim = r.u32("feature dimension")? as usize;
    if n_users == 0 || dim == 0 {
        return Err(r.error(format!("empty geometry: {n_users} users, dimension {dim}")));
    }
    let mut counts = Vec::with_capacity(n_users);
    for _ in 0..n_users {
        counts.push(r.u32("per-user image count")? as usize);
    }
    let mut users = Vec::with_capacity(n_users);
    for (user_id, &count) in counts.iter().enumerate() {
        let mut images = Vec::with_capacity(count);
        for image in 0..count {
            let offset = r.offset();
            let values = r.f64_vec(dim, "feature value")?;
            if let Some(d) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::ParseBinary {
                    path: r.path().to_path_buf(),
                    offset: offset + 8 * d as u64,
                    message: format!(
                        "non-finite feature for user {user_id}, image {image}, dimension {d}"
                    ),
                });
            }
            images.push(values);
        }
        users.push(UserCollection { user_id, images });
    }
    r.finish()?;
    Ok(Corpus::new(users, dim))
}

fn load_features_csv(path: &Path, bytes: &[u8]) -> Result<Corpus<f64>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::ParseText {
        path: path.to_path_buf(),
        line: 1,
        message: format!("not valid UTF-8 ({e}); also not a binary feature file"),
    })?;
    let err = |line: usize, message: String| Error::ParseText {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut by_user: BTreeMap<usize, Vec<Vec<f64>>> = BTreeMap::new();
    let mut dim: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if idx == 0 && line.starts_with("user_id") {
            continue; // header
        }
        let mut fields = line.split(',');
        let id_field = fields.next().expect("split yields at least one field").trim();
        let user_id: usize = id_field
            .parse()
            .map_err(|_| err(line_no, format!("invalid user id {id_field:?}")))?;
        let mut values = Vec::new();
        for field in fields {
            let field = field.trim();
            let v: f64 = field
                .parse()
                .map_err(|_| err(line_no, format!("invalid feature value {field:?}")))?;
            if !v.is_finite() {
                return Err(err(line_no, format!("non-finite feature value {field:?}")));
            }
            values.push(v);
        }
        if values.is_empty() {
            return Err(err(line_no, "row has no feature values".into()));
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(err(
                    line_no,
                    format!("row has {} feature(s), previous rows had {d}", values.len()),
                ))
            }
            _ => {}
        }
        by_user.entry(user_id).or_default().push(values);
    }
    let dim = dim.ok_or_else(|| err(1, "file contains no feature rows".into()))?;

    // Reindex densely; write the sidecar only when ids were not already dense.
    let dense = by_user.keys().copied().eq(0..by_user.len());
    if !dense {
        let mut map = String::from("# original_id dense_id\n");
        for (dense_id, orig) in by_user.keys().enumerate() {
            map.push_str(&format!("{orig} {dense_id}\n"));
        }
        let mut sidecar = path.as_os_str().to_owned();
        sidecar.push(".idmap");
        write_atomic(Path::new(&sidecar), map.as_bytes())?;
    }
    let users = by_user
        .into_values()
        .enumerate()
        .map(|(user_id, images)| UserCollection { user_id, images })
        .collect();
    Ok(Corpus::new(users, dim))
}

/// Writes the binary feature format.
pub fn save_features(corpus: &Corpus<f64>, path: &Path) -> Result<()> {
    let mut w = BinWriter::new();
    w.magic(FEATURES_MAGIC);
    w.u32(FEATURES_VERSION);
    w.u32(corpus.n_users() as u32);
    w.u32(corpus.feature_dim as u32);
    for user in &corpus.users {
        w.u32(user.images.len() as u32);
    }
    for user in &corpus.users {
        for image in &user.images {
            w.f64_slice(image);
        }
    }
    w.write_atomic(path)
}

/// Writes the CSV fallback encoding of the same data.
pub fn save_features_csv(corpus: &Corpus<f64>, path: &Path) -> Result<()> {
    let mut out = String::from("user_id");
    for d in 0..corpus.feature_dim {
        out.push_str(&format!(",f{d}"));
    }
    out.push('\n');
    for user in &corpus.users {
        for image in &user.images {
            out.push_str(&user.user_id.to_string());
            for v in image {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
    }
    write_atomic(path, out.as_bytes())
}
