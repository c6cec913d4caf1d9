//! Ground-truth files for synthetic corpora: planted θ, z, topics, and
//! link parameters.

use std::path::Path;

use crate::error::Result;
use crate::generator::GroundTruth;
use crate::io::bytes::{BinReader, BinWriter};
use crate::mathkit::CovarianceRepr;
use crate::model::{LinkModel, TopicParams};

pub const TRUTH_MAGIC: &[u8; 8] = b"GRTMTRTH";
pub const TRUTH_VERSION: u32 = 1;

/// Planted topics are written with diagonal covariances, which is how the
/// generator constructs them.
pub fn save_truth(truth: &GroundTruth<f64>, path: &Path) -> Result<()> {
    let n_users = truth.theta.len();
    let k = truth.topic_params.k();
    let dim = truth.topic_params.feature_dim();
    let mut w = BinWriter::new();
    w.magic(TRUTH_MAGIC);
    w.u32(TRUTH_VERSION);
    w.u32(n_users as u32);
    w.u32(k as u32);
    w.u32(dim as u32);
    for theta in &truth.theta {
        w.f64_slice(theta);
    }
    for z_u in &truth.z {
        w.u32(z_u.len() as u32);
    }
    for z_u in &truth.z {
        for &z in z_u {
            w.u32(z as u32);
        }
    }
    for mean in &truth.topic_params.means {
        w.f64_slice(mean);
    }
    for cov in &truth.topic_params.covariances {
        match cov {
            CovarianceRepr::Diagonal(v) => w.f64_slice(v),
            CovarianceRepr::Full(_) => {
                return Err(crate::error::Error::contract(
                    "ground-truth files store diagonal planted covariances only",
                ))
            }
        }
    }
    w.f64_slice(&truth.link_model_true.eta);
    w.f64(truth.link_model_true.nu);
    w.write_atomic(path)
}

pub fn load_truth(path: &Path) -> Result<GroundTruth<f64>> {
    let mut r = BinReader::open(path)?;
    r.magic(TRUTH_MAGIC)?;
    r.version(TRUTH_VERSION)?;
    let n_users = r.u32("user count")? as usize;
    let k = r.u32("topic count")? as usize;
    let dim = r.u32("feature dimension")? as usize;
    let mut theta = Vec::with_capacity(n_users);
    for _ in 0..n_users {
        theta.push(r.f64_vec(k, "theta")?);
    }
    let mut counts = Vec::with_capacity(n_users);
    for _ in 0..n_users {
        counts.push(r.u32("per-user image count")? as usize);
    }
    let mut z = Vec::with_capacity(n_users);
    for &count in &counts {
        let mut z_u = Vec::with_capacity(count);
        for _ in 0..count {
            let raw = r.u32("topic assignment")? as usize;
            if raw >= k {
                return Err(r.error(format!("topic assignment {raw} out of range for K = {k}")));
            }
            z_u.push(raw);
        }
        z.push(z_u);
    }
    let mut means = Vec::with_capacity(k);
    for _ in 0..k {
        means.push(r.f64_vec(dim, "planted mean")?);
    }
    let mut covariances = Vec::with_capacity(k);
    for _ in 0..k {
        covariances.push(CovarianceRepr::diagonal(r.f64_vec(dim, "planted variance")?)?);
    }
    let eta = r.f64_vec(k, "planted eta")?;
    let nu = r.f64("planted nu")?;
    r.finish()?;
    Ok(GroundTruth {
        theta,
        z,
        topic_params: TopicParams { means, covariances },
        link_model_true: LinkModel { eta, nu },
    })
}
