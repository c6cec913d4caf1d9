//! Versioned model container. Round-trips every numeric field bit-exactly.
//!
//! Layout after the `GRTMMODL` magic and u32 version: hyperparameters,
//! geometry (N, D, per-user image counts), topic means and covariances,
//! link parameters, per-user γ and φ̄, an optional full φ block, and the
//! ELBO trace. All reals are little-endian f64.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::bytes::{BinReader, BinWriter};
use crate::mathkit::{CovKind, CovarianceRepr};
use crate::model::{FittedModel, Hyperparams, LinkModel, TopicParams, VariationalState};

pub const MODEL_MAGIC: &[u8; 8] = b"GRTMMODL";
pub const MODEL_VERSION: u32 = 1;

fn cov_kind_tag(kind: CovKind) -> u8 {
    match kind {
        CovKind::Diagonal => 0,
        CovKind::Full => 1,
    }
}

/// Saves a fitted model. `include_phi` controls whether the full per-image
/// responsibilities are stored; φ̄ is always stored and prediction only
/// needs φ̄.
pub fn save_model(model: &FittedModel<f64>, path: &Path, include_phi: bool) -> Result<()> {
    let h = &model.hyperparams;
    let k = h.k;
    let dim = model.topic_params.feature_dim();
    let n_users = model.state.n_users();

    let mut w = BinWriter::new();
    w.magic(MODEL_MAGIC);
    w.u32(MODEL_VERSION);
    w.f64(h.alpha);
    w.u32(k as u32);
    w.f64(h.rho);
    w.u8(cov_kind_tag(h.cov_kind));
    w.u32(h.max_iters as u32);
    w.f64(h.elbo_rel_tol);
    w.u64(h.seed);
    w.u32(n_users as u32);
    w.u32(dim as u32);

    let counts: Vec<usize> = match &model.state.phi {
        Some(phi) => phi.iter().map(Vec::len).collect(),
        None => vec![0; n_users],
    };
    for &c in &counts {
        w.u32(c as u32);
    }

    for mean in &model.topic_params.means {
        w.f64_slice(mean);
    }
    for (topic, cov) in model.topic_params.covariances.iter().enumerate() {
        match (h.cov_kind, cov) {
            (CovKind::Diagonal, CovarianceRepr::Diagonal(v)) => w.f64_slice(v),
            (CovKind::Full, CovarianceRepr::Full(f)) => w.f64_slice(f.data()),
            _ => {
                return Err(Error::contract(format!(
                    "topic {topic} covariance kind does not match hyperparameter cov_kind"
                )))
            }
        }
    }

    w.f64_slice(&model.link_model.eta);
    w.f64(model.link_model.nu);
    for gamma in &model.state.gamma {
        w.f64_slice(gamma);
    }
    for phibar in &model.state.phibar {
        w.f64_slice(phibar);
    }

    let store_phi = include_phi && model.state.phi.is_some();
    w.u8(store_phi as u8);
    if store_phi {
        for rows in model.state.phi.as_ref().expect("checked above") {
            for row in rows {
                w.f64_slice(row);
            }
        }
    }

    w.u32(model.elbo_trace.len() as u32);
    w.f64_slice(&model.elbo_trace);
    w.write_atomic(path)
}

/// Loads a model saved by [`save_model`]. When the φ block was omitted the
/// state carries `phi: None` and only φ̄-based prediction is available.
pub fn load_model(path: &Path) -> Result<FittedModel<f64>> {
    let mut r = BinReader::open(path)?;
    r.magic(MODEL_MAGIC)?;
    r.version(MODEL_VERSION)?;

    let alpha = r.f64("alpha")?;
    let k = r.u32("topic count")? as usize;
    let rho = r.f64("rho")?;
    let cov_kind = match r.u8("covariance kind")? {
        0 => CovKind::Diagonal,
        1 => CovKind::Full,
        other => return Err(r.error(format!("unknown covariance kind tag {other}"))),
    };
    let max_iters = r.u32("max_iters")? as usize;
    let elbo_rel_tol = r.f64("elbo_rel_tol")?;
    let seed = r.u64("seed")?;
    let hyperparams =
        Hyperparams { alpha, k, rho, cov_kind, max_iters, elbo_rel_tol, seed };

    let n_users = r.u32("user count")? as usize;
    let dim = r.u32("feature dimension")? as usize;
    if k == 0 || dim == 0 {
        return Err(r.error(format!("empty geometry: K = {k}, dimension {dim}")));
    }
    let mut counts = Vec::with_capacity(n_users);
    for _ in 0..n_users {
        counts.push(r.u32("per-user image count")? as usize);
    }

    let mut means = Vec::with_capacity(k);
    for _ in 0..k {
        means.push(r.f64_vec(dim, "topic mean")?);
    }
    let mut covariances = Vec::with_capacity(k);
    for topic in 0..k {
        let cov = match cov_kind {
            CovKind::Diagonal => CovarianceRepr::diagonal(r.f64_vec(dim, "topic variance")?),
            CovKind::Full => CovarianceRepr::full(dim, r.f64_vec(dim * dim, "topic covariance")?),
        }
        .map_err(|e| Error::numeric(format!("topic {topic}: {e}")))?;
        covariances.push(cov);
    }

    let eta = r.f64_vec(k, "eta")?;
    let nu = r.f64("nu")?;
    let mut gamma = Vec::with_capacity(n_users);
    for _ in 0..n_users {
        gamma.push(r.f64_vec(k, "gamma")?);
    }
    let mut phibar = Vec::with_capacity(n_users);
    for _ in 0..n_users {
        phibar.push(r.f64_vec(k, "phibar")?);
    }

    let phi = match r.u8("phi flag")? {
        0 => None,
        1 => {
            let mut phi = Vec::with_capacity(n_users);
            for &count in &counts {
                let mut rows = Vec::with_capacity(count);
                for _ in 0..count {
                    rows.push(r.f64_vec(k, "phi row")?);
                }
                phi.push(rows);
            }
            Some(phi)
        }
        other => return Err(r.error(format!("invalid phi flag {other}"))),
    };

    let trace_len = r.u32("elbo trace length")? as usize;
    let elbo_trace = r.f64_vec(trace_len, "elbo trace entry")?;
    r.finish()?;

    Ok(FittedModel {
        hyperparams,
        topic_params: TopicParams { means, covariances },
        state: VariationalState { phi, gamma, phibar },
        link_model: LinkModel { eta, nu },
        elbo_trace,
    })
}
