//! Domain types: corpora, links, hyperparameters, topics, and the
//! variational state the inference loop mutates.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::mathkit::{CovKind, CovarianceRepr, DenseVector};
use crate::scalar::Real;

/// All users' image feature vectors, grouped per user.
///
/// User identifiers are expected to be unique and dense in `[0, N)`;
/// [`validate`] reports departures instead of failing construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus<T> {
    pub users: Vec<UserCollection<T>>,
    pub feature_dim: usize,
}

impl<T: Real> Corpus<T> {
    pub fn new(users: Vec<UserCollection<T>>, feature_dim: usize) -> Self {
        Corpus { users, feature_dim }
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn total_images(&self) -> usize {
        self.users.iter().map(|u| u.images.len()).sum()
    }

    pub fn images(&self, user: usize) -> &[DenseVector<T>] {
        &self.users[user].images
    }

    /// Mean of every image vector in the corpus.
    pub fn global_mean(&self) -> DenseVector<T> {
        let mut mean = vec![T::zero(); self.feature_dim];
        let total = self.total_images();
        if total == 0 {
            return mean;
        }
        for user in &self.users {
            for image in &user.images {
                for (m, &x) in mean.iter_mut().zip(image) {
                    *m += x;
                }
            }
        }
        let n = T::of(total as f64);
        for m in &mut mean {
            *m /= n;
        }
        mean
    }

    /// Per-dimension variance of all image vectors about the global mean.
    pub fn global_variance(&self) -> DenseVector<T> {
        let mean = self.global_mean();
        let mut var = vec![T::zero(); self.feature_dim];
        let total = self.total_images();
        if total == 0 {
            return vec![T::one(); self.feature_dim];
        }
        for user in &self.users {
            for image in &user.images {
                for d in 0..self.feature_dim {
                    let r = image[d] - mean[d];
                    var[d] += r * r;
                }
            }
        }
        let n = T::of(total as f64);
        for v in &mut var {
            *v /= n;
        }
        var
    }
}

/// One user's shared images.
#[derive(Debug, Clone, PartialEq)]
pub struct UserCollection<T> {
    pub user_id: usize,
    /// May be empty: such a user contributes no topic evidence and is
    /// treated as having uniform mean responsibilities downstream.
    pub images: Vec<DenseVector<T>>,
}

/// Undirected user-user links: no self-loops, no duplicates, symmetric.
///
/// Both orientations are stored internally so neighbor queries are cheap;
/// iteration yields each edge once in canonical `(u < v)` order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkSet {
    edges: BTreeSet<(usize, usize)>,
}

impl LinkSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (usize, usize)>>(pairs: I) -> Result<Self> {
        let mut set = Self::new();
        for (u, v) in pairs {
            set.insert(u, v)?;
        }
        Ok(set)
    }

    /// Inserts the undirected edge `{u, v}`. Returns whether it was new.
    pub fn insert(&mut self, u: usize, v: usize) -> Result<bool> {
        if u == v {
            return Err(Error::contract(format!("self-loop on user {u}")));
        }
        let added = self.edges.insert((u, v));
        self.edges.insert((v, u));
        Ok(added)
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u, v))
    }

    /// Number of undirected edges.
    pub fn len(&self) -> usize {
        self.edges.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Edges once each, `u < v`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied().filter(|&(u, v)| u < v)
    }

    /// Users linked to `u`, ascending.
    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .range((u, 0)..=(u, usize::MAX))
            .map(|&(_, v)| v)
    }

    /// Largest user id mentioned by any edge.
    pub fn max_user_id(&self) -> Option<usize> {
        self.edges.iter().map(|&(u, v)| u.max(v)).max()
    }
}

/// Model hyperparameters and fit controls.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams<T> {
    /// Symmetric Dirichlet concentration, broadcast to all topics.
    pub alpha: T,
    /// Topic count.
    pub k: usize,
    /// Regularization pseudo-count for unobserved negative links.
    pub rho: T,
    pub cov_kind: CovKind,
    pub max_iters: usize,
    pub elbo_rel_tol: T,
    pub seed: u64,
}

impl<T: Real> Default for Hyperparams<T> {
    fn default() -> Self {
        Hyperparams {
            alpha: T::of(2.0),
            k: 100,
            rho: T::of(1.0),
            cov_kind: CovKind::Diagonal,
            max_iters: 500,
            elbo_rel_tol: T::of(1e-5),
            seed: 0,
        }
    }
}

impl<T: Real> Hyperparams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero()) {
            return Err(Error::contract(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if self.k == 0 {
            return Err(Error::contract("topic count K must be >= 1"));
        }
        if !(self.rho >= T::zero()) {
            return Err(Error::contract(format!("rho must be >= 0, got {}", self.rho)));
        }
        if self.max_iters == 0 {
            return Err(Error::contract("max_iters must be >= 1"));
        }
        if !(self.elbo_rel_tol > T::zero()) {
            return Err(Error::contract("elbo_rel_tol must be > 0"));
        }
        Ok(())
    }
}

/// The K Gaussian topics.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicParams<T> {
    pub means: Vec<DenseVector<T>>,
    pub covariances: Vec<CovarianceRepr<T>>,
}

impl<T: Real> TopicParams<T> {
    pub fn k(&self) -> usize {
        self.means.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }
}

/// Per-image responsibilities and per-user Dirichlet parameters.
///
/// `phi` is `None` only for models loaded from a file written without the
/// full responsibilities; `phibar` (per-user mean responsibilities, uniform
/// for users without images) is always present and kept in sync by the
/// inference loop.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState<T> {
    pub phi: Option<Vec<Vec<DenseVector<T>>>>,
    pub gamma: Vec<DenseVector<T>>,
    pub phibar: Vec<DenseVector<T>>,
}

/// `1/K` in every component.
pub fn uniform_simplex<T: Real>(k: usize) -> DenseVector<T> {
    vec![T::of(1.0 / k as f64); k]
}

/// Mean of responsibility rows; the uniform vector when there are none.
pub fn mean_responsibilities<T: Real>(rows: &[DenseVector<T>], k: usize) -> DenseVector<T> {
    if rows.is_empty() {
        return uniform_simplex(k);
    }
    let mut mean = vec![T::zero(); k];
    for row in rows {
        for (m, &p) in mean.iter_mut().zip(row) {
            *m += p;
        }
    }
    let n = T::of(rows.len() as f64);
    for m in &mut mean {
        *m /= n;
    }
    mean
}

impl<T: Real> VariationalState<T> {
    pub fn n_users(&self) -> usize {
        self.gamma.len()
    }

    pub fn k(&self) -> usize {
        self.gamma.first().map_or(0, Vec::len)
    }

    /// Responsibility rows for one user; errors when the full φ was not
    /// stored (model loaded with the responsibilities omitted).
    pub fn phi_rows(&self, user: usize) -> Result<&[DenseVector<T>]> {
        match &self.phi {
            Some(phi) => Ok(&phi[user]),
            None => Err(Error::contract(
                "state holds no per-image responsibilities (loaded with phi omitted)",
            )),
        }
    }

    /// Recomputes every user's mean responsibilities from φ.
    pub fn refresh_phibar(&mut self) -> Result<()> {
        let k = self.k();
        let phi = self
            .phi
            .as_ref()
            .ok_or_else(|| Error::contract("cannot refresh phibar without per-image phi"))?;
        self.phibar = phi.iter().map(|rows| mean_responsibilities(rows, k)).collect();
        Ok(())
    }
}

/// Link-function parameters of the exponential predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkModel<T> {
    pub eta: DenseVector<T>,
    pub nu: T,
}

impl<T: Real> LinkModel<T> {
    pub fn k(&self) -> usize {
        self.eta.len()
    }
}

/// Everything `fit` learns, bundled.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel<T> {
    pub hyperparams: Hyperparams<T>,
    pub topic_params: TopicParams<T>,
    pub state: VariationalState<T>,
    pub link_model: LinkModel<T>,
    pub elbo_trace: Vec<T>,
}

impl<T: Real> FittedModel<T> {
    pub fn n_users(&self) -> usize {
        self.state.n_users()
    }

    pub fn k(&self) -> usize {
        self.hyperparams.k
    }
}

/// A single well-formedness defect found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyCorpus,
    NonDenseUserId { position: usize, user_id: usize },
    DimensionMismatch { user: usize, image: usize, expected: usize, actual: usize },
    NonFiniteFeature { user: usize, image: usize, dim: usize },
    LinkUserOutOfRange { u: usize, v: usize, n_users: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyCorpus => write!(f, "corpus has no users"),
            Violation::NonDenseUserId { position, user_id } => write!(
                f,
                "user at position {position} has id {user_id}; ids must be dense [0, N)"
            ),
            Violation::DimensionMismatch { user, image, expected, actual } => write!(
                f,
                "user {user} image {image}: dimension {actual} does not match corpus dimension {expected}"
            ),
            Violation::NonFiniteFeature { user, image, dim } => write!(
                f,
                "user {user} image {image}: non-finite feature at dimension {dim}"
            ),
            Violation::LinkUserOutOfRange { u, v, n_users } => write!(
                f,
                "link ({u}, {v}): user id out of range for {n_users} users"
            ),
        }
    }
}

/// Reports every defect in a corpus/link pair instead of failing on the
/// first: dimension mismatches, non-finite features, out-of-range link ids.
pub fn validate<T: Real>(corpus: &Corpus<T>, links: &LinkSet) -> Vec<Violation> {
    let mut out = Vec::new();
    if corpus.users.is_empty() {
        out.push(Violation::EmptyCorpus);
    }
    for (pos, user) in corpus.users.iter().enumerate() {
        if user.user_id != pos {
            out.push(Violation::NonDenseUserId { position: pos, user_id: user.user_id });
        }
        for (n, image) in user.images.iter().enumerate() {
            if image.len() != corpus.feature_dim {
                out.push(Violation::DimensionMismatch {
                    user: pos,
                    image: n,
                    expected: corpus.feature_dim,
                    actual: image.len(),
                });
                continue;
            }
            if let Some(dim) = image.iter().position(|x| !x.is_finite()) {
                out.push(Violation::NonFiniteFeature { user: pos, image: n, dim });
            }
        }
    }
    let n_users = corpus.n_users();
    for (u, v) in links.iter() {
        if u >= n_users || v >= n_users {
            out.push(Violation::LinkUserOutOfRange { u, v, n_users });
        }
    }
    out
}
