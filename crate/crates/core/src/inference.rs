//! Coordinate-ascent variational EM: the closed-form updates for the
//! responsibilities, Dirichlet parameters, Gaussian topics, and link
//! function, plus the evidence lower bound and the fit loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines::kmeans_cluster;
use crate::error::{Error, Result};
use crate::linkpredict::pair_pi;
use crate::mathkit::{
    digamma, gaussian_log_density, ln_gamma, ln_one_minus_exp, log_sum_exp, CovKind,
    CovarianceRepr, DenseVector,
};
use crate::model::{
    mean_responsibilities, validate, Corpus, FittedModel, Hyperparams, LinkModel, LinkSet,
    TopicParams, VariationalState,
};
use crate::scalar::Real;

/// A topic whose total responsibility falls below this keeps its previous
/// mean and is reset to the global covariance.
const RESPONSIBILITY_EPS: f64 = 1e-8;

/// How the variational state and topics are seeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitStrategy {
    KmeansPp,
    RandomAssign,
}

/// Fit controls around the hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig<T> {
    pub hyperparams: Hyperparams<T>,
    pub init_strategy: InitStrategy,
    /// Emit a progress line on stderr every this many iterations; 0 = silent.
    pub log_every: usize,
}

impl<T: Real> Default for FitConfig<T> {
    fn default() -> Self {
        FitConfig {
            hyperparams: Hyperparams::default(),
            init_strategy: InitStrategy::KmeansPp,
            log_every: 0,
        }
    }
}

/// Snapshot handed to the per-iteration observer of [`fit_observed`].
pub struct IterationEvent<'a, T> {
    /// 1-based update step; the initial state is step 0.
    pub iteration: usize,
    pub elbo: T,
    pub state: &'a VariationalState<T>,
    pub topics: &'a TopicParams<T>,
    pub link_model: &'a LinkModel<T>,
}

/// γ row implied by responsibility rows: γₖ = α + Σₙ φₙₖ.
pub fn gamma_from_rows<T: Real>(rows: &[DenseVector<T>], alpha: T, k: usize) -> DenseVector<T> {
    let mut gamma = vec![alpha; k];
    for row in rows {
        for (g, &p) in gamma.iter_mut().zip(row) {
            *g += p;
        }
    }
    gamma
}

/// Seeds responsibilities, Dirichlet parameters, and topics.
///
/// `KmeansPp` runs k-means over all images and uses the final centroids as
/// topic means; assignments become one-hot rows softened by a 0.9/0.1
/// spread. Covariances start at the global per-dimension variance. Falls
/// back to `RandomAssign` (with a warning) when K exceeds the image count.
pub fn init_state<T: Real>(
    corpus: &Corpus<T>,
    cfg: &FitConfig<T>,
) -> Result<(VariationalState<T>, TopicParams<T>)> {
    let h = &cfg.hyperparams;
    h.validate()?;
    let k = h.k;
    let dim = corpus.feature_dim;
    let total = corpus.total_images();
    let strategy = match cfg.init_strategy {
        InitStrategy::KmeansPp if k > total => {
            eprintln!(
                "[grtm] warning: K = {k} exceeds total image count {total}; \
                 falling back to random assignment init"
            );
            InitStrategy::RandomAssign
        }
        s => s,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(h.seed);
    let global_var = corpus.global_variance();
    let (labels, mut means) = match strategy {
        InitStrategy::KmeansPp => {
            let km = kmeans_cluster(corpus, k, h.seed)?;
            (km.labels, km.centroids)
        }
        InitStrategy::RandomAssign => {
            let labels: Vec<usize> = (0..total).map(|_| rng.random_range(0..k)).collect();
            (labels, Vec::new())
        }
    };

    // Softened one-hot responsibilities, grouped per user.
    let high = T::of(0.9);
    let low = if k > 1 { T::of(0.1 / (k - 1) as f64) } else { T::zero() };
    let mut phi: Vec<Vec<DenseVector<T>>> = Vec::with_capacity(corpus.n_users());
    let mut flat = 0usize;
    for user in &corpus.users {
        let mut rows = Vec::with_capacity(user.images.len());
        for _ in &user.images {
            let row = if k == 1 {
                vec![T::one()]
            } else {
                let mut row = vec![low; k];
                row[labels[flat]] = high;
                row
            };
            rows.push(row);
            flat += 1;
        }
        phi.push(rows);
    }

    if means.is_empty() {
        // Responsibility-weighted means for the random-assignment path;
        // topics without any images sit at the global mean plus a small
        // deterministic jitter so means stay distinct.
        let global_mean = corpus.global_mean();
        means = vec![vec![T::zero(); dim]; k];
        let mut weights = vec![T::zero(); k];
        for (user, rows) in corpus.users.iter().zip(&phi) {
            for (image, row) in user.images.iter().zip(rows) {
                for (topic, &p) in row.iter().enumerate() {
                    weights[topic] += p;
                    for (m, &x) in means[topic].iter_mut().zip(image) {
                        *m += p * x;
                    }
                }
            }
        }
        for topic in 0..k {
            if weights[topic].to_f64_lossy() < RESPONSIBILITY_EPS {
                for d in 0..dim {
                    let jitter: f64 = rng.random::<f64>() - 0.5;
                    let scale = global_var[d].sqrt().max(T::of(1e-3));
                    means[topic][d] = global_mean[d] + scale * T::of(1e-3 * jitter);
                }
            } else {
                for m in &mut means[topic] {
                    *m /= weights[topic];
                }
            }
        }
    }

    let covariances: Vec<CovarianceRepr<T>> = (0..k)
        .map(|topic| global_covariance(corpus, &global_var, h.cov_kind).map_err(|e| {
            Error::numeric(format!("topic {topic}: {e}"))
        }))
        .collect::<Result<_>>()?;

    let gamma: Vec<DenseVector<T>> =
        phi.iter().map(|rows| gamma_from_rows(rows, h.alpha, k)).collect();
    let phibar: Vec<DenseVector<T>> =
        phi.iter().map(|rows| mean_responsibilities(rows, k)).collect();

    Ok((
        VariationalState { phi: Some(phi), gamma, phibar },
        TopicParams { means, covariances },
    ))
}

fn global_covariance<T: Real>(
    corpus: &Corpus<T>,
    global_var: &[T],
    kind: CovKind,
) -> Result<CovarianceRepr<T>> {
    match kind {
        CovKind::Diagonal => CovarianceRepr::diagonal(global_var.to_vec()),
        CovKind::Full => {
            let dim = corpus.feature_dim;
            let mut data = vec![T::zero(); dim * dim];
            for d in 0..dim {
                data[d * dim + d] = global_var[d];
            }
            CovarianceRepr::full(dim, data)
        }
    }
}

/// New responsibility rows for one user. For each image and topic the
/// unnormalized log-weight is the Gaussian log-density plus the Dirichlet
/// expectation Ψ(γₖ) − Ψ(Σγ) plus the observed-link term
/// Σ_{v linked to u} ηₖ φ̄ᵥₖ / Nᵤ; rows normalize through log-sum-exp.
///
/// Reads the previous sweep's φ̄ values from the state, so a whole sweep may
/// run in parallel across users against a frozen snapshot.
pub fn update_phi<T: Real>(
    corpus: &Corpus<T>,
    state: &VariationalState<T>,
    topics: &TopicParams<T>,
    link_model: &LinkModel<T>,
    train_links: &LinkSet,
    user: usize,
) -> Result<Vec<DenseVector<T>>> {
    let images = corpus.images(user);
    let n_u = images.len();
    if n_u == 0 {
        return Ok(Vec::new());
    }
    let k = topics.k();
    let gamma_u = &state.gamma[user];
    let gamma_sum = gamma_u.iter().copied().sum::<T>();
    let dig_sum = digamma(gamma_sum)?;
    let mut dirichlet_term = Vec::with_capacity(k);
    for &g in gamma_u {
        dirichlet_term.push(digamma(g)? - dig_sum);
    }

    // Only observed positive links contribute.
    let mut link_term = vec![T::zero(); k];
    for v in train_links.neighbors(user) {
        let phibar_v = &state.phibar[v];
        for topic in 0..k {
            link_term[topic] += link_model.eta[topic] * phibar_v[topic];
        }
    }
    let inv_n = T::of(1.0 / n_u as f64);
    for t in &mut link_term {
        *t *= inv_n;
    }

    let mut rows = Vec::with_capacity(n_u);
    let mut log_w = vec![T::zero(); k];
    for image in images {
        for topic in 0..k {
            let density = gaussian_log_density(image, &topics.means[topic], &topics.covariances[topic])
                .map_err(|e| Error::numeric(format!("topic {topic}: {e}")))?;
            log_w[topic] = density + dirichlet_term[topic] + link_term[topic];
        }
        let norm = log_sum_exp(&log_w)?;
        rows.push(log_w.iter().map(|&w| (w - norm).exp()).collect());
    }
    Ok(rows)
}

/// γᵤₖ = α + Σₙ φᵤₙₖ over the user's current responsibility rows.
pub fn update_gamma<T: Real>(
    state: &VariationalState<T>,
    alpha: T,
    user: usize,
) -> Result<DenseVector<T>> {
    let rows = state.phi_rows(user)?;
    Ok(gamma_from_rows(rows, alpha, state.k()))
}

/// Responsibility-weighted topic means and covariances over all images.
///
/// A topic with total responsibility below 1e-8 keeps its previous mean
/// (the global mean when there is none) and receives the global covariance.
pub fn update_topics<T: Real>(
    corpus: &Corpus<T>,
    state: &VariationalState<T>,
    cov_kind: CovKind,
    previous: Option<&TopicParams<T>>,
) -> Result<TopicParams<T>> {
    let k = state.k();
    let dim = corpus.feature_dim;
    let phi = match &state.phi {
        Some(phi) => phi,
        None => return Err(Error::contract("update_topics needs per-image responsibilities")),
    };
    let global_var = corpus.global_variance();
    let global_mean = corpus.global_mean();

    let results: Vec<Result<(DenseVector<T>, CovarianceRepr<T>)>> = (0..k)
        .into_par_iter()
        .map(|topic| {
            let mut weight = T::zero();
            let mut mean = vec![T::zero(); dim];
            for (user, rows) in corpus.users.iter().zip(phi) {
                for (image, row) in user.images.iter().zip(rows) {
                    let p = row[topic];
                    weight += p;
                    for (m, &x) in mean.iter_mut().zip(image) {
                        *m += p * x;
                    }
                }
            }
            if weight.to_f64_lossy() < RESPONSIBILITY_EPS {
                let mean = match previous {
                    Some(prev) => prev.means[topic].clone(),
                    None => global_mean.clone(),
                };
                let cov = global_covariance(corpus, &global_var, cov_kind)
                    .map_err(|e| Error::numeric(format!("topic {topic}: {e}")))?;
                return Ok((mean, cov));
            }
            for m in &mut mean {
                *m /= weight;
            }
            let cov = match cov_kind {
                CovKind::Diagonal => {
                    let mut var = vec![T::zero(); dim];
                    for (user, rows) in corpus.users.iter().zip(phi) {
                        for (image, row) in user.images.iter().zip(rows) {
                            let p = row[topic];
                            for (v, (&x, &m)) in var.iter_mut().zip(image.iter().zip(&mean)) {
                                let r = x - m;
                                *v += p * r * r;
                            }
                        }
                    }
                    for v in &mut var {
                        *v /= weight;
                    }
                    CovarianceRepr::diagonal(var)
                }
                CovKind::Full => {
                    let mut data = vec![T::zero(); dim * dim];
                    let mut resid = vec![T::zero(); dim];
                    for (user, rows) in corpus.users.iter().zip(phi) {
                        for (image, row) in user.images.iter().zip(rows) {
                            let p = row[topic];
                            for d in 0..dim {
                                resid[d] = image[d] - mean[d];
                            }
                            for i in 0..dim {
                                let pi = p * resid[i];
                                for j in i..dim {
                                    data[i * dim + j] += pi * resid[j];
                                }
                            }
                        }
                    }
                    for i in 0..dim {
                        for j in (i + 1)..dim {
                            data[i * dim + j] = data[i * dim + j] / weight;
                            data[j * dim + i] = data[i * dim + j];
                        }
                        data[i * dim + i] = data[i * dim + i] / weight;
                    }
                    CovarianceRepr::full(dim, data)
                }
            }
            .map_err(|e| Error::numeric(format!("topic {topic}: {e}")))?;
            Ok((mean, cov))
        })
        .collect();

    let mut means = Vec::with_capacity(k);
    let mut covariances = Vec::with_capacity(k);
    for r in results {
        let (mean, cov) = r?;
        means.push(mean);
        covariances.push(cov);
    }
    Ok(TopicParams { means, covariances })
}

/// Closed-form link-function update from the observed-link mass
/// Π̄ = Σ_links π̄ᵤᵥ and the training-link count M:
/// ν ← log(M − 1ᵀΠ̄) − log(ρ(1 − 1/K) + M − 1ᵀΠ̄) and, elementwise,
/// η ← log(Π̄) − log(Π̄ + (ρ/K²)·1) − 1ν.
///
/// With ν subtracted outside the logarithm the pair (η, ν) is the exact
/// joint maximizer of the bound's link term together with the ρ-weighted
/// pseudo-observation of expected non-links, so this step never decreases
/// the bound. (Placing ν inside the second logarithm instead forces every
/// ηₖ negative, which makes topic overlap *lower* a pair's score and
/// inverts the ranking.)
pub fn update_link_params<T: Real>(
    state: &VariationalState<T>,
    train_links: &LinkSet,
    rho: T,
    k: usize,
) -> Result<LinkModel<T>> {
    let m = train_links.len();
    if m == 0 {
        return Err(Error::contract("link-parameter update needs at least one training link"));
    }
    let mut pi_bar_total = vec![T::zero(); k];
    for (u, v) in train_links.iter() {
        let pi = pair_pi(&state.phibar[u], &state.phibar[v])?;
        for (acc, &p) in pi_bar_total.iter_mut().zip(&pi) {
            *acc += p;
        }
    }
    let m_t = T::of(m as f64);
    let mass: T = pi_bar_total.iter().copied().sum();
    let slack = m_t - mass;
    if !(slack > T::zero()) {
        return Err(Error::numeric(format!(
            "degenerate responsibilities: M - 1'Pi_bar = {slack} (must be positive)"
        )));
    }
    let k_t = T::of(k as f64);
    let nu = slack.ln() - (rho * (T::one() - k_t.recip()) + slack).ln();
    let rho_k2 = rho / (k_t * k_t);
    let mut eta = Vec::with_capacity(k);
    for (topic, &p) in pi_bar_total.iter().enumerate() {
        if !(p > T::zero()) {
            return Err(Error::numeric(format!(
                "degenerate responsibilities: Pi_bar[{topic}] = {p} (must be positive)"
            )));
        }
        eta.push(p.ln() - (p + rho_k2).ln() - nu);
    }
    Ok(LinkModel { eta, nu })
}

/// The evidence lower bound split into its summands; `total()` is the ELBO.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboBreakdown<T> {
    /// Σᵤ Σₙ E_q[log p(x | z, topics)]
    pub gaussian_likelihood: T,
    /// Σᵤ Σₙ E_q[log p(z | θ)]
    pub assignment_likelihood: T,
    /// Σᵤ E_q[log p(θ | α)]
    pub theta_prior: T,
    /// −Σᵤ E_q[log q(θ | γ)]
    pub theta_entropy: T,
    /// −Σᵤ Σₙ E_q[log q(z | φ)]
    pub assignment_entropy: T,
    /// Σ over observed training links of ηᵀπ̄ᵤᵥ + ν
    pub link_likelihood: T,
    /// ρ-weighted pseudo-observation for unobserved negatives
    pub link_regularizer: T,
}

impl<T: Real> ElboBreakdown<T> {
    pub fn total(&self) -> T {
        self.gaussian_likelihood
            + self.assignment_likelihood
            + self.theta_prior
            + self.theta_entropy
            + self.assignment_entropy
            + self.link_likelihood
            + self.link_regularizer
    }
}

/// Term-by-term evidence lower bound for the current state.
pub fn elbo_breakdown<T: Real>(
    corpus: &Corpus<T>,
    state: &VariationalState<T>,
    topics: &TopicParams<T>,
    link_model: &LinkModel<T>,
    alpha: T,
    train_links: &LinkSet,
    rho: T,
) -> Result<ElboBreakdown<T>> {
    let k = state.k();
    let k_t = T::of(k as f64);
    let phi = match &state.phi {
        Some(phi) => phi,
        None => return Err(Error::contract("elbo needs per-image responsibilities")),
    };
    let ln_gamma_alpha_sum = ln_gamma(alpha * k_t)?;
    let ln_gamma_alpha = ln_gamma(alpha)?;

    struct UserPartial<T> {
        gaussian: T,
        assignment: T,
        theta_prior: T,
        theta_entropy: T,
        assignment_entropy: T,
    }

    let partials: Vec<Result<UserPartial<T>>> = corpus
        .users
        .par_iter()
        .zip(phi.par_iter())
        .zip(state.gamma.par_iter())
        .map(|((user, rows), gamma_u)| {
            let gamma_sum = gamma_u.iter().copied().sum::<T>();
            let dig_sum = digamma(gamma_sum)?;
            let mut dig = Vec::with_capacity(k);
            for &g in gamma_u {
                dig.push(digamma(g)? - dig_sum);
            }
            let mut theta_prior = ln_gamma_alpha_sum - k_t * ln_gamma_alpha;
            let mut neg_q_theta = -ln_gamma(gamma_sum)?;
            for topic in 0..k {
                theta_prior += (alpha - T::one()) * dig[topic];
                neg_q_theta +=
                    ln_gamma(gamma_u[topic])? - (gamma_u[topic] - T::one()) * dig[topic];
            }
            let mut gaussian = T::zero();
            let mut assignment = T::zero();
            let mut assignment_entropy = T::zero();
            for (image, row) in user.images.iter().zip(rows) {
                for topic in 0..k {
                    let p = row[topic];
                    if p > T::zero() {
                        let density = gaussian_log_density(
                            image,
                            &topics.means[topic],
                            &topics.covariances[topic],
                        )
                        .map_err(|e| Error::numeric(format!("topic {topic}: {e}")))?;
                        gaussian += p * density;
                        assignment += p * dig[topic];
                        assignment_entropy -= p * p.ln();
                    }
                }
            }
            Ok(UserPartial {
                gaussian,
                assignment,
                theta_prior,
                theta_entropy: neg_q_theta,
                assignment_entropy,
            })
        })
        .collect();

    let mut out = ElboBreakdown {
        gaussian_likelihood: T::zero(),
        assignment_likelihood: T::zero(),
        theta_prior: T::zero(),
        theta_entropy: T::zero(),
        assignment_entropy: T::zero(),
        link_likelihood: T::zero(),
        link_regularizer: T::zero(),
    };
    for partial in partials {
        let p = partial?;
        out.gaussian_likelihood += p.gaussian;
        out.assignment_likelihood += p.assignment;
        out.theta_prior += p.theta_prior;
        out.theta_entropy += p.theta_entropy;
        out.assignment_entropy += p.assignment_entropy;
    }

    for (u, v) in train_links.iter() {
        let pi = pair_pi(&state.phibar[u], &state.phibar[v])?;
        let mut s = link_model.nu;
        for (e, p) in link_model.eta.iter().zip(&pi) {
            s += *e * *p;
        }
        out.link_likelihood += s;
    }

    if rho > T::zero() {
        // Pseudo-observation of expected non-links under uniform mean
        // assignments: ρ/K² weight per component plus ρ(1 − 1/K) on ν alone.
        let mut reg = rho * (T::one() - k_t.recip()) * ln_one_minus_exp(link_model.nu)?;
        let per_component = rho / (k_t * k_t);
        for &e in &link_model.eta {
            reg += per_component * ln_one_minus_exp(e + link_model.nu)?;
        }
        out.link_regularizer = reg;
    }
    Ok(out)
}

/// The evidence lower bound; see [`elbo_breakdown`] for the pieces.
#[allow(clippy::too_many_arguments)]
pub fn elbo<T: Real>(
    corpus: &Corpus<T>,
    state: &VariationalState<T>,
    topics: &TopicParams<T>,
    link_model: &LinkModel<T>,
    alpha: T,
    train_links: &LinkSet,
    rho: T,
) -> Result<T> {
    Ok(elbo_breakdown(corpus, state, topics, link_model, alpha, train_links, rho)?.total())
}

/// Coordinate-ascent fit: sweeps φ/γ over users against a frozen snapshot,
/// then topics, then link parameters, recording the ELBO each iteration
/// until the relative change drops below tolerance or `max_iters` is hit.
pub fn fit<T: Real>(
    corpus: &Corpus<T>,
    train_links: &LinkSet,
    cfg: &FitConfig<T>,
) -> Result<FittedModel<T>> {
    fit_observed(corpus, train_links, cfg, |_| {})
}

/// [`fit`] with a per-iteration observer, used by invariant checks.
pub fn fit_observed<T: Real>(
    corpus: &Corpus<T>,
    train_links: &LinkSet,
    cfg: &FitConfig<T>,
    mut observer: impl FnMut(&IterationEvent<'_, T>),
) -> Result<FittedModel<T>> {
    let h = cfg.hyperparams.clone();
    h.validate()?;
    let violations = validate(corpus, train_links);
    if !violations.is_empty() {
        let mut msg = format!("{} validation violation(s): ", violations.len());
        for v in violations.iter().take(3) {
            msg.push_str(&v.to_string());
            msg.push_str("; ");
        }
        return Err(Error::contract(msg));
    }
    if train_links.is_empty() {
        return Err(Error::contract("fit requires at least one training link"));
    }

    let (mut state, mut topics) = init_state(corpus, cfg)?;
    let mut link_model = update_link_params(&state, train_links, h.rho, h.k)
        .map_err(|e| e.at_iteration(0))?;
    let mut trace = Vec::with_capacity(h.max_iters + 1);
    trace.push(
        elbo(corpus, &state, &topics, &link_model, h.alpha, train_links, h.rho)
            .map_err(|e| e.at_iteration(0))?,
    );

    for iteration in 1..=h.max_iters {
        let step = (|| -> Result<T> {
            // φ/γ sweep against the previous sweep's φ̄ snapshot; results do
            // not depend on user order, so users run in parallel.
            let updates: Vec<(Vec<DenseVector<T>>, DenseVector<T>)> = (0..corpus.n_users())
                .into_par_iter()
                .map(|u| {
                    let rows = update_phi(corpus, &state, &topics, &link_model, train_links, u)?;
                    let gamma = gamma_from_rows(&rows, h.alpha, h.k);
                    Ok((rows, gamma))
                })
                .collect::<Result<_>>()?;
            let phi = state.phi.as_mut().expect("fit state always carries phi");
            for (u, (rows, gamma)) in updates.into_iter().enumerate() {
                phi[u] = rows;
                state.gamma[u] = gamma;
            }
            state.refresh_phibar()?;

            topics = update_topics(corpus, &state, h.cov_kind, Some(&topics))?;
            link_model = update_link_params(&state, train_links, h.rho, h.k)?;
            elbo(corpus, &state, &topics, &link_model, h.alpha, train_links, h.rho)
        })()
        .map_err(|e| e.at_iteration(iteration))?;

        let previous = *trace.last().expect("trace is seeded");
        trace.push(step);
        let delta = step - previous;
        if cfg.log_every > 0 && iteration % cfg.log_every == 0 {
            eprintln!("[grtm] iteration {iteration}: elbo {step:.6} delta {delta:.6e}");
        }
        observer(&IterationEvent {
            iteration,
            elbo: step,
            state: &state,
            topics: &topics,
            link_model: &link_model,
        });
        let scale = previous.abs();
        let rel = if scale > T::zero() { delta.abs() / scale } else { delta.abs() };
        if rel < h.elbo_rel_tol {
            break;
        }
    }

    Ok(FittedModel {
        hyperparams: h,
        topic_params: topics,
        state,
        link_model,
        elbo_trace: trace,
    })
}
