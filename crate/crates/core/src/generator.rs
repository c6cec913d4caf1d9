//! Synthetic corpora sampled from the generative process with known planted
//! parameters, for recovery and end-to-end tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::mathkit::{squared_distance, CovarianceRepr, DenseVector};
use crate::model::{Corpus, LinkModel, LinkSet, TopicParams, UserCollection};
use crate::scalar::Real;

/// Configuration for [`sample_corpus`].
#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig<T> {
    pub n_users: usize,
    /// Inclusive range for the per-user image count.
    pub images_per_user: (usize, usize),
    pub k: usize,
    pub feature_dim: usize,
    /// Dirichlet concentration for the planted topic proportions.
    pub alpha: T,
    /// Pairwise distance between planted topic means, in units of sigma.
    pub topic_mean_separation: T,
    /// Per-dimension standard deviation of every planted topic.
    pub sigma: T,
    pub eta_true: DenseVector<T>,
    pub nu_true: T,
    pub seed: u64,
}

impl<T: Real> GenConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 {
            return Err(Error::contract("generator needs at least one user"));
        }
        let (lo, hi) = self.images_per_user;
        if hi < lo {
            return Err(Error::contract(format!("images_per_user range [{lo}, {hi}] is empty")));
        }
        if self.k == 0 || self.feature_dim == 0 {
            return Err(Error::contract("K and feature dimension must be >= 1"));
        }
        if !(self.alpha > T::zero()) {
            return Err(Error::contract("alpha must be > 0"));
        }
        if !(self.topic_mean_separation > T::zero()) {
            return Err(Error::contract("topic_mean_separation must be > 0"));
        }
        if !(self.sigma > T::zero()) {
            return Err(Error::contract("sigma must be > 0"));
        }
        if self.eta_true.len() != self.k {
            return Err(Error::contract(format!(
                "eta_true has {} entries, expected K = {}",
                self.eta_true.len(),
                self.k
            )));
        }
        Ok(())
    }
}

/// The planted latent variables and parameters behind a synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth<T> {
    /// Per-user planted topic proportions (N x K, rows on the simplex).
    pub theta: Vec<DenseVector<T>>,
    /// Per-user, per-image planted topic assignments.
    pub z: Vec<Vec<usize>>,
    pub topic_params: TopicParams<T>,
    pub link_model_true: LinkModel<T>,
}

/// One draw from a Dirichlet via normalized independent Gamma samples.
/// Raw draws happen in f64 so both scalar widths see the same stream.
pub fn dirichlet_sample<T: Real, R: Rng>(alpha: &[T], rng: &mut R) -> Result<DenseVector<T>> {
    if alpha.is_empty() {
        return Err(Error::contract("dirichlet_sample needs at least one component"));
    }
    let mut draws = Vec::with_capacity(alpha.len());
    for &a in alpha {
        let a64 = a.to_f64_lossy();
        if !(a64 > 0.0) {
            return Err(Error::contract(format!("dirichlet concentration must be > 0, got {a}")));
        }
        let gamma = Gamma::new(a64, 1.0)
            .map_err(|e| Error::numeric(format!("gamma sampler rejected shape {a64}: {e}")))?;
        draws.push(T::of(gamma.sample(rng)));
    }
    let sum: T = draws.iter().copied().sum();
    if !(sum > T::zero()) {
        // All draws underflowed (pathologically small alpha); fall back to uniform.
        return Ok(crate::model::uniform_simplex(alpha.len()));
    }
    for d in &mut draws {
        *d /= sum;
    }
    Ok(draws)
}

/// Planted topic means with pairwise distance `dist`. For K <= D the means
/// sit on scaled coordinate axes, which makes every pairwise distance exact;
/// otherwise random directions approximate the separation.
fn planted_means<T: Real>(
    k: usize,
    dim: usize,
    dist: T,
    rng: &mut ChaCha8Rng,
) -> Vec<DenseVector<T>> {
    let scale = dist / T::of(2.0).sqrt();
    if k <= dim {
        (0..k)
            .map(|topic| {
                let mut mean = vec![T::zero(); dim];
                mean[topic] = scale;
                mean
            })
            .collect()
    } else {
        let mut means: Vec<DenseVector<T>> = Vec::with_capacity(k);
        for _ in 0..k {
            let mut best: Option<(f64, DenseVector<T>)> = None;
            for _ in 0..100 {
                let mut dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
                let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                for x in &mut dir {
                    *x /= norm;
                }
                let candidate: DenseVector<T> =
                    dir.iter().map(|&x| T::of(x) * scale).collect();
                let min_d = means
                    .iter()
                    .map(|m| squared_distance(m, &candidate).to_f64_lossy())
                    .fold(f64::INFINITY, f64::min);
                if best.as_ref().is_none_or(|(d, _)| min_d > *d) {
                    best = Some((min_d, candidate));
                }
                if min_d >= (dist * dist).to_f64_lossy() * 0.64 {
                    break;
                }
            }
            means.push(best.expect("at least one candidate").1);
        }
        means
    }
}

/// Samples a corpus, its links, and the planted ground truth. Deterministic
/// given the seed: draw order is fixed regardless of parameter values.
pub fn sample_corpus<T: Real>(cfg: &GenConfig<T>) -> Result<(Corpus<T>, LinkSet, GroundTruth<T>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dist = cfg.topic_mean_separation * cfg.sigma;
    let means = planted_means(cfg.k, cfg.feature_dim, dist, &mut rng);
    let var = cfg.sigma * cfg.sigma;
    let covariances: Vec<CovarianceRepr<T>> = (0..cfg.k)
        .map(|_| CovarianceRepr::diagonal(vec![var; cfg.feature_dim]))
        .collect::<Result<_>>()?;

    let alpha_vec = vec![cfg.alpha; cfg.k];
    let (lo, hi) = cfg.images_per_user;
    let mut users = Vec::with_capacity(cfg.n_users);
    let mut theta = Vec::with_capacity(cfg.n_users);
    let mut z = Vec::with_capacity(cfg.n_users);
    let mut zbar: Vec<DenseVector<T>> = Vec::with_capacity(cfg.n_users);

    for user_id in 0..cfg.n_users {
        let n_u = rng.random_range(lo..=hi);
        let theta_u = dirichlet_sample(&alpha_vec, &mut rng)?;
        let theta64: Vec<f64> = theta_u.iter().map(|t| t.to_f64_lossy()).collect();
        let mut images = Vec::with_capacity(n_u);
        let mut z_u = Vec::with_capacity(n_u);
        let mut counts = vec![T::zero(); cfg.k];
        for _ in 0..n_u {
            let topic = categorical(&theta64, rng.random::<f64>());
            z_u.push(topic);
            counts[topic] += T::one();
            let image: DenseVector<T> = (0..cfg.feature_dim)
                .map(|d| {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    means[topic][d] + cfg.sigma * T::of(noise)
                })
                .collect();
            images.push(image);
        }
        let zbar_u = if n_u == 0 {
            crate::model::uniform_simplex(cfg.k)
        } else {
            let n = T::of(n_u as f64);
            counts.iter().map(|&c| c / n).collect()
        };
        users.push(UserCollection { user_id, images });
        theta.push(theta_u);
        z.push(z_u);
        zbar.push(zbar_u);
    }

    // Links: Bernoulli with the exponential link clamped at 1.
    let mut links = LinkSet::new();
    for u in 0..cfg.n_users {
        for v in (u + 1)..cfg.n_users {
            let mut logit = cfg.nu_true;
            for topic in 0..cfg.k {
                logit += cfg.eta_true[topic] * zbar[u][topic] * zbar[v][topic];
            }
            let p = logit.to_f64_lossy().exp().min(1.0);
            if rng.random::<f64>() < p {
                links.insert(u, v)?;
            }
        }
    }

    let corpus = Corpus::new(users, cfg.feature_dim);
    let truth = GroundTruth {
        theta,
        z,
        topic_params: TopicParams { means, covariances },
        link_model_true: LinkModel { eta: cfg.eta_true.clone(), nu: cfg.nu_true },
    };
    Ok((corpus, links, truth))
}

/// Index drawn from a categorical distribution given a uniform variate.
fn categorical(probs: &[f64], draw: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if draw < acc {
            return i;
        }
    }
    probs.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_cfg() -> GenConfig<f64> {
        GenConfig {
            n_users: 20,
            images_per_user: (5, 10),
            k: 3,
            feature_dim: 4,
            alpha: 0.8,
            topic_mean_separation: 10.0,
            sigma: 1.0,
            eta_true: vec![4.0, 4.0, 4.0],
            nu_true: -3.0,
            seed: 2024,
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let cfg = base_cfg();
        let (c1, l1, t1) = sample_corpus(&cfg).unwrap();
        let (c2, l2, t2) = sample_corpus(&cfg).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(l1, l2);
        assert_eq!(t1, t2);
    }

    #[test]
    fn single_topic_sample_mean_obeys_lln_bound() {
        let mut cfg = base_cfg();
        cfg.k = 1;
        cfg.eta_true = vec![0.0];
        cfg.n_users = 40;
        cfg.images_per_user = (30, 30);
        let (corpus, _, truth) = sample_corpus(&cfg).unwrap();
        let mean = corpus.global_mean();
        let total = corpus.total_images() as f64;
        let bound = 4.0 * cfg.sigma / total.sqrt();
        for (got, want) in mean.iter().zip(&truth.topic_params.means[0]) {
            assert!((got - want).abs() <= bound, "got {got}, want {want}, bound {bound}");
        }
    }

    #[test]
    fn vanishing_link_rate_gives_zero_links() {
        let mut cfg = base_cfg();
        cfg.nu_true = -50.0;
        cfg.eta_true = vec![0.0; cfg.k];
        let (_, links, _) = sample_corpus(&cfg).unwrap();
        assert!(links.is_empty());
    }

    #[test]
    fn large_alpha_approaches_uniform_topic_frequencies() {
        let mut cfg = base_cfg();
        cfg.alpha = 100.0;
        cfg.n_users = 60;
        cfg.images_per_user = (40, 40);
        let (_, _, truth) = sample_corpus(&cfg).unwrap();
        let k = cfg.k;
        let mut freq = vec![0.0; k];
        let mut total = 0.0;
        for z_u in &truth.z {
            for &topic in z_u {
                freq[topic] += 1.0;
                total += 1.0;
            }
        }
        for f in &mut freq {
            *f /= total;
        }
        for &f in &freq {
            assert!((f - 1.0 / k as f64).abs() <= 0.03, "freq {freq:?}");
        }
    }

    #[test]
    fn dirichlet_sample_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let one = dirichlet_sample(&[2.5f64], &mut rng).unwrap();
        assert_eq!(one, vec![1.0]);
        for _ in 0..50 {
            let draw = dirichlet_sample(&[0.5f64, 1.5, 3.0], &mut rng).unwrap();
            let sum: f64 = draw.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12);
            assert!(draw.iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn dirichlet_sample_moment_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let k = 4;
        let alpha = vec![2.0f64; k];
        let mut mean = vec![0.0; k];
        let n = 100_000;
        for _ in 0..n {
            let draw = dirichlet_sample(&alpha, &mut rng).unwrap();
            for (m, d) in mean.iter_mut().zip(&draw) {
                *m += d;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        for &m in &mean {
            assert!((m - 1.0 / k as f64).abs() <= 0.01, "mean {mean:?}");
        }
    }

    #[test]
    fn links_have_no_self_loops_and_are_symmetric() {
        let mut cfg = base_cfg();
        cfg.nu_true = -0.5;
        let (_, links, _) = sample_corpus(&cfg).unwrap();
        for (u, v) in links.iter() {
            assert!(u < v);
            assert!(links.contains(v, u));
        }
    }

    #[test]
    fn separated_topics_are_recoverable_by_nearest_mean() {
        let cfg = base_cfg(); // separation 10 sigma
        let (corpus, _, truth) = sample_corpus(&cfg).unwrap();
        let mut correct = 0usize;
        let mut total = 0usize;
        for (u, user) in corpus.users.iter().enumerate() {
            for (n, image) in user.images.iter().enumerate() {
                let nearest = truth
                    .topic_params
                    .means
                    .iter()
                    .enumerate()
                    .min_by(|(_, a), (_, b)| {
                        squared_distance(image, a)
                            .partial_cmp(&squared_distance(image, b))
                            .unwrap()
                    })
                    .unwrap()
                    .0;
                total += 1;
                if nearest == truth.z[u][n] {
                    correct += 1;
                }
            }
        }
        assert!(correct as f64 >= 0.99 * total as f64, "{correct}/{total}");
    }

    #[test]
    fn planted_means_have_exact_pairwise_separation() {
        let cfg = base_cfg();
        let (_, _, truth) = sample_corpus(&cfg).unwrap();
        let want = (cfg.topic_mean_separation * cfg.sigma).powi(2);
        let means = &truth.topic_params.means;
        for i in 0..means.len() {
            for j in (i + 1)..means.len() {
                let d = squared_distance(&means[i], &means[j]);
                assert!((d - want).abs() <= 1e-9 * want);
            }
        }
    }

    #[test]
    fn more_topics_than_dimensions_still_generates() {
        let mut cfg = base_cfg();
        cfg.k = 6;
        cfg.feature_dim = 2;
        cfg.eta_true = vec![1.0; 6];
        let (corpus, _, truth) = sample_corpus(&cfg).unwrap();
        assert_eq!(corpus.feature_dim, 2);
        assert_eq!(truth.topic_params.means.len(), 6);
    }
}
