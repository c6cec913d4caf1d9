//! Comparison methods: mean-feature profiles and cluster-histogram (BoFT)
//! profiles, scored by cosine similarity over all user pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linkpredict::PairScore;
use crate::mathkit::{dot, squared_distance, DenseVector};
use crate::model::Corpus;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Mean,
    Histogram,
}

/// A user summarized as a single vector: D-dimensional mean features or
/// K_c-dimensional cluster-label counts.
#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile<T> {
    pub user_id: usize,
    pub vector: DenseVector<T>,
    pub kind: ProfileKind,
}

/// Which baseline to score with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMethod {
    Mean,
    Boft,
}

/// Parameters for [`baseline_scores`]; only BoFT uses them.
#[derive(Debug, Clone, Copy)]
pub struct BaselineParams {
    /// Cluster count for the histogram profiles.
    pub k_c: usize,
    pub seed: u64,
}

/// Elementwise average of a user's image vectors. A user without images
/// gets the zero vector.
pub fn mean_profile<T: Real>(corpus: &Corpus<T>, user: usize) -> UserProfile<T> {
    let images = corpus.images(user);
    let mut vector = vec![T::zero(); corpus.feature_dim];
    if images.is_empty() {
        eprintln!("[grtm] warning: user {user} has no images; mean profile is the zero vector");
        return UserProfile { user_id: user, vector, kind: ProfileKind::Mean };
    }
    for image in images {
        for (m, &x) in vector.iter_mut().zip(image) {
            *m += x;
        }
    }
    let n = T::of(images.len() as f64);
    for m in &mut vector {
        *m /= n;
    }
    UserProfile { user_id: user, vector, kind: ProfileKind::Mean }
}

/// Output of Lloyd's algorithm. Labels follow the corpus's flat image order
/// (user-major). The inertia trace holds the assignment cost of every
/// iteration, which is non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct KmeansResult<T> {
    pub labels: Vec<usize>,
    pub centroids: Vec<DenseVector<T>>,
    pub inertia_trace: Vec<T>,
}

/// K-means over all images of the corpus: k-means++ seeding, then Lloyd
/// iterations to an assignment fixpoint or 100 iterations.
pub fn kmeans_cluster<T: Real>(corpus: &Corpus<T>, k_c: usize, seed: u64) -> Result<KmeansResult<T>> {
    let points: Vec<&DenseVector<T>> =
        corpus.users.iter().flat_map(|u| u.images.iter()).collect();
    let n = points.len();
    if k_c == 0 {
        return Err(Error::contract("kmeans needs at least one cluster"));
    }
    if k_c > n {
        return Err(Error::contract(format!(
            "kmeans cluster count {k_c} exceeds image count {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_pp_seeds(&points, k_c, &mut rng);

    let mut labels = vec![0usize; n];
    let mut inertia_trace = Vec::new();
    for _ in 0..100 {
        // Assignment step; ties go to the lowest cluster index.
        let mut changed = false;
        let mut inertia = T::zero();
        for (i, point) in points.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = squared_distance(point.as_slice(), &centroids[0]);
            for (c, centroid) in centroids.iter().enumerate().skip(1) {
                let d = squared_distance(point.as_slice(), centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            inertia += best_d;
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        inertia_trace.push(inertia);
        if !changed && inertia_trace.len() > 1 {
            break;
        }
        // Update step; empty clusters keep their previous centroid.
        let dim = corpus.feature_dim;
        let mut sums = vec![vec![T::zero(); dim]; k_c];
        let mut counts = vec![0usize; k_c];
        for (i, point) in points.iter().enumerate() {
            counts[labels[i]] += 1;
            for (s, &x) in sums[labels[i]].iter_mut().zip(point.iter()) {
                *s += x;
            }
        }
        for c in 0..k_c {
            if counts[c] > 0 {
                let count = T::of(counts[c] as f64);
                for (dst, s) in centroids[c].iter_mut().zip(&sums[c]) {
                    *dst = *s / count;
                }
            }
        }
    }
    Ok(KmeansResult { labels, centroids, inertia_trace })
}

/// k-means++ seeding: first centroid uniform, the rest proportional to the
/// squared distance from the nearest already-chosen one.
fn kmeans_pp_seeds<T: Real>(
    points: &[&DenseVector<T>],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<DenseVector<T>> {
    let n = points.len();
    let first = rng.random_range(0..n);
    let mut centroids: Vec<DenseVector<T>> = vec![points[first].clone()];
    let mut dist2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p.as_slice(), &centroids[0]).to_f64_lossy())
        .collect();
    while centroids.len() < k {
        let total: f64 = dist2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in dist2.iter().enumerate() {
                r -= d;
                if r <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All remaining points coincide with a centroid; pick uniformly.
            rng.random_range(0..n)
        };
        let new_centroid = points[pick].clone();
        for (i, p) in points.iter().enumerate() {
            let d = squared_distance(p.as_slice(), &new_centroid).to_f64_lossy();
            if d < dist2[i] {
                dist2[i] = d;
            }
        }
        centroids.push(new_centroid);
    }
    centroids
}

/// K_c-vector of label counts for one user's images.
pub fn histogram_profile<T: Real>(
    corpus: &Corpus<T>,
    labels: &[usize],
    user: usize,
    k_c: usize,
) -> Result<UserProfile<T>> {
    if labels.len() != corpus.total_images() {
        return Err(Error::contract(format!(
            "label vector covers {} images, corpus has {}",
            labels.len(),
            corpus.total_images()
        )));
    }
    let offset: usize = corpus.users[..user].iter().map(|u| u.images.len()).sum();
    let n_u = corpus.images(user).len();
    let mut vector = vec![T::zero(); k_c];
    for &label in &labels[offset..offset + n_u] {
        vector[label] += T::one();
    }
    Ok(UserProfile { user_id: user, vector, kind: ProfileKind::Histogram })
}

/// dot(a, b) / (‖a‖ ‖b‖); zero when either vector is zero.
pub fn cosine_similarity<T: Real>(a: &[T], b: &[T]) -> T {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == T::zero() || nb == T::zero() {
        return T::zero();
    }
    dot(a, b) / (na * nb)
}

/// Cosine similarity between user profiles for every unordered pair.
pub fn baseline_scores<T: Real>(
    corpus: &Corpus<T>,
    method: BaselineMethod,
    params: &BaselineParams,
) -> Result<Vec<PairScore<T>>> {
    let n = corpus.n_users();
    let profiles: Vec<UserProfile<T>> = match method {
        BaselineMethod::Mean => (0..n).map(|u| mean_profile(corpus, u)).collect(),
        BaselineMethod::Boft => {
            let km = kmeans_cluster(corpus, params.k_c, params.seed)?;
            (0..n)
                .map(|u| histogram_profile(corpus, &km.labels, u, params.k_c))
                .collect::<Result<_>>()?
        }
    };
    let mut scores = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for u in 0..n {
        for v in (u + 1)..n {
            let score = cosine_similarity(&profiles[u].vector, &profiles[v].vector);
            scores.push(PairScore { u, v, score });
        }
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::UserCollection;
    use rand_distr::{Distribution, StandardNormal};

    fn corpus_from(images: Vec<Vec<Vec<f64>>>, dim: usize) -> Corpus<f64> {
        Corpus::new(
            images
                .into_iter()
                .enumerate()
                .map(|(user_id, images)| UserCollection { user_id, images })
                .collect(),
            dim,
        )
    }

    #[test]
    fn mean_profile_examples() {
        let corpus = corpus_from(vec![vec![vec![3.0, -1.0]], vec![vec![0.0, 0.0], vec![2.0, 4.0]]], 2);
        assert_eq!(mean_profile(&corpus, 0).vector, vec![3.0, -1.0]);
        assert_eq!(mean_profile(&corpus, 1).vector, vec![1.0, 2.0]);
    }

    #[test]
    fn mean_profile_order_invariant() {
        let a = corpus_from(vec![vec![vec![1.0, 2.0], vec![5.0, -4.0], vec![0.5, 0.5]]], 2);
        let b = corpus_from(vec![vec![vec![0.5, 0.5], vec![1.0, 2.0], vec![5.0, -4.0]]], 2);
        assert_eq!(mean_profile(&a, 0).vector, mean_profile(&b, 0).vector);
    }

    /// Two tight, far-separated point clouds; the construction itself is the
    /// oracle for the expected labeling.
    fn two_clouds(per_cloud: usize, separation: f64, std: f64, seed: u64) -> Corpus<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut images = Vec::new();
        for c in 0..2 {
            let center = separation * c as f64;
            for _ in 0..per_cloud {
                let x: f64 = StandardNormal.sample(&mut rng);
                let y: f64 = StandardNormal.sample(&mut rng);
                images.push(vec![center + std * x, std * y]);
            }
        }
        corpus_from(vec![images], 2)
    }

    #[test]
    fn kmeans_separates_far_clouds() {
        let corpus = two_clouds(40, 20.0, 1.0, 3);
        let km = kmeans_cluster(&corpus, 2, 11).unwrap();
        let first = &km.labels[..40];
        let second = &km.labels[40..];
        assert!(first.iter().all(|&l| l == first[0]));
        assert!(second.iter().all(|&l| l == second[0]));
        assert_ne!(first[0], second[0]);
    }

    #[test]
    fn kmeans_single_cluster_is_global_mean() {
        let corpus = corpus_from(vec![vec![vec![0.0, 0.0], vec![2.0, 2.0], vec![4.0, -1.0]]], 2);
        let km = kmeans_cluster(&corpus, 1, 0).unwrap();
        let want = corpus.global_mean();
        for (a, b) in km.centroids[0].iter().zip(&want) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn kmeans_inertia_non_increasing() {
        let corpus = two_clouds(30, 3.0, 1.5, 7);
        let km = kmeans_cluster(&corpus, 4, 5).unwrap();
        for w in km.inertia_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "inertia increased: {:?}", w);
        }
    }

    #[test]
    fn kmeans_deterministic_and_bounded() {
        let corpus = two_clouds(20, 5.0, 1.0, 9);
        let a = kmeans_cluster(&corpus, 3, 42).unwrap();
        let b = kmeans_cluster(&corpus, 3, 42).unwrap();
        assert_eq!(a, b);
        assert!(kmeans_cluster(&corpus, 41, 42).is_err());
    }

    #[test]
    fn histogram_profile_examples() {
        let corpus = corpus_from(
            vec![vec![vec![0.0], vec![0.1], vec![0.2]], vec![]],
            1,
        );
        let labels = vec![0, 0, 0];
        let p = histogram_profile(&corpus, &labels, 0, 2).unwrap();
        assert_eq!(p.vector, vec![3.0, 0.0]);
        let empty = histogram_profile(&corpus, &labels, 1, 2).unwrap();
        assert_eq!(empty.vector, vec![0.0, 0.0]);
        let sum: f64 = p.vector.iter().sum();
        assert_eq!(sum, corpus.images(0).len() as f64);
    }

    #[test]
    fn cosine_similarity_examples() {
        let a: Vec<f64> = vec![1.0, 2.0, -0.5];
        assert!((cosine_similarity(&a, &a) - 1.0).abs() <= 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        let scaled: Vec<f64> = a.iter().map(|x| 2.0 * x).collect();
        let b = vec![0.3, -0.9, 2.0];
        assert!(
            (cosine_similarity(&scaled, &b) - cosine_similarity(&a, &b)).abs() <= 1e-15
        );
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]), 0.0);
    }

    #[test]
    fn baseline_scores_pair_count_and_symmetric_max() {
        let corpus = corpus_from(
            vec![
                vec![vec![1.0, 0.0]],
                vec![vec![1.0, 0.0]],
                vec![vec![0.0, 1.0]],
            ],
            2,
        );
        let scores =
            baseline_scores(&corpus, BaselineMethod::Mean, &BaselineParams { k_c: 2, seed: 0 })
                .unwrap();
        assert_eq!(scores.len(), 3);
        let best = scores
            .iter()
            .max_by(|a, b| a.score.partial_cmp(&b.score).unwrap())
            .unwrap();
        assert_eq!((best.u, best.v), (0, 1));
    }

    #[test]
    fn mean_scores_match_hand_computed_cosines() {
        // Fixed 4-user instance; the oracle is a straight-line evaluation.
        let profiles = [
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 2.0],
            vec![-1.0, 0.0],
        ];
        let corpus = corpus_from(profiles.iter().map(|p| vec![p.clone()]).collect(), 2);
        let scores =
            baseline_scores(&corpus, BaselineMethod::Mean, &BaselineParams { k_c: 2, seed: 0 })
                .unwrap();
        for s in &scores {
            let a = &profiles[s.u];
            let b = &profiles[s.v];
            let want = (a[0] * b[0] + a[1] * b[1])
                / ((a[0] * a[0] + a[1] * a[1]).sqrt() * (b[0] * b[0] + b[1] * b[1]).sqrt());
            assert!((s.score - want).abs() <= 1e-15, "pair ({}, {})", s.u, s.v);
        }
    }

    #[test]
    fn boft_scores_identical_users_highest() {
        let cloud_a = vec![vec![0.0, 0.0], vec![0.1, 0.0]];
        let cloud_b = vec![vec![30.0, 30.0], vec![30.1, 30.0]];
        let corpus = corpus_from(vec![cloud_a.clone(), cloud_a, cloud_b], 2);
        let scores =
            baseline_scores(&corpus, BaselineMethod::Boft, &BaselineParams { k_c: 2, seed: 1 })
                .unwrap();
        let best = scores
            .iter()
            .max_by(|a, b| a.score.partial_cmp(&b.score).unwrap())
            .unwrap();
        assert_eq!((best.u, best.v), (0, 1));
        assert!((best.score - 1.0).abs() <= 1e-12);
    }
}
