//! Per-user topic summaries, pairwise link scores, and candidate ranking.

use crate::error::{Error, Result};
use crate::mathkit::{dot, DenseVector};
use crate::model::{mean_responsibilities, FittedModel, LinkModel, LinkSet, VariationalState};
use crate::scalar::Real;

/// Scored user pair. `score` is the raw exponential-link value, unbounded
/// above; ranking and curve metrics use it directly.
#[derive(Debug, Clone, PartialEq)]
pub struct PairScore<T> {
    pub u: usize,
    pub v: usize,
    pub score: T,
}

impl<T: Real> PairScore<T> {
    /// The score clamped to a probability: `min(1, score)`.
    pub fn probability(&self) -> T {
        self.score.min(T::one())
    }
}

/// Mean responsibility vector φ̄ᵤ = (1/Nᵤ) Σₙ φᵤₙ; uniform when the user
/// has no images.
pub fn user_topic_mean<T: Real>(state: &VariationalState<T>, user: usize) -> DenseVector<T> {
    match &state.phi {
        Some(phi) => mean_responsibilities(&phi[user], state.k()),
        None => state.phibar[user].clone(),
    }
}

/// Elementwise product π̄ of two users' mean responsibilities.
pub fn pair_pi<T: Real>(phibar_u: &[T], phibar_v: &[T]) -> Result<DenseVector<T>> {
    if phibar_u.len() != phibar_v.len() {
        return Err(Error::contract(format!(
            "pair_pi length mismatch: {} vs {}",
            phibar_u.len(),
            phibar_v.len()
        )));
    }
    Ok(phibar_u.iter().zip(phibar_v).map(|(&a, &b)| a * b).collect())
}

/// Plug-in link score exp(ηᵀπ̄ + ν).
pub fn predict_link<T: Real>(
    phibar_u: &[T],
    phibar_v: &[T],
    link_model: &LinkModel<T>,
) -> Result<T> {
    let pi = pair_pi(phibar_u, phibar_v)?;
    if pi.len() != link_model.eta.len() {
        return Err(Error::contract(format!(
            "predict_link dimension mismatch: pi has {}, eta has {}",
            pi.len(),
            link_model.eta.len()
        )));
    }
    Ok((dot(&link_model.eta, &pi) + link_model.nu).exp())
}

/// Scores one pair of a fitted model.
pub fn score_pair<T: Real>(model: &FittedModel<T>, u: usize, v: usize) -> Result<PairScore<T>> {
    let n = model.n_users();
    if u >= n || v >= n {
        return Err(Error::contract(format!(
            "pair ({u}, {v}) outside valid user range [0, {n})"
        )));
    }
    let score = predict_link(&model.state.phibar[u], &model.state.phibar[v], &model.link_model)?;
    Ok(PairScore { u, v, score })
}

/// Scores a list of pairs against a fitted model.
pub fn score_pairs<T: Real>(
    model: &FittedModel<T>,
    pairs: impl IntoIterator<Item = (usize, usize)>,
) -> Result<Vec<PairScore<T>>> {
    pairs.into_iter().map(|(u, v)| score_pair(model, u, v)).collect()
}

/// All candidates `v != u` not excluded, sorted by score descending with
/// ties broken by ascending id, truncated to `top_n`.
pub fn rank_candidates<T: Real>(
    model: &FittedModel<T>,
    user: usize,
    exclude: &LinkSet,
    top_n: usize,
) -> Result<Vec<PairScore<T>>> {
    let n = model.n_users();
    if user >= n {
        return Err(Error::contract(format!(
            "unknown user {user}; valid range is [0, {n})"
        )));
    }
    let mut scored = Vec::with_capacity(n.saturating_sub(1));
    for v in 0..n {
        if v == user || exclude.contains(user, v) {
            continue;
        }
        scored.push(score_pair(model, user, v)?);
    }
    scored.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("link scores are finite")
            .then(a.v.cmp(&b.v))
    });
    scored.truncate(top_n);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathkit::{CovKind, CovarianceRepr};
    use crate::model::{Hyperparams, TopicParams};

    fn state_with_phibar(phibar: Vec<Vec<f64>>) -> VariationalState<f64> {
        let k = phibar[0].len();
        let gamma = vec![vec![1.0; k]; phibar.len()];
        VariationalState { phi: None, gamma, phibar }
    }

    fn toy_model(phibar: Vec<Vec<f64>>, eta: Vec<f64>, nu: f64) -> FittedModel<f64> {
        let k = eta.len();
        let hyperparams = Hyperparams { k, cov_kind: CovKind::Diagonal, ..Hyperparams::default() };
        FittedModel {
            hyperparams,
            topic_params: TopicParams {
                means: vec![vec![0.0]; k],
                covariances: vec![CovarianceRepr::diagonal(vec![1.0]).unwrap(); k],
            },
            state: state_with_phibar(phibar),
            link_model: LinkModel { eta, nu },
            elbo_trace: vec![],
        }
    }

    #[test]
    fn user_topic_mean_examples() {
        let phi = vec![
            vec![vec![0.2, 0.8]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![],
        ];
        let state = VariationalState {
            phi: Some(phi),
            gamma: vec![vec![1.0; 2]; 3],
            phibar: vec![vec![0.0; 2]; 3],
        };
        assert_eq!(user_topic_mean(&state, 0), vec![0.2, 0.8]);
        assert_eq!(user_topic_mean(&state, 1), vec![0.5, 0.5]);
        assert_eq!(user_topic_mean(&state, 2), vec![0.5, 0.5]);
    }

    #[test]
    fn pair_pi_examples() {
        assert_eq!(pair_pi(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(pair_pi(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), vec![0.25, 0.25]);
        let one_hot = [0.0, 1.0, 0.0];
        assert_eq!(pair_pi(&one_hot, &one_hot).unwrap(), vec![0.0, 1.0, 0.0]);
        assert!(pair_pi(&[0.5, 0.5], &[1.0]).is_err());
    }

    #[test]
    fn predict_link_examples() {
        let lm = LinkModel { eta: vec![0.0, 0.0], nu: 0.0 };
        let s = predict_link(&[0.3, 0.7], &[0.9, 0.1], &lm).unwrap();
        assert_eq!(s, 1.0);

        let lm = LinkModel { eta: vec![0.0, 0.0], nu: 0.5f64.ln() };
        let s = predict_link(&[0.3, 0.7], &[0.9, 0.1], &lm).unwrap();
        assert!((s - 0.5).abs() <= 1e-15);

        // Disjoint one-hot interests leave only the baseline rate.
        let lm = LinkModel { eta: vec![2.0, -3.0], nu: -1.25 };
        let s = predict_link(&[1.0, 0.0], &[0.0, 1.0], &lm).unwrap();
        assert!((s - (-1.25f64).exp()).abs() <= 1e-15);
    }

    #[test]
    fn predict_link_symmetry_is_exact() {
        let lm = LinkModel { eta: vec![1.3, -0.4, 0.9], nu: -0.7 };
        let a = [0.2, 0.5, 0.3];
        let b = [0.6, 0.1, 0.3];
        assert_eq!(predict_link(&a, &b, &lm).unwrap(), predict_link(&b, &a, &lm).unwrap());
    }

    #[test]
    fn score_increases_with_pi_iff_eta_positive() {
        let lm = LinkModel { eta: vec![0.8, -0.8], nu: -0.2 };
        let base = predict_link(&[0.4, 0.6], &[0.5, 0.5], &lm).unwrap();
        let up_pos = predict_link(&[0.5, 0.6], &[0.5, 0.5], &lm).unwrap();
        let up_neg = predict_link(&[0.4, 0.7], &[0.5, 0.5], &lm).unwrap();
        assert!(up_pos > base);
        assert!(up_neg < base);
    }

    #[test]
    fn ranking_invariant_under_nu_shift() {
        let phibar = vec![
            vec![0.7, 0.2, 0.1],
            vec![0.6, 0.3, 0.1],
            vec![0.1, 0.1, 0.8],
            vec![0.3, 0.4, 0.3],
        ];
        let model_a = toy_model(phibar.clone(), vec![1.5, -0.5, 2.0], -1.0);
        let model_b = toy_model(phibar, vec![1.5, -0.5, 2.0], 3.5);
        let ra = rank_candidates(&model_a, 0, &LinkSet::new(), 10).unwrap();
        let rb = rank_candidates(&model_b, 0, &LinkSet::new(), 10).unwrap();
        let order_a: Vec<usize> = ra.iter().map(|p| p.v).collect();
        let order_b: Vec<usize> = rb.iter().map(|p| p.v).collect();
        assert_eq!(order_a, order_b);
    }

    #[test]
    fn rank_candidates_matches_brute_force() {
        let phibar = vec![
            vec![0.9, 0.1],
            vec![0.8, 0.2],
            vec![0.1, 0.9],
            vec![0.5, 0.5],
        ];
        let model = toy_model(phibar.clone(), vec![2.0, 1.0], -0.3);
        let ranked = rank_candidates(&model, 0, &LinkSet::new(), 10).unwrap();
        // Brute-force oracle: score every pair directly and sort.
        let lm = &model.link_model;
        let mut want: Vec<(usize, f64)> = (1..4)
            .map(|v| (v, predict_link(&phibar[0], &phibar[v], lm).unwrap()))
            .collect();
        want.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let got: Vec<(usize, f64)> = ranked.iter().map(|p| (p.v, p.score)).collect();
        assert_eq!(got, want);
        assert_eq!(got.len(), 3);
    }

    #[test]
    fn rank_candidates_respects_exclusions_and_top_n() {
        let phibar = vec![vec![0.5, 0.5]; 4];
        let model = toy_model(phibar, vec![0.0, 0.0], 0.0);
        let all = LinkSet::from_pairs([(0, 1), (0, 2), (0, 3)]).unwrap();
        assert!(rank_candidates(&model, 0, &all, 10).unwrap().is_empty());
        let some = LinkSet::from_pairs([(0, 2)]).unwrap();
        let got = rank_candidates(&model, 0, &some, 1).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].v, 1); // tie on score, lowest id wins
        assert!(rank_candidates(&model, 9, &LinkSet::new(), 1).is_err());
    }

    #[test]
    fn probability_clamps_at_one() {
        let p = PairScore { u: 0, v: 1, score: 3.7 };
        assert_eq!(p.probability(), 1.0);
        let p = PairScore { u: 0, v: 1, score: 0.25 };
        assert_eq!(p.probability(), 0.25);
    }
}
