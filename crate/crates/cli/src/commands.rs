//! Subcommand implementations. Data goes to stdout, diagnostics to stderr.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use grtm_core::{
    baseline_scores, evaluate, evaluation_universe, io, mathkit::gaussian_log_density,
    rank_candidates, sample_corpus, score_pairs, split_links, BaselineMethod, BaselineParams,
    Corpus64, CovKind, FitConfig64, FittedModel64, GenConfig64, Hyperparams64, InitStrategy,
    LinkSet,
};

use crate::config::Settings;
use crate::{EvalArgs, FitArgs, PredictArgs, SimulateArgs, TopicsArgs};

fn parse_cov(raw: &str) -> Result<CovKind> {
    match raw {
        "diag" => Ok(CovKind::Diagonal),
        "full" => Ok(CovKind::Full),
        other => bail!("--cov must be `diag` or `full`, got {other:?}"),
    }
}

fn parse_init(raw: &str) -> Result<InitStrategy> {
    match raw {
        "kmeans" => Ok(InitStrategy::KmeansPp),
        "random" => Ok(InitStrategy::RandomAssign),
        other => bail!("--init must be `kmeans` or `random`, got {other:?}"),
    }
}

fn parse_eta(raw: &str, k: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = raw
        .split(',')
        .map(|t| t.trim().parse().with_context(|| format!("invalid eta entry {t:?}")))
        .collect::<Result<_>>()?;
    if values.len() != k {
        bail!("--eta-true has {} entries but K = {k}", values.len());
    }
    Ok(values)
}

fn require_k(k: usize) -> Result<()> {
    if k == 0 {
        bail!("--k must be >= 1");
    }
    Ok(())
}

pub fn simulate(args: SimulateArgs, settings: &Settings) -> Result<()> {
    let users = settings.resolve(args.users, "users", 60)?;
    let images_min = settings.resolve(args.images_min, "images-min", 40)?;
    let images_max = settings.resolve(args.images_max, "images-max", images_min.max(40))?;
    let k = settings.resolve(args.k, "k", 5)?;
    require_k(k)?;
    let dim = settings.resolve(args.dim, "dim", 8)?;
    let alpha = settings.resolve(args.alpha, "alpha", 2.0)?;
    let separation = settings.resolve(args.separation, "separation", 10.0)?;
    let sigma = settings.resolve(args.sigma, "sigma", 1.0)?;
    let nu_true = settings.resolve(args.nu_true, "nu-true", -4.0)?;
    let seed = settings.resolve(args.seed, "seed", 0)?;
    let out_dir: PathBuf = settings.resolve_required(args.out_dir, "out-dir")?;
    let eta_true = match settings.resolve_opt(args.eta_true, "eta-true")? {
        Some(raw) => parse_eta(&raw, k)?,
        None => {
            // Favor links among users sharing the first half of the topics.
            let favored = k.div_ceil(2);
            (0..k).map(|t| if t < favored { 6.0 } else { 0.0 }).collect()
        }
    };

    let cfg = GenConfig64 {
        n_users: users,
        images_per_user: (images_min, images_max),
        k,
        feature_dim: dim,
        alpha,
        topic_mean_separation: separation,
        sigma,
        eta_true,
        nu_true,
        seed,
    };
    let (corpus, links, truth) = sample_corpus(&cfg)?;

    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    io::save_features(&corpus, &out_dir.join("features.bin"))?;
    io::save_links(&links, &out_dir.join("links.txt"))?;
    io::save_truth(&truth, &out_dir.join("truth.bin"))?;

    println!(
        "users={} images={} dim={} k={} links={} seed={} out={}",
        corpus.n_users(),
        corpus.total_images(),
        dim,
        k,
        links.len(),
        seed,
        out_dir.display()
    );
    Ok(())
}

pub fn fit(args: FitArgs, settings: &Settings) -> Result<()> {
    let features: PathBuf = settings.resolve_required(args.features, "features")?;
    let links_path: PathBuf = settings.resolve_required(args.links, "links")?;
    let model_path: PathBuf = settings.resolve_required(args.model, "model")?;
    let k = settings.resolve(args.k, "k", 100)?;
    require_k(k)?;
    let alpha = settings.resolve(args.alpha, "alpha", 2.0)?;
    let rho = settings.resolve(args.rho, "rho", 1.0)?;
    let cov = parse_cov(&settings.resolve(args.cov, "cov", "diag".to_string())?)?;
    let train_ratio = settings.resolve_opt(args.train_ratio, "train-ratio")?;
    let seed = settings.resolve(args.seed, "seed", 0)?;
    let max_iters = settings.resolve(args.max_iters, "max-iters", 500)?;
    let tol = settings.resolve(args.tol, "tol", 1e-5)?;
    let init = parse_init(&settings.resolve(args.init, "init", "kmeans".to_string())?)?;
    let log_every = settings.resolve(args.log_every, "log-every", 10)?;
    let omit_phi = settings.resolve_switch(args.omit_phi, "omit-phi")?;

    let corpus = io::load_features(&features)?;
    let all_links = io::load_links(&links_path)?;

    let train = match train_ratio {
        Some(ratio) => {
            let split = split_links(&all_links, ratio, seed)?;
            let split_path = match settings.resolve_opt(args.split_out, "split-out")? {
                Some(p) => p,
                None => {
                    let mut p = model_path.as_os_str().to_owned();
                    p.push(".split");
                    PathBuf::from(p)
                }
            };
            let mut out = String::new();
            for (u, v) in split.train.iter() {
                writeln!(out, "train {u} {v}").expect("string write");
            }
            for (u, v) in split.test.iter() {
                writeln!(out, "test {u} {v}").expect("string write");
            }
            io::write_atomic(&split_path, out.as_bytes())?;
            eprintln!(
                "[grtm] split {} links into {} train / {} test ({})",
                all_links.len(),
                split.train.len(),
                split.test.len(),
                split_path.display()
            );
            split.train
        }
        None => all_links,
    };

    let cfg = FitConfig64 {
        hyperparams: Hyperparams64 {
            alpha,
            k,
            rho,
            cov_kind: cov,
            max_iters,
            elbo_rel_tol: tol,
            seed,
        },
        init_strategy: init,
        log_every,
    };
    let model = grtm_core::fit(&corpus, &train, &cfg)?;
    io::save_model(&model, &model_path, !omit_phi)?;

    println!(
        "iterations={} elbo={} model={}",
        model.elbo_trace.len() - 1,
        model.elbo_trace.last().expect("trace is never empty"),
        model_path.display()
    );
    Ok(())
}

pub fn predict(args: PredictArgs, settings: &Settings) -> Result<()> {
    let model_path: PathBuf = settings.resolve_required(args.model, "model")?;
    let user = settings.resolve_required(args.user, "user")?;
    let top_n = settings.resolve(args.top_n, "top-n", 10)?;
    let exclude = match settings.resolve_opt(args.links, "links")? {
        Some(path) => io::load_links(&path)?,
        None => LinkSet::new(),
    };
    let model = io::load_model(&model_path)?;
    let ranked = rank_candidates(&model, user, &exclude, top_n)?;
    for (rank, candidate) in ranked.iter().enumerate() {
        println!("{} {} {}", rank + 1, candidate.v, candidate.score);
    }
    Ok(())
}

fn parse_method(raw: &str) -> Result<Option<BaselineMethod>> {
    match raw {
        "grtm" => Ok(None),
        "mean" => Ok(Some(BaselineMethod::Mean)),
        "boft" => Ok(Some(BaselineMethod::Boft)),
        other => bail!("--method must be `grtm`, `mean`, or `boft`, got {other:?}"),
    }
}

pub fn eval(args: EvalArgs, settings: &Settings) -> Result<()> {
    let links_path: PathBuf = settings.resolve_required(args.links, "links")?;
    let out_dir: PathBuf = settings.resolve_required(args.out_dir, "out-dir")?;
    let method = parse_method(&settings.resolve(args.method, "method", "grtm".to_string())?)?;
    let train_ratio = settings.resolve(args.train_ratio, "train-ratio", 0.6)?;
    let seed = settings.resolve(args.seed, "seed", 0)?;
    let model_path = settings.resolve_opt(args.model, "model")?;
    let features_path = settings.resolve_opt(args.features, "features")?;

    let links = io::load_links(&links_path)?;
    let split = split_links(&links, train_ratio, seed)?;

    let method_name;
    let n_users;
    let scores = match method {
        None => {
            let Some(model_path) = model_path else {
                bail!("--method grtm requires --model");
            };
            let model = io::load_model(&model_path)?;
            check_link_range(&links, model.n_users(), "model")?;
            n_users = model.n_users();
            method_name = "grtm";
            score_pairs(&model, evaluation_universe(n_users, &split.train))?
        }
        Some(baseline) => {
            let Some(features_path) = features_path else {
                bail!("baseline methods require --features");
            };
            let corpus = io::load_features(&features_path)?;
            check_link_range(&links, corpus.n_users(), "corpus")?;
            n_users = corpus.n_users();
            let k_c = match settings.resolve_opt(args.k, "k")? {
                Some(k) => k,
                None => default_kc(model_path.as_deref())?,
            };
            require_k(k_c)?;
            method_name = match baseline {
                BaselineMethod::Mean => "mean",
                BaselineMethod::Boft => "boft",
            };
            baseline_scores(&corpus, baseline, &BaselineParams { k_c, seed })?
        }
    };

    let report = evaluate(&scores, &split, n_users)?;
    io::export_report(&report, &out_dir)?;
    let p10 = &report.precision_at[0];
    println!(
        "method={} roc_auc={} pr_auc={} precision_at_0.10={} out={}",
        method_name,
        report.roc_auc,
        report.pr_auc,
        p10.precision,
        out_dir.display()
    );
    Ok(())
}

/// BoFT's cluster count falls back to the model's K when a model is at
/// hand, else to the paper-scale default of 100.
fn default_kc(model_path: Option<&Path>) -> Result<usize> {
    match model_path {
        Some(path) => Ok(io::load_model(path)?.k()),
        None => Ok(100),
    }
}

fn check_link_range(links: &LinkSet, n_users: usize, what: &str) -> Result<()> {
    if let Some(max) = links.max_user_id() {
        if max >= n_users {
            bail!("link file mentions user {max}, but the {what} has only {n_users} users");
        }
    }
    Ok(())
}

pub fn topics(args: TopicsArgs, settings: &Settings) -> Result<()> {
    let model_path: PathBuf = settings.resolve_required(args.model, "model")?;
    let features_path: PathBuf = settings.resolve_required(args.features, "features")?;
    let per_topic = settings.resolve(args.per_topic, "per-topic", 5)?;
    let model: FittedModel64 = io::load_model(&model_path)?;
    let corpus: Corpus64 = io::load_features(&features_path)?;
    if model.topic_params.feature_dim() != corpus.feature_dim {
        bail!(
            "model dimension {} does not match feature dimension {}",
            model.topic_params.feature_dim(),
            corpus.feature_dim
        );
    }

    for topic in 0..model.k() {
        let mean = &model.topic_params.means[topic];
        let cov = &model.topic_params.covariances[topic];
        let mut scored: Vec<(usize, usize, f64)> = Vec::with_capacity(corpus.total_images());
        for (u, user) in corpus.users.iter().enumerate() {
            for (n, image) in user.images.iter().enumerate() {
                let logp = gaussian_log_density(image, mean, cov)
                    .map_err(|e| anyhow::anyhow!("topic {topic}: {e}"))?;
                scored.push((u, n, logp));
            }
        }
        scored.sort_by(|a, b| {
            b.2.partial_cmp(&a.2)
                .expect("log densities are finite")
                .then(a.0.cmp(&b.0))
                .then(a.1.cmp(&b.1))
        });
        for &(u, n, logp) in scored.iter().take(per_topic) {
            println!("{topic} {u} {n} {logp}");
        }
    }
    Ok(())
}
