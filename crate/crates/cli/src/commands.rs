use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use communityfish::corpus::{load_corpus, read_stopwords, Corpus, LemmaTable, Tokenizer, TokenizerConfig};
use communityfish::features::community_dtm;
use communityfish::pipeline::{compare_models, detect_communities, scale_matrix, scale_unigrams, CommunityStage, ScalingRun};
use communityfish::scaler::{bootstrap, fit, FitConfig, ScalingResult};
use communityfish::synth::{generate_corpus, generate_matrix, result_recovery, CorpusSpec, RecoveryMetrics, SyntheticSpec};
use communityfish::{Error, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{RunConfig, SimulationKind, SimulationSpec};

/// What a command reports back for the manifest.
#[derive(Debug, Default)]
pub struct Outcome {
    pub communities: Option<usize>,
    pub matrix: Option<(usize, usize)>,
    pub extra_matrices: BTreeMap<String, (usize, usize)>,
    pub outputs: Vec<String>,
}

impl Outcome {
    fn wrote(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    Ok(BufWriter::new(file))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn load(cfg: &RunConfig) -> Result<Corpus> {
    let input = cfg.input()?;
    let format = cfg.input_format()?;
    let mut corpus = load_corpus(input, format)?;
    let stopwords = match &cfg.stopwords {
        Some(p) => read_stopwords(p)?,
        None => Default::default(),
    };
    let tokenizer = Tokenizer::new(TokenizerConfig {
        lowercase: cfg.lowercase,
        keep_digits: cfg.keep_digits,
        stopwords,
        sentence_pattern: cfg.sentence_pattern.clone(),
    })?;
    corpus.tokenize(&tokenizer);
    if let Some(p) = &cfg.lemmas {
        corpus.apply_lemmas(&LemmaTable::from_path(p)?);
    }
    log::info!(
        "loaded {} documents, {} word types from {}",
        corpus.len(),
        corpus.vocabulary().len(),
        input.display()
    );
    Ok(corpus)
}

fn write_communities(stage: &CommunityStage, out: &Path, outcome: &mut Outcome) -> Result<()> {
    stage.communities.write_csv(create(out, "communities.csv")?)?;
    outcome.wrote("communities.csv");
    write_json(out, "graph_stats.json", &stage.stats())?;
    outcome.wrote("graph_stats.json");
    outcome.communities = Some(stage.communities.len());
    Ok(())
}

pub fn communities(cfg: &RunConfig, outcome: &mut Outcome) -> Result<()> {
    let corpus = load(cfg)?;
    let stage = detect_communities(&corpus, &cfg.pipeline)?;
    write_communities(&stage, &cfg.out, outcome)
}

fn metadata(corpus: &Corpus) -> BTreeMap<String, BTreeMap<String, String>> {
    corpus
        .documents()
        .iter()
        .map(|d| (d.id.clone(), d.metadata.clone()))
        .collect()
}

fn fit_report(run: &ScalingRun, features: &str) -> Value {
    let r = &run.result;
    json!({
        "features": features,
        "documents": run.matrix.n_docs(),
        "n_features": run.matrix.n_features(),
        "dropped_documents": run.trim.dropped_docs,
        "dropped_features": run.trim.dropped_features,
        "converged": r.converged,
        "iterations": r.iterations,
        "loglik": r.final_loglik(),
        "loglik_trace": r.loglik_trace,
        "dispersion": r.dispersion,
        "clamped_cells": r.clamped_cells,
        "uncertainty": r.uncertainty,
        "fit": r.config,
        "runtime_secs": r.runtime_secs,
    })
}

pub fn scale(cfg: &RunConfig, baseline: bool, outcome: &mut Outcome) -> Result<()> {
    let corpus = load(cfg)?;
    let run = if baseline {
        scale_unigrams(&corpus, &cfg.pipeline)?
    } else {
        let stage = detect_communities(&corpus, &cfg.pipeline)?;
        write_communities(&stage, &cfg.out, outcome)?;
        let (matrix, trim) = community_dtm(&corpus, &stage.communities, cfg.pipeline.dtm_convention)?;
        outcome.matrix = Some((matrix.n_docs(), matrix.n_features()));
        scale_matrix(matrix, trim, &cfg.pipeline)?
    };
    outcome.matrix = Some((run.matrix.n_docs(), run.matrix.n_features()));
    if !run.result.converged {
        log::warn!("fit stopped after {} rounds without converging", run.result.iterations);
    }
    log::info!("fit finished in {:.2}s", run.result.runtime_secs);

    let out = &cfg.out;
    run.result
        .write_positions(create(out, "positions.csv")?, &metadata(&corpus), &corpus.metadata_keys())?;
    outcome.wrote("positions.csv");
    run.result.write_features(create(out, "features.csv")?)?;
    outcome.wrote("features.csv");
    let kind = if baseline { "unigram" } else { "community" };
    write_json(out, "fit_report.json", &fit_report(&run, kind))?;
    outcome.wrote("fit_report.json");
    Ok(())
}

pub fn compare(cfg: &RunConfig, outcome: &mut Outcome) -> Result<()> {
    let corpus = load(cfg)?;
    let (report, community, unigram) = compare_models(&corpus, &cfg.pipeline)?;
    outcome.communities = report.communities;
    if let Some(run) = &community {
        outcome.matrix = Some((run.matrix.n_docs(), run.matrix.n_features()));
    }
    if let Some(run) = &unigram {
        outcome
            .extra_matrices
            .insert("unigram".into(), (run.matrix.n_docs(), run.matrix.n_features()));
    }
    for (branch, err) in &report.errors {
        log::warn!("{branch} branch failed: {err}");
    }
    if let Some(rho) = report.rank_correlation {
        log::info!("rank correlation between branches: {rho:.3}");
    }
    report.write_csv(create(&cfg.out, "comparison.csv")?)?;
    outcome.wrote("comparison.csv");
    write_json(&cfg.out, "report.json", &report)?;
    outcome.wrote("report.json");
    Ok(())
}

#[derive(Debug, Serialize)]
struct Replication {
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    recovery: Option<RecoveryMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    community: Option<RecoveryMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    unigram: Option<RecoveryMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    communities: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_partition: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn simulate_matrix(spec: &SimulationSpec, seed: u64) -> Result<Replication> {
    let planted = SyntheticSpec::draw(spec.docs, spec.features, spec.row_total, spec.beta_sd, spec.psi_sd, seed)?;
    let matrix = generate_matrix(&planted)?;
    let config = FitConfig {
        seed,
        ..FitConfig::default()
    };
    let mut result: ScalingResult = fit(&matrix, &config)?;
    if spec.bootstrap > 0 {
        result = bootstrap(&matrix, &result, spec.bootstrap, seed)?;
    }
    Ok(Replication {
        seed,
        recovery: Some(result_recovery(&planted.theta_star, &result)?),
        community: None,
        unigram: None,
        communities: None,
        exact_partition: None,
        error: None,
    })
}

fn simulate_corpus(spec: &SimulationSpec, cfg: &RunConfig, seed: u64) -> Result<Replication> {
    let generated = generate_corpus(&CorpusSpec::two_communities(spec.docs, spec.words_per_community, seed))?;
    let mut pipeline = cfg.pipeline.clone();
    pipeline.min_bigram_count = spec.min_bigram_count;
    pipeline.seed = seed;
    pipeline.uncertainty = (spec.bootstrap > 0).then_some(communityfish::scaler::UncertaintyMethod::Bootstrap);
    pipeline.bootstrap_replicates = spec.bootstrap.max(1);
    let stage = detect_communities(&generated.corpus, &pipeline)?;
    let mut found: Vec<Vec<String>> = stage.communities.communities.iter().map(|c| c.words.clone()).collect();
    found.sort();
    let mut planted = generated.planted.clone();
    planted.sort();
    let (_, community, unigram) = compare_models(&generated.corpus, &pipeline)?;
    let metrics = |run: Option<ScalingRun>| -> Result<Option<RecoveryMetrics>> {
        match run {
            Some(run) => {
                let theta: Vec<f64> = run
                    .result
                    .doc_ids
                    .iter()
                    .map(|id| generated.theta_star[generated.corpus.position(id).expect("known document")])
                    .collect();
                Ok(Some(result_recovery(&theta, &run.result)?))
            }
            None => Ok(None),
        }
    };
    Ok(Replication {
        seed,
        recovery: None,
        community: metrics(community)?,
        unigram: metrics(unigram)?,
        communities: Some(stage.communities.len()),
        exact_partition: Some(found == planted),
        error: None,
    })
}

fn summary(values: &[f64]) -> Value {
    if values.is_empty() {
        return Value::Null;
    }
    let n = values.len() as f64;
    json!({
        "mean": values.iter().sum::<f64>() / n,
        "min": values.iter().cloned().fold(f64::INFINITY, f64::min),
        "max": values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    })
}

pub fn simulate(spec: &SimulationSpec, cfg: &RunConfig, outcome: &mut Outcome) -> Result<()> {
    if spec.replications == 0 {
        return Err(Error::Config("replications must be ≥ 1".into()));
    }
    let mut reps = Vec::with_capacity(spec.replications);
    for r in 0..spec.replications {
        let seed = spec.seed + r as u64;
        let rep = match spec.kind {
            SimulationKind::Matrix => simulate_matrix(spec, seed),
            SimulationKind::Corpus => simulate_corpus(spec, cfg, seed),
        };
        reps.push(rep.unwrap_or_else(|e| {
            log::warn!("replication {r} (seed {seed}) failed: {e}");
            Replication {
                seed,
                recovery: None,
                community: None,
                unigram: None,
                communities: None,
                exact_partition: None,
                error: Some(e.to_string()),
            }
        }));
    }
    let failures = reps.iter().filter(|r| r.error.is_some()).count();
    if failures == reps.len() {
        return Err(Error::Degenerate(format!("all {failures} replications failed")));
    }

    let pick = |f: &dyn Fn(&Replication) -> Option<f64>| reps.iter().filter_map(f).collect::<Vec<f64>>();
    let summary_json = match spec.kind {
        SimulationKind::Matrix => {
            let rho = pick(&|r| r.recovery.as_ref().map(|m| m.pearson));
            let coverage = pick(&|r| r.recovery.as_ref().and_then(|m| m.coverage));
            log::info!(
                "worst |ρ| = {:.4} over {} replications",
                rho.iter().cloned().fold(f64::INFINITY, f64::min),
                rho.len()
            );
            json!({
                "pearson": summary(&rho),
                "coverage": summary(&coverage),
            })
        }
        SimulationKind::Corpus => {
            let wins = reps
                .iter()
                .filter(|r| match (&r.community, &r.unigram) {
                    (Some(c), Some(u)) => c.pearson >= u.pearson,
                    (Some(_), None) => true,
                    _ => false,
                })
                .count();
            let exact = reps.iter().filter(|r| r.exact_partition == Some(true)).count();
            json!({
                "community_pearson": summary(&pick(&|r| r.community.as_ref().map(|m| m.pearson))),
                "unigram_pearson": summary(&pick(&|r| r.unigram.as_ref().map(|m| m.pearson))),
                "community_wins": wins,
                "exact_partitions": exact,
            })
        }
    };
    let report = json!({
        "spec": spec,
        "replications": reps.len(),
        "failures": failures,
        "summary": summary_json,
        "results": reps,
    });
    write_json(&cfg.out, "report.json", &report)?;
    outcome.wrote("report.json");
    Ok(())
}

pub fn write_manifest(dir: &Path, manifest: &Value) -> Result<PathBuf> {
    write_json(dir, "manifest.json", manifest)?;
    Ok(dir.join("manifest.json"))
}
