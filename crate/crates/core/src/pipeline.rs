//! Corpus → bigram graph → communities → features → scaling.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::{count_bigrams, Corpus};
use crate::error::{Error, Result};
use crate::features::{community_dtm, unigram_dtm, CountMatrix, DtmConvention, TrimReport};
use crate::graph::{cluster, ClusterConfig, Clustering, ClusteringMethod, CommunitySet, WordGraph};
use crate::scaler::{analytic_se, bootstrap, fit, FitConfig, ScalingResult, UncertaintyMethod};
use crate::synth::spearman;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Minimum bigram count π.
    pub min_bigram_count: u64,
    /// Keep bigrams with count > π instead of ≥ π.
    pub strict_greater: bool,
    pub clustering: ClusteringMethod,
    pub min_community_size: usize,
    pub dtm_convention: DtmConvention,
    /// Minimum corpus frequency of unigram features.
    pub unigram_min_count: u64,
    pub fit: FitConfig,
    /// `None` skips uncertainty.
    pub uncertainty: Option<UncertaintyMethod>,
    pub bootstrap_replicates: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            min_bigram_count: 30,
            strict_greater: false,
            clustering: ClusteringMethod::Louvain,
            min_community_size: 2,
            dtm_convention: DtmConvention::MemberCount,
            unigram_min_count: 1,
            fit: FitConfig::default(),
            uncertainty: Some(UncertaintyMethod::Bootstrap),
            bootstrap_replicates: 200,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_bigram_count == 0 {
            return Err(Error::Config("min_bigram_count must be ≥ 1".into()));
        }
        if self.min_community_size == 0 {
            return Err(Error::Config("min_community_size must be ≥ 1".into()));
        }
        if self.uncertainty == Some(UncertaintyMethod::Bootstrap) && self.bootstrap_replicates == 0 {
            return Err(Error::Config("bootstrap_replicates must be ≥ 1".into()));
        }
        self.fit.validate()
    }
}

#[derive(Debug, Clone)]
pub struct CommunityStage {
    pub bigram_types: usize,
    pub graph: WordGraph,
    pub clustering: Clustering,
    pub communities: CommunitySet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub bigram_types: usize,
    pub nodes: usize,
    pub edges: usize,
    pub total_weight: f64,
    pub communities: usize,
    pub community_sizes: Vec<usize>,
    pub dropped_words: usize,
    pub modularity: f64,
    pub levels: usize,
}

impl CommunityStage {
    pub fn stats(&self) -> GraphStats {
        GraphStats {
            bigram_types: self.bigram_types,
            nodes: self.graph.node_count(),
            edges: self.graph.edge_count(),
            total_weight: self.graph.total_weight(),
            communities: self.communities.len(),
            community_sizes: self.communities.communities.iter().map(|c| c.words.len()).collect(),
            dropped_words: self.communities.dropped_words.len(),
            modularity: self.clustering.modularity,
            levels: self.clustering.levels,
        }
    }
}

pub fn detect_communities(corpus: &Corpus, config: &PipelineConfig) -> Result<CommunityStage> {
    config.validate()?;
    let counts = count_bigrams(corpus);
    let bigram_types = counts.len();
    let kept = counts.filter(config.min_bigram_count, config.strict_greater)?;
    let graph = WordGraph::from_bigrams(&kept)?;
    let clustering = cluster(&graph, config.clustering, ClusterConfig::seeded(config.seed))?;
    let communities = clustering.partition.communities(&graph, config.min_community_size);
    if communities.is_empty() {
        return Err(Error::NoCommunities);
    }
    log::info!(
        "{} words, {} edges, {} communities (Q = {:.4})",
        graph.node_count(),
        graph.edge_count(),
        communities.len(),
        clustering.modularity
    );
    Ok(CommunityStage {
        bigram_types,
        graph,
        clustering,
        communities,
    })
}

#[derive(Debug, Clone)]
pub struct ScalingRun {
    pub matrix: CountMatrix,
    pub trim: TrimReport,
    pub result: ScalingResult,
}

/// Fits the scaling model and attaches the configured uncertainty.
pub fn scale_matrix(matrix: CountMatrix, trim: TrimReport, config: &PipelineConfig) -> Result<ScalingRun> {
    let start = Instant::now();
    let mut fit_config = config.fit.clone();
    fit_config.seed = config.seed;
    let mut result = fit(&matrix, &fit_config)?;
    result = match config.uncertainty {
        Some(UncertaintyMethod::Bootstrap) => bootstrap(&matrix, &result, config.bootstrap_replicates, config.seed)?,
        Some(UncertaintyMethod::Analytic) => analytic_se(&matrix, &result)?,
        None => result,
    };
    result.runtime_secs = start.elapsed().as_secs_f64();
    Ok(ScalingRun { matrix, trim, result })
}

pub fn scale_communities(corpus: &Corpus, config: &PipelineConfig) -> Result<(CommunityStage, ScalingRun)> {
    let stage = detect_communities(corpus, config)?;
    let (matrix, trim) = community_dtm(corpus, &stage.communities, config.dtm_convention)?;
    let run = scale_matrix(matrix, trim, config)?;
    Ok((stage, run))
}

pub fn scale_unigrams(corpus: &Corpus, config: &PipelineConfig) -> Result<ScalingRun> {
    config.validate()?;
    let (matrix, trim) = unigram_dtm(corpus, config.unigram_min_count)?;
    scale_matrix(matrix, trim, config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchReport {
    pub features: usize,
    pub documents: usize,
    pub dropped_documents: Vec<String>,
    pub converged: bool,
    pub iterations: usize,
    pub loglik: f64,
    pub dispersion: f64,
    pub runtime_secs: f64,
}

impl BranchReport {
    fn new(run: &ScalingRun, runtime_secs: f64) -> Self {
        BranchReport {
            features: run.matrix.n_features(),
            documents: run.matrix.n_docs(),
            dropped_documents: run.trim.dropped_docs.clone(),
            converged: run.result.converged,
            iterations: run.result.iterations,
            loglik: run.result.final_loglik(),
            dispersion: run.result.dispersion,
            runtime_secs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub doc_id: String,
    pub theta_community: Option<f64>,
    pub theta_unigram: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub documents: usize,
    pub vocabulary_size: usize,
    pub communities: Option<usize>,
    pub community: Option<BranchReport>,
    pub unigram: Option<BranchReport>,
    /// Spearman correlation of the two θ̂ over documents present in both.
    pub rank_correlation: Option<f64>,
    /// Error message per failed branch.
    pub errors: BTreeMap<String, String>,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn theta_community(&self) -> Option<Vec<Option<f64>>> {
        self.community.as_ref()?;
        Some(self.rows.iter().map(|r| r.theta_community).collect())
    }

    pub fn theta_unigram(&self) -> Option<Vec<Option<f64>>> {
        self.unigram.as_ref()?;
        Some(self.rows.iter().map(|r| r.theta_unigram).collect())
    }

    /// `doc_id,theta_community,theta_unigram`; a document missing from a
    /// branch has an empty cell.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["doc_id", "theta_community", "theta_unigram"])?;
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([r.doc_id.clone(), cell(r.theta_community), cell(r.theta_unigram)])?;
        }
        w.flush().map_err(|e| Error::io("<comparison>", e))?;
        Ok(())
    }
}

/// Runs the community and unigram branches on the same corpus. A failing
/// branch is recorded in `errors`; only when both fail is an error returned.
pub fn compare_models(corpus: &Corpus, config: &PipelineConfig) -> Result<(ComparisonReport, Option<ScalingRun>, Option<ScalingRun>)> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    config.validate()?;
    let mut errors = BTreeMap::new();

    let started = Instant::now();
    let community = match scale_communities(corpus, config) {
        Ok((stage, run)) => Some((stage.communities.len(), run, started.elapsed().as_secs_f64())),
        Err(e) => {
            log::warn!("community branch failed: {e}");
            errors.insert("community".to_string(), e.to_string());
            None
        }
    };
    let started = Instant::now();
    let unigram = match scale_unigrams(corpus, config) {
        Ok(run) => Some((run, started.elapsed().as_secs_f64())),
        Err(e) => {
            log::warn!("unigram branch failed: {e}");
            errors.insert("unigram".to_string(), e.to_string());
            None
        }
    };
    if let (None, None) = (&community, &unigram) {
        let mut errs = errors.into_values();
        return Err(Error::Degenerate(format!(
            "both branches failed: {}; {}",
            errs.next().unwrap_or_default(),
            errs.next().unwrap_or_default()
        )));
    }

    let lookup = |run: &ScalingRun, id: &str| {
        run.result.doc_ids.iter().position(|d| d == id).map(|k| run.result.params.theta[k])
    };
    let rows: Vec<ComparisonRow> = corpus
        .documents()
        .iter()
        .map(|d| ComparisonRow {
            doc_id: d.id.clone(),
            theta_community: community.as_ref().and_then(|(_, run, _)| lookup(run, &d.id)),
            theta_unigram: unigram.as_ref().and_then(|(run, _)| lookup(run, &d.id)),
        })
        .collect();
    let (a, b): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| Some((r.theta_community?, r.theta_unigram?)))
        .unzip();
    let rank_correlation = (a.len() > 1).then(|| spearman(&a, &b)).filter(|r| r.is_finite());

    let report = ComparisonReport {
        documents: corpus.len(),
        vocabulary_size: corpus.vocabulary().len(),
        communities: community.as_ref().map(|(k, _, _)| *k),
        community: community.as_ref().map(|(_, run, t)| BranchReport::new(run, *t)),
        unigram: unigram.as_ref().map(|(run, t)| BranchReport::new(run, *t)),
        rank_correlation,
        errors,
        rows,
    };
    Ok((report, community.map(|(_, run, _)| run), unigram.map(|(run, _)| run)))
}
