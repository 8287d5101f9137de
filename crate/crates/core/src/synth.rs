//! Planted-truth generators and recovery metrics.

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::features::CountMatrix;
use crate::scaler::{mean_sd, ScalingResult};

const MAX_RESAMPLES: usize = 10;

/// Planted parameters of a Poisson scaling matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_docs: usize,
    pub n_features: usize,
    pub expected_row_total: u64,
    pub theta_star: Vec<f64>,
    pub beta_star: Vec<f64>,
    pub psi_star: Vec<f64>,
    pub alpha_star: Vec<f64>,
    pub seed: u64,
}

impl SyntheticSpec {
    /// θ* ~ N(0, 1) then z-scored, β* ~ N(0, beta_sd²), ψ* ~ N(0, psi_sd²),
    /// α* chosen so every document's expected total is `expected_row_total`.
    pub fn draw(
        n_docs: usize,
        n_features: usize,
        expected_row_total: u64,
        beta_sd: f64,
        psi_sd: f64,
        seed: u64,
    ) -> Result<Self> {
        if n_docs < 2 || n_features < 2 || expected_row_total == 0 {
            return Err(Error::Config(format!(
                "synthetic spec needs ≥ 2 documents, ≥ 2 features and a positive row total \
                 (got {n_docs}×{n_features}, total {expected_row_total})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..n_docs).map(|_| rng.sample(StandardNormal)).collect();
        let (m, s) = mean_sd(&raw);
        let theta_star: Vec<f64> = raw.iter().map(|t| (t - m) / s).collect();
        let beta_dist = Normal::new(0.0, beta_sd).map_err(|e| Error::Config(e.to_string()))?;
        let psi_dist = Normal::new(0.0, psi_sd).map_err(|e| Error::Config(e.to_string()))?;
        let beta_star: Vec<f64> = (0..n_features).map(|_| beta_dist.sample(&mut rng)).collect();
        let psi_star: Vec<f64> = (0..n_features).map(|_| psi_dist.sample(&mut rng)).collect();
        let mut spec = SyntheticSpec {
            n_docs,
            n_features,
            expected_row_total,
            theta_star,
            beta_star,
            psi_star,
            alpha_star: vec![0.0; n_docs],
            seed,
        };
        spec.calibrate_alpha();
        Ok(spec)
    }

    /// Recomputes α* so each row's expected total equals `expected_row_total`.
    pub fn calibrate_alpha(&mut self) {
        let total = self.expected_row_total as f64;
        self.alpha_star = (0..self.n_docs)
            .map(|i| {
                let mass: f64 = (0..self.n_features)
                    .map(|j| (self.psi_star[j] + self.theta_star[i] * self.beta_star[j]).exp())
                    .sum();
                (total / mass).ln()
            })
            .collect();
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.theta_star.len() == self.n_docs
            && self.alpha_star.len() == self.n_docs
            && self.beta_star.len() == self.n_features
            && self.psi_star.len() == self.n_features;
        if !ok {
            return Err(Error::Dimension("synthetic spec vectors do not match its dimensions".into()));
        }
        if self.n_docs < 2 || self.n_features < 2 {
            return Err(Error::Config("synthetic spec needs ≥ 2 documents and ≥ 2 features".into()));
        }
        Ok(())
    }

    pub fn rate(&self, doc: usize, feature: usize) -> f64 {
        (self.alpha_star[doc] + self.psi_star[feature] + self.theta_star[doc] * self.beta_star[feature]).exp()
    }
}

/// Draws `y_ij ~ Poisson(exp(α*_i + ψ*_j + θ*_i β*_j))`. A draw containing an
/// all-zero row or column is redrawn, at most ten times.
pub fn generate_matrix(spec: &SyntheticSpec) -> Result<CountMatrix> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5eed_0f_c0_u64);
    let dists: Vec<Poisson<f64>> = (0..spec.n_docs)
        .flat_map(|i| (0..spec.n_features).map(move |j| (i, j)))
        .map(|(i, j)| Poisson::new(spec.rate(i, j)).map_err(|e| Error::Config(format!("rate: {e}"))))
        .collect::<Result<_>>()?;
    for _ in 0..=MAX_RESAMPLES {
        let dense: Vec<Vec<u64>> = (0..spec.n_docs)
            .map(|i| {
                (0..spec.n_features)
                    .map(|j| dists[i * spec.n_features + j].sample(&mut rng) as u64)
                    .collect()
            })
            .collect();
        let m = CountMatrix::from_dense(
            (0..spec.n_docs).map(|i| format!("doc{i:03}")).collect(),
            (0..spec.n_features).map(|j| format!("feat{j:03}")).collect(),
            &dense,
        )?;
        if m.row_sums().iter().all(|&s| s > 0) && m.col_sums().iter().all(|&s| s > 0) {
            return Ok(m);
        }
    }
    Err(Error::Degenerate(format!(
        "all-zero row or column after {MAX_RESAMPLES} resamples"
    )))
}

/// One planted word community.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedCommunity {
    pub words: Vec<String>,
    /// Baseline log usage.
    pub psi: f64,
    /// Log usage slope in θ.
    pub beta: f64,
    /// Zipf exponent of within-community word choice (0 = uniform).
    pub skew: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub n_docs: usize,
    /// Planted positions; drawn like [`SyntheticSpec::draw`] when `None`.
    pub theta: Option<Vec<f64>>,
    pub communities: Vec<PlantedCommunity>,
    /// Mean number of phrases per document (Poisson).
    pub phrases_per_doc: f64,
    /// Words per phrase; consecutive words differ.
    pub phrase_len: usize,
    /// Mean number of filler words between phrases (Poisson).
    pub noise_rate: f64,
    pub noise_words: Vec<String>,
    /// Log-normal sd of per-document filler word preferences; they do not
    /// depend on θ.
    pub noise_dispersion: f64,
    pub seed: u64,
}

impl CorpusSpec {
    /// Two disjoint, oppositely polarized communities of `words_per_community`
    /// words each, in speech-length documents padded with filler words whose
    /// per-document usage varies independently of θ.
    pub fn two_communities(n_docs: usize, words_per_community: usize, seed: u64) -> Self {
        let make = |prefix: &str, beta: f64| PlantedCommunity {
            words: (0..words_per_community).map(|k| format!("{prefix}{}", word_stem(k))).collect(),
            psi: 0.0,
            beta,
            skew: 1.0,
        };
        CorpusSpec {
            n_docs,
            theta: None,
            communities: vec![make("left", -0.5), make("right", 0.5)],
            phrases_per_doc: 150.0,
            phrase_len: 4,
            noise_rate: 3.0,
            noise_words: filler_words(1000),
            noise_dispersion: 1.5,
            seed,
        }
    }

    /// Many communities plus a shared community with β = 0.
    pub fn many_communities(n_docs: usize, polarized: usize, words_per_community: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0_33_u64);
        let mut communities: Vec<PlantedCommunity> = (0..polarized)
            .map(|c| PlantedCommunity {
                words: (0..words_per_community)
                    .map(|k| format!("t{}{}", word_stem(c), word_stem(k)))
                    .collect(),
                psi: rng.random_range(-0.5..0.5),
                beta: rng.random_range(-1.0..1.0),
                skew: 1.0,
            })
            .collect();
        communities.push(PlantedCommunity {
            words: (0..words_per_community).map(|k| format!("shared{}", word_stem(k))).collect(),
            psi: 0.5,
            beta: 0.0,
            skew: 1.0,
        });
        CorpusSpec {
            n_docs,
            theta: None,
            communities,
            phrases_per_doc: 60.0,
            phrase_len: 4,
            noise_rate: 0.3,
            noise_words: filler_words(50),
            noise_dispersion: 0.0,
            seed,
        }
    }
}

/// `n` distinct filler words.
pub fn filler_words(n: usize) -> Vec<String> {
    (0..n).map(|k| format!("filler{}", word_stem(k))).collect()
}

/// Letter-only suffixes "a", "b", …, "z", "ba", … so tokens never look numeric.
fn word_stem(mut k: usize) -> String {
    let mut out = Vec::new();
    loop {
        out.push(b'a' + (k % 26) as u8);
        k /= 26;
        if k == 0 {
            break;
        }
    }
    out.reverse();
    String::from_utf8(out).unwrap()
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    /// Tokenized corpus (text is the tokens joined by spaces, phrases end with ".").
    pub corpus: Corpus,
    pub theta_star: Vec<f64>,
    pub planted: Vec<Vec<String>>,
}

/// Samples documents as runs of phrases. Each phrase comes from one planted
/// community, chosen with probability ∝ exp(ψ_c + θ_i β_c), and strings its
/// member words together, so members co-occur as adjacent bigrams.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<SyntheticCorpus> {
    if spec.n_docs == 0 {
        return Err(Error::EmptyCorpus);
    }
    if spec.communities.len() < 2 {
        return Err(Error::Config("need at least two planted communities".into()));
    }
    if spec.communities.iter().any(|c| c.words.len() < 2) {
        return Err(Error::Config("every planted community needs ≥ 2 words".into()));
    }
    if spec.phrase_len < 2 || !(spec.phrases_per_doc > 0.0) {
        return Err(Error::Config("phrases need ≥ 2 words and a positive rate".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let theta = match &spec.theta {
        Some(t) if t.len() == spec.n_docs => t.clone(),
        Some(t) => {
            return Err(Error::Dimension(format!("{} positions for {} documents", t.len(), spec.n_docs)))
        }
        None => {
            let raw: Vec<f64> = (0..spec.n_docs).map(|_| rng.sample(StandardNormal)).collect();
            if spec.n_docs > 1 {
                let (m, s) = mean_sd(&raw);
                raw.iter().map(|t| (t - m) / s).collect()
            } else {
                vec![0.0]
            }
        }
    };
    let word_weights: Vec<Vec<f64>> = spec
        .communities
        .iter()
        .map(|c| (0..c.words.len()).map(|k| 1.0 / ((k + 1) as f64).powf(c.skew)).collect())
        .collect();
    let phrase_count = Poisson::new(spec.phrases_per_doc).map_err(|e| Error::Config(e.to_string()))?;
    let noise_count = if spec.noise_words.is_empty() || !(spec.noise_rate > 0.0) {
        None
    } else {
        Some(Poisson::new(spec.noise_rate).map_err(|e| Error::Config(e.to_string()))?)
    };
    if !(spec.noise_dispersion >= 0.0) {
        return Err(Error::Config("noise_dispersion must be ≥ 0".into()));
    }

    let mut docs = Vec::with_capacity(spec.n_docs);
    for (i, &t) in theta.iter().enumerate() {
        let usage: Vec<f64> = spec.communities.iter().map(|c| (c.psi + t * c.beta).exp()).collect();
        let pick_community = WeightedIndex::new(&usage).map_err(|e| Error::Config(e.to_string()))?;
        let n_phrases = (phrase_count.sample(&mut rng) as usize).max(1);
        let pick_noise = match noise_count {
            Some(_) => {
                let w: Vec<f64> = (0..spec.noise_words.len())
                    .map(|_| (spec.noise_dispersion * rng.sample::<f64, _>(StandardNormal)).exp())
                    .collect();
                Some(WeightedIndex::new(&w).map_err(|e| Error::Config(e.to_string()))?)
            }
            None => None,
        };
        let mut tokens: Vec<String> = Vec::new();
        let mut text = String::new();
        let mut last: Option<(usize, usize)> = None;
        for _ in 0..n_phrases {
            if let (Some(count), Some(pick)) = (&noise_count, &pick_noise) {
                let k = count.sample(&mut rng) as usize;
                let mut prev_noise = None;
                for _ in 0..k {
                    let idx = pick.sample(&mut rng);
                    if prev_noise == Some(idx) {
                        continue;
                    }
                    let w = &spec.noise_words[idx];
                    tokens.push(w.clone());
                    text.push_str(w);
                    text.push(' ');
                    prev_noise = Some(idx);
                    last = None;
                }
            }
            let c = pick_community.sample(&mut rng);
            let words = &spec.communities[c].words;
            let weights = &word_weights[c];
            let mut previous = last.filter(|&(lc, _)| lc == c).map(|(_, w)| w);
            for k in 0..spec.phrase_len {
                let mut w = weights.clone();
                if let Some(p) = previous {
                    w[p] = 0.0;
                }
                let next = WeightedIndex::new(&w).map_err(|e| Error::Config(e.to_string()))?.sample(&mut rng);
                tokens.push(words[next].clone());
                text.push_str(&words[next]);
                text.push_str(if k + 1 == spec.phrase_len { ". " } else { " " });
                previous = Some(next);
            }
            last = previous.map(|w| (c, w));
        }
        docs.push(Document {
            id: format!("doc{i:03}"),
            metadata: [("index".to_string(), i.to_string())].into_iter().collect(),
            text: text.trim_end().to_string(),
            tokens,
            sentence_starts: Vec::new(),
        });
    }
    Ok(SyntheticCorpus {
        corpus: Corpus::new(docs)?,
        theta_star: theta,
        planted: spec
            .communities
            .iter()
            .map(|c| {
                let mut w = c.words.clone();
                w.sort();
                w
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    /// Pearson correlation after sign alignment (so never negative).
    pub pearson: f64,
    pub spearman: f64,
    /// Root mean squared error of θ* regressed on θ̂.
    pub rmse: f64,
    /// Share of documents whose interval covers the aligned θ*.
    pub coverage: Option<f64>,
    /// Whether θ̂ had to be negated to match θ*.
    pub flipped: bool,
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, _) = mean_sd(a);
    let (mb, _) = mean_sd(b);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// Ranks with ties given their average rank.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut k = 0;
    while k < idx.len() {
        let mut end = k;
        while end + 1 < idx.len() && x[idx[end + 1]] == x[idx[k]] {
            end += 1;
        }
        let avg = (k + end) as f64 / 2.0 + 1.0;
        for &i in &idx[k..=end] {
            out[i] = avg;
        }
        k = end + 1;
    }
    out
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&ranks(a), &ranks(b))
}

/// Compares estimated positions with the planted ones.
pub fn recovery_report(theta_star: &[f64], estimate: &[f64], intervals: Option<(&[f64], &[f64])>) -> Result<RecoveryMetrics> {
    if theta_star.len() != estimate.len() || theta_star.len() < 2 {
        return Err(Error::Dimension(format!(
            "{} planted positions vs {} estimates",
            theta_star.len(),
            estimate.len()
        )));
    }
    let raw = pearson(estimate, theta_star);
    let flipped = raw < 0.0;
    let sign = if flipped { -1.0 } else { 1.0 };
    let aligned: Vec<f64> = estimate.iter().map(|t| sign * t).collect();

    let (mx, _) = mean_sd(&aligned);
    let (my, _) = mean_sd(theta_star);
    let sxy: f64 = aligned.iter().zip(theta_star).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = aligned.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let rmse = (aligned
        .iter()
        .zip(theta_star)
        .map(|(x, y)| (y - (my + slope * (x - mx))).powi(2))
        .sum::<f64>()
        / aligned.len() as f64)
        .sqrt();

    let coverage = intervals.map(|(low, high)| {
        let hits = (0..theta_star.len())
            .filter(|&i| {
                let (lo, hi) = if flipped { (-high[i], -low[i]) } else { (low[i], high[i]) };
                lo <= theta_star[i] && theta_star[i] <= hi
            })
            .count();
        hits as f64 / theta_star.len() as f64
    });

    Ok(RecoveryMetrics {
        pearson: raw.abs(),
        spearman: sign * spearman(estimate, theta_star),
        rmse,
        coverage,
        flipped,
    })
}

/// Recovery of a fitted result, using its intervals when present.
pub fn result_recovery(theta_star: &[f64], result: &ScalingResult) -> Result<RecoveryMetrics> {
    let intervals = match (&result.theta_ci_low, &result.theta_ci_high) {
        (Some(l), Some(h)) => Some((l.as_slice(), h.as_slice())),
        _ => None,
    };
    recovery_report(theta_star, &result.params.theta, intervals)
}
