//! Post-processing of retained draws: region-association profiles of the
//! point-estimate clusters, posterior predictive samples, WAIC and
//! convergence diagnostics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{ClamrError, Result};
use crate::gibbs::{Draw, Draws};
use crate::model::{normal_ln_pdf, MrSpec};
use crate::partition::{point_estimate, rand_index, CandidateSet, Loss, Partition};

/// Region association of one point-estimate cluster on one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureProfile {
    pub feature: String,
    /// Mean over draws of the fraction of members whose component carries
    /// each region label.
    pub delta_bar: Vec<f64>,
    /// Index of the most associated region (ties to the smallest index).
    pub s_star: usize,
    pub s_star_label: String,
    pub delta_star: f64,
    /// Per-draw association vectors, when requested.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub samples: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    /// 1-based cluster label in the point estimate.
    pub cluster: usize,
    pub size: usize,
    pub features: Vec<FeatureProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSummary {
    pub draws: usize,
    pub clusters: Vec<ClusterProfile>,
}

fn all_draws(chains: &[Draws]) -> impl Iterator<Item = (&Draws, &Draw)> {
    chains.iter().flat_map(|c| c.draws.iter().map(move |d| (c, d)))
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}

/// Region association profile of every cluster of `c_star`, pooling draws
/// over chains.
pub fn delta_summary(
    chains: &[Draws],
    c_star: &Partition,
    specs: &[MrSpec],
    keep_samples: bool,
) -> Result<DeltaSummary> {
    let total: usize = chains.iter().map(Draws::len).sum();
    if total == 0 {
        return Err(ClamrError::EmptyDraws);
    }
    for chain in chains {
        if chain.meta.n != c_star.len() {
            return Err(ClamrError::DimensionMismatch(format!(
                "point estimate has {} items, draws have {}",
                c_star.len(),
                chain.meta.n
            )));
        }
        if chain.meta.p != specs.len() {
            return Err(ClamrError::DimensionMismatch(format!(
                "{} region specs for {} features",
                specs.len(),
                chain.meta.p
            )));
        }
        if let Some(j) = (0..specs.len()).find(|&j| chain.meta.ks[j] > specs[j].k()) {
            return Err(ClamrError::DimensionMismatch(format!(
                "draws use {} regions on feature `{}`, spec has {}",
                chain.meta.ks[j],
                specs[j].feature_name,
                specs[j].k()
            )));
        }
    }
    let p = specs.len();
    let blocks = c_star.blocks();
    let mut clusters = Vec::with_capacity(blocks.len());
    for (m, members) in blocks.iter().enumerate() {
        let size = members.len() as f64;
        let mut features = Vec::with_capacity(p);
        for (j, spec) in specs.iter().enumerate() {
            let k = spec.k();
            let mut sum = vec![0.0; k];
            let mut samples = keep_samples.then(|| Vec::with_capacity(total));
            let mut counts = vec![0usize; k];
            for (_, d) in all_draws(chains) {
                counts.iter_mut().for_each(|c| *c = 0);
                for &i in members {
                    counts[d.s[d.c[i] * p + j]] += 1;
                }
                let delta: Vec<f64> = counts.iter().map(|&c| c as f64 / size).collect();
                for (acc, v) in sum.iter_mut().zip(&delta) {
                    *acc += v;
                }
                if let Some(s) = samples.as_mut() {
                    s.push(delta);
                }
            }
            let delta_bar: Vec<f64> = sum.into_iter().map(|v| v / total as f64).collect();
            let s_star = argmax_first(&delta_bar);
            features.push(FeatureProfile {
                feature: spec.feature_name.clone(),
                s_star,
                s_star_label: spec.regions[s_star].label.clone(),
                delta_star: delta_bar[s_star],
                delta_bar,
                samples,
            });
        }
        clusters.push(ClusterProfile {
            cluster: m + 1,
            size: members.len(),
            features,
        });
    }
    Ok(DeltaSummary {
        draws: total,
        clusters,
    })
}

/// Posterior predictive replicates of the data matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveSamples {
    pub n: usize,
    pub p: usize,
    /// `(chain, position)` of each draw used.
    pub sources: Vec<(usize, usize)>,
    /// Row-major `samples x n x p`, on the original data scale.
    pub values: Vec<f64>,
}

impl PredictiveSamples {
    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn get(&self, t: usize, i: usize, j: usize) -> f64 {
        self.values[(t * self.n + i) * self.p + j]
    }
}

/// Positions of `count` equally spaced items out of `total`.
pub fn equally_spaced(total: usize, count: usize) -> Vec<usize> {
    if count >= total {
        return (0..total).collect();
    }
    (0..count).map(|s| s * total / count).collect()
}

/// One predictive replicate per selected draw: `y_ij ~ N(mu_j^(c_i), sigma_j^(c_i)^2)`.
/// With `max_samples`, draws pooled over chains are subsampled at equal spacing.
pub fn posterior_predictive(
    chains: &[Draws],
    max_samples: Option<usize>,
    seed: u64,
) -> Result<PredictiveSamples> {
    let first = chains.first().ok_or(ClamrError::EmptyDraws)?;
    let (n, p) = (first.meta.n, first.meta.p);
    if chains.iter().any(|c| c.meta.n != n || c.meta.p != p) {
        return Err(ClamrError::DimensionMismatch("chains disagree on data shape".into()));
    }
    let pooled: Vec<(usize, usize)> = chains
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| (0..c.len()).map(move |t| (ci, t)))
        .collect();
    if pooled.is_empty() {
        return Err(ClamrError::EmptyDraws);
    }
    let picks = equally_spaced(pooled.len(), max_samples.unwrap_or(pooled.len()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(picks.len() * n * p);
    let mut sources = Vec::with_capacity(picks.len());
    for idx in picks {
        let (ci, t) = pooled[idx];
        let chain = &chains[ci];
        let d = &chain.draws[t];
        for i in 0..n {
            let l = d.c[i];
            for j in 0..p {
                let z: f64 = StandardNormal.sample(&mut rng);
                let y = d.mu[l * p + j] + z * d.sigma2[l * p + j].sqrt();
                values.push(match &chain.meta.standardization {
                    Some(m) => m[j].0 + m[j].1 * y,
                    None => y,
                });
            }
        }
        sources.push((ci, t));
    }
    Ok(PredictiveSamples {
        n,
        p,
        sources,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waic {
    pub waic: f64,
    pub lppd: f64,
    pub p_waic: f64,
}

/// WAIC from pointwise log-likelihoods, `log_lik[i][t]` for observation `i`
/// under draw `t`.
pub fn waic_from_log_lik(log_lik: &[Vec<f64>]) -> Result<Waic> {
    let t = log_lik.first().map_or(0, Vec::len);
    if t < 2 {
        return Err(ClamrError::InsufficientDraws { needed: 2, got: t });
    }
    let mut lppd = 0.0;
    let mut p_waic = 0.0;
    for row in log_lik {
        if row.len() != t {
            return Err(ClamrError::DimensionMismatch("ragged log-likelihood matrix".into()));
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        lppd += lse - (t as f64).ln();
        let mean = row.iter().sum::<f64>() / t as f64;
        p_waic += row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t as f64 - 1.0);
    }
    Ok(Waic {
        waic: -2.0 * (lppd - p_waic),
        lppd,
        p_waic,
    })
}

/// Pointwise log-likelihood of each row of `data` under each pooled draw,
/// over observed cells. Draws from standardized fits are evaluated on the
/// standardized data.
pub fn pointwise_log_lik(chains: &[Draws], data: &Dataset) -> Result<Vec<Vec<f64>>> {
    let (n, p) = (data.n(), data.p());
    let total: usize = chains.iter().map(Draws::len).sum();
    let mut out = vec![Vec::with_capacity(total); n];
    for chain in chains {
        if chain.meta.n != n || chain.meta.p != p {
            return Err(ClamrError::DimensionMismatch(format!(
                "draws are {}x{}, data is {n}x{p}",
                chain.meta.n, chain.meta.p
            )));
        }
        let scale = chain.meta.standardization.as_deref();
        for d in &chain.draws {
            for (i, row) in out.iter_mut().enumerate() {
                let l = d.c[i];
                let mut ll = 0.0;
                for j in 0..p {
                    if let Some(mut y) = data.get(i, j) {
                        if let Some(m) = scale {
                            y = (y - m[j].0) / m[j].1;
                        }
                        ll += normal_ln_pdf(y, d.mu[l * p + j], d.sigma2[l * p + j]);
                    }
                }
                row.push(ll);
            }
        }
    }
    Ok(out)
}

/// `-2 (lppd - p_waic)` with the variance-based penalty.
pub fn waic(chains: &[Draws], data: &Dataset) -> Result<Waic> {
    waic_from_log_lik(&pointwise_log_lik(chains, data)?)
}

/// Split potential scale reduction factor. Each chain is halved (dropping
/// the middle value of odd lengths). `None` when fewer than two values per
/// half exist or the within-half variance vanishes.
pub fn split_rhat(chains: &[Vec<f64>]) -> Option<f64> {
    let half = chains.iter().map(|c| c.len() / 2).min()?;
    if half < 2 {
        return None;
    }
    let mut pieces: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        pieces.push(&c[..half]);
        pieces.push(&c[c.len() - half..]);
    }
    let m = pieces.len() as f64;
    let n = half as f64;
    let means: Vec<f64> = pieces.iter().map(|s| s.iter().sum::<f64>() / n).collect();
    let grand = means.iter().sum::<f64>() / m;
    let b = n / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = pieces
        .iter()
        .zip(&means)
        .map(|(s, mean)| s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    if !(w > 0.0) {
        return None;
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    Some((var_plus / w).sqrt().max(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub chain: usize,
    pub max_cluster_size: Vec<usize>,
    pub rand_to_point_estimate: Vec<f64>,
    pub log_likelihood: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub traces: Vec<ChainTrace>,
    /// `None` with a single chain or constant traces.
    pub rhat_max_cluster_size: Option<f64>,
    pub rhat_log_likelihood: Option<f64>,
    /// `(chain a, chain b, Rand index)` between per-chain point estimates.
    pub pairwise_rand: Vec<(usize, usize, f64)>,
}

impl DiagnosticsReport {
    pub fn min_pairwise_rand(&self) -> Option<f64> {
        self.pairwise_rand.iter().map(|t| t.2).reduce(f64::min)
    }

    pub fn mean_pairwise_rand(&self) -> Option<f64> {
        (!self.pairwise_rand.is_empty()).then(|| {
            self.pairwise_rand.iter().map(|t| t.2).sum::<f64>() / self.pairwise_rand.len() as f64
        })
    }
}

/// Trace summaries, split R-hat across chains and agreement between the
/// chains' own point estimates.
pub fn diagnostics(chains: &[Draws], c_star: &Partition, loss: Loss) -> Result<DiagnosticsReport> {
    if chains.is_empty() {
        return Err(ClamrError::EmptyDraws);
    }
    let mut traces = Vec::with_capacity(chains.len());
    let mut estimates = Vec::with_capacity(chains.len());
    for chain in chains {
        let partitions = chain.partitions();
        let rand = partitions
            .iter()
            .map(|p| rand_index(p, c_star))
            .collect::<Result<Vec<_>>>()?;
        traces.push(ChainTrace {
            chain: chain.meta.chain,
            max_cluster_size: chain
                .draws
                .iter()
                .map(|d| d.max_cluster_size(chain.meta.components))
                .collect(),
            rand_to_point_estimate: rand,
            log_likelihood: chain.draws.iter().map(|d| d.log_likelihood).collect(),
        });
        estimates.push(point_estimate(&partitions, loss, CandidateSet::Draws)?.partition);
    }
    let (rhat_n, rhat_ll) = if chains.len() >= 2 {
        let n_max: Vec<Vec<f64>> = traces
            .iter()
            .map(|t| t.max_cluster_size.iter().map(|&v| v as f64).collect())
            .collect();
        let ll: Vec<Vec<f64>> = traces.iter().map(|t| t.log_likelihood.clone()).collect();
        (split_rhat(&n_max), split_rhat(&ll))
    } else {
        (None, None)
    };
    let mut pairwise = Vec::new();
    for a in 0..estimates.len() {
        for b in a + 1..estimates.len() {
            pairwise.push((
                chains[a].meta.chain,
                chains[b].meta.chain,
                rand_index(&estimates[a], &estimates[b])?,
            ));
        }
    }
    Ok(DiagnosticsReport {
        traces,
        rhat_max_cluster_size: rhat_n,
        rhat_log_likelihood: rhat_ll,
        pairwise_rand: pairwise,
    })
}
