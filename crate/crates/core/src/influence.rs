//! Feature influence: the partition of occupied components induced by their
//! region labels on one feature, the interval null that this partition is
//! within `epsilon` (Binder) of a single block, its prior probability, and
//! the Bayes factor against it.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{ClamrError, Result};
use crate::gibbs::Draws;
use crate::partition::Partition;
use crate::seed::derive_seed;

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_THRESHOLD: f64 = 20.0;
pub const DEFAULT_MC_SAMPLES: usize = 20_000;
const RHO_BRACKET: (f64, f64) = (1e-4, 1e4);
const MAX_BISECTIONS: usize = 60;

const ALLOCATION_STREAM: u64 = 0x616c_6c6f_6361_7465;
const LABEL_STREAM: u64 = 0x6c61_6265_6c73_0000;

/// Settings of the influence test and of the prior calibration behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceConfig {
    /// One `epsilon` per feature.
    pub epsilon: Vec<f64>,
    pub mc_samples: usize,
    pub bf_threshold: f64,
    pub seed: u64,
    /// Prior null probability aimed for by calibration.
    pub target: f64,
    pub tolerance: f64,
}

impl InfluenceConfig {
    pub fn with_defaults(p: usize, seed: u64) -> Self {
        Self {
            epsilon: vec![DEFAULT_EPSILON; p],
            mc_samples: DEFAULT_MC_SAMPLES,
            bf_threshold: DEFAULT_THRESHOLD,
            seed,
            target: 0.5,
            tolerance: 0.01,
        }
    }

    pub fn check(&self) -> Result<()> {
        if let Some(e) = self.epsilon.iter().find(|&&e| !(e > 0.0 && e < 1.0)) {
            return Err(ClamrError::Config(format!("epsilon must lie in (0, 1), got {e}")));
        }
        if self.mc_samples < 1000 {
            return Err(ClamrError::Config(format!(
                "at least 1000 Monte Carlo samples required, got {}",
                self.mc_samples
            )));
        }
        if !(self.bf_threshold >= 0.0) {
            return Err(ClamrError::Config("threshold must be nonnegative".into()));
        }
        check_target(self.target, self.tolerance)
    }
}

fn check_target(target: f64, tolerance: f64) -> Result<()> {
    if !(target > 0.0 && target < 1.0) {
        return Err(ClamrError::Domain(format!("target must lie in (0, 1), got {target}")));
    }
    if !(tolerance > 0.0) {
        return Err(ClamrError::Domain("tolerance must be positive".into()));
    }
    Ok(())
}

/// Region labels on feature `j` of the occupied components, in increasing
/// component order. `s` is the row-major `L x p` label matrix.
fn occupied_labels(c: &[usize], s: &[usize], p: usize, j: usize) -> Vec<usize> {
    let components = s.len() / p;
    let mut occupied = vec![false; components];
    for &l in c {
        occupied[l] = true;
    }
    occupied
        .iter()
        .enumerate()
        .filter(|(_, &o)| o)
        .map(|(l, _)| s[l * p + j])
        .collect()
}

/// The partition of the occupied components (in increasing index order)
/// grouping those that share a region label on feature `j`.
pub fn induced_mr_partition(c: &[usize], s: &[usize], p: usize, j: usize) -> Partition {
    Partition::from_labels(&occupied_labels(c, s, p, j))
}

/// Binder distance between a labelling and the single-block partition:
/// the fraction of pairs carrying different labels, zero for one item.
fn one_block_distance(labels: &[usize]) -> f64 {
    let m = labels.len();
    if m < 2 {
        return 0.0;
    }
    let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
    for &k in labels {
        *freq.entry(k).or_insert(0) += 1;
    }
    let pairs = m * (m - 1) / 2;
    let same: usize = freq.values().map(|&f| f * (f.saturating_sub(1)) / 2).sum();
    (pairs - same) as f64 / pairs as f64
}

/// Binder distance between the induced partition on feature `j` and the
/// single block over the occupied components.
pub fn null_distance(c: &[usize], s: &[usize], p: usize, j: usize) -> f64 {
    one_block_distance(&occupied_labels(c, s, p, j))
}

fn check_prior_args(rho: f64, k: usize, gamma: f64, components: usize, n: usize, epsilon: f64) -> Result<()> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(ClamrError::Domain(format!("rho must be positive, got {rho}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(ClamrError::Domain(format!("gamma must be positive, got {gamma}")));
    }
    if k == 0 || components == 0 || n == 0 {
        return Err(ClamrError::Domain("K, L and n must be positive".into()));
    }
    if !(epsilon > 0.0) {
        return Err(ClamrError::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(())
}

/// Number of occupied components for each replicate, drawing `n` allocations
/// from the urn with weights `n_l + gamma/L`. Only fresh draws can open a
/// component, so copies never need to be resolved.
fn occupied_counts(gamma: f64, components: usize, n: usize, mc_samples: usize, seed: u64) -> Vec<usize> {
    (0..mc_samples)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed ^ ALLOCATION_STREAM, r as u64));
            let mut occupied = vec![false; components];
            let mut count = 0;
            for i in 0..n {
                let u: f64 = rng.random();
                let fresh: usize = rng.random_range(0..components);
                if u >= i as f64 / (i as f64 + gamma) && !occupied[fresh] {
                    occupied[fresh] = true;
                    count += 1;
                }
            }
            count
        })
        .collect()
}

/// Fraction of replicates whose induced partition is within `epsilon` of one
/// block. Labels of the occupied components are the first `L_n` draws of the
/// exchangeable urn with weights `m_k + rho/K`. Each replicate consumes a
/// fixed number of uniforms, so estimates at different `rho` share their
/// random numbers.
fn null_rate(occupied: &[usize], rho: f64, k: usize, epsilon: f64, seed: u64) -> f64 {
    let hits: usize = occupied
        .par_iter()
        .enumerate()
        .map_init(Vec::new, |labels, (r, &ln)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed ^ LABEL_STREAM, r as u64));
            labels.clear();
            for l in 0..ln {
                let u: f64 = rng.random();
                let earlier: f64 = rng.random();
                let fresh: usize = rng.random_range(0..k);
                let label = if u < l as f64 / (l as f64 + rho) {
                    labels[(earlier * l as f64) as usize]
                } else {
                    fresh
                };
                labels.push(label);
            }
            usize::from(one_block_distance(labels) < epsilon)
        })
        .sum();
    hits as f64 / occupied.len() as f64
}

/// Monte Carlo estimate of the prior probability that the induced partition
/// of one feature with `k` regions lies within `epsilon` of a single block.
#[allow(clippy::too_many_arguments)]
pub fn prior_null_probability(
    rho: f64,
    k: usize,
    gamma: f64,
    components: usize,
    n: usize,
    epsilon: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<f64> {
    check_prior_args(rho, k, gamma, components, n, epsilon)?;
    if mc_samples == 0 {
        return Err(ClamrError::Domain("mc_samples must be positive".into()));
    }
    let occupied = occupied_counts(gamma, components, n, mc_samples, seed);
    Ok(null_rate(&occupied, rho, k, epsilon, seed))
}

/// Finds `rho` whose prior null probability is within `tolerance` of
/// `target`, bisecting on `ln rho` over `[1e-4, 1e4]` with common random
/// numbers.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_rho(
    k: usize,
    gamma: f64,
    components: usize,
    n: usize,
    epsilon: f64,
    target: f64,
    tolerance: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<f64> {
    check_prior_args(1.0, k, gamma, components, n, epsilon)?;
    check_target(target, tolerance)?;
    if mc_samples == 0 {
        return Err(ClamrError::Domain("mc_samples must be positive".into()));
    }
    let occupied = occupied_counts(gamma, components, n, mc_samples, seed);
    let rate = |rho: f64| null_rate(&occupied, rho, k, epsilon, seed);

    let (mut lo, mut hi) = (RHO_BRACKET.0.ln(), RHO_BRACKET.1.ln());
    let (f_lo, f_hi) = (rate(lo.exp()), rate(hi.exp()));
    // The null probability decreases in rho.
    if (f_lo - target).abs() <= tolerance {
        return Ok(lo.exp());
    }
    if (f_hi - target).abs() <= tolerance {
        return Ok(hi.exp());
    }
    if !(f_lo > target && f_hi < target) {
        return Err(ClamrError::Convergence(format!(
            "target {target} not bracketed: probability {f_lo} at rho = {} and {f_hi} at rho = {}",
            RHO_BRACKET.0, RHO_BRACKET.1
        )));
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let f = rate(mid.exp());
        if (f - target).abs() <= tolerance {
            return Ok(mid.exp());
        }
        if f > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(ClamrError::Convergence(format!(
        "no rho within {tolerance} of {target} after {MAX_BISECTIONS} bisections"
    )))
}

/// Calibrated `rho` for each feature, one calibration per distinct
/// `(K, epsilon)`.
pub fn calibrate_rhos(
    ks: &[usize],
    gamma: f64,
    components: usize,
    n: usize,
    cfg: &InfluenceConfig,
) -> Result<Vec<f64>> {
    if cfg.epsilon.len() != ks.len() {
        return Err(ClamrError::Config(format!(
            "{} epsilon values for {} features",
            cfg.epsilon.len(),
            ks.len()
        )));
    }
    let mut cache: Vec<((usize, u64), f64)> = Vec::new();
    ks.iter()
        .zip(&cfg.epsilon)
        .map(|(&k, &eps)| {
            let key = (k, eps.to_bits());
            if let Some(&(_, rho)) = cache.iter().find(|(kk, _)| *kk == key) {
                return Ok(rho);
            }
            let rho = calibrate_rho(
                k,
                gamma,
                components,
                n,
                eps,
                cfg.target,
                cfg.tolerance,
                cfg.mc_samples,
                cfg.seed,
            )?;
            cache.push((key, rho));
            Ok(rho)
        })
        .collect()
}

/// Fraction of retained draws, pooled over chains, whose induced partition
/// on feature `j` lies within `epsilon` of a single block.
pub fn posterior_null_probability(chains: &[Draws], j: usize, epsilon: f64) -> Result<f64> {
    let mut total = 0usize;
    let mut hits = 0usize;
    for chain in chains {
        let p = chain.meta.p;
        if j >= p {
            return Err(ClamrError::DimensionMismatch(format!(
                "feature index {j} but draws have {p} features"
            )));
        }
        for d in &chain.draws {
            total += 1;
            if null_distance(&d.c, &d.s, p, j) < epsilon {
                hits += 1;
            }
        }
    }
    if total == 0 {
        return Err(ClamrError::EmptyDraws);
    }
    Ok(hits as f64 / total as f64)
}

/// Posterior odds against the null from its estimated posterior probability,
/// under unit prior odds.
pub fn bayes_factor_from_probability(p_null: f64) -> f64 {
    if p_null <= 0.0 {
        f64::INFINITY
    } else if p_null >= 1.0 {
        0.0
    } else {
        (1.0 - p_null) / p_null
    }
}

/// Bayes factor for the influence of feature `j`, pooling all chains.
pub fn bayes_factor(chains: &[Draws], j: usize, epsilon: f64) -> Result<f64> {
    posterior_null_probability(chains, j, epsilon).map(bayes_factor_from_probability)
}

/// Indices of features whose Bayes factor reaches `threshold`.
pub fn select_features(bayes_factors: &[f64], threshold: f64) -> Vec<usize> {
    bayes_factors
        .iter()
        .enumerate()
        .filter(|(_, &bf)| bf >= threshold)
        .map(|(j, _)| j)
        .collect()
}

/// Bayes factor of every feature and the selected subset.
pub fn pretrain_select(chains: &[Draws], epsilons: &[f64], threshold: f64) -> Result<Vec<usize>> {
    let bfs = epsilons
        .iter()
        .enumerate()
        .map(|(j, &eps)| bayes_factor(chains, j, eps))
        .collect::<Result<Vec<_>>>()?;
    Ok(select_features(&bfs, threshold))
}

fn serialize_bf<S: Serializer>(bf: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if bf.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*bf)
    }
}

fn deserialize_bf<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Bf {
        Num(f64),
        Text(String),
    }
    match Bf::deserialize(d)? {
        Bf::Num(v) => Ok(v),
        Bf::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Bf::Text(t) => Err(serde::de::Error::custom(format!("bad Bayes factor `{t}`"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureInfluence {
    pub name: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub rho: f64,
    pub epsilon: f64,
    #[serde(serialize_with = "serialize_bf", deserialize_with = "deserialize_bf")]
    pub bf: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub threshold: f64,
    pub features: Vec<FeatureInfluence>,
    /// Names of the selected features, in input order.
    pub selected: Vec<String>,
}

/// Bayes factors for every feature of a full fit and the features kept.
pub fn pretrain_report(
    chains: &[Draws],
    names: &[String],
    ks: &[usize],
    rhos: &[f64],
    epsilons: &[f64],
    threshold: f64,
) -> Result<PretrainReport> {
    let p = names.len();
    if ks.len() != p || rhos.len() != p || epsilons.len() != p {
        return Err(ClamrError::DimensionMismatch(
            "names, K, rho and epsilon must all have one entry per feature".into(),
        ));
    }
    let mut features = Vec::with_capacity(p);
    for j in 0..p {
        let bf = bayes_factor(chains, j, epsilons[j])?;
        features.push(FeatureInfluence {
            name: names[j].clone(),
            k: ks[j],
            rho: rhos[j],
            epsilon: epsilons[j],
            bf,
            selected: bf >= threshold,
        });
    }
    let selected = features
        .iter()
        .filter(|f| f.selected)
        .map(|f| f.name.clone())
        .collect();
    Ok(PretrainReport {
        threshold,
        features,
        selected,
    })
}
