//! Systematic-scan Gibbs sampler for the diagonal-covariance Gaussian mixture
//! with a meaningful-region prior on the cluster centers.
//!
//! Mixture weights and region weights are integrated out, so allocations and
//! region labels are updated from Dirichlet-multinomial predictive counts.
//! One sweep updates allocations, region labels, centers, variances and
//! finally redraws missing cells from the current component.

use std::borrow::Cow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{ClamrError, Result};
use crate::baselines::kmeans;
use crate::model::{normal_ln_pdf, InitStrategy, ModelConfig};
use crate::partition::Partition;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const MIN_VARIANCE: f64 = 1e-300;
const MAX_VARIANCE: f64 = 1e300;

/// Which prior the sampler runs under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    /// Meaningful-region mixture prior on the centers.
    #[default]
    Clamr,
    /// Weakly informative baseline on standardized data: `mu ~ N(0, 1)`,
    /// `1/sigma^2 ~ G(1, 1)`, `psi ~ Dir(1/L, ..., 1/L)`.
    Bgmm,
}

impl std::str::FromStr for SamplerKind {
    type Err = ClamrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clamr" => Ok(Self::Clamr),
            "bgmm" => Ok(Self::Bgmm),
            other => Err(ClamrError::Config(format!("unknown sampler `{other}`"))),
        }
    }
}

/// Flattened hyperparameters read in the sampler's inner loops.
#[derive(Debug, Clone)]
struct PriorTable {
    ks: Vec<usize>,
    xi: Vec<Vec<f64>>,
    tau2: Vec<Vec<f64>>,
    rho_over_k: Vec<f64>,
    shape: Vec<f64>,
    rate: Vec<f64>,
    /// Squared feature scale used only by the nearest-profile initialization.
    init_scale2: Vec<f64>,
    gamma_over_l: f64,
    sample_labels: bool,
}

impl PriorTable {
    fn new(config: &ModelConfig, kind: SamplerKind) -> Self {
        let p = config.p();
        let l = config.components as f64;
        match kind {
            SamplerKind::Clamr => Self {
                ks: config.ks(),
                xi: config.features.iter().map(|f| f.center.xi.clone()).collect(),
                tau2: config.features.iter().map(|f| f.center.tau2.clone()).collect(),
                rho_over_k: config
                    .features
                    .iter()
                    .map(|f| f.center.rho / f.k() as f64)
                    .collect(),
                shape: config.features.iter().map(|f| f.variance.shape).collect(),
                rate: config.features.iter().map(|f| f.variance.rate).collect(),
                init_scale2: config.features.iter().map(|f| f.mr.range().powi(2)).collect(),
                gamma_over_l: config.gamma / l,
                sample_labels: true,
            },
            SamplerKind::Bgmm => Self {
                ks: vec![1; p],
                xi: vec![vec![0.0]; p],
                tau2: vec![vec![1.0]; p],
                rho_over_k: vec![1.0; p],
                shape: vec![1.0; p],
                rate: vec![1.0; p],
                init_scale2: vec![1.0; p],
                gamma_over_l: 1.0 / l,
                sample_labels: false,
            },
        }
    }

    fn central_variance(&self, j: usize) -> f64 {
        let (a, b) = (self.shape[j], self.rate[j]);
        if a > 1.0 {
            b / (a - 1.0)
        } else {
            b / a
        }
    }
}

/// Current values of every sampled quantity. Matrices indexed by component
/// and feature are row-major `L x p`; `y` is the completed `n x p` data with
/// missing cells holding their current imputations.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub c: Vec<usize>,
    pub s: Vec<usize>,
    pub mu: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub y: Vec<f64>,
}

impl ChainState {
    pub fn occupancy(&self, components: usize) -> Vec<usize> {
        let mut counts = vec![0; components];
        for &c in &self.c {
            counts[c] += 1;
        }
        counts
    }
}

/// One retained iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub iteration: usize,
    pub c: Vec<usize>,
    pub s: Vec<usize>,
    pub mu: Vec<f64>,
    pub sigma2: Vec<f64>,
    /// `log L(y; c, mu, sigma)` over the completed data.
    pub log_likelihood: f64,
    /// Current values of the missing cells, in row-major cell order.
    pub imputed: Vec<f64>,
}

impl Draw {
    pub fn partition(&self) -> Partition {
        Partition::from_labels(&self.c)
    }

    /// Largest component occupancy.
    pub fn max_cluster_size(&self, components: usize) -> usize {
        let mut counts = vec![0usize; components];
        for &c in &self.c {
            counts[c] += 1;
        }
        counts.into_iter().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawsMeta {
    pub chain: usize,
    pub seed: u64,
    pub sampler: SamplerKind,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub n: usize,
    pub p: usize,
    pub components: usize,
    /// Number of regions per feature (all ones for the baseline sampler).
    pub ks: Vec<usize>,
    pub feature_names: Vec<String>,
    pub missing_cells: Vec<(usize, usize)>,
    /// Per-feature `(mean, sd)` when the sampler ran on standardized data.
    pub standardization: Option<Vec<(f64, f64)>>,
}

/// Retained output of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draws {
    pub meta: DrawsMeta,
    pub draws: Vec<Draw>,
}

impl Draws {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn partitions(&self) -> Vec<Partition> {
        self.draws.iter().map(Draw::partition).collect()
    }

    /// Region label of component `l` on feature `j` in draw `t`.
    pub fn label(&self, t: usize, l: usize, j: usize) -> usize {
        self.draws[t].s[l * self.meta.p + j]
    }
}

/// Partitions of all draws from several chains, concatenated in chain order.
pub fn pooled_partitions(chains: &[Draws]) -> Vec<Partition> {
    chains.iter().flat_map(|d| d.partitions()).collect()
}

/// Samples an index with probability proportional to `exp(log_weights)`.
/// The slice is overwritten.
pub(crate) fn sample_log_weights<R: Rng + ?Sized>(rng: &mut R, log_weights: &mut [f64]) -> usize {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for w in log_weights.iter_mut() {
        *w = (*w - max).exp();
        total += *w;
    }
    let mut u = rng.random::<f64>() * total;
    let mut last_positive = 0;
    for (k, &w) in log_weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = k;
            if u < w {
                return k;
            }
            u -= w;
        }
    }
    last_positive
}

/// Normalized probabilities from log weights.
pub fn normalize_log_weights(log_weights: &[f64]) -> Vec<f64> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = log_weights.iter().map(|w| (w - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|w| w / total).collect()
}

fn gamma_draw<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    // Both arguments are validated positive upstream.
    Gamma::new(shape, 1.0 / rate)
        .expect("positive gamma parameters")
        .sample(rng)
}

/// A single chain.
pub struct Sampler<'a> {
    data: Cow<'a, Dataset>,
    prior: PriorTable,
    components: usize,
    missing: Vec<(usize, usize)>,
    standardization: Option<Vec<(f64, f64)>>,
    state: ChainState,
    rng: ChaCha8Rng,
}

impl<'a> Sampler<'a> {
    /// Builds and initializes a chain seeded with `seed`, starting as set by
    /// `config.mcmc.init`.
    pub fn new(config: &ModelConfig, data: &'a Dataset, kind: SamplerKind, seed: u64) -> Result<Self> {
        config.validate_with_min_components(1)?;
        if config.p() != data.p() {
            return Err(ClamrError::Config(format!(
                "config describes {} features, data has {}",
                config.p(),
                data.p()
            )));
        }
        let (data, standardization) = match kind {
            SamplerKind::Clamr => (Cow::Borrowed(data), None),
            SamplerKind::Bgmm => {
                let (z, moments) = data.standardized();
                (Cow::Owned(z), Some(moments))
            }
        };
        let prior = PriorTable::new(config, kind);
        let missing = data.missing_cells();
        let n = data.n();
        let p = data.p();
        let components = config.components;
        let state = ChainState {
            c: vec![0; n],
            s: vec![0; components * p],
            mu: vec![0.0; components * p],
            sigma2: vec![1.0; components * p],
            y: data.values().to_vec(),
        };
        let mut sampler = Self {
            data,
            prior,
            components,
            missing,
            standardization,
            state,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        sampler.initialize(config.mcmc.init);
        Ok(sampler)
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn p(&self) -> usize {
        self.data.p()
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    /// Direct access to the chain state, e.g. to seed it or to overwrite the
    /// completed data in simulation-based checks.
    pub fn state_mut(&mut self) -> &mut ChainState {
        &mut self.state
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Labels drawn uniformly, centers at their kernel means and variances at
    /// the prior centre; allocations and any refresh of the component
    /// parameters follow `init`. Missing cells are imputed last.
    fn initialize(&mut self, init: InitStrategy) {
        let (p, big_l) = (self.p(), self.components);
        for l in 0..big_l {
            for j in 0..p {
                let k = self.rng.random_range(0..self.prior.ks[j]);
                self.state.s[l * p + j] = k;
                self.state.mu[l * p + j] = self.prior.xi[j][k];
                self.state.sigma2[l * p + j] = self.prior.central_variance(j);
            }
        }
        match init {
            InitStrategy::Profile => {
                self.allocate_to_nearest_profile();
                self.impute_missing();
            }
            InitStrategy::Kmeans => {
                self.allocate_by_kmeans();
                self.impute_missing();
                self.update_centers();
                self.update_variances();
                self.impute_missing();
            }
        }
    }

    /// Each observation goes to the component with the nearest center
    /// profile, distances scaled per feature and uniform among ties.
    fn allocate_to_nearest_profile(&mut self) {
        let (n, p, big_l) = (self.n(), self.p(), self.components);
        let mut nearest = Vec::with_capacity(big_l);
        for i in 0..n {
            let mut best = f64::INFINITY;
            nearest.clear();
            for l in 0..big_l {
                let mut d = 0.0;
                for j in 0..p {
                    if !self.data.is_missing(i, j) {
                        let diff = self.data.value(i, j) - self.state.mu[l * p + j];
                        d += diff * diff / self.prior.init_scale2[j];
                    }
                }
                if d < best - 1e-12 * best.abs().max(1e-300) {
                    best = d;
                    nearest.clear();
                    nearest.push(l);
                } else if (d - best).abs() <= 1e-12 * best.abs().max(1e-300) {
                    nearest.push(l);
                }
            }
            self.state.c[i] = nearest[self.rng.random_range(0..nearest.len())];
        }
    }

    /// k-means with `min(L, n)` centers on the standardized data, missing
    /// cells at the column mean.
    fn allocate_by_kmeans(&mut self) {
        let k = self.components.min(self.n());
        let (z, _) = self.data.standardized();
        let complete = Dataset::new(
            z.n(),
            z.p(),
            z.values().to_vec(),
            vec![false; z.n() * z.p()],
            z.feature_names().to_vec(),
        )
        .expect("standardized data are finite");
        let seed = self.rng.random::<u64>();
        let partition = kmeans(&complete, k, seed, 1).expect("complete data and 1 <= k <= n");
        self.state.c.copy_from_slice(partition.labels());
    }

    /// Unnormalized log full-conditional weights for `c_i`, with the counts
    /// excluding observation `i`.
    pub fn allocation_log_weights(&self, i: usize) -> Vec<f64> {
        let (p, big_l) = (self.p(), self.components);
        let mut counts = self.state.occupancy(big_l);
        counts[self.state.c[i]] -= 1;
        let row = &self.state.y[i * p..(i + 1) * p];
        (0..big_l)
            .map(|l| {
                let mut lw = (counts[l] as f64 + self.prior.gamma_over_l).ln();
                for (j, &y) in row.iter().enumerate() {
                    lw += normal_ln_pdf(y, self.state.mu[l * p + j], self.state.sigma2[l * p + j]);
                }
                lw
            })
            .collect()
    }

    /// Resamples every allocation in turn, `i = 1..n`.
    pub fn update_allocations(&mut self) {
        let (n, p, big_l) = (self.n(), self.p(), self.components);
        let mut counts = self.state.occupancy(big_l);
        let mut half_precision = vec![0.0; big_l * p];
        let mut log_norm = vec![0.0; big_l];
        for l in 0..big_l {
            for j in 0..p {
                let v = self.state.sigma2[l * p + j];
                half_precision[l * p + j] = 0.5 / v;
                log_norm[l] -= 0.5 * (LN_2PI + v.ln());
            }
        }
        let mut weights = vec![0.0; big_l];
        for i in 0..n {
            counts[self.state.c[i]] -= 1;
            let row = &self.state.y[i * p..(i + 1) * p];
            for l in 0..big_l {
                let mu = &self.state.mu[l * p..(l + 1) * p];
                let hp = &half_precision[l * p..(l + 1) * p];
                let mut quad = 0.0;
                for j in 0..p {
                    let d = row[j] - mu[j];
                    quad += d * d * hp[j];
                }
                weights[l] = (counts[l] as f64 + self.prior.gamma_over_l).ln() + log_norm[l] - quad;
            }
            let l = sample_log_weights(&mut self.rng, &mut weights);
            self.state.c[i] = l;
            counts[l] += 1;
        }
    }

    /// Unnormalized log full-conditional weights for `s_j^(l)`.
    pub fn label_log_weights(&self, l: usize, j: usize) -> Vec<f64> {
        let (p, big_l) = (self.p(), self.components);
        let k = self.prior.ks[j];
        let mut counts = vec![0usize; k];
        for other in (0..big_l).filter(|&o| o != l) {
            counts[self.state.s[other * p + j]] += 1;
        }
        let mu = self.state.mu[l * p + j];
        (0..k)
            .map(|kk| {
                normal_ln_pdf(mu, self.prior.xi[j][kk], self.prior.tau2[j][kk])
                    + (counts[kk] as f64 + self.prior.rho_over_k[j]).ln()
            })
            .collect()
    }

    /// Resamples every region label, sweeping components within each feature.
    pub fn update_labels(&mut self) {
        if !self.prior.sample_labels {
            return;
        }
        let (p, big_l) = (self.p(), self.components);
        for j in 0..p {
            let k = self.prior.ks[j];
            if k == 1 {
                continue;
            }
            let mut counts = vec![0usize; k];
            for l in 0..big_l {
                counts[self.state.s[l * p + j]] += 1;
            }
            let mut weights = vec![0.0; k];
            for l in 0..big_l {
                let current = self.state.s[l * p + j];
                counts[current] -= 1;
                let mu = self.state.mu[l * p + j];
                for (kk, w) in weights.iter_mut().enumerate() {
                    *w = normal_ln_pdf(mu, self.prior.xi[j][kk], self.prior.tau2[j][kk])
                        + (counts[kk] as f64 + self.prior.rho_over_k[j]).ln();
                }
                let new = sample_log_weights(&mut self.rng, &mut weights);
                self.state.s[l * p + j] = new;
                counts[new] += 1;
            }
        }
    }

    /// Conjugate Gaussian update of every center given its region kernel.
    /// Empty components draw from their kernel.
    pub fn update_centers(&mut self) {
        let (n, p, big_l) = (self.n(), self.p(), self.components);
        let mut sums = vec![0.0; big_l * p];
        let mut counts = vec![0usize; big_l];
        for i in 0..n {
            let l = self.state.c[i];
            counts[l] += 1;
            for j in 0..p {
                sums[l * p + j] += self.state.y[i * p + j];
            }
        }
        for l in 0..big_l {
            for j in 0..p {
                let idx = l * p + j;
                let k = self.state.s[idx];
                let (xi, tau2) = (self.prior.xi[j][k], self.prior.tau2[j][k]);
                let precision = 1.0 / tau2 + counts[l] as f64 / self.state.sigma2[idx];
                let mean = (xi / tau2 + sums[idx] / self.state.sigma2[idx]) / precision;
                let z: f64 = StandardNormal.sample(&mut self.rng);
                self.state.mu[idx] = mean + z / precision.sqrt();
            }
        }
    }

    /// Conjugate gamma update of every precision `1/sigma^2`.
    pub fn update_variances(&mut self) {
        let (n, p, big_l) = (self.n(), self.p(), self.components);
        let mut ss = vec![0.0; big_l * p];
        let mut counts = vec![0usize; big_l];
        for i in 0..n {
            let l = self.state.c[i];
            counts[l] += 1;
            for j in 0..p {
                let d = self.state.y[i * p + j] - self.state.mu[l * p + j];
                ss[l * p + j] += d * d;
            }
        }
        for l in 0..big_l {
            for j in 0..p {
                let idx = l * p + j;
                let shape = self.prior.shape[j] + 0.5 * counts[l] as f64;
                let rate = self.prior.rate[j] + 0.5 * ss[idx];
                let precision = gamma_draw(&mut self.rng, shape, rate);
                self.state.sigma2[idx] = (1.0 / precision).clamp(MIN_VARIANCE, MAX_VARIANCE);
            }
        }
    }

    /// Redraws each missing cell from its current component's Gaussian.
    pub fn impute_missing(&mut self) {
        let p = self.p();
        for &(i, j) in &self.missing {
            let idx = self.state.c[i] * p + j;
            let z: f64 = StandardNormal.sample(&mut self.rng);
            self.state.y[i * p + j] = self.state.mu[idx] + z * self.state.sigma2[idx].sqrt();
        }
    }

    /// One full systematic scan.
    pub fn sweep(&mut self) {
        self.update_allocations();
        self.update_labels();
        self.update_centers();
        self.update_variances();
        self.impute_missing();
    }

    /// `log L(y; c, mu, sigma)` over the completed data.
    pub fn log_likelihood(&self) -> f64 {
        log_likelihood(&self.state.y, &self.state.c, &self.state.mu, &self.state.sigma2, self.p())
    }

    pub fn snapshot(&self, iteration: usize) -> Draw {
        let p = self.p();
        Draw {
            iteration,
            c: self.state.c.clone(),
            s: self.state.s.clone(),
            mu: self.state.mu.clone(),
            sigma2: self.state.sigma2.clone(),
            log_likelihood: self.log_likelihood(),
            imputed: self
                .missing
                .iter()
                .map(|&(i, j)| self.state.y[i * p + j])
                .collect(),
        }
    }

    fn meta(&self, chain: usize, seed: u64, config: &ModelConfig, kind: SamplerKind) -> DrawsMeta {
        DrawsMeta {
            chain,
            seed,
            sampler: kind,
            iterations: config.mcmc.iterations,
            burn_in: config.mcmc.burn_in,
            thin: config.mcmc.thin,
            n: self.n(),
            p: self.p(),
            components: self.components,
            ks: self.prior.ks.clone(),
            feature_names: self.data.feature_names().to_vec(),
            missing_cells: self.missing.clone(),
            standardization: self.standardization.clone(),
        }
    }
}

/// `sum_ij log N(y_ij; mu_j^(c_i), sigma_j^(c_i)^2)` for a completed data matrix.
pub fn log_likelihood(y: &[f64], c: &[usize], mu: &[f64], sigma2: &[f64], p: usize) -> f64 {
    c.iter()
        .enumerate()
        .map(|(i, &l)| {
            (0..p)
                .map(|j| normal_ln_pdf(y[i * p + j], mu[l * p + j], sigma2[l * p + j]))
                .sum::<f64>()
        })
        .sum()
}

/// Seed of chain `chain` given the base seed.
pub fn chain_seed(base: u64, chain: usize) -> u64 {
    base.wrapping_add(chain as u64)
}

/// Runs one chain with seed `config.mcmc.seed + chain`.
pub fn run_chain_id(
    config: &ModelConfig,
    data: &Dataset,
    kind: SamplerKind,
    chain: usize,
) -> Result<Draws> {
    let seed = chain_seed(config.mcmc.seed, chain);
    let mut sampler = Sampler::new(config, data, kind, seed)?;
    let mcmc = config.mcmc;
    let mut draws = Vec::with_capacity(mcmc.retained());
    for t in 1..=mcmc.iterations {
        sampler.sweep();
        if t > mcmc.burn_in && (t - mcmc.burn_in).is_multiple_of(mcmc.thin) {
            draws.push(sampler.snapshot(t));
        }
    }
    Ok(Draws {
        meta: sampler.meta(chain, seed, config, kind),
        draws,
    })
}

/// Runs the first chain.
pub fn run_chain(config: &ModelConfig, data: &Dataset, kind: SamplerKind) -> Result<Draws> {
    run_chain_id(config, data, kind, 0)
}

/// Worker count from `CLAMR_THREADS`, defaulting to the available parallelism.
pub fn worker_count() -> usize {
    std::env::var("CLAMR_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `config.mcmc.chains` chains on up to `workers` threads. Output is
/// ordered by chain id and does not depend on the worker count.
pub fn run_chains(
    config: &ModelConfig,
    data: &Dataset,
    kind: SamplerKind,
    workers: usize,
) -> Result<Vec<Draws>> {
    let chains = config.mcmc.chains;
    if workers <= 1 || chains == 1 {
        return (0..chains).map(|c| run_chain_id(config, data, kind, c)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.min(chains))
        .build()
        .map_err(|e| ClamrError::Config(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..chains)
            .into_par_iter()
            .map(|c| run_chain_id(config, data, kind, c))
            .collect()
    })
}
