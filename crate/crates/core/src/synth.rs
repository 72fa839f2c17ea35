//! Synthetic three-cluster, six-feature benchmarks, two distance-based
//! baselines and the replication harness that scores every method against
//! the generating labels.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{ClamrError, Result};
use crate::gibbs::{run_chains, SamplerKind};
use crate::influence::{bayes_factor, calibrate_rho};
use crate::model::{default_center_hyperparams, McmcSettings, ModelConfig, MrInterval, MrSpec, VarianceMode};
use crate::partition::{adjusted_rand, point_estimate, CandidateSet, Loss, Partition};
use crate::seed::derive_seed;

pub use crate::baselines::{hca_complete, kmeans};

const TRUE_CLUSTERS: usize = 3;
const FEATURES: usize = 6;

const MISSPECIFIED_REGIONS: [[(f64, f64); 3]; FEATURES] = [
    [(-1.0, 1.0), (1.0, 2.0), (2.0, 4.0)],
    [(0.0, 2.0), (2.0, 5.0), (5.0, 10.0)],
    [(-10.0, 2.0), (2.0, 4.0), (4.0, 8.0)],
    [(-0.1, 0.1), (0.1, 0.3), (0.3, 0.5)],
    [(0.0, 100.0), (100.0, 250.0), (250.0, 400.0)],
    [(0.0, 10.0), (10.0, 30.0), (30.0, 200.0)],
];

const WELL_SPECIFIED_REGIONS: [[(f64, f64); 3]; FEATURES] = [
    [(-1.0, 10.0), (10.0, 20.0), (20.0, 40.0)],
    [(0.0, 10.0), (10.0, 25.0), (25.0, 50.0)],
    [(-10.0, 2.0), (2.0, 4.0), (4.0, 8.0)],
    [(-0.1, 0.1), (0.1, 0.3), (0.3, 0.5)],
    [(0.0, 100.0), (100.0, 250.0), (250.0, 400.0)],
    [(0.0, 10.0), (10.0, 30.0), (30.0, 200.0)],
];

/// Region index (0-based) of each true cluster's center on each feature.
const MISSPECIFIED_PROFILE: [[usize; FEATURES]; TRUE_CLUSTERS] = [
    [0, 2, 0, 1, 0, 2],
    [0, 2, 1, 0, 0, 2],
    [0, 2, 2, 2, 0, 2],
];

const SCALES: [[f64; FEATURES]; TRUE_CLUSTERS] = [
    [1.0 / 6.0, 0.5, 0.6, 0.05, 20.0, 20.0],
    [1.0 / 6.0, 0.5, 0.6, 0.05, 20.0, 20.0],
    [1.0 / 6.0, 0.5, 1.0 / 3.0, 0.05, 20.0, 20.0],
];

const REGION_LABELS: [&str; 3] = ["D", "N", "E"];
const FEATURE_NAMES: [&str; FEATURES] = ["f1", "f2", "f3", "f4", "f5", "f6"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Heavy-tailed clusters whose centers sit in the regions of a fixed profile.
    Misspecified,
    /// Heavy-tailed clusters whose centers ignore the regions.
    NoMr,
    /// Gaussian clusters with a random profile.
    WellSpecified,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Misspecified => "misspecified",
            Self::NoMr => "no_mr",
            Self::WellSpecified => "well_specified",
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = ClamrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "misspecified" => Ok(Self::Misspecified),
            "no_mr" | "no-mr" => Ok(Self::NoMr),
            "well_specified" | "well-specified" => Ok(Self::WellSpecified),
            other => Err(ClamrError::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

/// How true cluster centers are placed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CenterScheme {
    /// Each center drawn from its region's kernel (resampled until inside
    /// the region), following a fixed profile of region indices.
    Profile(Vec<Vec<usize>>),
    /// As `Profile`, with every profile entry uniform over the regions.
    RandomProfile,
    /// Each center drawn from one kernel spanning all regions of the feature.
    Spanning { omega: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub kind: ScenarioKind,
    pub n: usize,
    pub seed: u64,
    /// The known regions of each feature; also the prior given to the fit.
    pub regions: Vec<MrSpec>,
    pub centers: CenterScheme,
    /// Mass of each region kernel inside its region when drawing centers.
    pub center_omega: f64,
    /// `clusters x p` kernel scales.
    pub scales: Vec<Vec<f64>>,
    /// Student-t degrees of freedom, or `None` for Gaussian kernels.
    pub nu: Option<f64>,
}

fn spec_table(table: &[[(f64, f64); 3]; FEATURES]) -> Vec<MrSpec> {
    table
        .iter()
        .zip(FEATURE_NAMES)
        .map(|(row, name)| {
            let bounds: Vec<(f64, f64, &str)> = row
                .iter()
                .zip(REGION_LABELS)
                .map(|(&(a, b), l)| (a, b, l))
                .collect();
            MrSpec::from_bounds(name, &bounds)
        })
        .collect()
}

impl SimScenario {
    pub fn new(kind: ScenarioKind, n: usize, seed: u64) -> Self {
        let scales = SCALES.iter().map(|r| r.to_vec()).collect();
        let (regions, centers, nu) = match kind {
            ScenarioKind::Misspecified => (
                spec_table(&MISSPECIFIED_REGIONS),
                CenterScheme::Profile(MISSPECIFIED_PROFILE.iter().map(|r| r.to_vec()).collect()),
                Some(5.0),
            ),
            ScenarioKind::NoMr => (
                spec_table(&MISSPECIFIED_REGIONS),
                CenterScheme::Spanning { omega: 0.95 },
                Some(5.0),
            ),
            ScenarioKind::WellSpecified => (
                spec_table(&WELL_SPECIFIED_REGIONS),
                CenterScheme::RandomProfile,
                None,
            ),
        };
        Self {
            kind,
            n,
            seed,
            regions,
            centers,
            center_omega: 0.99,
            scales,
            nu,
        }
    }

    pub fn clusters(&self) -> usize {
        self.scales.len()
    }

    fn check(&self) -> Result<()> {
        let p = self.regions.len();
        if self.n == 0 || p == 0 || self.scales.is_empty() {
            return Err(ClamrError::Config("scenario needs n, features and clusters".into()));
        }
        if self.scales.iter().any(|r| r.len() != p || r.iter().any(|&s| !(s > 0.0))) {
            return Err(ClamrError::Config("scales must be positive, one per feature".into()));
        }
        if let CenterScheme::Profile(profile) = &self.centers {
            let ok = profile.len() == self.clusters()
                && profile
                    .iter()
                    .all(|r| r.len() == p && r.iter().zip(&self.regions).all(|(&k, s)| k < s.k()));
            if !ok {
                return Err(ClamrError::Config("profile does not match the regions".into()));
            }
        }
        if let Some(nu) = self.nu {
            if !(nu > 0.0) {
                return Err(ClamrError::Config("degrees of freedom must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Generating values of a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    /// 0-based true cluster of each row.
    pub labels: Vec<usize>,
    /// `clusters x p` centers.
    pub centers: Vec<Vec<f64>>,
    pub scales: Vec<Vec<f64>>,
    /// `clusters x p` region indices, when centers follow a profile.
    pub profile: Option<Vec<Vec<usize>>>,
}

impl SimTruth {
    pub fn partition(&self) -> Partition {
        Partition::from_labels(&self.labels)
    }
}

fn inside(region: &MrInterval, x: f64) -> bool {
    region.lower <= x && x <= region.upper
}

/// Draws a dataset. Random numbers are consumed in a fixed order (profile,
/// centers, labels, observations), so equal seeds give equal data.
pub fn simulate(scenario: &SimScenario) -> Result<(Dataset, SimTruth)> {
    scenario.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let (clusters, p) = (scenario.clusters(), scenario.regions.len());

    let profile = match &scenario.centers {
        CenterScheme::Profile(pr) => Some(pr.clone()),
        CenterScheme::RandomProfile => Some(
            (0..clusters)
                .map(|_| {
                    scenario
                        .regions
                        .iter()
                        .map(|s| rng.random_range(0..s.k()))
                        .collect()
                })
                .collect(),
        ),
        CenterScheme::Spanning { .. } => None,
    };

    let mut centers = vec![vec![0.0; p]; clusters];
    for (l, row) in centers.iter_mut().enumerate() {
        for (j, center) in row.iter_mut().enumerate() {
            let spec = &scenario.regions[j];
            *center = match (&profile, &scenario.centers) {
                (Some(pr), _) => {
                    let region = &spec.regions[pr[l][j]];
                    let (xi, tau2) = default_center_hyperparams(region, scenario.center_omega)?;
                    loop {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        let x = xi + z * tau2.sqrt();
                        if inside(region, x) {
                            break x;
                        }
                    }
                }
                (None, CenterScheme::Spanning { omega }) => {
                    let (a, b) = spec.support();
                    let (xi, tau2) = default_center_hyperparams(&MrInterval::new(a, b, "all"), *omega)?;
                    let z: f64 = StandardNormal.sample(&mut rng);
                    xi + z * tau2.sqrt()
                }
                (None, _) => unreachable!("profile exists for profile schemes"),
            };
        }
    }

    let labels: Vec<usize> = (0..scenario.n).map(|_| rng.random_range(0..clusters)).collect();
    let t = scenario
        .nu
        .map(|nu| StudentT::new(nu).map_err(|e| ClamrError::Config(e.to_string())))
        .transpose()?;
    let mut values = Vec::with_capacity(scenario.n * p);
    for &l in &labels {
        for j in 0..p {
            let e: f64 = match &t {
                Some(t) => t.sample(&mut rng),
                None => StandardNormal.sample(&mut rng),
            };
            values.push(centers[l][j] + scenario.scales[l][j] * e);
        }
    }
    let names = scenario.regions.iter().map(|s| s.feature_name.clone()).collect();
    let data = Dataset::new(scenario.n, p, values, vec![false; scenario.n * p], names)?;
    Ok((
        data,
        SimTruth {
            labels,
            centers,
            scales: scenario.scales.clone(),
            profile,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Clamr,
    Bgmm,
    Kmeans,
    Hca,
    /// The generating partition itself; a harness self-check.
    Truth,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Clamr => "clamr",
            Self::Bgmm => "bgmm",
            Self::Kmeans => "kmeans",
            Self::Hca => "hca",
            Self::Truth => "truth",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = ClamrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clamr" => Ok(Self::Clamr),
            "bgmm" => Ok(Self::Bgmm),
            "kmeans" | "k-means" => Ok(Self::Kmeans),
            "hca" => Ok(Self::Hca),
            "truth" => Ok(Self::Truth),
            other => Err(ClamrError::Config(format!("unknown method `{other}`"))),
        }
    }
}

/// Settings shared by every replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySettings {
    pub mcmc: McmcSettings,
    pub components: usize,
    pub gamma: f64,
    pub omega: f64,
    pub variance_mode: VarianceMode,
    pub loss: Loss,
    pub epsilon: f64,
    pub mc_samples: usize,
    pub kmeans_restarts: usize,
    /// Replication `r` simulates with seed `base_seed + r`.
    pub base_seed: u64,
    pub workers: usize,
}

impl Default for StudySettings {
    fn default() -> Self {
        Self {
            mcmc: McmcSettings::default(),
            components: 10,
            gamma: 1.0,
            omega: 0.95,
            variance_mode: VarianceMode::Simulation,
            loss: Loss::Vi,
            epsilon: 0.1,
            mc_samples: 20_000,
            kmeans_restarts: 10,
            base_seed: 1,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub scenario: ScenarioKind,
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub method: Method,
    pub ari: f64,
    pub n_clusters: usize,
    /// Per-feature Bayes factors, for the region-prior fit.
    pub bayes_factors: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: ScenarioKind,
    pub n: usize,
    pub method: Method,
    pub mean_ari: f64,
    pub sd_ari: f64,
    pub mean_clusters: f64,
    pub sd_clusters: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    /// Calibrated `rho` used for each sample size.
    pub rhos: Vec<(usize, f64)>,
    pub records: Vec<ReplicationRecord>,
}

/// Mean and sample standard deviation; the deviation of a single value is 0.
fn mean_sd(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, var.sqrt())
}

impl ReplicationResult {
    /// One row per `(scenario, n, method)` in first-appearance order.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut keys: Vec<(ScenarioKind, usize, Method)> = Vec::new();
        for r in &self.records {
            let key = (r.scenario, r.n, r.method);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        keys.into_iter()
            .map(|(scenario, n, method)| {
                let rows: Vec<&ReplicationRecord> = self
                    .records
                    .iter()
                    .filter(|r| r.scenario == scenario && r.n == n && r.method == method)
                    .collect();
                let ari: Vec<f64> = rows.iter().map(|r| r.ari).collect();
                let lhat: Vec<f64> = rows.iter().map(|r| r.n_clusters as f64).collect();
                let (mean_ari, sd_ari) = mean_sd(&ari);
                let (mean_clusters, sd_clusters) = mean_sd(&lhat);
                SummaryRow {
                    scenario,
                    n,
                    method,
                    mean_ari,
                    sd_ari,
                    mean_clusters,
                    sd_clusters,
                }
            })
            .collect()
    }

    pub fn write_table_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["scenario", "n", "method", "mean_ari", "sd_ari", "mean_L", "sd_L"])?;
        for r in self.summary() {
            w.write_record([
                r.scenario.name().to_string(),
                r.n.to_string(),
                r.method.name().to_string(),
                r.mean_ari.to_string(),
                r.sd_ari.to_string(),
                r.mean_clusters.to_string(),
                r.sd_clusters.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_records_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["scenario", "n", "rep", "seed", "method", "ari", "L", "bayes_factors"])?;
        for r in &self.records {
            let bfs = r
                .bayes_factors
                .as_ref()
                .map(|b| b.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"))
                .unwrap_or_default();
            w.write_record([
                r.scenario.name().to_string(),
                r.n.to_string(),
                r.rep.to_string(),
                r.seed.to_string(),
                r.method.name().to_string(),
                r.ari.to_string(),
                r.n_clusters.to_string(),
                bfs,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Model configuration used for both Bayesian fits in the study.
pub fn study_config(scenario: &SimScenario, rho: f64, settings: &StudySettings, seed: u64) -> Result<ModelConfig> {
    let rhos = vec![rho; scenario.regions.len()];
    ModelConfig::from_specs(
        scenario.regions.clone(),
        &rhos,
        settings.omega,
        settings.gamma,
        settings.components,
        settings.variance_mode,
        McmcSettings {
            seed,
            ..settings.mcmc
        },
    )
}

/// Runs one method on one replication.
pub fn run_method(
    method: Method,
    scenario: &SimScenario,
    data: &Dataset,
    truth: &SimTruth,
    rho: f64,
    settings: &StudySettings,
) -> Result<ReplicationRecord> {
    let seed = scenario.seed;
    let (partition, bfs) = match method {
        Method::Clamr | Method::Bgmm => {
            let kind = if method == Method::Clamr {
                SamplerKind::Clamr
            } else {
                SamplerKind::Bgmm
            };
            let cfg = study_config(scenario, rho, settings, derive_seed(seed, 1))?;
            let chains = run_chains(&cfg, data, kind, 1)?;
            let draws: Vec<Partition> = chains.iter().flat_map(|c| c.partitions()).collect();
            let est = point_estimate(&draws, settings.loss, CandidateSet::Draws)?.partition;
            let bfs = (method == Method::Clamr)
                .then(|| {
                    (0..data.p())
                        .map(|j| bayes_factor(&chains, j, settings.epsilon))
                        .collect::<Result<Vec<_>>>()
                })
                .transpose()?;
            (est, bfs)
        }
        Method::Kmeans => (
            kmeans(data, scenario.clusters(), derive_seed(seed, 2), settings.kmeans_restarts)?,
            None,
        ),
        Method::Hca => (hca_complete(data, scenario.clusters())?, None),
        Method::Truth => (truth.partition(), None),
    };
    Ok(ReplicationRecord {
        scenario: scenario.kind,
        n: scenario.n,
        rep: 0,
        seed,
        method,
        ari: adjusted_rand(&partition, &truth.partition())?,
        n_clusters: partition.n_blocks(),
        bayes_factors: bfs,
    })
}

/// Runs every method on `reps` simulated datasets for each sample size.
/// `rho` is calibrated once per sample size unless supplied.
pub fn replicate_study(
    kind: ScenarioKind,
    sizes: &[usize],
    reps: usize,
    methods: &[Method],
    settings: &StudySettings,
    rho_override: Option<f64>,
) -> Result<ReplicationResult> {
    if reps == 0 || sizes.is_empty() || methods.is_empty() {
        return Err(ClamrError::Config(
            "need at least one replication, sample size and method".into(),
        ));
    }
    let needs_rho = methods.contains(&Method::Clamr);
    let mut rhos = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let rho = match (rho_override, needs_rho) {
            (Some(r), _) => r,
            (None, true) => {
                let k = SimScenario::new(kind, n, 0).regions[0].k();
                calibrate_rho(
                    k,
                    settings.gamma,
                    settings.components,
                    n,
                    settings.epsilon,
                    0.5,
                    0.01,
                    settings.mc_samples,
                    settings.base_seed,
                )?
            }
            (None, false) => 1.0,
        };
        rhos.push((n, rho));
    }
    let jobs: Vec<(usize, f64, usize)> = rhos
        .iter()
        .flat_map(|&(n, rho)| (0..reps).map(move |r| (n, rho, r)))
        .collect();
    let run = |&(n, rho, r): &(usize, f64, usize)| -> Result<Vec<ReplicationRecord>> {
        let scenario = SimScenario::new(kind, n, settings.base_seed.wrapping_add(r as u64));
        let (data, truth) = simulate(&scenario)?;
        methods
            .iter()
            .map(|&m| {
                run_method(m, &scenario, &data, &truth, rho, settings).map(|mut rec| {
                    rec.rep = r;
                    rec
                })
            })
            .collect()
    };
    let nested: Vec<Vec<ReplicationRecord>> = if settings.workers <= 1 {
        jobs.iter().map(run).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(settings.workers)
            .build()
            .map_err(|e| ClamrError::Config(format!("thread pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(run).collect::<Result<_>>())?
    };
    Ok(ReplicationResult {
        rhos,
        records: nested.into_iter().flatten().collect(),
    })
}
