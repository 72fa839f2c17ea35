//! Meaningful-region specifications and the prior built on top of them.
//!
//! Each feature carries an ordered list of meaningful regions (MRs). The
//! cluster-center prior is a Gaussian mixture with one kernel per region; the
//! default kernel is centred on the region midpoint with a variance chosen so
//! that exactly `omega` of its mass falls inside the region.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::error::{ClamrError, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// A single meaningful region `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrInterval {
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub label: String,
}

impl MrInterval {
    pub fn new(lower: f64, upper: f64, label: impl Into<String>) -> Self {
        Self {
            lower,
            upper,
            label: label.into(),
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// The meaningful regions of one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrSpec {
    pub feature_name: String,
    pub regions: Vec<MrInterval>,
    #[serde(default)]
    pub allow_overlap: bool,
}

impl MrSpec {
    pub fn new(feature_name: impl Into<String>, regions: Vec<MrInterval>, allow_overlap: bool) -> Self {
        Self {
            feature_name: feature_name.into(),
            regions,
            allow_overlap,
        }
    }

    /// Builds a disjoint spec from `(lower, upper, label)` triples.
    pub fn from_bounds(feature_name: impl Into<String>, bounds: &[(f64, f64, &str)]) -> Self {
        let regions = bounds
            .iter()
            .map(|&(a, b, label)| MrInterval::new(a, b, label))
            .collect();
        Self::new(feature_name, regions, false)
    }

    /// Number of regions, `K_j`.
    pub fn k(&self) -> usize {
        self.regions.len()
    }

    /// Smallest lower endpoint and largest upper endpoint.
    pub fn support(&self) -> (f64, f64) {
        let lo = self.regions.iter().map(|r| r.lower).fold(f64::INFINITY, f64::min);
        let hi = self
            .regions
            .iter()
            .map(|r| r.upper)
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// The general range of the feature, `R_j = b^(K) - a^(1)`.
    pub fn range(&self) -> f64 {
        let (lo, hi) = self.support();
        hi - lo
    }

    /// Index of the region containing `x`.
    ///
    /// Regions are half-open `[a, b)` except the last, which is closed, so a
    /// shared endpoint belongs to the later region. With overlapping regions
    /// the first match wins.
    pub fn region_of(&self, x: f64) -> Option<usize> {
        if !x.is_finite() {
            return None;
        }
        if let Some(k) = self.regions.iter().position(|r| r.lower <= x && x < r.upper) {
            return Some(k);
        }
        let last = self.regions.len().checked_sub(1)?;
        let r = &self.regions[last];
        (x == r.upper).then_some(last)
    }
}

/// Checks a spec and returns it with regions sorted by lower endpoint.
pub fn validate_mr_spec(spec: MrSpec) -> Result<MrSpec> {
    let MrSpec {
        feature_name,
        mut regions,
        allow_overlap,
    } = spec;
    if regions.is_empty() {
        return Err(ClamrError::NoRegions(feature_name));
    }
    for r in &regions {
        if !r.lower.is_finite() || !r.upper.is_finite() {
            return Err(ClamrError::NonFinite {
                feature: feature_name,
            });
        }
        if r.lower >= r.upper {
            return Err(ClamrError::EmptyRegion {
                feature: feature_name,
                lower: r.lower,
                upper: r.upper,
            });
        }
    }
    // Stable sort keeps the user's order for duplicated regions.
    regions.sort_by(|a, b| a.lower.total_cmp(&b.lower));
    if !allow_overlap {
        for w in regions.windows(2) {
            if w[0].upper > w[1].lower {
                return Err(ClamrError::Overlap {
                    feature: feature_name,
                    a_lower: w[0].lower,
                    a_upper: w[0].upper,
                    b_lower: w[1].lower,
                    b_upper: w[1].upper,
                });
            }
        }
    }
    Ok(MrSpec {
        feature_name,
        regions,
        allow_overlap,
    })
}

/// Standard-normal quantile function.
pub fn standard_normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Log density of `N(mean, var)` at `x`.
#[inline]
pub fn normal_ln_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

fn check_omega(omega: f64) -> Result<()> {
    if omega > 0.0 && omega < 1.0 {
        Ok(())
    } else {
        Err(ClamrError::Domain(format!("omega must lie in (0, 1), got {omega}")))
    }
}

/// Default kernel `(xi, tau2)` for a region: the midpoint, and the variance
/// that puts mass `omega` of `N(xi, tau2)` inside the region.
pub fn default_center_hyperparams(region: &MrInterval, omega: f64) -> Result<(f64, f64)> {
    check_omega(omega)?;
    if !(region.lower < region.upper) || !region.lower.is_finite() || !region.upper.is_finite() {
        return Err(ClamrError::Domain(format!(
            "invalid region [{}, {}]",
            region.lower, region.upper
        )));
    }
    let z = standard_normal_quantile(0.5 * (1.0 + omega));
    let tau = region.width() / (2.0 * z);
    Ok((region.midpoint(), tau * tau))
}

/// Which of the two default variance priors to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceMode {
    /// `1/sigma^2 ~ G(2, 1/R)`.
    #[default]
    Application,
    /// `1/sigma^2 ~ G(10/R, 10)`.
    Simulation,
}

impl std::str::FromStr for VarianceMode {
    type Err = ClamrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "application" => Ok(Self::Application),
            "simulation" => Ok(Self::Simulation),
            other => Err(ClamrError::Config(format!("unknown variance mode `{other}`"))),
        }
    }
}

/// Gamma prior on the precision `1/sigma^2`, shape-rate parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariancePrior {
    pub shape: f64,
    pub rate: f64,
}

impl VariancePrior {
    /// Prior mean of `sigma^2` when it exists, otherwise `rate / shape`.
    pub fn central_variance(&self) -> f64 {
        if self.shape > 1.0 {
            self.rate / (self.shape - 1.0)
        } else {
            self.rate / self.shape
        }
    }
}

pub fn default_variance_hyperparams(spec: &MrSpec, mode: VarianceMode) -> VariancePrior {
    let range = spec.range();
    match mode {
        VarianceMode::Application => VariancePrior {
            shape: 2.0,
            rate: 1.0 / range,
        },
        VarianceMode::Simulation => VariancePrior {
            shape: 10.0 / range,
            rate: 10.0,
        },
    }
}

/// Gaussian kernel parameters for every region of a feature plus the
/// Dirichlet concentration `rho` on the region weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterPrior {
    pub xi: Vec<f64>,
    pub tau2: Vec<f64>,
    pub rho: f64,
}

impl CenterPrior {
    pub fn from_defaults(spec: &MrSpec, omega: f64, rho: f64) -> Result<Self> {
        let mut xi = Vec::with_capacity(spec.k());
        let mut tau2 = Vec::with_capacity(spec.k());
        for r in &spec.regions {
            let (x, t) = default_center_hyperparams(r, omega)?;
            xi.push(x);
            tau2.push(t);
        }
        let prior = Self { xi, tau2, rho };
        prior.check(spec)?;
        Ok(prior)
    }

    pub fn k(&self) -> usize {
        self.xi.len()
    }

    pub fn check(&self, spec: &MrSpec) -> Result<()> {
        if self.xi.len() != spec.k() || self.tau2.len() != spec.k() {
            return Err(ClamrError::Config(format!(
                "feature `{}`: expected {} kernel parameters",
                spec.feature_name,
                spec.k()
            )));
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(ClamrError::Config(format!(
                "feature `{}`: rho must be positive",
                spec.feature_name
            )));
        }
        for ((xi, tau2), region) in self.xi.iter().zip(&self.tau2).zip(&spec.regions) {
            if !region.contains(*xi) {
                return Err(ClamrError::Config(format!(
                    "feature `{}`: xi = {xi} lies outside [{}, {}]",
                    spec.feature_name, region.lower, region.upper
                )));
            }
            if !(*tau2 > 0.0) || !tau2.is_finite() {
                return Err(ClamrError::Config(format!(
                    "feature `{}`: tau2 must be positive",
                    spec.feature_name
                )));
            }
        }
        Ok(())
    }
}

/// Mixture density `sum_k phi_k N(mu; xi_k, tau2_k)`.
pub fn center_prior_density(mu: f64, prior: &CenterPrior, phi: &[f64]) -> Result<f64> {
    if phi.len() != prior.k() {
        return Err(ClamrError::Domain(format!(
            "phi has {} entries, prior has {} kernels",
            phi.len(),
            prior.k()
        )));
    }
    let total: f64 = phi.iter().sum();
    if phi.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
        return Err(ClamrError::Domain("phi is not a probability vector".into()));
    }
    Ok(phi
        .iter()
        .zip(prior.xi.iter().zip(&prior.tau2))
        .map(|(&w, (&xi, &tau2))| w * normal_ln_pdf(mu, xi, tau2).exp())
        .sum())
}

/// Everything the sampler needs to know about one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePrior {
    pub mr: MrSpec,
    pub center: CenterPrior,
    pub variance: VariancePrior,
}

impl FeaturePrior {
    /// Default kernels and variance prior for an already validated spec.
    pub fn with_defaults(mr: MrSpec, omega: f64, rho: f64, mode: VarianceMode) -> Result<Self> {
        let center = CenterPrior::from_defaults(&mr, omega, rho)?;
        let variance = default_variance_hyperparams(&mr, mode);
        Ok(Self {
            mr,
            center,
            variance,
        })
    }

    pub fn k(&self) -> usize {
        self.mr.k()
    }
}

/// Starting state of a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitStrategy {
    /// Allocations from k-means with `L` centers on standardized data, then
    /// centers and variances drawn from their conditionals given them.
    #[default]
    Kmeans,
    /// Allocations to the nearest kernel-midpoint profile, centers at the
    /// midpoints and variances at the prior centre.
    Profile,
}

impl std::str::FromStr for InitStrategy {
    type Err = ClamrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmeans" => Ok(Self::Kmeans),
            "profile" => Ok(Self::Profile),
            other => Err(ClamrError::Config(format!("unknown initialization `{other}`"))),
        }
    }
}

/// MCMC run lengths and seeding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McmcSettings {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub chains: usize,
    pub seed: u64,
    #[serde(default)]
    pub init: InitStrategy,
}

impl Default for McmcSettings {
    fn default() -> Self {
        Self {
            iterations: 5000,
            burn_in: 1000,
            thin: 5,
            chains: 1,
            seed: 1,
            init: InitStrategy::Kmeans,
        }
    }
}

impl McmcSettings {
    pub fn retained(&self) -> usize {
        self.iterations.saturating_sub(self.burn_in) / self.thin.max(1)
    }

    pub fn check(&self) -> Result<()> {
        if self.iterations == 0 || self.thin == 0 || self.chains == 0 {
            return Err(ClamrError::Config(
                "iterations, thin and chains must be positive".into(),
            ));
        }
        if self.burn_in >= self.iterations {
            return Err(ClamrError::Config(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        Ok(())
    }
}

/// Complete hyperparameter set for a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of mixture components `L`.
    pub components: usize,
    pub gamma: f64,
    pub omega: f64,
    pub features: Vec<FeaturePrior>,
    pub mcmc: McmcSettings,
}

impl ModelConfig {
    /// Builds a config from MR specs using the default kernels, one `rho` per
    /// feature.
    pub fn from_specs(
        specs: Vec<MrSpec>,
        rhos: &[f64],
        omega: f64,
        gamma: f64,
        components: usize,
        mode: VarianceMode,
        mcmc: McmcSettings,
    ) -> Result<Self> {
        if rhos.len() != specs.len() {
            return Err(ClamrError::Config(format!(
                "{} rho values for {} features",
                rhos.len(),
                specs.len()
            )));
        }
        let features = specs
            .into_iter()
            .zip(rhos)
            .map(|(spec, &rho)| {
                let spec = validate_mr_spec(spec)?;
                FeaturePrior::with_defaults(spec, omega, rho, mode)
            })
            .collect::<Result<Vec<_>>>()?;
        let cfg = Self {
            components,
            gamma,
            omega,
            features,
            mcmc,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn p(&self) -> usize {
        self.features.len()
    }

    pub fn ks(&self) -> Vec<usize> {
        self.features.iter().map(FeaturePrior::k).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_min_components(2)
    }

    /// The sampler itself also runs a single-component model.
    pub(crate) fn validate_with_min_components(&self, min: usize) -> Result<()> {
        if self.components < min {
            return Err(ClamrError::Config(format!(
                "need at least {min} mixture components, got {}",
                self.components
            )));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(ClamrError::Config("gamma must be positive".into()));
        }
        check_omega(self.omega).map_err(|e| ClamrError::Config(e.to_string()))?;
        if self.features.is_empty() {
            return Err(ClamrError::Config("no features configured".into()));
        }
        for f in &self.features {
            f.center.check(&f.mr)?;
            if !(f.variance.shape > 0.0 && f.variance.rate > 0.0) {
                return Err(ClamrError::Config(format!(
                    "feature `{}`: variance prior must have positive shape and rate",
                    f.mr.feature_name
                )));
            }
        }
        self.mcmc.check()
    }

    /// The same model restricted to the given feature indices.
    pub fn select_features(&self, keep: &[usize]) -> Result<Self> {
        let mut features = Vec::with_capacity(keep.len());
        for &j in keep {
            let f = self
                .features
                .get(j)
                .ok_or_else(|| ClamrError::Config(format!("feature index {j} out of range")))?;
            features.push(f.clone());
        }
        let cfg = Self {
            features,
            ..self.clone()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
