//! On-disk formats: the region/prior JSON document and the newline-delimited
//! JSON draws store.
//!
//! A draws store holds one or more chains. Each chain starts with a header
//! record carrying its metadata and is followed by one record per retained
//! iteration:
//!
//! ```text
//! {"record":"header","format":"clamr-draws","version":1,"run_id":"...","meta":{...}}
//! {"record":"draw","iteration":1005,"c":[...],"s":[...],"mu":[...],"sigma2":[...],"log_likelihood":-812.4,"imputed":[]}
//! ```
//!
//! Component indices and region labels are 0-based; `s`, `mu` and `sigma2`
//! are row-major `L x p`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{ClamrError, Result};
use crate::gibbs::{Draw, Draws, DrawsMeta};
use crate::influence::{calibrate_rhos, InfluenceConfig};
use crate::model::{
    default_variance_hyperparams, validate_mr_spec, CenterPrior, FeaturePrior, McmcSettings,
    ModelConfig, MrInterval, MrSpec, VarianceMode,
};

pub const DRAWS_FORMAT: &str = "clamr-draws";
pub const DRAWS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionEntry {
    pub label: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureEntry {
    pub name: String,
    pub regions: Vec<RegionEntry>,
    #[serde(default)]
    pub allow_overlap: bool,
    /// Kernel means, one per region in the listed order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<f64>>,
    /// Kernel variances, one per region in the listed order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau2: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

fn default_omega() -> f64 {
    0.95
}

fn default_gamma() -> f64 {
    1.0
}

fn default_components() -> usize {
    10
}

/// The region specification document read by the command-line tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub features: Vec<FeatureEntry>,
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(rename = "L", default = "default_components")]
    pub components: usize,
    #[serde(default)]
    pub variance_mode: VarianceMode,
}

impl SpecFile {
    /// Document with default settings and no per-feature overrides.
    pub fn from_mr_specs(specs: &[MrSpec], variance_mode: VarianceMode) -> Self {
        SpecFile {
            features: specs
                .iter()
                .map(|mr| FeatureEntry {
                    name: mr.feature_name.clone(),
                    regions: mr
                        .regions
                        .iter()
                        .map(|r| RegionEntry {
                            label: r.label.clone(),
                            lower: r.lower,
                            upper: r.upper,
                        })
                        .collect(),
                    allow_overlap: mr.allow_overlap,
                    xi: None,
                    tau2: None,
                    rho: None,
                })
                .collect(),
            omega: default_omega(),
            gamma: default_gamma(),
            components: default_components(),
            variance_mode,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureEntry> {
        self.features.iter().find(|f| f.name == name)
    }

    /// Validated region spec of every feature, in document order.
    pub fn mr_specs(&self) -> Result<Vec<MrSpec>> {
        self.features.iter().map(|f| validate_mr_spec(f.mr_spec())).collect()
    }

    /// `rho` for each named feature: its override when present, otherwise the
    /// value putting prior probability 1/2 on the no-influence hypothesis
    /// for `n` observations.
    pub fn resolve_rhos(&self, names: &[String], n: usize, epsilon: f64, mc_samples: usize, seed: u64) -> Result<Vec<f64>> {
        let entries = names
            .iter()
            .map(|name| {
                self.feature(name).ok_or_else(|| {
                    ClamrError::Config(format!("feature `{name}` has no meaningful regions in the region spec document"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        // A single-region feature has a fixed label, so its rho is inert.
        let todo: Vec<usize> = (0..entries.len())
            .filter(|&j| entries[j].rho.is_none() && entries[j].regions.len() > 1)
            .collect();
        let mut rhos: Vec<f64> = entries.iter().map(|e| e.rho.unwrap_or(1.0)).collect();
        if todo.is_empty() {
            return Ok(rhos);
        }
        let cfg = InfluenceConfig {
            epsilon: vec![epsilon; todo.len()],
            mc_samples,
            ..InfluenceConfig::with_defaults(todo.len(), seed)
        };
        cfg.check()?;
        let ks: Vec<usize> = todo.iter().map(|&j| entries[j].regions.len()).collect();
        let calibrated = calibrate_rhos(&ks, self.gamma, self.components, n, &cfg)?;
        for (&j, r) in todo.iter().zip(calibrated) {
            rhos[j] = r;
        }
        Ok(rhos)
    }

    /// Builds the model for the named features, in the given order. Features
    /// without a `rho` take the matching entry of `rhos`.
    pub fn model_config(&self, names: &[String], rhos: &[f64], mcmc: McmcSettings) -> Result<ModelConfig> {
        if rhos.len() != names.len() {
            return Err(ClamrError::Config(format!(
                "{} rho values for {} features",
                rhos.len(),
                names.len()
            )));
        }
        let features = names
            .iter()
            .zip(rhos)
            .map(|(name, &rho)| {
                let entry = self.feature(name).ok_or_else(|| {
                    ClamrError::Config(format!("feature `{name}` has no meaningful regions in the region spec document"))
                })?;
                entry.prior(self.omega, entry.rho.unwrap_or(rho), self.variance_mode)
            })
            .collect::<Result<Vec<_>>>()?;
        let cfg = ModelConfig {
            components: self.components,
            gamma: self.gamma,
            omega: self.omega,
            features,
            mcmc,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl FeatureEntry {
    pub fn mr_spec(&self) -> MrSpec {
        MrSpec::new(
            self.name.clone(),
            self.regions
                .iter()
                .map(|r| MrInterval::new(r.lower, r.upper, r.label.clone()))
                .collect(),
            self.allow_overlap,
        )
    }

    /// Prior for this feature with default kernels unless overridden. Kernel
    /// overrides follow the regions through validation's reordering.
    pub fn prior(&self, omega: f64, rho: f64, mode: VarianceMode) -> Result<FeaturePrior> {
        let k = self.regions.len();
        for (field, v) in [("xi", &self.xi), ("tau2", &self.tau2)] {
            if let Some(v) = v {
                if v.len() != k {
                    return Err(ClamrError::Config(format!(
                        "feature `{}`: {field} has {} entries for {k} regions",
                        self.name,
                        v.len()
                    )));
                }
            }
        }
        // Validation sorts regions stably by lower endpoint; apply the same
        // permutation to any overrides.
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| self.regions[a].lower.total_cmp(&self.regions[b].lower));
        let mr = validate_mr_spec(self.mr_spec())?;
        let mut center = CenterPrior::from_defaults(&mr, omega, rho)?;
        if let Some(xi) = &self.xi {
            center.xi = order.iter().map(|&i| xi[i]).collect();
        }
        if let Some(tau2) = &self.tau2 {
            center.tau2 = order.iter().map(|&i| tau2[i]).collect();
        }
        center.check(&mr)?;
        Ok(FeaturePrior {
            variance: default_variance_hyperparams(&mr, mode),
            mr,
            center,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "lowercase")]
enum Record {
    Header {
        format: String,
        version: u32,
        run_id: String,
        meta: DrawsMeta,
    },
    Draw(Draw),
}

/// Writes chains as NDJSON, each chain headed by its metadata.
pub fn write_draws<W: Write>(mut writer: W, chains: &[Draws], run_id: &str) -> Result<()> {
    for chain in chains {
        let header = Record::Header {
            format: DRAWS_FORMAT.into(),
            version: DRAWS_VERSION,
            run_id: run_id.into(),
            meta: chain.meta.clone(),
        };
        serde_json::to_writer(&mut writer, &header)?;
        writer.write_all(b"\n")?;
        for d in &chain.draws {
            serde_json::to_writer(&mut writer, &Record::Draw(d.clone()))?;
            writer.write_all(b"\n")?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Chains read back from a store, with the run id of their headers.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawsStore {
    pub run_id: String,
    pub chains: Vec<Draws>,
}

pub fn read_draws<R: BufRead>(reader: R) -> Result<DrawsStore> {
    let mut run_id: Option<String> = None;
    let mut chains: Vec<Draws> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line)
            .map_err(|e| ClamrError::Format(format!("line {}: {e}", lineno + 1)))?;
        match record {
            Record::Header {
                format,
                version,
                run_id: id,
                meta,
            } => {
                if format != DRAWS_FORMAT || version != DRAWS_VERSION {
                    return Err(ClamrError::Format(format!(
                        "line {}: unsupported store {format} v{version}",
                        lineno + 1
                    )));
                }
                match &run_id {
                    Some(r) if *r != id => {
                        return Err(ClamrError::Format(format!(
                            "line {}: chains from different runs ({r} and {id})",
                            lineno + 1
                        )))
                    }
                    _ => run_id = Some(id),
                }
                chains.push(Draws {
                    meta,
                    draws: Vec::new(),
                });
            }
            Record::Draw(d) => {
                let chain = chains.last_mut().ok_or_else(|| {
                    ClamrError::Format(format!("line {}: draw before any header", lineno + 1))
                })?;
                let m = &chain.meta;
                if d.c.len() != m.n
                    || d.s.len() != m.components * m.p
                    || d.mu.len() != m.components * m.p
                    || d.sigma2.len() != m.components * m.p
                    || d.imputed.len() != m.missing_cells.len()
                {
                    return Err(ClamrError::Format(format!(
                        "line {}: draw does not match its header dimensions",
                        lineno + 1
                    )));
                }
                chain.draws.push(d);
            }
        }
    }
    Ok(DrawsStore {
        run_id: run_id.ok_or_else(|| ClamrError::Format("no header record".into()))?,
        chains,
    })
}
