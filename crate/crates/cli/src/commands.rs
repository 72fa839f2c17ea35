use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use clamr::gibbs::{chain_seed, pooled_partitions, worker_count};
use clamr::influence::pretrain_report;
use clamr::io::{read_draws, write_draws, FeatureEntry, RegionEntry, SpecFile};
use clamr::partition::expected_loss;
use clamr::summarize::{delta_summary, diagnostics, posterior_predictive, waic, DeltaSummary};
use clamr::synth::{replicate_study, simulate, SimScenario, StudySettings};
use clamr::{
    adjusted_rand, compute_psm, point_estimate, run_chains, CandidateSet, Dataset, Draws, McmcSettings,
    ModelConfig, MrSpec, Partition, SamplerKind,
};

use crate::args::{FitArgs, InputArgs, ModelArgs, PretrainArgs, ReplicateArgs, SimulateArgs, SummarizeArgs};
use crate::error::{CliError, CliResult};
use crate::manifest::{digest_input, prepare_output_dir, sha256_file, FileDigest, Manifest};

const DRAWS_FILE: &str = "draws.ndjson";
const POINT_ESTIMATE_FILE: &str = "point_estimate.csv";

fn create(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(CliError::sampler)?;
    writeln!(w).and_then(|_| w.flush()).map_err(CliError::input)
}

fn csv_writer(dir: &Path, name: &str) -> CliResult<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(dir, name)?))
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("configuration types serialize to JSON")
}

/// Inputs shared by `pretrain` and `fit`, resolved against the region spec.
struct Prepared {
    data: Dataset,
    names: Vec<String>,
    truth: Option<Partition>,
    spec: SpecFile,
    inputs: Vec<FileDigest>,
}

/// Cluster labels from a column; equal values share a cluster.
fn truth_partition(data: &Dataset, column: &str) -> CliResult<Partition> {
    let j = data
        .column_index(column)
        .ok_or_else(|| CliError::input(format!("truth column `{column}` not found")))?;
    let mut ids: HashMap<u64, usize> = HashMap::new();
    let mut labels = Vec::with_capacity(data.n());
    for i in 0..data.n() {
        let v = data
            .get(i, j)
            .ok_or_else(|| CliError::input(format!("truth column `{column}` has a missing value in row {}", i + 1)))?;
        let next = ids.len();
        labels.push(*ids.entry(v.to_bits()).or_insert(next));
    }
    Ok(Partition::from_labels(&labels))
}

/// A single region spanning each column's observed range, padded by one
/// unit; the standardized baseline never reads it.
fn spanning_spec(data: &Dataset, names: &[String]) -> SpecFile {
    let features = names
        .iter()
        .map(|name| {
            let j = data.column_index(name).expect("names come from the data");
            let (lo, hi) = (0..data.n())
                .filter_map(|i| data.get(i, j))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            FeatureEntry {
                name: name.clone(),
                regions: vec![RegionEntry {
                    label: "all".into(),
                    lower: lo - 1.0,
                    upper: hi + 1.0,
                }],
                allow_overlap: false,
                xi: None,
                tau2: None,
                rho: None,
            }
        })
        .collect();
    SpecFile {
        features,
        omega: 0.95,
        gamma: 1.0,
        components: 10,
        variance_mode: Default::default(),
    }
}

fn prepare(input: &InputArgs, model: &ModelArgs, spec_required: bool) -> CliResult<Prepared> {
    let full = Dataset::from_csv_path(&input.data).map_err(|e| CliError::input(format!("{}: {e}", input.data.display())))?;
    let truth = input.truth.as_deref().map(|t| truth_partition(&full, t)).transpose()?;
    let names: Vec<String> = match &input.features {
        Some(list) => list.clone(),
        None => full
            .feature_names()
            .iter()
            .filter(|n| Some(n.as_str()) != input.truth.as_deref())
            .cloned()
            .collect(),
    };
    if names.is_empty() {
        return Err(CliError::input("no feature columns selected"));
    }
    let mut cols = Vec::with_capacity(names.len());
    for name in &names {
        if Some(name.as_str()) == input.truth.as_deref() {
            return Err(CliError::input(format!("`{name}` is both a feature and the truth column")));
        }
        cols.push(
            full.column_index(name)
                .ok_or_else(|| CliError::input(format!("feature column `{name}` not found in the data")))?,
        );
    }
    let data = full.select_columns(&cols).map_err(CliError::input)?;

    let mut inputs = vec![digest_input("data", &input.data)?];
    let mut spec = match &input.spec {
        Some(path) => {
            inputs.push(digest_input("spec", path)?);
            SpecFile::from_path(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?
        }
        None if spec_required => return Err(CliError::input("--spec is required for this sampler")),
        None => spanning_spec(&data, &names),
    };
    for name in &names {
        if spec.feature(name).is_none() {
            return Err(CliError::input(format!("feature column `{name}` is not in the region spec")));
        }
    }
    if let Some(o) = model.omega {
        spec.omega = o;
    }
    if let Some(g) = model.gamma {
        spec.gamma = g;
    }
    if let Some(l) = model.components {
        spec.components = l;
    }
    if let Some(m) = model.variance_mode {
        spec.variance_mode = m;
    }
    spec.mr_specs().map_err(CliError::input)?;
    Ok(Prepared {
        data,
        names,
        truth,
        spec,
        inputs,
    })
}

/// Per-feature `rho` and whether each was calibrated rather than given.
fn resolve_rhos(p: &Prepared, model: &ModelArgs, seed: u64) -> CliResult<(Vec<f64>, Vec<bool>)> {
    let calibrated = p.names.iter().map(|n| p.spec.feature(n).is_some_and(|e| e.rho.is_none() && e.regions.len() > 1)).collect();
    let rhos = p
        .spec
        .resolve_rhos(&p.names, p.data.n(), model.epsilon, model.mc_samples, seed)
        .map_err(|e| match e {
            clamr::ClamrError::Config(_) => CliError::input(e),
            other => CliError::sampler(other),
        })?;
    Ok((rhos, calibrated))
}

struct FitRun {
    cfg: ModelConfig,
    rhos: Vec<f64>,
    rho_calibrated: Vec<bool>,
    chains: Vec<Draws>,
    manifest: Manifest,
}

fn run_fit(
    p: &Prepared,
    model: &ModelArgs,
    mcmc: McmcSettings,
    kind: SamplerKind,
    command: &str,
    extra: serde_json::Value,
) -> CliResult<FitRun> {
    let (rhos, rho_calibrated) = match kind {
        SamplerKind::Clamr => resolve_rhos(p, model, mcmc.seed)?,
        SamplerKind::Bgmm => (vec![1.0; p.names.len()], vec![false; p.names.len()]),
    };
    let cfg = p.spec.model_config(&p.names, &rhos, mcmc).map_err(CliError::input)?;
    let config = json!({
        "model": to_value(&cfg),
        "sampler": kind,
        "epsilon": model.epsilon,
        "mc_samples": model.mc_samples,
        "rho_calibrated": rho_calibrated,
        "extra": extra,
    });
    let seeds = json!({
        "mcmc": mcmc.seed,
        "chains": (0..mcmc.chains).map(|c| chain_seed(mcmc.seed, c)).collect::<Vec<_>>(),
        "calibration": mcmc.seed,
    });
    let manifest = Manifest::new(command, config, seeds, p.inputs.clone());
    let chains = run_chains(&cfg, &p.data, kind, worker_count()).map_err(CliError::sampler)?;
    Ok(FitRun {
        cfg,
        rhos,
        rho_calibrated,
        chains,
        manifest,
    })
}

fn write_draws_file(dir: &Path, run: &FitRun) -> CliResult<()> {
    let mut w = create(dir, DRAWS_FILE)?;
    write_draws(&mut w, &run.chains, &run.manifest.run_id).map_err(CliError::input)
}

pub fn pretrain(args: &PretrainArgs) -> CliResult<()> {
    if !(args.threshold >= 0.0) {
        return Err(CliError::input("--threshold must be non-negative"));
    }
    let p = prepare(&args.input, &args.model, true)?;
    prepare_output_dir(&args.input.out, args.input.force)?;
    let run = run_fit(
        &p,
        &args.model,
        args.mcmc.settings(),
        SamplerKind::Clamr,
        "pretrain",
        json!({ "threshold": args.threshold }),
    )?;
    let report = pretrain_report(
        &run.chains,
        &p.names,
        &run.cfg.ks(),
        &run.rhos,
        &vec![args.model.epsilon; p.names.len()],
        args.threshold,
    )
    .map_err(CliError::sampler)?;
    let dir = &args.input.out;
    write_draws_file(dir, &run)?;
    write_json(dir, "pretrain_report.json", &report)?;
    run.manifest
        .finish(dir, &[("draws", DRAWS_FILE), ("report", "pretrain_report.json")])?;
    for f in &report.features {
        println!(
            "{:<24} K={} rho={:.4} BF={}{}",
            f.name,
            f.k,
            f.rho,
            f.bf,
            if f.selected { "  selected" } else { "" }
        );
    }
    println!("selected {} of {} features", report.selected.len(), report.features.len());
    Ok(())
}

#[derive(Serialize)]
struct FitSummary<'a> {
    run_id: String,
    sampler: SamplerKind,
    features: &'a [String],
    rho: &'a [f64],
    rho_calibrated: &'a [bool],
    retained_draws: usize,
    loss: clamr::Loss,
    expected_loss: f64,
    clusters: usize,
    cluster_sizes: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ari_to_truth: Option<f64>,
}

pub fn write_partition_csv(dir: &Path, name: &str, partition: &Partition) -> CliResult<()> {
    let mut w = csv_writer(dir, name)?;
    w.write_record(["row", "cluster"]).map_err(CliError::input)?;
    for (i, c) in partition.one_based().into_iter().enumerate() {
        w.write_record([(i + 1).to_string(), c.to_string()]).map_err(CliError::input)?;
    }
    w.flush().map_err(CliError::input)
}

pub fn read_partition_csv(path: &Path) -> CliResult<Partition> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let mut labels = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(CliError::input)?;
        let row: usize = rec.get(0).unwrap_or("").parse().map_err(CliError::input)?;
        let c: usize = rec.get(1).unwrap_or("").parse().map_err(CliError::input)?;
        if row != i + 1 || c == 0 {
            return Err(CliError::input(format!("{}: malformed row {}", path.display(), i + 1)));
        }
        labels.push(c - 1);
    }
    Ok(Partition::from_labels(&labels))
}

pub fn fit(args: &FitArgs) -> CliResult<()> {
    let p = prepare(&args.input, &args.model, args.sampler == SamplerKind::Clamr)?;
    prepare_output_dir(&args.input.out, args.input.force)?;
    let run = run_fit(
        &p,
        &args.model,
        args.mcmc.settings(),
        args.sampler,
        "fit",
        json!({ "loss": args.loss, "truth": args.input.truth }),
    )?;
    let draws = pooled_partitions(&run.chains);
    let est = point_estimate(&draws, args.loss, CandidateSet::Draws).map_err(CliError::sampler)?;
    let psm = compute_psm(&draws).map_err(CliError::sampler)?;
    let ari = p
        .truth
        .as_ref()
        .map(|t| adjusted_rand(&est.partition, t))
        .transpose()
        .map_err(CliError::sampler)?;
    let dir = &args.input.out;
    write_draws_file(dir, &run)?;
    write_partition_csv(dir, POINT_ESTIMATE_FILE, &est.partition)?;
    psm.write_csv(create(dir, "psm.csv")?).map_err(CliError::input)?;
    let summary = FitSummary {
        run_id: run.manifest.run_id.clone(),
        sampler: args.sampler,
        features: &p.names,
        rho: &run.rhos,
        rho_calibrated: &run.rho_calibrated,
        retained_draws: draws.len(),
        loss: args.loss,
        expected_loss: est.expected_loss,
        clusters: est.partition.n_blocks(),
        cluster_sizes: est.partition.block_sizes(),
        ari_to_truth: ari,
    };
    write_json(dir, "fit.json", &summary)?;
    run.manifest.finish(
        dir,
        &[
            ("draws", DRAWS_FILE),
            ("point_estimate", POINT_ESTIMATE_FILE),
            ("psm", "psm.csv"),
            ("fit", "fit.json"),
        ],
    )?;
    println!(
        "{} clusters (sizes {:?}) from {} retained draws",
        summary.clusters, summary.cluster_sizes, summary.retained_draws
    );
    if let Some(a) = ari {
        println!("ARI to truth: {a}");
    }
    Ok(())
}

pub fn summarize(args: &SummarizeArgs) -> CliResult<()> {
    let parent = Manifest::load(&args.run)?;
    if parent.command != "fit" {
        return Err(CliError::lineage(format!(
            "{} holds a `{}` run, not a fit",
            args.run.display(),
            parent.command
        )));
    }
    let draws_path = parent.verify_output(&args.run, "draws")?;
    let pe_path = parent.verify_output(&args.run, "point_estimate")?;
    let recorded = parent
        .input("data")
        .ok_or_else(|| CliError::lineage("the fit manifest records no data input"))?;
    let data_digest = sha256_file(&args.data)?;
    if data_digest != recorded.sha256 {
        return Err(CliError::lineage(format!(
            "{} is not the data run {} was fitted to",
            args.data.display(),
            parent.run_id
        )));
    }
    let file = File::open(&draws_path).map_err(CliError::input)?;
    let store = read_draws(BufReader::new(file)).map_err(CliError::input)?;
    if store.run_id != parent.run_id {
        return Err(CliError::lineage(format!(
            "draws belong to run {}, manifest to {}",
            store.run_id, parent.run_id
        )));
    }
    let chains = store.chains;
    let c_star = read_partition_csv(&pe_path)?;
    let cfg: ModelConfig = serde_json::from_value(parent.config["model"].clone())
        .map_err(|e| CliError::lineage(format!("fit manifest config: {e}")))?;
    let specs: Vec<MrSpec> = cfg.features.iter().map(|f| f.mr.clone()).collect();

    let full = Dataset::from_csv_path(&args.data).map_err(CliError::input)?;
    let meta = &chains.first().ok_or_else(|| CliError::input("the draws store holds no chains"))?.meta;
    let cols = meta
        .feature_names
        .iter()
        .map(|n| {
            full.column_index(n)
                .ok_or_else(|| CliError::lineage(format!("column `{n}` missing from the data")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let data = full.select_columns(&cols).map_err(CliError::input)?;
    if c_star.len() != data.n() {
        return Err(CliError::lineage("point estimate and data disagree on the number of rows"));
    }

    prepare_output_dir(&args.out, args.force)?;
    let delta = delta_summary(&chains, &c_star, &specs, true).map_err(CliError::sampler)?;
    // WAIC needs a posterior variance, so a single retained state has none.
    let waic = match waic(&chains, &data) {
        Ok(w) => Some(w),
        Err(clamr::ClamrError::InsufficientDraws { .. }) => None,
        Err(e) => return Err(CliError::sampler(e)),
    };
    let diag = diagnostics(&chains, &c_star, args.loss).map_err(CliError::sampler)?;
    let predictive = if args.predictive_samples > 0 {
        Some(posterior_predictive(&chains, Some(args.predictive_samples), args.seed).map_err(CliError::sampler)?)
    } else {
        None
    };
    let pooled = pooled_partitions(&chains);
    let loss_of_estimate = expected_loss(&c_star, &pooled, args.loss).map_err(CliError::sampler)?;

    let dir = &args.out;
    let compact = DeltaSummary {
        draws: delta.draws,
        clusters: delta
            .clusters
            .iter()
            .map(|c| {
                let mut c = c.clone();
                for f in &mut c.features {
                    f.samples = None;
                }
                c
            })
            .collect(),
    };
    let summary = json!({
        "parent_run": parent.run_id,
        "loss": args.loss,
        "expected_loss": loss_of_estimate,
        "profiles": compact,
        "waic": waic,
        "diagnostics": {
            "rhat_max_cluster_size": diag.rhat_max_cluster_size,
            "rhat_log_likelihood": diag.rhat_log_likelihood,
            "pairwise_rand": diag.pairwise_rand,
            "min_pairwise_rand": diag.min_pairwise_rand(),
            "mean_pairwise_rand": diag.mean_pairwise_rand(),
        },
        "predictive_samples": predictive.as_ref().map_or(0, |p| p.len()),
    });
    write_json(dir, "summary.json", &summary)?;

    let mut w = csv_writer(dir, "delta.csv")?;
    w.write_record(["cluster", "size", "feature", "region", "delta_bar", "is_star"])
        .map_err(CliError::input)?;
    for c in &delta.clusters {
        for (f, spec) in c.features.iter().zip(&specs) {
            for (k, d) in f.delta_bar.iter().enumerate() {
                w.write_record([
                    c.cluster.to_string(),
                    c.size.to_string(),
                    f.feature.clone(),
                    spec.regions[k].label.clone(),
                    d.to_string(),
                    (k == f.s_star).to_string(),
                ])
                .map_err(CliError::input)?;
            }
        }
    }
    w.flush().map_err(CliError::input)?;

    let mut w = csv_writer(dir, "delta_samples.csv")?;
    w.write_record(["cluster", "feature", "draw", "region", "delta"])
        .map_err(CliError::input)?;
    for c in &delta.clusters {
        for (f, spec) in c.features.iter().zip(&specs) {
            for (t, v) in f.samples.iter().flatten().enumerate() {
                for (k, d) in v.iter().enumerate() {
                    w.write_record([
                        c.cluster.to_string(),
                        f.feature.clone(),
                        (t + 1).to_string(),
                        spec.regions[k].label.clone(),
                        d.to_string(),
                    ])
                    .map_err(CliError::input)?;
                }
            }
        }
    }
    w.flush().map_err(CliError::input)?;

    let mut w = csv_writer(dir, "traces.csv")?;
    w.write_record(["chain", "iteration", "max_cluster_size", "rand_to_point_estimate", "log_likelihood"])
        .map_err(CliError::input)?;
    for (trace, chain) in diag.traces.iter().zip(&chains) {
        for (t, d) in chain.draws.iter().enumerate() {
            w.write_record([
                trace.chain.to_string(),
                d.iteration.to_string(),
                trace.max_cluster_size[t].to_string(),
                trace.rand_to_point_estimate[t].to_string(),
                trace.log_likelihood[t].to_string(),
            ])
            .map_err(CliError::input)?;
        }
    }
    w.flush().map_err(CliError::input)?;

    let mut outputs = vec![
        ("summary", "summary.json"),
        ("delta", "delta.csv"),
        ("delta_samples", "delta_samples.csv"),
        ("traces", "traces.csv"),
    ];
    if let Some(pred) = &predictive {
        let mut w = csv_writer(dir, "predictive.csv")?;
        w.write_record(["sample", "chain", "draw", "row", "feature", "value"])
            .map_err(CliError::input)?;
        for (t, &(chain, pos)) in pred.sources.iter().enumerate() {
            for i in 0..pred.n {
                for (j, name) in meta.feature_names.iter().enumerate() {
                    w.write_record([
                        (t + 1).to_string(),
                        chain.to_string(),
                        (pos + 1).to_string(),
                        (i + 1).to_string(),
                        name.clone(),
                        pred.get(t, i, j).to_string(),
                    ])
                    .map_err(CliError::input)?;
                }
            }
        }
        w.flush().map_err(CliError::input)?;
        outputs.push(("predictive", "predictive.csv"));
    }

    let inputs = vec![
        digest_input("parent_manifest", &args.run.join(crate::manifest::MANIFEST_FILE))?,
        digest_input("draws", &draws_path)?,
        digest_input("point_estimate", &pe_path)?,
        FileDigest {
            role: "data".into(),
            path: args.data.display().to_string(),
            sha256: data_digest,
        },
    ];
    let config = json!({
        "parent_run": parent.run_id,
        "loss": args.loss,
        "predictive_samples": args.predictive_samples,
    });
    Manifest::new("summarize", config, json!({ "predictive": args.seed }), inputs).finish(dir, &outputs)?;

    for c in &compact.clusters {
        let profile: Vec<String> = c
            .features
            .iter()
            .map(|f| format!("{}={} ({:.2})", f.feature, f.s_star_label, f.delta_star))
            .collect();
        println!("cluster {} (n={}): {}", c.cluster, c.size, profile.join(", "));
    }
    match &waic {
        Some(w) => println!("WAIC {:.3} (lppd {:.3}, p_waic {:.3})", w.waic, w.lppd, w.p_waic),
        None => println!("WAIC not available from a single retained draw"),
    }
    Ok(())
}

pub fn simulate_cmd(args: &SimulateArgs) -> CliResult<()> {
    if args.n == 0 {
        return Err(CliError::input("--n must be positive"));
    }
    let scenario = SimScenario::new(args.scenario, args.n, args.seed);
    let (data, truth) = simulate(&scenario).map_err(CliError::sampler)?;
    prepare_output_dir(&args.out, args.force)?;
    let dir = &args.out;
    data.write_csv(create(dir, "data.csv")?).map_err(CliError::input)?;
    write_partition_csv(dir, "truth.csv", &truth.partition())?;
    let spec = SpecFile::from_mr_specs(&scenario.regions, clamr::VarianceMode::Simulation);
    let mut w = create(dir, "spec.json")?;
    w.write_all(spec.to_json().map_err(CliError::input)?.as_bytes())
        .and_then(|_| w.write_all(b"\n"))
        .and_then(|_| w.flush())
        .map_err(CliError::input)?;
    let config = json!({ "scenario": args.scenario, "n": args.n });
    Manifest::new("simulate", config, json!({ "simulation": args.seed }), Vec::new()).finish(
        dir,
        &[("data", "data.csv"), ("truth", "truth.csv"), ("spec", "spec.json")],
    )?;
    println!("wrote {} rows x {} features to {}", data.n(), data.p(), dir.display());
    Ok(())
}

pub fn replicate(args: &ReplicateArgs) -> CliResult<()> {
    if args.reps == 0 {
        return Err(CliError::input("--reps must be at least 1"));
    }
    if args.sizes.contains(&0) {
        return Err(CliError::input("--sizes must be positive"));
    }
    if args.methods.is_empty() {
        return Err(CliError::input("--methods must name at least one method"));
    }
    let settings = StudySettings {
        mcmc: McmcSettings {
            iterations: args.iterations,
            burn_in: args.burn_in,
            thin: args.thin,
            chains: args.chains,
            seed: args.seed,
            init: args.init,
        },
        components: args.components,
        gamma: args.gamma,
        omega: args.omega,
        variance_mode: args.variance_mode,
        loss: args.loss,
        epsilon: args.epsilon,
        mc_samples: args.mc_samples,
        base_seed: args.seed,
        workers: worker_count(),
        ..StudySettings::default()
    };
    settings.mcmc.check().map_err(CliError::input)?;
    prepare_output_dir(&args.out, args.force)?;
    let result = replicate_study(args.scenario, &args.sizes, args.reps, &args.methods, &settings, args.rho)
        .map_err(|e| match e {
            clamr::ClamrError::Config(_) | clamr::ClamrError::Domain(_) => CliError::input(e),
            other => CliError::sampler(other),
        })?;
    let dir = &args.out;
    result.write_table_csv(create(dir, "table.csv")?).map_err(CliError::input)?;
    result.write_records_csv(create(dir, "records.csv")?).map_err(CliError::input)?;
    // Worker count does not affect results, so it stays out of the run id.
    let mut recorded = settings.clone();
    recorded.workers = 0;
    let config = json!({
        "scenario": args.scenario,
        "sizes": args.sizes,
        "reps": args.reps,
        "methods": args.methods,
        "settings": recorded,
        "rho_override": args.rho,
        "rho": result.rhos,
    });
    Manifest::new("replicate", config, json!({ "base": args.seed }), Vec::new())
        .finish(dir, &[("table", "table.csv"), ("records", "records.csv")])?;
    println!("scenario,n,method,mean_ari,sd_ari,mean_L,sd_L");
    for row in result.summary() {
        println!(
            "{},{},{},{:.3},{:.3},{:.2},{:.2}",
            row.scenario.name(),
            row.n,
            row.method.name(),
            row.mean_ari,
            row.sd_ari,
            row.mean_clusters,
            row.sd_clusters
        );
    }
    Ok(())
}
