use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use jeek::evalx::{sweep_with, MetricsReport, SweepConfig, DEFAULT_EDGE_TOL};
use jeek::io::{
    read_csv_matrix, read_json, weights_to_container, write_csv_matrix, write_json, EstimateFile, MatrixContainer,
    TruthFile,
};
use jeek::simgen::{
    gen_brain, gen_cohub, gen_perturbed, gen_random_graphs, sample_gaussian, GroundTruth, DEFAULT_HUB_FRACTION,
};
use jeek::{backward_map, default_v_grid, lambda_grid, sample_covariance, select_v, TaskDataset};
use serde::Serialize;
use serde_json::json;

use crate::config::{self, parse_f64_list, FileConfig};
use crate::knowledge::Knowledge;
use crate::{EstimateArgs, EstimationArgs, SimArgs, SimulateArgs, SweepArgs};

/// A problem with the requested parameters rather than with the run itself.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Protocol {
    Random,
    Cohub,
    Perturbed,
    Brain,
}

impl Protocol {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::Random),
            "cohub" => Ok(Self::Cohub),
            "perturbed" => Ok(Self::Perturbed),
            "brain" => Ok(Self::Brain),
            _ => Err(usage(format!("unknown protocol {:?} (expected random, cohub, perturbed or brain)", s))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct SimParams {
    protocol: Protocol,
    p: usize,
    #[serde(rename = "K")]
    k: usize,
    n: usize,
    seed: u64,
    sample_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    hub_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    distance: Option<PathBuf>,
}

impl SimParams {
    fn resolve(a: &SimArgs, file: &FileConfig) -> Result<Self> {
        let protocol = Protocol::parse(a.protocol.as_deref().or(file.protocol.as_deref()).unwrap_or("random"))?;
        let distance = a.distance.clone().or_else(|| file.distance.clone());
        if protocol == Protocol::Brain && distance.is_none() {
            return Err(usage("the brain protocol needs a distance matrix: pass --distance PATH"));
        }
        let seed = a.seed.or(file.seed).unwrap_or(config::DEFAULT_SEED);
        let hub_fraction = match protocol {
            Protocol::Cohub | Protocol::Perturbed => {
                Some(a.hub_fraction.or(file.hub_fraction).unwrap_or(DEFAULT_HUB_FRACTION))
            }
            _ => None,
        };
        Ok(Self {
            protocol,
            p: a.p.or(file.p).unwrap_or(config::DEFAULT_P),
            k: a.k.or(file.k).unwrap_or(config::DEFAULT_K),
            n: a.n.or(file.n).unwrap_or(config::DEFAULT_N),
            seed,
            sample_seed: a.sample_seed.or(file.sample_seed).unwrap_or_else(|| config::default_sample_seed(seed)),
            hub_fraction,
            distance,
        })
    }

    fn with_seed(&self, seed: u64) -> Self {
        Self { seed, sample_seed: config::default_sample_seed(seed), ..self.clone() }
    }

    fn run(&mut self) -> Result<(GroundTruth, TaskDataset)> {
        let frac = self.hub_fraction.unwrap_or(DEFAULT_HUB_FRACTION);
        let truth = match self.protocol {
            Protocol::Random => gen_random_graphs(self.p, self.k, self.seed)?,
            Protocol::Cohub => gen_cohub(self.p, self.k, frac, self.seed)?,
            Protocol::Perturbed => gen_perturbed(self.p, self.k, frac, self.seed)?,
            Protocol::Brain => {
                let path = self.distance.as_ref().expect("checked in resolve");
                let (d, _) = read_csv_matrix(path).with_context(|| format!("reading {}", path.display()))?;
                self.p = d.nrows();
                gen_brain(&d, self.k, self.seed)?
            }
        };
        let data = sample_gaussian(&truth, self.n, self.sample_seed)?;
        Ok((truth, data))
    }
}

fn out_dir(flag: &Option<PathBuf>, file: &FileConfig) -> Result<PathBuf> {
    let dir = flag.clone().or_else(|| file.out.clone()).ok_or_else(|| usage("missing output directory: pass --out DIR"))?;
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir)
}

fn manifest(command: &str, parameters: serde_json::Value, outputs: &[String], extra: serde_json::Value) -> serde_json::Value {
    json!({
        "tool": "jeek",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "parameters": parameters,
        "outputs": outputs,
        "results": extra,
    })
}

fn write_dataset(dir: &Path, data: &TaskDataset) -> Result<Vec<String>> {
    let container = MatrixContainer::from_matrices(data.p(), data.k(), data.tasks());
    write_json(&dir.join("dataset.json"), &container)?;
    let mut files = vec!["dataset.json".to_string()];
    for (i, x) in data.tasks().iter().enumerate() {
        let name = format!("data_task{}.csv", i + 1);
        write_csv_matrix(&dir.join(&name), x, data.variable_names())?;
        files.push(name);
    }
    Ok(files)
}

fn one_based(hubs: &[usize]) -> Vec<usize> {
    hubs.iter().map(|h| h + 1).collect()
}

pub fn simulate(a: &SimulateArgs, file: &FileConfig) -> Result<()> {
    let mut params = SimParams::resolve(&a.sim, file)?;
    let dir = out_dir(&a.out, file)?;
    let (truth, data) = params.run()?;
    let mut outputs = write_dataset(&dir, &data)?;
    write_json(&dir.join("truth.json"), &TruthFile::new(&truth))?;
    outputs.push("truth.json".into());
    let results = json!({
        "delta": truth.delta,
        "hubs": one_based(&truth.metadata.hubs),
        "rng": truth.metadata.rng,
    });
    write_json(&dir.join("manifest.json"), &manifest("simulate", serde_json::to_value(&params)?, &outputs, results))?;
    Ok(())
}

fn load_dataset(paths: &[PathBuf]) -> Result<TaskDataset> {
    let resolved: Vec<PathBuf> = match paths {
        [] => return Err(usage("missing input data: pass --data PATH")),
        [one] if one.is_dir() => vec![one.join("dataset.json")],
        _ => paths.to_vec(),
    };
    if let [single] = resolved.as_slice() {
        if single.extension().is_some_and(|e| e == "json") {
            let c: MatrixContainer = read_json(single).with_context(|| format!("reading {}", single.display()))?;
            return Ok(TaskDataset::new(c.to_matrices()?)?);
        }
    }
    let mut tasks = Vec::new();
    let mut names = None;
    for path in &resolved {
        let (m, header) = read_csv_matrix(path).with_context(|| format!("reading {}", path.display()))?;
        names = names.or(header);
        tasks.push(m);
    }
    let data = TaskDataset::new(tasks)?;
    Ok(match names {
        Some(n) => data.with_variable_names(n)?,
        None => data,
    })
}

fn load_truth(path: &Path) -> Result<GroundTruth> {
    let t: TruthFile = read_json(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(t.ground_truth()?)
}

/// Threshold grid as recorded in manifests.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
enum VGrid {
    Default(&'static str),
    Values(Vec<f64>),
}

impl VGrid {
    fn values(&self) -> Vec<f64> {
        match self {
            Self::Default(_) => default_v_grid(),
            Self::Values(v) => v.clone(),
        }
    }
}

fn v_grid(a: &EstimationArgs, file: &FileConfig) -> Result<VGrid> {
    match (&a.v_grid, &file.v_grid) {
        (Some(s), _) => Ok(VGrid::Values(parse_f64_list(s).map_err(|e| usage(format!("--v-grid: {:#}", e)))?)),
        (None, Some(v)) => Ok(VGrid::Values(v.clone())),
        (None, None) => Ok(VGrid::Default("0.001*i for i = 1..1000")),
    }
}

fn knowledge_spec(a: &EstimationArgs, file: &FileConfig) -> (String, f64) {
    let spec = a.knowledge.clone().or_else(|| file.knowledge.clone()).unwrap_or_else(|| "none".into());
    (spec, a.gamma.or(file.gamma).unwrap_or(config::DEFAULT_GAMMA))
}

fn parse_knowledge(spec: &str, gamma: f64) -> Result<Knowledge> {
    Knowledge::parse(spec, gamma).map_err(|e| usage(format!("--knowledge {:?}: {:#}", spec, e)))
}

#[derive(Serialize)]
struct EstimateParams {
    data: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truth: Option<PathBuf>,
    knowledge: String,
    gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda_step: Option<usize>,
    v_grid: VGrid,
}

pub fn estimate(a: &EstimateArgs, file: &FileConfig) -> Result<()> {
    let data_paths = if a.data.is_empty() { file.data.clone().unwrap_or_default() } else { a.data.clone() };
    let truth_path = a.truth.clone().or_else(|| file.truth.clone());
    let (spec, gamma) = knowledge_spec(&a.est, file);
    let knowledge = parse_knowledge(&spec, gamma)?;
    let grid = v_grid(&a.est, file)?;
    let explicit_lambda = a.lambda.or(if a.lambda_step.is_some() { None } else { file.lambda });
    let lambda_step = match explicit_lambda {
        Some(_) => None,
        None => Some(a.lambda_step.or(file.lambda_step).unwrap_or(config::DEFAULT_LAMBDA_STEPS)),
    };
    if lambda_step == Some(0) {
        return Err(usage("--lambda-step is 1-based"));
    }
    let dir = out_dir(&a.out, file)?;

    let data = load_dataset(&data_paths)?;
    let truth_hubs: Option<BTreeSet<usize>> = match &truth_path {
        Some(p) => Some(load_truth(p)?.hubs()),
        None => None,
    };
    let (p, k) = (data.p(), data.k());
    let w = knowledge.build(p, k, truth_hubs.as_ref())?;
    let cov = sample_covariance(&data)?;
    let v = select_v(&cov, &grid.values())?;
    let bmap = backward_map(&cov, v)?;
    let lambda = match (explicit_lambda, lambda_step) {
        (Some(l), _) => l,
        (None, Some(step)) => lambda_grid(p, k, data.n_tot(), step)[step - 1],
        (None, None) => unreachable!(),
    };
    let est = jeek::estimate(&bmap, &w, lambda)?;

    write_json(&dir.join("estimate.json"), &EstimateFile::new(&est, lambda, v))?;
    write_json(&dir.join("weights.json"), &weights_to_container(&w))?;
    let mut outputs = vec!["estimate.json".to_string(), "weights.json".to_string()];
    let names = data.variable_names();
    for (i, m) in est.omega_individual.iter().enumerate() {
        let name = format!("omega_individual_{}.csv", i + 1);
        write_csv_matrix(&dir.join(&name), m, names)?;
        outputs.push(name);
    }
    write_csv_matrix(&dir.join("omega_shared.csv"), &est.omega_shared, names)?;
    outputs.push("omega_shared.csv".into());
    for (i, m) in est.totals().iter().enumerate() {
        let name = format!("omega_total_{}.csv", i + 1);
        write_csv_matrix(&dir.join(&name), m, names)?;
        outputs.push(name);
    }
    let (nz_ind, nz_shared) = est.sparsity_counts();
    let params = EstimateParams {
        data: data_paths,
        truth: truth_path,
        knowledge: spec,
        gamma,
        lambda: explicit_lambda,
        lambda_step,
        v_grid: grid,
    };
    let results = json!({
        "p": p,
        "K": k,
        "lambda": lambda,
        "v_used": v,
        "nonzeros_individual": nz_ind,
        "nonzeros_shared": nz_shared,
    });
    write_json(&dir.join("manifest.json"), &manifest("estimate", serde_json::to_value(&params)?, &outputs, results))?;
    Ok(())
}

#[derive(Serialize)]
struct SweepParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    simulation: Option<SimParams>,
    seeds: usize,
    knowledge: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    compare_knowledge: Option<String>,
    gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambdas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda_steps: Option<usize>,
    v_grid: VGrid,
    edge_tol: f64,
}

#[derive(Serialize)]
struct RunSummary {
    seed: u64,
    auc: f64,
    f1: f64,
    best_lambda: f64,
    v_used: f64,
}

impl RunSummary {
    fn new(seed: u64, r: &MetricsReport) -> Self {
        Self { seed, auc: r.auc, f1: r.f1, best_lambda: r.best_lambda, v_used: r.v_used }
    }
}

fn write_report(dir: &Path, stem: &str, r: &MetricsReport, outputs: &mut Vec<String>, prefix: &str) -> Result<()> {
    write_json(&dir.join(format!("{}.json", stem)), r)?;
    fs::write(dir.join(format!("{}.csv", stem)), r.to_csv())?;
    outputs.push(format!("{}{}.json", prefix, stem));
    outputs.push(format!("{}{}.csv", prefix, stem));
    Ok(())
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn sweep(a: &SweepArgs, file: &FileConfig) -> Result<()> {
    let input = a.input.clone().or_else(|| if a.sim.protocol.is_some() { None } else { file.input.clone() });
    let seeds = a.seeds.or(file.seeds).unwrap_or(1);
    if seeds == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    if input.is_some() && seeds > 1 {
        return Err(usage("--seeds applies to simulated sweeps, not to --input"));
    }
    let (spec, gamma) = knowledge_spec(&a.est, file);
    let knowledge = parse_knowledge(&spec, gamma)?;
    let compare_spec = a.compare_knowledge.clone().or_else(|| file.compare_knowledge.clone());
    let compare = compare_spec.as_deref().map(|s| parse_knowledge(s, gamma)).transpose()?;
    let grid = v_grid(&a.est, file)?;
    let lambdas_explicit = match (&a.lambdas, &file.lambdas) {
        (Some(s), _) => Some(parse_f64_list(s).map_err(|e| usage(format!("--lambdas: {:#}", e)))?),
        (None, Some(l)) if a.lambda_steps.is_none() => Some(l.clone()),
        _ => None,
    };
    let lambda_steps = match lambdas_explicit {
        Some(_) => None,
        None => Some(a.lambda_steps.or(file.lambda_steps).unwrap_or(config::DEFAULT_LAMBDA_STEPS)),
    };
    let edge_tol = a.edge_tol.or(file.edge_tol).unwrap_or(DEFAULT_EDGE_TOL);
    let sim = match &input {
        Some(_) => None,
        None => Some(SimParams::resolve(&a.sim, file)?),
    };
    let dir = out_dir(&a.out, file)?;
    let sweep_config = SweepConfig { v_grid: grid.values(), edge_tol };

    let mut outputs = Vec::new();
    let mut runs = Vec::new();
    let mut paired = Vec::new();
    for s in 0..seeds {
        let (truth, data) = match (&input, &sim) {
            (Some(dir), _) => (load_truth(&dir.join("truth.json"))?, load_dataset(std::slice::from_ref(dir))?),
            (None, Some(base)) => base.with_seed(base.seed + s as u64).run()?,
            (None, None) => unreachable!(),
        };
        let (p, k) = (data.p(), data.k());
        let lambdas = match (&lambdas_explicit, lambda_steps) {
            (Some(l), _) => l.clone(),
            (None, Some(steps)) => lambda_grid(p, k, data.n_tot(), steps),
            (None, None) => unreachable!(),
        };
        let hubs = truth.hubs();
        let w = knowledge.build(p, k, Some(&hubs))?;
        let report = sweep_with(&data, &truth, &w, &lambdas, &sweep_config)?;
        let (run_dir, prefix) = if seeds == 1 {
            (dir.clone(), String::new())
        } else {
            let name = format!("seed_{}", truth.metadata.seed);
            let d = dir.join(&name);
            fs::create_dir_all(&d)?;
            (d, format!("{}/", name))
        };
        write_report(&run_dir, "metrics", &report, &mut outputs, &prefix)?;
        if let Some(other) = &compare {
            let w2 = other.build(p, k, Some(&hubs))?;
            let report2 = sweep_with(&data, &truth, &w2, &lambdas, &sweep_config)?;
            write_report(&run_dir, "metrics_compare", &report2, &mut outputs, &prefix)?;
            paired.push((truth.metadata.seed, report.auc, report2.auc));
        }
        runs.push(RunSummary::new(truth.metadata.seed, &report));
    }

    let summary = json!({
        "knowledge": spec,
        "runs": runs,
        "mean": {
            "auc": mean(runs.iter().map(|r| r.auc)),
            "f1": mean(runs.iter().map(|r| r.f1)),
        },
    });
    write_json(&dir.join("summary.json"), &summary)?;
    outputs.push("summary.json".into());
    if let Some(cspec) = &compare_spec {
        let rows: Vec<_> = paired
            .iter()
            .map(|&(seed, x, y)| json!({"seed": seed, "auc": x, "auc_compare": y, "delta": x - y}))
            .collect();
        let comparison = json!({
            "knowledge": spec,
            "compare_knowledge": cspec,
            "runs": rows,
            "mean_delta": mean(paired.iter().map(|&(_, x, y)| x - y)),
        });
        write_json(&dir.join("comparison.json"), &comparison)?;
        let mut csv = String::from("seed,auc,auc_compare,delta\n");
        for (seed, x, y) in &paired {
            csv.push_str(&format!("{},{:?},{:?},{:?}\n", seed, x, y, x - y));
        }
        fs::write(dir.join("comparison.csv"), csv)?;
        outputs.push("comparison.json".into());
        outputs.push("comparison.csv".into());
    }

    let params = SweepParams {
        input,
        simulation: sim,
        seeds,
        knowledge: spec,
        compare_knowledge: compare_spec,
        gamma,
        lambdas: lambdas_explicit,
        lambda_steps,
        v_grid: grid,
        edge_tol,
    };
    let results = json!({ "mean_auc": summary["mean"]["auc"], "mean_f1": summary["mean"]["f1"] });
    write_json(&dir.join("manifest.json"), &manifest("sweep", serde_json::to_value(&params)?, &outputs, results))?;
    Ok(())
}

/// Exit status for an error: 2 for usage problems, 1 otherwise.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        2
    } else {
        1
    }
}
