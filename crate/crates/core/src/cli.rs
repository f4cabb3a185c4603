//! Command-line front end: run configuration, the pipeline commands, and the
//! argument parser used by the `fairbayes` binary.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{
    fit_normalization, load_samples, DatasetError, FeatureSchema, Group, NormalizationParams,
    SampleTable,
};
use crate::decorrelate::{
    budget_vector, solve_decorrelation_aware, solve_decorrelation_unaware, DecorrelateError,
    DecorrelationConfig, DecorrelationOutcome,
};
use crate::fairlp::{
    build_neighbor_matrix, fair_solution, pareto_sweep, Awareness, FairLpError, FairLpResult,
    FairnessBudget, NeighborMatrix, SweepPoint,
};
use crate::quantizer::{
    build_joint, pac_max_cells, pac_sample_bound, pcc, train_codebook, tv_distance, views,
    Codebook, DiscreteJoint, QuantizerError,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Quantizer(#[from] QuantizerError),
    #[error(transparent)]
    FairLp(#[from] FairLpError),
    #[error(transparent)]
    Decorrelate(#[from] DecorrelateError),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } => "io",
            CliError::Json(_) => "json",
            CliError::Csv(_) => "csv",
            CliError::Dataset(_) => "dataset",
            CliError::Quantizer(_) => "quantizer",
            CliError::FairLp(_) => "lp",
            CliError::Decorrelate(_) => "decorrelate",
        }
    }

    /// 1 for configuration and IO problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Quantizer(QuantizerError::InvalidParameter(_))
            | CliError::FairLp(FairLpError::InvalidParameter(_))
            | CliError::Decorrelate(DecorrelateError::InvalidParameter(_)) => 1,
            CliError::Quantizer(_) | CliError::FairLp(_) | CliError::Decorrelate(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizerSettings {
    pub cells: usize,
    pub error: f64,
    pub confidence: f64,
    pub rel_tol: f64,
    pub seed: u64,
    /// Standardize continuous columns before training.
    pub normalize: bool,
}

impl Default for QuantizerSettings {
    fn default() -> Self {
        QuantizerSettings {
            cells: 16,
            error: 0.05,
            confidence: 0.95,
            rel_tol: 0.01,
            seed: 0,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeighborSettings {
    pub percentile: f64,
    pub theta: f64,
}

impl Default for NeighborSettings {
    fn default() -> Self {
        NeighborSettings {
            percentile: 3.5,
            theta: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TradeoffSettings {
    /// Active-set labels such as `DP`, `EOd`, `DP+EA`, `EA+IF`.
    pub combinations: Vec<String>,
    /// Budgets applied to every active constraint.
    pub grid: Vec<f64>,
    /// Fixed individual-fairness budget; when unset it follows the grid.
    pub ind_budget: Option<f64>,
    pub awareness: Vec<Awareness>,
}

impl Default for TradeoffSettings {
    fn default() -> Self {
        TradeoffSettings {
            combinations: ["DP", "EOp", "PE", "EOd", "EA", "DP+EOd", "DP+EA"]
                .map(String::from)
                .to_vec(),
            grid: (0..=6).map(|k| k as f64 * 0.05).collect(),
            ind_budget: None,
            awareness: vec![Awareness::Unaware, Awareness::Aware],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecorrelateSettings {
    pub awareness: Awareness,
    pub combinations: Vec<String>,
    pub grid: Vec<f64>,
    pub ind_budget: Option<f64>,
    pub solver: DecorrelationConfig,
}

impl Default for DecorrelateSettings {
    fn default() -> Self {
        DecorrelateSettings {
            awareness: Awareness::Unaware,
            combinations: vec!["DP+EA".into()],
            grid: vec![0.0, 0.05, 0.10],
            ind_budget: Some(0.05),
            solver: DecorrelationConfig::default(),
        }
    }
}

/// Everything a pipeline run needs; stored as JSON and hashed into every
/// output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub samples: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    /// Optional second sample file quantized with the same codebook for the
    /// fidelity report.
    pub reference: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/joint.json`.
    pub joint: Option<PathBuf>,
    /// Defaults to `<output_dir>/codebook.json`.
    pub codebook: Option<PathBuf>,
    pub quantizer: QuantizerSettings,
    pub neighbors: NeighborSettings,
    pub tradeoff: TradeoffSettings,
    pub decorrelate: DecorrelateSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            samples: None,
            schema: None,
            reference: None,
            output_dir: PathBuf::from("out"),
            joint: None,
            codebook: None,
            quantizer: QuantizerSettings::default(),
            neighbors: NeighborSettings::default(),
            tradeoff: TradeoffSettings::default(),
            decorrelate: DecorrelateSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn joint_path(&self) -> PathBuf {
        self.joint
            .clone()
            .unwrap_or_else(|| self.output_dir.join("joint.json"))
    }

    pub fn codebook_path(&self) -> PathBuf {
        self.codebook
            .clone()
            .unwrap_or_else(|| self.output_dir.join("codebook.json"))
    }

    fn require(path: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
        let p = path
            .clone()
            .ok_or_else(|| CliError::Config(format!("`{name}` is required")))?;
        if !p.exists() {
            return Err(CliError::Config(format!("{name} `{}` does not exist", p.display())));
        }
        Ok(p)
    }

    fn budgets(combination: &str, grid: &[f64], ind: Option<f64>) -> Result<Vec<FairnessBudget>> {
        if grid.is_empty() {
            return Err(CliError::Config("budget grid is empty".into()));
        }
        grid.iter()
            .map(|&eps| {
                let mut b = FairnessBudget::from_label(combination, eps)?;
                if let (Some(_), Some(fixed)) = (b.ind, ind) {
                    b.ind = Some(fixed);
                }
                b.validate()?;
                Ok(b)
            })
            .collect()
    }
}

/// Codebook plus the preprocessing needed to quantize new samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizerArtifact {
    pub config_hash: String,
    pub schema: FeatureSchema,
    pub normalization: Option<NormalizationParams>,
    pub codebook: Codebook,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointArtifact {
    pub config_hash: String,
    pub samples: usize,
    pub joint: DiscreteJoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorComparison {
    pub name: String,
    pub tv: Option<f64>,
    pub pcc: Option<f64>,
}

/// TV and PCC between matching vectors of two joints over the same cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub comparisons: Vec<VectorComparison>,
    pub max_tv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizeSummary {
    pub config_hash: String,
    pub samples: usize,
    pub cells: usize,
    pub pac_sample_bound: u64,
    pub pac_max_cells: u64,
    pub distortion: f64,
    pub lloyd_iterations: usize,
    pub fidelity: Option<FidelityReport>,
    pub warnings: Vec<String>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn prepare(table: SampleTable, normalization: Option<&NormalizationParams>) -> Result<SampleTable> {
    Ok(match normalization {
        Some(p) => p.apply(&table)?,
        None => table,
    })
}

/// Compares each `(group, label)` conditional vector and the flattened joint.
pub fn compare_joints(p: &DiscreteJoint, q: &DiscreteJoint) -> Result<FidelityReport> {
    if p.cells != q.cells {
        return Err(CliError::Quantizer(QuantizerError::DimensionMismatch {
            expected: p.cells,
            found: q.cells,
        }));
    }
    let mut comparisons = Vec::new();
    for g in Group::BOTH {
        for y in 0..2u8 {
            let name = format!("{}{}", if g == Group::A { "a" } else { "b" }, y);
            let (cp, cq) = (p.conditional(g, y), q.conditional(g, y));
            let (tv, pc) = match (&cp, &cq) {
                (Some(a), Some(b)) => (Some(tv_distance(a, b)?), pcc(a, b).ok()),
                _ => (None, None),
            };
            comparisons.push(VectorComparison { name, tv, pcc: pc });
        }
    }
    let flat = |j: &DiscreteJoint| -> Vec<f64> {
        j.probabilities.iter().flatten().flatten().copied().collect()
    };
    let (fp, fq) = (flat(p), flat(q));
    comparisons.push(VectorComparison {
        name: "joint".into(),
        tv: Some(tv_distance(&fp, &fq)?),
        pcc: pcc(&fp, &fq).ok(),
    });
    let max_tv = comparisons
        .iter()
        .filter_map(|c| c.tv)
        .fold(0.0, f64::max);
    Ok(FidelityReport {
        comparisons,
        max_tv,
    })
}

/// Trains the codebook, tabulates the joint and writes `codebook.json`,
/// `joint.json` and (with a reference file) `fidelity.json`.
pub fn cmd_quantize(config: &RunConfig) -> Result<QuantizeSummary> {
    let schema_path = RunConfig::require(&config.schema, "schema")?;
    let samples_path = RunConfig::require(&config.samples, "samples")?;
    let q = &config.quantizer;
    let schema = FeatureSchema::from_path(&schema_path)?;
    let raw = load_samples(&samples_path, &schema)?;
    let normalization = if q.normalize {
        Some(fit_normalization(&raw)?)
    } else {
        None
    };
    let table = prepare(raw, normalization.as_ref())?;
    let m = table.count();
    let bound = pac_sample_bound(q.cells as u64, q.error, q.confidence)?;
    let max_cells = pac_max_cells(m as u64, q.error, q.confidence)?;
    let mut warnings = Vec::new();
    if (m as u64) < bound {
        warnings.push(format!(
            "{m} samples are below the {bound} required for {} cells at error {} and confidence {}; at most {max_cells} cells are supported",
            q.cells, q.error, q.confidence
        ));
    }
    let codebook = train_codebook(&table, q.cells, q.rel_tol, q.seed)?;
    if codebook.cells() < q.cells {
        warnings.push(format!(
            "duplicate centroids collapsed: {} cells requested, {} kept",
            q.cells,
            codebook.cells()
        ));
    }
    let joint = build_joint(&table, &codebook)?;
    let hash = config.hash();

    fs::create_dir_all(&config.output_dir).map_err(io_err(&config.output_dir))?;
    let fidelity = match &config.reference {
        Some(path) => {
            let reference = prepare(load_samples(path, &schema)?, normalization.as_ref())?;
            let ref_joint = build_joint(&reference, &codebook)?;
            let report = compare_joints(&joint, &ref_joint)?;
            write_json(&config.output_dir.join("fidelity.json"), &report)?;
            Some(report)
        }
        None => None,
    };
    let summary = QuantizeSummary {
        config_hash: hash.clone(),
        samples: m,
        cells: codebook.cells(),
        pac_sample_bound: bound,
        pac_max_cells: max_cells,
        distortion: codebook.distortion,
        lloyd_iterations: codebook.iterations,
        fidelity,
        warnings,
    };
    write_json(
        &config.codebook_path(),
        &QuantizerArtifact {
            config_hash: hash.clone(),
            schema,
            normalization,
            codebook,
        },
    )?;
    write_json(
        &config.joint_path(),
        &JointArtifact {
            config_hash: hash,
            samples: m,
            joint,
        },
    )?;
    Ok(summary)
}

/// Reads either a bare joint or a [`JointArtifact`].
pub fn load_joint(path: &Path) -> Result<DiscreteJoint> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let joint: DiscreteJoint = match value.get("joint") {
        Some(inner) => serde_json::from_value(inner.clone())?,
        None => serde_json::from_value(value)?,
    };
    joint.validate()?;
    Ok(joint)
}

fn neighbor_matrix(config: &RunConfig, cells: usize, needed: bool) -> Result<NeighborMatrix> {
    if !needed {
        return Ok(NeighborMatrix::empty(cells));
    }
    let path = config.codebook_path();
    if !path.exists() {
        return Err(CliError::Config(format!(
            "individual fairness needs the codebook `{}`",
            path.display()
        )));
    }
    let artifact: QuantizerArtifact = read_json(&path)?;
    if artifact.codebook.cells() != cells {
        return Err(CliError::Config(format!(
            "codebook has {} cells but the joint has {cells}",
            artifact.codebook.cells()
        )));
    }
    Ok(build_neighbor_matrix(
        &artifact.codebook,
        config.neighbors.percentile,
        config.neighbors.theta,
    )?)
}

fn needs_neighbors(combinations: &[String]) -> Result<bool> {
    let mut any = false;
    for c in combinations {
        any |= FairnessBudget::from_label(c, 0.0)?.ind.is_some();
    }
    Ok(any)
}

fn file_label(label: &str) -> String {
    label.replace('+', "-")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn residual_columns(point: &SweepPoint) -> [String; 5] {
    let find = |name: &str| {
        point
            .residuals
            .iter()
            .find(|r| r.label == name)
            .map(|r| r.value)
    };
    let ind = point
        .residuals
        .iter()
        .filter(|r| r.label.starts_with("IF"))
        .map(|r| r.value)
        .reduce(f64::max);
    [opt(find("DP")), opt(find("EOp")), opt(find("PE")), opt(find("EA")), opt(ind)]
}

fn csv_writer(path: &Path, hash: &str) -> Result<csv::Writer<fs::File>> {
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    writeln!(file, "# config-hash: {hash}").map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(file))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub awareness: Awareness,
    pub combination: String,
    pub csv: PathBuf,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffReport {
    pub config_hash: String,
    pub sweeps: Vec<SweepRecord>,
}

/// One Pareto sweep per (awareness, combination): a CSV each plus
/// `tradeoff.json`.
pub fn cmd_tradeoff(config: &RunConfig) -> Result<TradeoffReport> {
    let t = &config.tradeoff;
    if t.combinations.is_empty() || t.awareness.is_empty() {
        return Err(CliError::Config("tradeoff needs combinations and awareness modes".into()));
    }
    let joint = load_joint(&config.joint_path())?;
    let v = views(&joint)?;
    let w = neighbor_matrix(config, joint.cells, needs_neighbors(&t.combinations)?)?;
    let hash = config.hash();
    fs::create_dir_all(&config.output_dir).map_err(io_err(&config.output_dir))?;
    let mut sweeps = Vec::new();
    for &awareness in &t.awareness {
        for combination in &t.combinations {
            let grid = RunConfig::budgets(combination, &t.grid, t.ind_budget)?;
            let points = pareto_sweep(&v, &grid, awareness, &w);
            let path = config.output_dir.join(format!(
                "tradeoff_{}_{}.csv",
                awareness.label(),
                file_label(combination)
            ));
            let mut out = csv_writer(&path, &hash)?;
            out.write_record([
                "combination", "awareness", "eps_dp", "eps_eop", "eps_pe", "eps_ea", "eps_if",
                "status", "acc_star", "acc_fair", "res_dp", "res_eop", "res_pe", "res_ea",
                "res_if_max",
            ])?;
            for p in &points {
                let b = &p.budget;
                let mut row = vec![
                    combination.clone(),
                    awareness.label().to_string(),
                    opt(b.dp),
                    opt(b.eop),
                    opt(b.pe),
                    opt(b.ea),
                    opt(b.ind),
                    p.status.clone(),
                    opt(p.acc_star),
                    opt(p.acc_fair),
                ];
                row.extend(residual_columns(p));
                out.write_record(&row)?;
            }
            out.flush().map_err(io_err(&path))?;
            sweeps.push(SweepRecord {
                awareness,
                combination: combination.clone(),
                csv: path,
                points,
            });
        }
    }
    let report = TradeoffReport {
        config_hash: hash,
        sweeps,
    };
    write_json(&config.output_dir.join("tradeoff.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecorrelationRow {
    pub combination: String,
    pub budget: FairnessBudget,
    pub fair: FairLpResult,
    pub outcome: DecorrelationOutcome,
}

/// Mean and population standard deviation over one combination's grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecorrelationSummary {
    pub combination: String,
    pub runs: usize,
    pub baseline_correlation: f64,
    pub correlation_reduction_mean: f64,
    pub correlation_reduction_std: f64,
    pub acc_reduction_mean: f64,
    pub acc_reduction_std: f64,
    pub max_violation: f64,
    pub all_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecorrelationRunReport {
    pub config_hash: String,
    pub awareness: Awareness,
    pub summaries: Vec<DecorrelationSummary>,
    pub warnings: Vec<String>,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// For every budget in the grid: fair scores, decorrelating transfer, and
/// per-run artifacts; then one summary row per combination.
pub fn cmd_decorrelate(config: &RunConfig) -> Result<DecorrelationRunReport> {
    let d = &config.decorrelate;
    if d.combinations.is_empty() {
        return Err(CliError::Config("decorrelate needs at least one combination".into()));
    }
    d.solver.validate()?;
    let joint = load_joint(&config.joint_path())?;
    let v = views(&joint)?;
    let w = neighbor_matrix(config, joint.cells, needs_neighbors(&d.combinations)?)?;
    let hash = config.hash();
    fs::create_dir_all(&config.output_dir).map_err(io_err(&config.output_dir))?;

    let mut jobs = Vec::new();
    for combination in &d.combinations {
        for budget in RunConfig::budgets(combination, &d.grid, d.ind_budget)? {
            jobs.push((combination.clone(), budget));
        }
    }
    let rows: Vec<Result<DecorrelationRow>> = jobs
        .par_iter()
        .map(|(combination, budget)| {
            let fair = fair_solution(&v, budget, d.awareness, &w)?;
            let solver = DecorrelationConfig {
                budget: *budget,
                ..d.solver.clone()
            };
            let outcome = match d.awareness {
                Awareness::Unaware => solve_decorrelation_unaware(&fair.s_fair, &v, &w, &solver)?,
                Awareness::Aware => solve_decorrelation_aware(&fair.s_fair, &v, &w, &solver)?,
            };
            Ok(DecorrelationRow {
                combination: combination.clone(),
                budget: *budget,
                fair,
                outcome,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;

    let aw = d.awareness.label();
    let mut warnings = Vec::new();
    let path = config.output_dir.join(format!("decorrelate_{aw}.csv"));
    let mut out = csv_writer(&path, &hash)?;
    out.write_record([
        "combination", "eps", "acc_star", "acc_fair", "baseline_correlation",
        "final_correlation", "correlation_reduction", "acc_before", "acc_after",
        "acc_reduction", "max_violation", "converged", "outer_iterations",
    ])?;
    for (k, row) in rows.iter().enumerate() {
        let r = &row.outcome.report;
        let eps = budget_vector(&row.budget, 0)
            .into_iter()
            .find(|x| x.is_finite())
            .unwrap_or(f64::NAN);
        if !r.converged {
            warnings.push(format!(
                "{} at {eps}: solver stopped at the iteration cap (max violation {:e})",
                row.combination, r.max_violation
            ));
        }
        warnings.extend(row.fair.warnings.iter().cloned());
        warnings.extend(row.outcome.warnings.iter().cloned());
        out.write_record([
            row.combination.clone(),
            eps.to_string(),
            row.fair.acc_star.to_string(),
            row.fair.acc_fair.to_string(),
            r.baseline_correlation.to_string(),
            r.final_correlation.to_string(),
            r.correlation_reduction.to_string(),
            r.acc_before.to_string(),
            r.acc_after.to_string(),
            r.acc_reduction.to_string(),
            r.max_violation.to_string(),
            r.converged.to_string(),
            row.outcome.multipliers.outer_iterations.to_string(),
        ])?;
        let stem = format!("{aw}_{}_{k}", file_label(&row.combination));
        write_json(&config.output_dir.join(format!("fair_{stem}.json")), &row.fair)?;
        write_json(&config.output_dir.join(format!("transfer_{stem}.json")), &row.outcome)?;
    }
    out.flush().map_err(io_err(&path))?;

    let mut summaries = Vec::new();
    for combination in &d.combinations {
        let group: Vec<&DecorrelationRow> =
            rows.iter().filter(|r| &r.combination == combination).collect();
        let reductions: Vec<f64> = group.iter().map(|r| r.outcome.report.correlation_reduction).collect();
        let acc: Vec<f64> = group.iter().map(|r| r.outcome.report.acc_reduction).collect();
        let (cm, cs) = mean_std(&reductions);
        let (am, as_) = mean_std(&acc);
        summaries.push(DecorrelationSummary {
            combination: combination.clone(),
            runs: group.len(),
            baseline_correlation: group[0].outcome.report.baseline_correlation,
            correlation_reduction_mean: cm,
            correlation_reduction_std: cs,
            acc_reduction_mean: am,
            acc_reduction_std: as_,
            max_violation: group
                .iter()
                .map(|r| r.outcome.report.max_violation)
                .fold(0.0, f64::max),
            all_converged: group.iter().all(|r| r.outcome.report.converged),
        });
    }
    let spath = config.output_dir.join(format!("decorrelate_summary_{aw}.csv"));
    let mut out = csv_writer(&spath, &hash)?;
    out.write_record([
        "combination", "runs", "baseline_correlation", "correlation_reduction_mean",
        "correlation_reduction_std", "acc_reduction_mean", "acc_reduction_std",
        "max_violation", "all_converged",
    ])?;
    for s in &summaries {
        out.write_record([
            s.combination.clone(),
            s.runs.to_string(),
            s.baseline_correlation.to_string(),
            s.correlation_reduction_mean.to_string(),
            s.correlation_reduction_std.to_string(),
            s.acc_reduction_mean.to_string(),
            s.acc_reduction_std.to_string(),
            s.max_violation.to_string(),
            s.all_converged.to_string(),
        ])?;
    }
    out.flush().map_err(io_err(&spath))?;
    let report = DecorrelationRunReport {
        config_hash: hash,
        awareness: d.awareness,
        summaries,
        warnings,
    };
    write_json(&config.output_dir.join(format!("decorrelate_{aw}.json")), &report)?;
    Ok(report)
}

/// TV/PCC between two joint files.
pub fn cmd_metrics(a: &Path, b: &Path) -> Result<FidelityReport> {
    compare_joints(&load_joint(a)?, &load_joint(b)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub error: f64,
    pub confidence: f64,
    pub cells: Option<u64>,
    pub required_samples: Option<u64>,
    pub samples: Option<u64>,
    pub max_cells: Option<u64>,
}

pub fn cmd_bound(
    cells: Option<u64>,
    samples: Option<u64>,
    error: f64,
    confidence: f64,
) -> Result<BoundReport> {
    if cells.is_none() && samples.is_none() {
        return Err(CliError::Config("give --cells, --samples, or both".into()));
    }
    Ok(BoundReport {
        error,
        confidence,
        cells,
        required_samples: cells.map(|n| pac_sample_bound(n, error, confidence)).transpose()?,
        samples,
        max_cells: samples.map(|m| pac_max_cells(m, error, confidence)).transpose()?,
    })
}

#[derive(Debug, Parser)]
#[command(name = "fairbayes", version, about = "Fairness-constrained Bayes classifiers on quantized tabular data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the codebook and tabulate the joint distribution.
    Quantize(QuantizeArgs),
    /// Sweep fairness budgets and write Pareto frontier CSVs.
    Tradeoff(TradeoffArgs),
    /// Learn decorrelating transfers for fair classifiers.
    Decorrelate(DecorrelateArgs),
    /// Compare two joint files.
    Metrics {
        first: PathBuf,
        second: PathBuf,
    },
    /// Sample-size calculator for a cell count, or the reverse.
    Bound {
        #[arg(long)]
        cells: Option<u64>,
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long, default_value_t = 0.05)]
        error: f64,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub joint: Option<PathBuf>,
    #[arg(long)]
    pub codebook: Option<PathBuf>,
    #[arg(long)]
    pub percentile: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct QuantizeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub samples: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub cells: Option<usize>,
    #[arg(long)]
    pub error: Option<f64>,
    #[arg(long)]
    pub confidence: Option<f64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AwarenessArg {
    Unaware,
    Aware,
    Both,
}

impl AwarenessArg {
    fn modes(self) -> Vec<Awareness> {
        match self {
            AwarenessArg::Unaware => vec![Awareness::Unaware],
            AwarenessArg::Aware => vec![Awareness::Aware],
            AwarenessArg::Both => vec![Awareness::Unaware, Awareness::Aware],
        }
    }
}

#[derive(Debug, Args)]
pub struct TradeoffArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Active-set labels, e.g. `DP`, `EOd`, `DP+EA+IF`.
    #[arg(long, value_delimiter = ',')]
    pub combination: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[arg(long)]
    pub ind_budget: Option<f64>,
    #[arg(long, value_enum)]
    pub awareness: Option<AwarenessArg>,
}

#[derive(Debug, Args)]
pub struct DecorrelateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_delimiter = ',')]
    pub combination: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[arg(long)]
    pub ind_budget: Option<f64>,
    #[arg(long, value_enum)]
    pub awareness: Option<AwarenessArg>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub lr_initial: Option<f64>,
    #[arg(long)]
    pub lr_final: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    #[arg(long)]
    pub max_inner: Option<usize>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn base_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut c = match &common.config {
        Some(p) => RunConfig::from_path(p)?,
        None => RunConfig::default(),
    };
    set(&mut c.output_dir, common.out.clone());
    if common.joint.is_some() {
        c.joint = common.joint.clone();
    }
    if common.codebook.is_some() {
        c.codebook = common.codebook.clone();
    }
    set(&mut c.neighbors.percentile, common.percentile);
    set(&mut c.neighbors.theta, common.theta);
    Ok(c)
}

impl QuantizeArgs {
    pub fn config(&self) -> Result<RunConfig> {
        let mut c = base_config(&self.common)?;
        if self.samples.is_some() {
            c.samples = self.samples.clone();
        }
        if self.schema.is_some() {
            c.schema = self.schema.clone();
        }
        if self.reference.is_some() {
            c.reference = self.reference.clone();
        }
        let q = &mut c.quantizer;
        set(&mut q.cells, self.cells);
        set(&mut q.error, self.error);
        set(&mut q.confidence, self.confidence);
        set(&mut q.rel_tol, self.rel_tol);
        set(&mut q.seed, self.seed);
        if self.no_normalize {
            q.normalize = false;
        }
        Ok(c)
    }
}

impl TradeoffArgs {
    pub fn config(&self) -> Result<RunConfig> {
        let mut c = base_config(&self.common)?;
        let t = &mut c.tradeoff;
        set(&mut t.combinations, self.combination.clone());
        set(&mut t.grid, self.grid.clone());
        if self.ind_budget.is_some() {
            t.ind_budget = self.ind_budget;
        }
        set(&mut t.awareness, self.awareness.map(AwarenessArg::modes));
        Ok(c)
    }
}

impl DecorrelateArgs {
    pub fn config(&self) -> Result<RunConfig> {
        let mut c = base_config(&self.common)?;
        let d = &mut c.decorrelate;
        set(&mut d.combinations, self.combination.clone());
        set(&mut d.grid, self.grid.clone());
        if self.ind_budget.is_some() {
            d.ind_budget = self.ind_budget;
        }
        match self.awareness {
            Some(AwarenessArg::Both) => {
                return Err(CliError::Config("decorrelate runs one awareness mode at a time".into()))
            }
            Some(a) => d.awareness = a.modes()[0],
            None => {}
        }
        let s = &mut d.solver;
        set(&mut s.lambda, self.lambda);
        set(&mut s.beta, self.beta);
        set(&mut s.tau, self.tau);
        set(&mut s.lr_initial, self.lr_initial);
        set(&mut s.lr_final, self.lr_final);
        set(&mut s.momentum, self.momentum);
        set(&mut s.tolerance, self.tolerance);
        set(&mut s.max_outer, self.max_outer);
        set(&mut s.max_inner, self.max_inner);
        Ok(c)
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn warn_all(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Quantize(args) => {
            let summary = cmd_quantize(&args.config()?)?;
            warn_all(&summary.warnings);
            print_json(&summary)
        }
        Command::Tradeoff(args) => {
            let report = cmd_tradeoff(&args.config()?)?;
            for s in &report.sweeps {
                let infeasible = s.points.iter().filter(|p| p.status != "optimal").count();
                println!(
                    "{} {}: {} points ({} not optimal) -> {}",
                    s.awareness.label(),
                    s.combination,
                    s.points.len(),
                    infeasible,
                    s.csv.display()
                );
            }
            Ok(())
        }
        Command::Decorrelate(args) => {
            let report = cmd_decorrelate(&args.config()?)?;
            warn_all(&report.warnings);
            print_json(&report.summaries)
        }
        Command::Metrics { first, second } => print_json(&cmd_metrics(&first, &second)?),
        Command::Bound {
            cells,
            samples,
            error,
            confidence,
        } => print_json(&cmd_bound(cells, samples, error, confidence)?),
    }
}

/// Parses `args`, runs the command, reports errors on stderr, and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("error: kind={} message={message}", e.kind());
            e.exit_code()
        }
    }
}
