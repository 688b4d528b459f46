//! One driver per experiment. Each `cmd_*` writes into the configured
//! output directory, finishes with a `manifest.json`, and returns a summary.

use std::fmt;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::corpus::{load_corpus, Corpus, CorpusFormat};
use crate::error::{Error, Result};
use crate::pairing::{
    bootstrap_slope_difference_se, correlation_csv, correlation_experiment, correlation_fit_csv, gold_agreement,
    pairs_csv, CorrelationReport, PairMode, PairSampler,
};
use crate::scores::{
    aggregate, align_scores, calibration_of, ece_curve_csv, load_external_scores, reliability_csv, scores_to_jsonl,
    CalibrationPoint, ScoreVector,
};
use crate::simulator::{generate_world, simulate_draws, WorldConfig};
use crate::student::{
    finite_difference_check, gradient_bias_check, pipeline_with_segments, Architecture, Arm, FiniteDifferenceReport,
    GradientMutation, LossKind, UnbiasedReport,
};

use super::config::RunConfig;
use super::output::{write_manifest, OutputDir};

enum Source {
    Simulated(WorldConfig),
    /// Score sets in file order, all classes mixed.
    Ingested(Vec<Vec<ScoreVector>>),
}

/// The corpus and score source for one replica.
struct Dataset {
    corpus: Corpus,
    source: Source,
}

impl Dataset {
    fn load(config: &RunConfig, replica: usize) -> Result<Self> {
        match &config.inputs.corpus {
            Some(path) => {
                let corpus = load_corpus(path, CorpusFormat::Jsonl)?;
                if config.inputs.scores.is_empty() {
                    return Err(Error::Config("inputs.corpus is set but inputs.scores is empty".into()));
                }
                let sets = config
                    .inputs
                    .scores
                    .iter()
                    .map(|p| load_external_scores(p, &corpus))
                    .collect::<Result<_>>()?;
                Ok(Dataset {
                    corpus,
                    source: Source::Ingested(sets),
                })
            }
            None => {
                let world = config.world_for(replica);
                Ok(Dataset {
                    corpus: generate_world(&world)?,
                    source: Source::Simulated(world),
                })
            }
        }
    }

    fn simulated_scores(&self, world: &WorldConfig, k: usize, class: usize) -> Result<Vec<ScoreVector>> {
        simulate_draws(&self.corpus, k, world, class)?
            .iter()
            .map(aggregate)
            .collect()
    }

    fn calibration_curve(&self, config: &RunConfig) -> Result<Vec<CalibrationPoint>> {
        let class = config.experiment.class;
        let m = config.experiment.buckets;
        match &self.source {
            Source::Simulated(world) => config
                .experiment
                .k_values
                .iter()
                .map(|&k| calibration_of(&self.corpus, &self.simulated_scores(world, k, class)?, class, m))
                .collect(),
            Source::Ingested(sets) => sets
                .iter()
                .map(|set| calibration_of(&self.corpus, &align_scores(&self.corpus, set, class)?, class, m))
                .collect(),
        }
    }

    /// Aligned scores used for pairing and pretraining.
    fn training_scores(&self, config: &RunConfig) -> Result<Vec<ScoreVector>> {
        let class = config.experiment.class;
        match &self.source {
            Source::Simulated(world) => self.simulated_scores(world, config.experiment.train_k, class),
            Source::Ingested(sets) => align_scores(&self.corpus, sets.last().expect("checked non-empty"), class),
        }
    }
}

// The output location is not part of the experiment, so it is left out of
// the hashed config.
fn finish(out: &mut OutputDir, command: &str, config: &RunConfig) -> Result<()> {
    let hashed = RunConfig {
        output_dir: Default::default(),
        ..config.clone()
    };
    write_manifest(out, command, &hashed.to_toml()?, config.seed)
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Clone, Debug, PartialEq)]
pub struct SimulateSummary {
    pub dialogues: usize,
    pub utterances: usize,
    pub files: Vec<String>,
}

impl fmt::Display for SimulateSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "simulated {} dialogues ({} utterances)",
            self.dialogues, self.utterances
        )?;
        for file in &self.files {
            writeln!(f, "  {file}")?;
        }
        Ok(())
    }
}

fn run_simulate(config: &RunConfig, out: &mut OutputDir) -> Result<SimulateSummary> {
    let world = config.world_for(0);
    let corpus = generate_world(&world)?;
    let mut files = vec!["corpus.jsonl".to_string()];
    out.write("corpus.jsonl", &corpus.to_jsonl()?)?;
    for &k in &config.experiment.k_values {
        let mut all = Vec::new();
        for class in 0..world.n_classes {
            for draws in simulate_draws(&corpus, k, &world, class)? {
                all.push(aggregate(&draws)?);
            }
        }
        let name = format!("scores/k{k}.jsonl");
        out.write(&name, &scores_to_jsonl(&all)?)?;
        files.push(name);
    }
    Ok(SimulateSummary {
        dialogues: corpus.len(),
        utterances: corpus.n_utterances(),
        files,
    })
}

pub fn cmd_simulate(config: &RunConfig) -> Result<SimulateSummary> {
    config.validate()?;
    let mut out = OutputDir::create(&config.output_dir)?;
    let summary = run_simulate(config, &mut out)?;
    finish(&mut out, "simulate", config)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// ece

#[derive(Clone, Debug, PartialEq)]
pub struct EceSummary {
    pub points: Vec<CalibrationPoint>,
}

impl EceSummary {
    fn by_k(&self, largest: bool) -> &CalibrationPoint {
        let iter = self.points.iter();
        if largest {
            iter.max_by_key(|p| p.k)
        } else {
            iter.min_by_key(|p| p.k)
        }
        .expect("at least one ensemble size")
    }

    pub fn smallest_k(&self) -> &CalibrationPoint {
        self.by_k(false)
    }

    pub fn largest_k(&self) -> &CalibrationPoint {
        self.by_k(true)
    }

    /// Relative ECE reduction from the smallest to the largest ensemble.
    pub fn relative_reduction(&self) -> f64 {
        let first = self.smallest_k().ece;
        if first == 0.0 {
            return 0.0;
        }
        (first - self.largest_k().ece) / first
    }
}

impl fmt::Display for EceSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (lo, hi) = (self.smallest_k(), self.largest_k());
        let trend = match hi.ece.partial_cmp(&lo.ece) {
            Some(std::cmp::Ordering::Less) => "decreasing",
            Some(std::cmp::Ordering::Greater) => "increasing",
            _ => "flat",
        };
        writeln!(
            f,
            "ECE(k={}) = {:.6}, ECE(k={}) = {:.6}, trend {trend}",
            lo.k, lo.ece, hi.k, hi.ece
        )
    }
}

fn run_ece(config: &RunConfig, out: &mut OutputDir) -> Result<EceSummary> {
    let data = Dataset::load(config, 0)?;
    let points = data.calibration_curve(config)?;
    out.write("ece_curve.csv", &ece_curve_csv(&points))?;
    out.write("reliability.csv", &reliability_csv(&points))?;
    Ok(EceSummary { points })
}

pub fn cmd_ece(config: &RunConfig) -> Result<EceSummary> {
    config.validate()?;
    let mut out = OutputDir::create(&config.output_dir)?;
    let summary = run_ece(config, &mut out)?;
    finish(&mut out, "ece", config)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// correlation

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationReplica {
    pub replica: usize,
    pub slope_intra: Option<f64>,
    pub slope_cross: Option<f64>,
    pub bootstrap_se: Option<f64>,
}

impl CorrelationReplica {
    pub fn difference(&self) -> Option<f64> {
        Some(self.slope_intra? - self.slope_cross?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationSummary {
    /// Bucket tables of the first replica.
    pub report: CorrelationReport,
    pub replicas: Vec<CorrelationReplica>,
}

impl CorrelationSummary {
    pub fn intra_steeper_count(&self) -> usize {
        self.replicas
            .iter()
            .filter(|r| r.difference().is_some_and(|d| d > 0.0))
            .count()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".into(), |x| format!("{x:.6}"))
}

impl fmt::Display for CorrelationSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.replicas {
            writeln!(
                f,
                "replica {}: slope intra {} cross {} difference {} (bootstrap se {})",
                r.replica,
                fmt_opt(r.slope_intra),
                fmt_opt(r.slope_cross),
                fmt_opt(r.difference()),
                fmt_opt(r.bootstrap_se)
            )?;
        }
        writeln!(
            f,
            "intra steeper in {} of {} replicas",
            self.intra_steeper_count(),
            self.replicas.len()
        )
    }
}

struct CorrelationRun {
    report: CorrelationReport,
    intra_csv: String,
    cross_csv: String,
    replica: CorrelationReplica,
}

fn correlation_replica(config: &RunConfig, replica: usize) -> Result<CorrelationRun> {
    let e = &config.experiment;
    let data = Dataset::load(config, replica)?;
    let scores = data.training_scores(config)?;
    let seed = config.replica_seed("correlation", replica);
    let sample = |mode| {
        PairSampler {
            mode,
            pairs_per_dialogue: e.pairs_per_dialogue,
            threshold: e.threshold,
            seed,
        }
        .sample(&data.corpus, &scores)
    };
    let intra = sample(PairMode::Intra)?;
    let cross = sample(PairMode::Cross)?;
    let report = correlation_experiment(&data.corpus, &intra, &cross, e.class, e.buckets)?;
    let bootstrap_se = bootstrap_slope_difference_se(
        &gold_agreement(&data.corpus, &intra, e.class)?,
        &gold_agreement(&data.corpus, &cross, e.class)?,
        e.buckets,
        e.bootstrap_replicates,
        seed,
    );
    Ok(CorrelationRun {
        replica: CorrelationReplica {
            replica,
            slope_intra: report.intra.slope(),
            slope_cross: report.cross.slope(),
            bootstrap_se,
        },
        intra_csv: pairs_csv(&intra),
        cross_csv: pairs_csv(&cross),
        report,
    })
}

fn run_correlation(config: &RunConfig, out: &mut OutputDir) -> Result<CorrelationSummary> {
    let mut runs: Vec<CorrelationRun> = (0..config.experiment.n_seeds)
        .into_par_iter()
        .map(|r| correlation_replica(config, r))
        .collect::<Result<_>>()?;
    let first = runs.remove(0);
    out.write("pairs_intra.csv", &first.intra_csv)?;
    out.write("pairs_cross.csv", &first.cross_csv)?;
    out.write("correlation.csv", &correlation_csv(&first.report))?;
    out.write("correlation_fit.csv", &correlation_fit_csv(&first.report))?;
    let replicas: Vec<CorrelationReplica> = std::iter::once(first.replica)
        .chain(runs.into_iter().map(|r| r.replica))
        .collect();
    let mut summary = String::from("replica,slope_intra,slope_cross,difference,bootstrap_se\n");
    for r in &replicas {
        let _ = writeln!(
            summary,
            "{},{},{},{},{}",
            r.replica,
            fmt_opt(r.slope_intra),
            fmt_opt(r.slope_cross),
            fmt_opt(r.difference()),
            fmt_opt(r.bootstrap_se)
        );
    }
    out.write("correlation_summary.csv", &summary)?;
    Ok(CorrelationSummary {
        report: first.report,
        replicas,
    })
}

pub fn cmd_correlation(config: &RunConfig) -> Result<CorrelationSummary> {
    config.validate()?;
    let mut out = OutputDir::create(&config.output_dir)?;
    let summary = run_correlation(config, &mut out)?;
    finish(&mut out, "correlation", config)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// downsample

#[derive(Clone, Debug, PartialEq)]
pub struct DownsampleRow {
    pub arm: Arm,
    pub gold_fraction: f64,
    pub replica: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DownsampleSummary {
    pub rows: Vec<DownsampleRow>,
}

impl DownsampleSummary {
    pub fn mean_accuracy(&self, arm: Arm, gold_fraction: f64) -> Option<f64> {
        let values: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.arm == arm && r.gold_fraction == gold_fraction)
            .map(|r| r.accuracy)
            .collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }

    pub fn fractions(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.gold_fraction) {
                out.push(r.gold_fraction);
            }
        }
        out
    }
}

impl fmt::Display for DownsampleSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<20}", "arm")?;
        let fractions = self.fractions();
        for g in &fractions {
            write!(f, "{:>10}", format!("{}%", g * 100.0))?;
        }
        writeln!(f)?;
        for arm in Arm::ALL {
            write!(f, "{:<20}", arm.name())?;
            for &g in &fractions {
                write!(f, "{:>10.4}", self.mean_accuracy(arm, g).unwrap_or(f64::NAN))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn downsample_replica(config: &RunConfig, replica: usize) -> Result<Vec<DownsampleRow>> {
    let data = Dataset::load(config, replica)?;
    let scores = data.training_scores(config)?;
    let pipeline = config.pipeline_for(replica);
    let segments = data.corpus.segments(&pipeline.segments)?;
    let mut rows = Vec::new();
    for &gold_fraction in &config.experiment.gold_fractions {
        for arm in Arm::ALL {
            let outcome = pipeline_with_segments(&data.corpus, &segments, &scores, gold_fraction, arm, &pipeline)?;
            rows.push(DownsampleRow {
                arm,
                gold_fraction,
                replica,
                accuracy: outcome.accuracy,
            });
        }
    }
    Ok(rows)
}

fn run_downsample(config: &RunConfig, out: &mut OutputDir) -> Result<DownsampleSummary> {
    let per_replica: Vec<Vec<DownsampleRow>> = (0..config.experiment.n_seeds)
        .into_par_iter()
        .map(|r| downsample_replica(config, r))
        .collect::<Result<_>>()?;
    let mut rows: Vec<DownsampleRow> = per_replica.into_iter().flatten().collect();
    let fraction_rank = |g: f64| config.experiment.gold_fractions.iter().position(|&x| x == g);
    rows.sort_by_key(|r| (r.arm as usize, fraction_rank(r.gold_fraction), r.replica));
    let summary = DownsampleSummary { rows };

    let mut csv = String::from("arm,gold_fraction,seed,accuracy\n");
    for r in &summary.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{:.6}",
            r.arm.name(),
            r.gold_fraction,
            r.replica,
            r.accuracy
        );
    }
    out.write("downsample.csv", &csv)?;
    let mut means = String::from("arm,gold_fraction,mean_accuracy\n");
    for arm in Arm::ALL {
        for &g in &config.experiment.gold_fractions {
            if let Some(m) = summary.mean_accuracy(arm, g) {
                let _ = writeln!(means, "{},{},{:.6}", arm.name(), g, m);
            }
        }
    }
    out.write("downsample_summary.csv", &means)?;
    Ok(summary)
}

pub fn cmd_downsample(config: &RunConfig) -> Result<DownsampleSummary> {
    config.validate()?;
    let mut out = OutputDir::create(&config.output_dir)?;
    let summary = run_downsample(config, &mut out)?;
    finish(&mut out, "downsample", config)?;
    Ok(summary)
}

// ---------------------------------------------------------------------------
// gradcheck

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub tolerance: f64,
    pub z_limit: f64,
    pub control_z_min: f64,
    pub finite_difference: Vec<FiniteDifferenceReport>,
    pub unbiased: Vec<UnbiasedReport>,
    pub control: UnbiasedReport,
}

impl GradcheckReport {
    pub fn finite_difference_ok(&self) -> bool {
        self.finite_difference
            .iter()
            .all(|r| r.max_relative_error < self.tolerance)
    }

    pub fn unbiased_ok(&self) -> bool {
        self.unbiased.iter().all(|r| r.max_abs_z < self.z_limit)
    }

    pub fn control_ok(&self) -> bool {
        self.control.max_abs_z > self.control_z_min
    }

    pub fn passed(&self) -> bool {
        self.finite_difference_ok() && self.unbiased_ok() && self.control_ok()
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("check,arch,loss,worst_instance,worst_component,worst_value,statistic,threshold,pass\n");
        for r in &self.finite_difference {
            let arch = match r.architecture {
                Architecture::Linear => "linear",
                Architecture::Mlp1 { .. } => "mlp1",
            };
            let loss = match r.loss {
                LossKind::Pointwise => "pointwise",
                LossKind::Pairwise => "pairwise",
            };
            let _ = writeln!(
                out,
                "finite_difference,{arch},{loss},{},{},{:.6e},{:.6e},{:e},{}",
                r.worst_instance,
                r.worst_component,
                r.worst_analytic,
                r.max_relative_error,
                self.tolerance,
                r.max_relative_error < self.tolerance
            );
        }
        for (seed, r) in self.unbiased.iter().enumerate() {
            let _ = writeln!(
                out,
                "unbiased_seed{seed},linear,pointwise,,{},{:.6},{:.6},{},{}",
                r.worst_component,
                r.z[r.worst_component],
                r.max_abs_z,
                self.z_limit,
                r.max_abs_z < self.z_limit
            );
        }
        let r = &self.control;
        let _ = writeln!(
            out,
            "miscalibrated_control,linear,pointwise,,{},{:.6},{:.6},{},{}",
            r.worst_component,
            r.z[r.worst_component],
            r.max_abs_z,
            self.control_z_min,
            self.control_ok()
        );
        out
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.finite_difference {
            writeln!(
                f,
                "finite difference {:?}/{:?}: max relative error {:.3e} (instance {}, component {}: analytic {:.6e} vs numeric {:.6e})",
                r.architecture, r.loss, r.max_relative_error, r.worst_instance, r.worst_component, r.worst_analytic, r.worst_numeric
            )?;
        }
        for (seed, r) in self.unbiased.iter().enumerate() {
            writeln!(
                f,
                "unbiased seed {seed}: max |z| {:.3} at component {}",
                r.max_abs_z, r.worst_component
            )?;
        }
        writeln!(
            f,
            "miscalibrated control: max |z| {:.3} at component {}",
            self.control.max_abs_z, self.control.worst_component
        )?;
        writeln!(f, "{}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

/// Gradient checks with an optional deliberately corrupted gradient.
pub fn gradcheck_report(config: &RunConfig, mutation: GradientMutation) -> Result<GradcheckReport> {
    let g = &config.gradcheck;
    let seed = config.replica_seed("gradcheck", 0);
    let mut finite_difference = Vec::new();
    for arch in [Architecture::Linear, Architecture::Mlp1 { hidden: g.hidden }] {
        for loss in [LossKind::Pointwise, LossKind::Pairwise] {
            finite_difference.push(finite_difference_check(arch, loss, g.d, g.instances, seed, mutation));
        }
    }
    let unbiased = (0..g.unbiased_seeds)
        .into_par_iter()
        .map(|s| gradient_bias_check(g.unbiased_d, g.unbiased_draws, config.replica_seed("unbiased", s), 0.0))
        .collect::<Result<_>>()?;
    let control = gradient_bias_check(
        g.unbiased_d,
        g.unbiased_draws,
        config.replica_seed("unbiased", 0),
        g.control_shift,
    )?;
    Ok(GradcheckReport {
        tolerance: g.tolerance,
        z_limit: g.z_limit,
        control_z_min: g.control_z_min,
        finite_difference,
        unbiased,
        control,
    })
}

fn run_gradcheck(config: &RunConfig, out: &mut OutputDir) -> Result<GradcheckReport> {
    let report = gradcheck_report(config, GradientMutation::None)?;
    out.write("gradcheck.csv", &report.to_csv())?;
    Ok(report)
}

pub fn cmd_gradcheck(config: &RunConfig) -> Result<GradcheckReport> {
    config.validate()?;
    let mut out = OutputDir::create(&config.output_dir)?;
    let report = run_gradcheck(config, &mut out)?;
    finish(&mut out, "gradcheck", config)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// all

#[derive(Clone, Debug, PartialEq)]
pub struct AllSummary {
    pub simulate: SimulateSummary,
    pub ece: EceSummary,
    pub correlation: CorrelationSummary,
    pub downsample: DownsampleSummary,
    pub gradcheck: GradcheckReport,
}

impl fmt::Display for AllSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\n{}\n{}\n{}\n{}",
            self.simulate, self.ece, self.correlation, self.downsample, self.gradcheck
        )
    }
}

pub fn cmd_all(config: &RunConfig) -> Result<AllSummary> {
    config.validate()?;
    let mut out = OutputDir::create(&config.output_dir)?;
    let summary = AllSummary {
        simulate: run_simulate(config, &mut out)?,
        ece: run_ece(config, &mut out)?,
        correlation: run_correlation(config, &mut out)?,
        downsample: run_downsample(config, &mut out)?,
        gradcheck: run_gradcheck(config, &mut out)?,
    };
    finish(&mut out, "all", config)?;
    Ok(summary)
}
