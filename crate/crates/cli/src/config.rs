//! Configuration ingestion: a JSON file describes either a single experiment
//! or a sweep over one axis. Parsing applies defaults (ζ = 0.995, confidence
//! level = 0.95), validates every semantic invariant at once (the error lists
//! all violations, not just the first), and produces both the ready-to-run
//! core objects and a canonical digest of the effective configuration.

use std::fmt;
use std::path::Path;

use nnlab_core::bounds::DatasetSizeRule;
use nnlab_core::distributions::{DensityBoundRule, DistributionSpec, QuerySpec};
use nnlab_core::metric::{Epsilon, PNorm};
use nnlab_core::montecarlo::ExperimentConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// serde_json's message carries the line/column and the offending field.
    #[error("config parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config {path}: {}", violations.join("; "))]
    Invalid {
        path: String,
        violations: Vec<String>,
    },
}

impl ConfigError {
    pub fn violations(&self) -> &[String] {
        match self {
            Self::Invalid { violations, .. } => violations,
            _ => &[],
        }
    }
}

// ---------------------------------------------------------------------------
// File schema. Serialization of these structs is the canonical form: field
// order is fixed by declaration, so digests are stable under re-serialization.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: ExperimentSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    /// Fault-injection knob for the `check` subcommand's negative control:
    /// scales the deviation tail bound before comparison, so a scale well
    /// below 1 makes the battery provably fail. Absent in honest runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_fixture: Option<CheckFixture>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub distribution: DistributionSection,
    pub dataset_size: SizeSection,
    pub p: f64,
    pub epsilon: f64,
    #[serde(default = "default_query")]
    pub query: QuerySection,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_bound: Option<DensityBoundSection>,
}

fn default_query() -> QuerySection {
    QuerySection::Center
}

fn default_trials() -> usize {
    nnlab_core::montecarlo::DEFAULT_CLASSIFICATION_TRIALS
}

fn default_zeta() -> f64 {
    ExperimentConfig::DEFAULT_ZETA
}

fn default_confidence() -> f64 {
    ExperimentConfig::DEFAULT_CONFIDENCE
}

fn default_estimators() -> Vec<EstimatorKind> {
    vec![EstimatorKind::Instability]
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistributionSection {
    UniformCube {
        d: usize,
    },
    SlabMixture {
        d: usize,
        weight: f64,
        axis: usize,
    },
    GaussianEllipsoid {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        means: Option<Vec<f64>>,
        stddevs: StddevSection,
    },
}

/// Gaussian spectra: an explicit list, a constant fill, or the power decay
/// λ_j = j^(−exponent). The shorthand forms carry their own dimension so the
/// spectrum can follow a d-axis sweep.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum StddevSection {
    List(Vec<f64>),
    Fill { d: usize, value: f64 },
    Power { d: usize, exponent: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SizeSection {
    Constant { n: u64 },
    Polynomial { coefficient: f64, exponent: f64 },
    Exponential { base: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum QuerySection {
    Center,
    Corner,
    UniformRandom(usize),
    Explicit(Vec<Vec<f64>>),
}

/// Declared growth rule for the density supremum β(d). The theory requires
/// sub-exponential growth, so an exponential evaluator is parseable but never
/// valid — rejecting it is a semantic check with a dedicated message.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensityBoundSection {
    Constant { value: f64 },
    Polynomial { coefficient: f64, exponent: f64 },
    Exponential { base: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Instability,
    Deviation,
    ZRatio,
    RelativeVariance,
    RelativeContrast,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Instability => "instability",
            Self::Deviation => "deviation",
            Self::ZRatio => "z-ratio",
            Self::RelativeVariance => "relative-variance",
            Self::RelativeContrast => "relative-contrast",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: AxisKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometric: Option<GeometricProgression>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeometricProgression {
    pub start: f64,
    pub factor: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum AxisKind {
    D,
    N,
    Epsilon,
    P,
    Omega,
    Zeta,
}

impl fmt::Display for AxisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::D => "d",
            Self::N => "n",
            Self::Epsilon => "epsilon",
            Self::P => "p",
            Self::Omega => "omega",
            Self::Zeta => "zeta",
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CheckFixture {
    pub deviation_bound_scale: f64,
}

// ---------------------------------------------------------------------------
// Parsed form: core objects ready to run, plus the canonical digest.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ResolvedSweep {
    pub axis: AxisKind,
    pub points: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ParsedConfig {
    pub file: ConfigFile,
    pub digest: String,
    pub experiment: ExperimentConfig,
    pub sweep: Option<ResolvedSweep>,
}

/// SHA-256 over the canonical serialization of the effective (defaults
/// applied) configuration. Stable under emit → re-parse → re-digest.
pub fn config_digest(file: &ConfigFile) -> String {
    let canonical = serde_json::to_vec(file).expect("config serialization cannot fail");
    let hash = Sha256::digest(&canonical);
    hash.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse_config(path: &Path) -> Result<ParsedConfig, ConfigError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: display.clone(),
        source,
    })?;
    parse_config_str(&text, &display)
}

pub fn parse_config_str(text: &str, origin: &str) -> Result<ParsedConfig, ConfigError> {
    let file: ConfigFile = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    resolve(file, origin)
}

/// Re-validates an already-deserialized configuration (used after in-memory
/// edits such as a command-line seed override; the digest reflects the edit).
pub fn resolve_config(file: ConfigFile, origin: &str) -> Result<ParsedConfig, ConfigError> {
    resolve(file, origin)
}

/// Maximum sweep size: sweep indices occupy a 12-bit stream lane.
pub const MAX_SWEEP_POINTS: usize =
    nnlab_core::montecarlo::stream::MAX_SWEEP_INDEX as usize + 1;

fn resolve(file: ConfigFile, origin: &str) -> Result<ParsedConfig, ConfigError> {
    let mut violations = Vec::new();
    let experiment = build_experiment(&file.experiment, &mut violations);
    let sweep = match &file.sweep {
        Some(section) => resolve_sweep(section, &file.experiment, &mut violations),
        None => None,
    };
    if let Some(fixture) = &file.check_fixture {
        if !fixture.deviation_bound_scale.is_finite() || fixture.deviation_bound_scale <= 0.0 {
            violations.push(format!(
                "check_fixture.deviation_bound_scale: must be a positive finite number, got {}",
                fixture.deviation_bound_scale
            ));
        }
    }
    match experiment {
        Some(experiment) if violations.is_empty() => Ok(ParsedConfig {
            digest: config_digest(&file),
            file,
            experiment,
            sweep,
        }),
        _ => Err(ConfigError::Invalid {
            path: origin.to_string(),
            violations,
        }),
    }
}

pub fn build_distribution(
    section: &DistributionSection,
    violations: &mut Vec<String>,
) -> Option<DistributionSpec> {
    match section {
        DistributionSection::UniformCube { d } => DistributionSpec::uniform_cube(*d)
            .map_err(|e| violations.push(format!("experiment.distribution: {e}")))
            .ok(),
        DistributionSection::SlabMixture { d, weight, axis } => {
            DistributionSpec::slab_mixture(*d, *weight, *axis)
                .map_err(|e| violations.push(format!("experiment.distribution: {e}")))
                .ok()
        }
        DistributionSection::GaussianEllipsoid { means, stddevs } => {
            let stddevs = resolve_stddevs(stddevs);
            let means = means
                .clone()
                .unwrap_or_else(|| vec![0.0; stddevs.len()]);
            DistributionSpec::gaussian_ellipsoid(means, stddevs)
                .map_err(|e| violations.push(format!("experiment.distribution: {e}")))
                .ok()
        }
    }
}

pub fn resolve_stddevs(section: &StddevSection) -> Vec<f64> {
    match section {
        StddevSection::List(values) => values.clone(),
        StddevSection::Fill { d, value } => vec![*value; *d],
        StddevSection::Power { d, exponent } => (1..=*d)
            .map(|j| (j as f64).powf(-exponent))
            .collect(),
    }
}

pub fn build_size_rule(
    section: &SizeSection,
    violations: &mut Vec<String>,
) -> Option<DatasetSizeRule> {
    let result = match section {
        SizeSection::Constant { n } => DatasetSizeRule::constant(*n),
        SizeSection::Polynomial {
            coefficient,
            exponent,
        } => DatasetSizeRule::polynomial(*coefficient, *exponent),
        SizeSection::Exponential { base } => DatasetSizeRule::exponential(*base),
    };
    result
        .map_err(|e| violations.push(format!("experiment.dataset_size: {e}")))
        .ok()
}

fn build_query(section: &QuerySection) -> QuerySpec {
    match section {
        QuerySection::Center => QuerySpec::Center,
        QuerySection::Corner => QuerySpec::Corner,
        QuerySection::UniformRandom(count) => QuerySpec::UniformRandom(*count),
        QuerySection::Explicit(points) => QuerySpec::Explicit(points.clone()),
    }
}

/// Builds the runnable experiment for one (possibly sweep-derived) section,
/// returning every violated invariant on failure.
pub fn experiment_from_section(
    section: &ExperimentSection,
) -> Result<ExperimentConfig, Vec<String>> {
    let mut violations = Vec::new();
    match build_experiment(section, &mut violations) {
        Some(config) if violations.is_empty() => Ok(config),
        _ => Err(violations),
    }
}

fn build_experiment(
    section: &ExperimentSection,
    violations: &mut Vec<String>,
) -> Option<ExperimentConfig> {
    let spec = build_distribution(&section.distribution, violations);
    let size_rule = build_size_rule(&section.dataset_size, violations);
    let p = PNorm::new(section.p)
        .map_err(|e| violations.push(format!("experiment.p: {e}")))
        .ok();
    let epsilon = Epsilon::new(section.epsilon)
        .map_err(|e| violations.push(format!("experiment.epsilon: {e}")))
        .ok();
    if section.estimators.is_empty() {
        violations.push("experiment.estimators: at least one estimator is required".into());
    }
    if let QuerySection::UniformRandom(count) = &section.query {
        if *count == 0 {
            violations.push("experiment.query: uniform-random query count must be ≥ 1".into());
        }
    }
    // Checked upfront (not only via the constructors below) so a broken
    // distribution does not mask these violations in the report.
    if section.trials == 0 {
        violations.push("experiment.trials: at least one trial is required".into());
    }
    if let Err(e) = nnlab_core::bounds::check_zeta(section.zeta) {
        violations.push(format!(
            "experiment.zeta: {e} (the stability threshold requires 99/100 < ζ < 1)"
        ));
    }
    if !section.confidence.is_finite() || section.confidence <= 0.0 || section.confidence >= 1.0 {
        violations.push(format!(
            "experiment.confidence: confidence level must lie in (0, 1), got {}",
            section.confidence
        ));
    }
    validate_density_bound(section, spec.as_ref(), violations);
    if !violations.is_empty() {
        return None;
    }

    let config = ExperimentConfig::new(
        spec?,
        size_rule?,
        p?,
        epsilon?,
        build_query(&section.query),
        section.trials,
        section.seed,
    )
    .map_err(|e| violations.push(format!("experiment.trials: {e}")))
    .ok()?;
    let config = config
        .with_zeta(section.zeta)
        .map_err(|e| violations.push(format!("experiment.zeta: {e}")))
        .ok()?;
    config
        .with_confidence(section.confidence)
        .map_err(|e| violations.push(format!("experiment.confidence: {e}")))
        .ok()
}

fn validate_density_bound(
    section: &ExperimentSection,
    spec: Option<&DistributionSpec>,
    violations: &mut Vec<String>,
) {
    let Some(bound) = &section.density_bound else {
        return;
    };
    let rule = match bound {
        DensityBoundSection::Exponential { base } => {
            violations.push(format!(
                "experiment.density_bound: rule 'exponential' (base {base}) contradicts the \
                 sub-exponential growth requirement on β(d); use 'constant' or 'polynomial'"
            ));
            return;
        }
        DensityBoundSection::Constant { value } => DensityBoundRule::constant(*value),
        DensityBoundSection::Polynomial {
            coefficient,
            exponent,
        } => DensityBoundRule::polynomial(*coefficient, *exponent),
    };
    let rule = match rule {
        Ok(rule) => rule,
        Err(e) => {
            violations.push(format!("experiment.density_bound: {e}"));
            return;
        }
    };
    if let Some(spec) = spec {
        match spec.density_sup() {
            Ok(sup) => {
                let declared = rule.evaluate(spec.dim());
                if declared < sup {
                    violations.push(format!(
                        "experiment.density_bound: declared bound {declared} at d = {} is below \
                         the law's density supremum {sup}",
                        spec.dim()
                    ));
                }
            }
            Err(_) => violations.push(
                "experiment.density_bound: the Gaussian law has no density supremum bound; \
                 remove this field"
                    .into(),
            ),
        }
    }
}

fn resolve_sweep(
    section: &SweepSection,
    experiment: &ExperimentSection,
    violations: &mut Vec<String>,
) -> Option<ResolvedSweep> {
    let points = match (&section.values, &section.geometric) {
        (Some(_), Some(_)) => {
            violations
                .push("sweep: give either explicit 'values' or a 'geometric' rule, not both".into());
            return None;
        }
        (None, None) => {
            violations.push("sweep: one of 'values' or 'geometric' is required".into());
            return None;
        }
        (Some(values), None) => values.clone(),
        (None, Some(progression)) => {
            if !progression.start.is_finite() || progression.start <= 0.0 {
                violations.push(format!(
                    "sweep.geometric.start: must be positive and finite, got {}",
                    progression.start
                ));
                return None;
            }
            if !progression.factor.is_finite() || progression.factor <= 1.0 {
                violations.push(format!(
                    "sweep.geometric.factor: must exceed 1 for a strictly increasing sweep, got {}",
                    progression.factor
                ));
                return None;
            }
            if progression.count == 0 {
                violations.push("sweep.geometric.count: must be ≥ 1".into());
                return None;
            }
            (0..progression.count)
                .map(|i| progression.start * progression.factor.powi(i as i32))
                .collect()
        }
    };

    if points.is_empty() {
        violations.push("sweep.values: at least one axis value is required".into());
        return None;
    }
    if points.len() > MAX_SWEEP_POINTS {
        violations.push(format!(
            "sweep: {} points exceed the stream-lane budget of {MAX_SWEEP_POINTS}",
            points.len()
        ));
        return None;
    }
    if points.windows(2).any(|w| w[0] >= w[1]) {
        violations.push("sweep.values: axis values must be strictly increasing".into());
    }
    validate_axis_values(section.axis, &points, experiment, violations);
    Some(ResolvedSweep {
        axis: section.axis,
        points,
    })
}

fn validate_axis_values(
    axis: AxisKind,
    points: &[f64],
    experiment: &ExperimentSection,
    violations: &mut Vec<String>,
) {
    let all_positive_integers = points
        .iter()
        .all(|v| v.is_finite() && *v >= 1.0 && v.fract() == 0.0);
    match axis {
        AxisKind::D => {
            if !all_positive_integers {
                violations.push("sweep.values: the d axis needs positive integers".into());
            }
            match &experiment.distribution {
                DistributionSection::SlabMixture { axis, .. } => {
                    if let Some(min_d) = points.first() {
                        if (*axis as f64) >= *min_d {
                            violations.push(format!(
                                "sweep: slab axis {axis} is outside the smallest swept dimension \
                                 {min_d}"
                            ));
                        }
                    }
                }
                DistributionSection::GaussianEllipsoid { means, stddevs } => {
                    if matches!(stddevs, StddevSection::List(_)) {
                        violations.push(
                            "sweep: a d-axis sweep needs a 'fill' or 'power' stddev rule, not an \
                             explicit spectrum"
                                .into(),
                        );
                    }
                    if means.is_some() {
                        violations.push(
                            "sweep: a d-axis sweep cannot use explicit Gaussian means".into(),
                        );
                    }
                }
                DistributionSection::UniformCube { .. } => {}
            }
            if matches!(&experiment.query, QuerySection::Explicit(_)) {
                violations
                    .push("sweep: a d-axis sweep cannot use explicit query coordinates".into());
            }
        }
        AxisKind::N => {
            if !all_positive_integers {
                violations.push("sweep.values: the n axis needs positive integers".into());
            }
            if !matches!(&experiment.dataset_size, SizeSection::Constant { .. }) {
                violations.push(
                    "sweep: an n-axis sweep needs a constant dataset-size rule as its base".into(),
                );
            }
        }
        AxisKind::Epsilon | AxisKind::P => {
            if points.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                violations.push(format!("sweep.values: the {axis} axis needs positive values"));
            }
        }
        AxisKind::Zeta => {
            if points.iter().any(|v| *v <= 0.99 || *v >= 1.0) {
                violations.push(
                    "sweep.values: the zeta axis needs values in (0.99, 1) — the stability \
                     threshold requires 99/100 < ζ < 1"
                        .into(),
                );
            }
        }
        AxisKind::Omega => {
            if points.iter().any(|v| !(0.0..1.0).contains(v)) {
                violations.push("sweep.values: the omega axis needs values in [0, 1)".into());
            }
            if matches!(
                &experiment.distribution,
                DistributionSection::GaussianEllipsoid { .. }
            ) {
                violations.push(
                    "sweep: the omega axis compares cube volumes and needs a cube-supported law"
                        .into(),
                );
            }
        }
    }
}
