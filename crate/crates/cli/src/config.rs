//! Experiment configuration: JSON text plus `key=value` overrides, validated
//! into an [`ExperimentConfig`].

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use slln_core::engine::{Expr, SequenceModel, WindowFn};
use slln_core::fixtures;
use slln_core::lln::WeightKind;
use slln_core::measures::{AmbiguitySet, SamplableDistribution};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Expect,
    Capacity,
    Choquet,
    Blocking,
    Inequalities,
    MeanBounds,
    Cluster,
    Divergence,
    Theorem1,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Expect => "expect",
            Self::Capacity => "capacity",
            Self::Choquet => "choquet",
            Self::Blocking => "blocking",
            Self::Inequalities => "inequalities",
            Self::MeanBounds => "mean-bounds",
            Self::Cluster => "cluster",
            Self::Divergence => "divergence",
            Self::Theorem1 => "theorem1",
        }
    }

    /// Experiments that draw random paths and so need a seed.
    pub fn stochastic(self) -> bool {
        matches!(self, Self::Cluster | Self::Divergence | Self::Theorem1)
    }

    fn default_n(self) -> usize {
        match self {
            Self::Expect | Self::Capacity => 3,
            Self::Choquet => 1,
            Self::Inequalities => 4,
            Self::MeanBounds => 200,
            Self::Blocking => 1000,
            Self::Cluster | Self::Divergence => 1_000_000,
            Self::Theorem1 => 100_000,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One law of a driver set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    Bernoulli { p: f64 },
    Dirac { value: f64 },
    Finite { values: Vec<f64>, probs: Vec<f64> },
    Pareto { alpha: f64, scale: f64 },
    DiscretizedPareto { alpha: f64, scale: f64, cells: usize },
}

impl LawSpec {
    fn build(&self) -> slln_core::Result<SamplableDistribution> {
        match self {
            Self::Bernoulli { p } => SamplableDistribution::bernoulli(*p),
            Self::Dirac { value } => SamplableDistribution::finite(vec![*value], vec![1.0]),
            Self::Finite { values, probs } => SamplableDistribution::finite(values.clone(), probs.clone()),
            Self::Pareto { alpha, scale } => SamplableDistribution::pareto(*alpha, *scale),
            Self::DiscretizedPareto { alpha, scale, cells } => SamplableDistribution::discretized(*alpha, *scale, *cells),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindSpec {
    Iid,
    MovingWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub laws: Vec<LawSpec>,
    #[serde(default)]
    pub kind: Option<KindSpec>,
    #[serde(default)]
    pub m: usize,
    /// A name from the window vocabulary; `mean_window` when omitted.
    #[serde(default)]
    pub window: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationSpec {
    Upward,
    Absolute,
}

/// `{max_k dev(S_k - c_k) >= threshold}` with `c_k = k * center` unless
/// `centers` lists the `c_k` directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub threshold: f64,
    #[serde(default)]
    pub center: f64,
    #[serde(default)]
    pub centers: Option<Vec<f64>>,
    #[serde(default = "absolute")]
    pub deviation: DeviationSpec,
}

fn absolute() -> DeviationSpec {
    DeviationSpec::Absolute
}

/// A named normalizing sequence or explicit weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Named(String),
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Settling tolerance for the mean-bound limits.
    pub mu_tol: Option<f64>,
    pub epsilon: Option<f64>,
    pub resolution: Option<f64>,
    pub min_coverage: Option<f64>,
    pub min_growing_fraction: Option<f64>,
}

/// The file format, before validation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: Option<ExperimentKind>,
    pub fixture: Option<String>,
    pub model: Option<ModelSpec>,
    pub family: Option<String>,
    pub payoff: Option<Expr>,
    pub n: Option<usize>,
    pub x: Option<Vec<f64>>,
    pub mus: Option<Vec<f64>>,
    pub event: Option<EventSpec>,
    pub max_blocks: Option<usize>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub epoch_growth: Option<f64>,
    pub first_epoch: Option<usize>,
    pub checkpoints_per_decade: Option<usize>,
    pub start: Option<usize>,
    pub paths: Option<usize>,
    pub law: Option<usize>,
    pub expect_divergent: Option<bool>,
    pub weights: Option<WeightSpec>,
    pub period: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone)]
pub struct NamedModel {
    pub name: String,
    pub model: SequenceModel,
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// One model, or every member of a family.
    pub models: Vec<NamedModel>,
    pub family: Option<String>,
    pub payoff: Expr,
    pub n: usize,
    pub x: Vec<f64>,
    pub mus: Option<Vec<f64>>,
    pub event: Option<EventSpec>,
    pub max_blocks: usize,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub epoch_growth: Option<f64>,
    pub first_epoch: Option<usize>,
    pub checkpoints_per_decade: Option<usize>,
    pub start: Option<usize>,
    pub paths: usize,
    pub law: Option<usize>,
    pub expect_divergent: Option<bool>,
    pub weights: WeightKind,
    pub period: Option<usize>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub tolerances: Tolerances,
}

impl ExperimentConfig {
    /// The seed of a stochastic experiment. Validation guarantees it exists.
    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::MissingSeed(self.kind.name().into()))
    }
}

/// Resolves a window name: `identity`, `mean_window`, `max_window` or
/// `affine_window(a,b)`.
pub fn resolve_window(name: &str) -> Result<WindowFn, CliError> {
    let name = name.trim();
    match name {
        "identity" => return Ok(WindowFn::Identity),
        "mean_window" => return Ok(WindowFn::Mean),
        "max_window" => return Ok(WindowFn::Max),
        _ => {}
    }
    let args = name.strip_prefix("affine_window(").and_then(|rest| rest.strip_suffix(')'));
    if let Some(args) = args {
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        if let [a, b] = parts[..] {
            if let (Ok(a), Ok(b)) = (a.parse::<f64>(), b.parse::<f64>()) {
                if a.is_finite() && b.is_finite() {
                    return Ok(WindowFn::Affine { a, b });
                }
            }
        }
    }
    Err(CliError::UnknownWindowFn(name.into()))
}

fn field(field: &str, message: impl Into<String>) -> CliError {
    CliError::Field { field: field.into(), message: message.into() }
}

fn build_model(spec: &ModelSpec) -> Result<SequenceModel, CliError> {
    if spec.laws.is_empty() {
        return Err(field("model.laws", "at least one law is required"));
    }
    let laws = spec
        .laws
        .iter()
        .enumerate()
        .map(|(i, law)| law.build().map_err(|e| field(&format!("model.laws[{i}]"), e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let set = AmbiguitySet::new(laws).map_err(|e| field("model.laws", e.to_string()))?;
    let kind = spec.kind.unwrap_or(if spec.m == 0 && spec.window.is_none() { KindSpec::Iid } else { KindSpec::MovingWindow });
    match kind {
        KindSpec::Iid if spec.m != 0 || spec.window.is_some() => {
            Err(field("model.kind", "an iid model takes neither m nor a window"))
        }
        KindSpec::Iid => Ok(SequenceModel::iid(set)),
        KindSpec::MovingWindow => {
            let window = resolve_window(spec.window.as_deref().unwrap_or("mean_window"))?;
            Ok(SequenceModel::moving_window(spec.m, set, window))
        }
    }
}

fn syntax_error(err: &serde_json::Error) -> CliError {
    CliError::Parse { line: err.line(), column: err.column(), field: None, message: err.to_string() }
}

fn typed<'de, D: serde::Deserializer<'de>>(de: D) -> Result<RawConfig, CliError>
where
    D::Error: Into<serde_json::Error>,
{
    serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        let inner: serde_json::Error = err.into_inner().into();
        match (inner.line(), inner.column()) {
            // Values built from overrides have no position.
            (0, _) => CliError::Field { field: path, message: inner.to_string() },
            (line, column) => CliError::Parse { line, column, field: Some(path), message: inner.to_string() },
        }
    })
}

/// An override value is JSON when it parses as JSON and a string otherwise.
fn override_value(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.into()))
}

/// Sets `key` (dotted for nested fields) to `value` in a JSON object.
fn apply_override(root: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let mut node = root;
    let mut parts = key.split('.').peekable();
    while let Some(part) = parts.next() {
        let Value::Object(map) = node else {
            return Err(CliError::Usage(format!("override {key}: {part} is not inside an object")));
        };
        if parts.peek().is_none() {
            map.insert(part.into(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Err(CliError::Usage(format!("empty override key in {key:?}")))
}

/// Parses config text (empty text is an empty object) and applies
/// `key=value` overrides.
pub fn parse_raw(text: &str, overrides: &[String]) -> Result<RawConfig, CliError> {
    let text = if text.trim().is_empty() { "{}" } else { text };
    let mut value: Value = serde_json::from_str(text).map_err(|e| syntax_error(&e))?;
    if !value.is_object() {
        return Err(CliError::Parse { line: 1, column: 1, field: None, message: "config must be a JSON object".into() });
    }
    if overrides.is_empty() {
        let mut de = serde_json::Deserializer::from_str(text);
        return typed(&mut de);
    }
    // Report file errors with their position before overrides move things.
    typed(&mut serde_json::Deserializer::from_str(text))?;
    for item in overrides {
        let (key, val) =
            item.split_once('=').ok_or_else(|| CliError::Usage(format!("override {item:?} is not key=value")))?;
        apply_override(&mut value, key.trim(), override_value(val.trim()))?;
    }
    typed(value)
}

/// Parses and validates a config, as [`parse_config_with`] with no
/// overrides or command-line settings.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    parse_config_with(text, &[], None, None, None)
}

/// Full ingestion: text, overrides, then the command-line kind, seed and
/// output directory, which win over the file.
pub fn parse_config_with(
    text: &str,
    overrides: &[String],
    kind: Option<ExperimentKind>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<ExperimentConfig, CliError> {
    let raw = parse_raw(text, overrides)?;
    validate(raw, kind, seed, out)
}

fn weight_kind(spec: Option<&WeightSpec>) -> Result<WeightKind, CliError> {
    match spec {
        None => Ok(WeightKind::Linear),
        Some(WeightSpec::Named(name)) => match name.as_str() {
            "linear" => Ok(WeightKind::Linear),
            "sqrt" => Ok(WeightKind::Sqrt),
            "sqrt_n_log_n" => Ok(WeightKind::SqrtNLogN),
            other => Err(field("weights", format!("unknown weights {other:?}; expected linear, sqrt or sqrt_n_log_n"))),
        },
        Some(WeightSpec::Custom(v)) => Ok(WeightKind::Custom(v.clone())),
    }
}

pub fn validate(
    raw: RawConfig,
    kind: Option<ExperimentKind>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<ExperimentConfig, CliError> {
    let kind = match (kind, raw.experiment) {
        (Some(k), Some(file)) if k != file => {
            return Err(CliError::Usage(format!("subcommand {k} does not match experiment {file} in the config")));
        }
        (Some(k), _) | (None, Some(k)) => k,
        (None, None) => return Err(CliError::Usage("no experiment given on the command line or in the config".into())),
    };
    let models = match (&raw.fixture, &raw.model, &raw.family) {
        (Some(name), None, None) => {
            let model = fixtures::by_name(name).map_err(|e| field("fixture", e.to_string()))?;
            vec![NamedModel { name: name.clone(), model }]
        }
        (None, Some(spec), None) => vec![NamedModel { name: "custom".into(), model: build_model(spec)? }],
        (None, None, Some(family)) => {
            if family != "exhaustive-small" {
                return Err(field("family", format!("unknown family {family:?}; expected exhaustive-small")));
            }
            if kind != ExperimentKind::Inequalities {
                return Err(field("family", "families are supported by the inequalities experiment only"));
            }
            fixtures::exhaustive_small_family().into_iter().map(|(name, model)| NamedModel { name, model }).collect()
        }
        (None, None, None) => return Err(field("fixture", "one of fixture, model or family is required")),
        _ => return Err(field("fixture", "fixture, model and family are mutually exclusive")),
    };
    if let Some(law) = raw.law {
        for m in &models {
            let laws = m.model.driver().len();
            if law >= laws {
                return Err(CliError::LawIndex { index: law, laws });
            }
        }
    }
    if let (Some(a), Some(b)) = (raw.a, raw.b) {
        if a > b {
            return Err(CliError::TargetOrder { a, b });
        }
    }
    let seed = seed.or(raw.seed);
    if kind.stochastic() && seed.is_none() {
        return Err(CliError::MissingSeed(kind.name().into()));
    }
    let n = raw.n.unwrap_or_else(|| kind.default_n());
    if n == 0 {
        return Err(field("n", "must be positive"));
    }
    if let Some(mus) = &raw.mus {
        if mus.len() != n {
            return Err(field("mus", format!("{} values for horizon n = {n}", mus.len())));
        }
    }
    let x = raw.x.unwrap_or_else(|| vec![0.5, 1.0, 1.5, 2.0]);
    if x.is_empty() || x.iter().any(|v| !(*v > 0.0)) {
        return Err(field("x", "needs at least one positive level"));
    }
    if kind == ExperimentKind::Capacity && raw.event.is_none() {
        return Err(field("event", "the capacity experiment needs an event"));
    }
    Ok(ExperimentConfig {
        kind,
        models,
        family: raw.family,
        payoff: raw.payoff.unwrap_or(Expr::Sum),
        n,
        x,
        mus: raw.mus,
        event: raw.event,
        max_blocks: raw.max_blocks.unwrap_or(20),
        a: raw.a,
        b: raw.b,
        epoch_growth: raw.epoch_growth,
        first_epoch: raw.first_epoch,
        checkpoints_per_decade: raw.checkpoints_per_decade,
        start: raw.start,
        paths: raw.paths.unwrap_or(100),
        law: raw.law,
        expect_divergent: raw.expect_divergent,
        weights: weight_kind(raw.weights.as_ref())?,
        period: raw.period,
        seed,
        out: out.or(raw.out).unwrap_or_else(|| PathBuf::from(".")),
        tolerances: raw.tolerances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_expect_config_fills_defaults() {
        let cfg = parse_config(r#"{"experiment": "expect", "fixture": "moving-average"}"#).unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Expect);
        assert_eq!(cfg.n, 3);
        assert_eq!(cfg.payoff, Expr::Sum);
        assert_eq!(cfg.out, PathBuf::from("."));
    }

    #[test]
    fn windows_come_from_the_vocabulary() {
        assert!(matches!(resolve_window("affine_window(0.5, -1)"), Ok(WindowFn::Affine { a, b }) if a == 0.5 && b == -1.0));
        assert!(matches!(resolve_window("max_window"), Ok(WindowFn::Max)));
        for bad in ["median_window", "affine_window(1)", "affine_window(a,b)"] {
            assert!(matches!(resolve_window(bad), Err(CliError::UnknownWindowFn(_))), "{bad}");
        }
    }

    #[test]
    fn guards() {
        let law5 = r#"{"experiment": "divergence", "fixture": "heavy-tail", "seed": 1, "law": 5}"#;
        assert!(matches!(parse_config(law5), Err(CliError::LawIndex { index: 5, laws: 2 })));
        let order = r#"{"experiment": "cluster", "fixture": "moving-average", "seed": 1, "a": 0.6, "b": 0.4}"#;
        assert!(matches!(parse_config(order), Err(CliError::TargetOrder { .. })));
        let unseeded = r#"{"experiment": "cluster", "fixture": "moving-average"}"#;
        assert!(matches!(parse_config(unseeded), Err(CliError::MissingSeed(_))));
    }

    #[test]
    fn errors_carry_position_and_field() {
        let err = parse_config("{\n  \"experiment\": \"expect\",\n  \"n\": \"three\"\n}").unwrap_err();
        match err {
            CliError::Parse { line, field, .. } => {
                assert_eq!(line, 3);
                assert_eq!(field.as_deref(), Some("n"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config("{\"n\": 3,}"), Err(CliError::Parse { line: 1, field: None, .. })));
    }

    #[test]
    fn overrides_are_json_or_strings() {
        let raw = parse_raw("", &["fixture=moving-average".into(), "n=7".into(), "tolerances.epsilon=0.1".into()]).unwrap();
        assert_eq!(raw.fixture.as_deref(), Some("moving-average"));
        assert_eq!(raw.n, Some(7));
        assert_eq!(raw.tolerances.epsilon, Some(0.1));
    }
}
