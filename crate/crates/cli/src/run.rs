//! Dispatch from a validated config to the library, collecting CSV artifacts
//! in memory so they are written once at the end.

use std::path::{Path, PathBuf};

use slln_core::capacity::{
    choquet_finiteness_for_set, choquet_integral_finite, lower_capacity, upper_capacity, EventPredicate,
};
use slln_core::engine::{expectation_pair, upper_expectation, CrossingSpec, Deviation, Expr, Functional};
use slln_core::lln::{
    cluster_set_experiment, divergence_experiment, estimate_mu_limits, kolmogorov_report, lower_capacity_maximal_check,
    mean_bounds_sequence, theorem1_experiment, CapacitySide, ClusterConfig, DivergenceConfig, Theorem1Config,
};
use slln_core::report::{write_experiment_csv, write_report_csv, ExperimentRow, ReportRow};
use slln_core::sequences::blocking_report;

use crate::config::{DeviationSpec, ExperimentConfig, ExperimentKind, NamedModel};
use crate::error::{exit, CliError};

/// Slack on checks the runner asserts itself.
const CHECK_SLACK: f64 = 1e-10;

/// Result of one experiment.
#[derive(Debug, Default)]
pub struct Outcome {
    /// `(file name, CSV bytes)`.
    pub artifacts: Vec<(String, Vec<u8>)>,
    /// Human-readable result lines.
    pub summary: Vec<String>,
    /// Failed hard assertions; empty iff the run passed.
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            exit::OK
        } else {
            exit::ASSERTION_FAILED
        }
    }

    fn report(&mut self, name: &str, rows: &[ReportRow]) -> Result<(), CliError> {
        let mut buf = Vec::new();
        write_report_csv(&mut buf, rows)?;
        self.artifacts.push((format!("{name}.csv"), buf));
        Ok(())
    }

    fn experiment(&mut self, name: &str, rows: &[ExperimentRow]) -> Result<(), CliError> {
        let mut buf = Vec::new();
        write_experiment_csv(&mut buf, rows)?;
        self.artifacts.push((format!("{name}.csv"), buf));
        Ok(())
    }

    /// Writes every artifact under `dir` and returns the paths.
    pub fn write_artifacts(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for (name, bytes) in &self.artifacts {
            let path = dir.join(name);
            std::fs::write(&path, bytes)?;
            paths.push(path);
        }
        Ok(paths)
    }
}

/// Rounds away binary noise for display; CSVs keep every digit.
fn show(v: f64) -> String {
    let r = (v * 1e12).round() / 1e12;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

fn payoff_label(payoff: &Expr, n: usize) -> String {
    match payoff {
        Expr::Sum => format!("S_{n}"),
        Expr::Mean => format!("S_{n}/{n}"),
        Expr::Coord { index } => format!("X_{index}"),
        _ => format!("phi_{n}"),
    }
}

fn flag(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

pub fn run(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let mut outcome = Outcome::default();
    let first = &config.models[0];
    match config.kind {
        ExperimentKind::Expect => expect(config, first, &mut outcome)?,
        ExperimentKind::Capacity => capacity(config, first, &mut outcome)?,
        ExperimentKind::Choquet => choquet(config, first, &mut outcome)?,
        ExperimentKind::Blocking => blocking(config, first, &mut outcome)?,
        ExperimentKind::Inequalities => inequalities(config, &mut outcome)?,
        ExperimentKind::MeanBounds => mean_bounds(config, first, &mut outcome)?,
        ExperimentKind::Cluster => cluster(config, first, &mut outcome)?,
        ExperimentKind::Divergence => divergence(config, first, &mut outcome)?,
        ExperimentKind::Theorem1 => theorem1(config, first, &mut outcome)?,
    }
    Ok(outcome)
}

fn expect(config: &ExperimentConfig, nm: &NamedModel, out: &mut Outcome) -> Result<(), CliError> {
    let n = config.n;
    let phi = config.payoff.build(n)?;
    let pair = expectation_pair(&nm.model, &phi)?;
    let label = payoff_label(&config.payoff, n);
    out.summary.push(format!("E[{label}] = {}", show(pair.upper)));
    out.summary.push(format!("e[{label}] = {}", show(pair.lower)));
    let rows = [
        ReportRow::new("upper_expectation", n as f64, pair.upper, ""),
        ReportRow::new("lower_expectation", n as f64, pair.lower, ""),
    ];
    out.report("expect", &rows)
}

fn capacity(config: &ExperimentConfig, nm: &NamedModel, out: &mut Outcome) -> Result<(), CliError> {
    let n = config.n;
    let spec = config.event.as_ref().expect("validated");
    let centers = match &spec.centers {
        Some(c) if c.len() != n => {
            return Err(CliError::Field { field: "event.centers".into(), message: format!("{} centers for n = {n}", c.len()) })
        }
        Some(c) => c.clone(),
        None => (1..=n).map(|k| k as f64 * spec.center).collect(),
    };
    let deviation = match spec.deviation {
        DeviationSpec::Upward => Deviation::Upward,
        DeviationSpec::Absolute => Deviation::Absolute,
    };
    let event = EventPredicate::crossing(CrossingSpec { centers, threshold: spec.threshold, deviation });
    let upper = upper_capacity(&nm.model, &event)?;
    let lower = lower_capacity(&nm.model, &event)?;
    let ok = lower <= upper + CHECK_SLACK;
    out.summary.push(format!("V(A) = {}", show(upper)));
    out.summary.push(format!("v(A) = {}", show(lower)));
    if !ok {
        out.failures.push(format!("lower capacity {lower} exceeds upper {upper}"));
    }
    let rows = [
        ReportRow::new("upper_capacity", n as f64, upper, flag(ok)),
        ReportRow::new("lower_capacity", n as f64, lower, flag(ok)),
    ];
    out.report("capacity", &rows)
}

fn choquet(config: &ExperimentConfig, nm: &NamedModel, out: &mut Outcome) -> Result<(), CliError> {
    let model = &nm.model;
    if !model.driver().exact_capable() {
        // Unbounded laws: report the finiteness diagnostics for X_1.
        let report = choquet_finiteness_for_set(model.driver(), 1.0, 1 << 12, (1u64 << 20) as f64)?;
        let verdict = if report.diverging { "diverging" } else { "finite" };
        out.summary.push(format!("C_V(|X_1|): {verdict}"));
        return out.report("choquet", &report.rows());
    }
    let n = config.n;
    let phi = config.payoff.build(n)?;
    let abs = phi.map(f64::abs);
    let c = choquet_integral_finite(model, &phi)?;
    let c_abs = choquet_integral_finite(model, &abs)?;
    let e_abs = upper_expectation(model, &abs)?;
    let dominated = c_abs >= e_abs - CHECK_SLACK;
    let label = payoff_label(&config.payoff, n);
    out.summary.push(format!("C_V[{label}] = {}", show(c)));
    out.summary.push(format!("C_V[|{label}|] = {}, E[|{label}|] = {}", show(c_abs), show(e_abs)));
    if !dominated {
        out.failures.push(format!("C_V(|X|) = {c_abs} below E|X| = {e_abs}"));
    }
    let rows = [
        ReportRow::new("choquet", n as f64, c, ""),
        ReportRow::new("choquet_abs", n as f64, c_abs, flag(dominated)),
        ReportRow::new("upper_expectation_abs", n as f64, e_abs, flag(dominated)),
    ];
    out.report("choquet", &rows)
}

fn blocking(config: &ExperimentConfig, nm: &NamedModel, out: &mut Outcome) -> Result<(), CliError> {
    let r = blocking_report(&nm.model, config.n, config.max_blocks)?;
    let mut rows = Vec::new();
    for (i, ((((z, zb), w), wb), wm)) in
        r.z_partial.iter().zip(&r.z_bound).zip(&r.w_partial).zip(&r.w_bound).zip(&r.w_mean).enumerate()
    {
        let block = (i + 1) as f64;
        rows.push(ReportRow::new("z_partial", block, *z, flag(*z <= zb + 1e-12)));
        rows.push(ReportRow::new("z_bound", block, *zb, ""));
        rows.push(ReportRow::new("w_partial", block, *w, flag(*w <= wb + 1e-12)));
        rows.push(ReportRow::new("w_bound", block, *wb, ""));
        rows.push(ReportRow::new("w_mean", block, *wm, ""));
    }
    for (i, v) in r.w_negligibility.iter().enumerate() {
        rows.push(ReportRow::new("w_negligibility", (i + 1) as f64, *v, ""));
    }
    let blocks = r.scheme.blocks() as f64;
    rows.push(ReportRow::new("invariant_violations", blocks, r.invariant_violations.len() as f64, flag(r.invariant_violations.is_empty())));
    rows.push(ReportRow::new("z_dominated", blocks, f64::from(u8::from(r.z_dominated)), flag(r.z_dominated)));
    rows.push(ReportRow::new("w_dominated", blocks, f64::from(u8::from(r.w_dominated)), flag(r.w_dominated)));
    rows.push(ReportRow::new("w_trend_decreasing", blocks, f64::from(u8::from(r.w_trend_decreasing)), flag(r.w_trend_decreasing)));
    out.summary.push(format!(
        "{} blocks over N = {}, forced prefix {}, checks {}",
        r.scheme.blocks(),
        config.n,
        r.scheme.forced_prefix(),
        flag(r.passed())
    ));
    out.failures.extend(r.invariant_violations.iter().cloned());
    for (ok, what) in [(r.z_dominated, "Z chain"), (r.w_dominated, "W chain"), (r.w_trend_decreasing, "W trend")] {
        if !ok {
            out.failures.push(format!("{what} check failed"));
        }
    }
    out.report("blocking", &rows)?;
    let mut scheme = Vec::new();
    r.scheme.write_csv(&mut scheme)?;
    out.artifacts.push(("blocking_scheme.csv".into(), scheme));
    Ok(())
}

/// Every choice of `mu_k` from `{lower, midpoint, upper}`.
fn mu_grids(lower: f64, upper: f64, n: usize) -> Vec<Vec<f64>> {
    let points = [lower, 0.5 * (lower + upper), upper];
    let mut grids = vec![Vec::new()];
    for _ in 0..n {
        grids = grids
            .into_iter()
            .flat_map(|g| points.iter().map(move |p| [g.clone(), vec![*p]].concat()))
            .collect();
    }
    grids
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| show(*v)).collect::<Vec<_>>().join(" ")
}

fn inequalities(config: &ExperimentConfig, out: &mut Outcome) -> Result<(), CliError> {
    let mut rows = Vec::new();
    let (mut checked, mut worst) = (0usize, 0.0f64);
    let (mut classical, mut ambiguous) = (0.0f64, 0.0f64);
    for nm in &config.models {
        let model = &nm.model;
        let horizons: Vec<usize> = if config.family.is_some() { (1..=5 - model.m()).collect() } else { vec![config.n] };
        let first = expectation_pair(model, &Functional::coordinate(1, 0))?;
        for &n in &horizons {
            let grids = match &config.mus {
                Some(mus) if config.family.is_none() => vec![mus.clone()],
                _ => mu_grids(first.lower, first.upper, n),
            };
            for &x in &config.x {
                for mus in &grids {
                    let r = lower_capacity_maximal_check(model, n, mus, x)?;
                    checked += 1;
                    worst = worst.max(r.ratio);
                    let strategy = format!("x={} mu={}", show(x), join(mus));
                    rows.push(ExperimentRow::new("inequalities", &nm.name, &strategy, n as u64, "lemma2_lhs", r.lhs, r.pass));
                    rows.push(ExperimentRow::new("inequalities", &nm.name, &strategy, n as u64, "lemma2_rhs", r.rhs, r.pass));
                    if !r.pass {
                        out.failures.push(format!("{} n={n} {strategy}: {} > {}", nm.name, r.lhs, r.rhs));
                    }
                }
                for side in [CapacitySide::Upper, CapacitySide::Lower] {
                    let r = kolmogorov_report(model, side, n, x, 1.0, 2.0)?;
                    let strategy = format!("{side:?} x={}", show(x)).to_lowercase();
                    rows.push(ExperimentRow::new("inequalities", &nm.name, &strategy, n as u64, "kolmogorov_constant", r.ratio, r.ok()));
                    if r.hard {
                        classical = classical.max(r.ratio);
                    } else {
                        ambiguous = ambiguous.max(r.ratio);
                    }
                    if !r.ok() {
                        out.failures.push(format!("{} n={n} {strategy}: Kolmogorov constant {}", nm.name, r.ratio));
                    }
                }
            }
        }
    }
    out.summary.push(format!(
        "lower-capacity maximal inequality: {checked} instances, {} violations, max lhs/rhs = {}",
        out.failures.len(),
        show(worst)
    ));
    out.summary.push(format!(
        "Kolmogorov constant: max {} on single-law i.i.d. models, max {} elsewhere",
        show(classical),
        show(ambiguous)
    ));
    out.experiment("inequalities", &rows)
}

fn mean_bounds(config: &ExperimentConfig, nm: &NamedModel, out: &mut Outcome) -> Result<(), CliError> {
    let seq = mean_bounds_sequence(&nm.model, config.n)?;
    let mut rows = Vec::new();
    for ((n, u), l) in seq.n_values.iter().zip(&seq.upper_means).zip(&seq.lower_means) {
        rows.push(ReportRow::new("upper_mean", *n as f64, *u, ""));
        rows.push(ReportRow::new("lower_mean", *n as f64, *l, ""));
    }
    let (lo, hi) = seq.bracket;
    out.summary.push(format!("bracket [e[X_1], E[X_1]] = [{}, {}]", show(lo), show(hi)));
    if config.n >= 8 {
        let lim = estimate_mu_limits(&seq, config.tolerances.mu_tol.unwrap_or(1e-10))?;
        let n = config.n as f64;
        let settled = if lim.converged { "converged" } else { "unsettled" };
        rows.push(ReportRow::new("mu_bar", n, lim.mu_bar, settled));
        rows.push(ReportRow::new("mu_under", n, lim.mu_under, settled));
        for ((d, u), l) in lim.doublings.iter().skip(1).zip(&lim.upper_deltas).zip(&lim.lower_deltas) {
            rows.push(ReportRow::new("upper_delta", *d as f64, *u, ""));
            rows.push(ReportRow::new("lower_delta", *d as f64, *l, ""));
        }
        out.summary.push(format!("mu_bar ~ {}, mu_under ~ {} ({settled})", show(lim.mu_bar), show(lim.mu_under)));
    }
    out.report("mean-bounds", &rows)
}

fn cluster(config: &ExperimentConfig, nm: &NamedModel, out: &mut Outcome) -> Result<(), CliError> {
    let seed = config.require_seed()?;
    let (a, b) = match (config.a, config.b) {
        (Some(a), Some(b)) => (a, b),
        (a, b) => {
            let first = expectation_pair(&nm.model, &Functional::coordinate(1, 0))?;
            (a.unwrap_or(first.lower), b.unwrap_or(first.upper))
        }
    };
    let mut cfg = ClusterConfig::new(a, b, config.n, seed);
    if let Some(g) = config.epoch_growth {
        cfg.epoch_growth = g;
    }
    if let Some(f) = config.first_epoch {
        cfg.first_epoch = f;
    }
    let tol = &config.tolerances;
    cfg.epsilon = tol.epsilon.unwrap_or(cfg.epsilon);
    cfg.resolution = tol.resolution.unwrap_or(cfg.resolution);
    cfg.min_coverage = tol.min_coverage.unwrap_or(cfg.min_coverage);
    let r = cluster_set_experiment(&nm.model, &cfg)?;
    out.summary.push(format!(
        "limsup ~ {}, liminf ~ {}, coverage of [{}, {}] = {}",
        show(r.limsup_estimate),
        show(r.liminf_estimate),
        show(a),
        show(b),
        show(r.coverage)
    ));
    if !r.pass {
        out.failures.push(format!(
            "cluster set: limsup {}, liminf {}, coverage {} (epsilon {}, min coverage {})",
            r.limsup_estimate, r.liminf_estimate, r.coverage, cfg.epsilon, cfg.min_coverage
        ));
    }
    out.experiment("cluster", &r.rows(&nm.name))
}

fn divergence(config: &ExperimentConfig, nm: &NamedModel, out: &mut Outcome) -> Result<(), CliError> {
    let seed = config.require_seed()?;
    let mut cfg = DivergenceConfig::new(config.n, config.paths, seed);
    cfg.law = config.law;
    if let Some(s) = config.start {
        cfg.start = s;
    }
    if let Some(p) = config.checkpoints_per_decade {
        cfg.per_decade = p;
    }
    cfg.min_growing_fraction = config.tolerances.min_growing_fraction.unwrap_or(cfg.min_growing_fraction);
    let r = divergence_experiment(&nm.model, &cfg)?;
    let expected = config.expect_divergent.unwrap_or_else(|| !nm.model.driver().laws()[r.law].has_finite_mean());
    out.summary.push(format!(
        "law {}: {}/{} paths growing, median growth {}, Choquet diagnostics {}",
        r.law,
        r.growing_paths,
        cfg.n_paths,
        show(r.median_growth_ratio),
        if r.finiteness.diverging { "diverging" } else { "finite" }
    ));
    let verdict = |d: bool| if d { "divergent" } else { "not divergent" };
    out.summary.push(format!("verdict: {} (expected {})", verdict(r.divergent), verdict(expected)));
    if r.divergent != expected {
        out.failures.push(format!("expected {}, observed {}", verdict(expected), verdict(r.divergent)));
    }
    out.experiment("divergence", &r.rows(&nm.name))
}

fn theorem1(config: &ExperimentConfig, nm: &NamedModel, out: &mut Outcome) -> Result<(), CliError> {
    let seed = config.require_seed()?;
    if !nm.model.is_iid() {
        return Err(CliError::Field { field: "model".into(), message: "theorem1 needs an i.i.d. model".into() });
    }
    let mut cfg = Theorem1Config::new(config.weights.clone(), config.n, seed);
    cfg.epsilon = config.tolerances.epsilon.unwrap_or(cfg.epsilon);
    if let Some(p) = config.period {
        cfg.period = p;
    }
    if let Some(p) = config.checkpoints_per_decade {
        cfg.per_decade = p;
    }
    let r = theorem1_experiment(&[nm.model.driver().clone()], &cfg)?;
    for o in &r.outcomes {
        out.summary.push(format!(
            "{}: max (S_n - E[S_n])/a_n = {}, min (S_n - e[S_n])/a_n = {}, {}",
            o.strategy,
            show(o.max_upper),
            show(o.min_lower),
            flag(o.pass)
        ));
        if !o.pass {
            out.failures.push(format!("{} leaves the epsilon band", o.strategy));
        }
    }
    out.experiment("theorem1", &r.rows(&nm.name))
}
