//! Acceptance criteria 1 to 13. Each test prints one PASS/FAIL line.

mod common;

use std::time::Instant;

use common::{announce, driver_sets, model_family, payoff_shapes};
use slln_core::capacity::{
    choquet_integral_curve, choquet_integral_finite, choquet_integral_quadrature, CapacityCurve, QuadratureGrid,
    QuadratureRule,
};
use slln_core::engine::{
    check_block_independence, check_identity_in_distribution, check_independent_bounded_additivity,
    check_m_dependence, check_sublinear_axioms, oracle_upper_expectation_auto, random_bounded_functional,
    upper_expectation, BlockPayoff, Functional, SequenceModel, WindowFn,
};
use slln_core::fixtures;
use slln_core::lln::{
    cluster_set_experiment, divergence_experiment, kolmogorov_report, lower_capacity_maximal_check,
    mean_bounds_sequence, theorem1_experiment, CapacitySide, ClusterConfig, DivergenceConfig, Theorem1Config,
    WeightKind,
};
use slln_core::measures::AmbiguitySet;
use slln_core::report::write_experiment_csv;
use slln_core::sequences::{blocking_report, blocking_scheme, geometric_subsequence};

type Outcome = std::result::Result<String, String>;

fn criterion(id: u32, name: &str, body: impl FnOnce() -> Outcome) {
    let start = Instant::now();
    let result = body();
    let secs = start.elapsed().as_secs_f64();
    match &result {
        Ok(detail) => announce(&format!("PASS criterion {id:>2} {name}: {detail} ({secs:.1}s)")),
        Err(detail) => announce(&format!("FAIL criterion {id:>2} {name}: {detail} ({secs:.1}s)")),
    }
    if let Err(detail) = result {
        panic!("criterion {id} failed: {detail}");
    }
}

fn e(err: slln_core::Error) -> String {
    err.to_string()
}

#[test]
fn criterion_01_oracle_equivalence() {
    criterion(1, "oracle equivalence", || {
        let start = Instant::now();
        let (mut checked, mut worst, mut lp) = (0usize, 0.0f64, 0usize);
        let mut failures = Vec::new();
        for inst in model_family() {
            let m = inst.model.m();
            for n in 1..=5 - m {
                for (shape, phi) in payoff_shapes(n) {
                    let dp = upper_expectation(&inst.model, &phi).map_err(e)?;
                    let oracle = oracle_upper_expectation_auto(&inst.model, &phi).map_err(e)?;
                    if oracle.method == slln_core::engine::OracleMethod::SequenceFormLp {
                        lp += 1;
                    }
                    let dev = (dp - oracle.value).abs();
                    worst = worst.max(dev);
                    checked += 1;
                    if dev > 1e-10 {
                        failures.push(format!("{} n={n} {shape}: dp {dp} oracle {}", inst.label, oracle.value));
                    }
                }
            }
        }
        let secs = start.elapsed().as_secs_f64();
        if !failures.is_empty() {
            return Err(format!("{} of {checked} instances differ: {:?}", failures.len(), &failures[..failures.len().min(5)]));
        }
        if secs >= 120.0 {
            return Err(format!("runtime {secs:.1}s exceeds 2 min"));
        }
        Ok(format!("{checked} instances ({lp} via sequence-form LP), max |dp - oracle| = {worst:.2e}"))
    });
}

#[test]
fn criterion_02_sublinear_axioms() {
    criterion(2, "sub-linear axioms", || {
        let sets = driver_sets();
        let models = [
            SequenceModel::iid(sets[4].1.clone()),
            SequenceModel::iid(sets[8].1.clone()),
            SequenceModel::moving_window(1, sets[7].1.clone(), WindowFn::Mean),
            SequenceModel::moving_window(2, sets[5].1.clone(), WindowFn::Max),
        ];
        let (mut functionals, mut checked, mut worst) = (0usize, 0usize, 0.0f64);
        for (i, model) in models.iter().enumerate() {
            let phis: Vec<Functional> = (0..250).map(|s| random_bounded_functional(3, (i * 1000 + s) as u64)).collect();
            functionals += phis.len();
            let report = check_sublinear_axioms(model, &phis, 250, 17 + i as u64).map_err(e)?;
            checked += report.checked;
            worst = worst.max(report.max_deviation);
            if !report.passed() {
                return Err(format!("{} violations, first {:?}", report.violations.len(), report.violations[0]));
            }
        }
        Ok(format!("{functionals} functionals, {checked} comparisons, zero violations, max excess {worst:.2e}"))
    });
}

#[test]
fn criterion_03_bounded_additivity() {
    criterion(3, "bounded independent additivity", || {
        let mut models: Vec<SequenceModel> = driver_sets().into_iter().map(|(_, s)| SequenceModel::iid(s)).collect();
        models.push(fixtures::classical_singleton());
        models.push(SequenceModel::iid(AmbiguitySet::bernoullis(&[0.3, 0.7]).unwrap()));
        let (mut checked, mut worst) = (0usize, 0.0f64);
        for model in &models {
            for n in 1..=8 {
                let r = check_independent_bounded_additivity(model, n).map_err(e)?;
                checked += r.checked;
                worst = worst.max(r.max_deviation);
                if !r.passed() {
                    return Err(format!("n = {n}: {:?}", r.violations[0]));
                }
            }
        }
        Ok(format!("{} fixtures, n <= 8, {checked} comparisons, max deviation {worst:.2e}", models.len()))
    });
}

fn mu_grids(lower: f64, upper: f64, n: usize) -> Vec<Vec<f64>> {
    let points = [lower, 0.5 * (lower + upper), upper];
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out.into_iter().flat_map(|g| points.iter().map(move |p| [g.clone(), vec![*p]].concat())).collect();
    }
    out
}

#[test]
fn criterion_04_lower_capacity_maximal_inequality() {
    criterion(4, "maximal inequality for the lower capacity, constant 2", || {
        let start = Instant::now();
        let (mut checked, mut worst_ratio) = (0usize, 0.0f64);
        let mut violations = Vec::new();
        for inst in model_family() {
            let m = inst.model.m();
            let pair = slln_core::expectation_pair(&inst.model, &Functional::coordinate(1, 0)).map_err(e)?;
            for n in 1..=5 - m {
                for mus in mu_grids(pair.lower, pair.upper, n) {
                    for x in [0.5, 1.0, 1.5, 2.0] {
                        let r = lower_capacity_maximal_check(&inst.model, n, &mus, x).map_err(e)?;
                        checked += 1;
                        worst_ratio = worst_ratio.max(r.ratio);
                        if !r.pass {
                            violations.push(format!("{} n={n} mu={mus:?} x={x}: {} > {}", inst.label, r.lhs, r.rhs));
                        }
                    }
                }
            }
        }
        let secs = start.elapsed().as_secs_f64();
        if !violations.is_empty() {
            return Err(format!("{} violations of {checked}: {:?}", violations.len(), &violations[..violations.len().min(5)]));
        }
        if secs >= 300.0 {
            return Err(format!("runtime {secs:.1}s exceeds 5 min"));
        }
        Ok(format!("{checked} instances, zero violations, max lhs/rhs = {worst_ratio:.4}"))
    });
}

#[test]
fn criterion_05_kolmogorov() {
    criterion(5, "Kolmogorov maximal inequality", || {
        let xs = [0.5, 1.0, 1.5, 2.0];
        let (mut singleton_checked, mut worst_singleton) = (0usize, 0.0f64);
        let (mut c2, mut c4) = (0.0f64, 0.0f64);
        for inst in model_family() {
            if inst.laws == 1 {
                for n in 1..=6 {
                    for x in xs {
                        for side in [CapacitySide::Upper, CapacitySide::Lower] {
                            let r = kolmogorov_report(&inst.model, side, n, x, 1.0, 2.0).map_err(e)?;
                            singleton_checked += 1;
                            worst_singleton = worst_singleton.max(r.ratio);
                            if !r.pass || r.ratio > 1.0 {
                                return Err(format!("{} n={n} x={x} {side:?}: C = {}", inst.label, r.ratio));
                            }
                        }
                    }
                }
            } else {
                for x in xs {
                    for side in [CapacitySide::Upper, CapacitySide::Lower] {
                        c2 = c2.max(kolmogorov_report(&inst.model, side, 2, x, 1.0, 2.0).map_err(e)?.ratio);
                        c4 = c4.max(kolmogorov_report(&inst.model, side, 4, x, 1.0, 2.0).map_err(e)?.ratio);
                    }
                }
            }
        }
        if !(c4 <= 2.0 * c2) {
            return Err(format!("ambiguous family: C(n=4) = {c4} > 2 C(n=2) = {}", 2.0 * c2));
        }
        Ok(format!(
            "{singleton_checked} single-law instances with max C = {worst_singleton:.4} <= 1; ambiguous family max C(n=2) = {c2:.4}, C(n=4) = {c4:.4}"
        ))
    });
}

#[test]
fn criterion_06_moving_average_exactness() {
    criterion(6, "moving-average mean bounds", || {
        let seq = mean_bounds_sequence(&fixtures::moving_average(), 200).map_err(e)?;
        let up = seq.upper_means.iter().map(|v| (v - 0.7).abs()).fold(0.0, f64::max);
        let lo = seq.lower_means.iter().map(|v| (v - 0.3).abs()).fold(0.0, f64::max);
        if up > 1e-10 || lo > 1e-10 {
            return Err(format!("max deviations {up:.2e} (upper), {lo:.2e} (lower)"));
        }
        Ok(format!("n <= 200, max |E[S_n]/n - 0.7| = {up:.2e}, max |e[S_n]/n - 0.3| = {lo:.2e}"))
    });
}

fn block_payoffs() -> Vec<BlockPayoff> {
    vec![
        std::sync::Arc::new(|x: &[f64], y: &[f64]| -(y[0] - x[0]).powi(2)),
        std::sync::Arc::new(|x: &[f64], y: &[f64]| x[0] * y.iter().sum::<f64>() - y[0]),
        std::sync::Arc::new(|x: &[f64], y: &[f64]| if x[0] > 0.2 { y[0] } else { -y[0] }),
    ]
}

#[test]
fn criterion_07_m_dependence_and_stationarity() {
    criterion(7, "m-dependence and stationarity checkers", || {
        let mut models: Vec<(String, SequenceModel)> =
            model_family().into_iter().filter(|i| i.model.m() > 0).map(|i| (i.label, i.model)).collect();
        models.push(("moving-average fixture".into(), fixtures::moving_average()));
        let phis2 = [
            Functional::new(2, |x| (x[0] - x[1]).powi(2)),
            Functional::new(2, |x| x[0].max(x[1]) - 0.5 * x[0]),
            Functional::sum(2).map(|s| (s - 0.7).abs()),
        ];
        let (mut checked, mut worst) = (0usize, 0.0f64);
        for (label, model) in &models {
            let dep = check_m_dependence(model, 1, model.m() + 1, &block_payoffs()).map_err(e)?;
            let mut reports = vec![dep];
            for p in 1..=2 {
                reports.push(check_identity_in_distribution(model, model, p, 2, &phis2).map_err(e)?);
            }
            for r in reports {
                checked += r.checked;
                worst = worst.max(r.max_deviation);
                if !r.passed() || r.max_deviation > 1e-10 {
                    return Err(format!("{label} {}: {:?}", r.name, r.violations.first()));
                }
            }
        }
        let control = fixtures::moving_average();
        let adjacent = check_block_independence(&control, 1..=1, 2..=2, &block_payoffs()).map_err(e)?;
        if adjacent.passed() {
            return Err("no-gap negative control passed unexpectedly".into());
        }
        Ok(format!(
            "{} moving-window models, {checked} comparisons, max deviation {worst:.2e}; no-gap control fails with deviation {:.3}",
            models.len(),
            adjacent.max_deviation
        ))
    });
}

#[test]
fn criterion_08_choquet() {
    criterion(8, "Choquet integrals", || {
        let (mut cross, mut single, mut dominance) = (0.0f64, 0.0f64, f64::INFINITY);
        let grid = QuadratureGrid { per_octave: 64, rule: QuadratureRule::Midpoint, breakpoints: vec![0.5, 1.0, 2.0] };
        for (name, set) in driver_sets() {
            let curve = CapacityCurve::of_first_coordinate(&set).map_err(e)?;
            let exact = choquet_integral_curve(&curve);
            let lo = curve.thresholds()[0].min(0.0);
            let hi = curve.thresholds().last().copied().unwrap().max(0.0);
            let pos = if hi > 0.0 {
                choquet_integral_quadrature(&|t| curve.at(t), hi, &grid).map_err(e)?.value
            } else {
                0.0
            };
            // int_{-inf}^0 (1 - V(X >= t)) dt, reflected onto [0, -lo].
            let neg = if lo < 0.0 {
                choquet_integral_quadrature(&|t| 1.0 - curve.at(-t), -lo, &grid).map_err(e)?.value
            } else {
                0.0
            };
            cross = cross.max((exact - (pos - neg)).abs());
            if set.len() == 1 {
                let mean = set.laws()[0].mean().unwrap();
                single = single.max((exact - mean).abs());
            }
            let model = SequenceModel::iid(set.clone());
            let abs = Functional::coordinate(1, 0).map(f64::abs);
            let c = choquet_integral_finite(&model, &abs).map_err(e)?;
            let b = upper_expectation(&model, &abs).map_err(e)?;
            if c < b - 1e-12 {
                return Err(format!("{name}: C_V(|X|) = {c} < bE|X| = {b}"));
            }
            dominance = dominance.min(c - b);
        }
        for model in [fixtures::moving_average(), fixtures::classical_singleton()] {
            let abs = Functional::coordinate(1, 0).map(f64::abs);
            let c = choquet_integral_finite(&model, &abs).map_err(e)?;
            let b = upper_expectation(&model, &abs).map_err(e)?;
            if c < b - 1e-12 {
                return Err(format!("fixture: C_V(|X|) = {c} < bE|X| = {b}"));
            }
            dominance = dominance.min(c - b);
        }
        if cross > 1e-8 || single > 1e-12 {
            return Err(format!("layer-cake vs quadrature {cross:.2e}, singleton vs mean {single:.2e}"));
        }
        Ok(format!(
            "layer-cake vs quadrature {cross:.2e}, singleton vs mean {single:.2e}, min C_V(|X|) - bE|X| = {dominance:.3e}"
        ))
    });
}

#[test]
fn criterion_09_blocking() {
    criterion(9, "blocking scheme", || {
        let mut schemes = 0usize;
        let synthetic: Vec<(usize, Vec<f64>, usize)> = vec![
            (1, (1..=1000).map(|i| (i as f64).powi(4)).collect(), 100),
            (0, vec![1.0; 1000], 1000),
            (2, (1..=1000).map(|i| i as f64).collect(), 50),
            (1, (1..=1000).map(|i| (i as f64).sqrt()).collect(), 1000),
        ];
        for (m, w, n) in &synthetic {
            let s = blocking_scheme(*m, w, *n).map_err(e)?;
            schemes += 1;
            let v = s.invariant_violations();
            if !v.is_empty() {
                return Err(format!("m={m} N={n}: {v:?}"));
            }
            if !s.w_trend_decreasing(1.0) {
                return Err(format!("m={m} N={n}: W bound not decreasing"));
            }
        }
        // Fast-growing weights let l_n grow within N = 10^3, so the bound
        // must end strictly lower.
        let fast = blocking_scheme(1, &synthetic[0].1, 1000).map_err(e)?;
        let bound = fast.w_negligibility_bound(1.0);
        if !(bound.last() < bound.first()) {
            return Err("W bound does not decrease on M_i = i^4".into());
        }
        let fast_detail = format!(
            "M_i = i^4, m = 1, N = 1000: l grows {} -> {}, W bound {:.3} -> {:.3} over {} blocks",
            fast.l[0],
            fast.l.last().unwrap(),
            bound[0],
            bound.last().unwrap(),
            fast.blocks()
        );
        let mut models: Vec<(String, SequenceModel)> =
            model_family().into_iter().filter(|i| i.laws > 1).map(|i| (i.label, i.model)).collect();
        models.push(("moving-average fixture".into(), fixtures::moving_average()));
        let (mut decreasing, mut flat) = (0usize, 0usize);
        for (label, model) in &models {
            for n in [10usize, 100, 1000] {
                let r = blocking_report(model, n, 20).map_err(e)?;
                schemes += 1;
                if !r.passed() {
                    return Err(format!(
                        "{label} N={n}: invariants {:?}, Z {} W {} trend {}",
                        r.invariant_violations, r.z_dominated, r.w_dominated, r.w_trend_decreasing
                    ));
                }
                if r.w_negligibility.last() < r.w_negligibility.first() {
                    decreasing += 1;
                } else {
                    flat += 1;
                }
            }
        }
        Ok(format!(
            "{schemes} schemes, invariants and Z/W domination hold; model schemes: {decreasing} strictly decreasing, {flat} flat (l_n = m + 1 throughout); {fast_detail}"
        ))
    });
}

#[test]
fn criterion_10_wittmann() {
    criterion(10, "geometric subsequence bounds", || {
        let seqs: Vec<(&str, Vec<f64>)> = vec![
            ("n", (1..=100_000).map(|i| i as f64).collect()),
            ("n^2", (1..=100_000).map(|i| (i as f64).powi(2)).collect()),
            ("2^n", (1..=200).map(|i| 2f64.powi(i)).collect()),
            ("n log(n+1)", (1..=100_000).map(|i| i as f64 * ((i + 1) as f64).ln()).collect()),
        ];
        let mut pairs = 0usize;
        for (name, a) in &seqs {
            for lambda in [1.5, 2.0, 4.0] {
                let nk = geometric_subsequence(a, lambda).map_err(e)?;
                for w in nk.windows(2) {
                    let (k, k1) = (w[0], w[1]);
                    let ok = lambda * a[k - 1] <= a[k1 - 1] && a[k1 - 1] <= lambda.powi(3) * a[k];
                    if !ok {
                        return Err(format!("{name} lambda={lambda}: n_k = {k}, n_k+1 = {k1}"));
                    }
                    pairs += 1;
                }
            }
        }
        Ok(format!("{pairs} consecutive pairs over 4 sequences and 3 lambdas"))
    });
}

#[test]
fn criterion_11_cluster_set() {
    criterion(11, "cluster set", || {
        let start = Instant::now();
        let r = cluster_set_experiment(&fixtures::moving_average(), &ClusterConfig::new(0.3, 0.7, 1_000_000, 42)).map_err(e)?;
        let secs = start.elapsed().as_secs_f64();
        let detail = format!(
            "limsup {:.4}, liminf {:.4}, coverage {:.3}, epochs {:?}",
            r.limsup_estimate,
            r.liminf_estimate,
            r.coverage,
            r.epochs.iter().map(|e| e.end).collect::<Vec<_>>()
        );
        if r.limsup_estimate >= 0.65 && r.liminf_estimate <= 0.35 && r.coverage >= 0.9 && secs < 180.0 {
            Ok(detail)
        } else {
            Err(detail)
        }
    });
}

#[test]
fn criterion_12_divergence() {
    criterion(12, "divergence under a heavy-tailed law", || {
        let start = Instant::now();
        let heavy = divergence_experiment(&fixtures::heavy_tail(), &DivergenceConfig::new(1_000_000, 100, 42)).map_err(e)?;
        let mut control_cfg = DivergenceConfig::new(1_000_000, 100, 42);
        control_cfg.law = Some(0);
        let control = divergence_experiment(&fixtures::pareto2_control(), &control_cfg).map_err(e)?;
        let secs = start.elapsed().as_secs_f64();
        let detail = format!(
            "heavy tail: {}/100 growing, median growth {:.2}, diagnostics diverging {}; Pareto(2) control: {}/100 growing, median growth {:.3}, diagnostics diverging {}, divergent {}",
            heavy.growing_paths,
            heavy.median_growth_ratio,
            heavy.finiteness.diverging,
            control.growing_paths,
            control.median_growth_ratio,
            control.finiteness.diverging,
            control.divergent
        );
        if heavy.divergent && heavy.growing_paths >= 90 && !control.divergent && secs < 300.0 {
            Ok(detail)
        } else {
            Err(detail)
        }
    });
}

fn csv_bytes(rows: &[slln_core::report::ExperimentRow]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_experiment_csv(&mut buf, rows).unwrap();
    buf
}

#[test]
fn criterion_13_determinism() {
    criterion(13, "determinism", || {
        let cluster = || {
            cluster_set_experiment(&fixtures::moving_average(), &ClusterConfig::new(0.3, 0.7, 200_000, 7))
                .map(|r| csv_bytes(&r.rows("moving-average")))
        };
        let divergence = || {
            divergence_experiment(&fixtures::heavy_tail(), &DivergenceConfig::new(20_000, 16, 7))
                .map(|r| csv_bytes(&r.rows("heavy-tail")))
        };
        let theorem1 = || {
            let sets = vec![
                AmbiguitySet::bernoullis(&[0.3, 0.7]).unwrap(),
                AmbiguitySet::bernoullis(&[0.4, 0.9]).unwrap(),
            ];
            theorem1_experiment(&sets, &Theorem1Config::new(WeightKind::Linear, 50_000, 7))
                .map(|r| csv_bytes(&r.rows("bernoulli-pairs")))
        };
        let mut bytes = 0usize;
        for (name, run) in [("cluster", &cluster as &dyn Fn() -> slln_core::Result<Vec<u8>>), ("divergence", &divergence), ("theorem1", &theorem1)] {
            let a = run().map_err(e)?;
            let b = run().map_err(e)?;
            if a != b {
                return Err(format!("{name} CSV differs between runs"));
            }
            bytes += a.len();
        }
        Ok(format!("cluster, divergence and theorem1 CSVs byte-identical across reruns ({bytes} bytes)"))
    });
}
