//! Adversary strategies: history-dependent law selection. Each strategy
//! induces one classical measure on driver paths.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use super::dp::{leaf_count, DEFAULT_LEAF_CAP};
use super::functional::Functional;
use super::model::SequenceModel;
use crate::error::{Error, Result};
use crate::measures::{aux_stream, path_stream, Stream};

/// A policy `(step, driver history) -> law index`.
pub type PolicyFn = Arc<dyn Fn(usize, &[f64]) -> usize + Send + Sync>;

#[derive(Clone)]
pub enum AdversaryStrategy {
    Constant(usize),
    /// `(length, law)` epochs, repeated cyclically.
    EpochSchedule(Vec<(usize, usize)>),
    /// Keys are matched against the end of the driver history; the longest
    /// matching key wins and `default` applies when none matches.
    Table { entries: Vec<(Vec<f64>, usize)>, default: usize },
    Hook { label: String, policy: PolicyFn },
    /// Law `high` with probability `weight` and `low` otherwise, drawn
    /// independently at every step from the auxiliary stream. Epoch `e`
    /// covers driver steps below `epochs[e].0`; the last weight persists.
    Mixture { high: usize, low: usize, epochs: Vec<(usize, f64)> },
}

/// Law selected at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LawChoice {
    Pure(usize),
    Mix { high: usize, low: usize, weight_high: f64 },
}

impl fmt::Debug for AdversaryStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl AdversaryStrategy {
    pub fn hook(label: impl Into<String>, policy: impl Fn(usize, &[f64]) -> usize + Send + Sync + 'static) -> Self {
        Self::Hook { label: label.into(), policy: Arc::new(policy) }
    }

    pub fn choose(&self, step: usize, history: &[f64]) -> LawChoice {
        match self {
            Self::Constant(j) => LawChoice::Pure(*j),
            Self::EpochSchedule(epochs) => {
                let period: usize = epochs.iter().map(|e| e.0).sum();
                let mut pos = step % period.max(1);
                for &(len, law) in epochs {
                    if pos < len {
                        return LawChoice::Pure(law);
                    }
                    pos -= len;
                }
                LawChoice::Pure(epochs.last().map_or(0, |e| e.1))
            }
            Self::Table { entries, default } => {
                let mut best: Option<(usize, usize)> = None;
                for (key, law) in entries {
                    if key.len() <= history.len()
                        && history[history.len() - key.len()..] == key[..]
                        && best.is_none_or(|(l, _)| key.len() > l)
                    {
                        best = Some((key.len(), *law));
                    }
                }
                LawChoice::Pure(best.map_or(*default, |b| b.1))
            }
            Self::Hook { policy, .. } => LawChoice::Pure(policy(step, history)),
            Self::Mixture { high, low, epochs } => {
                let e = epochs.partition_point(|&(end, _)| end <= step).min(epochs.len().saturating_sub(1));
                let weight_high = epochs.get(e).map_or(1.0, |x| x.1);
                LawChoice::Mix { high: *high, low: *low, weight_high }
            }
        }
    }

    /// Checks every law index the strategy can name without running it.
    /// Hooks are checked when they are evaluated.
    pub fn validate(&self, laws: usize) -> Result<()> {
        let check = |index: usize| {
            if index < laws {
                Ok(())
            } else {
                Err(Error::LawIndexOutOfRange { index, laws })
            }
        };
        match self {
            Self::Constant(j) => check(*j),
            Self::EpochSchedule(epochs) => {
                if epochs.iter().all(|e| e.0 == 0) {
                    return Err(Error::InvalidParameter("epoch schedule has zero total length".into()));
                }
                epochs.iter().try_for_each(|e| check(e.1))
            }
            Self::Table { entries, default } => {
                check(*default)?;
                entries.iter().try_for_each(|e| check(e.1))
            }
            Self::Hook { .. } => Ok(()),
            Self::Mixture { high, low, epochs } => {
                check(*high)?;
                check(*low)?;
                match epochs.iter().find(|e| !(0.0..=1.0).contains(&e.1)) {
                    Some(e) => Err(Error::InvalidParameter(format!("mixture weight {} outside [0, 1]", e.1))),
                    None => Ok(()),
                }
            }
        }
    }

    /// Whether `choose` reads the driver history.
    pub fn needs_history(&self) -> bool {
        matches!(self, Self::Table { .. } | Self::Hook { .. })
    }

    pub fn label(&self) -> String {
        match self {
            Self::Constant(j) => format!("constant({j})"),
            Self::EpochSchedule(epochs) => {
                let parts: Vec<String> = epochs.iter().map(|(l, j)| format!("{l}x{j}")).collect();
                format!("epochs({})", parts.join(";"))
            }
            Self::Table { entries, default } => format!("table({} entries,default {default})", entries.len()),
            Self::Hook { label, .. } => label.clone(),
            Self::Mixture { high, low, epochs } => format!("mixture({high}/{low},{} epochs)", epochs.len()),
        }
    }
}

fn resolve(choice: LawChoice, laws: usize) -> Result<LawChoice> {
    let check = |index: usize| {
        if index < laws {
            Ok(())
        } else {
            Err(Error::LawIndexOutOfRange { index, laws })
        }
    };
    match choice {
        LawChoice::Pure(j) => check(j)?,
        LawChoice::Mix { high, low, .. } => {
            check(high)?;
            check(low)?;
        }
    }
    Ok(choice)
}

/// `E_P[phi]` for the measure induced by `strategy`, by forward enumeration of
/// driver paths. Branches of probability zero are never visited.
pub fn strategy_measure_expectation(model: &SequenceModel, strategy: &AdversaryStrategy, phi: &Functional) -> Result<f64> {
    let space = model.require_exact()?;
    strategy.validate(space.laws())?;
    let n = phi.horizon();
    let drivers = model.drivers_for(n);
    let leaves = leaf_count(&space, drivers);
    if leaves > DEFAULT_LEAF_CAP {
        return Err(Error::StrategySpaceTooLarge { count: leaves, cap: DEFAULT_LEAF_CAP });
    }
    let mut history = Vec::with_capacity(drivers);
    let mut obs = Vec::with_capacity(n);
    let mut row = vec![0.0; space.support_size()];
    forward(model, &space, strategy, phi, drivers, &mut history, &mut obs, &mut row)
}

#[allow(clippy::too_many_arguments)]
fn forward(
    model: &SequenceModel,
    space: &super::model::DriverSpace,
    strategy: &AdversaryStrategy,
    phi: &Functional,
    drivers: usize,
    history: &mut Vec<f64>,
    obs: &mut Vec<f64>,
    row: &mut Vec<f64>,
) -> Result<f64> {
    if history.len() == drivers {
        model.observables_into(history, obs);
        return Ok(phi.eval(obs));
    }
    match resolve(strategy.choose(history.len(), history), space.laws())? {
        LawChoice::Pure(j) => row.copy_from_slice(&space.probs[j]),
        LawChoice::Mix { high, low, weight_high } => {
            for (d, slot) in row.iter_mut().enumerate() {
                *slot = weight_high * space.probs[high][d] + (1.0 - weight_high) * space.probs[low][d];
            }
        }
    }
    let weights = row.clone();
    let mut total = 0.0;
    for (d, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        history.push(space.values[d]);
        total += w * forward(model, space, strategy, phi, drivers, history, obs, row)?;
        history.pop();
    }
    Ok(total)
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
    pub paths: usize,
}

impl McEstimate {
    pub(crate) fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self { mean, se: (var / n).sqrt(), paths: samples.len() }
    }
}

/// Monte Carlo form of [`strategy_measure_expectation`] for samplable models.
pub fn strategy_measure_estimate(
    model: &SequenceModel,
    strategy: &AdversaryStrategy,
    phi: &Functional,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    use rayon::prelude::*;
    strategy.validate(model.driver().len())?;
    if n_paths == 0 {
        return Err(Error::InvalidParameter("at least one path is required".into()));
    }
    let n = phi.horizon();
    let samples: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|path| {
            let mut sim = PathSimulator::new(model, strategy, seed, path);
            let mut obs = Vec::with_capacity(n);
            for _ in 0..n {
                obs.push(sim.next_observable()?);
            }
            Ok(phi.eval(&obs))
        })
        .collect::<Result<_>>()?;
    Ok(McEstimate::from_samples(&samples))
}

/// Streams the observables of one path: drivers are drawn one at a time from
/// the law the strategy selects, and randomized choices use the auxiliary
/// stream of the same path.
pub(crate) struct PathSimulator<'a> {
    model: &'a SequenceModel,
    strategy: &'a AdversaryStrategy,
    rng: Stream,
    aux: Stream,
    step: usize,
    history: Vec<f64>,
    window: Vec<f64>,
    keep_history: bool,
}

impl<'a> PathSimulator<'a> {
    pub fn new(model: &'a SequenceModel, strategy: &'a AdversaryStrategy, seed: u64, path: u64) -> Self {
        Self {
            model,
            strategy,
            rng: path_stream(seed, path),
            aux: aux_stream(seed, path),
            step: 0,
            history: Vec::new(),
            window: Vec::with_capacity(model.m() + 1),
            keep_history: strategy.needs_history(),
        }
    }

    fn next_driver(&mut self) -> Result<f64> {
        let laws = self.model.driver().laws();
        let j = match resolve(self.strategy.choose(self.step, &self.history), laws.len())? {
            LawChoice::Pure(j) => j,
            LawChoice::Mix { high, low, weight_high } => {
                if self.aux.random::<f64>() < weight_high {
                    high
                } else {
                    low
                }
            }
        };
        let v = laws[j].sample(&mut self.rng);
        self.step += 1;
        if self.keep_history {
            self.history.push(v);
        }
        Ok(v)
    }

    pub fn next_observable(&mut self) -> Result<f64> {
        let w = self.model.m() + 1;
        if self.window.len() == w {
            self.window.remove(0);
        }
        while self.window.len() < w {
            let v = self.next_driver()?;
            self.window.push(v);
        }
        Ok(self.model.observable(&self.window))
    }
}
