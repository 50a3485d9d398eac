//! Classical probability primitives.
//!
//! Every quantity the rest of the crate maximizes over is built from the types
//! here: a [`FiniteDistribution`] (exact support), a [`SamplableDistribution`]
//! (finite, Pareto, or a lattice discretization of a Pareto law), and an
//! [`AmbiguitySet`], the finite family of laws that generates the sub-linear
//! expectation at the marginal level.
//!
//! Sampling goes through counter-based ChaCha streams: the stream for a path is
//! a pure function of `(master seed, path index)`, so paths can be simulated in
//! any order or in parallel and still reproduce bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the probability sum accepted (and then rescaled) at construction.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// A law with finitely many atoms.
///
/// Support values are strictly increasing; zero-probability atoms are kept so
/// that e.g. `Bernoulli(1.0)` still has support `{0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl FiniteDistribution {
    /// Builds a distribution, sorting the support, merging duplicate values and
    /// rescaling probabilities that sum to within `1e-9` of one.
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.len() != probs.len() {
            return Err(Error::LengthMismatch { values: values.len(), probs: probs.len() });
        }
        if values.is_empty() {
            return Err(Error::EmptySupport);
        }
        if let Some(&v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("support value {v} is not finite")));
        }
        if let Some(&p) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::NegativeProb(p));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::NotNormalizable(total));
        }

        let mut pairs: Vec<(f64, f64)> = values.into_iter().zip(probs).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut support: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut merged: Vec<f64> = Vec::with_capacity(pairs.len());
        for (v, p) in pairs {
            match support.last() {
                Some(&last) if last == v => *merged.last_mut().unwrap() += p,
                _ => {
                    support.push(v);
                    merged.push(p);
                }
            }
        }
        let total: f64 = merged.iter().sum();
        for p in &mut merged {
            *p /= total;
        }
        Ok(Self { support, probs: merged })
    }

    /// Bernoulli law on `{0, 1}` with `P(1) = p`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("bernoulli p = {p}")));
        }
        Self::new(vec![0.0, 1.0], vec![1.0 - p, p])
    }

    /// Point mass at `value`.
    pub fn dirac(value: f64) -> Result<Self> {
        Self::new(vec![value], vec![1.0])
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `E_P[f(X)]`.
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.support.iter().zip(&self.probs).map(|(&x, &p)| p * f(x)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expectation(|x| x)
    }

    /// Inverse-CDF draw for a uniform `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for (&x, &p) in self.support.iter().zip(&self.probs) {
            acc += p;
            if u < acc {
                return x;
            }
        }
        // Rounding left `acc` a hair below one: fall back to the last charged atom.
        let last = self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        self.support[last]
    }

    pub fn tail_abs(&self, t: f64) -> f64 {
        self.support
            .iter()
            .zip(&self.probs)
            .filter(|(x, _)| x.abs() >= t)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn min_value(&self) -> f64 {
        self.support[0]
    }

    pub fn max_value(&self) -> f64 {
        *self.support.last().unwrap()
    }
}

/// A law that can be sampled, and for named families evaluated analytically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawRecord", into = "LawRecord")]
pub enum SamplableDistribution {
    FiniteSupport(FiniteDistribution),
    /// Pareto with tail `P(X >= t) = (scale / t)^alpha` for `t >= scale`.
    Pareto { alpha: f64, scale: f64 },
    /// Lattice discretization of a Pareto law: `scale * min(floor(Y / scale), cells)`.
    Discretized(DiscretizedPareto),
}

/// Grid description for [`SamplableDistribution::Discretized`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedPareto {
    pub alpha: f64,
    pub scale: f64,
    pub cells: usize,
}

impl DiscretizedPareto {
    pub fn to_finite(&self) -> Result<FiniteDistribution> {
        let mut values = Vec::with_capacity(self.cells);
        let mut probs = Vec::with_capacity(self.cells);
        for k in 1..=self.cells {
            let kf = k as f64;
            let p = if k == self.cells {
                kf.powf(-self.alpha)
            } else {
                kf.powf(-self.alpha) - (kf + 1.0).powf(-self.alpha)
            };
            values.push(self.scale * kf);
            probs.push(p);
        }
        FiniteDistribution::new(values, probs)
    }
}

impl SamplableDistribution {
    pub fn pareto(alpha: f64, scale: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) || !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("pareto alpha = {alpha}, scale = {scale}")));
        }
        Ok(Self::Pareto { alpha, scale })
    }

    pub fn discretized(alpha: f64, scale: f64, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(Error::EmptySupport);
        }
        Self::pareto(alpha, scale)?;
        Ok(Self::Discretized(DiscretizedPareto { alpha, scale, cells }))
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        FiniteDistribution::bernoulli(p).map(Self::FiniteSupport)
    }

    pub fn finite(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        FiniteDistribution::new(values, probs).map(Self::FiniteSupport)
    }

    /// `false` exactly for Pareto laws with `alpha <= 1`.
    pub fn has_finite_mean(&self) -> bool {
        match self {
            Self::Pareto { alpha, .. } => *alpha > 1.0,
            _ => true,
        }
    }

    /// Exact finite form, for the finite and discretized variants.
    pub fn as_finite(&self) -> Option<FiniteDistribution> {
        match self {
            Self::FiniteSupport(d) => Some(d.clone()),
            Self::Discretized(g) => g.to_finite().ok(),
            Self::Pareto { .. } => None,
        }
    }

    /// Draws one value from the stream.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::FiniteSupport(d) => d.quantile(rng.random::<f64>()),
            Self::Pareto { alpha, scale } => {
                // 1 - [0, 1) lies in (0, 1], keeping the draw finite.
                pareto_from_uniform(*alpha, *scale, 1.0 - rng.random::<f64>())
            }
            Self::Discretized(g) => {
                let y = pareto_from_uniform(g.alpha, g.scale, 1.0 - rng.random::<f64>());
                let k = ((y / g.scale).floor() as usize).clamp(1, g.cells);
                g.scale * k as f64
            }
        }
    }

    /// `P(|X| >= t)`.
    pub fn tail_abs(&self, t: f64) -> f64 {
        match self {
            Self::FiniteSupport(d) => d.tail_abs(t),
            Self::Pareto { alpha, scale } => pareto_tail(*alpha, *scale, t),
            Self::Discretized(g) => g.to_finite().map(|d| d.tail_abs(t)).unwrap_or(f64::NAN),
        }
    }

    /// `E[(|X| - c)^+]`; infinite for Pareto laws without a mean.
    pub fn excess_abs(&self, c: f64) -> f64 {
        match self {
            Self::Pareto { alpha, scale } => {
                if *alpha <= 1.0 {
                    f64::INFINITY
                } else if c <= *scale {
                    alpha * scale / (alpha - 1.0) - c
                } else {
                    scale.powf(*alpha) * c.powf(1.0 - alpha) / (alpha - 1.0)
                }
            }
            other => other
                .as_finite()
                .map(|d| d.expectation(|x| (x.abs() - c).max(0.0)))
                .unwrap_or(f64::NAN),
        }
    }

    /// `E[X^(c)]`, the mean of `X` clamped to `[-c, c]`.
    pub fn truncated_mean(&self, c: f64) -> f64 {
        match self {
            Self::Pareto { alpha, scale } => pareto_truncated_mean(*alpha, *scale, c),
            other => other
                .as_finite()
                .map(|d| d.expectation(|x| crate::capacity::truncate(x, c)))
                .unwrap_or(f64::NAN),
        }
    }

    /// Mean when finite.
    pub fn mean(&self) -> Option<f64> {
        match self {
            Self::Pareto { alpha, scale } => (*alpha > 1.0).then(|| alpha * scale / (alpha - 1.0)),
            other => other.as_finite().map(|d| d.mean()),
        }
    }
}

/// Inverse CDF of the Pareto law at `u` in `(0, 1]`.
pub fn pareto_from_uniform(alpha: f64, scale: f64, u: f64) -> f64 {
    scale * u.powf(-1.0 / alpha)
}

pub fn pareto_tail(alpha: f64, scale: f64, t: f64) -> f64 {
    if t <= scale {
        1.0
    } else {
        (scale / t).powf(alpha)
    }
}

/// `E[min(X, c)]` for `X ~ Pareto(alpha, scale)`.
pub fn pareto_truncated_mean(alpha: f64, scale: f64, c: f64) -> f64 {
    if c <= scale {
        c
    } else if (alpha - 1.0).abs() < 1e-15 {
        scale * (1.0 + (c / scale).ln())
    } else {
        (alpha * scale - scale.powf(alpha) * c.powf(1.0 - alpha)) / (alpha - 1.0)
    }
}

/// Plain-record form used for (de)serialization.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LawRecord {
    Finite { support: Vec<f64>, probs: Vec<f64> },
    Pareto { alpha: f64, scale: f64 },
    DiscretizedPareto { alpha: f64, scale: f64, cells: usize },
}

impl TryFrom<LawRecord> for SamplableDistribution {
    type Error = Error;

    fn try_from(rec: LawRecord) -> Result<Self> {
        match rec {
            LawRecord::Finite { support, probs } => Self::finite(support, probs),
            LawRecord::Pareto { alpha, scale } => Self::pareto(alpha, scale),
            LawRecord::DiscretizedPareto { alpha, scale, cells } => {
                Self::discretized(alpha, scale, cells)
            }
        }
    }
}

impl From<SamplableDistribution> for LawRecord {
    fn from(law: SamplableDistribution) -> Self {
        match law {
            SamplableDistribution::FiniteSupport(d) => {
                LawRecord::Finite { support: d.support, probs: d.probs }
            }
            SamplableDistribution::Pareto { alpha, scale } => LawRecord::Pareto { alpha, scale },
            SamplableDistribution::Discretized(g) => {
                LawRecord::DiscretizedPareto { alpha: g.alpha, scale: g.scale, cells: g.cells }
            }
        }
    }
}

/// A finite, ordered family of laws. Order is the tie-breaking order for every
/// argmax downstream (lowest index wins).
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguitySet {
    laws: Vec<SamplableDistribution>,
    exact_capable: bool,
}

impl AmbiguitySet {
    pub fn new(laws: Vec<SamplableDistribution>) -> Result<Self> {
        if laws.is_empty() {
            return Err(Error::EmptyAmbiguitySet);
        }
        let exact_capable = match &laws[0] {
            SamplableDistribution::FiniteSupport(first) => laws.iter().all(|law| match law {
                SamplableDistribution::FiniteSupport(d) => d.support() == first.support(),
                _ => false,
            }),
            _ => false,
        };
        Ok(Self { laws, exact_capable })
    }

    /// Convenience constructor for a family of Bernoulli laws.
    pub fn bernoullis(ps: &[f64]) -> Result<Self> {
        Self::new(ps.iter().map(|&p| SamplableDistribution::bernoulli(p)).collect::<Result<_>>()?)
    }

    pub fn laws(&self) -> &[SamplableDistribution] {
        &self.laws
    }

    pub fn len(&self) -> usize {
        self.laws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.laws.is_empty()
    }

    pub fn exact_capable(&self) -> bool {
        self.exact_capable
    }

    /// Common support of an exact-capable set.
    pub fn common_support(&self) -> Option<&[f64]> {
        match (&self.laws[0], self.exact_capable) {
            (SamplableDistribution::FiniteSupport(d), true) => Some(d.support()),
            _ => None,
        }
    }

    /// Probability matrix, one row per law, over the common support.
    pub fn prob_matrix(&self) -> Option<Vec<Vec<f64>>> {
        if !self.exact_capable {
            return None;
        }
        Some(
            self.laws
                .iter()
                .map(|law| match law {
                    SamplableDistribution::FiniteSupport(d) => d.probs().to_vec(),
                    _ => unreachable!("exact-capable sets hold finite laws only"),
                })
                .collect(),
        )
    }

    /// `sup_P P(|X_1| >= t)` over the family.
    pub fn upper_tail_abs(&self, t: f64) -> f64 {
        self.laws.iter().map(|l| l.tail_abs(t)).fold(0.0, f64::max)
    }

    /// `sup_P E_P[(|X_1| - c)^+]` over the family.
    pub fn upper_excess_abs(&self, c: f64) -> f64 {
        self.laws.iter().map(|l| l.excess_abs(c)).fold(0.0, f64::max)
    }

    /// `sup_P E_P[X_1^(c)]` over the family.
    pub fn upper_truncated_mean(&self, c: f64) -> f64 {
        self.laws.iter().map(|l| l.truncated_mean(c)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the first law without a finite mean.
    pub fn heavy_tail_index(&self) -> Option<usize> {
        self.laws.iter().position(|l| !l.has_finite_mean())
    }
}

/// RNG stream handle. One per concurrent consumer, never shared.
pub type Stream = ChaCha8Rng;

const AUX_SALT: u64 = 0xA076_1D64_78BD_642F;

/// The sampling stream of path `path` under `seed`.
pub fn path_stream(seed: u64, path: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// An auxiliary stream for randomized strategy choices, disjoint from the
/// sampling stream of the same path.
pub fn aux_stream(seed: u64, path: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ AUX_SALT);
    rng.set_stream(path);
    rng
}
