use std::fmt;
use std::sync::Arc;

use rand::Rng;

/// Slack used when comparing a partial-sum deviation with a threshold, so that
/// lattice sums and plain floating sums classify boundary points identically.
pub const BOUNDARY_TOL: f64 = 1e-9;

pub type Payoff = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// How a partial-sum deviation `S_k - c_k` is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deviation {
    Upward,
    Absolute,
}

/// The event `max_{k <= n} dev(S_k - c_k) >= threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingSpec {
    pub centers: Vec<f64>,
    pub threshold: f64,
    pub deviation: Deviation,
}

impl CrossingSpec {
    pub fn horizon(&self) -> usize {
        self.centers.len()
    }

    pub fn deviation_at(&self, partial_sum: f64, k: usize) -> f64 {
        let d = partial_sum - self.centers[k];
        match self.deviation {
            Deviation::Upward => d,
            Deviation::Absolute => d.abs(),
        }
    }

    pub fn hits(&self, partial_sum: f64, k: usize) -> bool {
        self.deviation_at(partial_sum, k) >= self.threshold - BOUNDARY_TOL
    }

    pub fn crossed(&self, observables: &[f64]) -> bool {
        let mut s = 0.0;
        observables.iter().enumerate().any(|(k, x)| {
            s += x;
            self.hits(s, k)
        })
    }
}

/// Growth metadata for membership in the locally Lipschitz class:
/// `|f(x) - f(y)| <= constant * (1 + |x|^order + |y|^order) * |x - y|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzMeta {
    pub constant: f64,
    pub order: u32,
}

/// Shape information that lets the engine pick a compressed recursion.
#[derive(Clone)]
pub(crate) enum Structure {
    Opaque,
    /// `scale * S_n + offset`.
    Linear { scale: f64, offset: f64 },
    /// `f(S_n)`.
    OfSum(ScalarMap),
    /// `hit` on the crossing event, `miss` off it.
    Crossing { spec: CrossingSpec, hit: f64, miss: f64 },
    /// `f(max_k |S_k - c_k|)`.
    MaxDeviation { centers: Vec<f64>, then: ScalarMap },
}

/// A payoff `phi(X_1, ..., X_n)` evaluated on observable tuples.
#[derive(Clone)]
pub struct Functional {
    horizon: usize,
    eval: Payoff,
    pub(crate) structure: Structure,
    lipschitz: Option<LipschitzMeta>,
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shape = match &self.structure {
            Structure::Opaque => "opaque",
            Structure::Linear { .. } => "linear-sum",
            Structure::OfSum(_) => "of-sum",
            Structure::Crossing { .. } => "crossing",
            Structure::MaxDeviation { .. } => "max-deviation",
        };
        f.debug_struct("Functional").field("horizon", &self.horizon).field("shape", &shape).finish()
    }
}

impl Functional {
    pub fn new(horizon: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { horizon, eval: Arc::new(f), structure: Structure::Opaque, lipschitz: None }
    }

    fn structured(horizon: usize, eval: Payoff, structure: Structure) -> Self {
        Self { horizon, eval, structure, lipschitz: None }
    }

    pub fn constant(horizon: usize, c: f64) -> Self {
        Self::linear(horizon, 0.0, c)
    }

    /// `scale * S_n + offset`.
    pub fn linear(horizon: usize, scale: f64, offset: f64) -> Self {
        Self::structured(
            horizon,
            Arc::new(move |x: &[f64]| scale * x.iter().sum::<f64>() + offset),
            Structure::Linear { scale, offset },
        )
    }

    pub fn sum(horizon: usize) -> Self {
        Self::linear(horizon, 1.0, 0.0)
    }

    pub fn mean(horizon: usize) -> Self {
        Self::linear(horizon, 1.0 / horizon as f64, 0.0)
    }

    /// `X_{index + 1}` (zero-based `index`).
    pub fn coordinate(horizon: usize, index: usize) -> Self {
        assert!(index < horizon, "coordinate {index} outside horizon {horizon}");
        Self::new(horizon, move |x| x[index])
    }

    /// `f(S_n)`.
    pub fn of_sum(horizon: usize, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let f: ScalarMap = Arc::new(f);
        let g = f.clone();
        Self::structured(horizon, Arc::new(move |x: &[f64]| g(x.iter().sum())), Structure::OfSum(f))
    }

    /// Indicator of a partial-sum crossing event.
    pub fn crossing_indicator(spec: CrossingSpec) -> Self {
        Self::crossing_payoff(spec, 1.0, 0.0)
    }

    pub(crate) fn crossing_payoff(spec: CrossingSpec, hit: f64, miss: f64) -> Self {
        let horizon = spec.horizon();
        let s = spec.clone();
        Self::structured(
            horizon,
            Arc::new(move |x: &[f64]| if s.crossed(x) { hit } else { miss }),
            Structure::Crossing { spec, hit, miss },
        )
    }

    /// `max_{k <= n} |S_k - k * center|`.
    pub fn max_partial_sum_deviation(horizon: usize, center: f64) -> Self {
        let centers = (1..=horizon).map(|k| k as f64 * center).collect();
        Self::max_deviation(centers, Arc::new(|d| d))
    }

    pub(crate) fn max_deviation(centers: Vec<f64>, then: ScalarMap) -> Self {
        let horizon = centers.len();
        let c = centers.clone();
        let t = then.clone();
        Self::structured(
            horizon,
            Arc::new(move |x: &[f64]| t(max_abs_deviation(x, &c))),
            Structure::MaxDeviation { centers, then },
        )
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn eval(&self, observables: &[f64]) -> f64 {
        (self.eval)(observables)
    }

    pub fn lipschitz(&self) -> Option<LipschitzMeta> {
        self.lipschitz
    }

    pub fn with_lipschitz(mut self, meta: LipschitzMeta) -> Self {
        self.lipschitz = Some(meta);
        self
    }

    /// `true` when the engine may use a compressed recursion for this payoff.
    pub fn is_structured(&self) -> bool {
        !matches!(self.structure, Structure::Opaque)
    }

    /// Same payoff with structure information dropped.
    pub fn opaque(&self) -> Self {
        Self { structure: Structure::Opaque, ..self.clone() }
    }

    /// `x -> f(phi(x))`.
    pub fn map(&self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let f: ScalarMap = Arc::new(f);
        let structure = match &self.structure {
            Structure::Linear { scale, offset } => {
                let (a, b, g) = (*scale, *offset, f.clone());
                Structure::OfSum(Arc::new(move |s| g(a * s + b)))
            }
            Structure::OfSum(h) => {
                let (h, g) = (h.clone(), f.clone());
                Structure::OfSum(Arc::new(move |s| g(h(s))))
            }
            Structure::Crossing { spec, hit, miss } => {
                Structure::Crossing { spec: spec.clone(), hit: f(*hit), miss: f(*miss) }
            }
            Structure::MaxDeviation { centers, then } => {
                let (h, g) = (then.clone(), f.clone());
                Structure::MaxDeviation { centers: centers.clone(), then: Arc::new(move |d| g(h(d))) }
            }
            Structure::Opaque => Structure::Opaque,
        };
        let inner = self.eval.clone();
        Self::structured(self.horizon, Arc::new(move |x: &[f64]| f(inner(x))), structure)
    }

    /// `lambda * phi + c`, keeping linear structure exact.
    pub fn affine(&self, lambda: f64, c: f64) -> Self {
        if let Structure::Linear { scale, offset } = self.structure {
            return Self::linear(self.horizon, lambda * scale, lambda * offset + c);
        }
        self.map(move |v| lambda * v + c)
    }

    pub fn scale(&self, lambda: f64) -> Self {
        self.affine(lambda, 0.0)
    }

    pub fn shift(&self, c: f64) -> Self {
        self.affine(1.0, c)
    }

    pub fn neg(&self) -> Self {
        self.affine(-1.0, 0.0)
    }

    /// Pointwise combination of two payoffs on the same horizon.
    pub fn zip_with(
        &self,
        other: &Functional,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        assert_eq!(self.horizon, other.horizon, "functionals on different horizons");
        let (a, b) = (self.eval.clone(), other.eval.clone());
        Self::new(self.horizon, move |x| f(a(x), b(x)))
    }

    pub fn add(&self, other: &Functional) -> Self {
        if let (Structure::Linear { scale: a, offset: b }, Structure::Linear { scale: c, offset: d }) =
            (&self.structure, &other.structure)
        {
            assert_eq!(self.horizon, other.horizon, "functionals on different horizons");
            return Self::linear(self.horizon, a + c, b + d);
        }
        self.zip_with(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &Functional) -> Self {
        self.add(&other.neg())
    }

    /// Samples `pairs` random point pairs in `[-radius, radius]^n` and checks
    /// the local Lipschitz bound. `true` when no metadata is attached.
    pub fn spot_check_lipschitz<R: Rng>(&self, rng: &mut R, pairs: usize, radius: f64) -> bool {
        let Some(meta) = self.lipschitz else { return true };
        let n = self.horizon;
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        for _ in 0..pairs {
            for i in 0..n {
                x[i] = rng.random_range(-radius..=radius);
                y[i] = rng.random_range(-radius..=radius);
            }
            let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
            let dist = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let order = meta.order as i32;
            let bound = meta.constant * (1.0 + norm(&x).powi(order) + norm(&y).powi(order)) * dist;
            if (self.eval(&x) - self.eval(&y)).abs() > bound + 1e-12 {
                return false;
            }
        }
        true
    }
}

pub(crate) fn max_abs_deviation(x: &[f64], centers: &[f64]) -> f64 {
    let mut s = 0.0;
    let mut best = 0.0f64;
    for (k, v) in x.iter().enumerate() {
        s += v;
        best = best.max((s - centers[k]).abs());
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::path_stream;

    #[test]
    fn structured_constructors_evaluate_consistently() {
        let x = [1.0, 0.0, 1.0];
        assert_eq!(Functional::sum(3).eval(&x), 2.0);
        assert!((Functional::mean(3).eval(&x) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(Functional::of_sum(3, |s| s * s).eval(&x), 4.0);
        assert_eq!(Functional::max_partial_sum_deviation(3, 0.5).eval(&x), 0.5);
        let spec = CrossingSpec { centers: vec![0.5, 1.0, 1.5], threshold: 0.5, deviation: Deviation::Upward };
        assert_eq!(Functional::crossing_indicator(spec).eval(&x), 1.0);
    }

    #[test]
    fn combinators_preserve_values() {
        let x = [2.0, -1.0];
        let phi = Functional::sum(2);
        assert_eq!(phi.affine(3.0, 1.0).eval(&x), 4.0);
        assert!(matches!(phi.affine(3.0, 1.0).structure, Structure::Linear { .. }));
        assert_eq!(phi.map(|v| v * v).eval(&x), 1.0);
        assert!(matches!(phi.map(|v| v * v).structure, Structure::OfSum(_)));
        let psi = Functional::coordinate(2, 0);
        assert_eq!(phi.add(&psi).eval(&x), 3.0);
        assert_eq!(phi.sub(&psi).eval(&x), -1.0);
        assert_eq!(psi.neg().eval(&x), -2.0);
        assert!(!phi.opaque().is_structured());
    }

    #[test]
    fn lipschitz_spot_check() {
        let mut rng = path_stream(5, 0);
        let square = Functional::of_sum(2, |s| s * s).with_lipschitz(LipschitzMeta { constant: 2.0, order: 1 });
        assert!(square.spot_check_lipschitz(&mut rng, 500, 5.0));
        let cube = Functional::of_sum(2, |s| s * s * s).with_lipschitz(LipschitzMeta { constant: 0.1, order: 1 });
        assert!(!cube.spot_check_lipschitz(&mut rng, 500, 5.0));
    }

    #[test]
    fn crossing_uses_boundary_slack() {
        let spec = CrossingSpec { centers: vec![0.1, 0.3], threshold: 0.2, deviation: Deviation::Absolute };
        // 0.1 + 0.2 = 0.30000000000000004; the centered sum still lands on the boundary.
        assert!(spec.crossed(&[0.1, 0.0 + 0.2 + 0.2]));
        assert!(!spec.crossed(&[0.1, 0.2]));
    }
}
