use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::AmbiguitySet;

/// Map from a window of `m + 1` consecutive driver values to one observable.
#[derive(Clone)]
pub enum WindowFn {
    /// First coordinate of the window.
    Identity,
    /// Arithmetic mean of the window.
    Mean,
    /// Largest value in the window.
    Max,
    /// `a * sum(window) + b`.
    Affine { a: f64, b: f64 },
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl WindowFn {
    pub fn apply(&self, window: &[f64]) -> f64 {
        match self {
            WindowFn::Identity => window[0],
            WindowFn::Mean => window.iter().sum::<f64>() / window.len() as f64,
            WindowFn::Max => window.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            WindowFn::Affine { a, b } => a * window.iter().sum::<f64>() + b,
            WindowFn::Custom(f) => f(window),
        }
    }

    pub fn name(&self) -> String {
        match self {
            WindowFn::Identity => "identity".into(),
            WindowFn::Mean => "mean_window".into(),
            WindowFn::Max => "max_window".into(),
            WindowFn::Affine { a, b } => format!("affine_window({a},{b})"),
            WindowFn::Custom(_) => "custom".into(),
        }
    }
}

impl fmt::Debug for WindowFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Clone, Debug)]
pub enum ModelKind {
    /// `X_i = e_i` for Peng-independent drivers `e_i`.
    Iid,
    /// `X_i = g(e_i, ..., e_{i+m})`.
    MovingWindow { m: usize, window: WindowFn },
}

/// A sequence `(X_n)` built from a driver ambiguity set.
///
/// Drivers are processed in index order and every driver is independent of
/// the ones before it; `n` observables consume `n + m` drivers.
#[derive(Clone, Debug)]
pub struct SequenceModel {
    driver: AmbiguitySet,
    kind: ModelKind,
}

impl SequenceModel {
    pub fn iid(driver: AmbiguitySet) -> Self {
        Self { driver, kind: ModelKind::Iid }
    }

    pub fn moving_window(m: usize, driver: AmbiguitySet, window: WindowFn) -> Self {
        Self { driver, kind: ModelKind::MovingWindow { m, window } }
    }

    pub fn driver(&self) -> &AmbiguitySet {
        &self.driver
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    /// Dependence range `m` (zero for i.i.d. models).
    pub fn m(&self) -> usize {
        match &self.kind {
            ModelKind::Iid => 0,
            ModelKind::MovingWindow { m, .. } => *m,
        }
    }

    pub fn is_iid(&self) -> bool {
        matches!(self.kind, ModelKind::Iid)
    }

    /// Number of driver coordinates needed for `n` observables.
    pub fn drivers_for(&self, n: usize) -> usize {
        n + self.m()
    }

    /// Observable computed from one full window of driver values.
    pub fn observable(&self, window: &[f64]) -> f64 {
        match &self.kind {
            ModelKind::Iid => window[0],
            ModelKind::MovingWindow { window: g, .. } => g.apply(window),
        }
    }

    /// Writes the observables determined by `drivers` into `out`.
    pub fn observables_into(&self, drivers: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let w = self.m() + 1;
        if drivers.len() < w {
            return;
        }
        out.extend(drivers.windows(w).map(|win| self.observable(win)));
    }

    pub fn observables(&self, drivers: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        self.observables_into(drivers, &mut out);
        out
    }

    pub fn require_exact(&self) -> Result<DriverSpace> {
        match (self.driver.common_support(), self.driver.prob_matrix()) {
            (Some(values), Some(probs)) => Ok(DriverSpace { values: values.to_vec(), probs }),
            _ => Err(Error::NotExactCapable),
        }
    }

    /// Observable value for every window code, most significant digit first.
    pub(crate) fn window_table(&self, space: &DriverSpace) -> Vec<f64> {
        let s = space.values.len();
        let w = self.m() + 1;
        let total = s.pow(w as u32);
        let mut window = vec![0.0; w];
        (0..total)
            .map(|code| {
                let mut c = code;
                for slot in (0..w).rev() {
                    window[slot] = space.values[c % s];
                    c /= s;
                }
                self.observable(&window)
            })
            .collect()
    }

    /// Every value an observable can take, with the associated extremes.
    pub fn observable_range(&self) -> Result<(f64, f64)> {
        let space = self.require_exact()?;
        let table = self.window_table(&space);
        let lo = table.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = table.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok((lo, hi))
    }
}

/// Exact driver lattice: common support values and one probability row per law.
#[derive(Clone, Debug, PartialEq)]
pub struct DriverSpace {
    pub values: Vec<f64>,
    pub probs: Vec<Vec<f64>>,
}

impl DriverSpace {
    pub fn support_size(&self) -> usize {
        self.values.len()
    }

    pub fn laws(&self) -> usize {
        self.probs.len()
    }

    /// Lowest-index law maximizing `sum_d probs[j][d] * child[d]`.
    pub(crate) fn best_law(&self, child: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (j, row) in self.probs.iter().enumerate() {
            let v: f64 = row.iter().zip(child).map(|(p, c)| if *p == 0.0 { 0.0 } else { p * c }).sum();
            if v > best.1 {
                best = (j, v);
            }
        }
        best
    }
}
