//! Aitken-accelerated stopping rule.

const DENOM_FLOOR: f64 = 1e-12;
const STAGNATION: f64 = 1e-10;

/// Tracks the last three objective values and the Aitken estimate of the
/// limit
///
/// `l_inf(t) = l(t-1) + (l(t) - l(t-1)) / (1 - a(t-1))`,
/// `a(t-1) = (l(t) - l(t-1)) / (l(t-1) - l(t-2))`.
#[derive(Debug, Clone, Default)]
pub struct AitkenTracker {
    values: Vec<f64>,
    acceleration: Option<f64>,
    estimate: Option<f64>,
    previous_estimate: Option<f64>,
}

impl AitkenTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, value: f64) {
        self.values.push(value);
        if self.values.len() > 3 {
            self.values.remove(0);
        }
        self.previous_estimate = self.estimate;
        self.acceleration = None;
        self.estimate = None;
        if let [l0, l1, l2] = self.values[..] {
            let denom = l1 - l0;
            if denom.abs() > DENOM_FLOOR {
                let a = (l2 - l1) / denom;
                self.acceleration = Some(a);
                if a < 1.0 {
                    self.estimate = Some(l1 + (l2 - l1) / (1.0 - a));
                }
            }
        }
    }

    pub fn acceleration(&self) -> Option<f64> {
        self.acceleration
    }

    /// Current asymptotic estimate, if defined.
    pub fn estimate(&self) -> Option<f64> {
        self.estimate
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True when two successive limit estimates differ by less than `tol`,
    /// or when the raw objective has stopped moving.
    pub fn converged(&self, tol: f64) -> bool {
        let n = self.values.len();
        if n >= 2 && (self.values[n - 1] - self.values[n - 2]).abs() < STAGNATION {
            return true;
        }
        match (self.previous_estimate, self.estimate) {
            (Some(prev), Some(cur)) => (cur - prev).abs() < tol,
            _ => false,
        }
    }
}
