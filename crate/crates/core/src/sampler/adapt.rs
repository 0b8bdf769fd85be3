//! Warmup adaptation: dual-averaging step size and diagonal metric.

use serde::{Deserialize, Serialize};

/// Dual-averaging controller constants (gamma, t0, kappa) and target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualAveragingSettings {
    pub target_accept: f64,
    pub gamma: f64,
    pub t0: f64,
    pub kappa: f64,
}

impl Default for DualAveragingSettings {
    fn default() -> Self {
        DualAveragingSettings {
            target_accept: 0.8,
            gamma: 0.05,
            t0: 10.0,
            kappa: 0.75,
        }
    }
}

/// Nesterov dual averaging on `log step_size`, shrinking toward
/// `log(10 * initial_step)`.
#[derive(Debug, Clone)]
pub struct DualAveraging {
    settings: DualAveragingSettings,
    mu: f64,
    log_step: f64,
    log_step_bar: f64,
    h_bar: f64,
    count: usize,
}

impl DualAveraging {
    pub fn new(initial_step: f64, settings: DualAveragingSettings) -> Self {
        DualAveraging {
            settings,
            mu: (10.0 * initial_step).ln(),
            log_step: initial_step.ln(),
            log_step_bar: 0.0,
            h_bar: 0.0,
            count: 0,
        }
    }

    /// Feeds one acceptance statistic and updates the step size.
    pub fn update(&mut self, accept_stat: f64) {
        let s = &self.settings;
        self.count += 1;
        let t = self.count as f64;
        let w = 1.0 / (t + s.t0);
        let accept = if accept_stat.is_finite() { accept_stat.clamp(0.0, 1.0) } else { 0.0 };
        self.h_bar = (1.0 - w) * self.h_bar + w * (s.target_accept - accept);
        self.log_step = self.mu - t.sqrt() / s.gamma * self.h_bar;
        let eta = t.powf(-s.kappa);
        self.log_step_bar = eta * self.log_step + (1.0 - eta) * self.log_step_bar;
    }

    /// Step size to use for the next iteration during adaptation.
    pub fn current(&self) -> f64 {
        self.log_step.exp()
    }

    /// Averaged step size to freeze once adaptation ends.
    pub fn averaged(&self) -> f64 {
        if self.count == 0 {
            self.current()
        } else {
            self.log_step_bar.exp()
        }
    }
}

/// Step size after each update when the controller is fed `history`.
pub fn adapt_step_size(history: &[f64], initial_step: f64, settings: DualAveragingSettings) -> Vec<f64> {
    let mut da = DualAveraging::new(initial_step, settings);
    history
        .iter()
        .map(|&a| {
            da.update(a);
            da.current()
        })
        .collect()
}

/// Streaming per-coordinate variance (Welford).
#[derive(Debug, Clone)]
pub struct RunningVariance {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningVariance {
    pub fn new(dim: usize) -> Self {
        RunningVariance {
            n: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    /// Sample variance shrunk toward `1e-3`, as an inverse metric.
    pub fn regularized_variance(&self) -> Vec<f64> {
        let n = self.n as f64;
        if self.n < 2 {
            return vec![1.0; self.mean.len()];
        }
        self.m2
            .iter()
            .map(|s| {
                let var = s / (n - 1.0);
                (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
            })
            .collect()
    }
}

/// Phase boundaries of warmup, as iteration indices.
///
/// `[0, init_end)`: step size only, unit metric. `[init_end, mid)`: first
/// metric window. `[mid, window_end)`: second metric window, from which the
/// final metric is estimated. `[window_end, n_warmup)`: step size only under
/// the final metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WarmupSchedule {
    pub init_end: usize,
    pub mid: usize,
    pub window_end: usize,
    pub n_warmup: usize,
}

impl WarmupSchedule {
    pub fn new(n_warmup: usize) -> Self {
        let init_end = (n_warmup * 3) / 20;
        let mid = n_warmup / 2;
        let window_end = n_warmup - (n_warmup / 5).max(50).min((n_warmup - mid) / 2);
        WarmupSchedule {
            init_end,
            mid,
            window_end,
            n_warmup,
        }
    }

    pub fn in_window(&self, iter: usize) -> bool {
        iter >= self.init_end && iter < self.window_end
    }

    /// Whether a metric update happens right after iteration `iter`.
    pub fn is_window_end(&self, iter: usize) -> bool {
        iter + 1 == self.mid || iter + 1 == self.window_end
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_acceptance_grows_the_step() {
        let s = adapt_step_size(&[1.0; 200], 0.1, DualAveragingSettings::default());
        assert!(s.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn zero_acceptance_shrinks_the_step() {
        let s = adapt_step_size(&[0.0; 200], 0.1, DualAveragingSettings::default());
        assert!(s.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn on_target_acceptance_settles_near_mu() {
        let settings = DualAveragingSettings::default();
        let s = adapt_step_size(&[settings.target_accept; 50], 0.1, settings);
        assert!((s.last().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn running_variance_matches_two_pass() {
        let xs = [[1.0, 10.0], [2.0, 14.0], [4.0, 9.0], [7.0, 11.0]];
        let mut rv = RunningVariance::new(2);
        xs.iter().for_each(|x| rv.push(x));
        let n = xs.len() as f64;
        for d in 0..2 {
            let mean = xs.iter().map(|x| x[d]).sum::<f64>() / n;
            let var = xs.iter().map(|x| (x[d] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let expected = (n / (n + 5.0)) * var + 1e-3 * 5.0 / (n + 5.0);
            assert!((rv.regularized_variance()[d] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn schedule_is_ordered() {
        for w in [100, 150, 1000, 5000] {
            let s = WarmupSchedule::new(w);
            assert!(s.init_end < s.mid && s.mid < s.window_end && s.window_end < s.n_warmup, "{s:?}");
        }
    }
}
