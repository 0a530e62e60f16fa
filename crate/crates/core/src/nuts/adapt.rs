//! Warmup adaptation: dual averaging of the step size and windowed
//! estimation of a diagonal inverse mass matrix.

const GAMMA: f64 = 0.05;
const T0: f64 = 10.0;
const KAPPA: f64 = 0.75;

const INIT_BUFFER: usize = 75;
const TERM_BUFFER: usize = 50;
const BASE_WINDOW: usize = 25;

/// Nesterov dual averaging on `ln ε`.
#[derive(Debug, Clone)]
pub struct StepSizeAdapter {
    target: f64,
    mu: f64,
    s_bar: f64,
    x_bar: f64,
    counter: f64,
}

impl StepSizeAdapter {
    pub fn new(target: f64, step_size: f64) -> Self {
        let mut s = Self { target, mu: 0.0, s_bar: 0.0, x_bar: 0.0, counter: 0.0 };
        s.restart(step_size);
        s
    }

    /// Re-centers the shrinkage point at `ln(10 ε)` and clears the averages.
    pub fn restart(&mut self, step_size: f64) {
        self.mu = (10.0 * step_size).ln();
        self.s_bar = 0.0;
        self.x_bar = 0.0;
        self.counter = 0.0;
    }

    /// Feeds one acceptance statistic and returns the next step size.
    pub fn update(&mut self, accept_stat: f64) -> f64 {
        self.counter += 1.0;
        let stat = if accept_stat.is_nan() { 0.0 } else { accept_stat.min(1.0) };
        let eta = 1.0 / (self.counter + T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.target - stat);
        let x = self.mu - self.s_bar * self.counter.sqrt() / GAMMA;
        let x_eta = self.counter.powf(-KAPPA);
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x;
        x.exp()
    }

    /// The averaged step size used after warmup.
    pub fn final_step_size(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Streaming mean and variance.
#[derive(Debug, Clone)]
struct Welford {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(d: usize) -> Self {
        Self { n: 0, mean: vec![0.0; d], m2: vec![0.0; d] }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &xi) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = xi - *m;
            *m += delta / n;
            *s += delta * (xi - *m);
        }
    }

    fn variance(&self) -> Vec<f64> {
        let denom = (self.n.max(2) - 1) as f64;
        self.m2.iter().map(|s| s / denom).collect()
    }

    fn clear(&mut self) {
        *self = Self::new(self.mean.len());
    }
}

/// Windowed diagonal metric adaptation: a fast initial buffer, slow windows
/// doubling in length, and a fast terminal buffer.
#[derive(Debug, Clone)]
pub struct MassAdapter {
    warmup: usize,
    init_buffer: usize,
    term_buffer: usize,
    window_size: usize,
    next_window: usize,
    counter: usize,
    estimator: Welford,
}

impl MassAdapter {
    pub fn new(dim: usize, warmup: usize) -> Self {
        let (init_buffer, term_buffer, base_window) =
            if INIT_BUFFER + TERM_BUFFER + BASE_WINDOW > warmup {
                let init = (0.15 * warmup as f64) as usize;
                let term = (0.1 * warmup as f64) as usize;
                (init, term, warmup - init - term)
            } else {
                (INIT_BUFFER, TERM_BUFFER, BASE_WINDOW)
            };
        Self {
            warmup,
            init_buffer,
            term_buffer,
            window_size: base_window,
            next_window: init_buffer + base_window - 1,
            counter: 0,
            estimator: Welford::new(dim),
        }
    }

    fn in_window(&self) -> bool {
        self.counter >= self.init_buffer
            && self.counter < self.warmup - self.term_buffer
            && self.counter != self.warmup
    }

    fn window_ends(&self) -> bool {
        self.counter == self.next_window && self.counter != self.warmup
    }

    fn compute_next_window(&mut self) {
        let last = self.warmup - self.term_buffer - 1;
        if self.next_window == last {
            return;
        }
        self.window_size *= 2;
        self.next_window = self.counter + self.window_size;
        if self.next_window != last && self.next_window + 2 * self.window_size >= self.warmup - self.term_buffer {
            self.next_window = last;
        }
    }

    /// Records the warmup position `q`. Returns `true` when a slow window
    /// closed and `inv_mass` was overwritten.
    pub fn observe(&mut self, q: &[f64], inv_mass: &mut [f64]) -> bool {
        if self.in_window() {
            self.estimator.push(q);
        }
        if self.window_ends() {
            self.compute_next_window();
            let n = self.estimator.n as f64;
            // regularize toward a small unit metric, as windows can be short
            for (m, v) in inv_mass.iter_mut().zip(self.estimator.variance()) {
                *m = (n / (n + 5.0)) * v + 1e-3 * (5.0 / (n + 5.0));
            }
            self.estimator.clear();
            self.counter += 1;
            return true;
        }
        self.counter += 1;
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_averaging_moves_toward_target() {
        let mut a = StepSizeAdapter::new(0.8, 1.0);
        // always accepting pushes the step size up
        let mut eps = 1.0;
        for _ in 0..50 {
            eps = a.update(1.0);
        }
        assert!(eps > 1.0);
        let mut b = StepSizeAdapter::new(0.8, 1.0);
        for _ in 0..50 {
            eps = b.update(0.0);
        }
        assert!(eps < 1.0);
    }

    #[test]
    fn windows_cover_the_standard_schedule() {
        let mut inv = vec![1.0];
        let mut m = MassAdapter::new(1, 1000);
        let mut closes = Vec::new();
        for i in 0..1000 {
            if m.observe(&[0.0], &mut inv) {
                closes.push(i);
            }
        }
        assert_eq!(closes, vec![99, 149, 249, 449, 949]);
    }

    #[test]
    fn short_warmup_scales_buffers() {
        let mut m = MassAdapter::new(1, 100);
        let mut inv = vec![1.0];
        let closes: Vec<usize> = (0..100).filter(|_| m.observe(&[0.0], &mut inv)).collect();
        assert_eq!(closes.len(), 1);
    }

    #[test]
    fn variance_estimate_is_regularized() {
        let mut m = MassAdapter::new(2, 1000);
        let mut inv = vec![1.0, 1.0];
        for i in 0..100 {
            let x = if i % 2 == 0 { 1.0 } else { -1.0 };
            m.observe(&[2.0 * x, x], &mut inv);
        }
        // the first window holds units 75..=99: thirteen at -1, twelve at +1
        let n = 25.0;
        let var_a = 4.0 * (25.0 - 1.0 / 25.0) / 24.0;
        assert!((inv[0] - (n / (n + 5.0) * var_a + 1e-3 * 5.0 / (n + 5.0))).abs() < 1e-12);
    }
}
