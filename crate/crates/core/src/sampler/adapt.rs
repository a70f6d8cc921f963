//! Warmup adaptation: dual-averaging step size and windowed diagonal metric.

#[derive(Debug, Clone)]
pub(crate) struct DualAveraging {
    target: f64,
    mu: f64,
    s_bar: f64,
    x_bar: f64,
    counter: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    pub fn new(target: f64, step: f64) -> Self {
        Self { target, mu: (10.0 * step).ln(), s_bar: 0.0, x_bar: 0.0, counter: 0.0 }
    }

    /// Records one acceptance statistic and returns the next step size.
    pub fn update(&mut self, accept_stat: f64) -> f64 {
        self.counter += 1.0;
        let eta = 1.0 / (self.counter + Self::T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.target - accept_stat);
        let x = self.mu - self.s_bar * self.counter.sqrt() / Self::GAMMA;
        let w = self.counter.powf(-Self::KAPPA);
        self.x_bar = (1.0 - w) * self.x_bar + w * x;
        x.exp()
    }

    pub fn final_step(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Stan's warmup schedule: an initial fast phase, doubling slow windows for
/// the metric, and a terminal fast phase.
#[derive(Debug, Clone)]
pub(crate) struct WindowSchedule {
    n_warmup: usize,
    init_buffer: usize,
    term_buffer: usize,
    window_end: usize,
    window_size: usize,
}

impl WindowSchedule {
    pub fn new(n_warmup: usize) -> Self {
        let (mut init_buffer, mut term_buffer, mut base) = (75usize, 50usize, 25usize);
        if init_buffer + term_buffer + base > n_warmup {
            init_buffer = (0.15 * n_warmup as f64) as usize;
            term_buffer = (0.1 * n_warmup as f64) as usize;
            base = n_warmup - init_buffer - term_buffer;
        }
        let mut s = Self { n_warmup, init_buffer, term_buffer, window_end: 0, window_size: base };
        s.window_end = init_buffer + base;
        s.stretch();
        s
    }

    fn slow_end(&self) -> usize {
        self.n_warmup - self.term_buffer
    }

    fn stretch(&mut self) {
        let next_end = self.window_end + 2 * self.window_size;
        if next_end > self.slow_end() {
            self.window_end = self.slow_end();
        }
    }

    /// Whether iteration `i` (zero-based) collects metric samples.
    pub fn in_slow_window(&self, i: usize) -> bool {
        i >= self.init_buffer && i < self.slow_end()
    }

    /// Whether the metric is updated after iteration `i`; advances the window.
    pub fn window_closes(&mut self, i: usize) -> bool {
        if i + 1 == self.window_end && self.window_end <= self.slow_end() {
            self.window_size *= 2;
            self.window_end += self.window_size;
            self.stretch();
            return true;
        }
        false
    }
}

/// Running variance by Welford's method.
#[derive(Debug, Clone)]
pub(crate) struct RunningVariance {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningVariance {
    pub fn new(dim: usize) -> Self {
        Self { n: 0.0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    pub fn add(&mut self, x: &[f64]) {
        self.n += 1.0;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m += d / self.n;
            *s += d * (v - *m);
        }
    }

    /// Variance shrunk toward `1e-3` as in Stan's diagonal adaptation.
    pub fn regularized(&self) -> Vec<f64> {
        let n = self.n;
        self.m2
            .iter()
            .map(|s| {
                let var = s / (n - 1.0).max(1.0);
                (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
            })
            .collect()
    }

    pub fn reset(&mut self) {
        self.n = 0.0;
        self.mean.iter_mut().for_each(|v| *v = 0.0);
        self.m2.iter_mut().for_each(|v| *v = 0.0);
    }
}
