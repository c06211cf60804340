//! Episode and aggregate response metrics.

/// Per-episode summary over the full horizon. All response metrics are
/// nonnegative; `total_reward` is the (non-positive) return.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunMetrics {
    pub rms_x: f64,
    pub rms_xddot: f64,
    pub peak_x: f64,
    pub peak_xddot: f64,
    pub rms_u: f64,
    pub total_reward: f64,
    pub diverged: bool,
}

impl RunMetrics {
    pub fn zeros() -> Self {
        RunMetrics {
            rms_x: 0.0,
            rms_xddot: 0.0,
            peak_x: 0.0,
            peak_xddot: 0.0,
            rms_u: 0.0,
            total_reward: 0.0,
            diverged: false,
        }
    }
}

/// Streaming accumulator; push one sample per environment step.
#[derive(Debug, Clone, Default)]
pub struct MetricsAccumulator {
    n: usize,
    sum_x2: f64,
    sum_a2: f64,
    sum_u2: f64,
    peak_x: f64,
    peak_a: f64,
    reward: f64,
    diverged: bool,
}

impl MetricsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64, xddot: f64, u: f64, reward: f64) {
        self.n += 1;
        self.sum_x2 += x * x;
        self.sum_a2 += xddot * xddot;
        self.sum_u2 += u * u;
        self.peak_x = self.peak_x.max(x.abs());
        self.peak_a = self.peak_a.max(xddot.abs());
        self.reward += reward;
    }

    pub fn mark_diverged(&mut self) {
        self.diverged = true;
    }

    pub fn finish(&self) -> RunMetrics {
        if self.n == 0 {
            let mut m = RunMetrics::zeros();
            m.diverged = self.diverged;
            return m;
        }
        let n = self.n as f64;
        RunMetrics {
            rms_x: (self.sum_x2 / n).sqrt(),
            rms_xddot: (self.sum_a2 / n).sqrt(),
            peak_x: self.peak_x,
            peak_xddot: self.peak_a,
            rms_u: (self.sum_u2 / n).sqrt(),
            total_reward: self.reward,
            diverged: self.diverged,
        }
    }
}

/// One row per episode/run, stable column order.
pub fn metrics_csv(rows: &[RunMetrics]) -> String {
    let mut out = String::from("episode,rms_x,rms_xddot,peak_x,peak_xddot,rms_u,total_reward,diverged\n");
    for (i, m) in rows.iter().enumerate() {
        out.push_str(&format!(
            "{},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{}\n",
            i, m.rms_x, m.rms_xddot, m.peak_x, m.peak_xddot, m.rms_u, m.total_reward, m.diverged
        ));
    }
    out
}
