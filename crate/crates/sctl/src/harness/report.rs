//! Aggregate comparison tables across policies and seeds.

use crate::error::{Result, SctlError};

use super::metrics::RunMetrics;

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub name: String,
    pub n: usize,
    pub mean: RunMetrics,
    pub std: RunMetrics,
    /// Mean metric divided by the baseline's mean metric.
    pub ratio_rms_x: f64,
    pub ratio_rms_xddot: f64,
    pub ratio_rms_u: f64,
    pub diverged_runs: usize,
}

/// Comparison table; the first input run is the ratio baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn ratio(value: f64, baseline: f64) -> f64 {
    if baseline == 0.0 {
        if value == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        value / baseline
    }
}

pub fn summarize(runs: &[(String, Vec<RunMetrics>)]) -> Result<Summary> {
    if runs.is_empty() || runs.iter().any(|(_, m)| m.is_empty()) {
        return Err(SctlError::Usage("summarize needs at least one nonempty run".into()));
    }
    let mut rows = Vec::with_capacity(runs.len());
    for (name, ms) in runs {
        let field = |f: fn(&RunMetrics) -> f64| -> (f64, f64) {
            let vals: Vec<f64> = ms.iter().map(f).collect();
            mean_std(&vals)
        };
        let (rms_x, rms_x_s) = field(|m| m.rms_x);
        let (rms_a, rms_a_s) = field(|m| m.rms_xddot);
        let (peak_x, peak_x_s) = field(|m| m.peak_x);
        let (peak_a, peak_a_s) = field(|m| m.peak_xddot);
        let (rms_u, rms_u_s) = field(|m| m.rms_u);
        let (rew, rew_s) = field(|m| m.total_reward);
        let mean = RunMetrics {
            rms_x,
            rms_xddot: rms_a,
            peak_x,
            peak_xddot: peak_a,
            rms_u,
            total_reward: rew,
            diverged: false,
        };
        let std = RunMetrics {
            rms_x: rms_x_s,
            rms_xddot: rms_a_s,
            peak_x: peak_x_s,
            peak_xddot: peak_a_s,
            rms_u: rms_u_s,
            total_reward: rew_s,
            diverged: false,
        };
        rows.push(SummaryRow {
            name: name.clone(),
            n: ms.len(),
            mean,
            std,
            ratio_rms_x: 0.0,
            ratio_rms_xddot: 0.0,
            ratio_rms_u: 0.0,
            diverged_runs: ms.iter().filter(|m| m.diverged).count(),
        });
    }
    let base = rows[0].mean;
    for row in &mut rows {
        row.ratio_rms_x = ratio(row.mean.rms_x, base.rms_x);
        row.ratio_rms_xddot = ratio(row.mean.rms_xddot, base.rms_xddot);
        row.ratio_rms_u = ratio(row.mean.rms_u, base.rms_u);
    }
    Ok(Summary { rows })
}

impl Summary {
    /// Aligned text table, mean (std) per metric plus ratios vs the baseline.
    pub fn text(&self) -> String {
        let mut out = format!(
            "{:<18} {:>5} {:>22} {:>22} {:>22} {:>22} {:>8} {:>8} {:>8} {:>5}\n",
            "policy", "n", "rms_x", "rms_xddot", "peak_xddot", "rms_u", "r/rms_x", "r/rms_a", "r/rms_u", "div"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<18} {:>5} {:>22} {:>22} {:>22} {:>22} {:>8.3} {:>8.3} {:>8.3} {:>5}\n",
                r.name,
                r.n,
                format!("{:.4e} ({:.1e})", r.mean.rms_x, r.std.rms_x),
                format!("{:.4e} ({:.1e})", r.mean.rms_xddot, r.std.rms_xddot),
                format!("{:.4e} ({:.1e})", r.mean.peak_xddot, r.std.peak_xddot),
                format!("{:.4e} ({:.1e})", r.mean.rms_u, r.std.rms_u),
                r.ratio_rms_x,
                r.ratio_rms_xddot,
                r.ratio_rms_u,
                r.diverged_runs,
            ));
        }
        out
    }

    pub fn csv(&self) -> String {
        let mut out = String::from(
            "policy,n,rms_x_mean,rms_x_std,rms_xddot_mean,rms_xddot_std,peak_x_mean,peak_x_std,\
             peak_xddot_mean,peak_xddot_std,rms_u_mean,rms_u_std,total_reward_mean,\
             ratio_rms_x,ratio_rms_xddot,ratio_rms_u,diverged_runs\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{}\n",
                r.name,
                r.n,
                r.mean.rms_x,
                r.std.rms_x,
                r.mean.rms_xddot,
                r.std.rms_xddot,
                r.mean.peak_x,
                r.std.peak_x,
                r.mean.peak_xddot,
                r.std.peak_xddot,
                r.mean.rms_u,
                r.std.rms_u,
                r.mean.total_reward,
                r.ratio_rms_x,
                r.ratio_rms_xddot,
                r.ratio_rms_u,
                r.diverged_runs,
            ));
        }
        out
    }
}
