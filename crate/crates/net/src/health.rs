use serde::{Deserialize, Serialize};

/// Trailing steps used for both the running median and the flag rate.
pub const HEALTH_WINDOW: usize = 100;
/// A norm above this multiple of the running median is flagged.
pub const SPIKE_FACTOR: f64 = 10.0;
/// Flag rate within one window above which remediation is signalled.
pub const REMEDIATION_RATE: f64 = 0.05;
pub const REMEDIATION_HINT: &str = "reduce alpha or increase eps_min";

/// Per-step record of topological-loss gradient norms.
///
/// The running median at step `i` is taken over the up to
/// [`HEALTH_WINDOW`] norms before it, so the first step is never flagged.
/// The window rate counts flags in the trailing [`HEALTH_WINDOW`] steps and
/// always divides by the full window length.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GradientHealthLog {
    pub norms: Vec<f64>,
    pub running_median: Vec<Option<f64>>,
    pub flags: Vec<bool>,
    pub window_rate: Vec<f64>,
    /// First step at which the window rate exceeded [`REMEDIATION_RATE`].
    pub remediation_step: Option<usize>,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl GradientHealthLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one norm and returns whether it was flagged.
    pub fn push(&mut self, norm: f64) -> bool {
        let i = self.norms.len();
        let lo = i.saturating_sub(HEALTH_WINDOW);
        let med = (i > 0).then(|| median(&mut self.norms[lo..i].to_vec()));
        let flagged = !norm.is_finite() || med.is_some_and(|m| norm > SPIKE_FACTOR * m);
        self.norms.push(norm);
        self.running_median.push(med);
        self.flags.push(flagged);
        let start = (i + 1).saturating_sub(HEALTH_WINDOW);
        let count = self.flags[start..].iter().filter(|&&f| f).count();
        let rate = count as f64 / HEALTH_WINDOW as f64;
        self.window_rate.push(rate);
        if rate > REMEDIATION_RATE && self.remediation_step.is_none() {
            self.remediation_step = Some(i);
        }
        flagged
    }

    pub fn flag_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn remediation(&self) -> bool {
        self.remediation_step.is_some()
    }
}

/// Health log of a complete series.
pub fn gradient_health(norms: &[f64]) -> GradientHealthLog {
    let mut log = GradientHealthLog::new();
    norms.iter().for_each(|&n| {
        log.push(n);
    });
    log
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_norms_never_flag() {
        let log = gradient_health(&[2.0; 300]);
        assert_eq!(log.flag_count(), 0);
        assert!(!log.remediation());
    }

    #[test]
    fn single_spike() {
        let mut norms = vec![1.0; 200];
        norms[120] = 100.0;
        let log = gradient_health(&norms);
        assert_eq!(log.flag_count(), 1);
        assert!(log.flags[120]);
        assert!(!log.remediation());
    }

    #[test]
    fn eight_spikes_in_a_window_trigger_remediation() {
        let mut norms = vec![1.0; 300];
        for k in 0..8 {
            norms[150 + 10 * k] = 50.0;
        }
        let log = gradient_health(&norms);
        assert_eq!(log.flag_count(), 8);
        assert_eq!(log.remediation_step, Some(200));
    }

    #[test]
    fn exactly_five_percent_is_tolerated() {
        let mut norms = vec![1.0; 300];
        for k in 0..5 {
            norms[150 + 10 * k] = 50.0;
        }
        assert!(!gradient_health(&norms).remediation());
    }
}
