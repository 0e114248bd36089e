use super::config::{EarlyStopConfig, StopMetric};

/// Patience-based stopping rule evaluated once per tracking event.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    config: EarlyStopConfig,
    best: Option<f64>,
    stale: usize,
}

impl EarlyStopper {
    pub fn new(config: EarlyStopConfig) -> Self {
        EarlyStopper {
            config,
            best: None,
            stale: 0,
        }
    }

    pub fn metric(&self) -> StopMetric {
        self.config.metric
    }

    /// Records a metric value and returns a stop reason once the value has
    /// failed to improve on the best by `min_delta` for `patience`
    /// consecutive observations.
    pub fn observe(&mut self, value: f64) -> Option<String> {
        let sign = if self.config.metric.higher_is_better() { 1.0 } else { -1.0 };
        let improved = match self.best {
            None => true,
            Some(best) => sign * (value - best) > self.config.min_delta,
        };
        if improved {
            self.best = Some(value);
            self.stale = 0;
            return None;
        }
        self.stale += 1;
        (self.stale >= self.config.patience).then(|| {
            format!(
                "early stop: {} did not improve by {} for {} consecutive tracking events",
                self.config.metric.as_str(),
                self.config.min_delta,
                self.config.patience
            )
        })
    }
}
