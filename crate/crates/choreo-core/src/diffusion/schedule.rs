use super::TcdiffError;

/// Noise schedule family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    /// Squared-cosine cumulative schedule (default).
    Cosine,
    /// Linear betas 1e-4..0.02, calibrated for T = 1000.
    Linear,
}

impl std::str::FromStr for ScheduleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cosine" => Ok(ScheduleKind::Cosine),
            "linear" => Ok(ScheduleKind::Linear),
            other => Err(format!("unknown schedule {other:?}, expected cosine or linear")),
        }
    }
}

/// Per-step diffusion coefficients, 1-indexed by timestep `t in 1..=T`.
#[derive(Debug, Clone)]
pub struct DiffusionSchedule {
    steps: usize,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl DiffusionSchedule {
    pub fn new(kind: ScheduleKind, steps: usize) -> Result<Self, TcdiffError> {
        if steps < 1 {
            return Err(TcdiffError::Config("schedule needs at least one step".into()));
        }
        let betas: Vec<f64> = match kind {
            ScheduleKind::Cosine => {
                // squared-cosine alpha-bar with offset s = 0.008, betas
                // clipped at 0.999 to keep every alpha positive
                let s = 0.008;
                let f = |u: f64| ((u + s) / (1.0 + s) * std::f64::consts::FRAC_PI_2).cos().powi(2);
                (1..=steps)
                    .map(|t| {
                        let a = f(t as f64 / steps as f64) / f((t - 1) as f64 / steps as f64);
                        (1.0 - a).min(0.999)
                    })
                    .collect()
            }
            ScheduleKind::Linear => {
                let (lo, hi) = (1e-4, 0.02);
                (0..steps)
                    .map(|i| {
                        if steps == 1 {
                            lo
                        } else {
                            lo + (hi - lo) * i as f64 / (steps - 1) as f64
                        }
                    })
                    .collect()
            }
        };
        Ok(Self::from_betas(betas))
    }

    pub fn from_betas(betas: Vec<f64>) -> Self {
        let alpha: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bar = Vec::with_capacity(alpha.len());
        let mut acc = 1.0;
        for a in &alpha {
            acc *= a;
            alpha_bar.push(acc);
        }
        DiffusionSchedule {
            steps: alpha.len(),
            alpha,
            alpha_bar,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t - 1]
    }

    pub fn beta(&self, t: usize) -> f64 {
        1.0 - self.alpha[t - 1]
    }

    /// Cumulative product of alphas up to `t`; `alpha_bar(0) = 1`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bar[t - 1]
        }
    }

    /// Coefficient of the predicted clean sample in the posterior mean.
    pub fn posterior_coef_x0(&self, t: usize) -> f64 {
        self.alpha_bar(t - 1).sqrt() * self.beta(t) / (1.0 - self.alpha_bar(t))
    }

    /// Coefficient of the current noisy sample in the posterior mean.
    pub fn posterior_coef_xt(&self, t: usize) -> f64 {
        self.alpha(t).sqrt() * (1.0 - self.alpha_bar(t - 1)) / (1.0 - self.alpha_bar(t))
    }

    /// Posterior variance at step `t`.
    pub fn posterior_variance(&self, t: usize) -> f64 {
        (1.0 - self.alpha_bar(t - 1)) / (1.0 - self.alpha_bar(t)) * self.beta(t)
    }
}
