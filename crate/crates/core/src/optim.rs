//! Adam with bias correction, a warm-up learning-rate schedule, and
//! best-model tracking on a validation metric.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OptimError {
    #[error("parameter/gradient length mismatch: params {params}, grad {grad}")]
    ShapeMismatch { params: usize, grad: usize },

    #[error("moment buffers sized {state} do not match parameters sized {params}")]
    StateMismatch { state: usize, params: usize },

    #[error("learning rate must be positive and finite, found {lr}")]
    InvalidLearningRate { lr: f64 },

    #[error("step {step} exceeds total_steps {total}")]
    StepOutOfRange { step: u64, total: u64 },

    #[error("invalid schedule: {reason}")]
    InvalidSchedule { reason: String },
}

/// First/second moment estimates for one parameter tensor, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl AdamState {
    /// Fresh state for a parameter tensor with `len` entries, with the
    /// customary defaults beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8.
    pub fn new(len: usize) -> Self {
        Self {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

/// One bias-corrected Adam update, in place. `params` and `grad` are the
/// flattened tensor entries; the state must have been created for the
/// same length.
pub fn adam_step(
    params: &mut [f64],
    grad: &[f64],
    state: &mut AdamState,
    lr: f64,
) -> Result<(), OptimError> {
    if params.len() != grad.len() {
        return Err(OptimError::ShapeMismatch {
            params: params.len(),
            grad: grad.len(),
        });
    }
    if state.first_moment.len() != params.len() {
        return Err(OptimError::StateMismatch {
            state: state.first_moment.len(),
            params: params.len(),
        });
    }
    if !(lr.is_finite() && lr >= 0.0) {
        return Err(OptimError::InvalidLearningRate { lr });
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grad[i];
        state.first_moment[i] = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * g;
        state.second_moment[i] =
            state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.first_moment[i] / bc1;
        let v_hat = state.second_moment[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

/// Post-warm-up behavior of the learning rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayMode {
    /// Linear decay from the peak down to zero at `total_steps`.
    #[default]
    LinearToZero,
    /// Hold the peak value after warm-up.
    Constant,
}

/// Piecewise-linear schedule: ramp from 0 to `base_lr` over the first
/// `warmup_ratio` fraction of steps, then decay per `DecayMode`.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    base_lr: f64,
    total_steps: u64,
    warmup_ratio: f64,
    decay: DecayMode,
}

impl LrSchedule {
    pub fn new(
        base_lr: f64,
        total_steps: u64,
        warmup_ratio: f64,
        decay: DecayMode,
    ) -> Result<Self, OptimError> {
        if !(base_lr.is_finite() && base_lr > 0.0) {
            return Err(OptimError::InvalidSchedule {
                reason: format!("base_lr must be positive, found {base_lr}"),
            });
        }
        if total_steps == 0 {
            return Err(OptimError::InvalidSchedule {
                reason: "total_steps must be at least 1".into(),
            });
        }
        if !(0.0..1.0).contains(&warmup_ratio) {
            return Err(OptimError::InvalidSchedule {
                reason: format!("warmup_ratio must lie in [0, 1), found {warmup_ratio}"),
            });
        }
        Ok(Self {
            base_lr,
            total_steps,
            warmup_ratio,
            decay,
        })
    }

    /// Learning rate at an optimizer step in `[0, total_steps]`.
    /// The peak value `base_lr` is reached exactly at the end of warm-up.
    pub fn lr_at(&self, step: u64) -> Result<f64, OptimError> {
        if step > self.total_steps {
            return Err(OptimError::StepOutOfRange {
                step,
                total: self.total_steps,
            });
        }
        let warm = self.warmup_ratio * self.total_steps as f64;
        let s = step as f64;
        if s < warm {
            return Ok(self.base_lr * s / warm);
        }
        Ok(match self.decay {
            DecayMode::Constant => self.base_lr,
            DecayMode::LinearToZero => {
                let span = self.total_steps as f64 - warm;
                if span <= 0.0 {
                    0.0
                } else {
                    self.base_lr * (self.total_steps as f64 - s) / span
                }
            }
        })
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }
}

/// Keeps the parameter snapshot with the best validation metric seen so
/// far. Strictly-greater replacement, so ties keep the earlier snapshot
/// and runs stay reproducible.
#[derive(Debug, Clone)]
pub struct BestModelTracker<S> {
    best: Option<(f64, S)>,
}

impl<S: Clone> BestModelTracker<S> {
    pub fn new() -> Self {
        Self { best: None }
    }

    pub fn observe(&mut self, metric: f64, snapshot: &S) {
        let improved = match &self.best {
            None => true,
            Some((best, _)) => metric > *best,
        };
        if improved {
            self.best = Some((metric, snapshot.clone()));
        }
    }

    pub fn best_metric(&self) -> Option<f64> {
        self.best.as_ref().map(|(m, _)| *m)
    }

    /// The best snapshot, or `None` if nothing was observed; callers
    /// fall back to the final parameters in that case.
    pub fn into_best(self) -> Option<S> {
        self.best.map(|(_, s)| s)
    }
}

impl<S: Clone> Default for BestModelTracker<S> {
    fn default() -> Self {
        Self::new()
    }
}
