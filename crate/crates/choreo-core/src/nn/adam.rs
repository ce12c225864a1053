use super::params::{ParamId, ParamStore};
use super::tape::{Gradients, Session};
use super::NnError;

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam with per-parameter step counters.
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: Vec<u64>,
}

impl Adam {
    pub fn new(store: &ParamStore, cfg: AdamConfig) -> Self {
        let m = store.ids().map(|id| vec![0.0; store.get(id).len()]).collect();
        let v = store.ids().map(|id| vec![0.0; store.get(id).len()]).collect();
        Adam {
            cfg,
            m,
            v,
            t: vec![0; store.len()],
        }
    }

    pub fn config(&self) -> AdamConfig {
        self.cfg
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.cfg.lr = lr;
    }

    /// Update one parameter from an explicit gradient slice.
    ///
    /// Aborts with [`NnError::NonFinite`] on any non-finite gradient so a
    /// diverged training run fails loudly instead of poisoning the state.
    pub fn step_param(&mut self, store: &mut ParamStore, id: ParamId, grad: &[f64]) -> Result<(), NnError> {
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(NnError::NonFinite(format!(
                "gradient of parameter {:?}",
                store.name(id)
            )));
        }
        let i = id.index();
        self.t[i] += 1;
        let t = self.t[i] as f64;
        let AdamConfig { lr, beta1, beta2, eps } = self.cfg;
        let bc1 = 1.0 - beta1.powf(t);
        let bc2 = 1.0 - beta2.powf(t);
        let m = &mut self.m[i];
        let v = &mut self.v[i];
        let data = store.get_mut(id).data_mut();
        debug_assert_eq!(data.len(), grad.len());
        for k in 0..grad.len() {
            m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
            v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
            let mh = m[k] / bc1;
            let vh = v[k] / bc2;
            data[k] -= lr * mh / (vh.sqrt() + eps);
        }
        Ok(())
    }

    /// Apply one step to every parameter bound in `session`, reading
    /// gradients from a finished backward pass. Parameters without a
    /// gradient (unused this step) are treated as zero-gradient.
    pub fn step(
        &mut self,
        store: &mut ParamStore,
        session: &Session,
        grads: &Gradients,
    ) -> Result<(), NnError> {
        for (id, var) in session.bound() {
            if !store.get(id).requires_grad {
                continue;
            }
            match grads.get(var) {
                Some(g) => {
                    let g = g.to_vec();
                    self.step_param(store, id, &g)?;
                }
                None => {
                    let zeros = vec![0.0; store.get(id).len()];
                    self.step_param(store, id, &zeros)?;
                }
            }
        }
        Ok(())
    }
}
