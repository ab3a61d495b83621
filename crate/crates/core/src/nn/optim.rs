use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::ParamStore;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    /// Heavy-ball momentum.
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// Final rate as a fraction of the initial one.
    pub final_fraction: f64,
    pub warmup: usize,
    pub momentum: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    /// Global gradient-norm ceiling; 0 disables clipping.
    pub clip_norm: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            learning_rate: 0.05,
            final_fraction: 0.01,
            warmup: 50,
            momentum: 0.9,
            beta2: 0.999,
            weight_decay: 1e-4,
            clip_norm: 5.0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..=1.0).contains(&self.final_fraction)
            && (0.0..1.0).contains(&self.momentum)
            && (0.0..1.0).contains(&self.beta2)
            && self.weight_decay >= 0.0
            && self.clip_norm >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// Linear warmup, then cosine decay from `base` to `base * final_fraction`.
pub fn cosine_rate(cfg: &OptimizerConfig, step: usize, total: usize) -> f64 {
    let base = cfg.learning_rate;
    if step < cfg.warmup {
        return base * (step + 1) as f64 / cfg.warmup as f64;
    }
    let span = total.saturating_sub(cfg.warmup).max(1) as f64;
    let t = ((step - cfg.warmup) as f64 / span).min(1.0);
    let lo = base * cfg.final_fraction;
    lo + 0.5 * (base - lo) * (1.0 + (std::f64::consts::PI * t).cos())
}

pub struct Optimizer {
    cfg: OptimizerConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    steps: u64,
}

impl Optimizer {
    pub fn new(cfg: OptimizerConfig, params: &ParamStore) -> Result<Self> {
        cfg.validate()?;
        let zeros = || params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Ok(Self { cfg, first: zeros(), second: zeros(), steps: 0 })
    }

    /// Applies one update with step size `rate`; returns the pre-clip gradient norm.
    pub fn step(&mut self, params: &mut ParamStore, grads: &[Tensor], rate: f64) -> Result<f64> {
        let norm = grads.iter().flat_map(|g| g.data()).map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::Numerical(format!("gradient norm is {norm}")));
        }
        let clip = if self.cfg.clip_norm > 0.0 && norm > self.cfg.clip_norm { self.cfg.clip_norm / norm } else { 1.0 };
        self.steps += 1;
        let c = &self.cfg;
        let (b1, b2) = (c.momentum, c.beta2);
        let bias1 = 1.0 - b1.powi(self.steps as i32);
        let bias2 = 1.0 - b2.powi(self.steps as i32);
        for (k, (p, g)) in params.tensors_mut().iter_mut().zip(grads).enumerate() {
            let (m, s) = (&mut self.first[k], &mut self.second[k]);
            for (i, (w, &g)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                let g = g * clip;
                match c.kind {
                    OptimizerKind::Sgd => {
                        m[i] = b1 * m[i] + g + c.weight_decay * *w;
                        *w -= rate * m[i];
                    }
                    OptimizerKind::Adam => {
                        m[i] = b1 * m[i] + (1.0 - b1) * g;
                        s[i] = b2 * s[i] + (1.0 - b2) * g * g;
                        let update = (m[i] / bias1) / ((s[i] / bias2).sqrt() + 1e-8);
                        *w -= rate * (update + c.weight_decay * *w);
                    }
                }
            }
        }
        Ok(norm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_warms_up_then_decays() {
        let cfg = OptimizerConfig { warmup: 10, ..OptimizerConfig::default() };
        assert!((cosine_rate(&cfg, 9, 110) - cfg.learning_rate).abs() < 1e-15);
        assert!((cosine_rate(&cfg, 10, 110) - cfg.learning_rate).abs() < 1e-15);
        let end = cosine_rate(&cfg, 110, 110);
        assert!((end - cfg.learning_rate * cfg.final_fraction).abs() < 1e-15);
        assert!(cosine_rate(&cfg, 50, 110) < cosine_rate(&cfg, 30, 110));
    }

    #[test]
    fn both_kinds_minimize_a_quadratic() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let cfg = OptimizerConfig { kind, weight_decay: 0.0, learning_rate: 0.05, ..OptimizerConfig::default() };
            let mut store = ParamStore::new();
            let id = store.add("x", Tensor::new([2], vec![3.0, -2.0]).unwrap());
            let mut opt = Optimizer::new(cfg, &store).unwrap();
            for _ in 0..500 {
                let g = store.get(id).map(|v| 2.0 * (v - 1.0));
                opt.step(&mut store, &[g], 0.05).unwrap();
            }
            for &v in store.get(id).data() {
                assert!((v - 1.0).abs() < 1e-3, "{kind:?}: {v}");
            }
        }
    }

    #[test]
    fn non_finite_gradient_is_numerical_error() {
        let mut store = ParamStore::new();
        store.add("x", Tensor::zeros([1]));
        let mut opt = Optimizer::new(OptimizerConfig::default(), &store).unwrap();
        let g = Tensor::new([1], vec![f64::NAN]).unwrap();
        assert!(matches!(opt.step(&mut store, &[g], 0.1), Err(Error::Numerical(_))));
    }
}
