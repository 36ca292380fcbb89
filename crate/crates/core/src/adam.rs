use crate::params::Parameters;
use crate::scalar::Scalar;
use crate::ModelError;

/// Adam moments and hyperparameters for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Parameters<T>,
    pub v: Parameters<T>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(params: &Parameters<T>, lr: f64) -> Self {
        OptimizerState { step: 0, lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: params.zeros_like(), v: params.zeros_like() }
    }

    pub fn reset(&mut self) {
        self.step = 0;
        self.m = self.m.zeros_like();
        self.v = self.v.zeros_like();
    }
}

/// One bias-corrected Adam update. Inputs are checked before anything is
/// modified, so an error leaves both parameters and state untouched.
pub fn adam_step<T: Scalar>(
    params: &mut Parameters<T>,
    opt: &mut OptimizerState<T>,
    grads: &Parameters<T>,
) -> Result<(), ModelError> {
    if !params.same_shape(grads) || !params.same_shape(&opt.m) || !params.same_shape(&opt.v) {
        return Err(ModelError::ShapeMismatch("gradients or moments do not mirror the parameters".into()));
    }
    if let Some(t) = grads.tensors.iter().find(|t| t.data.iter().any(|x| !x.is_finite())) {
        return Err(ModelError::NonFiniteGradient(t.name.clone()));
    }
    opt.step += 1;
    let t = opt.step as i32;
    let (b1, b2) = (T::of(opt.beta1), T::of(opt.beta2));
    let c1 = 1.0 - opt.beta1.powi(t);
    let c2 = 1.0 - opt.beta2.powi(t);
    let step_size = T::of(opt.lr * c2.sqrt() / c1);
    let eps_hat = T::of(opt.eps * c2.sqrt());
    let one = T::one();
    for (((p, g), m), v) in params.tensors.iter_mut().zip(&grads.tensors).zip(&mut opt.m.tensors).zip(&mut opt.v.tensors) {
        for i in 0..p.data.len() {
            let gi = g.data[i];
            m.data[i] = b1 * m.data[i] + (one - b1) * gi;
            v.data[i] = b2 * v.data[i] + (one - b2) * gi * gi;
            p.data[i] -= step_size * m.data[i] / (v.data[i].sqrt() + eps_hat);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{init_params, ModelConfig};

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p: Parameters<f32> = init_params(&ModelConfig::tiny(8, 0)).unwrap();
        let before = p.clone();
        let mut opt = OptimizerState::new(&p, 1e-3);
        adam_step(&mut p, &mut opt, &before.zeros_like()).unwrap();
        assert_eq!(p, before);
        assert_eq!(opt.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // f(θ) = θ², one scalar stored in the first tensor
        let mut p: Parameters<f64> = init_params(&ModelConfig::tiny(8, 0)).unwrap();
        p.tensors.iter_mut().for_each(|t| t.data.fill(0.0));
        p.tensors[0].data[0] = 1.0;
        let mut g = p.zeros_like();
        g.tensors[0].data[0] = 2.0;
        let mut opt = OptimizerState::new(&p, 0.1);
        adam_step(&mut p, &mut opt, &g).unwrap();
        assert!((p.tensors[0].data[0] - 0.9).abs() < 1e-6, "{}", p.tensors[0].data[0]);
    }

    #[test]
    fn bad_gradients_are_rejected_without_mutation() {
        let mut p: Parameters<f32> = init_params(&ModelConfig::tiny(8, 0)).unwrap();
        let before = p.clone();
        let mut opt = OptimizerState::new(&p, 1e-3);
        let mut g = p.zeros_like();
        g.tensors[3].data[0] = f32::NAN;
        assert!(matches!(adam_step(&mut p, &mut opt, &g), Err(ModelError::NonFiniteGradient(_))));
        let other: Parameters<f32> = init_params(&ModelConfig::tiny(9, 0)).unwrap();
        assert!(matches!(adam_step(&mut p, &mut opt, &other), Err(ModelError::ShapeMismatch(_))));
        assert_eq!(p, before);
        assert_eq!(opt.step, 0);
    }

    #[test]
    fn identical_inputs_give_identical_steps() {
        let p: Parameters<f32> = init_params(&ModelConfig::tiny(8, 0)).unwrap();
        let g: Parameters<f32> = init_params(&ModelConfig::tiny(8, 5)).unwrap();
        let run = || {
            let mut q = p.clone();
            let mut opt = OptimizerState::new(&q, 1e-3);
            adam_step(&mut q, &mut opt, &g).unwrap();
            (q, opt)
        };
        assert_eq!(run(), run());
    }
}
