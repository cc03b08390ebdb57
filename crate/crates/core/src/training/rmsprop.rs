use crate::error::{Error, Result};
use crate::network::ParamSet;

/// Running mean of squared gradients, one entry per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    v: Vec<Vec<f64>>,
}

/// The three RMSProp hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmsProp {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl OptimizerState {
    pub fn new<P: ParamSet>(params: &P) -> Self {
        OptimizerState {
            v: params
                .tensors()
                .iter()
                .map(|t| vec![0.0; t.len()])
                .collect(),
        }
    }

    pub fn mean_square(&self) -> &[Vec<f64>] {
        &self.v
    }
}

/// `v ← ρv + (1−ρ)g²`, then `p ← p − lr·g / (√v + eps)`, elementwise.
pub fn rmsprop_step<P: ParamSet>(
    params: &mut P,
    grads: &P,
    state: &mut OptimizerState,
    opt: RmsProp,
) -> Result<()> {
    let grads = grads.tensors();
    let mut params = params.tensors_mut();
    let shapes_match = params.len() == grads.len()
        && state.v.len() == grads.len()
        && params
            .iter()
            .zip(&grads)
            .zip(&state.v)
            .all(|((p, g), v)| p.len() == g.len() && v.len() == g.len());
    if !shapes_match {
        return Err(Error::input(
            "parameter, gradient and optimizer shapes differ",
        ));
    }
    let RmsProp {
        learning_rate: lr,
        decay: rho,
        epsilon: eps,
    } = opt;
    for ((p, g), v) in params.iter_mut().zip(&grads).zip(state.v.iter_mut()) {
        for ((p, &g), v) in p.iter_mut().zip(g.iter()).zip(v.iter_mut()) {
            *v = rho * *v + (1.0 - rho) * g * g;
            *p -= lr * g / (v.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Dense;
    use ndarray::{array, Array1};

    fn scalar(p: f64) -> Dense {
        Dense::from_parts(array![[p]], Array1::zeros(1)).unwrap()
    }

    const OPT: RmsProp = RmsProp {
        learning_rate: 1e-3,
        decay: 0.9,
        epsilon: 1e-12,
    };

    #[test]
    fn first_step_magnitude() {
        let mut p = scalar(0.0);
        let mut s = OptimizerState::new(&p);
        rmsprop_step(&mut p, &scalar(1.0), &mut s, OPT).unwrap();
        assert!((p.weights[[0, 0]] + 3.162_277_660_168_379_5e-3).abs() < 1e-13);
        assert!((s.mean_square()[0][0] - 0.1).abs() < 1e-16);
    }

    #[test]
    fn zero_gradient_decays_state_only() {
        let mut p = scalar(0.5);
        let mut s = OptimizerState::new(&p);
        rmsprop_step(&mut p, &scalar(2.0), &mut s, OPT).unwrap();
        let before = (p.clone(), s.mean_square()[0][0]);
        rmsprop_step(&mut p, &scalar(0.0), &mut s, OPT).unwrap();
        assert_eq!(p, before.0);
        assert_eq!(s.mean_square()[0][0], 0.9 * before.1);
    }

    #[test]
    fn minimizes_a_parabola() {
        let opt = RmsProp {
            learning_rate: 1e-2,
            decay: 0.9,
            epsilon: 1e-8,
        };
        let mut p = scalar(1.0);
        let mut s = OptimizerState::new(&p);
        for _ in 0..200 {
            let g = scalar(2.0 * p.weights[[0, 0]]);
            rmsprop_step(&mut p, &g, &mut s, opt).unwrap();
            assert!(s.mean_square().iter().flatten().all(|&v| v >= 0.0));
        }
        assert!(p.weights[[0, 0]].abs() < 0.05);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut p = scalar(0.0);
        let mut s = OptimizerState::new(&p);
        let g = Dense::zeros(2, 1);
        assert!(rmsprop_step(&mut p, &g, &mut s, OPT).is_err());
    }
}
