//! Bias-corrected Adam update.

use crate::error::{Error, Result};

use super::network::{ParamGrads, ParamStore};
use super::Real;

/// One Adam step, applied in place. Optimizer state (first/second moments and
/// the shared step counter) lives inside the store. A non-finite gradient
/// aborts the step before any parameter is touched, reporting the offending
/// parameter by name.
pub fn adam_step(
    params: &mut ParamStore,
    grads: &ParamGrads,
    lr: f64,
    betas: (f64, f64),
    eps: f64,
) -> Result<()> {
    for (entry, g) in params.entries.iter().zip(&grads.grads) {
        if !g.data().iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { context: format!("gradient of {}", entry.name) });
        }
    }
    params.step += 1;
    let t = params.step as i32;
    let (b1, b2) = betas;
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);
    for (entry, g) in params.entries.iter_mut().zip(&grads.grads) {
        for ((p, m), (v, gi)) in entry
            .tensor
            .data_mut()
            .iter_mut()
            .zip(entry.m.data_mut())
            .zip(entry.v.data_mut().iter_mut().zip(g.data()))
        {
            let gi = *gi as f64;
            let mf = b1 * *m as f64 + (1.0 - b1) * gi;
            let vf = b2 * *v as f64 + (1.0 - b2) * gi * gi;
            *m = mf as Real;
            *v = vf as Real;
            let update = lr * (mf / bc1) / ((vf / bc2).sqrt() + eps);
            *p -= update as Real;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::network::{LayerSpec, NetworkSpec};
    use super::super::Tensor;
    use super::*;

    fn scalar_setup() -> (NetworkSpec, ParamStore) {
        let spec = NetworkSpec {
            in_channels: 1,
            widths: vec![1],
            layers: vec![LayerSpec::Conv { in_ch: 1, out_ch: 1, kernel: 1, stride: 1, pad: 0 }],
        };
        let params = ParamStore::init(&spec, 0);
        (spec, params)
    }

    fn grads_with(params: &ParamStore, w: Real, b: Real) -> ParamGrads {
        let mut g = ParamGrads::zeros_like(params);
        g.grads[0].data_mut()[0] = w;
        g.grads[1].data_mut()[0] = b;
        g
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let (_, mut params) = scalar_setup();
        params.entries_mut()[0].tensor.data_mut()[0] = 1.5;
        let g = grads_with(&params, 0.0, 0.0);
        adam_step(&mut params, &g, 0.1, (0.9, 0.999), 1e-8).unwrap();
        assert_eq!(params.entries()[0].tensor.data()[0], 1.5);
    }

    #[test]
    fn first_step_magnitude_is_lr() {
        // bias-corrected first step is ~ -lr * sign(g)
        let (_, mut params) = scalar_setup();
        let g = grads_with(&params, 3.0, 0.0);
        adam_step(&mut params, &g, 0.1, (0.9, 0.999), 1e-8).unwrap();
        let w = params.entries()[0].tensor.data()[0] as f64;
        assert!((w + 0.1).abs() < 1e-6, "got {w}");
    }

    #[test]
    fn two_steps_constant_gradient() {
        // constant g = 1, lr = 1e-2: each bias-corrected step moves ~ -1e-2
        let (_, mut params) = scalar_setup();
        for _ in 0..2 {
            let g = grads_with(&params, 1.0, 0.0);
            adam_step(&mut params, &g, 1e-2, (0.9, 0.999), 1e-8).unwrap();
        }
        let w = params.entries()[0].tensor.data()[0] as f64;
        assert!((w + 2e-2).abs() < 1e-6, "got {w}");
    }

    #[test]
    fn non_finite_gradient_aborts_with_name() {
        let (_, mut params) = scalar_setup();
        let mut g = grads_with(&params, 1.0, 0.0);
        g.grads[1] = Tensor::from_vec(&[1], vec![Real::NAN]).unwrap();
        let err = adam_step(&mut params, &g, 0.1, (0.9, 0.999), 1e-8).unwrap_err();
        assert!(err.to_string().contains("layer00.bias"), "{err}");
        // aborted before applying anything
        assert_eq!(params.entries()[0].tensor.data()[0], 0.0);
        assert_eq!(params.step, 0);
    }
}
