//! Test-only helpers: finite-difference oracles that are independent of the
//! reverse-mode implementation they check. Compiled always so integration
//! tests can reach them; not part of the public API surface.
#![doc(hidden)]

use crate::tensor_nn::{forward_with_tape, LayerSpec, NetworkSpec, ParamStore, Real, Tensor};

/// Base relative finite-difference step. The f64 build can afford a much
/// smaller step, which keeps the O(eps^2) truncation of parameter-space
/// probes below the 1e-6 check tolerance.
#[cfg(not(feature = "real64"))]
pub const FD_EPS_REL: f64 = 1e-3;
#[cfg(feature = "real64")]
pub const FD_EPS_REL: f64 = 1e-5;

/// Count ReLU input sign flips between two forward passes. A central
/// difference is only a valid derivative oracle for the piecewise-linear
/// network when this is zero over the probed interval.
pub fn relu_flips(spec: &NetworkSpec, params: &ParamStore, a: &Tensor, b: &Tensor) -> usize {
    let ta = forward_with_tape(spec, params, a).unwrap();
    let tb = forward_with_tape(spec, params, b).unwrap();
    let mut flips = 0;
    for (idx, layer) in spec.layers.iter().enumerate() {
        if matches!(layer, LayerSpec::Relu) {
            for (x, y) in ta.acts[idx].data().iter().zip(tb.acts[idx].data()) {
                if (*x > 0.0) != (*y > 0.0) {
                    flips += 1;
                }
            }
        }
    }
    flips
}

fn shifted(x: &Tensor, d: &Tensor, step: f64) -> Tensor {
    let mut y = x.clone();
    for (v, dv) in y.data_mut().iter_mut().zip(d.data()) {
        *v += (step as Real) * *dv;
    }
    y
}

/// One valid finite-difference probe: the measured directional derivative
/// together with the perturbation that was actually realized after rounding.
/// Compare `fd` against `<gradient, realized_dir>`.
pub struct FdProbe {
    /// <y(x+) - y(x-), cot> / (2 eps), difference-first in f64.
    pub fd: f64,
    /// (x+ - x-) / (2 eps), elementwise, exact in f64.
    pub realized_dir: Vec<f64>,
}

/// Central finite difference of <forward(x), cot> along `d`, with the step
/// shrunk until the interval [x - eps d, x + eps d] crosses no ReLU kink
/// (the network is piecewise linear in its input, so a kink-free central
/// difference is exact up to rounding). Returns None if no kink-free step
/// leaves a nonzero realized perturbation.
pub fn directional_fd(
    spec: &NetworkSpec,
    params: &ParamStore,
    x: &Tensor,
    cot: &Tensor,
    d: &Tensor,
) -> Option<FdProbe> {
    // Shrinking far below the starting step would push the measurement into
    // f32 rounding noise, so give up after a few halvings and let the caller
    // resample x instead.
    let mut eps = FD_EPS_REL * x.norm().max(1.0) / d.norm().max(1e-12);
    for _ in 0..4 {
        let xp = shifted(x, d, eps);
        let xm = shifted(x, d, -eps);
        // screen the center too: a preactivation sitting at ~0 within
        // rounding jitter can agree at the endpoints yet flip at x
        if relu_flips(spec, params, &xp, &xm) == 0
            && relu_flips(spec, params, x, &xp) == 0
            && relu_flips(spec, params, x, &xm) == 0
        {
            let realized_dir: Vec<f64> = xp
                .data()
                .iter()
                .zip(xm.data())
                .map(|(p, m)| (*p as f64 - *m as f64) / (2.0 * eps))
                .collect();
            if realized_dir.iter().all(|v| *v == 0.0) {
                return None;
            }
            let yp = forward_with_tape(spec, params, &xp).unwrap();
            let ym = forward_with_tape(spec, params, &xm).unwrap();
            let mut diff = 0.0f64;
            for ((p, m), c) in yp.output().data().iter().zip(ym.output().data()).zip(cot.data()) {
                diff += (*p as f64 - *m as f64) * *c as f64;
            }
            return Some(FdProbe { fd: diff / (2.0 * eps), realized_dir });
        }
        eps *= 0.5;
    }
    None
}

fn shifted_params(params: &ParamStore, dtheta: &[Tensor], step: f64) -> ParamStore {
    let mut p = params.clone();
    for (e, d) in p.entries_mut().iter_mut().zip(dtheta) {
        for (v, dv) in e.tensor.data_mut().iter_mut().zip(d.data()) {
            *v += (step as Real) * *dv;
        }
    }
    p
}

/// Central finite difference of <forward(x; theta), cot> along a parameter
/// direction, kink-screened like [`directional_fd`]. The network output is
/// smooth in theta within a fixed ReLU pattern, so this carries an O(eps^2)
/// truncation term; `realized_dir` is the per-parameter realized direction,
/// concatenated in entry order.
pub fn param_directional_fd(
    spec: &NetworkSpec,
    params: &ParamStore,
    x: &Tensor,
    cot: &Tensor,
    dtheta: &[Tensor],
) -> Option<FdProbe> {
    let theta_norm: f64 = params.entries().iter().map(|e| e.tensor.norm_sq()).sum::<f64>();
    let d_norm: f64 = dtheta.iter().map(|t| t.norm_sq()).sum::<f64>();
    let mut eps = FD_EPS_REL * theta_norm.sqrt().max(1.0) / d_norm.sqrt().max(1e-12);
    for _ in 0..4 {
        let pp = shifted_params(params, dtheta, eps);
        let pm = shifted_params(params, dtheta, -eps);
        let tp = forward_with_tape(spec, &pp, x).unwrap();
        let tm = forward_with_tape(spec, &pm, x).unwrap();
        let tc = forward_with_tape(spec, params, x).unwrap();
        let mut flips = 0;
        for (idx, layer) in spec.layers.iter().enumerate() {
            if matches!(layer, LayerSpec::Relu) {
                for ((a, b), c) in tp.acts[idx]
                    .data()
                    .iter()
                    .zip(tm.acts[idx].data())
                    .zip(tc.acts[idx].data())
                {
                    if (*a > 0.0) != (*b > 0.0) || (*a > 0.0) != (*c > 0.0) {
                        flips += 1;
                    }
                }
            }
        }
        if flips == 0 {
            let mut realized_dir = Vec::new();
            for (ep, em) in pp.entries().iter().zip(pm.entries()) {
                for (a, b) in ep.tensor.data().iter().zip(em.tensor.data()) {
                    realized_dir.push((*a as f64 - *b as f64) / (2.0 * eps));
                }
            }
            if realized_dir.iter().all(|v| *v == 0.0) {
                return None;
            }
            let mut diff = 0.0f64;
            for ((p, m), c) in tp.output().data().iter().zip(tm.output().data()).zip(cot.data()) {
                diff += (*p as f64 - *m as f64) * *c as f64;
            }
            return Some(FdProbe { fd: diff / (2.0 * eps), realized_dir });
        }
        eps *= 0.5;
    }
    None
}

/// Relative error with a symmetric denominator.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}
