//! Fixed feed-forward layer graph: spec, parameters, and differentiation sweeps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{shape_err, Error, Result};

use super::layers;
use super::{Real, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    /// 2D convolution, weight [out_ch, in_ch, kernel, kernel].
    Conv { in_ch: usize, out_ch: usize, kernel: usize, stride: usize, pad: usize },
    /// Transposed convolution with stride == kernel, weight [in_ch, out_ch, k, k].
    ConvTranspose { in_ch: usize, out_ch: usize, kernel: usize },
    Relu,
    /// Remember the current activation under `slot`.
    SkipSave { slot: usize },
    /// Add the activation remembered under `slot`.
    SkipAdd { slot: usize },
}

/// Layer list plus channel bookkeeping. Input and output channel counts are
/// equal so the network can parameterize a residual map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub in_channels: usize,
    pub widths: Vec<usize>,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// U-shaped residual network: 3x3 convolutions at each level, 2x2
    /// stride-2 resampling between levels, additive skip connections.
    pub fn residual_unet(io_channels: usize, widths: &[usize]) -> Self {
        assert!(!widths.is_empty());
        let mut layers = Vec::new();
        let conv = |i, o| LayerSpec::Conv { in_ch: i, out_ch: o, kernel: 3, stride: 1, pad: 1 };
        let down = |i, o| LayerSpec::Conv { in_ch: i, out_ch: o, kernel: 2, stride: 2, pad: 0 };
        let up = |i, o| LayerSpec::ConvTranspose { in_ch: i, out_ch: o, kernel: 2 };

        layers.push(conv(io_channels, widths[0]));
        layers.push(LayerSpec::Relu);
        for level in 0..widths.len() {
            layers.push(conv(widths[level], widths[level]));
            layers.push(LayerSpec::Relu);
            if level + 1 < widths.len() {
                layers.push(LayerSpec::SkipSave { slot: level });
                layers.push(down(widths[level], widths[level + 1]));
                layers.push(LayerSpec::Relu);
            }
        }
        for level in (0..widths.len() - 1).rev() {
            layers.push(up(widths[level + 1], widths[level]));
            layers.push(LayerSpec::SkipAdd { slot: level });
            layers.push(LayerSpec::Relu);
            layers.push(conv(widths[level], widths[level]));
            layers.push(LayerSpec::Relu);
        }
        layers.push(conv(widths[0], io_channels));

        NetworkSpec { in_channels: io_channels, widths: widths.to_vec(), layers }
    }

    /// Channel-flow consistency, residual compatibility, width monotonicity.
    pub fn validate(&self) -> Result<()> {
        if !self.widths.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(format!(
                "channel widths must strictly increase with depth: {:?}",
                self.widths
            )));
        }
        let mut ch = self.in_channels;
        let mut saved: HashMap<usize, usize> = HashMap::new();
        for (idx, layer) in self.layers.iter().enumerate() {
            match layer {
                LayerSpec::Conv { in_ch, out_ch, .. }
                | LayerSpec::ConvTranspose { in_ch, out_ch, .. } => {
                    if *in_ch != ch {
                        return Err(shape_err(
                            &format!("layer {idx} input channels"),
                            in_ch,
                            ch,
                        ));
                    }
                    ch = *out_ch;
                }
                LayerSpec::Relu => {}
                LayerSpec::SkipSave { slot } => {
                    saved.insert(*slot, ch);
                }
                LayerSpec::SkipAdd { slot } => {
                    let s = saved.get(slot).ok_or_else(|| {
                        Error::InvalidConfig(format!("skip slot {slot} added before saved"))
                    })?;
                    if *s != ch {
                        return Err(shape_err(&format!("skip slot {slot} channels"), s, ch));
                    }
                }
            }
        }
        if ch != self.in_channels {
            return Err(shape_err("network output channels", self.in_channels, ch));
        }
        Ok(())
    }

    /// Spatial dims must be divisible by this (2^(levels-1)).
    pub fn downsample_factor(&self) -> usize {
        1 << (self.widths.len().saturating_sub(1))
    }

    /// Index of the last convolution layer (zero-initialized by `ParamStore::init`).
    fn last_conv_index(&self) -> Option<usize> {
        self.layers
            .iter()
            .rposition(|l| matches!(l, LayerSpec::Conv { .. } | LayerSpec::ConvTranspose { .. }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub tensor: Tensor,
    /// Adam first moment.
    pub m: Tensor,
    /// Adam second moment.
    pub v: Tensor,
}

/// Named parameter tensors in deterministic layer order, with per-parameter
/// optimizer state. Checkpoints persist the tensors only; moments reset on load.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    pub(crate) entries: Vec<ParamEntry>,
    /// Base entry index per layer (None for parameterless layers).
    pub(crate) layer_entry: Vec<Option<usize>>,
    /// Adam step counter.
    pub(crate) step: u64,
}

impl ParamStore {
    /// He-normal initialization; the final convolution is zero-initialized so
    /// the full network maps everything to zero at the start of training.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last_conv = spec.last_conv_index();
        let mut entries = Vec::new();
        let mut layer_entry = vec![None; spec.layers.len()];
        for (idx, layer) in spec.layers.iter().enumerate() {
            let (wdims, fan_in, out_ch) = match layer {
                LayerSpec::Conv { in_ch, out_ch, kernel, .. } => {
                    (vec![*out_ch, *in_ch, *kernel, *kernel], in_ch * kernel * kernel, *out_ch)
                }
                LayerSpec::ConvTranspose { in_ch, out_ch, kernel } => {
                    (vec![*in_ch, *out_ch, *kernel, *kernel], *in_ch, *out_ch)
                }
                _ => continue,
            };
            let mut w = Tensor::zeros(&wdims);
            if Some(idx) != last_conv {
                let std = (2.0 / fan_in as f64).sqrt();
                for v in w.data_mut() {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    *v = (n * std) as Real;
                }
            }
            layer_entry[idx] = Some(entries.len());
            entries.push(ParamEntry {
                name: format!("layer{idx:02}.weight"),
                m: Tensor::zeros(w.dims()),
                v: Tensor::zeros(w.dims()),
                tensor: w,
            });
            let b = Tensor::zeros(&[out_ch]);
            entries.push(ParamEntry {
                name: format!("layer{idx:02}.bias"),
                m: Tensor::zeros(b.dims()),
                v: Tensor::zeros(b.dims()),
                tensor: b,
            });
        }
        ParamStore { entries, layer_entry, step: 0 }
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [ParamEntry] {
        &mut self.entries
    }

    pub fn n_params(&self) -> usize {
        self.entries.iter().map(|e| e.tensor.len()).sum()
    }

    fn weight(&self, layer: usize) -> (&Tensor, &Tensor) {
        let base = self.layer_entry[layer].expect("layer has parameters");
        (&self.entries[base].tensor, &self.entries[base + 1].tensor)
    }
}

/// Per-parameter gradients, aligned with `ParamStore::entries` order.
#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub grads: Vec<Tensor>,
}

impl ParamGrads {
    pub fn zeros_like(params: &ParamStore) -> Self {
        ParamGrads { grads: params.entries.iter().map(|e| Tensor::zeros(e.tensor.dims())).collect() }
    }

    pub fn scale(&mut self, s: Real) {
        for g in &mut self.grads {
            g.scale(s);
        }
    }

    pub fn add_assign(&mut self, other: &ParamGrads) -> Result<()> {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    fn accumulate(&mut self, entry_base: usize, gw: Tensor, gb: Option<Tensor>) -> Result<()> {
        self.grads[entry_base].add_assign(&gw)?;
        if let Some(gb) = gb {
            self.grads[entry_base + 1].add_assign(&gb)?;
        }
        Ok(())
    }
}

/// Activations recorded during a forward pass: `acts[l]` is the input to
/// layer `l`, `acts[layers.len()]` the network output.
pub struct Tape {
    pub acts: Vec<Tensor>,
}

impl Tape {
    pub fn output(&self) -> &Tensor {
        self.acts.last().unwrap()
    }
}

fn check_input(spec: &NetworkSpec, x: &Tensor) -> Result<()> {
    let (_, c, h, w) = x.dims4()?;
    if c != spec.in_channels {
        return Err(shape_err("network input channels", spec.in_channels, c));
    }
    let d = spec.downsample_factor();
    if h % d != 0 || w % d != 0 {
        return Err(shape_err(
            "network input spatial dims",
            format!("divisible by {d}"),
            format!("{h}x{w}"),
        ));
    }
    Ok(())
}

fn apply_layer(
    layer: &LayerSpec,
    layer_idx: usize,
    params: &ParamStore,
    x: &Tensor,
    saves: &HashMap<usize, Tensor>,
) -> Result<Tensor> {
    let y = match layer {
        LayerSpec::Conv { kernel: _, stride, pad, .. } => {
            let (w, b) = params.weight(layer_idx);
            layers::conv2d(x, w, b, *stride, *pad)?
        }
        LayerSpec::ConvTranspose { kernel, .. } => {
            let (w, b) = params.weight(layer_idx);
            layers::convt2d(x, w, b, *kernel)?
        }
        LayerSpec::Relu => layers::relu(x),
        LayerSpec::SkipSave { .. } => x.clone(),
        LayerSpec::SkipAdd { slot } => {
            let mut y = x.clone();
            y.add_assign(saves.get(slot).ok_or_else(|| {
                Error::InvalidConfig(format!("skip slot {slot} used before saved"))
            })?)?;
            y
        }
    };
    y.check_finite(&format!("layer {layer_idx} ({layer:?}) output"))?;
    Ok(y)
}

/// Run the network, recording all intermediate activations.
pub fn forward_with_tape(spec: &NetworkSpec, params: &ParamStore, x: &Tensor) -> Result<Tape> {
    check_input(spec, x)?;
    let mut acts = Vec::with_capacity(spec.layers.len() + 1);
    let mut saves: HashMap<usize, Tensor> = HashMap::new();
    acts.push(x.clone());
    for (idx, layer) in spec.layers.iter().enumerate() {
        let y = apply_layer(layer, idx, params, &acts[idx], &saves)?;
        if let LayerSpec::SkipSave { slot } = layer {
            saves.insert(*slot, y.clone());
        }
        acts.push(y);
    }
    Ok(Tape { acts })
}

/// Pure function of (params, x): the network output.
pub fn forward(spec: &NetworkSpec, params: &ParamStore, x: &Tensor) -> Result<Tensor> {
    Ok(forward_with_tape(spec, params, x)?.acts.pop().unwrap())
}

/// Reverse sweep shared by `vjp` and `vjp_input`.
fn reverse(
    spec: &NetworkSpec,
    params: &ParamStore,
    tape: &Tape,
    cotangent: &Tensor,
    mut param_grads: Option<&mut ParamGrads>,
) -> Result<Tensor> {
    if cotangent.dims() != tape.output().dims() {
        return Err(shape_err(
            "vjp cotangent dims",
            format!("{:?}", tape.output().dims()),
            format!("{:?}", cotangent.dims()),
        ));
    }
    let mut cot = cotangent.clone();
    let mut skip_cots: HashMap<usize, Tensor> = HashMap::new();
    for (idx, layer) in spec.layers.iter().enumerate().rev() {
        let x_in = &tape.acts[idx];
        cot = match layer {
            LayerSpec::Conv { kernel, stride, pad, .. } => {
                let (w, _) = params.weight(idx);
                if let Some(pg) = param_grads.as_deref_mut() {
                    let gw = layers::conv2d_grad_weight(&cot, x_in, *stride, *pad, *kernel, *kernel)?;
                    let gb = layers::grad_bias(&cot)?;
                    pg.accumulate(params.layer_entry[idx].unwrap(), gw, Some(gb))?;
                }
                let (_, _, h, wd) = x_in.dims4()?;
                layers::conv2d_grad_input(&cot, w, *stride, *pad, h, wd)?
            }
            LayerSpec::ConvTranspose { kernel, .. } => {
                let (w, _) = params.weight(idx);
                if let Some(pg) = param_grads.as_deref_mut() {
                    let gw = layers::convt2d_grad_weight(&cot, x_in, *kernel)?;
                    let gb = layers::grad_bias(&cot)?;
                    pg.accumulate(params.layer_entry[idx].unwrap(), gw, Some(gb))?;
                }
                layers::convt2d_grad_input(&cot, w, *kernel)?
            }
            LayerSpec::Relu => layers::relu_backward(&cot, x_in),
            LayerSpec::SkipSave { slot } => {
                let mut c = cot;
                if let Some(extra) = skip_cots.remove(slot) {
                    c.add_assign(&extra)?;
                }
                c
            }
            LayerSpec::SkipAdd { slot } => {
                skip_cots.insert(*slot, cot.clone());
                cot
            }
        };
    }
    Ok(cot)
}

/// Exact reverse-mode derivatives of <forward(x), cotangent> with respect to
/// both the input and every parameter.
pub fn vjp(
    spec: &NetworkSpec,
    params: &ParamStore,
    x: &Tensor,
    cotangent: &Tensor,
) -> Result<(Tensor, ParamGrads)> {
    let tape = forward_with_tape(spec, params, x)?;
    let mut pg = ParamGrads::zeros_like(params);
    let gx = reverse(spec, params, &tape, cotangent, Some(&mut pg))?;
    Ok((gx, pg))
}

/// Input gradient only, reusing a recorded tape. Skips all weight-gradient
/// work; this is the hot path of reconstruction.
pub fn vjp_input(
    spec: &NetworkSpec,
    params: &ParamStore,
    tape: &Tape,
    cotangent: &Tensor,
) -> Result<Tensor> {
    reverse(spec, params, tape, cotangent, None)
}

/// Forward-mode sweep: directional derivative of the network along `tangent`,
/// linearized at the tape's primal point. Returns the tangent of every
/// activation (`tans[l]` pairs with `tape.acts[l]`).
pub fn jvp(
    spec: &NetworkSpec,
    params: &ParamStore,
    tape: &Tape,
    tangent: &Tensor,
) -> Result<Vec<Tensor>> {
    if tangent.dims() != tape.acts[0].dims() {
        return Err(shape_err(
            "jvp tangent dims",
            format!("{:?}", tape.acts[0].dims()),
            format!("{:?}", tangent.dims()),
        ));
    }
    let mut tans = Vec::with_capacity(spec.layers.len() + 1);
    tans.push(tangent.clone());
    let mut saves: HashMap<usize, usize> = HashMap::new();
    for (idx, layer) in spec.layers.iter().enumerate() {
        let t_in = &tans[idx];
        let t_out = match layer {
            LayerSpec::Conv { out_ch, kernel: _, stride, pad, .. } => {
                let (w, _) = params.weight(idx);
                let zero_b = Tensor::zeros(&[*out_ch]);
                layers::conv2d(t_in, w, &zero_b, *stride, *pad)?
            }
            LayerSpec::ConvTranspose { out_ch, kernel, .. } => {
                let (w, _) = params.weight(idx);
                let zero_b = Tensor::zeros(&[*out_ch]);
                layers::convt2d(t_in, w, &zero_b, *kernel)?
            }
            LayerSpec::Relu => layers::relu_backward(t_in, &tape.acts[idx]),
            LayerSpec::SkipSave { slot } => {
                saves.insert(*slot, idx + 1);
                t_in.clone()
            }
            LayerSpec::SkipAdd { slot } => {
                let mut t = t_in.clone();
                let pos = *saves.get(slot).ok_or_else(|| {
                    Error::InvalidConfig(format!("skip slot {slot} used before saved"))
                })?;
                let saved = tans[pos].clone();
                t.add_assign(&saved)?;
                t
            }
        };
        tans.push(t_out);
    }
    Ok(tans)
}

/// Combined reverse sweep over the (forward + jvp) computation.
///
/// Given primal activations `tape`, tangent activations `tans` (from [`jvp`]),
/// and cotangents of the primal output and tangent output, accumulates the
/// parameter gradient of
///   s = <cot_primal_out, forward(x)> + <cot_tangent_out, d forward(x)[tangent]>
/// treating ReLU masks as locally constant (exact almost everywhere).
pub fn vjp_with_tangent(
    spec: &NetworkSpec,
    params: &ParamStore,
    tape: &Tape,
    tans: &[Tensor],
    cot_primal_out: &Tensor,
    cot_tangent_out: &Tensor,
) -> Result<ParamGrads> {
    let mut pg = ParamGrads::zeros_like(params);
    let mut ca = cot_primal_out.clone();
    let mut ct = cot_tangent_out.clone();
    let mut skip_ca: HashMap<usize, Tensor> = HashMap::new();
    let mut skip_ct: HashMap<usize, Tensor> = HashMap::new();
    for (idx, layer) in spec.layers.iter().enumerate().rev() {
        let a_in = &tape.acts[idx];
        let t_in = &tans[idx];
        match layer {
            LayerSpec::Conv { kernel, stride, pad, .. } => {
                let (w, _) = params.weight(idx);
                let base = params.layer_entry[idx].unwrap();
                let mut gw = layers::conv2d_grad_weight(&ca, a_in, *stride, *pad, *kernel, *kernel)?;
                gw.add_assign(&layers::conv2d_grad_weight(&ct, t_in, *stride, *pad, *kernel, *kernel)?)?;
                let gb = layers::grad_bias(&ca)?;
                pg.accumulate(base, gw, Some(gb))?;
                let (_, _, h, wd) = a_in.dims4()?;
                ca = layers::conv2d_grad_input(&ca, w, *stride, *pad, h, wd)?;
                ct = layers::conv2d_grad_input(&ct, w, *stride, *pad, h, wd)?;
            }
            LayerSpec::ConvTranspose { kernel, .. } => {
                let (w, _) = params.weight(idx);
                let base = params.layer_entry[idx].unwrap();
                let mut gw = layers::convt2d_grad_weight(&ca, a_in, *kernel)?;
                gw.add_assign(&layers::convt2d_grad_weight(&ct, t_in, *kernel)?)?;
                let gb = layers::grad_bias(&ca)?;
                pg.accumulate(base, gw, Some(gb))?;
                ca = layers::convt2d_grad_input(&ca, w, *kernel)?;
                ct = layers::convt2d_grad_input(&ct, w, *kernel)?;
            }
            LayerSpec::Relu => {
                ca = layers::relu_backward(&ca, a_in);
                ct = layers::relu_backward(&ct, a_in);
            }
            LayerSpec::SkipSave { slot } => {
                if let Some(extra) = skip_ca.remove(slot) {
                    ca.add_assign(&extra)?;
                }
                if let Some(extra) = skip_ct.remove(slot) {
                    ct.add_assign(&extra)?;
                }
            }
            LayerSpec::SkipAdd { slot } => {
                skip_ca.insert(*slot, ca.clone());
                skip_ct.insert(*slot, ct.clone());
            }
        }
    }
    Ok(pg)
}
