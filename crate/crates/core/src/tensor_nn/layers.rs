//! Direct-loop 2D convolution kernels and their exact derivatives.
//!
//! All kernels parallelize over independent output planes; every output
//! element is accumulated by a single sequential loop, so results do not
//! depend on the thread count.

use rayon::prelude::*;

use crate::error::{shape_err, Result};

use super::{Real, Tensor};

/// y[b,oc,oy,ox] = bias[oc] + sum_{ic,ky,kx} w[oc,ic,ky,kx] * x[b,ic,oy*s+ky-p,ox*s+kx-p]
pub fn conv2d(x: &Tensor, w: &Tensor, bias: &Tensor, stride: usize, pad: usize) -> Result<Tensor> {
    let (nb, ic, h, wd) = x.dims4()?;
    let (oc, wic, kh, kw) = w.dims4()?;
    if wic != ic {
        return Err(shape_err("conv2d channels", wic, ic));
    }
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (wd + 2 * pad - kw) / stride + 1;
    let mut y = Tensor::zeros(&[nb, oc, oh, ow]);

    let xd = x.data();
    let wdat = w.data();
    let bd = bias.data();
    y.data_mut()
        .par_chunks_mut(oh * ow)
        .enumerate()
        .for_each(|(plane, out)| {
            let b = plane / oc;
            let o = plane % oc;
            out.iter_mut().for_each(|v| *v = bd[o]);
            for i in 0..ic {
                let xbase = (b * ic + i) * h * wd;
                for ky in 0..kh {
                    for kx in 0..kw {
                        let wv = wdat[((o * ic + i) * kh + ky) * kw + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        for oy in 0..oh {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let xrow = xbase + iy as usize * wd;
                            let orow = oy * ow;
                            // valid ox: 0 <= ox*stride + kx - pad < wd
                            let lo = pad.saturating_sub(kx).div_ceil(stride);
                            let Some(span) = (wd + pad).checked_sub(kx + 1) else { continue };
                            let hi = (span / stride).min(ow - 1);
                            for ox in lo..=hi {
                                let ix = ox * stride + kx - pad;
                                out[orow + ox] += wv * xd[xrow + ix];
                            }
                        }
                    }
                }
            }
        });
    Ok(y)
}

/// Gradient of conv2d w.r.t. its input: the transposed scatter of `gy`.
pub fn conv2d_grad_input(
    gy: &Tensor,
    w: &Tensor,
    stride: usize,
    pad: usize,
    in_h: usize,
    in_w: usize,
) -> Result<Tensor> {
    let (nb, oc, oh, ow) = gy.dims4()?;
    let (woc, ic, kh, kw) = w.dims4()?;
    if woc != oc {
        return Err(shape_err("conv2d_grad_input channels", woc, oc));
    }
    let mut gx = Tensor::zeros(&[nb, ic, in_h, in_w]);
    let gyd = gy.data();
    let wdat = w.data();
    gx.data_mut()
        .par_chunks_mut(in_h * in_w)
        .enumerate()
        .for_each(|(plane, gxp)| {
            let b = plane / ic;
            let i = plane % ic;
            for o in 0..oc {
                let gybase = (b * oc + o) * oh * ow;
                for ky in 0..kh {
                    for kx in 0..kw {
                        let wv = wdat[((o * ic + i) * kh + ky) * kw + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        for oy in 0..oh {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            if iy < 0 || iy >= in_h as isize {
                                continue;
                            }
                            let gxrow = iy as usize * in_w;
                            let gyrow = gybase + oy * ow;
                            let lo = pad.saturating_sub(kx).div_ceil(stride);
                            let Some(span) = (in_w + pad).checked_sub(kx + 1) else { continue };
                            let hi = (span / stride).min(ow - 1);
                            for ox in lo..=hi {
                                let ix = ox * stride + kx - pad;
                                gxp[gxrow + ix] += wv * gyd[gyrow + ox];
                            }
                        }
                    }
                }
            }
        });
    Ok(gx)
}

/// Gradient of conv2d w.r.t. the kernel.
pub fn conv2d_grad_weight(
    gy: &Tensor,
    x: &Tensor,
    stride: usize,
    pad: usize,
    kh: usize,
    kw: usize,
) -> Result<Tensor> {
    let (nb, oc, oh, ow) = gy.dims4()?;
    let (_, ic, h, wd) = x.dims4()?;
    let mut gw = Tensor::zeros(&[oc, ic, kh, kw]);
    let gyd = gy.data();
    let xd = x.data();
    gw.data_mut()
        .par_chunks_mut(ic * kh * kw)
        .enumerate()
        .for_each(|(o, gwo)| {
            for i in 0..ic {
                for ky in 0..kh {
                    for kx in 0..kw {
                        let mut acc = 0.0f64;
                        for b in 0..nb {
                            let gybase = (b * oc + o) * oh * ow;
                            let xbase = (b * ic + i) * h * wd;
                            for oy in 0..oh {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                let xrow = xbase + iy as usize * wd;
                                let gyrow = gybase + oy * ow;
                                let lo = pad.saturating_sub(kx).div_ceil(stride);
                                let Some(span) = (wd + pad).checked_sub(kx + 1) else { continue };
                                let hi = (span / stride).min(ow - 1);
                                for ox in lo..=hi {
                                    let ix = ox * stride + kx - pad;
                                    acc += gyd[gyrow + ox] as f64 * xd[xrow + ix] as f64;
                                }
                            }
                        }
                        gwo[(i * kh + ky) * kw + kx] = acc as Real;
                    }
                }
            }
        });
    Ok(gw)
}

/// Gradient of a convolution bias: per-channel sum of `gy`.
pub fn grad_bias(gy: &Tensor) -> Result<Tensor> {
    let (nb, oc, oh, ow) = gy.dims4()?;
    let mut gb = Tensor::zeros(&[oc]);
    let gyd = gy.data();
    for o in 0..oc {
        let mut acc = 0.0f64;
        for b in 0..nb {
            let base = (b * oc + o) * oh * ow;
            for v in &gyd[base..base + oh * ow] {
                acc += *v as f64;
            }
        }
        gb.data_mut()[o] = acc as Real;
    }
    Ok(gb)
}

/// Transposed convolution with kernel size == stride (non-overlapping
/// upsampling). Weight layout [ic, oc, k, k].
/// y[b,oc,iy*k+ky,ix*k+kx] = bias[oc] + sum_ic x[b,ic,iy,ix] * w[ic,oc,ky,kx]
pub fn convt2d(x: &Tensor, w: &Tensor, bias: &Tensor, k: usize) -> Result<Tensor> {
    let (nb, ic, h, wd) = x.dims4()?;
    let (wic, oc, kh, kw) = w.dims4()?;
    if wic != ic || kh != k || kw != k {
        return Err(shape_err("convt2d weight", format!("[{ic},*,{k},{k}]"), format!("{:?}", w.dims())));
    }
    let (oh, ow) = (h * k, wd * k);
    let mut y = Tensor::zeros(&[nb, oc, oh, ow]);
    let xd = x.data();
    let wdat = w.data();
    let bd = bias.data();
    y.data_mut()
        .par_chunks_mut(oh * ow)
        .enumerate()
        .for_each(|(plane, out)| {
            let b = plane / oc;
            let o = plane % oc;
            out.iter_mut().for_each(|v| *v = bd[o]);
            for i in 0..ic {
                let xbase = (b * ic + i) * h * wd;
                for ky in 0..k {
                    for kx in 0..k {
                        let wv = wdat[((i * oc + o) * k + ky) * k + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        for iy in 0..h {
                            let xrow = xbase + iy * wd;
                            let orow = (iy * k + ky) * ow + kx;
                            for ix in 0..wd {
                                out[orow + ix * k] += wv * xd[xrow + ix];
                            }
                        }
                    }
                }
            }
        });
    Ok(y)
}

pub fn convt2d_grad_input(gy: &Tensor, w: &Tensor, k: usize) -> Result<Tensor> {
    let (nb, oc, oh, ow) = gy.dims4()?;
    let (ic, woc, _, _) = w.dims4()?;
    if woc != oc {
        return Err(shape_err("convt2d_grad_input channels", woc, oc));
    }
    let (h, wd) = (oh / k, ow / k);
    let mut gx = Tensor::zeros(&[nb, ic, h, wd]);
    let gyd = gy.data();
    let wdat = w.data();
    gx.data_mut()
        .par_chunks_mut(h * wd)
        .enumerate()
        .for_each(|(plane, gxp)| {
            let b = plane / ic;
            let i = plane % ic;
            for o in 0..oc {
                let gybase = (b * oc + o) * oh * ow;
                for ky in 0..k {
                    for kx in 0..k {
                        let wv = wdat[((i * oc + o) * k + ky) * k + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        for iy in 0..h {
                            let gyrow = gybase + (iy * k + ky) * ow + kx;
                            let gxrow = iy * wd;
                            for ix in 0..wd {
                                gxp[gxrow + ix] += wv * gyd[gyrow + ix * k];
                            }
                        }
                    }
                }
            }
        });
    Ok(gx)
}

pub fn convt2d_grad_weight(gy: &Tensor, x: &Tensor, k: usize) -> Result<Tensor> {
    let (nb, oc, oh, ow) = gy.dims4()?;
    let (_, ic, h, wd) = x.dims4()?;
    let mut gw = Tensor::zeros(&[ic, oc, k, k]);
    let gyd = gy.data();
    let xd = x.data();
    gw.data_mut()
        .par_chunks_mut(oc * k * k)
        .enumerate()
        .for_each(|(i, gwi)| {
            for o in 0..oc {
                for ky in 0..k {
                    for kx in 0..k {
                        let mut acc = 0.0f64;
                        for b in 0..nb {
                            let gybase = (b * oc + o) * oh * ow;
                            let xbase = (b * ic + i) * h * wd;
                            for iy in 0..h {
                                let gyrow = gybase + (iy * k + ky) * ow + kx;
                                let xrow = xbase + iy * wd;
                                for ix in 0..wd {
                                    acc += gyd[gyrow + ix * k] as f64 * xd[xrow + ix] as f64;
                                }
                            }
                        }
                        gwi[(o * k + ky) * k + kx] = acc as Real;
                    }
                }
            }
        });
    Ok(gw)
}

pub fn relu(x: &Tensor) -> Tensor {
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| {
        if *v < 0.0 {
            *v = 0.0;
        }
    });
    y
}

/// gx = gy where the forward input was positive, else 0.
pub fn relu_backward(gy: &Tensor, x: &Tensor) -> Tensor {
    let mut gx = gy.clone();
    for (g, v) in gx.data_mut().iter_mut().zip(x.data()) {
        if *v <= 0.0 {
            *g = 0.0;
        }
    }
    gx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(dims: &[usize], data: Vec<Real>) -> Tensor {
        Tensor::from_vec(dims, data).unwrap()
    }

    #[test]
    fn conv1x1_scales() {
        // 1x1 conv, weight 2.0, bias 0, input 3.0 -> 6.0
        let x = t(&[1, 1, 1, 1], vec![3.0]);
        let w = t(&[1, 1, 1, 1], vec![2.0]);
        let b = Tensor::zeros(&[1]);
        let y = conv2d(&x, &w, &b, 1, 0).unwrap();
        assert_eq!(y.data(), &[6.0]);
    }

    #[test]
    fn relu_clamps_negative() {
        let x = t(&[1, 1, 1, 2], vec![-1.5, 2.0]);
        let y = relu(&x);
        assert_eq!(y.data(), &[0.0, 2.0]);
    }

    #[test]
    fn conv3x3_ones_center() {
        // all-ones 3x3 kernel on an 8x8 all-ones image, zero padding:
        // center pixel sums 9 contributions.
        let x = t(&[1, 1, 8, 8], vec![1.0; 64]);
        let w = t(&[1, 1, 3, 3], vec![1.0; 9]);
        let b = Tensor::zeros(&[1]);
        let y = conv2d(&x, &w, &b, 1, 1).unwrap();
        assert_eq!(y.dims(), &[1, 1, 8, 8]);
        assert_eq!(y.data()[4 * 8 + 4], 9.0);
        // corner only sees a 2x2 neighborhood
        assert_eq!(y.data()[0], 4.0);
    }

    #[test]
    fn strided_conv_halves_dims() {
        let x = Tensor::zeros(&[2, 3, 8, 8]);
        let w = Tensor::zeros(&[5, 3, 2, 2]);
        let b = Tensor::zeros(&[5]);
        let y = conv2d(&x, &w, &b, 2, 0).unwrap();
        assert_eq!(y.dims(), &[2, 5, 4, 4]);
    }

    #[test]
    fn convt_doubles_dims_and_is_adjoint_of_its_grad() {
        // <convt(x), y> == <x, convt_grad_input(y)>
        let mut rng = 1234u64;
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((rng >> 33) as f64 / (1u64 << 31) as f64 - 0.5) as Real
        };
        let x = t(&[1, 3, 4, 4], (0..48).map(|_| next()).collect());
        let w = t(&[3, 2, 2, 2], (0..24).map(|_| next()).collect());
        let b = Tensor::zeros(&[2]);
        let y = convt2d(&x, &w, &b, 2).unwrap();
        assert_eq!(y.dims(), &[1, 2, 8, 8]);
        let cot = t(&[1, 2, 8, 8], (0..128).map(|_| next()).collect());
        let gx = convt2d_grad_input(&cot, &w, 2).unwrap();
        let lhs = y.dot(&cot);
        let rhs = gx.dot(&x);
        assert!((lhs - rhs).abs() <= 1e-4 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }
}
